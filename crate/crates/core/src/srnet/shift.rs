//! Shift regressor: strided convolutions over a stacked (SR, HR) pair,
//! global average pooling and a saturating linear head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::nn::{leaky_relu, leaky_relu_backward, Conv2d, Dense, Parameters, Tensor};
use crate::error::{Error, Result};
use crate::image::Image2D;

/// Hyperparameters of [`ShiftModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftConfig {
    pub channels: usize,
    pub layers: usize,
    pub max_shift: f32,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            channels: 16,
            layers: 5,
            max_shift: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftModel {
    pub config: ShiftConfig,
    pub convs: Vec<Conv2d>,
    pub head: Dense,
}

pub struct ShiftCache {
    inputs: Vec<Tensor>,
    pres: Vec<Tensor>,
    pooled: Vec<f32>,
    raw: [f32; 2],
}

impl ShiftModel {
    /// Strided layers use fan-in init; the head is zero so an untrained
    /// model predicts no shift.
    pub fn new(config: ShiftConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = config.channels;
        let convs = (0..config.layers)
            .map(|i| Conv2d::init(if i == 0 { 2 } else { c }, c, 2, true, 1.0, &mut rng))
            .collect();
        Self {
            config,
            convs,
            head: Dense::zeros(c, 2),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            convs: self.convs.iter().map(Conv2d::zeros_like).collect(),
            head: self.head.zeros_like(),
        }
    }

    /// Stack and normalize a pair by the statistics of `hr`.
    pub fn pair_tensor(sr: &Image2D, hr: &Image2D) -> Result<Tensor> {
        hr.require_same_shape(sr, "shift_forward")?;
        let std = hr.std();
        let scale = if std > 0.0 { 1.0 / std } else { 1.0 };
        Ok(Tensor::from_images(&[sr, hr], hr.mean(), scale))
    }

    pub fn forward_cached(&self, x: Tensor) -> ([f32; 2], ShiftCache) {
        let mut inputs = Vec::with_capacity(self.convs.len());
        let mut pres = Vec::with_capacity(self.convs.len());
        let mut h = x;
        for conv in &self.convs {
            let pre = conv.forward(&h);
            let next = leaky_relu(&pre);
            inputs.push(h);
            pres.push(pre);
            h = next;
        }
        let n = h.plane_len() as f32;
        let pooled: Vec<f32> = (0..h.c).map(|c| h.plane(c).iter().sum::<f32>() / n).collect();
        let y = self.head.forward(&pooled);
        let raw = [y[0], y[1]];
        let m = self.config.max_shift;
        (
            [m * raw[0].tanh(), m * raw[1].tanh()],
            ShiftCache {
                inputs,
                pres,
                pooled,
                raw,
            },
        )
    }

    /// Parameter gradients for a loss gradient `g` on the output shift.
    pub fn backward(&self, cache: &ShiftCache, g: [f32; 2]) -> ShiftModel {
        let mut grads = self.zeros_like();
        let m = self.config.max_shift;
        let gy: Vec<f32> = (0..2)
            .map(|i| g[i] * m * (1.0 - cache.raw[i].tanh().powi(2)))
            .collect();
        let gpool = self.head.backward(&cache.pooled, &gy, &mut grads.head);
        let last = cache.pres.last().expect("at least one layer");
        let n = last.plane_len() as f32;
        let mut gh = Tensor::zeros(last.c, last.h, last.w);
        for (c, gp) in gpool.iter().enumerate() {
            gh.plane_mut(c).iter_mut().for_each(|v| *v = gp / n);
        }
        for (i, conv) in self.convs.iter().enumerate().rev() {
            let gpre = leaky_relu_backward(&cache.pres[i], &gh);
            match conv.backward(&cache.inputs[i], &gpre, &mut grads.convs[i], i > 0) {
                Some(gx) => gh = gx,
                None => break,
            }
        }
        grads
    }
}

impl Parameters for ShiftModel {
    fn visit(&self, f: &mut dyn FnMut(&[f32])) {
        self.convs.iter().for_each(|c| c.visit(f));
        self.head.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32])) {
        self.convs.iter_mut().for_each(|c| c.visit_mut(f));
        self.head.visit_mut(f);
    }
}

/// Estimated shift `(dx, dy)` in pixels such that shifting `sr` by it aligns with `hr`.
pub fn shift_forward(model: &ShiftModel, sr: &Image2D, hr: &Image2D) -> Result<(f64, f64)> {
    if sr.width() < 2 || sr.height() < 2 {
        return Err(Error::Dimension("shift_forward needs at least 2x2 images".into()));
    }
    let (d, _) = model.forward_cached(ShiftModel::pair_tensor(sr, hr)?);
    Ok((d[0] as f64, d[1] as f64))
}
