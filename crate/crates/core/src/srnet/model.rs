//! The fusion network: a shared encoder applied to every up-sampled member
//! (paired with the up-sampled reference), recursive pairwise fusion of the
//! latent codes, and a decoder that predicts a residual over the
//! up-sampled reference.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::nn::{accumulate, leaky_relu, leaky_relu_backward, Conv2d, Parameters, Tensor};
use crate::error::{Error, Result};
use crate::exec;
use crate::image::{bilinear_upsample, Image2D};
use crate::motion::LrSet;

/// Architecture hyperparameters of [`SrModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SrConfig {
    pub channels: usize,
    pub res_blocks: usize,
    pub decoder_blocks: usize,
    pub scale: usize,
}

impl Default for SrConfig {
    fn default() -> Self {
        Self {
            channels: 32,
            res_blocks: 4,
            decoder_blocks: 2,
            scale: 2,
        }
    }
}

/// `x + conv2(lrelu(conv1(x)))`
#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
}

struct ResCache {
    input: Tensor,
    pre: Tensor,
}

impl ResBlock {
    fn init(c: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            conv1: Conv2d::init(c, c, 1, true, 1.0, rng),
            conv2: Conv2d::init(c, c, 1, true, 0.5, rng),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            conv1: self.conv1.zeros_like(),
            conv2: self.conv2.zeros_like(),
        }
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let mut y = self.conv2.forward(&leaky_relu(&self.conv1.forward(x)));
        y.add_assign(x);
        y
    }

    fn forward_cached(&self, x: Tensor) -> (Tensor, ResCache) {
        let pre = self.conv1.forward(&x);
        let mut y = self.conv2.forward(&leaky_relu(&pre));
        y.add_assign(&x);
        (y, ResCache { input: x, pre })
    }

    fn backward(&self, cache: &ResCache, gy: &Tensor, grads: &mut ResBlock) -> Tensor {
        let act = leaky_relu(&cache.pre);
        let ga = self.conv2.backward(&act, gy, &mut grads.conv2, true).unwrap();
        let gpre = leaky_relu_backward(&cache.pre, &ga);
        let mut gx = self
            .conv1
            .backward(&cache.input, &gpre, &mut grads.conv1, true)
            .unwrap();
        gx.add_assign(gy);
        gx
    }
}

impl Parameters for ResBlock {
    fn visit(&self, f: &mut dyn FnMut(&[f32])) {
        self.conv1.visit(f);
        self.conv2.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32])) {
        self.conv1.visit_mut(f);
        self.conv2.visit_mut(f);
    }
}

/// Shared per-member encoder: two convolutions then residual blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub conv_in: Conv2d,
    pub conv_mid: Conv2d,
    pub blocks: Vec<ResBlock>,
}

pub(crate) struct EncoderCache {
    input: Tensor,
    pre1: Tensor,
    pre2: Tensor,
    blocks: Vec<ResCache>,
}

impl Encoder {
    fn zeros_like(&self) -> Self {
        Self {
            conv_in: self.conv_in.zeros_like(),
            conv_mid: self.conv_mid.zeros_like(),
            blocks: self.blocks.iter().map(ResBlock::zeros_like).collect(),
        }
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let a1 = leaky_relu(&self.conv_in.forward(x));
        let mut h = leaky_relu(&self.conv_mid.forward(&a1));
        for b in &self.blocks {
            h = b.forward(&h);
        }
        h
    }

    fn forward_cached(&self, x: Tensor) -> (Tensor, EncoderCache) {
        let pre1 = self.conv_in.forward(&x);
        let pre2 = self.conv_mid.forward(&leaky_relu(&pre1));
        let mut h = leaky_relu(&pre2);
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward_cached(h);
            caches.push(c);
            h = y;
        }
        (
            h,
            EncoderCache {
                input: x,
                pre1,
                pre2,
                blocks: caches,
            },
        )
    }

    fn backward(&self, cache: &EncoderCache, g_code: &Tensor) -> Encoder {
        let mut grads = self.zeros_like();
        let mut g = g_code.clone();
        for ((b, c), gb) in self
            .blocks
            .iter()
            .zip(&cache.blocks)
            .zip(grads.blocks.iter_mut())
            .rev()
        {
            g = b.backward(c, &g, gb);
        }
        let g2 = leaky_relu_backward(&cache.pre2, &g);
        let a1 = leaky_relu(&cache.pre1);
        let ga1 = self.conv_mid.backward(&a1, &g2, &mut grads.conv_mid, true).unwrap();
        let g1 = leaky_relu_backward(&cache.pre1, &ga1);
        self.conv_in.backward(&cache.input, &g1, &mut grads.conv_in, false);
        grads
    }
}

impl Parameters for Encoder {
    fn visit(&self, f: &mut dyn FnMut(&[f32])) {
        self.conv_in.visit(f);
        self.conv_mid.visit(f);
        self.blocks.iter().for_each(|b| b.visit(f));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32])) {
        self.conv_in.visit_mut(f);
        self.conv_mid.visit_mut(f);
        self.blocks.iter_mut().for_each(|b| b.visit_mut(f));
    }
}

/// Pairwise fusion `fuse(a, b) = (a + b)/2 + g(a - b)` with a bias-free
/// two-layer `g`, so `fuse(a, a) == a` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Fusion {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
}

struct FuseCache {
    diff: Tensor,
    pre: Tensor,
}

impl Fusion {
    fn zeros_like(&self) -> Self {
        Self {
            conv1: self.conv1.zeros_like(),
            conv2: self.conv2.zeros_like(),
        }
    }

    fn fuse(&self, a: &Tensor, b: &Tensor) -> Tensor {
        self.fuse_cached(a, b).0
    }

    fn fuse_cached(&self, a: &Tensor, b: &Tensor) -> (Tensor, FuseCache) {
        let diff = Tensor {
            data: a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect(),
            ..*a
        };
        let pre = self.conv1.forward(&diff);
        let mut out = self.conv2.forward(&leaky_relu(&pre));
        for ((o, x), y) in out.data.iter_mut().zip(&a.data).zip(&b.data) {
            *o += 0.5 * (x + y);
        }
        (out, FuseCache { diff, pre })
    }

    /// Gradients with respect to both inputs.
    fn backward(&self, cache: &FuseCache, g: &Tensor, grads: &mut Fusion) -> (Tensor, Tensor) {
        let act = leaky_relu(&cache.pre);
        let gact = self.conv2.backward(&act, g, &mut grads.conv2, true).unwrap();
        let gpre = leaky_relu_backward(&cache.pre, &gact);
        let gd = self.conv1.backward(&cache.diff, &gpre, &mut grads.conv1, true).unwrap();
        let mut ga = g.clone();
        let mut gb = g.clone();
        for ((a, b), d) in ga.data.iter_mut().zip(gb.data.iter_mut()).zip(&gd.data) {
            *a = 0.5 * *a + d;
            *b = 0.5 * *b - d;
        }
        (ga, gb)
    }
}

impl Parameters for Fusion {
    fn visit(&self, f: &mut dyn FnMut(&[f32])) {
        self.conv1.visit(f);
        self.conv2.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32])) {
        self.conv1.visit_mut(f);
        self.conv2.visit_mut(f);
    }
}

/// Residual blocks then a single-channel head, all at output resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub blocks: Vec<ResBlock>,
    pub head: Conv2d,
}

impl Decoder {
    fn zeros_like(&self) -> Self {
        Self {
            blocks: self.blocks.iter().map(ResBlock::zeros_like).collect(),
            head: self.head.zeros_like(),
        }
    }
}

impl Parameters for Decoder {
    fn visit(&self, f: &mut dyn FnMut(&[f32])) {
        self.blocks.iter().for_each(|b| b.visit(f));
        self.head.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32])) {
        self.blocks.iter_mut().for_each(|b| b.visit_mut(f));
        self.head.visit_mut(f);
    }
}

/// Movie-specific multi-frame super-resolution network.
#[derive(Debug, Clone, PartialEq)]
pub struct SrModel {
    pub config: SrConfig,
    pub encoder: Encoder,
    pub fusion: Fusion,
    pub decoder: Decoder,
}

/// Network inputs for one forward pass, already up-sampled and normalized.
#[derive(Debug, Clone)]
pub struct SrInput {
    /// One 2-channel tensor per (padded) member: `[member, reference]`.
    pub pairs: Vec<Tensor>,
    /// Normalized up-sampled reference, the residual base.
    pub base: Tensor,
}

/// Activations retained for the backward pass.
pub struct SrCache {
    encoders: Vec<EncoderCache>,
    fusions: Vec<Vec<FuseCache>>,
    decoder: Vec<ResCache>,
    decoded: Tensor,
}

/// Affine normalization shared by every image fed to one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

impl Normalization {
    pub fn of_set(set: &LrSet) -> Self {
        let n: usize = set.members().iter().map(|m| m.len()).sum();
        let mean = set.members().iter().map(|m| m.data().iter().sum::<f64>()).sum::<f64>() / n as f64;
        let var = set
            .members()
            .iter()
            .map(|m| m.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>())
            .sum::<f64>()
            / n as f64;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        Self { mean, std }
    }

    pub fn apply(&self, image: &Image2D) -> Image2D {
        image.map(|v| (v - self.mean) / self.std)
    }
}

impl SrModel {
    /// Deterministic initialization; the decoder head starts at zero so an
    /// untrained model reproduces the bilinear up-sampled reference.
    pub fn new(config: SrConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = config.channels;
        let encoder = Encoder {
            conv_in: Conv2d::init(2, c, 1, true, 1.0, &mut rng),
            conv_mid: Conv2d::init(c, c, 1, true, 1.0, &mut rng),
            blocks: (0..config.res_blocks).map(|_| ResBlock::init(c, &mut rng)).collect(),
        };
        let fusion = Fusion {
            conv1: Conv2d::init(c, c, 1, false, 1.0, &mut rng),
            conv2: Conv2d::init(c, c, 1, false, 0.5, &mut rng),
        };
        let decoder = Decoder {
            blocks: (0..config.decoder_blocks).map(|_| ResBlock::init(c, &mut rng)).collect(),
            head: Conv2d::zeros(c, 1, 1, true),
        };
        Self {
            config,
            encoder,
            fusion,
            decoder,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            encoder: self.encoder.zeros_like(),
            fusion: self.fusion.zeros_like(),
            decoder: self.decoder.zeros_like(),
        }
    }

    /// Up-sample, pad to a power of two with reference copies, normalize.
    pub fn prepare(&self, set: &LrSet, norm: Normalization) -> Result<SrInput> {
        let s = self.config.scale;
        let (w, h) = set.dims();
        if w % 2 != 0 || h % 2 != 0 {
            return Err(Error::Dimension(format!("LR members must be even-sized, got {w}x{h}")));
        }
        let up_ref = bilinear_upsample(set.reference_image(), s)?;
        let mut members: Vec<&Image2D> = set.members().iter().collect();
        while !members.len().is_power_of_two() {
            members.push(set.reference_image());
        }
        let scale = 1.0 / norm.std;
        let base = Tensor::from_images(&[&up_ref], norm.mean, scale);
        let pairs = exec::try_map_slice(&members, |m| {
            let up = bilinear_upsample(m, s)?;
            Ok::<_, Error>(Tensor::from_images(&[&up, &up_ref], norm.mean, scale))
        })?;
        Ok(SrInput { pairs, base })
    }

    /// Normalized residual for prepared inputs.
    pub fn residual(&self, input: &SrInput) -> Tensor {
        let mut codes = exec::map_slice(&input.pairs, |p| self.encoder.forward(p));
        while codes.len() > 1 {
            codes = codes
                .chunks(2)
                .map(|p| self.fusion.fuse(&p[0], &p[1]))
                .collect();
        }
        let mut h = codes.pop().expect("at least one member");
        for b in &self.decoder.blocks {
            h = b.forward(&h);
        }
        self.decoder.head.forward(&h)
    }

    /// Normalized output (base + residual) with the cache for backward.
    pub fn forward_cached(&self, input: &SrInput) -> (Tensor, SrCache) {
        let encoded = exec::map_slice(&input.pairs, |p| self.encoder.forward_cached(p.clone()));
        let (mut codes, encoders): (Vec<Tensor>, Vec<EncoderCache>) = encoded.into_iter().unzip();
        let mut fusions = Vec::new();
        while codes.len() > 1 {
            let (next, caches): (Vec<Tensor>, Vec<FuseCache>) = codes
                .chunks(2)
                .map(|p| self.fusion.fuse_cached(&p[0], &p[1]))
                .unzip();
            fusions.push(caches);
            codes = next;
        }
        let mut h = codes.pop().expect("at least one member");
        let mut decoder = Vec::with_capacity(self.decoder.blocks.len());
        for b in &self.decoder.blocks {
            let (y, c) = b.forward_cached(h);
            decoder.push(c);
            h = y;
        }
        let mut out = self.decoder.head.forward(&h);
        out.add_assign(&input.base);
        (
            out,
            SrCache {
                encoders,
                fusions,
                decoder,
                decoded: h,
            },
        )
    }

    /// Parameter gradients given the gradient of the normalized output.
    pub fn backward(&self, cache: &SrCache, g_out: &Tensor) -> SrModel {
        let mut grads = self.zeros_like();
        let mut g = self
            .decoder
            .head
            .backward(&cache.decoded, g_out, &mut grads.decoder.head, true)
            .unwrap();
        for ((b, c), gb) in self
            .decoder
            .blocks
            .iter()
            .zip(&cache.decoder)
            .zip(grads.decoder.blocks.iter_mut())
            .rev()
        {
            g = b.backward(c, &g, gb);
        }
        let mut level_grads = vec![g];
        for level in cache.fusions.iter().rev() {
            let mut next = Vec::with_capacity(level.len() * 2);
            for (c, g) in level.iter().zip(&level_grads) {
                let (ga, gb) = self.fusion.backward(c, g, &mut grads.fusion);
                next.push(ga);
                next.push(gb);
            }
            level_grads = next;
        }
        let pairs: Vec<(&EncoderCache, &Tensor)> = cache.encoders.iter().zip(&level_grads).collect();
        let enc_grads = exec::map_slice(&pairs, |(c, g)| self.encoder.backward(c, g));
        for eg in &enc_grads {
            accumulate(&mut grads.encoder, eg);
        }
        grads
    }
}

impl Parameters for SrModel {
    fn visit(&self, f: &mut dyn FnMut(&[f32])) {
        self.encoder.visit(f);
        self.fusion.visit(f);
        self.decoder.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32])) {
        self.encoder.visit_mut(f);
        self.fusion.visit_mut(f);
        self.decoder.visit_mut(f);
    }
}

/// Super-resolve an LR set: encode, fuse, decode, add to the up-sampled reference.
pub fn sr_forward(model: &SrModel, lr_set: &LrSet) -> Result<Image2D> {
    sr_forward_normalized(model, lr_set, Normalization::of_set(lr_set))
}

/// [`sr_forward`] with caller-supplied normalization.
pub fn sr_forward_normalized(model: &SrModel, lr_set: &LrSet, norm: Normalization) -> Result<Image2D> {
    let s = model.config.scale;
    let input = model.prepare(lr_set, norm)?;
    let residual = model.residual(&input);
    let mut out = bilinear_upsample(lr_set.reference_image(), s)?;
    for (o, r) in out.data_mut().iter_mut().zip(&residual.data) {
        *o += norm.std * *r as f64;
    }
    Ok(out)
}
