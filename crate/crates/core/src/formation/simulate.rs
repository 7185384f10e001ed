use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ctf::{apply_ctf, CtfParams};
use crate::error::{Error, Result};
use crate::exec;
use crate::image::{block_downsample, lanczos_shift, Image2D, MovieStack, LANCZOS_DEFAULT_TAPS};

/// Per-frame random-walk step, in output pixels.
pub const DEFAULT_DRIFT_STEP: f64 = 0.3;

/// Acquisition settings for [`simulate_movie`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub frame_count: usize,
    /// Whole-frame drift of each frame in output (down-sampled) pixels.
    pub drift: Vec<(f64, f64)>,
    pub noise_sigma: f64,
    /// Detector binning factor applied after the CTF, 1 or 2.
    pub downscale: usize,
    pub seed: u64,
}

impl SimConfig {
    /// Random-walk drift with the default step and the given noise level.
    pub fn with_random_walk(frame_count: usize, noise_sigma: f64, downscale: usize, seed: u64) -> Self {
        Self {
            frame_count,
            drift: random_walk_drift(frame_count, DEFAULT_DRIFT_STEP, seed ^ 0x5eed_d41f),
            noise_sigma,
            downscale,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_count == 0 {
            return Err(Error::Argument("frame_count must be >= 1".into()));
        }
        if self.drift.len() != self.frame_count {
            return Err(Error::Argument(format!(
                "{} drift entries for {} frames",
                self.drift.len(),
                self.frame_count
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Argument("noise sigma must be finite and >= 0".into()));
        }
        if !(self.downscale == 1 || self.downscale == 2) {
            return Err(Error::Argument(format!("downscale {} not in {{1, 2}}", self.downscale)));
        }
        Ok(())
    }
}

/// Cumulative Gaussian random walk starting at the origin.
pub fn random_walk_drift(frames: usize, step_std: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, step_std.max(0.0)).expect("finite std");
    let mut pos = (0.0, 0.0);
    (0..frames)
        .map(|i| {
            if i > 0 {
                pos.0 += step.sample(&mut rng);
                pos.1 += step.sample(&mut rng);
            }
            pos
        })
        .collect()
}

/// Simulated movie plus the noiseless frames it was drawn from.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub stack: MovieStack,
    pub clean_frames: Vec<Image2D>,
    pub drift: Vec<(f64, f64)>,
}

fn clean_frame(truth: &Image2D, params: &CtfParams, drift: (f64, f64), s: usize) -> Result<Image2D> {
    let shifted = lanczos_shift(
        truth,
        drift.0 * s as f64,
        drift.1 * s as f64,
        LANCZOS_DEFAULT_TAPS,
    )?;
    block_downsample(&apply_ctf(&shifted, params)?, s)
}

/// Shift, CTF-modulate, bin and corrupt the ground truth once per frame.
pub fn simulate_movie(ground_truth: &Image2D, params: &CtfParams, cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    params.validate()?;
    let s = cfg.downscale;
    let (w, h) = ground_truth.dims();
    if w % (2 * s) != 0 || h % (2 * s) != 0 {
        return Err(Error::Argument(format!(
            "ground truth {w}x{h} is not divisible by {}",
            2 * s
        )));
    }
    let clean_frames = exec::try_map_indexed(cfg.frame_count, |j| {
        clean_frame(ground_truth, params, cfg.drift[j], s)
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sigma).expect("validated sigma");
    let frames = clean_frames
        .iter()
        .map(|c| {
            let mut f = c.clone();
            if cfg.noise_sigma > 0.0 {
                f.data_mut()
                    .iter_mut()
                    .for_each(|v| *v += noise.sample(&mut rng));
            }
            f
        })
        .collect();
    Ok(SimOutput {
        stack: MovieStack::new(frames)?,
        clean_frames,
        drift: cfg.drift.clone(),
    })
}

/// Noise standard deviation giving a per-frame power SNR of `snr`, measured
/// on the noiseless undrifted frame.
pub fn noise_sigma_for_snr(ground_truth: &Image2D, params: &CtfParams, downscale: usize, snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::Argument("snr must be > 0".into()));
    }
    let clean = clean_frame(ground_truth, params, (0.0, 0.0), downscale)?;
    Ok((clean.variance() / snr).sqrt())
}
