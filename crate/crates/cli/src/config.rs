//! Flat `key = value` pipeline configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cryozssr::evalctf::{CtfSearch, FRC_HALF};
use cryozssr::formation::{CtfParams, DEFAULT_DRIFT_STEP};
use cryozssr::zssr::TrainConfig;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Everything a run needs: simulation, optics, training, evaluation and
/// optional external inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    /// Ground-truth side length in HR pixels.
    pub size: usize,
    /// HR pixel size in Å.
    pub pixel_size: f64,
    /// Specimen band limit as a multiple of the LR Nyquist frequency.
    pub signal_extent: f64,
    pub frames: usize,
    /// Per-frame power SNR; `inf` disables noise.
    pub snr: f64,
    pub drift_step: f64,
    pub ctf: CtfParams,
    pub train: TrainConfig,
    pub search: CtfSearch,
    pub tile: usize,
    pub frc_threshold: f64,
    /// Align this stack instead of the simulated one.
    pub input_stack: Option<PathBuf>,
    /// Evaluate against this image instead of the simulated truth.
    pub truth_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            size: 256,
            pixel_size: 1.5,
            signal_extent: 1.4,
            frames: 50,
            snr: 0.1,
            drift_step: DEFAULT_DRIFT_STEP,
            ctf: CtfParams::default(),
            train: TrainConfig::default(),
            search: CtfSearch::default(),
            tile: 256,
            frc_threshold: FRC_HALF,
            input_stack: None,
            truth_path: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse `{value}` for key `{key}`"))
}

macro_rules! keys {
    ($($key:literal => $($field:ident).+),* $(,)?) => {
        impl PipelineConfig {
            fn set_field(&mut self, key: &str, value: &str) -> Result<bool, String> {
                match key {
                    $($key => self.$($field).+ = parse_value(key, value)?,)*
                    _ => return Ok(false),
                }
                Ok(true)
            }

            fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$(($key, self.$($field).+.to_string())),*]
            }
        }
    };
}

keys! {
    "size" => size,
    "pixel_size" => pixel_size,
    "signal_extent" => signal_extent,
    "frames" => frames,
    "snr" => snr,
    "drift_step" => drift_step,
    "voltage" => ctf.voltage,
    "spherical_aberration" => ctf.spherical_aberration,
    "amplitude_contrast" => ctf.amplitude_contrast,
    "defocus" => ctf.defocus,
    "phase_shift" => ctf.phase_shift,
    "crop_size" => train.crop_size,
    "scale" => train.scale,
    "k" => train.k,
    "initial_lr" => train.initial_lr,
    "final_lr" => train.final_lr,
    "max_epochs" => train.max_epochs,
    "steps_per_epoch" => train.steps_per_epoch,
    "beta1" => train.beta1,
    "beta2" => train.beta2,
    "eps" => train.eps,
    "tv_weight" => train.tv_weight,
    "window" => train.window,
    "shift_warmup_steps" => train.shift_warmup_steps,
    "back_projection_iters" => train.back_projection_iters,
    "sr_channels" => train.sr.channels,
    "sr_res_blocks" => train.sr.res_blocks,
    "sr_decoder_blocks" => train.sr.decoder_blocks,
    "shift_channels" => train.shift.channels,
    "shift_layers" => train.shift.layers,
    "shift_max_shift" => train.shift.max_shift,
    "min_defocus" => search.min_defocus,
    "max_defocus" => search.max_defocus,
    "defocus_step" => search.step,
    "low_resolution" => search.low_resolution,
    "nyquist_fraction" => search.nyquist_fraction,
    "tile" => tile,
    "frc_threshold" => frc_threshold,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(format!("line {}: expected `key = value`", n + 1)));
            };
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(CliError::config(format!("line {}: duplicate key `{key}`", n + 1)));
            }
            seen.push(key.to_string());
            cfg.set(key, value)
                .map_err(|e| CliError::config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "seed" => self.seed = Some(parse_value(key, value)?),
            "input_stack" => self.input_stack = Some(PathBuf::from(value)),
            "truth_path" => self.truth_path = Some(PathBuf::from(value)),
            _ => {
                if !self.set_field(key, value)? {
                    return Err(format!("unknown key `{key}`"));
                }
            }
        }
        Ok(())
    }

    pub fn set_scale(&mut self, scale: usize) {
        self.train.scale = scale;
        self.train.sr.scale = scale;
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::config("a seed is required (config key `seed` or --seed)"))
    }

    /// Check every value and every configured input path.
    pub fn validate(&self) -> Result<(), CliError> {
        self.seed()?;
        let bad = |m: String| Err(CliError::config(m));
        if self.train.sr.scale != self.train.scale {
            return bad("scale must match the network scale".into());
        }
        if !(self.train.scale == 1 || self.train.scale == 2) {
            return bad(format!("scale {} not in {{1, 2}}", self.train.scale));
        }
        if self.size < 8 || self.size % (2 * self.train.scale) != 0 {
            return bad(format!("size {} must be >= 8 and divisible by 2*scale", self.size));
        }
        if !(self.pixel_size > 0.0 && self.signal_extent > 0.0 && self.snr > 0.0) {
            return bad("pixel_size, signal_extent and snr must be positive".into());
        }
        if !(self.drift_step >= 0.0 && self.drift_step.is_finite()) {
            return bad("drift_step must be finite and >= 0".into());
        }
        if self.frames < self.train.k {
            return bad(format!("frames ({}) must be >= k ({})", self.frames, self.train.k));
        }
        if self.tile < 2 || self.tile % 2 != 0 {
            return bad(format!("tile {} must be even and >= 2", self.tile));
        }
        if !(self.frc_threshold > 0.0 && self.frc_threshold < 1.0) {
            return bad("frc_threshold must lie in (0, 1)".into());
        }
        self.ctf.validate().map_err(CliError::from)?;
        self.train.validate().map_err(CliError::from)?;
        for p in [&self.input_stack, &self.truth_path].into_iter().flatten() {
            if !p.is_file() {
                return Err(CliError::io(format!("{}: no such file", p.display())));
            }
        }
        Ok(())
    }

    /// Canonical serialization: every key in a fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(seed) = self.seed {
            writeln!(out, "seed = {seed}").unwrap();
        }
        for (k, v) in self.entries() {
            writeln!(out, "{k} = {v}").unwrap();
        }
        if let Some(p) = &self.input_stack {
            writeln!(out, "input_stack = {}", p.display()).unwrap();
        }
        if let Some(p) = &self.truth_path {
            writeln!(out, "truth_path = {}", p.display()).unwrap();
        }
        out
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    /// Paths made absolute so a manifest replays from any directory.
    pub fn absolutize(&mut self) {
        for p in [&mut self.input_stack, &mut self.truth_path].into_iter().flatten() {
            if let Ok(abs) = std::path::absolute(&*p) {
                *p = abs;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trips() {
        let mut cfg = PipelineConfig {
            seed: Some(9),
            snr: 0.05,
            ..Default::default()
        };
        cfg.train.initial_lr = 3.3e-4;
        cfg.truth_path = Some("/tmp/t.mrc".into());
        let back = PipelineConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = PipelineConfig::parse("# run\n\nseed = 3  # inline\n k=8\n").unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.train.k, 8);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let e = PipelineConfig::parse("seed = 1\nlearning_rate = 1\n").unwrap_err();
        assert!(e.to_string().contains("unknown key `learning_rate`"), "{e}");
        assert!(PipelineConfig::parse("k = 4\nk = 8\n").is_err());
        assert!(PipelineConfig::parse("k 4\n").is_err());
        assert!(PipelineConfig::parse("k = four\n").is_err());
    }

    #[test]
    fn seed_is_mandatory() {
        let cfg = PipelineConfig::parse("k = 4\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_tracks_values() {
        let a = PipelineConfig::parse("seed = 1\n").unwrap();
        let b = PipelineConfig::parse("seed = 2\n").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
