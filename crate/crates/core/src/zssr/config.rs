use crate::error::{Error, Result};
use crate::srnet::{ShiftConfig, SrConfig};

/// Number of geometric self-ensemble branches (all dihedral elements).
pub const ENSEMBLE_SIZE: usize = 8;

/// Training and inference hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub crop_size: usize,
    pub scale: usize,
    pub k: usize,
    pub initial_lr: f64,
    pub final_lr: f64,
    pub max_epochs: usize,
    pub steps_per_epoch: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub tv_weight: f64,
    pub seed: u64,
    /// Steps between plateau checks; each check looks at the last `2 * window` losses.
    pub window: usize,
    /// Supervised steps on synthetic known-shift pairs before joint training.
    pub shift_warmup_steps: usize,
    pub back_projection_iters: usize,
    pub sr: SrConfig,
    pub shift: ShiftConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            crop_size: 256,
            scale: 2,
            k: 16,
            initial_lr: 1e-3,
            final_lr: 1e-5,
            max_epochs: 300,
            steps_per_epoch: 16,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            tv_weight: 1e-4,
            seed: 0,
            window: 60,
            shift_warmup_steps: 4000,
            back_projection_iters: 10,
            sr: SrConfig::default(),
            shift: ShiftConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let arg = |m: String| Err(Error::Argument(m));
        if self.scale < 1 || self.scale != self.sr.scale {
            return arg(format!("scale {} must be >= 1 and match the network scale {}", self.scale, self.sr.scale));
        }
        if self.crop_size == 0 || self.crop_size % (2 * self.scale) != 0 {
            return arg(format!("crop size {} must be a positive multiple of 2*scale", self.crop_size));
        }
        if !(self.final_lr > 0.0 && self.final_lr < self.initial_lr && self.initial_lr.is_finite()) {
            return arg(format!("need 0 < final_lr ({}) < initial_lr ({})", self.final_lr, self.initial_lr));
        }
        if self.k < 2 {
            return arg(format!("K must be >= 2, got {}", self.k));
        }
        if self.window == 0 || self.steps_per_epoch == 0 {
            return arg("window and steps_per_epoch must be positive".into());
        }
        if !(self.tv_weight >= 0.0) {
            return arg(format!("tv weight must be >= 0, got {}", self.tv_weight));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return arg("Adam moments must lie in [0, 1) and eps must be positive".into());
        }
        if self.sr.channels == 0 || self.shift.channels == 0 || self.shift.layers == 0 {
            return arg("network widths must be positive".into());
        }
        if !(self.shift.max_shift > 0.0) || self.shift.max_shift as f64 >= self.crop_size as f64 / 4.0 {
            return arg(format!(
                "shift bound {} must be positive and below a quarter of the crop",
                self.shift.max_shift
            ));
        }
        Ok(())
    }
}
