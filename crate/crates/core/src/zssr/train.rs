use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::sample::sample_training_pair;
use super::schedule::LrSchedule;
use crate::error::{Error, Result};
use crate::image::{extract_patch, lanczos_shift, Dihedral, Image2D, LANCZOS_DEFAULT_TAPS};
use crate::motion::LrSet;
use crate::srnet::{registered_loss, Adam, Normalization, ShiftModel, SrModel, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    LrFloor,
    MaxEpochs,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::LrFloor => "lr_floor",
            StopReason::MaxEpochs => "max_epochs",
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Loss after every optimizer step, in normalized intensity units.
    pub losses: Vec<f64>,
    /// Learning rate used at every step.
    pub lr_trace: Vec<f64>,
    /// Epochs (0-based) in which the learning rate was divided.
    pub lr_change_epochs: Vec<usize>,
    pub stop_reason: StopReason,
    pub wall_time: Duration,
    /// Squared shift error during the shift regressor warm-up.
    pub shift_warmup_losses: Vec<f64>,
}

/// A single optimization step at a given learning rate, returning its loss.
pub trait Objective {
    fn step(&mut self, step: usize, lr: f64) -> Result<f64>;
}

/// Drive an objective under the plateau schedule until the rate floor or
/// the epoch budget is reached.
pub fn run_schedule<O: Objective>(cfg: &TrainConfig, objective: &mut O) -> Result<TrainReport> {
    let start = Instant::now();
    let mut schedule = LrSchedule::new(cfg.initial_lr, cfg.final_lr, cfg.window);
    let total = cfg.max_epochs * cfg.steps_per_epoch;
    let mut losses = Vec::with_capacity(total);
    let mut lr_trace = Vec::with_capacity(total);
    let mut stop_reason = StopReason::MaxEpochs;
    for step in 0..total {
        let lr = schedule.lr();
        let loss = objective.step(step, lr)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step, lr, loss });
        }
        losses.push(loss);
        lr_trace.push(lr);
        if schedule.observe(&losses) && schedule.exhausted() {
            stop_reason = StopReason::LrFloor;
            break;
        }
    }
    let lr_change_epochs = schedule
        .changes()
        .iter()
        .map(|&n| (n - 1) / cfg.steps_per_epoch)
        .collect();
    Ok(TrainReport {
        losses,
        lr_trace,
        lr_change_epochs,
        stop_reason,
        wall_time: start.elapsed(),
        shift_warmup_losses: Vec::new(),
    })
}

/// Joint SR and shift update on pairs sampled from one LR set.
pub struct ZssrObjective<'a> {
    lr_set: &'a LrSet,
    cfg: &'a TrainConfig,
    pub sr: SrModel,
    pub shift: ShiftModel,
    adam_sr: Adam,
    adam_shift: Adam,
    rng: ChaCha8Rng,
}

impl<'a> ZssrObjective<'a> {
    pub fn new(lr_set: &'a LrSet, cfg: &'a TrainConfig, sr: SrModel, shift: ShiftModel) -> Self {
        let adam_sr = Adam::new(crate::srnet::Parameters::param_count(&sr), cfg.beta1, cfg.beta2, cfg.eps);
        let adam_shift = Adam::new(crate::srnet::Parameters::param_count(&shift), cfg.beta1, cfg.beta2, cfg.eps);
        Self {
            lr_set,
            cfg,
            sr,
            shift,
            adam_sr,
            adam_shift,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7a55_0001),
        }
    }
}

fn tensor_image(t: &Tensor, pixel_size: f64) -> Image2D {
    Image2D::from_raw(t.w, t.h, pixel_size, t.data.iter().map(|&v| v as f64).collect())
}

impl Objective for ZssrObjective<'_> {
    fn step(&mut self, _step: usize, lr: f64) -> Result<f64> {
        let pair = sample_training_pair(self.lr_set, self.cfg, &mut self.rng)?;
        let norm = Normalization::of_set(&pair.lr);
        let input = self.sr.prepare(&pair.lr, norm)?;
        let (out, cache) = self.sr.forward_cached(&input);
        let sr_img = tensor_image(&out, pair.hr.pixel_size());
        let hr = norm.apply(&pair.hr);
        let (d, shift_cache) = self.shift.forward_cached(ShiftModel::pair_tensor(&sr_img, &hr)?);
        let loss = registered_loss(&sr_img, &hr, (d[0] as f64, d[1] as f64), self.cfg.tv_weight)?;
        if !loss.loss.is_finite() {
            return Ok(loss.loss);
        }
        let g_out = Tensor {
            data: loss.grad_sr.data().iter().map(|&v| v as f32).collect(),
            ..out
        };
        let g_sr = self.sr.backward(&cache, &g_out);
        self.adam_sr.step(&mut self.sr, &g_sr, lr);
        let g_shift = self
            .shift
            .backward(&shift_cache, [loss.grad_shift.0 as f32, loss.grad_shift.1 as f32]);
        self.adam_shift.step(&mut self.shift, &g_shift, lr);
        Ok(loss.loss)
    }
}

/// Largest synthetic displacement used to warm up the shift regressor, in pixels.
pub const WARMUP_SHIFT_RANGE: f64 = 1.0;
/// Crop edge for the shift warm-up; the regressor is fully convolutional
/// with global pooling, so it transfers to other sizes.
pub const WARMUP_CROP: usize = 64;

/// Supervised pre-training of the shift regressor on crops of the LR set
/// translated by known random sub-pixel offsets.
pub fn warm_up_shift(shift: &mut ShiftModel, lr_set: &LrSet, cfg: &TrainConfig) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5417_0002);
    let mut adam = Adam::new(crate::srnet::Parameters::param_count(shift), cfg.beta1, cfg.beta2, cfg.eps);
    let (w, h) = lr_set.dims();
    let c = WARMUP_CROP.min(cfg.crop_size).min(w).min(h);
    let range = WARMUP_SHIFT_RANGE.min(c as f64 / 4.0 - 0.5);
    let mut losses = Vec::with_capacity(cfg.shift_warmup_steps);
    for step in 0..cfg.shift_warmup_steps {
        let m = &lr_set.members()[rng.random_range(0..lr_set.len())];
        let x0 = rng.random_range(0..=w - c);
        let y0 = rng.random_range(0..=h - c);
        let t = Dihedral::new(rng.random_range(0..8))?;
        let target_img = t.apply(&extract_patch(m, x0, y0, c, c)?);
        let tx = rng.random_range(-range..range);
        let ty = rng.random_range(-range..range);
        let moved = lanczos_shift(&target_img, tx, ty, LANCZOS_DEFAULT_TAPS)?;
        let (d, cache) = shift.forward_cached(ShiftModel::pair_tensor(&moved, &target_img)?);
        let ex = d[0] as f64 + tx;
        let ey = d[1] as f64 + ty;
        let loss = ex * ex + ey * ey;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                lr: cfg.initial_lr,
                loss,
            });
        }
        losses.push(loss);
        let grads = shift.backward(&cache, [2.0 * ex as f32, 2.0 * ey as f32]);
        let lr = if step * 3 < cfg.shift_warmup_steps * 2 { cfg.initial_lr } else { cfg.initial_lr / 10.0 };
        adam.step(shift, &grads, lr);
    }
    Ok(losses)
}

/// Train a movie-specific SR network and shift regressor on `lr_set` alone.
pub fn train(lr_set: &LrSet, cfg: &TrainConfig) -> Result<(SrModel, ShiftModel, TrainReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let sr = SrModel::new(cfg.sr, cfg.seed);
    let mut shift = ShiftModel::new(cfg.shift, cfg.seed ^ 0x5417_0001);
    let warmup = warm_up_shift(&mut shift, lr_set, cfg)?;
    let mut objective = ZssrObjective::new(lr_set, cfg, sr, shift);
    let mut report = run_schedule(cfg, &mut objective)?;
    report.shift_warmup_losses = warmup;
    report.wall_time = start.elapsed();
    Ok((objective.sr, objective.shift, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formation::band_limited_phantom;
    use crate::srnet::{Parameters, ShiftConfig, SrConfig};

    struct Constant;

    impl Objective for Constant {
        fn step(&mut self, _: usize, _: f64) -> Result<f64> {
            Ok(1.0)
        }
    }

    struct Exploding;

    impl Objective for Exploding {
        fn step(&mut self, step: usize, _: f64) -> Result<f64> {
            Ok(if step == 5 { f64::NAN } else { 1.0 })
        }
    }

    fn tiny() -> TrainConfig {
        TrainConfig {
            crop_size: 16,
            k: 4,
            max_epochs: 2,
            window: 8,
            shift_warmup_steps: 4,
            sr: SrConfig {
                channels: 4,
                res_blocks: 1,
                decoder_blocks: 1,
                scale: 2,
            },
            shift: ShiftConfig {
                channels: 4,
                layers: 3,
                max_shift: 3.0,
            },
            ..TrainConfig::default()
        }
    }

    fn set() -> LrSet {
        LrSet::from_members((0..4).map(|i| band_limited_phantom(32, 3.0, 0.1, i).unwrap()).collect()).unwrap()
    }

    #[test]
    fn plateau_stops_at_the_floor() {
        let cfg = TrainConfig::default();
        let report = run_schedule(&cfg, &mut Constant).unwrap();
        assert_eq!(report.stop_reason, StopReason::LrFloor);
        assert_eq!(report.stop_reason.to_string(), "lr_floor");
        assert_eq!(report.losses.len(), 4 * cfg.window);
        let mut distinct: Vec<f64> = report.lr_trace.clone();
        distinct.dedup();
        assert_eq!(distinct.len(), 2);
        assert!((distinct[0] - 1e-3).abs() < 1e-15 && (distinct[1] - 1e-4).abs() < 1e-15);
        assert_eq!(report.lr_change_epochs.len(), 2);
    }

    #[test]
    fn epoch_budget_bounds_the_run() {
        let cfg = TrainConfig {
            max_epochs: 3,
            ..TrainConfig::default()
        };
        let report = run_schedule(&cfg, &mut Constant).unwrap();
        assert_eq!(report.stop_reason, StopReason::MaxEpochs);
        assert_eq!(report.losses.len(), 48);
    }

    #[test]
    fn non_finite_loss_aborts_with_step() {
        match run_schedule(&TrainConfig::default(), &mut Exploding) {
            Err(Error::NonFiniteLoss { step, lr, .. }) => {
                assert_eq!(step, 5);
                assert_eq!(lr, 1e-3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_epochs_returns_the_initial_network() {
        let cfg = TrainConfig {
            max_epochs: 0,
            ..tiny()
        };
        let (sr, _, report) = train(&set(), &cfg).unwrap();
        assert!(report.losses.is_empty());
        assert_eq!(sr, SrModel::new(cfg.sr, cfg.seed));
    }

    #[test]
    fn short_run_is_deterministic_and_finite() {
        let cfg = tiny();
        let s = set();
        let (a, sa, ra) = train(&s, &cfg).unwrap();
        let (b, sb, rb) = train(&s, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert_eq!(ra.losses, rb.losses);
        assert_eq!(ra.losses.len(), 32);
        assert!(a.all_finite() && sa.all_finite());
    }
}
