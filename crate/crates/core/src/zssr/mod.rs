//! Zero-shot training on a single movie's LR set and self-ensemble inference.

mod config;
mod infer;
mod sample;
mod schedule;
mod train;

pub use config::{TrainConfig, ENSEMBLE_SIZE};
pub use infer::{back_project, back_project_trace, infer, infer_detailed, Inference, BACK_PROJECTION_ITERS};
pub use sample::{sample_training_pair, TrainingPair};
pub use schedule::{line_fit, LrSchedule};
pub use train::{run_schedule, train, warm_up_shift, Objective, StopReason, TrainReport, ZssrObjective, WARMUP_CROP, WARMUP_SHIFT_RANGE};
