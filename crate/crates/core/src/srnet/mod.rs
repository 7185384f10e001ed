//! Multi-frame SR network, shift regressor, registered loss, optimizer and
//! checkpoints.

mod checkpoint;
mod loss;
mod model;
pub mod nn;
mod optim;
mod shift;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use loss::{registered_loss, total_variation, LossOutput, TV_EPSILON};
pub use model::{sr_forward, sr_forward_normalized, Normalization, SrCache, SrConfig, SrInput, SrModel};
pub use nn::{Parameters, Tensor};
pub use optim::Adam;
pub use shift::{shift_forward, ShiftCache, ShiftConfig, ShiftModel};
