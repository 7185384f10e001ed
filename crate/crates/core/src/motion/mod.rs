//! Whole-frame translational alignment and reference-anchored frame
//! averaging, producing the K-member low-resolution input set.

mod average;
mod lrset;
mod register;

pub use average::{align_and_average, Aligner};
pub use lrset::{make_lr_set, LrSet};
pub use register::{estimate_shift, estimate_shift_detailed, ShiftEstimate, BANDPASS_HIGH_CUT};
