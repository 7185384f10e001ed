//! Forward image-formation model: the contrast transfer function, additive
//! Gaussian noise, and a seeded movie simulator for ground-truthed data.

mod ctf;
mod phantom;
mod simulate;

pub use ctf::{apply_ctf, ctf_eval, electron_wavelength, CtfParams};
pub use phantom::band_limited_phantom;
pub use simulate::{
    noise_sigma_for_snr, random_walk_drift, simulate_movie, SimConfig, SimOutput,
    DEFAULT_DRIFT_STEP,
};
