//! Micrograph quality metrics: power spectra and radial profiles, a
//! defocus-only CTF fit with a correlation score and fit resolution, and
//! Fourier ring correlation.

mod export;
mod fit;
mod frc;
mod spectrum;

pub use export::{curve_csv, spectrum_raster, write_curve_csv, write_spectrum_png};
pub use fit::{fit_ctf, CtfFitReport, CtfSearch, BACKGROUND_ORDER, RESOLUTION_THRESHOLD, RESOLUTION_WINDOW};
pub use frc::{frc, frc_registered, threshold_crossing, FrcCurve, FRC_0143, FRC_HALF};
pub use spectrum::{power_spectrum, radial_average, RadialProfile, DEFAULT_TILE};
