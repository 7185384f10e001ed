use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::image::{fft2, ifft2, Image2D};

/// Relativistic electron wavelength in Å for an accelerating voltage in kV.
pub fn electron_wavelength(voltage_kv: f64) -> f64 {
    let v = voltage_kv * 1e3;
    12.2639 / (v + 0.97845e-6 * v * v).sqrt()
}

/// Optics parameters of an isotropic (non-astigmatic) CTF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtfParams {
    /// Accelerating voltage, kV.
    pub voltage: f64,
    /// Spherical aberration, mm.
    pub spherical_aberration: f64,
    /// Fraction of amplitude contrast, in [0, 1].
    pub amplitude_contrast: f64,
    /// Defocus in Å, underfocus positive.
    pub defocus: f64,
    /// Additional phase shift, radians.
    pub phase_shift: f64,
}

impl Default for CtfParams {
    fn default() -> Self {
        Self {
            voltage: 300.0,
            spherical_aberration: 2.7,
            amplitude_contrast: 0.07,
            defocus: 15000.0,
            phase_shift: 0.0,
        }
    }
}

impl CtfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.voltage > 0.0) {
            return Err(Error::Argument(format!("voltage {} kV must be > 0", self.voltage)));
        }
        if !(self.spherical_aberration >= 0.0) {
            return Err(Error::Argument("spherical aberration must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.amplitude_contrast) {
            return Err(Error::Argument(format!(
                "amplitude contrast {} outside [0, 1]",
                self.amplitude_contrast
            )));
        }
        if !self.defocus.is_finite() || !self.phase_shift.is_finite() {
            return Err(Error::Argument("defocus and phase shift must be finite".into()));
        }
        Ok(())
    }

    pub fn with_defocus(mut self, defocus: f64) -> Self {
        self.defocus = defocus;
        self
    }

    pub fn wavelength(&self) -> f64 {
        electron_wavelength(self.voltage)
    }

    /// Phase aberration χ(g) in radians.
    pub fn chi(&self, freq: f64) -> f64 {
        let lambda = self.wavelength();
        let cs = self.spherical_aberration * 1e7;
        let g2 = freq * freq;
        PI * lambda * g2 * self.defocus - 0.5 * PI * cs * lambda.powi(3) * g2 * g2 + self.phase_shift
    }
}

/// CTF amplitude at spatial frequency `freq` (1/Å).
pub fn ctf_eval(params: &CtfParams, freq: f64) -> f64 {
    let a = params.amplitude_contrast;
    let chi = params.chi(freq);
    -((1.0 - a * a).sqrt() * chi.sin() + a * chi.cos())
}

/// Multiply the image spectrum by the CTF.
pub fn apply_ctf(image: &Image2D, params: &CtfParams) -> Result<Image2D> {
    params.validate()?;
    image.require_even("apply_ctf")?;
    if !(image.pixel_size() > 0.0) {
        return Err(Error::Argument("apply_ctf needs a pixel size".into()));
    }
    let mut spec = fft2(image)?;
    let (w, h) = (spec.width(), spec.height());
    let ps = image.pixel_size();
    spec.modulate(|kx, ky| {
        let fx = crate::image::signed_freq(kx, w) as f64 / (w as f64 * ps);
        let fy = crate::image::signed_freq(ky, h) as f64 / (h as f64 * ps);
        ctf_eval(params, (fx * fx + fy * fy).sqrt())
    });
    ifft2(&spec)
}
