use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::{fft2, transform_in_place, Image2D, SpectrumImage};

/// Fraction of the Nyquist radius above which frequencies are discarded
/// before correlating.
pub const BANDPASS_HIGH_CUT: f64 = 0.85;

/// Outcome of a correlation-peak search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftEstimate {
    /// Location of the integer correlation peak.
    pub integer: (i64, i64),
    /// Peak location refined by separable parabolic fits.
    pub subpixel: (f64, f64),
}

/// Band-passed spectrum ready for correlation.
pub(crate) fn prepare(image: &Image2D) -> Result<SpectrumImage> {
    if image.variance() <= f64::EPSILON * image.rms().max(1.0) {
        return Err(Error::DegenerateCorrelation(
            "image has zero variance".into(),
        ));
    }
    let mut spec = fft2(image)?;
    let (w, h) = (spec.width() as f64, spec.height() as f64);
    spec.modulate(|kx, ky| {
        if kx == 0 && ky == 0 {
            return 0.0;
        }
        let fx = crate::image::signed_freq(kx, w as usize) as f64 / w;
        let fy = crate::image::signed_freq(ky, h as usize) as f64 / h;
        if (fx * fx + fy * fy).sqrt() > 0.5 * BANDPASS_HIGH_CUT {
            0.0
        } else {
            1.0
        }
    });
    Ok(spec)
}

/// Locate the displacement of `moving` relative to `fixed` from prepared spectra.
pub(crate) fn correlate(fixed: &SpectrumImage, moving: &SpectrumImage) -> Result<ShiftEstimate> {
    let (w, h) = (fixed.width(), fixed.height());
    if (w, h) != (moving.width(), moving.height()) {
        return Err(Error::Dimension(format!(
            "cannot correlate {w}x{h} with {}x{}",
            moving.width(),
            moving.height()
        )));
    }
    let mut prod: Vec<Complex64> = moving
        .data()
        .iter()
        .zip(fixed.data())
        .map(|(m, f)| m * f.conj())
        .collect();
    transform_in_place(&mut prod, w, h, true);
    let corr: Vec<f64> = prod.iter().map(|c| c.re).collect();

    let (mut best, mut best_i) = (f64::NEG_INFINITY, 0usize);
    for (i, &c) in corr.iter().enumerate() {
        if c > best {
            best = c;
            best_i = i;
        }
    }
    let spread = corr.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if !(spread > 0.0) || !best.is_finite() {
        return Err(Error::DegenerateCorrelation("correlation surface is flat".into()));
    }
    let (px, py) = (best_i % w, best_i / w);
    let at = |x: i64, y: i64| {
        let xx = x.rem_euclid(w as i64) as usize;
        let yy = y.rem_euclid(h as i64) as usize;
        corr[yy * w + xx]
    };
    let parabola = |m: f64, c: f64, p: f64| {
        let denom = m - 2.0 * c + p;
        if denom.abs() < 1e-300 || denom >= 0.0 {
            return 0.0;
        }
        let off = (0.5 * (m - p) / denom).clamp(-0.5, 0.5);
        // round-off level asymmetry of an autocorrelation peak
        if off.abs() < 1e-9 {
            0.0
        } else {
            off
        }
    };
    let (pxi, pyi) = (px as i64, py as i64);
    let c0 = at(pxi, pyi);
    let ox = parabola(at(pxi - 1, pyi), c0, at(pxi + 1, pyi));
    let oy = parabola(at(pxi, pyi - 1), c0, at(pxi, pyi + 1));
    let ix = crate::image::signed_freq(px, w);
    let iy = crate::image::signed_freq(py, h);
    Ok(ShiftEstimate {
        integer: (ix, iy),
        subpixel: (ix as f64 + ox, iy as f64 + oy),
    })
}

/// Displacement `(dx, dy)` of `b` relative to `a`, so that
/// `lanczos_shift(a, dx, dy) ≈ b`; shifting `b` by `(-dx, -dy)` maps it onto `a`.
pub fn estimate_shift(a: &Image2D, b: &Image2D) -> Result<(f64, f64)> {
    Ok(estimate_shift_detailed(a, b)?.subpixel)
}

pub fn estimate_shift_detailed(a: &Image2D, b: &Image2D) -> Result<ShiftEstimate> {
    a.require_same_shape(b, "estimate_shift")?;
    correlate(&prepare(a)?, &prepare(b)?)
}
