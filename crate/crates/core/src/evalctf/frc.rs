use crate::error::{Error, Result};
use crate::image::{fft2, lanczos_shift, Image2D, LANCZOS_DEFAULT_TAPS};
use crate::motion::estimate_shift;

/// Threshold for comparisons sharing one noise realization.
pub const FRC_HALF: f64 = 0.5;
/// Threshold mirroring the usual map-resolution criterion.
pub const FRC_0143: f64 = 0.143;

#[derive(Debug, Clone, PartialEq)]
pub struct FrcCurve {
    /// Ring frequencies in 1/Å, rings 1 through Nyquist.
    pub frequencies: Vec<f64>,
    pub correlation: Vec<f64>,
    pub counts: Vec<usize>,
    pub threshold: f64,
    /// Interpolated frequency of the first drop below the threshold.
    pub crossing: Option<f64>,
}

impl FrcCurve {
    /// Resolution in Å at the threshold crossing, if the curve crosses.
    pub fn resolution(&self) -> Option<f64> {
        self.crossing.map(|f| 1.0 / f)
    }

    /// Crossing frequency, or the last ring when the curve never crosses.
    pub fn crossing_or_nyquist(&self) -> f64 {
        self.crossing.unwrap_or(*self.frequencies.last().unwrap_or(&0.0))
    }
}

/// Fourier ring correlation between two images on integer-radius rings.
pub fn frc(a: &Image2D, b: &Image2D, threshold: f64) -> Result<FrcCurve> {
    if a.dims() != b.dims() || a.pixel_size() != b.pixel_size() {
        return Err(Error::Argument(format!(
            "FRC inputs differ: {:?} @ {} vs {:?} @ {}",
            a.dims(),
            a.pixel_size(),
            b.dims(),
            b.pixel_size()
        )));
    }
    let fa = fft2(a)?;
    let fb = fft2(b)?;
    let (w, h) = a.dims();
    let n = w.min(h);
    let rings = n / 2 + 1;
    let mut num = vec![0.0; rings];
    let mut pa = vec![0.0; rings];
    let mut pb = vec![0.0; rings];
    let mut counts = vec![0usize; rings];
    for ky in 0..h {
        for kx in 0..w {
            let (sx, sy) = fa.signed_index(kx, ky);
            let fx = sx * n as f64 / w as f64;
            let fy = sy * n as f64 / h as f64;
            let r = (fx * fx + fy * fy).sqrt().round() as usize;
            if r >= rings {
                continue;
            }
            let (u, v) = (fa.get(kx, ky), fb.get(kx, ky));
            num[r] += u.re * v.re + u.im * v.im;
            pa[r] += u.norm_sqr();
            pb[r] += v.norm_sqr();
            counts[r] += 1;
        }
    }
    let df = 1.0 / (n as f64 * a.pixel_size());
    let frequencies: Vec<f64> = (1..rings).map(|r| r as f64 * df).collect();
    let correlation: Vec<f64> = (1..rings)
        .map(|r| {
            let d = pa[r] * pb[r];
            if d > 0.0 {
                (num[r] / d.sqrt()).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    let crossing = threshold_crossing(&frequencies, &correlation, threshold);
    Ok(FrcCurve {
        frequencies,
        correlation,
        counts: counts[1..].to_vec(),
        threshold,
        crossing,
    })
}

/// Interpolated frequency where `correlation` first drops below `threshold`.
pub fn threshold_crossing(frequencies: &[f64], correlation: &[f64], threshold: f64) -> Option<f64> {
    let i = correlation.iter().position(|&c| c < threshold)?;
    if i == 0 {
        return frequencies.first().copied();
    }
    let (c0, c1) = (correlation[i - 1], correlation[i]);
    let df = frequencies[i] - frequencies[i - 1];
    Some(frequencies[i - 1] + (c0 - threshold) / (c0 - c1) * df)
}

/// FRC after removing the rigid translation between `image` and `reference`.
pub fn frc_registered(image: &Image2D, reference: &Image2D, threshold: f64) -> Result<FrcCurve> {
    let (dx, dy) = estimate_shift(reference, image)?;
    let aligned = lanczos_shift(image, -dx, -dy, LANCZOS_DEFAULT_TAPS)?;
    frc(&aligned, reference, threshold)
}
