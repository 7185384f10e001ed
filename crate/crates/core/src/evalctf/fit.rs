use nalgebra::{DMatrix, DVector};

use super::spectrum::RadialProfile;
use crate::error::{Error, Result};
use crate::formation::{ctf_eval, CtfParams};

/// Order of the log-power background polynomial.
pub const BACKGROUND_ORDER: usize = 4;
/// Width in bins of the moving correlation window for the fit resolution.
pub const RESOLUTION_WINDOW: usize = 7;
/// Correlation level below which the fit is considered lost.
pub const RESOLUTION_THRESHOLD: f64 = 0.5;

/// Defocus grid and frequency band for [`fit_ctf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtfSearch {
    pub min_defocus: f64,
    pub max_defocus: f64,
    pub step: f64,
    /// Low end of the fit band as a resolution in Å.
    pub low_resolution: f64,
    /// High end of the fit band as a fraction of Nyquist.
    pub nyquist_fraction: f64,
}

impl Default for CtfSearch {
    fn default() -> Self {
        Self {
            min_defocus: 5000.0,
            max_defocus: 30000.0,
            step: 50.0,
            low_resolution: 30.0,
            nyquist_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtfFitReport {
    pub defocus: f64,
    pub cc_score: f64,
    /// Å; never finer than twice the pixel size.
    pub fit_resolution: f64,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Least-squares polynomial in a rescaled frequency, evaluated at the samples.
fn polynomial_background(x: &[f64], y: &[f64], order: usize) -> Vec<f64> {
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let t: Vec<f64> = x.iter().map(|v| 2.0 * (v - lo) / (hi - lo) - 1.0).collect();
    let cols = (order + 1).min(x.len());
    let a = DMatrix::from_fn(x.len(), cols, |i, j| t[i].powi(j as i32));
    let b = DVector::from_column_slice(y);
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(cols));
    (a * coef).iter().copied().collect()
}

/// Grid search over defocus maximizing the correlation between the
/// background-subtracted log profile and the squared CTF inside the band.
pub fn fit_ctf(profile: &RadialProfile, params: &CtfParams, search: &CtfSearch) -> Result<CtfFitReport> {
    params.validate()?;
    if !(search.min_defocus > 0.0 && search.max_defocus >= search.min_defocus && search.step > 0.0) {
        return Err(Error::Argument("defocus range must be positive with a positive step".into()));
    }
    let nyquist = profile.frequencies.last().copied().unwrap_or(0.0);
    let lo = 1.0 / search.low_resolution;
    let hi = search.nyquist_fraction * nyquist;
    let band: Vec<usize> = (0..profile.len())
        .filter(|&i| {
            let f = profile.frequencies[i];
            f >= lo && f <= hi && profile.power[i] > 0.0
        })
        .collect();
    if band.len() < RESOLUTION_WINDOW.max(BACKGROUND_ORDER + 2) {
        return Err(Error::Argument(format!(
            "fit band [{lo:.4}, {hi:.4}] 1/Å holds {} usable bins",
            band.len()
        )));
    }
    let freqs: Vec<f64> = band.iter().map(|&i| profile.frequencies[i]).collect();
    let logp: Vec<f64> = band.iter().map(|&i| profile.power[i].ln()).collect();
    let bg = polynomial_background(&freqs, &logp, BACKGROUND_ORDER);
    let signal: Vec<f64> = logp.iter().zip(&bg).map(|(a, b)| a - b).collect();
    let model = |dz: f64| -> Vec<f64> {
        let p = params.with_defocus(dz);
        freqs.iter().map(|&g| ctf_eval(&p, g).powi(2)).collect()
    };
    let steps = ((search.max_defocus - search.min_defocus) / search.step).floor() as usize;
    let mut best = (search.min_defocus, f64::NEG_INFINITY);
    for i in 0..=steps {
        let dz = search.min_defocus + i as f64 * search.step;
        let cc = pearson(&signal, &model(dz));
        if cc > best.1 {
            best = (dz, cc);
        }
    }
    let fitted = model(best.0);
    let half = RESOLUTION_WINDOW / 2;
    let mut cutoff = freqs[freqs.len() - 1 - half];
    for c in half..freqs.len() - half {
        let r = pearson(&signal[c - half..=c + half], &fitted[c - half..=c + half]);
        if r < RESOLUTION_THRESHOLD {
            cutoff = freqs[c];
            break;
        }
    }
    Ok(CtfFitReport {
        defocus: best.0,
        cc_score: best.1,
        fit_resolution: 1.0 / cutoff,
    })
}
