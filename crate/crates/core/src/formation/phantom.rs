use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::image::{fft2, ifft2, Image2D};

/// Synthetic specimen: a field of soft particles over a white texture,
/// low-pass filtered so no power exists above `cutoff` (1/Å). The result is
/// normalized to zero mean and unit standard deviation.
pub fn band_limited_phantom(size: usize, pixel_size: f64, cutoff: f64, seed: u64) -> Result<Image2D> {
    if size < 8 || size % 2 != 0 {
        return Err(Error::Dimension(format!("phantom size {size} must be even and >= 8")));
    }
    if !(cutoff > 0.0) || !(pixel_size > 0.0) {
        return Err(Error::Argument("cutoff and pixel size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = size as f64;
    let mut img = Image2D::from_fn(size, size, pixel_size, |_, _| {
        0.6 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    let particles = (size * size) / 400;
    for _ in 0..particles {
        let cx = rng.random_range(0.0..n);
        let cy = rng.random_range(0.0..n);
        let r = rng.random_range(2.0..7.0f64);
        let amp = rng.random_range(0.5..1.5);
        let reach = (3.0 * r).ceil() as i64;
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let x = (cx as i64 + dx).rem_euclid(size as i64) as usize;
                let y = (cy as i64 + dy).rem_euclid(size as i64) as usize;
                let d2 = (dx as f64 + cx.floor() - cx).powi(2) + (dy as f64 + cy.floor() - cy).powi(2);
                let v = img.get(x, y) + amp * (-d2 / (2.0 * r * r)).exp();
                img.set(x, y, v);
            }
        }
    }
    let mut spec = fft2(&img)?;
    let taper = 0.05 * cutoff;
    let freqs: Vec<f64> = (0..size * size)
        .map(|i| spec.frequency(i % size, i / size))
        .collect();
    spec.modulate(|kx, ky| {
        let g = freqs[ky * size + kx];
        if g <= cutoff - taper {
            1.0
        } else if g >= cutoff {
            0.0
        } else {
            0.5 * (1.0 + (std::f64::consts::PI * (g - cutoff + taper) / taper).cos())
        }
    });
    let out = ifft2(&spec)?;
    let (m, s) = (out.mean(), out.std());
    Ok(out.map(|v| (v - m) / s))
}
