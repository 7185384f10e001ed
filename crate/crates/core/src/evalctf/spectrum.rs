use crate::error::{Error, Result};
use crate::image::{fft2, extract_patch, Image2D};

/// Default tile edge for [`power_spectrum`].
pub const DEFAULT_TILE: usize = 256;

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos())
        .collect()
}

fn tile_origins(len: usize, tile: usize) -> Vec<usize> {
    let step = tile / 2;
    let mut v: Vec<usize> = (0..=(len - tile) / step).map(|i| i * step).collect();
    if *v.last().unwrap() != len - tile {
        v.push(len - tile);
    }
    v
}

/// Averaged periodogram over half-overlapping, mean-subtracted,
/// Hann-windowed square tiles. The result is `tile x tile` with the DC term
/// at `(tile/2, tile/2)` and keeps the real-space pixel size.
pub fn power_spectrum(image: &Image2D, tile: usize) -> Result<Image2D> {
    let (w, h) = image.dims();
    if tile < 2 || tile % 2 != 0 {
        return Err(Error::Argument(format!("tile {tile} must be even and >= 2")));
    }
    if tile > w.min(h) {
        return Err(Error::Argument(format!("tile {tile} exceeds image size {w}x{h}")));
    }
    let win = hann(tile);
    let mut acc = vec![0.0; tile * tile];
    let xs = tile_origins(w, tile);
    let ys = tile_origins(h, tile);
    for &y0 in &ys {
        for &x0 in &xs {
            let patch = extract_patch(image, x0, y0, tile, tile)?;
            let mean = patch.mean();
            let windowed = Image2D::from_fn(tile, tile, image.pixel_size(), |x, y| {
                (patch.get(x, y) - mean) * win[x] * win[y]
            });
            let spec = fft2(&windowed)?;
            for (a, c) in acc.iter_mut().zip(spec.data()) {
                *a += c.norm_sqr();
            }
        }
    }
    let count = (xs.len() * ys.len()) as f64;
    let half = tile / 2;
    let mut out = Image2D::zeros(tile, tile, image.pixel_size());
    for ky in 0..tile {
        for kx in 0..tile {
            out.set((kx + half) % tile, (ky + half) % tile, acc[ky * tile + kx] / count);
        }
    }
    Ok(out)
}

/// Mean spectral power on integer-radius annuli of a DC-centered spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    /// Bin centers in 1/Å.
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub counts: Vec<usize>,
}

impl RadialProfile {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> RadialProfile {
        RadialProfile {
            power: self.power.iter().map(|p| p * factor).collect(),
            ..self.clone()
        }
    }
}

pub fn radial_average(spectrum: &Image2D) -> RadialProfile {
    let (w, h) = spectrum.dims();
    let n = w.min(h);
    let bins = n / 2 + 1;
    let mut sum = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    let (cx, cy) = (w / 2, h / 2);
    for y in 0..h {
        for x in 0..w {
            let fx = (x as f64 - cx as f64) * n as f64 / w as f64;
            let fy = (y as f64 - cy as f64) * n as f64 / h as f64;
            let r = (fx * fx + fy * fy).sqrt().round() as usize;
            if r < bins {
                sum[r] += spectrum.get(x, y);
                counts[r] += 1;
            }
        }
    }
    let df = 1.0 / (n as f64 * spectrum.pixel_size());
    RadialProfile {
        frequencies: (0..bins).map(|r| r as f64 * df).collect(),
        power: sum.iter().zip(&counts).map(|(s, &c)| if c > 0 { (s / c as f64).max(0.0) } else { 0.0 }).collect(),
        counts,
    }
}
