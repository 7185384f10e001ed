//! 2D discrete Fourier transforms. Forward is unnormalized, inverse is
//! scaled by 1/N, DC sits at index 0.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::Image2D;
use crate::error::{Error, Result};

/// Complex Fourier coefficients of an [`Image2D`], DC at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumImage {
    width: usize,
    height: usize,
    pixel_size: f64,
    data: Vec<Complex64>,
}

impl SpectrumImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixel size of the real-space image this spectrum came from.
    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, kx: usize, ky: usize) -> Complex64 {
        self.data[ky * self.width + kx]
    }

    /// Signed integer frequency indices of bin `(kx, ky)`.
    #[inline]
    pub fn signed_index(&self, kx: usize, ky: usize) -> (f64, f64) {
        (
            signed_freq(kx, self.width) as f64,
            signed_freq(ky, self.height) as f64,
        )
    }

    /// Spatial frequency magnitude of bin `(kx, ky)` in 1/Å.
    pub fn frequency(&self, kx: usize, ky: usize) -> f64 {
        let (fx, fy) = self.signed_index(kx, ky);
        let gx = fx / (self.width as f64 * self.pixel_size);
        let gy = fy / (self.height as f64 * self.pixel_size);
        (gx * gx + gy * gy).sqrt()
    }

    /// Multiply every coefficient by `f(kx, ky)`.
    pub fn modulate(&mut self, f: impl Fn(usize, usize) -> f64) {
        let w = self.width;
        for (i, c) in self.data.iter_mut().enumerate() {
            *c *= f(i % w, i / w);
        }
    }

    /// Inverse transform keeping the complex result.
    pub fn inverse_complex(&self) -> Vec<Complex64> {
        let mut buf = self.data.clone();
        transform_in_place(&mut buf, self.width, self.height, true);
        buf
    }
}

/// Signed frequency index for bin `k` of an `n`-point transform.
#[inline]
pub(crate) fn signed_freq(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

pub fn fft2(image: &Image2D) -> Result<SpectrumImage> {
    let (w, h) = image.dims();
    if w < 2 || h < 2 {
        return Err(Error::Dimension(format!(
            "fft2 needs at least 2x2 samples, got {w}x{h}"
        )));
    }
    let mut data: Vec<Complex64> = image.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_in_place(&mut data, w, h, false);
    Ok(SpectrumImage {
        width: w,
        height: h,
        pixel_size: image.pixel_size(),
        data,
    })
}

/// Inverse transform, keeping the real part.
pub fn ifft2(spectrum: &SpectrumImage) -> Result<Image2D> {
    if spectrum.width < 2 || spectrum.height < 2 {
        return Err(Error::Dimension("ifft2 of an empty spectrum".into()));
    }
    let buf = spectrum.inverse_complex();
    Ok(Image2D::from_raw(
        spectrum.width,
        spectrum.height,
        spectrum.pixel_size,
        buf.into_iter().map(|c| c.re).collect(),
    ))
}

pub(crate) fn transform_in_place(data: &mut [Complex64], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    row_fft.process(data);
    let mut t = transpose(data, w, h);
    col_fft.process(&mut t);
    let back = transpose(&t, h, w);
    data.copy_from_slice(&back);
    if inverse {
        let s = 1.0 / (w * h) as f64;
        data.iter_mut().for_each(|c| *c *= s);
    }
}

fn transpose(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = data[y * w + x];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(w: usize, h: usize, seed: u64) -> Image2D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image2D::from_fn(w, h, 1.0, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn centered_delta_has_flat_magnitude() {
        let mut im = Image2D::zeros(16, 16, 1.0);
        im.set(8, 8, 1.0);
        let s = fft2(&im).unwrap();
        for c in s.data() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_all_sizes() {
        for &n in &[8usize, 16, 32, 64, 128] {
            let x = noise(n, n, n as u64);
            let back = ifft2(&fft2(&x).unwrap()).unwrap();
            let err = x.zip_map(&back, |a, b| a - b).unwrap().norm() / x.norm();
            assert!(err < 1e-6, "{n}: {err}");
        }
        let x = noise(24, 10, 3);
        let back = ifft2(&fft2(&x).unwrap()).unwrap();
        assert!(x.zip_map(&back, |a, b| a - b).unwrap().norm() / x.norm() < 1e-12);
    }

    #[test]
    fn parseval_against_direct_sum() {
        let x = noise(32, 32, 11);
        let s = fft2(&x).unwrap();
        let energy: f64 = x.data().iter().map(|v| v * v).sum();
        let spec: f64 = s.data().iter().map(|c| c.norm_sqr()).sum::<f64>() / 1024.0;
        assert!((energy - spec).abs() / energy < 1e-12);
    }

    #[test]
    fn matches_direct_dft() {
        let x = noise(6, 4, 5);
        let s = fft2(&x).unwrap();
        for ky in 0..4 {
            for kx in 0..6 {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..4 {
                    for xx in 0..6 {
                        let ph = -2.0
                            * std::f64::consts::PI
                            * (kx as f64 * xx as f64 / 6.0 + ky as f64 * y as f64 / 4.0);
                        acc += Complex64::from_polar(x.get(xx, y), ph);
                    }
                }
                assert!((acc - s.get(kx, ky)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn tiny_image_is_rejected() {
        let x = Image2D::zeros(1, 8, 1.0);
        assert!(matches!(fft2(&x), Err(Error::Dimension(_))));
    }

    #[test]
    fn frequency_axis_uses_pixel_size() {
        let s = fft2(&Image2D::zeros(8, 8, 2.0)).unwrap();
        assert!((s.frequency(1, 0) - 1.0 / 16.0).abs() < 1e-15);
        assert!((s.frequency(7, 0) - 1.0 / 16.0).abs() < 1e-15);
        assert!((s.frequency(4, 0) - 0.25).abs() < 1e-15);
    }
}
