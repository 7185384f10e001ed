//! Real-valued image containers and the primitive operations built on them.

mod dihedral;
mod fft;
mod mrc;
mod resample;

pub use resample::LanczosShift;

pub use dihedral::{dihedral, dihedral_inverse, Dihedral};
pub use fft::{fft2, ifft2, SpectrumImage};
pub(crate) use fft::{signed_freq, transform_in_place};
pub use mrc::{decode_mrc, encode_mrc, read_mrc, write_mrc, MRC_HEADER_LEN};
pub use resample::{
    bilinear_upsample, block_downsample, extract_patch, lanczos_kernel, lanczos_shift,
    lanczos_shift_with_grad, LANCZOS_DEFAULT_TAPS,
};

use crate::error::{Error, Result};


/// A single-channel image with row-major samples and a physical pixel size in Å.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    width: usize,
    height: usize,
    pixel_size: f64,
    data: Vec<f64>,
}

impl Image2D {
    pub fn new(width: usize, height: usize, pixel_size: f64, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("empty image {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} samples for a {width}x{height} image",
                data.len()
            )));
        }
        if !(pixel_size.is_finite() && pixel_size > 0.0) {
            return Err(Error::Argument(format!("pixel size {pixel_size} must be > 0")));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            width,
            height,
            pixel_size,
            data,
        })
    }

    /// Construct without validation; callers guarantee the invariants.
    pub(crate) fn from_raw(width: usize, height: usize, pixel_size: f64, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            pixel_size,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize, pixel_size: f64) -> Self {
        Self::from_raw(width, height, pixel_size, vec![0.0; width * height])
    }

    pub fn constant(width: usize, height: usize, pixel_size: f64, value: f64) -> Self {
        Self::from_raw(width, height, pixel_size, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        pixel_size: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_raw(width, height, pixel_size, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn with_pixel_size(mut self, pixel_size: f64) -> Self {
        self.pixel_size = pixel_size;
        self
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn same_shape(&self, other: &Image2D) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn require_same_shape(&self, other: &Image2D, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub(crate) fn require_even(&self, what: &str) -> Result<()> {
        if self.width % 2 == 0 && self.height % 2 == 0 {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: odd dimensions {}x{} are not supported",
                self.width, self.height
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image2D {
        Self::from_raw(
            self.width,
            self.height,
            self.pixel_size,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Element-wise combination of two equally sized images.
    pub fn zip_map(&self, other: &Image2D, f: impl Fn(f64, f64) -> f64) -> Result<Image2D> {
        self.require_same_shape(other, "zip_map")?;
        Ok(Self::from_raw(
            self.width,
            self.height,
            self.pixel_size,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Root of the mean squared sample.
    pub fn rms(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rectangular sub-region `[x0, x0+w) x [y0, y0+h)` without copying checks.
    pub(crate) fn crop_unchecked(&self, x0: usize, y0: usize, w: usize, h: usize) -> Image2D {
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        Self::from_raw(w, h, self.pixel_size, data)
    }
}

/// Pixel-wise median over a set of equally shaped images. For an even count
/// the two central order statistics are averaged.
pub fn pixelwise_median(images: &[Image2D]) -> Result<Image2D> {
    let first = images
        .first()
        .ok_or_else(|| Error::Argument("median of an empty image set".into()))?;
    for im in images {
        first.require_same_shape(im, "pixelwise_median")?;
    }
    let n = images.len();
    let mut buf = vec![0.0; n];
    let data = (0..first.len())
        .map(|i| {
            for (b, im) in buf.iter_mut().zip(images) {
                *b = im.data[i];
            }
            buf.sort_by(f64::total_cmp);
            if n % 2 == 1 {
                buf[n / 2]
            } else {
                0.5 * (buf[n / 2 - 1] + buf[n / 2])
            }
        })
        .collect();
    Ok(Image2D::from_raw(
        first.width,
        first.height,
        first.pixel_size,
        data,
    ))
}

/// Pixel-wise arithmetic mean over a set of equally shaped images.
pub fn pixelwise_mean(images: &[Image2D]) -> Result<Image2D> {
    let first = images
        .first()
        .ok_or_else(|| Error::Argument("mean of an empty image set".into()))?;
    let mut acc = vec![0.0; first.len()];
    for im in images {
        first.require_same_shape(im, "pixelwise_mean")?;
        for (a, v) in acc.iter_mut().zip(&im.data) {
            *a += v;
        }
    }
    let inv = 1.0 / images.len() as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Ok(Image2D::from_raw(first.width, first.height, first.pixel_size, acc))
}

/// Ordered raw movie frames sharing one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct MovieStack {
    frames: Vec<Image2D>,
}

impl MovieStack {
    pub fn new(frames: Vec<Image2D>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Argument("a movie stack needs at least one frame".into()))?;
        for (i, f) in frames.iter().enumerate() {
            if !first.same_shape(f) || f.pixel_size != first.pixel_size {
                return Err(Error::Dimension(format!(
                    "frame {i} is {}x{} @ {} Å, expected {}x{} @ {} Å",
                    f.width, f.height, f.pixel_size, first.width, first.height, first.pixel_size
                )));
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[Image2D] {
        &self.frames
    }

    pub fn frame(&self, j: usize) -> &Image2D {
        &self.frames[j]
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    pub fn pixel_size(&self) -> f64 {
        self.frames[0].pixel_size
    }

    pub fn into_frames(self) -> Vec<Image2D> {
        self.frames
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(matches!(
            Image2D::new(2, 2, 1.0, vec![0.0; 3]),
            Err(Error::Dimension(_))
        ));
        assert!(Image2D::new(2, 2, 0.0, vec![0.0; 4]).is_err());
        assert!(Image2D::new(2, 2, 1.0, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(Image2D::new(0, 2, 1.0, vec![]).is_err());
    }

    #[test]
    fn median_even_count_averages_central_pair() {
        let ims: Vec<_> = [1.0, 4.0, 2.0, 10.0]
            .iter()
            .map(|&v| Image2D::constant(2, 2, 1.0, v))
            .collect();
        let m = pixelwise_median(&ims).unwrap();
        assert!(m.data().iter().all(|&v| v == 3.0));
        let m = pixelwise_median(&ims[..3]).unwrap();
        assert!(m.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn stack_requires_homogeneous_frames() {
        let a = Image2D::zeros(4, 4, 1.0);
        let b = Image2D::zeros(4, 2, 1.0);
        assert!(MovieStack::new(vec![a.clone(), b]).is_err());
        assert!(MovieStack::new(vec![]).is_err());
        let c = Image2D::zeros(4, 4, 2.0);
        assert!(MovieStack::new(vec![a.clone(), c]).is_err());
        assert_eq!(MovieStack::new(vec![a.clone(), a]).unwrap().frame_count(), 2);
    }
}
