//! Resampling: Lanczos sub-pixel translation, bilinear up-sampling, block
//! averaging and patch extraction.

use std::f64::consts::PI;

use super::Image2D;
use crate::error::{Error, Result};

pub const LANCZOS_DEFAULT_TAPS: usize = 3;

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.fract() == 0.0 {
        0.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn sinc_deriv(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        ((PI * x).cos() - sinc(x)) / x
    }
}

/// Lanczos window `sinc(x) sinc(x/a)` on `|x| < a`.
pub fn lanczos_kernel(x: f64, a: usize) -> f64 {
    let a = a as f64;
    if x.abs() >= a {
        0.0
    } else {
        sinc(x) * sinc(x / a)
    }
}

fn lanczos_kernel_deriv(x: f64, a: usize) -> f64 {
    let af = a as f64;
    if x.abs() >= af {
        0.0
    } else {
        sinc_deriv(x) * sinc(x / af) + sinc(x) * sinc_deriv(x / af) / af
    }
}

/// One axis of a separable Lanczos translation: `out[i] = Σ_t w_t in[clamp(i + offset + t)]`.
#[derive(Debug, Clone)]
struct AxisShift {
    offset: i64,
    taps: Vec<i64>,
    weights: Vec<f64>,
    /// Derivative of each weight with respect to the shift.
    dweights: Vec<f64>,
}

impl AxisShift {
    fn new(shift: f64, a: usize) -> Self {
        // Source position p = i - shift; floor(p) - i is the same for every i.
        let offset = (-shift).floor();
        let frac = -shift - offset;
        let taps: Vec<i64> = (-(a as i64) + 1..=a as i64).collect();
        let raw: Vec<f64> = taps.iter().map(|&t| lanczos_kernel(frac - t as f64, a)).collect();
        // d(frac)/d(shift) = -1
        let draw: Vec<f64> = taps
            .iter()
            .map(|&t| -lanczos_kernel_deriv(frac - t as f64, a))
            .collect();
        let sum: f64 = raw.iter().sum();
        let dsum: f64 = draw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|r| r / sum).collect();
        let dweights = raw
            .iter()
            .zip(&draw)
            .map(|(r, d)| (d * sum - r * dsum) / (sum * sum))
            .collect();
        Self {
            offset: offset as i64,
            taps,
            weights,
            dweights,
        }
    }

    fn is_identity(&self) -> bool {
        self.offset == 0 && self.weights.iter().zip(&self.taps).all(|(&w, &t)| {
            if t == 0 {
                w == 1.0
            } else {
                w == 0.0
            }
        })
    }

    fn src(&self, i: usize, t: i64, n: usize) -> usize {
        (i as i64 + self.offset + t).clamp(0, n as i64 - 1) as usize
    }

    /// Apply along a strided line of `n` samples.
    fn apply_line(&self, weights: &[f64], input: &[f64], out: &mut [f64], n: usize, stride: usize) {
        for i in 0..n {
            let mut acc = 0.0;
            for (&t, &w) in self.taps.iter().zip(weights) {
                acc += w * input[self.src(i, t, n) * stride];
            }
            out[i * stride] = acc;
        }
    }

    fn adjoint_line(&self, input: &[f64], out: &mut [f64], n: usize, stride: usize) {
        for i in 0..n {
            out[i * stride] = 0.0;
        }
        for i in 0..n {
            let g = input[i * stride];
            for (&t, &w) in self.taps.iter().zip(&self.weights) {
                out[self.src(i, t, n) * stride] += w * g;
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Pass {
    Value,
    Deriv,
    Adjoint,
}

/// Separable Lanczos translation by `(dx, dy)` with edge replication, its
/// adjoint, and its derivatives with respect to the shift.
#[derive(Debug, Clone)]
pub struct LanczosShift {
    x: AxisShift,
    y: AxisShift,
}

impl LanczosShift {
    pub fn new(dx: f64, dy: f64, a: usize) -> Self {
        Self {
            x: AxisShift::new(dx, a),
            y: AxisShift::new(dy, a),
        }
    }

    fn run_x(&self, image: &Image2D, pass: Pass) -> Image2D {
        let (w, h) = image.dims();
        let mut out = Image2D::zeros(w, h, image.pixel_size());
        for y in 0..h {
            let src = &image.data()[y * w..(y + 1) * w];
            let dst = &mut out.data_mut()[y * w..(y + 1) * w];
            match pass {
                Pass::Value => self.x.apply_line(&self.x.weights, src, dst, w, 1),
                Pass::Deriv => self.x.apply_line(&self.x.dweights, src, dst, w, 1),
                Pass::Adjoint => self.x.adjoint_line(src, dst, w, 1),
            }
        }
        out
    }

    fn run_y(&self, image: &Image2D, pass: Pass) -> Image2D {
        let (w, h) = image.dims();
        let mut out = Image2D::zeros(w, h, image.pixel_size());
        let src = image.data();
        let dst = out.data_mut();
        for x in 0..w {
            match pass {
                Pass::Value => self.y.apply_line(&self.y.weights, &src[x..], &mut dst[x..], h, w),
                Pass::Deriv => self.y.apply_line(&self.y.dweights, &src[x..], &mut dst[x..], h, w),
                Pass::Adjoint => self.y.adjoint_line(&src[x..], &mut dst[x..], h, w),
            }
        }
        out
    }

    pub fn apply(&self, image: &Image2D) -> Image2D {
        if self.x.is_identity() && self.y.is_identity() {
            return image.clone();
        }
        self.run_y(&self.run_x(image, Pass::Value), Pass::Value)
    }

    /// Transpose of [`apply`](Self::apply).
    pub fn adjoint(&self, image: &Image2D) -> Image2D {
        self.run_x(&self.run_y(image, Pass::Adjoint), Pass::Adjoint)
    }

    /// Derivative of the shifted image with respect to `dx`.
    pub fn d_dx(&self, image: &Image2D) -> Image2D {
        self.run_y(&self.run_x(image, Pass::Deriv), Pass::Value)
    }

    /// Derivative of the shifted image with respect to `dy`.
    pub fn d_dy(&self, image: &Image2D) -> Image2D {
        self.run_y(&self.run_x(image, Pass::Value), Pass::Deriv)
    }
}

fn check_shift(image: &Image2D, dx: f64, dy: f64, a: usize) -> Result<()> {
    if !(a == 2 || a == 3) {
        return Err(Error::Argument(format!("Lanczos order {a} not in {{2, 3}}")));
    }
    let bound = image.width().min(image.height()) as f64 / 4.0;
    if !(dx.abs() < bound && dy.abs() < bound) {
        return Err(Error::Range(format!(
            "shift ({dx}, {dy}) exceeds the bound {bound} for a {}x{} image",
            image.width(),
            image.height()
        )));
    }
    Ok(())
}

/// Translate `image` by `(dx, dy)` pixels so that `out(x, y) ≈ in(x - dx, y - dy)`.
pub fn lanczos_shift(image: &Image2D, dx: f64, dy: f64, a: usize) -> Result<Image2D> {
    check_shift(image, dx, dy, a)?;
    Ok(LanczosShift::new(dx, dy, a).apply(image))
}

/// Shifted image together with its partial derivatives in `dx` and `dy`.
pub fn lanczos_shift_with_grad(
    image: &Image2D,
    dx: f64,
    dy: f64,
    a: usize,
) -> Result<(Image2D, Image2D, Image2D)> {
    check_shift(image, dx, dy, a)?;
    let op = LanczosShift::new(dx, dy, a);
    Ok((op.apply(image), op.d_dx(image), op.d_dy(image)))
}

/// Bilinear interpolation onto an `s`-times finer grid (pixel-center aligned).
pub fn bilinear_upsample(image: &Image2D, s: usize) -> Result<Image2D> {
    if s < 1 {
        return Err(Error::Argument("upsampling factor must be >= 1".into()));
    }
    if s == 1 {
        return Ok(image.clone());
    }
    let (w, h) = image.dims();
    let coords = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|o| {
                let u = ((o as f64 + 0.5) / s as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = u.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, u - i0 as f64)
            })
            .collect()
    };
    let cx = coords(w * s, w);
    let cy = coords(h * s, h);
    let mut out = Vec::with_capacity(w * h * s * s);
    for &(y0, y1, fy) in &cy {
        let r0 = image.row(y0);
        let r1 = image.row(y1);
        for &(x0, x1, fx) in &cx {
            let top = r0[x0] + fx * (r0[x1] - r0[x0]);
            let bot = r1[x0] + fx * (r1[x1] - r1[x0]);
            out.push(top + fy * (bot - top));
        }
    }
    Ok(Image2D::from_raw(
        w * s,
        h * s,
        image.pixel_size() / s as f64,
        out,
    ))
}

/// Mean over non-overlapping `s x s` blocks.
pub fn block_downsample(image: &Image2D, s: usize) -> Result<Image2D> {
    if s < 1 {
        return Err(Error::Argument("downsampling factor must be >= 1".into()));
    }
    let (w, h) = image.dims();
    if w % s != 0 || h % s != 0 {
        return Err(Error::Dimension(format!(
            "{w}x{h} is not divisible by the factor {s}"
        )));
    }
    if s == 1 {
        return Ok(image.clone());
    }
    let (ow, oh) = (w / s, h / s);
    let mut out = vec![0.0; ow * oh];
    for y in 0..h {
        let row = image.row(y);
        let orow = &mut out[(y / s) * ow..(y / s + 1) * ow];
        for (o, chunk) in orow.iter_mut().zip(row.chunks_exact(s)) {
            *o += chunk.iter().sum::<f64>();
        }
    }
    let inv = 1.0 / (s * s) as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    Ok(Image2D::from_raw(ow, oh, image.pixel_size() * s as f64, out))
}

/// Copy of the rectangle `[x0, x0+w) x [y0, y0+h)`.
pub fn extract_patch(image: &Image2D, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image2D> {
    if w == 0 || h == 0 || x0 + w > image.width() || y0 + h > image.height() {
        return Err(Error::Range(format!(
            "patch {w}x{h} at ({x0}, {y0}) outside a {}x{} image",
            image.width(),
            image.height()
        )));
    }
    Ok(image.crop_unchecked(x0, y0, w, h))
}
