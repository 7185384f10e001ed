//! Minimal single-sample CNN building blocks: 3x3 convolutions with
//! hand-written backward passes, leaky ReLU, and a dense layer.

use rand::Rng;

use crate::image::Image2D;

pub const LEAKY_SLOPE: f32 = 0.1;

/// Channel-major activation volume `[c][h][w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    /// Stack images as channels after the affine map `(v - offset) * scale`.
    pub fn from_images(images: &[&Image2D], offset: f64, scale: f64) -> Self {
        let (w, h) = images[0].dims();
        let mut data = Vec::with_capacity(images.len() * w * h);
        for im in images {
            debug_assert_eq!(im.dims(), (w, h));
            data.extend(im.data().iter().map(|&v| ((v - offset) * scale) as f32));
        }
        Self {
            c: images.len(),
            h,
            w,
            data,
        }
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    fn row(&self, c: usize, y: usize) -> &[f32] {
        let o = (c * self.h + y) * self.w;
        &self.data[o..o + self.w]
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        (self.c, self.h, self.w) == (other.c, other.h, other.w)
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn leaky_relu(x: &Tensor) -> Tensor {
    Tensor {
        data: x
            .data
            .iter()
            .map(|&v| if v > 0.0 { v } else { LEAKY_SLOPE * v })
            .collect(),
        ..*x
    }
}

/// Gradient through a leaky ReLU given its pre-activation.
pub fn leaky_relu_backward(pre: &Tensor, grad: &Tensor) -> Tensor {
    Tensor {
        data: pre
            .data
            .iter()
            .zip(&grad.data)
            .map(|(&p, &g)| if p > 0.0 { g } else { LEAKY_SLOPE * g })
            .collect(),
        ..*pre
    }
}

/// `out[x] += a*inp[x-1] + b*inp[x] + c*inp[x+1]` with zero padding.
#[inline]
fn row_axpy3(out: &mut [f32], inp: &[f32], a: f32, b: f32, c: f32) {
    let n = out.len();
    if n == 1 {
        out[0] += b * inp[0];
        return;
    }
    out[0] += b * inp[0] + c * inp[1];
    out[n - 1] += a * inp[n - 2] + b * inp[n - 1];
    let (l, m, r) = (&inp[..n - 2], &inp[1..n - 1], &inp[2..]);
    for (((o, &x0), &x1), &x2) in out[1..n - 1].iter_mut().zip(l).zip(m).zip(r) {
        *o += a * x0 + b * x1 + c * x2;
    }
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s: f32 = acc.iter().sum();
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Three-tap correlation of rows: `[Σ g[x] i[x-1], Σ g[x] i[x], Σ g[x] i[x+1]]`.
#[inline]
fn row_dot3(g: &[f32], i: &[f32]) -> [f32; 3] {
    let n = g.len();
    if n == 1 {
        return [0.0, g[0] * i[0], 0.0];
    }
    [dot(&g[1..], &i[..n - 1]), dot(g, i), dot(&g[..n - 1], &i[1..])]
}

/// 3x3 convolution, zero padding 1, stride 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_c: usize,
    pub out_c: usize,
    pub stride: usize,
    pub has_bias: bool,
    /// `[out][in][ky][kx]`
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv2d {
    pub fn zeros(in_c: usize, out_c: usize, stride: usize, has_bias: bool) -> Self {
        assert!(stride == 1 || stride == 2);
        Self {
            in_c,
            out_c,
            stride,
            has_bias,
            weight: vec![0.0; out_c * in_c * 9],
            bias: vec![0.0; if has_bias { out_c } else { 0 }],
        }
    }

    /// Uniform fan-in initialization with variance `gain² / fan_in`.
    pub fn init<R: Rng>(in_c: usize, out_c: usize, stride: usize, has_bias: bool, gain: f32, rng: &mut R) -> Self {
        let mut c = Self::zeros(in_c, out_c, stride, has_bias);
        let bound = gain * (3.0 / (in_c * 9) as f32).sqrt();
        if bound > 0.0 {
            c.weight.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
        }
        c
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.in_c, self.out_c, self.stride, self.has_bias)
    }

    #[inline]
    fn w(&self, o: usize, i: usize) -> &[f32] {
        let b = (o * self.in_c + i) * 9;
        &self.weight[b..b + 9]
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        if self.stride == 1 {
            (h, w)
        } else {
            (h.div_ceil(2), w.div_ceil(2))
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.c, self.in_c, "conv input channels");
        if self.stride == 2 {
            return self.forward_strided(x);
        }
        let (h, w) = (x.h, x.w);
        let mut out = Tensor::zeros(self.out_c, h, w);
        let plane = h * w;
        for y in 0..h {
            for o in 0..self.out_c {
                let orow = &mut out.data[o * plane + y * w..o * plane + (y + 1) * w];
                if self.has_bias {
                    orow.iter_mut().for_each(|v| *v = self.bias[o]);
                }
                for i in 0..self.in_c {
                    let k = self.w(o, i);
                    for ky in 0..3 {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        row_axpy3(orow, x.row(i, sy as usize), k[ky * 3], k[ky * 3 + 1], k[ky * 3 + 2]);
                    }
                }
            }
        }
        out
    }

    fn forward_strided(&self, x: &Tensor) -> Tensor {
        let (oh, ow) = self.out_dims(x.h, x.w);
        let mut out = Tensor::zeros(self.out_c, oh, ow);
        for o in 0..self.out_c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = if self.has_bias { self.bias[o] } else { 0.0 };
                    for i in 0..self.in_c {
                        let k = self.w(o, i);
                        for ky in 0..3 {
                            let sy = (2 * oy + ky) as isize - 1;
                            if sy < 0 || sy >= x.h as isize {
                                continue;
                            }
                            let row = x.row(i, sy as usize);
                            for kx in 0..3 {
                                let sx = (2 * ox + kx) as isize - 1;
                                if sx >= 0 && sx < x.w as isize {
                                    acc += k[ky * 3 + kx] * row[sx as usize];
                                }
                            }
                        }
                    }
                    out.data[(o * oh + oy) * ow + ox] = acc;
                }
            }
        }
        out
    }

    /// Accumulate parameter gradients into `grads` and return the input
    /// gradient when `need_input` is set.
    pub fn backward(&self, x: &Tensor, gy: &Tensor, grads: &mut Conv2d, need_input: bool) -> Option<Tensor> {
        if self.stride == 2 {
            return self.backward_strided(x, gy, grads, need_input);
        }
        let (h, w) = (x.h, x.w);
        if self.has_bias {
            for o in 0..self.out_c {
                grads.bias[o] += gy.plane(o).iter().sum::<f32>();
            }
        }
        for y in 0..h {
            for o in 0..self.out_c {
                let g = gy.row(o, y);
                for i in 0..self.in_c {
                    let base = (o * self.in_c + i) * 9;
                    for ky in 0..3 {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let d = row_dot3(g, x.row(i, sy as usize));
                        grads.weight[base + ky * 3] += d[0];
                        grads.weight[base + ky * 3 + 1] += d[1];
                        grads.weight[base + ky * 3 + 2] += d[2];
                    }
                }
            }
        }
        if !need_input {
            return None;
        }
        let mut gx = Tensor::zeros(self.in_c, h, w);
        let plane = h * w;
        for y in 0..h {
            for i in 0..self.in_c {
                let grow = &mut gx.data[i * plane + y * w..i * plane + (y + 1) * w];
                for o in 0..self.out_c {
                    let k = self.w(o, i);
                    for ky in 0..3 {
                        // output row that read input row y through tap ky
                        let oy = y as isize - ky as isize + 1;
                        if oy < 0 || oy >= h as isize {
                            continue;
                        }
                        row_axpy3(grow, gy.row(o, oy as usize), k[ky * 3 + 2], k[ky * 3 + 1], k[ky * 3]);
                    }
                }
            }
        }
        Some(gx)
    }

    fn backward_strided(&self, x: &Tensor, gy: &Tensor, grads: &mut Conv2d, need_input: bool) -> Option<Tensor> {
        let (oh, ow) = (gy.h, gy.w);
        let mut gx = need_input.then(|| Tensor::zeros(self.in_c, x.h, x.w));
        for o in 0..self.out_c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = gy.data[(o * oh + oy) * ow + ox];
                    if self.has_bias {
                        grads.bias[o] += g;
                    }
                    for i in 0..self.in_c {
                        let base = (o * self.in_c + i) * 9;
                        for ky in 0..3 {
                            let sy = (2 * oy + ky) as isize - 1;
                            if sy < 0 || sy >= x.h as isize {
                                continue;
                            }
                            for kx in 0..3 {
                                let sx = (2 * ox + kx) as isize - 1;
                                if sx < 0 || sx >= x.w as isize {
                                    continue;
                                }
                                let idx = (i * x.h + sy as usize) * x.w + sx as usize;
                                grads.weight[base + ky * 3 + kx] += g * x.data[idx];
                                if let Some(gx) = gx.as_mut() {
                                    gx.data[idx] += g * self.weight[base + ky * 3 + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
        gx
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `[out][in]`
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.inputs, self.outputs)
    }

    pub fn forward(&self, x: &[f32]) -> Vec<f32> {
        (0..self.outputs)
            .map(|o| self.bias[o] + dot(&self.weight[o * self.inputs..(o + 1) * self.inputs], x))
            .collect()
    }

    pub fn backward(&self, x: &[f32], gy: &[f32], grads: &mut Dense) -> Vec<f32> {
        let mut gx = vec![0.0; self.inputs];
        for o in 0..self.outputs {
            grads.bias[o] += gy[o];
            for i in 0..self.inputs {
                grads.weight[o * self.inputs + i] += gy[o] * x[i];
                gx[i] += gy[o] * self.weight[o * self.inputs + i];
            }
        }
        gx
    }
}

/// Flat parameter access used by the optimizer and checkpoints. The visit
/// order defines the serialized layout.
pub trait Parameters {
    fn visit(&self, f: &mut dyn FnMut(&[f32]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32]));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |p| n += p.len());
        n
    }

    fn flatten(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit(&mut |p| out.extend_from_slice(p));
        out
    }

    fn load_flat(&mut self, flat: &[f32]) {
        let mut at = 0;
        self.visit_mut(&mut |p| {
            p.copy_from_slice(&flat[at..at + p.len()]);
            at += p.len();
        });
        assert_eq!(at, flat.len(), "parameter count mismatch");
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |p| ok &= p.iter().all(|v| v.is_finite()));
        ok
    }
}

impl Parameters for Conv2d {
    fn visit(&self, f: &mut dyn FnMut(&[f32])) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32])) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

impl Parameters for Dense {
    fn visit(&self, f: &mut dyn FnMut(&[f32])) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32])) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// Element-wise sum of two parameter sets with the same layout.
pub fn accumulate<P: Parameters>(into: &mut P, other: &P) {
    let flat = other.flatten();
    let mut at = 0;
    into.visit_mut(&mut |p| {
        for v in p.iter_mut() {
            *v += flat[at];
            at += 1;
        }
    });
}
