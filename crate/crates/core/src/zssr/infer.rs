use crate::error::{Error, Result};
use crate::exec;
use crate::image::{bilinear_upsample, block_downsample, pixelwise_median, Dihedral, Image2D};
use crate::motion::LrSet;
use crate::srnet::{sr_forward, SrModel};

/// Default number of back-projection iterations.
pub const BACK_PROJECTION_ITERS: usize = 10;

/// Per-axis tridiagonal matrix of block-downsampling composed with bilinear
/// upsampling, as `(sub, diag, sup)`.
fn axis_operator(n: usize, s: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for o in 0..n * s {
        let u = ((o as f64 + 0.5) / s as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = u.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        let f = u - i0 as f64;
        let row = o / s;
        for (col, wgt) in [(i0, 1.0 - f), (i1, f)] {
            let v = wgt / s as f64;
            match col as isize - row as isize {
                -1 => sub[row] += v,
                0 => diag[row] += v,
                1 => sup[row] += v,
                _ => unreachable!("bilinear support spans neighbours only"),
            }
        }
    }
    (sub, diag, sup)
}

/// Thomas algorithm on a strided line.
fn solve_tridiagonal(op: &(Vec<f64>, Vec<f64>, Vec<f64>), line: &mut [f64], stride: usize, scratch: &mut [f64]) {
    let (a, b, c) = op;
    let n = b.len();
    scratch[0] = c[0] / b[0];
    line[0] /= b[0];
    for i in 1..n {
        let m = b[i] - a[i] * scratch[i - 1];
        scratch[i] = c[i] / m;
        line[i * stride] = (line[i * stride] - a[i] * line[(i - 1) * stride]) / m;
    }
    for i in (0..n - 1).rev() {
        line[i * stride] -= scratch[i] * line[(i + 1) * stride];
    }
}

/// Solve `(D U) x = r` for the separable down/up operator.
fn precondition(r: &Image2D, s: usize) -> Image2D {
    let (w, h) = r.dims();
    let ox = axis_operator(w, s);
    let oy = axis_operator(h, s);
    let mut out = r.clone();
    let data = out.data_mut();
    let mut scratch = vec![0.0; w.max(h)];
    for y in 0..h {
        solve_tridiagonal(&ox, &mut data[y * w..(y + 1) * w], 1, &mut scratch);
    }
    for x in 0..w {
        solve_tridiagonal(&oy, &mut data[x..], w, &mut scratch);
    }
    out
}

/// Iterative back-projection that enforces `block_downsample(sr, s) == lr_target`.
///
/// Each iteration adds the bilinear up-sampling of the residual after
/// inverting the down/up composition, so a consistent input is returned
/// unchanged and the residual norm never grows.
pub fn back_project(sr: &Image2D, lr_target: &Image2D, s: usize, iters: usize) -> Result<Image2D> {
    back_project_trace(sr, lr_target, s, iters).map(|(img, _)| img)
}

/// [`back_project`] plus the residual norm before each iteration and after the last.
pub fn back_project_trace(sr: &Image2D, lr_target: &Image2D, s: usize, iters: usize) -> Result<(Image2D, Vec<f64>)> {
    let (w, h) = lr_target.dims();
    if s < 1 || sr.dims() != (w * s, h * s) {
        return Err(Error::Argument(format!(
            "SR image {:?} is not {s}x the LR target {:?}",
            sr.dims(),
            (w, h)
        )));
    }
    let mut out = sr.clone();
    let mut trace = Vec::with_capacity(iters + 1);
    let target_norm = lr_target.norm();
    for _ in 0..iters {
        let resid = lr_target.zip_map(&block_downsample(&out, s)?, |a, b| a - b)?;
        let norm = resid.norm();
        trace.push(norm);
        if norm <= 1e-13 * target_norm || norm == 0.0 {
            break;
        }
        let correction = bilinear_upsample(&precondition(&resid, s), s)?;
        let candidate = out.zip_map(&correction, |a, b| a + b)?;
        let next = lr_target.zip_map(&block_downsample(&candidate, s)?, |a, b| a - b)?.norm();
        if next > norm {
            break;
        }
        out = candidate;
    }
    let last = lr_target.zip_map(&block_downsample(&out, s)?, |a, b| a - b)?.norm();
    trace.push(last);
    Ok((out, trace))
}

/// Self-ensemble output before and after back-projection.
#[derive(Debug, Clone)]
pub struct Inference {
    pub branches: Vec<Image2D>,
    pub median: Image2D,
    pub output: Image2D,
}

/// Run the network under all eight dihedral transforms of the member set,
/// undo each transform, take the pixel-wise median and back-project onto
/// the mean of the members.
pub fn infer(model: &SrModel, lr_set: &LrSet) -> Result<Image2D> {
    infer_detailed(model, lr_set, BACK_PROJECTION_ITERS).map(|r| r.output)
}

pub fn infer_detailed(model: &SrModel, lr_set: &LrSet, iters: usize) -> Result<Inference> {
    let transforms: Vec<Dihedral> = Dihedral::all().collect();
    let branches = exec::try_map_slice(&transforms, |&t| {
        let set = lr_set.map_members(|m| Ok(t.apply(m)))?;
        Ok::<_, Error>(t.apply_inverse(&sr_forward(model, &set)?))
    })?;
    let median = pixelwise_median(&branches)?;
    let output = back_project(&median, &lr_set.mean_image(), model.config.scale, iters)?;
    Ok(Inference {
        branches,
        median,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formation::band_limited_phantom;
    use crate::srnet::SrConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Image2D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image2D::from_fn(n, n, 1.0, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn operator_rows_sum_to_one() {
        for s in 2..5 {
            let (a, b, c) = axis_operator(9, s);
            for i in 0..9 {
                assert!((a[i] + b[i] + c[i] - 1.0).abs() < 1e-12);
            }
        }
        let (a, b, c) = axis_operator(4, 2);
        assert_eq!((a[1], b[1], c[1]), (0.125, 0.75, 0.125));
        assert_eq!((b[0], c[0]), (0.875, 0.125));
    }

    #[test]
    fn preconditioner_inverts_down_up() {
        let r = random(12, 1);
        let x = precondition(&r, 2);
        let back = block_downsample(&bilinear_upsample(&x, 2).unwrap(), 2).unwrap();
        let err = back.zip_map(&r, |a, b| (a - b).abs()).unwrap();
        assert!(err.data().iter().all(|&e| e < 1e-12));
    }

    #[test]
    fn consistent_input_is_unchanged() {
        let sr = random(16, 2);
        let lr = block_downsample(&sr, 2).unwrap();
        assert_eq!(back_project(&sr, &lr, 2, 10).unwrap(), sr);
    }

    #[test]
    fn zero_iterations_is_identity() {
        let sr = random(16, 3);
        let lr = random(8, 4);
        assert_eq!(back_project(&sr, &lr, 2, 0).unwrap(), sr);
    }

    #[test]
    fn residual_is_monotone_and_small() {
        let lr = random(64, 5);
        let sr = bilinear_upsample(&lr, 2).unwrap();
        let (_, trace) = back_project_trace(&sr, &lr, 2, 10).unwrap();
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(trace.last().unwrap() / lr.norm() < 1e-3);
    }

    #[test]
    fn mismatched_sizes_are_rejected() {
        assert!(back_project(&random(16, 1), &random(6, 2), 2, 1).is_err());
    }

    #[test]
    fn untrained_ensemble_is_bilinear() {
        let set = LrSet::from_members((0..3).map(|i| band_limited_phantom(16, 3.0, 0.1, i).unwrap()).collect()).unwrap();
        let cfg = SrConfig {
            channels: 4,
            res_blocks: 1,
            decoder_blocks: 1,
            scale: 2,
        };
        let r = infer_detailed(&SrModel::new(cfg, 1), &set, 10).unwrap();
        let bl = bilinear_upsample(set.reference_image(), 2).unwrap();
        let err = r.median.zip_map(&bl, |a, b| (a - b).abs()).unwrap();
        assert!(err.data().iter().all(|&e| e <= 1e-9));
        assert_eq!(r.output.dims(), (32, 32));
        let lr_err = block_downsample(&r.output, 2)
            .unwrap()
            .zip_map(&set.mean_image(), |a, b| a - b)
            .unwrap()
            .norm();
        assert!(lr_err < 1e-9 * set.mean_image().norm());
    }
}
