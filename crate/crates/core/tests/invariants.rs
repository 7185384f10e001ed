//! Property tests over randomized inputs.

use cryozssr::evalctf::{fit_ctf, frc, power_spectrum, radial_average, CtfSearch};
use cryozssr::formation::{apply_ctf, band_limited_phantom, simulate_movie, CtfParams, SimConfig};
use cryozssr::image::{
    bilinear_upsample, block_downsample, decode_mrc, encode_mrc, fft2, ifft2, lanczos_shift, Dihedral,
};
use cryozssr::motion::{make_lr_set, LrSet};
use cryozssr::srnet::{registered_loss, sr_forward, SrConfig, SrModel};
use cryozssr::zssr::{back_project_trace, run_schedule, sample_training_pair, Objective, TrainConfig};
use cryozssr::{Image2D, MovieStack, Result};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn image(w: usize, h: usize, px: f64) -> impl Strategy<Value = Image2D> {
    prop::collection::vec(-10.0f64..10.0, w * h)
        .prop_map(move |d| Image2D::new(w, h, px, d).unwrap())
}

fn square(sizes: &'static [usize]) -> impl Strategy<Value = Image2D> {
    prop::sample::select(sizes).prop_flat_map(|n| image(n, n, 1.0))
}

fn rel_err(a: &Image2D, b: &Image2D) -> f64 {
    let d = a.zip_map(b, |x, y| x - y).unwrap().norm();
    d / b.norm().max(1e-300)
}

fn tiny_set(seed: u64, n: usize, k: usize) -> LrSet {
    let truth = band_limited_phantom(2 * n, 1.0, 0.3, seed).unwrap();
    let cfg = SimConfig::with_random_walk(k, 0.2, 2, seed);
    LrSet::from_stack(simulate_movie(&truth, &CtfParams::default(), &cfg).unwrap().stack).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fft_round_trip(img in square(&[8, 16, 32, 64, 128])) {
        let back = ifft2(&fft2(&img).unwrap()).unwrap();
        prop_assert!(rel_err(&back, &img) < 1e-6);
    }

    #[test]
    fn zero_lanczos_shift_is_identity(img in image(24, 16, 1.0)) {
        prop_assert_eq!(lanczos_shift(&img, 0.0, 0.0, 3).unwrap(), img);
    }

    #[test]
    fn dihedral_round_trips_and_closes(img in image(6, 4, 1.0)) {
        let images: Vec<Image2D> = Dihedral::all().map(|g| g.apply(&img)).collect();
        for g in Dihedral::all() {
            prop_assert_eq!(&g.apply_inverse(&g.apply(&img)), &img);
            prop_assert_eq!(&g.inverse().apply(&g.apply(&img)), &img);
            for h in Dihedral::all() {
                let composed = h.apply(&g.apply(&img));
                prop_assert!(images.contains(&composed));
            }
        }
    }

    #[test]
    fn mrc_round_trip_is_bit_exact(
        data in prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 3 * 8 * 6),
    ) {
        let frames = data
            .chunks(48)
            .map(|c| Image2D::new(8, 6, 1.25, c.iter().map(|&v| v as f64).collect()).unwrap())
            .collect();
        let stack = MovieStack::new(frames).unwrap();
        let back = decode_mrc(&encode_mrc(&stack)).unwrap();
        for (a, b) in back.frames().iter().zip(stack.frames()) {
            prop_assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn ctf_is_linear(
        x in image(32, 32, 1.5),
        y in image(32, 32, 1.5),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        defocus in 5000.0f64..30000.0,
    ) {
        let p = CtfParams { defocus, ..CtfParams::default() };
        let mix = x.zip_map(&y, |a, b| alpha * a + beta * b).unwrap();
        let lhs = apply_ctf(&mix, &p).unwrap();
        let (cx, cy) = (apply_ctf(&x, &p).unwrap(), apply_ctf(&y, &p).unwrap());
        let rhs = cx.zip_map(&cy, |a, b| alpha * a + beta * b).unwrap();
        let worst = lhs.data().iter().zip(rhs.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-6);
    }

    #[test]
    fn frc_is_symmetric_and_self_consistent(a in image(32, 32, 1.0), b in image(32, 32, 1.0)) {
        prop_assert_eq!(frc(&a, &b, 0.5).unwrap(), frc(&b, &a, 0.5).unwrap());
        let own = frc(&a, &a, 0.5).unwrap();
        prop_assert!(own.correlation.iter().all(|&c| (c - 1.0).abs() < 1e-12));
    }

    #[test]
    fn registered_loss_is_nonnegative(
        sr in image(12, 12, 1.0),
        hr in image(12, 12, 1.0),
        dx in -2.0f64..2.0,
        dy in -2.0f64..2.0,
        tv in 0.0f64..1.0,
    ) {
        let out = registered_loss(&sr, &hr, (dx, dy), tv).unwrap();
        prop_assert!(out.loss >= 0.0 && out.mse >= 0.0 && out.tv >= 0.0);
        let shifted = lanczos_shift(&sr, dx, dy, 3).unwrap();
        let exact = registered_loss(&sr, &shifted, (dx, dy), 0.0).unwrap();
        prop_assert_eq!(exact.loss, 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulation_is_reproducible(seed in any::<u64>()) {
        let truth = band_limited_phantom(32, 1.0, 0.3, seed).unwrap();
        let cfg = SimConfig::with_random_walk(4, 0.5, 2, seed);
        let a = simulate_movie(&truth, &CtfParams::default(), &cfg).unwrap();
        let b = simulate_movie(&truth, &CtfParams::default(), &cfg).unwrap();
        prop_assert_eq!(encode_mrc(&a.stack), encode_mrc(&b.stack));
    }

    #[test]
    fn lr_set_members_share_geometry(seed in any::<u64>(), k in 2usize..6) {
        let truth = band_limited_phantom(64, 1.0, 0.3, seed).unwrap();
        let stack = simulate_movie(&truth, &CtfParams::default(), &SimConfig::with_random_walk(6, 0.3, 2, seed))
            .unwrap()
            .stack;
        let set = make_lr_set(&stack, k, seed).unwrap();
        prop_assert_eq!(set.len(), k);
        for m in set.members() {
            prop_assert_eq!(m.dims(), (32, 32));
            prop_assert_eq!(m.pixel_size(), 2.0);
        }
    }

    #[test]
    fn sr_output_geometry_and_identity_baseline(
        seed in any::<u64>(),
        w in prop::sample::select(&[8usize, 12, 16][..]),
        h in prop::sample::select(&[8usize, 10, 16][..]),
        k in 2usize..5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let members = (0..k)
            .map(|_| Image2D::from_fn(w, h, 3.0, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0)))
            .collect();
        let set = LrSet::from_members(members).unwrap();
        let cfg = SrConfig { channels: 4, res_blocks: 1, decoder_blocks: 1, scale: 2 };
        let out = sr_forward(&SrModel::new(cfg, seed), &set).unwrap();
        prop_assert_eq!(out.dims(), (2 * w, 2 * h));
        prop_assert_eq!(out.pixel_size(), 1.5);
        let base = bilinear_upsample(set.reference_image(), 2).unwrap();
        prop_assert!(rel_err(&out, &base) < 1e-6);
    }

    #[test]
    fn training_pairs_are_consistent(seed in any::<u64>()) {
        let set = tiny_set(seed % 1000, 32, 3);
        let cfg = TrainConfig { crop_size: 16, k: 3, ..TrainConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = sample_training_pair(&set, &cfg, &mut rng).unwrap();
        let down = block_downsample(&pair.hr, 2).unwrap();
        prop_assert_eq!(&down, &pair.lr.members()[pair.member]);
    }

    #[test]
    fn lr_trace_is_non_increasing_on_three_levels(seed in any::<u64>(), slope in -1e-3f64..1e-3) {
        struct Noisy(ChaCha8Rng, f64);
        impl Objective for Noisy {
            fn step(&mut self, step: usize, _lr: f64) -> Result<f64> {
                Ok(1.0 + self.1 * step as f64 + 0.01 * rand::Rng::random::<f64>(&mut self.0))
            }
        }
        let cfg = TrainConfig { max_epochs: 40, steps_per_epoch: 16, window: 20, ..TrainConfig::default() };
        let report = run_schedule(&cfg, &mut Noisy(ChaCha8Rng::seed_from_u64(seed), slope)).unwrap();
        prop_assert!(report.lr_trace.windows(2).all(|p| p[1] <= p[0]));
        for lr in &report.lr_trace {
            prop_assert!([1e-3, 1e-4, 1e-5].iter().any(|v| (lr - v).abs() < 1e-12));
        }
    }

    #[test]
    fn back_projection_residual_is_monotone(seed in any::<u64>()) {
        let truth = band_limited_phantom(32, 1.0, 0.4, seed).unwrap();
        let lr = block_downsample(&truth, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut start = bilinear_upsample(&lr, 2).unwrap();
        start.data_mut().iter_mut().for_each(|v| *v += rand::Rng::random_range(&mut rng, -0.5..0.5));
        let (_, residuals) = back_project_trace(&start, &lr, 2, 10).unwrap();
        prop_assert!(residuals.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn ctf_fit_ignores_profile_scale(seed in 0u64..1000, factor in 0.01f64..100.0) {
        let truth = band_limited_phantom(128, 1.5, 0.33, seed).unwrap();
        let mic = apply_ctf(&truth, &CtfParams::default()).unwrap();
        let profile = radial_average(&power_spectrum(&mic, 64).unwrap());
        let search = CtfSearch { step: 250.0, ..CtfSearch::default() };
        let a = fit_ctf(&profile, &CtfParams::default(), &search).unwrap();
        let b = fit_ctf(&profile.scaled(factor), &CtfParams::default(), &search).unwrap();
        prop_assert_eq!(a.defocus, b.defocus);
        prop_assert!((a.cc_score - b.cc_score).abs() < 1e-9);
    }
}
