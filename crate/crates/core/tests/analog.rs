use hybrid_mimo::analog::{
    alternating_fit, design_analog_precoder, design_analog_processor_qcqp,
    design_analog_processor_relaxed, design_random, optimal_scale, optimal_unitary,
    quantize_phases, subspace_alignment, CandidateDist, PhaseProjConfig, QcqpConfig,
    RandomAlgConfig,
};
use hybrid_mimo::channel::{noise_covariance, NoiseModel};
use hybrid_mimo::linalg::{
    complex_gaussian, frobenius_sq, ln_det_hpd, modulus_residual, random_orthonormal,
    random_unitary,
};
use hybrid_mimo::matdecomp::phase_projection;
use hybrid_mimo::{CMat, Complex64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scaled(t: &CMat, s: &[f64]) -> CMat {
    let mut out = t.clone();
    for (j, x) in s.iter().enumerate() {
        out.column_mut(j).scale_mut(*x);
    }
    out
}

fn fit_objective(t: &CMat, s: &[f64], q: &CMat, f: &CMat) -> f64 {
    frobenius_sq(&(scaled(t, s) * q - f))
}

fn dims() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 2usize..13).prop_flat_map(|(seed, n)| (Just(seed), Just(n), 1..=n.min(4)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn alternating_fit_is_feasible_and_monotone((seed, n, l) in dims()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_orthonormal(&mut rng, n, l);
        let fit = alternating_fit(&t, &PhaseProjConfig::default()).unwrap();
        prop_assert!(modulus_residual(&fit.matrix) < 1e-9);
        let steps = fit.trace.step_objectives();
        for w in steps.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0), "step increased: {} -> {}", w[0], w[1]);
        }
        prop_assert!(fit.trace.sweeps.len() <= PhaseProjConfig::default().max_iters);
    }

    #[test]
    fn scale_update_is_a_local_minimum((seed, n, l) in dims()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_orthonormal(&mut rng, n, l);
        let fit = alternating_fit(&t, &PhaseProjConfig::default()).unwrap();
        let s = optimal_scale(&t, &fit.rotation, &fit.matrix);
        let base = fit_objective(&t, &s, &fit.rotation, &fit.matrix);
        for i in 0..l {
            for step in [1e-4, -1e-4] {
                let mut s2 = s.clone();
                s2[i] += step;
                prop_assert!(fit_objective(&t, &s2, &fit.rotation, &fit.matrix) > base);
            }
        }
    }

    #[test]
    fn rotation_update_beats_random_unitaries((seed, n, l) in dims()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_orthonormal(&mut rng, n, l);
        let f = phase_projection(&complex_gaussian(&mut rng, n, l));
        let s: Vec<f64> = (0..l).map(|i| 0.5 + i as f64).collect();
        let ts = scaled(&t, &s);
        let q = optimal_unitary(&t, &s, &f).unwrap();
        let corr = |q: &CMat| (f.adjoint() * &ts * q).trace().re;
        let best = corr(&q);
        for _ in 0..100 {
            prop_assert!(corr(&random_unitary(&mut rng, l)) <= best + 1e-12 * best.abs().max(1.0));
        }
    }

    #[test]
    fn random_design_picks_the_best_candidate(seed in any::<u64>(), k in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = complex_gaussian(&mut rng, 6, 8);
        let rn = CMat::identity(6, 6);
        let cfg = RandomAlgConfig { k, dist: CandidateDist::StdGaussian, seed };
        let d = design_random(&h, &rn, 3, &cfg).unwrap();
        prop_assert!(modulus_residual(&d.f_a) < 1e-9 && modulus_residual(&d.g_a) < 1e-9);
        prop_assert!(d.f_scores.iter().all(|s| *s <= d.f_scores[d.f_index]));
        prop_assert!(d.g_scores.iter().all(|s| *s <= d.g_scores[d.g_index]));
        let tx = ln_det_hpd(&(d.f_a.adjoint() * h.adjoint() * &h * &d.f_a)).unwrap();
        prop_assert!((tx - d.f_scores[d.f_index]).abs() < 1e-8 * tx.abs().max(1.0));
    }
}

#[test]
fn qcqp_reaches_unit_modulus_on_small_correlated_instances() {
    let rn = noise_covariance(
        4,
        &NoiseModel::ExpCorrelated {
            sigma2: 1.0,
            rho: 0.5,
        },
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..20 {
        let u = random_orthonormal(&mut rng, 4, 2);
        let relaxed =
            design_analog_processor_relaxed(&u, &rn, &PhaseProjConfig::default()).unwrap();
        let d = design_analog_processor_qcqp(
            &u,
            &relaxed.fit.scale,
            &relaxed.fit.rotation,
            &rn,
            &QcqpConfig::default(),
        )
        .unwrap();
        assert!(d.iterations <= 500);
        assert!(d.final_residual() < 1e-3, "residual {}", d.final_residual());
        assert!(modulus_residual(&d.g_a) < 1e-12);
        for w in d.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-10 * w[0].abs().max(1.0));
        }
    }
}

/// Best alignment over unit-modulus matrices with phases on a 16-point grid;
/// the first entry of each column is fixed since alignment ignores column phases.
fn grid_alignment(v: &CMat) -> f64 {
    let (n, l) = v.shape();
    let free = (n - 1) * l;
    let phase = |k: usize| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 16.0);
    let mut best = 0.0f64;
    let mut f = CMat::from_element(n, l, Complex64::new(1.0, 0.0));
    for code in 0..16usize.pow(free as u32) {
        let mut c = code;
        for j in 0..l {
            for i in 1..n {
                f[(i, j)] = phase(c % 16);
                c /= 16;
            }
        }
        if let Ok(a) = subspace_alignment(v, &f) {
            best = best.max(a);
        }
    }
    best
}

#[test]
fn precoder_alignment_is_close_to_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (n, l) in [(2, 1), (3, 1), (4, 1), (5, 1), (6, 1), (2, 2), (3, 2)] {
        for _ in 0..3 {
            let v = random_orthonormal(&mut rng, n, l);
            let design = design_analog_precoder(&v, &PhaseProjConfig::default()).unwrap();
            let ours = subspace_alignment(&v, &design.matrix).unwrap();
            let grid = grid_alignment(&v);
            assert!(
                ours >= 0.95 * grid,
                "{n}x{l}: alignment {ours} vs grid {grid}"
            );
        }
    }
}

#[test]
fn quantized_design_stays_on_the_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = random_orthonormal(&mut rng, 16, 4);
    let f = design_analog_precoder(&t, &PhaseProjConfig::default())
        .unwrap()
        .matrix;
    for bits in 1..=4u32 {
        let q = quantize_phases(&f, bits).unwrap();
        let step = std::f64::consts::TAU / f64::from(1u32 << bits);
        for z in q.iter() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
            let k = z.arg().rem_euclid(std::f64::consts::TAU) / step;
            assert!((k - k.round()).abs() < 1e-9);
        }
        assert_eq!(quantize_phases(&q, bits).unwrap(), q);
    }
}
