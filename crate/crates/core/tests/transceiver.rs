use hybrid_mimo::linalg::{complex_gaussian, hermitian_eig, random_hpd, random_unitary, real_diag};
use hybrid_mimo::matdecomp::{cholesky_lower, phase_projection};
use hybrid_mimo::transceiver::{
    design_digital, evaluate_objective, lmmse_digital_processor, mse_matrix_for_processor,
    mse_matrix_general, mse_matrix_linear, optimal_feedback, snr_matrix, HybridTransceiver,
    Objective, TransceiverKind,
};
use hybrid_mimo::{CMat, Complex64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Instance {
    h: CMat,
    rn: CMat,
    f_a: CMat,
    g_a: CMat,
}

fn instance(seed: u64, n: usize, m: usize, l: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Instance {
        h: complex_gaussian(&mut rng, m, n),
        rn: random_hpd(&mut rng, m, 0.5),
        f_a: phase_projection(&complex_gaussian(&mut rng, n, l)),
        g_a: phase_projection(&complex_gaussian(&mut rng, l, m)),
    }
}

fn design(
    x: &Instance,
    objective: &Objective,
    kind: TransceiverKind,
    power: f64,
    d: usize,
) -> HybridTransceiver {
    design_digital(&x.h, &x.rn, &x.f_a, &x.g_a, objective, kind, power, d).unwrap()
}

fn linear_mse(x: &Instance, t: &HybridTransceiver) -> CMat {
    mse_matrix_linear(&x.h, &x.rn, &x.f_a, &t.f_d, &x.g_a).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn lmmse_is_minimal_in_psd_order(seed in any::<u64>(), n in 1usize..5, m in 1usize..5) {
        let l = n.min(m);
        let x = instance(seed, n, m, l);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let f_d = complex_gaussian(&mut rng, l, l);
        let b = CMat::zeros(l, l);
        let g = lmmse_digital_processor(&x.h, &x.rn, &x.f_a, &f_d, &x.g_a, None).unwrap();
        let phi = mse_matrix_for_processor(&x.h, &x.rn, &x.f_a, &f_d, &x.g_a, &g, &b).unwrap();
        for _ in 0..100 {
            let delta = complex_gaussian(&mut rng, l, l) * Complex64::new(1e-3, 0.0);
            let other = mse_matrix_for_processor(&x.h, &x.rn, &x.f_a, &f_d, &x.g_a, &(&g + delta), &b).unwrap();
            let (eigs, _) = hermitian_eig(&(other - &phi));
            prop_assert!(*eigs.last().unwrap() >= -1e-12);
        }
    }

    #[test]
    fn feedback_leaves_cholesky_diagonal(seed in any::<u64>(), d in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_hpd(&mut rng, d, 0.05);
        let b = optimal_feedback(&phi).unwrap();
        let e = mse_matrix_general(&phi, &b).unwrap();
        let l = cholesky_lower(&phi).unwrap();
        for k in 0..d {
            prop_assert!((e[(k, k)].re - l[(k, k)].norm_sqr()).abs() <= 1e-10);
            // nonlinear stream MSE never exceeds the linear one
            prop_assert!(e[(k, k)].re <= phi[(k, k)].re + 1e-12);
        }
    }

    #[test]
    fn equal_streams_design_equalizes_mse(seed in any::<u64>(), d in 1usize..4) {
        let x = instance(seed, 6, 5, 4);
        for kind in [TransceiverKind::Thp, TransceiverKind::Dfd] {
            let t = design(&x, &Objective::NonlinearEqualStreams, kind, 100.0, d);
            let e = mse_matrix_general(&linear_mse(&x, &t), &t.b).unwrap();
            let diag = real_diag(&e);
            let top = diag.iter().copied().fold(f64::MIN, f64::max);
            for v in &diag {
                prop_assert!((top - v) <= 1e-6 * top, "{:?}", diag);
            }
        }
    }

    #[test]
    fn capacity_ignores_rotations(seed in any::<u64>(), d in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_hpd(&mut rng, d, 0.1);
        let u = random_unitary(&mut rng, d);
        let a = evaluate_objective(&Objective::Capacity, &phi).unwrap();
        let b = evaluate_objective(&Objective::Capacity, &(u.adjoint() * &phi * &u)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn objectives_reduce_to_eigenvalue_forms(seed in any::<u64>(), d in 1usize..4) {
        let x = instance(seed, 6, 5, 4);
        let gamma_eigs = |t: &HybridTransceiver| {
            hermitian_eig(&snr_matrix(&x.h, &x.rn, &x.f_a, &t.f_d, &x.g_a).unwrap()).0
        };

        let t = design(&x, &Objective::Capacity, TransceiverKind::Linear, 3.0, d);
        let cap = evaluate_objective(&Objective::Capacity, &linear_mse(&x, &t)).unwrap();
        let from_eigs: f64 = gamma_eigs(&t).iter().map(|g| (1.0 + g.max(0.0)).log2()).sum();
        prop_assert!((cap - from_eigs).abs() <= 1e-9 * from_eigs.max(1.0));

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let a = complex_gaussian(&mut rng, d, d);
        let objective = Objective::WeightedMse(a.clone());
        let t = design(&x, &objective, TransceiverKind::Linear, 3.0, d);
        let value = evaluate_objective(&objective, &linear_mse(&x, &t)).unwrap();
        let weights = a.svd(false, false).singular_values;
        let mut w: Vec<f64> = weights.iter().map(|s| s * s).collect();
        w.sort_by(|p, q| q.total_cmp(p));
        let lam = gamma_eigs(&t);
        let from_eigs: f64 = w.iter().zip(&lam).map(|(w, g)| w / (1.0 + g.max(0.0))).sum();
        prop_assert!((value - from_eigs).abs() <= 1e-9 * from_eigs.max(1.0), "{value} vs {from_eigs}");
    }

    #[test]
    fn designs_are_valid_transceivers(seed in any::<u64>(), d in 1usize..5, power_db in -10.0f64..20.0) {
        let x = instance(seed, 6, 5, 4);
        let power = 10f64.powf(power_db / 10.0);
        let cases = [
            (Objective::Capacity, TransceiverKind::Linear),
            (Objective::SumMse, TransceiverKind::Linear),
            (Objective::MaxMse, TransceiverKind::Linear),
            (Objective::NonlinearEqualStreams, TransceiverKind::Thp),
        ];
        for (objective, kind) in cases {
            let t = design(&x, &objective, kind, power, d);
            prop_assert!(t.validate(power).is_ok());
            prop_assert!((t.transmit_power() - power).abs() <= 1e-9 * power.max(1.0));
        }
    }
}

#[test]
fn equal_streams_objective_needs_feedback() {
    let x = instance(1, 4, 4, 2);
    let err = design_digital(
        &x.h,
        &x.rn,
        &x.f_a,
        &x.g_a,
        &Objective::NonlinearEqualStreams,
        TransceiverKind::Linear,
        1.0,
        2,
    );
    assert!(err.is_err());
}
