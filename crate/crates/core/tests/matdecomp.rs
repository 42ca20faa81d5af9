use hybrid_mimo::linalg::{complex_gaussian, frobenius, orthonormality_error};
use hybrid_mimo::matdecomp::{
    gmd, majorizes_additively, majorizes_multiplicatively, phase_projection, svd_ordered,
    waterfill, WaterfillMode,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gains() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3f64..10.0, 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn waterfill_spends_the_budget(g in gains(), budget in 1e-3f64..50.0) {
        let w: Vec<f64> = g.iter().map(|x| 0.5 + x.fract()).collect();
        for mode in [WaterfillMode::Capacity, WaterfillMode::WeightedMse(w)] {
            let p = waterfill(&g, budget, &mode).unwrap();
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - budget).abs() <= 1e-9 * budget.max(1.0));
        }
        // capacity: stronger channels reach a higher level 1/g + p
        let p = waterfill(&g, budget, &WaterfillMode::Capacity).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                if g[i] > g[j] && p[j] > 0.0 {
                    prop_assert!(p[i] > 0.0);
                }
            }
        }
    }

    #[test]
    fn gmd_factors_are_well_formed(seed in any::<u64>(), rows in 1usize..8, cols in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = complex_gaussian(&mut rng, rows, cols);
        let k = rows.min(cols);
        let f = gmd(&a, k).unwrap();
        prop_assert!(orthonormality_error(&f.q) < 1e-10 && orthonormality_error(&f.p) < 1e-10);
        for i in 0..k {
            for j in i + 1..k {
                prop_assert!(f.r[(i, j)].norm() < 1e-12);
            }
        }
        prop_assert!(frobenius(&(&f.q * &f.r * f.p.adjoint() - &a)) < 1e-9);
    }

    #[test]
    fn ordered_svd_reconstructs(seed in any::<u64>(), rows in 1usize..8, cols in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = complex_gaussian(&mut rng, rows, cols);
        let s = svd_ordered(&a).unwrap();
        prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        let mut us = s.u.clone();
        for (j, x) in s.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*x);
        }
        prop_assert!(frobenius(&(us * s.v.adjoint() - &a)) < 1e-10);
    }

    #[test]
    fn majorization_is_reflexive_and_respects_averages(x in prop::collection::vec(0.1f64..10.0, 1..7)) {
        prop_assert!(majorizes_additively(&x, &x).unwrap());
        prop_assert!(majorizes_multiplicatively(&x, &x).unwrap());
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        prop_assert!(majorizes_additively(&vec![mean; x.len()], &x).unwrap());
        let gm = (x.iter().map(|v| v.ln()).sum::<f64>() / x.len() as f64).exp();
        prop_assert!(majorizes_multiplicatively(&vec![gm; x.len()], &x).unwrap());
    }

    #[test]
    fn phase_projection_is_nearest_unit_modulus(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = complex_gaussian(&mut rng, 4, 3);
        let p = phase_projection(&a);
        let other = phase_projection(&complex_gaussian(&mut rng, 4, 3));
        prop_assert!(frobenius(&(&a - &p)) <= frobenius(&(&a - other)) + 1e-12);
    }
}
