use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Scalar problem solved by [`waterfill`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WaterfillMode {
    /// Maximize `Σ ln(1 + g_i p_i)`: `p_i = (μ − 1/g_i)⁺`.
    Capacity,
    /// Minimize `Σ w_i / (1 + g_i p_i)`: `p_i = (ν √(w_i/g_i) − 1/g_i)⁺`.
    WeightedMse(Vec<f64>),
}

/// Power allocation over parallel channels with total power `budget`.
///
/// The water level is found exactly by scanning active-set sizes in order of
/// channel strength, so the allocation sums to `budget` up to rounding.
pub fn waterfill(gains: &[f64], budget: f64, mode: &WaterfillMode) -> Result<Vec<f64>> {
    if gains.is_empty() {
        return Err(Error::invalid("waterfill: empty gain vector"));
    }
    if gains.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(Error::invalid(
            "waterfill: gains must be finite and positive",
        ));
    }
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::invalid(
            "waterfill: budget must be finite and positive",
        ));
    }
    let weights: Vec<f64> = match mode {
        WaterfillMode::Capacity => vec![1.0; gains.len()],
        WaterfillMode::WeightedMse(w) => {
            if w.len() != gains.len() {
                return Err(Error::invalid(format!(
                    "waterfill: {} weights for {} gains",
                    w.len(),
                    gains.len()
                )));
            }
            if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::invalid(
                    "waterfill: weights must be finite and positive",
                ));
            }
            w.clone()
        }
    };

    // p_i = level * slope_i − 1/g_i, active while level > threshold_i
    let slope: Vec<f64> = match mode {
        WaterfillMode::Capacity => vec![1.0; gains.len()],
        WaterfillMode::WeightedMse(_) => gains
            .iter()
            .zip(&weights)
            .map(|(g, w)| (w / g).sqrt())
            .collect(),
    };
    let threshold: Vec<f64> = gains
        .iter()
        .zip(&slope)
        .map(|(g, s)| 1.0 / (g * s))
        .collect();

    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| threshold[a].total_cmp(&threshold[b]).then(a.cmp(&b)));

    let mut level = 0.0;
    let mut active = 0;
    let (mut inv_sum, mut slope_sum) = (0.0, 0.0);
    for (k, &idx) in order.iter().enumerate() {
        inv_sum += 1.0 / gains[idx];
        slope_sum += slope[idx];
        let candidate = (budget + inv_sum) / slope_sum;
        if k > 0 && candidate <= threshold[idx] {
            break;
        }
        level = candidate;
        active = k + 1;
    }

    let mut power = vec![0.0; gains.len()];
    for &idx in &order[..active] {
        power[idx] = (level * slope[idx] - 1.0 / gains[idx]).max(0.0);
    }
    Ok(power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_channel_capacity_by_hand() {
        let p = waterfill(&[4.0, 1.0], 1.0, &WaterfillMode::Capacity).unwrap();
        assert!((p[0] - 0.875).abs() < 1e-12);
        assert!((p[1] - 0.125).abs() < 1e-12);
    }

    #[test]
    fn weak_channel_switched_off() {
        let p = waterfill(&[10.0, 0.1], 0.5, &WaterfillMode::Capacity).unwrap();
        assert_eq!(p[1], 0.0);
        assert!((p[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_channel_gets_everything() {
        for mode in [
            WaterfillMode::Capacity,
            WaterfillMode::WeightedMse(vec![3.0]),
        ] {
            let p = waterfill(&[0.3], 2.5, &mode).unwrap();
            assert!((p[0] - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_weighted_mse_splits_evenly() {
        let p = waterfill(&[2.0; 4], 3.0, &WaterfillMode::WeightedMse(vec![1.5; 4])).unwrap();
        assert!(p.iter().all(|x| (x - 0.75).abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_input() {
        let cap = WaterfillMode::Capacity;
        assert!(waterfill(&[], 1.0, &cap).is_err());
        assert!(waterfill(&[1.0, -1.0], 1.0, &cap).is_err());
        assert!(waterfill(&[1.0], 0.0, &cap).is_err());
        assert!(waterfill(&[1.0, 2.0], 1.0, &WaterfillMode::WeightedMse(vec![1.0])).is_err());
        assert!(waterfill(&[1.0], 1.0, &WaterfillMode::WeightedMse(vec![0.0])).is_err());
    }

    fn kkt_holds(gains: &[f64], weights: &[f64], p: &[f64], budget: f64) -> bool {
        let total: f64 = p.iter().sum();
        if (total - budget).abs() > 1e-10 * budget.max(1.0) {
            return false;
        }
        // marginal utility w g / (1 + g p)^2 equal on active channels,
        // no larger on inactive ones
        let marg: Vec<f64> = gains
            .iter()
            .zip(weights)
            .zip(p)
            .map(|((g, w), x)| w * g / (1.0 + g * x).powi(2))
            .collect();
        let level = marg
            .iter()
            .zip(p)
            .filter(|(_, x)| **x > 0.0)
            .map(|(m, _)| *m)
            .fold(f64::NAN, f64::max);
        marg.iter().zip(p).all(|(m, x)| {
            if *x > 0.0 {
                (m - level).abs() <= 1e-8 * level
            } else {
                *m <= level * (1.0 + 1e-8)
            }
        })
    }

    fn capacity_kkt(gains: &[f64], p: &[f64]) -> bool {
        let total: f64 = p.iter().sum();
        let levels: Vec<f64> = gains
            .iter()
            .zip(p)
            .filter(|(_, x)| **x > 0.0)
            .map(|(g, x)| x + 1.0 / g)
            .collect();
        let mu = levels[0];
        levels.iter().all(|l| (l - mu).abs() < 1e-9 * mu)
            && gains
                .iter()
                .zip(p)
                .all(|(g, x)| *x > 0.0 || 1.0 / g >= mu - 1e-9 * mu)
            && total.is_finite()
    }

    proptest! {
        #[test]
        fn capacity_allocation_is_kkt(
            gains in proptest::collection::vec(0.01f64..100.0, 1..8),
            budget in 0.01f64..50.0,
        ) {
            let p = waterfill(&gains, budget, &WaterfillMode::Capacity).unwrap();
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - budget).abs() < 1e-10 * budget.max(1.0));
            prop_assert!(capacity_kkt(&gains, &p));
        }

        #[test]
        fn weighted_mse_allocation_is_kkt(
            pairs in proptest::collection::vec((0.01f64..100.0, 0.1f64..10.0), 1..8),
            budget in 0.01f64..50.0,
        ) {
            let (gains, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let p = waterfill(&gains, budget, &WaterfillMode::WeightedMse(weights.clone())).unwrap();
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            prop_assert!(kkt_holds(&gains, &weights, &p, budget));
        }
    }
}
