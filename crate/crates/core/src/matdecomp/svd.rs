use nalgebra::SVD;

use crate::linalg::is_finite;
use crate::{CMat, Complex64, Error, Result};

/// Thin SVD `A = U diag(sigma) V^H` with `sigma` non-increasing.
///
/// The first entry of each column of `U` with modulus above `1e-10` is real
/// positive; `V` is rotated by the same phase so the product is unchanged.
#[derive(Debug, Clone)]
pub struct OrderedSvd {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub v: CMat,
}

impl OrderedSvd {
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.sigma.first().copied().unwrap_or(0.0);
        self.sigma
            .iter()
            .filter(|&&s| s > rel_tol * top && s > 0.0)
            .count()
    }

    /// `U diag(sigma) V^H`.
    pub fn reconstruct(&self) -> CMat {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.adjoint()
    }
}

pub fn svd_ordered(a: &CMat) -> Result<OrderedSvd> {
    if !is_finite(a) {
        return Err(Error::invalid("svd: non-finite entries"));
    }
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok(OrderedSvd {
            u: CMat::zeros(m, 0),
            sigma: Vec::new(),
            v: CMat::zeros(n, 0),
        });
    }
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::numeric("svd: did not converge"))?;
    let u_raw = svd.u.expect("requested U");
    let vt_raw = svd.v_t.expect("requested V^H");

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let mut u = CMat::zeros(m, k);
    let mut v = CMat::zeros(n, k);
    let mut sigma = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        sigma.push(svd.singular_values[src].max(0.0));
        let mut ucol = u_raw.column(src).into_owned();
        let mut vcol = vt_raw.row(src).adjoint();
        if let Some(z) = ucol.iter().find(|z| z.norm() > 1e-10) {
            let fix: Complex64 = z.conj() / z.norm();
            ucol *= fix;
            vcol *= fix;
        }
        u.set_column(dst, &ucol);
        v.set_column(dst, &vcol);
    }
    Ok(OrderedSvd { u, sigma, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, frobenius, orthonormality_error};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn real_diag(d: &[f64]) -> CMat {
        crate::linalg::diag_matrix(d)
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let s = svd_ordered(&CMat::identity(2, 2)).unwrap();
        assert_eq!(s.sigma, vec![1.0, 1.0]);
        assert!(frobenius(&(s.reconstruct() - CMat::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn diagonal_is_reordered() {
        let a = real_diag(&[1.0, 3.0]);
        let s = svd_ordered(&a).unwrap();
        assert!((s.sigma[0] - 3.0).abs() < 1e-14 && (s.sigma[1] - 1.0).abs() < 1e-14);
        assert!((s.u[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((s.v[(1, 0)].norm() - 1.0).abs() < 1e-14);
        // sign convention: leading nonzero entry real positive
        assert!((s.u[(1, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = CMat::identity(2, 2);
        a[(0, 1)] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(svd_ordered(&a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn wide_and_tall_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (m, n) in [(4, 3), (3, 4), (1, 5), (6, 1)] {
            let a = complex_gaussian(&mut rng, m, n);
            let s = svd_ordered(&a).unwrap();
            assert_eq!(s.u.shape(), (m, m.min(n)));
            assert_eq!(s.v.shape(), (n, m.min(n)));
            assert!(frobenius(&(s.reconstruct() - &a)) / frobenius(&a) < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn svd_invariants(seed in any::<u64>(), m in 1usize..7, n in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = complex_gaussian(&mut rng, m, n);
            let s = svd_ordered(&a).unwrap();
            prop_assert!(orthonormality_error(&s.u) < 1e-10);
            prop_assert!(orthonormality_error(&s.v) < 1e-10);
            prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(frobenius(&(s.reconstruct() - &a)) / frobenius(&a) < 1e-10);
            for j in 0..s.u.ncols() {
                let lead = s.u.column(j).iter().find(|z| z.norm() > 1e-10).copied().unwrap();
                prop_assert!(lead.im.abs() < 1e-12 && lead.re > 0.0);
            }
        }
    }
}
