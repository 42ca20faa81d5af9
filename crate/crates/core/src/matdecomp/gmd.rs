use super::svd::svd_ordered;
use crate::{CMat, Complex64, Error, RMat, Result};

/// Geometric mean decomposition `A_K = Q R P^H` of the rank-`K` part of `A`.
///
/// `R` is `K × K` lower triangular with every diagonal entry equal to the
/// geometric mean of the top `K` singular values; `Q` and `P` have orthonormal
/// columns.
#[derive(Debug, Clone)]
pub struct GmdFactors {
    pub q: CMat,
    pub r: CMat,
    pub p: CMat,
    pub rank: usize,
}

/// Relative threshold below which a singular value counts as zero.
const RANK_TOL: f64 = 1e-12;

pub fn gmd(a: &CMat, rank: usize) -> Result<GmdFactors> {
    if rank == 0 {
        return Err(Error::invalid("gmd: rank must be at least 1"));
    }
    let svd = svd_ordered(a)?;
    if rank > svd.sigma.len() || svd.sigma[rank - 1] <= RANK_TOL * svd.sigma[0] {
        return Err(Error::RankDeficient(format!(
            "gmd: requested rank {rank} exceeds numerical rank {}",
            svd.rank(RANK_TOL)
        )));
    }
    let (rs, qs, ps) = equalize_diagonal(&svd.sigma[..rank]);

    // flip the upper-triangular factor into lower-triangular form
    let rev = |m: &RMat| -> CMat {
        let k = m.ncols();
        CMat::from_fn(m.nrows(), k, |i, j| Complex64::new(m[(i, k - 1 - j)], 0.0))
    };
    let k = rank;
    let r = CMat::from_fn(k, k, |i, j| Complex64::new(rs[(k - 1 - i, k - 1 - j)], 0.0));
    let q = svd.u.columns(0, k) * rev(&qs);
    let p = svd.v.columns(0, k) * rev(&ps);
    Ok(GmdFactors { q, r, p, rank })
}

/// Givens-based equalization: `diag(sigma) = Q R P^T` with `R` upper
/// triangular and constant diagonal.
fn equalize_diagonal(sigma: &[f64]) -> (RMat, RMat, RMat) {
    let k = sigma.len();
    let mean = (sigma.iter().map(|s| s.ln()).sum::<f64>() / k as f64).exp();
    let mut r = RMat::from_diagonal(&nalgebra::DVector::from_column_slice(sigma));
    let mut q = RMat::identity(k, k);
    let mut p = RMat::identity(k, k);

    for i in 0..k.saturating_sub(1) {
        let d1 = r[(i, i)];
        let above = d1 >= mean;
        let pick = (i + 1..k)
            .find(|&j| {
                if above {
                    r[(j, j)] <= mean
                } else {
                    r[(j, j)] >= mean
                }
            })
            .unwrap_or_else(|| {
                // rounding can leave no strict candidate; take the extreme one
                let cmp = |a: &usize, b: &usize| r[(*a, *a)].total_cmp(&r[(*b, *b)]);
                if above {
                    (i + 1..k).min_by(cmp).unwrap()
                } else {
                    (i + 1..k).max_by(cmp).unwrap()
                }
            });
        if pick != i + 1 {
            r.swap_columns(i + 1, pick);
            r.swap_rows(i + 1, pick);
            q.swap_columns(i + 1, pick);
            p.swap_columns(i + 1, pick);
        }
        let d2 = r[(i + 1, i + 1)];
        let denom = d1 * d1 - d2 * d2;
        let c = if denom.abs() <= f64::EPSILON * d1 * d1 {
            1.0
        } else {
            ((mean * mean - d2 * d2) / denom).clamp(0.0, 1.0).sqrt()
        };
        let s = (1.0 - c * c).max(0.0).sqrt();
        let g1 = nalgebra::Matrix2::new(c, -s, s, c);
        let g2 = nalgebra::Matrix2::new(c * d1, -s * d2, s * d2, c * d1) / mean;

        // R <- G2^T R G1 restricted to rows/cols i, i+1
        for col in 0..k {
            let (a, b) = (r[(i, col)], r[(i + 1, col)]);
            r[(i, col)] = g2[(0, 0)] * a + g2[(1, 0)] * b;
            r[(i + 1, col)] = g2[(0, 1)] * a + g2[(1, 1)] * b;
        }
        rotate_columns(&mut r, i, &g1);
        rotate_columns(&mut q, i, &g2);
        rotate_columns(&mut p, i, &g1);
        r[(i, i)] = mean;
        r[(i + 1, i)] = 0.0;
    }
    r[(k - 1, k - 1)] = mean;
    (r, q, p)
}

fn rotate_columns(m: &mut RMat, i: usize, g: &nalgebra::Matrix2<f64>) {
    for row in 0..m.nrows() {
        let (a, b) = (m[(row, i)], m[(row, i + 1)]);
        m[(row, i)] = a * g[(0, 0)] + b * g[(1, 0)];
        m[(row, i + 1)] = a * g[(0, 1)] + b * g[(1, 1)];
    }
}
