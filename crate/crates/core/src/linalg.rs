//! Small dense helpers on top of nalgebra shared by the design modules.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMat, Complex64, Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// (A + A^H) / 2.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn real_diag(a: &CMat) -> Vec<f64> {
    a.diagonal().iter().map(|z| z.re).collect()
}

pub fn diag_matrix(d: &[f64]) -> CMat {
    let mut m = CMat::zeros(d.len(), d.len());
    for (i, &v) in d.iter().enumerate() {
        m[(i, i)] = Complex64::new(v, 0.0);
    }
    m
}

pub fn trace_re(a: &CMat) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// ‖A^H A − I‖_F for a matrix expected to have orthonormal columns.
pub fn orthonormality_error(a: &CMat) -> f64 {
    let g = a.adjoint() * a;
    frobenius(&(g - identity(a.ncols())))
}

/// Largest deviation of any entry modulus from one.
pub fn modulus_residual(a: &CMat) -> f64 {
    a.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in non-increasing order.
pub fn hermitian_eig(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Hermitian matrix power `A^p` with eigenvalues floored at `floor` first.
pub fn hermitian_pow(a: &CMat, p: f64, floor: f64) -> CMat {
    let (vals, vecs) = hermitian_eig(a);
    let scaled: Vec<f64> = vals.iter().map(|&v| v.max(floor).powf(p)).collect();
    let mut left = vecs.clone();
    for (j, s) in scaled.iter().enumerate() {
        left.column_mut(j).scale_mut(*s);
    }
    hermitian_part(&(left * vecs.adjoint()))
}

/// Hermitian square root of a PSD matrix.
pub fn sqrtm_psd(a: &CMat) -> CMat {
    hermitian_pow(a, 0.5, 0.0)
}

/// Inverse Hermitian square root of a PD matrix.
pub fn inv_sqrtm_pd(a: &CMat) -> Result<CMat> {
    let (vals, _) = hermitian_eig(a);
    let min = vals.last().copied().unwrap_or(0.0);
    let max = vals.first().copied().unwrap_or(0.0);
    if !(min > 0.0 && min > max * 1e-14) {
        return Err(Error::numeric(format!(
            "matrix is not positive definite (min eigenvalue {min:e})"
        )));
    }
    Ok(hermitian_pow(a, -0.5, 0.0))
}

/// Cholesky factorisation that also fails when a pivot is not real positive
/// (the complex square root in nalgebra never fails on its own).
pub fn cholesky(a: &CMat) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = Cholesky::new(hermitian_part(a))?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re
    });
    ok.then_some(chol)
}

/// Inverse of a Hermitian positive definite matrix.
pub fn inv_hpd(a: &CMat) -> Result<CMat> {
    let chol = cholesky(a).ok_or_else(|| Error::numeric("matrix is not positive definite"))?;
    Ok(hermitian_part(&chol.inverse()))
}

/// Solve `A X = B` for Hermitian positive definite `A`.
pub fn solve_hpd(a: &CMat, b: &CMat) -> Result<CMat> {
    let chol = cholesky(a).ok_or_else(|| Error::numeric("matrix is not positive definite"))?;
    Ok(chol.solve(b))
}

/// Natural log-determinant of a Hermitian PD matrix, `None` when not PD.
pub fn ln_det_hpd(a: &CMat) -> Option<f64> {
    let chol = cholesky(a)?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)].re;
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

/// Matrix of i.i.d. CN(0, 1) entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// Haar-distributed `n × k` matrix with orthonormal columns.
pub fn random_orthonormal<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> CMat {
    let g = complex_gaussian(rng, n, k);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            q.column_mut(j).iter_mut().for_each(|z| *z *= ph);
        }
    }
    q.columns(0, k).into_owned()
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    random_orthonormal(rng, n, n)
}

/// Random Hermitian positive definite matrix `B B^H + eps I`.
pub fn random_hpd<R: Rng + ?Sized>(rng: &mut R, n: usize, eps: f64) -> CMat {
    let b = complex_gaussian(rng, n, n);
    hermitian_part(&(&b * b.adjoint())) + identity(n).scale(eps)
}

/// Pairwise (cascade) summation in index order; deterministic for a fixed slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}
