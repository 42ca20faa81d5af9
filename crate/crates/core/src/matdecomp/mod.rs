//! Matrix decompositions and vector predicates shared by every design stage.
//!
//! All routines are pure functions of their inputs.

mod gmd;
mod majorization;
mod svd;
mod waterfill;

pub use gmd::{gmd, GmdFactors};
pub use majorization::{majorizes_additively, majorizes_multiplicatively};
pub use svd::{svd_ordered, OrderedSvd};
pub use waterfill::{waterfill, WaterfillMode};

use std::f64::consts::PI;

use crate::linalg::{cholesky, hermitian_eig, ONE};
use crate::{CMat, Complex64, Error, Result};

/// Eigenvalues below this are treated as non-positive before a Cholesky factorisation.
pub const PD_TOLERANCE: f64 = 1e-12;

/// Entrywise projection onto the unit-modulus set; zero entries map to one.
pub fn phase_projection(a: &CMat) -> CMat {
    a.map(|z| {
        let m = z.norm();
        if m > 0.0 {
            z / m
        } else {
            ONE
        }
    })
}

/// Unitary DFT matrix with entries `exp(-2πi jk/n) / √n`.
pub fn dft_unitary(n: usize) -> Result<CMat> {
    if n == 0 {
        return Err(Error::invalid("DFT size must be at least 1"));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(CMat::from_fn(n, n, |j, k| {
        // reduce jk mod n first so large sizes keep full phase accuracy
        let idx = (j * k) % n;
        Complex64::from_polar(scale, -2.0 * PI * idx as f64 / n as f64)
    }))
}

/// Lower Cholesky factor `L` with `L L^H = A` and a real positive diagonal.
///
/// Eigenvalues of `A` below [`PD_TOLERANCE`] (relative to the largest) are an
/// error; use [`cholesky_lower_clamped`] when the input is known to be PD
/// analytically and only rounding can push it out of the cone.
pub fn cholesky_lower(a: &CMat) -> Result<CMat> {
    check_square(a, "cholesky")?;
    let (vals, _) = hermitian_eig(a);
    let max = vals.first().copied().unwrap_or(0.0).max(0.0);
    let min = vals.last().copied().unwrap_or(0.0);
    if !(min > PD_TOLERANCE * max.max(1.0)) {
        return Err(Error::numeric(format!(
            "cholesky: matrix is not positive definite (min eigenvalue {min:e})"
        )));
    }
    let chol = cholesky(a).ok_or_else(|| Error::numeric("cholesky: factorisation failed"))?;
    Ok(chol.l())
}

/// Cholesky factor after clamping eigenvalues to at least `PD_TOLERANCE · λ_max`.
pub fn cholesky_lower_clamped(a: &CMat) -> Result<CMat> {
    check_square(a, "cholesky")?;
    if let Some(chol) = cholesky(a) {
        let l = chol.l();
        if l.diagonal().iter().all(|d| d.re > 0.0 && d.re.is_finite()) {
            return Ok(l);
        }
    }
    let (vals, _) = hermitian_eig(a);
    let max = vals.first().copied().unwrap_or(0.0);
    if !(max > 0.0) {
        return Err(Error::numeric(
            "cholesky: matrix has no positive eigenvalue",
        ));
    }
    let floor = PD_TOLERANCE * max;
    log::warn!(
        "clamping eigenvalues below {floor:e} before Cholesky (min was {:e})",
        vals.last().copied().unwrap_or(0.0)
    );
    let clamped = crate::linalg::hermitian_pow(a, 1.0, floor);
    cholesky(&clamped)
        .map(|c| c.l())
        .ok_or_else(|| Error::numeric("cholesky: factorisation failed after clamping"))
}

fn check_square(a: &CMat, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::invalid(format!(
            "{what}: expected a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !crate::linalg::is_finite(a) {
        return Err(Error::invalid(format!("{what}: non-finite entries")));
    }
    Ok(())
}
