use crate::{Error, Result};

const SUM_TOL: f64 = 1e-9;
const PROD_TOL: f64 = 1e-9;

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn check_lengths(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "majorization: length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// True iff `y` majorizes `x` additively: descending partial sums of `x` are
/// bounded by those of `y` and the totals agree (absolute tolerance `1e-9`).
pub fn majorizes_additively(x: &[f64], y: &[f64]) -> Result<bool> {
    check_lengths(x, y)?;
    let (xs, ys) = (sorted_desc(x), sorted_desc(y));
    let (mut sx, mut sy) = (0.0, 0.0);
    for (p, (a, b)) in xs.iter().zip(&ys).enumerate() {
        sx += a;
        sy += b;
        let last = p + 1 == xs.len();
        if last {
            return Ok((sx - sy).abs() <= SUM_TOL);
        }
        if sx > sy + SUM_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True iff `y` majorizes `x` multiplicatively: descending partial products of
/// `x` are bounded by those of `y` and the full products agree (relative
/// tolerance `1e-9`).
pub fn majorizes_multiplicatively(x: &[f64], y: &[f64]) -> Result<bool> {
    check_lengths(x, y)?;
    if x.iter().chain(y).any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("majorization: entries must be nonnegative"));
    }
    let (xs, ys) = (sorted_desc(x), sorted_desc(y));
    let (mut px, mut py) = (1.0, 1.0);
    for (p, (a, b)) in xs.iter().zip(&ys).enumerate() {
        px *= a;
        py *= b;
        let tol = PROD_TOL * px.abs().max(py.abs());
        if p + 1 == xs.len() {
            return Ok((px - py).abs() <= tol);
        }
        if px > py + tol {
            return Ok(false);
        }
    }
    Ok(true)
}
