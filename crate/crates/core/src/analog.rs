//! Constant-modulus analog stages.
//!
//! - [`design_analog_precoder`]: alternating minimization of
//!   `‖V Λ Q − F‖_F²` over a diagonal `Λ`, a unitary `Q` and a unit-modulus `F`.
//! - [`design_analog_processor_relaxed`]: the same iteration on the
//!   noise-whitened receive target.
//! - [`design_analog_processor_qcqp`]: tangent-constraint QCQP iteration for
//!   `‖T − R_n^{1/2} G_A^H‖_F²` under unit-modulus constraints.
//! - [`design_random`]: best of `K` random candidates by log-determinant.
//! - [`quantize_phases`]: snapping to a `2^b`-point phase grid.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    frobenius_sq, hermitian_eig, hermitian_part, inv_hpd, inv_sqrtm_pd, ln_det_hpd,
    modulus_residual, orthonormality_error, sqrtm_psd,
};
use crate::matdecomp::{phase_projection, svd_ordered};
use crate::{CMat, Complex64, Error, RMat, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseProjConfig {
    /// Relative objective decrement per sweep below which iteration stops.
    pub zeta: f64,
    pub max_iters: usize,
}

impl Default for PhaseProjConfig {
    fn default() -> Self {
        PhaseProjConfig {
            zeta: 1e-6,
            max_iters: 200,
        }
    }
}

impl PhaseProjConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0) || self.max_iters == 0 {
            return Err(Error::invalid(
                "phase projection: zeta must be > 0 and max_iters >= 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QcqpConfig {
    /// Regularization weight; `None` selects the smallest admissible value.
    pub eta: Option<f64>,
    /// Relative objective decrement below which iteration stops.
    pub upsilon: f64,
    pub max_iters: usize,
}

impl Default for QcqpConfig {
    fn default() -> Self {
        QcqpConfig {
            eta: None,
            upsilon: 1e-6,
            max_iters: 500,
        }
    }
}

impl QcqpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.upsilon > 0.0) || self.max_iters == 0 {
            return Err(Error::invalid(
                "qcqp: upsilon must be > 0 and max_iters >= 1",
            ));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::invalid("qcqp: eta must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateDist {
    Uniform01,
    StdGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomAlgConfig {
    pub k: usize,
    pub dist: CandidateDist,
    pub seed: u64,
}

impl RandomAlgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("random design: K must be at least 1"));
        }
        Ok(())
    }
}

/// Objective values recorded inside one alternating sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub after_scale: f64,
    pub after_rotation: f64,
    pub after_projection: f64,
}

#[derive(Debug, Clone, Default)]
pub struct AlternatingTrace {
    /// Objective with `Λ = I`, `Q = I` and the projected target.
    pub initial: f64,
    pub sweeps: Vec<SweepRecord>,
    pub converged: bool,
}

impl AlternatingTrace {
    /// Objective after each step in order, starting with the initial value.
    pub fn step_objectives(&self) -> Vec<f64> {
        let mut out = vec![self.initial];
        for s in &self.sweeps {
            out.extend([s.after_scale, s.after_rotation, s.after_projection]);
        }
        out
    }
}

/// Result of the alternating unit-modulus fit `V Λ Q ≈ F`.
#[derive(Debug, Clone)]
pub struct AlternatingFit {
    /// Unit-modulus fit `F`, same shape as the target.
    pub matrix: CMat,
    /// Diagonal of `Λ`.
    pub scale: Vec<f64>,
    /// Unitary `Q`.
    pub rotation: CMat,
    pub objective: f64,
    pub trace: AlternatingTrace,
}

/// Analog stage from the alternating design.
#[derive(Debug, Clone)]
pub struct AnalogDesign {
    /// `F_A` (`N × L`) or `G_A` (`L × M`).
    pub matrix: CMat,
    pub fit: AlternatingFit,
}

fn fit_objective(target: &CMat, scale: &[f64], rotation: &CMat, f: &CMat) -> f64 {
    frobenius_sq(&(scaled_columns(target, scale) * rotation - f))
}

fn scaled_columns(a: &CMat, scale: &[f64]) -> CMat {
    let mut out = a.clone();
    for (j, s) in scale.iter().enumerate() {
        out.column_mut(j).scale_mut(*s);
    }
    out
}

/// Best diagonal scale for fixed `Q` and `F`: `λ_i = Re(v_i^H c_i) / ‖v_i‖²`, `C = F Q^H`.
pub fn optimal_scale(target: &CMat, rotation: &CMat, f: &CMat) -> Vec<f64> {
    let c = f * rotation.adjoint();
    (0..target.ncols())
        .map(|i| {
            let v = target.column(i);
            let norm = v.norm_squared();
            if norm > 0.0 {
                v.dotc(&c.column(i)).re / norm
            } else {
                0.0
            }
        })
        .collect()
}

/// Best unitary for fixed `Λ` and `F`: `Q = V_Q U_Q^H` from `F^H V Λ = U_Q Σ V_Q^H`.
pub fn optimal_unitary(target: &CMat, scale: &[f64], f: &CMat) -> Result<CMat> {
    let m = f.adjoint() * scaled_columns(target, scale);
    let s = svd_ordered(&m)?;
    Ok(&s.v * s.u.adjoint())
}

/// Alternating minimization of `‖T Λ Q − F‖_F²` with no orthonormality requirement on `T`.
pub fn alternating_fit(target: &CMat, cfg: &PhaseProjConfig) -> Result<AlternatingFit> {
    cfg.validate()?;
    if target.ncols() == 0 || target.nrows() < target.ncols() {
        return Err(Error::invalid(format!(
            "analog design: target must be tall, got {}x{}",
            target.nrows(),
            target.ncols()
        )));
    }
    if !crate::linalg::is_finite(target) {
        return Err(Error::invalid("analog design: non-finite target"));
    }
    let l = target.ncols();
    let mut f = phase_projection(target);
    let mut scale = vec![1.0; l];
    let mut rotation = CMat::identity(l, l);
    let mut trace = AlternatingTrace {
        initial: fit_objective(target, &scale, &rotation, &f),
        ..Default::default()
    };
    let mut prev = trace.initial;

    for _ in 0..cfg.max_iters {
        scale = optimal_scale(target, &rotation, &f);
        let after_scale = fit_objective(target, &scale, &rotation, &f);
        rotation = optimal_unitary(target, &scale, &f)?;
        let after_rotation = fit_objective(target, &scale, &rotation, &f);
        f = phase_projection(&(scaled_columns(target, &scale) * &rotation));
        let after_projection = fit_objective(target, &scale, &rotation, &f);
        trace.sweeps.push(SweepRecord {
            after_scale,
            after_rotation,
            after_projection,
        });
        let decrement = prev - after_projection;
        prev = after_projection;
        if decrement <= cfg.zeta * after_projection.abs().max(f64::MIN_POSITIVE)
            || after_projection <= 1e-24
        {
            trace.converged = true;
            break;
        }
    }
    Ok(AlternatingFit {
        matrix: f,
        scale,
        rotation,
        objective: prev,
        trace,
    })
}

/// Analog precoder aligned with the orthonormal columns of `v_target` (`N × L`).
pub fn design_analog_precoder(v_target: &CMat, cfg: &PhaseProjConfig) -> Result<AnalogDesign> {
    if orthonormality_error(v_target) > 1e-8 {
        return Err(Error::invalid(
            "analog precoder: target columns are not orthonormal",
        ));
    }
    let fit = alternating_fit(v_target, cfg)?;
    Ok(AnalogDesign {
        matrix: fit.matrix.clone(),
        fit,
    })
}

/// Analog processor from the relaxed fit of `R_n^{-1/2} U_target`; returns `G_A` (`L × M`).
pub fn design_analog_processor_relaxed(
    u_target: &CMat,
    rn: &CMat,
    cfg: &PhaseProjConfig,
) -> Result<AnalogDesign> {
    if rn.shape() != (u_target.nrows(), u_target.nrows()) {
        return Err(Error::invalid(
            "analog processor: noise covariance dimension mismatch",
        ));
    }
    let whiten = inv_sqrtm_pd(rn)?;
    let fit = alternating_fit(&(whiten * u_target), cfg)?;
    Ok(AnalogDesign {
        matrix: fit.matrix.adjoint(),
        fit,
    })
}

/// Subspace alignment `‖V^H U_F‖_F²` between `v_target` and the leading left
/// singular vectors of `f`.
pub fn subspace_alignment(v_target: &CMat, f: &CMat) -> Result<f64> {
    let s = svd_ordered(f)?;
    let l = v_target.ncols().min(s.u.ncols());
    Ok(frobenius_sq(&(v_target.adjoint() * s.u.columns(0, l))))
}

/// Smallest admissible `η`: `λ_max(R_n)·M·L/8 + ‖p‖²`.
pub fn qcqp_eta_bound(rn: &CMat, l: usize, p_norm_sq: f64) -> f64 {
    let (vals, _) = hermitian_eig(rn);
    vals[0] * (rn.nrows() * l) as f64 / 8.0 + p_norm_sq
}

#[derive(Debug, Clone)]
pub struct QcqpDesign {
    /// `L × M` unit-modulus processor.
    pub g_a: CMat,
    pub eta: f64,
    /// Regularized objective at each iterate, starting from the initial point.
    pub objective_history: Vec<f64>,
    /// `‖T − R_n^{1/2} P(X)‖_F²` at the phase-projected iterates.
    pub projected_history: Vec<f64>,
    /// `max_i | |x_i| − 1 |` at each iterate.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl QcqpDesign {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_projected_objective(&self) -> f64 {
        self.projected_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Tangent-constraint iteration for the processor with `T = U_target diag(Λ_G) Q_G`.
///
/// Each iteration linearizes the unit-modulus constraint of every entry of
/// `X = G_A^H` at the previous phase, `Re(e^{-jθ_i} x_i) = 1`, and solves the
/// resulting equality-constrained quadratic program in closed form. The
/// problem separates over the columns of `X`.
pub fn design_analog_processor_qcqp(
    u_target: &CMat,
    lambda_g: &[f64],
    q_g: &CMat,
    rn: &CMat,
    cfg: &QcqpConfig,
) -> Result<QcqpDesign> {
    cfg.validate()?;
    let (m, l) = u_target.shape();
    if lambda_g.len() != l || q_g.shape() != (l, l) || rn.shape() != (m, m) {
        return Err(Error::invalid("qcqp: dimension mismatch"));
    }
    if orthonormality_error(q_g) > 1e-8 {
        return Err(Error::invalid("qcqp: Q_G must be unitary"));
    }
    let rn = hermitian_part(rn);
    let r_half = sqrtm_psd(&rn);
    let target = scaled_columns(u_target, lambda_g) * q_g;
    let p = &r_half * &target;
    let q_const = frobenius_sq(&target);
    let bound = qcqp_eta_bound(&rn, l, frobenius_sq(&p));
    let eta = match cfg.eta {
        None => bound,
        Some(e) if e >= bound * (1.0 - 1e-12) => e,
        Some(e) => {
            return Err(Error::invalid(format!(
                "qcqp: eta {e} is below the admissible bound {bound}"
            )));
        }
    };
    let reg = &rn + CMat::identity(m, m) * Complex64::new(eta, 0.0);
    let c = inv_hpd(&reg)?;
    let cp = &c * &p;

    let objective = |x: &CMat| -> f64 {
        let quad = (x.adjoint() * &reg * x).trace().re;
        quad - 2.0 * (p.adjoint() * x).trace().re + q_const
    };
    let projected = |x: &CMat| frobenius_sq(&(&target - &r_half * phase_projection(x)));

    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut x = CMat::from_element(m, l, Complex64::new(s2, s2));
    let mut objective_history = vec![objective(&x)];
    let mut projected_history = vec![projected(&x)];
    let mut residual_history = vec![modulus_residual(&x)];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        let phases = phase_projection(&x);
        let mut next = CMat::zeros(m, l);
        for col in 0..l {
            let d = phases.column(col);
            let y0 = cp.column(col);
            let s = RMat::from_fn(m, m, |i, j| (d[i].conj() * c[(i, j)] * d[j]).re);
            let rhs = nalgebra::DVector::from_fn(m, |i, _| 1.0 - (d[i].conj() * y0[i]).re);
            let lam = s
                .cholesky()
                .ok_or_else(|| {
                    Error::DegenerateIterate("qcqp: constraint Gram matrix is singular".into())
                })?
                .solve(&rhs);
            let shift = nalgebra::DVector::from_fn(m, |i, _| d[i] * lam[i]);
            next.set_column(col, &(y0 + &c * shift));
        }
        x = next;
        iterations += 1;
        let obj = objective(&x);
        let prev = *objective_history.last().unwrap();
        objective_history.push(obj);
        projected_history.push(projected(&x));
        residual_history.push(modulus_residual(&x));
        if (prev - obj).abs() <= cfg.upsilon * obj.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok(QcqpDesign {
        g_a: phase_projection(&x).adjoint(),
        eta,
        objective_history,
        projected_history,
        residual_history,
        iterations,
        converged,
    })
}

/// Outcome of the random candidate search.
#[derive(Debug, Clone)]
pub struct RandomDesign {
    pub f_a: CMat,
    pub g_a: CMat,
    /// Log-determinant score of every precoder candidate (`-inf` when singular).
    pub f_scores: Vec<f64>,
    pub g_scores: Vec<f64>,
    pub f_index: usize,
    pub g_index: usize,
}

fn draw_real<R: Rng>(rng: &mut R, rows: usize, cols: usize, dist: CandidateDist) -> CMat {
    DMatrix::from_fn(rows, cols, |_, _| {
        let v: f64 = match dist {
            CandidateDist::Uniform01 => rng.random::<f64>(),
            CandidateDist::StdGaussian => rng.sample(StandardNormal),
        };
        Complex64::new(v, 0.0)
    })
}

fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Random analog stages with `l` RF chains: best of `cfg.k` phase-projected candidates.
pub fn design_random(h: &CMat, rn: &CMat, l: usize, cfg: &RandomAlgConfig) -> Result<RandomDesign> {
    cfg.validate()?;
    let (m, n) = h.shape();
    if rn.shape() != (m, m) || l == 0 || l > m.min(n) {
        return Err(Error::invalid("random design: dimension mismatch"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let hh = h.adjoint();
    let f_cands: Vec<CMat> = (0..cfg.k)
        .map(|_| phase_projection(&(&hh * draw_real(&mut rng, m, l, cfg.dist))))
        .collect();
    let g_cands: Vec<CMat> = (0..cfg.k)
        .map(|_| phase_projection(&(draw_real(&mut rng, l, n, cfg.dist) * &hh)))
        .collect();

    let rn_inv = inv_hpd(rn)?;
    let tx_gram = &hh * &rn_inv * h;
    let w = inv_sqrtm_pd(rn)?;
    let rx_gram = &w * h * &hh * &w;
    let score = |a: &CMat| ln_det_hpd(&hermitian_part(a)).unwrap_or(f64::NEG_INFINITY);
    let f_scores: Vec<f64> = f_cands
        .iter()
        .map(|f| score(&(f.adjoint() * &tx_gram * f)))
        .collect();
    let g_scores: Vec<f64> = g_cands
        .iter()
        .map(|g| score(&(g * &rx_gram * g.adjoint())))
        .collect();
    let (fi, gi) = (argmax_first(&f_scores), argmax_first(&g_scores));
    if f_scores[fi] == f64::NEG_INFINITY || g_scores[gi] == f64::NEG_INFINITY {
        return Err(Error::RankDeficient(
            "random design: every candidate is singular".into(),
        ));
    }
    Ok(RandomDesign {
        f_a: f_cands[fi].clone(),
        g_a: g_cands[gi].clone(),
        f_scores,
        g_scores,
        f_index: fi,
        g_index: gi,
    })
}

/// Snaps every phase to the nearest point of `{2πk / 2^bits}`, ties toward the smaller `k`.
pub fn quantize_phases(a: &CMat, bits: u32) -> Result<CMat> {
    if bits == 0 || bits > 24 {
        return Err(Error::invalid(format!(
            "quantization bits must lie in 1..=24, got {bits}"
        )));
    }
    let res = modulus_residual(a);
    if res > 1e-9 {
        return Err(Error::invalid(format!(
            "quantization input is not unit modulus (residual {res:e})"
        )));
    }
    let levels = 1u64 << bits;
    let step = 2.0 * PI / levels as f64;
    Ok(a.map(|z| {
        let theta = z.arg().rem_euclid(2.0 * PI);
        let x = theta / step;
        let lower = x.floor();
        let k = if x - lower > 0.5 { lower + 1.0 } else { lower };
        let k = (k as u64) % levels;
        Complex64::from_polar(1.0, step * k as f64)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, random_orthonormal};
    use crate::matdecomp::dft_unitary;

    #[test]
    fn unit_modulus_target_is_a_fixed_point() {
        let n = 8;
        let dft = dft_unitary(n).unwrap();
        let v = dft.columns(0, 3).into_owned();
        let d = design_analog_precoder(&v, &PhaseProjConfig::default()).unwrap();
        let expect = v * Complex64::new((n as f64).sqrt(), 0.0);
        assert!(frobenius(&(&d.matrix - expect)) < 1e-10);
        assert!(d.fit.objective < 1e-10);
    }

    #[test]
    fn scalar_target() {
        let v = CMat::from_element(1, 1, Complex64::from_polar(1.0, 0.7));
        let d = design_analog_precoder(&v, &PhaseProjConfig::default()).unwrap();
        assert!((d.matrix[(0, 0)] - v[(0, 0)]).norm() < 1e-14);
    }

    #[test]
    fn non_orthonormal_target_rejected() {
        let v = CMat::from_element(4, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(
            design_analog_precoder(&v, &PhaseProjConfig::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn every_step_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let v = random_orthonormal(&mut rng, 8, 2);
            let d = design_analog_precoder(&v, &PhaseProjConfig::default()).unwrap();
            let steps = d.fit.trace.step_objectives();
            for w in steps.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0), "{w:?}");
            }
            assert!(modulus_residual(&d.matrix) < 1e-12);
        }
    }

    #[test]
    fn relaxed_processor_matches_precoder_for_white_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_orthonormal(&mut rng, 6, 2);
        let cfg = PhaseProjConfig::default();
        let pre = design_analog_precoder(&u, &cfg).unwrap();
        let rel = design_analog_processor_relaxed(&u, &CMat::identity(6, 6), &cfg).unwrap();
        assert!(frobenius(&(pre.matrix.adjoint() - &rel.matrix)) < 1e-10);
        let scaled = CMat::identity(6, 6) * Complex64::new(3.7, 0.0);
        let rel2 = design_analog_processor_relaxed(&u, &scaled, &cfg).unwrap();
        assert!(frobenius(&(&rel2.matrix - &rel.matrix)) < 1e-8);
    }

    #[test]
    fn qcqp_scalar_converges_to_target_phase() {
        let phi = 2.1;
        let u = CMat::from_element(1, 1, Complex64::from_polar(1.0, phi));
        let q = CMat::identity(1, 1);
        let d = design_analog_processor_qcqp(
            &u,
            &[1.0],
            &q,
            &CMat::identity(1, 1),
            &QcqpConfig::default(),
        )
        .unwrap();
        let g = d.g_a[(0, 0)].conj();
        assert!((g.arg() - phi).abs() < 1e-3, "phase {}", g.arg());
        assert!(d.final_residual() < 1e-3);
    }

    #[test]
    fn qcqp_rejects_small_eta() {
        let u = CMat::from_element(1, 1, Complex64::new(1.0, 0.0));
        let cfg = QcqpConfig {
            eta: Some(1e-3),
            ..Default::default()
        };
        let r = design_analog_processor_qcqp(
            &u,
            &[1.0],
            &CMat::identity(1, 1),
            &CMat::identity(1, 1),
            &cfg,
        );
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn quantization_examples() {
        let z = |t: f64| CMat::from_element(1, 1, Complex64::from_polar(1.0, t));
        let q = quantize_phases(&z(0.4 * PI), 2).unwrap();
        assert!((q[(0, 0)] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let q = quantize_phases(&z(0.9 * PI), 1).unwrap();
        assert!((q[(0, 0)] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let on_grid = z(1.5 * PI);
        let q = quantize_phases(&on_grid, 2).unwrap();
        assert!((q[(0, 0)] - on_grid[(0, 0)]).norm() < 1e-15);
        // exact midpoint between 0 and π/2 goes to 0
        let q = quantize_phases(&z(PI / 4.0), 2).unwrap();
        assert!((q[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(quantize_phases(&CMat::from_element(1, 1, Complex64::new(2.0, 0.0)), 2).is_err());
        assert!(quantize_phases(&z(0.0), 0).is_err());
    }

    #[test]
    fn random_design_single_candidate_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = crate::linalg::complex_gaussian(&mut rng, 4, 6);
        let rn = CMat::identity(4, 4);
        let cfg = RandomAlgConfig {
            k: 1,
            dist: CandidateDist::Uniform01,
            seed: 9,
        };
        let a = design_random(&h, &rn, 2, &cfg).unwrap();
        assert_eq!((a.f_index, a.g_index), (0, 0));
        let cfg10 = RandomAlgConfig { k: 10, ..cfg };
        let b = design_random(&h, &rn, 2, &cfg10).unwrap();
        let c = design_random(&h, &rn, 2, &cfg10).unwrap();
        assert_eq!(b.f_a, c.f_a);
        assert_eq!(b.g_a, c.g_a);
        assert!(b.f_scores.iter().all(|s| *s <= b.f_scores[b.f_index]));
        assert!(b.g_scores.iter().all(|s| *s <= b.g_scores[b.g_index]));
    }
}
