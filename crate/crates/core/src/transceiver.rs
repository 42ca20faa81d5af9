//! MSE-matrix framework for hybrid transceivers.
//!
//! Given the analog stages, the digital precoder, the digital processor and
//! the feedback matrix follow in closed form: the processor is the LMMSE
//! filter, the feedback matrix comes from a Cholesky factor of the linear MSE
//! matrix, and the precoder is a water-filled beamformer on the effective
//! channel followed by an objective-dependent unitary rotation.

use serde::{Deserialize, Serialize};

use crate::linalg::{
    diag_matrix, frobenius, frobenius_sq, hermitian_part, identity, inv_hpd, inv_sqrtm_pd,
    ln_det_hpd, modulus_residual, orthonormality_error, real_diag, sqrtm_psd, trace_re, ZERO,
};
use crate::matdecomp::{
    cholesky_lower, cholesky_lower_clamped, dft_unitary, gmd, svd_ordered, waterfill, OrderedSvd,
    WaterfillMode,
};
use crate::{CMat, Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransceiverKind {
    Linear,
    Thp,
    Dfd,
}

impl std::fmt::Display for TransceiverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransceiverKind::Linear => "linear",
            TransceiverKind::Thp => "thp",
            TransceiverKind::Dfd => "dfd",
        })
    }
}

impl std::str::FromStr for TransceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(TransceiverKind::Linear),
            "thp" => Ok(TransceiverKind::Thp),
            "dfd" => Ok(TransceiverKind::Dfd),
            other => Err(Error::invalid(format!(
                "unknown transceiver kind '{other}'"
            ))),
        }
    }
}

/// Analog and digital stages of a hybrid transceiver.
#[derive(Debug, Clone)]
pub struct HybridTransceiver {
    /// `N × L` constant-modulus precoder.
    pub f_a: CMat,
    /// `L × D` digital precoder.
    pub f_d: CMat,
    /// `L × M` constant-modulus processor.
    pub g_a: CMat,
    /// `D × L` digital processor.
    pub g_d: CMat,
    /// `D × D` strictly lower-triangular feedback matrix.
    pub b: CMat,
    pub kind: TransceiverKind,
}

/// Tolerance on entry moduli of the analog stages.
pub const MODULUS_TOL: f64 = 1e-9;

impl HybridTransceiver {
    pub fn streams(&self) -> usize {
        self.f_d.ncols()
    }

    pub fn rf_chains(&self) -> usize {
        self.f_a.ncols()
    }

    /// `Tr(F_A F_D F_D^H F_A^H)`.
    pub fn transmit_power(&self) -> f64 {
        frobenius_sq(&(&self.f_a * &self.f_d))
    }

    /// Checks shapes, constant modulus, the power budget and the feedback structure.
    pub fn validate(&self, power: f64) -> Result<()> {
        let (n, l) = self.f_a.shape();
        let d = self.f_d.ncols();
        let m = self.g_a.ncols();
        let shapes_ok = self.f_d.nrows() == l
            && self.g_a.nrows() == l
            && self.g_d.shape() == (d, l)
            && self.b.shape() == (d, d)
            && n > 0
            && m > 0;
        if !shapes_ok {
            return Err(Error::invalid("transceiver: inconsistent stage dimensions"));
        }
        let fa = modulus_residual(&self.f_a);
        let ga = modulus_residual(&self.g_a);
        if fa > MODULUS_TOL || ga > MODULUS_TOL {
            return Err(Error::invalid(format!(
                "transceiver: analog stages violate constant modulus (residuals {fa:e}, {ga:e})"
            )));
        }
        let used = self.transmit_power();
        if used > power + 1e-9 * power.max(1.0) {
            return Err(Error::invalid(format!(
                "transceiver: transmit power {used} exceeds budget {power}"
            )));
        }
        check_strictly_lower(&self.b)?;
        if self.kind == TransceiverKind::Linear && frobenius(&self.b) > 0.0 {
            return Err(Error::invalid(
                "transceiver: linear transceiver with nonzero feedback",
            ));
        }
        Ok(())
    }
}

/// Majorization-based classification of an objective, selecting its optimal rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchurClass {
    MultConvex,
    MultConcave,
    AddConvex,
    AddConcave,
    NotApplicable,
}

/// Performance metric of a transceiver design.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Maximize `log₂|I + Γ|`.
    Capacity,
    /// Minimize `Tr(Φ)`.
    SumMse,
    /// Minimize the largest diagonal MSE.
    MaxMse,
    /// Minimize `Tr(A^H Φ A)` for a full-rank `D × D` weight `A`.
    WeightedMse(CMat),
    /// Minimize the largest per-stream MSE of a THP/DFD transceiver.
    NonlinearEqualStreams,
}

impl Objective {
    pub fn schur_class(&self) -> SchurClass {
        match self {
            Objective::Capacity | Objective::WeightedMse(_) => SchurClass::NotApplicable,
            Objective::SumMse => SchurClass::AddConcave,
            Objective::MaxMse => SchurClass::AddConvex,
            Objective::NonlinearEqualStreams => SchurClass::MultConvex,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Objective::Capacity => "capacity",
            Objective::SumMse => "sum-mse",
            Objective::MaxMse => "max-mse",
            Objective::WeightedMse(_) => "weighted-mse",
            Objective::NonlinearEqualStreams => "nonlinear-equal-streams",
        }
    }

    fn check_compatible(&self, kind: TransceiverKind, d: usize) -> Result<()> {
        if *self == Objective::NonlinearEqualStreams && kind == TransceiverKind::Linear {
            return Err(Error::invalid(
                "the equal-streams objective requires a THP or DFD transceiver",
            ));
        }
        if let Objective::WeightedMse(a) = self {
            if a.shape() != (d, d) {
                return Err(Error::invalid(format!(
                    "weight matrix is {}x{}, expected {d}x{d}",
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        Ok(())
    }

    /// Water-filling problem whose solution is optimal for this objective.
    fn waterfill_mode(&self, d: usize) -> Result<WaterfillMode> {
        Ok(match self {
            Objective::Capacity | Objective::NonlinearEqualStreams => WaterfillMode::Capacity,
            Objective::SumMse | Objective::MaxMse => WaterfillMode::WeightedMse(vec![1.0; d]),
            Objective::WeightedMse(a) => {
                let s = svd_ordered(a)?;
                if s.sigma.last().copied().unwrap_or(0.0) <= 0.0 {
                    return Err(Error::invalid("weight matrix must have full rank"));
                }
                WaterfillMode::WeightedMse(s.sigma.iter().map(|x| x * x).collect())
            }
        })
    }
}

fn check_strictly_lower(b: &CMat) -> Result<()> {
    if b.nrows() != b.ncols() {
        return Err(Error::invalid("feedback matrix must be square"));
    }
    for i in 0..b.nrows() {
        for j in i..b.ncols() {
            if b[(i, j)] != ZERO {
                return Err(Error::invalid(
                    "feedback matrix must be strictly lower triangular",
                ));
            }
        }
    }
    Ok(())
}

fn check_chain(h: &CMat, rn: &CMat, f_a: &CMat, f_d: &CMat, g_a: &CMat) -> Result<()> {
    let (m, n) = h.shape();
    if rn.shape() != (m, m) || f_a.nrows() != n || f_d.nrows() != f_a.ncols() || g_a.ncols() != m {
        return Err(Error::invalid(format!(
            "dimension mismatch: H {}x{}, R_n {}x{}, F_A {}x{}, F_D {}x{}, G_A {}x{}",
            m,
            n,
            rn.nrows(),
            rn.ncols(),
            f_a.nrows(),
            f_a.ncols(),
            f_d.nrows(),
            f_d.ncols(),
            g_a.nrows(),
            g_a.ncols()
        )));
    }
    Ok(())
}

/// `Γ = K^H (G_A R_n G_A^H)^{-1} K` with `K = G_A H F_A F_D`.
pub fn snr_matrix(h: &CMat, rn: &CMat, f_a: &CMat, f_d: &CMat, g_a: &CMat) -> Result<CMat> {
    check_chain(h, rn, f_a, f_d, g_a)?;
    let k = g_a * h * f_a * f_d;
    let s = hermitian_part(&(g_a * rn * g_a.adjoint()));
    let chol =
        crate::linalg::cholesky(&s).ok_or_else(|| Error::numeric("G_A R_n G_A^H is singular"))?;
    let w = chol.solve(&k);
    Ok(hermitian_part(&(k.adjoint() * w)))
}

/// Linear MSE matrix `(I + Γ)^{-1}`.
pub fn mse_matrix_linear(h: &CMat, rn: &CMat, f_a: &CMat, f_d: &CMat, g_a: &CMat) -> Result<CMat> {
    let gamma = snr_matrix(h, rn, f_a, f_d, g_a)?;
    inv_hpd(&(identity(gamma.nrows()) + gamma))
}

/// Error covariance of an arbitrary digital processor against the target `(I + B) x`.
pub fn mse_matrix_for_processor(
    h: &CMat,
    rn: &CMat,
    f_a: &CMat,
    f_d: &CMat,
    g_a: &CMat,
    g_d: &CMat,
    b: &CMat,
) -> Result<CMat> {
    check_chain(h, rn, f_a, f_d, g_a)?;
    let d = f_d.ncols();
    if g_d.shape() != (d, g_a.nrows()) || b.shape() != (d, d) {
        return Err(Error::invalid(
            "digital processor or feedback has wrong shape",
        ));
    }
    let k = g_a * h * f_a * f_d;
    let e = g_d * &k - identity(d) - b;
    let gd_ga = g_d * g_a;
    Ok(hermitian_part(
        &(&e * e.adjoint() + &gd_ga * rn * gd_ga.adjoint()),
    ))
}

/// LMMSE digital processor `(I + B) K^H (K K^H + G_A R_n G_A^H)^{-1}`.
pub fn lmmse_digital_processor(
    h: &CMat,
    rn: &CMat,
    f_a: &CMat,
    f_d: &CMat,
    g_a: &CMat,
    b: Option<&CMat>,
) -> Result<CMat> {
    check_chain(h, rn, f_a, f_d, g_a)?;
    let d = f_d.ncols();
    let k = g_a * h * f_a * f_d;
    let inner = hermitian_part(&(&k * k.adjoint() + g_a * rn * g_a.adjoint()));
    let chol = crate::linalg::cholesky(&inner)
        .ok_or_else(|| Error::numeric("LMMSE inner matrix is singular"))?;
    // (I+B) K^H X^{-1} = ((X^{-1} K) (I+B)^H)^H
    let left = chol.solve(&k);
    let mut ib = identity(d);
    if let Some(b) = b {
        if b.shape() != (d, d) {
            return Err(Error::invalid("feedback matrix has wrong shape"));
        }
        ib += b;
    }
    Ok((left * ib.adjoint()).adjoint())
}

/// `diag(L) L^{-1} − I` for a lower Cholesky factor `L`.
pub fn feedback_from_cholesky(l: &CMat) -> CMat {
    let n = l.nrows();
    let linv = l
        .clone()
        .solve_lower_triangular(&identity(n))
        .expect("Cholesky factor has a positive diagonal");
    let mut b = diag_matrix(&real_diag(l)) * linv - identity(n);
    for i in 0..n {
        for j in i..n {
            b[(i, j)] = ZERO;
        }
    }
    b
}

/// Feedback matrix minimizing every diagonal entry of the nonlinear MSE matrix.
pub fn optimal_feedback(phi_linear: &CMat) -> Result<CMat> {
    Ok(feedback_from_cholesky(&cholesky_lower(phi_linear)?))
}

/// `(I + B) Φ (I + B)^H`.
pub fn mse_matrix_general(phi_linear: &CMat, b: &CMat) -> Result<CMat> {
    if phi_linear.shape() != b.shape() {
        return Err(Error::invalid("MSE matrix and feedback differ in shape"));
    }
    check_strictly_lower(b)?;
    let ib = identity(b.nrows()) + b;
    Ok(hermitian_part(&(&ib * phi_linear * ib.adjoint())))
}

/// Optimal unitary rotation of the precoder for `objective`.
///
/// `u_gamma` holds the eigenvectors of the unrotated SNR matrix and
/// `gamma_eigs` the matching eigenvalues in non-increasing order.
pub fn optimal_rotation(objective: &Objective, u_gamma: &CMat, gamma_eigs: &[f64]) -> Result<CMat> {
    let d = u_gamma.ncols();
    if u_gamma.nrows() != d || orthonormality_error(u_gamma) > 1e-8 {
        return Err(Error::invalid("rotation basis must be unitary"));
    }
    if gamma_eigs.len() != d {
        return Err(Error::invalid(
            "eigenvalue count does not match rotation basis",
        ));
    }
    match objective {
        Objective::Capacity => Ok(identity(d)),
        Objective::WeightedMse(a) => {
            if a.shape() != (d, d) {
                return Err(Error::invalid("weight matrix dimension mismatch"));
            }
            let s = svd_ordered(a)?;
            Ok(u_gamma * s.u.adjoint())
        }
        other => rotation_for_class(other.schur_class(), u_gamma, gamma_eigs),
    }
}

fn rotation_for_class(class: SchurClass, u_gamma: &CMat, gamma_eigs: &[f64]) -> Result<CMat> {
    let d = u_gamma.ncols();
    match class {
        SchurClass::MultConcave | SchurClass::AddConcave | SchurClass::NotApplicable => {
            Ok(u_gamma.clone())
        }
        SchurClass::AddConvex => Ok(u_gamma * dft_unitary(d)?.adjoint()),
        SchurClass::MultConvex => {
            let root: Vec<f64> = gamma_eigs
                .iter()
                .map(|g| (1.0 + g.max(0.0)).sqrt())
                .collect();
            let f = gmd(&diag_matrix(&root), d)?;
            Ok(u_gamma * f.p)
        }
    }
}

/// Whitened channel seen by the digital stages.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    /// `Π_L R_n^{-1/2} H Π_R`, `L_r × L_t`.
    pub mat: CMat,
    pub svd: OrderedSvd,
    pub pi_left: CMat,
    pub pi_right: CMat,
    /// `(F_A^H F_A)^{-1/2}`.
    pub fa_gram_inv_sqrt: CMat,
}

pub fn effective_channel(h: &CMat, rn: &CMat, f_a: &CMat, g_a: &CMat) -> Result<EffectiveChannel> {
    let (m, n) = h.shape();
    if rn.shape() != (m, m) || f_a.nrows() != n || g_a.ncols() != m {
        return Err(Error::invalid("effective channel: dimension mismatch"));
    }
    let fa_gram = hermitian_part(&(f_a.adjoint() * f_a));
    let fa_gram_inv_sqrt = inv_sqrtm_pd(&fa_gram)
        .map_err(|_| Error::RankDeficient("analog precoder lacks full column rank".into()))?;
    let pi_right = f_a * &fa_gram_inv_sqrt;
    let grg = hermitian_part(&(g_a * rn * g_a.adjoint()));
    let grg_inv_sqrt = inv_sqrtm_pd(&grg)
        .map_err(|_| Error::RankDeficient("analog processor lacks full row rank".into()))?;
    let pi_left = &grg_inv_sqrt * g_a * sqrtm_psd(rn);
    let mat = &grg_inv_sqrt * g_a * h * &pi_right;
    let svd = svd_ordered(&mat)?;
    Ok(EffectiveChannel {
        mat,
        svd,
        pi_left,
        pi_right,
        fa_gram_inv_sqrt,
    })
}

/// Digital precoder together with the quantities it was built from.
#[derive(Debug, Clone)]
pub struct DigitalPrecoder {
    /// `V[:, :D] diag(√p)`.
    pub f_d_tilde: CMat,
    /// `(F_A^H F_A)^{-1/2} F̃_D Q`.
    pub f_d: CMat,
    pub rotation: CMat,
    pub powers: Vec<f64>,
    /// Eigenvalues `p_i σ_i²` of the unrotated SNR matrix.
    pub stream_snr: Vec<f64>,
    pub active_streams: usize,
}

/// Channels whose squared gain falls below this fraction of the strongest are never loaded.
const GAIN_FLOOR: f64 = 1e-14;

pub fn digital_precoder(
    eff: &EffectiveChannel,
    objective: &Objective,
    power: f64,
    d: usize,
) -> Result<DigitalPrecoder> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::invalid(format!(
            "power budget must be positive, got {power}"
        )));
    }
    let l = eff.mat.ncols();
    if d == 0 || d > l || d > eff.svd.sigma.len() {
        return Err(Error::invalid(format!(
            "stream count {d} exceeds effective channel rank bound"
        )));
    }
    let gains: Vec<f64> = eff.svd.sigma[..d].iter().map(|s| s * s).collect();
    let usable = gains
        .iter()
        .take_while(|g| **g > GAIN_FLOOR * gains[0].max(f64::MIN_POSITIVE))
        .count();
    if usable == 0 {
        return Err(Error::RankDeficient("effective channel is zero".into()));
    }
    let mode = objective.waterfill_mode(d)?;
    let mode = match mode {
        WaterfillMode::WeightedMse(w) => WaterfillMode::WeightedMse(w[..usable].to_vec()),
        m => m,
    };
    let mut powers = waterfill(&gains[..usable], power, &mode)?;
    powers.resize(d, 0.0);

    let mut f_d_tilde = eff.svd.v.columns(0, d).into_owned();
    for (j, p) in powers.iter().enumerate() {
        f_d_tilde.column_mut(j).scale_mut(p.sqrt());
    }
    let stream_snr: Vec<f64> = powers.iter().zip(&gains).map(|(p, g)| p * g).collect();

    // eigen-ordering of the diagonal SNR matrix
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| stream_snr[b].total_cmp(&stream_snr[a]).then(a.cmp(&b)));
    let mut u_gamma = CMat::zeros(d, d);
    for (col, &row) in order.iter().enumerate() {
        u_gamma[(row, col)] = Complex64::new(1.0, 0.0);
    }
    let sorted: Vec<f64> = order.iter().map(|&i| stream_snr[i]).collect();
    let rotation = optimal_rotation(objective, &u_gamma, &sorted)?;
    let f_d = &eff.fa_gram_inv_sqrt * &f_d_tilde * &rotation;
    let active_streams = powers.iter().filter(|p| **p > 0.0).count();
    Ok(DigitalPrecoder {
        f_d_tilde,
        f_d,
        rotation,
        powers,
        stream_snr,
        active_streams,
    })
}

/// Objective value of an MSE matrix; capacity is reported as `−log₂|Φ|` bits.
pub fn evaluate_objective(objective: &Objective, phi: &CMat) -> Result<f64> {
    let ln_det =
        ln_det_hpd(phi).ok_or_else(|| Error::numeric("MSE matrix is not positive definite"))?;
    Ok(match objective {
        Objective::Capacity => -ln_det / std::f64::consts::LN_2,
        Objective::SumMse => trace_re(phi),
        Objective::MaxMse => real_diag(phi).into_iter().fold(f64::NEG_INFINITY, f64::max),
        Objective::WeightedMse(a) => {
            if a.nrows() != phi.nrows() {
                return Err(Error::invalid("weight matrix dimension mismatch"));
            }
            trace_re(&(a.adjoint() * phi * a))
        }
        Objective::NonlinearEqualStreams => {
            let l = cholesky_lower_clamped(phi)?;
            real_diag(&l)
                .into_iter()
                .map(|x| x * x)
                .fold(f64::NEG_INFINITY, f64::max)
        }
    })
}

/// Completes a transceiver from fixed analog stages.
#[allow(clippy::too_many_arguments)]
pub fn design_digital(
    h: &CMat,
    rn: &CMat,
    f_a: &CMat,
    g_a: &CMat,
    objective: &Objective,
    kind: TransceiverKind,
    power: f64,
    d: usize,
) -> Result<HybridTransceiver> {
    objective.check_compatible(kind, d)?;
    let eff = effective_channel(h, rn, f_a, g_a)?;
    let prec = digital_precoder(&eff, objective, power, d)?;
    let b = match kind {
        TransceiverKind::Linear => CMat::zeros(d, d),
        _ => {
            let phi = mse_matrix_linear(h, rn, f_a, &prec.f_d, g_a)?;
            feedback_from_cholesky(&cholesky_lower_clamped(&phi)?)
        }
    };
    let g_d = lmmse_digital_processor(h, rn, f_a, &prec.f_d, g_a, Some(&b))?;
    Ok(HybridTransceiver {
        f_a: f_a.clone(),
        f_d: prec.f_d,
        g_a: g_a.clone(),
        g_d,
        b,
        kind,
    })
}
