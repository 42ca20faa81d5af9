//! Reference designs: full-digital, OMP hybrid precoding and direct phase projection.

use serde::{Deserialize, Serialize};

use crate::channel::steering_vector;
use crate::linalg::{frobenius, inv_sqrtm_pd, modulus_residual};
use crate::matdecomp::{phase_projection, svd_ordered};
use crate::transceiver::{
    design_digital, digital_precoder, effective_channel, lmmse_digital_processor,
    HybridTransceiver, Objective, TransceiverKind,
};
use crate::{CMat, Complex64, Error, Result};

/// Unconstrained transceiver with `F` (`N × D`) and `G` (`D × M`).
#[derive(Debug, Clone)]
pub struct FullDigital {
    pub f: CMat,
    pub g: CMat,
    pub powers: Vec<f64>,
}

pub fn full_digital(
    h: &CMat,
    rn: &CMat,
    power: f64,
    d: usize,
    objective: &Objective,
) -> Result<FullDigital> {
    let (m, n) = h.shape();
    if d == 0 || d > m.min(n) {
        return Err(Error::invalid(format!(
            "full digital: D = {d} exceeds min(N, M)"
        )));
    }
    let i_n = CMat::identity(n, n);
    let i_m = CMat::identity(m, m);
    let eff = effective_channel(h, rn, &i_n, &i_m)?;
    let prec = digital_precoder(&eff, objective, power, d)?;
    let g = lmmse_digital_processor(h, rn, &i_n, &prec.f_d, &i_m, None)?;
    Ok(FullDigital {
        f: prec.f_d,
        g,
        powers: prec.powers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookOrigin {
    ArrayResponse,
    PhaseProjection,
}

/// Candidate unit-modulus analog vectors stored as columns.
#[derive(Debug, Clone)]
pub struct Codebook {
    pub columns: CMat,
    pub origin: CodebookOrigin,
}

impl Codebook {
    /// `√n`-scaled ULA responses on `points` angles uniformly covering `[−90°, 90°)`.
    pub fn array_response(n: usize, points: usize, spacing_wavelengths: f64) -> Result<Self> {
        if n == 0 || points == 0 {
            return Err(Error::invalid(
                "codebook: need at least one antenna and one angle",
            ));
        }
        let scale = Complex64::new((n as f64).sqrt(), 0.0);
        let mut columns = CMat::zeros(n, points);
        for k in 0..points {
            let theta =
                -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * k as f64 / points as f64;
            columns.set_column(k, &(steering_vector(n, theta, spacing_wavelengths) * scale));
        }
        Ok(Codebook {
            columns,
            origin: CodebookOrigin::ArrayResponse,
        })
    }

    /// Columns of the phase projection of `a`.
    pub fn phase_projection_of(a: &CMat) -> Self {
        Codebook {
            columns: phase_projection(a),
            origin: CodebookOrigin::PhaseProjection,
        }
    }

    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.ncols() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if modulus_residual(&self.columns) > 1e-9 {
            return Err(Error::invalid("codebook columns must be unit modulus"));
        }
        Ok(())
    }
}

/// Greedy column selection approximating `target` by `A_sel X`.
#[derive(Debug, Clone)]
pub struct OmpFit {
    pub selected: Vec<usize>,
    /// `A_sel`, one column per selection.
    pub analog: CMat,
    /// Least-squares coefficients `X`.
    pub coefficients: CMat,
    /// `‖target − A_sel X‖_F` before the first and after every selection.
    pub residuals: Vec<f64>,
}

fn least_squares(a: &CMat, b: &CMat) -> Result<CMat> {
    let svd = nalgebra::SVD::new(a.clone(), true, true);
    svd.solve(b, 1e-12)
        .map_err(|e| Error::numeric(format!("least squares failed: {e}")))
}

/// Orthogonal matching pursuit with `picks` selections from `codebook`.
pub fn omp_select(target: &CMat, codebook: &Codebook, picks: usize) -> Result<OmpFit> {
    codebook.validate()?;
    let dict = &codebook.columns;
    if dict.nrows() != target.nrows() {
        return Err(Error::invalid("OMP: codebook and target row counts differ"));
    }
    if codebook.len() < picks {
        return Err(Error::invalid(format!(
            "OMP: codebook has {} columns, need at least {picks}",
            codebook.len()
        )));
    }
    let mut selected: Vec<usize> = Vec::with_capacity(picks);
    let mut residual = target.clone();
    let mut residuals = vec![frobenius(target)];
    let mut coefficients = CMat::zeros(0, target.ncols());
    let mut analog = CMat::zeros(target.nrows(), 0);
    for _ in 0..picks {
        let corr = dict.adjoint() * &residual;
        let mut best = None;
        for k in 0..dict.ncols() {
            if selected.contains(&k) {
                continue;
            }
            let score = corr.row(k).norm_squared();
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((k, score));
            }
        }
        let (k, _) = best.expect("codebook larger than pick count");
        selected.push(k);
        analog = CMat::from_fn(target.nrows(), selected.len(), |i, j| {
            dict[(i, selected[j])]
        });
        coefficients = least_squares(&analog, target)?;
        residual = target - &analog * &coefficients;
        residuals.push(frobenius(&residual));
    }
    Ok(OmpFit {
        selected,
        analog,
        coefficients,
        residuals,
    })
}

#[derive(Debug, Clone)]
pub struct OmpDesign {
    pub transceiver: HybridTransceiver,
    pub tx: OmpFit,
    pub rx: OmpFit,
}

/// Digital stages of an OMP transceiver for fixed analog stages: least-squares
/// fit of the full-digital precoder renormalized to `power`, LMMSE processor.
pub fn omp_digital(
    h: &CMat,
    rn: &CMat,
    f_a: &CMat,
    g_a: &CMat,
    f_opt: &CMat,
    power: f64,
) -> Result<HybridTransceiver> {
    let coeffs = least_squares(f_a, f_opt)?;
    let norm = frobenius(&(f_a * &coeffs));
    if !(norm > 0.0) {
        return Err(Error::RankDeficient(
            "OMP: digital precoder vanished".into(),
        ));
    }
    let f_d = coeffs * Complex64::new(power.sqrt() / norm, 0.0);
    let g_d = lmmse_digital_processor(h, rn, f_a, &f_d, g_a, None)?;
    let d = f_d.ncols();
    Ok(HybridTransceiver {
        f_a: f_a.clone(),
        f_d,
        g_a: g_a.clone(),
        g_d,
        b: CMat::zeros(d, d),
        kind: TransceiverKind::Linear,
    })
}

/// OMP hybrid transceiver: the transmitter approximates the capacity-optimal
/// full-digital precoder, the receiver the whitened top-`D` left singular
/// vectors.
pub fn omp_hybrid(
    h: &CMat,
    rn: &CMat,
    tx_codebook: &Codebook,
    rx_codebook: &Codebook,
    l: usize,
    d: usize,
    power: f64,
) -> Result<OmpDesign> {
    if d == 0 || d > l {
        return Err(Error::invalid("OMP: need 1 <= D <= L"));
    }
    let fd = full_digital(h, rn, power, d, &Objective::Capacity)?;
    let tx = omp_select(&fd.f, tx_codebook, l)?;
    let whiten = inv_sqrtm_pd(rn)?;
    let s = svd_ordered(&(&whiten * h))?;
    let rx_target = &whiten * s.u.columns(0, d);
    let rx = omp_select(&rx_target, rx_codebook, l)?;
    let transceiver = omp_digital(h, rn, &tx.analog, &rx.analog.adjoint(), &fd.f, power)?;
    Ok(OmpDesign {
        transceiver,
        tx,
        rx,
    })
}

/// Capacity-optimal full-digital precoder, the OMP transmit target.
pub fn omp_target(h: &CMat, rn: &CMat, power: f64, d: usize) -> Result<CMat> {
    Ok(full_digital(h, rn, power, d, &Objective::Capacity)?.f)
}

/// Analog stages from the phase projection of the whitened channel's singular vectors.
pub fn direct_phase_projection(
    h: &CMat,
    rn: &CMat,
    l: usize,
    d: usize,
    power: f64,
    objective: &Objective,
    kind: TransceiverKind,
) -> Result<HybridTransceiver> {
    let (m, n) = h.shape();
    if l == 0 || l > m.min(n) || d > l {
        return Err(Error::invalid(
            "direct projection: need D <= L <= min(N, M)",
        ));
    }
    let whiten = inv_sqrtm_pd(rn)?;
    let s = svd_ordered(&(&whiten * h))?;
    let f_a = phase_projection(&s.v.columns(0, l).into_owned());
    let g_a = phase_projection(&s.u.columns(0, l).adjoint());
    design_digital(h, rn, &f_a, &g_a, objective, kind, power, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, diag_matrix};
    use crate::matdecomp::dft_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_channel_full_digital() {
        let fd = full_digital(
            &CMat::identity(2, 2),
            &CMat::identity(2, 2),
            2.0,
            2,
            &Objective::Capacity,
        )
        .unwrap();
        assert!(fd.powers.iter().all(|p| (p - 1.0).abs() < 1e-12));
    }

    #[test]
    fn array_codebook_is_unit_modulus() {
        let cb = Codebook::array_response(16, 64, 0.5).unwrap();
        assert_eq!(cb.columns.shape(), (16, 64));
        assert!(cb.validate().is_ok());
    }

    #[test]
    fn omp_recovers_planted_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 8;
        let dft = dft_unitary(n).unwrap() * Complex64::new((n as f64).sqrt(), 0.0);
        let cb = Codebook::phase_projection_of(&dft);
        let planted = [1usize, 5];
        let a_true = CMat::from_fn(n, 2, |i, j| dft[(i, planted[j])]);
        let coeff = complex_gaussian(&mut rng, 2, 2);
        let target = &a_true * coeff;
        let fit = omp_select(&target, &cb, 2).unwrap();
        let mut sel = fit.selected.clone();
        sel.sort();
        assert_eq!(sel, planted);
        assert!(*fit.residuals.last().unwrap() < 1e-10 * fit.residuals[0]);
        for w in fit.residuals.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn omp_rejects_small_codebook() {
        let cb = Codebook::phase_projection_of(&CMat::identity(3, 1));
        assert!(omp_select(&CMat::identity(3, 2), &cb, 2).is_err());
    }

    #[test]
    fn omp_meets_power_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = complex_gaussian(&mut rng, 6, 8);
        let rn = CMat::identity(6, 6);
        let tx = Codebook::phase_projection_of(&h.adjoint());
        let rx = Codebook::phase_projection_of(&h);
        let d = omp_hybrid(&h, &rn, &tx, &rx, 3, 2, 5.0).unwrap();
        assert!((d.transceiver.transmit_power() - 5.0).abs() < 1e-9);
        d.transceiver.validate(5.0).unwrap();
    }

    #[test]
    fn direct_projection_is_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = complex_gaussian(&mut rng, 4, 6);
        let rn = diag_matrix(&[1.0, 2.0, 0.5, 1.0]);
        let t = direct_phase_projection(
            &h,
            &rn,
            3,
            2,
            1.0,
            &Objective::Capacity,
            TransceiverKind::Linear,
        )
        .unwrap();
        t.validate(1.0).unwrap();
    }
}
