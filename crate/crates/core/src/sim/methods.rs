//! Dispatch from a [`DesignMethod`] tag to the design routines.
//!
//! Analog stages do not depend on the power budget, so they are computed once
//! per channel and completed per power point.

use crate::analog::{
    design_analog_precoder, design_analog_processor_qcqp, design_analog_processor_relaxed,
    design_random, quantize_phases, RandomAlgConfig,
};
use crate::baselines::{omp_digital, omp_hybrid, omp_select, omp_target, Codebook};
use crate::channel::ChannelModel;
use crate::linalg::inv_sqrtm_pd;
use crate::matdecomp::{phase_projection, svd_ordered};
use crate::sim::config::{DesignMethod, SweepConfig};
use crate::transceiver::{design_digital, HybridTransceiver, Objective, TransceiverKind};
use crate::{CMat, Result};

/// Power-independent part of a design.
#[derive(Debug, Clone)]
pub enum AnalogStages {
    /// Identity analog stages.
    Digital,
    Fixed {
        f_a: CMat,
        g_a: CMat,
    },
    /// OMP selects columns per power point from these codebooks.
    Omp {
        tx: Codebook,
        rx: Codebook,
    },
}

/// Computes the analog stages of `cfg.method` for channel `h`; `seed` drives the random design.
pub fn prepare_analog(cfg: &SweepConfig, h: &CMat, rn: &CMat, seed: u64) -> Result<AnalogStages> {
    let l = cfg.l;
    let params = &cfg.algorithms;
    let (f_a, g_a) = match cfg.method {
        DesignMethod::FullDigital => return Ok(AnalogStages::Digital),
        DesignMethod::Omp => {
            let (tx, rx) = match cfg.channel {
                ChannelModel::MmWave => {
                    let spacing = cfg.mmwave.antenna_spacing_wavelengths;
                    (
                        Codebook::array_response(cfg.n, params.codebook_points, spacing)?,
                        Codebook::array_response(cfg.m, params.codebook_points, spacing)?,
                    )
                }
                ChannelModel::Rayleigh => (
                    Codebook::phase_projection_of(&h.adjoint()),
                    Codebook::phase_projection_of(h),
                ),
            };
            return Ok(AnalogStages::Omp { tx, rx });
        }
        DesignMethod::PhaseProj | DesignMethod::PhaseProjQcqp | DesignMethod::DirectProj => {
            let whiten = inv_sqrtm_pd(rn)?;
            let s = svd_ordered(&(&whiten * h))?;
            let v = s.v.columns(0, l).into_owned();
            let u = s.u.columns(0, l).into_owned();
            match cfg.method {
                DesignMethod::DirectProj => (phase_projection(&v), phase_projection(&u.adjoint())),
                _ => {
                    let f_a = design_analog_precoder(&v, &params.phase_proj)?.matrix;
                    let relaxed = design_analog_processor_relaxed(&u, rn, &params.phase_proj)?;
                    let g_a = if cfg.method == DesignMethod::PhaseProjQcqp {
                        design_analog_processor_qcqp(
                            &u,
                            &relaxed.fit.scale,
                            &relaxed.fit.rotation,
                            rn,
                            &params.qcqp,
                        )?
                        .g_a
                    } else {
                        relaxed.matrix
                    };
                    (f_a, g_a)
                }
            }
        }
        DesignMethod::Random => {
            let rc = RandomAlgConfig {
                k: params.random_k,
                dist: params.random_dist,
                seed,
            };
            let r = design_random(h, rn, l, &rc)?;
            (r.f_a, r.g_a)
        }
    };
    Ok(match cfg.quant_bits {
        Some(bits) => AnalogStages::Fixed {
            f_a: quantize_phases(&f_a, bits)?,
            g_a: quantize_phases(&g_a, bits)?,
        },
        None => AnalogStages::Fixed { f_a, g_a },
    })
}

/// Completes the design at transmit power `power`.
#[allow(clippy::too_many_arguments)]
pub fn complete_design(
    cfg: &SweepConfig,
    stages: &AnalogStages,
    h: &CMat,
    rn: &CMat,
    objective: &Objective,
    kind: TransceiverKind,
    power: f64,
) -> Result<HybridTransceiver> {
    let d = cfg.d;
    match stages {
        AnalogStages::Digital => {
            let (m, n) = h.shape();
            design_digital(
                h,
                rn,
                &CMat::identity(n, n),
                &CMat::identity(m, m),
                objective,
                kind,
                power,
                d,
            )
        }
        AnalogStages::Fixed { f_a, g_a } => {
            design_digital(h, rn, f_a, g_a, objective, kind, power, d)
        }
        AnalogStages::Omp { tx, rx } => match cfg.quant_bits {
            None => Ok(omp_hybrid(h, rn, tx, rx, cfg.l, d, power)?.transceiver),
            Some(bits) => {
                let f_opt = omp_target(h, rn, power, d)?;
                let tx_fit = omp_select(&f_opt, tx, cfg.l)?;
                let whiten = inv_sqrtm_pd(rn)?;
                let s = svd_ordered(&(&whiten * h))?;
                let rx_target = &whiten * s.u.columns(0, d);
                let rx_fit = omp_select(&rx_target, rx, cfg.l)?;
                let f_a = quantize_phases(&tx_fit.analog, bits)?;
                let g_a = quantize_phases(&rx_fit.analog.adjoint(), bits)?;
                omp_digital(h, rn, &f_a, &g_a, &f_opt, power)
            }
        },
    }
}
