use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analog::{CandidateDist, PhaseProjConfig, QcqpConfig};
use crate::channel::{noise_covariance, ChannelModel, MmWaveParams, NoiseModel};
use crate::linalg::diag_matrix;
use crate::sim::modulation::ModulationScheme;
use crate::transceiver::{Objective, TransceiverKind};
use crate::{Error, Result};

/// Transceiver design algorithm evaluated by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DesignMethod {
    #[serde(rename = "full-digital")]
    FullDigital,
    #[serde(rename = "phase-proj")]
    PhaseProj,
    #[serde(rename = "phase-proj-qcqp")]
    PhaseProjQcqp,
    #[serde(rename = "omp")]
    Omp,
    #[serde(rename = "direct-proj")]
    DirectProj,
    #[serde(rename = "random")]
    Random,
}

impl DesignMethod {
    pub const ALL: [DesignMethod; 6] = [
        DesignMethod::FullDigital,
        DesignMethod::PhaseProj,
        DesignMethod::PhaseProjQcqp,
        DesignMethod::Omp,
        DesignMethod::DirectProj,
        DesignMethod::Random,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            DesignMethod::FullDigital => "full-digital",
            DesignMethod::PhaseProj => "phase-proj",
            DesignMethod::PhaseProjQcqp => "phase-proj-qcqp",
            DesignMethod::Omp => "omp",
            DesignMethod::DirectProj => "direct-proj",
            DesignMethod::Random => "random",
        }
    }

    /// Whether the design has phase-shifter analog stages.
    pub fn is_hybrid(self) -> bool {
        self != DesignMethod::FullDigital
    }
}

impl fmt::Display for DesignMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DesignMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DesignMethod::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown design method '{s}'")))
    }
}

/// Serializable form of [`Objective`]; weighted MSE takes a diagonal weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObjectiveSpec {
    Capacity,
    SumMse,
    MaxMse,
    WeightedMse { weights: Vec<f64> },
    NonlinearEqualStreams,
}

impl ObjectiveSpec {
    pub fn to_objective(&self) -> Objective {
        match self {
            ObjectiveSpec::Capacity => Objective::Capacity,
            ObjectiveSpec::SumMse => Objective::SumMse,
            ObjectiveSpec::MaxMse => Objective::MaxMse,
            ObjectiveSpec::WeightedMse { weights } => Objective::WeightedMse(diag_matrix(weights)),
            ObjectiveSpec::NonlinearEqualStreams => Objective::NonlinearEqualStreams,
        }
    }

    fn validate(&self, d: usize, kind: TransceiverKind) -> Result<()> {
        match self {
            ObjectiveSpec::WeightedMse { weights } => {
                if weights.len() != d {
                    return Err(Error::invalid(format!(
                        "weighted-mse needs {d} weights, got {}",
                        weights.len()
                    )));
                }
                if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return Err(Error::invalid("weighted-mse weights must be positive"));
                }
            }
            ObjectiveSpec::NonlinearEqualStreams if kind == TransceiverKind::Linear => {
                return Err(Error::invalid(
                    "objective nonlinear-equal-streams requires kind thp or dfd",
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Tuning knobs of the individual design algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgorithmParams {
    pub phase_proj: PhaseProjConfig,
    pub qcqp: QcqpConfig,
    /// Candidates drawn by the random design.
    pub random_k: usize,
    pub random_dist: CandidateDist,
    /// Angles in the array-response codebook used by OMP on mmWave channels.
    pub codebook_points: usize,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        AlgorithmParams {
            phase_proj: PhaseProjConfig::default(),
            qcqp: QcqpConfig::default(),
            random_k: 10,
            random_dist: CandidateDist::Uniform01,
            codebook_points: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Transmit antennas.
    pub n: usize,
    /// Receive antennas.
    pub m: usize,
    /// RF chains at each end.
    pub l: usize,
    /// Data streams.
    pub d: usize,
    pub channel: ChannelModel,
    #[serde(default)]
    pub mmwave: MmWaveParams,
    #[serde(default)]
    pub noise: NoiseModel,
    pub method: DesignMethod,
    pub objective: ObjectiveSpec,
    pub kind: TransceiverKind,
    /// Transmit power grid in dB relative to unit noise variance.
    pub power_db: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub quant_bits: Option<u32>,
    #[serde(default)]
    pub algorithms: AlgorithmParams,
}

impl SweepConfig {
    /// 32×16 mmWave link with four RF chains and four streams.
    pub fn new(method: DesignMethod) -> Self {
        SweepConfig {
            n: 32,
            m: 16,
            l: 4,
            d: 4,
            channel: ChannelModel::MmWave,
            mmwave: MmWaveParams::default(),
            noise: NoiseModel::default(),
            method,
            objective: ObjectiveSpec::Capacity,
            kind: TransceiverKind::Linear,
            power_db: vec![-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0],
            trials: 200,
            master_seed: 1,
            quant_bits: None,
            algorithms: AlgorithmParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.power_db.is_empty() {
            return Err(Error::invalid("power grid must not be empty"));
        }
        if self.power_db.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("power grid entries must be finite"));
        }
        if self.n == 0 || self.m == 0 {
            return Err(Error::invalid("antenna counts must be positive"));
        }
        if self.d == 0 || self.d > self.l || self.l > self.n.min(self.m) {
            return Err(Error::invalid(format!(
                "need 1 <= D <= L <= min(N, M); got D = {}, L = {}, N = {}, M = {}",
                self.d, self.l, self.n, self.m
            )));
        }
        if self.channel == ChannelModel::MmWave {
            self.mmwave.validate()?;
        }
        noise_covariance(self.m, &self.noise)?;
        self.objective.validate(self.d, self.kind)?;
        if self.kind != TransceiverKind::Linear && matches!(self.method, DesignMethod::Omp) {
            return Err(Error::invalid("omp designs are linear only"));
        }
        if let Some(bits) = self.quant_bits {
            if bits == 0 || bits > 24 {
                return Err(Error::invalid(format!(
                    "quant_bits must lie in 1..=24, got {bits}"
                )));
            }
        }
        self.algorithms.phase_proj.validate()?;
        self.algorithms.qcqp.validate()?;
        if self.algorithms.random_k == 0 {
            return Err(Error::invalid("random_k must be at least 1"));
        }
        if self.algorithms.codebook_points < self.l {
            return Err(Error::invalid("codebook_points must be at least L"));
        }
        Ok(())
    }
}

/// Symbol-level settings of a BER sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerConfig {
    pub modulation: ModulationScheme,
    pub kinds: Vec<TransceiverKind>,
    /// Symbol vectors transmitted per trial and power point.
    pub vectors_per_trial: usize,
    /// Objective of the linear transceiver.
    pub linear_objective: ObjectiveSpec,
    /// Objective of the THP and DFD transceivers.
    pub nonlinear_objective: ObjectiveSpec,
}

impl Default for BerConfig {
    fn default() -> Self {
        BerConfig {
            modulation: ModulationScheme::Qam16,
            kinds: vec![
                TransceiverKind::Linear,
                TransceiverKind::Thp,
                TransceiverKind::Dfd,
            ],
            vectors_per_trial: 128,
            linear_objective: ObjectiveSpec::Capacity,
            nonlinear_objective: ObjectiveSpec::NonlinearEqualStreams,
        }
    }
}

impl BerConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(Error::invalid("at least one transceiver kind is required"));
        }
        if self.vectors_per_trial == 0 {
            return Err(Error::invalid("vectors_per_trial must be at least 1"));
        }
        self.linear_objective.validate(d, TransceiverKind::Linear)?;
        self.nonlinear_objective.validate(d, TransceiverKind::Thp)?;
        Ok(())
    }

    pub fn objective_for(&self, kind: TransceiverKind) -> &ObjectiveSpec {
        match kind {
            TransceiverKind::Linear => &self.linear_objective,
            _ => &self.nonlinear_objective,
        }
    }
}
