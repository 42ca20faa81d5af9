//! Monte-Carlo spectral efficiency and BER sweeps.
//!
//! Every trial owns its random streams, derived by hashing the master seed
//! with the trial index, the power-point index and a purpose tag. Trials may
//! run on any number of worker threads; per-trial values are aggregated in
//! trial-index order with pairwise summation, so results are bit-identical
//! regardless of the schedule.
//!
//! The channel of a trial depends only on the master seed and the trial
//! index, so all power points and all design methods of one trial see the
//! same channel. Symbol and noise streams additionally depend on the power
//! point.

mod config;
mod io;
pub mod methods;
pub mod modulation;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::channel::{mmwave_matrix, noise_covariance, rayleigh_matrix, ChannelModel};
use crate::linalg::{complex_gaussian, ln_det_hpd, pairwise_sum, real_diag, sqrtm_psd, trace_re};
use crate::transceiver::{
    mse_matrix_general, mse_matrix_linear, snr_matrix, HybridTransceiver, TransceiverKind,
};
use crate::{CMat, CVec, Complex64, Error, Result};

pub use config::{AlgorithmParams, BerConfig, DesignMethod, ObjectiveSpec, SweepConfig};
pub use io::{read_result, serialize_result, sidecar_path, CSV_HEADER};
pub use methods::{complete_design, prepare_analog, AnalogStages};
pub use modulation::{
    dfd_detect, dfd_detect_scaled, thp_encode, thp_modulo, ModulationScheme, Symbol,
};

/// One aggregated row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub power_db: f64,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    /// Successful trials contributing to `mean`.
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Run description: configuration, seeds, axis definitions and build.
    pub metadata: serde_json::Value,
}

impl SweepResult {
    pub fn metric(&self, name: &str) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| p.metric == name).collect()
    }
}

/// Version string with the source revision when provided at build time.
pub fn build_id() -> String {
    format!(
        "{}+{}",
        env!("CARGO_PKG_VERSION"),
        option_env!("HYBRID_MIMO_GIT_REV").unwrap_or("unknown")
    )
}

const TAG_CHANNEL: u64 = 0x43;
const TAG_RANDOM_DESIGN: u64 = 0x52;
const TAG_SYMBOLS: u64 = 0x53;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream identified by `parts` under `master`.
pub fn stream_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |acc, p| {
        splitmix64(acc ^ splitmix64(*p))
    })
}

/// `10^(dB/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Seed of the channel draw of trial `trial`.
pub fn trial_channel_seed(cfg: &SweepConfig, trial: usize) -> u64 {
    stream_seed(cfg.master_seed, &[trial as u64, TAG_CHANNEL])
}

/// Channel matrix of trial `trial`.
pub fn trial_channel(cfg: &SweepConfig, trial: usize) -> Result<CMat> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_channel_seed(cfg, trial));
    match cfg.channel {
        ChannelModel::MmWave => mmwave_matrix(&cfg.mmwave, cfg.n, cfg.m, &mut rng),
        ChannelModel::Rayleigh => rayleigh_matrix(cfg.n, cfg.m, &mut rng),
    }
}

/// Seed handed to the random analog design of trial `trial`.
pub fn trial_design_seed(cfg: &SweepConfig, trial: usize) -> u64 {
    stream_seed(cfg.master_seed, &[trial as u64, TAG_RANDOM_DESIGN])
}

/// `log₂|I + Γ|` of the chain `G_A H F_A F_D`.
pub fn spectral_efficiency(h: &CMat, rn: &CMat, t: &HybridTransceiver) -> Result<f64> {
    if !t.transmit_power().is_finite() {
        return Err(Error::invalid("transceiver has non-finite entries"));
    }
    let gamma = snr_matrix(h, rn, &t.f_a, &t.f_d, &t.g_a)?;
    let d = gamma.nrows();
    let ln_det = ln_det_hpd(&(CMat::identity(d, d) + gamma))
        .ok_or_else(|| Error::numeric("I + Γ is not positive definite"))?;
    Ok((ln_det / std::f64::consts::LN_2).max(0.0))
}

fn map_trials<T, F>(trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials).map(f).collect()
    }
}

/// Runs `f` with `jobs` worker threads available to the sweeps (`0` picks the default).
#[cfg(feature = "parallel")]
pub fn with_workers<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Runs `f` on the calling thread; the worker count is ignored without the `parallel` feature.
#[cfg(not(feature = "parallel"))]
pub fn with_workers<T>(_jobs: usize, f: impl FnOnce() -> T) -> Result<T> {
    Ok(f())
}

/// Mean and standard error of `values` (NaN for an empty slice).
fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Per-trial outcome; failures keep their message.
type Outcome<T> = std::result::Result<T, String>;

/// Collects the first few failure messages in trial order.
fn failure_samples<'a>(errors: impl Iterator<Item = &'a String>) -> Vec<String> {
    errors.take(5).cloned().collect()
}

fn aggregate(power_db: f64, metric: &str, outcomes: &[&Outcome<f64>]) -> SweepPoint {
    let values: Vec<f64> = outcomes
        .iter()
        .filter_map(|r| r.as_ref().ok().copied())
        .collect();
    let (mean, stderr) = mean_stderr(&values);
    SweepPoint {
        power_db,
        metric: metric.to_string(),
        mean,
        stderr,
        trials: values.len(),
        failures: outcomes.len() - values.len(),
    }
}

fn se_trial(cfg: &SweepConfig, rn: &CMat, trial: usize, powers: &[f64]) -> Vec<Outcome<f64>> {
    let run = || -> Result<Vec<Outcome<f64>>> {
        let h = trial_channel(cfg, trial)?;
        let stages = prepare_analog(cfg, &h, rn, trial_design_seed(cfg, trial))?;
        let objective = cfg.objective.to_objective();
        Ok(powers
            .iter()
            .map(|&p| {
                complete_design(cfg, &stages, &h, rn, &objective, cfg.kind, p)
                    .and_then(|t| spectral_efficiency(&h, rn, &t))
                    .map_err(|e| e.to_string())
            })
            .collect())
    };
    match run() {
        Ok(v) => v,
        Err(e) => powers.iter().map(|_| Err(e.to_string())).collect(),
    }
}

/// Spectral efficiency of `cfg.method` at every power point, averaged over trials.
///
/// The metric name is `se` (bits/s/Hz). A trial whose design fails is
/// excluded from the mean and counted in the `failures` column.
pub fn run_se_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let rn = noise_covariance(cfg.m, &cfg.noise)?;
    let powers: Vec<f64> = cfg.power_db.iter().map(|db| db_to_linear(*db)).collect();
    let per_trial = map_trials(cfg.trials, |t| se_trial(cfg, &rn, t, &powers));

    let mut points = Vec::with_capacity(powers.len());
    let mut samples = Vec::new();
    for (pi, db) in cfg.power_db.iter().enumerate() {
        let column: Vec<&Outcome<f64>> = per_trial.iter().map(|v| &v[pi]).collect();
        for e in column.iter().filter_map(|r| r.as_ref().err()) {
            log::warn!("{} at {db} dB: trial failed: {e}", cfg.method);
        }
        if samples.is_empty() {
            samples = failure_samples(column.iter().filter_map(|r| r.as_ref().err()));
        }
        points.push(aggregate(*db, "se", &column));
    }
    let metadata = json!({
        "sweep": "se",
        "build": build_id(),
        "config": cfg,
        "power_axis": "transmit power in dB relative to unit noise variance, P = 10^(dB/10)",
        "channel_seeding": "channel depends on (master_seed, trial); shared by all power points and methods",
        "metric_unit": "bits/s/Hz",
        "failure_samples": samples,
    });
    Ok(SweepResult { points, metadata })
}

/// Outcome of one transceiver kind at one power point of one trial.
#[derive(Debug, Clone, Copy)]
struct BerOutcome {
    bit_errors: u64,
    bits: u64,
    /// THP only: measured `mean |b|²` and the resulting transmit power over `P`.
    thp_scale: Option<(f64, f64)>,
}

/// Signal batch shared by all kinds at one power point.
struct Batch {
    symbols: Vec<Vec<Symbol>>,
    noise: Vec<CVec>,
}

fn draw_batch(
    cfg: &SweepConfig,
    ber: &BerConfig,
    rn_half: &CMat,
    trial: usize,
    point: usize,
) -> Batch {
    let seed = stream_seed(cfg.master_seed, &[trial as u64, point as u64, TAG_SYMBOLS]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut symbols = Vec::with_capacity(ber.vectors_per_trial);
    let mut noise = Vec::with_capacity(ber.vectors_per_trial);
    for _ in 0..ber.vectors_per_trial {
        symbols.push(
            (0..cfg.d)
                .map(|_| ber.modulation.random_symbol(&mut rng))
                .collect(),
        );
        let w = complex_gaussian(&mut rng, cfg.m, 1);
        noise.push((rn_half * w).column(0).into_owned());
    }
    Batch { symbols, noise }
}

/// Per-stream gains `1 − E_kk` of the processed signal, `E = (I + B) Φ (I + B)^H`.
fn stream_gains(h: &CMat, rn: &CMat, t: &HybridTransceiver) -> Result<Vec<f64>> {
    let phi = mse_matrix_linear(h, rn, &t.f_a, &t.f_d, &t.g_a)?;
    let e = mse_matrix_general(&phi, &t.b)?;
    Ok(real_diag(&e)
        .into_iter()
        .map(|x| (1.0 - x).max(1e-12))
        .collect())
}

/// Transmits `batch` through `t` and counts bit errors.
fn simulate_kind(
    h: &CMat,
    rn: &CMat,
    t: &HybridTransceiver,
    batch: &Batch,
    scheme: ModulationScheme,
    power: f64,
) -> Result<BerOutcome> {
    let f = &t.f_a * &t.f_d;
    let g = &t.g_d * &t.g_a;
    let gains = stream_gains(h, rn, t)?;
    let base = scheme.modulo_base();
    let points: Vec<Vec<Complex64>> = batch
        .symbols
        .iter()
        .map(|v| v.iter().map(|s| scheme.point(*s)).collect())
        .collect();

    let (tx_vectors, amplitude) = if t.kind == TransceiverKind::Thp {
        let encoded = points
            .iter()
            .map(|a| thp_encode(a, &t.b, base))
            .collect::<Result<Vec<_>>>()?;
        let energy: Vec<f64> = encoded.iter().flatten().map(|z| z.norm_sqr()).collect();
        let c = pairwise_sum(&energy) / energy.len() as f64;
        (encoded, c.sqrt())
    } else {
        (points, 1.0)
    };

    let mut bit_errors = 0u64;
    let mut tx_energy = Vec::with_capacity(tx_vectors.len());
    for ((b, n), sent) in tx_vectors.iter().zip(&batch.noise).zip(&batch.symbols) {
        let x = &f * CVec::from_column_slice(b) / Complex64::new(amplitude, 0.0);
        tx_energy.push(x.norm_squared());
        let y = h * &x + n;
        let z = (&g * y) * Complex64::new(amplitude, 0.0);
        let z: Vec<Complex64> = z.iter().copied().collect();
        let decided: Vec<Symbol> = match t.kind {
            TransceiverKind::Linear => z
                .iter()
                .zip(&gains)
                .map(|(zk, g)| scheme.slice(zk / g))
                .collect(),
            TransceiverKind::Thp => {
                let scaled: Vec<Complex64> = z.iter().zip(&gains).map(|(zk, g)| zk / g).collect();
                thp_modulo(&scaled, base)
                    .into_iter()
                    .map(|v| scheme.slice(v))
                    .collect()
            }
            TransceiverKind::Dfd => dfd_detect_scaled(&z, &t.b, &gains, scheme)?,
        };
        bit_errors += decided
            .iter()
            .zip(sent)
            .map(|(a, b)| scheme.bit_errors(*a, *b) as u64)
            .sum::<u64>();
    }
    let bits = (batch.symbols.len() * t.streams()) as u64 * scheme.bits_per_symbol() as u64;
    let thp_scale = (t.kind == TransceiverKind::Thp).then(|| {
        let ratio = pairwise_sum(&tx_energy) / tx_energy.len() as f64 / power;
        (amplitude * amplitude, ratio)
    });
    Ok(BerOutcome {
        bit_errors,
        bits,
        thp_scale,
    })
}

type BerTrial = Vec<Vec<Outcome<BerOutcome>>>;

fn ber_trial(
    cfg: &SweepConfig,
    ber: &BerConfig,
    rn: &CMat,
    rn_half: &CMat,
    trial: usize,
    powers: &[f64],
) -> BerTrial {
    let prepared = trial_channel(cfg, trial).and_then(|h| {
        let stages = prepare_analog(cfg, &h, rn, trial_design_seed(cfg, trial))?;
        Ok((h, stages))
    });
    powers
        .iter()
        .enumerate()
        .map(|(pi, &p)| {
            let (h, stages) = match &prepared {
                Ok(x) => x,
                Err(e) => return ber.kinds.iter().map(|_| Err(e.to_string())).collect(),
            };
            let batch = draw_batch(cfg, ber, rn_half, trial, pi);
            ber.kinds
                .iter()
                .map(|&kind| {
                    let objective = ber.objective_for(kind).to_objective();
                    complete_design(cfg, stages, h, rn, &objective, kind, p)
                        .and_then(|t| simulate_kind(h, rn, &t, &batch, ber.modulation, p))
                        .map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect()
}

/// Uncoded BER of every kind in `ber.kinds`.
///
/// The power axis is an SNR: transmit power over total noise power,
/// `P = 10^(dB/10)·Tr(R_n)`. Metrics are named `ber_<kind>`; each trial
/// contributes its own BER and the `stderr` column is taken across trials.
pub fn run_ber_sweep(cfg: &SweepConfig, ber: &BerConfig) -> Result<SweepResult> {
    cfg.validate()?;
    ber.validate(cfg.d)?;
    if cfg.method == DesignMethod::Omp && ber.kinds.iter().any(|k| *k != TransceiverKind::Linear) {
        return Err(Error::invalid("omp designs are linear only"));
    }
    let rn = noise_covariance(cfg.m, &cfg.noise)?;
    let rn_half = sqrtm_psd(&rn);
    let noise_power = trace_re(&rn);
    let powers: Vec<f64> = cfg
        .power_db
        .iter()
        .map(|db| db_to_linear(*db) * noise_power)
        .collect();
    let per_trial = map_trials(cfg.trials, |t| {
        ber_trial(cfg, ber, &rn, &rn_half, t, &powers)
    });

    let mut points = Vec::new();
    let mut bits_counted = Vec::new();
    let mut thp_scale = Vec::new();
    let mut thp_ratio = Vec::new();
    let mut samples = Vec::new();
    for (pi, db) in cfg.power_db.iter().enumerate() {
        for (ki, kind) in ber.kinds.iter().enumerate() {
            let column: Vec<&Outcome<BerOutcome>> = per_trial.iter().map(|t| &t[pi][ki]).collect();
            if samples.is_empty() {
                samples = failure_samples(column.iter().filter_map(|r| r.as_ref().err()));
            }
            let rates: Vec<Outcome<f64>> = column
                .iter()
                .map(|r| match r {
                    Ok(o) => Ok(o.bit_errors as f64 / o.bits as f64),
                    Err(e) => Err(e.clone()),
                })
                .collect();
            let refs: Vec<&Outcome<f64>> = rates.iter().collect();
            points.push(aggregate(*db, &format!("ber_{kind}"), &refs));
            let ok: Vec<&BerOutcome> = column.iter().filter_map(|r| r.as_ref().ok()).collect();
            bits_counted.push(ok.iter().map(|o| o.bits).sum::<u64>());
            if *kind == TransceiverKind::Thp {
                let s: Vec<f64> = ok.iter().filter_map(|o| o.thp_scale.map(|x| x.0)).collect();
                let r: Vec<f64> = ok.iter().filter_map(|o| o.thp_scale.map(|x| x.1)).collect();
                thp_scale.push(mean_stderr(&s).0);
                thp_ratio.push(mean_stderr(&r).0);
            }
        }
    }
    let symbols: Vec<u64> = bits_counted
        .iter()
        .map(|b| b / ber.modulation.bits_per_symbol() as u64)
        .collect();
    let metadata = json!({
        "sweep": "ber",
        "build": build_id(),
        "config": cfg,
        "ber": ber,
        "power_axis": "SNR in dB: transmit power over total noise power, P = 10^(dB/10) * Tr(R_n)",
        "channel_seeding": "channel depends on (master_seed, trial); symbols and noise on (master_seed, trial, power index)",
        "modulo_base": ber.modulation.modulo_base(),
        "symbols_per_row": symbols,
        "bits_per_row": bits_counted,
        "thp_mean_symbol_energy": thp_scale,
        "thp_transmit_power_ratio": thp_ratio,
        "failure_samples": samples,
    });
    Ok(SweepResult { points, metadata })
}
