//! Channel realizations and noise covariances.
//!
//! Two generators are provided: a clustered narrowband model for uniform
//! linear arrays and an i.i.d. Rayleigh model. Both are normalized so that
//! `E‖H‖_F² = N·M`.
//!
//! Channels can be dumped to a plain text format: a header line
//! `M,N,model_tag,seed` followed by `M` rows of `2N` comma-separated numbers
//! holding interleaved real and imaginary parts.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{complex_gaussian, hermitian_eig};
use crate::{CMat, CVec, Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModel {
    MmWave,
    Rayleigh,
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelModel::MmWave => "mmwave",
            ChannelModel::Rayleigh => "rayleigh",
        })
    }
}

impl FromStr for ChannelModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmwave" => Ok(ChannelModel::MmWave),
            "rayleigh" => Ok(ChannelModel::Rayleigh),
            other => Err(Error::invalid(format!("unknown channel model '{other}'"))),
        }
    }
}

/// Clustered ULA channel parameters.
///
/// Transmit angles of every path are uniform on `mean ± spread`. Each cluster
/// draws its own receive angle uniformly on `[0, 2π)` and its paths spread
/// uniformly by `± spread` around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmWaveParams {
    pub n_clusters: usize,
    pub n_paths_per_cluster: usize,
    pub mean_azimuth_deg: f64,
    pub azimuth_spread_deg: f64,
    pub antenna_spacing_wavelengths: f64,
}

impl Default for MmWaveParams {
    fn default() -> Self {
        MmWaveParams {
            n_clusters: 2,
            n_paths_per_cluster: 5,
            mean_azimuth_deg: 45.0,
            azimuth_spread_deg: 7.5,
            antenna_spacing_wavelengths: 0.5,
        }
    }
}

impl MmWaveParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.n_paths_per_cluster == 0 {
            return Err(Error::invalid(
                "mmwave: need at least one cluster and one path",
            ));
        }
        if !(self.azimuth_spread_deg >= 0.0) || !self.mean_azimuth_deg.is_finite() {
            return Err(Error::invalid(
                "mmwave: spread must be >= 0 and mean finite",
            ));
        }
        if !(self.antenna_spacing_wavelengths > 0.0 && self.antenna_spacing_wavelengths.is_finite())
        {
            return Err(Error::invalid("mmwave: antenna spacing must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    White { sigma2: f64 },
    ExpCorrelated { sigma2: f64, rho: f64 },
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::White { sigma2: 1.0 }
    }
}

/// One channel draw with its receive noise covariance.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// `M × N` (receive × transmit).
    pub h: CMat,
    /// `M × M` noise covariance.
    pub noise_cov: CMat,
    pub model: ChannelModel,
    pub seed: u64,
}

impl ChannelRealization {
    pub fn rx_antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn tx_antennas(&self) -> usize {
        self.h.ncols()
    }

    /// Replaces the noise covariance, checking its shape.
    pub fn with_noise(mut self, noise_cov: CMat) -> Result<Self> {
        if noise_cov.shape() != (self.h.nrows(), self.h.nrows()) {
            return Err(Error::invalid(
                "noise covariance does not match receive dimension",
            ));
        }
        self.noise_cov = noise_cov;
        Ok(self)
    }
}

/// Unit-norm ULA response `(1/√n)·exp(j2π d k sinθ)`, `k = 0..n`.
pub fn steering_vector(n: usize, theta_rad: f64, spacing_wavelengths: f64) -> CVec {
    let scale = 1.0 / (n as f64).sqrt();
    let step = 2.0 * PI * spacing_wavelengths * theta_rad.sin();
    CVec::from_fn(n, |k, _| Complex64::from_polar(scale, step * k as f64))
}

fn check_dims(n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::invalid(format!(
            "channel dimensions must be positive, got {m}x{n}"
        )));
    }
    Ok(())
}

/// Draws the clustered channel matrix from `rng`.
pub fn mmwave_matrix<R: Rng + ?Sized>(
    params: &MmWaveParams,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<CMat> {
    params.validate()?;
    check_dims(n, m)?;
    let paths = params.n_clusters * params.n_paths_per_cluster;
    let gamma = ((n * m) as f64 / paths as f64).sqrt();
    let spread = params.azimuth_spread_deg.to_radians();
    let tx_mean = params.mean_azimuth_deg.to_radians();
    let uniform = |rng: &mut R, half: f64| {
        if half > 0.0 {
            rng.random_range(-half..=half)
        } else {
            0.0
        }
    };

    let mut h = CMat::zeros(m, n);
    for _ in 0..params.n_clusters {
        let rx_mean = rng.random_range(0.0..2.0 * PI);
        for _ in 0..params.n_paths_per_cluster {
            let tx = tx_mean + uniform(rng, spread);
            let rx = rx_mean + uniform(rng, spread);
            let gain = complex_gaussian(rng, 1, 1)[(0, 0)];
            let a_rx = steering_vector(m, rx, params.antenna_spacing_wavelengths);
            let a_tx = steering_vector(n, tx, params.antenna_spacing_wavelengths);
            h += (a_rx * a_tx.adjoint()) * gain;
        }
    }
    Ok(h * Complex64::new(gamma, 0.0))
}

/// Clustered channel seeded from `seed`, with unit white noise.
pub fn gen_mmwave(
    params: &MmWaveParams,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<ChannelRealization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = mmwave_matrix(params, n, m, &mut rng)?;
    Ok(ChannelRealization {
        h,
        noise_cov: CMat::identity(m, m),
        model: ChannelModel::MmWave,
        seed,
    })
}

/// i.i.d. CN(0, 1) channel matrix from `rng`.
pub fn rayleigh_matrix<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<CMat> {
    check_dims(n, m)?;
    Ok(complex_gaussian(rng, m, n))
}

pub fn gen_rayleigh(n: usize, m: usize, seed: u64) -> Result<ChannelRealization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = rayleigh_matrix(n, m, &mut rng)?;
    Ok(ChannelRealization {
        h,
        noise_cov: CMat::identity(m, m),
        model: ChannelModel::Rayleigh,
        seed,
    })
}

pub fn noise_covariance(m: usize, model: &NoiseModel) -> Result<CMat> {
    if m == 0 {
        return Err(Error::invalid(
            "noise covariance dimension must be positive",
        ));
    }
    let cov = match *model {
        NoiseModel::White { sigma2 } => {
            check_sigma2(sigma2)?;
            CMat::identity(m, m) * Complex64::new(sigma2, 0.0)
        }
        NoiseModel::ExpCorrelated { sigma2, rho } => {
            check_sigma2(sigma2)?;
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::invalid(format!(
                    "correlation rho must lie in [0, 1), got {rho}"
                )));
            }
            CMat::from_fn(m, m, |k, l| {
                Complex64::new(sigma2 * rho.powi((k as i32 - l as i32).abs()), 0.0)
            })
        }
    };
    let (vals, _) = hermitian_eig(&cov);
    if vals.last().copied().unwrap_or(0.0) <= 0.0 {
        return Err(Error::numeric("noise covariance is not positive definite"));
    }
    Ok(cov)
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::invalid(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    Ok(())
}

/// Writes `h` in the channel dump format; `tag` fills the model column.
pub fn write_matrix_csv<W: Write>(mut w: W, h: &CMat, tag: &str, seed: u64) -> std::io::Result<()> {
    writeln!(w, "{},{},{},{}", h.nrows(), h.ncols(), tag, seed)?;
    for i in 0..h.nrows() {
        let mut line = String::new();
        for j in 0..h.ncols() {
            if j > 0 {
                line.push(',');
            }
            let z = h[(i, j)];
            line.push_str(&format!("{},{}", z.re, z.im));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Parsed contents of a dump file.
#[derive(Debug, Clone)]
pub struct MatrixDump {
    pub matrix: CMat,
    pub tag: String,
    pub seed: u64,
}

pub fn read_matrix_csv<R: BufRead>(r: R, path: &Path) -> Result<MatrixDump> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header".into()))?
        .map_err(|e| Error::io(path, e))?;
    let fields: Vec<&str> = header.trim().split(',').collect();
    if fields.len() != 4 {
        return Err(parse_err(
            1,
            format!("header needs 4 fields, found {}", fields.len()),
        ));
    }
    let rows: usize = fields[0]
        .parse()
        .map_err(|_| parse_err(1, "bad row count".into()))?;
    let cols: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(1, "bad column count".into()))?;
    let seed: u64 = fields[3]
        .parse()
        .map_err(|_| parse_err(1, "bad seed".into()))?;
    let tag = fields[2].to_string();

    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let lineno = i + 2;
        let line = lines
            .next()
            .ok_or_else(|| parse_err(lineno, format!("expected {rows} data rows")))?
            .map_err(|e| Error::io(path, e))?;
        let nums: Vec<f64> = line
            .trim()
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        if nums.len() != 2 * cols {
            return Err(parse_err(
                lineno,
                format!("expected {} values, found {}", 2 * cols, nums.len()),
            ));
        }
        data.extend(nums.chunks(2).map(|c| Complex64::new(c[0], c[1])));
    }
    Ok(MatrixDump {
        matrix: CMat::from_row_slice(rows, cols, &data),
        tag,
        seed,
    })
}

pub fn save_channel(path: &Path, ch: &ChannelRealization) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_matrix_csv(&mut w, &ch.h, &ch.model.to_string(), ch.seed)
        .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads a channel dump; the noise covariance is set to the identity.
pub fn load_channel(path: &Path) -> Result<ChannelRealization> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let dump = read_matrix_csv(BufReader::new(file), path)?;
    let model = dump.tag.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: format!("unknown model tag '{}'", dump.tag),
    })?;
    let m = dump.matrix.nrows();
    Ok(ChannelRealization {
        h: dump.matrix,
        noise_cov: CMat::identity(m, m),
        model,
        seed: dump.seed,
    })
}
