//! Square QAM constellations with per-axis Gray labelling, the THP modulo
//! operator, THP encoding and decision-feedback detection.

use serde::{Deserialize, Serialize};

use crate::{CMat, Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModulationScheme {
    #[serde(rename = "qpsk")]
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
}

/// Constellation point identified by its level index on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Symbol {
    pub i: u8,
    pub q: u8,
}

impl std::str::FromStr for ModulationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" | "4qam" => Ok(ModulationScheme::Qpsk),
            "16qam" | "qam16" => Ok(ModulationScheme::Qam16),
            other => Err(Error::invalid(format!("unknown modulation '{other}'"))),
        }
    }
}

impl ModulationScheme {
    pub fn order(self) -> usize {
        match self {
            ModulationScheme::Qpsk => 4,
            ModulationScheme::Qam16 => 16,
        }
    }

    pub fn bits_per_axis(self) -> u32 {
        match self {
            ModulationScheme::Qpsk => 1,
            ModulationScheme::Qam16 => 2,
        }
    }

    pub fn bits_per_symbol(self) -> u32 {
        2 * self.bits_per_axis()
    }

    pub fn levels_per_axis(self) -> usize {
        1 << self.bits_per_axis()
    }

    /// Minimum distance of the unit-energy constellation.
    pub fn d_min(self) -> f64 {
        let l = self.levels_per_axis() as f64;
        // mean energy of a square M-QAM with spacing d is d² (M − 1) / 6
        (6.0 / (l * l - 1.0)).sqrt()
    }

    /// Period of the THP modulo lattice: `√M · d_min`.
    pub fn modulo_base(self) -> f64 {
        self.levels_per_axis() as f64 * self.d_min()
    }

    fn level(self, index: u8) -> f64 {
        let l = self.levels_per_axis() as f64;
        (2.0 * index as f64 - (l - 1.0)) * self.d_min() / 2.0
    }

    pub fn point(self, s: Symbol) -> Complex64 {
        Complex64::new(self.level(s.i), self.level(s.q))
    }

    fn slice_axis(self, x: f64) -> u8 {
        let l = self.levels_per_axis() as f64;
        let pos = ((x / (self.d_min() / 2.0) + (l - 1.0)) / 2.0).round();
        pos.clamp(0.0, l - 1.0) as u8
    }

    /// Nearest constellation point.
    pub fn slice(self, z: Complex64) -> Symbol {
        Symbol {
            i: self.slice_axis(z.re),
            q: self.slice_axis(z.im),
        }
    }

    /// Gray label of a symbol, in-phase bits high.
    pub fn bits(self, s: Symbol) -> u32 {
        let gray = |p: u8| (p ^ (p >> 1)) as u32;
        (gray(s.i) << self.bits_per_axis()) | gray(s.q)
    }

    pub fn bit_errors(self, a: Symbol, b: Symbol) -> u32 {
        (self.bits(a) ^ self.bits(b)).count_ones()
    }

    pub fn all_symbols(self) -> Vec<Symbol> {
        let l = self.levels_per_axis() as u8;
        (0..l)
            .flat_map(|i| (0..l).map(move |q| Symbol { i, q }))
            .collect()
    }

    pub fn random_symbol<R: rand::Rng + ?Sized>(self, rng: &mut R) -> Symbol {
        let l = self.levels_per_axis() as u8;
        Symbol {
            i: rng.random_range(0..l),
            q: rng.random_range(0..l),
        }
    }
}

fn wrap(x: f64, base: f64) -> f64 {
    x - base * ((x + base / 2.0) / base).floor()
}

/// Componentwise reduction of real and imaginary parts into `[−base/2, base/2)`.
pub fn thp_modulo(v: &[Complex64], base: f64) -> Vec<Complex64> {
    v.iter()
        .map(|z| Complex64::new(wrap(z.re, base), wrap(z.im, base)))
        .collect()
}

fn check_feedback(b: &CMat, len: usize) -> Result<()> {
    if b.shape() != (len, len) {
        return Err(Error::invalid(format!(
            "feedback matrix is {}x{}, expected {len}x{len}",
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// Successive THP encoding `b_k = mod(a_k − Σ_{l<k} B_kl b_l)`.
pub fn thp_encode(a: &[Complex64], b: &CMat, base: f64) -> Result<Vec<Complex64>> {
    check_feedback(b, a.len())?;
    let mut out: Vec<Complex64> = Vec::with_capacity(a.len());
    for k in 0..a.len() {
        let interference: Complex64 = (0..k).map(|l| b[(k, l)] * out[l]).sum();
        let v = a[k] - interference;
        out.push(Complex64::new(wrap(v.re, base), wrap(v.im, base)));
    }
    Ok(out)
}

/// Decision-feedback detection with unit stream gains.
pub fn dfd_detect(z: &[Complex64], b: &CMat, scheme: ModulationScheme) -> Result<Vec<Symbol>> {
    dfd_detect_scaled(z, b, &vec![1.0; z.len()], scheme)
}

/// Decision-feedback detection: stream `k` is sliced from
/// `(z_k − Σ_{l<k} B_kl â_l) / gain_k`.
pub fn dfd_detect_scaled(
    z: &[Complex64],
    b: &CMat,
    gains: &[f64],
    scheme: ModulationScheme,
) -> Result<Vec<Symbol>> {
    check_feedback(b, z.len())?;
    if gains.len() != z.len() {
        return Err(Error::invalid("one gain per stream required"));
    }
    let mut points: Vec<Complex64> = Vec::with_capacity(z.len());
    let mut out = Vec::with_capacity(z.len());
    for k in 0..z.len() {
        let cancel: Complex64 = (0..k).map(|l| b[(k, l)] * points[l]).sum();
        let s = scheme.slice((z[k] - cancel) / gains[k]);
        points.push(scheme.point(s));
        out.push(s);
    }
    Ok(out)
}
