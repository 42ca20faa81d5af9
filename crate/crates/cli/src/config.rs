//! Run files.
//!
//! A run file is TOML with the sections `[system]`, `[channel]`, `[noise]`,
//! `[design]`, `[sweep]` and `[ber]`, all optional, plus any number of
//! `[[variant]]` tables. Each variant carries a `label` and a `set` table of
//! dotted keys applied on top of the base file, so one file can describe
//! several system sizes.

use std::collections::BTreeSet;
use std::fmt;

use hybrid_mimo::analog::{CandidateDist, PhaseProjConfig, QcqpConfig};
use hybrid_mimo::channel::{ChannelModel, MmWaveParams, NoiseModel};
use hybrid_mimo::sim::{
    AlgorithmParams, BerConfig, DesignMethod, ModulationScheme, ObjectiveSpec, SweepConfig,
};
use hybrid_mimo::transceiver::TransceiverKind;
use serde::{Deserialize, Serialize};

pub const PRESETS: [(&str, &str); 6] = [
    ("fig20", include_str!("../presets/fig20.toml")),
    ("fig21", include_str!("../presets/fig21.toml")),
    ("fig22", include_str!("../presets/fig22.toml")),
    ("fig23", include_str!("../presets/fig23.toml")),
    ("fig24", include_str!("../presets/fig24.toml")),
    ("fig25", include_str!("../presets/fig25.toml")),
];

/// Every key a run file may set, as `section.key`.
pub const KNOWN_KEYS: &[&str] = &[
    "system.n",
    "system.m",
    "system.l",
    "system.d",
    "channel.model",
    "channel.n_clusters",
    "channel.n_paths_per_cluster",
    "channel.mean_azimuth_deg",
    "channel.azimuth_spread_deg",
    "channel.antenna_spacing_wavelengths",
    "noise.kind",
    "noise.sigma2",
    "noise.rho",
    "design.methods",
    "design.objective",
    "design.weights",
    "design.kind",
    "design.quant_bits",
    "design.random_k",
    "design.random_dist",
    "design.codebook_points",
    "design.zeta",
    "design.max_iters",
    "design.qcqp_upsilon",
    "design.qcqp_max_iters",
    "design.qcqp_eta",
    "sweep.power_db",
    "sweep.trials",
    "sweep.seed",
    "ber.modulation",
    "ber.kinds",
    "ber.vectors_per_trial",
    "ber.linear_objective",
    "ber.nonlinear_objective",
];

const OBJECTIVES: [&str; 5] = [
    "capacity",
    "sum-mse",
    "max-mse",
    "weighted-mse",
    "nonlinear-equal-streams",
];
const KINDS: [&str; 3] = ["linear", "thp", "dfd"];
const CHANNELS: [&str; 2] = ["mmwave", "rayleigh"];
const NOISE_KINDS: [&str; 2] = ["white", "exp_correlated"];
const DISTS: [&str; 2] = ["uniform01", "std_gaussian"];
const MODULATIONS: [&str; 2] = ["qpsk", "16qam"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct System {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub d: usize,
}

impl Default for System {
    fn default() -> Self {
        System {
            n: 32,
            m: 16,
            l: 4,
            d: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Channel {
    pub model: String,
    pub n_clusters: usize,
    pub n_paths_per_cluster: usize,
    pub mean_azimuth_deg: f64,
    pub azimuth_spread_deg: f64,
    pub antenna_spacing_wavelengths: f64,
}

impl Default for Channel {
    fn default() -> Self {
        let p = MmWaveParams::default();
        Channel {
            model: "mmwave".into(),
            n_clusters: p.n_clusters,
            n_paths_per_cluster: p.n_paths_per_cluster,
            mean_azimuth_deg: p.mean_azimuth_deg,
            azimuth_spread_deg: p.azimuth_spread_deg,
            antenna_spacing_wavelengths: p.antenna_spacing_wavelengths,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Noise {
    pub kind: String,
    pub sigma2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

impl Default for Noise {
    fn default() -> Self {
        Noise {
            kind: "white".into(),
            sigma2: 1.0,
            rho: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Design {
    pub methods: Vec<String>,
    pub objective: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quant_bits: Option<u32>,
    pub random_k: usize,
    pub random_dist: String,
    pub codebook_points: usize,
    pub zeta: f64,
    pub max_iters: usize,
    pub qcqp_upsilon: f64,
    pub qcqp_max_iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qcqp_eta: Option<f64>,
}

impl Default for Design {
    fn default() -> Self {
        let alg = AlgorithmParams::default();
        Design {
            methods: vec!["phase-proj".into()],
            objective: "capacity".into(),
            weights: None,
            kind: "linear".into(),
            quant_bits: None,
            random_k: alg.random_k,
            random_dist: "uniform01".into(),
            codebook_points: alg.codebook_points,
            zeta: alg.phase_proj.zeta,
            max_iters: alg.phase_proj.max_iters,
            qcqp_upsilon: alg.qcqp.upsilon,
            qcqp_max_iters: alg.qcqp.max_iters,
            qcqp_eta: alg.qcqp.eta,
        }
    }
}

/// Power axis in dB: an explicit list or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PowerGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl PowerGrid {
    pub fn points(&self) -> Vec<f64> {
        match self {
            PowerGrid::List(v) => v.clone(),
            PowerGrid::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Vec::new();
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count).map(|k| start + k as f64 * step).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub power_db: PowerGrid,
    pub trials: usize,
    pub seed: u64,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            power_db: PowerGrid::Range {
                start: -20.0,
                stop: 10.0,
                step: 5.0,
            },
            trials: 200,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ber {
    pub modulation: String,
    pub kinds: Vec<String>,
    pub vectors_per_trial: usize,
    pub linear_objective: String,
    pub nonlinear_objective: String,
}

impl Default for Ber {
    fn default() -> Self {
        Ber {
            modulation: "16qam".into(),
            kinds: KINDS.iter().map(|s| s.to_string()).collect(),
            vectors_per_trial: BerConfig::default().vectors_per_trial,
            linear_objective: "capacity".into(),
            nonlinear_objective: "nonlinear-equal-streams".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    #[serde(default)]
    pub set: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunFile {
    pub system: System,
    pub channel: Channel,
    pub noise: Noise,
    pub design: Design,
    pub sweep: Sweep,
    pub ber: Ber,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub variant: Vec<Variant>,
}

/// Where a configuration problem sits, with an optional hint.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub location: String,
    pub message: String,
    pub help: Option<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)?;
        if let Some(h) = &self.help {
            write!(f, "\n  help: {h}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Run-file text and the name used in diagnostics.
#[derive(Debug, Clone)]
pub struct Source {
    pub name: String,
    pub text: String,
}

impl Source {
    pub fn preset(name: &str) -> Result<Source, ConfigError> {
        match PRESETS.iter().find(|(n, _)| *n == name) {
            Some((n, text)) => Ok(Source {
                name: format!("preset:{n}"),
                text: text.to_string(),
            }),
            None => Err(ConfigError {
                location: "--preset".into(),
                message: format!("unknown preset '{name}'"),
                help: suggestion(name, PRESETS.iter().map(|(n, _)| *n)),
            }),
        }
    }

    /// Built-in defaults, used when neither a file nor a preset is given.
    pub fn defaults() -> Source {
        Source {
            name: "defaults".into(),
            text: String::new(),
        }
    }
}

/// A `key=value` assignment applied after the run file.
#[derive(Debug, Clone)]
pub struct Override {
    pub key: String,
    pub raw: String,
    /// Flag or variable that produced it, for diagnostics.
    pub origin: String,
}

impl Override {
    pub fn new(key: &str, raw: impl Into<String>, origin: impl Into<String>) -> Self {
        Override {
            key: key.into(),
            raw: raw.into(),
            origin: origin.into(),
        }
    }

    /// Parses `section.key=value` as written after `--set`.
    pub fn parse_assignment(text: &str) -> Result<Self, ConfigError> {
        match text.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                Ok(Override::new(k.trim(), v.trim(), format!("--set {text}")))
            }
            _ => Err(ConfigError {
                location: format!("--set {text}"),
                message: "expected KEY=VALUE".into(),
                help: Some("for example --set sweep.trials=100".into()),
            }),
        }
    }

    fn value(&self) -> toml::Value {
        // bare words that are not TOML literals are taken as strings
        format!("v = {}", self.raw)
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(self.raw.clone()))
    }
}

/// A validated run: the base file plus one entry per variant.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub source_name: String,
    pub run: RunFile,
    /// `(label, run)` pairs; a single unlabeled entry when there are no variants.
    pub expanded: Vec<(Option<String>, RunFile)>,
    pub overrides: Vec<(String, String)>,
}

pub fn suggestion<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<String> {
    let limit = (word.chars().count() / 3).max(2);
    candidates
        .into_iter()
        .map(|c| (strsim::levenshtein(word, c), c))
        .filter(|(d, _)| *d <= limit)
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| format!("did you mean '{c}'?"))
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line on which `section.key` is assigned, if it appears in `text`.
pub fn locate(text: &str, dotted: &str) -> Option<usize> {
    let (section, key) = dotted.split_once('.')?;
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(h) = t.strip_prefix("[[").and_then(|r| r.split("]]").next()) {
            current = h.trim().to_string();
            continue;
        }
        if let Some(h) = t.strip_prefix('[').and_then(|r| r.split(']').next()) {
            current = h.trim().to_string();
            continue;
        }
        let Some((lhs, _)) = t.split_once('=') else {
            continue;
        };
        let lhs = lhs.trim().trim_matches('"');
        if (current == section && lhs == key) || (current.is_empty() && lhs == dotted) {
            return Some(i + 1);
        }
    }
    None
}

struct Locator<'a> {
    source: &'a Source,
    overridden: Vec<(String, String)>,
}

impl Locator<'_> {
    fn at(&self, key: &str) -> String {
        if let Some((_, origin)) = self.overridden.iter().rev().find(|(k, _)| k == key) {
            return origin.clone();
        }
        match locate(&self.source.text, key) {
            Some(line) => format!("{}:{line}: {key}", self.source.name),
            None => format!("{}: {key}", self.source.name),
        }
    }

    fn error(&self, key: &str, message: impl Into<String>, help: Option<String>) -> ConfigError {
        ConfigError {
            location: self.at(key),
            message: message.into(),
            help,
        }
    }
}

fn check_known(table: &toml::Table, source: &Source) -> Result<(), ConfigError> {
    for (section, value) in table {
        if section == "variant" {
            let Some(list) = value.as_array() else {
                return Err(ConfigError {
                    location: format!("{}: variant", source.name),
                    message: "variant must be an array of tables ([[variant]])".into(),
                    help: None,
                });
            };
            for v in list {
                for key in v.as_table().into_iter().flat_map(|t| t.keys()) {
                    if key != "label" && key != "set" {
                        return Err(ConfigError {
                            location: format!("{}: variant.{key}", source.name),
                            message: format!("unknown variant key '{key}'"),
                            help: suggestion(key, ["label", "set"]),
                        });
                    }
                }
            }
            continue;
        }
        let Some(inner) = value.as_table() else {
            let line = locate_section_key(&source.text, section);
            return Err(ConfigError {
                location: with_line(source, line, section),
                message: format!("'{section}' must be a section"),
                help: suggestion(section, sections()),
            });
        };
        if !sections().any(|s| s == section) {
            let line = locate_section_header(&source.text, section);
            return Err(ConfigError {
                location: with_line(source, line, section),
                message: format!("unknown section '{section}'"),
                help: suggestion(section, sections()),
            });
        }
        for key in inner.keys() {
            let dotted = format!("{section}.{key}");
            if !KNOWN_KEYS.contains(&dotted.as_str()) {
                return Err(ConfigError {
                    location: with_line(source, locate(&source.text, &dotted), &dotted),
                    message: format!("unknown key '{dotted}'"),
                    help: suggestion(&dotted, KNOWN_KEYS.iter().copied()),
                });
            }
        }
    }
    Ok(())
}

fn sections() -> impl Iterator<Item = &'static str> {
    ["system", "channel", "noise", "design", "sweep", "ber"].into_iter()
}

fn with_line(source: &Source, line: Option<usize>, what: &str) -> String {
    match line {
        Some(l) => format!("{}:{l}: {what}", source.name),
        None => format!("{}: {what}", source.name),
    }
}

fn locate_section_header(text: &str, section: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            l.trim()
                .trim_start_matches('[')
                .trim_end_matches(']')
                .trim()
                == section
                && l.trim().starts_with('[')
        })
        .map(|i| i + 1)
}

fn locate_section_key(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| l.split_once('=').is_some_and(|(k, _)| k.trim() == key))
        .map(|i| i + 1)
}

fn check_key(key: &str, origin: &str) -> Result<(), ConfigError> {
    if KNOWN_KEYS.contains(&key) {
        return Ok(());
    }
    Err(ConfigError {
        location: origin.to_string(),
        message: format!("unknown key '{key}'"),
        help: suggestion(key, KNOWN_KEYS.iter().copied()),
    })
}

fn assign(table: &mut toml::Table, key: &str, value: toml::Value) {
    let (section, field) = key.split_once('.').expect("known keys are dotted");
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    if !entry.is_table() {
        *entry = toml::Value::Table(toml::Table::new());
    }
    entry
        .as_table_mut()
        .unwrap()
        .insert(field.to_string(), value);
}

fn strip_toml_error(e: &toml::de::Error) -> String {
    e.message().trim().to_string()
}

/// Parses, overrides and validates a run file.
pub fn load(source: Source, overrides: &[Override]) -> Result<LoadedConfig, ConfigError> {
    let table: toml::Table = source
        .text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError {
            location: with_line(
                &source,
                e.span().map(|s| line_of_offset(&source.text, s.start)),
                "syntax",
            ),
            message: strip_toml_error(&e),
            help: None,
        })?;
    check_known(&table, &source)?;
    toml::from_str::<RunFile>(&source.text).map_err(|e| ConfigError {
        location: with_line(
            &source,
            e.span().map(|s| line_of_offset(&source.text, s.start)),
            "value",
        ),
        message: strip_toml_error(&e),
        help: None,
    })?;

    let mut table = table;
    let mut overridden = Vec::new();
    for o in overrides {
        check_key(&o.key, &o.origin)?;
        assign(&mut table, &o.key, o.value());
        overridden.push((o.key.clone(), o.origin.clone()));
    }
    let run: RunFile = table
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError {
            location: overridden
                .last()
                .map(|(_, o)| o.clone())
                .unwrap_or_else(|| source.name.clone()),
            message: strip_toml_error(&e),
            help: None,
        })?;

    let locator = Locator {
        source: &source,
        overridden: overridden.clone(),
    };
    validate(&run, &locator)?;

    let mut expanded = Vec::new();
    if run.variant.is_empty() {
        expanded.push((None, run.clone()));
    } else {
        let mut labels = BTreeSet::new();
        for v in &run.variant {
            let origin = format!("{}: variant '{}'", source.name, v.label);
            if v.label.is_empty() || !labels.insert(v.label.clone()) {
                return Err(ConfigError {
                    location: origin,
                    message: "variant labels must be unique and non-empty".into(),
                    help: None,
                });
            }
            let mut t = table.clone();
            t.remove("variant");
            for (key, value) in &v.set {
                check_key(key, &origin)?;
                assign(&mut t, key, value.clone());
            }
            let vr: RunFile = t.try_into().map_err(|e: toml::de::Error| ConfigError {
                location: origin.clone(),
                message: strip_toml_error(&e),
                help: None,
            })?;
            let mut marks = overridden.clone();
            marks.extend(v.set.keys().map(|k| (k.clone(), origin.clone())));
            validate(
                &vr,
                &Locator {
                    source: &source,
                    overridden: marks,
                },
            )?;
            expanded.push((Some(v.label.clone()), vr));
        }
    }
    Ok(LoadedConfig {
        source_name: source.name,
        run,
        expanded,
        overrides: overrides
            .iter()
            .map(|o| (o.key.clone(), o.raw.clone()))
            .collect(),
    })
}

fn one_of(loc: &Locator, key: &str, value: &str, allowed: &[&str]) -> Result<(), ConfigError> {
    if allowed.contains(&value) {
        return Ok(());
    }
    let help = suggestion(value, allowed.iter().copied())
        .or_else(|| Some(format!("expected one of: {}", allowed.join(", "))));
    Err(loc.error(key, format!("unknown value '{value}'"), help))
}

fn validate(run: &RunFile, loc: &Locator) -> Result<(), ConfigError> {
    let s = &run.system;
    if s.n == 0 || s.m == 0 {
        return Err(loc.error(
            if s.n == 0 { "system.n" } else { "system.m" },
            "antenna counts must be positive",
            None,
        ));
    }
    if s.d == 0 {
        return Err(loc.error("system.d", "at least one stream is required", None));
    }
    if s.d > s.l {
        return Err(loc.error(
            "system.d",
            format!("D = {} exceeds L = {} (need D <= L <= min(N, M))", s.d, s.l),
            None,
        ));
    }
    if s.l > s.n.min(s.m) {
        return Err(loc.error(
            "system.l",
            format!(
                "L = {} exceeds min(N, M) = {} (need D <= L <= min(N, M))",
                s.l,
                s.n.min(s.m)
            ),
            None,
        ));
    }
    one_of(loc, "channel.model", &run.channel.model, &CHANNELS)?;
    one_of(loc, "noise.kind", &run.noise.kind, &NOISE_KINDS)?;
    if run.noise.kind == "exp_correlated" && run.noise.rho.is_none() {
        return Err(loc.error("noise.rho", "exp_correlated noise needs rho", None));
    }
    if run.design.methods.is_empty() {
        return Err(loc.error("design.methods", "at least one method is required", None));
    }
    let tags: Vec<&str> = DesignMethod::ALL.iter().map(|m| m.tag()).collect();
    for m in &run.design.methods {
        one_of(loc, "design.methods", m, &tags)?;
    }
    one_of(loc, "design.objective", &run.design.objective, &OBJECTIVES)?;
    if run.design.objective == "weighted-mse" && run.design.weights.is_none() {
        return Err(loc.error(
            "design.weights",
            "weighted-mse needs one weight per stream",
            None,
        ));
    }
    one_of(loc, "design.kind", &run.design.kind, &KINDS)?;
    one_of(loc, "design.random_dist", &run.design.random_dist, &DISTS)?;
    one_of(loc, "ber.modulation", &run.ber.modulation, &MODULATIONS)?;
    for k in &run.ber.kinds {
        one_of(loc, "ber.kinds", k, &KINDS)?;
    }
    one_of(
        loc,
        "ber.linear_objective",
        &run.ber.linear_objective,
        &OBJECTIVES,
    )?;
    one_of(
        loc,
        "ber.nonlinear_objective",
        &run.ber.nonlinear_objective,
        &OBJECTIVES,
    )?;
    if run.sweep.power_db.points().is_empty() {
        return Err(loc.error(
            "sweep.power_db",
            "power grid is empty",
            Some("use a list or { start, stop, step } with step > 0 and stop >= start".into()),
        ));
    }
    if run.sweep.trials == 0 {
        return Err(loc.error("sweep.trials", "trials must be at least 1", None));
    }

    for method in run.methods() {
        run.sweep_config(method)
            .validate()
            .map_err(|e| loc.error("design.methods", format!("{method}: {e}"), None))?;
    }
    run.ber_config()
        .validate(s.d)
        .map_err(|e| loc.error("ber.kinds", e.to_string(), None))?;
    Ok(())
}

fn objective_spec(name: &str, weights: &Option<Vec<f64>>) -> ObjectiveSpec {
    match name {
        "sum-mse" => ObjectiveSpec::SumMse,
        "max-mse" => ObjectiveSpec::MaxMse,
        "weighted-mse" => ObjectiveSpec::WeightedMse {
            weights: weights.clone().unwrap_or_default(),
        },
        "nonlinear-equal-streams" => ObjectiveSpec::NonlinearEqualStreams,
        _ => ObjectiveSpec::Capacity,
    }
}

impl RunFile {
    /// Methods in file order; call only after validation.
    pub fn methods(&self) -> Vec<DesignMethod> {
        self.design
            .methods
            .iter()
            .filter_map(|m| m.parse().ok())
            .collect()
    }

    pub fn sweep_config(&self, method: DesignMethod) -> SweepConfig {
        let ch = &self.channel;
        let d = &self.design;
        SweepConfig {
            n: self.system.n,
            m: self.system.m,
            l: self.system.l,
            d: self.system.d,
            channel: ch.model.parse().unwrap_or(ChannelModel::MmWave),
            mmwave: MmWaveParams {
                n_clusters: ch.n_clusters,
                n_paths_per_cluster: ch.n_paths_per_cluster,
                mean_azimuth_deg: ch.mean_azimuth_deg,
                azimuth_spread_deg: ch.azimuth_spread_deg,
                antenna_spacing_wavelengths: ch.antenna_spacing_wavelengths,
            },
            noise: match self.noise.kind.as_str() {
                "exp_correlated" => NoiseModel::ExpCorrelated {
                    sigma2: self.noise.sigma2,
                    rho: self.noise.rho.unwrap_or(0.0),
                },
                _ => NoiseModel::White {
                    sigma2: self.noise.sigma2,
                },
            },
            method,
            objective: objective_spec(&d.objective, &d.weights),
            kind: d.kind.parse().unwrap_or(TransceiverKind::Linear),
            power_db: self.sweep.power_db.points(),
            trials: self.sweep.trials,
            master_seed: self.sweep.seed,
            quant_bits: d.quant_bits,
            algorithms: AlgorithmParams {
                phase_proj: PhaseProjConfig {
                    zeta: d.zeta,
                    max_iters: d.max_iters,
                },
                qcqp: QcqpConfig {
                    eta: d.qcqp_eta,
                    upsilon: d.qcqp_upsilon,
                    max_iters: d.qcqp_max_iters,
                },
                random_k: d.random_k,
                random_dist: if d.random_dist == "std_gaussian" {
                    CandidateDist::StdGaussian
                } else {
                    CandidateDist::Uniform01
                },
                codebook_points: d.codebook_points,
            },
        }
    }

    pub fn ber_config(&self) -> BerConfig {
        BerConfig {
            modulation: self
                .ber
                .modulation
                .parse()
                .unwrap_or(ModulationScheme::Qam16),
            kinds: self
                .ber
                .kinds
                .iter()
                .filter_map(|k| k.parse().ok())
                .collect(),
            vectors_per_trial: self.ber.vectors_per_trial,
            linear_objective: objective_spec(&self.ber.linear_objective, &self.design.weights),
            nonlinear_objective: objective_spec(
                &self.ber.nonlinear_objective,
                &self.design.weights,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(text: &str) -> Source {
        Source {
            name: "run.toml".into(),
            text: text.into(),
        }
    }

    #[test]
    fn presets_are_valid() {
        for (name, _) in PRESETS {
            let cfg = load(Source::preset(name).unwrap(), &[]).unwrap();
            assert!(!cfg.expanded.is_empty(), "{name}");
        }
    }

    #[test]
    fn empty_file_uses_defaults() {
        let cfg = load(Source::defaults(), &[]).unwrap();
        assert_eq!(cfg.run, RunFile::default());
        assert_eq!(
            cfg.run.sweep.power_db.points(),
            vec![-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0]
        );
    }

    #[test]
    fn range_grid_is_inclusive() {
        let g = PowerGrid::Range {
            start: -12.0,
            stop: -2.0,
            step: 2.0,
        };
        assert_eq!(g.points(), vec![-12.0, -10.0, -8.0, -6.0, -4.0, -2.0]);
        let bad = PowerGrid::Range {
            start: 0.0,
            stop: 1.0,
            step: 0.0,
        };
        assert!(bad.points().is_empty());
    }

    #[test]
    fn streams_above_rf_chains_name_the_key_and_line() {
        let e = load(src("[system]\nn = 8\nm = 8\nl = 2\nd = 3\n"), &[]).unwrap_err();
        assert_eq!(e.location, "run.toml:5: system.d");
        assert!(e.message.contains("D = 3 exceeds L = 2"));
    }

    #[test]
    fn unknown_method_gets_a_suggestion() {
        let e = load(src("[design]\nmethods = [\"phase-prj\"]\n"), &[]).unwrap_err();
        assert_eq!(e.location, "run.toml:2: design.methods");
        assert_eq!(e.help.as_deref(), Some("did you mean 'phase-proj'?"));
    }

    #[test]
    fn unknown_key_gets_a_suggestion() {
        let e = load(src("[sweep]\ntrails = 3\n"), &[]).unwrap_err();
        assert_eq!(e.location, "run.toml:2: sweep.trails");
        assert_eq!(e.help.as_deref(), Some("did you mean 'sweep.trials'?"));
        let e = load(src("[sytem]\nn = 3\n"), &[]).unwrap_err();
        assert_eq!(e.help.as_deref(), Some("did you mean 'system'?"));
    }

    #[test]
    fn syntax_and_type_errors_carry_lines() {
        let e = load(src("[system]\nn = \n"), &[]).unwrap_err();
        assert!(e.location.starts_with("run.toml:2"), "{}", e.location);
        let e = load(src("[system]\n\nn = \"many\"\n"), &[]).unwrap_err();
        assert!(e.location.starts_with("run.toml:3"), "{}", e.location);
    }

    #[test]
    fn overrides_apply_and_are_blamed() {
        let o = Override::parse_assignment("sweep.trials=7").unwrap();
        let cfg = load(Source::defaults(), &[o]).unwrap();
        assert_eq!(cfg.run.sweep.trials, 7);

        let o = Override::parse_assignment("system.d=9").unwrap();
        let e = load(Source::defaults(), &[o]).unwrap_err();
        assert_eq!(e.location, "--set system.d=9");

        let o = Override::parse_assignment("sweep.trail=1").unwrap();
        let e = load(Source::defaults(), &[o]).unwrap_err();
        assert_eq!(e.help.as_deref(), Some("did you mean 'sweep.trials'?"));

        let o = Override::new("design.methods", "[\"omp\", \"random\"]", "--methods");
        let cfg = load(Source::defaults(), &[o]).unwrap();
        assert_eq!(
            cfg.run.methods(),
            vec![DesignMethod::Omp, DesignMethod::Random]
        );

        let o = Override::parse_assignment("channel.model=rayleigh").unwrap();
        let cfg = load(Source::defaults(), &[o]).unwrap();
        assert_eq!(cfg.run.channel.model, "rayleigh");
    }

    #[test]
    fn variants_expand_over_the_base() {
        let cfg = load(Source::preset("fig24").unwrap(), &[]).unwrap();
        let ns: Vec<(Option<String>, usize)> = cfg
            .expanded
            .iter()
            .map(|(l, r)| (l.clone(), r.system.n))
            .collect();
        assert_eq!(
            ns,
            vec![(Some("32x16".into()), 32), (Some("64x16".into()), 64)]
        );
    }

    #[test]
    fn conversion_matches_the_file() {
        let cfg = load(Source::preset("fig23").unwrap(), &[]).unwrap();
        let sc = cfg.run.sweep_config(DesignMethod::PhaseProj);
        assert_eq!((sc.n, sc.m, sc.l, sc.d), (32, 16, 4, 4));
        assert_eq!(sc.quant_bits, Some(2));
        assert_eq!(sc.algorithms.random_k, 10);
        assert_eq!(sc.power_db.len(), 9);
        let ber = load(Source::preset("fig25").unwrap(), &[])
            .unwrap()
            .run
            .ber_config();
        assert_eq!(
            ber.kinds,
            vec![
                TransceiverKind::Linear,
                TransceiverKind::Thp,
                TransceiverKind::Dfd
            ]
        );
        assert_eq!(ber.modulation, ModulationScheme::Qam16);
    }

    #[test]
    fn nonlinear_objective_with_linear_kind_is_rejected() {
        let e = load(
            src("[design]\nobjective = \"nonlinear-equal-streams\"\n"),
            &[],
        )
        .unwrap_err();
        assert!(
            e.message.contains("requires kind thp or dfd"),
            "{}",
            e.message
        );
    }
}
