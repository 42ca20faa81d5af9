//! `hybrid-mimo`: single designs, Monte-Carlo sweeps and channel dumps.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O error.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use hybrid_mimo::channel::{noise_covariance, write_matrix_csv};
use hybrid_mimo::linalg::{modulus_residual, real_diag};
use hybrid_mimo::sim::{
    build_id, complete_design, db_to_linear, prepare_analog, run_ber_sweep, run_se_sweep,
    serialize_result, sidecar_path, spectral_efficiency, trial_channel, trial_channel_seed,
    trial_design_seed, with_workers, DesignMethod, SweepResult, CSV_HEADER,
};
use hybrid_mimo::transceiver::{mse_matrix_general, mse_matrix_linear};
use hybrid_mimo::CMat;
use serde_json::json;

use config::{ConfigError, LoadedConfig, Override, RunFile, Source};

const SEED_ENV: &str = "HYBRID_MIMO_SEED";

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<hybrid_mimo::Error> for CliError {
    fn from(e: hybrid_mimo::Error) -> Self {
        use hybrid_mimo::Error as E;
        match &e {
            E::Io { .. } | E::Parse { .. } => CliError::Io(e.to_string()),
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Prefixes a core error with the pipeline stage that raised it.
fn at_stage(stage: &'static str) -> impl Fn(hybrid_mimo::Error) -> CliError {
    move |e| match CliError::from(e) {
        CliError::Numerical(m) => CliError::Numerical(format!("{stage}: {m}")),
        CliError::Invalid(m) => CliError::Invalid(format!("{stage}: {m}")),
        other => other,
    }
}

#[derive(Parser)]
#[command(
    name = "hybrid-mimo",
    version,
    about = "Hybrid analog/digital MIMO transceiver design"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Run-file selection and overrides shared by all commands.
///
/// Precedence, lowest first: run file, `HYBRID_MIMO_SEED`, named flags, `--set`.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// TOML run file.
    #[arg(short, long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in run file (fig20 .. fig25).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Override any run-file key, e.g. `--set sweep.trials=100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Transmit antennas.
    #[arg(long)]
    n: Option<usize>,
    /// Receive antennas.
    #[arg(long)]
    m: Option<usize>,
    /// RF chains.
    #[arg(long)]
    l: Option<usize>,
    /// Data streams.
    #[arg(long)]
    d: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Phase-shifter resolution in bits.
    #[arg(long)]
    quant_bits: Option<u32>,
    /// Candidates drawn by the random design.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated design methods; defaults to the run file's list.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Output directory.
    #[arg(short, long, default_value = "results")]
    out: PathBuf,
    /// Worker threads (0 picks one per core).
    #[arg(short, long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Design one transceiver and print a JSON summary.
    Design {
        #[command(flatten)]
        config: ConfigArgs,
        /// Design method; defaults to the first in the run file.
        #[arg(long)]
        method: Option<String>,
        /// Transmit power in dB.
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        power_db: f64,
        /// Trial whose channel is used.
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Write the channel and all transceiver matrices as CSV into this directory.
        #[arg(long, value_name = "DIR")]
        dump: Option<PathBuf>,
    },
    /// Spectral-efficiency sweep over the power grid.
    SweepSe(SweepArgs),
    /// Bit-error-rate sweep over the power grid.
    SweepBer(SweepArgs),
    /// Write the channel matrix of one trial.
    GenChannel {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Check a run file and report what it would run.
    ValidateConfig {
        /// Run file; same as `--config`.
        path: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        /// Print the resolved run file as TOML.
        #[arg(long)]
        print: bool,
    },
}

fn load_config(
    args: &ConfigArgs,
    path: Option<&Path>,
    extra: Vec<Override>,
) -> Result<LoadedConfig> {
    let source = match (path.or(args.config.as_deref()), &args.preset) {
        (Some(p), _) => Source {
            name: p.display().to_string(),
            text: fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
        },
        (None, Some(name)) => Source::preset(name)?,
        (None, None) => Source::defaults(),
    };
    let mut overrides = Vec::new();
    if let Ok(raw) = std::env::var(SEED_ENV) {
        if raw.trim().parse::<u64>().is_err() {
            return Err(ConfigError {
                location: SEED_ENV.into(),
                message: format!("'{raw}' is not an unsigned integer"),
                help: None,
            }
            .into());
        }
        overrides.push(Override::new("sweep.seed", raw.trim(), SEED_ENV));
    }
    let flags: [(&str, &str, Option<String>); 8] = [
        ("system.n", "--n", args.n.map(|v| v.to_string())),
        ("system.m", "--m", args.m.map(|v| v.to_string())),
        ("system.l", "--l", args.l.map(|v| v.to_string())),
        ("system.d", "--d", args.d.map(|v| v.to_string())),
        ("sweep.seed", "--seed", args.seed.map(|v| v.to_string())),
        (
            "sweep.trials",
            "--trials",
            args.trials.map(|v| v.to_string()),
        ),
        (
            "design.quant_bits",
            "--quant-bits",
            args.quant_bits.map(|v| v.to_string()),
        ),
        ("design.random_k", "--k", args.k.map(|v| v.to_string())),
    ];
    for (key, flag, value) in flags {
        if let Some(v) = value {
            overrides.push(Override::new(key, v.clone(), format!("{flag} {v}")));
        }
    }
    overrides.extend(extra);
    for s in &args.set {
        overrides.push(Override::parse_assignment(s)?);
    }
    Ok(config::load(source, &overrides)?)
}

fn methods_override(methods: &[String], origin: &str) -> Option<Override> {
    if methods.is_empty() {
        return None;
    }
    let list: Vec<&str> = methods.iter().map(|m| m.trim()).collect();
    let raw = serde_json::to_string(&list).expect("strings serialize");
    Some(Override::new("design.methods", raw, origin))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_matrix(path: &Path, m: &CMat, tag: &str, seed: u64) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_matrix_csv(&mut w, m, tag, seed).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

fn design(
    args: &ConfigArgs,
    method: Option<&str>,
    power_db: f64,
    trial: usize,
    dump: Option<&Path>,
) -> Result<()> {
    let extra = method.and_then(|m| methods_override(&[m.to_string()], &format!("--method {m}")));
    let loaded = load_config(args, None, extra.into_iter().collect())?;
    if loaded.expanded.len() > 1 {
        eprintln!(
            "note: run file has {} variants; designing for '{}'",
            loaded.expanded.len(),
            loaded.expanded[0].0.as_deref().unwrap_or("")
        );
    }
    let run = &loaded.expanded[0].1;
    let method = run.methods()[0];
    let cfg = run.sweep_config(method);
    if trial >= cfg.trials {
        eprintln!(
            "note: trial {trial} lies beyond sweep.trials = {}",
            cfg.trials
        );
    }
    let rn = noise_covariance(cfg.m, &cfg.noise).map_err(at_stage("noise covariance"))?;
    let h = trial_channel(&cfg, trial).map_err(at_stage("channel generation"))?;
    let channel_seed = trial_channel_seed(&cfg, trial);
    let design_seed = trial_design_seed(&cfg, trial);
    let power = db_to_linear(power_db);
    let stages =
        prepare_analog(&cfg, &h, &rn, design_seed).map_err(at_stage("analog design"))?;
    let t = complete_design(
        &cfg,
        &stages,
        &h,
        &rn,
        &cfg.objective.to_objective(),
        cfg.kind,
        power,
    )
    .map_err(at_stage("digital design"))?;
    let se = spectral_efficiency(&h, &rn, &t).map_err(at_stage("evaluation"))?;
    let mse = mse_matrix_linear(&h, &rn, &t.f_a, &t.f_d, &t.g_a)
        .and_then(|phi| mse_matrix_general(&phi, &t.b))
        .map_err(at_stage("evaluation"))?;

    if let Some(dir) = dump {
        create_dir(dir)?;
        let mats = [
            ("h", &h),
            ("f_a", &t.f_a),
            ("f_d", &t.f_d),
            ("g_a", &t.g_a),
            ("g_d", &t.g_d),
            ("b", &t.b),
        ];
        for (name, m) in mats {
            write_matrix(&dir.join(format!("{name}.csv")), m, name, channel_seed)?;
        }
    }

    let summary = json!({
        "method": method.tag(),
        "kind": run.design.kind,
        "objective": run.design.objective,
        "trial": trial,
        "power_db": power_db,
        "power": power,
        "system": { "n": cfg.n, "m": cfg.m, "l": cfg.l, "d": cfg.d },
        "channel": run.channel.model,
        "channel_seed": channel_seed,
        "design_seed": design_seed,
        "random_k": cfg.algorithms.random_k,
        "quant_bits": cfg.quant_bits,
        "spectral_efficiency": se,
        "transmit_power": t.transmit_power(),
        "stream_mse": real_diag(&mse),
        "analog_modulus_residual": modulus_residual(&t.f_a).max(modulus_residual(&t.g_a)),
        "dump": dump.map(|d| d.display().to_string()),
        "build": build_id(),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum SweepKind {
    Se,
    Ber,
}

struct RunOutcome {
    name: String,
    file: Option<PathBuf>,
    result: std::result::Result<SweepResult, String>,
}

fn run_one(
    kind: SweepKind,
    run: &RunFile,
    method: DesignMethod,
) -> hybrid_mimo::Result<SweepResult> {
    let cfg = run.sweep_config(method);
    match kind {
        SweepKind::Se => run_se_sweep(&cfg),
        SweepKind::Ber => run_ber_sweep(&cfg, &run.ber_config()),
    }
}

fn sweep(kind: SweepKind, args: &SweepArgs) -> Result<()> {
    let extra = methods_override(&args.methods, "--methods");
    let loaded = load_config(&args.config, None, extra.into_iter().collect())?;
    create_dir(&args.out)?;
    let verb = if kind == SweepKind::Se {
        "sweep-se"
    } else {
        "sweep-ber"
    };

    let mut outcomes = Vec::new();
    for (label, run) in &loaded.expanded {
        for method in run.methods() {
            let name = match label {
                Some(l) => format!("{l}-{}", method.tag()),
                None => method.tag().to_string(),
            };
            eprintln!(
                "{verb}: {name}: {} trials x {} points",
                run.sweep.trials,
                run.sweep.power_db.points().len()
            );
            let started = Instant::now();
            let result = with_workers(args.jobs, || run_one(kind, run, method))?;
            match result {
                Ok(r) => {
                    let path = args.out.join(format!("{name}.csv"));
                    serialize_result(&r, &path)?;
                    eprintln!(
                        "{verb}: {name}: done in {:.1} s",
                        started.elapsed().as_secs_f64()
                    );
                    println!("{}", path.display());
                    outcomes.push(RunOutcome {
                        name,
                        file: Some(path),
                        result: Ok(r),
                    });
                }
                Err(e) if matches!(e, hybrid_mimo::Error::Io { .. }) => return Err(e.into()),
                Err(e) => {
                    eprintln!("{verb}: {name}: failed: {e}");
                    outcomes.push(RunOutcome {
                        name,
                        file: None,
                        result: Err(e.to_string()),
                    });
                }
            }
        }
    }

    let combined = args.out.join("combined.csv");
    write_combined(&combined, &outcomes)?;
    let meta = json!({
        "sweep": if kind == SweepKind::Se { "se" } else { "ber" },
        "build": build_id(),
        "source": loaded.source_name,
        "overrides": loaded.overrides,
        "runs": outcomes.iter().map(|o| json!({
            "name": o.name,
            "file": o.file.as_ref().and_then(|f| f.file_name()).map(|f| f.to_string_lossy().into_owned()),
            "error": o.result.as_ref().err(),
        })).collect::<Vec<_>>(),
    });
    let meta_path = sidecar_path(&combined);
    let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    text.push('\n');
    fs::write(&meta_path, text).map_err(|e| CliError::io(&meta_path, e))?;
    println!("{}", combined.display());

    if outcomes.iter().all(|o| o.result.is_err()) {
        return Err(CliError::Numerical("every method failed".into()));
    }
    Ok(())
}

fn write_combined(path: &Path, outcomes: &[RunOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut header = vec!["method"];
    header.extend(CSV_HEADER);
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    for o in outcomes {
        let Ok(r) = &o.result else { continue };
        for p in &r.points {
            w.write_record([
                o.name.clone(),
                p.power_db.to_string(),
                p.metric.clone(),
                p.mean.to_string(),
                p.stderr.to_string(),
                p.trials.to_string(),
                p.failures.to_string(),
            ])
            .map_err(|e| CliError::io(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn gen_channel(args: &ConfigArgs, trial: usize, out: Option<&Path>) -> Result<()> {
    let loaded = load_config(args, None, Vec::new())?;
    let run = &loaded.expanded[0].1;
    let cfg = run.sweep_config(run.methods()[0]);
    let h = trial_channel(&cfg, trial)?;
    let seed = trial_channel_seed(&cfg, trial);
    match out {
        Some(path) => {
            write_matrix(path, &h, &run.channel.model, seed)?;
            println!("{}", path.display());
        }
        None => {
            let stdout = std::io::stdout();
            match write_matrix_csv(stdout.lock(), &h, &run.channel.model, seed) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    return Err(CliError::Io(format!("stdout: {e}")));
                }
                _ => {}
            }
        }
    }
    Ok(())
}

fn validate_config(args: &ConfigArgs, path: Option<&Path>, print: bool) -> Result<()> {
    let loaded = load_config(args, path, Vec::new())?;
    if print {
        let text = toml::to_string(&loaded.run).map_err(|e| CliError::Invalid(e.to_string()))?;
        print!("{text}");
        return Ok(());
    }
    for (label, run) in &loaded.expanded {
        let s = &run.system;
        println!(
            "ok: {}{}: N={} M={} L={} D={} channel={} methods={} points={} trials={} seed={}",
            loaded.source_name,
            label
                .as_ref()
                .map(|l| format!(" [{l}]"))
                .unwrap_or_default(),
            s.n,
            s.m,
            s.l,
            s.d,
            run.channel.model,
            run.design.methods.join(","),
            run.sweep.power_db.points().len(),
            run.sweep.trials,
            run.sweep.seed,
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Design {
            config,
            method,
            power_db,
            trial,
            dump,
        } => design(
            config,
            method.as_deref(),
            *power_db,
            *trial,
            dump.as_deref(),
        ),
        Command::SweepSe(args) => sweep(SweepKind::Se, args),
        Command::SweepBer(args) => sweep(SweepKind::Ber, args),
        Command::GenChannel { config, trial, out } => gen_channel(config, *trial, out.as_deref()),
        Command::ValidateConfig {
            path,
            config,
            print,
        } => validate_config(config, path.as_deref(), *print),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let prefix = match e {
                CliError::Config(_) => "config error",
                CliError::Invalid(_) => "invalid input",
                CliError::Numerical(_) => "numerical failure",
                CliError::Io(_) => "i/o error",
            };
            eprintln!("{prefix}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
