//! Command-line front end. [`run`] parses arguments, dispatches one command and
//! returns the process exit code: 0 on success, 2 for configuration or usage
//! errors, 3 for model or runtime errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ch::{
    ch_exp, ch_true, estimate_ch, expected_count_rates, pair_rate_for_ch_exp, ChMode, ChResult, CountRecord,
    ExpectedRates, Setting,
};
use crate::config::{Config, ConfigError};
use crate::error::ModelError;
use crate::lhv::{classify_regime, critical_t, threshold_rate, Regime};
use crate::montecarlo::{run_protocol, simulate_setting, write_event_streams, ProtocolParams, SinglesRecord};
use crate::optimize::{critical_efficiency, maximize_ch, OptimizerOptions};
use crate::state::{visibility, PolarizerSetting};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => EXIT_CONFIG,
            CliError::Model(_) | CliError::Io(_) => EXIT_RUNTIME,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "bell-ch", version, about = "Clauser-Horne predictions, optimization and simulation for entangled photon pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expected rates, CH (true and coincidence-substituted) and visibility
    Predict(CommonArgs),
    /// Analyzer angles maximizing CH, and the critical detection efficiency
    Optimize(CommonArgs),
    /// Local-realistic-model rate threshold, critical absorption time and regime
    Threshold(CommonArgs),
    /// Monte Carlo run of the six-setting protocol
    Simulate(SimulateArgs),
    /// CH estimate from a count-record CSV
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Use the reference experiment's parameters for anything the config omits
    #[arg(long)]
    pub paper_defaults: bool,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Write the output here instead of standard output
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Run manifest path (defaults to `<out>.manifest.json` when --out is given)
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    /// Re-run exactly the configuration and seed recorded in a manifest
    #[arg(long, value_name = "PATH", conflicts_with_all = ["config", "paper_defaults", "seed"])]
    pub replay: Option<PathBuf>,
    /// Also export raw timestamp streams, one CSV per setting
    #[arg(long, value_name = "DIR")]
    pub events_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    TrueSingles,
    CoincidenceSubstituted,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Count-record CSV (`setting,counts,duration_s`)
    pub records: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::CoincidenceSubstituted)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Predict(args) => {
            let cfg = load_config(args)?;
            emit(args, stdout, &cmd_predict(&cfg, args.format)?)
        }
        Command::Optimize(args) => {
            let cfg = load_config(args)?;
            emit(args, stdout, &cmd_optimize(&cfg, args.seed, args.format)?)
        }
        Command::Threshold(args) => {
            let cfg = load_config(args)?;
            emit(args, stdout, &cmd_threshold(&cfg, args.format)?)
        }
        Command::Simulate(args) => simulate_command(args, stdout),
        Command::Analyze(args) => {
            let text = fs::read_to_string(&args.records).map_err(|e| io_err(&args.records, e))?;
            let records = read_records_csv(text.as_bytes())?;
            let mode = match args.mode {
                ModeArg::TrueSingles => ChMode::TrueSingles,
                ModeArg::CoincidenceSubstituted => ChMode::CoincidenceSubstituted,
            };
            let result = estimate_ch(&records, mode)?;
            emit(&args.common, stdout, &render_ch_result(&result, args.common.format))
        }
    }
}

fn load_config(args: &CommonArgs) -> Result<Config, CliError> {
    match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            Ok(Config::from_json(&text)?)
        }
        None if args.paper_defaults => Ok(Config::default()),
        None => Err(ConfigError::new("--config", "pass --config PATH or --paper-defaults").into()),
    }
}

fn emit(args: &CommonArgs, stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match &args.out {
        Some(path) => fs::write(path, text).map_err(|e| io_err(path, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Pair rate from the config, or the one calibrated to the CH_exp target.
pub fn resolve_pair_rate(cfg: &Config) -> Result<f64, CliError> {
    if let Some(r) = cfg.protocol.pair_rate {
        return Ok(r);
    }
    let eff = cfg.efficiency(1.0)?;
    pair_rate_for_ch_exp(&cfg.state()?, &cfg.quad()?, &cfg.polarizer_pair()?, &eff, cfg.protocol.ch_exp_target).map_err(
        |_| {
            ConfigError::new(
                "protocol.pair_rate",
                "CH_exp is not positive for this configuration, so the pair rate cannot be calibrated; set it explicitly",
            )
            .into()
        },
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictReport {
    pub pair_rate: f64,
    pub rates: ExpectedRates,
    pub ch_true: f64,
    pub ch_exp: f64,
    pub visibility: f64,
}

pub fn predict(cfg: &Config) -> Result<PredictReport, CliError> {
    let state = cfg.state()?;
    let quad = cfg.quad()?;
    let pols = cfg.polarizer_pair()?;
    let pair_rate = resolve_pair_rate(cfg)?;
    let eff = cfg.efficiency(pair_rate)?;
    let rates = expected_count_rates(&state, &quad, &pols, &eff, cfg.accidental_window()?)?;
    let pol1 = PolarizerSetting::new(quad.theta1, pols.arm1)?;
    Ok(PredictReport {
        pair_rate,
        rates,
        ch_true: ch_true(&state, &quad, &pols, &eff)?,
        ch_exp: ch_exp(&state, &quad, &pols, &eff)?,
        visibility: visibility(&state, &pol1, pols.arm2.eps_par, pols.arm2.eps_perp)?,
    })
}

pub fn cmd_predict(cfg: &Config, format: Format) -> Result<String, CliError> {
    let r = predict(cfg)?;
    let mut out = String::new();
    match format {
        Format::Json => return Ok(to_json(&r)),
        Format::Csv => {
            out.push_str("setting,coincidence_rate,singles1_rate,singles2_rate\n");
            for s in &r.rates.settings {
                let _ = writeln!(out, "{},{},{},{}", s.setting, s.coincidence, s.singles1, s.singles2);
            }
        }
        Format::Table => {
            let _ = writeln!(out, "pair rate: {:.3} /s", r.pair_rate);
            let _ = writeln!(out, "{:<8} {:>14} {:>14} {:>14}", "setting", "coinc /s", "singles1 /s", "singles2 /s");
            for s in &r.rates.settings {
                let _ = writeln!(
                    out,
                    "{:<8} {:>14.4} {:>14.4} {:>14.4}",
                    s.setting.label(),
                    s.coincidence,
                    s.singles1,
                    s.singles2
                );
            }
            let _ = writeln!(out, "ch_true: {:.6} /s", r.ch_true);
            let _ = writeln!(out, "ch_exp: {:.6} /s", r.ch_exp);
            let _ = writeln!(out, "visibility: {:.9}", r.visibility);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeReport {
    pub mode: ChMode,
    /// degrees, canonical
    pub quad_deg: [f64; 4],
    pub ch_max: f64,
    pub violation: bool,
    pub eta_crit: Option<f64>,
}

impl OptimizeReport {
    /// Quad in degrees with two decimals, space separated.
    pub fn quad_line(&self) -> String {
        self.quad_deg.map(|a| format!("{:.2}", a + 0.0)).join(" ")
    }
}

pub fn optimize(cfg: &Config, seed: Option<u64>) -> Result<OptimizeReport, CliError> {
    let state = cfg.state()?;
    let pols = cfg.polarizer_pair()?;
    let o = &cfg.optimizer;
    let opts = OptimizerOptions {
        starts: o.starts,
        seed: seed.unwrap_or(o.seed),
        warm_starts: Vec::new(),
    };
    let eff = crate::ch::EfficiencyModel::symmetric(o.eta, 1.0);
    let mode: ChMode = o.mode.into();
    let best = maximize_ch(&state, &pols, &eff, mode, &opts)?;
    let eta_crit = if o.critical_efficiency && best.violates() {
        match critical_efficiency(&state, &pols, o.resolution, &opts) {
            Ok(eta) => Some(eta),
            Err(ModelError::NoViolationAtUnitEfficiency) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    Ok(OptimizeReport {
        mode,
        quad_deg: best.quad.to_degrees(),
        ch_max: best.value,
        violation: best.violates(),
        eta_crit,
    })
}

pub fn cmd_optimize(cfg: &Config, seed: Option<u64>, format: Format) -> Result<String, CliError> {
    let r = optimize(cfg, seed)?;
    let mut out = String::new();
    match format {
        Format::Json => return Ok(to_json(&r)),
        Format::Csv => {
            out.push_str("theta1_deg,theta2_deg,theta1p_deg,theta2p_deg,ch_max,violation,eta_crit\n");
            let q = r.quad_deg;
            let eta = r.eta_crit.map_or(String::new(), |e| e.to_string());
            let _ = writeln!(out, "{},{},{},{},{},{},{}", q[0], q[1], q[2], q[3], r.ch_max, r.violation, eta);
        }
        Format::Table => {
            if r.violation {
                let _ = writeln!(out, "theta1 theta2 theta1' theta2' (deg)");
                let _ = writeln!(out, "{}", r.quad_line());
                let _ = writeln!(out, "CH_max ({}): {:.8} per pair", r.mode, r.ch_max);
            } else {
                let _ = writeln!(out, "no violation: CH_max = {:.3e} per pair ({})", r.ch_max, r.mode);
            }
            if let Some(eta) = r.eta_crit {
                let _ = writeln!(out, "critical efficiency: {eta:.4}");
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub threshold_rate: f64,
    pub observed_rate: f64,
    pub absorb_t: f64,
    pub critical_t: f64,
    pub regime: Regime,
}

pub fn threshold(cfg: &Config) -> Result<ThresholdReport, CliError> {
    let g = cfg.geometry()?;
    let observed = cfg.geometry.observed_rate;
    Ok(ThresholdReport {
        threshold_rate: threshold_rate(&g)?,
        observed_rate: observed,
        absorb_t: g.absorb_t,
        critical_t: critical_t(&g, observed)?,
        regime: classify_regime(&g, observed)?,
    })
}

fn human_time(t: f64) -> String {
    let units = [(1.0, "s"), (1e-3, "ms"), (1e-6, "us"), (1e-9, "ns"), (1e-12, "ps"), (1e-15, "fs")];
    let (scale, name) = units.iter().find(|(s, _)| t >= *s).copied().unwrap_or((1e-15, "fs"));
    format!("{:.4} {name}", t / scale)
}

pub fn cmd_threshold(cfg: &Config, format: Format) -> Result<String, CliError> {
    let r = threshold(cfg)?;
    let regime = match r.regime {
        Regime::DeviationExpected => "DeviationExpected",
        Regime::QuantumRegime => "QuantumRegime",
    };
    let mut out = String::new();
    match format {
        Format::Json => return Ok(to_json(&r)),
        Format::Csv => {
            out.push_str("threshold_rate_per_s,observed_rate_per_s,absorb_t_s,critical_t_s,regime\n");
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.threshold_rate, r.observed_rate, r.absorb_t, r.critical_t, regime
            );
        }
        Format::Table => {
            let _ = writeln!(out, "threshold rate: {:.6e} /s (T = {})", r.threshold_rate, human_time(r.absorb_t));
            let _ = writeln!(out, "observed rate: {:.6e} /s", r.observed_rate);
            let _ = writeln!(out, "critical T: {:.6e} s ({})", r.critical_t, human_time(r.critical_t));
            let _ = writeln!(out, "regime: {regime}");
        }
    }
    Ok(out)
}

/// Count records as `setting,counts,duration_s`.
pub fn write_records_csv<W: Write>(out: W, records: &[CountRecord]) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Row<'a> {
        setting: &'a str,
        counts: u64,
        duration_s: f64,
    }
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(Row {
            setting: r.setting.label(),
            counts: r.counts,
            duration_s: r.duration,
        })
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn records_csv_string(records: &[CountRecord]) -> String {
    let mut buf = Vec::new();
    write_records_csv(&mut buf, records).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8 csv")
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<CountRecord>, CliError> {
    #[derive(Deserialize)]
    struct Row {
        setting: String,
        counts: u64,
        duration_s: f64,
    }
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(|e| CliError::Input(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["setting", "counts", "duration_s"] {
        return Err(CliError::Input(format!(
            "records header must be `setting,counts,duration_s`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| CliError::Input(format!("records row {}: {e}", line + 1)))?;
        let setting = Setting::from_label(&row.setting)
            .ok_or_else(|| CliError::Input(format!("unknown setting label `{}`", row.setting)))?;
        out.push(CountRecord {
            setting,
            counts: row.counts,
            duration: row.duration_s,
        });
    }
    Ok(out)
}

pub fn render_ch_result(r: &ChResult, format: Format) -> String {
    match format {
        Format::Json => to_json(r),
        Format::Csv => format!("value,std_error,significance,mode\n{},{},{},{}\n", r.value, r.std_error, r.significance, r.mode),
        Format::Table => format!(
            "CH ({}): {:.3} +- {:.3} /s, significance {:.2} sigma\n",
            r.mode, r.value, r.std_error, r.significance
        ),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutputs {
    pub records: Vec<CountRecord>,
    pub singles: Vec<SinglesRecord>,
    pub ch: ChResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub timestamp: String,
    pub seed: u64,
    /// SHA-256 of the resolved configuration JSON
    pub config_hash: String,
    pub config: Config,
    pub outputs: RunOutputs,
}

pub fn config_hash(cfg: &Config) -> String {
    let digest = Sha256::digest(serde_json::to_vec(cfg).expect("config serializes"));
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Config with pair rate, duration and seed pinned so a rerun needs nothing else.
pub fn resolve_simulation(cfg: &Config, seed: Option<u64>) -> Result<(Config, ProtocolParams), CliError> {
    let mut cfg = cfg.clone();
    let pair_rate = resolve_pair_rate(&cfg)?;
    cfg.protocol.pair_rate = Some(pair_rate);
    if let Some(s) = seed {
        cfg.protocol.seed = s;
    }
    let state = cfg.state()?;
    let quad = cfg.quad()?;
    let pols = cfg.polarizer_pair()?;
    let logic = cfg.logic()?;
    let duration = match cfg.protocol.duration_s {
        Some(d) => d,
        None => {
            let rates = expected_count_rates(&state, &quad, &pols, &cfg.efficiency(pair_rate)?, Some(logic.window()))?;
            rates.duration_for_significance(cfg.protocol.target_significance).map_err(|_| {
                ConfigError::new(
                    "protocol.duration_s",
                    "expected CH_exp is not positive, so the duration cannot be sized; set it explicitly",
                )
            })?
        }
    };
    cfg.protocol.duration_s = Some(duration);
    let (det1, det2) = cfg.detectors()?;
    let params = ProtocolParams {
        state,
        quad,
        pols,
        det1,
        det2,
        pair_rate,
        duration,
        logic,
        seed: cfg.protocol.seed,
    };
    Ok((cfg, params))
}

pub fn simulate(params: &ProtocolParams) -> Result<RunOutputs, CliError> {
    let run = run_protocol(params)?;
    let ch = estimate_ch(&run.records, ChMode::CoincidenceSubstituted)?;
    Ok(RunOutputs {
        records: run.records,
        singles: run.singles,
        ch,
    })
}

fn simulate_command(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (cfg, seed) = match &args.replay {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let m: RunManifest =
                serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            m.config.validate()?;
            (m.config, Some(m.seed))
        }
        None => (load_config(&args.common)?, args.common.seed),
    };
    let (resolved, params) = resolve_simulation(&cfg, seed)?;
    let outputs = simulate(&params)?;

    let text = match args.common.format {
        Format::Csv => records_csv_string(&outputs.records),
        Format::Json => to_json(&outputs),
        Format::Table => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "pair rate {:.3} /s, {:.4} s per setting, seed {}",
                params.pair_rate, params.duration, params.seed
            );
            let _ = writeln!(out, "{:<8} {:>12} {:>12} {:>12}", "setting", "coinc", "singles1", "singles2");
            for (r, s) in outputs.records.iter().zip(&outputs.singles) {
                let _ = writeln!(out, "{:<8} {:>12} {:>12} {:>12}", r.setting.label(), r.counts, s.counts1, s.counts2);
            }
            out.push_str(&render_ch_result(&outputs.ch, Format::Table));
            out
        }
    };
    emit(&args.common, stdout, &text)?;

    let manifest_path = args.manifest.clone().or_else(|| {
        args.common.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    if let Some(path) = manifest_path {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seed: params.seed,
            config_hash: config_hash(&resolved),
            config: resolved,
            outputs,
        };
        fs::write(&path, to_json(&manifest)).map_err(|e| io_err(&path, e))?;
    }

    if let Some(dir) = &args.events_dir {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        for setting in Setting::ALL {
            let (s1, s2) = simulate_setting(&params, setting)?;
            let path = dir.join(format!("events_{}.csv", setting.label()));
            let mut f = std::io::BufWriter::new(fs::File::create(&path).map_err(|e| io_err(&path, e))?);
            write_event_streams(&mut f, &s1, &s2).map_err(|e| io_err(&path, e))?;
            f.flush().map_err(|e| io_err(&path, e))?;
        }
    }
    Ok(())
}
