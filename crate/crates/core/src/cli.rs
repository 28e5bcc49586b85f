//! Command-line front end.
//!
//! Every subcommand accepts an optional TOML run config; flags override the
//! config. Relative paths in a config resolve against the config's
//! directory. Exit codes: 0 success, 1 runtime failure, 2 invalid input.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::evaluation::{
    describe_events, evaluate, generate_synthetic, render_table, ForecastReport, SynthParams,
};
use crate::forecast::{
    load_events, run_forecast, save_events, EcBase, ForecastConfig, ForecastError, ForecastOutput,
    ForecastRequest,
};
use crate::ingestion::{load_trajectories, save_trajectories, Frame, MotionScaling, Scene};
use crate::statistics::{fit_weibull_mle, WeibullParams, WeibullTable, DENSITY_LEVELS};
use crate::world::{has_extension, Calibration, Unit, WorldConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, missing or malformed inputs. Exit code 2.
    Validation(String),
    /// Failure while running a valid request. Exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}

impl From<ForecastError> for CliError {
    fn from(e: ForecastError) -> Self {
        match e {
            ForecastError::EnvironmentSaturated => runtime(e.to_string()),
            other => invalid(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "crowd-forecast",
    version,
    about = "Fast-forward pedestrian position forecasting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forecast positions at the target frame.
    Forecast(ForecastArgs),
    /// Score a forecast against ground-truth trajectories.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic scenario (world, tracks, events, run config).
    Synth(SynthArgs),
    /// Fit the per-density Weibull table from `level,value` samples.
    FitWeibull(FitArgs),
    /// Render saved JSON reports as one table.
    Table(TableArgs),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub label: Option<String>,
    pub world: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub weibull_table: Option<PathBuf>,
    /// Forecast output (written by `forecast`, read by `evaluate`).
    pub output: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub cut_frame: Option<Frame>,
    pub target_frame: Option<Frame>,
    pub seed: Option<u64>,
    pub unit: Option<Unit>,
    pub alpha: Option<u32>,
    pub density_radius_cm: Option<f64>,
    pub reduction_cap: Option<f64>,
    pub min_separation_cm: Option<f64>,
    pub raw_motion_vector: Option<bool>,
    pub literal_ec_base: Option<bool>,
    pub trace: Option<bool>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| invalid(format!("cannot parse config {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.world,
            &mut cfg.trajectories,
            &mut cfg.events,
            &mut cfg.weibull_table,
            &mut cfg.output,
            &mut cfg.truth,
            &mut cfg.report,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// TOML run config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// World config (JSON or TOML).
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Coordinate unit of trajectory and event files.
    #[arg(long)]
    pub unit: Option<Unit>,
    #[arg(long)]
    pub cut_frame: Option<Frame>,
    #[arg(long)]
    pub target_frame: Option<Frame>,
    /// Events file (JSON).
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Observed trajectories (CSV or JSON).
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    /// Weibull table (`level,a,b` CSV or JSON).
    #[arg(long)]
    pub weibull_table: Option<PathBuf>,
    /// Output file; `.csv` for CSV, anything else JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Motion-vector span in frames.
    #[arg(long)]
    pub alpha: Option<u32>,
    #[arg(long)]
    pub density_radius: Option<f64>,
    #[arg(long)]
    pub reduction_cap: Option<f64>,
    #[arg(long)]
    pub min_separation: Option<f64>,
    /// Use the raw displacement over the span instead of a per-frame vector.
    #[arg(long)]
    pub raw_motion_vector: bool,
    /// Add the EC-penalized displacement to the dead-reckoning prediction.
    #[arg(long)]
    pub literal_ec_base: bool,
    /// Include a per-segment trace in JSON output.
    #[arg(long)]
    pub trace: bool,
    /// Worker threads (default: available cores). Output does not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Forecast file written by `forecast` (JSON).
    #[arg(long)]
    pub forecast: Option<PathBuf>,
    /// Ground-truth trajectories (CSV or JSON).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Report file: `.json`, `.csv` (per-agent errors) or `.txt` (table).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Scenario label shown in the table.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator parameters (TOML or JSON).
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with `level,value` rows; every level 1..=10 needs two or more values.
    #[arg(long)]
    pub samples: PathBuf,
    /// Table output (`.csv` or `.json`); printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub reduction_cap: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// JSON reports written by `evaluate`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
}

/// Parses `args` (including the program name), runs and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Forecast(a) => cmd_forecast(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::FitWeibull(a) => cmd_fit_weibull(&a),
        Command::Table(a) => cmd_table(&a),
    }
}

fn base_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    override_opt(&mut cfg.world, &common.world);
    override_opt(&mut cfg.unit, &common.unit);
    override_opt(&mut cfg.cut_frame, &common.cut_frame);
    override_opt(&mut cfg.target_frame, &common.target_frame);
    override_opt(&mut cfg.events, &common.events);
    Ok(cfg)
}

fn override_opt<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
    if let Some(v) = flag {
        *slot = Some(v.clone());
    }
}

fn require<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| invalid(format!("missing required setting '{name}'")))
}

fn existing_file<'a>(value: &'a Option<PathBuf>, name: &str) -> Result<&'a Path, CliError> {
    let p = require(value, name)?;
    if !p.is_file() {
        return Err(invalid(format!("{name} file not found: {}", p.display())));
    }
    Ok(p)
}

fn writable_output(path: &Path, extensions: &[&str]) -> Result<(), CliError> {
    if !extensions.iter().any(|e| has_extension(path, e)) {
        return Err(invalid(format!(
            "output {} must end in one of: {}",
            path.display(),
            extensions.join(", ")
        )));
    }
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        if !dir.is_dir() {
            return Err(invalid(format!(
                "output directory does not exist: {}",
                dir.display()
            )));
        }
    }
    if path.is_dir() {
        return Err(invalid(format!(
            "output path is a directory: {}",
            path.display()
        )));
    }
    Ok(())
}

fn window(cfg: &RunConfig) -> Result<(Frame, Frame), CliError> {
    let t = *require(&cfg.cut_frame, "cut_frame")?;
    let t_e = *require(&cfg.target_frame, "target_frame")?;
    if t_e <= t {
        return Err(invalid("target frame must exceed cut frame"));
    }
    Ok((t, t_e))
}

fn load_world(cfg: &RunConfig) -> Result<WorldConfig, CliError> {
    let path = existing_file(&cfg.world, "world")?;
    WorldConfig::load(path).map_err(|e| invalid(e.to_string()))
}

/// Resolved forecast inputs, before running.
pub fn build_request(args: &ForecastArgs) -> Result<(ForecastRequest, RunConfig), CliError> {
    let mut cfg = base_config(&args.common)?;
    override_opt(&mut cfg.trajectories, &args.trajectories);
    override_opt(&mut cfg.weibull_table, &args.weibull_table);
    override_opt(&mut cfg.output, &args.out);
    override_opt(&mut cfg.seed, &args.seed);
    override_opt(&mut cfg.alpha, &args.alpha);
    override_opt(&mut cfg.density_radius_cm, &args.density_radius);
    override_opt(&mut cfg.reduction_cap, &args.reduction_cap);
    override_opt(&mut cfg.min_separation_cm, &args.min_separation);
    override_opt(&mut cfg.threads, &args.threads);
    if args.raw_motion_vector {
        cfg.raw_motion_vector = Some(true);
    }
    if args.literal_ec_base {
        cfg.literal_ec_base = Some(true);
    }
    if args.trace {
        cfg.trace = Some(true);
    }

    let (t, t_e) = window(&cfg)?;
    let world_cfg = load_world(&cfg)?;
    let traj_path = existing_file(&cfg.trajectories, "trajectories")?;
    let output = require(&cfg.output, "output")?;
    writable_output(output, &["json", "csv"])?;
    if cfg.threads == Some(0) {
        return Err(invalid("threads must be at least 1"));
    }

    let world = world_cfg.build().map_err(|e| invalid(e.to_string()))?;
    let unit = cfg.unit.unwrap_or_default();
    let calibration = world_cfg.calibration;
    let tracks =
        load_trajectories(traj_path, unit, &calibration).map_err(|e| invalid(e.to_string()))?;
    let scene = Scene::from_observations(&tracks, t, world).map_err(|e| invalid(e.to_string()))?;

    let events = match &cfg.events {
        Some(_) => load_events(existing_file(&cfg.events, "events")?, unit, &calibration)?,
        None => Vec::new(),
    };
    let mut table = match &cfg.weibull_table {
        Some(_) => WeibullTable::load(existing_file(&cfg.weibull_table, "weibull_table")?)
            .map_err(|e| invalid(e.to_string()))?,
        None => WeibullTable::default(),
    };
    if let Some(cap) = cfg.reduction_cap {
        table
            .set_reduction_cap(cap)
            .map_err(|e| invalid(e.to_string()))?;
    }

    let defaults = ForecastConfig::default();
    let config = ForecastConfig {
        alpha: cfg.alpha.unwrap_or(defaults.alpha),
        motion_scaling: if cfg.raw_motion_vector.unwrap_or(false) {
            MotionScaling::Raw
        } else {
            MotionScaling::PerFrame
        },
        density_radius_cm: cfg.density_radius_cm.unwrap_or(defaults.density_radius_cm),
        ec_base: if cfg.literal_ec_base.unwrap_or(false) {
            EcBase::PdrPrediction
        } else {
            EcBase::SegmentStart
        },
        min_separation_cm: cfg.min_separation_cm,
        max_reposition_iterations: defaults.max_reposition_iterations,
    };
    let request = ForecastRequest {
        scene,
        target_frame: t_e,
        events,
        seed: cfg.seed.unwrap_or(0),
        config,
        table,
        trace: cfg.trace.unwrap_or(false),
    };
    request.validate()?;
    Ok((request, cfg))
}

pub fn cmd_forecast(args: &ForecastArgs) -> Result<(), CliError> {
    let (request, cfg) = build_request(args)?;
    let threads = cfg
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| runtime(format!("cannot start thread pool: {e}")))?;
    let output = pool.install(|| run_forecast(&request))?;

    let path = cfg.output.as_ref().expect("validated");
    output
        .save(path)
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    let unresolved = output
        .agents
        .iter()
        .filter(|a| a.status == crate::forecast::Resolution::Unresolved)
        .count();
    if unresolved > 0 {
        eprintln!("warning: {unresolved} agent(s) could not be repositioned");
    }
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let mut cfg = base_config(&args.common)?;
    override_opt(&mut cfg.output, &args.forecast);
    override_opt(&mut cfg.truth, &args.truth);
    override_opt(&mut cfg.report, &args.out);
    override_opt(&mut cfg.label, &args.label);

    if let Some(report) = &cfg.report {
        writable_output(report, &["json", "csv", "txt"])?;
    }
    let forecast_path = existing_file(&cfg.output, "forecast")?;
    if !has_extension(forecast_path, "json") {
        return Err(invalid("evaluate reads the JSON forecast output"));
    }
    let forecast = ForecastOutput::load(forecast_path)?;
    let t = args.common.cut_frame.unwrap_or(forecast.cut_frame);
    let t_e = args.common.target_frame.unwrap_or(forecast.target_frame);
    if t_e <= t {
        return Err(invalid("target frame must exceed cut frame"));
    }

    let truth_path = existing_file(&cfg.truth, "truth")?;
    let unit = cfg.unit.unwrap_or_default();
    let calibration = match (&cfg.world, unit) {
        (Some(_), _) => load_world(&cfg)?.calibration,
        (None, Unit::Cm) => Calibration::from_pixel_size(1.0).expect("valid"),
        (None, Unit::Px) => return Err(invalid("pixel truth needs --world for calibration")),
    };
    let truth =
        load_trajectories(truth_path, unit, &calibration).map_err(|e| invalid(e.to_string()))?;

    let mut report =
        evaluate(&forecast.agents, &truth, t, t_e).map_err(|e| runtime(e.to_string()))?;
    report.scenario = cfg.label.clone();
    if let Some(events_path) = &cfg.events {
        if !events_path.is_file() {
            return Err(invalid(format!(
                "events file not found: {}",
                events_path.display()
            )));
        }
        report.event_info = describe_events(&load_events(events_path, unit, &calibration)?);
    }
    for id in &report.missing_agents {
        eprintln!("warning: agent {id} has no ground truth at frame {t_e}; reported MISSING");
    }

    print!("{}", render_table(std::slice::from_ref(&report)));
    if let Some(path) = &cfg.report {
        report
            .save(path)
            .map_err(|e| invalid(format!("cannot write report {}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.params)
        .map_err(|e| invalid(format!("cannot read {}: {e}", args.params.display())))?;
    let params: SynthParams = if has_extension(&args.params, "json") {
        serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| invalid(e.to_string()))?
    };
    let scenario = generate_synthetic(&params, args.seed).map_err(|e| invalid(e.to_string()))?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| invalid(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let dir = &args.out_dir;
    let io = |e: std::io::Error| runtime(e.to_string());
    scenario
        .world_config
        .save(&dir.join("world.json"))
        .map_err(io)?;
    save_trajectories(&dir.join("observed.csv"), &scenario.observed)
        .map_err(|e| runtime(e.to_string()))?;
    save_trajectories(&dir.join("truth.csv"), &scenario.truth)
        .map_err(|e| runtime(e.to_string()))?;
    let has_events = !scenario.events.is_empty();
    if has_events {
        save_events(&dir.join("events.json"), &scenario.events).map_err(io)?;
    }

    let run = RunConfig {
        label: scenario.label.clone(),
        world: Some("world.json".into()),
        trajectories: Some("observed.csv".into()),
        events: has_events.then(|| "events.json".into()),
        output: Some("forecast.json".into()),
        truth: Some("truth.csv".into()),
        report: Some("report.json".into()),
        cut_frame: Some(scenario.cut_frame),
        target_frame: Some(scenario.target_frame),
        seed: Some(args.seed),
        unit: Some(Unit::Cm),
        ..RunConfig::default()
    };
    let text = toml::to_string_pretty(&run).map_err(|e| runtime(e.to_string()))?;
    std::fs::write(dir.join("run.toml"), text).map_err(io)
}

pub fn cmd_fit_weibull(args: &FitArgs) -> Result<(), CliError> {
    #[derive(Deserialize)]
    struct Row {
        level: u8,
        value: f64,
    }
    if let Some(out) = &args.out {
        writable_output(out, &["csv", "json"])?;
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&args.samples)
        .map_err(|e| invalid(format!("cannot read {}: {e}", args.samples.display())))?;
    let mut by_level: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| invalid(e.to_string()))?;
        if !(1..=DENSITY_LEVELS as u8).contains(&row.level) {
            return Err(invalid(format!("level {} not in 1..=10", row.level)));
        }
        by_level.entry(row.level).or_default().push(row.value);
    }

    let mut entries = [WeibullParams { a: 1.0, b: 1.0 }; DENSITY_LEVELS];
    for level in 1..=DENSITY_LEVELS as u8 {
        let samples = by_level
            .get(&level)
            .ok_or_else(|| invalid(format!("no samples for density level {level}")))?;
        entries[level as usize - 1] =
            fit_weibull_mle(samples).map_err(|e| invalid(format!("level {level}: {e}")))?;
    }
    let cap = args
        .reduction_cap
        .unwrap_or(crate::statistics::DEFAULT_REDUCTION_CAP);
    let table = WeibullTable::new(entries, cap).map_err(|e| invalid(e.to_string()))?;

    match &args.out {
        Some(path) if has_extension(path, "json") => {
            let text = serde_json::to_string_pretty(&table).map_err(|e| runtime(e.to_string()))?;
            std::fs::write(path, text).map_err(|e| runtime(e.to_string()))
        }
        Some(path) => table.save_csv(path).map_err(|e| runtime(e.to_string())),
        None => {
            println!("level,a,b");
            for (i, p) in table.entries().iter().enumerate() {
                println!("{},{},{}", i + 1, p.a, p.b);
            }
            Ok(())
        }
    }
}

pub fn cmd_table(args: &TableArgs) -> Result<(), CliError> {
    let reports = args
        .reports
        .iter()
        .map(|p| {
            ForecastReport::load(p)
                .map_err(|e| invalid(format!("cannot read {}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    print!("{}", render_table(&reports));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "crowd-forecast",
            "forecast",
            "--cut-frame",
            "60",
            "--target-frame",
            "130",
            "--unit",
            "px",
            "--threads",
            "2",
        ])
        .unwrap();
        match cli.command {
            Command::Forecast(a) => {
                assert_eq!(a.common.cut_frame, Some(60));
                assert_eq!(a.common.unit, Some(Unit::Px));
                assert_eq!(a.threads, Some(2));
            }
            _ => panic!("wrong subcommand"),
        }
    }

    #[test]
    fn inverted_window_is_validation_error() {
        let args = ForecastArgs {
            common: CommonArgs {
                cut_frame: Some(130),
                target_frame: Some(60),
                ..Default::default()
            },
            ..Default::default()
        };
        let err = cmd_forecast(&args).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert_eq!(err.message(), "target frame must exceed cut frame");
    }

    #[test]
    fn config_paths_resolve_relative_to_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "world = \"w.json\"\ncut_frame = 3\n").unwrap();
        let cfg = RunConfig::load(&p).unwrap();
        assert_eq!(cfg.world.unwrap(), dir.path().join("w.json"));
        assert_eq!(cfg.cut_frame, Some(3));
    }

    #[test]
    fn unknown_config_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "wrold = \"w.json\"\n").unwrap();
        assert_eq!(RunConfig::load(&p).unwrap_err().exit_code(), 2);
    }
}
