//! Experiment runner for the spectrum-sharing simulator.
//!
//! Each subcommand loads a scenario file, runs one experiment and writes CSV
//! artifacts into the output directory. Every CSV starts with a comment line
//! `# sgin <kind> v<N>` naming its schema; the remaining lines are ordinary
//! CSV with a header row. Outputs depend only on the scenario and the seeds.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sgin_core::allocation::checkpoint;
use sgin_core::link::PowerClass;
use sgin_core::outage::OutageMethod;
use sgin_core::scenario::Scenario;
use sgin_core::simulation::{
    self, coverage_report, cinr_timeseries, evaluate, op_experiment, summarize, CsiMode, EvalSpec, Scheme, Trained,
};
use sgin_core::{linear_to_db, Error as CoreError};
use thiserror::Error;

/// Schema version written into every CSV header comment.
pub const CSV_VERSION: u32 = 1;

pub const QNETWORK_FILE: &str = "qnetwork.ckpt";
pub const PREDICTOR_FILE: &str = "predictor.ckpt";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("thread pool: {0}")]
    Threads(String),
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "sgin", version, about = "Spectrum-sharing interference experiments for two NGSO systems and a terrestrial network")]
pub struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "SGIN_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a scenario, fill defaults and print the normalised JSON.
    Validate(ValidateArgs),
    /// Beam coverage and CFEZ statistics over a run of epochs.
    Coverage(CoverageArgs),
    /// Mean SINR per scheme while sweeping one maximum transmit power.
    Sweep(SweepArgs),
    /// Outage probability versus threshold per scheme and method.
    Op(OpArgs),
    /// C/(I+N) of every user across epochs.
    Timeseries(TimeseriesArgs),
    /// Train the CSI predictor and the Q-network and save checkpoints.
    Train(TrainArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Use the full constellation sizes instead of the reduced ones.
    #[arg(long)]
    pub full_scale: bool,
}

impl ScenarioArgs {
    pub fn load(&self) -> Result<Scenario> {
        let validated = Scenario::load(&self.scenario)?;
        for w in &validated.warnings {
            log::warn!("{w}");
        }
        Ok(if self.full_scale {
            validated.scenario.at_full_scale()
        } else {
            validated.scenario
        })
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Write the normalised scenario here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of epochs; defaults to the scenario's time-series length.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Spacing between epochs, seconds.
    #[arg(long)]
    pub step_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds: comma-separated integers or ranges `a..b` / `a..=b`.
    #[arg(long, default_value = "0..10")]
    pub seeds: String,
    /// Schemes to compare.
    #[arg(long, value_delimiter = ',', default_values_t = vec![SchemeArg::JmdrIm, SchemeArg::Ppafb, SchemeArg::Pfpfb])]
    pub scheme: Vec<SchemeArg>,
    /// Load trained models from this directory instead of training in-process.
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Which maximum power to sweep.
    #[arg(long, value_enum, default_value_t = Experiment::SinrVsPmax)]
    pub experiment: Experiment,
    /// Sweep grid in watts; defaults to the scenario grid.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Evaluation slots per seed; defaults to the scenario value.
    #[arg(long)]
    pub slots: Option<usize>,
    /// CSI the allocator sees.
    #[arg(long, value_enum, default_value_t = CsiArg::Predicted)]
    pub csi: CsiArg,
}

#[derive(Debug, Args)]
pub struct OpArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Outage evaluators.
    #[arg(long, value_delimiter = ',', default_values_t = vec![MethodArg::Analytic, MethodArg::Asymptotic, MethodArg::MonteCarlo])]
    pub method: Vec<MethodArg>,
    /// Threshold grid in dB; defaults to the scenario grid.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Monte Carlo replicas; defaults to the scenario value.
    #[arg(long)]
    pub replicas: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TimeseriesArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Output directory for checkpoints and the training curve.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Sweep the NGSO 1 maximum power.
    SinrVsPmax,
    /// Sweep the NGSO 2 maximum power.
    SinrVsPmax2,
}

impl Experiment {
    fn class(self) -> PowerClass {
        match self {
            Experiment::SinrVsPmax => PowerClass::Ngso1,
            Experiment::SinrVsPmax2 => PowerClass::Ngso2,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Experiment::SinrVsPmax => "sinr-vs-pmax",
            Experiment::SinrVsPmax2 => "sinr-vs-pmax2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    JmdrIm,
    Ppafb,
    Pfpfb,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::JmdrIm => Scheme::JmdrIm,
            SchemeArg::Ppafb => Scheme::Ppafb,
            SchemeArg::Pfpfb => Scheme::Pfpfb,
        }
    }
}

impl std::fmt::Display for SchemeArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(Scheme::from(*self).label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Analytic,
    Asymptotic,
    MonteCarlo,
}

impl From<MethodArg> for OutageMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Analytic => OutageMethod::Analytic,
            MethodArg::Asymptotic => OutageMethod::Asymptotic,
            MethodArg::MonteCarlo => OutageMethod::MonteCarlo,
        }
    }
}

impl std::fmt::Display for MethodArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(OutageMethod::from(*self).label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CsiArg {
    Predicted,
    Actual,
}

impl From<CsiArg> for CsiMode {
    fn from(c: CsiArg) -> Self {
        match c {
            CsiArg::Predicted => CsiMode::Predicted,
            CsiArg::Actual => CsiMode::Actual,
        }
    }
}

/// Parses `0..10`, `3..=5`, `1,4,9` or any comma-separated mix. An empty or
/// blank string yields an empty list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = |part: &str| {
        CliError::Core(CoreError::Config {
            path: "seeds".into(),
            message: format!("cannot parse `{part}` as a seed or range"),
        })
    };
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (inclusive, b) = match b.strip_prefix('=') {
                Some(b) => (true, b),
                None => (false, b),
            };
            let a: u64 = a.trim().parse().map_err(|_| bad(part))?;
            let b: u64 = b.trim().parse().map_err(|_| bad(part))?;
            if inclusive {
                seeds.extend(a..=b);
            } else {
                seeds.extend(a..b);
            }
        } else {
            seeds.push(part.parse().map_err(|_| bad(part))?);
        }
    }
    Ok(seeds)
}

fn require_seeds(text: &str) -> Result<Vec<u64>> {
    let seeds = parse_seeds(text)?;
    if seeds.is_empty() {
        return Err(CoreError::Config {
            path: "seeds".into(),
            message: "at least one seed is required".into(),
        }
        .into());
    }
    Ok(seeds)
}

fn schemes(args: &[SchemeArg]) -> Result<Vec<Scheme>> {
    let mut out: Vec<Scheme> = args.iter().map(|&s| s.into()).collect();
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(CoreError::Config {
            path: "scheme".into(),
            message: "at least one scheme is required".into(),
        }
        .into());
    }
    Ok(out)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Opens a CSV file and writes its schema comment line.
fn csv_writer(path: &Path, kind: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# sgin {kind} v{CSV_VERSION}").map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(w))
}

fn finish(w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    inner.flush().map_err(|e| CliError::io(path, e))
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn db_or_empty(x: Option<f64>) -> String {
    opt(x.map(linear_to_db))
}

fn min(v: &[f64]) -> Option<f64> {
    v.iter().copied().reduce(f64::min)
}

fn trained(scenario: &Scenario, checkpoints: Option<&Path>) -> Result<Trained> {
    match checkpoints {
        Some(dir) => {
            let predictor = checkpoint::load_predictor(&dir.join(PREDICTOR_FILE))?;
            let online = checkpoint::load_mlp(&dir.join(QNETWORK_FILE))?;
            Ok(Trained::from_parts(scenario, predictor, online)?)
        }
        None => {
            log::info!("training predictor and Q-network");
            Ok(simulation::train(scenario)?)
        }
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Threads(e.to_string()))?;
    }
    match cli.command {
        Command::Validate(a) => run_validate(&a),
        Command::Coverage(a) => run_coverage(&a),
        Command::Sweep(a) => run_sweep(&a),
        Command::Op(a) => run_op(&a),
        Command::Timeseries(a) => run_timeseries(&a),
        Command::Train(a) => run_train(&a),
    }
}

fn run_validate(a: &ValidateArgs) -> Result<()> {
    let scenario = a.scenario.load()?;
    let json = scenario.to_json();
    match &a.out {
        Some(path) => std::fs::write(path, json + "\n").map_err(|e| CliError::io(path, e)),
        None => match writeln!(std::io::stdout().lock(), "{json}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io(Path::new("<stdout>"), e)),
            _ => Ok(()),
        },
    }
}

fn run_coverage(a: &CoverageArgs) -> Result<()> {
    let scenario = a.scenario.load()?;
    create_dir(&a.out)?;
    let epochs = a.epochs.unwrap_or(scenario.simulation.timeseries_epochs);
    let step = a.step_s.unwrap_or(scenario.simulation.timeseries_step_s);
    let path = a.out.join("coverage.csv");
    let mut w = csv_writer(&path, "coverage")?;
    w.write_record([
        "epoch_s",
        "class",
        "user",
        "ngso1_beams",
        "ngso2_beams",
        "serving_elevation_deg",
        "min_cfez_angle_deg",
        "in_cfez",
        "interferers",
    ])?;
    for r in coverage_report(&scenario, epochs, step) {
        w.write_record([
            num(r.epoch_s),
            r.class.label().to_string(),
            r.user.to_string(),
            r.ngso1_beams.to_string(),
            r.ngso2_beams.to_string(),
            opt(r.serving_elevation_deg),
            opt(r.min_cfez_angle_deg),
            r.in_cfez.to_string(),
            r.interferers.to_string(),
        ])?;
    }
    finish(w, &path)
}

fn run_sweep(a: &SweepArgs) -> Result<()> {
    let scenario = a.run.scenario.load()?;
    let spec = EvalSpec {
        schemes: schemes(&a.run.scheme)?,
        seeds: require_seeds(&a.run.seeds)?,
        slots: a.slots.unwrap_or(scenario.simulation.eval_slots),
        csi: a.csi.into(),
        sweep: Some((
            a.experiment.class(),
            a.grid.clone().unwrap_or_else(|| scenario.simulation.pmax_grid_w.clone()),
        )),
    };
    spec.validate()?;
    create_dir(&a.run.out)?;
    let trained = trained(&scenario, a.run.checkpoints.as_deref())?;
    let records = evaluate(&scenario, &trained, &spec)?;
    let kind = a.experiment.label();

    let path = a.run.out.join(format!("{kind}-slots.csv"));
    let mut w = csv_writer(&path, &format!("{kind}-slots"))?;
    w.write_record([
        "seed",
        "slot",
        "scheme",
        "pmax_w",
        "p_ngso1_w",
        "p_ngso2_w",
        "p_bs_w",
        "sinr_ngso1_db",
        "min_sinr_ngso2_db",
        "min_sinr_bs_db",
        "constraints_ok",
    ])?;
    for r in &records {
        w.write_record([
            r.seed.to_string(),
            r.slot.to_string(),
            r.scheme.label().to_string(),
            num(r.pmax_w),
            num(r.powers[0]),
            num(r.powers[1]),
            num(r.powers[2]),
            db_or_empty(r.ngso1_served().then_some(r.realized.objective)),
            db_or_empty(min(&r.realized.sinr_ngso2)),
            db_or_empty(min(&r.realized.sinr_bs)),
            r.constraints_ok.to_string(),
        ])?;
    }
    finish(w, &path)?;

    let path = a.run.out.join(format!("{kind}.csv"));
    let mut w = csv_writer(&path, kind)?;
    w.write_record([
        "scheme",
        "pmax_w",
        "mean_sinr_ngso1_db",
        "mean_min_sinr_ngso2_db",
        "mean_min_sinr_bs_db",
        "constraint_rate",
        "mean_p_ngso1_w",
        "mean_p_ngso2_w",
        "mean_p_bs_w",
        "slots",
    ])?;
    for s in summarize(&records) {
        w.write_record([
            s.scheme.label().to_string(),
            num(s.pmax_w),
            num(s.mean_sinr_ngso1_db()),
            num(linear_to_db(s.mean_min_sinr_ngso2)),
            num(linear_to_db(s.mean_min_sinr_bs)),
            num(s.constraint_rate),
            num(s.mean_powers[0]),
            num(s.mean_powers[1]),
            num(s.mean_powers[2]),
            s.slots.to_string(),
        ])?;
    }
    finish(w, &path)?;

    let path = a.run.out.join("decisions.csv");
    let mut w = csv_writer(&path, "decisions")?;
    w.write_record(["seed", "slot", "epoch_s", "action", "system", "sat", "beam", "user"])?;
    for r in &records {
        for d in &r.decisions {
            w.write_record([
                r.seed.to_string(),
                r.slot.to_string(),
                num(d.epoch_s),
                d.action.clone(),
                d.system.clone(),
                d.sat.to_string(),
                d.beam.to_string(),
                d.user.map(|u| u.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    finish(w, &path)
}

fn run_op(a: &OpArgs) -> Result<()> {
    let mut scenario = a.run.scenario.load()?;
    if let Some(grid) = &a.grid {
        scenario.simulation.phi_grid_db = grid.clone();
    }
    let seeds = require_seeds(&a.run.seeds)?;
    let schemes = schemes(&a.run.scheme)?;
    let mut methods: Vec<OutageMethod> = a.method.iter().map(|&m| m.into()).collect();
    methods.dedup();
    let replicas = a.replicas.unwrap_or(scenario.simulation.monte_carlo_replicas);
    create_dir(&a.run.out)?;
    let trained = trained(&scenario, a.run.checkpoints.as_deref())?;
    let records = op_experiment(&scenario, &trained, &schemes, &seeds, &methods, replicas)?;
    let path = a.run.out.join("op.csv");
    let mut w = csv_writer(&path, "op")?;
    w.write_record([
        "seed",
        "scheme",
        "class",
        "user",
        "phi_th_db",
        "method",
        "probability",
        "std_err",
        "replicas",
        "p_ngso1_w",
        "p_ngso2_w",
        "p_bs_w",
    ])?;
    for r in &records {
        w.write_record([
            r.seed.to_string(),
            r.scheme.label().to_string(),
            r.row.link.label().to_string(),
            r.user.to_string(),
            num(r.row.phi_th_db),
            r.row.method.label().to_string(),
            num(r.row.probability),
            opt(r.row.std_err),
            r.row.replicas.map(|n| n.to_string()).unwrap_or_default(),
            num(r.powers[0]),
            num(r.powers[1]),
            num(r.powers[2]),
        ])?;
    }
    finish(w, &path)
}

fn run_timeseries(a: &TimeseriesArgs) -> Result<()> {
    let scenario = a.run.scenario.load()?;
    let seeds = require_seeds(&a.run.seeds)?;
    let schemes = schemes(&a.run.scheme)?;
    create_dir(&a.run.out)?;
    let trained = trained(&scenario, a.run.checkpoints.as_deref())?;
    let path = a.run.out.join("timeseries.csv");
    let mut w = csv_writer(&path, "timeseries")?;
    w.write_record(["seed", "epoch_s", "scheme", "class", "user", "cinr_db"])?;
    let per_seed: Vec<_> = {
        use rayon::prelude::*;
        seeds
            .par_iter()
            .map(|&seed| (seed, cinr_timeseries(&scenario, &trained, &schemes, seed)))
            .collect()
    };
    for (seed, rows) in per_seed {
        for r in rows {
            w.write_record([
                seed.to_string(),
                num(r.epoch_s),
                r.scheme.label().to_string(),
                r.class.label().to_string(),
                r.user.to_string(),
                opt(r.cinr_db),
            ])?;
        }
    }
    finish(w, &path)
}

fn run_train(a: &TrainArgs) -> Result<()> {
    let scenario = a.scenario.load()?;
    create_dir(&a.out)?;
    let trained = simulation::train(&scenario)?;
    checkpoint::save_mlp(&a.out.join(QNETWORK_FILE), &trained.allocator.q.online)?;
    checkpoint::save_predictor(&a.out.join(PREDICTOR_FILE), &trained.predictor)?;
    let path = a.out.join("training-curve.csv");
    let mut w = csv_writer(&path, "training-curve")?;
    w.write_record(["epoch", "loss", "reward", "constraint_rate"])?;
    for r in &trained.curve {
        w.write_record([r.epoch.to_string(), num(r.loss), num(r.reward), num(r.constraint_rate)])?;
    }
    finish(w, &path)
}
