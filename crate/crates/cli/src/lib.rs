//! Command implementations behind the `edsc` binary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edsc_core::ledger::{BlockLog, BlockLogError};
use edsc_netsim::metrics::{rejections_csv, to_csv};
use edsc_netsim::{run, Model, SimConfig, SimError, SimOutput, Summary};
use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Runtime(String),
    #[error("block {height} rejected: {reason}")]
    Rejected { height: u64, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Parse(_) => 2,
            CliError::Runtime(_) | CliError::Rejected { .. } => 1,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => CliError::Config(c.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "edsc", version, about = "Event-driven contract latency simulator")]
pub struct Cli {
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario.
    Run(RunArgs),
    /// Run a scenario across values of one parameter.
    Sweep(SweepArgs),
    /// Replay a block log and check every block.
    Validate { log: PathBuf },
    /// Tabulate the run outputs found under a directory.
    Report { dir: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Edsc,
    Baseline,
    Both,
}

impl ModelArg {
    fn models(self) -> Vec<Model> {
        match self {
            ModelArg::Edsc => vec![Model::Edsc],
            ModelArg::Baseline => vec![Model::Baseline],
            ModelArg::Both => vec![Model::Edsc, Model::Baseline],
        }
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario JSON; omitted fields take their defaults.
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub model: ModelArg,
    /// Overrides the scenario seed.
    #[arg(long, env = "EDSC_SIM_SEED")]
    pub seed: Option<u64>,
    /// Output directory; must be new or empty. Defaults to a fresh
    /// timestamped directory under ./runs.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Axis {
    /// Seconds.
    BlockInterval,
    /// Seconds.
    BlockDelay,
    /// Milliseconds.
    MsgDelay,
    /// Block gas limit.
    BlockCapacity,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::BlockInterval => "block_interval",
            Axis::BlockDelay => "block_delay",
            Axis::MsgDelay => "msg_delay",
            Axis::BlockCapacity => "block_capacity",
        }
    }

    pub fn apply(self, cfg: &mut SimConfig, v: f64) {
        match self {
            Axis::BlockInterval => cfg.block_interval_s = v,
            Axis::BlockDelay => cfg.block_delay_s = v,
            Axis::MsgDelay => cfg.msg_delay_ms = v,
            Axis::BlockCapacity => cfg.block_gas_limit = v as u64,
        }
    }
}

pub const DEFAULT_INTERVALS: [f64; 6] = [8.0, 12.42, 20.0, 30.0, 45.0, 60.0];

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "block_interval")]
    pub axis: Axis,
    /// Comma-separated values; defaults to 8,12.42,20,30,45,60 for the
    /// interval axis.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
    /// Seeds per point, counting up from the base seed.
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Summary JSON written next to each metrics CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub axis: Option<Axis>,
    pub value: Option<f64>,
    pub seed: u64,
    pub samples: usize,
    pub mined_blocks: usize,
    pub consistent: bool,
    #[serde(flatten)]
    pub summary: Summary,
}

pub fn load_scenario(path: Option<&Path>) -> Result<SimConfig, CliError> {
    let cfg = match path {
        None => SimConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

/// Writes `data` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, data: &[u8]) -> Result<(), CliError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(data).and_then(|_| f.sync_all()).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Creates the output directory, refusing one that already holds files.
fn prepare_out(out: Option<&Path>, label: &str) -> Result<PathBuf, CliError> {
    let dir = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let secs = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let mut n = 0;
            loop {
                let p = PathBuf::from("runs").join(format!("{secs}-{label}-{n}"));
                if !p.exists() {
                    break p;
                }
                n += 1;
            }
        }
    };
    if dir.exists() {
        let mut it = fs::read_dir(&dir).map_err(|e| io_err(&dir, e))?;
        if it.next().is_some() {
            return Err(CliError::Config(format!("{} is not empty; refusing to overwrite", dir.display())));
        }
    }
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

fn write_outputs(dir: &Path, out: &SimOutput, meta: RunSummary) -> Result<(), CliError> {
    let m = out.summary.model.as_str();
    write_atomic(&dir.join(format!("{m}.metrics.csv")), to_csv(&out.records).as_bytes())?;
    write_atomic(&dir.join(format!("{m}.rejections.csv")), rejections_csv(&out.rejections).as_bytes())?;
    let json = serde_json::to_vec_pretty(&meta).expect("summary serializes");
    write_atomic(&dir.join(format!("{m}.summary.json")), &json)?;
    if let Some(log) = &out.block_log {
        let mut buf = Vec::new();
        log.write_to(&mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_atomic(&dir.join(format!("{m}.blocks.jsonl")), &buf)?;
    }
    Ok(())
}

fn run_one(cfg: &SimConfig, dir: &Path, axis: Option<Axis>, value: Option<f64>) -> Result<Summary, CliError> {
    let out = run(cfg)?;
    let meta = RunSummary {
        axis,
        value,
        seed: cfg.seed,
        samples: out.samples,
        mined_blocks: out.mined.len(),
        consistent: out.consistent,
        summary: out.summary.clone(),
    };
    write_outputs(dir, &out, meta)?;
    Ok(out.summary)
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let c = &args.common;
    let mut cfg = load_scenario(c.scenario.as_deref())?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let dir = prepare_out(c.out.as_deref(), &format!("run-seed{}", cfg.seed))?;
    let mut means = BTreeMap::new();
    for model in c.model.models() {
        let s = run_one(&SimConfig { model, ..cfg.clone() }, &dir, None, None)?;
        println!(
            "{}: mean {:.3}s p50 {:.3}s p95 {:.3}s over {} records",
            model.as_str(),
            s.mean,
            s.p50,
            s.p95,
            s.records
        );
        means.insert(model, s.mean);
    }
    if let (Some(b), Some(e)) = (means.get(&Model::Baseline), means.get(&Model::Edsc)) {
        println!("ratio baseline/edsc: {:.3}", b / e);
    }
    println!("outputs in {}", dir.display());
    Ok(())
}

struct Job {
    value: f64,
    seed: u64,
    model: Model,
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let c = &args.common;
    let mut base = load_scenario(c.scenario.as_deref())?;
    if let Some(s) = c.seed {
        base.seed = s;
    }
    let values = match (args.values.is_empty(), args.axis) {
        (false, _) => args.values.clone(),
        (true, Axis::BlockInterval) => DEFAULT_INTERVALS.to_vec(),
        (true, a) => return Err(CliError::Config(format!("--values is required for the {} axis", a.as_str()))),
    };
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(CliError::Config("sweep values must be positive".into()));
    }
    if args.repeats == 0 || args.workers == 0 {
        return Err(CliError::Config("--repeats and --workers must be positive".into()));
    }
    // Check every point before running any of them.
    for &v in &values {
        let mut cfg = base.clone();
        args.axis.apply(&mut cfg, v);
        cfg.validate().map_err(|e| CliError::Config(format!("{}={v}: {e}", args.axis.as_str())))?;
    }
    let dir = prepare_out(c.out.as_deref(), &format!("sweep-{}", args.axis.as_str()))?;

    let mut jobs = Vec::new();
    for &value in &values {
        for r in 0..args.repeats {
            for model in c.model.models() {
                jobs.push(Job { value, seed: base.seed + r, model });
            }
        }
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Summary, CliError>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..args.workers.min(jobs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let mut cfg = SimConfig { model: job.model, seed: job.seed, ..base.clone() };
                args.axis.apply(&mut cfg, job.value);
                let sub = dir.join(format!("{}={}", args.axis.as_str(), job.value)).join(format!("seed-{}", job.seed));
                let res = fs::create_dir_all(&sub)
                    .map_err(|e| io_err(&sub, e))
                    .and_then(|_| run_one(&cfg, &sub, Some(args.axis), Some(job.value)));
                info!("{}={} seed {} {} done", args.axis.as_str(), job.value, job.seed, job.model.as_str());
                results.lock().expect("no worker panicked")[i] = Some(res);
            });
        }
    });

    let mut rows: Vec<Row> = Vec::new();
    for (job, res) in jobs.iter().zip(results.into_inner().expect("no worker panicked")) {
        let s = res.expect("every job ran")?;
        rows.push(Row { axis: args.axis.as_str().into(), value: job.value, seed: job.seed, summary: s });
    }
    let table = aggregate(&rows);
    let csv = aggregate_csv(&table);
    write_atomic(&dir.join("sweep.csv"), csv.as_bytes())?;
    print!("{}", render_table(&table));
    println!("outputs in {}", dir.display());
    Ok(())
}

pub fn cmd_validate(path: &Path) -> Result<usize, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let log = BlockLog::read_from(BufReader::new(f)).map_err(|e| match e {
        BlockLogError::Io(e) => io_err(path, e),
        other => CliError::Parse(format!("{}: {other}", path.display())),
    })?;
    log.validate_all().map_err(|(height, r)| CliError::Rejected { height, reason: r.name().to_string() })
}

/// One run's summary located at a sweep point.
#[derive(Clone, Debug)]
pub struct Row {
    pub axis: String,
    pub value: f64,
    pub seed: u64,
    pub summary: Summary,
}

/// Seed-averaged statistics of one model at one point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelStats {
    pub runs: usize,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub stale_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub axis: String,
    pub value: f64,
    pub models: BTreeMap<Model, ModelStats>,
}

impl Point {
    pub fn ratio(&self) -> Option<f64> {
        Some(self.models.get(&Model::Baseline)?.mean / self.models.get(&Model::Edsc)?.mean)
    }
}

/// Groups rows by (axis, value) and averages over seeds. Points come out
/// sorted by axis name, then value.
pub fn aggregate(rows: &[Row]) -> Vec<Point> {
    let mut points: Vec<Point> = Vec::new();
    let mut sorted: Vec<&Row> = rows.iter().collect();
    sorted.sort_by(|a, b| a.axis.cmp(&b.axis).then(a.value.total_cmp(&b.value)).then(a.seed.cmp(&b.seed)));
    for r in sorted {
        let same = points.last().is_some_and(|p| p.axis == r.axis && p.value == r.value);
        if !same {
            points.push(Point { axis: r.axis.clone(), value: r.value, models: BTreeMap::new() });
        }
        let st = points.last_mut().expect("pushed").models.entry(r.summary.model).or_default();
        st.runs += 1;
        st.mean += r.summary.mean;
        st.p50 += r.summary.p50;
        st.p95 += r.summary.p95;
        st.stale_rate += r.summary.stale_rate;
    }
    for p in &mut points {
        for st in p.models.values_mut() {
            let n = st.runs as f64;
            st.mean /= n;
            st.p50 /= n;
            st.p95 /= n;
            st.stale_rate /= n;
        }
    }
    points
}

pub const AGGREGATE_HEADER: &str = "axis,value,model,runs,mean_s,p50_s,p95_s,stale_rate,ratio";

pub fn aggregate_csv(points: &[Point]) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for p in points {
        let ratio = p.ratio().map(|r| format!("{r:.6}")).unwrap_or_default();
        for (m, st) in &p.models {
            writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
                p.axis,
                p.value,
                m.as_str(),
                st.runs,
                st.mean,
                st.p50,
                st.p95,
                st.stale_rate,
                ratio
            )
            .expect("writing to a String");
        }
    }
    out
}

pub fn render_table(points: &[Point]) -> String {
    let mut out = format!(
        "{:<16} {:>10} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>7}\n",
        "axis", "value", "edsc", "e_p50", "e_p95", "baseline", "b_p50", "b_p95", "ratio"
    );
    let cell = |st: Option<&ModelStats>, f: fn(&ModelStats) -> f64| st.map(|s| format!("{:.3}", f(s))).unwrap_or("-".into());
    for p in points {
        let e = p.models.get(&Model::Edsc);
        let b = p.models.get(&Model::Baseline);
        writeln!(
            out,
            "{:<16} {:>10} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>7}",
            p.axis,
            p.value,
            cell(e, |s| s.mean),
            cell(e, |s| s.p50),
            cell(e, |s| s.p95),
            cell(b, |s| s.mean),
            cell(b, |s| s.p50),
            cell(b, |s| s.p95),
            p.ratio().map(|r| format!("{r:.3}")).unwrap_or("-".into())
        )
        .expect("writing to a String");
    }
    out
}

fn find_summaries(dir: &Path, found: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_summaries(&p, found)?;
        } else if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".summary.json")) {
            found.push(p);
        }
    }
    Ok(())
}

/// Reads every run summary under `dir`, prints the table and writes
/// `report.csv` there.
pub fn cmd_report(dir: &Path) -> Result<Vec<Point>, CliError> {
    let mut files = Vec::new();
    find_summaries(dir, &mut files)?;
    if files.is_empty() {
        return Err(CliError::Config(format!("no run outputs under {}", dir.display())));
    }
    let mut rows = Vec::new();
    for f in files {
        let text = fs::read_to_string(&f).map_err(|e| io_err(&f, e))?;
        let s: RunSummary =
            serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", f.display())))?;
        rows.push(Row {
            axis: s.axis.map(|a| a.as_str().to_string()).unwrap_or_else(|| "run".into()),
            value: s.value.unwrap_or(0.0),
            seed: s.seed,
            summary: s.summary,
        });
    }
    let points = aggregate(&rows);
    write_atomic(&dir.join("report.csv"), aggregate_csv(&points).as_bytes())?;
    print!("{}", render_table(&points));
    Ok(points)
}

pub fn init_logging(level: &str) -> Result<(), CliError> {
    let filter: log::LevelFilter = level.parse().map_err(|_| CliError::Config(format!("unknown log level {level:?}")))?;
    env_logger::Builder::new().filter_level(filter).format_timestamp(None).try_init().ok();
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    init_logging(&cli.log_level)?;
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Validate { log } => {
            let n = cmd_validate(log)?;
            println!("ok: {n} blocks valid");
            Ok(())
        }
        Command::Report { dir } => cmd_report(dir).map(|_| ()),
    }
}
