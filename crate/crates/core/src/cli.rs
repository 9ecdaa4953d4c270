//! Command-line front end.
//!
//! Every command writes into an output directory holding `manifest.json`:
//! the run specification plus per-stage completion markers. Re-running a
//! command over the same directory skips completed stages; running a
//! different specification over it is refused.
//!
//! Options can also come from a TOML file given with `--config`. Top-level
//! keys `version`, `workers`, `deterministic` and `verbose` set global
//! options; a table named after the subcommand holds that command's options
//! with the flag names as keys. Flags given on the command line win.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cluster::{self, ClusterLabels, FeatureMatrix, Metric};
use crate::continuation::{
    self, cells_csv, continuation_classes, largest_certified, load_sweep, parse_cells_csv, sweep_summary_csv,
    sweep_to_dir, write_atomic, BoxAnalysis, BoxOutcome, ParameterGrid, RecurrenceStatus, RecurrenceSummary,
    SweepOptions, SweepResult,
};
use crate::dynsys::{MapKind, ParamBox, ParamMap};
use crate::error::{Error, Result};
use crate::graphrep::{MorseDecomposition, MorseSet, Representation};
use crate::grid::{CellIndex, Grid, RectangularSet};
use crate::interval::Interval;
use crate::recurrence::{RecurrenceAlgorithm, RecurrenceField, RecurrenceHistogram};
use crate::render;
use crate::sim::{self, InitialConditions, Lattice, SimConfig};

pub const MANIFEST: &str = "manifest.json";
const MANIFEST_SCHEMA: u32 = 1;
const CONFIG_VERSION: i64 = 1;

/// Exit status for an error: 1 usage, 2 missing or unreadable upstream
/// artifact, 3 violated internal contract.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::MissingArtifact { .. } | Error::Io(_) | Error::Json(_) => 2,
        Error::Enclosure(_) | Error::Diverged | Error::ZeroVariance { .. } => 3,
        Error::InvalidInterval { .. }
        | Error::DimensionMismatch { .. }
        | Error::CellOutOfRange { .. }
        | Error::InvalidGrid(_)
        | Error::UnsupportedDimension(_)
        | Error::NotStronglyConnected { .. }
        | Error::EmptySet
        | Error::InvalidArgument(_)
        | Error::Parse { .. } => 1,
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "setdyn",
    version,
    about = "Set-oriented analysis of parameterized planar maps"
)]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Run single-threaded. Outputs are identical either way.
    #[arg(long, global = true)]
    pub deterministic: bool,

    /// TOML file with default options.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Morse decomposition of one parameter box.
    #[command(args_override_self = true)]
    Analyze(AnalyzeArgs),
    /// Morse decompositions over a grid of parameter boxes.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Recurrence field of one Morse set.
    #[command(args_override_self = true)]
    Recurrence(RecurrenceArgs),
    /// DBSCAN over recurrence features of a sweep.
    #[command(args_override_self = true)]
    Cluster(ClusterArgs),
    /// Plain trajectory simulation.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Redraw the images of an existing output directory.
    #[command(args_override_self = true)]
    Render(RenderArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SystemArgs {
    #[arg(long, default_value = "chialvo")]
    pub map: String,

    /// Parameter overrides, e.g. `a=0.89,k=[0.0262,0.0264],b=0.18~1e-4`.
    /// A value is `v`, `lo:hi`, `[lo,hi]` or `center~width`.
    #[arg(long, allow_hyphen_values = true)]
    pub params: Option<String>,

    /// Phase-space box `x0:x1,y0:y1` (default depends on the map).
    #[arg(long, allow_hyphen_values = true)]
    pub phase_box: Option<String>,

    /// Cells per axis: `256` or `256x128`.
    #[arg(long, default_value = "256")]
    pub resolution: String,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    #[arg(long)]
    pub out: PathBuf,

    /// Also compute the recurrence field of the largest set away from the
    /// boundary.
    #[arg(long)]
    pub recurrence: bool,

    #[arg(long, default_value = "reverse-bfs")]
    pub algorithm: String,

    /// Pixels per cell in images.
    #[arg(long, default_value_t = 1)]
    pub scale: usize,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    /// Swept parameter ranges, e.g. `b=0:1,k=0:0.2`.
    #[arg(long, allow_hyphen_values = true)]
    pub param_box: String,

    /// Boxes per swept parameter, e.g. `20x20`.
    #[arg(long)]
    pub param_grid: String,

    #[arg(long)]
    pub out: PathBuf,

    #[arg(long)]
    pub recurrence: bool,

    /// Smallest set for which recurrence is computed.
    #[arg(long, default_value_t = continuation::DEFAULT_RECURRENCE_THRESHOLD)]
    pub threshold: usize,

    #[arg(long, default_value = "reverse-bfs")]
    pub algorithm: String,

    /// Pixels per parameter box in images.
    #[arg(long, default_value_t = 8)]
    pub scale: usize,
}

#[derive(Args, Debug)]
pub struct RecurrenceArgs {
    /// Output directory of an `analyze` or `sweep` run supplying the system.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,

    /// Parameter box `i_j` of a sweep run.
    #[arg(long = "box")]
    pub box_name: Option<String>,

    /// Morse set index (default: largest set away from the boundary).
    #[arg(long)]
    pub set: Option<usize>,

    /// Cell list as CSV, `c0,c1` or `set,c0,c1` rows after a header.
    #[arg(long)]
    pub morse_set_file: Option<PathBuf>,

    /// System, used when no run directory is given.
    #[command(flatten)]
    pub system: SystemArgs,

    /// Default: `<run-dir>/recurrence`.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, default_value = "reverse-bfs")]
    pub algorithm: String,

    #[arg(long, default_value_t = 1)]
    pub scale: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// Reduced recurrence histograms.
    Hist,
    /// Standardized (mean, median, NFRRV).
    Frr,
}

impl FeatureKind {
    fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Hist => "hist",
            FeatureKind::Frr => "frr",
        }
    }

    fn preset(self) -> (f64, usize) {
        match self {
            FeatureKind::Hist => cluster::HISTOGRAM_PRESET,
            FeatureKind::Frr => cluster::FRR_PRESET,
        }
    }
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[arg(long)]
    pub sweep_dir: PathBuf,

    #[arg(long, value_enum, default_value = "hist")]
    pub features: FeatureKind,

    /// Default: 0.2 for histograms, 0.8 for FRR features.
    #[arg(long)]
    pub eps: Option<f64>,

    /// Default: 150 for histograms, 100 for FRR features.
    #[arg(long)]
    pub minpts: Option<usize>,

    #[arg(long, default_value = "l2")]
    pub metric: String,

    /// Run every combination of eps 0.1..1.4 and minpts 50..300.
    #[arg(long)]
    pub batch: bool,

    /// Leave out boxes whose analysed set has fewer cells.
    #[arg(long, default_value_t = 0)]
    pub min_cells: usize,

    /// Default: `<sweep-dir>/cluster-<features>`.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, default_value_t = 8)]
    pub scale: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    /// Coordinate ranges of trajectory tails.
    Bounds,
    /// Number of grid cells visited by trajectory tails.
    Cover,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value = "chialvo")]
    pub map: String,

    /// Parameter values; intervals are replaced by their midpoints.
    #[arg(long, allow_hyphen_values = true)]
    pub params: Option<String>,

    #[arg(long, value_enum, default_value = "bounds")]
    pub mode: SimMode,

    /// Starting points: a lattice `30x30@0:100,-100:100` or a list
    /// `x,y;x,y`.
    #[arg(long, allow_hyphen_values = true)]
    pub ics: Option<String>,

    /// Discarded iterations.
    #[arg(long)]
    pub burn: Option<u64>,

    /// Recorded iterations.
    #[arg(long)]
    pub sample: Option<u64>,

    /// Parameter ranges to scan, e.g. `a=0.89:0.9,k=0:0.03`.
    #[arg(long, allow_hyphen_values = true, requires = "param_lattice")]
    pub param_box: Option<String>,

    /// Values per scanned parameter (endpoints included), e.g. `11x11`.
    #[arg(long, requires = "param_box")]
    pub param_lattice: Option<String>,

    /// Cover grid domain for `--mode cover`.
    #[arg(long, allow_hyphen_values = true)]
    pub cover_box: Option<String>,

    #[arg(long)]
    pub cover_resolution: Option<String>,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Output directory of an earlier command.
    #[arg(long)]
    pub input: PathBuf,

    /// Default: the input directory.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long)]
    pub scale: Option<usize>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse(&argv) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn clap_exit(e: clap::Error) -> i32 {
    let code = if e.use_stderr() { 1 } else { 0 };
    let _ = e.print();
    code
}

/// Position of the subcommand and the `--config` value, which may stand on
/// either side of it.
fn scan_globals(argv: &[OsString]) -> (Option<usize>, Option<PathBuf>) {
    let (mut sub, mut config) = (None, None);
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if let Some(v) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else if s == "--config" {
            config = argv.get(i + 1).map(PathBuf::from);
            i += 1;
        } else if sub.is_none() && s == "--workers" {
            i += 1;
        } else if sub.is_none() && !s.starts_with('-') {
            sub = Some(i);
        }
        i += 1;
    }
    (sub, config)
}

fn parse(argv: &[OsString]) -> std::result::Result<Cli, i32> {
    let (sub_at, path) = scan_globals(argv);
    let (Some(sub_at), Some(path)) = (sub_at, path) else {
        return Cli::try_parse_from(argv).map_err(clap_exit);
    };
    let config = match load_config(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Err(exit_code(&e));
        }
    };
    let name = argv[sub_at].to_string_lossy().into_owned();
    let mut merged: Vec<OsString> = argv[..=sub_at].to_vec();
    merged.extend(config.command_args(&name).into_iter().map(OsString::from));
    merged.extend(argv[sub_at + 1..].iter().cloned());
    let mut cli = Cli::try_parse_from(&merged).map_err(clap_exit)?;
    if cli.workers.is_none() {
        cli.workers = config.workers;
    }
    cli.deterministic |= config.deterministic;
    cli.verbose = cli.verbose.max(config.verbose);
    Ok(cli)
}

struct Config {
    workers: Option<usize>,
    deterministic: bool,
    verbose: u8,
    commands: toml::Table,
}

fn load_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text.parse().map_err(|e| Error::parse("config file", e))?;
    let mut config = Config {
        workers: None,
        deterministic: false,
        verbose: 0,
        commands: toml::Table::new(),
    };
    for (key, value) in table {
        let bad = || Error::parse("config file", format!("bad value for `{key}`"));
        match key.as_str() {
            "version" => {
                if value.as_integer() != Some(CONFIG_VERSION) {
                    return Err(Error::parse(
                        "config file",
                        format!("unsupported version (expected {CONFIG_VERSION})"),
                    ));
                }
            }
            "workers" => {
                config.workers = Some(
                    value
                        .as_integer()
                        .and_then(|v| usize::try_from(v).ok())
                        .ok_or_else(bad)?,
                )
            }
            "deterministic" => config.deterministic = value.as_bool().ok_or_else(bad)?,
            "verbose" => config.verbose = value.as_integer().and_then(|v| u8::try_from(v).ok()).ok_or_else(bad)?,
            _ if value.is_table() => {
                config.commands.insert(key, value);
            }
            _ => return Err(Error::parse("config file", format!("unknown key `{key}`"))),
        }
    }
    Ok(config)
}

impl Config {
    fn command_args(&self, name: &str) -> Vec<String> {
        let mut out = Vec::new();
        let Some(toml::Value::Table(t)) = self.commands.get(name) else {
            return out;
        };
        for (key, value) in t {
            let flag = format!("--{key}");
            let mut push = |v: &toml::Value| match v {
                toml::Value::Boolean(true) => out.push(flag.clone()),
                toml::Value::Boolean(false) => {}
                toml::Value::String(s) => out.push(format!("{flag}={s}")),
                other => out.push(format!("{flag}={other}")),
            };
            match value {
                toml::Value::Array(items) => items.iter().for_each(&mut push),
                v => push(v),
            }
        }
        out
    }
}

fn execute(cli: Cli) -> Result<()> {
    let threads = if cli.deterministic {
        1
    } else {
        match cli.workers {
            Some(0) => return Err(Error::InvalidArgument("--workers must be positive".into())),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    log::info!("running with {threads} worker(s)");
    pool.install(|| match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Sweep(a) => sweep(a),
        Command::Recurrence(a) => recurrence(a),
        Command::Cluster(a) => cluster_cmd(a),
        Command::Simulate(a) => simulate(a),
        Command::Render(a) => render_cmd(a),
    })
}

// ---------------------------------------------------------------------------
// Argument syntax

/// Splits on `sep` outside square brackets.
fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn number(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad number `{}` in {what}", s.trim())))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("non-finite number in {what}")))
    }
}

/// `v`, `lo:hi`, `[lo,hi]` or `center~width`.
pub fn parse_interval(s: &str) -> Result<Interval> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
        let parts: Vec<&str> = inner.split(',').collect();
        let [lo, hi] = parts[..] else {
            return Err(Error::InvalidArgument(format!("bad interval `{s}`")));
        };
        return Interval::new(number(lo, s)?, number(hi, s)?);
    }
    if let Some((c, w)) = s.split_once('~') {
        let (c, w) = (number(c, s)?, number(w, s)?);
        if w < 0.0 {
            return Err(Error::InvalidArgument(format!("negative width in `{s}`")));
        }
        return Interval::new(c - w / 2.0, c + w / 2.0);
    }
    if let Some((lo, hi)) = split_range(s) {
        return Interval::new(number(lo, s)?, number(hi, s)?);
    }
    Interval::point(number(s, s)?)
}

/// Splits `lo:hi`.
fn split_range(s: &str) -> Option<(&str, &str)> {
    s.split_once(':')
}

fn param_index(map: MapKind, name: &str) -> Result<usize> {
    let name = name.trim();
    map.param_names().iter().position(|p| *p == name).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "map {map} has no parameter `{name}` (parameters: {})",
            map.param_names().join(", ")
        ))
    })
}

/// The map's default parameters with the overrides of `spec` applied.
pub fn parse_params(map: MapKind, spec: Option<&str>) -> Result<ParamBox> {
    let mut pb = ParamBox::from_point(map.default_params())?;
    let Some(spec) = spec.filter(|s| !s.trim().is_empty()) else {
        return Ok(pb);
    };
    for item in split_top(spec, ',') {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected name=value, got `{item}`")))?;
        pb.set(param_index(map, name)?, parse_interval(value)?);
    }
    Ok(pb)
}

/// `x0:x1,y0:y1,...`.
pub fn parse_bounds(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(',')
        .map(|axis| {
            let (lo, hi) =
                split_range(axis).ok_or_else(|| Error::InvalidArgument(format!("expected lo:hi, got `{axis}`")))?;
            Ok((number(lo, s)?, number(hi, s)?))
        })
        .collect()
}

/// `256` (same on every axis) or `256x128`.
pub fn parse_resolution(s: &str, dim: usize) -> Result<Vec<usize>> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad resolution `{s}`")))
        })
        .collect::<Result<_>>()?;
    match parts.len() {
        1 => Ok(vec![parts[0]; dim]),
        n if n == dim => Ok(parts),
        n => Err(Error::DimensionMismatch {
            expected: dim,
            found: n,
        }),
    }
}

/// `b=0:1,k=0:0.2` into parameter indices and ranges.
pub fn parse_param_ranges(map: MapKind, s: &str) -> Result<(Vec<usize>, Vec<(f64, f64)>)> {
    let mut idx = Vec::new();
    let mut ranges = Vec::new();
    for item in split_top(s, ',') {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected name=lo:hi, got `{item}`")))?;
        let iv = parse_interval(value)?;
        idx.push(param_index(map, name)?);
        ranges.push((iv.lo(), iv.hi()));
    }
    Ok((idx, ranges))
}

/// `30x30@0:100,-100:100` or `x,y;x,y`.
pub fn parse_ics(s: &str, dim: usize) -> Result<InitialConditions> {
    if let Some((counts, bounds)) = s.split_once('@') {
        let counts = parse_resolution(counts, dim)?;
        return Ok(InitialConditions::Lattice(Lattice::new(counts, parse_bounds(bounds)?)?));
    }
    let pts = s
        .split(';')
        .map(|p| p.split(',').map(|v| number(v, s)).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(InitialConditions::List(pts))
}

fn parse_map(s: &str) -> Result<MapKind> {
    s.parse()
}

impl SystemArgs {
    fn resolve(&self) -> Result<(MapKind, ParamBox, Grid)> {
        let map = parse_map(&self.map)?;
        let params = parse_params(map, self.params.as_deref())?;
        let bounds = match &self.phase_box {
            Some(s) => parse_bounds(s)?,
            None => map.default_phase_box().to_vec(),
        };
        let resolution = parse_resolution(&self.resolution, bounds.len())?;
        Ok((map, params, Grid::from_bounds(&bounds, &resolution)?))
    }
}

// ---------------------------------------------------------------------------
// Manifest

/// Everything that determines a run's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub command: String,
    pub map: Option<MapKind>,
    pub params: Option<ParamBox>,
    pub phase_grid: Option<Grid>,
    pub param_grid: Option<ParameterGrid>,
    pub options: serde_json::Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub spec: RunSpec,
    /// Worker count of the run that created the directory; informational.
    pub workers: usize,
    pub stages: BTreeMap<String, bool>,
    pub warnings: Vec<String>,
}

pub fn load_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST);
    let bytes = fs::read(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact {
            path: path.clone(),
            what: "run manifest".into(),
        },
        _ => e.into(),
    })?;
    let m: RunManifest = serde_json::from_slice(&bytes)?;
    if m.schema != MANIFEST_SCHEMA {
        return Err(Error::parse(
            path.display().to_string(),
            format!("manifest schema {}", m.schema),
        ));
    }
    Ok(m)
}

struct Run {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn open(dir: &Path, spec: RunSpec) -> Result<Run> {
        fs::create_dir_all(dir)?;
        let manifest = if dir.join(MANIFEST).exists() {
            let m = load_manifest(dir)?;
            if m.spec != spec {
                return Err(Error::InvalidArgument(format!(
                    "{} holds a different {} run; choose another output directory",
                    dir.display(),
                    m.spec.command
                )));
            }
            m
        } else {
            let m = RunManifest {
                schema: MANIFEST_SCHEMA,
                tool: "setdyn".into(),
                version: crate::VERSION.into(),
                spec,
                workers: rayon::current_num_threads(),
                stages: BTreeMap::new(),
                warnings: Vec::new(),
            };
            write_atomic(&dir.join(MANIFEST), &serde_json::to_vec_pretty(&m)?)?;
            m
        };
        Ok(Run {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    fn done(&self, stage: &str) -> bool {
        self.manifest.stages.get(stage).copied().unwrap_or(false)
    }

    fn finish(&mut self, stage: &str, warnings: Vec<String>) -> Result<()> {
        self.manifest.stages.insert(stage.to_string(), true);
        self.manifest.warnings.extend(warnings);
        write_atomic(&self.dir.join(MANIFEST), &serde_json::to_vec_pretty(&self.manifest)?)
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn write(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        write_atomic(&p, bytes)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    write_atomic(path, bytes)
}

fn save_ppm(img: &render::RasterImage, path: &Path) -> Result<()> {
    write_file(path, &img.to_ppm())
}

fn read_artifact(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact {
            path: path.to_path_buf(),
            what: what.into(),
        },
        _ => e.into(),
    })
}

// ---------------------------------------------------------------------------
// Shared artifact writers

fn morse_sets_csv(a: &BoxAnalysis) -> String {
    let mut out = String::from("set,cells,attracting,touches_boundary");
    let dim = a.sets.first().map_or(0, |s| s.bounds.dim());
    for axis in 0..dim {
        let _ = write!(out, ",x{axis}_lo,x{axis}_hi");
    }
    out.push('\n');
    for (i, s) in a.sets.iter().enumerate() {
        let _ = write!(out, "{i},{},{},{}", s.cells, s.attracting, s.touches_boundary);
        for iv in s.bounds.iter() {
            let _ = write!(out, ",{},{}", iv.lo(), iv.hi());
        }
        out.push('\n');
    }
    out
}

fn field_csv(grid: &Grid, field: &RecurrenceField) -> String {
    let mut out = String::new();
    for axis in 0..grid.dim() {
        let _ = write!(out, "c{axis},");
    }
    out.push_str("rec\n");
    let mut coords = Vec::new();
    for (&c, &r) in field.cells.iter().zip(&field.rec) {
        grid.coords_into(c, &mut coords);
        for v in &coords {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{r}");
    }
    out
}

fn parse_field_csv(grid: &Grid, text: &str) -> Result<RecurrenceField> {
    let mut rows: Vec<(CellIndex, u32)> = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::parse("recurrence field", format!("line {}", lineno + 1));
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != grid.dim() + 1 {
            return Err(bad());
        }
        let coords = vals[..grid.dim()]
            .iter()
            .map(|v| v.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let rec = vals[grid.dim()].trim().parse::<u32>().map_err(|_| bad())?;
        rows.push((grid.linear_coords(&coords)?, rec));
    }
    rows.sort_unstable();
    let (cells, rec) = rows.into_iter().unzip();
    RecurrenceField::from_values(grid, cells, rec)
}

#[derive(Serialize)]
struct FieldReport<'a> {
    summary: RecurrenceSummary,
    min_rec: u32,
    max_rec: u32,
    histogram: &'a RecurrenceHistogram,
}

/// `set<i>.csv`, `set<i>.json`, `set<i>.ppm` and `set<i>_colorbar.csv` under
/// `dir`.
fn write_field(dir: &Path, grid: &Grid, set: usize, field: &RecurrenceField, scale: usize) -> Result<()> {
    let hist = field.histogram();
    let report = FieldReport {
        summary: RecurrenceSummary::from_field(set, field),
        min_rec: field.min_rec(),
        max_rec: field.max_rec(),
        histogram: &hist,
    };
    write_file(&dir.join(format!("set{set}.csv")), field_csv(grid, field).as_bytes())?;
    write_file(
        &dir.join(format!("set{set}.json")),
        &serde_json::to_vec_pretty(&report)?,
    )?;
    draw_field(dir, grid, set, field, scale)
}

fn draw_field(dir: &Path, grid: &Grid, set: usize, field: &RecurrenceField, scale: usize) -> Result<()> {
    if grid.dim() != 2 {
        return Ok(());
    }
    let (img, legend) = render::render_recurrence(field, grid, scale)?;
    write_file(&dir.join(format!("set{set}_colorbar.csv")), legend.as_bytes())?;
    save_ppm(&img, &dir.join(format!("set{set}.ppm")))
}

fn draw_morse(dir: &Path, md: &MorseDecomposition, grid: &Grid, scale: usize) -> Result<()> {
    write_file(&dir.join("graphs/morse.txt"), render::export_morse_graph(md).as_bytes())?;
    if grid.dim() == 2 {
        let img = render::render_morse(md, grid, scale)?;
        save_ppm(&img, &dir.join("images/morse.ppm"))?;
    }
    Ok(())
}

fn print_analysis(a: &BoxAnalysis) {
    println!(
        "{} Morse set(s), {} cells, {} escaped cells",
        a.sets.len(),
        a.total_cells,
        a.escaped_cells
    );
    for (i, s) in a.sets.iter().enumerate() {
        let bounds: Vec<String> = s
            .bounds
            .iter()
            .map(|iv| format!("[{}, {}]", iv.lo(), iv.hi()))
            .collect();
        println!(
            "set {i}: {} cells{}{} bounds {}",
            s.cells,
            if s.attracting { ", attracting" } else { "" },
            if s.touches_boundary { ", touches boundary" } else { "" },
            bounds.join(" x ")
        );
    }
    match &a.recurrence {
        RecurrenceStatus::NotRequested => {}
        RecurrenceStatus::NoCandidate => println!("recurrence: no set away from the boundary"),
        RecurrenceStatus::BelowThreshold { set, cells } => println!("recurrence: set {set} too small ({cells} cells)"),
        RecurrenceStatus::Failed { reason } => println!("recurrence: failed: {reason}"),
        RecurrenceStatus::Computed(s) => print_recurrence(s),
    }
}

fn print_recurrence(s: &RecurrenceSummary) {
    println!(
        "recurrence of set {}: {} cells, mean {}, median {}, FRRV {}, NFRRV {}",
        s.set, s.cells, s.mean_rec, s.median_rec, s.frrv, s.nfrrv
    );
}

// ---------------------------------------------------------------------------
// analyze

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let (map, params, grid) = args.system.resolve()?;
    let algorithm: RecurrenceAlgorithm = args.algorithm.parse()?;
    if args.scale == 0 {
        return Err(Error::InvalidArgument("--scale must be positive".into()));
    }
    let spec = RunSpec {
        command: "analyze".into(),
        map: Some(map),
        params: Some(params.clone()),
        phase_grid: Some(grid.clone()),
        param_grid: None,
        options: json!({ "recurrence": args.recurrence, "algorithm": algorithm, "scale": args.scale }),
    };
    let mut run = Run::open(&args.out, spec)?;
    if !run.done("morse") {
        let options = SweepOptions {
            recurrence: args.recurrence,
            recurrence_threshold: 1,
            algorithm,
        };
        let rep = Representation::build(&map, &params, &grid)?;
        let md = MorseDecomposition::compute(&rep);
        let (analysis, field) = BoxAnalysis::analyse(&rep, &md, &options);
        run.write("sets.csv", cells_csv(&grid, &analysis.cells).as_bytes())?;
        run.write("morse_sets.csv", morse_sets_csv(&analysis).as_bytes())?;
        draw_morse(&run.dir, &md, &grid, args.scale)?;
        if let Some((set, field)) = &field {
            write_field(&run.path("recurrence"), &grid, *set, field, args.scale)?;
        }
        run.write("summary.json", &serde_json::to_vec_pretty(&analysis)?)?;
        for w in rep.warnings() {
            log::warn!("{w}");
        }
        run.finish("morse", rep.warnings().to_vec())?;
    } else {
        log::info!("{}: already complete", args.out.display());
    }
    let analysis: BoxAnalysis = serde_json::from_str(&read_artifact(&run.path("summary.json"), "analysis summary")?)?;
    print_analysis(&analysis);
    Ok(())
}

fn load_analysis(dir: &Path, grid: &Grid) -> Result<BoxAnalysis> {
    let mut a: BoxAnalysis = serde_json::from_str(&read_artifact(&dir.join("summary.json"), "analysis summary")?)?;
    a.cells = parse_cells_csv(
        grid,
        &read_artifact(&dir.join("sets.csv"), "Morse set cells")?,
        a.sets.len(),
    )?;
    Ok(a)
}

// ---------------------------------------------------------------------------
// sweep

fn sweep(args: &SweepArgs) -> Result<()> {
    let (map, base, grid) = args.system.resolve()?;
    let algorithm: RecurrenceAlgorithm = args.algorithm.parse()?;
    let (varying, ranges) = parse_param_ranges(map, &args.param_box)?;
    let resolution = parse_resolution(&args.param_grid, varying.len())?;
    let pgrid = ParameterGrid::new(RectangularSet::from_bounds(&ranges)?, resolution, varying, base.clone())?;
    if args.scale == 0 {
        return Err(Error::InvalidArgument("--scale must be positive".into()));
    }
    let options = SweepOptions {
        recurrence: args.recurrence,
        recurrence_threshold: args.threshold,
        algorithm,
    };
    let spec = RunSpec {
        command: "sweep".into(),
        map: Some(map),
        params: Some(base),
        phase_grid: Some(grid.clone()),
        param_grid: Some(pgrid.clone()),
        options: json!({ "sweep": options, "scale": args.scale }),
    };
    let mut run = Run::open(&args.out, spec)?;
    let result = if run.done("boxes") {
        load_sweep(&run.dir, &pgrid, &grid)?
    } else {
        let r = sweep_to_dir(&map, &pgrid, &grid, &options, &run.dir)?;
        let warnings = sweep_warnings(&r);
        run.finish("boxes", warnings)?;
        r
    };
    let diagram = continuation_classes(&result);
    if !run.done("summary") {
        run.write("sweep.csv", sweep_summary_csv(&result, map.param_names()).as_bytes())?;
        run.write("continuation.csv", diagram.to_csv(&pgrid).as_bytes())?;
        draw_sweep(&run.dir, &result, args.scale)?;
        run.finish("summary", Vec::new())?;
    }
    let failed = result.records.iter().filter(|r| r.analysis().is_none()).count();
    let counts: Vec<usize> = result
        .records
        .iter()
        .filter_map(|r| r.analysis())
        .map(|a| a.sets.len())
        .collect();
    println!("{} boxes, {} failed", result.records.len(), failed);
    if let (Some(lo), Some(hi)) = (counts.iter().min(), counts.iter().max()) {
        println!("Morse sets per box: {lo} to {hi}");
    }
    println!(
        "{} continuation class(es), {} unmatched neighbour pair(s)",
        diagram.class_count,
        diagram.failed_edges.len()
    );
    Ok(())
}

fn sweep_warnings(r: &SweepResult) -> Vec<String> {
    let mut out = Vec::new();
    for rec in &r.records {
        let name = r.pgrid.box_name(rec.index);
        match &rec.outcome {
            BoxOutcome::Failed { reason } => out.push(format!("box {name}: {reason}")),
            BoxOutcome::Analysed(a) => out.extend(a.warnings.iter().map(|w| format!("box {name}: {w}"))),
        }
    }
    out
}

fn draw_sweep(dir: &Path, result: &SweepResult, scale: usize) -> Result<()> {
    if result.pgrid.dim() != 2 {
        return Ok(());
    }
    let diagram = continuation_classes(result);
    let res = result.pgrid.resolution();
    let counts: Vec<Option<f64>> = result
        .records
        .iter()
        .map(|r| r.analysis().map(|a| a.sets.len() as f64))
        .collect();
    let img = render::render_heatmap(&counts, res, Some(&diagram.labels), scale)?;
    save_ppm(&img, &dir.join("images/continuation.ppm"))?;
    let nfrrv: Vec<Option<f64>> = result
        .records
        .iter()
        .map(|r| match r.analysis().map(|a| &a.recurrence) {
            Some(RecurrenceStatus::Computed(s)) => Some(s.nfrrv),
            _ => None,
        })
        .collect();
    if nfrrv.iter().any(Option::is_some) {
        let img = render::render_heatmap(&nfrrv, res, None, scale)?;
        save_ppm(&img, &dir.join("images/nfrrv.ppm"))?;
    }
    Ok(())
}

fn sweep_from_manifest(dir: &Path, m: &RunManifest) -> Result<SweepResult> {
    let (Some(pgrid), Some(grid)) = (&m.spec.param_grid, &m.spec.phase_grid) else {
        return Err(Error::parse("sweep manifest", "missing grid specification"));
    };
    load_sweep(dir, pgrid, grid)
}

// ---------------------------------------------------------------------------
// recurrence

/// Reads `c0,c1` or `set,c0,c1` rows; with a set column only rows of `set`
/// (default 0) are kept.
fn read_cell_file(path: &Path, grid: &Grid, set: Option<usize>) -> Result<Vec<CellIndex>> {
    let text = read_artifact(path, "cell list")?;
    let header = text.lines().next().unwrap_or("");
    if header.split(',').next().map(str::trim) == Some("set") {
        let nsets = text
            .lines()
            .skip(1)
            .filter_map(|l| l.split(',').next()?.trim().parse::<usize>().ok())
            .max()
            .map_or(0, |m| m + 1);
        let want = set.unwrap_or(0);
        let mut sets = parse_cells_csv(grid, &text, nsets.max(want + 1))?;
        return Ok(std::mem::take(&mut sets[want]));
    }
    let mut cells = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let coords = line
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse("cell list", format!("line {}", lineno + 1)))?;
        cells.push(grid.linear_coords(&coords)?);
    }
    Ok(cells)
}

fn recurrence(args: &RecurrenceArgs) -> Result<()> {
    let algorithm: RecurrenceAlgorithm = args.algorithm.parse()?;
    // System and, unless a file is given, the stored cells of each set.
    let (map, params, grid, stored): (MapKind, ParamBox, Grid, Option<BoxAnalysis>) = match &args.run_dir {
        Some(dir) => {
            let m = load_manifest(dir)?;
            let map = m.spec.map.ok_or_else(|| Error::parse("manifest", "no map"))?;
            let grid = m
                .spec
                .phase_grid
                .clone()
                .ok_or_else(|| Error::parse("manifest", "no phase grid"))?;
            match m.spec.command.as_str() {
                "analyze" => {
                    let params = m
                        .spec
                        .params
                        .clone()
                        .ok_or_else(|| Error::parse("manifest", "no parameters"))?;
                    let stored = match args.morse_set_file {
                        Some(_) => None,
                        None => Some(load_analysis(dir, &grid)?),
                    };
                    (map, params, grid, stored)
                }
                "sweep" => {
                    let pgrid = m
                        .spec
                        .param_grid
                        .clone()
                        .ok_or_else(|| Error::parse("manifest", "no parameter grid"))?;
                    let name = args
                        .box_name
                        .as_deref()
                        .ok_or_else(|| Error::InvalidArgument("--box is required with a sweep directory".into()))?;
                    let index = (0..pgrid.len())
                        .find(|&i| pgrid.box_name(i) == name)
                        .ok_or_else(|| Error::InvalidArgument(format!("no box `{name}` in this sweep")))?;
                    let stored = match args.morse_set_file {
                        Some(_) => None,
                        None => {
                            let record = continuation::BoxStore::new(dir).load(name, &grid)?.ok_or_else(|| {
                                Error::MissingArtifact {
                                    path: continuation::BoxStore::new(dir).summary_path(name),
                                    what: format!("sweep record for box {name}"),
                                }
                            })?;
                            match record.outcome {
                                BoxOutcome::Analysed(a) => Some(a),
                                BoxOutcome::Failed { reason } => {
                                    return Err(Error::InvalidArgument(format!("box {name} failed: {reason}")))
                                }
                            }
                        }
                    };
                    (map, pgrid.param_box(index), grid, stored)
                }
                other => return Err(Error::InvalidArgument(format!("{} is a {other} run", dir.display()))),
            }
        }
        None => {
            if args.morse_set_file.is_none() {
                return Err(Error::InvalidArgument("give --run-dir or --morse-set-file".into()));
            }
            let (map, params, grid) = args.system.resolve()?;
            (map, params, grid, None)
        }
    };
    let (set, cells) = match (&args.morse_set_file, &stored) {
        (Some(path), _) => (args.set.unwrap_or(0), read_cell_file(path, &grid, args.set)?),
        (None, Some(a)) => {
            let set = match args.set {
                Some(s) => s,
                None => {
                    let md = a.decomposition()?;
                    largest_certified(&md).ok_or_else(|| {
                        Error::InvalidArgument("no Morse set away from the boundary; pass --set".into())
                    })?
                }
            };
            let cells = a
                .cells
                .get(set)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("no Morse set {set} (have {})", a.cells.len())))?;
            (set, cells)
        }
        (None, None) => unreachable!("cells come from a file or a stored analysis"),
    };
    let out = match (&args.out, &args.run_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(d)) => match &args.box_name {
            Some(b) => d.join("recurrence").join(b),
            None => d.join("recurrence"),
        },
        (None, None) => return Err(Error::InvalidArgument("--out is required without --run-dir".into())),
    };
    if args.scale == 0 {
        return Err(Error::InvalidArgument("--scale must be positive".into()));
    }
    let mut sorted = cells.clone();
    sorted.sort_unstable();
    let spec = RunSpec {
        command: "recurrence".into(),
        map: Some(map),
        params: Some(params.clone()),
        phase_grid: Some(grid.clone()),
        param_grid: None,
        options: json!({ "set": set, "cells": sorted, "algorithm": algorithm, "scale": args.scale }),
    };
    let mut run = Run::open(&out, spec)?;
    let stage = format!("set{set}");
    if !run.done(&stage) {
        let rep = Representation::build(&map, &params, &grid)?;
        let field = RecurrenceField::compute(&rep, &MorseSet::new(cells), algorithm)?;
        write_field(&run.dir, &grid, set, &field, args.scale)?;
        run.finish(&stage, rep.warnings().to_vec())?;
    }
    let field = parse_field_csv(
        &grid,
        &read_artifact(&run.path(&format!("{stage}.csv")), "recurrence field")?,
    )?;
    print_recurrence(&RecurrenceSummary::from_field(set, &field));
    Ok(())
}

// ---------------------------------------------------------------------------
// cluster

fn features(sweep: &SweepResult, kind: FeatureKind, min_cells: usize) -> Result<FeatureMatrix> {
    match kind {
        FeatureKind::Hist => Ok(cluster::histogram_features(sweep, min_cells)),
        FeatureKind::Frr => cluster::frr_features(sweep, min_cells),
    }
}

fn label_vector(sweep: &SweepResult, f: &FeatureMatrix, labels: &ClusterLabels) -> Vec<Option<i64>> {
    let mut out = vec![None; sweep.records.len()];
    for (&b, l) in f.boxes.iter().zip(&labels.labels) {
        out[b] = Some(l.as_i64());
    }
    out
}

fn labels_name(kind: FeatureKind, eps: f64, minpts: usize) -> String {
    format!("{}_eps{eps}_minpts{minpts}", kind.as_str())
}

fn cluster_cmd(args: &ClusterArgs) -> Result<()> {
    let upstream = load_manifest(&args.sweep_dir)?;
    if upstream.spec.command != "sweep" {
        return Err(Error::InvalidArgument(format!(
            "{} is a {} run, not a sweep",
            args.sweep_dir.display(),
            upstream.spec.command
        )));
    }
    if !upstream.stages.get("boxes").copied().unwrap_or(false) {
        return Err(Error::MissingArtifact {
            path: args.sweep_dir.join("boxes"),
            what: "completed sweep".into(),
        });
    }
    let metric: Metric = args.metric.parse()?;
    if args.scale == 0 {
        return Err(Error::InvalidArgument("--scale must be positive".into()));
    }
    let (eps0, minpts0) = args.features.preset();
    let combos = if args.batch {
        cluster::batch_grid()
    } else {
        vec![(args.eps.unwrap_or(eps0), args.minpts.unwrap_or(minpts0))]
    };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.sweep_dir.join(format!("cluster-{}", args.features.as_str())));
    let spec = RunSpec {
        command: "cluster".into(),
        map: upstream.spec.map,
        params: upstream.spec.params.clone(),
        phase_grid: upstream.spec.phase_grid.clone(),
        param_grid: upstream.spec.param_grid.clone(),
        options: json!({
            "sweep_dir": args.sweep_dir,
            "features": args.features,
            "combinations": combos,
            "metric": metric,
            "min_cells": args.min_cells,
            "scale": args.scale,
        }),
    };
    let mut run = Run::open(&out, spec)?;
    let sweep = sweep_from_manifest(&args.sweep_dir, &upstream)?;
    let f = features(&sweep, args.features, args.min_cells)?;
    let fname = format!("features/{}.csv", args.features.as_str());
    if !run.done(&fname) {
        run.write(&fname, cluster::features_csv(&sweep, &f).as_bytes())?;
        let warnings = f
            .excluded
            .iter()
            .map(|(b, why)| format!("box {}: {why}", sweep.pgrid.box_name(*b)))
            .collect();
        run.finish(&fname, warnings)?;
    }
    println!("{} of {} boxes have features", f.len(), sweep.records.len());
    let mut batch = String::from("eps,minpts,clusters,noise\n");
    for &(eps, minpts) in &combos {
        let name = labels_name(args.features, eps, minpts);
        let labels = cluster::dbscan(&f.rows, eps, minpts, metric)?;
        let stage = format!("labels/{name}.csv");
        if !run.done(&stage) {
            run.write(&stage, cluster::labels_csv(&sweep, &f, &labels).as_bytes())?;
            if sweep.pgrid.dim() == 2 {
                let img =
                    render::render_labels(&label_vector(&sweep, &f, &labels), sweep.pgrid.resolution(), args.scale)?;
                save_ppm(&img, &run.path(&format!("images/{name}.ppm")))?;
            }
            run.finish(&stage, Vec::new())?;
        }
        let _ = writeln!(batch, "{eps},{minpts},{},{}", labels.clusters, labels.noise_count());
        if !args.batch {
            println!(
                "eps {eps}, minpts {minpts}: {} cluster(s), {} noise",
                labels.clusters,
                labels.noise_count()
            );
        }
    }
    if args.batch {
        let stage = format!("labels/{}_batch.csv", args.features.as_str());
        if !run.done(&stage) {
            run.write(&stage, batch.as_bytes())?;
            run.finish(&stage, Vec::new())?;
        }
        print!("{batch}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate

fn simulate(args: &SimulateArgs) -> Result<()> {
    let map = parse_map(&args.map)?;
    let base = parse_params(map, args.params.as_deref())?.midpoint();
    let mut cfg = match args.mode {
        SimMode::Bounds => SimConfig::bounds_default(),
        SimMode::Cover => SimConfig::cover_default(),
    };
    if let Some(s) = &args.ics {
        cfg.ics = parse_ics(s, map.dim())?;
    }
    if let Some(b) = args.burn {
        cfg.burn_in = b;
    }
    if let Some(s) = args.sample {
        cfg.sample = s;
    }
    if args.mode == SimMode::Cover && (args.cover_box.is_some() || args.cover_resolution.is_some()) {
        let old = cfg.cover.clone().expect("cover default has a grid");
        let bounds = match &args.cover_box {
            Some(s) => parse_bounds(s)?,
            None => (0..old.dim())
                .map(|a| (old.domain().lo(a), old.domain().hi(a)))
                .collect(),
        };
        let res = match &args.cover_resolution {
            Some(s) => parse_resolution(s, bounds.len())?,
            None => old.resolution().to_vec(),
        };
        cfg.cover = Some(Grid::from_bounds(&bounds, &res)?);
    }
    let (varying, lattice) = match (&args.param_box, &args.param_lattice) {
        (Some(pb), Some(pl)) => {
            let (varying, ranges) = parse_param_ranges(map, pb)?;
            let counts = parse_resolution(pl, varying.len())?;
            (varying, Some(Lattice::new(counts, ranges)?))
        }
        _ => (Vec::new(), None),
    };
    let points: Vec<Vec<f64>> = match &lattice {
        None => vec![base.clone()],
        Some(l) => (0..l.len())
            .map(|i| {
                let mut p = base.clone();
                for (&k, v) in varying.iter().zip(l.point(i)) {
                    p[k] = v;
                }
                p
            })
            .collect(),
    };
    let spec = RunSpec {
        command: "simulate".into(),
        map: Some(map),
        params: Some(ParamBox::from_point(&base)?),
        phase_grid: cfg.cover.clone(),
        param_grid: None,
        options: json!({ "mode": args.mode, "config": cfg, "varying": varying, "lattice": lattice }),
    };
    let mut run = Run::open(&args.out, spec)?;
    if !run.done("simulation") {
        let mut csv = String::new();
        for name in map.param_names() {
            let _ = write!(csv, "{name},");
        }
        let report = match args.mode {
            SimMode::Bounds => {
                let rows: Vec<Vec<sim::TrajectorySummary>> = points
                    .par_iter()
                    .map(|p| sim::simulate(&map, p, &cfg))
                    .collect::<Result<_>>()?;
                csv.push_str("diverged");
                for axis in 0..map.dim() {
                    let _ = write!(csv, ",x{axis}_lo,x{axis}_hi");
                }
                csv.push('\n');
                let mut diverged = 0;
                for (p, row) in points.iter().zip(&rows) {
                    let d = row.iter().filter(|t| t.diverged).count();
                    diverged += d;
                    for v in p {
                        let _ = write!(csv, "{v},");
                    }
                    let _ = write!(csv, "{d}");
                    match sim::union_bounds(row) {
                        Some(b) => b.iter().for_each(|(lo, hi)| {
                            let _ = write!(csv, ",{lo},{hi}");
                        }),
                        None => (0..map.dim()).for_each(|_| csv.push_str(",,")),
                    }
                    csv.push('\n');
                }
                let all: Vec<sim::TrajectorySummary> = rows.into_iter().flatten().collect();
                json!({
                    "mode": "bounds",
                    "parameter_points": points.len(),
                    "trajectories": all.len(),
                    "diverged": diverged,
                    "bounds": sim::union_bounds(&all),
                })
            }
            SimMode::Cover => {
                let sizes: Vec<sim::CoverSize> = points
                    .par_iter()
                    .map(|p| sim::attractor_cover_size(&map, p, &cfg))
                    .collect::<Result<_>>()?;
                csv.push_str("cells,diverged\n");
                for (p, s) in points.iter().zip(&sizes) {
                    for v in p {
                        let _ = write!(csv, "{v},");
                    }
                    let _ = writeln!(csv, "{},{}", s.cells, s.diverged());
                }
                json!({
                    "mode": "cover",
                    "parameter_points": points.len(),
                    "max_cells": sizes.iter().map(|s| s.cells).max(),
                    "min_cells": sizes.iter().map(|s| s.cells).min(),
                })
            }
        };
        run.write("simulation.csv", csv.as_bytes())?;
        run.write("simulation.json", &serde_json::to_vec_pretty(&report)?)?;
        run.finish("simulation", Vec::new())?;
    }
    let report: serde_json::Value =
        serde_json::from_str(&read_artifact(&run.path("simulation.json"), "simulation report")?)?;
    match report.get("bounds") {
        Some(serde_json::Value::Array(b)) => {
            let ranges: Vec<String> = b.iter().map(|r| format!("[{}, {}]", r[0], r[1])).collect();
            println!("tail bounds: {}", ranges.join(" x "));
            println!("diverged trajectories: {}", report["diverged"]);
        }
        Some(_) => println!("every trajectory diverged"),
        None => println!("visited cells: {} to {}", report["min_cells"], report["max_cells"]),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// render

fn render_cmd(args: &RenderArgs) -> Result<()> {
    let m = load_manifest(&args.input)?;
    let out = args.out.clone().unwrap_or_else(|| args.input.clone());
    let stored_scale = m.spec.options.get("scale").and_then(|v| v.as_u64()).map(|v| v as usize);
    let scale = args.scale.or(stored_scale).unwrap_or(1);
    if scale == 0 {
        return Err(Error::InvalidArgument("--scale must be positive".into()));
    }
    let grid = m.spec.phase_grid.clone();
    let mut written = 0;
    match m.spec.command.as_str() {
        "analyze" => {
            let grid = grid.ok_or_else(|| Error::parse("manifest", "no phase grid"))?;
            let a = load_analysis(&args.input, &grid)?;
            draw_morse(&out, &a.decomposition()?, &grid, scale)?;
            written += 1;
            written += redraw_fields(&args.input.join("recurrence"), &out.join("recurrence"), &grid, scale)?;
        }
        "recurrence" => {
            let grid = grid.ok_or_else(|| Error::parse("manifest", "no phase grid"))?;
            written += redraw_fields(&args.input, &out, &grid, scale)?;
        }
        "sweep" => {
            let sweep = sweep_from_manifest(&args.input, &m)?;
            draw_sweep(&out, &sweep, scale)?;
            written += 1;
        }
        "cluster" => {
            let pgrid = m
                .spec
                .param_grid
                .clone()
                .ok_or_else(|| Error::parse("manifest", "no parameter grid"))?;
            for stage in m
                .stages
                .keys()
                .filter(|s| s.starts_with("labels/") && !s.ends_with("_batch.csv"))
            {
                let text = read_artifact(&args.input.join(stage), "cluster labels")?;
                let labels = parse_labels_csv(&pgrid, &text)?;
                if pgrid.dim() == 2 {
                    let name = stage.trim_start_matches("labels/").trim_end_matches(".csv");
                    let img = render::render_labels(&labels, pgrid.resolution(), scale)?;
                    save_ppm(&img, &out.join(format!("images/{name}.ppm")))?;
                    written += 1;
                }
            }
        }
        other => return Err(Error::InvalidArgument(format!("nothing to render for a {other} run"))),
    }
    println!("rendered {written} artifact group(s) into {}", out.display());
    Ok(())
}

fn redraw_fields(dir: &Path, out: &Path, grid: &Grid, scale: usize) -> Result<usize> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(0);
    };
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.starts_with("set") && n.ends_with(".csv") && !n.ends_with("_colorbar.csv"))
        .collect();
    names.sort();
    for n in &names {
        let Ok(set) = n["set".len()..n.len() - ".csv".len()].parse::<usize>() else {
            continue;
        };
        let field = parse_field_csv(grid, &read_artifact(&dir.join(n), "recurrence field")?)?;
        draw_field(out, grid, set, &field, scale)?;
    }
    Ok(names.len())
}

fn parse_labels_csv(pgrid: &ParameterGrid, text: &str) -> Result<Vec<Option<i64>>> {
    let mut out = vec![None; pgrid.len()];
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::parse("cluster labels", format!("line {}", lineno + 1));
        let vals: Vec<&str> = line.split(',').collect();
        let (label, coords) = vals.split_last().ok_or_else(bad)?;
        let coords = coords
            .iter()
            .map(|v| v.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let index = if coords.is_empty() {
            0
        } else {
            pgrid.grid.linear_coords(&coords)?
        };
        *out.get_mut(index).ok_or_else(bad)? = Some(label.trim().parse().map_err(|_| bad())?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_syntax() {
        assert_eq!(parse_interval("0.5").unwrap(), Interval::point(0.5).unwrap());
        assert_eq!(parse_interval("[-1, 2]").unwrap(), Interval::new(-1.0, 2.0).unwrap());
        assert_eq!(parse_interval("-1:2").unwrap(), Interval::new(-1.0, 2.0).unwrap());
        let c = parse_interval("1~0.5").unwrap();
        assert_eq!((c.lo(), c.hi()), (0.75, 1.25));
        assert!(parse_interval("2:1").is_err());
        assert!(parse_interval("x").is_err());
        assert!(parse_interval("1~-1").is_err());
    }

    #[test]
    fn params_override_defaults() {
        let pb = parse_params(MapKind::Chialvo, Some("k=[0.0262,0.0264],b=0.28")).unwrap();
        assert_eq!(pb.intervals()[0], Interval::point(0.89).unwrap());
        assert_eq!(pb.intervals()[1], Interval::point(0.28).unwrap());
        assert_eq!(pb.intervals()[3], Interval::new(0.0262, 0.0264).unwrap());
        assert!(parse_params(MapKind::Chialvo, Some("z=1")).is_err());
        assert!(parse_params(MapKind::Chialvo, Some("a")).is_err());
    }

    #[test]
    fn boxes_and_resolutions() {
        assert_eq!(parse_bounds("-0.1:9,-5:3").unwrap(), vec![(-0.1, 9.0), (-5.0, 3.0)]);
        assert_eq!(parse_resolution("64", 2).unwrap(), vec![64, 64]);
        assert_eq!(parse_resolution("64x32", 2).unwrap(), vec![64, 32]);
        assert!(parse_resolution("64x32x2", 2).is_err());
        let (v, r) = parse_param_ranges(MapKind::Chialvo, "b=0:1,k=0:0.2").unwrap();
        assert_eq!(v, vec![1, 3]);
        assert_eq!(r, vec![(0.0, 1.0), (0.0, 0.2)]);
    }

    #[test]
    fn initial_conditions() {
        match parse_ics("3x2@0:1,-1:1", 2).unwrap() {
            InitialConditions::Lattice(l) => assert_eq!(l.len(), 6),
            other => panic!("{other:?}"),
        }
        match parse_ics("0,1;2,3", 2).unwrap() {
            InitialConditions::List(v) => assert_eq!(v, vec![vec![0.0, 1.0], vec![2.0, 3.0]]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), 1);
        assert_eq!(
            exit_code(&Error::NotStronglyConnected {
                components: 2,
                cells: 2
            }),
            1
        );
        assert_eq!(
            exit_code(&Error::MissingArtifact {
                path: "x".into(),
                what: "y".into()
            }),
            2
        );
        assert_eq!(exit_code(&Error::ZeroVariance { column: "nfrrv" }), 3);
    }

    #[test]
    fn config_tokens() {
        let t: toml::Table = "[sweep]\nrecurrence = true\nthreshold = 5\nparam-box = \"b=0:1\"\nquiet = false\n"
            .parse()
            .unwrap();
        let c = Config {
            workers: None,
            deterministic: false,
            verbose: 0,
            commands: t,
        };
        let mut args = c.command_args("sweep");
        args.sort();
        assert_eq!(args, vec!["--param-box=b=0:1", "--recurrence", "--threshold=5"]);
        assert!(c.command_args("analyze").is_empty());
    }
}
