//! Parameter sweeps, clutching matches between neighbouring parameter boxes
//! and continuation classes.
//!
//! A sweep analyses every box of a [`ParameterGrid`] independently. With a
//! store directory, each finished box is written as `boxes/<i>_<j>.csv`
//! (cells of every Morse set) followed by `boxes/<i>_<j>.json` (summary). The
//! summary is written last through a rename, so its presence marks the box as
//! complete and an interrupted sweep resumes where it stopped.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{ParamBox, ParamMap};
use crate::error::{Error, Result};
use crate::graphrep::{MorseDecomposition, MorseSet, Representation};
use crate::grid::{CellIndex, Grid, RectangularSet};
use crate::interval::{Interval, IntervalRect};
use crate::recurrence::{RecurrenceAlgorithm, RecurrenceField, HISTOGRAM_BARS};

pub const RECORD_SCHEMA: u32 = 1;

/// Sets smaller than this are not analysed for recurrence in sweeps.
pub const DEFAULT_RECURRENCE_THRESHOLD: usize = 1000;

/// Uniform grid of parameter boxes. Axis `i` of `region` binds to parameter
/// `varying[i]`; every other parameter takes its value from `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    pub grid: Grid,
    pub varying: Vec<usize>,
    pub base: ParamBox,
}

impl ParameterGrid {
    pub fn new(region: RectangularSet, resolution: Vec<usize>, varying: Vec<usize>, base: ParamBox) -> Result<Self> {
        let grid = Grid::new(region, resolution)?;
        if varying.len() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                found: varying.len(),
            });
        }
        for (i, &p) in varying.iter().enumerate() {
            if p >= base.len() {
                return Err(Error::InvalidArgument(format!(
                    "parameter index {p} out of range for {} parameters",
                    base.len()
                )));
            }
            if varying[..i].contains(&p) {
                return Err(Error::InvalidArgument(format!("parameter {p} bound to two axes")));
            }
        }
        Ok(ParameterGrid { grid, varying, base })
    }

    /// A single box equal to `base`.
    pub fn single(base: ParamBox) -> Self {
        let grid = Grid::from_bounds(&[(0.0, 1.0)], &[1]).expect("unit grid");
        ParameterGrid {
            grid,
            varying: Vec::new(),
            base,
        }
    }

    pub fn len(&self) -> usize {
        if self.varying.is_empty() {
            1
        } else {
            self.grid.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.varying.len()
    }

    pub fn resolution(&self) -> &[usize] {
        if self.varying.is_empty() {
            &[]
        } else {
            self.grid.resolution()
        }
    }

    pub fn coords(&self, index: usize) -> Vec<usize> {
        if self.varying.is_empty() {
            Vec::new()
        } else {
            self.grid.coords_vec(index)
        }
    }

    /// Parameter intervals of box `index`.
    pub fn param_box(&self, index: usize) -> ParamBox {
        let mut out = self.base.clone();
        if !self.varying.is_empty() {
            let rect = self.grid.cell_rect(index);
            for (&p, &iv) in self.varying.iter().zip(rect.iter()) {
                out.set(p, iv);
            }
        }
        out
    }

    /// Forward face neighbours of box `index`.
    pub fn forward_neighbors(&self, index: usize) -> Vec<usize> {
        (0..self.dim())
            .filter_map(|axis| self.grid.neighbor(index, axis, true))
            .collect()
    }

    /// File stem of a box, e.g. `3_17`.
    pub fn box_name(&self, index: usize) -> String {
        let c = self.coords(index);
        if c.is_empty() {
            "0".to_string()
        } else {
            c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("_")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub recurrence: bool,
    pub recurrence_threshold: usize,
    pub algorithm: RecurrenceAlgorithm,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            recurrence: false,
            recurrence_threshold: DEFAULT_RECURRENCE_THRESHOLD,
            algorithm: RecurrenceAlgorithm::ReverseBfs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub cells: usize,
    pub attracting: bool,
    pub touches_boundary: bool,
    pub bounds: IntervalRect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceSummary {
    pub set: usize,
    pub cells: usize,
    pub mean_rec: f64,
    pub median_rec: f64,
    pub frrv: f64,
    pub nfrrv: f64,
    pub reduced: [f64; HISTOGRAM_BARS],
    pub degenerate: bool,
}

impl RecurrenceSummary {
    pub fn from_field(set: usize, field: &RecurrenceField) -> Self {
        let h = field.histogram();
        RecurrenceSummary {
            set,
            cells: field.len(),
            mean_rec: field.mean_rec,
            median_rec: field.median_rec,
            frrv: field.frrv,
            nfrrv: field.nfrrv,
            reduced: h.reduced,
            degenerate: h.degenerate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RecurrenceStatus {
    NotRequested,
    /// No Morse set away from the boundary.
    NoCandidate,
    BelowThreshold {
        set: usize,
        cells: usize,
    },
    Computed(RecurrenceSummary),
    Failed {
        reason: String,
    },
}

/// Morse decomposition of one parameter box, reduced to what sweeps,
/// clutching and clustering need.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxAnalysis {
    pub sets: Vec<SetSummary>,
    /// Pairs `(i, j)`: a path leads from set `i` to set `j`.
    pub reach: Vec<(usize, usize)>,
    pub total_cells: usize,
    pub escaped_cells: usize,
    pub warnings: Vec<String>,
    pub recurrence: RecurrenceStatus,
    /// Cells of every set; persisted separately as CSV.
    #[serde(skip)]
    pub cells: Vec<Vec<CellIndex>>,
}

impl BoxAnalysis {
    pub fn from_decomposition(rep: &Representation, md: &MorseDecomposition) -> Self {
        let grid = rep.grid();
        let sets = md
            .sets
            .iter()
            .enumerate()
            .map(|(i, s)| SetSummary {
                cells: s.len(),
                attracting: md.attracting[i],
                touches_boundary: md.touches_boundary[i],
                bounds: s.bounding_box(grid).expect("Morse sets are non-empty"),
            })
            .collect();
        let reach = md
            .reach
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&j| (i, j)))
            .collect();
        BoxAnalysis {
            sets,
            reach,
            total_cells: md.total_cells(),
            escaped_cells: rep.escaped_count(),
            warnings: rep.warnings().to_vec(),
            recurrence: RecurrenceStatus::NotRequested,
            cells: md.sets.iter().map(|s| s.cells.clone()).collect(),
        }
    }

    pub fn compute(map: &dyn ParamMap, params: &ParamBox, grid: &Grid, options: &SweepOptions) -> Result<Self> {
        let rep = Representation::build(map, params, grid)?;
        let md = MorseDecomposition::compute(&rep);
        Ok(BoxAnalysis::analyse(&rep, &md, options).0)
    }

    /// Summary of `md` plus, when requested and eligible, the recurrence
    /// field of the largest certified set.
    pub fn analyse(
        rep: &Representation,
        md: &MorseDecomposition,
        options: &SweepOptions,
    ) -> (Self, Option<(usize, RecurrenceField)>) {
        let mut out = BoxAnalysis::from_decomposition(rep, md);
        let mut field = None;
        if options.recurrence {
            out.recurrence = match largest_certified(md) {
                None => RecurrenceStatus::NoCandidate,
                Some(i) if md.sets[i].len() < options.recurrence_threshold => RecurrenceStatus::BelowThreshold {
                    set: i,
                    cells: md.sets[i].len(),
                },
                Some(i) => match RecurrenceField::compute(rep, &md.sets[i], options.algorithm) {
                    Ok(f) => {
                        let s = RecurrenceStatus::Computed(RecurrenceSummary::from_field(i, &f));
                        field = Some((i, f));
                        s
                    }
                    Err(e) => RecurrenceStatus::Failed { reason: e.to_string() },
                },
            };
        }
        (out, field)
    }

    /// Rebuilds the decomposition the summary was made from.
    pub fn decomposition(&self) -> Result<MorseDecomposition> {
        let n = self.sets.len();
        if self.cells.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.cells.len(),
            });
        }
        let mut reach = vec![Vec::new(); n];
        for &(i, j) in &self.reach {
            reach
                .get_mut(i)
                .ok_or_else(|| Error::InvalidArgument(format!("reachability refers to missing set {i}")))?
                .push(j);
        }
        MorseDecomposition::from_parts(
            self.cells.iter().map(|c| MorseSet::new(c.clone())).collect(),
            reach,
            self.sets.iter().map(|s| s.attracting).collect(),
            self.sets.iter().map(|s| s.touches_boundary).collect(),
        )
    }

    pub fn reaches(&self, i: usize, j: usize) -> bool {
        self.reach.binary_search(&(i, j)).is_ok()
    }

    pub fn any_boundary(&self) -> bool {
        self.sets.iter().any(|s| s.touches_boundary)
    }

    /// Hull of the sets that do not touch the boundary.
    pub fn certified_hull(&self) -> Option<IntervalRect> {
        self.sets
            .iter()
            .filter(|s| !s.touches_boundary)
            .map(|s| s.bounds.clone())
            .reduce(|a, b| a.hull(&b))
    }
}

/// Largest Morse set that does not touch the boundary.
pub fn largest_certified(md: &MorseDecomposition) -> Option<usize> {
    (0..md.len())
        .filter(|&i| !md.touches_boundary[i])
        .max_by(|&a, &b| md.sets[a].len().cmp(&md.sets[b].len()).then(b.cmp(&a)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoxOutcome {
    Analysed(BoxAnalysis),
    Failed { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub schema: u32,
    pub index: usize,
    pub coords: Vec<usize>,
    pub params: ParamBox,
    pub outcome: BoxOutcome,
    pub wall_seconds: f64,
}

impl BoxRecord {
    pub fn analysis(&self) -> Option<&BoxAnalysis> {
        match &self.outcome {
            BoxOutcome::Analysed(a) => Some(a),
            BoxOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub pgrid: ParameterGrid,
    pub phase_grid: Grid,
    /// One record per box, in linear box order.
    pub records: Vec<BoxRecord>,
}

impl SweepResult {
    pub fn record(&self, coords: &[usize]) -> Option<&BoxRecord> {
        let i = if coords.is_empty() {
            0
        } else {
            self.pgrid.grid.linear_coords(coords).ok()?
        };
        self.records.get(i)
    }
}

fn analyse_box(
    map: &dyn ParamMap,
    pgrid: &ParameterGrid,
    phase_grid: &Grid,
    options: &SweepOptions,
    index: usize,
) -> BoxRecord {
    let start = Instant::now();
    let params = pgrid.param_box(index);
    let outcome = match BoxAnalysis::compute(map, &params, phase_grid, options) {
        Ok(a) => BoxOutcome::Analysed(a),
        Err(e) => BoxOutcome::Failed { reason: e.to_string() },
    };
    BoxRecord {
        schema: RECORD_SCHEMA,
        index,
        coords: pgrid.coords(index),
        params,
        outcome,
        wall_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Analyses every box of `pgrid` in memory.
pub fn sweep(map: &dyn ParamMap, pgrid: &ParameterGrid, phase_grid: &Grid, options: &SweepOptions) -> SweepResult {
    let records = (0..pgrid.len())
        .into_par_iter()
        .map(|i| analyse_box(map, pgrid, phase_grid, options, i))
        .collect();
    SweepResult {
        pgrid: pgrid.clone(),
        phase_grid: phase_grid.clone(),
        records,
    }
}

/// Like [`sweep`], persisting each box under `dir/boxes` as it completes and
/// reusing boxes already present there.
pub fn sweep_to_dir(
    map: &dyn ParamMap,
    pgrid: &ParameterGrid,
    phase_grid: &Grid,
    options: &SweepOptions,
    dir: &Path,
) -> Result<SweepResult> {
    let store = BoxStore::new(dir);
    fs::create_dir_all(store.boxes_dir())?;
    let records: Vec<Result<BoxRecord>> = (0..pgrid.len())
        .into_par_iter()
        .map(|i| {
            let name = pgrid.box_name(i);
            if let Some(r) = store.load(&name, phase_grid)? {
                if r.index == i {
                    return Ok(r);
                }
            }
            let r = analyse_box(map, pgrid, phase_grid, options, i);
            store.save(&name, &r, phase_grid)?;
            Ok(r)
        })
        .collect();
    Ok(SweepResult {
        pgrid: pgrid.clone(),
        phase_grid: phase_grid.clone(),
        records: records.into_iter().collect::<Result<_>>()?,
    })
}

/// Loads a complete sweep previously written by [`sweep_to_dir`].
pub fn load_sweep(dir: &Path, pgrid: &ParameterGrid, phase_grid: &Grid) -> Result<SweepResult> {
    let store = BoxStore::new(dir);
    let records = (0..pgrid.len())
        .map(|i| {
            let name = pgrid.box_name(i);
            store.load(&name, phase_grid)?.ok_or_else(|| Error::MissingArtifact {
                path: store.summary_path(&name),
                what: format!("sweep record for box {name}"),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        pgrid: pgrid.clone(),
        phase_grid: phase_grid.clone(),
        records,
    })
}

/// Per-box files of a sweep directory.
pub struct BoxStore {
    root: PathBuf,
}

impl BoxStore {
    pub fn new(root: &Path) -> Self {
        BoxStore {
            root: root.to_path_buf(),
        }
    }

    pub fn boxes_dir(&self) -> PathBuf {
        self.root.join("boxes")
    }

    pub fn summary_path(&self, name: &str) -> PathBuf {
        self.boxes_dir().join(format!("{name}.json"))
    }

    pub fn cells_path(&self, name: &str) -> PathBuf {
        self.boxes_dir().join(format!("{name}.csv"))
    }

    pub fn save(&self, name: &str, record: &BoxRecord, phase_grid: &Grid) -> Result<()> {
        let cells = match &record.outcome {
            BoxOutcome::Analysed(a) => cells_csv(phase_grid, &a.cells),
            BoxOutcome::Failed { .. } => cells_csv(phase_grid, &[]),
        };
        write_atomic(&self.cells_path(name), cells.as_bytes())?;
        let json = serde_json::to_vec_pretty(record)?;
        write_atomic(&self.summary_path(name), &json)
    }

    /// `None` when the box has not been completed.
    pub fn load(&self, name: &str, phase_grid: &Grid) -> Result<Option<BoxRecord>> {
        let path = self.summary_path(name);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let mut record: BoxRecord = serde_json::from_slice(&bytes)?;
        if record.schema != RECORD_SCHEMA {
            return Err(Error::parse(
                path.display().to_string(),
                format!("record schema {} (expected {RECORD_SCHEMA})", record.schema),
            ));
        }
        if let BoxOutcome::Analysed(a) = &mut record.outcome {
            let text = fs::read_to_string(self.cells_path(name))?;
            a.cells = parse_cells_csv(phase_grid, &text, a.sets.len())?;
        }
        Ok(Some(record))
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// `set,c0,c1,...` with one row per cell.
pub fn cells_csv(grid: &Grid, sets: &[Vec<CellIndex>]) -> String {
    let mut out = String::from("set");
    for axis in 0..grid.dim() {
        out.push_str(&format!(",c{axis}"));
    }
    out.push('\n');
    let mut coords = Vec::new();
    for (i, cells) in sets.iter().enumerate() {
        for &c in cells {
            grid.coords_into(c, &mut coords);
            out.push_str(&i.to_string());
            for v in &coords {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
    }
    out
}

pub fn parse_cells_csv(grid: &Grid, text: &str, nsets: usize) -> Result<Vec<Vec<CellIndex>>> {
    let mut sets = vec![Vec::new(); nsets];
    let mut coords = Vec::with_capacity(grid.dim());
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |d: &str| Error::parse("cell list", format!("line {}: {d}", lineno + 1));
        let mut fields = line.split(',');
        let set: usize = fields
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("bad set index"))?;
        coords.clear();
        for f in fields {
            coords.push(f.trim().parse::<usize>().map_err(|_| bad("bad coordinate"))?);
        }
        let cell = grid.linear_coords(&coords)?;
        sets.get_mut(set)
            .ok_or_else(|| bad("set index out of range"))?
            .push(cell);
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    Ok(sets)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "failure", rename_all = "kebab-case")]
pub enum MatchFailure {
    /// A set meets no set on the other side.
    Unmatched {
        side: Side,
        set: usize,
    },
    /// A component of the clutching graph holds several sets of one side.
    Merged {
        side: Side,
        sets: Vec<usize>,
    },
    /// The bijection does not carry one reachability relation onto the other.
    OrderViolation {
        first: (usize, usize),
        second: (usize, usize),
    },
    BoundaryTouching {
        side: Side,
    },
    GridMismatch,
    AnalysisFailed {
        side: Side,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchResult {
    /// `bijection[i]` is the set of the second decomposition matched to set `i`
    /// of the first.
    Matched {
        bijection: Vec<usize>,
    },
    Failed(MatchFailure),
}

impl MatchResult {
    pub fn is_match(&self) -> bool {
        matches!(self, MatchResult::Matched { .. })
    }
}

fn sorted_lists_meet(a: &[CellIndex], b: &[CellIndex]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // smaller root wins so labels do not depend on union order
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// Clutching graph test between two decompositions over the same phase grid:
/// sets are joined when they share a cell; success requires every connected
/// component to hold exactly one set of each side and the resulting bijection
/// to preserve reachability in both directions.
pub fn clutching_match(a: &BoxAnalysis, b: &BoxAnalysis) -> MatchResult {
    use MatchFailure::*;
    if a.any_boundary() {
        return MatchResult::Failed(BoundaryTouching { side: Side::First });
    }
    if b.any_boundary() {
        return MatchResult::Failed(BoundaryTouching { side: Side::Second });
    }
    let (na, nb) = (a.cells.len(), b.cells.len());
    let mut parent: Vec<usize> = (0..na + nb).collect();
    for i in 0..na {
        for j in 0..nb {
            if sorted_lists_meet(&a.cells[i], &b.cells[j]) {
                union(&mut parent, i, na + j);
            }
        }
    }
    let mut firsts: Vec<Vec<usize>> = vec![Vec::new(); na + nb];
    let mut seconds: Vec<Vec<usize>> = vec![Vec::new(); na + nb];
    for i in 0..na {
        let r = find(&mut parent, i);
        firsts[r].push(i);
    }
    for j in 0..nb {
        let r = find(&mut parent, na + j);
        seconds[r].push(j);
    }
    let mut bijection = vec![usize::MAX; na];
    for r in 0..na + nb {
        match (firsts[r].len(), seconds[r].len()) {
            (0, 0) => {}
            (1, 1) => bijection[firsts[r][0]] = seconds[r][0],
            (1, 0) => {
                return MatchResult::Failed(Unmatched {
                    side: Side::First,
                    set: firsts[r][0],
                })
            }
            (0, 1) => {
                return MatchResult::Failed(Unmatched {
                    side: Side::Second,
                    set: seconds[r][0],
                })
            }
            (p, _) if p > 1 => {
                return MatchResult::Failed(Merged {
                    side: Side::First,
                    sets: firsts[r].clone(),
                })
            }
            _ => {
                return MatchResult::Failed(Merged {
                    side: Side::Second,
                    sets: seconds[r].clone(),
                })
            }
        }
    }
    for i in 0..na {
        for k in 0..na {
            let (j, l) = (bijection[i], bijection[k]);
            if a.reaches(i, k) != b.reaches(j, l) {
                return MatchResult::Failed(OrderViolation {
                    first: (i, k),
                    second: (j, l),
                });
            }
        }
    }
    MatchResult::Matched { bijection }
}

/// Match between two sweep records.
pub fn match_records(a: &BoxRecord, b: &BoxRecord) -> MatchResult {
    match (a.analysis(), b.analysis()) {
        (None, _) => MatchResult::Failed(MatchFailure::AnalysisFailed { side: Side::First }),
        (_, None) => MatchResult::Failed(MatchFailure::AnalysisFailed { side: Side::Second }),
        (Some(x), Some(y)) => clutching_match(x, y),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationDiagram {
    /// Class of every box in linear box order, numbered from 0 in order of
    /// first appearance.
    pub labels: Vec<u32>,
    pub class_count: usize,
    /// Face-adjacent box pairs whose clutching match failed.
    pub failed_edges: Vec<(usize, usize)>,
}

/// Union of face-adjacent boxes whose decompositions match.
pub fn continuation_classes(sweep: &SweepResult) -> ContinuationDiagram {
    let pgrid = &sweep.pgrid;
    let n = sweep.records.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| pgrid.forward_neighbors(i).into_iter().map(move |j| (i, j)))
        .collect();
    let matched: Vec<bool> = pairs
        .par_iter()
        .map(|&(i, j)| match_records(&sweep.records[i], &sweep.records[j]).is_match())
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut failed_edges = Vec::new();
    for (&(i, j), &ok) in pairs.iter().zip(&matched) {
        if ok {
            union(&mut parent, i, j);
        } else {
            failed_edges.push((i, j));
        }
    }
    let mut label_of_root = vec![u32::MAX; n];
    let mut labels = Vec::with_capacity(n);
    let mut class_count = 0usize;
    for i in 0..n {
        let r = find(&mut parent, i);
        if label_of_root[r] == u32::MAX {
            label_of_root[r] = class_count as u32;
            class_count += 1;
        }
        labels.push(label_of_root[r]);
    }
    ContinuationDiagram {
        labels,
        class_count,
        failed_edges,
    }
}

impl ContinuationDiagram {
    /// `c0,c1,...,class` per box.
    pub fn to_csv(&self, pgrid: &ParameterGrid) -> String {
        let mut out = String::new();
        for axis in 0..pgrid.dim() {
            out.push_str(&format!("c{axis},"));
        }
        out.push_str("class\n");
        for (i, l) in self.labels.iter().enumerate() {
            for c in pgrid.coords(i) {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!("{l}\n"));
        }
        out
    }
}

/// Per-box scalar summaries of a sweep as CSV:
/// box coordinates, parameter intervals, set count, total cells, largest set,
/// boundary sets, recurrence statistics (empty when absent).
pub fn sweep_summary_csv(sweep: &SweepResult, param_names: &[&str]) -> String {
    let pgrid = &sweep.pgrid;
    let mut out = String::new();
    for axis in 0..pgrid.dim() {
        out.push_str(&format!("c{axis},"));
    }
    for &p in &pgrid.varying {
        let name = param_names.get(p).copied().unwrap_or("p");
        out.push_str(&format!("{name}_lo,{name}_hi,"));
    }
    out.push_str(
        "status,sets,morse_cells,largest,boundary_sets,attracting_sets,rec_cells,mean_rec,median_rec,frrv,nfrrv\n",
    );
    for r in &sweep.records {
        for c in &r.coords {
            out.push_str(&format!("{c},"));
        }
        for &p in &pgrid.varying {
            let iv: Interval = r.params.intervals()[p];
            out.push_str(&format!("{},{},", iv.lo(), iv.hi()));
        }
        match &r.outcome {
            BoxOutcome::Failed { .. } => out.push_str("failed,,,,,,,,,,\n"),
            BoxOutcome::Analysed(a) => {
                let largest = a.sets.iter().map(|s| s.cells).max().unwrap_or(0);
                let boundary = a.sets.iter().filter(|s| s.touches_boundary).count();
                let attracting = a.sets.iter().filter(|s| s.attracting).count();
                out.push_str(&format!(
                    "ok,{},{},{},{},{},",
                    a.sets.len(),
                    a.total_cells,
                    largest,
                    boundary,
                    attracting
                ));
                match &a.recurrence {
                    RecurrenceStatus::Computed(s) => out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        s.cells, s.mean_rec, s.median_rec, s.frrv, s.nfrrv
                    )),
                    _ => out.push_str(",,,,\n"),
                }
            }
        }
    }
    out
}

/// Histogram of a computed recurrence summary, for callers that only kept the
/// reduced bars.
pub fn reduced_bars(status: &RecurrenceStatus) -> Option<&[f64; HISTOGRAM_BARS]> {
    match status {
        RecurrenceStatus::Computed(s) if !s.degenerate => Some(&s.reduced),
        _ => None,
    }
}
