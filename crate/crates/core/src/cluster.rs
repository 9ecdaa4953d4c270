//! DBSCAN over recurrence features of parameter boxes.

use serde::{Deserialize, Serialize};

use crate::continuation::{RecurrenceStatus, SweepResult};
use crate::error::{Error, Result};
use crate::recurrence::HISTOGRAM_BARS;

/// `(eps, minpts)` used for reduced histograms under the l1 metric.
pub const HISTOGRAM_PRESET: (f64, usize) = (0.2, 150);
/// `(eps, minpts)` used for standardized `(NFRRV, median)` pairs.
pub const FRR_PRESET: (f64, usize) = (0.8, 100);
/// Factor applied after standardizing the two-column features.
pub const FRR_SCALE: f64 = 7.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L1,
    L2,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Metric::L1),
            "l2" => Ok(Metric::L2),
            _ => Err(Error::InvalidArgument(format!(
                "unknown metric `{s}` (expected l1 or l2)"
            ))),
        }
    }
}

/// Cluster assignment of one row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Noise,
    /// Cluster id, starting at 1.
    Cluster(u32),
}

impl Label {
    /// Cluster id, or -1 for noise.
    pub fn as_i64(self) -> i64 {
        match self {
            Label::Noise => -1,
            Label::Cluster(c) => c as i64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabels {
    pub labels: Vec<Label>,
    pub core: Vec<bool>,
    pub clusters: usize,
}

impl ClusterLabels {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == Label::Noise).count()
    }
}

/// DBSCAN with inclusive neighbourhoods (`distance <= eps`, the point itself
/// counts). Clusters are numbered in the row order of their first core point;
/// a border point joins the first cluster that reaches it, which is the
/// cluster with the smallest id among its core neighbours.
pub fn dbscan(points: &[Vec<f64>], eps: f64, minpts: usize, metric: Metric) -> Result<ClusterLabels> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if minpts == 0 {
        return Err(Error::InvalidArgument("minpts must be at least 1".into()));
    }
    let n = points.len();
    let neighbours: Vec<Vec<usize>> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .filter(|&j| metric.distance(&points[i], &points[j]) <= eps)
                    .collect()
            })
            .collect()
    };
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= minpts).collect();
    let mut labels = vec![Label::Noise; n];
    let mut assigned = vec![false; n];
    let mut clusters = 0u32;
    let mut queue = Vec::new();
    for start in 0..n {
        if !core[start] || assigned[start] {
            continue;
        }
        clusters += 1;
        let id = Label::Cluster(clusters);
        assigned[start] = true;
        labels[start] = id;
        queue.clear();
        queue.push(start);
        while let Some(p) = queue.pop() {
            for &q in &neighbours[p] {
                if assigned[q] {
                    continue;
                }
                assigned[q] = true;
                labels[q] = id;
                if core[q] {
                    queue.push(q);
                }
            }
        }
    }
    Ok(ClusterLabels {
        labels,
        core,
        clusters: clusters as usize,
    })
}

/// Rows of features with the parameter box each row came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Linear box index of each row.
    pub boxes: Vec<usize>,
    /// Boxes left out, with the reason.
    pub excluded: Vec<(usize, String)>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn eligibility(status: &RecurrenceStatus) -> std::result::Result<(), String> {
    match status {
        RecurrenceStatus::Computed(_) => Ok(()),
        RecurrenceStatus::NotRequested => Err("recurrence not computed".into()),
        RecurrenceStatus::NoCandidate => Err("no Morse set away from the boundary".into()),
        RecurrenceStatus::BelowThreshold { cells, .. } => Err(format!("largest set has {cells} cells")),
        RecurrenceStatus::Failed { reason } => Err(reason.clone()),
    }
}

fn collect<F>(sweep: &SweepResult, min_cells: usize, mut row: F) -> FeatureMatrix
where
    F: FnMut(&crate::continuation::RecurrenceSummary) -> std::result::Result<Vec<f64>, String>,
{
    let mut out = FeatureMatrix {
        columns: Vec::new(),
        rows: Vec::new(),
        boxes: Vec::new(),
        excluded: Vec::new(),
    };
    for (i, r) in sweep.records.iter().enumerate() {
        let Some(a) = r.analysis() else {
            out.excluded.push((i, "analysis failed".into()));
            continue;
        };
        if let Err(why) = eligibility(&a.recurrence) {
            out.excluded.push((i, why));
            continue;
        }
        let RecurrenceStatus::Computed(s) = &a.recurrence else {
            unreachable!()
        };
        if s.cells < min_cells {
            out.excluded.push((i, format!("largest set has {} cells", s.cells)));
            continue;
        }
        match row(s) {
            Ok(v) => {
                out.rows.push(v);
                out.boxes.push(i);
            }
            Err(why) => out.excluded.push((i, why)),
        }
    }
    out
}

/// Reduced recurrence histograms of the boxes whose largest set has at least
/// `min_cells` cells; degenerate histograms are excluded.
pub fn histogram_features(sweep: &SweepResult, min_cells: usize) -> FeatureMatrix {
    let mut m = collect(sweep, min_cells, |s| {
        if s.degenerate {
            Err("degenerate histogram".into())
        } else {
            Ok(s.reduced.to_vec())
        }
    });
    m.columns = (0..HISTOGRAM_BARS).map(|b| format!("bar{b}")).collect();
    m
}

/// `(NFRRV, median recurrence)` per eligible box, each column standardized
/// with the population standard deviation and multiplied by 7.
pub fn frr_features(sweep: &SweepResult, min_cells: usize) -> Result<FeatureMatrix> {
    let mut m = collect(sweep, min_cells, |s| Ok(vec![s.nfrrv, s.median_rec]));
    m.columns = vec!["nfrrv".into(), "median_rec".into()];
    standardize(&mut m.rows, &["nfrrv", "median_rec"], FRR_SCALE)?;
    Ok(m)
}

/// Subtracts the column mean, divides by the population standard deviation
/// and multiplies by `scale`.
pub fn standardize(rows: &mut [Vec<f64>], names: &[&'static str], scale: f64) -> Result<()> {
    if rows.is_empty() {
        return Ok(());
    }
    let n = rows.len() as f64;
    for (c, &name) in names.iter().enumerate() {
        let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[c] - mean) * (r[c] - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > 0.0) {
            return Err(Error::ZeroVariance { column: name });
        }
        for r in rows.iter_mut() {
            r[c] = (r[c] - mean) / sd * scale;
        }
    }
    Ok(())
}

/// The searched grid: eps in 0.1..=1.4 step 0.1, minpts in 50..=300 step 50.
pub fn batch_grid() -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    for e in 1..=14 {
        for p in (50..=300).step_by(50) {
            out.push((e as f64 / 10.0, p));
        }
    }
    out
}

/// Labels as CSV: box coordinates then label (-1 for noise).
pub fn labels_csv(sweep: &SweepResult, features: &FeatureMatrix, labels: &ClusterLabels) -> String {
    let mut out = String::new();
    for axis in 0..sweep.pgrid.dim() {
        out.push_str(&format!("c{axis},"));
    }
    out.push_str("label\n");
    for (&b, l) in features.boxes.iter().zip(&labels.labels) {
        for c in sweep.pgrid.coords(b) {
            out.push_str(&format!("{c},"));
        }
        out.push_str(&format!("{}\n", l.as_i64()));
    }
    out
}

/// Features as CSV: box coordinates then feature columns.
pub fn features_csv(sweep: &SweepResult, features: &FeatureMatrix) -> String {
    let mut out = String::new();
    for axis in 0..sweep.pgrid.dim() {
        out.push_str(&format!("c{axis},"));
    }
    out.push_str(&features.columns.join(","));
    out.push('\n');
    for (&b, row) in features.boxes.iter().zip(&features.rows) {
        for c in sweep.pgrid.coords(b) {
            out.push_str(&format!("{c},"));
        }
        out.push_str(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_cases() {
        let r = dbscan(&[vec![0.0]], 1.0, 2, Metric::L1).unwrap();
        assert_eq!(r.labels, vec![Label::Noise]);
        let same = vec![vec![3.0, 4.0]; 6];
        let r = dbscan(&same, 0.5, 6, Metric::L2).unwrap();
        assert_eq!(r.clusters, 1);
        assert!(r.labels.iter().all(|l| *l == Label::Cluster(1)));
        assert!(dbscan(&same, 0.0, 1, Metric::L1).is_err());
        assert!(dbscan(&same, 1.0, 0, Metric::L1).is_err());
        assert_eq!(dbscan(&[], 1.0, 1, Metric::L1).unwrap().labels, vec![]);
    }

    #[test]
    fn border_joins_first_cluster() {
        // cores at 0 and 2, border at 1 within reach of both
        let pts: Vec<Vec<f64>> = [0.0, -1.0, -0.5, 1.0, 3.0, 2.5, 2.0].iter().map(|&x| vec![x]).collect();
        let r = dbscan(&pts, 1.0, 4, Metric::L1).unwrap();
        assert_eq!(r.core, vec![true, false, false, false, false, false, true]);
        assert_eq!(r.clusters, 2);
        assert_eq!(r.labels[3], Label::Cluster(1));
        assert_eq!(r.labels[4], Label::Cluster(2));
        assert_eq!(r.noise_count(), 0);
    }

    #[test]
    fn standardization() {
        let mut rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        standardize(&mut rows, &["x", "y"], 7.0).unwrap();
        let s = 7.0 / (2.0f64 / 3.0).sqrt();
        for (r, e) in rows.iter().zip([-s, 0.0, s]) {
            assert!((r[0] - e).abs() < 1e-12 && (r[1] - e).abs() < 1e-12);
        }
        let mut flat = vec![vec![1.0, 0.0], vec![1.0, 2.0]];
        assert!(matches!(
            standardize(&mut flat, &["nfrrv", "median_rec"], 7.0),
            Err(Error::ZeroVariance { column: "nfrrv" })
        ));
    }

    #[test]
    fn batch_has_paper_presets() {
        let g = batch_grid();
        assert_eq!(g.len(), 14 * 6);
        assert!(g.contains(&(0.2, 150)));
        assert!(g.contains(&(0.8, 100)));
    }
}
