//! Cluster quality reports and labeling benchmarks.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::labeling::{label_grid, label_knn_adjacency, label_mst_adjacency, ClusterAssignment, LabelSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPrecision {
    pub id: u32,
    pub size: usize,
    pub majority_class: u32,
    pub majority_fraction: f64,
}

/// Majority-class purity of an assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionReport {
    /// ordered by size, largest first
    pub clusters: Vec<ClusterPrecision>,
    /// majority members over all points, unclustered ones included
    pub overall_precision: f64,
    pub unclassified: usize,
    pub misclassified: usize,
}

fn check_tags(assignment: &ClusterAssignment, tags: &[u32]) -> Result<()> {
    if assignment.len() != tags.len() {
        return Err(Error::MissingTags(assignment.len().saturating_sub(tags.len())));
    }
    Ok(())
}

/// Class counts per cluster id (0 included).
fn tally(assignment: &ClusterAssignment, tags: &[u32]) -> BTreeMap<u32, BTreeMap<u32, usize>> {
    let mut t: BTreeMap<u32, BTreeMap<u32, usize>> = BTreeMap::new();
    for (&l, &c) in assignment.labels().iter().zip(tags) {
        *t.entry(l).or_default().entry(c).or_insert(0) += 1;
    }
    t
}

pub fn precision(assignment: &ClusterAssignment, tags: &[u32]) -> Result<PrecisionReport> {
    check_tags(assignment, tags)?;
    let mut clusters = Vec::new();
    let mut majority_total = 0;
    let mut misclassified = 0;
    for (id, counts) in tally(assignment, tags) {
        if id == 0 {
            continue;
        }
        let size: usize = counts.values().sum();
        // most frequent class; the smaller class number wins ties
        let (&class, &count) = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .expect("clusters are non-empty");
        majority_total += count;
        misclassified += size - count;
        clusters.push(ClusterPrecision {
            id,
            size,
            majority_class: class,
            majority_fraction: count as f64 / size as f64,
        });
    }
    clusters.sort_by(|a, b| b.size.cmp(&a.size).then(a.id.cmp(&b.id)));
    let n = assignment.len();
    Ok(PrecisionReport {
        clusters,
        overall_precision: if n == 0 { 0.0 } else { majority_total as f64 / n as f64 },
        unclassified: assignment.unclustered(),
        misclassified,
    })
}

impl PrecisionReport {
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{:>8} {:>6} {:>9} {:>9}", "cluster", "size", "majority", "fraction")?;
        for c in &self.clusters {
            writeln!(
                out,
                "{:>8} {:>6} {:>9} {:>9.3}",
                c.id, c.size, c.majority_class, c.majority_fraction
            )?;
        }
        writeln!(out, "precision {:.4}", self.overall_precision)?;
        writeln!(out, "unclassified {}", self.unclassified)?;
        writeln!(out, "misclassified {}", self.misclassified)?;
        Ok(())
    }
}

/// One row per cluster with the share of each class, plus the whole-data
/// baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistributionTable {
    pub classes: Vec<u32>,
    /// `(cluster id, size, fraction per class)`; id 0 collects unclustered
    /// points when there are any
    pub rows: Vec<(u32, usize, Vec<f64>)>,
    pub baseline: (usize, Vec<f64>),
}

pub fn class_distribution(assignment: &ClusterAssignment, tags: &[u32]) -> Result<ClassDistributionTable> {
    check_tags(assignment, tags)?;
    let classes: Vec<u32> = {
        let mut c: Vec<u32> = tags.to_vec();
        c.sort_unstable();
        c.dedup();
        c
    };
    let fractions = |counts: &BTreeMap<u32, usize>, size: usize| -> Vec<f64> {
        classes
            .iter()
            .map(|c| counts.get(c).copied().unwrap_or(0) as f64 / size as f64)
            .collect()
    };
    let mut rows = Vec::new();
    for (id, counts) in tally(assignment, tags) {
        let size = counts.values().sum();
        rows.push((id, size, fractions(&counts, size)));
    }
    // clusters by id, unclustered last
    rows.sort_by_key(|r| if r.0 == 0 { u32::MAX } else { r.0 });
    let mut all = BTreeMap::new();
    for &c in tags {
        *all.entry(c).or_insert(0) += 1;
    }
    let baseline = (tags.len(), fractions(&all, tags.len().max(1)));
    Ok(ClassDistributionTable { classes, rows, baseline })
}

impl ClassDistributionTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let head: Vec<String> = self.classes.iter().map(|c| format!("class{c}")).collect();
        writeln!(out, "cluster,{},size", head.join(","))?;
        let line = |label: String, f: &[f64], size: usize| {
            let cells: Vec<String> = f.iter().map(|v| format!("{v:.4}")).collect();
            format!("{label},{},{size}", cells.join(","))
        };
        for (id, size, f) in &self.rows {
            writeln!(out, "{}", line(id.to_string(), f, *size))?;
        }
        writeln!(out, "{}", line("all".into(), &self.baseline.1, self.baseline.0))?;
        Ok(())
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "{:>8}", "cluster")?;
        for c in &self.classes {
            write!(out, " {:>7}", format!("class{c}"))?;
        }
        writeln!(out, " {:>6}", "size")?;
        let mut line = |label: &str, f: &[f64], size: usize| -> Result<()> {
            write!(out, "{label:>8}")?;
            for v in f {
                write!(out, " {:>6.1}%", 100.0 * v)?;
            }
            writeln!(out, " {size:>6}")?;
            Ok(())
        };
        for (id, size, f) in &self.rows {
            line(&id.to_string(), f, *size)?;
        }
        line("all", &self.baseline.1, self.baseline.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum LabelMethod {
    #[default]
    Grid,
    KnnAdj,
    MstAdj,
}

impl LabelMethod {
    pub const ALL: [LabelMethod; 3] = [LabelMethod::Grid, LabelMethod::KnnAdj, LabelMethod::MstAdj];

    pub fn name(self) -> &'static str {
        match self {
            LabelMethod::Grid => "grid",
            LabelMethod::KnnAdj => "knn-adj",
            LabelMethod::MstAdj => "mst-adj",
        }
    }
}

impl fmt::Display for LabelMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LabelMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "grid" => Ok(LabelMethod::Grid),
            "knn-adj" | "knn" | "nn-adj" => Ok(LabelMethod::KnnAdj),
            "mst-adj" | "mst" => Ok(LabelMethod::MstAdj),
            _ => Err(Error::InvalidParameter(format!("unknown labeling method {s:?}"))),
        }
    }
}

/// Labeling parameters: grid size, neighbour/link count and segment samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelParams {
    pub g: usize,
    pub k: usize,
    pub m: usize,
}

/// Run one labeler; grid size is ignored by the adjacency methods.
pub fn run_labeling(space: &LabelSpace, method: LabelMethod, p: LabelParams) -> Result<ClusterAssignment> {
    match method {
        LabelMethod::Grid => label_grid(space, p.g, p.k).map(|(_, a)| a),
        LabelMethod::KnnAdj => label_knn_adjacency(space, p.k, p.m),
        LabelMethod::MstAdj => label_mst_adjacency(space, p.k, p.m),
    }
}

/// Timing of one labeler configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub method: LabelMethod,
    pub n: usize,
    /// grid size; 0 for the adjacency methods
    pub g: usize,
    /// every timed repeat, in seconds
    pub times: Vec<f64>,
    /// median of `times`
    pub wall_time: f64,
    /// kernel evaluations of one labeling run
    pub op_count: u64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Time one labeler: a warm-up run, then `repeats` timed runs.
pub fn bench_labeling(
    space: &LabelSpace,
    method: LabelMethod,
    params: LabelParams,
    repeats: usize,
) -> Result<BenchResult> {
    if repeats < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 repeats, got {repeats}")));
    }
    run_labeling(space, method, params)?;
    let mut times = Vec::with_capacity(repeats);
    let mut op_count = 0;
    for _ in 0..repeats {
        space.reset_kernel_evals();
        let start = Instant::now();
        let out = run_labeling(space, method, params)?;
        let elapsed = start.elapsed().as_secs_f64();
        std::hint::black_box(out);
        op_count = space.kernel_evals();
        // a tiny floor keeps the positivity invariant on coarse clocks
        times.push(elapsed.max(1e-9));
    }
    Ok(BenchResult {
        method,
        n: space.len(),
        g: if method == LabelMethod::Grid { params.g } else { 0 },
        wall_time: median(&times),
        times,
        op_count,
    })
}

/// CSV with one row per (method, N, G, repeat); the last two columns give
/// the median time and the speed relative to the grid method at the same N
/// (the first grid configuration found for that N).
pub fn write_bench_csv<W: Write>(results: &[BenchResult], mut out: W) -> Result<()> {
    writeln!(out, "method,n,g,repeat,seconds,op_count,median_seconds,speed_vs_grid")?;
    for r in results {
        let grid = results
            .iter()
            .find(|x| x.method == LabelMethod::Grid && x.n == r.n)
            .map(|x| x.wall_time);
        let speed = grid.map_or(String::new(), |g| format!("{:.4}", g / r.wall_time));
        for (i, t) in r.times.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{:.9},{},{:.9},{}",
                r.method, r.n, r.g, i, t, r.op_count, r.wall_time, speed
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_mixed_precision() {
        let tags = [1, 1, 2, 2, 3, 3];
        let perfect = ClusterAssignment::new(vec![2, 2, 1, 1, 3, 3]);
        assert_eq!(precision(&perfect, &tags).unwrap().overall_precision, 1.0);
        let one = ClusterAssignment::new(vec![1, 1, 1, 1]);
        let r = precision(&one, &[1, 2, 1, 2]).unwrap();
        assert_eq!(r.overall_precision, 0.5);
        assert_eq!(r.misclassified, 2);
        assert_eq!(r.clusters[0].majority_class, 1);
    }

    #[test]
    fn unclassified_points_count_against_precision() {
        let a = ClusterAssignment::new(vec![1, 1, 0, 2]);
        let r = precision(&a, &[1, 1, 1, 2]).unwrap();
        assert_eq!(r.unclassified, 1);
        assert_eq!(r.overall_precision, 0.75);
        assert_eq!(r.clusters.iter().map(|c| c.size).sum::<usize>() + r.unclassified, 4);
    }

    #[test]
    fn missing_tags_are_reported() {
        let a = ClusterAssignment::new(vec![1, 1]);
        assert!(matches!(precision(&a, &[1]), Err(Error::MissingTags(1))));
    }

    #[test]
    fn single_cluster_matches_baseline() {
        let tags = [1, 2, 2, 3];
        let t = class_distribution(&ClusterAssignment::new(vec![1; 4]), &tags).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].2, t.baseline.1);
        assert!((t.baseline.1.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let single = class_distribution(&ClusterAssignment::new(vec![1, 2, 2, 2]), &tags).unwrap();
        assert_eq!(single.rows[0].2, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn distribution_csv() {
        let t = class_distribution(&ClusterAssignment::new(vec![1, 1, 0]), &[1, 2, 2]).unwrap();
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "cluster,class1,class2,size\n1,0.5000,0.5000,2\n0,0.0000,1.0000,1\nall,0.3333,0.6667,3\n"
        );
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
