//! Cluster extraction from a fitted ball: the grid hashing labeler and two
//! segment-test baselines (k-nearest-neighbour and spanning-tree graphs).
//!
//! All labelers work in the 2-D projected space. The ball is re-evaluated
//! there with the fitted coefficients, so grid points, segment samples and
//! training points are measured by the same radius function.

mod adjacency;
mod grid;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

pub use adjacency::{
    build_adjacency, label_knn_adjacency, label_mst_adjacency, segment_inside, AdjacencyMatrix,
    DEFAULT_SEGMENT_SAMPLES,
};
pub use grid::{label_grid, merge_components, Grid, GridLabeling, MAX_EXTRA_RINGS};

use crate::error::{Error, Result};
use crate::kernels::{KernelKind, VectorKernel};
use crate::optimizer::SvcModel;
use crate::projection::Projection2D;

/// The fitted ball evaluated over projected coordinates.
#[derive(Debug)]
pub struct LabelSpace {
    coords: Vec<[f64; 2]>,
    bounds: ([f64; 2], [f64; 2]),
    kernel: VectorKernel,
    beta: Vec<f64>,
    center_norm_sq: f64,
    r_hat_sq: f64,
    evals: AtomicU64,
}

impl LabelSpace {
    /// Radial fits keep their own kernel shape; every other kind is measured
    /// with a Gaussian of the same width.
    pub fn new(model: &SvcModel, proj: &Projection2D) -> Result<Self> {
        let n = model.n();
        if proj.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: proj.len(),
            });
        }
        let kernel = match model.kernel_kind() {
            KernelKind::Linear => VectorKernel::new(KernelKind::Linear, 0.0)?,
            KernelKind::GaussianDist => VectorKernel::new(KernelKind::GaussianDist, model.q())?,
            _ if model.q() > 0.0 => VectorKernel::gaussian(model.q())?,
            _ => {
                return Err(Error::InvalidParameter(
                    "labeling needs a positive kernel width q".into(),
                ))
            }
        };
        let coords = proj.coords().to_vec();
        let beta = model.beta().to_vec();
        let mut center_norm_sq = 0.0;
        for i in 0..n {
            if beta[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if beta[j] != 0.0 {
                    center_norm_sq += beta[i] * beta[j] * kernel.eval(&coords[i], &coords[j]);
                }
            }
        }
        let mut space = LabelSpace {
            coords,
            bounds: (proj.min(), proj.max()),
            kernel,
            beta,
            center_norm_sq,
            r_hat_sq: 0.0,
            evals: AtomicU64::new(0),
        };
        let radius = |i: usize| space.radius_sq(space.coords[i]);
        let r_hat_sq = if model.sv_indices().is_empty() {
            model.bsv_indices().iter().map(|&i| radius(i)).fold(0.0, f64::max)
        } else {
            let s: f64 = model.sv_indices().iter().map(|&i| radius(i)).sum();
            s / model.sv_indices().len() as f64
        };
        space.r_hat_sq = r_hat_sq;
        space.evals.store(0, Ordering::Relaxed);
        Ok(space)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        self.coords[i]
    }

    pub fn r_hat_sq(&self) -> f64 {
        self.r_hat_sq
    }

    /// Bounding box of the projection: `(min, max)` per axis.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        self.bounds
    }

    /// Squared distance from the center of `y`; costs N kernel evaluations.
    pub fn radius_sq(&self, y: [f64; 2]) -> f64 {
        let mut cross = 0.0;
        for (x, b) in self.coords.iter().zip(&self.beta) {
            if *b != 0.0 {
                cross += b * self.kernel.eval(x, &y);
            }
        }
        self.evals.fetch_add(self.coords.len() as u64, Ordering::Relaxed);
        (self.kernel.eval(&y, &y) - 2.0 * cross + self.center_norm_sq).max(0.0)
    }

    /// Boundary counts as inside.
    pub fn is_inside(&self, y: [f64; 2]) -> bool {
        self.radius_sq(y) <= self.r_hat_sq
    }

    /// Kernel evaluations spent by radius queries since the last reset.
    pub fn kernel_evals(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn reset_kernel_evals(&self) {
        self.evals.store(0, Ordering::Relaxed);
    }
}

/// Cluster id per data point; 0 means unclustered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: Vec<u32>,
    sizes: BTreeMap<u32, usize>,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<u32>) -> Self {
        let mut sizes = BTreeMap::new();
        for &l in &labels {
            if l != 0 {
                *sizes.entry(l).or_insert(0) += 1;
            }
        }
        ClusterAssignment { labels, sizes }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    /// Member count of every non-empty cluster.
    pub fn sizes(&self) -> &BTreeMap<u32, usize> {
        &self.sizes
    }

    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn unclustered(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 0).count()
    }

    pub fn members(&self, id: u32) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == id).collect()
    }

    /// Whether both assignments induce the same partition (id 0 included as
    /// its own block).
    pub fn same_partition(&self, other: &ClusterAssignment) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let mut fwd = BTreeMap::new();
        let mut back = BTreeMap::new();
        for (&a, &b) in self.labels.iter().zip(&other.labels) {
            if (a == 0) != (b == 0) {
                return false;
            }
            if *fwd.entry(a).or_insert(b) != b || *back.entry(b).or_insert(a) != a {
                return false;
            }
        }
        true
    }

    /// CSV with one `name,cluster` line per point.
    pub fn write_csv<W: Write>(&self, mut out: W, names: &[String]) -> Result<()> {
        writeln!(out, "name,cluster")?;
        for (i, l) in self.labels.iter().enumerate() {
            let name = names.get(i).map(String::as_str).unwrap_or("");
            if name.contains([',', '"']) {
                writeln!(out, "\"{}\",{l}", name.replace('"', "\"\""))?;
            } else {
                writeln!(out, "{name},{l}")?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, names: &[String]) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f), names)
    }

    /// Read a `name,cluster` CSV, e.g. one produced by another tool.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<(Vec<String>, ClusterAssignment)> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let mut names = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Format {
                    line: i + 2,
                    message: format!("expected name,cluster but found {} fields", rec.len()),
                });
            }
            let label = rec[1].trim().parse::<u32>().map_err(|_| Error::Parse {
                row: i + 1,
                col: 2,
                value: rec[1].to_string(),
            })?;
            names.push(rec[0].to_string());
            labels.push(label);
        }
        Ok((names, ClusterAssignment::new(labels)))
    }

    pub fn load_csv(path: &Path) -> Result<(Vec<String>, ClusterAssignment)> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        ClusterAssignment::read_csv(std::fs::File::open(path)?)
    }
}

/// Union-find with path halving.
#[derive(Debug, Clone)]
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns whether the sets were distinct.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // smaller root index wins so representatives are order independent
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

/// Dense ids `1..` ordered by member count (descending), then by the
/// smallest member index. `group[i] = None` marks unclustered points.
pub(crate) fn dense_ids(group: &[Option<usize>]) -> Vec<u32> {
    let mut stats: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (i, g) in group.iter().enumerate() {
        if let Some(g) = g {
            let e = stats.entry(*g).or_insert((0, i));
            e.0 += 1;
        }
    }
    let mut order: Vec<(usize, usize, usize)> =
        stats.into_iter().map(|(g, (count, first))| (g, count, first)).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let id: BTreeMap<usize, u32> = order
        .iter()
        .enumerate()
        .map(|(rank, &(g, _, _))| (g, rank as u32 + 1))
        .collect();
    group.iter().map(|g| g.map_or(0, |g| id[&g])).collect()
}
