//! Two-dimensional coordinates for the grid labeler: either two attribute
//! columns or the first two correspondence-analysis axes.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

const DEGENERATE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionSource {
    /// zero-based attribute columns
    Columns(usize, usize),
    Coa,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection2D {
    coords: Vec<[f64; 2]>,
    source: ProjectionSource,
    min: [f64; 2],
    max: [f64; 2],
    /// leading singular values of the residual matrix (COA only)
    inertia: Vec<f64>,
}

impl Projection2D {
    /// Wrap raw coordinates; degenerate axes get a ±0.5 box.
    pub fn from_coords(coords: Vec<[f64; 2]>, source: ProjectionSource) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidData("no points to project".into()));
        }
        if coords.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite projected coordinate".into()));
        }
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in &coords {
            for a in 0..2 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        for a in 0..2 {
            if max[a] - min[a] <= DEGENERATE {
                min[a] -= 0.5;
                max[a] += 0.5;
            }
        }
        Ok(Projection2D {
            coords,
            source,
            min,
            max,
            inertia: Vec::new(),
        })
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

    pub fn source(&self) -> ProjectionSource {
        self.source
    }

    pub fn min(&self) -> [f64; 2] {
        self.min
    }

    pub fn max(&self) -> [f64; 2] {
        self.max
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.inertia
    }

    /// Coordinates as an N×2 matrix named like `names`.
    pub fn to_matrix(&self, names: &[String]) -> Result<DataMatrix> {
        let rows = self.coords.iter().map(|p| p.to_vec()).collect();
        DataMatrix::from_rows(rows, Some(names.to_vec()))?
            .with_col_names(vec!["c1".into(), "c2".into()])
    }

    /// CSV with one `name,c1,c2` line per point.
    pub fn write_csv<W: Write>(&self, mut out: W, names: &[String]) -> Result<()> {
        writeln!(out, "name,c1,c2")?;
        for (i, p) in self.coords.iter().enumerate() {
            let name = names.get(i).map(String::as_str).unwrap_or("");
            writeln!(out, "{},{:?},{:?}", csv_field(name), p[0], p[1])?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, names: &[String]) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f), names)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// The `k` leading left singular directions scaled by their singular values
/// (`U_k Σ_k`), with the singular values, largest first.
///
/// Computed from the eigendecomposition of the smaller Gram matrix: nalgebra's
/// bidiagonal SVD loses accuracy on the rank-deficient residual matrices that
/// correspondence analysis always produces.
fn leading_axes(s: &DMatrix<f64>, k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (n, m) = s.shape();
    let tall = n >= m;
    let gram = if tall { s.transpose() * s } else { s * s.transpose() };
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut axes = Vec::new();
    let mut sigma = Vec::new();
    for &j in order.iter().take(k) {
        let sv = eig.eigenvalues[j].max(0.0).sqrt();
        let vec = eig.eigenvectors.column(j);
        let col: Vec<f64> = if tall {
            // S v = σ u
            (s * vec).iter().copied().collect()
        } else {
            vec.iter().map(|u| u * sv).collect()
        };
        axes.push(col);
        sigma.push(sv);
    }
    while axes.len() < k {
        axes.push(vec![0.0; n]);
        sigma.push(0.0);
    }
    (axes, sigma)
}

/// Columns `cx`, `cy` (one-based) verbatim, or correspondence analysis when
/// both are 0.
pub fn project(data: &DataMatrix, cx: usize, cy: usize) -> Result<Projection2D> {
    if cx == 0 && cy == 0 {
        return coa(data);
    }
    let d = data.cols();
    if cx == 0 || cy == 0 || cx > d || cy > d || cx == cy {
        return Err(Error::InvalidParameter(format!(
            "projection columns must be two distinct indices in 1..={d}, got ({cx}, {cy})"
        )));
    }
    let coords = (0..data.rows())
        .map(|i| [data.get(i, cx - 1), data.get(i, cy - 1)])
        .collect();
    Projection2D::from_coords(coords, ProjectionSource::Columns(cx - 1, cy - 1))
}

/// Row principal coordinates on the first two axes of the standardized
/// residual matrix `D_r^{-1/2}(P − r cᵀ)D_c^{-1/2}`.
pub fn coa(data: &DataMatrix) -> Result<Projection2D> {
    let (n, m) = (data.rows(), data.cols());
    if let Some(v) = data.values().iter().find(|&&v| v < 0.0) {
        return Err(Error::InvalidData(format!(
            "correspondence analysis needs nonnegative data, found {v}"
        )));
    }
    let total: f64 = data.values().iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidData("zero total mass".into()));
    }
    let r: Vec<f64> = (0..n).map(|i| data.row(i).iter().sum::<f64>() / total).collect();
    let c: Vec<f64> = (0..m).map(|j| data.column(j).iter().sum::<f64>() / total).collect();
    if let Some(i) = r.iter().position(|&v| v <= 0.0) {
        return Err(Error::InvalidData(format!("row {} is all zero", i + 1)));
    }
    if let Some(j) = c.iter().position(|&v| v <= 0.0) {
        return Err(Error::InvalidData(format!("column {} is all zero", j + 1)));
    }
    let s = DMatrix::from_fn(n, m, |i, j| {
        (data.get(i, j) / total - r[i] * c[j]) / (r[i] * c[j]).sqrt()
    });
    let (axes, sigma) = leading_axes(&s, 2);

    let mut coords = vec![[0.0; 2]; n];
    let mut inertia = Vec::new();
    for (axis, (mut col, sigma)) in axes.into_iter().zip(sigma).enumerate() {
        inertia.push(sigma);
        if sigma <= DEGENERATE {
            continue;
        }
        for (v, ri) in col.iter_mut().zip(&r) {
            *v /= ri.sqrt();
        }
        // make the entry of largest magnitude positive
        let mut lead = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        for (p, v) in coords.iter_mut().zip(col) {
            p[axis] = v;
        }
    }
    while inertia.len() < 2 {
        inertia.push(0.0);
    }
    if inertia[1] <= DEGENERATE {
        log::warn!("correspondence analysis has fewer than two nonzero axes");
    }
    let mut proj = Projection2D::from_coords(coords, ProjectionSource::Coa)?;
    proj.inertia = inertia;
    Ok(proj)
}
