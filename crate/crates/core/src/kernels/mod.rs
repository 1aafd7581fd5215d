//! Pairwise similarity functions and kernel matrix assembly.

mod edit;
mod sets;
mod strings;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use edit::{levenshtein, LevenshteinWeights};
pub use sets::jaccard;
pub use strings::{spectrum_kernel, substring_kernel};

use crate::data::{DataMatrix, TermDataset};
use crate::error::{Error, Result};

/// Default upper bound of the noise that replaces null Jaccard entries.
pub const JACCARD_NOISE: f64 = 0.05;

/// Diagonal shift applied before optimization.
pub const DIAGONAL_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Linear,
    Gaussian,
    /// `exp(-q·‖x - y‖)`
    GaussianDist,
    Precomputed,
    /// radial kernel over Levenshtein distance profiles
    Lrb,
    /// radial kernel over the pairwise Levenshtein distance
    Rbl,
    /// radial kernel over Jaccard similarity profiles
    Jrb,
    /// radial kernel over the pairwise Jaccard distance
    Rbj,
    /// `Jrb` with null Jaccard entries replaced by small seeded noise
    JrbPlus,
    SkConstant,
    SkSpectrum,
}

impl KernelKind {
    pub const ALL: [KernelKind; 11] = [
        KernelKind::Linear,
        KernelKind::Gaussian,
        KernelKind::GaussianDist,
        KernelKind::Precomputed,
        KernelKind::Lrb,
        KernelKind::Rbl,
        KernelKind::Jrb,
        KernelKind::Rbj,
        KernelKind::JrbPlus,
        KernelKind::SkConstant,
        KernelKind::SkSpectrum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Gaussian => "gaussian",
            KernelKind::GaussianDist => "gaussian-dist",
            KernelKind::Precomputed => "precomputed",
            KernelKind::Lrb => "lrb",
            KernelKind::Rbl => "rbl",
            KernelKind::Jrb => "jrb",
            KernelKind::Rbj => "rbj",
            KernelKind::JrbPlus => "jrb+",
            KernelKind::SkConstant => "sk-constant",
            KernelKind::SkSpectrum => "sk-spectrum",
        }
    }

    /// Kinds of the form `exp(-q·distance)`, which need `q > 0` and have a
    /// unit diagonal.
    pub fn is_radial(self) -> bool {
        matches!(
            self,
            KernelKind::Gaussian
                | KernelKind::GaussianDist
                | KernelKind::Lrb
                | KernelKind::Rbl
                | KernelKind::Jrb
                | KernelKind::Rbj
                | KernelKind::JrbPlus
        )
    }

    /// Kinds evaluated on numeric attribute vectors.
    pub fn is_vector(self) -> bool {
        matches!(
            self,
            KernelKind::Linear | KernelKind::Gaussian | KernelKind::GaussianDist
        )
    }

    /// Kinds evaluated on terms.
    pub fn is_term(self) -> bool {
        !self.is_vector() && self != KernelKind::Precomputed
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let kind = match key.as_str() {
            "linear" | "kernlinear" => KernelKind::Linear,
            "gaussian" | "rbf" | "kerngaussian" => KernelKind::Gaussian,
            "gaussian-dist" | "exponential" | "kerngaussiandist" => KernelKind::GaussianDist,
            "precomputed" => KernelKind::Precomputed,
            "lrb" => KernelKind::Lrb,
            "rbl" => KernelKind::Rbl,
            "jrb" => KernelKind::Jrb,
            "rbj" => KernelKind::Rbj,
            "jrb+" | "jrbplus" | "jrb-plus" => KernelKind::JrbPlus,
            "sk-constant" | "constant" => KernelKind::SkConstant,
            "sk-spectrum" | "spectrum" => KernelKind::SkSpectrum,
            _ => return Err(Error::InvalidParameter(format!("unknown kernel {s:?}"))),
        };
        Ok(kind)
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(-q·‖a - b‖²)`
pub fn gaussian_kernel(a: &[f64], b: &[f64], q: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    check_width(q)?;
    Ok(radial(q * squared_distance(a, b)))
}

/// `exp(-x)`, kept strictly positive so radial entries stay in `(0, 1]`.
#[inline]
fn radial(x: f64) -> f64 {
    (-x).exp().max(f64::MIN_POSITIVE)
}

fn check_width(q: f64) -> Result<()> {
    if q.is_finite() && q > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("kernel width q must be > 0, got {q}")))
    }
}

/// Kernel on numeric vectors; `kind` must be one of the vector kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorKernel {
    kind: KernelKind,
    q: f64,
}

impl VectorKernel {
    pub fn new(kind: KernelKind, q: f64) -> Result<Self> {
        if !kind.is_vector() {
            return Err(Error::NoOutOfSample(kind.name()));
        }
        if kind.is_radial() {
            check_width(q)?;
        }
        Ok(VectorKernel { kind, q })
    }

    pub fn gaussian(q: f64) -> Result<Self> {
        VectorKernel::new(KernelKind::Gaussian, q)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Gaussian => radial(self.q * squared_distance(a, b)),
            KernelKind::GaussianDist => radial(self.q * squared_distance(a, b).sqrt()),
            _ => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

/// Everything `build_kernel_matrix` needs besides the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub kind: KernelKind,
    pub q: f64,
    pub seed: u64,
    /// upper bound of the Jaccard+ noise
    pub noise: f64,
    pub weights: LevenshteinWeights,
    /// n-gram length of the spectrum kernel
    pub spectrum_n: usize,
}

impl KernelParams {
    pub fn new(kind: KernelKind, q: f64) -> Self {
        KernelParams {
            kind,
            q,
            seed: 42,
            noise: JACCARD_NOISE,
            weights: LevenshteinWeights::default(),
            spectrum_n: 3,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }
}

/// Data a kernel matrix can be built from.
#[derive(Debug, Clone, Copy)]
pub enum KernelInput<'a> {
    Vectors(&'a DataMatrix),
    Terms(&'a TermDataset),
    /// a square similarity matrix supplied by the caller
    Matrix(&'a DataMatrix),
}

/// Symmetric N×N kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
    kind: KernelKind,
    q: f64,
}

impl KernelMatrix {
    /// Fill from a pairwise function evaluated on the upper triangle only.
    fn from_upper<F: FnMut(usize, usize) -> f64>(
        n: usize,
        kind: KernelKind,
        q: f64,
        mut f: F,
    ) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        KernelMatrix { n, values, kind, q }
    }

    /// Wrap a caller-supplied matrix, rejecting asymmetric input.
    pub fn precomputed(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: values.len(),
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if !a.is_finite() || (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        // mirror so that K[i][j] == K[j][i] holds bit-exactly
        Ok(KernelMatrix::from_upper(n, KernelKind::Precomputed, 0.0, |i, j| {
            values[i * n + j]
        }))
    }

    /// Kernel over numeric rows.
    pub fn from_vectors(data: &DataMatrix, kernel: VectorKernel) -> Self {
        KernelMatrix::from_upper(data.rows(), kernel.kind(), kernel.q(), |i, j| {
            if i == j && kernel.kind().is_radial() {
                1.0
            } else {
                kernel.eval(data.row(i), data.row(j))
            }
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = DMatrix::from_row_slice(self.n, self.n, &self.values);
        SymmetricEigen::new(m).eigenvalues.min()
    }
}

/// Squared Euclidean distance between the rows of a profile matrix, as a
/// row-major N×N table.
fn profile_sq_distances(profiles: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let pi = &profiles[i * n..(i + 1) * n];
        for j in (i + 1)..n {
            let d = squared_distance(pi, &profiles[j * n..(j + 1) * n]);
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    out
}

fn pairwise<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = f(i, j);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

/// Pairwise Jaccard indices of the token sets.
pub fn jaccard_matrix(sets: &[BTreeSet<String>]) -> Vec<f64> {
    pairwise(sets.len(), |i, j| jaccard(&sets[i], &sets[j]))
}

/// Replace every null entry of a symmetric similarity table with a value
/// drawn uniformly from `(0, noise]`, the same at `(i, j)` and `(j, i)`.
pub fn add_jaccard_noise(values: &mut [f64], n: usize, noise: f64, seed: u64) {
    if noise <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        for j in i..n {
            if values[i * n + j] == 0.0 {
                let v = noise * (1.0 - rng.gen::<f64>());
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
    }
}

fn radial_from(n: usize, kind: KernelKind, q: f64, dist: &[f64]) -> KernelMatrix {
    KernelMatrix::from_upper(n, kind, q, |i, j| {
        if i == j {
            1.0
        } else {
            radial(q * dist[i * n + j])
        }
    })
}

/// Assemble the kernel matrix for `input` under `params`.
pub fn build_kernel_matrix(input: KernelInput<'_>, params: &KernelParams) -> Result<KernelMatrix> {
    let kind = params.kind;
    if kind.is_radial() {
        check_width(params.q)?;
    }
    match (input, kind) {
        (KernelInput::Matrix(m), KernelKind::Precomputed) => {
            if m.rows() != m.cols() {
                return Err(Error::DimensionMismatch {
                    expected: m.rows(),
                    found: m.cols(),
                });
            }
            KernelMatrix::precomputed(m.rows(), m.values().to_vec())
        }
        (KernelInput::Vectors(data), k) if k.is_vector() => Ok(KernelMatrix::from_vectors(
            data,
            VectorKernel::new(k, params.q)?,
        )),
        (KernelInput::Terms(ds), k) if k.is_term() => Ok(term_kernel(ds, params)),
        (_, k) => Err(Error::InvalidParameter(format!(
            "kernel {k} cannot be built from this input"
        ))),
    }
}

fn term_kernel(ds: &TermDataset, params: &KernelParams) -> KernelMatrix {
    let n = ds.len();
    let q = params.q;
    let terms = ds.terms();
    match params.kind {
        KernelKind::Lrb => {
            let d = pairwise(n, |i, j| levenshtein(&terms[i], &terms[j], params.weights));
            radial_from(n, KernelKind::Lrb, q, &profile_sq_distances(&d, n))
        }
        KernelKind::Rbl => {
            let d = pairwise(n, |i, j| levenshtein(&terms[i], &terms[j], params.weights));
            radial_from(n, KernelKind::Rbl, q, &d)
        }
        KernelKind::Jrb | KernelKind::JrbPlus => {
            let mut j = jaccard_matrix(&ds.token_sets());
            if params.kind == KernelKind::JrbPlus {
                add_jaccard_noise(&mut j, n, params.noise, params.seed);
            }
            radial_from(n, params.kind, q, &profile_sq_distances(&j, n))
        }
        KernelKind::Rbj => {
            let j = jaccard_matrix(&ds.token_sets());
            let dist: Vec<f64> = j.iter().map(|s| 1.0 - s).collect();
            radial_from(n, KernelKind::Rbj, q, &dist)
        }
        KernelKind::SkConstant => KernelMatrix::from_upper(n, KernelKind::SkConstant, q, |i, j| {
            substring_kernel(&terms[i], &terms[j])
        }),
        KernelKind::SkSpectrum => {
            let len = params.spectrum_n.max(1);
            KernelMatrix::from_upper(n, KernelKind::SkSpectrum, q, |i, j| {
                spectrum_kernel(&terms[i], &terms[j], len)
            })
        }
        other => unreachable!("{other} is not a term kernel"),
    }
}
