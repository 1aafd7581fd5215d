//! Minimum enclosing ball in feature space, solved through its dual
//!
//! maximize Σβᵢ Kᵢᵢ − ΣΣ βᵢβⱼ Kᵢⱼ  subject to  Σβᵢ = 1,  0 ≤ βᵢ ≤ C.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelMatrix, VectorKernel, DIAGONAL_JITTER};

/// Relative tolerance of the radius conditions at the optimum.
pub const TOL_KKT: f64 = 1e-6;

const MAX_SWEEPS: usize = 100_000;
const STOCHASTIC_STEPS_PER_POINT: usize = 200;
const MODEL_HEADER: &str = "gridsvc-model 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// greedy two-index ascent to convergence
    #[default]
    Quadratic,
    /// seeded random-pair ascent with a fixed budget
    Stochastic,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Quadratic => "quadratic",
            Method::Stochastic => "stochastic",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quadratic" | "quad" | "optimquad" => Ok(Method::Quadratic),
            "stochastic" | "stoch" | "optimstoch" => Ok(Method::Stochastic),
            _ => Err(Error::InvalidParameter(format!("unknown optimizer {s:?}"))),
        }
    }
}

/// A kernel matrix together with the outlier budget.
///
/// `nu` bounds the fraction of bounded support vectors; the box constraint is
/// `C = 1/(N·nu)`. The slack variables of the primal are eliminated in the
/// dual and never materialized.
#[derive(Debug, Clone, Copy)]
pub struct BallProblem<'a> {
    kernel: &'a KernelMatrix,
    nu: f64,
    c: f64,
}

impl<'a> BallProblem<'a> {
    pub fn new(kernel: &'a KernelMatrix, nu: f64) -> Result<Self> {
        let n = kernel.n();
        if n == 0 {
            return Err(Error::InvalidData("empty kernel matrix".into()));
        }
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::InvalidParameter(format!("nu must lie in (0, 1], got {nu}")));
        }
        let c = 1.0 / (n as f64 * nu);
        if c > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "nu = {nu} gives C = {c} > 1 for N = {n}; nu must be at least 1/N"
            )));
        }
        Ok(BallProblem { kernel, nu, c: c.min(1.0) })
    }

    pub fn kernel(&self) -> &KernelMatrix {
        self.kernel
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n(&self) -> usize {
        self.kernel.n()
    }
}

/// Fitted ball.
#[derive(Debug, Clone, PartialEq)]
pub struct SvcModel {
    beta: Vec<f64>,
    c: f64,
    nu: f64,
    r_hat_sq: f64,
    center_norm_sq: f64,
    sv_indices: Vec<usize>,
    bsv_indices: Vec<usize>,
    kernel_kind: KernelKind,
    q: f64,
    /// no unbounded support vector existed; the radius came from the BSVs
    radius_fallback: bool,
    duality_gap: f64,
}

/// Classify the coefficients into unbounded and bounded support vectors.
fn support_sets(beta: &[f64], c: f64) -> (Vec<usize>, Vec<usize>) {
    let eps = 1e-8 * c;
    let mut sv = Vec::new();
    let mut bsv = Vec::new();
    for (i, &b) in beta.iter().enumerate() {
        if b >= c - eps {
            bsv.push(i);
        } else if b > eps {
            sv.push(i);
        }
    }
    (sv, bsv)
}

/// `(Kβ)ᵢ` for every i.
fn kernel_times(k: &KernelMatrix, beta: &[f64]) -> Vec<f64> {
    (0..k.n())
        .map(|i| k.row(i).iter().zip(beta).map(|(a, b)| a * b).sum())
        .collect()
}

/// Smallest value of `R² + C·Σ max(0, dᵢ − R²)` over `R² ≥ 0`.
fn primal_value(dist_sq: &[f64], c: f64) -> f64 {
    let mut d: Vec<f64> = dist_sq.iter().map(|v| v.max(0.0)).collect();
    d.sort_by(|a, b| b.total_cmp(a));
    let mut best = f64::INFINITY;
    let mut outside_sum = 0.0;
    // radius at the m-th largest distance, the m larger ones outside
    for m in 0..=d.len() {
        let r = d.get(m).copied().unwrap_or(0.0);
        best = best.min(r + c * (outside_sum - m as f64 * r));
        if m < d.len() {
            outside_sum += d[m];
        }
    }
    best
}

impl SvcModel {
    fn from_beta(problem: &BallProblem<'_>, beta: Vec<f64>) -> Self {
        let k = problem.kernel();
        let c = problem.c();
        let kb = kernel_times(k, &beta);
        let center_norm_sq: f64 = beta.iter().zip(&kb).map(|(b, v)| b * v).sum();
        let dist_sq: Vec<f64> = (0..k.n())
            .map(|i| (k.get(i, i) - 2.0 * kb[i] + center_norm_sq).max(0.0))
            .collect();
        let (sv_indices, bsv_indices) = support_sets(&beta, c);
        let (r_hat_sq, radius_fallback) = if sv_indices.is_empty() {
            let r = bsv_indices.iter().map(|&i| dist_sq[i]).fold(0.0, f64::max);
            (r, true)
        } else {
            let s: f64 = sv_indices.iter().map(|&i| dist_sq[i]).sum();
            (s / sv_indices.len() as f64, false)
        };
        let dual: f64 = beta.iter().zip(k.diagonal()).map(|(b, d)| b * d).sum::<f64>() - center_norm_sq;
        let duality_gap = (primal_value(&dist_sq, c) - dual).max(0.0);
        SvcModel {
            beta,
            c,
            nu: problem.nu(),
            r_hat_sq,
            center_norm_sq,
            sv_indices,
            bsv_indices,
            kernel_kind: k.kind(),
            q: k.q(),
            radius_fallback,
            duality_gap,
        }
    }

    pub fn n(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn r_hat_sq(&self) -> f64 {
        self.r_hat_sq
    }

    pub fn center_norm_sq(&self) -> f64 {
        self.center_norm_sq
    }

    pub fn sv_indices(&self) -> &[usize] {
        &self.sv_indices
    }

    pub fn bsv_indices(&self) -> &[usize] {
        &self.bsv_indices
    }

    pub fn kernel_kind(&self) -> KernelKind {
        self.kernel_kind
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn radius_fallback(&self) -> bool {
        self.radius_fallback
    }

    pub fn duality_gap(&self) -> f64 {
        self.duality_gap
    }

    /// Absolute tolerance of the radius conditions.
    pub fn tol_kkt(&self) -> f64 {
        TOL_KKT * self.r_hat_sq.max(f64::EPSILON)
    }

    /// Squared feature-space distance from the center given `K(y, xᵢ)` for
    /// every training point and `K(y, y)`.
    pub fn radius_sq(&self, kernel_row: &[f64], k_yy: f64) -> Result<f64> {
        if kernel_row.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: kernel_row.len(),
            });
        }
        let cross: f64 = kernel_row.iter().zip(&self.beta).map(|(k, b)| k * b).sum();
        Ok((k_yy - 2.0 * cross + self.center_norm_sq).max(0.0))
    }

    /// Radius of training point `i`.
    pub fn training_radius_sq(&self, kernel: &KernelMatrix, i: usize) -> f64 {
        self.radius_sq(kernel.row(i), kernel.get(i, i))
            .expect("kernel matrix does not match the model")
    }

    /// Whether the unseen point `y` lies inside the ball (boundary included).
    /// `training` must be the data the model was fitted on.
    pub fn is_inside(&self, training: &DataMatrix, y: &[f64]) -> Result<bool> {
        let kernel = VectorKernel::new(self.kernel_kind, self.q)?;
        if training.rows() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: training.rows(),
            });
        }
        if y.len() != training.cols() {
            return Err(Error::DimensionMismatch {
                expected: training.cols(),
                found: y.len(),
            });
        }
        let row: Vec<f64> = (0..self.n()).map(|i| kernel.eval(training.row(i), y)).collect();
        Ok(self.radius_sq(&row, kernel.eval(y, y))? <= self.r_hat_sq)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{MODEL_HEADER}")?;
        writeln!(out, "n {}", self.n())?;
        writeln!(out, "kernel {}", self.kernel_kind)?;
        writeln!(out, "q {:?}", self.q)?;
        writeln!(out, "nu {:?}", self.nu)?;
        writeln!(out, "c {:?}", self.c)?;
        writeln!(out, "r_hat_sq {:?}", self.r_hat_sq)?;
        writeln!(out, "center_norm_sq {:?}", self.center_norm_sq)?;
        writeln!(out, "radius_fallback {}", u8::from(self.radius_fallback))?;
        writeln!(out, "duality_gap {:?}", self.duality_gap)?;
        writeln!(out, "beta")?;
        for b in &self.beta {
            writeln!(out, "{b:?}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptModel(m.to_string());
        let mut lines = input.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| corrupt("unexpected end of model"))?
                .map_err(Error::from)
        };
        if next()?.trim() != MODEL_HEADER {
            return Err(corrupt("missing model header"));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = next()?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok(v.trim().to_string()),
                _ => Err(Error::CorruptModel(format!("expected field {key:?}, got {line:?}"))),
            }
        };
        let num = |s: String| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::CorruptModel(format!("bad number {s:?}")))
        };
        let n: usize = field("n")?
            .parse()
            .map_err(|_| corrupt("bad point count"))?;
        let kernel_kind: KernelKind = field("kernel")?.parse().map_err(|_| corrupt("bad kernel"))?;
        let q = num(field("q")?)?;
        let nu = num(field("nu")?)?;
        let c = num(field("c")?)?;
        let r_hat_sq = num(field("r_hat_sq")?)?;
        let center_norm_sq = num(field("center_norm_sq")?)?;
        let radius_fallback = field("radius_fallback")? == "1";
        let duality_gap = num(field("duality_gap")?)?;
        drop(field);
        if next()?.trim() != "beta" {
            return Err(corrupt("missing beta section"));
        }
        let mut beta = Vec::with_capacity(n);
        for _ in 0..n {
            beta.push(num(next()?.trim().to_string())?);
        }
        let (sv_indices, bsv_indices) = support_sets(&beta, c);
        Ok(SvcModel {
            beta,
            c,
            nu,
            r_hat_sq,
            center_norm_sq,
            sv_indices,
            bsv_indices,
            kernel_kind,
            q,
            radius_fallback,
            duality_gap,
        })
    }
}

/// State shared by both ascent methods: coefficients and the gradient
/// `gᵢ = Kᵢᵢ − 2(Kβ)ᵢ` on the jittered kernel.
struct Ascent<'a> {
    k: &'a KernelMatrix,
    c: f64,
    beta: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> Ascent<'a> {
    fn new(k: &'a KernelMatrix, c: f64) -> Self {
        let n = k.n();
        // uniform start is feasible because C ≥ 1/N
        let beta = vec![1.0 / n as f64; n];
        let mut s = Ascent {
            k,
            c,
            beta,
            grad: Vec::new(),
        };
        s.refresh_gradient();
        s
    }

    fn refresh_gradient(&mut self) {
        let kb = kernel_times(self.k, &self.beta);
        self.grad = (0..self.k.n())
            .map(|i| self.k.get(i, i) + DIAGONAL_JITTER - 2.0 * (kb[i] + DIAGONAL_JITTER * self.beta[i]))
            .collect();
    }

    /// Move mass from `j` to `i` by the exact maximizing step, clipped to the
    /// box. Returns the transferred amount.
    fn step(&mut self, i: usize, j: usize) -> f64 {
        let (k, c) = (self.k, self.c);
        let eta = (k.get(i, i) + k.get(j, j) - 2.0 * k.get(i, j) + 2.0 * DIAGONAL_JITTER).max(1e-300);
        let room = (c - self.beta[i]).min(self.beta[j]);
        let raw = (self.grad[i] - self.grad[j]) / (2.0 * eta);
        let t = raw.clamp(0.0, room);
        if t == 0.0 {
            return 0.0;
        }
        if t == room {
            // land exactly on the bound that clipped the step
            if c - self.beta[i] <= self.beta[j] {
                self.beta[j] -= c - self.beta[i];
                self.beta[i] = c;
            } else {
                self.beta[i] += self.beta[j];
                self.beta[j] = 0.0;
            }
        } else {
            self.beta[i] += t;
            self.beta[j] -= t;
        }
        let (ri, rj) = (k.row(i), k.row(j));
        for (l, g) in self.grad.iter_mut().enumerate() {
            *g -= 2.0 * t * (ri[l] - rj[l]);
        }
        self.grad[i] -= 2.0 * t * DIAGONAL_JITTER;
        self.grad[j] += 2.0 * t * DIAGONAL_JITTER;
        t
    }

    /// The maximally violating pair and its gradient gap.
    fn worst_pair(&self) -> (usize, usize, f64) {
        let mut up = (usize::MAX, f64::NEG_INFINITY);
        let mut down = (usize::MAX, f64::INFINITY);
        for (l, (&b, &g)) in self.beta.iter().zip(&self.grad).enumerate() {
            if b < self.c && g > up.1 {
                up = (l, g);
            }
            if b > 0.0 && g < down.1 {
                down = (l, g);
            }
        }
        if up.0 == usize::MAX || down.0 == usize::MAX {
            return (0, 0, 0.0);
        }
        (up.0, down.0, up.1 - down.1)
    }
}

fn solve_quadratic(problem: &BallProblem<'_>) -> Result<Vec<f64>> {
    let k = problem.kernel();
    let n = k.n();
    let mut s = Ascent::new(k, problem.c());
    let scale = k.diagonal().into_iter().fold(1.0, f64::max);
    let tol = 1e-12 * scale;
    let budget = MAX_SWEEPS.saturating_mul(n);
    let mut steps = 0usize;
    loop {
        let (i, j, gap) = s.worst_pair();
        if gap <= tol {
            // confirm against a freshly accumulated gradient
            s.refresh_gradient();
            if s.worst_pair().2 <= tol {
                break;
            }
            continue;
        }
        if steps >= budget {
            let model = SvcModel::from_beta(problem, s.beta.clone());
            return Err(Error::NoConvergence {
                gap: model.duality_gap(),
            });
        }
        let t = s.step(i, j);
        steps += 1;
        if t == 0.0 {
            // no representable progress along the best pair
            s.refresh_gradient();
            if s.worst_pair().2 <= gap {
                break;
            }
        }
        if steps % (10 * n.max(1)) == 0 {
            s.refresh_gradient();
        }
    }
    log::debug!("quadratic ascent finished after {steps} pair steps");
    Ok(s.beta)
}

fn solve_stochastic(problem: &BallProblem<'_>, seed: u64) -> Vec<f64> {
    let k = problem.kernel();
    let n = k.n();
    let mut s = Ascent::new(k, problem.c());
    if n < 2 {
        return s.beta;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..STOCHASTIC_STEPS_PER_POINT * n {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        // orient so that mass flows uphill
        if s.grad[i] >= s.grad[j] {
            s.step(i, j);
        } else {
            s.step(j, i);
        }
        if (t + 1) % (10 * n) == 0 {
            s.refresh_gradient();
        }
    }
    s.beta
}

/// Fit the ball. The quadratic method is deterministic; the stochastic one
/// is deterministic given `seed`.
pub fn solve_dual(problem: &BallProblem<'_>, method: Method, seed: u64) -> Result<SvcModel> {
    let beta = match method {
        Method::Quadratic => solve_quadratic(problem)?,
        Method::Stochastic => solve_stochastic(problem, seed),
    };
    let model = SvcModel::from_beta(problem, beta);
    if model.radius_fallback() {
        log::info!(
            "no unbounded support vector (C = {}); radius taken from the bounded ones",
            model.c()
        );
    }
    Ok(model)
}
