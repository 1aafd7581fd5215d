#![allow(dead_code)]

use gridsvc::kernels::VectorKernel;
use gridsvc::{DataMatrix, KernelMatrix};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random small ball problem: points in the unit square, a Gaussian width and
/// a `nu` whose `N·nu` is never an integer (so the optimal radius is unique).
pub struct Instance {
    pub data: DataMatrix,
    pub kernel: KernelMatrix,
    pub nu: f64,
}

pub fn random_instance(seed: u64, max_n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=max_n);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
        .collect();
    let q = rng.gen_range(0.5..12.0);
    let whole = rng.gen_range(1..n) as f64;
    let frac = rng.gen_range(0.1..0.9);
    let nu = (whole + frac) / n as f64;
    let data = DataMatrix::from_rows(rows, None).unwrap();
    let kernel = KernelMatrix::from_vectors(&data, VectorKernel::gaussian(q).unwrap());
    Instance { data, kernel, nu }
}

pub fn dual_objective(k: &KernelMatrix, beta: &[f64]) -> f64 {
    let n = k.n();
    let mut v = 0.0;
    for i in 0..n {
        v += beta[i] * k.get(i, i);
        for j in 0..n {
            v -= beta[i] * beta[j] * k.get(i, j);
        }
    }
    v
}

/// Derivative-free pattern search over pairwise mass transfers with a
/// halving step; only objective differences are used.
pub fn compass_search(k: &KernelMatrix, c: f64, start: Option<Vec<f64>>) -> Vec<f64> {
    let n = k.n();
    let mut beta = start.unwrap_or_else(|| vec![1.0 / n as f64; n]);
    let mut kb: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| k.get(i, j) * beta[j]).sum())
        .collect();
    let mut h = c;
    let mut sweeps = 0;
    while h > 1e-13 && sweeps < 200_000 {
        sweeps += 1;
        let mut improved = false;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let t = h.min(c - beta[i]).min(beta[j]);
                if t <= 0.0 {
                    continue;
                }
                let gain = t * (k.get(i, i) - k.get(j, j))
                    - 2.0 * t * (kb[i] - kb[j])
                    - t * t * (k.get(i, i) + k.get(j, j) - 2.0 * k.get(i, j));
                if gain > 1e-15 {
                    beta[i] += t;
                    beta[j] -= t;
                    for (l, v) in kb.iter_mut().enumerate() {
                        *v += t * (k.get(l, i) - k.get(l, j));
                    }
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    beta
}

/// Every composition of `total` into `parts` nonnegative integers.
pub fn compositions(total: usize, parts: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(left: usize, idx: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if idx + 1 == cur.len() {
            cur[idx] = left;
            f(cur);
            return;
        }
        for v in 0..=left {
            cur[idx] = v;
            rec(left - v, idx + 1, cur, f);
        }
    }
    let mut cur = vec![0; parts];
    rec(total, 0, &mut cur, f);
}

/// Best point of the simplex lattice with spacing `1/steps`, then polished
/// by pattern search.
pub fn simplex_grid_oracle(k: &KernelMatrix, c: f64, steps: usize) -> Vec<f64> {
    let n = k.n();
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    compositions(steps, n, &mut |parts| {
        let beta: Vec<f64> = parts.iter().map(|&p| p as f64 / steps as f64).collect();
        if beta.iter().any(|&b| b > c + 1e-12) {
            return;
        }
        let v = dual_objective(k, &beta);
        if v > best.0 {
            best = (v, beta);
        }
    });
    compass_search(k, c, Some(best.1))
}

/// Radius minimizing the primal for the center implied by `beta`.
pub fn primal_radius(k: &KernelMatrix, beta: &[f64], c: f64) -> f64 {
    let n = k.n();
    let kb: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| k.get(i, j) * beta[j]).sum())
        .collect();
    let cn: f64 = beta.iter().zip(&kb).map(|(b, v)| b * v).sum();
    let d: Vec<f64> = (0..n).map(|i| k.get(i, i) - 2.0 * kb[i] + cn).collect();
    let mut best = (f64::INFINITY, 0.0);
    for &r in d.iter().chain(std::iter::once(&0.0)) {
        let v = r + c * d.iter().map(|&x| (x - r).max(0.0)).sum::<f64>();
        if v < best.0 - 1e-15 {
            best = (v, r);
        }
    }
    best.1
}

/// Principal coordinates from the eigenvectors of the column-space
/// chi-square inertia matrix applied to centered row profiles.
pub fn profile_oracle(data: &DataMatrix) -> (Vec<[f64; 2]>, [f64; 2]) {
    let (n, m) = (data.rows(), data.cols());
    let total: f64 = data.values().iter().sum();
    let r: Vec<f64> = (0..n).map(|i| data.row(i).iter().sum::<f64>() / total).collect();
    let c: Vec<f64> = (0..m).map(|j| data.column(j).iter().sum::<f64>() / total).collect();
    let centered = |i: usize, j: usize| data.get(i, j) / total / r[i] - c[j];
    let mut inertia = DMatrix::<f64>::zeros(m, m);
    for i in 0..n {
        for a in 0..m {
            for b in 0..m {
                inertia[(a, b)] += r[i] * centered(i, a) * centered(i, b) / (c[a] * c[b]).sqrt();
            }
        }
    }
    let eig = SymmetricEigen::new(inertia);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut coords = vec![[0.0; 2]; n];
    let mut sv = [0.0; 2];
    for axis in 0..2 {
        let k = order[axis];
        sv[axis] = eig.eigenvalues[k].max(0.0).sqrt();
        for (i, p) in coords.iter_mut().enumerate() {
            p[axis] = (0..m)
                .map(|j| centered(i, j) / c[j].sqrt() * eig.eigenvectors[(j, k)])
                .sum();
        }
    }
    (coords, sv)
}
