//! Random strongly convex programs
//!
//! ```text
//! minimize ½ zᵀ diag(q_diag) z + q_linᵀ z   subject to   H z = h,  z ∈ D
//! ```
//!
//! with `D` a product of free, singleton, box and ball blocks, and a slow but
//! simple augmented-Lagrangian oracle for them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum Set {
    Free,
    Singleton(Vec<f64>),
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub start: usize,
    pub len: usize,
    pub set: Set,
}

impl Block {
    pub fn project(&self, y: &mut [f64]) {
        match &self.set {
            Set::Free => {}
            Set::Singleton(v) => y.copy_from_slice(v),
            Set::Box { lo, hi } => {
                for i in 0..y.len() {
                    if y[i] < lo[i] {
                        y[i] = lo[i];
                    } else if y[i] > hi[i] {
                        y[i] = hi[i];
                    }
                }
            }
            Set::Ball { center, radius } => {
                let norm: f64 = y.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
                if norm > *radius {
                    for (a, c) in y.iter_mut().zip(center) {
                        *a = c + (*a - c) * radius / norm;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomQp {
    pub q_diag: Vec<f64>,
    pub q_lin: Vec<f64>,
    pub h_mat: DMatrix<f64>,
    pub h_rhs: Vec<f64>,
    pub blocks: Vec<Block>,
}

impl RandomQp {
    pub fn dim(&self) -> usize {
        self.q_diag.len()
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        z.iter().zip(&self.q_diag).zip(&self.q_lin).map(|((z, q), l)| 0.5 * q * z * z + l * z).sum()
    }

    pub fn project(&self, z: &mut [f64]) {
        for b in &self.blocks {
            b.project(&mut z[b.start..b.start + b.len]);
        }
    }

    /// `‖H z − h‖∞`
    pub fn equality_residual(&self, z: &[f64]) -> f64 {
        let r = &self.h_mat * DVector::from_column_slice(z) - DVector::from_column_slice(&self.h_rhs);
        r.amax()
    }

    /// Triplets `(row, col, value)` of the nonzero entries of `H`.
    pub fn h_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::new();
        for i in 0..self.h_mat.nrows() {
            for j in 0..self.h_mat.ncols() {
                if self.h_mat[(i, j)] != 0.0 {
                    t.push((i, j, self.h_mat[(i, j)]));
                }
            }
        }
        t
    }
}

/// A feasible program with `dim ≤ max_dim` and `rows ≤ max_rows`. The right-hand
/// side is built from a point of `D`, so the feasible set is never empty.
pub fn random_qp(rng: &mut impl Rng, max_dim: usize, max_rows: usize) -> RandomQp {
    let dim = rng.random_range(4..=max_dim);
    let rows = rng.random_range(1..=max_rows.min(dim / 2).max(1));

    let mut blocks = Vec::new();
    let mut start = 0;
    while start < dim {
        let len = rng.random_range(1..=4).min(dim - start);
        let set = match rng.random_range(0..4) {
            0 => Set::Free,
            1 if len <= 2 => Set::Singleton((0..len).map(|_| rng.random_range(-1.0..1.0)).collect()),
            2 => {
                let center: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
                Set::Ball { center, radius: rng.random_range(0.2..2.0) }
            }
            _ => {
                let mut lo = Vec::with_capacity(len);
                let mut hi = Vec::with_capacity(len);
                for _ in 0..len {
                    let a = rng.random_range(-2.0..1.0);
                    let b = a + rng.random_range(0.1..2.0);
                    lo.push(if rng.random_bool(0.15) { f64::NEG_INFINITY } else { a });
                    hi.push(if rng.random_bool(0.15) { f64::INFINITY } else { b });
                }
                Set::Box { lo, hi }
            }
        };
        blocks.push(Block { start, len, set });
        start += len;
    }

    let mut h_mat = DMatrix::zeros(rows, dim);
    for i in 0..rows {
        for j in 0..dim {
            if rng.random_bool(0.3) {
                h_mat[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        let j = rng.random_range(0..dim);
        h_mat[(i, j)] = rng.random_range(0.5..1.5);
    }

    let mut qp = RandomQp {
        q_diag: (0..dim).map(|_| rng.random_range(0.1..10.0)).collect(),
        q_lin: (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect(),
        h_mat,
        h_rhs: vec![0.0; rows],
        blocks,
    };
    let mut anchor: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
    qp.project(&mut anchor);
    qp.h_rhs = (&qp.h_mat * DVector::from_vec(anchor)).iter().copied().collect();
    qp
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    pub equality_residual: f64,
    pub outer_iterations: usize,
}

/// Augmented Lagrangian: each outer step minimizes
/// `½zᵀQz + qᵀz + λᵀ(Hz − h) + (μ/2)‖Hz − h‖²` over `D` with restarted
/// accelerated projected gradient, then updates `λ += μ(Hz − h)`.
pub fn solve_oracle(qp: &RandomQp) -> OracleSolution {
    let n = qp.dim();
    let h = &qp.h_mat;
    let rhs = DVector::from_column_slice(&qp.h_rhs);
    let q_max = qp.q_diag.iter().copied().fold(0.0, f64::max);
    let h_norm2 = h.singular_values().max().powi(2).max(1e-12);
    let mu = 10.0 * q_max / h_norm2;
    let lipschitz = q_max + mu * h_norm2;
    let step = 1.0 / lipschitz;

    let mut z = vec![0.0; n];
    qp.project(&mut z);
    let mut lambda = DVector::zeros(h.nrows());
    let mut outer = 0;
    for _ in 0..2000 {
        outer += 1;
        let grad = |z: &[f64]| -> Vec<f64> {
            let zv = DVector::from_column_slice(z);
            let r = h * &zv - &rhs;
            let ht = h.transpose() * (&lambda + r * mu);
            (0..n).map(|i| qp.q_diag[i] * z[i] + qp.q_lin[i] + ht[i]).collect()
        };
        let mut y = z.clone();
        let mut t: f64 = 1.0;
        for _ in 0..200_000 {
            let g = grad(&y);
            let mut next: Vec<f64> = (0..n).map(|i| y[i] - step * g[i]).collect();
            qp.project(&mut next);
            let moved = next.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            // Restart momentum whenever it points uphill.
            let uphill: f64 = (0..n).map(|i| (y[i] - next[i]) * (next[i] - z[i])).sum();
            if uphill > 0.0 {
                t = 1.0;
                y = next.clone();
            } else {
                y = (0..n).map(|i| next[i] + (t - 1.0) / t_next * (next[i] - z[i])).collect();
                t = t_next;
            }
            z = next;
            if moved < 1e-15 {
                break;
            }
        }
        let r = h * DVector::from_column_slice(&z) - &rhs;
        lambda += &r * mu;
        if r.amax() < 1e-13 {
            break;
        }
    }
    OracleSolution { objective: qp.objective(&z), equality_residual: qp.equality_residual(&z), z, outer_iterations: outer }
}
