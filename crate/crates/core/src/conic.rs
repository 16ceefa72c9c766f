//! Vectorized convex subproblem
//!
//! ```text
//! minimize    ½ zᵀ Q z + qᵀ z
//! subject to  H z = h
//!             z ∈ D = D_1 × D_2 × … (separable blocks)
//! ```
//!
//! with `Q` diagonal, `H` sparse and every block of `D` admitting a
//! closed-form Euclidean projection.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Set shape of one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetKind {
    Free,
    Singleton { value: Vec<f64> },
    /// Componentwise bounds; `±∞` encode one-sided constraints.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

/// A set acting on the contiguous index range `start..start + len` of `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetBlock {
    pub start: usize,
    pub len: usize,
    pub kind: SetKind,
}

impl SetBlock {
    pub fn free(start: usize, len: usize) -> Self {
        Self { start, len, kind: SetKind::Free }
    }

    pub fn singleton(start: usize, value: Vec<f64>) -> Self {
        Self { start, len: value.len(), kind: SetKind::Singleton { value } }
    }

    pub fn boxed(start: usize, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { start, len: lo.len(), kind: SetKind::Box { lo, hi } }
    }

    pub fn half_line_above(start: usize, lo: f64) -> Self {
        Self::boxed(start, vec![lo], vec![f64::INFINITY])
    }

    pub fn half_line_below(start: usize, hi: f64) -> Self {
        Self::boxed(start, vec![f64::NEG_INFINITY], vec![hi])
    }

    pub fn ball(start: usize, center: Vec<f64>, radius: f64) -> Self {
        Self { start, len: center.len(), kind: SetKind::Ball { center, radius } }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end()
    }

    /// Same set moved to a new offset.
    pub fn shifted(&self, offset: usize) -> Self {
        Self { start: self.start + offset, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.len == 0 {
            return Err(Error::build(format!("empty set block at index {}", self.start)));
        }
        let ok = match &self.kind {
            SetKind::Free => true,
            SetKind::Singleton { value } => value.len() == self.len && value.iter().all(|v| v.is_finite()),
            SetKind::Box { lo, hi } => {
                lo.len() == self.len
                    && hi.len() == self.len
                    && lo.iter().zip(hi).all(|(l, h)| l <= h && !l.is_nan() && !h.is_nan() && *l < f64::INFINITY && *h > f64::NEG_INFINITY)
            }
            SetKind::Ball { center, radius } => {
                center.len() == self.len && center.iter().all(|v| v.is_finite()) && *radius > 0.0 && radius.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::build(format!("invalid set block {:?}", self)))
        }
    }

    /// Membership test with absolute tolerance.
    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        let mut p = y.to_vec();
        self.project_in_place(&mut p);
        y.iter().zip(&p).all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Euclidean projection of `y` (the block's own components).
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn project_in_place(&self, y: &mut [f64]) {
        debug_assert_eq!(y.len(), self.len);
        match &self.kind {
            SetKind::Free => {}
            SetKind::Singleton { value } => y.copy_from_slice(value),
            SetKind::Box { lo, hi } => {
                for ((v, l), h) in y.iter_mut().zip(lo).zip(hi) {
                    *v = v.max(*l).min(*h);
                }
            }
            SetKind::Ball { center, radius } => {
                let dist = y.iter().zip(center).map(|(v, c)| (v - c) * (v - c)).sum::<f64>().sqrt();
                if dist > *radius {
                    // Shrink until the rounded result tests as inside, so a
                    // second projection leaves it untouched.
                    let mut scale = radius / dist;
                    let mut nudge = f64::EPSILON;
                    while nudge < 1e-8 {
                        let d2: f64 = y.iter().zip(center).map(|(v, c)| (c + (v - c) * scale - c).powi(2)).sum();
                        if d2.sqrt() <= *radius {
                            break;
                        }
                        scale *= 1.0 - nudge;
                        nudge *= 2.0;
                    }
                    for (v, c) in y.iter_mut().zip(center) {
                        *v = c + (*v - c) * scale;
                    }
                }
            }
        }
    }
}

/// Project every block of `z` independently.
pub fn project_all(blocks: &[SetBlock], z: &mut [f64]) {
    for b in blocks {
        b.project_in_place(&mut z[b.range()]);
    }
}

/// Compressed sparse row matrix that also stores its transpose, so both
/// `H z` and `Hᵀ w` are row-oriented sweeps with a fixed summation order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    t_row_ptr: Vec<usize>,
    t_col_idx: Vec<usize>,
    t_vals: Vec<f64>,
}

fn compress(nrows: usize, mut entries: Vec<(usize, usize, f64)>) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut row_ptr = vec![0; nrows + 1];
    let mut col_idx = Vec::with_capacity(entries.len());
    let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
    let mut last: Option<(usize, usize)> = None;
    for (r, c, v) in entries {
        if last == Some((r, c)) {
            *vals.last_mut().unwrap() += v;
            continue;
        }
        row_ptr[r + 1] += 1;
        col_idx.push(c);
        vals.push(v);
        last = Some((r, c));
    }
    for r in 0..nrows {
        row_ptr[r + 1] += row_ptr[r];
    }
    (row_ptr, col_idx, vals)
}

impl SparseMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::Dimension(format!("entry ({r}, {c}) outside {nrows}x{ncols}")));
            }
            if !v.is_finite() {
                return Err(Error::build(format!("non-finite matrix entry at ({r}, {c})")));
            }
        }
        let entries: Vec<_> = triplets.iter().copied().filter(|t| t.2 != 0.0).collect();
        let transposed: Vec<_> = entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        let (row_ptr, col_idx, vals) = compress(nrows, entries);
        let (t_row_ptr, t_col_idx, t_vals) = compress(ncols, transposed);
        let mut m = Self { nrows, ncols, row_ptr, col_idx, vals, t_row_ptr, t_col_idx, t_vals };
        m.drop_cancelled();
        Ok(m)
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(nrows, ncols, &[]).expect("empty matrix")
    }

    pub fn from_dense(rows: &[Vec<f64>], ncols: usize) -> Result<Self> {
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::Dimension(format!("row {i} has {} entries, expected {ncols}", row.len())));
            }
            t.extend(row.iter().enumerate().map(|(j, &v)| (i, j, v)));
        }
        Self::from_triplets(rows.len(), ncols, &t)
    }

    // duplicates that summed to zero
    fn drop_cancelled(&mut self) {
        if self.vals.iter().all(|&v| v != 0.0) {
            return;
        }
        let triplets = self.triplets();
        *self = Self::from_triplets(self.nrows, self.ncols, &triplets).expect("valid");
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            out[r][c] = v;
        }
        out
    }

    /// `out = M x`
    pub fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in M x");
        assert_eq!(out.len(), self.nrows, "dimension mismatch in M x");
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            *o = acc;
        }
    }

    /// `out = Mᵀ y`
    pub fn mul_t_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.nrows, "dimension mismatch in Mᵀ y");
        assert_eq!(out.len(), self.ncols, "dimension mismatch in Mᵀ y");
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.t_row_ptr[c]..self.t_row_ptr[c + 1] {
                acc += self.t_vals[k] * y[self.t_col_idx[k]];
            }
            *o = acc;
        }
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).map(|(_, v)| v * v).sum::<f64>().sqrt()).collect()
    }

    /// Multiply row `r` by `factors[r]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Self {
        assert_eq!(factors.len(), self.nrows);
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (r, c, v * factors[r])).collect();
        Self::from_triplets(self.nrows, self.ncols, &t).expect("scaled matrix stays valid")
    }
}

/// The vectorized subproblem. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    dim: usize,
    q_diag: Vec<f64>,
    q_lin: Vec<f64>,
    h_mat: SparseMatrix,
    h_rhs: Vec<f64>,
    blocks: Vec<SetBlock>,
    /// Factor applied to each equality row relative to the program as first
    /// assembled (all ones unless preconditioned).
    row_scaling: Vec<f64>,
}

impl ConicProgram {
    pub fn new(
        q_diag: Vec<f64>,
        q_lin: Vec<f64>,
        h_mat: SparseMatrix,
        h_rhs: Vec<f64>,
        blocks: Vec<SetBlock>,
    ) -> Result<Self> {
        let dim = q_diag.len();
        if q_lin.len() != dim {
            return Err(Error::Dimension(format!("q has {} entries, Q has {dim}", q_lin.len())));
        }
        if let Some((i, v)) = q_diag.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::build(format!("Q diagonal entry {i} must be finite and non-negative, got {v}")));
        }
        if let Some(i) = q_lin.iter().position(|v| !v.is_finite()) {
            return Err(Error::build(format!("q entry {i} is not finite")));
        }
        if h_mat.ncols() != dim {
            return Err(Error::Dimension(format!("H has {} columns, program dimension is {dim}", h_mat.ncols())));
        }
        if h_rhs.len() != h_mat.nrows() {
            return Err(Error::Dimension(format!("h has {} entries, H has {} rows", h_rhs.len(), h_mat.nrows())));
        }
        if let Some(i) = h_rhs.iter().position(|v| !v.is_finite()) {
            return Err(Error::build(format!("h entry {i} is not finite")));
        }
        let mut next = 0;
        for b in &blocks {
            b.validate()?;
            if b.start != next {
                return Err(Error::build(format!(
                    "set blocks must partition z in order: expected a block starting at {next}, found one at {}",
                    b.start
                )));
            }
            next = b.end();
        }
        if next != dim {
            return Err(Error::build(format!("set blocks cover {next} of {dim} variables")));
        }
        let rows = h_mat.nrows();
        Ok(Self { dim, q_diag, q_lin, h_mat, h_rhs, blocks, row_scaling: vec![1.0; rows] })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        self.h_mat.nrows()
    }

    pub fn q_diag(&self) -> &[f64] {
        &self.q_diag
    }

    pub fn q_lin(&self) -> &[f64] {
        &self.q_lin
    }

    pub fn h_mat(&self) -> &SparseMatrix {
        &self.h_mat
    }

    pub fn h_rhs(&self) -> &[f64] {
        &self.h_rhs
    }

    pub fn blocks(&self) -> &[SetBlock] {
        &self.blocks
    }

    pub fn row_scaling(&self) -> &[f64] {
        &self.row_scaling
    }

    /// Equality rows multiplied by `factors`, accumulated into the recorded
    /// row scaling.
    pub fn with_scaled_rows(&self, factors: &[f64]) -> Self {
        assert_eq!(factors.len(), self.num_rows());
        Self {
            h_mat: self.h_mat.scale_rows(factors),
            h_rhs: self.h_rhs.iter().zip(factors).map(|(h, f)| h * f).collect(),
            row_scaling: self.row_scaling.iter().zip(factors).map(|(s, f)| s * f).collect(),
            ..self.clone()
        }
    }

    pub fn apply_q(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.dim, "dimension mismatch in Q z");
        z.iter().zip(&self.q_diag).map(|(z, q)| z * q).collect()
    }

    pub fn apply_h(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_rows()];
        self.h_mat.mul_into(z, &mut out);
        out
    }

    pub fn apply_ht(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.h_mat.mul_t_into(w, &mut out);
        out
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        z.iter()
            .zip(&self.q_diag)
            .zip(&self.q_lin)
            .map(|((z, q), l)| 0.5 * q * z * z + l * z)
            .sum()
    }

    pub fn project(&self, z: &mut [f64]) {
        project_all(&self.blocks, z);
    }

    /// `(‖z − π_D[z − α(Qz + q + Hᵀη)]‖∞, ‖Hz − h‖∞)`
    pub fn kkt_residual(&self, z: &[f64], eta: &[f64], alpha: f64) -> (f64, f64) {
        assert!(alpha > 0.0, "step size must be positive");
        let ht = self.apply_ht(eta);
        let mut trial: Vec<f64> = (0..self.dim)
            .map(|i| z[i] - alpha * (self.q_diag[i] * z[i] + self.q_lin[i] + ht[i]))
            .collect();
        self.project(&mut trial);
        let fixed_point = z.iter().zip(&trial).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let hz = self.apply_h(z);
        let equality = hz.iter().zip(&self.h_rhs).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        (fixed_point, equality)
    }

    /// Write `(Q, q, H, h, blocks)` as JSON for offline inspection.
    /// Infinite bounds are written as `null`.
    pub fn dump_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let doc = serde_json::json!({
            "dim": self.dim,
            "q_diag": self.q_diag,
            "q": self.q_lin,
            "h_rows": self.num_rows(),
            "h_triplets": self.h_mat.triplets(),
            "h": self.h_rhs,
            "row_scaling": self.row_scaling,
            "blocks": self.blocks,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::build(e.to_string()))?;
        fs::write(path.as_ref(), text)
            .map_err(|e| Error::build(format!("writing {}: {e}", path.as_ref().display())))
    }
}
