//! Extrapolated proportional-integral projected gradient (PIPG) solver.
//!
//! One iteration uses two sparse products and one separable projection:
//!
//! ```text
//! z⁺ = π_D[ζ − α(Qζ + q + Hᵀη)]
//! w⁺ = η + β(H(2z⁺ − ζ) − h)
//! ζ⁺ = (1 − ρ)ζ + ρ z⁺
//! η⁺ = (1 − ρ)η + ρ w⁺
//! ```

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::conic::ConicProgram;
use crate::error::{Error, Result};

/// Inflation applied to the power-iteration estimate of `‖H‖₂²`.
pub const SPECTRAL_SAFETY: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipgSettings {
    /// Extrapolation factor, `1 ≤ ρ < 2`.
    pub rho: f64,
    /// Ratio `β / α`.
    pub omega: f64,
    pub max_iters: usize,
    pub eps_fixed_point: f64,
    pub eps_equality: f64,
    pub check_every: usize,
    pub power_iters: usize,
}

impl Default for PipgSettings {
    fn default() -> Self {
        Self {
            rho: 1.9,
            omega: 0.9,
            max_iters: 10_000,
            eps_fixed_point: 1e-9,
            eps_equality: 1e-9,
            check_every: 25,
            power_iters: 200,
        }
    }
}

impl PipgSettings {
    pub fn validate(&self) -> Result<()> {
        if !(1.0..2.0).contains(&self.rho) {
            return Err(Error::config(format!("rho must lie in [1, 2), got {}", self.rho)));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::config(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.eps_fixed_point > 0.0 && self.eps_equality > 0.0) {
            return Err(Error::config("PIPG tolerances must be positive"));
        }
        if self.check_every == 0 || self.max_iters == 0 {
            return Err(Error::config("check_every and max_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    /// Largest diagonal entry of `Q` (exact).
    pub lambda_q: f64,
    /// Power-iteration estimate of `‖H‖₂²`, before inflation.
    pub sigma_h_raw: f64,
    /// `sigma_h_raw` times [`SPECTRAL_SAFETY`].
    pub sigma_h: f64,
}

/// Deterministic, non-degenerate start vector for power iteration.
fn power_start(n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919 + 13) % 17) as f64 / 17.0).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

pub fn estimate_spectral(prog: &ConicProgram, power_iters: usize) -> SpectralEstimate {
    let lambda_q = prog.q_diag().iter().copied().fold(0.0, f64::max);
    let h = prog.h_mat();
    let n = prog.dim();
    let mut sigma = 0.0;
    if h.nnz() > 0 && n > 0 {
        let mut v = power_start(n);
        let mut hv = vec![0.0; h.nrows()];
        let mut w = vec![0.0; n];
        for _ in 0..power_iters.max(1) {
            h.mul_into(&v, &mut hv);
            sigma = hv.iter().map(|x| x * x).sum::<f64>();
            h.mul_t_into(&hv, &mut w);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
        }
        h.mul_into(&v, &mut hv);
        sigma = f64::max(sigma, hv.iter().map(|x| x * x).sum::<f64>());
    }
    SpectralEstimate { lambda_q, sigma_h_raw: sigma, sigma_h: sigma * SPECTRAL_SAFETY }
}

/// Primal and dual step sizes `(α, β)`.
pub fn compute_step_sizes(lambda_q: f64, sigma_h: f64, omega: f64) -> (f64, f64) {
    let denom = lambda_q + (lambda_q * lambda_q + 4.0 * omega * sigma_h).sqrt();
    let alpha = if denom > 0.0 { 2.0 / denom } else { 1.0 };
    (alpha, omega * alpha)
}

/// Factors applied to the equality rows by [`precondition`].
#[derive(Debug, Clone, PartialEq)]
pub struct RowScaling {
    pub factors: Vec<f64>,
}

impl RowScaling {
    /// Dual of the scaled program → dual of the original.
    pub fn unscale_dual(&self, eta_scaled: &[f64]) -> Vec<f64> {
        eta_scaled.iter().zip(&self.factors).map(|(e, d)| e * d).collect()
    }

    /// Dual of the original program → dual of the scaled one.
    pub fn scale_dual(&self, eta: &[f64]) -> Vec<f64> {
        eta.iter().zip(&self.factors).map(|(e, d)| e / d).collect()
    }
}

/// Scale each row of `H` (and `h`) to unit ℓ₂ norm. Primal variables and set
/// blocks are untouched.
pub fn precondition(prog: &ConicProgram) -> (ConicProgram, RowScaling) {
    let factors: Vec<f64> = prog
        .h_mat()
        .row_norms()
        .into_iter()
        .map(|n| if n > 0.0 { 1.0 / n } else { 1.0 })
        .collect();
    (prog.with_scaled_rows(&factors), RowScaling { factors })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub iteration: usize,
    pub fixed_point: f64,
    pub equality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipgStats {
    pub iterations: usize,
    pub converged: bool,
    pub fixed_point_residual: f64,
    pub equality_residual: f64,
    pub alpha: f64,
    pub beta: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipgSolution {
    pub z: Vec<f64>,
    pub eta: Vec<f64>,
    pub stats: PipgStats,
}

/// Iterates and step sizes of one solve.
#[derive(Debug, Clone)]
pub struct PipgWorkspace {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub zeta: Vec<f64>,
    pub eta: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub iteration: usize,
    pub history: Vec<ResidualSample>,
    grad: Vec<f64>,
    h_buf: Vec<f64>,
}

impl PipgWorkspace {
    pub fn new(prog: &ConicProgram, alpha: f64, beta: f64, z0: Vec<f64>, eta0: Vec<f64>) -> Self {
        Self {
            w: eta0.clone(),
            zeta: z0.clone(),
            z: z0,
            eta: eta0,
            alpha,
            beta,
            iteration: 0,
            history: Vec::new(),
            grad: vec![0.0; prog.dim()],
            h_buf: vec![0.0; prog.num_rows()],
        }
    }

    /// One extrapolated PIPG iteration.
    pub fn step(&mut self, prog: &ConicProgram, rho: f64) {
        let h = prog.h_mat();
        h.mul_t_into(&self.eta, &mut self.grad);
        let (q_diag, q_lin) = (prog.q_diag(), prog.q_lin());
        for i in 0..self.z.len() {
            let g = q_diag[i] * self.zeta[i] + q_lin[i] + self.grad[i];
            self.z[i] = self.zeta[i] - self.alpha * g;
        }
        prog.project(&mut self.z);

        // reuse grad as 2z − ζ
        for i in 0..self.z.len() {
            self.grad[i] = 2.0 * self.z[i] - self.zeta[i];
        }
        h.mul_into(&self.grad, &mut self.h_buf);
        let rhs = prog.h_rhs();
        for i in 0..self.w.len() {
            self.w[i] = self.eta[i] + self.beta * (self.h_buf[i] - rhs[i]);
        }

        for i in 0..self.z.len() {
            self.zeta[i] = (1.0 - rho) * self.zeta[i] + rho * self.z[i];
        }
        for i in 0..self.w.len() {
            self.eta[i] = (1.0 - rho) * self.eta[i] + rho * self.w[i];
        }
        self.iteration += 1;
    }

    fn finite(&self) -> bool {
        self.z.iter().chain(&self.w).all(|v| v.is_finite())
    }
}

/// Solve `prog` as given (no preconditioning).
///
/// When `max_iters` is exhausted the best iterate seen at a residual check is
/// returned with `converged = false`.
pub fn solve(
    prog: &ConicProgram,
    warm_start: Option<(&[f64], &[f64])>,
    settings: &PipgSettings,
) -> Result<PipgSolution> {
    settings.validate()?;
    let start = Instant::now();
    let (z0, eta0) = match warm_start {
        Some((z, eta)) => {
            if z.len() != prog.dim() || eta.len() != prog.num_rows() {
                return Err(Error::Dimension(format!(
                    "warm start sized ({}, {}), program is ({}, {})",
                    z.len(),
                    eta.len(),
                    prog.dim(),
                    prog.num_rows()
                )));
            }
            (z.to_vec(), eta.to_vec())
        }
        None => (vec![0.0; prog.dim()], vec![0.0; prog.num_rows()]),
    };

    let spectral = estimate_spectral(prog, settings.power_iters);
    let (alpha, beta) = compute_step_sizes(spectral.lambda_q, spectral.sigma_h, settings.omega);
    let mut ws = PipgWorkspace::new(prog, alpha, beta, z0, eta0);

    let converged = |fp: f64, eq: f64| fp <= settings.eps_fixed_point && eq <= settings.eps_equality;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, f64, f64)> = None;
    let mut done = false;

    if warm_start.is_some() {
        let (fp, eq) = prog.kkt_residual(&ws.z, &ws.w, alpha);
        ws.history.push(ResidualSample { iteration: 0, fixed_point: fp, equality: eq });
        if converged(fp, eq) {
            best = Some((fp.max(eq), ws.z.clone(), ws.w.clone(), fp, eq));
            done = true;
        }
    }

    while !done && ws.iteration < settings.max_iters {
        ws.step(prog, settings.rho);
        if !ws.finite() {
            return Err(Error::NumericalFailure { iteration: ws.iteration });
        }
        if ws.iteration % settings.check_every == 0 || ws.iteration == settings.max_iters {
            let (fp, eq) = prog.kkt_residual(&ws.z, &ws.w, alpha);
            ws.history.push(ResidualSample { iteration: ws.iteration, fixed_point: fp, equality: eq });
            let score = (fp / settings.eps_fixed_point).max(eq / settings.eps_equality);
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, ws.z.clone(), ws.w.clone(), fp, eq));
            }
            if converged(fp, eq) {
                done = true;
            }
        }
    }

    let (_, z, eta, fp, eq) = best.expect("at least one residual check");
    Ok(PipgSolution {
        z,
        eta,
        stats: PipgStats {
            iterations: ws.iteration,
            converged: done,
            fixed_point_residual: fp,
            equality_residual: eq,
            alpha,
            beta,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

/// Precondition, solve, and map the dual back to the original rows.
/// The warm-start dual refers to the original program.
pub fn solve_preconditioned(
    prog: &ConicProgram,
    warm_start: Option<(&[f64], &[f64])>,
    settings: &PipgSettings,
) -> Result<PipgSolution> {
    let (scaled, scaling) = precondition(prog);
    let warm = warm_start.map(|(z, eta)| (z.to_vec(), scaling.scale_dual(eta)));
    let mut sol = solve(&scaled, warm.as_ref().map(|(z, e)| (z.as_slice(), e.as_slice())), settings)?;
    sol.eta = scaling.unscale_dual(&sol.eta);
    Ok(sol)
}
