//! Central finite differences.

use nalgebra::DMatrix;

/// `∂f/∂x` at `x` by central differences, with step `steps[j]` on column `j`.
pub fn central_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], steps: &[f64]) -> DMatrix<f64> {
    let rows = f(x).len();
    let mut jac = DMatrix::zeros(rows, x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        xp[j] = x[j] + steps[j];
        let hi = f(&xp);
        xp[j] = x[j] - steps[j];
        let lo = f(&xp);
        xp[j] = x[j];
        for i in 0..rows {
            jac[(i, j)] = (hi[i] - lo[i]) / (2.0 * steps[j]);
        }
    }
    jac
}

/// Largest column-normalized difference `max_j ‖a_j − b_j‖∞ / max(‖a_j‖∞, ‖b_j‖∞)`.
pub fn column_relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..a.ncols() {
        let norm = a.column(j).amax().max(b.column(j).amax());
        if norm > 0.0 {
            worst = worst.max((a.column(j) - b.column(j)).amax() / norm);
        }
    }
    worst
}
