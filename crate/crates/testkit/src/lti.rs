//! Closed-form discretization of `ẋ = s (A x + B u)` on `τ ∈ [0, 1]`.

use nalgebra::DMatrix;

/// `(Φ, B⁻, B⁺, B_zoh)` from one block-triangular matrix exponential:
///
/// ```text
/// exp [[sA, sB, 0], [0, 0, I], [0, 0, 0]]
/// ```
///
/// The `(1,2)` block is `∫ Φ(1,τ) sB dτ`, the `(1,3)` block
/// `∫ Φ(1,τ) sB τ dτ`, so `B⁺ = E₁₃` and `B⁻ = E₁₂ − E₁₃`.
pub fn exact_foh(a: &DMatrix<f64>, b: &DMatrix<f64>, s: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (a.nrows(), b.ncols());
    let dim = n + 2 * m;
    let mut big = DMatrix::zeros(dim, dim);
    big.view_mut((0, 0), (n, n)).copy_from(&(a * s));
    big.view_mut((0, n), (n, m)).copy_from(&(b * s));
    big.view_mut((n, n + m), (m, m)).fill_with_identity();
    let e = big.exp();
    let phi = e.view((0, 0), (n, n)).into_owned();
    let e12 = e.view((0, n), (n, m)).into_owned();
    let e13 = e.view((0, n + m), (n, m)).into_owned();
    (phi, &e12 - &e13, e13, e12)
}
