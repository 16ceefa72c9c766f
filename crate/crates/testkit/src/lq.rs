//! Weighted least-distance projection onto an affine set via the KKT system.

use nalgebra::{DMatrix, DVector};

/// `argmin ½ (v − v̄)ᵀ W (v − v̄)` subject to `C v = e`, `W = diag(w) ≻ 0`.
pub fn weighted_projection(w: &DVector<f64>, v_bar: &DVector<f64>, c: &DMatrix<f64>, e: &DVector<f64>) -> DVector<f64> {
    let (n, m) = (v_bar.len(), c.nrows());
    let mut kkt = DMatrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).set_diagonal(w);
    kkt.view_mut((0, n), (n, m)).copy_from(&c.transpose());
    kkt.view_mut((n, 0), (m, n)).copy_from(c);
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&w.component_mul(v_bar));
    rhs.rows_mut(n, m).copy_from(e);
    let sol = kkt.lu().solve(&rhs).expect("KKT system is nonsingular");
    sol.rows(0, n).into_owned()
}
