//! Ridge-regularized least squares on small dense systems.

use nalgebra::DMatrix;

use crate::dataset::Matrix;

/// Minimizes `||A c - y||^2 + lambda ||c||^2` through the thin SVD of `A`.
///
/// With `lambda = 0`, singular values below `eps * max(n, q) * s_max` are
/// treated as zero, giving the minimum-norm least-squares solution.
/// Returns `None` if the design contains non-finite entries.
pub fn ridge_solve(design: &Matrix, y: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let (n, q) = (design.rows(), design.cols());
    assert_eq!(n, y.len(), "design rows must match target length");
    if design.as_slice().iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return None;
    }
    if q == 0 {
        return Some(Vec::new());
    }
    let a = DMatrix::from_row_slice(n, q, design.as_slice());
    let svd = a.svd(true, true);
    let u = svd.u.as_ref()?;
    let v_t = svd.v_t.as_ref()?;
    let s = &svd.singular_values;
    let s_max = s.iter().copied().fold(0.0, f64::max);
    let tol = f64::EPSILON * n.max(q) as f64 * s_max;

    let mut coef = vec![0.0; q];
    for (r, &sv) in s.iter().enumerate() {
        let gain = if lambda > 0.0 {
            sv / (sv * sv + lambda)
        } else if sv > tol {
            1.0 / sv
        } else {
            continue;
        };
        let uty: f64 = (0..n).map(|i| u[(i, r)] * y[i]).sum();
        let w = gain * uty;
        for (j, c) in coef.iter_mut().enumerate() {
            *c += w * v_t[(r, j)];
        }
    }
    if coef.iter().any(|c| !c.is_finite()) {
        return None;
    }
    Some(coef)
}
