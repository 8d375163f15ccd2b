//! Small dense linear-algebra helpers on top of nalgebra's SVD.

use nalgebra::{DMatrix, DVector};

/// Singular values in descending order.
pub(crate) fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = a
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Unit vector spanning (approximately) the null space of a wide or square matrix.
///
/// Pads with zero rows to a square matrix so that the full right singular
/// basis is available, then returns the right singular vector of the smallest
/// singular value along with that singular value.
pub(crate) fn null_vector(a: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let (rows, cols) = a.shape();
    let square = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (idx, &smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("non-empty matrix");
    (v_t.row(idx).transpose(), smin)
}

/// Least-squares solution of `a x = b` together with `σ_min / σ_max` of `a`.
pub(crate) fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) {
        return None;
    }
    let eps = smax * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    let x = svd.solve(b, eps).ok()?;
    Some((x, smin / smax))
}

/// Minimum-norm least-squares step via a truncated pseudo-inverse.
pub(crate) fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || !smax.is_finite() {
        return None;
    }
    svd.solve(b, smax * rel_tol).ok()
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn min_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigenvalues().min()
}
