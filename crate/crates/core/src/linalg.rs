//! Small dense linear-algebra helpers shared by the rank computations.

use nalgebra::DMatrix;

/// Singular values at or below this are treated as exact zeros regardless
/// of the relative tolerance.
pub const ABS_RANK_FLOOR: f64 = 1e-12;

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `tol * sigma_max` (and above the
/// absolute floor).
pub fn rank_from_singular_values(sv: &[f64], tol: f64) -> usize {
    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    rank_with_scale(sv, tol, smax)
}

/// Like [`rank_from_singular_values`] but with an externally supplied scale.
pub fn rank_with_scale(sv: &[f64], tol: f64, scale: f64) -> usize {
    if scale <= ABS_RANK_FLOOR {
        return 0;
    }
    let cut = (tol * scale).max(ABS_RANK_FLOOR);
    sv.iter().filter(|&&s| s > cut).count()
}

pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    rank_from_singular_values(&singular_values(m), tol)
}

/// Orthonormal basis (as rows) of the row space of `m`, keeping directions
/// whose singular value exceeds `tol * sigma_max`.
pub fn row_space_basis(m: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, Vec<f64>) {
    let cols = m.ncols();
    if m.nrows() == 0 || cols == 0 {
        return (DMatrix::zeros(0, cols), Vec::new());
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let r = rank_from_singular_values(&sv, tol);
    let mut basis = DMatrix::zeros(r, cols);
    for (out, &i) in order.iter().take(r).enumerate() {
        basis.set_row(out, &v_t.row(i));
    }
    (basis, sv)
}

/// Max-abs entry of a slice difference.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
