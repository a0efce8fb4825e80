//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Spectral norm (largest singular value).
pub fn op_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Orthonormal basis of the column space, dropping directions whose singular
/// value is below `rel_tol * sigma_max`.
pub fn orth(m: &Mat, rel_tol: f64) -> Mat {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return Mat::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("svd requested u");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Mat::zeros(rows, 0);
    }
    let keep: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > rel_tol * smax).collect();
    Mat::from_fn(rows, keep.len(), |r, c| u[(r, keep[c])])
}

/// Orthonormal basis of the range of a projection. Nonzero singular values of
/// an idempotent matrix are at least one, so a fixed cut at 1/2 separates the
/// range cleanly from round-off.
pub fn projection_range(p: &Mat) -> Mat {
    let rows = p.nrows();
    let svd = p.clone().svd(true, false);
    let u = svd.u.expect("svd requested u");
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 0.5).collect();
    Mat::from_fn(rows, keep.len(), |r, c| u[(r, keep[c])])
}

/// Rank of a projection matrix.
pub fn projection_rank(p: &Mat) -> usize {
    p.singular_values().iter().filter(|&&s| s > 0.5).count()
}

/// Ratio of extreme singular values, `+inf` for singular matrices.
pub fn condition_number(m: &Mat) -> f64 {
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Relative singular-value cut used to detect rank deficiency.
pub const RANK_TOL: f64 = 1e-12;

/// Matrix of the inverse of `forward` restricted to `span(kernel_basis)`.
///
/// `forward` is `T(tau, t)` with `t <= tau` and `kernel_basis` an orthonormal
/// basis of `Ker P(t)`. The returned `d x d` matrix maps a vector `v` of
/// `Ker P(tau)` to the unique `w` in `Ker P(t)` with `T(tau, t) w = v`
/// (least-squares on the basis coefficients).
pub fn restricted_inverse(forward: &Mat, kernel_basis: &Mat, t: f64, tau: f64) -> Result<Mat> {
    let d = forward.nrows();
    let k = kernel_basis.ncols();
    if k == 0 {
        return Ok(Mat::zeros(d, d));
    }
    let image = forward * kernel_basis;
    let svd = image.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if smax == 0.0 { 0.0 } else { smin / smax };
    if !(ratio > RANK_TOL) {
        return Err(Error::SingularRestriction { t, tau, ratio });
    }
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    // pinv(image) = V diag(1/s) U^T
    let mut pinv = Mat::zeros(k, d);
    for i in 0..svd.singular_values.len() {
        let s = svd.singular_values[i];
        for r in 0..k {
            for c in 0..d {
                pinv[(r, c)] += v_t[(i, r)] * u[(c, i)] / s;
            }
        }
    }
    Ok(kernel_basis * pinv)
}

/// Right singular vector belonging to the largest singular value.
pub fn top_right_singular_vector(m: &Mat) -> Option<Vector> {
    if m.is_empty() {
        return None;
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t?;
    let (imax, smax) =
        svd.singular_values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
    if !(smax > 0.0) {
        return None;
    }
    Some(v_t.row(imax).transpose())
}

/// Right singular vectors of `m` sorted by increasing singular value.
pub fn right_singular_vectors_ascending(m: &Mat) -> Vec<(f64, Vector)> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("svd requested v_t");
    let mut out: Vec<(f64, Vector)> =
        (0..svd.singular_values.len()).map(|i| (svd.singular_values[i], v_t.row(i).transpose())).collect();
    // nalgebra returns min(rows, cols) vectors; square inputs give a full set.
    debug_assert_eq!(out.len(), n);
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vector {
    loop {
        let v = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

pub fn random_unit_vectors<R: Rng + ?Sized>(d: usize, count: usize, rng: &mut R) -> Vec<Vector> {
    (0..count).map(|_| random_unit_vector(d, rng)).collect()
}

/// Unit vector in the span of the orthonormal columns of `basis`.
pub fn random_unit_in_span<R: Rng + ?Sized>(basis: &Mat, rng: &mut R) -> Vector {
    let c = random_unit_vector(basis.ncols(), rng);
    let v = basis * c;
    let n = v.norm();
    v / n
}

/// Rotation by `theta` in the (0, 1) coordinate plane of `R^d`.
pub fn plane_rotation(d: usize, theta: f64) -> Mat {
    let mut r = Mat::identity(d, d);
    if d >= 2 {
        let (s, c) = theta.sin_cos();
        r[(0, 0)] = c;
        r[(0, 1)] = -s;
        r[(1, 0)] = s;
        r[(1, 1)] = c;
    }
    r
}
