//! Small dense linear-algebra helpers shared by the geometric modules.
//!
//! Subspaces are carried as matrices whose columns span them. Spans are
//! orthonormalized with respect to the Euclidean inner product of the
//! ambient coordinates; the indefinite form never enters those routines.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold used for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Singular values (descending) and right singular vectors as columns of a
/// square matrix, padding `m` with zero rows when it is wide.
fn full_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (r, c) = m.shape();
    let padded = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    (sv, vt.transpose())
}

/// Basis of the kernel of `m`, columns orthonormal. Singular values below
/// `rel_tol` times the largest one count as zero.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let c = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(c, c);
    }
    let (sv, v) = full_svd(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    let cut = rel_tol * smax.max(f64::MIN_POSITIVE);
    let kernel: Vec<usize> = (0..c).filter(|&i| sv.get(i).copied().unwrap_or(0.0) <= cut).collect();
    let mut out = DMatrix::zeros(c, kernel.len());
    for (j, &i) in kernel.iter().enumerate() {
        out.set_column(j, &v.column(i));
    }
    out
}

/// Right singular vector belonging to the smallest singular value, together
/// with that singular value.
pub fn smallest_singular_vector(m: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let (sv, v) = full_svd(m);
    let last = v.ncols() - 1;
    (v.column(last).into_owned(), sv.get(last).copied().unwrap_or(0.0))
}

/// Numerical rank with a relative threshold.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Orthonormal basis of the column span of `m`.
pub fn orthonormal_span(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rel_tol * smax)
        .collect();
    let mut out = DMatrix::zeros(m.nrows(), keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.set_column(j, &u.column(i));
    }
    out
}

/// The subspace `{v : Q(v, s) = 0 for all s in span}`.
pub fn q_orthogonal(span: &DMatrix<f64>, q: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let constraints = span.transpose() * q;
    null_space(&constraints, rel_tol)
}

/// Intersection of two column spans.
pub fn intersect(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let a = orthonormal_span(a, rel_tol);
    let b = orthonormal_span(b, rel_tol);
    let n = a.nrows();
    let mut joined = DMatrix::zeros(n, a.ncols() + b.ncols());
    joined.view_mut((0, 0), (n, a.ncols())).copy_from(&a);
    joined
        .view_mut((0, a.ncols()), (n, b.ncols()))
        .copy_from(&(-&b));
    let kernel = null_space(&joined, rel_tol);
    let coeffs = kernel.rows(0, a.ncols()).into_owned();
    orthonormal_span(&(a * coeffs), rel_tol)
}

/// Horizontal concatenation of column blocks.
pub fn hcat(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, total);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (n, b.ncols())).copy_from(*b);
        at += b.ncols();
    }
    out
}

/// Matrix whose columns are the given vectors.
pub fn from_columns(cols: &[DVector<f64>]) -> DMatrix<f64> {
    let n = cols.first().map(|c| c.len()).unwrap_or(0);
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Distance between two subspaces of equal dimension, measured as the
/// spectral norm of the difference of orthogonal projectors.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let a = orthonormal_span(a, RANK_TOL);
    let b = orthonormal_span(b, RANK_TOL);
    if a.ncols() != b.ncols() {
        return f64::INFINITY;
    }
    let pa = &a * a.transpose();
    let pb = &b * b.transpose();
    (pa - pb).norm().min(f64::MAX)
}

/// Distance between the lines spanned by two nonzero vectors, as the sine
/// of the angle between them.
pub fn line_distance(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let u = u / u.norm();
    let v = v / v.norm();
    (&u - &v * u.dot(&v)).norm()
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = null_space(&m, RANK_TOL);
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).norm() < 1e-12);
    }

    #[test]
    fn intersection_of_coordinate_planes() {
        let a = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let b = DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let i = intersect(&a, &b, RANK_TOL);
        assert_eq!(i.ncols(), 1);
        assert!((i[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projector_distance_is_zero_for_equal_spans() {
        let a = DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let b = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(subspace_distance(&a, &b) < 1e-12);
    }
}
