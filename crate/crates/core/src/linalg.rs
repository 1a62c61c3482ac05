//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold used for numerical rank.
pub(crate) const RANK_RTOL: f64 = 1e-9;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Builds a matrix from row slices; `cols` fixes the width when there are no rows.
pub(crate) fn from_rows(rows: &[Vec<f64>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

/// Numerical rank with threshold `RANK_RTOL * sigma_max`.
pub(crate) fn rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * smax).count()
}

/// Affine description of `{v | E v = e}` as `v0 + N z`, with `N` orthonormal.
pub(crate) struct AffineSubspace {
    pub offset: DVector<f64>,
    pub basis: DMatrix<f64>,
}

/// Solves `E v = e` in the least-squares sense and returns the particular solution of
/// minimum norm plus an orthonormal null-space basis. Returns `None` when the system is
/// inconsistent beyond `tol`.
pub(crate) fn affine_subspace(
    e_mat: &DMatrix<f64>,
    e_vec: &DVector<f64>,
    tol: f64,
) -> Option<AffineSubspace> {
    let n = e_mat.ncols();
    let p = e_mat.nrows();
    if p == 0 {
        return Some(AffineSubspace {
            offset: DVector::zeros(n),
            basis: DMatrix::identity(n, n),
        });
    }
    // Pad with zero rows so that the SVD returns a full n x n right factor.
    let rows = p.max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (p, n)).copy_from(e_mat);
    let mut rhs = DVector::zeros(rows);
    rhs.rows_mut(0, p).copy_from(e_vec);

    let svd = padded.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);

    let mut offset = DVector::zeros(n);
    let mut null_cols = Vec::new();
    for k in 0..n {
        let s = sv[k];
        if smax > 0.0 && s > RANK_RTOL * smax {
            let coeff = u.column(k).dot(&rhs) / s;
            offset += v_t.row(k).transpose() * coeff;
        } else {
            null_cols.push(k);
        }
    }
    let residual = e_mat * &offset - e_vec;
    if residual.amax() > tol * (1.0 + e_vec.amax()) {
        return None;
    }
    let mut basis = DMatrix::zeros(n, null_cols.len());
    for (c, &k) in null_cols.iter().enumerate() {
        basis.set_column(c, &v_t.row(k).transpose());
    }
    Some(AffineSubspace { offset, basis })
}

/// Least-squares solution of `M x = r` (minimum norm), via SVD.
pub(crate) fn lstsq(m: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(m.ncols());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.solve(r, RANK_RTOL * smax.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DVector::zeros(m.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_dependent_rows() {
        let m = DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, -1.0, 1.0]);
        assert_eq!(rank(&m), 2);
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 0.0, 1.0]);
        assert_eq!(rank(&m), 1);
        assert_eq!(rank(&DMatrix::zeros(0, 3)), 0);
    }

    #[test]
    fn affine_subspace_of_a_line() {
        let e = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let rhs = DVector::from_vec(vec![2.0]);
        let sub = affine_subspace(&e, &rhs, 1e-12).unwrap();
        assert!((sub.offset[0] - 1.0).abs() < 1e-12 && (sub.offset[1] - 1.0).abs() < 1e-12);
        assert_eq!(sub.basis.ncols(), 1);
        assert!((&e * sub.basis.column(0)).amax() < 1e-12);
    }

    #[test]
    fn inconsistent_equalities_are_rejected() {
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let rhs = DVector::from_vec(vec![0.0, 1.0]);
        assert!(affine_subspace(&e, &rhs, 1e-9).is_none());
    }
}
