//! Small dense linear-algebra helpers shared by the analysis modules.
//!
//! Everything here works on `nalgebra::DMatrix<f64>` and returns results in a
//! deterministic order (eigenvalues ascending, singular values descending) so
//! that downstream verdicts are reproducible bit-for-bit.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Symmetric part `(M + M^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = 1.0 + m.amax();
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted ascending
/// with eigenvectors permuted to match.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    sym_eigen(m).0
}

/// Largest eigenvalue of a symmetric matrix; `-inf` for the empty matrix.
pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix; `+inf` for the empty matrix.
pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::INFINITY, f64::min)
}

/// Full singular value decomposition `M = U diag(s) V^T` of a square matrix.
///
/// Singular values are sorted descending and each pair `(u_k, v_k)` is
/// flipped so that the first nonzero entry of `u_k` is positive.
pub fn svd_sorted(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    assert!(m.is_square(), "svd_sorted expects a square matrix");
    let n = m.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let svd = m.clone().svd(true, true);
    let u_raw = svd.u.expect("U requested");
    let v_raw = svd.v_t.expect("V^T requested").transpose();
    let s_raw = svd.singular_values;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s_raw[b].total_cmp(&s_raw[a]));

    let mut u = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    let mut s = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut uc = u_raw.column(src).into_owned();
        let mut vc = v_raw.column(src).into_owned();
        let lead = uc.iter().copied().find(|x| x.abs() > 1e-14).unwrap_or(1.0);
        if lead < 0.0 {
            uc.neg_mut();
            vc.neg_mut();
        }
        u.set_column(dst, &uc);
        v.set_column(dst, &vc);
        s[dst] = s_raw[src];
    }
    (u, s, v)
}

/// Singular values sorted descending (works for rectangular matrices).
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral norm.
pub fn norm2(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Maximum absolute row sum.
pub fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 2-norm condition number; `1` for the empty matrix, `inf` when singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Moore–Penrose pseudoinverse, discarding singular values below
/// `rel_tol * sigma_max`.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("U requested");
    let v_t = svd.v_t.expect("V^T requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = rel_tol * smax;
    let mut out = DMatrix::zeros(c, r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += v_t.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    out
}

/// Orthonormal basis of the null space of a square matrix, using the
/// threshold `rel_tol * sigma_max` (absolute `rel_tol` when the matrix is zero).
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let (_, s, v) = svd_sorted(m);
    let smax = s.iter().copied().fold(0.0, f64::max);
    let cutoff = if smax > 0.0 { rel_tol * smax } else { rel_tol };
    let rank = s.iter().filter(|&&x| x > cutoff).count();
    v.columns(rank, n - rank).into_owned()
}

/// Block-diagonal matrix from two square blocks.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DMatrix::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

/// Assemble `[[tl, tr], [tr^T, br]]`.
pub fn sym_block2(tl: &DMatrix<f64>, tr: &DMatrix<f64>, br: &DMatrix<f64>) -> DMatrix<f64> {
    let n1 = tl.nrows();
    let n2 = br.nrows();
    let mut out = DMatrix::zeros(n1 + n2, n1 + n2);
    out.view_mut((0, 0), (n1, n1)).copy_from(tl);
    out.view_mut((0, n1), (n1, n2)).copy_from(tr);
    out.view_mut((n1, 0), (n2, n1)).copy_from(&tr.transpose());
    out.view_mut((n1, n1), (n2, n2)).copy_from(br);
    out
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `serialize_with` helper writing a matrix as a list of rows.
pub fn ser_mat<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&to_rows(m), s)
}

/// Same as [`ser_mat`] for optional matrices.
pub fn ser_opt_mat<S: serde::Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&m.as_ref().map(to_rows), s)
}
