//! Small dense factorization helpers shared by the matrix and HT formats.

use nalgebra::{DMatrix, DVector};

/// Thin QR factorization `m = q * r` with `q` of size `rows x min(rows, cols)`.
/// Empty inputs yield empty factors.
pub(crate) fn thin_qr(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (DMatrix::zeros(rows, 0), DMatrix::zeros(0, cols));
    }
    let qr = m.clone().qr();
    (qr.q(), qr.r())
}

/// SVD with singular values sorted in descending order.
pub(crate) struct SortedSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub(crate) fn svd(m: &DMatrix<f64>) -> SortedSvd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return SortedSvd {
            u: DMatrix::zeros(rows, 0),
            sigma: DVector::zeros(0),
            v_t: DMatrix::zeros(0, cols),
        };
    }
    // nalgebra's bidiagonal SVD can lose several digits on strongly graded
    // matrices (exactly the cores that arise after truncation), so the
    // factorization is done by faer.
    let a = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let s = a.thin_svd().expect("SVD did not converge");
    let (u, d, v) = (s.U(), s.S(), s.V());
    let k = rows.min(cols);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&p, &q| d[q].total_cmp(&d[p]));
    SortedSvd {
        u: DMatrix::from_fn(rows, k, |i, l| u[(i, order[l])]),
        sigma: DVector::from_fn(k, |l, _| d[order[l]]),
        v_t: DMatrix::from_fn(k, cols, |l, j| v[(j, order[l])]),
    }
}

/// Left singular vectors and singular values of `m`. Wide inputs are first
/// reduced by a QR factorization of `m^T`, so the cost is linear in the
/// number of columns.
pub(crate) fn left_singular(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    if m.ncols() > m.nrows() {
        let (_, r) = thin_qr(&m.transpose());
        let s = svd(&r.transpose());
        (s.u, s.sigma)
    } else {
        let s = svd(m);
        (s.u, s.sigma)
    }
}

/// Orthonormal basis of the dominant left singular subspace of `m`, keeping
/// the smallest rank whose discarded tail has Euclidean norm at most `eps`.
pub(crate) fn dominant_subspace(m: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let (u, sigma) = left_singular(m);
    let k = tail_rank(sigma.as_slice(), eps);
    u.columns(0, k).into_owned()
}

/// Smallest rank `r` such that the Euclidean norm of the discarded tail
/// `sigma[r..]` is at most `eps`. `sigma` must be sorted descending.
pub(crate) fn tail_rank(sigma: &[f64], eps: f64) -> usize {
    let mut tail = 0.0;
    let mut rank = sigma.len();
    let eps2 = eps * eps;
    while rank > 0 {
        let next = tail + sigma[rank - 1] * sigma[rank - 1];
        if next > eps2 {
            break;
        }
        tail = next;
        rank -= 1;
    }
    rank
}

/// Column-wise element-wise product `diag(v) * m`.
pub(crate) fn scale_rows(m: &DMatrix<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        col.component_mul_assign(v);
    }
    out
}

/// Horizontal concatenation `[a, b]`.
pub(crate) fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Horizontal concatenation of several blocks with a common row count.
pub(crate) fn hcat_all(rows: usize, blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}
