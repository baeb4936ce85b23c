//! Fourth-order hierarchical Tucker tensors on the fixed dimension tree
//! `{1,2,3,4} -> {1,2} | {3,4}`.
//!
//! Modes are indexed `0..4` for `(x1, x2, v1, v2)`. A tensor stores four leaf
//! frames `U_mu` (`n_mu x r_mu`), transfer tensors `B12`, `B34` and an
//! `r12 x r34` root matrix, so that
//!
//! ```text
//! U12[:, p] = sum_{a,b} B12(a, b, p) U1[:, a] (x) U2[:, b]
//! U34[:, q] = sum_{a,b} B34(a, b, q) U3[:, a] (x) U4[:, b]
//! f         = U12 * root * U34^T
//! ```

mod apply;
mod conservative;
mod io;

pub use apply::{apply_sum, KronTerm, LeafOp};
pub use conservative::{
    conservative_truncate_2d2v, conservative_truncate_2d2v_unrepaired, VBasis2D, F1_CLEANUP_EPS,
};

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::grid::AxisGrid;
use crate::linalg::{dominant_subspace, hcat, svd, tail_rank, thin_qr};
use crate::lowrank::LowRankMatrix;

/// Largest dense evaluation permitted (`2^24` entries).
pub const DENSE_LIMIT: usize = 1 << 24;

/// Third-order transfer tensor `B(a, b, p)` with `a < left`, `b < right`,
/// `p < parent`, stored as its matricization with the parent index as
/// columns: row `a + left * b`, column `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    left: usize,
    right: usize,
    mat: DMatrix<f64>,
}

impl Transfer {
    pub fn new(left: usize, right: usize, mat: DMatrix<f64>) -> Result<Self> {
        check_len("transfer tensor rows", left * right, mat.nrows())?;
        Ok(Self { left, right, mat })
    }

    pub fn zeros(left: usize, right: usize, parent: usize) -> Self {
        Self {
            left,
            right,
            mat: DMatrix::zeros(left * right, parent),
        }
    }

    /// `(left, right, parent)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.left, self.right, self.mat.ncols())
    }

    pub fn get(&self, a: usize, b: usize, p: usize) -> f64 {
        self.mat[(a + self.left * b, p)]
    }

    pub fn set(&mut self, a: usize, b: usize, p: usize, value: f64) {
        self.mat[(a + self.left * b, p)] = value;
    }

    /// Matricization with the parent index as columns.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// The `left x right` slice `B(:, :, p)`.
    pub fn slice(&self, p: usize) -> DMatrix<f64> {
        let len = self.left * self.right;
        DMatrix::from_column_slice(
            self.left,
            self.right,
            &self.mat.as_slice()[p * len..(p + 1) * len],
        )
    }

    pub fn from_slices(left: usize, right: usize, slices: &[DMatrix<f64>]) -> Self {
        let mut mat = DMatrix::zeros(left * right, slices.len());
        for (p, s) in slices.iter().enumerate() {
            debug_assert_eq!(s.shape(), (left, right));
            mat.column_mut(p).copy_from_slice(s.as_slice());
        }
        Self { left, right, mat }
    }

    /// Mode-1 matricization, `left x (right * parent)`.
    pub fn mode_left(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(
            self.left,
            self.right * self.mat.ncols(),
            self.mat.as_slice(),
        )
    }

    /// Mode-2 matricization, `right x (left * parent)`.
    pub fn mode_right(&self) -> DMatrix<f64> {
        let parent = self.mat.ncols();
        let mut out = DMatrix::zeros(self.right, self.left * parent);
        for p in 0..parent {
            out.columns_mut(p * self.left, self.left)
                .copy_from(&self.slice(p).transpose());
        }
        out
    }

    /// `B(:, :, p) -> ml * B(:, :, p) * mr^T` for every `p`; `None` is the
    /// identity.
    pub fn apply_children(&self, ml: Option<&DMatrix<f64>>, mr: Option<&DMatrix<f64>>) -> Self {
        let left = ml.map_or(self.left, |m| m.nrows());
        let right = mr.map_or(self.right, |m| m.nrows());
        if let (Some(m), None) = (ml, mr) {
            // the mode-1 matricization is a plain reshape
            let prod = m * self.mode_left();
            return Self {
                left,
                right,
                mat: DMatrix::from_column_slice(left * right, self.mat.ncols(), prod.as_slice()),
            };
        }
        let slices: Vec<_> = (0..self.mat.ncols())
            .map(|p| {
                let s = self.slice(p);
                let s = match ml {
                    Some(m) => m * s,
                    None => s,
                };
                match mr {
                    Some(m) => s * m.transpose(),
                    None => s,
                }
            })
            .collect();
        Self::from_slices(left, right, &slices)
    }

    /// `B(a, b, :) -> m * B(a, b, :)`, i.e. the matricization times `m^T`.
    pub fn apply_parent(&self, m: &DMatrix<f64>) -> Self {
        Self {
            left: self.left,
            right: self.right,
            mat: &self.mat * m.transpose(),
        }
    }

    /// Block-diagonal embedding of `a` and `b` in all three indices.
    fn block_diag(a: &Self, b: &Self) -> Self {
        let (la, ra, pa) = a.dims();
        let (lb, rb, pb) = b.dims();
        let mut out = Self::zeros(la + lb, ra + rb, pa + pb);
        for p in 0..pa {
            for j in 0..ra {
                for i in 0..la {
                    out.set(i, j, p, a.get(i, j, p));
                }
            }
        }
        for p in 0..pb {
            for j in 0..rb {
                for i in 0..lb {
                    out.set(la + i, ra + j, pa + p, b.get(i, j, p));
                }
            }
        }
        out
    }
}

/// Hierarchical ranks `(r1, r2, r3, r4, r12, r34)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RankTuple {
    pub r1: usize,
    pub r2: usize,
    pub r3: usize,
    pub r4: usize,
    pub r12: usize,
    pub r34: usize,
}

impl RankTuple {
    pub fn as_array(&self) -> [usize; 6] {
        [self.r1, self.r2, self.r3, self.r4, self.r12, self.r34]
    }

    pub fn max(&self) -> usize {
        self.as_array().into_iter().max().unwrap_or(0)
    }
}

impl fmt::Display for RankTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{},{},{},{})",
            self.r1, self.r2, self.r3, self.r4, self.r12, self.r34
        )
    }
}

/// Mass, current and kinetic-energy densities of a 2D2V tensor as low-rank
/// matrices over `(x1, x2)`.
#[derive(Debug, Clone)]
pub struct Moments2D {
    pub rho: LowRankMatrix,
    pub current1: LowRankMatrix,
    pub current2: LowRankMatrix,
    pub kappa: LowRankMatrix,
}

impl Moments2D {
    pub fn as_array(&self) -> [&LowRankMatrix; 4] {
        [&self.rho, &self.current1, &self.current2, &self.kappa]
    }

    /// Largest pointwise deviation of each density relative to the sup-norm
    /// of the reference density (absolute when the reference vanishes).
    pub fn relative_deviation(&self, reference: &Moments2D) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (k, (a, b)) in self.as_array().iter().zip(reference.as_array()).enumerate() {
            let b = b.to_dense();
            let scale = b.amax();
            let diff = (a.to_dense() - b).amax();
            out[k] = if scale > 0.0 { diff / scale } else { diff };
        }
        out
    }
}

/// Fourth-order tensor in hierarchical Tucker format.
#[derive(Debug, Clone, PartialEq)]
pub struct HTensor {
    leaves: [DMatrix<f64>; 4],
    b12: Transfer,
    b34: Transfer,
    root: DMatrix<f64>,
    orthogonal: bool,
}

/// Columns of `vectors` without exact duplicates, plus the column index of
/// each input vector.
fn dedup_columns(vectors: &[&DVector<f64>], n: usize) -> (DMatrix<f64>, Vec<usize>) {
    let mut unique: Vec<&DVector<f64>> = Vec::new();
    let mut index = Vec::with_capacity(vectors.len());
    for v in vectors {
        match unique.iter().position(|u| u == v) {
            Some(i) => index.push(i),
            None => {
                index.push(unique.len());
                unique.push(v);
            }
        }
    }
    let mut m = DMatrix::zeros(n, unique.len());
    for (j, u) in unique.iter().enumerate() {
        m.set_column(j, u);
    }
    (m, index)
}

/// How one side of the tree is merged in [`HTensor::add`].
#[derive(Clone, Copy, PartialEq)]
enum Share {
    /// Leaves and transfer tensor identical: the node frame is shared.
    Node,
    /// Leaves identical: transfer tensors are concatenated along the parent.
    Leaves,
    None,
}

impl HTensor {
    pub fn new(
        leaves: [DMatrix<f64>; 4],
        b12: Transfer,
        b34: Transfer,
        root: DMatrix<f64>,
    ) -> Result<Self> {
        let (l, r, p) = b12.dims();
        check_len("B12 left rank", leaves[0].ncols(), l)?;
        check_len("B12 right rank", leaves[1].ncols(), r)?;
        check_len("root rows", p, root.nrows())?;
        let (l, r, p) = b34.dims();
        check_len("B34 left rank", leaves[2].ncols(), l)?;
        check_len("B34 right rank", leaves[3].ncols(), r)?;
        check_len("root columns", p, root.ncols())?;
        Ok(Self {
            leaves,
            b12,
            b34,
            root,
            orthogonal: false,
        })
    }

    /// The zero tensor with all ranks 0.
    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            leaves: dims.map(|n| DMatrix::zeros(n, 0)),
            b12: Transfer::zeros(0, 0, 0),
            b34: Transfer::zeros(0, 0, 0),
            root: DMatrix::zeros(0, 0),
            orthogonal: true,
        }
    }

    /// `f = sum_{a,b} root[a,b] (x1_a (x) x2_a) (x) (v1_b (x) v2_b)`.
    ///
    /// Identical leaf vectors are stored once, so e.g. `1 (x) 1 + c (x) 1`
    /// has leaf ranks `(2, 1)` and node rank 2.
    pub fn from_blocks(
        x_terms: &[(&DVector<f64>, &DVector<f64>)],
        v_terms: &[(&DVector<f64>, &DVector<f64>)],
        root: DMatrix<f64>,
    ) -> Result<Self> {
        if x_terms.is_empty() || v_terms.is_empty() {
            return Err(Error::InvalidArgument("empty separable term list".into()));
        }
        check_len("root rows", x_terms.len(), root.nrows())?;
        check_len("root columns", v_terms.len(), root.ncols())?;
        let build = |terms: &[(&DVector<f64>, &DVector<f64>)]| -> Result<_> {
            let (n1, n2) = (terms[0].0.len(), terms[0].1.len());
            for (a, b) in terms {
                check_len("separable leaf vector", n1, a.len())?;
                check_len("separable leaf vector", n2, b.len())?;
            }
            let firsts: Vec<_> = terms.iter().map(|t| t.0).collect();
            let seconds: Vec<_> = terms.iter().map(|t| t.1).collect();
            let (u1, i1) = dedup_columns(&firsts, n1);
            let (u2, i2) = dedup_columns(&seconds, n2);
            let mut b = Transfer::zeros(u1.ncols(), u2.ncols(), terms.len());
            for p in 0..terms.len() {
                b.set(i1[p], i2[p], p, 1.0);
            }
            Ok((u1, u2, b))
        };
        let (u1, u2, b12) = build(x_terms)?;
        let (u3, u4, b34) = build(v_terms)?;
        Self::new([u1, u2, u3, u4], b12, b34, root)
    }

    /// Sum of rank-one terms `coeff * u1 (x) u2 (x) u3 (x) u4`. Terms sharing
    /// the same `(u1, u2)` or `(u3, u4)` pair share a node column.
    pub fn from_separable(terms: &[([&DVector<f64>; 4], f64)]) -> Result<Self> {
        type Pair<'a> = (&'a DVector<f64>, &'a DVector<f64>);
        fn unique<'a>(pairs: impl Iterator<Item = Pair<'a>>) -> (Vec<Pair<'a>>, Vec<usize>) {
            let mut out: Vec<Pair<'a>> = Vec::new();
            let index = pairs
                .map(|p| match out.iter().position(|q| q == &p) {
                    Some(i) => i,
                    None => {
                        out.push(p);
                        out.len() - 1
                    }
                })
                .collect();
            (out, index)
        }
        let (x, ix) = unique(terms.iter().map(|(u, _)| (u[0], u[1])));
        let (v, iv) = unique(terms.iter().map(|(u, _)| (u[2], u[3])));
        let mut root = DMatrix::zeros(x.len(), v.len());
        for (t, (_, c)) in terms.iter().enumerate() {
            root[(ix[t], iv[t])] += c;
        }
        Self::from_blocks(&x, &v, root)
    }

    pub fn dims(&self) -> [usize; 4] {
        [
            self.leaves[0].nrows(),
            self.leaves[1].nrows(),
            self.leaves[2].nrows(),
            self.leaves[3].nrows(),
        ]
    }

    pub fn ranks(&self) -> RankTuple {
        RankTuple {
            r1: self.leaves[0].ncols(),
            r2: self.leaves[1].ncols(),
            r3: self.leaves[2].ncols(),
            r4: self.leaves[3].ncols(),
            r12: self.root.nrows(),
            r34: self.root.ncols(),
        }
    }

    pub fn leaf(&self, mode: usize) -> &DMatrix<f64> {
        &self.leaves[mode]
    }

    pub fn b12(&self) -> &Transfer {
        &self.b12
    }

    pub fn b34(&self) -> &Transfer {
        &self.b34
    }

    pub fn root(&self) -> &DMatrix<f64> {
        &self.root
    }

    /// Orthonormal leaves and orthonormal (parent-as-columns) transfers.
    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    /// Number of stored floating-point values.
    pub fn storage(&self) -> usize {
        let r = self.ranks();
        let leaves: usize = self.leaves.iter().map(|u| u.len()).sum();
        leaves + r.r1 * r.r2 * r.r12 + r.r3 * r.r4 * r.r34 + r.r12 * r.r34
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            root: &self.root * alpha,
            ..self.clone()
        }
    }

    fn check_same_dims(&self, other: &Self) -> Result<()> {
        for (a, b) in self.dims().iter().zip(other.dims()) {
            check_len("HT grid size", *a, b)?;
        }
        Ok(())
    }

    /// Exact sum by rank concatenation. Leaf frames (and whole node frames)
    /// that are bitwise identical in both operands are shared rather than
    /// duplicated.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dims(other)?;
        if other.root.is_empty() {
            return Ok(self.clone());
        }
        if self.root.is_empty() {
            return Ok(other.clone());
        }
        let share = |la: usize, lb: usize, ta: &Transfer, tb: &Transfer| {
            if self.leaves[la] == other.leaves[la] && self.leaves[lb] == other.leaves[lb] {
                if ta == tb {
                    Share::Node
                } else {
                    Share::Leaves
                }
            } else {
                Share::None
            }
        };
        let sx = share(0, 1, &self.b12, &other.b12);
        let sv = share(2, 3, &self.b34, &other.b34);
        let merge = |s: Share, la: usize, lb: usize, ta: &Transfer, tb: &Transfer| match s {
            Share::Node => (
                self.leaves[la].clone(),
                self.leaves[lb].clone(),
                ta.clone(),
                0,
            ),
            Share::Leaves => (
                self.leaves[la].clone(),
                self.leaves[lb].clone(),
                Transfer {
                    left: ta.left,
                    right: ta.right,
                    mat: hcat(&ta.mat, &tb.mat),
                },
                ta.mat.ncols(),
            ),
            Share::None => (
                hcat(&self.leaves[la], &other.leaves[la]),
                hcat(&self.leaves[lb], &other.leaves[lb]),
                Transfer::block_diag(ta, tb),
                ta.mat.ncols(),
            ),
        };
        let (u1, u2, b12, row_off) = merge(sx, 0, 1, &self.b12, &other.b12);
        let (u3, u4, b34, col_off) = merge(sv, 2, 3, &self.b34, &other.b34);
        let mut root = DMatrix::zeros(b12.mat.ncols(), b34.mat.ncols());
        let (ra, ca) = self.root.shape();
        let (rb, cb) = other.root.shape();
        root.view_mut((0, 0), (ra, ca)).copy_from(&self.root);
        let mut block = root.view_mut((row_off, col_off), (rb, cb));
        block += &other.root;
        Self::new([u1, u2, u3, u4], b12, b34, root)
    }

    /// Apply `op` to the frame of leaf `mode` (0-based).
    pub fn leaf_apply(&self, mode: usize, op: LeafOp<'_>) -> Result<Self> {
        if mode > 3 {
            return Err(Error::InvalidArgument(format!(
                "leaf index {mode} out of range"
            )));
        }
        let mut out = self.clone();
        out.leaves[mode] = op.apply(&self.leaves[mode])?;
        out.orthogonal = false;
        Ok(out)
    }

    /// Element-wise scaling of the frame of leaf `mode`.
    pub fn scale_leaf(&self, mode: usize, v: &DVector<f64>) -> Result<Self> {
        self.leaf_apply(mode, LeafOp::Diag(v))
    }

    /// Multiply by `w1 (x) w2` in the two velocity directions.
    pub fn scale_v(&self, w1: &DVector<f64>, w2: &DVector<f64>) -> Result<Self> {
        self.scale_leaf(2, w1)?.scale_leaf(3, w2)
    }

    /// Frame of node `{1,2}` as an `(n1 n2) x r12` matrix (row `i1 + n1 i2`).
    fn node_frame(u1: &DMatrix<f64>, u2: &DMatrix<f64>, b: &Transfer) -> DMatrix<f64> {
        let (n1, n2) = (u1.nrows(), u2.nrows());
        let mut out = DMatrix::zeros(n1 * n2, b.mat.ncols());
        for p in 0..b.mat.ncols() {
            let m = u1 * b.slice(p) * u2.transpose();
            out.column_mut(p).copy_from_slice(m.as_slice());
        }
        out
    }

    /// Dense `(n1 n2) x (n3 n4)` matricization: entry
    /// `(i1 + n1 i2, i3 + n3 i4)` is `f(i1, i2, i3, i4)`.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let entries: usize = self.dims().iter().product();
        if entries > DENSE_LIMIT {
            return Err(Error::DenseGuard {
                entries,
                limit: DENSE_LIMIT,
            });
        }
        let u12 = Self::node_frame(&self.leaves[0], &self.leaves[1], &self.b12);
        let u34 = Self::node_frame(&self.leaves[2], &self.leaves[3], &self.b34);
        Ok(u12 * &self.root * u34.transpose())
    }

    /// Exact re-representation with orthonormal leaf frames and transfer
    /// tensors, by QR sweeps from the leaves to the root.
    pub fn orthogonalize(&self) -> Self {
        if self.orthogonal {
            return self.clone();
        }
        let mut leaves = self.leaves.clone();
        let mut rs: Vec<DMatrix<f64>> = Vec::with_capacity(4);
        for leaf in leaves.iter_mut() {
            let (q, r) = thin_qr(leaf);
            *leaf = q;
            rs.push(r);
        }
        let mut b12 = self.b12.apply_children(Some(&rs[0]), Some(&rs[1]));
        let mut b34 = self.b34.apply_children(Some(&rs[2]), Some(&rs[3]));
        // Fold a rectangular root into the node with more parent columns so
        // both QRs below see at most min(r12, r34) columns.
        let (p12, p34) = self.root.shape();
        let mut root = self.root.clone();
        if p12 > p34 {
            b12.mat = &b12.mat * &root;
            root = DMatrix::identity(p34, p34);
        } else if p34 > p12 {
            b34.mat = &b34.mat * root.transpose();
            root = DMatrix::identity(p12, p12);
        }
        let (q12, r12) = thin_qr(&b12.mat);
        let (q34, r34) = thin_qr(&b34.mat);
        let root = r12 * root * r34.transpose();
        Self {
            leaves,
            b12: Transfer {
                left: b12.left,
                right: b12.right,
                mat: q12,
            },
            b34: Transfer {
                left: b34.left,
                right: b34.right,
                mat: q34,
            },
            root,
            orthogonal: true,
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        if self.orthogonal {
            self.root.norm()
        } else {
            self.orthogonalize().root.norm()
        }
    }

    /// Hierarchical SVD truncation, root to leaves. Every truncated edge
    /// (the root edge and the four leaves) discards singular values of
    /// Euclidean norm at most `eps`, so `||f - T(f)||_F <= sqrt(5) eps`.
    /// The result is orthogonal.
    pub fn truncate(&self, eps: f64) -> Self {
        let f = self.orthogonalize();
        let r = f.ranks();
        if r.r12 == 0 || r.r34 == 0 {
            return Self::zeros(self.dims());
        }
        let s = svd(&f.root);
        let k = tail_rank(s.sigma.as_slice(), eps);
        if k == 0 {
            return Self::zeros(self.dims());
        }
        let p = s.u.columns(0, k).into_owned();
        let q = s.v_t.rows(0, k).transpose();
        let root = DMatrix::from_diagonal(&s.sigma.rows(0, k).into_owned());
        let b12 = Transfer {
            left: f.b12.left,
            right: f.b12.right,
            mat: &f.b12.mat * p,
        };
        let b34 = Transfer {
            left: f.b34.left,
            right: f.b34.right,
            mat: &f.b34.mat * q,
        };

        // Leaf projections from the root-truncated tensor. With orthonormal
        // complements the singular values of each leaf matricization are
        // those of the transfer tensor contracted with the root.
        let dominant = |m: DMatrix<f64>| dominant_subspace(&m, eps);
        let c12 = Transfer {
            left: b12.left,
            right: b12.right,
            mat: &b12.mat * &root,
        };
        let c34 = Transfer {
            left: b34.left,
            right: b34.right,
            mat: &b34.mat * root.transpose(),
        };
        let p1 = dominant(c12.mode_left());
        let p2 = dominant(c12.mode_right());
        let p3 = dominant(c34.mode_left());
        let p4 = dominant(c34.mode_right());
        let leaves = [
            &f.leaves[0] * &p1,
            &f.leaves[1] * &p2,
            &f.leaves[2] * &p3,
            &f.leaves[3] * &p4,
        ];
        let b12 = b12.apply_children(Some(&p1.transpose()), Some(&p2.transpose()));
        let b34 = b34.apply_children(Some(&p3.transpose()), Some(&p4.transpose()));
        Self {
            leaves,
            b12,
            b34,
            root,
            orthogonal: false,
        }
        .orthogonalize()
    }

    /// Contraction of node `{3,4}` against `a (x) b` with plain quadrature:
    /// `s[q] = h3 h4 sum U34[:, q] . (a (x) b)`.
    fn contract_v(&self, a: &DVector<f64>, b: &DVector<f64>, h: f64) -> DVector<f64> {
        let p3 = self.leaves[2].transpose() * a;
        let p4 = self.leaves[3].transpose() * b;
        let outer = &p3 * p4.transpose();
        let flat = DVector::from_column_slice(outer.as_slice());
        self.b34.mat.transpose() * flat * h
    }

    /// Spatial density `sum_q s[q] * (U12 root)[:, q]` as a low-rank matrix.
    fn density_from(&self, s: &DVector<f64>) -> Result<LowRankMatrix> {
        let c = &self.root * s;
        let core_vec = &self.b12.mat * c;
        let core = DMatrix::from_column_slice(self.b12.left, self.b12.right, core_vec.as_slice());
        LowRankMatrix::from_core(&self.leaves[0], &core, &self.leaves[1])
    }

    /// The velocity slice `f(i1, i2, :, :)` as a dense `n3 x n4` matrix.
    pub fn v_slice(&self, i1: usize, i2: usize) -> Result<DMatrix<f64>> {
        let dims = self.dims();
        if i1 >= dims[0] || i2 >= dims[1] {
            return Err(Error::InvalidArgument(format!(
                "slice index ({i1}, {i2}) outside the {}x{} spatial grid",
                dims[0], dims[1]
            )));
        }
        let a = self.leaves[0].row(i1).transpose();
        let b = self.leaves[1].row(i2).transpose();
        let outer = a * b.transpose();
        let u12 = self.b12.mat.transpose() * DVector::from_column_slice(outer.as_slice());
        let c = self.root.transpose() * u12;
        let core_vec = &self.b34.mat * c;
        let core = DMatrix::from_column_slice(self.b34.left, self.b34.right, core_vec.as_slice());
        Ok(&self.leaves[2] * core * self.leaves[3].transpose())
    }

    /// Mass density only (cheaper than [`HTensor::moments`]).
    pub fn density(&self, v1: &AxisGrid, v2: &AxisGrid) -> Result<LowRankMatrix> {
        check_len("HT density (v1 grid)", self.dims()[2], v1.len())?;
        check_len("HT density (v2 grid)", self.dims()[3], v2.len())?;
        let s = self.contract_v(&v1.ones(), &v2.ones(), v1.spacing() * v2.spacing());
        self.density_from(&s)
    }

    /// Discrete densities `rho`, `J1`, `J2`, `kappa` over `(x1, x2)`,
    /// contracted one velocity direction at a time.
    pub fn moments(&self, v1: &AxisGrid, v2: &AxisGrid) -> Result<Moments2D> {
        check_len("HT moments (v1 grid)", self.dims()[2], v1.len())?;
        check_len("HT moments (v2 grid)", self.dims()[3], v2.len())?;
        let h = v1.spacing() * v2.spacing();
        let (one1, one2) = (v1.ones(), v2.ones());
        let (w1, w2) = (v1.points(), v2.points());
        let half_sq1 = w1.map(|v| 0.5 * v * v);
        let half_sq2 = w2.map(|v| 0.5 * v * v);
        let kappa = self.contract_v(&half_sq1, &one2, h) + self.contract_v(&one1, &half_sq2, h);
        Ok(Moments2D {
            rho: self.density_from(&self.contract_v(&one1, &one2, h))?,
            current1: self.density_from(&self.contract_v(w1, &one2, h))?,
            current2: self.density_from(&self.contract_v(&one1, w2, h))?,
            kappa: self.density_from(&kappa)?,
        })
    }
}
