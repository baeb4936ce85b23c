//! Exact evaluation of sums of Kronecker-structured operators applied to HT
//! tensors, without going through repeated pairwise additions.

use nalgebra::{DMatrix, DVector};

use super::{HTensor, Transfer};
use crate::error::{check_len, Error, Result};
use crate::linalg::{hcat_all, scale_rows, thin_qr};

/// Linear map acting on the frame of one leaf.
#[derive(Debug, Clone, Copy)]
pub enum LeafOp<'a> {
    Identity,
    /// Left multiplication `A * U`.
    Matrix(&'a DMatrix<f64>),
    /// Element-wise scaling of every column, `diag(d) * U`.
    Diag(&'a DVector<f64>),
}

impl LeafOp<'_> {
    pub fn apply(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            LeafOp::Identity => Ok(u.clone()),
            LeafOp::Matrix(a) => {
                check_len("leaf operator", u.nrows(), a.ncols())?;
                check_len("leaf operator (square)", a.ncols(), a.nrows())?;
                Ok(*a * u)
            }
            LeafOp::Diag(d) => {
                check_len("leaf scaling", u.nrows(), d.len())?;
                Ok(scale_rows(u, d))
            }
        }
    }
}

/// The operator `coeff * (sum_m A1_m (x) A2_m) (x) (A3 (x) A4)`.
///
/// The inner sum over `x_ops` lets a low-rank spatial multiplier (such as a
/// compressed electric field) share one velocity operator.
#[derive(Debug, Clone)]
pub struct KronTerm<'a> {
    pub coeff: f64,
    pub x_ops: Vec<[LeafOp<'a>; 2]>,
    pub v_ops: [LeafOp<'a>; 2],
}

impl<'a> KronTerm<'a> {
    pub fn new(coeff: f64, x_ops: Vec<[LeafOp<'a>; 2]>, v_ops: [LeafOp<'a>; 2]) -> Self {
        Self {
            coeff,
            x_ops,
            v_ops,
        }
    }

    pub fn identity(coeff: f64) -> Self {
        Self::new(coeff, vec![[LeafOp::Identity; 2]], [LeafOp::Identity; 2])
    }
}

struct Block {
    group: usize,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

/// Stack the leaf frames of all blocks, orthonormalize them with one QR each
/// and express every block's transfer tensor in the new bases.
fn merge_side(
    blocks: &[Block],
    rows: (usize, usize),
    transfer: impl Fn(usize) -> Transfer,
) -> (DMatrix<f64>, DMatrix<f64>, Transfer) {
    let fa: Vec<_> = blocks.iter().map(|b| b.a.clone()).collect();
    let fb: Vec<_> = blocks.iter().map(|b| b.b.clone()).collect();
    let (qa, ra) = thin_qr(&hcat_all(rows.0, &fa));
    let (qb, rb) = thin_qr(&hcat_all(rows.1, &fb));
    let (ka, kb) = (qa.ncols(), qb.ncols());
    let mut slices = Vec::new();
    let (mut oa, mut ob) = (0, 0);
    for block in blocks {
        let t = transfer(block.group);
        let (la, lb, parent) = t.dims();
        let ra_b = ra.columns(oa, la);
        let rb_b = rb.columns(ob, lb);
        for p in 0..parent {
            slices.push(ra_b * t.slice(p) * rb_b.transpose());
        }
        oa += la;
        ob += lb;
    }
    (qa, qb, Transfer::from_slices(ka, kb, &slices))
}

/// `sum_g sum_{t in terms_g} t(f_g)` evaluated exactly.
///
/// All inputs must share grid sizes. Leaf frames of the result are
/// orthonormal (their rank is capped by the grid size), while the transfer
/// tensors and root carry the block structure of the individual terms.
pub fn apply_sum(groups: &[(&HTensor, &[KronTerm<'_>])]) -> Result<HTensor> {
    let first = groups
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty operator sum".into()))?;
    let dims = first.0.dims();
    for (f, _) in groups {
        first.0.check_same_dims(f)?;
    }

    let mut xblocks = Vec::new();
    let mut vblocks = Vec::new();
    let mut entries = Vec::new();
    for (g, (f, terms)) in groups.iter().enumerate() {
        let r = f.ranks();
        if r.r12 == 0 || r.r34 == 0 {
            continue;
        }
        for term in terms.iter() {
            if term.coeff == 0.0 || term.x_ops.is_empty() {
                continue;
            }
            let vi = vblocks.len();
            vblocks.push(Block {
                group: g,
                a: term.v_ops[0].apply(&f.leaves[2])?,
                b: term.v_ops[1].apply(&f.leaves[3])?,
            });
            for [o1, o2] in &term.x_ops {
                entries.push((xblocks.len(), vi, term.coeff));
                xblocks.push(Block {
                    group: g,
                    a: o1.apply(&f.leaves[0])?,
                    b: o2.apply(&f.leaves[1])?,
                });
            }
        }
    }
    if entries.is_empty() {
        return Ok(HTensor::zeros(dims));
    }

    let (u1, u2, b12) = merge_side(&xblocks, (dims[0], dims[1]), |g| groups[g].0.b12.clone());
    let (u3, u4, b34) = merge_side(&vblocks, (dims[2], dims[3]), |g| groups[g].0.b34.clone());

    let offsets = |blocks: &[Block], rank: &dyn Fn(&HTensor) -> usize| {
        let mut acc = 0;
        blocks
            .iter()
            .map(|b| {
                let start = acc;
                acc += rank(groups[b.group].0);
                start
            })
            .collect::<Vec<_>>()
    };
    let row_off = offsets(&xblocks, &|f| f.root.nrows());
    let col_off = offsets(&vblocks, &|f| f.root.ncols());
    let mut root = DMatrix::zeros(b12.dims().2, b34.dims().2);
    for (xi, vi, coeff) in entries {
        let src = &groups[xblocks[xi].group].0.root;
        let mut view = root.view_mut((row_off[xi], col_off[vi]), src.shape());
        view += src * coeff;
    }
    HTensor::new([u1, u2, u3, u4], b12, b34, root)
}
