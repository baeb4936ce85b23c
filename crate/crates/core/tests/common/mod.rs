//! Random states and brute-force dense references shared by the
//! integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use lowrank_vp::htucker::Transfer;
use lowrank_vp::{AxisGrid, HTensor, LowRankMatrix, VelocityWeights, WeightSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn weights(nv: usize, v_max: f64) -> VelocityWeights {
    let axis = AxisGrid::velocity(nv, v_max).unwrap();
    VelocityWeights::new(&axis, WeightSpec::standard()).unwrap()
}

pub fn maxwellian(v: &AxisGrid) -> DVector<f64> {
    v.map(|s| (-s * s / 2.0).exp() / (2.0 * PI).sqrt())
}

/// Rank-`r` state with Gaussian velocity profile and coefficients decaying
/// like `2^-l`, so a threshold cuts somewhere inside the spectrum.
pub fn random_state_1d(
    rng: &mut ChaCha8Rng,
    x: &AxisGrid,
    v: &AxisGrid,
    r: usize,
) -> LowRankMatrix {
    let u = uniform(rng, x.len(), r);
    let g = maxwellian(v);
    let mut vf = uniform(rng, v.len(), r);
    for mut col in vf.column_iter_mut() {
        col.component_mul_assign(&g);
    }
    let scale = rng.gen_range(0.5..2.0);
    let coeffs = DVector::from_fn(r, |l, _| scale * 0.5f64.powi(l as i32));
    LowRankMatrix::new(coeffs, u, vf).unwrap()
}

/// HT tensor with random frames, Gaussian velocity leaves and leaf spectra
/// decaying like `decay^j`.
pub fn random_state_2d(
    rng: &mut ChaCha8Rng,
    dims: [usize; 4],
    ranks: [usize; 6],
    decay: f64,
    v_max: f64,
) -> HTensor {
    let [r1, r2, r3, r4, r12, r34] = ranks;
    let mut leaves: Vec<DMatrix<f64>> = (0..4)
        .map(|m| {
            let mut u = uniform(rng, dims[m], ranks[m]);
            for (j, mut col) in u.column_iter_mut().enumerate() {
                col *= decay.powi(j as i32);
            }
            u
        })
        .collect();
    for m in 2..4 {
        let v = AxisGrid::velocity(dims[m], v_max).unwrap();
        let g = maxwellian(&v);
        for mut col in leaves[m].column_iter_mut() {
            col.component_mul_assign(&g);
        }
    }
    let b12 = Transfer::new(r1, r2, uniform(rng, r1 * r2, r12)).unwrap();
    let b34 = Transfer::new(r3, r4, uniform(rng, r3 * r4, r34)).unwrap();
    let root = uniform(rng, r12, r34);
    let [u1, u2, u3, u4]: [DMatrix<f64>; 4] = leaves.try_into().unwrap();
    HTensor::new([u1, u2, u3, u4], b12, b34, root).unwrap()
}

/// `sum_l c_l u_l v_l^T` entry by entry.
pub fn dense_1d(f: &LowRankMatrix) -> DMatrix<f64> {
    let (u, v, c) = (f.x_frame(), f.v_frame(), f.coeffs());
    DMatrix::from_fn(f.nx(), f.nv(), |i, j| {
        (0..f.rank()).map(|l| c[l] * u[(i, l)] * v[(j, l)]).sum()
    })
}

/// Entry `(i1 + n1 i2, i3 + n3 i4)` of an HT tensor straight from the
/// definition.
pub fn dense_2d(f: &HTensor) -> DMatrix<f64> {
    let [n1, n2, n3, n4] = f.dims();
    let r = f.ranks();
    let (b12, b34, root) = (f.b12(), f.b34(), f.root());
    let x = DMatrix::from_fn(n1 * n2, r.r12, |row, p| {
        let (i1, i2) = (row % n1, row / n1);
        let mut acc = 0.0;
        for a in 0..r.r1 {
            for b in 0..r.r2 {
                acc += b12.get(a, b, p) * f.leaf(0)[(i1, a)] * f.leaf(1)[(i2, b)];
            }
        }
        acc
    });
    let v = DMatrix::from_fn(n3 * n4, r.r34, |col, q| {
        let (i3, i4) = (col % n3, col / n3);
        let mut acc = 0.0;
        for a in 0..r.r3 {
            for b in 0..r.r4 {
                acc += b34.get(a, b, q) * f.leaf(2)[(i3, a)] * f.leaf(3)[(i4, b)];
            }
        }
        acc
    });
    DMatrix::from_fn(n1 * n2, n3 * n4, |row, col| {
        let mut acc = 0.0;
        for p in 0..r.r12 {
            for q in 0..r.r34 {
                acc += x[(row, p)] * root[(p, q)] * v[(col, q)];
            }
        }
        acc
    })
}

/// Apply `op` along one mode of a dense tensor in the layout of
/// [`dense_2d`].
pub fn mode_apply(
    t: &DMatrix<f64>,
    dims: [usize; 4],
    mode: usize,
    op: &DMatrix<f64>,
) -> DMatrix<f64> {
    let [n1, n2, n3, n4] = dims;
    let idx = |i: [usize; 4]| (i[0] + n1 * i[1], i[2] + n3 * i[3]);
    let mut out = DMatrix::zeros(t.nrows(), t.ncols());
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            for i3 in 0..n3 {
                for i4 in 0..n4 {
                    let i = [i1, i2, i3, i4];
                    let mut acc = 0.0;
                    for k in 0..dims[mode] {
                        let mut j = i;
                        j[mode] = k;
                        acc += op[(i[mode], k)] * t[idx(j)];
                    }
                    out[idx(i)] = acc;
                }
            }
        }
    }
    out
}

/// Best approximation of `m` with a discarded singular-value tail of
/// Euclidean norm at most `eps`.
pub fn dense_truncate(m: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let a = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let svd = a.thin_svd().unwrap();
    let (u, d, v) = (svd.U(), svd.S(), svd.V());
    let mut idx: Vec<usize> = (0..m.nrows().min(m.ncols())).collect();
    idx.sort_by(|&p, &q| d[q].total_cmp(&d[p]));
    let mut keep = idx.len();
    let mut tail = 0.0;
    while keep > 0 && tail + d[idx[keep - 1]].powi(2) <= eps * eps {
        tail += d[idx[keep - 1]].powi(2);
        keep -= 1;
    }
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        idx[..keep]
            .iter()
            .map(|&k| u[(i, k)] * d[k] * v[(j, k)])
            .sum()
    })
}

pub fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
