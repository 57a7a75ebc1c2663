// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

//! Dense real-symmetric eigendecomposition and block detection.
//!
//! Hamiltonians assembled by [`crate::model`] are real symmetric and split into
//! independent blocks (excitation-number parity). Decomposing each block
//! separately is several times cheaper than one dense solve.

use nalgebra::{DMatrix, DVector};

/// Ascending eigenvalues with eigenvectors stored as columns.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Eigendecomposition of one block, indices into the parent matrix.
#[derive(Clone, Debug)]
pub struct Block {
    pub indices: Vec<usize>,
    pub eig: Eigh,
}

/// Eigendecomposition of a dense real symmetric matrix.
///
/// Eigenvalues ascend. The sign of each eigenvector is fixed so that its
/// largest-magnitude component is positive.
pub fn eigh(m: &DMatrix<f64>) -> Eigh {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigh needs a square matrix");
    if n == 0 {
        return Eigh { values: vec![], vectors: DMatrix::zeros(0, 0) };
    }
    if n == 1 {
        return Eigh { values: vec![m[(0, 0)]], vectors: DMatrix::from_element(1, 1, 1.0) };
    }
    let a = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let evd = a
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigendecomposition failed");
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[i].total_cmp(&s[j]));
    let values = order.iter().map(|&k| s[k]).collect();
    let mut vectors = DMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    for j in 0..n {
        fix_sign(&mut vectors, j);
    }
    Eigh { values, vectors }
}

fn fix_sign(v: &mut DMatrix<f64>, col: usize) {
    let c = v.column(col);
    let max = c.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    // first component within round-off of the maximum decides, so exact ties are stable
    let pivot = c.iter().position(|x| x.abs() >= max * (1.0 - 1e-9)).unwrap_or(0);
    if c[pivot] < 0.0 {
        v.column_mut(col).neg_mut();
    }
}

/// Connected components of the nonzero pattern of a symmetric matrix.
/// Components are sorted by their smallest index; indices ascend inside each.
pub fn components(pattern: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = pattern.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for j in 0..n {
        for i in (j + 1)..n {
            if pattern[(i, j)] != 0.0 || pattern[(j, i)] != 0.0 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Decompose each block of `m` given by `blocks`.
pub fn eigh_blocks(m: &DMatrix<f64>, blocks: &[Vec<usize>]) -> Vec<Block> {
    blocks
        .iter()
        .map(|idx| {
            let k = idx.len();
            let sub = DMatrix::from_fn(k, k, |i, j| m[(idx[i], idx[j])]);
            Block { indices: idx.clone(), eig: eigh(&sub) }
        })
        .collect()
}

/// Merge block decompositions into a full ascending decomposition.
pub fn assemble(n: usize, blocks: &[Block]) -> Eigh {
    let mut cols: Vec<(f64, usize, usize)> = Vec::with_capacity(n);
    for (b, blk) in blocks.iter().enumerate() {
        for (k, &e) in blk.eig.values.iter().enumerate() {
            cols.push((e, b, k));
        }
    }
    cols.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut vectors = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (j, &(e, b, k)) in cols.iter().enumerate() {
        values.push(e);
        let blk = &blocks[b];
        for (r, &i) in blk.indices.iter().enumerate() {
            vectors[(i, j)] = blk.eig.vectors[(r, k)];
        }
    }
    Eigh { values, vectors }
}

/// Full decomposition through block detection.
pub fn eigh_blocked(m: &DMatrix<f64>, blocks: &[Vec<usize>]) -> Eigh {
    assemble(m.nrows(), &eigh_blocks(m, blocks))
}

/// Max-abs residual of `V^T V - I`.
pub fn orthonormality_defect(v: &DMatrix<f64>) -> f64 {
    let g = v.transpose() * v;
    let n = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Largest `‖H v - λ v‖` over all eigenpairs.
pub fn max_residual(m: &DMatrix<f64>, e: &Eigh) -> f64 {
    let mut worst = 0.0f64;
    for (j, &lam) in e.values.iter().enumerate() {
        let v: DVector<f64> = e.vectors.column(j).into();
        let r = m * &v - &v * lam;
        worst = worst.max(r.norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_gives_unit_vectors() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0, 2.0]));
        let e = eigh(&m);
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
        assert_eq!(e.vectors[(1, 0)], 1.0);
        assert_eq!(e.vectors[(2, 1)], 1.0);
        assert_eq!(e.vectors[(0, 2)], 1.0);
    }

    #[test]
    fn two_level_gap() {
        let (g, d) = (0.3, 1.7);
        let m = DMatrix::from_row_slice(2, 2, &[0.0, g, g, d]);
        let e = eigh(&m);
        let gap = e.values[1] - e.values[0];
        assert!((gap - (d * d + 4.0 * g * g).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn blocks_match_dense() {
        // two interleaved blocks {0,2,4} and {1,3}
        let mut m = DMatrix::zeros(5, 5);
        let entries = [(0, 0, 1.0), (2, 2, 2.5), (4, 4, -1.0), (0, 2, 0.4), (2, 4, 0.7), (1, 1, 0.3), (3, 3, 1.9), (1, 3, 0.5)];
        for &(i, j, v) in &entries {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        let blocks = components(&m);
        assert_eq!(blocks, vec![vec![0, 2, 4], vec![1, 3]]);
        let a = eigh_blocked(&m, &blocks);
        let b = eigh(&m);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(max_residual(&m, &a) < 1e-12);
        assert!(orthonormality_defect(&a.vectors) < 1e-12);
    }

    #[test]
    fn sign_convention() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -0.2, -0.2, 0.0]);
        let e = eigh(&m);
        for j in 0..2 {
            let c = e.vectors.column(j);
            let k = if c[0].abs() > c[1].abs() { 0 } else { 1 };
            assert!(c[k] > 0.0);
        }
    }
}
