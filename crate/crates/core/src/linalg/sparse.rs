//! Sparse symmetric positive definite matrices and a cached Cholesky factor.
//!
//! The factorization permutes the matrix with a minimum-degree ordering,
//! builds the elimination tree and computes `L` one row at a time
//! (up-looking). Solves reuse the factor without touching the numeric values
//! again.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Compressed-column storage of a symmetric matrix with both triangles
/// present.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Each off-diagonal triplet `(i, j, v)` sets both `(i, j)` and `(j, i)`;
    /// repeated coordinates are summed.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut cols: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n}x{n}");
            *cols[j].entry(i).or_default() += v;
            if i != j {
                *cols[i].entry(j).or_default() += v;
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for col in cols {
            for (r, v) in col {
                row_idx.push(r);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        SparseSym {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.column(j)
            .find(|&(r, _)| r == i)
            .map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for (j, &xj) in x.iter().enumerate() {
            for (i, v) in self.column(j) {
                y[i] += v * xj;
            }
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for j in 0..self.n {
            for (i, v) in self.column(j) {
                d[i][j] = v;
            }
        }
        d
    }
}

/// Cholesky factor `P A P^T = L L^T`.
#[derive(Debug, Clone)]
pub struct SparseFactorization {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// Column `j` holds `(j, L_jj)` first, then sub-diagonal entries in
    /// increasing row order.
    columns: Vec<Vec<(usize, f64)>>,
}

impl SparseFactorization {
    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn factor_nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }
}

pub fn factorize_spd(a: &SparseSym) -> Result<SparseFactorization> {
    let n = a.n;
    if a.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericInput);
    }
    let perm = minimum_degree(a);
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }

    // Upper triangle of C = P A P^T, by column.
    let mut upper: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for old_j in 0..n {
        let j = inv[old_j];
        for (old_i, v) in a.column(old_j) {
            let i = inv[old_i];
            if i <= j {
                upper[j].push((i, v));
            }
        }
    }

    let parent = etree(&upper);
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut x = vec![0.0; n];
    let mut mark = vec![usize::MAX; n];
    let mut stack = Vec::with_capacity(n);
    let mut pattern = Vec::with_capacity(n);

    for k in 0..n {
        // Nonzero pattern of row k of L, in topological order.
        pattern.clear();
        mark[k] = k;
        let mut diag = 0.0;
        for &(i, v) in &upper[k] {
            x[i] += v;
            if i == k {
                diag += v;
                continue;
            }
            let mut node = i;
            stack.clear();
            while mark[node] != k {
                stack.push(node);
                mark[node] = k;
                node = parent[node].expect("row entry must reach k in the elimination tree");
            }
            pattern.extend(stack.drain(..).rev());
        }
        // The reversed per-entry paths, visited last-first, are topological.
        let mut d = diag;
        x[k] = 0.0;
        for &i in pattern.iter().rev() {
            let col = &columns[i];
            let lki = x[i] / col[0].1;
            x[i] = 0.0;
            for &(r, lri) in &col[1..] {
                x[r] -= lri * lki;
            }
            d -= lki * lki;
            columns[i].push((k, lki));
        }
        if !(d > 1e-14 * diag.abs().max(1.0)) {
            return Err(Error::NotSpd {
                column: perm[k],
                pivot: d,
            });
        }
        columns[k].push((k, d.sqrt()));
    }
    Ok(SparseFactorization { perm, columns })
}

pub fn solve(f: &SparseFactorization, b: &[f64]) -> Result<Vec<f64>> {
    let n = f.n();
    if b.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: b.len(),
        });
    }
    let mut x: Vec<f64> = f.perm.iter().map(|&old| b[old]).collect();
    for j in 0..n {
        let col = &f.columns[j];
        x[j] /= col[0].1;
        let xj = x[j];
        for &(r, v) in &col[1..] {
            x[r] -= v * xj;
        }
    }
    for j in (0..n).rev() {
        let col = &f.columns[j];
        let mut s = x[j];
        for &(r, v) in &col[1..] {
            s -= v * x[r];
        }
        x[j] = s / col[0].1;
    }
    let mut out = vec![0.0; n];
    for (new, &old) in f.perm.iter().enumerate() {
        out[old] = x[new];
    }
    Ok(out)
}

fn etree(upper: &[Vec<(usize, f64)>]) -> Vec<Option<usize>> {
    let n = upper.len();
    let mut parent = vec![None; n];
    let mut ancestor: Vec<Option<usize>> = vec![None; n];
    for (k, col) in upper.iter().enumerate() {
        for &(row, _) in col {
            let mut i = Some(row);
            while let Some(node) = i.filter(|&node| node < k) {
                let next = ancestor[node];
                ancestor[node] = Some(k);
                if next.is_none() {
                    parent[node] = Some(k);
                }
                i = next;
            }
        }
    }
    parent
}

/// Greedy minimum-degree ordering on the explicit elimination graph, with
/// rows kept as bitsets. Ties go to the smallest index.
fn minimum_degree(a: &SparseSym) -> Vec<usize> {
    let n = a.n;
    let words = n.div_ceil(64);
    let mut adj = vec![vec![0u64; words]; n];
    for j in 0..n {
        for (i, _) in a.column(j) {
            if i != j {
                adj[i][j / 64] |= 1 << (j % 64);
            }
        }
    }
    let mut degree: Vec<u32> = adj
        .iter()
        .map(|r| r.iter().map(|w| w.count_ones()).sum())
        .collect();
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&i| alive[i])
            .min_by_key(|&i| (degree[i], i))
            .expect("a live vertex remains");
        alive[v] = false;
        order.push(v);
        let row_v = std::mem::take(&mut adj[v]);
        let neighbors: Vec<usize> = (0..n)
            .filter(|&u| row_v[u / 64] >> (u % 64) & 1 == 1)
            .collect();
        for &u in &neighbors {
            let row_u = &mut adj[u];
            for (w, rv) in row_u.iter_mut().zip(&row_v) {
                *w |= rv;
            }
            row_u[u / 64] &= !(1 << (u % 64));
            row_u[v / 64] &= !(1 << (v % 64));
            degree[u] = row_u.iter().map(|w| w.count_ones()).sum();
        }
        adj[v] = vec![0; words];
    }
    order
}
