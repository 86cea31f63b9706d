//! Small dense/sparse matrix types used by the model.
//!
//! Transition matrices switch to a compressed-row layout when fewer than
//! [`SPARSE_DENSITY_THRESHOLD`] of their entries are nonzero; everything else
//! stays dense and row-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Matrices with a nonzero fraction below this are stored sparse.
pub const SPARSE_DENSITY_THRESHOLD: f64 = 0.05;

/// Tolerance for row sums of stochastic matrices.
pub const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidModel("ragged matrix rows".into()));
        }
        Ok(DenseMatrix { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidModel(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// Checks non-negativity and unit row sums.
    pub fn check_stochastic(&self, what: &str) -> Result<()> {
        for r in 0..self.rows {
            check_row(what, r, self.row(r).iter().copied())?;
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn check_row(what: &str, r: usize, entries: impl Iterator<Item = f64>) -> Result<()> {
    let mut sum = 0.0;
    for v in entries {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidModel(format!("{what}: row {r} has invalid entry {v}")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidModel(format!("{what}: row {r} sums to {sum}")));
    }
    Ok(())
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

/// A square row-stochastic matrix, dense or sparse.
#[derive(Debug, Clone)]
pub enum TransitionMatrix {
    Dense(DenseMatrix),
    Sparse(CsrMatrix),
}

/// Borrowed view of one matrix row.
#[derive(Debug, Clone, Copy)]
pub enum RowView<'a> {
    Dense(&'a [f64]),
    Sparse(&'a [u32], &'a [f64]),
}

impl<'a> RowView<'a> {
    /// Calls `f(col, value)` for every stored entry with a nonzero value.
    #[inline]
    pub fn for_each_nonzero(self, mut f: impl FnMut(usize, f64)) {
        match self {
            RowView::Dense(row) => {
                for (j, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        f(j, v);
                    }
                }
            }
            RowView::Sparse(cols, vals) => {
                for (&j, &v) in cols.iter().zip(vals) {
                    if v != 0.0 {
                        f(j as usize, v);
                    }
                }
            }
        }
    }

    #[inline]
    pub fn dot(self, x: &[f64]) -> f64 {
        match self {
            RowView::Dense(row) => row.iter().zip(x).map(|(a, b)| a * b).sum(),
            RowView::Sparse(cols, vals) => cols.iter().zip(vals).map(|(&j, v)| v * x[j as usize]).sum(),
        }
    }
}

impl TransitionMatrix {
    /// Builds from dense rows, picking the storage by density.
    pub fn from_dense(m: DenseMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::InvalidModel(format!(
                "transition matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        let nnz = m.data().iter().filter(|v| **v != 0.0).count();
        if n > 0 && (nnz as f64) < SPARSE_DENSITY_THRESHOLD * (n * n) as f64 {
            let triplets: Vec<(usize, usize, f64)> = (0..n)
                .flat_map(|i| m.row(i).iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(j, v)| (i, j, *v)))
                .collect();
            Ok(TransitionMatrix::Sparse(CsrMatrix::from_triplets(n, &triplets)?))
        } else {
            Ok(TransitionMatrix::Dense(m))
        }
    }

    /// Builds from (row, col, value) triplets; duplicate coordinates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let nnz = triplets.iter().filter(|t| t.2 != 0.0).count();
        if n > 0 && (nnz as f64) >= SPARSE_DENSITY_THRESHOLD * (n * n) as f64 {
            let mut m = DenseMatrix::zeros(n, n);
            for &(i, j, v) in triplets {
                if i >= n || j >= n {
                    return Err(Error::InvalidModel(format!("triplet ({i},{j}) out of bounds for n={n}")));
                }
                m.set(i, j, m.get(i, j) + v);
            }
            Ok(TransitionMatrix::Dense(m))
        } else {
            Ok(TransitionMatrix::Sparse(CsrMatrix::from_triplets(n, triplets)?))
        }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        TransitionMatrix::from_triplets(n, &t).expect("identity is valid")
    }

    pub fn n(&self) -> usize {
        match self {
            TransitionMatrix::Dense(m) => m.rows(),
            TransitionMatrix::Sparse(m) => m.n,
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, TransitionMatrix::Sparse(_))
    }

    #[inline]
    pub fn row(&self, i: usize) -> RowView<'_> {
        match self {
            TransitionMatrix::Dense(m) => RowView::Dense(m.row(i)),
            TransitionMatrix::Sparse(m) => {
                let (a, b) = (m.offsets[i], m.offsets[i + 1]);
                RowView::Sparse(&m.cols[a..b], &m.vals[a..b])
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.row(i) {
            RowView::Dense(r) => r[j],
            RowView::Sparse(cols, vals) => {
                cols.iter().position(|&c| c as usize == j).map_or(0.0, |p| vals[p])
            }
        }
    }

    pub fn nonzeros_in_row(&self, i: usize) -> usize {
        let mut c = 0;
        self.row(i).for_each_nonzero(|_, _| c += 1);
        c
    }

    /// Nonzero entries as (row, col, value), row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            self.row(i).for_each_nonzero(|j, v| out.push((i, j, v)));
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            TransitionMatrix::Dense(m) => m.clone(),
            TransitionMatrix::Sparse(_) => {
                let n = self.n();
                let mut m = DenseMatrix::zeros(n, n);
                for (i, j, v) in self.triplets() {
                    m.set(i, j, v);
                }
                m
            }
        }
    }

    pub fn check_stochastic(&self, what: &str) -> Result<()> {
        for i in 0..self.n() {
            let mut entries = Vec::new();
            match self.row(i) {
                RowView::Dense(r) => entries.extend_from_slice(r),
                RowView::Sparse(_, vals) => entries.extend_from_slice(vals),
            }
            check_row(what, i, entries.into_iter())?;
        }
        Ok(())
    }

    /// `y = P x` (expected next-step value under each current state).
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.row(i).dot(x)).collect()
    }

    pub fn max_abs_diff(&self, other: &TransitionMatrix) -> f64 {
        if self.n() != other.n() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n() {
            let mut a = std::collections::BTreeMap::new();
            self.row(i).for_each_nonzero(|j, v| {
                a.insert(j, v);
            });
            other.row(i).for_each_nonzero(|j, v| {
                *a.entry(j).or_insert(0.0) -= v;
            });
            worst = a.values().fold(worst, |w, d| w.max(d.abs()));
        }
        worst
    }
}

impl PartialEq for TransitionMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.max_abs_diff(other) == 0.0
    }
}

impl CsrMatrix {
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidModel(format!("triplet ({i},{j}) out of bounds for n={n}")));
            }
            if v == 0.0 {
                continue;
            }
            match rows[i].iter_mut().find(|e| e.0 as usize == j) {
                Some(e) => e.1 += v,
                None => rows[i].push((j as u32, v)),
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (j, v) in r {
                cols.push(j);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        Ok(CsrMatrix { n, offsets, cols, vals })
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
