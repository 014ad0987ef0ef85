//! Symmetric sparse storage.
//!
//! Two shapes are needed. [`SymCsr`] is a general symmetric matrix stored as
//! its upper triangle (diagonal included) in compressed rows. [`Laplacian`]
//! holds only the strictly-upper edge weights `w_ij` of an operator of the form
//! `(A v)_i = sum_j w_ij (v_i - v_j)`; its diagonal is implied, so `A 1 = 0`
//! holds exactly in floating point and products are formed from differences.

use crate::error::{Error, Result};

/// Symmetric matrix, upper triangle in CSR order with sorted columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SymCsr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

fn compress(n: usize, mut trips: Vec<(usize, usize, f64)>, strict: bool) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    for t in trips.iter_mut() {
        if t.0 > t.1 {
            std::mem::swap(&mut t.0, &mut t.1);
        }
    }
    trips.retain(|t| !(strict && t.0 == t.1));
    trips.sort_by_key(|a| (a.0, a.1));
    let mut row_ptr = vec![0usize; n + 1];
    let mut cols = Vec::with_capacity(trips.len());
    let mut vals: Vec<f64> = Vec::with_capacity(trips.len());
    let mut last: Option<(usize, usize)> = None;
    for (i, j, v) in trips {
        if last == Some((i, j)) {
            *vals.last_mut().unwrap() += v;
        } else {
            cols.push(j);
            vals.push(v);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
    }
    for i in 0..n {
        row_ptr[i + 1] += row_ptr[i];
    }
    (row_ptr, cols, vals)
}

impl SymCsr {
    /// Builds from `(i, j, value)` triplets; `(i, j)` and `(j, i)` address the
    /// same entry and duplicates are summed.
    pub fn from_triplets(n: usize, trips: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(t) = trips.iter().find(|t| t.0 >= n || t.1 >= n) {
            return Err(Error::Parameter(format!("entry ({}, {}) outside {n} x {n}", t.0, t.1)));
        }
        let (row_ptr, cols, vals) = compress(n, trips, false);
        Ok(SymCsr { n, row_ptr, cols, vals })
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        SymCsr {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: diag.to_vec(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz_upper(&self) -> usize {
        self.vals.len()
    }

    /// Iterates the stored upper-triangle entries `(i, j, a_ij)` with `i <= j`.
    pub fn upper(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n)
            .flat_map(move |i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.cols[k], self.vals[k])))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.vals[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.upper().all(|(i, j, _)| i == j)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let xi = x[i];
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let a = self.vals[k];
                if j == i {
                    acc += a * xi;
                } else {
                    acc += a * x[j];
                    y[j] += a * xi;
                }
            }
            y[i] += acc;
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.upper()
            .map(|(i, j, a)| if i == j { a * x[i] * x[i] } else { 2.0 * a * x[i] * x[j] })
            .sum()
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0; self.n];
        for (i, j, a) in self.upper() {
            rows[i] += a.abs();
            if i != j {
                rows[j] += a.abs();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (i, j, a) in self.upper() {
            m[i][j] = a;
            m[j][i] = a;
        }
        m
    }
}

/// Weighted-Laplacian operator `A = D - W` stored by its edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
}

impl Laplacian {
    /// Builds from edge triplets; self loops are dropped, `(i, j)` and `(j, i)`
    /// are the same edge and duplicates are summed.
    pub fn from_edges(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(t) = edges.iter().find(|t| t.0 >= n || t.1 >= n) {
            return Err(Error::Parameter(format!(
                "edge ({}, {}) outside {n} vertices",
                t.0, t.1
            )));
        }
        let (row_ptr, cols, weights) = compress(n, edges, true);
        Ok(Laplacian {
            n,
            row_ptr,
            cols,
            weights,
        })
    }

    pub(crate) fn from_parts(n: usize, row_ptr: Vec<usize>, cols: Vec<usize>, weights: Vec<f64>) -> Self {
        Laplacian {
            n,
            row_ptr,
            cols,
            weights,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.weights.len()
    }

    /// Edges `(i, j, w_ij)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n)
            .flat_map(move |i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.cols[k], self.weights[k])))
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.weights[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    /// Weighted degrees `d_i = sum_j w_ij`.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for (i, j, w) in self.edges() {
            d[i] += w;
            d[j] += w;
        }
        d
    }

    /// `y = A x` accumulated edge by edge from the differences `x_i - x_j`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let xi = x[i];
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let t = self.weights[k] * (xi - x[j]);
                acc += t;
                y[j] -= t;
            }
            y[i] += acc;
        }
    }

    /// `x^T A x = sum_{i<j} w_ij (x_i - x_j)^2`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.edges().map(|(i, j, w)| w * (x[i] - x[j]).powi(2)).sum()
    }

    /// Max absolute row sum of `D - W` (equals `2 max_i sum_j |w_ij|` for
    /// nonnegative weights).
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0; self.n];
        for (i, j, w) in self.edges() {
            rows[i] += 2.0 * w.abs();
            rows[j] += 2.0 * w.abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Assembled symmetric matrix `D - W` (upper triangle).
    pub fn to_sym(&self) -> SymCsr {
        let d = self.degrees();
        let mut trips: Vec<(usize, usize, f64)> = self.edges().map(|(i, j, w)| (i, j, -w)).collect();
        trips.extend(d.iter().enumerate().map(|(i, &v)| (i, i, v)));
        SymCsr::from_triplets(self.n, trips).expect("indices in range")
    }

    /// Connected components over edges with nonzero weight.
    pub fn components(&self) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (i, j, w) in self.edges() {
            if w != 0.0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        (0..self.n)
            .map(|i| {
                let r = find(&mut parent, i);
                if label[r] == usize::MAX {
                    label[r] = next;
                    next += 1;
                }
                label[r]
            })
            .collect()
    }
}
