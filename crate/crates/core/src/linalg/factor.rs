//! Envelope Cholesky factorisation with reverse Cuthill-McKee ordering.
//!
//! Used as the shifted-inverse preconditioner of the eigensolver. Proximity
//! graphs and structured FEM meshes both have a small profile once ordered by
//! RCM, so the row envelope holds the full fill of the factor.

use crate::error::{Error, Result};
use crate::sparse::SymCsr;
use std::collections::VecDeque;

/// Reverse Cuthill-McKee permutation of the sparsity graph of `m`.
/// Returns `perm` with `perm[new] = old`.
pub fn rcm_order(m: &SymCsr) -> Vec<usize> {
    let n = m.n();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, a) in m.upper() {
        if i != j && a != 0.0 {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    for a in adj.iter_mut() {
        a.sort_by_key(|&v| (deg[v], v));
    }

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by_key(|&v| (deg[v], v));

    for &seed in &seeds {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order.reverse();
    order
}

// BFS levels from `root`: (eccentricity, a farthest vertex of minimum degree).
fn bfs_far(root: usize, adj: &[Vec<usize>], dist: &mut [usize]) -> (usize, usize) {
    let mut queue = VecDeque::from([root]);
    let mut touched = vec![root];
    dist[root] = 0;
    let mut far = (0, root);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d > far.0 || (d == far.0 && adj[v].len() < adj[far.1].len()) {
            far = (d, v);
        }
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = d + 1;
                touched.push(w);
                queue.push_back(w);
            }
        }
    }
    for v in touched {
        dist[v] = usize::MAX;
    }
    far
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>]) -> usize {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut root = seed;
    let (mut ecc, mut far) = bfs_far(root, adj, &mut dist);
    for _ in 0..8 {
        let (e2, f2) = bfs_far(far, adj, &mut dist);
        if e2 <= ecc {
            break;
        }
        root = far;
        ecc = e2;
        far = f2;
    }
    root
}

/// `P M P^T = L L^T` stored row-wise over the envelope of the permuted matrix.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(m: &SymCsr) -> Result<Self> {
        let perm = rcm_order(m);
        Self::factor_with(m, perm)
    }

    pub fn factor_with(m: &SymCsr, perm: Vec<usize>) -> Result<Self> {
        let n = m.n();
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (i, j, a) in m.upper() {
            if a == 0.0 {
                continue;
            }
            let (pi, pj) = (inv[i], inv[j]);
            let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
            first[r] = first[r].min(c);
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for (i, j, a) in m.upper() {
            let (pi, pj) = (inv[i], inv[j]);
            let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
            data[start[r] + (c - first[r])] += a;
        }

        for i in 0..n {
            let fi = first[i];
            let (done, rest) = data.split_at_mut(start[i]);
            let row_i = &mut rest[..(i - fi + 1)];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let row_j = &done[start[j]..start[j] + (j - fj + 1)];
                let dot = dot(&row_i[(lo - fi)..(j - fi)], &row_j[(lo - fj)..(j - fj)]);
                let ljj = row_j[j - fj];
                row_i[j - fi] = (row_i[j - fi] - dot) / ljj;
            }
            let off = &row_i[..(i - fi)];
            let piv = row_i[i - fi] - dot(off, off);
            if !(piv > 0.0) || !piv.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: perm[i],
                    value: piv,
                });
            }
            row_i[i - fi] = piv.sqrt();
        }
        Ok(EnvelopeCholesky {
            n,
            perm,
            first,
            start,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    /// Solves `M x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let s = dot(&row[..(i - fi)], &y[fi..i]);
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let xi = y[i] / row[i - fi];
            y[i] = xi;
            for (yk, l) in y[fi..i].iter_mut().zip(&row[..(i - fi)]) {
                *yk -= l * xi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators so the loop vectorises
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_laplacian_plus_shift(nx: usize, shift: f64) -> SymCsr {
        let n = nx * nx;
        let mut t = Vec::new();
        for y in 0..nx {
            for x in 0..nx {
                let i = y * nx + x;
                t.push((i, i, shift));
                if x + 1 < nx {
                    let j = i + 1;
                    t.extend([(i, i, 1.0), (j, j, 1.0), (i, j, -1.0)]);
                }
                if y + 1 < nx {
                    let j = i + nx;
                    t.extend([(i, i, 1.0), (j, j, 1.0), (i, j, -1.0)]);
                }
            }
        }
        SymCsr::from_triplets(n, t).unwrap()
    }

    #[test]
    fn rcm_is_a_permutation() {
        let m = grid_laplacian_plus_shift(7, 0.1);
        let mut p = rcm_order(&m);
        p.sort();
        assert_eq!(p, (0..49).collect::<Vec<_>>());
    }

    #[test]
    fn solves_grid_system() {
        let m = grid_laplacian_plus_shift(12, 1e-3);
        let f = EnvelopeCholesky::factor(&m).unwrap();
        let x_true: Vec<f64> = (0..144).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut b = vec![0.0; 144];
        m.matvec(&x_true, &mut b);
        f.solve_in_place(&mut b);
        let err = b.iter().zip(&x_true).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn detects_indefinite() {
        let m = SymCsr::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 1.0), (0, 1, 2.0)]).unwrap();
        assert!(matches!(
            EnvelopeCholesky::factor(&m),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn handles_disconnected_pattern() {
        let m =
            SymCsr::from_triplets(4, vec![(0, 0, 2.0), (1, 1, 2.0), (0, 1, 1.0), (2, 2, 3.0), (3, 3, 4.0)]).unwrap();
        let f = EnvelopeCholesky::factor(&m).unwrap();
        let mut b = vec![3.0, 3.0, 3.0, 4.0];
        f.solve_in_place(&mut b);
        for (a, c) in b.iter().zip([1.0, 1.0, 1.0, 1.0]) {
            assert!((a - c).abs() < 1e-14);
        }
    }
}
