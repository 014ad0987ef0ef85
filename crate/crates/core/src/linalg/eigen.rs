//! Lowest eigenpairs of the pencil `(A, B)` with `A` a weighted Laplacian
//! (positive semidefinite, constants in the kernel) and `B` symmetric positive
//! definite.
//!
//! The constant vector is an exact eigenvector with eigenvalue zero and is
//! deflated explicitly. Small problems go through a dense Cholesky-reduced
//! solve; larger ones through LOBPCG preconditioned by an exact envelope
//! Cholesky factor of `A + mu B`. Ritz values are always recomputed from the
//! edge-difference quadratic form, which keeps small eigenvalues accurate to
//! working precision relative to themselves.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dense::{generalized_eigh, svqb};
use super::factor::EnvelopeCholesky;
use crate::error::{Error, Result};
use crate::sparse::{Laplacian, SymCsr};

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Target relative residual `|Av - sBv| / (|Av| + s|Bv|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Problems with at most this many unknowns are solved densely.
    pub dense_threshold: usize,
    /// Shift of the preconditioner relative to the mean of `A_ii / B_ii`.
    pub shift_rel: f64,
    /// Extra block columns carried beyond the wanted pairs.
    pub guard: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-8,
            max_iter: 400,
            dense_threshold: 800,
            shift_rel: 1e-3,
            guard: 4,
            seed: 0x005e_ed0f_e16e,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// `B`-orthonormal eigenvectors, one `Vec` per pair.
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Relative residual of a single pair.
pub fn relative_residual(a: &Laplacian, b: &SymCsr, sigma: f64, v: &[f64]) -> f64 {
    let n = v.len();
    let (mut av, mut bv) = (vec![0.0; n], vec![0.0; n]);
    a.matvec(v, &mut av);
    b.matvec(v, &mut bv);
    pair_residual(&av, &bv, sigma)
}

fn pair_residual(av: &[f64], bv: &[f64], sigma: f64) -> f64 {
    let r = av
        .iter()
        .zip(bv)
        .map(|(x, y)| (x - sigma * y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = norm(av);
    let nb = norm(bv);
    r / (na + sigma.abs() * nb + f64::MIN_POSITIVE)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `B`-normalised constant vector.
pub fn constant_mode(b: &SymCsr) -> Vec<f64> {
    let n = b.n();
    let ones = vec![1.0; n];
    let m = b.quad_form(&ones);
    vec![1.0 / m.sqrt(); n]
}

fn check(a: &Laplacian, b: &SymCsr, k: usize) -> Result<()> {
    let n = a.n();
    if b.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.n(),
        });
    }
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!(
            "need 1 <= k <= n - 1, got k = {k} with n = {n}"
        )));
    }
    Ok(())
}

/// Dense path when `n <= dense_threshold`, LOBPCG otherwise.
pub fn lowest_pairs(a: &Laplacian, b: &SymCsr, k: usize, opts: &EigenOptions) -> Result<EigenPairs> {
    check(a, b, k)?;
    if a.n() <= opts.dense_threshold {
        dense_lowest(a, b, k)
    } else {
        lobpcg_lowest(a, b, k, opts)
    }
}

pub fn dense_lowest(a: &Laplacian, b: &SymCsr, k: usize) -> Result<EigenPairs> {
    check(a, b, k)?;
    let n = a.n();
    let am = a.to_sym().to_dense();
    let bm = b.to_dense();
    let ad = DMatrix::from_fn(n, n, |i, j| am[i][j]);
    let bd = DMatrix::from_fn(n, n, |i, j| bm[i][j]);
    let (vals, v) = generalized_eigh(&ad, &bd)?;
    let mut vectors: Vec<Vec<f64>> = (0..n).map(|j| v.column(j).iter().cloned().collect()).collect();

    // Rotate the numerical null space so that its first vector is exactly the
    // constant mode (matters for disconnected graphs).
    let scale = vals[n - 1].abs().max(f64::MIN_POSITIVE);
    let nz = vals.iter().take_while(|&&s| s.abs() <= 1e-10 * scale).count().max(1);
    let y = constant_mode(b);
    let mut null_space = vec![y.clone()];
    if nz > 1 {
        let mut rest: Vec<Vec<f64>> = vectors[..nz].to_vec();
        b_orthogonalize_against(b, &mut rest, std::slice::from_ref(&y));
        let kept = b_orthonormalize(b, rest, 1e-10);
        null_space.extend(kept.into_iter().take(nz - 1));
    }
    vectors.splice(0..nz, null_space);

    finish(a, b, vectors.into_iter().take(k).collect(), 0)
}

fn b_orthogonalize_against(b: &SymCsr, vs: &mut [Vec<f64>], basis: &[Vec<f64>]) {
    let n = b.n();
    let mut bq = vec![0.0; n];
    for q in basis {
        b.matvec(q, &mut bq);
        for v in vs.iter_mut() {
            let c: f64 = v.iter().zip(&bq).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn b_orthonormalize(b: &SymCsr, vs: Vec<Vec<f64>>, drop_tol: f64) -> Vec<Vec<f64>> {
    let n = b.n();
    let m = vs.len();
    let s = DMatrix::from_fn(n, m, |i, j| vs[j][i]);
    let mut bs = DMatrix::zeros(n, m);
    for j in 0..m {
        let mut out = vec![0.0; n];
        b.matvec(&vs[j], &mut out);
        bs.set_column(j, &nalgebra::DVector::from_vec(out));
    }
    let g = s.transpose() * &bs;
    let c = svqb(&g, drop_tol);
    let q = s * c;
    (0..q.ncols()).map(|j| q.column(j).iter().cloned().collect()).collect()
}

// Sort by Rayleigh quotient, compute residuals.
fn finish(a: &Laplacian, b: &SymCsr, vectors: Vec<Vec<f64>>, iterations: usize) -> Result<EigenPairs> {
    let n = a.n();
    let mut pairs: Vec<(f64, Vec<f64>, f64)> = vectors
        .into_par_iter()
        .map(|v| {
            let num = a.quad_form(&v);
            let den = b.quad_form(&v);
            let s = num / den;
            let scale = 1.0 / den.sqrt();
            let v: Vec<f64> = v.iter().map(|x| x * scale).collect();
            let (mut av, mut bv) = (vec![0.0; n], vec![0.0; n]);
            a.matvec(&v, &mut av);
            b.matvec(&v, &mut bv);
            let r = pair_residual(&av, &bv, s);
            (s, v, r)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(EigenPairs {
        values: pairs.iter().map(|p| p.0).collect(),
        residuals: pairs.iter().map(|p| p.2).collect(),
        vectors: pairs.into_iter().map(|p| p.1).collect(),
        iterations,
    })
}

struct Block {
    x: DMatrix<f64>,
    ax: DMatrix<f64>,
    bx: DMatrix<f64>,
}

fn apply_cols(m: &DMatrix<f64>, f: impl Fn(&[f64], &mut [f64]) + Sync) -> DMatrix<f64> {
    let n = m.nrows();
    let cols: Vec<Vec<f64>> = (0..m.ncols())
        .into_par_iter()
        .map(|j| {
            let mut out = vec![0.0; n];
            f(&m.as_slice()[j * n..(j + 1) * n], &mut out);
            out
        })
        .collect();
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

fn block(a: &Laplacian, b: &SymCsr, x: DMatrix<f64>) -> Block {
    let ax = apply_cols(&x, |v, o| a.matvec(v, o));
    let bx = apply_cols(&x, |v, o| b.matvec(v, o));
    Block { x, ax, bx }
}

fn hcat(parts: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = parts[0].nrows();
    let m: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(n, m);
    let mut c = 0;
    for p in parts {
        out.columns_mut(c, p.ncols()).copy_from(*p);
        c += p.ncols();
    }
    out
}

// Removes from `s` its B-components along the B-orthonormal columns of `q`.
fn project_out(s: &mut DMatrix<f64>, q: &DMatrix<f64>, bq: &DMatrix<f64>) {
    if q.ncols() == 0 || s.ncols() == 0 {
        return;
    }
    let c = bq.transpose() * &*s;
    *s -= q * c;
}

/// LOBPCG on the complement of the constant mode.
pub fn lobpcg_lowest(a: &Laplacian, b: &SymCsr, k: usize, opts: &EigenOptions) -> Result<EigenPairs> {
    check(a, b, k)?;
    let n = a.n();
    let y = constant_mode(b);
    if k == 1 {
        return finish(a, b, vec![y], 0);
    }
    let want = k - 1;
    let m = (want + opts.guard).min(n - 1);
    if 3 * m >= n {
        return dense_lowest(a, b, k);
    }

    let a_sym = a.to_sym();
    let a_diag = a_sym.diag();
    let b_diag = b.diag();
    let mean_ratio = a_diag.iter().zip(&b_diag).map(|(x, y)| x / y).sum::<f64>() / n as f64;
    let mut mu = opts.shift_rel * mean_ratio.max(f64::MIN_POSITIVE);
    let factor_at = |mu: f64| -> Result<EnvelopeCholesky> {
        let shifted: Vec<(usize, usize, f64)> =
            a_sym.upper().chain(b.upper().map(|(i, j, v)| (i, j, mu * v))).collect();
        EnvelopeCholesky::factor(&SymCsr::from_triplets(n, shifted)?)
    };
    let mut precond = factor_at(mu)?;

    let ymat = DMatrix::from_column_slice(n, 1, &y);
    let mut by = vec![0.0; n];
    b.matvec(&y, &mut by);
    let bymat = DMatrix::from_column_slice(n, 1, &by);

    let a_norm = a.norm_inf();
    let b_norm = b.norm_inf();

    // Start from one preconditioned step on a random block.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x0 = DMatrix::from_fn(n, m, |_, _| rng.random::<f64>() - 0.5);
    x0 = apply_cols(&x0, |v, o| {
        o.copy_from_slice(v);
        precond.solve_in_place(o);
    });
    project_out(&mut x0, &ymat, &bymat);
    project_out(&mut x0, &ymat, &bymat);
    let bx0 = apply_cols(&x0, |v, o| b.matvec(v, o));
    let c0 = svqb(&(x0.transpose() * &bx0), 1e-14);
    let mut cur = block(a, b, x0 * c0);
    if cur.x.ncols() < m {
        return Err(Error::Parameter("could not build an initial block".into()));
    }

    // Initial Rayleigh-Ritz.
    {
        let h = cur.x.transpose() * &cur.ax;
        let g = cur.x.transpose() * &cur.bx;
        let (_, c) = generalized_eigh(&sym(&h), &sym(&g))?;
        cur = Block {
            x: &cur.x * &c,
            ax: &cur.ax * &c,
            bx: &cur.bx * &c,
        };
    }

    let mut p: Option<Block> = None;
    let mut theta = vec![0.0; m];
    let mut last_res = vec![f64::INFINITY; m];
    for it in 0..opts.max_iter {
        for j in 0..m {
            let xj = cur.x.column(j);
            theta[j] = a.quad_form(xj.as_slice()) / b.quad_form(xj.as_slice());
        }
        // Keep the shift well below the wanted end of the spectrum; a shift
        // set from the mean diagonal can sit far above it for strongly
        // varying weights.
        if it % ADAPT_EVERY == 0 && theta[0] > 0.0 && mu > SHIFT_CEILING * theta[0] {
            mu = SHIFT_TARGET * theta[0];
            precond = factor_at(mu)?;
        }
        let mut r = cur.ax.clone();
        for j in 0..m {
            let mut col = r.column_mut(j);
            col.axpy(-theta[j], &cur.bx.column(j), 1.0);
        }
        let mut active = Vec::new();
        let mut all_done = true;
        for j in 0..m {
            let rn = r.column(j).norm();
            let rel = rn / (cur.ax.column(j).norm() + theta[j].abs() * cur.bx.column(j).norm() + f64::MIN_POSITIVE);
            let backward = rn / ((a_norm + theta[j].abs() * b_norm) * cur.x.column(j).norm() + f64::MIN_POSITIVE);
            last_res[j] = rel;
            let done = rel <= opts.tol || backward <= BACKWARD_FLOOR;
            if !done {
                active.push(j);
                if j < want {
                    all_done = false;
                }
            }
        }
        if all_done {
            let vectors = std::iter::once(y.clone())
                .chain((0..want).map(|j| cur.x.column(j).iter().cloned().collect()))
                .collect();
            return finish(a, b, vectors, it);
        }

        let ra = DMatrix::from_fn(n, active.len(), |i, c| r[(i, active[c])]);
        let mut w = apply_cols(&ra, |v, o| {
            o.copy_from_slice(v);
            precond.solve_in_place(o);
        });
        let mut s = match &p {
            Some(pb) => hcat(&[&w, &pb.x]),
            None => std::mem::replace(&mut w, DMatrix::zeros(0, 0)),
        };
        for _ in 0..2 {
            project_out(&mut s, &ymat, &bymat);
            project_out(&mut s, &cur.x, &cur.bx);
        }
        let bs = apply_cols(&s, |v, o| b.matvec(v, o));
        let cs = svqb(&(s.transpose() * &bs), 1e-12);
        let sblk = block(a, b, &s * &cs);
        let ns = sblk.x.ncols();

        let q = hcat(&[&cur.x, &sblk.x]);
        let aq = hcat(&[&cur.ax, &sblk.ax]);
        let bq = hcat(&[&cur.bx, &sblk.bx]);
        let h = q.transpose() * &aq;
        let g = q.transpose() * &bq;
        let (_, c) = match generalized_eigh(&sym(&h), &sym(&g)) {
            Ok(v) => v,
            Err(_) => {
                // Basis lost definiteness; restart without the search directions.
                p = None;
                continue;
            }
        };
        let c = c.columns(0, m).into_owned();
        let cs_part = c.rows(m, ns).into_owned();
        p = if ns > 0 {
            Some(Block {
                x: &sblk.x * &cs_part,
                ax: &sblk.ax * &cs_part,
                bx: &sblk.bx * &cs_part,
            })
        } else {
            None
        };
        cur = Block {
            x: &q * &c,
            ax: &aq * &c,
            bx: &bq * &c,
        };
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        worst_residual: last_res[..want].iter().cloned().fold(0.0, f64::max),
        residuals: last_res[..want].to_vec(),
    })
}

/// Normwise backward error accepted as converged when the relative residual
/// target lies below what double precision can resolve for tiny eigenvalues.
pub const BACKWARD_FLOOR: f64 = 1e-13;

const ADAPT_EVERY: usize = 10;
const SHIFT_CEILING: f64 = 0.05;
const SHIFT_TARGET: f64 = 0.01;

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}
