use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// All eigenpairs of the symmetric-definite pencil `(a, b)`, ascending.
/// Eigenvectors are `b`-orthonormal columns.
pub fn generalized_eigh(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let chol = b.clone().cholesky().ok_or(Error::NotPositiveDefinite {
        pivot: 0,
        value: f64::NAN,
    })?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}
    let linv_a = l
        .solve_lower_triangular(a)
        .ok_or(Error::NotPositiveDefinite { pivot: 0, value: 0.0 })?;
    let c_t = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or(Error::NotPositiveDefinite { pivot: 0, value: 0.0 })?;
    let c = (&c_t + c_t.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let values: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut y = DMatrix::zeros(n, n);
    for (new, &old) in idx.iter().enumerate() {
        y.set_column(new, &eig.eigenvectors.column(old));
    }
    let v = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or(Error::NotPositiveDefinite { pivot: 0, value: 0.0 })?;
    Ok((values, v))
}

/// Orthonormalises the columns of `s` in the `b`-inner product given
/// `g = s^T b s`, dropping directions whose Gram eigenvalue falls below
/// `drop_tol` times the largest. Returns the coefficient matrix `c` such that
/// `s c` is `b`-orthonormal.
pub fn svqb(g: &DMatrix<f64>, drop_tol: f64) -> DMatrix<f64> {
    let m = g.nrows();
    if m == 0 {
        return DMatrix::zeros(0, 0);
    }
    let scale: Vec<f64> = (0..m)
        .map(|i| {
            let d = g[(i, i)];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let gs = DMatrix::from_fn(m, m, |i, j| g[(i, j)] * scale[i] * scale[j]);
    let gs = (&gs + gs.transpose()) * 0.5;
    let eig = SymmetricEigen::new(gs);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..m)
        .filter(|&i| eig.eigenvalues[i] > drop_tol * top && top > 0.0)
        .collect();
    let mut c = DMatrix::zeros(m, keep.len());
    for (col, &k) in keep.iter().enumerate() {
        let f = 1.0 / eig.eigenvalues[k].sqrt();
        for i in 0..m {
            c[(i, col)] = eig.eigenvectors[(i, k)] * f * scale[i];
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_pencil() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let b = DMatrix::identity(2, 2);
        let (vals, v) = generalized_eigh(&a, &b).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let g = v.transpose() * &b * &v;
        assert!((g - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn scaled_mass_divides_eigenvalues() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let b = DMatrix::identity(2, 2) * 4.0;
        let (vals, _) = generalized_eigh(&a, &b).unwrap();
        assert!((vals[0] - 0.25).abs() < 1e-14 && (vals[1] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn svqb_drops_dependent_column() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 1.0, 2.0, 0.0]);
        let g = s.transpose() * &s;
        let c = svqb(&g, 1e-12);
        assert_eq!(c.ncols(), 2);
        let q = &s * &c;
        assert!((q.transpose() * &q - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
