//! The `(p, q, r)` graph Laplacian, reduced to the symmetric pencil
//! `(D - W) v = sigma D^{(p+r-1)/(q-1)} v` with `u = D^{r/(q-1)} v`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{KernelSpec, WeightedGraph};
use crate::linalg::eigen::{lowest_pairs, EigenOptions};
use crate::sparse::{Laplacian, SymCsr};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PQRParams {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl PQRParams {
    pub fn new(p: f64, q: f64, r: f64) -> Result<Self> {
        let s = PQRParams { p, q, r };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.q.is_finite() && self.r.is_finite()) {
            return Err(Error::Parameter(format!("non-finite parameters {self:?}")));
        }
        Ok(())
    }

    pub fn is_q_one(&self) -> bool {
        self.q == 1.0
    }

    /// `q > 0` and `p + r > 0`; recorded, never enforced.
    pub fn theory_valid(&self) -> bool {
        self.q > 0.0 && self.p + self.r > 0.0
    }

    pub fn is_balanced(&self) -> bool {
        (self.q - self.p - self.r).abs() < 1e-12
    }

    /// Exponent of `D` in the mass matrix, zero when `q = 1`.
    pub fn mass_exponent(&self) -> f64 {
        if self.is_q_one() {
            0.0
        } else {
            (self.p + self.r - 1.0) / (self.q - 1.0)
        }
    }

    /// Exponent of `D` recovering `u` from `v`, zero when `q = 1`.
    pub fn recover_exponent(&self) -> f64 {
        if self.is_q_one() {
            0.0
        } else {
            self.r / (self.q - 1.0)
        }
    }
}

#[derive(Debug, Clone)]
pub struct LaplacianSystem {
    pub a: Laplacian,
    pub b: SymCsr,
    pub recover_exponent: f64,
    /// `d_i^{recover_exponent}`.
    pub recover_factors: Vec<f64>,
    pub params: PQRParams,
    pub n: usize,
}

pub fn assemble(graph: &WeightedGraph, params: &PQRParams) -> Result<LaplacianSystem> {
    params.validate()?;
    if graph.q != params.q {
        return Err(Error::Config(format!(
            "graph was reweighted with q = {} but the Laplacian uses q = {}",
            graph.q, params.q
        )));
    }
    if let Some(v) = graph.degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Parameter(format!("degree of vertex {v} is not positive")));
    }
    let me = params.mass_exponent();
    let b = if me == 0.0 {
        SymCsr::identity(graph.n)
    } else {
        SymCsr::diagonal(&graph.degrees.iter().map(|d| d.powf(me)).collect::<Vec<_>>())
    };
    let re = params.recover_exponent();
    let recover_factors = graph
        .degrees
        .iter()
        .map(|d| if re == 0.0 { 1.0 } else { d.powf(re) })
        .collect();
    Ok(LaplacianSystem {
        a: graph.weights.clone(),
        b,
        recover_exponent: re,
        recover_factors,
        params: *params,
        n: graph.n,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub vectors_v: Vec<Vec<f64>>,
    #[serde(skip)]
    pub vectors_u: Vec<Vec<f64>>,
    pub k: usize,
    pub scale_applied: Option<f64>,
    pub residuals: Vec<f64>,
}

impl Spectrum {
    /// Copy with eigenvalues multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Spectrum {
        let mut s = self.clone();
        s.eigenvalues.iter_mut().for_each(|x| *x *= factor);
        s.scale_applied = Some(factor * self.scale_applied.unwrap_or(1.0));
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "index,sigma,residual")?;
        for (i, (s, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            writeln!(f, "{},{:.16e},{:.16e}", i + 1, s, r)?;
        }
        f.flush()?;
        Ok(())
    }
}

/// The `k` smallest pairs of the system, including the zero ground state.
pub fn solve_lowest(system: &LaplacianSystem, k: usize, opts: &EigenOptions) -> Result<Spectrum> {
    if !(opts.tol > 0.0) {
        return Err(Error::Parameter(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let pairs = lowest_pairs(&system.a, &system.b, k, opts)?;
    let vectors_u = pairs
        .vectors
        .iter()
        .map(|v| v.iter().zip(&system.recover_factors).map(|(x, f)| x * f).collect())
        .collect();
    Ok(Spectrum {
        eigenvalues: pairs.values,
        vectors_v: pairs.vectors,
        vectors_u,
        k,
        scale_applied: None,
        residuals: pairs.residuals,
    })
}

/// `2 s0^{p+r-q+1} / (delta^2 N^{q-p-r} s2)`.
pub fn continuum_scale(params: &PQRParams, kernel: &KernelSpec, n: usize, delta: f64) -> f64 {
    let PQRParams { p, q, r } = *params;
    2.0 * kernel.s0.powf(p + r - q + 1.0) / (delta * delta * (n as f64).powf(q - p - r) * kernel.s2)
}

/// Largest `|sigma1_j - sigma2_j| / (1 + sigma1_j)` over the first `k` pairs
/// of two parameter sets sharing `q` and `p + r`.
pub fn verify_pqr_invariance(
    graph: &WeightedGraph,
    first: &PQRParams,
    second: &PQRParams,
    k: usize,
    opts: &EigenOptions,
) -> Result<f64> {
    if first.q != second.q || first.q != graph.q {
        return Err(Error::Parameter(format!(
            "invariance needs equal q: graph {}, got {} and {}",
            graph.q, first.q, second.q
        )));
    }
    if ((first.p + first.r) - (second.p + second.r)).abs() > 1e-12 {
        return Err(Error::Parameter(format!(
            "invariance needs equal p + r, got {} and {}",
            first.p + first.r,
            second.p + second.r
        )));
    }
    let s1 = solve_lowest(&assemble(graph, first)?, k, opts)?;
    let s2 = solve_lowest(&assemble(graph, second)?, k, opts)?;
    Ok(s1
        .eigenvalues
        .iter()
        .zip(&s2.eigenvalues)
        .map(|(a, b)| (a - b).abs() / (1.0 + a.abs()))
        .fold(0.0, f64::max))
}

/// `v^T A v / v^T B v`, with the numerator from edge differences.
pub fn rayleigh_quotient(system: &LaplacianSystem, v: &[f64]) -> Result<f64> {
    if v.len() != system.n {
        return Err(Error::DimensionMismatch {
            expected: system.n,
            got: v.len(),
        });
    }
    let den = system.b.quad_form(v);
    if !(den > 0.0) {
        return Err(Error::Parameter("vector has zero B-norm".into()));
    }
    Ok(system.a.quad_form(v) / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{reweight, RawGraph};

    fn graph_from(n: usize, edges: Vec<(usize, usize, f64)>, q: f64) -> WeightedGraph {
        let w = Laplacian::from_edges(n, edges).unwrap();
        let d = w.degrees();
        reweight(&RawGraph { weights: w, degrees: d }, q).unwrap()
    }

    /// Graph whose reweighted weights are exactly `edges`.
    fn direct(n: usize, edges: Vec<(usize, usize, f64)>, q: f64) -> WeightedGraph {
        let w = Laplacian::from_edges(n, edges).unwrap();
        let d = w.degrees();
        WeightedGraph {
            n,
            raw_weights: w.clone(),
            raw_degrees: d.clone(),
            q,
            weights: w,
            degrees: d,
        }
    }

    #[test]
    fn q_one_has_identity_mass() {
        let g = graph_from(3, vec![(0, 1, 1.0), (1, 2, 1.0)], 1.0);
        let s = assemble(&g, &PQRParams::new(0.3, 1.0, 0.9).unwrap()).unwrap();
        assert!(s.b.is_diagonal());
        assert!(s.b.diag().iter().all(|&x| x == 1.0));
        assert_eq!(s.recover_exponent, 0.0);
    }

    #[test]
    fn two_vertex_closed_form() {
        let w = 0.7;
        let g = graph_from(2, vec![(0, 1, w)], 2.0);
        let s = assemble(&g, &PQRParams::new(1.0, 2.0, 0.0).unwrap()).unwrap();
        assert_eq!(s.recover_exponent, 0.0);
        let sp = solve_lowest(&s, 1, &EigenOptions::default()).unwrap();
        assert_eq!(sp.eigenvalues[0], 0.0);
        let all = crate::linalg::eigen::dense_lowest(&s.a, &s.b, 1).unwrap();
        assert_eq!(all.values.len(), 1);
        let two = solve_lowest(&s, 1, &EigenOptions::default()).unwrap();
        assert!(two.eigenvalues[0].abs() < 1e-15);
        // only k <= n - 1 is allowed, so check sigma_2 via the Rayleigh quotient
        assert!((rayleigh_quotient(&s, &[1.0, -1.0]).unwrap() - 2.0 * w).abs() < 1e-15);
    }

    #[test]
    fn path3_and_complete4() {
        let g = direct(3, vec![(0, 1, 1.0), (1, 2, 1.0)], 1.0);
        let s = assemble(&g, &PQRParams::new(1.0, 1.0, 1.0).unwrap()).unwrap();
        let sp = solve_lowest(&s, 2, &EigenOptions::default()).unwrap();
        assert!(
            sp.eigenvalues[0].abs() < 1e-14 && (sp.eigenvalues[1] - 1.0).abs() < 1e-13,
            "{:?}",
            sp.eigenvalues
        );

        let mut e = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                e.push((i, j, 1.0));
            }
        }
        let g = graph_from(4, e, 2.0);
        let s = assemble(&g, &PQRParams::new(1.0, 2.0, 0.0).unwrap()).unwrap();
        let sp = solve_lowest(&s, 3, &EigenOptions::default()).unwrap();
        assert!((sp.eigenvalues[1] - 4.0).abs() < 1e-13 && (sp.eigenvalues[2] - 4.0).abs() < 1e-13);
    }

    #[test]
    fn q_mismatch_is_config_error() {
        let g = graph_from(2, vec![(0, 1, 1.0)], 2.0);
        assert!(matches!(
            assemble(&g, &PQRParams::new(1.0, 1.5, 0.0).unwrap()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn scale_factor_examples() {
        let k = KernelSpec::new(crate::graph::Profile::Indicator, 0.1, 2).unwrap();
        let bal = PQRParams::new(1.5, 2.0, 0.5).unwrap();
        for n in [10, 1000] {
            assert!((continuum_scale(&bal, &k, n, 0.2) - 8.0 / 0.04).abs() < 1e-9);
        }
        // 2 / (0.1^2 * 100^1 * 1/4)
        let f = continuum_scale(&PQRParams::new(1.0, 2.0, 0.0).unwrap(), &k, 100, 0.1);
        assert!((f - 8.0).abs() < 1e-12);
    }

    #[test]
    fn invariance_preconditions() {
        let g = graph_from(4, vec![(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (0, 3, 0.1)], 2.0);
        let o = EigenOptions::default();
        for (a, b) in [((1.0, 0.0), (0.5, 0.5)), ((1.0, 1.0), (2.0, 0.0))] {
            let d = verify_pqr_invariance(
                &g,
                &PQRParams::new(a.0, 2.0, a.1).unwrap(),
                &PQRParams::new(b.0, 2.0, b.1).unwrap(),
                3,
                &o,
            );
            assert!(d.unwrap() <= 1e-12);
        }
        let bad = verify_pqr_invariance(
            &g,
            &PQRParams::new(1.0, 2.0, 0.0).unwrap(),
            &PQRParams::new(1.0, 2.0, 1.0).unwrap(),
            3,
            &o,
        );
        assert!(matches!(bad, Err(Error::Parameter(_))));
    }
}
