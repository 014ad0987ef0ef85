//! Kernel proximity graphs and their degree reweighting.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::SampleBatch;
use crate::error::{Error, Result};
use crate::sparse::Laplacian;
use crate::spectral::PQRParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `eta(t) = 1_{[0,1]}(t) / |B_1|`.
    Indicator,
    /// Standard normal profile truncated at radius 4.
    Gaussian,
    /// `eta(t) = c_d (1 - t^2)_+`.
    Epanechnikov,
}

/// Truncation radius of the Gaussian profile in units of `delta`.
pub const GAUSSIAN_CUTOFF: f64 = 4.0;

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_lowercase()))
            .map_err(|_| Error::Config(format!("unknown kernel profile '{s}'")))
    }

    /// Support radius of the unscaled profile.
    pub fn support(self) -> f64 {
        match self {
            Profile::Gaussian => GAUSSIAN_CUTOFF,
            _ => 1.0,
        }
    }

    /// Unscaled profile `eta(t)` in dimension `d`.
    pub fn eta(self, t: f64, d: usize) -> f64 {
        let ball = unit_ball_volume(d);
        match self {
            Profile::Indicator => {
                if t <= 1.0 {
                    1.0 / ball
                } else {
                    0.0
                }
            }
            Profile::Gaussian => {
                if t <= GAUSSIAN_CUTOFF {
                    (-0.5 * t * t).exp() / (2.0 * PI).powf(d as f64 / 2.0)
                } else {
                    0.0
                }
            }
            Profile::Epanechnikov => {
                if t <= 1.0 {
                    (d as f64 + 2.0) / (2.0 * ball) * (1.0 - t * t)
                } else {
                    0.0
                }
            }
        }
    }

    /// Closed-form `(s0, s2)` in dimension `d`.
    pub fn moments(self, d: usize) -> (f64, f64) {
        let df = d as f64;
        match self {
            Profile::Indicator => (1.0, 1.0 / (df + 2.0)),
            Profile::Epanechnikov => (1.0, 1.0 / (df + 4.0)),
            Profile::Gaussian => {
                let r = GAUSSIAN_CUTOFF;
                let g = (-0.5 * r * r).exp();
                let c = (2.0 / PI).sqrt();
                let e = libm::erf(r / 2f64.sqrt());
                match d {
                    1 => (e, e - c * r * g),
                    2 => (1.0 - g, 1.0 - g * (1.0 + 0.5 * r * r)),
                    _ => (e - c * r * g, e - c * g * (r + r * r * r / 3.0)),
                }
            }
        }
    }
}

fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => PI,
        _ => 4.0 * PI / 3.0,
    }
}

fn sphere_area(d: usize) -> f64 {
    unit_ball_volume(d) * d as f64
}

/// Radial composite Simpson quadrature of `(s0, s2)`.
pub fn moments_by_quadrature(profile: Profile, d: usize) -> (f64, f64) {
    let r = profile.support();
    let m = 20_000;
    let h = r / m as f64;
    let (mut s0, mut s2) = (0.0, 0.0);
    for k in 0..=m {
        let t = k as f64 * h;
        let w = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        // evaluate just inside the support at the endpoint
        let e = profile.eta(if k == m { t * (1.0 - 1e-15) } else { t }, d);
        s0 += w * e * t.powi(d as i32 - 1);
        s2 += w * e * t.powi(d as i32 + 1);
    }
    let area = sphere_area(d);
    (s0 * h / 3.0 * area, s2 * h / 3.0 * area / d as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub profile: Profile,
    pub delta: f64,
    pub dim: usize,
    pub s0: f64,
    pub s2: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct KernelConfig {
    profile: Profile,
    delta: f64,
    #[serde(default = "default_dim")]
    dim: usize,
}

fn default_dim() -> usize {
    2
}

impl KernelSpec {
    pub fn new(profile: Profile, delta: f64, dim: usize) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Parameter(format!("bandwidth must be positive, got {delta}")));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::Parameter(format!("dimension must be 1..=3, got {dim}")));
        }
        let (s0, s2) = profile.moments(dim);
        let (q0, q2) = moments_by_quadrature(profile, dim);
        if (s0 - q0).abs() > 1e-6 || (s2 - q2).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "kernel moments disagree with quadrature: ({s0}, {s2}) vs ({q0}, {q2})"
            )));
        }
        Ok(KernelSpec {
            profile,
            delta,
            dim,
            s0,
            s2,
        })
    }

    /// `{"profile": "indicator", "delta": 0.1}`; moments are derived.
    pub fn from_json(s: &str) -> Result<Self> {
        let c: KernelConfig = serde_json::from_str(s)?;
        Self::new(c.profile, c.delta, c.dim)
    }

    /// `eta_delta(t) = delta^{-d} eta(t / delta)`.
    pub fn eta_delta(&self, t: f64) -> f64 {
        self.profile.eta(t / self.delta, self.dim) / self.delta.powi(self.dim as i32)
    }

    pub fn support_radius(&self) -> f64 {
        self.profile.support() * self.delta
    }
}

/// `delta(N) = (log N / N)^{1/3}`.
pub fn delta_rule(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Parameter(format!("delta rule needs n >= 2, got {n}")));
    }
    let n = n as f64;
    Ok((n.ln() / n).cbrt())
}

/// Raw kernel weights `W~` and degrees `d~`.
#[derive(Debug, Clone)]
pub struct RawGraph {
    pub weights: Laplacian,
    pub degrees: Vec<f64>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Builds `W~_ij = eta_delta(|x_i - x_j|)` with a uniform hash grid of cell
/// size equal to the kernel support.
pub fn build_raw_graph(batch: &SampleBatch, kernel: &KernelSpec) -> Result<RawGraph> {
    let n = batch.len();
    if n < 2 {
        return Err(Error::Parameter("graph needs at least two points".into()));
    }
    if batch.dim != kernel.dim {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim,
            got: batch.dim,
        });
    }
    let d = batch.dim;
    let reach = kernel.support_radius();
    let mut lo = vec![f64::INFINITY; d];
    for i in 0..n {
        for (a, &x) in batch.point(i).iter().enumerate() {
            lo[a] = lo[a].min(x);
        }
    }
    let cell_of = |p: &[f64]| -> [i64; 3] {
        let mut c = [0i64; 3];
        for a in 0..d {
            c[a] = ((p[a] - lo[a]) / reach).floor() as i64;
        }
        c
    };
    let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for i in 0..n {
        cells.entry(cell_of(batch.point(i))).or_default().push(i);
    }
    let offsets: Vec<[i64; 3]> = {
        let r: Vec<i64> = vec![-1, 0, 1];
        let zero = vec![0i64];
        let ax = |a: usize| if a < d { r.clone() } else { zero.clone() };
        let mut v = Vec::new();
        for &x in &ax(0) {
            for &y in &ax(1) {
                for &z in &ax(2) {
                    v.push([x, y, z]);
                }
            }
        }
        v
    };

    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = batch.point(i);
            let c = cell_of(p);
            let mut row = Vec::new();
            for o in &offsets {
                let key = [c[0] + o[0], c[1] + o[1], c[2] + o[2]];
                if let Some(members) = cells.get(&key) {
                    for &j in members {
                        if j > i {
                            let r = dist(p, batch.point(j));
                            if r <= reach {
                                let w = kernel.eta_delta(r);
                                if w > 0.0 {
                                    row.push((j, w));
                                }
                            }
                        }
                    }
                }
            }
            row.sort_by_key(|e| e.0);
            row
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for row in rows {
        for (j, w) in row {
            cols.push(j);
            vals.push(w);
        }
        row_ptr.push(cols.len());
    }
    let weights = Laplacian::from_parts(n, row_ptr, cols, vals);
    let degrees = weights.degrees();
    if let Some(v) = degrees.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::IsolatedVertex {
            vertex: v,
            delta: kernel.delta,
        });
    }
    Ok(RawGraph { weights, degrees })
}

/// Degree-reweighted graph for a given `q`.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    pub n: usize,
    pub raw_weights: Laplacian,
    pub raw_degrees: Vec<f64>,
    pub q: f64,
    pub weights: Laplacian,
    pub degrees: Vec<f64>,
}

/// `W_ij = W~_ij / (d~_i^{1-q/2} d~_j^{1-q/2})`.
pub fn reweight(raw: &RawGraph, q: f64) -> Result<WeightedGraph> {
    if !q.is_finite() {
        return Err(Error::Parameter(format!("q must be finite, got {q}")));
    }
    let n = raw.weights.n();
    if raw.degrees.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: raw.degrees.len(),
        });
    }
    if let Some(v) = raw.degrees.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::Parameter(format!("raw degree of vertex {v} is not positive")));
    }
    let e = 1.0 - q / 2.0;
    let f: Vec<f64> = raw
        .degrees
        .iter()
        .map(|&d| if e == 0.0 { 1.0 } else { d.powf(-e) })
        .collect();
    let edges: Vec<(usize, usize, f64)> = raw.weights.edges().map(|(i, j, w)| (i, j, w * f[i] * f[j])).collect();
    let weights = Laplacian::from_edges(n, edges)?;
    let degrees = weights.degrees();
    Ok(WeightedGraph {
        n,
        raw_weights: raw.weights.clone(),
        raw_degrees: raw.degrees.clone(),
        q,
        weights,
        degrees,
    })
}

/// Convenience: hash-grid build followed by reweighting.
pub fn build_graph(batch: &SampleBatch, kernel: &KernelSpec, q: f64) -> Result<WeightedGraph> {
    reweight(&build_raw_graph(batch, kernel)?, q)
}

/// Discrete weighted Dirichlet energy
/// `N^{2r-q} / (2 delta^2) sum_ij W_ij |u_i / d_i^{r/(q-1)} - u_j / d_j^{r/(q-1)}|^2`.
pub fn dirichlet_energy(graph: &WeightedGraph, params: &PQRParams, u: &[f64], delta: f64) -> Result<f64> {
    if u.len() != graph.n {
        return Err(Error::DimensionMismatch {
            expected: graph.n,
            got: u.len(),
        });
    }
    if (graph.q - params.q).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "graph was reweighted with q = {} but params have q = {}",
            graph.q, params.q
        )));
    }
    let v: Vec<f64> = if params.is_q_one() {
        u.to_vec()
    } else {
        let e = params.r / (params.q - 1.0);
        u.iter().zip(&graph.degrees).map(|(x, d)| x / d.powf(e)).collect()
    };
    let pair_sum: f64 = graph.weights.edges().map(|(i, j, w)| w * (v[i] - v[j]).powi(2)).sum();
    let n = graph.n as f64;
    Ok(n.powf(2.0 * params.r - params.q) / (delta * delta) * pair_sum)
}
