//! Clustered probability densities on rectangular domains.
//!
//! Four families are provided:
//!
//! * `ErfClusters`: circular clusters with an erf edge profile over a floor
//!   `epsilon`, normalised numerically;
//! * `PiecewiseConstant`: two dense slabs separated by a strip of height
//!   `epsilon` on the unit square;
//! * `ExpMixture`: two truncated exponentials in `t_1`, uniform in `t_2`;
//! * `MollifiedIndicator`: uniform density on the cluster balls, mollified
//!   at scale `epsilon` and lifted by `epsilon`.
//!
//! Models are immutable after construction and cheap to clone.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = DomainBox { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn unit_square() -> Self {
        DomainBox {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        }
    }

    /// `(-1, 1)^2`, the domain of the erf cluster experiments.
    pub fn centered_square() -> Self {
        DomainBox {
            lower: vec![-1.0, -1.0],
            upper: vec![1.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.lower.len();
        if d == 0 || d > 3 || self.upper.len() != d {
            return Err(Error::Config(format!(
                "domain needs matching lower/upper of dimension 1..=3, got {} and {}",
                d,
                self.upper.len()
            )));
        }
        for i in 0..d {
            if !(self.lower[i] < self.upper[i]) || !self.lower[i].is_finite() || !self.upper[i].is_finite() {
                return Err(Error::Config(format!("domain axis {i}: need lower < upper")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, t: &[f64]) -> bool {
        t.len() == self.dim()
            && t.iter()
                .enumerate()
                .all(|(i, &x)| x >= self.lower[i] && x <= self.upper[i])
    }

    /// Distance from `t` to the boundary of the box (0 outside).
    pub fn boundary_distance(&self, t: &[f64]) -> f64 {
        t.iter()
            .enumerate()
            .map(|(i, &x)| (x - self.lower[i]).min(self.upper[i] - x))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// Midpoint-rule nodes of an `m`-per-axis grid in 2D, with the cell area.
    pub(crate) fn midpoints_2d(&self, m: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let hx = (self.upper[0] - self.lower[0]) / m as f64;
        let hy = (self.upper[1] - self.lower[1]) / m as f64;
        let xs = (0..m).map(|i| self.lower[0] + (i as f64 + 0.5) * hx).collect();
        let ys = (0..m).map(|j| self.lower[1] + (j as f64 + 0.5) * hy).collect();
        (xs, ys, hx * hy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[serde(alias = "erf", alias = "ErfClusters")]
    ErfClusters,
    #[serde(alias = "piecewise", alias = "PiecewiseConstant")]
    PiecewiseConstant,
    #[serde(alias = "expmix", alias = "ExpMixture")]
    ExpMixture,
    #[serde(alias = "mollified", alias = "MollifiedIndicator")]
    MollifiedIndicator,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown density variant '{s}'")))
    }
}

/// JSON form of a density model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityConfig {
    pub variant: Variant,
    #[serde(default)]
    pub domain: Option<DomainBox>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub clusters: Vec<Cluster>,
}

/// Grid resolution per axis for the erf normaliser.
pub const NORMALIZER_GRID: usize = 1024;
/// Mollifier quadrature nodes per axis.
pub const MOLLIFIER_NODES: usize = 64;
/// Resolution of the interpolation grid used to sample mollified densities.
pub const SAMPLING_GRID: usize = 256;

#[derive(Debug)]
struct Mollifier {
    // offsets (x, y) and weights of the discrete mollifier, weights sum to 1
    nodes: Vec<(f64, f64, f64)>,
    // interpolation grid of the full density for sampling
    grid: Vec<f64>,
    grid_max: f64,
}

#[derive(Debug, Clone)]
pub struct DensityModel {
    variant: Variant,
    domain: DomainBox,
    epsilon: f64,
    omega: f64,
    clusters: Vec<Cluster>,
    normalizer: f64,
    mollifier: Option<Arc<Mollifier>>,
}

fn check_finite_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

impl DensityModel {
    pub fn from_config(cfg: &DensityConfig) -> Result<Self> {
        match cfg.variant {
            Variant::ErfClusters => {
                let domain = cfg.domain.clone().unwrap_or_else(DomainBox::centered_square);
                Self::erf_clusters(domain, cfg.epsilon, cfg.clusters.clone())
            }
            Variant::PiecewiseConstant => {
                require_unit_square(&cfg.domain)?;
                Self::piecewise_constant(cfg.epsilon)
            }
            Variant::ExpMixture => {
                require_unit_square(&cfg.domain)?;
                Self::exp_mixture(cfg.omega)
            }
            Variant::MollifiedIndicator => {
                let domain = cfg.domain.clone().unwrap_or_else(DomainBox::centered_square);
                Self::mollified_indicator(domain, cfg.epsilon, cfg.clusters.clone())
            }
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: DensityConfig = serde_json::from_str(s)?;
        Self::from_config(&cfg)
    }

    pub fn to_config(&self) -> DensityConfig {
        DensityConfig {
            variant: self.variant,
            domain: Some(self.domain.clone()),
            epsilon: self.epsilon,
            omega: self.omega,
            clusters: self.clusters.clone(),
        }
    }

    fn check_clusters(domain: &DomainBox, clusters: &[Cluster]) -> Result<()> {
        domain.validate()?;
        if domain.dim() != 2 {
            return Err(Error::Config("cluster densities are two-dimensional".into()));
        }
        if clusters.is_empty() {
            return Err(Error::Config("at least one cluster is required".into()));
        }
        for (i, c) in clusters.iter().enumerate() {
            if c.center.len() != 2 || !domain.contains(&c.center) {
                return Err(Error::Config(format!(
                    "cluster {i}: center must be a point of the domain"
                )));
            }
            if !(c.radius > 0.0) || !c.radius.is_finite() {
                return Err(Error::Config(format!("cluster {i}: radius must be positive")));
            }
        }
        Ok(())
    }

    /// `C^{-1} (eps + sum_i (1 + erf((theta_i - |s - c_i|) / eps)) / (4 pi theta_i^2))`.
    pub fn erf_clusters(domain: DomainBox, epsilon: f64, clusters: Vec<Cluster>) -> Result<Self> {
        Self::check_clusters(&domain, &clusters)?;
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        let mut m = DensityModel {
            variant: Variant::ErfClusters,
            domain,
            epsilon,
            omega: 0.0,
            clusters,
            normalizer: 1.0,
            mollifier: None,
        };
        m.normalizer = m.midpoint_integral(NORMALIZER_GRID);
        Ok(m)
    }

    pub fn piecewise_constant(epsilon: f64) -> Result<Self> {
        check_finite_nonneg("epsilon", epsilon)?;
        if epsilon > 1.0 / 0.6 {
            return Err(Error::Config("piecewise-constant density needs epsilon <= 5/3".into()));
        }
        Ok(DensityModel {
            variant: Variant::PiecewiseConstant,
            domain: DomainBox::unit_square(),
            epsilon,
            omega: 0.0,
            clusters: Vec::new(),
            normalizer: 1.0,
            mollifier: None,
        })
    }

    pub fn exp_mixture(omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::Config(format!("omega must be positive, got {omega}")));
        }
        let normalizer = 1.0 / (2.0 * omega * (-(-1.0 / omega).exp_m1()));
        Ok(DensityModel {
            variant: Variant::ExpMixture,
            domain: DomainBox::unit_square(),
            epsilon: 0.0,
            omega,
            clusters: Vec::new(),
            normalizer,
            mollifier: None,
        })
    }

    /// `(eps + g_eps * rho_0) / K_eps` with `rho_0` uniform on the balls.
    pub fn mollified_indicator(domain: DomainBox, epsilon: f64, clusters: Vec<Cluster>) -> Result<Self> {
        Self::check_clusters(&domain, &clusters)?;
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        for (i, c) in clusters.iter().enumerate() {
            if domain.boundary_distance(&c.center) < c.radius + epsilon {
                return Err(Error::Config(format!(
                    "cluster {i}: mollified ball must stay inside the domain"
                )));
            }
        }
        // discrete mollifier on the midpoint grid of [-eps, eps]^2
        let m = MOLLIFIER_NODES;
        let h = 2.0 / m as f64;
        let mut nodes = Vec::new();
        for a in 0..m {
            for b in 0..m {
                let x = -1.0 + (a as f64 + 0.5) * h;
                let y = -1.0 + (b as f64 + 0.5) * h;
                let r2 = x * x + y * y;
                if r2 < 1.0 {
                    nodes.push((x * epsilon, y * epsilon, (-1.0 / (1.0 - r2)).exp()));
                }
            }
        }
        let total: f64 = nodes.iter().map(|n| n.2).sum();
        nodes.iter_mut().for_each(|n| n.2 /= total);

        let normalizer = epsilon * domain.volume() + 1.0;
        let mut model = DensityModel {
            variant: Variant::MollifiedIndicator,
            domain,
            epsilon,
            omega: 0.0,
            clusters,
            normalizer,
            mollifier: Some(Arc::new(Mollifier {
                nodes,
                grid: Vec::new(),
                grid_max: 0.0,
            })),
        };
        // interpolation grid for sampling
        let g = SAMPLING_GRID;
        let (lx, ly) = (model.domain.lower[0], model.domain.lower[1]);
        let hx = (model.domain.upper[0] - lx) / g as f64;
        let hy = (model.domain.upper[1] - ly) / g as f64;
        let grid: Vec<f64> = (0..=g)
            .into_par_iter()
            .flat_map_iter(|j| {
                let model = &model;
                (0..=g).map(move |i| model.raw(&[lx + i as f64 * hx, ly + j as f64 * hy]))
            })
            .collect();
        let grid_max = grid.iter().cloned().fold(0.0, f64::max);
        let nodes = std::mem::take(&mut Arc::get_mut(model.mollifier.as_mut().unwrap()).unwrap().nodes);
        model.mollifier = Some(Arc::new(Mollifier { nodes, grid, grid_max }));
        Ok(model)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Short human-readable identifier.
    pub fn id(&self) -> String {
        match self.variant {
            Variant::ErfClusters => format!("erf(eps={},K={})", self.epsilon, self.clusters.len()),
            Variant::PiecewiseConstant => format!("piecewise(eps={})", self.epsilon),
            Variant::ExpMixture => format!("expmix(omega={})", self.omega),
            Variant::MollifiedIndicator => format!("mollified(eps={},K={})", self.epsilon, self.clusters.len()),
        }
    }

    /// Returns the same family with a different perturbation scale
    /// (`epsilon`, or `omega` for the exponential mixture).
    pub fn with_scale(&self, value: f64) -> Result<Self> {
        match self.variant {
            Variant::ErfClusters => Self::erf_clusters(self.domain.clone(), value, self.clusters.clone()),
            Variant::PiecewiseConstant => Self::piecewise_constant(value),
            Variant::ExpMixture => Self::exp_mixture(value),
            Variant::MollifiedIndicator => Self::mollified_indicator(self.domain.clone(), value, self.clusters.clone()),
        }
    }

    // Unnormalised density; `t` is assumed to be inside the domain.
    fn raw(&self, t: &[f64]) -> f64 {
        match self.variant {
            Variant::ErfClusters => {
                let mut s = self.epsilon;
                for c in &self.clusters {
                    let r = ((t[0] - c.center[0]).powi(2) + (t[1] - c.center[1]).powi(2)).sqrt();
                    s += (1.0 + libm::erf((c.radius - r) / self.epsilon)) / (4.0 * PI * c.radius * c.radius);
                }
                s
            }
            Variant::PiecewiseConstant => {
                if t[0] > 0.2 && t[0] < 0.8 {
                    self.epsilon
                } else {
                    2.5 - 1.5 * self.epsilon
                }
            }
            Variant::ExpMixture => (-t[0] / self.omega).exp() + ((t[0] - 1.0) / self.omega).exp(),
            Variant::MollifiedIndicator => self.epsilon + self.mollified_clean(t),
        }
    }

    // g_eps * rho_0 at t.
    fn mollified_clean(&self, t: &[f64]) -> f64 {
        let moll = self.mollifier.as_ref().expect("mollified model carries its mollifier");
        let area: f64 = self.clusters.iter().map(|c| PI * c.radius * c.radius).sum();
        let mut s = 0.0;
        for c in &self.clusters {
            let dx = t[0] - c.center[0];
            let dy = t[1] - c.center[1];
            let r = (dx * dx + dy * dy).sqrt();
            if r <= c.radius - self.epsilon {
                s += 1.0;
            } else if r < c.radius + self.epsilon {
                let r2 = c.radius * c.radius;
                s += moll
                    .nodes
                    .iter()
                    .filter(|(ox, oy, _)| (dx - ox).powi(2) + (dy - oy).powi(2) <= r2)
                    .map(|n| n.2)
                    .sum::<f64>();
            }
        }
        s / area
    }

    /// Density value at `t`.
    pub fn eval(&self, t: &[f64]) -> Result<f64> {
        if !self.domain.contains(t) {
            return Err(Error::Domain(format!("point {t:?} lies outside the domain")));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: &[f64]) -> f64 {
        match self.variant {
            Variant::ExpMixture => self.normalizer * self.raw(t),
            _ => self.raw(t) / self.normalizer,
        }
    }

    /// Unperturbed cluster density `rho_0` (uniform on the balls) for the
    /// mollified family; `None` for the others.
    pub fn clean_density(&self, t: &[f64]) -> Option<f64> {
        if self.variant != Variant::MollifiedIndicator {
            return None;
        }
        let area: f64 = self.clusters.iter().map(|c| PI * c.radius * c.radius).sum();
        let inside = self
            .clusters
            .iter()
            .filter(|c| (t[0] - c.center[0]).powi(2) + (t[1] - c.center[1]).powi(2) < c.radius * c.radius)
            .count();
        Some(inside as f64 / area)
    }

    /// Composite midpoint rule of the density over the domain with `m` cells
    /// per axis. For the erf family during construction this integrates the
    /// unnormalised profile.
    pub fn midpoint_integral(&self, m: usize) -> f64 {
        let (xs, ys, cell) = self.domain.midpoints_2d(m);
        let rows: Vec<f64> = ys
            .par_iter()
            .map(|&y| xs.iter().map(|&x| self.eval_unchecked(&[x, y])).sum::<f64>())
            .collect();
        rows.iter().sum::<f64>() * cell
    }

    /// Upper bound of the density used as the rejection envelope.
    fn envelope(&self) -> f64 {
        match self.variant {
            Variant::ErfClusters => {
                let peak: f64 = self
                    .clusters
                    .iter()
                    .map(|c| 2.0 / (4.0 * PI * c.radius * c.radius))
                    .sum();
                (self.epsilon + peak) / self.normalizer
            }
            Variant::PiecewiseConstant => self.epsilon.max(2.5 - 1.5 * self.epsilon),
            Variant::ExpMixture => self.normalizer * (1.0 + (-1.0 / self.omega).exp()),
            Variant::MollifiedIndicator => self.mollifier.as_ref().unwrap().grid_max / self.normalizer,
        }
    }

    fn ball_label(&self, t: &[f64]) -> i32 {
        self.clusters
            .iter()
            .position(|c| (t[0] - c.center[0]).powi(2) + (t[1] - c.center[1]).powi(2) <= c.radius * c.radius)
            .map_or(-1, |i| i as i32)
    }

    fn grid_interp(&self, t: &[f64]) -> f64 {
        let moll = self.mollifier.as_ref().unwrap();
        let g = SAMPLING_GRID;
        let fx = (t[0] - self.domain.lower[0]) / (self.domain.upper[0] - self.domain.lower[0]) * g as f64;
        let fy = (t[1] - self.domain.lower[1]) / (self.domain.upper[1] - self.domain.lower[1]) * g as f64;
        let i = (fx.floor() as usize).min(g - 1);
        let j = (fy.floor() as usize).min(g - 1);
        let (ax, ay) = (fx - i as f64, fy - j as f64);
        let at = |i: usize, j: usize| moll.grid[j * (g + 1) + i];
        let v = (1.0 - ax) * (1.0 - ay) * at(i, j)
            + ax * (1.0 - ay) * at(i + 1, j)
            + (1.0 - ax) * ay * at(i, j + 1)
            + ax * ay * at(i + 1, j + 1);
        v / self.normalizer
    }

    /// `n` i.i.d. draws, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleBatch> {
        if n == 0 {
            return Err(Error::Parameter("sample size must be at least 1".into()));
        }
        let mut rng = rng::stream(seed);
        let mut points = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(n);
        match self.variant {
            Variant::PiecewiseConstant => {
                // region masses: strip 0.6 eps, each slab half of the rest
                let strip = 0.6 * self.epsilon;
                for _ in 0..n {
                    let u: f64 = rng.random();
                    let v: f64 = rng.random();
                    let y: f64 = rng.random();
                    let (x, label) = if u < strip {
                        (0.2 + 0.6 * v, -1)
                    } else if u < strip + 0.5 * (1.0 - strip) {
                        (0.2 * v, 0)
                    } else {
                        (0.8 + 0.2 * v, 1)
                    };
                    points.extend([x, y]);
                    labels.push(label);
                }
            }
            Variant::ExpMixture => {
                let tail = -(-1.0 / self.omega).exp_m1();
                for _ in 0..n {
                    let u: f64 = rng.random();
                    let left = rng.random::<f64>() < 0.5;
                    let s = (-self.omega * (-u * tail).ln_1p()).clamp(0.0, 1.0);
                    let x = if left { s } else { 1.0 - s };
                    let y: f64 = rng.random();
                    points.extend([x, y]);
                    labels.push(if x < 0.5 { 0 } else { 1 });
                }
            }
            Variant::ErfClusters | Variant::MollifiedIndicator => {
                let bound = self.envelope() * (1.0 + 1e-12);
                let (lo, hi) = (&self.domain.lower, &self.domain.upper);
                while labels.len() < n {
                    let t = [
                        lo[0] + (hi[0] - lo[0]) * rng.random::<f64>(),
                        lo[1] + (hi[1] - lo[1]) * rng.random::<f64>(),
                    ];
                    let f = if self.variant == Variant::ErfClusters {
                        self.eval_unchecked(&t)
                    } else {
                        self.grid_interp(&t)
                    };
                    if rng.random::<f64>() * bound < f {
                        points.extend(t);
                        labels.push(self.ball_label(&t));
                    }
                }
            }
        }
        Ok(SampleBatch {
            dim: 2,
            points,
            labels,
            seed,
            density_id: self.id(),
        })
    }

    /// Structural checks against the clustered-density assumptions.
    pub fn validate_assumptions(&self, grid: usize) -> AssumptionReport {
        let (xs, ys, cell) = self.domain.midpoints_2d(grid);
        let (min, sum) = ys
            .par_iter()
            .map(|&y| {
                xs.iter().fold((f64::INFINITY, 0.0), |(m, s), &x| {
                    let v = self.eval_unchecked(&[x, y]);
                    (m.min(v), s + v)
                })
            })
            .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1 + b.1));
        let integral = sum * cell;

        let floor = match self.variant {
            Variant::ErfClusters | Variant::MollifiedIndicator => Some(self.epsilon / self.normalizer),
            Variant::PiecewiseConstant => Some(self.epsilon),
            Variant::ExpMixture => None,
        };
        let positivity_ok = min > 0.0 && floor.is_none_or(|f| min >= f * (1.0 - 1e-12));

        let separation = match self.variant {
            Variant::ErfClusters | Variant::MollifiedIndicator => {
                let mut pair_gap = f64::INFINITY;
                for (i, a) in self.clusters.iter().enumerate() {
                    for b in &self.clusters[i + 1..] {
                        let d = ((a.center[0] - b.center[0]).powi(2) + (a.center[1] - b.center[1]).powi(2)).sqrt();
                        pair_gap = pair_gap.min(d - a.radius - b.radius);
                    }
                }
                let boundary_gap = self
                    .clusters
                    .iter()
                    .map(|c| self.domain.boundary_distance(&c.center) - c.radius)
                    .fold(f64::INFINITY, f64::min);
                Some(SeparationReport {
                    min_pair_gap: pair_gap,
                    min_boundary_gap: boundary_gap,
                    ok: pair_gap > 0.0 && boundary_gap > 0.0,
                })
            }
            _ => None,
        };

        let mut notes = Vec::new();
        let violates_floor_assumption = matches!(self.variant, Variant::ExpMixture | Variant::PiecewiseConstant);
        match self.variant {
            Variant::ExpMixture => {
                notes.push(
                    "exponential tails: density is not a constant multiple of omega away from the clusters".into(),
                );
                notes.push("mass concentrates on sets of measure zero as omega -> 0".into());
            }
            Variant::PiecewiseConstant => {
                notes.push(
                    "density is discontinuous across t1 = 0.2 and t1 = 0.8 (violates smoothness assumption)".into(),
                );
            }
            _ => {}
        }
        notes.push("gradient bound in the cluster collar is not checked".into());

        AssumptionReport {
            density_id: self.id(),
            grid,
            min_value: min,
            floor,
            positivity_ok,
            integral,
            normalization_ok: (integral - 1.0).abs() <= 1e-6,
            separation,
            violates_floor_assumption,
            violates_smoothness: self.variant == Variant::PiecewiseConstant,
            notes,
        }
    }
}

fn require_unit_square(domain: &Option<DomainBox>) -> Result<()> {
    match domain {
        Some(d) if *d != DomainBox::unit_square() => Err(Error::Config(
            "this density family is defined on the unit square only".into(),
        )),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub min_pair_gap: f64,
    pub min_boundary_gap: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub density_id: String,
    pub grid: usize,
    pub min_value: f64,
    pub floor: Option<f64>,
    pub positivity_ok: bool,
    pub integral: f64,
    pub normalization_ok: bool,
    pub separation: Option<SeparationReport>,
    /// Density is not exactly proportional to the perturbation scale away
    /// from the clusters.
    pub violates_floor_assumption: bool,
    pub violates_smoothness: bool,
    pub notes: Vec<String>,
}

/// Points drawn from a density with generative labels (-1 for background).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub dim: usize,
    /// Row-major `n x dim` coordinates.
    pub points: Vec<f64>,
    pub labels: Vec<i32>,
    pub seed: u64,
    pub density_id: String,
}

impl SampleBatch {
    pub fn from_points(dim: usize, points: Vec<f64>, labels: Vec<i32>) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) || points.len() / dim != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim.max(1),
                got: points.len(),
            });
        }
        Ok(SampleBatch {
            dim,
            points,
            labels,
            seed: 0,
            density_id: String::from("external"),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// CSV with header `x0,x1,...,label`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},label", header.join(","))?;
        for i in 0..self.len() {
            for x in self.point(i) {
                write!(w, "{:.16e},", x)?;
            }
            writeln!(w, "{}", self.labels[i])?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
        let header = header?;
        let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        if cols.len() < 2 || cols.last() != Some(&"label") {
            return Err(Error::parse(1, "header must be x0,...,label"));
        }
        let dim = cols.len() - 1;
        for (i, c) in cols[..dim].iter().enumerate() {
            if *c != format!("x{i}") {
                return Err(Error::parse(1, format!("unexpected column '{c}'")));
            }
        }
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (ln, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim + 1 {
                return Err(Error::parse(ln + 1, format!("expected {} fields", dim + 1)));
            }
            for f in &fields[..dim] {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(ln + 1, format!("bad number '{f}'")))?;
                if !v.is_finite() {
                    return Err(Error::parse(ln + 1, "non-finite coordinate"));
                }
                points.push(v);
            }
            labels.push(fields[dim].parse().map_err(|_| Error::parse(ln + 1, "bad label"))?);
        }
        if labels.is_empty() {
            return Err(Error::parse(2, "no points"));
        }
        Self::from_points(dim, points, labels)
    }
}

/// Cluster layouts of the two-, three- and five-cluster experiments on
/// `(-1, 1)^2`, by preset name.
pub fn geometry_clusters(name: &str) -> Result<Vec<Cluster>> {
    let all = [
        ([-0.5, 0.0], 0.25),
        ([0.5, 0.3], 0.25),
        ([0.4, -0.5], 0.15),
        ([-0.35, 0.65], 0.20),
        ([-0.6, -0.6], 0.15),
    ];
    let k = match name {
        "paper-2" => 2,
        "paper-3" => 3,
        "paper-5" => 5,
        _ => {
            return Err(Error::Config(format!(
                "unknown geometry '{name}' (expected paper-2, paper-3, paper-5)"
            )))
        }
    };
    Ok(all[..k]
        .iter()
        .map(|(c, r)| Cluster {
            center: c.to_vec(),
            radius: *r,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_clusters(eps: f64) -> DensityModel {
        DensityModel::erf_clusters(DomainBox::centered_square(), eps, geometry_clusters("paper-2").unwrap()).unwrap()
    }

    #[test]
    fn exp_mixture_values() {
        let m = DensityModel::exp_mixture(0.25).unwrap();
        let v = m.eval(&[0.5, 0.3]).unwrap();
        // (1/w)(1 - e^{-1/w})^{-1} e^{-1/(2w)} at w = 1/4
        let oracle = 4.0 / (1.0 - (-4.0f64).exp()) * (-2.0f64).exp();
        assert!((v - oracle).abs() < 1e-14);
        assert!((v - 0.551441).abs() < 1e-6);
        for w in [0.05, 0.3, 1.7] {
            let m = DensityModel::exp_mixture(w).unwrap();
            for t in [0.0, 0.13, 0.4] {
                let a = m.eval(&[t, 0.2]).unwrap();
                let b = m.eval(&[1.0 - t, 0.9]).unwrap();
                assert!((a - b).abs() <= 1e-12 * a);
            }
        }
    }

    #[test]
    fn piecewise_values_and_mass() {
        let m = DensityModel::piecewise_constant(0.125).unwrap();
        assert_eq!(m.eval(&[0.5, 0.5]).unwrap(), 0.125);
        assert_eq!(m.eval(&[0.1, 0.5]).unwrap(), 2.3125);
        for eps in [0.0, 0.125, 0.5, 1.0] {
            let e: f64 = eps;
            assert!((0.6 * e + 0.4 * (2.5 - 1.5 * e) - 1.0).abs() < 1e-15);
            let m = DensityModel::piecewise_constant(e).unwrap();
            assert!((m.midpoint_integral(500) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn outside_domain_is_an_error() {
        let m = DensityModel::piecewise_constant(0.1).unwrap();
        assert!(matches!(m.eval(&[1.2, 0.5]), Err(Error::Domain(_))));
        assert!(matches!(m.eval(&[0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn erf_normalised_and_positive() {
        let m = two_clusters(0.05);
        assert!((m.midpoint_integral(NORMALIZER_GRID) - 1.0).abs() < 1e-12);
        assert!(m.eval(&[0.99, -0.99]).unwrap() > 0.0);
        assert!(m.eval(&[-0.5, 0.0]).unwrap() > m.eval(&[0.0, -0.8]).unwrap());
    }

    #[test]
    fn erf_mirror_symmetry() {
        let clusters = vec![
            Cluster {
                center: vec![-0.5, 0.1],
                radius: 0.2,
            },
            Cluster {
                center: vec![0.5, 0.1],
                radius: 0.2,
            },
        ];
        let m = DensityModel::erf_clusters(DomainBox::centered_square(), 0.03, clusters).unwrap();
        for (x, y) in [(0.1, 0.3), (0.45, -0.2), (0.7, 0.1), (0.99, 0.99)] {
            let a = m.eval(&[x, y]).unwrap();
            let b = m.eval(&[-x, y]).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn same_seed_same_batch() {
        for m in [
            two_clusters(0.1),
            DensityModel::exp_mixture(0.2).unwrap(),
            DensityModel::piecewise_constant(0.3).unwrap(),
        ] {
            let a = m.sample(300, 42).unwrap();
            let b = m.sample(300, 42).unwrap();
            assert_eq!(a, b);
            assert!(a.points.chunks(2).all(|p| m.domain().contains(p)));
            assert_ne!(a.points, m.sample(300, 43).unwrap().points);
        }
    }

    #[test]
    fn validator_flags() {
        let r = two_clusters(0.05).validate_assumptions(256);
        assert!(r.separation.as_ref().unwrap().ok);
        assert!(r.positivity_ok);
        assert!(!r.violates_floor_assumption);

        let overlapping = vec![
            Cluster {
                center: vec![-0.1, 0.0],
                radius: 0.25,
            },
            Cluster {
                center: vec![0.1, 0.0],
                radius: 0.25,
            },
        ];
        let m = DensityModel::erf_clusters(DomainBox::centered_square(), 0.05, overlapping).unwrap();
        assert!(!m.validate_assumptions(128).separation.unwrap().ok);

        let p = DensityModel::piecewise_constant(0.1).unwrap().validate_assumptions(128);
        assert!(p.violates_smoothness && p.violates_floor_assumption);
        let e = DensityModel::exp_mixture(0.1).unwrap().validate_assumptions(128);
        assert!(e.violates_floor_assumption && e.separation.is_none());
    }

    #[test]
    fn config_round_trip_and_errors() {
        let json = r#"{"variant": "erf", "epsilon": 0.1,
            "clusters": [{"center": [-0.5, 0.0], "radius": 0.25}]}"#;
        let m = DensityModel::from_json(json).unwrap();
        assert_eq!(m.variant(), Variant::ErfClusters);
        let again = DensityModel::from_config(&m.to_config()).unwrap();
        assert_eq!(again.normalizer(), m.normalizer());
        assert!(DensityModel::from_json(r#"{"variant": "erf", "epsilon": 0.1, "clusters": []}"#).is_err());
        assert!(DensityModel::from_json(r#"{"variant": "expmix", "omega": -1}"#).is_err());
        assert!(DensityModel::from_json(r#"{"variant": "nope"}"#).is_err());
        assert!(DensityModel::from_json(
            r#"{"variant": "piecewise", "epsilon": 0.1, "domain": {"lower": [0,0], "upper": [2,1]}}"#
        )
        .is_err());
    }

    #[test]
    fn csv_round_trip() {
        let b = DensityModel::piecewise_constant(0.2).unwrap().sample(50, 3).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"x0,x1,label\n"));
        let back = SampleBatch::read_csv(&buf[..]).unwrap();
        assert_eq!(back.points, b.points);
        assert_eq!(back.labels, b.labels);
        assert!(SampleBatch::read_csv(&b"x0,x1,label\n0.1,zz,0\n"[..]).is_err());
        assert!(SampleBatch::read_csv(&b"a,b\n"[..]).is_err());
    }

    #[test]
    fn geometry_presets() {
        assert_eq!(geometry_clusters("paper-3").unwrap().len(), 3);
        assert_eq!(geometry_clusters("paper-5").unwrap()[4].radius, 0.15);
        assert!(geometry_clusters("paper-4").is_err());
    }
}
