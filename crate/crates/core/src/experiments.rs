//! Parameter sweeps, log-log slope fits, gap diagnostics, Fiedler
//! clustering and report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::continuum::{assemble_continuum, solve_continuum, StructuredMesh};
use crate::density::{geometry_clusters, DensityConfig, DensityModel, DomainBox, Variant};
use crate::error::{Error, Result};
use crate::graph::{build_graph, delta_rule, KernelSpec, Profile};
use crate::linalg::EigenOptions;
use crate::rng::mix_seed;
use crate::spectral::{assemble, continuum_scale, solve_lowest, PQRParams, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Finite elements; the sweep value is `epsilon`.
    EpsilonContinuum,
    /// Sampled graphs; the sweep value is `epsilon`.
    EpsilonDiscrete,
    /// Sampled graphs; the sweep value is the vertex count.
    NDiscrete,
    /// Sampled graphs from the exponential mixture; the sweep value is `omega`.
    OmegaDiscrete,
}

impl SweepMode {
    pub fn is_discrete(self) -> bool {
        self != SweepMode::EpsilonContinuum
    }
}

/// Upper end of the default fit window for epsilon sweeps.
pub const EPSILON_FIT_MAX: f64 = 0.025;
/// `|slope of sigma_{K+1}|` below this counts as a uniform gap.
pub const UNIFORM_GAP_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub mode: SweepMode,
    pub params: PQRParams,
    pub density: DensityConfig,
    pub sweep_values: Vec<f64>,
    #[serde(default = "defaults::n_vertices")]
    pub n_vertices: usize,
    #[serde(default = "defaults::n_cells")]
    pub n_cells: usize,
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    #[serde(default = "defaults::k_eigen")]
    pub k_eigen: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Only sweep values `<= fit_max` enter slope fits. Defaults to
    /// `EPSILON_FIT_MAX` for epsilon sweeps and to no limit otherwise.
    #[serde(default)]
    pub fit_max: Option<f64>,
    /// Target cluster count `K`.
    #[serde(default = "defaults::clusters")]
    pub clusters: usize,
    #[serde(default = "defaults::kernel")]
    pub kernel: Profile,
    #[serde(default = "defaults::tol")]
    pub tol: f64,
}

mod defaults {
    use crate::graph::Profile;
    pub fn n_vertices() -> usize {
        4096
    }
    pub fn n_cells() -> usize {
        200
    }
    pub fn trials() -> usize {
        5
    }
    pub fn k_eigen() -> usize {
        3
    }
    pub fn clusters() -> usize {
        2
    }
    pub fn kernel() -> Profile {
        Profile::Indicator
    }
    pub fn tol() -> f64 {
        1e-8
    }
}

impl SweepConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: SweepConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let v = &self.sweep_values;
        if v.is_empty() {
            return Err(Error::Config("sweep_values is empty".into()));
        }
        if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::Config("sweep values must be positive and finite".into()));
        }
        let up = v.windows(2).all(|w| w[1] > w[0]);
        let down = v.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::Config("sweep values must be strictly monotone".into()));
        }
        if self.mode == SweepMode::NDiscrete && v.iter().any(|x| x.fract() != 0.0 || *x < 2.0) {
            return Err(Error::Config("vertex counts must be integers >= 2".into()));
        }
        if self.mode == SweepMode::OmegaDiscrete && self.density.variant != Variant::ExpMixture {
            return Err(Error::Config("omega sweeps need the exponential mixture".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.k_eigen < 2 {
            return Err(Error::Config("k_eigen must be >= 2".into()));
        }
        if self.clusters == 0 || self.clusters > self.k_eigen {
            return Err(Error::Config(format!(
                "cluster count {} must lie in 1..=k_eigen ({})",
                self.clusters, self.k_eigen
            )));
        }
        if self.mode.is_discrete() && self.n_vertices < 2 {
            return Err(Error::Config("n_vertices must be >= 2".into()));
        }
        if !self.mode.is_discrete() && self.n_cells < 2 {
            return Err(Error::Config("n_cells must be >= 2".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        // catches invalid density settings before any work is scheduled
        self.density_at(v[0])?;
        Ok(())
    }

    pub fn fit_window(&self) -> Option<f64> {
        self.fit_max.or(match self.mode {
            SweepMode::EpsilonContinuum | SweepMode::EpsilonDiscrete => Some(EPSILON_FIT_MAX),
            _ => None,
        })
    }

    fn trials_run(&self) -> usize {
        if self.mode.is_discrete() {
            self.trials
        } else {
            1
        }
    }

    /// Density of the cell at a given sweep value.
    pub fn density_at(&self, value: f64) -> Result<DensityModel> {
        let mut c = self.density.clone();
        match self.mode {
            SweepMode::EpsilonContinuum | SweepMode::EpsilonDiscrete => c.epsilon = value,
            SweepMode::OmegaDiscrete => c.omega = value,
            SweepMode::NDiscrete => {}
        }
        DensityModel::from_config(&c)
    }

    fn vertices_at(&self, value: f64) -> usize {
        if self.mode == SweepMode::NDiscrete {
            value as usize
        } else {
            self.n_vertices
        }
    }
}

/// Erf-cluster density template for a named cluster layout.
pub fn erf_template(geometry: &str) -> Result<DensityConfig> {
    Ok(DensityConfig {
        variant: Variant::ErfClusters,
        domain: Some(DomainBox::centered_square()),
        epsilon: 0.1,
        omega: 0.0,
        clusters: geometry_clusters(geometry)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub value_index: usize,
    pub value: f64,
    pub trial: usize,
    /// Ascending eigenvalues, scaled to the continuum in discrete modes.
    pub eigenvalues: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub cells: Vec<CellResult>,
    /// Trial means per sweep value; `None` when every trial failed.
    pub means: Vec<Option<Vec<f64>>>,
    /// Fit of `sigma_K` against the sweep value.
    pub sigma_k: Option<Fit>,
    /// Fit of `sigma_K / sigma_{K+1}`.
    pub ratio_k: Option<Fit>,
    /// Fit of `sigma_{K+1}`.
    pub sigma_k1: Option<Fit>,
    pub k_clusters: usize,
}

/// Ordinary least squares of `log ys` on `log xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<Fit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::Parameter(format!(
            "slope fit needs >= 3 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Parameter("slope fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Parameter("slope fit needs distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(Fit {
        slope,
        intercept,
        stderr,
        points: xs.len(),
    })
}

fn run_cell(cfg: &SweepConfig, vi: usize, trial: usize) -> Result<Vec<f64>> {
    let value = cfg.sweep_values[vi];
    let density = cfg.density_at(value)?;
    let seed = mix_seed(&[cfg.base_seed, vi as u64, trial as u64]);
    let opts = EigenOptions {
        tol: cfg.tol,
        seed,
        ..Default::default()
    };
    if !cfg.mode.is_discrete() {
        let mesh = StructuredMesh::new(density.domain().clone(), cfg.n_cells)?;
        let sys = assemble_continuum(&mesh, &density, &cfg.params)?;
        return Ok(solve_continuum(&sys, cfg.k_eigen, &opts)?.eigenvalues);
    }
    let n = cfg.vertices_at(value);
    let batch = density.sample(n, seed)?;
    let delta = delta_rule(n)?;
    let kernel = KernelSpec::new(cfg.kernel, delta, batch.dim)?;
    let graph = build_graph(&batch, &kernel, cfg.params.q)?;
    let spectrum = solve_lowest(&assemble(&graph, &cfg.params)?, cfg.k_eigen, &opts)?;
    Ok(spectrum
        .scaled(continuum_scale(&cfg.params, &kernel, n, delta))
        .eigenvalues)
}

/// Runs every (value, trial) cell on a pool of `jobs` workers (all cores when
/// `None`). Output order and content do not depend on scheduling.
pub fn run_sweep(cfg: &SweepConfig, jobs: Option<usize>) -> Result<SweepResult> {
    cfg.validate()?;
    let keys: Vec<(usize, usize)> = (0..cfg.sweep_values.len())
        .flat_map(|vi| (0..cfg.trials_run()).map(move |t| (vi, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let cells: Vec<CellResult> = pool.install(|| {
        keys.par_iter()
            .map(|&(vi, trial)| {
                let (eigenvalues, error) = match run_cell(cfg, vi, trial) {
                    Ok(v) => (Some(v), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                CellResult {
                    value_index: vi,
                    value: cfg.sweep_values[vi],
                    trial,
                    eigenvalues,
                    error,
                }
            })
            .collect()
    });
    let failed: Vec<&CellResult> = cells.iter().filter(|c| c.error.is_some()).collect();
    if 2 * failed.len() > cells.len() {
        return Err(Error::SweepFailed {
            failed: failed.len(),
            total: cells.len(),
            first: failed[0].error.clone().unwrap_or_default(),
        });
    }

    let means: Vec<Option<Vec<f64>>> = (0..cfg.sweep_values.len())
        .map(|vi| {
            let ok: Vec<&Vec<f64>> = cells
                .iter()
                .filter(|c| c.value_index == vi)
                .filter_map(|c| c.eigenvalues.as_ref())
                .collect();
            if ok.is_empty() {
                return None;
            }
            Some(
                (0..cfg.k_eigen)
                    .map(|j| ok.iter().map(|v| v[j]).sum::<f64>() / ok.len() as f64)
                    .collect(),
            )
        })
        .collect();

    let k = cfg.clusters;
    let window: Vec<(f64, &Vec<f64>)> = cfg
        .sweep_values
        .iter()
        .zip(&means)
        .filter(|(v, _)| cfg.fit_window().is_none_or(|m| **v <= m))
        .filter_map(|(v, m)| m.as_ref().map(|m| (*v, m)))
        .collect();
    let series = |f: &dyn Fn(&Vec<f64>) -> Option<f64>| -> Option<Fit> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = window.iter().filter_map(|(v, m)| f(m).map(|y| (*v, y))).unzip();
        fit_slope(&xs, &ys).ok()
    };
    let sigma_k = if k >= 2 { series(&|m| Some(m[k - 1])) } else { None };
    let ratio_k = if k >= 2 && k < cfg.k_eigen {
        series(&|m| Some(m[k - 1] / m[k]))
    } else {
        None
    };
    let sigma_k1 = if k < cfg.k_eigen { series(&|m| Some(m[k])) } else { None };
    Ok(SweepResult {
        config: cfg.clone(),
        cells,
        means,
        sigma_k,
        ratio_k,
        sigma_k1,
        k_clusters: k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub value: f64,
    pub sigma_k: f64,
    pub sigma_k1: f64,
    pub ratio: f64,
    pub uniform_gap_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub k: usize,
    pub rows: Vec<GapRow>,
    pub sigma_k1_slope: Option<f64>,
    /// `sigma_{K+1}` stays of order one across the fit window.
    pub uniform_gap_flag: bool,
}

pub fn gap_diagnostics(result: &SweepResult, k: usize) -> Result<GapReport> {
    let cfg = &result.config;
    if k < 1 || cfg.k_eigen < k + 1 {
        return Err(Error::Parameter(format!(
            "gap diagnostics for K = {k} need k_eigen >= {}",
            k + 1
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = cfg
        .sweep_values
        .iter()
        .zip(&result.means)
        .filter(|(v, _)| cfg.fit_window().is_none_or(|m| **v <= m))
        .filter_map(|(v, m)| m.as_ref().map(|m| (*v, m[k])))
        .unzip();
    let slope = fit_slope(&xs, &ys).ok().map(|f| f.slope);
    let flag = slope.is_some_and(|s| s.abs() < UNIFORM_GAP_SLOPE);
    let rows = cfg
        .sweep_values
        .iter()
        .zip(&result.means)
        .filter_map(|(v, m)| {
            m.as_ref().map(|m| GapRow {
                value: *v,
                sigma_k: m[k - 1],
                sigma_k1: m[k],
                ratio: m[k - 1] / m[k],
                uniform_gap_flag: flag,
            })
        })
        .collect();
    Ok(GapReport {
        k,
        rows,
        sigma_k1_slope: slope,
        uniform_gap_flag: flag,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FiedlerLabels {
    pub labels: Vec<u8>,
    /// Entries of the Fiedler vector that are exactly zero (labelled 0).
    pub zero_entries: usize,
}

/// Sign pattern of the second eigenvector, oriented so that its entry of
/// largest magnitude is positive.
pub fn fiedler_labels(spectrum: &Spectrum) -> Result<FiedlerLabels> {
    let v = spectrum
        .vectors_v
        .get(1)
        .ok_or_else(|| Error::Parameter("Fiedler labels need at least two eigenpairs".into()))?;
    let lead = v.iter().enumerate().fold(
        (0, 0.0f64),
        |best, (i, &x)| if x.abs() > best.1.abs() { (i, x) } else { best },
    );
    let s = if lead.1 < 0.0 { -1.0 } else { 1.0 };
    let labels = v.iter().map(|&x| u8::from(s * x > 0.0)).collect();
    let zero_entries = v.iter().filter(|&&x| x == 0.0).count();
    Ok(FiedlerLabels { labels, zero_entries })
}

/// Fraction of agreement with `truth` over points whose truth label is not
/// `-1`, maximised over the two ways of matching the labels.
pub fn clustering_accuracy(labels: &[u8], truth: &[i32]) -> Result<f64> {
    if labels.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: labels.len(),
        });
    }
    let (mut hit, mut total) = (0usize, 0usize);
    for (&l, &t) in labels.iter().zip(truth) {
        if t >= 0 {
            total += 1;
            hit += usize::from(i32::from(l) == t);
        }
    }
    if total == 0 {
        return Err(Error::Parameter("no labelled points to score".into()));
    }
    let a = hit as f64 / total as f64;
    Ok(a.max(1.0 - a))
}

#[derive(Debug, Clone, Serialize)]
pub struct FiedlerOutcome {
    pub accuracy: f64,
    pub zero_entries: usize,
    pub eigenvalues: Vec<f64>,
}

/// Samples `n` points, builds the graph with `delta = delta_rule(n)` and
/// scores the Fiedler partition against the sampler's labels.
pub fn fiedler_trial(
    density: &DensityModel,
    params: &PQRParams,
    profile: Profile,
    n: usize,
    seed: u64,
) -> Result<FiedlerOutcome> {
    let batch = density.sample(n, seed)?;
    let delta = delta_rule(n)?;
    let kernel = KernelSpec::new(profile, delta, batch.dim)?;
    let graph = build_graph(&batch, &kernel, params.q)?;
    let opts = EigenOptions {
        seed,
        ..Default::default()
    };
    let spectrum = solve_lowest(&assemble(&graph, params)?, 2, &opts)?;
    let labels = fiedler_labels(&spectrum)?;
    Ok(FiedlerOutcome {
        accuracy: clustering_accuracy(&labels.labels, &batch.labels)?,
        zero_entries: labels.zero_entries,
        eigenvalues: spectrum.eigenvalues,
    })
}

/// Epsilon values used by the table presets.
pub const TABLE_EPSILONS: [f64; 4] = [1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0, 1.0 / 320.0];

/// Named continuum epsilon-sweep recipes: `tab41` (balanced), `tab42`
/// (`q > p + r`) and `tab43` (`q < p + r`), two clusters each.
pub fn table_preset(name: &str, n_cells: usize) -> Result<Vec<SweepConfig>> {
    let rows: &[(f64, f64, f64)] = match name {
        "tab41" => &[
            (0.5, 1.0, 0.5),
            (1.0, 2.0, 1.0),
            (1.5, 3.0, 1.5),
            (2.0, 4.0, 2.0),
            (1.0, 1.5, 0.5),
            (1.5, 2.0, 0.5),
            (2.0, 2.5, 0.5),
        ],
        "tab42" => &[
            (0.5, 1.5, 0.5),
            (0.5, 2.0, 0.5),
            (0.5, 2.5, 0.5),
            (0.5, 3.0, 0.5),
            (1.0, 2.0, 0.5),
            (1.5, 2.5, 0.5),
            (2.0, 3.0, 0.5),
        ],
        "tab43" => &[
            (1.0, 0.5, 1.0),
            (1.0, 1.0, 1.0),
            (1.0, 1.5, 1.0),
            (0.5, 0.5, 1.0),
            (1.5, 1.5, 1.0),
            (2.0, 2.0, 1.0),
        ],
        _ => return Err(Error::Config(format!("unknown preset '{name}' (tab41, tab42, tab43)"))),
    };
    rows.iter()
        .map(|&(p, q, r)| {
            Ok(SweepConfig {
                mode: SweepMode::EpsilonContinuum,
                params: PQRParams::new(p, q, r)?,
                density: erf_template("paper-2")?,
                sweep_values: TABLE_EPSILONS.to_vec(),
                n_vertices: defaults::n_vertices(),
                n_cells,
                trials: 1,
                k_eigen: 3,
                base_seed: 0,
                fit_max: None,
                clusters: 2,
                kernel: Profile::Indicator,
                tol: defaults::tol(),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub results_csv: PathBuf,
    pub summary_json: PathBuf,
    pub plot_svg: PathBuf,
}

pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

fn fit_json(f: &Option<Fit>) -> serde_json::Value {
    match f {
        Some(f) => json!({"slope": f.slope, "intercept": f.intercept, "stderr": f.stderr, "points": f.points}),
        None => json!("insufficient points"),
    }
}

/// JSON summary of a sweep: fits, gap diagnostics, failures, config echo.
pub fn summary_json(result: &SweepResult) -> serde_json::Value {
    let k = result.k_clusters;
    let gap = gap_diagnostics(result, k).ok();
    let failures: Vec<_> = result
        .cells
        .iter()
        .filter_map(|c| {
            c.error
                .as_ref()
                .map(|e| json!({"value": c.value, "trial": c.trial, "error": e}))
        })
        .collect();
    json!({
        "version": version_string(),
        "config": result.config,
        "k_clusters": k,
        "fit_window_max": result.config.fit_window(),
        "slopes": {
            "sigma_k": fit_json(&result.sigma_k),
            "ratio_k": fit_json(&result.ratio_k),
            "sigma_k_plus_1": fit_json(&result.sigma_k1),
        },
        "gap": gap,
        "means": result.config.sweep_values.iter().zip(&result.means)
            .map(|(v, m)| json!({"value": v, "eigenvalues": m})).collect::<Vec<_>>(),
        "failures": failures,
    })
}

/// Writes `results.csv`, `summary.json` and `plot.svg` into `dir`.
pub fn emit_report(result: &SweepResult, dir: &Path) -> Result<ReportFiles> {
    if result.cells.is_empty() {
        return Err(Error::Parameter("empty sweep: nothing to report".into()));
    }
    let mut csv = String::from("sweep_value,trial,eigen_index,sigma\n");
    for c in &result.cells {
        if let Some(ev) = &c.eigenvalues {
            for (j, s) in ev.iter().enumerate() {
                writeln!(csv, "{:.16e},{},{},{:.16e}", c.value, c.trial, j + 1, s).unwrap();
            }
        }
    }
    let summary = serde_json::to_string_pretty(&summary_json(result))?;
    let svg = render_svg(result);

    fs::create_dir_all(dir)?;
    let files = ReportFiles {
        results_csv: dir.join("results.csv"),
        summary_json: dir.join("summary.json"),
        plot_svg: dir.join("plot.svg"),
    };
    fs::write(&files.results_csv, csv)?;
    fs::write(&files.summary_json, summary)?;
    fs::write(&files.plot_svg, svg)?;
    Ok(files)
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// `(legend label, log10 points, dashed)`.
type Series = (String, Vec<(f64, f64)>, bool);

/// Log-log plot of the trial-mean eigenvalues with fitted slopes in brackets.
pub fn render_svg(result: &SweepResult) -> String {
    let (w, h, ml, mr, mt, mb) = (640.0, 420.0, 70.0, 170.0, 20.0, 50.0);
    let mut series: Vec<Series> = Vec::new();
    let k = result.k_clusters;
    for j in 1..result.config.k_eigen {
        let pts: Vec<(f64, f64)> = result
            .config
            .sweep_values
            .iter()
            .zip(&result.means)
            .filter_map(|(v, m)| m.as_ref().map(|m| (*v, m[j])))
            .filter(|(_, y)| *y > 0.0)
            .map(|(x, y)| (x.log10(), y.log10()))
            .collect();
        let label = match (&result.sigma_k, j + 1 == k, &result.sigma_k1, j == k) {
            (Some(f), true, _, _) | (_, _, Some(f), true) => format!("sigma_{} [{:.2}]", j + 1, f.slope),
            _ => format!("sigma_{}", j + 1),
        };
        series.push((label, pts, false));
    }
    if let Some(f) = &result.sigma_k {
        let xs: Vec<f64> = result
            .config
            .sweep_values
            .iter()
            .filter(|v| result.config.fit_window().is_none_or(|m| **v <= m))
            .map(|v| v.log10())
            .collect();
        let line: Vec<(f64, f64)> = xs
            .iter()
            .map(|&x| {
                (
                    x,
                    (f.intercept + f.slope * x * std::f64::consts::LN_10) / std::f64::consts::LN_10,
                )
            })
            .collect();
        series.push((format!("fit sigma_{k} [{:.2}]", f.slope), line, true));
    }
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().cloned()).collect();
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    if all.is_empty() {
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14">no data</text>"#,
            w / 2.0 - 30.0,
            h / 2.0
        )
        .unwrap();
        out.push_str("</svg>\n");
        return out;
    }
    let span = |f: fn(&(f64, f64)) -> f64| {
        let lo = all.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let (x0, x1) = span(|p| p.0);
    let (y0, y1) = span(|p| p.1);
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
    writeln!(
        out,
        r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - ml - mr,
        h - mt - mb
    )
    .unwrap();
    for (lo, hi, horizontal) in [(x0, x1, true), (y0, y1, false)] {
        let mut t = lo.ceil();
        while t <= hi {
            let label = format!("1e{}", t as i64);
            if horizontal {
                writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{label}</text>"#, px(t), h - mb + 16.0).unwrap();
            } else {
                writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{label}</text>"#, ml - 6.0, py(t) + 4.0).unwrap();
            }
            t += 1.0;
        }
    }
    let xname = match result.config.mode {
        SweepMode::NDiscrete => "N",
        SweepMode::OmegaDiscrete => "omega",
        _ => "epsilon",
    };
    writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">{xname} (log10)</text>"#, ml + (w - ml - mr) / 2.0, h - 10.0).unwrap();
    for (i, (label, pts, dashed)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        let dash = if *dashed { r#" stroke-dasharray="6,4""# } else { "" };
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            path.join(" ")
        )
        .unwrap();
        for (x, y) in pts.iter().filter(|_| !dashed) {
            writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                px(*x),
                py(*y)
            )
            .unwrap();
        }
        let ly = mt + 16.0 + 18.0 * i as f64;
        writeln!(
            out,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            w - mr + 10.0,
            w - mr + 30.0
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{label}</text>"#,
            w - mr + 35.0,
            ly + 4.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
