//! `pqrlab`: sample point clouds, build `(p, q, r)` graph Laplacians, solve
//! the continuum problem and run parameter sweeps.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pqr_lab::continuum::{
    assemble_continuum, cheeger_check_1d, solve_continuum, write_eigenfunction_csv, Profile1d, StructuredMesh,
};
use pqr_lab::density::{geometry_clusters, DensityConfig, DensityModel, SampleBatch};
use pqr_lab::experiments::{emit_report, erf_template, gap_diagnostics, run_sweep, table_preset, SweepConfig};
use pqr_lab::graph::{build_graph, delta_rule, KernelSpec, Profile, WeightedGraph};
use pqr_lab::linalg::eigen::EigenOptions;
use pqr_lab::mm::{write_adjacency, write_symmetric};
use pqr_lab::spectral::{assemble, continuum_scale, solve_lowest, verify_pqr_invariance, PQRParams, Spectrum};
use pqr_lab::{Error, Result};
use serde::Deserialize;
use serde_json::{json, Value};

use config::{resolve, Overrides};

const LONG_ABOUT: &str = "\
Sample point clouds, build (p, q, r) graph Laplacians, solve the weighted
continuum eigenproblem and run parameter sweeps.

Configuration precedence: command-line flags override values from the
--config JSON file, which override built-in defaults. Each flag documents the
JSON path it sets. The resolved configuration is written to config.json in
the output directory.

Exit codes: 0 success, 1 domain/configuration/usage error, 2 numerical
failure (non-convergence, failed sweep), 3 IO error.";

#[derive(Parser)]
#[command(name = "pqrlab", version, about = "Spectral experiments with (p, q, r) graph Laplacians", long_about = LONG_ABOUT)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// More diagnostics on standard error (repeat up to three times)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Draw i.i.d. points from a density and write samples.csv
    Sample(SampleArgs),
    /// Build the proximity graph and write its weight matrices
    Graph(GraphArgs),
    /// Lowest eigenvalues of the graph Laplacian, scaled to the continuum
    Spectrum(SpectrumArgs),
    /// Finite element eigenpairs of the weighted continuum operator
    Continuum(ContinuumArgs),
    /// Run a parameter sweep and write results.csv, summary.json, plot.svg
    Sweep(SweepArgs),
    /// Weighted Cheeger lower bound against sigma_2 on [0, 1]
    Cheeger(CheegerArgs),
    /// Check that two parameter sets with equal q and p + r share a spectrum
    Invariance(InvarianceArgs),
    /// Reproduce a table of continuum epsilon sweeps (tab41, tab42, tab43)
    Report(ReportArgs),
}

#[derive(Args)]
struct Output {
    /// JSON configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for output files
    #[arg(long, default_value = "pqrlab-out")]
    output_dir: PathBuf,
    /// Worker threads; 1 gives bit-for-bit reproducible output
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct DensityArgs {
    /// Density family: erf, piecewise, expmix, mollified [density.variant]
    #[arg(long)]
    density: Option<String>,
    /// Cluster layout: paper-2, paper-3, paper-5 [density.clusters]
    #[arg(long)]
    geometry: Option<String>,
    /// Background level epsilon [density.epsilon]
    #[arg(long, value_parser = finite_f64)]
    epsilon: Option<f64>,
    /// Decay scale of the exponential mixture [density.omega]
    #[arg(long, value_parser = finite_f64)]
    omega: Option<f64>,
}

#[derive(Args)]
struct ParamArgs {
    /// Exponent p [params.p]
    #[arg(long, value_parser = finite_f64)]
    p: Option<f64>,
    /// Exponent q [params.q]
    #[arg(long, value_parser = finite_f64)]
    q: Option<f64>,
    /// Exponent r [params.r]
    #[arg(long, value_parser = finite_f64)]
    r: Option<f64>,
}

#[derive(Args)]
struct PointArgs {
    /// Number of sample points [n_vertices]
    #[arg(long)]
    n_vertices: Option<usize>,
    /// Sampling seed [seed]
    #[arg(long)]
    seed: Option<u64>,
    /// Read points from a CSV written by `sample` instead of sampling [points]
    #[arg(long)]
    points: Option<PathBuf>,
    /// Kernel profile: indicator, gaussian, epanechnikov [kernel.profile]
    #[arg(long)]
    profile: Option<String>,
    /// Kernel bandwidth; defaults to (ln N / N)^(1/3) [kernel.delta]
    #[arg(long, value_parser = finite_f64)]
    delta: Option<f64>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    out: Output,
    #[command(flatten)]
    density: DensityArgs,
    /// Number of sample points [n_vertices]
    #[arg(long)]
    n_vertices: Option<usize>,
    /// Sampling seed [seed]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    out: Output,
    #[command(flatten)]
    density: DensityArgs,
    #[command(flatten)]
    points: PointArgs,
    /// Degree reweighting exponent [q]
    #[arg(long, value_parser = finite_f64)]
    q: Option<f64>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    out: Output,
    #[command(flatten)]
    density: DensityArgs,
    #[command(flatten)]
    points: PointArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Number of eigenpairs [k_eigen]
    #[arg(long)]
    k_eigen: Option<usize>,
    /// Relative residual tolerance [tol]
    #[arg(long, value_parser = finite_f64)]
    tol: Option<f64>,
    /// Report raw graph eigenvalues instead of continuum-scaled ones [scale = false]
    #[arg(long)]
    no_scale: bool,
}

#[derive(Args)]
struct ContinuumArgs {
    #[command(flatten)]
    out: Output,
    #[command(flatten)]
    density: DensityArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Mesh cells per axis [n_cells]
    #[arg(long)]
    n_cells: Option<usize>,
    /// Number of eigenpairs [k_eigen]
    #[arg(long)]
    k_eigen: Option<usize>,
    /// Relative residual tolerance [tol]
    #[arg(long, value_parser = finite_f64)]
    tol: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    out: Output,
    #[command(flatten)]
    density: DensityArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// epsilon_continuum, epsilon_discrete, n_discrete or omega_discrete [mode]
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated sweep values [sweep_values]
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Sample points per discrete cell [n_vertices]
    #[arg(long)]
    n_vertices: Option<usize>,
    /// Mesh cells per axis [n_cells]
    #[arg(long)]
    n_cells: Option<usize>,
    /// Trials per sweep value [trials]
    #[arg(long)]
    trials: Option<usize>,
    /// Eigenpairs per cell [k_eigen]
    #[arg(long)]
    k_eigen: Option<usize>,
    /// Target cluster count K [clusters]
    #[arg(long)]
    clusters: Option<usize>,
    /// Base seed mixed into every cell's seed [base_seed]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CheegerArgs {
    /// JSON configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// One-dimensional density: uniform or two-bump [profile]
    #[arg(long)]
    profile: Option<String>,
    /// Background level of the two-bump density [epsilon]
    #[arg(long, value_parser = finite_f64)]
    epsilon: Option<f64>,
    #[command(flatten)]
    params: ParamArgs,
    /// Finite element cells on [0, 1] [n_grid]
    #[arg(long)]
    n_grid: Option<usize>,
}

#[derive(Args)]
struct InvarianceArgs {
    /// JSON configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    density: DensityArgs,
    /// Number of sample points [n_vertices]
    #[arg(long, visible_alias = "n")]
    n_vertices: Option<usize>,
    /// Sampling seed [seed]
    #[arg(long)]
    seed: Option<u64>,
    /// Shared exponent q [q]
    #[arg(long, value_parser = finite_f64)]
    q: Option<f64>,
    /// p of the first parameter set [first.p]
    #[arg(long, value_parser = finite_f64)]
    p1: Option<f64>,
    /// r of the first parameter set [first.r]
    #[arg(long, value_parser = finite_f64)]
    r1: Option<f64>,
    /// p of the second parameter set [second.p]
    #[arg(long, value_parser = finite_f64)]
    p2: Option<f64>,
    /// r of the second parameter set [second.r]
    #[arg(long, value_parser = finite_f64)]
    r2: Option<f64>,
    /// Number of eigenvalues compared [k_eigen]
    #[arg(long)]
    k_eigen: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Preset name: tab41, tab42 or tab43 [preset]
    preset: Option<String>,
    #[command(flatten)]
    out: Output,
    /// Mesh cells per axis [n_cells]
    #[arg(long)]
    n_cells: Option<usize>,
}

fn finite_f64(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err("value must be finite".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn density_flags(o: &mut Overrides, d: &DensityArgs) -> Result<()> {
    if let Some(v) = &d.density {
        o.set("density.variant", Some(v.clone()));
        // each family has its own default domain
        o.set_value("density.domain", Value::Null);
    }
    if let Some(g) = &d.geometry {
        o.set_value("density.clusters", serde_json::to_value(geometry_clusters(g)?)?);
    }
    o.set("density.epsilon", d.epsilon);
    o.set("density.omega", d.omega);
    Ok(())
}

fn param_flags(o: &mut Overrides, p: &ParamArgs) {
    o.set("params.p", p.p);
    o.set("params.q", p.q);
    o.set("params.r", p.r);
}

fn point_flags(o: &mut Overrides, p: &PointArgs) {
    o.set("n_vertices", p.n_vertices);
    o.set("seed", p.seed);
    o.set("points", p.points.as_ref().map(|p| p.display().to_string()));
    o.set("kernel.profile", p.profile.clone());
    o.set("kernel.delta", p.delta);
}

fn default_density() -> Result<Value> {
    Ok(serde_json::to_value(erf_template("paper-2")?)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelCfg {
    profile: Profile,
    delta: Option<f64>,
}

#[derive(Deserialize)]
struct PointsCfg {
    density: DensityConfig,
    n_vertices: usize,
    seed: u64,
    #[serde(default)]
    points: Option<PathBuf>,
    kernel: KernelCfg,
}

impl PointsCfg {
    fn batch(&self) -> Result<SampleBatch> {
        match &self.points {
            Some(path) => SampleBatch::read_csv(std::io::BufReader::new(fs::File::open(path)?)),
            None => DensityModel::from_config(&self.density)?.sample(self.n_vertices, self.seed),
        }
    }

    fn kernel(&self, n: usize, dim: usize) -> Result<KernelSpec> {
        let delta = match self.kernel.delta {
            Some(d) => d,
            None => delta_rule(n)?,
        };
        KernelSpec::new(self.kernel.profile, delta, dim)
    }

    fn graph(&self, q: f64) -> Result<(WeightedGraph, KernelSpec)> {
        let batch = self.batch()?;
        let kernel = self.kernel(batch.len(), batch.dim)?;
        Ok((build_graph(&batch, &kernel, q)?, kernel))
    }
}

fn points_defaults(n_vertices: usize) -> Result<Value> {
    Ok(json!({
        "density": default_density()?,
        "n_vertices": n_vertices,
        "seed": 0,
        "kernel": {"profile": "indicator", "delta": null},
    }))
}

struct Ctx {
    verbose: u8,
}

impl Ctx {
    fn note(&self, level: u8, msg: impl AsRef<str>) {
        if self.verbose >= level {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn prepare_dir(dir: &Path, resolved: &Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(resolved)?)?;
    Ok(())
}

fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        // ignore a second initialisation; the first pool stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    Ok(())
}

fn write_vectors(path: &Path, vectors: &[Vec<f64>]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    let header: Vec<String> = (1..=vectors.len()).map(|j| format!("u{j}")).collect();
    writeln!(f, "{}", header.join(","))?;
    let n = vectors.first().map_or(0, Vec::len);
    for i in 0..n {
        let row: Vec<String> = vectors.iter().map(|v| format!("{:.16e}", v[i])).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()?;
    Ok(())
}

fn write_spectrum(dir: &Path, s: &Spectrum) -> Result<()> {
    s.write_csv(&dir.join("spectrum.csv"))?;
    fs::write(dir.join("spectrum.json"), s.to_json()?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx { verbose: cli.verbose };
    match cli.command {
        Command::Sample(a) => {
            let mut o = Overrides::default();
            density_flags(&mut o, &a.density)?;
            o.set("n_vertices", a.n_vertices);
            o.set("seed", a.seed);
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Cfg {
                density: DensityConfig,
                n_vertices: usize,
                seed: u64,
            }
            let defaults = json!({"density": default_density()?, "n_vertices": 2048, "seed": 0});
            let (cfg, resolved): (Cfg, _) = resolve(defaults, a.out.config.as_deref(), o)?;
            set_jobs(a.out.jobs)?;
            let batch = DensityModel::from_config(&cfg.density)?.sample(cfg.n_vertices, cfg.seed)?;
            prepare_dir(&a.out.output_dir, &resolved)?;
            let path = a.out.output_dir.join("samples.csv");
            batch.write_csv(std::io::BufWriter::new(fs::File::create(&path)?))?;
            ctx.note(1, format!("wrote {} points to {}", batch.len(), path.display()));
        }
        Command::Graph(a) => {
            let mut o = Overrides::default();
            density_flags(&mut o, &a.density)?;
            point_flags(&mut o, &a.points);
            o.set("q", a.q);
            let mut defaults = points_defaults(4096)?;
            defaults["q"] = json!(2.0);
            #[derive(Deserialize)]
            struct Cfg {
                #[serde(flatten)]
                points: PointsCfg,
                q: f64,
            }
            let (cfg, resolved): (Cfg, _) = resolve(defaults, a.out.config.as_deref(), o)?;
            set_jobs(a.out.jobs)?;
            let (g, kernel) = cfg.points.graph(cfg.q)?;
            prepare_dir(&a.out.output_dir, &resolved)?;
            let dir = &a.out.output_dir;
            let note = format!("delta = {:e}, q = {}", kernel.delta, g.q);
            write_adjacency(
                std::io::BufWriter::new(fs::File::create(dir.join("raw_weights.mtx"))?),
                &g.raw_weights,
                "raw kernel weights",
            )?;
            write_adjacency(
                std::io::BufWriter::new(fs::File::create(dir.join("weights.mtx"))?),
                &g.weights,
                &format!("reweighted, {note}"),
            )?;
            let mut comps = g.weights.components();
            comps.sort_unstable();
            comps.dedup();
            let info = json!({
                "n": g.n,
                "edges": g.weights.n_edges(),
                "delta": kernel.delta,
                "s0": kernel.s0,
                "s2": kernel.s2,
                "q": g.q,
                "components": comps.len(),
                "degrees": {"min": g.degrees.iter().cloned().fold(f64::INFINITY, f64::min),
                            "max": g.degrees.iter().cloned().fold(0.0, f64::max)},
            });
            fs::write(dir.join("graph.json"), serde_json::to_string_pretty(&info)?)?;
            ctx.note(1, format!("{} vertices, {} edges, {note}", g.n, g.weights.n_edges()));
        }
        Command::Spectrum(a) => {
            let mut o = Overrides::default();
            density_flags(&mut o, &a.density)?;
            point_flags(&mut o, &a.points);
            param_flags(&mut o, &a.params);
            o.set("k_eigen", a.k_eigen);
            o.set("tol", a.tol);
            if a.no_scale {
                o.set("scale", Some(false));
            }
            let mut defaults = points_defaults(4096)?;
            merge_into(
                &mut defaults,
                json!({"params": {"p": 1.0, "q": 2.0, "r": 1.0}, "k_eigen": 3, "tol": 1e-8, "scale": true}),
            );
            #[derive(Deserialize)]
            struct Cfg {
                #[serde(flatten)]
                points: PointsCfg,
                params: PQRParams,
                k_eigen: usize,
                tol: f64,
                scale: bool,
            }
            let (cfg, resolved): (Cfg, _) = resolve(defaults, a.out.config.as_deref(), o)?;
            cfg.params.validate()?;
            set_jobs(a.out.jobs)?;
            let (g, kernel) = cfg.points.graph(cfg.params.q)?;
            let sys = assemble(&g, &cfg.params)?;
            let opts = EigenOptions {
                tol: cfg.tol,
                seed: cfg.points.seed,
                ..Default::default()
            };
            let mut s = solve_lowest(&sys, cfg.k_eigen, &opts)?;
            if cfg.scale {
                s = s.scaled(continuum_scale(&cfg.params, &kernel, g.n, kernel.delta));
            }
            prepare_dir(&a.out.output_dir, &resolved)?;
            write_spectrum(&a.out.output_dir, &s)?;
            write_vectors(&a.out.output_dir.join("eigenvectors.csv"), &s.vectors_u)?;
            ctx.note(1, format!("eigenvalues {:?}", s.eigenvalues));
        }
        Command::Continuum(a) => {
            let mut o = Overrides::default();
            density_flags(&mut o, &a.density)?;
            param_flags(&mut o, &a.params);
            o.set("n_cells", a.n_cells);
            o.set("k_eigen", a.k_eigen);
            o.set("tol", a.tol);
            let defaults = json!({
                "density": default_density()?,
                "params": {"p": 1.0, "q": 2.0, "r": 1.0},
                "n_cells": 100,
                "k_eigen": 3,
                "tol": 1e-8,
            });
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Cfg {
                density: DensityConfig,
                params: PQRParams,
                n_cells: usize,
                k_eigen: usize,
                tol: f64,
            }
            let (cfg, resolved): (Cfg, _) = resolve(defaults, a.out.config.as_deref(), o)?;
            cfg.params.validate()?;
            set_jobs(a.out.jobs)?;
            let density = DensityModel::from_config(&cfg.density)?;
            let mesh = StructuredMesh::new(density.domain().clone(), cfg.n_cells)?;
            let sys = assemble_continuum(&mesh, &density, &cfg.params)?;
            let opts = EigenOptions {
                tol: cfg.tol,
                ..Default::default()
            };
            let s = solve_continuum(&sys, cfg.k_eigen, &opts)?;
            let dir = &a.out.output_dir;
            prepare_dir(dir, &resolved)?;
            write_spectrum(dir, &s)?;
            for j in 0..s.vectors_v.len() {
                write_eigenfunction_csv(&sys, &s, j, &dir.join(format!("eigenfunction_{}.csv", j + 1)))?;
            }
            write_adjacency(
                std::io::BufWriter::new(fs::File::create(dir.join("stiffness.mtx"))?),
                &sys.stiffness,
                "stiffness couplings -K_ij",
            )?;
            write_symmetric(
                std::io::BufWriter::new(fs::File::create(dir.join("mass.mtx"))?),
                &sys.mass,
                "consistent mass matrix",
            )?;
            ctx.note(1, format!("eigenvalues {:?}", s.eigenvalues));
        }
        Command::Sweep(a) => {
            let mut o = Overrides::default();
            density_flags(&mut o, &a.density)?;
            param_flags(&mut o, &a.params);
            o.set("mode", a.mode.clone());
            o.set("sweep_values", a.values.clone());
            o.set("n_vertices", a.n_vertices);
            o.set("n_cells", a.n_cells);
            o.set("trials", a.trials);
            o.set("k_eigen", a.k_eigen);
            o.set("clusters", a.clusters);
            o.set("base_seed", a.seed);
            let defaults = serde_json::to_value(&table_preset("tab41", 100)?[0])?;
            let (cfg, resolved): (SweepConfig, _) = resolve(defaults, a.out.config.as_deref(), o)?;
            cfg.validate()?;
            set_jobs(a.out.jobs)?;
            ctx.note(
                1,
                format!("sweep over {} values, {} trials", cfg.sweep_values.len(), cfg.trials),
            );
            let result = run_sweep(&cfg, a.out.jobs)?;
            prepare_dir(&a.out.output_dir, &resolved)?;
            emit_report(&result, &a.out.output_dir)?;
            if let Ok(gap) = gap_diagnostics(&result, result.k_clusters) {
                fs::write(a.out.output_dir.join("gaps.json"), serde_json::to_string_pretty(&gap)?)?;
            }
            let slope = |f: &Option<pqr_lab::experiments::Fit>| {
                f.as_ref().map_or("n/a".to_string(), |f| format!("{:.4}", f.slope))
            };
            println!(
                "sigma_{k} slope {}  ratio slope {}  sigma_{} slope {}",
                slope(&result.sigma_k),
                slope(&result.ratio_k),
                result.k_clusters + 1,
                slope(&result.sigma_k1),
                k = result.k_clusters
            );
        }
        Command::Cheeger(a) => {
            let mut o = Overrides::default();
            o.set("profile", a.profile.clone());
            o.set("epsilon", a.epsilon);
            param_flags(&mut o, &a.params);
            o.set("n_grid", a.n_grid);
            let defaults = json!({
                "profile": "uniform",
                "epsilon": 0.05,
                "params": {"p": 0.5, "q": 1.0, "r": 0.5},
                "n_grid": 1000,
            });
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Cfg {
                profile: String,
                epsilon: f64,
                params: PQRParams,
                n_grid: usize,
            }
            let (cfg, _): (Cfg, _) = resolve(defaults, a.config.as_deref(), o)?;
            let profile = match cfg.profile.as_str() {
                "uniform" => Profile1d::Uniform,
                "two-bump" | "two_bump" => Profile1d::TwoBump { epsilon: cfg.epsilon },
                p => return Err(Error::Config(format!("unknown profile '{p}' (uniform, two-bump)"))),
            };
            let rep = cheeger_check_1d(&profile, &cfg.params, cfg.n_grid)?;
            println!(
                "h={:.6} bound={:.6} sigma2={:.6} {}",
                rep.h,
                rep.lower_bound,
                rep.sigma2,
                if rep.pass { "PASS" } else { "FAIL" }
            );
        }
        Command::Invariance(a) => {
            let mut o = Overrides::default();
            density_flags(&mut o, &a.density)?;
            o.set("n_vertices", a.n_vertices);
            o.set("seed", a.seed);
            o.set("q", a.q);
            o.set("first.p", a.p1);
            o.set("first.r", a.r1);
            o.set("second.p", a.p2);
            o.set("second.r", a.r2);
            o.set("k_eigen", a.k_eigen);
            let mut defaults = points_defaults(512)?;
            merge_into(
                &mut defaults,
                json!({"q": 2.0, "first": {"p": 1.0, "r": 1.0}, "second": {"p": 1.5, "r": 0.5}, "k_eigen": 6}),
            );
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Pr {
                p: f64,
                r: f64,
            }
            #[derive(Deserialize)]
            struct Cfg {
                #[serde(flatten)]
                points: PointsCfg,
                q: f64,
                first: Pr,
                second: Pr,
                k_eigen: usize,
            }
            let (cfg, _): (Cfg, _) = resolve(defaults, a.config.as_deref(), o)?;
            set_jobs(a.jobs)?;
            let first = PQRParams::new(cfg.first.p, cfg.q, cfg.first.r)?;
            let second = PQRParams::new(cfg.second.p, cfg.q, cfg.second.r)?;
            let (g, _) = cfg.points.graph(cfg.q)?;
            let opts = EigenOptions {
                tol: 1e-12,
                seed: cfg.points.seed,
                ..Default::default()
            };
            let d = verify_pqr_invariance(&g, &first, &second, cfg.k_eigen, &opts)?;
            println!("max discrepancy {:.3e} {}", d, if d <= 1e-10 { "PASS" } else { "FAIL" });
        }
        Command::Report(a) => {
            let mut o = Overrides::default();
            o.set("preset", a.preset.clone());
            o.set("n_cells", a.n_cells);
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Cfg {
                preset: String,
                n_cells: usize,
            }
            let defaults = json!({"preset": "tab41", "n_cells": 200});
            let (cfg, resolved): (Cfg, _) = resolve(defaults, a.out.config.as_deref(), o)?;
            let rows = table_preset(&cfg.preset, cfg.n_cells)?;
            set_jobs(a.out.jobs)?;
            let dir = &a.out.output_dir;
            prepare_dir(dir, &resolved)?;
            let mut table = String::from("p,q,r,sigma_2_slope,ratio_slope\n");
            let mut first_err = None;
            println!("{:>5} {:>5} {:>5} {:>10} {:>10}", "p", "q", "r", "sigma_2", "ratio");
            for row in rows {
                let PQRParams { p, q, r } = row.params;
                ctx.note(1, format!("({p}, {q}, {r})"));
                match run_sweep(&row, a.out.jobs) {
                    Ok(res) => {
                        emit_report(&res, &dir.join(format!("p{p}_q{q}_r{r}")))?;
                        let s = res.sigma_k.map_or(f64::NAN, |f| f.slope);
                        let t = res.ratio_k.map_or(f64::NAN, |f| f.slope);
                        table.push_str(&format!("{p},{q},{r},{s:.6},{t:.6}\n"));
                        println!("{p:>5} {q:>5} {r:>5} {s:>10.4} {t:>10.4}");
                    }
                    Err(e) => {
                        eprintln!("({p}, {q}, {r}) failed: {e}");
                        table.push_str(&format!("{p},{q},{r},,\n"));
                        first_err.get_or_insert(e);
                    }
                }
            }
            fs::write(dir.join("table.csv"), table)?;
            if let Some(e) = first_err {
                return Err(e);
            }
        }
    }
    Ok(())
}

fn merge_into(base: &mut Value, top: Value) {
    config::merge(base, top);
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
