//! P1 finite elements for the weighted Neumann eigenproblem
//! `<rho^q grad v, grad w> = sigma <rho^{p+r} v, w>` with `u = rho^r v`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::density::{geometry_clusters, DensityModel, DomainBox};
use crate::error::{Error, Result};
use crate::linalg::eigen::{dense_lowest, lowest_pairs, EigenOptions};
use crate::sparse::{Laplacian, SymCsr};
use crate::spectral::{PQRParams, Spectrum};

/// Uniform grid of `n_cells^2` squares, each split into two right triangles
/// along the diagonal from its lower-left to its upper-right corner.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMesh {
    pub domain: DomainBox,
    pub n_cells: usize,
}

impl StructuredMesh {
    pub fn new(domain: DomainBox, n_cells: usize) -> Result<Self> {
        domain.validate()?;
        if domain.dim() != 2 {
            return Err(Error::Config("the finite element mesh is two-dimensional".into()));
        }
        if n_cells < 1 {
            return Err(Error::Parameter("mesh needs at least one cell per axis".into()));
        }
        Ok(StructuredMesh { domain, n_cells })
    }

    pub fn spacing(&self) -> (f64, f64) {
        let n = self.n_cells as f64;
        (
            (self.domain.upper[0] - self.domain.lower[0]) / n,
            (self.domain.upper[1] - self.domain.lower[1]) / n,
        )
    }

    pub fn n_nodes(&self) -> usize {
        (self.n_cells + 1) * (self.n_cells + 1)
    }

    pub fn n_triangles(&self) -> usize {
        2 * self.n_cells * self.n_cells
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.n_cells + 1) + i
    }

    pub fn node(&self, k: usize) -> [f64; 2] {
        let (hx, hy) = self.spacing();
        let m = self.n_cells + 1;
        [
            self.domain.lower[0] + (k % m) as f64 * hx,
            self.domain.lower[1] + (k / m) as f64 * hy,
        ]
    }

    /// Vertex indices of triangle `t`; the right angle sits at the middle vertex.
    pub fn triangle(&self, t: usize) -> [usize; 3] {
        let cell = t / 2;
        let (i, j) = (cell % self.n_cells, cell / self.n_cells);
        let a = self.node_index(i, j);
        let b = self.node_index(i + 1, j);
        let c = self.node_index(i, j + 1);
        let d = self.node_index(i + 1, j + 1);
        if t.is_multiple_of(2) {
            [a, b, d]
        } else {
            [a, c, d]
        }
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let v = self.triangle(t);
        let p: Vec<[f64; 2]> = v.iter().map(|&k| self.node(k)).collect();
        [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
    }
}

#[derive(Debug, Clone)]
pub struct ContinuumSystem {
    pub mesh: StructuredMesh,
    pub density_id: String,
    pub params: PQRParams,
    /// `K_ij = int rho^q grad phi_i . grad phi_j`, held as edge weights `-K_ij`.
    pub stiffness: Laplacian,
    /// `M_ij = int rho^{p+r} phi_i phi_j`.
    pub mass: SymCsr,
    /// Density at the mesh nodes.
    pub node_density: Vec<f64>,
}

/// Assembly against a model density.
pub fn assemble_continuum(
    mesh: &StructuredMesh,
    density: &DensityModel,
    params: &PQRParams,
) -> Result<ContinuumSystem> {
    if density.domain() != &mesh.domain {
        return Err(Error::Config("mesh and density live on different domains".into()));
    }
    assemble_with(mesh, |t| density.eval(t).unwrap_or(f64::NAN), &density.id(), params)
}

/// Assembly against an arbitrary density field; centroid quadrature.
pub fn assemble_with<F>(mesh: &StructuredMesh, rho: F, density_id: &str, params: &PQRParams) -> Result<ContinuumSystem>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    params.validate()?;
    let (hx, hy) = mesh.spacing();
    let nt = mesh.n_triangles();
    let centroid_rho: Vec<f64> = (0..nt).into_par_iter().map(|t| rho(&mesh.centroid(t))).collect();
    if let Some(t) = centroid_rho.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        let c = mesh.centroid(t);
        return Err(Error::Domain(format!(
            "density is not positive on triangle {t} (centroid ({:.6}, {:.6}))",
            c[0], c[1]
        )));
    }
    let node_density: Vec<f64> = (0..mesh.n_nodes())
        .into_par_iter()
        .map(|k| rho(&mesh.node(k)))
        .collect();

    let area = 0.5 * hx * hy;
    // exact P1 stiffness couplings of the legs; the hypotenuse couples with 0
    let horiz = hy / (2.0 * hx);
    let vert = hx / (2.0 * hy);
    let mut edges = Vec::with_capacity(2 * nt);
    let mut mass = Vec::with_capacity(6 * nt + mesh.n_nodes());
    let mq = params.p + params.r;
    for t in 0..nt {
        let [a, m, d] = mesh.triangle(t);
        let rq = centroid_rho[t].powf(params.q);
        if t % 2 == 0 {
            // a -> m horizontal, m -> d vertical
            edges.push((a, m, rq * horiz));
            edges.push((m, d, rq * vert));
        } else {
            edges.push((a, m, rq * vert));
            edges.push((m, d, rq * horiz));
        }
        let rm = centroid_rho[t].powf(mq) * area / 12.0;
        for (x, &i) in [a, m, d].iter().enumerate() {
            mass.push((i, i, 2.0 * rm));
            for &j in &[a, m, d][x + 1..] {
                mass.push((i, j, rm));
            }
        }
    }
    Ok(ContinuumSystem {
        mesh: mesh.clone(),
        density_id: density_id.to_string(),
        params: *params,
        stiffness: Laplacian::from_edges(mesh.n_nodes(), edges)?,
        mass: SymCsr::from_triplets(mesh.n_nodes(), mass)?,
        node_density,
    })
}

/// Lowest `k` pairs of `(K, M)`; `u = rho^r v` at the nodes.
pub fn solve_continuum(system: &ContinuumSystem, k: usize, opts: &EigenOptions) -> Result<Spectrum> {
    if !(opts.tol > 0.0) {
        return Err(Error::Parameter(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let pairs = lowest_pairs(&system.stiffness, &system.mass, k, opts)?;
    let recover: Vec<f64> = system.node_density.iter().map(|d| d.powf(system.params.r)).collect();
    let vectors_u = pairs
        .vectors
        .iter()
        .map(|v| v.iter().zip(&recover).map(|(x, f)| x * f).collect())
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

/// One CSV per call: `node_x,node_y,v,u` for eigenpair `index` (0-based).
pub fn write_eigenfunction_csv(system: &ContinuumSystem, spectrum: &Spectrum, index: usize, path: &Path) -> Result<()> {
    if index >= spectrum.vectors_v.len() {
        return Err(Error::Parameter(format!("eigenpair {index} was not computed")));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "node_x,node_y,v,u")?;
    for k in 0..system.mesh.n_nodes() {
        let [x, y] = system.mesh.node(k);
        writeln!(
            f,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            x, y, spectrum.vectors_v[index][k], spectrum.vectors_u[index][k]
        )?;
    }
    f.flush()?;
    Ok(())
}

/// One-dimensional densities on `[0, 1]` for the weighted Cheeger check.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile1d {
    Uniform,
    /// `eps + sum_i (1 + erf((theta - |t - c_i|) / eps)) / (4 theta)`,
    /// normalised to unit mass, bumps at 0.25 and 0.75 with `theta = 0.15`.
    TwoBump {
        epsilon: f64,
    },
}

impl Profile1d {
    fn raw(&self, t: f64) -> f64 {
        match self {
            Profile1d::Uniform => 1.0,
            Profile1d::TwoBump { epsilon } => {
                let theta = 0.15;
                epsilon
                    + [0.25, 0.75]
                        .iter()
                        .map(|c| (1.0 + libm::erf((theta - (t - c).abs()) / epsilon)) / (4.0 * theta))
                        .sum::<f64>()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheegerReport {
    pub h: f64,
    pub lower_bound: f64,
    pub sigma2: f64,
    pub pass: bool,
}

/// Number of interval cuts scanned for the isoperimetric constant.
pub const CHEEGER_CUTS: usize = 2048;

/// Compares `sigma_2` of the 1D weighted operator on `[0, 1]` with
/// `(h^2 / 4) inf rho^{p+r-q}`, where `h` is the smallest ratio of
/// `rho(t)^q` to the lighter side's `rho^{p+r}` mass over cuts `t`.
pub fn cheeger_check_1d(profile: &Profile1d, params: &PQRParams, n_grid: usize) -> Result<CheegerReport> {
    params.validate()?;
    if n_grid < 2 {
        return Err(Error::Parameter(format!("need at least two grid cells, got {n_grid}")));
    }
    if let Profile1d::TwoBump { epsilon } = profile {
        if !(*epsilon > 0.0) {
            return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
        }
    }
    // normalise by fine midpoint quadrature
    let fine = 1 << 16;
    let total: f64 = (0..fine)
        .map(|i| profile.raw((i as f64 + 0.5) / fine as f64))
        .sum::<f64>()
        / fine as f64;
    let rho = |t: f64| profile.raw(t) / total;
    let mq = params.p + params.r;

    // cumulative nu-mass on a fine grid, then the scan
    let cum: Vec<f64> = {
        let mut c = Vec::with_capacity(fine + 1);
        c.push(0.0);
        let mut s = 0.0;
        for i in 0..fine {
            s += rho((i as f64 + 0.5) / fine as f64).powf(mq) / fine as f64;
            c.push(s);
        }
        c
    };
    let nu_total = cum[fine];
    let mut h = f64::INFINITY;
    for k in 1..CHEEGER_CUTS {
        let t = k as f64 / CHEEGER_CUTS as f64;
        let left = cum[k * fine / CHEEGER_CUTS];
        let lighter = left.min(nu_total - left);
        h = h.min(rho(t).powf(params.q) / lighter);
    }
    let inf_ratio = (0..=fine)
        .map(|i| rho(i as f64 / fine as f64).powf(mq - params.q))
        .fold(f64::INFINITY, f64::min);
    let lower_bound = 0.25 * h * h * inf_ratio;

    // 1D P1 with midpoint quadrature
    let n = n_grid;
    let dx = 1.0 / n as f64;
    let mut edges = Vec::with_capacity(n);
    let mut mass = Vec::with_capacity(3 * n);
    for e in 0..n {
        let r = rho((e as f64 + 0.5) * dx);
        edges.push((e, e + 1, r.powf(params.q) / dx));
        let m = r.powf(mq) * dx / 6.0;
        mass.push((e, e, 2.0 * m));
        mass.push((e + 1, e + 1, 2.0 * m));
        mass.push((e, e + 1, m));
    }
    let a = Laplacian::from_edges(n + 1, edges)?;
    let b = SymCsr::from_triplets(n + 1, mass)?;
    let pairs = if n < 800 {
        dense_lowest(&a, &b, 2)?
    } else {
        lowest_pairs(&a, &b, 2, &EigenOptions::default())?
    };
    let sigma2 = pairs.values[1];
    Ok(CheegerReport {
        h,
        lower_bound,
        sigma2,
        pass: sigma2 >= lower_bound - 1e-6,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub eigenvalues: Option<Vec<f64>>,
    pub error: Option<String>,
}

/// `sigma_{j, eps}` for each `eps` on an erf-cluster density with the named
/// cluster layout on `(-1, 1)^2`. Failed rows are recorded, not fatal.
pub fn epsilon_reference_table(
    geometry: &str,
    params: &PQRParams,
    eps_list: &[f64],
    n_cells: usize,
    k: usize,
    opts: &EigenOptions,
) -> Result<Vec<EpsilonRow>> {
    if eps_list.is_empty() {
        return Err(Error::Parameter("epsilon list is empty".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Parameter("epsilon list must be strictly descending".into()));
    }
    let clusters = geometry_clusters(geometry)?;
    let mesh = StructuredMesh::new(DomainBox::centered_square(), n_cells)?;
    Ok(eps_list
        .iter()
        .map(|&eps| {
            let run = || -> Result<Vec<f64>> {
                let rho = DensityModel::erf_clusters(DomainBox::centered_square(), eps, clusters.clone())?;
                let sys = assemble_continuum(&mesh, &rho, params)?;
                Ok(solve_continuum(&sys, k, opts)?.eigenvalues)
            };
            match run() {
                Ok(v) => EpsilonRow {
                    epsilon: eps,
                    eigenvalues: Some(v),
                    error: None,
                },
                Err(e) => EpsilonRow {
                    epsilon: eps,
                    eigenvalues: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(n: usize, params: PQRParams, c: f64) -> ContinuumSystem {
        let mesh = StructuredMesh::new(DomainBox::unit_square(), n).unwrap();
        assemble_with(&mesh, |_| c, "const", &params).unwrap()
    }

    #[test]
    fn constant_density_matrices() {
        let p = PQRParams::new(1.0, 2.0, 0.0).unwrap();
        let s = unit(6, p, 1.0);
        let ones = vec![1.0; s.mesh.n_nodes()];
        let mut k1 = vec![0.0; ones.len()];
        s.stiffness.matvec(&ones, &mut k1);
        assert!(k1.iter().all(|&x| x == 0.0));
        assert!((s.mass.quad_form(&ones) - 1.0).abs() < 1e-14);
        // interior node of the standard P1 Laplacian: diagonal 4, four -1 neighbours
        let k = s.stiffness.to_sym();
        let mid = s.mesh.node_index(3, 3);
        assert!((k.get(mid, mid) - 4.0).abs() < 1e-14);
        assert!((k.get(mid, mid + 1) + 1.0).abs() < 1e-14);
        assert_eq!(k.get(mid, mid + 7 + 1), 0.0);
    }

    #[test]
    fn neumann_square_second_order() {
        let p = PQRParams::new(0.5, 1.0, 0.5).unwrap();
        let err = |n| {
            let s = unit(n, p, 1.0);
            let sp = solve_continuum(&s, 2, &EigenOptions::default()).unwrap();
            (sp.eigenvalues[1] - PI * PI).abs()
        };
        let (e16, e32) = (err(16), err(32));
        assert!(e16 / e32 > 3.5 && e16 / e32 < 4.5, "{e16} {e32}");
    }

    #[test]
    fn constant_scaling_law() {
        let p = PQRParams::new(0.3, 2.0, 0.4).unwrap();
        let a = solve_continuum(&unit(10, p, 1.0), 4, &EigenOptions::default()).unwrap();
        let c: f64 = 2.7;
        let b = solve_continuum(&unit(10, p, c), 4, &EigenOptions::default()).unwrap();
        let f = c.powf(p.q - p.p - p.r);
        for j in 1..4 {
            assert!((b.eigenvalues[j] - f * a.eigenvalues[j]).abs() <= 1e-10 * b.eigenvalues[j]);
        }
    }

    #[test]
    fn nonpositive_density_names_triangle() {
        let mesh = StructuredMesh::new(DomainBox::unit_square(), 4).unwrap();
        let p = PQRParams::new(1.0, 2.0, 1.0).unwrap();
        let e = assemble_with(&mesh, |t| if t[0] > 0.5 { 0.0 } else { 1.0 }, "bad", &p).unwrap_err();
        assert!(e.to_string().contains("triangle"));
    }

    #[test]
    fn cheeger_uniform() {
        let p = PQRParams::new(1.0, 2.0, 1.0).unwrap();
        let r = cheeger_check_1d(&Profile1d::Uniform, &p, 512).unwrap();
        assert!((r.h - 2.0).abs() < 1e-12 && (r.lower_bound - 1.0).abs() < 1e-12);
        assert!((r.sigma2 - PI * PI).abs() < 1e-3 && r.pass);
        assert!(cheeger_check_1d(&Profile1d::Uniform, &p, 1).is_err());
    }

    #[test]
    fn eps_table_rejects_bad_lists() {
        let p = PQRParams::new(0.5, 1.0, 0.5).unwrap();
        let o = EigenOptions::default();
        assert!(epsilon_reference_table("paper-2", &p, &[], 8, 3, &o).is_err());
        assert!(epsilon_reference_table("paper-2", &p, &[0.1, 0.2], 8, 3, &o).is_err());
        let rows = epsilon_reference_table("paper-2", &p, &[0.1, 0.05], 8, 3, &o).unwrap();
        assert!(rows.iter().all(|r| r.eigenvalues.as_ref().map(|v| v.len()) == Some(3)));
    }
}
