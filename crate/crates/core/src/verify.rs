//! Manufactured-solution harness and convergence studies for the discrete
//! Laplace operator.
//!
//! The Laplace problem is recast into a Poisson problem with a known smooth
//! solution; Dirichlet data is imposed on the top (free-surface) boundary
//! and Neumann data everywhere else. Errors use the exact global L1 norm
//! evaluated with the assembly quadrature.

use crate::assembly::{
    assemble_neumann_load, assemble_source_load, assemble_stiffness, build_dofmap,
    integrate_volume, AssemblyError, DirichletSystem,
};
use crate::linalg::{solve_spd, SolveError, SolverConfig};
use crate::mesh::{BoundaryTag, HybridMesh};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("statistics error: {0}")]
    Statistics(String),
}

/// Closed-form manufactured fields.
#[derive(Debug, Clone, Copy)]
pub enum MmsField {
    /// cos(kx (x-x0)) cos(ky (y-y0)) cos(kz (z-z0))
    Trig { k: [f64; 3], x0: [f64; 3] },
    /// a0 + a1 x + a2 y + a3 z (harmonic)
    Linear { a: [f64; 4] },
    /// sin(x) sin(y) sin(z), laplacian -3 sin sin sin
    ProductSin,
}

impl MmsField {
    /// Default study field over a box with extents (lx, ly, h): one half
    /// cosine wave per direction.
    pub fn default_for_box(lx: f64, ly: f64, h: f64) -> MmsField {
        use std::f64::consts::PI;
        MmsField::Trig {
            k: [PI / lx, PI / ly, PI / h],
            x0: [0.0, 0.0, 0.0],
        }
    }

    pub fn eval(&self, p: [f64; 3]) -> f64 {
        match *self {
            MmsField::Trig { k, x0 } => {
                (k[0] * (p[0] - x0[0])).cos()
                    * (k[1] * (p[1] - x0[1])).cos()
                    * (k[2] * (p[2] - x0[2])).cos()
            }
            MmsField::Linear { a } => a[0] + a[1] * p[0] + a[2] * p[1] + a[3] * p[2],
            MmsField::ProductSin => p[0].sin() * p[1].sin() * p[2].sin(),
        }
    }

    pub fn grad(&self, p: [f64; 3]) -> [f64; 3] {
        match *self {
            MmsField::Trig { k, x0 } => {
                let cx = (k[0] * (p[0] - x0[0])).cos();
                let cy = (k[1] * (p[1] - x0[1])).cos();
                let cz = (k[2] * (p[2] - x0[2])).cos();
                let sx = (k[0] * (p[0] - x0[0])).sin();
                let sy = (k[1] * (p[1] - x0[1])).sin();
                let sz = (k[2] * (p[2] - x0[2])).sin();
                [-k[0] * sx * cy * cz, -k[1] * cx * sy * cz, -k[2] * cx * cy * sz]
            }
            MmsField::Linear { a } => [a[1], a[2], a[3]],
            MmsField::ProductSin => [
                p[0].cos() * p[1].sin() * p[2].sin(),
                p[0].sin() * p[1].cos() * p[2].sin(),
                p[0].sin() * p[1].sin() * p[2].cos(),
            ],
        }
    }

    pub fn laplacian(&self, p: [f64; 3]) -> f64 {
        match *self {
            MmsField::Trig { k, .. } => {
                -(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * self.eval(p)
            }
            MmsField::Linear { .. } => 0.0,
            MmsField::ProductSin => -3.0 * self.eval(p),
        }
    }
}

/// A manufactured case: the field plus the boundary assignment (Dirichlet
/// on the top boundary, Neumann on the rest).
#[derive(Debug, Clone, Copy)]
pub struct MmsCase {
    pub field: MmsField,
}

/// Solve the manufactured Poisson problem and return the global L1 error.
pub fn run_mms(mesh: &HybridMesh, p: usize, case: &MmsCase) -> Result<f64, VerifyError> {
    let (err, _) = run_mms_detailed(mesh, p, case)?;
    Ok(err)
}

/// All-Neumann variant: flux data on every boundary, the singular system
/// solved with nullspace deflation, and the error measured after matching
/// the mean of the discrete solution to the manufactured field.
pub fn run_mms_all_neumann(
    mesh: &HybridMesh,
    p: usize,
    case: &MmsCase,
) -> Result<f64, VerifyError> {
    let dofmap = build_dofmap(mesh, p)?;
    let a = assemble_stiffness(mesh, &dofmap)?;
    let field = case.field;
    let mut b = assemble_source_load(mesh, &dofmap, |x| -field.laplacian(x))?;
    let mut tags: Vec<BoundaryTag> = mesh.boundary_facets.iter().map(|f| f.tag).collect();
    tags.sort_unstable();
    tags.dedup();
    for tag in tags {
        let bn = assemble_neumann_load(mesh, &dofmap, tag, |x, n| {
            let g = field.grad(x);
            g[0] * n[0] + g[1] * n[1] + g[2] * n[2]
        })?;
        for (bi, v) in b.iter_mut().zip(&bn) {
            *bi += v;
        }
    }
    let cfg = SolverConfig {
        rel_tolerance: 1e-12,
        ..Default::default()
    };
    let (mut u, _) = crate::linalg::solve_spd_deflated(&a, &b, &cfg)?;
    // fix the additive constant against the manufactured field
    let volume = integrate_volume(mesh, &dofmap, &u, |_, _| 1.0)?;
    let mismatch = integrate_volume(mesh, &dofmap, &u, |x, uh| field.eval(x) - uh)? / volume;
    for v in &mut u {
        *v += mismatch;
    }
    integrate_volume(mesh, &dofmap, &u, |x, uh| (field.eval(x) - uh).abs())
        .map_err(VerifyError::from)
}

/// As [`run_mms`], also returning the dof count.
pub fn run_mms_detailed(
    mesh: &HybridMesh,
    p: usize,
    case: &MmsCase,
) -> Result<(f64, usize), VerifyError> {
    let dofmap = build_dofmap(mesh, p)?;
    let a = assemble_stiffness(mesh, &dofmap)?;

    // volume source: weak form of lap(u) = f gives
    // K u = -(f, v) + boundary flux terms
    let field = case.field;
    let mut b = assemble_source_load(mesh, &dofmap, |x| -field.laplacian(x))?;

    // Neumann data on every non-top tag
    let mut tags: Vec<BoundaryTag> = mesh.boundary_facets.iter().map(|f| f.tag).collect();
    tags.sort_unstable();
    tags.dedup();
    for tag in tags {
        if tag == BoundaryTag::FreeSurface {
            continue;
        }
        let bn = assemble_neumann_load(mesh, &dofmap, tag, |x, n| {
            let g = field.grad(x);
            g[0] * n[0] + g[1] * n[1] + g[2] * n[2]
        })?;
        for (bi, v) in b.iter_mut().zip(&bn) {
            *bi += v;
        }
    }

    // Dirichlet on the top boundary
    let constrained = dofmap
        .boundary_dofs
        .get(&BoundaryTag::FreeSurface)
        .cloned()
        .unwrap_or_default();
    if constrained.is_empty() {
        return Err(VerifyError::Statistics(
            "manufactured case needs a free-surface (top) boundary for Dirichlet data".into(),
        ));
    }
    let sys = DirichletSystem::new(&a, &constrained);
    let g: Vec<f64> = sys
        .constrained
        .iter()
        .map(|&c| field.eval(dofmap.dof_coords[c]))
        .collect();
    let rhs = sys.rhs(&a, &b, &g);
    let mut x0 = vec![0.0; dofmap.n_dof];
    sys.seed(&mut x0, &g);
    let cfg = SolverConfig {
        rel_tolerance: 1e-12,
        ..Default::default()
    };
    let (u, _) = solve_spd(&sys.modified, &rhs, &cfg, Some(&x0))?;

    let err = integrate_volume(mesh, &dofmap, &u, |x, uh| (field.eval(x) - uh).abs())?;
    Ok((err, dofmap.n_dof))
}

/// One row of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n_elm: usize,
    pub n_dof: usize,
    pub order: usize,
    pub h_max: f64,
    pub error: f64,
}

/// Study results with fitted algebraic rates (h studies only).
#[derive(Debug, Clone, Default)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// fitted L1 rate per polynomial order
    pub rates: Vec<(usize, f64)>,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_elm,n_dof,order,h_max,l1_error\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.17e},{:.17e}",
                r.n_elm, r.n_dof, r.order, r.h_max, r.error
            );
        }
        if !self.rates.is_empty() {
            out.push_str("# fitted rates\n");
            for (p, rate) in &self.rates {
                let _ = writeln!(out, "# P={p}: {rate:.4}");
            }
        }
        out
    }
}

/// Longest element edge of the mesh.
pub fn h_max(mesh: &HybridMesh) -> f64 {
    let mut h: f64 = 0.0;
    let edge = |a: [f64; 3], b: [f64; 3]| {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    };
    for t in &mesh.tets {
        for i in 0..4 {
            for j in (i + 1)..4 {
                h = h.max(edge(mesh.vertices[t[i]], mesh.vertices[t[j]]));
            }
        }
    }
    for p in &mesh.prisms {
        for tri in [[p[0], p[1], p[2]], [p[3], p[4], p[5]]] {
            for i in 0..3 {
                h = h.max(edge(mesh.vertices[tri[i]], mesh.vertices[tri[(i + 1) % 3]]));
            }
        }
        for i in 0..3 {
            h = h.max(edge(mesh.vertices[p[i]], mesh.vertices[p[i + 3]]));
        }
    }
    h
}

/// Error floor below which rate fits exclude data (round-off dominated).
pub const ROUND_OFF_FLOOR: f64 = 1e-13;

/// Sweep polynomial orders on a fixed mesh.
pub fn p_sweep(
    mesh: &HybridMesh,
    p_range: std::ops::RangeInclusive<usize>,
    case: &MmsCase,
) -> Result<ConvergenceReport, VerifyError> {
    let mut report = ConvergenceReport::default();
    let h = h_max(mesh);
    for p in p_range {
        let (error, n_dof) = run_mms_detailed(mesh, p, case)?;
        report.rows.push(ConvergenceRow {
            n_elm: mesh.element_count(),
            n_dof,
            order: p,
            h_max: h,
            error,
        });
    }
    Ok(report)
}

/// Sweep a nested mesh family over a range of polynomial orders and fit
/// the algebraic rate per order.
pub fn h_sweep(
    meshes: &[HybridMesh],
    p_range: std::ops::RangeInclusive<usize>,
    case: &MmsCase,
) -> Result<ConvergenceReport, VerifyError> {
    if meshes.len() < 3 {
        return Err(VerifyError::Statistics(format!(
            "h study needs at least 3 mesh levels, got {}",
            meshes.len()
        )));
    }
    let mut report = ConvergenceReport::default();
    for p in p_range {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for mesh in meshes {
            let h = h_max(mesh);
            let (error, n_dof) = run_mms_detailed(mesh, p, case)?;
            report.rows.push(ConvergenceRow {
                n_elm: mesh.element_count(),
                n_dof,
                order: p,
                h_max: h,
                error,
            });
            if error > 10.0 * ROUND_OFF_FLOOR {
                xs.push(h.ln());
                ys.push(error.ln());
            }
        }
        if xs.len() >= 2 {
            report.rates.push((p, least_squares_slope(&xs, &ys)));
        }
    }
    Ok(report)
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - xm) * (y - ym);
        den += (x - xm) * (x - xm);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::gen::{tank, TankSpec};

    #[test]
    fn linear_field_is_exact() {
        let m = tank(&TankSpec::uniform_box(2.0, 2.0, 2.0, 2, 2, 3)).unwrap();
        let case = MmsCase {
            field: MmsField::Linear {
                a: [0.0, 1.0, 2.0, -1.0],
            },
        };
        for p in [1, 2] {
            let err = run_mms(&m, p, &case).unwrap();
            assert!(err < 1e-9, "P={p}: {err}");
        }
    }

    #[test]
    fn forcing_consistent_with_field() {
        // spot-check f = lap(phi) by central differences at random-ish points
        let field = MmsField::Trig {
            k: [0.9, 1.3, 0.7],
            x0: [0.1, -0.2, 0.4],
        };
        let h = 1e-4;
        for &p in &[[0.3, 0.4, -0.5], [1.1, -0.7, -1.9], [0.0, 0.2, -0.1]] {
            let mut lap = 0.0;
            for d in 0..3 {
                let mut pp = p;
                let mut pm = p;
                pp[d] += h;
                pm[d] -= h;
                lap += field.eval(pp) + field.eval(pm) - 2.0 * field.eval(p);
            }
            lap /= h * h;
            let exact = field.laplacian(p);
            assert!(
                (lap - exact).abs() < 1e-6 * exact.abs().max(1.0),
                "{lap} vs {exact}"
            );
        }
    }

    #[test]
    fn product_sin_identity() {
        let field = MmsField::ProductSin;
        let p = [0.3, 0.7, -0.2];
        assert!((field.laplacian(p) + 3.0 * field.eval(p)).abs() < 1e-14);
    }

    /// quarter-wave study field, well resolved already on coarse grids
    fn study_field() -> MmsField {
        MmsField::Trig {
            k: [0.39269908169872414; 3],
            x0: [0.3, 0.1, 0.2],
        }
    }

    #[test]
    fn p_sweep_decays_superalgebraically() {
        let m = tank(&TankSpec::uniform_box(2.0, 2.0, 2.0, 2, 2, 3)).unwrap();
        let case = MmsCase {
            field: study_field(),
        };
        let report = p_sweep(&m, 1..=4, &case).unwrap();
        let errs: Vec<f64> = report.rows.iter().map(|r| r.error).collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "no monotone decay: {errs:?}");
        }
        // at least 4 orders over P = 1..4 on this coarse mesh
        assert!(
            errs[0] / errs[3] > 1e4,
            "insufficient spectral decay: {errs:?}"
        );
    }

    #[test]
    fn h_sweep_rate_close_to_p_plus_one() {
        let meshes: Vec<_> = [2usize, 4, 8]
            .iter()
            .map(|&n| tank(&TankSpec::uniform_box(2.0, 2.0, 2.0, n, n, n)).unwrap())
            .collect();
        let case = MmsCase {
            field: study_field(),
        };
        let report = h_sweep(&meshes, 1..=1, &case).unwrap();
        let (_, rate) = report.rates[0];
        assert!((rate - 2.0).abs() < 0.3, "P=1 rate {rate}");
    }

    #[test]
    fn error_invariant_under_rigid_translation() {
        let spec = TankSpec::uniform_box(2.0, 2.0, 2.0, 2, 2, 3);
        let m = tank(&spec).unwrap();
        let shift = [3.7, -1.2, 0.0];
        let shifted = m
            .with_morphed_vertices(|v| [v[0] + shift[0], v[1] + shift[1], v[2] + shift[2]])
            .unwrap();
        let case = MmsCase {
            field: MmsField::Trig {
                k: [1.1, 0.8, 0.9],
                x0: [0.0, 0.0, 0.0],
            },
        };
        let case_shifted = MmsCase {
            field: MmsField::Trig {
                k: [1.1, 0.8, 0.9],
                x0: shift,
            },
        };
        let e1 = run_mms(&m, 2, &case).unwrap();
        let e2 = run_mms(&shifted, 2, &case_shifted).unwrap();
        assert!((e1 - e2).abs() < 1e-9 * e1.max(1e-12), "{e1} vs {e2}");
    }

    #[test]
    fn all_neumann_deflated_solve_converges() {
        let case = MmsCase {
            field: study_field(),
        };
        let coarse = tank(&TankSpec::uniform_box(2.0, 2.0, 2.0, 2, 2, 2)).unwrap();
        let fine = tank(&TankSpec::uniform_box(2.0, 2.0, 2.0, 4, 4, 4)).unwrap();
        let e1 = run_mms_all_neumann(&coarse, 2, &case).unwrap();
        let e2 = run_mms_all_neumann(&fine, 2, &case).unwrap();
        let rate = (e1 / e2).log2();
        assert!(rate > 2.3, "all-Neumann rate {rate:.2} ({e1:.3e} -> {e2:.3e})");
    }

    #[test]
    fn zero_field_gives_zero_error() {
        let m = tank(&TankSpec::uniform_box(2.0, 2.0, 2.0, 2, 2, 2)).unwrap();
        let case = MmsCase {
            field: MmsField::Linear { a: [0.0; 4] },
        };
        let err = run_mms(&m, 2, &case).unwrap();
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn too_few_levels_rejected() {
        let m = tank(&TankSpec::uniform_box(2.0, 2.0, 2.0, 2, 2, 2)).unwrap();
        let case = MmsCase {
            field: MmsField::default_for_box(2.0, 2.0, 2.0),
        };
        let meshes = vec![m.clone(), m];
        assert!(matches!(
            h_sweep(&meshes, 1..=1, &case),
            Err(VerifyError::Statistics(_))
        ));
    }
}
