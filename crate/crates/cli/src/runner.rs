//! Run orchestration: problem scheduling across radiation modes and
//! diffraction symmetry blocks, automatic duration extension, and result
//! persistence with a reproducibility manifest.

use crate::config::RunConfig;
use hydrosem::assembly::AssemblyError;
use hydrosem::mesh::{apply_stretching, msh, HybridMesh, MeshError};
use hydrosem::post::{self, HydroResult, NondimSpec};
use hydrosem::sim::{
    auto_duration, compute_timegrid, run_diffraction, run_radiation, solve_infinite_frequency,
    BodyRecord, DiffractionProblem, ModeShape, ProblemOperators, RadiationProblem, SimContext,
    SimError, TimeGrid,
};
use hydrosem::symmetry::{diffraction_blocks, required_block, SymmetryError};
use hydrosem::waves::{omega_limit, ForcingKind, PseudoImpulse, WavesError};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Waves(#[from] WavesError),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    #[error(transparent)]
    Post(#[from] hydrosem::post::PostError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scheduling error: {0}")]
    Scheduling(String),
}

fn write_file(path: &Path, content: &str) -> Result<(), RunError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, content).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load a mesh file by extension: `.msh` (MSH 4.1 ASCII) or the internal
/// `.hsm` text format.
pub fn load_mesh(path: &Path) -> Result<HybridMesh, RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mesh = if path.extension().and_then(|e| e.to_str()) == Some("hsm") {
        msh::parse_internal(&text)?
    } else {
        msh::parse_msh(&text)?
    };
    Ok(mesh)
}

/// Summary of one completed run.
#[derive(Debug, Default)]
pub struct RunSummary {
    pub files: Vec<String>,
    pub warnings: Vec<String>,
    pub manifest: String,
}

struct ProblemOutcome {
    label: String,
    record: BodyRecord,
    grid: TimeGrid,
    extended: usize,
}

/// Run a radiation or diffraction problem, extending the duration until
/// the decay criterion holds or the cap is reached.
fn run_with_policy(
    ctx: &SimContext,
    ops: &ProblemOperators,
    label: &str,
    impulse: &PseudoImpulse,
    duration: Option<f64>,
    cfl: f64,
    order: usize,
    run: &dyn Fn(&TimeGrid) -> Result<BodyRecord, SimError>,
) -> Result<ProblemOutcome, RunError> {
    let _ = ops;
    let (t_default, t_cap) = auto_duration(impulse);
    let mut t_total = duration.unwrap_or(t_default);
    let mut extended = 0;
    loop {
        let grid = compute_timegrid(ctx.mesh, order, &ctx.env, cfl, t_total)?;
        let record = run(&grid)?;
        let decayed = record.decay_ratio <= 1e-4;
        if decayed || duration.is_some() || t_total >= t_cap || extended >= 3 {
            return Ok(ProblemOutcome {
                label: label.to_string(),
                record,
                grid,
                extended,
            });
        }
        t_total = (t_total * 1.5).min(t_cap);
        extended += 1;
    }
}

pub fn run(cfg: &RunConfig, threads: usize) -> Result<RunSummary, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    use rayon::prelude::*;

    let mut mesh = load_mesh(&cfg.mesh_path)?;
    if let Some(spec) = &cfg.stretching {
        mesh = apply_stretching(&mesh, spec)?;
    }
    let ctx = SimContext::new(&mesh, cfg.order, cfg.environment, cfg.zones.clone(), cfg.solver)?;

    // the full requested mode set
    let mut modes: Vec<ModeShape> = cfg
        .radiation_modes
        .iter()
        .map(|&k| ModeShape::Rigid {
            k,
            reference: cfg.body_reference,
        })
        .collect();
    for g in &cfg.generalized {
        if !ctx.mesh.has_tag(g.surface) {
            return Err(RunError::Scheduling(format!(
                "generalized mode {} references tag {} absent from the mesh",
                g.index,
                g.surface.name()
            )));
        }
        let expr = g.normal.clone();
        modes.push(ModeShape::Generalized {
            index: g.index,
            surface: g.surface,
            normal: Arc::new(move |p| expr.eval(p)),
            parity: g.parity,
        });
    }

    // scheduling completeness: every requested force must route to a block
    let blocks = diffraction_blocks(&ctx.planes);
    if let Some(d) = &cfg.diffraction {
        for &j in &d.forces {
            let mode = modes
                .iter()
                .find(|m| m.index() == j)
                .cloned()
                .or_else(|| {
                    (j >= 1 && j <= 6).then(|| ModeShape::Rigid {
                        k: j,
                        reference: cfg.body_reference,
                    })
                })
                .ok_or_else(|| {
                    RunError::Scheduling(format!("force {j} has no mode definition"))
                })?;
            required_block(&blocks, &mode.parity()?)?;
        }
    }

    let nondim = NondimSpec {
        length: cfg.length_scale,
    };
    let mut summary = RunSummary::default();
    let mut manifest = String::new();
    let _ = writeln!(manifest, "{{");
    let _ = writeln!(manifest, "  \"solver\": \"hydrosem {}\",", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(manifest, "  \"mesh\": {{");
    let _ = writeln!(manifest, "    \"path\": {:?},", cfg.mesh_path.display().to_string());
    let _ = writeln!(manifest, "    \"elements\": {},", mesh.element_count());
    let _ = writeln!(manifest, "    \"prisms\": {},", mesh.prisms.len());
    let _ = writeln!(manifest, "    \"tets\": {},", mesh.tets.len());
    let _ = writeln!(manifest, "    \"n_dof\": {},", ctx.dofmap.n_dof);
    let _ = writeln!(manifest, "    \"order\": {}", cfg.order);
    let _ = writeln!(manifest, "  }},");
    let _ = writeln!(
        manifest,
        "  \"solver_config\": {{ \"rel_tolerance\": {:e}, \"preconditioner\": {:?} }},",
        cfg.solver.rel_tolerance,
        format!("{:?}", cfg.solver.preconditioner)
    );
    let _ = writeln!(manifest, "  \"problems\": [");
    let mut problem_entries: Vec<String> = Vec::new();

    // ---------------- radiation ----------------
    if let Some((s, eps)) = cfg.radiation_impulse {
        if !modes.is_empty() {
            let impulse = PseudoImpulse::new(s, eps)?;
            let band = omega_limit(&impulse, ForcingKind::Velocity);
            let omegas = band.grid(cfg.omega_points);

            // jobs: per forced mode, run with its own plane flags
            let jobs: Vec<(usize, ModeShape, Vec<ModeShape>)> = modes
                .iter()
                .map(|m| {
                    let parity = m.parity().map_err(RunError::from)?;
                    // record all requested modes whose parity matches on
                    // every present plane (others vanish by symmetry)
                    let rec: Vec<ModeShape> = modes
                        .iter()
                        .filter(|r| {
                            r.parity()
                                .map(|rp| {
                                    ctx.planes.iter().all(|&pl| {
                                        hydrosem::symmetry::parity_flag(&rp, pl)
                                            == hydrosem::symmetry::parity_flag(&parity, pl)
                                    })
                                })
                                .unwrap_or(false)
                        })
                        .cloned()
                        .collect();
                    Ok((m.index(), m.clone(), rec))
                })
                .collect::<Result<_, RunError>>()?;

            let results: Vec<Result<(usize, ProblemOutcome, Vec<f64>, Vec<usize>), RunError>> =
                jobs.par_iter()
                    .map(|(k, mode, rec)| {
                        let flags = ctx.plane_flags(&mode.parity()?);
                        let ops = ProblemOperators::build(&ctx, &flags)?;
                        let problem = RadiationProblem {
                            mode: mode.clone(),
                            impulse,
                            record: rec.clone(),
                        };
                        let outcome = run_with_policy(
                            &ctx,
                            &ops,
                            &format!("radiation k={k}"),
                            &impulse,
                            cfg.duration,
                            cfg.cfl,
                            cfg.order,
                            &|grid| run_radiation(&ctx, &ops, &problem, grid),
                        )?;
                        let a_inf = solve_infinite_frequency(&ctx, &ops, mode, rec)?;
                        Ok((*k, outcome, a_inf, rec.iter().map(|m| m.index()).collect()))
                    })
                    .collect();

            let mut result = HydroResult {
                omegas: omegas.clone(),
                omega_limit: Some(band),
                ..Default::default()
            };
            result.provenance.push((
                "mesh".into(),
                format!("{} ({} elements)", cfg.mesh_path.display(), mesh.element_count()),
            ));
            result.provenance.push(("order".into(), cfg.order.to_string()));
            result.provenance.push((
                "impulse".into(),
                format!("s = {s}, epsilon = {eps}, kind = velocity"),
            ));
            for r in results {
                let (k, outcome, a_inf, rec_idx) = r?;
                let coeffs =
                    post::added_mass_damping(&outcome.record, &impulse, &omegas, ctx.env.density)?;
                for (j, (a, b)) in coeffs {
                    result.added_mass.insert((j, k), a);
                    result.damping.insert((j, k), b);
                }
                for (j, v) in rec_idx.iter().zip(&a_inf) {
                    result.a_infinity.insert((*j, k), *v);
                }
                for w in &outcome.record.warnings {
                    summary.warnings.push(format!("{}: {w}", outcome.label));
                }
                problem_entries.push(format!(
                    "    {{ \"problem\": {:?}, \"dt\": {:e}, \"steps\": {}, \"omega_limit\": [{:e}, {:e}], \"decay_ratio\": {:e}, \"cg_iterations\": {}, \"extended\": {} }}",
                    outcome.label,
                    outcome.grid.dt,
                    outcome.grid.n_steps,
                    band.lo,
                    band.hi,
                    outcome.record.decay_ratio,
                    outcome.record.solver_iterations,
                    outcome.extended
                ));
                if cfg.write_time_series {
                    let path = cfg.output_dir.join(format!("radiation_k{k}_force.csv"));
                    write_file(&path, &post::time_series_csv(&outcome.record, ctx.env.density)?)?;
                    summary.files.push(path.display().to_string());
                }
            }
            let path = cfg.output_dir.join("radiation.csv");
            write_file(&path, &result.to_csv(&nondim, &ctx.env))?;
            summary.files.push(path.display().to_string());
            if cfg.write_jsonl {
                let path = cfg.output_dir.join("radiation.jsonl");
                write_file(&path, &result.to_jsonl(&nondim, &ctx.env))?;
                summary.files.push(path.display().to_string());
            }
        }
    }

    // ---------------- diffraction ----------------
    if let Some(d) = &cfg.diffraction {
        if !d.forces.is_empty() {
            let impulse = PseudoImpulse::new(d.impulse.0, d.impulse.1)?;
            let band = omega_limit(&impulse, ForcingKind::Elevation);
            let omegas = band.grid(cfg.omega_points);

            // forces grouped by the block that carries them
            let mut by_block: BTreeMap<&'static str, Vec<ModeShape>> = BTreeMap::new();
            for &j in &d.forces {
                let mode = modes
                    .iter()
                    .find(|m| m.index() == j)
                    .cloned()
                    .unwrap_or(ModeShape::Rigid {
                        k: j,
                        reference: cfg.body_reference,
                    });
                let block = required_block(&blocks, &mode.parity()?)?;
                by_block.entry(block.label).or_default().push(mode);
            }

            let block_jobs: Vec<(&'static str, Vec<ModeShape>)> =
                by_block.into_iter().collect();
            let results: Vec<Result<(&'static str, ProblemOutcome, Vec<ModeShape>), RunError>> =
                block_jobs
                    .par_iter()
                    .map(|(label, rec)| {
                        let block = *blocks.iter().find(|b| b.label == *label).unwrap();
                        let mut flags = Vec::new();
                        for &pl in &ctx.planes {
                            let th = match pl {
                                hydrosem::symmetry::Plane::Y0 => block.theta_y0_plane(),
                                hydrosem::symmetry::Plane::X0 => block.theta_x0_plane(),
                            };
                            flags.push((pl, th.unwrap_or(true)));
                        }
                        let ops = ProblemOperators::build(&ctx, &flags)?;
                        let problem = DiffractionProblem {
                            block,
                            heading: d.heading,
                            impulse,
                            record: rec.clone(),
                        };
                        let outcome = run_with_policy(
                            &ctx,
                            &ops,
                            &format!("diffraction {label}"),
                            &impulse,
                            cfg.duration,
                            cfg.cfl,
                            cfg.order,
                            &|grid| run_diffraction(&ctx, &ops, &problem, grid),
                        )?;
                        Ok((*label, outcome, rec.clone()))
                    })
                    .collect();

            let mut result = HydroResult {
                omegas: omegas.clone(),
                omega_limit: Some(band),
                ..Default::default()
            };
            result.provenance.push((
                "mesh".into(),
                format!("{} ({} elements)", cfg.mesh_path.display(), mesh.element_count()),
            ));
            result.provenance.push(("order".into(), cfg.order.to_string()));
            result.provenance.push((
                "impulse".into(),
                format!(
                    "s = {}, epsilon = {}, kind = elevation, heading = {} rad",
                    d.impulse.0, d.impulse.1, d.heading
                ),
            ));
            for r in results {
                let (label, outcome, rec) = r?;
                let xs = post::excitation_forces(&outcome.record, &impulse, &omegas, ctx.env.density)?;
                let block = *blocks.iter().find(|b| b.label == label).unwrap();
                let fk = post::froude_krylov(
                    &ctx.body,
                    &rec,
                    &block,
                    d.heading,
                    &ctx.env,
                    &omegas,
                    ctx.force_multiplier,
                )?;
                for (j, x) in xs {
                    result.excitation_scattered.insert(j, x);
                }
                for (j, x) in fk {
                    result.excitation_froude_krylov.insert(j, x);
                }
                for w in &outcome.record.warnings {
                    summary.warnings.push(format!("{}: {w}", outcome.label));
                }
                problem_entries.push(format!(
                    "    {{ \"problem\": {:?}, \"dt\": {:e}, \"steps\": {}, \"omega_limit\": [{:e}, {:e}], \"decay_ratio\": {:e}, \"cg_iterations\": {}, \"extended\": {} }}",
                    outcome.label,
                    outcome.grid.dt,
                    outcome.grid.n_steps,
                    band.lo,
                    band.hi,
                    outcome.record.decay_ratio,
                    outcome.record.solver_iterations,
                    outcome.extended
                ));
            }
            let path = cfg.output_dir.join("diffraction.csv");
            write_file(&path, &result.to_csv(&nondim, &ctx.env))?;
            summary.files.push(path.display().to_string());
            if cfg.write_jsonl {
                let path = cfg.output_dir.join("diffraction.jsonl");
                write_file(&path, &result.to_jsonl(&nondim, &ctx.env))?;
                summary.files.push(path.display().to_string());
            }
        }
    }

    let _ = writeln!(manifest, "{}", problem_entries.join(",\n"));
    let _ = writeln!(manifest, "  ]");
    let _ = writeln!(manifest, "}}");
    let path = cfg.output_dir.join("manifest.json");
    write_file(&path, &manifest)?;
    summary.files.push(path.display().to_string());
    summary.manifest = manifest;
    Ok(summary)
}
