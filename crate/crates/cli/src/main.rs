//! Command-line front end: run configuration, verification sweeps, mesh
//! inspection and generation, and impulse diagnostics.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod config;
mod expr;
mod meshes;
mod runner;

use clap::{Parser, Subcommand};
use hydrosem::mesh::{msh, BoundaryTag};
use hydrosem::verify::{h_sweep, p_sweep, run_mms, MmsCase, MmsField};
use hydrosem::waves::{omega_limit, ForcingKind, PseudoImpulse};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hydrosem",
    about = "Spectral-element radiation/diffraction solver for floating bodies",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// worker threads for independent problems (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// seed for randomized property tests (accepted for reproducibility
    /// scripts; deterministic commands ignore it)
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the radiation/diffraction problems of a configuration file
    Run {
        /// TOML run configuration
        #[arg(long)]
        config: PathBuf,
        /// override the configured output directory
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Solve one manufactured Poisson problem and print the L1 error
    Mms {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        order: usize,
    },
    /// Spectral convergence sweep over polynomial orders on one mesh
    PSweep {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 1)]
        min_order: usize,
        #[arg(long, default_value_t = 6)]
        max_order: usize,
        /// write the report CSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Algebraic convergence sweep over a nested mesh family
    HSweep {
        /// mesh files, coarse to fine (at least 3)
        #[arg(long, num_args = 3..)]
        meshes: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        min_order: usize,
        #[arg(long, default_value_t = 3)]
        max_order: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print mesh statistics and boundary tags
    InspectMesh {
        mesh: PathBuf,
        /// also report the CFL node spacing at this order
        #[arg(long, default_value_t = 2)]
        order: usize,
    },
    /// Report the trusted frequency band of a pseudo-impulse on a mesh
    ImpulseDiagnose {
        #[arg(long)]
        mesh: PathBuf,
        /// impulse width parameter s [1/s]
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 9.81)]
        gravity: f64,
        #[arg(long)]
        depth: f64,
    },
    /// Write a built-in desk-scale mesh as MSH 4.1
    GenMesh {
        #[command(subcommand)]
        preset: MeshPreset,
    },
}

#[derive(Subcommand)]
enum MeshPreset {
    /// Empty box tank centered on the origin
    Box {
        #[arg(long, default_value_t = 8.0)]
        lx: f64,
        #[arg(long, default_value_t = 8.0)]
        ly: f64,
        #[arg(long, default_value_t = 2.0)]
        depth: f64,
        #[arg(long, default_value_t = 8)]
        nx: usize,
        #[arg(long, default_value_t = 8)]
        ny: usize,
        #[arg(long, default_value_t = 3)]
        nz: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Floating rectangular body in a centered tank
    BodyBox {
        #[arg(long, default_value_t = 8.0)]
        lx: f64,
        #[arg(long, default_value_t = 4.0)]
        depth: f64,
        #[arg(long, default_value_t = 8)]
        nx: usize,
        #[arg(long, default_value_t = 4)]
        nz: usize,
        /// body half width in cells
        #[arg(long, default_value_t = 2)]
        body_cells: usize,
        /// draft in vertical layers
        #[arg(long, default_value_t = 2)]
        draft_cells: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quarter-domain floating vertical cylinder with two symmetry planes
    Cylinder {
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 1.0)]
        draft: f64,
        #[arg(long, default_value_t = 3.0)]
        depth: f64,
        #[arg(long, default_value_t = 6.0)]
        tank_radius: f64,
        #[arg(long, default_value_t = 8)]
        far_cells: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Moonpool box with the chamber lid tagged special1
    Moonpool {
        #[arg(long, default_value_t = 12.0)]
        lx: f64,
        #[arg(long, default_value_t = 3.0)]
        depth: f64,
        #[arg(long, default_value_t = 12)]
        nx: usize,
        #[arg(long, default_value_t = 3)]
        nz: usize,
        #[arg(long, default_value_t = 4)]
        body_cells: usize,
        #[arg(long, default_value_t = 2)]
        chamber_cells: usize,
        #[arg(long, default_value_t = 1)]
        draft_cells: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Deeply submerged sphere (all-tet shell mesh)
    SubmergedSphere {
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 4.0)]
        center_depth: f64,
        #[arg(long, default_value_t = 0.5)]
        cell: f64,
        #[arg(long, default_value_t = 8)]
        plan_cells: usize,
        #[arg(long, default_value_t = 16)]
        depth_cells: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    // restore default SIGPIPE so piping into head/less terminates cleanly
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(AppError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

enum AppError {
    Config(String),
    Numerical(String),
}

impl From<runner::RunError> for AppError {
    fn from(e: runner::RunError) -> Self {
        AppError::Numerical(e.to_string())
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> AppError {
    AppError::Numerical(e.to_string())
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    let threads = cli.threads;
    let _ = cli.seed;
    match cli.command {
        Command::Run { config, output_dir } => {
            let mut cfg = config::load_config(&config)
                .map_err(|e| AppError::Config(e.to_string()))?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let threads = if threads == 0 {
                std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
            } else {
                threads
            };
            let summary = runner::run(&cfg, threads)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for f in &summary.files {
                println!("wrote {f}");
            }
            Ok(())
        }
        Command::Mms { mesh, order } => {
            let m = runner::load_mesh(&mesh)?;
            let (lo, hi) = m.bbox();
            let case = MmsCase {
                field: MmsField::default_for_box(hi[0] - lo[0], hi[1] - lo[1], -lo[2]),
            };
            let err = run_mms(&m, order, &case).map_err(numerical)?;
            println!("l1_error = {err:.6e}");
            Ok(())
        }
        Command::PSweep {
            mesh,
            min_order,
            max_order,
            out,
        } => {
            let m = runner::load_mesh(&mesh)?;
            let (lo, hi) = m.bbox();
            let case = MmsCase {
                field: MmsField::default_for_box(hi[0] - lo[0], hi[1] - lo[1], -lo[2]),
            };
            let report = p_sweep(&m, min_order..=max_order, &case).map_err(numerical)?;
            print!("{}", report.to_csv());
            if let Some(path) = out {
                std::fs::write(&path, report.to_csv()).map_err(numerical)?;
            }
            Ok(())
        }
        Command::HSweep {
            meshes,
            min_order,
            max_order,
            out,
        } => {
            let family: Vec<_> = meshes
                .iter()
                .map(|p| runner::load_mesh(p))
                .collect::<Result<_, _>>()?;
            let (lo, hi) = family[0].bbox();
            let case = MmsCase {
                field: MmsField::default_for_box(hi[0] - lo[0], hi[1] - lo[1], -lo[2]),
            };
            let report = h_sweep(&family, min_order..=max_order, &case).map_err(numerical)?;
            print!("{}", report.to_csv());
            if let Some(path) = out {
                std::fs::write(&path, report.to_csv()).map_err(numerical)?;
            }
            Ok(())
        }
        Command::InspectMesh { mesh, order } => {
            let m = runner::load_mesh(&mesh)?;
            let (lo, hi) = m.bbox();
            println!("elements: {} ({} tets, {} prisms)", m.element_count(), m.tets.len(), m.prisms.len());
            println!("vertices: {}", m.vertices.len());
            println!(
                "bbox: [{:.4}, {:.4}] x [{:.4}, {:.4}] x [{:.4}, {:.4}]",
                lo[0], hi[0], lo[1], hi[1], lo[2], hi[2]
            );
            let mut tags: Vec<BoundaryTag> = m.boundary_facets.iter().map(|f| f.tag).collect();
            tags.sort_unstable();
            tags.dedup();
            for tag in tags {
                let count = m.facets_with_tag(tag).len();
                println!("tag {:12} {count} facets", tag.name());
            }
            println!("free-surface trace: {} triangles", m.free_surface_trace.triangles.len());
            match m.min_spacing(order) {
                Ok(dx) => println!("min node spacing at P={order}: {dx:.6e}"),
                Err(e) => println!("min node spacing: {e}"),
            }
            let dm = hydrosem::assembly::build_dofmap(&m, order).map_err(numerical)?;
            println!("N_DOF at P={order}: {}", dm.n_dof);
            Ok(())
        }
        Command::ImpulseDiagnose {
            mesh,
            s,
            order,
            gravity,
            depth,
        } => {
            let m = runner::load_mesh(&mesh)?;
            let env = hydrosem::waves::Environment {
                gravity,
                depth,
                density: 1000.0,
            };
            let impulse = PseudoImpulse::new(s, 1e-8).map_err(numerical)?;
            println!("t0 = {:.6} s", impulse.t0);
            for (kind, name) in [
                (ForcingKind::Velocity, "radiation (velocity)"),
                (ForcingKind::Elevation, "diffraction (elevation)"),
            ] {
                let band = omega_limit(&impulse, kind);
                let k_hi = hydrosem::waves::solve_dispersion(band.hi, &env);
                let lambda = 2.0 * std::f64::consts::PI / k_hi;
                println!(
                    "{name}: omega_limit = [{:.4}, {:.4}] rad/s, shortest wavelength {lambda:.4} m",
                    band.lo, band.hi
                );
            }
            let dx = m.min_spacing(order).map_err(numerical)?;
            println!("mesh min node spacing at P={order}: {dx:.4} m");
            let band = omega_limit(&impulse, ForcingKind::Velocity);
            let k_hi = hydrosem::waves::solve_dispersion(band.hi, &env);
            let nodes_per_wave = 2.0 * std::f64::consts::PI / k_hi / dx;
            println!("nodes per shortest radiated wavelength: {nodes_per_wave:.2}");
            Ok(())
        }
        Command::GenMesh { preset } => {
            let (mesh, out) = match preset {
                MeshPreset::Box {
                    lx,
                    ly,
                    depth,
                    nx,
                    ny,
                    nz,
                    out,
                } => (meshes::box_tank(lx, ly, depth, nx, ny, nz).map_err(numerical)?, out),
                MeshPreset::BodyBox {
                    lx,
                    depth,
                    nx,
                    nz,
                    body_cells,
                    draft_cells,
                    out,
                } => (
                    meshes::body_box_tank(lx, depth, nx, nz, body_cells, draft_cells)
                        .map_err(numerical)?,
                    out,
                ),
                MeshPreset::Cylinder {
                    radius,
                    draft,
                    depth,
                    tank_radius,
                    far_cells,
                    out,
                } => (
                    meshes::quarter_cylinder(radius, draft, depth, tank_radius, far_cells)
                        .map_err(numerical)?,
                    out,
                ),
                MeshPreset::Moonpool {
                    lx,
                    depth,
                    nx,
                    nz,
                    body_cells,
                    chamber_cells,
                    draft_cells,
                    out,
                } => (
                    meshes::moonpool_tank(lx, depth, nx, nz, body_cells, chamber_cells, draft_cells)
                        .map_err(numerical)?,
                    out,
                ),
                MeshPreset::SubmergedSphere {
                    radius,
                    center_depth,
                    cell,
                    plan_cells,
                    depth_cells,
                    out,
                } => (
                    meshes::submerged_sphere_mesh(radius, center_depth, cell, plan_cells, depth_cells)
                        .map_err(numerical)?,
                    out,
                ),
            };
            std::fs::write(&out, msh::write_msh(&mesh)).map_err(numerical)?;
            println!(
                "wrote {} ({} elements, {} boundary facets)",
                out.display(),
                mesh.element_count(),
                mesh.boundary_facets.len()
            );
            Ok(())
        }
    }
}
