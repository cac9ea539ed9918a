//! Declarative run configuration: a TOML file describing the mesh, the
//! environment, requested radiation modes and diffraction forces, damping
//! zones, stretching, time integration, and output policy.
//!
//! Loading validates the schema and reports every violation at once.

use crate::expr::Expr;
use hydrosem::linalg::{Preconditioner, SolverConfig};
use hydrosem::mesh::{BoundaryTag, StretchAxis, StretchSpec};
use hydrosem::symmetry::{ModeParity, Parity};
use hydrosem::waves::{DampingZone, Environment, ZoneGeometry};
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "configuration invalid ({} violations):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: u32,
    mesh: RawMesh,
    #[serde(default)]
    environment: RawEnvironment,
    #[serde(default)]
    radiation: Option<RawRadiation>,
    #[serde(default)]
    diffraction: Option<RawDiffraction>,
    #[serde(default)]
    time: RawTime,
    #[serde(default)]
    damping: Option<RawDamping>,
    #[serde(default)]
    stretching: Option<RawStretching>,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    path: String,
    order: usize,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawEnvironment {
    gravity: Option<f64>,
    depth: Option<f64>,
    density: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRadiation {
    #[serde(default)]
    modes: Vec<usize>,
    impulse_s: f64,
    impulse_epsilon: Option<f64>,
    #[serde(default)]
    generalized: Vec<RawGeneralized>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeneralized {
    index: usize,
    surface: String,
    normal: String,
    parity_x: Option<String>,
    parity_y: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiffraction {
    heading_deg: f64,
    impulse_s: f64,
    impulse_epsilon: Option<f64>,
    #[serde(default)]
    forces: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    cfl: Option<f64>,
    /// simulated seconds; omitted = automatic from the impulse
    duration: Option<f64>,
}

impl Default for RawTime {
    fn default() -> Self {
        RawTime {
            cfl: None,
            duration: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDamping {
    #[serde(default)]
    zones: Vec<RawZone>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawZone {
    kind: String,
    start: f64,
    end: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStretching {
    axis: String,
    start: f64,
    ratio: f64,
    layer: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<String>,
    omega_points: Option<usize>,
    body_reference: Option<[f64; 3]>,
    length_scale: Option<f64>,
    #[serde(default)]
    time_series: bool,
    #[serde(default)]
    jsonl: bool,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    rel_tolerance: Option<f64>,
    preconditioner: Option<String>,
}

/// A generalized mode definition with its parsed normal expression.
#[derive(Debug, Clone)]
pub struct GeneralizedMode {
    pub index: usize,
    pub surface: BoundaryTag,
    pub normal: Expr,
    pub parity: ModeParity,
}

/// Validated run configuration.
#[derive(Debug)]
pub struct RunConfig {
    pub mesh_path: PathBuf,
    pub order: usize,
    pub environment: Environment,
    pub radiation_modes: Vec<usize>,
    pub generalized: Vec<GeneralizedMode>,
    pub radiation_impulse: Option<(f64, f64)>,
    pub diffraction: Option<DiffractionRequest>,
    pub cfl: f64,
    pub duration: Option<f64>,
    pub zones: Vec<DampingZone>,
    pub stretching: Option<StretchSpec>,
    pub output_dir: PathBuf,
    pub omega_points: usize,
    pub body_reference: [f64; 3],
    pub length_scale: f64,
    pub write_time_series: bool,
    pub write_jsonl: bool,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone)]
pub struct DiffractionRequest {
    pub heading: f64,
    pub impulse: (f64, f64),
    pub forces: Vec<usize>,
}

fn parse_parity(
    label: &str,
    field: &str,
    violations: &mut Vec<String>,
) -> Parity {
    match label.to_ascii_lowercase().as_str() {
        "even" | "s" | "symmetric" => Parity::Even,
        "odd" | "a" | "antisymmetric" => Parity::Odd,
        other => {
            violations.push(format!(
                "{field}: parity must be \"even\" or \"odd\", got {other:?}"
            ));
            Parity::Even
        }
    }
}

/// Parse and validate a configuration file, collecting all violations.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        violations: vec![format!("cannot read {}: {e}", path.display())],
    })?;
    let raw: RawConfig = toml::from_str(&text).map_err(|e| ConfigError {
        violations: vec![format!("TOML parse failure: {e}")],
    })?;

    let mut violations: Vec<String> = Vec::new();
    if raw.version != 1 {
        violations.push(format!("version: expected 1, got {}", raw.version));
    }
    if raw.mesh.order < 1 || raw.mesh.order > 10 {
        violations.push(format!(
            "mesh.order: must lie in 1..=10, got {}",
            raw.mesh.order
        ));
    }

    let environment = Environment {
        gravity: raw.environment.gravity.unwrap_or(9.81),
        depth: raw.environment.depth.unwrap_or(1.0),
        density: raw.environment.density.unwrap_or(1000.0),
    };
    if environment.gravity <= 0.0 || environment.depth <= 0.0 || environment.density <= 0.0 {
        violations.push("environment: gravity, depth, and density must be positive".into());
    }

    let mut generalized = Vec::new();
    let mut radiation_modes = Vec::new();
    let mut radiation_impulse = None;
    if let Some(rad) = &raw.radiation {
        if rad.impulse_s <= 0.0 {
            violations.push(format!(
                "radiation.impulse_s: must be positive, got {}",
                rad.impulse_s
            ));
        }
        let eps = rad.impulse_epsilon.unwrap_or(1e-8);
        if !(eps > 0.0 && eps < 1.0) {
            violations.push(format!(
                "radiation.impulse_epsilon: must lie in (0,1), got {eps}"
            ));
        }
        radiation_impulse = Some((rad.impulse_s, eps));
        for &k in &rad.modes {
            if k == 0 || k > 6 {
                violations.push(format!(
                    "radiation.modes: rigid modes are 1..=6; declare mode {k} under \
                     [[radiation.generalized]] with an explicit normal and parity"
                ));
            } else {
                radiation_modes.push(k);
            }
        }
        for g in &rad.generalized {
            if g.index <= 6 {
                violations.push(format!(
                    "radiation.generalized: index must exceed 6, got {}",
                    g.index
                ));
            }
            let surface = match BoundaryTag::from_name(&g.surface) {
                Ok(t) => t,
                Err(e) => {
                    violations.push(format!("radiation.generalized.surface: {e}"));
                    BoundaryTag::Body
                }
            };
            let normal = match Expr::parse(&g.normal) {
                Ok(e) => e,
                Err(e) => {
                    violations.push(format!(
                        "radiation.generalized.normal {:?}: {e}",
                        g.normal
                    ));
                    Expr::Num(0.0)
                }
            };
            let px = g
                .parity_x
                .as_deref()
                .map(|s| parse_parity(s, "radiation.generalized.parity_x", &mut violations));
            let py = g
                .parity_y
                .as_deref()
                .map(|s| parse_parity(s, "radiation.generalized.parity_y", &mut violations));
            // parity declarations are mandatory so symmetric domains can
            // route the mode; full domains simply ignore them
            let parity = ModeParity {
                about_x0: px.unwrap_or_else(|| {
                    violations.push(format!(
                        "radiation.generalized (index {}): parity_x must be declared",
                        g.index
                    ));
                    Parity::Even
                }),
                about_y0: py.unwrap_or_else(|| {
                    violations.push(format!(
                        "radiation.generalized (index {}): parity_y must be declared",
                        g.index
                    ));
                    Parity::Even
                }),
            };
            generalized.push(GeneralizedMode {
                index: g.index,
                surface,
                normal,
                parity,
            });
        }
    }

    let diffraction = raw.diffraction.as_ref().map(|d| {
        if d.impulse_s <= 0.0 {
            violations.push(format!(
                "diffraction.impulse_s: must be positive, got {}",
                d.impulse_s
            ));
        }
        let eps = d.impulse_epsilon.unwrap_or(1e-8);
        for &j in &d.forces {
            if j == 0 || (j > 6 && !raw.radiation.as_ref().is_some_and(|r| {
                r.generalized.iter().any(|g| g.index == j)
            })) {
                violations.push(format!(
                    "diffraction.forces: force {j} is neither a rigid mode nor a \
                     declared generalized mode"
                ));
            }
        }
        DiffractionRequest {
            heading: d.heading_deg.to_radians(),
            impulse: (d.impulse_s, eps),
            forces: d.forces.clone(),
        }
    });

    let cfl = raw.time.cfl.unwrap_or(0.9);
    if !(cfl > 0.0 && cfl <= 1.0) {
        violations.push(format!("time.cfl: must lie in (0, 1], got {cfl}"));
    }
    if let Some(d) = raw.time.duration {
        if d <= 0.0 {
            violations.push(format!("time.duration: must be positive, got {d}"));
        }
    }

    let mut zones = Vec::new();
    if let Some(d) = &raw.damping {
        for (i, z) in d.zones.iter().enumerate() {
            let geometry = match z.kind.to_ascii_lowercase().as_str() {
                "x" => Some(ZoneGeometry::X {
                    start: z.start,
                    end: z.end,
                }),
                "y" => Some(ZoneGeometry::Y {
                    start: z.start,
                    end: z.end,
                }),
                "radial" => Some(ZoneGeometry::Radial {
                    start: z.start,
                    end: z.end,
                }),
                other => {
                    violations.push(format!(
                        "damping.zones[{i}].kind: expected x, y, or radial, got {other:?}"
                    ));
                    None
                }
            };
            if let Some(g) = geometry {
                match DampingZone::new(g) {
                    Ok(zone) => zones.push(zone),
                    Err(e) => violations.push(format!("damping.zones[{i}]: {e}")),
                }
            }
        }
    }

    let stretching = raw.stretching.as_ref().and_then(|s| {
        let axis = match s.axis.to_ascii_lowercase().as_str() {
            "x" => Some(StretchAxis::X),
            "y" => Some(StretchAxis::Y),
            "radial" => Some(StretchAxis::Radial),
            other => {
                violations.push(format!(
                    "stretching.axis: expected x, y, or radial, got {other:?}"
                ));
                None
            }
        };
        if s.ratio <= 1.0 {
            violations.push(format!(
                "stretching.ratio: must exceed 1, got {}",
                s.ratio
            ));
        }
        axis.map(|axis| StretchSpec {
            axis,
            start: s.start,
            ratio: s.ratio,
            layer: s.layer,
        })
    });

    let omega_points = raw.output.omega_points.unwrap_or(400);
    if omega_points < 2 {
        violations.push(format!(
            "output.omega_points: need at least 2, got {omega_points}"
        ));
    }
    let length_scale = raw.output.length_scale.unwrap_or(1.0);
    if length_scale <= 0.0 {
        violations.push(format!(
            "output.length_scale: must be positive, got {length_scale}"
        ));
    }

    let solver = {
        let rel = raw.solver.rel_tolerance.unwrap_or(1e-10);
        if !(rel > 0.0 && rel <= 1e-2) {
            violations.push(format!(
                "solver.rel_tolerance: must lie in (0, 1e-2], got {rel}"
            ));
        }
        let preconditioner = match raw
            .solver
            .preconditioner
            .as_deref()
            .unwrap_or("incomplete-factorization")
            .to_ascii_lowercase()
            .as_str()
        {
            "none" => Preconditioner::None,
            "diagonal" => Preconditioner::Diagonal,
            "incomplete-factorization" | "ic" | "ic0" => Preconditioner::IncompleteCholesky,
            other => {
                violations.push(format!(
                    "solver.preconditioner: expected none, diagonal, or \
                     incomplete-factorization, got {other:?}"
                ));
                Preconditioner::Diagonal
            }
        };
        SolverConfig {
            rel_tolerance: rel,
            max_iterations: None,
            preconditioner,
        }
    };

    if raw.radiation.is_none() && raw.diffraction.is_none() {
        violations.push("config requests neither radiation nor diffraction".into());
    }

    if !violations.is_empty() {
        return Err(ConfigError { violations });
    }

    let base = path.parent().unwrap_or(Path::new("."));
    Ok(RunConfig {
        mesh_path: base.join(&raw.mesh.path),
        order: raw.mesh.order,
        environment,
        radiation_modes,
        generalized,
        radiation_impulse,
        diffraction,
        cfl,
        duration: raw.time.duration,
        zones,
        stretching,
        output_dir: raw
            .output
            .directory
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out")),
        omega_points,
        body_reference: raw.output.body_reference.unwrap_or([0.0; 3]),
        length_scale,
        write_time_series: raw.output.time_series,
        write_jsonl: raw.output.jsonl,
        solver,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "hydrosem-cfg-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn minimal_config_loads() {
        let path = write_tmp(
            r#"
version = 1
[mesh]
path = "m.msh"
order = 3
[environment]
depth = 25.0
[radiation]
modes = [3]
impulse_s = 0.4
"#,
        );
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.order, 3);
        assert_eq!(cfg.radiation_modes, vec![3]);
        assert_eq!(cfg.environment.depth, 25.0);
        assert!(cfg.diffraction.is_none());
    }

    #[test]
    fn violations_are_aggregated() {
        let path = write_tmp(
            r#"
version = 2
[mesh]
path = "m.msh"
order = 40
[radiation]
modes = [0, 9]
impulse_s = -1.0
[time]
cfl = 3.0
"#,
        );
        let err = load_config(&path).unwrap_err();
        assert!(err.violations.len() >= 5, "{err}");
    }

    #[test]
    fn unknown_tag_rejected() {
        let path = write_tmp(
            r#"
version = 1
[mesh]
path = "m.msh"
order = 2
[radiation]
impulse_s = 0.4
[[radiation.generalized]]
index = 7
surface = "symz"
normal = "1"
parity_x = "even"
parity_y = "even"
"#,
        );
        let err = load_config(&path).unwrap_err();
        assert!(
            err.violations.iter().any(|v| v.contains("symz")),
            "{err}"
        );
    }

    #[test]
    fn owc_style_config() {
        let path = write_tmp(
            r#"
version = 1
[mesh]
path = "owc.msh"
order = 2
[environment]
depth = 32.5
[radiation]
impulse_s = 0.3
[[radiation.generalized]]
index = 7
surface = "special1"
normal = "1"
parity_x = "even"
parity_y = "even"
[[radiation.generalized]]
index = 8
surface = "special1"
normal = "cos((pi/5)*(y - 2.2))"
parity_x = "even"
parity_y = "even"
[diffraction]
heading_deg = 180.0
impulse_s = 0.3
forces = [7, 8]
"#,
        );
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.generalized.len(), 2);
        let n8 = &cfg.generalized[1].normal;
        assert!((n8.eval([0.0, 2.2, 0.0]) - 1.0).abs() < 1e-15);
    }
}
