//! Built-in desk-scale mesh presets, written as MSH 4.1 files so the whole
//! pipeline (including the parser) is exercised without a mesh generator.

use hydrosem::mesh::gen::{
    clustered_lines, morph_plan_square_to_circle, submerged_sphere, tank, BodyBlock,
    SubmergedSphereSpec, TankSpec,
};
use hydrosem::mesh::{BoundaryTag, HybridMesh, MeshError};

/// Centered empty tank with far-field sides.
pub fn box_tank(lx: f64, ly: f64, depth: f64, nx: usize, ny: usize, nz: usize) -> Result<HybridMesh, MeshError> {
    let mut spec = TankSpec::uniform_box(lx, ly, depth, nx, ny, nz);
    spec.x_lines.iter_mut().for_each(|x| *x -= lx / 2.0);
    spec.y_lines.iter_mut().for_each(|y| *y -= ly / 2.0);
    tank(&spec)
}

/// Centered tank with a floating rectangular body.
///
/// `body_cells` is the body half-width in grid cells, `draft_cells` its
/// submerged depth in grid layers.
pub fn body_box_tank(
    lx: f64,
    depth: f64,
    nx: usize,
    nz: usize,
    body_cells: usize,
    draft_cells: usize,
) -> Result<HybridMesh, MeshError> {
    if 2 * body_cells >= nx || draft_cells + 1 >= nz {
        return Err(MeshError::Parameter(
            "body must be strictly inside the tank".into(),
        ));
    }
    let mut spec = TankSpec::uniform_box(lx, lx, depth, nx, nx, nz);
    spec.x_lines.iter_mut().for_each(|x| *x -= lx / 2.0);
    spec.y_lines.iter_mut().for_each(|y| *y -= lx / 2.0);
    let mid = nx / 2;
    spec.body = Some(BodyBlock {
        i0: mid - body_cells,
        i1: mid + body_cells,
        j0: mid - body_cells,
        j1: mid + body_cells,
        k_bottom: nz - draft_cells,
        chamber: None,
    });
    tank(&spec)
}

/// Quarter-domain floating vertical cylinder with symmetry planes at
/// x = 0 and y = 0, graded towards the hull.
pub fn quarter_cylinder(
    radius: f64,
    draft: f64,
    depth: f64,
    tank_radius: f64,
    far_cells: usize,
) -> Result<HybridMesh, MeshError> {
    let mut x_lines = vec![0.0, radius / 2.0, radius];
    x_lines.extend(clustered_lines(radius, tank_radius, far_cells, 1.3)[1..].iter());
    // graded vertical lines: fine at the surface, body bottom on a line
    let mut z_lines = vec![-depth];
    let below = clustered_lines(-depth, -draft, 3, 0.7);
    z_lines.extend(below[1..].iter());
    let above = clustered_lines(-draft, 0.0, 4, 0.6);
    z_lines.extend(above[1..].iter());
    let spec = TankSpec {
        x_lines: x_lines.clone(),
        y_lines: x_lines,
        z_lines,
        side_tags: [
            BoundaryTag::SymY,
            BoundaryTag::FarField,
            BoundaryTag::SymX,
            BoundaryTag::FarField,
        ],
        body: Some(BodyBlock {
            i0: 0,
            i1: 2,
            j0: 0,
            j1: 2,
            k_bottom: 3,
            chamber: None,
        }),
    };
    let boxy = tank(&spec)?;
    morph_plan_square_to_circle(&boxy, radius, 3.0 * radius)
}

/// Centered moonpool box: a ring body with an open chamber whose z = 0
/// facets carry the special internal surface tag.
pub fn moonpool_tank(
    lx: f64,
    depth: f64,
    nx: usize,
    nz: usize,
    body_cells: usize,
    chamber_cells: usize,
    draft_cells: usize,
) -> Result<HybridMesh, MeshError> {
    if chamber_cells >= body_cells || 2 * body_cells >= nx || draft_cells + 1 >= nz {
        return Err(MeshError::Parameter(
            "need chamber < body < tank and fluid under the body".into(),
        ));
    }
    let mut spec = TankSpec::uniform_box(lx, lx, depth, nx, nx, nz);
    spec.x_lines.iter_mut().for_each(|x| *x -= lx / 2.0);
    spec.y_lines.iter_mut().for_each(|y| *y -= lx / 2.0);
    let mid = nx / 2;
    spec.body = Some(BodyBlock {
        i0: mid - body_cells,
        i1: mid + body_cells,
        j0: mid - body_cells,
        j1: mid + body_cells,
        k_bottom: nz - draft_cells,
        chamber: Some((
            mid - chamber_cells,
            mid + chamber_cells,
            mid - chamber_cells,
            mid + chamber_cells,
        )),
    });
    tank(&spec)
}

/// Deeply submerged sphere in an all-tet shell mesh.
pub fn submerged_sphere_mesh(
    radius: f64,
    center_depth: f64,
    cell: f64,
    plan_cells: usize,
    depth_cells: usize,
) -> Result<HybridMesh, MeshError> {
    submerged_sphere(&SubmergedSphereSpec {
        radius,
        center_depth,
        cell,
        cube_cells: ((1.5 * radius) / cell).ceil() as usize,
        shell_layers: 3,
        plan_cells,
        depth_cells,
    })
}
