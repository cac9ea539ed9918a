//! Structured test geometries: hybrid box tanks with optional floating
//! bodies and moonpool chambers, plan morphs for circular bodies, and a
//! shell-meshed submerged sphere.
//!
//! These produce the desk-scale meshes used by the verification and
//! acceptance suites; production meshes come from MSH files.

use super::{BoundaryTag, HybridMesh, MeshError};
use std::collections::BTreeMap;

/// A floating rectangular body carved out of the tank grid, aligned with
/// grid lines. Cells with `i0 <= i < i1`, `j0 <= j < j1` and layer index
/// `k >= k_bottom` are void (inside the body).
#[derive(Debug, Clone, Copy)]
pub struct BodyBlock {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
    pub k_bottom: usize,
    /// Open chamber (moonpool) inside the body footprint: these plan cells
    /// stay fluid over the full depth and their z = 0 facets are tagged as
    /// the special internal surface.
    pub chamber: Option<(usize, usize, usize, usize)>,
}

/// Structured hybrid tank specification. The top grid layer becomes the
/// prism layer; everything below is tetrahedral.
#[derive(Debug, Clone)]
pub struct TankSpec {
    /// ascending x grid lines
    pub x_lines: Vec<f64>,
    /// ascending y grid lines
    pub y_lines: Vec<f64>,
    /// ascending z grid lines from -h to exactly 0
    pub z_lines: Vec<f64>,
    /// tags of the x-low, x-high, y-low, y-high side walls
    pub side_tags: [BoundaryTag; 4],
    pub body: Option<BodyBlock>,
}

impl TankSpec {
    /// Uniform empty box (0,lx) x (0,ly) x (-h,0) with far-field sides.
    pub fn uniform_box(lx: f64, ly: f64, h: f64, nx: usize, ny: usize, nz: usize) -> TankSpec {
        TankSpec {
            x_lines: lines(0.0, lx, nx),
            y_lines: lines(0.0, ly, ny),
            z_lines: lines(-h, 0.0, nz),
            side_tags: [BoundaryTag::FarField; 4],
            body: None,
        }
    }
}

/// Evenly spaced grid lines, endpoints included.
pub fn lines(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1);
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// Grid lines on [a, b] with cell widths growing geometrically from the
/// `a` side by `ratio` per cell.
pub fn clustered_lines(a: f64, b: f64, n: usize, ratio: f64) -> Vec<f64> {
    assert!(n >= 1 && ratio > 0.0);
    let total: f64 = (0..n).map(|i| ratio.powi(i as i32)).sum();
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(a);
    for i in 0..n {
        acc += ratio.powi(i as i32) / total;
        out.push(a + (b - a) * acc);
    }
    *out.last_mut().unwrap() = b;
    out
}

struct GridIndexer {
    nx: usize,
    ny: usize,
}

impl GridIndexer {
    fn node(&self, i: usize, j: usize, k: usize) -> usize {
        (k * (self.ny + 1) + j) * (self.nx + 1) + i
    }
}

/// Build a hybrid tank mesh from the given grid specification.
pub fn tank(spec: &TankSpec) -> Result<HybridMesh, MeshError> {
    let nx = spec.x_lines.len() - 1;
    let ny = spec.y_lines.len() - 1;
    let nz = spec.z_lines.len() - 1;
    if nx < 1 || ny < 1 || nz < 2 {
        return Err(MeshError::Parameter(
            "tank grid needs at least 1x1 plan cells and 2 vertical layers".into(),
        ));
    }
    if spec.z_lines.last().copied() != Some(0.0) {
        return Err(MeshError::Parameter(
            "the last z grid line must be exactly 0".into(),
        ));
    }
    if let Some(b) = &spec.body {
        if b.i1 <= b.i0 || b.j1 <= b.j0 || b.i1 > nx || b.j1 > ny {
            return Err(MeshError::Parameter("body block outside the grid".into()));
        }
        if b.k_bottom >= nz {
            return Err(MeshError::Parameter(
                "body bottom must leave fluid below the body".into(),
            ));
        }
        if b.k_bottom == 0 {
            return Err(MeshError::Parameter("body may not touch the seabed".into()));
        }
        if let Some((ci0, ci1, cj0, cj1)) = b.chamber {
            if ci0 < b.i0 || ci1 > b.i1 || cj0 < b.j0 || cj1 > b.j1 || ci1 <= ci0 || cj1 <= cj0 {
                return Err(MeshError::Parameter(
                    "chamber must lie inside the body footprint".into(),
                ));
            }
        }
    }

    let idx = GridIndexer { nx, ny };
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for zk in &spec.z_lines {
        for yj in &spec.y_lines {
            for xi in &spec.x_lines {
                vertices.push([*xi, *yj, *zk]);
            }
        }
    }

    let in_chamber = |i: usize, j: usize| -> bool {
        match spec.body.as_ref().and_then(|b| b.chamber) {
            Some((ci0, ci1, cj0, cj1)) => i >= ci0 && i < ci1 && j >= cj0 && j < cj1,
            None => false,
        }
    };
    let is_void = |i: usize, j: usize, k: usize| -> bool {
        match &spec.body {
            Some(b) => {
                i >= b.i0 && i < b.i1 && j >= b.j0 && j < b.j1 && k >= b.k_bottom
                    && !in_chamber(i, j)
            }
            None => false,
        }
    };

    let mut tets: Vec<[usize; 4]> = Vec::new();
    let mut prisms: Vec<[usize; 6]> = Vec::new();
    // Kuhn paths from corner 000 to 111 of each hex cell.
    const KUHN: [[[usize; 3]; 2]; 6] = [
        [[1, 0, 0], [1, 1, 0]],
        [[1, 0, 0], [1, 0, 1]],
        [[0, 1, 0], [1, 1, 0]],
        [[0, 1, 0], [0, 1, 1]],
        [[0, 0, 1], [1, 0, 1]],
        [[0, 0, 1], [0, 1, 1]],
    ];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if is_void(i, j, k) {
                    continue;
                }
                if k == nz - 1 {
                    // prism layer, plan diagonal (i,j) -> (i+1,j+1)
                    let a0 = idx.node(i, j, k);
                    let b0 = idx.node(i + 1, j, k);
                    let c0 = idx.node(i + 1, j + 1, k);
                    let d0 = idx.node(i, j + 1, k);
                    let a1 = idx.node(i, j, k + 1);
                    let b1 = idx.node(i + 1, j, k + 1);
                    let c1 = idx.node(i + 1, j + 1, k + 1);
                    let d1 = idx.node(i, j + 1, k + 1);
                    prisms.push([a0, b0, c0, a1, b1, c1]);
                    prisms.push([a0, c0, d0, a1, c1, d1]);
                } else {
                    let corner = |d: [usize; 3]| idx.node(i + d[0], j + d[1], k + d[2]);
                    let c000 = corner([0, 0, 0]);
                    let c111 = corner([1, 1, 1]);
                    for path in KUHN {
                        tets.push([c000, corner(path[0]), corner(path[1]), c111]);
                    }
                }
            }
        }
    }

    compact_and_classify(vertices, tets, prisms, |centroid| {
        classify_tank_face(spec, centroid)
    })
}

fn classify_tank_face(spec: &TankSpec, c: [f64; 3]) -> Result<BoundaryTag, MeshError> {
    let x_lo = spec.x_lines[0];
    let x_hi = *spec.x_lines.last().unwrap();
    let y_lo = spec.y_lines[0];
    let y_hi = *spec.y_lines.last().unwrap();
    let z_lo = spec.z_lines[0];
    let diag = ((x_hi - x_lo).powi(2) + (y_hi - y_lo).powi(2) + z_lo.powi(2)).sqrt();
    let tol = 1e-9 * diag;
    if (c[2] - 0.0).abs() < tol {
        // top plane: free surface or the chamber's special lid
        if let Some(b) = &spec.body {
            if let Some((ci0, ci1, cj0, cj1)) = b.chamber {
                let cx0 = spec.x_lines[ci0];
                let cx1 = spec.x_lines[ci1];
                let cy0 = spec.y_lines[cj0];
                let cy1 = spec.y_lines[cj1];
                if c[0] > cx0 - tol && c[0] < cx1 + tol && c[1] > cy0 - tol && c[1] < cy1 + tol {
                    return Ok(BoundaryTag::Special(1));
                }
            }
        }
        return Ok(BoundaryTag::FreeSurface);
    }
    if (c[2] - z_lo).abs() < tol {
        return Ok(BoundaryTag::Bathymetry);
    }
    if (c[0] - x_lo).abs() < tol {
        return Ok(spec.side_tags[0]);
    }
    if (c[0] - x_hi).abs() < tol {
        return Ok(spec.side_tags[1]);
    }
    if (c[1] - y_lo).abs() < tol {
        return Ok(spec.side_tags[2]);
    }
    if (c[1] - y_hi).abs() < tol {
        return Ok(spec.side_tags[3]);
    }
    // anything else borders the carved body
    Ok(BoundaryTag::Body)
}

/// Drop unused vertices, find boundary faces, classify, build the mesh.
fn compact_and_classify(
    vertices: Vec<[f64; 3]>,
    tets: Vec<[usize; 4]>,
    prisms: Vec<[usize; 6]>,
    classify: impl Fn([f64; 3]) -> Result<BoundaryTag, MeshError>,
) -> Result<HybridMesh, MeshError> {
    let mut used = vec![usize::MAX; vertices.len()];
    let mut compact: Vec<[f64; 3]> = Vec::new();
    let remap = |v: usize, used: &mut Vec<usize>, compact: &mut Vec<[f64; 3]>| -> usize {
        if used[v] == usize::MAX {
            used[v] = compact.len();
            compact.push(vertices[v]);
        }
        used[v]
    };
    let tets: Vec<[usize; 4]> = tets
        .iter()
        .map(|t| {
            [
                remap(t[0], &mut used, &mut compact),
                remap(t[1], &mut used, &mut compact),
                remap(t[2], &mut used, &mut compact),
                remap(t[3], &mut used, &mut compact),
            ]
        })
        .collect();
    let prisms: Vec<[usize; 6]> = prisms
        .iter()
        .map(|p| {
            [
                remap(p[0], &mut used, &mut compact),
                remap(p[1], &mut used, &mut compact),
                remap(p[2], &mut used, &mut compact),
                remap(p[3], &mut used, &mut compact),
                remap(p[4], &mut used, &mut compact),
                remap(p[5], &mut used, &mut compact),
            ]
        })
        .collect();

    // boundary faces = faces owned by exactly one element
    let mut face_count: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let count_faces = |face_count: &mut BTreeMap<Vec<usize>, usize>, verts: Vec<usize>| {
        let mut key = verts;
        key.sort_unstable();
        *face_count.entry(key).or_insert(0) += 1;
    };
    for t in &tets {
        for f in 0..4 {
            let corners = crate::refelem::Shape::Tet.face_corners(f);
            count_faces(&mut face_count, corners.iter().map(|&c| t[c]).collect());
        }
    }
    for p in &prisms {
        for f in 0..5 {
            let corners = crate::refelem::Shape::Prism.face_corners(f);
            count_faces(&mut face_count, corners.iter().map(|&c| p[c]).collect());
        }
    }

    let mut tagged: Vec<(Vec<usize>, BoundaryTag)> = Vec::new();
    for (key, count) in &face_count {
        if *count == 1 {
            let mut c = [0.0f64; 3];
            for &v in key {
                for d in 0..3 {
                    c[d] += compact[v][d];
                }
            }
            for d in 0..3 {
                c[d] /= key.len() as f64;
            }
            tagged.push((key.clone(), classify(c)?));
        }
    }

    HybridMesh::new(compact, tets, prisms, tagged)
}

/// Reflect a half/quarter mesh through a symmetry plane, gluing the plane
/// vertices, so the result is element-wise the mirror union of the input.
/// `axis` 0 reflects x -> -x (removing symy tags), 1 reflects y -> -y
/// (removing symx tags).
pub fn mirror(mesh: &HybridMesh, axis: usize) -> Result<HybridMesh, MeshError> {
    if axis > 1 {
        return Err(MeshError::Parameter("mirror axis must be 0 (x) or 1 (y)".into()));
    }
    let plane_tag = if axis == 0 {
        BoundaryTag::SymY
    } else {
        BoundaryTag::SymX
    };
    let diag = mesh.bbox_diagonal();
    let tol = 1e-10 * diag;

    let n = mesh.vertices.len();
    let mut vertices = mesh.vertices.clone();
    // mirrored twin of each vertex; vertices on the plane map to themselves
    let mut twin = vec![0usize; n];
    for (i, v) in mesh.vertices.iter().enumerate() {
        if v[axis].abs() <= tol {
            twin[i] = i;
        } else {
            let mut m = *v;
            m[axis] = -m[axis];
            twin[i] = vertices.len();
            vertices.push(m);
        }
    }

    let mut tets = mesh.tets.clone();
    for t in &mesh.tets {
        tets.push([twin[t[0]], twin[t[1]], twin[t[2]], twin[t[3]]]);
    }
    let mut prisms = mesh.prisms.clone();
    for p in &mesh.prisms {
        prisms.push([
            twin[p[0]], twin[p[1]], twin[p[2]], twin[p[3]], twin[p[4]], twin[p[5]],
        ]);
    }

    let mut tagged: Vec<(Vec<usize>, BoundaryTag)> = Vec::new();
    for bf in &mesh.boundary_facets {
        if bf.tag == plane_tag {
            continue; // becomes interior
        }
        let verts = mesh.face_vertex_ids(bf.element, bf.local_face);
        tagged.push((verts.clone(), bf.tag));
        tagged.push((verts.iter().map(|&v| twin[v]).collect(), bf.tag));
    }
    HybridMesh::new(vertices, tets, prisms, tagged)
}

/// Morph the plan coordinates so the square contour max(|x|,|y|) = `half_width`
/// maps onto the circle of the same radius; the map fades to the identity at
/// `fade_radius`. Used to turn a carved box body into a circular cylinder.
pub fn morph_plan_square_to_circle(
    mesh: &HybridMesh,
    half_width: f64,
    fade_radius: f64,
) -> Result<HybridMesh, MeshError> {
    if fade_radius <= half_width {
        return Err(MeshError::Parameter(
            "fade radius must exceed the body half width".into(),
        ));
    }
    mesh.with_morphed_vertices(|v| {
        let rho_inf = v[0].abs().max(v[1].abs());
        let rho_2 = v[0].hypot(v[1]);
        if rho_2 < 1e-14 || rho_inf >= fade_radius {
            return v;
        }
        let lambda = if rho_inf <= half_width {
            1.0
        } else {
            let t = (rho_inf - half_width) / (fade_radius - half_width);
            let t = t.clamp(0.0, 1.0);
            1.0 - t * t * (3.0 - 2.0 * t)
        };
        let scale = 1.0 + lambda * (rho_inf / rho_2 - 1.0);
        [v[0] * scale, v[1] * scale, v[2]]
    })
}

/// Specification of the shell-meshed deeply submerged sphere.
#[derive(Debug, Clone, Copy)]
pub struct SubmergedSphereSpec {
    pub radius: f64,
    /// sphere center depth below z = 0 (positive)
    pub center_depth: f64,
    /// base grid cell size; the shell cube and center must align with it
    pub cell: f64,
    /// shell cube half-width in cells (cube half width = m * cell)
    pub cube_cells: usize,
    /// radial shell layers between the sphere and the cube
    pub shell_layers: usize,
    /// domain half extent in cells in x and y
    pub plan_cells: usize,
    /// water depth in cells
    pub depth_cells: usize,
}

/// All-tet mesh of a box tank with a spherical cavity (the body) meshed by
/// a radial shell between sphere and an embedded cube of the grid.
pub fn submerged_sphere(spec: &SubmergedSphereSpec) -> Result<HybridMesh, MeshError> {
    let cs = spec.cell;
    let m = spec.cube_cells as i64;
    let nr = spec.shell_layers;
    let np = spec.plan_cells as i64;
    let nd = spec.depth_cells as i64;
    let r = spec.radius;
    let w = m as f64 * cs;
    if r >= w {
        return Err(MeshError::Parameter(
            "sphere radius must be smaller than the shell cube half width".into(),
        ));
    }
    if 2.0 * w >= 2.0 * np as f64 * cs {
        return Err(MeshError::Parameter("shell cube wider than the domain".into()));
    }
    // center on a grid plane
    let kc = (spec.center_depth / cs).round() as i64;
    if (kc as f64 * cs - spec.center_depth).abs() > 1e-9 * cs {
        return Err(MeshError::Parameter(
            "center depth must be a multiple of the cell size".into(),
        ));
    }
    if kc - m <= 0 || kc + m >= nd {
        return Err(MeshError::Parameter(
            "shell cube must sit strictly between seabed and free surface".into(),
        ));
    }
    let center = [0.0, 0.0, -spec.center_depth];

    // node ids: grid nodes, shell nodes, hex centroids
    // grid node key (i, j, k): x = i*cs, y = j*cs, z = (k - nd)*cs
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut grid_ids: BTreeMap<(i64, i64, i64), usize> = BTreeMap::new();
    let mut node_at = |key: (i64, i64, i64), vertices: &mut Vec<[f64; 3]>| -> usize {
        *grid_ids.entry(key).or_insert_with(|| {
            vertices.push([
                key.0 as f64 * cs,
                key.1 as f64 * cs,
                (key.2 - nd) as f64 * cs,
            ]);
            vertices.len() - 1
        })
    };

    // hex list: 8 corner node ids each
    let mut hexes: Vec<[usize; 8]> = Vec::new();
    let inside_cube = |i: i64, j: i64, k: i64| -> bool {
        // cell (i..i+1, j..j+1, k..k+1) fully within the cube around center
        let kzc = nd - kc; // grid k index of the center plane
        i >= -m && i + 1 <= m && j >= -m && j + 1 <= m && k >= kzc - m && k + 1 <= kzc + m
    };
    for k in 0..nd {
        for j in -np..np {
            for i in -np..np {
                if inside_cube(i, j, k) {
                    continue;
                }
                let mut corners = [0usize; 8];
                for (ci, d) in [
                    (0, [0, 0, 0]),
                    (1, [1, 0, 0]),
                    (2, [0, 1, 0]),
                    (3, [1, 1, 0]),
                    (4, [0, 0, 1]),
                    (5, [1, 0, 1]),
                    (6, [0, 1, 1]),
                    (7, [1, 1, 1]),
                ] {
                    corners[ci] = node_at((i + d[0], j + d[1], k + d[2]), &mut vertices);
                }
                hexes.push(corners);
            }
        }
    }

    // shell nodes: (cube surface grid node, layer); layer nr = the grid node
    let kzc = nd - kc;
    let on_cube_surface = |i: i64, j: i64, k: i64| -> bool {
        let dz = k - kzc;
        let a = i.abs().max(j.abs()).max(dz.abs());
        a == m && i.abs() <= m && j.abs() <= m && dz.abs() <= m
    };
    let mut shell_ids: BTreeMap<((i64, i64, i64), usize), usize> = BTreeMap::new();
    let mut shell_node = |key: (i64, i64, i64),
                          layer: usize,
                          vertices: &mut Vec<[f64; 3]>,
                          node_at: &mut dyn FnMut((i64, i64, i64), &mut Vec<[f64; 3]>) -> usize|
     -> usize {
        if layer == nr {
            return node_at(key, vertices);
        }
        *shell_ids.entry((key, layer)).or_insert_with(|| {
            let gx = key.0 as f64 * cs;
            let gy = key.1 as f64 * cs;
            let gz = (key.2 - nd) as f64 * cs;
            let d = [gx - center[0], gy - center[1], gz - center[2]];
            let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let target = r + (dist - r) * layer as f64 / nr as f64;
            let s = target / dist;
            vertices.push([
                center[0] + d[0] * s,
                center[1] + d[1] * s,
                center[2] + d[2] * s,
            ]);
            vertices.len() - 1
        })
    };

    // shell hexes: walk every cube-surface cell (a 2D cell of the cube faces)
    let mut surface_cells: Vec<[(i64, i64, i64); 4]> = Vec::new();
    for axis in 0..3 {
        for side in [-m, m] {
            for a in -m..m {
                for b in -m..m {
                    let corner = |da: i64, db: i64| -> (i64, i64, i64) {
                        match axis {
                            0 => (side, a + da, kzc + b + db),
                            1 => (a + da, side, kzc + b + db),
                            _ => (a + da, b + db, kzc + side),
                        }
                    };
                    let quad = [corner(0, 0), corner(1, 0), corner(0, 1), corner(1, 1)];
                    if quad.iter().all(|&(i, j, k)| on_cube_surface(i, j, k)) {
                        surface_cells.push(quad);
                    }
                }
            }
        }
    }
    for quad in &surface_cells {
        for layer in 0..nr {
            let mut corners = [0usize; 8];
            for (ci, &key) in quad.iter().enumerate() {
                corners[ci] = shell_node(key, layer, &mut vertices, &mut node_at);
                corners[ci + 4] = shell_node(key, layer + 1, &mut vertices, &mut node_at);
            }
            hexes.push(corners);
        }
    }

    // centroid-split every hex into 12 tets; quad faces split through their
    // lowest-global-id corner so shared faces match.
    const HEX_FACES: [[usize; 4]; 6] = [
        [0, 2, 6, 4],
        [1, 3, 7, 5],
        [0, 1, 5, 4],
        [2, 3, 7, 6],
        [0, 1, 3, 2],
        [4, 5, 7, 6],
    ];
    let mut tets: Vec<[usize; 4]> = Vec::new();
    for hex in &hexes {
        let mut c = [0.0f64; 3];
        for &v in hex {
            for d in 0..3 {
                c[d] += vertices[v][d] / 8.0;
            }
        }
        vertices.push(c);
        let cid = vertices.len() - 1;
        for face in HEX_FACES {
            let ids = [hex[face[0]], hex[face[1]], hex[face[2]], hex[face[3]]];
            let min_pos = (0..4).min_by_key(|&p| ids[p]).unwrap();
            // diagonal through ids[min_pos] and the opposite corner
            let (t1, t2) = if min_pos % 2 == 0 {
                ([ids[0], ids[1], ids[2]], [ids[0], ids[2], ids[3]])
            } else {
                ([ids[1], ids[2], ids[3]], [ids[1], ids[3], ids[0]])
            };
            tets.push([cid, t1[0], t1[1], t1[2]]);
            tets.push([cid, t2[0], t2[1], t2[2]]);
        }
    }

    let depth = nd as f64 * cs;
    let half = np as f64 * cs;
    let tol_r = 1e-6 * r;
    compact_and_classify(vertices, tets, vec![], move |c| {
        let tol = 1e-9 * (half + depth);
        if c[2].abs() < tol {
            return Ok(BoundaryTag::FreeSurface);
        }
        if (c[2] + depth).abs() < tol {
            return Ok(BoundaryTag::Bathymetry);
        }
        if (c[0].abs() - half).abs() < tol || (c[1].abs() - half).abs() < tol {
            return Ok(BoundaryTag::FarField);
        }
        let d = ((c[0] - center[0]).powi(2)
            + (c[1] - center[1]).powi(2)
            + (c[2] - center[2]).powi(2))
        .sqrt();
        if d < r + tol_r * 1e3 {
            return Ok(BoundaryTag::Body);
        }
        Err(MeshError::Tagging(format!(
            "unclassified boundary face at ({:.3}, {:.3}, {:.3})",
            c[0], c[1], c[2]
        )))
    })
}
