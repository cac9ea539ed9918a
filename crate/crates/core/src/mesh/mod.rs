//! Hybrid prism/tet meshes with tagged boundaries.
//!
//! A [`HybridMesh`] is a single thin layer of vertically structured prisms
//! whose top triangles tessellate the undisturbed free surface, on top of an
//! unstructured tetrahedral volume. Construction validates the layer
//! invariants (tops at z = 0, vertical extrusion, single layer), positive
//! element volumes, and complete boundary tagging, then extracts the 2D
//! free-surface trace used by the time stepper. Meshes are immutable after
//! construction.

pub mod gen;
pub mod msh;

use crate::refelem::jacobi::gauss_lobatto;
use crate::refelem::Shape;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("tagging error: {0}")]
    Tagging(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Boundary classification of a tagged facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryTag {
    FreeSurface,
    Bathymetry,
    FarField,
    Body,
    SymX,
    SymY,
    Special(u32),
}

impl BoundaryTag {
    /// Parse a physical-group name, case-insensitive.
    pub fn from_name(name: &str) -> Result<Self, MeshError> {
        let lower = name.trim().to_ascii_lowercase();
        match lower.as_str() {
            "freesurface" => Ok(BoundaryTag::FreeSurface),
            "bathymetry" => Ok(BoundaryTag::Bathymetry),
            "farfield" => Ok(BoundaryTag::FarField),
            "body" => Ok(BoundaryTag::Body),
            "symx" => Ok(BoundaryTag::SymX),
            "symy" => Ok(BoundaryTag::SymY),
            _ => {
                if let Some(rest) = lower.strip_prefix("special") {
                    let idx: u32 = rest.parse().map_err(|_| {
                        MeshError::Tagging(format!("unknown physical name {name:?}"))
                    })?;
                    if idx == 0 {
                        return Err(MeshError::Tagging(
                            "special boundary indices start at 1".into(),
                        ));
                    }
                    Ok(BoundaryTag::Special(idx))
                } else {
                    Err(MeshError::Tagging(format!("unknown physical name {name:?}")))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            BoundaryTag::FreeSurface => "freesurface".into(),
            BoundaryTag::Bathymetry => "bathymetry".into(),
            BoundaryTag::FarField => "farfield".into(),
            BoundaryTag::Body => "body".into(),
            BoundaryTag::SymX => "symx".into(),
            BoundaryTag::SymY => "symy".into(),
            BoundaryTag::Special(i) => format!("special{i}"),
        }
    }
}

/// Axis selector for grid stretching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StretchAxis {
    X,
    Y,
    /// Radial in the horizontal plane about the origin.
    Radial,
}

/// Geometric grid stretching beyond a start coordinate. Applies to both
/// signs of the axis coordinate, preserving symmetry.
#[derive(Debug, Clone, Copy)]
pub struct StretchSpec {
    pub axis: StretchAxis,
    /// Coordinate magnitude where stretching begins.
    pub start: f64,
    /// Per-layer expansion factor, > 1.
    pub ratio: f64,
    /// Reference layer thickness; detected from the node spacing beyond
    /// `start` when not given.
    pub layer: Option<f64>,
}

/// A tagged boundary facet: local face `local_face` of element `element`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub element: usize,
    pub local_face: usize,
    pub tag: BoundaryTag,
}

/// Triangulated z = 0 trace of the free surface, carried by prism tops.
#[derive(Debug, Clone, Default)]
pub struct FreeSurfaceTrace {
    /// plan coordinates of the trace vertices
    pub vertices: Vec<[f64; 2]>,
    /// triangles as indices into `vertices`
    pub triangles: Vec<[usize; 3]>,
    /// volume vertex id of each trace vertex (a prism-top vertex)
    pub volume_vertex: Vec<usize>,
    /// prism (mesh element id) carrying each trace triangle
    pub element_of_triangle: Vec<usize>,
}

/// Hybrid prism/tet tessellation with tagged boundary facets.
#[derive(Debug, Clone)]
pub struct HybridMesh {
    pub vertices: Vec<[f64; 3]>,
    /// tetrahedra; global element ids 0..tets.len()
    pub tets: Vec<[usize; 4]>,
    /// prisms (bottom triangle, then vertically aligned top triangle);
    /// global element ids tets.len()..
    pub prisms: Vec<[usize; 6]>,
    pub boundary_facets: Vec<BoundaryFacet>,
    pub free_surface_trace: FreeSurfaceTrace,
}

/// Normal data of one boundary facet.
#[derive(Debug, Clone, Copy)]
pub struct FacetNormal {
    /// index into `boundary_facets`
    pub facet: usize,
    /// unit normal pointing out of the fluid
    pub normal: [f64; 3],
    pub area: f64,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn tet_signed_volume(v: &[[f64; 3]; 4]) -> f64 {
    let a = sub(v[1], v[0]);
    let b = sub(v[2], v[0]);
    let c = sub(v[3], v[0]);
    dot(a, cross(b, c)) / 6.0
}

impl HybridMesh {
    /// Total element count, tets first then prisms in global element ids.
    pub fn element_count(&self) -> usize {
        self.tets.len() + self.prisms.len()
    }

    pub fn element(&self, id: usize) -> (Shape, &[usize]) {
        if id < self.tets.len() {
            (Shape::Tet, &self.tets[id])
        } else {
            (Shape::Prism, &self.prisms[id - self.tets.len()])
        }
    }

    pub fn element_vertices(&self, id: usize) -> Vec<[f64; 3]> {
        let (_, conn) = self.element(id);
        conn.iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn bbox(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    /// Bounding-box diagonal, the coordinate scale for tolerances.
    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bbox();
        norm(sub(hi, lo))
    }

    /// Vertex ids of a local face of an element.
    pub fn face_vertex_ids(&self, element: usize, local_face: usize) -> Vec<usize> {
        let (shape, conn) = self.element(element);
        shape
            .face_corners(local_face)
            .iter()
            .map(|&c| conn[c])
            .collect()
    }

    /// Build a mesh from raw connectivity and tagged boundary faces given
    /// as vertex sets. Orientation is normalized, all invariants checked.
    pub fn new(
        vertices: Vec<[f64; 3]>,
        mut tets: Vec<[usize; 4]>,
        mut prisms: Vec<[usize; 6]>,
        tagged_faces: Vec<(Vec<usize>, BoundaryTag)>,
    ) -> Result<Self, MeshError> {
        for (i, t) in tets.iter_mut().enumerate() {
            let vs = [
                vertices[t[0]],
                vertices[t[1]],
                vertices[t[2]],
                vertices[t[3]],
            ];
            let vol = tet_signed_volume(&vs);
            if vol == 0.0 {
                return Err(MeshError::Topology(format!("tet {i} is degenerate")));
            }
            if vol < 0.0 {
                t.swap(1, 2);
            }
        }
        for (i, p) in prisms.iter_mut().enumerate() {
            let zb: f64 = (0..3).map(|k| vertices[p[k]][2]).sum::<f64>() / 3.0;
            let zt: f64 = (3..6).map(|k| vertices[p[k]][2]).sum::<f64>() / 3.0;
            if zb > zt {
                // top triangle listed first
                p.swap(0, 3);
                p.swap(1, 4);
                p.swap(2, 5);
            }
            let a = vertices[p[0]];
            let b = vertices[p[1]];
            let c = vertices[p[2]];
            let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if area2 == 0.0 {
                return Err(MeshError::Topology(format!(
                    "prism {i} has a degenerate footprint"
                )));
            }
            if area2 < 0.0 {
                p.swap(1, 2);
                p.swap(4, 5);
            }
        }

        let mut mesh = HybridMesh {
            vertices,
            tets,
            prisms,
            boundary_facets: Vec::new(),
            free_surface_trace: FreeSurfaceTrace::default(),
        };

        let face_map = mesh.build_face_map()?;
        let mut facets = Vec::with_capacity(tagged_faces.len());
        for (verts, tag) in tagged_faces {
            let mut key = verts.clone();
            key.sort_unstable();
            match face_map.get(&key) {
                Some(owners) if owners.len() == 1 => {
                    let (element, local_face) = owners[0];
                    facets.push(BoundaryFacet {
                        element,
                        local_face,
                        tag,
                    });
                }
                Some(_) => {
                    return Err(MeshError::Tagging(format!(
                        "tagged face {key:?} ({}) is interior to the fluid",
                        tag.name()
                    )))
                }
                None => {
                    return Err(MeshError::Tagging(format!(
                        "tagged face {key:?} ({}) matches no element face",
                        tag.name()
                    )))
                }
            }
        }
        facets.sort_by_key(|f| (f.element, f.local_face));
        mesh.boundary_facets = facets;

        mesh.validate(&face_map)?;
        mesh.free_surface_trace = mesh.build_trace();
        Ok(mesh)
    }

    /// Map sorted face vertex ids to the owning (element, local_face) list.
    fn build_face_map(&self) -> Result<BTreeMap<Vec<usize>, Vec<(usize, usize)>>, MeshError> {
        let mut map: BTreeMap<Vec<usize>, Vec<(usize, usize)>> = BTreeMap::new();
        for e in 0..self.element_count() {
            let (shape, _) = self.element(e);
            for f in 0..shape.face_count() {
                let mut key = self.face_vertex_ids(e, f);
                key.sort_unstable();
                map.entry(key).or_default().push((e, f));
            }
        }
        for (key, owners) in &map {
            if owners.len() > 2 {
                return Err(MeshError::Topology(format!(
                    "face {key:?} is shared by {} elements",
                    owners.len()
                )));
            }
        }
        Ok(map)
    }

    fn validate(
        &self,
        face_map: &BTreeMap<Vec<usize>, Vec<(usize, usize)>>,
    ) -> Result<(), MeshError> {
        let diag = self.bbox_diagonal();
        if diag == 0.0 || !diag.is_finite() {
            return Err(MeshError::Geometry("mesh has zero or invalid extent".into()));
        }
        let z_tol = 1e-12 * diag;
        let vert_tol = 1e-10 * diag;

        for (i, p) in self.prisms.iter().enumerate() {
            for k in 3..6 {
                let z = self.vertices[p[k]][2];
                if z.abs() > z_tol {
                    return Err(MeshError::Topology(format!(
                        "prism {i}: top vertex {} at z = {z:.6e}, not on the free surface",
                        p[k]
                    )));
                }
            }
            for k in 0..3 {
                let b = self.vertices[p[k]];
                let t = self.vertices[p[k + 3]];
                let dx = (b[0] - t[0]).hypot(b[1] - t[1]);
                if dx > vert_tol {
                    return Err(MeshError::Topology(format!(
                        "prism {i}: edge {} -> {} is not vertical (plan offset {dx:.3e})",
                        p[k],
                        p[k + 3]
                    )));
                }
                if b[2] >= t[2] {
                    return Err(MeshError::Topology(format!(
                        "prism {i}: bottom vertex {} not below top vertex {}",
                        p[k],
                        p[k + 3]
                    )));
                }
            }
        }

        // Single layer: no prism bottom face may coincide with a prism top.
        let mut tops: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for (i, p) in self.prisms.iter().enumerate() {
            let mut key = vec![p[3], p[4], p[5]];
            key.sort_unstable();
            tops.insert(key, i);
        }
        for (i, p) in self.prisms.iter().enumerate() {
            let mut key = vec![p[0], p[1], p[2]];
            key.sort_unstable();
            if let Some(j) = tops.get(&key) {
                return Err(MeshError::Topology(format!(
                    "prisms {j} and {i} are stacked; the prism layer must be single"
                )));
            }
        }

        for (i, t) in self.tets.iter().enumerate() {
            let vs = [
                self.vertices[t[0]],
                self.vertices[t[1]],
                self.vertices[t[2]],
                self.vertices[t[3]],
            ];
            if tet_signed_volume(&vs) <= 0.0 {
                return Err(MeshError::Topology(format!(
                    "tet {i} has non-positive volume"
                )));
            }
        }

        // Every boundary face carries exactly one tag; tags sit on boundary
        // faces only.
        let mut tagged: BTreeMap<(usize, usize), BoundaryTag> = BTreeMap::new();
        for bf in &self.boundary_facets {
            if tagged.insert((bf.element, bf.local_face), bf.tag).is_some() {
                return Err(MeshError::Tagging(format!(
                    "element {} face {} tagged more than once",
                    bf.element, bf.local_face
                )));
            }
        }
        for (key, owners) in face_map {
            if owners.len() == 1 {
                let (e, f) = owners[0];
                if !tagged.contains_key(&(e, f)) {
                    return Err(MeshError::Tagging(format!(
                        "boundary face {key:?} of element {e} carries no tag"
                    )));
                }
            } else {
                for (e, f) in owners {
                    if tagged.contains_key(&(*e, *f)) {
                        return Err(MeshError::Tagging(format!(
                            "interior face {key:?} of element {e} carries a tag"
                        )));
                    }
                }
            }
        }

        // Special tag indices contiguous from 1.
        let mut specials: Vec<u32> = self
            .boundary_facets
            .iter()
            .filter_map(|f| match f.tag {
                BoundaryTag::Special(i) => Some(i),
                _ => None,
            })
            .collect();
        specials.sort_unstable();
        specials.dedup();
        for (k, idx) in specials.iter().enumerate() {
            if *idx != (k + 1) as u32 {
                return Err(MeshError::Tagging(format!(
                    "special boundary indices must be contiguous from 1, found {specials:?}"
                )));
            }
        }
        Ok(())
    }

    /// Trace = free-surface-tagged prism top facets.
    fn build_trace(&self) -> FreeSurfaceTrace {
        let mut trace = FreeSurfaceTrace::default();
        let mut vol_to_trace: BTreeMap<usize, usize> = BTreeMap::new();
        for bf in &self.boundary_facets {
            if bf.tag != BoundaryTag::FreeSurface {
                continue;
            }
            let (shape, conn) = self.element(bf.element);
            if shape != Shape::Prism || bf.local_face != 1 {
                continue; // free-surface tags on tet faces carry no trace
            }
            let tri_vol = [conn[3], conn[4], conn[5]];
            let mut tri_2d = [0usize; 3];
            for (k, &v) in tri_vol.iter().enumerate() {
                let idx = *vol_to_trace.entry(v).or_insert_with(|| {
                    trace
                        .vertices
                        .push([self.vertices[v][0], self.vertices[v][1]]);
                    trace.volume_vertex.push(v);
                    trace.vertices.len() - 1
                });
                tri_2d[k] = idx;
            }
            trace.triangles.push(tri_2d);
            trace.element_of_triangle.push(bf.element);
        }
        trace
    }

    /// Whether every free-surface facet is a prism top (required by the
    /// time stepper; pure boundary-value solves do not need it).
    pub fn trace_covers_free_surface(&self) -> bool {
        let n_fs = self
            .boundary_facets
            .iter()
            .filter(|f| f.tag == BoundaryTag::FreeSurface)
            .count();
        n_fs > 0 && self.free_surface_trace.triangles.len() == n_fs
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.boundary_facets.iter().any(|f| f.tag == tag)
    }

    pub fn facets_with_tag(&self, tag: BoundaryTag) -> Vec<usize> {
        self.boundary_facets
            .iter()
            .enumerate()
            .filter(|(_, f)| f.tag == tag)
            .map(|(i, _)| i)
            .collect()
    }

    /// Minimum free-surface node spacing: the smallest trace edge length
    /// scaled by the minimal Gauss-Lobatto gap fraction of order `p`.
    pub fn min_spacing(&self, p: usize) -> Result<f64, MeshError> {
        if self.free_surface_trace.triangles.is_empty() {
            return Err(MeshError::Domain(
                "mesh has an empty free-surface trace".into(),
            ));
        }
        let mut min_edge = f64::INFINITY;
        for tri in &self.free_surface_trace.triangles {
            for k in 0..3 {
                let a = self.free_surface_trace.vertices[tri[k]];
                let b = self.free_surface_trace.vertices[tri[(k + 1) % 3]];
                min_edge = min_edge.min((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        let gl = gauss_lobatto(p);
        let min_gap = gl
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        Ok(min_edge * min_gap / 2.0)
    }

    /// Unit outward (out of the fluid) normals of all facets with `tag`.
    pub fn facet_normals(&self, tag: BoundaryTag) -> Result<Vec<FacetNormal>, MeshError> {
        let ids = self.facets_with_tag(tag);
        if ids.is_empty() {
            return Err(MeshError::Domain(format!(
                "tag {} not present in mesh",
                tag.name()
            )));
        }
        let mut out = Vec::with_capacity(ids.len());
        for fi in ids {
            let bf = self.boundary_facets[fi];
            let verts = self.face_vertex_ids(bf.element, bf.local_face);
            let pts: Vec<[f64; 3]> = verts.iter().map(|&v| self.vertices[v]).collect();
            let (normal, area) = facet_normal_area(&pts)?;
            let (_, conn) = self.element(bf.element);
            let elem_centroid =
                centroid(&conn.iter().map(|&v| self.vertices[v]).collect::<Vec<_>>());
            let face_centroid = centroid(&pts);
            let outward = sub(face_centroid, elem_centroid);
            let normal = if dot(normal, outward) >= 0.0 {
                normal
            } else {
                [-normal[0], -normal[1], -normal[2]]
            };
            out.push(FacetNormal {
                facet: fi,
                normal,
                area,
            });
        }
        Ok(out)
    }

    /// Return a copy with vertices moved by `f`; all invariants revalidated.
    pub fn with_morphed_vertices(
        &self,
        f: impl Fn([f64; 3]) -> [f64; 3],
    ) -> Result<HybridMesh, MeshError> {
        let vertices: Vec<[f64; 3]> = self.vertices.iter().map(|&v| f(v)).collect();
        let tagged: Vec<(Vec<usize>, BoundaryTag)> = self
            .boundary_facets
            .iter()
            .map(|bf| (self.face_vertex_ids(bf.element, bf.local_face), bf.tag))
            .collect();
        HybridMesh::new(vertices, self.tets.clone(), self.prisms.clone(), tagged)
    }
}

fn centroid(pts: &[[f64; 3]]) -> [f64; 3] {
    let mut c = [0.0; 3];
    for p in pts {
        for d in 0..3 {
            c[d] += p[d];
        }
    }
    for d in 0..3 {
        c[d] /= pts.len() as f64;
    }
    c
}

/// Unit normal and area of a planar tri or quad facet.
fn facet_normal_area(pts: &[[f64; 3]]) -> Result<([f64; 3], f64), MeshError> {
    let n = match pts.len() {
        3 => cross(sub(pts[1], pts[0]), sub(pts[2], pts[0])),
        4 => cross(sub(pts[2], pts[0]), sub(pts[3], pts[1])),
        k => {
            return Err(MeshError::Geometry(format!(
                "facet with {k} vertices is not supported"
            )))
        }
    };
    let len = norm(n);
    if len < 1e-300 {
        return Err(MeshError::Geometry("degenerate (zero-area) facet".into()));
    }
    let area = len / 2.0;
    Ok(([n[0] / len, n[1] / len, n[2] / len], area))
}

/// Displace mesh nodes geometrically beyond `spec.start`.
pub fn apply_stretching(mesh: &HybridMesh, spec: &StretchSpec) -> Result<HybridMesh, MeshError> {
    if spec.ratio <= 1.0 {
        return Err(MeshError::Parameter(format!(
            "stretch ratio must exceed 1, got {}",
            spec.ratio
        )));
    }
    let coord_of = |v: &[f64; 3]| -> f64 {
        match spec.axis {
            StretchAxis::X => v[0].abs(),
            StretchAxis::Y => v[1].abs(),
            StretchAxis::Radial => v[0].hypot(v[1]),
        }
    };
    let cmax = mesh
        .vertices
        .iter()
        .map(|v| coord_of(v))
        .fold(0.0f64, f64::max);
    if spec.start < 0.0 || spec.start >= cmax {
        return Err(MeshError::Parameter(format!(
            "stretch start {} lies outside the mesh extent [0, {cmax}]",
            spec.start
        )));
    }

    let layer = match spec.layer {
        Some(l) if l > 0.0 => l,
        Some(l) => {
            return Err(MeshError::Parameter(format!(
                "layer thickness must be positive, got {l}"
            )))
        }
        None => detect_layer(mesh, spec, &coord_of)?,
    };

    let map_coord = |c: f64| -> f64 {
        let d = c - spec.start;
        if d <= 0.0 {
            return c;
        }
        // layer k boundary lands at start + layer * r (r^k - 1)/(r - 1)
        let num = (d / layer * spec.ratio.ln()).exp_m1();
        let den = spec.ratio - 1.0;
        spec.start + layer * spec.ratio * num / den
    };

    // guard against a mis-detected layer thickness blowing up the map
    let span = cmax - spec.start;
    let mapped_max = map_coord(cmax);
    if !mapped_max.is_finite() || mapped_max > spec.start + 1e6 * span {
        return Err(MeshError::Parameter(format!(
            "stretching with layer {layer:.3e} expands the outermost node to              {mapped_max:.3e}; give an explicit layer thickness"
        )));
    }

    mesh.with_morphed_vertices(|v| {
        let c = coord_of(&v);
        if c <= spec.start {
            return v;
        }
        let scale = map_coord(c) / c;
        match spec.axis {
            StretchAxis::X => [v[0] * scale, v[1], v[2]],
            StretchAxis::Y => [v[0], v[1] * scale, v[2]],
            StretchAxis::Radial => [v[0] * scale, v[1] * scale, v[2]],
        }
    })
    .map_err(|e| match e {
        MeshError::Topology(msg) => {
            MeshError::Topology(format!("element inverted after stretching: {msg}"))
        }
        other => other,
    })
}

fn detect_layer(
    mesh: &HybridMesh,
    spec: &StretchSpec,
    coord_of: &impl Fn(&[f64; 3]) -> f64,
) -> Result<f64, MeshError> {
    let diag = mesh.bbox_diagonal();
    let quant = 1e-9 * diag;
    let mut coords: Vec<f64> = mesh
        .vertices
        .iter()
        .map(coord_of)
        .filter(|c| *c >= spec.start - quant)
        .collect();
    coords.sort_by(|a, b| a.partial_cmp(b).unwrap());
    coords.dedup_by(|a, b| (*a - *b).abs() < quant);
    let min_gap = coords
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if min_gap.is_finite() && min_gap > 0.0 {
        Ok(min_gap)
    } else {
        Err(MeshError::Parameter(
            "cannot detect a layer thickness beyond the stretch start; give one explicitly".into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A single prism: bottom triangle at z = -1, top at z = 0.
    pub(crate) fn one_prism() -> HybridMesh {
        let vertices = vec![
            [0.0, 0.0, -1.0],
            [1.0, 0.0, -1.0],
            [0.0, 1.0, -1.0],
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
        ];
        let prisms = vec![[0, 1, 2, 3, 4, 5]];
        let tagged = vec![
            (vec![3, 4, 5], BoundaryTag::FreeSurface),
            (vec![0, 1, 2], BoundaryTag::Bathymetry),
            (vec![0, 1, 4, 3], BoundaryTag::Body),
            (vec![1, 2, 5, 4], BoundaryTag::FarField),
            (vec![2, 0, 3, 5], BoundaryTag::Body),
        ];
        HybridMesh::new(vertices, vec![], prisms, tagged).unwrap()
    }

    #[test]
    fn single_prism_mesh_is_valid() {
        let m = one_prism();
        assert_eq!(m.prisms.len(), 1);
        assert_eq!(m.tets.len(), 0);
        assert_eq!(m.free_surface_trace.triangles.len(), 1);
        assert!(m.trace_covers_free_surface());
    }

    #[test]
    fn prism_top_below_surface_rejected() {
        let vertices = vec![
            [0.0, 0.0, -1.0],
            [1.0, 0.0, -1.0],
            [0.0, 1.0, -1.0],
            [0.0, 0.0, -0.1],
            [1.0, 0.0, -0.1],
            [0.0, 1.0, -0.1],
        ];
        let prisms = vec![[0, 1, 2, 3, 4, 5]];
        let tagged = vec![
            (vec![3, 4, 5], BoundaryTag::FreeSurface),
            (vec![0, 1, 2], BoundaryTag::Bathymetry),
            (vec![0, 1, 4, 3], BoundaryTag::Body),
            (vec![1, 2, 5, 4], BoundaryTag::Body),
            (vec![2, 0, 3, 5], BoundaryTag::Body),
        ];
        let err = HybridMesh::new(vertices, vec![], prisms, tagged).unwrap_err();
        assert!(matches!(err, MeshError::Topology(_)), "{err}");
        assert!(err.to_string().contains("prism 0"));
    }

    #[test]
    fn untagged_boundary_face_rejected() {
        let vertices = vec![
            [0.0, 0.0, -1.0],
            [1.0, 0.0, -1.0],
            [0.0, 1.0, -1.0],
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
        ];
        let prisms = vec![[0, 1, 2, 3, 4, 5]];
        let tagged = vec![(vec![3, 4, 5], BoundaryTag::FreeSurface)];
        let err = HybridMesh::new(vertices, vec![], prisms, tagged).unwrap_err();
        assert!(matches!(err, MeshError::Tagging(_)));
    }

    #[test]
    fn tag_names_round_trip() {
        for tag in [
            BoundaryTag::FreeSurface,
            BoundaryTag::Bathymetry,
            BoundaryTag::FarField,
            BoundaryTag::Body,
            BoundaryTag::SymX,
            BoundaryTag::SymY,
            BoundaryTag::Special(1),
            BoundaryTag::Special(3),
        ] {
            assert_eq!(BoundaryTag::from_name(&tag.name()).unwrap(), tag);
        }
        assert_eq!(
            BoundaryTag::from_name("FreeSurface").unwrap(),
            BoundaryTag::FreeSurface
        );
        assert!(BoundaryTag::from_name("symz").is_err());
    }

    #[test]
    fn min_spacing_scales_with_lobatto_gap() {
        let m = gen::tank(&gen::TankSpec::uniform_box(2.0, 2.0, 2.0, 1, 1, 2)).unwrap();
        // square plan split by one diagonal: shortest edge is 2.0
        let d1 = m.min_spacing(1).unwrap();
        let d2 = m.min_spacing(2).unwrap();
        assert!((d1 - 2.0).abs() < 1e-12, "{d1}");
        assert!((d2 - 1.0).abs() < 1e-12, "{d2}");
    }

    #[test]
    fn stretching_geometric_series() {
        // node columns at x = 0,1,2,3; start 1, ratio 2 -> 0,1,3,7
        let m = gen::tank(&gen::TankSpec::uniform_box(3.0, 1.0, 2.0, 3, 1, 2)).unwrap();
        let spec = StretchSpec {
            axis: StretchAxis::X,
            start: 1.0,
            ratio: 2.0,
            layer: None,
        };
        let s = apply_stretching(&m, &spec).unwrap();
        let mut xs: Vec<f64> = s.vertices.iter().map(|v| v[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        assert_eq!(xs.len(), 4);
        for (x, expect) in xs.iter().zip(&[0.0, 1.0, 3.0, 7.0]) {
            assert!((x - expect).abs() < 1e-9, "{xs:?}");
        }
        assert_eq!(s.element_count(), m.element_count());
        assert_eq!(s.boundary_facets.len(), m.boundary_facets.len());
    }

    #[test]
    fn stretching_identity_limit() {
        let m = gen::tank(&gen::TankSpec::uniform_box(3.0, 1.0, 2.0, 3, 1, 2)).unwrap();
        let spec = StretchSpec {
            axis: StretchAxis::X,
            start: 1.0,
            ratio: 1.0 + 1e-13,
            layer: None,
        };
        let s = apply_stretching(&m, &spec).unwrap();
        for (a, b) in m.vertices.iter().zip(&s.vertices) {
            for d in 0..3 {
                assert!((a[d] - b[d]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn stretching_preserves_interior_exactly() {
        let m = gen::tank(&gen::TankSpec::uniform_box(4.0, 2.0, 2.0, 4, 2, 2)).unwrap();
        let spec = StretchSpec {
            axis: StretchAxis::X,
            start: 2.0,
            ratio: 1.5,
            layer: None,
        };
        let s = apply_stretching(&m, &spec).unwrap();
        for (a, b) in m.vertices.iter().zip(&s.vertices) {
            if a[0].abs() <= 2.0 {
                assert_eq!(a, b, "interior node moved");
            }
        }
    }

    #[test]
    fn stretching_bad_ratio_rejected() {
        let m = one_prism();
        let spec = StretchSpec {
            axis: StretchAxis::X,
            start: 0.5,
            ratio: 0.9,
            layer: None,
        };
        assert!(matches!(
            apply_stretching(&m, &spec),
            Err(MeshError::Parameter(_))
        ));
    }

    #[test]
    fn axis_aligned_facet_normals() {
        let m = gen::tank(&gen::TankSpec::uniform_box(2.0, 2.0, 1.0, 2, 2, 2)).unwrap();
        for fam in m.facet_normals(BoundaryTag::Bathymetry).unwrap() {
            assert!(fam.normal[0].abs() < 1e-12);
            assert!(fam.normal[1].abs() < 1e-12);
            assert!((fam.normal[2] + 1.0).abs() < 1e-12, "bottom points down");
        }
        for fam in m.facet_normals(BoundaryTag::FreeSurface).unwrap() {
            assert!((fam.normal[2] - 1.0).abs() < 1e-12, "top points up");
        }
    }

    #[test]
    fn closed_surface_normals_integrate_to_zero() {
        let m = gen::tank(&gen::TankSpec::uniform_box(2.0, 3.0, 2.0, 2, 3, 3)).unwrap();
        let mut acc = [0.0f64; 3];
        let mut total_area = 0.0;
        for tag in [
            BoundaryTag::FreeSurface,
            BoundaryTag::Bathymetry,
            BoundaryTag::FarField,
        ] {
            for fam in m.facet_normals(tag).unwrap() {
                for d in 0..3 {
                    acc[d] += fam.normal[d] * fam.area;
                }
                total_area += fam.area;
            }
        }
        for d in 0..3 {
            assert!(acc[d].abs() < 1e-10 * total_area, "component {d}: {acc:?}");
        }
    }

    #[test]
    fn min_spacing_invariant_under_node_reordering() {
        let m = gen::tank(&gen::TankSpec::uniform_box(2.0, 2.0, 2.0, 2, 2, 2)).unwrap();
        let n = m.vertices.len();
        let perm: Vec<usize> = {
            // a fixed permutation: reverse order
            (0..n).rev().collect()
        };
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let vertices: Vec<[f64; 3]> = perm.iter().map(|&p| m.vertices[p]).collect();
        let tets: Vec<[usize; 4]> = m
            .tets
            .iter()
            .map(|t| [inv[t[0]], inv[t[1]], inv[t[2]], inv[t[3]]])
            .collect();
        let prisms: Vec<[usize; 6]> = m
            .prisms
            .iter()
            .map(|p| [inv[p[0]], inv[p[1]], inv[p[2]], inv[p[3]], inv[p[4]], inv[p[5]]])
            .collect();
        let tagged: Vec<(Vec<usize>, BoundaryTag)> = m
            .boundary_facets
            .iter()
            .map(|bf| {
                (
                    m.face_vertex_ids(bf.element, bf.local_face)
                        .iter()
                        .map(|&v| inv[v])
                        .collect(),
                    bf.tag,
                )
            })
            .collect();
        let m2 = HybridMesh::new(vertices, tets, prisms, tagged).unwrap();
        assert_eq!(m.min_spacing(3).unwrap(), m2.min_spacing(3).unwrap());
    }
}
