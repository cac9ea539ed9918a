//! Global sparse operators on the hybrid mesh: volumetric stiffness,
//! boundary loads and quadrature, free-surface stiffness/mass, vertical
//! derivative extraction, and post-assembly Dirichlet imposition.
//!
//! Elements are accumulated in ascending element order so assembled
//! operators are bitwise reproducible for a given mesh and order.

use crate::linalg::{SparseBuilder, SparseMatrix};
use crate::mesh::{BoundaryTag, HybridMesh, MeshError};
use crate::refelem::tri2d::TriElement;
use crate::refelem::{face_geometry, RefElemError, ReferenceElement, Shape};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    RefElem(#[from] RefElemError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("topology error: {0}")]
    Topology(String),
}

/// Continuous global numbering of the nodal degrees of freedom.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub order: usize,
    pub n_dof: usize,
    /// per mesh element: local node -> global dof
    pub element_dofs: Vec<Vec<usize>>,
    /// physical coordinates of every dof
    pub dof_coords: Vec<[f64; 3]>,
    /// sorted dofs on the facets of each boundary tag
    pub boundary_dofs: BTreeMap<BoundaryTag, Vec<usize>>,
}

/// Physical node positions of an element's reference nodes.
pub fn element_node_coords(
    mesh: &HybridMesh,
    re: &ReferenceElement,
    element: usize,
) -> Vec<[f64; 3]> {
    let verts = mesh.element_vertices(element);
    re.nodes
        .iter()
        .map(|&pt| {
            let (vals, _) = re.shape.geometry_basis(pt);
            let mut x = [0.0; 3];
            for (v, nv) in verts.iter().zip(&vals) {
                for d in 0..3 {
                    x[d] += v[d] * nv;
                }
            }
            x
        })
        .collect()
}

/// Physical positions of the volume quadrature points of an element.
pub fn element_quad_coords(
    mesh: &HybridMesh,
    re: &ReferenceElement,
    element: usize,
) -> Vec<[f64; 3]> {
    let verts = mesh.element_vertices(element);
    re.quad
        .points
        .iter()
        .map(|&pt| {
            let (vals, _) = re.shape.geometry_basis(pt);
            let mut x = [0.0; 3];
            for (v, nv) in verts.iter().zip(&vals) {
                for d in 0..3 {
                    x[d] += v[d] * nv;
                }
            }
            x
        })
        .collect()
}

pub fn reference_for(mesh: &HybridMesh, element: usize, p: usize) -> Arc<ReferenceElement> {
    let (shape, _) = mesh.element(element);
    ReferenceElement::cached(shape, p).expect("order validated by build_dofmap")
}

/// Build the conforming dof numbering by geometric node identification.
pub fn build_dofmap(mesh: &HybridMesh, p: usize) -> Result<DofMap, AssemblyError> {
    // validate the order once
    ReferenceElement::cached(Shape::Tet, p)?;
    ReferenceElement::cached(Shape::Prism, p)?;

    let diag = mesh.bbox_diagonal();
    let match_tol = 1e-9 * diag;
    let cell = 64.0 * match_tol;

    let mut grid: BTreeMap<(i64, i64, i64), Vec<usize>> = BTreeMap::new();
    let mut dof_coords: Vec<[f64; 3]> = Vec::new();
    let mut element_dofs: Vec<Vec<usize>> = Vec::with_capacity(mesh.element_count());

    let key_of = |x: [f64; 3]| -> (i64, i64, i64) {
        (
            (x[0] / cell).floor() as i64,
            (x[1] / cell).floor() as i64,
            (x[2] / cell).floor() as i64,
        )
    };

    for e in 0..mesh.element_count() {
        let re = reference_for(mesh, e, p);
        let coords = element_node_coords(mesh, &re, e);
        let mut dofs = Vec::with_capacity(coords.len());
        for x in coords {
            let (kx, ky, kz) = key_of(x);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(cands) = grid.get(&(kx + dx, ky + dy, kz + dz)) {
                            for &c in cands {
                                let d = dof_coords[c];
                                let dist = ((d[0] - x[0]).powi(2)
                                    + (d[1] - x[1]).powi(2)
                                    + (d[2] - x[2]).powi(2))
                                .sqrt();
                                if dist < match_tol {
                                    found = Some(c);
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
            let id = match found {
                Some(c) => c,
                None => {
                    let id = dof_coords.len();
                    dof_coords.push(x);
                    grid.entry((kx, ky, kz)).or_default().push(id);
                    id
                }
            };
            dofs.push(id);
        }
        element_dofs.push(dofs);
    }

    // per-tag boundary dof sets via the face node ids
    let mut boundary_dofs: BTreeMap<BoundaryTag, Vec<usize>> = BTreeMap::new();
    for bf in &mesh.boundary_facets {
        let re = reference_for(mesh, bf.element, p);
        let set = boundary_dofs.entry(bf.tag).or_default();
        for &local in &re.faces[bf.local_face].node_ids {
            set.push(element_dofs[bf.element][local]);
        }
    }
    for set in boundary_dofs.values_mut() {
        set.sort_unstable();
        set.dedup();
    }

    Ok(DofMap {
        order: p,
        n_dof: dof_coords.len(),
        element_dofs,
        dof_coords,
        boundary_dofs,
    })
}

/// Assemble the volumetric stiffness matrix (Dirichlet energy form).
pub fn assemble_stiffness(mesh: &HybridMesh, dofmap: &DofMap) -> Result<SparseMatrix, AssemblyError> {
    let p = dofmap.order;
    let mut builder = SparseBuilder::new(dofmap.n_dof);
    for e in 0..mesh.element_count() {
        let re = reference_for(mesh, e, p);
        let verts = mesh.element_vertices(e);
        let map = re.quad_geometry(&verts)?;
        let n = re.node_count();
        let nq = re.quad.len();
        let mut local = vec![0.0f64; n * n];
        let mut gx = vec![0.0f64; n];
        let mut gy = vec![0.0f64; n];
        let mut gz = vec![0.0f64; n];
        for q in 0..nq {
            let it = &map.inv_t[q];
            for i in 0..n {
                let dr = re.dq[0][(q, i)];
                let ds = re.dq[1][(q, i)];
                let dt = re.dq[2][(q, i)];
                gx[i] = it[0][0] * dr + it[0][1] * ds + it[0][2] * dt;
                gy[i] = it[1][0] * dr + it[1][1] * ds + it[1][2] * dt;
                gz[i] = it[2][0] * dr + it[2][1] * ds + it[2][2] * dt;
            }
            let wd = re.quad.weights[q] * map.det[q];
            for i in 0..n {
                let (gxi, gyi, gzi) = (gx[i], gy[i], gz[i]);
                let row = &mut local[i * n..(i + 1) * n];
                for j in 0..n {
                    row[j] += wd * (gxi * gx[j] + gyi * gy[j] + gzi * gz[j]);
                }
            }
        }
        let dofs = &dofmap.element_dofs[e];
        for i in 0..n {
            for j in 0..n {
                builder.add(dofs[i], dofs[j], local[i * n + j]);
            }
        }
    }
    Ok(builder.build())
}

/// Quadrature data of all facets carrying one boundary tag, in facet order.
#[derive(Debug, Clone)]
pub struct BoundaryQuadrature {
    pub tags: Vec<BoundaryTag>,
    /// physical quadrature points
    pub points: Vec<[f64; 3]>,
    /// unit normals pointing out of the fluid
    pub normals: Vec<[f64; 3]>,
    /// quadrature weight times surface jacobian
    pub weights: Vec<f64>,
    /// one entry per facet: (facet index, element, local_face, point offset, count)
    pub facets: Vec<(usize, usize, usize, usize, usize)>,
}

impl BoundaryQuadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Integrate a per-point integrand against the surface measure.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Evaluate a global nodal field at all quadrature points.
    pub fn interpolate(&self, mesh: &HybridMesh, dofmap: &DofMap, field: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for &(_, element, local_face, offset, count) in &self.facets {
            let re = reference_for(mesh, element, dofmap.order);
            let interp = &re.faces[local_face].interp;
            let dofs = &dofmap.element_dofs[element];
            for q in 0..count {
                let mut acc = 0.0;
                for (j, &d) in dofs.iter().enumerate() {
                    acc += interp[(q, j)] * field[d];
                }
                out[offset + q] = acc;
            }
        }
        out
    }
}

/// Build surface quadrature for all facets carrying any of `tags`.
pub fn boundary_quadrature(
    mesh: &HybridMesh,
    dofmap: &DofMap,
    tags: &[BoundaryTag],
) -> Result<BoundaryQuadrature, AssemblyError> {
    for tag in tags {
        if !mesh.has_tag(*tag) {
            return Err(AssemblyError::Domain(format!(
                "tag {} not present in mesh",
                tag.name()
            )));
        }
    }
    let mut bq = BoundaryQuadrature {
        tags: tags.to_vec(),
        points: Vec::new(),
        normals: Vec::new(),
        weights: Vec::new(),
        facets: Vec::new(),
    };
    for (fi, bf) in mesh.boundary_facets.iter().enumerate() {
        if !tags.contains(&bf.tag) {
            continue;
        }
        let re = reference_for(mesh, bf.element, dofmap.order);
        let face = &re.faces[bf.local_face];
        let corner_ids = mesh.face_vertex_ids(bf.element, bf.local_face);
        let corners: Vec<[f64; 3]> = corner_ids.iter().map(|&v| mesh.vertices[v]).collect();
        let (_, conn) = mesh.element(bf.element);
        let ecent = {
            let mut c = [0.0; 3];
            for &v in conn {
                for d in 0..3 {
                    c[d] += mesh.vertices[v][d] / conn.len() as f64;
                }
            }
            c
        };
        let offset = bq.points.len();
        for (k, uv) in face.rule.points.iter().enumerate() {
            let (x, tu, tv) = face_geometry(&corners, uv[0], uv[1]);
            let mut nrm = [
                tu[1] * tv[2] - tu[2] * tv[1],
                tu[2] * tv[0] - tu[0] * tv[2],
                tu[0] * tv[1] - tu[1] * tv[0],
            ];
            let js = (nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]).sqrt();
            if js <= 0.0 {
                return Err(AssemblyError::Topology(format!(
                    "degenerate facet geometry on element {} face {}",
                    bf.element, bf.local_face
                )));
            }
            for d in 0..3 {
                nrm[d] /= js;
            }
            let toward = [x[0] - ecent[0], x[1] - ecent[1], x[2] - ecent[2]];
            if nrm[0] * toward[0] + nrm[1] * toward[1] + nrm[2] * toward[2] < 0.0 {
                for d in 0..3 {
                    nrm[d] = -nrm[d];
                }
            }
            bq.points.push(x);
            bq.normals.push(nrm);
            bq.weights.push(face.rule.weights[k] * js);
        }
        bq.facets
            .push((fi, bf.element, bf.local_face, offset, face.rule.len()));
    }
    Ok(bq)
}

/// Neumann load vector from flux values at the boundary quadrature points.
pub fn assemble_neumann_load_values(
    mesh: &HybridMesh,
    dofmap: &DofMap,
    bq: &BoundaryQuadrature,
    q_values: &[f64],
) -> Vec<f64> {
    assert_eq!(q_values.len(), bq.len());
    let mut b = vec![0.0; dofmap.n_dof];
    for &(_, element, local_face, offset, count) in &bq.facets {
        let re = reference_for(mesh, element, dofmap.order);
        let interp = &re.faces[local_face].interp;
        let dofs = &dofmap.element_dofs[element];
        for q in 0..count {
            let wq = bq.weights[offset + q] * q_values[offset + q];
            if wq == 0.0 {
                continue;
            }
            for (j, &d) in dofs.iter().enumerate() {
                b[d] += wq * interp[(q, j)];
            }
        }
    }
    b
}

/// Neumann load from a flux function of position and outward normal.
pub fn assemble_neumann_load(
    mesh: &HybridMesh,
    dofmap: &DofMap,
    tag: BoundaryTag,
    q: impl Fn([f64; 3], [f64; 3]) -> f64,
) -> Result<Vec<f64>, AssemblyError> {
    let bq = boundary_quadrature(mesh, dofmap, &[tag])?;
    let values: Vec<f64> = bq
        .points
        .iter()
        .zip(&bq.normals)
        .map(|(&x, &n)| q(x, n))
        .collect();
    Ok(assemble_neumann_load_values(mesh, dofmap, &bq, &values))
}

/// Volume source load: b_i = integral of f * h_i over the mesh.
pub fn assemble_source_load(
    mesh: &HybridMesh,
    dofmap: &DofMap,
    f: impl Fn([f64; 3]) -> f64,
) -> Result<Vec<f64>, AssemblyError> {
    let mut b = vec![0.0; dofmap.n_dof];
    for e in 0..mesh.element_count() {
        let re = reference_for(mesh, e, dofmap.order);
        let verts = mesh.element_vertices(e);
        let map = re.quad_geometry(&verts)?;
        let coords = element_quad_coords(mesh, &re, e);
        let dofs = &dofmap.element_dofs[e];
        for q in 0..re.quad.len() {
            let wf = re.quad.weights[q] * map.det[q] * f(coords[q]);
            for (j, &d) in dofs.iter().enumerate() {
                b[d] += wf * re.vq[(q, j)];
            }
        }
    }
    Ok(b)
}

/// Integrate a function of position and the discrete solution over the
/// mesh with the assembly quadrature.
pub fn integrate_volume(
    mesh: &HybridMesh,
    dofmap: &DofMap,
    field: &[f64],
    f: impl Fn([f64; 3], f64) -> f64,
) -> Result<f64, AssemblyError> {
    let mut acc = 0.0;
    for e in 0..mesh.element_count() {
        let re = reference_for(mesh, e, dofmap.order);
        let verts = mesh.element_vertices(e);
        let map = re.quad_geometry(&verts)?;
        let coords = element_quad_coords(mesh, &re, e);
        let dofs = &dofmap.element_dofs[e];
        for q in 0..re.quad.len() {
            let mut u = 0.0;
            for (j, &d) in dofs.iter().enumerate() {
                u += re.vq[(q, j)] * field[d];
            }
            acc += re.quad.weights[q] * map.det[q] * f(coords[q], u);
        }
    }
    Ok(acc)
}

/// Symmetric Dirichlet elimination of a sparse SPD operator. The original
/// matrix stays available for right-hand-side lifts.
#[derive(Debug, Clone)]
pub struct DirichletSystem {
    /// modified operator: identity-coupled constrained rows/columns
    pub modified: SparseMatrix,
    /// sorted constrained dofs
    pub constrained: Vec<usize>,
    mask: Vec<bool>,
    /// diagonal entries of the original operator at constrained dofs
    diag: Vec<f64>,
}

impl DirichletSystem {
    /// Eliminate `constrained` symmetrically from `a`.
    pub fn new(a: &SparseMatrix, constrained: &[usize]) -> DirichletSystem {
        let mut mask = vec![false; a.n];
        for &c in constrained {
            mask[c] = true;
        }
        let mut sorted: Vec<usize> = constrained.to_vec();
        sorted.sort_unstable();
        sorted.dedup();

        let mut builder = SparseBuilder::new(a.n);
        for i in 0..a.n {
            if mask[i] {
                // keep the original diagonal so scaling stays consistent
                let mut d = 0.0;
                for k in a.row_offsets[i]..a.row_offsets[i + 1] {
                    if a.col_indices[k] == i {
                        d = a.values[k];
                    }
                }
                builder.add(i, i, if d != 0.0 { d } else { 1.0 });
            } else {
                for k in a.row_offsets[i]..a.row_offsets[i + 1] {
                    let j = a.col_indices[k];
                    if !mask[j] {
                        builder.add(i, j, a.values[k]);
                    }
                }
            }
        }
        let modified = builder.build();
        let diag = sorted
            .iter()
            .map(|&c| {
                let mut d = 0.0;
                for k in a.row_offsets[c]..a.row_offsets[c + 1] {
                    if a.col_indices[k] == c {
                        d = a.values[k];
                    }
                }
                if d != 0.0 {
                    d
                } else {
                    1.0
                }
            })
            .collect();
        DirichletSystem {
            modified,
            constrained: sorted,
            mask,
            diag,
        }
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.mask[dof]
    }

    /// Build the lifted right-hand side: free rows get b - A g_hat, and
    /// constrained rows pin the boundary values through the kept diagonal.
    pub fn rhs(&self, a_original: &SparseMatrix, b: &[f64], values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.constrained.len());
        let n = a_original.n;
        let mut ghat = vec![0.0; n];
        for (k, &c) in self.constrained.iter().enumerate() {
            ghat[c] = values[k];
        }
        let lift = a_original.matvec_alloc(&ghat);
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[i] = if self.mask[i] { 0.0 } else { b[i] - lift[i] };
        }
        for (k, &c) in self.constrained.iter().enumerate() {
            out[c] = self.diag[k] * values[k];
        }
        out
    }

    /// Seed constrained entries of a warm-start vector with the boundary
    /// values so conjugate gradients keeps them exact.
    pub fn seed(&self, x: &mut [f64], values: &[f64]) {
        for (k, &c) in self.constrained.iter().enumerate() {
            x[c] = values[k];
        }
    }
}

/// Rectangular CSR operator (rows: free-surface dofs, cols: volume dofs).
#[derive(Debug, Clone)]
pub struct RectMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl RectMatrix {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            y[i] = acc;
        }
    }
}

/// Free-surface trace operators on the prism-top triangulation.
#[derive(Debug, Clone)]
pub struct FsOperators {
    /// fs dof -> volume dof (sorted by volume dof)
    pub fs_to_vol: Vec<usize>,
    /// volume dof -> fs dof
    pub vol_to_fs: BTreeMap<usize, usize>,
    /// 2D stiffness on the trace
    pub stiffness: SparseMatrix,
    /// 2D mass on the trace
    pub mass: SparseMatrix,
    /// volume nodal field -> vertical derivative at fs dofs
    pub dz: RectMatrix,
    /// per trace triangle: prism element, fs dofs of its nodes, 2D geometry
    pub tris: Vec<FsTriangle>,
    /// fs dofs on the trace boundary, keyed by the vertical boundary tag
    /// their edge hangs on
    pub rim: BTreeMap<BoundaryTag, Vec<usize>>,
}

/// One trace triangle with its 2D geometric factors.
#[derive(Debug, Clone)]
pub struct FsTriangle {
    pub element: usize,
    /// fs dof of each 2D node
    pub fs_dofs: Vec<usize>,
    /// inverse-transpose of the constant 2D jacobian
    pub inv_t: [[f64; 2]; 2],
    pub det: f64,
}

/// Assemble free-surface stiffness/mass, the vertical-derivative trace,
/// and the rim classification.
pub fn assemble_fs_operators(
    mesh: &HybridMesh,
    dofmap: &DofMap,
) -> Result<FsOperators, AssemblyError> {
    if mesh.free_surface_trace.triangles.is_empty() {
        return Err(AssemblyError::Domain(
            "mesh has an empty free-surface trace".into(),
        ));
    }
    let p = dofmap.order;
    let te = TriElement::cached(p)?;
    let prism_re = ReferenceElement::cached(Shape::Prism, p)?;
    let top_face = &prism_re.faces[1];

    // collect fs dofs from the free-surface facets (prism tops)
    let fs_set = dofmap
        .boundary_dofs
        .get(&BoundaryTag::FreeSurface)
        .cloned()
        .unwrap_or_default();
    let fs_to_vol: Vec<usize> = fs_set;
    let vol_to_fs: BTreeMap<usize, usize> = fs_to_vol
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();
    let n_fs = fs_to_vol.len();

    let mut k_builder = SparseBuilder::new(n_fs);
    let mut m_builder = SparseBuilder::new(n_fs);
    let mut dz_sum: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n_fs];
    let mut dz_count: Vec<f64> = vec![0.0; n_fs];
    let mut tris = Vec::new();

    for bf in &mesh.boundary_facets {
        if bf.tag != BoundaryTag::FreeSurface {
            continue;
        }
        let (shape, conn) = mesh.element(bf.element);
        if shape != Shape::Prism || bf.local_face != 1 {
            return Err(AssemblyError::Domain(
                "free-surface facets must be prism tops for trace operators".into(),
            ));
        }
        // 2D affine geometry from the top triangle
        let v0 = mesh.vertices[conn[3]];
        let v1 = mesh.vertices[conn[4]];
        let v2 = mesh.vertices[conn[5]];
        // map from bi-unit triangle: x = v0*(-(r+s)/2) + v1*(1+r)/2 + v2*(1+s)/2
        let jac = [
            [(v1[0] - v0[0]) / 2.0, (v2[0] - v0[0]) / 2.0],
            [(v1[1] - v0[1]) / 2.0, (v2[1] - v0[1]) / 2.0],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det <= 0.0 {
            return Err(AssemblyError::Topology(format!(
                "trace triangle of element {} has non-positive area",
                bf.element
            )));
        }
        let inv = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        let inv_t = [[inv[0][0], inv[1][0]], [inv[0][1], inv[1][1]]];

        // fs dofs of the triangle nodes, in TriElement node order
        let elem_dofs = &dofmap.element_dofs[bf.element];
        let fs_dofs: Vec<usize> = top_face
            .node_ids
            .iter()
            .map(|&local| vol_to_fs[&elem_dofs[local]])
            .collect();

        let n = te.node_count();
        let nq = te.quad.len();
        let mut k_local = vec![0.0; n * n];
        let mut m_local = vec![0.0; n * n];
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; n];
        for q in 0..nq {
            for i in 0..n {
                let dr = te.dq[0][(q, i)];
                let ds = te.dq[1][(q, i)];
                gx[i] = inv_t[0][0] * dr + inv_t[0][1] * ds;
                gy[i] = inv_t[1][0] * dr + inv_t[1][1] * ds;
            }
            let wd = te.quad.weights[q] * det;
            for i in 0..n {
                for j in 0..n {
                    k_local[i * n + j] += wd * (gx[i] * gx[j] + gy[i] * gy[j]);
                    m_local[i * n + j] += wd * te.vq[(q, i)] * te.vq[(q, j)];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                k_builder.add(fs_dofs[i], fs_dofs[j], k_local[i * n + j]);
                m_builder.add(fs_dofs[i], fs_dofs[j], m_local[i * n + j]);
            }
        }

        // vertical derivative rows at the top-face nodes
        let verts = mesh.element_vertices(bf.element);
        let top_points: Vec<[f64; 3]> = top_face
            .node_ids
            .iter()
            .map(|&local| prism_re.nodes[local])
            .collect();
        let vol_map = prism_re.geometric_factors(&verts, &top_points)?;
        for (k, &local) in top_face.node_ids.iter().enumerate() {
            let it = &vol_map.inv_t[k];
            let fs_dof = fs_dofs[k];
            let row = dz_sum.get_mut(fs_dof).unwrap();
            for j in 0..prism_re.node_count() {
                let dval = it[2][0] * prism_re.diff_ops[0][(local, j)]
                    + it[2][1] * prism_re.diff_ops[1][(local, j)]
                    + it[2][2] * prism_re.diff_ops[2][(local, j)];
                if dval != 0.0 {
                    *row.entry(elem_dofs[j]).or_insert(0.0) += dval;
                }
            }
            dz_count[fs_dof] += 1.0;
        }

        tris.push(FsTriangle {
            element: bf.element,
            fs_dofs,
            inv_t,
            det,
        });
    }

    // average multiple prism contributions per fs dof
    let mut row_offsets = Vec::with_capacity(n_fs + 1);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    row_offsets.push(0);
    for (row, count) in dz_sum.iter().zip(&dz_count) {
        for (&col, &v) in row {
            col_indices.push(col);
            values.push(v / count.max(1.0));
        }
        row_offsets.push(col_indices.len());
    }
    let dz = RectMatrix {
        n_rows: n_fs,
        n_cols: dofmap.n_dof,
        row_offsets,
        col_indices,
        values,
    };

    // rim: fs dofs also belonging to a vertical boundary tag
    let mut rim: BTreeMap<BoundaryTag, Vec<usize>> = BTreeMap::new();
    for (tag, dofs) in &dofmap.boundary_dofs {
        if *tag == BoundaryTag::FreeSurface || *tag == BoundaryTag::Bathymetry {
            continue;
        }
        let mut shared: Vec<usize> = dofs
            .iter()
            .filter_map(|d| vol_to_fs.get(d).copied())
            .collect();
        if !shared.is_empty() {
            shared.sort_unstable();
            rim.insert(*tag, shared);
        }
    }

    Ok(FsOperators {
        fs_to_vol,
        vol_to_fs,
        stiffness: k_builder.build(),
        mass: m_builder.build(),
        dz,
        tris,
        rim,
    })
}
