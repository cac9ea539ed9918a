//! Reference-domain bases, quadrature, and differentiation for tetrahedra
//! and prisms up to polynomial order 10.
//!
//! A [`ReferenceElement`] carries the warp-and-blend interpolation nodes,
//! the modal Vandermonde matrix with its inverse, nodal differentiation
//! operators, a volume quadrature rule of degree 2P+1 together with
//! interpolation/differentiation matrices onto it, and per-face quadrature
//! data. Elements are immutable and cached per (shape, order).

pub mod basis;
pub mod jacobi;
pub mod nodes;
pub mod quadrature;
pub mod tri2d;

use nalgebra::DMatrix;
use quadrature::{prism_rule, quad_rule, tet_rule, tri_rule, QuadRule};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

/// Maximum supported polynomial order.
pub const MAX_ORDER: usize = 10;

#[derive(Debug, Error)]
pub enum RefElemError {
    #[error("unsupported polynomial order {0}; supported range is 1..={MAX_ORDER}")]
    UnsupportedOrder(usize),
    #[error("Vandermonde matrix is numerically singular for {0:?} at order {1}")]
    SingularVandermonde(Shape, usize),
    #[error("interpolation target ({0}, {1}, {2}) lies outside the reference domain")]
    TargetOutsideDomain(f64, f64, f64),
    #[error("non-positive jacobian determinant {det:.3e} at quadrature point {point}")]
    NonPositiveJacobian { det: f64, point: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Shape {
    Tet,
    Prism,
}

impl Shape {
    pub fn vertex_count(&self) -> usize {
        match self {
            Shape::Tet => 4,
            Shape::Prism => 6,
        }
    }

    pub fn node_count(&self, p: usize) -> usize {
        match self {
            Shape::Tet => nodes::tet_node_count(p),
            Shape::Prism => nodes::tri_node_count(p) * (p + 1),
        }
    }

    /// Measure of the bi-unit reference domain.
    pub fn reference_volume(&self) -> f64 {
        match self {
            Shape::Tet => 4.0 / 3.0,
            Shape::Prism => 4.0,
        }
    }

    /// Reference corner vertices.
    pub fn vertices(&self) -> Vec<[f64; 3]> {
        match self {
            Shape::Tet => vec![
                [-1.0, -1.0, -1.0],
                [1.0, -1.0, -1.0],
                [-1.0, 1.0, -1.0],
                [-1.0, -1.0, 1.0],
            ],
            Shape::Prism => vec![
                [-1.0, -1.0, -1.0],
                [1.0, -1.0, -1.0],
                [-1.0, 1.0, -1.0],
                [-1.0, -1.0, 1.0],
                [1.0, -1.0, 1.0],
                [-1.0, 1.0, 1.0],
            ],
        }
    }

    pub fn face_count(&self) -> usize {
        match self {
            Shape::Tet => 4,
            Shape::Prism => 5,
        }
    }

    /// Corner vertex indices of each local face, ordered for the face
    /// parametrization (triangles counterclockwise seen from outside is not
    /// required; orientation is resolved against element centroids).
    pub fn face_corners(&self, face: usize) -> &'static [usize] {
        match self {
            Shape::Tet => match face {
                0 => &[0, 1, 2], // t = -1
                1 => &[0, 1, 3], // s = -1
                2 => &[1, 2, 3], // r+s+t = -1
                3 => &[0, 2, 3], // r = -1
                _ => panic!("tet has 4 faces"),
            },
            Shape::Prism => match face {
                0 => &[0, 1, 2],    // bottom triangle, t = -1
                1 => &[3, 4, 5],    // top triangle, t = +1
                2 => &[0, 1, 4, 3], // s = -1
                3 => &[1, 2, 5, 4], // r + s = 0
                4 => &[2, 0, 3, 5], // r = -1
                _ => panic!("prism has 5 faces"),
            },
        }
    }

    fn mode_count(&self, p: usize) -> usize {
        self.node_count(p)
    }

    fn eval_mode(&self, p: usize, m: usize, pt: [f64; 3]) -> f64 {
        match self {
            Shape::Tet => {
                let (i, j, k) = basis::tet_mode_ids(p)[m];
                basis::tet_mode(pt[0], pt[1], pt[2], i, j, k)
            }
            Shape::Prism => {
                let (i, j, k) = basis::prism_mode_ids(p)[m];
                basis::prism_mode(pt[0], pt[1], pt[2], i, j, k)
            }
        }
    }

    fn eval_mode_grad(&self, p: usize, m: usize, pt: [f64; 3]) -> (f64, f64, f64) {
        match self {
            Shape::Tet => {
                let (i, j, k) = basis::tet_mode_ids(p)[m];
                basis::tet_mode_grad(pt[0], pt[1], pt[2], i, j, k)
            }
            Shape::Prism => {
                let (i, j, k) = basis::prism_mode_ids(p)[m];
                basis::prism_mode_grad(pt[0], pt[1], pt[2], i, j, k)
            }
        }
    }

    /// Whether a reference point lies inside the domain within `tol`.
    pub fn contains(&self, pt: [f64; 3], tol: f64) -> bool {
        let [r, s, t] = pt;
        match self {
            Shape::Tet => {
                r >= -1.0 - tol && s >= -1.0 - tol && t >= -1.0 - tol && r + s + t <= -1.0 + tol
            }
            Shape::Prism => {
                r >= -1.0 - tol && s >= -1.0 - tol && r + s <= tol && t.abs() <= 1.0 + tol
            }
        }
    }

    /// Linear geometry shape functions and their (constant-in-t for tets)
    /// reference gradients at `pt`, one entry per corner vertex.
    pub fn geometry_basis(&self, pt: [f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
        let [r, s, t] = pt;
        match self {
            Shape::Tet => (
                vec![
                    -(1.0 + r + s + t) / 2.0,
                    (1.0 + r) / 2.0,
                    (1.0 + s) / 2.0,
                    (1.0 + t) / 2.0,
                ],
                vec![
                    [-0.5, -0.5, -0.5],
                    [0.5, 0.0, 0.0],
                    [0.0, 0.5, 0.0],
                    [0.0, 0.0, 0.5],
                ],
            ),
            Shape::Prism => {
                let lam = [-(r + s) / 2.0, (1.0 + r) / 2.0, (1.0 + s) / 2.0];
                let dlam = [[-0.5, -0.5], [0.5, 0.0], [0.0, 0.5]];
                let lo = (1.0 - t) / 2.0;
                let hi = (1.0 + t) / 2.0;
                let mut vals = Vec::with_capacity(6);
                let mut grads = Vec::with_capacity(6);
                for (l, dl) in lam.iter().zip(&dlam) {
                    vals.push(l * lo);
                    grads.push([dl[0] * lo, dl[1] * lo, -l / 2.0]);
                }
                for (l, dl) in lam.iter().zip(&dlam) {
                    vals.push(l * hi);
                    grads.push([dl[0] * hi, dl[1] * hi, l / 2.0]);
                }
                (vals, grads)
            }
        }
    }
}

/// Quadrature data attached to one local face of a reference element.
#[derive(Debug, Clone)]
pub struct FaceData {
    /// true for the quadrilateral prism sides, false for triangles
    pub is_quad: bool,
    /// local vertex indices forming the face
    pub corners: Vec<usize>,
    /// elemental node indices lying on the face
    pub node_ids: Vec<usize>,
    /// rule in the 2D face parameters (u, v)
    pub rule: QuadRule,
    /// face quadrature points expressed in volume reference coordinates
    pub ref_points: Vec<[f64; 3]>,
    /// nodal-to-face-quadrature interpolation, len(rule) x n_nodes
    pub interp: DMatrix<f64>,
}

/// Per-point geometric factors of an element mapping.
#[derive(Debug, Clone)]
pub struct ElementMap {
    pub jac: Vec<[[f64; 3]; 3]>,
    pub det: Vec<f64>,
    pub inv_t: Vec<[[f64; 3]; 3]>,
}

/// A reference element: nodes, modal basis, differentiation, quadrature.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub shape: Shape,
    pub order: usize,
    pub nodes: Vec<[f64; 3]>,
    pub vandermonde: DMatrix<f64>,
    pub v_inv: DMatrix<f64>,
    /// nodal differentiation matrices d/dr, d/ds, d/dt at the nodes
    pub diff_ops: [DMatrix<f64>; 3],
    /// volume quadrature rule, exact for degree 2P+1
    pub quad: QuadRule,
    /// nodal-to-quadrature interpolation, n_quad x n_nodes
    pub vq: DMatrix<f64>,
    /// nodal-to-quadrature reference derivatives
    pub dq: [DMatrix<f64>; 3],
    pub faces: Vec<FaceData>,
    /// 2-norm condition number estimate of the Vandermonde matrix
    pub cond_vandermonde: f64,
}

impl ReferenceElement {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Build (or fetch from the process-wide cache) the reference element.
    pub fn cached(shape: Shape, p: usize) -> Result<Arc<ReferenceElement>, RefElemError> {
        static CACHE: OnceLock<Mutex<BTreeMap<(Shape, usize), Arc<ReferenceElement>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
        {
            let guard = cache.lock().unwrap();
            if let Some(elem) = guard.get(&(shape, p)) {
                return Ok(elem.clone());
            }
        }
        let built = Arc::new(build_reference(shape, p)?);
        cache.lock().unwrap().insert((shape, p), built.clone());
        Ok(built)
    }

    /// Interpolate nodal values to arbitrary points inside the element.
    pub fn interpolate(
        &self,
        nodal: &[f64],
        targets: &[[f64; 3]],
    ) -> Result<Vec<f64>, RefElemError> {
        assert_eq!(nodal.len(), self.node_count());
        for &t in targets {
            if !self.shape.contains(t, 1e-10) {
                return Err(RefElemError::TargetOutsideDomain(t[0], t[1], t[2]));
            }
        }
        // modal coefficients, then modal evaluation at the targets
        let n = self.node_count();
        let mut coeffs = vec![0.0; n];
        for m in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.v_inv[(m, j)] * nodal[j];
            }
            coeffs[m] = acc;
        }
        Ok(targets
            .iter()
            .map(|&pt| {
                (0..n)
                    .map(|m| coeffs[m] * self.shape.eval_mode(self.order, m, pt))
                    .sum()
            })
            .collect())
    }

    /// Interpolation matrix from the nodal values to arbitrary points.
    pub fn interp_matrix(&self, targets: &[[f64; 3]]) -> DMatrix<f64> {
        let n = self.node_count();
        let mut vm = DMatrix::zeros(targets.len(), n);
        for (q, &pt) in targets.iter().enumerate() {
            for m in 0..n {
                vm[(q, m)] = self.shape.eval_mode(self.order, m, pt);
            }
        }
        vm * &self.v_inv
    }

    /// Reference-derivative matrices (d/dr, d/ds, d/dt) at arbitrary points.
    pub fn deriv_matrices(&self, targets: &[[f64; 3]]) -> [DMatrix<f64>; 3] {
        let n = self.node_count();
        let mut vr = DMatrix::zeros(targets.len(), n);
        let mut vs = DMatrix::zeros(targets.len(), n);
        let mut vt = DMatrix::zeros(targets.len(), n);
        for (q, &pt) in targets.iter().enumerate() {
            for m in 0..n {
                let (dr, ds, dt) = self.shape.eval_mode_grad(self.order, m, pt);
                vr[(q, m)] = dr;
                vs[(q, m)] = ds;
                vt[(q, m)] = dt;
            }
        }
        [&vr * &self.v_inv, &vs * &self.v_inv, &vt * &self.v_inv]
    }

    /// Geometric factors of the linear vertex mapping at the given
    /// reference points. Fails on non-positive determinants.
    pub fn geometric_factors(
        &self,
        verts: &[[f64; 3]],
        points: &[[f64; 3]],
    ) -> Result<ElementMap, RefElemError> {
        assert_eq!(verts.len(), self.shape.vertex_count());
        let mut jac = Vec::with_capacity(points.len());
        let mut det = Vec::with_capacity(points.len());
        let mut inv_t = Vec::with_capacity(points.len());
        for (qi, &pt) in points.iter().enumerate() {
            let (_, grads) = self.shape.geometry_basis(pt);
            let mut j = [[0.0f64; 3]; 3]; // j[xyz][rst]
            for (v, g) in verts.iter().zip(&grads) {
                for x in 0..3 {
                    for r in 0..3 {
                        j[x][r] += v[x] * g[r];
                    }
                }
            }
            let d = det3(&j);
            if d <= 0.0 {
                return Err(RefElemError::NonPositiveJacobian { det: d, point: qi });
            }
            let inv = inv3(&j, d);
            // store the transpose of the inverse: rows map physical gradients
            let mut it = [[0.0f64; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    it[a][b] = inv[b][a];
                }
            }
            jac.push(j);
            det.push(d);
            inv_t.push(it);
        }
        Ok(ElementMap { jac, det, inv_t })
    }

    /// Geometric factors at the volume quadrature points.
    pub fn quad_geometry(&self, verts: &[[f64; 3]]) -> Result<ElementMap, RefElemError> {
        self.geometric_factors(verts, &self.quad.points)
    }
}

fn det3(j: &[[f64; 3]; 3]) -> f64 {
    j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
        - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
}

fn inv3(j: &[[f64; 3]; 3], d: f64) -> [[f64; 3]; 3] {
    let mut inv = [[0.0f64; 3]; 3];
    inv[0][0] = (j[1][1] * j[2][2] - j[1][2] * j[2][1]) / d;
    inv[0][1] = (j[0][2] * j[2][1] - j[0][1] * j[2][2]) / d;
    inv[0][2] = (j[0][1] * j[1][2] - j[0][2] * j[1][1]) / d;
    inv[1][0] = (j[1][2] * j[2][0] - j[1][0] * j[2][2]) / d;
    inv[1][1] = (j[0][0] * j[2][2] - j[0][2] * j[2][0]) / d;
    inv[1][2] = (j[0][2] * j[1][0] - j[0][0] * j[1][2]) / d;
    inv[2][0] = (j[1][0] * j[2][1] - j[1][1] * j[2][0]) / d;
    inv[2][1] = (j[0][1] * j[2][0] - j[0][0] * j[2][1]) / d;
    inv[2][2] = (j[0][0] * j[1][1] - j[0][1] * j[1][0]) / d;
    inv
}

/// Barycentric coordinates of the bi-unit triangle at (u, v).
fn tri_bary(u: f64, v: f64) -> [f64; 3] {
    [-(u + v) / 2.0, (1.0 + u) / 2.0, (1.0 + v) / 2.0]
}

/// Bilinear shape functions on the bi-unit quad at (u, v).
fn quad_shapes(u: f64, v: f64) -> [f64; 4] {
    [
        (1.0 - u) * (1.0 - v) / 4.0,
        (1.0 + u) * (1.0 - v) / 4.0,
        (1.0 + u) * (1.0 + v) / 4.0,
        (1.0 - u) * (1.0 + v) / 4.0,
    ]
}

/// Map a face-parameter point to volume reference coordinates.
pub fn face_point(shape: Shape, face: usize, u: f64, v: f64) -> [f64; 3] {
    let corners = shape.face_corners(face);
    let verts = shape.vertices();
    let mut out = [0.0; 3];
    if corners.len() == 3 {
        let lam = tri_bary(u, v);
        for (c, l) in corners.iter().zip(&lam) {
            for d in 0..3 {
                out[d] += verts[*c][d] * l;
            }
        }
    } else {
        let n = quad_shapes(u, v);
        for (c, nv) in corners.iter().zip(&n) {
            for d in 0..3 {
                out[d] += verts[*c][d] * nv;
            }
        }
    }
    out
}

/// Physical position and tangent vectors of a facet at face parameters
/// (u, v), from its physical corner coordinates.
pub fn face_geometry(
    corner_xyz: &[[f64; 3]],
    u: f64,
    v: f64,
) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let mut x = [0.0; 3];
    let mut tu = [0.0; 3];
    let mut tv = [0.0; 3];
    if corner_xyz.len() == 3 {
        let lam = tri_bary(u, v);
        let dlam_u = [-0.5, 0.5, 0.0];
        let dlam_v = [-0.5, 0.0, 0.5];
        for (i, c) in corner_xyz.iter().enumerate() {
            for d in 0..3 {
                x[d] += c[d] * lam[i];
                tu[d] += c[d] * dlam_u[i];
                tv[d] += c[d] * dlam_v[i];
            }
        }
    } else {
        let n = quad_shapes(u, v);
        let dn_u = [
            -(1.0 - v) / 4.0,
            (1.0 - v) / 4.0,
            (1.0 + v) / 4.0,
            -(1.0 + v) / 4.0,
        ];
        let dn_v = [
            -(1.0 - u) / 4.0,
            -(1.0 + u) / 4.0,
            (1.0 + u) / 4.0,
            (1.0 - u) / 4.0,
        ];
        for (i, c) in corner_xyz.iter().enumerate() {
            for d in 0..3 {
                x[d] += c[d] * n[i];
                tu[d] += c[d] * dn_u[i];
                tv[d] += c[d] * dn_v[i];
            }
        }
    }
    (x, tu, tv)
}

/// Build a reference element of the given shape and order.
pub fn build_reference(shape: Shape, p: usize) -> Result<ReferenceElement, RefElemError> {
    if p < 1 || p > MAX_ORDER {
        return Err(RefElemError::UnsupportedOrder(p));
    }
    let nodes = match shape {
        Shape::Tet => nodes::tet_nodes(p),
        Shape::Prism => nodes::prism_nodes(p),
    };
    let n = nodes.len();

    let mut v = DMatrix::<f64>::zeros(n, n);
    for (i, &pt) in nodes.iter().enumerate() {
        for m in 0..shape.mode_count(p) {
            v[(i, m)] = shape.eval_mode(p, m, pt);
        }
    }
    let sv = v.clone().svd(false, false);
    let s_max = sv.singular_values.max();
    let s_min = sv.singular_values.min();
    if s_min <= 0.0 || s_max / s_min > 1e14 {
        return Err(RefElemError::SingularVandermonde(shape, p));
    }
    let cond = s_max / s_min;
    let v_inv = v
        .clone()
        .try_inverse()
        .ok_or(RefElemError::SingularVandermonde(shape, p))?;

    let mut vr = DMatrix::<f64>::zeros(n, n);
    let mut vs = DMatrix::<f64>::zeros(n, n);
    let mut vt = DMatrix::<f64>::zeros(n, n);
    for (i, &pt) in nodes.iter().enumerate() {
        for m in 0..n {
            let (dr, ds, dt) = shape.eval_mode_grad(p, m, pt);
            vr[(i, m)] = dr;
            vs[(i, m)] = ds;
            vt[(i, m)] = dt;
        }
    }
    let diff_ops = [&vr * &v_inv, &vs * &v_inv, &vt * &v_inv];

    let quad = match shape {
        Shape::Tet => tet_rule(2 * p + 1),
        Shape::Prism => prism_rule(2 * p + 1),
    };
    let nq = quad.len();
    let mut vq = DMatrix::<f64>::zeros(nq, n);
    let mut dqr = DMatrix::<f64>::zeros(nq, n);
    let mut dqs = DMatrix::<f64>::zeros(nq, n);
    let mut dqt = DMatrix::<f64>::zeros(nq, n);
    for (q, &pt) in quad.points.iter().enumerate() {
        for m in 0..n {
            vq[(q, m)] = shape.eval_mode(p, m, pt);
            let (dr, ds, dt) = shape.eval_mode_grad(p, m, pt);
            dqr[(q, m)] = dr;
            dqs[(q, m)] = ds;
            dqt[(q, m)] = dt;
        }
    }
    let vq = vq * &v_inv;
    let dq = [&dqr * &v_inv, &dqs * &v_inv, &dqt * &v_inv];

    let verts = shape.vertices();
    let mut faces = Vec::with_capacity(shape.face_count());
    for f in 0..shape.face_count() {
        let corners = shape.face_corners(f).to_vec();
        let is_quad = corners.len() == 4;
        let rule = if is_quad { quad_rule(2 * p + 1) } else { tri_rule(2 * p + 1) };
        let ref_points: Vec<[f64; 3]> = rule
            .points
            .iter()
            .map(|pt| face_point(shape, f, pt[0], pt[1]))
            .collect();

        let mut vf = DMatrix::<f64>::zeros(ref_points.len(), n);
        for (q, &pt) in ref_points.iter().enumerate() {
            for m in 0..n {
                vf[(q, m)] = shape.eval_mode(p, m, pt);
            }
        }
        let interp = vf * &v_inv;

        // Elemental nodes lying on the face plane.
        let on_face = |pt: [f64; 3]| -> bool {
            let tol = 1e-9;
            let [r, s, t] = pt;
            match (shape, f) {
                (Shape::Tet, 0) => (t + 1.0).abs() < tol,
                (Shape::Tet, 1) => (s + 1.0).abs() < tol,
                (Shape::Tet, 2) => (r + s + t + 1.0).abs() < tol,
                (Shape::Tet, 3) => (r + 1.0).abs() < tol,
                (Shape::Prism, 0) => (t + 1.0).abs() < tol,
                (Shape::Prism, 1) => (t - 1.0).abs() < tol,
                (Shape::Prism, 2) => (s + 1.0).abs() < tol,
                (Shape::Prism, 3) => (r + s).abs() < tol,
                (Shape::Prism, 4) => (r + 1.0).abs() < tol,
                _ => unreachable!(),
            }
        };
        let node_ids: Vec<usize> = nodes
            .iter()
            .enumerate()
            .filter(|(_, &pt)| on_face(pt))
            .map(|(i, _)| i)
            .collect();

        faces.push(FaceData {
            is_quad,
            corners,
            node_ids,
            rule,
            ref_points,
            interp,
        });
    }
    let _ = &verts;

    Ok(ReferenceElement {
        shape,
        order: p,
        nodes,
        vandermonde: v,
        v_inv,
        diff_ops,
        quad,
        vq,
        dq,
        faces,
        cond_vandermonde: cond,
    })
}
