//! Warp-and-blend interpolation node sets on the reference triangle,
//! tetrahedron, and prism.
//!
//! Node placement follows the classical warp-and-blend construction:
//! equidistant nodes are shifted towards a Gauss-Lobatto distribution along
//! every edge, with face/volume blending so the shifts vanish in the
//! interior barycentric directions. Edge traces are exactly the 1D
//! Gauss-Lobatto points, so elemental faces of tets and prisms share node
//! positions with their neighbors.

use super::jacobi::{gauss_lobatto, jacobi};
use nalgebra::DMatrix;

const ALPHA_3D: [f64; 15] = [
    0.0, 0.0, 0.0, 0.1002, 1.1332, 1.5608, 1.3413, 1.2577, 1.1603, 1.10153, 0.6080, 0.4523,
    0.8856, 0.8717, 0.9655,
];

/// Number of nodes in the degree-`p` triangle set.
pub fn tri_node_count(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Number of nodes in the degree-`p` tetrahedron set.
pub fn tet_node_count(p: usize) -> usize {
    (p + 1) * (p + 2) * (p + 3) / 6
}

/// One-dimensional warp: displacement field moving equidistant nodes onto
/// Gauss-Lobatto nodes, evaluated at arbitrary coordinates `rout`.
fn eval_warp_1d(p: usize, rout: &[f64]) -> Vec<f64> {
    let gl = gauss_lobatto(p);
    let req: Vec<f64> = (0..=p).map(|i| -1.0 + 2.0 * i as f64 / p as f64).collect();

    // Lagrange basis on the equidistant nodes, evaluated through the
    // 1D Legendre Vandermonde: L = Veq^{-T} P(rout).
    let n = p + 1;
    let mut veq = DMatrix::<f64>::zeros(n, n);
    for (i, &x) in req.iter().enumerate() {
        for j in 0..n {
            veq[(i, j)] = jacobi(x, 0.0, 0.0, j);
        }
    }
    let veq_t_inv = veq
        .transpose()
        .try_inverse()
        .expect("equidistant 1D Vandermonde is invertible");

    let mut warp = vec![0.0; rout.len()];
    for (k, &x) in rout.iter().enumerate() {
        let pvals: Vec<f64> = (0..n).map(|j| jacobi(x, 0.0, 0.0, j)).collect();
        // lag[i] = sum_j Veq^{-T}[i][j] * P_j(x)
        let mut acc = 0.0;
        for i in 0..n {
            let mut lag = 0.0;
            for j in 0..n {
                lag += veq_t_inv[(i, j)] * pvals[j];
            }
            acc += lag * (gl[i] - req[i]);
        }
        warp[k] = acc;
    }

    // Scale so the warp is bounded near the endpoints.
    for (w, &x) in warp.iter_mut().zip(rout) {
        let inside = x.abs() < 1.0 - 1e-10;
        if inside {
            let sf = 1.0 - x * x;
            *w /= sf;
        } else {
            *w = 0.0;
        }
    }
    warp
}

/// Two-dimensional warp field on a triangle face, expressed in the
/// equilateral-triangle plane. `l` are the three barycentric coordinates.
fn eval_shift_2d(p: usize, alpha: f64, l1: &[f64], l2: &[f64], l3: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = l1.len();
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    };
    let warp1 = eval_warp_1d(p, &diff(l3, l2));
    let warp2 = eval_warp_1d(p, &diff(l1, l3));
    let warp3 = eval_warp_1d(p, &diff(l2, l1));

    let mut dx = vec![0.0; n];
    let mut dy = vec![0.0; n];
    let (c1, s1) = (1.0, 0.0);
    let (c2, s2) = ((2.0 * std::f64::consts::PI / 3.0).cos(), (2.0 * std::f64::consts::PI / 3.0).sin());
    let (c3, s3) = ((4.0 * std::f64::consts::PI / 3.0).cos(), (4.0 * std::f64::consts::PI / 3.0).sin());
    for i in 0..n {
        let b1 = 4.0 * l2[i] * l3[i] * warp1[i] * (1.0 + (alpha * l1[i]).powi(2));
        let b2 = 4.0 * l1[i] * l3[i] * warp2[i] * (1.0 + (alpha * l2[i]).powi(2));
        let b3 = 4.0 * l1[i] * l2[i] * warp3[i] * (1.0 + (alpha * l3[i]).powi(2));
        dx[i] = c1 * b1 + c2 * b2 + c3 * b3;
        dy[i] = s1 * b1 + s2 * b2 + s3 * b3;
    }
    (dx, dy)
}

/// Warp-and-blend nodes on the bi-unit reference triangle
/// { (r,s) : r,s >= -1, r+s <= 0 }, lexicographic in the equidistant layout.
///
/// The warp parameter matches the tetrahedron face warp, so this set is
/// exactly the face trace of [`tet_nodes`] and prism/tet interfaces conform.
pub fn triangle_nodes(p: usize) -> Vec<[f64; 2]> {
    assert!(p >= 1);
    let alpha = if p <= 15 { ALPHA_3D[p - 1] } else { 1.0 };
    let np = tri_node_count(p);

    let mut l1 = Vec::with_capacity(np);
    let mut l3 = Vec::with_capacity(np);
    for n in 0..=p {
        for m in 0..=(p - n) {
            l1.push(n as f64 / p as f64);
            l3.push(m as f64 / p as f64);
        }
    }
    let l2: Vec<f64> = l1.iter().zip(&l3).map(|(a, c)| 1.0 - a - c).collect();

    // Equilateral coordinates.
    let mut x: Vec<f64> = (0..np).map(|i| -l2[i] + l3[i]).collect();
    let mut y: Vec<f64> = (0..np)
        .map(|i| (-l2[i] - l3[i] + 2.0 * l1[i]) / 3f64.sqrt())
        .collect();

    let (dx, dy) = eval_shift_2d(p, alpha, &l1, &l2, &l3);
    for i in 0..np {
        x[i] += dx[i];
        y[i] += dy[i];
    }

    // Back to the bi-unit right triangle.
    (0..np)
        .map(|i| {
            let b1 = (3f64.sqrt() * y[i] + 1.0) / 3.0;
            let b2 = (-3.0 * x[i] - 3f64.sqrt() * y[i] + 2.0) / 6.0;
            let b3 = (3.0 * x[i] - 3f64.sqrt() * y[i] + 2.0) / 6.0;
            [-b2 + b3 - b1, -b2 - b3 + b1]
        })
        .collect()
}

/// Warp-and-blend nodes on the bi-unit reference tetrahedron
/// { (r,s,t) : r,s,t >= -1, r+s+t <= -1 }.
pub fn tet_nodes(p: usize) -> Vec<[f64; 3]> {
    assert!(p >= 1);
    let alpha = if p <= 15 { ALPHA_3D[p - 1] } else { 1.0 };
    let np = tet_node_count(p);
    let tol = 1e-10;

    // Equidistant nodes in (r,s,t).
    let mut r = Vec::with_capacity(np);
    let mut s = Vec::with_capacity(np);
    let mut t = Vec::with_capacity(np);
    for n in 0..=p {
        for m in 0..=(p - n) {
            for q in 0..=(p - n - m) {
                r.push(-1.0 + 2.0 * q as f64 / p as f64);
                s.push(-1.0 + 2.0 * m as f64 / p as f64);
                t.push(-1.0 + 2.0 * n as f64 / p as f64);
            }
        }
    }

    let l1: Vec<f64> = t.iter().map(|v| (1.0 + v) / 2.0).collect();
    let l2: Vec<f64> = s.iter().map(|v| (1.0 + v) / 2.0).collect();
    let l3: Vec<f64> = (0..np).map(|i| -(1.0 + r[i] + s[i] + t[i]) / 2.0).collect();
    let l4: Vec<f64> = r.iter().map(|v| (1.0 + v) / 2.0).collect();

    let s3 = 3f64.sqrt();
    let s6 = 6f64.sqrt();
    let v1 = [-1.0, -1.0 / s3, -1.0 / s6];
    let v2 = [1.0, -1.0 / s3, -1.0 / s6];
    let v3 = [0.0, 2.0 / s3, -1.0 / s6];
    let v4 = [0.0, 0.0, 3.0 / s6];

    // Face tangent frames.
    let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let mid = |a: [f64; 3], b: [f64; 3]| {
        [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]
    };
    let normalize = |v: [f64; 3]| {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / n, v[1] / n, v[2] / n]
    };
    let t1 = [
        normalize(sub(v2, v1)),
        normalize(sub(v2, v1)),
        normalize(sub(v3, v2)),
        normalize(sub(v3, v1)),
    ];
    let t2 = [
        normalize(sub(v3, mid(v1, v2))),
        normalize(sub(v4, mid(v1, v2))),
        normalize(sub(v4, mid(v2, v3))),
        normalize(sub(v4, mid(v1, v3))),
    ];

    let mut xyz: Vec<[f64; 3]> = (0..np)
        .map(|i| {
            let mut v = [0.0; 3];
            for d in 0..3 {
                v[d] = l3[i] * v1[d] + l4[i] * v2[d] + l2[i] * v3[d] + l1[i] * v4[d];
            }
            v
        })
        .collect();

    let mut shift = vec![[0.0f64; 3]; np];
    for face in 0..4 {
        let (la, lb, lc, ld): (&[f64], &[f64], &[f64], &[f64]) = match face {
            0 => (&l1, &l2, &l3, &l4),
            1 => (&l2, &l1, &l3, &l4),
            2 => (&l3, &l1, &l4, &l2),
            _ => (&l4, &l1, &l3, &l2),
        };
        let (warp1, warp2) = eval_shift_2d(p, alpha, lb, lc, ld);

        for i in 0..np {
            let blend = lb[i] * lc[i] * ld[i];
            let denom = (lb[i] + 0.5 * la[i]) * (lc[i] + 0.5 * la[i]) * (ld[i] + 0.5 * la[i]);
            let blend = if denom > tol {
                (1.0 + (alpha * la[i]).powi(2)) * blend / denom
            } else {
                blend
            };
            for d in 0..3 {
                shift[i][d] += blend * warp1[i] * t1[face][d] + blend * warp2[i] * t2[face][d];
            }
            // Points on this face (but not on an edge of it) take the pure
            // face warp so traces match the 2D triangle nodes exactly.
            let on_face = la[i] < tol;
            let interiorish =
                (lb[i] > tol) as usize + (lc[i] > tol) as usize + (ld[i] > tol) as usize;
            if on_face && interiorish < 3 {
                for d in 0..3 {
                    shift[i][d] = warp1[i] * t1[face][d] + warp2[i] * t2[face][d];
                }
            }
        }
    }
    for i in 0..np {
        for d in 0..3 {
            xyz[i][d] += shift[i][d];
        }
    }

    // Invert the equilateral embedding back to (r,s,t).
    let a = nalgebra::Matrix3::from_columns(&[
        nalgebra::Vector3::new(v2[0] - v1[0], v2[1] - v1[1], v2[2] - v1[2]) * 0.5,
        nalgebra::Vector3::new(v3[0] - v1[0], v3[1] - v1[1], v3[2] - v1[2]) * 0.5,
        nalgebra::Vector3::new(v4[0] - v1[0], v4[1] - v1[1], v4[2] - v1[2]) * 0.5,
    ]);
    let a_inv = a.try_inverse().expect("tet frame invertible");
    // Origin of the (r,s,t) frame inside the equilateral tet.
    let center = nalgebra::Vector3::new(
        0.5 * (v2[0] + v3[0] + v4[0] - v1[0]),
        0.5 * (v2[1] + v3[1] + v4[1] - v1[1]),
        0.5 * (v2[2] + v3[2] + v4[2] - v1[2]),
    );
    xyz.iter()
        .map(|p| {
            let rhs = nalgebra::Vector3::new(p[0], p[1], p[2]) - center;
            let rst = a_inv * rhs;
            [rst[0], rst[1], rst[2]]
        })
        .collect()
}

/// Prism nodes: triangle warp-and-blend in (r,s) tensorized with
/// Gauss-Lobatto in t. Vertical line index varies fastest in t.
pub fn prism_nodes(p: usize) -> Vec<[f64; 3]> {
    let tri = triangle_nodes(p);
    let gl = gauss_lobatto(p);
    let mut nodes = Vec::with_capacity(tri.len() * gl.len());
    for &tv in &gl {
        for rs in &tri {
            nodes.push([rs[0], rs[1], tv]);
        }
    }
    nodes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_counts_and_vertices() {
        for p in 1..=6 {
            let nodes = triangle_nodes(p);
            assert_eq!(nodes.len(), tri_node_count(p));
            for v in [[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]] {
                assert!(
                    nodes
                        .iter()
                        .any(|n| (n[0] - v[0]).abs() < 1e-9 && (n[1] - v[1]).abs() < 1e-9),
                    "vertex {v:?} missing at p={p}"
                );
            }
            for n in &nodes {
                assert!(n[0] >= -1.0 - 1e-9 && n[1] >= -1.0 - 1e-9 && n[0] + n[1] <= 1e-9);
            }
        }
    }

    #[test]
    fn triangle_edge_nodes_are_gauss_lobatto() {
        for p in 2..=7 {
            let nodes = triangle_nodes(p);
            let gl = gauss_lobatto(p);
            // bottom edge s = -1
            let mut edge: Vec<f64> = nodes
                .iter()
                .filter(|n| (n[1] + 1.0).abs() < 1e-9)
                .map(|n| n[0])
                .collect();
            edge.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(edge.len(), p + 1);
            for (e, g) in edge.iter().zip(&gl) {
                assert!((e - g).abs() < 1e-9, "p={p}: {e} vs {g}");
            }
        }
    }

    #[test]
    fn tet_counts_and_face_traces() {
        for p in 1..=5 {
            let nodes = tet_nodes(p);
            assert_eq!(nodes.len(), tet_node_count(p));
            for n in &nodes {
                assert!(n[0] + n[1] + n[2] <= -1.0 + 1e-9);
                assert!(n[0] >= -1.0 - 1e-9 && n[1] >= -1.0 - 1e-9 && n[2] >= -1.0 - 1e-9);
            }
            // The t=-1 face trace must equal the 2D triangle nodes.
            let tri = triangle_nodes(p);
            let face: Vec<[f64; 2]> = nodes
                .iter()
                .filter(|n| (n[2] + 1.0).abs() < 1e-8)
                .map(|n| [n[0], n[1]])
                .collect();
            assert_eq!(face.len(), tri.len(), "p={p}");
            for f in &face {
                assert!(
                    tri.iter()
                        .any(|t| (t[0] - f[0]).abs() < 1e-8 && (t[1] - f[1]).abs() < 1e-8),
                    "p={p}: face node {f:?} not a triangle node"
                );
            }
        }
    }

    #[test]
    fn prism_counts_and_layers() {
        for p in 1..=4 {
            let nodes = prism_nodes(p);
            assert_eq!(nodes.len(), tri_node_count(p) * (p + 1));
            let top: Vec<_> = nodes.iter().filter(|n| (n[2] - 1.0).abs() < 1e-12).collect();
            assert_eq!(top.len(), tri_node_count(p));
        }
    }
}
