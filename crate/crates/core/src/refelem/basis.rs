//! Orthonormal modal bases on the reference triangle, tetrahedron, and
//! prism, with analytic gradients.
//!
//! Simplex bases are the collapsed-coordinate Jacobi (Dubiner/PKD) family;
//! the prism basis tensorizes the triangle basis with Legendre polynomials
//! in the vertical direction. All bases are orthonormal under the unit
//! weight on their bi-unit reference domains.

use super::jacobi::{jacobi, jacobi_deriv};

/// Collapsed coordinates for the triangle: (r,s) -> (a,b).
fn tri_collapse(r: f64, s: f64) -> (f64, f64) {
    let a = if (1.0 - s).abs() > 1e-14 {
        2.0 * (1.0 + r) / (1.0 - s) - 1.0
    } else {
        -1.0
    };
    (a, s)
}

/// Collapsed coordinates for the tetrahedron: (r,s,t) -> (a,b,c).
fn tet_collapse(r: f64, s: f64, t: f64) -> (f64, f64, f64) {
    let a = if (s + t).abs() > 1e-14 {
        2.0 * (1.0 + r) / (-s - t) - 1.0
    } else {
        -1.0
    };
    let b = if (1.0 - t).abs() > 1e-14 {
        2.0 * (1.0 + s) / (1.0 - t) - 1.0
    } else {
        -1.0
    };
    (a, b, t)
}

/// Orthonormal triangle mode (i,j), total degree i+j.
pub fn tri_mode(r: f64, s: f64, i: usize, j: usize) -> f64 {
    let (a, b) = tri_collapse(r, s);
    let h1 = jacobi(a, 0.0, 0.0, i);
    let h2 = jacobi(b, 2.0 * i as f64 + 1.0, 0.0, j);
    2f64.sqrt() * h1 * h2 * (1.0 - b).powi(i as i32)
}

/// Gradient of the orthonormal triangle mode (i,j) with respect to (r,s).
pub fn tri_mode_grad(r: f64, s: f64, i: usize, j: usize) -> (f64, f64) {
    let (a, b) = tri_collapse(r, s);
    let fa = jacobi(a, 0.0, 0.0, i);
    let dfa = jacobi_deriv(a, 0.0, 0.0, i);
    let gb = jacobi(b, 2.0 * i as f64 + 1.0, 0.0, j);
    let dgb = jacobi_deriv(b, 2.0 * i as f64 + 1.0, 0.0, j);
    let half1mb = 0.5 * (1.0 - b);

    let mut dr = dfa * gb;
    if i > 0 {
        dr *= half1mb.powi(i as i32 - 1);
    }

    let mut ds = dfa * gb * 0.5 * (1.0 + a);
    if i > 0 {
        ds *= half1mb.powi(i as i32 - 1);
    }
    let mut tmp = dgb * half1mb.powi(i as i32);
    if i > 0 {
        tmp -= 0.5 * i as f64 * gb * half1mb.powi(i as i32 - 1);
    }
    ds += fa * tmp;

    let scale = 2f64.powf(i as f64 + 0.5);
    (scale * dr, scale * ds)
}

/// Orthonormal tetrahedron mode (i,j,k), total degree i+j+k.
pub fn tet_mode(r: f64, s: f64, t: f64, i: usize, j: usize, k: usize) -> f64 {
    let (a, b, c) = tet_collapse(r, s, t);
    let h1 = jacobi(a, 0.0, 0.0, i);
    let h2 = jacobi(b, 2.0 * i as f64 + 1.0, 0.0, j);
    let h3 = jacobi(c, 2.0 * (i + j) as f64 + 2.0, 0.0, k);
    2.0 * 2f64.sqrt() * h1 * h2 * (1.0 - b).powi(i as i32) * h3 * (1.0 - c).powi((i + j) as i32)
}

/// Gradient of the orthonormal tetrahedron mode with respect to (r,s,t).
pub fn tet_mode_grad(r: f64, s: f64, t: f64, i: usize, j: usize, k: usize) -> (f64, f64, f64) {
    let (a, b, c) = tet_collapse(r, s, t);
    let fa = jacobi(a, 0.0, 0.0, i);
    let dfa = jacobi_deriv(a, 0.0, 0.0, i);
    let gb = jacobi(b, 2.0 * i as f64 + 1.0, 0.0, j);
    let dgb = jacobi_deriv(b, 2.0 * i as f64 + 1.0, 0.0, j);
    let hc = jacobi(c, 2.0 * (i + j) as f64 + 2.0, 0.0, k);
    let dhc = jacobi_deriv(c, 2.0 * (i + j) as f64 + 2.0, 0.0, k);
    let hb = 0.5 * (1.0 - b);
    let hcc = 0.5 * (1.0 - c);
    let ij = (i + j) as i32;

    let mut dr = dfa * gb * hc;
    if i > 0 {
        dr *= hb.powi(i as i32 - 1);
    }
    if ij > 0 {
        dr *= hcc.powi(ij - 1);
    }

    let mut ds = 0.5 * (1.0 + a) * dr;
    let mut tmp = dgb * hb.powi(i as i32);
    if i > 0 {
        tmp += -0.5 * i as f64 * gb * hb.powi(i as i32 - 1);
    }
    if ij > 0 {
        tmp *= hcc.powi(ij - 1);
    }
    tmp *= fa * hc;
    ds += tmp;

    let mut dt = 0.5 * (1.0 + a) * dr + 0.5 * (1.0 + b) * tmp;
    let mut tmp2 = dhc * hcc.powi(ij);
    if ij > 0 {
        tmp2 -= 0.5 * ij as f64 * hc * hcc.powi(ij - 1);
    }
    tmp2 *= fa * gb * hb.powi(i as i32);
    dt += tmp2;

    let scale = 2f64.powf(2.0 * i as f64 + j as f64 + 1.5);
    (scale * dr, scale * ds, scale * dt)
}

/// Orthonormal prism mode: triangle mode (i,j) in (r,s) times the
/// normalized Legendre polynomial of degree k in t.
pub fn prism_mode(r: f64, s: f64, t: f64, i: usize, j: usize, k: usize) -> f64 {
    tri_mode(r, s, i, j) * jacobi(t, 0.0, 0.0, k)
}

/// Gradient of the prism mode with respect to (r,s,t).
pub fn prism_mode_grad(r: f64, s: f64, t: f64, i: usize, j: usize, k: usize) -> (f64, f64, f64) {
    let m = tri_mode(r, s, i, j);
    let (mr, ms) = tri_mode_grad(r, s, i, j);
    let lt = jacobi(t, 0.0, 0.0, k);
    let dlt = jacobi_deriv(t, 0.0, 0.0, k);
    (mr * lt, ms * lt, m * dlt)
}

/// Index list (i,j) with i+j <= p, ordered j-inner as is conventional.
pub fn tri_mode_ids(p: usize) -> Vec<(usize, usize)> {
    let mut ids = Vec::new();
    for i in 0..=p {
        for j in 0..=(p - i) {
            ids.push((i, j));
        }
    }
    ids
}

/// Index list (i,j,k) with i+j+k <= p.
pub fn tet_mode_ids(p: usize) -> Vec<(usize, usize, usize)> {
    let mut ids = Vec::new();
    for i in 0..=p {
        for j in 0..=(p - i) {
            for k in 0..=(p - i - j) {
                ids.push((i, j, k));
            }
        }
    }
    ids
}

/// Index list for the prism: triangle pair (i,j) with i+j <= p crossed
/// with vertical degree k <= p.
pub fn prism_mode_ids(p: usize) -> Vec<(usize, usize, usize)> {
    let mut ids = Vec::new();
    for k in 0..=p {
        for (i, j) in tri_mode_ids(p) {
            ids.push((i, j, k));
        }
    }
    ids
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refelem::quadrature::{prism_rule, tet_rule, tri_rule};

    #[test]
    fn tri_modes_orthonormal() {
        let p = 4;
        let rule = tri_rule(2 * p + 2);
        let ids = tri_mode_ids(p);
        for (ai, &(i1, j1)) in ids.iter().enumerate() {
            for &(i2, j2) in ids.iter().skip(ai) {
                let mut acc = 0.0;
                for (pt, w) in rule.points.iter().zip(&rule.weights) {
                    acc += w * tri_mode(pt[0], pt[1], i1, j1) * tri_mode(pt[0], pt[1], i2, j2);
                }
                let expect = if (i1, j1) == (i2, j2) { 1.0 } else { 0.0 };
                assert!(
                    (acc - expect).abs() < 1e-11,
                    "({i1},{j1})x({i2},{j2}) -> {acc}"
                );
            }
        }
    }

    #[test]
    fn tet_modes_orthonormal() {
        let p = 3;
        let rule = tet_rule(2 * p + 2);
        let ids = tet_mode_ids(p);
        for (ai, m1) in ids.iter().enumerate() {
            for m2 in ids.iter().skip(ai) {
                let mut acc = 0.0;
                for (pt, w) in rule.points.iter().zip(&rule.weights) {
                    acc += w
                        * tet_mode(pt[0], pt[1], pt[2], m1.0, m1.1, m1.2)
                        * tet_mode(pt[0], pt[1], pt[2], m2.0, m2.1, m2.2);
                }
                let expect = if m1 == m2 { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-11, "{m1:?}x{m2:?} -> {acc}");
            }
        }
    }

    #[test]
    fn prism_modes_orthonormal() {
        let p = 2;
        let rule = prism_rule(2 * p + 2);
        let ids = prism_mode_ids(p);
        for (ai, m1) in ids.iter().enumerate() {
            for m2 in ids.iter().skip(ai) {
                let mut acc = 0.0;
                for (pt, w) in rule.points.iter().zip(&rule.weights) {
                    acc += w
                        * prism_mode(pt[0], pt[1], pt[2], m1.0, m1.1, m1.2)
                        * prism_mode(pt[0], pt[1], pt[2], m2.0, m2.1, m2.2);
                }
                let expect = if m1 == m2 { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-11, "{m1:?}x{m2:?} -> {acc}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-6;
        let pts = [
            [-0.3, -0.4, -0.5],
            [-0.9, -0.2, -0.1],
            [0.1, -0.6, -0.52],
        ];
        for &(i, j, k) in &[(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (2, 1, 0), (1, 1, 1)] {
            for pt in &pts {
                let (r, s, t) = (pt[0], pt[1], pt[2]);
                if r + s + t > -1.0 - 10.0 * h {
                    continue;
                }
                let (dr, ds, dt) = tet_mode_grad(r, s, t, i, j, k);
                let fr = (tet_mode(r + h, s, t, i, j, k) - tet_mode(r - h, s, t, i, j, k))
                    / (2.0 * h);
                let fs = (tet_mode(r, s + h, t, i, j, k) - tet_mode(r, s - h, t, i, j, k))
                    / (2.0 * h);
                let ft = (tet_mode(r, s, t + h, i, j, k) - tet_mode(r, s, t - h, i, j, k))
                    / (2.0 * h);
                assert!((dr - fr).abs() < 2e-5 * (1.0 + dr.abs()), "tet dr ({i},{j},{k})");
                assert!((ds - fs).abs() < 2e-5 * (1.0 + ds.abs()), "tet ds ({i},{j},{k})");
                assert!((dt - ft).abs() < 2e-5 * (1.0 + dt.abs()), "tet dt ({i},{j},{k})");

                let (dr, ds, dt) = prism_mode_grad(r, s, t, i, j, k);
                let fr = (prism_mode(r + h, s, t, i, j, k) - prism_mode(r - h, s, t, i, j, k))
                    / (2.0 * h);
                let fs = (prism_mode(r, s + h, t, i, j, k) - prism_mode(r, s - h, t, i, j, k))
                    / (2.0 * h);
                let ft = (prism_mode(r, s, t + h, i, j, k) - prism_mode(r, s, t - h, i, j, k))
                    / (2.0 * h);
                assert!((dr - fr).abs() < 2e-5 * (1.0 + dr.abs()), "prism dr");
                assert!((ds - fs).abs() < 2e-5 * (1.0 + ds.abs()), "prism ds");
                assert!((dt - ft).abs() < 2e-5 * (1.0 + dt.abs()), "prism dt");
            }
        }
    }
}
