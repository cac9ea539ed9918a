//! Quadrature on the bi-unit reference shapes via collapsed-coordinate
//! Gauss-Jacobi rules. The Duffy-map Jacobians are absorbed exactly into
//! the Jacobi weights, so a rule of requested degree `d` integrates all
//! polynomials of total degree `d` exactly.

use super::jacobi::{gauss_jacobi, gauss_legendre};

/// A quadrature rule on a reference domain.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

/// Rule on the bi-unit triangle {r,s >= -1, r+s <= 0}, exact to `degree`.
pub fn tri_rule(degree: usize) -> QuadRule {
    let n = points_for_degree(degree);
    let (xa, wa) = gauss_legendre(n);
    let (xb, wb) = gauss_jacobi(1.0, 0.0, n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (b, wbv) in xb.iter().zip(&wb) {
        for (a, wav) in xa.iter().zip(&wa) {
            let r = (1.0 + a) * (1.0 - b) / 2.0 - 1.0;
            points.push([r, *b, 0.0]);
            weights.push(wav * wbv / 2.0);
        }
    }
    QuadRule { points, weights }
}

/// Rule on the bi-unit quad [-1,1]^2, exact to `degree` per direction.
pub fn quad_rule(degree: usize) -> QuadRule {
    let n = points_for_degree(degree);
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (v, wv) in x.iter().zip(&w) {
        for (u, wu) in x.iter().zip(&w) {
            points.push([*u, *v, 0.0]);
            weights.push(wu * wv);
        }
    }
    QuadRule { points, weights }
}

/// Rule on the bi-unit tetrahedron, exact to `degree`.
pub fn tet_rule(degree: usize) -> QuadRule {
    let n = points_for_degree(degree);
    let (xa, wa) = gauss_legendre(n);
    let (xb, wb) = gauss_jacobi(1.0, 0.0, n);
    let (xc, wc) = gauss_jacobi(2.0, 0.0, n);
    let mut points = Vec::with_capacity(n * n * n);
    let mut weights = Vec::with_capacity(n * n * n);
    for (c, wcv) in xc.iter().zip(&wc) {
        for (b, wbv) in xb.iter().zip(&wb) {
            for (a, wav) in xa.iter().zip(&wa) {
                let r = (1.0 + a) * (1.0 - b) * (1.0 - c) / 4.0 - 1.0;
                let s = (1.0 + b) * (1.0 - c) / 2.0 - 1.0;
                points.push([r, s, *c]);
                weights.push(wav * wbv * wcv / 8.0);
            }
        }
    }
    QuadRule { points, weights }
}

/// Rule on the bi-unit prism (triangle cross [-1,1]), exact to `degree`.
pub fn prism_rule(degree: usize) -> QuadRule {
    let tri = tri_rule(degree);
    let n = points_for_degree(degree);
    let (xt, wt) = gauss_legendre(n);
    let mut points = Vec::with_capacity(tri.len() * n);
    let mut weights = Vec::with_capacity(tri.len() * n);
    for (t, wtv) in xt.iter().zip(&wt) {
        for (pt, w) in tri.points.iter().zip(&tri.weights) {
            points.push([pt[0], pt[1], *t]);
            weights.push(w * wtv);
        }
    }
    QuadRule { points, weights }
}
