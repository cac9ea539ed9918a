//! 2D reference triangle element for the free-surface trace operators.
//!
//! Node layout matches the top-face trace of the prism element, so
//! free-surface fields share their numbering with the volume solution.

use super::basis::{tri_mode, tri_mode_grad, tri_mode_ids};
use super::jacobi;
use super::nodes::triangle_nodes;
use super::quadrature::{tri_rule, QuadRule};
use super::RefElemError;
use nalgebra::DMatrix;
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone)]
pub struct TriElement {
    pub order: usize,
    pub nodes: Vec<[f64; 2]>,
    pub v_inv: DMatrix<f64>,
    /// nodal differentiation at the nodes, d/dr and d/ds
    pub diff_ops: [DMatrix<f64>; 2],
    pub quad: QuadRule,
    /// nodal values -> quadrature values
    pub vq: DMatrix<f64>,
    /// nodal values -> reference derivatives at quadrature points
    pub dq: [DMatrix<f64>; 2],
    /// 1D Gauss-Lobatto trace on each edge (edge nodes in order)
    pub edge_nodes: [Vec<usize>; 3],
}

impl TriElement {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn cached(p: usize) -> Result<Arc<TriElement>, RefElemError> {
        static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<TriElement>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
        {
            let guard = cache.lock().unwrap();
            if let Some(elem) = guard.get(&p) {
                return Ok(elem.clone());
            }
        }
        let built = Arc::new(Self::build(p)?);
        cache.lock().unwrap().insert(p, built.clone());
        Ok(built)
    }

    pub fn build(p: usize) -> Result<TriElement, RefElemError> {
        if p < 1 || p > super::MAX_ORDER {
            return Err(RefElemError::UnsupportedOrder(p));
        }
        let nodes = triangle_nodes(p);
        let ids = tri_mode_ids(p);
        let n = nodes.len();
        let mut v = DMatrix::<f64>::zeros(n, n);
        let mut vr = DMatrix::<f64>::zeros(n, n);
        let mut vs = DMatrix::<f64>::zeros(n, n);
        for (i, pt) in nodes.iter().enumerate() {
            for (m, &(a, b)) in ids.iter().enumerate() {
                v[(i, m)] = tri_mode(pt[0], pt[1], a, b);
                let (dr, ds) = tri_mode_grad(pt[0], pt[1], a, b);
                vr[(i, m)] = dr;
                vs[(i, m)] = ds;
            }
        }
        let v_inv = v
            .try_inverse()
            .ok_or(RefElemError::SingularVandermonde(super::Shape::Prism, p))?;
        let diff_ops = [&vr * &v_inv, &vs * &v_inv];

        let quad = tri_rule(2 * p + 1);
        let nq = quad.len();
        let mut vq = DMatrix::<f64>::zeros(nq, n);
        let mut dqr = DMatrix::<f64>::zeros(nq, n);
        let mut dqs = DMatrix::<f64>::zeros(nq, n);
        for (q, pt) in quad.points.iter().enumerate() {
            for (m, &(a, b)) in ids.iter().enumerate() {
                vq[(q, m)] = tri_mode(pt[0], pt[1], a, b);
                let (dr, ds) = tri_mode_grad(pt[0], pt[1], a, b);
                dqr[(q, m)] = dr;
                dqs[(q, m)] = ds;
            }
        }
        let vq = vq * &v_inv;
        let dq = [&dqr * &v_inv, &dqs * &v_inv];

        // edge traces: edge 0: s=-1, edge 1: r+s=0, edge 2: r=-1
        let on_edge = |pt: &[f64; 2], e: usize| -> bool {
            let tol = 1e-9;
            match e {
                0 => (pt[1] + 1.0).abs() < tol,
                1 => (pt[0] + pt[1]).abs() < tol,
                _ => (pt[0] + 1.0).abs() < tol,
            }
        };
        let mut edge_nodes: [Vec<usize>; 3] = Default::default();
        for e in 0..3 {
            let mut ids: Vec<usize> = (0..n).filter(|&i| on_edge(&nodes[i], e)).collect();
            // order along the edge
            ids.sort_by(|&a, &b| {
                let ka = match e {
                    0 => nodes[a][0],
                    1 => nodes[a][1],
                    _ => nodes[a][1],
                };
                let kb = match e {
                    0 => nodes[b][0],
                    1 => nodes[b][1],
                    _ => nodes[b][1],
                };
                ka.partial_cmp(&kb).unwrap()
            });
            edge_nodes[e] = ids;
        }

        Ok(TriElement {
            order: p,
            nodes,
            v_inv,
            diff_ops,
            quad,
            vq,
            dq,
            edge_nodes,
        })
    }
}

/// Smallest Gauss-Lobatto gap as a fraction of the bi-unit interval.
pub fn min_lobatto_gap_fraction(p: usize) -> f64 {
    let gl = jacobi::gauss_lobatto(p);
    gl.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
        / 2.0
}
