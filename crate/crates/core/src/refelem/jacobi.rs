//! Jacobi polynomials, Gauss and Gauss-Lobatto rules.
//!
//! Polynomials are normalized so that they are orthonormal under the
//! weight (1-x)^alpha (1+x)^beta on [-1, 1]. Quadrature nodes come from a
//! Golub-Welsch eigenvalue solve of the three-term recurrence matrix.

use nalgebra::{DMatrix, SymmetricEigen};

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7, n = 9. Accurate to ~1e-14 for x > 0.
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// Evaluate the orthonormal Jacobi polynomial P_n^{(alpha,beta)} at `x`.
pub fn jacobi(x: f64, alpha: f64, beta: f64, n: usize) -> f64 {
    let gamma0 = 2f64.powf(alpha + beta + 1.0) / (alpha + beta + 1.0) * gamma(alpha + 1.0)
        * gamma(beta + 1.0)
        / gamma(alpha + beta + 1.0);
    let mut pm1 = 1.0 / gamma0.sqrt();
    if n == 0 {
        return pm1;
    }
    let gamma1 = (alpha + 1.0) * (beta + 1.0) / (alpha + beta + 3.0) * gamma0;
    let mut p = ((alpha + beta + 2.0) * x / 2.0 + (alpha - beta) / 2.0) / gamma1.sqrt();
    if n == 1 {
        return p;
    }
    let mut aold = 2.0 / (2.0 + alpha + beta)
        * ((alpha + 1.0) * (beta + 1.0) / (alpha + beta + 3.0)).sqrt();
    for i in 1..n {
        let i = i as f64;
        let h1 = 2.0 * i + alpha + beta;
        let anew = 2.0 / (h1 + 2.0)
            * ((i + 1.0) * (i + 1.0 + alpha + beta) * (i + 1.0 + alpha) * (i + 1.0 + beta)
                / (h1 + 1.0)
                / (h1 + 3.0))
                .sqrt();
        let bnew = -(alpha * alpha - beta * beta) / h1 / (h1 + 2.0);
        let pnew = (-aold * pm1 + (x - bnew) * p) / anew;
        pm1 = p;
        p = pnew;
        aold = anew;
    }
    p
}

/// Derivative of the orthonormal Jacobi polynomial.
pub fn jacobi_deriv(x: f64, alpha: f64, beta: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (n as f64 * (n as f64 + alpha + beta + 1.0)).sqrt()
        * jacobi(x, alpha + 1.0, beta + 1.0, n - 1)
}

/// Gauss-Jacobi quadrature: `n` nodes and weights, exact for polynomial
/// degree 2n-1 against the weight (1-x)^alpha (1+x)^beta.
pub fn gauss_jacobi(alpha: f64, beta: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature rule needs at least one node");
    let total_mass = 2f64.powf(alpha + beta + 1.0) / (alpha + beta + 1.0) * gamma(alpha + 1.0)
        * gamma(beta + 1.0)
        / gamma(alpha + beta + 1.0);
    if n == 1 {
        return (vec![(beta - alpha) / (alpha + beta + 2.0)], vec![total_mass]);
    }
    let m = n - 1;
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let h1 = 2.0 * kf + alpha + beta;
        let diag = if k == 0 && alpha + beta == 0.0 {
            0.0
        } else {
            -(alpha * alpha - beta * beta) / (h1 + 2.0) / h1
        };
        j[(k, k)] = diag;
        if k < m {
            let i = kf + 1.0;
            let off = 2.0 / (h1 + 2.0)
                * (i * (i + alpha + beta) * (i + alpha) * (i + beta) / (h1 + 1.0) / (h1 + 3.0))
                    .sqrt();
            j[(k, k + 1)] = off;
            j[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], v0 * v0 * total_mass)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
}

/// Gauss-Lobatto-Legendre nodes on [-1, 1], endpoints included.
pub fn gauss_lobatto(n_order: usize) -> Vec<f64> {
    assert!(n_order >= 1);
    if n_order == 1 {
        return vec![-1.0, 1.0];
    }
    let (interior, _) = gauss_jacobi(1.0, 1.0, n_order - 1);
    let mut nodes = Vec::with_capacity(n_order + 1);
    nodes.push(-1.0);
    nodes.extend(interior);
    nodes.push(1.0);
    nodes
}

/// Gauss-Legendre rule (unit weight), exact for degree 2n-1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi(0.0, 0.0, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_matches_factorials() {
        for k in 1..10usize {
            let expect: f64 = (1..k).map(|i| i as f64).product();
            assert!((gamma(k as f64) - expect).abs() / expect.max(1.0) < 1e-13);
        }
        assert!((gamma(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn legendre_orthonormality_by_quadrature() {
        let (x, w) = gauss_legendre(12);
        for a in 0..6 {
            for b in 0..6 {
                let mut acc = 0.0;
                for (xi, wi) in x.iter().zip(&w) {
                    acc += wi * jacobi(*xi, 0.0, 0.0, a) * jacobi(*xi, 0.0, 0.0, b);
                }
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-12, "({a},{b}) -> {acc}");
            }
        }
    }

    #[test]
    fn jacobi_weighted_orthonormality() {
        // weight (1-x)^2: used by the collapsed tetrahedron direction.
        let (x, w) = gauss_jacobi(2.0, 0.0, 14);
        for a in 0..5 {
            for b in 0..5 {
                let mut acc = 0.0;
                for (xi, wi) in x.iter().zip(&w) {
                    acc += wi * jacobi(*xi, 2.0, 0.0, a) * jacobi(*xi, 2.0, 0.0, b);
                }
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_derivative_against_finite_differences() {
        let h = 1e-6;
        for n in 0..7 {
            for &x in &[-0.7, -0.2, 0.11, 0.64] {
                let fd = (jacobi(x + h, 1.0, 0.0, n) - jacobi(x - h, 1.0, 0.0, n)) / (2.0 * h);
                let an = jacobi_deriv(x, 1.0, 0.0, n);
                assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        // degree 9 monomials; odd vanish, even integrate to 2/(k+1).
        for k in 0..=9usize {
            let acc: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
            let expect = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert!((acc - expect).abs() < 1e-13, "degree {k}");
        }
    }

    #[test]
    fn lobatto_endpoints_and_symmetry() {
        for p in 1..=9 {
            let gl = gauss_lobatto(p);
            assert_eq!(gl.len(), p + 1);
            assert_eq!(gl[0], -1.0);
            assert_eq!(gl[p], 1.0);
            for i in 0..=p {
                assert!((gl[i] + gl[p - i]).abs() < 1e-13);
            }
            for i in 0..p {
                assert!(gl[i + 1] > gl[i]);
            }
        }
        // P=2 has the midpoint.
        assert!(gauss_lobatto(2)[1].abs() < 1e-14);
    }
}
