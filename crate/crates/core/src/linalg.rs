//! Sparse symmetric storage and preconditioned conjugate-gradient solves.
//!
//! The production path is PCG on the post-Dirichlet SPD operator with an
//! optional Jacobi or zero-fill incomplete-Cholesky preconditioner. Solves
//! are synchronous and reentrant; matrices are immutable once built.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("matrix dimension mismatch: matrix is {n}x{n}, vector has {len}")]
    DimensionMismatch { n: usize, len: usize },
    #[error(
        "conjugate gradient did not converge in {iterations} iterations \
         (relative residual {residual:.3e}, target {target:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
        best: Vec<f64>,
        history: Vec<f64>,
    },
    #[error("preconditioner breakdown: non-positive pivot at row {0}")]
    PreconditionerBreakdown(usize),
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
}

/// Compressed sparse row symmetric matrix.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

/// Incremental COO-style builder with duplicate accumulation.
#[derive(Debug)]
pub struct SparseBuilder {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseBuilder {
    pub fn new(n: usize) -> Self {
        SparseBuilder {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.rows[i].push((j, v));
    }

    /// Sort, merge duplicates, drop exact zeros created by cancellation of
    /// nothing (structural zeros from accumulation are kept).
    pub fn build(self) -> SparseMatrix {
        let mut row_offsets = Vec::with_capacity(self.n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for mut row in self.rows {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let col = row[k].0;
                let mut acc = 0.0;
                while k < row.len() && row[k].0 == col {
                    acc += row[k].1;
                    k += 1;
                }
                col_indices.push(col);
                values.push(acc);
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix {
            n: self.n,
            row_offsets,
            col_indices,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            y[i] = acc;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                if self.col_indices[k] == i {
                    d[i] = self.values[k];
                }
            }
        }
        d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_offsets[i]..self.row_offsets[i + 1] {
            if self.col_indices[k] == j {
                return self.values[k];
            }
        }
        0.0
    }

    /// Maximum absolute asymmetry |A - A^T| relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let mut max_entry = 0.0f64;
        let mut max_diff = 0.0f64;
        for i in 0..self.n {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let j = self.col_indices[k];
                max_entry = max_entry.max(self.values[k].abs());
                if j >= i {
                    max_diff = max_diff.max((self.values[k] - self.get(j, i)).abs());
                }
            }
        }
        if max_entry == 0.0 {
            0.0
        } else {
            max_diff / max_entry
        }
    }

    /// Matrix-market coordinate format dump for debugging.
    pub fn to_matrix_market(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "%%MatrixMarket matrix coordinate real general");
        let _ = writeln!(out, "{} {} {}", self.n, self.n, self.nnz());
        for i in 0..self.n {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let _ = writeln!(out, "{} {} {:.17e}", i + 1, self.col_indices[k] + 1, self.values[k]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Diagonal,
    IncompleteCholesky,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub rel_tolerance: f64,
    /// defaults to 10 sqrt(N) + 200 when None
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tolerance: 1e-10,
            max_iterations: None,
            preconditioner: Preconditioner::Diagonal,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolveError> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance <= 1e-2) {
            return Err(SolveError::BadConfig(format!(
                "rel_tolerance must lie in (0, 1e-2], got {}",
                self.rel_tolerance
            )));
        }
        Ok(())
    }

    fn iteration_cap(&self, n: usize) -> usize {
        self.max_iterations
            .unwrap_or_else(|| 10 * (n as f64).sqrt().ceil() as usize + 200)
    }
}

/// Convergence report of one solve.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub target_residual: f64,
}

/// Zero-fill incomplete Cholesky factor (lower triangular, CSR).
pub struct IncompleteCholeskyFactor {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    diag_pos: Vec<usize>,
}

impl IncompleteCholeskyFactor {
    /// Zero-fill factorization; retries with a scaled diagonal shift when a
    /// pivot turns non-positive (the factor then preconditions A + s D).
    pub fn new(a: &SparseMatrix) -> Result<Self, SolveError> {
        let mut shift = 0.0;
        loop {
            match Self::with_shift(a, shift) {
                Ok(f) => return Ok(f),
                Err(SolveError::PreconditionerBreakdown(row)) => {
                    if shift >= 1.0 {
                        return Err(SolveError::PreconditionerBreakdown(row));
                    }
                    shift = if shift == 0.0 { 1e-3 } else { shift * 10.0 };
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn with_shift(a: &SparseMatrix, shift: f64) -> Result<Self, SolveError> {
        let n = a.n;
        // lower-triangular pattern of A
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut diag_pos = vec![0usize; n];
        row_offsets.push(0);
        for i in 0..n {
            for k in a.row_offsets[i]..a.row_offsets[i + 1] {
                let j = a.col_indices[k];
                if j <= i {
                    if j == i {
                        diag_pos[i] = col_indices.len();
                        values.push(a.values[k] * (1.0 + shift));
                    } else {
                        values.push(a.values[k]);
                    }
                    col_indices.push(j);
                }
            }
            row_offsets.push(col_indices.len());
        }

        // in-place IC(0): for each row, subtract computed contributions
        let mut col_of_row: Vec<std::collections::BTreeMap<usize, usize>> = vec![Default::default(); n];
        for i in 0..n {
            for k in row_offsets[i]..row_offsets[i + 1] {
                col_of_row[i].insert(col_indices[k], k);
            }
        }
        for i in 0..n {
            for k in row_offsets[i]..row_offsets[i + 1] {
                let j = col_indices[k];
                // values[k] = (A_ij - sum_{p<j} L_ip L_jp) / L_jj  (j < i)
                let mut acc = values[k];
                for ki in row_offsets[i]..row_offsets[i + 1] {
                    let p = col_indices[ki];
                    if p >= j {
                        break;
                    }
                    if let Some(&kj) = col_of_row[j].get(&p) {
                        acc -= values[ki] * values[kj];
                    }
                }
                if j < i {
                    let ljj = values[diag_pos[j]];
                    values[k] = acc / ljj;
                } else {
                    // diagonal
                    if acc <= 0.0 {
                        return Err(SolveError::PreconditionerBreakdown(i));
                    }
                    values[k] = acc.sqrt();
                }
            }
        }
        Ok(IncompleteCholeskyFactor {
            n,
            row_offsets,
            col_indices,
            values,
            diag_pos,
        })
    }

    /// Solve L L^T z = r.
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        // forward: L y = r
        for i in 0..self.n {
            let mut acc = r[i];
            for k in self.row_offsets[i]..self.diag_pos[i] {
                acc -= self.values[k] * z[self.col_indices[k]];
            }
            z[i] = acc / self.values[self.diag_pos[i]];
        }
        // backward: L^T z = y
        for i in (0..self.n).rev() {
            let zi = z[i] / self.values[self.diag_pos[i]];
            z[i] = zi;
            for k in self.row_offsets[i]..self.diag_pos[i] {
                z[self.col_indices[k]] -= self.values[k] * zi;
            }
        }
    }
}

pub(crate) enum Precond {
    None,
    Diagonal(Vec<f64>),
    Ic(IncompleteCholeskyFactor),
}

impl Precond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::None => z.copy_from_slice(r),
            Precond::Diagonal(d) => {
                for i in 0..r.len() {
                    z[i] = r[i] / d[i];
                }
            }
            Precond::Ic(f) => f.apply(r, z),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A solver with its preconditioner factored once, reusable across many
/// right-hand sides of the same matrix.
pub struct PreparedSolver {
    cfg: SolverConfig,
    precond: Precond,
}

impl PreparedSolver {
    pub fn new(a: &SparseMatrix, cfg: SolverConfig) -> Result<PreparedSolver, SolveError> {
        cfg.validate()?;
        let precond = match cfg.preconditioner {
            Preconditioner::None => Precond::None,
            Preconditioner::Diagonal => {
                let mut d = a.diagonal();
                for (i, v) in d.iter_mut().enumerate() {
                    if *v <= 0.0 {
                        return Err(SolveError::PreconditionerBreakdown(i));
                    }
                }
                Precond::Diagonal(d)
            }
            Preconditioner::IncompleteCholesky => Precond::Ic(IncompleteCholeskyFactor::new(a)?),
        };
        Ok(PreparedSolver { cfg, precond })
    }

    pub fn solve(
        &self,
        a: &SparseMatrix,
        b: &[f64],
        warm_start: Option<&[f64]>,
    ) -> Result<(Vec<f64>, ConvergenceReport), SolveError> {
        pcg(a, b, &self.cfg, &self.precond, warm_start)
    }
}

/// Solve a singular consistent system whose nullspace is the constant
/// vector (the pure-Neumann Laplacian): the right-hand side is projected
/// onto the range and the returned solution has zero mean.
pub fn solve_spd_deflated(
    a: &SparseMatrix,
    b: &[f64],
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, ConvergenceReport), SolveError> {
    let n = a.n;
    if b.len() != n {
        return Err(SolveError::DimensionMismatch { n, len: b.len() });
    }
    let mean = b.iter().sum::<f64>() / n as f64;
    let b_c: Vec<f64> = b.iter().map(|v| v - mean).collect();
    let prepared = PreparedSolver::new(a, *cfg)?;
    let (mut x, report) = prepared.solve(a, &b_c, None)?;
    let x_mean = x.iter().sum::<f64>() / n as f64;
    for v in &mut x {
        *v -= x_mean;
    }
    Ok((x, report))
}

/// Solve the SPD system A x = b with preconditioned conjugate gradients.
pub fn solve_spd(
    a: &SparseMatrix,
    b: &[f64],
    cfg: &SolverConfig,
    warm_start: Option<&[f64]>,
) -> Result<(Vec<f64>, ConvergenceReport), SolveError> {
    let prepared = PreparedSolver::new(a, *cfg)?;
    prepared.solve(a, b, warm_start)
}

fn pcg(
    a: &SparseMatrix,
    b: &[f64],
    cfg: &SolverConfig,
    precond: &Precond,
    warm_start: Option<&[f64]>,
) -> Result<(Vec<f64>, ConvergenceReport), SolveError> {
    let n = a.n;
    if b.len() != n {
        return Err(SolveError::DimensionMismatch { n, len: b.len() });
    }
    if let Some(w) = warm_start {
        if w.len() != n {
            return Err(SolveError::DimensionMismatch { n, len: w.len() });
        }
    }

    let b_norm = norm2(b);
    let target = if b_norm > 0.0 {
        cfg.rel_tolerance * b_norm
    } else {
        cfg.rel_tolerance
    };

    let mut x = warm_start.map(|w| w.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut history = vec![norm2(&r)];
    if history[0] <= target {
        return Ok((
            x,
            ConvergenceReport {
                iterations: 0,
                final_residual: history[0],
                target_residual: target,
            },
        ));
    }

    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    let cap = cfg.iteration_cap(n);
    for it in 1..=cap {
        a.matvec(&p, &mut ap);
        let p_ap = dot(&p, &ap);
        if p_ap <= 0.0 {
            return Err(SolveError::NonConvergence {
                iterations: it,
                residual: *history.last().unwrap() / b_norm.max(1e-300),
                target: cfg.rel_tolerance,
                best: x,
                history,
            });
        }
        let alpha = rz / p_ap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = norm2(&r);
        history.push(res);
        if res <= target {
            return Ok((
                x,
                ConvergenceReport {
                    iterations: it,
                    final_residual: res,
                    target_residual: target,
                },
            ));
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
    }

    Err(SolveError::NonConvergence {
        iterations: cap,
        residual: *history.last().unwrap() / b_norm.max(1e-300),
        target: cfg.rel_tolerance,
        best: x,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn identity(n: usize) -> SparseMatrix {
        let mut b = SparseBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 1.0);
        }
        b.build()
    }

    fn laplacian_1d(n: usize) -> SparseMatrix {
        let mut b = SparseBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i > 0 {
                b.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                b.add(i, i + 1, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn identity_solve_is_immediate() {
        let a = identity(7);
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 2.5).collect();
        let (x, rep) = solve_spd(&a, &b, &SolverConfig::default(), None).unwrap();
        assert!(rep.iterations <= 1);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn tridiagonal_known_solution() {
        let n = 10;
        let a = laplacian_1d(n);
        let x_true: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let b = a.matvec_alloc(&x_true);
        let (x, _) = solve_spd(&a, &b, &SolverConfig::default(), None).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-9, "{x:?}");
        }
    }

    #[test]
    fn warm_start_with_exact_solution_reports_zero_iterations() {
        let n = 10;
        let a = laplacian_1d(n);
        let x_true: Vec<f64> = (1..=n).map(|i| (i as f64).sin()).collect();
        let b = a.matvec_alloc(&x_true);
        let (_, rep) = solve_spd(&a, &b, &SolverConfig::default(), Some(&x_true)).unwrap();
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn builder_accumulates_duplicates() {
        let mut b = SparseBuilder::new(2);
        b.add(0, 0, 1.0);
        b.add(0, 0, 2.0);
        b.add(0, 1, -1.0);
        b.add(1, 0, -1.0);
        b.add(1, 1, 3.0);
        let a = b.build();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 4);
        assert!(a.asymmetry() < 1e-15);
        // sorted column indices per row
        for i in 0..a.n {
            let cols = &a.col_indices[a.row_offsets[i]..a.row_offsets[i + 1]];
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
        }
    }

    /// dense Cholesky oracle for small SPD systems
    fn dense_solve(a: &SparseMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.n;
        let mut dm = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for k in a.row_offsets[i]..a.row_offsets[i + 1] {
                dm[(i, a.col_indices[k])] = a.values[k];
            }
        }
        let chol = dm.cholesky().expect("SPD");
        let x = chol.solve(&DVector::from_column_slice(b));
        x.iter().copied().collect()
    }

    fn random_spd(n: usize, seed: &mut u64) -> SparseMatrix {
        // diagonally dominant random symmetric matrix
        let mut rnd = || {
            *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((*seed >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let mut b = SparseBuilder::new(n);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                if (i + j) % 3 == 0 {
                    let v = rnd();
                    dense[i][j] = v;
                    dense[j][i] = v;
                }
            }
        }
        for i in 0..n {
            let row_sum: f64 = dense[i].iter().map(|v| v.abs()).sum();
            dense[i][i] = row_sum + 1.0;
        }
        for i in 0..n {
            for j in 0..n {
                if dense[i][j] != 0.0 {
                    b.add(i, j, dense[i][j]);
                }
            }
        }
        b.build()
    }

    #[test]
    fn matches_dense_cholesky_oracle() {
        let mut seed = 42;
        for n in [5, 20, 60] {
            let a = random_spd(n, &mut seed);
            let b: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
            let (x, _) = solve_spd(&a, &b, &SolverConfig::default(), None).unwrap();
            let oracle = dense_solve(&a, &b);
            for (xi, oi) in x.iter().zip(&oracle) {
                assert!((xi - oi).abs() < 1e-8, "n={n}");
            }
        }
    }

    #[test]
    fn a_norm_error_monotonically_decreases() {
        // run CG manually step by step against the dense solution
        let n = 30;
        let mut seed = 7;
        let a = random_spd(n, &mut seed);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let x_star = dense_solve(&a, &b);
        let a_norm_err = |x: &[f64]| -> f64 {
            let e: Vec<f64> = x.iter().zip(&x_star).map(|(xi, si)| xi - si).collect();
            let ae = a.matvec_alloc(&e);
            dot(&e, &ae).sqrt()
        };
        // re-run the solver with increasing iteration caps; the A-norm error
        // of the returned iterate must decrease monotonically
        let mut last = f64::INFINITY;
        for cap in 1..15 {
            let cfg = SolverConfig {
                rel_tolerance: 1e-14,
                max_iterations: Some(cap),
                preconditioner: Preconditioner::None,
            };
            let x = match solve_spd(&a, &b, &cfg, None) {
                Ok((x, _)) => x,
                Err(SolveError::NonConvergence { best, .. }) => best,
                Err(e) => panic!("{e}"),
            };
            let err = a_norm_err(&x);
            assert!(err <= last + 1e-13, "cap={cap}: {err} > {last}");
            last = err;
        }
    }

    #[test]
    fn diagonal_preconditioner_does_not_increase_iterations() {
        let n = 200;
        // badly scaled diagonal
        let mut b = SparseBuilder::new(n);
        for i in 0..n {
            let s = 1.0 + (i % 17) as f64 * 10.0;
            b.add(i, i, 2.0 * s);
            if i > 0 {
                b.add(i, i - 1, -0.5);
                b.add(i - 1, i, -0.5);
            }
        }
        let a = b.build();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let none = SolverConfig {
            preconditioner: Preconditioner::None,
            ..Default::default()
        };
        let diag = SolverConfig {
            preconditioner: Preconditioner::Diagonal,
            ..Default::default()
        };
        let (_, rep_none) = solve_spd(&a, &rhs, &none, None).unwrap();
        let (_, rep_diag) = solve_spd(&a, &rhs, &diag, None).unwrap();
        assert!(
            rep_diag.iterations <= rep_none.iterations,
            "diag {} vs none {}",
            rep_diag.iterations,
            rep_none.iterations
        );
    }

    #[test]
    fn incomplete_cholesky_reduces_iterations_on_laplacian() {
        let n = 400;
        let a = laplacian_1d(n);
        let rhs: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.05).sin()).collect();
        let plain = SolverConfig {
            preconditioner: Preconditioner::None,
            ..Default::default()
        };
        let ic = SolverConfig {
            preconditioner: Preconditioner::IncompleteCholesky,
            ..Default::default()
        };
        let (x1, rep1) = solve_spd(&a, &rhs, &plain, None).unwrap();
        let (x2, rep2) = solve_spd(&a, &rhs, &ic, None).unwrap();
        assert!(rep2.iterations < rep1.iterations);
        for (a1, a2) in x1.iter().zip(&x2) {
            assert!((a1 - a2).abs() < 1e-6);
        }
        // IC(0) on a tridiagonal matrix is the exact factorization
        assert!(rep2.iterations <= 2, "{}", rep2.iterations);
    }

    #[test]
    fn warm_start_does_not_change_the_solution() {
        let n = 120;
        let a = laplacian_1d(n);
        let rhs: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.21).sin()).collect();
        let cfg = SolverConfig::default();
        let (cold, _) = solve_spd(&a, &rhs, &cfg, None).unwrap();
        let warm_guess: Vec<f64> = (0..n).map(|i| ((i * 13 % 7) as f64) - 3.0).collect();
        let (warm, _) = solve_spd(&a, &rhs, &cfg, Some(&warm_guess)).unwrap();
        let scale = cold.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (c, w) in cold.iter().zip(&warm) {
            assert!((c - w).abs() <= 10.0 * cfg.rel_tolerance * scale * n as f64);
        }
    }

    #[test]
    fn non_convergence_carries_history() {
        let n = 400;
        let a = laplacian_1d(n);
        let rhs = vec![1.0; n];
        let cfg = SolverConfig {
            rel_tolerance: 1e-12,
            max_iterations: Some(3),
            preconditioner: Preconditioner::None,
        };
        match solve_spd(&a, &rhs, &cfg, None) {
            Err(SolveError::NonConvergence { history, best, .. }) => {
                assert_eq!(history.len(), 4);
                assert_eq!(best.len(), n);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn deflated_solve_handles_the_constant_nullspace() {
        // singular Neumann-style matrix: 1D Laplacian with free ends
        let n = 30;
        let mut bld = SparseBuilder::new(n);
        for i in 0..n {
            let mut d = 0.0;
            if i > 0 {
                bld.add(i, i - 1, -1.0);
                d += 1.0;
            }
            if i + 1 < n {
                bld.add(i, i + 1, -1.0);
                d += 1.0;
            }
            bld.add(i, i, d);
        }
        let a = bld.build();
        // consistent rhs from a zero-mean solution
        let x_true: Vec<f64> = (0..n)
            .map(|i| (i as f64 * 0.4).sin())
            .collect();
        let mean = x_true.iter().sum::<f64>() / n as f64;
        let x_true: Vec<f64> = x_true.iter().map(|v| v - mean).collect();
        let b = a.matvec_alloc(&x_true);
        let cfg = SolverConfig {
            preconditioner: Preconditioner::Diagonal,
            ..Default::default()
        };
        let (x, _) = solve_spd_deflated(&a, &b, &cfg).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-8, "{xi} vs {ti}");
        }
    }

    #[test]
    fn bad_tolerance_rejected() {
        let a = identity(3);
        let cfg = SolverConfig {
            rel_tolerance: 0.5,
            ..Default::default()
        };
        assert!(matches!(
            solve_spd(&a, &[1.0, 2.0, 3.0], &cfg, None),
            Err(SolveError::BadConfig(_))
        ));
    }
}
