//! Shared helpers for the integration-test suite.
//!
//! The centrepiece is an independent second-order-cone oracle for the
//! constrained complex ℓ1 problem, built on Clarabel over the standard real
//! embedding. It shares no code with the crate's own first-order solver, so
//! agreement between the two is meaningful evidence of correctness.

#![allow(dead_code)]

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use cransim::C64;

/// Build a CSC matrix from a dense accessor (column-major scan).
fn dense_to_csc(m: usize, n: usize, get: impl Fn(usize, usize) -> f64) -> CscMatrix<f64> {
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0usize);
    for j in 0..n {
        for i in 0..m {
            let v = get(i, j);
            if v != 0.0 {
                rowval.push(i);
                nzval.push(v);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

/// Independent conic-programming oracle for
/// `minimize Σ_j |x_j|  subject to  ‖Θx − z‖ ≤ λ` over complex `x`.
///
/// Real embedding: variables `v = [Re x; Im x; t]`, minimize `Σ t_j` with
/// one 3-dimensional second-order cone `t_j ≥ |(Re x_j, Im x_j)|` per entry
/// and one `(2m+1)`-dimensional cone for the residual ball. For `λ = 0` the
/// residual constraint degenerates to the linear equality `Θx = z` (zero
/// cone). Returns the optimal objective and the complex minimizer.
pub fn socp_min_l1(theta: &DMatrix<C64>, z: &DVector<C64>, lambda: f64) -> (f64, DVector<C64>) {
    assert!(lambda >= 0.0);
    let m = theta.nrows();
    let n = theta.ncols();
    let nv = 3 * n; // [xr(n), xi(n), t(n)]

    let tre = |i: usize, j: usize| theta[(i, j)].re;
    let tim = |i: usize, j: usize| theta[(i, j)].im;

    // Rows of the conic constraint s = b - A v.
    // Residual block: s = (z_re - (Θr xr - Θi xi), z_im - (Θi xr + Θr xi)).
    let resid_entry = |kk: usize, j: usize| -> f64 {
        if kk < m {
            // real part rows
            if j < n {
                tre(kk, j)
            } else if j < 2 * n {
                -tim(kk, j - n)
            } else {
                0.0
            }
        } else {
            // imaginary part rows
            let k = kk - m;
            if j < n {
                tim(k, j)
            } else if j < 2 * n {
                tre(k, j - n)
            } else {
                0.0
            }
        }
    };

    let (a, b, cones): (CscMatrix<f64>, Vec<f64>, Vec<SupportedConeT<f64>>) = if lambda > 0.0 {
        // Layout: n SOC(3) blocks [(t_j, xr_j, xi_j)], then SOC(2m+1)
        // [(λ, residual parts)].
        let rows = 3 * n + 2 * m + 1;
        let a = dense_to_csc(rows, nv, |i, j| {
            if i < 3 * n {
                let block = i / 3;
                match i % 3 {
                    0 if j == 2 * n + block => -1.0,
                    1 if j == block => -1.0,
                    2 if j == n + block => -1.0,
                    _ => 0.0,
                }
            } else if i == 3 * n {
                0.0 // radius row: s = λ
            } else {
                resid_entry(i - 3 * n - 1, j)
            }
        });
        let mut b = vec![0.0; rows];
        b[3 * n] = lambda;
        for k in 0..m {
            b[3 * n + 1 + k] = z[k].re;
            b[3 * n + 1 + m + k] = z[k].im;
        }
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        for _ in 0..n {
            cones.push(SupportedConeT::SecondOrderConeT(3));
        }
        cones.push(SupportedConeT::SecondOrderConeT(2 * m + 1));
        (a, b, cones)
    } else {
        // λ = 0: equality rows first (zero cone), then the n SOC(3) blocks.
        let rows = 2 * m + 3 * n;
        let a = dense_to_csc(rows, nv, |i, j| {
            if i < 2 * m {
                resid_entry(i, j)
            } else {
                let i2 = i - 2 * m;
                let block = i2 / 3;
                match i2 % 3 {
                    0 if j == 2 * n + block => -1.0,
                    1 if j == block => -1.0,
                    2 if j == n + block => -1.0,
                    _ => 0.0,
                }
            }
        });
        let mut b = vec![0.0; rows];
        for k in 0..m {
            b[k] = z[k].re;
            b[m + k] = z[k].im;
        }
        let mut cones: Vec<SupportedConeT<f64>> =
            vec![SupportedConeT::ZeroConeT(2 * m)];
        for _ in 0..n {
            cones.push(SupportedConeT::SecondOrderConeT(3));
        }
        (a, b, cones)
    };

    let p = dense_to_csc(nv, nv, |_, _| 0.0);
    let mut q = vec![0.0; nv];
    for j in 0..n {
        q[2 * n + j] = 1.0;
    }

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-10)
        .tol_gap_rel(1e-10)
        .tol_feas(1e-10)
        .build()
        .expect("settings");
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).expect("solver setup");
    solver.solve();
    assert!(
        matches!(
            solver.solution.status,
            SolverStatus::Solved | SolverStatus::AlmostSolved
        ),
        "oracle solver failed: {:?}",
        solver.solution.status
    );

    let v = &solver.solution.x;
    let x = DVector::from_fn(n, |j, _| C64::new(v[j], v[n + j]));
    let objective: f64 = (0..n).map(|j| v[2 * n + j]).sum();
    (objective, x)
}

/// Random complex matrix with i.i.d. standard circular Gaussian entries
/// scaled by `scale`.
pub fn gaussian_matrix(rng: &mut ChaCha12Rng, m: usize, n: usize, scale: f64) -> DMatrix<C64> {
    let s = scale / 2.0_f64.sqrt();
    DMatrix::from_fn(m, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Random complex vector with i.i.d. standard circular Gaussian entries.
pub fn gaussian_vector(rng: &mut ChaCha12Rng, m: usize, scale: f64) -> DVector<C64> {
    gaussian_matrix(rng, m, 1, scale).column(0).into_owned()
}

/// Uniformly random size-`k` subset of `0..n`, sorted ascending.
pub fn random_support(rng: &mut ChaCha12Rng, n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut s = idx[..k].to_vec();
    s.sort_unstable();
    s
}
