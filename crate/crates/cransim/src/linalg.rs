//! Dense complex linear-algebra helpers shared by the recovery and analysis
//! stages: an SVD-based pseudoinverse with explicit rank reporting, Hermitian
//! spectral norms, and an incrementally updatable orthonormal basis that
//! tracks the projection residual of a fixed right-hand side (the workhorse
//! of greedy support detection).

use nalgebra::{DMatrix, DVector};

use crate::C64;

/// Relative singular-value cutoff used for rank decisions: singular values
/// below `RANK_RTOL * sigma_max` are treated as zero.
pub const RANK_RTOL: f64 = 1e-10;

/// Moore–Penrose pseudoinverse of a complex matrix together with the rank
/// information needed by callers that must flag rank deficiency.
#[derive(Clone, Debug)]
pub struct PseudoInverse {
    /// The pseudoinverse itself: `n x m` for an `m x n` input.
    pub matrix: DMatrix<C64>,
    /// Numerical rank (singular values above the relative cutoff).
    pub rank: usize,
    /// Largest singular value of the input (0 for an all-zero input).
    pub sigma_max: f64,
    /// Smallest singular value of the input, unfiltered (0 for a matrix with
    /// fewer nonzero singular values than `min(m, n)`).
    pub sigma_min: f64,
    /// True when the input has full column rank.
    pub full_column_rank: bool,
}

/// SVD-based pseudoinverse with the crate-wide rank cutoff.
pub fn pseudo_inverse(a: &DMatrix<C64>) -> PseudoInverse {
    let (m, n) = a.shape();
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd requested u");
    let v_t = svd.v_t.as_ref().expect("svd requested v_t");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0_f64, f64::max);
    let sigma_min = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
    let sigma_min = if sigma_min.is_finite() { sigma_min } else { 0.0 };
    let tol = RANK_RTOL * sigma_max;
    let rank = sigma.iter().filter(|&&s| s > tol && s > 0.0).count();

    // A⁺ = V Σ⁺ Uᴴ, keeping only singular values above the cutoff.
    let mut pinv = DMatrix::<C64>::zeros(n, m);
    for k in 0..sigma.len() {
        let s = sigma[k];
        if s > tol && s > 0.0 {
            let inv = C64::new(1.0 / s, 0.0);
            // Column k of V is the conjugate transpose of row k of Vᴴ.
            let vk = v_t.row(k).adjoint(); // n x 1
            let uk = u.column(k); // m x 1
            for i in 0..n {
                for j in 0..m {
                    pinv[(i, j)] += vk[i] * inv * uk[j].conj();
                }
            }
        }
    }

    PseudoInverse {
        matrix: pinv,
        rank,
        sigma_max,
        sigma_min,
        full_column_rank: rank == n,
    }
}

/// Smallest singular value of a complex matrix.
pub fn smallest_singular_value(a: &DMatrix<C64>) -> f64 {
    let svd = a.clone().svd(false, false);
    svd.singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Spectral norm (largest absolute eigenvalue) of a Hermitian matrix.
///
/// The input is symmetrized as `(H + Hᴴ)/2` first so that tiny asymmetries
/// from accumulated round-off cannot push the eigensolver off the Hermitian
/// path.
pub fn hermitian_spectral_norm(h: &DMatrix<C64>) -> f64 {
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0_f64, |acc, &l| acc.max(l.abs()))
}

/// Orthonormal basis of a growing set of columns, with a cached projection
/// residual of a fixed right-hand side `z`.
///
/// Columns are inserted one at a time with twice-reorthogonalized
/// Gram–Schmidt; a column (numerically) inside the current span is rejected
/// and leaves the basis unchanged. After every accepted insertion the cached
/// residual equals `z - Q Qᴴ z` for the current orthonormal columns `Q`,
/// i.e. the least-squares residual of `z` against the span of all columns
/// inserted so far. Each insertion costs `O(rows * rank)` instead of a full
/// re-factorization.
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    q: Vec<DVector<C64>>,
    residual: DVector<C64>,
    rank_tol: f64,
}

impl OrthoBasis {
    /// Empty basis; the residual starts as `z` itself.
    pub fn new(z: &DVector<C64>) -> Self {
        OrthoBasis {
            q: Vec::new(),
            residual: z.clone(),
            rank_tol: RANK_RTOL,
        }
    }

    /// Number of orthonormal directions accepted so far.
    pub fn rank(&self) -> usize {
        self.q.len()
    }

    /// Insert a column. Returns `false` (basis unchanged) when the column is
    /// numerically inside the current span.
    pub fn insert(&mut self, col: &DVector<C64>) -> bool {
        assert_eq!(
            col.len(),
            self.residual.len(),
            "column length must match the right-hand side"
        );
        let norm_in = col.norm();
        if norm_in == 0.0 {
            return false;
        }
        let mut v = col.clone();
        // Two rounds of modified Gram-Schmidt give orthogonality at the
        // level of machine precision even for nearly dependent inputs.
        for _ in 0..2 {
            for q in &self.q {
                let coeff = q.dotc(&v);
                v.axpy(-coeff, q, C64::new(1.0, 0.0));
            }
        }
        let norm_out = v.norm();
        if norm_out <= self.rank_tol * norm_in {
            return false;
        }
        v /= C64::new(norm_out, 0.0);
        let coeff = v.dotc(&self.residual);
        self.residual.axpy(-coeff, &v, C64::new(1.0, 0.0));
        self.q.push(v);
        true
    }

    /// Current residual vector `z - Q Qᴴ z`.
    pub fn residual(&self) -> &DVector<C64> {
        &self.residual
    }

    /// Norm of the current residual.
    pub fn residual_norm(&self) -> f64 {
        self.residual.norm()
    }

    /// Project an arbitrary vector onto the orthogonal complement of the
    /// current span.
    pub fn project_out(&self, v: &DVector<C64>) -> DVector<C64> {
        let mut out = v.clone();
        for q in &self.q {
            let coeff = q.dotc(&out);
            out.axpy(-coeff, q, C64::new(1.0, 0.0));
        }
        out
    }
}

/// Solve `H x = b` for Hermitian positive-definite `H` via Cholesky.
///
/// Returns `None` when the factorization fails (matrix not positive
/// definite); callers add their own regularization before retrying.
pub fn solve_hermitian_pd(h: &DMatrix<C64>, b: &DVector<C64>) -> Option<DVector<C64>> {
    let chol = h.clone().cholesky()?;
    Some(chol.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_matrix(rng: &mut ChaCha12Rng, m: usize, n: usize) -> DMatrix<C64> {
        DMatrix::from_fn(m, n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn pseudo_inverse_of_identity_like() {
        let a = DMatrix::<C64>::identity(4, 4);
        let p = pseudo_inverse(&a);
        assert_eq!(p.rank, 4);
        assert!(p.full_column_rank);
        assert!((&p.matrix - DMatrix::<C64>::identity(4, 4)).norm() < 1e-12);
        assert!((p.sigma_max - 1.0).abs() < 1e-12);
        assert!((p.sigma_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pseudo_inverse_satisfies_penrose_conditions() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for &(m, n) in &[(6usize, 4usize), (4, 6), (5, 5)] {
            let a = random_matrix(&mut rng, m, n);
            let p = pseudo_inverse(&a).matrix;
            let apa = &a * &p * &a;
            let pap = &p * &a * &p;
            assert!((&apa - &a).norm() < 1e-9 * a.norm(), "A P A = A");
            assert!((&pap - &p).norm() < 1e-9 * p.norm(), "P A P = P");
            let ap = &a * &p;
            let pa = &p * &a;
            assert!((&ap - ap.adjoint()).norm() < 1e-9, "A P Hermitian");
            assert!((&pa - pa.adjoint()).norm() < 1e-9, "P A Hermitian");
        }
    }

    #[test]
    fn pseudo_inverse_detects_rank_deficiency() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let a = random_matrix(&mut rng, 6, 3);
        // Duplicate a column: rank 3 -> matrix with 4 columns, rank 3.
        let mut cols: Vec<DVector<C64>> = a.column_iter().map(|c| c.into_owned()).collect();
        cols.push(cols[0].clone());
        let b = DMatrix::from_columns(&cols.iter().map(|c| c.column(0)).collect::<Vec<_>>());
        let p = pseudo_inverse(&b);
        assert_eq!(p.rank, 3);
        assert!(!p.full_column_rank);
    }

    #[test]
    fn pseudo_inverse_of_zero_matrix() {
        let a = DMatrix::<C64>::zeros(3, 2);
        let p = pseudo_inverse(&a);
        assert_eq!(p.rank, 0);
        assert_eq!(p.sigma_max, 0.0);
        assert!(p.matrix.norm() == 0.0);
    }

    #[test]
    fn spectral_norm_matches_known_eigenvalues() {
        // diag(3, -5, 2) has spectral norm 5.
        let mut h = DMatrix::<C64>::zeros(3, 3);
        h[(0, 0)] = C64::new(3.0, 0.0);
        h[(1, 1)] = C64::new(-5.0, 0.0);
        h[(2, 2)] = C64::new(2.0, 0.0);
        assert!((hermitian_spectral_norm(&h) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_agrees_with_svd_for_hermitian_input() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let a = random_matrix(&mut rng, 5, 5);
        let h = &a * a.adjoint(); // Hermitian PSD
        let via_eigen = hermitian_spectral_norm(&h);
        let svd = h.clone().svd(false, false);
        let via_svd = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        assert!((via_eigen - via_svd).abs() < 1e-9 * via_svd.max(1.0));
    }

    #[test]
    fn ortho_basis_matches_pseudo_inverse_projection() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let m = 8;
        let a = random_matrix(&mut rng, m, 6);
        let z = random_matrix(&mut rng, m, 1).column(0).into_owned();
        let mut basis = OrthoBasis::new(&z);
        let mut cols: Vec<usize> = Vec::new();
        for (step, j) in [2usize, 5, 0, 2, 3].iter().enumerate() {
            let accepted = basis.insert(&a.column(*j).into_owned());
            if step == 3 {
                // Column 2 is re-inserted; it is already in the span.
                assert!(!accepted);
            } else {
                assert!(accepted);
                cols.push(*j);
            }
            // Oracle: full least squares on the accumulated columns.
            let sub = DMatrix::from_columns(
                &cols.iter().map(|&c| a.column(c)).collect::<Vec<_>>(),
            );
            let pinv = pseudo_inverse(&sub);
            let resid = &z - &sub * (&pinv.matrix * &z);
            assert!(
                (basis.residual_norm() - resid.norm()).abs() < 1e-10 * z.norm().max(1.0),
                "incremental residual must match full re-factorization"
            );
        }
        assert_eq!(basis.rank(), 4);
    }

    #[test]
    fn ortho_basis_zero_rhs_keeps_zero_residual() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let a = random_matrix(&mut rng, 5, 3);
        let z = DVector::<C64>::zeros(5);
        let mut basis = OrthoBasis::new(&z);
        assert_eq!(basis.residual_norm(), 0.0);
        basis.insert(&a.column(0).into_owned());
        assert!(basis.residual_norm() <= 1e-15);
    }

    #[test]
    fn cholesky_solve_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(16);
        let a = random_matrix(&mut rng, 5, 5);
        let h = &a * a.adjoint() + DMatrix::<C64>::identity(5, 5);
        let x_true = random_matrix(&mut rng, 5, 1).column(0).into_owned();
        let b = &h * &x_true;
        let x = solve_hermitian_pd(&h, &b).expect("PD system");
        assert!((x - x_true).norm() < 1e-9);
    }
}
