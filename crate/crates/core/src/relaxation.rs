//! The convex relaxation of the ridge solution path.
//!
//! Reparameterizing the path through `λᵢ = 1/(σᵢ + γ)` turns the nonconvex
//! set of Tikhonov solutions into a polytope described by box bounds and
//! adjacent-pair ordering constraints on `Λ`, plus linear equalities tying
//! `β` to `Λ`. This module builds that polytope, tests membership, recovers
//! `β` and effective regularizers from a relaxed point, and evaluates the
//! worst-case distance bound between a relaxed solution and the exact path.

use alloc::vec::Vec;
use core::fmt;

use crate::mat::{self, Mat};
use crate::spectral::RidgeProblem;

/// Relative floor that stands in for the strict inequality `0 < λᵢ`;
/// interior-point solvers need a closed feasible set.
const LAMBDA_FLOOR: f64 = 1e-12;
/// Absolute slack for membership verdicts.
const MEMBERSHIP_TOL: f64 = 1e-10;
/// Hard cap on the bracket when searching for an effective regularizer.
const GAMMA_SEARCH_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum RelaxationError {
    DimensionMismatch { expected: usize, got: usize },
    /// `recover_gamma` needs a point inside the polytope.
    InfeasibleLambda { violation: f64 },
}

impl fmt::Display for RelaxationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelaxationError::DimensionMismatch { expected, got } => {
                write!(f, "lambda has length {got}, polytope dimension is {expected}")
            }
            RelaxationError::InfeasibleLambda { violation } => {
                write!(f, "lambda violates the polytope by {violation:e}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RelaxationError {}

/// Identifies one linear constraint of the polytope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintId {
    /// `λᵢ ≥ ε_λ` (index `i`).
    LowerFloor(usize),
    /// `λᵢ ≤ 1/σ′ᵢ`.
    UpperBound(usize),
    /// `(σ′ᵢ₊₁/σ′ᵢ) λᵢ₊₁ ≤ λᵢ` for the pair starting at `i`.
    PairLower(usize),
    /// `λᵢ ≤ λᵢ₊₁` for the pair starting at `i`.
    PairUpper(usize),
}

/// Membership verdict with the most-violated constraint. `amount` is the
/// signed violation: positive means the constraint is broken by that much.
#[derive(Debug, Clone, Copy)]
pub struct Membership {
    pub inside: bool,
    pub worst_constraint: ConstraintId,
    pub worst_violation: f64,
}

/// Effective regularizers recovered from a relaxed point `Λ`.
#[derive(Debug, Clone)]
pub struct RecoveredRegularizer {
    /// Scalar γ whose path point best Chebyshev-approximates `Λ`.
    pub gamma_hat: f64,
    /// Per-coordinate penalties `γᵢ = 1/λᵢ − σᵢ` (the diagonal penalty for
    /// which `Λ` is exactly optimal).
    pub gamma_diag: Vec<f64>,
    /// `max_i |λᵢ − 1/(σᵢ + γ̂)|`.
    pub approximation_gap: f64,
}

/// The linear constraint system over `Λ` for a fixed `(M, y, γ₀)`.
#[derive(Debug, Clone)]
pub struct RelaxationPolytope {
    sigma_prime: Vec<f64>,
    uty: Vec<f64>,
    upper: Vec<f64>,
    eps_lambda: f64,
    basis: Mat,
    gamma0: f64,
}

impl RelaxationPolytope {
    /// Encodes the three constraint families for the problem's spectrum:
    /// equalities `Uᵢᵀβ = λᵢ Uᵢᵀy` (kept implicit through
    /// [`beta_from_lambda`](Self::beta_from_lambda)), box bounds
    /// `ε_λ ≤ λᵢ ≤ 1/σ′ᵢ`, and the adjacent-pair ordering constraints.
    pub fn build(p: &RidgeProblem) -> Self {
        let gamma0 = p.gamma0();
        let sigma_prime: Vec<f64> = p
            .spectrum()
            .eigenvalues()
            .iter()
            .map(|s| s + gamma0)
            .collect();
        let upper: Vec<f64> = sigma_prime.iter().map(|s| 1.0 / s).collect();
        let max_upper = upper.iter().fold(0.0_f64, |m, &u| m.max(u));
        RelaxationPolytope {
            uty: p.spectrum().project(p.y()),
            upper,
            eps_lambda: LAMBDA_FLOOR * max_upper,
            sigma_prime,
            basis: p.spectrum().basis().clone(),
            gamma0,
        }
    }

    pub fn n(&self) -> usize {
        self.sigma_prime.len()
    }

    /// `σ′ᵢ = σᵢ + γ₀`, non-increasing.
    pub fn sigma_prime(&self) -> &[f64] {
        &self.sigma_prime
    }

    /// Upper bounds `1/σ′ᵢ`.
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Floor standing in for the strict inequality `λᵢ > 0`.
    pub fn eps_lambda(&self) -> f64 {
        self.eps_lambda
    }

    /// `Uᵢᵀ y` of the problem the polytope was built from.
    pub fn uty(&self) -> &[f64] {
        &self.uty
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    /// The exact path point `λᵢ(γ) = 1/(σᵢ + γ)`.
    pub fn path_point(&self, gamma: f64) -> Vec<f64> {
        self.sigma_prime
            .iter()
            .map(|sp| 1.0 / (sp - self.gamma0 + gamma))
            .collect()
    }

    fn check_dim(&self, lambda: &[f64]) -> Result<(), RelaxationError> {
        if lambda.len() != self.n() {
            return Err(RelaxationError::DimensionMismatch {
                expected: self.n(),
                got: lambda.len(),
            });
        }
        Ok(())
    }

    /// Tests the box and pair constraints within an absolute slack of 1e-10
    /// and reports the most-violated constraint.
    pub fn contains(&self, lambda: &[f64]) -> Result<Membership, RelaxationError> {
        self.check_dim(lambda)?;
        let mut worst = Membership {
            inside: true,
            worst_constraint: ConstraintId::LowerFloor(0),
            worst_violation: f64::NEG_INFINITY,
        };
        let mut consider = |id: ConstraintId, violation: f64| {
            if violation > worst.worst_violation {
                worst.worst_constraint = id;
                worst.worst_violation = violation;
            }
        };
        for i in 0..self.n() {
            consider(ConstraintId::LowerFloor(i), self.eps_lambda - lambda[i]);
            consider(ConstraintId::UpperBound(i), lambda[i] - self.upper[i]);
        }
        for i in 0..self.n().saturating_sub(1) {
            let ratio = self.sigma_prime[i + 1] / self.sigma_prime[i];
            consider(ConstraintId::PairLower(i), ratio * lambda[i + 1] - lambda[i]);
            consider(ConstraintId::PairUpper(i), lambda[i] - lambda[i + 1]);
        }
        worst.inside = worst.worst_violation <= MEMBERSHIP_TOL;
        Ok(worst)
    }

    /// Solves the equality family for `β`: `Σᵢ λᵢ (Uᵢᵀy) Uᵢ`.
    pub fn beta_from_lambda(&self, lambda: &[f64], y: &[f64]) -> Result<Vec<f64>, RelaxationError> {
        self.check_dim(lambda)?;
        if y.len() != self.basis.rows() {
            return Err(RelaxationError::DimensionMismatch {
                expected: self.basis.rows(),
                got: y.len(),
            });
        }
        let mut coeffs = self.basis.tr_matvec(y);
        for (c, &l) in coeffs.iter_mut().zip(lambda) {
            *c *= l;
        }
        Ok(self.basis.matvec(&coeffs))
    }

    /// Chebyshev error of the path point at `gamma` against `lambda`.
    fn path_gap(&self, lambda: &[f64], gamma: f64) -> f64 {
        lambda
            .iter()
            .zip(&self.sigma_prime)
            .map(|(&l, &sp)| (l - 1.0 / (sp - self.gamma0 + gamma)).abs())
            .fold(0.0, f64::max)
    }

    /// Finds the scalar `γ̂ ∈ [γ₀, γ_max]` whose path point is Chebyshev-closest
    /// to `lambda`, plus the per-coordinate penalties `γᵢ = 1/λᵢ − σᵢ`.
    ///
    /// The gap `γ ↦ max_i |λᵢ − 1/(σᵢ+γ)|` is a max of quasiconvex pieces, so
    /// golden-section search is bracketed by a dense log grid first.
    pub fn recover_gamma(&self, lambda: &[f64]) -> Result<RecoveredRegularizer, RelaxationError> {
        let verdict = self.contains(lambda)?;
        if !verdict.inside {
            return Err(RelaxationError::InfeasibleLambda {
                violation: verdict.worst_violation,
            });
        }

        let min_lambda = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
        let gamma_max = (1.0 / min_lambda).min(GAMMA_SEARCH_CAP).max(self.gamma0);

        // coarse log grid, then refine around the best cell
        const GRID: usize = 512;
        let lo_ln = crate::math::ln(self.gamma0);
        let hi_ln = crate::math::ln(gamma_max);
        let mut best_idx = 0;
        let mut best_gap = f64::INFINITY;
        let grid_gamma = |k: usize| {
            let t = k as f64 / (GRID - 1) as f64;
            crate::math::exp(lo_ln + t * (hi_ln - lo_ln))
        };
        for k in 0..GRID {
            let gap = self.path_gap(lambda, grid_gamma(k));
            if gap < best_gap {
                best_gap = gap;
                best_idx = k;
            }
        }
        let bracket_lo = grid_gamma(best_idx.saturating_sub(1));
        let bracket_hi = grid_gamma((best_idx + 1).min(GRID - 1));
        let (g1, gap1) = self.golden_section(lambda, bracket_lo, bracket_hi);
        // fall back to the full range in case the grid bracketed a local dip
        let (g2, gap2) = self.golden_section(lambda, self.gamma0, gamma_max);
        let (gamma_hat, approximation_gap) = if gap1 <= gap2 { (g1, gap1) } else { (g2, gap2) };

        let gamma_diag = lambda
            .iter()
            .zip(&self.sigma_prime)
            .map(|(&l, &sp)| 1.0 / l - (sp - self.gamma0))
            .collect();

        Ok(RecoveredRegularizer {
            gamma_hat,
            gamma_diag,
            approximation_gap,
        })
    }

    fn golden_section(&self, lambda: &[f64], mut lo: f64, mut hi: f64) -> (f64, f64) {
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        let mut a = hi - INV_PHI * (hi - lo);
        let mut b = lo + INV_PHI * (hi - lo);
        let mut fa = self.path_gap(lambda, a);
        let mut fb = self.path_gap(lambda, b);
        for _ in 0..200 {
            if hi - lo <= 1e-14 * hi.max(1.0) {
                break;
            }
            if fa <= fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - INV_PHI * (hi - lo);
                fa = self.path_gap(lambda, a);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + INV_PHI * (hi - lo);
                fb = self.path_gap(lambda, b);
            }
        }
        let mid = 0.5 * (lo + hi);
        (mid, self.path_gap(lambda, mid))
    }

    /// Proposition-2-style distance bound: `‖y‖₂ · max_{i>j} |1/σ′ᵢ − 1/σ′ⱼ|`.
    /// Zero when `n = 1` or the spectrum is flat.
    pub fn prop2_bound(&self, y: &[f64]) -> f64 {
        let mut max_range = 0.0_f64;
        for i in 0..self.n() {
            for j in 0..i {
                max_range = max_range.max((self.upper[i] - self.upper[j]).abs());
            }
        }
        mat::norm2(y) * max_range
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SymPsdMatrix;
    use alloc::vec;

    fn diag_problem(sigma: &[f64], y: &[f64], gamma0: f64) -> RidgeProblem {
        let n = sigma.len();
        let m = SymPsdMatrix::new(Mat::from_fn(n, n, |i, j| {
            if i == j {
                sigma[i]
            } else {
                0.0
            }
        }))
        .unwrap();
        RidgeProblem::new(m, y.to_vec(), gamma0).unwrap()
    }

    #[test]
    fn build_direct_substitution() {
        // σ = (3, 1), γ₀ = 1 → σ′ = (4, 2), bounds 1/4 and 1/2
        let poly = RelaxationPolytope::build(&diag_problem(&[3.0, 1.0], &[1.0, 1.0], 1.0));
        assert_eq!(poly.sigma_prime(), &[4.0, 2.0]);
        assert_eq!(poly.upper(), &[0.25, 0.5]);
        assert!((poly.eps_lambda() - 1e-12 * 0.5).abs() < 1e-26);
    }

    #[test]
    fn build_at_vanishing_gamma0() {
        // σ = (2, 1) with γ₀ → 0⁺ approaches bounds (1/2, 1)
        let poly = RelaxationPolytope::build(&diag_problem(&[2.0, 1.0], &[1.0, 1.0], 1e-12));
        assert!((poly.upper()[0] - 0.5).abs() < 1e-9);
        assert!((poly.upper()[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equal_eigenvalues_pin_lambdas_together() {
        let poly = RelaxationPolytope::build(&diag_problem(&[1.0, 1.0], &[1.0, 1.0], 1e-12));
        // λ = (a, b) with a ≠ b violates one side of the collapsed pair
        let v = poly.contains(&[0.3, 0.4]).unwrap();
        assert!(!v.inside);
        assert_eq!(v.worst_constraint, ConstraintId::PairLower(0));
        assert!(poly.contains(&[0.4, 0.4]).unwrap().inside);
    }

    #[test]
    fn contains_path_point() {
        let poly = RelaxationPolytope::build(&diag_problem(&[2.0, 1.0], &[1.0, 1.0], 1e-12));
        // γ = 1 path point
        let v = poly.contains(&[1.0 / 3.0, 0.5]).unwrap();
        assert!(v.inside);
    }

    #[test]
    fn contains_flags_upper_bound_violation() {
        let poly = RelaxationPolytope::build(&diag_problem(&[2.0, 1.0], &[1.0, 1.0], 1e-12));
        let v = poly.contains(&[0.6, 0.5]).unwrap();
        assert!(!v.inside);
        assert_eq!(v.worst_constraint, ConstraintId::UpperBound(0));
        assert!((v.worst_violation - 0.1).abs() < 1e-9);
    }

    #[test]
    fn contains_flags_pair_violation() {
        let poly = RelaxationPolytope::build(&diag_problem(&[2.0, 1.0], &[1.0, 1.0], 1e-12));
        // (1/2)·0.5 = 0.25 > 0.2 breaks the pair lower constraint
        let v = poly.contains(&[0.2, 0.5]).unwrap();
        assert!(!v.inside);
        assert_eq!(v.worst_constraint, ConstraintId::PairLower(0));
        assert!((v.worst_violation - 0.05).abs() < 1e-9);
    }

    #[test]
    fn contains_checks_dimensions() {
        let poly = RelaxationPolytope::build(&diag_problem(&[2.0, 1.0], &[1.0, 1.0], 1e-12));
        assert!(matches!(
            poly.contains(&[0.1]),
            Err(RelaxationError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn beta_from_lambda_identity_basis() {
        let poly = RelaxationPolytope::build(&diag_problem(&[2.0, 1.0], &[1.0, 1.0], 1e-12));
        let beta = poly
            .beta_from_lambda(&[1.0 / 3.0, 0.5], &[1.0, 1.0])
            .unwrap();
        assert!((beta[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((beta[1] - 0.5).abs() < 1e-12);
        assert_eq!(
            poly.beta_from_lambda(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn beta_from_path_lambda_matches_tikhonov() {
        // non-diagonal M so the basis is a genuine rotation
        let m = SymPsdMatrix::new(Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]])).unwrap();
        let p = RidgeProblem::new(m, vec![0.7, -1.3], 0.1).unwrap();
        let poly = RelaxationPolytope::build(&p);
        let gamma = 0.9;
        let lambda = poly.path_point(gamma);
        let via_lambda = poly.beta_from_lambda(&lambda, p.y()).unwrap();
        let via_solve = p.solve_tikhonov(gamma).unwrap();
        for (a, b) in via_lambda.iter().zip(&via_solve) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn recover_gamma_on_path_is_exact() {
        let m = SymPsdMatrix::new(Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]])).unwrap();
        let p = RidgeProblem::new(m, vec![1.0, 2.0], 0.25).unwrap();
        let poly = RelaxationPolytope::build(&p);
        let gamma_star = 1.75;
        let rec = poly.recover_gamma(&poly.path_point(gamma_star)).unwrap();
        assert!((rec.gamma_hat - gamma_star).abs() < 1e-6);
        assert!(rec.approximation_gap < 1e-8);
    }

    #[test]
    fn recover_gamma_single_coordinate() {
        let poly = RelaxationPolytope::build(&diag_problem(&[1.0], &[1.0], 1e-9));
        let rec = poly.recover_gamma(&[0.25]).unwrap();
        assert!((rec.gamma_diag[0] - 3.0).abs() < 1e-6);
        assert!((rec.gamma_hat - 3.0).abs() < 1e-6);
    }

    #[test]
    fn recover_gamma_rejects_infeasible() {
        let poly = RelaxationPolytope::build(&diag_problem(&[2.0, 1.0], &[1.0, 1.0], 1e-12));
        assert!(matches!(
            poly.recover_gamma(&[0.9, 0.95]),
            Err(RelaxationError::InfeasibleLambda { .. })
        ));
    }

    #[test]
    fn prop2_bound_examples() {
        // σ′ = (2, 1), ‖y‖ = 1 → 1/2
        let poly = RelaxationPolytope::build(&diag_problem(&[1.0, 0.0], &[1.0, 0.0], 1.0));
        assert!((poly.prop2_bound(&[1.0, 0.0]) - 0.5).abs() < 1e-12);

        // flat spectrum → 0
        let flat = RelaxationPolytope::build(&diag_problem(&[1.0, 1.0], &[3.0, 4.0], 0.5));
        assert_eq!(flat.prop2_bound(&[3.0, 4.0]), 0.0);

        // σ′ = (4, 2, 1) and ‖y‖ = 2 → 2 · (1 − 1/4) = 3/2, enumerated over all pairs
        let three = RelaxationPolytope::build(&diag_problem(
            &[3.0, 1.0, 0.0],
            &[2.0, 0.0, 0.0],
            1.0,
        ));
        assert!((three.prop2_bound(&[2.0, 0.0, 0.0]) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn prop2_bound_single_eigenvalue_is_zero() {
        let poly = RelaxationPolytope::build(&diag_problem(&[2.0], &[1.5], 0.1));
        assert_eq!(poly.prop2_bound(&[1.5]), 0.0);
    }
}
