//! Fused train+validate programs: instead of sweeping a grid of ridge
//! parameters and validating each fit, the validation loss is minimized
//! directly over the relaxation polytope of the training KKT system, so one
//! convex solve replaces the two-step scheme. Squared loss yields a QP,
//! absolute loss an LP via the usual residual split. K-fold programs relax
//! each fold's KKT conditions independently and average the fold models.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::mat::{self, Mat};
use crate::qpcore::{self, ConvexProgram, SolverOptions, SolverStatus};
use crate::relaxation::{RecoveredRegularizer, RelaxationError, RelaxationPolytope};
use crate::spectral::{self, RidgeProblem, SpectralError, SymPsdMatrix};

/// Adjacent eigenvalues closer than this (relative to σ′₁) are treated as
/// tied: their pair constraints collapse to an equality, which would leave
/// the polytope without a strict interior, so tied coordinates share one
/// decision variable.
const TIE_TOL: f64 = 1e-10;
/// The fused solves run tighter than the solver default so the relaxation
/// dominance property survives with margin.
const FUSED_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum FusedError {
    /// The interior-point solve did not certify optimality.
    SolverFailure {
        fold: Option<usize>,
        status: SolverStatus,
    },
    /// Fold counts must satisfy `2 ≤ k ≤ n`.
    BadFoldCount { k: usize, n: usize },
    DimensionMismatch { what: &'static str },
    /// Datasets must contain finite values only.
    NonFinite,
    Spectral(SpectralError),
    Qp(qpcore::QpError),
    Relaxation(RelaxationError),
}

impl fmt::Display for FusedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusedError::SolverFailure { fold, status } => match fold {
                Some(k) => write!(f, "fold {k}: solver returned {status:?}"),
                None => write!(f, "solver returned {status:?}"),
            },
            FusedError::BadFoldCount { k, n } => {
                write!(f, "fold count {k} invalid for {n} observations (need 2 ≤ k ≤ n)")
            }
            FusedError::DimensionMismatch { what } => write!(f, "dimension mismatch: {what}"),
            FusedError::NonFinite => write!(f, "dataset contains non-finite values"),
            FusedError::Spectral(e) => write!(f, "{e}"),
            FusedError::Qp(e) => write!(f, "{e}"),
            FusedError::Relaxation(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FusedError {}

impl From<SpectralError> for FusedError {
    fn from(e: SpectralError) -> Self {
        FusedError::Spectral(e)
    }
}

impl From<qpcore::QpError> for FusedError {
    fn from(e: qpcore::QpError) -> Self {
        FusedError::Qp(e)
    }
}

impl From<RelaxationError> for FusedError {
    fn from(e: RelaxationError) -> Self {
        FusedError::Relaxation(e)
    }
}

/// Design matrix plus response vector.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Mat,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Mat, y: Vec<f64>) -> Result<Self, FusedError> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(FusedError::DimensionMismatch { what: "empty design matrix" });
        }
        if x.rows() != y.len() {
            return Err(FusedError::DimensionMismatch { what: "rows of X vs length of y" });
        }
        if x.data().iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(FusedError::NonFinite);
        }
        Ok(Dataset { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Mat {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Row subset, in the given index order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let x = Mat::from_fn(idx.len(), self.p(), |i, j| self.x[(idx[i], j)]);
        let y = idx.iter().map(|&i| self.y[i]).collect();
        Dataset { x, y }
    }
}

/// Assignment of observations to validation folds `1..=k`; folds are
/// disjoint, cover every index, and differ in size by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn new(k: usize, assignment: Vec<usize>) -> Result<Self, FusedError> {
        let n = assignment.len();
        if k < 2 || k > n {
            return Err(FusedError::BadFoldCount { k, n });
        }
        let mut counts = vec![0usize; k];
        for &id in &assignment {
            if id < 1 || id > k {
                return Err(FusedError::DimensionMismatch { what: "fold id out of range" });
            }
            counts[id - 1] += 1;
        }
        let (min, max) = counts
            .iter()
            .fold((usize::MAX, 0), |(lo, hi), &c| (lo.min(c), hi.max(c)));
        if min == 0 {
            return Err(FusedError::BadFoldCount { k, n });
        }
        if max - min > 1 {
            return Err(FusedError::DimensionMismatch { what: "fold sizes differ by more than 1" });
        }
        Ok(FoldPlan { k, assignment })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn val_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic fold assignment: seeded Fisher–Yates shuffle, then
/// round-robin over the shuffled order.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan, FusedError> {
    if k < 2 || k > n {
        return Err(FusedError::BadFoldCount { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut state = seed;
    for i in (1..n).rev() {
        let j = (splitmix64(&mut state) % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    let mut assignment = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        assignment[idx] = pos % k + 1;
    }
    FoldPlan::new(k, assignment)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Squared,
    Absolute,
}

/// Minimal regularization parameter: a fixed positive value, or a
/// spectrum-relative floor (`1e-6 · σ₁`) standing in for γ₀ → 0⁺.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma0 {
    Auto,
    Value(f64),
}

impl Gamma0 {
    fn resolve(self, sigma1: f64) -> f64 {
        match self {
            Gamma0::Auto => {
                if sigma1 > 0.0 {
                    1e-6 * sigma1
                } else {
                    1e-12
                }
            }
            Gamma0::Value(v) => v,
        }
    }
}

/// One fold's fused solve.
#[derive(Debug, Clone)]
pub struct FoldFit {
    pub lambda: Vec<f64>,
    pub beta: Vec<f64>,
    pub recovered: RecoveredRegularizer,
    /// Validation loss recomputed from `beta` on the fold's held-out data.
    pub val_loss: f64,
    pub solver_iterations: usize,
    pub kkt_residual: f64,
}

/// Result of a fused train+validate solve.
#[derive(Debug, Clone)]
pub struct FusedFit {
    pub per_fold: Vec<FoldFit>,
    /// `(1/K) Σₖ βₖ` — the final model.
    pub beta_avg: Vec<f64>,
    /// Weighted CV objective: `Σₖ val_lossₖ / (n − n₍ₖ₎)` for K-fold, the
    /// plain validation loss for a single split.
    pub cv_objective: f64,
    pub loss: LossKind,
    /// Median of the per-fold effective regularizers (diagnostic; use
    /// [`refit`] at this value for a single-parameter final model).
    pub gamma_pool: f64,
}

/// Validation loss `Σⱼ ℓ(yⱼ − xⱼᵀβ)`; shared definition for the fused
/// programs and the reference tuners.
pub fn validation_loss(val: &Dataset, beta: &[f64], loss: LossKind) -> f64 {
    let pred = val.x().matvec(beta);
    val.y()
        .iter()
        .zip(&pred)
        .map(|(y, f)| {
            let r = y - f;
            match loss {
                LossKind::Squared => r * r,
                LossKind::Absolute => r.abs(),
            }
        })
        .sum()
}

/// Training KKT system as a ridge problem: `M = XᵀX`, right side `Xᵀy`,
/// with the caller's choice of γ₀.
pub fn build_kkt_matrix(train: &Dataset, gamma0: Gamma0) -> Result<RidgeProblem, FusedError> {
    let m = SymPsdMatrix::from_gram(train.x());
    let spectrum = spectral::eigh(&m)?;
    let g0 = gamma0.resolve(spectrum.eigenvalues()[0]);
    let xty = train.x().tr_matvec(train.y());
    Ok(RidgeProblem::from_parts(m, spectrum, xty, g0)?)
}

/// Groups adjacent (tied) eigenvalues; returns for each original index its
/// block id, plus the block count.
fn tie_blocks(sigma_prime: &[f64]) -> (Vec<usize>, usize) {
    let n = sigma_prime.len();
    let tol = TIE_TOL * sigma_prime[0];
    let mut block = vec![0usize; n];
    let mut current = 0;
    for i in 1..n {
        if sigma_prime[i - 1] - sigma_prime[i] > tol {
            current += 1;
        }
        block[i] = current;
    }
    (block, current + 1)
}

struct FusedProgram {
    prog: ConvexProgram,
    block: Vec<usize>,
    n_blocks: usize,
}

/// Assembles the fused program in the reduced variable `μ ∈ ℝᴮ` (one per
/// tie block; `β` is eliminated through the polytope equalities).
fn assemble(
    poly: &RelaxationPolytope,
    rp: &RidgeProblem,
    val: &Dataset,
    loss: LossKind,
) -> Result<FusedProgram, FusedError> {
    let n = poly.n();
    let n_v = val.n();
    let (block, n_blocks) = tie_blocks(poly.sigma_prime());

    // G = X_val · U · diag(Uᵀ(Xᵀy_train)): predictions are G λ
    let xu = val.x().matmul(rp.spectrum().basis());
    let uty = poly.uty();
    // reduced to blocks: tied coordinates share one variable
    let mut g_red = Mat::zeros(n_v, n_blocks);
    for r in 0..n_v {
        for i in 0..n {
            g_red[(r, block[i])] += xu[(r, i)] * uty[i];
        }
    }

    // polytope constraints in block variables
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut upper = vec![f64::INFINITY; n_blocks];
    for i in 0..n {
        let b = block[i];
        upper[b] = upper[b].min(poly.upper()[i]);
    }
    let n_total = match loss {
        LossKind::Squared => n_blocks,
        LossKind::Absolute => n_blocks + 2 * n_v,
    };
    let push = |coeffs: &[(usize, f64)], b: f64, rows: &mut Vec<Vec<f64>>, rhs: &mut Vec<f64>| {
        let mut row = vec![0.0; n_total];
        for &(j, v) in coeffs {
            row[j] = v;
        }
        rows.push(row);
        rhs.push(b);
    };
    for b in 0..n_blocks {
        push(&[(b, -1.0)], -poly.eps_lambda(), &mut rows, &mut rhs);
        push(&[(b, 1.0)], upper[b], &mut rows, &mut rhs);
    }
    for i in 0..n.saturating_sub(1) {
        if block[i] == block[i + 1] {
            continue;
        }
        let (lo, hi) = (block[i], block[i + 1]);
        let ratio = poly.sigma_prime()[i + 1] / poly.sigma_prime()[i];
        // μ_lo ≤ μ_hi and ratio·μ_hi ≤ μ_lo
        push(&[(lo, 1.0), (hi, -1.0)], 0.0, &mut rows, &mut rhs);
        push(&[(lo, -1.0), (hi, ratio)], 0.0, &mut rows, &mut rhs);
    }

    let prog = match loss {
        LossKind::Squared => {
            // ‖y_v − Gμ‖² up to a constant: Q = 2GᵀG, c = −2Gᵀy_v
            let gtg = g_red.gram();
            let q = Mat::from_fn(n_blocks, n_blocks, |i, j| 2.0 * gtg[(i, j)]);
            let c = mat::scaled(&g_red.tr_matvec(val.y()), -2.0);
            ConvexProgram::new(q, c, Mat::zeros(0, n_blocks), vec![], Mat::from_rows(&rows), rhs)?
        }
        LossKind::Absolute => {
            // residual split r = u − v, u,v ≥ 0, minimize Σ(u+v)
            let mut c = vec![0.0; n_total];
            for item in c.iter_mut().skip(n_blocks) {
                *item = 1.0;
            }
            let a_eq = Mat::from_fn(n_v, n_total, |r, j| {
                if j < n_blocks {
                    g_red[(r, j)]
                } else if j < n_blocks + n_v {
                    if j - n_blocks == r {
                        1.0
                    } else {
                        0.0
                    }
                } else if j - n_blocks - n_v == r {
                    -1.0
                } else {
                    0.0
                }
            });
            for j in 0..2 * n_v {
                push(&[(n_blocks + j, -1.0)], 0.0, &mut rows, &mut rhs);
            }
            ConvexProgram::lp(c, a_eq, val.y().to_vec(), Mat::from_rows(&rows), rhs)?
        }
    };
    Ok(FusedProgram { prog, block, n_blocks })
}

fn solve_fold(
    train: &Dataset,
    val: &Dataset,
    gamma0: Gamma0,
    loss: LossKind,
) -> Result<FoldFit, FusedError> {
    if train.p() != val.p() {
        return Err(FusedError::DimensionMismatch { what: "train and validation feature counts" });
    }
    let rp = build_kkt_matrix(train, gamma0)?;
    let poly = RelaxationPolytope::build(&rp);
    let fp = assemble(&poly, &rp, val, loss)?;

    let opts = SolverOptions { tol_kkt: FUSED_TOL, ..Default::default() };
    let result = qpcore::solve_with(&fp.prog, &opts);
    if result.status != SolverStatus::Optimal {
        return Err(FusedError::SolverFailure { fold: None, status: result.status });
    }

    let lambda: Vec<f64> = fp.block.iter().map(|&b| result.x[b]).collect();
    let _ = fp.n_blocks;
    let beta = poly.beta_from_lambda(&lambda, rp.y())?;
    let recovered = poly.recover_gamma(&lambda)?;
    let val_loss = validation_loss(val, &beta, loss);
    Ok(FoldFit {
        lambda,
        beta,
        recovered,
        val_loss,
        solver_iterations: result.iterations,
        kkt_residual: result.kkt_residual,
    })
}

/// Fused solve on an explicit train/validation split (the K = 1 program).
pub fn fit_single_split(
    train: &Dataset,
    val: &Dataset,
    gamma0: Gamma0,
    loss: LossKind,
) -> Result<FusedFit, FusedError> {
    let fold = solve_fold(train, val, gamma0, loss)?;
    Ok(FusedFit {
        beta_avg: fold.beta.clone(),
        cv_objective: fold.val_loss,
        gamma_pool: fold.recovered.gamma_hat,
        per_fold: vec![fold],
        loss,
    })
}

/// Fused K-fold program. The objective separates over folds (each fold has
/// its own `Λᵏ`), so per-fold solves are exact for the joint program; the
/// final model averages the fold coefficients.
pub fn fit_kfold(
    data: &Dataset,
    plan: &FoldPlan,
    gamma0: Gamma0,
    loss: LossKind,
) -> Result<FusedFit, FusedError> {
    if plan.len() != data.n() {
        return Err(FusedError::DimensionMismatch { what: "fold plan length vs dataset rows" });
    }
    let n = data.n();
    let mut per_fold = Vec::with_capacity(plan.k());
    let mut beta_avg = vec![0.0; data.p()];
    let mut cv_objective = 0.0;
    for fold in 1..=plan.k() {
        let train_idx = plan.train_indices(fold);
        let val_idx = plan.val_indices(fold);
        let train = data.subset(&train_idx);
        let val = data.subset(&val_idx);
        let fit = solve_fold(&train, &val, gamma0, loss).map_err(|e| match e {
            FusedError::SolverFailure { status, .. } => {
                FusedError::SolverFailure { fold: Some(fold), status }
            }
            other => other,
        })?;
        // Eq-22 weight: 1/(n − n₍ₖ₎) = 1/|validation fold|
        cv_objective += fit.val_loss / (n - train_idx.len()) as f64;
        mat::axpy(1.0 / plan.k() as f64, &fit.beta, &mut beta_avg);
        per_fold.push(fit);
    }
    let mut gammas: Vec<f64> = per_fold.iter().map(|f| f.recovered.gamma_hat).collect();
    gammas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let gamma_pool = if gammas.len() % 2 == 1 {
        gammas[gammas.len() / 2]
    } else {
        0.5 * (gammas[gammas.len() / 2 - 1] + gammas[gammas.len() / 2])
    };
    Ok(FusedFit { per_fold, beta_avg, cv_objective, loss, gamma_pool })
}

/// Plain Tikhonov refit of the whole dataset at a fixed γ — the non-default
/// alternative to `beta_avg` (e.g. at [`FusedFit::gamma_pool`]).
pub fn refit(data: &Dataset, gamma: f64) -> Result<Vec<f64>, FusedError> {
    let rp = build_kkt_matrix(data, Gamma0::Value(gamma.min(1.0).max(1e-300)))?;
    Ok(rp.solve_tikhonov(gamma)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn dataset(rows: &[Vec<f64>], y: &[f64]) -> Dataset {
        Dataset::new(Mat::from_rows(rows), y.to_vec()).unwrap()
    }

    #[test]
    fn kkt_matrix_identity_design() {
        let d = dataset(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]);
        let rp = build_kkt_matrix(&d, Gamma0::Value(0.5)).unwrap();
        assert_eq!(rp.matrix().entries(), &Mat::identity(2));
        assert_eq!(rp.y(), &[1.0, 1.0]);
        assert_eq!(rp.gamma0(), 0.5);
    }

    #[test]
    fn kkt_matrix_diagonal_design() {
        let d = dataset(&[vec![1.0, 0.0], vec![0.0, 2.0]], &[1.0, 1.0]);
        let rp = build_kkt_matrix(&d, Gamma0::Value(0.5)).unwrap();
        assert_eq!(rp.matrix().entries()[(0, 0)], 1.0);
        assert_eq!(rp.matrix().entries()[(1, 1)], 4.0);
        assert_eq!(rp.y(), &[1.0, 2.0]);
    }

    #[test]
    fn kkt_matrix_matches_triple_loop_oracle() {
        let x = Mat::from_rows(&[
            vec![0.3, -1.2, 0.7],
            vec![1.1, 0.4, -0.2],
            vec![-0.5, 0.9, 1.3],
            vec![0.8, -0.1, 0.6],
        ]);
        let d = Dataset::new(x.clone(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let rp = build_kkt_matrix(&d, Gamma0::Value(1.0)).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let mut s = 0.0;
                for r in 0..4 {
                    s += x[(r, a)] * x[(r, b)];
                }
                assert!((rp.matrix().entries()[(a, b)] - s).abs() < 1e-12);
            }
        }
        assert!(rp.matrix().entries().is_symmetric());
    }

    #[test]
    fn make_folds_even_split() {
        let plan = make_folds(6, 3, 7).unwrap();
        for fold in 1..=3 {
            assert_eq!(plan.val_indices(fold).len(), 2);
            assert_eq!(plan.train_indices(fold).len(), 4);
        }
    }

    #[test]
    fn make_folds_remainder_distribution() {
        let plan = make_folds(7, 3, 7).unwrap();
        let mut sizes: Vec<usize> = (1..=3).map(|f| plan.val_indices(f).len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 3]);
    }

    #[test]
    fn make_folds_is_deterministic() {
        assert_eq!(make_folds(20, 4, 99).unwrap(), make_folds(20, 4, 99).unwrap());
        assert_ne!(
            make_folds(20, 4, 99).unwrap().assignment(),
            make_folds(20, 4, 100).unwrap().assignment()
        );
    }

    #[test]
    fn make_folds_rejects_bad_counts() {
        assert!(matches!(make_folds(5, 1, 0), Err(FusedError::BadFoldCount { .. })));
        assert!(matches!(make_folds(3, 4, 0), Err(FusedError::BadFoldCount { .. })));
    }

    /// Tied spectrum forces λ₁ = λ₂; the optimum matches a one-dimensional
    /// brute-force scan over λ ∈ (0, 1].
    #[test]
    fn single_split_tied_spectrum() {
        let train = dataset(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]);
        let val = dataset(&[vec![1.0, 0.0]], &[0.4]);

        // brute-force oracle over the single free coordinate
        let mut best = (f64::INFINITY, 0.0);
        for k in 1..=10_000 {
            let l = k as f64 / 10_000.0;
            let loss = (0.4 - l) * (0.4 - l);
            if loss < best.0 {
                best = (loss, l);
            }
        }
        assert!((best.1 - 0.4).abs() < 1e-3);

        let fit = fit_single_split(&train, &val, Gamma0::Auto, LossKind::Squared).unwrap();
        let fold = &fit.per_fold[0];
        assert!((fold.lambda[0] - 0.4).abs() < 1e-6);
        assert!((fold.lambda[1] - 0.4).abs() < 1e-6);
        assert!((fold.beta[0] - 0.4).abs() < 1e-6);
        assert!((fold.beta[1] - 0.4).abs() < 1e-6);
        assert!((fold.recovered.gamma_hat - 1.5).abs() < 1e-4);
        assert!(fit.cv_objective < 1e-10);
    }

    /// A validation set generated by an on-path model is matched exactly.
    #[test]
    fn single_split_recovers_path_point() {
        let train = dataset(
            &[vec![1.0, 0.2], vec![0.3, 2.0], vec![-0.5, 0.7]],
            &[1.0, -1.0, 0.5],
        );
        let rp = build_kkt_matrix(&train, Gamma0::Value(0.01)).unwrap();
        let beta_star = rp.solve_tikhonov(0.8).unwrap();
        let val_x = Mat::from_rows(&[vec![1.0, 1.0], vec![0.5, -0.5]]);
        let val_y = val_x.matvec(&beta_star);
        let val = Dataset::new(val_x, val_y).unwrap();

        let fit = fit_single_split(&train, &val, Gamma0::Value(0.01), LossKind::Squared).unwrap();
        assert!(fit.cv_objective < 1e-9, "val loss {}", fit.cv_objective);
    }

    /// With a zero-residual optimum both losses share the argmin.
    #[test]
    fn absolute_loss_agrees_at_zero_residual() {
        let train = dataset(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]);
        let val = dataset(&[vec![1.0, 0.0]], &[0.4]);
        let fit = fit_single_split(&train, &val, Gamma0::Auto, LossKind::Absolute).unwrap();
        let fold = &fit.per_fold[0];
        assert!((fold.lambda[0] - 0.4).abs() < 1e-6);
        assert!(fit.cv_objective < 1e-8);
    }

    /// The LP residual split must reproduce Σ|rⱼ| exactly.
    #[test]
    fn absolute_loss_reformulation_consistent() {
        let train = dataset(
            &[vec![1.0, 0.2], vec![0.3, 2.0], vec![-0.5, 0.7], vec![0.9, -0.3]],
            &[1.0, -1.0, 0.5, 0.2],
        );
        let val = dataset(&[vec![0.6, 0.8], vec![-0.2, 0.4]], &[0.7, -0.1]);
        let fit = fit_single_split(&train, &val, Gamma0::Auto, LossKind::Absolute).unwrap();
        let fold = &fit.per_fold[0];
        let direct = validation_loss(&val, &fold.beta, LossKind::Absolute);
        assert!((fold.val_loss - direct).abs() < 1e-8);
    }

    /// Each fold of the K-fold program equals the single-split program on
    /// that fold's train/validation pair.
    #[test]
    fn kfold_fold_matches_single_split() {
        let data = dataset(
            &[
                vec![1.0, 0.3],
                vec![0.2, 1.5],
                vec![-0.7, 0.8],
                vec![1.2, -0.4],
                vec![0.5, 0.9],
                vec![-0.3, 1.1],
            ],
            &[1.0, 0.5, -0.2, 0.8, 1.2, 0.1],
        );
        let plan = make_folds(6, 2, 3).unwrap();
        let fit = fit_kfold(&data, &plan, Gamma0::Auto, LossKind::Squared).unwrap();

        let train = data.subset(&plan.train_indices(1));
        let val = data.subset(&plan.val_indices(1));
        let single = fit_single_split(&train, &val, Gamma0::Auto, LossKind::Squared).unwrap();
        let a = &fit.per_fold[0];
        let b = &single.per_fold[0];
        for (x, y) in a.beta.iter().zip(&b.beta) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!((a.val_loss - b.val_loss).abs() < 1e-10);
    }

    #[test]
    fn kfold_three_folds_arithmetic() {
        let data = dataset(
            &[
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 1.0],
                vec![0.5, -0.5],
                vec![-1.0, 0.3],
                vec![0.2, 0.9],
            ],
            &[0.3, 0.9, 1.1, 0.0, -0.4, 0.8],
        );
        let plan = make_folds(6, 3, 11).unwrap();
        let fit = fit_kfold(&data, &plan, Gamma0::Auto, LossKind::Squared).unwrap();
        assert_eq!(fit.per_fold.len(), 3);
        // weighted objective recomputes from the folds
        let recomputed: f64 = (1..=3)
            .map(|f| fit.per_fold[f - 1].val_loss / plan.val_indices(f).len() as f64)
            .sum();
        assert!((fit.cv_objective - recomputed).abs() < 1e-12);
        // beta_avg is the fold mean
        for j in 0..2 {
            let mean: f64 = fit.per_fold.iter().map(|f| f.beta[j]).sum::<f64>() / 3.0;
            assert!((fit.beta_avg[j] - mean).abs() < 1e-12);
        }
    }

    /// Noiseless well-conditioned data: the averaged model recovers the
    /// generating coefficients.
    #[test]
    fn kfold_recovers_noiseless_model() {
        let w = [1.0, -2.0];
        let rows: Vec<Vec<f64>> = vec![
            vec![1.0, 0.1],
            vec![0.2, 1.3],
            vec![-0.8, 0.5],
            vec![1.1, -0.6],
            vec![0.4, 0.9],
            vec![-0.2, -1.0],
            vec![0.7, 0.3],
            vec![-1.2, 0.8],
        ];
        let y: Vec<f64> = rows.iter().map(|r| r[0] * w[0] + r[1] * w[1]).collect();
        let data = dataset(&rows, &y);
        let plan = make_folds(8, 4, 5).unwrap();
        let fit = fit_kfold(&data, &plan, Gamma0::Auto, LossKind::Squared).unwrap();
        assert!((fit.beta_avg[0] - w[0]).abs() < 1e-3);
        assert!((fit.beta_avg[1] - w[1]).abs() < 1e-3);
    }

    #[test]
    fn output_lambdas_stay_feasible() {
        let data = dataset(
            &[
                vec![1.3, 0.2, -0.4],
                vec![0.1, 0.8, 0.9],
                vec![-0.6, 1.4, 0.3],
                vec![0.9, -0.2, 1.1],
                vec![0.4, 0.6, -0.8],
                vec![-1.0, 0.5, 0.2],
            ],
            &[0.5, 1.0, -0.3, 0.8, 0.1, -0.6],
        );
        let plan = make_folds(6, 3, 21).unwrap();
        let fit = fit_kfold(&data, &plan, Gamma0::Auto, LossKind::Squared).unwrap();
        for (fold, f) in fit.per_fold.iter().enumerate() {
            let train = data.subset(&plan.train_indices(fold + 1));
            let rp = build_kkt_matrix(&train, Gamma0::Auto).unwrap();
            let poly = RelaxationPolytope::build(&rp);
            assert!(poly.contains(&f.lambda).unwrap().inside);
        }
    }

    #[test]
    fn dataset_rejects_non_finite() {
        let err = Dataset::new(Mat::from_rows(&[vec![1.0, f64::NAN]]), vec![1.0]).unwrap_err();
        assert_eq!(err, FusedError::NonFinite);
    }
}
