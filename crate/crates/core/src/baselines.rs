//! Reference tuning methods the fused program is benchmarked against:
//! grid-search K-fold cross-validation, gradient descent on the CV loss,
//! generalized cross-validation, and ordinary least squares.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::fused::{self, Dataset, FoldPlan, LossKind};
use crate::mat::{self, Mat};
use crate::math;
use crate::spectral::{self, Spectrum, SymPsdMatrix};

/// Eigenvalues below this fraction of σ₁ count as zero for OLS inversion.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineError {
    EmptyGrid,
    NonPositiveGamma { gamma: f64 },
    /// `tr(H_γ) ≥ n`: γ too small for p ≥ n, the GCV denominator vanishes.
    DegenerateDenominator { gamma: f64, trace: f64 },
    /// Backtracking could not find a decrease while the gradient was still
    /// significant.
    LineSearchFailure { gamma: f64, gradient: f64 },
    Spectral(spectral::SpectralError),
    Fused(fused::FusedError),
}

impl fmt::Display for BaselineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineError::EmptyGrid => write!(f, "grid of regularization values is empty"),
            BaselineError::NonPositiveGamma { gamma } => {
                write!(f, "regularization value must be positive, got {gamma}")
            }
            BaselineError::DegenerateDenominator { gamma, trace } => {
                write!(f, "GCV denominator degenerate at gamma {gamma:e} (trace {trace})")
            }
            BaselineError::LineSearchFailure { gamma, gradient } => {
                write!(f, "line search stalled at gamma {gamma:e} with gradient {gradient:e}")
            }
            BaselineError::Spectral(e) => write!(f, "{e}"),
            BaselineError::Fused(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for BaselineError {}

impl From<spectral::SpectralError> for BaselineError {
    fn from(e: spectral::SpectralError) -> Self {
        BaselineError::Spectral(e)
    }
}

impl From<fused::FusedError> for BaselineError {
    fn from(e: fused::FusedError) -> Self {
        BaselineError::Fused(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TunedMethod {
    GridCv,
    GradientCv,
    Gcv,
}

/// Outcome of a two-step tuner.
#[derive(Debug, Clone)]
pub struct TuneResult {
    pub gamma_star: f64,
    /// Coefficients refit on all data at `gamma_star`.
    pub beta_star: Vec<f64>,
    /// `(γ, criterion)` pairs actually evaluated.
    pub score_curve: Vec<(f64, f64)>,
    pub method: TunedMethod,
}

/// Default search grid: 60 log-spaced points on `[1e-6 σ₁, 1e3 σ₁]`.
pub fn default_grid(sigma1: f64) -> Vec<f64> {
    let scale = if sigma1 > 0.0 { sigma1 } else { 1.0 };
    log_grid(1e-6 * scale, 1e3 * scale, 60)
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (math::ln(lo), math::ln(hi));
    (0..points)
        .map(|i| math::exp(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect()
}

/// Per-fold training spectrum and held-out data, with the Eq-22 weight
/// `1/(n − n₍ₖ₎)`.
struct FoldSystem {
    spectrum: Spectrum,
    xty: Vec<f64>,
    val: Dataset,
    weight: f64,
}

fn fold_systems(data: &Dataset, plan: &FoldPlan) -> Result<Vec<FoldSystem>, BaselineError> {
    let n = data.n();
    let mut systems = Vec::with_capacity(plan.k());
    for fold in 1..=plan.k() {
        let train = data.subset(&plan.train_indices(fold));
        let val = data.subset(&plan.val_indices(fold));
        let m = SymPsdMatrix::from_gram(train.x());
        let spectrum = spectral::eigh(&m)?;
        let xty = train.x().tr_matvec(train.y());
        let weight = 1.0 / (n - train.n()) as f64;
        systems.push(FoldSystem { spectrum, xty, val, weight });
    }
    Ok(systems)
}

fn ridge_beta(spectrum: &Spectrum, xty: &[f64], gamma: f64) -> Vec<f64> {
    spectrum.apply_filter(xty, |s| 1.0 / (s + gamma))
}

/// Weighted K-fold CV loss at a fixed γ (squared loss).
fn cv_loss(systems: &[FoldSystem], gamma: f64) -> f64 {
    systems
        .iter()
        .map(|sys| {
            let beta = ridge_beta(&sys.spectrum, &sys.xty, gamma);
            sys.weight * fused::validation_loss(&sys.val, &beta, LossKind::Squared)
        })
        .sum()
}

/// d(CV)/dγ from the analytic path derivative `dβ/dγ = −(M+γI)⁻² Xᵀy`.
fn cv_grad(systems: &[FoldSystem], gamma: f64) -> f64 {
    systems
        .iter()
        .map(|sys| {
            let beta = ridge_beta(&sys.spectrum, &sys.xty, gamma);
            let dbeta = sys
                .spectrum
                .apply_filter(&sys.xty, |s| -1.0 / ((s + gamma) * (s + gamma)));
            let pred = sys.val.x().matvec(&beta);
            let dpred = sys.val.x().matvec(&dbeta);
            let fold: f64 = sys
                .val
                .y()
                .iter()
                .zip(pred.iter().zip(&dpred))
                .map(|(y, (f, df))| 2.0 * (f - y) * df)
                .sum();
            sys.weight * fold
        })
        .sum()
}

fn refit_full(data: &Dataset, gamma: f64) -> Result<Vec<f64>, BaselineError> {
    let m = SymPsdMatrix::from_gram(data.x());
    let spectrum = spectral::eigh(&m)?;
    Ok(ridge_beta(&spectrum, &data.x().tr_matvec(data.y()), gamma))
}

fn validate_grid(grid: &[f64]) -> Result<Vec<f64>, BaselineError> {
    if grid.is_empty() {
        return Err(BaselineError::EmptyGrid);
    }
    if let Some(&bad) = grid.iter().find(|&&g| !(g > 0.0)) {
        return Err(BaselineError::NonPositiveGamma { gamma: bad });
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sorted)
}

/// Grid-search K-fold cross-validation; ties break toward larger γ, and the
/// winner is refit on all data.
pub fn grid_cv(data: &Dataset, plan: &FoldPlan, grid: &[f64]) -> Result<TuneResult, BaselineError> {
    let grid = validate_grid(grid)?;
    let systems = fold_systems(data, plan)?;
    let mut curve = Vec::with_capacity(grid.len());
    let mut best = (f64::INFINITY, grid[0]);
    for &gamma in &grid {
        let loss = cv_loss(&systems, gamma);
        curve.push((gamma, loss));
        if loss <= best.0 {
            best = (loss, gamma);
        }
    }
    Ok(TuneResult {
        gamma_star: best.1,
        beta_star: refit_full(data, best.1)?,
        score_curve: curve,
        method: TunedMethod::GridCv,
    })
}

/// Gradient descent on the CV loss in `θ = log γ` with Armijo backtracking
/// (c = 1e-4, halving); stops at `|∇| ≤ 1e-8` or 500 iterations.
pub fn gradient_cv(
    data: &Dataset,
    plan: &FoldPlan,
    gamma_init: f64,
) -> Result<TuneResult, BaselineError> {
    if !(gamma_init > 0.0) {
        return Err(BaselineError::NonPositiveGamma { gamma: gamma_init });
    }
    const ARMIJO_C: f64 = 1e-4;
    const GRAD_TOL: f64 = 1e-8;
    const MAX_ITER: usize = 500;
    const MAX_HALVINGS: usize = 60;

    let systems = fold_systems(data, plan)?;
    let mut theta = math::ln(gamma_init);
    let mut loss = cv_loss(&systems, gamma_init);
    let mut curve = vec![(gamma_init, loss)];
    // warm-started trial step: grow after full acceptance so flat stretches
    // of the curve are crossed in few iterations
    let mut trial = 1.0_f64;

    for _ in 0..MAX_ITER {
        let gamma = math::exp(theta);
        let grad = gamma * cv_grad(&systems, gamma);
        if grad.abs() <= GRAD_TOL {
            break;
        }
        let mut alpha = trial;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand_theta = theta - alpha * grad;
            let cand_loss = cv_loss(&systems, math::exp(cand_theta));
            if cand_loss <= loss - ARMIJO_C * alpha * grad * grad {
                accepted = Some((cand_theta, cand_loss));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((t, l)) => {
                theta = t;
                loss = l;
                curve.push((math::exp(theta), loss));
                trial = if alpha >= trial { (trial * 2.0).min(1e4) } else { alpha * 2.0 };
            }
            None => {
                // numerically flat around a minimizer: accept; a large
                // gradient that still cannot decrease is a genuine failure
                if grad.abs() <= 1e-6 * (1.0 + loss.abs()) {
                    break;
                }
                return Err(BaselineError::LineSearchFailure { gamma, gradient: grad });
            }
        }
    }

    let gamma_star = math::exp(theta);
    Ok(TuneResult {
        gamma_star,
        beta_star: refit_full(data, gamma_star)?,
        score_curve: curve,
        method: TunedMethod::GradientCv,
    })
}

/// Generalized cross-validation over a grid:
/// `GCV(γ) = (RSS/n) / (1 − tr(H_γ)/n)²` with the hat-matrix trace computed
/// from the spectrum, `tr(H_γ) = Σ σᵢ/(σᵢ+γ)`.
pub fn gcv(data: &Dataset, grid: &[f64]) -> Result<TuneResult, BaselineError> {
    let grid = validate_grid(grid)?;
    let n = data.n() as f64;
    let m = SymPsdMatrix::from_gram(data.x());
    let spectrum = spectral::eigh(&m)?;
    let xty = data.x().tr_matvec(data.y());

    let mut curve = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for &gamma in &grid {
        let trace: f64 = spectrum.eigenvalues().iter().map(|s| s / (s + gamma)).sum();
        if trace >= n - 1e-9 {
            return Err(BaselineError::DegenerateDenominator { gamma, trace });
        }
        let beta = ridge_beta(&spectrum, &xty, gamma);
        let resid = mat::sub(data.y(), &data.x().matvec(&beta));
        let rss = mat::dot(&resid, &resid);
        let denom = 1.0 - trace / n;
        let score = (rss / n) / (denom * denom);
        curve.push((gamma, score));
        if best.as_ref().map_or(true, |(s, _, _)| score <= *s) {
            best = Some((score, gamma, beta));
        }
    }
    let (_, gamma_star, beta_star) = best.expect("grid validated non-empty");
    Ok(TuneResult {
        gamma_star,
        beta_star,
        score_curve: curve,
        method: TunedMethod::Gcv,
    })
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    /// Set when `XᵀX` was singular within tolerance and zero modes were
    /// dropped (pseudo-inverse solution).
    pub pinv_used: bool,
}

/// Ordinary least squares through the Gram spectrum, with a pseudo-inverse
/// fallback for rank-deficient designs.
pub fn ols(data: &Dataset) -> Result<OlsFit, BaselineError> {
    let m = SymPsdMatrix::from_gram(data.x());
    let spectrum = spectral::eigh(&m)?;
    let sigma1 = spectrum.eigenvalues()[0];
    let tol = RANK_TOL * sigma1;
    let pinv_used = spectrum.eigenvalues().iter().any(|&s| s <= tol);
    let xty = data.x().tr_matvec(data.y());
    let beta = spectrum.apply_filter(&xty, |s| if s > tol { 1.0 / s } else { 0.0 });
    Ok(OlsFit { beta, pinv_used })
}
