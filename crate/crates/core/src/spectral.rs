//! Dense symmetric linear algebra: eigendecomposition of PSD matrices via
//! cyclic Jacobi rotations, Tikhonov solves through the spectrum, and the
//! Lipschitz constant of the solution path.
//!
//! Everything downstream (the relaxation polytope, the fused programs, the
//! reference tuners) consumes the `Spectrum` produced here, so the ordering
//! and sign conventions are pinned: eigenvalues sorted non-increasing with
//! ties kept in input order, and each eigenvector's first nonzero entry
//! positive.

use alloc::vec::Vec;
use core::fmt;

use crate::mat::{self, Mat};
use crate::math;

/// Off-diagonal Frobenius threshold for the Jacobi sweep, relative to ‖M‖_F.
const JACOBI_TOL: f64 = 1e-12;
/// Maximum number of full Jacobi sweeps before giving up.
const JACOBI_MAX_SWEEPS: usize = 50;
/// Eigenvalues this far (relative to the spectral norm) below zero are
/// roundoff; anything lower is a genuinely indefinite matrix.
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralError {
    /// The stored entries are not exactly symmetric (or not square).
    NotSymmetric,
    /// An eigenvalue sits below the PSD roundoff band.
    NotPositiveSemidefinite { min_eigenvalue: f64, tolerance: f64 },
    /// The Jacobi iteration did not reach the threshold within the sweep budget.
    NoConvergence { sweeps: usize },
    /// Tikhonov solves and ridge problems need `gamma > 0`.
    NonPositiveGamma { gamma: f64 },
    DimensionMismatch { expected: usize, got: usize },
}

impl fmt::Display for SpectralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralError::NotSymmetric => write!(f, "matrix is not symmetric"),
            SpectralError::NotPositiveSemidefinite {
                min_eigenvalue,
                tolerance,
            } => write!(
                f,
                "matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e}, tolerance {tolerance:e})"
            ),
            SpectralError::NoConvergence { sweeps } => {
                write!(f, "Jacobi iteration did not converge in {sweeps} sweeps")
            }
            SpectralError::NonPositiveGamma { gamma } => {
                write!(f, "regularization parameter must be positive, got {gamma}")
            }
            SpectralError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SpectralError {}

/// Symmetric positive semi-definite matrix. Symmetry is exact as stored;
/// positive semi-definiteness is enforced when the spectrum is computed.
#[derive(Debug, Clone)]
pub struct SymPsdMatrix {
    entries: Mat,
}

impl SymPsdMatrix {
    /// Wraps a square matrix whose entries satisfy `m[i][j] == m[j][i]`
    /// exactly.
    pub fn new(entries: Mat) -> Result<Self, SpectralError> {
        if !entries.is_symmetric() {
            return Err(SpectralError::NotSymmetric);
        }
        Ok(SymPsdMatrix { entries })
    }

    /// `XᵀX`, symmetric by construction and PSD in exact arithmetic.
    pub fn from_gram(x: &Mat) -> Self {
        SymPsdMatrix { entries: x.gram() }
    }

    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &Mat {
        &self.entries
    }
}

/// Eigendecomposition `M = U diag(σ) Uᵀ` with `σ₁ ≥ … ≥ σ_n ≥ 0`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    u: Mat,
    sigma: Vec<f64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    /// Orthogonal eigenvector matrix; column `i` pairs with `eigenvalues()[i]`.
    pub fn basis(&self) -> &Mat {
        &self.u
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.sigma
    }

    /// `Uᵀ y`.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        self.u.tr_matvec(y)
    }

    /// `U diag(f(σ)) Uᵀ y` — the workhorse behind every spectral solve.
    pub fn apply_filter(&self, y: &[f64], mut f: impl FnMut(f64) -> f64) -> Vec<f64> {
        let mut coeffs = self.project(y);
        for (c, &s) in coeffs.iter_mut().zip(&self.sigma) {
            *c *= f(s);
        }
        self.u.matvec(&coeffs)
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric PSD matrix.
///
/// Rotations sweep the upper triangle until the off-diagonal Frobenius norm
/// drops below `1e-12 · ‖M‖_F` (at most 50 sweeps). Eigenvalues within the
/// roundoff band `[-ε_psd, 0)` are clamped to zero, with
/// `ε_psd = 1e-10 · max|σ|`.
pub fn eigh(m: &SymPsdMatrix) -> Result<Spectrum, SpectralError> {
    let n = m.dim();
    let mut a = m.entries().clone();
    let mut u = Mat::identity(n);
    let threshold = JACOBI_TOL * a.frob_norm();

    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * a[(p, q)] * a[(p, q)];
            }
        }
        if math::sqrt(off) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + math::hypot(1.0, tau))
                } else {
                    -1.0 / (-tau + math::hypot(1.0, tau))
                };
                let c = 1.0 / math::hypot(1.0, t);
                let s = t * c;

                let h = t * apq;
                a[(p, p)] -= h;
                a[(q, q)] += h;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for j in 0..n {
                    if j == p || j == q {
                        continue;
                    }
                    let ajp = a[(j, p)];
                    let ajq = a[(j, q)];
                    let np = c * ajp - s * ajq;
                    let nq = s * ajp + c * ajq;
                    a[(j, p)] = np;
                    a[(p, j)] = np;
                    a[(j, q)] = nq;
                    a[(q, j)] = nq;
                }
                for j in 0..n {
                    let ujp = u[(j, p)];
                    let ujq = u[(j, q)];
                    u[(j, p)] = c * ujp - s * ujq;
                    u[(j, q)] = s * ujp + c * ujq;
                }
            }
        }
    }
    if !converged {
        // re-check after the final sweep
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * a[(p, q)] * a[(p, q)];
            }
        }
        if math::sqrt(off) > threshold {
            return Err(SpectralError::NoConvergence {
                sweeps: JACOBI_MAX_SWEEPS,
            });
        }
    }

    let mut sigma: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();

    // Stable sort keeps tied eigenvalues in input order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap());
    let mut basis = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            basis[(r, dst)] = u[(r, src)];
        }
    }
    sigma = order.iter().map(|&i| sigma[i]).collect();

    // First nonzero entry of each eigenvector positive (columns are unit
    // norm, so entries below 1e-12 are noise).
    for j in 0..n {
        let lead = (0..n).map(|i| basis[(i, j)]).find(|v| v.abs() > 1e-12);
        if let Some(v) = lead {
            if v < 0.0 {
                for i in 0..n {
                    basis[(i, j)] = -basis[(i, j)];
                }
            }
        }
    }

    let spectral_norm = sigma.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    let eps_psd = PSD_TOL * spectral_norm;
    if let Some(&min) = sigma.last() {
        if min < -eps_psd {
            return Err(SpectralError::NotPositiveSemidefinite {
                min_eigenvalue: min,
                tolerance: eps_psd,
            });
        }
    }
    for s in sigma.iter_mut() {
        if *s < 0.0 {
            *s = 0.0;
        }
    }

    Ok(Spectrum { u: basis, sigma })
}

/// A Tikhonov system `(M + γI)β = y` restricted to `γ > γ₀`.
#[derive(Debug, Clone)]
pub struct RidgeProblem {
    m: SymPsdMatrix,
    spectrum: Spectrum,
    y: Vec<f64>,
    gamma0: f64,
}

impl RidgeProblem {
    pub fn new(m: SymPsdMatrix, y: Vec<f64>, gamma0: f64) -> Result<Self, SpectralError> {
        let spectrum = eigh(&m)?;
        Self::from_parts(m, spectrum, y, gamma0)
    }

    /// Assembles from a precomputed spectrum (callers that already ran
    /// `eigh` on `m` avoid repeating it).
    pub fn from_parts(
        m: SymPsdMatrix,
        spectrum: Spectrum,
        y: Vec<f64>,
        gamma0: f64,
    ) -> Result<Self, SpectralError> {
        if y.len() != m.dim() {
            return Err(SpectralError::DimensionMismatch {
                expected: m.dim(),
                got: y.len(),
            });
        }
        if !(gamma0 > 0.0) {
            return Err(SpectralError::NonPositiveGamma { gamma: gamma0 });
        }
        Ok(RidgeProblem {
            m,
            spectrum,
            y,
            gamma0,
        })
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn matrix(&self) -> &SymPsdMatrix {
        &self.m
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    /// `h(γ) = (M + γI)⁻¹ y`, computed as `Σᵢ (Uᵢᵀy)/(σᵢ+γ) · Uᵢ`.
    pub fn solve_tikhonov(&self, gamma: f64) -> Result<Vec<f64>, SpectralError> {
        if !(gamma > 0.0) {
            return Err(SpectralError::NonPositiveGamma { gamma });
        }
        Ok(self.spectrum.apply_filter(&self.y, |s| 1.0 / (s + gamma)))
    }

    /// Lipschitz constant of `γ ↦ h(γ)` on `(γ₀, ∞)`: `‖y‖₂ / (σ_n + γ₀)²`.
    pub fn lipschitz_bound(&self) -> f64 {
        let sigma_min = *self.spectrum.eigenvalues().last().expect("n ≥ 1");
        let denom = sigma_min + self.gamma0;
        mat::norm2(&self.y) / (denom * denom)
    }
}
