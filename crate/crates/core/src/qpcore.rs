//! Convex QP/LP solver: primal–dual path following with Mehrotra's
//! predictor–corrector step.
//!
//! Programs have the shape
//!
//! ```text
//!     minimize   ½ xᵀQx + cᵀx         (Q = 0 gives an LP)
//!     subject to A_eq x  = b_eq
//!                A_in x ≤ b_in
//! ```
//!
//! Inequalities get slack variables `s > 0` with duals `z > 0`; each Newton
//! step solves the reduced symmetric system in `(dx, dy)` after eliminating
//! `(ds, dz)`. A Phase-I solve maximizes the uniform constraint margin to
//! find a strictly interior starting point (and certifies infeasibility when
//! no margin exists). Everything is dense and deterministic.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::mat::{self, Mat};
use crate::spectral::{self, SymPsdMatrix};

#[derive(Debug, Clone, PartialEq)]
pub enum QpError {
    Dimension { what: &'static str },
    /// The objective matrix is not symmetric.
    AsymmetricObjective,
    /// The objective matrix has an eigenvalue below the PSD roundoff band.
    IndefiniteObjective { min_eigenvalue: f64 },
}

impl fmt::Display for QpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QpError::Dimension { what } => write!(f, "inconsistent dimensions: {what}"),
            QpError::AsymmetricObjective => write!(f, "objective matrix is not symmetric"),
            QpError::IndefiniteObjective { min_eigenvalue } => {
                write!(f, "objective matrix is indefinite (min eigenvalue {min_eigenvalue:e})")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for QpError {}

/// A convex quadratic (or linear) program with linear constraints.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    q: Mat,
    c: Vec<f64>,
    a_eq: Mat,
    b_eq: Vec<f64>,
    a_in: Mat,
    b_in: Vec<f64>,
}

impl ConvexProgram {
    pub fn new(
        q: Mat,
        c: Vec<f64>,
        a_eq: Mat,
        b_eq: Vec<f64>,
        a_in: Mat,
        b_in: Vec<f64>,
    ) -> Result<Self, QpError> {
        let n = c.len();
        if q.rows() != n || q.cols() != n {
            return Err(QpError::Dimension { what: "objective matrix vs variable count" });
        }
        if a_eq.cols() != n || a_eq.rows() != b_eq.len() {
            return Err(QpError::Dimension { what: "equality system" });
        }
        if a_in.cols() != n || a_in.rows() != b_in.len() {
            return Err(QpError::Dimension { what: "inequality system" });
        }
        if !q.is_symmetric() {
            return Err(QpError::AsymmetricObjective);
        }
        if q.data().iter().any(|&v| v != 0.0) {
            // eigh clamps the PSD roundoff band and rejects hard negatives
            match spectral::eigh(&SymPsdMatrix::new(q.clone()).expect("checked")) {
                Ok(_) => {}
                Err(spectral::SpectralError::NotPositiveSemidefinite {
                    min_eigenvalue, ..
                }) => return Err(QpError::IndefiniteObjective { min_eigenvalue }),
                Err(_) => {
                    return Err(QpError::IndefiniteObjective {
                        min_eigenvalue: f64::NAN,
                    })
                }
            }
        }
        Ok(ConvexProgram { q, c, a_eq, b_eq, a_in, b_in })
    }

    /// Linear program: zero quadratic term.
    pub fn lp(
        c: Vec<f64>,
        a_eq: Mat,
        b_eq: Vec<f64>,
        a_in: Mat,
        b_in: Vec<f64>,
    ) -> Result<Self, QpError> {
        let n = c.len();
        Self::new(Mat::zeros(n, n), c, a_eq, b_eq, a_in, b_in)
    }

    pub fn var_count(&self) -> usize {
        self.c.len()
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        0.5 * mat::dot(x, &self.q.matvec(x)) + mat::dot(&self.c, x)
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn a_eq(&self) -> &Mat {
        &self.a_eq
    }

    pub fn b_eq(&self) -> &[f64] {
        &self.b_eq
    }

    pub fn a_in(&self) -> &Mat {
        &self.a_in
    }

    pub fn b_in(&self) -> &[f64] {
        &self.b_in
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    IterLimit,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Max of stationarity, primal feasibility, and complementarity
    /// residuals, relative to `1 + ‖c‖ + ‖b‖`.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: SolverStatus,
    pub eq_duals: Vec<f64>,
    pub in_duals: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Relative KKT tolerance certifying optimality.
    pub tol_kkt: f64,
    pub max_iter: usize,
    /// Step damping keeping slacks and duals strictly positive.
    pub fraction_to_boundary: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_kkt: 1e-8,
            max_iter: 200,
            fraction_to_boundary: 0.99,
        }
    }
}

/// Solves with default options.
pub fn solve(prog: &ConvexProgram) -> SolverResult {
    solve_with(prog, &SolverOptions::default())
}

/// LP entry point; identical method with `Q = 0`.
pub fn solve_lp(prog: &ConvexProgram) -> SolverResult {
    debug_assert!(prog.q.data().iter().all(|&v| v == 0.0), "solve_lp expects q = 0");
    solve(prog)
}

pub fn solve_with(prog: &ConvexProgram, opts: &SolverOptions) -> SolverResult {
    let m = prog.a_in.rows();
    if m == 0 {
        return solve_equality_only(prog, opts);
    }

    let fail = |status: SolverStatus| SolverResult {
        x: vec![0.0; prog.var_count()],
        objective: f64::NAN,
        kkt_residual: f64::INFINITY,
        iterations: 0,
        status,
        eq_duals: vec![0.0; prog.b_eq.len()],
        in_duals: vec![0.0; m],
    };

    let x0 = match interior_start(prog, opts) {
        Ok(x0) => x0,
        Err(status) => return fail(status),
    };

    let mut state = IpmState::new(prog, x0);
    let (iterations, converged) = state.run(prog, opts);
    let kkt_residual = state.kkt_residual(prog);
    SolverResult {
        objective: prog.objective_at(&state.x),
        x: state.x,
        kkt_residual,
        iterations,
        status: if converged {
            SolverStatus::Optimal
        } else {
            SolverStatus::IterLimit
        },
        eq_duals: state.y,
        in_duals: state.z,
    }
}

/// No inequalities: one Newton/KKT solve.
fn solve_equality_only(prog: &ConvexProgram, opts: &SolverOptions) -> SolverResult {
    let n = prog.var_count();
    let p = prog.b_eq.len();
    let mut rhs = Vec::with_capacity(n + p);
    rhs.extend(prog.c.iter().map(|v| -v));
    rhs.extend_from_slice(&prog.b_eq);

    let mut delta = 0.0;
    for _ in 0..4 {
        let mut kkt = Mat::zeros(n + p, n + p);
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = prog.q[(i, j)];
            }
            kkt[(i, i)] += delta;
        }
        for r in 0..p {
            for j in 0..n {
                kkt[(n + r, j)] = prog.a_eq[(r, j)];
                kkt[(j, n + r)] = prog.a_eq[(r, j)];
            }
            kkt[(n + r, n + r)] = -delta;
        }
        let scale = kkt.frob_norm().max(1.0);
        if let Some(lu) = mat::Lu::factor(kkt, 1e-14 * scale) {
            let sol = lu.solve(&rhs);
            let x = sol[..n].to_vec();
            let y = sol[n..].to_vec();
            let scale_res = 1.0 + mat::norm2(&prog.c) + mat::norm2(&prog.b_eq);
            let mut r_d = prog.q.matvec(&x);
            mat::axpy(1.0, &prog.c, &mut r_d);
            let aty = prog.a_eq.tr_matvec(&y);
            mat::axpy(1.0, &aty, &mut r_d);
            let r_p = mat::sub(&prog.a_eq.matvec(&x), &prog.b_eq);
            let kkt_residual = mat::norm_inf(&r_d).max(mat::norm_inf(&r_p)) / scale_res;
            let status = if kkt_residual <= opts.tol_kkt {
                SolverStatus::Optimal
            } else {
                SolverStatus::IterLimit
            };
            return SolverResult {
                objective: prog.objective_at(&x),
                x,
                kkt_residual,
                iterations: 1,
                status,
                eq_duals: y,
                in_duals: Vec::new(),
            };
        }
        delta = if delta == 0.0 { 1e-12 * scale } else { delta * 100.0 };
    }
    SolverResult {
        x: vec![0.0; n],
        objective: f64::NAN,
        kkt_residual: f64::INFINITY,
        iterations: 0,
        status: SolverStatus::IterLimit,
        eq_duals: vec![0.0; p],
        in_duals: Vec::new(),
    }
}

/// Phase I: maximize the uniform margin `t` with `A_in x + t·1 ≤ b_in`,
/// `A_eq x = b_eq`. A positive optimal margin yields a strictly interior
/// start; a margin pinned at zero certifies an empty interior.
fn interior_start(prog: &ConvexProgram, opts: &SolverOptions) -> Result<Vec<f64>, SolverStatus> {
    let n = prog.var_count();
    let m = prog.a_in.rows();
    let p = prog.b_eq.len();

    let x_ls = if p == 0 {
        vec![0.0; n]
    } else {
        least_norm_solution(&prog.a_eq, &prog.b_eq).ok_or(SolverStatus::Infeasible)?
    };
    if p > 0 {
        let res = mat::sub(&prog.a_eq.matvec(&x_ls), &prog.b_eq);
        if mat::norm_inf(&res) > 1e-9 * (1.0 + mat::norm_inf(&prog.b_eq)) {
            return Err(SolverStatus::Infeasible);
        }
    }

    let slack0 = mat::sub(&prog.b_in, &prog.a_in.matvec(&x_ls));
    let t0 = slack0.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let cap = if t0 > 0.0 { 2.0 * t0 + 2.0 } else { 2.0 };

    // variables (x, t), minimize -t
    let mut c = vec![0.0; n + 1];
    c[n] = -1.0;
    let a_eq = Mat::from_fn(p, n + 1, |r, j| if j < n { prog.a_eq[(r, j)] } else { 0.0 });
    let a_in = Mat::from_fn(m + 1, n + 1, |r, j| {
        if r < m {
            if j < n {
                prog.a_in[(r, j)]
            } else {
                1.0
            }
        } else if j == n {
            1.0
        } else {
            0.0
        }
    });
    let mut b_in = prog.b_in.clone();
    b_in.push(cap);
    let phase1 = ConvexProgram {
        q: Mat::zeros(n + 1, n + 1),
        c,
        a_eq,
        b_eq: prog.b_eq.clone(),
        a_in,
        b_in,
    };

    let mut x0 = x_ls;
    x0.push(t0);
    let mut state = IpmState::new(&phase1, x0);
    state.run(&phase1, &SolverOptions { max_iter: opts.max_iter, ..Default::default() });

    let x = state.x[..n].to_vec();
    let slack = mat::sub(&prog.b_in, &prog.a_in.matvec(&x));
    let margin = slack.iter().cloned().fold(f64::INFINITY, f64::min);
    if margin <= 1e-9 * (1.0 + mat::norm_inf(&prog.b_in)) {
        return Err(SolverStatus::Infeasible);
    }
    Ok(x)
}

/// Least-norm solution of `A x = b` via `x = Aᵀ(AAᵀ)⁻¹b`.
fn least_norm_solution(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    let p = a.rows();
    let mut gram = Mat::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = mat::dot(a.row(i), a.row(j));
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let scale = gram.frob_norm().max(1.0);
    let mut delta = 0.0;
    for _ in 0..3 {
        let mut g = gram.clone();
        for i in 0..p {
            g[(i, i)] += delta;
        }
        if let Some(lu) = mat::Lu::factor(g, 1e-14 * scale) {
            let w = lu.solve(b);
            return Some(a.tr_matvec(&w));
        }
        delta = if delta == 0.0 { 1e-12 * scale } else { delta * 1e4 };
    }
    None
}

struct IpmState {
    x: Vec<f64>,
    s: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

impl IpmState {
    fn new(prog: &ConvexProgram, x0: Vec<f64>) -> Self {
        let s = mat::sub(&prog.b_in, &prog.a_in.matvec(&x0));
        debug_assert!(s.iter().all(|&v| v > 0.0), "interior start must have positive slacks");
        IpmState {
            x: x0,
            s,
            y: vec![0.0; prog.b_eq.len()],
            z: vec![1.0; prog.a_in.rows()],
        }
    }

    fn residuals(&self, prog: &ConvexProgram) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut r_d = prog.q.matvec(&self.x);
        mat::axpy(1.0, &prog.c, &mut r_d);
        if !self.y.is_empty() {
            let aty = prog.a_eq.tr_matvec(&self.y);
            mat::axpy(1.0, &aty, &mut r_d);
        }
        let atz = prog.a_in.tr_matvec(&self.z);
        mat::axpy(1.0, &atz, &mut r_d);

        let r_p = if self.y.is_empty() {
            Vec::new()
        } else {
            mat::sub(&prog.a_eq.matvec(&self.x), &prog.b_eq)
        };

        let mut r_s = mat::sub(&prog.a_in.matvec(&self.x), &prog.b_in);
        mat::axpy(1.0, &self.s, &mut r_s);
        (r_d, r_p, r_s)
    }

    fn scale(&self, prog: &ConvexProgram) -> f64 {
        1.0 + mat::norm2(&prog.c)
            + crate::math::hypot(mat::norm2(&prog.b_eq), mat::norm2(&prog.b_in))
    }

    fn comp_inf(&self) -> f64 {
        self.s
            .iter()
            .zip(&self.z)
            .fold(0.0_f64, |m, (s, z)| m.max(s * z))
    }

    fn kkt_residual(&self, prog: &ConvexProgram) -> f64 {
        let (r_d, r_p, r_s) = self.residuals(prog);
        mat::norm_inf(&r_d)
            .max(mat::norm_inf(&r_p))
            .max(mat::norm_inf(&r_s))
            .max(self.comp_inf())
            / self.scale(prog)
    }

    /// Runs the predictor–corrector loop; returns (iterations, converged).
    fn run(&mut self, prog: &ConvexProgram, opts: &SolverOptions) -> (usize, bool) {
        let n = prog.var_count();
        let p = prog.b_eq.len();
        let m = prog.a_in.rows();
        let scale = self.scale(prog);
        // converge one decade past the certificate threshold so the reported
        // residual clears `tol_kkt` with margin
        let tol = 0.1 * opts.tol_kkt;
        let tol_primal = tol.min(1e-9);
        let tau = opts.fraction_to_boundary;

        for iter in 0..opts.max_iter {
            let (r_d, r_p, r_s) = self.residuals(prog);
            let mu = mat::dot(&self.s, &self.z) / m as f64;
            if mat::norm_inf(&r_d) <= tol * scale
                && mat::norm_inf(&r_p) <= tol_primal * scale
                && mat::norm_inf(&r_s) <= tol_primal * scale
                && self.comp_inf() <= tol * scale
            {
                return (iter, true);
            }

            // reduced KKT matrix: [Q + A_inᵀ diag(z/s) A_in, A_eqᵀ; A_eq, 0]
            let w: Vec<f64> = self.z.iter().zip(&self.s).map(|(z, s)| z / s).collect();
            let lu = match self.factor_reduced(prog, &w, n, p) {
                Some(lu) => lu,
                None => return (iter, false),
            };

            // predictor: drive complementarity toward zero
            let r_comp: Vec<f64> = self.s.iter().zip(&self.z).map(|(s, z)| s * z).collect();
            let (dx_a, _dy_a, dz_a, ds_a) =
                self.newton_step(prog, &lu, &w, &r_d, &r_p, &r_s, &r_comp, n, p);
            let alpha_p_a = max_step(&self.s, &ds_a);
            let alpha_d_a = max_step(&self.z, &dz_a);
            let mu_aff = {
                let mut acc = 0.0;
                for i in 0..m {
                    acc += (self.s[i] + alpha_p_a * ds_a[i]) * (self.z[i] + alpha_d_a * dz_a[i]);
                }
                acc / m as f64
            };
            let sigma = if mu > 0.0 {
                let ratio = (mu_aff / mu).clamp(0.0, 1.0);
                ratio * ratio * ratio
            } else {
                0.0
            };
            let _ = dx_a;

            // corrector: recenter and compensate the affine product term
            let r_comp_cor: Vec<f64> = (0..m)
                .map(|i| self.s[i] * self.z[i] + ds_a[i] * dz_a[i] - sigma * mu)
                .collect();
            let (dx, dy, dz, ds) =
                self.newton_step(prog, &lu, &w, &r_d, &r_p, &r_s, &r_comp_cor, n, p);

            let alpha_p = (tau * max_step(&self.s, &ds)).min(1.0);
            let alpha_d = (tau * max_step(&self.z, &dz)).min(1.0);
            mat::axpy(alpha_p, &dx, &mut self.x);
            mat::axpy(alpha_p, &ds, &mut self.s);
            mat::axpy(alpha_d, &dy, &mut self.y);
            mat::axpy(alpha_d, &dz, &mut self.z);
        }
        (opts.max_iter, false)
    }

    fn factor_reduced(&self, prog: &ConvexProgram, w: &[f64], n: usize, p: usize) -> Option<mat::Lu> {
        let mut h = prog.q.clone();
        for (i, &wi) in w.iter().enumerate() {
            let row = prog.a_in.row(i);
            for a in 0..n {
                if row[a] == 0.0 {
                    continue;
                }
                let f = wi * row[a];
                for b in 0..n {
                    h[(a, b)] += f * row[b];
                }
            }
        }
        let mut delta = 0.0;
        for _ in 0..4 {
            let mut kkt = Mat::zeros(n + p, n + p);
            for i in 0..n {
                for j in 0..n {
                    kkt[(i, j)] = h[(i, j)];
                }
                kkt[(i, i)] += delta;
            }
            for r in 0..p {
                for j in 0..n {
                    kkt[(n + r, j)] = prog.a_eq[(r, j)];
                    kkt[(j, n + r)] = prog.a_eq[(r, j)];
                }
                kkt[(n + r, n + r)] = -delta;
            }
            let scale = kkt.frob_norm().max(1.0);
            if let Some(lu) = mat::Lu::factor(kkt, 1e-14 * scale) {
                return Some(lu);
            }
            delta = if delta == 0.0 { 1e-12 * h.frob_norm().max(1.0) } else { delta * 100.0 };
        }
        None
    }

    #[allow(clippy::too_many_arguments)]
    fn newton_step(
        &self,
        prog: &ConvexProgram,
        lu: &mat::Lu,
        w: &[f64],
        r_d: &[f64],
        r_p: &[f64],
        r_s: &[f64],
        r_comp: &[f64],
        n: usize,
        p: usize,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = w.len();
        // g = (−r_comp + z∘r_s)/s
        let g: Vec<f64> = (0..m)
            .map(|i| (-r_comp[i] + self.z[i] * r_s[i]) / self.s[i])
            .collect();
        let atg = prog.a_in.tr_matvec(&g);
        let mut rhs = Vec::with_capacity(n + p);
        for i in 0..n {
            rhs.push(-r_d[i] - atg[i]);
        }
        for r in 0..p {
            rhs.push(-r_p[r]);
        }
        let sol = lu.solve(&rhs);
        let dx = sol[..n].to_vec();
        let dy = sol[n..].to_vec();
        let adx = prog.a_in.matvec(&dx);
        let dz: Vec<f64> = (0..m).map(|i| g[i] + w[i] * adx[i]).collect();
        let ds: Vec<f64> = (0..m).map(|i| -r_s[i] - adx[i]).collect();
        (dx, dy, dz, ds)
    }
}

/// Largest step in `[0, 1]` keeping `v + α dv` nonnegative.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut alpha = 1.0_f64;
    for (vi, di) in v.iter().zip(dv) {
        if *di < 0.0 {
            alpha = alpha.min(-vi / di);
        }
    }
    alpha
}
