//! Stationary solvers: exact Newton for the convective and do-nothing
//! conditions and the frozen-sign quasi-Newton iteration for directional
//! do-nothing.

use std::fmt::Write as _;

use crate::boundary::{assemble_phi, homogeneous_dirichlet, BoundarySpec, Lifting, OutflowKind};
use crate::fem::{self, FESystem, State};
use crate::linalg::{eliminate, CachedLu, LinalgError, LuFactor, SparseMatrix, Triplets};

/// Newton iteration controls.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    pub max_iters: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Backtracking factor; 1 means full Newton steps.
    pub damping: f64,
    pub initial_guess: InitialGuess,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { max_iters: 50, abs_tol: 1e-10, rel_tol: 1e-10, damping: 1.0, initial_guess: InitialGuess::Auto }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err("newton tolerances must be positive".into());
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(format!("newton damping must lie in (0, 1], got {}", self.damping));
        }
        if self.max_iters == 0 {
            return Err("newton max_iters must be at least 1".into());
        }
        Ok(())
    }
}

/// Starting point of a stationary solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialGuess {
    Zero,
    /// Stokes solution with the same viscosity and data.
    Stokes,
    /// Continuation in ν from [`CONTINUATION_START`].
    Continuation,
    /// Zero for `ν ≥ 1/20`, continuation below.
    Auto,
}

/// Viscosity at which continuation starts from a zero guess.
pub const CONTINUATION_START: f64 = 1.0 / 20.0;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceReason {
    NonFinite,
    ResidualGrowth,
    IterateBlowup,
    MaxIterations,
    LinearSolver(String),
    Continuation(String),
}

impl std::fmt::Display for DivergenceReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DivergenceReason::NonFinite => f.write_str("non-finite residual"),
            DivergenceReason::ResidualGrowth => f.write_str("residual grew on 5 consecutive iterations"),
            DivergenceReason::IterateBlowup => f.write_str("iterate norm exceeded 1e12"),
            DivergenceReason::MaxIterations => f.write_str("maximum iterations reached"),
            DivergenceReason::LinearSolver(m) => write!(f, "linear solver failed: {m}"),
            DivergenceReason::Continuation(m) => write!(f, "continuation failed: {m}"),
        }
    }
}

/// Iteration history of one solve.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NewtonReport {
    /// Number of updates applied.
    pub iterations: usize,
    /// Free-unknown residual norm before each update and after the last.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub reason: Option<DivergenceReason>,
    /// Viscosities visited by continuation, ending at the target.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub continuation: Vec<f64>,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }

    /// `iter,residual` table.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,residual\n");
        for (i, r) in self.residuals.iter().enumerate() {
            let _ = writeln!(s, "{i},{r:e}");
        }
        s
    }

    /// One JSON object per residual, then a summary line.
    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for (i, r) in self.residuals.iter().enumerate() {
            let _ = writeln!(s, "{}", serde_json::json!({ "iter": i, "residual": r }));
        }
        let _ = writeln!(
            s,
            "{}",
            serde_json::json!({
                "iterations": self.iterations,
                "converged": self.converged,
                "reason": self.reason.as_ref().map(|r| r.to_string()),
            })
        );
        s
    }

    /// Observed convergence order from the last three residuals,
    /// `log(r_{k+1}/r_k) / log(r_k/r_{k-1})`.
    pub fn fitted_order(&self) -> Option<f64> {
        let n = self.residuals.len();
        if n < 3 {
            return None;
        }
        let (a, b, c) = (self.residuals[n - 3], self.residuals[n - 2], self.residuals[n - 1]);
        if !(a > 0.0 && b > 0.0 && c > 0.0) || a == b {
            return None;
        }
        Some((c / b).ln() / (b / a).ln())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Data of a stationary problem in lifted form: the unknown is `ũ = u − w₀`.
#[derive(Debug, Clone)]
pub struct SteadyProblem {
    pub nu: f64,
    pub outflow: OutflowKind,
    /// Assembled right-hand side `⟨f, v⟩` plus any boundary load.
    pub load: Vec<f64>,
    /// Lifting `w₀`; all zeros for a homogeneous problem.
    pub w0: Vec<f64>,
}

impl SteadyProblem {
    pub fn homogeneous(fes: &FESystem, nu: f64, outflow: OutflowKind, load: Vec<f64>) -> Self {
        SteadyProblem { nu, outflow, load, w0: vec![0.0; fes.n_u()] }
    }

    pub fn lifted(nu: f64, outflow: OutflowKind, load: Vec<f64>, lifting: &Lifting) -> Self {
        SteadyProblem { nu, outflow, load, w0: lifting.w0.clone() }
    }

    fn is_homogeneous(&self) -> bool {
        self.w0.iter().all(|&v| v == 0.0)
    }

    /// Physical velocity `ũ + w₀`.
    pub fn physical(&self, u_tilde: &[f64]) -> Vec<f64> {
        u_tilde.iter().zip(&self.w0).map(|(a, b)| a + b).collect()
    }
}

fn add_assign(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Full residual over `[u, p]`, with the lifted convection terms written out:
/// `ν a₀(ũ,v) + a₁(ũ;ũ,v) + a₁(w₀;ũ,v) + a₁(ũ;w₀,v) + b(v,p) + b(ũ,q) − ⟨Φ,v⟩`.
/// With a zero lifting this is the homogeneous residual. For directional
/// do-nothing the boundary term `−½∫((ũ+w₀)·n)₋ (ũ+w₀)·v` replaces the
/// boundary part of `a₁`.
pub fn residual(fes: &FESystem, prob: &SteadyProblem, state: &State) -> Vec<f64> {
    let n_u = fes.n_u();
    let kappa = prob.outflow.gamma1_weight();
    let (a0, b) = (fes.a0(), fes.b());
    let u = &state.u;
    let mut r = a0.matvec(u);
    r.iter_mut().for_each(|v| *v *= prob.nu);
    add_assign(&mut r, &fem::a1_action(fes, u, u, kappa));
    if !prob.is_homogeneous() {
        add_assign(&mut r, &fem::a1_action(fes, &prob.w0, u, kappa));
        add_assign(&mut r, &fem::a1_action(fes, u, &prob.w0, kappa));
    }
    if prob.outflow == OutflowKind::Ddn {
        add_assign(&mut r, &fem::ddn_boundary_action(fes, &prob.physical(u)));
    }
    add_assign(&mut r, &b.transpose_matvec(&state.p));
    let phi = assemble_phi(fes, &prob.load, &prob.w0, prob.nu, kappa);
    for (x, f) in r.iter_mut().zip(&phi) {
        *x -= f;
    }
    let div = b.matvec(u);
    r.extend_from_slice(&div);
    debug_assert_eq!(r.len(), n_u + fes.n_p());
    r
}

/// Newton matrix at `state`. Exact derivative of [`residual`] for the
/// convective and do-nothing conditions; for directional do-nothing the
/// boundary part is `δ ↦ −½∫((ũ+w₀)·n)₋ (δ·v)` with the sign frozen.
pub fn jacobian(fes: &FESystem, prob: &SteadyProblem, state: &State) -> SparseMatrix {
    let n = fes.n_total();
    let kappa = prob.outflow.gamma1_weight();
    let u = prob.physical(&state.u);
    let mut trips = Triplets::with_capacity(n, n, 4 * 144 * fes.mesh().n_triangles());
    fem::add_a0(fes, &mut trips, prob.nu, 0);
    fem::add_convection_first(fes, &u, &mut trips, 1.0);
    fem::add_convection_second(fes, &u, &mut trips, 1.0);
    match prob.outflow {
        OutflowKind::Cbc => {
            fem::add_boundary_first(fes, &u, &mut trips, -0.5 * kappa);
            fem::add_boundary_second(fes, &u, &mut trips, -0.5 * kappa);
        }
        OutflowKind::Dn => {}
        OutflowKind::Ddn => fem::add_ddn_boundary(fes, &u, &mut trips, 1.0),
    }
    fem::add_b_blocks(fes, &mut trips, 1.0, fes.n_u());
    trips.build().expect("indices in range")
}

/// Homogeneous residual `E_H`.
pub fn residual_eh(fes: &FESystem, nu: f64, load: &[f64], kind: OutflowKind, state: &State) -> Vec<f64> {
    residual(fes, &SteadyProblem::homogeneous(fes, nu, kind, load.to_vec()), state)
}

/// Homogeneous Jacobian `E_H'`.
pub fn jacobian_eh(fes: &FESystem, nu: f64, kind: OutflowKind, state: &State) -> SparseMatrix {
    jacobian(fes, &SteadyProblem::homogeneous(fes, nu, kind, vec![0.0; fes.n_u()]), state)
}

fn free_norm(r: &[f64], fixed: &[Option<f64>]) -> f64 {
    r.iter().zip(fixed).filter(|(_, f)| f.is_none()).map(|(v, _)| v * v).sum::<f64>().sqrt()
}

/// Newton iteration from `start` on the lifted unknown.
pub fn newton(fes: &FESystem, prob: &SteadyProblem, start: State, cfg: &NewtonConfig) -> (State, NewtonReport) {
    let fixed = homogeneous_dirichlet(fes);
    let mut x = start;
    for (i, f) in fixed.iter().enumerate() {
        if f.is_some() {
            if i < fes.n_u() {
                x.u[i] = 0.0;
            } else {
                x.p[i - fes.n_u()] = 0.0;
            }
        }
    }
    let mut report =
        NewtonReport { iterations: 0, residuals: Vec::new(), converged: false, reason: None, continuation: Vec::new() };
    let mut fact = CachedLu::default();
    let mut r = residual(fes, prob, &x);
    let mut rn = free_norm(&r, &fixed);
    report.residuals.push(rn);
    let r0 = rn;
    let tol = cfg.abs_tol.max(cfg.rel_tol * r0);
    let mut growth = 0usize;
    loop {
        if !rn.is_finite() {
            report.reason = Some(DivergenceReason::NonFinite);
            break;
        }
        if rn <= tol {
            report.converged = true;
            break;
        }
        if report.iterations >= cfg.max_iters {
            report.reason = Some(DivergenceReason::MaxIterations);
            break;
        }
        let j = jacobian(fes, prob, &x);
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = eliminate(&j, &neg, &fixed).and_then(|(k, rhs)| fact.factor(&k)?.solve(&rhs));
        let delta = match step {
            Ok(d) => d,
            Err(e) => {
                report.reason = Some(DivergenceReason::LinearSolver(e.to_string()));
                break;
            }
        };
        let mut alpha = 1.0;
        let (next, rnext, nnext) = loop {
            let mut cand = x.to_vec();
            for (c, d) in cand.iter_mut().zip(&delta) {
                *c += alpha * d;
            }
            let cand = State::from_vec(fes, &cand);
            let rc = residual(fes, prob, &cand);
            let nc = free_norm(&rc, &fixed);
            if cfg.damping >= 1.0 || nc <= (1.0 - 1e-4 * alpha) * rn || alpha < 1e-4 {
                break (cand, rc, nc);
            }
            alpha *= cfg.damping;
        };
        report.iterations += 1;
        growth = if nnext > rn { growth + 1 } else { 0 };
        x = next;
        r = rnext;
        rn = nnext;
        report.residuals.push(rn);
        let xnorm = x.u.iter().chain(&x.p).map(|v| v * v).sum::<f64>().sqrt();
        if !xnorm.is_finite() || !rn.is_finite() {
            report.reason = Some(DivergenceReason::NonFinite);
            break;
        }
        if xnorm > 1e12 {
            report.reason = Some(DivergenceReason::IterateBlowup);
            break;
        }
        if growth >= 5 {
            report.reason = Some(DivergenceReason::ResidualGrowth);
            break;
        }
    }
    (x, report)
}

/// Stokes solve with the problem's viscosity and load, as a starting guess:
/// `ν a₀(ũ,v) + b(v,p) = ⟨f,v⟩ − ν a₀(w₀,v)`, `b(ũ,q) = 0`.
pub fn stokes_guess(fes: &FESystem, prob: &SteadyProblem) -> Result<State, SolveError> {
    let a = crate::boundary::stokes_matrix(fes, prob.nu);
    let mut rhs = assemble_phi(fes, &prob.load, &prob.w0, prob.nu, 0.0);
    if !prob.is_homogeneous() {
        // assemble_phi also removed a₁(w₀;w₀,·); add it back for a pure Stokes guess
        add_assign(&mut rhs, &fem::a1_action(fes, &prob.w0, &prob.w0, 0.0));
    }
    rhs.resize(fes.n_total(), 0.0);
    let (k, rhs) = eliminate(&a, &rhs, &homogeneous_dirichlet(fes))?;
    let x = LuFactor::new(&k)?.solve(&rhs)?;
    Ok(State::from_vec(fes, &x))
}

/// Stationary solve honoring the configured initial guess policy.
pub fn solve_steady(fes: &FESystem, prob: &SteadyProblem, cfg: &NewtonConfig) -> Result<(State, NewtonReport), SolveError> {
    cfg.validate().map_err(SolveError::Config)?;
    let policy = match cfg.initial_guess {
        InitialGuess::Auto if prob.nu < CONTINUATION_START => InitialGuess::Continuation,
        InitialGuess::Auto => InitialGuess::Zero,
        p => p,
    };
    match policy {
        InitialGuess::Zero => Ok(newton(fes, prob, State::zeros(fes), cfg)),
        InitialGuess::Stokes => {
            let s = stokes_guess(fes, prob)?;
            Ok(newton(fes, prob, s, cfg))
        }
        InitialGuess::Continuation => Ok(continuation(fes, prob, cfg)),
        InitialGuess::Auto => unreachable!("resolved above"),
    }
}

/// Continuation in ν: solve at [`CONTINUATION_START`] from zero, then walk
/// down geometrically, halving the log-step after a failed solve.
pub fn continuation(fes: &FESystem, prob: &SteadyProblem, cfg: &NewtonConfig) -> (State, NewtonReport) {
    let target = prob.nu;
    let start_nu = CONTINUATION_START.max(target);
    let mut path = vec![start_nu];
    let (mut state, mut rep) = newton(fes, &SteadyProblem { nu: start_nu, ..prob.clone() }, State::zeros(fes), cfg);
    if !rep.converged || start_nu == target {
        rep.continuation = path;
        return (state, rep);
    }
    let mut nu = start_nu;
    let mut log_step = (0.5f64).ln();
    let mut attempts = 0;
    loop {
        let next = (nu.ln() + log_step).exp().max(target);
        attempts += 1;
        let (s, r) = newton(fes, &SteadyProblem { nu: next, ..prob.clone() }, state.clone(), cfg);
        if r.converged {
            nu = next;
            state = s;
            rep = r;
            path.push(nu);
            if nu <= target {
                break;
            }
            log_step = (log_step * 1.5).max((0.25f64).ln());
        } else {
            log_step *= 0.5;
            if log_step.abs() < 1e-3 || attempts > 60 {
                rep = r;
                rep.converged = false;
                rep.reason = Some(DivergenceReason::Continuation(format!("stalled at nu = {nu:.6e}")));
                state = s;
                break;
            }
        }
    }
    rep.continuation = path;
    (state, rep)
}

/// Exact Newton for a homogeneous scenario.
pub fn newton_solve_homogeneous(
    fes: &FESystem,
    spec: &BoundarySpec,
    nu: f64,
    load: &[f64],
    cfg: &NewtonConfig,
) -> Result<(State, NewtonReport), SolveError> {
    let prob = SteadyProblem::homogeneous(fes, nu, spec.outflow, load.to_vec());
    solve_steady(fes, &prob, cfg)
}

/// Newton on the lifted unknown. Returns `ũ` and the reconstructed physical
/// state `u = ũ + w₀` (same pressure).
pub fn newton_solve_nonhomogeneous(
    fes: &FESystem,
    spec: &BoundarySpec,
    nu: f64,
    load: &[f64],
    lifting: &Lifting,
    cfg: &NewtonConfig,
) -> Result<(State, State, NewtonReport), SolveError> {
    let prob = SteadyProblem::lifted(nu, spec.outflow, load.to_vec(), lifting);
    let (tilde, rep) = solve_steady(fes, &prob, cfg)?;
    let phys = State { u: prob.physical(&tilde.u), p: tilde.p.clone(), t: None };
    Ok((tilde, phys, rep))
}

/// Quasi-Newton for directional do-nothing: exact volume linearization and
/// the frozen-sign boundary matrix; convergence is measured on the true
/// residual.
pub fn ddn_quasi_newton(
    fes: &FESystem,
    nu: f64,
    load: &[f64],
    lifting: &Lifting,
    cfg: &NewtonConfig,
) -> Result<(State, State, NewtonReport), SolveError> {
    let spec = BoundarySpec::new(OutflowKind::Ddn, None);
    newton_solve_nonhomogeneous(fes, &spec, nu, load, lifting, cfg)
}

/// `ν a₀(u,u) + a₁(u;u,u) − ⟨f,u⟩` and `⟨f,u⟩`, the diagonal test at a root.
pub fn energy_identity(fes: &FESystem, nu: f64, load: &[f64], kind: OutflowKind, u: &[f64]) -> (f64, f64) {
    let a0 = fes.a0().bilinear(u, u);
    let a1 = fem::dot(&fem::a1_action(fes, u, u, kind.gamma1_weight()), u);
    let fu = fem::dot(load, u);
    (nu * a0 + a1 - fu, fu)
}

#[cfg(test)]
mod tests;
