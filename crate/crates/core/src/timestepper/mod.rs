//! Lagrange–Galerkin time integration.
//!
//! Each step solves one linear saddle-point system
//!
//! ```text
//! (uⁿ − uⁿ⁻¹∘X)/Δt · v + ν a₀(uⁿ, v) + b(v, pⁿ) + b(uⁿ, q) + B_out(uⁿ⁻¹; uⁿ, v) = ⟨fⁿ, v⟩
//! ```
//!
//! where `X(x) = x − uⁿ⁻¹(x)Δt` is the upwind foot and `B_out` is the outflow
//! term with its velocity factor frozen at the previous step:
//! `−½∫_Γ₁ (uⁿ⁻¹·n)(uⁿ·v)` for the convective condition,
//! `−½∫_Γ₁ (uⁿ⁻¹·n)₋(uⁿ·v)` for directional do-nothing, and nothing for
//! do-nothing.

use rayon::prelude::*;

use crate::boundary::{build_lifting, physical_dirichlet, BoundaryError, BoundarySpec, OutflowKind};
use crate::fem::{self, FESystem, State};
use crate::linalg::{eliminate, CachedLu, LinalgError, LuFactor, SparseMatrix, Triplets};
use crate::mesh::{BoundaryTag, Location, Point};


/// Body force `f(x, t)`.
pub type Forcing = dyn Fn(Point, f64) -> [f64; 2] + Send + Sync;

/// Step size, horizon and output times.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub captures: Vec<f64>,
}

impl TimeConfig {
    pub fn new(dt: f64, t_final: f64, captures: Vec<f64>) -> Result<Self, String> {
        let c = TimeConfig { dt, t_final, captures };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(format!("time step must be positive, got {}", self.dt));
        }
        if !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(format!("final time {} must be at least the time step {}", self.t_final, self.dt));
        }
        if let Some(t) = self.captures.iter().find(|&&t| !(0.0..=self.t_final).contains(&t)) {
            return Err(format!("capture time {t} outside [0, {}]", self.t_final));
        }
        Ok(())
    }

    /// `N = ⌊T/Δt⌋`. A quotient within a few ulps of an integer counts as
    /// that integer, so `24 / 0.01` gives 2400 steps.
    pub fn n_steps(&self) -> usize {
        let q = self.t_final / self.dt;
        let r = q.round();
        if (q - r).abs() <= 1e-9 * r.max(1.0) {
            r as usize
        } else {
            q.floor() as usize
        }
    }

    /// Step index nearest to each capture time, sorted and deduplicated.
    pub fn capture_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let mut s: Vec<usize> =
            self.captures.iter().map(|&t| ((t / self.dt).round() as usize).min(n)).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Upwind foot `x − u(x) Δt`.
pub fn upwind_point(u: impl Fn(Point) -> [f64; 2], x: Point, dt: f64) -> Point {
    let v = u(x);
    [x[0] - v[0] * dt, x[1] - v[1] * dt]
}

#[derive(Debug, thiserror::Error)]
pub enum StepError {
    #[error("upwind foot ({x:.6}, {y:.6}) could not be located in the mesh")]
    Unlocatable { x: f64, y: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Quantities recorded after every step.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    /// `sup_q |b(uⁿ, q)| / ‖q‖`.
    pub div_residual: f64,
    /// `∫_Γ₁ uⁿ·n ds`.
    pub outflow_flux: f64,
    pub l2_u: f64,
    /// `‖uⁿ − uⁿ⁻¹‖ / Δt`.
    pub rate: f64,
    /// Upwind feet that left the domain and were projected back.
    pub projected_feet: usize,
    /// `max|uⁿ⁻¹| Δt / h_min`.
    pub cfl: f64,
    /// `max (uⁿ⁻¹·n)⁺ Δt / |e|` over outflow edges `e`.
    pub outflow_cfl: f64,
}

/// A state stored at an output time.
#[derive(Debug, Clone)]
pub struct Capture {
    pub step: usize,
    pub t: f64,
    pub state: State,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub captures: Vec<Capture>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// False when a step failed; `error` then says why.
    pub complete: bool,
    pub error: Option<String>,
    /// Last computed state.
    pub last: State,
}

/// Per-run data reused across steps: the state-independent part of the
/// matrix, mass matrices and the factorization cache.
pub struct LgStepper<'a> {
    fes: &'a FESystem,
    spec: &'a BoundarySpec,
    nu: f64,
    dt: f64,
    base: SparseMatrix,
    mass: SparseMatrix,
    pressure_mass: LuFactor,
    lu: CachedLu,
    /// For do-nothing the matrix never changes and one factor serves all steps.
    frozen: Option<LuFactor>,
    h_min: f64,
    cfl_warned: bool,
    outflow_warned: bool,
}

impl<'a> LgStepper<'a> {
    pub fn new(fes: &'a FESystem, spec: &'a BoundarySpec, nu: f64, dt: f64) -> Result<Self, StepError> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(StepError::Config(format!("viscosity must be positive, got {nu}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(StepError::Config(format!("time step must be positive, got {dt}")));
        }
        let n = fes.n_total();
        let mut trips = Triplets::with_capacity(n, n, 4 * 144 * fes.mesh().n_triangles());
        fem::add_mass(fes, &mut trips, 1.0 / dt, 0);
        fem::add_a0(fes, &mut trips, nu, 0);
        fem::add_b_blocks(fes, &mut trips, 1.0, fes.n_u());
        let base = trips.build()?;
        Ok(LgStepper {
            fes,
            spec,
            nu,
            dt,
            base,
            mass: fem::assemble_mass(fes),
            pressure_mass: LuFactor::new(&fem::assemble_pressure_mass(fes))?,
            lu: CachedLu::default(),
            frozen: None,
            h_min: fes.mesh().min_edge_length(),
            cfl_warned: false,
            outflow_warned: false,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Step matrix for the previous velocity `u_prev`, before Dirichlet
    /// elimination. Depends on `u_prev` only through the outflow term.
    pub fn matrix(&self, u_prev: &[f64]) -> Result<SparseMatrix, LinalgError> {
        let n = self.fes.n_total();
        let mut trips = Triplets::new(n, n);
        match self.spec.outflow {
            OutflowKind::Cbc => fem::add_boundary_second(self.fes, u_prev, &mut trips, -0.5),
            OutflowKind::Ddn => fem::add_ddn_boundary(self.fes, u_prev, &mut trips, 1.0),
            OutflowKind::Dn => return Ok(self.base.clone()),
        }
        self.base.add(&trips.build()?, 1.0)
    }

    /// `(1/Δt) ∫ (u_prev∘X)·v` at the volume quadrature points, plus the
    /// number of feet projected back onto the boundary.
    pub fn transported(&self, u_prev: &[f64]) -> Result<(Vec<f64>, usize), StepError> {
        let fes = self.fes;
        let mesh = fes.mesh();
        let n_s = fes.n_scalar();
        let dt = self.dt;
        let local: Vec<Result<([f64; 12], usize), StepError>> = (0..mesh.n_triangles())
            .into_par_iter()
            .map(|t| {
                let mut k = [0.0; 12];
                let mut projected = 0;
                for qp in fem::volume_points(fes, t) {
                    let x = fes.point(t, qp.bary);
                    let foot = upwind_point(|_| fes.eval_velocity(u_prev, t, qp.bary), x, dt);
                    let (tri, bary) = match mesh.locate_point(foot, Some(t)) {
                        Location::Inside { triangle, bary } => (triangle, bary),
                        Location::Outside => {
                            projected += 1;
                            let q = mesh.nearest_boundary_point(foot);
                            match mesh.locate_point(q, Some(t)) {
                                Location::Inside { triangle, bary } => (triangle, bary),
                                Location::Outside => return Err(StepError::Unlocatable { x: foot[0], y: foot[1] }),
                            }
                        }
                    };
                    let v = fes.eval_velocity(u_prev, tri, bary);
                    for i in 0..6 {
                        k[i] += qp.weight * v[0] * qp.phi[i] / dt;
                        k[6 + i] += qp.weight * v[1] * qp.phi[i] / dt;
                    }
                }
                Ok((k, projected))
            })
            .collect();
        let mut r = vec![0.0; fes.n_u()];
        let mut projected = 0;
        for (t, res) in local.into_iter().enumerate() {
            let (k, p) = res?;
            projected += p;
            let s = fes.scalar_dofs(t);
            for i in 0..6 {
                r[s[i]] += k[i];
                r[n_s + s[i]] += k[6 + i];
            }
        }
        Ok((r, projected))
    }

    /// One step from `prev` to time `t_n` with body force `f(·, t_n)`.
    pub fn step(&mut self, prev: &State, t_n: f64, f: &Forcing) -> Result<(State, StepDiagnostics), StepError> {
        let fes = self.fes;
        let u_prev = &prev.u;
        let umax = (0..fes.n_scalar())
            .map(|s| u_prev[s].hypot(u_prev[fes.n_scalar() + s]))
            .fold(0.0, f64::max);
        let cfl = umax * self.dt / self.h_min;
        if cfl > 1.0 && !self.cfl_warned {
            log::warn!(
                "upwind feet may leave the neighbouring element layer: max|u| dt / h_min = {cfl:.2} at t = {t_n}"
            );
            self.cfl_warned = true;
        }
        let outflow_cfl = outflow_courant(fes, u_prev, self.dt);
        if self.spec.outflow == OutflowKind::Cbc && outflow_cfl > CBC_OUTFLOW_CFL && !self.outflow_warned {
            log::warn!(
                "semi-implicit convective outflow term is likely unstable: \
                 max (u·n)+ dt / h on the outflow boundary = {outflow_cfl:.3} at t = {t_n} (safe below about {CBC_OUTFLOW_CFL})"
            );
            self.outflow_warned = true;
        }

        let (mut rhs, projected) = self.transported(u_prev)?;
        let load = fem::assemble_load(fes, |x| f(x, t_n));
        for (r, l) in rhs.iter_mut().zip(&load) {
            *r += l;
        }
        rhs.resize(fes.n_total(), 0.0);
        let fixed = physical_dirichlet(fes, self.spec, t_n);

        let x = if self.spec.outflow == OutflowKind::Dn {
            if self.frozen.is_none() {
                let (k, _) = eliminate(&self.base, &rhs, &fixed)?;
                self.frozen = Some(self.lu.factor(&k)?);
            }
            // only the right-hand side changes: redo the lifting of the data
            let b = eliminate_rhs(&self.base, &rhs, &fixed);
            self.frozen.as_ref().expect("factored above").solve(&b)?
        } else {
            let a = self.matrix(u_prev)?;
            let (k, b) = eliminate(&a, &rhs, &fixed)?;
            self.lu.factor(&k)?.solve(&b)?
        };
        let mut state = State::from_vec(fes, &x);
        state.t = Some(t_n);

        let diff: Vec<f64> = state.u.iter().zip(u_prev).map(|(a, b)| a - b).collect();
        let diag = StepDiagnostics {
            step: 0,
            t: t_n,
            div_residual: self.div_residual(&state.u)?,
            outflow_flux: outflow_flux(fes, &state.u),
            l2_u: self.mass.bilinear(&state.u, &state.u).max(0.0).sqrt(),
            rate: self.mass.bilinear(&diff, &diff).max(0.0).sqrt() / self.dt,
            projected_feet: projected,
            cfl,
            outflow_cfl,
        };
        Ok((state, diag))
    }

    fn div_residual(&self, u: &[f64]) -> Result<f64, LinalgError> {
        let r = self.fes.b().matvec(u);
        let y = self.pressure_mass.solve(&r)?;
        Ok(fem::dot(&r, &y).max(0.0).sqrt())
    }
}

/// Right-hand side of [`eliminate`] without rebuilding the matrix.
fn eliminate_rhs(a: &SparseMatrix, b: &[f64], fixed: &[Option<f64>]) -> Vec<f64> {
    let mut rhs = b.to_vec();
    for i in 0..a.nrows() {
        if let Some(g) = fixed[i] {
            rhs[i] = g;
            continue;
        }
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if let Some(g) = fixed[j] {
                rhs[i] -= v * g;
            }
        }
    }
    rhs
}

/// `∫_Γ₁ u·n ds`, zero when there is no outflow boundary.
pub fn outflow_flux(fes: &FESystem, u: &[f64]) -> f64 {
    let mut flux = 0.0;
    fem::for_each_edge_point(fes, BoundaryTag::OutflowOne, |t, ep| {
        let v = fes.eval_velocity(u, t, ep.bary);
        flux += ep.weight * (v[0] * ep.normal[0] + v[1] * ep.normal[1]);
    });
    flux
}

/// Above this outflow Courant number the semi-implicit convective outflow
/// term was observed to amplify, on channel flows at `ν = 1/250` with
/// meshes from 8 to 32 cells across the outlet.
pub const CBC_OUTFLOW_CFL: f64 = 0.03;

/// `max (u·n)⁺ Δt / |e|` over the outflow edges `e`, with `u·n` sampled at
/// the three P2 nodes of each edge.
pub fn outflow_courant(fes: &FESystem, u: &[f64], dt: f64) -> f64 {
    let mesh = fes.mesh();
    let (n_s, n_v) = (fes.n_scalar(), mesh.n_nodes());
    let mut worst: f64 = 0.0;
    for b in mesh.boundary_edges().iter().filter(|b| b.tag == BoundaryTag::OutflowOne) {
        let (n, len) = mesh.edge_normal(b);
        for s in [b.nodes[0], b.nodes[1], n_v + b.edge] {
            let un = u[s] * n[0] + u[n_s + s] * n[1];
            worst = worst.max(un.max(0.0) * dt / len);
        }
    }
    worst
}

/// Single step with a throwaway stepper.
pub fn lg_step(
    fes: &FESystem,
    spec: &BoundarySpec,
    nu: f64,
    f: &Forcing,
    prev: &State,
    dt: f64,
    t_n: f64,
) -> Result<State, StepError> {
    Ok(LgStepper::new(fes, spec, nu, dt)?.step(prev, t_n, f)?.0)
}

/// Default initial velocity: the Stokes lifting of the inflow data at `t = 0`.
pub fn default_initial_velocity(fes: &FESystem, spec: &BoundarySpec) -> Result<Vec<f64>, BoundaryError> {
    Ok(build_lifting(fes, spec, 0.0)?.w0)
}

/// Largest mismatch between `u0` and the inflow data on the inflow nodes.
pub fn inflow_mismatch(fes: &FESystem, spec: &BoundarySpec, u0: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for s in 0..fes.n_scalar() {
        if fes.node_tag(s) == Some(BoundaryTag::InflowN) {
            let g = spec.inflow_at(fes.node_coord(s), 0.0);
            worst = worst.max((u0[s] - g[0]).abs()).max((u0[fes.n_scalar() + s] - g[1]).abs());
        }
    }
    worst
}

/// Runs `N = ⌊T/Δt⌋` steps from `u0`. A failing step stops the run; the
/// trajectory up to that point is returned with `complete = false`.
pub fn run_transient(
    fes: &FESystem,
    spec: &BoundarySpec,
    nu: f64,
    f: &Forcing,
    u0: &[f64],
    tcfg: &TimeConfig,
) -> Result<Trajectory, StepError> {
    tcfg.validate().map_err(StepError::Config)?;
    if u0.len() != fes.n_u() {
        return Err(StepError::Config(format!("initial velocity has length {}, expected {}", u0.len(), fes.n_u())));
    }
    spec.validate(fes, 0.0)?;
    let mismatch = inflow_mismatch(fes, spec, u0);
    if mismatch > 1e-8 {
        log::warn!("initial velocity differs from the inflow data by {mismatch:.3e}");
    }
    let mut stepper = LgStepper::new(fes, spec, nu, tcfg.dt)?;
    let n = tcfg.n_steps();
    let wanted = tcfg.capture_steps();
    let mut state = State { u: u0.to_vec(), p: vec![0.0; fes.n_p()], t: Some(0.0) };
    let mut traj = Trajectory { captures: Vec::new(), diagnostics: Vec::with_capacity(n), complete: true, error: None, last: state.clone() };
    if wanted.first() == Some(&0) {
        traj.captures.push(Capture { step: 0, t: 0.0, state: state.clone() });
    }
    for k in 1..=n {
        let t_n = k as f64 * tcfg.dt;
        match stepper.step(&state, t_n, f) {
            Ok((next, mut d)) => {
                d.step = k;
                log::debug!("step {k}/{n} t = {t_n:.4} |u| = {:.6e} rate = {:.3e}", d.l2_u, d.rate);
                traj.diagnostics.push(d);
                state = next;
                if wanted.binary_search(&k).is_ok() {
                    traj.captures.push(Capture { step: k, t: t_n, state: state.clone() });
                }
            }
            Err(e) => {
                log::error!("step {k} at t = {t_n} failed: {e}");
                traj.complete = false;
                traj.error = Some(format!("step {k} (t = {t_n}): {e}"));
                break;
            }
        }
    }
    traj.last = state;
    Ok(traj)
}
