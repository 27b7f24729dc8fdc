//! Boundary conditions, inflow profiles and the discrete lifting of the
//! inflow data.

use std::fmt;
use std::sync::Arc;

use crate::fem::{self, FESystem};
use crate::linalg::{eliminate, lu_solve, LinalgError, SparseMatrix, Triplets};
use crate::mesh::{BoundaryTag, Point};

/// Treatment of the outflow boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutflowKind {
    /// Convective condition `σn = ½(u⊗u)n`.
    Cbc,
    /// Do-nothing, `σn = 0`.
    Dn,
    /// Directional do-nothing, `σn = ½(u·n)₋u`.
    Ddn,
}

impl OutflowKind {
    pub const ALL: [OutflowKind; 3] = [OutflowKind::Cbc, OutflowKind::Dn, OutflowKind::Ddn];

    pub fn name(self) -> &'static str {
        match self {
            OutflowKind::Cbc => "cbc",
            OutflowKind::Dn => "dn",
            OutflowKind::Ddn => "ddn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }

    /// Weight of the `-½∫(w·n)(u·v)` term inside `a₁`.
    pub fn gamma1_weight(self) -> f64 {
        match self {
            OutflowKind::Cbc => 1.0,
            OutflowKind::Dn | OutflowKind::Ddn => 0.0,
        }
    }
}

impl fmt::Display for OutflowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

type ProfileFn = Arc<dyn Fn(Point, f64) -> [f64; 2] + Send + Sync>;

/// Velocity prescribed on the inflow boundary.
#[derive(Clone)]
pub enum InflowProfile {
    /// `((1/2 − y)(1/2 + y), 0)`.
    PoiseuilleHalf,
    /// `((1 − y)(1 + y), 0)`.
    PoiseuilleUnit,
    Zero,
    Custom { name: String, f: ProfileFn, time_dependent: bool },
}

impl fmt::Debug for InflowProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl InflowProfile {
    pub const NAMES: [&'static str; 3] = ["poiseuille_half", "poiseuille_unit", "zero"];

    pub fn custom(name: impl Into<String>, f: impl Fn(Point, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        InflowProfile::Custom { name: name.into(), f: Arc::new(f), time_dependent: true }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "poiseuille_half" => Some(InflowProfile::PoiseuilleHalf),
            "poiseuille_unit" => Some(InflowProfile::PoiseuilleUnit),
            "zero" => Some(InflowProfile::Zero),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            InflowProfile::PoiseuilleHalf => "poiseuille_half",
            InflowProfile::PoiseuilleUnit => "poiseuille_unit",
            InflowProfile::Zero => "zero",
            InflowProfile::Custom { name, .. } => name,
        }
    }

    pub fn eval(&self, x: Point, t: f64) -> [f64; 2] {
        let y = x[1];
        match self {
            InflowProfile::PoiseuilleHalf => [(0.5 - y) * (0.5 + y), 0.0],
            InflowProfile::PoiseuilleUnit => [(1.0 - y) * (1.0 + y), 0.0],
            InflowProfile::Zero => [0.0, 0.0],
            InflowProfile::Custom { f, .. } => f(x, t),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, InflowProfile::Custom { time_dependent: true, .. })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BoundaryError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Outflow treatment plus inflow data.
#[derive(Debug, Clone)]
pub struct BoundarySpec {
    pub outflow: OutflowKind,
    pub inflow: Option<InflowProfile>,
}

impl BoundarySpec {
    pub fn new(outflow: OutflowKind, inflow: Option<InflowProfile>) -> Self {
        BoundarySpec { outflow, inflow }
    }

    /// Checks the boundary specification against the mesh tags and the flux compatibility
    /// condition. Returns the net inflow flux `∫_Γ_N u_in·n ds` at `t`.
    pub fn validate(&self, fes: &FESystem, t: f64) -> Result<f64, BoundaryError> {
        let has_inflow = fes.mesh().has_tag(BoundaryTag::InflowN);
        match (&self.inflow, has_inflow) {
            (None, true) => return Err(BoundaryError::Config("mesh has inflow edges but no inflow profile".into())),
            (Some(_), false) => {
                return Err(BoundaryError::Config("inflow profile given but mesh has no inflow edges".into()))
            }
            _ => {}
        }
        let flux = match &self.inflow {
            Some(p) => inflow_flux(fes, p, t),
            None => 0.0,
        };
        if flux.abs() > 1e-10 {
            if !fes.has_outflow() {
                return Err(BoundaryError::Config(format!(
                    "net inflow flux {flux:.3e} with no outflow boundary is incompatible"
                )));
            }
            log::debug!("net inflow flux {flux:.6e} is absorbed by the outflow boundary");
        }
        Ok(flux)
    }

    pub fn inflow_at(&self, x: Point, t: f64) -> [f64; 2] {
        self.inflow.as_ref().map_or([0.0, 0.0], |p| p.eval(x, t))
    }
}

/// `∫_Γ_N u_in·n ds` with the edge rule.
pub fn inflow_flux(fes: &FESystem, profile: &InflowProfile, t: f64) -> f64 {
    let mut flux = 0.0;
    fem::for_each_edge_point(fes, BoundaryTag::InflowN, |_, ep| {
        let v = profile.eval(ep.x, t);
        flux += ep.weight * (v[0] * ep.normal[0] + v[1] * ep.normal[1]);
    });
    flux
}

/// Prescribed values for the full `[u, p]` unknown vector. Velocity values
/// come from `value(node, tag)`; pressure unknown 0 is pinned to zero when
/// the mesh has no outflow boundary.
pub fn dirichlet_values(fes: &FESystem, value: impl Fn(Point, BoundaryTag) -> [f64; 2]) -> Vec<Option<f64>> {
    let mut fixed = vec![None; fes.n_total()];
    for s in 0..fes.n_scalar() {
        if let Some(tag) = fes.node_tag(s) {
            let v = value(fes.node_coord(s), tag);
            fixed[fes.velocity_dof(s, 0)] = Some(v[0]);
            fixed[fes.velocity_dof(s, 1)] = Some(v[1]);
        }
    }
    if !fes.has_outflow() {
        fixed[fes.n_u()] = Some(0.0);
    }
    fixed
}

/// Dirichlet values of the physical velocity: `u_in` on inflow nodes, zero on walls.
pub fn physical_dirichlet(fes: &FESystem, spec: &BoundarySpec, t: f64) -> Vec<Option<f64>> {
    dirichlet_values(fes, |x, tag| match tag {
        BoundaryTag::InflowN => spec.inflow_at(x, t),
        _ => [0.0, 0.0],
    })
}

/// Homogeneous Dirichlet data on the same unknowns.
pub fn homogeneous_dirichlet(fes: &FESystem) -> Vec<Option<f64>> {
    dirichlet_values(fes, |_, _| [0.0, 0.0])
}

/// Symmetric elimination of the prescribed unknowns.
pub fn apply_dirichlet(
    system: &SparseMatrix,
    rhs: &[f64],
    fixed: &[Option<f64>],
) -> Result<(SparseMatrix, Vec<f64>), LinalgError> {
    eliminate(system, rhs, fixed)
}

/// Stokes saddle-point matrix `[[ν A₀, Bᵀ], [B, 0]]`.
pub fn stokes_matrix(fes: &FESystem, nu: f64) -> SparseMatrix {
    let n = fes.n_total();
    let mut trips = Triplets::new(n, n);
    fem::add_a0(fes, &mut trips, nu, 0);
    fem::add_b_blocks(fes, &mut trips, 1.0, fes.n_u());
    trips.build().expect("indices in range")
}

/// Discrete divergence-free extension of the inflow data.
#[derive(Debug, Clone)]
pub struct Lifting {
    pub w0: Vec<f64>,
    /// `max_q |b(w0, q)| / ‖q‖_L²`.
    pub div_residual: f64,
    /// Inflow time the lifting was built for.
    pub t: f64,
}

/// Builds `w₀` as the velocity of a Stokes problem with `ν = 1`, `f = 0`,
/// do-nothing outflow, the inflow data on `Γ_N` and zero on the walls.
pub fn build_lifting(fes: &FESystem, spec: &BoundarySpec, t: f64) -> Result<Lifting, BoundaryError> {
    spec.validate(fes, t)?;
    let n_u = fes.n_u();
    if spec.inflow.is_none() || matches!(spec.inflow, Some(InflowProfile::Zero)) {
        return Ok(Lifting { w0: vec![0.0; n_u], div_residual: 0.0, t });
    }
    let a = stokes_matrix(fes, 1.0);
    let fixed = physical_dirichlet(fes, spec, t);
    let (k, rhs) = apply_dirichlet(&a, &vec![0.0; fes.n_total()], &fixed)?;
    let x = lu_solve(&k, &rhs).map_err(|e| match e {
        LinalgError::Singular { .. } => BoundaryError::Config(format!("Stokes lifting system is singular: {e}")),
        other => other.into(),
    })?;
    let w0 = x[..n_u].to_vec();
    let div_residual = divergence_residual(fes, &w0)?;
    Ok(Lifting { w0, div_residual, t })
}

/// `sup_q |b(u, q)| / ‖q‖_L² = sqrt(rᵀ M_p⁻¹ r)` with `r = B u`.
pub fn divergence_residual(fes: &FESystem, u: &[f64]) -> Result<f64, LinalgError> {
    let r = fes.b().matvec(u);
    if r.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let mp = fem::assemble_pressure_mass(fes);
    let y = lu_solve(&mp, &r)?;
    Ok(fem::dot(&r, &y).max(0.0).sqrt())
}

/// Right-hand side `⟨Φ, v⟩ = ⟨f, v⟩ − ν a₀(w₀, v) − a₁(w₀; w₀, v)` of the
/// lifted problem, given the assembled load `⟨f, ·⟩`.
pub fn assemble_phi(fes: &FESystem, load: &[f64], w0: &[f64], nu: f64, gamma1_weight: f64) -> Vec<f64> {
    if w0.iter().all(|&v| v == 0.0) {
        return load.to_vec();
    }
    let a0w = fes.a0().matvec(w0);
    let c = fem::a1_action(fes, w0, w0, gamma1_weight);
    load.iter().zip(&a0w).zip(&c).map(|((l, a), c)| l - nu * a - c).collect()
}
