//! Declarative experiments: geometry, viscosity, forcing, boundary
//! conditions and solver controls, read from TOML files or built-in presets.
//!
//! A scenario describes one base configuration plus an optional sweep over
//! viscosities, outflow conditions and (for the unit square) mesh sizes.
//! [`run`] expands the sweep, solves every point and writes the results
//! under an output directory together with a JSON manifest.

pub mod mms;
mod report;
mod run;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::boundary::{InflowProfile, OutflowKind};
use crate::mesh::{
    generate_bifurcation, generate_cylinder_channel, generate_cylinder_channel_graded, generate_unit_square, load_mesh,
    BoundaryTag, Mesh, MeshError, Point,
};
use crate::nonlinear::NewtonConfig;
use crate::timestepper::TimeConfig;

pub use report::{write_report, ReportSummary};
pub use run::{
    gamma_rows, run, CaptureRecord, GammaRow, MeshRecord, NewtonSummary, PointRecord, PointStatus, RunError, RunManifest,
    RunOptions, TransientSummary, GAMMA_HEADER, MANIFEST_SCHEMA,
};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown preset `{name}`; available presets: {}", PRESET_NAMES.join(", "))]
    UnknownPreset { name: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("bad override `{0}`: {1}")]
    Override(String, String),
}

/// Positive viscosity. Reads a number or a fraction such as `"1/250"`;
/// reciprocals of integers are written back as fractions.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Nu(pub f64);

impl Nu {
    pub fn value(self) -> f64 {
        self.0
    }

    /// `k` when `ν = 1/k` for an integer `k`.
    pub fn reciprocal_integer(self) -> Option<u64> {
        let k = 1.0 / self.0;
        let r = k.round();
        ((k - r).abs() <= 1e-9 * r.max(1.0) && r >= 1.0).then_some(r as u64)
    }

    /// Plot abscissa: `0` at `ν = 1`, `1/(10ν)` otherwise.
    pub fn plot_x(self) -> f64 {
        if self.0 == 1.0 {
            0.0
        } else {
            1.0 / (10.0 * self.0)
        }
    }

    /// Filesystem-safe label, e.g. `1_250`.
    pub fn slug(self) -> String {
        self.to_string().replace('/', "_")
    }
}

impl fmt::Display for Nu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.reciprocal_integer() {
            Some(1) => f.write_str("1"),
            Some(k) => write!(f, "1/{k}"),
            None => write!(f, "{}", self.0),
        }
    }
}

impl std::str::FromStr for Nu {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let v = match s.split_once('/') {
            Some((a, b)) => {
                let a: f64 = a.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
                let b: f64 = b.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
                a / b
            }
            None => s.parse().map_err(|_| format!("`{s}` is not a viscosity"))?,
        };
        Ok(Nu(v))
    }
}

impl Serialize for Nu {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.reciprocal_integer() {
            Some(_) => s.serialize_str(&self.to_string()),
            None => s.serialize_f64(self.0),
        }
    }
}

impl<'de> Deserialize<'de> for Nu {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Nu(v)),
            Raw::Int(v) => Ok(Nu(v as f64)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    UnitSquare {
        n: usize,
    },
    Bifurcation {
        h: f64,
    },
    Cylinder {
        h: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h_far: Option<f64>,
    },
    File {
        path: PathBuf,
    },
}

impl Geometry {
    pub fn name(&self) -> &'static str {
        match self {
            Geometry::UnitSquare { .. } => "unit_square",
            Geometry::Bifurcation { .. } => "bifurcation",
            Geometry::Cylinder { .. } => "cylinder",
            Geometry::File { .. } => "file",
        }
    }

    pub fn build(&self) -> Result<Mesh, MeshError> {
        match self {
            Geometry::UnitSquare { n } => generate_unit_square(*n),
            Geometry::Bifurcation { h } => generate_bifurcation(*h),
            Geometry::Cylinder { h, h_far: None } => generate_cylinder_channel(*h),
            Geometry::Cylinder { h, h_far: Some(f) } => generate_cylinder_channel_graded(*h, *f),
            Geometry::File { path } => load_mesh(path),
        }
    }

    /// Fixed constants of the generated domain, for manifests.
    pub fn constants(&self) -> serde_json::Value {
        use crate::mesh::{BIFURCATION_WALL, CYLINDER_RADIUS};
        match self {
            Geometry::UnitSquare { n } => serde_json::json!({
                "domain": [[0.0, 0.0], [1.0, 1.0]],
                "n": n,
                "outflow": "x = 0",
            }),
            Geometry::Bifurcation { h } => serde_json::json!({
                "h": h,
                "wall": BIFURCATION_WALL.iter().map(|(p, t)| serde_json::json!({"vertex": p, "segment": t.token()})).collect::<Vec<_>>(),
                "inflow": "x = 0, |y| <= 1/2",
            }),
            Geometry::Cylinder { h, h_far } => serde_json::json!({
                "h": h,
                "h_far": h_far.unwrap_or(3.0 * h),
                "channel": [[-1.5, -1.0], [6.0, 1.0]],
                "cylinder_center": [0.0, 0.0],
                "cylinder_radius": CYLINDER_RADIUS,
                "inflow": "x = -1.5",
                "outflow": "x = 6",
            }),
            Geometry::File { path } => serde_json::json!({ "path": path }),
        }
    }
}

/// Named body force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Forcing {
    /// `f = (sin x + sin y, 0)`.
    SinSum,
    Zero,
    /// Manufactured forcing and outflow traction; unit square only.
    Mms,
}

impl Forcing {
    pub fn eval(self, x: Point, nu: f64) -> [f64; 2] {
        match self {
            Forcing::SinSum => [x[0].sin() + x[1].sin(), 0.0],
            Forcing::Zero => [0.0, 0.0],
            Forcing::Mms => mms::Manufactured::new(nu).forcing(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Stationary,
    Transient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub nu: Nu,
    pub forcing: Forcing,
    pub outflow: OutflowKind,
    /// Inflow profile name; absent for homogeneous problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflow: Option<String>,
    pub mode: Mode,
}

/// Initial velocity of a transient run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    /// Stokes extension of the inflow data at `t = 0`.
    #[default]
    Lifting,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSettings {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub captures: Vec<f64>,
    #[serde(default)]
    pub initial: InitialData,
}

impl TimeSettings {
    pub fn config(&self) -> Result<TimeConfig, String> {
        TimeConfig::new(self.dt, self.t_final, self.captures.clone())
    }
}

/// Parameter lists; an empty list keeps the base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub nu: Vec<Nu>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub outflow: Vec<OutflowKind>,
    /// Unit-square resolutions.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub vtk: bool,
    pub stream_function: bool,
    /// Boundary tag token over which the nonlinear outflow is integrated.
    pub gamma_tag: String,
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings { vtk: true, stream_function: false, gamma_tag: BoundaryTag::OutflowOne.token().into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub geometry: Geometry,
    pub physics: Physics,
    #[serde(default)]
    pub solver: NewtonConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSettings>,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub output: OutputSettings,
}

/// One expanded sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub id: String,
    pub nu: Nu,
    pub outflow: OutflowKind,
    pub geometry: Geometry,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn inflow_profile(&self) -> Option<InflowProfile> {
        self.physics.inflow.as_deref().and_then(InflowProfile::from_name)
    }

    pub fn gamma_tag(&self) -> Option<BoundaryTag> {
        BoundaryTag::from_token(&self.output.gamma_tag)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        for nu in std::iter::once(&self.physics.nu).chain(&self.sweep.nu) {
            if !(nu.0 > 0.0 && nu.0.is_finite()) {
                return bad(format!("viscosity must be positive, got {}", nu.0));
            }
        }
        if let Some(name) = &self.physics.inflow {
            if InflowProfile::from_name(name).is_none() {
                return bad(format!("unknown inflow profile `{name}`; known: {}", InflowProfile::NAMES.join(", ")));
            }
        }
        if self.gamma_tag().is_none() {
            return bad(format!("unknown boundary tag `{}`; use H, N or OUT", self.output.gamma_tag));
        }
        self.solver.validate().map_err(ScenarioError::Invalid)?;
        match (&self.physics.mode, &self.time) {
            (Mode::Transient, None) => return bad("transient mode needs a [time] section".into()),
            (Mode::Transient, Some(t)) => {
                t.config().map_err(ScenarioError::Invalid)?;
            }
            (Mode::Stationary, _) => {}
        }
        match &self.geometry {
            Geometry::UnitSquare { n } if *n < 2 => return bad(format!("unit square needs n >= 2, got {n}")),
            Geometry::Bifurcation { h } | Geometry::Cylinder { h, .. } if !(*h > 0.0) => {
                return bad(format!("mesh size must be positive, got {h}"))
            }
            _ => {}
        }
        if !self.sweep.n.is_empty() && !matches!(self.geometry, Geometry::UnitSquare { .. }) {
            return bad("sweep.n applies to the unit_square geometry only".into());
        }
        if self.sweep.n.iter().any(|&n| n < 2) {
            return bad("sweep.n entries must be at least 2".into());
        }
        if self.physics.forcing == Forcing::Mms {
            if !matches!(self.geometry, Geometry::UnitSquare { .. }) {
                return bad("mms forcing needs the unit_square geometry".into());
            }
            if self.physics.mode != Mode::Stationary || self.physics.inflow.is_some() {
                return bad("mms forcing is stationary and homogeneous".into());
            }
        }
        Ok(())
    }

    /// Sweep points in a fixed order: mesh size, then condition, then ν.
    pub fn points(&self) -> Vec<SweepPoint> {
        let nus = if self.sweep.nu.is_empty() { vec![self.physics.nu] } else { self.sweep.nu.clone() };
        let kinds = if self.sweep.outflow.is_empty() { vec![self.physics.outflow] } else { self.sweep.outflow.clone() };
        let geoms: Vec<Geometry> = if self.sweep.n.is_empty() {
            vec![self.geometry.clone()]
        } else {
            self.sweep.n.iter().map(|&n| Geometry::UnitSquare { n }).collect()
        };
        let mut out = Vec::new();
        for g in &geoms {
            for &kind in &kinds {
                for &nu in &nus {
                    let mut id = format!("{:03}-{}-nu{}", out.len(), kind, nu.slug());
                    if !self.sweep.n.is_empty() {
                        if let Geometry::UnitSquare { n } = g {
                            id.push_str(&format!("-n{n}"));
                        }
                    }
                    out.push(SweepPoint { id, nu, outflow: kind, geometry: g.clone() });
                }
            }
        }
        out
    }
}

const PRESETS: [(&str, &str); 8] = [
    ("fig2_cbc", include_str!("../../presets/fig2_cbc.toml")),
    ("fig2_dn", include_str!("../../presets/fig2_dn.toml")),
    ("fig3_cbc", include_str!("../../presets/fig3_cbc.toml")),
    ("fig3_dn", include_str!("../../presets/fig3_dn.toml")),
    ("fig4_sweep", include_str!("../../presets/fig4_sweep.toml")),
    ("fig6_all", include_str!("../../presets/fig6_all.toml")),
    ("fig7_all", include_str!("../../presets/fig7_all.toml")),
    ("mms_convergence", include_str!("../../presets/mms_convergence.toml")),
];

pub const PRESET_NAMES: [&str; 8] = {
    let mut names = [""; 8];
    let mut i = 0;
    while i < 8 {
        names[i] = PRESETS[i].0;
        i += 1;
    }
    names
};

/// TOML source of a built-in preset.
pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn preset(name: &str) -> Result<Scenario, ScenarioError> {
    let text = preset_source(name).ok_or_else(|| ScenarioError::UnknownPreset { name: name.into() })?;
    Scenario::from_toml(text)
}

/// Applies `key.path=value` assignments to TOML text. Values are read as
/// TOML (`0.5`, `[1, 2]`, `"cbc"`); anything that fails to parse is taken
/// as a bare string.
pub fn apply_overrides(text: &str, overrides: &[String]) -> Result<String, ScenarioError> {
    let mut root: toml::Table = text.parse().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
    for item in overrides {
        let err = |m: &str| ScenarioError::Override(item.clone(), m.into());
        let (key, raw) = item.split_once('=').ok_or_else(|| err("expected key=value"))?;
        let path: Vec<&str> = key.trim().split('.').collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(err("empty key segment"));
        }
        let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").expect("single assignment"),
            Err(_) => toml::Value::String(raw.trim().to_string()),
        };
        let mut table = &mut root;
        for seg in &path[..path.len() - 1] {
            let entry = table.entry(seg.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
            table = entry.as_table_mut().ok_or_else(|| err(&format!("`{seg}` is not a table")))?;
        }
        table.insert(path[path.len() - 1].to_string(), value);
    }
    Ok(toml::to_string(&root).expect("table serializes"))
}

/// Loads a preset by name or a TOML file by path, then applies overrides.
/// File geometries are resolved relative to the scenario file.
pub fn load_scenario(name_or_path: &str, overrides: &[String]) -> Result<Scenario, ScenarioError> {
    let (text, base) = match preset_source(name_or_path) {
        Some(t) => (t.to_string(), None),
        None => {
            let path = Path::new(name_or_path);
            if !path.exists() && !name_or_path.contains(['/', '.']) {
                return Err(ScenarioError::UnknownPreset { name: name_or_path.into() });
            }
            let text =
                std::fs::read_to_string(path).map_err(|e| ScenarioError::Io { path: path.to_path_buf(), source: e })?;
            (text, path.parent().map(Path::to_path_buf))
        }
    };
    let text = apply_overrides(&text, overrides)?;
    let mut s = Scenario::from_toml(&text)?;
    if let (Geometry::File { path }, Some(base)) = (&mut s.geometry, base) {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests;
