//! JSON scenario files.
//!
//! ```json
//! {
//!   "geometry": { "width": 1, "height": 1, "nx": 16, "ny": 16, "dirichlet": ["left"] },
//!   "law": { "p": 3, "eps_reg": 0 },
//!   "time": { "T": 1, "n": [32, 64, 128] },
//!   "crack": { "path": [[0.25, 0.5], [0.75, 0.5]], "release_times": [0.3, null] },
//!   "loads": { "f": [], "z": [], "u0": [], "u1": [] },
//!   "solver": { "newton_tol": 1e-10 },
//!   "outputs": { "ledger": "ledger.csv", "snapshot_stride": 4 }
//! }
//! ```
//!
//! Unknown keys are rejected. `null` release times never release;
//! `eps_reg` may be `"coupled"` for `ε = 1/n`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constitutive::PowerLaw;
use crate::domain::{build_rect_mesh_with, insert_crack, CrackPath, CrackedSpace, RectSide};
use crate::error::{MeshError, ScenarioError, SolverError};
use crate::loads::LoadData;
use crate::stepper::{EpsRegPolicy, Model, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default = "one")]
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "default_dirichlet")]
    pub dirichlet: Vec<RectSide>,
}

fn one() -> f64 {
    1.0
}

fn default_dirichlet() -> Vec<RectSide> {
    vec![RectSide::Left]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsReg {
    Value(f64),
    Named(EpsRegName),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsRegName {
    Coupled,
}

impl Default for EpsReg {
    fn default() -> Self {
        EpsReg::Value(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    pub p: f64,
    #[serde(default)]
    pub eps_reg: EpsReg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepCount {
    Single(usize),
    List(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub n: StepCount,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrackSpec {
    /// Polyline corners; every segment between corners must run along mesh edges.
    pub path: Vec<[f64; 2]>,
    /// One entry per mesh edge of the path, `null` for never.
    pub release_times: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub hessian_floor: Option<f64>,
    pub warm_start: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_ledger")]
    pub ledger: String,
    /// Defaults to `⌈n/10⌉`; 0 disables snapshots.
    pub snapshot_stride: Option<usize>,
    #[serde(default = "yes")]
    pub summary: bool,
    /// Smallest crack growth counted as growth by the paradox check.
    pub paradox_min_crack: Option<f64>,
}

fn default_ledger() -> String {
    "ledger.csv".into()
}

fn yes() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            ledger: default_ledger(),
            snapshot_stride: None,
            summary: true,
            paradox_min_crack: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub geometry: Geometry,
    pub law: LawSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub crack: Option<CrackSpec>,
    #[serde(default)]
    pub loads: LoadData,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

/// A validated scenario with its discretised domain.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub scenario: Scenario,
    pub model: Model,
    pub warnings: Vec<String>,
}

fn invalid(assumption: &'static str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        assumption,
        message: message.into(),
    }
}

fn mesh_error(e: MeshError) -> ScenarioError {
    let assumption = match e {
        MeshError::ReleaseNotMonotone { .. } => "(E4)",
        MeshError::CrackTouchesBoundary(_) => "(E1)",
        MeshError::InvalidReleaseTime(_) | MeshError::ReleaseCountMismatch { .. } => "crack release times",
        _ => "geometry",
    };
    invalid(assumption, e.to_string())
}

impl Scenario {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn n_values(&self) -> Vec<usize> {
        match &self.time.n {
            StepCount::Single(n) => vec![*n],
            StepCount::List(v) => v.clone(),
        }
    }

    pub fn finest_n(&self) -> usize {
        self.n_values().into_iter().max().unwrap_or(1)
    }

    pub fn eps_policy(&self) -> EpsRegPolicy {
        match self.law.eps_reg {
            EpsReg::Value(v) => EpsRegPolicy::Fixed(v),
            EpsReg::Named(EpsRegName::Coupled) => EpsRegPolicy::Coupled,
        }
    }

    /// Solver settings for `n` steps.
    pub fn solver_config(&self, n: usize) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            n,
            newton_tol: self.solver.newton_tol.unwrap_or(d.newton_tol),
            newton_max_iter: self.solver.newton_max_iter.unwrap_or(d.newton_max_iter),
            hessian_floor: self.solver.hessian_floor.unwrap_or(d.hessian_floor),
            eps_reg_policy: self.eps_policy(),
            warm_start: self.solver.warm_start.unwrap_or(d.warm_start),
        }
    }

    pub fn snapshot_stride(&self, n: usize) -> usize {
        self.outputs.snapshot_stride.unwrap_or(n.div_ceil(10))
    }

    /// Validates everything and builds the cracked domain.
    pub fn prepare(self) -> Result<Prepared, ScenarioError> {
        if !(self.law.p > 1.0 && self.law.p.is_finite()) {
            return Err(invalid("p > 1", format!("exponent p = {}", self.law.p)));
        }
        if let EpsReg::Value(e) = self.law.eps_reg {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(invalid("eps_reg >= 0", format!("eps_reg = {e}")));
            }
        }
        let t_final = self.time.t_final;
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(invalid("T > 0", format!("T = {t_final}")));
        }
        let ns = self.n_values();
        if ns.is_empty() || ns.contains(&0) {
            return Err(invalid("n >= 1", format!("step counts {ns:?}")));
        }
        for n in &ns {
            self.solver_config(*n)
                .validate()
                .map_err(|e| invalid("solver", e.to_string()))?;
        }
        self.loads.validate().map_err(|m| invalid("(D1)", m))?;
        if self.outputs.ledger.is_empty() {
            return Err(invalid("outputs", "ledger path is empty"));
        }

        let g = &self.geometry;
        let mesh = build_rect_mesh_with(g.width, g.height, g.nx, g.ny, &g.dirichlet).map_err(mesh_error)?;
        let mut warnings = Vec::new();
        let space = match &self.crack {
            None => CrackedSpace::uncracked(&mesh).map_err(mesh_error)?,
            Some(c) => {
                let mut times = Vec::with_capacity(c.release_times.len());
                for (i, r) in c.release_times.iter().enumerate() {
                    let r = r.unwrap_or(f64::INFINITY);
                    if r.is_finite() && r > t_final {
                        return Err(invalid(
                            "release time <= T",
                            format!("segment {i} releases at {r} after T = {t_final}; use null for never"),
                        ));
                    }
                    times.push(r);
                }
                let path = CrackPath::from_polyline(&mesh, &c.path, times).map_err(mesh_error)?;
                let space = insert_crack(&mesh, path).map_err(mesh_error)?;
                let (left, right) = space.dirichlet_sides();
                if !(left && right) {
                    warnings.push(
                        "(E3): the Dirichlet boundary does not reach both sides of the crack; \
                         coercivity of the released problem is not guaranteed"
                            .to_string(),
                    );
                }
                space
            }
        };
        self.loads
            .check_compatibility(&space)
            .map_err(|e| match e {
                SolverError::IncompatibleData { assumption, message } => invalid(assumption, message),
                other => invalid("(D3)", other.to_string()),
            })?;
        let model = Model {
            space,
            law: PowerLaw::new(self.law.p, 0.0).map_err(|e| invalid("p > 1", e.to_string()))?,
            loads: self.loads.clone(),
            t_final,
        };
        Ok(Prepared {
            scenario: self,
            model,
            warnings,
        })
    }
}

/// Reads, parses and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Prepared, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_json(&text, &path.display().to_string())?.prepare()
}
