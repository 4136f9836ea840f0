//! Closed, parameterised families of body forces, Dirichlet data and initial data.
//!
//! Every field is separable: `direction · spatial(x) · time(t)`. The spatial
//! factor is one of `1`, `x`, `y` (raw coordinates), the time factor a
//! constant, a polynomial of degree at most two, or a sinusoid. All of them are
//! smooth in time, so body forces are square integrable and Dirichlet data have
//! two continuous time derivatives.

use serde::{Deserialize, Serialize};

use crate::domain::{CrackedSpace, Point2};
use crate::error::SolverError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TimeProfile {
    Constant {
        value: f64,
    },
    /// `c₀ + c₁t + c₂t²`; fewer coefficients mean a lower degree.
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// `A·sin(ωt + φ)`.
    Sinusoidal {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl TimeProfile {
    pub fn validate(&self) -> Result<(), String> {
        let finite = |x: f64| x.is_finite();
        match self {
            TimeProfile::Constant { value } if !finite(*value) => {
                Err("constant value must be finite".into())
            }
            TimeProfile::Polynomial { coefficients } => {
                if coefficients.is_empty() || coefficients.len() > 3 {
                    Err(format!(
                        "polynomial needs 1 to 3 coefficients, got {}",
                        coefficients.len()
                    ))
                } else if !coefficients.iter().copied().all(finite) {
                    Err("polynomial coefficients must be finite".into())
                } else {
                    Ok(())
                }
            }
            TimeProfile::Sinusoidal {
                amplitude,
                omega,
                phase,
            } if !(finite(*amplitude) && finite(*omega) && finite(*phase)) => {
                Err("sinusoid parameters must be finite".into())
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant { value } => *value,
            TimeProfile::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, &c| acc * t + c)
            }
            TimeProfile::Sinusoidal {
                amplitude,
                omega,
                phase,
            } => amplitude * (omega * t + phase).sin(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant { .. } => 0.0,
            TimeProfile::Polynomial { coefficients } => {
                let c = |i: usize| coefficients.get(i).copied().unwrap_or(0.0);
                c(1) + 2.0 * c(2) * t
            }
            TimeProfile::Sinusoidal {
                amplitude,
                omega,
                phase,
            } => amplitude * omega * (omega * t + phase).cos(),
        }
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant { .. } => 0.0,
            TimeProfile::Polynomial { coefficients } => {
                2.0 * coefficients.get(2).copied().unwrap_or(0.0)
            }
            TimeProfile::Sinusoidal {
                amplitude,
                omega,
                phase,
            } => -amplitude * omega * omega * (omega * t + phase).sin(),
        }
    }

    /// Mean over `[a, b]`, exact for every family.
    pub fn average(&self, a: f64, b: f64) -> f64 {
        match *self {
            TimeProfile::Sinusoidal {
                amplitude,
                omega,
                phase,
            } => {
                // A·sin(ω m + φ)·sin(ω h)/(ω h) with midpoint m and half-width h
                let x = 0.5 * omega * (b - a);
                let sinc = if x.abs() < 1e-4 { 1.0 - x * x / 6.0 } else { x.sin() / x };
                amplitude * (0.5 * omega * (a + b) + phase).sin() * sinc
            }
            _ => gauss3_average(|t| self.value(t), a, b),
        }
    }
}

/// Three-point Gauss–Legendre mean of `f` over `[a, b]`.
pub fn gauss3_average(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let off = half * (0.6f64).sqrt();
    (5.0 * f(mid - off) + 8.0 * f(mid) + 5.0 * f(mid + off)) / 18.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialProfile {
    Uniform,
    LinearX,
    LinearY,
}

impl SpatialProfile {
    pub fn value(&self, p: Point2) -> f64 {
        match self {
            SpatialProfile::Uniform => 1.0,
            SpatialProfile::LinearX => p[0],
            SpatialProfile::LinearY => p[1],
        }
    }
}

/// Time-dependent vector field `direction · spatial(x) · time(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadField {
    pub direction: [f64; 2],
    #[serde(default = "uniform")]
    pub profile: SpatialProfile,
    pub time: TimeProfile,
}

/// Time-independent vector field `direction · spatial(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialField {
    pub direction: [f64; 2],
    #[serde(default = "uniform")]
    pub profile: SpatialProfile,
}

fn uniform() -> SpatialProfile {
    SpatialProfile::Uniform
}

fn superpose(space: &CrackedSpace, fields: &[LoadField], time: impl Fn(&TimeProfile) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; space.field_len()];
    for field in fields {
        let s = time(&field.time);
        if s == 0.0 {
            continue;
        }
        for (n, &p) in space.node_coords().iter().enumerate() {
            let w = s * field.profile.value(p);
            out[2 * n] += w * field.direction[0];
            out[2 * n + 1] += w * field.direction[1];
        }
    }
    out
}

/// Body force, Dirichlet lifting and initial data of one simulation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadData {
    #[serde(default)]
    pub f: Vec<LoadField>,
    #[serde(default)]
    pub z: Vec<LoadField>,
    #[serde(default)]
    pub u0: Vec<InitialField>,
    #[serde(default)]
    pub u1: Vec<InitialField>,
}

impl LoadData {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn body_force(&self, space: &CrackedSpace, t: f64) -> Vec<f64> {
        superpose(space, &self.f, |p| p.value(t))
    }

    /// Mean body force over `((k-1)τ, kτ]`.
    pub fn f_average(&self, space: &CrackedSpace, k: usize, tau: f64) -> Vec<f64> {
        let (a, b) = ((k as f64 - 1.0) * tau, k as f64 * tau);
        superpose(space, &self.f, |p| p.average(a, b))
    }

    /// Nodal interpolant of the Dirichlet lifting `z(t)` on the whole domain.
    pub fn z(&self, space: &CrackedSpace, t: f64) -> Vec<f64> {
        superpose(space, &self.z, |p| p.value(t))
    }

    pub fn z_dot(&self, space: &CrackedSpace, t: f64) -> Vec<f64> {
        superpose(space, &self.z, |p| p.derivative(t))
    }

    pub fn z_ddot(&self, space: &CrackedSpace, t: f64) -> Vec<f64> {
        superpose(space, &self.z, |p| p.second_derivative(t))
    }

    fn initial(space: &CrackedSpace, fields: &[InitialField]) -> Vec<f64> {
        let mut out = vec![0.0; space.field_len()];
        for field in fields {
            for (n, &p) in space.node_coords().iter().enumerate() {
                let w = field.profile.value(p);
                out[2 * n] += w * field.direction[0];
                out[2 * n + 1] += w * field.direction[1];
            }
        }
        out
    }

    pub fn u0(&self, space: &CrackedSpace) -> Vec<f64> {
        Self::initial(space, &self.u0)
    }

    pub fn u1(&self, space: &CrackedSpace) -> Vec<f64> {
        Self::initial(space, &self.u1)
    }

    pub fn validate(&self) -> Result<(), String> {
        for field in self.f.iter().chain(&self.z) {
            field.time.validate()?;
            if !field.direction.iter().all(|d| d.is_finite()) {
                return Err("load direction must be finite".into());
            }
        }
        for field in self.u0.iter().chain(&self.u1) {
            if !field.direction.iter().all(|d| d.is_finite()) {
                return Err("initial-data direction must be finite".into());
            }
        }
        Ok(())
    }

    /// Checks that `u⁰ = z(0)` and `u¹ = ż(0)` on the Dirichlet nodes.
    pub fn check_compatibility(&self, space: &CrackedSpace) -> Result<(), SolverError> {
        let checks = [
            ("u0", self.u0(space), self.z(space, 0.0)),
            ("u1", self.u1(space), self.z_dot(space, 0.0)),
        ];
        for (name, initial, boundary) in checks {
            for (n, &fixed) in space.dirichlet_nodes().iter().enumerate() {
                if !fixed {
                    continue;
                }
                for c in 0..2 {
                    let (a, b) = (initial[2 * n + c], boundary[2 * n + c]);
                    if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                        let p = space.node_coords()[n];
                        let reference = if name == "u0" { "z(0)" } else { "dz/dt(0)" };
                        return Err(SolverError::IncompatibleData {
                            assumption: "(D3)",
                            message: format!(
                                "{name} = {a} differs from {reference} = {b} at Dirichlet node ({}, {})",
                                p[0], p[1]
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}
