//! Energy ledger of a discrete trajectory.
//!
//! With `𝓔 = ½‖u̇‖²_H + (1/p')‖eu‖_{p'}^{p'}`, viscous dissipation `𝓥` and
//! total work `𝒲`, the Kelvin-Voigt balance reads `𝓔(s) + 𝓥(0,s) = 𝓔(0) + 𝒲(0,s)`.
//! All time integrals are right-endpoint sums over the grid.

use std::io::{self, Write};

use crate::constitutive::PowerLaw;
use crate::domain::CrackedSpace;
use crate::error::ParadoxError;
use crate::loads::LoadData;
use crate::stepper::{h_inner, h_norm_squared, StepState, Trajectory};

pub const LEDGER_HEADER: &str =
    "k,t,kinetic,elastic,viscous_cum,work_cum,crack_cum,residual_kv,residual_general";

/// One grid node of the ledger. Increments refer to `((k−1)τ, kτ]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LedgerRow {
    pub k: usize,
    pub t: f64,
    pub kinetic: f64,
    pub elastic: f64,
    pub viscous_inc: f64,
    pub viscous_cum: f64,
    /// `τ(f_k, δu_k − δz_k)`, `τ(δ²u_k, δz_k)`, `τ(σ_k, eδz_k)`
    pub work_inc: [f64; 3],
    pub work_cum_terms: [f64; 3],
    pub work_cum: f64,
    pub crack_inc: f64,
    pub crack_cum: f64,
    /// `τ(σ_k, eδu_k)`
    pub stress_power_inc: f64,
    pub stress_power_cum: f64,
    pub residual_kv: f64,
    pub residual_general: f64,
}

impl LedgerRow {
    pub fn mechanical(&self) -> f64 {
        self.kinetic + self.elastic
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

/// `½‖δu‖²_H + (1/p')Σ area·|eu|^{p'}`.
pub fn mech_energy(space: &CrackedSpace, state: &StepState, law: &PowerLaw) -> f64 {
    kinetic_energy(space, &state.du) + elastic_energy(space, &state.u, law)
}

pub fn kinetic_energy(space: &CrackedSpace, du: &[f64]) -> f64 {
    0.5 * h_norm_squared(space, du)
}

pub fn elastic_energy(space: &CrackedSpace, u: &[f64], law: &PowerLaw) -> f64 {
    let q = law.conjugate_exponent();
    space
        .geometry()
        .iter()
        .enumerate()
        .map(|(e, g)| g.area * space.strain_of_element(e, u).norm().powf(q))
        .sum::<f64>()
        / q
}

/// `τ Σ area·(G⁻¹(eu + eδu) − G⁻¹(eu))·eδu` with the unregularised law.
pub fn viscous_increment(space: &CrackedSpace, state: &StepState, law: &PowerLaw, tau: f64) -> f64 {
    let plain = law.unregularised();
    tau * space
        .geometry()
        .iter()
        .enumerate()
        .map(|(e, g)| {
            let eu = space.strain_of_element(e, &state.u);
            let edu = space.strain_of_element(e, &state.du);
            g.area * (plain.g_inverse(&(eu + edu)) - plain.g_inverse(&eu)).dot(&edu)
        })
        .sum::<f64>()
}

/// The three work terms of step `k ≥ 1`; `dz = (z_k − z_{k−1})/τ`.
pub fn work_increment(
    space: &CrackedSpace,
    state: &StepState,
    f_k: &[f64],
    dz: &[f64],
    tau: f64,
) -> [f64; 3] {
    let rel: Vec<f64> = state.du.iter().zip(dz).map(|(a, b)| a - b).collect();
    let stress: f64 = state
        .sigma
        .iter()
        .zip(space.geometry())
        .enumerate()
        .map(|(e, (s, g))| g.area * s.dot(&space.strain_of_element(e, dz)))
        .sum();
    [
        tau * h_inner(space, f_k, &rel),
        tau * h_inner(space, &state.ddu, dz),
        tau * stress,
    ]
}

fn stress_power(space: &CrackedSpace, state: &StepState, tau: f64) -> f64 {
    tau * state
        .sigma
        .iter()
        .zip(space.geometry())
        .enumerate()
        .map(|(e, (s, g))| g.area * s.dot(&space.strain_of_element(e, &state.du)))
        .sum::<f64>()
}

impl EnergyLedger {
    /// Ledger of every state in `traj`, including partial trajectories.
    pub fn from_trajectory(space: &CrackedSpace, loads: &LoadData, traj: &Trajectory) -> Self {
        let tau = traj.tau;
        let mut rows = Vec::with_capacity(traj.states.len());
        let Some(first) = traj.states.first() else {
            return Self { rows };
        };
        let mut row = LedgerRow {
            kinetic: kinetic_energy(space, &first.du),
            elastic: elastic_energy(space, &first.u, &traj.law),
            ..LedgerRow::default()
        };
        let e0 = row.mechanical();
        let kin0 = row.kinetic;
        let open0 = space.open_length(&traj.constraints[0]);
        rows.push(row.clone());
        let mut z_prev = loads.z(space, 0.0);
        for (k, state) in traj.states.iter().enumerate().skip(1) {
            let z_k = loads.z(space, state.t);
            let dz: Vec<f64> = z_k.iter().zip(&z_prev).map(|(a, b)| (a - b) / tau).collect();
            let f_k = loads.f_average(space, k, tau);
            let work = work_increment(space, state, &f_k, &dz, tau);
            let crack_cum = space.open_length(&traj.constraints[k]) - open0;
            let prev = row;
            row = LedgerRow {
                k,
                t: state.t,
                kinetic: kinetic_energy(space, &state.du),
                elastic: elastic_energy(space, &state.u, &traj.law),
                viscous_inc: viscous_increment(space, state, &traj.law, tau),
                work_inc: work,
                crack_inc: crack_cum - prev.crack_cum,
                crack_cum,
                stress_power_inc: stress_power(space, state, tau),
                ..LedgerRow::default()
            };
            row.viscous_cum = prev.viscous_cum + row.viscous_inc;
            for ((cum, before), inc) in row.work_cum_terms.iter_mut().zip(prev.work_cum_terms).zip(work) {
                *cum = before + inc;
            }
            row.work_cum = prev.work_cum + work.iter().sum::<f64>();
            row.stress_power_cum = prev.stress_power_cum + row.stress_power_inc;
            row.residual_kv = row.mechanical() + row.viscous_cum - e0 - row.work_cum;
            row.residual_general = row.kinetic + row.stress_power_cum - kin0 - row.work_cum;
            rows.push(row.clone());
            z_prev = z_k;
        }
        Self { rows }
    }

    pub fn initial_energy(&self) -> f64 {
        self.rows.first().map_or(0.0, LedgerRow::mechanical)
    }

    pub fn max_abs_residual_kv(&self) -> f64 {
        self.rows.iter().map(|r| r.residual_kv.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_residual_general(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.residual_general.abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_work(&self) -> f64 {
        self.rows.iter().map(|r| r.work_cum.abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{LEDGER_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.k,
                r.t,
                r.kinetic,
                r.elastic,
                r.viscous_cum,
                r.work_cum,
                r.crack_cum,
                r.residual_kv,
                r.residual_general
            )?;
        }
        Ok(())
    }
}

/// `𝓔(k) + 𝓥(0,kτ) − 𝓔(0) − 𝒲(0,kτ)`.
pub fn balance_residual_kv(ledger: &EnergyLedger, k: usize) -> Option<f64> {
    ledger.rows.get(k).map(|r| r.residual_kv)
}

/// `½‖δu_k‖² + Σ τ(σ_i, eδu_i) − ½‖δu_0‖² − 𝒲(0,kτ)`.
pub fn balance_residual_general(ledger: &EnergyLedger, k: usize) -> Option<f64> {
    ledger.rows.get(k).map(|r| r.residual_general)
}

/// Cumulative work by the trapezoid rule on the exact `f(t)` and `ż(t)`.
pub fn work_trapezoid(space: &CrackedSpace, loads: &LoadData, traj: &Trajectory) -> Vec<f64> {
    let integrand = |s: &StepState, ddu: &[f64]| {
        let f = loads.body_force(space, s.t);
        let zd = loads.z_dot(space, s.t);
        let rel: Vec<f64> = s.du.iter().zip(&zd).map(|(a, b)| a - b).collect();
        let stress: f64 = s
            .sigma
            .iter()
            .zip(space.geometry())
            .enumerate()
            .map(|(e, (sig, g))| g.area * sig.dot(&space.strain_of_element(e, &zd)))
            .sum();
        h_inner(space, &f, &rel) + h_inner(space, ddu, &zd) + stress
    };
    let mut out = vec![0.0];
    let mut prev: Option<f64> = None;
    for (k, s) in traj.states.iter().enumerate() {
        // the acceleration at t = 0 is taken from the first step
        let ddu = if k == 0 {
            match traj.states.get(1) {
                Some(next) => &next.ddu,
                None => break,
            }
        } else {
            &s.ddu
        };
        let value = integrand(s, ddu);
        if let Some(p) = prev {
            let last = *out.last().unwrap();
            out.push(last + 0.5 * traj.tau * (p + value));
        }
        prev = Some(value);
    }
    out
}

/// `Σ_k |ψ(eu_k) − ψ(eu_{k−1}) − τ(G⁻¹(eu_k), eδu_k)|` with `ψ = |·|^{p'}/p'`.
pub fn chain_rule_defect(space: &CrackedSpace, traj: &Trajectory) -> f64 {
    let plain = traj.law.unregularised();
    traj.states
        .windows(2)
        .map(|w| {
            let jump = elastic_energy(space, &w[1].u, &plain) - elastic_energy(space, &w[0].u, &plain);
            let power: f64 = space
                .geometry()
                .iter()
                .enumerate()
                .map(|(e, g)| {
                    let eu = space.strain_of_element(e, &w[1].u);
                    let edu = space.strain_of_element(e, &w[1].du);
                    g.area * plain.g_inverse(&eu).dot(&edu)
                })
                .sum();
            (jump - traj.tau * power).abs()
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParadoxVerdict {
    /// The balance closes within tolerance although the crack grew by at least `L_min`.
    ParadoxConfirmed,
    /// No (significant) crack growth, so the Griffith balance holds trivially.
    GriffithCompatible,
    /// The balance residual exceeds the tolerance; refine `n`.
    InconclusiveResolution,
}

impl std::fmt::Display for ParadoxVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParadoxVerdict::ParadoxConfirmed => "PARADOX CONFIRMED",
            ParadoxVerdict::GriffithCompatible => "GRIFFITH COMPATIBLE",
            ParadoxVerdict::InconclusiveResolution => "INCONCLUSIVE RESOLUTION",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParadoxStep {
    pub k: usize,
    pub t: f64,
    pub crack_cum: f64,
    pub abs_residual_kv: f64,
    /// Energy left for crack growth by the Griffith ledger: `−residual_kv`.
    pub griffith_defect: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParadoxReport {
    pub steps: Vec<ParadoxStep>,
    pub crack_final: f64,
    pub max_abs_residual: f64,
    pub max_griffith_defect: f64,
    pub tolerance: f64,
    pub min_crack: f64,
    pub verdict: ParadoxVerdict,
}

impl ParadoxReport {
    pub fn into_result(self) -> Result<Self, ParadoxError> {
        if self.verdict == ParadoxVerdict::InconclusiveResolution {
            return Err(ParadoxError::InconclusiveResolution {
                max_residual: self.max_abs_residual,
                tolerance: self.tolerance,
            });
        }
        Ok(self)
    }
}

/// Fraction of `max(|𝒲|, 𝓔₀)` allowed as balance residual.
pub const PARADOX_REL_TOL: f64 = 0.05;

/// Paradox verdict for a complete ledger. `min_crack` defaults to the shortest crack segment.
pub fn paradox_report(ledger: &EnergyLedger, space: &CrackedSpace, min_crack: Option<f64>) -> ParadoxReport {
    let min_crack = min_crack.unwrap_or_else(|| {
        space
            .segment_lengths()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    });
    let steps: Vec<ParadoxStep> = ledger
        .rows
        .iter()
        .map(|r| ParadoxStep {
            k: r.k,
            t: r.t,
            crack_cum: r.crack_cum,
            abs_residual_kv: r.residual_kv.abs(),
            griffith_defect: -r.residual_kv,
        })
        .collect();
    let crack_final = ledger.rows.last().map_or(0.0, |r| r.crack_cum);
    let max_abs_residual = ledger.max_abs_residual_kv();
    let max_griffith_defect = steps.iter().map(|s| s.griffith_defect).fold(0.0, f64::max);
    let tolerance = PARADOX_REL_TOL
        * ledger
            .max_abs_work()
            .max(ledger.initial_energy())
            .max(f64::EPSILON);
    let verdict = if !(crack_final > 0.0 && crack_final >= min_crack) {
        ParadoxVerdict::GriffithCompatible
    } else if max_abs_residual <= tolerance {
        ParadoxVerdict::ParadoxConfirmed
    } else {
        ParadoxVerdict::InconclusiveResolution
    };
    ParadoxReport {
        steps,
        crack_final,
        max_abs_residual,
        max_griffith_defect,
        tolerance,
        min_crack,
        verdict,
    }
}
