//! The implicit power-law constitutive family.
//!
//! The law relates stress `σ` and strain `ξ = e u + e u̇` through
//! `G(σ) = ξ`, with `G_ε(ξ) = (1 + ε)·|ξ|^{p-2}·ξ`. Everything here is a pure
//! function of its arguments.
//!
//! With `a = (1 + ε)^{-1/(p-1)}` and `p' = p/(p-1)` the closed forms are
//!
//! * `G_ε⁻¹(η) = a·|η|^{p'-2}·η`
//! * `φ_ε(ξ)  = (1 + ε)·|ξ|^p / p`
//! * `φ_ε*(η) = a·|η|^{p'} / p'`
//!
//! so `∇φ_ε = G_ε` and `∇φ_ε* = G_ε⁻¹`.

use nalgebra::Matrix3;

use crate::error::LawError;
use crate::tensor::SymTensor2;

/// Radius below which the Hessian of `φ*` is evaluated at the guard radius.
const HESSIAN_RADIUS_GUARD: f64 = 1e-12;

/// Tolerance of the radial root-find, relative to the target `|η|`.
pub const ROOT_FIND_TOL: f64 = 1e-14;
pub const ROOT_FIND_MAX_ITER: usize = 200;

/// Radial power law `G_ε(ξ) = (1 + ε)|ξ|^{p-2}ξ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLaw {
    p: f64,
    eps_reg: f64,
}

impl PowerLaw {
    pub fn new(p: f64, eps_reg: f64) -> Result<Self, LawError> {
        if !(p.is_finite() && p > 1.0) {
            return Err(LawError::InvalidExponent(p));
        }
        if !(eps_reg.is_finite() && eps_reg >= 0.0) {
            return Err(LawError::InvalidRegularisation(eps_reg));
        }
        Ok(Self { p, eps_reg })
    }

    /// The same exponent with the regularisation removed.
    pub fn unregularised(&self) -> PowerLaw {
        PowerLaw {
            p: self.p,
            eps_reg: 0.0,
        }
    }

    pub fn with_eps_reg(&self, eps_reg: f64) -> Result<PowerLaw, LawError> {
        PowerLaw::new(self.p, eps_reg)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eps_reg(&self) -> f64 {
        self.eps_reg
    }

    /// Hölder conjugate `p' = p/(p-1)`.
    pub fn conjugate_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Scalar factor `a = (1 + ε)^{-1/(p-1)}` of the inverse law.
    pub fn inverse_factor(&self) -> f64 {
        (1.0 + self.eps_reg).powf(-1.0 / (self.p - 1.0))
    }

    /// Radial profile `g(r) = (1 + ε)r^{p-1}` of the forward law.
    #[inline]
    pub fn radial(&self, r: f64) -> f64 {
        (1.0 + self.eps_reg) * r.powf(self.p - 1.0)
    }

    /// Radial profile of the inverse law.
    #[inline]
    pub fn radial_inverse(&self, s: f64) -> f64 {
        (s / (1.0 + self.eps_reg)).powf(1.0 / (self.p - 1.0))
    }

    /// `G_ε(ξ)`. Evaluated as `g(|ξ|)·ξ/|ξ|` so that `p < 2` does not overflow near the origin.
    pub fn g_apply(&self, xi: &SymTensor2) -> SymTensor2 {
        match xi.direction() {
            None => SymTensor2::ZERO,
            Some(dir) => dir.scale(self.radial(xi.norm())),
        }
    }

    /// Closed-form `G_ε⁻¹(η)`.
    pub fn g_inverse(&self, eta: &SymTensor2) -> SymTensor2 {
        match eta.direction() {
            None => SymTensor2::ZERO,
            Some(dir) => dir.scale(self.radial_inverse(eta.norm())),
        }
    }

    /// `G_ε⁻¹(η)` through a scalar root-find on `r ↦ g(r) = |η|`.
    ///
    /// Geometric bracketing and bisection followed by safeguarded Newton.
    /// Only meant as an independent check of [`PowerLaw::g_inverse`].
    pub fn g_inverse_root_find(&self, eta: &SymTensor2) -> Result<SymTensor2, LawError> {
        let Some(dir) = eta.direction() else {
            return Ok(SymTensor2::ZERO);
        };
        let s = eta.norm();
        let r = self.radial_root(s)?;
        Ok(dir.scale(r))
    }

    fn radial_root(&self, s: f64) -> Result<f64, LawError> {
        let f = |r: f64| self.radial(r) - s;
        let tol = ROOT_FIND_TOL * s;
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        let mut iterations = 0;
        // geometric bracketing
        if f(hi) < 0.0 {
            while f(hi) < 0.0 {
                lo = hi;
                hi *= 2.0;
                iterations += 1;
                if iterations >= ROOT_FIND_MAX_ITER {
                    return Err(LawError::RootFindNonConvergence {
                        iterations,
                        residual: f(hi),
                    });
                }
            }
        } else {
            while f(hi / 2.0) > 0.0 && hi > f64::MIN_POSITIVE {
                hi /= 2.0;
                iterations += 1;
                if iterations >= ROOT_FIND_MAX_ITER {
                    return Err(LawError::RootFindNonConvergence {
                        iterations,
                        residual: f(hi),
                    });
                }
            }
            lo = hi / 2.0;
        }
        // a few bisection steps to land inside the Newton basin
        for _ in 0..8 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
        let mut r = 0.5 * (lo + hi);
        while iterations < ROOT_FIND_MAX_ITER {
            let res = f(r);
            if res.abs() <= tol {
                return Ok(r);
            }
            if res < 0.0 {
                lo = r;
            } else {
                hi = r;
            }
            let slope = (1.0 + self.eps_reg) * (self.p - 1.0) * r.powf(self.p - 2.0);
            let mut next = r - res / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - r).abs() <= 4.0 * f64::EPSILON * r {
                return Ok(next);
            }
            r = next;
            iterations += 1;
        }
        Err(LawError::RootFindNonConvergence {
            iterations,
            residual: f(r),
        })
    }

    /// Potential `φ_ε(ξ) = (1 + ε)|ξ|^p / p`, with `φ_ε(0) = 0`.
    pub fn phi(&self, xi: &SymTensor2) -> f64 {
        (1.0 + self.eps_reg) * xi.norm().powf(self.p) / self.p
    }

    /// Fenchel conjugate `φ_ε*(η) = a|η|^{p'} / p'`.
    pub fn phi_star(&self, eta: &SymTensor2) -> f64 {
        let q = self.conjugate_exponent();
        self.inverse_factor() * eta.norm().powf(q) / q
    }

    /// Hessian of `φ_ε*` in Mandel coordinates, eigenvalues floored at `floor`.
    ///
    /// `D²φ*(η) = a|η|^{p'-2}(I + (p'-2) n⊗n)` with `n = η/|η|`.
    pub fn phi_star_hessian(&self, eta: &SymTensor2, floor: f64) -> Matrix3<f64> {
        let q = self.conjugate_exponent();
        let a = self.inverse_factor();
        let r = eta.norm().max(HESSIAN_RADIUS_GUARD);
        let lam_perp = (a * r.powf(q - 2.0)).max(floor);
        match eta.direction() {
            None => Matrix3::identity() * lam_perp,
            Some(dir) => {
                let lam_par = (a * (q - 1.0) * r.powf(q - 2.0)).max(floor);
                let n = nalgebra::Vector3::from(dir.to_mandel());
                let nn = n * n.transpose();
                (Matrix3::identity() - nn) * lam_perp + nn * lam_par
            }
        }
    }

    /// Growth constants derived from the closed form: `c₁ = c₃ = a`, `c₂ = 0`, `c₄ = a/p'`.
    pub fn growth_constants(&self) -> GrowthConstants {
        let a = self.inverse_factor();
        GrowthConstants {
            c1: a,
            c2: 0.0,
            c3: a,
            c4: a / self.conjugate_exponent(),
        }
    }

    /// Checks the coercivity and growth bounds of `G_ε⁻¹` and `φ_ε*` on `samples`.
    ///
    /// Bounds: `G⁻¹(η)·η ≥ c₁|η|^{p'} − c₂`, `|G⁻¹(η)| ≤ c₃(1 + |η|^{p'-1})`,
    /// `0 ≤ φ*(η) ≤ c₄(1 + |η|^{p'})`. Margins are absolute; a bound counts as
    /// violated when its margin is below `-1e-12·(1 + scale)` where `scale` is
    /// the magnitude of the compared terms.
    pub fn check_growth_bounds(&self, samples: &[SymTensor2]) -> GrowthReport {
        self.check_growth_bounds_with(samples, self.growth_constants())
    }

    pub fn check_growth_bounds_with(
        &self,
        samples: &[SymTensor2],
        constants: GrowthConstants,
    ) -> GrowthReport {
        let q = self.conjugate_exponent();
        let GrowthConstants { c1, c2, c3, c4 } = constants;
        let mut report = GrowthReport {
            constants,
            samples: samples.len(),
            worst_margin: [f64::INFINITY; 4],
            violation: None,
        };
        for eta in samples {
            let inv = self.g_inverse(eta);
            let r = eta.norm();
            let rq = r.powf(q);
            let pairing = inv.dot(eta);
            let star = self.phi_star(eta);
            let checks = [
                (pairing - (c1 * rq - c2), pairing.abs() + c1 * rq + c2),
                (
                    c3 * (1.0 + r.powf(q - 1.0)) - inv.norm(),
                    inv.norm() + c3 * (1.0 + r.powf(q - 1.0)),
                ),
                (star, star),
                (c4 * (1.0 + rq) - star, star + c4 * (1.0 + rq)),
            ];
            for (i, (margin, scale)) in checks.into_iter().enumerate() {
                report.worst_margin[i] = report.worst_margin[i].min(margin);
                if report.violation.is_none() && margin < -1e-12 * (1.0 + scale) {
                    report.violation = Some(GrowthViolation {
                        bound: GrowthBound::ALL[i],
                        sample: *eta,
                        margin,
                    });
                }
            }
        }
        report
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthBound {
    /// `G⁻¹(η)·η ≥ c₁|η|^{p'} − c₂`
    Coercivity,
    /// `|G⁻¹(η)| ≤ c₃(1 + |η|^{p'-1})`
    Growth,
    /// `φ*(η) ≥ 0`
    ConjugateNonNegative,
    /// `φ*(η) ≤ c₄(1 + |η|^{p'})`
    ConjugateGrowth,
}

impl GrowthBound {
    pub const ALL: [GrowthBound; 4] = [
        GrowthBound::Coercivity,
        GrowthBound::Growth,
        GrowthBound::ConjugateNonNegative,
        GrowthBound::ConjugateGrowth,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthViolation {
    pub bound: GrowthBound,
    pub sample: SymTensor2,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthReport {
    pub constants: GrowthConstants,
    pub samples: usize,
    /// Smallest margin per bound, in [`GrowthBound::ALL`] order.
    pub worst_margin: [f64; 4],
    pub violation: Option<GrowthViolation>,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.samples > 0 && self.violation.is_none()
    }
}
