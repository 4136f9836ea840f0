//! Symmetric 2×2 tensors.
//!
//! Strains and stresses live in the space of symmetric matrices equipped with
//! the Frobenius product `A·B = tr(AᵀB)`. For assembly we also use the
//! orthonormal Mandel coordinates `(xx, yy, √2·xy)`, in which the Frobenius
//! product becomes the Euclidean dot product.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A symmetric 2×2 tensor `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymTensor2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 {
        xx: 0.0,
        yy: 0.0,
        xy: 0.0,
    };

    pub const fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Self { xx, yy, xy }
    }

    pub const fn diag(xx: f64, yy: f64) -> Self {
        Self { xx, yy, xy: 0.0 }
    }

    /// Frobenius product; the off-diagonal entry appears twice in the full matrix.
    #[inline]
    pub fn dot(&self, other: &SymTensor2) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    #[inline]
    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    /// Frobenius norm.
    #[inline]
    pub fn norm(&self) -> f64 {
        // hypot keeps the value finite for components near the overflow limit
        self.xx.hypot(self.yy).hypot(std::f64::consts::SQRT_2 * self.xy)
    }

    pub fn is_zero(&self) -> bool {
        self.xx == 0.0 && self.yy == 0.0 && self.xy == 0.0
    }

    pub fn scale(&self, s: f64) -> SymTensor2 {
        SymTensor2::new(s * self.xx, s * self.yy, s * self.xy)
    }

    /// Unit tensor in the direction of `self`, or `None` for the zero tensor.
    pub fn direction(&self) -> Option<SymTensor2> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            None
        } else {
            Some(self.scale(1.0 / n))
        }
    }

    /// Mandel coordinates `(xx, yy, √2·xy)`.
    #[inline]
    pub fn to_mandel(&self) -> [f64; 3] {
        [self.xx, self.yy, std::f64::consts::SQRT_2 * self.xy]
    }

    #[inline]
    pub fn from_mandel(m: [f64; 3]) -> SymTensor2 {
        SymTensor2::new(m[0], m[1], m[2] / std::f64::consts::SQRT_2)
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.yy.is_finite() && self.xy.is_finite()
    }
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(self, rhs: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.xx + rhs.xx, self.yy + rhs.yy, self.xy + rhs.xy)
    }
}

impl AddAssign for SymTensor2 {
    fn add_assign(&mut self, rhs: SymTensor2) {
        self.xx += rhs.xx;
        self.yy += rhs.yy;
        self.xy += rhs.xy;
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, rhs: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.xx - rhs.xx, self.yy - rhs.yy, self.xy - rhs.xy)
    }
}

impl Neg for SymTensor2 {
    type Output = SymTensor2;
    fn neg(self) -> SymTensor2 {
        SymTensor2::new(-self.xx, -self.yy, -self.xy)
    }
}

impl Mul<SymTensor2> for f64 {
    type Output = SymTensor2;
    fn mul(self, rhs: SymTensor2) -> SymTensor2 {
        rhs.scale(self)
    }
}

impl Mul<f64> for SymTensor2 {
    type Output = SymTensor2;
    fn mul(self, rhs: f64) -> SymTensor2 {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_counts_off_diagonal_twice() {
        let t = SymTensor2::new(1.0, 2.0, 3.0);
        assert!((t.norm() - (1.0f64 + 4.0 + 18.0).sqrt()).abs() < 1e-15);
        assert_eq!(SymTensor2::ZERO.norm(), 0.0);
    }

    #[test]
    fn mandel_preserves_inner_product() {
        let a = SymTensor2::new(0.3, -1.2, 0.7);
        let b = SymTensor2::new(-2.0, 0.5, 1.1);
        let (ma, mb) = (a.to_mandel(), b.to_mandel());
        let euclid: f64 = ma.iter().zip(mb.iter()).map(|(x, y)| x * y).sum();
        assert!((euclid - a.dot(&b)).abs() < 1e-14);
        let back = SymTensor2::from_mandel(ma);
        assert!((back - a).norm() < 1e-15);
    }

    #[test]
    fn huge_components_do_not_overflow_norm() {
        let t = SymTensor2::new(1e300, 1e300, 1e300);
        assert!(t.norm().is_finite());
    }
}
