//! Generator families, the singular-value calculus of their derivatives and
//! the global regularity check.

mod family;
mod region;
mod system;

pub use family::{AffineBranch, GeneratorFamily};
pub use region::{Rect, Region};
pub use system::builtin;
pub use system::{
    build_system, global_bounds, global_bounds_with, GlobalBounds, SafetyFactors,
    SemigroupSystem, SystemSpec, DEFAULT_P_SCHEDULE, DEFAULT_WORD_BUDGET,
};

use crate::error::{IfsError, Result};
use num_complex::Complex64;

/// Relative tolerance below which |d_z| and |d_zbar| are considered equal and
/// the linear map is treated as non-invertible.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// An R-linear planar derivative in Wirtinger form, acting by
/// v -> d_z * v + d_zbar * conj(v). The d_zbar part measures how far the map
/// is from being conformal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WirtingerDerivative {
    pub d_z: Complex64,
    pub d_zbar: Complex64,
}

/// Extreme singular values of a planar derivative and their ratio, the
/// conformal dilatation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularData {
    /// Largest singular value, |d_z| + |d_zbar|.
    pub l: f64,
    /// Smallest singular value, ||d_z| - |d_zbar||.
    pub s: f64,
    /// Dilatation l / s >= 1.
    pub k: f64,
}

impl WirtingerDerivative {
    pub fn new(d_z: Complex64, d_zbar: Complex64) -> Self {
        Self { d_z, d_zbar }
    }

    pub fn is_finite(&self) -> bool {
        self.d_z.re.is_finite()
            && self.d_z.im.is_finite()
            && self.d_zbar.re.is_finite()
            && self.d_zbar.im.is_finite()
    }

    /// Apply the linear map to a vector.
    #[inline]
    pub fn apply(&self, v: Complex64) -> Complex64 {
        self.d_z * v + self.d_zbar * v.conj()
    }

    /// Chain rule: the derivative of `self` composed after `inner`.
    pub fn compose(&self, inner: &WirtingerDerivative) -> WirtingerDerivative {
        WirtingerDerivative {
            d_z: self.d_z * inner.d_z + self.d_zbar * inner.d_zbar.conj(),
            d_zbar: self.d_z * inner.d_zbar + self.d_zbar * inner.d_z.conj(),
        }
    }

    /// Singular values and dilatation. Fails when the two moduli coincide
    /// within tolerance (the map is then not invertible).
    pub fn singular_data(&self) -> Result<SingularData> {
        let a = self.d_z.norm();
        let b = self.d_zbar.norm();
        let l = a + b;
        let s = (a - b).abs();
        if s <= DEGENERACY_TOL * l.max(1.0) {
            return Err(IfsError::DegenerateDerivative {
                dz_abs: a,
                dzbar_abs: b,
            });
        }
        Ok(SingularData { l, s, k: l / s })
    }

    /// Inverse of the linear map. Requires |d_z| > |d_zbar| (orientation
    /// preserving); the inverse has singular values 1/s and 1/l and the same
    /// dilatation.
    pub fn invert(&self) -> Result<WirtingerDerivative> {
        let a = self.d_z.norm();
        let b = self.d_zbar.norm();
        let delta = a * a - b * b;
        if delta <= DEGENERACY_TOL * (a * a).max(1.0) {
            return Err(IfsError::DegenerateDerivative {
                dz_abs: a,
                dzbar_abs: b,
            });
        }
        Ok(WirtingerDerivative {
            d_z: self.d_z.conj() / delta,
            d_zbar: -self.d_zbar / delta,
        })
    }
}

/// Singular data of a derivative given directly.
pub fn singular_data(d: &WirtingerDerivative) -> Result<SingularData> {
    d.singular_data()
}

/// Inverse of an R-linear map given in Wirtinger form.
pub fn invert_linear(d: &WirtingerDerivative) -> Result<WirtingerDerivative> {
    d.invert()
}
