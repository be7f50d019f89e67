//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real floating point type the geometry is computed in: `f32` or `f64`.
///
/// The associated constants are the precision-dependent defaults used when a
/// caller does not supply its own tolerances.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Relative tolerance for orthonormality, eigen-residuals and Hermiticity.
    const DEFAULT_TOL: Self;
    /// Energy gap at or below which a point counts as singular (gap closing).
    const DEFAULT_GAP_TOL: Self;
    /// Smallest admissible singular value of an overlap matrix.
    const DEFAULT_SING_TOL: Self;
    /// Central-difference step for parameter derivatives.
    const DEFAULT_STEP: Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }
}

impl Real for f64 {
    const DEFAULT_TOL: Self = 1e-10;
    const DEFAULT_GAP_TOL: Self = 1e-8;
    const DEFAULT_SING_TOL: Self = 1e-8;
    const DEFAULT_STEP: Self = 1e-4;
}

impl Real for f32 {
    const DEFAULT_TOL: Self = 1e-5;
    const DEFAULT_GAP_TOL: Self = 1e-5;
    const DEFAULT_SING_TOL: Self = 1e-4;
    const DEFAULT_STEP: Self = 1e-2;
}
