//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Real floating-point scalar: `f64` (the default everywhere) or `f32`.
///
/// Tolerances throughout the crate are calibrated for double precision; `f32`
/// instantiations compile and run but will miss the tighter invariants.
pub trait Real: RealField + Copy + ToPrimitive + Debug + Display + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal or computed constant.
    fn cast(x: f64) -> Self;

    fn as_f64(self) -> f64;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn cast(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);
