//! Scalar abstraction shared by the geometric kernels.
//!
//! Everything numeric in [`crate::geometry`], planning, registration, the jig
//! fit and the deviation metrics is written against [`Scalar`], so the same
//! code runs in `f32` or `f64`. File formats and statistics stay in `f64`.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable by the geometry kernels: `f32` or `f64`.
pub trait Scalar: RealField + Copy + FromPrimitive + ToPrimitive {}

impl<T> Scalar for T where T: RealField + Copy + FromPrimitive + ToPrimitive {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("f64 literal representable in scalar type")
}

/// Converts a working scalar back to `f64`.
#[inline]
pub fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().expect("scalar representable as f64")
}

/// A tolerance that is `tol` in `f64` but never tighter than what the
/// scalar type can resolve (64 ulps at unit magnitude).
#[inline]
pub fn tol<T: Scalar>(tol: f64) -> T {
    let floor = T::default_epsilon() * lit::<T>(64.0);
    let t = lit::<T>(tol);
    if t > floor {
        t
    } else {
        floor
    }
}

#[inline]
pub fn deg<T: Scalar>(rad: T) -> T {
    rad * lit::<T>(180.0) / T::pi()
}

#[inline]
pub fn rad<T: Scalar>(deg: T) -> T {
    deg * T::pi() / lit::<T>(180.0)
}
