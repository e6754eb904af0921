use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, Unit, UnitQuaternion};

use super::{Point3, UnitVec3, Vec3};
use crate::error::{Error, Result};
use crate::scalar::{tol, Scalar};

/// Proper rigid motion `p ↦ R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<T: Scalar> {
    iso: Isometry3<T>,
}

impl<T: Scalar> Default for RigidTransform<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Scalar> RigidTransform<T> {
    pub fn identity() -> Self {
        Self {
            iso: Isometry3::identity(),
        }
    }

    pub fn from_isometry(iso: Isometry3<T>) -> Self {
        Self { iso }
    }

    pub fn from_parts(rotation: UnitQuaternion<T>, translation: Vec3<T>) -> Self {
        Self {
            iso: Isometry3::from_parts(Translation3::from(translation), rotation),
        }
    }

    pub fn from_translation(translation: Vec3<T>) -> Self {
        Self::from_parts(UnitQuaternion::identity(), translation)
    }

    pub fn from_axis_angle(axis: &Vec3<T>, angle: T, translation: Vec3<T>) -> Self {
        let rotation = UnitQuaternion::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self::from_parts(rotation, translation)
    }

    /// Builds a transform from a rotation matrix, rejecting anything that is
    /// not orthonormal with determinant +1.
    pub fn from_matrix(rotation: Matrix3<T>, translation: Vec3<T>) -> Result<Self> {
        let eps = tol::<T>(1e-9);
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.abs().max() > eps {
            return Err(Error::InvalidParameter("rotation matrix is not orthonormal".into()));
        }
        if (rotation.determinant() - T::one()).abs() > eps {
            return Err(Error::InvalidParameter("rotation matrix is improper".into()));
        }
        let rot = Rotation3::from_matrix_unchecked(rotation);
        Ok(Self::from_parts(
            UnitQuaternion::from_rotation_matrix(&rot),
            translation,
        ))
    }

    pub fn rotation(&self) -> UnitQuaternion<T> {
        self.iso.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<T> {
        self.iso.rotation.to_rotation_matrix().into_inner()
    }

    pub fn translation(&self) -> Vec3<T> {
        self.iso.translation.vector
    }

    pub fn isometry(&self) -> &Isometry3<T> {
        &self.iso
    }

    #[inline]
    pub fn apply(&self, p: &Point3<T>) -> Point3<T> {
        self.iso.transform_point(p)
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vec3<T>) -> Vec3<T> {
        self.iso.rotation * v
    }

    #[inline]
    pub fn apply_unit(&self, v: &UnitVec3<T>) -> UnitVec3<T> {
        Unit::new_unchecked(self.iso.rotation * v.into_inner())
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            iso: self.iso * other.iso,
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            iso: self.iso.inverse(),
        }
    }

    /// Rotation angle (radians) of `self⁻¹ ∘ other`.
    pub fn angle_to(&self, other: &Self) -> T {
        self.iso.rotation.angle_to(&other.iso.rotation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_transform() -> impl Strategy<Value = RigidTransform<f64>> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            0.0f64..std::f64::consts::PI,
            prop::array::uniform3(-500.0f64..500.0),
        )
            .prop_filter("axis", |(a, _, _)| a.iter().map(|x| x * x).sum::<f64>() > 1e-3)
            .prop_map(|(a, ang, t)| RigidTransform::from_axis_angle(&Vec3::from(a), ang, Vec3::from(t)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn inverse_round_trip(tf in arb_transform(), p in prop::array::uniform3(-800.0f64..800.0)) {
            let p = Point3::from(p);
            let back = tf.inverse().apply(&tf.apply(&p));
            prop_assert!((back - p).norm() < 1e-9);
            let r = tf.rotation_matrix();
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn compose_applies_right_first() {
        let a = RigidTransform::from_translation(Vec3::new(1.0, 0.0, 0.0));
        let b = RigidTransform::from_axis_angle(&Vec3::z(), std::f64::consts::FRAC_PI_2, Vec3::zeros());
        let p = Point3::new(1.0, 0.0, 0.0);
        let q = a.compose(&b).apply(&p);
        assert!((q - Point3::new(1.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn from_matrix_rejects_reflection() {
        let m = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::from_matrix(m, Vec3::zeros()).is_err());
        let ok = RigidTransform::from_matrix(Matrix3::<f64>::identity(), Vec3::zeros());
        assert!(ok.is_ok());
    }
}
