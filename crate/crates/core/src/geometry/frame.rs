//! Anatomical pelvic coordinate frame from the ASIS/PSIS landmarks.
//!
//! Origin at the ASIS midpoint, Y along the inter-ASIS line, X from the PSIS
//! midpoint toward the ASIS midpoint made orthogonal to Y (ventral), and
//! Z = X × Y (cranial with the default Y sign).

use nalgebra::Matrix3;

use super::{Point3, RigidTransform, UnitVec3, Vec3};
use crate::error::{Error, Result};
use crate::scalar::{lit, tol, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkSet<T: Scalar> {
    pub asis_left: Point3<T>,
    pub asis_right: Point3<T>,
    pub psis_left: Point3<T>,
    pub psis_right: Point3<T>,
    pub hip_center: Option<Point3<T>>,
}

impl<T: Scalar> LandmarkSet<T> {
    pub fn asis_midpoint(&self) -> Point3<T> {
        nalgebra::center(&self.asis_left, &self.asis_right)
    }

    pub fn psis_midpoint(&self) -> Point3<T> {
        nalgebra::center(&self.psis_left, &self.psis_right)
    }

    pub fn transformed(&self, tf: &RigidTransform<T>) -> Self {
        Self {
            asis_left: tf.apply(&self.asis_left),
            asis_right: tf.apply(&self.asis_right),
            psis_left: tf.apply(&self.psis_left),
            psis_right: tf.apply(&self.psis_right),
            hip_center: self.hip_center.map(|p| tf.apply(&p)),
        }
    }
}

/// Sign of the frame's Y axis. The anatomical description only fixes the
/// line; right-to-left makes Z = X × Y cranial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum YAxisSign {
    #[default]
    RightToLeft,
    LeftToRight,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameConfig {
    pub y_sign: YAxisSign,
}

/// Rigid map from world (CT) coordinates into the anatomical frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PelvicFrame<T: Scalar> {
    /// world → frame
    pub transform: RigidTransform<T>,
}

impl<T: Scalar> PelvicFrame<T> {
    pub fn identity() -> Self {
        Self {
            transform: RigidTransform::identity(),
        }
    }

    pub fn to_frame(&self, p: &Point3<T>) -> Point3<T> {
        self.transform.apply(p)
    }

    pub fn to_world(&self, p: &Point3<T>) -> Point3<T> {
        self.transform.inverse().apply(p)
    }

    pub fn vector_to_frame(&self, v: &Vec3<T>) -> Vec3<T> {
        self.transform.apply_vector(v)
    }

    pub fn vector_to_world(&self, v: &Vec3<T>) -> Vec3<T> {
        self.transform.inverse().apply_vector(v)
    }

    /// Frame axes expressed in world coordinates.
    pub fn axes_world(&self) -> [UnitVec3<T>; 3] {
        let inv = self.transform.inverse();
        [Vec3::x_axis(), Vec3::y_axis(), Vec3::z_axis()].map(|a| inv.apply_unit(&a))
    }

    pub fn origin_world(&self) -> Point3<T> {
        self.to_world(&Point3::origin())
    }
}

pub fn build_pelvic_frame<T: Scalar>(landmarks: &LandmarkSet<T>, config: FrameConfig) -> Result<PelvicFrame<T>> {
    let origin = landmarks.asis_midpoint();
    let across = landmarks.asis_left - landmarks.asis_right;
    if across.norm() <= lit(1.0) {
        return Err(Error::Degenerate(format!(
            "ASIS landmarks only {} mm apart",
            across.norm()
        )));
    }
    let mut y = across.normalize();
    if config.y_sign == YAxisSign::LeftToRight {
        y = -y;
    }
    let ventral = origin - landmarks.psis_midpoint();
    let x_raw = ventral - y * ventral.dot(&y);
    if x_raw.norm() <= tol::<T>(1e-6) * (T::one() + ventral.norm()) {
        return Err(Error::Degenerate("PSIS midpoint lies on the inter-ASIS line".into()));
    }
    let x = x_raw.normalize();
    let z = x.cross(&y);
    // Rows are the frame axes: p_frame = R (p − origin).
    let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    let translation = -(rotation * origin.coords);
    Ok(PelvicFrame {
        transform: RigidTransform::from_matrix(rotation, translation)?,
    })
}
