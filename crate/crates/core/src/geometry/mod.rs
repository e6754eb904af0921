//! Mesh and analytic-geometry kernel. All lengths are millimeters.

mod cut;
mod fit;
mod frame;
pub mod io;
mod mesh;
mod ray;
mod transform;

pub use cut::{cut_mesh_by_plane, CutOptions, MeshCut};
pub use fit::{fit_plane, fit_sphere, NormalHint, PlaneFit, SphereFit};
pub use frame::{build_pelvic_frame, FrameConfig, LandmarkSet, PelvicFrame, YAxisSign};
pub use mesh::{Aabb, TriangleMesh};
pub use ray::{intersect_ray_mesh, intersect_ray_triangle, Ray, RayHit};
pub use transform::RigidTransform;

use nalgebra::Unit;

use crate::error::{Error, Result};
use crate::scalar::{lit, tol, Scalar};

pub type Point3<T> = nalgebra::Point3<T>;
pub type Vec3<T> = nalgebra::Vector3<T>;
pub type UnitVec3<T> = Unit<nalgebra::Vector3<T>>;

/// Normalizes `v`, failing when it is (numerically) zero.
pub fn unit<T: Scalar>(v: Vec3<T>) -> Result<UnitVec3<T>> {
    Unit::try_new(v, tol::<T>(1e-12)).ok_or_else(|| Error::Degenerate("zero-length direction".into()))
}

/// An oriented plane `{p : normal · p = offset}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T: Scalar> {
    pub normal: UnitVec3<T>,
    pub offset: T,
    pub label: Option<String>,
}

impl<T: Scalar> Plane<T> {
    pub fn new(normal: UnitVec3<T>, offset: T) -> Self {
        Self {
            normal,
            offset,
            label: None,
        }
    }

    pub fn through(point: &Point3<T>, normal: UnitVec3<T>) -> Self {
        Self::new(normal, normal.dot(&point.coords))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// `n·p − offset`; positive on the normal side.
    #[inline]
    pub fn signed_distance(&self, p: &Point3<T>) -> T {
        self.normal.dot(&p.coords) - self.offset
    }

    /// Orthogonal projection of `p` onto the plane.
    pub fn project(&self, p: &Point3<T>) -> Point3<T> {
        p - self.normal.into_inner() * self.signed_distance(p)
    }

    /// Point of the plane closest to the origin.
    pub fn origin_point(&self) -> Point3<T> {
        Point3::from(self.normal.into_inner() * self.offset)
    }

    /// The same locus with the opposite orientation.
    pub fn flipped(&self) -> Self {
        Self {
            normal: -self.normal,
            offset: -self.offset,
            label: self.label.clone(),
        }
    }

    /// Shifts the plane by `t` along its own normal.
    pub fn translated(&self, t: T) -> Self {
        Self {
            normal: self.normal,
            offset: self.offset + t,
            label: self.label.clone(),
        }
    }

    /// Applies a rigid motion to the locus.
    pub fn transformed(&self, tf: &RigidTransform<T>) -> Self {
        let normal = tf.apply_unit(&self.normal);
        let offset = self.offset + normal.dot(&tf.translation());
        Self {
            normal,
            offset,
            label: self.label.clone(),
        }
    }

    /// Two orthonormal in-plane directions `(u, v)` with `u × v = n`.
    pub fn basis(&self) -> (Vec3<T>, Vec3<T>) {
        orthonormal_basis(&self.normal)
    }
}

/// Orthonormal `(u, v)` completing `n` to a right-handed frame.
pub fn orthonormal_basis<T: Scalar>(n: &UnitVec3<T>) -> (Vec3<T>, Vec3<T>) {
    let a = if n.x.abs() < lit(0.9) { Vec3::x() } else { Vec3::y() };
    let u = n.cross(&a).normalize();
    let v = n.cross(&u);
    (u, v)
}

/// Signed distance of `p` from `plane`, positive on the normal side.
pub fn signed_point_plane_distance<T: Scalar>(p: &Point3<T>, plane: &Plane<T>) -> T {
    plane.signed_distance(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere<T: Scalar> {
    pub center: Point3<T>,
    pub radius: T,
}

impl<T: Scalar> Sphere<T> {
    pub fn new(center: Point3<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }
}
