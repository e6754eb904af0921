use super::{Point3, TriangleMesh, UnitVec3};
use crate::scalar::{tol, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<T: Scalar> {
    pub origin: Point3<T>,
    pub direction: UnitVec3<T>,
}

impl<T: Scalar> Ray<T> {
    pub fn at(&self, t: T) -> Point3<T> {
        self.origin + self.direction.into_inner() * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit<T: Scalar> {
    pub t: T,
    pub point: Point3<T>,
    pub triangle: usize,
    /// Barycentric weights of the hit on its triangle.
    pub barycentric: [T; 3],
}

/// Möller–Trumbore; returns `(t, u, v)` for hits with `t > 0`.
pub fn intersect_ray_triangle<T: Scalar>(ray: &Ray<T>, tri: &[Point3<T>; 3]) -> Option<(T, T, T)> {
    let eps = tol::<T>(1e-14);
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let d = ray.direction.into_inner();
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() <= eps * e1.norm() * e2.norm() {
        return None;
    }
    let inv = T::one() / det;
    let s = ray.origin - tri[0];
    let u = s.dot(&p) * inv;
    if u < -eps || u > T::one() + eps {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < -eps || u + v > T::one() + eps {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > eps).then_some((t, u, v))
}

/// First hit of `ray` on `mesh` (brute force over all triangles).
pub fn intersect_ray_mesh<T: Scalar>(ray: &Ray<T>, mesh: &TriangleMesh<T>) -> Option<RayHit<T>> {
    let mut best: Option<RayHit<T>> = None;
    for k in 0..mesh.triangles().len() {
        let tri = mesh.corners(k);
        if let Some((t, u, v)) = intersect_ray_triangle(ray, &tri) {
            if best.as_ref().is_none_or(|b| t < b.t) {
                let w = T::one() - u - v;
                // Rebuild the point from barycentrics so it lies on the triangle.
                let point = Point3::from(tri[0].coords * w + tri[1].coords * u + tri[2].coords * v);
                best = Some(RayHit {
                    t,
                    point,
                    triangle: k,
                    barycentric: [w, u, v],
                });
            }
        }
    }
    best
}
