use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector4};

use super::{Plane, Point3, Sphere, UnitVec3, Vec3};
use crate::error::{Error, Result};
use crate::scalar::{lit, tol, Scalar};

/// Resolves the sign ambiguity of a fitted normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalHint<T: Scalar> {
    /// Normal points to the side containing this point.
    TowardPoint(Point3<T>),
    /// Normal points away from this point.
    AwayFromPoint(Point3<T>),
    /// `normal · v > 0`.
    Along(Vec3<T>),
}

impl<T: Scalar> Default for NormalHint<T> {
    fn default() -> Self {
        NormalHint::Along(Vec3::z())
    }
}

impl<T: Scalar> NormalHint<T> {
    fn orient(&self, normal: UnitVec3<T>, centroid: &Point3<T>) -> UnitVec3<T> {
        let s = match self {
            NormalHint::TowardPoint(p) => normal.dot(&(p - centroid)),
            NormalHint::AwayFromPoint(p) => -normal.dot(&(p - centroid)),
            NormalHint::Along(v) => normal.dot(v),
        };
        if s < T::zero() {
            -normal
        } else {
            normal
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit<T: Scalar> {
    pub plane: Plane<T>,
    /// Root-mean-square orthogonal residual (mm).
    pub rms: T,
    pub centroid: Point3<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereFit<T: Scalar> {
    pub sphere: Sphere<T>,
    /// Root-mean-square radial residual (mm).
    pub rms: T,
}

fn centroid<T: Scalar>(points: &[Point3<T>]) -> Point3<T> {
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / lit::<T>(points.len() as f64))
}

/// Scatter matrix about the centroid, with eigenpairs sorted ascending.
fn principal_axes<T: Scalar>(points: &[Point3<T>], c: &Point3<T>) -> ([T; 3], [Vec3<T>; 3]) {
    let scatter = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p - c;
        acc + d * d.transpose()
    });
    let eig = scatter.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = order.map(|i| eig.eigenvalues[i].max(T::zero()));
    let vecs = order.map(|i| eig.eigenvectors.column(i).into_owned());
    (vals, vecs)
}

/// Total-least-squares plane: minimizes the sum of squared orthogonal
/// distances. The normal sign follows `hint`.
pub fn fit_plane<T: Scalar>(points: &[Point3<T>], hint: NormalHint<T>) -> Result<PlaneFit<T>> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let c = centroid(points);
    let (vals, vecs) = principal_axes(points, &c);
    if vals[1] <= vals[2] * tol::<T>(1e-20) {
        return Err(Error::Degenerate("points are collinear".into()));
    }
    let normal = hint.orient(UnitVec3::new_normalize(vecs[0]), &c);
    let plane = Plane::through(&c, normal);
    let ss = points
        .iter()
        .fold(T::zero(), |acc, p| acc + plane.signed_distance(p).powi(2));
    let rms = (ss / lit::<T>(points.len() as f64)).sqrt();
    Ok(PlaneFit {
        plane,
        rms,
        centroid: c,
    })
}

/// Least-squares sphere: algebraic fit for initialization, then
/// Gauss–Newton on the geometric (radial) residual.
pub fn fit_sphere<T: Scalar>(points: &[Point3<T>]) -> Result<SphereFit<T>> {
    if points.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: points.len(),
        });
    }
    let c0 = centroid(points);
    let (vals, _) = principal_axes(points, &c0);
    if vals[0] <= vals[2] * tol::<T>(1e-20) {
        return Err(Error::Degenerate("points are coplanar".into()));
    }

    // Algebraic fit in centroid-relative coordinates:
    // 2 q·c + k = |q|², with r² = k + |c|².
    let n = points.len();
    let mut a = DMatrix::<T>::zeros(n, 4);
    let mut b = DVector::<T>::zeros(n);
    let two = lit::<T>(2.0);
    for (i, p) in points.iter().enumerate() {
        let q = p - c0;
        a[(i, 0)] = two * q.x;
        a[(i, 1)] = two * q.y;
        a[(i, 2)] = two * q.z;
        a[(i, 3)] = T::one();
        b[i] = q.norm_squared();
    }
    let sol = a
        .svd(true, true)
        .solve(&b, T::default_epsilon())
        .map_err(|e| Error::Degenerate(format!("sphere system: {e}")))?;
    let mut center = Vec3::new(sol[0], sol[1], sol[2]);
    let r2 = sol[3] + center.norm_squared();
    if !(r2 > T::zero()) {
        return Err(Error::Degenerate("algebraic sphere fit has no real radius".into()));
    }
    let mut radius = r2.sqrt();

    let rel = points.iter().map(|p| p - c0).collect::<Vec<_>>();
    for _ in 0..100 {
        let mut jtj = Matrix4::<T>::zeros();
        let mut jtr = Vector4::<T>::zeros();
        for q in &rel {
            let d = q - center;
            let dist = d.norm();
            if dist <= T::default_epsilon() {
                continue;
            }
            let u = d / dist;
            let jrow = Vector4::new(-u.x, -u.y, -u.z, -T::one());
            let res = dist - radius;
            jtj += jrow * jrow.transpose();
            jtr += jrow * res;
        }
        let Some(step) = jtj.lu().solve(&(-jtr)) else {
            break;
        };
        center += Vec3::new(step[0], step[1], step[2]);
        radius += step[3];
        if step.norm() <= T::default_epsilon() * lit(16.0) * (T::one() + radius) {
            break;
        }
    }
    let ss = rel
        .iter()
        .fold(T::zero(), |acc, q| acc + ((q - center).norm() - radius).powi(2));
    let rms = (ss / lit::<T>(n as f64)).sqrt();
    Ok(SphereFit {
        sphere: Sphere::new(c0 + center, radius.abs())?,
        rms,
    })
}
