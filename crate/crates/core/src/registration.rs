//! Fiducial registration, marker tracking and pattern projection.

use nalgebra::{Matrix3, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::findings::{Finding, FindingKind};
use crate::geometry::{intersect_ray_mesh, unit, Point3, Ray, RigidTransform, TriangleMesh, Vec3};
use crate::scalar::{lit, tol, Scalar};

/// Corresponding model-space and scanner-space fiducials (by index).
#[derive(Debug, Clone, PartialEq)]
pub struct FiducialSet<T: Scalar> {
    pub model_points: Vec<Point3<T>>,
    pub observed_points: Vec<Point3<T>>,
}

impl<T: Scalar> FiducialSet<T> {
    pub fn new(model_points: Vec<Point3<T>>, observed_points: Vec<Point3<T>>) -> Result<Self> {
        if model_points.len() != observed_points.len() {
            return Err(Error::LengthMismatch(model_points.len(), observed_points.len()));
        }
        if model_points.len() < 3 {
            return Err(Error::TooFewPoints {
                needed: 3,
                got: model_points.len(),
            });
        }
        Ok(Self {
            model_points,
            observed_points,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Registration<T: Scalar> {
    /// Maps model space into scanner space.
    pub transform: RigidTransform<T>,
    /// Root-mean-square fiducial residual (mm).
    pub fre: T,
    pub findings: Vec<Finding>,
}

fn centroid<T: Scalar>(pts: &[Point3<T>]) -> Point3<T> {
    let sum = pts.iter().fold(Vec3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / lit::<T>(pts.len() as f64))
}

/// Least-squares proper rigid motion taking `a[i]` onto `b[i]`. The flag
/// reports that the unconstrained optimum was a reflection.
pub fn procrustes<T: Scalar>(a: &[Point3<T>], b: &[Point3<T>]) -> Result<(RigidTransform<T>, bool)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: a.len(),
        });
    }
    let (ca, cb) = (centroid(a), centroid(b));
    let mut h = Matrix3::<T>::zeros();
    let mut spread = Matrix3::<T>::zeros();
    for (p, q) in a.iter().zip(b) {
        let (da, db) = (p - ca, q - cb);
        h += da * db.transpose();
        spread += da * da.transpose();
    }
    // Rank of the model spread: collinear sets leave a rotation free.
    let sv = spread.symmetric_eigenvalues();
    let mut s = [sv[0], sv[1], sv[2]];
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    if !(s[0] > T::zero()) || s[1] <= s[0] * tol::<T>(1e-18) {
        return Err(Error::Degenerate("collinear fiducials".into()));
    }

    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant();
    let mut reflection = false;
    let r = if d < T::zero() {
        let k = (0..3)
            .min_by(|&i, &j| {
                svd.singular_values[i]
                    .partial_cmp(&svd.singular_values[j])
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(2);
        let smax = svd.singular_values.max();
        reflection = svd.singular_values[k] > smax * tol::<T>(1e-9);
        let mut fix = Matrix3::identity();
        fix[(k, k)] = -T::one();
        v * fix * u.transpose()
    } else {
        v * u.transpose()
    };
    let rot = UnitQuaternion::from_matrix(&r);
    let t = cb.coords - rot * ca.coords;
    Ok((RigidTransform::from_parts(rot, t), reflection))
}

/// RMS of `|T(model_i) − observed_i|`.
pub fn fiducial_registration_error<T: Scalar>(tf: &RigidTransform<T>, set: &FiducialSet<T>) -> T {
    let ss = set
        .model_points
        .iter()
        .zip(&set.observed_points)
        .fold(T::zero(), |acc, (m, o)| acc + (tf.apply(m) - o).norm_squared());
    (ss / lit::<T>(set.model_points.len() as f64)).sqrt()
}

pub fn register_rigid<T: Scalar>(set: &FiducialSet<T>) -> Result<Registration<T>> {
    let (transform, reflection) = procrustes(&set.model_points, &set.observed_points)?;
    let mut findings = Vec::new();
    if reflection {
        findings.push(Finding::new(
            FindingKind::ReflectionCorrected,
            "fiducials are mirrored; best proper rotation returned",
        ));
    }
    let fre = fiducial_registration_error(&transform, set);
    Ok(Registration {
        transform,
        fre,
        findings,
    })
}

pub fn target_registration_error<T: Scalar>(
    transform_true: &RigidTransform<T>,
    transform_est: &RigidTransform<T>,
    target: &Point3<T>,
) -> T {
    (transform_true.apply(target) - transform_est.apply(target)).norm()
}

/// Vertices of a regular tetrahedron with the given edge length, centered
/// on the origin: the default 3D-marker fiducial layout.
pub fn tetrahedral_marker<T: Scalar>(edge: T) -> [Point3<T>; 4] {
    let s = edge / lit::<T>(8.0f64.sqrt());
    let p = |x: f64, y: f64, z: f64| Point3::new(s * lit(x), s * lit(y), s * lit(z));
    [
        p(1.0, 1.0, 1.0),
        p(1.0, -1.0, -1.0),
        p(-1.0, 1.0, -1.0),
        p(-1.0, -1.0, 1.0),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoseSource {
    Registration,
    TrackingUpdate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedPose<T: Scalar> {
    /// Bone (model) → scanner.
    pub pose: RigidTransform<T>,
    pub timestamp: f64,
    pub frame_index: u64,
    pub source: PoseSource,
}

impl<T: Scalar> TrackedPose<T> {
    pub fn from_registration(reg: &Registration<T>, timestamp: f64) -> Self {
        Self {
            pose: reg.transform,
            timestamp,
            frame_index: 0,
            source: PoseSource::Registration,
        }
    }
}

/// New bone pose from a marker observation: `observation ∘ mount⁻¹`, where
/// `mount` is the marker pose in bone coordinates.
pub fn track_update<T: Scalar>(
    prev: &TrackedPose<T>,
    observation: &RigidTransform<T>,
    mount: &RigidTransform<T>,
    timestamp: f64,
) -> TrackedPose<T> {
    TrackedPose {
        pose: observation.compose(&mount.inverse()),
        timestamp,
        frame_index: prev.frame_index + 1,
        source: PoseSource::TrackingUpdate,
    }
}

/// Pinhole projector. Local +Z is the optical axis; the center of
/// projection is the origin of `pose`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorModel<T: Scalar> {
    /// Projector local → world.
    pub pose: RigidTransform<T>,
    pub fx: T,
    pub fy: T,
    /// Half-extent of the image rectangle at unit depth (mm).
    pub half_extent: [T; 2],
}

impl<T: Scalar> ProjectorModel<T> {
    pub fn new(pose: RigidTransform<T>, fx: T, fy: T, half_extent: [T; 2]) -> Result<Self> {
        if !(fx > T::zero() && fy > T::zero()) {
            return Err(Error::InvalidParameter("focal parameters must be positive".into()));
        }
        if !(half_extent[0] > T::zero() && half_extent[1] > T::zero()) {
            return Err(Error::InvalidParameter("image rectangle must be non-empty".into()));
        }
        Ok(Self {
            pose,
            fx,
            fy,
            half_extent,
        })
    }

    /// Projector at `center` looking at `target`.
    pub fn looking_at(center: Point3<T>, target: Point3<T>, fx: T, fy: T, half_extent: [T; 2]) -> Result<Self> {
        let z = unit(target - center)?;
        let helper = if z.x.abs() < lit(0.9) { Vec3::x() } else { Vec3::y() };
        let x = unit(helper - z.into_inner() * helper.dot(&z))?;
        let y = z.cross(&x);
        let r = Matrix3::from_columns(&[x.into_inner(), y, z.into_inner()]);
        Self::new(RigidTransform::from_matrix(r, center.coords)?, fx, fy, half_extent)
    }

    pub fn center(&self) -> Point3<T> {
        Point3::from(self.pose.translation())
    }

    pub fn in_frustum(&self, p: &Point3<T>) -> bool {
        let q = self.pose.inverse().apply(p);
        if q.z <= T::zero() {
            return false;
        }
        let (u, v) = (self.fx * q.x / q.z, self.fy * q.y / q.z);
        u.abs() <= self.half_extent[0] && v.abs() <= self.half_extent[1]
    }
}

/// The engraved rectangle in its own frame: centered, in the local XY plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternRectangle<T: Scalar> {
    pub width: T,
    pub height: T,
    pub samples_per_side: usize,
}

impl<T: Scalar> PatternRectangle<T> {
    /// Counter-clockwise outline samples starting at the (−w/2, −h/2) corner.
    pub fn outline(&self) -> Vec<Point3<T>> {
        let n = self.samples_per_side.max(1);
        let (hw, hh) = (self.width * lit(0.5), self.height * lit(0.5));
        let corners = [
            Point3::new(-hw, -hh, T::zero()),
            Point3::new(hw, -hh, T::zero()),
            Point3::new(hw, hh, T::zero()),
            Point3::new(-hw, hh, T::zero()),
        ];
        let mut out = Vec::with_capacity(4 * n);
        for k in 0..4 {
            let (a, b) = (corners[k], corners[(k + 1) % 4]);
            for i in 0..n {
                out.push(a + (b - a) * lit::<T>(i as f64 / n as f64));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPattern<T: Scalar> {
    /// One entry per outline sample; `None` where the ray missed the bone.
    pub points: Vec<Option<Point3<T>>>,
    pub triangles: Vec<Option<usize>>,
    pub missed: Vec<usize>,
}

impl<T: Scalar> ProjectedPattern<T> {
    /// Hit points in outline order.
    pub fn polyline(&self) -> Vec<Point3<T>> {
        self.points.iter().flatten().copied().collect()
    }
}

pub fn project_pattern<T: Scalar>(
    rectangle: &PatternRectangle<T>,
    target_pose: &RigidTransform<T>,
    projector: &ProjectorModel<T>,
    bone: &TriangleMesh<T>,
) -> Result<ProjectedPattern<T>> {
    let world: Vec<Point3<T>> = rectangle.outline().iter().map(|p| target_pose.apply(p)).collect();
    if world.iter().any(|p| !projector.in_frustum(p)) {
        return Err(Error::OutsideFrustum);
    }
    let origin = projector.center();
    let mut out = ProjectedPattern {
        points: Vec::with_capacity(world.len()),
        triangles: Vec::with_capacity(world.len()),
        missed: Vec::new(),
    };
    for (k, p) in world.iter().enumerate() {
        let hit = unit(p - origin)
            .ok()
            .and_then(|d| intersect_ray_mesh(&Ray { origin, direction: d }, bone));
        match hit {
            Some(h) => {
                out.points.push(Some(h.point));
                out.triangles.push(Some(h.triangle));
            }
            None => {
                out.points.push(None);
                out.triangles.push(None);
                out.missed.push(k);
            }
        }
    }
    if out.missed.len() == world.len() {
        return Err(Error::PatternMissesBone);
    }
    Ok(out)
}

/// Findings for outline samples that missed the bone.
pub fn projection_findings<T: Scalar>(p: &ProjectedPattern<T>) -> Vec<Finding> {
    if p.missed.is_empty() {
        Vec::new()
    } else {
        vec![Finding::new(
            FindingKind::PatternPointMissed,
            format!(
                "{} of {} pattern points missed the bone",
                p.missed.len(),
                p.points.len()
            ),
        )]
    }
}

/// Simulated scanner session: `observations` noisy scans of the fiducials
/// under `truth`, registered jointly. Returns the registration and the TRE at
/// each target.
pub fn simulate_session(
    fiducials: &[Point3<f64>],
    truth: &RigidTransform<f64>,
    noise_sd: f64,
    seed: u64,
    observations: usize,
    targets: &[Point3<f64>],
) -> Result<(Registration<f64>, Vec<f64>)> {
    if observations == 0 {
        return Err(Error::InvalidParameter("observation count must be positive".into()));
    }
    let noise = Normal::new(0.0, noise_sd)
        .map_err(|_| Error::InvalidParameter(format!("noise sd {noise_sd} must be finite and >= 0")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Vec::with_capacity(fiducials.len() * observations);
    let mut observed = Vec::with_capacity(model.capacity());
    for _ in 0..observations {
        for p in fiducials {
            let jitter = Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            model.push(*p);
            observed.push(truth.apply(p) + jitter);
        }
    }
    let reg = register_rigid(&FiducialSet::new(model, observed)?)?;
    let tre = targets
        .iter()
        .map(|t| target_registration_error(truth, &reg.transform, t))
        .collect();
    Ok((reg, tre))
}
