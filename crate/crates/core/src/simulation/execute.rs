//! Executing planned cuts with injected error on a bone mesh.

use nalgebra::UnitQuaternion;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{sample_execution_error, ErrorModel, ExecutionError};
use crate::error::{Error, Result};
use crate::findings::{Finding, FindingKind};
use crate::geometry::{cut_mesh_by_plane, unit, CutOptions, PelvicFrame, Plane, Point3, TriangleMesh, Vec3};
use crate::planning::{plane_intersects_mesh, CutLabel, PlannedCut, ResectionPlan, Side, TumorModel};
use crate::scalar::{lit, rad, Scalar};

/// Saw blade thickness used by default (mm).
pub const DEFAULT_KERF: f64 = 1.27;

/// Point the injected rotations turn about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pivot {
    /// The tumor center: the margin changes by exactly `dt`.
    #[default]
    TumorCenter,
    /// Centroid of the translated plane's intersection with the bone.
    IntersectionCentroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub kerf: f64,
    pub pivot: Pivot,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            kerf: DEFAULT_KERF,
            pivot: Pivot::TumorCenter,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutResult<T: Scalar> {
    pub planned: PlannedCut<T>,
    pub error: ExecutionError,
    /// Resected surface of the remaining bone (the kept-side kerf face),
    /// normal away from the tumor.
    pub achieved_plane: Plane<T>,
    pub cut_face_points: Vec<Point3<T>>,
    /// Triangulated cut face, for heatmaps.
    pub cut_face: TriangleMesh<T>,
    pub kerf: T,
}

/// A cut plus the two pieces it produced.
#[derive(Debug, Clone)]
pub struct ExecutedCut<T: Scalar> {
    pub result: CutResult<T>,
    /// Remaining bone on the healthy side.
    pub kept: TriangleMesh<T>,
    /// Tumor-side piece.
    pub removed: TriangleMesh<T>,
}

/// Rotates `n` so that its YZ projection line turns by `roll` about X and
/// its XZ projection line by `pitch` about Y (frame coordinates, radians).
///
/// Composing two rotations would couple the axes; instead the result is
/// the line lying in both planes spanned by an axis and its rotated
/// projection. Its projections may point against the rotated ones, which
/// leaves the line angles unchanged.
pub(crate) fn inject_rotation<T: Scalar>(n: &Vec3<T>, roll: T, pitch: T) -> Option<Vec3<T>> {
    let eps = lit::<T>(1e-12);
    let yz = Vec3::new(T::zero(), n.y, n.z);
    let xz = Vec3::new(n.x, T::zero(), n.z);
    let u = UnitQuaternion::from_axis_angle(&Vec3::x_axis(), roll) * yz;
    let v = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), pitch) * xz;
    let (yz_ok, xz_ok) = (yz.norm() > eps, xz.norm() > eps);
    let out = match (yz_ok, xz_ok) {
        (true, true) => Vec3::x().cross(&u).cross(&Vec3::y().cross(&v)),
        // n along X: only pitch acts; n along Y: only roll acts.
        (false, true) if roll == T::zero() => v,
        (true, false) if pitch == T::zero() => u,
        _ => return None,
    };
    let norm = out.norm();
    if norm <= eps {
        return None;
    }
    let out = out / norm;
    Some(if out.dot(n) < T::zero() { -out } else { out })
}

fn intersection_centroid<T: Scalar>(plane: &Plane<T>, bone: &TriangleMesh<T>) -> Option<Point3<T>> {
    let v = bone.vertices();
    let mut sum = Vec3::zeros();
    let mut count = 0usize;
    for tri in bone.triangles() {
        for k in 0..3 {
            let (a, b) = (v[tri[k]], v[tri[(k + 1) % 3]]);
            let (da, db) = (plane.signed_distance(&a), plane.signed_distance(&b));
            if (da < T::zero()) != (db < T::zero()) {
                let s = da / (da - db);
                sum += a.coords + (b - a) * s;
                count += 1;
            }
        }
    }
    (count > 0).then(|| Point3::from(sum / lit::<T>(count as f64)))
}

/// The plane actually cut when `cut` is executed with `err`.
pub fn perturb_plane<T: Scalar>(
    cut: &PlannedCut<T>,
    err: &ExecutionError,
    frame: &PelvicFrame<T>,
    tumor: &TumorModel<T>,
    bone: &TriangleMesh<T>,
    pivot: Pivot,
) -> Result<Plane<T>> {
    let n = cut.plane.normal.into_inner();
    let nf = frame.vector_to_frame(&n);
    let rotated = inject_rotation(&nf, rad(lit::<T>(err.roll_deg)), rad(lit::<T>(err.pitch_deg)))
        .ok_or_else(|| Error::InjectionNotRepresentable(cut.label.to_string()))?;
    let n2 = unit(frame.vector_to_world(&rotated))?;
    let dt = lit::<T>(err.dt_mm);
    let offset = match pivot {
        Pivot::TumorCenter => {
            let c = tumor.sphere.center;
            let reach = cut.plane.offset - n.dot(&c.coords);
            n2.dot(&c.coords) + reach + dt
        }
        Pivot::IntersectionCentroid => {
            let shifted = cut.plane.translated(dt);
            let p =
                intersection_centroid(&shifted, bone).ok_or_else(|| Error::PlaneMissesBone(cut.label.to_string()))?;
            n2.dot(&p.coords)
        }
    };
    Ok(Plane::new(n2, offset).with_label(cut.label.as_str()))
}

/// Cuts `bone` along the perturbed plane. The blade sits on the tumor side
/// of the achieved surface, so the kerf eats into the specimen.
pub fn execute_cut<T: Scalar>(
    cut: &PlannedCut<T>,
    err: &ExecutionError,
    frame: &PelvicFrame<T>,
    tumor: &TumorModel<T>,
    bone: &TriangleMesh<T>,
    options: &SimOptions,
) -> Result<ExecutedCut<T>> {
    if options.kerf < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "kerf must be non-negative, got {}",
            options.kerf
        )));
    }
    let achieved = perturb_plane(cut, err, frame, tumor, bone, options.pivot)?;
    if !plane_intersects_mesh(&achieved, bone) {
        return Err(Error::PlaneMissesBone(cut.label.to_string()));
    }
    let kerf = lit::<T>(options.kerf);
    let blade = achieved.translated(-kerf * lit(0.5));
    let pieces = cut_mesh_by_plane(bone, &blade, CutOptions::kerf(kerf))?;
    Ok(ExecutedCut {
        result: CutResult {
            planned: cut.clone(),
            error: *err,
            achieved_plane: achieved,
            cut_face_points: pieces.cut_face_points,
            cut_face: pieces.cut_face,
            kerf,
        },
        kept: pieces.kept,
        removed: pieces.removed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoidCut {
    pub label: CutLabel,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct TrialResult<T: Scalar> {
    pub specimen_id: String,
    pub side: Side,
    pub seed: u64,
    pub cuts: Vec<CutResult<T>>,
    pub void: Vec<VoidCut>,
    pub findings: Vec<Finding>,
    /// The en-bloc specimen after all cuts.
    pub specimen: TriangleMesh<T>,
}

impl<T: Scalar> TrialResult<T> {
    pub fn is_complete(&self) -> bool {
        self.void.is_empty()
    }
}

/// Executes the plan's cuts in order with independent draws from `model`
/// (seeded by `model.seed`). Each cut works on the tumor-side piece left by
/// the previous one.
pub fn run_trial<T: Scalar>(
    plan: &ResectionPlan<T>,
    model: &ErrorModel,
    frame: &PelvicFrame<T>,
    bone: &TriangleMesh<T>,
    options: &SimOptions,
) -> Result<TrialResult<T>> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    // Draw everything up front so a void cut does not shift later draws.
    let errors: Vec<ExecutionError> = plan
        .cuts
        .iter()
        .map(|_| sample_execution_error(model, &mut rng))
        .collect();
    let mut current = bone.clone();
    let mut trial = TrialResult {
        specimen_id: plan.specimen_id.clone(),
        side: plan.side,
        seed: model.seed,
        cuts: Vec::new(),
        void: Vec::new(),
        findings: Vec::new(),
        specimen: TriangleMesh::empty(),
    };
    for (cut, err) in plan.cuts.iter().zip(&errors) {
        match execute_cut(cut, err, frame, &plan.tumor, &current, options) {
            Ok(done) => {
                current = done.removed;
                trial.cuts.push(done.result);
            }
            Err(e @ (Error::PlaneMissesBone(_) | Error::InjectionNotRepresentable(_))) => {
                let reason = e.to_string();
                trial
                    .findings
                    .push(Finding::for_cut(FindingKind::VoidCut, cut.label, reason.clone()));
                trial.void.push(VoidCut {
                    label: cut.label,
                    reason,
                });
            }
            Err(e) => return Err(e),
        }
    }
    trial.specimen = current;
    Ok(trial)
}
