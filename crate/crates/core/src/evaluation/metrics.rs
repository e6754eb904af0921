//! Per-plane deviation metrics between planned and resected planes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::findings::{Finding, FindingKind};
use crate::geometry::{fit_plane, NormalHint, PelvicFrame, Plane, PlaneFit, Point3, Vec3};
use crate::planning::{planned_margin, CutLabel, PlannedCut, ResectionPlan, Side, TumorModel};
use crate::scalar::{deg, lit, Scalar};
use crate::simulation::{CutResult, TrialResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneDeviation<T: Scalar> {
    pub label: CutLabel,
    /// |Mp − Mr| (mm).
    pub distance_deviation: T,
    /// Mr − Mp (mm); negative when the resection came closer to the tumor.
    pub signed_deviation: T,
    /// Rotation about the pelvic X axis, 0–90°; `None` when undefined.
    pub roll_deviation: Option<T>,
    /// Rotation about the pelvic Y axis, 0–90°; `None` when undefined.
    pub pitch_deviation: Option<T>,
    /// Signed roll (right-handed about +X) between the projected plane
    /// traces, degrees in (−90, 90].
    pub roll_signed: Option<T>,
    /// Signed pitch (right-handed about +Y), degrees in (−90, 90].
    pub pitch_signed: Option<T>,
    pub mr: T,
    pub mp: T,
}

impl<T: Scalar> PlaneDeviation<T> {
    /// UndefinedAngle findings for missing roll/pitch values.
    pub fn findings(&self) -> Vec<Finding> {
        let mut out = Vec::new();
        if self.roll_deviation.is_none() {
            out.push(Finding::for_cut(
                FindingKind::UndefinedAngle,
                self.label,
                "roll undefined: a normal is parallel to the pelvic X axis",
            ));
        }
        if self.pitch_deviation.is_none() {
            out.push(Finding::for_cut(
                FindingKind::UndefinedAngle,
                self.label,
                "pitch undefined: a normal is parallel to the pelvic Y axis",
            ));
        }
        out
    }
}

/// Total-least-squares plane through the cut face, oriented like `planned`.
pub fn extract_resected_plane<T: Scalar>(points: &[Point3<T>], planned: &Plane<T>) -> Result<PlaneFit<T>> {
    fit_plane(points, NormalHint::Along(planned.normal.into_inner()))
}

/// Projection of `v` with component `drop` (0 = X, 1 = Y) removed.
fn project<T: Scalar>(v: &Vec3<T>, drop: usize) -> Vec3<T> {
    let mut p = *v;
    p[drop] = T::zero();
    p
}

/// Unsigned line angle in [0, 90] and the signed line angle about `axis`
/// in (−90, 90]. Both ignore the sign of the projected normals.
fn projected_angles<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>, axis: usize) -> Option<(T, T)> {
    let (p, q) = (project(a, axis), project(b, axis));
    let scale = p.norm() * q.norm();
    if scale <= lit(1e-12) {
        return None;
    }
    let cross = p.cross(&q);
    let dot = p.dot(&q);
    let line = deg(cross.norm().atan2(dot.abs()));
    let mut signed = deg(cross[axis].atan2(dot));
    let half = lit::<T>(180.0);
    if signed > lit(90.0) {
        signed -= half;
    } else if signed <= lit(-90.0) {
        signed += half;
    }
    Some((line, signed))
}

pub fn deviations<T: Scalar>(
    planned: &PlannedCut<T>,
    resected: &Plane<T>,
    tumor: &TumorModel<T>,
    frame: &PelvicFrame<T>,
) -> PlaneDeviation<T> {
    let mp = planned_margin(&planned.plane, tumor);
    let mr = planned_margin(resected, tumor);
    let a = frame.vector_to_frame(&planned.plane.normal.into_inner());
    let b = frame.vector_to_frame(&resected.normal.into_inner());
    let roll = projected_angles(&a, &b, 0);
    let pitch = projected_angles(&a, &b, 1);
    PlaneDeviation {
        label: planned.label,
        distance_deviation: (mp - mr).abs(),
        signed_deviation: mr - mp,
        roll_deviation: roll.map(|r| r.0),
        pitch_deviation: pitch.map(|p| p.0),
        roll_signed: roll.map(|r| r.1),
        pitch_signed: pitch.map(|p| p.1),
        mr,
        mp,
    }
}

/// Which resected plane the metrics are computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaneSource {
    /// The achieved plane as executed.
    #[default]
    Analytic,
    /// A plane re-fit from the recorded cut-face points.
    Refit,
}

pub fn evaluate_cut<T: Scalar>(
    result: &CutResult<T>,
    tumor: &TumorModel<T>,
    frame: &PelvicFrame<T>,
    source: PlaneSource,
) -> Result<PlaneDeviation<T>> {
    let resected = match source {
        PlaneSource::Analytic => result.achieved_plane.clone(),
        PlaneSource::Refit => extract_resected_plane(&result.cut_face_points, &result.planned.plane)?.plane,
    };
    Ok(deviations(&result.planned, &resected, tumor, frame))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecimenReport<T: Scalar> {
    pub specimen_id: String,
    pub side: Side,
    pub planes: Vec<PlaneDeviation<T>>,
    /// Largest distance deviation over the specimen's planes (mm).
    pub max_deviation: T,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<Finding>,
}

pub fn max_deviation<T: Scalar>(planes: &[PlaneDeviation<T>]) -> Result<T> {
    planes
        .iter()
        .map(|p| p.distance_deviation)
        .fold(None, |m: Option<T>, d| Some(m.map_or(d, |m| m.max(d))))
        .ok_or(Error::EmptySample)
}

pub fn specimen_report<T: Scalar>(
    specimen_id: impl Into<String>,
    side: Side,
    planes: Vec<PlaneDeviation<T>>,
) -> Result<SpecimenReport<T>> {
    let max_deviation = max_deviation(&planes)?;
    let findings = planes.iter().flat_map(|p| p.findings()).collect();
    Ok(SpecimenReport {
        specimen_id: specimen_id.into(),
        side,
        planes,
        max_deviation,
        findings,
    })
}

/// Deviations for every executed cut of a trial.
pub fn evaluate_trial<T: Scalar>(
    trial: &TrialResult<T>,
    plan: &ResectionPlan<T>,
    frame: &PelvicFrame<T>,
    source: PlaneSource,
) -> Result<SpecimenReport<T>> {
    let planes = trial
        .cuts
        .iter()
        .map(|c| evaluate_cut(c, &plan.tumor, frame, source))
        .collect::<Result<Vec<_>>>()?;
    let mut report = specimen_report(trial.specimen_id.clone(), trial.side, planes)?;
    report.findings.splice(0..0, trial.findings.iter().cloned());
    Ok(report)
}
