//! Virtual tumor placement and margin-respecting cutting planes.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::findings::{Finding, FindingKind};
use crate::geometry::{
    fit_sphere, unit, PelvicFrame, Plane, Point3, RigidTransform, Sphere, TriangleMesh, UnitVec3, Vec3,
};
use crate::scalar::{lit, to_f64, tol, Scalar};

/// Default safety margin (mm).
pub const DEFAULT_SAFETY_MARGIN: f64 = 5.0;
/// Default virtual tumor radius (mm).
pub const DEFAULT_TUMOR_RADIUS: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutLabel {
    SupraAcetabular,
    InfraAcetabular,
    SuperiorPubicRamus,
    Auxiliary,
}

impl CutLabel {
    /// Type-II template order, which is also the resection order.
    pub const ALL: [CutLabel; 4] = [
        CutLabel::SupraAcetabular,
        CutLabel::InfraAcetabular,
        CutLabel::SuperiorPubicRamus,
        CutLabel::Auxiliary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CutLabel::SupraAcetabular => "supra-acetabular",
            CutLabel::InfraAcetabular => "infra-acetabular",
            CutLabel::SuperiorPubicRamus => "superior-pubic-ramus",
            CutLabel::Auxiliary => "auxiliary",
        }
    }
}

impl fmt::Display for CutLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CutLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CutLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Schema(format!("unknown cut label {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            _ => Err(Error::Schema(format!("unknown side {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TumorModel<T: Scalar> {
    pub sphere: Sphere<T>,
    pub safety_margin: T,
}

impl<T: Scalar> TumorModel<T> {
    pub fn new(sphere: Sphere<T>, safety_margin: T) -> Result<Self> {
        if !(safety_margin >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "safety margin must be non-negative, got {safety_margin}"
            )));
        }
        Ok(Self { sphere, safety_margin })
    }

    pub fn center(&self) -> Point3<T> {
        self.sphere.center
    }

    pub fn radius(&self) -> T {
        self.sphere.radius
    }
}

/// Where the tumor center comes from.
#[derive(Debug, Clone, Copy)]
pub enum TumorCenter<'a, T: Scalar> {
    HipCenter(Point3<T>),
    /// Hip center estimated by a sphere fit to acetabular surface points.
    AcetabularPoints(&'a [Point3<T>]),
}

pub fn make_tumor<T: Scalar>(center: TumorCenter<'_, T>, radius: T, margin: T) -> Result<TumorModel<T>> {
    let c = match center {
        TumorCenter::HipCenter(c) => c,
        TumorCenter::AcetabularPoints(points) => fit_sphere(points)?.sphere.center,
    };
    TumorModel::new(Sphere::new(c, radius)?, margin)
}

/// Closest distance from the plane to the tumor boundary (mm); negative
/// when the plane enters the tumor. The plane normal points away from the
/// tumor center.
pub fn planned_margin<T: Scalar>(plane: &Plane<T>, tumor: &TumorModel<T>) -> T {
    -plane.signed_distance(&tumor.sphere.center) - tumor.sphere.radius
}

/// Orients `plane` so its normal points away from `center`.
pub fn orient_away<T: Scalar>(plane: Plane<T>, center: &Point3<T>) -> Plane<T> {
    if plane.signed_distance(center) > T::zero() {
        plane.flipped()
    } else {
        plane
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedCut<T: Scalar> {
    pub label: CutLabel,
    /// Normal points away from the tumor center.
    pub plane: Plane<T>,
    pub planned_margin_mp: T,
}

impl<T: Scalar> PlannedCut<T> {
    /// Builds a cut from a plane, orienting it and computing Mp.
    pub fn new(label: CutLabel, plane: Plane<T>, tumor: &TumorModel<T>) -> Self {
        let plane = orient_away(plane, &tumor.sphere.center).with_label(label.as_str());
        let planned_margin_mp = planned_margin(&plane, tumor);
        Self {
            label,
            plane,
            planned_margin_mp,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResectionPlan<T: Scalar> {
    pub specimen_id: String,
    pub side: Side,
    pub tumor: TumorModel<T>,
    pub cuts: Vec<PlannedCut<T>>,
    /// Target pose of the jig base's engraved rectangle on the bone, once
    /// a jig has been designed for the plan.
    pub pattern_pose: Option<RigidTransform<T>>,
}

impl<T: Scalar> ResectionPlan<T> {
    pub fn new(
        specimen_id: impl Into<String>,
        side: Side,
        tumor: TumorModel<T>,
        cuts: Vec<PlannedCut<T>>,
    ) -> Result<Self> {
        check_unique(cuts.iter().map(|c| c.label))?;
        Ok(Self {
            specimen_id: specimen_id.into(),
            side,
            tumor,
            cuts,
            pattern_pose: None,
        })
    }

    pub fn cut(&self, label: CutLabel) -> Option<&PlannedCut<T>> {
        self.cuts.iter().find(|c| c.label == label)
    }

    pub fn labels(&self) -> Vec<CutLabel> {
        self.cuts.iter().map(|c| c.label).collect()
    }

    /// The plan moved rigidly (tumor, planes and pattern pose).
    pub fn transformed(&self, tf: &RigidTransform<T>) -> Self {
        let mut out = self.clone();
        out.tumor.sphere.center = tf.apply(&self.tumor.sphere.center);
        for cut in &mut out.cuts {
            cut.plane = cut.plane.transformed(tf);
        }
        out.pattern_pose = self.pattern_pose.as_ref().map(|p| tf.compose(p));
        out
    }
}

fn check_unique(labels: impl IntoIterator<Item = CutLabel>) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l) {
            return Err(Error::DuplicateLabel(l.to_string()));
        }
    }
    Ok(())
}

/// One plane per normal, tangent to the sphere of radius `r + margin`.
pub fn generate_margin_planes<T: Scalar>(
    tumor: &TumorModel<T>,
    normals: &[UnitVec3<T>],
    labels: &[CutLabel],
) -> Result<Vec<PlannedCut<T>>> {
    if normals.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} normals for {} labels",
            normals.len(),
            labels.len()
        )));
    }
    check_unique(labels.iter().copied())?;
    let reach = tumor.sphere.radius + tumor.safety_margin;
    Ok(normals
        .iter()
        .zip(labels)
        .map(|(n, &label)| {
            let plane = Plane::new(*n, n.dot(&tumor.sphere.center.coords) + reach).with_label(label.as_str());
            PlannedCut {
                label,
                planned_margin_mp: planned_margin(&plane, tumor),
                plane,
            }
        })
        .collect())
}

/// Template cut normals in pelvic-frame coordinates (X ventral, Y toward the
/// left ASIS, Z cranial) for a right or left hemipelvis.
pub fn type_ii_template_normals<T: Scalar>(side: Side) -> [(CutLabel, Vec3<T>); 4] {
    // Mirror the mediolateral component for the left side.
    let m = match side {
        Side::Right => 1.0,
        Side::Left => -1.0,
    };
    let v = |x: f64, y: f64, z: f64| Vec3::new(lit(x), lit(y * m), lit(z));
    [
        (CutLabel::SupraAcetabular, v(0.15, 0.2, 1.0)),
        (CutLabel::InfraAcetabular, v(-0.25, 0.15, -1.0)),
        (CutLabel::SuperiorPubicRamus, v(0.55, 0.6, -0.6)),
        (CutLabel::Auxiliary, v(-0.6, -0.5, 0.6)),
    ]
}

/// Four margin planes from the Type-II template, expressed in world space.
pub fn type_ii_plan<T: Scalar>(
    specimen_id: impl Into<String>,
    side: Side,
    tumor: TumorModel<T>,
    frame: &PelvicFrame<T>,
) -> Result<ResectionPlan<T>> {
    let template = type_ii_template_normals::<T>(side);
    let normals = template
        .iter()
        .map(|(_, n)| unit(frame.vector_to_world(n)))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<CutLabel> = template.iter().map(|(l, _)| *l).collect();
    let cuts = generate_margin_planes(&tumor, &normals, &labels)?;
    ResectionPlan::new(specimen_id, side, tumor, cuts)
}

/// True when mesh vertices lie strictly on both sides of the plane.
pub fn plane_intersects_mesh<T: Scalar>(plane: &Plane<T>, mesh: &TriangleMesh<T>) -> bool {
    let (mut below, mut above) = (false, false);
    for p in mesh.vertices() {
        let s = plane.signed_distance(p);
        below |= s < T::zero();
        above |= s > T::zero();
        if below && above {
            return true;
        }
    }
    false
}

/// Safety checks on a plan against the bone it will be executed on.
pub fn validate_plan<T: Scalar>(plan: &ResectionPlan<T>, bone: &TriangleMesh<T>) -> Vec<Finding> {
    let mut findings = Vec::new();
    let mut seen = HashSet::new();
    let slack = tol::<T>(1e-9);
    let margin = plan.tumor.safety_margin;
    for cut in &plan.cuts {
        if !seen.insert(cut.label) {
            findings.push(Finding::for_cut(
                FindingKind::DuplicateLabel,
                cut.label,
                "duplicate cut label",
            ));
        }
        let mp = planned_margin(&cut.plane, &plan.tumor);
        if (mp - cut.planned_margin_mp).abs() > tol::<T>(1e-9) * (T::one() + mp.abs()) {
            findings.push(Finding::for_cut(
                FindingKind::MarginMismatch,
                cut.label,
                format!(
                    "stored Mp {:.6} differs from recomputed {:.6}",
                    to_f64(cut.planned_margin_mp),
                    to_f64(mp)
                ),
            ));
        }
        if mp < margin - slack {
            findings.push(Finding::for_cut(
                FindingKind::MarginBelowSafety,
                cut.label,
                format!("Mp {:.1} < margin {:.1}", to_f64(mp), to_f64(margin)),
            ));
        }
        if mp < -slack {
            findings.push(Finding::for_cut(
                FindingKind::Intralesional,
                cut.label,
                "tumor not fully on the resected side of the plane",
            ));
        }
        if !plane_intersects_mesh(&cut.plane, bone) {
            findings.push(Finding::for_cut(
                FindingKind::PlaneMissesBone,
                cut.label,
                "plane does not intersect bone",
            ));
        }
    }
    findings
}
