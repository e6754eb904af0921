use crate::error::Result;
use crate::findings::Finding;
use crate::geometry::{build_pelvic_frame, FrameConfig, LandmarkSet, PelvicFrame, Point3, TriangleMesh};
use crate::jig::{resection_sequence, select_pins, Catalog, FitOptions, PinSelection, ResectionSequence};
use crate::planning::{
    make_tumor, type_ii_plan, validate_plan, ResectionPlan, Side, TumorCenter, DEFAULT_SAFETY_MARGIN,
    DEFAULT_TUMOR_RADIUS,
};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    pub tumor_radius: f64,
    pub safety_margin: f64,
    pub frame: FrameConfig,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            tumor_radius: DEFAULT_TUMOR_RADIUS,
            safety_margin: DEFAULT_SAFETY_MARGIN,
            frame: FrameConfig::default(),
        }
    }
}

/// Plan of one hemipelvis before any jig is designed.
#[derive(Debug, Clone)]
pub struct SpecimenPlan<T: Scalar> {
    pub frame: PelvicFrame<T>,
    pub plan: ResectionPlan<T>,
    pub findings: Vec<Finding>,
}

/// Frame from the landmarks, tumor on the hip center (sphere-fit from the
/// acetabular samples when there are any) and the four Type-II planes.
pub fn plan_hemipelvis<T: Scalar>(
    specimen_id: &str,
    side: Side,
    landmarks: &LandmarkSet<T>,
    acetabular: &[Point3<T>],
    bone: &TriangleMesh<T>,
    options: &PlanOptions,
) -> Result<SpecimenPlan<T>> {
    let frame = build_pelvic_frame(landmarks, options.frame)?;
    let center = if acetabular.is_empty() {
        let hc = landmarks.hip_center.ok_or_else(|| {
            crate::Error::InvalidParameter("neither a hip center nor acetabular points were given".into())
        })?;
        TumorCenter::HipCenter(hc)
    } else {
        TumorCenter::AcetabularPoints(acetabular)
    };
    let tumor = make_tumor(center, lit(options.tumor_radius), lit(options.safety_margin))?;
    let plan = type_ii_plan(specimen_id, side, tumor, &frame)?;
    let findings = validate_plan(&plan, bone);
    Ok(SpecimenPlan { frame, plan, findings })
}

/// A plan with its jig designed.
#[derive(Debug, Clone)]
pub struct JigDesign<T: Scalar> {
    pub sequence: ResectionSequence<T>,
    pub pins: Vec<PinSelection<T>>,
}

/// Designs the three-stage jig for a plan and records the engraved
/// pattern's target pose on it.
pub fn design_jig<T: Scalar>(
    plan: &mut ResectionPlan<T>,
    bone: &TriangleMesh<T>,
    catalog: &Catalog,
    options: &FitOptions,
) -> Result<JigDesign<T>> {
    let sequence = resection_sequence(plan, catalog, options)?;
    plan.pattern_pose = Some(sequence.pattern_pose());
    let pins = select_pins(&sequence.stages[0].assembly, &sequence.pose, bone);
    Ok(JigDesign { sequence, pins })
}
