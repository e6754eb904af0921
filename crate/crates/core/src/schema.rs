//! Versioned JSON and CSV file formats for plans, placements, sessions,
//! trial results and reports. All file-level numbers are `f64`.

use std::collections::BTreeMap;

use nalgebra::{Quaternion, Unit, UnitQuaternion};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{CohortSummary, MarginTable, PlaneDeviation, WilcoxonResult};
use crate::findings::Finding;
use crate::geometry::{unit, LandmarkSet, PelvicFrame, Plane, Point3, RigidTransform, Sphere, Vec3};
use crate::jig::{JigConfig, PinSelection, ResectionSequence, SlotResidual};
use crate::planning::{CutLabel, PlannedCut, ResectionPlan, Side, TumorModel};
use crate::simulation::{ErrorModel, ExecutionError, SimOptions, VoidCut};

pub const SCHEMA_VERSION: u32 = 1;

pub const METRICS_CSV_HEADER: &str = "specimen,side,label,mp_mm,mr_mm,dd_mm,signed_mm,roll_deg,pitch_deg";

fn check_version(found: u32, what: &str) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "{what}: schema_version {found}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

/// Parses a versioned document, rejecting unknown versions before the
/// body is interpreted.
pub fn from_json<D: DeserializeOwned>(text: &str, what: &str) -> Result<D> {
    #[derive(Deserialize)]
    struct Head {
        schema_version: u32,
    }
    let head: Head = serde_json::from_str(text).map_err(|e| Error::Malformed(format!("{what}: {e}")))?;
    check_version(head.schema_version, what)?;
    serde_json::from_str(text).map_err(|e| Error::Malformed(format!("{what}: {e}")))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable document");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneDto {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl PlaneDto {
    pub fn from_plane(p: &Plane<f64>) -> Self {
        Self {
            normal: p.normal.into_inner().into(),
            offset: p.offset,
        }
    }

    pub fn to_plane(&self) -> Result<Plane<f64>> {
        let v = Vec3::from(self.normal);
        let n = unit(v)?;
        if !self.offset.is_finite() {
            return Err(Error::Malformed("plane offset is not finite".into()));
        }
        // Stored unit normals are kept bit-for-bit so files round-trip.
        if (v.norm() - 1.0).abs() <= 1e-12 {
            return Ok(Plane::new(Unit::new_unchecked(v), self.offset));
        }
        Ok(Plane::new(n, self.offset / v.norm()))
    }
}

/// Rotation as a unit quaternion `[w, x, y, z]` plus translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformDto {
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
}

impl TransformDto {
    pub fn from_transform(t: &RigidTransform<f64>) -> Self {
        let q = t.rotation();
        Self {
            rotation: [q.w, q.i, q.j, q.k],
            translation: t.translation().into(),
        }
    }

    pub fn to_transform(&self) -> Result<RigidTransform<f64>> {
        let [w, x, y, z] = self.rotation;
        let q = Quaternion::new(w, x, y, z);
        if !(q.norm() > 1e-9) || self.translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::Malformed("invalid rigid transform".into()));
        }
        let rotation = if (q.norm() - 1.0).abs() <= 1e-12 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        Ok(RigidTransform::from_parts(rotation, Vec3::from(self.translation)))
    }
}

fn point(p: &[f64; 3]) -> Point3<f64> {
    Point3::from(*p)
}

fn arr(p: &Point3<f64>) -> [f64; 3] {
    p.coords.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TumorDto {
    pub center: [f64; 3],
    pub radius: f64,
    pub safety_margin: f64,
}

impl TumorDto {
    pub fn from_tumor(t: &TumorModel<f64>) -> Self {
        Self {
            center: arr(&t.sphere.center),
            radius: t.sphere.radius,
            safety_margin: t.safety_margin,
        }
    }

    pub fn to_tumor(&self) -> Result<TumorModel<f64>> {
        TumorModel::new(Sphere::new(point(&self.center), self.radius)?, self.safety_margin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutDto {
    pub label: CutLabel,
    pub plane: PlaneDto,
    pub mp_mm: f64,
}

impl CutDto {
    pub fn from_cut(c: &PlannedCut<f64>) -> Self {
        Self {
            label: c.label,
            plane: PlaneDto::from_plane(&c.plane),
            mp_mm: c.planned_margin_mp,
        }
    }

    /// Keeps the stored Mp, so validation can compare it with a fresh one.
    pub fn to_cut(&self) -> Result<PlannedCut<f64>> {
        Ok(PlannedCut {
            label: self.label,
            plane: self.plane.to_plane()?.with_label(self.label.as_str()),
            planned_margin_mp: self.mp_mm,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub schema_version: u32,
    pub specimen_id: String,
    pub side: Side,
    /// World → pelvic frame.
    pub frame: TransformDto,
    pub tumor: TumorDto,
    pub cuts: Vec<CutDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_pose: Option<TransformDto>,
    /// Bone mesh the plan was made on, as given at planning time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bone_mesh: Option<String>,
    #[serde(default)]
    pub findings: Vec<Finding>,
}

impl PlanFile {
    pub fn new(plan: &ResectionPlan<f64>, frame: &PelvicFrame<f64>, findings: Vec<Finding>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            specimen_id: plan.specimen_id.clone(),
            side: plan.side,
            frame: TransformDto::from_transform(&frame.transform),
            tumor: TumorDto::from_tumor(&plan.tumor),
            cuts: plan.cuts.iter().map(CutDto::from_cut).collect(),
            pattern_pose: plan.pattern_pose.as_ref().map(TransformDto::from_transform),
            bone_mesh: None,
            findings,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        from_json(text, "plan")
    }

    pub fn plan(&self) -> Result<ResectionPlan<f64>> {
        let cuts = self.cuts.iter().map(CutDto::to_cut).collect::<Result<Vec<_>>>()?;
        let mut plan = ResectionPlan::new(self.specimen_id.clone(), self.side, self.tumor.to_tumor()?, cuts)?;
        plan.pattern_pose = self.pattern_pose.as_ref().map(TransformDto::to_transform).transpose()?;
        Ok(plan)
    }

    pub fn frame(&self) -> Result<PelvicFrame<f64>> {
        Ok(PelvicFrame {
            transform: self.frame.to_transform()?,
        })
    }
}

/// Landmarks and optional acetabular samples for planning a specimen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarksFile {
    pub schema_version: u32,
    pub specimen_id: String,
    pub side: Side,
    pub asis_left: [f64; 3],
    pub asis_right: [f64; 3],
    pub psis_left: [f64; 3],
    pub psis_right: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hip_center: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub acetabular_points: Vec<[f64; 3]>,
}

impl LandmarksFile {
    pub fn new(id: &str, side: Side, set: &LandmarkSet<f64>, acetabular: &[Point3<f64>]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            specimen_id: id.to_string(),
            side,
            asis_left: arr(&set.asis_left),
            asis_right: arr(&set.asis_right),
            psis_left: arr(&set.psis_left),
            psis_right: arr(&set.psis_right),
            hip_center: set.hip_center.as_ref().map(arr),
            acetabular_points: acetabular.iter().map(arr).collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        from_json(text, "landmarks")
    }

    pub fn landmarks(&self) -> LandmarkSet<f64> {
        LandmarkSet {
            asis_left: point(&self.asis_left),
            asis_right: point(&self.asis_right),
            psis_left: point(&self.psis_left),
            psis_right: point(&self.psis_right),
            hip_center: self.hip_center.as_ref().map(point),
        }
    }

    pub fn acetabular(&self) -> Vec<Point3<f64>> {
        self.acetabular_points.iter().map(point).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDto {
    pub label: CutLabel,
    pub distance_mm: f64,
    pub angle_deg: f64,
}

impl From<&SlotResidual<f64>> for ResidualDto {
    fn from(r: &SlotResidual<f64>) -> Self {
        Self {
            label: r.label,
            distance_mm: r.distance_mm,
            angle_deg: r.angle_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinDto {
    pub hole: String,
    pub length_mm: f64,
    pub gap_mm: Option<f64>,
}

impl From<&PinSelection<f64>> for PinDto {
    fn from(p: &PinSelection<f64>) -> Self {
        Self {
            hole: p.hole.clone(),
            length_mm: p.length,
            gap_mm: p.gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDto {
    pub stage: usize,
    pub labels: Vec<CutLabel>,
    pub config: JigConfig,
    pub residuals: Vec<ResidualDto>,
}

/// Jig placement report: pose, slot residuals and pins per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementFile {
    pub schema_version: u32,
    pub specimen_id: String,
    pub side: Side,
    /// Jig-local → world.
    pub pose: TransformDto,
    pub pattern_pose: TransformDto,
    pub stages: Vec<StageDto>,
    pub pins: Vec<PinDto>,
}

impl PlacementFile {
    pub fn new(plan: &ResectionPlan<f64>, seq: &ResectionSequence<f64>, pins: &[PinSelection<f64>]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            specimen_id: plan.specimen_id.clone(),
            side: plan.side,
            pose: TransformDto::from_transform(&seq.pose),
            pattern_pose: TransformDto::from_transform(&seq.pattern_pose()),
            stages: seq
                .stages
                .iter()
                .map(|s| StageDto {
                    stage: s.stage,
                    labels: s.labels.clone(),
                    config: s.config.clone(),
                    residuals: s.residuals.iter().map(ResidualDto::from).collect(),
                })
                .collect(),
            pins: pins.iter().map(PinDto::from).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseDto {
    /// Isotropic Gaussian sd on each observed coordinate (mm).
    pub sd_mm: f64,
}

/// Simulated registration session input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFile {
    pub schema_version: u32,
    /// Model-space fiducials.
    pub fiducials: Vec<[f64; 3]>,
    /// Model → scanner ground truth the observations are drawn from.
    #[serde(default = "identity_dto")]
    pub true_transform: TransformDto,
    pub noise: NoiseDto,
    pub seed: u64,
    pub observation_count: usize,
    #[serde(default)]
    pub targets: Vec<[f64; 3]>,
}

fn identity_dto() -> TransformDto {
    TransformDto::from_transform(&RigidTransform::identity())
}

impl SessionFile {
    pub fn parse(text: &str) -> Result<Self> {
        from_json(text, "session")
    }

    pub fn fiducials(&self) -> Vec<Point3<f64>> {
        self.fiducials.iter().map(point).collect()
    }

    pub fn targets(&self) -> Vec<Point3<f64>> {
        self.targets.iter().map(point).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutput {
    pub schema_version: u32,
    pub transform: TransformDto,
    pub fre: f64,
    pub tre_at_targets: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<Finding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModelFile {
    pub schema_version: u32,
    #[serde(flatten)]
    pub model: ErrorModel,
}

impl ErrorModelFile {
    pub fn parse(text: &str) -> Result<ErrorModel> {
        let f: Self = from_json(text, "error model")?;
        f.model.validate()?;
        Ok(f.model)
    }
}

/// Simulation batch: which plan files to run, one seed each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub schema_version: u32,
    pub trials: Vec<BatchEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub plan: String,
    pub seed: u64,
    /// Defaults to the plan's own bone mesh.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
}

impl BatchManifest {
    pub fn parse(text: &str) -> Result<Self> {
        from_json(text, "batch manifest")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutedCutDto {
    pub label: CutLabel,
    pub planned: PlaneDto,
    pub mp_mm: f64,
    pub error: ExecutionError,
    pub achieved: PlaneDto,
    /// Plane re-fit from the recorded cut-face points.
    pub refit: PlaneDto,
    pub face_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_mesh: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDto {
    pub specimen_id: String,
    pub side: Side,
    pub seed: u64,
    pub frame: TransformDto,
    pub tumor: TumorDto,
    pub cuts: Vec<ExecutedCutDto>,
    #[serde(default)]
    pub void: Vec<VoidCut>,
    #[serde(default)]
    pub findings: Vec<Finding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specimen_mesh: Option<String>,
}

impl TrialDto {
    pub fn frame(&self) -> Result<PelvicFrame<f64>> {
        Ok(PelvicFrame {
            transform: self.frame.to_transform()?,
        })
    }
}

/// Output of a simulated batch for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub method: String,
    pub model: ErrorModel,
    pub options: SimOptions,
    pub trials: Vec<TrialDto>,
}

impl ResultsFile {
    pub fn parse(text: &str) -> Result<Self> {
        from_json(text, "results")
    }

    pub fn plane_count(&self) -> usize {
        self.trials.iter().map(|t| t.cuts.len()).sum()
    }
}

/// One method's statistics within a metric block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    #[serde(flatten)]
    pub summary: CohortSummary,
}

/// One row of the results table: a metric summarized per method, with the
/// rank-sum test between the first two methods when there are two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub metric: String,
    pub unit: String,
    pub methods: Vec<MethodSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<WilcoxonResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub schema_version: u32,
    pub source: crate::evaluation::PlaneSource,
    pub metrics: Vec<MetricBlock>,
    pub margin_table: MarginTable,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<Finding>,
}

impl SummaryFile {
    pub fn parse(text: &str) -> Result<Self> {
        from_json(text, "summary")
    }
}

/// Per-plane signed deviations grouped by method, in metrics-row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedChart {
    pub schema_version: u32,
    pub series: BTreeMap<String, Vec<SignedPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedPoint {
    pub specimen: String,
    pub side: Side,
    pub label: CutLabel,
    pub signed_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub specimen: String,
    pub side: Side,
    pub label: CutLabel,
    pub mp_mm: f64,
    pub mr_mm: f64,
    pub dd_mm: f64,
    pub signed_mm: f64,
    pub roll_deg: Option<f64>,
    pub pitch_deg: Option<f64>,
}

impl MetricsRow {
    pub fn new(specimen: &str, side: Side, d: &PlaneDeviation<f64>) -> Self {
        Self {
            specimen: specimen.to_string(),
            side,
            label: d.label,
            mp_mm: d.mp,
            mr_mm: d.mr,
            dd_mm: d.distance_deviation,
            signed_mm: d.signed_deviation,
            roll_deg: d.roll_deviation,
            pitch_deg: d.pitch_deviation,
        }
    }
}

/// Metrics CSV; undefined angles are empty fields.
pub fn metrics_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Malformed(e.to_string()))?;
    }
    if rows.is_empty() {
        return Ok(format!("{METRICS_CSV_HEADER}\n"));
    }
    let bytes = w.into_inner().map_err(|e| Error::Malformed(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

/// Index of the files a run wrote, with content hashes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub seed: Option<u64>,
    pub files: Vec<ManifestEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_round_trips() {
        let t = RigidTransform::from_axis_angle(&Vec3::new(1.0, 2.0, 3.0), 0.7, Vec3::new(4.0, -5.0, 6.0));
        let back = TransformDto::from_transform(&t).to_transform().unwrap();
        assert!(back.angle_to(&t) < 1e-12);
        assert!((back.translation() - t.translation()).norm() < 1e-12);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = r#"{"schema_version": 7, "trials": []}"#;
        assert!(matches!(BatchManifest::parse(text), Err(Error::Schema(_))));
        assert!(BatchManifest::parse(r#"{"schema_version": 1, "trials": []}"#).is_ok());
        assert!(BatchManifest::parse("{").is_err());
    }

    #[test]
    fn csv_header_and_empty_angles() {
        let d = PlaneDeviation {
            label: CutLabel::Auxiliary,
            distance_deviation: 1.5,
            signed_deviation: -1.5,
            roll_deviation: None,
            pitch_deviation: Some(2.0),
            roll_signed: None,
            pitch_signed: Some(2.0),
            mr: 3.5,
            mp: 5.0,
        };
        let text = metrics_csv(&[MetricsRow::new("S1", Side::Left, &d)]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(METRICS_CSV_HEADER));
        assert_eq!(lines.next(), Some("S1,left,auxiliary,5.0,3.5,1.5,-1.5,,2.0"));
        assert_eq!(metrics_csv(&[]).unwrap(), format!("{METRICS_CSV_HEADER}\n"));
    }
}
