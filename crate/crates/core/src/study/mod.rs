//! Study harness: synthetic cohort, per-specimen planning and the demo run.

mod demo;
mod plan;
mod report;
mod specimen;

pub use demo::{
    method_for, prepare_specimens, run_demo, DemoOptions, DemoRun, DemoSpecimen, MethodRun, FREEHAND, GUIDED,
};
pub use plan::{design_jig, plan_hemipelvis, JigDesign, PlanOptions, SpecimenPlan};
pub use report::{
    evaluate_results, face_mesh_path, metrics_rows, results_file, signed_chart, specimen_mesh_path, summarize,
    TrialRecord,
};
pub use specimen::{
    hemipelvis_mesh, synthetic_cohort, synthetic_specimen, SyntheticSpecimen, COHORT_SCALES, HIP_CENTER,
};
