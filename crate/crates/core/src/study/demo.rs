//! The synthetic two-arm study: five specimens, freehand on the left
//! hemipelvis and guided on the right, four planes each.

use std::collections::BTreeMap;

use super::plan::{design_jig, plan_hemipelvis, JigDesign, PlanOptions, SpecimenPlan};
use super::report::{evaluate_results, metrics_rows, results_file, signed_chart, summarize, TrialRecord};
use super::specimen::{synthetic_cohort, SyntheticSpecimen};
use crate::error::Result;
use crate::evaluation::{PlaneSource, SpecimenReport};
use crate::geometry::Vec3;
use crate::jig::{Catalog, FitOptions};
use crate::planning::Side;
use crate::registration::{simulate_session, tetrahedral_marker, Registration};
use crate::schema::{MetricsRow, ResultsFile, SignedChart, SummaryFile};
use crate::simulation::{derive_seed, run_batch, trial_key_string, ErrorModel, SimOptions, TrialInput, TrialResult};

pub const FREEHAND: &str = "freehand";
pub const GUIDED: &str = "guided";

/// Which preset each side of the cohort is resected with.
pub fn method_for(side: Side) -> &'static str {
    match side {
        Side::Left => FREEHAND,
        Side::Right => GUIDED,
    }
}

#[derive(Debug, Clone)]
pub struct DemoOptions {
    pub seed: u64,
    pub plan: PlanOptions,
    pub fit: FitOptions,
    pub sim: SimOptions,
    pub source: PlaneSource,
    /// Scanner noise on the registration marker (mm).
    pub registration_noise_mm: f64,
    pub registration_scans: usize,
}

impl DemoOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            plan: PlanOptions::default(),
            fit: FitOptions::default(),
            sim: SimOptions::default(),
            source: PlaneSource::Analytic,
            registration_noise_mm: 0.1,
            registration_scans: 5,
        }
    }
}

pub struct DemoSpecimen {
    pub specimen: SyntheticSpecimen<f64>,
    pub plan: SpecimenPlan<f64>,
    pub jig: JigDesign<f64>,
    /// Bone registration of the guided arm's marker and TRE at the tumor center.
    pub registration: Option<(Registration<f64>, f64)>,
}

pub struct MethodRun {
    pub method: String,
    pub model: ErrorModel,
    pub trials: BTreeMap<(String, Side), TrialResult<f64>>,
    pub results: ResultsFile,
    pub reports: Vec<SpecimenReport<f64>>,
}

pub struct DemoRun {
    pub specimens: Vec<DemoSpecimen>,
    /// Freehand first, then guided.
    pub methods: Vec<MethodRun>,
    pub rows: Vec<MetricsRow>,
    pub summary: SummaryFile,
    pub chart: SignedChart,
}

pub fn prepare_specimens(options: &DemoOptions, catalog: &Catalog) -> Result<Vec<DemoSpecimen>> {
    let mut out = Vec::new();
    for specimen in synthetic_cohort::<f64>() {
        let mut plan = plan_hemipelvis(
            &specimen.specimen_id,
            specimen.side,
            &specimen.landmarks,
            &specimen.acetabular_points,
            &specimen.bone,
            &options.plan,
        )?;
        let jig = design_jig(&mut plan.plan, &specimen.bone, catalog, &options.fit)?;
        let registration = if method_for(specimen.side) == GUIDED {
            // Marker 40 mm cranial of the tumor, in bone coordinates.
            let c = plan.plan.tumor.center() + plan.frame.vector_to_world(&Vec3::new(0.0, 0.0, 40.0));
            let fiducials: Vec<_> = tetrahedral_marker::<f64>(20.0).iter().map(|p| c + p.coords).collect();
            let key = format!(
                "{}/registration",
                trial_key_string(&specimen.specimen_id, specimen.side)
            );
            let (reg, tre) = simulate_session(
                &fiducials,
                &specimen.placement.inverse(),
                options.registration_noise_mm,
                derive_seed(options.seed, &key),
                options.registration_scans,
                &[plan.plan.tumor.center()],
            )?;
            Some((reg, tre[0]))
        } else {
            None
        };
        out.push(DemoSpecimen {
            specimen,
            plan,
            jig,
            registration,
        });
    }
    Ok(out)
}

fn run_method(method: &str, specimens: &[DemoSpecimen], options: &DemoOptions) -> Result<MethodRun> {
    let model = ErrorModel::preset(method).expect("demo methods are presets");
    let arm: Vec<&DemoSpecimen> = specimens
        .iter()
        .filter(|s| method_for(s.specimen.side) == method)
        .collect();
    let inputs: Vec<TrialInput<'_, f64>> = arm
        .iter()
        .map(|s| TrialInput {
            plan: &s.plan.plan,
            frame: &s.plan.frame,
            bone: &s.specimen.bone,
            seed: derive_seed(
                options.seed,
                &format!(
                    "{}/{method}",
                    trial_key_string(&s.specimen.specimen_id, s.specimen.side)
                ),
            ),
        })
        .collect();
    let trials = run_batch(&inputs, &model, &options.sim)?;
    let records: Vec<TrialRecord<'_>> = arm
        .iter()
        .map(|s| TrialRecord {
            plan: &s.plan.plan,
            frame: &s.plan.frame,
            trial: &trials[&(s.specimen.specimen_id.clone(), s.specimen.side)],
        })
        .collect();
    let results = results_file(method, &model, &options.sim, &records, true)?;
    let reports = evaluate_results(&results, options.source)?;
    Ok(MethodRun {
        method: method.to_string(),
        model,
        trials,
        results,
        reports,
    })
}

pub fn run_demo(options: &DemoOptions, catalog: &Catalog) -> Result<DemoRun> {
    let specimens = prepare_specimens(options, catalog)?;
    let methods = vec![
        run_method(FREEHAND, &specimens, options)?,
        run_method(GUIDED, &specimens, options)?,
    ];
    let pairs: Vec<(&str, &[SpecimenReport<f64>])> = methods
        .iter()
        .map(|m| (m.method.as_str(), m.reports.as_slice()))
        .collect();
    let summary = summarize(&pairs, options.source)?;
    let chart = signed_chart(&pairs);
    let rows = methods.iter().flat_map(|m| metrics_rows(&m.reports)).collect();
    Ok(DemoRun {
        specimens,
        methods,
        rows,
        summary,
        chart,
    })
}
