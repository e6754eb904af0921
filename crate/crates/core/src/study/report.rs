//! Results files in, reports out.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::evaluation::{
    describe, deviations, extract_resected_plane, margin_table, specimen_report, wilcoxon_rank_sum, PlaneSource,
    SpecimenReport, MARGIN_THRESHOLDS,
};
use crate::findings::{Finding, FindingKind};
use crate::geometry::PelvicFrame;
use crate::planning::{CutLabel, ResectionPlan, Side};
use crate::schema::{
    ExecutedCutDto, MethodSummary, MetricBlock, MetricsRow, PlaneDto, ResultsFile, SignedChart, SignedPoint,
    SummaryFile, TransformDto, TrialDto, TumorDto, SCHEMA_VERSION,
};
use crate::simulation::{ErrorModel, SimOptions, TrialResult};

/// Relative path of a trial's cut-face mesh inside an output directory.
pub fn face_mesh_path(method: &str, specimen: &str, side: Side, label: CutLabel) -> String {
    format!("meshes/{method}/{specimen}_{side}_{label}_face.ply")
}

pub fn specimen_mesh_path(method: &str, specimen: &str, side: Side) -> String {
    format!("meshes/{method}/{specimen}_{side}_specimen.ply")
}

/// One executed trial with the plan and frame it ran against.
pub struct TrialRecord<'a> {
    pub plan: &'a ResectionPlan<f64>,
    pub frame: &'a PelvicFrame<f64>,
    pub trial: &'a TrialResult<f64>,
}

pub fn results_file(
    method: &str,
    model: &ErrorModel,
    options: &SimOptions,
    records: &[TrialRecord<'_>],
    with_meshes: bool,
) -> Result<ResultsFile> {
    let mut trials = Vec::with_capacity(records.len());
    for r in records {
        let t = r.trial;
        let mut cuts = Vec::with_capacity(t.cuts.len());
        for c in &t.cuts {
            let refit = extract_resected_plane(&c.cut_face_points, &c.planned.plane)?.plane;
            cuts.push(ExecutedCutDto {
                label: c.planned.label,
                planned: PlaneDto::from_plane(&c.planned.plane),
                mp_mm: c.planned.planned_margin_mp,
                error: c.error,
                achieved: PlaneDto::from_plane(&c.achieved_plane),
                refit: PlaneDto::from_plane(&refit),
                face_points: c.cut_face_points.len(),
                face_mesh: with_meshes.then(|| face_mesh_path(method, &t.specimen_id, t.side, c.planned.label)),
            });
        }
        trials.push(TrialDto {
            specimen_id: t.specimen_id.clone(),
            side: t.side,
            seed: t.seed,
            frame: TransformDto::from_transform(&r.frame.transform),
            tumor: TumorDto::from_tumor(&r.plan.tumor),
            cuts,
            void: t.void.clone(),
            findings: t.findings.clone(),
            specimen_mesh: with_meshes.then(|| specimen_mesh_path(method, &t.specimen_id, t.side)),
        });
    }
    Ok(ResultsFile {
        schema_version: SCHEMA_VERSION,
        method: method.to_string(),
        model: model.clone(),
        options: *options,
        trials,
    })
}

/// Specimen reports for every trial with at least one executed cut.
pub fn evaluate_results(results: &ResultsFile, source: PlaneSource) -> Result<Vec<SpecimenReport<f64>>> {
    let mut out = Vec::new();
    for t in &results.trials {
        if t.cuts.is_empty() {
            continue;
        }
        let frame = t.frame()?;
        let tumor = t.tumor.to_tumor()?;
        let mut planes = Vec::with_capacity(t.cuts.len());
        for c in &t.cuts {
            let planned = crate::schema::CutDto {
                label: c.label,
                plane: c.planned,
                mp_mm: c.mp_mm,
            }
            .to_cut()?;
            let resected = match source {
                PlaneSource::Analytic => c.achieved.to_plane()?,
                PlaneSource::Refit => c.refit.to_plane()?,
            };
            planes.push(deviations(&planned, &resected, &tumor, &frame));
        }
        let mut report = specimen_report(t.specimen_id.clone(), t.side, planes)?;
        report.findings.splice(0..0, t.findings.iter().cloned());
        out.push(report);
    }
    Ok(out)
}

pub fn metrics_rows(reports: &[SpecimenReport<f64>]) -> Vec<MetricsRow> {
    reports
        .iter()
        .flat_map(|r| r.planes.iter().map(move |d| MetricsRow::new(&r.specimen_id, r.side, d)))
        .collect()
}

struct MethodSamples {
    distance: Vec<f64>,
    roll: Vec<f64>,
    pitch: Vec<f64>,
    max: Vec<f64>,
}

fn samples(reports: &[SpecimenReport<f64>]) -> MethodSamples {
    let planes = || reports.iter().flat_map(|r| r.planes.iter());
    MethodSamples {
        distance: planes().map(|d| d.distance_deviation).collect(),
        roll: planes().filter_map(|d| d.roll_deviation).collect(),
        pitch: planes().filter_map(|d| d.pitch_deviation).collect(),
        max: reports.iter().map(|r| r.max_deviation).collect(),
    }
}

/// Results-table and margin-table summary for one or two methods. With
/// two, each metric carries the two-sided rank-sum p-value between them.
pub fn summarize(methods: &[(&str, &[SpecimenReport<f64>])], source: PlaneSource) -> Result<SummaryFile> {
    if methods.is_empty() || methods.len() > 2 {
        return Err(Error::InvalidParameter(format!(
            "summaries take one or two methods, got {}",
            methods.len()
        )));
    }
    if methods.len() == 2 && methods[0].0 == methods[1].0 {
        return Err(Error::DuplicateLabel(methods[0].0.to_string()));
    }
    let data: Vec<(&str, MethodSamples)> = methods.iter().map(|(m, r)| (*m, samples(r))).collect();
    let mut findings = Vec::new();
    let mut metrics = Vec::new();
    type Pick = fn(&MethodSamples) -> &Vec<f64>;
    let pick: [(&str, &str, Pick); 4] = [
        ("distance_deviation", "mm", |s| &s.distance),
        ("roll_deviation", "deg", |s| &s.roll),
        ("pitch_deviation", "deg", |s| &s.pitch),
        ("maximum_deviation", "mm", |s| &s.max),
    ];
    for (metric, unit, get) in pick {
        let mut rows = Vec::new();
        for (m, s) in &data {
            let summary = describe(get(s))?;
            findings.extend(
                summary
                    .findings
                    .iter()
                    .map(|f| Finding::new(f.kind, format!("{m} {metric}: {}", f.message))),
            );
            rows.push(MethodSummary {
                method: m.to_string(),
                summary,
            });
        }
        let test = if data.len() == 2 {
            Some(wilcoxon_rank_sum(get(&data[0].1), get(&data[1].1))?)
        } else {
            None
        };
        metrics.push(MetricBlock {
            metric: metric.to_string(),
            unit: unit.to_string(),
            methods: rows,
            p_value: test.map(|t| t.p_value),
            test,
        });
    }
    let lists: Vec<(&str, &[f64])> = data.iter().map(|(m, s)| (*m, s.distance.as_slice())).collect();
    let margin_table = margin_table(&lists, &MARGIN_THRESHOLDS)?;
    for (m, r) in methods {
        for rep in r.iter() {
            findings.extend(
                rep.findings
                    .iter()
                    .filter(|f| f.kind != FindingKind::SingleSample)
                    .map(|f| Finding {
                        message: format!("{m} {}/{}: {}", rep.specimen_id, rep.side, f.message),
                        ..f.clone()
                    }),
            );
        }
    }
    Ok(SummaryFile {
        schema_version: SCHEMA_VERSION,
        source,
        metrics,
        margin_table,
        findings,
    })
}

/// Signed deviation per plane, grouped by method.
pub fn signed_chart(methods: &[(&str, &[SpecimenReport<f64>])]) -> SignedChart {
    let mut series = BTreeMap::new();
    for (m, reports) in methods {
        let points = reports
            .iter()
            .flat_map(|r| {
                r.planes.iter().map(move |d| SignedPoint {
                    specimen: r.specimen_id.clone(),
                    side: r.side,
                    label: d.label,
                    signed_mm: d.signed_deviation,
                })
            })
            .collect();
        series.insert(m.to_string(), points);
    }
    SignedChart {
        schema_version: SCHEMA_VERSION,
        series,
    }
}
