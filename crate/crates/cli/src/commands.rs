use std::path::{Path, PathBuf};

use osteoplan::evaluation::{heatmap_field, HeatmapSource, PlaneSource, SpecimenReport};
use osteoplan::geometry::io::{load_mesh, ply_bytes};
use osteoplan::geometry::{FrameConfig, TriangleMesh, YAxisSign};
use osteoplan::jig::{Catalog, FitOptions};
use osteoplan::registration::simulate_session;
use osteoplan::schema::{
    metrics_csv, to_json, BatchManifest, ErrorModelFile, LandmarksFile, PlacementFile, PlanFile, ResultsFile,
    RunManifest, SessionFile, SessionOutput, TransformDto, SCHEMA_VERSION,
};
use osteoplan::simulation::{derive_seed, run_batch, trial_key_string, ErrorModel, SimOptions, TrialInput};
use osteoplan::study::{
    design_jig, evaluate_results, face_mesh_path, metrics_rows, plan_hemipelvis, results_file, run_demo, signed_chart,
    specimen_mesh_path, summarize, DemoOptions, PlanOptions, TrialRecord,
};

use crate::output::Outputs;
use crate::{
    CompareArgs, DemoArgs, EvaluateArgs, Failure, JigArgs, PlanArgs, RegisterArgs, SimulateArgs, Source, YSign,
};

type Result<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

/// `rel` resolved against the directory holding `file`.
fn beside(file: &Path, rel: &str) -> PathBuf {
    let rel = Path::new(rel);
    if rel.is_absolute() {
        rel.to_path_buf()
    } else {
        file.parent().unwrap_or(Path::new("")).join(rel)
    }
}

fn source(s: Source) -> PlaneSource {
    match s {
        Source::Analytic => PlaneSource::Analytic,
        Source::Refit => PlaneSource::Refit,
    }
}

fn load_plan(path: &Path) -> Result<PlanFile> {
    Ok(PlanFile::parse(&read(path)?)?)
}

fn plan_bone(plan_path: &Path, file: &PlanFile, mesh: Option<&Path>) -> Result<TriangleMesh<f64>> {
    let path = match (mesh, &file.bone_mesh) {
        (Some(m), _) => m.to_path_buf(),
        (None, Some(rel)) => beside(plan_path, rel),
        (None, None) => {
            return Err(Failure::Usage(format!(
                "{} records no bone mesh; pass --mesh",
                plan_path.display()
            )))
        }
    };
    Ok(load_mesh(&path)?)
}

pub fn plan(a: PlanArgs) -> Result<()> {
    let bone = load_mesh::<f64>(&a.mesh)?;
    let lm = LandmarksFile::parse(&read(&a.landmarks)?)?;
    let options = PlanOptions {
        tumor_radius: a.radius,
        safety_margin: a.margin,
        frame: FrameConfig {
            y_sign: match a.y_sign {
                YSign::RightToLeft => YAxisSign::RightToLeft,
                YSign::LeftToRight => YAxisSign::LeftToRight,
            },
        },
    };
    let planned = plan_hemipelvis(
        &lm.specimen_id,
        lm.side,
        &lm.landmarks(),
        &lm.acetabular(),
        &bone,
        &options,
    )?;
    for c in &planned.plan.cuts {
        println!("{:<22} Mp {:8.3} mm", c.label.to_string(), c.planned_margin_mp);
    }
    for f in &planned.findings {
        eprintln!("finding: {f}");
    }
    if !planned.findings.is_empty() && !a.allow_findings {
        return Err(Failure::Validation(format!(
            "{} validation finding(s); rerun with --allow-findings to keep the plan",
            planned.findings.len()
        )));
    }
    let mut file = PlanFile::new(&planned.plan, &planned.frame, planned.findings);
    file.bone_mesh = Some(a.mesh.to_string_lossy().into_owned());
    let mut out = Outputs::default();
    out.add(&a.out, to_json(&file));
    out.commit()?;
    Ok(())
}

fn catalog(explicit: Option<&Path>) -> Result<Catalog> {
    let path = explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os("OSTEOPLAN_CATALOG").map(PathBuf::from));
    match path {
        Some(p) => Ok(Catalog::load(&p)?),
        None => Ok(Catalog::default()),
    }
}

pub fn jig(a: JigArgs) -> Result<()> {
    let file = load_plan(&a.plan)?;
    let bone = plan_bone(&a.plan, &file, a.mesh.as_deref())?;
    let catalog = catalog(a.catalog.as_deref())?;
    let mut plan = file.plan()?;
    let design = design_jig(&mut plan, &bone, &catalog, &FitOptions::default())?;
    for st in &design.sequence.stages {
        let worst = st.residuals.iter().map(|r| r.magnitude(1.0)).fold(0.0, f64::max);
        let labels: Vec<String> = st.labels.iter().map(|l| l.to_string()).collect();
        println!("stage {}: {} (worst residual {worst:.3})", st.stage, labels.join(", "));
    }
    let mut out = Outputs::default();
    out.add(
        &a.out,
        to_json(&PlacementFile::new(&plan, &design.sequence, &design.pins)),
    );
    if let Some(p) = &a.plan_out {
        let mut updated = PlanFile::new(&plan, &file.frame()?, file.findings.clone());
        updated.bone_mesh = file.bone_mesh.clone();
        out.add(p, to_json(&updated));
    }
    out.commit()?;
    Ok(())
}

pub fn register(a: RegisterArgs) -> Result<()> {
    let session = SessionFile::parse(&read(&a.session)?)?;
    let truth = session.true_transform.to_transform()?;
    let seed = a.seed.unwrap_or(session.seed);
    let (reg, tre) = simulate_session(
        &session.fiducials(),
        &truth,
        session.noise.sd_mm,
        seed,
        session.observation_count,
        &session.targets(),
    )?;
    println!("FRE {:.4} mm", reg.fre);
    let output = SessionOutput {
        schema_version: SCHEMA_VERSION,
        transform: TransformDto::from_transform(&reg.transform),
        fre: reg.fre,
        tre_at_targets: tre,
        findings: reg.findings,
    };
    let mut out = Outputs::default();
    out.add(&a.out, to_json(&output));
    out.commit()?;
    Ok(())
}

fn error_model(spec: &str) -> Result<ErrorModel> {
    if let Some(m) = ErrorModel::preset(spec) {
        return Ok(m);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Failure::Usage(format!(
            "{spec} is neither a preset nor an error-model file"
        )));
    }
    Ok(ErrorModelFile::parse(&read(path)?)?)
}

struct Loaded {
    file: PlanFile,
    plan: osteoplan::Plan,
    frame: osteoplan::Frame,
    bone: TriangleMesh<f64>,
    seed: u64,
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let model = error_model(&a.model)?;
    let method = a
        .method
        .clone()
        .or_else(|| model.name.clone())
        .unwrap_or_else(|| "custom".to_string());
    let mut loaded = Vec::new();
    if let Some(m) = &a.manifest {
        let manifest = BatchManifest::parse(&read(m)?)?;
        for e in &manifest.trials {
            let path = beside(m, &e.plan);
            let file = load_plan(&path)?;
            let mesh = e.mesh.as_ref().map(|rel| beside(m, rel));
            let bone = plan_bone(&path, &file, mesh.as_deref())?;
            loaded.push(Loaded {
                plan: file.plan()?,
                frame: file.frame()?,
                file,
                bone,
                seed: e.seed,
            });
        }
    } else {
        if a.plan.is_empty() {
            return Err(Failure::Usage("give --plan or --manifest".into()));
        }
        let seed = a
            .seed
            .ok_or_else(|| Failure::Usage("--seed is required for simulate with --plan".into()))?;
        if a.mesh.is_some() && a.plan.len() > 1 {
            return Err(Failure::Usage("--mesh applies to a single --plan".into()));
        }
        for p in &a.plan {
            let file = load_plan(p)?;
            let bone = plan_bone(p, &file, a.mesh.as_deref())?;
            let key = format!("{}/{method}", trial_key_string(&file.specimen_id, file.side));
            loaded.push(Loaded {
                plan: file.plan()?,
                frame: file.frame()?,
                file,
                bone,
                seed: derive_seed(seed, &key),
            });
        }
    }
    let mut options = SimOptions::default();
    if let Some(k) = a.kerf {
        options.kerf = k;
    }
    for l in &loaded {
        let findings = osteoplan::planning::validate_plan(&l.plan, &l.bone);
        if findings
            .iter()
            .any(|f| f.kind == osteoplan::FindingKind::MarginMismatch)
        {
            return Err(Failure::Validation(format!(
                "{}: stored Mp does not match its plane",
                l.file.specimen_id
            )));
        }
    }
    let inputs: Vec<TrialInput<'_, f64>> = loaded
        .iter()
        .map(|l| TrialInput {
            plan: &l.plan,
            frame: &l.frame,
            bone: &l.bone,
            seed: l.seed,
        })
        .collect();
    let trials = run_batch(&inputs, &model, &options)?;
    let records: Vec<TrialRecord<'_>> = loaded
        .iter()
        .map(|l| TrialRecord {
            plan: &l.plan,
            frame: &l.frame,
            trial: &trials[&(l.plan.specimen_id.clone(), l.plan.side)],
        })
        .collect();
    let voids: usize = trials.values().map(|t| t.void.len()).sum();
    for t in trials.values() {
        for v in &t.void {
            eprintln!("void cut {}/{} {}: {}", t.specimen_id, t.side, v.label, v.reason);
        }
    }
    if voids > 0 && a.strict {
        return Err(Failure::Validation(format!("{voids} void cut(s)")));
    }
    let results = results_file(&method, &model, &options, &records, true)?;
    let mut out = Outputs::default();
    out.add(a.out.join("results.json"), to_json(&results));
    add_trial_meshes(&mut out, &a.out, &method, trials.values())?;
    let n = results.plane_count();
    out.commit()?;
    println!("{n} planes from {} trial(s), {voids} void", trials.len());
    Ok(())
}

fn add_trial_meshes<'a>(
    out: &mut Outputs,
    dir: &Path,
    method: &str,
    trials: impl Iterator<Item = &'a osteoplan::Trial>,
) -> Result<()> {
    for t in trials {
        for c in &t.cuts {
            out.add(
                dir.join(face_mesh_path(method, &t.specimen_id, t.side, c.planned.label)),
                ply_bytes(&c.cut_face)?,
            );
        }
        out.add(
            dir.join(specimen_mesh_path(method, &t.specimen_id, t.side)),
            ply_bytes(&t.specimen)?,
        );
    }
    Ok(())
}

fn load_results(path: &Path) -> Result<ResultsFile> {
    Ok(ResultsFile::parse(&read(path)?)?)
}

fn heatmaps(out: &mut Outputs, dir: &Path, results_path: &Path, results: &ResultsFile) -> Result<()> {
    for t in &results.trials {
        for c in &t.cuts {
            let rel = c.face_mesh.as_ref().ok_or_else(|| {
                Failure::Validation(format!("{}/{} {} has no cut-face mesh", t.specimen_id, t.side, c.label))
            })?;
            let face = load_mesh::<f64>(beside(results_path, rel))?;
            let field = heatmap_field(HeatmapSource::CutFace(&face), &c.planned.to_plane()?)?;
            let name = format!(
                "heatmaps/{}/{}_{}_{}.ply",
                results.method, t.specimen_id, t.side, c.label
            );
            out.add(dir.join(name), ply_bytes(&field)?);
        }
    }
    Ok(())
}

fn add_reports(
    out: &mut Outputs,
    dir: &Path,
    methods: &[(&str, &[SpecimenReport<f64>])],
    source: PlaneSource,
) -> Result<()> {
    let summary = summarize(methods, source)?;
    let rows: Vec<_> = methods.iter().flat_map(|(_, r)| metrics_rows(r)).collect();
    out.add(dir.join("metrics.csv"), metrics_csv(&rows)?);
    out.add(dir.join("margin_table.json"), to_json(&summary.margin_table));
    out.add(dir.join("signed_deviation.json"), to_json(&signed_chart(methods)));
    for block in &summary.metrics {
        let cells: Vec<String> = block
            .methods
            .iter()
            .map(|m| format!("{} {:.2}±{:.2}", m.method, m.summary.mean, m.summary.sd))
            .collect();
        let p = block.p_value.map(|p| format!(" p={p:.4}")).unwrap_or_default();
        println!("{:<20} {}{p}", block.metric, cells.join("  "));
    }
    out.add(dir.join("summary.json"), to_json(&summary));
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let results = load_results(&a.results)?;
    let src = source(a.source);
    let reports = evaluate_results(&results, src)?;
    let mut out = Outputs::default();
    add_reports(&mut out, &a.out, &[(&results.method, &reports)], src)?;
    if a.heatmaps {
        heatmaps(&mut out, &a.out, &a.results, &results)?;
    }
    out.commit()?;
    Ok(())
}

pub fn compare(a: CompareArgs) -> Result<()> {
    let ra = load_results(&a.a)?;
    let rb = load_results(&a.b)?;
    let src = source(a.source);
    let (pa, pb) = (evaluate_results(&ra, src)?, evaluate_results(&rb, src)?);
    let (na, nb) = if ra.method == rb.method {
        (format!("{}-a", ra.method), format!("{}-b", rb.method))
    } else {
        (ra.method.clone(), rb.method.clone())
    };
    let mut out = Outputs::default();
    add_reports(&mut out, &a.out, &[(&na, &pa), (&nb, &pb)], src)?;
    if a.heatmaps {
        heatmaps(&mut out, &a.out, &a.a, &ra)?;
        heatmaps(&mut out, &a.out, &a.b, &rb)?;
    }
    out.commit()?;
    Ok(())
}

pub fn demo(a: DemoArgs) -> Result<()> {
    let catalog = catalog(None)?;
    let mut options = DemoOptions::new(a.seed);
    options.source = source(a.source);
    let run = run_demo(&options, &catalog)?;
    let dir = &a.out;
    let mut out = Outputs::default();
    for s in &run.specimens {
        let stem = format!("{}_{}", s.specimen.specimen_id, s.specimen.side);
        out.add(dir.join(format!("specimens/{stem}.ply")), ply_bytes(&s.specimen.bone)?);
        let lm = LandmarksFile::new(
            &s.specimen.specimen_id,
            s.specimen.side,
            &s.specimen.landmarks,
            &s.specimen.acetabular_points,
        );
        out.add(dir.join(format!("specimens/{stem}_landmarks.json")), to_json(&lm));
        let mut plan = PlanFile::new(&s.plan.plan, &s.plan.frame, s.plan.findings.clone());
        plan.bone_mesh = Some(format!("../specimens/{stem}.ply"));
        out.add(dir.join(format!("plans/{stem}.json")), to_json(&plan));
        let placement = PlacementFile::new(&s.plan.plan, &s.jig.sequence, &s.jig.pins);
        out.add(dir.join(format!("placements/{stem}.json")), to_json(&placement));
        if let Some((reg, tre)) = &s.registration {
            let session = SessionOutput {
                schema_version: SCHEMA_VERSION,
                transform: TransformDto::from_transform(&reg.transform),
                fre: reg.fre,
                tre_at_targets: vec![*tre],
                findings: reg.findings.clone(),
            };
            out.add(dir.join(format!("registration/{stem}.json")), to_json(&session));
        }
    }
    let results_dir = dir.join("results");
    for m in &run.methods {
        let path = results_dir.join(format!("{}.json", m.method));
        out.add(&path, to_json(&m.results));
        add_trial_meshes(&mut out, &results_dir, &m.method, m.trials.values())?;
    }
    let pairs: Vec<(&str, &[SpecimenReport<f64>])> = run
        .methods
        .iter()
        .map(|m| (m.method.as_str(), m.reports.as_slice()))
        .collect();
    let reports_dir = dir.join("reports");
    add_reports(&mut out, &reports_dir, &pairs, options.source)?;
    if a.heatmaps {
        for m in &run.methods {
            for t in m.trials.values() {
                for c in &t.cuts {
                    let field = heatmap_field(HeatmapSource::CutFace(&c.cut_face), &c.planned.plane)?;
                    let name = format!(
                        "heatmaps/{}/{}_{}_{}.ply",
                        m.method, t.specimen_id, t.side, c.planned.label
                    );
                    out.add(reports_dir.join(name), ply_bytes(&field)?);
                }
            }
        }
    }
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        command: "demo".into(),
        seed: Some(a.seed),
        files: out.manifest(dir),
    };
    out.add(dir.join("manifest.json"), to_json(&manifest));
    let n = out.commit()?;
    println!("wrote {n} files to {}", dir.display());
    Ok(())
}
