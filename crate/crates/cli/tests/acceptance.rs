//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always show. The process
//! fails on any FAIL except the criteria listed in `KNOWN_RED`, and also
//! when one of those starts passing.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use osteoplan::evaluation::{
    deviations, evaluate_trial, extract_resected_plane, margin_percentages, specimen_report, wilcoxon_exact,
    wilcoxon_normal, PlaneDeviation, PlaneSource, SpecimenReport, MARGIN_THRESHOLDS,
};
use osteoplan::geometry::{cut_mesh_by_plane, unit, CutOptions, PelvicFrame, Plane, Point3, RigidTransform, Sphere};
use osteoplan::geometry::{TriangleMesh, Vec3};
use osteoplan::jig::{assemble, fit_jig_pose, resection_sequence, Catalog, FinalChoice, FitOptions, JigAssembly};
use osteoplan::jig::{JigConfig, ResectionChoice, ResectionSequence};
use osteoplan::planning::{generate_margin_planes, planned_margin, PlannedCut, ResectionPlan, TumorModel};
use osteoplan::registration::{fiducial_registration_error, procrustes, register_rigid, FiducialSet};
use osteoplan::simulation::{derive_seed, execute_cut, run_trial, ErrorModel, ExecutionError, SimOptions};
use osteoplan::study::{
    evaluate_results, hemipelvis_mesh, plan_hemipelvis, prepare_specimens, run_demo, summarize, synthetic_cohort,
    DemoOptions, PlanOptions,
};
use osteoplan::{CutLabel, Side};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

/// Criteria that cannot be met as stated; they still run and print FAIL.
const KNOWN_RED: &[usize] = &[4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3<f64> {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if v.norm() > 1e-3 {
            return v.normalize();
        }
    }
}

fn random_rigid(rng: &mut ChaCha8Rng, reach: f64) -> RigidTransform<f64> {
    let axis = random_unit(rng);
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    let t = Vec3::new(
        rng.random_range(-reach..reach),
        rng.random_range(-reach..reach),
        rng.random_range(-reach..reach),
    );
    RigidTransform::from_axis_angle(&axis, angle, t)
}

fn random_point(rng: &mut ChaCha8Rng, reach: f64) -> Point3<f64> {
    Point3::new(
        rng.random_range(-reach..reach),
        rng.random_range(-reach..reach),
        rng.random_range(-reach..reach),
    )
}

fn random_tumor(rng: &mut ChaCha8Rng) -> TumorModel<f64> {
    let sphere = Sphere::new(random_point(rng, 100.0), rng.random_range(10.0..35.0)).unwrap();
    TumorModel::new(sphere, rng.random_range(0.0..10.0)).unwrap()
}

/// Frame-space normal whose YZ and XZ projections both lie within 60° of
/// the Z axis. A 20° injection then keeps both projections at least 10°
/// off the XY plane, so the injected normal never nears the X or Y axis,
/// where projected angles become ill-conditioned.
fn measurable_normal(rng: &mut ChaCha8Rng) -> Vec3<f64> {
    let min_cos = 60f64.to_radians().cos();
    loop {
        let n = random_unit(rng);
        if n.z.abs() >= min_cos * n.y.hypot(n.z) && n.z.abs() >= min_cos * n.x.hypot(n.z) {
            return n;
        }
    }
}

/// Area-weighted samples on a triangulated face with isotropic noise.
fn sample_face(face: &TriangleMesh<f64>, count: usize, sd: f64, rng: &mut ChaCha8Rng) -> Vec<Point3<f64>> {
    let areas: Vec<f64> = (0..face.triangles().len()).map(|k| face.triangle_area(k)).collect();
    let total: f64 = areas.iter().sum();
    let noise = Normal::new(0.0, sd).unwrap();
    (0..count)
        .map(|_| {
            let mut pick = rng.random_range(0.0..total);
            let mut k = 0;
            while k + 1 < areas.len() && pick >= areas[k] {
                pick -= areas[k];
                k += 1;
            }
            let [a, b, c] = face.corners(k);
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            let p = a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2);
            Point3::from(p + Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng)))
        })
        .collect()
}

fn ac1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let options = SimOptions::default();
    let (mut exact, mut dist, mut angle) = (0f64, 0f64, 0f64);
    let mut failed = Vec::new();
    for i in 0..1000 {
        let frame = PelvicFrame {
            transform: random_rigid(&mut rng, 300.0),
        };
        let tumor = random_tumor(&mut rng);
        let n = unit(frame.vector_to_world(&measurable_normal(&mut rng))).unwrap();
        let planned = generate_margin_planes(&tumor, &[n], &[CutLabel::ALL[i % 4]])
            .unwrap()
            .remove(0);
        let err = ExecutionError::new(
            rng.random_range(-5.0..=5.0),
            rng.random_range(-20.0..=20.0),
            rng.random_range(-20.0..=20.0),
        );
        let c = tumor.sphere.center;
        let half = Vec3::repeat(tumor.sphere.radius + tumor.safety_margin + 60.0);
        let bone = TriangleMesh::subdivided_cuboid(c - half, c + half, 8);
        let done = match execute_cut(&planned, &err, &frame, &tumor, &bone, &options) {
            Ok(d) => d,
            Err(e) => {
                failed.push(format!("case {i}: {e}"));
                continue;
            }
        };
        let d = deviations(&planned, &done.result.achieved_plane, &tumor, &frame);
        let (Some(rs), Some(ps), Some(ru), Some(pu)) =
            (d.roll_signed, d.pitch_signed, d.roll_deviation, d.pitch_deviation)
        else {
            failed.push(format!("case {i}: undefined angle"));
            continue;
        };
        exact = exact
            .max((d.signed_deviation - err.dt_mm).abs())
            .max((d.distance_deviation - err.dt_mm.abs()).abs())
            .max((rs - err.roll_deg).abs())
            .max((ps - err.pitch_deg).abs())
            .max((ru - err.roll_deg.abs()).abs())
            .max((pu - err.pitch_deg.abs()).abs());

        let points = sample_face(&done.result.cut_face, 256, 0.05, &mut rng);
        let fit = extract_resected_plane(&points, &planned.plane).unwrap();
        let r = deviations(&planned, &fit.plane, &tumor, &frame);
        dist = dist.max((r.signed_deviation - err.dt_mm).abs());
        angle = angle
            .max((r.roll_signed.unwrap() - err.roll_deg).abs())
            .max((r.pitch_signed.unwrap() - err.pitch_deg).abs());
    }
    let pass = failed.is_empty() && exact <= 1e-6 && dist <= 0.05 && angle <= 0.1;
    let mut detail = format!(
        "1000 planes; analytic worst {exact:.2e} (tol 1e-6); refit from 256 samples, sd 0.05: worst {dist:.4} mm (tol 0.05), {angle:.4} deg (tol 0.1)"
    );
    if !failed.is_empty() {
        detail.push_str(&format!("; {} failed, first: {}", failed.len(), failed[0]));
    }
    outcome(pass, detail)
}

/// Every structural relation between the stored margins and deviations.
fn identity_violations(d: &PlaneDeviation<f64>) -> bool {
    d.distance_deviation != (d.mp - d.mr).abs() || d.signed_deviation != d.mr - d.mp
}

fn ac2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0f64;
    let mut identity_bad = 0;
    let mut checked = 0;
    for i in 0..1000 {
        let tumor = random_tumor(&mut rng);
        let n = unit(random_unit(&mut rng)).unwrap();
        let c = tumor.sphere.center.coords;
        let r = tumor.sphere.radius;
        let m = rng.random_range(0.0..20.0);
        let tangent = Plane::new(n, n.dot(&c) + r);
        let offset = Plane::new(n, n.dot(&c) + r + m);
        worst = worst.max(planned_margin(&tangent, &tumor).abs());
        worst = worst.max((planned_margin(&offset, &tumor) - m).abs());
        // Orientation is normalized on construction.
        let label = CutLabel::ALL[i % 4];
        worst = worst.max((PlannedCut::new(label, offset.flipped(), &tumor).planned_margin_mp - m).abs());
        let generated = generate_margin_planes(&tumor, &[n], &[label]).unwrap().remove(0);
        worst = worst.max((generated.planned_margin_mp - tumor.safety_margin).abs());

        let resected = Plane::new(
            unit(n.into_inner() + random_unit(&mut rng) * 0.3).unwrap(),
            n.dot(&c) + r + rng.random_range(-10.0..30.0),
        );
        let d = deviations(&generated, &resected, &tumor, &PelvicFrame::identity());
        checked += 1;
        if identity_violations(&d) || d.mr != planned_margin(&resected, &tumor) || d.mp != generated.planned_margin_mp {
            identity_bad += 1;
        }
    }
    // The whole demo pipeline, through its serialized results, both sources.
    let run = run_demo(&DemoOptions::new(42), &Catalog::default()).unwrap();
    for m in &run.methods {
        for source in [PlaneSource::Analytic, PlaneSource::Refit] {
            for rep in evaluate_results(&m.results, source).unwrap() {
                for d in &rep.planes {
                    checked += 1;
                    identity_bad += identity_violations(d) as usize;
                }
            }
        }
    }
    outcome(
        worst <= 1e-9 && identity_bad == 0,
        format!("constructions worst {worst:.2e} mm (tol 1e-9); dd = |mp - mr| broken on {identity_bad} of {checked} planes"),
    )
}

fn ac3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut rot, mut trans) = (0f64, 0f64);
    let mut reflections = 0;
    for _ in 0..1000 {
        let truth = random_rigid(&mut rng, 500.0);
        let k = rng.random_range(3..=12);
        let a: Vec<Point3<f64>> = (0..k).map(|_| random_point(&mut rng, 100.0)).collect();
        let b: Vec<Point3<f64>> = a.iter().map(|p| truth.apply(p)).collect();
        let (est, reflected) = procrustes(&a, &b).unwrap();
        reflections += reflected as usize;
        rot = rot.max((est.rotation_matrix() - truth.rotation_matrix()).abs().max());
        trans = trans.max((est.translation() - truth.translation()).norm());
    }

    // Local grid around the optimum: rotations about the observed centroid
    // and translations, three step sizes, all 3^6 - 1 neighbours.
    let mut beaten = 0;
    let mut probes = 0;
    for _ in 0..20 {
        let truth = random_rigid(&mut rng, 200.0);
        let model: Vec<Point3<f64>> = (0..6).map(|_| random_point(&mut rng, 60.0)).collect();
        let noise = Normal::new(0.0, 0.5).unwrap();
        let observed = model
            .iter()
            .map(|p| truth.apply(p) + Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)))
            .collect::<Vec<_>>();
        let centroid = Point3::from(observed.iter().map(|p| p.coords).sum::<Vec3<f64>>() / 6.0);
        let set = FiducialSet::new(model, observed).unwrap();
        let reg = register_rigid(&set).unwrap();
        for (hr, ht) in [(1e-2, 1e-1), (1e-3, 1e-2), (1e-4, 1e-3)] {
            for code in 1..729usize {
                let step: Vec<f64> = (0..6).map(|j| (code / 3usize.pow(j as u32) % 3) as f64 - 1.0).collect();
                let w = Vec3::new(step[0], step[1], step[2]) * hr;
                let t = Vec3::new(step[3], step[4], step[5]) * ht;
                let spin = if w.norm() > 0.0 {
                    RigidTransform::from_axis_angle(&w, w.norm(), Vec3::zeros())
                } else {
                    RigidTransform::identity()
                };
                let about = RigidTransform::from_translation(centroid.coords)
                    .compose(&spin)
                    .compose(&RigidTransform::from_translation(-centroid.coords));
                let candidate = RigidTransform::from_translation(t)
                    .compose(&about)
                    .compose(&reg.transform);
                probes += 1;
                if fiducial_registration_error(&candidate, &set) < reg.fre * (1.0 - 1e-12) {
                    beaten += 1;
                }
            }
        }
    }
    outcome(
        rot <= 1e-9 && trans <= 1e-9 && reflections == 0 && beaten == 0,
        format!(
            "1000 motions: rotation {rot:.2e}, translation {trans:.2e} mm (tol 1e-9); FRE grid: {beaten} of {probes} neighbours lower"
        ),
    )
}

/// Independent oracle: rank sum by counting, null distribution by listing
/// every labelling of the pooled ranks.
fn enumeration_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let w: usize = a.iter().map(|x| 1 + pooled.iter().filter(|y| *y < x).count()).sum();
    let (mut lower, mut upper, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let s: usize = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
        total += 1;
        lower += (s <= w) as u64;
        upper += (s >= w) as u64;
    }
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatched = 0;
    let mut over = 0;
    let mut worst = (0f64, 0, 0);
    for _ in 0..500 {
        let (n1, n2) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let mut values: Vec<f64> = (0..n1 + n2).map(|i| i as f64 + rng.random_range(0.0..0.5)).collect();
        values.shuffle(&mut rng);
        let (a, b) = values.split_at(n1);
        let exact = wilcoxon_exact(a, b).unwrap().p_value;
        if exact.to_bits() != enumeration_p(a, b).to_bits() {
            mismatched += 1;
        }
        let gap = (wilcoxon_normal(a, b).unwrap().p_value - exact).abs();
        if gap > 0.05 {
            over += 1;
        }
        if gap > worst.0 {
            worst = (gap, n1, n2);
        }
    }
    outcome(
        mismatched == 0 && over == 0,
        format!(
            "500 untied cases: exact != enumeration on {mismatched}; normal approximation off by > 0.05 on {over} (worst {:.3} at n1={}, n2={})",
            worst.0, worst.1, worst.2
        ),
    )
}

/// Reports whose planes sit exactly `d` mm closer to the tumor than planned.
fn fixture_reports(distances: &[f64]) -> Vec<SpecimenReport<f64>> {
    let tumor = TumorModel::new(Sphere::new(Point3::origin(), 25.0).unwrap(), 5.0).unwrap();
    let normals = [
        Vec3::new(0.0, 0.2, 1.0),
        Vec3::new(0.1, 0.0, -1.0),
        Vec3::new(1.0, 0.3, 0.1),
        Vec3::new(-1.0, 0.1, 0.2),
    ];
    distances
        .chunks(4)
        .enumerate()
        .map(|(k, ds)| {
            let planes = ds
                .iter()
                .zip(normals.iter().zip(CutLabel::ALL))
                .map(|(&d, (n, label))| {
                    let cut = PlannedCut::new(label, Plane::new(unit(*n).unwrap(), 30.0), &tumor);
                    deviations(&cut, &cut.plane.translated(-d), &tumor, &PelvicFrame::identity())
                })
                .collect();
            specimen_report(format!("F{}", k + 1), Side::Right, planes).unwrap()
        })
        .collect()
}

fn ac5() -> Outcome {
    let mut guided = vec![0.5; 12];
    guided.extend([2.0; 8]);
    let mut freehand = vec![0.5; 6];
    freehand.extend([2.0; 11]);
    freehand.extend([4.0; 2]);
    freehand.push(6.0);
    let (g, f) = (fixture_reports(&guided), fixture_reports(&freehand));
    let summary = summarize(&[("guided", &g), ("freehand", &f)], PlaneSource::Analytic).unwrap();
    let rows = &summary.margin_table.rows;
    let fixtures = summary.margin_table.thresholds == MARGIN_THRESHOLDS.to_vec()
        && rows[0].percent == [60.0, 100.0, 100.0]
        && rows[1].percent == [30.0, 85.0, 95.0];

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut broken = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..60);
        let devs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0f64).powi(2) / 10.0).collect();
        let mut thresholds: Vec<f64> = (0..rng.random_range(1..8))
            .map(|_| rng.random_range(0.0..12.0))
            .collect();
        thresholds.sort_by(f64::total_cmp);
        let pct = margin_percentages(&devs, &thresholds).unwrap();
        let monotone = pct.windows(2).all(|w| w[0] <= w[1]);
        let bounded = pct.iter().all(|p| (0.0..=100.0).contains(p));
        broken += (!monotone || !bounded) as usize;
    }
    outcome(
        fixtures && broken == 0,
        format!(
            "fixtures {:?} and {:?}; {broken} of 500 random tables non-monotone",
            rows[0].percent, rows[1].percent
        ),
    )
}

struct Moments {
    mean: f64,
    sd: f64,
}

fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Moments { mean, sd }
}

/// Simulates full four-cut trials over the cohort until `planes` planes
/// have been evaluated. Returns the planes and the number of void cuts.
fn simulate_planes(model: &ErrorModel, planes: usize) -> (Vec<PlaneDeviation<f64>>, usize) {
    let cohort = synthetic_cohort::<f64>();
    let plans: Vec<_> = cohort
        .iter()
        .map(|s| {
            plan_hemipelvis(
                &s.specimen_id,
                s.side,
                &s.landmarks,
                &s.acetabular_points,
                &s.bone,
                &PlanOptions::default(),
            )
            .unwrap()
        })
        .collect();
    let name = model.name.clone().unwrap_or_default();
    let mut out = Vec::with_capacity(planes);
    let mut voids = 0;
    let mut i = 0;
    while out.len() < planes {
        let k = i % cohort.len();
        let seed = derive_seed(42, &format!("acceptance/{name}/{i}"));
        let trial = run_trial(
            &plans[k].plan,
            &model.clone().with_seed(seed),
            &plans[k].frame,
            &cohort[k].bone,
            &SimOptions::default(),
        )
        .unwrap();
        voids += trial.void.len();
        let report = evaluate_trial(&trial, &plans[k].plan, &plans[k].frame, PlaneSource::Analytic).unwrap();
        out.extend(report.planes);
        i += 1;
    }
    out.truncate(planes);
    (out, voids)
}

fn ac6() -> Outcome {
    let freehand = ErrorModel::freehand();
    let (planes, voids) = simulate_planes(&freehand, 10_000);
    let mut worst = 0f64;
    let mut parts = Vec::new();
    let mut undefined = 0;
    let series: [(&str, Vec<f64>, f64, f64); 3] = [
        (
            "dd",
            planes.iter().map(|p| p.signed_deviation).collect(),
            freehand.dt.mean,
            freehand.dt.sd,
        ),
        (
            "roll",
            planes.iter().filter_map(|p| p.roll_signed).collect(),
            freehand.roll.mean,
            freehand.roll.sd,
        ),
        (
            "pitch",
            planes.iter().filter_map(|p| p.pitch_signed).collect(),
            freehand.pitch.mean,
            freehand.pitch.sd,
        ),
    ];
    for (name, xs, mean, sd) in &series {
        undefined += planes.len() - xs.len();
        let m = moments(xs);
        let (em, es) = ((m.mean - mean).abs() / mean.abs(), (m.sd - sd).abs() / sd);
        worst = worst.max(em).max(es);
        parts.push(format!(
            "{name} {:.3}/{:.3} ({:.1}%/{:.1}%)",
            m.mean,
            m.sd,
            100.0 * em,
            100.0 * es
        ));
    }
    let (guided, gvoids) = simulate_planes(&ErrorModel::guided(), 10_000);
    let under = guided.iter().filter(|p| p.distance_deviation < 3.0).count() as f64 / guided.len() as f64;
    outcome(
        worst <= 0.03 && undefined == 0 && under >= 0.99,
        format!(
            "freehand 10000 planes ({voids} void draws redrawn): {}; guided 10000 planes ({gvoids} void): {:.2}% with dd < 3 mm",
            parts.join(", "),
            100.0 * under
        ),
    )
}

fn ac7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let solids: Vec<(&str, TriangleMesh<f64>)> = vec![
        (
            "cuboid",
            TriangleMesh::cuboid(Point3::new(-30.0, -20.0, -10.0), Point3::new(40.0, 25.0, 35.0)),
        ),
        (
            "subdivided cuboid",
            TriangleMesh::subdivided_cuboid(Point3::new(-30.0, -20.0, -10.0), Point3::new(40.0, 25.0, 35.0), 5),
        ),
        (
            "sphere",
            TriangleMesh::uv_sphere(Point3::new(5.0, -3.0, 8.0), 40.0, 24, 32),
        ),
        ("hemipelvis", hemipelvis_mesh(1.0, 36, 48)),
    ];
    let options = CutOptions {
        kerf: 1.27,
        volume_accounting: true,
    };
    let mut worst = 0f64;
    let mut cuts = 0;
    for (_, mesh) in &solids {
        let volume = mesh.volume();
        let bb = mesh.aabb().unwrap();
        let center = bb.center();
        let extent = bb.diagonal();
        for _ in 0..50 {
            let n = unit(random_unit(&mut rng)).unwrap();
            let through = center + random_unit(&mut rng) * rng.random_range(0.0..0.15 * extent);
            let cut = cut_mesh_by_plane(mesh, &Plane::through(&through, n), options).unwrap();
            let total = cut.kept.volume() + cut.removed.volume() + cut.slab.as_ref().unwrap().volume();
            worst = worst.max((total - volume).abs() / volume);
            cuts += 1;
        }
    }
    // Axis-aligned slab through a box: cross-section times blade.
    let cut = cut_mesh_by_plane(&solids[0].1, &Plane::new(unit(Vec3::z()).unwrap(), 5.0), options).unwrap();
    let slab = cut.slab.unwrap().volume();
    let analytic = 70.0 * 45.0 * 1.27;
    let slab_err = (slab - analytic).abs() / analytic;
    outcome(
        worst <= 1e-6 && slab_err <= 1e-9,
        format!(
            "{cuts} cuts on {} solids, kerf 1.27: worst relative imbalance {worst:.2e} (tol 1e-6); box slab {slab_err:.1e} off analytic",
            solids.len()
        ),
    )
}

fn res(tilt: f64, yaw: f64, standoff: f64) -> ResectionChoice {
    ResectionChoice {
        tilt_deg: tilt,
        yaw_deg: yaw,
        standoff,
    }
}

fn pose0() -> RigidTransform<f64> {
    RigidTransform::from_axis_angle(&Vec3::new(0.3, -0.5, 0.8), 0.7, Vec3::new(40.0, -12.0, 85.0))
}

/// Plan whose planes are the slots of `assemblies` placed at `pose`.
fn plan_from(assemblies: &[&JigAssembly<f64>], pose: &RigidTransform<f64>) -> ResectionPlan<f64> {
    let center = pose.apply(&Point3::new(0.0, 0.0, -40.0));
    let tumor = TumorModel::new(Sphere::new(center, 25.0).unwrap(), 5.0).unwrap();
    let mut cuts: Vec<PlannedCut<f64>> = Vec::new();
    for a in assemblies {
        for s in &a.slots {
            if !cuts.iter().any(|c| c.label == s.label) {
                cuts.push(PlannedCut::new(s.label, s.transformed(pose).plane(), &tumor));
            }
        }
    }
    let mut plan = ResectionPlan::new("round-trip", Side::Right, tumor, cuts).unwrap();
    plan.pattern_pose = Some(pose.compose(&assemblies[0].pattern_frame));
    plan
}

/// Stage cut counts and the largest K-wire mismatch between stages.
fn layout(seq: &ResectionSequence<f64>) -> (Vec<usize>, f64) {
    let counts = seq.stages.iter().map(|s| s.labels.len()).collect();
    let first: Vec<_> = seq.stages[0]
        .assembly
        .kwires
        .iter()
        .map(|k| k.transformed(&seq.pose))
        .collect();
    let mut gap = 0f64;
    for stage in &seq.stages[1..] {
        if stage.assembly.kwires.len() != first.len() {
            return (counts, f64::INFINITY);
        }
        for (k, f) in stage
            .assembly
            .kwires
            .iter()
            .map(|k| k.transformed(&seq.pose))
            .zip(&first)
        {
            gap = gap
                .max((k.origin - f.origin).norm())
                .max((k.direction.into_inner() - f.direction.into_inner()).norm());
        }
    }
    (counts, gap)
}

fn ac8() -> Outcome {
    let catalog = Catalog::default();
    let labels = CutLabel::ALL;
    let step1 = |c: &Catalog| -> JigAssembly<f64> {
        assemble(
            &JigConfig::step1(
                res(10.0, -15.0, 8.0),
                "ext-24",
                res(-20.0, 30.0, 12.0),
                [labels[0], labels[1]],
            ),
            c,
        )
        .unwrap()
    };
    let asm = step1(&catalog);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut residual, mut rot, mut trans) = (0f64, 0f64, 0f64);
    let slab = TriangleMesh::cuboid(Point3::new(-200.0, -200.0, -200.0), Point3::new(200.0, 200.0, 60.0));
    for _ in 0..50 {
        let d = random_rigid(&mut rng, 100.0);
        let pose = d.compose(&pose0());
        let plan = plan_from(&[&asm], &pose);
        let placed = fit_jig_pose(&asm, &plan, &slab.transformed(&d), &FitOptions::default()).unwrap();
        for r in &placed.residuals {
            residual = residual.max(r.distance_mm.abs()).max(r.angle_deg);
        }
        rot = rot.max(placed.pose.angle_to(&pose));
        trans = trans.max((placed.pose.translation() - pose.translation()).norm());
    }

    let a3: JigAssembly<f64> = assemble(
        &JigConfig::step3(res(10.0, -15.0, 8.0), res(35.0, 20.0, 15.0), [labels[0], labels[2]]),
        &catalog,
    )
    .unwrap();
    let fin = FinalChoice {
        tilt_deg: -25.0,
        yaw_deg: 10.0,
        standoff: 20.0,
        slide: 6.0,
        reversed: false,
    };
    let a4: JigAssembly<f64> = assemble(&JigConfig::step4(fin, labels[3]), &catalog).unwrap();
    let seq = resection_sequence(
        &plan_from(&[&asm, &a3, &a4], &pose0()),
        &catalog,
        &FitOptions::default(),
    )
    .unwrap();
    let (counts, mut kwire_gap) = layout(&seq);
    let mut layouts_ok = counts == [2, 1, 1];
    // The designed jigs of the synthetic cohort follow the same layout.
    let specimens = prepare_specimens(&DemoOptions::new(42), &catalog).unwrap();
    for s in &specimens {
        let (c, g) = layout(&s.jig.sequence);
        layouts_ok &= c == [2, 1, 1];
        kwire_gap = kwire_gap.max(g);
    }
    outcome(
        residual < 1e-6 && rot < 1e-6 && trans < 1e-6 && layouts_ok && kwire_gap < 1e-9,
        format!(
            "50 poses: slot residual {residual:.1e}, pose {rot:.1e} rad / {trans:.1e} mm; stages {counts:?} on the constructed plan and {} cohort plans, K-wire gap {kwire_gap:.1e}",
            specimens.len()
        ),
    )
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().into_owned();
            (rel, std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn ac9() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let mut trees = Vec::new();
    let mut times = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let t0 = Instant::now();
        let status = Command::new(env!("CARGO_BIN_EXE_osteoplan"))
            .args(["demo", "--seed", "42", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        times.push(t0.elapsed());
        if !status.status.success() {
            return outcome(
                false,
                format!("demo failed: {}", String::from_utf8_lossy(&status.stderr)),
            );
        }
        trees.push(read_tree(&out));
    }
    let same = trees[0] == trees[1];
    let bytes: usize = trees[0].values().map(Vec::len).sum();
    let slowest = times.iter().max().copied().unwrap_or(Duration::ZERO);
    outcome(
        same && !trees[0].is_empty() && slowest < Duration::from_secs(60),
        format!(
            "{} files, {bytes} bytes, {} across runs; runs {:.1}s and {:.1}s (limit 60s)",
            trees[0].len(),
            if same { "identical" } else { "different" },
            times[0].as_secs_f64(),
            times[1].as_secs_f64()
        ),
    )
}

/// Number, name, check and runtime budget in seconds.
type Criterion = (usize, &'static str, fn() -> Outcome, Option<u64>);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "metric round-trip", ac1, Some(30)),
        (2, "margin algebra", ac2, None),
        (3, "registration", ac3, None),
        (4, "rank-sum test", ac4, None),
        (5, "margin table", ac5, None),
        (6, "Monte-Carlo moments", ac6, Some(120)),
        (7, "cut conservation", ac7, None),
        (8, "jig round-trip", ac8, None),
        (9, "demo determinism", ac9, None),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let mut unexpected = Vec::new();
    let mut red = Vec::new();
    for (n, name, check, limit) in criteria {
        if !filter.is_empty() && !filter.contains(&format!("AC{n}")) {
            continue;
        }
        let t0 = Instant::now();
        let mut o = check();
        let elapsed = t0.elapsed();
        if let Some(secs) = limit {
            if elapsed > Duration::from_secs(secs) {
                o.pass = false;
                o.detail.push_str(&format!("; over the {secs}s budget"));
            }
        }
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("AC{n} {tag} {name}: {} [{:.1}s]", o.detail, elapsed.as_secs_f64());
        let known = KNOWN_RED.contains(&n);
        if !o.pass {
            red.push(format!("AC{n}"));
        }
        if o.pass == known {
            unexpected.push(n);
        }
    }
    if red.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing {}", red.join(", "));
    }
    for n in &unexpected {
        if KNOWN_RED.contains(n) {
            println!("AC{n} passes but is listed as known red; remove it from KNOWN_RED");
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
