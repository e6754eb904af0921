use approx::assert_relative_eq;
use osteoplan::evaluation::{
    deviations, extract_resected_plane, heatmap_field, margin_percentages, margin_table, max_deviation,
    rank_sum_counts, specimen_report, two_sided_from_counts, wilcoxon_exact, wilcoxon_rank_sum, HeatmapSource,
    WilcoxonMethod, MARGIN_THRESHOLDS,
};
use osteoplan::geometry::{unit, PelvicFrame, Plane, Point3, RigidTransform, Sphere, TriangleMesh, Vec3};
use osteoplan::planning::{PlannedCut, TumorModel};
use osteoplan::{CutLabel, FindingKind, Side};
use proptest::prelude::*;

fn tumor() -> TumorModel<f64> {
    TumorModel::new(Sphere::new(Point3::new(4.0, -3.0, 2.0), 25.0).unwrap(), 5.0).unwrap()
}

fn planned(n: Vec3<f64>) -> PlannedCut<f64> {
    let t = tumor();
    let n = unit(n).unwrap();
    let plane = Plane::new(n, n.dot(&t.sphere.center.coords) + 30.0);
    PlannedCut::new(CutLabel::SupraAcetabular, plane, &t)
}

/// Independent measurement: rotate nothing, just drop a coordinate and
/// take the unsigned line angle from the normalized dot product.
fn oracle_angle(a: &Vec3<f64>, b: &Vec3<f64>, drop: usize) -> f64 {
    let keep: Vec<usize> = (0..3).filter(|&i| i != drop).collect();
    let p = [a[keep[0]], a[keep[1]]];
    let q = [b[keep[0]], b[keep[1]]];
    let dot = (p[0] * q[0] + p[1] * q[1]) / ((p[0].hypot(p[1])) * (q[0].hypot(q[1])));
    dot.abs().min(1.0).acos().to_degrees()
}

#[test]
fn identical_planes_have_zero_deviation() {
    let c = planned(Vec3::new(0.3, 0.2, 1.0));
    let d = deviations(&c, &c.plane, &tumor(), &PelvicFrame::identity());
    assert_eq!(d.distance_deviation, 0.0);
    assert_eq!(d.signed_deviation, 0.0);
    assert_eq!(d.roll_deviation, Some(0.0));
    assert_eq!(d.pitch_deviation, Some(0.0));
    assert_relative_eq!(d.mp, 5.0, epsilon = 1e-12);
}

#[test]
fn translation_toward_tumor_is_negative() {
    let c = planned(Vec3::new(0.3, 0.2, 1.0));
    let d = deviations(&c, &c.plane.translated(-1.5), &tumor(), &PelvicFrame::identity());
    assert_relative_eq!(d.distance_deviation, 1.5, epsilon = 1e-12);
    assert_relative_eq!(d.signed_deviation, -1.5, epsilon = 1e-12);
    assert!(d.roll_deviation.unwrap() < 1e-12 && d.pitch_deviation.unwrap() < 1e-12);
}

#[test]
fn sequential_rotations_match_projection_oracle() {
    let frame = PelvicFrame {
        transform: RigidTransform::from_axis_angle(&Vec3::new(1.0, -0.3, 0.5), 0.6, Vec3::new(3.0, 1.0, -2.0)),
    };
    let c = planned(frame.vector_to_world(&Vec3::new(0.2, 0.35, 1.0)));
    let through = c.plane.origin_point();
    let rx = RigidTransform::from_axis_angle(&frame.vector_to_world(&Vec3::x()), 5f64.to_radians(), Vec3::zeros());
    let ry = RigidTransform::from_axis_angle(&frame.vector_to_world(&Vec3::y()), 3f64.to_radians(), Vec3::zeros());
    let n = ry.compose(&rx).apply_unit(&c.plane.normal);
    let resected = Plane::through(&through, n);
    let d = deviations(&c, &resected, &tumor(), &frame);
    let a = frame.vector_to_frame(&c.plane.normal.into_inner());
    let b = frame.vector_to_frame(&n.into_inner());
    assert!((d.roll_deviation.unwrap() - oracle_angle(&a, &b, 0)).abs() < 0.1);
    assert!((d.pitch_deviation.unwrap() - oracle_angle(&a, &b, 1)).abs() < 0.1);
}

#[test]
fn rotated_cut_face_recovers_roll() {
    let c = planned(Vec3::new(0.0, 0.3, 1.0));
    let rot = RigidTransform::from_axis_angle(&Vec3::x(), 5f64.to_radians(), Vec3::zeros());
    let n = rot.apply_unit(&c.plane.normal);
    let resected = Plane::through(&c.plane.origin_point(), n);
    let (u, v) = resected.basis();
    let pts: Vec<Point3<f64>> = (0..15)
        .flat_map(|i| (0..15).map(move |j| (i, j)))
        .map(|(i, j)| resected.origin_point() + u * (i as f64 * 3.0 - 21.0) + v * (j as f64 * 2.0 - 14.0))
        .collect();
    let fit = extract_resected_plane(&pts, &c.plane).unwrap();
    let d = deviations(&c, &fit.plane, &tumor(), &PelvicFrame::identity());
    assert!((d.roll_deviation.unwrap() - 5.0).abs() < 0.05);
    assert!(d.pitch_deviation.unwrap() < 0.05);
    let line = [
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 1.0, 1.0),
        Point3::new(2.0, 2.0, 2.0),
    ];
    assert!(extract_resected_plane(&line, &c.plane).is_err());
}

#[test]
fn parallel_projection_is_undefined() {
    // Normal along X: its YZ projection vanishes, so roll is undefined.
    let c = planned(Vec3::x());
    let tilted = Plane::through(&c.plane.origin_point(), unit(Vec3::new(1.0, 0.0, 0.1)).unwrap());
    let d = deviations(&c, &tilted, &tumor(), &PelvicFrame::identity());
    assert!(d.roll_deviation.is_none());
    assert!(d.pitch_deviation.is_some());
    let f = d.findings();
    assert_eq!(f.len(), 1);
    assert_eq!(f[0].kind, FindingKind::UndefinedAngle);
}

#[test]
fn specimen_max_is_brute_force_max() {
    let t = tumor();
    let f = PelvicFrame::identity();
    let c = planned(Vec3::new(0.1, 0.2, 1.0));
    let shifts = [0.4, -2.5, 1.1, 0.0];
    let planes: Vec<_> = shifts
        .iter()
        .map(|&s| deviations(&c, &c.plane.translated(s), &t, &f))
        .collect();
    let report = specimen_report("S1", Side::Left, planes.clone()).unwrap();
    assert_relative_eq!(report.max_deviation, 2.5, epsilon = 1e-12);
    assert_eq!(max_deviation(&planes).unwrap(), report.max_deviation);
    assert!(specimen_report::<f64>("S1", Side::Left, vec![]).is_err());
}

#[test]
fn table_two_fixtures() {
    // Guided row: 12 of 20 planes under 1 mm, all under 3 mm.
    let mut guided = vec![0.5; 12];
    guided.extend(vec![2.0; 8]);
    // Freehand row: 6 under 1, 17 under 3, 19 under 5.
    let mut freehand = vec![0.4; 6];
    freehand.extend(vec![2.2; 11]);
    freehand.extend(vec![4.0; 2]);
    freehand.push(6.3);
    let table = margin_table(&[("guided", &guided), ("freehand", &freehand)], &MARGIN_THRESHOLDS).unwrap();
    assert_eq!(table.rows[0].percent, vec![60.0, 100.0, 100.0]);
    assert_eq!(table.rows[1].percent, vec![30.0, 85.0, 95.0]);
    assert_eq!(
        margin_percentages(&[0.2; 7], &MARGIN_THRESHOLDS).unwrap(),
        vec![100.0; 3]
    );
}

#[test]
fn heatmap_fields() {
    let c = planned(Vec3::new(0.0, 0.0, 1.0));
    let face = TriangleMesh::subdivided_cuboid(Point3::new(-20.0, -20.0, 0.0), Point3::new(20.0, 20.0, 1.0), 4);
    // Put the face mesh into the planned plane so its vertices have known offsets.
    let on_plane = face.transformed(&RigidTransform::from_translation(Vec3::new(0.0, 0.0, c.plane.offset)));
    let zero = heatmap_field(
        HeatmapSource::Plane {
            resected: &c.plane,
            mesh: &on_plane,
        },
        &c.plane,
    )
    .unwrap();
    assert!(zero.scalars().unwrap().iter().all(|v| v.abs() < 1e-12));
    let shifted = c.plane.translated(2.0);
    let two = heatmap_field(
        HeatmapSource::Plane {
            resected: &shifted,
            mesh: &on_plane,
        },
        &c.plane,
    )
    .unwrap();
    assert!(two.scalars().unwrap().iter().all(|v| (v - 2.0).abs() < 1e-6));

    // Rotation about a line in the planned plane: linear field, zero on the line.
    let pivot = Point3::new(0.0, 0.0, c.plane.offset);
    let n = RigidTransform::from_axis_angle(&Vec3::y(), 0.05, Vec3::zeros()).apply_unit(&c.plane.normal);
    let tilted = Plane::through(&pivot, n);
    let field = heatmap_field(
        HeatmapSource::Plane {
            resected: &tilted,
            mesh: &on_plane,
        },
        &c.plane,
    )
    .unwrap();
    for (v, s) in on_plane.vertices().iter().zip(field.scalars().unwrap()) {
        assert_relative_eq!(*s, -0.05f64.tan() * v.x, epsilon = 1e-9);
    }

    // Measured on an actual cut-face mesh.
    let raised = on_plane.transformed(&RigidTransform::from_translation(Vec3::new(0.0, 0.0, 2.0)));
    let f = heatmap_field(HeatmapSource::CutFace(&raised), &c.plane).unwrap();
    let expected: Vec<f64> = raised.vertices().iter().map(|p| c.plane.signed_distance(p)).collect();
    assert_eq!(f.scalars().unwrap(), expected.as_slice());
}

/// Brute-force two-sided p by listing every n1-subset of ranks 1..n.
fn enumeration_p(n1: usize, n: usize, w: usize) -> f64 {
    let (mut lower, mut upper, mut total) = (0u128, 0u128, 0u128);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let s: usize = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
        total += 1;
        lower += (s <= w) as u128;
        upper += (s >= w) as u128;
    }
    two_sided_from_counts(lower, upper, total)
}

#[test]
fn rank_sum_counts_match_enumeration() {
    for n in 2..=10 {
        for n1 in 1..n {
            let counts = rank_sum_counts(n1, n);
            let mut brute = vec![0u128; counts.len()];
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize == n1 {
                    brute[(0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum::<usize>()] += 1;
                }
            }
            assert_eq!(counts, brute, "n1={n1} n={n}");
        }
    }
}

fn untied(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max, 1..=max).prop_flat_map(|(n1, n2)| {
        Just((0..(n1 + n2)).map(|i| i as f64 * 1.37 + 0.2).collect::<Vec<_>>())
            .prop_shuffle()
            .prop_map(move |v| (v[..n1].to_vec(), v[n1..].to_vec()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exact_p_equals_enumeration((a, b) in untied(8)) {
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        prop_assert_eq!(r.method, WilcoxonMethod::Exact);
        let p = enumeration_p(a.len(), a.len() + b.len(), r.statistic as usize);
        prop_assert_eq!(r.p_value.to_bits(), p.to_bits());
        prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn rank_test_is_invariant_to_monotone_maps(
        a in prop::collection::vec(0.0f64..10.0, 1..14),
        b in prop::collection::vec(0.0f64..10.0, 1..14),
    ) {
        let f = |x: &f64| (x * 0.7).exp() + 3.0 * x;
        let (fa, fb): (Vec<f64>, Vec<f64>) = (a.iter().map(f).collect(), b.iter().map(f).collect());
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        let s = wilcoxon_rank_sum(&fa, &fb).unwrap();
        prop_assert_eq!(r.p_value, s.p_value);
        prop_assert_eq!(r.statistic, s.statistic);
    }

    #[test]
    fn margin_table_is_monotone(devs in prop::collection::vec(0.0f64..8.0, 1..40)) {
        let p = margin_percentages(&devs, &MARGIN_THRESHOLDS).unwrap();
        prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(p.iter().all(|&x| (0.0..=100.0).contains(&x)));
    }

    #[test]
    fn swapping_planes_negates_signed_deviation(shift in -6.0f64..6.0, tilt in -0.3f64..0.3) {
        let t = tumor();
        let f = PelvicFrame::identity();
        let a = planned(Vec3::new(0.2, 0.1, 1.0));
        let n = RigidTransform::from_axis_angle(&Vec3::new(1.0, 1.0, 0.0), tilt, Vec3::zeros()).apply_unit(&a.plane.normal);
        let b_plane = Plane::new(n, a.plane.offset + shift + n.dot(&t.sphere.center.coords) - a.plane.normal.dot(&t.sphere.center.coords));
        let b = PlannedCut::new(a.label, b_plane.clone(), &t);
        let ab = deviations(&a, &b_plane, &t, &f);
        let ba = deviations(&b, &a.plane, &t, &f);
        prop_assert!((ab.distance_deviation - ba.distance_deviation).abs() < 1e-9);
        prop_assert!((ab.signed_deviation + ba.signed_deviation).abs() < 1e-9);
        prop_assert!((ab.distance_deviation - (ab.mp - ab.mr).abs()).abs() < 1e-9);
        prop_assert!((ab.distance_deviation - ab.signed_deviation.abs()).abs() < 1e-9);
    }

    #[test]
    fn angles_are_frame_independent(
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in 0.0f64..3.0,
        t in prop::array::uniform3(-50.0f64..50.0),
        roll in -15.0f64..15.0,
    ) {
        prop_assume!(Vec3::from(axis).norm() > 0.1);
        let frame = PelvicFrame::<f64>::identity();
        let tumor = tumor();
        let a = planned(Vec3::new(0.3, 0.4, 1.0));
        let n = RigidTransform::from_axis_angle(&Vec3::new(0.4, 1.0, 0.2), roll.to_radians(), Vec3::zeros()).apply_unit(&a.plane.normal);
        let b = Plane::through(&a.plane.origin_point(), n);
        let d0 = deviations(&a, &b, &tumor, &frame);

        let tf = RigidTransform::from_axis_angle(&Vec3::from(axis), angle, Vec3::from(t));
        let moved_frame = PelvicFrame { transform: frame.transform.compose(&tf.inverse()) };
        let moved_tumor = TumorModel::new(Sphere::new(tf.apply(&tumor.sphere.center), 25.0).unwrap(), 5.0).unwrap();
        let moved_a = PlannedCut::new(a.label, a.plane.transformed(&tf), &moved_tumor);
        let d1 = deviations(&moved_a, &b.transformed(&tf), &moved_tumor, &moved_frame);
        prop_assert!((d0.roll_deviation.unwrap() - d1.roll_deviation.unwrap()).abs() < 1e-9);
        prop_assert!((d0.pitch_deviation.unwrap() - d1.pitch_deviation.unwrap()).abs() < 1e-9);
        prop_assert!((d0.distance_deviation - d1.distance_deviation).abs() < 1e-9);
    }
}

#[test]
fn exact_rejects_ties() {
    assert!(wilcoxon_exact(&[1.0, 2.0], &[2.0, 3.0]).is_err());
    let r = wilcoxon_rank_sum(&[1.0, 2.0], &[2.0, 3.0]).unwrap();
    assert_eq!(r.method, WilcoxonMethod::NormalApproximation);
}
