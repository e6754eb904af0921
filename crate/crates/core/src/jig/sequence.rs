//! The four-step resection sequence: component selection and stage layout.

use super::assembly::{assemble, final_slot, frame, FinalChoice, JigAssembly, JigConfig, ResectionChoice};
use super::catalog::Catalog;
use super::fit::{closed_form_pose, fit_slots, slot_objective, slot_residuals, FitOptions, SlotResidual};
use crate::error::{Error, Result};
use crate::geometry::{Plane, Point3, RigidTransform, UnitVec3, Vec3};
use crate::planning::{CutLabel, ResectionPlan};
use crate::scalar::{deg, lit, rad, to_f64, Scalar};

use nalgebra::UnitQuaternion;

#[derive(Debug, Clone, PartialEq)]
pub struct Stage<T: Scalar> {
    /// 1: steps 1–2 (first two cuts), 2: step 3, 3: step 4.
    pub stage: usize,
    pub config: JigConfig,
    pub assembly: JigAssembly<T>,
    /// Cuts performed in this stage.
    pub labels: Vec<CutLabel>,
    pub residuals: Vec<SlotResidual<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResectionSequence<T: Scalar> {
    /// Base-local → world; shared by every stage through the K-wires.
    pub pose: RigidTransform<T>,
    pub stages: Vec<Stage<T>>,
}

impl<T: Scalar> ResectionSequence<T> {
    /// World pose of the engraved rectangle.
    pub fn pattern_pose(&self) -> RigidTransform<T> {
        self.pose.compose(&self.stages[0].assembly.pattern_frame)
    }
}

/// Acceptable extra angle mismatch when choosing among near-equal pairs (°).
const PAIR_SLACK_DEG: f64 = 0.05;
/// Stage-1 pairs carried through to the later stages, per extension.
const PAIR_CANDIDATES: usize = 6;

fn connector_normal<T: Scalar>(conn: &RigidTransform<T>, tilt: f64, yaw: f64) -> Vec3<T> {
    let r = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), rad(lit::<T>(yaw)))
        * UnitQuaternion::from_axis_angle(&Vec3::y_axis(), rad(lit::<T>(tilt)));
    conn.rotation() * (r * Vec3::x())
}

fn unoriented_angle<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    let cos = a.dot(b).abs().min(T::one());
    deg(a.cross(b).norm().atan2(cos))
}

/// res1/res2 pairs whose relative slot angle matches the planned planes,
/// best first: poses that put the base bottom toward the tumor lead.
fn candidate_pairs<T: Scalar>(
    catalog: &Catalog,
    plan: &ResectionPlan<T>,
    labels: [CutLabel; 2],
    extension: &str,
    options: &FitOptions,
) -> Result<Vec<(ResectionChoice, ResectionChoice)>> {
    let s = &catalog.resection;
    let c0 = frame::<T>(&catalog.base.mating_slots[0]);
    let c1 = frame::<T>(&catalog.base.mating_slots[1]);
    let n1 = plan
        .cut(labels[0])
        .ok_or_else(|| Error::NoCorrespondence(labels[0].to_string()))?
        .plane
        .normal;
    let n2 = plan
        .cut(labels[1])
        .ok_or_else(|| Error::NoCorrespondence(labels[1].to_string()))?
        .plane
        .normal;
    let planned = unoriented_angle(&n1.into_inner(), &n2.into_inner());

    let grid: Vec<(f64, f64)> = s
        .tilt_deg
        .iter()
        .flat_map(|&t| s.yaw_deg.iter().map(move |&y| (t, y)))
        .collect();
    let a: Vec<Vec3<T>> = grid.iter().map(|&(t, y)| connector_normal(&c0, t, y)).collect();
    let b: Vec<Vec3<T>> = grid.iter().map(|&(t, y)| connector_normal(&c1, t, y)).collect();
    let mut scored: Vec<(T, usize, usize)> = Vec::new();
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            scored.push(((unoriented_angle(ai, bj) - planned).abs(), i, j));
        }
    }
    let best = scored
        .iter()
        .map(|x| x.0)
        .fold(T::max_value().unwrap_or_else(T::one), |m, v| m.min(v));
    let mut near: Vec<(T, usize, usize)> = scored
        .into_iter()
        .filter(|x| x.0 <= best + lit(PAIR_SLACK_DEG))
        .collect();
    // Deterministic order: mismatch, then smallest deflection.
    let deflection = |k: usize| grid[k].0.abs() + grid[k].1.abs();
    near.sort_by(|x, y| {
        x.0.partial_cmp(&y.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((deflection(x.1) + deflection(x.2)).total_cmp(&(deflection(y.1) + deflection(y.2))))
    });
    near.truncate(4000);

    let standoff = s.standoff.iter().copied().fold(f64::INFINITY, f64::min);
    let choice = |k: usize| ResectionChoice {
        tilt_deg: grid[k].0,
        yaw_deg: grid[k].1,
        standoff,
    };
    let mut picks: Vec<(T, ResectionChoice, ResectionChoice)> = Vec::new();
    for &(_, i, j) in &near {
        let (r1, r2) = (choice(i), choice(j));
        let asm: JigAssembly<T> = assemble(&JigConfig::step1(r1, extension, r2, labels), catalog)?;
        let Ok(pose) = closed_form_pose(&asm, plan, options) else {
            continue;
        };
        let down = pose.apply_vector(&-Vec3::z());
        let toward = plan.tumor.sphere.center - Point3::from(pose.translation());
        picks.push((deg(down.cross(&toward).norm().atan2(down.dot(&toward))), r1, r2));
    }
    // Stable sort keeps the mismatch order among equal scores.
    picks.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    picks.truncate(PAIR_CANDIDATES);
    if picks.is_empty() {
        return Err(Error::InfeasibleJig(f64::INFINITY));
    }
    Ok(picks.into_iter().map(|(_, a, b)| (a, b)).collect())
}

/// Best direct-mount component on `slot` for `plane` with the base fixed.
fn choose_direct<T: Scalar>(
    catalog: &Catalog,
    pose: &RigidTransform<T>,
    slot: usize,
    plane: &Plane<T>,
    w: T,
) -> ResectionChoice {
    let s = &catalog.resection;
    let conn = pose.compose(&frame::<T>(&catalog.base.mating_slots[slot]));
    let x = conn.apply_vector(&Vec3::x());
    let d0 = plane.signed_distance(&Point3::from(conn.translation()));
    let slope = plane.normal.dot(&x);
    let mut best: Option<(T, ResectionChoice)> = None;
    for &t in &s.tilt_deg {
        for &y in &s.yaw_deg {
            let n = connector_normal(&conn, t, y);
            let theta = unoriented_angle(&n, &plane.normal.into_inner());
            for &so in &s.standoff {
                let d = d0 + slope * lit::<T>(so);
                let obj = d * d + w * w * theta * theta;
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((
                        obj,
                        ResectionChoice {
                            tilt_deg: t,
                            yaw_deg: y,
                            standoff: so,
                        },
                    ));
                }
            }
        }
    }
    best.expect("non-empty series").1
}

/// Best final component and slide for `plane`, riding on the K-wires.
fn choose_final<T: Scalar>(
    catalog: &Catalog,
    pose: &RigidTransform<T>,
    plane: &Plane<T>,
    label: CutLabel,
    w: T,
) -> FinalChoice {
    let f = &catalog.final_series;
    let k = &catalog.base.kwire_holes[0].direction;
    let kdir = UnitVec3::new_normalize(Vec3::new(lit(k[0]), lit(k[1]), lit(k[2])));
    let kb = plane.normal.dot(&pose.apply_vector(&kdir));
    let (lo, hi) = (lit::<T>(f.slide_range[0]), lit::<T>(f.slide_range[1]));
    let mut best: Option<(T, T, FinalChoice)> = None;
    for reversed in [false, true] {
        for &t in &f.tilt_deg {
            for &y in &f.yaw_deg {
                for &so in &f.standoff {
                    let mut c = FinalChoice {
                        tilt_deg: t,
                        yaw_deg: y,
                        standoff: so,
                        slide: 0.0,
                        reversed,
                    };
                    let slot = final_slot::<T>(catalog, &kdir, &c, label).transformed(pose);
                    let theta = unoriented_angle(&slot.normal.into_inner(), &plane.normal.into_inner());
                    let d0 = plane.signed_distance(&slot.center);
                    let slide = if kb.abs() > lit(1e-9) {
                        (-d0 / kb).max(lo).min(hi)
                    } else {
                        T::zero()
                    };
                    let d = d0 + kb * slide;
                    let obj = d * d + w * w * theta * theta;
                    if best
                        .as_ref()
                        .is_none_or(|(b, bs, _)| obj < *b || (obj == *b && slide.abs() < bs.abs()))
                    {
                        c.slide = to_f64(slide);
                        best = Some((obj, slide, c));
                    }
                }
            }
        }
    }
    best.expect("non-empty series").2
}

fn check_feasible<T: Scalar>(residuals: &[SlotResidual<T>], options: &FitOptions) -> Result<()> {
    let w = lit::<T>(options.angle_weight);
    let worst = residuals
        .iter()
        .map(|r| r.magnitude(w))
        .fold(T::zero(), |a, b| a.max(b));
    if worst < lit(options.max_residual) {
        Ok(())
    } else {
        Err(Error::InfeasibleJig(to_f64(worst)))
    }
}

/// Three stages for a four-cut Type-II plan, cuts taken in plan order.
pub fn resection_sequence<T: Scalar>(
    plan: &ResectionPlan<T>,
    catalog: &Catalog,
    options: &FitOptions,
) -> Result<ResectionSequence<T>> {
    if plan.cuts.len() != 4 {
        return Err(Error::InvalidParameter(format!(
            "the Type-II sequence needs 4 cuts, plan has {}",
            plan.cuts.len()
        )));
    }
    let l: Vec<CutLabel> = plan.labels();
    if catalog.extensions.is_empty() {
        return Err(Error::MissingComponent("extension".into()));
    }
    let w = lit::<T>(options.angle_weight);

    let mut best: Option<(T, ResectionSequence<T>)> = None;
    let mut last_err = None;
    // Every extension length and leading pair is carried through all three
    // stages; the feasible sequence with the lowest total objective wins.
    for ext in &catalog.extensions {
        let pairs = match candidate_pairs(catalog, plan, [l[0], l[1]], &ext.id, options) {
            Ok(p) => p,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        for (res1, res2) in pairs {
            match build_sequence(plan, catalog, options, &l, res1, &ext.id, res2) {
                Ok(seq) => {
                    let total = seq
                        .stages
                        .iter()
                        .fold(T::zero(), |acc, st| acc + slot_objective(&st.residuals, w));
                    if best.as_ref().is_none_or(|(b, _)| total < *b) {
                        best = Some((total, seq));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
    }
    best.map(|(_, seq)| seq)
        .ok_or_else(|| last_err.unwrap_or(Error::InfeasibleJig(f64::INFINITY)))
}

fn build_sequence<T: Scalar>(
    plan: &ResectionPlan<T>,
    catalog: &Catalog,
    options: &FitOptions,
    l: &[CutLabel],
    res1: ResectionChoice,
    extension: &str,
    res2: ResectionChoice,
) -> Result<ResectionSequence<T>> {
    let w = lit::<T>(options.angle_weight);
    let cfg1 = JigConfig::step1(res1, extension, res2, [l[0], l[1]]);
    let asm1: JigAssembly<T> = assemble(&cfg1, catalog)?;
    let (pose, res_1) = fit_slots(&asm1, plan, options)?;

    let res3 = choose_direct(catalog, &pose, 1, &plan.cuts[2].plane, w);
    let cfg2 = JigConfig::step3(res1, res3, [l[0], l[2]]);
    let asm2: JigAssembly<T> = assemble(&cfg2, catalog)?;
    let res_2 = slot_residuals(&asm2, &pose, plan)?;

    let fin = choose_final(catalog, &pose, &plan.cuts[3].plane, l[3], w);
    let cfg3 = JigConfig::step4(fin, l[3]);
    let asm3: JigAssembly<T> = assemble(&cfg3, catalog)?;
    let res_3 = slot_residuals(&asm3, &pose, plan)?;

    check_feasible(&res_2, options)?;
    check_feasible(&res_3, options)?;
    Ok(ResectionSequence {
        pose,
        stages: vec![
            Stage {
                stage: 1,
                config: cfg1,
                assembly: asm1,
                labels: vec![l[0], l[1]],
                residuals: res_1,
            },
            Stage {
                stage: 2,
                config: cfg2,
                assembly: asm2,
                labels: vec![l[2]],
                residuals: res_2,
            },
            Stage {
                stage: 3,
                config: cfg3,
                assembly: asm3,
                labels: vec![l[3]],
                residuals: res_3,
            },
        ],
    })
}
