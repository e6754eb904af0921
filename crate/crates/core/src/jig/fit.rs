//! Pose fit of an assembled jig onto planned cutting planes.

use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion};

use super::assembly::{JigAssembly, SlotPlane};
use crate::error::{Error, Result};
use crate::geometry::{intersect_ray_mesh, Plane, Point3, Ray, RigidTransform, TriangleMesh, UnitVec3, Vec3};
use crate::planning::{CutLabel, ResectionPlan};
use crate::registration::procrustes;
use crate::scalar::{deg, lit, to_f64, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Angle weight in the objective (mm per degree).
    pub angle_weight: f64,
    /// Worst per-slot residual `sqrt(d² + (w·θ)²)` accepted as feasible.
    pub max_residual: f64,
    /// Weight of the anchor term fixing directions the slots leave free.
    pub anchor_weight: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            angle_weight: 1.0,
            max_residual: 10.0,
            anchor_weight: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotResidual<T: Scalar> {
    pub label: CutLabel,
    /// Slot center to planned plane (mm, signed along the planned normal).
    pub distance_mm: T,
    /// Dihedral angle between slot and planned plane (degrees, 0–90).
    pub angle_deg: T,
}

impl<T: Scalar> SlotResidual<T> {
    pub fn magnitude(&self, w: T) -> T {
        (self.distance_mm * self.distance_mm + w * w * self.angle_deg * self.angle_deg).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PinSelection<T: Scalar> {
    pub hole: String,
    pub length: T,
    /// Gap from the pin tip to the bone along the pin axis; negative when the
    /// shortest pin still reaches past the surface, `None` when the axis
    /// misses the bone.
    pub gap: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JigPlacement<T: Scalar> {
    /// Jig-local → bone/world.
    pub pose: RigidTransform<T>,
    pub residuals: Vec<SlotResidual<T>>,
    /// Σ d² + (w·θ)² at `pose`.
    pub objective: T,
    pub pins: Vec<PinSelection<T>>,
}

/// Planned plane for each slot, in slot order.
fn targets<'a, T: Scalar>(assembly: &JigAssembly<T>, plan: &'a ResectionPlan<T>) -> Result<Vec<&'a Plane<T>>> {
    if assembly.slots.is_empty() {
        return Err(Error::NoCorrespondence("assembly has no slots".into()));
    }
    if assembly.slots.len() > plan.cuts.len() {
        return Err(Error::NoCorrespondence(format!(
            "{} slots for {} planned cuts",
            assembly.slots.len(),
            plan.cuts.len()
        )));
    }
    assembly
        .slots
        .iter()
        .map(|s| {
            plan.cut(s.label)
                .map(|c| &c.plane)
                .ok_or_else(|| Error::NoCorrespondence(s.label.to_string()))
        })
        .collect()
}

/// Residual of one slot at a pose. A slot has no preferred side, so the
/// dihedral angle is taken between the unoriented planes.
pub fn slot_residual<T: Scalar>(slot: &SlotPlane<T>, pose: &RigidTransform<T>, planned: &Plane<T>) -> SlotResidual<T> {
    let s = pose.apply_unit(&slot.normal);
    let c = pose.apply(&slot.center);
    let cos = s.dot(&planned.normal).abs().min(T::one());
    let sin = s.cross(&planned.normal).norm();
    SlotResidual {
        label: slot.label,
        distance_mm: planned.signed_distance(&c),
        angle_deg: deg(sin.atan2(cos)),
    }
}

pub fn slot_residuals<T: Scalar>(
    assembly: &JigAssembly<T>,
    pose: &RigidTransform<T>,
    plan: &ResectionPlan<T>,
) -> Result<Vec<SlotResidual<T>>> {
    let planes = targets(assembly, plan)?;
    Ok(assembly
        .slots
        .iter()
        .zip(planes)
        .map(|(s, p)| slot_residual(s, pose, p))
        .collect())
}

pub fn slot_objective<T: Scalar>(residuals: &[SlotResidual<T>], angle_weight: T) -> T {
    residuals.iter().fold(T::zero(), |acc, r| {
        acc + r.distance_mm * r.distance_mm + angle_weight * angle_weight * r.angle_deg * r.angle_deg
    })
}

/// Orthonormal basis of the complement of `span(normals)`.
fn free_directions<T: Scalar>(normals: &[UnitVec3<T>]) -> Vec<Vec3<T>> {
    let mut m = Matrix3::<T>::zeros();
    for n in normals {
        m += n.into_inner() * n.transpose();
    }
    let eig = m.symmetric_eigen();
    let top = eig.eigenvalues.max();
    (0..3)
        .filter(|&i| eig.eigenvalues[i] <= top * lit(1e-6))
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect()
}

/// What pins down the directions the slots leave free.
#[derive(Debug, Clone)]
struct Anchor<T: Scalar> {
    /// Jig-local point and its world target.
    local: Point3<T>,
    target: Point3<T>,
    rotation: Option<UnitQuaternion<T>>,
}

fn anchor_for<T: Scalar>(assembly: &JigAssembly<T>, plan: &ResectionPlan<T>) -> Anchor<T> {
    match &plan.pattern_pose {
        Some(p) => Anchor {
            local: Point3::from(assembly.pattern_frame.translation()),
            target: Point3::from(p.translation()),
            rotation: Some(p.rotation() * assembly.pattern_frame.rotation().inverse()),
        },
        None => Anchor {
            local: Point3::origin(),
            target: plan.tumor.sphere.center,
            rotation: None,
        },
    }
}

struct Problem<'a, T: Scalar> {
    slots: &'a [SlotPlane<T>],
    planes: Vec<&'a Plane<T>>,
    signs: Vec<T>,
    free: Vec<Vec3<T>>,
    rotation_free: bool,
    anchor: Anchor<T>,
    w: T,
    lambda: T,
}

impl<T: Scalar> Problem<'_, T> {
    fn residuals(&self, pose: &RigidTransform<T>, rot_ref: &UnitQuaternion<T>) -> Vec<T> {
        let mut r = Vec::with_capacity(self.slots.len() * 4 + 6);
        for ((slot, plane), &sg) in self.slots.iter().zip(&self.planes).zip(&self.signs) {
            let s = pose.apply_unit(&slot.normal).into_inner() * sg;
            r.push(plane.signed_distance(&pose.apply(&slot.center)));
            let cross = s.cross(&plane.normal);
            let sin = cross.norm();
            let angle = sin.atan2(s.dot(&plane.normal));
            let scale = if sin > T::default_epsilon() {
                angle / sin
            } else {
                T::one()
            };
            let v = cross * (deg(scale) * self.w);
            r.extend([v.x, v.y, v.z]);
        }
        let a = pose.apply(&self.anchor.local) - self.anchor.target;
        for f in &self.free {
            r.push(f.dot(&a) * self.lambda);
        }
        if self.rotation_free {
            let target = self.anchor.rotation.unwrap_or(*rot_ref);
            let d = (pose.rotation() * target.inverse()).scaled_axis();
            r.extend([d.x * self.lambda, d.y * self.lambda, d.z * self.lambda]);
        }
        r
    }
}

fn perturb<T: Scalar>(pose: &RigidTransform<T>, x: &[T; 6]) -> RigidTransform<T> {
    let dq = UnitQuaternion::from_scaled_axis(Vec3::new(x[0], x[1], x[2]));
    RigidTransform::from_parts(dq * pose.rotation(), pose.translation() + Vec3::new(x[3], x[4], x[5]))
}

fn sum_sq<T: Scalar>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |a, &v| a + v * v)
}

/// Levenberg–Marquardt on the pose, relinearized at every accepted step.
fn refine<T: Scalar>(problem: &Problem<'_, T>, start: RigidTransform<T>) -> RigidTransform<T> {
    let rot_ref = start.rotation();
    let mut pose = start;
    let mut r = problem.residuals(&pose, &rot_ref);
    let mut cost = sum_sq(&r);
    let mut mu = lit::<T>(1e-3);
    let h = T::default_epsilon().sqrt() * lit(10.0);
    for _ in 0..200 {
        let m = r.len();
        let mut j = DMatrix::<T>::zeros(m, 6);
        for k in 0..6 {
            let mut e = [T::zero(); 6];
            e[k] = h;
            let plus = problem.residuals(&perturb(&pose, &e), &rot_ref);
            e[k] = -h;
            let minus = problem.residuals(&perturb(&pose, &e), &rot_ref);
            for i in 0..m {
                j[(i, k)] = (plus[i] - minus[i]) / (h + h);
            }
        }
        let rv = DVector::from_vec(r.clone());
        let jt = j.transpose();
        let a = &jt * &j;
        let g = &jt * rv;
        if g.amax() <= T::default_epsilon() * lit(1e-3) {
            break;
        }
        let mut accepted = false;
        while mu < lit(1e12) {
            let mut damped = a.clone();
            for k in 0..6 {
                damped[(k, k)] += mu * (a[(k, k)] + T::one());
            }
            let Some(step) = damped.lu().solve(&(-&g)) else {
                mu *= lit(4.0);
                continue;
            };
            let x = [step[0], step[1], step[2], step[3], step[4], step[5]];
            let trial = perturb(&pose, &x);
            let tr = problem.residuals(&trial, &rot_ref);
            let tc = sum_sq(&tr);
            if tc < cost {
                let gain = cost - tc;
                pose = trial;
                r = tr;
                cost = tc;
                mu = (mu / lit(3.0)).max(lit(1e-12));
                accepted = true;
                if gain <= cost * T::default_epsilon() || step.norm() <= T::default_epsilon() {
                    return pose;
                }
                break;
            }
            mu *= lit(4.0);
        }
        if !accepted {
            break;
        }
    }
    pose
}

/// Closed-form start: rotation from normal correspondences, translation
/// from the plane offsets plus the anchor on the free directions.
fn initial_pose<T: Scalar>(problem: &mut Problem<'_, T>) -> Result<RigidTransform<T>> {
    let k = problem.slots.len();
    let mut best: Option<(T, UnitQuaternion<T>, Vec<T>)> = None;
    // Slot orientation is free: try every sign pattern (k ≤ 4 in practice).
    for mask in 0..(1usize << k.min(8)) {
        let signs: Vec<T> = (0..k)
            .map(|i| if mask >> i & 1 == 1 { -T::one() } else { T::one() })
            .collect();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for ((slot, plane), &sg) in problem.slots.iter().zip(&problem.planes).zip(&signs) {
            let s = slot.normal.into_inner() * sg;
            a.extend([Point3::from(s), Point3::from(-s)]);
            b.extend([
                Point3::from(plane.normal.into_inner()),
                Point3::from(-plane.normal.into_inner()),
            ]);
        }
        let rot = match procrustes(&a, &b) {
            Ok((tf, _)) => tf.rotation(),
            Err(_) => {
                // Parallel slot normals: shortest arc for the first one.
                let s = problem.slots[0].normal.into_inner() * signs[0];
                let n = problem.planes[0].normal.into_inner();
                UnitQuaternion::rotation_between(&s, &n).unwrap_or_else(|| {
                    let (u, _) = crate::geometry::orthonormal_basis(&problem.planes[0].normal);
                    UnitQuaternion::from_axis_angle(&UnitVec3::new_normalize(u), T::pi())
                })
            }
        };
        let cost =
            problem
                .slots
                .iter()
                .zip(&problem.planes)
                .zip(&signs)
                .fold(T::zero(), |acc, ((slot, plane), &sg)| {
                    let s = rot * (slot.normal.into_inner() * sg);
                    acc + (s - plane.normal.into_inner()).norm_squared()
                });
        if best.as_ref().is_none_or(|(c, _, _)| cost < *c - T::default_epsilon()) {
            best = Some((cost, rot, signs));
        }
    }
    let (_, rot, signs) = best.expect("at least one sign pattern");
    problem.signs = signs;

    let rows = problem.planes.len() + problem.free.len();
    let mut a = DMatrix::<T>::zeros(rows, 3);
    let mut b = DVector::<T>::zeros(rows);
    for (i, (slot, plane)) in problem.slots.iter().zip(&problem.planes).enumerate() {
        let n = plane.normal.into_inner();
        a.set_row(i, &n.transpose());
        b[i] = plane.offset - n.dot(&(rot * slot.center.coords));
    }
    for (j, f) in problem.free.iter().enumerate() {
        let i = problem.planes.len() + j;
        a.set_row(i, &f.transpose());
        b[i] = f.dot(&(problem.anchor.target.coords - rot * problem.anchor.local.coords));
    }
    let svd = a.svd(true, true);
    let t = svd
        .solve(&b, lit(1e-12))
        .map_err(|e| Error::Degenerate(format!("jig translation: {e}")))?;
    Ok(RigidTransform::from_parts(rot, Vec3::new(t[0], t[1], t[2])))
}

/// Best pose of `assembly` against the plan's planes, without bone contact.
fn problem<'a, T: Scalar>(
    assembly: &'a JigAssembly<T>,
    plan: &'a ResectionPlan<T>,
    options: &FitOptions,
) -> Result<Problem<'a, T>> {
    let planes = targets(assembly, plan)?;
    let normals: Vec<UnitVec3<T>> = planes.iter().map(|p| p.normal).collect();
    let free = free_directions(&normals);
    Ok(Problem {
        slots: &assembly.slots,
        rotation_free: free.len() >= 2,
        free,
        planes,
        signs: Vec::new(),
        anchor: anchor_for(assembly, plan),
        w: lit(options.angle_weight),
        lambda: lit(options.anchor_weight),
    })
}

/// The closed-form starting pose used by [`fit_slots`].
pub(crate) fn closed_form_pose<T: Scalar>(
    assembly: &JigAssembly<T>,
    plan: &ResectionPlan<T>,
    options: &FitOptions,
) -> Result<RigidTransform<T>> {
    initial_pose(&mut problem(assembly, plan, options)?)
}

pub fn fit_slots<T: Scalar>(
    assembly: &JigAssembly<T>,
    plan: &ResectionPlan<T>,
    options: &FitOptions,
) -> Result<(RigidTransform<T>, Vec<SlotResidual<T>>)> {
    let mut problem = problem(assembly, plan, options)?;
    let start = initial_pose(&mut problem)?;
    let pose = refine(&problem, start);
    let residuals = slot_residuals(assembly, &pose, plan)?;
    let w = lit::<T>(options.angle_weight);
    let worst = residuals
        .iter()
        .map(|r| r.magnitude(w))
        .fold(T::zero(), |a, b| a.max(b));
    if !(worst < lit(options.max_residual)) {
        return Err(Error::InfeasibleJig(to_f64(worst)));
    }
    Ok((pose, residuals))
}

/// Longest stock pin that does not reach past the bone along its axis.
pub fn select_pins<T: Scalar>(
    assembly: &JigAssembly<T>,
    pose: &RigidTransform<T>,
    bone: &TriangleMesh<T>,
) -> Vec<PinSelection<T>> {
    let shortest = assembly
        .pin_lengths
        .iter()
        .copied()
        .fold(None, |m: Option<T>, l| Some(m.map_or(l, |m| m.min(l))))
        .unwrap_or_else(T::zero);
    assembly
        .pin_holes
        .iter()
        .map(|h| {
            let axis = h.axis.transformed(pose);
            let hit = intersect_ray_mesh(
                &Ray {
                    origin: axis.origin,
                    direction: axis.direction,
                },
                bone,
            );
            match hit {
                Some(hit) => {
                    let fit = assembly
                        .pin_lengths
                        .iter()
                        .copied()
                        .filter(|&l| l <= hit.t + lit(1e-9))
                        .fold(None, |m: Option<T>, l| Some(m.map_or(l, |m| m.max(l))));
                    let length = fit.unwrap_or(shortest);
                    PinSelection {
                        hole: h.axis.id.clone(),
                        length,
                        gap: Some(hit.t - length),
                    }
                }
                None => PinSelection {
                    hole: h.axis.id.clone(),
                    length: shortest,
                    gap: None,
                },
            }
        })
        .collect()
}

pub fn fit_jig_pose<T: Scalar>(
    assembly: &JigAssembly<T>,
    plan: &ResectionPlan<T>,
    bone: &TriangleMesh<T>,
    options: &FitOptions,
) -> Result<JigPlacement<T>> {
    let (pose, residuals) = fit_slots(assembly, plan, options)?;
    let objective = slot_objective(&residuals, lit(options.angle_weight));
    let pins = select_pins(assembly, &pose, bone);
    Ok(JigPlacement {
        pose,
        residuals,
        objective,
        pins,
    })
}
