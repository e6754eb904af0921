//! Synthetic hemipelvis specimens for desk-scale studies.
//!
//! The bone is a lofted solid: elliptical cross-sections stacked along the
//! cranio-caudal axis, from the ischium up through the acetabular body to a
//! thin iliac wing. Every section is convex and the heights are monotone, so
//! the surface is closed and never self-intersects.

use crate::geometry::{LandmarkSet, Point3, RigidTransform, TriangleMesh, Vec3};
use crate::planning::Side;
use crate::scalar::{lit, Scalar};

/// Control sections for a right hemipelvis, pelvic-frame millimeters:
/// (z, center x, center y, radius along x, radius along y).
const SECTIONS: [[f64; 5]; 7] = [
    [-150.0, -30.0, -78.0, 14.0, 12.0],
    [-120.0, -28.0, -82.0, 34.0, 28.0],
    [-75.0, -30.0, -85.0, 48.0, 44.0],
    [-35.0, -36.0, -94.0, 50.0, 38.0],
    [0.0, -55.0, -104.0, 82.0, 16.0],
    [30.0, -62.0, -110.0, 84.0, 11.0],
    [45.0, -64.0, -112.0, 60.0, 6.0],
];

/// Hip rotation center of the reference right hemipelvis.
pub const HIP_CENTER: [f64; 3] = [-30.0, -85.0, -75.0];

fn lerp_section(z: f64) -> [f64; 4] {
    let last = SECTIONS.len() - 1;
    let z = z.clamp(SECTIONS[0][0], SECTIONS[last][0]);
    let k = SECTIONS.windows(2).position(|w| z <= w[1][0]).unwrap_or(last - 1);
    let (a, b) = (SECTIONS[k], SECTIONS[k + 1]);
    // Smoothstep between control sections keeps the loft free of kinks.
    let t = (z - a[0]) / (b[0] - a[0]);
    let t = t * t * (3.0 - 2.0 * t);
    [1, 2, 3, 4].map(|i| a[i] + (b[i] - a[i]) * t)
}

#[derive(Debug, Clone)]
pub struct SyntheticSpecimen<T: Scalar> {
    pub specimen_id: String,
    pub side: Side,
    /// Bone surface in world (scanner) coordinates.
    pub bone: TriangleMesh<T>,
    /// Both sides' landmarks in world coordinates.
    pub landmarks: LandmarkSet<T>,
    pub hip_center: Point3<T>,
    /// Acetabular surface samples for a sphere fit of the hip center.
    pub acetabular_points: Vec<Point3<T>>,
    /// Pelvic frame → world, as generated.
    pub placement: RigidTransform<T>,
}

/// Lofted hemipelvis in pelvic-frame coordinates, right side, scaled by `s`.
pub fn hemipelvis_mesh<T: Scalar>(scale: f64, stacks: usize, slices: usize) -> TriangleMesh<T> {
    let stacks = stacks.max(4);
    let slices = slices.max(8);
    let (z0, z1) = (SECTIONS[0][0], SECTIONS[SECTIONS.len() - 1][0]);
    let p = |x: f64, y: f64, z: f64| Point3::new(lit::<T>(x * scale), lit::<T>(y * scale), lit::<T>(z * scale));
    let bottom = lerp_section(z0);
    let top = lerp_section(z1);
    let mut vertices = vec![p(bottom[0], bottom[1], z0 - 4.0)];
    for i in 1..stacks {
        let phi = std::f64::consts::PI * i as f64 / stacks as f64;
        let z = z0 + (z1 - z0) * (1.0 - phi.cos()) / 2.0;
        // Rounded ends: sections shrink toward the poles.
        let m = phi.sin().powf(0.3);
        let [cx, cy, ax, ay] = lerp_section(z);
        for j in 0..slices {
            let th = std::f64::consts::TAU * j as f64 / slices as f64;
            vertices.push(p(cx + ax * m * th.cos(), cy + ay * m * th.sin(), z));
        }
    }
    vertices.push(p(top[0], top[1], z1 + 3.0));
    let north = vertices.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * slices + (j % slices);
    let mut triangles = Vec::new();
    for j in 0..slices {
        triangles.push([0, ring(1, j + 1), ring(1, j)]);
        triangles.push([north, ring(stacks - 1, j), ring(stacks - 1, j + 1)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
            triangles.push([a, b, d]);
            triangles.push([a, d, c]);
        }
    }
    TriangleMesh::new(vertices, triangles).expect("lofted hemipelvis is valid")
}

/// Mirror across the sagittal plane (y → −y), keeping outward orientation.
fn mirror<T: Scalar>(mesh: &TriangleMesh<T>) -> TriangleMesh<T> {
    let vertices = mesh.vertices().iter().map(|v| Point3::new(v.x, -v.y, v.z)).collect();
    let triangles = mesh.triangles().iter().map(|t| [t[0], t[2], t[1]]).collect();
    TriangleMesh::new(vertices, triangles).expect("mirrored mesh is valid")
}

/// Per-specimen size factors of the five-specimen cohort.
pub const COHORT_SCALES: [f64; 5] = [0.94, 0.98, 1.0, 1.03, 1.07];

/// Scanner placement of specimen `k`: a modest rotation and offset so the
/// world and pelvic frames differ.
fn placement<T: Scalar>(k: usize, side: Side) -> RigidTransform<T> {
    let s = match side {
        Side::Right => 1.0,
        Side::Left => -1.0,
    };
    let kf = k as f64;
    let axis = Vec3::new(lit(0.3 + 0.1 * kf), lit(-0.2 * s), lit(1.0));
    let angle = lit(0.15 + 0.07 * kf * s);
    let t = Vec3::new(
        lit(200.0 + 15.0 * kf),
        lit(-40.0 * s + 5.0 * kf),
        lit(600.0 - 10.0 * kf),
    );
    RigidTransform::from_axis_angle(&axis, angle, t)
}

pub fn synthetic_specimen<T: Scalar>(k: usize, side: Side) -> SyntheticSpecimen<T> {
    let scale = COHORT_SCALES[k % COHORT_SCALES.len()];
    let right = hemipelvis_mesh::<T>(scale, 36, 48);
    let local = match side {
        Side::Right => right,
        Side::Left => mirror(&right),
    };
    let tf = placement::<T>(k, side);
    let q = |x: f64, y: f64, z: f64| tf.apply(&Point3::new(lit(x * scale), lit(y * scale), lit(z * scale)));
    let ys = match side {
        Side::Right => 1.0,
        Side::Left => -1.0,
    };
    let hc = [HIP_CENTER[0], HIP_CENTER[1] * ys, HIP_CENTER[2]];
    let landmarks = LandmarkSet {
        asis_left: q(0.0, 120.0, 0.0),
        asis_right: q(0.0, -120.0, 0.0),
        psis_left: q(-150.0, 40.0, 12.0),
        psis_right: q(-150.0, -40.0, 12.0),
        hip_center: Some(q(hc[0], hc[1], hc[2])),
    };
    // A lateral cap of the acetabulum, 26 mm around the hip center.
    let mut acetabular_points = Vec::new();
    for i in 0..6 {
        for j in 0..10 {
            let polar = 0.25 + 1.1 * i as f64 / 5.0;
            let az = std::f64::consts::TAU * j as f64 / 10.0;
            let d = [polar.sin() * az.cos(), -ys * polar.cos(), polar.sin() * az.sin()];
            acetabular_points.push(q(hc[0] + 26.0 * d[0], hc[1] + 26.0 * d[1], hc[2] + 26.0 * d[2]));
        }
    }
    SyntheticSpecimen {
        specimen_id: format!("S{}", k + 1),
        side,
        bone: local.transformed(&tf),
        hip_center: q(hc[0], hc[1], hc[2]),
        landmarks,
        acetabular_points,
        placement: tf,
    }
}

/// Five specimens, both hemipelvises each, left before right.
pub fn synthetic_cohort<T: Scalar>() -> Vec<SyntheticSpecimen<T>> {
    (0..COHORT_SCALES.len())
        .flat_map(|k| [Side::Left, Side::Right].map(|s| synthetic_specimen(k, s)))
        .collect()
}
