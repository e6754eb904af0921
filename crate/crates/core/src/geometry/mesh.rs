use std::collections::HashMap;

use super::{Point3, RigidTransform, Vec3};
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

/// Triangles with area at or below this are degenerate (mm²).
pub const DEGENERATE_AREA: f64 = 1e-12;
/// Vertices closer than this are merged on load (mm).
pub const MERGE_TOLERANCE: f64 = 1e-6;

/// Indexed triangle surface in millimeters, optionally carrying one scalar
/// per vertex (used for distance heatmaps).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh<T: Scalar> {
    vertices: Vec<Point3<T>>,
    triangles: Vec<[usize; 3]>,
    scalars: Option<Vec<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T: Scalar> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Scalar> Aabb<T> {
    pub fn center(&self) -> Point3<T> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> T {
        (self.max - self.min).norm()
    }

    pub fn corners(&self) -> [Point3<T>; 8] {
        let (a, b) = (self.min, self.max);
        [
            Point3::new(a.x, a.y, a.z),
            Point3::new(b.x, a.y, a.z),
            Point3::new(a.x, b.y, a.z),
            Point3::new(b.x, b.y, a.z),
            Point3::new(a.x, a.y, b.z),
            Point3::new(b.x, a.y, b.z),
            Point3::new(a.x, b.y, b.z),
            Point3::new(b.x, b.y, b.z),
        ]
    }
}

impl<T: Scalar> TriangleMesh<T> {
    /// Validated constructor: every index in range, no degenerate triangle.
    pub fn new(vertices: Vec<Point3<T>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = Self {
            vertices,
            triangles,
            scalars: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Empty mesh (used for the empty side of a cut).
    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            triangles: Vec::new(),
            scalars: None,
        }
    }

    /// Builds a mesh from raw triangle soup: merges vertices within
    /// [`MERGE_TOLERANCE`], drops triangles that collapse and rejects
    /// out-of-range indices.
    pub fn from_soup(vertices: Vec<Point3<T>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(bad) = triangles.iter().flatten().find(|&&i| i >= n) {
            return Err(Error::Malformed(format!(
                "vertex index {bad} out of range ({n} vertices)"
            )));
        }
        let mesh = Self {
            vertices,
            triangles,
            scalars: None,
        }
        .merged(lit(MERGE_TOLERANCE));
        if mesh.triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        Ok(mesh)
    }

    /// Internal constructor for meshes produced by trusted kernels.
    pub(crate) fn from_parts(vertices: Vec<Point3<T>>, triangles: Vec<[usize; 3]>) -> Self {
        Self {
            vertices,
            triangles,
            scalars: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (k, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(Error::Malformed(format!(
                    "triangle {k} references a vertex out of range ({n} vertices)"
                )));
            }
            if to_f64(self.triangle_area(k)) <= DEGENERATE_AREA {
                return Err(Error::Malformed(format!("triangle {k} is degenerate")));
            }
        }
        if let Some(s) = &self.scalars {
            if s.len() != n {
                return Err(Error::Malformed("scalar channel length mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point3<T>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn scalars(&self) -> Option<&[T]> {
        self.scalars.as_deref()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn with_scalars(mut self, scalars: Vec<T>) -> Result<Self> {
        if scalars.len() != self.vertices.len() {
            return Err(Error::InvalidParameter(format!(
                "{} scalars for {} vertices",
                scalars.len(),
                self.vertices.len()
            )));
        }
        self.scalars = Some(scalars);
        Ok(self)
    }

    #[inline]
    pub fn corners(&self, k: usize) -> [Point3<T>; 3] {
        let [a, b, c] = self.triangles[k];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Area-weighted normal (|v| = 2·area).
    pub fn triangle_cross(&self, k: usize) -> Vec3<T> {
        let [a, b, c] = self.corners(k);
        (b - a).cross(&(c - a))
    }

    pub fn triangle_area(&self, k: usize) -> T {
        self.triangle_cross(k).norm() * lit(0.5)
    }

    pub fn surface_area(&self) -> T {
        (0..self.triangles.len()).fold(T::zero(), |acc, k| acc + self.triangle_area(k))
    }

    /// Enclosed volume by the divergence theorem. Only meaningful for
    /// closed, consistently oriented meshes.
    pub fn volume(&self) -> T {
        let sixth = lit::<T>(1.0 / 6.0);
        self.triangles.iter().fold(T::zero(), |acc, &[a, b, c]| {
            let (p, q, r) = (&self.vertices[a], &self.vertices[b], &self.vertices[c]);
            acc + p.coords.dot(&q.coords.cross(&r.coords)) * sixth
        })
    }

    /// Number of directed edges lacking exactly one opposite twin.
    pub fn unmatched_edges(&self) -> usize {
        let mut count: HashMap<(usize, usize), i64> = HashMap::new();
        for &[a, b, c] in &self.triangles {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                *count.entry((u, v)).or_default() += 1;
            }
        }
        count
            .iter()
            .filter(|(&(u, v), &n)| n != 1 || count.get(&(v, u)).copied() != Some(1))
            .count()
    }

    pub fn is_watertight(&self) -> bool {
        !self.triangles.is_empty() && self.unmatched_edges() == 0
    }

    pub fn aabb(&self) -> Option<Aabb<T>> {
        let first = *self.vertices.first()?;
        let (mut min, mut max) = (first, first);
        for p in &self.vertices {
            for i in 0..3 {
                if p[i] < min[i] {
                    min[i] = p[i];
                }
                if p[i] > max[i] {
                    max[i] = p[i];
                }
            }
        }
        Some(Aabb { min, max })
    }

    pub fn transformed(&self, tf: &RigidTransform<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|p| tf.apply(p)).collect(),
            triangles: self.triangles.clone(),
            scalars: self.scalars.clone(),
        }
    }

    /// Uniform scaling about the origin.
    pub fn scaled(&self, s: T) -> Self {
        Self {
            vertices: self.vertices.iter().map(|p| Point3::from(p.coords * s)).collect(),
            triangles: self.triangles.clone(),
            scalars: self.scalars.clone(),
        }
    }

    /// Merges vertices closer than `tolerance`, drops triangles that
    /// collapse or are degenerate and unreferenced vertices.
    pub fn merged(&self, tolerance: T) -> Self {
        let cell = if tolerance > T::zero() { tolerance } else { lit(1e-12) };
        let key = |p: &Point3<T>| -> (i64, i64, i64) {
            let f = |x: T| to_f64((x / cell).floor()) as i64;
            (f(p.x), f(p.y), f(p.z))
        };
        let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        let mut reps: Vec<Point3<T>> = Vec::new();
        let mut remap = Vec::with_capacity(self.vertices.len());
        for p in &self.vertices {
            let (kx, ky, kz) = key(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(list) = grid.get(&(kx + dx, ky + dy, kz + dz)) {
                            for &r in list {
                                if (reps[r] - p).norm() <= tolerance {
                                    found = Some(r);
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
            let idx = found.unwrap_or_else(|| {
                reps.push(*p);
                grid.entry((kx, ky, kz)).or_default().push(reps.len() - 1);
                reps.len() - 1
            });
            remap.push(idx);
        }
        let triangles: Vec<[usize; 3]> = self
            .triangles
            .iter()
            .map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]])
            .filter(|&[a, b, c]| a != b && b != c && a != c)
            .collect();
        let merged = Self::from_parts(reps, triangles);
        let keep: Vec<[usize; 3]> = (0..merged.triangles.len())
            .filter(|&k| to_f64(merged.triangle_area(k)) > DEGENERATE_AREA)
            .map(|k| merged.triangles[k])
            .collect();
        Self::from_parts(merged.vertices, keep).compacted()
    }

    /// Drops vertices no triangle references, keeping their relative order.
    pub fn compacted(&self) -> Self {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut scalars = self.scalars.as_ref().map(|_| Vec::new());
        let mut triangles = Vec::with_capacity(self.triangles.len());
        for tri in &self.triangles {
            let mut out = [0; 3];
            for (o, &i) in out.iter_mut().zip(tri) {
                if remap[i] == usize::MAX {
                    remap[i] = vertices.len();
                    vertices.push(self.vertices[i]);
                    if let (Some(dst), Some(src)) = (scalars.as_mut(), self.scalars.as_ref()) {
                        dst.push(src[i]);
                    }
                }
                *o = remap[i];
            }
            triangles.push(out);
        }
        Self {
            vertices,
            triangles,
            scalars,
        }
    }

    /// Axis-aligned closed box, outward-facing triangles.
    pub fn cuboid(min: Point3<T>, max: Point3<T>) -> Self {
        Self::subdivided_cuboid(min, max, 1)
    }

    /// Closed box whose faces are split into `n × n` quads (two triangles
    /// each); vertices are shared so the surface is watertight.
    pub fn subdivided_cuboid(min: Point3<T>, max: Point3<T>, n: usize) -> Self {
        let n = n.max(1);
        let mut vertices = Vec::new();
        let mut index: HashMap<(usize, usize, usize), usize> = HashMap::new();
        let mut vid = |i: usize, j: usize, k: usize, vertices: &mut Vec<Point3<T>>| -> usize {
            *index.entry((i, j, k)).or_insert_with(|| {
                let f = |a: T, b: T, t: usize| a + (b - a) * lit::<T>(t as f64 / n as f64);
                vertices.push(Point3::new(f(min.x, max.x, i), f(min.y, max.y, j), f(min.z, max.z, k)));
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::new();
        // Each face: fixed axis, fixed level (0 or n), and the two varying axes
        // ordered so (a × b) points outward.
        let faces: [(usize, usize, usize, usize); 6] = [
            (0, 0, 2, 1),
            (0, n, 1, 2),
            (1, 0, 0, 2),
            (1, n, 2, 0),
            (2, 0, 1, 0),
            (2, n, 0, 1),
        ];
        for (axis, level, a, b) in faces {
            for s in 0..n {
                for t in 0..n {
                    let mut corner = |ds: usize, dt: usize| {
                        let mut c = [0usize; 3];
                        c[axis] = level;
                        c[a] = s + ds;
                        c[b] = t + dt;
                        vid(c[0], c[1], c[2], &mut vertices)
                    };
                    let v00 = corner(0, 0);
                    let v10 = corner(1, 0);
                    let v11 = corner(1, 1);
                    let v01 = corner(0, 1);
                    triangles.push([v00, v10, v11]);
                    triangles.push([v00, v11, v01]);
                }
            }
        }
        Self::from_parts(vertices, triangles)
    }

    /// Closed UV sphere with outward orientation.
    pub fn uv_sphere(center: Point3<T>, radius: T, stacks: usize, slices: usize) -> Self {
        let stacks = stacks.max(2);
        let slices = slices.max(3);
        let mut vertices = vec![center + Vec3::z() * radius];
        for i in 1..stacks {
            let phi = T::pi() * lit::<T>(i as f64 / stacks as f64);
            for j in 0..slices {
                let theta = T::two_pi() * lit::<T>(j as f64 / slices as f64);
                vertices.push(center + Vec3::new(phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()) * radius);
            }
        }
        vertices.push(center - Vec3::z() * radius);
        let south = vertices.len() - 1;
        let ring = |i: usize, j: usize| 1 + (i - 1) * slices + (j % slices);
        let mut triangles = Vec::new();
        for j in 0..slices {
            triangles.push([0, ring(1, j), ring(1, j + 1)]);
            triangles.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
        }
        for i in 1..stacks - 1 {
            for j in 0..slices {
                let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        Self::from_parts(vertices, triangles)
    }
}
