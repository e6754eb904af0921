//! Single-plane slab cut of a triangle mesh with saw kerf.
//!
//! The mesh is clipped against the two kerf faces `offset ± kerf/2`; every
//! opening is closed with a planar cap triangulated by ear clipping, so the
//! pieces of a watertight input are watertight as well.

use std::collections::HashMap;

use super::{Plane, Point3, TriangleMesh, Vec3};
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, tol, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutOptions<T: Scalar> {
    /// Blade thickness (mm).
    pub kerf: T,
    /// Also produce the kerf slab and require a watertight input.
    pub volume_accounting: bool,
}

impl<T: Scalar> CutOptions<T> {
    pub fn kerf(kerf: T) -> Self {
        Self {
            kerf,
            volume_accounting: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshCut<T: Scalar> {
    /// Material on the normal side of `offset + kerf/2`.
    pub kept: TriangleMesh<T>,
    /// Material on the far side of `offset − kerf/2`.
    pub removed: TriangleMesh<T>,
    /// Material consumed by the blade (volume accounting only).
    pub slab: Option<TriangleMesh<T>>,
    /// Cap of `kept` on the cut face.
    pub cut_face: TriangleMesh<T>,
    /// Vertices of the cut face (intersection-curve vertices, kept side).
    pub cut_face_points: Vec<Point3<T>>,
}

pub fn cut_mesh_by_plane<T: Scalar>(
    mesh: &TriangleMesh<T>,
    plane: &Plane<T>,
    options: CutOptions<T>,
) -> Result<MeshCut<T>> {
    if options.kerf < T::zero() {
        return Err(Error::InvalidParameter(format!(
            "kerf must be non-negative, got {}",
            options.kerf
        )));
    }
    if options.volume_accounting && !mesh.is_watertight() {
        return Err(Error::NotWatertight(mesh.unmatched_edges()));
    }
    let half = options.kerf * lit(0.5);
    let upper = plane.translated(half);
    let lower = plane.translated(-half);

    let kept = clip_closed(mesh, &upper, true);
    let removed = clip_closed(mesh, &lower, false);
    let slab = if options.volume_accounting {
        if options.kerf > T::zero() {
            let above_lower = clip_closed(mesh, &lower, true).closed;
            Some(clip_closed(&above_lower, &upper, false).closed)
        } else {
            Some(TriangleMesh::empty())
        }
    } else {
        None
    };
    let cut_face_points = kept.cap.vertices().to_vec();
    Ok(MeshCut {
        kept: kept.closed,
        removed: removed.closed,
        slab,
        cut_face: kept.cap,
        cut_face_points,
    })
}

struct Clipped<T: Scalar> {
    closed: TriangleMesh<T>,
    cap: TriangleMesh<T>,
}

/// Keeps the part of `mesh` on the positive (`keep_positive`) or negative
/// side of `plane` and caps the opening.
fn clip_closed<T: Scalar>(mesh: &TriangleMesh<T>, plane: &Plane<T>, keep_positive: bool) -> Clipped<T> {
    let sign = if keep_positive { T::one() } else { -T::one() };
    let eps = tol::<T>(1e-9);
    let n = plane.normal.into_inner();
    let src = mesh.vertices();

    let side: Vec<T> = src
        .iter()
        .map(|p| {
            let s = plane.signed_distance(p) * sign;
            if s.abs() <= eps {
                T::zero()
            } else {
                s
            }
        })
        .collect();

    let mut vertices: Vec<Point3<T>> = Vec::new();
    let mut on_plane: Vec<bool> = Vec::new();
    let mut from_src: Vec<Option<usize>> = vec![None; src.len()];
    let mut from_edge: HashMap<(usize, usize), usize> = HashMap::new();

    let mut src_vertex = |i: usize, vertices: &mut Vec<Point3<T>>, on_plane: &mut Vec<bool>| -> usize {
        *from_src[i].get_or_insert_with(|| {
            let p = if side[i] == T::zero() {
                plane.project(&src[i])
            } else {
                src[i]
            };
            vertices.push(p);
            on_plane.push(side[i] == T::zero());
            vertices.len() - 1
        })
    };

    let mut triangles: Vec<[usize; 3]> = Vec::new();
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let s = tri.map(|i| side[i]);
        if s.iter().all(|&x| x == T::zero()) {
            // Face lying in the cut plane: it belongs to this side when its
            // outward normal points away from the kept material.
            if mesh.triangle_cross(k).dot(&n) * sign < T::zero() {
                let t = tri.map(|i| src_vertex(i, &mut vertices, &mut on_plane));
                triangles.push(t);
            }
            continue;
        }
        if s.iter().all(|&x| x >= T::zero()) {
            let t = tri.map(|i| src_vertex(i, &mut vertices, &mut on_plane));
            triangles.push(t);
            continue;
        }
        if s.iter().all(|&x| x <= T::zero()) {
            continue;
        }
        let mut poly: Vec<usize> = Vec::with_capacity(4);
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            let (sa, sb) = (side[a], side[b]);
            if sa >= T::zero() {
                poly.push(src_vertex(a, &mut vertices, &mut on_plane));
            }
            if (sa > T::zero() && sb < T::zero()) || (sa < T::zero() && sb > T::zero()) {
                let key = (a.min(b), a.max(b));
                let idx = *from_edge.entry(key).or_insert_with(|| {
                    let (p, q) = (src[key.0], src[key.1]);
                    let (sp, sq) = (side[key.0], side[key.1]);
                    let x = p + (q - p) * (sp / (sp - sq));
                    vertices.push(plane.project(&x));
                    on_plane.push(true);
                    vertices.len() - 1
                });
                poly.push(idx);
            }
        }
        for w in 1..poly.len().saturating_sub(1) {
            let t = [poly[0], poly[w], poly[w + 1]];
            if t[0] != t[1] && t[1] != t[2] && t[0] != t[2] {
                triangles.push(t);
            }
        }
    }

    let cap_triangles = cap_openings(&vertices, &on_plane, &triangles, plane, sign);
    let cap = TriangleMesh::from_parts(vertices.clone(), cap_triangles.clone()).compacted();
    triangles.extend(cap_triangles);
    Clipped {
        closed: TriangleMesh::from_parts(vertices, triangles).compacted(),
        cap,
    }
}

/// Triangulates the planar openings left by clipping. Cap triangles face
/// `-sign · n`, out of the kept material.
fn cap_openings<T: Scalar>(
    vertices: &[Point3<T>],
    on_plane: &[bool],
    triangles: &[[usize; 3]],
    plane: &Plane<T>,
    sign: T,
) -> Vec<[usize; 3]> {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for &[a, b, c] in triangles {
        for e in [(a, b), (b, c), (c, a)] {
            *directed.entry(e).or_default() += 1;
        }
    }
    // Cap half-edges run opposite to the unmatched boundary half-edges.
    let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut boundary: Vec<(usize, usize)> = directed
        .keys()
        .filter(|&&(u, v)| on_plane[u] && on_plane[v] && !directed.contains_key(&(v, u)))
        .map(|&(u, v)| (v, u))
        .collect();
    boundary.sort_unstable();
    for &(a, b) in &boundary {
        next.entry(a).or_default().push(b);
    }

    let mut loops: Vec<Vec<usize>> = Vec::new();
    for &(start, _) in &boundary {
        while next.get(&start).is_some_and(|v| !v.is_empty()) {
            let mut lp = vec![start];
            let mut cur = start;
            while let Some(nx) = next.get_mut(&cur).and_then(|v| v.pop()) {
                if nx == start {
                    break;
                }
                lp.push(nx);
                cur = nx;
                if lp.len() > boundary.len() {
                    break;
                }
            }
            if lp.len() >= 3 {
                loops.push(lp);
            }
        }
    }
    if loops.is_empty() {
        return Vec::new();
    }

    // 2-D basis with (u, v, cap normal) right-handed.
    let cap_normal = plane.normal.into_inner() * (-sign);
    let (u, v) = super::orthonormal_basis(&nalgebra::Unit::new_unchecked(cap_normal));
    let to2 = |i: usize| -> [f64; 2] {
        let p = vertices[i].coords;
        [to_f64(p.dot(&u)), to_f64(p.dot(&v))]
    };
    let area = |lp: &[usize]| -> f64 {
        let pts: Vec<[f64; 2]> = lp.iter().map(|&i| to2(i)).collect();
        (0..pts.len())
            .map(|k| {
                let (a, b) = (pts[k], pts[(k + 1) % pts.len()]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            * 0.5
    };
    let areas: Vec<f64> = loops.iter().map(|l| area(l)).collect();
    let outers: Vec<usize> = (0..loops.len()).filter(|&k| areas[k] > 0.0).collect();
    let mut holes_of: HashMap<usize, Vec<usize>> = HashMap::new();
    for k in (0..loops.len()).filter(|&k| areas[k] <= 0.0) {
        let probe = to2(loops[k][0]);
        let owner = outers
            .iter()
            .copied()
            .filter(|&o| point_in_polygon(probe, &loops[o].iter().map(|&i| to2(i)).collect::<Vec<_>>()))
            .min_by(|&a, &b| areas[a].total_cmp(&areas[b]));
        if let Some(o) = owner {
            holes_of.entry(o).or_default().push(k);
        }
    }

    let mut out = Vec::new();
    for &o in &outers {
        // Straight-run vertices go around ear clipping and are spliced back
        // into the triangle edges afterwards.
        let mut ids: Vec<usize> = Vec::new();
        let mut dropped: Vec<usize> = Vec::new();
        let mut hole_starts = Vec::new();
        let members = std::iter::once(o).chain(holes_of.get(&o).into_iter().flatten().copied());
        for (n, l) in members.enumerate() {
            if n > 0 {
                hole_starts.push(ids.len());
            }
            let (corners, straight) = split_straight(&loops[l], &to2);
            ids.extend(corners);
            dropped.extend(straight);
        }
        let flat: Vec<f64> = ids.iter().flat_map(|&i| to2(i)).collect();
        let Ok(tris) = earcutr::earcut(&flat, &hole_starts, 2) else {
            continue;
        };
        let mut local: Vec<[usize; 3]> = tris.chunks_exact(3).map(|t| [t[0], t[1], t[2]]).collect();
        let first_dropped = ids.len();
        ids.extend(&dropped);
        let pts: Vec<[f64; 2]> = ids.iter().map(|&i| to2(i)).collect();
        restore_collinear(&pts, first_dropped, &mut local);
        // Orient the whole patch at once: single near-degenerate ears carry
        // no reliable sign of their own.
        let signed: T = local
            .iter()
            .map(|t| {
                let (a, b, c) = (vertices[ids[t[0]]], vertices[ids[t[1]]], vertices[ids[t[2]]]);
                let cross: Vec3<T> = (b - a).cross(&(c - a));
                cross.dot(&cap_normal)
            })
            .fold(T::zero(), |acc, x| acc + x);
        let flip = signed < T::zero();
        for t in local {
            let mut tri = [ids[t[0]], ids[t[1]], ids[t[2]]];
            if flip {
                tri.swap(1, 2);
            }
            if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
                out.push(tri);
            }
        }
    }
    out
}

/// Splits a loop into its corner vertices and the vertices lying on a
/// straight run between two corners.
fn split_straight(lp: &[usize], to2: &impl Fn(usize) -> [f64; 2]) -> (Vec<usize>, Vec<usize>) {
    let n = lp.len();
    let pts: Vec<[f64; 2]> = lp.iter().map(|&i| to2(i)).collect();
    let straight = |prev: [f64; 2], cur: [f64; 2], next: [f64; 2]| {
        let a = [cur[0] - prev[0], cur[1] - prev[1]];
        let b = [next[0] - cur[0], next[1] - cur[1]];
        let cross = a[0] * b[1] - a[1] * b[0];
        let dot = a[0] * b[0] + a[1] * b[1];
        let scale = (a[0].hypot(a[1])) * (b[0].hypot(b[1]));
        dot > 0.0 && cross.abs() <= 1e-9 * scale
    };
    let mut keep = vec![true; n];
    // Start from a genuine corner so the pass can follow the last kept vertex.
    let Some(start) = (0..n).find(|&i| !straight(pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n])) else {
        return (lp.to_vec(), Vec::new());
    };
    let mut prev = start;
    for step in 1..n {
        let i = (start + step) % n;
        let next = (i + 1) % n;
        if straight(pts[prev], pts[i], pts[next]) {
            keep[i] = false;
        } else {
            prev = i;
        }
    }
    if keep.iter().filter(|&&k| k).count() < 3 {
        return (lp.to_vec(), Vec::new());
    }
    let (mut corners, mut straight_ids) = (Vec::new(), Vec::new());
    for (k, &i) in lp.iter().enumerate() {
        if keep[k] {
            corners.push(i);
        } else {
            straight_ids.push(i);
        }
    }
    (corners, straight_ids)
}

/// Splices each point from `first_dropped` on into the triangle edge it lies
/// on, keeping the cap conforming with the clipped surface.
fn restore_collinear(pts: &[[f64; 2]], first_dropped: usize, tris: &mut Vec<[usize; 3]>) {
    for m in first_dropped..pts.len() {
        let p = pts[m];
        let mut best: Option<(f64, usize, usize)> = None;
        for (k, t) in tris.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (pts[t[e]], pts[t[(e + 1) % 3]]);
                let d = [b[0] - a[0], b[1] - a[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                if len2 == 0.0 {
                    continue;
                }
                let s = ((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2;
                if s <= 0.0 || s >= 1.0 {
                    continue;
                }
                let off = ((p[0] - a[0]) * d[1] - (p[1] - a[1]) * d[0]).abs() / len2.sqrt();
                if best.is_none_or(|(o, _, _)| off < o) {
                    best = Some((off, k, e));
                }
            }
        }
        if let Some((_, k, e)) = best {
            let t = tris[k];
            let (a, b, c) = (t[e], t[(e + 1) % 3], t[(e + 2) % 3]);
            tris[k] = [a, m, c];
            tris.push([m, b, c]);
        }
    }
}

fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}
