//! Per-vertex distance fields between resected and planned planes.

use crate::error::Result;
use crate::geometry::{Plane, TriangleMesh};
use crate::scalar::{lit, Scalar};

/// What the field is measured on.
#[derive(Debug, Clone, Copy)]
pub enum HeatmapSource<'a, T: Scalar> {
    /// Actual resected surface: each vertex's own signed distance.
    CutFace(&'a TriangleMesh<T>),
    /// A resected plane, sampled at the vertices of `mesh` projected onto
    /// the planned plane and walked along the planned normal.
    Plane {
        resected: &'a Plane<T>,
        mesh: &'a TriangleMesh<T>,
    },
}

/// Signed distance (mm) along the planned normal from the planned plane to
/// the resected surface, attached as the mesh's scalar channel.
pub fn heatmap_field<T: Scalar>(source: HeatmapSource<'_, T>, planned: &Plane<T>) -> Result<TriangleMesh<T>> {
    let (mesh, values): (&TriangleMesh<T>, Vec<T>) = match source {
        HeatmapSource::CutFace(mesh) => (
            mesh,
            mesh.vertices().iter().map(|p| planned.signed_distance(p)).collect(),
        ),
        HeatmapSource::Plane { resected, mesh } => {
            let denom = resected.normal.dot(&planned.normal);
            let values = mesh
                .vertices()
                .iter()
                .map(|v| {
                    let p = planned.project(v);
                    if denom.abs() <= lit(1e-12) {
                        T::zero()
                    } else {
                        -resected.signed_distance(&p) / denom
                    }
                })
                .collect();
            (mesh, values)
        }
    };
    mesh.clone().with_scalars(values)
}
