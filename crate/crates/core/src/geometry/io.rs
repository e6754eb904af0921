//! STL (binary and ASCII) and PLY (ASCII 1.0) mesh files.
//!
//! Coordinates are always read as millimeters; unit metadata in files is
//! ignored. PLY export writes `x y z` as doubles and, when the mesh carries
//! a scalar channel, an extra `float dist_mm` vertex property.

use std::fs::File;
use std::io::{BufReader, Cursor, Read, Seek, Write};
use std::path::Path;

use ply_rs::parser::Parser;
use ply_rs::ply::{
    Addable, DefaultElement, ElementDef, Encoding, Ply, Property, PropertyDef, PropertyType, ScalarType,
};
use ply_rs::writer::Writer;

use super::{Point3, TriangleMesh};
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Stl,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "stl" => Some(Self::Stl),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

/// Loads an STL or PLY mesh; the format is taken from the extension and
/// falls back to sniffing the `ply` magic.
pub fn load_mesh<T: Scalar>(path: impl AsRef<Path>) -> Result<TriangleMesh<T>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let format = MeshFormat::from_path(path).unwrap_or(if bytes.starts_with(b"ply") {
        MeshFormat::Ply
    } else {
        MeshFormat::Stl
    });
    match format {
        MeshFormat::Stl => read_stl(&mut Cursor::new(bytes)),
        MeshFormat::Ply => read_ply(&mut Cursor::new(bytes)),
    }
}

pub fn read_stl<T: Scalar, R: Read + Seek>(reader: &mut R) -> Result<TriangleMesh<T>> {
    let indexed = stl_io::read_stl(reader).map_err(|e| Error::Malformed(format!("STL: {e}")))?;
    let vertices = indexed
        .vertices
        .iter()
        .map(|v| Point3::new(lit(v[0] as f64), lit(v[1] as f64), lit(v[2] as f64)))
        .collect();
    let triangles = indexed.faces.iter().map(|f| f.vertices).collect();
    TriangleMesh::from_soup(vertices, triangles)
}

pub fn read_ply<T: Scalar, R: Read>(reader: &mut R) -> Result<TriangleMesh<T>> {
    let parser = Parser::<DefaultElement>::new();
    let ply = parser
        .read_ply(&mut BufReader::new(reader))
        .map_err(|e| Error::Malformed(format!("PLY: {e}")))?;
    let vertex_elems = ply
        .payload
        .get("vertex")
        .ok_or_else(|| Error::Malformed("PLY has no vertex element".into()))?;
    let mut vertices = Vec::with_capacity(vertex_elems.len());
    for (i, e) in vertex_elems.iter().enumerate() {
        let coord = |k: &str| {
            e.get(k)
                .and_then(scalar_value)
                .ok_or_else(|| Error::Malformed(format!("PLY vertex {i} lacks numeric {k}")))
        };
        vertices.push(Point3::new(lit(coord("x")?), lit(coord("y")?), lit(coord("z")?)));
    }
    let faces = ply.payload.get("face").map(Vec::as_slice).unwrap_or(&[]);
    let mut triangles = Vec::with_capacity(faces.len());
    for (k, f) in faces.iter().enumerate() {
        let list = f
            .get("vertex_indices")
            .or_else(|| f.get("vertex_index"))
            .and_then(list_value)
            .ok_or_else(|| Error::Malformed(format!("PLY face {k} lacks vertex_indices")))?;
        if list.len() < 3 {
            return Err(Error::Malformed(format!("PLY face {k} has {} indices", list.len())));
        }
        let idx: Vec<usize> = list
            .iter()
            .map(|&i| {
                usize::try_from(i)
                    .ok()
                    .filter(|&u| u < vertices.len())
                    .ok_or_else(|| Error::Malformed(format!("PLY face {k} index {i} out of range")))
            })
            .collect::<Result<_>>()?;
        for w in 1..idx.len() - 1 {
            triangles.push([idx[0], idx[w], idx[w + 1]]);
        }
    }
    TriangleMesh::from_soup(vertices, triangles)
}

fn scalar_value(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

fn list_value(p: &Property) -> Option<Vec<i64>> {
    Some(match p {
        Property::ListChar(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUChar(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListShort(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUShort(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListInt(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUInt(v) => v.iter().map(|&x| x as i64).collect(),
        _ => return None,
    })
}

/// ASCII PLY 1.0. Vertex coordinates are doubles; a scalar channel, if
/// present, is written as `float dist_mm`.
pub fn write_ply<T: Scalar, W: Write>(mesh: &TriangleMesh<T>, out: &mut W) -> Result<()> {
    let mut ply = Ply::<DefaultElement>::new();
    ply.header.encoding = Encoding::Ascii;

    let mut vertex_def = ElementDef::new("vertex".to_string());
    for k in ["x", "y", "z"] {
        vertex_def.properties.add(PropertyDef::new(
            k.to_string(),
            PropertyType::Scalar(ScalarType::Double),
        ));
    }
    if mesh.scalars().is_some() {
        vertex_def.properties.add(PropertyDef::new(
            "dist_mm".to_string(),
            PropertyType::Scalar(ScalarType::Float),
        ));
    }
    ply.header.elements.add(vertex_def);
    let mut face_def = ElementDef::new("face".to_string());
    face_def.properties.add(PropertyDef::new(
        "vertex_indices".to_string(),
        PropertyType::List(ScalarType::UChar, ScalarType::Int),
    ));
    ply.header.elements.add(face_def);

    let vertices = mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut e = DefaultElement::new();
            e.insert("x".into(), Property::Double(to_f64(p.x)));
            e.insert("y".into(), Property::Double(to_f64(p.y)));
            e.insert("z".into(), Property::Double(to_f64(p.z)));
            if let Some(s) = mesh.scalars() {
                e.insert("dist_mm".into(), Property::Float(to_f64(s[i]) as f32));
            }
            e
        })
        .collect();
    let faces = mesh
        .triangles()
        .iter()
        .map(|t| {
            let mut e = DefaultElement::new();
            e.insert(
                "vertex_indices".into(),
                Property::ListInt(t.iter().map(|&i| i as i32).collect()),
            );
            e
        })
        .collect();
    ply.payload.insert("vertex".into(), vertices);
    ply.payload.insert("face".into(), faces);

    Writer::<DefaultElement>::new()
        .write_ply(out, &mut ply)
        .map_err(|e| Error::Malformed(format!("PLY write: {e}")))?;
    Ok(())
}

/// Binary little-endian STL (80-byte header, 50-byte records).
pub fn write_stl<T: Scalar, W: Write>(mesh: &TriangleMesh<T>, out: &mut W) -> Result<()> {
    let f = |x: T| to_f64(x) as f32;
    let triangles: Vec<stl_io::Triangle> = (0..mesh.triangles().len())
        .map(|k| {
            let c = mesh.corners(k);
            let n = mesh.triangle_cross(k).normalize();
            stl_io::Triangle {
                normal: stl_io::Normal::new([f(n.x), f(n.y), f(n.z)]),
                vertices: c.map(|p| stl_io::Vertex::new([f(p.x), f(p.y), f(p.z)])),
            }
        })
        .collect();
    stl_io::write_stl(out, triangles.iter()).map_err(|e| Error::Malformed(format!("STL write: {e}")))
}

pub fn ply_bytes<T: Scalar>(mesh: &TriangleMesh<T>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_ply(mesh, &mut buf)?;
    Ok(buf)
}

pub fn stl_bytes<T: Scalar>(mesh: &TriangleMesh<T>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_stl(mesh, &mut buf)?;
    Ok(buf)
}
