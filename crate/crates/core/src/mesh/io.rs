//! OFF and OBJ mesh I/O (ASCII).
//!
//! Positions are written with Rust's shortest round-trip decimal formatting,
//! which always carries enough digits to reproduce the exact f64. Vertex
//! order is the stable identity across a path sequence; readers never
//! reorder.
//!
//! A stand-alone mesh file carries only positions. When such a file is
//! loaded as an immersion without an explicit reference mesh, the reference
//! points are the positions radially projected to the unit sphere.

use crate::error::{Error, Result};
use crate::geom::{v3, Vec3};
use crate::mesh::{Immersion, TriangulatedSphere};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<MeshFormat> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("off") => Ok(MeshFormat::Off),
            Some("obj") => Ok(MeshFormat::Obj),
            other => Err(Error::Parameter(format!(
                "unknown mesh extension {other:?}; expected .off or .obj"
            ))),
        }
    }
}

pub fn format_mesh(positions: &[Vec3], faces: &[[u32; 3]], format: MeshFormat) -> String {
    let mut s = String::new();
    match format {
        MeshFormat::Off => {
            let ne = faces.len() * 3 / 2;
            writeln!(s, "OFF").unwrap();
            writeln!(s, "{} {} {}", positions.len(), faces.len(), ne).unwrap();
            for p in positions {
                writeln!(s, "{} {} {}", p.x, p.y, p.z).unwrap();
            }
            for f in faces {
                writeln!(s, "3 {} {} {}", f[0], f[1], f[2]).unwrap();
            }
        }
        MeshFormat::Obj => {
            for p in positions {
                writeln!(s, "v {} {} {}", p.x, p.y, p.z).unwrap();
            }
            for f in faces {
                writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
            }
        }
    }
    s
}

pub fn parse_mesh(text: &str, format: MeshFormat) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    match format {
        MeshFormat::Off => parse_off(text),
        MeshFormat::Obj => parse_obj(text),
    }
}

fn parse_f64(tok: &str, what: &str) -> Result<f64> {
    tok.parse()
        .map_err(|_| Error::Io(format!("bad {what} value: {tok:?}")))
}

fn parse_off(text: &str) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let mut lines = text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Io("empty OFF".into()))?;
    if header != "OFF" {
        return Err(Error::Io(format!("expected OFF header, got {header:?}")));
    }
    let counts = lines
        .next()
        .ok_or_else(|| Error::Io("missing OFF counts".into()))?;
    let mut it = counts.split_whitespace();
    let nv: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Io("bad OFF vertex count".into()))?;
    let nf: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Io("bad OFF face count".into()))?;
    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let line = lines
            .next()
            .ok_or_else(|| Error::Io("OFF truncated in vertex block".into()))?;
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() < 3 {
            return Err(Error::Io(format!("bad OFF vertex line: {line:?}")));
        }
        positions.push(v3(
            parse_f64(t[0], "x")?,
            parse_f64(t[1], "y")?,
            parse_f64(t[2], "z")?,
        ));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let line = lines
            .next()
            .ok_or_else(|| Error::Io("OFF truncated in face block".into()))?;
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 4 || t[0] != "3" {
            return Err(Error::Io(format!("expected triangle face line: {line:?}")));
        }
        let idx = |s: &str| -> Result<u32> {
            s.parse()
                .map_err(|_| Error::Io(format!("bad face index {s:?}")))
        };
        faces.push([idx(t[1])?, idx(t[2])?, idx(t[3])?]);
    }
    Ok((positions, faces))
}

fn parse_obj(text: &str) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let t: Vec<&str> = it.collect();
                if t.len() < 3 {
                    return Err(Error::Io(format!("bad OBJ vertex line: {line:?}")));
                }
                positions.push(v3(
                    parse_f64(t[0], "x")?,
                    parse_f64(t[1], "y")?,
                    parse_f64(t[2], "z")?,
                ));
            }
            Some("f") => {
                let mut idx = [0u32; 3];
                let t: Vec<&str> = it.collect();
                if t.len() != 3 {
                    return Err(Error::Io(format!("expected triangle face: {line:?}")));
                }
                for (k, tok) in t.iter().enumerate() {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| Error::Io(format!("bad face index {tok:?}")))?;
                    if i < 1 {
                        return Err(Error::Io(format!("face index {i} out of range")));
                    }
                    idx[k] = (i - 1) as u32;
                }
                faces.push(idx);
            }
            _ => {}
        }
    }
    if positions.is_empty() || faces.is_empty() {
        return Err(Error::Io("OBJ carries no triangle mesh".into()));
    }
    Ok((positions, faces))
}

pub fn write_mesh_file(path: &Path, positions: &[Vec3], faces: &[[u32; 3]]) -> Result<()> {
    let format = MeshFormat::from_path(path)?;
    std::fs::write(path, format_mesh(positions, faces, format))
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_mesh_file(path: &Path) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let format = MeshFormat::from_path(path)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_mesh(&text, format)
}

/// Loads a mesh file as a reference sphere: positions must already be unit.
pub fn read_reference_sphere(path: &Path) -> Result<Arc<TriangulatedSphere>> {
    let (positions, faces) = read_mesh_file(path)?;
    Ok(Arc::new(TriangulatedSphere::new(positions, faces, None)?))
}

/// Loads a mesh file as an immersion. With `reference: None` the reference
/// points are the normalized positions.
pub fn read_immersion(path: &Path, reference: Option<Arc<TriangulatedSphere>>) -> Result<Immersion> {
    let (positions, faces) = read_mesh_file(path)?;
    match reference {
        Some(mesh) => {
            if mesh.faces() != faces.as_slice() {
                return Err(Error::Parameter(format!(
                    "{}: combinatorics differ from the reference mesh",
                    path.display()
                )));
            }
            Immersion::new(mesh, positions)
        }
        None => {
            let refpts: Vec<Vec3> = positions
                .iter()
                .map(|p| {
                    p.try_normalized(1e-300).ok_or_else(|| {
                        Error::Geometry("position at the origin cannot be projected".into())
                    })
                })
                .collect::<Result<_>>()?;
            let mesh = Arc::new(TriangulatedSphere::new(refpts, faces, None)?);
            Immersion::new(mesh, positions)
        }
    }
}

pub fn write_immersion(path: &Path, im: &Immersion) -> Result<()> {
    write_mesh_file(path, im.positions(), im.mesh.faces())
}
