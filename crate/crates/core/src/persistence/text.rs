use std::fmt::{Display, Write as _};
use std::fs;
use std::path::Path;

use super::atomic_write;
use crate::scene::{Point, PointCloud, TriangleMesh, View, ViewSet, ViewSetKind};
use crate::{Error, Result};

/// Ordered flat `key=value` file; `#` starts a comment line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Manifest {
        Manifest::default()
    }

    /// Adds or replaces `key`.
    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let mut m = Manifest::new();
        let mut offset = 0u64;
        for line in text.split_inclusive('\n') {
            let at = offset;
            offset += line.len() as u64;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::format(at, format!("expected key=value, got {line:?}")));
            };
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::format(at, "empty key"));
            }
            if m.get(k).is_some() {
                return Err(Error::format(at, format!("duplicate key {k:?}")));
            }
            m.entries.push((k.to_string(), v.trim().to_string()));
        }
        Ok(m)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.render().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        Manifest::parse(&fs::read_to_string(path)?)
    }
}

const VIEWS_HEADER: &str = "id,x,y,z,alpha,beta,gamma";

/// CSV with header `id,x,y,z,alpha,beta,gamma`; reals use the shortest
/// representation that parses back to the same value.
pub fn write_views(path: &Path, views: &ViewSet) -> Result<()> {
    let mut s = String::from(VIEWS_HEADER);
    s.push('\n');
    for v in views.iter() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            v.id, v.position.x, v.position.y, v.position.z, v.alpha, v.beta, v.gamma
        );
    }
    atomic_write(path, s.as_bytes())
}

pub fn read_views(path: &Path, kind: ViewSetKind) -> Result<ViewSet> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.split_inclusive('\n');
    if lines.next().map(str::trim) != Some(VIEWS_HEADER) {
        return Err(Error::format(0, format!("expected header {VIEWS_HEADER:?}")));
    }
    let mut offset = text.find('\n').map_or(text.len(), |i| i + 1) as u64;
    let mut views = Vec::new();
    for line in lines {
        let at = offset;
        offset += line.len() as u64;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::format(at, format!("expected 7 fields, got {}", f.len())));
        }
        let id = f[0].parse::<usize>().map_err(|e| Error::format(at, format!("bad id {:?}: {e}", f[0])))?;
        let mut r = [0.0; 6];
        for (i, x) in r.iter_mut().enumerate() {
            *x = f[i + 1].parse::<f64>().map_err(|e| Error::format(at, format!("bad number {:?}: {e}", f[i + 1])))?;
        }
        views.push(View { id, position: Point::new(r[0], r[1], r[2]), alpha: r[3], beta: r[4], gamma: r[5] });
    }
    let radius =
        views.first().map(View::distance_to_origin).ok_or_else(|| Error::format(offset, "view file holds no views"))?;
    ViewSet::new(views, radius, kind)
}

/// One `x y z` line per point.
pub fn write_xyz(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut s = String::with_capacity(cloud.len() * 48);
    for p in cloud.iter() {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    atomic_write(path, s.as_bytes())
}

fn parse_triple(line: &str, at: u64) -> Result<[f64; 3]> {
    let v: Vec<f64> = line
        .split_whitespace()
        .take(3)
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format(at, format!("bad number in {line:?}: {e}")))?;
    if v.len() != 3 {
        return Err(Error::format(at, format!("expected three values, got {line:?}")));
    }
    Ok([v[0], v[1], v[2]])
}

pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    let mut points = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let at = offset;
        offset += line.len() as u64;
        if line.trim().is_empty() {
            continue;
        }
        let [x, y, z] = parse_triple(line, at)?;
        points.push(Point::new(x, y, z));
    }
    PointCloud::new(points).map_err(|e| Error::format(0, e.to_string()))
}

/// ASCII PLY with `vertex` (x, y, z) and `face` (vertex_indices) elements.
pub fn write_ply(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let mut s = String::new();
    let _ = write!(
        s,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices().len(),
        mesh.triangles().len()
    );
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    atomic_write(path, s.as_bytes())
}

/// Reads the ASCII PLY subset; polygons are fan-triangulated and vertex
/// properties after x, y, z are ignored.
pub fn read_ply(path: &Path) -> Result<TriangleMesh> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.split_inclusive('\n').scan(0u64, |off, l| {
        let at = *off;
        *off += l.len() as u64;
        Some((at, l.trim()))
    });
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| Error::format(text.len() as u64, format!("unexpected end of file in {what}")))
    };
    let (at, first) = next("header")?;
    if first != "ply" {
        return Err(Error::format(at, "missing \"ply\" magic"));
    }
    let (mut n_vert, mut n_face) = (None, None);
    let mut vertex_props = Vec::new();
    let mut current = "";
    loop {
        let (at, l) = next("header")?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] | ["comment", ..] | ["obj_info", ..] | [] => {}
            ["format", f, ..] => return Err(Error::format(at, format!("unsupported PLY format {f}"))),
            ["element", name, count] => {
                let c: usize = count.parse().map_err(|_| Error::format(at, format!("bad element count {count:?}")))?;
                current = if *name == "vertex" {
                    n_vert = Some(c);
                    "vertex"
                } else if *name == "face" {
                    n_face = Some(c);
                    "face"
                } else {
                    return Err(Error::format(at, format!("unsupported element {name}")));
                };
            }
            ["property", "list", _, _, name] if current == "face" && *name == "vertex_indices" => {}
            ["property", _, name] if current == "vertex" => vertex_props.push(name.to_string()),
            _ => return Err(Error::format(at, format!("unsupported header line {l:?}"))),
        }
    }
    if vertex_props.len() < 3 || vertex_props[..3] != ["x", "y", "z"] {
        return Err(Error::format(0, "vertex properties must start with x, y, z"));
    }
    let (n_vert, n_face) = (n_vert.unwrap_or(0), n_face.unwrap_or(0));
    let mut vertices = Vec::with_capacity(n_vert);
    for _ in 0..n_vert {
        let (at, l) = next("vertex list")?;
        let [x, y, z] = parse_triple(l, at)?;
        vertices.push(Point::new(x, y, z));
    }
    let mut triangles = Vec::with_capacity(n_face);
    for _ in 0..n_face {
        let (at, l) = next("face list")?;
        let v: Vec<u32> = l
            .split_whitespace()
            .map(|t| t.parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(at, format!("bad face {l:?}: {e}")))?;
        let Some((&n, idx)) = v.split_first() else {
            return Err(Error::format(at, "empty face line"));
        };
        if n < 3 || idx.len() != n as usize {
            return Err(Error::format(at, format!("face declares {n} indices, holds {}", idx.len())));
        }
        for i in 1..idx.len() - 1 {
            triangles.push([idx[0], idx[i], idx[i + 1]]);
        }
    }
    TriangleMesh::new(vertices, triangles).map_err(|e| Error::format(0, e.to_string()))
}
