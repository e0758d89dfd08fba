//! ASCII mesh and point-cloud formats. Meshes load from OFF or PLY; clouds
//! load from XYZ or PLY and save as XYZ (six decimals) or PLY with optional
//! per-point `uchar` flag properties.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Point3, PointCloud, TriangleMesh};
use crate::error::{Error, Result};

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Whitespace tokens of non-empty, non-comment lines, with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then(|| (i + 1, l.split_whitespace().collect()))
    })
}

fn num<T: std::str::FromStr>(path: &Path, line: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| parse_err(path, format!("line {line}: bad number {tok:?}")))
}

/// Splits a polygon into a triangle fan.
fn fan(poly: &[usize], faces: &mut Vec<[usize; 3]>) {
    for i in 1..poly.len().saturating_sub(1) {
        faces.push([poly[0], poly[i], poly[i + 1]]);
    }
}

pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    let text = fs::read_to_string(path)?;
    let mesh = match extension(path).as_str() {
        "off" => parse_off(path, &text)?,
        "ply" => {
            let ply = parse_ply(path, &text)?;
            TriangleMesh::new(ply.vertices, ply.faces).map_err(|e| parse_err(path, e.to_string()))?
        }
        other => return Err(parse_err(path, format!("unsupported mesh extension {other:?}"))),
    };
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(mesh)
}

fn parse_off(path: &Path, text: &str) -> Result<TriangleMesh> {
    let mut tokens: Vec<(usize, &str)> = Vec::new();
    for (line, toks) in content_lines(text) {
        tokens.extend(toks.into_iter().map(|t| (line, t)));
    }
    let mut it = tokens.into_iter();
    let mut next = |what: &str| it.next().ok_or_else(|| parse_err(path, format!("unexpected end of file reading {what}")));
    let (_, magic) = next("header")?;
    // "OFF" may be glued to the counts, as in "OFF8 6 0"
    let rest = magic
        .strip_prefix("OFF")
        .ok_or_else(|| parse_err(path, "missing OFF header"))?;
    let (line, nv) = if rest.is_empty() { next("vertex count")? } else { (1, rest) };
    let nv: usize = num(path, line, nv)?;
    let (line, nf) = next("face count")?;
    let nf: usize = num(path, line, nf)?;
    next("edge count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut p = [0.0; 3];
        for c in &mut p {
            let (line, t) = next("vertex")?;
            *c = num(path, line, t)?;
        }
        vertices.push(p);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, t) = next("face")?;
        let k: usize = num(path, line, t)?;
        let mut poly = Vec::with_capacity(k);
        for _ in 0..k {
            let (line, t) = next("face index")?;
            poly.push(num(path, line, t)?);
        }
        fan(&poly, &mut faces);
    }
    TriangleMesh::new(vertices, faces).map_err(|e| parse_err(path, e.to_string()))
}

struct Ply {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

struct Element {
    name: String,
    count: usize,
    /// Scalar property names in order; `None` for the list property.
    props: Vec<Option<String>>,
}

fn parse_ply(path: &Path, text: &str) -> Result<Ply> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_err(path, "missing ply magic")),
    }
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let (i, line) = lines.next().ok_or_else(|| parse_err(path, "header has no end_header"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", ..] => {}
            ["format", f, ..] => return Err(parse_err(path, format!("unsupported ply format {f:?}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: num(path, i + 1, count)?,
                props: Vec::new(),
            }),
            ["property", "list", _, _, _] => elements
                .last_mut()
                .ok_or_else(|| parse_err(path, format!("line {}: property before element", i + 1)))?
                .props
                .push(None),
            ["property", _, name] => elements
                .last_mut()
                .ok_or_else(|| parse_err(path, format!("line {}: property before element", i + 1)))?
                .props
                .push(Some(name.to_string())),
            ["end_header"] => break,
            _ => return Err(parse_err(path, format!("line {}: unrecognized header line {line:?}", i + 1))),
        }
    }
    let mut body = lines.filter(|(_, l)| !l.trim().is_empty());
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        let col = |n: &str| el.props.iter().position(|p| p.as_deref() == Some(n));
        for _ in 0..el.count {
            let (i, line) = body.next().ok_or_else(|| parse_err(path, format!("truncated {} element", el.name)))?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if el.name == "vertex" {
                let mut p = [0.0; 3];
                for (c, axis) in ["x", "y", "z"].iter().enumerate() {
                    let k = col(axis).ok_or_else(|| parse_err(path, format!("vertex element lacks {axis}")))?;
                    let t = toks.get(k).ok_or_else(|| parse_err(path, format!("line {}: short vertex row", i + 1)))?;
                    p[c] = num(path, i + 1, t)?;
                }
                vertices.push(p);
            } else if el.name == "face" {
                let k: usize = num(path, i + 1, toks.first().copied().unwrap_or(""))?;
                if toks.len() < k + 1 {
                    return Err(parse_err(path, format!("line {}: short face row", i + 1)));
                }
                let poly = toks[1..=k].iter().map(|t| num(path, i + 1, t)).collect::<Result<Vec<usize>>>()?;
                fan(&poly, &mut faces);
            }
        }
    }
    Ok(Ply { vertices, faces })
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    let points = match extension(path).as_str() {
        "xyz" | "txt" => content_lines(&text)
            .map(|(line, toks)| {
                if toks.len() < 3 {
                    return Err(parse_err(path, format!("line {line}: expected x y z")));
                }
                Ok([num(path, line, toks[0])?, num(path, line, toks[1])?, num(path, line, toks[2])?])
            })
            .collect::<Result<Vec<Point3>>>()?,
        "ply" => parse_ply(path, &text)?.vertices,
        other => return Err(parse_err(path, format!("unsupported point cloud extension {other:?}"))),
    };
    PointCloud::new(points).map_err(|e| match e {
        Error::EmptyCloud => Error::EmptyCloud,
        e => parse_err(path, e.to_string()),
    })
}

/// One `x y z` line per point, six decimals.
pub fn write_xyz(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for p in cloud.points() {
        writeln!(w, "{:.6} {:.6} {:.6}", p[0], p[1], p[2])?;
    }
    w.flush()?;
    Ok(())
}

/// ASCII PLY with float coordinates followed by one `uchar` property per flag.
pub fn write_ply(path: &Path, cloud: &PointCloud, flags: &[(String, Vec<u8>)]) -> Result<()> {
    if let Some((name, v)) = flags.iter().find(|(_, v)| v.len() != cloud.len()) {
        return Err(Error::InvalidArgument(format!("flag {name:?} has {} values for {} points", v.len(), cloud.len())));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "ply\nformat ascii 1.0\nelement vertex {}", cloud.len())?;
    writeln!(w, "property float x\nproperty float y\nproperty float z")?;
    for (name, _) in flags {
        writeln!(w, "property uchar {name}")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points().iter().enumerate() {
        write!(w, "{:.6} {:.6} {:.6}", p[0], p[1], p[2])?;
        for (_, v) in flags {
            write!(w, " {}", v[i])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes XYZ or PLY depending on the extension of `path`.
pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    match extension(path).as_str() {
        "ply" => write_ply(path, cloud, &[]),
        "xyz" | "txt" => write_xyz(path, cloud),
        other => Err(parse_err(path, format!("unsupported point cloud extension {other:?}"))),
    }
}
