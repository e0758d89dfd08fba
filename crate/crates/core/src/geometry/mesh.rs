use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::triangle::is_degenerate;
use super::{cross, norm, scale, sub, Point3};
use crate::error::{Error, Result};

/// Indexed triangle mesh. Degenerate faces are dropped on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= vertices.len())) {
            return Err(Error::InvalidArgument(format!(
                "face {f:?} references a vertex beyond {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidArgument("mesh has a non-finite vertex".into()));
        }
        let faces = faces
            .into_iter()
            .filter(|&[a, b, c]| !is_degenerate(vertices[a], vertices[b], vertices[c]))
            .collect();
        Ok(TriangleMesh { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Uniformly rescales so that the vertex farthest from the bounding-box
    /// center lies on the unit sphere around the origin.
    pub fn normalized(&self) -> TriangleMesh {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for c in 0..3 {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
        let center = scale(super::add(lo, hi), 0.5);
        let radius = self.vertices.iter().map(|&v| norm(sub(v, center))).fold(0.0, f64::max);
        let s = if radius > 0.0 { 1.0 / radius } else { 1.0 };
        TriangleMesh {
            vertices: self.vertices.iter().map(|&v| scale(sub(v, center), s)).collect(),
            faces: self.faces.clone(),
        }
    }
}

/// Built-in training and test shapes, each fitting the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyticShape {
    Sphere,
    Torus,
    Box,
    Cylinder,
}

impl AnalyticShape {
    pub const ALL: [AnalyticShape; 4] = [
        AnalyticShape::Sphere,
        AnalyticShape::Torus,
        AnalyticShape::Box,
        AnalyticShape::Cylinder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnalyticShape::Sphere => "sphere",
            AnalyticShape::Torus => "torus",
            AnalyticShape::Box => "box",
            AnalyticShape::Cylinder => "cylinder",
        }
    }

    pub fn mesh(self) -> TriangleMesh {
        match self {
            AnalyticShape::Sphere => icosphere(3),
            AnalyticShape::Torus => torus(0.7, 0.3, 64, 32),
            AnalyticShape::Box => cube(0.5f64.sqrt() / 1.5f64.sqrt(), 10),
            AnalyticShape::Cylinder => cylinder(0.6, 0.6, 64, 12),
        }
    }
}

impl fmt::Display for AnalyticShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnalyticShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnalyticShape::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown shape {s:?}")))
    }
}

fn unit(p: Point3) -> Point3 {
    scale(p, 1.0 / norm(p))
}

/// Subdivided icosahedron with every vertex on the unit sphere.
pub(crate) fn icosphere(levels: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(unit)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point3>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                vertices.push(unit(scale(super::add(vertices[a], vertices[b]), 0.5)));
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices, faces).expect("icosphere is well-formed")
}

fn torus(major: f64, minor: f64, segments: usize, rings: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(segments * rings);
    for i in 0..segments {
        let u = 2.0 * PI * i as f64 / segments as f64;
        for j in 0..rings {
            let v = 2.0 * PI * j as f64 / rings as f64;
            let r = major + minor * v.cos();
            vertices.push([r * u.cos(), r * u.sin(), minor * v.sin()]);
        }
    }
    let idx = |i: usize, j: usize| (i % segments) * rings + (j % rings);
    let mut faces = Vec::with_capacity(2 * segments * rings);
    for i in 0..segments {
        for j in 0..rings {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces).expect("torus is well-formed")
}

/// Axis-aligned cube of half-extent `half`, each face split into a
/// `divisions × divisions` grid.
fn cube(half: f64, divisions: usize) -> TriangleMesh {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for axis in 0..3 {
        for side in [-1.0, 1.0] {
            let (u_axis, v_axis) = ((axis + 1) % 3, (axis + 2) % 3);
            let base = vertices.len();
            for i in 0..=divisions {
                for j in 0..=divisions {
                    let mut p = [0.0; 3];
                    p[axis] = side * half;
                    p[u_axis] = -half + 2.0 * half * i as f64 / divisions as f64;
                    p[v_axis] = -half + 2.0 * half * j as f64 / divisions as f64;
                    vertices.push(p);
                }
            }
            let at = |i: usize, j: usize| base + i * (divisions + 1) + j;
            for i in 0..divisions {
                for j in 0..divisions {
                    faces.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
                    faces.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
                }
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("cube is well-formed")
}

/// Capped cylinder along z.
fn cylinder(radius: f64, half_height: f64, segments: usize, stacks: usize) -> TriangleMesh {
    let mut vertices = Vec::new();
    for k in 0..=stacks {
        let z = -half_height + 2.0 * half_height * k as f64 / stacks as f64;
        for i in 0..segments {
            let a = 2.0 * PI * i as f64 / segments as f64;
            vertices.push([radius * a.cos(), radius * a.sin(), z]);
        }
    }
    let ring = |k: usize, i: usize| k * segments + i % segments;
    let mut faces = Vec::new();
    for k in 0..stacks {
        for i in 0..segments {
            faces.push([ring(k, i), ring(k, i + 1), ring(k + 1, i + 1)]);
            faces.push([ring(k, i), ring(k + 1, i + 1), ring(k + 1, i)]);
        }
    }
    let bottom = vertices.len();
    vertices.push([0.0, 0.0, -half_height]);
    let top = vertices.len();
    vertices.push([0.0, 0.0, half_height]);
    for i in 0..segments {
        faces.push([bottom, ring(0, i + 1), ring(0, i)]);
        faces.push([top, ring(stacks, i), ring(stacks, i + 1)]);
    }
    TriangleMesh::new(vertices, faces).expect("cylinder is well-formed")
}
