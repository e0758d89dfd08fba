//! Point clouds, meshes, and the spatial kernels the network and the data
//! pipeline share. Geometry is kept in `f64`; the network boundary converts
//! to and from `f32` tensors.

mod augment;
pub mod io;
mod knn;
mod mesh;
mod patch;
mod sampling;
mod triangle;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use augment::{add_gaussian_noise, augment, AugmentConfig};
pub use knn::{farthest_point_sample, knn, knn_all};
pub use mesh::{AnalyticShape, TriangleMesh};
pub use patch::{extract_patch_pairs, merge_patches, Normalization, PatchPair};
pub use sampling::{sample_mesh, SamplingMode};
pub use triangle::{closest_point_on_triangle, point_to_triangle_distance};

pub type Point3 = [f64; 3];

#[inline]
pub fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Point3, b: Point3) -> Point3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist2(a: Point3, b: Point3) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}

#[inline]
pub fn dist(a: Point3, b: Point3) -> f64 {
    dist2(a, b).sqrt()
}

/// Non-empty set of finite 3D points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidArgument(format!("point {i} has a non-finite coordinate")));
        }
        Ok(PointCloud { points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, i: usize) -> Point3 {
        self.points[i]
    }

    pub fn select(&self, indices: &[usize]) -> Result<PointCloud> {
        PointCloud::new(indices.iter().map(|&i| self.points[i]).collect())
    }

    pub fn concat(clouds: &[PointCloud]) -> Result<PointCloud> {
        PointCloud::new(clouds.iter().flat_map(|c| c.points.iter().copied()).collect())
    }

    pub fn centroid(&self) -> Point3 {
        let s = self.points.iter().fold([0.0; 3], |acc, &p| add(acc, p));
        scale(s, 1.0 / self.len() as f64)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Point3, Point3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.points {
            for c in 0..3 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        (lo, hi)
    }

    /// `len × 3` constant tensor.
    pub fn to_tensor(&self) -> Tensor {
        let data = self.points.iter().flat_map(|p| p.iter().map(|&c| c as f32)).collect();
        Tensor::new(data, &[self.len(), 3]).expect("point cloud is non-empty")
    }

    pub fn from_tensor(t: &Tensor) -> Result<PointCloud> {
        if t.rank() != 2 || t.shape()[1] != 3 {
            return Err(Error::ShapeMismatch {
                op: "point cloud",
                lhs: t.shape().to_vec(),
                rhs: vec![0, 3],
            });
        }
        let data = t.data();
        PointCloud::new(data.chunks_exact(3).map(|c| [c[0] as f64, c[1] as f64, c[2] as f64]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cloud_invariants() {
        assert!(matches!(PointCloud::new(vec![]), Err(Error::EmptyCloud)));
        assert!(PointCloud::new(vec![[0.0, f64::NAN, 0.0]]).is_err());
        let c = PointCloud::new(vec![[0.0, 0.0, 0.0], [2.0, 4.0, -2.0]]).unwrap();
        assert_eq!(c.centroid(), [1.0, 2.0, -1.0]);
        assert_eq!(c.bounds(), ([0.0, 0.0, -2.0], [2.0, 4.0, 0.0]));
    }

    #[test]
    fn tensor_conversion() {
        let c = PointCloud::new(vec![[0.5, 1.0, -2.0], [3.0, 4.0, 0.25]]).unwrap();
        let t = c.to_tensor();
        assert_eq!(t.shape(), &[2, 3]);
        assert_eq!(PointCloud::from_tensor(&t).unwrap(), c);
    }
}
