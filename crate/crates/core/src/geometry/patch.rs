use rand::Rng;

use super::{add, farthest_point_sample, knn, norm, scale, sub, Point3, PointCloud};
use crate::error::{Error, Result};

/// Similarity that maps a patch into the unit ball: `p ↦ (p - centroid) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub centroid: Point3,
    pub scale: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        centroid: [0.0; 3],
        scale: 1.0,
    };

    /// Centroid of `cloud` and its largest distance from it. A cloud of
    /// coincident points keeps scale 1.
    pub fn fit(cloud: &PointCloud) -> Normalization {
        let centroid = cloud.centroid();
        let radius = cloud.points().iter().map(|&p| norm(sub(p, centroid))).fold(0.0, f64::max);
        Normalization {
            centroid,
            scale: if radius > 0.0 { radius } else { 1.0 },
        }
    }

    pub fn normalize(&self, cloud: &PointCloud) -> PointCloud {
        let inv = 1.0 / self.scale;
        let pts = cloud.points().iter().map(|&p| scale(sub(p, self.centroid), inv)).collect();
        PointCloud::new(pts).expect("similarity keeps points finite")
    }

    pub fn denormalize(&self, cloud: &PointCloud) -> PointCloud {
        let pts = cloud.points().iter().map(|&p| add(scale(p, self.scale), self.centroid)).collect();
        PointCloud::new(pts).expect("similarity keeps points finite")
    }
}

/// One training example: a sparse input patch and its dense target, both in
/// the target's normalized frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPair {
    pub input: PointCloud,
    pub target: PointCloud,
    pub normalization: Normalization,
}

/// `count` pairs cut from `dense`. Each target is the `ratio·n` points nearest
/// to a random seed point; each input is the farthest-point subsample of its
/// target down to `n`, starting from the target's first point.
pub fn extract_patch_pairs<R: Rng + ?Sized>(dense: &PointCloud, count: usize, n: usize, ratio: usize, rng: &mut R) -> Result<Vec<PatchPair>> {
    if n == 0 || ratio == 0 {
        return Err(Error::InvalidArgument("patch size and ratio must be positive".into()));
    }
    let target_len = n * ratio;
    if dense.len() < target_len {
        return Err(Error::InsufficientPoints {
            what: "patch extraction",
            requested: target_len,
            available: dense.len(),
        });
    }
    (0..count)
        .map(|_| {
            let seed = dense.get(rng.random_range(0..dense.len()));
            let target = dense.select(&knn(dense, seed, target_len)?)?;
            let input = target.select(&farthest_point_sample(&target, n, 0)?)?;
            let normalization = Normalization::fit(&target);
            Ok(PatchPair {
                input: normalization.normalize(&input),
                target: normalization.normalize(&target),
                normalization,
            })
        })
        .collect()
}

/// Maps each patch back to world space, concatenates them, and reduces the
/// union to `target_count` points by farthest point sampling.
pub fn merge_patches(patches: &[(PointCloud, Normalization)], target_count: usize) -> Result<PointCloud> {
    if patches.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let world: Vec<PointCloud> = patches.iter().map(|(c, n)| n.denormalize(c)).collect();
    let union = PointCloud::concat(&world)?;
    if union.len() < target_count {
        return Err(Error::InsufficientPoints {
            what: "patch merge",
            requested: target_count,
            available: union.len(),
        });
    }
    union.select(&farthest_point_sample(&union, target_count, 0)?)
}
