//! Training loss and evaluation metrics.
//!
//! Distances are unsquared Euclidean norms throughout. The evaluation metrics
//! run in f64 on [`PointCloud`]s; the training losses are differentiable
//! tensor expressions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist2, point_to_triangle_distance, PointCloud, TriangleMesh};
use crate::tensor::Tensor;

/// Distance from each point of `from` to its nearest point in `to`.
pub fn nearest_distances(from: &PointCloud, to: &PointCloud) -> Vec<f64> {
    from.points()
        .par_iter()
        .map(|&p| to.points().iter().map(|&q| dist2(p, q)).fold(f64::INFINITY, f64::min).sqrt())
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean nearest-neighbor distance from `p` to `d` plus from `d` to `p`.
pub fn chamfer_distance(p: &PointCloud, d: &PointCloud) -> f64 {
    mean(&nearest_distances(p, d)) + mean(&nearest_distances(d, p))
}

/// Chamfer distance with each nearest distance `x` replaced by `1 − e^{−x}`.
pub fn density_aware_chamfer(p: &PointCloud, d: &PointCloud) -> f64 {
    let sat = |v: Vec<f64>| mean(&v.into_iter().map(|x| 1.0 - (-x).exp()).collect::<Vec<_>>());
    sat(nearest_distances(p, d)) + sat(nearest_distances(d, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HausdorffMode {
    #[default]
    Symmetric,
    /// Only the worst prediction-to-ground-truth distance.
    Directed,
}

/// Symmetric mode is `max(max_x min_y ‖x−y‖, max_y min_x ‖y−x‖)`; directed
/// mode keeps the first term.
pub fn hausdorff_distance(p: &PointCloud, d: &PointCloud, mode: HausdorffMode) -> f64 {
    let forward = nearest_distances(p, d).into_iter().fold(0.0, f64::max);
    match mode {
        HausdorffMode::Directed => forward,
        HausdorffMode::Symmetric => forward.max(nearest_distances(d, p).into_iter().fold(0.0, f64::max)),
    }
}

/// Mean over `p` of the distance to the closest face of `mesh`.
pub fn point_to_surface(p: &PointCloud, mesh: &TriangleMesh) -> Result<f64> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let tris: Vec<_> = (0..mesh.faces().len()).map(|f| mesh.triangle(f)).collect();
    let per_point = p
        .points()
        .par_iter()
        .map(|&x| {
            tris.iter()
                .map(|&t| point_to_triangle_distance(x, t))
                .try_fold(f64::INFINITY, |best, d| d.map(|d| best.min(d)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean(&per_point))
}

/// Weight of the density-aware term, linear in the optimization step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSchedule {
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub total_steps: u64,
}

impl LossSchedule {
    pub fn new(total_steps: u64) -> Self {
        LossSchedule {
            alpha_start: 0.1,
            alpha_end: 1.0,
            total_steps,
        }
    }

    /// `start + (end − start)·step/total`, clamped to the endpoints. A
    /// zero-length schedule sits at `end`.
    pub fn alpha(&self, step: u64) -> f64 {
        if self.total_steps == 0 || step >= self.total_steps {
            return self.alpha_end;
        }
        let a = self.alpha_start + (self.alpha_end - self.alpha_start) * step as f64 / self.total_steps as f64;
        let (lo, hi) = (self.alpha_start.min(self.alpha_end), self.alpha_start.max(self.alpha_end));
        a.clamp(lo, hi)
    }
}

fn check_cloud_tensor(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != 3 || b.shape()[1] != 3 {
        return Err(Error::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// Nearest distances both ways, `(a→b, b→a)`.
fn nearest_pair(a: &Tensor, b: &Tensor) -> Result<(Tensor, Tensor)> {
    let d = a.pairwise_distance(b)?;
    Ok((d.min_axis(1)?, d.min_axis(0)?))
}

/// Differentiable chamfer distance between two `[n × 3]` clouds.
pub fn chamfer_loss(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_cloud_tensor("chamfer_loss", a, b)?;
    let (ab, ba) = nearest_pair(a, b)?;
    ab.mean().add(&ba.mean())
}

/// Differentiable density-aware chamfer distance.
pub fn density_aware_loss(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_cloud_tensor("density_aware_loss", a, b)?;
    let (ab, ba) = nearest_pair(a, b)?;
    let sat = |t: Tensor| t.scale(-1.0).exp().scale(-1.0).add_scalar(1.0).mean();
    sat(ab).add(&sat(ba))
}

/// Loss terms of one batch.
#[derive(Debug, Clone)]
pub struct LossTerms {
    pub total: Tensor,
    /// Chamfer distance of the coarse cloud, averaged over patches.
    pub coarse_cd: f32,
    /// Density-aware chamfer distance of the final cloud, averaged over patches.
    pub dense_dcd: f32,
    pub alpha: f32,
}

/// `CD(Q', D) + α·DCD(Q, D)` per patch, averaged over the `B` patches of a
/// batch. All three tensors are `[B·M × 3]` with `M = rows_per_patch`.
pub fn total_loss(coarse: &Tensor, dense: &Tensor, target: &Tensor, rows_per_patch: usize, alpha: f64) -> Result<LossTerms> {
    if coarse.shape() != target.shape() || dense.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            op: "total_loss",
            lhs: dense.shape().to_vec(),
            rhs: target.shape().to_vec(),
        });
    }
    let rows = target.shape()[0];
    if rows_per_patch == 0 || rows % rows_per_patch != 0 {
        return Err(Error::InvalidArgument(format!("{rows} rows do not split into patches of {rows_per_patch}")));
    }
    let patches = rows / rows_per_patch;
    let mut cd_terms = Vec::with_capacity(patches);
    let mut dcd_terms = Vec::with_capacity(patches);
    for b in 0..patches {
        let part = |t: &Tensor| t.narrow(0, b * rows_per_patch, rows_per_patch);
        let d = part(target)?;
        cd_terms.push(chamfer_loss(&part(coarse)?, &d)?);
        dcd_terms.push(density_aware_loss(&part(dense)?, &d)?);
    }
    let average = |terms: Vec<Tensor>| -> Result<Tensor> {
        let mut acc = terms[0].clone();
        for t in &terms[1..] {
            acc = acc.add(t)?;
        }
        Ok(acc.scale(1.0 / patches as f32))
    };
    let cd = average(cd_terms)?;
    let dcd = average(dcd_terms)?;
    let total = cd.add(&dcd.scale(alpha as f32))?;
    Ok(LossTerms {
        coarse_cd: cd.item(),
        dense_dcd: dcd.item(),
        alpha: alpha as f32,
        total,
    })
}

/// Spearman rank correlation with tied values sharing their average rank.
/// `None` when either series is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let ranks = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    };
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(p: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(p.to_vec()).unwrap()
    }

    #[test]
    fn chamfer_examples() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[3.0, 4.0, 0.0]]);
        assert_eq!(chamfer_distance(&a, &b), 10.0);
        assert_eq!(chamfer_distance(&b, &b), 0.0);
    }

    #[test]
    fn dcd_examples() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[2f64.ln(), 0.0, 0.0]]);
        assert!((density_aware_chamfer(&a, &b) - 1.0).abs() < 1e-15);
        assert_eq!(density_aware_chamfer(&a, &a), 0.0);
        let far = cloud(&[[1e6, 0.0, 0.0]]);
        assert!(density_aware_chamfer(&a, &far) <= 2.0);
    }

    #[test]
    fn hausdorff_examples() {
        let p = cloud(&[[0.0; 3]]);
        let d = cloud(&[[0.0; 3], [1.0, 0.0, 0.0]]);
        assert_eq!(hausdorff_distance(&p, &d, HausdorffMode::Symmetric), 1.0);
        assert_eq!(hausdorff_distance(&p, &d, HausdorffMode::Directed), 0.0);
        assert_eq!(hausdorff_distance(&d, &d, HausdorffMode::Symmetric), 0.0);
    }

    #[test]
    fn p2f_plane() {
        let mesh = TriangleMesh::new(
            vec![[-100.0, -100.0, 0.0], [100.0, -100.0, 0.0], [100.0, 100.0, 0.0], [-100.0, 100.0, 0.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let p = cloud(&[[0.3, -0.7, 0.25]]);
        assert!((point_to_surface(&p, &mesh).unwrap() - 0.25).abs() < 1e-12);
        let on = cloud(&[[1.0, 2.0, 0.0], [-5.0, 3.0, 0.0]]);
        assert!(point_to_surface(&on, &mesh).unwrap() < 1e-6);
        let empty = TriangleMesh::new(vec![[0.0; 3]], vec![]).unwrap();
        assert!(matches!(point_to_surface(&p, &empty), Err(Error::EmptyMesh)));
    }

    #[test]
    fn schedule_endpoints() {
        let s = LossSchedule::new(500);
        assert!((s.alpha(0) - 0.1).abs() < 1e-15);
        assert_eq!(s.alpha(500), 1.0);
        assert_eq!(s.alpha(10_000), 1.0);
        assert!((s.alpha(250) - 0.55).abs() < 1e-12);
    }

    #[test]
    fn total_loss_zero_at_perfect_prediction() {
        let d = Tensor::new(vec![0., 0., 0., 1., 0., 0., 0., 2., 0., 5., 5., 5.], &[4, 3]).unwrap();
        let terms = total_loss(&d, &d, &d, 2, 0.1).unwrap();
        assert_eq!(terms.total.item(), 0.0);
        assert!(total_loss(&d, &d, &d, 3, 0.1).is_err());
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), None);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(r > 0.9 && r < 1.0);
    }
}
