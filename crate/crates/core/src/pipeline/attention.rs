use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::io::write_ply;
use crate::geometry::{Normalization, PointCloud};
use crate::network::Model;
use crate::tensor::{no_grad, BnMode};

/// Default number of ranked points per head.
pub const DEFAULT_TOP_K: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct HeadAttention {
    pub head: usize,
    /// Row-major `rows × cols` softmax scores, one row per query point.
    pub scores: Vec<f32>,
    pub rows: usize,
    pub cols: usize,
    /// Column means of `scores`; the ranking key of each input point.
    pub mean_scores: Vec<f64>,
    /// Indices into the input cloud, highest mean score first.
    pub top: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerAttention {
    /// Refinement block, 1-based in execution order.
    pub layer: usize,
    pub heads: Vec<HeadAttention>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionReport {
    pub layers: Vec<LayerAttention>,
    /// Overlay files written, one per layer.
    pub overlays: Vec<PathBuf>,
}

/// Indices of the `k` largest values, descending; ties go to the lower index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Column means of a row-major `rows × cols` matrix.
pub fn column_means(scores: &[f32], rows: usize, cols: usize) -> Vec<f64> {
    let mut m = vec![0.0f64; cols];
    for row in scores.chunks(cols).take(rows) {
        for (acc, &v) in m.iter_mut().zip(row) {
            *acc += v as f64;
        }
    }
    m.iter_mut().for_each(|v| *v /= rows as f64);
    m
}

/// Runs the model on `cloud` with attention capture and ranks, for every
/// refinement block and every head in `heads`, the input points by their
/// mean received attention. With `out_dir`, writes `layer_<j>.ply` per block:
/// the input cloud with one `head<h>` flag per selected head.
pub fn dump_attention(model: &Model, cloud: &PointCloud, heads: &[usize], k: usize, out_dir: Option<&Path>) -> Result<AttentionReport> {
    let config = model.config();
    if cloud.len() != config.points {
        return Err(Error::InsufficientPoints {
            what: "attention dump input",
            requested: config.points,
            available: cloud.len(),
        });
    }
    if heads.is_empty() {
        return Err(Error::InvalidArgument("select at least one head".into()));
    }
    if let Some(&h) = heads.iter().find(|&&h| h >= config.heads) {
        return Err(Error::InvalidArgument(format!("head {h} out of range; the model has {} heads", config.heads)));
    }
    let input = Normalization::fit(cloud).normalize(cloud);
    let trace = {
        let _guard = no_grad();
        model.forward(&[input], BnMode::Eval, true)?
    };
    let mut layers = Vec::with_capacity(trace.attention.len());
    for (j, maps) in trace.attention.iter().enumerate() {
        let heads = heads
            .iter()
            .map(|&h| {
                let map = maps
                    .iter()
                    .find(|m| m.patch == 0 && m.head == h)
                    .ok_or_else(|| Error::InvalidArgument(format!("no capture for head {h} in layer {}", j + 1)))?;
                let mean_scores = column_means(&map.scores, map.rows, map.cols);
                Ok(HeadAttention {
                    head: h,
                    top: top_k(&mean_scores, k),
                    scores: map.scores.clone(),
                    rows: map.rows,
                    cols: map.cols,
                    mean_scores,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        layers.push(LayerAttention { layer: j + 1, heads });
    }
    let mut overlays = Vec::new();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        for layer in &layers {
            let flags: Vec<(String, Vec<u8>)> = layer
                .heads
                .iter()
                .map(|h| {
                    let mut f = vec![0u8; cloud.len()];
                    h.top.iter().for_each(|&i| f[i] = 1);
                    (format!("head{}", h.head), f)
                })
                .collect();
            let path = dir.join(format!("layer_{}.ply", layer.layer));
            write_ply(&path, cloud, &flags)?;
            overlays.push(path);
        }
    }
    Ok(AttentionReport { layers, overlays })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_ties_prefer_lower_index() {
        assert_eq!(top_k(&[0.1, 0.5, 0.5, 0.2], 3), vec![1, 2, 3]);
        assert_eq!(top_k(&[1.0, 2.0], 5), vec![1, 0]);
    }

    #[test]
    fn column_means_of_two_rows() {
        let m = column_means(&[0.2, 0.8, 0.6, 0.4], 2, 2);
        assert!((m[0] - 0.4).abs() < 1e-7 && (m[1] - 0.6).abs() < 1e-7);
    }
}
