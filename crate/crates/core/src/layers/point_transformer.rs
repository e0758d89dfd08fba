use rand::Rng;

use super::{join, Linear, Mlp, Module, Slot};
use crate::error::{Error, Result};
use crate::geometry::{knn_all, PointCloud};
use crate::tensor::Tensor;

/// KNN structure of a batch of equally sized patches, shared by every point
/// transformer layer that runs on the same positions.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    rows_per_patch: usize,
    k: usize,
    /// Row `i` repeated `k` times, for every batch row.
    centers: Vec<usize>,
    /// Batch-global row index of each neighbor, `k` per row, nearest first.
    neighbors: Vec<usize>,
    /// `p_center − p_neighbor`, `[rows·k × 3]`.
    offsets: Tensor,
}

impl Neighborhood {
    pub fn new(patches: &[PointCloud], k: usize) -> Result<Neighborhood> {
        let first = patches.first().ok_or(Error::EmptyCloud)?;
        let n = first.len();
        if let Some(p) = patches.iter().find(|p| p.len() != n) {
            return Err(Error::InvalidArgument(format!("patches differ in size: {n} and {}", p.len())));
        }
        if k == 0 || k > n {
            return Err(Error::InsufficientPoints {
                what: "point transformer neighborhood",
                requested: k,
                available: n,
            });
        }
        let rows = n * patches.len();
        let mut centers = Vec::with_capacity(rows * k);
        let mut neighbors = Vec::with_capacity(rows * k);
        let mut offsets = Vec::with_capacity(rows * k * 3);
        for (b, patch) in patches.iter().enumerate() {
            let local = knn_all(patch, k)?;
            for i in 0..n {
                let pi = patch.get(i);
                for &j in &local[i * k..(i + 1) * k] {
                    let pj = patch.get(j);
                    centers.push(b * n + i);
                    neighbors.push(b * n + j);
                    offsets.extend((0..3).map(|c| (pi[c] - pj[c]) as f32));
                }
            }
        }
        Ok(Neighborhood {
            rows_per_patch: n,
            k,
            centers,
            neighbors,
            offsets: Tensor::new(offsets, &[rows * k, 3])?,
        })
    }

    pub fn rows(&self) -> usize {
        self.centers.len() / self.k
    }

    pub fn rows_per_patch(&self) -> usize {
        self.rows_per_patch
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Neighbors of batch row `row`, nearest first.
    pub fn of(&self, row: usize) -> &[usize] {
        &self.neighbors[row * self.k..(row + 1) * self.k]
    }
}

/// Vector self-attention over each point's KNN neighborhood:
///
/// `out_i = Σ_j softmax_j(γ(φ f_i − ψ f_j + θ(p_i − p_j))) ⊙ (α f_j + θ(p_i − p_j))`
///
/// with the softmax taken per channel over the `k` neighbors.
#[derive(Debug, Clone)]
pub struct PtLayer {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub weight_net: Mlp,
    pub position_net: Mlp,
}

impl PtLayer {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> PtLayer {
        PtLayer {
            query: Linear::new(inputs, outputs, rng),
            key: Linear::new(inputs, outputs, rng),
            value: Linear::new(inputs, outputs, rng),
            weight_net: Mlp::new(outputs, outputs, outputs, rng),
            position_net: Mlp::new(3, outputs, outputs, rng),
        }
    }

    /// Zeroes the value projection and the position encoding's last map so
    /// the layer outputs exactly zero for any input.
    pub fn zero_output(&mut self) {
        let (i, o) = (self.value.inputs(), self.value.outputs());
        self.value = Linear::zeros(i, o);
        self.position_net.second = Linear::zeros(o, o);
    }

    pub fn outputs(&self) -> usize {
        self.value.outputs()
    }

    pub fn forward(&self, x: &Tensor, nb: &Neighborhood) -> Result<Tensor> {
        if x.rank() != 2 || x.shape()[0] != nb.rows() {
            return Err(Error::ShapeMismatch {
                op: "pt_layer",
                lhs: x.shape().to_vec(),
                rhs: vec![nb.rows(), self.query.inputs()],
            });
        }
        let (rows, k, f) = (nb.rows(), nb.k, self.outputs());
        let q = self.query.forward(x)?;
        let key = self.key.forward(x)?;
        let v = self.value.forward(x)?;
        let pos = self.position_net.forward(&nb.offsets)?;
        let relation = q.index_select(&nb.centers)?.sub(&key.index_select(&nb.neighbors)?)?.add(&pos)?;
        let weights = self.weight_net.forward(&relation)?.reshape(&[rows, k, f])?.softmax(1)?;
        let values = v.index_select(&nb.neighbors)?.add(&pos)?.reshape(&[rows, k, f])?;
        weights.mul(&values)?.sum_axis(1)
    }
}

impl Module for PtLayer {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, Slot<'a>)) {
        self.query.visit(&join(prefix, "query"), f);
        self.key.visit(&join(prefix, "key"), f);
        self.value.visit(&join(prefix, "value"), f);
        self.weight_net.visit(&join(prefix, "weight_net"), f);
        self.position_net.visit(&join(prefix, "position_net"), f);
    }
}
