//! Network building blocks over batched activations.
//!
//! Activations are `[B·N × F]`: `B` patches of `N` rows each, stacked along
//! the first axis. Blocks that mix rows (attention, point transformer) keep
//! patches separate; per-row blocks do not care.

mod attention;
mod point_transformer;

use std::sync::Mutex;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{batch_norm, BnMode, RunningStats, Tensor};

pub use attention::{AttentionMap, Gcra, MultiHeadAttention};
pub use point_transformer::{Neighborhood, PtLayer};

/// A named slot of model state, as seen by checkpointing and the optimizer.
pub enum Slot<'a> {
    Param(&'a Tensor),
    Stats(&'a Mutex<Option<RunningStats>>),
}

pub trait Module {
    /// Calls `f` on every parameter and statistics buffer, in a fixed order,
    /// with dotted names rooted at `prefix`.
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, Slot<'a>));
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// `y = x W + b` with `W: [in × out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Weights and bias uniform in `±1/√in`.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Linear {
        let bound = 1.0 / (inputs as f32).sqrt();
        let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-bound..=bound)).collect::<Vec<f32>>();
        Linear {
            weight: Tensor::param(draw(inputs * outputs), &[inputs, outputs]).expect("positive extents"),
            bias: Tensor::param(draw(outputs), &[outputs]).expect("positive extents"),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Linear {
        Linear {
            weight: Tensor::param(vec![0.0; inputs * outputs], &[inputs, outputs]).expect("positive extents"),
            bias: Tensor::param(vec![0.0; outputs], &[outputs]).expect("positive extents"),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.matmul(&self.weight)?.add_bias(&self.bias)
    }
}

impl Module for Linear {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, Slot<'a>)) {
        f(join(prefix, "weight"), Slot::Param(&self.weight));
        f(join(prefix, "bias"), Slot::Param(&self.bias));
    }
}

/// Two linear maps with a ReLU between.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub first: Linear,
    pub second: Linear,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, outputs: usize, rng: &mut R) -> Mlp {
        Mlp {
            first: Linear::new(inputs, hidden, rng),
            second: Linear::new(hidden, outputs, rng),
        }
    }

    /// Hidden width `max(inputs, outputs)`.
    pub fn feed_forward<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Mlp {
        Mlp::new(inputs, inputs.max(outputs), outputs, rng)
    }

    pub fn outputs(&self) -> usize {
        self.second.outputs()
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.second.forward(&self.first.forward(x)?.relu())
    }
}

impl Module for Mlp {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, Slot<'a>)) {
        self.first.visit(&join(prefix, "0"), f);
        self.second.visit(&join(prefix, "1"), f);
    }
}

/// Per-channel normalization over all rows of the batch. Running statistics
/// start at zero mean and unit variance, so eval mode is usable before any
/// training step.
#[derive(Debug)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub stats: Mutex<Option<RunningStats>>,
}

impl BatchNorm {
    pub fn new(features: usize) -> BatchNorm {
        BatchNorm {
            gamma: Tensor::param(vec![1.0; features], &[features]).expect("positive extents"),
            beta: Tensor::param(vec![0.0; features], &[features]).expect("positive extents"),
            stats: Mutex::new(Some(RunningStats::identity(features))),
        }
    }

    pub fn forward(&self, x: &Tensor, mode: BnMode) -> Result<Tensor> {
        batch_norm(x, &self.gamma, &self.beta, &self.stats, mode)
    }
}

impl Clone for BatchNorm {
    fn clone(&self) -> Self {
        BatchNorm {
            gamma: self.gamma.clone(),
            beta: self.beta.clone(),
            stats: Mutex::new(self.stats.lock().expect("running stats lock poisoned").clone()),
        }
    }
}

impl Module for BatchNorm {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, Slot<'a>)) {
        f(join(prefix, "gamma"), Slot::Param(&self.gamma));
        f(join(prefix, "beta"), Slot::Param(&self.beta));
        f(join(prefix, "running"), Slot::Stats(&self.stats));
    }
}

/// `[N × r·C] → [r·N × C]`: row `i` splits into `r` consecutive rows, so
/// `out[r·i + j, c] = in[i, j·C + c]`. In row-major storage this is a pure
/// reshape.
pub fn pixel_shuffle(x: &Tensor, ratio: usize) -> Result<Tensor> {
    if x.rank() != 2 || ratio == 0 || x.shape()[1] % ratio != 0 {
        return Err(Error::InvalidArgument(format!(
            "pixel_shuffle: {:?} channels not divisible by ratio {ratio}",
            x.shape()
        )));
    }
    let (n, w) = (x.shape()[0], x.shape()[1]);
    x.reshape(&[n * ratio, w / ratio])
}

/// Inverse of [`pixel_shuffle`]: groups each run of `r` rows into one row.
pub fn pixel_unshuffle(x: &Tensor, ratio: usize) -> Result<Tensor> {
    if x.rank() != 2 || ratio == 0 || x.shape()[0] % ratio != 0 {
        return Err(Error::InvalidArgument(format!(
            "pixel_unshuffle: {:?} rows not divisible by ratio {ratio}",
            x.shape()
        )));
    }
    let (n, c) = (x.shape()[0], x.shape()[1]);
    x.reshape(&[n / ratio, c * ratio])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(data: &[f32], shape: &[usize]) -> Tensor {
        Tensor::new(data.to_vec(), shape).unwrap()
    }

    #[test]
    fn feed_forward_by_hand() {
        let ff = Mlp {
            first: Linear {
                weight: t(&[2.0], &[1, 1]),
                bias: t(&[0.0], &[1]),
            },
            second: Linear {
                weight: t(&[3.0], &[1, 1]),
                bias: t(&[1.0], &[1]),
            },
        };
        assert_eq!(ff.forward(&t(&[2.0], &[1, 1])).unwrap().to_vec(), vec![13.0]);
    }

    #[test]
    fn feed_forward_shapes_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ff = Mlp::feed_forward(5, 3, &mut rng);
        assert_eq!(ff.first.outputs(), 5);
        let y = ff.forward(&Tensor::zeros(&[7, 5])).unwrap();
        assert_eq!(y.shape(), &[7, 3]);
        let z = Mlp {
            first: Linear::zeros(5, 5),
            second: Linear::zeros(5, 3),
        };
        assert!(z.forward(&t(&[1.0; 10], &[2, 5])).unwrap().to_vec().iter().all(|&v| v == 0.0));
        assert!(ff.forward(&Tensor::zeros(&[7, 4])).is_err());
    }

    #[test]
    fn linear_init_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = Linear::new(16, 8, &mut rng);
        assert!(l.weight.to_vec().iter().all(|v| v.abs() <= 0.25));
        let mut names = Vec::new();
        l.visit("lin", &mut |n, _| names.push(n));
        assert_eq!(names, vec!["lin.weight", "lin.bias"]);
    }

    #[test]
    fn pixel_shuffle_layout() {
        let x = t(&[1., 2., 3., 4., 5., 6.], &[1, 6]);
        let y = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(y.shape(), &[2, 3]);
        assert_eq!(y.to_vec(), vec![1., 2., 3., 4., 5., 6.]);
        assert_eq!(pixel_shuffle(&x, 1).unwrap().shape(), &[1, 6]);
        assert!(pixel_shuffle(&x, 4).is_err());
        assert!(pixel_unshuffle(&y, 3).is_err());
    }

    #[test]
    fn pixel_shuffle_index_map_and_bijection() {
        let (n, r, c) = (3, 4, 2);
        let data: Vec<f32> = (0..n * r * c).map(|v| v as f32).collect();
        let x = t(&data, &[n, r * c]);
        let y = pixel_shuffle(&x, r).unwrap().to_vec();
        for i in 0..n {
            for j in 0..r {
                for k in 0..c {
                    assert_eq!(y[(r * i + j) * c + k], data[i * r * c + j * c + k]);
                }
            }
        }
        let back = pixel_unshuffle(&pixel_shuffle(&x, r).unwrap(), r).unwrap();
        assert_eq!(back.shape(), x.shape());
        assert_eq!(back.to_vec(), data);
    }

    #[test]
    fn batch_norm_layer_starts_with_identity_stats() {
        let bn = BatchNorm::new(2);
        let y = bn.forward(&t(&[1.0, 2.0], &[1, 2]), BnMode::Eval).unwrap().to_vec();
        let s = 1.0 / (1.0f32 + crate::tensor::BN_EPS).sqrt();
        assert_eq!(y, vec![s, 2.0 * s]);
        assert!(bn.forward(&t(&[1.0, 2.0], &[1, 2]), BnMode::Train).is_err());
    }
}
