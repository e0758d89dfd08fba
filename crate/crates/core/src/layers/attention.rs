use rand::Rng;

use super::{join, BatchNorm, Linear, Mlp, Module, Slot};
use crate::error::{Error, Result};
use crate::tensor::{BnMode, Tensor};

/// Softmax scores of one head on one patch, `rows × cols` row-major; row `i`
/// is the distribution of query `i` over the pool rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub patch: usize,
    pub head: usize,
    pub rows: usize,
    pub cols: usize,
    pub scores: Vec<f32>,
}

/// Scaled dot-product attention with `heads` heads. Queries come from one
/// tensor, keys and values from a pool; output width equals the pool width.
/// Attention never crosses patch boundaries.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn new<R: Rng + ?Sized>(query_width: usize, pool_width: usize, heads: usize, rng: &mut R) -> Result<Self> {
        if heads == 0 || pool_width % heads != 0 {
            return Err(Error::InvalidArgument(format!("pool width {pool_width} is not divisible by {heads} heads")));
        }
        Ok(MultiHeadAttention {
            query: Linear::new(query_width, pool_width, rng),
            key: Linear::new(pool_width, pool_width, rng),
            value: Linear::new(pool_width, pool_width, rng),
            output: Linear::new(pool_width, pool_width, rng),
            heads,
        })
    }

    pub fn width(&self) -> usize {
        self.output.outputs()
    }

    /// `query: [B·N × F_q]`, `pool: [B·M × F_p]` with `B` inferred from
    /// `rows_per_patch = N` (the pool splits into the same number of patches).
    pub fn forward(&self, query: &Tensor, pool: &Tensor, rows_per_patch: usize, mut capture: Option<&mut Vec<AttentionMap>>) -> Result<Tensor> {
        let (qr, pr) = (query.shape()[0], pool.shape()[0]);
        if query.rank() != 2 || pool.rank() != 2 || rows_per_patch == 0 || qr % rows_per_patch != 0 || pr % (qr / rows_per_patch).max(1) != 0 {
            return Err(Error::ShapeMismatch {
                op: "multihead_attention",
                lhs: query.shape().to_vec(),
                rhs: pool.shape().to_vec(),
            });
        }
        let patches = qr / rows_per_patch;
        let pool_rows = pr / patches;
        let width = self.width();
        let d = width / self.heads;
        let scale = 1.0 / (d as f32).sqrt();

        let q = self.query.forward(query)?;
        let k = self.key.forward(pool)?;
        let v = self.value.forward(pool)?;
        let mut per_patch = Vec::with_capacity(patches);
        for b in 0..patches {
            let (qb, kb, vb) = (
                q.narrow(0, b * rows_per_patch, rows_per_patch)?,
                k.narrow(0, b * pool_rows, pool_rows)?,
                v.narrow(0, b * pool_rows, pool_rows)?,
            );
            let mut per_head = Vec::with_capacity(self.heads);
            for h in 0..self.heads {
                let qh = qb.narrow(1, h * d, d)?;
                let kh = kb.narrow(1, h * d, d)?;
                let vh = vb.narrow(1, h * d, d)?;
                let scores = qh.matmul(&kh.transpose()?)?.scale(scale).softmax(1)?;
                if let Some(sink) = capture.as_deref_mut() {
                    sink.push(AttentionMap {
                        patch: b,
                        head: h,
                        rows: rows_per_patch,
                        cols: pool_rows,
                        scores: scores.to_vec(),
                    });
                }
                per_head.push(scores.matmul(&vh)?);
            }
            per_patch.push(if per_head.len() == 1 { per_head.pop().unwrap() } else { Tensor::concat(&per_head, 1)? });
        }
        let merged = if per_patch.len() == 1 { per_patch.pop().unwrap() } else { Tensor::concat(&per_patch, 0)? };
        self.output.forward(&merged)
    }
}

impl Module for MultiHeadAttention {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, Slot<'a>)) {
        self.query.visit(&join(prefix, "query"), f);
        self.key.visit(&join(prefix, "key"), f);
        self.value.visit(&join(prefix, "value"), f);
        self.output.visit(&join(prefix, "output"), f);
    }
}

/// Cross-attention refinement: `FF(BN(pool + MHA(query, pool)))`.
#[derive(Debug, Clone)]
pub struct Gcra {
    pub attention: MultiHeadAttention,
    pub norm: BatchNorm,
    pub feed_forward: Mlp,
}

impl Gcra {
    pub fn new<R: Rng + ?Sized>(query_width: usize, pool_width: usize, out_width: usize, heads: usize, rng: &mut R) -> Result<Self> {
        Ok(Gcra {
            attention: MultiHeadAttention::new(query_width, pool_width, heads, rng)?,
            norm: BatchNorm::new(pool_width),
            feed_forward: Mlp::feed_forward(pool_width, out_width, rng),
        })
    }

    /// The normalized, attention-refined pool before the feed-forward map.
    pub fn refine(&self, query: &Tensor, pool: &Tensor, rows_per_patch: usize, mode: BnMode, capture: Option<&mut Vec<AttentionMap>>) -> Result<Tensor> {
        let attended = self.attention.forward(query, pool, rows_per_patch, capture)?;
        self.norm.forward(&pool.add(&attended)?, mode)
    }

    pub fn forward(&self, query: &Tensor, pool: &Tensor, rows_per_patch: usize, mode: BnMode, capture: Option<&mut Vec<AttentionMap>>) -> Result<Tensor> {
        self.feed_forward.forward(&self.refine(query, pool, rows_per_patch, mode, capture)?)
    }
}

impl Module for Gcra {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, Slot<'a>)) {
        self.attention.visit(&join(prefix, "attention"), f);
        self.norm.visit(&join(prefix, "norm"), f);
        self.feed_forward.visit(&join(prefix, "feed_forward"), f);
    }
}
