//! The upsampling network: a point-transformer feature extractor, a coarse
//! generator, a global self-attention stage, and a cross-attention refiner.
//!
//! `Q = Q' + Q'^Δ` where `Q'` is the coarse cloud (duplicated input plus
//! generated offsets) and `Q'^Δ` the refinement.

mod config;

use std::collections::HashMap;
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::layers::{pixel_shuffle, pixel_unshuffle, AttentionMap, Gcra, Linear, Module, MultiHeadAttention, Neighborhood, PtLayer, Slot};
use crate::tensor::checkpoint::Checkpoint;
use crate::tensor::{BnMode, RunningStats, Tensor};

pub use config::{ModelConfig, QueryMode};

/// Row `r·i + j` of the result is row `i` of `s`, for `j < r`.
pub fn duplicate(s: &Tensor, ratio: usize) -> Result<Tensor> {
    let rows: Vec<usize> = (0..s.shape()[0]).flat_map(|i| std::iter::repeat_n(i, ratio)).collect();
    s.index_select(&rows)
}

/// Everything one forward pass produces.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Final cloud `Q`, `[B·rN × 3]`.
    pub dense: Tensor,
    /// Coarse cloud `Q'`.
    pub coarse: Tensor,
    /// Refinement offsets `Q'^Δ`.
    pub refinement: Tensor,
    /// Extractor outputs, shallowest first.
    pub features: Vec<Tensor>,
    /// Global features from the self-attention stage.
    pub global: Tensor,
    /// Output of each refinement block, in execution order.
    pub contexts: Vec<Tensor>,
    /// Per refinement block, every (patch, head) score matrix when captured.
    pub attention: Vec<Vec<AttentionMap>>,
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    pub extractor: Vec<PtLayer>,
    pub generator: Vec<PtLayer>,
    pub lift: Linear,
    pub self_attention: Vec<MultiHeadAttention>,
    pub refiner: Vec<Gcra>,
    pub head: Linear,
}

impl Model {
    /// Fresh weights drawn from `config.init_seed`, with both residual
    /// emitters zeroed so that `Q = duplicate(S, r)` at initialization.
    pub fn new(config: ModelConfig) -> Result<Model> {
        let mut m = Model::random(config)?;
        m.zero_residuals();
        Ok(m)
    }

    /// Fresh weights with nothing zeroed.
    pub fn random(config: ModelConfig) -> Result<Model> {
        config.validate()?;
        let rng = &mut ChaCha8Rng::seed_from_u64(config.init_seed);
        let extractor = (1..=config.depth)
            .map(|h| {
                let inputs = if h == 1 { 3 } else { config.feature_width(h - 1) };
                PtLayer::new(inputs, config.feature_width(h), rng)
            })
            .collect();
        let plan = config.coarse_plan();
        let generator = plan.windows(2).map(|w| PtLayer::new(w[0], w[1], rng)).collect();
        let global = config.global_width();
        let lift = Linear::new(3 * config.ratio, global, rng);
        let self_attention = (0..config.sab_depth)
            .map(|_| MultiHeadAttention::new(global, global, config.heads, rng))
            .collect::<Result<_>>()?;
        let refiner = (1..=config.depth)
            .map(|j| Gcra::new(config.query_width(j), config.pool_width(j), config.context_width(j), config.heads, rng))
            .collect::<Result<_>>()?;
        let head = Linear::new(3 * config.ratio, 3 * config.ratio, rng);
        Ok(Model {
            config,
            extractor,
            generator,
            lift,
            self_attention,
            refiner,
            head,
        })
    }

    pub fn zero_residuals(&mut self) {
        self.generator.last_mut().expect("generator has four layers").zero_output();
        let w = 3 * self.config.ratio;
        self.head = Linear::zeros(w, w);
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Runs on a batch of patches of exactly `config.points` points each.
    pub fn forward(&self, patches: &[PointCloud], mode: BnMode, capture: bool) -> Result<Trace> {
        let c = &self.config;
        let n = c.points;
        if patches.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(p) = patches.iter().find(|p| p.len() != n) {
            return Err(Error::InvalidArgument(format!("model expects {n} points per patch, got {}", p.len())));
        }
        let nb = Neighborhood::new(patches, c.patch_size)?;
        let s = if patches.len() == 1 {
            patches[0].to_tensor()
        } else {
            Tensor::concat(&patches.iter().map(PointCloud::to_tensor).collect::<Vec<_>>(), 0)?
        };

        let mut features = Vec::with_capacity(c.depth);
        let mut x = s.clone();
        for layer in &self.extractor {
            x = layer.forward(&x, &nb)?;
            features.push(x.clone());
        }

        let mut y = s.clone();
        for layer in &self.generator {
            y = layer.forward(&y, &nb)?;
        }
        let coarse = duplicate(&s, c.ratio)?.add(&pixel_shuffle(&y, c.ratio)?)?;

        let mut global = self.lift.forward(&pixel_unshuffle(&coarse, c.ratio)?)?;
        for block in &self.self_attention {
            global = global.add(&block.forward(&global, &global, n, None)?)?;
        }

        let mut pool = global.clone();
        let mut contexts = Vec::with_capacity(c.depth);
        let mut attention = Vec::with_capacity(c.depth);
        for (j, block) in (1..=c.depth).zip(&self.refiner) {
            let query = match c.query_mode {
                QueryMode::MultiScale => features[c.depth - j].clone(),
                QueryMode::Deepest => features[c.depth - 1].clone(),
                QueryMode::SelfAttention => pool.clone(),
            };
            let mut maps = Vec::new();
            pool = block.forward(&query, &pool, n, mode, capture.then_some(&mut maps))?;
            contexts.push(pool.clone());
            attention.push(maps);
        }
        let refinement = pixel_shuffle(&self.head.forward(&pool)?, c.ratio)?;
        let dense = coarse.add(&refinement)?;
        Ok(Trace {
            dense,
            coarse,
            refinement,
            features,
            global,
            contexts,
            attention,
        })
    }

    /// Every parameter, named, in a fixed order.
    pub fn parameters(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, slot| {
            if let Slot::Param(t) = slot {
                out.push((name, t.clone()));
            }
        });
        out
    }

    pub fn parameter_tensors(&self) -> Vec<Tensor> {
        self.parameters().into_iter().map(|(_, t)| t).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|(_, t)| t.numel()).sum()
    }

    fn statistics(&self) -> Vec<(String, &Mutex<Option<RunningStats>>)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, slot| {
            if let Slot::Stats(s) = slot {
                out.push((name, s));
            }
        });
        out
    }

    /// Config block plus every parameter and running statistic.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        for (k, v) in self.config.entries() {
            ck.push_config(format!("model.{k}"), v);
        }
        for (name, t) in self.parameters() {
            ck.push_tensor(name, t.shape(), t.to_vec());
        }
        for (name, stats) in self.statistics() {
            let guard = stats.lock().expect("running stats lock poisoned");
            let s = guard.as_ref().expect("model statistics always exist");
            ck.push_tensor(format!("{name}.mean"), &[s.mean.len()], s.mean.clone());
            ck.push_tensor(format!("{name}.var"), &[s.var.len()], s.var.clone());
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Model> {
        let config = ModelConfig::from_entries(|k| ck.config_value(&format!("model.{k}")).map(str::to_string))?;
        let model = Model::random(config)?;
        let buffers: HashMap<&str, _> = ck.tensors.iter().map(|b| (b.name.as_str(), b)).collect();
        let fetch = |name: &str, shape: &[usize]| -> Result<Vec<f32>> {
            let b = buffers
                .get(name)
                .ok_or_else(|| Error::InvalidArgument(format!("checkpoint lacks tensor {name}")))?;
            if b.shape != shape {
                return Err(Error::ShapeMismatch {
                    op: "checkpoint load",
                    lhs: b.shape.clone(),
                    rhs: shape.to_vec(),
                });
            }
            if b.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("checkpoint tensor {name} is not finite")));
            }
            Ok(b.data.clone())
        };
        for (name, t) in model.parameters() {
            t.set_data(&fetch(&name, t.shape())?)?;
        }
        for (name, stats) in model.statistics() {
            let mut guard = stats.lock().expect("running stats lock poisoned");
            let f = guard.as_ref().map_or(0, |s| s.mean.len());
            *guard = Some(RunningStats {
                mean: fetch(&format!("{name}.mean"), &[f])?,
                var: fetch(&format!("{name}.var"), &[f])?,
            });
        }
        Ok(model)
    }
}

impl Module for Model {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, Slot<'a>)) {
        use crate::layers::join;
        for (i, l) in self.extractor.iter().enumerate() {
            l.visit(&join(prefix, &format!("extractor.{i}")), f);
        }
        for (i, l) in self.generator.iter().enumerate() {
            l.visit(&join(prefix, &format!("generator.{i}")), f);
        }
        self.lift.visit(&join(prefix, "lift"), f);
        for (i, l) in self.self_attention.iter().enumerate() {
            l.visit(&join(prefix, &format!("self_attention.{i}")), f);
        }
        for (i, l) in self.refiner.iter().enumerate() {
            l.visit(&join(prefix, &format!("refiner.{i}")), f);
        }
        self.head.visit(&join(prefix, "head"), f);
    }
}
