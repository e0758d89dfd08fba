use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::PipelineConfig;
use super::stream_seed;
use crate::error::{Error, Result};
use crate::geometry::{augment, PatchPair, PointCloud};
use crate::metrics::{total_loss, LossSchedule};
use crate::network::{Model, ModelConfig};
use crate::tensor::checkpoint::Checkpoint;
use crate::tensor::optim::{zero_grads, AdamConfig, AdamState};
use crate::tensor::{BnMode, Tensor};

/// Loss terms of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: u64,
    pub alpha: f32,
    pub loss: f32,
    pub coarse_cd: f32,
    pub dense_dcd: f32,
}

/// Adam over the combined loss. Batch order depends only on `(seed, epoch)`
/// and augmentation only on `(seed, step)`, so a run resumed from a
/// checkpoint continues exactly as the uninterrupted one would.
pub struct Trainer {
    config: PipelineConfig,
    model: Model,
    params: Vec<(String, Tensor)>,
    adam: AdamState,
    schedule: LossSchedule,
    dataset: Vec<PatchPair>,
    step: u64,
    steps_per_epoch: u64,
    total_steps: u64,
}

impl Trainer {
    pub fn new(config: &PipelineConfig, dataset: Vec<PatchPair>) -> Result<Trainer> {
        Trainer::with_model(config, dataset, Model::new(config.model)?)
    }

    pub fn with_model(config: &PipelineConfig, dataset: Vec<PatchPair>, model: Model) -> Result<Trainer> {
        config.validate()?;
        let m = model.config();
        if dataset.is_empty() {
            return Err(Error::InvalidArgument("training needs at least one patch pair".into()));
        }
        if let Some(p) = dataset.iter().find(|p| p.input.len() != m.points || p.target.len() != m.points * m.ratio) {
            return Err(Error::InvalidArgument(format!(
                "patch pair {}→{} does not match model {}→{}",
                p.input.len(),
                p.target.len(),
                m.points,
                m.points * m.ratio
            )));
        }
        let steps_per_epoch = dataset.len().div_ceil(config.train.batch_size) as u64;
        let mut total_steps = steps_per_epoch * config.train.epochs as u64;
        if config.train.max_steps > 0 {
            total_steps = total_steps.min(config.train.max_steps);
        }
        let params = model.parameters();
        let tensors: Vec<Tensor> = params.iter().map(|(_, t)| t.clone()).collect();
        let adam = AdamState::new(
            AdamConfig {
                lr: config.train.learning_rate as f32,
                ..AdamConfig::default()
            },
            &tensors,
        );
        let schedule = LossSchedule {
            alpha_start: config.train.alpha_start,
            alpha_end: config.train.alpha_end,
            total_steps,
        };
        Ok(Trainer {
            config: config.clone(),
            model,
            params,
            adam,
            schedule,
            dataset,
            step: 0,
            steps_per_epoch,
            total_steps,
        })
    }

    /// Restores weights, running statistics, optimizer moments and the step
    /// counter. The checkpoint's model config must match `config.model`.
    pub fn resume(config: &PipelineConfig, dataset: Vec<PatchPair>, path: &Path) -> Result<Trainer> {
        let ck = Checkpoint::read(path)?;
        let model = Model::from_checkpoint(&ck)?;
        if *model.config() != config.model {
            return Err(Error::InvalidArgument(format!(
                "checkpoint {} was written for a different model config",
                path.display()
            )));
        }
        let mut t = Trainer::with_model(config, dataset, model)?;
        let step: u64 = ck
            .config_value("train.step")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::InvalidArgument(format!("{} is not a training checkpoint", path.display())))?;
        t.step = step;
        t.adam.step = ck.config_value("adam.step").and_then(|v| v.parse().ok()).unwrap_or(step);
        for (i, (name, p)) in t.params.iter().enumerate() {
            for (prefix, dst) in [("adam.m", &mut t.adam.first_moment[i]), ("adam.v", &mut t.adam.second_moment[i])] {
                let key = format!("{prefix}.{name}");
                let b = ck.tensor(&key).ok_or_else(|| Error::InvalidArgument(format!("checkpoint lacks {key}")))?;
                if b.data.len() != p.numel() {
                    return Err(Error::ShapeMismatch {
                        op: "checkpoint load",
                        lhs: b.shape.clone(),
                        rhs: p.shape().to_vec(),
                    });
                }
                dst.copy_from_slice(&b.data);
            }
        }
        Ok(t)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn steps_per_epoch(&self) -> u64 {
        self.steps_per_epoch
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.total_steps
    }

    fn batch_indices(&self, step: u64) -> Vec<usize> {
        let epoch = step / self.steps_per_epoch;
        let slot = (step % self.steps_per_epoch) as usize;
        let mut order: Vec<usize> = (0..self.dataset.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_seed(self.config.train.seed, 0x6f72_6465, epoch)));
        let bs = self.config.train.batch_size;
        order[slot * bs..((slot + 1) * bs).min(order.len())].to_vec()
    }

    /// Augmented inputs and the concatenated targets of the batch for `step`.
    fn batch(&self, step: u64) -> Result<(Vec<PointCloud>, Tensor)> {
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for (slot, i) in self.batch_indices(step).into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(self.config.train.seed, step, slot as u64));
            let pair = augment(&self.dataset[i], &mut rng, &self.config.augment)?;
            targets.push(pair.target.to_tensor());
            inputs.push(pair.input);
        }
        let target = if targets.len() == 1 { targets.pop().unwrap() } else { Tensor::concat(&targets, 0)? };
        Ok((inputs, target))
    }

    /// Loss terms for `step` at the current weights, without updating anything
    /// but the batch-norm running statistics.
    pub fn loss_at(&self, step: u64) -> Result<StepRecord> {
        let _guard = crate::tensor::no_grad();
        Ok(self.evaluate(step)?.0)
    }

    fn evaluate(&self, step: u64) -> Result<(StepRecord, Tensor)> {
        let (inputs, target) = self.batch(step)?;
        let m: &ModelConfig = self.model.config();
        let trace = self.model.forward(&inputs, BnMode::Train, false)?;
        let alpha = self.schedule.alpha(step);
        let terms = total_loss(&trace.coarse, &trace.dense, &target, m.points * m.ratio, alpha)?;
        let loss = terms.total.item();
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step, value: loss });
        }
        let record = StepRecord {
            step,
            epoch: step / self.steps_per_epoch,
            alpha: terms.alpha,
            loss,
            coarse_cd: terms.coarse_cd,
            dense_dcd: terms.dense_dcd,
        };
        Ok((record, terms.total))
    }

    /// One optimizer step.
    pub fn step(&mut self) -> Result<StepRecord> {
        let tensors: Vec<Tensor> = self.params.iter().map(|(_, t)| t.clone()).collect();
        zero_grads(&tensors);
        let (record, total) = self.evaluate(self.step)?;
        total.backward()?;
        self.adam.step(&tensors)?;
        zero_grads(&tensors);
        self.step += 1;
        Ok(record)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = self.model.to_checkpoint();
        ck.push_config("train.step", self.step);
        ck.push_config("adam.step", self.adam.step);
        for (i, (name, p)) in self.params.iter().enumerate() {
            ck.push_tensor(format!("adam.m.{name}"), p.shape(), self.adam.first_moment[i].clone());
            ck.push_tensor(format!("adam.v.{name}"), p.shape(), self.adam.second_moment[i].clone());
        }
        ck
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().write(path)
    }

    /// Steps to the end of the schedule, logging one line per epoch and
    /// writing the checkpoint at every epoch boundary and at the end.
    pub fn run(&mut self, checkpoint: Option<&Path>, observer: &mut dyn FnMut(&StepRecord)) -> Result<()> {
        let mut sums = [0.0f64; 3];
        let mut count = 0u64;
        while !self.is_finished() {
            let r = self.step()?;
            observer(&r);
            sums[0] += r.loss as f64;
            sums[1] += r.coarse_cd as f64;
            sums[2] += r.dense_dcd as f64;
            count += 1;
            let epoch_done = self.step % self.steps_per_epoch == 0 || self.is_finished();
            if epoch_done {
                let n = count as f64;
                info!(
                    "epoch {} step {} alpha {:.4} loss {:.6} coarse_cd {:.6} dense_dcd {:.6}",
                    r.epoch,
                    self.step,
                    r.alpha,
                    sums[0] / n,
                    sums[1] / n,
                    sums[2] / n
                );
                sums = [0.0; 3];
                count = 0;
                if let Some(p) = checkpoint {
                    self.save(p)?;
                }
            }
        }
        Ok(())
    }
}
