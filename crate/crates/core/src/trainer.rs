//! Mini-batch gradient descent on the preference objective with holdout
//! evaluation, patience-based early stopping and best-checkpoint restore.
//!
//! The reference policy is the snapshot taken when training starts. Batch
//! gradients are computed per instance (possibly in parallel) and reduced in
//! a fixed order, so results do not depend on the thread count.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{EncodedInstance, ObjectiveConfig};
use crate::policy::{Policy, PolicySnapshot};
use crate::sampler::PreferenceInstance;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Constant,
    /// Linear warmup over `warmup_fraction` of the steps, then cosine decay to zero.
    #[default]
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub schedule: Schedule,
    pub warmup_fraction: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub eval_every: usize,
    /// Evaluations without improvement before stopping; 0 disables early stopping.
    pub patience: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2e-4,
            schedule: Schedule::Cosine,
            warmup_fraction: 0.1,
            momentum: 0.0,
            batch_size: 8,
            epochs: 10,
            eval_every: 20,
            patience: 8,
            holdout_fraction: 0.1,
            seed: 0,
            grad_clip: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate", "must be non-negative and finite"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::config("train.warmup_fraction", "must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("train.momentum", "must be in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be positive"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("train.eval_every", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::config("train.holdout_fraction", "must be in [0, 1)"));
        }
        if self.grad_clip.is_nan() || self.grad_clip <= 0.0 {
            return Err(Error::config("train.grad_clip", "must be positive"));
        }
        Ok(())
    }

    /// Learning rate at zero-based `step` out of `total` steps.
    pub fn lr_at(&self, step: usize, total: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.learning_rate,
            Schedule::Cosine => {
                let warmup = (self.warmup_fraction * total as f64).ceil() as usize;
                if step < warmup {
                    self.learning_rate * (step + 1) as f64 / warmup as f64
                } else {
                    let span = (total - warmup).max(1) as f64;
                    let progress = (step - warmup) as f64 / span;
                    self.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
    pub grad_norm: f64,
    pub applied_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_size: usize,
    pub holdout_size: usize,
    pub planned_steps: usize,
    pub steps: Vec<StepRecord>,
    pub evals: Vec<EvalRecord>,
    pub best_step: Option<usize>,
    pub best_loss: Option<f64>,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn steps_taken(&self) -> usize {
        self.steps.len()
    }

    /// Line-delimited `{"step", "split", "loss"}` records.
    pub fn write_metrics(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            step: usize,
            split: &'a str,
            loss: f64,
        }
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut evals = self.evals.iter().peekable();
        for s in &self.steps {
            writeln!(w, "{}", serde_json::to_string(&Line { step: s.step, split: "train", loss: s.loss })?)
                .map_err(|e| Error::io(path, e))?;
            while let Some(e) = evals.next_if(|e| e.step == s.step) {
                writeln!(w, "{}", serde_json::to_string(&Line { step: e.step, split: "holdout", loss: e.loss })?)
                    .map_err(|err| Error::io(path, err))?;
            }
        }
        for e in evals {
            writeln!(w, "{}", serde_json::to_string(&Line { step: e.step, split: "holdout", loss: e.loss })?)
                .map_err(|err| Error::io(path, err))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Deterministic train/holdout split of `n` instance indices.
pub fn split_indices(n: usize, config: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng_from(seed::mix(config.seed, &[seed::tag("holdout")]));
    idx.shuffle(&mut rng);
    let mut k = (config.holdout_fraction * n as f64).round() as usize;
    if config.holdout_fraction > 0.0 && n >= 2 {
        k = k.clamp(1, n - 1);
    }
    let holdout = {
        let mut h = idx[..k].to_vec();
        h.sort_unstable();
        h
    };
    let mut train = idx[k..].to_vec();
    train.sort_unstable();
    (train, holdout)
}

/// Splits `dataset` into train and holdout and trains `policy` in place.
pub fn train<P: Policy>(
    policy: &mut P,
    dataset: &[PreferenceInstance],
    objective: &ObjectiveConfig,
    config: &TrainConfig,
) -> Result<TrainReport> {
    if dataset.is_empty() {
        return Err(Error::Dataset("training dataset is empty".into()));
    }
    let (train_idx, holdout_idx) = split_indices(dataset.len(), config);
    let train_set: Vec<PreferenceInstance> = train_idx.iter().map(|&i| dataset[i].clone()).collect();
    let holdout: Vec<PreferenceInstance> = holdout_idx.iter().map(|&i| dataset[i].clone()).collect();
    train_split(policy, &train_set, &holdout, objective, config)
}

fn mean_loss<P: Policy>(
    policy: &P,
    params: &[f64],
    set: &[EncodedInstance<P>],
    objective: &ObjectiveConfig,
) -> Result<f64> {
    let losses: Vec<f64> = set
        .par_iter()
        .map(|e| e.loss(policy, params, objective).map(|b| b.total))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Trains on `train_set`, evaluating on `holdout`.
pub fn train_split<P: Policy>(
    policy: &mut P,
    train_set: &[PreferenceInstance],
    holdout: &[PreferenceInstance],
    objective: &ObjectiveConfig,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    objective.validate()?;
    if train_set.is_empty() {
        return Err(Error::Dataset("training split is empty".into()));
    }
    if config.patience > 0 && holdout.is_empty() {
        return Err(Error::config("train.holdout_fraction", "early stopping needs a non-empty holdout"));
    }

    let reference: PolicySnapshot = policy.snapshot();
    let encode = |set: &[PreferenceInstance]| -> Vec<EncodedInstance<P>> {
        set.par_iter()
            .map(|inst| EncodedInstance::new(&*policy, &reference, inst))
            .collect()
    };
    let train_enc = encode(train_set);
    let hold_enc = encode(holdout);

    let batches_per_epoch = train_enc.len().div_ceil(config.batch_size);
    let planned = config.epochs * batches_per_epoch;
    let mut report = TrainReport {
        train_size: train_enc.len(),
        holdout_size: hold_enc.len(),
        planned_steps: planned,
        steps: Vec::new(),
        evals: Vec::new(),
        best_step: None,
        best_loss: None,
        stopped_early: false,
    };

    let n_params = policy.num_params();
    let mut velocity = vec![0.0; n_params];
    let mut best_params: Option<Vec<f64>> = None;
    let mut since_best = 0usize;
    let mut step = 0usize;

    let mut evaluate = |policy: &P, step: usize, report: &mut TrainReport, best: &mut Option<Vec<f64>>| -> Result<bool> {
        if hold_enc.is_empty() {
            return Ok(false);
        }
        let loss = mean_loss(policy, policy.params(), &hold_enc, objective)?;
        report.evals.push(EvalRecord { step, loss });
        if report.best_loss.is_none_or(|b| loss < b) {
            report.best_loss = Some(loss);
            report.best_step = Some(step);
            *best = Some(policy.params().to_vec());
            since_best = 0;
        } else {
            since_best += 1;
        }
        Ok(config.patience > 0 && since_best >= config.patience)
    };

    'epochs: for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train_enc.len()).collect();
        let mut rng = seed::rng_from(seed::mix(config.seed, &[seed::tag("epoch"), epoch as u64]));
        order.shuffle(&mut rng);

        for batch in order.chunks(config.batch_size) {
            let params = policy.params();
            let per_instance: Vec<(Vec<f64>, f64)> = batch
                .par_iter()
                .map(|&i| {
                    let mut g = vec![0.0; n_params];
                    let b = train_enc[i]
                        .accumulate_grad(&*policy, params, objective, 1.0, &mut g)
                        .map_err(|_| Error::NonFiniteLoss { instance: i, source_node: train_set[i].source, step })?;
                    if !b.total.is_finite() {
                        return Err(Error::NonFiniteLoss { instance: i, source_node: train_set[i].source, step });
                    }
                    Ok((g, b.total))
                })
                .collect::<Result<_>>()?;

            let inv = 1.0 / batch.len() as f64;
            let mut grad = vec![0.0; n_params];
            let mut loss = 0.0;
            for (g, l) in &per_instance {
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += v;
                }
                loss += l;
            }
            loss *= inv;
            for g in &mut grad {
                *g *= inv;
            }
            let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if grad_norm > config.grad_clip {
                let s = config.grad_clip / grad_norm;
                for g in &mut grad {
                    *g *= s;
                }
            }
            let applied_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();

            let lr = config.lr_at(step, planned);
            let params = policy.params_mut();
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = config.momentum * *v + g;
                *p -= lr * *v;
            }
            step += 1;
            report.steps.push(StepRecord {
                step,
                loss,
                lr,
                grad_norm,
                applied_norm,
            });

            if step.is_multiple_of(config.eval_every) && evaluate(&*policy, step, &mut report, &mut best_params)? {
                report.stopped_early = true;
                break 'epochs;
            }
        }
    }

    if step > 0 && report.evals.last().is_none_or(|e| e.step != step) && !report.stopped_early {
        evaluate(&*policy, step, &mut report, &mut best_params)?;
    }
    if let Some(best) = best_params {
        policy.params_mut().copy_from_slice(&best);
    }
    Ok(report)
}
