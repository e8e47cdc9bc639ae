//! Hashed bag-of-words bilinear scorer.
//!
//! `score(x, y) = embed(x)ᵀ · W · embed(y) + b`, where `embed` averages fixed
//! pseudo-random token vectors selected by hashing each token into one of
//! `buckets` slots. The embedding table is never materialized: the vector of
//! a bucket is regenerated from `(hash_seed, bucket)` on demand. Only `W`
//! (row-major, `dim × dim`) and `b` are trainable.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Policy;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScorerConfig {
    pub dim: usize,
    pub buckets: u64,
    pub hash_seed: u64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            dim: 64,
            buckets: 1 << 16,
            hash_seed: 0x5E_ED0F_B0C5,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("scorer.dim", "must be positive"));
        }
        if self.buckets == 0 {
            return Err(Error::config("scorer.buckets", "must be positive"));
        }
        Ok(())
    }
}

/// Scorer shape plus how to initialize it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub dim: usize,
    pub buckets: u64,
    pub hash_seed: u64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let s = ScorerConfig::default();
        ModelConfig {
            dim: s.dim,
            buckets: s.buckets,
            hash_seed: s.hash_seed,
            init_scale: 0.01,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn scorer(&self) -> ScorerConfig {
        ScorerConfig {
            dim: self.dim,
            buckets: self.buckets,
            hash_seed: self.hash_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scorer().validate().map_err(|e| match e {
            Error::Config { field, message } => Error::config(field.replace("scorer.", "model."), message),
            other => other,
        })?;
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::config("model.init_scale", "must be non-negative and finite"));
        }
        Ok(())
    }

    /// The untrained policy.
    pub fn init(&self) -> BilinearScorer {
        BilinearScorer::new(self.scorer(), self.seed, self.init_scale)
    }
}

/// Lowercased maximal alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearScorer {
    config: ScorerConfig,
    params: Vec<f64>,
}

impl BilinearScorer {
    /// All-zero parameters.
    pub fn zeros(config: ScorerConfig) -> Self {
        let n = config.dim * config.dim + 1;
        BilinearScorer {
            config,
            params: vec![0.0; n],
        }
    }

    /// Skew-symmetric `W` with entries uniform in `[-init_scale, init_scale]`
    /// and `b = 0`. Skew symmetry gives `eᵀWe = 0`, so the initial scorer has
    /// no built-in preference for candidates whose text resembles the context.
    pub fn new(config: ScorerConfig, init_seed: u64, init_scale: f64) -> Self {
        let mut s = Self::zeros(config);
        if init_scale > 0.0 {
            let mut rng = seed::rng_from(seed::mix(init_seed, &[seed::tag("bilinear-init")]));
            let d = config.dim;
            for i in 0..d {
                for j in i + 1..d {
                    let w = rng.gen_range(-init_scale..=init_scale);
                    s.params[i * d + j] = w;
                    s.params[j * d + i] = -w;
                }
            }
        }
        s
    }

    pub fn from_params(config: ScorerConfig, params: Vec<f64>) -> Result<Self> {
        let expected = config.dim * config.dim + 1;
        if params.len() != expected {
            return Err(Error::Checkpoint(format!(
                "expected {expected} parameters for dim {}, got {}",
                config.dim,
                params.len()
            )));
        }
        Ok(BilinearScorer { config, params })
    }

    pub fn config(&self) -> ScorerConfig {
        self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn bias(&self) -> f64 {
        self.params[self.config.dim * self.config.dim]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.params[i * self.config.dim + j]
    }

    pub fn set_weight(&mut self, i: usize, j: usize, value: f64) {
        let d = self.config.dim;
        self.params[i * d + j] = value;
    }

    pub fn set_bias(&mut self, value: f64) {
        let d = self.config.dim;
        self.params[d * d] = value;
    }

    pub fn bucket(&self, token: &str) -> u64 {
        let fnv = token
            .bytes()
            .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01B3));
        seed::mix(self.config.hash_seed, &[fnv]) % self.config.buckets
    }

    /// Fixed unit-variance vector for one bucket.
    pub fn bucket_vector(&self, bucket: u64, out: &mut [f64]) {
        let mut state = seed::mix(self.config.hash_seed, &[seed::tag("bucket"), bucket]);
        let scale = 3f64.sqrt();
        for x in out.iter_mut() {
            state = seed::splitmix64(state);
            let unit = (state >> 11) as f64 / (1u64 << 53) as f64;
            *x = (2.0 * unit - 1.0) * scale;
        }
    }

    /// Mean of token vectors; zero vector for text with no tokens.
    pub fn embed(&self, text: &str) -> Vec<f64> {
        let d = self.config.dim;
        let mut acc = vec![0.0; d];
        let mut buf = vec![0.0; d];
        let mut count = 0usize;
        for tok in tokenize(text) {
            self.bucket_vector(self.bucket(&tok), &mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b;
            }
            count += 1;
        }
        if count > 0 {
            let inv = 1.0 / count as f64;
            for a in &mut acc {
                *a *= inv;
            }
        }
        acc
    }
}

impl Policy for BilinearScorer {
    type Context = Vec<f64>;
    type Candidate = Vec<f64>;

    fn encode_context(&self, text: &str) -> Vec<f64> {
        self.embed(text)
    }

    fn encode_candidate(&self, text: &str) -> Vec<f64> {
        self.embed(text)
    }

    fn score_with(&self, params: &[f64], x: &Vec<f64>, y: &Vec<f64>) -> f64 {
        let d = self.config.dim;
        let mut total = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &params[i * d..(i + 1) * d];
            let dot: f64 = row.iter().zip(y).map(|(w, yj)| w * yj).sum();
            total += xi * dot;
        }
        total + params[d * d]
    }

    fn accumulate_grad(&self, _params: &[f64], x: &Vec<f64>, y: &Vec<f64>, scale: f64, grad: &mut [f64]) {
        let d = self.config.dim;
        for (i, &xi) in x.iter().enumerate() {
            let s = scale * xi;
            if s == 0.0 {
                continue;
            }
            for (g, yj) in grad[i * d..(i + 1) * d].iter_mut().zip(y) {
                *g += s * yj;
            }
        }
        grad[d * d] += scale;
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
}

/// Checkpoint header; the first line of a checkpoint file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub dim: usize,
    pub buckets: u64,
    pub hash_seed: u64,
    pub step: u64,
}

/// Text checkpoint: a JSON header line, then one parameter per line in
/// shortest round-trip exponent notation.
pub fn save_checkpoint(scorer: &BilinearScorer, step: u64, path: &Path) -> Result<()> {
    let header = Checkpoint {
        dim: scorer.config.dim,
        buckets: scorer.config.buckets,
        hash_seed: scorer.config.hash_seed,
        step,
    };
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", serde_json::to_string(&header)?).map_err(io)?;
    for p in &scorer.params {
        writeln!(w, "{p:e}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Loads a checkpoint; when `expected` is given, the header must match it.
pub fn load_checkpoint(path: &Path, expected: Option<&ScorerConfig>) -> Result<(BilinearScorer, Checkpoint)> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = src.lines();
    let header: Checkpoint = serde_json::from_str(
        lines
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("{}: empty file", path.display())))?,
    )
    .map_err(|e| Error::Checkpoint(format!("{}: bad header: {e}", path.display())))?;
    let config = ScorerConfig {
        dim: header.dim,
        buckets: header.buckets,
        hash_seed: header.hash_seed,
    };
    if let Some(exp) = expected {
        if *exp != config {
            return Err(Error::Checkpoint(format!(
                "{}: header {{dim {}, buckets {}, hash_seed {}}} does not match configured {{dim {}, buckets {}, hash_seed {}}}",
                path.display(),
                config.dim,
                config.buckets,
                config.hash_seed,
                exp.dim,
                exp.buckets,
                exp.hash_seed
            )));
        }
    }
    let params = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| Error::Checkpoint(format!("{}:{}: {e}", path.display(), i + 2)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((BilinearScorer::from_params(config, params)?, header))
}
