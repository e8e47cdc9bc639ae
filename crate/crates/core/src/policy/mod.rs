//! Scoring policies.
//!
//! A policy maps a (context, candidate) pair to a real log-score. Only score
//! differences between candidates of one instance matter downstream, so the
//! score need not be a normalized probability. Inputs are encoded once into
//! parameter-independent features; scoring and gradients then work on those
//! features against an explicit parameter vector, which lets a frozen
//! [`PolicySnapshot`] score through the same code path.

mod bilinear;

pub use bilinear::{load_checkpoint, save_checkpoint, tokenize, BilinearScorer, Checkpoint, ModelConfig, ScorerConfig};

use std::sync::Arc;

pub trait Policy: Send + Sync {
    type Context: Clone + Send + Sync;
    type Candidate: Clone + Send + Sync;

    fn encode_context(&self, text: &str) -> Self::Context;
    fn encode_candidate(&self, text: &str) -> Self::Candidate;

    /// Score under an arbitrary parameter vector of length [`Policy::num_params`].
    fn score_with(&self, params: &[f64], ctx: &Self::Context, cand: &Self::Candidate) -> f64;

    /// `grad += scale * d score / d params`, evaluated at `params`.
    fn accumulate_grad(
        &self,
        params: &[f64],
        ctx: &Self::Context,
        cand: &Self::Candidate,
        scale: f64,
        grad: &mut [f64],
    );

    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    fn num_params(&self) -> usize {
        self.params().len()
    }

    fn score(&self, ctx: &Self::Context, cand: &Self::Candidate) -> f64 {
        self.score_with(self.params(), ctx, cand)
    }

    fn logprob(&self, context: &str, candidate: &str) -> f64 {
        self.score(&self.encode_context(context), &self.encode_candidate(candidate))
    }

    fn logprob_grad(&self, context: &str, candidate: &str) -> Vec<f64> {
        let mut g = vec![0.0; self.num_params()];
        self.accumulate_grad(
            self.params(),
            &self.encode_context(context),
            &self.encode_candidate(candidate),
            1.0,
            &mut g,
        );
        g
    }

    fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot {
            params: Arc::from(self.params()),
        }
    }
}

/// Frozen copy of a policy's parameters, used as the reference policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySnapshot {
    params: Arc<[f64]>,
}

impl PolicySnapshot {
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn score<P: Policy>(&self, policy: &P, ctx: &P::Context, cand: &P::Candidate) -> f64 {
        policy.score_with(&self.params, ctx, cand)
    }

    pub fn logprob<P: Policy>(&self, policy: &P, context: &str, candidate: &str) -> f64 {
        self.score(policy, &policy.encode_context(context), &policy.encode_candidate(candidate))
    }
}
