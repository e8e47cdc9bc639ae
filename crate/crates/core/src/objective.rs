//! Hop-weighted listwise preference objective.
//!
//! For an instance with chosen candidate `c` and rejected candidates `r`:
//!
//! ```text
//! ψ(y)     = β · (log π_θ(y|x) − log π_ref(y|x))
//! L_DPO    = −log σ(ψ(c) − ψ(r))
//! w_dist   = 1 / |d(c) − d(r)|
//! w_rank   = |1/rank(c) − 1/rank(r)|        (ranks by ψ, descending)
//! L        = Σ_r w_dist · w_rank · L_DPO + γ · L_SFT(c)
//! ```
//!
//! `L_SFT` is the negative log-softmax of the chosen candidate's policy score
//! over the instance's candidate list. Both weights are treated as constants
//! when differentiating.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Policy, PolicySnapshot};
use crate::sampler::PreferenceInstance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveConfig {
    pub beta: f64,
    pub gamma: f64,
    pub use_dist_weight: bool,
    pub use_rank_weight: bool,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            beta: 0.1,
            gamma: 5.0,
            use_dist_weight: true,
            use_rank_weight: true,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config("objective.beta", "must be positive and finite"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("objective.gamma", "must be non-negative and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    /// Index of the rejected candidate in the instance's candidate list.
    pub rejected: usize,
    pub hop: usize,
    pub w_dist: f64,
    pub w_rank: f64,
    pub dpo_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub psi: Vec<f64>,
    pub ranks: Vec<usize>,
    pub pairs: Vec<PairTerm>,
    pub sft_loss: f64,
    pub gamma: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// `γ · L_SFT`.
    pub fn sft_contribution(&self) -> f64 {
        self.gamma * self.sft_loss
    }

    /// Total re-derived from the stored parts.
    pub fn recomputed_total(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.w_dist * p.w_rank * p.dpo_loss)
            .sum::<f64>()
            + self.sft_contribution()
    }
}

/// `log σ(x)` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn dpo_pair_loss(psi_chosen: f64, psi_rejected: f64) -> f64 {
    -log_sigmoid(psi_chosen - psi_rejected)
}

pub fn distance_weight(hop_chosen: usize, hop_rejected: usize) -> Result<f64> {
    if hop_chosen == hop_rejected {
        return Err(Error::Contract(format!(
            "distance weight undefined for equal hops ({hop_chosen})"
        )));
    }
    Ok(1.0 / hop_chosen.abs_diff(hop_rejected) as f64)
}

/// 1-based descending ranks; ties go to the lower index.
pub fn rank_candidates(psi: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..psi.len()).collect();
    order.sort_by(|&a, &b| psi[b].total_cmp(&psi[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; psi.len()];
    for (pos, &idx) in order.iter().enumerate() {
        ranks[idx] = pos + 1;
    }
    ranks
}

/// `|1/r_c - 1/r_r|`, computed as `|r_r - r_c| / (r_c r_r)` so small-rank
/// values round once.
pub fn rank_weight(rank_chosen: usize, rank_rejected: usize) -> f64 {
    rank_chosen.abs_diff(rank_rejected) as f64 / (rank_chosen as f64 * rank_rejected as f64)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Negative log-softmax of `scores[chosen]`.
pub fn listwise_sft(scores: &[f64], chosen: usize) -> f64 {
    (log_sum_exp(scores) - scores[chosen]).max(0.0)
}

pub fn implicit_reward<P: Policy>(
    policy: &P,
    reference: &PolicySnapshot,
    beta: f64,
    context: &str,
    candidate: &str,
) -> Result<f64> {
    let (x, y) = (policy.encode_context(context), policy.encode_candidate(candidate));
    let cur = policy.score(&x, &y);
    let refs = reference.score(policy, &x, &y);
    if !cur.is_finite() || !refs.is_finite() {
        return Err(Error::NonFinite(format!("policy {cur}, reference {refs}")));
    }
    Ok(beta * (cur - refs))
}

/// Listwise SFT term of an instance under the current policy.
pub fn sft_loss<P: Policy>(policy: &P, instance: &PreferenceInstance) -> f64 {
    let x = policy.encode_context(instance.context());
    let scores: Vec<f64> = instance
        .candidates
        .iter()
        .map(|c| policy.score(&x, &policy.encode_candidate(&c.text)))
        .collect();
    listwise_sft(&scores, 0)
}

/// Loss from raw scores. Index 0 is the chosen candidate; `hops[i]` is the
/// hop tag of candidate `i`.
pub fn loss_from_scores(
    scores: &[f64],
    ref_scores: &[f64],
    hops: &[usize],
    config: &ObjectiveConfig,
) -> Result<LossBreakdown> {
    if scores.len() < 2 || scores.len() != ref_scores.len() || scores.len() != hops.len() {
        return Err(Error::Contract(
            "an instance needs a chosen and at least one rejected candidate".into(),
        ));
    }
    if let Some(s) = scores.iter().chain(ref_scores).find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    let psi: Vec<f64> = scores
        .iter()
        .zip(ref_scores)
        .map(|(s, r)| config.beta * (s - r))
        .collect();
    let ranks = rank_candidates(&psi);
    let mut pairs = Vec::with_capacity(scores.len() - 1);
    for r in 1..scores.len() {
        let w_dist = if config.use_dist_weight {
            distance_weight(hops[0], hops[r])?
        } else {
            1.0
        };
        let w_rank = if config.use_rank_weight {
            rank_weight(ranks[0], ranks[r])
        } else {
            1.0
        };
        pairs.push(PairTerm {
            rejected: r,
            hop: hops[r],
            w_dist,
            w_rank,
            dpo_loss: dpo_pair_loss(psi[0], psi[r]),
        });
    }
    let sft = listwise_sft(scores, 0);
    let mut out = LossBreakdown {
        psi,
        ranks,
        pairs,
        sft_loss: sft,
        gamma: config.gamma,
        total: 0.0,
    };
    out.total = out.recomputed_total();
    Ok(out)
}

/// `dL/ds_i` for every candidate score, weights and ranks held fixed.
pub fn score_coefficients(scores: &[f64], breakdown: &LossBreakdown, config: &ObjectiveConfig) -> Vec<f64> {
    let mut coef = vec![0.0; scores.len()];
    for p in &breakdown.pairs {
        let margin = breakdown.psi[0] - breakdown.psi[p.rejected];
        // d/dΔ [−log σ(Δ)] = −σ(−Δ)
        let g = p.w_dist * p.w_rank * sigmoid(-margin) * config.beta;
        coef[0] -= g;
        coef[p.rejected] += g;
    }
    if config.gamma != 0.0 {
        let lse = log_sum_exp(scores);
        for (i, s) in scores.iter().enumerate() {
            let p = (s - lse).exp();
            coef[i] += config.gamma * (p - if i == 0 { 1.0 } else { 0.0 });
        }
    }
    coef
}

/// An instance with its inputs encoded and reference scores cached.
#[derive(Debug, Clone)]
pub struct EncodedInstance<P: Policy> {
    pub context: P::Context,
    pub candidates: Vec<P::Candidate>,
    pub hops: Vec<usize>,
    pub ref_scores: Vec<f64>,
}

impl<P: Policy> EncodedInstance<P> {
    pub fn new(policy: &P, reference: &PolicySnapshot, instance: &PreferenceInstance) -> Self {
        let context = policy.encode_context(instance.context());
        let candidates: Vec<P::Candidate> = instance
            .candidates
            .iter()
            .map(|c| policy.encode_candidate(&c.text))
            .collect();
        let ref_scores = candidates
            .iter()
            .map(|c| reference.score(policy, &context, c))
            .collect();
        EncodedInstance {
            context,
            candidates,
            hops: instance.hops(),
            ref_scores,
        }
    }

    pub fn scores(&self, policy: &P, params: &[f64]) -> Vec<f64> {
        self.candidates
            .iter()
            .map(|c| policy.score_with(params, &self.context, c))
            .collect()
    }

    pub fn loss(&self, policy: &P, params: &[f64], config: &ObjectiveConfig) -> Result<LossBreakdown> {
        loss_from_scores(&self.scores(policy, params), &self.ref_scores, &self.hops, config)
    }

    /// Adds `scale · dL/dθ` into `grad` and returns the breakdown.
    pub fn accumulate_grad(
        &self,
        policy: &P,
        params: &[f64],
        config: &ObjectiveConfig,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<LossBreakdown> {
        let scores = self.scores(policy, params);
        let breakdown = loss_from_scores(&scores, &self.ref_scores, &self.hops, config)?;
        let coef = score_coefficients(&scores, &breakdown, config);
        for (c, cand) in coef.iter().zip(&self.candidates) {
            if *c != 0.0 {
                policy.accumulate_grad(params, &self.context, cand, scale * c, grad);
            }
        }
        Ok(breakdown)
    }
}

pub fn hoprank_loss<P: Policy>(
    instance: &PreferenceInstance,
    policy: &P,
    reference: &PolicySnapshot,
    config: &ObjectiveConfig,
) -> Result<LossBreakdown> {
    EncodedInstance::new(policy, reference, instance).loss(policy, policy.params(), config)
}

pub fn hoprank_grad<P: Policy>(
    instance: &PreferenceInstance,
    policy: &P,
    reference: &PolicySnapshot,
    config: &ObjectiveConfig,
) -> Result<(Vec<f64>, LossBreakdown)> {
    let enc = EncodedInstance::new(policy, reference, instance);
    let mut grad = vec![0.0; policy.num_params()];
    let breakdown = enc.accumulate_grad(policy, policy.params(), config, 1.0, &mut grad)?;
    Ok((grad, breakdown))
}

#[derive(Serialize)]
struct BreakdownRecord<'a> {
    instance: usize,
    #[serde(flatten)]
    breakdown: &'a LossBreakdown,
}

/// One JSON line per `(instance index, breakdown)`.
pub fn write_breakdown_log(entries: &[(usize, LossBreakdown)], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (instance, breakdown) in entries {
        let line = serde_json::to_string(&BreakdownRecord {
            instance: *instance,
            breakdown,
        })?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn dpo_values() {
        assert!((dpo_pair_loss(0.3, 0.3) - LN2).abs() < 1e-15);
        // −ln σ(1) = ln(1 + e^{-1}) = 0.31326168751822286
        assert!((dpo_pair_loss(1.0, 0.0) - 0.313_261_687_518_222_9).abs() < 1e-15);
        // −ln σ(−50) = 50 + ln(1 + e^{−50})
        let big = dpo_pair_loss(0.0, 50.0);
        assert!((big - (50.0 + (-50f64).exp().ln_1p())).abs() < 1e-12);
        assert!(dpo_pair_loss(0.0, 700.0).is_finite());
        assert!(dpo_pair_loss(700.0, 0.0) > 0.0 || dpo_pair_loss(700.0, 0.0) == 0.0);
        assert!(dpo_pair_loss(1.0, 0.0) < dpo_pair_loss(0.5, 0.0));
    }

    #[test]
    fn weights() {
        assert_eq!(distance_weight(1, 2).unwrap(), 1.0);
        assert_eq!(distance_weight(1, 5).unwrap(), 0.25);
        assert_eq!(distance_weight(1, 3).unwrap(), 0.5);
        assert!(distance_weight(2, 2).is_err());
        assert_eq!(rank_weight(1, 2), 0.5);
        assert_eq!(rank_weight(2, 1), 0.5);
        assert_eq!(rank_weight(1, 3), 2.0 / 3.0);
        assert_eq!(rank_weight(2, 2), 0.0);
    }

    #[test]
    fn ranks_and_ties() {
        assert_eq!(rank_candidates(&[0.5, 0.1, 0.9]), vec![2, 3, 1]);
        assert_eq!(rank_candidates(&[0.0, 0.0, 0.0]), vec![1, 2, 3]);
        assert_eq!(rank_candidates(&[4.0]), vec![1]);
        assert_eq!(rank_candidates(&[1.0, 2.0, 1.0]), vec![2, 1, 3]);
    }

    #[test]
    fn sft_values() {
        assert!((listwise_sft(&[0.7, 0.7, 0.7], 0) - 3f64.ln()).abs() < 1e-15);
        assert!(listwise_sft(&[1000.0, 0.0, 0.0], 0) < 1e-300);
        // −ln(e² / (e² + e + 1))
        let oracle = -(2f64.exp() / (2f64.exp() + 1f64.exp() + 1.0)).ln();
        assert!((listwise_sft(&[2.0, 1.0, 0.0], 0) - oracle).abs() < 1e-15);
        assert!((oracle - 0.407_605_964_444_380_1).abs() < 1e-15);
    }

    #[test]
    fn equal_scores_golden_total() {
        let b = loss_from_scores(&[0.0; 3], &[0.0; 3], &[1, 2, 3], &ObjectiveConfig::default()).unwrap();
        let golden = 0.5 * LN2 + LN2 / 3.0 + 5.0 * 3f64.ln();
        assert!((b.total - golden).abs() < 1e-12);
        assert!((golden - 6.070_684_093_807_169).abs() < 1e-12);
        assert_eq!(b.ranks, vec![1, 2, 3]);
        assert_eq!(b.pairs[0].w_rank, 0.5);
        assert_eq!(b.pairs[1].w_dist, 0.5);
    }

    #[test]
    fn flags_off_reduces_to_plain_dpo() {
        let cfg = ObjectiveConfig {
            gamma: 0.0,
            use_dist_weight: false,
            use_rank_weight: false,
            ..Default::default()
        };
        let scores = [1.0, -2.0, 0.5];
        let refs = [0.2, 0.1, -0.3];
        let b = loss_from_scores(&scores, &refs, &[1, 2, 3], &cfg).unwrap();
        let psi: Vec<f64> = scores.iter().zip(&refs).map(|(s, r)| 0.1 * (s - r)).collect();
        let plain = dpo_pair_loss(psi[0], psi[1]) + dpo_pair_loss(psi[0], psi[2]);
        assert_eq!(b.total, plain);
        assert!(b.pairs.iter().all(|p| p.w_dist == 1.0 && p.w_rank == 1.0));
        assert_eq!(b.sft_contribution(), 0.0);
    }

    #[test]
    fn single_rejected_composition() {
        // ψ_c − ψ_r = 1 with β = 0.1 means a raw log-ratio gap of 10.
        let cfg = ObjectiveConfig {
            gamma: 0.0,
            ..Default::default()
        };
        let b = loss_from_scores(&[10.0, 0.0], &[0.0, 0.0], &[1, 2], &cfg).unwrap();
        assert!((b.total - 0.5 * 0.313_261_687_518_222_9).abs() < 1e-15);
        assert!((b.total - 0.156_631).abs() < 1e-6);
    }

    #[test]
    fn zero_rejected_is_an_error() {
        assert!(loss_from_scores(&[1.0], &[0.0], &[1], &ObjectiveConfig::default()).is_err());
        assert!(loss_from_scores(&[f64::NAN, 0.0], &[0.0, 0.0], &[1, 2], &ObjectiveConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ObjectiveConfig { beta: 0.0, ..Default::default() }.validate().is_err());
        assert!(ObjectiveConfig { gamma: -1.0, ..Default::default() }.validate().is_err());
        assert!(ObjectiveConfig::default().validate().is_ok());
    }
}
