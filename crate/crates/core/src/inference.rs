//! Few-shot classification by anchor voting.
//!
//! Each round draws one labeled anchor per class, presents them as candidates
//! for the query node in the training prompt format, and votes for the class
//! of the highest-scoring anchor. Voting runs for a fixed budget or, with
//! early exit, stops at the first checkpoint where one class holds strictly
//! more than a threshold fraction of the votes cast.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ClassId, NodeId, TextGraph};
use crate::policy::Policy;
use crate::sampler::{truncate_text, PromptTemplate, SamplerConfig};
use crate::seed;

/// How node texts are presented to the policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryFormat {
    pub template: PromptTemplate,
    pub truncate_text: usize,
}

impl From<&SamplerConfig> for QueryFormat {
    fn from(c: &SamplerConfig) -> Self {
        QueryFormat {
            template: c.template,
            truncate_text: c.truncate_text,
        }
    }
}

impl Default for QueryFormat {
    fn default() -> Self {
        (&SamplerConfig::default()).into()
    }
}

/// `K` labeled anchors per class. The only structure through which labels
/// reach the classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSet {
    per_class: Vec<Vec<NodeId>>,
}

impl AnchorSet {
    pub fn new(graph: &TextGraph, per_class: Vec<Vec<NodeId>>) -> Result<Self> {
        if per_class.is_empty() {
            return Err(Error::Eval("anchor set has no classes".into()));
        }
        for (c, bucket) in per_class.iter().enumerate() {
            if bucket.is_empty() {
                return Err(Error::Eval(format!("class {c} has no anchors")));
            }
            for &a in bucket {
                if a >= graph.num_nodes() || graph.label(a) != Some(c) {
                    return Err(Error::Eval(format!("anchor {a} is not labeled with class {c}")));
                }
            }
        }
        Ok(AnchorSet { per_class })
    }

    /// Draws `k` anchors per class from labeled nodes outside `exclude`.
    pub fn sample(graph: &TextGraph, k: usize, exclude: &HashSet<NodeId>, seed: u64) -> Result<Self> {
        let mut pools: Vec<Vec<NodeId>> = vec![Vec::new(); graph.num_classes()];
        for node in graph.nodes() {
            if let Some(c) = node.label {
                if !exclude.contains(&node.id) {
                    pools[c].push(node.id);
                }
            }
        }
        let mut per_class = Vec::with_capacity(pools.len());
        for (c, pool) in pools.iter().enumerate() {
            if pool.len() < k {
                return Err(Error::Eval(format!(
                    "class {c} has {} eligible nodes, {k} anchors requested",
                    pool.len()
                )));
            }
            let mut rng = seed::rng_from(seed::mix(seed, &[seed::tag("anchors"), c as u64]));
            per_class.push(pool.choose_multiple(&mut rng, k).copied().collect());
        }
        AnchorSet::new(graph, per_class)
    }

    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn class(&self, c: ClassId) -> &[NodeId] {
        &self.per_class[c]
    }

    /// Smallest bucket size.
    pub fn k(&self) -> usize {
        self.per_class.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.per_class.iter().any(|b| b.contains(&node))
    }

    pub fn all(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.per_class.iter().flatten().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoteConfig {
    /// Round budget `R_max`.
    pub rounds: usize,
    pub early_exit: bool,
    /// Checkpoint interval `Δ`.
    pub checkpoint: usize,
    /// Exit threshold `τ`; exit requires a strictly larger vote fraction.
    pub threshold: f64,
    pub seed: u64,
    /// Draw anchors with replacement across rounds.
    pub replacement: bool,
    /// Drop the query's graph neighbors from its anchor pools.
    pub exclude_query_neighbors: bool,
}

impl Default for VoteConfig {
    fn default() -> Self {
        VoteConfig {
            rounds: 100,
            early_exit: false,
            checkpoint: 10,
            threshold: 0.5,
            seed: 0,
            replacement: true,
            exclude_query_neighbors: false,
        }
    }
}

impl VoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("vote.rounds", "must be positive"));
        }
        if self.checkpoint == 0 || self.checkpoint > self.rounds {
            return Err(Error::config("vote.checkpoint", "must be in 1..=rounds"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config("vote.threshold", "must be in (0, 1)"));
        }
        Ok(())
    }

    pub fn validate_for(&self, anchors: &AnchorSet) -> Result<()> {
        self.validate()?;
        if !self.replacement && self.rounds > anchors.k() {
            return Err(Error::config(
                "vote.rounds",
                format!(
                    "{} rounds without replacement exceed the {} anchors per class",
                    self.rounds,
                    anchors.k()
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteState {
    pub votes: Vec<usize>,
    pub rounds_executed: usize,
    pub exited_early: bool,
    pub exit_round: Option<usize>,
    pub predictions: Vec<ClassId>,
}

impl VoteState {
    pub fn new(num_classes: usize) -> Self {
        VoteState {
            votes: vec![0; num_classes],
            rounds_executed: 0,
            exited_early: false,
            exit_round: None,
            predictions: Vec::new(),
        }
    }

    /// Class with most votes; ties go to the smallest class id.
    pub fn winner(&self) -> ClassId {
        argmax_first(self.votes.iter().map(|&v| v as f64))
    }

    pub fn record(&mut self, class: ClassId) {
        self.votes[class] += 1;
        self.rounds_executed += 1;
        self.predictions.push(class);
    }

    /// Whether the tally after `rounds_executed` rounds meets the exit rule.
    pub fn exceeds(&self, threshold: f64) -> bool {
        let t = self.rounds_executed;
        t > 0 && self.votes.iter().any(|&v| v as f64 / t as f64 > threshold)
    }
}

/// Index of the first maximum.
pub fn argmax_first(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Runs the voting loop with `round` supplying the winning class of each
/// zero-based round.
pub fn run_votes(
    num_classes: usize,
    config: &VoteConfig,
    mut round: impl FnMut(usize) -> Result<ClassId>,
) -> Result<VoteState> {
    let mut state = VoteState::new(num_classes);
    while state.rounds_executed < config.rounds {
        let c = round(state.rounds_executed)?;
        if c >= num_classes {
            return Err(Error::Contract(format!("round predicted class {c} of {num_classes}")));
        }
        state.record(c);
        let t = state.rounds_executed;
        if config.early_exit && t.is_multiple_of(config.checkpoint) && state.exceeds(config.threshold) {
            state.exited_early = true;
            state.exit_round = Some(t);
            break;
        }
    }
    Ok(state)
}

pub fn round_seed(config: &VoteConfig, query: NodeId, round: usize) -> u64 {
    seed::mix(config.seed, &[query as u64, round as u64])
}

fn anchor_pools(
    graph: &TextGraph,
    query: NodeId,
    anchors: &AnchorSet,
    config: &VoteConfig,
) -> Vec<Vec<NodeId>> {
    (0..anchors.num_classes())
        .map(|c| {
            let full = anchors.class(c);
            if !config.exclude_query_neighbors {
                return full.to_vec();
            }
            let kept: Vec<NodeId> = full
                .iter()
                .copied()
                .filter(|&a| !graph.are_adjacent(query, a))
                .collect();
            if kept.is_empty() {
                full.to_vec()
            } else {
                kept
            }
        })
        .collect()
}

/// One anchor per class for the given round.
fn draw_round(pools: &[Vec<NodeId>], query: NodeId, round: usize, config: &VoteConfig) -> Vec<NodeId> {
    if config.replacement {
        let mut rng = seed::rng_from(round_seed(config, query, round));
        pools.iter().map(|p| p[rng.gen_range(0..p.len())]).collect()
    } else {
        pools
            .iter()
            .enumerate()
            .map(|(c, p)| {
                let mut perm = p.clone();
                let mut rng = seed::rng_from(seed::mix(config.seed, &[query as u64, seed::tag("perm"), c as u64]));
                perm.shuffle(&mut rng);
                perm[round % perm.len()]
            })
            .collect()
    }
}

/// The context string the policy sees for a query node.
pub fn query_context(graph: &TextGraph, query: NodeId, format: &QueryFormat) -> String {
    format
        .template
        .source_block(&truncate_text(graph.text(query), format.truncate_text))
}

/// Renders the inference prompt: the query as source, `sampled` anchors
/// (index = class) as candidates in an order shuffled by `shuffle_seed`.
/// Returns the prompt and the class shown in each slot.
pub fn render_query_prompt(
    graph: &TextGraph,
    query: NodeId,
    sampled: &[NodeId],
    shuffle_seed: u64,
    format: &QueryFormat,
) -> (String, Vec<ClassId>) {
    let mut slot_classes: Vec<ClassId> = (0..sampled.len()).collect();
    slot_classes.shuffle(&mut seed::rng_from(seed::mix(shuffle_seed, &[seed::tag("slots")])));
    let texts: Vec<String> = slot_classes
        .iter()
        .map(|&c| truncate_text(graph.text(sampled[c]), format.truncate_text))
        .collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let source = truncate_text(graph.text(query), format.truncate_text);
    (format.template.render(&source, &refs), slot_classes)
}

/// Classifies `query` against one sampled anchor per class (`sampled[c]` has
/// class `c`). Scores attach to anchor texts, so slot order cannot change the
/// result; score ties go to the smallest class id.
pub fn classify_round<P: Policy>(
    policy: &P,
    graph: &TextGraph,
    query: NodeId,
    sampled: &[NodeId],
    shuffle_seed: u64,
    format: &QueryFormat,
) -> Result<ClassId> {
    if sampled.contains(&query) {
        return Err(Error::Contract(format!("query {query} is one of the sampled anchors")));
    }
    let (prompt, slot_classes) = render_query_prompt(graph, query, sampled, shuffle_seed, format);
    let context = format
        .template
        .extract_source_block(&prompt)
        .ok_or_else(|| Error::Contract("rendered prompt has no source section".into()))?;
    let ctx = policy.encode_context(context);
    let mut scores = vec![f64::NEG_INFINITY; sampled.len()];
    for &c in &slot_classes {
        let text = truncate_text(graph.text(sampled[c]), format.truncate_text);
        scores[c] = policy.score(&ctx, &policy.encode_candidate(&text));
    }
    Ok(argmax_first(scores))
}

/// Majority vote over anchor rounds, with early exit when `config.early_exit`.
pub fn vote_classify<P: Policy>(
    policy: &P,
    graph: &TextGraph,
    query: NodeId,
    anchors: &AnchorSet,
    config: &VoteConfig,
    format: &QueryFormat,
) -> Result<(ClassId, VoteState)> {
    config.validate_for(anchors)?;
    if anchors.contains(query) {
        return Err(Error::Contract(format!("query {query} is an anchor")));
    }
    let pools = anchor_pools(graph, query, anchors, config);
    let ctx = policy.encode_context(&query_context(graph, query, format));
    let mut cache: HashMap<NodeId, f64> = HashMap::new();
    let mut score_of = |a: NodeId| -> f64 {
        *cache.entry(a).or_insert_with(|| {
            let text = truncate_text(graph.text(a), format.truncate_text);
            policy.score(&ctx, &policy.encode_candidate(&text))
        })
    };
    let state = run_votes(anchors.num_classes(), config, |round| {
        let sampled = draw_round(&pools, query, round, config);
        Ok(argmax_first(sampled.iter().map(|&a| score_of(a))))
    })?;
    Ok((state.winner(), state))
}

/// Anchors drawn in each round of [`vote_classify`] for `query`.
pub fn sampled_anchors(
    graph: &TextGraph,
    query: NodeId,
    anchors: &AnchorSet,
    config: &VoteConfig,
    round: usize,
) -> Vec<NodeId> {
    draw_round(&anchor_pools(graph, query, anchors, config), query, round, config)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub query_id: NodeId,
    pub pred: ClassId,
    pub votes: Vec<usize>,
    pub rounds: usize,
    pub exited_early: bool,
}

impl Prediction {
    pub fn from_state(query: NodeId, state: &VoteState) -> Self {
        Prediction {
            query_id: query,
            pred: state.winner(),
            votes: state.votes.clone(),
            rounds: state.rounds_executed,
            exited_early: state.exited_early,
        }
    }
}

/// Classifies every query; order of the output follows `queries`.
pub fn predict_all<P: Policy>(
    policy: &P,
    graph: &TextGraph,
    queries: &[NodeId],
    anchors: &AnchorSet,
    config: &VoteConfig,
    format: &QueryFormat,
) -> Result<Vec<(Prediction, VoteState)>> {
    queries
        .par_iter()
        .map(|&q| {
            vote_classify(policy, graph, q, anchors, config, format)
                .map(|(_, state)| (Prediction::from_state(q, &state), state))
        })
        .collect()
}

pub fn write_predictions(predictions: &[Prediction], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in predictions {
        writeln!(w, "{}", serde_json::to_string(p)?).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
