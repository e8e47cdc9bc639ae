//! Offline construction of listwise preference instances from graph edges.
//!
//! For an oriented edge `(u, v)` the true neighbor `v` is the chosen
//! candidate and one node is drawn uniformly from each configured exact-hop
//! set `N_h(u)` as a rejected candidate. Empty hops are skipped; an edge with
//! every configured hop empty yields no instance.

mod export;
mod prompt;

pub use export::{
    export_dataset, import_dataset, instance_from_line, instance_to_line, write_manifest, DatasetManifest,
    TrainingMetadata,
};
pub use prompt::{slot_letter, truncate_text, PromptTemplate};

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{exact_hop_sets, HopNeighborhoods, NodeId, TextGraph};
use crate::seed;

/// Hop tag used for every negative when negatives ignore hop structure.
pub const PSEUDO_DISTANCE: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub node: NodeId,
    /// 1 for the chosen candidate, the exact hop distance for rejected ones.
    pub hop: usize,
    /// Zero-based position after shuffling (`0` is `A.`).
    pub slot: usize,
    /// Truncated node text as shown in the prompt.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceInstance {
    pub source: NodeId,
    /// Chosen candidate first, then rejected candidates in ascending hop order.
    pub candidates: Vec<Candidate>,
    pub prompt: String,
    pub rng_seed: u64,
    pub max_hop: usize,
    pub template: PromptTemplate,
}

impl PreferenceInstance {
    pub fn chosen(&self) -> &Candidate {
        &self.candidates[0]
    }

    pub fn rejected(&self) -> &[Candidate] {
        &self.candidates[1..]
    }

    pub fn hops(&self) -> Vec<usize> {
        self.candidates.iter().map(|c| c.hop).collect()
    }

    /// The source section of the prompt; what the policy is conditioned on.
    pub fn context(&self) -> &str {
        self.template
            .extract_source_block(&self.prompt)
            .unwrap_or(&self.prompt)
    }

    /// Candidates ordered by slot.
    pub fn by_slot(&self) -> Vec<&Candidate> {
        let mut out: Vec<&Candidate> = self.candidates.iter().collect();
        out.sort_by_key(|c| c.slot);
        out
    }

    /// Structural checks that do not need the graph.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.candidates.is_empty() || self.candidates[0].hop != 1 {
            return Err("first candidate must be the chosen one with hop 1".into());
        }
        if self.candidates[1..].iter().any(|c| c.hop < 2) {
            return Err("rejected candidates must have hop >= 2".into());
        }
        let mut slots: Vec<usize> = self.candidates.iter().map(|c| c.slot).collect();
        slots.sort_unstable();
        if slots.iter().enumerate().any(|(i, &s)| i != s) {
            return Err("slots must be a permutation of 0..n".into());
        }
        let mut ids = HashSet::new();
        for c in &self.candidates {
            if c.node == self.source {
                return Err(format!("candidate {} equals the source", c.node));
            }
            if !ids.insert(c.node) {
                return Err(format!("candidate {} appears twice", c.node));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Each undirected edge is tried with either endpoint as source.
    #[default]
    Both,
    /// Only `(u, v)` with `u < v`.
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NegativeMode {
    /// One draw from each configured exact-hop set.
    #[default]
    Hierarchical,
    /// Draws uniformly from all non-neighbors, tagged with [`PSEUDO_DISTANCE`].
    UniformNonNeighbor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub max_hop: usize,
    pub hops_used: BTreeSet<usize>,
    pub truncate_text: usize,
    pub seed: u64,
    pub template: PromptTemplate,
    pub orientation: Orientation,
    pub negatives_per_hop: usize,
    pub negative_mode: NegativeMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            max_hop: 3,
            hops_used: [2, 3].into_iter().collect(),
            truncate_text: 1000,
            seed: 0,
            template: PromptTemplate::Citation,
            orientation: Orientation::Both,
            negatives_per_hop: 1,
            negative_mode: NegativeMode::Hierarchical,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_hop < 2 {
            return Err(Error::config("sampler.max_hop", "must be at least 2"));
        }
        if self.hops_used.is_empty() {
            return Err(Error::config("sampler.hops_used", "must not be empty"));
        }
        if let Some(h) = self.hops_used.iter().find(|&&h| h < 2 || h > self.max_hop) {
            return Err(Error::config(
                "sampler.hops_used",
                format!("hop {h} outside 2..={}", self.max_hop),
            ));
        }
        if self.negatives_per_hop == 0 {
            return Err(Error::config("sampler.negatives_per_hop", "must be positive"));
        }
        if self.truncate_text == 0 {
            return Err(Error::config("sampler.truncate_text", "must be positive"));
        }
        Ok(())
    }

    /// Seed for the oriented edge `(u, v)`.
    pub fn edge_seed(&self, u: NodeId, v: NodeId) -> u64 {
        seed::mix(self.seed, &[u as u64, v as u64])
    }
}

/// Counts from one dataset build.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub attempted: usize,
    pub instances: usize,
    pub skipped: usize,
    /// Attempts where hop `h` was non-empty.
    pub hop_available: BTreeMap<usize, usize>,
    /// Attempts where hop `h` was empty and therefore skipped.
    pub hop_empty: BTreeMap<usize, usize>,
    /// Rejected candidates emitted per hop tag.
    pub hop_sampled: BTreeMap<usize, usize>,
}

/// Builds the instance for oriented edge `(u, v)`, or `Ok(None)` when every
/// configured hop is empty.
pub fn build_instance(
    graph: &TextGraph,
    (u, v): (NodeId, NodeId),
    hops: &HopNeighborhoods,
    config: &SamplerConfig,
    rng_seed: u64,
) -> Result<Option<PreferenceInstance>> {
    if !graph.are_adjacent(u, v) {
        return Err(Error::Contract(format!("({u}, {v}) is not an edge")));
    }
    if hops.source != u || hops.max_hop() < config.max_hop {
        return Err(Error::Contract(format!(
            "hop sets for {} up to {} do not match source {u} with k = {}",
            hops.source,
            hops.max_hop(),
            config.max_hop
        )));
    }
    let mut rng = seed::rng_from(rng_seed);

    let mut picks: Vec<(NodeId, usize)> = vec![(v, 1)];
    match config.negative_mode {
        NegativeMode::Hierarchical => {
            for &h in &config.hops_used {
                let pool = hops.get(h);
                let take = config.negatives_per_hop.min(pool.len());
                let mut chosen: Vec<NodeId> = pool.choose_multiple(&mut rng, take).copied().collect();
                chosen.sort_unstable();
                picks.extend(chosen.into_iter().map(|n| (n, h)));
            }
        }
        NegativeMode::UniformNonNeighbor => {
            let wanted = config.hops_used.len() * config.negatives_per_hop;
            for n in sample_non_neighbors(graph, u, wanted, &mut rng) {
                picks.push((n, PSEUDO_DISTANCE));
            }
        }
    }
    if picks.len() == 1 {
        return Ok(None);
    }

    let mut slots: Vec<usize> = (0..picks.len()).collect();
    slots.shuffle(&mut rng);
    let candidates: Vec<Candidate> = picks
        .into_iter()
        .zip(slots)
        .map(|((node, hop), slot)| Candidate {
            node,
            hop,
            slot,
            text: truncate_text(graph.text(node), config.truncate_text),
        })
        .collect();
    let mut instance = PreferenceInstance {
        source: u,
        candidates,
        prompt: String::new(),
        rng_seed,
        max_hop: config.max_hop,
        template: config.template,
    };
    instance.prompt = render_prompt(&instance, graph, config);
    Ok(Some(instance))
}

fn sample_non_neighbors(
    graph: &TextGraph,
    u: NodeId,
    wanted: usize,
    rng: &mut impl Rng,
) -> Vec<NodeId> {
    let n = graph.num_nodes();
    let available = n - 1 - graph.neighbors(u).len();
    let take = wanted.min(available);
    let eligible = |x: NodeId| x != u && !graph.are_adjacent(u, x);
    let mut out: Vec<NodeId> = if available <= 4 * take.max(1) {
        let pool: Vec<NodeId> = (0..n).filter(|&x| eligible(x)).collect();
        pool.choose_multiple(rng, take).copied().collect()
    } else {
        let mut picked = Vec::with_capacity(take);
        while picked.len() < take {
            let x = rng.gen_range(0..n);
            if eligible(x) && !picked.contains(&x) {
                picked.push(x);
            }
        }
        picked
    };
    out.sort_unstable();
    out
}

/// Renders the training prompt with candidates lettered in slot order.
pub fn render_prompt(instance: &PreferenceInstance, graph: &TextGraph, config: &SamplerConfig) -> String {
    let source = truncate_text(graph.text(instance.source), config.truncate_text);
    let ordered: Vec<&str> = instance.by_slot().into_iter().map(|c| c.text.as_str()).collect();
    config.template.render(&source, &ordered)
}

/// Oriented edges tried by [`build_dataset`], in deterministic order.
pub fn oriented_edges(graph: &TextGraph, orientation: Orientation) -> Vec<(NodeId, NodeId)> {
    graph
        .edges()
        .flat_map(|(u, v)| match orientation {
            Orientation::Both => vec![(u, v), (v, u)],
            Orientation::Forward => vec![(u, v)],
        })
        .collect()
}

/// Instance built from one edge, plus per-hop (hop, sampled) flags.
type EdgeOutcome = (Option<PreferenceInstance>, Vec<(usize, bool)>);

pub fn build_dataset(graph: &TextGraph, config: &SamplerConfig) -> Result<(Vec<PreferenceInstance>, BuildReport)> {
    config.validate()?;
    if graph.num_edges() == 0 {
        return Err(Error::Dataset("graph has no edges".into()));
    }
    let edges = oriented_edges(graph, config.orientation);
    let results: Vec<EdgeOutcome> = edges
        .par_iter()
        .map(|&(u, v)| {
            let hops = exact_hop_sets(graph, u, config.max_hop);
            let avail = config
                .hops_used
                .iter()
                .map(|&h| (h, !hops.get(h).is_empty()))
                .collect();
            let inst = build_instance(graph, (u, v), &hops, config, config.edge_seed(u, v))?;
            Ok((inst, avail))
        })
        .collect::<Result<_>>()?;

    let mut report = BuildReport {
        attempted: results.len(),
        ..Default::default()
    };
    let mut instances = Vec::new();
    for (inst, avail) in results {
        for (h, ok) in avail {
            let slot = if ok { &mut report.hop_available } else { &mut report.hop_empty };
            *slot.entry(h).or_default() += 1;
        }
        match inst {
            Some(inst) => {
                for c in inst.rejected() {
                    *report.hop_sampled.entry(c.hop).or_default() += 1;
                }
                instances.push(inst);
            }
            None => report.skipped += 1,
        }
    }
    report.instances = instances.len();
    if instances.is_empty() {
        return Err(Error::Dataset(format!(
            "no preference instances from {} oriented edges; use a denser graph or a smaller hop budget",
            report.attempted
        )));
    }
    Ok((instances, report))
}
