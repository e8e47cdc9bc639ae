#![allow(dead_code)]

pub mod golden;

use std::collections::HashMap;

use hoprank::graph::{Node, NodeId, TextGraph};
use hoprank::graph::{generate_synthetic, SyntheticSpec};
use hoprank::objective::{hoprank_grad, LossBreakdown, ObjectiveConfig};
use hoprank::policy::{BilinearScorer, Policy, PolicySnapshot, ScorerConfig};
use hoprank::sampler::{build_dataset, PreferenceInstance, SamplerConfig};
use hoprank::seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Graph on `n` nodes with texts `"node{i} ..."` and optional labels.
pub fn graph_from(n: usize, edges: &[(usize, usize)], labels: Option<&[usize]>) -> TextGraph {
    let classes = labels.map_or(0, |l| l.iter().max().map_or(0, |m| m + 1));
    let nodes = (0..n)
        .map(|i| Node {
            id: i,
            text: format!("title {i}\nnode{i} words w{} w{}", i % 7, i % 11),
            label: labels.map(|l| l[i]),
        })
        .collect();
    let names = (0..classes).map(|c| c.to_string()).collect();
    TextGraph::from_edges(nodes, edges.iter().copied(), names).unwrap().0
}

/// Erdős–Rényi edge list.
pub fn random_edges(n: usize, p: f64, seed: u64) -> Vec<(usize, usize)> {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// All-pairs shortest path lengths by Floyd–Warshall; `usize::MAX` when unreachable.
pub fn all_pairs(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    const INF: usize = usize::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(u, v) in edges {
        if u != v {
            d[u][v] = 1;
            d[v][u] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d.into_iter()
        .map(|row| row.into_iter().map(|x| if x >= INF { usize::MAX } else { x }).collect())
        .collect()
}

/// Nodes at exactly distance `h` from `s`, ascending.
pub fn oracle_hop(dist: &[Vec<usize>], s: NodeId, h: usize) -> Vec<NodeId> {
    (0..dist.len()).filter(|&v| dist[s][v] == h).collect()
}

pub fn sorted(xs: &[NodeId]) -> Vec<NodeId> {
    let mut v = xs.to_vec();
    v.sort_unstable();
    v
}

/// Scores candidates by a fixed per-text table, or pseudo-randomly per
/// (context, candidate) pair when the table has no entry.
pub struct TablePolicy {
    pub table: HashMap<String, f64>,
    pub salt: u64,
}

impl Policy for TablePolicy {
    type Context = String;
    type Candidate = String;

    fn encode_context(&self, text: &str) -> String {
        text.to_string()
    }

    fn encode_candidate(&self, text: &str) -> String {
        text.to_string()
    }

    fn score_with(&self, _: &[f64], ctx: &String, cand: &String) -> f64 {
        match self.table.get(cand) {
            Some(&s) => s,
            None => {
                let h = seed::mix(self.salt, &[seed::tag(ctx), seed::tag(cand)]);
                (h >> 11) as f64 / (1u64 << 53) as f64
            }
        }
    }

    fn accumulate_grad(&self, _: &[f64], _: &String, _: &String, _: f64, _: &mut [f64]) {}

    fn params(&self) -> &[f64] {
        &[]
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut []
    }
}

pub const FD_H: f64 = 1e-5;

pub fn random_scorer(seed: u64, scale: f64) -> BilinearScorer {
    let config = ScorerConfig {
        dim: 8,
        ..Default::default()
    };
    let mut r = rng(seed);
    let n = config.dim * config.dim + 1;
    let params = (0..n).map(|_| r.gen_range(-scale..scale)).collect();
    BilinearScorer::from_params(config, params).unwrap()
}

pub fn fd_instances() -> Vec<PreferenceInstance> {
    let spec = SyntheticSpec {
        nodes_per_class: 20,
        p_intra: 0.2,
        p_inter: 0.02,
        ..Default::default()
    };
    let g = generate_synthetic(&spec).unwrap();
    let cfg = SamplerConfig {
        hops_used: [2, 3].into_iter().collect(),
        seed: 5,
        ..Default::default()
    };
    let (ds, _) = build_dataset(&g, &cfg).unwrap();
    ds.into_iter().step_by(7).take(24).collect()
}

/// Loss written out directly from the definitions, with pair weights fixed.
pub fn oracle_loss(
    policy: &BilinearScorer,
    params: &[f64],
    reference: &PolicySnapshot,
    inst: &PreferenceInstance,
    cfg: &ObjectiveConfig,
    frozen: &LossBreakdown,
) -> f64 {
    let x = policy.encode_context(inst.context());
    let ys: Vec<_> = inst.candidates.iter().map(|c| policy.encode_candidate(&c.text)).collect();
    let s: Vec<f64> = ys.iter().map(|y| policy.score_with(params, &x, y)).collect();
    let r: Vec<f64> = ys.iter().map(|y| reference.score(policy, &x, y)).collect();
    let mut total = 0.0;
    for p in &frozen.pairs {
        let margin = cfg.beta * ((s[0] - r[0]) - (s[p.rejected] - r[p.rejected]));
        total += p.w_dist * p.w_rank * (1.0 + (-margin).exp()).ln();
    }
    let lse = s.iter().map(|v| v.exp()).sum::<f64>().ln();
    total + cfg.gamma * (lse - s[0])
}

pub fn fd_close(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= 1e-8 || diff <= 1e-4 * analytic.abs().max(numeric.abs())
}

/// Compares `hoprank_grad` with central differences of [`oracle_loss`] on
/// every parameter of every instance. Returns the number of components checked.
pub fn fd_max_error(insts: &[PreferenceInstance], cfg: &ObjectiveConfig) -> Result<usize, String> {
    let mut checked = 0;
    for (k, inst) in insts.iter().enumerate() {
        let mut policy = random_scorer(100 + k as u64, 1.0);
        let reference = random_scorer(200 + k as u64, 1.0).snapshot();
        let (grad, breakdown) = hoprank_grad(inst, &policy, &reference, cfg).map_err(|e| e.to_string())?;
        let at = oracle_loss(&policy, policy.params(), &reference, inst, cfg, &breakdown);
        if (at - breakdown.total).abs() > 1e-10 * at.abs().max(1.0) {
            return Err(format!("instance {k}: oracle loss {at} vs {}", breakdown.total));
        }
        for (i, &analytic) in grad.iter().enumerate() {
            let orig = policy.params()[i];
            policy.params_mut()[i] = orig + FD_H;
            let plus = oracle_loss(&policy, policy.params(), &reference, inst, cfg, &breakdown);
            policy.params_mut()[i] = orig - FD_H;
            let minus = oracle_loss(&policy, policy.params(), &reference, inst, cfg, &breakdown);
            policy.params_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_H);
            if !fd_close(analytic, numeric) {
                return Err(format!("instance {k}, param {i}: analytic {analytic} numeric {numeric}"));
            }
            checked += 1;
        }
    }
    Ok(checked)
}
