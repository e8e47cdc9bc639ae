//! Accuracy evaluation, ablations, sweeps and report assembly.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{ClassId, HopMatch, NodeId, TextGraph};
use crate::inference::{predict_all, AnchorSet, Prediction, QueryFormat, VoteConfig, VoteState};
use crate::objective::{EncodedInstance, LossBreakdown, ObjectiveConfig};
use crate::policy::{BilinearScorer, ModelConfig, Policy, PolicySnapshot};
use crate::sampler::{build_dataset, BuildReport, NegativeMode, PreferenceInstance, SamplerConfig};
use crate::seed;
use crate::trainer::{train, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Anchors per class `K`.
    pub shots: usize,
    /// Explicit test nodes; when absent, `test_size` labeled nodes are drawn.
    pub test_nodes: Option<Vec<NodeId>>,
    pub test_size: usize,
    pub runs: usize,
    pub seed: u64,
    pub rounds_grid: Vec<usize>,
    pub hop_grid: Vec<Vec<usize>>,
    pub beta_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            shots: 20,
            test_nodes: None,
            test_size: 150,
            runs: 5,
            seed: 0,
            rounds_grid: vec![1, 5, 10, 25, 50, 100],
            hop_grid: vec![vec![2], vec![2, 3], vec![2, 3, 4]],
            beta_grid: Vec::new(),
            gamma_grid: Vec::new(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::config("eval.shots", "must be positive"));
        }
        if self.runs == 0 {
            return Err(Error::config("eval.runs", "must be positive"));
        }
        if self.test_nodes.is_none() && self.test_size == 0 {
            return Err(Error::config("eval.test_size", "must be positive"));
        }
        if self.rounds_grid.contains(&0) {
            return Err(Error::config("eval.rounds_grid", "round counts must be positive"));
        }
        if self.hop_grid.iter().any(|h| h.is_empty() || h.iter().any(|&x| x < 2)) {
            return Err(Error::config("eval.hop_grid", "each entry needs hops of at least 2"));
        }
        Ok(())
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        seed::mix(self.seed, &[seed::tag("run"), run as u64])
    }
}

/// Every setting needed to go from a graph to evaluated predictions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Experiment {
    pub sampler: SamplerConfig,
    pub objective: ObjectiveConfig,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub vote: VoteConfig,
    pub eval: EvalConfig,
}


impl Experiment {
    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.objective.validate()?;
        self.train.validate()?;
        self.model.validate()?;
        self.vote.validate()?;
        self.eval.validate()
    }

    pub fn format(&self) -> QueryFormat {
        (&self.sampler).into()
    }
}

/// Exact-match fraction.
pub fn accuracy(predictions: &[ClassId], labels: &[ClassId]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Eval(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Eval("no predictions".into()));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Mean and sample standard deviation over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl RunStats {
    pub fn new(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / n };
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        RunStats { values, mean, std }
    }
}

/// Deterministic test split of labeled nodes, sorted by id.
pub fn test_split(graph: &TextGraph, config: &EvalConfig) -> Result<Vec<NodeId>> {
    if let Some(nodes) = &config.test_nodes {
        if let Some(&bad) = nodes.iter().find(|&&n| n >= graph.num_nodes() || graph.label(n).is_none()) {
            return Err(Error::Eval(format!("test node {bad} is missing or unlabeled")));
        }
        let mut out = nodes.clone();
        out.sort_unstable();
        out.dedup();
        return Ok(out);
    }
    let mut labeled: Vec<NodeId> = graph.nodes().iter().filter(|n| n.label.is_some()).map(|n| n.id).collect();
    if labeled.len() < config.test_size {
        return Err(Error::Eval(format!(
            "{} labeled nodes, test split of {} requested",
            labeled.len(),
            config.test_size
        )));
    }
    labeled.shuffle(&mut seed::rng_from(seed::mix(config.seed, &[seed::tag("test-split")])));
    let mut out = labeled[..config.test_size].to_vec();
    out.sort_unstable();
    Ok(out)
}

pub fn labels_of(graph: &TextGraph, nodes: &[NodeId]) -> Result<Vec<ClassId>> {
    nodes
        .iter()
        .map(|&n| graph.label(n).ok_or_else(|| Error::Eval(format!("node {n} has no label"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub seed: u64,
    pub accuracy: f64,
    pub mean_rounds: f64,
    pub predictions: Vec<Prediction>,
    #[serde(skip)]
    pub states: Vec<VoteState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub runs: Vec<EvalRun>,
    pub accuracy: RunStats,
    pub mean_rounds: f64,
}

/// Anchors for run `run`, disjoint from `test`.
pub fn run_anchors(graph: &TextGraph, test: &[NodeId], config: &EvalConfig, run: usize) -> Result<AnchorSet> {
    let exclude: HashSet<NodeId> = test.iter().copied().collect();
    AnchorSet::sample(graph, config.shots, &exclude, config.run_seed(run))
}

/// Vote settings for run `run`.
pub fn run_vote(vote: &VoteConfig, eval: &EvalConfig, run: usize) -> VoteConfig {
    VoteConfig {
        seed: seed::mix(vote.seed, &[eval.run_seed(run)]),
        ..vote.clone()
    }
}

/// Few-shot evaluation over `eval.runs` anchor draws.
pub fn evaluate<P: Policy>(
    policy: &P,
    graph: &TextGraph,
    test: &[NodeId],
    vote: &VoteConfig,
    eval: &EvalConfig,
    format: &QueryFormat,
) -> Result<Evaluation> {
    let labels = labels_of(graph, test)?;
    let mut runs = Vec::with_capacity(eval.runs);
    for r in 0..eval.runs {
        let anchors = run_anchors(graph, test, eval, r)?;
        if let Some(&q) = test.iter().find(|&&q| anchors.contains(q)) {
            return Err(Error::Eval(format!("test node {q} is also an anchor")));
        }
        let vc = run_vote(vote, eval, r);
        let out = predict_all(policy, graph, test, &anchors, &vc, format)?;
        let preds: Vec<ClassId> = out.iter().map(|(p, _)| p.pred).collect();
        let mean_rounds = out.iter().map(|(p, _)| p.rounds as f64).sum::<f64>() / out.len() as f64;
        let (predictions, states) = out.into_iter().unzip();
        runs.push(EvalRun {
            seed: vc.seed,
            accuracy: accuracy(&preds, &labels)?,
            mean_rounds,
            predictions,
            states,
        });
    }
    let accuracy = RunStats::new(runs.iter().map(|r| r.accuracy).collect());
    let mean_rounds = runs.iter().map(|r| r.mean_rounds).sum::<f64>() / runs.len() as f64;
    Ok(Evaluation {
        runs,
        accuracy,
        mean_rounds,
    })
}

/// A trained (or initial) policy with the logs of how it was produced.
#[derive(Debug, Clone)]
pub struct TrainedPolicy {
    pub policy: BilinearScorer,
    pub dataset: Vec<PreferenceInstance>,
    pub build: BuildReport,
    pub train: Option<TrainReport>,
    /// Loss breakdown of every instance under the final parameters.
    pub breakdowns: Vec<LossBreakdown>,
}

/// Loss breakdowns of `dataset` under `policy` against `reference`.
pub fn breakdown_log<P: Policy>(
    policy: &P,
    reference: &PolicySnapshot,
    dataset: &[PreferenceInstance],
    objective: &ObjectiveConfig,
) -> Result<Vec<LossBreakdown>> {
    use rayon::prelude::*;
    dataset
        .par_iter()
        .map(|inst| EncodedInstance::new(policy, reference, inst).loss(policy, policy.params(), objective))
        .collect()
}

/// Samples the preference dataset and, when `do_train`, trains a policy on it.
pub fn train_pipeline(graph: &TextGraph, exp: &Experiment, do_train: bool) -> Result<TrainedPolicy> {
    let (dataset, build) = build_dataset(graph, &exp.sampler)?;
    let mut policy = exp.model.init();
    let reference = policy.snapshot();
    let report = if do_train {
        Some(train(&mut policy, &dataset, &exp.objective, &exp.train)?)
    } else {
        None
    };
    let breakdowns = breakdown_log(&policy, &reference, &dataset, &exp.objective)?;
    Ok(TrainedPolicy {
        policy,
        dataset,
        build,
        train: report,
        breakdowns,
    })
}

/// Ranges seen in loss-breakdown logs and vote states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSummary {
    pub pairs: usize,
    pub w_dist_min: f64,
    pub w_dist_max: f64,
    pub w_rank_min: f64,
    pub w_rank_max: f64,
    pub sft_contribution_max: f64,
    pub rounds_min: usize,
    pub rounds_max: usize,
}

impl LogSummary {
    pub fn from_logs(breakdowns: &[LossBreakdown], states: &[VoteState]) -> Self {
        let pairs = breakdowns.iter().flat_map(|b| &b.pairs);
        let fold = |f: fn(&crate::objective::PairTerm) -> f64| {
            pairs
                .clone()
                .map(f)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let (w_dist_min, w_dist_max) = fold(|p| p.w_dist);
        let (w_rank_min, w_rank_max) = fold(|p| p.w_rank);
        LogSummary {
            pairs: pairs.clone().count(),
            w_dist_min,
            w_dist_max,
            w_rank_min,
            w_rank_max,
            sft_contribution_max: breakdowns
                .iter()
                .map(|b| b.sft_contribution().abs())
                .fold(0.0, f64::max),
            rounds_min: states.iter().map(|s| s.rounds_executed).min().unwrap_or(0),
            rounds_max: states.iter().map(|s| s.rounds_executed).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ablation {
    pub name: &'static str,
    pub experiment: Experiment,
    pub train: bool,
}

/// The full model followed by one variant per removed component.
pub fn ablation_matrix(base: &Experiment) -> Vec<Ablation> {
    let variant = |name, f: &dyn Fn(&mut Experiment), train| {
        let mut experiment = base.clone();
        f(&mut experiment);
        Ablation { name, experiment, train }
    };
    vec![
        variant("full", &|_| {}, true),
        variant(
            "w/o hierarchical sampling",
            &|e| e.sampler.negative_mode = NegativeMode::UniformNonNeighbor,
            true,
        ),
        variant("w/o self-supervised training", &|_| {}, false),
        variant(
            "w/o ensemble",
            &|e| {
                e.vote.rounds = e.eval.shots;
                e.vote.replacement = false;
                e.vote.early_exit = false;
                e.vote.checkpoint = e.vote.checkpoint.min(e.vote.rounds);
            },
            true,
        ),
        variant("w/o w_dist", &|e| e.objective.use_dist_weight = false, true),
        variant("w/o w_rank", &|e| e.objective.use_rank_weight = false, true),
        variant("w/o SFT", &|e| e.objective.gamma = 0.0, true),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub name: String,
    pub accuracy: RunStats,
    pub mean_rounds: f64,
    pub logs: LogSummary,
}

pub fn run_ablations(graph: &TextGraph, test: &[NodeId], base: &Experiment) -> Result<Vec<AblationResult>> {
    ablation_matrix(base)
        .into_iter()
        .map(|a| {
            let trained = train_pipeline(graph, &a.experiment, a.train)?;
            let ev = evaluate(
                &trained.policy,
                graph,
                test,
                &a.experiment.vote,
                &a.experiment.eval,
                &a.experiment.format(),
            )?;
            let states: Vec<VoteState> = ev.runs.iter().flat_map(|r| r.states.iter().cloned()).collect();
            Ok(AblationResult {
                name: a.name.to_string(),
                logs: LogSummary::from_logs(&trained.breakdowns, &states),
                accuracy: ev.accuracy,
                mean_rounds: ev.mean_rounds,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub rounds: usize,
    pub accuracy: RunStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyExitStats {
    pub max_rounds: usize,
    pub checkpoint: usize,
    pub threshold: f64,
    pub accuracy: RunStats,
    pub mean_rounds: f64,
    pub exited_fraction: f64,
    /// Fraction of queries whose prediction matches the full-budget run.
    pub agreement: f64,
    /// Fraction of early exits whose tally satisfied the exit rule.
    pub soundness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSweep {
    pub rows: Vec<RoundRow>,
    pub early_exit: EarlyExitStats,
}

/// Accuracy at each round budget, plus one early-exit run at the largest budget.
pub fn sweep_rounds<P: Policy>(
    policy: &P,
    graph: &TextGraph,
    test: &[NodeId],
    exp: &Experiment,
    grid: &[usize],
) -> Result<RoundSweep> {
    let r_max = *grid
        .iter()
        .max()
        .ok_or_else(|| Error::Eval("empty round grid".into()))?;
    let format = exp.format();
    let fixed = |rounds: usize, early_exit: bool| VoteConfig {
        rounds,
        early_exit,
        checkpoint: exp.vote.checkpoint.min(rounds),
        ..exp.vote.clone()
    };
    let mut rows = Vec::with_capacity(grid.len());
    let mut full = None;
    for &r in grid {
        let ev = evaluate(policy, graph, test, &fixed(r, false), &exp.eval, &format)?;
        rows.push(RoundRow {
            rounds: r,
            accuracy: ev.accuracy.clone(),
        });
        if r == r_max && full.is_none() {
            full = Some(ev);
        }
    }
    let full = full.expect("grid contains its maximum");
    let vc = fixed(r_max, true);
    let early = evaluate(policy, graph, test, &vc, &exp.eval, &format)?;

    let (mut total, mut agree, mut exited, mut sound) = (0usize, 0usize, 0usize, 0usize);
    for (e_run, f_run) in early.runs.iter().zip(&full.runs) {
        for (e, f) in e_run.states.iter().zip(&f_run.states) {
            total += 1;
            agree += usize::from(e.winner() == f.winner());
            if e.exited_early {
                exited += 1;
                let t = e.rounds_executed;
                let max = *e.votes.iter().max().unwrap_or(&0);
                let ok = t % vc.checkpoint == 0 && max as f64 / t as f64 > vc.threshold && e.exit_round == Some(t);
                sound += usize::from(ok);
            }
        }
    }
    Ok(RoundSweep {
        rows,
        early_exit: EarlyExitStats {
            max_rounds: r_max,
            checkpoint: vc.checkpoint,
            threshold: vc.threshold,
            accuracy: early.accuracy,
            mean_rounds: early.mean_rounds,
            exited_fraction: exited as f64 / total as f64,
            agreement: agree as f64 / total as f64,
            soundness: if exited == 0 { 1.0 } else { sound as f64 / exited as f64 },
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopRow {
    pub hops: Vec<usize>,
    pub build: BuildReport,
    pub accuracy: RunStats,
    /// Distinct pair distance weights seen in the loss logs.
    pub w_dist_values: Vec<f64>,
}

/// Full pipeline per hop configuration. Reports results without ranking them.
pub fn sweep_hops(graph: &TextGraph, test: &[NodeId], base: &Experiment, grid: &[Vec<usize>]) -> Result<Vec<HopRow>> {
    grid.iter()
        .map(|hops| {
            let mut exp = base.clone();
            exp.sampler.hops_used = hops.iter().copied().collect();
            exp.sampler.max_hop = exp.sampler.max_hop.max(*hops.iter().max().unwrap_or(&2));
            let trained = train_pipeline(graph, &exp, true)?;
            let ev = evaluate(&trained.policy, graph, test, &exp.vote, &exp.eval, &exp.format())?;
            let weights: BTreeSet<u64> = trained
                .breakdowns
                .iter()
                .flat_map(|b| b.pairs.iter().map(|p| p.w_dist.to_bits()))
                .collect();
            let mut w_dist_values: Vec<f64> = weights.into_iter().map(f64::from_bits).collect();
            w_dist_values.sort_by(f64::total_cmp);
            Ok(HopRow {
                hops: exp.sampler.hops_used.iter().copied().collect(),
                build: trained.build,
                accuracy: ev.accuracy,
                w_dist_values,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub param: String,
    pub value: f64,
    pub accuracy: RunStats,
}

/// Full pipeline per `β` and per `γ` value, one parameter varied at a time.
pub fn sweep_objective(
    graph: &TextGraph,
    test: &[NodeId],
    base: &Experiment,
    betas: &[f64],
    gammas: &[f64],
) -> Result<Vec<ParamRow>> {
    let cells = betas
        .iter()
        .map(|&b| ("beta", b))
        .chain(gammas.iter().map(|&g| ("gamma", g)));
    cells
        .map(|(param, value)| {
            let mut exp = base.clone();
            match param {
                "beta" => exp.objective.beta = value,
                _ => exp.objective.gamma = value,
            }
            exp.objective.validate()?;
            let trained = train_pipeline(graph, &exp, true)?;
            let ev = evaluate(&trained.policy, graph, test, &exp.vote, &exp.eval, &exp.format())?;
            Ok(ParamRow {
                param: param.to_string(),
                value,
                accuracy: ev.accuracy,
            })
        })
        .collect()
}

/// One line of a metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub experiment: String,
    pub config: serde_json::Value,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

impl MetricRecord {
    pub fn new(experiment: &str, config: serde_json::Value, metric: &str, value: f64, seed: u64) -> Self {
        MetricRecord {
            experiment: experiment.to_string(),
            config,
            metric: metric.to_string(),
            value,
            seed,
        }
    }
}

pub fn write_metrics(records: &[MetricRecord], path: &Path) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRecord>> {
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

/// Everything a report can draw on. Absent parts become gaps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportInputs {
    pub seed: u64,
    pub homophily_ratio: Option<f64>,
    pub homophily_curve: Option<Vec<HopMatch>>,
    pub evaluation: Option<RunStats>,
    pub rounds: Option<RoundSweep>,
    pub hops: Option<Vec<HopRow>>,
    pub ablations: Option<Vec<AblationResult>>,
    pub params: Option<Vec<ParamRow>>,
}

impl ReportInputs {
    pub fn metrics(&self) -> Vec<MetricRecord> {
        use serde_json::json;
        let seed = self.seed;
        let mut out = Vec::new();
        if let Some(h) = self.homophily_ratio {
            out.push(MetricRecord::new("homophily", json!({}), "edge_homophily", h, seed));
        }
        for m in self.homophily_curve.iter().flatten() {
            if let Some(f) = m.fraction {
                out.push(MetricRecord::new("homophily", json!({"hop": m.hop}), "class_match", f, seed));
            }
        }
        if let Some(acc) = &self.evaluation {
            out.push(MetricRecord::new("eval", json!({}), "accuracy_mean", acc.mean, seed));
            out.push(MetricRecord::new("eval", json!({}), "accuracy_std", acc.std, seed));
        }
        if let Some(sweep) = &self.rounds {
            for row in &sweep.rows {
                let cfg = json!({"rounds": row.rounds});
                out.push(MetricRecord::new("rounds", cfg, "accuracy_mean", row.accuracy.mean, seed));
            }
            let e = &sweep.early_exit;
            let cfg = json!({"max_rounds": e.max_rounds, "checkpoint": e.checkpoint, "threshold": e.threshold});
            for (metric, value) in [
                ("accuracy_mean", e.accuracy.mean),
                ("mean_rounds", e.mean_rounds),
                ("exited_fraction", e.exited_fraction),
                ("agreement", e.agreement),
                ("soundness", e.soundness),
            ] {
                out.push(MetricRecord::new("early_exit", cfg.clone(), metric, value, seed));
            }
        }
        for row in self.hops.iter().flatten() {
            let cfg = json!({"hops": row.hops});
            out.push(MetricRecord::new("hops", cfg.clone(), "accuracy_mean", row.accuracy.mean, seed));
            out.push(MetricRecord::new("hops", cfg, "instances", row.build.instances as f64, seed));
        }
        for a in self.ablations.iter().flatten() {
            let cfg = json!({"variant": a.name});
            out.push(MetricRecord::new("ablation", cfg.clone(), "accuracy_mean", a.accuracy.mean, seed));
            out.push(MetricRecord::new("ablation", cfg.clone(), "accuracy_std", a.accuracy.std, seed));
            out.push(MetricRecord::new("ablation", cfg, "mean_rounds", a.mean_rounds, seed));
        }
        for p in self.params.iter().flatten() {
            let cfg = json!({ p.param.as_str(): p.value });
            out.push(MetricRecord::new("objective", cfg, "accuracy_mean", p.accuracy.mean, seed));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub artifacts: Vec<ManifestEntry>,
    pub gaps: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn table(header: (&str, &str), rows: impl IntoIterator<Item = (String, String)>) -> String {
    let mut s = format!("{}\t{}\n", header.0, header.1);
    for (a, b) in rows {
        let _ = writeln!(s, "{a}\t{b}");
    }
    s
}

fn join_hops(hops: &[usize]) -> String {
    hops.iter().map(usize::to_string).collect::<Vec<_>>().join("+")
}

/// Writes the summary, metrics, plot tables and manifest into `dir`.
pub fn write_report(dir: &Path, inputs: &ReportInputs) -> Result<ReportManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: BTreeMap<&str, String> = BTreeMap::new();
    let mut gaps = Vec::new();
    let mut summary = String::from("# Report\n\n");

    summary.push_str("## Homophily\n\n");
    match inputs.homophily_ratio {
        Some(h) => {
            let _ = writeln!(summary, "edge homophily ratio: {h:.4}");
        }
        None => gaps.push("homophily ratio".to_string()),
    }
    match &inputs.homophily_curve {
        Some(curve) => {
            summary.push_str("\n| hop | pairs | same-class fraction |\n|---|---|---|\n");
            for m in curve {
                let f = m.fraction.map_or("-".to_string(), |f| format!("{f:.4}"));
                let _ = writeln!(summary, "| {} | {} | {f} |", m.hop, m.pairs);
            }
            files.insert(
                "homophily_curve.tsv",
                table(
                    ("hop", "fraction"),
                    curve
                        .iter()
                        .filter_map(|m| m.fraction.map(|f| (m.hop.to_string(), format!("{f:.6}")))),
                ),
            );
        }
        None => gaps.push("homophily curve".to_string()),
    }
    summary.push('\n');

    summary.push_str("## Few-shot accuracy\n\n");
    match &inputs.evaluation {
        Some(acc) => {
            let _ = writeln!(summary, "accuracy: {:.4} ± {:.4} over {} runs\n", acc.mean, acc.std, acc.values.len());
        }
        None => gaps.push("accuracy".to_string()),
    }

    summary.push_str("## Voting rounds\n\n");
    match &inputs.rounds {
        Some(sweep) => {
            summary.push_str("| rounds | accuracy |\n|---|---|\n");
            for row in &sweep.rows {
                let _ = writeln!(summary, "| {} | {:.4} ± {:.4} |", row.rounds, row.accuracy.mean, row.accuracy.std);
            }
            let e = &sweep.early_exit;
            let _ = writeln!(
                summary,
                "\nearly exit (R_max {}, Δ {}, τ {}): accuracy {:.4}, mean rounds {:.2}, exited {:.3}, agreement {:.3}, soundness {:.3}\n",
                e.max_rounds, e.checkpoint, e.threshold, e.accuracy.mean, e.mean_rounds, e.exited_fraction, e.agreement, e.soundness
            );
            files.insert(
                "accuracy_vs_rounds.tsv",
                table(
                    ("rounds", "accuracy"),
                    sweep
                        .rows
                        .iter()
                        .map(|r| (r.rounds.to_string(), format!("{:.6}", r.accuracy.mean))),
                ),
            );
        }
        None => gaps.push("voting-round sweep".to_string()),
    }

    summary.push_str("## Hop configurations\n\n");
    match &inputs.hops {
        Some(rows) => {
            summary.push_str("| hops | instances | accuracy |\n|---|---|---|\n");
            for r in rows {
                let _ = writeln!(
                    summary,
                    "| {} | {} | {:.4} ± {:.4} |",
                    join_hops(&r.hops),
                    r.build.instances,
                    r.accuracy.mean,
                    r.accuracy.std
                );
            }
            summary.push('\n');
            files.insert(
                "accuracy_vs_hops.tsv",
                table(
                    ("hops", "accuracy"),
                    rows.iter().map(|r| (join_hops(&r.hops), format!("{:.6}", r.accuracy.mean))),
                ),
            );
        }
        None => gaps.push("hop sweep".to_string()),
    }

    summary.push_str("## Ablations\n\n");
    match &inputs.ablations {
        Some(rows) => {
            summary.push_str("| variant | accuracy | mean rounds | w_dist range | max SFT term |\n|---|---|---|---|---|\n");
            for a in rows {
                let _ = writeln!(
                    summary,
                    "| {} | {:.4} ± {:.4} | {:.1} | [{:.3}, {:.3}] | {:.4} |",
                    a.name,
                    a.accuracy.mean,
                    a.accuracy.std,
                    a.mean_rounds,
                    a.logs.w_dist_min,
                    a.logs.w_dist_max,
                    a.logs.sft_contribution_max
                );
            }
            summary.push('\n');
            files.insert(
                "ablations.tsv",
                table(
                    ("variant", "accuracy"),
                    rows.iter().map(|a| (a.name.clone(), format!("{:.6}", a.accuracy.mean))),
                ),
            );
        }
        None => gaps.push("ablations".to_string()),
    }

    if let Some(rows) = &inputs.params {
        summary.push_str("## Objective parameters\n\n| parameter | value | accuracy |\n|---|---|---|\n");
        for p in rows {
            let _ = writeln!(summary, "| {} | {} | {:.4} |", p.param, p.value, p.accuracy.mean);
        }
        summary.push('\n');
    }

    if !gaps.is_empty() {
        summary.push_str("## Gaps\n\n");
        for g in &gaps {
            let _ = writeln!(summary, "- GAP: no {g} input");
        }
    }

    let mut metrics = String::new();
    for r in inputs.metrics() {
        metrics.push_str(&serde_json::to_string(&r)?);
        metrics.push('\n');
    }
    files.insert("metrics.jsonl", metrics);
    files.insert("summary.md", summary);

    let mut artifacts = Vec::with_capacity(files.len());
    for (name, content) in &files {
        let path = dir.join(name);
        fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        artifacts.push(ManifestEntry {
            file: name.to_string(),
            sha256: sha256_hex(content.as_bytes()),
        });
    }
    let manifest = ReportManifest { artifacts, gaps };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_counts_hits() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        // derangement of three balanced classes
        assert_eq!(accuracy(&[1, 2, 0, 1, 2, 0], &[0, 1, 2, 0, 1, 2]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 0, 2, 1], &[0, 1, 2, 2]).unwrap(), 0.5);
        assert!(accuracy(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn run_stats() {
        let s = RunStats::new(vec![0.8; 5]);
        assert_eq!(s.mean, 0.8);
        assert_eq!(s.std, 0.0);
        let s = RunStats::new(vec![1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ablation_names_and_toggles() {
        let base = Experiment::default();
        let m = ablation_matrix(&base);
        let names: Vec<&str> = m.iter().map(|a| a.name).collect();
        assert_eq!(
            names,
            [
                "full",
                "w/o hierarchical sampling",
                "w/o self-supervised training",
                "w/o ensemble",
                "w/o w_dist",
                "w/o w_rank",
                "w/o SFT"
            ]
        );
        assert_eq!(m[0].experiment, base);
        assert!(!m[2].train);
        assert_eq!(m[3].experiment.vote.rounds, base.eval.shots);
        assert!(!m[3].experiment.vote.replacement);
        assert_eq!(m[6].experiment.objective.gamma, 0.0);
    }

    #[test]
    fn empty_report_marks_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_report(dir.path(), &ReportInputs::default()).unwrap();
        assert_eq!(m.gaps.len(), 6);
        let summary = fs::read_to_string(dir.path().join("summary.md")).unwrap();
        assert!(summary.contains("GAP: no ablations input"));
        assert_eq!(m.artifacts.len(), 2);
    }
}
