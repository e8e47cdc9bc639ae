//! Configuration file and the stage-per-subcommand pipeline.
//!
//! Every stage records its config hash and the hashes of its inputs and
//! outputs in `manifest.json` under the output directory. A stage's config
//! hash covers its own sections and the hash of the stage it consumes, so a
//! config change anywhere upstream marks downstream artifacts stale.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::{
    self, run_ablations, sha256_hex, sweep_hops, sweep_objective, sweep_rounds, test_split, EvalConfig, Experiment,
    MetricRecord, ReportInputs,
};
use crate::graph::{self, generate_synthetic, homophily_ratio, HopMatch, SyntheticSpec, TextGraph};
use crate::inference::{predict_all, write_predictions, Prediction, VoteConfig};
use crate::objective::{write_breakdown_log, ObjectiveConfig};
use crate::policy::{load_checkpoint, save_checkpoint, ModelConfig, Policy};
use crate::sampler::{build_dataset, export_dataset, import_dataset, write_manifest, DatasetManifest, SamplerConfig, TrainingMetadata};
use crate::seed;
use crate::trainer::{train, TrainConfig};

/// Paths of an existing graph to use instead of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub nodes: PathBuf,
    pub edges: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub homophily_max_hop: usize,
    /// Sample this many sources for the hop curve; all nodes when absent.
    pub homophily_sources: Option<usize>,
    pub round_sweep: bool,
    pub hop_sweep: bool,
    pub ablations: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            homophily_max_hop: 4,
            homophily_sources: None,
            round_sweep: true,
            hop_sweep: true,
            ablations: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub input: Option<InputPaths>,
    pub synthetic: SyntheticSpec,
    pub sampler: SamplerConfig,
    pub objective: ObjectiveConfig,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub vote: VoteConfig,
    pub eval: EvalConfig,
    pub analysis: AnalysisConfig,
}

/// Sections whose `seed` is derived from the global seed when unset.
const SEEDED_SECTIONS: [&str; 6] = ["synthetic", "sampler", "train", "model", "vote", "eval"];

pub fn derived_seed(global: u64, section: &str) -> u64 {
    seed::mix(global, &[seed::tag(section)])
}

impl PipelineConfig {
    /// Parses a TOML config. `seed_override` replaces the global seed; section
    /// seeds not set in the file are derived from the global seed.
    pub fn from_toml_str(text: &str, seed_override: Option<u64>) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("<file>", e.to_string()))?;
        let global = match seed_override {
            Some(s) => s,
            None => match table.get("seed") {
                None => 0,
                Some(toml::Value::Integer(i)) if *i >= 0 => *i as u64,
                Some(_) => return Err(Error::config("seed", "must be a non-negative integer")),
            },
        };
        table.insert("seed".into(), toml::Value::Integer(global as i64));
        for section in SEEDED_SECTIONS {
            let entry = table
                .entry(section)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(t) = entry else {
                return Err(Error::config(section, "must be a table"));
            };
            if !t.contains_key("seed") {
                // TOML integers are signed; keep derived seeds in range.
                let s = derived_seed(global, section) >> 1;
                t.insert("seed".into(), toml::Value::Integer(s as i64));
            }
        }
        let config = Self::from_table(table)?;
        config.validate()?;
        Ok(config)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        const KNOWN: [&str; 10] = [
            "seed", "input", "synthetic", "sampler", "objective", "train", "model", "vote", "eval", "analysis",
        ];
        if let Some(k) = table.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(Error::config(k.clone(), "unknown key"));
        }
        fn section<T: serde::de::DeserializeOwned + Default>(table: &toml::Table, name: &str) -> Result<T> {
            match table.get(name) {
                None => Ok(T::default()),
                Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| Error::config(name, e.message())),
            }
        }
        Ok(PipelineConfig {
            seed: section(&table, "seed")?,
            input: match table.get("input") {
                None => None,
                Some(v) => Some(v.clone().try_into().map_err(|e: toml::de::Error| Error::config("input", e.message()))?),
            },
            synthetic: section(&table, "synthetic")?,
            sampler: section(&table, "sampler")?,
            objective: section(&table, "objective")?,
            train: section(&table, "train")?,
            model: section(&table, "model")?,
            vote: section(&table, "vote")?,
            eval: section(&table, "eval")?,
            analysis: section(&table, "analysis")?,
        })
    }

    pub fn load(path: Option<&Path>, seed_override: Option<u64>) -> Result<Self> {
        let text = match path {
            Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, seed_override)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.is_none() {
            self.synthetic.validate()?;
        }
        self.experiment().validate()?;
        if self.analysis.homophily_max_hop == 0 {
            return Err(Error::config("analysis.homophily_max_hop", "must be positive"));
        }
        Ok(())
    }

    pub fn experiment(&self) -> Experiment {
        Experiment {
            sampler: self.sampler.clone(),
            objective: self.objective,
            train: self.train.clone(),
            model: self.model,
            vote: self.vote.clone(),
            eval: self.eval.clone(),
        }
    }
}

/// Hash of a serializable value's JSON form.
pub fn config_hash(value: &impl Serialize) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("config serializes"))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stages: BTreeMap<String, StageRecord>,
}

pub const MANIFEST: &str = "manifest.json";
pub const NODES: &str = "graph/nodes.jsonl";
pub const EDGES: &str = "graph/edges.tsv";
pub const DATASET: &str = "dataset.jsonl";
pub const DATASET_MANIFEST: &str = "dataset.manifest.json";
pub const CHECKPOINT: &str = "policy.ckpt";
pub const TRAIN_METRICS: &str = "train_metrics.jsonl";
pub const LOSS_LOG: &str = "loss_breakdown.jsonl";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const CLASSES: &str = "classes.json";
pub const EVAL: &str = "eval.json";
pub const EVAL_METRICS: &str = "eval_metrics.jsonl";
pub const HOMOPHILY_TABLE: &str = "homophily.tsv";
pub const HOMOPHILY: &str = "homophily.json";
pub const REPORT_DIR: &str = "report";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomophilyArtifact {
    pub ratio: f64,
    pub curve: Vec<HopMatch>,
}

/// Output of the eval stage, consumed by the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalArtifact {
    pub predictions_accuracy: f64,
    pub inputs: ReportInputs,
}

/// A configured pipeline rooted at an output directory.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub out: PathBuf,
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

fn write_file(path: &Path, content: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

impl Pipeline {
    pub fn new(config: PipelineConfig, out: impl Into<PathBuf>) -> Self {
        Pipeline {
            config,
            out: out.into(),
        }
    }

    fn prepare(&self) -> Result<()> {
        fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn manifest(&self) -> Result<RunManifest> {
        let path = self.path(MANIFEST);
        if !path.exists() {
            return Ok(RunManifest::default());
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn record(&self, stage: &str, config_hash: String, inputs: BTreeMap<String, String>, outputs: &[&str]) -> Result<()> {
        let mut manifest = self.manifest()?;
        let mut out = BTreeMap::new();
        for name in outputs {
            out.insert(name.to_string(), file_hash(&self.path(name))?);
        }
        manifest.stages.insert(
            stage.to_string(),
            StageRecord {
                config_hash,
                inputs,
                outputs: out,
            },
        );
        write_file(&self.path(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")
    }

    /// Checks that `artifact` exists and is what `producer` last recorded
    /// under the current configuration. Returns its hash.
    fn require(&self, artifact: &str, producer: &str, expected_config: &str) -> Result<String> {
        let path = self.path(artifact);
        if !path.exists() {
            return Err(Error::MissingArtifact {
                artifact: path.display().to_string(),
                producer: producer.to_string(),
            });
        }
        let hash = file_hash(&path)?;
        let manifest = self.manifest()?;
        let stale = |message: String| Error::StaleArtifact {
            artifact: path.display().to_string(),
            message,
        };
        let rec = manifest
            .stages
            .get(producer)
            .ok_or_else(|| stale(format!("no manifest record; rerun `hoprank {producer}`")))?;
        if rec.outputs.get(artifact) != Some(&hash) {
            return Err(stale(format!("modified since `hoprank {producer}` wrote it")));
        }
        if rec.config_hash != expected_config {
            return Err(stale(format!(
                "produced under a different configuration; rerun `hoprank {producer}`"
            )));
        }
        Ok(hash)
    }

    fn graph_source_hash(&self) -> String {
        match &self.config.input {
            Some(paths) => config_hash(&("input", paths)),
            None => config_hash(&("synthetic", &self.config.synthetic)),
        }
    }

    pub fn synth_hash(&self) -> String {
        self.graph_source_hash()
    }

    pub fn sample_hash(&self) -> String {
        config_hash(&(&self.config.sampler, self.synth_hash()))
    }

    pub fn train_hash(&self) -> String {
        let c = &self.config;
        config_hash(&(&c.objective, &c.train, &c.model, self.sample_hash()))
    }

    pub fn infer_hash(&self) -> String {
        let c = &self.config;
        config_hash(&(&c.vote, &c.eval, self.train_hash()))
    }

    pub fn eval_hash(&self) -> String {
        config_hash(&(&self.config.analysis, self.infer_hash()))
    }

    pub fn homophily_hash(&self) -> String {
        let a = &self.config.analysis;
        config_hash(&(a.homophily_max_hop, a.homophily_sources, self.synth_hash()))
    }

    /// Loads the configured graph: the input files, or the synth output.
    pub fn graph(&self) -> Result<TextGraph> {
        match &self.config.input {
            Some(paths) => Ok(graph::load_graph(&paths.nodes, &paths.edges)?.0),
            None => {
                self.require(NODES, "synth", &self.synth_hash())?;
                self.require(EDGES, "synth", &self.synth_hash())?;
                Ok(graph::load_graph(&self.path(NODES), &self.path(EDGES))?.0)
            }
        }
    }

    pub fn synth(&self) -> Result<String> {
        self.prepare()?;
        if self.config.input.is_some() {
            return Err(Error::config("input", "synth writes a synthetic graph; remove [input] to use it"));
        }
        let g = generate_synthetic(&self.config.synthetic)?;
        fs::create_dir_all(self.path("graph")).map_err(|e| Error::io(self.path("graph"), e))?;
        graph::write_graph(&g, &self.path(NODES), &self.path(EDGES))?;
        write_file(&self.path(CLASSES), serde_json::to_string_pretty(g.class_names())? + "\n")?;
        self.record("synth", self.synth_hash(), BTreeMap::new(), &[NODES, EDGES, CLASSES])?;
        Ok(format!(
            "synth: {} nodes, {} edges, {} classes",
            g.num_nodes(),
            g.num_edges(),
            g.num_classes()
        ))
    }

    pub fn sample(&self) -> Result<String> {
        self.prepare()?;
        let g = self.graph()?;
        let (instances, report) = build_dataset(&g, &self.config.sampler)?;
        let records = export_dataset(&instances, &self.path(DATASET))?;
        let manifest = DatasetManifest {
            records,
            graph_hash: g.structure_hash(),
            sampler: self.config.sampler.clone(),
            report: report.clone(),
            training: TrainingMetadata {
                beta: self.config.objective.beta,
                gamma: self.config.objective.gamma,
                ..Default::default()
            },
        };
        write_manifest(&manifest, &self.path(DATASET_MANIFEST))?;
        let inputs = BTreeMap::from([("graph_structure".to_string(), g.structure_hash())]);
        self.record("sample", self.sample_hash(), inputs, &[DATASET, DATASET_MANIFEST])?;
        Ok(format!(
            "sample: {} instances from {} attempts ({} skipped), hops sampled {:?}",
            report.instances, report.attempted, report.skipped, report.hop_sampled
        ))
    }

    pub fn train(&self) -> Result<String> {
        self.prepare()?;
        let dataset_hash = self.require(DATASET, "sample", &self.sample_hash())?;
        let dataset = import_dataset(&self.path(DATASET))?;
        let mut policy = self.config.model.init();
        let reference = policy.snapshot();
        let report = train(&mut policy, &dataset, &self.config.objective, &self.config.train)?;
        save_checkpoint(&policy, report.steps_taken() as u64, &self.path(CHECKPOINT))?;
        report.write_metrics(&self.path(TRAIN_METRICS))?;
        let breakdowns = evalkit::breakdown_log(&policy, &reference, &dataset, &self.config.objective)?;
        let entries: Vec<_> = breakdowns.into_iter().enumerate().collect();
        write_breakdown_log(&entries, &self.path(LOSS_LOG))?;
        let inputs = BTreeMap::from([(DATASET.to_string(), dataset_hash)]);
        self.record("train", self.train_hash(), inputs, &[CHECKPOINT, TRAIN_METRICS, LOSS_LOG])?;
        Ok(format!(
            "train: {} steps on {} instances (holdout {}), best holdout loss {}",
            report.steps_taken(),
            report.train_size,
            report.holdout_size,
            report.best_loss.map_or("n/a".into(), |l| format!("{l:.4}"))
        ))
    }

    fn policy(&self) -> Result<(crate::policy::BilinearScorer, String)> {
        let hash = self.require(CHECKPOINT, "train", &self.train_hash())?;
        let (policy, _) = load_checkpoint(&self.path(CHECKPOINT), Some(&self.config.model.scorer()))?;
        Ok((policy, hash))
    }

    pub fn infer(&self) -> Result<String> {
        self.prepare()?;
        let (policy, ckpt_hash) = self.policy()?;
        let g = self.graph()?;
        let exp = self.config.experiment();
        let test = test_split(&g, &exp.eval)?;
        let anchors = evalkit::run_anchors(&g, &test, &exp.eval, 0)?;
        let vote = evalkit::run_vote(&exp.vote, &exp.eval, 0);
        let out = predict_all(&policy, &g, &test, &anchors, &vote, &exp.format())?;
        let preds: Vec<Prediction> = out.into_iter().map(|(p, _)| p).collect();
        write_predictions(&preds, &self.path(PREDICTIONS))?;
        write_file(&self.path(CLASSES), serde_json::to_string_pretty(g.class_names())? + "\n")?;
        let inputs = BTreeMap::from([
            (CHECKPOINT.to_string(), ckpt_hash),
            ("graph_structure".to_string(), g.structure_hash()),
        ]);
        self.record("infer", self.infer_hash(), inputs, &[PREDICTIONS, CLASSES])?;
        let early = preds.iter().filter(|p| p.exited_early).count();
        Ok(format!("infer: {} queries, {} exited early", preds.len(), early))
    }

    pub fn eval(&self) -> Result<String> {
        self.prepare()?;
        let pred_hash = self.require(PREDICTIONS, "infer", &self.infer_hash())?;
        let (policy, ckpt_hash) = self.policy()?;
        let g = self.graph()?;
        let exp = self.config.experiment();
        let test = test_split(&g, &exp.eval)?;
        let preds = crate::inference::read_predictions(&self.path(PREDICTIONS))?;
        let labels = evalkit::labels_of(&g, &preds.iter().map(|p| p.query_id).collect::<Vec<_>>())?;
        let predictions_accuracy = evalkit::accuracy(&preds.iter().map(|p| p.pred).collect::<Vec<_>>(), &labels)?;

        let evaluation = evalkit::evaluate(&policy, &g, &test, &exp.vote, &exp.eval, &exp.format())?;
        let a = &self.config.analysis;
        let rounds = if a.round_sweep && !exp.eval.rounds_grid.is_empty() {
            Some(sweep_rounds(&policy, &g, &test, &exp, &exp.eval.rounds_grid)?)
        } else {
            None
        };
        let hops = if a.hop_sweep && !exp.eval.hop_grid.is_empty() {
            Some(sweep_hops(&g, &test, &exp, &exp.eval.hop_grid)?)
        } else {
            None
        };
        let ablations = if a.ablations {
            Some(run_ablations(&g, &test, &exp)?)
        } else {
            None
        };
        let params = if exp.eval.beta_grid.is_empty() && exp.eval.gamma_grid.is_empty() {
            None
        } else {
            Some(sweep_objective(&g, &test, &exp, &exp.eval.beta_grid, &exp.eval.gamma_grid)?)
        };
        let inputs = ReportInputs {
            seed: self.config.seed,
            homophily_ratio: None,
            homophily_curve: None,
            evaluation: Some(evaluation.accuracy.clone()),
            rounds,
            hops,
            ablations,
            params,
        };
        let mut metrics = vec![MetricRecord::new(
            "predictions",
            serde_json::json!({}),
            "accuracy",
            predictions_accuracy,
            self.config.seed,
        )];
        metrics.extend(inputs.metrics());
        evalkit::write_metrics(&metrics, &self.path(EVAL_METRICS))?;
        let artifact = EvalArtifact {
            predictions_accuracy,
            inputs,
        };
        write_file(&self.path(EVAL), serde_json::to_string_pretty(&artifact)? + "\n")?;
        let record_inputs = BTreeMap::from([
            (PREDICTIONS.to_string(), pred_hash),
            (CHECKPOINT.to_string(), ckpt_hash),
        ]);
        self.record("eval", self.eval_hash(), record_inputs, &[EVAL, EVAL_METRICS])?;
        Ok(format!(
            "eval: accuracy {:.4} on predictions; {:.4} ± {:.4} over {} runs",
            predictions_accuracy,
            evaluation.accuracy.mean,
            evaluation.accuracy.std,
            evaluation.runs.len()
        ))
    }

    pub fn homophily(&self) -> Result<String> {
        self.prepare()?;
        let g = self.graph()?;
        let a = &self.config.analysis;
        let ratio = homophily_ratio(&g)?;
        let curve = graph::hop_class_match_curve(&g, a.homophily_max_hop, a.homophily_sources, self.config.seed)?;
        let mut table = String::from("hop\tfraction\n");
        for m in &curve {
            match m.fraction {
                Some(f) => table.push_str(&format!("{}\t{f:.6}\n", m.hop)),
                None => table.push_str(&format!("{}\tNA\n", m.hop)),
            }
        }
        write_file(&self.path(HOMOPHILY_TABLE), &table)?;
        let artifact = HomophilyArtifact { ratio, curve };
        write_file(&self.path(HOMOPHILY), serde_json::to_string_pretty(&artifact)? + "\n")?;
        self.record("homophily", self.homophily_hash(), BTreeMap::new(), &[HOMOPHILY_TABLE, HOMOPHILY])?;
        Ok(format!("homophily: edge ratio {ratio:.4}\n{}", table.trim_end()))
    }

    /// Assembles whatever eval and homophily outputs exist into the report
    /// directory; absent or stale inputs become gaps.
    pub fn report(&self) -> Result<String> {
        self.prepare()?;
        let mut inputs = ReportInputs {
            seed: self.config.seed,
            ..Default::default()
        };
        let mut record_inputs = BTreeMap::new();
        let mut skipped = Vec::new();
        match self.require(EVAL, "eval", &self.eval_hash()) {
            Ok(hash) => {
                let text = fs::read_to_string(self.path(EVAL)).map_err(|e| Error::io(self.path(EVAL), e))?;
                let artifact: EvalArtifact = serde_json::from_str(&text)?;
                inputs = ReportInputs {
                    seed: self.config.seed,
                    ..artifact.inputs
                };
                record_inputs.insert(EVAL.to_string(), hash);
            }
            Err(e @ (Error::MissingArtifact { .. } | Error::StaleArtifact { .. })) => skipped.push(e.to_string()),
            Err(e) => return Err(e),
        }
        match self.require(HOMOPHILY, "homophily", &self.homophily_hash()) {
            Ok(hash) => {
                let path = self.path(HOMOPHILY);
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let h: HomophilyArtifact = serde_json::from_str(&text)?;
                inputs.homophily_ratio = Some(h.ratio);
                inputs.homophily_curve = Some(h.curve);
                record_inputs.insert(HOMOPHILY.to_string(), hash);
            }
            Err(e @ (Error::MissingArtifact { .. } | Error::StaleArtifact { .. })) => skipped.push(e.to_string()),
            Err(e) => return Err(e),
        }
        let dir = self.path(REPORT_DIR);
        let manifest = evalkit::write_report(&dir, &inputs)?;
        let config_path = dir.join("config.json");
        write_file(&config_path, serde_json::to_string_pretty(&self.config)? + "\n")?;
        let mut manifest = manifest;
        manifest.artifacts.push(evalkit::ManifestEntry {
            file: "config.json".into(),
            sha256: file_hash(&config_path)?,
        });
        manifest.artifacts.sort_by(|a, b| a.file.cmp(&b.file));
        write_file(&dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        let outputs: Vec<String> = manifest
            .artifacts
            .iter()
            .map(|a| format!("{REPORT_DIR}/{}", a.file))
            .chain([format!("{REPORT_DIR}/manifest.json")])
            .collect();
        let refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
        self.record("report", config_hash(&(&self.config.seed, &record_inputs)), record_inputs, &refs)?;
        let mut msg = format!(
            "report: {} artifacts, {} gaps in {}",
            manifest.artifacts.len(),
            manifest.gaps.len(),
            dir.display()
        );
        for s in skipped {
            msg.push_str(&format!("\n  skipped input: {s}"));
        }
        Ok(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unset_section_seeds_derive_from_global() {
        let a = PipelineConfig::from_toml_str("seed = 3\n[sampler]\nseed = 11\n", None).unwrap();
        assert_eq!(a.sampler.seed, 11);
        assert_eq!(a.train.seed, derived_seed(3, "train") >> 1);
        let b = PipelineConfig::from_toml_str("seed = 3\n", Some(4)).unwrap();
        assert_eq!(b.seed, 4);
        assert_eq!(b.vote.seed, derived_seed(4, "vote") >> 1);
        assert_ne!(b.vote.seed, b.eval.seed);
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = PipelineConfig::from_toml_str("[sampler]\nmax_hops = 3\n", None).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "sampler"), "{e}");
        assert!(e.to_string().contains("max_hops"));
        let e = PipelineConfig::from_toml_str("[sampelr]\n", None).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "sampelr"));
    }

    #[test]
    fn section_invariants_use_dotted_names() {
        let e = PipelineConfig::from_toml_str("[vote]\nthreshold = 1.5\n", None).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "vote.threshold"), "{e}");
    }
}
