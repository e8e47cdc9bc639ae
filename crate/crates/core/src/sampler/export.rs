//! Line-delimited preference dataset, one record per instance:
//!
//! ```text
//! {"source_id":int,"prompt":string,
//!  "chosen":{"node_id":int,"hop":1,"slot":int,"text":string},
//!  "rejected":[{"node_id":int,"hop":int,"slot":int,"text":string},...],
//!  "seed":int,"meta":{"k":int,"template":string}}
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{BuildReport, Candidate, PreferenceInstance, PromptTemplate, SamplerConfig};
use crate::error::{Error, Result};

#[derive(Serialize)]
struct CandidateRecord<'a> {
    node_id: u64,
    hop: u64,
    slot: u64,
    text: &'a str,
}

#[derive(Serialize)]
struct MetaRecord {
    k: u64,
    template: &'static str,
}

#[derive(Serialize)]
struct InstanceRecord<'a> {
    source_id: u64,
    prompt: &'a str,
    chosen: CandidateRecord<'a>,
    rejected: Vec<CandidateRecord<'a>>,
    seed: u64,
    meta: MetaRecord,
}

fn candidate_record(c: &Candidate) -> CandidateRecord<'_> {
    CandidateRecord {
        node_id: c.node as u64,
        hop: c.hop as u64,
        slot: c.slot as u64,
        text: &c.text,
    }
}

/// Serializes one instance as a single JSON line (no trailing newline).
pub fn instance_to_line(inst: &PreferenceInstance) -> Result<String> {
    let rec = InstanceRecord {
        source_id: inst.source as u64,
        prompt: &inst.prompt,
        chosen: candidate_record(inst.chosen()),
        rejected: inst.rejected().iter().map(candidate_record).collect(),
        seed: inst.rng_seed,
        meta: MetaRecord {
            k: inst.max_hop as u64,
            template: inst.template.id(),
        },
    };
    Ok(serde_json::to_string(&rec)?)
}

pub fn export_dataset(instances: &[PreferenceInstance], path: &Path) -> Result<usize> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for inst in instances {
        writeln!(w, "{}", instance_to_line(inst)?).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(instances.len())
}

struct Fields<'a> {
    line: usize,
    path: &'a Path,
}

impl Fields<'_> {
    fn err(&self, field: &str, message: &str) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            message: format!("field `{field}`: {message}"),
        }
    }

    fn get<'v>(&self, obj: &'v Map<String, Value>, prefix: &str, name: &str) -> Result<&'v Value> {
        obj.get(name)
            .ok_or_else(|| self.err(&join(prefix, name), "missing"))
    }

    fn uint(&self, obj: &Map<String, Value>, prefix: &str, name: &str) -> Result<u64> {
        self.get(obj, prefix, name)?
            .as_u64()
            .ok_or_else(|| self.err(&join(prefix, name), "expected non-negative integer"))
    }

    fn string(&self, obj: &Map<String, Value>, prefix: &str, name: &str) -> Result<String> {
        self.get(obj, prefix, name)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| self.err(&join(prefix, name), "expected string"))
    }

    fn object<'v>(&self, v: &'v Value, field: &str) -> Result<&'v Map<String, Value>> {
        v.as_object().ok_or_else(|| self.err(field, "expected object"))
    }

    fn no_extra(&self, obj: &Map<String, Value>, prefix: &str, allowed: &[&str]) -> Result<()> {
        match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(self.err(&join(prefix, k), "unknown field")),
            None => Ok(()),
        }
    }

    fn candidate(&self, v: &Value, field: &str) -> Result<Candidate> {
        let obj = self.object(v, field)?;
        self.no_extra(obj, field, &["node_id", "hop", "slot", "text"])?;
        Ok(Candidate {
            node: self.uint(obj, field, "node_id")? as usize,
            hop: self.uint(obj, field, "hop")? as usize,
            slot: self.uint(obj, field, "slot")? as usize,
            text: self.string(obj, field, "text")?,
        })
    }
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Parses one record; `line` and `path` are used for error messages only.
pub fn instance_from_line(text: &str, line: usize, path: &Path) -> Result<PreferenceInstance> {
    let f = Fields { line, path };
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("malformed record: {e}"),
    })?;
    let obj = f.object(&value, "<record>")?;
    f.no_extra(obj, "", &["source_id", "prompt", "chosen", "rejected", "seed", "meta"])?;

    let source = f.uint(obj, "", "source_id")? as usize;
    let prompt = f.string(obj, "", "prompt")?;
    let chosen = f.candidate(f.get(obj, "", "chosen")?, "chosen")?;
    if chosen.hop != 1 {
        return Err(f.err("chosen.hop", "must be 1"));
    }
    let rejected_v = f
        .get(obj, "", "rejected")?
        .as_array()
        .ok_or_else(|| f.err("rejected", "expected array"))?;
    let mut candidates = vec![chosen];
    for (i, r) in rejected_v.iter().enumerate() {
        let field = format!("rejected[{i}]");
        let c = f.candidate(r, &field)?;
        if c.hop < 2 {
            return Err(f.err(&format!("{field}.hop"), "must be at least 2"));
        }
        candidates.push(c);
    }
    let rng_seed = f.uint(obj, "", "seed")?;
    let meta = f.object(f.get(obj, "", "meta")?, "meta")?;
    f.no_extra(meta, "meta", &["k", "template"])?;
    let max_hop = f.uint(meta, "meta", "k")? as usize;
    let template_id = f.string(meta, "meta", "template")?;
    let template = PromptTemplate::from_id(&template_id)
        .ok_or_else(|| f.err("meta.template", &format!("unknown template `{template_id}`")))?;

    let inst = PreferenceInstance {
        source,
        candidates,
        prompt,
        rng_seed,
        max_hop,
        template,
    };
    inst.validate().map_err(|m| f.err("rejected", &m))?;
    if let Some(c) = inst.candidates.iter().find(|c| c.hop > max_hop) {
        return Err(f.err("meta.k", &format!("candidate hop {} exceeds k", c.hop)));
    }
    Ok(inst)
}

pub fn import_dataset(path: &Path) -> Result<Vec<PreferenceInstance>> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| instance_from_line(l, i + 1, path))
        .collect()
}

/// Hyperparameters for external LLM preference tuning on the exported data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub beta: f64,
    pub gamma: f64,
    pub adapter_rank: u32,
    pub adapter_alpha: u32,
    pub max_tokens: u32,
    pub sft_note: String,
}

impl Default for TrainingMetadata {
    fn default() -> Self {
        TrainingMetadata {
            beta: 0.1,
            gamma: 5.0,
            adapter_rank: 8,
            adapter_alpha: 16,
            max_tokens: 4096,
            sft_note: "the SFT term is the token-level negative log-likelihood of the chosen \
                       candidate's title and abstract; the built-in scorer's listwise \
                       normalization applies only to that scorer"
                .into(),
        }
    }
}

/// Sidecar written next to an exported dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: usize,
    pub graph_hash: String,
    pub sampler: SamplerConfig,
    pub report: BuildReport,
    pub training: TrainingMetadata,
}

pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
