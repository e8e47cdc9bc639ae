//! Line-delimited node and edge files.
//!
//! Node records: `{"id": int, "text": string, "label": string | int}` with the
//! label optional. Edge lines are either `u<TAB>v` or `{"src": u, "dst": v}`.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::{Node, NodeId, TextGraph};
use crate::error::{Error, Result};

/// Counts reported while loading a graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub nodes: usize,
    pub edge_lines: usize,
    pub self_loops: usize,
    pub duplicate_edges: usize,
}

#[derive(Deserialize)]
struct NodeRecord {
    id: u64,
    text: String,
    #[serde(default)]
    label: Option<Value>,
}

#[derive(Deserialize)]
struct EdgeRecord {
    src: u64,
    dst: u64,
}

enum RawLabel {
    Int(usize),
    Str(String),
}

pub fn load_graph(node_path: &Path, edge_path: &Path) -> Result<(TextGraph, LoadReport)> {
    let node_src = fs::read_to_string(node_path).map_err(|e| Error::io(node_path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: node_path.to_path_buf(),
        line,
        message,
    };

    let mut records: Vec<(u64, String, Option<RawLabel>, usize)> = Vec::new();
    for (i, line) in node_src.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: NodeRecord =
            serde_json::from_str(line).map_err(|e| parse_err(lineno, format!("malformed node record: {e}")))?;
        let label = match rec.label {
            None | Some(Value::Null) => None,
            Some(Value::Number(n)) => Some(RawLabel::Int(
                n.as_u64()
                    .ok_or_else(|| parse_err(lineno, "field `label`: expected non-negative integer".into()))?
                    as usize,
            )),
            Some(Value::String(s)) => Some(RawLabel::Str(s)),
            Some(_) => return Err(parse_err(lineno, "field `label`: expected string or integer".into())),
        };
        records.push((rec.id, rec.text, label, lineno));
    }

    let n = records.len();
    let mut slots: Vec<Option<(String, Option<RawLabel>)>> = (0..n).map(|_| None).collect();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for (id, text, label, lineno) in records {
        let idx = id as usize;
        if idx >= n {
            return Err(parse_err(
                lineno,
                format!("field `id`: {id} outside dense range [0, {n})"),
            ));
        }
        if slots[idx].is_some() {
            return Err(parse_err(lineno, format!("field `id`: duplicate id {id}")));
        }
        slots[idx] = Some((text, label));
        order.push(idx);
    }

    // Integer labels are class ids; string labels are mapped in first-occurrence order.
    let any_str = slots.iter().flatten().any(|(_, l)| matches!(l, Some(RawLabel::Str(_))));
    let any_int = slots.iter().flatten().any(|(_, l)| matches!(l, Some(RawLabel::Int(_))));
    if any_str && any_int {
        return Err(Error::Parse {
            path: node_path.to_path_buf(),
            line: 0,
            message: "field `label`: mixes string and integer labels".into(),
        });
    }
    let mut class_names: Vec<String> = Vec::new();
    let mut name_to_id: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    if any_str {
        for &idx in &order {
            if let Some((_, Some(RawLabel::Str(s)))) = &slots[idx] {
                let next = name_to_id.len();
                let id = *name_to_id.entry(s.clone()).or_insert_with(|| {
                    class_names.push(s.clone());
                    next
                });
                labels[idx] = Some(id);
            }
        }
    } else if any_int {
        let max = slots
            .iter()
            .flatten()
            .filter_map(|(_, l)| match l {
                Some(RawLabel::Int(c)) => Some(*c),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        class_names = (0..=max).map(|c| c.to_string()).collect();
        for (idx, slot) in slots.iter().enumerate() {
            if let Some((_, Some(RawLabel::Int(c)))) = slot {
                labels[idx] = Some(*c);
            }
        }
    }

    let nodes: Vec<Node> = slots
        .into_iter()
        .enumerate()
        .map(|(id, slot)| {
            let (text, _) = slot.expect("dense ids checked above");
            Node {
                id,
                text,
                label: labels[id],
            }
        })
        .collect();

    let edges = read_edges(edge_path, n)?;
    let edge_lines = edges.len();
    let (graph, self_loops, duplicate_edges) = TextGraph::from_edges(nodes, edges, class_names)?;
    let report = LoadReport {
        nodes: n,
        edge_lines,
        self_loops,
        duplicate_edges,
    };
    Ok((graph, report))
}

fn read_edges(path: &Path, n: usize) -> Result<Vec<(NodeId, NodeId)>> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut edges = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (u, v) = if trimmed.starts_with('{') {
            let rec: EdgeRecord = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("malformed edge record: {e}"),
            })?;
            (rec.src, rec.dst)
        } else {
            let mut parts = trimmed.split_whitespace();
            let mut next = |name: &str| -> Result<u64> {
                parts
                    .next()
                    .ok_or_else(|| format!("missing {name}"))
                    .and_then(|t| t.parse::<u64>().map_err(|e| format!("{name}: {e}")))
                    .map_err(|message| Error::Parse {
                        path: path.to_path_buf(),
                        line: lineno,
                        message: format!("malformed edge line: {message}"),
                    })
            };
            let u = next("source")?;
            let v = next("target")?;
            (u, v)
        };
        for missing in [u, v] {
            if missing as usize >= n {
                return Err(Error::UnknownNode {
                    path: path.to_path_buf(),
                    line: lineno,
                    src: u,
                    dst: v,
                    missing,
                });
            }
        }
        edges.push((u as usize, v as usize));
    }
    Ok(edges)
}

/// Writes node records and `u<TAB>v` edges. Labels are written as integers
/// when the class names are the ids themselves, otherwise by name.
pub fn write_graph(graph: &TextGraph, node_path: &Path, edge_path: &Path) -> Result<()> {
    let file = fs::File::create(node_path).map_err(|e| Error::io(node_path, e))?;
    let mut w = BufWriter::new(file);
    for node in graph.nodes() {
        let mut rec = serde_json::Map::new();
        rec.insert("id".into(), Value::from(node.id as u64));
        rec.insert("text".into(), Value::from(node.text.clone()));
        if let Some(c) = node.label {
            let name = &graph.class_names()[c];
            let label = if *name == c.to_string() {
                Value::from(c as u64)
            } else {
                Value::from(name.clone())
            };
            rec.insert("label".into(), label);
        }
        writeln!(w, "{}", Value::Object(rec)).map_err(|e| Error::io(node_path, e))?;
    }
    w.flush().map_err(|e| Error::io(node_path, e))?;

    let file = fs::File::create(edge_path).map_err(|e| Error::io(edge_path, e))?;
    let mut w = BufWriter::new(file);
    for (u, v) in graph.edges() {
        writeln!(w, "{u}\t{v}").map_err(|e| Error::io(edge_path, e))?;
    }
    w.flush().map_err(|e| Error::io(edge_path, e))
}
