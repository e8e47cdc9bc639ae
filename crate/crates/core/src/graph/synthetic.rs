//! Stochastic-block-model text graphs with class vocabularies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Node, TextGraph};
use crate::error::{Error, Result};
use crate::seed;

/// Share of each node's tokens drawn from its own class vocabulary.
const CLASS_TOKEN_SHARE: f64 = 0.8;
/// Number of leading tokens rendered as the node's title line.
const TITLE_TOKENS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub nodes_per_class: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub vocab_per_class: usize,
    pub shared_vocab: usize,
    pub tokens_per_node: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_classes: 3,
            nodes_per_class: 100,
            p_intra: 0.1,
            p_inter: 0.005,
            vocab_per_class: 40,
            shared_vocab: 60,
            tokens_per_node: 30,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_classes", self.num_classes),
            ("nodes_per_class", self.nodes_per_class),
            ("vocab_per_class", self.vocab_per_class),
            ("shared_vocab", self.shared_vocab),
            ("tokens_per_node", self.tokens_per_node),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(Error::config(format!("synthetic.{field}"), "must be positive"));
            }
        }
        for (field, p) in [("p_intra", self.p_intra), ("p_inter", self.p_inter)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("synthetic.{field}"), "must be a probability"));
            }
        }
        if self.p_intra <= self.p_inter {
            return Err(Error::config("synthetic.p_intra", "must exceed p_inter"));
        }
        Ok(())
    }

    /// Expected fraction of same-class edges under the block model.
    pub fn expected_homophily(&self) -> f64 {
        let c = self.num_classes as f64;
        let n = self.nodes_per_class as f64;
        let intra = c * n * (n - 1.0) / 2.0 * self.p_intra;
        let inter = c * (c - 1.0) / 2.0 * n * n * self.p_inter;
        intra / (intra + inter)
    }
}

fn class_token(class: usize, j: usize) -> String {
    format!("c{class}t{j}")
}

fn shared_token(j: usize) -> String {
    format!("s{j}")
}

/// Node `i` belongs to class `i % num_classes`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<TextGraph> {
    spec.validate()?;
    let n = spec.num_classes * spec.nodes_per_class;
    let class_of = |i: usize| i % spec.num_classes;

    let mut text_rng = seed::rng_from(seed::mix(spec.seed, &[seed::tag("synthetic-text")]));
    let nodes: Vec<Node> = (0..n)
        .map(|i| {
            let c = class_of(i);
            let tokens: Vec<String> = (0..spec.tokens_per_node)
                .map(|_| {
                    if text_rng.gen_bool(CLASS_TOKEN_SHARE) {
                        class_token(c, text_rng.gen_range(0..spec.vocab_per_class))
                    } else {
                        shared_token(text_rng.gen_range(0..spec.shared_vocab))
                    }
                })
                .collect();
            let split = TITLE_TOKENS.min(tokens.len());
            let title = tokens[..split].join(" ");
            let text = if split < tokens.len() {
                format!("{title}\n{}", tokens[split..].join(" "))
            } else {
                title
            };
            Node {
                id: i,
                text,
                label: Some(c),
            }
        })
        .collect();

    let mut edge_rng = seed::rng_from(seed::mix(spec.seed, &[seed::tag("synthetic-edges")]));
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if class_of(u) == class_of(v) {
                spec.p_intra
            } else {
                spec.p_inter
            };
            if edge_rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }

    let names = (0..spec.num_classes).map(|c| format!("class{c}")).collect();
    let (graph, _, _) = TextGraph::from_edges(nodes, edges, names)?;
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::homophily_ratio;

    #[test]
    fn no_inter_edges_means_perfect_homophily() {
        let spec = SyntheticSpec {
            p_inter: 0.0,
            nodes_per_class: 30,
            ..Default::default()
        };
        let g = generate_synthetic(&spec).unwrap();
        assert_eq!(homophily_ratio(&g).unwrap(), 1.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = SyntheticSpec {
            nodes_per_class: 40,
            ..Default::default()
        };
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        let other = SyntheticSpec { seed: 8, ..spec.clone() };
        assert_ne!(generate_synthetic(&spec).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn rejects_invalid_specs() {
        let bad = SyntheticSpec {
            p_intra: 0.01,
            p_inter: 0.02,
            ..Default::default()
        };
        assert!(generate_synthetic(&bad).is_err());
        let bad = SyntheticSpec {
            tokens_per_node: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn expected_homophily_closed_form() {
        // 3 * C(100, 2) * 0.1 = 1485 intra; 3 * 100^2 * 0.005 = 150 inter
        let e = SyntheticSpec::default().expected_homophily();
        assert!((e - 1485.0 / 1635.0).abs() < 1e-12);
    }

    #[test]
    fn texts_carry_title_line() {
        let g = generate_synthetic(&SyntheticSpec {
            nodes_per_class: 5,
            ..Default::default()
        })
        .unwrap();
        for node in g.nodes() {
            let (title, body) = node.text.split_once('\n').unwrap();
            assert_eq!(title.split(' ').count(), TITLE_TOKENS);
            assert_eq!(body.split(' ').count(), 30 - TITLE_TOKENS);
        }
    }
}
