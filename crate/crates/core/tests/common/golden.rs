//! The four-paper citation record stored in `data/golden_instance.jsonl`.

use hoprank::sampler::{Candidate, PreferenceInstance, PromptTemplate};

pub const GOLDEN: &str = include_str!("../data/golden_instance.jsonl");

pub const SOURCE: &str = "Statistical Ideas for Selecting Network Architectures\nChoosing the architecture of a neural network is one of the most important problems in making neural networks practically useful.";
pub const NEIGHBOR: &str = "Bayesian Graphical Models for Discrete Data\nYork's research was supported by a NSF graduate fellowship.";
pub const HOP2: &str = "Model Selection for Generalized Linear Models via GLIB, with Application to Epidemiology\nThis is the first draft of a chapter for Bayesian Biostatistics.";
pub const HOP3: &str = "Reasoning about Time and Probability\nAn essential component of an intelligent agent is the ability to notice, encode, store, and utilize information about time.";

pub const EXPECTED_PROMPT: &str = "\
Given a source paper and multiple candidate papers, identify which candidate paper is most likely to have a citation relationship with the source paper.

Source Paper: 'Statistical Ideas for Selecting Network Architectures'
Abstract: Choosing the architecture of a neural network is one of the most important problems in making neural networks practically useful.

Candidate Papers:
A. 'Reasoning about Time and Probability'
Abstract: An essential component of an intelligent agent is the ability to notice, encode, store, and utilize information about time.

B. 'Bayesian Graphical Models for Discrete Data'
Abstract: York's research was supported by a NSF graduate fellowship.

C. 'Model Selection for Generalized Linear Models via GLIB, with Application to Epidemiology'
Abstract: This is the first draft of a chapter for Bayesian Biostatistics.

Which candidate paper is most likely to be cited by or cite the source paper? Provide your answer by reproducing the title and abstract of the selected paper.";

pub fn expected_instance() -> PreferenceInstance {
    let cand = |node, hop, slot, text: &str| Candidate {
        node,
        hop,
        slot,
        text: text.to_string(),
    };
    PreferenceInstance {
        source: 0,
        candidates: vec![cand(1, 1, 1, NEIGHBOR), cand(2, 2, 2, HOP2), cand(3, 3, 0, HOP3)],
        prompt: EXPECTED_PROMPT.to_string(),
        rng_seed: 42,
        max_hop: 3,
        template: PromptTemplate::Citation,
    }
}
