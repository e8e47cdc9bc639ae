//! Listwise link-prediction prompt.
//!
//! A node's text is read as a title (first line) followed by an abstract
//! (the remaining lines, joined by spaces). Candidates are lettered in slot
//! order; hop distances never appear in the rendered text.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum PromptTemplate {
    #[default]
    #[serde(rename = "citation-v1")]
    Citation,
}

const CITATION_INSTRUCTION: &str = "Given a source paper and multiple candidate papers, identify which \
candidate paper is most likely to have a citation relationship with the source paper.";
const CITATION_QUESTION: &str = "Which candidate paper is most likely to be cited by or cite the source \
paper? Provide your answer by reproducing the title and abstract of the selected paper.";
const SOURCE_HEADER: &str = "Source Paper: ";
const CANDIDATE_HEADER: &str = "\n\nCandidate Papers:\n";

impl PromptTemplate {
    pub fn id(&self) -> &'static str {
        match self {
            PromptTemplate::Citation => "citation-v1",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "citation-v1" => Some(PromptTemplate::Citation),
            _ => None,
        }
    }

    /// The source section of the prompt (everything the model is told about
    /// the source node). This is the context the policy scores against.
    pub fn source_block(&self, source_text: &str) -> String {
        let (title, abstract_) = split_title(source_text);
        format!("'{title}'\nAbstract: {abstract_}")
    }

    /// Recovers the source section from a rendered prompt.
    pub fn extract_source_block<'a>(&self, prompt: &'a str) -> Option<&'a str> {
        let start = prompt.find(SOURCE_HEADER)? + SOURCE_HEADER.len();
        let len = prompt[start..].find(CANDIDATE_HEADER)?;
        Some(&prompt[start..start + len])
    }

    /// Renders the prompt; `candidates` are texts already in slot order.
    pub fn render(&self, source_text: &str, candidates: &[&str]) -> String {
        let mut out = String::new();
        out.push_str(CITATION_INSTRUCTION);
        out.push_str("\n\n");
        out.push_str(SOURCE_HEADER);
        out.push_str(&self.source_block(source_text));
        out.push_str(CANDIDATE_HEADER);
        for (slot, text) in candidates.iter().enumerate() {
            let (title, abstract_) = split_title(text);
            out.push_str(&format!("{}. '{title}'\nAbstract: {abstract_}\n\n", slot_letter(slot)));
        }
        out.push_str(CITATION_QUESTION);
        out
    }
}

/// `A`, `B`, ..., `Z`, then `AA`, `AB`, ...
pub fn slot_letter(slot: usize) -> String {
    let mut n = slot;
    let mut letters = Vec::new();
    loop {
        letters.push((b'A' + (n % 26) as u8) as char);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    letters.iter().rev().collect()
}

fn split_title(text: &str) -> (&str, String) {
    match text.split_once('\n') {
        Some((title, rest)) => (
            title.trim(),
            rest.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" "),
        ),
        None => (text.trim(), String::new()),
    }
}

/// Cuts `text` to at most `max_chars` characters, backing off to the last
/// whitespace inside the limit when there is one.
pub fn truncate_text(text: &str, max_chars: usize) -> String {
    match text.char_indices().nth(max_chars) {
        None => text.to_string(),
        Some((cut, next)) => {
            let head = &text[..cut];
            if next.is_whitespace() {
                return head.trim_end().to_string();
            }
            match head.rfind(char::is_whitespace) {
                Some(ws) => head[..ws].trim_end().to_string(),
                None => head.to_string(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn letters() {
        assert_eq!(slot_letter(0), "A");
        assert_eq!(slot_letter(2), "C");
        assert_eq!(slot_letter(25), "Z");
        assert_eq!(slot_letter(26), "AA");
        assert_eq!(slot_letter(27), "AB");
    }

    #[test]
    fn truncation_respects_word_boundaries() {
        assert_eq!(truncate_text("alpha beta gamma", 100), "alpha beta gamma");
        assert_eq!(truncate_text("alpha beta gamma", 12), "alpha beta");
        assert_eq!(truncate_text("alpha beta gamma", 10), "alpha beta");
        assert_eq!(truncate_text("alpha beta gamma", 11), "alpha beta");
        assert_eq!(truncate_text("alphabet", 5), "alpha");
        assert_eq!(truncate_text("ééé ééé", 5), "ééé");
        assert_eq!(truncate_text("", 0), "");
    }

    #[test]
    fn source_block_round_trips_through_prompt() {
        let t = PromptTemplate::Citation;
        let p = t.render("Title here\nsome abstract\nmore", &["x\ny", "z"]);
        assert_eq!(t.extract_source_block(&p).unwrap(), t.source_block("Title here\nsome abstract\nmore"));
        assert_eq!(t.source_block("Title here\nsome abstract\nmore"), "'Title here'\nAbstract: some abstract more");
    }

    #[test]
    fn template_ids() {
        assert_eq!(PromptTemplate::from_id("citation-v1"), Some(PromptTemplate::Citation));
        assert_eq!(PromptTemplate::from_id("nope"), None);
        assert_eq!(serde_json::to_string(&PromptTemplate::Citation).unwrap(), "\"citation-v1\"");
    }
}
