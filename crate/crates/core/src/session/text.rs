//! Tokenization and unknown-term detection.

use std::collections::{HashMap, HashSet};

use crate::ontology::{NodeIx, NodeKind, Ontology};

/// Minimal English stopword list used when no custom list is configured.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be",
    "been", "before", "but", "by", "can", "could", "did", "do", "does", "for", "from", "get",
    "got", "had", "has", "have", "he", "her", "here", "hi", "his", "how", "i", "if", "in",
    "into", "is", "it", "its", "just", "me", "my", "need", "no", "not", "of", "on", "or",
    "our", "please", "she", "should", "so", "some", "than", "thank", "thanks", "that", "the",
    "their", "them", "then", "there", "these", "they", "this", "those", "to", "up", "us",
    "was", "we", "were", "what", "when", "where", "which", "who", "why", "will", "with",
    "would", "you", "your",
];

/// Lowercases, strips non-alphanumeric characters and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| {
            raw.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Normalizes a single word the way [`tokenize`] would, without plural
/// handling. Used for words supplied by clients (e.g. selections).
pub fn normalize_word(word: &str) -> String {
    tokenize(word).join(" ")
}

fn is_numeric(token: &str) -> bool {
    token.chars().all(|c| c.is_ascii_digit())
}

/// The singular form tried for plural-looking tokens.
pub(crate) fn singular(token: &str) -> Option<&str> {
    if token.chars().count() >= 4 && token.ends_with('s') {
        Some(&token[..token.len() - 1])
    } else {
        None
    }
}

/// Unknown words in `text`, in order of first appearance and deduplicated.
///
/// Numeric tokens are skipped. A token of four or more characters ending in
/// `s` counts as known if either it or its singular is; otherwise the
/// singular is reported.
pub fn detect_unknown_with(text: &str, known: impl Fn(&str) -> bool) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for token in tokenize(text) {
        if is_numeric(&token) || known(&token) {
            continue;
        }
        let reported = match singular(&token) {
            Some(s) if known(s) => continue,
            Some(s) => s.to_string(),
            None => token,
        };
        if !out.contains(&reported) {
            out.push(reported);
        }
    }
    out
}

/// [`detect_unknown_with`] against an explicit vocabulary set.
pub fn detect_unknown_terms(text: &str, vocab: &HashSet<String>) -> Vec<String> {
    detect_unknown_with(text, |w| vocab.contains(w))
}

/// Static part of the known-word set: stopwords plus label tokens, and an
/// index from full normalized labels to nodes.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: HashSet<String>,
    labels: HashMap<String, NodeIx>,
    longest_label: usize,
}

impl Vocabulary {
    pub fn new(ontology: &Ontology, stopwords: &[String]) -> Self {
        let mut words: HashSet<String> = stopwords.iter().map(|s| s.to_lowercase()).collect();
        let mut labels: HashMap<String, NodeIx> = HashMap::new();
        let mut longest_label = 1;
        for ix in ontology.nodes() {
            let toks = tokenize(ontology.label(ix));
            if toks.is_empty() {
                continue;
            }
            longest_label = longest_label.max(toks.len());
            words.extend(toks.iter().cloned());
            let key = toks.join(" ");
            // Shared labels resolve to a concept first, then the smaller id.
            let rank = |n: NodeIx| (ontology.kind(n) != NodeKind::Concept, ontology.id(n).to_string());
            match labels.get(&key) {
                Some(&prev) if rank(prev) <= rank(ix) => {}
                _ => {
                    labels.insert(key, ix);
                }
            }
        }
        Vocabulary {
            words,
            labels,
            longest_label,
        }
    }

    pub fn with_default_stopwords(ontology: &Ontology) -> Self {
        let stop: Vec<String> = DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect();
        Self::new(ontology, &stop)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn words(&self) -> &HashSet<String> {
        &self.words
    }

    pub(crate) fn label(&self, phrase: &str) -> Option<NodeIx> {
        self.labels.get(phrase).copied()
    }

    pub(crate) fn longest_label(&self) -> usize {
        self.longest_label
    }
}
