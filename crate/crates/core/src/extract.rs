//! Referentially transparent input (RTI) identification and pair generation.
//!
//! Every NP constituent whose yield has at most `max_words` tokens and at
//! least `min_content_words` non-stop-word tokens is an RTI. Each RTI is
//! paired with the full sentence and with every enclosing NP that is itself
//! an RTI.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treebank::{ConstituencyTree, NodePath, Span};

pub const NP_LABEL: &str = "NP";

/// English function words used for the content-word floor.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "is", "are", "was", "were", "be", "been", "being", "am", "of",
    "in", "on", "at", "to", "for", "with", "by", "from", "as", "into", "about", "than", "and", "or", "but", "nor",
    "so", "if", "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "my", "your", "his",
    "its", "our", "their", "'s", "not", "no", "do", "does", "did", "has", "have", "had", "will", "would", "can",
    "could",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("max_words ({max}) must be >= min_content_words ({min}) >= 1")]
    Bounds { max: usize, min: usize },
    #[error("stop-word list is empty")]
    EmptyStopwords,
    #[error("reading stop-word file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub max_words: usize,
    pub min_content_words: usize,
    pub stopwords: BTreeSet<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_words: 10,
            min_content_words: 3,
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl FilterConfig {
    pub fn new(max_words: usize, min_content_words: usize, stopwords: BTreeSet<String>) -> Result<Self, ConfigError> {
        let cfg = FilterConfig {
            max_words,
            min_content_words,
            stopwords: stopwords.into_iter().map(|w| w.to_lowercase()).collect(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.min_content_words < 1 || self.max_words < self.min_content_words {
            return Err(ConfigError::Bounds {
                max: self.max_words,
                min: self.min_content_words,
            });
        }
        if self.stopwords.is_empty() {
            return Err(ConfigError::EmptyStopwords);
        }
        Ok(())
    }

    pub fn is_content_word(&self, token: &str) -> bool {
        !self.stopwords.contains(&token.to_lowercase())
    }

    fn passes(&self, words: &[String]) -> bool {
        words.len() <= self.max_words
            && words.iter().filter(|w| self.is_content_word(w)).count() >= self.min_content_words
    }
}

/// Parses a stop-word list: one word per line, `#` starts a comment.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let words = parse_stopwords(&text);
    if words.is_empty() {
        return Err(ConfigError::EmptyStopwords);
    }
    Ok(words)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rti {
    pub sentence_id: String,
    pub span: Span,
    pub text: String,
    pub node_path: NodePath,
}

impl Rti {
    pub fn word_count(&self) -> usize {
        self.span.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainerKind {
    FullSentence,
    AncestorNp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RtiPair {
    /// Index of the pair within its sentence, in generation order.
    pub pair_id: usize,
    pub rti: Rti,
    pub container_text: String,
    pub container_span: Span,
    pub container_kind: ContainerKind,
}

/// All RTIs of `tree`, in pre-order. When several nested NP nodes share one
/// span (unary NP chains) only the outermost is kept.
pub fn extract_rtis(tree: &ConstituencyTree, cfg: &FilterConfig) -> Vec<Rti> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (path, node) in tree.preorder() {
        if node.is_leaf() || node.base_label() != NP_LABEL {
            continue;
        }
        let words = tree.yield_text(node);
        if !cfg.passes(words) || !seen.insert(node.span()) {
            continue;
        }
        out.push(Rti {
            sentence_id: tree.sentence_id().to_string(),
            span: node.span(),
            text: words.join(" "),
            node_path: path,
        });
    }
    out
}

/// Builds the RTI pairs of one sentence. For each RTI, in order: the pair
/// with the full sentence (unless the RTI spans the whole sentence), then
/// one pair per enclosing RTI, innermost first.
pub fn generate_pairs(rtis: &[Rti], sentence: &str, tree: &ConstituencyTree) -> Vec<RtiPair> {
    let extracted: HashSet<&NodePath> = rtis.iter().map(|r| &r.node_path).collect();
    let whole = tree.root().span();
    let mut pairs = Vec::new();
    for rti in rtis {
        if rti.span != whole {
            pairs.push(RtiPair {
                pair_id: pairs.len(),
                rti: rti.clone(),
                container_text: sentence.to_string(),
                container_span: whole,
                container_kind: ContainerKind::FullSentence,
            });
        }
        for (path, node) in tree.ancestors_with_label(&rti.node_path, NP_LABEL) {
            if !extracted.contains(&path) || node.span() == rti.span {
                continue;
            }
            pairs.push(RtiPair {
                pair_id: pairs.len(),
                rti: rti.clone(),
                container_text: tree.yield_text(node).join(" "),
                container_span: node.span(),
                container_kind: ContainerKind::AncestorNp,
            });
        }
    }
    pairs
}
