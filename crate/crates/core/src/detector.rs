//! Bag-of-words comparison of translated RTI pairs.
//!
//! The distance of a pair is the number of word occurrences in the RTI's
//! translation that have no counterpart in the container's translation:
//! `sum over w of max(0, count_rti(w) - count_container(w))`. Extra words in
//! the container never raise it, so over-translation in the container is
//! invisible to this check.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::RtiPair;
use crate::gateway::Translation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DetectError {
    #[error("bags built with different tokenization modes ({left} vs {right})")]
    ModeMismatch {
        left: TokenizationMode,
        right: TokenizationMode,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segmentation {
    /// Unicode-whitespace split, then lower-cased.
    Whitespace,
    /// Every non-whitespace character is a word (Chinese, Japanese).
    PerCharacter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PunctuationPolicy {
    Keep,
    Strip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenizationMode {
    pub segmentation: Segmentation,
    pub punctuation: PunctuationPolicy,
}

impl TokenizationMode {
    pub const fn new(segmentation: Segmentation, punctuation: PunctuationPolicy) -> Self {
        TokenizationMode {
            segmentation,
            punctuation,
        }
    }

    /// Per-character with punctuation stripped for Chinese and Japanese
    /// targets, whitespace with punctuation kept otherwise.
    pub fn for_language(tgt_lang: &str) -> Self {
        let primary = tgt_lang.split(['-', '_']).next().unwrap_or("").to_ascii_lowercase();
        match primary.as_str() {
            "zh" | "ja" => Self::new(Segmentation::PerCharacter, PunctuationPolicy::Strip),
            _ => Self::new(Segmentation::Whitespace, PunctuationPolicy::Keep),
        }
    }
}

impl fmt::Display for TokenizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let seg = match self.segmentation {
            Segmentation::Whitespace => "whitespace",
            Segmentation::PerCharacter => "per_character",
        };
        let punct = match self.punctuation {
            PunctuationPolicy::Keep => "keep",
            PunctuationPolicy::Strip => "strip",
        };
        write!(f, "{seg}/{punct}")
    }
}

fn punct_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\p{P}$").expect("valid regex"))
}

pub fn is_punctuation(c: char) -> bool {
    let mut buf = [0u8; 4];
    punct_re().is_match(c.encode_utf8(&mut buf))
}

/// Splits target text into words under `mode`.
pub fn tokenize(text: &str, mode: TokenizationMode) -> Vec<String> {
    let strip = mode.punctuation == PunctuationPolicy::Strip;
    match mode.segmentation {
        Segmentation::PerCharacter => text
            .chars()
            .filter(|c| !c.is_whitespace() && !(strip && is_punctuation(*c)))
            .map(String::from)
            .collect(),
        Segmentation::Whitespace => text
            .split_whitespace()
            .map(|tok| if strip { tok.trim_matches(is_punctuation) } else { tok })
            .filter(|tok| !tok.is_empty())
            .map(str::to_lowercase)
            .collect(),
    }
}

/// A multiset of target-language words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BagOfWords {
    counts: BTreeMap<String, usize>,
    mode: TokenizationMode,
}

impl BagOfWords {
    pub fn from_tokens<I, S>(tokens: I, mode: TokenizationMode) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut counts = BTreeMap::new();
        for tok in tokens {
            *counts.entry(tok.into()).or_insert(0) += 1;
        }
        BagOfWords { counts, mode }
    }

    pub fn count(&self, word: &str) -> usize {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<String, usize> {
        &self.counts
    }

    pub fn mode(&self) -> TokenizationMode {
        self.mode
    }

    /// Total number of occurrences.
    pub fn len(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn add(&mut self, word: impl Into<String>, n: usize) {
        if n > 0 {
            *self.counts.entry(word.into()).or_insert(0) += n;
        }
    }
}

pub fn bag_of_words(text: &str, mode: TokenizationMode) -> BagOfWords {
    BagOfWords::from_tokens(tokenize(text, mode), mode)
}

/// `|rti \ container|` as multisets. The RTI side goes first.
pub fn bow_distance(rti: &BagOfWords, container: &BagOfWords) -> Result<usize, DetectError> {
    if rti.mode != container.mode {
        return Err(DetectError::ModeMismatch {
            left: rti.mode,
            right: container.mode,
        });
    }
    Ok(rti
        .counts
        .iter()
        .map(|(w, &n)| n.saturating_sub(container.count(w)))
        .sum())
}

/// Distance between the translations of an RTI and its container.
pub fn translation_distance(rti_target: &str, container_target: &str, mode: TokenizationMode) -> usize {
    bow_distance(&bag_of_words(rti_target, mode), &bag_of_words(container_target, mode))
        .expect("same mode on both sides")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuspiciousIssue {
    pub issue_id: String,
    pub sentence_index: usize,
    pub pair: RtiPair,
    pub rti_translation: Translation,
    pub container_translation: Translation,
    pub distance: usize,
    pub threshold_used: usize,
}

/// An RTI pair with both sides translated, ready for detection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslatedPair {
    pub sentence_index: usize,
    pub pair: RtiPair,
    pub rti_translation: Translation,
    pub container_translation: Translation,
}

impl TranslatedPair {
    /// Stable identifier derived from the backend, languages and both
    /// source texts, so labels survive re-runs.
    pub fn issue_id(&self) -> String {
        use sha2::{Digest, Sha256};
        let req = &self.rti_translation.request;
        let mut hasher = Sha256::new();
        for part in [
            req.backend_id.as_str(),
            req.src_lang.as_str(),
            req.tgt_lang.as_str(),
            self.pair.rti.text.as_str(),
            self.pair.container_text.as_str(),
        ] {
            hasher.update(part.as_bytes());
            hasher.update([0u8]);
        }
        hex::encode(&hasher.finalize()[..8])
    }

    pub fn distance(&self, mode: TokenizationMode) -> usize {
        translation_distance(
            &self.rti_translation.target_text,
            &self.container_translation.target_text,
            mode,
        )
    }
}

/// Flags the pair when its distance is strictly greater than `threshold`.
pub fn detect(
    pair: &RtiPair,
    rti_translation: &Translation,
    container_translation: &Translation,
    threshold: usize,
    mode: TokenizationMode,
) -> Result<Option<SuspiciousIssue>, DetectError> {
    let tp = TranslatedPair {
        sentence_index: 0,
        pair: pair.clone(),
        rti_translation: rti_translation.clone(),
        container_translation: container_translation.clone(),
    };
    detect_translated(&tp, threshold, mode)
}

pub fn detect_translated(
    tp: &TranslatedPair,
    threshold: usize,
    mode: TokenizationMode,
) -> Result<Option<SuspiciousIssue>, DetectError> {
    let distance = bow_distance(
        &bag_of_words(&tp.rti_translation.target_text, mode),
        &bag_of_words(&tp.container_translation.target_text, mode),
    )?;
    if distance <= threshold {
        return Ok(None);
    }
    Ok(Some(SuspiciousIssue {
        issue_id: tp.issue_id(),
        sentence_index: tp.sentence_index,
        pair: tp.pair.clone(),
        rti_translation: tp.rti_translation.clone(),
        container_translation: tp.container_translation.clone(),
        distance,
        threshold_used: threshold,
    }))
}

/// Runs detection over all pairs, keeping the input order.
pub fn detect_all(
    pairs: &[TranslatedPair],
    threshold: usize,
    mode: TokenizationMode,
) -> Result<Vec<SuspiciousIssue>, DetectError> {
    let mut out = Vec::new();
    for tp in pairs {
        if let Some(issue) = detect_translated(tp, threshold, mode)? {
            out.push(issue);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const WS: TokenizationMode = TokenizationMode::new(Segmentation::Whitespace, PunctuationPolicy::Keep);
    const ZH: TokenizationMode = TokenizationMode::new(Segmentation::PerCharacter, PunctuationPolicy::Strip);

    #[test]
    fn fig5_bag() {
        let bow = bag_of_words("we watched two movies and two basketball games", WS);
        assert_eq!(bow.count("two"), 2);
        assert_eq!(bow.len(), 8);
        assert_eq!(bow.counts().len(), 7);
        assert!(bow.counts().iter().all(|(w, &n)| n == if w == "two" { 2 } else { 1 }));
    }

    #[test]
    fn single_token_bag() {
        let bow = bag_of_words("books", WS);
        assert_eq!(bow.counts().len(), 1);
        assert_eq!(bow.count("books"), 1);
    }

    #[test]
    fn per_character_bag() {
        let bow = bag_of_words("双边 会谈", ZH);
        assert_eq!(bow.counts().len(), 4);
        assert_eq!(bow.len(), 4);
    }

    #[test]
    fn chinese_punctuation_stripped() {
        assert_eq!(tokenize("会谈。“好”，", ZH), ["会", "谈", "好"]);
        let keep = TokenizationMode::new(Segmentation::PerCharacter, PunctuationPolicy::Keep);
        assert_eq!(tokenize("会谈。", keep).len(), 3);
    }

    #[test]
    fn whitespace_case_folds_and_strips_edges() {
        let strip = TokenizationMode::new(Segmentation::Whitespace, PunctuationPolicy::Strip);
        assert_eq!(
            tokenize("Two Books, \"fine\" -- ok.", strip),
            ["two", "books", "fine", "ok"]
        );
        assert_eq!(tokenize("Two Books,", WS), ["two", "books,"]);
    }

    #[test]
    fn worked_example_distance_two() {
        let r = bag_of_words("two interesting books", WS);
        let con = bag_of_words("we watch two movies and two basketball games", WS);
        assert_eq!(bow_distance(&r, &con).unwrap(), 2);
    }

    #[test]
    fn identity_is_zero() {
        let a = bag_of_words("a b b c", WS);
        assert_eq!(bow_distance(&a, &a).unwrap(), 0);
    }

    #[test]
    fn empty_container_distance_is_size() {
        let a = bag_of_words("x y y z", WS);
        let empty = BagOfWords::from_tokens(Vec::<String>::new(), WS);
        assert_eq!(bow_distance(&a, &empty).unwrap(), a.len());
        // whitespace-only text yields the same empty bag
        assert_eq!(bag_of_words("  \t ", WS), empty);
    }

    #[test]
    fn mode_mismatch() {
        let a = bag_of_words("ab", WS);
        let b = bag_of_words("ab", ZH);
        assert_eq!(
            bow_distance(&a, &b),
            Err(DetectError::ModeMismatch { left: WS, right: ZH })
        );
    }

    #[test]
    fn language_defaults() {
        assert_eq!(TokenizationMode::for_language("zh-CN"), ZH);
        assert_eq!(TokenizationMode::for_language("de"), WS);
    }
}
