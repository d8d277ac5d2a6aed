//! Deterministic compositional translator with fault injection.
//!
//! Each source token maps through a dictionary to one or more target
//! tokens. Faults then edit the target token sequence: under-translation
//! drops tokens, over-translation duplicates them and mistranslation
//! replaces them with a designated wrong token. Without faults every RTI's
//! translation is a sub-multiset of its container's translation.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{normalize_text, Backend, GatewayError, Origin, Translation, TranslationRequest};

/// Source word to target text. Lookup tries the exact token, then its
/// lower-cased form.
pub type Dictionary = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    UnderTranslation,
    OverTranslation,
    Mistranslation,
}

/// Which target tokens a fault touches. Source positions are token indices
/// into the whitespace-split source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "select", rename_all = "snake_case")]
pub enum TokenSelector {
    /// Target tokens produced by source tokens in `[start, end)`.
    Span { start: usize, end: usize },
    /// As `Span`, restricted to target tokens equal to `token`.
    SpanToken { start: usize, end: usize, token: String },
    /// `count` distinct target positions drawn with the fault's seed.
    Sample { count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub target: TokenSelector,
    #[serde(default)]
    pub seed: u64,
    /// Wrong token used by mistranslation; `x<seed>` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<String>,
}

impl FaultSpec {
    pub fn new(kind: FaultKind, target: TokenSelector, seed: u64) -> Self {
        FaultSpec {
            kind,
            target,
            seed,
            replacement: None,
        }
    }

    pub fn with_replacement(mut self, token: impl Into<String>) -> Self {
        self.replacement = Some(token.into());
        self
    }

    fn replacement_token(&self) -> String {
        self.replacement.clone().unwrap_or_else(|| format!("x{}", self.seed))
    }

    fn select(&self, tokens: &[(usize, String)]) -> Vec<bool> {
        let mut picked = vec![false; tokens.len()];
        match &self.target {
            TokenSelector::Span { start, end } => {
                for (i, (src, _)) in tokens.iter().enumerate() {
                    picked[i] = (*start..*end).contains(src);
                }
            }
            TokenSelector::SpanToken { start, end, token } => {
                for (i, (src, tok)) in tokens.iter().enumerate() {
                    picked[i] = (*start..*end).contains(src) && tok == token;
                }
            }
            TokenSelector::Sample { count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let n = (*count).min(tokens.len());
                for i in sample(&mut rng, tokens.len(), n) {
                    picked[i] = true;
                }
            }
        }
        picked
    }

    fn apply(&self, tokens: Vec<(usize, String)>) -> Vec<(usize, String)> {
        let picked = self.select(&tokens);
        let mut out = Vec::with_capacity(tokens.len());
        for ((src, tok), hit) in tokens.into_iter().zip(picked) {
            if !hit {
                out.push((src, tok));
                continue;
            }
            match self.kind {
                FaultKind::UnderTranslation => {}
                FaultKind::OverTranslation => {
                    out.push((src, tok.clone()));
                    out.push((src, tok));
                }
                FaultKind::Mistranslation => out.push((src, self.replacement_token())),
            }
        }
        out
    }
}

fn lookup<'a>(dictionary: &'a Dictionary, token: &str) -> Option<&'a String> {
    dictionary.get(token).or_else(|| dictionary.get(&token.to_lowercase()))
}

/// Target tokens for `text`, each tagged with its source position.
fn compose(text: &str, dictionary: &Dictionary) -> Result<Vec<(usize, String)>, GatewayError> {
    let mut out = Vec::new();
    for (i, tok) in text.split_whitespace().enumerate() {
        let target = lookup(dictionary, tok).ok_or_else(|| GatewayError::UnknownToken { token: tok.to_string() })?;
        out.extend(target.split_whitespace().map(|t| (i, t.to_string())));
    }
    Ok(out)
}

/// Token-by-token translation followed by `faults`, applied in order.
pub fn mock_translate(
    req: &TranslationRequest,
    dictionary: &Dictionary,
    faults: &[FaultSpec],
) -> Result<Translation, GatewayError> {
    let mut tokens = compose(&req.text, dictionary)?;
    for fault in faults {
        tokens = fault.apply(tokens);
    }
    let target_text = tokens.into_iter().map(|(_, t)| t).collect::<Vec<_>>().join(" ");
    Ok(Translation {
        request: req.clone(),
        target_text,
        origin: Origin::Mock,
    })
}

/// Backend form of [`mock_translate`]. Faults are attached to source texts
/// (matched after normalization).
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    dictionary: Dictionary,
    faults: BTreeMap<String, Vec<FaultSpec>>,
}

impl MockBackend {
    pub fn new(dictionary: Dictionary) -> Self {
        MockBackend {
            dictionary,
            faults: BTreeMap::new(),
        }
    }

    pub fn inject(&mut self, source_text: &str, fault: FaultSpec) {
        self.faults.entry(normalize_text(source_text)).or_default().push(fault);
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    fn faults_for(&self, text: &str) -> &[FaultSpec] {
        self.faults.get(&normalize_text(text)).map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Backend for MockBackend {
    fn translate(&self, req: &TranslationRequest) -> Result<String, GatewayError> {
        mock_translate(req, &self.dictionary, self.faults_for(&req.text)).map(|t| t.target_text)
    }

    fn origin(&self) -> Origin {
        Origin::Mock
    }
}
