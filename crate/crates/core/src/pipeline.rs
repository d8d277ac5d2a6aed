//! The four-stage run: extract RTIs, build pairs, translate, detect.
//!
//! Corpus files are JSONL, one sentence per line:
//!
//! ```json
//! {"id": "s1", "text": "I ran", "tree": "(S (NP (PRP I)) (VP (VBD ran)))"}
//! ```
//!
//! Configuration is TOML; relative paths inside it resolve against the
//! config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::detector::{detect_all, DetectError, SuspiciousIssue, TokenizationMode, TranslatedPair};
use crate::extract::{extract_rtis, generate_pairs, load_stopwords, ConfigError, FilterConfig, RtiPair};
use crate::gateway::{
    Backend, Dictionary, FaultSpec, Gateway, GatewayError, MockBackend, RestBackend, RestConfig, TranslationCache,
    TranslationRequest,
};
use crate::treebank::{parse_bracketed, TreeError};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("corpus line {line}: {message}")]
    CorpusFormat { line: usize, message: String },
    #[error("sentence {sentence_id}: text {text:?} does not match tree yield {tree_yield:?}")]
    YieldMismatch {
        sentence_id: String,
        text: String,
        tree_yield: String,
    },
    #[error("sentence {sentence_id}: {source}")]
    Tree {
        sentence_id: String,
        #[source]
        source: TreeError,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Filter(#[from] ConfigError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub text: String,
    pub tree: String,
}

pub fn parse_corpus(text: &str) -> Result<Vec<CorpusEntry>, PipelineError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: CorpusEntry = serde_json::from_str(line).map_err(|e| PipelineError::CorpusFormat {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(entry);
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<Vec<CorpusEntry>, PipelineError> {
    parse_corpus(&std::fs::read_to_string(path).map_err(io_err(path))?)
}

pub fn corpus_to_jsonl(entries: &[CorpusEntry]) -> String {
    entries
        .iter()
        .map(|e| serde_json::to_string(e).expect("corpus entry serializes") + "\n")
        .collect()
}

pub fn corpus_digest(entries: &[CorpusEntry]) -> String {
    format!(
        "sha256:{}",
        hex::encode(Sha256::digest(corpus_to_jsonl(entries).as_bytes()))
    )
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Replay,
    Rest,
    Mock,
}

impl BackendKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackendKind::Replay => "replay",
            BackendKind::Rest => "rest",
            BackendKind::Mock => "mock",
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "replay" => Ok(BackendKind::Replay),
            "rest" => Ok(BackendKind::Rest),
            "mock" => Ok(BackendKind::Mock),
            other => Err(format!("unknown backend {other:?} (expected replay, rest or mock)")),
        }
    }
}

fn default_threshold() -> usize {
    2
}
fn default_src() -> String {
    "en".into()
}
fn default_tgt() -> String {
    "zh".into()
}
fn default_concurrency() -> usize {
    4
}
fn default_max_words() -> usize {
    10
}
fn default_min_content() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSection {
    #[serde(default = "default_max_words")]
    pub max_words: usize,
    #[serde(default = "default_min_content")]
    pub min_content_words: usize,
    #[serde(default)]
    pub stopwords_file: Option<PathBuf>,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection {
            max_words: 10,
            min_content_words: 3,
            stopwords_file: None,
        }
    }
}

/// A fault attached to one source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFault {
    pub text: String,
    #[serde(flatten)]
    pub fault: FaultSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockSection {
    /// JSON object mapping source words to target text.
    pub dictionary: PathBuf,
    #[serde(default)]
    pub faults: Vec<SourceFault>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendSection {
    pub kind: BackendKind,
    /// Cache namespace; defaults to the kind name.
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub replay_only: bool,
    /// Write new translations back to `cache`. Defaults to true for `rest`
    /// and false otherwise.
    #[serde(default)]
    pub persist_cache: Option<bool>,
    #[serde(default)]
    pub mock: Option<MockSection>,
    #[serde(default)]
    pub rest: Option<RestConfig>,
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection {
            kind: BackendKind::Replay,
            id: None,
            cache: None,
            replay_only: false,
            persist_cache: None,
            mock: None,
            rest: None,
        }
    }
}

impl BackendSection {
    pub fn backend_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| self.kind.as_str().to_string())
    }

    pub fn persists(&self) -> bool {
        self.cache.is_some() && self.persist_cache.unwrap_or(self.kind == BackendKind::Rest)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_threshold")]
    pub threshold: usize,
    #[serde(default = "default_src")]
    pub src_lang: String,
    #[serde(default = "default_tgt")]
    pub tgt_lang: String,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub filter: FilterSection,
    /// Defaults by target language (see [`TokenizationMode::for_language`]).
    #[serde(default)]
    pub tokenization: Option<TokenizationMode>,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            threshold: default_threshold(),
            src_lang: default_src(),
            tgt_lang: default_tgt(),
            concurrency: default_concurrency(),
            filter: FilterSection::default(),
            tokenization: None,
            backend: BackendSection::default(),
            base_dir: PathBuf::new(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.src_lang.trim().is_empty() || self.tgt_lang.trim().is_empty() {
            return Err(PipelineError::Config("languages must be non-empty".into()));
        }
        if self.backend.kind == BackendKind::Mock && self.backend.mock.is_none() {
            return Err(PipelineError::Config(
                "backend.kind = \"mock\" needs a [backend.mock] section".into(),
            ));
        }
        if self.backend.kind == BackendKind::Rest && self.backend.rest.is_none() && !self.backend.replay_only {
            return Err(PipelineError::Config(
                "backend.kind = \"rest\" needs a [backend.rest] section".into(),
            ));
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn tokenization_mode(&self) -> TokenizationMode {
        self.tokenization
            .unwrap_or_else(|| TokenizationMode::for_language(&self.tgt_lang))
    }

    pub fn filter_config(&self) -> Result<FilterConfig, PipelineError> {
        let mut filter = FilterConfig::default();
        if let Some(path) = &self.filter.stopwords_file {
            filter.stopwords = load_stopwords(&self.resolve(path))?;
        }
        Ok(FilterConfig::new(
            self.filter.max_words,
            self.filter.min_content_words,
            filter.stopwords,
        )?)
    }

    fn cache_path(&self) -> Option<PathBuf> {
        self.backend.cache.as_deref().map(|p| self.resolve(p))
    }

    /// Builds the gateway for this config, loading the cache file if any.
    pub fn gateway(&self) -> Result<Gateway, PipelineError> {
        let cache = match self.cache_path() {
            Some(p) => TranslationCache::load(&p)?,
            None => TranslationCache::default(),
        };
        let id = self.backend.backend_id();
        if self.backend.replay_only || self.backend.kind == BackendKind::Replay {
            return Ok(Gateway::replay_only(id, cache).with_concurrency(self.concurrency));
        }
        let backend: Box<dyn Backend> = match self.backend.kind {
            BackendKind::Mock => {
                let section = self.backend.mock.as_ref().expect("validated");
                let path = self.resolve(&section.dictionary);
                let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
                let dictionary: Dictionary = serde_json::from_str(&text)
                    .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
                let mut mock = MockBackend::new(dictionary);
                for f in &section.faults {
                    mock.inject(&f.text, f.fault.clone());
                }
                Box::new(mock)
            }
            BackendKind::Rest => Box::new(RestBackend::new(self.backend.rest.clone().expect("validated"))?),
            BackendKind::Replay => unreachable!("handled above"),
        };
        Ok(Gateway::new(id, backend, cache).with_concurrency(self.concurrency))
    }

    pub fn snapshot(&self) -> ConfigSnapshot {
        ConfigSnapshot {
            threshold: self.threshold,
            src_lang: self.src_lang.clone(),
            tgt_lang: self.tgt_lang.clone(),
            max_words: self.filter.max_words,
            min_content_words: self.filter.min_content_words,
            stopwords_file: self.filter.stopwords_file.as_ref().map(|p| p.display().to_string()),
            tokenization: self.tokenization_mode(),
            backend: self.backend.kind,
            backend_id: self.backend.backend_id(),
            replay_only: self.backend.replay_only || self.backend.kind == BackendKind::Replay,
        }
    }
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub threshold: usize,
    pub src_lang: String,
    pub tgt_lang: String,
    pub max_words: usize,
    pub min_content_words: usize,
    pub stopwords_file: Option<String>,
    pub tokenization: TokenizationMode,
    pub backend: BackendKind,
    pub backend_id: String,
    pub replay_only: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSummary {
    pub index: usize,
    pub id: String,
    pub rti_count: usize,
    pub pair_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub sentences: usize,
    pub rtis: usize,
    pub pairs: usize,
    pub translations: usize,
    pub issues: usize,
}

/// The deterministic run output. Wall-clock data lives in [`RunTiming`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub config: ConfigSnapshot,
    pub corpus_digest: String,
    pub sentences: Vec<SentenceSummary>,
    pub issues: Vec<SuspiciousIssue>,
    pub summary: ReportSummary,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Human-readable summary for the terminal.
    pub fn render_summary(&self) -> String {
        let mut out = format!(
            "{} sentences, {} RTIs, {} pairs, {} distinct translations; {} suspicious issue(s) at d={}\n",
            self.summary.sentences,
            self.summary.rtis,
            self.summary.pairs,
            self.summary.translations,
            self.summary.issues,
            self.config.threshold
        );
        for issue in &self.issues {
            out.push_str(&format!(
                "  [{}] distance {}: {:?} -> {:?}\n      in {:?} -> {:?}\n",
                issue.issue_id,
                issue.distance,
                issue.pair.rti.text,
                issue.rti_translation.target_text,
                issue.pair.container_text,
                issue.container_translation.target_text,
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub pairs_ms: f64,
    pub translation_ms: f64,
    pub detection_ms: f64,
    pub total_ms: f64,
}

// ---------------------------------------------------------------- stages

/// Extraction output for one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedSentence {
    pub index: usize,
    pub id: String,
    pub rti_count: usize,
    pub pairs: Vec<RtiPair>,
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses trees, checks yields, and builds every sentence's RTI pairs.
pub fn prepare(corpus: &[CorpusEntry], filter: &FilterConfig) -> Result<Vec<PreparedSentence>, PipelineError> {
    corpus
        .iter()
        .enumerate()
        .map(|(index, entry)| {
            let tree = parse_bracketed(&entry.tree)
                .map_err(|source| PipelineError::Tree {
                    sentence_id: entry.id.clone(),
                    source,
                })?
                .with_sentence_id(entry.id.clone());
            let tree_yield = tree.sentence();
            if normalize_ws(&entry.text) != tree_yield {
                return Err(PipelineError::YieldMismatch {
                    sentence_id: entry.id.clone(),
                    text: entry.text.clone(),
                    tree_yield,
                });
            }
            let rtis = extract_rtis(&tree, filter);
            let pairs = generate_pairs(&rtis, &tree_yield, &tree);
            Ok(PreparedSentence {
                index,
                id: entry.id.clone(),
                rti_count: rtis.len(),
                pairs,
            })
        })
        .collect()
}

/// Translates both sides of every pair, in sentence then pair order.
pub fn translate_pairs(
    prepared: &[PreparedSentence],
    gateway: &Gateway,
    src_lang: &str,
    tgt_lang: &str,
) -> Result<Vec<TranslatedPair>, PipelineError> {
    let mut reqs: Vec<TranslationRequest> = Vec::new();
    for s in prepared {
        for p in &s.pairs {
            reqs.push(gateway.request(&p.rti.text, src_lang, tgt_lang)?);
            reqs.push(gateway.request(&p.container_text, src_lang, tgt_lang)?);
        }
    }
    let mut translations = gateway.translate_all(&reqs)?.into_iter();
    let mut out = Vec::with_capacity(reqs.len() / 2);
    for s in prepared {
        for p in &s.pairs {
            let rti_translation = translations.next().expect("one translation per request");
            let container_translation = translations.next().expect("one translation per request");
            out.push(TranslatedPair {
                sentence_index: s.index,
                pair: p.clone(),
                rti_translation,
                container_translation,
            });
        }
    }
    Ok(out)
}

/// Everything a run produces before it is written out.
pub struct RunOutput {
    pub report: Report,
    pub pairs: Vec<TranslatedPair>,
    pub timing: RunTiming,
}

fn unix_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

/// Translates all pairs, saving the cache when the config asks for it even
/// if translation fails part-way.
pub fn collect_translations(
    cfg: &PipelineConfig,
    prepared: &[PreparedSentence],
) -> Result<Vec<TranslatedPair>, PipelineError> {
    let gateway = cfg.gateway()?;
    let result = translate_pairs(prepared, &gateway, &cfg.src_lang, &cfg.tgt_lang);
    if cfg.backend.persists() {
        if let Some(path) = cfg.cache_path() {
            gateway.cache_snapshot().save(&path)?;
        }
    }
    result
}

pub fn run(cfg: &PipelineConfig, corpus: &[CorpusEntry]) -> Result<RunOutput, PipelineError> {
    let started_unix_ms = unix_ms();
    let start = Instant::now();
    let filter = cfg.filter_config()?;
    let mode = cfg.tokenization_mode();

    let t = Instant::now();
    let prepared = prepare(corpus, &filter)?;
    let pairs_ms = ms_since(t);

    let t = Instant::now();
    let pairs = collect_translations(cfg, &prepared)?;
    let translation_ms = ms_since(t);

    let t = Instant::now();
    let issues = detect_all(&pairs, cfg.threshold, mode)?;
    let detection_ms = ms_since(t);

    let translations: std::collections::BTreeSet<&str> = pairs
        .iter()
        .flat_map(|p| {
            [
                p.rti_translation.request.text.as_str(),
                p.container_translation.request.text.as_str(),
            ]
        })
        .collect();
    let summary = ReportSummary {
        sentences: prepared.len(),
        rtis: prepared.iter().map(|s| s.rti_count).sum(),
        pairs: pairs.len(),
        translations: translations.len(),
        issues: issues.len(),
    };
    let report = Report {
        schema: REPORT_SCHEMA,
        config: cfg.snapshot(),
        corpus_digest: corpus_digest(corpus),
        sentences: prepared
            .iter()
            .map(|s| SentenceSummary {
                index: s.index,
                id: s.id.clone(),
                rti_count: s.rti_count,
                pair_count: s.pairs.len(),
            })
            .collect(),
        issues,
        summary,
    };
    let timing = RunTiming {
        started_unix_ms,
        finished_unix_ms: unix_ms(),
        pairs_ms,
        translation_ms,
        detection_ms,
        total_ms: ms_since(start),
    };
    Ok(RunOutput { report, pairs, timing })
}

/// Issue counts per sentence index, for quick consistency checks.
pub fn issues_per_sentence(report: &Report) -> BTreeMap<usize, usize> {
    let mut out = BTreeMap::new();
    for issue in &report.issues {
        *out.entry(issue.sentence_index).or_insert(0) += 1;
    }
    out
}
