//! Translation of source texts through interchangeable backends.
//!
//! Every request goes to the [`TranslationCache`] first. On a miss the
//! configured [`Backend`] is called once and the result is written through
//! to the cache. With no backend (replay-only) a miss is an error.

mod cache;
mod mock;
mod rest;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{normalize_text, CacheEntry, CacheKey, TranslationCache};
pub use mock::{mock_translate, Dictionary, FaultKind, FaultSpec, MockBackend, TokenSelector};
pub use rest::{HttpMethod, RestBackend, RestConfig};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("no cached translation for {text:?} (replay-only)")]
    CacheMiss { text: String },
    #[error("network failure (status {status:?}): {body}")]
    NetworkFailure { status: Option<u16>, body: String },
    #[error("empty translation for {text:?}")]
    EmptyTranslation { text: String },
    #[error("token {token:?} missing from the mock dictionary")]
    UnknownToken { token: String },
    #[error("cache already holds {existing:?} for this key, refusing {incoming:?}")]
    CacheConflict { existing: String, incoming: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("environment variable {0} with the API key is not set")]
    MissingApiKey(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("cache file {path}: {message}")]
    CacheFile { path: String, message: String },
}

fn lang_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[A-Za-z]{2,3}([-_][A-Za-z0-9]{2,8})*$").expect("valid regex"))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub text: String,
    pub src_lang: String,
    pub tgt_lang: String,
    pub backend_id: String,
}

impl TranslationRequest {
    pub fn new(
        text: impl Into<String>,
        src_lang: impl Into<String>,
        tgt_lang: impl Into<String>,
        backend_id: impl Into<String>,
    ) -> Result<Self, GatewayError> {
        let req = TranslationRequest {
            text: text.into(),
            src_lang: src_lang.into(),
            tgt_lang: tgt_lang.into(),
            backend_id: backend_id.into(),
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty source text".into()));
        }
        for lang in [&self.src_lang, &self.tgt_lang] {
            if !lang_re().is_match(lang) {
                return Err(GatewayError::InvalidRequest(format!(
                    "malformed language code {lang:?}"
                )));
            }
        }
        if self.backend_id.is_empty() {
            return Err(GatewayError::InvalidRequest("empty backend id".into()));
        }
        Ok(())
    }

    pub fn cache_key(&self) -> CacheKey {
        CacheKey::new(&self.backend_id, &self.src_lang, &self.tgt_lang, &self.text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Cache,
    Network,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Translation {
    pub request: TranslationRequest,
    pub target_text: String,
    pub origin: Origin,
}

/// A translation service. Called only on cache misses.
pub trait Backend: Send + Sync {
    fn translate(&self, req: &TranslationRequest) -> Result<String, GatewayError>;

    fn origin(&self) -> Origin;
}

pub struct Gateway {
    backend_id: String,
    backend: Option<Box<dyn Backend>>,
    cache: Mutex<TranslationCache>,
    concurrency: usize,
}

impl Gateway {
    pub fn new(backend_id: impl Into<String>, backend: Box<dyn Backend>, cache: TranslationCache) -> Self {
        Gateway {
            backend_id: backend_id.into(),
            backend: Some(backend),
            cache: Mutex::new(cache),
            concurrency: 1,
        }
    }

    /// A gateway that answers from `cache` only.
    pub fn replay_only(backend_id: impl Into<String>, cache: TranslationCache) -> Self {
        Gateway {
            backend_id: backend_id.into(),
            backend: None,
            cache: Mutex::new(cache),
            concurrency: 1,
        }
    }

    pub fn with_concurrency(mut self, n: usize) -> Self {
        self.concurrency = n.max(1);
        self
    }

    pub fn backend_id(&self) -> &str {
        &self.backend_id
    }

    pub fn request(&self, text: &str, src_lang: &str, tgt_lang: &str) -> Result<TranslationRequest, GatewayError> {
        TranslationRequest::new(text, src_lang, tgt_lang, self.backend_id.clone())
    }

    pub fn translate(&self, req: &TranslationRequest) -> Result<Translation, GatewayError> {
        req.validate()?;
        if let Some(hit) = self.cache_get(req) {
            return Ok(hit);
        }
        let backend = self
            .backend
            .as_ref()
            .ok_or_else(|| GatewayError::CacheMiss { text: req.text.clone() })?;
        let target_text = backend.translate(req)?;
        if target_text.trim().is_empty() {
            return Err(GatewayError::EmptyTranslation { text: req.text.clone() });
        }
        let translation = Translation {
            request: req.clone(),
            target_text,
            origin: backend.origin(),
        };
        self.cache_put(&translation)?;
        Ok(translation)
    }

    /// Translates a batch. Each distinct text is sent once; up to
    /// `concurrency` calls are in flight. Output order matches `reqs`.
    pub fn translate_all(&self, reqs: &[TranslationRequest]) -> Result<Vec<Translation>, GatewayError> {
        let mut distinct: BTreeMap<CacheKey, usize> = BTreeMap::new();
        let mut slots = Vec::with_capacity(reqs.len());
        let mut unique: Vec<&TranslationRequest> = Vec::new();
        for req in reqs {
            let next = unique.len();
            let slot = *distinct.entry(req.cache_key()).or_insert(next);
            if slot == next {
                unique.push(req);
            }
            slots.push(slot);
        }

        let results: Vec<Mutex<Option<Result<Translation, GatewayError>>>> =
            unique.iter().map(|_| Mutex::new(None)).collect();
        let cursor = AtomicUsize::new(0);
        let workers = self.concurrency.min(unique.len()).max(1);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = cursor.fetch_add(1, Ordering::SeqCst);
                    if i >= unique.len() {
                        break;
                    }
                    let out = self.translate(unique[i]);
                    *results[i].lock().expect("result slot") = Some(out);
                });
            }
        });

        let results: Vec<Translation> = results
            .into_iter()
            .map(|m| m.into_inner().expect("result slot").expect("every slot filled"))
            .collect::<Result<_, _>>()?;
        Ok(reqs
            .iter()
            .zip(slots)
            .map(|(req, slot)| Translation {
                request: req.clone(),
                ..results[slot].clone()
            })
            .collect())
    }

    pub fn cache_get(&self, req: &TranslationRequest) -> Option<Translation> {
        self.cache.lock().expect("cache lock").get(req)
    }

    pub fn cache_put(&self, translation: &Translation) -> Result<(), GatewayError> {
        self.cache.lock().expect("cache lock").put(translation)
    }

    pub fn into_cache(self) -> TranslationCache {
        self.cache.into_inner().expect("cache lock")
    }

    pub fn cache_snapshot(&self) -> TranslationCache {
        self.cache.lock().expect("cache lock").clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;
    use std::sync::Arc;

    struct Counting {
        calls: Arc<AtomicUsize>,
    }

    impl Backend for Counting {
        fn translate(&self, req: &TranslationRequest) -> Result<String, GatewayError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(req.text.to_uppercase())
        }
        fn origin(&self) -> Origin {
            Origin::Network
        }
    }

    struct Blank;

    impl Backend for Blank {
        fn translate(&self, _: &TranslationRequest) -> Result<String, GatewayError> {
            Ok("  ".into())
        }
        fn origin(&self) -> Origin {
            Origin::Network
        }
    }

    fn req(text: &str) -> TranslationRequest {
        TranslationRequest::new(text, "en", "zh", "test").unwrap()
    }

    #[test]
    fn request_validation() {
        assert!(TranslationRequest::new("", "en", "zh", "b").is_err());
        assert!(TranslationRequest::new("x", "english!", "zh", "b").is_err());
        assert!(TranslationRequest::new("x", "en", "zh-CN", "b").is_ok());
        assert!(TranslationRequest::new("x", "en", "zh", "").is_err());
    }

    #[test]
    fn write_through_then_cache_hit() {
        let calls = Arc::new(AtomicUsize::new(0));
        let gw = Gateway::new(
            "test",
            Box::new(Counting { calls: calls.clone() }),
            TranslationCache::default(),
        );
        let first = gw.translate(&req("abc")).unwrap();
        assert_eq!(first.origin, Origin::Network);
        assert_eq!(first.target_text, "ABC");
        let second = gw.translate(&req("abc")).unwrap();
        assert_eq!(second.origin, Origin::Cache);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert!(gw.into_cache().get(&req("abc")).is_some());
    }

    #[test]
    fn replay_only_miss() {
        let gw = Gateway::replay_only("test", TranslationCache::default());
        assert!(matches!(
            gw.translate(&req("unseen")),
            Err(GatewayError::CacheMiss { .. })
        ));
    }

    #[test]
    fn empty_translation_rejected() {
        let gw = Gateway::new("test", Box::new(Blank), TranslationCache::default());
        assert!(matches!(
            gw.translate(&req("x")),
            Err(GatewayError::EmptyTranslation { .. })
        ));
    }

    #[test]
    fn batch_dedupes_and_keeps_order() {
        let calls = Arc::new(AtomicUsize::new(0));
        let gw = Gateway::new(
            "test",
            Box::new(Counting { calls: calls.clone() }),
            TranslationCache::default(),
        )
        .with_concurrency(4);
        let texts: Vec<String> = (0..40).map(|i| format!("t{}", i % 10)).collect();
        let reqs: Vec<_> = texts.iter().map(|t| req(t)).collect();
        let out = gw.translate_all(&reqs).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 10);
        for (t, tr) in texts.iter().zip(&out) {
            assert_eq!(&tr.request.text, t);
            assert_eq!(tr.target_text, t.to_uppercase());
        }
    }
}
