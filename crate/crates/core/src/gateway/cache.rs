//! Persistent replay cache, stored as a JSON array of
//! `{backend, src, tgt, text, translation}` objects sorted by key.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::{GatewayError, Origin, Translation, TranslationRequest};

/// NFC with whitespace runs collapsed to one space and the ends trimmed.
pub fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey {
    pub backend: String,
    pub src: String,
    pub tgt: String,
    pub text: String,
}

impl CacheKey {
    pub fn new(backend: &str, src: &str, tgt: &str, text: &str) -> Self {
        CacheKey {
            backend: backend.to_string(),
            src: src.to_string(),
            tgt: tgt.to_string(),
            text: normalize_text(text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub backend: String,
    pub src: String,
    pub tgt: String,
    pub text: String,
    pub translation: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TranslationCache {
    entries: BTreeMap<CacheKey, String>,
}

impl TranslationCache {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, req: &TranslationRequest) -> Option<Translation> {
        self.entries.get(&req.cache_key()).map(|target| Translation {
            request: req.clone(),
            target_text: target.clone(),
            origin: Origin::Cache,
        })
    }

    /// Idempotent for an identical value; a different value under the same
    /// key is a conflict.
    pub fn put(&mut self, translation: &Translation) -> Result<(), GatewayError> {
        let req = &translation.request;
        for field in [&req.backend_id, &req.src_lang, &req.tgt_lang, &req.text] {
            if field.trim().is_empty() {
                return Err(GatewayError::InvalidRequest(
                    "cache key fields must be non-empty".into(),
                ));
            }
        }
        self.insert(req.cache_key(), translation.target_text.clone())
    }

    fn insert(&mut self, key: CacheKey, target: String) -> Result<(), GatewayError> {
        match self.entries.get(&key) {
            Some(existing) if *existing == target => Ok(()),
            Some(existing) => Err(GatewayError::CacheConflict {
                existing: existing.clone(),
                incoming: target,
            }),
            None => {
                self.entries.insert(key, target);
                Ok(())
            }
        }
    }

    pub fn entries(&self) -> Vec<CacheEntry> {
        self.entries
            .iter()
            .map(|(k, v)| CacheEntry {
                backend: k.backend.clone(),
                src: k.src.clone(),
                tgt: k.tgt.clone(),
                text: k.text.clone(),
                translation: v.clone(),
            })
            .collect()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = CacheEntry>) -> Result<Self, GatewayError> {
        let mut cache = TranslationCache::default();
        for e in entries {
            cache.insert(CacheKey::new(&e.backend, &e.src, &e.tgt, &e.text), e.translation)?;
        }
        Ok(cache)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.entries()).expect("cache entries serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        let entries: Vec<CacheEntry> = serde_json::from_str(text).map_err(|e| GatewayError::CacheFile {
            path: "<memory>".into(),
            message: e.to_string(),
        })?;
        Self::from_entries(entries)
    }

    /// Loads `path`; a missing file is an empty cache.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Self::default()),
            Err(e) => return Err(cache_file_err(path, e)),
        };
        Self::from_json(&text).map_err(|e| match e {
            GatewayError::CacheFile { message, .. } => GatewayError::CacheFile {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| cache_file_err(path, e))?;
        }
        std::fs::write(path, self.to_json()).map_err(|e| cache_file_err(path, e))
    }
}

fn cache_file_err(path: &Path, e: impl std::fmt::Display) -> GatewayError {
    GatewayError::CacheFile {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}
