//! Persisted request/response pairs for deterministic replay.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::prompt::fingerprint;
use super::LlmError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub user_text: String,
    pub response_text: String,
    pub timestamp: String,
}

/// Map from request fingerprint to the recorded exchange.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cassette {
    entries: BTreeMap<String, CassetteEntry>,
}

impl Cassette {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, fingerprint: &str) -> Option<&CassetteEntry> {
        self.entries.get(fingerprint)
    }

    /// Insert or replace the entry for `fingerprint`.
    pub fn insert(&mut self, fingerprint: String, entry: CassetteEntry) {
        self.entries.insert(fingerprint, entry);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &CassetteEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Fingerprints whose stored user text does not re-hash to the key under
    /// the given request parameters.
    pub fn audit(&self, model: &str, system_text: &str, temperature: f64) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(key, e)| fingerprint(model, system_text, &e.user_text, temperature) != **key)
            .map(|(key, _)| key.clone())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cassette serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        serde_json::from_str(text).map_err(|e| LlmError::Cassette(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Cassette(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Load if the file exists, else start empty.
    pub fn load_or_default(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::new())
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LlmError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n")
            .map_err(|e| LlmError::Cassette(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn audit_and_round_trip() {
        let mut c = Cassette::new();
        let good = fingerprint("m", "s", "hello", 0.0);
        c.insert(
            good.clone(),
            CassetteEntry {
                user_text: "hello".into(),
                response_text: "age: 1".into(),
                timestamp: "2024-01-01T00:00:00Z".into(),
            },
        );
        c.insert(
            "deadbeef".into(),
            CassetteEntry {
                user_text: "tampered".into(),
                response_text: String::new(),
                timestamp: String::new(),
            },
        );
        assert_eq!(c.audit("m", "s", 0.0), ["deadbeef"]);
        let back = Cassette::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.get(&good).unwrap().response_text, "age: 1");
        assert!(c.to_json().starts_with("{\n  \""));
    }

    #[test]
    fn malformed_file() {
        assert!(matches!(Cassette::from_json("[1, 2]"), Err(LlmError::Cassette(_))));
        let dir = tempfile::tempdir().unwrap();
        assert!(Cassette::load_or_default(dir.path().join("none.json")).unwrap().is_empty());
    }
}
