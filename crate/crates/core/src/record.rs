//! Metadata records: parsing, serialization and name/value normalization.
//!
//! A record is an ordered list of `name : value` pairs. Order is preserved
//! exactly as read and duplicate names are kept; each occurrence is evaluated
//! on its own downstream.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("record `{0}` has no parsable `name : value` lines")]
    EmptyRecord(String),
    #[error("record id must not be empty")]
    EmptyId,
    #[error("field name must not be empty")]
    EmptyFieldName,
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
}

/// Which version of a record this is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    Llm,
    LlmCedar,
}

impl Provenance {
    pub const ALL: [Provenance; 3] = [Provenance::Original, Provenance::Llm, Provenance::LlmCedar];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Llm => "llm",
            Provenance::LlmCedar => "llm_cedar",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(Provenance::Original),
            "llm" => Ok(Provenance::Llm),
            "llm_cedar" => Ok(Provenance::LlmCedar),
            other => Err(format!("unknown provenance `{other}` (expected original|llm|llm_cedar)")),
        }
    }
}

/// One `name : value` pair, both kept exactly as read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub name: String,
    pub value: String,
}

impl FieldEntry {
    pub fn new(name: impl Into<String>, value: impl Into<String>) -> Result<Self, RecordError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(RecordError::EmptyFieldName);
        }
        Ok(Self {
            name,
            value: value.into(),
        })
    }

    pub fn normalized_name(&self) -> NormalizedName {
        normalize_name(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub id: String,
    pub provenance: Provenance,
    pub fields: Vec<FieldEntry>,
}

impl MetadataRecord {
    pub fn new(
        id: impl Into<String>,
        provenance: Provenance,
        fields: Vec<FieldEntry>,
    ) -> Result<Self, RecordError> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(RecordError::EmptyId);
        }
        if fields.iter().any(|f| f.name.trim().is_empty()) {
            return Err(RecordError::EmptyFieldName);
        }
        Ok(Self {
            id,
            provenance,
            fields,
        })
    }

    /// Values of every field whose normalized name equals `name`'s.
    pub fn values_of<'a>(&'a self, name: &str) -> impl Iterator<Item = &'a str> + 'a {
        let wanted = normalize_name(name);
        self.fields
            .iter()
            .filter(move |f| f.normalized_name() == wanted)
            .map(|f| f.value.as_str())
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }
}

/// A field name in canonical form: lowercase, trimmed, whitespace runs
/// replaced by a single underscore.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormalizedName(String);

impl NormalizedName {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for NormalizedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NormalizedName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

pub fn normalize_name(raw: &str) -> NormalizedName {
    NormalizedName(raw.split_whitespace().collect::<Vec<_>>().join("_").to_lowercase())
}

/// Lowercase, trim, and collapse internal whitespace to single spaces.
/// Spaces are kept because ontology class labels contain them.
pub fn normalize_value(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Parse colon-separated display lines (`isolate : TN_32`).
///
/// Splits on the first colon only; lines without a colon or with an empty
/// name are skipped.
pub fn parse_record_lines(text: &str, id: &str) -> Result<MetadataRecord, RecordError> {
    let fields: Vec<FieldEntry> = text
        .lines()
        .filter_map(|line| {
            let (name, value) = line.split_once(':')?;
            let name = name.trim();
            if name.is_empty() {
                return None;
            }
            Some(FieldEntry {
                name: name.to_string(),
                value: value.trim().to_string(),
            })
        })
        .collect();
    if fields.is_empty() {
        return Err(RecordError::EmptyRecord(id.to_string()));
    }
    MetadataRecord::new(id, Provenance::Original, fields)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SerializeStyle {
    /// `name : value`, one field per line.
    BiosampleLines,
    /// One JSON object on a single line, as stored in corpus files.
    Canonical,
}

pub fn serialize_record(record: &MetadataRecord, style: SerializeStyle) -> String {
    match style {
        SerializeStyle::BiosampleLines => record
            .fields
            .iter()
            .map(|f| format!("{} : {}", f.name, f.value))
            .collect::<Vec<_>>()
            .join("\n"),
        SerializeStyle::Canonical => {
            serde_json::to_string(record).expect("record serialization cannot fail")
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RecordError + '_ {
    move |source| RecordError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parse one canonical corpus line.
pub fn parse_canonical_line(line: &str) -> Result<MetadataRecord, String> {
    let record: MetadataRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    MetadataRecord::new(record.id, record.provenance, record.fields).map_err(|e| e.to_string())
}

/// Load a corpus file: one JSON record per line, blank lines ignored.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<MetadataRecord>, RecordError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_canonical_line(&line).map_err(|message| RecordError::Format {
            path: path.display().to_string(),
            line: idx + 1,
            message,
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn save_corpus(records: &[MetadataRecord], path: impl AsRef<Path>) -> Result<(), RecordError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for record in records {
        writeln!(out, "{}", serialize_record(record, SerializeStyle::Canonical))
            .map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}
