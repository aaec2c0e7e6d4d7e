//! Ontology class-name indexes with exact-after-normalization lookup.
//!
//! Two sources are supported: flat term lists (one label per line, optional
//! tab-separated synonyms) and a minimal subset of the OBO flat-file format.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::record::{normalize_name, normalize_value, NormalizedName};

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("ontology {0} has no terms")]
    EmptyOntology(String),
    #[error("OBO parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no ontology loaded for id `{0}`")]
    MissingOntology(String),
    #[error("invalid ontology binding `{0}` (expected FIELD=ONTOLOGY_ID)")]
    InvalidBinding(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Index synonyms alongside primary labels.
    pub synonyms: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { synonyms: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OntologyIndex {
    ontology_id: String,
    terms: BTreeSet<String>,
}

impl OntologyIndex {
    pub fn from_terms<I, S>(ontology_id: impl Into<String>, terms: I) -> Result<Self, OntologyError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let ontology_id = ontology_id.into();
        let terms: BTreeSet<String> = terms
            .into_iter()
            .map(|t| normalize_value(t.as_ref()))
            .filter(|t| !t.is_empty())
            .collect();
        if terms.is_empty() {
            return Err(OntologyError::EmptyOntology(ontology_id));
        }
        Ok(Self { ontology_id, terms })
    }

    pub fn ontology_id(&self) -> &str {
        &self.ontology_id
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn contains(&self, value: &str) -> bool {
        self.terms.contains(&normalize_value(value))
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    /// Write the normalized terms as a flat term list, one per line.
    pub fn to_term_list(&self) -> String {
        let mut out = format!("# {} ({} terms)\n", self.ontology_id, self.terms.len());
        for t in &self.terms {
            out.push_str(t);
            out.push('\n');
        }
        out
    }
}

fn read(path: &Path) -> Result<String, OntologyError> {
    fs::read_to_string(path).map_err(|source| OntologyError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_term_list(text: &str, ontology_id: &str, opts: LoadOptions) -> Result<OntologyIndex, OntologyError> {
    let terms = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .flat_map(|l| {
            let take = if opts.synonyms { usize::MAX } else { 1 };
            l.split('\t').take(take)
        });
    OntologyIndex::from_terms(ontology_id, terms)
}

pub fn load_term_list(
    path: impl AsRef<Path>,
    ontology_id: &str,
    opts: LoadOptions,
) -> Result<OntologyIndex, OntologyError> {
    parse_term_list(&read(path.as_ref())?, ontology_id, opts)
}

#[derive(Default)]
struct Stanza {
    start: usize,
    is_term: bool,
    name: Option<String>,
    synonyms: Vec<String>,
    obsolete: bool,
}

impl Stanza {
    fn flush(self, labels: &mut Vec<String>, opts: LoadOptions) -> Result<(), OntologyError> {
        if !self.is_term || self.obsolete {
            return Ok(());
        }
        let name = self.name.ok_or_else(|| OntologyError::Parse {
            line: self.start,
            message: "[Term] stanza has no name".to_string(),
        })?;
        labels.push(name);
        if opts.synonyms {
            labels.extend(self.synonyms);
        }
        Ok(())
    }
}

/// Extract the quoted text from a `synonym:` value such as `"pulmo" EXACT []`.
fn quoted(value: &str) -> Option<String> {
    let rest = value.strip_prefix('"')?;
    let mut out = String::new();
    let mut chars = rest.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => out.push(chars.next()?),
            '"' => return Some(out),
            c => out.push(c),
        }
    }
    None
}

pub fn parse_obo(text: &str, ontology_id: &str, opts: LoadOptions) -> Result<OntologyIndex, OntologyError> {
    let mut labels = Vec::new();
    // Header tags before the first stanza are ignored.
    let mut current: Option<Stanza> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('!') {
            continue;
        }
        if line.starts_with('[') {
            let header = line.strip_suffix(']').ok_or_else(|| OntologyError::Parse {
                line: lineno,
                message: format!("unterminated stanza header `{line}`"),
            })?;
            if let Some(done) = current.take() {
                done.flush(&mut labels, opts)?;
            }
            current = Some(Stanza {
                start: lineno,
                is_term: &header[1..] == "Term",
                ..Stanza::default()
            });
            continue;
        }
        let Some(stanza) = current.as_mut() else {
            continue;
        };
        if !stanza.is_term {
            continue;
        }
        let (tag, value) = line.split_once(':').ok_or_else(|| OntologyError::Parse {
            line: lineno,
            message: format!("expected `tag: value`, found `{line}`"),
        })?;
        let value = value.trim();
        match tag.trim() {
            "name" => stanza.name = Some(value.to_string()),
            "synonym" => {
                let text = quoted(value).ok_or_else(|| OntologyError::Parse {
                    line: lineno,
                    message: "synonym value is not a quoted string".to_string(),
                })?;
                stanza.synonyms.push(text);
            }
            "is_obsolete" => stanza.obsolete = value == "true",
            _ => {}
        }
    }
    if let Some(done) = current.take() {
        done.flush(&mut labels, opts)?;
    }
    OntologyIndex::from_terms(ontology_id, labels)
}

pub fn load_obo_subset(
    path: impl AsRef<Path>,
    ontology_id: &str,
    opts: LoadOptions,
) -> Result<OntologyIndex, OntologyError> {
    parse_obo(&read(path.as_ref())?, ontology_id, opts)
}

/// Load by extension: `.obo` goes through the OBO parser, anything else is a term list.
pub fn load_ontology(
    path: impl AsRef<Path>,
    ontology_id: &str,
    opts: LoadOptions,
) -> Result<OntologyIndex, OntologyError> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obo")) {
        load_obo_subset(path, ontology_id, opts)
    } else {
        load_term_list(path, ontology_id, opts)
    }
}

/// Ties a record field to the ontology its values must come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldOntologyBinding {
    pub field: NormalizedName,
    pub ontology_id: String,
}

impl FieldOntologyBinding {
    pub fn new(field: &str, ontology_id: &str) -> Result<Self, OntologyError> {
        let field = normalize_name(field);
        let ontology_id = ontology_id.trim();
        if field.is_empty() || ontology_id.is_empty() {
            return Err(OntologyError::InvalidBinding(format!("{field}={ontology_id}")));
        }
        Ok(Self {
            field,
            ontology_id: ontology_id.to_string(),
        })
    }

    /// The three bindings used for automated value checks:
    /// tissue to UBERON, disease to DOID, cell type to CL.
    pub fn standard() -> Vec<Self> {
        [("tissue", "UBERON"), ("disease", "DOID"), ("cell_type", "CL")]
            .into_iter()
            .map(|(f, o)| Self::new(f, o).expect("static binding"))
            .collect()
    }
}

/// Loaded ontologies keyed by id.
#[derive(Debug, Clone, Default)]
pub struct OntologySet {
    by_id: BTreeMap<String, OntologyIndex>,
}

impl OntologySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, index: OntologyIndex) {
        self.by_id.insert(index.ontology_id().to_string(), index);
    }

    pub fn get(&self, ontology_id: &str) -> Result<&OntologyIndex, OntologyError> {
        self.by_id
            .get(ontology_id)
            .ok_or_else(|| OntologyError::MissingOntology(ontology_id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.by_id.keys().map(String::as_str)
    }
}

impl FromIterator<OntologyIndex> for OntologySet {
    fn from_iter<T: IntoIterator<Item = OntologyIndex>>(iter: T) -> Self {
        let mut set = Self::new();
        for index in iter {
            set.insert(index);
        }
        set
    }
}
