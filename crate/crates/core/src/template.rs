//! Machine-actionable metadata templates and repository data dictionaries.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{normalize_name, NormalizedName};

/// Enumerations longer than this are truncated in prompt text.
pub const PROMPT_ENUM_LIMIT: usize = 40;

pub const DEFAULT_MISSING_VALUE: &str = "NA";

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("template field `{field}`: {rule}")]
    Schema { field: String, rule: String },
    #[error("data dictionary {0} lists no field names")]
    EmptyDictionary(String),
}

fn schema(field: impl Into<String>, rule: impl Into<String>) -> TemplateError {
    TemplateError::Schema {
        field: field.into(),
        rule: rule.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    Required,
    Recommended,
    Optional,
}

impl Requirement {
    pub fn as_str(self) -> &'static str {
        match self {
            Requirement::Required => "required",
            Requirement::Recommended => "recommended",
            Requirement::Optional => "optional",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueConstraint {
    FreeText,
    Ontology {
        ontology: String,
    },
    #[serde(rename = "enum")]
    Enumeration {
        values: Vec<String>,
    },
    IntegerRange {
        min: i64,
        max: i64,
    },
}

impl ValueConstraint {
    fn validate(&self, field: &str) -> Result<(), TemplateError> {
        match self {
            ValueConstraint::Enumeration { values } if values.is_empty() => {
                Err(schema(field, "enumeration must list at least one value"))
            }
            ValueConstraint::IntegerRange { min, max } if min > max => {
                Err(schema(field, format!("integer_range min {min} exceeds max {max}")))
            }
            ValueConstraint::Ontology { ontology } if ontology.trim().is_empty() => {
                Err(schema(field, "ontology constraint needs an ontology id"))
            }
            _ => Ok(()),
        }
    }

    fn render(&self) -> String {
        match self {
            ValueConstraint::FreeText => "free text".to_string(),
            ValueConstraint::Ontology { ontology } => {
                format!("value must be a term from {ontology}")
            }
            ValueConstraint::Enumeration { values } => {
                let shown: Vec<&str> = values
                    .iter()
                    .take(PROMPT_ENUM_LIMIT)
                    .map(String::as_str)
                    .collect();
                let mut text = format!("one of: {}", shown.join(", "));
                if values.len() > PROMPT_ENUM_LIMIT {
                    let _ = write!(text, " (and {} more)", values.len() - PROMPT_ENUM_LIMIT);
                }
                text
            }
            ValueConstraint::IntegerRange { min, max } => {
                format!("integer between {min} and {max}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateField {
    pub canonical_name: NormalizedName,
    pub requirement: Requirement,
    pub constraint: ValueConstraint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataTemplate {
    pub name: String,
    pub fields: Vec<TemplateField>,
    pub missing_value: String,
}

// On-disk shape.
#[derive(Serialize, Deserialize)]
struct TemplateFile {
    name: String,
    #[serde(default = "default_missing")]
    missing_value: String,
    fields: Vec<TemplateFieldFile>,
}

#[derive(Serialize, Deserialize)]
struct TemplateFieldFile {
    name: String,
    requirement: Requirement,
    constraint: ValueConstraint,
}

fn default_missing() -> String {
    DEFAULT_MISSING_VALUE.to_string()
}

impl MetadataTemplate {
    /// Build a template, normalizing field names and checking invariants.
    pub fn new(
        name: impl Into<String>,
        fields: Vec<(String, Requirement, ValueConstraint)>,
        missing_value: impl Into<String>,
    ) -> Result<Self, TemplateError> {
        let name = name.into();
        let missing_value = missing_value.into();
        if missing_value.trim().is_empty() {
            return Err(schema("<template>", "missing_value must be non-empty"));
        }
        if fields.is_empty() {
            return Err(schema("<template>", "template must declare at least one field"));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(fields.len());
        for (raw, requirement, constraint) in fields {
            let canonical_name = normalize_name(&raw);
            if canonical_name.is_empty() {
                return Err(schema(raw, "field name must be non-empty"));
            }
            if !seen.insert(canonical_name.clone()) {
                return Err(schema(canonical_name.as_str(), "duplicate canonical name"));
            }
            constraint.validate(canonical_name.as_str())?;
            out.push(TemplateField {
                canonical_name,
                requirement,
                constraint,
            });
        }
        Ok(Self {
            name,
            fields: out,
            missing_value,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, TemplateError> {
        let file: TemplateFile = serde_json::from_str(text)?;
        Self::new(
            file.name,
            file.fields
                .into_iter()
                .map(|f| (f.name, f.requirement, f.constraint))
                .collect(),
            file.missing_value,
        )
    }

    pub fn to_json(&self) -> String {
        let file = TemplateFile {
            name: self.name.clone(),
            missing_value: self.missing_value.clone(),
            fields: self
                .fields
                .iter()
                .map(|f| TemplateFieldFile {
                    name: f.canonical_name.to_string(),
                    requirement: f.requirement,
                    constraint: f.constraint.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("template serialization cannot fail")
    }

    pub fn lookup(&self, name: &str) -> Option<&TemplateField> {
        let wanted = normalize_name(name);
        if wanted.is_empty() {
            return None;
        }
        self.fields.iter().find(|f| f.canonical_name == wanted)
    }

    pub fn is_missing_token(&self, value: &str) -> bool {
        value.trim() == self.missing_value
    }

    /// Line-oriented rendering appended to the template-aware prompt.
    /// Equal templates always render to identical bytes.
    pub fn to_prompt_text(&self) -> String {
        let mut text = format!("Template: {}\n", self.name);
        for field in &self.fields {
            let _ = writeln!(
                text,
                "{} ({}): {}",
                field.canonical_name,
                field.requirement.as_str(),
                field.constraint.render()
            );
        }
        let _ = write!(text, "Use \"{}\" for missing values.", self.missing_value);
        text
    }
}

pub fn load_template(path: impl AsRef<Path>) -> Result<MetadataTemplate, TemplateError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TemplateError::Io {
        path: path.display().to_string(),
        source,
    })?;
    MetadataTemplate::from_json(&text)
}

pub fn save_template(template: &MetadataTemplate, path: impl AsRef<Path>) -> Result<(), TemplateError> {
    let path = path.as_ref();
    fs::write(path, template.to_json() + "\n").map_err(|source| TemplateError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// The set of sanctioned field names for a repository package.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataDictionary {
    pub name: String,
    allowed: BTreeSet<NormalizedName>,
}

impl DataDictionary {
    pub fn from_text(name: impl Into<String>, text: &str) -> Result<Self, TemplateError> {
        let name = name.into();
        let allowed: BTreeSet<NormalizedName> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(normalize_name)
            .collect();
        if allowed.is_empty() {
            return Err(TemplateError::EmptyDictionary(name));
        }
        Ok(Self { name, allowed })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.allowed.contains(&normalize_name(name))
    }

    pub fn contains_normalized(&self, name: &NormalizedName) -> bool {
        self.allowed.contains(name)
    }

    pub fn len(&self) -> usize {
        self.allowed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &NormalizedName> {
        self.allowed.iter()
    }
}

pub fn load_data_dictionary(path: impl AsRef<Path>) -> Result<DataDictionary, TemplateError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TemplateError::Io {
        path: path.display().to_string(),
        source,
    })?;
    DataDictionary::from_text(path.display().to_string(), &text)
}
