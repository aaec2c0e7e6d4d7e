//! Automated adherence evaluation.
//!
//! Each field is judged on its name (is it in the data dictionary?) and, when
//! the name is known and a constraint applies, on its value. A field with an
//! unknown name costs exactly one error and its value is not judged.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{FieldOntologyBinding, OntologyError, OntologySet};
use crate::record::{normalize_value, MetadataRecord, NormalizedName};
use crate::template::{DataDictionary, MetadataTemplate, Requirement, ValueConstraint};

#[derive(Debug, Error)]
pub enum AdherenceError {
    #[error("record `{0}` has no fields")]
    DegenerateRecord(String),
    #[error("error count {errors} exceeds field count {fields}")]
    TooManyErrors { errors: usize, fields: usize },
    #[error("corpus has no records or no fields")]
    EmptyCorpus,
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report format error: {0}")]
    Format(String),
}

/// `1 - errors / fields` for a single record.
pub fn record_accuracy(error_count: usize, field_count: usize) -> Result<f64, AdherenceError> {
    if field_count == 0 {
        return Err(AdherenceError::DegenerateRecord(String::new()));
    }
    if error_count > field_count {
        return Err(AdherenceError::TooManyErrors {
            errors: error_count,
            fields: field_count,
        });
    }
    Ok(1.0 - error_count as f64 / field_count as f64)
}

/// Whether `value` satisfies `constraint`. Ontology lookups go through `ontologies`.
pub fn value_satisfies(
    constraint: &ValueConstraint,
    value: &str,
    ontologies: &OntologySet,
) -> Result<bool, OntologyError> {
    Ok(match constraint {
        ValueConstraint::FreeText => true,
        ValueConstraint::Ontology { ontology } => ontologies.get(ontology)?.contains(value),
        ValueConstraint::Enumeration { values } => {
            let probe = normalize_value(value);
            values.iter().any(|v| normalize_value(v) == probe)
        }
        ValueConstraint::IntegerRange { min, max } => value
            .trim()
            .parse::<i64>()
            .is_ok_and(|n| (*min..=*max).contains(&n)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldVerdict {
    pub name: String,
    pub normalized_name: NormalizedName,
    pub name_ok: bool,
    /// Absent when the name is unknown or no constraint applies.
    pub value_ok: Option<bool>,
    pub error: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordAdherence {
    pub record_id: String,
    pub field_count: usize,
    pub error_count: usize,
    pub accuracy: f64,
    pub verdicts: Vec<FieldVerdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BindingTally {
    pub passing: usize,
    pub total: usize,
}

impl BindingTally {
    pub fn fraction(&self) -> Option<f64> {
        (self.total > 0).then(|| self.passing as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusAdherence {
    pub label: String,
    pub record_count: usize,
    pub mean_accuracy: f64,
    pub mean_error_count: f64,
    pub field_name_adherence: f64,
    /// Bound fields with at least one occurrence; absent fields are omitted.
    pub per_binding_adherence: BTreeMap<String, f64>,
    pub per_binding_counts: BTreeMap<String, BindingTally>,
    pub per_record: Vec<RecordAdherence>,
}

/// Constraint that applies to a field: an ontology binding wins over the
/// template's own constraint.
pub fn effective_constraint(
    name: &NormalizedName,
    template: Option<&MetadataTemplate>,
    bindings: &[FieldOntologyBinding],
) -> Option<ValueConstraint> {
    if let Some(b) = bindings.iter().find(|b| &b.field == name) {
        return Some(ValueConstraint::Ontology {
            ontology: b.ontology_id.clone(),
        });
    }
    template
        .and_then(|t| t.lookup(name.as_str()))
        .map(|f| f.constraint.clone())
}

pub struct Evaluator<'a> {
    template: Option<&'a MetadataTemplate>,
    dictionary: &'a DataDictionary,
    bindings: &'a [FieldOntologyBinding],
    ontologies: &'a OntologySet,
    strict_required: bool,
}

impl<'a> Evaluator<'a> {
    /// Fails with `MissingOntology` if a binding or template constraint names
    /// an ontology that is not loaded.
    pub fn new(
        template: Option<&'a MetadataTemplate>,
        dictionary: &'a DataDictionary,
        bindings: &'a [FieldOntologyBinding],
        ontologies: &'a OntologySet,
    ) -> Result<Self, AdherenceError> {
        for b in bindings {
            ontologies.get(&b.ontology_id)?;
        }
        if let Some(t) = template {
            for f in &t.fields {
                if let ValueConstraint::Ontology { ontology } = &f.constraint {
                    ontologies.get(ontology)?;
                }
            }
        }
        Ok(Self {
            template,
            dictionary,
            bindings,
            ontologies,
            strict_required: false,
        })
    }

    /// In strict mode the missing-value token is an error on required fields.
    pub fn strict_required(mut self, strict: bool) -> Self {
        self.strict_required = strict;
        self
    }

    fn missing_token(&self) -> &str {
        self.template
            .map(|t| t.missing_value.as_str())
            .unwrap_or(crate::template::DEFAULT_MISSING_VALUE)
    }

    fn is_required(&self, name: &NormalizedName) -> bool {
        self.template
            .and_then(|t| t.lookup(name.as_str()))
            .is_some_and(|f| f.requirement == Requirement::Required)
    }

    pub fn evaluate_field(&self, name: &str, value: &str) -> Result<FieldVerdict, AdherenceError> {
        let normalized_name = crate::record::normalize_name(name);
        let name_ok = self.dictionary.contains_normalized(&normalized_name);
        let value_ok = if !name_ok {
            None
        } else {
            match effective_constraint(&normalized_name, self.template, self.bindings) {
                None => None,
                Some(_) if value.trim() == self.missing_token() => {
                    Some(!(self.strict_required && self.is_required(&normalized_name)))
                }
                Some(c) => Some(value_satisfies(&c, value, self.ontologies)?),
            }
        };
        Ok(FieldVerdict {
            name: name.to_string(),
            normalized_name,
            name_ok,
            value_ok,
            error: !name_ok || value_ok == Some(false),
        })
    }

    pub fn evaluate_record(&self, record: &MetadataRecord) -> Result<RecordAdherence, AdherenceError> {
        if record.fields.is_empty() {
            return Err(AdherenceError::DegenerateRecord(record.id.clone()));
        }
        let verdicts = record
            .fields
            .iter()
            .map(|f| self.evaluate_field(&f.name, &f.value))
            .collect::<Result<Vec<_>, _>>()?;
        let error_count = verdicts.iter().filter(|v| v.error).count();
        let field_count = verdicts.len();
        Ok(RecordAdherence {
            record_id: record.id.clone(),
            field_count,
            error_count,
            accuracy: record_accuracy(error_count, field_count)?,
            verdicts,
        })
    }

    pub fn evaluate_corpus(
        &self,
        label: &str,
        corpus: &[MetadataRecord],
    ) -> Result<CorpusAdherence, AdherenceError> {
        let per_record = corpus
            .iter()
            .map(|r| self.evaluate_record(r))
            .collect::<Result<Vec<_>, _>>()?;
        aggregate(label, per_record, corpus, self.dictionary, self.bindings, self.ontologies)
    }
}

/// Occurrence counts of each bound field and how many of its values are
/// ontology members. Fields never seen are left out.
pub fn per_binding_counts(
    corpus: &[MetadataRecord],
    bindings: &[FieldOntologyBinding],
    ontologies: &OntologySet,
) -> Result<BTreeMap<String, BindingTally>, AdherenceError> {
    let mut out = BTreeMap::new();
    for binding in bindings {
        let index = ontologies.get(&binding.ontology_id)?;
        let mut tally = BindingTally::default();
        for field in corpus.iter().flat_map(|r| &r.fields) {
            if field.normalized_name() == binding.field {
                tally.total += 1;
                if index.contains(&field.value) {
                    tally.passing += 1;
                }
            }
        }
        if tally.total > 0 {
            out.insert(binding.field.to_string(), tally);
        }
    }
    Ok(out)
}

pub fn per_binding_adherence(
    corpus: &[MetadataRecord],
    bindings: &[FieldOntologyBinding],
    ontologies: &OntologySet,
) -> Result<BTreeMap<String, f64>, AdherenceError> {
    Ok(per_binding_counts(corpus, bindings, ontologies)?
        .into_iter()
        .filter_map(|(k, t)| t.fraction().map(|f| (k, f)))
        .collect())
}

/// Share of field instances, pooled over the corpus, whose name is in the dictionary.
pub fn field_name_adherence(corpus: &[MetadataRecord], dictionary: &DataDictionary) -> Result<f64, AdherenceError> {
    let (matching, total) = corpus
        .iter()
        .flat_map(|r| &r.fields)
        .fold((0usize, 0usize), |(m, t), f| {
            (m + usize::from(dictionary.contains_normalized(&f.normalized_name())), t + 1)
        });
    if total == 0 {
        return Err(AdherenceError::EmptyCorpus);
    }
    Ok(matching as f64 / total as f64)
}

pub fn aggregate(
    label: &str,
    per_record: Vec<RecordAdherence>,
    corpus: &[MetadataRecord],
    dictionary: &DataDictionary,
    bindings: &[FieldOntologyBinding],
    ontologies: &OntologySet,
) -> Result<CorpusAdherence, AdherenceError> {
    if per_record.is_empty() {
        return Err(AdherenceError::EmptyCorpus);
    }
    let n = per_record.len() as f64;
    let mean_accuracy = per_record.iter().map(|r| r.accuracy).sum::<f64>() / n;
    let mean_error_count = per_record.iter().map(|r| r.error_count as f64).sum::<f64>() / n;
    let per_binding_counts = per_binding_counts(corpus, bindings, ontologies)?;
    let per_binding_adherence = per_binding_counts
        .iter()
        .filter_map(|(k, t)| t.fraction().map(|f| (k.clone(), f)))
        .collect();
    Ok(CorpusAdherence {
        label: label.to_string(),
        record_count: per_record.len(),
        mean_accuracy,
        mean_error_count,
        field_name_adherence: field_name_adherence(corpus, dictionary)?,
        per_binding_adherence,
        per_binding_counts,
        per_record,
    })
}

impl CorpusAdherence {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, AdherenceError> {
        serde_json::from_str(text).map_err(|e| AdherenceError::Format(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AdherenceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| AdherenceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Flat per-record export: `record_id,field_count,error_count,accuracy`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AdherenceError> {
        let mut w = csv::Writer::from_writer(out);
        let fmt_err = |e: csv::Error| AdherenceError::Format(e.to_string());
        w.write_record(["record_id", "field_count", "error_count", "accuracy"])
            .map_err(fmt_err)?;
        for r in &self.per_record {
            w.write_record([
                r.record_id.as_str(),
                &r.field_count.to_string(),
                &r.error_count.to_string(),
                &r.accuracy.to_string(),
            ])
            .map_err(fmt_err)?;
        }
        w.flush().map_err(|e| AdherenceError::Format(e.to_string()))
    }
}
