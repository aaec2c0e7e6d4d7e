//! Offline stand-ins for a model. Both read the record block out of the
//! prompt, so they are driven by exactly what a live model would see.

use std::collections::BTreeMap;
use std::path::Path;

use super::prompt::CompletionRequest;
use super::{CompletionBackend, LlmError};
use crate::adherence::{effective_constraint, value_satisfies};
use crate::ontology::{FieldOntologyBinding, OntologySet};
use crate::record::{normalize_name, normalize_value, parse_record_lines, NormalizedName};
use crate::template::{MetadataTemplate, ValueConstraint};

fn record_text(request: &CompletionRequest) -> Result<&str, LlmError> {
    request
        .record_section()
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| LlmError::BadResponse("prompt has no record block".into()))
}

/// Returns the record block unchanged.
#[derive(Debug, Default, Clone, Copy)]
pub struct EchoSurrogate;

impl CompletionBackend for EchoSurrogate {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        record_text(request).map(str::to_string)
    }
}

/// Maps commonly seen field-name variants onto template names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasTable {
    map: BTreeMap<NormalizedName, NormalizedName>,
}

const BUILTIN_ALIASES: &[(&str, &str)] = &[
    ("accession", "biosample_accession"),
    ("biosample", "biosample_accession"),
    ("bioproject", "bioproject_accession"),
    ("sample_id", "sample_name"),
    ("sample_isolate_identifier", "isolate"),
    ("isolate_id", "isolate"),
    ("species", "organism"),
    ("organism_name", "organism"),
    ("age_of_donor", "age"),
    ("donor_age", "age"),
    ("age_in_years", "age"),
    ("sex_of_donor", "sex"),
    ("donor_sex", "sex"),
    ("gender", "sex"),
    ("sampled_tissue", "tissue"),
    ("tissue_type", "tissue"),
    ("tissue_source", "tissue"),
    ("source_tissue", "tissue"),
    ("disease_state", "disease"),
    ("disease_type", "disease"),
    ("diagnosis", "disease"),
    ("health_status", "health_state"),
    ("treatment_type", "treatment"),
    ("drug", "treatment"),
    ("cell_types", "cell_type"),
];

impl Default for AliasTable {
    fn default() -> Self {
        Self::from_pairs(BUILTIN_ALIASES.iter().copied())
    }
}

impl AliasTable {
    pub fn empty() -> Self {
        Self { map: BTreeMap::new() }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let map = pairs
            .into_iter()
            .map(|(from, to)| (normalize_name(from), normalize_name(to)))
            .filter(|(f, t)| !f.is_empty() && !t.is_empty())
            .collect();
        Self { map }
    }

    /// A flat JSON object `{"variant": "canonical", ...}`, merged over the built-ins.
    pub fn load_extending_default(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        let extra: BTreeMap<String, String> =
            serde_json::from_str(&text).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        let mut table = Self::default();
        table
            .map
            .extend(Self::from_pairs(extra.iter().map(|(a, b)| (a.as_str(), b.as_str()))).map);
        Ok(table)
    }

    pub fn resolve(&self, name: &NormalizedName) -> NormalizedName {
        self.map.get(name).cloned().unwrap_or_else(|| name.clone())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Rewrites the record into exactly the template's fields, in template order,
/// with every value either satisfying its constraint or set to the missing
/// token.
///
/// Values that fail their own field are offered to the other constrained
/// fields, so `tissue: lung cancer` yields `tissue: lung` (the longest
/// ontology term inside the value) and `disease: lung cancer`.
pub struct TemplateFillSurrogate {
    template: MetadataTemplate,
    ontologies: OntologySet,
    constraints: Vec<ValueConstraint>,
    aliases: AliasTable,
}

impl TemplateFillSurrogate {
    pub fn new(
        template: MetadataTemplate,
        bindings: &[FieldOntologyBinding],
        ontologies: OntologySet,
        aliases: AliasTable,
    ) -> Result<Self, LlmError> {
        let constraints: Vec<ValueConstraint> = template
            .fields
            .iter()
            .map(|f| effective_constraint(&f.canonical_name, Some(&template), bindings).unwrap_or(ValueConstraint::FreeText))
            .collect();
        for c in &constraints {
            if let ValueConstraint::Ontology { ontology } = c {
                ontologies.get(ontology).map_err(|e| LlmError::Config(e.to_string()))?;
            }
        }
        Ok(Self {
            template,
            ontologies,
            constraints,
            aliases,
        })
    }

    fn satisfies(&self, c: &ValueConstraint, value: &str) -> bool {
        value_satisfies(c, value, &self.ontologies).expect("ontologies checked at construction")
    }

    /// Canonical spelling of a value already known to satisfy `c`.
    fn canonical(&self, c: &ValueConstraint, value: &str) -> String {
        match c {
            ValueConstraint::Enumeration { values } => {
                let probe = normalize_value(value);
                values
                    .iter()
                    .find(|v| normalize_value(v) == probe)
                    .cloned()
                    .unwrap_or_else(|| value.trim().to_string())
            }
            ValueConstraint::IntegerRange { .. } => value.trim().parse::<i64>().map(|n| n.to_string()).unwrap_or_default(),
            _ => value.trim().to_string(),
        }
    }

    /// Best satisfying fragment of a value that fails as a whole.
    fn extract(&self, c: &ValueConstraint, value: &str) -> Option<String> {
        match c {
            ValueConstraint::FreeText => None,
            ValueConstraint::IntegerRange { .. } => {
                let start = value.find(|ch: char| ch.is_ascii_digit())?;
                if value[..start].ends_with('-') {
                    return None;
                }
                let run: String = value[start..].chars().take_while(char::is_ascii_digit).collect();
                self.satisfies(c, &run).then(|| self.canonical(c, &run))
            }
            ValueConstraint::Ontology { .. } | ValueConstraint::Enumeration { .. } => {
                let words: Vec<&str> = value
                    .split(|ch: char| ch.is_whitespace() || "()[]{},;:/".contains(ch))
                    .filter(|w| !w.is_empty())
                    .collect();
                for len in (1..words.len()).rev() {
                    for window in words.windows(len) {
                        let candidate = window.join(" ");
                        if self.satisfies(c, &candidate) {
                            return Some(self.canonical(c, &candidate));
                        }
                    }
                }
                None
            }
        }
    }

    pub fn fill(&self, record_text: &str) -> Vec<(String, String)> {
        let n = self.template.fields.len();
        let mut slots: Vec<Option<String>> = vec![None; n];
        let mut leftovers: Vec<String> = Vec::new();
        let fields = parse_record_lines(record_text, "surrogate").map(|r| r.fields).unwrap_or_default();
        for f in fields {
            let value = f.value.trim();
            if value.is_empty() || self.template.is_missing_token(value) {
                continue;
            }
            let name = self.aliases.resolve(&normalize_name(&f.name));
            let Some(idx) = self.template.fields.iter().position(|t| t.canonical_name == name) else {
                leftovers.push(value.to_string());
                continue;
            };
            let c = &self.constraints[idx];
            if self.satisfies(c, value) {
                if slots[idx].is_none() {
                    slots[idx] = Some(self.canonical(c, value));
                }
            } else {
                if slots[idx].is_none() {
                    slots[idx] = self.extract(c, value);
                }
                leftovers.push(value.to_string());
            }
        }
        for value in leftovers {
            let target = (0..n).find(|&i| {
                slots[i].is_none()
                    && !matches!(self.constraints[i], ValueConstraint::FreeText)
                    && self.satisfies(&self.constraints[i], &value)
            });
            if let Some(i) = target {
                slots[i] = Some(self.canonical(&self.constraints[i], &value));
            }
        }
        self.template
            .fields
            .iter()
            .zip(slots)
            .map(|(t, v)| (t.canonical_name.to_string(), v.unwrap_or_else(|| self.template.missing_value.clone())))
            .collect()
    }
}

impl CompletionBackend for TemplateFillSurrogate {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let text = record_text(request)?;
        Ok(self
            .fill(text)
            .into_iter()
            .map(|(n, v)| format!("{n}: {v}"))
            .collect::<Vec<_>>()
            .join("\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adherence::Evaluator;
    use crate::llm::parse::parse_llm_record;
    use crate::llm::prompt::{build_prompt, PromptSetting, RequestParams};
    use crate::ontology::{load_term_list, LoadOptions};
    use crate::record::{FieldEntry, MetadataRecord, Provenance};
    use crate::template::{load_data_dictionary, load_template, DataDictionary};
    use proptest::prelude::*;

    fn fixture(rel: &str) -> String {
        format!("{}/../../fixtures/{rel}", env!("CARGO_MANIFEST_DIR"))
    }

    fn setup() -> (MetadataTemplate, DataDictionary, OntologySet) {
        let t = load_template(fixture("template/biosample_human.json")).unwrap();
        let d = load_data_dictionary(fixture("dictionary/biosample_human.txt")).unwrap();
        let o: OntologySet = [
            ("ontology/uberon_lung_slice.txt", "UBERON"),
            ("ontology/doid_lung_slice.txt", "DOID"),
            ("ontology/cl_slice.txt", "CL"),
        ]
        .iter()
        .map(|(p, id)| load_term_list(fixture(p), id, LoadOptions::default()).unwrap())
        .collect();
        (t, d, o)
    }

    fn surrogate() -> TemplateFillSurrogate {
        let (t, _, o) = setup();
        TemplateFillSurrogate::new(t, &FieldOntologyBinding::standard(), o, AliasTable::default()).unwrap()
    }

    fn record(fields: &[(&str, &str)]) -> MetadataRecord {
        MetadataRecord::new(
            "r",
            Provenance::Original,
            fields.iter().map(|(n, v)| FieldEntry::new(*n, *v).unwrap()).collect(),
        )
        .unwrap()
    }

    fn run(s: &dyn CompletionBackend, r: &MetadataRecord) -> MetadataRecord {
        let (t, _, _) = setup();
        let req = build_prompt(r, PromptSetting::LlmCedar, Some(&t), &RequestParams::default()).unwrap();
        parse_llm_record(&s.complete(&req).unwrap(), &r.id, Provenance::LlmCedar).unwrap()
    }

    #[test]
    fn splits_tissue_and_disease() {
        let r = record(&[("isolate", "TN_32"), ("age", "67"), ("sex", "female"), ("tissue", "lung cancer")]);
        let out = run(&surrogate(), &r);
        let get = |n: &str| out.values_of(n).next().unwrap().to_string();
        assert_eq!(get("tissue"), "lung");
        assert_eq!(get("disease"), "lung cancer");
        assert_eq!(get("isolate"), "TN_32");
        assert_eq!(get("age"), "67");
        assert_eq!(get("sex"), "female");
        assert_eq!(get("organism"), "NA");
        assert_eq!(out.fields.len(), 12);
    }

    #[test]
    fn aliases_and_extraction() {
        let r = record(&[
            ("Tissue Type", "tumor"),
            ("Age", "71 years"),
            ("gender", "Female"),
            ("disease state", "NSCLC"),
        ]);
        let out = run(&surrogate(), &r);
        let get = |n: &str| out.values_of(n).next().unwrap().to_string();
        assert_eq!(get("age"), "71");
        assert_eq!(get("sex"), "female");
        assert_eq!(get("disease"), "NSCLC");
        assert_eq!(get("tissue"), "NA");
    }

    #[test]
    fn echo_returns_record_block() {
        let r = record(&[("Tissue Type", "tumor"), ("Age", "71 years")]);
        let out = run(&EchoSurrogate, &r);
        assert_eq!(out.fields, r.fields);
    }

    #[test]
    fn missing_ontology_is_rejected() {
        let (t, _, _) = setup();
        assert!(matches!(
            TemplateFillSurrogate::new(t, &[], OntologySet::new(), AliasTable::default()),
            Err(LlmError::Config(_))
        ));
    }

    #[test]
    fn alias_file_extends_builtins() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("aliases.json");
        std::fs::write(&p, r#"{"Patient Sex": "sex"}"#).unwrap();
        let table = AliasTable::load_extending_default(&p).unwrap();
        assert_eq!(table.len(), AliasTable::default().len() + 1);
        assert_eq!(table.resolve(&normalize_name("patient sex")).as_str(), "sex");
        assert_eq!(table.resolve(&normalize_name("gender")).as_str(), "sex");
    }

    const NAMES: &[&str] = &[
        "tissue", "Tissue Type", "sampled tissue", "disease", "diagnosis", "age", "Age of donor", "sex",
        "gender", "organism", "species", "isolate", "cell type", "weird field", "health_state", "treatment",
    ];
    const VALUES: &[&str] = &[
        "lung cancer", "lung", "Lung adenocarcinoma", "67", "71 years", "-3", "500", "female", "M",
        "Homo sapiens", "human", "NA", "", "T cell", "bronchus tumor", "diseased", "pleural fluid", "x:y",
    ];

    proptest! {
        #[test]
        fn fill_output_has_no_errors(
            picks in prop::collection::vec((0..NAMES.len(), 0..VALUES.len()), 1..12)
        ) {
            let (t, d, o) = setup();
            let s = surrogate();
            let fields: Vec<(&str, &str)> = picks.iter().map(|&(n, v)| (NAMES[n], VALUES[v])).collect();
            let out = run(&s, &record(&fields));
            let bindings = FieldOntologyBinding::standard();
            let eval = Evaluator::new(Some(&t), &d, &bindings, &o).unwrap();
            let res = eval.evaluate_record(&out).unwrap();
            prop_assert_eq!(res.error_count, 0, "{:?}", out);
            prop_assert_eq!(out.fields.len(), t.fields.len());
        }
    }
}
