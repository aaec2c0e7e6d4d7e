use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::LlmError;
use crate::record::{serialize_record, MetadataRecord, Provenance, SerializeStyle};
use crate::template::MetadataTemplate;

/// Instruction used for records corrected without a template.
pub const LLM_INSTRUCTION: &str = "Here is a record from BioSample describing a sample from a patient diagnosed \
with lung cancer. Ensure that the field names and field values make sense.";

/// Instruction used when the template follows the record.
pub const LLM_CEDAR_INSTRUCTION: &str = "Here is a record from BioSample describing a sample from a patient \
diagnosed with lung cancer. Ensure that the field names and field values make sense. Following the BioSample \
record is a template describing the allowed field names and values. Transform the record to adhere to the \
template.";

/// Output-shape steering, kept out of the user message so the instruction text stays untouched.
pub const SYSTEM_TEXT: &str = "Return only lines of the form name: value, one field per line, with no other text.";

pub const DEFAULT_MODEL: &str = "gpt-4";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptSetting {
    Llm,
    LlmCedar,
}

impl PromptSetting {
    pub fn provenance(self) -> Provenance {
        match self {
            PromptSetting::Llm => Provenance::Llm,
            PromptSetting::LlmCedar => Provenance::LlmCedar,
        }
    }

    pub fn as_str(self) -> &'static str {
        self.provenance().as_str()
    }
}

impl fmt::Display for PromptSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm" => Ok(PromptSetting::Llm),
            "llm_cedar" => Ok(PromptSetting::LlmCedar),
            other => Err(format!("unknown setting `{other}` (expected llm|llm_cedar)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestParams {
    pub model: String,
    pub temperature: f64,
}

impl Default for RequestParams {
    fn default() -> Self {
        Self {
            model: DEFAULT_MODEL.to_string(),
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub request_fingerprint: String,
}

/// Lowercase hex SHA-256 of `model \n system \n user \n temperature`.
pub fn fingerprint(model: &str, system_text: &str, user_text: &str, temperature: f64) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update(b"\n");
    h.update(system_text.as_bytes());
    h.update(b"\n");
    h.update(user_text.as_bytes());
    h.update(b"\n");
    h.update(temperature.to_string().as_bytes());
    hex::encode(h.finalize())
}

impl CompletionRequest {
    pub fn new(model: &str, system_text: &str, user_text: String, temperature: f64) -> Self {
        Self {
            request_fingerprint: fingerprint(model, system_text, &user_text, temperature),
            model: model.to_string(),
            system_text: system_text.to_string(),
            user_text,
            temperature,
        }
    }

    /// The record text embedded in the user message (the block after the instruction).
    pub fn record_section(&self) -> Option<&str> {
        self.user_text.split("\n\n").nth(1)
    }
}

pub fn build_prompt(
    record: &MetadataRecord,
    setting: PromptSetting,
    template: Option<&MetadataTemplate>,
    params: &RequestParams,
) -> Result<CompletionRequest, LlmError> {
    let record_text = serialize_record(record, SerializeStyle::BiosampleLines);
    let user_text = match setting {
        PromptSetting::Llm => format!("{LLM_INSTRUCTION}\n\n{record_text}"),
        PromptSetting::LlmCedar => {
            let template = template.ok_or(LlmError::MissingTemplate)?;
            format!(
                "{LLM_CEDAR_INSTRUCTION}\n\n{record_text}\n\n{}",
                template.to_prompt_text()
            )
        }
    };
    Ok(CompletionRequest::new(&params.model, SYSTEM_TEXT, user_text, params.temperature))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::parse_record_lines;
    use crate::template::load_template;

    fn worked() -> MetadataRecord {
        parse_record_lines("isolate : TN_32\nage : 67\nsex : female\ntissue : lung cancer", "TN_32").unwrap()
    }

    fn template() -> MetadataTemplate {
        load_template(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/template/biosample_human.json")).unwrap()
    }

    #[test]
    fn llm_prompt_shape() {
        let req = build_prompt(&worked(), PromptSetting::Llm, None, &RequestParams::default()).unwrap();
        assert!(req.user_text.starts_with(
            "Here is a record from BioSample describing a sample from a patient diagnosed with lung cancer."
        ));
        assert!(req.user_text.contains(LLM_INSTRUCTION));
        assert!(req.user_text.ends_with("\n\nisolate : TN_32\nage : 67\nsex : female\ntissue : lung cancer"));
        assert_eq!(req.system_text, SYSTEM_TEXT);
        assert_eq!(req.temperature, 0.0);
        assert_eq!(req.record_section().unwrap().lines().count(), 4);
    }

    #[test]
    fn cedar_prompt_shape() {
        let t = template();
        let req = build_prompt(&worked(), PromptSetting::LlmCedar, Some(&t), &RequestParams::default()).unwrap();
        assert!(req.user_text.starts_with(LLM_CEDAR_INSTRUCTION));
        assert!(req.user_text.contains("Transform the record to adhere to the template."));
        assert!(req.user_text.contains("term from UBERON"));
        let record_at = req.user_text.find("isolate : TN_32").unwrap();
        let template_at = req.user_text.find("Template: ").unwrap();
        assert!(record_at < template_at);
        assert_eq!(req.record_section().unwrap(), "isolate : TN_32\nage : 67\nsex : female\ntissue : lung cancer");
    }

    #[test]
    fn cedar_needs_template() {
        assert!(matches!(
            build_prompt(&worked(), PromptSetting::LlmCedar, None, &RequestParams::default()),
            Err(LlmError::MissingTemplate)
        ));
    }

    #[test]
    fn fingerprint_stability() {
        let a = build_prompt(&worked(), PromptSetting::Llm, None, &RequestParams::default()).unwrap();
        let b = build_prompt(&worked(), PromptSetting::Llm, None, &RequestParams::default()).unwrap();
        assert_eq!(a.request_fingerprint, b.request_fingerprint);
        assert_eq!(a.request_fingerprint.len(), 64);
        assert!(a.request_fingerprint.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));

        let mut user = a.user_text.clone();
        user.push(' ');
        assert_ne!(fingerprint(&a.model, &a.system_text, &user, 0.0), a.request_fingerprint);
        assert_ne!(fingerprint(&a.model, &a.system_text, &a.user_text, 0.5), a.request_fingerprint);
        assert_ne!(fingerprint("gpt-4o", &a.system_text, &a.user_text, 0.0), a.request_fingerprint);
    }

    #[test]
    fn fingerprint_layout() {
        // sha256("m\ns\nu\n0")
        let expected = {
            let mut h = Sha256::new();
            h.update(b"m\ns\nu\n0");
            hex::encode(h.finalize())
        };
        assert_eq!(fingerprint("m", "s", "u", 0.0), expected);
    }
}
