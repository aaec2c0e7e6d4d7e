use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::parse::parse_llm_record;
use super::prompt::{build_prompt, PromptSetting, RequestParams};
use super::{CompletionBackend, LlmError};
use crate::record::MetadataRecord;
use crate::template::MetadataTemplate;

/// A record that could not be corrected. The run carries on without it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFailure {
    pub index: usize,
    pub record_id: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionOutcome {
    pub setting: PromptSetting,
    /// One entry per input record, in input order.
    pub results: Vec<Result<MetadataRecord, RecordFailure>>,
}

impl CorrectionOutcome {
    pub fn records(&self) -> impl Iterator<Item = &MetadataRecord> {
        self.results.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &RecordFailure> {
        self.results.iter().filter_map(|r| r.as_ref().err())
    }
}

fn correct_one(
    record: &MetadataRecord,
    setting: PromptSetting,
    template: Option<&MetadataTemplate>,
    backend: &dyn CompletionBackend,
    params: &RequestParams,
) -> Result<MetadataRecord, LlmError> {
    let request = build_prompt(record, setting, template, params)?;
    let response = backend.complete(&request)?;
    parse_llm_record(&response, &record.id, setting.provenance())
}

/// Correct every record with at most `max_in_flight` requests outstanding.
///
/// Per-record failures are returned in place; an authentication failure
/// stops the run and is returned as the error.
pub fn correct_corpus(
    records: &[MetadataRecord],
    setting: PromptSetting,
    template: Option<&MetadataTemplate>,
    backend: &dyn CompletionBackend,
    params: &RequestParams,
    max_in_flight: usize,
) -> Result<CorrectionOutcome, LlmError> {
    if max_in_flight == 0 {
        return Err(LlmError::Config("max_in_flight must be at least 1".into()));
    }
    if setting == PromptSetting::LlmCedar && template.is_none() {
        return Err(LlmError::MissingTemplate);
    }
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let fatal: Mutex<Option<LlmError>> = Mutex::new(None);
    let slots: Mutex<Vec<Option<Result<MetadataRecord, RecordFailure>>>> = Mutex::new(vec![None; records.len()]);

    std::thread::scope(|scope| {
        for _ in 0..max_in_flight.min(records.len()) {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(record) = records.get(i) else { break };
                let result = match correct_one(record, setting, template, backend, params) {
                    Ok(r) => Ok(r),
                    Err(e @ LlmError::Auth(_)) => {
                        abort.store(true, Ordering::SeqCst);
                        fatal.lock().expect("lock").get_or_insert(e);
                        break;
                    }
                    Err(e) => {
                        log::warn!("record {} failed: {e}", record.id);
                        Err(RecordFailure {
                            index: i,
                            record_id: record.id.clone(),
                            kind: e.kind().to_string(),
                            message: e.to_string(),
                        })
                    }
                };
                slots.lock().expect("lock")[i] = Some(result);
            });
        }
    });

    if let Some(e) = fatal.into_inner().expect("lock") {
        return Err(e);
    }
    let results = slots
        .into_inner()
        .expect("lock")
        .into_iter()
        .map(|r| r.expect("every index is processed when no fatal error occurs"))
        .collect();
    Ok(CorrectionOutcome { setting, results })
}
