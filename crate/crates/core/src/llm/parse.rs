//! Tolerant reading of `name: value` lines out of a model reply.

use super::LlmError;
use crate::record::{FieldEntry, MetadataRecord, Provenance};

const MAX_NAME_CHARS: usize = 64;
/// A line with an empty value and more words than this in its name is prose
/// ("Here is the corrected record:"), not a field.
const MAX_EMPTY_VALUE_NAME_WORDS: usize = 4;

fn strip_bullet(line: &str) -> &str {
    for b in ["- ", "* ", "+ ", "\u{2022} "] {
        if let Some(rest) = line.strip_prefix(b) {
            return rest.trim_start();
        }
    }
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        for sep in [". ", ") "] {
            if let Some(r) = rest.strip_prefix(sep) {
                return r.trim_start();
            }
        }
    }
    line
}

fn strip_markup(s: &str) -> &str {
    s.trim().trim_matches(|c| c == '*' || c == '`').trim()
}

fn parse_line(raw: &str) -> Option<FieldEntry> {
    let line = raw.trim();
    if line.is_empty() || line.starts_with("```") || line.starts_with('#') {
        return None;
    }
    let line = strip_bullet(line);
    let (name, value) = line.split_once(':')?;
    let name = strip_markup(name);
    // `**name:** value` leaves the closing marker on the value side.
    let value = strip_markup(value.trim_start_matches('*'));
    if name.is_empty() || name.chars().count() > MAX_NAME_CHARS || name.contains(['.', '!', '?']) {
        return None;
    }
    if value.is_empty() && name.split_whitespace().count() > MAX_EMPTY_VALUE_NAME_WORDS {
        return None;
    }
    FieldEntry::new(name, value).ok()
}

/// Recover fields from free-form reply text. Code fences, headings and prose
/// lines are skipped; zero recovered fields is `Unparseable`.
pub fn parse_llm_record(text: &str, id: &str, provenance: Provenance) -> Result<MetadataRecord, LlmError> {
    let fields: Vec<FieldEntry> = text.lines().filter_map(parse_line).collect();
    if fields.is_empty() {
        return Err(LlmError::Unparseable(id.to_string()));
    }
    MetadataRecord::new(id, provenance, fields).map_err(|e| LlmError::Unparseable(format!("{id}: {e}")))
}
