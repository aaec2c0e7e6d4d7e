//! Assemble a replay cassette from hand-written responses.
//!
//! usage: build_cassette CORPUS TEMPLATE RESPONSES OUT
//!
//! RESPONSES is a JSON object `{record_id: {"llm": text, "llm_cedar": text}}`.
//! Every record in CORPUS must have both responses.

use std::collections::BTreeMap;
use std::process::ExitCode;

use fairify_core::llm::{build_prompt, Cassette, CassetteEntry, PromptSetting, RequestParams};
use fairify_core::record::load_corpus;
use fairify_core::template::load_template;

const TIMESTAMP: &str = "2024-01-01T00:00:00Z";

fn run(args: &[String]) -> Result<(), Box<dyn std::error::Error>> {
    let [corpus, template, responses, out] = args else {
        return Err("usage: build_cassette CORPUS TEMPLATE RESPONSES OUT".into());
    };
    let corpus = load_corpus(corpus)?;
    let template = load_template(template)?;
    let responses: BTreeMap<String, BTreeMap<PromptSetting, String>> =
        serde_json::from_str(&std::fs::read_to_string(responses)?)?;
    let params = RequestParams::default();
    let mut cassette = Cassette::new();
    for record in &corpus {
        let by_setting = responses
            .get(&record.id)
            .ok_or_else(|| format!("no responses for {}", record.id))?;
        for setting in [PromptSetting::Llm, PromptSetting::LlmCedar] {
            let text = by_setting
                .get(&setting)
                .ok_or_else(|| format!("no {setting} response for {}", record.id))?;
            let req = build_prompt(record, setting, Some(&template), &params)?;
            cassette.insert(
                req.request_fingerprint,
                CassetteEntry {
                    user_text: req.user_text,
                    response_text: text.clone(),
                    timestamp: TIMESTAMP.to_string(),
                },
            );
        }
    }
    cassette.save(out)?;
    eprintln!("wrote {} entries", cassette.len());
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
