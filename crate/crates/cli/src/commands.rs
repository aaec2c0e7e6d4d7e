use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use anyhow::anyhow;
use fairify_core::adherence::{CorpusAdherence, Evaluator};
use fairify_core::llm::{
    correct_corpus, AliasTable, BackendKind, Cassette, CompletionBackend, EchoSurrogate, HttpBackend, PromptSetting,
    RecordingBackend, ReplayBackend, SharedCassette, TemplateFillSurrogate,
};
use fairify_core::ontology::{load_ontology, FieldOntologyBinding, LoadOptions, OntologySet};
use fairify_core::record::{load_corpus, save_corpus, MetadataRecord};
use fairify_core::sampler::sample_records;
use fairify_core::stats::{
    agreement_table, setting_means, t_test, KendallVariant, Measure, ReviewerScoreSet, StatsError, TestKind,
};
use fairify_core::template::{load_data_dictionary, load_template, MetadataTemplate};

use crate::args::{AgreeArgs, Cli, Command, CorrectArgs, EvaluateArgs, OntologyArgs, ReportArgs, SampleArgs, StatsArgs};
use crate::config::{self, PartialConfig, RunConfig};
use crate::exit::{CmdResult, Failure, Tag};
use crate::manifest::{now, sha256_file, RunManifest};
use crate::report::{render_report, AgreementRecord, StatsRecord};

pub fn execute(cli: Cli, env: &dyn Fn(&str) -> Option<String>) -> CmdResult {
    let started = now();
    let mut flags = PartialConfig {
        out_dir: cli.out_dir,
        ..Default::default()
    };
    let cfg_file = cli.config.as_deref();
    let resolve = |flags: PartialConfig| config::load(flags, cfg_file, env).or_usage("invalid configuration");
    match cli.command {
        Command::Sample(a) => {
            flags.seed = a.seed;
            flags.sample_n = a.n;
            cmd_sample(&resolve(flags)?, &a, started)
        }
        Command::Correct(a) => {
            let b = &mut flags.backend;
            b.kind = a.backend;
            b.endpoint_url = a.endpoint.clone();
            b.api_key_env = a.api_key_env.clone();
            b.model = a.model.clone();
            b.temperature = a.temperature;
            b.timeout_secs = a.timeout_secs;
            b.max_retries = a.max_retries;
            b.backoff_ms = a.backoff_ms;
            b.max_in_flight = a.max_in_flight;
            flags.template = a.template.clone();
            flags.cassette = a.cassette.clone();
            flags.aliases = a.aliases.clone();
            flags.record = a.no_record.then_some(false);
            ontology_flags(&mut flags, &a.ontology);
            cmd_correct(&resolve(flags)?, &a, started)
        }
        Command::Evaluate(a) => {
            flags.template = a.template.clone();
            flags.dictionary = a.dictionary.clone();
            flags.strict_required = a.strict_required.then_some(true);
            ontology_flags(&mut flags, &a.ontology);
            cmd_evaluate(&resolve(flags)?, &a, started)
        }
        Command::Stats(a) => cmd_stats(&resolve(flags)?, &a, started),
        Command::Agree(a) => cmd_agree(&resolve(flags)?, &a, started),
        Command::Report(a) => cmd_report(&resolve(flags)?, &a, started),
    }
}

fn ontology_flags(flags: &mut PartialConfig, a: &OntologyArgs) {
    if !a.ontologies.is_empty() {
        flags.ontologies = Some(a.ontologies.clone());
    }
    flags.synonyms = a.no_synonyms.then_some(false);
}

fn out_dir(cfg: &RunConfig) -> CmdResult<&Path> {
    std::fs::create_dir_all(&cfg.out_dir).or_data(format!("creating output directory {}", cfg.out_dir.display()))?;
    Ok(&cfg.out_dir)
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).or_data(format!("writing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CmdResult {
    let text = serde_json::to_string_pretty(value).expect("serializable output");
    write_text(path, &(text + "\n"))
}

fn finish(manifest: RunManifest, path: PathBuf) -> CmdResult {
    manifest.write(&path).or_data(format!("writing {}", path.display()))
}

fn load_records(path: &Path) -> CmdResult<Vec<MetadataRecord>> {
    load_corpus(path).or_data("loading corpus")
}

fn load_ontologies(cfg: &RunConfig) -> CmdResult<(Vec<FieldOntologyBinding>, OntologySet)> {
    let opts = LoadOptions { synonyms: cfg.synonyms };
    let mut bindings = Vec::new();
    let mut set = OntologySet::new();
    for spec in &cfg.ontologies {
        bindings.push(FieldOntologyBinding::new(&spec.field, &spec.ontology_id).or_usage("ontology binding")?);
        if set.get(&spec.ontology_id).is_err() {
            set.insert(
                load_ontology(&spec.path, &spec.ontology_id, opts)
                    .or_data(format!("loading ontology {}", spec.path.display()))?,
            );
        }
    }
    Ok((bindings, set))
}

fn contains_text(record: &MetadataRecord, needle: &str) -> bool {
    record
        .fields
        .iter()
        .any(|f| f.name.to_lowercase().contains(needle) || f.value.to_lowercase().contains(needle))
}

pub fn cmd_sample(cfg: &RunConfig, a: &SampleArgs, started: String) -> CmdResult {
    let mut records = load_records(&a.corpus)?;
    let total = records.len();
    if let Some(f) = &a.filter {
        let needle = f.to_lowercase();
        records.retain(|r| contains_text(r, &needle));
    }
    if records.is_empty() {
        return Err(Failure::data(anyhow!("no records to sample from ({total} before filtering)")));
    }
    if cfg.sample_n > records.len() {
        log::warn!("requested {} records but only {} are available; taking all", cfg.sample_n, records.len());
    }
    let ids: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
    let sample = sample_records(&ids, cfg.sample_n, cfg.seed).or_data("sampling")?;
    let by_id: BTreeMap<&str, &MetadataRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let chosen: Vec<MetadataRecord> = sample.selected_ids.iter().map(|id| by_id[id.as_str()].clone()).collect();

    let dir = out_dir(cfg)?;
    let out = dir.join("sample.jsonl");
    save_corpus(&chosen, &out).or_data("writing sample")?;

    let mut m = RunManifest::new("sample", cfg, started);
    m.input("corpus", &a.corpus).or_data("hashing corpus")?;
    m.output(&out).or_data("hashing output")?;
    m.details = serde_json::json!({
        "seed": sample.seed,
        "requested_n": sample.requested_n,
        "filter": a.filter,
        "eligible_records": records.len(),
        "selected_ids": sample.selected_ids,
    });
    finish(m, dir.join("manifest.sample.json"))?;
    println!("sampled {} of {} records (seed {}) -> {}", chosen.len(), records.len(), cfg.seed, out.display());
    Ok(())
}

/// Cassette receiving live traffic, and where to save it.
type RecordTarget = (SharedCassette, PathBuf);

fn build_backend(
    cfg: &RunConfig,
    template: Option<&MetadataTemplate>,
) -> CmdResult<(Box<dyn CompletionBackend>, Option<RecordTarget>)> {
    let shared = |c: Cassette| -> SharedCassette { Arc::new(RwLock::new(c)) };
    Ok(match cfg.backend.kind {
        BackendKind::Replay => {
            let path = cfg
                .cassette
                .as_ref()
                .ok_or_else(|| Failure::usage(anyhow!("the replay backend needs --cassette")))?;
            let cassette = Cassette::load(path).map_err(Failure::data)?;
            (Box::new(ReplayBackend::new(shared(cassette))), None)
        }
        BackendKind::Http => {
            let http = HttpBackend::from_config(&cfg.backend).map_err(Failure::from_llm)?;
            if cfg.record {
                let path = cfg.cassette.clone().unwrap_or_else(|| cfg.out_dir.join("cassette.json"));
                let cassette = shared(Cassette::load_or_default(&path).map_err(Failure::data)?);
                (Box::new(RecordingBackend::new(http, cassette.clone())), Some((cassette, path)))
            } else {
                (Box::new(http), None)
            }
        }
        BackendKind::SurrogateEcho => (Box::new(EchoSurrogate), None),
        BackendKind::SurrogateTemplateFill => {
            let template = template
                .ok_or_else(|| Failure::usage(anyhow!("the template-fill surrogate needs --template")))?
                .clone();
            let (bindings, ontologies) = load_ontologies(cfg)?;
            let aliases = match &cfg.aliases {
                Some(p) => AliasTable::load_extending_default(p).map_err(Failure::data)?,
                None => AliasTable::default(),
            };
            let s = TemplateFillSurrogate::new(template, &bindings, ontologies, aliases).map_err(Failure::from_llm)?;
            (Box::new(s), None)
        }
    })
}

pub fn cmd_correct(cfg: &RunConfig, a: &CorrectArgs, started: String) -> CmdResult {
    if a.setting == PromptSetting::LlmCedar && cfg.template.is_none() {
        return Err(Failure::usage(anyhow!("setting llm_cedar needs --template")));
    }
    let records = load_records(&a.corpus)?;
    let template = cfg
        .template
        .as_ref()
        .map(|p| load_template(p).or_data("loading template"))
        .transpose()?;
    let (backend, recorder) = build_backend(cfg, template.as_ref())?;
    let dir = out_dir(cfg)?;

    let outcome = correct_corpus(
        &records,
        a.setting,
        template.as_ref(),
        &backend,
        &cfg.backend.params,
        cfg.backend.max_in_flight,
    )
    .map_err(Failure::from_llm)?;

    let corrected: Vec<MetadataRecord> = outcome.records().cloned().collect();
    let out = dir.join(format!("{}.jsonl", a.setting));
    save_corpus(&corrected, &out).or_data("writing corrected corpus")?;
    let err_path = dir.join(format!("{}.errors.jsonl", a.setting));
    let mut err_text = String::new();
    for f in outcome.failures() {
        err_text.push_str(&serde_json::to_string(f).expect("serializable failure"));
        err_text.push('\n');
    }
    write_text(&err_path, &err_text)?;

    let mut m = RunManifest::new("correct", cfg, started);
    m.input("corpus", &a.corpus).or_data("hashing corpus")?;
    if let Some(t) = &cfg.template {
        m.input("template", t).or_data("hashing template")?;
    }
    if let Some((cassette, path)) = &recorder {
        cassette.read().expect("cassette lock").save(path).map_err(Failure::data)?;
        m.cassette_sha256 = Some(sha256_file(path).or_data("hashing cassette")?);
    } else if let (BackendKind::Replay, Some(path)) = (cfg.backend.kind, &cfg.cassette) {
        m.cassette_sha256 = Some(sha256_file(path).or_data("hashing cassette")?);
    }
    m.output(&out).or_data("hashing output")?;
    m.output(&err_path).or_data("hashing output")?;
    let failures = outcome.failures().count();
    m.details = serde_json::json!({
        "setting": a.setting,
        "records_in": records.len(),
        "records_out": corrected.len(),
        "failures": failures,
    });
    finish(m, dir.join(format!("manifest.correct.{}.json", a.setting)))?;
    println!("corrected {} of {} records ({}) -> {}", corrected.len(), records.len(), a.setting, out.display());
    if failures > 0 {
        return Err(Failure::backend(anyhow!(
            "{failures} of {} records failed; see {}",
            records.len(),
            err_path.display()
        )));
    }
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig, a: &EvaluateArgs, started: String) -> CmdResult {
    let dict_path = cfg
        .dictionary
        .as_ref()
        .ok_or_else(|| Failure::usage(anyhow!("evaluate needs --dictionary")))?;
    let records = load_records(&a.corpus)?;
    let dictionary = load_data_dictionary(dict_path).or_data("loading data dictionary")?;
    let template = cfg
        .template
        .as_ref()
        .map(|p| load_template(p).or_data("loading template"))
        .transpose()?;
    let (bindings, ontologies) = load_ontologies(cfg)?;
    let evaluator = Evaluator::new(template.as_ref(), &dictionary, &bindings, &ontologies)
        .or_usage("an ontology referenced by the template or a binding was not supplied with --ontology")?
        .strict_required(cfg.strict_required);
    let label = a.label.clone().unwrap_or_else(|| {
        a.corpus
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".into())
    });
    let report = evaluator.evaluate_corpus(&label, &records).or_data("evaluating corpus")?;

    let dir = out_dir(cfg)?;
    let json_path = dir.join(format!("{label}.report.json"));
    write_text(&json_path, &(report.to_json() + "\n"))?;
    let csv_path = dir.join(format!("{label}.report.csv"));
    let file = std::fs::File::create(&csv_path).or_data(format!("writing {}", csv_path.display()))?;
    report.write_csv(file).or_data("writing CSV report")?;

    let mut m = RunManifest::new("evaluate", cfg, started);
    m.input("corpus", &a.corpus).or_data("hashing corpus")?;
    m.input("dictionary", dict_path).or_data("hashing dictionary")?;
    if let Some(t) = &cfg.template {
        m.input("template", t).or_data("hashing template")?;
    }
    for spec in &cfg.ontologies {
        m.input(&format!("ontology:{}", spec.ontology_id), &spec.path).or_data("hashing ontology")?;
    }
    m.output(&json_path).or_data("hashing output")?;
    m.output(&csv_path).or_data("hashing output")?;
    m.details = serde_json::json!({ "label": label, "records": report.record_count });
    finish(m, dir.join(format!("manifest.evaluate.{label}.json")))?;

    println!(
        "{label}: records={} mean_accuracy={:.4} mean_error_count={:.4} field_name_adherence={:.4}",
        report.record_count, report.mean_accuracy, report.mean_error_count, report.field_name_adherence
    );
    Ok(())
}

fn report_values(r: &CorpusAdherence, metric: Measure) -> BTreeMap<String, f64> {
    r.per_record
        .iter()
        .map(|p| {
            let v = match metric {
                Measure::Accuracy => p.accuracy,
                Measure::ErrorCount => p.error_count as f64,
            };
            (p.record_id.clone(), v)
        })
        .collect()
}

/// For paired tests both sides must cover the same records; values come out in id order.
fn align(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>, kind: TestKind) -> CmdResult<(Vec<f64>, Vec<f64>)> {
    if kind == TestKind::PairedT {
        let ka: BTreeSet<&String> = a.keys().collect();
        let kb: BTreeSet<&String> = b.keys().collect();
        let missing: Vec<String> = ka.symmetric_difference(&kb).map(|s| s.to_string()).collect();
        if !missing.is_empty() {
            return Err(Failure::data(StatsError::CoverageMismatch(missing)));
        }
    }
    Ok((a.values().copied().collect(), b.values().copied().collect()))
}

pub fn cmd_stats(cfg: &RunConfig, a: &StatsArgs, started: String) -> CmdResult {
    let mut m = RunManifest::new("stats", cfg, started);
    let record = match (&a.scores, &a.report_a, &a.report_b) {
        (Some(scores_path), _, _) => {
            let scores = ReviewerScoreSet::load(scores_path).or_data("loading reviewer scores")?;
            m.input("scores", scores_path).or_data("hashing scores")?;
            let va: BTreeMap<String, f64> = scores.per_record_values(a.setting_a, a.metric).into_iter().collect();
            let vb: BTreeMap<String, f64> = scores.per_record_values(a.setting_b, a.metric).into_iter().collect();
            let (xa, xb) = align(&va, &vb, a.kind)?;
            StatsRecord {
                label_a: a.setting_a.to_string(),
                label_b: a.setting_b.to_string(),
                metric: a.metric,
                source: "scores".into(),
                n_a: xa.len(),
                n_b: xb.len(),
                result: t_test(&xa, &xb, a.kind).or_data("t-test")?,
                setting_means: Some(setting_means(&scores).or_data("setting means")?),
            }
        }
        (None, Some(pa), Some(pb)) => {
            let ra = CorpusAdherence::load(pa).or_data(format!("loading {}", pa.display()))?;
            let rb = CorpusAdherence::load(pb).or_data(format!("loading {}", pb.display()))?;
            m.input("report_a", pa).or_data("hashing report")?;
            m.input("report_b", pb).or_data("hashing report")?;
            let (xa, xb) = align(&report_values(&ra, a.metric), &report_values(&rb, a.metric), a.kind)?;
            StatsRecord {
                label_a: ra.label.clone(),
                label_b: rb.label.clone(),
                metric: a.metric,
                source: "reports".into(),
                n_a: xa.len(),
                n_b: xb.len(),
                result: t_test(&xa, &xb, a.kind).or_data("t-test")?,
                setting_means: None,
            }
        }
        _ => {
            return Err(Failure::usage(anyhow!(
                "stats needs either --scores, or both --report-a and --report-b"
            )))
        }
    };
    let dir = out_dir(cfg)?;
    let out = dir.join(format!("{}.json", a.name));
    write_json(&out, &record)?;
    m.output(&out).or_data("hashing output")?;
    finish(m, dir.join(format!("manifest.stats.{}.json", a.name)))?;
    let r = &record.result;
    println!(
        "{} vs {} ({}, {}): t={:.4} df={:.4} p={:.4e}",
        record.label_a, record.label_b, record.metric, r.test, r.statistic, r.degrees_of_freedom, r.p_value
    );
    Ok(())
}

pub fn cmd_agree(cfg: &RunConfig, a: &AgreeArgs, started: String) -> CmdResult {
    let scores = ReviewerScoreSet::load(&a.scores).or_data("loading reviewer scores")?;
    let variant = if a.variant == "tau_a" { KendallVariant::TauA } else { KendallVariant::TauB };
    let measures = match a.metric {
        Some(m) => vec![m],
        None => vec![Measure::Accuracy, Measure::ErrorCount],
    };
    let tables = measures
        .into_iter()
        .map(|m| agreement_table(&scores, m, variant))
        .collect::<Result<Vec<_>, _>>()
        .or_data("computing agreement")?;
    let dir = out_dir(cfg)?;
    let out = dir.join("agreement.json");
    let record = AgreementRecord { tables };
    write_json(&out, &record)?;
    let mut m = RunManifest::new("agree", cfg, started);
    m.input("scores", &a.scores).or_data("hashing scores")?;
    m.output(&out).or_data("hashing output")?;
    finish(m, dir.join("manifest.agree.json"))?;
    let mut stdout = std::io::stdout().lock();
    for t in &record.tables {
        for (i, ra) in t.reviewers.iter().enumerate() {
            for (j, rb) in t.reviewers.iter().enumerate().skip(i + 1) {
                let cell = t.tau[i][j].map_or("n/a".to_string(), |v| format!("{v:.4}"));
                let _ = writeln!(stdout, "{} {ra} {rb} {cell}", t.measure);
            }
        }
    }
    Ok(())
}

pub fn cmd_report(cfg: &RunConfig, a: &ReportArgs, started: String) -> CmdResult {
    let named = [("--original", &a.original), ("--llm", &a.llm), ("--llm-cedar", &a.llm_cedar)];
    let absent: Vec<&str> = named.iter().filter(|(_, p)| p.is_none()).map(|(n, _)| *n).collect();
    if !absent.is_empty() {
        return Err(Failure::usage(anyhow!("report is missing {}", absent.join(", "))));
    }
    let mut m = RunManifest::new("report", cfg, started);
    let mut reports = Vec::with_capacity(3);
    for (name, path) in named {
        let path = path.as_ref().expect("checked above");
        reports.push(CorpusAdherence::load(path).or_data(format!("loading {}", path.display()))?);
        m.input(name.trim_start_matches('-'), path).or_data("hashing input")?;
    }
    let agreement: Option<AgreementRecord> = match &a.agreement {
        Some(p) => {
            m.input("agreement", p).or_data("hashing input")?;
            let text = std::fs::read_to_string(p).or_data(format!("reading {}", p.display()))?;
            Some(serde_json::from_str(&text).or_data(format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    let mut stats = Vec::with_capacity(a.stats.len());
    for (i, p) in a.stats.iter().enumerate() {
        m.input(&format!("stats:{i}"), p).or_data("hashing input")?;
        let text = std::fs::read_to_string(p).or_data(format!("reading {}", p.display()))?;
        stats.push(serde_json::from_str::<StatsRecord>(&text).or_data(format!("parsing {}", p.display()))?);
    }
    let markdown = render_report([&reports[0], &reports[1], &reports[2]], agreement.as_ref(), &stats);
    let dir = out_dir(cfg)?;
    let out = dir.join("report.md");
    write_text(&out, &markdown)?;
    m.output(&out).or_data("hashing output")?;
    finish(m, dir.join("manifest.report.json"))?;
    println!("wrote {}", out.display());
    Ok(())
}
