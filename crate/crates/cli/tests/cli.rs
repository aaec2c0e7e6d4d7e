//! Drives the `fairify` binary end to end on the bundled fixtures.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::Command;

use fairify_core::adherence::CorpusAdherence;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fx(rel: &str) -> String {
    root().join("fixtures").join(rel).display().to_string()
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn fairify_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fairify"));
    cmd.args(args);
    for (k, _) in std::env::vars() {
        if k.starts_with("FAIRIFY_") {
            cmd.env_remove(k);
        }
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("spawn fairify");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn fairify(args: &[&str]) -> Run {
    fairify_env(args, &[])
}

fn ontology_args() -> Vec<String> {
    vec![
        "--ontology".into(),
        format!("tissue=UBERON:{}", fx("ontology/uberon_lung_slice.txt")),
        "--ontology".into(),
        format!("disease=DOID:{}", fx("ontology/doid_lung_slice.txt")),
        "--ontology".into(),
        format!("cell_type=CL:{}", fx("ontology/cl_slice.txt")),
    ]
}

fn evaluate(corpus: &str, label: &str, out: &Path) -> Run {
    let mut args: Vec<String> = vec![
        "evaluate".into(),
        "--corpus".into(),
        corpus.into(),
        "--dictionary".into(),
        fx("dictionary/biosample_human.txt"),
        "--template".into(),
        fx("template/biosample_human.json"),
        "--label".into(),
        label.into(),
        "--out-dir".into(),
        out.display().to_string(),
    ];
    args.extend(ontology_args());
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    fairify(&refs)
}

fn replay(setting: &str, out: &Path) -> Run {
    fairify(&[
        "correct",
        "--corpus",
        &fx("corpus/lung_cancer_sample.jsonl"),
        "--setting",
        setting,
        "--template",
        &fx("template/biosample_human.json"),
        "--backend",
        "replay",
        "--cassette",
        &fx("cassettes/lung_cancer_sample.cassette.json"),
        "--out-dir",
        &out.display().to_string(),
    ])
}

/// evaluate original, replay both settings, evaluate them, agree, stats, report.
fn full_pipeline(out: &Path) -> String {
    let o = out.display().to_string();
    assert_eq!(evaluate(&fx("corpus/lung_cancer_sample.jsonl"), "original", out).code, 0);
    for s in ["llm", "llm_cedar"] {
        let r = replay(s, out);
        assert_eq!(r.code, 0, "{}", r.stderr);
        assert_eq!(evaluate(&format!("{o}/{s}.jsonl"), s, out).code, 0);
    }
    assert_eq!(fairify(&["agree", "--scores", &fx("reviewers/small_agreement.csv"), "--out-dir", &o]).code, 0);
    let r = fairify(&[
        "stats",
        "--report-a",
        &format!("{o}/original.report.json"),
        "--report-b",
        &format!("{o}/llm_cedar.report.json"),
        "--name",
        "original_vs_llm_cedar",
        "--out-dir",
        &o,
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = fairify(&[
        "stats",
        "--scores",
        &fx("reviewers/target_means.csv"),
        "--name",
        "reviewers_accuracy",
        "--out-dir",
        &o,
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = fairify(&[
        "report",
        "--original",
        &format!("{o}/original.report.json"),
        "--llm",
        &format!("{o}/llm.report.json"),
        "--llm-cedar",
        &format!("{o}/llm_cedar.report.json"),
        "--agreement",
        &format!("{o}/agreement.json"),
        "--stats",
        &format!("{o}/original_vs_llm_cedar.json"),
        "--stats",
        &format!("{o}/reviewers_accuracy.json"),
        "--out-dir",
        &o,
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    std::fs::read_to_string(out.join("report.md")).unwrap()
}

#[test]
fn report_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let got = full_pipeline(dir.path());
    let want = std::fs::read_to_string(fx("golden/report_bundled.md")).unwrap();
    assert_eq!(got, want);
    assert!(got.contains("| measure | original | llm | llm_cedar |"));
}

#[test]
fn worked_example_scores() {
    let dir = tempfile::tempdir().unwrap();
    let r = evaluate(&fx("corpus/worked_example.jsonl"), "worked", dir.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = CorpusAdherence::load(dir.path().join("worked.report.json")).unwrap();
    assert_eq!(report.per_record[0].accuracy, 0.75);
    assert_eq!(report.per_record[0].error_count, 1);
    let csv = std::fs::read_to_string(dir.path().join("worked.report.csv")).unwrap();
    assert_eq!(csv, "record_id,field_count,error_count,accuracy\nTN_32,4,1,0.75\n");
    assert!(dir.path().join("manifest.evaluate.worked.json").exists());
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().display().to_string();
    assert_eq!(fairify(&[]).code, 1);
    assert_eq!(fairify(&["frobnicate"]).code, 1);
    let help = fairify(&["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("evaluate"));
    assert_eq!(fairify(&["--version"]).code, 0);
    // llm_cedar without a template fails before any backend is touched.
    let r = fairify(&[
        "correct",
        "--corpus",
        &fx("corpus/worked_example.jsonl"),
        "--setting",
        "llm_cedar",
        "--backend",
        "http",
        "--endpoint",
        "http://127.0.0.1:9/v1/chat/completions",
        "--out-dir",
        &o,
    ]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(r.stderr.contains("--template"));
    // replay without a cassette
    let r = fairify(&["correct", "--corpus", &fx("corpus/worked_example.jsonl"), "--setting", "llm", "--out-dir", &o]);
    assert_eq!(r.code, 1);
    // evaluate without a dictionary
    assert_eq!(fairify(&["evaluate", "--corpus", &fx("corpus/worked_example.jsonl"), "--out-dir", &o]).code, 1);
    // template names ontologies that were not supplied
    let r = fairify(&[
        "evaluate",
        "--corpus",
        &fx("corpus/worked_example.jsonl"),
        "--dictionary",
        &fx("dictionary/biosample_human.txt"),
        "--template",
        &fx("template/biosample_human.json"),
        "--out-dir",
        &o,
    ]);
    assert_eq!(r.code, 1);
    // report lists what is absent
    let r = fairify(&["report", "--llm", "x.json", "--out-dir", &o]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("--original") && r.stderr.contains("--llm-cedar"), "{}", r.stderr);
    assert_eq!(fairify(&["stats", "--out-dir", &o]).code, 1);
    assert_eq!(fairify(&["agree", "--scores", "s.csv", "--variant", "tau_c"]).code, 1);
    assert_eq!(fairify(&["sample", "--corpus", "c.jsonl", "--seed", "-1"]).code, 1);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().display().to_string();
    let r = fairify(&["sample", "--corpus", "/nonexistent/corpus.jsonl", "--out-dir", &o]);
    assert_eq!(r.code, 2);
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\": \"x\"}\n").unwrap();
    let r = fairify(&["sample", "--corpus", &bad.display().to_string(), "--out-dir", &o]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 1"), "{}", r.stderr);
    let r = fairify(&[
        "correct",
        "--corpus",
        &fx("corpus/worked_example.jsonl"),
        "--setting",
        "llm",
        "--cassette",
        &bad.display().to_string(),
        "--out-dir",
        &o,
    ]);
    assert_eq!(r.code, 2);
}

#[test]
fn replay_miss_exits_3_and_lists_failures() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().display().to_string();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "{}").unwrap();
    let r = fairify(&[
        "correct",
        "--corpus",
        &fx("corpus/lung_cancer_sample.jsonl"),
        "--setting",
        "llm",
        "--cassette",
        &empty.display().to_string(),
        "--out-dir",
        &o,
    ]);
    assert_eq!(r.code, 3);
    let errors = std::fs::read_to_string(dir.path().join("llm.errors.jsonl")).unwrap();
    assert_eq!(errors.lines().count(), 8);
    assert!(errors.contains("cassette_miss"));
    assert_eq!(std::fs::read_to_string(dir.path().join("llm.jsonl")).unwrap(), "");
}

#[test]
fn http_without_key_exits_3_without_network() {
    let dir = tempfile::tempdir().unwrap();
    let r = fairify(&[
        "correct",
        "--corpus",
        &fx("corpus/worked_example.jsonl"),
        "--setting",
        "llm",
        "--backend",
        "http",
        "--endpoint",
        "http://127.0.0.1:9/v1/chat/completions",
        "--out-dir",
        &dir.path().display().to_string(),
    ]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("FAIRIFY_API_KEY"), "{}", r.stderr);
}

/// Answers every request with the same chat-completions body.
fn mock_chat_server(n: usize, content: &'static str) -> (String, std::thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let h = std::thread::spawn(move || {
        for _ in 0..n {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let l = line.trim_end().to_ascii_lowercase();
                if l.is_empty() {
                    break;
                }
                if let Some(v) = l.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let reply = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string();
            write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
        }
    });
    (url, h)
}

#[test]
fn http_traffic_is_recorded_then_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().display().to_string();
    let (url, server) = mock_chat_server(1, "tissue: lung\ndisease: lung cancer");
    let r = fairify_env(
        &[
            "correct",
            "--corpus",
            &fx("corpus/worked_example.jsonl"),
            "--setting",
            "llm",
            "--backend",
            "http",
            "--endpoint",
            &url,
            "--out-dir",
            &o,
        ],
        &[("FAIRIFY_API_KEY", "test-key")],
    );
    server.join().unwrap();
    assert_eq!(r.code, 0, "{}", r.stderr);
    let live = std::fs::read_to_string(dir.path().join("llm.jsonl")).unwrap();
    let cassette = dir.path().join("cassette.json");
    assert!(cassette.exists());
    let manifest = std::fs::read_to_string(dir.path().join("manifest.correct.llm.json")).unwrap();
    assert!(!manifest.contains("test-key"));
    assert!(manifest.contains("cassette_sha256\": \""));

    let replay_dir = dir.path().join("replay");
    let r = fairify(&[
        "correct",
        "--corpus",
        &fx("corpus/worked_example.jsonl"),
        "--setting",
        "llm",
        "--cassette",
        &cassette.display().to_string(),
        "--out-dir",
        &replay_dir.display().to_string(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(std::fs::read_to_string(replay_dir.join("llm.jsonl")).unwrap(), live);
}

#[test]
fn surrogate_template_fill_gives_template_shaped_records() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().display().to_string();
    let mut args: Vec<String> = [
        "correct",
        "--corpus",
        &fx("corpus/lung_cancer_sample.jsonl"),
        "--setting",
        "llm_cedar",
        "--template",
        &fx("template/biosample_human.json"),
        "--backend",
        "surrogate_template_fill",
        "--out-dir",
        &o,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    args.extend(ontology_args());
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let r = fairify(&refs);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let records = fairify_core::record::load_corpus(dir.path().join("llm_cedar.jsonl")).unwrap();
    assert_eq!(records.len(), 8);
    for rec in &records {
        assert_eq!(rec.fields.len(), 12);
        assert_eq!(rec.fields[0].name, "biosample_accession");
    }
    let worked = &records[0];
    assert_eq!(worked.values_of("tissue").next(), Some("lung"));
    assert_eq!(worked.values_of("disease").next(), Some("lung cancer"));
    let r = evaluate(&format!("{o}/llm_cedar.jsonl"), "fill", dir.path());
    assert_eq!(r.code, 0);
    let report = CorpusAdherence::load(dir.path().join("fill.report.json")).unwrap();
    assert_eq!(report.field_name_adherence, 1.0);
    assert_eq!(report.mean_error_count, 0.0);
}

#[test]
fn sample_is_deterministic_and_warns_on_short_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let r = fairify(&[
            "sample",
            "--corpus",
            &fx("corpus/lung_cancer_sample.jsonl"),
            "-n",
            "5",
            "--seed",
            "7",
            "--out-dir",
            &d.display().to_string(),
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    let sa = std::fs::read(a.join("sample.jsonl")).unwrap();
    assert_eq!(sa, std::fs::read(b.join("sample.jsonl")).unwrap());
    assert_eq!(String::from_utf8(sa).unwrap().lines().count(), 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.sample.json")).unwrap()).unwrap();
    assert_eq!(manifest["details"]["seed"], 7);
    assert_eq!(manifest["details"]["selected_ids"].as_array().unwrap().len(), 5);

    let r = fairify(&["sample", "--corpus", &fx("corpus/lung_cancer_sample.jsonl"), "-n", "50", "--out-dir", &a.display().to_string()]);
    assert_eq!(r.code, 0);
    assert!(r.stderr.contains("only 8"), "{}", r.stderr);

    let r = fairify(&[
        "sample",
        "--corpus",
        &fx("corpus/lung_cancer_sample.jsonl"),
        "--filter",
        "LUNG CANCER",
        "--out-dir",
        &a.display().to_string(),
    ]);
    assert_eq!(r.code, 0);
    assert_eq!(std::fs::read_to_string(a.join("sample.jsonl")).unwrap().lines().count(), 3);
}

#[test]
fn config_file_and_environment_layers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fairify.toml");
    std::fs::write(&cfg, "seed = 3\nsample_n = 2\n").unwrap();
    let out = dir.path().join("out");
    let o = out.display().to_string();
    let c = cfg.display().to_string();
    let corpus = fx("corpus/lung_cancer_sample.jsonl");
    let r = fairify_env(&["--config", &c, "sample", "--corpus", &corpus, "--out-dir", &o], &[("FAIRIFY_SEED", "11")]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.sample.json")).unwrap()).unwrap();
    assert_eq!(m["details"]["seed"], 3);
    assert_eq!(m["details"]["requested_n"], 2);
    let r = fairify_env(&["sample", "--corpus", &corpus, "--out-dir", &o], &[("FAIRIFY_SEED", "11")]);
    assert_eq!(r.code, 0);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.sample.json")).unwrap()).unwrap();
    assert_eq!(m["details"]["seed"], 11);
    let r = fairify_env(&["--config", &c, "sample", "--corpus", &corpus, "--seed", "5", "--out-dir", &o], &[]);
    assert_eq!(r.code, 0);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.sample.json")).unwrap()).unwrap();
    assert_eq!(m["details"]["seed"], 5);
    // a key in the config file is rejected
    std::fs::write(&cfg, "api_key = \"sk-live\"\n").unwrap();
    assert_eq!(fairify(&["--config", &c, "sample", "--corpus", &corpus, "--out-dir", &o]).code, 1);
}

#[test]
fn stats_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().display().to_string();
    assert_eq!(evaluate(&fx("corpus/lung_cancer_sample.jsonl"), "original", dir.path()).code, 0);
    let report = format!("{o}/original.report.json");
    let r = fairify(&["stats", "--report-a", &report, "--report-b", &report, "--name", "self", "--out-dir", &o]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("self.json")).unwrap()).unwrap();
    assert_eq!(s["result"]["p_value"], 1.0);

    assert_eq!(evaluate(&fx("corpus/worked_example.jsonl"), "worked", dir.path()).code, 0);
    let r = fairify(&[
        "stats",
        "--report-a",
        &report,
        "--report-b",
        &format!("{o}/worked.report.json"),
        "--kind",
        "paired_t",
        "--out-dir",
        &o,
    ]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("coverage"), "{}", r.stderr);
}

#[test]
fn agree_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().display().to_string();
    let same = dir.path().join("same.csv");
    let mut text = String::from("reviewer_id,record_id,setting,accuracy,error_count\n");
    for r in ["ann", "bob"] {
        for (i, rec) in ["a", "b", "c"].iter().enumerate() {
            text.push_str(&format!("{r},{rec},original,{},{}\n", 0.25 * i as f64, i));
        }
    }
    std::fs::write(&same, &text).unwrap();
    let r = fairify(&["agree", "--scores", &same.display().to_string(), "--out-dir", &o]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("agreement.json")).unwrap()).unwrap();
    for t in a["tables"].as_array().unwrap() {
        for row in t["tau"].as_array().unwrap() {
            for cell in row.as_array().unwrap() {
                assert_eq!(cell.as_f64(), Some(1.0));
            }
        }
    }
    std::fs::write(&same, text.lines().take(6).collect::<Vec<_>>().join("\n")).unwrap();
    let r = fairify(&["agree", "--scores", &same.display().to_string(), "--out-dir", &o]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("bob:c/original"), "{}", r.stderr);
}
