//! End-to-end tests driving the `rerank-lens` binary.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rerank-lens"))
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const SAMPLE_LINE: &str = r#"{"id":"s1","query":"where is the cat","claimant":"A. Person","passages":[{"id":"p1","text":"the cat sat here","title":"Cats","gold":true},{"id":"p2","text":"dogs bark loudly","gold":false},{"id":"p3","text":"the cat cat cat","context":"About cats:","gold":false}]}"#;

fn write_dataset(dir: &Path) -> PathBuf {
    let path = dir.join("mini.jsonl");
    std::fs::write(&path, format!("{SAMPLE_LINE}\n")).unwrap();
    path
}

#[test]
fn version_flag_works() {
    let out = run_ok(bin().arg("--version"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("rerank-lens"));
}

#[test]
fn ingest_prechunked_with_transform() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_dataset(dir.path());
    let output = dir.path().join("out.jsonl");
    run_ok(bin().args([
        "ingest",
        "--input",
        input.to_str().unwrap(),
        "--chunking",
        "pre-chunked",
        "--transform",
        "prepend-titles",
        "--output",
        output.to_str().unwrap(),
    ]));
    let content = std::fs::read_to_string(&output).unwrap();
    assert!(content.contains("Cats\\nthe cat sat here"), "{content}");
}

#[test]
fn ingest_rejects_invalid_sample_without_skip_flag() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.jsonl");
    let bad = SAMPLE_LINE.replace(r#""gold":true"#, r#""gold":false"#);
    std::fs::write(&input, format!("{bad}\n")).unwrap();
    let output = dir.path().join("out.jsonl");
    let out = bin()
        .args([
            "ingest",
            "--input",
            input.to_str().unwrap(),
            "--output",
            output.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no gold passage"), "{stderr}");
    assert!(stderr.contains("s1"), "{stderr}");
}

#[test]
fn ingest_newline_chunking_from_raw_documents() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.jsonl");
    let raw = serde_json::json!({
        "id": "r1",
        "query": "what is in the second paragraph",
        "document": "first paragraph filler\n\nthe golden answer lives here\n\ntrailing text",
        "gold_excerpt": "the golden answer lives here"
    });
    std::fs::write(&input, format!("{raw}\n")).unwrap();
    let output = dir.path().join("out.jsonl");
    run_ok(bin().args([
        "ingest",
        "--input",
        input.to_str().unwrap(),
        "--chunking",
        "newline-paragraph",
        "--fuzzy-threshold",
        "0.9",
        "--output",
        output.to_str().unwrap(),
    ]));
    let content = std::fs::read_to_string(&output).unwrap();
    let sample: serde_json::Value = serde_json::from_str(content.lines().next().unwrap()).unwrap();
    assert_eq!(sample["passages"].as_array().unwrap().len(), 3);
    assert_eq!(sample["passages"][1]["gold"], true);
    assert_eq!(sample["passages"][0]["gold"], false);
}

#[test]
fn score_then_rerank_then_eval_then_separate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = fixtures_dir().join("druid_like.jsonl");
    let scores = dir.path().join("scores.csv");
    run_ok(bin().args([
        "score",
        "--dataset",
        dataset.to_str().unwrap(),
        "--measure",
        "bm25",
        "--output",
        scores.to_str().unwrap(),
    ]));
    let header = std::fs::read_to_string(&scores).unwrap();
    assert!(header.starts_with("sample_id,passage_id,score\n"), "{header}");

    let rankings = dir.path().join("rankings.jsonl");
    run_ok(bin().args([
        "rerank",
        "--dataset",
        dataset.to_str().unwrap(),
        "--backend",
        "bm25",
        "--output",
        rankings.to_str().unwrap(),
    ]));
    assert_eq!(
        std::fs::read_to_string(&rankings).unwrap().lines().count(),
        40
    );

    let report_json = dir.path().join("report.json");
    let out = run_ok(bin().args([
        "eval",
        "--dataset",
        dataset.to_str().unwrap(),
        "--rankings",
        rankings.to_str().unwrap(),
        "--bm25-scores",
        scores.to_str().unwrap(),
        "--metrics",
        "p@1,delta,recall@3,ndcg@3",
        "--bootstrap",
        "500",
        "--seed",
        "7",
        "--reranker-tag",
        "bm25",
        "--output",
        report_json.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("p@1:"), "{stdout}");
    assert!(stdout.contains("delta_p@1:"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_json).unwrap()).unwrap();
    assert_eq!(report["reranker"], "bm25");
    assert_eq!(report["metrics"][1]["name"], "delta_p@1");

    let profile = dir.path().join("profile.csv");
    let out = run_ok(bin().args([
        "separate",
        "--dataset",
        dataset.to_str().unwrap(),
        "--scores",
        scores.to_str().unwrap(),
        "--rankings",
        rankings.to_str().unwrap(),
        "--threshold",
        "-0.5",
        "--output",
        profile.to_str().unwrap(),
    ]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("below"), "partition summary printed");
    assert_eq!(
        std::fs::read_to_string(&profile).unwrap().lines().count(),
        41 // header + 40 records
    );

    let report_dir = dir.path().join("report");
    run_ok(bin().args([
        "report",
        "--eval",
        report_json.to_str().unwrap(),
        "--profile",
        profile.to_str().unwrap(),
        "--dataset",
        dataset.to_str().unwrap(),
        "--format",
        "markdown",
        "--bin-width",
        "0.5",
        "--output",
        report_dir.to_str().unwrap(),
    ]));
    assert!(report_dir.join("grid.md").exists());
    assert!(report_dir.join("partitions.csv").exists());
    // Dataset tag comes from the input file stem.
    assert!(report_dir.join("hist_druid_like_imported.csv").exists());
    assert!(report_dir.join("stats.csv").exists());
    let grid = std::fs::read_to_string(report_dir.join("grid.md")).unwrap();
    assert!(grid.contains("bm25"), "{grid}");
}

#[test]
fn rerank_from_file_backend() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = fixtures_dir().join("druid_like.jsonl");
    let rankings = dir.path().join("rankings.jsonl");
    run_ok(bin().args([
        "rerank",
        "--dataset",
        dataset.to_str().unwrap(),
        "--backend",
        "file",
        "--scores",
        fixtures_dir().join("goldlean_scores.csv").to_str().unwrap(),
        "--output",
        rankings.to_str().unwrap(),
    ]));
    // Gold-leaning oracle puts a gold passage first on every sample.
    let content = std::fs::read_to_string(&rankings).unwrap();
    for line in content.lines() {
        let r: serde_json::Value = serde_json::from_str(line).unwrap();
        let top = r["order"][0].as_str().unwrap();
        assert!(top.starts_with('g'), "top passage {top} is not gold");
    }
}

#[test]
fn listwise_replay_round_trip() {
    use rerank_lens::corpus::{DatasetFormat, load_dataset};
    use rerank_lens::rerankers::{build_listwise_messages, write_listwise_logs, ExchangeRecord,
        ListwiseLog};

    let dir = tempfile::tempdir().unwrap();
    let dataset_path = write_dataset(dir.path());
    let dataset = load_dataset(&dataset_path, DatasetFormat::Jsonl).unwrap();
    let sample = &dataset.samples()[0];
    let window: Vec<_> = sample.passages.iter().collect();
    let messages = build_listwise_messages(&sample.query, &window).unwrap();
    let log = ListwiseLog {
        sample_id: sample.id.clone(),
        exchanges: vec![ExchangeRecord {
            window_start: 0,
            window_len: 3,
            messages,
            reply: "[3] > [1] > [2]".into(),
            permutation: vec![3, 1, 2],
        }],
    };
    let log_path = dir.path().join("exchanges.log.jsonl");
    write_listwise_logs(&[log], &log_path).unwrap();

    let rankings = dir.path().join("rankings.jsonl");
    run_ok(bin().args([
        "--replay",
        "rerank",
        "--dataset",
        dataset_path.to_str().unwrap(),
        "--backend",
        "listwise-llm",
        "--endpoint",
        "http://unused.invalid",
        "--model",
        "any",
        "--log",
        log_path.to_str().unwrap(),
        "--output",
        rankings.to_str().unwrap(),
    ]));
    let r: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(&rankings).unwrap().lines().next().unwrap())
            .unwrap();
    assert_eq!(r["order"][0], "p3");
    assert_eq!(r["order"][1], "p1");
    assert_eq!(r["order"][2], "p2");
}

/// Minimal one-shot chat-completion server for the live-transport path.
fn spawn_chat_server(reply_content: &'static str) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut buf = Vec::new();
        let mut chunk = [0u8; 4096];
        loop {
            let n = stream.read(&mut chunk).unwrap();
            buf.extend_from_slice(&chunk[..n]);
            let text = String::from_utf8_lossy(&buf);
            if let Some(header_end) = text.find("\r\n\r\n") {
                let content_length = text
                    .lines()
                    .find_map(|l| {
                        l.to_ascii_lowercase()
                            .strip_prefix("content-length:")
                            .map(|v| v.trim().parse::<usize>().unwrap())
                    })
                    .unwrap_or(0);
                if buf.len() >= header_end + 4 + content_length {
                    break;
                }
            }
        }
        let reply = serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": reply_content}}]
        })
        .to_string();
        let response = format!(
            "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
            reply.len(),
            reply
        );
        stream.write_all(response.as_bytes()).unwrap();
    });
    format!("http://{addr}/v1/chat/completions")
}

#[test]
fn listwise_live_writes_log_and_rankings() {
    let dir = tempfile::tempdir().unwrap();
    let dataset_path = write_dataset(dir.path());
    let endpoint = spawn_chat_server("[2] > [3] > [1]");
    let rankings = dir.path().join("rankings.jsonl");
    let log_path = dir.path().join("audit.jsonl");
    run_ok(
        bin()
            .env("RERANK_LENS_API_KEY", "sk-test")
            .args([
                "rerank",
                "--dataset",
                dataset_path.to_str().unwrap(),
                "--backend",
                "listwise-llm",
                "--endpoint",
                &endpoint,
                "--model",
                "test-model",
                "--query-template",
                "claim-verification",
                "--log",
                log_path.to_str().unwrap(),
                "--output",
                rankings.to_str().unwrap(),
            ]),
    );
    let r: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(&rankings).unwrap().lines().next().unwrap())
            .unwrap();
    assert_eq!(r["order"][0], "p2");
    let log: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(&log_path).unwrap().lines().next().unwrap())
            .unwrap();
    assert_eq!(log["exchanges"][0]["reply"], "[2] > [3] > [1]");
    let first_user = log["exchanges"][0]["messages"][1]["content"].as_str().unwrap();
    assert!(
        first_user.contains("Is the following claim accurate?\nClaimant: A. Person"),
        "{first_user}"
    );
}

#[test]
fn listwise_without_api_key_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let dataset_path = write_dataset(dir.path());
    let out = bin()
        .env_remove("RERANK_LENS_API_KEY")
        .args([
            "rerank",
            "--dataset",
            dataset_path.to_str().unwrap(),
            "--backend",
            "listwise-llm",
            "--endpoint",
            "http://unused.invalid",
            "--model",
            "m",
            "--output",
            dir.path().join("r.jsonl").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("RERANK_LENS_API_KEY"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn run_pipeline_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = fixtures_dir().join("druid_like.jsonl").canonicalize().unwrap();
    let config = dir.path().join("pipeline.toml");
    std::fs::write(
        &config,
        format!(
            r#"
name = "druid-like"
seed = 7
out_dir = "out"

[ingest]
input = "{}"

[rerank]
backend = "bm25"

[eval]
metrics = ["p@1", "delta"]
bootstrap = 200
"#,
            fixture.display()
        ),
    )
    .unwrap();
    let out = run_ok(bin().args(["run", "--config", config.to_str().unwrap()]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("manifest.json"), "{stdout}");
    let out_dir = dir.path().join("out");
    for artifact in [
        "dataset.jsonl",
        "bm25_scores.csv",
        "rankings.jsonl",
        "report.json",
        "profile.csv",
        "manifest.json",
    ] {
        assert!(out_dir.join(artifact).exists(), "missing {artifact}");
    }
    assert!(out_dir.join("report/grid.md").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 7);
    assert!(manifest["input_digests"]
        .as_object()
        .unwrap()
        .values()
        .all(|v| v.as_str().unwrap().starts_with("sha256:")));
}

#[test]
fn run_fails_with_stage_tag_on_missing_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "out_dir = \"out\"\n[ingest]\n[rerank]\nbackend = \"bm25\"\n").unwrap();
    let out = bin()
        .args(["run", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("input"), "{stderr}");
}
