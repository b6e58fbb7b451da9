use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use musicscaffold_core::store::{load_corpus, save_corpus, SegmentDatabase};

fn cli(data: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_musicscaffold"))
        .arg("--data-dir")
        .arg(data)
        .args(args)
        .env_remove("MUSICSCAFFOLD_LLM_URL")
        .env_remove("MUSICSCAFFOLD_LMM_URL")
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn run_needs_a_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["run", "--local", "--text", "happy song"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("EmptyDatabase"));
}

#[test]
fn seed_run_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(ok(&cli(&data, &["seed-corpus"])).contains("added 20"));
    // Seeding twice adds nothing.
    assert!(ok(&cli(&data, &["seed-corpus"])).contains("added 0"));

    let report: Value = serde_json::from_str(&ok(&cli(&data, &["run", "--local", "--text", "generate an exciting song"]))).unwrap();
    assert_eq!(report["report"]["overall_match"], true);
    assert_eq!(report["interpreter"], "lexicon_fallback");
    let id = report["session_id"].as_str().unwrap();

    let revision: Value = serde_json::from_str(&ok(&cli(
        &data,
        &["run", "--local", "--text", "sad song", "--parent", id],
    )))
    .unwrap();
    assert_ne!(revision["session_id"], report["session_id"]);

    let zip = dir.path().join("out.zip");
    ok(&cli(&data, &["export", id, "--output", zip.to_str().unwrap()]));
    assert_eq!(&std::fs::read(&zip).unwrap()[..2], b"PK");

    let out = cli(&data, &["export", "no-such-session"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown session"));
}

#[test]
fn rules_list() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&cli(dir.path(), &["rules", "list"]));
    assert_eq!(text.lines().count(), 8);
    assert!(text.lines().next().unwrap().starts_with("transpose_key"));
    let json: Value = serde_json::from_str(&ok(&cli(dir.path(), &["rules", "list", "--json"]))).unwrap();
    assert_eq!(json[0]["name"], "transpose_key");
    assert_eq!(json[0]["applies_to"], "key");
}

#[test]
fn ingest_a_corpus_directory() {
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("incoming");
    let db = SegmentDatabase::from_records(musicscaffold_core::seed::seed_corpus().into_iter().take(5)).unwrap();
    save_corpus(&db, &source).unwrap();
    let data = dir.path().join("data");
    assert!(ok(&cli(&data, &["ingest", source.to_str().unwrap()])).contains("ingested 5"));
    assert_eq!(load_corpus(&data.join("corpus")).unwrap().len(), 5);

    // The same ids again are refused and the corpus is left as it was.
    let out = cli(&data, &["ingest", source.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("already exists"));
    assert_eq!(load_corpus(&data.join("corpus")).unwrap().len(), 5);

    let out = cli(&data, &["ingest", dir.path().join("missing").to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn serve_answers_http() {
    use std::io::{BufRead, BufReader, Read, Write};
    let dir = tempfile::tempdir().unwrap();
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let mut child = Command::new(env!("CARGO_BIN_EXE_musicscaffold"))
        .arg("--data-dir")
        .arg(dir.path())
        .args(["serve", "--addr", &format!("127.0.0.1:{port}")])
        .env("RUST_LOG", "info")
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let mut line = String::new();
    while !line.contains("listening on") {
        line.clear();
        assert!(stderr.read_line(&mut line).unwrap() > 0, "server exited early");
    }
    let mut stream = std::net::TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(stream, "GET /rules HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("transpose_key"));
}
