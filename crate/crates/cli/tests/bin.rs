//! End-to-end tests of the installed binary: exit codes per error family
//! and the promise that credentials never leak into output.

mod common;

use std::fs;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

use common::*;
use mcqa::synth::synthetic_dataset;

fn mcqa_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mcqa"))
}

fn run(args: &[&str]) -> Output {
    mcqa_bin().args(args).output().expect("binary runs")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn setup_workspace(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let dataset = synthetic_dataset("bin-toy", 5, 8).unwrap();
    let manifest = write_dataset(dir, &dataset);
    let output = dir.join("runs");
    (manifest, output)
}

fn base_config(manifest: &Path, output: &Path) -> String {
    format!(
        "[dataset]\nmanifest = {:?}\n\n[run]\noutput_dir = {:?}\n",
        manifest.display().to_string(),
        output.display().to_string()
    )
}

#[test]
fn help_and_success_paths_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = setup_workspace(dir.path());
    let output = run(&["validate", manifest.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    assert!(stdout_of(&output).contains("bin-toy: 5 options, 8 samples"));
}

#[test]
fn usage_errors_exit_two() {
    // Unknown subcommand and unknown flag are clap's to reject.
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["sweep", "--bogus"]).status.code(), Some(2));

    // A malformed --set override is ours.
    let dir = tempfile::tempdir().unwrap();
    let (manifest, output) = setup_workspace(dir.path());
    let config = write_config(dir.path(), "run.toml", &base_config(&manifest, &output));
    let result = run(&[
        "score",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "no-equals-here",
    ]);
    assert_eq!(result.status.code(), Some(2), "stderr: {}", stderr_of(&result));
}

#[test]
fn missing_files_exit_three() {
    let missing = run(&["validate", "/nonexistent/manifest.json"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(stderr_of(&missing).contains("not found"));

    let no_config = run(&["sweep", "--config", "/nonexistent/run.toml"]);
    assert_eq!(no_config.status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let not_a_run = run(&[
        "report",
        "--run",
        dir.path().to_str().unwrap(),
        "--out",
        dir.path().join("bundle").to_str().unwrap(),
    ]);
    assert_eq!(not_a_run.status.code(), Some(3));
}

#[test]
fn malformed_data_exits_four_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fs::create_dir_all(&data).unwrap();
    fs::write(data.join("catalog.json"), r#"["alpha", "beta"]"#).unwrap();
    fs::write(
        data.join("samples.jsonl"),
        concat!(
            r#"{"id": "s1", "query": "fine", "label": "alpha"}"#,
            "\n",
            "not json at all\n",
        ),
    )
    .unwrap();
    let manifest = data.join("manifest.json");
    fs::write(
        &manifest,
        r#"{"name": "broken", "catalog_path": "catalog.json", "samples_path": "samples.jsonl"}"#,
    )
    .unwrap();

    let output = run(&["validate", manifest.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(4));
    assert!(stderr_of(&output).contains("line 2"), "stderr: {}", stderr_of(&output));
}

#[test]
fn config_inconsistencies_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, output) = setup_workspace(dir.path());
    let body = format!(
        "{}\n[embedding]\nkind = \"hash\"\nseed = 1\ndimension = 8\n\n[similarity]\nmetric = \"pooled_cosine\"\n",
        base_config(&manifest, &output)
    );
    let config = write_config(dir.path(), "run.toml", &body);
    let result = run(&["score", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2), "stderr: {}", stderr_of(&result));
}

#[test]
fn missing_credential_env_var_exits_two_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, output) = setup_workspace(dir.path());
    let body = format!(
        "{}\n[model]\nmodel_id = \"srv\"\nkind = \"remote\"\nendpoint = \"http://127.0.0.1:9/v1/chat/completions\"\napi_key_env = \"MCQA_BIN_TEST_TOKEN\"\n",
        base_config(&manifest, &output)
    );
    let config = write_config(dir.path(), "run.toml", &body);
    let result = mcqa_bin()
        .args(["eval", "--config", config.to_str().unwrap()])
        .env_remove("MCQA_BIN_TEST_TOKEN")
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2), "stderr: {}", stderr_of(&result));
    assert!(stderr_of(&result).contains("MCQA_BIN_TEST_TOKEN"));
}

/// One-shot HTTP server that answers anything with a deliberately invalid
/// completion payload, then records what it received.
fn serve_garbage_once() -> (String, std::thread::JoinHandle<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut buffer = [0u8; 65536];
        let n = stream.read(&mut buffer).unwrap_or(0);
        let request = String::from_utf8_lossy(&buffer[..n]).into_owned();
        let body = "this is not a chat completion";
        let response = format!(
            "HTTP/1.1 200 OK\r\ncontent-type: text/plain\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        );
        let _ = stream.write_all(response.as_bytes());
        request
    });
    (format!("http://{addr}/v1/chat/completions"), handle)
}

#[test]
fn provider_protocol_failure_exits_five_and_never_leaks_the_token() {
    let secret = "sk-test-3f2a9c81d7e6b450";
    let (endpoint, server) = serve_garbage_once();

    let dir = tempfile::tempdir().unwrap();
    let (manifest, output) = setup_workspace(dir.path());
    let body = format!(
        "[dataset]\nmanifest = {:?}\n\n[run]\nconcurrency = 1\noutput_dir = {:?}\n\n[model]\nmodel_id = \"srv\"\nkind = \"remote\"\nendpoint = \"{endpoint}\"\napi_key_env = \"MCQA_BIN_TEST_TOKEN\"\n",
        manifest.display().to_string(),
        output.display().to_string()
    );
    let config = write_config(dir.path(), "run.toml", &body);

    let result = mcqa_bin()
        .args(["eval", "--config", config.to_str().unwrap()])
        .env("MCQA_BIN_TEST_TOKEN", secret)
        .output()
        .unwrap();
    let request = server.join().unwrap();

    assert_eq!(result.status.code(), Some(5), "stderr: {}", stderr_of(&result));
    // The server saw the token (that is its job)...
    assert!(request.contains(secret), "request was: {request}");
    // ...but no process output may contain it.
    assert!(!stdout_of(&result).contains(secret));
    assert!(!stderr_of(&result).contains(secret));
    // A failed run leaves no run directory behind.
    assert!(!output.exists() || run_dirs(&output, "eval-").is_empty());
}

#[test]
fn unreachable_endpoint_yields_excluded_samples_not_an_error() {
    // Connection refusals are outages, not protocol errors: the run
    // completes with every sample flagged and excluded.
    let dir = tempfile::tempdir().unwrap();
    let dataset = synthetic_dataset("tiny", 4, 2).unwrap();
    let manifest = write_dataset(dir.path(), &dataset);
    let output = dir.path().join("runs");
    let body = format!(
        "[dataset]\nmanifest = {:?}\n\n[run]\nconcurrency = 1\noutput_dir = {:?}\n\n[model]\nmodel_id = \"srv\"\nkind = \"remote\"\nendpoint = \"http://127.0.0.1:9/v1/chat/completions\"\n",
        manifest.display().to_string(),
        output.display().to_string()
    );
    let config = write_config(dir.path(), "run.toml", &body);
    let result = run(&["eval", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(0), "stderr: {}", stderr_of(&result));
    assert!(stdout_of(&result).contains("2 failed samples excluded"));

    let eval_run = single_run_dir(&output, "eval-");
    let strategy = read_json(&eval_run.join("strategy.json"));
    assert_eq!(strategy["excluded"], 2);
    assert_eq!(strategy["accuracy"], 0.0);
}
