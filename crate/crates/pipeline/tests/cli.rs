use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn eci(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eci"))
        .current_dir(dir)
        .env_remove("ECI_API_KEY")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_eval_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture("corpus.jsonl");
    let script = fixture("script.jsonl");
    ok(&eci(dir.path(), &["run", "--corpus", s(&corpus), "--script", s(&script), "--out", "o1"]));

    let stdout = ok(&eci(
        dir.path(),
        &["eval", "--corpus", s(&corpus), "--predictions", "o1/predictions.jsonl", "--mode", "di"],
    ));
    let report: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(report["f1"], 1.0);
    assert_eq!(report["tp"], 4);

    let both = ok(&eci(dir.path(), &["eval", "--corpus", s(&corpus), "--predictions", "o1/predictions.jsonl"]));
    assert_eq!(both.lines().count(), 2);

    ok(&eci(dir.path(), &["run", "--from-manifest", "o1/manifest.json", "--out", "o2"]));
    assert_eq!(
        fs::read(dir.path().join("o1/predictions.jsonl")).unwrap(),
        fs::read(dir.path().join("o2/predictions.jsonl")).unwrap()
    );
    let manifest = fs::read_to_string(dir.path().join("o2/manifest.json")).unwrap();
    assert!(manifest.contains("\"kind\": \"replay\""));

    let stats = ok(&eci(dir.path(), &["cache", "stats", "--cache", "o1/cache"]));
    assert!(stats.starts_with("entries\t36\n"), "{stats}");
    let export = ok(&eci(dir.path(), &["cache", "export", "--cache", "o1/cache"]));
    assert_eq!(export.lines().count(), 36);
}

#[test]
fn sweep_writes_a_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = eci(
        dir.path(),
        &[
            "sweep",
            "--corpus",
            s(&fixture("corpus.jsonl")),
            "--script",
            s(&fixture("script.jsonl")),
            "--theta",
            "0.6,0.9",
            "--a",
            "0.5",
            "--out",
            "grid.tsv",
        ],
    );
    ok(&out);
    let tsv = fs::read_to_string(dir.path().join("grid.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 1 + 5 * 2 * 5);
    assert!(String::from_utf8_lossy(&out.stderr).contains("best DI-F1"));
}

#[test]
fn usage_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture("corpus.jsonl");
    let cases: [&[&str]; 4] = [
        &["run", "--corpus", s(&corpus), "--backend", "http", "--endpoint", "http://127.0.0.1:9"],
        &["run", "--corpus", s(&corpus), "--backend", "replay", "--cache", "nope"],
        &["run", "--corpus", s(&corpus), "--backend", "http", "--endpoint", "http://127.0.0.1:9", "--model", "m"],
        &["sweep", "--corpus", s(&corpus), "--backend", "http", "--endpoint", "http://x", "--model", "m"],
    ];
    for args in cases {
        let out = eci(dir.path(), args);
        assert!(!out.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{args:?}");
    }
}

#[test]
fn generation_and_conversion() {
    let dir = tempfile::tempdir().unwrap();
    ok(&eci(
        dir.path(),
        &[
            "gen-validation",
            "--seeds",
            s(&fixture("seeds.jsonl")),
            "--script",
            s(&fixture("generation_script.jsonl")),
            "--modes",
            "rewrite",
            "--out",
            "v.jsonl",
        ],
    ));
    let docs = fs::read_to_string(dir.path().join("v.jsonl")).unwrap();
    assert_eq!(docs.lines().count(), 4);

    let maven = r#"{"id":"m1","sentences":["Rain fell.","Roads flooded."],"events":[{"id":"E1","mention":[{"trigger_word":"fell","sent_id":0}]},{"id":"E2","mention":[{"trigger_word":"flooded","sent_id":1}]}],"causal_relations":{"CAUSE":[["E1","E2"]]}}"#;
    fs::write(dir.path().join("maven.jsonl"), format!("{maven}\n\n")).unwrap();
    ok(&eci(dir.path(), &["convert-maven", "--input", "maven.jsonl", "--out", "c.jsonl"]));
    let doc: serde_json::Value =
        serde_json::from_str(fs::read_to_string(dir.path().join("c.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(doc["id"], "m1");
    assert_eq!(doc["relations"].as_array().unwrap().len(), 1);
}
