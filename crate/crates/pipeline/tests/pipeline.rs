use std::fs;
use std::path::{Path, PathBuf};

use eci_core::evalbench::{evaluate_corpus, load_corpus, parse_predictions, EvalMode, ScopeSelection};
use eci_core::{MefaConfig, TemplateSet, Verdict};
use eci_gateway::{BackendSpec, Gateway, RetryPolicy, ScriptTable};
use eci_pipeline::manifest::{MANIFEST_FILE, PREDICTIONS_FILE, GRAPHS_FILE};
use eci_pipeline::{execute_run, run_pipeline, Aggregator, RunManifest, RunRequest, RunStatus};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn script() -> ScriptTable {
    ScriptTable::from_jsonl(&fs::read_to_string(fixture("script.jsonl")).unwrap()).unwrap()
}

fn scripted_request(out: &Path, cache: Option<PathBuf>, concurrency: u32) -> RunRequest {
    RunRequest {
        corpus: fixture("corpus.jsonl"),
        config: MefaConfig {
            concurrency_limit: concurrency,
            ..MefaConfig::default()
        },
        backend: BackendSpec::scripted(script()).with_cache(cache),
        script: Some(fixture("script.jsonl")),
        templates_dir: None,
        aggregator: Aggregator::default(),
        scope: ScopeSelection::Both,
        out_dir: out.to_path_buf(),
    }
}

#[test]
fn fixture_corpus_decisions() {
    let docs = load_corpus(&fixture("corpus.jsonl")).unwrap();
    let gw = Gateway::new(BackendSpec::scripted(script()), RetryPolicy::from_config(&MefaConfig::default())).unwrap();
    let cfg = MefaConfig::default();
    let out = run_pipeline(&docs, &gw, &TemplateSet::default(), &cfg, Aggregator::default(), ScopeSelection::Both).unwrap();
    let preds = out.predictions(&docs);
    let summary: Vec<(String, String, String, Verdict)> = preds
        .iter()
        .map(|p| (p.doc_id.clone(), p.cause.clone(), p.effect.clone(), p.verdict))
        .collect();
    let want = [
        ("news-1", "e1", "e2", Verdict::Forward),
        ("news-1", "e1", "e3", Verdict::NoCausality),
        ("news-1", "e2", "e3", Verdict::Forward),
        ("news-2", "e1", "e2", Verdict::Forward),
        ("news-2", "e1", "e3", Verdict::NoCausality),
        ("news-2", "e2", "e3", Verdict::Reverse),
    ];
    assert_eq!(summary.len(), want.len());
    for (got, w) in summary.iter().zip(want) {
        assert_eq!((got.0.as_str(), got.1.as_str(), got.2.as_str(), got.3), w);
    }

    // w_d = 1, A = 0.6, fused 2.2 / 0.0.
    let storm = &preds[0];
    assert!((storm.s_cause - 2.8).abs() < 1e-9, "{}", storm.s_cause);
    assert!((storm.s_causedby - 0.6).abs() < 1e-9);
    assert_eq!(storm.threshold_used, 0.6);

    // Coreferent inter-sentence pair scores nothing.
    assert_eq!((preds[4].s_cause, preds[4].s_causedby), (0.0, 0.0));
    assert!((preds[3].threshold_used - 0.6 * (-0.1f64).exp()).abs() < 1e-12);

    for mode in [EvalMode::EI, EvalMode::DI] {
        let m = evaluate_corpus(&docs, &preds, ScopeSelection::Both, mode);
        assert_eq!((m.tp, m.fp, m.fn_), (4, 0, 0), "{mode}");
    }

    let g = &out.graphs[1];
    assert_eq!(g.coref_clusters, vec![vec!["e1".to_string(), "e3".to_string()]]);
    let edges: Vec<(&str, &str)> = g.edges.iter().map(|e| (e.cause.as_str(), e.effect.as_str())).collect();
    assert_eq!(edges, vec![("e1", "e2"), ("e3", "e2")]);
    assert_eq!(out.parse_fallbacks(), 0);
}

#[test]
fn meda_uses_unanimity() {
    let docs = load_corpus(&fixture("corpus.jsonl")).unwrap();
    let gw = Gateway::new(BackendSpec::scripted(script()), RetryPolicy::from_config(&MefaConfig::default())).unwrap();
    let out = run_pipeline(&docs, &gw, &TemplateSet::default(), &MefaConfig::default(), Aggregator::Meda, ScopeSelection::Both).unwrap();
    let verdicts: Vec<Verdict> = out.decisions.iter().map(|d| d.verdict).collect();
    assert_eq!(
        verdicts,
        vec![
            Verdict::Forward,
            Verdict::NoCausality,
            Verdict::Forward,
            Verdict::Forward,
            Verdict::NoCausality,
            Verdict::Reverse
        ]
    );
    assert_eq!((out.decisions[0].s_cause, out.decisions[0].s_causedby), (1.0, 0.0));
}

#[test]
fn scope_selection_limits_pairs() {
    let docs = load_corpus(&fixture("corpus.jsonl")).unwrap();
    let gw = Gateway::new(BackendSpec::scripted(script()), RetryPolicy::from_config(&MefaConfig::default())).unwrap();
    let cfg = MefaConfig::default();
    let intra = run_pipeline(&docs, &gw, &TemplateSet::default(), &cfg, Aggregator::default(), ScopeSelection::Intra).unwrap();
    let inter = run_pipeline(&docs, &gw, &TemplateSet::default(), &cfg, Aggregator::default(), ScopeSelection::Inter).unwrap();
    assert_eq!((intra.jobs.len(), inter.jobs.len()), (3, 3));
    assert!(intra.jobs.iter().all(|j| j.doc == 0));
}

#[test]
fn runs_are_byte_identical_across_concurrency_and_replay() {
    let root = tempfile::tempdir().unwrap();
    let cache = root.path().join("cache");
    let mut texts = Vec::new();
    for (i, c) in [1, 4, 16].into_iter().enumerate() {
        let out = root.path().join(format!("run{i}"));
        let m = execute_run(&scripted_request(&out, Some(cache.clone()), c)).unwrap();
        assert_eq!(m.status, RunStatus::Completed);
        texts.push(fs::read(out.join(PREDICTIONS_FILE)).unwrap());
    }
    let manifest = RunManifest::load(&root.path().join("run0").join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.counts.pairs, 6);
    assert_eq!(manifest.counts.causal_decisions, 4);
    assert_eq!(manifest.counts.gateway.queries, 36);
    assert_eq!(manifest.counts.gateway.scripted_answers, 36);

    let replay_out = root.path().join("replay");
    let replayed = execute_run(&manifest.replay_request(replay_out.clone()).unwrap()).unwrap();
    assert_eq!(replayed.counts.gateway.cache_hits, 36);
    assert_eq!(replayed.counts.gateway.network_calls, 0);
    texts.push(fs::read(replay_out.join(PREDICTIONS_FILE)).unwrap());
    assert!(texts.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(
        fs::read(root.path().join("run0").join(GRAPHS_FILE)).unwrap(),
        fs::read(replay_out.join(GRAPHS_FILE)).unwrap()
    );

    let preds = parse_predictions(std::str::from_utf8(&texts[0]).unwrap()).unwrap();
    assert_eq!(preds.len(), 6);
}

#[test]
fn empty_corpus_gives_empty_predictions_and_a_manifest() {
    let root = tempfile::tempdir().unwrap();
    let corpus = root.path().join("empty.jsonl");
    fs::write(&corpus, "").unwrap();
    let mut req = scripted_request(&root.path().join("out"), None, 4);
    req.corpus = corpus;
    let m = execute_run(&req).unwrap();
    assert_eq!(m.status, RunStatus::Completed);
    assert_eq!(m.counts.pairs, 0);
    assert_eq!(fs::read_to_string(root.path().join("out").join(PREDICTIONS_FILE)).unwrap(), "");
    assert!(RunManifest::load(&root.path().join("out").join(MANIFEST_FILE)).is_ok());
}

#[test]
fn transport_failure_aborts_with_a_manifest() {
    let root = tempfile::tempdir().unwrap();
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let mut req = scripted_request(&root.path().join("out"), None, 2);
    req.backend = BackendSpec::http(&format!("http://127.0.0.1:{port}/v1"), "m", None)
        .with_cache(Some(root.path().join("cache")));
    req.config.retries = 1;
    let err = execute_run(&req).unwrap_err();
    assert!(format!("{err:#}").contains("transport failure"), "{err:#}");
    let m = RunManifest::load(&root.path().join("out").join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.status, RunStatus::Aborted);
    assert_eq!(m.counts.pairs, 6);
    assert!(m.counts.pairs_gathered < 6);
    assert!(m.error.unwrap().contains("transport failure"));
    assert!(!root.path().join("out").join(PREDICTIONS_FILE).exists());
    let text = fs::read_to_string(root.path().join("out").join(MANIFEST_FILE)).unwrap();
    assert!(text.contains("\"api_key_env\": null"));
}

/// A run aborted half way resumes from the cache: completed pairs are not
/// asked again.
#[test]
fn aborted_runs_resume_from_the_cache() {
    let root = tempfile::tempdir().unwrap();
    let cache = root.path().join("cache");
    // Without the wildcard temporality answer the second pair cannot be served.
    let partial = ScriptTable::new(
        script()
            .rules
            .into_iter()
            .filter(|r| r.event1.is_some() || r.task.as_deref() != Some("temporality"))
            .collect(),
    );
    let mut req = scripted_request(&root.path().join("a"), Some(cache.clone()), 1);
    req.backend = BackendSpec::scripted(partial).with_cache(Some(cache.clone()));
    assert!(execute_run(&req).is_err());
    let aborted = RunManifest::load(&root.path().join("a").join(MANIFEST_FILE)).unwrap();
    assert_eq!(aborted.status, RunStatus::Aborted);
    assert_eq!(aborted.counts.pairs_gathered, 1);

    let full = execute_run(&scripted_request(&root.path().join("b"), Some(cache), 1)).unwrap();
    assert_eq!(full.counts.gateway.cache_hits, 6);
    assert_eq!(full.status, RunStatus::Completed);
}
