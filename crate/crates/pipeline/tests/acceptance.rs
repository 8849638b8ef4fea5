//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use eci_core::aggregation::{choquet_fuse, choquet_integral, fuzzy_measure};
use eci_core::config::{DEFAULT_W1, DEFAULT_W2};
use eci_core::domain::validate_bundle;
use eci_core::evalbench::{evaluate, load_corpus, EvalMode, ScopeSelection};
use eci_core::prompts::{parse, SubTask};
use eci_core::scoring::{dependency_weight, directional_scores};
use eci_core::{
    decayed_threshold, determine, DegradedFlags, DependencyLevel, EvidenceBundle, MefaConfig, ProbTriple,
    PromptError, TemplateSet, Verdict,
};
use eci_gateway::{gather_evidence, BackendSpec, Gateway, RetryPolicy, ScriptRule, ScriptTable};
use eci_pipeline::manifest::PREDICTIONS_FILE;
use eci_pipeline::{execute_run, Aggregator, RunRequest};

const MEAN_TOL: f64 = 1e-12;
const ORACLE_TOL: f64 = 1e-9;
const FIXTURE_TOL: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-12;
const DECAY_TOL: f64 = 1e-12;
const MIN_PARSE_RATE: f64 = 0.95;
const MEAN_BUDGET: Duration = Duration::from_secs(1);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Straightforward Choquet evaluator: sorts by `(value, index)`, builds every
/// tail set as a list and sums each pair product inside it.
fn oracle_choquet(x: &[f64], conf: &[f64], a: f64, b: f64, alpha: f64) -> f64 {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(i.cmp(&j)));
    let mu = |set: &[usize]| -> f64 {
        if set.is_empty() {
            0.0
        } else {
            (a * set.len() as f64 + b * set.iter().map(|&j| conf[j]).sum::<f64>()).min(1.0)
        }
    };
    let mut total = 0.0;
    for i in 0..order.len() {
        let tail = &order[i..];
        let mut pairs = 0.0;
        for (p, &j) in tail.iter().enumerate() {
            for &k in &tail[p + 1..] {
                pairs += x[j] * x[k];
            }
        }
        total += x[order[i]] * (mu(tail) - mu(&order[i + 1..]) + alpha * pairs);
    }
    total
}

fn random_triple(rng: &mut StdRng) -> ProbTriple {
    let raw: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
    let s: f64 = raw.iter().sum();
    ProbTriple(raw.map(|v| v / s))
}

fn c1_mean_reduction() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(3..=9);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let conf: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let got = choquet_integral(&x, &conf, 1.0 / n as f64, 0.0, 0.0).map_err(|e| e.to_string())?;
        let mean = x.iter().sum::<f64>() / n as f64;
        worst = worst.max((got - mean).abs());
    }
    let elapsed = start.elapsed();
    ensure(worst <= MEAN_TOL, || format!("max deviation {worst:e}"))?;
    ensure(elapsed < MEAN_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("max deviation {worst:e} in {elapsed:?}"))
}

fn c2_oracle_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=5);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let conf: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let a = rng.random_range(1.0 / n as f64..=1.0);
        let b = rng.random_range(0.0..1.0);
        let alpha = rng.random_range(0.0..1.0);
        let got = choquet_integral(&x, &conf, a, b, alpha).map_err(|e| e.to_string())?;
        worst = worst.max((got - oracle_choquet(&x, &conf, a, b, alpha)).abs());
    }
    ensure(worst <= ORACLE_TOL, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:e}"))
}

fn c3_worked_fixtures() -> Outcome {
    let x = [0.2, 0.5, 0.8];
    let raw = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
    let w1: Vec<f64> = raw.iter().zip(DEFAULT_W1).map(|(r, w)| r * w).collect();
    let w2: Vec<f64> = raw.iter().zip(DEFAULT_W2).map(|(r, w)| r * w).collect();
    let cfg = MefaConfig::default();
    let err = |e: eci_core::ConfigError| e.to_string();
    let cases = [
        ("3-element alpha=0", 0.746, oracle_choquet(&x, &x, 0.5, 0.4, 0.0), choquet_integral(&x, &x, 0.5, 0.4, 0.0).map_err(err)?),
        ("3-element alpha=0.3", 0.8456, oracle_choquet(&x, &x, 0.5, 0.4, 0.3), choquet_integral(&x, &x, 0.5, 0.4, 0.3).map_err(err)?),
        ("certain-forward W1", 2.2, oracle_choquet(&w1, &raw, 0.5, 0.4, 0.3), choquet_fuse(&raw, &cfg.w1, &cfg).map_err(err)?),
        ("certain-forward W2", 0.0, oracle_choquet(&w2, &raw, 0.5, 0.4, 0.3), choquet_fuse(&raw, &cfg.w2, &cfg).map_err(err)?),
    ];
    for (name, want, oracle, got) in cases {
        ensure((oracle - want).abs() <= FIXTURE_TOL, || format!("{name}: oracle gives {oracle}"))?;
        ensure((got - want).abs() <= FIXTURE_TOL, || format!("{name}: got {got}, want {want}"))?;
    }
    Ok("0.746, 0.8456, 2.2, 0.0".into())
}

fn c4_measure_properties() -> Outcome {
    let cfg = MefaConfig::default();
    let mut rng = StdRng::seed_from_u64(4);
    let conf: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..1.0)).collect();
    ensure(fuzzy_measure(&[], cfg.a, cfg.b, &conf) == 0.0, || "mu(empty) != 0".into())?;
    let full: Vec<usize> = (0..9).collect();
    let mu_full = fuzzy_measure(&full, cfg.a, cfg.b, &conf);
    ensure(mu_full == 1.0, || format!("mu(full) = {mu_full}"))?;
    for _ in 0..10_000 {
        let conf: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..1.0)).collect();
        let t: Vec<usize> = (0..9).filter(|_| rng.random_bool(0.6)).collect();
        let s: Vec<usize> = t.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        let a = rng.random_range(0.0..1.0);
        let b = rng.random_range(0.0..1.0);
        let (ms, mt) = (fuzzy_measure(&s, a, b, &conf), fuzzy_measure(&t, a, b, &conf));
        ensure(ms <= mt, || format!("mu({s:?}) = {ms} > mu({t:?}) = {mt}"))?;
    }
    Ok("10000 nested pairs monotone".into())
}

fn bundle_with(t: ProbTriple) -> EvidenceBundle {
    EvidenceBundle {
        t,
        n: ProbTriple::UNIFORM,
        u: ProbTriple::UNIFORM,
        d: DependencyLevel::None,
        clues: vec![],
        coref: false,
        rounds_used: 1,
        degraded: DegradedFlags::default(),
    }
}

fn c5_scoring() -> Outcome {
    let table = [
        (DependencyLevel::Strong, 1.0),
        (DependencyLevel::Medium, 0.2),
        (DependencyLevel::Weak, 0.1),
        (DependencyLevel::None, 0.05),
    ];
    for (level, want) in table {
        let got = dependency_weight(level, 0.1);
        ensure(got == want, || format!("{}: {got} != {want}", level.as_str()))?;
    }
    let mut rng = StdRng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let bundle = validate_bundle(bundle_with(random_triple(&mut rng)));
        let s = directional_scores(&bundle);
        worst = worst.max((s.s_temp + s.s_temp_rev - 2.0 * bundle.t.0[2]).abs());
    }
    ensure(worst <= IDENTITY_TOL, || format!("identity deviation {worst:e}"))?;
    Ok(format!("weight table exact, identity deviation {worst:e}"))
}

fn c6_decay() -> Outcome {
    let err = |e: eci_core::ConfigError| e.to_string();
    let (theta, l) = (0.6, 10);
    ensure(decayed_threshold(theta, 0, l).map_err(err)? == theta, || "decay at 0 is not theta".into())?;
    let at_l = decayed_threshold(theta, l as usize, l).map_err(err)?;
    ensure((at_l - theta * (-0.5f64).exp()).abs() <= DECAY_TOL, || format!("decay at l = {at_l}"))?;
    let mut rng = StdRng::seed_from_u64(6);
    for _ in 0..200 {
        let theta = rng.random_range(0.01..=1.0);
        let l = rng.random_range(1..=30);
        let mut d = 0usize;
        let mut prev = decayed_threshold(theta, d, l).map_err(err)?;
        for _ in 0..20 {
            d += rng.random_range(1..=5);
            let next = decayed_threshold(theta, d, l).map_err(err)?;
            ensure(next < prev, || format!("not decreasing at d={d}: {next} >= {prev}"))?;
            prev = next;
        }
    }
    Ok("exact at 0 and l, strictly decreasing on 200 ladders".into())
}

fn c7_trichotomy() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..10_000 {
        let (a, b, t) = (rng.random_range(-2.0..3.0), rng.random_range(-2.0..3.0), rng.random_range(0.01..=1.0));
        let v = determine(a, b, t);
        let forward = a >= t && a > b;
        let reverse = b >= t && b > a;
        let expected = match (forward, reverse) {
            (true, false) => Verdict::Forward,
            (false, true) => Verdict::Reverse,
            (false, false) => Verdict::NoCausality,
            (true, true) => return Err(format!("both directions qualify for ({a}, {b})")),
        };
        ensure(v == expected, || format!("({a}, {b}, {t}) gave {v}"))?;
    }
    for s in [0.0, 0.6, 0.9, 2.8] {
        let v = determine(s, s, 0.6);
        ensure(v == Verdict::NoCausality, || format!("tie at {s} gave {v}"))?;
    }
    Ok("10000 random pairs, ties give none".into())
}

fn pair_set(rng: &mut StdRng, labels: &[&str]) -> Vec<(String, String)> {
    let mut out = BTreeSet::new();
    for _ in 0..rng.random_range(0..8) {
        let i = rng.random_range(0..labels.len());
        let j = rng.random_range(0..labels.len());
        if i != j {
            out.insert((labels[i].to_string(), labels[j].to_string()));
        }
    }
    out.into_iter().collect()
}

fn c8_metrics() -> Outcome {
    let labels = ["A", "B", "C", "D", "E"];
    let mut rng = StdRng::seed_from_u64(8);
    for _ in 0..1000 {
        let gold: Vec<_> = pair_set(&mut rng, &labels)
            .into_iter()
            .filter(|(a, b)| a < b)
            .collect();
        let pred: Vec<_> = pair_set(&mut rng, &labels)
            .into_iter()
            .filter(|(a, b)| rng.random_bool(0.5) || a < b)
            .collect();
        let ei = evaluate(gold.clone(), pred.clone(), EvalMode::EI);
        let di = evaluate(gold.clone(), pred.clone(), EvalMode::DI);
        ensure(ei.f1 >= di.f1, || format!("EI {} < DI {} for {gold:?} / {pred:?}", ei.f1, di.f1))?;
    }
    let gold = vec![("A".to_string(), "B".to_string())];
    let pred = vec![("B".to_string(), "A".to_string())];
    let ei = evaluate(gold.clone(), pred.clone(), EvalMode::EI).f1;
    let di = evaluate(gold, pred, EvalMode::DI).f1;
    ensure(ei == 1.0 && di == 0.0, || format!("hand example gave EI {ei}, DI {di}"))?;
    Ok("1000 random sets, hand example EI 1 / DI 0".into())
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn c9_replay_determinism() -> Outcome {
    let script_text = fs::read_to_string(fixture("script.jsonl")).map_err(|e| e.to_string())?;
    let script = ScriptTable::from_jsonl(&script_text).map_err(|(l, m)| format!("script line {l}: {m}"))?;
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    let mut runs = 0;
    for concurrency in [1, 4, 16] {
        for _ in 0..3 {
            runs += 1;
            let out = root.path().join(format!("run{runs}"));
            let request = RunRequest {
                corpus: fixture("corpus.jsonl"),
                config: MefaConfig {
                    concurrency_limit: concurrency,
                    ..MefaConfig::default()
                },
                backend: BackendSpec::scripted(script.clone()),
                script: Some(fixture("script.jsonl")),
                templates_dir: None,
                aggregator: Aggregator::default(),
                scope: ScopeSelection::Both,
                out_dir: out.clone(),
            };
            execute_run(&request).map_err(|e| format!("{e:#}"))?;
            outputs.push(fs::read_to_string(out.join(PREDICTIONS_FILE)).map_err(|e| e.to_string())?);
        }
    }
    ensure(outputs.windows(2).all(|w| w[0] == w[1]), || "prediction files differ".into())?;
    let docs = load_corpus(&fixture("corpus.jsonl")).map_err(|e| e.to_string())?;
    let preds = eci_core::evalbench::parse_predictions(&outputs[0]).map_err(|(l, m)| format!("line {l}: {m}"))?;
    ensure(preds.len() == 6, || format!("{} predictions", preds.len()))?;
    let first = &preds[0];
    ensure(
        first.doc_id == docs[0].id && first.verdict == Verdict::Forward && (first.s_cause - 2.8).abs() <= FIXTURE_TOL,
        || format!("unanimous pair gave {:?} with s_cause {}", first.verdict, first.s_cause),
    )?;
    Ok(format!("{runs} runs identical, unanimous pair forward at s_cause {}", first.s_cause))
}

#[derive(serde::Deserialize)]
struct ResponseFixture {
    task: SubTask,
    raw: String,
}

fn degraded_for(flags: &DegradedFlags, task: SubTask) -> bool {
    match task {
        SubTask::Temporality => flags.temporality,
        SubTask::Necessity => flags.necessity,
        SubTask::Sufficiency => flags.sufficiency,
        SubTask::Dependency => flags.dependency,
        SubTask::CausalClue => flags.causal_clue,
        SubTask::Coreference => flags.coreference,
    }
}

fn c10_parser_robustness() -> Outcome {
    let fixtures: Vec<ResponseFixture> = include_str!("../../core/tests/fixtures/responses.jsonl")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let docs = load_corpus(&fixture("corpus.jsonl")).map_err(|e| e.to_string())?;
    let doc = &docs[0];
    let pair = (&doc.events[0], &doc.events[1]);
    let templates = TemplateSet::default();
    let config = MefaConfig::default();
    let mut failures = 0;
    for f in &fixtures {
        match parse(f.task, &f.raw) {
            Ok(_) => continue,
            Err(PromptError::ParseFailure) => failures += 1,
            Err(e) => return Err(format!("{}: unexpected error {e}", f.task.as_str())),
        }
        // The failing response goes through the full evidence path.
        let mut rules = vec![ScriptRule::new(&f.raw).task(f.task.as_str())];
        rules.extend(SubTask::ALL.iter().filter(|t| **t != f.task).map(|t| {
            let answer = match t {
                SubTask::Temporality => "BEFORE: 0.6\nAFTER: 0.2\nSIMULTANEOUS: 0.2\nVAGUE: 0",
                SubTask::Necessity => "PRECONDITION: 0.6\nREV_PRECONDITION: 0.2\nNONE: 0.2",
                SubTask::Sufficiency => "SUFFICIENCY: 0.6\nREV_SUFFICIENCY: 0.2\nNONE: 0.2",
                SubTask::Dependency => "Dependency: strong",
                SubTask::CausalClue => "Clues: none",
                SubTask::Coreference => "Coreference: no",
            };
            ScriptRule::new(answer).task(t.as_str())
        }));
        let gw = Gateway::new(BackendSpec::scripted(ScriptTable::new(rules)), RetryPolicy::from_config(&config))
            .map_err(|e| e.to_string())?;
        let bundle = gather_evidence(&gw, &templates, doc, pair, &config).map_err(|e| e.to_string())?;
        ensure(degraded_for(&bundle.degraded, f.task), || format!("{}: degraded flag not set", f.task.as_str()))?;
        ensure(bundle.degraded.count() == 1, || format!("{}: other tasks degraded", f.task.as_str()))?;
        let fallback_ok = match f.task {
            SubTask::Temporality => bundle.t == ProbTriple::UNIFORM,
            SubTask::Necessity => bundle.n == ProbTriple::UNIFORM,
            SubTask::Sufficiency => bundle.u == ProbTriple::UNIFORM,
            SubTask::Dependency => bundle.d == DependencyLevel::None,
            SubTask::CausalClue => bundle.clues.is_empty(),
            SubTask::Coreference => !bundle.coref,
        };
        ensure(fallback_ok, || format!("{}: fallback value not applied", f.task.as_str()))?;
    }
    let rate = 1.0 - failures as f64 / fixtures.len() as f64;
    ensure(rate >= MIN_PARSE_RATE, || format!("parse rate {rate:.3}"))?;
    Ok(format!(
        "{} of {} parsed ({:.1}%), {failures} failures fell back with the flag set",
        fixtures.len() - failures,
        fixtures.len(),
        rate * 100.0
    ))
}

fn c11_defaults() -> Outcome {
    let c = MefaConfig::default();
    let got = [c.beta, c.delta, c.theta, c.a, c.b, c.alpha];
    let want = [0.1, 0.6, 0.6, 0.5, 0.4, 0.3];
    ensure(got == want, || format!("defaults {got:?}"))?;
    Ok("beta .1, delta .6, theta .6, a .5, b .4, alpha .3".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("choquet mean reduction", c1_mean_reduction),
        ("choquet oracle equivalence", c2_oracle_equivalence),
        ("worked fixtures", c3_worked_fixtures),
        ("measure properties", c4_measure_properties),
        ("scoring conformance", c5_scoring),
        ("threshold decay", c6_decay),
        ("determination trichotomy and ties", c7_trichotomy),
        ("EI-F1 dominates DI-F1", c8_metrics),
        ("end-to-end replay determinism", c9_replay_determinism),
        ("parser robustness", c10_parser_robustness),
        ("default configuration", c11_defaults),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
