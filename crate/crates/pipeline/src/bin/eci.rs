use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use eci_core::evalbench::{
    convert_maven_line, corpus_to_string, evaluate_corpus, load_corpus, parse_predictions, EvalMode,
    ScopeSelection,
};
use eci_core::{MefaConfig, TemplateSet};
use eci_gateway::{BackendKind, BackendSpec, Gateway, ResponseCache, RetryPolicy, ScriptTable};
use eci_pipeline::manifest::{RunManifest, MANIFEST_FILE};
use eci_pipeline::sweep::{best_row, parse_axis, rows_to_tsv};
use eci_pipeline::validation::{parse_seeds, VALIDATION_TEMPERATURE};
use eci_pipeline::{
    collect_evidence, execute_run, generate_validation, plan_jobs, sweep, Aggregator, GenModes, RunRequest,
    SweepGrid,
};

#[derive(Parser)]
#[command(name = "eci", version, about = "Zero-shot event causality identification")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Identify causal pairs in a corpus.
    Run(RunArgs),
    /// Score a prediction file against the corpus gold relations.
    Eval(EvalArgs),
    /// Grid search over delta, theta, a and b using cached evidence.
    Sweep(SweepArgs),
    /// Generate validation documents from marked seed sentences.
    GenValidation(GenArgs),
    /// Inspect or manage a response cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// Convert MAVEN-ERE style JSON lines to the canonical corpus format.
    ConvertMaven {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct BackendArgs {
    #[arg(long, default_value = "scripted", value_parser = ["http", "replay", "scripted"])]
    backend: String,
    /// Model name; required for http and replay.
    #[arg(long)]
    model: Option<String>,
    /// Base URL of a chat-completion API.
    #[arg(long)]
    endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    #[arg(long, default_value = "ECI_API_KEY")]
    api_key_env: String,
    /// Response table for the scripted backend (JSON lines).
    #[arg(long)]
    script: Option<PathBuf>,
    /// Response cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    concurrency: Option<u32>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, required_unless_present = "from_manifest")]
    corpus: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    backend: BackendArgs,
    /// Directory holding the six sub-task templates.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, default_value = "choquet")]
    aggregator: Aggregator,
    #[arg(long, default_value = "both")]
    scope: ScopeSelection,
    #[arg(long, default_value = "eci-out")]
    out: PathBuf,
    /// Do not cache responses (the run cannot be replayed).
    #[arg(long)]
    no_cache: bool,
    /// Repeat a recorded run from its cache, ignoring the other flags.
    #[arg(long)]
    from_manifest: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    /// ei, di, or both when omitted.
    #[arg(long)]
    mode: Option<EvalMode>,
    #[arg(long, default_value = "both")]
    scope: ScopeSelection,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, default_value = "choquet")]
    aggregator: Aggregator,
    #[arg(long, default_value = "both")]
    scope: ScopeSelection,
    /// Comma-separated values; defaults to the standard search grid.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    b: Option<String>,
    /// Output TSV file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// JSON lines of {cause, effect, sentence} with [EVENT]...[/EVENT] markers.
    #[arg(long)]
    seeds: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Any of rewrite, expand, extract.
    #[arg(long, value_delimiter = ',', default_value = "rewrite,expand,extract")]
    modes: Vec<String>,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Subcommand)]
enum CacheAction {
    Stats {
        #[arg(long)]
        cache: PathBuf,
    },
    Clear {
        #[arg(long)]
        cache: PathBuf,
    },
    /// Write every entry as one JSON line.
    Export {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(args: &ConfigArgs) -> Result<MefaConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            MefaConfig::from_kv_str(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => MefaConfig::default(),
    };
    if let Some(r) = args.rounds {
        config.rounds = r;
    }
    if let Some(c) = args.concurrency {
        config.concurrency_limit = c;
    }
    config.validate()?;
    Ok(config)
}

fn backend_spec(args: &BackendArgs, config: &MefaConfig, default_cache: Option<PathBuf>) -> Result<BackendSpec> {
    let kind: BackendKind = args.backend.parse().map_err(anyhow::Error::msg)?;
    let cache = args.cache.clone().or(default_cache);
    let spec = match kind {
        BackendKind::Http => {
            let Some(endpoint) = &args.endpoint else { bail!("--backend http needs --endpoint") };
            let Some(model) = &args.model else { bail!("--backend http needs --model") };
            BackendSpec::http(endpoint, model, Some(&args.api_key_env)).with_cache(cache)
        }
        BackendKind::Replay => {
            let Some(model) = &args.model else {
                bail!("--backend replay needs --model (the model the cache was filled with)")
            };
            let Some(cache) = cache else { bail!("--backend replay needs --cache") };
            BackendSpec::replay(cache, model)
        }
        BackendKind::Scripted => {
            let Some(path) = &args.script else { bail!("--backend scripted needs --script") };
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let table = ScriptTable::from_jsonl(&text)
                .map_err(|(line, msg)| anyhow::anyhow!("{}: line {line}: {msg}", path.display()))?;
            let mut spec = BackendSpec::scripted(table).with_cache(cache);
            if let Some(model) = &args.model {
                spec.model = model.clone();
            }
            spec
        }
    };
    Ok(spec.with_sampling(config.temperature, config.top_p))
}

fn templates(dir: &Option<PathBuf>) -> Result<TemplateSet> {
    Ok(match dir {
        Some(d) => TemplateSet::from_dir(d)?,
        None => TemplateSet::default(),
    })
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().write_all(text.as_bytes()).map_err(Into::into),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let request = if let Some(path) = &args.from_manifest {
        RunManifest::load(path)?.replay_request(args.out.clone())?
    } else {
        let config = load_config(&args.config)?;
        let default_cache = (!args.no_cache).then(|| args.out.join("cache"));
        let mut backend = backend_spec(&args.backend, &config, default_cache)?;
        if args.no_cache && backend.kind != BackendKind::Replay {
            backend.cache_dir = None;
        }
        RunRequest {
            corpus: args.corpus.clone().expect("required by clap"),
            config,
            backend,
            script: args.backend.script.clone(),
            templates_dir: args.templates.clone(),
            aggregator: args.aggregator,
            scope: args.scope,
            out_dir: args.out.clone(),
        }
    };
    let manifest = execute_run(&request)?;
    let c = &manifest.counts;
    eprintln!(
        "{} pairs in {} documents, {} causal decisions, {} parse fallbacks, {} cache hits; outputs in {}",
        c.pairs,
        c.documents,
        c.causal_decisions,
        c.parse_fallbacks,
        c.gateway.cache_hits,
        request.out_dir.display()
    );
    info!("manifest: {}", request.out_dir.join(MANIFEST_FILE).display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let docs = load_corpus(&args.corpus)?;
    let text = fs::read_to_string(&args.predictions)
        .with_context(|| format!("reading {}", args.predictions.display()))?;
    let preds = parse_predictions(&text)
        .map_err(|(line, msg)| anyhow::anyhow!("{}: line {line}: {msg}", args.predictions.display()))?;
    let modes = match args.mode {
        Some(m) => vec![m],
        None => vec![EvalMode::EI, EvalMode::DI],
    };
    for mode in modes {
        let report = evaluate_corpus(&docs, &preds, args.scope, mode);
        println!("{}", serde_json::to_string(&report)?);
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let docs = load_corpus(&args.corpus)?;
    let spec = backend_spec(&args.backend, &config, None)?;
    if spec.kind == BackendKind::Http {
        bail!("sweep reads cached evidence only; use --backend replay or scripted");
    }
    let gateway = Gateway::new(spec, RetryPolicy::from_config(&config))?;
    let defaults = SweepGrid::default();
    let axis = |v: &Option<String>, d: Vec<f64>| -> Result<Vec<f64>> {
        match v {
            Some(text) => parse_axis(text).map_err(anyhow::Error::msg),
            None => Ok(d),
        }
    };
    let grid = SweepGrid {
        delta: axis(&args.delta, defaults.delta)?,
        theta: axis(&args.theta, defaults.theta)?,
        a: axis(&args.a, defaults.a)?,
        b: axis(&args.b, defaults.b)?,
    };
    let jobs = plan_jobs(&docs, args.scope);
    let bundles = collect_evidence(&gateway, &templates(&args.templates)?, &docs, &jobs, &config)?;
    let rows = sweep(&docs, &jobs, &bundles, &config, &grid, args.aggregator, args.scope)?;
    write_or_print(&args.out, &rows_to_tsv(&rows))?;
    if let Some(best) = best_row(&rows) {
        eprintln!(
            "best DI-F1 {:.4} at delta={} theta={} a={} b={} ({} grid points)",
            best.di.f1,
            best.delta,
            best.theta,
            best.a,
            best.b,
            rows.len()
        );
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let mut modes = GenModes {
        rewrite: false,
        expand: false,
        extract: false,
    };
    for m in &args.modes {
        match m.trim() {
            "rewrite" => modes.rewrite = true,
            "expand" => modes.expand = true,
            "extract" => modes.extract = true,
            other => bail!("unknown generation mode `{other}`"),
        }
    }
    let text = fs::read_to_string(&args.seeds).with_context(|| format!("reading {}", args.seeds.display()))?;
    let seeds = parse_seeds(&text)?;
    let spec = backend_spec(&args.backend, &config, None)?.with_sampling(VALIDATION_TEMPERATURE, config.top_p);
    let gateway = Gateway::new(spec, RetryPolicy::from_config(&config))?;
    let report = generate_validation(&seeds, &gateway, modes, config.concurrency_limit as usize)?;
    fs::write(&args.out, corpus_to_string(&report.documents))
        .with_context(|| format!("writing {}", args.out.display()))?;
    for (line, why) in &report.skipped_seeds {
        warn!("seed {line} skipped: {why}");
    }
    eprintln!(
        "{} documents from {} seeds ({} seeds skipped, {} variants dropped)",
        report.documents.len(),
        seeds.len(),
        report.skipped_seeds.len(),
        report.skipped_variants.len()
    );
    Ok(())
}

fn open_cache(dir: &Path) -> Result<ResponseCache> {
    if !dir.is_dir() {
        bail!("{} is not a cache directory", dir.display());
    }
    Ok(ResponseCache::open(dir)?)
}

fn cmd_cache(action: CacheAction) -> Result<()> {
    match action {
        CacheAction::Stats { cache } => {
            let s = open_cache(&cache)?.summary()?;
            println!("entries\t{}\nbytes\t{}", s.entries, s.bytes);
        }
        CacheAction::Clear { cache } => {
            let n = open_cache(&cache)?.clear()?;
            eprintln!("removed {n} entries");
        }
        CacheAction::Export { cache, out } => {
            let cache = open_cache(&cache)?;
            let n = match &out {
                Some(path) => {
                    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                    cache.export(io::BufWriter::new(file))?
                }
                None => cache.export(io::stdout().lock())?,
            };
            eprintln!("exported {n} entries");
        }
    }
    Ok(())
}

fn cmd_convert(input: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc = convert_maven_line(line).map_err(|e| anyhow::anyhow!("{}: line {}: {e}", input.display(), i + 1))?;
        docs.push(doc);
    }
    fs::write(out, corpus_to_string(&docs)).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("converted {} documents", docs.len());
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::GenValidation(a) => cmd_gen(a),
        Command::Cache { action } => cmd_cache(action),
        Command::ConvertMaven { input, out } => cmd_convert(&input, &out),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
