use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::{DateTime, Utc};
use log::info;
use serde::{Deserialize, Serialize};

use eci_core::decision::graph_edge_list;
use eci_core::evalbench::{load_corpus, predictions_to_string, ScopeSelection};
use eci_core::{MefaConfig, TemplateSet};
use eci_gateway::{BackendKind, BackendSpec, Gateway, GatewayStats, RetryPolicy};

use crate::run::{evidence_records, run_pipeline, Aggregator, RunError, RunOutput};

pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const GRAPHS_FILE: &str = "graphs.tsv";
pub const EVIDENCE_FILE: &str = "evidence.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Aborted,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub documents: usize,
    pub pairs: usize,
    pub pairs_gathered: usize,
    pub parse_fallbacks: usize,
    pub causal_decisions: usize,
    pub graph_edges: usize,
    pub gateway: GatewayStats,
}

/// Record of one run. Together with the response cache it is enough to
/// repeat the run in replay mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: RunStatus,
    pub error: Option<String>,
    pub corpus: PathBuf,
    pub config: MefaConfig,
    pub backend: BackendSpec,
    pub script: Option<PathBuf>,
    pub templates_version: String,
    pub templates_dir: Option<PathBuf>,
    pub aggregator: String,
    pub scope: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub counts: RunCounts,
}

impl RunManifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// The request that repeats this run from the cache alone.
    pub fn replay_request(&self, out_dir: PathBuf) -> anyhow::Result<RunRequest> {
        let Some(cache) = self.backend.cache_dir.clone() else {
            bail!("the recorded run had no cache directory, so it cannot be replayed");
        };
        let backend = BackendSpec::replay(cache, &self.backend.model)
            .with_sampling(self.backend.temperature, self.backend.top_p);
        Ok(RunRequest {
            corpus: self.corpus.clone(),
            config: self.config.clone(),
            backend,
            script: None,
            templates_dir: self.templates_dir.clone(),
            aggregator: self.aggregator.parse()?,
            scope: self.scope.parse()?,
            out_dir,
        })
    }
}

/// Inputs of a run as given on the command line.
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub corpus: PathBuf,
    pub config: MefaConfig,
    pub backend: BackendSpec,
    pub script: Option<PathBuf>,
    pub templates_dir: Option<PathBuf>,
    pub aggregator: Aggregator,
    pub scope: ScopeSelection,
    pub out_dir: PathBuf,
}

fn write(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("record serializes") + "\n")
        .collect()
}

/// Writes predictions, graphs and evidence of a completed run.
pub fn write_outputs(
    dir: &Path,
    docs: &[eci_core::Document],
    output: &RunOutput,
) -> anyhow::Result<()> {
    write(dir, PREDICTIONS_FILE, &predictions_to_string(&output.predictions(docs)))?;
    let graphs: String = docs
        .iter()
        .zip(&output.graphs)
        .map(|(d, g)| graph_edge_list(&d.id, g))
        .collect();
    write(dir, GRAPHS_FILE, &graphs)?;
    write(dir, EVIDENCE_FILE, &jsonl(&evidence_records(docs, output)))
}

/// Runs the pipeline and writes its artifacts under `request.out_dir`. The
/// manifest is written in every case; an aborted run leaves an `aborted`
/// manifest and whatever the cache already holds.
pub fn execute_run(request: &RunRequest) -> anyhow::Result<RunManifest> {
    let started_at = Utc::now();
    fs::create_dir_all(&request.out_dir)
        .with_context(|| format!("creating {}", request.out_dir.display()))?;
    let docs = load_corpus(&request.corpus)?;
    let templates = match &request.templates_dir {
        Some(dir) => TemplateSet::from_dir(dir)?,
        None => TemplateSet::default(),
    };
    request.config.validate()?;
    let gateway = Gateway::new(request.backend.clone(), RetryPolicy::from_config(&request.config))?;

    let result = run_pipeline(
        &docs,
        &gateway,
        &templates,
        &request.config,
        request.aggregator,
        request.scope,
    );
    let mut counts = RunCounts {
        documents: docs.len(),
        ..RunCounts::default()
    };
    let (status, error) = match &result {
        Ok(output) => {
            write_outputs(&request.out_dir, &docs, output)?;
            counts.pairs = output.jobs.len();
            counts.pairs_gathered = output.bundles.len();
            counts.parse_fallbacks = output.parse_fallbacks();
            counts.causal_decisions = output.decisions.iter().filter(|d| d.directed_edge().is_some()).count();
            counts.graph_edges = output.graphs.iter().map(|g| g.edges.len()).sum();
            (RunStatus::Completed, None)
        }
        Err(RunError::Gather { completed, total, .. }) => {
            counts.pairs = *total;
            counts.pairs_gathered = *completed;
            (RunStatus::Aborted, Some(result.as_ref().unwrap_err().to_string()))
        }
        Err(e) => (RunStatus::Aborted, Some(e.to_string())),
    };
    counts.gateway = gateway.stats();
    let manifest = RunManifest {
        status,
        error,
        corpus: request.corpus.clone(),
        config: request.config.clone(),
        backend: request.backend.clone(),
        script: request.script.clone(),
        templates_version: templates.version.clone(),
        templates_dir: request.templates_dir.clone(),
        aggregator: request.aggregator.to_string(),
        scope: request.scope.to_string(),
        started_at,
        finished_at: Utc::now(),
        counts,
    };
    write(
        &request.out_dir,
        MANIFEST_FILE,
        &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"),
    )?;
    if manifest.backend.kind == BackendKind::Http && manifest.backend.cache_dir.is_none() {
        info!("no cache directory was set; this run cannot be replayed");
    }
    match result {
        Ok(_) => Ok(manifest),
        Err(e) => Err(anyhow::Error::new(e).context(format!(
            "run aborted; manifest written to {}",
            request.out_dir.join(MANIFEST_FILE).display()
        ))),
    }
}
