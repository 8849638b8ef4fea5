//! Hyperparameter grid search over already gathered evidence.

use serde::{Deserialize, Serialize};

use eci_core::evalbench::{evaluate_corpus, EvalMode, MetricsReport, PredictionRecord, ScopeSelection};
use eci_core::{ConfigError, Document, EvidenceBundle, MefaConfig, TemplateSet};
use eci_gateway::{Gateway, GatewayError};

use crate::run::{decide_all, gather_all, Aggregator, PairJob};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub delta: Vec<f64>,
    pub theta: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            delta: vec![0.3, 0.4, 0.5, 0.6, 0.7],
            theta: vec![0.6, 0.7, 0.8, 0.9],
            a: vec![0.3, 0.4, 0.5, 0.6, 0.7],
            b: vec![0.2, 0.3, 0.4, 0.5, 0.6],
        }
    }
}

impl SweepGrid {
    /// A one-point grid at the given configuration.
    pub fn at(config: &MefaConfig) -> Self {
        SweepGrid {
            delta: vec![config.delta],
            theta: vec![config.theta],
            a: vec![config.a],
            b: vec![config.b],
        }
    }

    pub fn len(&self) -> usize {
        self.delta.len() * self.theta.len() * self.a.len() * self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points with `delta` varying slowest and `b` fastest.
    pub fn points(&self) -> Vec<[f64; 4]> {
        let mut out = Vec::with_capacity(self.len());
        for &d in &self.delta {
            for &t in &self.theta {
                for &a in &self.a {
                    for &b in &self.b {
                        out.push([d, t, a, b]);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub theta: f64,
    pub a: f64,
    pub b: f64,
    pub ei: MetricsReport,
    pub di: MetricsReport,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("evidence missing for {} pair(s): {}", .0.len(), .0.join(", "))]
    Missing(Vec<String>),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Gathers evidence for every job, reporting all pairs the backend cannot
/// answer instead of stopping at the first.
pub fn collect_evidence(
    gateway: &Gateway,
    templates: &TemplateSet,
    docs: &[Document],
    jobs: &[PairJob],
    config: &MefaConfig,
) -> Result<Vec<EvidenceBundle>, SweepError> {
    gather_all(gateway, templates, docs, jobs, config, true).map_err(|f| {
        if f.failures.iter().all(|(_, e)| matches!(e, GatewayError::CacheMiss { .. } | GatewayError::ScriptMiss { .. })) {
            SweepError::Missing(f.failures.iter().map(|(i, _)| jobs[*i].label(docs)).collect())
        } else {
            let (_, e) = f
                .failures
                .into_iter()
                .find(|(_, e)| !matches!(e, GatewayError::CacheMiss { .. } | GatewayError::ScriptMiss { .. }))
                .expect("some other failure");
            SweepError::Gateway(e)
        }
    })
}

/// Re-decides every pair at each grid point and evaluates in both modes.
pub fn sweep(
    docs: &[Document],
    jobs: &[PairJob],
    bundles: &[EvidenceBundle],
    base: &MefaConfig,
    grid: &SweepGrid,
    aggregator: Aggregator,
    selection: ScopeSelection,
) -> Result<Vec<SweepRow>, SweepError> {
    let mut rows = Vec::with_capacity(grid.len());
    for [delta, theta, a, b] in grid.points() {
        let config = MefaConfig {
            delta,
            theta,
            a,
            b,
            ..base.clone()
        };
        config.validate()?;
        let decisions = decide_all(docs, jobs, bundles, &config, aggregator)?;
        let preds: Vec<PredictionRecord> = jobs
            .iter()
            .zip(&decisions)
            .map(|(j, d)| PredictionRecord::new(&docs[j.doc].id, d))
            .collect();
        rows.push(SweepRow {
            delta,
            theta,
            a,
            b,
            ei: evaluate_corpus(docs, &preds, selection, EvalMode::EI),
            di: evaluate_corpus(docs, &preds, selection, EvalMode::DI),
        });
    }
    Ok(rows)
}

pub const SWEEP_HEADER: &str = "delta\ttheta\ta\tb\tei_precision\tei_recall\tei_f1\tdi_precision\tdi_recall\tdi_f1";

pub fn rows_to_tsv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
            r.delta, r.theta, r.a, r.b, r.ei.precision, r.ei.recall, r.ei.f1, r.di.precision, r.di.recall, r.di.f1
        ));
    }
    out
}

/// First row with the highest direction-aware F1.
pub fn best_row(rows: &[SweepRow]) -> Option<&SweepRow> {
    rows.iter().fold(None, |best: Option<&SweepRow>, r| match best {
        Some(b) if b.di.f1 >= r.di.f1 => Some(b),
        _ => Some(r),
    })
}

/// Parses a comma-separated list of reals.
pub fn parse_axis(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}
