//! Scoring explanations against planted motifs and injected noise, plus
//! strategy ablations and timing.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::GroundTruth;
use crate::error::{Error, Result};
use crate::explain::{explain_many, Attribution, ExplainOptions, ExplainTarget, Explanation};
use crate::gnn::GnnModel;
use crate::graph::Graph;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetHits {
    pub node: usize,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub schema_version: u32,
    pub per_target: Vec<TargetHits>,
    pub accuracy: f64,
    pub k: usize,
    pub num_targets: usize,
}

/// Highest-first by value, ties broken by id.
fn ranked(block: &[Attribution], key: impl Fn(f64) -> f64) -> Vec<usize> {
    let mut order: Vec<&Attribution> = block.iter().collect();
    order.sort_by(|a, b| key(b.value).total_cmp(&key(a.value)).then(a.id.cmp(&b.id)));
    order.into_iter().map(|a| a.id).collect()
}

/// Share of the top `motif_size − 1` node attributions that fall in the
/// explained node's own motif.
pub fn motif_accuracy(explanations: &[Explanation], truth: &GroundTruth) -> Result<AccuracyReport> {
    let k = truth.motif_size.saturating_sub(1).max(1);
    let mut per_target = Vec::with_capacity(explanations.len());
    for e in explanations {
        let ExplainTarget::Node { node: v } = e.target else {
            return Err(Error::InvalidArgument("motif accuracy needs node explanations".into()));
        };
        let motif = truth.motif_of(v).ok_or(Error::TargetNotInMotif(v))?;
        let hits = ranked(&e.phi_nodes, |x| x)
            .into_iter()
            .take(k)
            .filter(|u| *u != v && motif.contains(u))
            .count();
        per_target.push(TargetHits { node: v, hits });
    }
    let total: usize = per_target.iter().map(|t| t.hits).sum();
    let n = per_target.len();
    Ok(AccuracyReport {
        schema_version: REPORT_SCHEMA_VERSION,
        accuracy: if n == 0 { 0.0 } else { total as f64 / (k * n) as f64 },
        per_target,
        k,
        num_targets: n,
    })
}

/// Which attributions noise counting looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlayerKind {
    Features,
    Nodes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub schema_version: u32,
    pub k: usize,
    /// Noisy players among the top `k` of each explanation.
    pub counts: Vec<usize>,
    /// `histogram[i]`: explanations with exactly `i` noisy players in the top `k`.
    pub histogram: Vec<usize>,
    pub mean: f64,
}

/// Counts noisy ids among the `k` players of largest `|φ|`.
pub fn noise_inclusion(explanations: &[Explanation], noisy_ids: &[usize], k: usize, kind: PlayerKind) -> Result<NoiseReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let counts: Vec<usize> = explanations
        .iter()
        .map(|e| {
            let block = match kind {
                PlayerKind::Features => &e.phi_features,
                PlayerKind::Nodes => &e.phi_nodes,
            };
            ranked(block, f64::abs)
                .into_iter()
                .take(k)
                .filter(|id| noisy_ids.contains(id))
                .count()
        })
        .collect();
    let mut histogram = vec![0; k + 1];
    for &c in &counts {
        histogram[c] += 1;
    }
    let mean = if counts.is_empty() {
        0.0
    } else {
        counts.iter().sum::<usize>() as f64 / counts.len() as f64
    };
    Ok(NoiseReport {
        schema_version: REPORT_SCHEMA_VERSION,
        k,
        counts,
        histogram,
        mean,
    })
}

/// Same players as `e` with attributions replaced by a random ranking.
pub fn random_control(e: &Explanation, seed: u64) -> Explanation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = e.clone();
    for block in [&mut out.phi_features, &mut out.phi_nodes] {
        let mut values: Vec<f64> = (0..block.len()).map(|_| rng.random::<f64>()).collect();
        values.shuffle(&mut rng);
        for (a, v) in block.iter_mut().zip(values) {
            a.value = v;
        }
    }
    out
}

fn collect(results: Vec<Result<Explanation>>) -> Result<Vec<Explanation>> {
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub strategy: String,
    pub samples: usize,
    pub accuracy: f64,
}

/// Motif accuracy of each strategy on the same model, targets and budget.
pub fn ablation_run(
    g: &Graph,
    model: &GnnModel,
    truth: &GroundTruth,
    targets: &[usize],
    strategies: &[&str],
    opts: &ExplainOptions,
) -> Result<Vec<AblationRow>> {
    let targets: Vec<ExplainTarget> = targets.iter().map(|&node| ExplainTarget::Node { node }).collect();
    strategies
        .iter()
        .map(|s| {
            let o = ExplainOptions {
                strategy: s.to_string(),
                ..opts.clone()
            };
            let explanations = collect(explain_many(g, model, &targets, &o))?;
            Ok(AblationRow {
                strategy: s.to_string(),
                samples: o.num_samples,
                accuracy: motif_accuracy(&explanations, truth)?.accuracy,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub samples: usize,
    pub seconds: f64,
}

/// Mean wall-clock seconds per explanation at each budget. Targets are
/// explained one after another so the times are not shared.
pub fn timing_run(
    g: &Graph,
    model: &GnnModel,
    targets: &[usize],
    budgets: &[usize],
    opts: &ExplainOptions,
) -> Result<Vec<TimingRow>> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("timing needs at least one target".into()));
    }
    budgets
        .iter()
        .map(|&p| {
            let o = ExplainOptions {
                num_samples: p,
                ..opts.clone()
            };
            let start = Instant::now();
            for &node in targets {
                crate::explain::explain(g, model, &ExplainTarget::Node { node }, &o)?;
            }
            Ok(TimingRow {
                samples: p,
                seconds: start.elapsed().as_secs_f64() / targets.len() as f64,
            })
        })
        .collect()
}

pub fn accuracy_csv(dataset: &str, rows: &[AblationRow]) -> String {
    let mut out = String::from("schema_version,strategy,dataset,samples,accuracy\n");
    for r in rows {
        writeln!(out, "{REPORT_SCHEMA_VERSION},{},{dataset},{},{}", r.strategy, r.samples, r.accuracy).unwrap();
    }
    out
}

pub fn histogram_csv(report: &NoiseReport) -> String {
    let mut out = String::from("schema_version,bucket,count\n");
    for (bucket, count) in report.histogram.iter().enumerate() {
        writeln!(out, "{REPORT_SCHEMA_VERSION},{bucket},{count}").unwrap();
    }
    out
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from("schema_version,samples,seconds\n");
    for r in rows {
        writeln!(out, "{REPORT_SCHEMA_VERSION},{},{}", r.samples, r.seconds).unwrap();
    }
    out
}
