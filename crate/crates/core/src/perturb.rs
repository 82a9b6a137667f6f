//! Turns coalition masks into perturbed graphs and scores them with the
//! model.
//!
//! Excluded feature players of the explained node take a baseline value;
//! excluded node players lose every incident edge. Nodes that are not
//! players keep their edges.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::GnnModel;
use crate::graph::{Graph, NodeSet, PathChoice};
use crate::masks::{feature_stats, CoalitionMask, MaskBatch, PlayerIndex};

/// Rows drawn for Monte-Carlo feature means.
pub const MONTE_CARLO_ROWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PerturbMode {
    /// Excluded features of the target take the dataset mean.
    NodeLocal,
    /// Excluded features of the target take the values of a reference node.
    Contrastive { xi: Vec<f64> },
    /// Excluded features take a Monte-Carlo mean on the target and on every
    /// node player.
    GlobalSubgraphFeatures,
    /// Graph-level prediction; excluded features take the mean on all nodes.
    GraphTask,
    /// Mean prediction over a node set; excluded features take the mean on
    /// the members of the set.
    GlobalNodeSet { nodes: Vec<usize> },
}

/// Features given to intermediate nodes of a restored path that are not in
/// the coalition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathFill {
    #[default]
    MonteCarloMean,
    CopyTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub mode: PerturbMode,
    /// Per-feature dataset mean.
    pub feature_baseline: Vec<f64>,
    /// Per-feature mean of rows sampled uniformly from the dataset.
    pub monte_carlo_mean: Vec<f64>,
    pub indirect_effect: bool,
    pub path_fill: PathFill,
    pub path_choice: PathChoice,
    pub seed: u64,
}

impl PerturbConfig {
    /// Baselines computed from the full dataset graph `g`.
    pub fn new(g: &Graph, mode: PerturbMode, seed: u64) -> Result<Self> {
        let f = g.num_features();
        if let PerturbMode::Contrastive { xi } = &mode {
            if xi.len() != f {
                return Err(Error::DimensionMismatch(format!(
                    "contrast vector has {} entries for {f} features",
                    xi.len()
                )));
            }
        }
        Ok(Self {
            mode,
            feature_baseline: feature_stats(g).0,
            monte_carlo_mean: monte_carlo_mean(g, seed),
            indirect_effect: false,
            path_fill: PathFill::default(),
            path_choice: PathChoice::default(),
            seed,
        })
    }
}

/// Mean of [`MONTE_CARLO_ROWS`] feature rows drawn with replacement.
pub fn monte_carlo_mean(g: &Graph, seed: u64) -> Vec<f64> {
    let f = g.num_features();
    let n = g.num_nodes();
    let mut mean = vec![0.0; f];
    if n == 0 {
        return mean;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d63_6d65_616e);
    let rows: Vec<usize> = (0..n).collect();
    for _ in 0..MONTE_CARLO_ROWS {
        let r = *rows.choose(&mut rng).unwrap();
        for (m, x) in mean.iter_mut().zip(g.features().row(r)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= MONTE_CARLO_ROWS as f64);
    mean
}

/// What the model output is read from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Node(usize),
    Graph,
    NodeSet(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSample {
    pub mask: CoalitionMask,
    /// Class probabilities (averaged over the node set for set targets).
    pub output: Vec<f64>,
    pub target_score: f64,
}

fn check_mask(players: &PlayerIndex, mask: &CoalitionMask) -> Result<()> {
    if mask.len() != players.len() {
        return Err(Error::DimensionMismatch(format!(
            "mask of length {} for {} players",
            mask.len(),
            players.len()
        )));
    }
    Ok(())
}

/// Applies `mask` to `g`: excluded features are replaced according to the
/// mode, excluded player nodes are isolated. `g` is left untouched.
pub fn gen_perturbed(g: &Graph, players: &PlayerIndex, mask: &CoalitionMask, cfg: &PerturbConfig) -> Result<Graph> {
    check_mask(players, mask)?;
    let b = players.num_features();
    let excluded_features: Vec<usize> = (0..b)
        .filter(|&i| !mask.get(i))
        .map(|i| players.feature_ids[i])
        .collect();
    let excluded_nodes: NodeSet = (0..players.num_nodes())
        .filter(|&i| !mask.get(b + i))
        .map(|i| players.node_ids[i])
        .collect();

    let mut out = g.isolate_nodes(&excluded_nodes);
    if excluded_features.is_empty() {
        return Ok(out);
    }
    let target_rows = || -> Result<Vec<usize>> {
        players
            .target
            .map(|v| vec![v])
            .ok_or_else(|| Error::InvalidArgument("this mode needs a target node".into()))
    };
    let (rows, values): (Vec<usize>, &[f64]) = match &cfg.mode {
        PerturbMode::NodeLocal => (target_rows()?, &cfg.feature_baseline),
        PerturbMode::Contrastive { xi } => (target_rows()?, xi),
        PerturbMode::GlobalSubgraphFeatures => {
            let mut rows = target_rows()?;
            rows.extend_from_slice(&players.node_ids);
            (rows, &cfg.monte_carlo_mean)
        }
        PerturbMode::GraphTask => ((0..g.num_nodes()).collect(), &cfg.feature_baseline),
        PerturbMode::GlobalNodeSet { nodes } => (nodes.clone(), &cfg.feature_baseline),
    };
    let feats = out.features_mut();
    for &r in &rows {
        for &j in &excluded_features {
            feats[(r, j)] = values[j];
        }
    }
    Ok(out)
}

fn mask_seed(seed: u64, mask: &CoalitionMask) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for &bit in mask.as_slice() {
        h = (h ^ u64::from(bit)).wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Reconnects every included player node that `g_pert` leaves more than
/// `k` hops from the target by re-inserting one shortest path of `g_orig`.
/// Intermediate path nodes outside the coalition get neutral features.
pub fn apply_indirect_effect(
    g_orig: &Graph,
    g_pert: &Graph,
    players: &PlayerIndex,
    mask: &CoalitionMask,
    k: usize,
    cfg: &PerturbConfig,
) -> Result<Graph> {
    check_mask(players, mask)?;
    let Some(v) = players.target else {
        return Ok(g_pert.clone());
    };
    let b = players.num_features();
    let included: Vec<usize> = (0..players.num_nodes())
        .filter(|&i| mask.get(b + i))
        .map(|i| players.node_ids[i])
        .collect();
    let in_coalition = |u: usize| included.binary_search(&u).is_ok() || u == v;
    let mut rng = ChaCha8Rng::seed_from_u64(mask_seed(cfg.seed, mask));
    let mut out = g_pert.clone();
    let mut restored: Vec<usize> = Vec::new();
    for &w in &included {
        if out.bfs_distances(v, Some(k))[w].is_some() {
            continue;
        }
        let path = g_orig.shortest_path_with(v, w, cfg.path_choice, &mut rng)?;
        out = out.with_added_edges(path.windows(2).map(|p| (p[0], p[1])))?;
        restored.extend(path[1..path.len() - 1].iter().copied().filter(|&u| !in_coalition(u)));
    }
    if restored.is_empty() {
        return Ok(out);
    }
    let fill: Vec<f64> = match cfg.path_fill {
        PathFill::MonteCarloMean => cfg.monte_carlo_mean.clone(),
        PathFill::CopyTarget => g_orig.features().row(v).to_vec(),
    };
    let feats = out.features_mut();
    for u in restored {
        feats.row_mut(u).copy_from_slice(&fill);
    }
    Ok(out)
}

fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

/// Probability vectors read from the model for `target`: one per node of a
/// set target, otherwise a single vector.
fn target_outputs(model: &GnnModel, g: &Graph, target: &Target) -> Result<Vec<Vec<f64>>> {
    let probs = model.gcn_forward(g)?;
    let row = |u: usize| -> Result<Vec<f64>> {
        if u >= probs.rows() {
            return Err(Error::InvalidArgument(format!("target node {u} out of range")));
        }
        Ok(probs.row(u).to_vec())
    };
    match target {
        Target::Node(v) => Ok(vec![row(*v)?]),
        Target::Graph => Ok(vec![probs.row(0).to_vec()]),
        Target::NodeSet(nodes) => nodes.iter().map(|&u| row(u)).collect(),
    }
}

/// Classes predicted on the unperturbed graph, one per output vector.
pub fn predicted_classes(model: &GnnModel, g: &Graph, target: &Target) -> Result<Vec<usize>> {
    Ok(target_outputs(model, g, target)?.iter().map(|p| argmax(p)).collect())
}

/// Scores every mask of `batch`, in batch order. Masks are evaluated in
/// parallel; the result does not depend on the thread count.
pub fn eval_samples(
    g: &Graph,
    players: &PlayerIndex,
    batch: &MaskBatch,
    model: &GnnModel,
    target: &Target,
    cfg: &PerturbConfig,
) -> Result<Vec<PerturbSample>> {
    let classes = predicted_classes(model, g, target)?;
    batch
        .masks
        .par_iter()
        .map(|mask| {
            let mut pert = gen_perturbed(g, players, mask, cfg)?;
            if cfg.indirect_effect {
                pert = apply_indirect_effect(g, &pert, players, mask, model.num_layers(), cfg)?;
            }
            let outs = target_outputs(model, &pert, target)?;
            let n = outs.len() as f64;
            let mut output = vec![0.0; model.num_classes()];
            let mut score = 0.0;
            for (p, &c) in outs.iter().zip(&classes) {
                for (o, x) in output.iter_mut().zip(p) {
                    *o += x / n;
                }
                score += p[c] / n;
            }
            Ok(PerturbSample {
                mask: mask.clone(),
                output,
                target_score: score,
            })
        })
        .collect()
}
