//! End-to-end explanations: player reduction, mask sampling, perturbation,
//! scoring and surrogate fitting.

mod fit;
mod shapley;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fit::{surrogates, FitParams, FitProblem, Surrogate, WeightedLasso, WeightedLinear, R_SQUARED_WARNING};
pub use shapley::{
    all_coalitions, exact_shapley, normal_matrix, normal_matrix_check, shapley_from_table, ShapleyValues,
    MAX_NORMAL_MATRIX_PLAYERS,
};

use crate::error::{Error, Result};
use crate::gnn::{GnnModel, Task};
use crate::graph::{Graph, NodeSet, PathChoice};
use crate::masks::{
    gen_masks_with, mask_strategies, reduce_players, CoalitionMask, MaskBatch, MaskParams, MaskStrategy,
    PlayerIndex, MAX_ENUMERATED_PLAYERS,
};
use crate::perturb::{eval_samples, predicted_classes, PathFill, PerturbConfig, PerturbMode, PerturbSample, Target};
use crate::registry::Registry;

pub const EXPLANATION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExplainTarget {
    Node { node: usize },
    Graph,
    /// Mean prediction over a set of nodes.
    NodeSet { nodes: Vec<usize> },
}

/// How excluded features of a node target are replaced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeatureBaseline {
    #[default]
    DatasetMean,
    /// Values of another node.
    Contrast { node: usize },
    /// Monte-Carlo mean, also applied to the node players.
    Subgraph,
}

/// Player type of graph-level explanations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphPlayers {
    #[default]
    Nodes,
    Features,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainOptions {
    pub strategy: String,
    pub num_samples: usize,
    /// Width of the band, in standard deviations, inside which a feature of
    /// the target is considered uninformative.
    pub lambda: f64,
    pub masks: MaskParams,
    pub baseline: FeatureBaseline,
    pub graph_players: GraphPlayers,
    pub indirect_effect: bool,
    pub path_fill: PathFill,
    pub path_choice: PathChoice,
    pub fit: String,
    pub fit_params: FitParams,
    /// Share of the explained gap given to node players.
    pub alpha: Option<f64>,
    /// Also fit one surrogate per class.
    pub all_classes: bool,
    /// Caps the player count of node targets by dropping the farthest node
    /// players (ties broken by id), then the highest feature ids.
    pub max_players: Option<usize>,
    pub seed: u64,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        Self {
            strategy: "smarter-separate".into(),
            num_samples: 400,
            lambda: 1.0,
            masks: MaskParams::default(),
            baseline: FeatureBaseline::default(),
            graph_players: GraphPlayers::default(),
            indirect_effect: false,
            path_fill: PathFill::default(),
            path_choice: PathChoice::default(),
            fit: "wlr".into(),
            fit_params: FitParams::default(),
            alpha: None,
            all_classes: false,
            max_players: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub id: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassFit {
    pub class: usize,
    pub base_value: f64,
    pub phi_features: Vec<Attribution>,
    pub phi_nodes: Vec<Attribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub schema_version: u32,
    pub target: ExplainTarget,
    pub predicted_class: usize,
    pub base_value: f64,
    /// Predicted-class score on the unperturbed graph.
    pub full_prediction: f64,
    /// Score with every feature player kept and every node player excluded.
    pub isolated_prediction: f64,
    pub phi_features: Vec<Attribution>,
    pub phi_nodes: Vec<Attribution>,
    pub r_squared: f64,
    pub num_samples: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub class_fits: Vec<ClassFit>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub options: Option<ExplainOptions>,
}

impl Explanation {
    /// Feature attributions followed by node attributions, in player order.
    pub fn phi(&self) -> Vec<f64> {
        self.phi_features
            .iter()
            .chain(&self.phi_nodes)
            .map(|a| a.value)
            .collect()
    }

    pub fn feature_sum(&self) -> f64 {
        self.phi_features.iter().map(|a| a.value).sum()
    }

    pub fn node_sum(&self) -> f64 {
        self.phi_nodes.iter().map(|a| a.value).sum()
    }

    /// `max |φ − φ*|` over the base value and every player.
    pub fn max_deviation(&self, exact: &ShapleyValues) -> Result<f64> {
        let phi = self.phi();
        if phi.len() != exact.phi.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} attributions against {} exact values",
                phi.len(),
                exact.phi.len()
            )));
        }
        Ok(phi
            .iter()
            .zip(&exact.phi)
            .map(|(a, b)| (a - b).abs())
            .fold((self.base_value - exact.base_value).abs(), f64::max))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let e: Explanation = serde_json::from_str(text)?;
        if e.schema_version != EXPLANATION_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported explanation schema version {}",
                e.schema_version
            )));
        }
        Ok(e)
    }
}

/// Redistributes the explained gap `full_prediction − base_value`: node
/// attributions are scaled to sum to `alpha` of it and feature attributions
/// to the rest. A block summing to zero is left as is.
pub fn rescale(e: &Explanation, alpha: f64) -> Result<Explanation> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let gap = e.full_prediction - e.base_value;
    let scale = |block: &[Attribution], target: f64| -> Vec<Attribution> {
        let sum: f64 = block.iter().map(|a| a.value).sum();
        if sum == 0.0 {
            return block.to_vec();
        }
        block
            .iter()
            .map(|a| Attribution {
                id: a.id,
                value: a.value * target / sum,
            })
            .collect()
    };
    let mut out = e.clone();
    out.phi_nodes = scale(&e.phi_nodes, alpha * gap);
    out.phi_features = scale(&e.phi_features, (1.0 - alpha) * gap);
    Ok(out)
}

/// Mask strategies and surrogates the pipeline draws from.
#[derive(Clone, Copy)]
pub struct Strategies<'a> {
    pub masks: &'a Registry<dyn MaskStrategy>,
    pub surrogates: &'a Registry<dyn Surrogate>,
}

impl Default for Strategies<'static> {
    fn default() -> Self {
        Self {
            masks: mask_strategies(),
            surrogates: surrogates(),
        }
    }
}

/// Everything the pipeline needs after player reduction, expressed on the
/// smallest subgraph that determines the prediction.
struct Prepared {
    graph: Graph,
    /// Players with local node ids.
    players: PlayerIndex,
    /// Global id of each local node.
    global: Vec<usize>,
    target: Target,
    cfg: PerturbConfig,
}

fn check_node(g: &Graph, u: usize) -> Result<()> {
    if u >= g.num_nodes() {
        return Err(Error::InvalidArgument(format!(
            "node {u} is outside the graph of {} nodes",
            g.num_nodes()
        )));
    }
    Ok(())
}

fn local_ids(global: &[usize], ids: &[usize]) -> Vec<usize> {
    ids.iter()
        .map(|u| global.binary_search(u).expect("id inside the region"))
        .collect()
}

fn truncate_players(g: &Graph, v: usize, players: &mut PlayerIndex, cap: usize) {
    players.feature_ids.truncate(cap);
    let keep = cap - players.feature_ids.len();
    if players.node_ids.len() > keep {
        let dist = g.bfs_distances(v, None);
        players.node_ids.sort_by_key(|&u| (dist[u], u));
        players.node_ids.truncate(keep);
        players.node_ids.sort_unstable();
    }
}

fn prepare(g: &Graph, model: &GnnModel, target: &ExplainTarget, opts: &ExplainOptions) -> Result<Prepared> {
    let layers = model.num_layers();
    let apply = |mut cfg: PerturbConfig| {
        cfg.indirect_effect = opts.indirect_effect;
        cfg.path_fill = opts.path_fill;
        cfg.path_choice = opts.path_choice;
        cfg
    };
    match target {
        ExplainTarget::Node { node: v } => {
            let v = *v;
            check_node(g, v)?;
            if model.task() != Task::NodeClassification {
                return Err(Error::InvalidArgument("node targets need a node classification model".into()));
            }
            let mut reduced = reduce_players(g, model, v, opts.lambda)?;
            if let Some(cap) = opts.max_players {
                truncate_players(g, v, &mut reduced, cap);
            }
            let mode = match opts.baseline {
                FeatureBaseline::DatasetMean => PerturbMode::NodeLocal,
                FeatureBaseline::Contrast { node } => {
                    check_node(g, node)?;
                    PerturbMode::Contrastive {
                        xi: g.features().row(node).to_vec(),
                    }
                }
                FeatureBaseline::Subgraph => PerturbMode::GlobalSubgraphFeatures,
            };
            let cfg = apply(PerturbConfig::new(g, mode, opts.seed)?);
            // Degree normalization makes the output depend on one hop more
            // than the receptive field.
            let mut region = g.k_hop_neighbors(v, layers + 1).into_vec();
            region.push(v);
            let global = NodeSet::new(region).into_vec();
            let graph = g.induced_subgraph(&global)?;
            let lv = local_ids(&global, &[v])[0];
            let players = PlayerIndex::new(reduced.feature_ids, local_ids(&global, &reduced.node_ids), Some(lv))?;
            Ok(Prepared {
                graph,
                players,
                global,
                target: Target::Node(lv),
                cfg,
            })
        }
        ExplainTarget::Graph => {
            if model.task() != Task::GraphClassification {
                return Err(Error::InvalidArgument("graph targets need a graph classification model".into()));
            }
            let players = match opts.graph_players {
                GraphPlayers::Nodes => PlayerIndex::new(Vec::new(), (0..g.num_nodes()).collect(), None)?,
                GraphPlayers::Features => PlayerIndex::new((0..g.num_features()).collect(), Vec::new(), None)?,
            };
            Ok(Prepared {
                graph: g.clone(),
                players,
                global: (0..g.num_nodes()).collect(),
                target: Target::Graph,
                cfg: apply(PerturbConfig::new(g, PerturbMode::GraphTask, opts.seed)?),
            })
        }
        ExplainTarget::NodeSet { nodes } => {
            if model.task() != Task::NodeClassification {
                return Err(Error::InvalidArgument("node targets need a node classification model".into()));
            }
            let set = NodeSet::new(nodes.clone());
            if set.is_empty() {
                return Err(Error::InvalidArgument("node set target is empty".into()));
            }
            let mut region = Vec::new();
            let mut players = Vec::new();
            for u in set.iter() {
                check_node(g, u)?;
                region.extend(g.k_hop_neighbors(u, layers + 1).iter());
                if layers > 0 {
                    players.extend(g.k_hop_neighbors(u, layers).iter().filter(|w| !set.contains(*w)));
                }
            }
            region.extend(set.iter());
            let global = NodeSet::new(region).into_vec();
            let local_set = local_ids(&global, set.as_slice());
            let players = PlayerIndex::new(
                (0..g.num_features()).collect(),
                local_ids(&global, NodeSet::new(players).as_slice()),
                None,
            )?;
            Ok(Prepared {
                graph: g.induced_subgraph(&global)?,
                players,
                global,
                target: Target::NodeSet(local_set.clone()),
                cfg: apply(PerturbConfig::new(g, PerturbMode::GlobalNodeSet { nodes: local_set }, opts.seed)?),
            })
        }
    }
}

impl Prepared {
    fn score(&self, model: &GnnModel, masks: Vec<CoalitionMask>) -> Result<Vec<PerturbSample>> {
        let n = masks.len();
        let batch = MaskBatch {
            masks,
            weights: vec![1.0; n],
            pinned: vec![false; n],
        };
        eval_samples(&self.graph, &self.players, &batch, model, &self.target, &self.cfg)
    }

    /// Mask with every feature player on and every node player off.
    fn isolated_mask(&self) -> CoalitionMask {
        let b = self.players.num_features();
        CoalitionMask::new((0..self.players.len()).map(|i| i < b).collect())
    }

    fn attributions(&self, coef: &[f64]) -> (Vec<Attribution>, Vec<Attribution>) {
        let b = self.players.num_features();
        let features = self
            .players
            .feature_ids
            .iter()
            .zip(coef)
            .map(|(&id, &value)| Attribution { id, value })
            .collect();
        let nodes = self
            .players
            .node_ids
            .iter()
            .zip(&coef[b..])
            .map(|(&u, &value)| Attribution {
                id: self.global[u],
                value,
            })
            .collect();
        (features, nodes)
    }
}

/// Explains `target` with the built-in strategies and surrogates.
pub fn explain(g: &Graph, model: &GnnModel, target: &ExplainTarget, opts: &ExplainOptions) -> Result<Explanation> {
    explain_with(Strategies::default(), g, model, target, opts)
}

pub fn explain_with(
    strategies: Strategies<'_>,
    g: &Graph,
    model: &GnnModel,
    target: &ExplainTarget,
    opts: &ExplainOptions,
) -> Result<Explanation> {
    let surrogate = strategies.surrogates.get(&opts.fit)?;
    let prep = prepare(g, model, target, opts)?;
    let batch = gen_masks_with(
        strategies.masks,
        &prep.players,
        opts.num_samples,
        &opts.strategy,
        &opts.masks,
        opts.seed,
    )?;
    let samples = eval_samples(&prep.graph, &prep.players, &batch, model, &prep.target, &prep.cfg)?;
    let predicted_class = predicted_classes(model, &prep.graph, &prep.target)?
        .first()
        .copied()
        .unwrap_or(0);

    let m = prep.players.len();
    let ones = CoalitionMask::ones(m);
    let isolated = prep.isolated_mask();
    let lookup = |z: &CoalitionMask| samples.iter().position(|s| &s.mask == z);
    let missing: Vec<CoalitionMask> = [&ones, &isolated]
        .into_iter()
        .filter(|z| lookup(z).is_none())
        .cloned()
        .collect();
    let extra = prep.score(model, missing)?;
    let score_of = |z: &CoalitionMask| -> f64 {
        lookup(z)
            .map(|i| samples[i].target_score)
            .or_else(|| extra.iter().find(|s| &s.mask == z).map(|s| s.target_score))
            .expect("anchor scored above")
    };
    let full_prediction = score_of(&ones);
    let isolated_prediction = score_of(&isolated);

    let targets: Vec<f64> = samples.iter().map(|s| s.target_score).collect();
    let problem = FitProblem::new(&batch.masks, targets, &batch)?;
    let coef = surrogate.fit(&problem, &opts.fit_params)?;
    let r_squared = problem.r_squared(&coef);
    let mut warnings = Vec::new();
    if r_squared < R_SQUARED_WARNING {
        warnings.push(format!(
            "surrogate R² {r_squared:.3} is below {R_SQUARED_WARNING:.2}"
        ));
    }

    let mut class_fits = Vec::new();
    if opts.all_classes {
        for class in 0..model.num_classes() {
            let mut p = problem.clone();
            p.targets = samples.iter().map(|s| s.output[class]).collect();
            let c = surrogate.fit(&p, &opts.fit_params)?;
            let (phi_features, phi_nodes) = prep.attributions(&c[1..]);
            class_fits.push(ClassFit {
                class,
                base_value: c[0],
                phi_features,
                phi_nodes,
            });
        }
    }

    let (phi_features, phi_nodes) = prep.attributions(&coef[1..]);
    let e = Explanation {
        schema_version: EXPLANATION_SCHEMA_VERSION,
        target: target.clone(),
        predicted_class,
        base_value: coef[0],
        full_prediction,
        isolated_prediction,
        phi_features,
        phi_nodes,
        r_squared,
        num_samples: samples.len(),
        class_fits,
        warnings,
        options: Some(opts.clone()),
    };
    match opts.alpha {
        Some(alpha) => rescale(&e, alpha),
        None => Ok(e),
    }
}

/// Explains every target in parallel; results keep the order of `targets`.
pub fn explain_many(
    g: &Graph,
    model: &GnnModel,
    targets: &[ExplainTarget],
    opts: &ExplainOptions,
) -> Vec<Result<Explanation>> {
    targets.par_iter().map(|t| explain(g, model, t, opts)).collect()
}

/// Exact Shapley values of the game the pipeline would fit for `target`,
/// from all `2^(B+D)` perturbed graphs.
pub fn shapley_oracle(g: &Graph, model: &GnnModel, target: &ExplainTarget, opts: &ExplainOptions) -> Result<ShapleyValues> {
    let prep = prepare(g, model, target, opts)?;
    let m = prep.players.len();
    if m > MAX_ENUMERATED_PLAYERS {
        return Err(Error::TooManyPlayers {
            players: m,
            limit: MAX_ENUMERATED_PLAYERS,
        });
    }
    let samples = prep.score(model, all_coalitions(m).map(CoalitionMask::new).collect())?;
    let table: Vec<f64> = samples.iter().map(|s| s.target_score).collect();
    shapley_from_table(&table)
}

/// Player sets of the pipeline for `target`, with global node ids.
pub fn players_for(g: &Graph, model: &GnnModel, target: &ExplainTarget, opts: &ExplainOptions) -> Result<PlayerIndex> {
    let prep = prepare(g, model, target, opts)?;
    PlayerIndex::new(
        prep.players.feature_ids.clone(),
        prep.players.node_ids.iter().map(|&u| prep.global[u]).collect(),
        None,
    )
}
