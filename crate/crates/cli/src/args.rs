//! Flag sets of each subcommand. Every field is optional so that a value
//! given on the command line can be layered over one from `--config`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(name = "graphsvx", version, about = "Shapley value explanations for graph neural networks")]
pub struct Cli {
    /// TOML file with `[dataset]`, `[train]`, `[explain]` or `[eval]` tables;
    /// flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel explanations.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a synthetic dataset and write it to a directory.
    Dataset(DatasetArgs),
    /// Train a GCN on a dataset directory.
    Train(TrainArgs),
    /// Explain a node, a graph or a set of nodes.
    Explain(ExplainArgs),
    /// Score explanations against ground truth, noise, strategies or budgets.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseDist {
    Bernoulli,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    Accuracy,
    Noise,
    Ablation,
    Timing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Features,
    Nodes,
}

/// Features of intermediate nodes on restored paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathFillArg {
    /// Monte Carlo mean of sampled feature rows.
    Mean,
    /// The explained node's own features.
    Target,
}

/// Player count used by the kernel of separated strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelScopeArg {
    Block,
    Full,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetArgs {
    /// ba-shapes, ba-community, tree-cycles, tree-grid or ba-2motifs.
    pub kind: Option<String>,
    /// Base graph nodes (per community for ba-community, per graph for ba-2motifs).
    #[arg(long)]
    pub base: Option<usize>,
    /// Number of motifs (graphs for ba-2motifs).
    #[arg(long)]
    pub motifs: Option<usize>,
    /// Random edges added, as a fraction of the edge count.
    #[arg(long)]
    pub perturb: Option<f64>,
    /// Edges attached by each new BA node.
    #[arg(long)]
    pub ba_attach: Option<usize>,
    /// Append this fraction of noise feature columns.
    #[arg(long)]
    pub noisy_features: Option<f64>,
    /// Append this fraction of noise nodes.
    #[arg(long)]
    pub noisy_nodes: Option<f64>,
    #[arg(long, value_enum)]
    pub noise_dist: Option<NoiseDist>,
    /// Probability of a nonzero noise entry.
    #[arg(long)]
    pub noise_prob: Option<f64>,
    /// Link probability between a noise node and each existing node.
    #[arg(long)]
    pub connect_prob: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainArgs {
    /// Dataset directory holding manifest.json.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Explanation settings shared by `explain` and `eval`.
#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct ExplainFlags {
    /// Mask strategy: all, random, smart, smart-separate or smarter-separate.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Sample budget; defaults to the dataset's usual budget.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Feature band width in standard deviations.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Share of the explained gap given to node players.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Surrogate: wlr or weighted-lasso.
    #[arg(long)]
    pub fit: Option<String>,
    /// Penalty of the weighted lasso.
    #[arg(long)]
    pub lasso_alpha: Option<f64>,
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub indirect_effect: Option<bool>,
    #[arg(long, value_enum)]
    pub path_fill: Option<PathFillArg>,
    #[arg(long, value_enum)]
    pub kernel_scope: Option<KernelScopeArg>,
    /// Take excluded features from this node instead of the dataset mean.
    #[arg(long)]
    pub contrast_node: Option<usize>,
    /// Keep at most this many players, dropping the farthest nodes first.
    #[arg(long)]
    pub max_players: Option<usize>,
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub all_classes: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default)]
pub struct ExplainArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset directory holding manifest.json.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, group = "target")]
    pub node: Option<usize>,
    /// Index of the graph to explain.
    #[arg(long, group = "target")]
    pub graph: Option<usize>,
    /// Comma-separated node ids explained jointly.
    #[arg(long, group = "target", value_delimiter = ',')]
    pub global_nodes: Option<Vec<usize>>,
    /// File of node ids, one explanation per id.
    #[arg(long, group = "target")]
    pub nodes_file: Option<PathBuf>,
    /// Also compute exact Shapley values and their largest deviation.
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub oracle: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    pub flags: ExplainFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub mode: Option<EvalMode>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated strategies compared by ablation.
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<String>>,
    /// Comma-separated budgets measured by timing.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,
    /// Explain at most this many targets.
    #[arg(long)]
    pub targets: Option<usize>,
    /// Top-k cut for noise counting.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, value_enum)]
    pub noise_kind: Option<NoiseKind>,
    #[command(flatten)]
    #[serde(flatten)]
    pub flags: ExplainFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Sections of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset: DatasetArgs,
    pub train: TrainArgs,
    pub explain: ExplainArgs,
    pub eval: EvalArgs,
}

/// `self` wins wherever it has a value.
pub trait Layer {
    fn or(self, lower: Self) -> Self;
}

macro_rules! layer {
    ($ty:ident { $($field:ident),* } $(nested { $($sub:ident),* })?) => {
        impl Layer for $ty {
            fn or(self, lower: Self) -> Self {
                Self {
                    $($field: self.$field.or(lower.$field),)*
                    $($($sub: self.$sub.or(lower.$sub),)*)?
                }
            }
        }
    };
}

layer!(DatasetArgs { kind, base, motifs, perturb, ba_attach, noisy_features, noisy_nodes, noise_dist, noise_prob, connect_prob, seed, out });
layer!(TrainArgs { data, layers, hidden, epochs, lr, weight_decay, seed, out });
layer!(ExplainFlags { strategy, samples, lambda, alpha, fit, lasso_alpha, indirect_effect, path_fill, kernel_scope, contrast_node, max_players, all_classes, seed });
layer!(ExplainArgs { model, data, node, graph, global_nodes, nodes_file, oracle, out } nested { flags });
layer!(EvalArgs { mode, model, data, strategies, budgets, targets, top_k, noise_kind, out } nested { flags });
