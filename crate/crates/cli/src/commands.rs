use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use graphsvx::datasets::{
    add_noisy_features, add_noisy_nodes, build_synthetic, save_graph, DatasetKind, GraphData, Manifest, NoiseDistribution, SyntheticSpec,
    MANIFEST_SCHEMA_VERSION,
};
use graphsvx::eval::{
    ablation_run, accuracy_csv, histogram_csv, motif_accuracy, noise_inclusion, random_control, timing_csv, timing_run, AblationRow,
    PlayerKind, REPORT_SCHEMA_VERSION,
};
use graphsvx::explain::{explain as explain_target, explain_many, shapley_oracle, ExplainOptions, ExplainTarget, Explanation, FeatureBaseline};
use graphsvx::gnn::{train as fit_model, Examples, GnnModel, ModelConfig, Task, TrainConfig};
use graphsvx::graph::Graph;
use graphsvx::masks::KernelScope;
use graphsvx::perturb::PathFill;
use graphsvx::Error;

use crate::args::{DatasetArgs, EvalArgs, EvalMode, ExplainArgs, ExplainFlags, KernelScopeArg, NoiseDist, NoiseKind, PathFillArg, TrainArgs};

const OUT_ENV: &str = "GRAPHSVX_OUT";
const DEFAULT_OUT: &str = "graphsvx-out";
const METRICS_SCHEMA_VERSION: u32 = 1;
const DEFAULT_NOISE_PROB: f64 = 0.5;
const DEFAULT_CONNECT_PROB: f64 = 0.003;
const DEFAULT_TOP_K: usize = 10;
const DEFAULT_TIMING_TARGETS: usize = 20;

fn input(msg: String) -> anyhow::Error {
    Error::InvalidArgument(msg).into()
}

fn out_dir(flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, &serde_json::to_string_pretty(value)?)
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| input(format!("--{flag} is required")))
}

pub fn dataset(a: DatasetArgs) -> Result<()> {
    let kind: DatasetKind = required(a.kind, "kind (positional)")?.parse()?;
    let d = SyntheticSpec::defaults(kind);
    let spec = SyntheticSpec {
        kind,
        base_size: a.base.unwrap_or(d.base_size),
        num_motifs: a.motifs.unwrap_or(d.num_motifs),
        perturb_edge_fraction: a.perturb.unwrap_or(d.perturb_edge_fraction),
        ba_attach: a.ba_attach.unwrap_or(d.ba_attach),
        seed: a.seed.unwrap_or(d.seed),
    };
    let ds = build_synthetic(&spec)?;
    let p = a.noise_prob.unwrap_or(DEFAULT_NOISE_PROB);
    let dist = match a.noise_dist.unwrap_or(NoiseDist::Uniform) {
        NoiseDist::Bernoulli => NoiseDistribution::BernoulliLike { p },
        NoiseDist::Uniform => NoiseDistribution::UniformSparse { p },
    };
    let mut graphs = match ds.data {
        GraphData::Single(g) => vec![g],
        GraphData::Many(gs) => gs,
    };
    let mut noisy_features = Vec::new();
    if let Some(frac) = a.noisy_features {
        for (i, g) in graphs.iter_mut().enumerate() {
            let (noisy, ids) = add_noisy_features(g, frac, dist, spec.seed ^ i as u64)?;
            *g = noisy;
            noisy_features = ids;
        }
    }
    let mut noisy_nodes = Vec::new();
    if let Some(frac) = a.noisy_nodes {
        if graphs.len() != 1 {
            return Err(input("noisy nodes apply to single-graph datasets only".into()));
        }
        let connect = a.connect_prob.unwrap_or(DEFAULT_CONNECT_PROB);
        let (noisy, ids) = add_noisy_nodes(&graphs[0], frac, connect, dist, spec.seed)?;
        graphs[0] = noisy;
        noisy_nodes = ids;
    }
    let dir = out_dir(a.out)?;
    let names: Vec<String> = if graphs.len() == 1 {
        vec!["graph.txt".into()]
    } else {
        (0..graphs.len()).map(|i| format!("graph_{i:05}.txt")).collect()
    };
    for (g, name) in graphs.iter().zip(&names) {
        save_graph(g, &dir.join(name))?;
    }
    let noisy = !noisy_features.is_empty() || !noisy_nodes.is_empty();
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        kind: Some(kind),
        spec: Some(spec),
        graphs: names,
        num_nodes: graphs.iter().map(Graph::num_nodes).sum(),
        num_edges: graphs.iter().map(Graph::num_edges).sum(),
        ground_truth: Some(ds.truth),
        noisy_features,
        noisy_nodes,
        noise: noisy.then_some(dist),
    };
    manifest.write(&dir.join("manifest.json"))?;
    println!("{kind}: {} graphs, {} nodes, {} edges", graphs.len(), manifest.num_nodes, manifest.num_edges);
    Ok(())
}

struct Data {
    manifest: Manifest,
    graphs: Vec<Graph>,
}

impl Data {
    fn load(dir: Option<PathBuf>) -> Result<Self> {
        let dir = required(dir, "data")?;
        let manifest = Manifest::read(&dir.join("manifest.json"))?;
        let graphs = manifest.load_graphs(&dir)?;
        if graphs.is_empty() {
            return Err(input(format!("{} lists no graphs", dir.display())));
        }
        Ok(Self { manifest, graphs })
    }

    fn graph_level(&self) -> bool {
        self.manifest.kind.map_or(self.graphs.len() > 1, DatasetKind::is_graph_level)
    }

    fn single(&self) -> Result<&Graph> {
        match self.graphs.as_slice() {
            [g] => Ok(g),
            _ => Err(input("this command needs a single-graph dataset".into())),
        }
    }

    fn default_samples(&self) -> usize {
        self.manifest.kind.map_or(ExplainOptions::default().num_samples, DatasetKind::default_samples)
    }
}

pub fn train(a: TrainArgs) -> Result<()> {
    let data = Data::load(a.data)?;
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        epochs: a.epochs.unwrap_or(d.epochs),
        learning_rate: a.lr.unwrap_or(d.learning_rate),
        weight_decay: a.weight_decay.unwrap_or(d.weight_decay),
        seed: a.seed.unwrap_or(d.seed),
        ..d
    };
    let (task, examples, classes) = if data.graph_level() {
        let labels = data.graphs.iter().map(|g| g.graph_label().ok_or_else(|| Error::MissingLabels("graph label".into())));
        let classes = labels.collect::<std::result::Result<Vec<_>, _>>()?.into_iter().max().unwrap_or(0) + 1;
        (Task::GraphClassification, Examples::Graphs(&data.graphs), classes)
    } else {
        let g = data.single()?;
        let labels = g.node_labels().ok_or_else(|| Error::MissingLabels("node labels".into()))?;
        (Task::NodeClassification, Examples::Nodes(g), labels.iter().max().unwrap_or(&0) + 1)
    };
    let classes = data.manifest.kind.map_or(classes, |k| k.num_classes().max(classes));
    let mut model = GnnModel::new(&ModelConfig {
        input_dim: data.graphs[0].num_features(),
        hidden_dims: vec![a.hidden.unwrap_or(20); a.layers.unwrap_or(3)],
        num_classes: classes,
        task,
        bias: true,
        seed: cfg.seed,
    })?;
    let report = fit_model(&mut model, examples, &cfg)?;
    let dir = out_dir(a.out)?;
    model.save(&dir.join("model.json"))?;
    write_json(
        &dir.join("metrics.json"),
        &json!({
            "schema_version": METRICS_SCHEMA_VERSION,
            "config": cfg,
            "train_accuracy": report.train_accuracy,
            "val_accuracy": report.val_accuracy,
            "test_accuracy": report.test_accuracy,
            "split": report.split,
            "log": report.log,
        }),
    )?;
    println!(
        "train {:.4} val {:.4} test {:.4}",
        report.train_accuracy, report.val_accuracy, report.test_accuracy
    );
    Ok(())
}

fn options(f: &ExplainFlags, data: &Data) -> ExplainOptions {
    let d = ExplainOptions::default();
    let mut o = ExplainOptions {
        strategy: f.strategy.clone().unwrap_or(d.strategy.clone()),
        num_samples: f.samples.unwrap_or_else(|| data.default_samples()),
        lambda: f.lambda.unwrap_or(d.lambda),
        indirect_effect: f.indirect_effect.unwrap_or(d.indirect_effect),
        fit: f.fit.clone().unwrap_or(d.fit.clone()),
        alpha: f.alpha,
        all_classes: f.all_classes.unwrap_or(d.all_classes),
        max_players: f.max_players,
        seed: f.seed.unwrap_or(d.seed),
        ..d
    };
    o.fit_params.lasso_alpha = f.lasso_alpha;
    if let Some(fill) = f.path_fill {
        o.path_fill = match fill {
            PathFillArg::Mean => PathFill::MonteCarloMean,
            PathFillArg::Target => PathFill::CopyTarget,
        };
    }
    if let Some(scope) = f.kernel_scope {
        o.masks.kernel_scope = match scope {
            KernelScopeArg::Block => KernelScope::Block,
            KernelScopeArg::Full => KernelScope::Full,
        };
    }
    if let Some(node) = f.contrast_node {
        o.baseline = FeatureBaseline::Contrast { node };
    }
    o
}

fn load_model(path: Option<PathBuf>) -> Result<GnnModel> {
    let path = required(path, "model")?;
    GnnModel::load(&path).with_context(|| format!("loading {}", path.display()))
}

fn read_node_list(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| input(format!("{}: bad node id `{s}`", path.display()))))
        .collect()
}

/// The explanation as JSON, with exact Shapley values appended when asked.
fn with_oracle(e: &Explanation, g: &Graph, model: &GnnModel, opts: &ExplainOptions, oracle: bool) -> Result<Value> {
    let mut v = serde_json::to_value(e)?;
    if oracle {
        let exact = shapley_oracle(g, model, &e.target, opts)?;
        let deviation = e.max_deviation(&exact)?;
        v["oracle"] = json!({
            "base_value": exact.base_value,
            "phi": exact.phi,
            "max_deviation": deviation,
        });
    }
    Ok(v)
}

pub fn explain(a: ExplainArgs) -> Result<()> {
    let data = Data::load(a.data)?;
    let model = load_model(a.model)?;
    let opts = options(&a.flags, &data);
    let oracle = a.oracle.unwrap_or(false);
    let dir = out_dir(a.out)?;
    if let Some(path) = &a.nodes_file {
        let g = data.single()?;
        let targets: Vec<ExplainTarget> = read_node_list(path)?.into_iter().map(|node| ExplainTarget::Node { node }).collect();
        let docs = explain_many(g, &model, &targets, &opts)
            .into_iter()
            .map(|r| with_oracle(&r?, g, &model, &opts, oracle))
            .collect::<Result<Vec<Value>>>()?;
        let path = dir.join("explanations.json");
        write_json(&path, &docs)?;
        println!("{} explanations written to {}", docs.len(), path.display());
        return Ok(());
    }
    let (g, target) = match (a.node, a.graph, a.global_nodes) {
        (Some(node), None, None) => (data.single()?, ExplainTarget::Node { node }),
        (None, Some(i), None) => {
            let g = data
                .graphs
                .get(i)
                .ok_or_else(|| input(format!("graph {i} out of range, dataset has {}", data.graphs.len())))?;
            (g, ExplainTarget::Graph)
        }
        (None, None, Some(nodes)) => (data.single()?, ExplainTarget::NodeSet { nodes }),
        _ => return Err(input("give one of --node, --graph, --global-nodes or --nodes-file".into())),
    };
    let e = explain_target(g, &model, &target, &opts)?;
    for w in &e.warnings {
        eprintln!("warning: {w}");
    }
    let doc = with_oracle(&e, g, &model, &opts, oracle)?;
    let path = dir.join("explanation.json");
    write_json(&path, &doc)?;
    println!(
        "predicted class {} base {:.4} full {:.4} R² {:.4}; written to {}",
        e.predicted_class,
        e.base_value,
        e.full_prediction,
        e.r_squared,
        path.display()
    );
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let mode = required(a.mode, "mode")?;
    let data = Data::load(a.data)?;
    let g = data.single()?;
    let opts = options(&a.flags, &data);
    let dir = out_dir(a.out)?;
    let dataset = data.manifest.kind.map_or("custom", DatasetKind::name);
    let motif_nodes = || -> Result<Vec<usize>> {
        let truth = data
            .manifest
            .ground_truth
            .as_ref()
            .ok_or_else(|| input("the dataset has no ground truth".into()))?;
        let mut nodes = truth.motif_nodes();
        nodes.truncate(a.targets.unwrap_or(usize::MAX));
        Ok(nodes)
    };
    match mode {
        EvalMode::Accuracy => {
            let model = load_model(a.model)?;
            let truth = data.manifest.ground_truth.as_ref().ok_or_else(|| anyhow!("the dataset has no ground truth"))?;
            let targets: Vec<ExplainTarget> = motif_nodes()?.into_iter().map(|node| ExplainTarget::Node { node }).collect();
            let expls = explain_many(g, &model, &targets, &opts).into_iter().collect::<graphsvx::Result<Vec<_>>>()?;
            let report = motif_accuracy(&expls, truth)?;
            let row = AblationRow {
                strategy: opts.strategy.clone(),
                samples: opts.num_samples,
                accuracy: report.accuracy,
            };
            write(&dir.join("accuracy.csv"), &accuracy_csv(dataset, &[row]))?;
            write_json(&dir.join("accuracy.json"), &report)?;
            println!("accuracy {:.4} over {} targets", report.accuracy, report.num_targets);
        }
        EvalMode::Noise => {
            let m = &data.manifest;
            let (ids, kind) = match (a.noise_kind, m.noisy_features.is_empty(), m.noisy_nodes.is_empty()) {
                (Some(NoiseKind::Nodes), _, false) | (None, true, false) => (&m.noisy_nodes, PlayerKind::Nodes),
                (Some(NoiseKind::Features) | None, false, _) => (&m.noisy_features, PlayerKind::Features),
                _ => return Err(input("the dataset manifest records no matching noisy variables".into())),
            };
            let model = load_model(a.model)?;
            let nodes = match motif_nodes() {
                Ok(nodes) => nodes,
                Err(_) => (0..g.num_nodes()).take(a.targets.unwrap_or(usize::MAX)).collect(),
            };
            let targets: Vec<ExplainTarget> = nodes.into_iter().map(|node| ExplainTarget::Node { node }).collect();
            let expls = explain_many(g, &model, &targets, &opts).into_iter().collect::<graphsvx::Result<Vec<_>>>()?;
            let k = a.top_k.unwrap_or(DEFAULT_TOP_K);
            let report = noise_inclusion(&expls, ids, k, kind)?;
            let control: Vec<Explanation> = expls.iter().enumerate().map(|(i, e)| random_control(e, opts.seed ^ i as u64)).collect();
            let control = noise_inclusion(&control, ids, k, kind)?;
            write(&dir.join("histogram.csv"), &histogram_csv(&report))?;
            write_json(&dir.join("noise.json"), &json!({ "schema_version": REPORT_SCHEMA_VERSION, "report": report, "random_control": control }))?;
            println!("mean noisy among top {k}: {:.3} (random control {:.3})", report.mean, control.mean);
        }
        EvalMode::Ablation => {
            let model = load_model(a.model)?;
            let truth = data.manifest.ground_truth.as_ref().ok_or_else(|| anyhow!("the dataset has no ground truth"))?;
            let strategies = a.strategies.unwrap_or_else(|| vec!["random".into(), "smart".into(), "smarter-separate".into()]);
            let names: Vec<&str> = strategies.iter().map(String::as_str).collect();
            let rows = ablation_run(g, &model, truth, &motif_nodes()?, &names, &opts)?;
            write(&dir.join("ablation.csv"), &accuracy_csv(dataset, &rows))?;
            write_json(&dir.join("ablation.json"), &json!({ "schema_version": REPORT_SCHEMA_VERSION, "dataset": dataset, "rows": rows }))?;
            for r in &rows {
                println!("{:18} {:.4}", r.strategy, r.accuracy);
            }
        }
        EvalMode::Timing => {
            let model = load_model(a.model)?;
            let budgets = a.budgets.unwrap_or_else(|| vec![opts.num_samples]);
            let nodes: Vec<usize> = match motif_nodes() {
                Ok(nodes) if a.targets.is_some() => nodes,
                Ok(nodes) => nodes.into_iter().take(DEFAULT_TIMING_TARGETS).collect(),
                Err(_) => (0..g.num_nodes()).take(a.targets.unwrap_or(DEFAULT_TIMING_TARGETS)).collect(),
            };
            let rows = timing_run(g, &model, &nodes, &budgets, &opts)?;
            write(&dir.join("timing.csv"), &timing_csv(&rows))?;
            write_json(&dir.join("timing.json"), &json!({ "schema_version": REPORT_SCHEMA_VERSION, "dataset": dataset, "rows": rows }))?;
            for r in &rows {
                println!("P={:6} {:.4}s", r.samples, r.seconds);
            }
        }
    }
    Ok(())
}
