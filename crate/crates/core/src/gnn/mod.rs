//! A minimal graph convolutional network with manual backpropagation.
//!
//! Each convolution computes `ReLU(Â H W + b)` where `Â` is the symmetric
//! normalization of the adjacency matrix with self-loops. Node tasks feed the
//! last embedding to a dense classifier; graph tasks max-pool over nodes
//! first. Outputs are softmax probabilities.

mod train;

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::DenseMatrix;

pub use train::{Examples, grad_check, train, Adam, EpochLog, Split, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    NodeClassification,
    GraphClassification,
}

/// Weight matrix (`in × out`) with an optional bias row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: DenseMatrix,
    pub bias: Option<Vec<f64>>,
}

impl Dense {
    fn glorot(fan_in: usize, fan_out: usize, bias: bool, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self {
            weight: DenseMatrix::from_vec(fan_in, fan_out, data).unwrap(),
            bias: bias.then(|| vec![0.0; fan_out]),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            weight: DenseMatrix::zeros(self.weight.rows(), self.weight.cols()),
            bias: self.bias.as_ref().map(|b| vec![0.0; b.len()]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut out = x.matmul(&self.weight).expect("layer widths checked");
        self.add_bias(&mut out);
        out
    }

    fn add_bias(&self, out: &mut DenseMatrix) {
        if let Some(b) = &self.bias {
            for i in 0..out.rows() {
                for (o, bj) in out.row_mut(i).iter_mut().zip(b) {
                    *o += bj;
                }
            }
        }
    }

    fn num_params(&self) -> usize {
        self.weight.data().len() + self.bias.as_ref().map_or(0, Vec::len)
    }
}

/// Architecture of a freshly initialized model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    pub task: Task,
    pub bias: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnModel {
    layers: Vec<Dense>,
    classifier: Dense,
    task: Task,
}

/// Intermediate values of one forward pass, kept for backpropagation.
pub(crate) struct ForwardCache {
    /// Input of each convolution; the last entry is the final embedding.
    pub inputs: Vec<DenseMatrix>,
    /// Pre-activation of each convolution.
    pub pre: Vec<DenseMatrix>,
    /// Per embedding column, the node that won the max-pool (graph task).
    pub argmax: Vec<usize>,
    pub probs: DenseMatrix,
}

/// `Â H` with `Â = D̃^{-1/2} (A + I) D̃^{-1/2}`.
pub fn propagate(g: &Graph, h: &DenseMatrix) -> DenseMatrix {
    let n = g.num_nodes();
    let scale: Vec<f64> = (0..n)
        .map(|u| 1.0 / ((g.degree(u) + 1) as f64).sqrt())
        .collect();
    let mut out = DenseMatrix::zeros(n, h.cols());
    for i in 0..n {
        let row = out.row_mut(i);
        let si = scale[i];
        for (o, x) in row.iter_mut().zip(h.row(i)) {
            *o = si * si * x;
        }
        for &j in g.neighbors(i) {
            let w = si * scale[j];
            for (o, x) in row.iter_mut().zip(h.row(j)) {
                *o += w * x;
            }
        }
    }
    out
}

/// Dense `Â`, for tests and small hand checks.
pub fn normalized_adjacency(g: &Graph) -> DenseMatrix {
    propagate(g, &DenseMatrix::identity(g.num_nodes()))
}

pub(crate) fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    out
}

impl GnnModel {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        if cfg.input_dim == 0 || cfg.num_classes == 0 || cfg.hidden_dims.contains(&0) {
            return Err(Error::InvalidArgument(
                "layer widths and class count must be positive".into(),
            ));
        }
        if cfg.task == Task::GraphClassification && cfg.hidden_dims.is_empty() {
            return Err(Error::InvalidArgument(
                "graph classification needs at least one convolution".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut layers = Vec::with_capacity(cfg.hidden_dims.len());
        let mut fan_in = cfg.input_dim;
        for &h in &cfg.hidden_dims {
            layers.push(Dense::glorot(fan_in, h, cfg.bias, &mut rng));
            fan_in = h;
        }
        let classifier = Dense::glorot(fan_in, cfg.num_classes, cfg.bias, &mut rng);
        Ok(Self {
            layers,
            classifier,
            task: cfg.task,
        })
    }

    /// Assembles a model from explicit weights, checking that widths chain.
    pub fn from_parts(layers: Vec<Dense>, classifier: Dense, task: Task) -> Result<Self> {
        let mut width = layers.first().map_or(classifier.in_dim(), Dense::in_dim);
        for (i, layer) in layers.iter().chain(std::iter::once(&classifier)).enumerate() {
            if layer.in_dim() != width {
                return Err(Error::DimensionMismatch(format!(
                    "layer {i} expects width {} but receives {width}",
                    layer.in_dim()
                )));
            }
            if let Some(b) = &layer.bias {
                if b.len() != layer.out_dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "layer {i} bias has length {} for {} outputs",
                        b.len(),
                        layer.out_dim()
                    )));
                }
            }
            width = layer.out_dim();
        }
        if task == Task::GraphClassification && layers.is_empty() {
            return Err(Error::InvalidArgument(
                "graph classification needs at least one convolution".into(),
            ));
        }
        Ok(Self {
            layers,
            classifier,
            task,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.out_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().unwrap_or(&self.classifier).in_dim()
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers.iter().map(Dense::out_dim).collect()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn classifier(&self) -> &Dense {
        &self.classifier
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum::<usize>() + self.classifier.num_params()
    }

    fn check_input(&self, g: &Graph) -> Result<()> {
        if g.num_features() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "graph has {} features, model expects {}",
                g.num_features(),
                self.input_dim()
            )));
        }
        if self.task == Task::GraphClassification && g.num_nodes() == 0 {
            return Err(Error::InvalidArgument("cannot pool an empty graph".into()));
        }
        Ok(())
    }

    /// Class probabilities: one row per node for node tasks, a single row
    /// for graph tasks.
    pub fn gcn_forward(&self, g: &Graph) -> Result<DenseMatrix> {
        self.check_input(g)?;
        Ok(self.forward_cached(g).probs)
    }

    /// Probability vector of node `v` (node task) or of the graph.
    pub fn predict(&self, g: &Graph, v: Option<usize>) -> Result<Vec<f64>> {
        let probs = self.gcn_forward(g)?;
        Ok(match (self.task, v) {
            (Task::NodeClassification, Some(v)) => probs.row(v).to_vec(),
            (Task::GraphClassification, _) => probs.row(0).to_vec(),
            (Task::NodeClassification, None) => {
                return Err(Error::InvalidArgument(
                    "node classification needs a target node".into(),
                ))
            }
        })
    }

    pub(crate) fn forward_cached(&self, g: &Graph) -> ForwardCache {
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = g.features().clone();
        for layer in &self.layers {
            let mut z = propagate(g, &h.matmul(&layer.weight).expect("widths checked"));
            layer.add_bias(&mut z);
            let mut next = z.clone();
            next.data_mut().iter_mut().for_each(|x| *x = x.max(0.0));
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        let (pooled, argmax) = match self.task {
            Task::NodeClassification => (None, Vec::new()),
            Task::GraphClassification => {
                let mut best = vec![0usize; h.cols()];
                let mut pooled = DenseMatrix::zeros(1, h.cols());
                for j in 0..h.cols() {
                    let mut arg = 0;
                    for i in 1..h.rows() {
                        if h[(i, j)] > h[(arg, j)] {
                            arg = i;
                        }
                    }
                    best[j] = arg;
                    pooled[(0, j)] = h[(arg, j)];
                }
                (Some(pooled), best)
            }
        };
        let logits = self.classifier.apply(pooled.as_ref().unwrap_or(&h));
        inputs.push(h);
        ForwardCache {
            inputs,
            pre,
            argmax,
            probs: softmax_rows(&logits),
        }
    }

    /// Accumulates parameter gradients into `grad` given `∂loss/∂logits`.
    pub(crate) fn backward(&self, g: &Graph, cache: &ForwardCache, dlogits: &DenseMatrix, grad: &mut GnnModel) {
        let last = cache.inputs.last().unwrap();
        let classifier_input = match self.task {
            Task::NodeClassification => last.clone(),
            Task::GraphClassification => {
                let mut pooled = DenseMatrix::zeros(1, last.cols());
                for (j, &i) in cache.argmax.iter().enumerate() {
                    pooled[(0, j)] = last[(i, j)];
                }
                pooled
            }
        };
        accumulate(&mut grad.classifier, &classifier_input, dlogits);
        let dinput = dlogits.matmul_t(&self.classifier.weight).unwrap();
        let mut dh = match self.task {
            Task::NodeClassification => dinput,
            Task::GraphClassification => {
                let mut d = DenseMatrix::zeros(last.rows(), last.cols());
                for (j, &i) in cache.argmax.iter().enumerate() {
                    d[(i, j)] += dinput[(0, j)];
                }
                d
            }
        };
        for l in (0..self.layers.len()).rev() {
            let z = &cache.pre[l];
            for (d, &zv) in dh.data_mut().iter_mut().zip(z.data()) {
                if zv <= 0.0 {
                    *d = 0.0;
                }
            }
            if let Some(b) = &mut grad.layers[l].bias {
                for i in 0..dh.rows() {
                    for (bj, d) in b.iter_mut().zip(dh.row(i)) {
                        *bj += d;
                    }
                }
            }
            // Â is symmetric, so its transpose is itself.
            let du = propagate(g, &dh);
            let dw = cache.inputs[l].t_matmul(&du).unwrap();
            grad.layers[l].weight.add_assign(&dw).unwrap();
            if l > 0 {
                dh = du.matmul_t(&self.layers[l].weight).unwrap();
            }
        }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(Dense::zeros_like).collect(),
            classifier: self.classifier.zeros_like(),
            task: self.task,
        }
    }

    fn blocks(&self) -> impl Iterator<Item = &Dense> {
        self.layers.iter().chain(std::iter::once(&self.classifier))
    }

    /// All parameters flattened: per layer the weights then the bias,
    /// classifier last.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for d in self.blocks() {
            out.extend_from_slice(d.weight.data());
            if let Some(b) = &d.bias {
                out.extend_from_slice(b);
            }
        }
        out
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} parameters",
                values.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for d in self.layers.iter_mut().chain(std::iter::once(&mut self.classifier)) {
            let n = d.weight.data().len();
            d.weight.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
            if let Some(b) = &mut d.bias {
                let n = b.len();
                b.copy_from_slice(&values[offset..offset + n]);
                offset += n;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile {
            format: MODEL_FORMAT.into(),
            schema_version: MODEL_SCHEMA_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::InvalidArgument(format!(
                "not a model file (format `{}`)",
                file.format
            )));
        }
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported model schema version {}",
                file.schema_version
            )));
        }
        let m = file.model;
        Self::from_parts(m.layers, m.classifier, m.task)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

fn accumulate(target: &mut Dense, input: &DenseMatrix, dout: &DenseMatrix) {
    target
        .weight
        .add_assign(&input.t_matmul(dout).unwrap())
        .unwrap();
    if let Some(b) = &mut target.bias {
        for i in 0..dout.rows() {
            for (bj, d) in b.iter_mut().zip(dout.row(i)) {
                *bj += d;
            }
        }
    }
}

const MODEL_FORMAT: &str = "graphsvx-gnn";
const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    schema_version: u32,
    model: GnnModel,
}
