//! Full-batch training with negative log-likelihood loss and Adam.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GnnModel, Task};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::{finite_diff_grad, DenseMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Train, validation and test fractions.
    pub split: (f64, f64, f64),
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            split: (0.8, 0.1, 0.1),
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let (a, b, c) = self.split;
        if !(a > 0.0 && b > 0.0 && c > 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must be positive and sum to 1, got ({a}, {b}, {c})"
            )));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(
                "learning rate must be positive and weight decay nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Indices of training, validation and test examples (nodes or graphs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub log: Vec<EpochLog>,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub split: Split,
}

pub struct Adam {
    lr: f64,
    weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(num_params: usize, lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i] + self.weight_decay * params[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

/// Training data: one labelled graph (node task) or a labelled collection.
#[derive(Clone, Copy)]
pub enum Examples<'a> {
    Nodes(&'a Graph),
    Graphs(&'a [Graph]),
}

impl<'a> Examples<'a> {
    fn count(&self) -> usize {
        match self {
            Examples::Nodes(g) => g.num_nodes(),
            Examples::Graphs(gs) => gs.len(),
        }
    }

    fn labels(&self) -> Result<Vec<usize>> {
        match self {
            Examples::Nodes(g) => g
                .node_labels()
                .map(<[usize]>::to_vec)
                .ok_or_else(|| Error::MissingLabels("graph has no node labels".into())),
            Examples::Graphs(gs) => gs
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    g.graph_label()
                        .ok_or_else(|| Error::MissingLabels(format!("graph {i} has no label")))
                })
                .collect(),
        }
    }
}

fn check_task(model: &GnnModel, data: Examples) -> Result<()> {
    match (model.task(), data) {
        (Task::NodeClassification, Examples::Nodes(_)) | (Task::GraphClassification, Examples::Graphs(_)) => Ok(()),
        _ => Err(Error::InvalidArgument(
            "training data does not match the model task".into(),
        )),
    }
}

fn validate_labels(model: &GnnModel, labels: &[usize]) -> Result<()> {
    if let Some(bad) = labels.iter().find(|&&l| l >= model.num_classes()) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} exceeds the model's {} classes",
            model.num_classes()
        )));
    }
    Ok(())
}

/// Mean NLL over `indices` and its gradient, shaped like the model.
pub(crate) fn loss_and_gradient(
    model: &GnnModel,
    data: Examples,
    labels: &[usize],
    indices: &[usize],
) -> (f64, GnnModel) {
    let mut grad = model.zeros_like();
    if indices.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / indices.len() as f64;
    let mut loss = 0.0;
    match data {
        Examples::Nodes(g) => {
            let cache = model.forward_cached(g);
            let mut dlogits = DenseMatrix::zeros(g.num_nodes(), model.num_classes());
            for &i in indices {
                let p = cache.probs.row(i);
                loss -= p[labels[i]].max(f64::MIN_POSITIVE).ln() * scale;
                let d = dlogits.row_mut(i);
                for (dj, pj) in d.iter_mut().zip(p) {
                    *dj = pj * scale;
                }
                d[labels[i]] -= scale;
            }
            model.backward(g, &cache, &dlogits, &mut grad);
        }
        Examples::Graphs(gs) => {
            for &i in indices {
                let cache = model.forward_cached(&gs[i]);
                let p = cache.probs.row(0);
                loss -= p[labels[i]].max(f64::MIN_POSITIVE).ln() * scale;
                let mut dlogits = DenseMatrix::from_vec(1, p.len(), p.iter().map(|x| x * scale).collect()).unwrap();
                dlogits[(0, labels[i])] -= scale;
                model.backward(&gs[i], &cache, &dlogits, &mut grad);
            }
        }
    }
    (loss, grad)
}

fn predictions(model: &GnnModel, data: Examples) -> Vec<usize> {
    let argmax = |row: &[f64]| {
        row.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
            .0
    };
    match data {
        Examples::Nodes(g) => {
            let probs = model.forward_cached(g).probs;
            (0..g.num_nodes()).map(|i| argmax(probs.row(i))).collect()
        }
        Examples::Graphs(gs) => gs
            .iter()
            .map(|g| argmax(model.forward_cached(g).probs.row(0)))
            .collect(),
    }
}

fn accuracy(pred: &[usize], labels: &[usize], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    idx.iter().filter(|&&i| pred[i] == labels[i]).count() as f64 / idx.len() as f64
}

fn make_split(n: usize, fractions: (f64, f64, f64), seed: u64) -> Split {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fractions.0 * n as f64).round() as usize).min(n);
    let n_val = ((fractions.1 * n as f64).round() as usize).min(n - n_train);
    let mut test = order.split_off(n_train + n_val);
    let mut val = order.split_off(n_train);
    let mut train = order;
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Split { train, val, test }
}

/// Trains `model` in place and reports per-epoch loss and accuracy.
pub fn train(model: &mut GnnModel, data: Examples, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    check_task(model, data)?;
    let labels = data.labels()?;
    validate_labels(model, &labels)?;
    if let Examples::Nodes(g) = data {
        model.check_input(g)?;
    } else if let Examples::Graphs(gs) = data {
        for g in gs {
            model.check_input(g)?;
        }
    }
    let split = make_split(data.count(), cfg.split, cfg.seed);
    let mut adam = Adam::new(model.num_params(), cfg.learning_rate, cfg.weight_decay);
    let mut params = model.params();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, grad) = loss_and_gradient(model, data, &labels, &split.train);
        adam.step(&mut params, &grad.params());
        model.set_params(&params)?;
        if epoch % 10 == 9 || epoch + 1 == cfg.epochs {
            let pred = predictions(model, data);
            log.push(EpochLog {
                epoch: epoch + 1,
                loss,
                train_accuracy: accuracy(&pred, &labels, &split.train),
                val_accuracy: accuracy(&pred, &labels, &split.val),
            });
        }
    }
    let pred = predictions(model, data);
    Ok(TrainReport {
        log,
        train_accuracy: accuracy(&pred, &labels, &split.train),
        val_accuracy: accuracy(&pred, &labels, &split.val),
        test_accuracy: accuracy(&pred, &labels, &split.test),
        split,
    })
}

/// Largest relative disagreement between backpropagated and central-difference
/// gradients of the mean NLL over all examples. At most `max_params`
/// parameters are checked, chosen with `seed` when the model is larger.
pub fn grad_check(model: &GnnModel, data: Examples, max_params: usize, seed: u64) -> Result<f64> {
    check_task(model, data)?;
    let labels = data.labels()?;
    validate_labels(model, &labels)?;
    let all: Vec<usize> = (0..data.count()).collect();
    let analytic = loss_and_gradient(model, data, &labels, &all).1.params();
    let base = model.params();
    let mut chosen: Vec<usize> = (0..base.len()).collect();
    if chosen.len() > max_params {
        chosen = chosen
            .choose_multiple(&mut ChaCha8Rng::seed_from_u64(seed), max_params)
            .copied()
            .collect();
    }
    let mut worst = 0.0f64;
    for &k in &chosen {
        let numeric = finite_diff_grad(
            |x| {
                let mut p = base.clone();
                p[k] = x[0];
                let mut probe = model.clone();
                probe.set_params(&p).unwrap();
                loss_and_gradient(&probe, data, &labels, &all).0
            },
            &[base[k]],
            1e-6,
        )[0];
        let a = analytic[k];
        worst = worst.max((a - numeric).abs() / (a.abs() + numeric.abs() + 1e-8));
    }
    Ok(worst)
}
