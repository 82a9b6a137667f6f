//! Injection of uninformative features and nodes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseDistribution {
    /// 1 with probability `p`, else 0.
    BernoulliLike { p: f64 },
    /// Uniform on [0, 1) with probability `p`, else 0.
    UniformSparse { p: f64 },
}

impl NoiseDistribution {
    fn validate(self) -> Result<()> {
        let p = match self {
            NoiseDistribution::BernoulliLike { p } | NoiseDistribution::UniformSparse { p } => p,
        };
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "noise probability must lie in [0, 1], got {p}"
            )));
        }
        Ok(())
    }

    fn sample<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            NoiseDistribution::BernoulliLike { p } => f64::from(u8::from(rng.random::<f64>() < p)),
            NoiseDistribution::UniformSparse { p } => {
                if rng.random::<f64>() < p {
                    rng.random::<f64>()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Appends `⌈fraction·F⌉` noise columns; returns the new graph and the ids
/// of the added columns.
pub fn add_noisy_features(
    g: &Graph,
    fraction: f64,
    dist: NoiseDistribution,
    seed: u64,
) -> Result<(Graph, Vec<usize>)> {
    if !(fraction > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise fraction must be positive, got {fraction}"
        )));
    }
    dist.validate()?;
    let f = g.num_features();
    let extra = (fraction * f as f64 - 1e-9).ceil().max(1.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = DenseMatrix::zeros(g.num_nodes(), extra);
    for x in noise.data_mut() {
        *x = dist.sample(&mut rng);
    }
    let feats = g.features().hstack(&noise)?;
    Ok((g.with_features(feats)?, (f..f + extra).collect()))
}

/// Appends `⌊fraction·N⌋` (at least one) nodes linked to each existing node
/// with probability `connect_prob`; a new node left without links gets one
/// uniformly chosen link. New nodes get label 0 when the graph is labelled.
pub fn add_noisy_nodes(
    g: &Graph,
    fraction: f64,
    connect_prob: f64,
    dist: NoiseDistribution,
    seed: u64,
) -> Result<(Graph, Vec<usize>)> {
    if !(fraction > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise fraction must be positive, got {fraction}"
        )));
    }
    if !(connect_prob > 0.0 && connect_prob < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "connection probability must lie in (0, 1), got {connect_prob}"
        )));
    }
    dist.validate()?;
    let n = g.num_nodes();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot attach noise to an empty graph".into()));
    }
    let extra = ((fraction * n as f64 + 1e-9).floor() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for new in n..n + extra {
        let before = edges.len();
        for u in 0..n {
            if rng.random::<f64>() < connect_prob {
                edges.push((u, new));
            }
        }
        if edges.len() == before {
            edges.push((rng.random_range(0..n), new));
        }
    }
    let f = g.num_features();
    let mut feats = DenseMatrix::zeros(n + extra, f);
    for u in 0..n {
        feats.row_mut(u).copy_from_slice(g.features().row(u));
    }
    for u in n..n + extra {
        for x in feats.row_mut(u) {
            *x = dist.sample(&mut rng);
        }
    }
    let mut out = Graph::new(n + extra, g.edges().iter().copied().chain(edges), feats)?;
    if let Some(labels) = g.node_labels() {
        let mut labels = labels.to_vec();
        labels.resize(n + extra, 0);
        out = out.with_node_labels(labels)?;
    }
    if let Some(l) = g.graph_label() {
        out = out.with_graph_label(l);
    }
    Ok((out, (n..n + extra).collect()))
}
