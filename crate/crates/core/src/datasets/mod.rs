//! Synthetic benchmark graphs with planted motifs.
//!
//! Node-level datasets attach small motifs (houses, cycles, grids) to a base
//! graph and label nodes by structural role; the graph-level dataset labels
//! each small graph by the motif planted in it.

mod io;
mod noise;

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::DenseMatrix;

pub use io::{load_graph, save_graph, Manifest, MANIFEST_SCHEMA_VERSION};
pub use noise::{add_noisy_features, add_noisy_nodes, NoiseDistribution};

/// Width of the node feature matrix of every synthetic dataset.
pub const SYNTHETIC_FEATURES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    BaShapes,
    BaCommunity,
    TreeCycles,
    TreeGrid,
    Ba2Motifs,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 5] = [
        DatasetKind::BaShapes,
        DatasetKind::BaCommunity,
        DatasetKind::TreeCycles,
        DatasetKind::TreeGrid,
        DatasetKind::Ba2Motifs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::BaShapes => "ba-shapes",
            DatasetKind::BaCommunity => "ba-community",
            DatasetKind::TreeCycles => "tree-cycles",
            DatasetKind::TreeGrid => "tree-grid",
            DatasetKind::Ba2Motifs => "ba-2motifs",
        }
    }

    pub fn motif_size(self) -> usize {
        match self {
            DatasetKind::BaShapes | DatasetKind::BaCommunity => 5,
            DatasetKind::TreeCycles => 6,
            DatasetKind::TreeGrid => 9,
            DatasetKind::Ba2Motifs => 5,
        }
    }

    pub fn num_classes(self) -> usize {
        match self {
            DatasetKind::BaShapes => 4,
            DatasetKind::BaCommunity => 8,
            DatasetKind::TreeCycles | DatasetKind::TreeGrid | DatasetKind::Ba2Motifs => 2,
        }
    }

    pub fn is_graph_level(self) -> bool {
        self == DatasetKind::Ba2Motifs
    }

    /// Sample budget used for explanations when none is given.
    pub fn default_samples(self) -> usize {
        match self {
            DatasetKind::BaShapes => 400,
            DatasetKind::BaCommunity => 800,
            DatasetKind::TreeCycles => 1400,
            DatasetKind::TreeGrid => 1500,
            DatasetKind::Ba2Motifs => 800,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::UnknownName {
                kind: "dataset",
                name: s.to_string(),
            })
    }
}

/// Parameters of a synthetic build.
///
/// `base_size` is the number of base-graph nodes (BA or tree) per graph;
/// for BA-Community it applies to each of the two communities. For
/// BA-2motifs, `num_motifs` is the number of graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: DatasetKind,
    pub base_size: usize,
    pub num_motifs: usize,
    pub perturb_edge_fraction: f64,
    pub ba_attach: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn defaults(kind: DatasetKind) -> Self {
        let (base_size, num_motifs, frac) = match kind {
            DatasetKind::BaShapes | DatasetKind::BaCommunity => (300, 80, 0.1),
            DatasetKind::TreeCycles => (511, 60, 0.1),
            DatasetKind::TreeGrid => (511, 80, 0.1),
            DatasetKind::Ba2Motifs => (20, 1000, 0.0),
        };
        Self {
            kind,
            base_size,
            num_motifs,
            perturb_edge_fraction: frac,
            ba_attach: if kind == DatasetKind::Ba2Motifs { 1 } else { 5 },
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_size == 0 || self.num_motifs == 0 || self.ba_attach == 0 {
            return Err(Error::InvalidArgument(
                "base size, motif count and attachment must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.perturb_edge_fraction) {
            return Err(Error::InvalidArgument(format!(
                "perturb edge fraction must lie in [0, 1), got {}",
                self.perturb_edge_fraction
            )));
        }
        let uses_ba = matches!(
            self.kind,
            DatasetKind::BaShapes | DatasetKind::BaCommunity | DatasetKind::Ba2Motifs
        );
        if uses_ba && self.base_size <= self.ba_attach {
            return Err(Error::InvalidArgument(format!(
                "a BA graph of {} nodes cannot attach {} edges per node",
                self.base_size, self.ba_attach
            )));
        }
        Ok(())
    }
}

/// Planted motifs. For node-level datasets `membership[u]` indexes the motif
/// containing node `u`; for the graph-level dataset `motifs[i]` lists the
/// motif nodes of graph `i` and `membership` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub motif_size: usize,
    pub motifs: Vec<Vec<usize>>,
    pub membership: Vec<Option<usize>>,
}

impl GroundTruth {
    pub fn motif_of(&self, node: usize) -> Option<&[usize]> {
        self.membership
            .get(node)
            .copied()
            .flatten()
            .map(|m| self.motifs[m].as_slice())
    }

    /// All nodes that belong to some motif, ascending.
    pub fn motif_nodes(&self) -> Vec<usize> {
        (0..self.membership.len())
            .filter(|&u| self.membership[u].is_some())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphData {
    Single(Graph),
    Many(Vec<Graph>),
}

impl GraphData {
    pub fn single(&self) -> Option<&Graph> {
        match self {
            GraphData::Single(g) => Some(g),
            GraphData::Many(_) => None,
        }
    }

    pub fn many(&self) -> Option<&[Graph]> {
        match self {
            GraphData::Single(_) => None,
            GraphData::Many(gs) => Some(gs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub data: GraphData,
    pub truth: GroundTruth,
}

/// Accumulates nodes, edges and labels while a dataset is assembled.
struct Builder {
    n: usize,
    edges: Vec<(usize, usize)>,
    labels: Vec<usize>,
    motifs: Vec<Vec<usize>>,
    membership: Vec<Option<usize>>,
}

impl Builder {
    fn new() -> Self {
        Self {
            n: 0,
            edges: Vec::new(),
            labels: Vec::new(),
            motifs: Vec::new(),
            membership: Vec::new(),
        }
    }

    fn add_base(&mut self, count: usize, edges: &[(usize, usize)]) -> usize {
        let offset = self.n;
        self.n += count;
        self.labels.extend(std::iter::repeat_n(0, count));
        self.membership.extend(std::iter::repeat_n(None, count));
        self.edges.extend(edges.iter().map(|&(a, b)| (a + offset, b + offset)));
        offset
    }

    /// Adds a motif whose local node `i` gets `labels[i]`, attached by one
    /// edge from local node `anchor` to global node `target`.
    fn add_motif(&mut self, labels: &[usize], edges: &[(usize, usize)], anchor: usize, target: usize) {
        let offset = self.n;
        let id = self.motifs.len();
        self.n += labels.len();
        self.labels.extend_from_slice(labels);
        self.membership.extend(std::iter::repeat_n(Some(id), labels.len()));
        self.motifs.push((offset..offset + labels.len()).collect());
        self.edges.extend(edges.iter().map(|&(a, b)| (a + offset, b + offset)));
        self.edges.push((offset + anchor, target));
    }

    fn add_random_edges(&mut self, count: usize, rng: &mut ChaCha8Rng) {
        let mut existing: std::collections::HashSet<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        let max_edges = self.n * (self.n - 1) / 2;
        let mut added = 0;
        while added < count && existing.len() < max_edges {
            let a = rng.random_range(0..self.n);
            let b = rng.random_range(0..self.n);
            if a != b && existing.insert((a.min(b), a.max(b))) {
                self.edges.push((a, b));
                added += 1;
            }
        }
    }

    fn finish(self, features: DenseMatrix, motif_size: usize) -> (Graph, GroundTruth) {
        let g = Graph::new(self.n, self.edges, features)
            .and_then(|g| g.with_node_labels(self.labels))
            .expect("builder produces consistent graphs");
        let truth = GroundTruth {
            motif_size,
            motifs: self.motifs,
            membership: self.membership,
        };
        (g, truth)
    }
}

/// Preferential-attachment graph: a star on `m + 1` nodes, then each new
/// node links to `m` distinct existing nodes drawn proportionally to degree.
pub fn barabasi_albert(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (1..=m.min(n.saturating_sub(1))).map(|u| (0, u)).collect();
    let mut repeated: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    for u in m + 1..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m {
            let t = *repeated.choose(rng).unwrap();
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, u));
            repeated.extend([t, u]);
        }
    }
    edges
}

/// Complete binary tree in heap order: node `i` has children `2i+1`, `2i+2`.
pub fn binary_tree(n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|u| ((u - 1) / 2, u)).collect()
}

/// Roof 0, middle 1 and 2, bottom 3 and 4.
const HOUSE_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 2), (1, 3), (2, 4), (3, 4)];
const HOUSE_LABELS: [usize; 5] = [1, 2, 2, 3, 3];
const HOUSE_ANCHOR: usize = 1;

fn cycle_edges(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|i| (i, (i + 1) % n)).collect()
}

fn grid_edges(side: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for r in 0..side {
        for c in 0..side {
            let u = r * side + c;
            if c + 1 < side {
                edges.push((u, u + 1));
            }
            if r + 1 < side {
                edges.push((u, u + side));
            }
        }
    }
    edges
}

fn constant_features(n: usize) -> DenseMatrix {
    DenseMatrix::from_vec(n, SYNTHETIC_FEATURES, vec![1.0; n * SYNTHETIC_FEATURES]).unwrap()
}

fn house_graph(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Builder {
    let mut b = Builder::new();
    let base = barabasi_albert(spec.base_size, spec.ba_attach, rng);
    b.add_base(spec.base_size, &base);
    for _ in 0..spec.num_motifs {
        let target = rng.random_range(0..spec.base_size);
        b.add_motif(&HOUSE_LABELS, &HOUSE_EDGES, HOUSE_ANCHOR, target);
    }
    b
}

fn perturb_count(spec: &SyntheticSpec, n: usize) -> usize {
    (spec.perturb_edge_fraction * n as f64).round() as usize
}

fn build_ba_shapes(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> (Graph, GroundTruth) {
    let mut b = house_graph(spec, rng);
    let extra = perturb_count(spec, b.n);
    b.add_random_edges(extra, rng);
    let n = b.n;
    b.finish(constant_features(n), 5)
}

/// Two house graphs joined by sparse random edges. Labels are the house
/// role plus 4 for the second community; features are Gaussian with mean
/// −1 in the first community and +1 in the second.
fn build_ba_community(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> (Graph, GroundTruth) {
    let first = house_graph(spec, rng);
    let second = house_graph(spec, rng);
    let half = first.n;
    let mut b = Builder::new();
    for (c, part) in [first, second].into_iter().enumerate() {
        let offset = b.n;
        let motif_offset = b.motifs.len();
        b.n += part.n;
        b.labels.extend(part.labels.iter().map(|&l| l + 4 * c));
        b.membership
            .extend(part.membership.iter().map(|m| m.map(|i| i + motif_offset)));
        b.motifs
            .extend(part.motifs.iter().map(|m| m.iter().map(|u| u + offset).collect()));
        b.edges
            .extend(part.edges.iter().map(|&(x, y)| (x + offset, y + offset)));
    }
    let bridges = (spec.base_size / 10).max(1);
    for _ in 0..bridges {
        let a = rng.random_range(0..spec.base_size);
        let c = half + rng.random_range(0..spec.base_size);
        b.edges.push((a, c));
    }
    let extra = perturb_count(spec, b.n);
    b.add_random_edges(extra, rng);
    let n = b.n;
    let mut feats = DenseMatrix::zeros(n, SYNTHETIC_FEATURES);
    let low = Normal::new(-1.0, 0.5).unwrap();
    let high = Normal::new(1.0, 0.5).unwrap();
    for u in 0..n {
        let dist = if u < half { &low } else { &high };
        for x in feats.row_mut(u) {
            *x = dist.sample(rng);
        }
    }
    b.finish(feats, 5)
}

fn build_tree(spec: &SyntheticSpec, rng: &mut ChaCha8Rng, grid: bool) -> (Graph, GroundTruth) {
    let mut b = Builder::new();
    b.add_base(spec.base_size, &binary_tree(spec.base_size));
    let (edges, size) = if grid { (grid_edges(3), 9) } else { (cycle_edges(6), 6) };
    let labels = vec![1; size];
    for _ in 0..spec.num_motifs {
        let target = rng.random_range(0..spec.base_size);
        b.add_motif(&labels, &edges, 0, target);
    }
    let extra = perturb_count(spec, b.n);
    b.add_random_edges(extra, rng);
    let n = b.n;
    b.finish(constant_features(n), size)
}

/// Small BA graphs each carrying one house (label 0) or one 5-cycle
/// (label 1); motif nodes occupy the last five ids of every graph.
fn build_ba_2motifs(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> (Vec<Graph>, GroundTruth) {
    let mut graphs = Vec::with_capacity(spec.num_motifs);
    let mut motifs = Vec::with_capacity(spec.num_motifs);
    let cycle = cycle_edges(5);
    for i in 0..spec.num_motifs {
        let label = i % 2;
        let mut b = Builder::new();
        let base = barabasi_albert(spec.base_size, spec.ba_attach, rng);
        b.add_base(spec.base_size, &base);
        let target = rng.random_range(0..spec.base_size);
        if label == 0 {
            b.add_motif(&[1; 5], &HOUSE_EDGES, 0, target);
        } else {
            b.add_motif(&[1; 5], &cycle, 0, target);
        }
        let extra = perturb_count(spec, b.n);
        b.add_random_edges(extra, rng);
        motifs.push(b.motifs[0].clone());
        let n = b.n;
        let g = Graph::new(n, b.edges, constant_features(n))
            .expect("builder produces consistent graphs")
            .with_graph_label(label);
        graphs.push(g);
    }
    let truth = GroundTruth {
        motif_size: 5,
        motifs,
        membership: Vec::new(),
    };
    (graphs, truth)
}

pub fn build_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (data, truth) = match spec.kind {
        DatasetKind::BaShapes => {
            let (g, t) = build_ba_shapes(spec, &mut rng);
            (GraphData::Single(g), t)
        }
        DatasetKind::BaCommunity => {
            let (g, t) = build_ba_community(spec, &mut rng);
            (GraphData::Single(g), t)
        }
        DatasetKind::TreeCycles => {
            let (g, t) = build_tree(spec, &mut rng, false);
            (GraphData::Single(g), t)
        }
        DatasetKind::TreeGrid => {
            let (g, t) = build_tree(spec, &mut rng, true);
            (GraphData::Single(g), t)
        }
        DatasetKind::Ba2Motifs => {
            let (gs, t) = build_ba_2motifs(spec, &mut rng);
            (GraphData::Many(gs), t)
        }
    };
    Ok(SyntheticDataset { data, truth })
}
