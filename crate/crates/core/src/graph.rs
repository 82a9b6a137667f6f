//! Undirected, unweighted graphs with dense node features.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Sorted list of distinct node ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct NodeSet(Vec<usize>);

impl NodeSet {
    pub fn new(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self(ids)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.iter().all(|id| other.contains(id))
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// How [`Graph::shortest_path_with`] breaks ties between equally short paths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathChoice {
    /// Smallest node-id sequence.
    #[default]
    Lexicographic,
    /// Uniform over all shortest paths.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    features: DenseMatrix,
    node_labels: Option<Vec<usize>>,
    graph_label: Option<usize>,
}

fn canonical(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Graph {
    /// Builds a graph; duplicate edges (in either orientation) collapse to one.
    pub fn new<I>(num_nodes: usize, edges: I, features: DenseMatrix) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if features.rows() != num_nodes {
            return Err(Error::InconsistentDimensions(format!(
                "{} feature rows for {num_nodes} nodes",
                features.rows()
            )));
        }
        let mut canon = Vec::new();
        for (a, b) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) references a node outside 0..{num_nodes}"
                )));
            }
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop on node {a}")));
            }
            canon.push(canonical(a, b));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Self::from_canonical(num_nodes, canon, features))
    }

    fn from_canonical(num_nodes: usize, edges: Vec<(usize, usize)>, features: DenseMatrix) -> Self {
        let mut adjacency = vec![Vec::new(); num_nodes];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Self {
            num_nodes,
            edges,
            adjacency,
            features,
            node_labels: None,
            graph_label: None,
        }
    }

    pub fn with_node_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.num_nodes {
            return Err(Error::InconsistentDimensions(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.num_nodes
            )));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn with_graph_label(mut self, label: usize) -> Self {
        self.graph_label = Some(label);
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical `(i, j)` pairs with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.num_nodes && self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        self.node_labels.as_deref()
    }

    pub fn graph_label(&self) -> Option<usize> {
        self.graph_label
    }

    /// Replaces the feature matrix, keeping structure and labels.
    pub fn with_features(&self, features: DenseMatrix) -> Result<Self> {
        if features.rows() != self.num_nodes {
            return Err(Error::InconsistentDimensions(format!(
                "{} feature rows for {} nodes",
                features.rows(),
                self.num_nodes
            )));
        }
        let mut g = self.clone();
        g.features = features;
        Ok(g)
    }

    pub fn features_mut(&mut self) -> &mut DenseMatrix {
        &mut self.features
    }

    /// Hop distances from `source`, `None` for unreachable nodes. The search
    /// stops expanding beyond `max_depth` when given.
    pub fn bfs_distances(&self, source: usize, max_depth: Option<usize>) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_nodes];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            if max_depth.is_some_and(|m| d >= m) {
                continue;
            }
            for &w in &self.adjacency[u] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Nodes other than `v` within `k` hops, ascending.
    pub fn k_hop_neighbors(&self, v: usize, k: usize) -> NodeSet {
        let dist = self.bfs_distances(v, Some(k));
        NodeSet(
            (0..self.num_nodes)
                .filter(|&u| u != v && dist[u].is_some())
                .collect(),
        )
    }

    /// Lexicographically smallest minimum-hop path from `v` to `w`.
    pub fn shortest_path(&self, v: usize, w: usize) -> Result<Vec<usize>> {
        self.path_from_distances(v, w, &self.bfs_distances(w, None), |cands, _| cands[0])
    }

    /// Minimum-hop path from `v` to `w`, breaking ties as `choice` says.
    pub fn shortest_path_with<R: Rng + ?Sized>(
        &self,
        v: usize,
        w: usize,
        choice: PathChoice,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        let dist = self.bfs_distances(w, None);
        match choice {
            PathChoice::Lexicographic => self.path_from_distances(v, w, &dist, |c, _| c[0]),
            PathChoice::Random => {
                let counts = self.path_counts(w, &dist);
                self.path_from_distances(v, w, &dist, |cands, _| {
                    let total: f64 = cands.iter().map(|&u| counts[u]).sum();
                    let mut pick = rng.random::<f64>() * total;
                    for &u in cands {
                        pick -= counts[u];
                        if pick < 0.0 {
                            return u;
                        }
                    }
                    *cands.last().unwrap()
                })
            }
        }
    }

    /// Number of shortest paths from each node to the BFS root of `dist`.
    fn path_counts(&self, root: usize, dist: &[Option<usize>]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..self.num_nodes).filter(|&u| dist[u].is_some()).collect();
        order.sort_by_key(|&u| dist[u]);
        let mut counts = vec![0.0; self.num_nodes];
        counts[root] = 1.0;
        for &u in order.iter().skip(1) {
            let du = dist[u].unwrap();
            counts[u] = self.adjacency[u]
                .iter()
                .filter(|&&x| dist[x] == Some(du - 1))
                .map(|&x| counts[x])
                .sum();
        }
        counts
    }

    fn path_from_distances<F>(&self, v: usize, w: usize, dist: &[Option<usize>], mut pick: F) -> Result<Vec<usize>>
    where
        F: FnMut(&[usize], usize) -> usize,
    {
        let Some(mut remaining) = dist[v] else {
            return Err(Error::NoPath { from: v, to: w });
        };
        let mut path = vec![v];
        let mut cur = v;
        let mut cands = Vec::new();
        while remaining > 0 {
            cands.clear();
            cands.extend(
                self.adjacency[cur]
                    .iter()
                    .copied()
                    .filter(|&x| dist[x] == Some(remaining - 1)),
            );
            cur = pick(&cands, cur);
            path.push(cur);
            remaining -= 1;
        }
        Ok(path)
    }

    /// Copy of the graph with every edge touching `excluded` removed.
    pub fn isolate_nodes(&self, excluded: &NodeSet) -> Graph {
        if excluded.is_empty() {
            return self.clone();
        }
        let mut mark = vec![false; self.num_nodes];
        for u in excluded.iter() {
            mark[u] = true;
        }
        let edges = self
            .edges
            .iter()
            .copied()
            .filter(|&(a, b)| !mark[a] && !mark[b])
            .collect();
        let mut g = Self::from_canonical(self.num_nodes, edges, self.features.clone());
        g.node_labels = self.node_labels.clone();
        g.graph_label = self.graph_label;
        g
    }

    /// Copy of the graph with extra edges added.
    pub fn with_added_edges<I>(&self, extra: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Graph::new(
            self.num_nodes,
            self.edges.iter().copied().chain(extra),
            self.features.clone(),
        )?;
        g.node_labels = self.node_labels.clone();
        g.graph_label = self.graph_label;
        Ok(g)
    }

    /// Subgraph induced by `nodes`, relabelled `0..nodes.len()` in the given
    /// order. Labels follow their nodes.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let mut local = vec![usize::MAX; self.num_nodes];
        for (i, &u) in nodes.iter().enumerate() {
            if u >= self.num_nodes {
                return Err(Error::InvalidArgument(format!("node {u} out of range")));
            }
            if local[u] != usize::MAX {
                return Err(Error::InvalidArgument(format!("node {u} listed twice")));
            }
            local[u] = i;
        }
        let mut edges = Vec::new();
        for &(a, b) in &self.edges {
            if local[a] != usize::MAX && local[b] != usize::MAX {
                edges.push(canonical(local[a], local[b]));
            }
        }
        edges.sort_unstable();
        let mut feats = DenseMatrix::zeros(nodes.len(), self.num_features());
        for (i, &u) in nodes.iter().enumerate() {
            feats.row_mut(i).copy_from_slice(self.features.row(u));
        }
        let mut g = Self::from_canonical(nodes.len(), edges, feats);
        g.node_labels = self
            .node_labels
            .as_ref()
            .map(|l| nodes.iter().map(|&u| l[u]).collect());
        g.graph_label = self.graph_label;
        Ok(g)
    }

    /// Relabels node `u` as `perm[u]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        let mut inverse = vec![0; self.num_nodes];
        for (u, &p) in perm.iter().enumerate() {
            inverse[p] = u;
        }
        let mut g = self.induced_subgraph(&inverse)?;
        g.graph_label = self.graph_label;
        Ok(g)
    }

    /// Number of connected components.
    pub fn num_components(&self) -> usize {
        let mut seen = vec![false; self.num_nodes];
        let mut count = 0;
        for s in 0..self.num_nodes {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(u) = stack.pop() {
                for &w in &self.adjacency[u] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }
}
