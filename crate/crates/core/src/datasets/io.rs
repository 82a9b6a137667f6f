//! Plain-text graph files and the JSON dataset manifest.
//!
//! A graph file starts with a `N F` header, then `N` rows of `F`
//! space-separated reals, a blank line, and one `i j` edge per line. Labels
//! live in a sibling `<file>.labels`: either one node label per line or a
//! single `graph L` line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DatasetKind, GroundTruth, NoiseDistribution, SyntheticSpec};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::DenseMatrix;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

fn labels_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".labels");
    PathBuf::from(s)
}

pub fn save_graph(g: &Graph, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{} {}", g.num_nodes(), g.num_features()).unwrap();
    for u in 0..g.num_nodes() {
        let row: Vec<String> = g.features().row(u).iter().map(f64::to_string).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    out.push('\n');
    for &(a, b) in g.edges() {
        writeln!(out, "{a} {b}").unwrap();
    }
    fs::write(path, out)?;

    let lp = labels_path(path);
    if let Some(labels) = g.node_labels() {
        let mut s = String::new();
        for l in labels {
            writeln!(s, "{l}").unwrap();
        }
        fs::write(lp, s)?;
    } else if let Some(l) = g.graph_label() {
        fs::write(lp, format!("graph {l}\n"))?;
    } else if lp.exists() {
        fs::remove_file(lp)?;
    }
    Ok(())
}

pub fn load_graph(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing `N F` header".into()))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let [n, f] = dims.as_slice() else {
        return Err(parse_err(hline, format!("expected `N F`, found `{header}`")));
    };
    let n: usize = n
        .parse()
        .map_err(|_| parse_err(hline, format!("bad node count `{n}`")))?;
    let f: usize = f
        .parse()
        .map_err(|_| parse_err(hline, format!("bad feature count `{f}`")))?;

    let mut feats = DenseMatrix::zeros(n, f);
    for u in 0..n {
        let (lno, line) = lines.next().ok_or_else(|| {
            Error::InconsistentDimensions(format!(
                "{}: header declares {n} nodes but only {u} feature rows follow",
                path.display()
            ))
        })?;
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != f {
            return Err(Error::InconsistentDimensions(format!(
                "{}:{lno}: expected {f} features, found {}",
                path.display(),
                values.len()
            )));
        }
        for (j, v) in values.iter().enumerate() {
            let x: f64 = v
                .parse()
                .map_err(|_| parse_err(lno, format!("bad feature value `{v}`")))?;
            if !x.is_finite() {
                return Err(parse_err(lno, format!("non-finite feature value `{v}`")));
            }
            feats[(u, j)] = x;
        }
    }

    let mut edges = Vec::new();
    for (lno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [a, b] = parts.as_slice() else {
            return Err(parse_err(lno, format!("expected `i j`, found `{line}`")));
        };
        let a: usize = a
            .parse()
            .map_err(|_| parse_err(lno, format!("bad node id `{a}`")))?;
        let b: usize = b
            .parse()
            .map_err(|_| parse_err(lno, format!("bad node id `{b}`")))?;
        if a >= n || b >= n {
            return Err(parse_err(lno, format!("edge ({a}, {b}) references a node ≥ {n}")));
        }
        if a == b {
            return Err(parse_err(lno, format!("self-loop on node {a}")));
        }
        edges.push((a, b));
    }
    let mut g = Graph::new(n, edges, feats)?;

    let lp = labels_path(path);
    if lp.exists() {
        let text = fs::read_to_string(&lp)?;
        let lerr = |line: usize, message: String| Error::Parse {
            path: lp.clone(),
            line,
            message,
        };
        let rows: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        if let Some(rest) = rows.first().and_then(|(_, l)| l.strip_prefix("graph")) {
            let l = rest
                .trim()
                .parse()
                .map_err(|_| lerr(rows[0].0, format!("bad graph label `{}`", rest.trim())))?;
            g = g.with_graph_label(l);
        } else {
            let labels = rows
                .iter()
                .map(|&(lno, l)| l.parse().map_err(|_| lerr(lno, format!("bad label `{l}`"))))
                .collect::<Result<Vec<usize>>>()?;
            g = g.with_node_labels(labels)?;
        }
    }
    Ok(g)
}

/// Describes a dataset directory: graph files (relative to the manifest),
/// the build parameters, planted motifs and any injected noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub kind: Option<DatasetKind>,
    pub spec: Option<SyntheticSpec>,
    pub graphs: Vec<String>,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub ground_truth: Option<GroundTruth>,
    #[serde(default)]
    pub noisy_features: Vec<usize>,
    #[serde(default)]
    pub noisy_nodes: Vec<usize>,
    #[serde(default)]
    pub noise: Option<NoiseDistribution>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let m: Manifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported manifest schema version {}",
                m.schema_version
            )));
        }
        Ok(m)
    }

    /// Loads every listed graph, resolving paths against `dir`.
    pub fn load_graphs(&self, dir: &Path) -> Result<Vec<Graph>> {
        self.graphs.iter().map(|p| load_graph(&dir.join(p))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{build_synthetic, SyntheticSpec};

    #[test]
    fn synthetic_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = SyntheticSpec::defaults(DatasetKind::BaCommunity);
        spec.base_size = 30;
        spec.num_motifs = 4;
        let ds = build_synthetic(&spec).unwrap();
        let g = ds.data.single().unwrap();
        let path = dir.path().join("g.txt");
        save_graph(g, &path).unwrap();
        assert_eq!(&load_graph(&path).unwrap(), g);
    }

    #[test]
    fn graph_labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Graph::new(2, [(0, 1)], DenseMatrix::zeros(2, 1))
            .unwrap()
            .with_graph_label(1);
        let path = dir.path().join("g.txt");
        save_graph(&g, &path).unwrap();
        assert_eq!(load_graph(&path).unwrap(), g);
    }

    #[test]
    fn empty_edge_list_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        fs::write(&path, "3 1\n0.5\n1\n2\n\n").unwrap();
        let g = load_graph(&path).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (3, 0));
    }

    #[test]
    fn out_of_range_edge_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        fs::write(&path, "2 1\n0\n1\n\n0 2\n").unwrap();
        match load_graph(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn short_feature_row_is_inconsistent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        fs::write(&path, "2 2\n0 1\n1\n\n").unwrap();
        assert!(matches!(load_graph(&path), Err(Error::InconsistentDimensions(_))));
        fs::write(&path, "3 1\n0\n1\n").unwrap();
        assert!(matches!(load_graph(&path), Err(Error::InconsistentDimensions(_))));
    }
}
