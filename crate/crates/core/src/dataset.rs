//! Node-classification datasets on disk, largest-connected-component
//! extraction, and seeded train/validation/test splits.
//!
//! Directory layout (UTF-8, LF line endings, `#`-prefixed comment lines
//! ignored everywhere):
//!
//! - `features.tsv` — sparse triplets `node_id<TAB>feature_id<TAB>value`;
//!   unlisted entries are zero.
//! - `edges.tsv` — `src<TAB>dst`, undirected, 0-based; duplicates and
//!   orientation are normalized away on load.
//! - `labels.tsv` — `node_id<TAB>label`; exactly one line per node, ids
//!   covering `[0, n)`. This file defines the node count.
//! - `split.tsv` (optional) — `node_id<TAB>{train|val|test}`; when present
//!   it overrides the seeded split.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::operators::edge_index;

/// An undirected node-classification dataset with dense features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n × d` feature matrix.
    pub features: Array2<f64>,
    /// One label per node, values in `[0, num_classes)`.
    pub labels: Vec<usize>,
    /// Deduplicated undirected edges, canonicalized to `(min, max)` and
    /// sorted.
    pub edges: Vec<(usize, usize)>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    /// Unit edge-weight vector of this graph: 1 at every edge slot.
    pub fn unit_weights(&self) -> Array1<f64> {
        let n = self.n();
        let mut w = Array1::zeros(crate::operators::edge_count(n));
        for &(u, v) in &self.edges {
            w[edge_index(v, u, n)] = 1.0;
        }
        w
    }

    /// Checks the structural invariants; every constructor runs this.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.labels.len() != n {
            return Err(Error::shape(
                "dataset",
                format!("{} labels for {} feature rows", self.labels.len(), n),
            ));
        }
        for (&label, node) in self.labels.iter().zip(0..) {
            if label >= self.num_classes {
                return Err(Error::invalid(
                    "dataset",
                    format!("label {label} of node {node} outside [0, {})", self.num_classes),
                ));
            }
        }
        let mut prev: Option<(usize, usize)> = None;
        for &(u, v) in &self.edges {
            if u >= v {
                return Err(Error::invalid("dataset", format!("edge ({u},{v}) not canonical")));
            }
            if v >= n {
                return Err(Error::invalid("dataset", format!("edge ({u},{v}) out of range")));
            }
            if prev == Some((u, v)) {
                return Err(Error::invalid("dataset", format!("duplicate edge ({u},{v})")));
            }
            if let Some(p) = prev {
                if p > (u, v) {
                    return Err(Error::invalid("dataset", "edge list not sorted".to_string()));
                }
            }
            prev = Some((u, v));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { phase: "dataset features".into() });
        }
        Ok(())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

pub(crate) fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Applies `f` to every non-comment, non-blank line split on tabs.
pub(crate) fn for_each_row(
    path: &Path,
    cols: usize,
    mut f: impl FnMut(usize, &[&str]) -> Result<()>,
) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split('\t').collect();
        if parts.len() != cols {
            return Err(parse_err(
                path,
                line,
                format!("expected {cols} tab-separated fields, found {}", parts.len()),
            ));
        }
        f(line, &parts)?;
    }
    Ok(())
}

pub(crate) fn field<T: FromStr>(path: &Path, line: usize, raw: &str, what: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {what} from {raw:?}")))
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    // labels.tsv defines the node count: one line per node, ids covering
    // [0, n) exactly.
    let labels_path = dir.join("labels.tsv");
    let mut label_rows: Vec<(usize, usize)> = Vec::new();
    for_each_row(&labels_path, 2, |line, parts| {
        let node: usize = field(&labels_path, line, parts[0], "node id")?;
        let label: usize = field(&labels_path, line, parts[1], "label")?;
        label_rows.push((node, label));
        Ok(())
    })?;
    let n = label_rows.len();
    let mut labels = vec![usize::MAX; n];
    for (node, label) in label_rows {
        if node >= n {
            return Err(Error::invalid(
                "dataset",
                format!("labels.tsv: node id {node} outside [0, {n}) — ids must cover every node exactly once"),
            ));
        }
        if labels[node] != usize::MAX {
            return Err(Error::invalid("dataset", format!("labels.tsv: node {node} labeled twice")));
        }
        labels[node] = label;
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);

    let features_path = dir.join("features.tsv");
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut d = 0usize;
    for_each_row(&features_path, 3, |line, parts| {
        let node: usize = field(&features_path, line, parts[0], "node id")?;
        let feat: usize = field(&features_path, line, parts[1], "feature id")?;
        let value: f64 = field(&features_path, line, parts[2], "feature value")?;
        if node >= n {
            return Err(parse_err(&features_path, line, format!("node id {node} outside [0, {n})")));
        }
        if !value.is_finite() {
            return Err(parse_err(&features_path, line, "feature value must be finite"));
        }
        d = d.max(feat + 1);
        triplets.push((node, feat, value));
        Ok(())
    })?;
    let mut features = Array2::zeros((n, d));
    let mut filled: HashMap<(usize, usize), ()> = HashMap::new();
    for (node, feat, value) in triplets {
        if filled.insert((node, feat), ()).is_some() {
            return Err(Error::invalid(
                "dataset",
                format!("features.tsv: entry ({node},{feat}) appears more than once"),
            ));
        }
        features[[node, feat]] = value;
    }

    let edges_path = dir.join("edges.tsv");
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for_each_row(&edges_path, 2, |line, parts| {
        let u: usize = field(&edges_path, line, parts[0], "edge endpoint")?;
        let v: usize = field(&edges_path, line, parts[1], "edge endpoint")?;
        if u >= n || v >= n {
            return Err(parse_err(&edges_path, line, format!("edge ({u},{v}) endpoint outside [0, {n})")));
        }
        if u == v {
            return Err(parse_err(&edges_path, line, format!("self-loop at node {u}")));
        }
        edges.push((u.min(v), u.max(v)));
        Ok(())
    })?;
    edges.sort_unstable();
    edges.dedup();

    let ds = Dataset { features, labels, edges, num_classes };
    ds.validate()?;
    Ok(ds)
}

/// Writes a dataset back out in the directory format; `load_dataset` of the
/// result reproduces the input exactly.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    ds.validate()?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let (n, d) = (ds.n(), ds.d());

    let mut features = String::new();
    let mut last_column_seen = false;
    for i in 0..n {
        for j in 0..d {
            let v = ds.features[[i, j]];
            if v != 0.0 {
                // f64 Display is shortest-round-trip, so reloads are exact.
                let _ = writeln!(features, "{i}\t{j}\t{v}");
                last_column_seen |= j == d - 1;
            }
        }
    }
    if d > 0 && !last_column_seen {
        // Pin the feature dimension with an explicit zero entry.
        let _ = writeln!(features, "0\t{}\t0", d - 1);
    }
    let fpath = dir.join("features.tsv");
    fs::write(&fpath, features).map_err(|e| io_err(&fpath, e))?;

    let mut edges = String::new();
    for &(u, v) in &ds.edges {
        let _ = writeln!(edges, "{u}\t{v}");
    }
    let epath = dir.join("edges.tsv");
    fs::write(&epath, edges).map_err(|e| io_err(&epath, e))?;

    let mut labels = String::new();
    for (i, &label) in ds.labels.iter().enumerate() {
        let _ = writeln!(labels, "{i}\t{label}");
    }
    let lpath = dir.join("labels.tsv");
    fs::write(&lpath, labels).map_err(|e| io_err(&lpath, e))?;
    Ok(())
}

/// Induced subgraph on the largest connected component, node indices
/// compacted to `[0, n′)` in original order. Ties between equal-size
/// components go to the one containing the smallest original index.
pub fn largest_connected_component(ds: &Dataset) -> Result<Dataset> {
    let n = ds.n();
    if n == 0 {
        return Err(Error::Empty("graph"));
    }
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in &ds.edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    // Iterative BFS in ascending start order; strict comparison keeps the
    // first (smallest-index) component on ties.
    let mut component = vec![usize::MAX; n];
    let mut best_root = 0;
    let mut best_size = 0;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        component[start] = start;
        queue.push_back(start);
        let mut size = 0;
        while let Some(u) = queue.pop_front() {
            size += 1;
            for &v in &adj[u] {
                if component[v] == usize::MAX {
                    component[v] = start;
                    queue.push_back(v);
                }
            }
        }
        if size > best_size {
            best_size = size;
            best_root = start;
        }
    }

    let keep: Vec<usize> = (0..n).filter(|&v| component[v] == best_root).collect();
    let mut new_index = vec![usize::MAX; n];
    for (new, &old) in keep.iter().enumerate() {
        new_index[old] = new;
    }

    let mut features = Array2::zeros((keep.len(), ds.d()));
    for (new, &old) in keep.iter().enumerate() {
        features.row_mut(new).assign(&ds.features.row(old));
    }
    let labels: Vec<usize> = keep.iter().map(|&old| ds.labels[old]).collect();
    // The ascending reindex map preserves both edge orientation and order.
    let edges: Vec<(usize, usize)> = ds
        .edges
        .iter()
        .filter(|&&(u, v)| component[u] == best_root && component[v] == best_root)
        .map(|&(u, v)| (new_index[u], new_index[v]))
        .collect();
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);

    let out = Dataset { features, labels, edges, num_classes };
    out.validate()?;
    Ok(out)
}

/// Disjoint train/validation/test node sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Uniform random partition of `[0, n)` with `floor(ratio·n)` train and
/// validation nodes and the remainder in test. Deterministic per seed.
pub fn make_splits(n: usize, ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (tr, va, te) = ratios;
    if !(tr > 0.0 && va > 0.0 && te > 0.0) {
        return Err(Error::invalid("split ratios", format!("{ratios:?} must all be positive")));
    }
    if ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("split ratios", format!("{ratios:?} must sum to 1")));
    }
    let n_train = (tr * n as f64).floor() as usize;
    let n_val = (va * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let mut train: Vec<usize> = order[..n_train].to_vec();
    let mut val: Vec<usize> = order[n_train..n_train + n_val].to_vec();
    let mut test: Vec<usize> = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, val, test })
}

/// Reads an explicit `split.tsv`, which overrides the seeded partition.
pub fn load_split(path: &Path, n: usize) -> Result<Split> {
    let mut assigned = vec![false; n];
    let mut split = Split { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for_each_row(path, 2, |line, parts| {
        let node: usize = field(path, line, parts[0], "node id")?;
        if node >= n {
            return Err(parse_err(path, line, format!("node id {node} outside [0, {n})")));
        }
        if assigned[node] {
            return Err(parse_err(path, line, format!("node {node} assigned twice")));
        }
        assigned[node] = true;
        match parts[1] {
            "train" => split.train.push(node),
            "val" => split.val.push(node),
            "test" => split.test.push(node),
            other => return Err(parse_err(path, line, format!("unknown split tag {other:?}"))),
        }
        Ok(())
    })?;
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Divides every row by its sum (when nonzero) — the usual bag-of-words
/// normalization, available behind a config flag.
pub fn row_normalize(features: &mut Array2<f64>) {
    for mut row in features.rows_mut() {
        let sum: f64 = row.sum();
        if sum != 0.0 {
            row.mapv_inplace(|v| v / sum);
        }
    }
}
