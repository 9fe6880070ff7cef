//! Structure poisoning: random injection of absent edges, plus ingestion of
//! externally produced poisoned edge lists.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::dataset::{field, for_each_row, parse_err, Dataset};
use crate::error::{Error, Result};
use crate::operators::{edge_count, edge_index, edge_pair, laplacian_apply};

/// A clean graph together with the edges an attacker added to it.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedGraph {
    pub n: usize,
    /// Full poisoned edge list — clean plus injected — canonical and sorted.
    pub edges: Vec<(usize, usize)>,
    /// Injected subset, canonical and sorted. Disjoint from the clean edges.
    pub injected: Vec<(usize, usize)>,
    /// Injected count over clean count (0 when the clean graph is the input).
    pub ptb_rate: f64,
}

impl PerturbedGraph {
    /// The unattacked graph itself.
    pub fn from_clean(ds: &Dataset) -> Self {
        PerturbedGraph { n: ds.n(), edges: ds.edges.clone(), injected: Vec::new(), ptb_rate: 0.0 }
    }

    /// Wraps an externally produced poisoned edge list; the injected set is
    /// whatever the list contains beyond the clean edges. Clean edges the
    /// list drops are treated as deleted.
    pub fn from_edge_list(ds: &Dataset, edges: Vec<(usize, usize)>) -> Result<Self> {
        let clean: HashSet<(usize, usize)> = ds.edges.iter().copied().collect();
        let mut edges = edges;
        edges.sort_unstable();
        edges.dedup();
        for &(u, v) in &edges {
            if u >= v || v >= ds.n() {
                return Err(Error::invalid("edge list", format!("edge ({u},{v}) invalid for n={}", ds.n())));
            }
        }
        let injected: Vec<(usize, usize)> = edges.iter().copied().filter(|e| !clean.contains(e)).collect();
        let ptb_rate = if ds.edges.is_empty() {
            0.0
        } else {
            injected.len() as f64 / ds.edges.len() as f64
        };
        Ok(PerturbedGraph { n: ds.n(), edges, injected, ptb_rate })
    }

    /// Edge weights of the poisoned graph: 1 at every poisoned-edge slot.
    pub fn noisy_weights(&self) -> Array1<f64> {
        let mut w = Array1::zeros(edge_count(self.n));
        for &(u, v) in &self.edges {
            w[edge_index(v, u, self.n)] = 1.0;
        }
        w
    }

    /// Dense Laplacian of the poisoned graph under unit weights.
    pub fn to_noisy_laplacian(&self) -> Array2<f64> {
        laplacian_apply(self.noisy_weights().view(), self.n)
    }
}

/// Injects `round(rate · |E|)` uniformly random absent edges (rounding
/// half away from zero). Deterministic per seed; rejection-samples edge
/// slots so every absent pair is equally likely.
pub fn random_attack(ds: &Dataset, rate: f64, seed: u64) -> Result<PerturbedGraph> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::invalid("ptb_rate", format!("{rate} must be finite and >= 0")));
    }
    let n = ds.n();
    let m = ds.edges.len();
    let count = (rate * m as f64).round() as usize;
    let capacity = edge_count(n) - m;
    if count > capacity {
        return Err(Error::invalid(
            "ptb_rate",
            format!("{count} edges requested but only {capacity} node pairs are absent"),
        ));
    }

    let mut present: HashSet<usize> = ds.edges.iter().map(|&(u, v)| edge_index(v, u, n)).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut injected_slots = Vec::with_capacity(count);
    while injected_slots.len() < count {
        let k = rng.random_range(0..edge_count(n));
        if present.insert(k) {
            injected_slots.push(k);
        }
    }

    let mut injected: Vec<(usize, usize)> = injected_slots
        .into_iter()
        .map(|k| {
            let (i, j) = edge_pair(k, n);
            (j, i)
        })
        .collect();
    injected.sort_unstable();
    let mut edges = ds.edges.clone();
    edges.extend_from_slice(&injected);
    edges.sort_unstable();

    Ok(PerturbedGraph { n, edges, injected, ptb_rate: rate })
}

/// Reads an edge list in the `edges.tsv` grammar, canonicalized and
/// deduplicated.
pub fn load_edge_list(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for_each_row(path, 2, |line, parts| {
        let u: usize = field(path, line, parts[0], "edge endpoint")?;
        let v: usize = field(path, line, parts[1], "edge endpoint")?;
        if u >= n || v >= n {
            return Err(parse_err(path, line, format!("edge ({u},{v}) endpoint outside [0, {n})")));
        }
        if u == v {
            return Err(parse_err(path, line, format!("self-loop at node {u}")));
        }
        edges.push((u.min(v), u.max(v)));
        Ok(())
    })?;
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}

/// Writes the poisoned graph: `edges.tsv` with the full edge list and
/// `injected.tsv` with only the attacker's additions.
pub fn save_perturbed(pg: &PerturbedGraph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
    let dump = |edges: &[(usize, usize)], name: &str| -> Result<()> {
        let mut text = String::new();
        for &(u, v) in edges {
            let _ = writeln!(text, "{u}\t{v}");
        }
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
    };
    dump(&pg.edges, "edges.tsv")?;
    dump(&pg.injected, "injected.tsv")
}
