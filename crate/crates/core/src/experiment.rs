//! Experiment orchestration: dataset loading, largest-component extraction,
//! splitting, optional poisoning, and one of three training modes, with
//! structured artifacts so any run can be replayed from its report alone.
//!
//! All randomness flows from one root seed split into named substreams
//! (`split`, `attack`, `init`, `dropout`), so reseeding one component never
//! shifts the draws of the others.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::attack::{load_edge_list, random_attack, save_perturbed, PerturbedGraph};
use crate::dataset::{
    largest_connected_component, load_dataset, load_split, make_splits, row_normalize, Dataset,
};
use crate::denoise::{stage1_solve, DenoiseProblem, LinearTerm, SolveTrace};
use crate::error::{Error, Result};
use crate::gcn::{accuracy, gcn_forward, normalize_weights, ForwardMode, GcnParams};
use crate::joint::{joint_train, JointConfig};
use crate::operators::edge_pair;
use crate::rng::{stream, stream_seed};
use crate::train::{train_gcn, EpochRecord, OptimizerKind, TrainConfig};

/// Which defense (if any) wraps the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Train directly on the (possibly poisoned) graph.
    GcnOnly,
    /// Denoise the graph first, then train on the result.
    TwoStage,
    /// Alternate weight and parameter updates.
    Joint,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn-only" => Ok(Mode::GcnOnly),
            "two-stage" => Ok(Mode::TwoStage),
            "joint" => Ok(Mode::Joint),
            other => {
                Err(Error::invalid("mode", format!("{other:?} is not gcn-only, two-stage or joint")))
            }
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::GcnOnly => "gcn-only",
            Mode::TwoStage => "two-stage",
            Mode::Joint => "joint",
        })
    }
}

/// How the clean graph is poisoned before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    None,
    /// Inject `ptb_rate · m` random absent edges.
    Random,
    /// Replace the edge set with an externally supplied list.
    ExternalEdgelist,
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AttackKind::None),
            "random" => Ok(AttackKind::Random),
            "external-edgelist" => Ok(AttackKind::ExternalEdgelist),
            other => Err(Error::invalid(
                "attack",
                format!("{other:?} is not none, random or external-edgelist"),
            )),
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackKind::None => "none",
            AttackKind::Random => "random",
            AttackKind::ExternalEdgelist => "external-edgelist",
        })
    }
}

/// One run, fully specified. Serializes into the report so the run can be
/// replayed byte-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Directory holding `features.tsv`, `edges.tsv`, `labels.tsv`.
    pub dataset: PathBuf,
    pub output_dir: PathBuf,
    pub mode: Mode,
    pub attack: AttackKind,
    /// Injected-to-clean edge ratio for the random attack.
    pub ptb_rate: f64,
    /// Poisoned edge list, required when `attack = external-edgelist`.
    pub edgelist: Option<PathBuf>,
    /// Optional fixed split file; omitted, a seeded 10/10/80 split is drawn.
    pub split_file: Option<PathBuf>,
    pub normalize_features: bool,
    pub seed: u64,
    pub alpha: f64,
    pub beta: f64,
    /// Denoiser iteration budget (two-stage).
    pub stage1_epochs: usize,
    pub stage1_tol: f64,
    /// Classifier epochs; also the joint loop's outer epoch count.
    pub epochs: usize,
    /// Parameter updates per joint outer epoch; defaults to 1, or 2 under
    /// the random attack.
    pub inner_t: Option<usize>,
    pub eta_theta: f64,
    /// Target weight-step size; the joint surrogate curvature is derived
    /// from it. Defaults to 1e-2.
    pub eta_w: Option<f64>,
    pub hidden: usize,
    pub dropout: f64,
    pub weight_decay: f64,
    pub optimizer: OptimizerKind,
    pub linear_term: LinearTerm,
    pub early_stop_patience: usize,
    /// Learned weights at or below this are left out of `learned_graph.tsv`.
    pub weight_eps: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: PathBuf::new(),
            output_dir: PathBuf::from("runs/latest"),
            mode: Mode::GcnOnly,
            attack: AttackKind::None,
            ptb_rate: 0.0,
            edgelist: None,
            split_file: None,
            normalize_features: false,
            seed: 0,
            alpha: 1.0,
            beta: 0.1,
            stage1_epochs: 200,
            stage1_tol: 1e-6,
            epochs: 200,
            inner_t: None,
            eta_theta: 0.01,
            eta_w: None,
            hidden: 16,
            dropout: 0.5,
            weight_decay: 5e-4,
            optimizer: OptimizerKind::Adam,
            linear_term: LinearTerm::Exact,
            early_stop_patience: 200,
            weight_eps: 1e-8,
        }
    }
}

fn parse_value<T: FromStr>(key: &'static str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| Error::Invalid { what: key, msg: format!("{value:?}: {e}") })
}

fn parse_optional<T: FromStr>(key: &'static str, value: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    if value == "none" { Ok(None) } else { parse_value(key, value).map(Some) }
}

impl ExperimentConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = PathBuf::from(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "mode" => self.mode = value.parse()?,
            "attack" => self.attack = value.parse()?,
            "ptb_rate" => self.ptb_rate = parse_value("ptb_rate", value)?,
            "edgelist" => {
                self.edgelist = if value == "none" { None } else { Some(PathBuf::from(value)) }
            }
            "split_file" => {
                self.split_file = if value == "none" { None } else { Some(PathBuf::from(value)) }
            }
            "normalize_features" => self.normalize_features = parse_value("normalize_features", value)?,
            "seed" => self.seed = parse_value("seed", value)?,
            "alpha" => self.alpha = parse_value("alpha", value)?,
            "beta" => self.beta = parse_value("beta", value)?,
            "stage1_epochs" => self.stage1_epochs = parse_value("stage1_epochs", value)?,
            "stage1_tol" => self.stage1_tol = parse_value("stage1_tol", value)?,
            "epochs" => self.epochs = parse_value("epochs", value)?,
            "inner_t" => self.inner_t = parse_optional("inner_t", value)?,
            "eta_theta" => self.eta_theta = parse_value("eta_theta", value)?,
            "eta_w" => self.eta_w = parse_optional("eta_w", value)?,
            "hidden" => self.hidden = parse_value("hidden", value)?,
            "dropout" => self.dropout = parse_value("dropout", value)?,
            "weight_decay" => self.weight_decay = parse_value("weight_decay", value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "linear_term" => self.linear_term = value.parse()?,
            "early_stop_patience" => {
                self.early_stop_patience = parse_value("early_stop_patience", value)?
            }
            "weight_eps" => self.weight_eps = parse_value("weight_eps", value)?,
            other => {
                return Err(Error::Invalid {
                    what: "config key",
                    msg: format!("{other:?} is not a recognized setting"),
                })
            }
        }
        Ok(())
    }

    /// Loads a flat `key = value` file; `#` lines and blanks are skipped.
    pub fn from_kv_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        let mut cfg = ExperimentConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.as_os_str().is_empty() {
            return Err(Error::invalid("dataset", "path must be set".to_string()));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::invalid("alpha", format!("{} must be finite and > 0", self.alpha)));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::invalid("beta", format!("{} must be finite and >= 0", self.beta)));
        }
        if !self.ptb_rate.is_finite() || self.ptb_rate < 0.0 {
            return Err(Error::invalid("ptb_rate", format!("{} must be finite and >= 0", self.ptb_rate)));
        }
        for (name, count) in [
            ("epochs", self.epochs),
            ("stage1_epochs", self.stage1_epochs),
            ("hidden", self.hidden),
            ("early_stop_patience", self.early_stop_patience),
            ("inner_t", self.inner_t.unwrap_or(1)),
        ] {
            if count == 0 {
                return Err(Error::Invalid { what: "config", msg: format!("{name} must be >= 1") });
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout", format!("{} outside [0, 1)", self.dropout)));
        }
        if !self.eta_theta.is_finite() || self.eta_theta <= 0.0 {
            return Err(Error::invalid("eta_theta", format!("{} must be finite and > 0", self.eta_theta)));
        }
        if let Some(eta) = self.eta_w {
            if !eta.is_finite() || eta <= 0.0 {
                return Err(Error::invalid("eta_w", format!("{eta} must be finite and > 0")));
            }
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::invalid("weight_decay", format!("{} must be finite and >= 0", self.weight_decay)));
        }
        if !self.stage1_tol.is_finite() || self.stage1_tol < 0.0 {
            return Err(Error::invalid("stage1_tol", format!("{} must be finite and >= 0", self.stage1_tol)));
        }
        if !self.weight_eps.is_finite() || self.weight_eps < 0.0 {
            return Err(Error::invalid("weight_eps", format!("{} must be finite and >= 0", self.weight_eps)));
        }
        if self.attack == AttackKind::ExternalEdgelist && self.edgelist.is_none() {
            return Err(Error::invalid("edgelist", "required for attack = external-edgelist".to_string()));
        }
        Ok(())
    }

    /// Parameter updates per joint outer epoch after defaulting.
    fn resolved_inner_t(&self) -> usize {
        self.inner_t.unwrap_or(if self.attack == AttackKind::Random { 2 } else { 1 })
    }

    /// Surrogate curvature giving the requested weight-step size, floored
    /// at zero where the bare `1/(2n)` step is already slower.
    fn resolved_l2_prime(&self, n: usize) -> f64 {
        let eta = self.eta_w.unwrap_or(1e-2);
        (1.0 / eta - 2.0 * n as f64).max(0.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetStats {
    /// Nodes in the file, before component extraction.
    pub nodes_loaded: usize,
    pub nodes: usize,
    pub features: usize,
    pub classes: usize,
    pub clean_edges: usize,
    pub injected_edges: usize,
    /// Injected-to-clean ratio actually realized.
    pub ptb_rate: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Accuracies {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage1Summary {
    pub iterations: usize,
    pub final_objective: f64,
    pub final_kkt: f64,
    /// Edges above `weight_eps` in the learned graph.
    pub kept_edges: usize,
}

/// Wall-clock seconds per phase; consecutive phases partition the run, so
/// they sum to the total.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timings {
    pub phases: Vec<(String, f64)>,
    pub total_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub dataset_stats: DatasetStats,
    /// Metrics of the selected best-validation snapshot.
    pub accuracies: Accuracies,
    pub best_epoch: usize,
    pub stage1: Option<Stage1Summary>,
    pub timings: Timings,
    pub artifacts: Vec<PathBuf>,
    pub notes: Vec<String>,
}

/// Marks phase boundaries; every interval between marks becomes a phase, so
/// the recorded phases partition the wall clock exactly.
struct PhaseClock {
    start: Instant,
    last: Instant,
    phases: Vec<(String, f64)>,
}

impl PhaseClock {
    fn new() -> Self {
        let now = Instant::now();
        PhaseClock { start: now, last: now, phases: Vec::new() }
    }

    fn mark(&mut self, name: &str) {
        let now = Instant::now();
        self.phases.push((name.to_string(), now.duration_since(self.last).as_secs_f64()));
        self.last = now;
    }

    fn finish(self) -> Timings {
        Timings { total_s: self.start.elapsed().as_secs_f64(), phases: self.phases }
    }
}

/// Accuracy of a `(θ, w)` pair on the given nodes: the graph is rebuilt
/// from the weights and scored deterministically.
pub fn evaluate(
    params: &GcnParams,
    w: ArrayView1<f64>,
    ds: &Dataset,
    nodes: &[usize],
) -> Result<f64> {
    let ahat = normalize_weights(w, ds.n())?;
    let cache = gcn_forward(params, &ahat, &ds.features, ForwardMode::Eval)?;
    accuracy(&cache.logits, &ds.labels, nodes)
}

#[derive(Serialize)]
struct IterRecord {
    iter: usize,
    objective: f64,
    kkt_residual: f64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        let line = serde_json::to_string(row)
            .map_err(|e| Error::Invalid { what: "trace record", msg: e.to_string() })?;
        out.push_str(&line);
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Writes the denoiser trace as line-delimited JSON, one record per iterate
/// (the starting point included): `iter`, `objective`, `kkt_residual`.
pub fn write_solve_trace(path: &Path, trace: &SolveTrace) -> Result<()> {
    let rows: Vec<IterRecord> = trace
        .objectives
        .iter()
        .zip(&trace.kkt_residuals)
        .enumerate()
        .map(|(iter, (&objective, &kkt_residual))| IterRecord { iter, objective, kkt_residual })
        .collect();
    write_jsonl(path, &rows)
}

/// Writes `i<TAB>j<TAB>weight` for every slot above the threshold; returns
/// how many edges were kept.
pub fn write_learned_graph(path: &Path, w: &Array1<f64>, n: usize, eps: f64) -> Result<usize> {
    let mut out = String::new();
    let mut kept = 0;
    for (k, &weight) in w.iter().enumerate() {
        if weight > eps {
            let (i, j) = edge_pair(k, n);
            out.push_str(&format!("{j}\t{i}\t{weight}\n"));
            kept += 1;
        }
    }
    fs::write(path, out).map_err(io_err(path))?;
    Ok(kept)
}

struct FitOutcome {
    learned_w: Option<Array1<f64>>,
    solve_trace: Option<SolveTrace>,
    trace: Vec<EpochRecord>,
    best_epoch: usize,
}

/// Runs one experiment end to end and writes its artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut clock = PhaseClock::new();
    let mut notes = Vec::new();

    let raw = load_dataset(&cfg.dataset).map_err(Error::in_phase("load"))?;
    let nodes_loaded = raw.n();
    let mut ds = largest_connected_component(&raw).map_err(Error::in_phase("load"))?;
    if cfg.normalize_features {
        row_normalize(&mut ds.features);
        notes.push("features row-normalized before use".to_string());
    } else {
        notes.push("features used as-is (no row normalization)".to_string());
    }
    clock.mark("load");

    let n = ds.n();
    let split = match &cfg.split_file {
        Some(path) => {
            notes.push(format!("split loaded from {}", path.display()));
            load_split(path, n)
        }
        None => make_splits(n, (0.1, 0.1, 0.8), stream_seed(cfg.seed, "split")),
    }
    .map_err(Error::in_phase("prepare"))?;
    let pg = match cfg.attack {
        AttackKind::None => PerturbedGraph::from_clean(&ds),
        AttackKind::Random => random_attack(&ds, cfg.ptb_rate, stream_seed(cfg.seed, "attack"))
            .map_err(Error::in_phase("prepare"))?,
        AttackKind::ExternalEdgelist => {
            let path = cfg.edgelist.as_ref().expect("validated above");
            let edges = load_edge_list(path, n).map_err(Error::in_phase("prepare"))?;
            PerturbedGraph::from_edge_list(&ds, edges).map_err(Error::in_phase("prepare"))?
        }
    };
    clock.mark("prepare");

    notes.push(format!(
        "weight decay {} applied to the first layer in every loss and gradient",
        cfg.weight_decay
    ));
    let params0 = GcnParams::init(ds.d(), cfg.hidden, ds.num_classes, &mut stream(cfg.seed, "init"));
    let mut dropout_rng = stream(cfg.seed, "dropout");
    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        lr: cfg.eta_theta,
        optimizer: cfg.optimizer,
        dropout: cfg.dropout,
        weight_decay: cfg.weight_decay,
        early_stop_patience: cfg.early_stop_patience,
    };

    let fit = match cfg.mode {
        Mode::GcnOnly => {
            let ahat =
                normalize_weights(pg.noisy_weights().view(), n).map_err(Error::in_phase("train"))?;
            let out = train_gcn(
                &ahat,
                &ds.features,
                &ds.labels,
                &split,
                &train_cfg,
                params0,
                &mut dropout_rng,
            )
            .map_err(Error::in_phase("train"))?;
            clock.mark("train");
            FitOutcome {
                learned_w: None,
                solve_trace: None,
                trace: out.trace,
                best_epoch: out.best_epoch,
            }
        }
        Mode::TwoStage => {
            let phi_noisy = pg.to_noisy_laplacian();
            let problem =
                DenoiseProblem::new(&phi_noisy, &ds.features, cfg.alpha, cfg.beta, cfg.linear_term)
                    .map_err(Error::in_phase("stage1"))?;
            let (w, solve_trace) = stage1_solve(
                &problem,
                pg.noisy_weights().view(),
                cfg.stage1_epochs,
                cfg.stage1_tol,
            )
            .map_err(Error::in_phase("stage1"))?;
            clock.mark("stage1");
            let ahat = normalize_weights(w.view(), n).map_err(Error::in_phase("train"))?;
            let out = train_gcn(
                &ahat,
                &ds.features,
                &ds.labels,
                &split,
                &train_cfg,
                params0,
                &mut dropout_rng,
            )
            .map_err(Error::in_phase("train"))?;
            clock.mark("train");
            FitOutcome {
                learned_w: Some(w),
                solve_trace: Some(solve_trace),
                trace: out.trace,
                best_epoch: out.best_epoch,
            }
        }
        Mode::Joint => {
            let inner_t = cfg.resolved_inner_t();
            if cfg.inner_t.is_none() {
                notes.push(format!("inner_t defaulted to {inner_t} for attack = {}", cfg.attack));
            }
            let l2_prime = cfg.resolved_l2_prime(n);
            notes.push(format!("joint weight step 1/(2n + L2') with L2' = {l2_prime}"));
            notes.push("classifier gradient in w taken with dropout off".to_string());
            let joint_cfg = JointConfig {
                alpha: cfg.alpha,
                beta: cfg.beta,
                l2_prime,
                eta_theta: cfg.eta_theta,
                outer_epochs: cfg.epochs,
                inner_t,
                optimizer: cfg.optimizer,
                dropout: cfg.dropout,
                weight_decay: cfg.weight_decay,
                linear_term: cfg.linear_term,
                disable_gnn_term: false,
                record_w_history: false,
            };
            let out = joint_train(&ds, &pg, &split, &joint_cfg, params0, &mut dropout_rng)
                .map_err(Error::in_phase("train"))?;
            clock.mark("train");
            FitOutcome {
                learned_w: Some(out.w),
                solve_trace: None,
                trace: out.trace,
                best_epoch: out.best_epoch,
            }
        }
    };

    let snapshot = &fit.trace[fit.best_epoch - 1];
    let accuracies =
        Accuracies { train: snapshot.train_acc, val: snapshot.val_acc, test: snapshot.test_acc };

    fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let mut artifacts = Vec::new();
    if cfg.attack != AttackKind::None {
        let dir = cfg.output_dir.join("perturbed");
        save_perturbed(&pg, &dir).map_err(Error::in_phase("write"))?;
        artifacts.push(dir.join("edges.tsv"));
        artifacts.push(dir.join("injected.tsv"));
    }
    let mut stage1 = None;
    if let Some(solve_trace) = &fit.solve_trace {
        let path = cfg.output_dir.join("stage1_trace.jsonl");
        write_solve_trace(&path, solve_trace).map_err(Error::in_phase("write"))?;
        artifacts.push(path);
        stage1 = Some(Stage1Summary {
            iterations: solve_trace.iterations,
            final_objective: *solve_trace.objectives.last().expect("trace has initial point"),
            final_kkt: solve_trace.final_kkt,
            kept_edges: 0,
        });
    }
    if let Some(w) = &fit.learned_w {
        let path = cfg.output_dir.join("learned_graph.tsv");
        let kept = write_learned_graph(&path, w, n, cfg.weight_eps).map_err(Error::in_phase("write"))?;
        artifacts.push(path);
        if let Some(summary) = &mut stage1 {
            summary.kept_edges = kept;
        }
    }
    let trace_path = cfg.output_dir.join("train_trace.jsonl");
    write_jsonl(&trace_path, &fit.trace).map_err(Error::in_phase("write"))?;
    artifacts.push(trace_path);
    let report_path = cfg.output_dir.join("report.json");
    artifacts.push(report_path.clone());
    clock.mark("write");

    let report = RunReport {
        config: cfg.clone(),
        dataset_stats: DatasetStats {
            nodes_loaded,
            nodes: n,
            features: ds.d(),
            classes: ds.num_classes,
            clean_edges: ds.edges.len(),
            injected_edges: pg.injected.len(),
            ptb_rate: if ds.edges.is_empty() {
                0.0
            } else {
                pg.injected.len() as f64 / ds.edges.len() as f64
            },
        },
        accuracies,
        best_epoch: fit.best_epoch,
        stage1,
        timings: clock.finish(),
        artifacts,
        notes,
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Invalid { what: "report", msg: e.to_string() })?;
    fs::write(&report_path, text).map_err(io_err(&report_path))?;
    Ok(report)
}

/// One aggregated cell of a sweep: every seed's test accuracy plus their
/// mean and sample standard deviation.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub ptb_rate: f64,
    pub mode: Mode,
    pub mean: f64,
    pub std: f64,
    pub runs: Vec<f64>,
}

/// Runs every `(rate, mode, seed)` combination; any failing cell aborts
/// with its identity in the message.
pub fn sweep(
    base: &ExperimentConfig,
    rates: &[f64],
    seeds: &[u64],
    modes: &[Mode],
) -> Result<Vec<SweepCell>> {
    if rates.is_empty() {
        return Err(Error::Empty("ptb_rate list"));
    }
    if seeds.is_empty() {
        return Err(Error::Empty("seed list"));
    }
    if modes.is_empty() {
        return Err(Error::Empty("mode list"));
    }
    let mut cells = Vec::with_capacity(rates.len() * modes.len());
    for &rate in rates {
        for &mode in modes {
            let mut runs = Vec::with_capacity(seeds.len());
            for &seed in seeds {
                let mut cfg = base.clone();
                cfg.ptb_rate = rate;
                cfg.mode = mode;
                cfg.seed = seed;
                cfg.output_dir =
                    base.output_dir.join(format!("rate-{rate}")).join(mode.to_string()).join(format!("seed-{seed}"));
                let report = run_experiment(&cfg).map_err(|e| Error::Invalid {
                    what: "sweep cell",
                    msg: format!("rate {rate} mode {mode} seed {seed}: {e}"),
                })?;
                runs.push(report.accuracies.test);
            }
            let mean = runs.iter().sum::<f64>() / runs.len() as f64;
            let std = if runs.len() < 2 {
                0.0
            } else {
                (runs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (runs.len() - 1) as f64)
                    .sqrt()
            };
            cells.push(SweepCell { ptb_rate: rate, mode, mean, std, runs });
        }
    }
    Ok(cells)
}

/// Writes the sweep as a tab-separated table: one row per rate, one
/// `mean±std` column per mode, in first-appearance order.
pub fn write_sweep_table(cells: &[SweepCell], path: &Path) -> Result<()> {
    let mut rates: Vec<f64> = Vec::new();
    let mut modes: Vec<Mode> = Vec::new();
    for cell in cells {
        if !rates.contains(&cell.ptb_rate) {
            rates.push(cell.ptb_rate);
        }
        if !modes.contains(&cell.mode) {
            modes.push(cell.mode);
        }
    }
    let mut out = String::from("ptb_rate");
    for mode in &modes {
        out.push('\t');
        out.push_str(&mode.to_string());
    }
    out.push('\n');
    for &rate in &rates {
        out.push_str(&format!("{rate}"));
        for &mode in &modes {
            let cell = cells
                .iter()
                .find(|c| c.ptb_rate == rate && c.mode == mode)
                .ok_or_else(|| Error::Invalid {
                    what: "sweep table",
                    msg: format!("missing cell for rate {rate} mode {mode}"),
                })?;
            out.push_str(&format!("\t{:.4}±{:.4}", cell.mean, cell.std));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}
