//! Experiment harness for graph-denoising GCN defenses.
//!
//! `run` executes one configured experiment; `sweep` grids perturbation
//! rates, modes and seeds into a table; `denoise` runs only the graph
//! cleanup and emits the learned weights; `attack` only poisons a dataset
//! and emits the edge list. Settings come from an optional flat key=value
//! config file with command-line flags taking precedence.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};

use lapgnn::attack::{load_edge_list, random_attack, save_perturbed, PerturbedGraph};
use lapgnn::dataset::{largest_connected_component, load_dataset, row_normalize, Dataset};
use lapgnn::denoise::{stage1_solve, DenoiseProblem, LinearTerm};
use lapgnn::experiment::{
    run_experiment, sweep, write_learned_graph, write_solve_trace, write_sweep_table, AttackKind,
    ExperimentConfig, Mode, RunReport,
};
use lapgnn::rng::stream_seed;
use lapgnn::train::OptimizerKind;

#[derive(Parser)]
#[command(name = "lapgnn", version, about = "Robust GCN training via learned graph denoising")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment end to end and write its report.
    Run(RunArgs),
    /// Run a grid over perturbation rates, modes and seeds; write a table.
    Sweep(SweepArgs),
    /// Denoise the (optionally attacked) graph only; emit learned weights.
    Denoise(RunArgs),
    /// Poison the dataset only; emit the perturbed edge list.
    Attack(RunArgs),
}

/// Experiment settings; every flag overrides the config file.
#[derive(Args, Default)]
struct Overrides {
    /// Flat key = value settings file read before any flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory holding features.tsv, edges.tsv, labels.tsv.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// gcn-only, two-stage or joint.
    #[arg(long)]
    mode: Option<Mode>,
    /// none, random or external-edgelist.
    #[arg(long)]
    attack: Option<AttackKind>,
    /// Injected-to-clean edge ratio for the random attack.
    #[arg(long)]
    ptb_rate: Option<f64>,
    /// Poisoned edge list for attack = external-edgelist.
    #[arg(long)]
    edgelist: Option<PathBuf>,
    /// Fixed split file; omitted, a seeded 10/10/80 split is drawn.
    #[arg(long)]
    split_file: Option<PathBuf>,
    #[arg(long)]
    normalize_features: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    stage1_epochs: Option<usize>,
    #[arg(long)]
    stage1_tol: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Parameter updates per joint outer epoch.
    #[arg(long)]
    inner_t: Option<usize>,
    #[arg(long)]
    eta_theta: Option<f64>,
    /// Target joint weight-step size.
    #[arg(long)]
    eta_w: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// sgd or adam.
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    /// exact or doubled-beta.
    #[arg(long)]
    linear_term: Option<LinearTerm>,
    #[arg(long)]
    early_stop_patience: Option<usize>,
    #[arg(long)]
    weight_eps: Option<f64>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_kv_file(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),+ $(,)?) => {
                $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })+
            };
        }
        take!(dataset, output_dir, mode, attack, ptb_rate, normalize_features, seed, alpha, beta);
        take!(stage1_epochs, stage1_tol, epochs, eta_theta, hidden, dropout, weight_decay);
        take!(optimizer, linear_term, early_stop_patience, weight_eps);
        if let Some(v) = &self.edgelist {
            cfg.edgelist = Some(v.clone());
        }
        if let Some(v) = &self.split_file {
            cfg.split_file = Some(v.clone());
        }
        if let Some(v) = self.inner_t {
            cfg.inner_t = Some(v);
        }
        if let Some(v) = self.eta_w {
            cfg.eta_w = Some(v);
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Perturbation rates, e.g. --rates 0,0.2,0.4.
    #[arg(long, value_delimiter = ',', required = true)]
    rates: Vec<f64>,
    /// Seeds averaged per cell, e.g. --seeds 1,2,3.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    /// Modes compared side by side; defaults to the configured mode.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<Mode>>,
    /// Table destination; defaults to <output_dir>/sweep.tsv.
    #[arg(long)]
    table: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run(args) => cmd_run(&args.overrides.resolve()?),
        Cmd::Sweep(args) => cmd_sweep(&args),
        Cmd::Denoise(args) => cmd_denoise(&args.overrides.resolve()?),
        Cmd::Attack(args) => cmd_attack(&args.overrides.resolve()?),
    }
}

fn print_summary(report: &RunReport) {
    println!(
        "mode {} attack {} rate {}: train {:.4} val {:.4} test {:.4} (best epoch {})",
        report.config.mode,
        report.config.attack,
        report.dataset_stats.ptb_rate,
        report.accuracies.train,
        report.accuracies.val,
        report.accuracies.test,
        report.best_epoch,
    );
    if let Some(stage1) = &report.stage1 {
        println!(
            "denoiser: {} iterations, final kkt {:.3e}, {} edges kept",
            stage1.iterations, stage1.final_kkt, stage1.kept_edges
        );
    }
    println!("report: {}", report.config.output_dir.join("report.json").display());
}

fn cmd_run(cfg: &ExperimentConfig) -> Result<()> {
    let report = run_experiment(cfg)?;
    print_summary(&report);
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let base = args.overrides.resolve()?;
    let modes = args.modes.clone().unwrap_or_else(|| vec![base.mode]);
    let cells = sweep(&base, &args.rates, &args.seeds, &modes)?;
    let table = args.table.clone().unwrap_or_else(|| base.output_dir.join("sweep.tsv"));
    if let Some(parent) = table.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| anyhow!("write: {}: {e}", parent.display()))?;
    }
    write_sweep_table(&cells, &table)?;
    for cell in &cells {
        println!(
            "rate {} {}: {:.4} ± {:.4} over {} runs",
            cell.ptb_rate,
            cell.mode,
            cell.mean,
            cell.std,
            cell.runs.len()
        );
    }
    println!("table: {}", table.display());
    Ok(())
}

/// Shared load → largest-component → attack pipeline for the artifact-only
/// subcommands.
fn load_and_poison(cfg: &ExperimentConfig) -> Result<(Dataset, PerturbedGraph)> {
    cfg.validate()?;
    let raw = load_dataset(&cfg.dataset).map_err(|e| anyhow!("load: {e}"))?;
    let mut ds = largest_connected_component(&raw).map_err(|e| anyhow!("load: {e}"))?;
    if cfg.normalize_features {
        row_normalize(&mut ds.features);
    }
    let pg = match cfg.attack {
        AttackKind::None => PerturbedGraph::from_clean(&ds),
        AttackKind::Random => random_attack(&ds, cfg.ptb_rate, stream_seed(cfg.seed, "attack"))
            .map_err(|e| anyhow!("prepare: {e}"))?,
        AttackKind::ExternalEdgelist => {
            let path = cfg.edgelist.as_ref().expect("validated");
            let edges = load_edge_list(path, ds.n()).map_err(|e| anyhow!("prepare: {e}"))?;
            PerturbedGraph::from_edge_list(&ds, edges).map_err(|e| anyhow!("prepare: {e}"))?
        }
    };
    Ok((ds, pg))
}

fn cmd_denoise(cfg: &ExperimentConfig) -> Result<()> {
    let (ds, pg) = load_and_poison(cfg)?;
    let problem =
        DenoiseProblem::new(&pg.to_noisy_laplacian(), &ds.features, cfg.alpha, cfg.beta, cfg.linear_term)
            .map_err(|e| anyhow!("stage1: {e}"))?;
    let (w, trace) =
        stage1_solve(&problem, pg.noisy_weights().view(), cfg.stage1_epochs, cfg.stage1_tol)
            .map_err(|e| anyhow!("stage1: {e}"))?;

    fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| anyhow!("write: {}: {e}", cfg.output_dir.display()))?;
    let graph_path = cfg.output_dir.join("learned_graph.tsv");
    let kept = write_learned_graph(&graph_path, &w, ds.n(), cfg.weight_eps)
        .map_err(|e| anyhow!("write: {e}"))?;
    let trace_path = cfg.output_dir.join("stage1_trace.jsonl");
    write_solve_trace(&trace_path, &trace).map_err(|e| anyhow!("write: {e}"))?;

    println!(
        "denoised in {} iterations, final kkt {:.3e}; {} weighted edges (noisy graph had {})",
        trace.iterations,
        trace.final_kkt,
        kept,
        pg.edges.len()
    );
    println!("graph: {}", graph_path.display());
    println!("trace: {}", trace_path.display());
    Ok(())
}

fn cmd_attack(cfg: &ExperimentConfig) -> Result<()> {
    // Poisoning is the whole point of this subcommand; an unset attack
    // kind means the random attack rather than a no-op.
    let mut cfg = cfg.clone();
    if cfg.attack == AttackKind::None {
        cfg.attack = AttackKind::Random;
    }
    let (ds, pg) = load_and_poison(&cfg)?;
    save_perturbed(&pg, &cfg.output_dir).map_err(|e| anyhow!("write: {e}"))?;
    println!(
        "poisoned graph: {} clean + {} injected edges over {} nodes",
        ds.edges.len(),
        pg.injected.len(),
        ds.n()
    );
    println!("edges: {}", cfg.output_dir.join("edges.tsv").display());
    println!("injected: {}", cfg.output_dir.join("injected.tsv").display());
    Ok(())
}
