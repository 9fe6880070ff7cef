//! Alternating graph/parameter optimization: each outer epoch takes one
//! projected step on the edge weights — descending the denoising objective
//! plus the classifier's sensitivity to the graph — and then a configurable
//! number of gradient steps on the classifier parameters at the new graph.
//!
//! The weight step majorizes both terms with the curvature `L₁ + L₂′`
//! where `L₁ = 2n` bounds the quadratic part and `L₂′` is a configured
//! surrogate for the classifier term, giving
//! `w⁺ = max(0, w − (∇f₁ + ∇f₂) / (L₁ + L₂′))` in the same half-scaled
//! gradient convention as the standalone denoiser; with the classifier term
//! absent and `L₂′ = 0` each step reproduces `mm_step` bit for bit.

use ndarray::{Array1, ArrayView1};
use rand_chacha::ChaCha20Rng;

use crate::attack::PerturbedGraph;
use crate::dataset::{Dataset, Split};
use crate::denoise::{project_step, quad_grad, DenoiseProblem, LinearTerm};
use crate::error::{Error, Result};
use crate::gcn::{gcn_forward, grad_theta, grad_w, normalize_weights, ForwardMode, GcnParams};
use crate::operators::edge_count;
use crate::train::{epoch_metrics, EpochRecord, Optimizer, OptimizerKind, SnapshotTracker};

/// Hyperparameters of the alternating loop.
#[derive(Debug, Clone)]
pub struct JointConfig {
    /// Weight of the Laplacian-fit term; must be positive.
    pub alpha: f64,
    /// Weight of the feature-smoothness term; nonnegative.
    pub beta: f64,
    /// Surrogate curvature for the classifier term. The weight step is
    /// `1/(2n + l2_prime)`; callers usually derive this from a target weight
    /// learning rate. Zero degenerates to the standalone denoiser's step.
    pub l2_prime: f64,
    /// Learning rate for the classifier parameters.
    pub eta_theta: f64,
    /// Outer epochs; the weights update once per epoch.
    pub outer_epochs: usize,
    /// Parameter updates per outer epoch.
    pub inner_t: usize,
    pub optimizer: OptimizerKind,
    pub dropout: f64,
    pub weight_decay: f64,
    pub linear_term: LinearTerm,
    /// Drops the classifier contribution from the weight step and skips
    /// parameter updates entirely, leaving the bare denoising iteration.
    pub disable_gnn_term: bool,
    /// Keeps every weight iterate in the outcome. Costly on large graphs;
    /// meant for small-fixture analysis.
    pub record_w_history: bool,
}

impl Default for JointConfig {
    fn default() -> Self {
        JointConfig {
            alpha: 1.0,
            beta: 0.1,
            l2_prime: 0.0,
            eta_theta: 1e-3,
            outer_epochs: 200,
            inner_t: 1,
            optimizer: OptimizerKind::Sgd,
            dropout: 0.5,
            weight_decay: 5e-4,
            linear_term: LinearTerm::Exact,
            disable_gnn_term: false,
            record_w_history: false,
        }
    }
}

/// Result of a joint run: the snapshot with the best validation accuracy
/// (ties towards lower validation loss, then the earlier epoch).
#[derive(Debug, Clone)]
pub struct JointOutcome {
    /// Edge weights of the snapshot epoch.
    pub w: Array1<f64>,
    /// Classifier parameters of the snapshot epoch.
    pub params: GcnParams,
    pub trace: Vec<EpochRecord>,
    /// 1-based epoch of the snapshot, matching `trace[best_epoch-1]`.
    pub best_epoch: usize,
    /// Weight iterates (initial point included) when recording was enabled.
    pub w_history: Option<Vec<Array1<f64>>>,
}

/// One projected weight update combining the denoising gradient with the
/// classifier gradient, stepping by `1/(2n + l2_prime)`.
///
/// `grad_gnn` must use the same half-scaled convention as the quadratic
/// part: pass `∇L_GNN / (2α)`. A zero vector with `l2_prime = 0` makes this
/// bitwise-identical to `mm_step`.
pub fn joint_w_step(
    w: ArrayView1<f64>,
    c: ArrayView1<f64>,
    grad_gnn: ArrayView1<f64>,
    n: usize,
    l2_prime: f64,
) -> Result<Array1<f64>> {
    let m = edge_count(n);
    if w.len() != m || c.len() != m || grad_gnn.len() != m {
        return Err(Error::shape(
            "joint weight step",
            format!("lengths {}/{}/{} for {n} nodes", w.len(), c.len(), grad_gnn.len()),
        ));
    }
    if !l2_prime.is_finite() || l2_prime < 0.0 {
        return Err(Error::invalid("l2_prime", format!("{l2_prime} must be finite and >= 0")));
    }
    if grad_gnn.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { phase: "joint weight step gradient".to_string() });
    }
    let mut g = quad_grad(w, c, n);
    g.zip_mut_with(&grad_gnn, |gv, &hv| *gv += hv);
    let step = 1.0 / (2.0 * n as f64 + l2_prime);
    Ok(project_step(w, g.view(), step))
}

fn validate_config(cfg: &JointConfig) -> Result<()> {
    if !cfg.eta_theta.is_finite() || cfg.eta_theta <= 0.0 {
        return Err(Error::invalid("eta_theta", format!("{} must be finite and > 0", cfg.eta_theta)));
    }
    if cfg.inner_t == 0 {
        return Err(Error::invalid("inner_t", "at least one parameter update per epoch".to_string()));
    }
    if !cfg.l2_prime.is_finite() || cfg.l2_prime < 0.0 {
        return Err(Error::invalid("l2_prime", format!("{} must be finite and >= 0", cfg.l2_prime)));
    }
    Ok(())
}

/// Runs the alternating loop from the noisy graph weights and the given
/// parameter initialization.
///
/// Per outer epoch: the classifier gradient in the weights is taken at the
/// current graph with dropout off (keeping the weight step a deterministic
/// descent direction), the weights take one projected step, the graph is
/// renormalized, `inner_t` parameter updates run with dropout on, and the
/// epoch is scored deterministically. The best validation snapshot of the
/// pair `(w, θ)` is returned; there is no early stopping.
pub fn joint_train(
    ds: &Dataset,
    pg: &PerturbedGraph,
    split: &Split,
    cfg: &JointConfig,
    params: GcnParams,
    dropout_rng: &mut ChaCha20Rng,
) -> Result<JointOutcome> {
    validate_config(cfg)?;
    let n = ds.n();
    if pg.n != n {
        return Err(Error::shape("joint", format!("graph has {} nodes, dataset {n}", pg.n)));
    }

    let phi_noisy = pg.to_noisy_laplacian();
    let problem = DenoiseProblem::new(&phi_noisy, &ds.features, cfg.alpha, cfg.beta, cfg.linear_term)?;
    let mut w = pg.noisy_weights();
    let mut params = params;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.eta_theta);
    // Snapshot selection only; the joint loop never stops early.
    let mut tracker = SnapshotTracker::new(params.clone(), usize::MAX);
    let mut best_w = w.clone();
    let mut trace = Vec::with_capacity(cfg.outer_epochs);
    let mut w_history = cfg.record_w_history.then(|| vec![w.clone()]);
    let mut ahat = normalize_weights(w.view(), n)?;

    for epoch in 1..=cfg.outer_epochs {
        let gnn_pull = if cfg.disable_gnn_term {
            Array1::zeros(w.len())
        } else {
            let cache = gcn_forward(&params, &ahat, &ds.features, ForwardMode::Eval)?;
            let gw = grad_w(&cache, &ds.labels, &split.train, w.view())?;
            // Rescale the true gradient into the half-scaled convention.
            gw.mapv(|v| v / (2.0 * cfg.alpha))
        };
        w = joint_w_step(w.view(), problem.c(), gnn_pull.view(), n, cfg.l2_prime).map_err(
            |e| match e {
                Error::NonFinite { .. } => {
                    Error::NonFinite { phase: format!("joint epoch {epoch} weight step") }
                }
                other => other,
            },
        )?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { phase: format!("joint epoch {epoch} weight step") });
        }
        if let Some(history) = &mut w_history {
            history.push(w.clone());
        }
        ahat = normalize_weights(w.view(), n)?;

        if !cfg.disable_gnn_term {
            for _ in 0..cfg.inner_t {
                let cache = gcn_forward(
                    &params,
                    &ahat,
                    &ds.features,
                    ForwardMode::Train { dropout: cfg.dropout, rng: dropout_rng },
                )?;
                let (dw1, dw2) = grad_theta(&cache, &ds.labels, &split.train, cfg.weight_decay)?;
                opt.step(&mut params, &dw1, &dw2);
            }
        }

        let eval = gcn_forward(&params, &ahat, &ds.features, ForwardMode::Eval)?;
        let rec = epoch_metrics(&eval.logits, &ds.labels, split, &params, cfg.weight_decay, epoch)
            .map_err(|e| match e {
                Error::NonFinite { .. } => Error::NonFinite { phase: format!("joint epoch {epoch}") },
                other => other,
            })?;
        let previous_best = tracker.best_epoch;
        tracker.observe(epoch, &rec, &params);
        if tracker.best_epoch != previous_best {
            best_w = w.clone();
        }
        trace.push(rec);
    }

    Ok(JointOutcome {
        w: best_w,
        params: tracker.best_params,
        trace,
        best_epoch: tracker.best_epoch,
        w_history,
    })
}
