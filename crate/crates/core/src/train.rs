//! Epoch loop for the network on a fixed graph, with plain gradient descent
//! or Adam, per-epoch metrics, and a best-validation-accuracy snapshot.

use std::str::FromStr;

use ndarray::Array2;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Split;
use crate::error::{Error, Result};
use crate::gcn::{
    accuracy, gcn_forward_cached, gnn_loss, grad_theta, ForwardMode, GcnParams,
    NormalizedAdjacency,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::invalid("optimizer", format!("{other:?} is not sgd or adam"))),
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// First and second moments for one parameter matrix.
#[derive(Debug, Clone)]
struct Moments {
    m: Array2<f64>,
    v: Array2<f64>,
}

impl Moments {
    fn zeros_like(p: &Array2<f64>) -> Self {
        Moments { m: Array2::zeros(p.raw_dim()), v: Array2::zeros(p.raw_dim()) }
    }
}

/// Optimizer state shared by the fixed-graph and joint trainers.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    t: u64,
    w1: Option<Moments>,
    w2: Option<Moments>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Optimizer { kind, lr, t: 0, w1: None, w2: None }
    }

    /// Applies one update from the gradient pair, in place.
    pub fn step(&mut self, params: &mut GcnParams, dw1: &Array2<f64>, dw2: &Array2<f64>) {
        match self.kind {
            OptimizerKind::Sgd => {
                params.w1.scaled_add(-self.lr, dw1);
                params.w2.scaled_add(-self.lr, dw2);
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
                let c2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
                let layer = |p: &mut Array2<f64>, g: &Array2<f64>, s: &mut Moments| {
                    azip_update(p, g, s, self.lr, c1, c2);
                };
                let mut m1 = self.w1.take().unwrap_or_else(|| Moments::zeros_like(&params.w1));
                let mut m2 = self.w2.take().unwrap_or_else(|| Moments::zeros_like(&params.w2));
                layer(&mut params.w1, dw1, &mut m1);
                layer(&mut params.w2, dw2, &mut m2);
                self.w1 = Some(m1);
                self.w2 = Some(m2);
            }
        }
    }
}

fn azip_update(p: &mut Array2<f64>, g: &Array2<f64>, s: &mut Moments, lr: f64, c1: f64, c2: f64) {
    for ((pv, &gv), (mv, vv)) in
        p.iter_mut().zip(g.iter()).zip(s.m.iter_mut().zip(s.v.iter_mut()))
    {
        *mv = ADAM_BETA1 * *mv + (1.0 - ADAM_BETA1) * gv;
        *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * gv * gv;
        let m_hat = *mv / c1;
        let v_hat = *vv / c2;
        *pv -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub dropout: f64,
    pub weight_decay: f64,
    /// Stop after this many epochs without a strict validation-loss
    /// improvement; the default never fires within the default epoch count.
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            lr: 0.01,
            optimizer: OptimizerKind::Adam,
            dropout: 0.5,
            weight_decay: 5e-4,
            early_stop_patience: 200,
        }
    }
}

/// Deterministic-evaluation metrics recorded after each epoch's update.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot of the epoch with the best validation accuracy (ties broken
    /// towards lower validation loss, then the earlier epoch).
    pub params: GcnParams,
    pub trace: Vec<EpochRecord>,
    /// 1-based epoch of the snapshot, matching `trace[best_epoch-1]`.
    pub best_epoch: usize,
}

/// Tracks the running best snapshot and early-stop counter; shared with the
/// joint trainer so both apply the same selection rule.
pub(crate) struct SnapshotTracker {
    pub best_params: GcnParams,
    pub best_epoch: usize,
    best_acc: f64,
    best_acc_loss: f64,
    best_loss_seen: f64,
    stale_epochs: usize,
    patience: usize,
}

impl SnapshotTracker {
    pub fn new(initial: GcnParams, patience: usize) -> Self {
        SnapshotTracker {
            best_params: initial,
            best_epoch: 0,
            best_acc: f64::NEG_INFINITY,
            best_acc_loss: f64::INFINITY,
            best_loss_seen: f64::INFINITY,
            stale_epochs: 0,
            patience,
        }
    }

    /// Records one epoch; returns `true` when training should stop.
    pub fn observe(&mut self, epoch: usize, rec: &EpochRecord, params: &GcnParams) -> bool {
        if rec.val_acc > self.best_acc
            || (rec.val_acc == self.best_acc && rec.val_loss < self.best_acc_loss)
        {
            self.best_acc = rec.val_acc;
            self.best_acc_loss = rec.val_loss;
            self.best_params = params.clone();
            self.best_epoch = epoch;
        }
        if rec.val_loss < self.best_loss_seen {
            self.best_loss_seen = rec.val_loss;
            self.stale_epochs = 0;
            false
        } else {
            self.stale_epochs += 1;
            self.stale_epochs >= self.patience
        }
    }
}

/// Evaluates one deterministic pass and packages the epoch metrics.
pub(crate) fn epoch_metrics(
    logits: &Array2<f64>,
    labels: &[usize],
    split: &Split,
    params: &GcnParams,
    weight_decay: f64,
    epoch: usize,
) -> Result<EpochRecord> {
    let rec = EpochRecord {
        epoch,
        train_loss: gnn_loss(logits, labels, &split.train, params, weight_decay)?,
        train_acc: accuracy(logits, labels, &split.train)?,
        val_loss: gnn_loss(logits, labels, &split.val, params, weight_decay)?,
        val_acc: accuracy(logits, labels, &split.val)?,
        test_acc: accuracy(logits, labels, &split.test)?,
    };
    if !rec.train_loss.is_finite() || !rec.val_loss.is_finite() {
        return Err(Error::NonFinite { phase: format!("training epoch {epoch}") });
    }
    Ok(rec)
}

/// Trains on a fixed normalized adjacency. The caller provides initialized
/// parameters and the dropout generator, so runs are reproducible from
/// seeds alone.
pub fn train_gcn(
    ahat: &NormalizedAdjacency,
    x: &Array2<f64>,
    labels: &[usize],
    split: &Split,
    cfg: &TrainConfig,
    params: GcnParams,
    dropout_rng: &mut ChaCha20Rng,
) -> Result<TrainOutcome> {
    let mut params = params;
    // The graph never changes here, so Â·X is shared by every epoch.
    let px = ahat.matrix.dot(x);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr);
    let mut tracker = SnapshotTracker::new(params.clone(), cfg.early_stop_patience);
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let train_cache = gcn_forward_cached(
            &params,
            ahat,
            x,
            &px,
            ForwardMode::Train { dropout: cfg.dropout, rng: dropout_rng },
        )?;
        let (dw1, dw2) = grad_theta(&train_cache, labels, &split.train, cfg.weight_decay)?;
        opt.step(&mut params, &dw1, &dw2);

        let eval_cache = gcn_forward_cached(&params, ahat, x, &px, ForwardMode::Eval)?;
        let rec = epoch_metrics(&eval_cache.logits, labels, split, &params, cfg.weight_decay, epoch)?;
        let stop = tracker.observe(epoch, &rec, &params);
        trace.push(rec);
        if stop {
            break;
        }
    }

    Ok(TrainOutcome { params: tracker.best_params, trace, best_epoch: tracker.best_epoch })
}
