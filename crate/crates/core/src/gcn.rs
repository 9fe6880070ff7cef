//! Two-layer graph convolutional network over a dense normalized adjacency,
//! with exact reverse-mode gradients in the parameters and — through the
//! degree normalization — in the edge weights of the underlying graph.
//!
//! Forward pass: `logits = Â · relu(Â · X · W₁) · W₂` with
//! `Â = D̃^{-1/2} (A + I) D̃^{-1/2}` and `D̃ = diag(1 + Σ_q A_pq)`.
//! Dropout, when enabled, applies to the hidden activation only.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::operators::{adjacency_apply, edge_count};

/// Layer weights of the two-layer network.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    /// `d × h` first-layer weights.
    pub w1: Array2<f64>,
    /// `h × c` second-layer weights.
    pub w2: Array2<f64>,
}

impl GcnParams {
    /// Uniform `±1/√fan_in` initialization; entries are drawn row-major,
    /// `w1` before `w2`, so a seeded generator reproduces the same weights.
    pub fn init(d: usize, h: usize, c: usize, rng: &mut ChaCha20Rng) -> Self {
        let mut draw = |rows: usize, cols: usize| {
            let bound = 1.0 / (rows as f64).sqrt();
            let mut m = Array2::zeros((rows, cols));
            for i in 0..rows {
                for j in 0..cols {
                    m[[i, j]] = rng.random_range(-bound..bound);
                }
            }
            m
        };
        let w1 = draw(d, h);
        let w2 = draw(h, c);
        GcnParams { w1, w2 }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Order-sensitive fingerprint of a matrix's exact bit pattern; used to
/// detect stale forward caches after the graph changes.
pub(crate) fn matrix_fingerprint(a: &Array2<f64>) -> u64 {
    let mut h = FNV_OFFSET;
    for dim in [a.nrows() as u64, a.ncols() as u64] {
        h = (h ^ dim).wrapping_mul(FNV_PRIME);
    }
    for &v in a.iter() {
        h = (h ^ v.to_bits()).wrapping_mul(FNV_PRIME);
    }
    h
}

/// Symmetrically normalized adjacency `Â` with the degree terms kept around
/// for differentiating through the normalization.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    /// Dense `Â`, symmetric with eigenvalues in `[-1, 1]`.
    pub matrix: Array2<f64>,
    /// `s_p = (1 + Σ_q A_pq)^{-1/2}`.
    pub inv_sqrt_deg: Array1<f64>,
    fingerprint: u64,
}

impl NormalizedAdjacency {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Fingerprint of the *raw* adjacency this normalization was built from.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Builds `Â` from a dense adjacency, which must be square and exactly
/// symmetric with a zero diagonal and finite nonnegative entries (every
/// internal constructor guarantees this shape).
pub fn normalize_adjacency(adj: &Array2<f64>) -> Result<NormalizedAdjacency> {
    let n = adj.nrows();
    if adj.ncols() != n {
        return Err(Error::shape("adjacency", format!("{}×{} is not square", n, adj.ncols())));
    }
    for i in 0..n {
        if adj[[i, i]] != 0.0 {
            return Err(Error::invalid("adjacency", format!("nonzero diagonal at {i}")));
        }
        for j in 0..n {
            let v = adj[[i, j]];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid("adjacency", format!("entry ({i},{j}) = {v}")));
            }
            if adj[[j, i]] != v {
                return Err(Error::invalid("adjacency", format!("asymmetric at ({i},{j})")));
            }
        }
    }
    let fingerprint = matrix_fingerprint(adj);
    // Self-loop degrees are >= 1, so the inverse square roots are finite.
    let deg = Array1::from_shape_fn(n, |p| 1.0 + adj.row(p).sum());
    let inv_sqrt_deg = deg.mapv(|d: f64| 1.0 / d.sqrt());
    // One square root per entry instead of a product of per-node factors:
    // costs a little more but keeps round cases like 1/√(2·2) exact.
    let mut matrix = Array2::zeros((n, n));
    for p in 0..n {
        for q in 0..n {
            let b = adj[[p, q]] + if p == q { 1.0 } else { 0.0 };
            matrix[[p, q]] = b / (deg[p] * deg[q]).sqrt();
        }
    }
    Ok(NormalizedAdjacency { matrix, inv_sqrt_deg, fingerprint })
}

/// `normalize_adjacency` of the graph a weight vector describes.
pub fn normalize_weights(w: ArrayView1<f64>, n: usize) -> Result<NormalizedAdjacency> {
    normalize_adjacency(&adjacency_apply(w, n))
}

/// Whether a forward pass is stochastic.
pub enum ForwardMode<'r> {
    /// Deterministic pass, dropout off.
    Eval,
    /// Training pass; `rate` of the hidden units are zeroed and the rest
    /// scaled by `1/(1-rate)`. `rate = 0` draws nothing from the generator.
    Train { dropout: f64, rng: &'r mut ChaCha20Rng },
}

/// Every intermediate of one forward pass that the backward passes need.
pub struct ForwardCache<'a> {
    pub logits: Array2<f64>,
    ahat: &'a NormalizedAdjacency,
    x: &'a Array2<f64>,
    w1: Array2<f64>,
    w2: Array2<f64>,
    z1: Array2<f64>,
    hidden: Array2<f64>,
    dropout_mask: Option<Array2<f64>>,
    /// `X·W₁`, cached on the canonical path; recomputed on demand otherwise.
    m1: Option<Array2<f64>>,
    /// Precomputed `Â·X`, when the caller trains against a fixed graph.
    px: Option<&'a Array2<f64>>,
}

fn check_shapes(params: &GcnParams, ahat: &NormalizedAdjacency, x: &Array2<f64>) -> Result<()> {
    let n = ahat.n();
    if x.nrows() != n {
        return Err(Error::shape("forward", format!("{} feature rows for {n} nodes", x.nrows())));
    }
    if params.w1.nrows() != x.ncols() {
        return Err(Error::shape(
            "forward",
            format!("w1 expects {} input features, x has {}", params.w1.nrows(), x.ncols()),
        ));
    }
    if params.w2.nrows() != params.w1.ncols() {
        return Err(Error::shape(
            "forward",
            format!("w2 expects {} hidden units, w1 yields {}", params.w2.nrows(), params.w1.ncols()),
        ));
    }
    Ok(())
}

fn forward_impl<'a>(
    params: &GcnParams,
    ahat: &'a NormalizedAdjacency,
    x: &'a Array2<f64>,
    px: Option<&'a Array2<f64>>,
    mode: ForwardMode,
) -> Result<ForwardCache<'a>> {
    check_shapes(params, ahat, x)?;
    let (m1, z1) = match px {
        // Fixed-graph fast path: Z₁ = (Â·X)·W₁.
        Some(p) => (None, p.dot(&params.w1)),
        // Canonical association Z₁ = Â·(X·W₁); keeps X·W₁ for the w-gradient.
        None => {
            let m1 = x.dot(&params.w1);
            let z1 = ahat.matrix.dot(&m1);
            (Some(m1), z1)
        }
    };
    let mut hidden = z1.mapv(|v| v.max(0.0));
    let dropout_mask = match mode {
        ForwardMode::Eval => None,
        ForwardMode::Train { dropout, rng } => {
            if !(0.0..1.0).contains(&dropout) {
                return Err(Error::invalid("dropout", format!("{dropout} outside [0, 1)")));
            }
            if dropout == 0.0 {
                None
            } else {
                let keep = 1.0 - dropout;
                let mut mask = Array2::zeros(hidden.raw_dim());
                for i in 0..mask.nrows() {
                    for j in 0..mask.ncols() {
                        mask[[i, j]] = if rng.random::<f64>() < dropout { 0.0 } else { 1.0 / keep };
                    }
                }
                hidden *= &mask;
                Some(mask)
            }
        }
    };
    let logits = ahat.matrix.dot(&hidden.dot(&params.w2));
    Ok(ForwardCache {
        logits,
        ahat,
        x,
        w1: params.w1.clone(),
        w2: params.w2.clone(),
        z1,
        hidden,
        dropout_mask,
        m1,
        px,
    })
}

/// One forward pass. Deterministic given the same inputs and generator
/// state — identical calls produce bit-identical logits.
pub fn gcn_forward<'a>(
    params: &GcnParams,
    ahat: &'a NormalizedAdjacency,
    x: &'a Array2<f64>,
    mode: ForwardMode,
) -> Result<ForwardCache<'a>> {
    forward_impl(params, ahat, x, None, mode)
}

/// Forward pass reusing a precomputed `Â·X`; the product must belong to
/// this exact `ahat`/`x` pair. Spares one dense `n²` product per call when
/// the graph is fixed across epochs.
pub fn gcn_forward_cached<'a>(
    params: &GcnParams,
    ahat: &'a NormalizedAdjacency,
    x: &'a Array2<f64>,
    px: &'a Array2<f64>,
    mode: ForwardMode,
) -> Result<ForwardCache<'a>> {
    if px.raw_dim() != x.raw_dim() {
        return Err(Error::shape("forward", "Â·X cache has wrong shape".to_string()));
    }
    forward_impl(params, ahat, x, Some(px), mode)
}

/// Row-wise softmax, numerically stabilized; every row sums to 1.
pub fn softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(logits.raw_dim());
    for (row, mut dst) in logits.rows().into_iter().zip(out.rows_mut()) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for (&z, t) in row.iter().zip(dst.iter_mut()) {
            let e = (z - max).exp();
            *t = e;
            sum += e;
        }
        dst.mapv_inplace(|v| v / sum);
    }
    out
}

fn check_labels_mask(n: usize, c: usize, labels: &[usize], mask: &[usize]) -> Result<()> {
    if labels.len() != n {
        return Err(Error::shape("loss", format!("{} labels for {n} nodes", labels.len())));
    }
    if mask.is_empty() {
        return Err(Error::Empty("evaluation mask"));
    }
    for &v in mask {
        if v >= n {
            return Err(Error::invalid("mask", format!("node {v} outside [0, {n})")));
        }
        if labels[v] >= c {
            return Err(Error::invalid("labels", format!("label {} of node {v} outside [0, {c})", labels[v])));
        }
    }
    Ok(())
}

/// Masked mean cross-entropy plus `weight_decay/2 · ‖W₁‖²_F` (decay on the
/// first layer only).
pub fn gnn_loss(
    logits: &Array2<f64>,
    labels: &[usize],
    mask: &[usize],
    params: &GcnParams,
    weight_decay: f64,
) -> Result<f64> {
    check_labels_mask(logits.nrows(), logits.ncols(), labels, mask)?;
    let mut ce = 0.0;
    for &v in mask {
        let row = logits.row(v);
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
        ce += lse - row[labels[v]];
    }
    let decay = 0.5 * weight_decay * params.w1.iter().map(|v| v * v).sum::<f64>();
    Ok(ce / mask.len() as f64 + decay)
}

/// `(softmax − onehot)/|mask|` on masked rows, zero elsewhere — the exact
/// gradient of the masked mean cross-entropy in the logits.
fn logit_grad(cache: &ForwardCache, labels: &[usize], mask: &[usize]) -> Result<Array2<f64>> {
    let (n, c) = (cache.logits.nrows(), cache.logits.ncols());
    check_labels_mask(n, c, labels, mask)?;
    let scale = 1.0 / mask.len() as f64;
    let mut s = Array2::zeros((n, c));
    for &v in mask {
        let row = cache.logits.row(v);
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for (&z, t) in row.iter().zip(s.row_mut(v).iter_mut()) {
            let e = (z - max).exp();
            *t = e;
            sum += e;
        }
        let mut dst = s.row_mut(v);
        dst.mapv_inplace(|p| p / sum * scale);
        dst[labels[v]] -= scale;
    }
    Ok(s)
}

/// Backpropagates the masked loss (decay included) through the hidden layer:
/// returns the logit gradient `S` and the pre-activation gradient `dZ₁`.
fn backprop_to_z1(
    cache: &ForwardCache,
    labels: &[usize],
    mask: &[usize],
) -> Result<(Array2<f64>, Array2<f64>)> {
    let s = logit_grad(cache, labels, mask)?;
    let t = cache.ahat.matrix.dot(&s);
    let mut dz1 = t.dot(&cache.w2.t());
    dz1.zip_mut_with(&cache.z1, |g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    if let Some(mask2) = &cache.dropout_mask {
        dz1 *= mask2;
    }
    Ok((s, dz1))
}

/// Exact gradient of the loss in `(W₁, W₂)` for this forward pass.
pub fn grad_theta(
    cache: &ForwardCache,
    labels: &[usize],
    mask: &[usize],
    weight_decay: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let (s, dz1) = backprop_to_z1(cache, labels, mask)?;
    let t = cache.ahat.matrix.dot(&s);
    let dw2 = cache.hidden.t().dot(&t);
    let mut dw1 = match cache.px {
        Some(px) => px.t().dot(&dz1),
        None => cache.x.t().dot(&cache.ahat.matrix.dot(&dz1)),
    };
    dw1.scaled_add(weight_decay, &cache.w1);
    Ok((dw1, dw2))
}

/// Exact gradient of the loss in the edge-weight vector, differentiating
/// through both the adjacency entries and the degree normalization.
///
/// `w` must be the vector the cached `Â` was built from; a changed graph is
/// rejected rather than silently differentiated at the wrong point.
pub fn grad_w(
    cache: &ForwardCache,
    labels: &[usize],
    mask: &[usize],
    w: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    let n = cache.ahat.n();
    if w.len() != edge_count(n) {
        return Err(Error::shape("grad_w", format!("{} weights for {n} nodes", w.len())));
    }
    if matrix_fingerprint(&adjacency_apply(w, n)) != cache.ahat.fingerprint() {
        return Err(Error::StaleCache(
            "edge weights do not match the adjacency this forward pass used",
        ));
    }
    let (s_mat, dz1) = backprop_to_z1(cache, labels, mask)?;

    // dL/dÂ = dZ₁·M₁ᵀ + S·M₂ᵀ from the two products Z₁ = Â·M₁, Z₂ = Â·M₂.
    let m1_owned;
    let m1 = match &cache.m1 {
        Some(m) => m,
        None => {
            m1_owned = cache.x.dot(&cache.w1);
            &m1_owned
        }
    };
    let m2 = cache.hidden.dot(&cache.w2);
    let ghat = dz1.dot(&m1.t()) + s_mat.dot(&m2.t());
    let sym = &ghat + &ghat.t();

    // Degree chain: r_p = -½ s_p² Σ_q Â_pq (Ĝ_pq + Ĝ_qp).
    let v = (&cache.ahat.matrix * &sym).sum_axis(Axis(1));
    let s = &cache.ahat.inv_sqrt_deg;
    let r = Array1::from_shape_fn(n, |p| -0.5 * s[p] * s[p] * v[p]);

    // [∇w]_k = s_i s_j (Ĝ_ij + Ĝ_ji) + r_i + r_j, over every edge slot in
    // enumeration order.
    let mut grad = Array1::zeros(edge_count(n));
    let mut k = 0;
    for j in 0..n {
        for i in j + 1..n {
            grad[k] = s[i] * s[j] * sym[[i, j]] + r[i] + r[j];
            k += 1;
        }
    }
    Ok(grad)
}

/// Fraction of `nodes` whose argmax logit matches the label; argmax ties go
/// to the lowest class index.
pub fn accuracy(logits: &Array2<f64>, labels: &[usize], nodes: &[usize]) -> Result<f64> {
    check_labels_mask(logits.nrows(), logits.ncols(), labels, nodes)?;
    let mut hits = 0usize;
    for &v in nodes {
        let row = logits.row(v);
        let mut best = 0;
        for (cls, &z) in row.iter().enumerate() {
            if z > row[best] {
                best = cls;
            }
        }
        hits += usize::from(best == labels[v]);
    }
    Ok(hits as f64 / nodes.len() as f64)
}
