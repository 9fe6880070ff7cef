//! Linear maps between edge space and matrix space.
//!
//! A weighted undirected graph on `n` nodes is stored as a vector
//! `w ∈ R^{n(n−1)/2}` holding one weight per unordered node pair. The
//! Laplacian operator `L` maps `w` to the n×n graph Laplacian, the adjacency
//! operator `A` maps it to the weighted adjacency matrix, and the adjoint
//! `L*` maps any n×n matrix `Y` back to edge space so that
//! `⟨Lw, Y⟩ = ⟨w, L*Y⟩` holds for every `w` and `Y`.
//!
//! Pairs `{i, j}` with `i > j` are enumerated column-by-column over the
//! strict lower triangle: `(1,0), (2,0), …, (n−1,0), (2,1), …` — the
//! 0-based shift of the usual `k = i − j + (j−1)(2n−j)/2` enumeration. The
//! mapping is locked by an exhaustive bijectivity test.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Number of unordered node pairs, `n(n−1)/2` — the length of every
/// edge-weight vector on `n` nodes.
pub fn edge_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// First linear index of column `j` in the pair enumeration.
fn column_base(j: usize, n: usize) -> usize {
    j * (2 * n - j - 1) / 2
}

/// Linear index of the pair `{i, j}` in `[0, n(n−1)/2)`.
///
/// # Panics
/// If `i ≤ j` or either index is out of range — callers pass the pair with
/// the larger node first, mirroring the strict lower triangle.
pub fn edge_index(i: usize, j: usize, n: usize) -> usize {
    assert!(
        j < i && i < n,
        "edge ({i},{j}) invalid for n={n}: need j < i < n"
    );
    column_base(j, n) + (i - j - 1)
}

/// Inverse of [`edge_index`]: the pair `(i, j)` with `i > j` at linear
/// index `k`.
///
/// # Panics
/// If `k ≥ n(n−1)/2`.
pub fn edge_pair(k: usize, n: usize) -> (usize, usize) {
    assert!(k < edge_count(n), "edge index {k} out of range for n={n}");
    // Closed-form column from the quadratic base formula, then an exact
    // integer fix-up to absorb floating-point rounding.
    let b = 2.0 * n as f64 - 1.0;
    let mut j = ((b - (b * b - 8.0 * k as f64).sqrt()) / 2.0).floor() as usize;
    j = j.min(n - 2);
    while column_base(j, n) > k {
        j -= 1;
    }
    while j + 1 < n - 1 && column_base(j + 1, n) <= k {
        j += 1;
    }
    let i = k - column_base(j, n) + j + 1;
    (i, j)
}

fn check_weight_len(len: usize, n: usize, who: &str) {
    assert!(
        len == edge_count(n),
        "{who}: weight vector has length {len}, expected n(n−1)/2 = {} for n={n}",
        edge_count(n)
    );
}

/// Graph Laplacian of the weight vector: `[Lw]_ij = −w_{ij}` off the
/// diagonal, diagonal = weighted degree. Rows sum to zero by construction.
pub fn laplacian_apply(w: ArrayView1<f64>, n: usize) -> Array2<f64> {
    let mut out = Array2::zeros((n, n));
    laplacian_apply_into(w, n, &mut out);
    out
}

pub(crate) fn laplacian_apply_into(w: ArrayView1<f64>, n: usize, out: &mut Array2<f64>) {
    check_weight_len(w.len(), n, "laplacian_apply");
    assert!(out.dim() == (n, n), "laplacian_apply: output shape");
    out.fill(0.0);
    let w = w.as_slice().expect("contiguous weights");
    let mut k = 0;
    for j in 0..n {
        for i in (j + 1)..n {
            out[[i, j]] = -w[k];
            out[[j, i]] = -w[k];
            k += 1;
        }
    }
    // Diagonal = negated ordered sum of the off-diagonal row entries, so a
    // row sum evaluated in the same order cancels exactly (Lw·1 = 0).
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                s += out[[i, j]];
            }
        }
        out[[i, i]] = -s;
    }
}

/// Adjoint of the Laplacian operator: `[L*Y]_k = Y_ii − Y_ij − Y_ji + Y_jj`
/// for the pair `k = (i, j)`. Satisfies `⟨Lw, Y⟩ = ⟨w, L*Y⟩` for all `w, Y`.
///
/// # Panics
/// If `Y` is not square.
pub fn adjoint_apply(y: ArrayView2<f64>) -> Array1<f64> {
    let n = y.nrows();
    let mut out = Array1::zeros(edge_count(n));
    adjoint_apply_into(y, &mut out);
    out
}

pub(crate) fn adjoint_apply_into(y: ArrayView2<f64>, out: &mut Array1<f64>) {
    let n = y.nrows();
    assert!(y.ncols() == n, "adjoint_apply: input must be square");
    assert!(out.len() == edge_count(n), "adjoint_apply: output length");
    let out = out.as_slice_mut().expect("contiguous output");
    let mut k = 0;
    for j in 0..n {
        let yjj = y[[j, j]];
        for i in (j + 1)..n {
            out[k] = y[[i, i]] - y[[i, j]] - y[[j, i]] + yjj;
            k += 1;
        }
    }
}

/// Weighted adjacency of the weight vector: `[Aw]_ij = w_{ij}` off the
/// diagonal, zero diagonal. `Aw + Lw` is diagonal.
pub fn adjacency_apply(w: ArrayView1<f64>, n: usize) -> Array2<f64> {
    check_weight_len(w.len(), n, "adjacency_apply");
    let w = w.as_slice().expect("contiguous weights");
    let mut out = Array2::zeros((n, n));
    let mut k = 0;
    for j in 0..n {
        for i in (j + 1)..n {
            out[[i, j]] = w[k];
            out[[j, i]] = w[k];
            k += 1;
        }
    }
    out
}

/// The composition `L*L(w)` without materializing the huge operator matrix.
pub fn laplacian_gram_apply(w: ArrayView1<f64>, n: usize) -> Array1<f64> {
    adjoint_apply(laplacian_apply(w, n).view())
}

/// Dirichlet energy `Tr(XᵀLwX) = Σ_k w_k·‖x_i − x_j‖²` over unordered
/// pairs: the feature-smoothness functional of the weighted graph.
///
/// # Panics
/// If `w` and `X` disagree on the node count.
pub fn dirichlet_energy(w: ArrayView1<f64>, x: ArrayView2<f64>) -> f64 {
    let n = x.nrows();
    check_weight_len(w.len(), n, "dirichlet_energy");
    let w = w.as_slice().expect("contiguous weights");
    let mut total = 0.0;
    let mut k = 0;
    for j in 0..n {
        let xj = x.row(j);
        for i in (j + 1)..n {
            let xi = x.row(i);
            let mut d2 = 0.0;
            for (a, b) in xi.iter().zip(xj.iter()) {
                let diff = a - b;
                d2 += diff * diff;
            }
            total += w[k] * d2;
            k += 1;
        }
    }
    total
}

/// Per-pair squared feature distances `‖x_i − x_j‖²` as an edge-space
/// vector, computed through the Gram matrix (one dense product instead of
/// `n(n−1)/2` row scans). Equals `L*(XXᵀ)`.
pub fn pairwise_sq_dists(x: ArrayView2<f64>) -> Array1<f64> {
    let gram = x.dot(&x.t());
    adjoint_apply(gram.view())
}
