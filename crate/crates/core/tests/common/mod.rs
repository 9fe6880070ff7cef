//! Shared test oracles, written independently of the library kernels they
//! check: a Jacobi eigensolver, power iteration, a pivoted linear solver,
//! brute-force active-set enumeration for the nonnegative QP, a
//! straight-line network evaluation, and central finite differences.
#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut ChaCha20Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| r.random_range(lo..hi))
}

pub fn random_vector(r: &mut ChaCha20Rng, len: usize, lo: f64, hi: f64) -> Array1<f64> {
    Array1::from_shape_fn(len, |_| r.random_range(lo..hi))
}

/// Elementwise relative error with an absolute floor in the denominator.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
pub fn jacobi_eigh(a: ArrayView2<f64>) -> Array1<f64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "jacobi_eigh needs a square matrix");
    let mut m = a.to_owned();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off.sqrt() < 1e-13 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Array1::from(ev)
}

/// Dominant |eigenvalue| of a symmetric linear map given only its action.
pub fn operator_norm_sym(
    dim: usize,
    iters: usize,
    seed: u64,
    mut apply: impl FnMut(ArrayView1<f64>) -> Array1<f64>,
) -> f64 {
    let mut r = rng(seed);
    let mut v = random_vector(&mut r, dim, -1.0, 1.0);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let norm = v.dot(&v).sqrt();
        assert!(norm > 0.0, "power iteration collapsed to zero");
        v /= norm;
        let u = apply(v.view());
        lambda = v.dot(&u).abs();
        v = u;
    }
    lambda
}

/// Solves `A x = b` by LU with partial pivoting; `None` if near-singular.
pub fn lu_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.len(), n);
    let mut m = a.to_owned();
    let mut x = b.to_owned();
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if m[[row, col]].abs() > m[[pivot, col]].abs() {
                pivot = row;
            }
        }
        if m[[pivot, col]].abs() < 1e-12 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                let tmp = m[[col, k]];
                m[[col, k]] = m[[pivot, k]];
                m[[pivot, k]] = tmp;
            }
            x.swap(col, pivot);
        }
        for row in (col + 1)..n {
            let f = m[[row, col]] / m[[col, col]];
            for k in col..n {
                m[[row, k]] -= f * m[[col, k]];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        x[col] /= m[[col, col]];
        for row in 0..col {
            x[row] -= m[[row, col]] * x[col];
        }
    }
    Some(x)
}

/// Central finite-difference gradient of a scalar function.
pub fn fd_gradient(
    mut f: impl FnMut(&Array1<f64>) -> f64,
    x: &Array1<f64>,
    h: f64,
) -> Array1<f64> {
    let mut g = Array1::zeros(x.len());
    for k in 0..x.len() {
        let mut xp = x.clone();
        xp[k] += h;
        let mut xm = x.clone();
        xm[k] -= h;
        g[k] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    g
}

/// Straight-line two-layer network evaluation over nested vectors: builds
/// the normalized adjacency and both layers with explicit loops, sharing no
/// code with the library kernels.
pub fn straight_line_gcn(
    adj: &[Vec<f64>],
    x: &[Vec<f64>],
    w1: &[Vec<f64>],
    w2: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let n = adj.len();
    let d = w1.len();
    let h = w1[0].len();
    let c = w2[0].len();

    let mut s = vec![0.0; n];
    for p in 0..n {
        let mut deg = 1.0;
        for q in 0..n {
            deg += adj[p][q];
        }
        s[p] = 1.0 / deg.sqrt();
    }
    let mut ahat = vec![vec![0.0; n]; n];
    for p in 0..n {
        for q in 0..n {
            let b = adj[p][q] + if p == q { 1.0 } else { 0.0 };
            ahat[p][q] = s[p] * b * s[q];
        }
    }

    let mut m1 = vec![vec![0.0; h]; n];
    for i in 0..n {
        for k in 0..h {
            for j in 0..d {
                m1[i][k] += x[i][j] * w1[j][k];
            }
        }
    }
    let mut hid = vec![vec![0.0; h]; n];
    for i in 0..n {
        for k in 0..h {
            let mut z = 0.0;
            for q in 0..n {
                z += ahat[i][q] * m1[q][k];
            }
            hid[i][k] = z.max(0.0);
        }
    }
    let mut m2 = vec![vec![0.0; c]; n];
    for i in 0..n {
        for k in 0..c {
            for j in 0..h {
                m2[i][k] += hid[i][j] * w2[j][k];
            }
        }
    }
    let mut logits = vec![vec![0.0; c]; n];
    for i in 0..n {
        for k in 0..c {
            for q in 0..n {
                logits[i][k] += ahat[i][q] * m2[q][k];
            }
        }
    }
    logits
}

/// Planted-partition graph: `classes` equal blocks of `per_class` nodes,
/// intra-block edges with probability `p_in`, inter-block with `p_out`, and
/// features = one-hot class indicator plus uniform noise.
pub fn planted_partition(
    per_class: usize,
    classes: usize,
    p_in: f64,
    p_out: f64,
    feat_noise: f64,
    seed: u64,
) -> lapgnn::dataset::Dataset {
    let n = per_class * classes;
    let mut r = rng(seed);
    let labels: Vec<usize> = (0..n).map(|v| v / per_class).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if r.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    edges.sort_unstable();
    let features = Array2::from_shape_fn((n, classes), |(v, k)| {
        let base = if labels[v] == k { 1.0 } else { 0.0 };
        base + r.random_range(-feat_noise..feat_noise.max(1e-12))
    });
    let ds = lapgnn::dataset::Dataset { features, labels, edges, num_classes: classes };
    ds.validate().unwrap();
    ds
}

/// Global minimizer of `min_{w≥0} α‖L(w)−Φ‖²_F + β·Σ_k w_k‖x_i−x_j‖²` by
/// brute-force active-set enumeration, built entirely from explicit loops:
/// the Laplacian basis, the Gram matrix, and the objective share no code
/// with the library kernels. Feasible for the small instances tests use
/// (the edge-slot count must stay below ~16).
///
/// Slots follow the library's enumeration contract: column-major over the
/// strict lower triangle, `k` sequential for `j` ascending, `i` in `j+1..n`.
pub fn qp_oracle(
    phi: &Array2<f64>,
    x: &Array2<f64>,
    alpha: f64,
    beta: f64,
) -> (Array1<f64>, f64) {
    let n = phi.nrows();
    let m = n * (n - 1) / 2;
    assert!(m <= 16, "active-set enumeration is exponential in the slot count");
    let phi_sym = {
        let mut p = phi.clone();
        for i in 0..n {
            for j in 0..n {
                p[[i, j]] = 0.5 * (phi[[i, j]] + phi[[j, i]]);
            }
        }
        p
    };

    let mut pairs = Vec::with_capacity(m);
    for j in 0..n {
        for i in (j + 1)..n {
            pairs.push((i, j));
        }
    }

    // Basis column k = vec(L(e_k)): +1 on both diagonal entries, -1 on the
    // two off-diagonal entries of its pair.
    let mut basis = Array2::zeros((n * n, m));
    for (k, &(i, j)) in pairs.iter().enumerate() {
        basis[[i * n + i, k]] = 1.0;
        basis[[j * n + j, k]] = 1.0;
        basis[[i * n + j, k]] = -1.0;
        basis[[j * n + i, k]] = -1.0;
    }
    let mut q = Array2::zeros((m, m));
    for a in 0..m {
        for b in 0..m {
            let mut s = 0.0;
            for r in 0..n * n {
                s += basis[[r, a]] * basis[[r, b]];
            }
            q[[a, b]] = s;
        }
    }
    let mut dists = vec![0.0; m];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let mut s = 0.0;
        for f in 0..x.ncols() {
            let d = x[[i, f]] - x[[j, f]];
            s += d * d;
        }
        dists[k] = s;
    }
    // Stationarity on the free set: 2 Q_FF w_F = c_F with
    // c_k = 2⟨L(e_k), Φ⟩ − (β/α)·d_k.
    let mut c = vec![0.0; m];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let inner =
            phi_sym[[i, i]] + phi_sym[[j, j]] - phi_sym[[i, j]] - phi_sym[[j, i]];
        c[k] = 2.0 * inner - (beta / alpha) * dists[k];
    }

    let objective = |w: &Array1<f64>| -> f64 {
        let mut lw = vec![0.0; n * n];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            lw[i * n + i] += w[k];
            lw[j * n + j] += w[k];
            lw[i * n + j] -= w[k];
            lw[j * n + i] -= w[k];
        }
        let mut frob = 0.0;
        for r in 0..n {
            for s in 0..n {
                let d = lw[r * n + s] - phi_sym[[r, s]];
                frob += d * d;
            }
        }
        let smooth: f64 = (0..m).map(|k| w[k] * dists[k]).sum();
        alpha * frob + beta * smooth
    };

    let mut best_w = Array1::zeros(m);
    let mut best_obj = objective(&best_w);
    for mask in 0u32..(1 << m) {
        let free: Vec<usize> = (0..m).filter(|&k| mask & (1 << k) != 0).collect();
        if free.is_empty() {
            continue; // w = 0 seeded above
        }
        let f = free.len();
        let mut qff = Array2::zeros((f, f));
        let mut cf = Array1::zeros(f);
        for (a, &ka) in free.iter().enumerate() {
            cf[a] = c[ka];
            for (b, &kb) in free.iter().enumerate() {
                qff[[a, b]] = 2.0 * q[[ka, kb]];
            }
        }
        let Some(wf) = lu_solve(&qff, &cf) else { continue };
        if wf.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let mut w = Array1::zeros(m);
        for (a, &ka) in free.iter().enumerate() {
            w[ka] = wf[a].max(0.0);
        }
        let obj = objective(&w);
        if obj < best_obj {
            best_obj = obj;
            best_w = w;
        }
    }
    (best_w, best_obj)
}
