//! Acceptance gate: one test per release criterion, each enforcing its
//! stated tolerance and runtime budget. Criteria needing the full-size
//! citation datasets fail with instructions when the data directory is
//! absent instead of silently shrinking their scope.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array1;
use rand::Rng;

use lapgnn::attack::random_attack;
use lapgnn::dataset::{save_dataset, Split};
use lapgnn::denoise::{mm_step, stage1_solve, DenoiseProblem, LinearTerm};
use lapgnn::experiment::{run_experiment, sweep, AttackKind, ExperimentConfig, Mode};
use lapgnn::gcn::{
    gcn_forward, gnn_loss, grad_theta, grad_w, normalize_weights, ForwardMode, GcnParams,
};
use lapgnn::joint::{joint_train, JointConfig};
use lapgnn::operators::{
    adjoint_apply, dirichlet_energy, edge_count, edge_index, edge_pair, laplacian_apply,
};

use common::{qp_oracle, random_matrix, random_vector, rel_err, rng};

/// Root of the full-size dataset exports; `LAPGNN_DATA_DIR` overrides the
/// default `<workspace>/data`.
fn data_root() -> PathBuf {
    std::env::var_os("LAPGNN_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

/// Returns the dataset directory, or fails the criterion with instructions
/// when the export is not present.
fn require_dataset(name: &str) -> PathBuf {
    let dir = data_root().join(name);
    let missing: Vec<&str> = ["features.tsv", "edges.tsv", "labels.tsv"]
        .into_iter()
        .filter(|f| !dir.join(f).exists())
        .collect();
    if missing.is_empty() {
        return dir;
    }
    panic!(
        "dataset {name:?} is required by this criterion but was not found.\n\
         \n\
         Expected layout: {}/{{features.tsv, edges.tsv, labels.tsv}} (missing: {})\n\
           features.tsv: one `node<TAB>feature<TAB>value` row per nonzero entry\n\
           edges.tsv:    one `u<TAB>v` row per undirected edge\n\
           labels.tsv:   one `node<TAB>label` row per node, ids covering 0..n\n\
         Set LAPGNN_DATA_DIR to point at a different data root.\n\
         \n\
         This environment ships no copy of the citation datasets and has no\n\
         network access to fetch one, so the criterion cannot execute; it\n\
         fails here rather than being weakened. Convert a standard export of\n\
         the dataset into the layout above to run it.",
        dir.display(),
        missing.join(", "),
    )
}

// --- criterion 1 ---

#[test]
fn criterion_1_operator_suite() {
    let start = Instant::now();
    let mut r = rng(0xacce97);

    for trial in 0..100 {
        let n = r.random_range(3..30);
        let w = random_vector(&mut r, edge_count(n), -1.0, 1.0);
        let y = random_matrix(&mut r, n, n, -1.0, 1.0);
        let lw = laplacian_apply(w.view(), n);
        let ls = adjoint_apply(y.view());
        let lhs: f64 = lw.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let rhs = w.dot(&ls);
        assert!(
            (lhs - rhs).abs() <= 1e-10,
            "trial {trial}: adjoint identity violated by {}",
            (lhs - rhs).abs()
        );

        // Feasible weights give a valid Laplacian: symmetric, zero row
        // sums, positive semidefinite.
        let wp = w.mapv(f64::abs);
        let lap = laplacian_apply(wp.view(), n);
        for i in 0..n {
            for j in 0..i {
                assert_eq!(lap[[i, j]], lap[[j, i]], "trial {trial}: asymmetry at ({i},{j})");
            }
            assert!(
                lap.row(i).sum().abs() <= 1e-10,
                "trial {trial}: row {i} sums to {}",
                lap.row(i).sum()
            );
        }
        let eigs = common::jacobi_eigh(lap.view());
        assert!(eigs[0] >= -1e-9, "trial {trial}: negative eigenvalue {}", eigs[0]);
    }

    for n in 1..=50usize {
        for k in 0..edge_count(n) {
            let (i, j) = edge_pair(k, n);
            assert!(j < i && i < n, "n={n} k={k}: pair ({i},{j}) out of order");
            assert_eq!(edge_index(i, j, n), k, "n={n}: edge_index does not invert edge_pair");
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "operator suite took {elapsed:.2} s; budget is 5 s");
}

// --- criterion 2 ---

#[test]
fn criterion_2_dirichlet_identity() {
    let mut r = rng(0xd1b1c);
    for trial in 0..50 {
        let n = r.random_range(2..20);
        let d = r.random_range(1..6);
        let w = random_vector(&mut r, edge_count(n), 0.0, 2.0);
        let x = random_matrix(&mut r, n, d, -2.0, 2.0);

        // Trace form, computed with plain matrix products.
        let lap = laplacian_apply(w.view(), n);
        let lx = lap.dot(&x);
        let trace: f64 = x.iter().zip(lx.iter()).map(|(a, b)| a * b).sum();

        let pairwise = dirichlet_energy(w.view(), x.view());
        assert!(
            rel_err(trace, pairwise) <= 1e-8,
            "trial {trial}: trace form {trace} vs pairwise form {pairwise}"
        );
    }
}

// --- criterion 3 ---

#[test]
fn criterion_3_stage1_matches_the_oracle() {
    let start = Instant::now();
    let mut r = rng(0x57a6e1);
    for trial in 0..20 {
        let n = r.random_range(3..=5usize);
        let m = edge_count(n);
        let w_true = random_vector(&mut r, m, 0.0, 1.5);
        let mut phi = laplacian_apply(w_true.view(), n);
        let noise = random_matrix(&mut r, n, n, -0.3, 0.3);
        phi = &phi + &(&noise + &noise.t());
        let x = random_matrix(&mut r, n, 3, -1.0, 1.0);
        let alpha = 1.0;
        let beta = r.random_range(0.05..0.5);

        let problem = DenoiseProblem::new(&phi, &x, alpha, beta, LinearTerm::Exact).unwrap();
        let w0 = Array1::from_elem(m, 0.5);
        let (w, trace) = stage1_solve(&problem, w0.view(), 20_000, 1e-10).unwrap();

        let (_, oracle_obj) = qp_oracle(&phi, &x, alpha, beta);
        let achieved = problem.objective(w.view());
        assert!(
            (achieved - oracle_obj).abs() <= 1e-5,
            "trial {trial}: objective {achieved} vs oracle {oracle_obj}"
        );
        assert!(
            trace.final_kkt <= 1e-6,
            "trial {trial}: final KKT residual {} above 1e-6",
            trace.final_kkt
        );
        for (t, pair) in trace.objectives.windows(2).enumerate() {
            assert!(
                pair[1] <= pair[0] + 1e-9,
                "trial {trial}: objective rose at step {t}: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "stage-1 suite took {elapsed:.2} s; budget is 30 s");
}

// --- criterion 4 ---

#[test]
fn criterion_4_gradients_match_finite_differences() {
    let start = Instant::now();
    for seed in 0..20u64 {
        let mut r = rng(seed);
        let n = r.random_range(4..9);
        let d = r.random_range(2..5);
        let h = r.random_range(2..5);
        let c = r.random_range(2..4);
        // Strictly positive weights keep finite differences off the
        // projection kink and the adjacency entries nonnegative.
        let w = random_vector(&mut r, edge_count(n), 0.2, 1.5);
        let x = random_matrix(&mut r, n, d, -1.0, 1.0);
        let params = GcnParams::init(d, h, c, &mut r);
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        let mask: Vec<usize> = (0..n.div_ceil(2)).collect();
        let wd = if seed % 2 == 0 { 0.0 } else { 0.3 };

        let ahat = normalize_weights(w.view(), n).unwrap();
        let cache = gcn_forward(&params, &ahat, &x, ForwardMode::Eval).unwrap();
        let (dw1, dw2) = grad_theta(&cache, &labels, &mask, wd).unwrap();
        let dw = grad_w(&cache, &labels, &mask, w.view()).unwrap();

        let h_fd = 1e-6;
        let loss_of = |p: &GcnParams, wd: f64| -> f64 {
            let cache = gcn_forward(p, &ahat, &x, ForwardMode::Eval).unwrap();
            gnn_loss(&cache.logits, &labels, &mask, p, wd).unwrap()
        };
        for i in 0..d {
            for j in 0..h {
                let mut plus = params.clone();
                plus.w1[[i, j]] += h_fd;
                let mut minus = params.clone();
                minus.w1[[i, j]] -= h_fd;
                let fd = (loss_of(&plus, wd) - loss_of(&minus, wd)) / (2.0 * h_fd);
                assert!(
                    rel_err(fd, dw1[[i, j]]) <= 1e-4,
                    "seed {seed} W1[{i},{j}]: fd {fd} vs analytic {}",
                    dw1[[i, j]]
                );
            }
        }
        for i in 0..h {
            for j in 0..c {
                let mut plus = params.clone();
                plus.w2[[i, j]] += h_fd;
                let mut minus = params.clone();
                minus.w2[[i, j]] -= h_fd;
                let fd = (loss_of(&plus, wd) - loss_of(&minus, wd)) / (2.0 * h_fd);
                assert!(
                    rel_err(fd, dw2[[i, j]]) <= 1e-4,
                    "seed {seed} W2[{i},{j}]: fd {fd} vs analytic {}",
                    dw2[[i, j]]
                );
            }
        }

        // grad_w differentiates the data loss only, so the reference loss
        // drops weight decay.
        let fd_w = common::fd_gradient(
            |wv| {
                let ah = normalize_weights(wv.view(), n).unwrap();
                let cache = gcn_forward(&params, &ah, &x, ForwardMode::Eval).unwrap();
                gnn_loss(&cache.logits, &labels, &mask, &params, 0.0).unwrap()
            },
            &w,
            h_fd,
        );
        for k in 0..w.len() {
            assert!(
                rel_err(fd_w[k], dw[k]) <= 1e-4,
                "seed {seed} w[{k}]: fd {} vs analytic {}",
                fd_w[k],
                dw[k]
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "gradient suite took {elapsed:.2} s; budget is 60 s");
}

// --- criteria 5-7: full-size citation datasets ---

fn citation_base(dataset: PathBuf, out: &Path) -> ExperimentConfig {
    ExperimentConfig { dataset, output_dir: out.to_path_buf(), ..ExperimentConfig::default() }
}

#[test]
fn criterion_5_clean_graph_reproduction() {
    let cora = require_dataset("cora");
    let citeseer = require_dataset("citeseer");
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let seeds: Vec<u64> = (0..5).collect();

    let base = citation_base(cora, &dir.path().join("cora"));
    let cells = sweep(
        &base,
        &[0.0],
        &seeds,
        &[Mode::GcnOnly, Mode::TwoStage, Mode::Joint],
    )
    .unwrap();
    for (mode, center) in [(Mode::GcnOnly, 0.8350), (Mode::TwoStage, 0.8362), (Mode::Joint, 0.8353)]
    {
        let cell = cells.iter().find(|c| c.mode == mode).unwrap();
        assert!(
            (cell.mean - center).abs() <= 0.02,
            "{mode} mean accuracy {:.4} outside {center} ± 0.02",
            cell.mean
        );
    }

    let base = citation_base(citeseer, &dir.path().join("citeseer"));
    let cells = sweep(&base, &[0.0], &seeds, &[Mode::Joint]).unwrap();
    assert!(
        (cells[0].mean - 0.7152).abs() <= 0.02,
        "citeseer joint mean accuracy {:.4} outside 0.7152 ± 0.02",
        cells[0].mean
    );

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 900.0, "clean reproduction took {elapsed:.0} s; budget is 15 min");
}

#[test]
fn criterion_6_random_attack_defense_trend() {
    let cora = require_dataset("cora");
    let dir = tempfile::tempdir().unwrap();
    let mut base = citation_base(cora, dir.path());
    base.attack = AttackKind::Random;
    let seeds: Vec<u64> = (0..5).collect();

    let cells = sweep(
        &base,
        &[0.6, 0.8, 1.0],
        &seeds,
        &[Mode::GcnOnly, Mode::TwoStage, Mode::Joint],
    )
    .unwrap();
    for &rate in &[0.6, 0.8, 1.0] {
        let mean = |mode: Mode| {
            cells.iter().find(|c| c.ptb_rate == rate && c.mode == mode).unwrap().mean
        };
        let undefended = mean(Mode::GcnOnly);
        for mode in [Mode::TwoStage, Mode::Joint] {
            assert!(
                mean(mode) >= undefended + 0.03,
                "rate {rate}: {mode} mean {:.4} does not beat gcn-only {:.4} by 3 points",
                mean(mode),
                undefended
            );
        }
    }
}

#[test]
fn criterion_7_runtime_order() {
    let cora = require_dataset("cora");
    let dir = tempfile::tempdir().unwrap();

    let mut cfg = citation_base(cora.clone(), &dir.path().join("two-stage"));
    cfg.mode = Mode::TwoStage;
    let report = run_experiment(&cfg).unwrap();
    let stage1_s = report
        .timings
        .phases
        .iter()
        .find(|(name, _)| name == "stage1")
        .map(|(_, s)| *s)
        .unwrap();
    assert!(stage1_s < 120.0, "200-epoch denoising took {stage1_s:.1} s; budget is 120 s");

    let mut cfg = citation_base(cora, &dir.path().join("joint"));
    cfg.mode = Mode::Joint;
    let report = run_experiment(&cfg).unwrap();
    let train_s = report
        .timings
        .phases
        .iter()
        .find(|(name, _)| name == "train")
        .map(|(_, s)| *s)
        .unwrap();
    assert!(train_s < 600.0, "200-epoch joint training took {train_s:.1} s; budget is 600 s");
}

// --- criterion 8 ---

#[test]
fn criterion_8_external_edge_lists_run_end_to_end() {
    // A full-size externally poisoned list is used when provided; the
    // harness capability itself is proven on a desk-scale fixture either
    // way. No accuracy band is asserted in either case.
    let dir = tempfile::tempdir().unwrap();
    let ds = common::planted_partition(8, 2, 0.9, 0.05, 0.15, 13);
    let data_dir = dir.path().join("data");
    save_dataset(&ds, &data_dir).unwrap();

    let mut lines = String::new();
    for &(u, v) in &ds.edges {
        lines.push_str(&format!("{u}\t{v}\n"));
    }
    lines.push_str("0\t15\n1\t14\n2\t13\n");
    let edge_path = dir.path().join("external.tsv");
    fs::write(&edge_path, &lines).unwrap();

    let cfg = ExperimentConfig {
        dataset: data_dir,
        output_dir: dir.path().join("run"),
        mode: Mode::TwoStage,
        attack: AttackKind::ExternalEdgelist,
        edgelist: Some(edge_path),
        epochs: 40,
        hidden: 8,
        dropout: 0.0,
        optimizer: lapgnn::train::OptimizerKind::Adam,
        eta_theta: 0.05,
        seed: 7,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&cfg).unwrap();
    for acc in [report.accuracies.train, report.accuracies.val, report.accuracies.test] {
        assert!((0.0..=1.0).contains(&acc));
    }
    assert!(report.dataset_stats.injected_edges > 0);
    assert!(cfg.output_dir.join("report.json").exists());

    let external = data_root().join("cora-external-edges.tsv");
    if external.exists() {
        let cora = require_dataset("cora");
        let mut cfg = citation_base(cora, &dir.path().join("cora-external"));
        cfg.attack = AttackKind::ExternalEdgelist;
        cfg.edgelist = Some(external);
        let report = run_experiment(&cfg).unwrap();
        assert!((0.0..=1.0).contains(&report.accuracies.test));
    }
}

// --- criterion 9 ---

#[test]
fn criterion_9_degeneracy_equivalence() {
    let ds = common::planted_partition(4, 2, 0.8, 0.1, 0.3, 7);
    let pg = random_attack(&ds, 0.4, 99).unwrap();
    let split = Split { train: vec![0, 1, 4, 5], val: vec![2, 6], test: vec![3, 7] };
    let cfg = JointConfig {
        beta: 0.3,
        l2_prime: 0.0,
        outer_epochs: 50,
        disable_gnn_term: true,
        record_w_history: true,
        ..JointConfig::default()
    };
    let params = GcnParams::init(ds.d(), 8, ds.num_classes, &mut rng(1));
    let out = joint_train(&ds, &pg, &split, &cfg, params, &mut rng(2)).unwrap();

    let problem =
        DenoiseProblem::new(&pg.to_noisy_laplacian(), &ds.features, cfg.alpha, cfg.beta, LinearTerm::Exact)
            .unwrap();
    let history = out.w_history.as_ref().unwrap();
    assert_eq!(history.len(), 51, "initial point plus 50 joint iterates");
    let mut w = pg.noisy_weights();
    for (t, recorded) in history.iter().enumerate() {
        for k in 0..w.len() {
            assert_eq!(
                recorded[k].to_bits(),
                w[k].to_bits(),
                "iterate {t} slot {k} diverges from the denoiser chain"
            );
        }
        w = mm_step(w.view(), problem.c(), ds.n());
    }
}
