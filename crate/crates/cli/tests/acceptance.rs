//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use qksvm::encoders::{Ansatz, Type1Config, Type2Config};
use qksvm::exec::Execution;
use qksvm::experiments::{grid_search, readout_correction_study, shot_study, sycamore_like_rates, tuned_point};
use qksvm::experiments::{AnsatzSpec, GridSearchConfig, ReadoutStudyConfig, ShotStudyConfig};
use qksvm::kernel::{chernoff_relative_error_bound, exact_kernel_matrix, sample_kernel_entry, KernelEvaluator, KernelMatrix, Shots};
use qksvm::preprocess::{generate_synthetic, scale_all};
use qksvm::qubit_select::{best_path, normalize_metrics, score_path, DeviceGraph, Edge, Node, PathScoreConfig};
use qksvm::readout::{apply_channel_exact, readout_bounds, truncation_tail_probability, BitflipRates};
use qksvm::rng::{stream, StreamRng};
use qksvm::simulator::Gate;
use qksvm::svm::{train, Penalty, TrainOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn scaled_points(m: usize, d: usize, class_sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<i8>) {
    let ds = generate_synthetic(m, d, class_sep, seed).expect("synthetic data");
    (scale_all(&ds, true).expect("scaling"), ds.labels.clone())
}

fn uniform_points(rng: &mut StreamRng, m: usize, d: usize) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn ansatze(n: usize) -> Vec<Ansatz> {
    vec![Ansatz::Type1(Type1Config::chain(n, 0.7, 0.4)), Ansatz::Type2(Type2Config::new(n, 3 * n, 0.5).expect("type 2 config"))]
}

fn kernel_identity() -> Outcome {
    let mut rng = stream(1, &[]);
    let (mut diag, mut asym) = (0.0f64, 0.0f64);
    for n in [2, 4, 10] {
        for ansatz in ansatze(n) {
            let ev = KernelEvaluator::new(ansatz.clone());
            let xs = uniform_points(&mut rng, 6, ansatz.input_dim());
            for x in &xs {
                diag = diag.max((ev.entry(x, x).unwrap() - 1.0).abs());
                for z in &xs {
                    asym = asym.max((ev.entry(x, z).unwrap() - ev.entry(z, x).unwrap()).abs());
                }
            }
        }
    }
    outcome(diag <= 1e-9 && asym <= 1e-10, format!("max |K(x,x)-1| = {diag:.1e}, max asymmetry = {asym:.1e}"))
}

/// Dense matrix of a gate on the full register, qubit 0 the most significant bit.
fn dense(gate: &Gate, n: usize) -> DMatrix<Complex64> {
    let dim = 1 << n;
    let i = Complex64::i();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64| Complex64::new(re, 0.0);
    let single = |q: usize, u: [[Complex64; 2]; 2]| {
        DMatrix::from_fn(dim, dim, |r, col| {
            let shift = n - 1 - q;
            if (r ^ col) & !(1 << shift) != 0 {
                return c(0.0);
            }
            u[(r >> shift) & 1][(col >> shift) & 1]
        })
    };
    let pair = |a: usize, b: usize, sign: f64| {
        let u =
            [[c(1.0), c(0.0), c(0.0), c(0.0)], [c(0.0), c(s), i * sign * s, c(0.0)], [c(0.0), i * sign * s, c(s), c(0.0)], [c(0.0), c(0.0), c(0.0), c(1.0)]];
        let (sa, sb) = (n - 1 - a, n - 1 - b);
        let mask = (1 << sa) | (1 << sb);
        DMatrix::from_fn(dim, dim, |r, col| {
            if (r ^ col) & !mask != 0 {
                return c(0.0);
            }
            let local = |v: usize| (((v >> sa) & 1) << 1) | ((v >> sb) & 1);
            u[local(r)][local(col)]
        })
    };
    match gate {
        Gate::H(q) => single(*q, [[c(s), c(s)], [c(s), c(-s)]]),
        Gate::Rz(q, t) => single(*q, [[(-i * t / 2.0).exp(), c(0.0)], [c(0.0), (i * t / 2.0).exp()]]),
        Gate::Ry(q, t) => {
            let (sn, cs) = (t / 2.0).sin_cos();
            single(*q, [[c(cs), c(-sn)], [c(sn), c(cs)]])
        }
        Gate::SqrtISwap(a, b) => pair(*a, *b, 1.0),
        Gate::SqrtISwapDag(a, b) => pair(*a, *b, -1.0),
        Gate::DiagonalPhase(p) => DMatrix::from_fn(dim, dim, |r, col| if r == col { (i * p[r]).exp() } else { c(0.0) }),
    }
}

fn oracle_state(circuit: &[Gate], n: usize) -> DVector<Complex64> {
    let mut psi = DVector::from_element(1 << n, Complex64::new(0.0, 0.0));
    psi[0] = Complex64::new(1.0, 0.0);
    for g in circuit {
        psi = dense(g, n) * psi;
    }
    psi
}

fn oracle_equivalence() -> Outcome {
    let mut rng = stream(2, &[]);
    let mut worst = 0.0f64;
    for n in [2, 3, 4, 6] {
        for ansatz in ansatze(n) {
            let ev = KernelEvaluator::new(ansatz.clone());
            for _ in 0..20 {
                let xs = uniform_points(&mut rng, 2, ansatz.input_dim());
                let a = oracle_state(&ansatz.build(&xs[0]).unwrap(), n);
                let b = oracle_state(&ansatz.build(&xs[1]).unwrap(), n);
                let want = b.dotc(&a).norm_sqr();
                worst = worst.max((ev.entry(&xs[0], &xs[1]).unwrap() - want).abs());
            }
        }
    }
    outcome(worst <= 1e-10, format!("max deviation from dense oracle = {worst:.1e}"))
}

fn estimator_statistics() -> Outcome {
    let (shots, trials) = (5000u64, 10_000usize);
    let mut ok = true;
    let mut notes = Vec::new();
    for (t, p0) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        let mut rng = stream(3, &[t as u64]);
        let draws: Vec<f64> = (0..trials).map(|_| sample_kernel_entry(p0, shots, &mut rng).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / trials as f64;
        let var = draws.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let want_var = p0 * (1.0 - p0) / shots as f64;
        let se = (want_var / trials as f64).sqrt();
        ok &= (mean - p0).abs() <= 4.0 * se && (var / want_var - 1.0).abs() <= 0.1;
        for eps in [0.005, 0.01, 0.02, 0.05, 0.1] {
            let tail = draws.iter().filter(|k| ((*k - p0) / p0).abs() >= eps).count() as f64 / trials as f64;
            ok &= tail <= chernoff_relative_error_bound(p0, shots as f64, eps).unwrap();
        }
        notes.push(format!("p0={p0}: mean err {:.2} se, var ratio {:.3}", (mean - p0).abs() / se, var / want_var));
    }
    outcome(ok, notes.join("; "))
}

fn synthetic_kernel(m: usize, n: usize, seed: u64) -> (KernelMatrix, Vec<i8>) {
    let (points, y) = scaled_points(m, 3 * n, 2.0, seed);
    let ev = KernelEvaluator::new(Ansatz::Type2(Type2Config::new(n, 3 * n, 0.3).unwrap()));
    (exact_kernel_matrix(&points, None, &ev).unwrap(), y)
}

fn scale_invariance() -> Outcome {
    let (k, y) = synthetic_kernel(40, 4, 4);
    let c = 1.0;
    let base = train(&k, &y, c, Penalty::L1).unwrap();
    let base_pred = base.predict(&k).unwrap();
    let mut ok = true;
    let mut worst = 0.0f64;
    for r in [0.1, 0.29, 2.0, 10.0] {
        let kr = k.scaled(r);
        let model = train(&kr, &y, c / r, Penalty::L1).unwrap();
        ok &= model.predict(&kr).unwrap() == base_pred;
        for (a, b) in model.alphas.iter().zip(&base.alphas) {
            let rel = (a * r - b).abs() / b.abs().max(1e-12);
            if *b == 0.0 && *a == 0.0 {
                continue;
            }
            worst = worst.max(rel);
        }
    }
    ok &= worst <= 1e-5;
    outcome(ok, format!("predictions identical: {ok}, max relative alpha deviation = {worst:.1e}"))
}

/// Optimum of the dual by enumerating which multipliers sit at 0, at C or are free.
fn brute_force_dual(k: &DMatrix<f64>, y: &[f64], c: f64, penalty: Penalty) -> f64 {
    let m = y.len();
    let (upper, ridge) = match penalty {
        Penalty::L1 => (c, 0.0),
        Penalty::L2 => (f64::INFINITY, 1.0 / c),
    };
    let q = DMatrix::from_fn(m, m, |i, j| y[i] * y[j] * (k[(i, j)] + if i == j { ridge } else { 0.0 }));
    let states = if upper.is_finite() { 3usize } else { 2 };
    let mut best = f64::NEG_INFINITY;
    for code in 0..states.pow(m as u32) {
        let mut alpha = vec![0.0; m];
        let mut free = Vec::new();
        let mut rest = code;
        for (i, a) in alpha.iter_mut().enumerate() {
            match rest % states {
                0 => {}
                1 => free.push(i),
                _ => *a = upper,
            }
            rest /= states;
        }
        let f = free.len();
        if f > 0 {
            // stationarity on the free set plus the equality constraint
            let mut lhs = DMatrix::zeros(f + 1, f + 1);
            let mut rhs = DVector::zeros(f + 1);
            for (a, &i) in free.iter().enumerate() {
                for (b, &j) in free.iter().enumerate() {
                    lhs[(a, b)] = q[(i, j)];
                }
                lhs[(a, f)] = y[i];
                lhs[(f, a)] = y[i];
                rhs[a] = 1.0 - (0..m).map(|j| q[(i, j)] * alpha[j]).sum::<f64>();
            }
            rhs[f] = -(0..m).map(|j| y[j] * alpha[j]).sum::<f64>();
            let Some(sol) = lhs.lu().solve(&rhs) else { continue };
            for (a, &i) in free.iter().enumerate() {
                alpha[i] = sol[a];
            }
        }
        let feasible = alpha.iter().all(|a| *a >= -1e-9 && *a <= upper + 1e-9) && alpha.iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>().abs() <= 1e-9;
        if !feasible {
            continue;
        }
        let quad: f64 = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| alpha[i] * alpha[j] * q[(i, j)]).sum();
        best = best.max(alpha.iter().sum::<f64>() - 0.5 * quad);
    }
    best
}

fn svm_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for t in 0..50u64 {
        let mut rng = stream(5, &[t]);
        let m = rng.random_range(3..=8);
        let feats: Vec<Vec<f64>> = (0..m).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let kernel = DMatrix::from_fn(m, m, |i, j| feats[i].iter().zip(&feats[j]).map(|(a, b)| a * b).sum::<f64>());
        let mut y: Vec<i8> = (0..m).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        y[0] = 1;
        y[1] = -1;
        let c = 10f64.powf(rng.random_range(-1.0..1.5));
        let penalty = if t % 2 == 0 { Penalty::L1 } else { Penalty::L2 };
        let k = KernelMatrix::from_fn(m, m, |i, j| kernel[(i, j)]);
        let model = train(&k, &y, c, penalty).unwrap();
        let yf: Vec<f64> = y.iter().map(|v| f64::from(*v)).collect();
        let want = brute_force_dual(&kernel, &yf, c, penalty);
        let got = model.dual_objective(&k);
        worst = worst.max((got - want).abs() / want.abs().max(1e-12));
    }
    outcome(worst <= 1e-4, format!("max relative dual gap over 50 instances = {worst:.1e}"))
}

fn random_rates(rng: &mut StreamRng, n: usize) -> BitflipRates {
    let q10 = (0..n).map(|_| rng.random_range(0.0..0.1)).collect();
    let q01 = (0..n).map(|_| rng.random_range(0.0..0.2)).collect();
    BitflipRates::new(q10, q01).unwrap()
}

fn readout_bound_check() -> Outcome {
    let n = 10;
    let mut violations = 0;
    for t in 0..100u64 {
        let mut rng = stream(6, &[t]);
        let amps: Vec<f64> = (0..1 << n).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>();
        let mut dist: Vec<f64> = amps.iter().map(|a| a * a).collect();
        // spread the noiseless all-zeros probability over (0, 1)
        let norm: f64 = dist[1..].iter().sum();
        let k = rng.random_range(0.0..1.0);
        dist[0] = 0.0;
        dist.iter_mut().for_each(|p| *p *= (1.0 - k) / norm);
        dist[0] = k;
        let rates = random_rates(&mut rng, n);
        let observed = apply_channel_exact(&dist, &rates).unwrap()[0];
        let (lo, hi) = readout_bounds(k, &rates);
        if observed < lo - 1e-12 || observed > hi + 1e-12 {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} bound violations in 100 instances"))
}

fn truncated_correction() -> Outcome {
    let cfg = ReadoutStudyConfig { seed: 7, ..ReadoutStudyConfig::default() };
    let rates = sycamore_like_rates(cfg.n_qubits, cfg.seed).unwrap();
    let study = readout_correction_study(&cfg, &rates, &rates, Execution::default()).unwrap();
    let raw = study.mean_abs_error_raw;
    let (k1, k2) = (study.mean_abs_error_corrected[0], study.mean_abs_error_corrected[1]);
    let reduction = 1.0 - k1 / raw;
    outcome(reduction >= 0.3 && k2 <= k1 * 1.05, format!("mean |K-K_hat| raw {raw:.4}, k_max=1 {k1:.4} ({:.0}% lower), k_max=2 {k2:.4}", 100.0 * reduction))
}

fn tail_exponent() -> Outcome {
    let rates = sycamore_like_rates(10, 8).unwrap();
    let mut ok = true;
    let mut slopes = Vec::new();
    for x in [0usize, 0b1010110011, (1 << 10) - 1] {
        let logs: Vec<f64> = (0..=4).map(|k| truncation_tail_probability(&rates, k, x).ln()).collect();
        ok &= logs.windows(2).all(|w| w[1] < w[0]);
        let mean_k = 2.0;
        let mean_l = logs.iter().sum::<f64>() / 5.0;
        let slope = (0..5).map(|k| (k as f64 - mean_k) * (logs[k] - mean_l)).sum::<f64>() / 10.0;
        ok &= slope < 0.0;
        slopes.push(format!("{slope:.2}"));
    }
    outcome(ok, format!("log-tail slopes per k_max: {}", slopes.join(", ")))
}

fn random_graph(seed: u64) -> (DeviceGraph, usize) {
    let mut rng = stream(9, &[seed]);
    let n = rng.random_range(4..=12u32);
    let mut ids: Vec<u32> = (0..40).collect();
    for i in 0..ids.len() {
        let j = rng.random_range(i..ids.len());
        ids.swap(i, j);
    }
    ids.truncate(n as usize);
    let metric =
        |rng: &mut StreamRng, names: &[&str]| -> BTreeMap<String, f64> { names.iter().map(|m| (m.to_string(), rng.random_range(0.001..0.1))).collect() };
    let nodes: Vec<Node> = ids.iter().map(|&id| Node { id, metrics: metric(&mut rng, &["T1", "T2", "p00", "p11", "rb_error"]) }).collect();
    let mut edges = Vec::new();
    for a in 0..n as usize {
        for b in a + 1..n as usize {
            if b == a + 1 || rng.random_bool(0.25) {
                edges.push(Edge { a: ids[a], b: ids[b], metrics: metric(&mut rng, &["xeb_error"]) });
            }
        }
    }
    let k = rng.random_range(2..=(n as usize).min(7));
    (DeviceGraph::new(nodes, edges).unwrap(), k)
}

fn enumerate_paths(graph: &DeviceGraph, k: usize, path: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if path.len() == k {
        out.push(path.clone());
        return;
    }
    let candidates: Vec<u32> = match path.last() {
        None => graph.nodes().iter().map(|n| n.id).collect(),
        Some(&last) => graph
            .edges()
            .iter()
            .filter_map(|e| {
                if e.a == last {
                    Some(e.b)
                } else if e.b == last {
                    Some(e.a)
                } else {
                    None
                }
            })
            .collect(),
    };
    for next in candidates {
        if !path.contains(&next) {
            path.push(next);
            enumerate_paths(graph, k, path, out);
            path.pop();
        }
    }
}

fn qubit_selection_oracle() -> Outcome {
    let cfg = PathScoreConfig::default();
    let mut mismatches = 0;
    for t in 0..20 {
        let (graph, k) = random_graph(t);
        let normalized = normalize_metrics(&graph, &cfg).unwrap();
        let mut paths = Vec::new();
        enumerate_paths(&normalized, k, &mut Vec::new(), &mut paths);
        let mut want: Option<(f64, Vec<u32>)> = None;
        for p in paths.into_iter().filter(|p| p[0] < p[k - 1]) {
            let s = score_path(&p, &normalized, &cfg).unwrap();
            if want.as_ref().is_none_or(|(bs, bp)| s > *bs || (s == *bs && p < *bp)) {
                want = Some((s, p));
            }
        }
        let got = best_path(&normalized, k, &cfg, Execution::default()).unwrap();
        let (ws, wp) = want.unwrap();
        if got.path != wp || (got.score - ws).abs() > 1e-12 {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches against exhaustive enumeration on 20 graphs"))
}

fn kernel_magnitude_trends() -> Outcome {
    let mut medians = Vec::new();
    for n in [4, 6, 8, 10] {
        let (points, _) = scaled_points(30, n, 2.0, 10);
        let ev = KernelEvaluator::new(Ansatz::Type1(Type1Config::chain(n, 0.2, 0.2)));
        medians.push(exact_kernel_matrix(&points, None, &ev).unwrap().median_off_diagonal().unwrap());
    }
    let type1_ok = medians.windows(2).all(|w| w[1] <= w[0]);

    let (points, y) = scaled_points(40, 67, 3.0, 10);
    let cfg = GridSearchConfig { c1: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3], c2: Vec::new(), folds: 4, c: 1.0, seed: 10, feasibility_threshold: 1e-2 };
    let base = AnsatzSpec::Type2 { n_qubits: 10, c1: 0.1 };
    let grid = grid_search(&points, &y, &base, &cfg, &TrainOptions::new(Penalty::L1), Execution::default()).unwrap();
    let tuned = tuned_point(&grid).unwrap();
    let type2_ok = tuned.median_kernel >= 0.1;
    let shown: Vec<String> = medians.iter().map(|m| format!("{m:.3}")).collect();
    outcome(
        type1_ok && type2_ok,
        format!("type 1 medians over n = 4,6,8,10: {}; type 2 tuned c1 = {} median {:.3}", shown.join(", "), tuned.c1, tuned.median_kernel),
    )
}

fn shot_study_trends() -> Outcome {
    let n = 10;
    let (points, y) = scaled_points(60, 3 * n, 6.0, 11);
    let ev = KernelEvaluator::new(Ansatz::Type2(Type2Config::new(n, 3 * n, 0.1).unwrap()));
    let k = exact_kernel_matrix(&points, None, &ev).unwrap();
    let shots = vec![Shots::Finite(500), Shots::Finite(5000), Shots::Finite(50_000), Shots::Infinite];
    let cfg = ShotStudyConfig { shots, trials: 10, folds: 10, c: 1.0, seed: 11 };
    let rows = shot_study(&k, &y, &cfg, &TrainOptions::new(Penalty::L1)).unwrap();
    let (r500, r5k, r50k, inf) = (&rows[0], &rows[1], &rows[2], &rows[3]);
    let ok = (r5k.validation_mean - r50k.validation_mean).abs() <= 0.03
        && inf.validation_mean - r5k.validation_mean <= 0.03
        && inf.validation_mean - r50k.validation_mean <= 0.03
        && r500.train_mean <= inf.train_mean;
    outcome(
        ok,
        format!(
            "validation R=5000 {:.3}, R=50000 {:.3}, R=inf {:.3}; train R=500 {:.3}, R=inf {:.3}",
            r5k.validation_mean, r50k.validation_mean, inf.validation_mean, r500.train_mean, inf.train_mean
        ),
    )
}

const SUBCOMMANDS: [&str; 8] = ["kernel", "train-eval", "learning-curve", "select-dataset", "shot-study", "grid-search", "calibrate", "select-qubits"];

fn run_all(config: &Path, out: &Path, threads: usize) -> bool {
    SUBCOMMANDS.iter().all(|cmd| {
        Command::new(env!("CARGO_BIN_EXE_qksvm"))
            .arg(cmd)
            .arg("--config")
            .arg(config)
            .arg("--out")
            .arg(out)
            .arg("--threads")
            .arg(threads.to_string())
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

/// Every output file, with run timings removed from the manifest.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = fs::read(&path).unwrap();
        if name == "manifest.json" {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            for run in v["runs"].as_object_mut().unwrap().values_mut() {
                let run = run.as_object_mut().unwrap();
                for key in ["wall_time_seconds", "threads", "parallel"] {
                    run.remove(key);
                }
            }
            bytes = serde_json::to_vec(&v).unwrap();
        }
        files.insert(name, bytes);
    }
    files
}

fn small_config(dir: &Path) -> PathBuf {
    let graph = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sycamore23.json");
    let cfg = serde_json::json!({
        "seed": 12,
        "synthetic": { "rows": 80, "dim": 12, "class_sep": 3.0 },
        "ansatz": { "type": "type2", "n_qubits": 4, "c1": 0.2 },
        "shots": 2000,
        "readout": { "k_max": 2 },
        "split": { "m": 30, "v": 12 },
        "learning_curve": { "sizes": [10, 20, 30], "trials": 3 },
        "select_dataset": { "pool": 60, "subset": 24, "folds": 4, "trials": 3 },
        "shot_study": { "shots": [200, 2000, "inf"], "trials": 3, "folds": 4 },
        "grid_search": { "c1": [0.1, 0.2], "folds": 3 },
        "calibrate": { "pairs": 6, "shots": 20000, "study_circuits": 6, "study_shots": 2000, "k_max": [1, 2] },
        "select_qubits": { "graph": graph, "k": 8 }
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_vec_pretty(&cfg).unwrap()).unwrap();
    path
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let dirs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    let ran = run_all(&config, &dirs[0], 1) && run_all(&config, &dirs[1], 1) && run_all(&config, &dirs[2], 4);
    if !ran {
        return outcome(false, "a subcommand exited with an error".into());
    }
    let snaps: Vec<_> = dirs.iter().map(|d| snapshot(d)).collect();
    let rerun = snaps[0] == snaps[1];
    let parallel = snaps[0] == snaps[2];
    outcome(rerun && parallel, format!("{} files; reruns identical: {rerun}; 1 vs 4 threads identical: {parallel}", snaps[0].len()))
}

type Criterion = (&'static str, fn() -> Outcome, u64);

fn main() {
    let criteria: [Criterion; 12] = [
        ("kernel identity and symmetry", kernel_identity, 10),
        ("composed circuit matches dense oracle", oracle_equivalence, 10),
        ("shot estimator statistics", estimator_statistics, 30),
        ("SVM scale invariance", scale_invariance, 5),
        ("SVM dual matches brute-force QP", svm_oracle, 30),
        ("readout bounds", readout_bound_check, 30),
        ("truncated readout correction", truncated_correction, 300),
        ("truncation tail decay", tail_exponent, 1),
        ("qubit selection matches enumeration", qubit_selection_oracle, 60),
        ("kernel magnitude trends", kernel_magnitude_trends, 300),
        ("shot study trends", shot_study_trends, 600),
        ("byte-identical reruns", determinism, 600),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= Duration::from_secs(*budget);
        if !pass {
            failures += 1;
        }
        println!("{} criterion {:>2} {name}: {} ({:.2}s of {budget}s)", if pass { "PASS" } else { "FAIL" }, i + 1, result.detail, elapsed.as_secs_f64());
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
