//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::Context as _;
use serde::{Deserialize, Serialize};

use qksvm::experiments::{
    self, child_seed, prepare_split, sycamore_like_rates, tuned_point, AnsatzSpec, GridSearchConfig, KernelPair, LearningCurveConfig, PreparedSplit,
    ReadoutStudyConfig, SelectDatasetConfig, ShotStudyConfig,
};
use qksvm::kernel::{exact_kernel_matrix, sampled_kernel_matrix, KernelKind, ReadoutModel, SamplingOptions};
use qksvm::preprocess::{generate_synthetic, scale_all, stratified_downsample, Dataset};
use qksvm::qubit_select::{self, DeviceGraph, PathScoreConfig};
use qksvm::readout::{estimate_rates_from_experiments, simulate_calibration, truncation_tail_probability};
use qksvm::rng::stream;
use qksvm::svm::{rbf_gamma_scale, rbf_kernel, TrainOptions};
use qksvm::{Ansatz, BitflipRates, Execution, KernelEvaluator, KernelMatrix, Shots};

use crate::config::{config_error, ExperimentConfig};
use crate::output::{sha256_hex, Outputs, RunRecord};

pub struct Context {
    pub cfg: ExperimentConfig,
    pub execution: Execution,
    command: &'static str,
    out: Outputs,
    record: RunRecord,
}

impl Context {
    pub fn new(cfg: ExperimentConfig, config_bytes: &[u8], execution: Execution, threads: Option<usize>, command: &'static str) -> anyhow::Result<Self> {
        let out = Outputs::new(&cfg.out)?;
        let record = RunRecord {
            config_sha256: sha256_hex(config_bytes),
            seed: cfg.seed,
            cli_version: env!("CARGO_PKG_VERSION").to_string(),
            library_version: qksvm::VERSION.to_string(),
            parallel: execution.is_parallel(),
            threads,
            wall_time_seconds: 0.0,
            outputs: Vec::new(),
        };
        Ok(Self { cfg, execution, command, out, record })
    }

    fn finish(self) -> anyhow::Result<()> {
        let dir = self.out.dir().to_path_buf();
        self.out.finish(self.command, self.record)?;
        println!("wrote {}", dir.display());
        Ok(())
    }

    fn train_options(&self) -> TrainOptions {
        TrainOptions { penalty: self.cfg.penalty, execution: self.execution, ..Default::default() }
    }

    fn evaluator(&self, ansatz: Ansatz) -> KernelEvaluator {
        KernelEvaluator::new(ansatz).with_execution(self.execution).with_contraction(self.cfg.contract)
    }
}

fn require_file(path: &Path, what: &str) -> anyhow::Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(config_error(format!("{what} file {} does not exist", path.display())))
    }
}

fn load_dataset(cfg: &ExperimentConfig) -> anyhow::Result<Dataset> {
    match &cfg.dataset {
        Some(path) => Ok(Dataset::load(path, cfg.column_meta.as_deref()).with_context(|| format!("loading {}", path.display()))?),
        None => {
            let dim = cfg.synthetic.dim.unwrap_or(match cfg.ansatz {
                AnsatzSpec::Type1 { n_qubits, .. } => n_qubits,
                AnsatzSpec::Type2 { .. } => 67,
            });
            Ok(generate_synthetic(cfg.synthetic.rows, dim, cfg.synthetic.class_sep, cfg.seed).map_err(|e| config_error(format!("synthetic dataset: {e}")))?)
        }
    }
}

fn prepared(ctx: &Context) -> anyhow::Result<(PreparedSplit, Ansatz)> {
    let cfg = &ctx.cfg;
    let ds = load_dataset(cfg)?;
    if cfg.split.m + cfg.split.v > ds.len() {
        return Err(config_error(format!("split m + v = {} exceeds {} rows", cfg.split.m + cfg.split.v, ds.len())));
    }
    let split = prepare_split(&ds, cfg.split.m, cfg.split.v, cfg.seed, cfg.scaling, cfg.take_abs)?;
    let ansatz = cfg.ansatz.build(ds.dim())?;
    Ok((split, ansatz))
}

/// Indices and labels of the train/test split, written next to the kernels.
#[derive(Debug, Serialize, Deserialize)]
struct SplitFile {
    seed: u64,
    train_idx: Vec<usize>,
    test_idx: Vec<usize>,
    y_train: Vec<i8>,
    y_test: Vec<i8>,
}

#[derive(Debug, Serialize)]
struct KernelSummary {
    variant: &'static str,
    shots: Shots,
    train_median_off_diagonal: Option<f64>,
    train_mean_diagonal: f64,
    test_median: Option<f64>,
}

fn summary(variant: &'static str, train: &KernelMatrix, test: &KernelMatrix) -> KernelSummary {
    let mut t = test.as_slice().to_vec();
    t.sort_by(f64::total_cmp);
    let test_median = (!t.is_empty()).then(|| {
        let n = t.len();
        if n % 2 == 1 {
            t[n / 2]
        } else {
            0.5 * (t[n / 2 - 1] + t[n / 2])
        }
    });
    KernelSummary {
        variant,
        shots: train.shots,
        train_median_off_diagonal: train.median_off_diagonal(),
        train_mean_diagonal: train.mean_diagonal(),
        test_median,
    }
}

fn readout_rates(cfg: &ExperimentConfig, path: Option<&PathBuf>, n_qubits: usize) -> anyhow::Result<BitflipRates> {
    let rates = match path {
        Some(p) => BitflipRates::load(p).map_err(|e| config_error(format!("rates {}: {e}", p.display())))?,
        None => sycamore_like_rates(n_qubits, cfg.seed)?,
    };
    if rates.n_qubits() != n_qubits {
        return Err(config_error(format!("rates cover {} qubits, the ansatz has {n_qubits}", rates.n_qubits())));
    }
    Ok(rates)
}

pub fn kernel(mut ctx: Context) -> anyhow::Result<()> {
    let (split, ansatz) = prepared(&ctx)?;
    let n_qubits = ansatz.n_qubits();
    let ev = ctx.evaluator(ansatz);
    let exact_train = exact_kernel_matrix(&split.x_train, None, &ev)?;
    let exact_test = exact_kernel_matrix(&split.x_test, Some(&split.x_train), &ev)?;
    ctx.out.kernel("kernel_train_exact", &exact_train)?;
    ctx.out.kernel("kernel_test_exact", &exact_test)?;
    let mut summaries = vec![summary("exact", &exact_train, &exact_test)];
    let mut clamp_events = 0;

    if let Shots::Finite(_) = ctx.cfg.shots {
        let readout = match &ctx.cfg.readout {
            Some(r) => {
                let rates = readout_rates(&ctx.cfg, r.rates.as_ref(), n_qubits)?;
                ctx.out.text("rates_used.json", &rates.to_json()?)?;
                Some(ReadoutModel { rates, k_max: r.k_max })
            }
            None => None,
        };
        let mut opts = SamplingOptions::new(ctx.cfg.shots, ctx.cfg.seed);
        opts.readout = readout;
        opts.diagonal = ctx.cfg.diagonal;
        let train = sampled_kernel_matrix(&split.x_train, None, &ev, &opts)?;
        opts.stream = 1;
        let test = sampled_kernel_matrix(&split.x_test, Some(&split.x_train), &ev, &opts)?;
        ctx.out.kernel("kernel_train_sampled", &train.sampled)?;
        ctx.out.kernel("kernel_test_sampled", &test.sampled)?;
        summaries.push(summary("sampled", &train.sampled, &test.sampled));
        if let (Some(tr), Some(te)) = (&train.corrected, &test.corrected) {
            ctx.out.kernel("kernel_train_corrected", tr)?;
            ctx.out.kernel("kernel_test_corrected", te)?;
            summaries.push(summary("corrected", tr, te));
            clamp_events = train.clamp_events + test.clamp_events;
        }
    }
    let split_file = SplitFile { seed: ctx.cfg.seed, train_idx: split.train_idx, test_idx: split.test_idx, y_train: split.y_train, y_test: split.y_test };
    ctx.out.json("split.json", &split_file)?;
    ctx.out.json("kernel_summary.json", &serde_json::json!({ "variants": summaries, "clamp_events": clamp_events }))?;
    for s in &summaries {
        println!("{:<10} median off-diagonal K = {:?}", s.variant, s.train_median_off_diagonal);
    }
    ctx.finish()
}

fn read_kernel(dir: &Path, stem: &str, kind: KernelKind) -> anyhow::Result<KernelMatrix> {
    let path = dir.join(format!("{stem}.qkm"));
    let file = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    Ok(KernelMatrix::read_binary(std::io::BufReader::new(file), kind, Shots::Infinite)?)
}

pub fn train_eval(mut ctx: Context) -> anyhow::Result<()> {
    let dir = ctx.cfg.kernel_dir.clone().unwrap_or_else(|| ctx.cfg.out.clone());
    let variant = match &ctx.cfg.kernel_variant {
        Some(v) if ["exact", "sampled", "corrected"].contains(&v.as_str()) => v.clone(),
        Some(v) => return Err(config_error(format!("unknown kernel variant {v:?}"))),
        None => ["corrected", "sampled", "exact"]
            .into_iter()
            .find(|v| dir.join(format!("kernel_train_{v}.qkm")).is_file())
            .ok_or_else(|| anyhow::anyhow!("no kernel files in {}; run the kernel command first", dir.display()))?
            .to_string(),
    };
    let kind = match variant.as_str() {
        "exact" => KernelKind::Exact,
        "sampled" => KernelKind::Sampled,
        _ => KernelKind::Corrected,
    };
    let split_path = dir.join("split.json");
    let split: SplitFile = serde_json::from_slice(&std::fs::read(&split_path).with_context(|| format!("reading {}", split_path.display()))?)?;
    let k_train = read_kernel(&dir, &format!("kernel_train_{variant}"), kind)?;
    let k_test = read_kernel(&dir, &format!("kernel_test_{variant}"), kind)?;
    let result = experiments::train_eval(&k_train, &split.y_train, &k_test, &split.y_test, &ctx.cfg.c_grid, &ctx.train_options())?;
    println!(
        "variant {variant}: C_opt = {}, train {:.3}, test {:.3}, support fraction {:.2}",
        result.c_opt, result.train_accuracy, result.test_accuracy, result.support_fraction
    );
    ctx.out.json("train_eval.json", &serde_json::json!({ "variant": variant, "seed": ctx.cfg.seed, "evaluation": result }))?;
    ctx.finish()
}

pub fn learning_curve(mut ctx: Context) -> anyhow::Result<()> {
    let (split, ansatz) = prepared(&ctx)?;
    let ev = ctx.evaluator(ansatz);
    let q_train = exact_kernel_matrix(&split.x_train, None, &ev)?;
    let q_test = exact_kernel_matrix(&split.x_test, Some(&split.x_train), &ev)?;
    let gamma = ctx.cfg.learning_curve.gamma.unwrap_or_else(|| rbf_gamma_scale(&split.x_train));
    let r_train = rbf_kernel(&split.x_train, None, gamma, ctx.execution)?;
    let r_test = rbf_kernel(&split.x_test, Some(&split.x_train), gamma, ctx.execution)?;
    let section = &ctx.cfg.learning_curve;
    if let Some(&s) = section.sizes.iter().find(|&&s| s > split.y_train.len()) {
        return Err(config_error(format!("learning-curve size {s} exceeds m = {}", split.y_train.len())));
    }
    let lc = LearningCurveConfig { sizes: section.sizes.clone(), trials: section.trials, c: section.c, seed: ctx.cfg.seed };
    let kernels = [KernelPair { name: "quantum", train: &q_train, test: &q_test }, KernelPair { name: "rbf", train: &r_train, test: &r_test }];
    let rows = experiments::learning_curve(&kernels, &split.y_train, &split.y_test, &lc, &ctx.train_options())?;
    for r in &rows {
        println!("{:>4} {:<8} train {:.3}±{:.3} test {:.3}±{:.3}", r.size, r.kernel, r.train_mean, r.train_std, r.test_mean, r.test_std);
    }
    ctx.out.csv("learning_curve.csv", &rows)?;
    ctx.finish()
}

pub fn select_dataset(mut ctx: Context) -> anyhow::Result<()> {
    let ds = load_dataset(&ctx.cfg)?;
    let section = ctx.cfg.select_dataset.clone();
    let pool_size = section.pool.min(ds.len() - ds.len() % 2);
    if section.subset > pool_size {
        return Err(config_error(format!("subset {} is larger than the {pool_size}-row kernel", section.subset)));
    }
    let pool = stratified_downsample(&ds.labels, pool_size, child_seed(ctx.cfg.seed, &[0x706f]))?;
    let pool_ds = ds.subset(&pool);
    let x = scale_all(&pool_ds, ctx.cfg.take_abs)?;
    let ansatz = ctx.cfg.ansatz.build(ds.dim())?;
    let k = exact_kernel_matrix(&x, None, &ctx.evaluator(ansatz))?;
    let sd = SelectDatasetConfig { subset: section.subset, folds: section.folds, trials: section.trials, c: section.c, seed: ctx.cfg.seed };
    let sel = experiments::select_dataset(&k, &pool_ds.labels, &sd, &ctx.train_options())?;
    let to_rows = |idx: &[usize]| idx.iter().map(|&i| pool[i]).collect::<Vec<_>>();
    println!("trial {} fold {}: validation {:.3} (grand mean {:.3})", sel.trial, sel.fold, sel.accuracy, sel.grand_mean);
    ctx.out.json(
        "selection.json",
        &serde_json::json!({
            "seed": ctx.cfg.seed,
            "trial": sel.trial,
            "fold": sel.fold,
            "accuracy": sel.accuracy,
            "grand_mean": sel.grand_mean,
            "train": to_rows(&sel.train),
            "validation": to_rows(&sel.validation),
        }),
    )?;
    ctx.out.csv("folds.csv", &sel.records)?;
    ctx.finish()
}

pub fn shot_study(mut ctx: Context) -> anyhow::Result<()> {
    let (split, ansatz) = prepared(&ctx)?;
    let k = exact_kernel_matrix(&split.x_train, None, &ctx.evaluator(ansatz))?;
    let section = &ctx.cfg.shot_study;
    if section.shots.is_empty() || section.shots.contains(&Shots::Finite(0)) {
        return Err(config_error("shot_study.shots must be nonempty and positive"));
    }
    let sc = ShotStudyConfig { shots: section.shots.clone(), trials: section.trials, folds: section.folds, c: section.c, seed: ctx.cfg.seed };
    let rows = experiments::shot_study(&k, &split.y_train, &sc, &ctx.train_options())?;
    for r in &rows {
        println!("R = {:<8} train {:.3}±{:.3} validation {:.3}±{:.3}", r.shots.to_string(), r.train_mean, r.train_std, r.validation_mean, r.validation_std);
    }
    ctx.out.csv("shot_study.csv", &rows)?;
    ctx.finish()
}

pub fn grid_search(mut ctx: Context) -> anyhow::Result<()> {
    let (split, _) = prepared(&ctx)?;
    let section = &ctx.cfg.grid_search;
    if section.c1.is_empty() {
        return Err(config_error("grid_search.c1 must be nonempty"));
    }
    let gs = GridSearchConfig {
        c1: section.c1.clone(),
        c2: section.c2.clone(),
        folds: section.folds,
        c: section.c,
        seed: ctx.cfg.seed,
        feasibility_threshold: section.feasibility_threshold,
    };
    let points = experiments::grid_search(&split.x_train, &split.y_train, &ctx.cfg.ansatz, &gs, &ctx.train_options(), ctx.execution)?;
    for p in &points {
        let flag = if p.feasible { "" } else { "  (below feasibility threshold)" };
        println!("c1 {:<5} c2 {:<5} median K {:.4} validation {:.3}{flag}", p.c1, p.c2.map_or("-".into(), |c| c.to_string()), p.median_kernel, p.cv_validation);
    }
    if let Some(t) = tuned_point(&points) {
        println!("tuned: c1 = {}, c2 = {:?}", t.c1, t.c2);
    }
    ctx.out.csv("grid_search.csv", &points)?;
    ctx.finish()
}

pub fn calibrate(mut ctx: Context) -> anyhow::Result<()> {
    let section = ctx.cfg.calibrate.clone();
    let n = section.n_qubits.unwrap_or(ctx.cfg.ansatz.n_qubits());
    if let Some(p) = &section.true_rates {
        require_file(p, "calibrate.true_rates")?;
    }
    if section.pairs == 0 || section.shots == 0 {
        return Err(config_error("calibrate.pairs and calibrate.shots must be positive"));
    }
    let truth = readout_rates(&ctx.cfg, section.true_rates.as_ref(), n)?;
    let mut rng = stream(ctx.cfg.seed, &[0x6361]);
    let runs = simulate_calibration(&truth, section.pairs, section.shots, &mut rng)?;
    let estimated = estimate_rates_from_experiments(&runs)?;
    ctx.out.text("rates.json", &estimated.to_json()?)?;
    ctx.out.text("true_rates.json", &truth.to_json()?)?;

    let header: Vec<String> = ["k_max", "tail_probability"].iter().map(|s| s.to_string()).collect();
    let tail: Vec<Vec<String>> = (0..=4usize.min(n)).map(|k| vec![k.to_string(), truncation_tail_probability(&estimated, k, 0).to_string()]).collect();
    ctx.out.table("tail.csv", &header, &tail)?;

    if section.study_circuits > 0 {
        let study_cfg = ReadoutStudyConfig {
            n_qubits: n,
            circuits: section.study_circuits,
            shots: section.study_shots,
            perturbation: section.perturbation,
            k_max: section.k_max.clone(),
            seed: ctx.cfg.seed,
        };
        let study = experiments::readout_correction_study(&study_cfg, &truth, &estimated, ctx.execution)?;
        let mut header = vec!["circuit".to_string(), "exact".into(), "raw".into()];
        header.extend(study.k_max.iter().map(|k| format!("corrected_k{k}")));
        let records: Vec<Vec<String>> = study
            .rows
            .iter()
            .map(|r| {
                let mut rec = vec![r.circuit.to_string(), r.exact.to_string(), r.raw.to_string()];
                rec.extend(r.corrected.iter().map(f64::to_string));
                rec
            })
            .collect();
        ctx.out.table("readout_study.csv", &header, &records)?;
        println!("mean |K̂ − K| raw {:.4}", study.mean_abs_error_raw);
        for (k, e) in study.k_max.iter().zip(&study.mean_abs_error_corrected) {
            println!("mean |K̂ − K| k_max = {k}: {e:.4}");
        }
    }
    for q in 0..n {
        println!("qubit {q:>2}: q(1|0) = {:.4}  q(0|1) = {:.4}", estimated.q10()[q], estimated.q01()[q]);
    }
    ctx.finish()
}

pub fn select_qubits(mut ctx: Context) -> anyhow::Result<()> {
    let section = ctx.cfg.select_qubits.clone();
    require_file(&section.graph, "select_qubits.graph")?;
    let graph = DeviceGraph::load(&section.graph).map_err(|e| config_error(format!("graph {}: {e}", section.graph.display())))?;
    let score_cfg = match &section.weights {
        Some(p) => {
            require_file(p, "select_qubits.weights")?;
            PathScoreConfig::load(p).map_err(|e| config_error(format!("weights {}: {e}", p.display())))?
        }
        None => PathScoreConfig::default(),
    };
    let (best, breakdown) = qubit_select::select_qubits(&graph, section.k, &score_cfg, ctx.execution)?;
    println!("path: {:?}", best.path);
    println!("score: {:.6}", best.score);
    for c in &breakdown {
        println!("  {:<10} {:<5} {:+.6}", c.metric, format!("{:?}", c.on).to_lowercase(), c.contribution);
    }
    ctx.out.json("qubit_selection.json", &serde_json::json!({ "k": section.k, "path": best.path, "score": best.score, "breakdown": breakdown }))?;
    ctx.finish()
}
