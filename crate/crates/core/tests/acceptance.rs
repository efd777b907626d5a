//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any hard criterion fails.
//!
//! The reproduction study and the full-scale sweep need the public PLA
//! extrusion dataset; point `ABCFS_PLA_DATASET` at its CSV to enable them.
//! Without it the reproduction study is reported as SKIP and the sweep
//! criterion runs on a synthetic file with the same column layout.

mod common;

use std::time::{Duration, Instant};

use abcfs::abc::{abc_run, AbcConfig, CardinalityMode, CvObjective};
use abcfs::anfis::{
    anfis_fit_consequents, AnfisModel, ConsequentKind, ConsequentParams, FuzzyRule, GaussianMf,
};
use abcfs::ann::{ann_gradient, ann_init};
use abcfs::dataset::{kfold_split, Matrix};
use abcfs::harness::{
    brute_force_oracle, cardinality_sweep, emit_report, emit_sweep, repeat_seeds, run_experiment,
    ExperimentConfig,
};
use abcfs::metrics::{pooled_error_std, r2, rmse, FoldMetrics};
use abcfs::regressor::RegressorConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DATASET_ENV: &str = "ABCFS_PLA_DATASET";

enum Verdict {
    Pass,
    Fail,
    /// Reported but never fails the suite.
    Observe,
    Skip,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn pass_if(ok: bool, detail: String) -> Outcome {
    Outcome {
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

fn criterion(failures: &mut usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let mut out = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            pass_if(false, format!("panicked: {msg}"))
        }
    };
    let elapsed = start.elapsed();
    if matches!(out.verdict, Verdict::Pass) && elapsed > budget {
        out = pass_if(
            false,
            format!("{} (took {elapsed:.2?}, budget {budget:.0?})", out.detail),
        );
    }
    let tag = match out.verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => {
            *failures += 1;
            "FAIL"
        }
        Verdict::Observe => "OBSERVE",
        Verdict::Skip => "SKIP",
    };
    println!("{tag:7} {name} [{elapsed:.2?}]: {}", out.detail);
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[allow(clippy::approx_constant)]
fn metric_identities() -> Outcome {
    let tol = 1e-9;
    // Hand values quoted to 6 decimals are compared at that precision.
    let rounded = 5e-7;
    let mut bad = Vec::new();
    let mut check = |label: &str, got: f64, want: f64, tol: f64| {
        if !close(got, want, tol) {
            bad.push(format!("{label}: {got} != {want}"));
        }
    };
    check(
        "rmse identity",
        rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
        0.0,
        tol,
    );
    check(
        "rmse hand",
        rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(),
        12.5f64.sqrt(),
        tol,
    );
    check(
        "rmse hand, rounded",
        rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(),
        3.535534,
        rounded,
    );
    let a = [2.0, 4.0, 9.0, 1.0];
    check("r2 perfect", r2(&a, &a).unwrap(), 1.0, tol);
    let mean = a.iter().sum::<f64>() / 4.0;
    check("r2 mean predictor", r2(&a, &[mean; 4]).unwrap(), 0.0, tol);
    let zero = FoldMetrics::compute(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
    check(
        "pooled zero",
        pooled_error_std(&[zero.clone(), zero]).unwrap(),
        0.0,
        tol,
    );
    let pm = FoldMetrics::compute(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
    let pooled = pooled_error_std(&[pm]).unwrap();
    check("pooled [-1, 1]", pooled, 2f64.sqrt(), tol);
    check("pooled [-1, 1], rounded", pooled, 1.414214, rounded);
    let ok = bad.is_empty();
    pass_if(
        ok,
        if ok {
            format!("8 identities (tol {tol:e}; 6-decimal hand values at {rounded:e})")
        } else {
            bad.join("; ")
        },
    )
}

fn random_model(
    rng: &mut ChaCha8Rng,
    d: usize,
    rules: usize,
    kind: ConsequentKind,
    sigma: (f64, f64),
) -> AnfisModel {
    let rules = (0..rules)
        .map(|_| FuzzyRule {
            premise: (0..d)
                .map(|_| GaussianMf::new(rng.gen_range(-2.0..2.0), rng.gen_range(sigma.0..sigma.1)))
                .collect(),
            consequent: ConsequentParams {
                kind,
                coefficients: (0..kind.n_coefficients(d))
                    .map(|_| rng.gen_range(-5.0..5.0))
                    .collect(),
            },
        })
        .collect();
    AnfisModel::new(rules, d).unwrap()
}

fn anfis_normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    let mut fallbacks = 0;
    for t in 0..10_000 {
        let d = rng.gen_range(1..=8);
        let n_rules = rng.gen_range(1..=13);
        // Every fifth model uses tiny widths with a far input so every
        // firing strength underflows.
        let (model, x): (AnfisModel, Vec<f64>) = if t % 5 == 0 {
            let m = random_model(&mut rng, d, n_rules, ConsequentKind::Linear, (1e-6, 1e-3));
            (m, (0..d).map(|_| rng.gen_range(50.0..100.0)).collect())
        } else {
            let m = random_model(&mut rng, d, n_rules, ConsequentKind::Constant, (0.05, 3.0));
            (m, (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect())
        };
        let w = model.normalized_strengths(&x).unwrap();
        if w.iter().all(|&v| v == w[0]) && n_rules > 1 && t % 5 == 0 {
            fallbacks += 1;
        }
        let sum: f64 = w.iter().sum();
        worst = worst.max((sum - 1.0).abs());
        if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return pass_if(false, format!("weight outside [0, 1] at trial {t}"));
        }
    }
    pass_if(
        worst <= 1e-12 && fallbacks > 0,
        format!("10^4 models, max |sum - 1| = {worst:.2e} (tol 1e-12), {fallbacks} zero-firing fallbacks"),
    )
}

fn anfis_exactness() -> Outcome {
    let xs: Vec<f64> = (0..20).map(|i| -1.0 + 0.1 * i as f64).collect();
    let x = Matrix::new(20, 1, xs.clone());
    let y: Vec<f64> = xs.iter().map(|v| 3.0 * v + 2.0).collect();
    let rule = FuzzyRule {
        premise: vec![GaussianMf::new(0.0, 1.0)],
        consequent: ConsequentParams::zero(ConsequentKind::Linear, 1),
    };
    let model = AnfisModel::new(vec![rule], 1).unwrap();
    let fitted = anfis_fit_consequents(&model, &x, &y, 0.0).unwrap();
    let pred = fitted.predict_batch(&x).unwrap();
    let e = rmse(&y, &pred).unwrap();
    let c = &fitted.rules[0].consequent.coefficients;
    let coef_ok = close(c[0], 2.0, 1e-9) && close(c[1], 3.0, 1e-9);
    pass_if(
        e < 1e-8 && coef_ok,
        format!("training RMSE {e:.2e} (tol 1e-8), coefficients {c:?}"),
    )
}

fn rel_err(analytic: &[f64], fd: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(fd)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = fd
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(analytic.iter().map(|v| v * v).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn central_diff(params: &[f64], h: f64, mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..params.len())
        .map(|i| {
            let mut p = params.to_vec();
            p[i] = params[i] + h;
            let up = loss(&p);
            p[i] = params[i] - h;
            let down = loss(&p);
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn gradient_oracles() -> Outcome {
    let h = 1e-6;
    let tol = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_anfis: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.gen_range(1..=3);
        let kind = if rng.gen_bool(0.5) {
            ConsequentKind::Linear
        } else {
            ConsequentKind::Constant
        };
        let model = random_model(&mut rng, d, 2, kind, (0.5, 2.0));
        let x = Matrix::new(5, d, (0..5 * d).map(|_| rng.gen_range(-1.5..1.5)).collect());
        let y: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let g = model.premise_gradient(&x, &y).unwrap();
        let fd = central_diff(&model.premise_params(), h, |p| {
            let mut m = model.clone();
            m.set_premise_params(p);
            m.mse(&x, &y).unwrap()
        });
        worst_anfis = worst_anfis.max(rel_err(&g, &fd));
    }
    let mut worst_ann: f64 = 0.0;
    for t in 0..100 {
        let d = rng.gen_range(1..=6);
        let hdn = rng.gen_range(1..=10);
        let model = ann_init(d, hdn, t);
        let n = rng.gen_range(1..=8);
        let x = Matrix::new(n, d, (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g = ann_gradient(&model, &x, &y).unwrap().flatten();
        let fd = central_diff(&model.params(), h, |p| {
            let mut m = model.clone();
            m.set_params(p);
            m.mse(&x, &y).unwrap()
        });
        worst_ann = worst_ann.max(rel_err(&g, &fd));
    }
    pass_if(
        worst_anfis < tol && worst_ann < tol,
        format!("100+100 instances, h={h:e}, worst relative error ANFIS {worst_anfis:.2e}, ANN {worst_ann:.2e} (tol {tol:e})"),
    )
}

fn planted_recovery() -> Outcome {
    let ds = common::planted(2024);
    let folds = kfold_split(ds.n_samples(), 5, 0).unwrap();
    let reg = RegressorConfig::anfis(1, ConsequentKind::Linear);
    let objective = CvObjective {
        dataset: &ds,
        regressor: &reg,
        folds: &folds,
        feature_penalty: 25.0,
    };
    let ranked = brute_force_oracle(&objective, 2, 1000).unwrap();
    let top = ranked[0].subset.clone();
    let margin = ranked[1].objective.cost - ranked[0].objective.cost;
    if top.indices() != [1, 7] {
        return pass_if(false, format!("oracle ranks {top} first"));
    }
    let mut hits = 0;
    for seed in 0..10 {
        let cfg = AbcConfig {
            population: 50,
            iterations: 25,
            cardinality: CardinalityMode::Fixed { k: 2 },
            seed,
            ..Default::default()
        };
        let out = abc_run(&cfg, &objective, &mut |_| {}).unwrap();
        if out.best.subset == top {
            hits += 1;
        }
    }
    pass_if(
        hits >= 9,
        format!("oracle top {top} (runner-up margin {margin:.4}), ABC recovered it in {hits}/10 seeds (need 9)"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_surrogate(dir.path(), 45, 3);
    let mut bad = Vec::new();
    for (label, reg) in [
        ("ANFIS", RegressorConfig::anfis(3, ConsequentKind::Linear)),
        ("ANN", {
            let mut r = RegressorConfig::ann(5);
            if let RegressorConfig::Ann { train, .. } = &mut r {
                train.epochs = 150;
            }
            r
        }),
    ] {
        let mut bytes = Vec::new();
        for threads in [1, 4] {
            let out = dir.path().join(label);
            let mut cfg = common::small_config(&data, &out);
            cfg.regressor = reg.clone();
            cfg.abc.population = 12;
            cfg.abc.iterations = 4;
            cfg.abc.limit = Some(2);
            cfg.abc.cardinality = CardinalityMode::Free { max_k: 5 };
            cfg.abc.feature_penalty = 5.0;
            cfg.abc.seed = 77;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let (report, artifacts) = pool.install(|| run_experiment(&cfg, &mut |_| {})).unwrap();
            emit_report(&report, &artifacts, &out).unwrap();
            let mut r = std::fs::read(out.join("report.json")).unwrap();
            r.extend(std::fs::read(out.join("predictions.csv")).unwrap());
            bytes.push((threads, r));
        }
        if bytes[0].1 != bytes[1].1 {
            bad.push(label);
        }
    }
    pass_if(
        bad.is_empty(),
        if bad.is_empty() {
            "report.json and predictions.csv byte-identical at 1 and 4 threads (ANFIS and ANN runs)"
                .into()
        } else {
            format!("differs for {bad:?}")
        },
    )
}

fn fold_properties() -> Outcome {
    let mut checked = 0;
    for n in 2..=200 {
        for k in 2..=n {
            let f = kfold_split(n, k, (n * 1000 + k) as u64).unwrap();
            let sizes = f.fold_sizes();
            let (lo, hi) = (*sizes.iter().min().unwrap(), *sizes.iter().max().unwrap());
            let ok = sizes.len() == k
                && sizes.iter().sum::<usize>() == n
                && lo >= 1
                && hi - lo <= 1
                && f.membership().iter().all(|&m| m < k);
            let mut seen = vec![0u8; n];
            for fold in 0..k {
                for r in f.test_rows(fold) {
                    seen[r] += 1;
                }
                if f.train_rows(fold).len() + f.test_rows(fold).len() != n {
                    return pass_if(false, format!("train/test sizes wrong at n={n} k={k}"));
                }
            }
            if !ok || seen.iter().any(|&c| c != 1) {
                return pass_if(false, format!("partition broken at n={n} k={k}: {sizes:?}"));
            }
            checked += 1;
        }
    }
    pass_if(
        true,
        format!("{checked} (n, k) pairs are exact partitions with balanced sizes"),
    )
}

fn pla_config(path: &str, out: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        dataset: path.into(),
        output_dir: out.to_path_buf(),
        ..Default::default()
    }
}

fn reproduction_study() -> Outcome {
    let Ok(path) = std::env::var(DATASET_ENV) else {
        return Outcome {
            verdict: Verdict::Skip,
            detail: format!(
                "PLA dataset not available; set {DATASET_ENV} to run (not a hard gate)"
            ),
        };
    };
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = pla_config(&path, dir.path());
    cfg.regressor = cfg.case_regressor(4).unwrap();
    cfg.abc.cardinality = CardinalityMode::Fixed { k: 4 };
    match repeat_seeds(&cfg, &[1, 2, 3, 4, 5]) {
        Ok(s) => {
            let b = &s.best;
            let meets = b.mean_rmse <= 600.0 && b.mean_r2 >= 0.85;
            Outcome {
                verdict: Verdict::Observe,
                detail: format!(
                    "best of 5 seeds: mean RMSE {:.2} Da, mean R2 {:.4}, features {:?}, melt temperature selected: {}; median RMSE {:.2}; targets RMSE <= 600 and R2 >= 0.85 {} (reference 281.83 Da / 0.96)",
                    b.mean_rmse,
                    b.mean_r2,
                    b.features,
                    b.contains_melt_temperature,
                    s.median_mean_rmse,
                    if meets { "met" } else { "not met" }
                ),
            }
        }
        Err(e) => Outcome {
            verdict: Verdict::Observe,
            detail: format!("run failed: {e}"),
        },
    }
}

fn sweep_artifact() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let (cfg, source) = match std::env::var(DATASET_ENV) {
        Ok(path) => (pla_config(&path, &out), "PLA dataset"),
        Err(_) => {
            let data = common::write_surrogate(dir.path(), 60, 21);
            let mut cfg = common::small_config(&data, &out);
            cfg.abc.population = 4;
            cfg.abc.iterations = 1;
            cfg.case_training.anfis.premise_epochs = 3;
            cfg.case_training.ann.epochs = 40;
            (cfg, "synthetic surrogate, reduced budget")
        }
    };
    let ks: Vec<usize> = (1..=8).collect();
    let cases: Vec<u8> = (1..=8).collect();
    let report = cardinality_sweep(&cfg, &ks, &cases).unwrap();
    emit_sweep(&report, &out).unwrap();
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut cells: Vec<(u8, usize)> = report.rows.iter().map(|r| (r.case, r.k)).collect();
    cells.sort_unstable();
    cells.dedup();
    let anfis_svg = std::fs::read_to_string(out.join("rmse_vs_k_anfis.svg")).unwrap();
    let ann_svg = std::fs::read_to_string(out.join("rmse_vs_k_ann.svg")).unwrap();
    let series = |svg: &str| svg.matches("data-series=").count();
    let json = std::fs::read_to_string(out.join("sweep_report.json")).unwrap();
    let ok = report.rows.len() == 64
        && cells.len() == 64
        && csv.lines().count() == 65
        && series(&anfis_svg) == 4
        && series(&ann_svg) == 4
        && json.contains("ANFIS")
        && report.anfis_below_ann.is_some();
    let failed = report.rows.iter().filter(|r| !r.is_ok()).count();
    pass_if(
        ok,
        format!(
            "{source}: {} rows ({failed} failed cells), CSV + 2 SVG + JSON written; observation: {}",
            report.rows.len(),
            report.observations.last().cloned().unwrap_or_default()
        ),
    )
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; none apply here.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failures = 0;
    let f = &mut failures;
    criterion(
        f,
        "metric identities",
        Duration::from_secs(1),
        metric_identities,
    );
    criterion(
        f,
        "ANFIS normalization invariant",
        Duration::from_secs(10),
        anfis_normalization,
    );
    criterion(
        f,
        "ANFIS exactness",
        Duration::from_secs(1),
        anfis_exactness,
    );
    criterion(
        f,
        "gradient oracles",
        Duration::from_secs(30),
        gradient_oracles,
    );
    criterion(
        f,
        "planted-feature recovery",
        Duration::from_secs(300),
        planted_recovery,
    );
    criterion(
        f,
        "determinism across thread counts",
        Duration::from_secs(120),
        determinism,
    );
    criterion(
        f,
        "fold properties",
        Duration::from_secs(5),
        fold_properties,
    );
    criterion(
        f,
        "reproduction study",
        Duration::from_secs(1800),
        reproduction_study,
    );
    criterion(
        f,
        "sweep artifact",
        Duration::from_secs(1800),
        sweep_artifact,
    );
    if failures > 0 {
        println!("{failures} criterion/criteria failed");
        std::process::exit(1);
    }
    println!("all hard criteria passed");
}
