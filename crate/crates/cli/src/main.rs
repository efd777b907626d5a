use std::path::PathBuf;
use std::process::ExitCode;

use abcfs::abc::CardinalityMode;
use abcfs::harness::{
    self, audit_report, brute_force_from_config, cardinality_sweep, emit_fit, emit_report,
    emit_sweep, repeat_seeds, ExperimentConfig, HarnessError,
};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

/// ABC wrapper feature selection with ANFIS and ANN regressors.
#[derive(Parser)]
#[command(name = "abcfs", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "ABCFS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON). A report.json also works.
    #[arg(long)]
    config: PathBuf,
    /// Override the dataset path.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use structure case 1-8 instead of the configured regressor.
    #[arg(long)]
    case: Option<u8>,
    /// Override the ABC seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Search for the best subset and write a full report.
    Run {
        #[command(flatten)]
        common: Common,
        /// Fixed subset size; omit to use the configured mode.
        #[arg(long)]
        fixed_k: Option<usize>,
    },
    /// Fixed-size search for every (case, k) cell.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Sizes as `1..8` (inclusive) or `1,2,4`.
        #[arg(long, default_value = "1..8")]
        k: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
        cases: Vec<u8>,
    },
    /// Cross-validated fit of a named subset, no search.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Column names or wavenumbers, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        features: Vec<String>,
    },
    /// Exhaustive ranking of every k-subset.
    Bruteforce {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: usize,
        /// Rows to print.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Recompute a report's metrics from its persisted predictions.
    Audit {
        #[arg(long)]
        report: PathBuf,
    },
    /// Repeat `run` over several seeds and summarize best and median.
    Repro {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[arg(long)]
        fixed_k: Option<usize>,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(&c.config)?;
    if let Some(d) = &c.dataset {
        cfg.dataset = d.clone();
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(case) = c.case {
        cfg.regressor = cfg
            .case_regressor(case)
            .with_context(|| format!("structure case must be 1-8, got {case}"))?;
    }
    if let Some(s) = c.seed {
        cfg.abc.seed = s;
    }
    Ok(cfg)
}

fn parse_ks(text: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = text.split_once("..") {
        let lo: usize = a.trim().parse().context("k range start")?;
        let hi: usize = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .context("k range end")?;
        if lo == 0 || lo > hi {
            bail!("k range `{text}` must satisfy 1 <= lo <= hi");
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .with_context(|| format!("bad k `{t}`"))
        })
        .collect()
}

fn fixed(cfg: &mut ExperimentConfig, k: Option<usize>) {
    if let Some(k) = k {
        cfg.abc.cardinality = CardinalityMode::Fixed { k };
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { common, fixed_k } => {
            let mut cfg = load_config(&common)?;
            fixed(&mut cfg, fixed_k);
            let (report, artifacts) = harness::run_experiment(&cfg, &mut |rec| {
                log::info!(
                    "iteration {}: best cost {:.4}, mean RMSE {:.4}, {} evaluations",
                    rec.iteration,
                    rec.best_cost,
                    rec.best_mean_rmse,
                    rec.evaluations
                )
            })?;
            emit_report(&report, &artifacts, &cfg.output_dir)?;
            println!(
                "{} | {} | features [{}] | mean RMSE {:.3} | mean R2 {:.4} | error std {:.3} | melt temperature selected: {} | {}",
                report.regressor_label,
                report.search_mode,
                report.selected.names.join(", "),
                report.cv.mean_rmse,
                report.cv.mean_r2,
                report.cv.error_std,
                report.selected.contains_melt_temperature,
                cfg.output_dir.display()
            );
        }
        Command::Sweep { common, k, cases } => {
            let cfg = load_config(&common)?;
            let ks = parse_ks(&k)?;
            let report = cardinality_sweep(&cfg, &ks, &cases)?;
            emit_sweep(&report, &cfg.output_dir)?;
            for o in &report.observations {
                println!("{o}");
            }
            println!("wrote {}", cfg.output_dir.join("sweep.csv").display());
        }
        Command::Fit { common, features } => {
            let cfg = load_config(&common)?;
            let (report, artifacts) = harness::fit_subset(&cfg, &features)?;
            emit_fit(&report, &artifacts, &cfg.output_dir)?;
            println!(
                "{} | features [{}] | mean RMSE {:.3} | mean R2 {:.4} | error std {:.3} | cost {:.3}",
                report.regressor_label,
                report.selected.names.join(", "),
                report.cv.mean_rmse,
                report.cv.mean_r2,
                report.cv.error_std,
                report.cost
            );
        }
        Command::Bruteforce { common, k, top } => {
            let cfg = load_config(&common)?;
            let (ds, ranked) = brute_force_from_config(&cfg, k)?;
            println!("rank,cost,mean_rmse,mean_r2,features");
            for (i, r) in ranked.iter().take(top).enumerate() {
                println!(
                    "{},{:?},{:?},{:?},{}",
                    i + 1,
                    r.objective.cost,
                    r.objective.cv_summary.mean_rmse,
                    r.objective.cv_summary.mean_r2,
                    ds.feature_names(r.subset.indices()).join(";")
                );
            }
        }
        Command::Audit { report } => {
            let outcome = audit_report(&report)?;
            for c in &outcome.checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "ok  " } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            return Ok(outcome.passed());
        }
        Command::Repro {
            common,
            seeds,
            fixed_k,
        } => {
            let mut cfg = load_config(&common)?;
            fixed(&mut cfg, fixed_k);
            let summary = repeat_seeds(&cfg, &seeds)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
    }
    Ok(true)
}

fn diagnostic(err: &anyhow::Error) -> serde_json::Value {
    let kind = match err.downcast_ref::<HarnessError>() {
        Some(HarnessError::Config(_)) | Some(HarnessError::UnknownFeature { .. }) => "config",
        Some(HarnessError::Dataset { .. }) => "dataset",
        Some(HarnessError::Search(_)) | Some(HarnessError::Cv(_)) | Some(HarnessError::Fit(_)) => {
            "training"
        }
        Some(HarnessError::CapExceeded { .. }) => "cap_exceeded",
        Some(HarnessError::Io { .. }) | Some(HarnessError::Csv { .. }) => "io",
        Some(HarnessError::Json { .. }) => "json",
        Some(HarnessError::Audit(_)) => "audit",
        None => "usage",
    };
    serde_json::json!({
        "error": err.to_string(),
        "kind": kind,
        "causes": err.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
    })
}

fn init_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ABCFS_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = init_threads(cli.threads).and_then(|_| run(cli));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            ExitCode::from(1)
        }
    }
}
