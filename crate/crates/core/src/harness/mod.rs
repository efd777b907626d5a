//! Experiment orchestration: configuration, search runs, fixed-subset fits,
//! the exhaustive oracle, cardinality sweeps and report emission.

mod report;
pub mod svg;
mod sweep;

use std::path::{Path, PathBuf};
use std::time::Instant;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::abc::{
    abc_run, AbcConfig, AbcError, CardinalityMode, CvObjective, FeatureSubset, IterationRecord,
    ObjectiveValue, SubsetObjective,
};
use crate::anfis::{AnfisTrainConfig, ConsequentKind};
use crate::ann::AnnTrainConfig;
use crate::dataset::{
    kfold_split, load_dataset_excluding, select_wavenumber_range, Dataset, DatasetError,
    FeatureKind, FoldAssignment,
};
use crate::regressor::{cross_validate, fit_full, CvError, RegressorConfig, RegressorError};

pub use report::{
    audit_report, emit_fit, emit_report, AuditCheck, AuditOutcome, DatasetInfo, ExperimentReport,
    FitReport, RunArtifacts, RunMeta, SelectedFeatures,
};
pub use sweep::{
    cardinality_sweep, emit_sweep, render_sweep_svgs, sweep_rows_from_csv, SweepReport, SweepRow,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Dataset {
        stage: &'static str,
        #[source]
        source: DatasetError,
    },
    #[error("ABC search: {0}")]
    Search(#[from] AbcError),
    #[error("cross-validation: {0}")]
    Cv(#[from] CvError),
    #[error("final model fit: {0}")]
    Fit(#[from] RegressorError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("exhaustive search over {candidates} subsets exceeds the cap of {cap}; reduce the feature count or k")]
    CapExceeded { candidates: u128, cap: u64 },
    #[error("unknown feature `{token}`{}", nearest.map(|w| format!(" (nearest NIR column: {w})")).unwrap_or_default())]
    UnknownFeature { token: String, nearest: Option<f64> },
    #[error("audit: {0}")]
    Audit(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavenumberRange {
    pub lo: f64,
    pub hi: f64,
}

/// Hyperparameter templates used when a regressor is built from a
/// structure case. Structure fields in `anfis` are overridden by the case.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseTraining {
    pub anfis: AnfisTrainConfig,
    pub ann: AnnTrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub target_column: String,
    /// Columns dropped at load time, e.g. other laboratory measurements.
    pub exclude_columns: Vec<String>,
    /// `None` keeps every NIR column.
    pub wavenumber_range: Option<WavenumberRange>,
    pub regressor: RegressorConfig,
    pub case_training: CaseTraining,
    pub abc: AbcConfig,
    pub k_folds: usize,
    pub fold_seed: u64,
    pub output_dir: PathBuf,
    pub bruteforce_cap: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: PathBuf::from("data.csv"),
            target_column: "Mn".into(),
            exclude_columns: Vec::new(),
            wavenumber_range: Some(WavenumberRange {
                lo: 6101.0,
                hi: 6599.0,
            }),
            regressor: RegressorConfig::anfis(13, ConsequentKind::Linear),
            case_training: CaseTraining::default(),
            abc: AbcConfig::default(),
            k_folds: 5,
            fold_seed: 0,
            output_dir: PathBuf::from("out"),
            bruteforce_cap: 100_000,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file. A `report.json` is accepted too, in which case
    /// its embedded config echo is used. A relative dataset path is resolved
    /// against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let json_err = |source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        };
        let mut value: Value = serde_json::from_str(&text).map_err(json_err)?;
        if value.get("tool_version").is_some() {
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(value).map_err(json_err)?;
        if cfg.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset = dir.join(&cfg.dataset);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.k_folds < 2 {
            return Err(HarnessError::Config("k_folds must be >= 2".into()));
        }
        if let Some(r) = self.wavenumber_range {
            if r.lo > r.hi {
                return Err(HarnessError::Config(format!(
                    "wavenumber range inverted: {} > {}",
                    r.lo, r.hi
                )));
            }
        }
        Ok(())
    }

    /// Builds the regressor for structure case 1-8 from the training templates.
    pub fn case_regressor(&self, case: u8) -> Option<RegressorConfig> {
        let anfis = |n_rules, consequent| {
            RegressorConfig::Anfis(AnfisTrainConfig {
                n_rules,
                consequent,
                ..self.case_training.anfis.clone()
            })
        };
        let ann = |hidden| RegressorConfig::Ann {
            hidden,
            train: self.case_training.ann.clone(),
        };
        Some(match case {
            1 => anfis(7, ConsequentKind::Constant),
            2 => anfis(7, ConsequentKind::Linear),
            3 => anfis(13, ConsequentKind::Constant),
            4 => anfis(13, ConsequentKind::Linear),
            5 => ann(10),
            6 => ann(20),
            7 => ann(30),
            8 => ann(40),
            _ => return None,
        })
    }
}

/// Loads, filters and splits the dataset named by the config.
pub fn prepare(cfg: &ExperimentConfig) -> Result<(Dataset, FoldAssignment), HarnessError> {
    cfg.validate()?;
    let ds = load_dataset_excluding(&cfg.dataset, &cfg.target_column, &cfg.exclude_columns)
        .map_err(|source| HarnessError::Dataset {
            stage: "load dataset",
            source,
        })?;
    let ds = match cfg.wavenumber_range {
        Some(r) => {
            select_wavenumber_range(&ds, r.lo, r.hi).map_err(|source| HarnessError::Dataset {
                stage: "wavenumber filter",
                source,
            })?
        }
        None => ds,
    };
    let folds = kfold_split(ds.n_samples(), cfg.k_folds, cfg.fold_seed).map_err(|source| {
        HarnessError::Dataset {
            stage: "fold split",
            source,
        }
    })?;
    log::info!("dataset: {ds}");
    Ok((ds, folds))
}

pub(crate) fn selected_features(ds: &Dataset, subset: &FeatureSubset) -> SelectedFeatures {
    let names = ds.feature_names(subset.indices());
    let process: Vec<String> = subset
        .indices()
        .iter()
        .filter(|&&j| ds.descriptors()[j].kind == FeatureKind::Process)
        .map(|&j| ds.descriptors()[j].name.clone())
        .collect();
    let contains_melt_temperature = process.iter().any(|n| is_melt_temperature(n));
    SelectedFeatures {
        indices: subset.indices().to_vec(),
        names,
        wavenumbers: subset
            .indices()
            .iter()
            .filter_map(|&j| ds.descriptors()[j].wavenumber)
            .collect(),
        process_features: process,
        contains_melt_temperature,
    }
}

/// Heuristic match on process-column names such as `melt_temp` or
/// `Melt Temperature (C)`.
pub fn is_melt_temperature(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    lower.contains("melt") && lower.contains("temp")
}

pub(crate) fn dataset_info(ds: &Dataset) -> DatasetInfo {
    let nir = ds.descriptors().iter().filter(|d| d.is_nir()).count();
    DatasetInfo {
        target: ds.target_name().to_string(),
        n_samples: ds.n_samples(),
        n_features: ds.n_features(),
        n_nir: nir,
        n_process: ds.n_features() - nir,
    }
}

/// Full pipeline: load, filter, split, search, then re-run CV on the winning
/// subset to collect per-fold predictions and fit a final model on all rows.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    progress: &mut dyn FnMut(&IterationRecord),
) -> Result<(ExperimentReport, RunArtifacts), HarnessError> {
    let started = Instant::now();
    let (ds, folds) = prepare(cfg)?;
    run_prepared(cfg, &ds, &folds, progress, started)
}

pub(crate) fn run_prepared(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    folds: &FoldAssignment,
    progress: &mut dyn FnMut(&IterationRecord),
    started: Instant,
) -> Result<(ExperimentReport, RunArtifacts), HarnessError> {
    let objective = CvObjective {
        dataset: ds,
        regressor: &cfg.regressor,
        folds,
        feature_penalty: cfg.abc.feature_penalty,
    };
    let outcome = abc_run(&cfg.abc, &objective, progress)?;
    let best = &outcome.best;
    let (cv, predictions) = cross_validate(ds, best.subset.indices(), &cfg.regressor, folds)?;
    debug_assert_eq!(cv, best.objective.cv_summary);
    let model = fit_full(ds, best.subset.indices(), &cfg.regressor)?;

    let report = ExperimentReport {
        tool_version: TOOL_VERSION.to_string(),
        config: cfg.clone(),
        regressor_label: cfg.regressor.to_string(),
        search_mode: cfg.abc.cardinality.to_string(),
        seed: cfg.abc.seed,
        dataset: dataset_info(ds),
        fold_sizes: folds.fold_sizes(),
        selected: selected_features(ds, &best.subset),
        cost: best.cost(),
        feature_penalty: cfg.abc.feature_penalty,
        per_fold_r2: cv.per_fold_r2(),
        cv,
        evaluations: outcome.evaluations,
        trace: outcome.trace,
        best_by_size: outcome.best_by_size,
    };
    let artifacts = RunArtifacts {
        predictions,
        model_json: model.to_json(),
        meta: RunMeta::finish(started),
    };
    Ok((report, artifacts))
}

/// Cross-validated fit of a fixed subset, no search.
pub fn fit_subset(
    cfg: &ExperimentConfig,
    feature_tokens: &[String],
) -> Result<(FitReport, RunArtifacts), HarnessError> {
    let started = Instant::now();
    let (ds, folds) = prepare(cfg)?;
    let indices = feature_tokens
        .iter()
        .map(|t| {
            ds.resolve_feature(t)
                .ok_or_else(|| HarnessError::UnknownFeature {
                    token: t.clone(),
                    nearest: nearest_wavenumber(&ds, t),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let subset = FeatureSubset::new(indices, ds.n_features())?;
    let (cv, predictions) = cross_validate(&ds, subset.indices(), &cfg.regressor, &folds)?;
    let model = fit_full(&ds, subset.indices(), &cfg.regressor)?;
    let objective = ObjectiveValue::new(cv, subset.len(), cfg.abc.feature_penalty);
    let report = FitReport {
        tool_version: TOOL_VERSION.to_string(),
        config: cfg.clone(),
        regressor_label: cfg.regressor.to_string(),
        dataset: dataset_info(&ds),
        fold_sizes: folds.fold_sizes(),
        selected: selected_features(&ds, &subset),
        cost: objective.cost,
        per_fold_r2: objective.cv_summary.per_fold_r2(),
        cv: objective.cv_summary,
    };
    Ok((
        report,
        RunArtifacts {
            predictions,
            model_json: model.to_json(),
            meta: RunMeta::finish(started),
        },
    ))
}

fn nearest_wavenumber(ds: &Dataset, token: &str) -> Option<f64> {
    let target: f64 = token.trim().parse().ok()?;
    ds.descriptors()
        .iter()
        .filter_map(|d| d.wavenumber)
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
}

/// Number of k-subsets of p items, saturating.
pub fn binomial(p: usize, k: usize) -> u128 {
    if k > p {
        return 0;
    }
    let k = k.min(p - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((p - i) as u128) / (i as u128 + 1);
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSubset {
    pub subset: FeatureSubset,
    pub objective: ObjectiveValue,
}

/// Evaluates every k-subset with the same objective the optimizer uses and
/// ranks them by cost (ties broken by subset order).
pub fn brute_force_oracle<O: SubsetObjective>(
    objective: &O,
    k: usize,
    cap: u64,
) -> Result<Vec<RankedSubset>, HarnessError> {
    let p = objective.n_features();
    if k == 0 || k > p {
        return Err(HarnessError::Config(format!("k={k} must be in 1..={p}")));
    }
    let candidates = binomial(p, k);
    if candidates > cap as u128 {
        return Err(HarnessError::CapExceeded { candidates, cap });
    }
    let subsets: Vec<FeatureSubset> = (0..p)
        .combinations(k)
        .map(|c| FeatureSubset::new(c, p))
        .collect::<Result<_, _>>()?;
    let mut ranked: Vec<RankedSubset> = subsets
        .into_par_iter()
        .map(|subset| {
            objective
                .evaluate(&subset)
                .map(|objective| RankedSubset { subset, objective })
        })
        .collect::<Result<_, _>>()?;
    ranked.sort_by(|a, b| {
        a.objective
            .cost
            .total_cmp(&b.objective.cost)
            .then_with(|| a.subset.cmp(&b.subset))
    });
    Ok(ranked)
}

/// Brute-force oracle driven by an experiment config.
pub fn brute_force_from_config(
    cfg: &ExperimentConfig,
    k: usize,
) -> Result<(Dataset, Vec<RankedSubset>), HarnessError> {
    let (ds, folds) = prepare(cfg)?;
    let objective = CvObjective {
        dataset: &ds,
        regressor: &cfg.regressor,
        folds: &folds,
        feature_penalty: cfg.abc.feature_penalty,
    };
    let ranked = brute_force_oracle(&objective, k, cfg.bruteforce_cap)?;
    Ok((ds, ranked))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub mean_rmse: f64,
    pub mean_r2: f64,
    pub error_std: f64,
    pub rmse_std: f64,
    pub cost: f64,
    pub features: Vec<String>,
    pub contains_melt_temperature: bool,
}

/// Multi-seed summary: the best seed by cost plus the medians, which show
/// how typical the best run is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub regressor_label: String,
    pub search_mode: String,
    pub seeds: Vec<SeedResult>,
    pub best: SeedResult,
    pub median_mean_rmse: f64,
    pub median_mean_r2: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs the same experiment under several ABC seeds, writing each run to
/// `<output_dir>/seed_<n>` and a `summary.json` next to them.
pub fn repeat_seeds(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<RepeatSummary, HarnessError> {
    if seeds.is_empty() {
        return Err(HarnessError::Config("no seeds given".into()));
    }
    let (ds, folds) = prepare(cfg)?;
    let mut results = Vec::new();
    for &seed in seeds {
        let started = Instant::now();
        let mut run_cfg = cfg.clone();
        run_cfg.abc.seed = seed;
        run_cfg.output_dir = cfg.output_dir.join(format!("seed_{seed}"));
        let (report, artifacts) = run_prepared(&run_cfg, &ds, &folds, &mut |_| {}, started)?;
        emit_report(&report, &artifacts, &run_cfg.output_dir)?;
        log::info!(
            "seed {seed}: mean RMSE {:.2}, features {:?}",
            report.cv.mean_rmse,
            report.selected.names
        );
        results.push(SeedResult {
            seed,
            mean_rmse: report.cv.mean_rmse,
            mean_r2: report.cv.mean_r2,
            error_std: report.cv.error_std,
            rmse_std: report.cv.rmse_std,
            cost: report.cost,
            features: report.selected.names.clone(),
            contains_melt_temperature: report.selected.contains_melt_temperature,
        });
    }
    let best = results
        .iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .cloned()
        .expect("nonempty");
    let summary = RepeatSummary {
        regressor_label: cfg.regressor.to_string(),
        search_mode: cfg.abc.cardinality.to_string(),
        median_mean_rmse: median(&results.iter().map(|r| r.mean_rmse).collect::<Vec<_>>()),
        median_mean_r2: median(&results.iter().map(|r| r.mean_r2).collect::<Vec<_>>()),
        seeds: results,
        best,
    };
    let path = cfg.output_dir.join("summary.json");
    std::fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(summary)
}

/// Convenience for callers that only want the subset search mode changed.
pub fn with_cardinality(cfg: &ExperimentConfig, mode: CardinalityMode) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.abc.cardinality = mode;
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(20, 2), 190);
        assert_eq!(binomial(3, 3), 1);
        assert_eq!(binomial(512, 4), 2_829_877_120);
        assert_eq!(binomial(2, 3), 0);
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn melt_temperature_names() {
        assert!(is_melt_temperature("melt_temp"));
        assert!(is_melt_temperature("Melt Temperature (C)"));
        assert!(!is_melt_temperature("zone1_temp"));
        assert!(!is_melt_temperature("melt_pressure"));
    }

    #[test]
    fn table_cases() {
        let cfg = ExperimentConfig::default();
        assert_eq!(
            cfg.case_regressor(1).unwrap().to_string(),
            "ANFIS MF=7 output constant"
        );
        assert_eq!(
            cfg.case_regressor(4).unwrap().to_string(),
            "ANFIS MF=13 output linear"
        );
        assert_eq!(cfg.case_regressor(8), Some(RegressorConfig::ann(40)));
        assert_eq!(cfg.case_regressor(9), None);
    }

    #[test]
    fn config_defaults_parse() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"dataset": "x.csv"}"#).unwrap();
        assert_eq!(cfg.k_folds, 5);
        assert_eq!(cfg.abc.population, 50);
        assert_eq!(cfg.abc.iterations, 25);
        assert_eq!(
            cfg.wavenumber_range,
            Some(WavenumberRange {
                lo: 6101.0,
                hi: 6599.0
            })
        );
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
