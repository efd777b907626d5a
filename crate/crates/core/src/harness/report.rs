use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::svg::{bar_chart, line_chart, Series};
use super::{io_err, ExperimentConfig, HarnessError};
use crate::abc::{IterationRecord, ObjectiveValue, SizeBest};
use crate::metrics::{CvSummary, FoldMetrics};
use crate::regressor::FoldPredictions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub target: String,
    pub n_samples: usize,
    pub n_features: usize,
    pub n_nir: usize,
    pub n_process: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeatures {
    pub indices: Vec<usize>,
    pub names: Vec<String>,
    /// cm^-1, for the NIR members only.
    pub wavenumbers: Vec<f64>,
    pub process_features: Vec<String>,
    pub contains_melt_temperature: bool,
}

/// Canonical, fully deterministic run report. Timing lives in [`RunMeta`].
///
/// `cv.error_std` is the sample standard deviation of all pooled test
/// residuals (predicted - actual); `cv.rmse_std` is the sample standard
/// deviation of the per-fold RMSEs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub regressor_label: String,
    pub search_mode: String,
    pub seed: u64,
    pub dataset: DatasetInfo,
    pub fold_sizes: Vec<usize>,
    pub selected: SelectedFeatures,
    pub cost: f64,
    pub feature_penalty: f64,
    pub cv: CvSummary,
    pub per_fold_r2: Vec<f64>,
    pub evaluations: usize,
    pub trace: Vec<IterationRecord>,
    pub best_by_size: Vec<SizeBest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub regressor_label: String,
    pub dataset: DatasetInfo,
    pub fold_sizes: Vec<usize>,
    pub selected: SelectedFeatures,
    pub cost: f64,
    pub cv: CvSummary,
    pub per_fold_r2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub finished_unix_seconds: u64,
    pub wall_clock_seconds: f64,
}

impl RunMeta {
    pub fn finish(started: Instant) -> Self {
        RunMeta {
            finished_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        }
    }
}

/// Everything a run produces besides the canonical report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub predictions: Vec<FoldPredictions>,
    pub model_json: String,
    pub meta: RunMeta,
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<PathBuf, HarnessError> {
    std::fs::write(&path, contents).map_err(io_err(&path))?;
    Ok(path)
}

fn json_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn folds_csv(cv: &CvSummary, predictions: &[FoldPredictions]) -> String {
    let mut out = String::from("fold,n_test,rmse,r2\n");
    for (f, p) in cv.per_fold.iter().zip(predictions) {
        out.push_str(&format!(
            "{},{},{:?},{:?}\n",
            p.fold,
            p.rows.len(),
            f.rmse,
            f.r2
        ));
    }
    out
}

fn predictions_csv(predictions: &[FoldPredictions]) -> String {
    let mut out = String::from("fold,row,actual,predicted,residual\n");
    for p in predictions {
        for ((row, a), y) in p.rows.iter().zip(&p.actual).zip(&p.predicted) {
            out.push_str(&format!("{},{row},{a:?},{y:?},{:?}\n", p.fold, y - a));
        }
    }
    out
}

fn r2_svg(per_fold_r2: &[f64], title: &str) -> String {
    let bars: Vec<(String, f64)> = per_fold_r2
        .iter()
        .enumerate()
        .map(|(i, r)| (format!("{}", i + 1), *r))
        .collect();
    bar_chart(title, "fold", "R^2", &bars)
}

fn common_outputs(
    out_dir: &Path,
    cv: &CvSummary,
    label: &str,
    artifacts: &RunArtifacts,
) -> Result<Vec<PathBuf>, HarnessError> {
    Ok(vec![
        write(
            out_dir.join("folds.csv"),
            folds_csv(cv, &artifacts.predictions),
        )?,
        write(
            out_dir.join("predictions.csv"),
            predictions_csv(&artifacts.predictions),
        )?,
        write(
            out_dir.join("r2_per_fold.svg"),
            r2_svg(&cv.per_fold_r2(), &format!("Per-fold R^2, {label}")),
        )?,
        write(out_dir.join("model.json"), &artifacts.model_json)?,
        write(out_dir.join("run_meta.json"), json_pretty(&artifacts.meta))?,
    ])
}

/// Writes `report.json`, `folds.csv`, `predictions.csv`, `trace.csv`,
/// `best_by_size.csv`, `rmse_vs_k.svg`, `r2_per_fold.svg`, `model.json` and
/// `run_meta.json`. Everything except `run_meta.json` is byte-identical for
/// identical runs.
pub fn emit_report(
    report: &ExperimentReport,
    artifacts: &RunArtifacts,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut files = vec![write(out_dir.join("report.json"), json_pretty(report))?];

    let mut trace =
        String::from("iteration,best_cost,best_mean_rmse,evaluations,scouts,best_subset\n");
    for r in &report.trace {
        let idx: Vec<String> = r
            .best_subset
            .indices()
            .iter()
            .map(|i| i.to_string())
            .collect();
        trace.push_str(&format!(
            "{},{:?},{:?},{},{},{}\n",
            r.iteration,
            r.best_cost,
            r.best_mean_rmse,
            r.evaluations,
            r.scouts,
            idx.join(" ")
        ));
    }
    files.push(write(out_dir.join("trace.csv"), trace)?);

    let mut by_size = String::from("k,mean_rmse,cost,subset\n");
    for b in &report.best_by_size {
        let idx: Vec<String> = b.subset.indices().iter().map(|i| i.to_string()).collect();
        by_size.push_str(&format!(
            "{},{:?},{:?},{}\n",
            b.k,
            b.mean_rmse,
            b.cost,
            idx.join(" ")
        ));
    }
    files.push(write(out_dir.join("best_by_size.csv"), by_size)?);
    let series = [Series {
        label: report.regressor_label.clone(),
        points: report
            .best_by_size
            .iter()
            .map(|b| (b.k as f64, b.mean_rmse))
            .collect(),
    }];
    files.push(write(
        out_dir.join("rmse_vs_k.svg"),
        line_chart(
            "Best mean CV RMSE seen per subset size",
            "number of features",
            "mean RMSE",
            &series,
        ),
    )?);
    files.extend(common_outputs(
        out_dir,
        &report.cv,
        &report.regressor_label,
        artifacts,
    )?);
    Ok(files)
}

pub fn emit_fit(
    report: &FitReport,
    artifacts: &RunArtifacts,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut files = vec![write(out_dir.join("fit_report.json"), json_pretty(report))?];
    files.extend(common_outputs(
        out_dir,
        &report.cv,
        &report.regressor_label,
        artifacts,
    )?);
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditOutcome {
    pub checks: Vec<AuditCheck>,
}

impl AuditOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Deserialize)]
struct PredictionRow {
    fold: usize,
    row: usize,
    actual: f64,
    predicted: f64,
}

/// Recomputes every metric in `report.json` from `predictions.csv` and
/// compares bit for bit.
pub fn audit_report(dir: &Path) -> Result<AuditOutcome, HarnessError> {
    let report_path = dir.join("report.json");
    let text = std::fs::read_to_string(&report_path).map_err(io_err(&report_path))?;
    let report: ExperimentReport =
        serde_json::from_str(&text).map_err(|source| HarnessError::Json {
            path: report_path.clone(),
            source,
        })?;

    let pred_path = dir.join("predictions.csv");
    let mut reader = csv::Reader::from_path(&pred_path).map_err(|source| HarnessError::Csv {
        path: pred_path.clone(),
        source,
    })?;
    let mut by_fold: BTreeMap<usize, Vec<PredictionRow>> = BTreeMap::new();
    for row in reader.deserialize() {
        let row: PredictionRow = row.map_err(|source| HarnessError::Csv {
            path: pred_path.clone(),
            source,
        })?;
        by_fold.entry(row.fold).or_default().push(row);
    }

    let mut checks = Vec::new();
    let mut check = |name: &str, passed: bool, detail: String| {
        checks.push(AuditCheck {
            name: name.to_string(),
            passed,
            detail,
        })
    };

    let mut folds = Vec::new();
    for rows in by_fold.values() {
        let actual: Vec<f64> = rows.iter().map(|r| r.actual).collect();
        let predicted: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
        match FoldMetrics::compute(&actual, &predicted) {
            Ok(m) => folds.push(m),
            Err(e) => return Err(HarnessError::Audit(format!("fold metrics: {e}"))),
        }
    }
    check(
        "fold count",
        folds.len() == report.cv.per_fold.len() && folds.len() == report.config.k_folds,
        format!(
            "{} folds in predictions, {} in report",
            folds.len(),
            report.cv.per_fold.len()
        ),
    );
    let mut rows: Vec<usize> = by_fold.values().flatten().map(|r| r.row).collect();
    rows.sort_unstable();
    check(
        "predictions cover every sample once",
        rows == (0..report.dataset.n_samples).collect::<Vec<_>>(),
        format!(
            "{} prediction rows for {} samples",
            rows.len(),
            report.dataset.n_samples
        ),
    );
    let recomputed =
        CvSummary::from_folds(folds).map_err(|e| HarnessError::Audit(format!("summary: {e}")))?;
    for (i, (a, b)) in recomputed
        .per_fold
        .iter()
        .zip(&report.cv.per_fold)
        .enumerate()
    {
        check(
            &format!("fold {i} rmse"),
            a.rmse.to_bits() == b.rmse.to_bits(),
            format!("recomputed {:?}, reported {:?}", a.rmse, b.rmse),
        );
        check(
            &format!("fold {i} r2"),
            a.r2.to_bits() == b.r2.to_bits(),
            format!("recomputed {:?}, reported {:?}", a.r2, b.r2),
        );
        check(
            &format!("fold {i} residuals"),
            a.residuals == b.residuals,
            format!("{} residuals", a.residuals.len()),
        );
    }
    for (name, a, b) in [
        ("mean rmse", recomputed.mean_rmse, report.cv.mean_rmse),
        ("mean r2", recomputed.mean_r2, report.cv.mean_r2),
        (
            "pooled error std",
            recomputed.error_std,
            report.cv.error_std,
        ),
        ("per-fold rmse std", recomputed.rmse_std, report.cv.rmse_std),
    ] {
        check(
            name,
            a.to_bits() == b.to_bits(),
            format!("recomputed {a:?}, reported {b:?}"),
        );
    }
    check(
        "per-fold r2 list",
        recomputed.per_fold_r2() == report.per_fold_r2,
        format!("{:?}", report.per_fold_r2),
    );
    let objective = ObjectiveValue::new(
        recomputed,
        report.selected.indices.len(),
        report.feature_penalty,
    );
    check(
        "cost",
        objective.cost.to_bits() == report.cost.to_bits(),
        format!(
            "recomputed {:?}, reported {:?}",
            objective.cost, report.cost
        ),
    );
    let monotone = report
        .trace
        .windows(2)
        .all(|w| w[1].best_cost <= w[0].best_cost);
    check(
        "trace non-increasing",
        monotone,
        format!("{} records", report.trace.len()),
    );
    let final_matches = report
        .trace
        .last()
        .is_none_or(|r| r.best_cost.to_bits() == report.cost.to_bits());
    check("trace ends at reported cost", final_matches, String::new());
    Ok(AuditOutcome { checks })
}
