use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::svg::{line_chart, Series};
use super::{io_err, prepare, ExperimentConfig, HarnessError};
use crate::abc::{abc_run, CardinalityMode, CvObjective};

/// One (structure case, subset size) cell of a sweep. Failed cells keep their
/// error text and leave the metric fields empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub case: u8,
    pub family: String,
    pub regressor: String,
    pub k: usize,
    pub status: String,
    pub mean_rmse: Option<f64>,
    pub mean_r2: Option<f64>,
    pub error_std: Option<f64>,
    pub cost: Option<f64>,
    pub evaluations: Option<usize>,
    /// Selected feature names joined with `;`.
    pub features: String,
    pub error: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Mean over successful cells of each family, when both have any.
    pub anfis_mean_rmse: Option<f64>,
    pub ann_mean_rmse: Option<f64>,
    pub anfis_below_ann: Option<bool>,
    pub observations: Vec<String>,
}

/// Runs one fixed-cardinality search per (case, k) cell. Cells run in
/// parallel and are returned in `cases`-major, `ks`-minor order; a failing
/// cell is recorded and does not stop the sweep.
pub fn cardinality_sweep(
    cfg: &ExperimentConfig,
    ks: &[usize],
    cases: &[u8],
) -> Result<SweepReport, HarnessError> {
    let (ds, folds) = prepare(cfg)?;
    let mut cells = Vec::new();
    for &case in cases {
        let regressor = cfg
            .case_regressor(case)
            .ok_or_else(|| HarnessError::Config(format!("unknown structure case {case}")))?;
        for &k in ks {
            cells.push((case, k, regressor.clone()));
        }
    }
    let rows: Vec<SweepRow> = cells
        .into_par_iter()
        .map(|(case, k, regressor)| {
            let mut abc = cfg.abc.clone();
            abc.cardinality = CardinalityMode::Fixed { k };
            let objective = CvObjective {
                dataset: &ds,
                regressor: &regressor,
                folds: &folds,
                feature_penalty: abc.feature_penalty,
            };
            let mut row = SweepRow {
                case,
                family: regressor.family().to_string(),
                regressor: regressor.to_string(),
                k,
                status: "ok".into(),
                mean_rmse: None,
                mean_r2: None,
                error_std: None,
                cost: None,
                evaluations: None,
                features: String::new(),
                error: String::new(),
            };
            match abc_run(&abc, &objective, &mut |_| {}) {
                Ok(outcome) => {
                    let cv = &outcome.best.objective.cv_summary;
                    row.mean_rmse = Some(cv.mean_rmse);
                    row.mean_r2 = Some(cv.mean_r2);
                    row.error_std = Some(cv.error_std);
                    row.cost = Some(outcome.best.cost());
                    row.evaluations = Some(outcome.evaluations);
                    row.features = ds.feature_names(outcome.best.subset.indices()).join(";");
                }
                Err(e) => {
                    log::warn!("case {case}, k={k}: {e}");
                    row.status = "failed".into();
                    row.error = e.to_string();
                }
            }
            log::info!("case {case}, k={k}: {}", row.status);
            row
        })
        .collect();
    Ok(summarize(rows))
}

fn family_mean(rows: &[SweepRow], family: &str) -> Option<f64> {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.family == family)
        .filter_map(|r| r.mean_rmse)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summarize(rows: Vec<SweepRow>) -> SweepReport {
    let anfis = family_mean(&rows, "ANFIS");
    let ann = family_mean(&rows, "ANN");
    let below = anfis.zip(ann).map(|(a, b)| a < b);
    let mut observations = Vec::new();
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    observations.push(format!("{} cells, {failed} failed", rows.len()));
    match (anfis, ann) {
        (Some(a), Some(b)) => observations.push(format!(
            "average RMSE over cells: ANFIS {a:.3}, ANN {b:.3}; ANFIS {} ANN",
            if a < b { "below" } else { "not below" }
        )),
        _ => observations.push("family comparison needs both ANFIS and ANN cells".into()),
    }
    SweepReport {
        rows,
        anfis_mean_rmse: anfis,
        ann_mean_rmse: ann,
        anfis_below_ann: below,
        observations,
    }
}

/// (ANFIS chart, ANN chart), one series per structure case.
pub fn render_sweep_svgs(rows: &[SweepRow]) -> (String, String) {
    let chart = |family: &str| {
        let mut cases: Vec<u8> = rows
            .iter()
            .filter(|r| r.family == family)
            .map(|r| r.case)
            .collect();
        cases.dedup();
        let series: Vec<Series> = cases
            .iter()
            .map(|&c| {
                let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.case == c).collect();
                Series {
                    label: format!("case {c}: {}", mine[0].regressor),
                    points: mine
                        .iter()
                        .filter_map(|r| r.mean_rmse.map(|v| (r.k as f64, v)))
                        .collect(),
                }
            })
            .collect();
        line_chart(
            &format!("{family}: best mean CV RMSE vs number of features"),
            "number of features",
            "mean RMSE",
            &series,
        )
    };
    (chart("ANFIS"), chart("ANN"))
}

/// Writes `sweep.csv`, `rmse_vs_k_anfis.svg`, `rmse_vs_k_ann.svg` and
/// `sweep_report.json`.
pub fn emit_sweep(report: &SweepReport, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let csv_path = out_dir.join("sweep.csv");
    let csv_err = |source| HarnessError::Csv {
        path: csv_path.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
    for r in &report.rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&csv_path))?;

    let (anfis, ann) = render_sweep_svgs(&report.rows);
    let mut files = vec![csv_path.clone()];
    for (name, body) in [("rmse_vs_k_anfis.svg", anfis), ("rmse_vs_k_ann.svg", ann)] {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(io_err(&path))?;
        files.push(path);
    }
    let path = out_dir.join("sweep_report.json");
    let text = serde_json::to_string_pretty(report).expect("sweep report serializes") + "\n";
    std::fs::write(&path, text).map_err(io_err(&path))?;
    files.push(path);
    Ok(files)
}

pub fn sweep_rows_from_csv(path: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}
