//! Common front for the two regressor families and the leakage-free
//! cross-validation loop shared by the optimizer and the brute-force oracle.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anfis::{self, AnfisError, AnfisModel, AnfisTrainConfig, ConsequentKind};
use crate::ann::{self, AnnError, AnnModel, AnnTrainConfig};
use crate::dataset::{standardize, Dataset, FoldAssignment, Matrix};
use crate::metrics::{CvSummary, FoldMetrics, MetricsError};
use crate::rng;

#[derive(Debug, Error)]
pub enum RegressorError {
    #[error(transparent)]
    Anfis(#[from] AnfisError),
    #[error(transparent)]
    Ann(#[from] AnnError),
}

#[derive(Debug, Error)]
pub enum CvError {
    #[error("fold {fold}: training failed: {source}")]
    Training {
        fold: usize,
        #[source]
        source: RegressorError,
    },
    #[error("fold {fold}: {source}")]
    Metrics {
        fold: usize,
        #[source]
        source: MetricsError,
    },
    #[error("subset is empty or out of range for {p} features")]
    InvalidSubset { p: usize },
    #[error("fold assignment covers {folds} samples, dataset has {samples}")]
    FoldMismatch { folds: usize, samples: usize },
    #[error("aggregation failed: {0}")]
    Summary(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorConfig {
    Anfis(AnfisTrainConfig),
    Ann {
        hidden: usize,
        #[serde(default)]
        train: AnnTrainConfig,
    },
}

impl RegressorConfig {
    pub fn anfis(n_rules: usize, consequent: ConsequentKind) -> Self {
        RegressorConfig::Anfis(AnfisTrainConfig {
            n_rules,
            consequent,
            ..Default::default()
        })
    }

    pub fn ann(hidden: usize) -> Self {
        RegressorConfig::Ann {
            hidden,
            train: AnnTrainConfig::default(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            RegressorConfig::Anfis(_) => "ANFIS",
            RegressorConfig::Ann { .. } => "ANN",
        }
    }

    fn seed(&self) -> u64 {
        match self {
            RegressorConfig::Anfis(c) => c.seed,
            RegressorConfig::Ann { train, .. } => train.seed,
        }
    }

    /// Same configuration with every stochastic seed replaced.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        match &mut c {
            RegressorConfig::Anfis(a) => a.seed = seed,
            RegressorConfig::Ann { train, .. } => train.seed = seed,
        }
        c
    }

    /// Trains on standardized inputs.
    pub fn fit(&self, x: &Matrix, y: &[f64]) -> Result<TrainedModel, RegressorError> {
        Ok(match self {
            RegressorConfig::Anfis(cfg) => TrainedModel::Anfis(anfis::anfis_train(x, y, cfg)?),
            RegressorConfig::Ann { hidden, train } => {
                TrainedModel::Ann(ann::ann_train(x, y, *hidden, train)?)
            }
        })
    }
}

impl fmt::Display for RegressorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegressorConfig::Anfis(c) => {
                let out = match c.consequent {
                    ConsequentKind::Constant => "constant",
                    ConsequentKind::Linear => "linear",
                };
                write!(f, "ANFIS MF={} output {out}", c.n_rules)
            }
            RegressorConfig::Ann { hidden, .. } => write!(f, "ANN {hidden} hidden tanh"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Anfis(AnfisModel),
    Ann(AnnModel),
}

impl TrainedModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64, RegressorError> {
        Ok(match self {
            TrainedModel::Anfis(m) => m.predict(x)?,
            TrainedModel::Ann(m) => m.predict(x)?,
        })
    }

    pub fn with_scaler(self, scaler: crate::dataset::Scaler) -> Self {
        match self {
            TrainedModel::Anfis(m) => TrainedModel::Anfis(m.with_scaler(scaler)),
            TrainedModel::Ann(m) => TrainedModel::Ann(m.with_scaler(scaler)),
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            TrainedModel::Anfis(m) => m.to_json(),
            TrainedModel::Ann(m) => m.to_json(),
        }
    }
}

/// Test-fold predictions kept for reports and audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPredictions {
    pub fold: usize,
    pub rows: Vec<usize>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
}

/// k-fold CV of `regressor` on the `subset` columns. Each fold standardizes on
/// its own training rows and trains with a seed derived from the regressor
/// seed and the fold index.
pub fn cross_validate(
    dataset: &Dataset,
    subset: &[usize],
    regressor: &RegressorConfig,
    folds: &FoldAssignment,
) -> Result<(CvSummary, Vec<FoldPredictions>), CvError> {
    let p = dataset.n_features();
    if subset.is_empty() || subset.iter().any(|&j| j >= p) {
        return Err(CvError::InvalidSubset { p });
    }
    if folds.n_samples() != dataset.n_samples() {
        return Err(CvError::FoldMismatch {
            folds: folds.n_samples(),
            samples: dataset.n_samples(),
        });
    }
    let x = dataset.x().select_columns(subset);
    let y = dataset.y();
    let mut per_fold = Vec::with_capacity(folds.k());
    let mut predictions = Vec::with_capacity(folds.k());
    for fold in 0..folds.k() {
        let train = folds.train_rows(fold);
        let test = folds.test_rows(fold);
        let (_, z) = standardize(&train, &x);
        let x_train = z.select_rows(&train);
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let cfg = regressor.with_seed(rng::derive(
            regressor.seed(),
            &[rng::tag::FOLD_MODEL, fold as u64],
        ));
        let model = cfg
            .fit(&x_train, &y_train)
            .map_err(|source| CvError::Training { fold, source })?;
        let predicted = test
            .iter()
            .map(|&i| model.predict(z.row(i)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| CvError::Training { fold, source })?;
        let actual: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        per_fold.push(
            FoldMetrics::compute(&actual, &predicted)
                .map_err(|source| CvError::Metrics { fold, source })?,
        );
        predictions.push(FoldPredictions {
            fold,
            rows: test,
            actual,
            predicted,
        });
    }
    Ok((CvSummary::from_folds(per_fold)?, predictions))
}

/// Trains on every row of the subset columns, returning the model with its
/// scaler attached.
pub fn fit_full(
    dataset: &Dataset,
    subset: &[usize],
    regressor: &RegressorConfig,
) -> Result<TrainedModel, RegressorError> {
    let x = dataset.x().select_columns(subset);
    let rows: Vec<usize> = (0..x.rows()).collect();
    let (scaler, z) = standardize(&rows, &x);
    Ok(regressor.fit(&z, dataset.y())?.with_scaler(scaler))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{kfold_split, FeatureDescriptor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn affine_dataset() -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 40;
        let x = Matrix::new(n, 3, (0..n * 3).map(|_| rng.gen_range(0.0..10.0)).collect());
        let y = x
            .iter_rows()
            .map(|r| 3.0 * r[0] - 2.0 * r[1] + 7.0)
            .collect();
        let names = ["a", "b", "c"].map(FeatureDescriptor::from_header).to_vec();
        Dataset::new(x, y, names, "y").unwrap()
    }

    #[test]
    fn affine_target_cv_is_exact() {
        let ds = affine_dataset();
        let folds = kfold_split(40, 5, 3).unwrap();
        let mut cfg = RegressorConfig::anfis(1, ConsequentKind::Linear);
        if let RegressorConfig::Anfis(c) = &mut cfg {
            c.ridge = 0.0;
        }
        let (summary, preds) = cross_validate(&ds, &[0, 1], &cfg, &folds).unwrap();
        assert!(summary.mean_rmse < 1e-6, "{}", summary.mean_rmse);
        assert_eq!(preds.len(), 5);
        assert_eq!(preds.iter().map(|p| p.rows.len()).sum::<usize>(), 40);
    }

    #[test]
    fn cv_is_deterministic() {
        let ds = affine_dataset();
        let folds = kfold_split(40, 4, 0).unwrap();
        let cfg = RegressorConfig::Ann {
            hidden: 3,
            train: AnnTrainConfig {
                epochs: 30,
                ..Default::default()
            },
        };
        let a = cross_validate(&ds, &[0, 2], &cfg, &folds).unwrap();
        let b = cross_validate(&ds, &[0, 2], &cfg, &folds).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cv_rejects_bad_inputs() {
        let ds = affine_dataset();
        let folds = kfold_split(40, 4, 0).unwrap();
        let cfg = RegressorConfig::anfis(1, ConsequentKind::Linear);
        assert!(matches!(
            cross_validate(&ds, &[], &cfg, &folds),
            Err(CvError::InvalidSubset { .. })
        ));
        assert!(matches!(
            cross_validate(&ds, &[3], &cfg, &folds),
            Err(CvError::InvalidSubset { .. })
        ));
        let short = kfold_split(20, 4, 0).unwrap();
        assert!(matches!(
            cross_validate(&ds, &[0], &cfg, &short),
            Err(CvError::FoldMismatch { .. })
        ));
        let too_many_rules = RegressorConfig::anfis(39, ConsequentKind::Linear);
        assert!(matches!(
            cross_validate(&ds, &[0], &too_many_rules, &folds),
            Err(CvError::Training { fold: 0, .. })
        ));
    }

    #[test]
    fn config_json_shape() {
        let cfg = RegressorConfig::anfis(7, ConsequentKind::Constant);
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"kind\":\"anfis\""));
        let back: RegressorConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let ann: RegressorConfig = serde_json::from_str(r#"{"kind":"ann","hidden":20}"#).unwrap();
        assert_eq!(ann, RegressorConfig::ann(20));
        assert_eq!(cfg.to_string(), "ANFIS MF=7 output constant");
    }
}
