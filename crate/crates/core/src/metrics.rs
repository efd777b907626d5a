//! Regression error metrics. Residuals are always `predicted - actual`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {actual} actual vs {predicted} predicted")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("empty input")]
    Empty,
    #[error("R^2 needs at least 2 samples")]
    TooShort,
    #[error("actual values are constant; R^2 is undefined")]
    ConstantActual,
    #[error("need at least 2 pooled residuals for a standard deviation, got {0}")]
    TooFewResiduals(usize),
}

fn check(actual: &[f64], predicted: &[f64]) -> Result<(), MetricsError> {
    if actual.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(actual, predicted)?;
    let sse: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (p - a) * (p - a))
        .sum();
    Ok((sse / actual.len() as f64).sqrt())
}

pub fn r2(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(actual, predicted)?;
    if actual.len() < 2 {
        return Err(MetricsError::TooShort);
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let sst: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if sst == 0.0 {
        return Err(MetricsError::ConstantActual);
    }
    let sse: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (p - a) * (p - a))
        .sum();
    Ok(1.0 - sse / sst)
}

/// Sample (n-1) standard deviation of a sequence.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some((ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub rmse: f64,
    pub r2: f64,
    pub residuals: Vec<f64>,
}

impl FoldMetrics {
    pub fn compute(actual: &[f64], predicted: &[f64]) -> Result<Self, MetricsError> {
        Ok(FoldMetrics {
            rmse: rmse(actual, predicted)?,
            r2: r2(actual, predicted)?,
            residuals: actual.iter().zip(predicted).map(|(a, p)| p - a).collect(),
        })
    }
}

/// Sample standard deviation of every test residual across all folds.
pub fn pooled_error_std(per_fold: &[FoldMetrics]) -> Result<f64, MetricsError> {
    if per_fold.is_empty() || per_fold.iter().any(|f| f.residuals.is_empty()) {
        return Err(MetricsError::Empty);
    }
    let pooled: Vec<f64> = per_fold
        .iter()
        .flat_map(|f| f.residuals.iter().copied())
        .collect();
    sample_std(&pooled).ok_or(MetricsError::TooFewResiduals(pooled.len()))
}

/// Cross-validation aggregate. `error_std` is the pooled-residual sample
/// standard deviation; `rmse_std` (sample std of the per-fold RMSEs) is kept
/// alongside for comparison with aggregate-style reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub per_fold: Vec<FoldMetrics>,
    pub mean_rmse: f64,
    pub mean_r2: f64,
    pub error_std: f64,
    pub rmse_std: f64,
}

impl CvSummary {
    pub fn from_folds(per_fold: Vec<FoldMetrics>) -> Result<Self, MetricsError> {
        let error_std = pooled_error_std(&per_fold)?;
        let k = per_fold.len() as f64;
        let mean_rmse = per_fold.iter().map(|f| f.rmse).sum::<f64>() / k;
        let mean_r2 = per_fold.iter().map(|f| f.r2).sum::<f64>() / k;
        let rmses: Vec<f64> = per_fold.iter().map(|f| f.rmse).collect();
        let rmse_std = sample_std(&rmses).unwrap_or(0.0);
        Ok(CvSummary {
            per_fold,
            mean_rmse,
            mean_r2,
            error_std,
            rmse_std,
        })
    }

    pub fn per_fold_r2(&self) -> Vec<f64> {
        self.per_fold.iter().map(|f| f.r2).collect()
    }
}
