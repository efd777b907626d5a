//! Experiment data: CSV ingestion, wavenumber filtering, fold assignment and
//! per-fold standardization.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("file has no header row")]
    MissingHeader,
    #[error("target column `{0}` not found")]
    MissingTarget(String),
    #[error("column `{0}` appears more than once")]
    DuplicateColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row} has {found} cells, header has {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("dataset needs at least 2 rows, found {0}")]
    TooFewRows(usize),
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("wavenumber range is inverted: lo={lo} > hi={hi}")]
    InvertedRange { lo: f64, hi: f64 },
    #[error("fold count k={k} invalid for n={n} samples (need 2 <= k <= n)")]
    InvalidFoldCount { n: usize, k: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    NirWavenumber,
    Process,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
    /// cm^-1; set exactly when `kind` is `NirWavenumber`.
    pub wavenumber: Option<f64>,
}

impl FeatureDescriptor {
    /// Classifies a header: anything that parses as a plain finite number is a
    /// wavenumber in cm^-1, everything else is a process feature.
    pub fn from_header(name: &str) -> Self {
        match name.trim().parse::<f64>() {
            Ok(w) if w.is_finite() => FeatureDescriptor {
                name: name.to_string(),
                kind: FeatureKind::NirWavenumber,
                wavenumber: Some(w),
            },
            _ => FeatureDescriptor {
                name: name.to_string(),
                kind: FeatureKind::Process,
                wavenumber: None,
            },
        }
    }

    pub fn is_nir(&self) -> bool {
        self.kind == FeatureKind::NirWavenumber
    }
}

/// Row-major dense matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix::new(rows.len(), self.cols, data)
    }

    /// New matrix made of the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Matrix::new(self.rows, cols.len(), data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    descriptors: Vec<FeatureDescriptor>,
    target_name: String,
}

impl Dataset {
    pub fn new(
        x: Matrix,
        y: Vec<f64>,
        descriptors: Vec<FeatureDescriptor>,
        target_name: impl Into<String>,
    ) -> Result<Self, DatasetError> {
        if x.rows() < 2 {
            return Err(DatasetError::TooFewRows(x.rows()));
        }
        if x.cols() == 0 {
            return Err(DatasetError::NoFeatures);
        }
        if y.len() != x.rows() {
            return Err(DatasetError::Invalid(format!(
                "target has {} values for {} rows",
                y.len(),
                x.rows()
            )));
        }
        if descriptors.len() != x.cols() {
            return Err(DatasetError::Invalid(format!(
                "{} descriptors for {} columns",
                descriptors.len(),
                x.cols()
            )));
        }
        let mut seen = HashSet::new();
        for d in &descriptors {
            if !seen.insert(d.name.as_str()) {
                return Err(DatasetError::DuplicateColumn(d.name.clone()));
            }
            if d.is_nir() != d.wavenumber.is_some() {
                return Err(DatasetError::Invalid(format!(
                    "descriptor `{}` has inconsistent wavenumber tag",
                    d.name
                )));
            }
        }
        if let Some(pos) = x.as_slice().iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos / x.cols(), pos % x.cols());
            return Err(DatasetError::NonNumeric {
                row: row + 1,
                column: descriptors[col].name.clone(),
                value: x.as_slice()[pos].to_string(),
            });
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::Invalid(format!(
                "non-finite target in row {}",
                row + 1
            )));
        }
        Ok(Dataset {
            x,
            y,
            descriptors,
            target_name: target_name.into(),
        })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn n_samples(&self) -> usize {
        self.x.rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn feature_names(&self, indices: &[usize]) -> Vec<String> {
        indices
            .iter()
            .map(|&i| self.descriptors[i].name.clone())
            .collect()
    }

    /// Resolves a feature token to a column index. Numeric tokens match NIR
    /// wavenumbers by value, anything else matches a header name exactly.
    pub fn resolve_feature(&self, token: &str) -> Option<usize> {
        let token = token.trim();
        if let Some(i) = self.descriptors.iter().position(|d| d.name == token) {
            return Some(i);
        }
        let w: f64 = token.parse().ok()?;
        self.descriptors
            .iter()
            .position(|d| d.wavenumber == Some(w))
    }

    /// Writes the dataset back as CSV (features in order, target last).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<&str> = self.descriptors.iter().map(|d| d.name.as_str()).collect();
        header.push(&self.target_name);
        out.push_str(&header.join(","));
        out.push('\n');
        for (i, row) in self.x.iter_rows().enumerate() {
            let mut cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            cells.push(format!("{:?}", self.y[i]));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nir = self.descriptors.iter().filter(|d| d.is_nir()).count();
        write!(
            f,
            "{} samples x {} features ({} NIR, {} process), target `{}`",
            self.n_samples(),
            self.n_features(),
            nir,
            self.n_features() - nir,
            self.target_name
        )
    }
}

pub fn load_dataset(path: &Path, target_column: &str) -> Result<Dataset, DatasetError> {
    load_dataset_excluding(path, target_column, &[])
}

/// Like [`load_dataset`] but drops the named columns (e.g. other laboratory
/// targets shipped in the same file) before parsing.
pub fn load_dataset_excluding(
    path: &Path,
    target_column: &str,
    exclude: &[String],
) -> Result<Dataset, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text, target_column, exclude)
}

pub fn parse_dataset(
    text: &str,
    target_column: &str,
    exclude: &[String],
) -> Result<Dataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(DatasetError::MissingHeader);
    }
    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(DatasetError::DuplicateColumn(h.clone()));
        }
    }
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| DatasetError::MissingTarget(target_column.to_string()))?;
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&j| j != target_idx && !exclude.contains(&headers[j]))
        .collect();

    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut n = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 2; // 1-based, header is line 1
        if record.len() != headers.len() {
            return Err(DatasetError::RaggedRow {
                row,
                found: record.len(),
                expected: headers.len(),
            });
        }
        let parse = |j: usize| -> Result<f64, DatasetError> {
            let cell = &record[j];
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(DatasetError::NonNumeric {
                    row,
                    column: headers[j].clone(),
                    value: cell.to_string(),
                }),
            }
        };
        for &j in &feature_cols {
            data.push(parse(j)?);
        }
        y.push(parse(target_idx)?);
        n += 1;
    }
    if n < 2 {
        return Err(DatasetError::TooFewRows(n));
    }
    if feature_cols.is_empty() {
        return Err(DatasetError::NoFeatures);
    }
    let descriptors = feature_cols
        .iter()
        .map(|&j| FeatureDescriptor::from_header(&headers[j]))
        .collect();
    Dataset::new(
        Matrix::new(n, feature_cols.len(), data),
        y,
        descriptors,
        target_column,
    )
}

/// Keeps every process feature and the NIR features with lo <= wavenumber <= hi.
pub fn select_wavenumber_range(ds: &Dataset, lo: f64, hi: f64) -> Result<Dataset, DatasetError> {
    if lo > hi {
        return Err(DatasetError::InvertedRange { lo, hi });
    }
    let keep: Vec<usize> = ds
        .descriptors
        .iter()
        .enumerate()
        .filter(|(_, d)| match d.wavenumber {
            Some(w) => lo <= w && w <= hi,
            None => true,
        })
        .map(|(j, _)| j)
        .collect();
    if keep.is_empty() {
        return Err(DatasetError::NoFeatures);
    }
    Dataset::new(
        ds.x.select_columns(&keep),
        ds.y.clone(),
        keep.iter().map(|&j| ds.descriptors[j].clone()).collect(),
        ds.target_name.clone(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    k: usize,
    membership: Vec<usize>,
}

impl FoldAssignment {
    pub fn from_membership(k: usize, membership: Vec<usize>) -> Result<Self, DatasetError> {
        let n = membership.len();
        if k < 2 || k > n {
            return Err(DatasetError::InvalidFoldCount { n, k });
        }
        let mut sizes = vec![0usize; k];
        for &f in &membership {
            if f >= k {
                return Err(DatasetError::Invalid(format!("fold index {f} >= k={k}")));
            }
            sizes[f] += 1;
        }
        if sizes.contains(&0) {
            return Err(DatasetError::Invalid("empty fold".into()));
        }
        Ok(FoldAssignment { k, membership })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_samples(&self) -> usize {
        self.membership.len()
    }

    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.membership {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.membership.len())
            .filter(|&i| self.membership[i] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.membership.len())
            .filter(|&i| self.membership[i] != fold)
            .collect()
    }
}

/// Seeded Fisher-Yates shuffle followed by round-robin assignment.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldAssignment, DatasetError> {
    if k < 2 || k > n {
        return Err(DatasetError::InvalidFoldCount { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::tag::FOLDS]));
    let mut membership = vec![0; n];
    for (pos, &sample) in order.iter().enumerate() {
        membership[sample] = pos % k;
    }
    Ok(FoldAssignment { k, membership })
}

/// Per-column z-score parameters fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Scaler {
    /// Population statistics over `rows` of `x`. A column counts as constant
    /// when its spread is below 1e-12 relative to its magnitude.
    pub fn fit(x: &Matrix, rows: &[usize]) -> Scaler {
        assert!(!rows.is_empty(), "scaler needs at least one training row");
        let p = x.cols();
        let n = rows.len() as f64;
        let mut means = vec![0.0; p];
        for &r in rows {
            for (m, v) in means.iter_mut().zip(x.row(r)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; p];
        for &r in rows {
            for ((s, v), m) in vars.iter_mut().zip(x.row(r)).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds: Vec<f64> = vars.iter().map(|s| (s / n).sqrt()).collect();
        let constant = stds
            .iter()
            .zip(&means)
            .map(|(s, m)| *s <= 1e-12 * m.abs().max(1.0))
            .collect();
        Scaler {
            means,
            stds,
            constant,
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| {
                if self.constant[j] {
                    0.0
                } else {
                    (v - self.means[j]) / self.stds[j]
                }
            })
            .collect()
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = Vec::with_capacity(x.rows() * x.cols());
        for row in x.iter_rows() {
            out.extend(self.transform_row(row));
        }
        Matrix::new(x.rows(), x.cols(), out)
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| {
                if self.constant[j] {
                    self.means[j]
                } else {
                    v * self.stds[j] + self.means[j]
                }
            })
            .collect()
    }
}

/// Fits a scaler on `train_rows` and returns it with the full transformed matrix.
pub fn standardize(train_rows: &[usize], x: &Matrix) -> (Scaler, Matrix) {
    let scaler = Scaler::fit(x, train_rows);
    let transformed = scaler.transform(x);
    (scaler, transformed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pla_like_header() -> String {
        let mut cols: Vec<String> = (6000..=6700).map(|w| w.to_string()).collect();
        for i in 0..13 {
            cols.push(format!("proc_{i}"));
        }
        cols.push("Mn".into());
        cols.join(",")
    }

    #[test]
    fn process_only_columns() {
        let ds = parse_dataset("a,b,Mn\n1,2,3\n4,5,6\n7,8,9\n", "Mn", &[]).unwrap();
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.n_samples(), 3);
        assert!(ds
            .descriptors()
            .iter()
            .all(|d| d.kind == FeatureKind::Process));
        assert_eq!(ds.y(), &[3.0, 6.0, 9.0]);
    }

    #[test]
    fn numeric_header_is_wavenumber() {
        let ds = parse_dataset("6158,melt_temp,Mn\n0.1,200,5\n0.2,210,6\n", "Mn", &[]).unwrap();
        assert_eq!(ds.descriptors()[0].kind, FeatureKind::NirWavenumber);
        assert_eq!(ds.descriptors()[0].wavenumber, Some(6158.0));
        assert_eq!(ds.descriptors()[1].kind, FeatureKind::Process);
        assert_eq!(ds.resolve_feature("6158"), Some(0));
        assert_eq!(ds.resolve_feature("6158.0"), Some(0));
        assert_eq!(ds.resolve_feature("melt_temp"), Some(1));
        assert_eq!(ds.resolve_feature("nope"), None);
    }

    #[test]
    fn load_errors() {
        assert!(matches!(
            parse_dataset("a,b\n1,2\n3,4\n", "Mn", &[]),
            Err(DatasetError::MissingTarget(_))
        ));
        assert!(matches!(
            parse_dataset("a,Mn,Mn\n1,2,3\n3,4,5\n", "Mn", &[]),
            Err(DatasetError::DuplicateColumn(_))
        ));
        assert!(matches!(
            parse_dataset("a,Mn\n1,2\n", "Mn", &[]),
            Err(DatasetError::TooFewRows(1))
        ));
        match parse_dataset("a,b,Mn\n1,2,3\n4,x,6\n", "Mn", &[]) {
            Err(DatasetError::NonNumeric { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "b");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_dataset("a,Mn\n1,2\n,4\n", "Mn", &[]),
            Err(DatasetError::NonNumeric { .. })
        ));
        assert!(matches!(
            parse_dataset("a,Mn\n1,2\nNaN,4\n", "Mn", &[]),
            Err(DatasetError::NonNumeric { .. })
        ));
        assert!(matches!(
            load_dataset(Path::new("/definitely/not/here.csv"), "Mn"),
            Err(DatasetError::Io { .. })
        ));
    }

    #[test]
    fn exclusion_drops_columns() {
        let ds = parse_dataset("a,Mw,Mn\n1,2,3\n4,5,6\n", "Mn", &["Mw".to_string()]).unwrap();
        assert_eq!(ds.feature_names(&[0]), vec!["a".to_string()]);
        assert_eq!(ds.n_features(), 1);
    }

    #[test]
    fn range_filter_counts() {
        let header = pla_like_header();
        let ncols = header.split(',').count() - 1;
        let row: Vec<String> = (0..=ncols).map(|i| format!("{}", i as f64 * 0.5)).collect();
        let text = format!("{header}\n{}\n{}\n", row.join(","), row.join(","));
        let ds = parse_dataset(&text, "Mn", &[]).unwrap();

        let filtered = select_wavenumber_range(&ds, 6101.0, 6599.0).unwrap();
        let nir = filtered.descriptors().iter().filter(|d| d.is_nir()).count();
        assert_eq!(nir, 499);
        assert_eq!(filtered.n_features(), 512);

        let single = select_wavenumber_range(&ds, 6158.0, 6158.0).unwrap();
        assert_eq!(single.n_features(), 14);
        assert_eq!(single.descriptors()[0].wavenumber, Some(6158.0));

        let all = select_wavenumber_range(&ds, 0.0, 1e6).unwrap();
        assert_eq!(all, ds);

        assert!(matches!(
            select_wavenumber_range(&ds, 2.0, 1.0),
            Err(DatasetError::InvertedRange { .. })
        ));
    }

    #[test]
    fn range_filter_empty_is_error() {
        let ds = parse_dataset("6000,6001,Mn\n1,2,3\n4,5,6\n", "Mn", &[]).unwrap();
        assert!(matches!(
            select_wavenumber_range(&ds, 7000.0, 8000.0),
            Err(DatasetError::NoFeatures)
        ));
    }

    #[test]
    fn fold_sizes() {
        let f = kfold_split(63, 5, 0).unwrap();
        let mut sizes = f.fold_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![13, 13, 13, 12, 12]);

        let loo = kfold_split(10, 10, 3).unwrap();
        assert!(loo.fold_sizes().iter().all(|&s| s == 1));

        assert_eq!(
            kfold_split(63, 5, 7).unwrap(),
            kfold_split(63, 5, 7).unwrap()
        );
        assert_ne!(
            kfold_split(63, 5, 7).unwrap(),
            kfold_split(63, 5, 8).unwrap()
        );

        assert!(kfold_split(4, 5, 0).is_err());
        assert!(kfold_split(4, 1, 0).is_err());
    }

    #[test]
    fn train_and_test_rows_partition() {
        let f = kfold_split(17, 4, 1).unwrap();
        for fold in 0..4 {
            let mut all = f.train_rows(fold);
            all.extend(f.test_rows(fold));
            all.sort_unstable();
            assert_eq!(all, (0..17).collect::<Vec<_>>());
        }
    }

    #[test]
    fn standardize_hand_values() {
        let x = Matrix::from_rows(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]);
        let (scaler, z) = standardize(&[0, 1, 2], &x);
        assert_abs_diff_eq!(scaler.means[0], 2.0);
        assert_abs_diff_eq!(scaler.stds[0], 0.816496580927726, epsilon = 1e-12);
        assert_abs_diff_eq!(z.get(0, 0), -1.224744871391589, epsilon = 1e-12);
        assert_abs_diff_eq!(z.get(1, 0), 0.0);
        assert_abs_diff_eq!(z.get(2, 0), 1.224744871391589, epsilon = 1e-12);
        assert!(scaler.constant[1] && !scaler.constant[0]);
        assert_eq!(z.column(1), vec![0.0, 0.0, 0.0]);
        assert_eq!(scaler.transform_row(&scaler.means.clone()), vec![0.0, 0.0]);
    }

    #[test]
    fn scaler_ignores_test_rows() {
        let x = Matrix::from_rows(&[vec![1.0], vec![3.0], vec![1000.0]]);
        let (scaler, z) = standardize(&[0, 1], &x);
        assert_eq!(scaler.means[0], 2.0);
        assert_eq!(scaler.stds[0], 1.0);
        assert_eq!(z.get(2, 0), 998.0);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let text = "6101.5,melt,Mn\n0.1234567890123,199.99,53000.25\n1e-300,-0.0,4.9e-324\n";
        let ds = parse_dataset(text, "Mn", &[]).unwrap();
        let again = parse_dataset(&ds.to_csv_string(), "Mn", &[]).unwrap();
        for (a, b) in ds.x().as_slice().iter().zip(again.x().as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(ds, again);
    }
}
