//! Takagi-Sugeno ANFIS regressor with Gaussian membership functions.
//!
//! Rules come from scatter partitioning: fuzzy c-means places one rule per
//! cluster, each rule owning one Gaussian per input dimension. Training is
//! the usual hybrid scheme: least-squares consequents with optional gradient
//! refinement of the premise centers and widths.
//!
//! Inference runs the five layers in order: per-input membership, product
//! firing strength, normalization, weighted consequents and the final sum.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Matrix, Scaler};
use crate::linalg::ridge_solve;
use crate::model_io::{self, ModelIoError};
use crate::rng;

pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum AnfisError {
    #[error("invalid ANFIS configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("singular clustering: all {0} rows are identical, cannot form more than one cluster")]
    SingularClustering(usize),
    #[error("input has {got} dimensions, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("consequent design matrix is not finite")]
    NonFiniteDesign,
    #[error(transparent)]
    Model(#[from] ModelIoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMf {
    pub center: f64,
    pub sigma: f64,
}

impl GaussianMf {
    pub fn new(center: f64, sigma: f64) -> Self {
        GaussianMf {
            center,
            sigma: sigma.max(SIGMA_FLOOR),
        }
    }

    /// Log of the membership degree.
    fn log_degree(&self, x: f64) -> f64 {
        let d = x - self.center;
        -(d * d) / (2.0 * self.sigma * self.sigma)
    }

    pub fn degree(&self, x: f64) -> f64 {
        self.log_degree(x).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsequentKind {
    Constant,
    Linear,
}

impl ConsequentKind {
    pub fn n_coefficients(self, input_dim: usize) -> usize {
        match self {
            ConsequentKind::Constant => 1,
            ConsequentKind::Linear => input_dim + 1,
        }
    }
}

/// Rule output: `coefficients[0]` is the bias, followed by one slope per input
/// for linear consequents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsequentParams {
    pub kind: ConsequentKind,
    pub coefficients: Vec<f64>,
}

impl ConsequentParams {
    pub fn zero(kind: ConsequentKind, input_dim: usize) -> Self {
        ConsequentParams {
            kind,
            coefficients: vec![0.0; kind.n_coefficients(input_dim)],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.kind {
            ConsequentKind::Constant => self.coefficients[0],
            ConsequentKind::Linear => {
                self.coefficients[0]
                    + self.coefficients[1..]
                        .iter()
                        .zip(x)
                        .map(|(a, v)| a * v)
                        .sum::<f64>()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    pub premise: Vec<GaussianMf>,
    pub consequent: ConsequentParams,
}

impl FuzzyRule {
    fn log_strength(&self, x: &[f64]) -> f64 {
        self.premise
            .iter()
            .zip(x)
            .map(|(mf, v)| mf.log_degree(*v))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnfisModel {
    pub rules: Vec<FuzzyRule>,
    pub input_dim: usize,
    /// Input scaler the model was trained behind, if any.
    pub scaler: Option<Scaler>,
}

impl AnfisModel {
    pub fn new(rules: Vec<FuzzyRule>, input_dim: usize) -> Result<Self, AnfisError> {
        let model = AnfisModel {
            rules,
            input_dim,
            scaler: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_scaler(mut self, scaler: Scaler) -> Self {
        self.scaler = Some(scaler);
        self
    }

    fn validate(&self) -> Result<(), AnfisError> {
        let invalid = |msg: String| Err(AnfisError::Model(ModelIoError::Invalid(msg)));
        if self.rules.is_empty() {
            return invalid("model has no rules".into());
        }
        for (i, r) in self.rules.iter().enumerate() {
            if r.premise.len() != self.input_dim {
                return invalid(format!(
                    "rule {i} has {} premise terms for input_dim {}",
                    r.premise.len(),
                    self.input_dim
                ));
            }
            let want = r.consequent.kind.n_coefficients(self.input_dim);
            if r.consequent.coefficients.len() != want {
                return invalid(format!(
                    "rule {i} has {} consequent coefficients, expected {want}",
                    r.consequent.coefficients.len()
                ));
            }
            if r.premise
                .iter()
                .any(|mf| !(mf.sigma >= SIGMA_FLOOR) || !mf.center.is_finite())
            {
                return invalid(format!("rule {i} has an invalid membership function"));
            }
        }
        if let Some(s) = &self.scaler {
            if s.dim() != self.input_dim || s.stds.len() != s.dim() || s.constant.len() != s.dim() {
                return invalid("scaler dimension does not match input_dim".into());
            }
        }
        Ok(())
    }

    pub fn n_rules(&self) -> usize {
        self.rules.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), AnfisError> {
        if x.len() != self.input_dim {
            return Err(AnfisError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Layers 1 to 3: normalized firing strengths. When every rule's firing
    /// strength underflows to zero the weights fall back to uniform.
    pub fn normalized_strengths(&self, x: &[f64]) -> Result<Vec<f64>, AnfisError> {
        self.check_dim(x)?;
        Ok(self.normalized_unchecked(x))
    }

    fn normalized_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut w: Vec<f64> = self.rules.iter().map(|r| r.log_strength(x).exp()).collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 && total.is_finite() {
            w.iter_mut().for_each(|v| *v /= total);
        } else {
            let u = 1.0 / w.len() as f64;
            w.iter_mut().for_each(|v| *v = u);
        }
        w
    }

    /// Prediction for an already standardized input.
    pub fn predict(&self, x: &[f64]) -> Result<f64, AnfisError> {
        self.check_dim(x)?;
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.normalized_unchecked(x)
            .iter()
            .zip(&self.rules)
            .map(|(wn, r)| wn * r.consequent.eval(x))
            .sum()
    }

    /// Prediction for a raw input, standardized through the attached scaler.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64, AnfisError> {
        match &self.scaler {
            Some(s) => {
                self.check_dim(x)?;
                self.predict(&s.transform_row(x))
            }
            None => self.predict(x),
        }
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<f64>, AnfisError> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }

    pub fn mse(&self, x: &Matrix, y: &[f64]) -> Result<f64, AnfisError> {
        let pred = self.predict_batch(x)?;
        Ok(pred
            .iter()
            .zip(y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / y.len() as f64)
    }

    /// Premise parameters flattened rule by rule, input by input, as
    /// `[center, sigma]` pairs.
    pub fn premise_params(&self) -> Vec<f64> {
        self.rules
            .iter()
            .flat_map(|r| r.premise.iter().flat_map(|mf| [mf.center, mf.sigma]))
            .collect()
    }

    /// Inverse of [`premise_params`](Self::premise_params); sigmas are floored.
    pub fn set_premise_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), 2 * self.n_rules() * self.input_dim);
        let mut it = params.chunks_exact(2);
        for rule in &mut self.rules {
            for mf in &mut rule.premise {
                let pair = it.next().expect("length checked");
                *mf = GaussianMf::new(pair[0], pair[1]);
            }
        }
    }

    /// Analytic gradient of the training MSE with respect to the premise
    /// parameters, holding consequents fixed. Layout matches `premise_params`.
    pub fn premise_gradient(&self, x: &Matrix, y: &[f64]) -> Result<Vec<f64>, AnfisError> {
        if x.cols() != self.input_dim {
            return Err(AnfisError::DimensionMismatch {
                expected: self.input_dim,
                got: x.cols(),
            });
        }
        let d = self.input_dim;
        let n = x.rows();
        let mut grad = vec![0.0; 2 * self.n_rules() * d];
        for (row, &target) in x.iter_rows().zip(y) {
            let w: Vec<f64> = self
                .rules
                .iter()
                .map(|r| r.log_strength(row).exp())
                .collect();
            let total: f64 = w.iter().sum();
            if !(total > 0.0 && total.is_finite()) {
                // Uniform fallback is locally constant in the premises.
                continue;
            }
            let f: Vec<f64> = self.rules.iter().map(|r| r.consequent.eval(row)).collect();
            let yhat: f64 = w.iter().zip(&f).map(|(wi, fi)| wi * fi).sum::<f64>() / total;
            let outer = 2.0 * (yhat - target) / n as f64;
            for (i, rule) in self.rules.iter().enumerate() {
                let dy_dlog = (w[i] / total) * (f[i] - yhat);
                if dy_dlog == 0.0 {
                    continue;
                }
                for (j, mf) in rule.premise.iter().enumerate() {
                    let diff = row[j] - mf.center;
                    let s2 = mf.sigma * mf.sigma;
                    let base = 2 * (i * d + j);
                    grad[base] += outer * dy_dlog * diff / s2;
                    grad[base + 1] += outer * dy_dlog * diff * diff / (s2 * mf.sigma);
                }
            }
        }
        Ok(grad)
    }

    pub fn to_json(&self) -> String {
        model_io::to_document("anfis", self)
    }

    pub fn from_json(text: &str) -> Result<Self, AnfisError> {
        let model: AnfisModel = model_io::from_document("anfis", text)?;
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnfisTrainConfig {
    pub n_rules: usize,
    pub consequent: ConsequentKind,
    pub fcm_fuzzifier: f64,
    pub fcm_tol: f64,
    pub fcm_max_iter: usize,
    pub ridge: f64,
    pub premise_epochs: usize,
    pub premise_lr: f64,
    pub seed: u64,
}

impl Default for AnfisTrainConfig {
    fn default() -> Self {
        AnfisTrainConfig {
            n_rules: 13,
            consequent: ConsequentKind::Linear,
            fcm_fuzzifier: 2.0,
            fcm_tol: 1e-6,
            fcm_max_iter: 300,
            ridge: 1e-4,
            premise_epochs: 50,
            premise_lr: 0.01,
            seed: 0,
        }
    }
}

impl AnfisTrainConfig {
    pub fn validate(&self) -> Result<(), AnfisError> {
        if self.n_rules < 1 {
            return Err(AnfisError::InvalidConfig("n_rules must be >= 1".into()));
        }
        if !(self.fcm_fuzzifier > 1.0) {
            return Err(AnfisError::InvalidConfig("fuzzifier m must be > 1".into()));
        }
        if !(self.ridge >= 0.0) {
            return Err(AnfisError::InvalidConfig(
                "ridge lambda must be >= 0".into(),
            ));
        }
        if !(self.premise_lr > 0.0) && self.premise_epochs > 0 {
            return Err(AnfisError::InvalidConfig("premise_lr must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcmResult {
    pub centers: Matrix,
    pub memberships: Matrix,
    pub iterations: usize,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn fcm_memberships(row: &[f64], centers: &Matrix, m: f64, out: &mut [f64]) {
    let dists: Vec<f64> = (0..centers.rows())
        .map(|i| squared_distance(row, centers.row(i)))
        .collect();
    let zero = dists.iter().filter(|&&d| d == 0.0).count();
    if zero > 0 {
        for (u, d) in out.iter_mut().zip(&dists) {
            *u = if *d == 0.0 { 1.0 / zero as f64 } else { 0.0 };
        }
        return;
    }
    // u_i = 1 / sum_j (d_i / d_j)^(1/(m-1)), evaluated relative to the
    // nearest center to stay in range.
    let exponent = 1.0 / (m - 1.0);
    let d_min = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let inv: Vec<f64> = dists.iter().map(|d| (d_min / d).powf(exponent)).collect();
    let total: f64 = inv.iter().sum();
    for (u, v) in out.iter_mut().zip(&inv) {
        *u = v / total;
    }
}

/// Fuzzy c-means. Initial centers are `c` distinct rows picked by a seeded
/// shuffle; iteration stops once no center moves by `tol` or more.
pub fn fcm_cluster(
    x: &Matrix,
    c: usize,
    m: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<FcmResult, AnfisError> {
    let (n, d) = (x.rows(), x.cols());
    if c < 1 || c > n {
        return Err(AnfisError::TooFewSamples {
            needed: c.max(1),
            got: n,
        });
    }
    if !(m > 1.0) {
        return Err(AnfisError::InvalidConfig("fuzzifier m must be > 1".into()));
    }
    if c > 1 && x.iter_rows().all(|r| r == x.row(0)) {
        return Err(AnfisError::SingularClustering(n));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::tag::FCM]));
    let mut picked: Vec<usize> = Vec::with_capacity(c);
    for &i in &order {
        if picked.len() == c {
            break;
        }
        if picked.iter().all(|&p| x.row(p) != x.row(i)) {
            picked.push(i);
        }
    }
    for &i in &order {
        if picked.len() == c {
            break;
        }
        if !picked.contains(&i) {
            picked.push(i);
        }
    }
    let mut centers = x.select_rows(&picked);
    let mut memberships = Matrix::zeros(n, c);
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        for k in 0..n {
            let (row, out) = (x.row(k), memberships.row_mut(k));
            fcm_memberships(row, &centers, m, out);
        }
        let mut next = Matrix::zeros(c, d);
        let mut shift: f64 = 0.0;
        for i in 0..c {
            let mut weight = 0.0;
            let mut acc = vec![0.0; d];
            for k in 0..n {
                let w = memberships.get(k, i).powf(m);
                weight += w;
                for (a, v) in acc.iter_mut().zip(x.row(k)) {
                    *a += w * v;
                }
            }
            let new_center: Vec<f64> = if weight > 0.0 {
                acc.iter().map(|a| a / weight).collect()
            } else {
                centers.row(i).to_vec()
            };
            shift = shift.max(squared_distance(&new_center, centers.row(i)).sqrt());
            next.row_mut(i).copy_from_slice(&new_center);
        }
        centers = next;
        if shift < tol {
            break;
        }
    }
    for k in 0..n {
        let (row, out) = (x.row(k), memberships.row_mut(k));
        fcm_memberships(row, &centers, m, out);
    }
    Ok(FcmResult {
        centers,
        memberships,
        iterations,
    })
}

fn design_matrix(model: &AnfisModel, x: &Matrix, kind: ConsequentKind) -> Matrix {
    let d = model.input_dim;
    let per_rule = kind.n_coefficients(d);
    let q = per_rule * model.n_rules();
    let mut design = Matrix::zeros(x.rows(), q);
    for (k, row) in x.iter_rows().enumerate() {
        let wn = model.normalized_unchecked(row);
        let out = design.row_mut(k);
        for (i, w) in wn.iter().enumerate() {
            let base = i * per_rule;
            out[base] = *w;
            if kind == ConsequentKind::Linear {
                for j in 0..d {
                    out[base + 1 + j] = w * row[j];
                }
            }
        }
    }
    design
}

/// Least-squares consequents (ridge-regularized) for fixed premises.
pub fn anfis_fit_consequents(
    model: &AnfisModel,
    x: &Matrix,
    y: &[f64],
    ridge: f64,
) -> Result<AnfisModel, AnfisError> {
    if x.cols() != model.input_dim {
        return Err(AnfisError::DimensionMismatch {
            expected: model.input_dim,
            got: x.cols(),
        });
    }
    if x.rows() == 0 {
        return Err(AnfisError::TooFewSamples { needed: 1, got: 0 });
    }
    let kind = model.rules[0].consequent.kind;
    let design = design_matrix(model, x, kind);
    let coef = ridge_solve(&design, y, ridge).ok_or(AnfisError::NonFiniteDesign)?;
    let per_rule = kind.n_coefficients(model.input_dim);
    let mut fitted = model.clone();
    for (rule, chunk) in fitted.rules.iter_mut().zip(coef.chunks_exact(per_rule)) {
        rule.consequent = ConsequentParams {
            kind,
            coefficients: chunk.to_vec(),
        };
    }
    Ok(fitted)
}

/// Gradient refinement of centers and sigmas with consequents re-solved after
/// every step. A step is only accepted if the training MSE does not rise; on
/// rejection the rate is halved, at most ten times per epoch, and refinement
/// ends early when no step is accepted.
///
/// The gradient is taken on MSE divided by the target variance so `lr` does
/// not depend on the units of `y`.
pub fn anfis_refine_premise(
    model: &AnfisModel,
    x: &Matrix,
    y: &[f64],
    epochs: usize,
    lr: f64,
    ridge: f64,
) -> Result<AnfisModel, AnfisError> {
    let mut current = model.clone();
    if epochs == 0 {
        return Ok(current);
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = if var > 0.0 { 1.0 / var } else { 1.0 };
    let mut current_mse = current.mse(x, y)?;

    for _ in 0..epochs {
        let grad = current.premise_gradient(x, y)?;
        if grad.iter().all(|g| *g == 0.0) {
            break;
        }
        let base = current.premise_params();
        let mut step = lr;
        let mut accepted = false;
        for _ in 0..=10 {
            let proposal: Vec<f64> = base
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - step * scale * g)
                .collect();
            let mut candidate = current.clone();
            candidate.set_premise_params(&proposal);
            if let Ok(candidate) = anfis_fit_consequents(&candidate, x, y, ridge) {
                let mse = candidate.mse(x, y)?;
                if mse <= current_mse {
                    current = candidate;
                    current_mse = mse;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(current)
}

/// Full pipeline: FCM, premise initialization, consequent fit, refinement.
pub fn anfis_train(
    x: &Matrix,
    y: &[f64],
    cfg: &AnfisTrainConfig,
) -> Result<AnfisModel, AnfisError> {
    cfg.validate()?;
    if x.rows() < cfg.n_rules {
        return Err(AnfisError::TooFewSamples {
            needed: cfg.n_rules,
            got: x.rows(),
        });
    }
    let d = x.cols();
    let fcm = fcm_cluster(
        x,
        cfg.n_rules,
        cfg.fcm_fuzzifier,
        cfg.fcm_tol,
        cfg.fcm_max_iter,
        cfg.seed,
    )?;
    let rules = (0..cfg.n_rules)
        .map(|i| {
            let center = fcm.centers.row(i);
            let mut weight = 0.0;
            let mut spread = vec![0.0; d];
            for (k, row) in x.iter_rows().enumerate() {
                let w = fcm.memberships.get(k, i).powf(cfg.fcm_fuzzifier);
                weight += w;
                for j in 0..d {
                    spread[j] += w * (row[j] - center[j]).powi(2);
                }
            }
            let premise = (0..d)
                .map(|j| {
                    let sigma = if weight > 0.0 {
                        (spread[j] / weight).sqrt()
                    } else {
                        0.0
                    };
                    GaussianMf::new(center[j], sigma)
                })
                .collect();
            FuzzyRule {
                premise,
                consequent: ConsequentParams::zero(cfg.consequent, d),
            }
        })
        .collect();
    let model = AnfisModel::new(rules, d)?;
    // Consequents are fit to the z-scored target so `ridge` does not depend
    // on the units of y. Normalized strengths sum to one, so the affine map
    // back folds into every rule's coefficients.
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let std = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let std = if std > 1e-12 * mean.abs().max(1.0) {
        std
    } else {
        1.0
    };
    let z: Vec<f64> = y.iter().map(|v| (v - mean) / std).collect();
    let model = anfis_fit_consequents(&model, x, &z, cfg.ridge)?;
    let mut model =
        anfis_refine_premise(&model, x, &z, cfg.premise_epochs, cfg.premise_lr, cfg.ridge)?;
    for rule in &mut model.rules {
        let c = &mut rule.consequent.coefficients;
        c.iter_mut().for_each(|v| *v *= std);
        c[0] += mean;
    }
    Ok(model)
}
