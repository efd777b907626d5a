//! Single-hidden-layer tanh network with a linear output unit.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Matrix, Scaler};
use crate::model_io::{self, ModelIoError};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum AnnError {
    #[error("invalid ANN configuration: {0}")]
    InvalidConfig(String),
    #[error("input has {got} dimensions, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty training batch")]
    EmptyBatch,
    #[error("training diverged: non-finite loss at epoch {0}")]
    Diverged(usize),
    #[error(transparent)]
    Model(#[from] ModelIoError),
}

/// `w1` is hidden x input, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnModel {
    pub input_dim: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub scaler: Option<Scaler>,
}

/// Gradient with the same shape as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnGradient {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl AnnGradient {
    fn zeros(d: usize, h: usize) -> Self {
        AnnGradient {
            w1: vec![0.0; h * d],
            b1: vec![0.0; h],
            w2: vec![0.0; h],
            b2: 0.0,
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.w1.len() + 2 * self.b1.len() + 1);
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn norm(&self) -> f64 {
        self.flatten().iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Uniform weights in +-1/sqrt(fan_in), zero biases.
pub fn ann_init(d: usize, h: usize, seed: u64) -> AnnModel {
    ann_init_scaled(d, h, seed, 1.0)
}

fn ann_init_scaled(d: usize, h: usize, seed: u64, scale: f64) -> AnnModel {
    assert!(
        d >= 1 && h >= 1,
        "network needs at least one input and one hidden unit"
    );
    let mut rng = rng::stream(seed, &[rng::tag::ANN_INIT]);
    let a1 = scale / (d as f64).sqrt();
    let a2 = scale / (h as f64).sqrt();
    let w1 = (0..h * d).map(|_| rng.gen_range(-a1..=a1)).collect();
    let w2 = (0..h).map(|_| rng.gen_range(-a2..=a2)).collect();
    AnnModel {
        input_dim: d,
        hidden: h,
        w1,
        b1: vec![0.0; h],
        w2,
        b2: 0.0,
        scaler: None,
    }
}

impl AnnModel {
    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn with_scaler(mut self, scaler: Scaler) -> Self {
        self.scaler = Some(scaler);
        self
    }

    fn check_dim(&self, got: usize) -> Result<(), AnnError> {
        if got != self.input_dim {
            return Err(AnnError::DimensionMismatch {
                expected: self.input_dim,
                got,
            });
        }
        Ok(())
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        let d = self.input_dim;
        (0..self.hidden)
            .map(|k| {
                let z: f64 = self.w1[k * d..(k + 1) * d]
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
                    + self.b1[k];
                z.tanh()
            })
            .collect()
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.hidden_activations(x)
            .iter()
            .zip(&self.w2)
            .map(|(a, w)| a * w)
            .sum::<f64>()
            + self.b2
    }

    /// Prediction for an already standardized input.
    pub fn predict(&self, x: &[f64]) -> Result<f64, AnnError> {
        self.check_dim(x.len())?;
        Ok(self.predict_unchecked(x))
    }

    pub fn predict_raw(&self, x: &[f64]) -> Result<f64, AnnError> {
        match &self.scaler {
            Some(s) => {
                self.check_dim(x.len())?;
                self.predict(&s.transform_row(x))
            }
            None => self.predict(x),
        }
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<f64>, AnnError> {
        self.check_dim(x.cols())?;
        Ok(x.iter_rows().map(|r| self.predict_unchecked(r)).collect())
    }

    pub fn mse(&self, x: &Matrix, y: &[f64]) -> Result<f64, AnnError> {
        let p = self.predict_batch(x)?;
        Ok(p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
    }

    pub fn params(&self) -> Vec<f64> {
        AnnGradient {
            w1: self.w1.clone(),
            b1: self.b1.clone(),
            w2: self.w2.clone(),
            b2: self.b2,
        }
        .flatten()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let (h, d) = (self.hidden, self.input_dim);
        self.w1.copy_from_slice(&p[..h * d]);
        self.b1.copy_from_slice(&p[h * d..h * d + h]);
        self.w2.copy_from_slice(&p[h * d + h..h * d + 2 * h]);
        self.b2 = p[h * d + 2 * h];
    }

    pub fn to_json(&self) -> String {
        model_io::to_document("ann", self)
    }

    pub fn from_json(text: &str) -> Result<Self, AnnError> {
        let m: AnnModel = model_io::from_document("ann", text)?;
        let (h, d) = (m.hidden, m.input_dim);
        let consistent = h >= 1
            && d >= 1
            && m.w1.len() == h * d
            && m.b1.len() == h
            && m.w2.len() == h
            && m.scaler.as_ref().is_none_or(|s| s.dim() == d);
        if !consistent {
            return Err(
                ModelIoError::Invalid("parameter shapes do not match dimensions".into()).into(),
            );
        }
        if m.params().iter().any(|v| !v.is_finite()) {
            return Err(ModelIoError::Invalid("non-finite parameter".into()).into());
        }
        Ok(m)
    }
}

/// Exact gradient of the batch mean squared error.
pub fn ann_gradient(model: &AnnModel, x: &Matrix, y: &[f64]) -> Result<AnnGradient, AnnError> {
    model.check_dim(x.cols())?;
    if x.rows() == 0 || y.len() != x.rows() {
        return Err(AnnError::EmptyBatch);
    }
    Ok(gradient_and_loss(model, x, y).0)
}

fn gradient_and_loss(model: &AnnModel, x: &Matrix, y: &[f64]) -> (AnnGradient, f64) {
    let (d, h) = (model.input_dim, model.hidden);
    let n = x.rows() as f64;
    let mut g = AnnGradient::zeros(d, h);
    let mut loss = 0.0;
    for (row, &target) in x.iter_rows().zip(y) {
        let a = model.hidden_activations(row);
        let yhat = a.iter().zip(&model.w2).map(|(ai, w)| ai * w).sum::<f64>() + model.b2;
        let err = yhat - target;
        loss += err * err;
        let dy = 2.0 * err / n;
        g.b2 += dy;
        for (k, &ak) in a.iter().enumerate() {
            g.w2[k] += dy * ak;
            let delta = dy * model.w2[k] * (1.0 - ak * ak);
            g.b1[k] += delta;
            for (gw, v) in g.w1[k * d..(k + 1) * d].iter_mut().zip(row) {
                *gw += delta * v;
            }
        }
    }
    (g, loss / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Multiplier on the +-1/sqrt(fan_in) initialization bound.
    pub init_scale: f64,
    pub seed: u64,
    pub plateau_patience: usize,
    pub plateau_tol: f64,
}

impl Default for AnnTrainConfig {
    fn default() -> Self {
        AnnTrainConfig {
            epochs: 2000,
            learning_rate: 0.01,
            momentum: 0.9,
            init_scale: 1.0,
            seed: 0,
            plateau_patience: 200,
            plateau_tol: 1e-9,
        }
    }
}

/// Full-batch momentum gradient descent.
///
/// The network is trained against a z-scored copy of the target and the
/// output layer is then rescaled back into target units, so the learning
/// rate does not depend on the scale of `y`. The parameters with the lowest
/// observed training error are returned.
pub fn ann_train(
    x: &Matrix,
    y: &[f64],
    hidden: usize,
    cfg: &AnnTrainConfig,
) -> Result<AnnModel, AnnError> {
    if x.rows() == 0 || y.len() != x.rows() {
        return Err(AnnError::EmptyBatch);
    }
    if hidden == 0 || x.cols() == 0 {
        return Err(AnnError::InvalidConfig(
            "need at least one input and hidden unit".into(),
        ));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(AnnError::InvalidConfig("learning_rate must be > 0".into()));
    }
    if !(0.0..1.0).contains(&cfg.momentum) {
        return Err(AnnError::InvalidConfig("momentum must be in [0, 1)".into()));
    }
    let init = ann_init_scaled(x.cols(), hidden, cfg.seed, cfg.init_scale);
    if cfg.epochs == 0 {
        return Ok(init);
    }

    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let yz: Vec<f64> = y.iter().map(|v| (v - mean) / sd).collect();

    let mut model = init.clone();
    let mut params = model.params();
    let mut velocity = vec![0.0; params.len()];
    let mut best_params = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut last_improvement = 0;

    for epoch in 0..=cfg.epochs {
        let (grad, loss) = gradient_and_loss(&model, x, &yz);
        if !loss.is_finite() {
            return Err(AnnError::Diverged(epoch));
        }
        if loss < best_loss {
            if best_loss - loss > cfg.plateau_tol * best_loss.min(f64::MAX) {
                last_improvement = epoch;
            }
            best_loss = loss;
            best_params.copy_from_slice(&params);
        }
        if epoch == cfg.epochs || epoch - last_improvement >= cfg.plateau_patience {
            break;
        }
        for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(grad.flatten()) {
            *v = cfg.momentum * *v - cfg.learning_rate * g;
            *p += *v;
        }
        model.set_params(&params);
    }

    model.set_params(&best_params);
    model.w2.iter_mut().for_each(|w| *w *= sd);
    model.b2 = model.b2 * sd + mean;
    if init.mse(x, y)? < model.mse(x, y)? {
        return Ok(init);
    }
    Ok(model)
}
