use serde::Serialize;

use super::InverseModel;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Largest relative efficiency error counted as an accurate prediction (exclusive).
pub const ACCEPTABLE_RESIDUAL: f64 = 0.05;

/// Relative efficiency error `(truth - predicted) / truth`.
pub fn residual(eta_truth: f64, eta_pred: f64) -> f64 {
    (eta_truth - eta_pred) / eta_truth
}

/// Fraction of residuals strictly inside the acceptable band.
pub fn accuracy(residuals: &[f64]) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    let hits = residuals
        .iter()
        .filter(|r| r.abs() < ACCEPTABLE_RESIDUAL)
        .count();
    hits as f64 / residuals.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub residuals: Vec<f64>,
    pub accuracy: f64,
    pub mean_residual: f64,
}

/// Scores a model's efficiency prediction on every test record with positive truth.
pub fn evaluate_model<M: InverseModel + ?Sized>(model: &M, test: &Dataset) -> Result<EvalReport> {
    let residuals: Vec<f64> = test
        .records
        .iter()
        .filter(|r| r.efficiency > 0.0)
        .map(|r| residual(r.efficiency, model.predict(&r.requirement).efficiency()))
        .collect();
    if residuals.is_empty() {
        return Err(Error::Evaluation("test set has no scorable records".into()));
    }
    let mean_residual = residuals.iter().sum::<f64>() / residuals.len() as f64;
    Ok(EvalReport {
        accuracy: accuracy(&residuals),
        mean_residual,
        residuals,
    })
}
