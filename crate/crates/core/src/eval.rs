//! Spearman ρ and AUC of predictions on all six response attributes.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::model::{HrModel, HumanResponse};
use crate::stats::{auc, spearman_rho};
use crate::train::{LossPoint, TrainError, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeScore {
    pub attribute: String,
    /// `None` when either side is constant.
    pub spearman_rho: Option<f64>,
    /// `None` when the binarized labels hold a single class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub items: usize,
    pub attributes: Vec<AttributeScore>,
    pub loss_curve: Vec<LossPoint>,
}

impl EvalReport {
    pub fn get(&self, attribute: &str) -> Option<&AttributeScore> {
        self.attributes.iter().find(|a| a.attribute == attribute)
    }
}

/// Eval-mode predictions, in set order.
pub fn predict_set(model: &HrModel, set: &TrainingSet, batch_size: usize) -> Result<Vec<HumanResponse>, TrainError> {
    let mut out = Vec::with_capacity(set.len());
    for chunk in set.inputs.chunks(batch_size.max(1)) {
        out.extend(model.predict_batch(chunk)?);
    }
    Ok(out)
}

/// Scores predictions against the annotated attributes; the three derived
/// metrics are computed from the annotations with the same formulas.
pub fn score(
    predictions: &[HumanResponse],
    targets: &[[f64; 3]],
    loss_curve: Vec<LossPoint>,
) -> Result<EvalReport, TrainError> {
    if predictions.len() != targets.len() {
        return Err(TrainError::Parameter(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let truth = targets
        .iter()
        .map(|&[a, b, d]| HumanResponse::from_attributes(a, b, d, 0.0))
        .collect::<Result<Vec<_>, _>>()?;
    let mut attributes = Vec::with_capacity(6);
    for (k, name) in ATTRIBUTE_NAMES.iter().enumerate() {
        let pred: Vec<f64> = predictions.iter().map(|p| p.attributes()[k].1).collect();
        let gold: Vec<f64> = truth.iter().map(|t| t.attributes()[k].1).collect();
        attributes.push(AttributeScore {
            attribute: name.to_string(),
            spearman_rho: spearman_rho(&pred, &gold).ok(),
            auc: auc(&pred, &gold).ok(),
        });
    }
    Ok(EvalReport {
        items: predictions.len(),
        attributes,
        loss_curve,
    })
}

/// Attribute order of [`HumanResponse::attributes`].
pub const ATTRIBUTE_NAMES: [&str; 6] = [
    "ai_likelihood",
    "belief",
    "dissemination",
    "trustworthiness",
    "impact",
    "openness",
];

pub fn evaluate(model: &HrModel, set: &TrainingSet, loss_curve: Vec<LossPoint>) -> Result<EvalReport, TrainError> {
    let predictions = predict_set(model, set, 64)?;
    score(&predictions, &set.targets, loss_curve)
}

/// `epoch,loss` with a header row.
pub fn write_loss_csv(curve: &[LossPoint], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "epoch,loss")?;
    for p in curve {
        writeln!(w, "{},{}", p.epoch, p.loss)?;
    }
    Ok(())
}

/// Mean absolute error per predicted attribute.
pub fn mean_abs_error(predictions: &[HumanResponse], targets: &[[f64; 3]]) -> [f64; 3] {
    let mut sum = [0.0; 3];
    for (p, t) in predictions.iter().zip(targets) {
        let v = [p.ai_likelihood, p.belief, p.dissemination];
        for k in 0..3 {
            sum[k] += (v[k] - t[k]).abs();
        }
    }
    sum.map(|s| s / predictions.len().max(1) as f64)
}
