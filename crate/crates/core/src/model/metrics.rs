use serde::{Deserialize, Serialize};

use super::ModelError;

/// Trustworthiness, impact and openness, each range-normalized to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceptivityMetrics {
    pub trustworthiness: f64,
    pub impact: f64,
    pub openness: f64,
}

/// Maps the three predicted attributes to the receptivity metrics.
///
/// * trustworthiness = (belief − ai + 1) / 2
/// * impact = (belief + dissemination) / 2
/// * openness = (ai + 1) × impact / 2
pub fn derive_receptivity_metrics(
    ai_likelihood: f64,
    belief: f64,
    dissemination: f64,
) -> Result<ReceptivityMetrics, ModelError> {
    for (name, v) in [
        ("ai_likelihood", ai_likelihood),
        ("belief", belief),
        ("dissemination", dissemination),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(ModelError::Domain(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    let impact = (belief + dissemination) / 2.0;
    Ok(ReceptivityMetrics {
        trustworthiness: (belief - ai_likelihood + 1.0) / 2.0,
        impact,
        openness: (ai_likelihood + 1.0) * impact / 2.0,
    })
}

/// Predicted response of a viewer population to one post.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanResponse {
    pub ai_likelihood: f64,
    pub belief: f64,
    pub dissemination: f64,
    pub trustworthiness: f64,
    pub impact: f64,
    pub openness: f64,
    pub sentiment_consistency: f64,
}

impl HumanResponse {
    pub fn from_attributes(
        ai_likelihood: f64,
        belief: f64,
        dissemination: f64,
        sentiment_consistency: f64,
    ) -> Result<Self, ModelError> {
        let m = derive_receptivity_metrics(ai_likelihood, belief, dissemination)?;
        Ok(Self {
            ai_likelihood,
            belief,
            dissemination,
            trustworthiness: m.trustworthiness,
            impact: m.impact,
            openness: m.openness,
            sentiment_consistency,
        })
    }

    /// The six attributes in reporting order.
    pub fn attributes(&self) -> [(&'static str, f64); 6] {
        [
            ("ai_likelihood", self.ai_likelihood),
            ("belief", self.belief),
            ("dissemination", self.dissemination),
            ("trustworthiness", self.trustworthiness),
            ("impact", self.impact),
            ("openness", self.openness),
        ]
    }
}
