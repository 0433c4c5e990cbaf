//! The three HR-MCP tools.

use std::path::Path;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tlens_core::dataset::{decode_image, preprocess_image};
use tlens_core::encoders::ImageInput;
use tlens_core::model::{derive_receptivity_metrics, HrModel};

use crate::protocol::RpcError;

pub const PREDICT: &str = "predict_human_response";
pub const CONSISTENCY: &str = "assess_consistency";
pub const METRICS: &str = "derive_metrics";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    #[serde(rename = "inputSchema")]
    pub input_schema: Value,
}

fn post_schema() -> Value {
    json!({
        "type": "object",
        "properties": {
            "text": { "type": "string", "description": "Post text." },
            "image_b64": { "type": ["string", "null"], "description": "Base64 PNG or JPEG; wins over image_path." },
            "image_path": { "type": ["string", "null"], "description": "Image file readable by the server." },
        },
        "required": ["text"],
        "additionalProperties": false,
    })
}

pub fn descriptors() -> Vec<ToolDescriptor> {
    let unit = |d: &str| json!({ "type": "number", "minimum": 0, "maximum": 1, "description": d });
    vec![
        ToolDescriptor {
            name: PREDICT.into(),
            description: "Predict how people respond to a post: AI-generated likelihood, belief, \
                          dissemination, and the derived trustworthiness, impact and openness, \
                          each in [0, 1]."
                .into(),
            input_schema: post_schema(),
        },
        ToolDescriptor {
            name: CONSISTENCY.into(),
            description: "Score text-image sentiment consistency of a post in [0, 1].".into(),
            input_schema: post_schema(),
        },
        ToolDescriptor {
            name: METRICS.into(),
            description: "Compute trustworthiness, impact and openness from AI-generated \
                          likelihood, belief and dissemination."
                .into(),
            input_schema: json!({
                "type": "object",
                "properties": {
                    "ai_likelihood": unit("AI-generated likelihood."),
                    "belief": unit("Belief likelihood."),
                    "dissemination": unit("Dissemination propensity."),
                },
                "required": ["ai_likelihood", "belief", "dissemination"],
                "additionalProperties": false,
            }),
        },
    ]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PostArgs {
    text: String,
    #[serde(default)]
    image_b64: Option<String>,
    #[serde(default)]
    image_path: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricArgs {
    #[serde(alias = "ai")]
    ai_likelihood: f64,
    belief: f64,
    #[serde(alias = "diss")]
    dissemination: f64,
}

fn parse<T: serde::de::DeserializeOwned>(args: &Value) -> Result<T, RpcError> {
    T::deserialize(args).map_err(RpcError::invalid_params)
}

fn load_image(model: &HrModel, args: &PostArgs) -> Result<Option<ImageInput>, RpcError> {
    let cfg = &model.config().encoder;
    if let Some(b64) = &args.image_b64 {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(b64.trim())
            .map_err(|e| RpcError::invalid_params(format!("image_b64: {e}")))?;
        return decode_image(&bytes, cfg)
            .map(Some)
            .map_err(|e| RpcError::invalid_params(format!("image_b64: {e}")));
    }
    match &args.image_path {
        Some(p) => preprocess_image(Path::new(p), cfg)
            .map(Some)
            .map_err(|e| RpcError::invalid_params(format!("image_path: {e}"))),
        None => Ok(None),
    }
}

/// `{"k": v, ...}` with every value printed to six decimals.
pub fn format_scores(pairs: &[(&str, f64)]) -> String {
    let body: Vec<String> = pairs.iter().map(|(k, v)| format!("\"{k}\": {v:.6}")).collect();
    format!("{{{}}}", body.join(", "))
}

/// Runs a tool and returns the text of its single content item.
pub fn call(model: &HrModel, name: &str, args: &Value) -> Result<String, RpcError> {
    match name {
        PREDICT => {
            let a: PostArgs = parse(args)?;
            let image = load_image(model, &a)?;
            let r = model.predict(&a.text, image.as_ref()).map_err(RpcError::internal)?;
            Ok(format_scores(&r.attributes()))
        }
        CONSISTENCY => {
            let a: PostArgs = parse(args)?;
            let image = load_image(model, &a)?;
            let r = model.predict(&a.text, image.as_ref()).map_err(RpcError::internal)?;
            Ok(format_scores(&[("sentiment_consistency", r.sentiment_consistency)]))
        }
        METRICS => {
            let a: MetricArgs = parse(args)?;
            let m = derive_receptivity_metrics(a.ai_likelihood, a.belief, a.dissemination)
                .map_err(RpcError::invalid_params)?;
            Ok(format_scores(&[
                ("trustworthiness", m.trustworthiness),
                ("impact", m.impact),
                ("openness", m.openness),
            ]))
        }
        other => Err(RpcError::invalid_params(format!("unknown tool {other:?}"))),
    }
}
