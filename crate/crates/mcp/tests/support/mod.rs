//! Shared fixtures: a seeded desk-scale model and transcript helpers.

#![allow(dead_code)]

use std::sync::Arc;

use serde_json::{json, Value};
use tlens_core::encoders::Vocabulary;
use tlens_core::model::{HrModel, HrModelConfig};
use tlens_mcp::McpServer;

pub const POST_TEXT: &str = "Breaking: storm floods the harbor district, residents urged to share this warning";

pub fn model() -> Arc<HrModel> {
    let cfg = HrModelConfig::desk();
    let vocab = Vocabulary::build(
        [
            POST_TEXT,
            "verify your bank account now to avoid suspension",
            "sunset photos from the mountain trail",
        ],
        cfg.encoder.vocab_size,
    );
    Arc::new(HrModel::new(cfg, vocab, 2024).unwrap())
}

pub fn server() -> McpServer {
    McpServer::new(model())
}

/// Base64 of a small PNG gradient.
pub fn png_b64() -> String {
    use base64::Engine;
    let mut png = Vec::new();
    let img = image::RgbImage::from_fn(12, 12, |x, y| image::Rgb([(x * 20) as u8, (y * 20) as u8, 128]));
    img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
        .unwrap();
    base64::engine::general_purpose::STANDARD.encode(png)
}

/// initialize, tools/list and one call of each tool.
pub fn golden_requests() -> Vec<Value> {
    vec![
        json!({"jsonrpc": "2.0", "id": 1, "method": "initialize", "params": {
            "protocolVersion": "2024-11-05", "capabilities": {},
            "clientInfo": {"name": "golden", "version": "0"}}}),
        json!({"jsonrpc": "2.0", "method": "notifications/initialized"}),
        json!({"jsonrpc": "2.0", "id": 2, "method": "tools/list"}),
        json!({"jsonrpc": "2.0", "id": 3, "method": "tools/call", "params": {
            "name": "predict_human_response", "arguments": {"text": POST_TEXT}}}),
        json!({"jsonrpc": "2.0", "id": 4, "method": "tools/call", "params": {
            "name": "assess_consistency", "arguments": {"text": POST_TEXT, "image_b64": png_b64()}}}),
        json!({"jsonrpc": "2.0", "id": 5, "method": "tools/call", "params": {
            "name": "derive_metrics", "arguments": {"ai_likelihood": 0.9, "belief": 0.5, "dissemination": 0.65}}}),
    ]
}

/// Replaces every response id with its position so transcripts compare
/// independently of the id scheme.
pub fn normalize_ids(lines: &[String]) -> Vec<String> {
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            if v.get("id").is_some_and(|id| !id.is_null()) {
                v["id"] = json!(format!("#{i}"));
            }
            v.to_string()
        })
        .collect()
}

pub fn parse_scores(text: &str) -> serde_json::Map<String, Value> {
    serde_json::from_str::<Value>(text)
        .unwrap()
        .as_object()
        .unwrap()
        .clone()
}
