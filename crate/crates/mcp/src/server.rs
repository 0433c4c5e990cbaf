use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use serde_json::{json, Value};
use tlens_core::model::HrModel;

use crate::protocol::{classify, failure, success, Incoming, Request, RpcError, PROTOCOL_VERSION};
use crate::tools;

pub const SERVER_NAME: &str = "hr-mcp";

/// Transport-independent request handling over a shared, read-only model.
#[derive(Clone)]
pub struct McpServer {
    model: Arc<HrModel>,
}

impl McpServer {
    pub fn new(model: Arc<HrModel>) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &HrModel {
        &self.model
    }

    /// Handles one framed message: a single object or a batch. Returns the
    /// serialized reply, or `None` when nothing is owed.
    pub fn handle_line(&self, line: &str) -> Option<String> {
        let reply = match serde_json::from_str::<Value>(line) {
            Ok(msg) => self.handle_message(&msg)?,
            Err(e) => failure(Value::Null, &RpcError::parse(e)),
        };
        Some(reply.to_string())
    }

    pub fn handle_message(&self, msg: &Value) -> Option<Value> {
        match msg {
            Value::Array(items) if items.is_empty() => {
                Some(failure(Value::Null, &RpcError::invalid_request("empty batch")))
            }
            Value::Array(items) => {
                let replies: Vec<Value> = items.iter().filter_map(|m| self.handle_single(m)).collect();
                (!replies.is_empty()).then_some(Value::Array(replies))
            }
            _ => self.handle_single(msg),
        }
    }

    fn handle_single(&self, msg: &Value) -> Option<Value> {
        match classify(msg) {
            Incoming::Response => None,
            Incoming::Invalid { id, error } => Some(failure(id, &error)),
            Incoming::Request(req) => {
                let outcome = catch_unwind(AssertUnwindSafe(|| self.dispatch(&req)))
                    .unwrap_or_else(|_| Err(RpcError::internal("handler panicked")));
                let id = req.id?;
                Some(match outcome {
                    Ok(result) => success(id, result),
                    Err(e) => failure(id, &e),
                })
            }
        }
    }

    fn dispatch(&self, req: &Request) -> Result<Value, RpcError> {
        match req.method.as_str() {
            "initialize" => Ok(json!({
                "protocolVersion": PROTOCOL_VERSION,
                "capabilities": { "tools": { "listChanged": false } },
                "serverInfo": { "name": SERVER_NAME, "version": env!("CARGO_PKG_VERSION") },
            })),
            "notifications/initialized" | "notifications/cancelled" => Ok(Value::Null),
            "ping" => Ok(json!({})),
            "tools/list" => Ok(json!({ "tools": tools::descriptors() })),
            "tools/call" => {
                let params = req
                    .params
                    .as_ref()
                    .and_then(Value::as_object)
                    .ok_or_else(|| RpcError::invalid_params("tools/call needs an object"))?;
                let name = params
                    .get("name")
                    .and_then(Value::as_str)
                    .ok_or_else(|| RpcError::invalid_params("missing tool name"))?;
                let empty = json!({});
                let args = match params.get("arguments") {
                    None | Some(Value::Null) => &empty,
                    Some(a) if a.is_object() => a,
                    Some(_) => return Err(RpcError::invalid_params("arguments must be an object")),
                };
                log::debug!("tools/call {name}");
                let text = tools::call(&self.model, name, args)?;
                Ok(json!({
                    "content": [{ "type": "text", "text": text }],
                    "isError": false,
                }))
            }
            other => Err(RpcError::method_not_found(other)),
        }
    }
}
