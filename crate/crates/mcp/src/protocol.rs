//! JSON-RPC 2.0 envelopes.

use serde_json::{json, Map, Value};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const INTERNAL_ERROR: i64 = -32603;

pub const PROTOCOL_VERSION: &str = "2024-11-05";

#[derive(Debug, Clone, PartialEq)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
}

impl RpcError {
    pub fn new(code: i64, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn parse(detail: impl std::fmt::Display) -> Self {
        Self::new(PARSE_ERROR, format!("Parse error: {detail}"))
    }

    pub fn invalid_request(detail: impl std::fmt::Display) -> Self {
        Self::new(INVALID_REQUEST, format!("Invalid Request: {detail}"))
    }

    pub fn method_not_found(method: &str) -> Self {
        Self::new(METHOD_NOT_FOUND, format!("Method not found: {method}"))
    }

    pub fn invalid_params(detail: impl std::fmt::Display) -> Self {
        Self::new(INVALID_PARAMS, format!("Invalid params: {detail}"))
    }

    pub fn internal(detail: impl std::fmt::Display) -> Self {
        Self::new(INTERNAL_ERROR, format!("Internal error: {detail}"))
    }
}

impl std::fmt::Display for RpcError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.code, self.message)
    }
}

/// A validated incoming request or notification.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    /// `None` for notifications.
    pub id: Option<Value>,
    pub method: String,
    pub params: Option<Value>,
}

impl Request {
    pub fn is_notification(&self) -> bool {
        self.id.is_none()
    }
}

/// What an incoming object turned out to be.
#[derive(Debug, Clone, PartialEq)]
pub enum Incoming {
    Request(Request),
    /// A response addressed to us; the server never issues requests, so
    /// these are dropped.
    Response,
    /// Invalid envelope; reply with this error to the given id (or null).
    Invalid {
        id: Value,
        error: RpcError,
    },
}

fn valid_id(v: &Value) -> bool {
    matches!(v, Value::Null | Value::Number(_) | Value::String(_))
}

pub fn classify(msg: &Value) -> Incoming {
    let Some(obj) = msg.as_object() else {
        return Incoming::Invalid {
            id: Value::Null,
            error: RpcError::invalid_request("message must be an object"),
        };
    };
    let id = obj.get("id").cloned();
    let reply_id = id.clone().filter(valid_id).unwrap_or(Value::Null);
    let invalid = |detail: &str| Incoming::Invalid {
        id: reply_id.clone(),
        error: RpcError::invalid_request(detail),
    };
    if obj.get("jsonrpc") != Some(&Value::String("2.0".into())) {
        return invalid("jsonrpc must be \"2.0\"");
    }
    if id.as_ref().is_some_and(|v| !valid_id(v)) {
        return invalid("id must be a string, number or null");
    }
    match obj.get("method") {
        Some(Value::String(m)) => {
            let params = obj.get("params").cloned();
            if params.as_ref().is_some_and(|p| !p.is_object() && !p.is_array()) {
                return invalid("params must be an object or array");
            }
            Incoming::Request(Request {
                id,
                method: m.clone(),
                params,
            })
        }
        Some(_) => invalid("method must be a string"),
        None if obj.contains_key("result") || obj.contains_key("error") => Incoming::Response,
        None => invalid("missing method"),
    }
}

pub fn success(id: Value, result: Value) -> Value {
    json!({ "jsonrpc": "2.0", "id": id, "result": result })
}

pub fn failure(id: Value, error: &RpcError) -> Value {
    json!({
        "jsonrpc": "2.0",
        "id": id,
        "error": { "code": error.code, "message": error.message },
    })
}

pub fn request(id: Value, method: &str, params: Option<Value>) -> Value {
    let mut obj = Map::new();
    obj.insert("jsonrpc".into(), "2.0".into());
    obj.insert("id".into(), id);
    obj.insert("method".into(), method.into());
    if let Some(p) = params {
        obj.insert("params".into(), p);
    }
    Value::Object(obj)
}

pub fn notification(method: &str, params: Option<Value>) -> Value {
    let mut obj = Map::new();
    obj.insert("jsonrpc".into(), "2.0".into());
    obj.insert("method".into(), method.into());
    if let Some(p) = params {
        obj.insert("params".into(), p);
    }
    Value::Object(obj)
}

/// Checks the shape of a response: `jsonrpc`, `id` and exactly one of
/// `result` or a well-formed `error`.
pub fn is_well_formed_response(v: &Value) -> bool {
    let Some(obj) = v.as_object() else {
        return false;
    };
    let header = obj.get("jsonrpc") == Some(&Value::String("2.0".into())) && obj.get("id").is_some_and(valid_id);
    let body = match (obj.get("result"), obj.get("error")) {
        (Some(_), None) => true,
        (None, Some(Value::Object(e))) => {
            e.get("code").is_some_and(Value::is_i64) && e.get("message").is_some_and(Value::is_string)
        }
        _ => false,
    };
    header && body && obj.len() == 3
}
