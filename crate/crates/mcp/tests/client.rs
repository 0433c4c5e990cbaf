mod support;

use serde_json::json;
use support::server;
use tlens_mcp::{ClientError, McpClient, StdioTransport, CONSISTENCY, METRICS, PREDICT, PROTOCOL_VERSION};

fn client() -> McpClient {
    McpClient::connect(StdioTransport::in_process(server()).unwrap()).unwrap()
}

#[test]
fn handshake_lists_tools_and_counts_requests() {
    let c = client();
    let names: Vec<_> = c.tools().iter().map(|t| t.name.as_str()).collect();
    assert_eq!(names, [PREDICT, CONSISTENCY, METRICS]);
    assert_eq!(c.server_info()["name"], "hr-mcp");
    assert_eq!(c.requests_sent(), 2);
    assert_eq!(PROTOCOL_VERSION, "2024-11-05");
}

#[test]
fn unlisted_tool_is_rejected_locally() {
    let mut c = client();
    let before = c.requests_sent();
    assert!(matches!(
        c.call_tool("delete_everything", json!({})),
        Err(ClientError::UnknownTool(_))
    ));
    assert_eq!(c.requests_sent(), before);
}

#[test]
fn observations_render_results_and_errors() {
    let mut c = client();
    let ok = c.observe(METRICS, json!({"ai": 0.0, "belief": 1.0, "diss": 1.0}));
    assert_eq!(
        ok,
        r#"{"trustworthiness": 1.000000, "impact": 1.000000, "openness": 0.500000}"#
    );
    let bad = c.observe(METRICS, json!({"ai": 2.0, "belief": 1.0, "diss": 1.0}));
    assert!(bad.starts_with("ERROR: -32602 "), "{bad}");
    let missing = c.observe(PREDICT, json!({}));
    assert!(missing.starts_with("ERROR: -32602 "), "{missing}");
    assert!(c.observe("nope", json!({})).starts_with("ERROR: "));
    assert_eq!(c.requests_sent(), 5);
}

#[test]
fn raw_requests_return_rpc_errors() {
    let mut c = client();
    let err = c.request("resources/list", None).unwrap().unwrap_err();
    assert_eq!(err.code, -32601);
    assert_eq!(c.request("ping", None).unwrap().unwrap(), json!({}));
}
