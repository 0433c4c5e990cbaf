//! MCP client used by the agent host.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use crate::protocol::{notification, request, RpcError, PROTOCOL_VERSION};
use crate::server::McpServer;
use crate::stdio::{serve_stdio, DEFAULT_MAX_LINE_BYTES};
use crate::tools::ToolDescriptor;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("http: {0}")]
    Http(String),
    #[error("connection closed")]
    Closed,
    #[error("timed out waiting for the server")]
    Timeout,
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("{0}")]
    Rpc(RpcError),
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
    #[error("tool reported an error: {0}")]
    ToolFailed(String),
}

/// One framed JSON-RPC message in each direction.
pub trait Transport: Send {
    fn send(&mut self, message: &str) -> Result<(), ClientError>;
    fn recv(&mut self) -> Result<String, ClientError>;
}

/// Newline-delimited messages over a byte-stream pair.
pub struct StdioTransport {
    writer: Option<Box<dyn Write + Send>>,
    reader: Box<dyn BufRead + Send>,
    child: Option<Child>,
    server: Option<thread::JoinHandle<io::Result<()>>>,
}

impl StdioTransport {
    pub fn new(reader: impl Read + Send + 'static, writer: impl Write + Send + 'static) -> Self {
        Self {
            writer: Some(Box::new(writer)),
            reader: Box::new(BufReader::new(reader)),
            child: None,
            server: None,
        }
    }

    /// Starts `command` with piped stdin/stdout; stderr is inherited.
    pub fn spawn(command: &mut Command) -> Result<Self, ClientError> {
        let mut child = command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().ok_or(ClientError::Closed)?;
        let stdout = child.stdout.take().ok_or(ClientError::Closed)?;
        let mut t = Self::new(stdout, stdin);
        t.child = Some(child);
        Ok(t)
    }

    /// Runs `server` on a thread connected through OS pipes.
    pub fn in_process(server: McpServer) -> Result<Self, ClientError> {
        let (req_r, req_w) = io::pipe()?;
        let (resp_r, resp_w) = io::pipe()?;
        let handle = thread::Builder::new()
            .name("hr-mcp-stdio".into())
            .spawn(move || serve_stdio(&server, BufReader::new(req_r), resp_w, DEFAULT_MAX_LINE_BYTES))?;
        let mut t = Self::new(resp_r, req_w);
        t.server = Some(handle);
        Ok(t)
    }
}

impl Transport for StdioTransport {
    fn send(&mut self, message: &str) -> Result<(), ClientError> {
        let w = self.writer.as_mut().ok_or(ClientError::Closed)?;
        w.write_all(message.as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<String, ClientError> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(ClientError::Closed);
        }
        Ok(line.trim_end_matches(['\n', '\r']).to_string())
    }
}

impl Drop for StdioTransport {
    fn drop(&mut self) {
        // Closing our end is the server's EOF.
        self.writer.take();
        if let Some(h) = self.server.take() {
            let _ = h.join();
        }
        if let Some(mut c) = self.child.take() {
            let _ = c.wait();
        }
    }
}

/// Client side of the SSE transport.
pub struct SseTransport {
    agent: ureq::Agent,
    post_url: String,
    events: mpsc::Receiver<String>,
    timeout: Duration,
    closed: Arc<AtomicBool>,
}

#[derive(Default)]
struct SseEvent {
    name: String,
    data: Vec<String>,
}

impl SseTransport {
    /// Opens `<base>/sse` and waits for the session endpoint.
    pub fn connect(base_url: &str, timeout: Duration) -> Result<Self, ClientError> {
        let base = base_url.trim_end_matches('/').to_string();
        let agent = ureq::Agent::new_with_defaults();
        let response = agent
            .get(&format!("{base}/sse"))
            .call()
            .map_err(|e| ClientError::Http(e.to_string()))?;
        let reader = BufReader::new(response.into_body().into_reader());
        let (endpoint_tx, endpoint_rx) = mpsc::channel();
        let (tx, events) = mpsc::channel();
        let closed = Arc::new(AtomicBool::new(false));
        let flag = closed.clone();
        thread::Builder::new()
            .name("hr-mcp-sse-client".into())
            .spawn(move || read_events(reader, &flag, endpoint_tx, tx))?;
        let endpoint = endpoint_rx.recv_timeout(timeout).map_err(|_| ClientError::Timeout)?;
        let post_url = if endpoint.starts_with("http") {
            endpoint
        } else {
            format!("{base}{endpoint}")
        };
        Ok(Self {
            agent,
            post_url,
            events,
            timeout,
            closed,
        })
    }

    /// The session's POST endpoint.
    pub fn post_url(&self) -> &str {
        &self.post_url
    }
}

/// Returns, closing the connection, once the stream ends or the transport is
/// dropped; the latter is noticed at the next line, keep-alives included.
fn read_events(
    reader: impl BufRead,
    closed: &AtomicBool,
    endpoint: mpsc::Sender<String>,
    messages: mpsc::Sender<String>,
) {
    let mut ev = SseEvent::default();
    for line in reader.lines() {
        let Ok(line) = line else { return };
        if closed.load(Ordering::Relaxed) {
            return;
        }
        if line.is_empty() {
            let done = std::mem::take(&mut ev);
            let data = done.data.join("\n");
            let delivered = match done.name.as_str() {
                "endpoint" => endpoint.send(data).is_ok(),
                "message" | "" if !done.data.is_empty() => messages.send(data).is_ok(),
                _ => true,
            };
            if !delivered {
                return;
            }
        } else if let Some(v) = line.strip_prefix("event:") {
            ev.name = v.trim_start().to_string();
        } else if let Some(v) = line.strip_prefix("data:") {
            ev.data.push(v.strip_prefix(' ').unwrap_or(v).to_string());
        }
    }
}

impl Drop for SseTransport {
    fn drop(&mut self) {
        self.closed.store(true, Ordering::Relaxed);
    }
}

impl Transport for SseTransport {
    fn send(&mut self, message: &str) -> Result<(), ClientError> {
        self.agent
            .post(&self.post_url)
            .header("content-type", "application/json")
            .send(message)
            .map_err(|e| ClientError::Http(e.to_string()))?;
        Ok(())
    }

    fn recv(&mut self) -> Result<String, ClientError> {
        self.events.recv_timeout(self.timeout).map_err(|e| match e {
            mpsc::RecvTimeoutError::Timeout => ClientError::Timeout,
            mpsc::RecvTimeoutError::Disconnected => ClientError::Closed,
        })
    }
}

/// An initialized session with the tool list already fetched.
pub struct McpClient {
    transport: Box<dyn Transport>,
    next_id: i64,
    tools: Vec<ToolDescriptor>,
    server_info: Value,
    requests_sent: usize,
}

impl McpClient {
    pub fn connect(transport: impl Transport + 'static) -> Result<Self, ClientError> {
        let mut c = Self {
            transport: Box::new(transport),
            next_id: 1,
            tools: Vec::new(),
            server_info: Value::Null,
            requests_sent: 0,
        };
        let init = c
            .request(
                "initialize",
                Some(json!({
                    "protocolVersion": PROTOCOL_VERSION,
                    "capabilities": {},
                    "clientInfo": { "name": "tlens-agent", "version": env!("CARGO_PKG_VERSION") },
                })),
            )?
            .map_err(ClientError::Rpc)?;
        c.server_info = init.get("serverInfo").cloned().unwrap_or(Value::Null);
        c.transport
            .send(&notification("notifications/initialized", None).to_string())?;
        let list = c.request("tools/list", None)?.map_err(ClientError::Rpc)?;
        c.tools = serde_json::from_value(list.get("tools").cloned().unwrap_or(Value::Null))
            .map_err(|e| ClientError::Protocol(format!("tools/list: {e}")))?;
        Ok(c)
    }

    pub fn tools(&self) -> &[ToolDescriptor] {
        &self.tools
    }

    pub fn server_info(&self) -> &Value {
        &self.server_info
    }

    /// Requests written to the transport so far, notifications excluded.
    pub fn requests_sent(&self) -> usize {
        self.requests_sent
    }

    /// Sends one request and waits for the response with the same id.
    pub fn request(&mut self, method: &str, params: Option<Value>) -> Result<Result<Value, RpcError>, ClientError> {
        let id = self.next_id;
        self.next_id += 1;
        self.transport.send(&request(json!(id), method, params).to_string())?;
        self.requests_sent += 1;
        loop {
            let line = self.transport.recv()?;
            let msg: Value =
                serde_json::from_str(&line).map_err(|e| ClientError::Protocol(format!("unparseable message: {e}")))?;
            if msg.get("id") != Some(&json!(id)) {
                log::warn!("ignoring message not addressed to request {id}: {line}");
                continue;
            }
            if let Some(result) = msg.get("result") {
                return Ok(Ok(result.clone()));
            }
            let err = msg
                .get("error")
                .ok_or_else(|| ClientError::Protocol("response without result or error".into()))?;
            return Ok(Err(RpcError::new(
                err.get("code").and_then(Value::as_i64).unwrap_or(0),
                err.get("message").and_then(Value::as_str).unwrap_or_default(),
            )));
        }
    }

    /// Calls a listed tool and returns the text of its first content item.
    /// Unlisted tools are rejected without contacting the server.
    pub fn call_tool(&mut self, name: &str, arguments: Value) -> Result<String, ClientError> {
        if !self.tools.iter().any(|t| t.name == name) {
            return Err(ClientError::UnknownTool(name.to_string()));
        }
        let result = self
            .request("tools/call", Some(json!({ "name": name, "arguments": arguments })))?
            .map_err(ClientError::Rpc)?;
        let text = result
            .pointer("/content/0/text")
            .and_then(Value::as_str)
            .ok_or_else(|| ClientError::Protocol("tool result without text content".into()))?
            .to_string();
        if result.get("isError") == Some(&Value::Bool(true)) {
            return Err(ClientError::ToolFailed(text));
        }
        Ok(text)
    }

    /// [`McpClient::call_tool`] as an observation string; failures read
    /// `ERROR: <code> <message>` for server errors and `ERROR: <detail>`
    /// otherwise.
    pub fn observe(&mut self, name: &str, arguments: Value) -> String {
        match self.call_tool(name, arguments) {
            Ok(text) => text,
            Err(ClientError::Rpc(e)) => format!("ERROR: {} {}", e.code, e.message),
            Err(e) => format!("ERROR: {e}"),
        }
    }
}
