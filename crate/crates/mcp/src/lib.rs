//! HR-MCP: the human-response model exposed as MCP tools over JSON-RPC 2.0,
//! with stdio and SSE transports and a matching client.

pub mod client;
pub mod protocol;
pub mod server;
pub mod sse;
pub mod stdio;
pub mod tools;

pub use client::{ClientError, McpClient, SseTransport, StdioTransport, Transport};
pub use protocol::{RpcError, PROTOCOL_VERSION};
pub use server::McpServer;
pub use sse::{serve_sse, spawn_sse_background, SseConfig, SseHandle};
pub use stdio::{serve_stdio, DEFAULT_MAX_LINE_BYTES};
pub use tools::{ToolDescriptor, CONSISTENCY, METRICS, PREDICT};
