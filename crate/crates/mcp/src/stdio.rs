//! Newline-delimited JSON-RPC over byte streams.

use std::io::{self, BufRead, Write};

use serde_json::Value;

use crate::protocol::{failure, RpcError};
use crate::server::McpServer;

pub const DEFAULT_MAX_LINE_BYTES: usize = 4 << 20;

enum Line {
    Eof,
    Complete,
    TooLong,
}

/// Reads up to and including the next `\n` into `buf`, keeping at most
/// `max` bytes. The rest of an oversized line is consumed and discarded.
fn read_line_limited(r: &mut impl BufRead, buf: &mut Vec<u8>, max: usize) -> io::Result<Line> {
    buf.clear();
    let mut overflow = false;
    let mut seen_any = false;
    loop {
        let chunk = match r.fill_buf() {
            Ok(c) => c,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        if chunk.is_empty() {
            return Ok(match (seen_any, overflow) {
                (false, _) => Line::Eof,
                (true, true) => Line::TooLong,
                (true, false) => Line::Complete,
            });
        }
        seen_any = true;
        let (used, done) = match chunk.iter().position(|&b| b == b'\n') {
            Some(i) => (i + 1, true),
            None => (chunk.len(), false),
        };
        let content = &chunk[..if done { used - 1 } else { used }];
        if !overflow {
            if buf.len() + content.len() > max {
                overflow = true;
                buf.clear();
            } else {
                buf.extend_from_slice(content);
            }
        }
        r.consume(used);
        if done {
            return Ok(if overflow { Line::TooLong } else { Line::Complete });
        }
    }
}

/// Serves requests until `input` reaches end of stream. Only protocol
/// messages are written to `output`.
pub fn serve_stdio(
    server: &McpServer,
    mut input: impl BufRead,
    mut output: impl Write,
    max_line_bytes: usize,
) -> io::Result<()> {
    let mut buf = Vec::new();
    loop {
        let reply = match read_line_limited(&mut input, &mut buf, max_line_bytes)? {
            Line::Eof => return Ok(()),
            Line::TooLong => {
                log::warn!("dropping line longer than {max_line_bytes} bytes");
                Some(
                    failure(
                        Value::Null,
                        &RpcError::parse(format!("line exceeds {max_line_bytes} bytes")),
                    )
                    .to_string(),
                )
            }
            Line::Complete => {
                if buf.last() == Some(&b'\r') {
                    buf.pop();
                }
                match std::str::from_utf8(&buf) {
                    Ok(s) if s.trim().is_empty() => None,
                    Ok(s) => server.handle_line(s),
                    Err(e) => Some(failure(Value::Null, &RpcError::parse(e)).to_string()),
                }
            }
        };
        if let Some(line) = reply {
            output.write_all(line.as_bytes())?;
            output.write_all(b"\n")?;
            output.flush()?;
        }
    }
}
