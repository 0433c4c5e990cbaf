mod args;
mod commands;
mod stats_cmd;

use std::io::Write;
use std::process::ExitCode;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::Parser;
use serde_json::Value;
use tlens_agent::TraceStatus;

use args::{Cli, Command, Format};

const USAGE_ERROR: u8 = 1;
const RUNTIME_ERROR: u8 = 2;

/// `key: value` lines, nested keys joined with dots.
fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, out);
            }
        }
        Value::Number(n) if n.is_f64() => out.push_str(&format!("{prefix}: {:.6}\n", n.as_f64().unwrap_or(f64::NAN))),
        Value::String(s) => out.push_str(&format!("{prefix}: {s}\n")),
        other => out.push_str(&format!("{prefix}: {other}\n")),
    }
}

fn emit(format: Format, value: &Value) -> Result<()> {
    let text = match format {
        Format::Json => serde_json::to_string_pretty(value)? + "\n",
        Format::Text => {
            let mut s = String::new();
            flatten("", value, &mut s);
            s
        }
    };
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(text.as_bytes())?;
    stdout.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let g = &cli.global;
    let value = match &cli.command {
        Command::Train(a) => commands::train_cmd(g, a)?,
        Command::Eval(a) => commands::eval_cmd(g, a)?,
        Command::Score(a) => commands::score_cmd(g, a)?,
        Command::Stats(c) => stats_cmd::run(c)?,
        Command::Serve(a) => {
            commands::serve_cmd(g, a)?;
            return Ok(ExitCode::SUCCESS);
        }
        Command::Agent(a) => {
            let trace = commands::agent_cmd(g, a)?;
            let text = match g.format {
                Format::Json => trace.to_json() + "\n",
                Format::Text => trace.render_text(),
            };
            std::io::stdout().write_all(text.as_bytes())?;
            if let TraceStatus::Failed { error } = &trace.status {
                log::error!("agent failed: {error}");
                return Ok(ExitCode::from(RUNTIME_ERROR));
            }
            return Ok(ExitCode::SUCCESS);
        }
    };
    emit(g.format, &value)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(USAGE_ERROR),
            };
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.global.log_level)
        .target(env_logger::Target::Stderr)
        .init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) if e.is::<commands::UsageError>() => {
            eprintln!("error: {e}\n\nFor more information, try '--help'.");
            ExitCode::from(USAGE_ERROR)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(RUNTIME_ERROR)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flatten_nests_keys() {
        let mut s = String::new();
        flatten("", &json!({"a": {"b": 0.5, "c": [1, "x"]}, "d": null}), &mut s);
        assert_eq!(s, "a.b: 0.500000\na.c[0]: 1\na.c[1]: x\nd: null\n");
    }

    #[test]
    fn unknown_flags_are_rejected() {
        assert!(Cli::try_parse_from(["tlens", "score", "--text", "x", "--bogus"]).is_err());
        assert!(Cli::try_parse_from(["tlens", "stats", "dprime"]).is_err());
        assert!(Cli::try_parse_from(["tlens", "stats", "dprime", "--hits", "9"]).is_err());
        assert!(Cli::try_parse_from([
            "tlens", "stats", "dprime", "--hits", "9", "--misses", "1", "--fa", "1", "--cr", "9"
        ])
        .is_ok());
    }
}
