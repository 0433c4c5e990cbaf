//! The ReAct output grammar.
//!
//! ```text
//! Thought: <text>                  (optional, may span lines)
//! Final Answer: <text>             (rest of the output)
//! ```
//! or
//! ```text
//! Thought: <text>
//! Action: <tool name>
//! Action Input: <one-line JSON object>
//! ```
//! Whichever of `Action:` and `Final Answer:` comes first decides.

use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Parsed {
    Final {
        thought: String,
        answer: String,
    },
    Tool {
        thought: String,
        tool: String,
        arguments: Map<String, Value>,
    },
    ThoughtOnly {
        thought: String,
    },
}

impl Parsed {
    pub fn thought(&self) -> &str {
        match self {
            Parsed::Final { thought, .. } | Parsed::Tool { thought, .. } | Parsed::ThoughtOnly { thought } => thought,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("Action `{tool}` has no Action Input line")]
    MissingInput { tool: String, thought: String },
    #[error("Action Input for `{tool}` is not a JSON object: {detail}")]
    BadInput {
        tool: String,
        thought: String,
        detail: String,
    },
}

impl ParseError {
    pub fn thought(&self) -> &str {
        match self {
            ParseError::MissingInput { thought, .. } | ParseError::BadInput { thought, .. } => thought,
        }
    }

    pub fn tool(&self) -> &str {
        match self {
            ParseError::MissingInput { tool, .. } | ParseError::BadInput { tool, .. } => tool,
        }
    }
}

fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = line.trim_start().strip_prefix(key)?;
    Some(rest.strip_prefix(':')?.trim())
}

pub fn parse_action(output: &str) -> Result<Parsed, ParseError> {
    let lines: Vec<&str> = output.lines().collect();
    let mut thought: Vec<&str> = Vec::new();
    let mut in_thought = false;
    for (i, line) in lines.iter().enumerate() {
        if let Some(first) = field(line, "Final Answer") {
            let rest = std::iter::once(first).chain(lines[i + 1..].iter().copied());
            let answer = rest.collect::<Vec<_>>().join("\n").trim().to_string();
            let thought = thought.join("\n").trim().to_string();
            if answer.is_empty() {
                return Ok(Parsed::ThoughtOnly { thought });
            }
            return Ok(Parsed::Final { thought, answer });
        }
        if let Some(tool) = field(line, "Action") {
            let tool = tool.to_string();
            let thought = thought.join("\n").trim().to_string();
            let input = lines[i + 1..].iter().find_map(|l| field(l, "Action Input"));
            let Some(input) = input else {
                return Err(ParseError::MissingInput { tool, thought });
            };
            return match serde_json::from_str::<Value>(input) {
                Ok(Value::Object(arguments)) => Ok(Parsed::Tool {
                    thought,
                    tool,
                    arguments,
                }),
                Ok(other) => Err(ParseError::BadInput {
                    tool,
                    thought,
                    detail: format!("got {other}"),
                }),
                Err(e) => Err(ParseError::BadInput {
                    tool,
                    thought,
                    detail: e.to_string(),
                }),
            };
        }
        if let Some(t) = field(line, "Thought") {
            in_thought = true;
            thought.push(t);
        } else if in_thought {
            thought.push(line.trim());
        }
    }
    let thought = if thought.is_empty() {
        output.trim().to_string()
    } else {
        thought.join("\n").trim().to_string()
    };
    Ok(Parsed::ThoughtOnly { thought })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn tool_call() {
        let p = parse_action("Thought: need scores\nAction: predict_human_response\nAction Input: {\"text\": \"x\"}")
            .unwrap();
        match p {
            Parsed::Tool {
                thought,
                tool,
                arguments,
            } => {
                assert_eq!(thought, "need scores");
                assert_eq!(tool, "predict_human_response");
                assert_eq!(Value::Object(arguments), json!({"text": "x"}));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn final_answer_takes_the_rest() {
        assert_eq!(
            parse_action("Final Answer: likely low trust.").unwrap(),
            Parsed::Final {
                thought: String::new(),
                answer: "likely low trust.".into()
            }
        );
        let p = parse_action("Thought: done\nwith two lines\nFinal Answer: first\nsecond\n").unwrap();
        assert_eq!(
            p,
            Parsed::Final {
                thought: "done\nwith two lines".into(),
                answer: "first\nsecond".into()
            }
        );
    }

    #[test]
    fn bad_input_is_a_parse_error() {
        let e = parse_action("Action: t\nAction Input: {bad").unwrap_err();
        assert!(
            matches!(e, ParseError::BadInput { ref tool, .. } if tool == "t"),
            "{e:?}"
        );
        let e = parse_action("Action: t\nAction Input: [1, 2]").unwrap_err();
        assert!(matches!(e, ParseError::BadInput { .. }));
        let e = parse_action("Thought: x\nAction: t").unwrap_err();
        assert_eq!(e.thought(), "x");
        assert!(matches!(e, ParseError::MissingInput { .. }));
    }

    #[test]
    fn anything_else_is_thought_only() {
        assert_eq!(
            parse_action("I think the post is fake.").unwrap(),
            Parsed::ThoughtOnly {
                thought: "I think the post is fake.".into()
            }
        );
        assert!(matches!(
            parse_action("Thought: hmm").unwrap(),
            Parsed::ThoughtOnly { .. }
        ));
        assert!(matches!(
            parse_action("Final Answer:   ").unwrap(),
            Parsed::ThoughtOnly { .. }
        ));
        assert!(matches!(parse_action("").unwrap(), Parsed::ThoughtOnly { .. }));
    }

    #[test]
    fn first_directive_wins() {
        let p = parse_action("Final Answer: stop\nAction: t\nAction Input: {}").unwrap();
        assert!(matches!(p, Parsed::Final { .. }));
        let p = parse_action("Action: t\nAction Input: {}\nFinal Answer: later").unwrap();
        assert!(matches!(p, Parsed::Tool { .. }));
    }

    #[test]
    fn tolerates_indentation() {
        let p = parse_action("  Thought: a\n  Action: t\n  Action Input: {\"k\": 1}").unwrap();
        assert!(matches!(p, Parsed::Tool { ref tool, .. } if tool == "t"));
    }
}
