//! T-Lens: a ReAct agent that consults HR-MCP tools before answering
//! questions about a post.

pub mod backend;
pub mod parse;
pub mod prompt;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use tlens_core::model::derive_receptivity_metrics;
use tlens_mcp::{McpClient, CONSISTENCY, PREDICT};

pub use backend::{BackendError, ChatBackend, LlmBackend, Message, Role, ScriptEntry, ScriptedBackend};
pub use parse::{parse_action, ParseError, Parsed};
pub use prompt::PROMPT_VERSION;

/// Marks the line of a final answer that carries the scores as JSON.
pub const SCORES_PREFIX: &str = "Predicted human response: ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageRef {
    /// A file the server can read.
    Path(String),
    /// Base64 PNG or JPEG bytes.
    B64(String),
}

impl ImageRef {
    pub fn describe(&self) -> String {
        match self {
            ImageRef::Path(p) => p.clone(),
            ImageRef::B64(b) => format!("inline image ({} base64 characters)", b.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub text: String,
    pub image: Option<ImageRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub max_steps: usize,
    /// Re-prompts per step when the output fits neither form.
    pub max_reminders: usize,
    /// Extra attempts after a backend transport failure.
    pub backend_retries: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_steps: 15,
            max_reminders: 2,
            backend_retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolAction {
    pub tool: String,
    /// As sent, after filling in the post.
    pub arguments: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub index: usize,
    pub thought: String,
    pub action: Option<ToolAction>,
    pub observation: Option<String>,
    pub format_reminders: usize,
    /// JSON-RPC requests this step put on the wire: 1 for a tool call that
    /// reached the server, 0 otherwise.
    pub tool_requests: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub ai_likelihood: f64,
    pub belief: f64,
    pub dissemination: f64,
    pub trustworthiness: f64,
    pub impact: f64,
    pub openness: f64,
    pub sentiment_consistency: Option<f64>,
}

impl Scores {
    /// Recomputes the derived metrics from the three attributes so that the
    /// identities hold exactly for the rounded values seen on the wire.
    pub fn from_attributes(ai: f64, belief: f64, diss: f64, consistency: Option<f64>) -> Option<Self> {
        let m = derive_receptivity_metrics(ai, belief, diss).ok()?;
        Some(Self {
            ai_likelihood: ai,
            belief,
            dissemination: diss,
            trustworthiness: m.trustworthiness,
            impact: m.impact,
            openness: m.openness,
            sentiment_consistency: consistency,
        })
    }

    /// Largest deviation from the metric identities.
    pub fn identity_error(&self) -> f64 {
        let t = (self.belief - self.ai_likelihood + 1.0) / 2.0;
        let i = (self.belief + self.dissemination) / 2.0;
        let o = (self.ai_likelihood + 1.0) * i / 2.0;
        [t - self.trustworthiness, i - self.impact, o - self.openness]
            .iter()
            .fold(0.0, |m, d| m.max(d.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceStatus {
    Completed,
    /// The step budget ran out and the answer came from the synthesis turn.
    ForcedSynthesis,
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub prompt_version: String,
    pub query: String,
    pub inputs: Post,
    pub max_steps: usize,
    pub steps: Vec<AgentStep>,
    pub final_answer: String,
    pub scores: Option<Scores>,
    pub status: TraceStatus,
}

impl AgentTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn tool_requests(&self) -> usize {
        self.steps.iter().map(|s| s.tool_requests).sum()
    }

    /// Thought / Action / Observation blocks.
    pub fn render_text(&self) -> String {
        let mut out = format!("Question: {}\nPost: {}\n", self.query, self.inputs.text);
        if let Some(img) = &self.inputs.image {
            let _ = writeln!(out, "Image: {}", img.describe());
        }
        for s in &self.steps {
            let _ = writeln!(out, "\n[Step {}]", s.index);
            if !s.thought.is_empty() {
                let _ = writeln!(out, "Thought: {}", s.thought);
            }
            if let Some(a) = &s.action {
                let _ = writeln!(out, "Action: {}\nAction Input: {}", a.tool, a.arguments);
            }
            if let Some(o) = &s.observation {
                let _ = writeln!(out, "Observation: {o}");
            }
        }
        match &self.status {
            TraceStatus::Completed => {}
            TraceStatus::ForcedSynthesis => out.push_str("\n[Step budget exhausted]\n"),
            TraceStatus::Failed { error } => {
                let _ = writeln!(out, "\n[Failed: {error}]");
            }
        }
        if !self.final_answer.is_empty() {
            let _ = writeln!(out, "\nFinal Answer: {}", self.final_answer);
        }
        out
    }
}

/// Reads the scores line back out of a final answer.
pub fn embedded_scores(final_answer: &str) -> Option<Scores> {
    let line = final_answer.lines().rev().find_map(|l| l.strip_prefix(SCORES_PREFIX))?;
    serde_json::from_str(line).ok()
}

fn complete(backend: &mut dyn LlmBackend, messages: &[Message], retries: usize) -> Result<String, BackendError> {
    let mut attempt = 0;
    loop {
        match backend.complete(messages) {
            Err(BackendError::Transport(e)) if attempt < retries => {
                attempt += 1;
                log::warn!("backend attempt {attempt} failed: {e}");
            }
            other => return other,
        }
    }
}

/// Supplies the post's text and image to post tools that omit them.
fn fill_post_arguments(tool: &str, args: &mut Map<String, Value>, post: &Post) {
    if tool != PREDICT && tool != CONSISTENCY {
        return;
    }
    args.entry("text").or_insert_with(|| Value::String(post.text.clone()));
    let has_image = ["image_b64", "image_path"]
        .iter()
        .any(|k| args.get(*k).is_some_and(|v| !v.is_null()));
    if !has_image {
        match &post.image {
            Some(ImageRef::Path(p)) => {
                args.insert("image_path".into(), Value::String(p.clone()));
            }
            Some(ImageRef::B64(b)) => {
                args.insert("image_b64".into(), Value::String(b.clone()));
            }
            None => {}
        }
    }
}

fn scores_from(steps: &[AgentStep]) -> Option<Scores> {
    let mut attributes = None;
    let mut consistency = None;
    for s in steps {
        let (Some(a), Some(o)) = (&s.action, &s.observation) else {
            continue;
        };
        let Ok(Value::Object(v)) = serde_json::from_str::<Value>(o) else {
            continue;
        };
        let num = |k: &str| v.get(k).and_then(Value::as_f64);
        if a.tool == PREDICT {
            if let (Some(ai), Some(b), Some(d)) = (num("ai_likelihood"), num("belief"), num("dissemination")) {
                attributes = Some((ai, b, d));
            }
        } else if a.tool == CONSISTENCY {
            consistency = num("sentiment_consistency").or(consistency);
        }
    }
    let (ai, b, d) = attributes?;
    Scores::from_attributes(ai, b, d, consistency)
}

fn fallback_answer(steps: &[AgentStep]) -> String {
    let mut out = format!("No final answer was given within {} steps.", steps.len());
    for s in steps {
        if let (Some(a), Some(o)) = (&s.action, &s.observation) {
            let _ = write!(out, "\n{}: {o}", a.tool);
        }
    }
    out
}

/// Runs the ReAct loop. Backend failures end the trace with
/// [`TraceStatus::Failed`]; tool failures become `ERROR: ...` observations.
pub fn run_agent(
    query: &str,
    post: &Post,
    backend: &mut dyn LlmBackend,
    client: &mut McpClient,
    config: &AgentConfig,
) -> AgentTrace {
    let mut messages = vec![
        Message::new(Role::System, prompt::system_prompt(client.tools(), config.max_steps)),
        Message::new(Role::User, prompt::user_prompt(query, post)),
    ];
    let mut steps: Vec<AgentStep> = Vec::new();
    let mut answer = None;
    let mut status = TraceStatus::ForcedSynthesis;

    'steps: for index in 1..=config.max_steps {
        let mut reminders = 0;
        let parsed = loop {
            let output = match complete(backend, &messages, config.backend_retries) {
                Ok(o) => o,
                Err(e) => {
                    status = TraceStatus::Failed { error: e.to_string() };
                    break 'steps;
                }
            };
            let parsed = parse_action(&output);
            messages.push(Message::new(Role::Assistant, output));
            match parsed {
                Ok(Parsed::ThoughtOnly { .. }) if reminders < config.max_reminders => {
                    reminders += 1;
                    messages.push(Message::new(Role::User, prompt::FORMAT_REMINDER));
                }
                other => break other,
            }
        };
        let mut step = AgentStep {
            index,
            thought: String::new(),
            action: None,
            observation: None,
            format_reminders: reminders,
            tool_requests: 0,
        };
        match parsed {
            Ok(Parsed::Final { thought, answer: a }) => {
                step.thought = thought;
                steps.push(step);
                answer = Some(a);
                status = TraceStatus::Completed;
                break;
            }
            Ok(Parsed::Tool {
                thought,
                tool,
                mut arguments,
            }) => {
                fill_post_arguments(&tool, &mut arguments, post);
                let arguments = Value::Object(arguments);
                let before = client.requests_sent();
                let observation = client.observe(&tool, arguments.clone());
                step.tool_requests = client.requests_sent() - before;
                log::debug!("step {index}: {tool} -> {observation}");
                messages.push(Message::new(Role::User, format!("Observation: {observation}")));
                step.thought = thought;
                step.action = Some(ToolAction { tool, arguments });
                step.observation = Some(observation);
            }
            Ok(Parsed::ThoughtOnly { thought }) => step.thought = thought,
            Err(e) => {
                let observation = format!("ERROR: {e}");
                messages.push(Message::new(Role::User, format!("Observation: {observation}")));
                step.thought = e.thought().to_string();
                step.observation = Some(observation);
            }
        }
        steps.push(step);
    }

    if status == TraceStatus::ForcedSynthesis {
        messages.push(Message::new(Role::User, prompt::budget_exhausted(config.max_steps)));
        match complete(backend, &messages, config.backend_retries) {
            Ok(output) => {
                answer = Some(match parse_action(&output) {
                    Ok(Parsed::Final { answer, .. }) => answer,
                    _ => fallback_answer(&steps),
                });
            }
            Err(e) => status = TraceStatus::Failed { error: e.to_string() },
        }
    }

    let scores = scores_from(&steps);
    let final_answer = match (answer, &scores) {
        (Some(a), Some(s)) => format!(
            "{a}\n\n{SCORES_PREFIX}{}",
            serde_json::to_string(s).expect("scores serialize")
        ),
        (Some(a), None) => a,
        (None, _) => String::new(),
    };
    AgentTrace {
        prompt_version: PROMPT_VERSION.to_string(),
        query: query.to_string(),
        inputs: post.clone(),
        max_steps: config.max_steps,
        steps,
        final_answer,
        scores,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn post_arguments_are_filled_only_when_missing() {
        let post = Post {
            text: "hello".into(),
            image: Some(ImageRef::Path("a.png".into())),
        };
        let mut args = Map::new();
        fill_post_arguments(PREDICT, &mut args, &post);
        assert_eq!(Value::Object(args), json!({"text": "hello", "image_path": "a.png"}));

        let mut args = json!({"text": "other", "image_b64": "AAAA"})
            .as_object()
            .unwrap()
            .clone();
        fill_post_arguments(CONSISTENCY, &mut args, &post);
        assert_eq!(Value::Object(args), json!({"text": "other", "image_b64": "AAAA"}));

        let mut args = Map::new();
        fill_post_arguments("derive_metrics", &mut args, &post);
        assert!(args.is_empty());
    }

    #[test]
    fn scores_line_round_trips() {
        let s = Scores::from_attributes(0.9, 0.5, 0.65, Some(0.25)).unwrap();
        assert!(s.identity_error() < 1e-15);
        let answer = format!("text\n\n{SCORES_PREFIX}{}", serde_json::to_string(&s).unwrap());
        assert_eq!(embedded_scores(&answer), Some(s));
        assert_eq!(embedded_scores("no scores here"), None);
    }

    #[test]
    fn out_of_range_attributes_give_no_scores() {
        assert!(Scores::from_attributes(1.5, 0.5, 0.5, None).is_none());
    }
}
