use serde_json::Value;
use tlens_mcp::tools::ToolDescriptor;

use crate::Post;

pub const PROMPT_VERSION: &str = "v1";

const SYSTEM_TEMPLATE: &str = include_str!("../assets/system_prompt_v1.txt");

pub const FORMAT_REMINDER: &str = "Your reply did not follow the required format. Reply with either \
\"Action:\" and a one-line \"Action Input:\" JSON object, or \"Final Answer:\".";

pub fn budget_exhausted(max_steps: usize) -> String {
    format!(
        "You have used all {max_steps} steps. Using the observations so far, reply now with \
         \"Final Answer:\" and no further actions."
    )
}

fn render_tool(t: &ToolDescriptor) -> String {
    let required: Vec<&str> = t
        .input_schema
        .get("required")
        .and_then(Value::as_array)
        .map(|r| r.iter().filter_map(Value::as_str).collect())
        .unwrap_or_default();
    let args: Vec<String> = t
        .input_schema
        .get("properties")
        .and_then(Value::as_object)
        .map(|props| {
            props
                .keys()
                .map(|k| {
                    if required.contains(&k.as_str()) {
                        k.clone()
                    } else {
                        format!("{k}?")
                    }
                })
                .collect()
        })
        .unwrap_or_default();
    format!("- {}({}): {}", t.name, args.join(", "), t.description)
}

pub fn system_prompt(tools: &[ToolDescriptor], max_steps: usize) -> String {
    let tools: Vec<String> = tools.iter().map(render_tool).collect();
    SYSTEM_TEMPLATE
        .replace("{tools}", &tools.join("\n"))
        .replace("{max_steps}", &max_steps.to_string())
}

pub fn user_prompt(query: &str, post: &Post) -> String {
    let image = match &post.image {
        None => "none".to_string(),
        Some(img) => img.describe(),
    };
    format!("Question: {query}\n\nPost text: {}\nPost image: {image}", post.text)
}
