use proptest::prelude::*;
use serde_json::{Map, Value};
use tlens_agent::{parse_action, Parsed};

proptest! {
    #[test]
    fn never_panics(s in "\\PC*(\n\\PC*){0,4}") {
        let _ = parse_action(&s);
    }

    #[test]
    fn formatted_tool_calls_round_trip(
        thought in "[a-zA-Z ,.]{0,40}",
        tool in "[a-z_]{1,20}",
        args in prop::collection::btree_map("[a-z]{1,8}", any::<i32>(), 0..4),
    ) {
        let arguments: Map<String, Value> = args.into_iter().map(|(k, v)| (k, Value::from(v))).collect();
        let text = format!("Thought: {thought}\nAction: {tool}\nAction Input: {}", Value::Object(arguments.clone()));
        let parsed = parse_action(&text).unwrap();
        prop_assert_eq!(parsed, Parsed::Tool { thought: thought.trim().to_string(), tool, arguments });
    }

    #[test]
    fn final_answers_keep_their_text(answer in "[a-zA-Z0-9 .,]{0,60}[a-zA-Z0-9]") {
        let parsed = parse_action(&format!("Thought: ok\nFinal Answer: {answer}")).unwrap();
        prop_assert_eq!(parsed, Parsed::Final { thought: "ok".into(), answer: answer.trim().to_string() });
    }
}
