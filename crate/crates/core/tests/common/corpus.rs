//! Model-output corpus for a 2-vehicle, 2-type decision.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Valid,
    Clamped,
    Rescaled,
    /// Clamped and rescaled.
    Both,
    Malformed,
}

pub const IDS: [u64; 2] = [3, 8];
pub const K: usize = 2;

const VALID: [&str; 10] = [
    r#"{"w": [[0.5, 0.5], [0.2, 0.0]], "a": [[0.3, 0.2], [0.1, 0.0]]}"#,
    r#"{"w": [[0, 0], [0, 0]], "a": [[0, 0], [0, 0]]}"#,
    r#"{"w": [[1, 1], [1, 1]], "a": [[0.25, 0.25], [0.25, 0.25]]}"#,
    r#"{"a": [[0.1, 0.1], [0.1, 0.1]], "w": [[0.9, 0.8], [0.7, 0.6]]}"#,
    r#"{"w":[[1.0,0.0],[0.0,1.0]],"a":[[0.5,0.0],[0.0,0.5]]}"#,
    r#"{"w": [[0.5], [1]], "a": [[0.2], [0.3]]}"#,
    r#"{"w": [[0.5, 0.5], [0.5, 0.5]], "a": [[0.1, 0.1], [0.1, 0.1]], "note": "balanced"}"#,
    "{\n  \"w\": [[0.3, 0.3],\n        [0.3, 0.3]],\n  \"a\": [[0.05, 0.05],\n        [0.05, 0.05]]\n}",
    r#"{"w": [[1e-3, 0.999], [0.5, 0.5]], "a": [[1e-3, 0.4], [0.3, 0.29]]}"#,
    r#"{"w": [[0.5, 0.5], [0.5, 0.5]], "a": [[0.25, 0.25], [0.25, 0.25]]}"#,
];

const CLAMPED: [&str; 10] = [
    r#"{"w": [[1.2, 0.5], [0.5, 0.5]], "a": [[0.1, 0.1], [0.1, 0.1]]}"#,
    r#"{"w": [[-0.5, 0.5], [0.5, 0.5]], "a": [[0.0, 0.1], [0.1, 0.1]]}"#,
    r#"{"w": [[0.5, 0.5], [0.5, 0.5]], "a": [[-0.1, 0.1], [0.1, 0.1]]}"#,
    r#"{"w": [[2, 2], [2, 2]], "a": [[0.1, 0.1], [0.1, 0.1]]}"#,
    r#"{"w": [[0, 0.5], [0.5, 0.5]], "a": [[0.2, 0.1], [0.1, 0.1]]}"#,
    r#"{"w": [[0.5, 0.5], [0.5, -3]], "a": [[0.1, 0.1], [0.1, 0.0]]}"#,
    r#"{"w": [[0.5, 1.5], [1, 1]], "a": [[0.1, 0.1], [0.1, 0.1]]}"#,
    r#"{"w": [[100], [0.5]], "a": [[0.1], [0.1]]}"#,
    r#"{"w": [[0.0, 0.0], [0.0, 0.0]], "a": [[0.1, 0.1], [0.1, 0.1]]}"#,
    r#"{"w": [[1.0000001, 1], [1, 1]], "a": [[0.2, 0.2], [0.2, 0.2]]}"#,
];

const RESCALED: [&str; 6] = [
    r#"{"w": [[1, 1], [1, 1]], "a": [[0.5, 0.5], [0.5, 0.5]]}"#,
    r#"{"w": [[1.0], [1.0]], "a": [[0.6, 0.6], [0.0, 0.0]]}"#,
    r#"{"w": [[1, 1], [1, 1]], "a": [[1, 1], [1, 1]]}"#,
    r#"{"w": [[1, 0.5], [0.5, 1]], "a": [[0.9, 0.2], [0.1, 0.1]]}"#,
    r#"{"w": [[0.3, 0.3], [0.3, 0.3]], "a": [[0.3, 0.3], [0.3, 0.3]]}"#,
    r#"{"w": [[1, 1], [1, 1]], "a": [[0.34, 0.33], [0.33, 0.01]]}"#,
];

const BOTH: [&str; 2] = [
    r#"{"w": [[1.5, 1], [1, 1]], "a": [[0.9, 0.9], [0.0, 0.0]]}"#,
    r#"{"w": [[1, 1], [1, 1]], "a": [[7, 1], [1, 1]]}"#,
];

const WRAPPED: [&str; 10] = [
    r#"Here is my answer: {"w": [[0.5, 0.5], [0.5, 0.5]], "a": [[0.1, 0.1], [0.1, 0.1]]}"#,
    "```json\n{\"w\": [[0.5, 0.5], [0.5, 0.5]], \"a\": [[0.1, 0.1], [0.1, 0.1]]}\n```",
    r#"Decision: {"w": [[1, 0], [0, 1]], "a": [[0.4, 0], [0, 0.4]]} This keeps the backlog low."#,
    r#"Considering {the goal}, I propose {"w": [[0.5, 0.5], [0.5, 0.5]], "a": [[0.1, 0.1], [0.1, 0.1]]}."#,
    r#"{"reasoning": "vehicle 3 is close"} then {"w": [[0.5, 0.5], [0.5, 0.5]], "a": [[0.1, 0.1], [0.1, 0.1]]}"#,
    r#"Output: {"w": [[0.5, 0.5], [0.5, 0.5]], "a": [[0.1, 0.1], [0.1, 0.1]], "why": "a } brace in a string"}"#,
    "Sure!\n\n{\"w\": [[0.2, 0.2], [0.2, 0.2]], \"a\": [[0.2, 0.2], [0.2, 0.2]]}\n\nLet me know.",
    r#"<answer>{"w": [[0.7, 0.7], [0.1, 0.1]], "a": [[0.3, 0.3], [0.05, 0.05]]}</answer>"#,
    r#"{not json} {"w": [[0.5, 0.5], [0.5, 0.5]], "a": [[0.1, 0.1], [0.1, 0.1]]}"#,
    r#"The JSON object is: {"w": [[0.5, 0.5], [0.5, 0.5]], "a": [[0.1, 0.1], [0.1, 0.1]]} {"w": [[9]]}"#,
];

const MALFORMED: [&str; 12] = [
    "",
    "I cannot decide right now.",
    r#"{"w": [[0.5, 0.5], [0.5, 0.5]]}"#,
    r#"{"a": [[0.1, 0.1], [0.1, 0.1]]}"#,
    r#"{"w": [[0.5, 0.5]], "a": [[0.1, 0.1]]}"#,
    r#"{"w": [[0.5, 0.5, 0.5], [0.5, 0.5, 0.5]], "a": [[0.1, 0.1, 0.1], [0.1, 0.1, 0.1]]}"#,
    r#"{"w": "all", "a": [[0.1, 0.1], [0.1, 0.1]]}"#,
    r#"{"w": [["half", 0.5], [0.5, 0.5]], "a": [[0.1, 0.1], [0.1, 0.1]]}"#,
    r#"{"w": [[0.5, 0.5], [0.5, 0.5]], "a": [[0.1, 0.1], [0.1, 0.1]"#,
    r#"{"w": [[0.5, null], [0.5, 0.5]], "a": [[0.1, 0.1], [0.1, 0.1]]}"#,
    r#"[[0.5, 0.5], [0.5, 0.5]]"#,
    r#"{"w": [0.5, 0.5], "a": [0.1, 0.1]}"#,
];

pub fn corpus() -> Vec<(&'static str, Expect)> {
    let mut out = Vec::new();
    out.extend(VALID.iter().map(|s| (*s, Expect::Valid)));
    out.extend(CLAMPED.iter().map(|s| (*s, Expect::Clamped)));
    out.extend(RESCALED.iter().map(|s| (*s, Expect::Rescaled)));
    out.extend(BOTH.iter().map(|s| (*s, Expect::Both)));
    out.extend(WRAPPED.iter().map(|s| (*s, Expect::Valid)));
    out.extend(MALFORMED.iter().map(|s| (*s, Expect::Malformed)));
    out
}
