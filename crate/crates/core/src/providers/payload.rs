//! Extraction of JSON payloads from free-form model replies.

use super::ProviderError;
use serde_json::{Map, Value};

/// Returns the first well-formed JSON object embedded in `text`.
///
/// Model replies wrap their JSON in prose, markdown fences, or both; this
/// scans every `{` in order, finds its brace-balanced extent (string literals
/// and escapes respected), and returns the first candidate that parses as a
/// JSON object.
pub fn parse_json_payload(text: &str) -> Result<Map<String, Value>, ProviderError> {
    let mut search_from = 0;
    while let Some(relative) = text[search_from..].find('{') {
        let start = search_from + relative;
        if let Some(end) = balanced_end(text, start) {
            let candidate = &text[start..=end];
            if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(candidate) {
                return Ok(map);
            }
        }
        search_from = start + 1;
    }
    let prefix: String = text.chars().take(60).collect();
    Err(ProviderError::MalformedResponse(format!(
        "no JSON object found in reply starting with {prefix:?}"
    )))
}

/// Byte index of the `}` closing the object opened at `start`, honoring
/// nesting, string literals, and escape sequences. `None` if unbalanced.
fn balanced_end(text: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, ch) in text[start..].char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_string = false;
            }
            continue;
        }
        match ch {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + offset);
                }
            }
            _ => {}
        }
    }
    None
}
