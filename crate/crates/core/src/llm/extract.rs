//! Lenient extraction of a JSON value from decorated model output.

use serde_json::Value;

use super::OutputShape;

fn has_shape(value: &Value, shape: OutputShape) -> bool {
    match shape {
        OutputShape::JsonArray => value.is_array(),
        OutputShape::JsonObject => value.is_object(),
        OutputShape::FreeText => true,
    }
}

/// Finds the first JSON value of the requested shape in `text`, skipping any
/// surrounding prose or Markdown code fences.
///
/// Every `[` / `{` is tried as a start position in order; the streaming
/// parser stops at the end of the first complete value, so trailing text is
/// ignored.
pub fn extract_json(text: &str, shape: OutputShape) -> Option<Value> {
    for (start, c) in text.char_indices() {
        if c != '[' && c != '{' {
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        if let Some(Ok(value)) = stream.next() {
            if has_shape(&value, shape) {
                return Some(value);
            }
        }
    }
    None
}
