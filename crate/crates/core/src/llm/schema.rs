//! Closed structural schemas for model answers.

use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum Schema {
    String,
    Number,
    Boolean,
    Array(Box<Schema>),
    /// Every listed field is required and no other field is accepted.
    Object(Vec<(String, Schema)>),
}

impl Schema {
    pub fn object<I, K>(fields: I) -> Schema
    where
        I: IntoIterator<Item = (K, Schema)>,
        K: Into<String>,
    {
        Schema::Object(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn array(item: Schema) -> Schema {
        Schema::Array(Box::new(item))
    }

    /// Compact JSON-shaped description embedded into prompts.
    pub fn describe(&self) -> String {
        match self {
            Schema::String => "\"<string>\"".into(),
            Schema::Number => "<number>".into(),
            Schema::Boolean => "<true|false>".into(),
            Schema::Array(item) => format!("[{}, ...]", item.describe()),
            Schema::Object(fields) => {
                let inner: Vec<String> = fields
                    .iter()
                    .map(|(k, v)| format!("\"{k}\": {}", v.describe()))
                    .collect();
                format!("{{{}}}", inner.join(", "))
            }
        }
    }

    pub fn validate(&self, value: &Value) -> Result<(), String> {
        self.validate_at(value, "$")
    }

    fn validate_at(&self, value: &Value, path: &str) -> Result<(), String> {
        match (self, value) {
            (Schema::String, Value::String(_)) => Ok(()),
            (Schema::Number, Value::Number(_)) => Ok(()),
            (Schema::Boolean, Value::Bool(_)) => Ok(()),
            (Schema::Array(item), Value::Array(items)) => items
                .iter()
                .enumerate()
                .try_for_each(|(i, v)| item.validate_at(v, &format!("{path}[{i}]"))),
            (Schema::Object(fields), Value::Object(map)) => {
                for key in map.keys() {
                    if !fields.iter().any(|(k, _)| k == key) {
                        return Err(format!("{path}: unexpected field {key:?}"));
                    }
                }
                for (k, s) in fields {
                    let v = map
                        .get(k)
                        .ok_or_else(|| format!("{path}: missing field {k:?}"))?;
                    s.validate_at(v, &format!("{path}.{k}"))?;
                }
                Ok(())
            }
            (expected, got) => Err(format!(
                "{path}: expected {}, got {}",
                expected.kind(),
                kind_of(got)
            )),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Schema::String => "string",
            Schema::Number => "number",
            Schema::Boolean => "boolean",
            Schema::Array(_) => "array",
            Schema::Object(_) => "object",
        }
    }
}

fn kind_of(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Pulls the single JSON object out of a model reply, tolerating code
/// fences and surrounding prose.
pub fn extract_json_object(raw: &str) -> Result<Value, String> {
    let trimmed = raw.trim();
    if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    let start = trimmed.find('{').ok_or("reply contains no JSON object")?;
    let end = trimmed.rfind('}').ok_or("reply contains no JSON object")?;
    if end < start {
        return Err("reply contains no JSON object".into());
    }
    match serde_json::from_str::<Value>(&trimmed[start..=end]) {
        Ok(v @ Value::Object(_)) => Ok(v),
        Ok(_) => Err("reply is not a JSON object".into()),
        Err(e) => Err(format!("invalid JSON: {e}")),
    }
}
