//! Minimal JSON Schema checking for the shipped `results.schema.json`.
//!
//! Supports the subset that file uses: `type` (a single name or a list of
//! alternatives), `properties`, `required`, `items`, and a boolean
//! `additionalProperties`. Unknown schema keywords are ignored, matching
//! standard validator behaviour. Validation stops at the first violation and
//! reports it with a JSON-pointer style path into the instance.

use serde_json::Value;

/// Validates `instance` against `schema`, returning the first violation as a
/// path-prefixed message.
pub fn validate_schema(schema: &Value, instance: &Value) -> Result<(), String> {
    validate_node(schema, instance, String::new())
}

fn describe(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn matches_type(name: &str, value: &Value) -> bool {
    match name {
        "null" => value.is_null(),
        "boolean" => value.is_boolean(),
        "integer" => value.is_i64() || value.is_u64(),
        "number" => value.is_number(),
        "string" => value.is_string(),
        "array" => value.is_array(),
        "object" => value.is_object(),
        _ => false,
    }
}

fn location(path: &str) -> &str {
    if path.is_empty() {
        "(root)"
    } else {
        path
    }
}

fn validate_node(schema: &Value, instance: &Value, path: String) -> Result<(), String> {
    let node = schema
        .as_object()
        .ok_or_else(|| format!("{}: schema node is not an object", location(&path)))?;

    if let Some(ty) = node.get("type") {
        let names: Vec<&str> = match ty {
            Value::String(name) => vec![name.as_str()],
            Value::Array(list) => list.iter().filter_map(Value::as_str).collect(),
            _ => return Err(format!("{}: schema type must be a string or list", location(&path))),
        };
        if !names.iter().any(|name| matches_type(name, instance)) {
            return Err(format!(
                "{}: expected {}, found {}",
                location(&path),
                names.join(" or "),
                describe(instance)
            ));
        }
    }

    if let Some(obj) = instance.as_object() {
        if let Some(required) = node.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if !obj.contains_key(key) {
                    return Err(format!(
                        "{}: missing required property \"{key}\"",
                        location(&path)
                    ));
                }
            }
        }
        let properties = node.get("properties").and_then(Value::as_object);
        if node.get("additionalProperties").and_then(Value::as_bool) == Some(false) {
            for key in obj.keys() {
                let known = properties.map(|p| p.contains_key(key)).unwrap_or(false);
                if !known {
                    return Err(format!(
                        "{}: unexpected property \"{key}\"",
                        location(&path)
                    ));
                }
            }
        }
        if let Some(properties) = properties {
            for (key, subschema) in properties {
                if let Some(value) = obj.get(key) {
                    validate_node(subschema, value, format!("{path}/{key}"))?;
                }
            }
        }
    }

    if let Some(list) = instance.as_array() {
        if let Some(items) = node.get("items") {
            for (i, element) in list.iter().enumerate() {
                validate_node(items, element, format!("{path}/{i}"))?;
            }
        }
    }

    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{write_results_json, ResultsBundle, SummaryRow};
    use crate::runner::{EpisodeRecord, ExperimentLog, StepRecord};
    use serde_json::json;
    use std::fs;
    use std::path::Path;

    fn shipped_schema() -> Value {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../results.schema.json");
        let text = fs::read_to_string(path).unwrap();
        serde_json::from_str(&text).unwrap()
    }

    fn sample_bundle() -> ResultsBundle {
        let log = ExperimentLog {
            env_name: "pendulum".to_string(),
            mode: "optimistic".to_string(),
            regime: "episodic".to_string(),
            seed: 7,
            episodes: vec![EpisodeRecord {
                episode: 0,
                ret: 12.25,
                intrinsic_return: 3.5,
                length: 40,
                lambda: 10.0,
                info_gain: 1.75,
                wall_time: 0.0,
            }],
            steps: vec![StepRecord {
                step: 0,
                reward: 0.5,
                uncertainty_norm: 0.25,
                step_gain: 0.125,
                triggered: true,
            }],
            aborted: None,
        };
        ResultsBundle {
            env: "pendulum".to_string(),
            mode: "optimistic".to_string(),
            regime: "episodic".to_string(),
            seeds: vec![7],
            oracle_estimate: 14.5,
            rows: vec![SummaryRow {
                episode: 0,
                median_return: 12.25,
                std_return: 0.0,
                cum_regret: 2.25,
                info_gain: 1.75,
                lambda: 10.0,
            }],
            padded: false,
            logs: vec![log],
        }
    }

    #[test]
    fn exported_bundle_validates_against_the_shipped_schema() {
        let schema = shipped_schema();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.json");
        write_results_json(&path, &sample_bundle()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let instance: Value = serde_json::from_str(&text).unwrap();
        validate_schema(&schema, &instance).unwrap();
    }

    #[test]
    fn aborted_accepts_both_null_and_string() {
        let schema = shipped_schema();
        let mut bundle = sample_bundle();
        bundle.logs[0].aborted = Some("model update failed".to_string());
        let instance = serde_json::to_value(&bundle).unwrap();
        validate_schema(&schema, &instance).unwrap();
    }

    #[test]
    fn missing_required_field_is_rejected_with_its_path() {
        let schema = shipped_schema();
        let mut instance = serde_json::to_value(sample_bundle()).unwrap();
        instance["logs"][0]["episodes"][0]
            .as_object_mut()
            .unwrap()
            .remove("return");
        let err = validate_schema(&schema, &instance).unwrap_err();
        assert!(err.contains("/logs/0/episodes/0"), "{err}");
        assert!(err.contains("return"), "{err}");
    }

    #[test]
    fn wrong_type_is_rejected() {
        let schema = shipped_schema();
        let mut instance = serde_json::to_value(sample_bundle()).unwrap();
        instance["oracle_estimate"] = json!("fourteen");
        let err = validate_schema(&schema, &instance).unwrap_err();
        assert!(err.contains("/oracle_estimate"), "{err}");
        assert!(err.contains("expected number"), "{err}");
    }

    #[test]
    fn unknown_property_is_rejected() {
        let schema = shipped_schema();
        let mut instance = serde_json::to_value(sample_bundle()).unwrap();
        instance
            .as_object_mut()
            .unwrap()
            .insert("extra".to_string(), json!(1));
        let err = validate_schema(&schema, &instance).unwrap_err();
        assert!(err.contains("unexpected property \"extra\""), "{err}");
    }

    #[test]
    fn fractional_seed_is_not_an_integer() {
        let schema = shipped_schema();
        let mut instance = serde_json::to_value(sample_bundle()).unwrap();
        instance["seeds"][0] = json!(1.5);
        let err = validate_schema(&schema, &instance).unwrap_err();
        assert!(err.contains("/seeds/0"), "{err}");
        assert!(err.contains("expected integer"), "{err}");
    }

    #[test]
    fn integers_satisfy_number_typed_fields() {
        let schema = shipped_schema();
        let mut instance = serde_json::to_value(sample_bundle()).unwrap();
        instance["oracle_estimate"] = json!(14);
        validate_schema(&schema, &instance).unwrap();
    }
}
