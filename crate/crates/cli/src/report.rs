use std::fmt::Write as _;

use fixmk_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::problem::ParseError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Failed,
    Infeasible,
    NotConverged,
}

/// Which part of the pipeline produced the status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Parse,
    Validation,
    Precondition,
    Exact,
    Cesaro,
    CrossCheck,
    Fip,
    Extension,
    Verification,
    Done,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub status: Status,
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub result: Value,
    pub timing_ms: f64,
    pub tool_version: String,
}

impl Report {
    pub fn new(status: Status, stage: Stage, result: Value) -> Self {
        Report {
            status,
            stage,
            message: None,
            result,
            timing_ms: 0.0,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn ok(result: Value) -> Self {
        Report::new(Status::Ok, Stage::Done, result)
    }

    pub fn with_message(mut self, message: impl Into<String>) -> Self {
        self.message = Some(message.into());
        self
    }

    pub fn parse_error(err: &ParseError) -> Self {
        Report::new(
            Status::Failed,
            Stage::Parse,
            json!({ "line": err.line, "column": err.column }),
        )
        .with_message(err.to_string())
    }

    /// Maps a library error raised during `stage` to a report.
    pub fn from_error(stage: Stage, err: &Error) -> Self {
        let (status, stage, detail) = match err {
            Error::NotConverged {
                best_point,
                best_residual,
                certificate,
            } => (
                Status::NotConverged,
                stage,
                json!({
                    "best_point": best_point.as_slice(),
                    "best_residual": best_residual,
                    "certificate": certificate,
                }),
            ),
            Error::EmptyFixedSet | Error::FixedSetMissesPolytope(_) | Error::EmptyConstraintSet => {
                (Status::Infeasible, stage, Value::Null)
            }
            Error::InvariantViolation {
                invariant,
                operator,
                residual,
            } => (
                Status::Failed,
                Stage::Precondition,
                json!({ "invariant": invariant, "operator": operator, "residual": residual }),
            ),
            Error::NonLinearOperator(op) => (
                Status::Failed,
                Stage::Precondition,
                json!({ "operator": op }),
            ),
            Error::DegenerateBasis => (Status::Failed, Stage::Precondition, Value::Null),
            Error::InvalidStructure(_) => (Status::Failed, Stage::Validation, Value::Null),
            Error::ToleranceNotMet { residual, tol } => (
                Status::Failed,
                stage,
                json!({ "residual": residual, "tol": tol }),
            ),
            _ => (Status::Failed, stage, Value::Null),
        };
        let mut result = json!({ "error": error_name(err) });
        if let Value::Object(extra) = detail {
            result
                .as_object_mut()
                .expect("object literal")
                .extend(extra);
        }
        Report::new(status, stage, result).with_message(err.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match (self.status, self.stage) {
            (Status::Ok, _) => 0,
            (_, Stage::Parse) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("reports always serialize");
        out.push('\n');
        out
    }

    /// Human-readable summary; not meant for tools.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let status = serde_json::to_value(self.status).expect("unit variant");
        let stage = serde_json::to_value(self.stage).expect("unit variant");
        writeln!(out, "status: {}", status.as_str().unwrap_or_default()).unwrap();
        writeln!(out, "stage: {}", stage.as_str().unwrap_or_default()).unwrap();
        if let Some(msg) = &self.message {
            writeln!(out, "message: {msg}").unwrap();
        }
        write_text(&mut out, "", &self.result);
        writeln!(out, "time: {:.3} ms", self.timing_ms).unwrap();
        out
    }
}

fn write_text(out: &mut String, prefix: &str, value: &Value) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                write_text(out, &key, v);
            }
        }
        Value::Array(items) if items.iter().any(|v| v.is_object()) => {
            for (i, v) in items.iter().enumerate() {
                write_text(out, &format!("{prefix}[{i}]"), v);
            }
        }
        Value::Null => {}
        other => writeln!(out, "{prefix}: {other}").unwrap(),
    }
}

fn error_name(err: &Error) -> &'static str {
    match err {
        Error::DimensionMismatch { .. } => "dimension-mismatch",
        Error::ZeroDimension => "zero-dimension",
        Error::NonFinite(_) => "non-finite",
        Error::Malformed { .. } => "malformed",
        Error::EmptyPolytope => "empty-polytope",
        Error::InvalidWeights(_) => "invalid-weights",
        Error::ZeroAveragingDepth => "zero-averaging-depth",
        Error::InvalidWordBudget => "invalid-word-budget",
        Error::InvalidSampleCount { .. } => "invalid-sample-count",
        Error::ElementCapExceeded { .. } => "element-cap-exceeded",
        Error::DuplicateLabel(_) => "duplicate-label",
        Error::StartOutsidePolytope { .. } => "start-outside-polytope",
        Error::NotConverged { .. } => "not-converged",
        Error::EmptyFixedSet => "empty-fixed-set",
        Error::FixedSetMissesPolytope(_) => "fixed-set-misses-polytope",
        Error::ToleranceNotMet { .. } => "tolerance-not-met",
        Error::FamilyNeedsProduct(_) => "family-needs-product",
        Error::NonLinearOperator(_) => "non-linear-operator",
        Error::DegenerateBasis => "degenerate-basis",
        Error::ZeroFunctional => "zero-functional",
        Error::EmptyConstraintSet => "empty-constraint-set",
        Error::EnumerationTooLarge { .. } => "enumeration-too-large",
        Error::InvariantViolation { .. } => "invariant-violation",
        Error::InvalidStructure(_) => "invalid-structure",
        Error::PivotLimit(_) => "pivot-limit",
        Error::Numerical(_) => "numerical",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Report::ok(Value::Null).exit_code(), 0);
        let parse = ParseError {
            message: "x".into(),
            line: 1,
            column: 2,
        };
        assert_eq!(Report::parse_error(&parse).exit_code(), 2);
        assert_eq!(
            Report::from_error(Stage::Exact, &Error::EmptyFixedSet).exit_code(),
            1
        );
        assert_eq!(
            Report::from_error(Stage::Exact, &Error::EmptyFixedSet).status,
            Status::Infeasible
        );
    }

    #[test]
    fn invariant_violation_names_operator() {
        let err = Error::InvariantViolation {
            invariant: "operator norm at most 1",
            operator: "T".into(),
            residual: 0.5,
        };
        let r = Report::from_error(Stage::Extension, &err);
        assert_eq!(r.stage, Stage::Precondition);
        assert_eq!(r.result["invariant"], "operator norm at most 1");
        assert_eq!(r.result["operator"], "T");
        assert_eq!(r.result["error"], "invariant-violation");
    }

    #[test]
    fn keys_keep_declaration_order() {
        let text = Report::ok(json!({ "b": 1, "a": 2 })).to_json();
        let order: Vec<usize> = ["status", "stage", "result", "timing_ms", "tool_version"]
            .iter()
            .map(|k| text.find(&format!("\"{k}\"")).unwrap())
            .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn text_summary_flattens_result() {
        let r = Report::ok(json!({ "point": [0.0, 1.0], "inner": { "x": 1 } }));
        let text = r.to_text();
        assert!(text.contains("status: ok"));
        assert!(text.contains("point: [0.0,1.0]"));
        assert!(text.contains("inner.x: 1"));
    }
}
