//! The JSON report printed once per invocation, and the exit-code mapping.

use serde::Serialize;
use serde_json::{Map, Value};

use roesser2d::{Error, Roesser2D};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_INDETERMINATE: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(severity: Severity, code: impl Into<String>, message: impl Into<String>) -> Self {
        Self { severity, code: code.into(), message: message.into() }
    }

    pub fn from_error(e: &Error) -> Self {
        Self::new(Severity::Error, e.code(), e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub n_h: usize,
    pub n_v: usize,
    pub m: usize,
    pub p: usize,
    pub rank_e: usize,
}

impl ModelSummary {
    pub fn of(model: &Roesser2D) -> Self {
        let d = model.dims();
        Self { n_h: d.n_h, n_v: d.n_v, m: d.m, p: d.p, rank_e: model.rank_e() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub model_summary: Option<ModelSummary>,
    pub result: Value,
    pub diagnostics: Vec<Diagnostic>,
    pub timing_ms: f64,
}

impl Report {
    pub fn status(&self) -> &str {
        self.result.get("status").and_then(Value::as_str).unwrap_or("error")
    }

    pub fn exit_code(&self) -> i32 {
        exit_code_for(self.status())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn exit_code_for(status: &str) -> i32 {
    match status {
        "valid" | "admissible" | "feasible" | "verified" | "completed" | "consistent" => EXIT_OK,
        "not_admissible" | "infeasible" | "not_verified" | "diverged" | "inconsistent" => EXIT_NEGATIVE,
        "indeterminate" | "recovery_inconsistent" => EXIT_INDETERMINATE,
        _ => EXIT_INPUT,
    }
}

/// Serializes `payload` (an object) and sets its `status` key.
pub fn with_status<T: Serialize>(status: &str, payload: &T) -> Value {
    let mut obj = match serde_json::to_value(payload).expect("payload serializes") {
        Value::Object(o) => o,
        other => {
            let mut o = Map::new();
            o.insert("value".into(), other);
            o
        }
    };
    obj.insert("status".into(), Value::String(status.into()));
    Value::Object(obj)
}

pub fn error_result(e: &Error) -> Value {
    serde_json::json!({ "status": "error", "error_code": e.code() })
}
