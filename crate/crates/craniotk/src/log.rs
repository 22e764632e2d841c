//! Line-delimited JSON events on stderr.

use std::io::Write;

use serde_json::{json, Value};

use crate::config::Settings;

pub fn emit(event: Value) {
    let line = serde_json::to_string(&event).expect("log event serializes");
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

/// Run header: command name and every resolved setting with its source.
pub fn header(command: &str, settings: &Settings<'_>) {
    let values: serde_json::Map<String, Value> =
        settings.resolved.iter().map(|(k, v, s)| (k.clone(), json!({ "value": v, "source": s.name() }))).collect();
    emit(json!({ "event": "start", "command": command, "version": env!("CARGO_PKG_VERSION"), "settings": values }));
}

pub fn case_done(case_id: &str, extra: Value) {
    emit(json!({ "event": "case", "case_id": case_id, "status": "ok", "detail": extra }));
}

pub fn case_failed(case_id: &str, error: &crate::Error) {
    emit(
        json!({ "event": "case", "case_id": case_id, "status": "failed", "kind": error.kind(), "message": error.to_string() }),
    );
}

pub fn error(error: &crate::Error) {
    emit(
        json!({ "event": "error", "kind": error.kind(), "exit_code": error.exit_code(), "message": error.to_string() }),
    );
}

pub fn done(command: &str, extra: Value) {
    emit(json!({ "event": "done", "command": command, "detail": extra }));
}
