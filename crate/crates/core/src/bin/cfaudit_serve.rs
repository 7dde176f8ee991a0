//! Serve a saved model over the external-adapter protocol on stdin/stdout.
//!
//! Usage: `cfaudit-serve model.json`

use std::io::{BufRead, Write};
use std::process::ExitCode;

use ndarray::Array2;
use serde_json::{json, Value};

use cfaudit::{ClassifierHandle, EncodedMatrix};

fn predict(model: &ClassifierHandle, msg: &Value) -> Result<Value, String> {
    let rows = msg.get("rows").and_then(Value::as_array).ok_or("predict needs a rows array")?;
    let width = model.column_map().len();
    let mut flat = Vec::with_capacity(rows.len() * width);
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_array().ok_or_else(|| format!("row {i} is not an array"))?;
        if r.len() != width {
            return Err(format!("row {i} has {} values, expected {width}", r.len()));
        }
        for v in r {
            flat.push(v.as_f64().ok_or_else(|| format!("row {i} has a non-number"))?);
        }
    }
    let matrix = Array2::from_shape_vec((rows.len(), width), flat).map_err(|e| e.to_string())?;
    let x = EncodedMatrix::new(matrix, model.column_map().clone()).map_err(|e| e.to_string())?;
    let (labels, probas) = model.predict_with_proba(&x).map_err(|e| e.to_string())?;
    Ok(json!({"labels": labels, "probas": probas}))
}

fn main() -> ExitCode {
    let Some(path) = std::env::args().nth(1) else {
        eprintln!("usage: cfaudit-serve MODEL.json");
        return ExitCode::from(1);
    };
    let model = match ClassifierHandle::load(&path) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let labels = model.column_map().labels();
    let stdin = std::io::stdin();
    let mut out = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let msg: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("malformed request: {e}");
                return ExitCode::from(2);
            }
        };
        let reply = match msg.get("op").and_then(Value::as_str) {
            Some("hello") => {
                let cols: Option<Vec<String>> = msg
                    .get("columns")
                    .and_then(|c| serde_json::from_value(c.clone()).ok());
                if cols.as_ref() == Some(&labels) {
                    json!({"ok": true})
                } else {
                    json!({"ok": false, "error": "column map differs from the model's"})
                }
            }
            Some("predict") => match predict(&model, &msg) {
                Ok(v) => v,
                Err(e) => json!({"error": e}),
            },
            Some("bye") => break,
            _ => json!({"error": "unknown op"}),
        };
        if writeln!(out, "{reply}").and_then(|_| out.flush()).is_err() {
            break;
        }
    }
    ExitCode::SUCCESS
}
