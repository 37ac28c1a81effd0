//! Trace persistence.
//!
//! CSV layout:
//!
//! ```text
//! # problem = lj13            <- run header, one `# key = value` per line
//! # ...
//! iteration,rho_n,rho_cost,objective,target_norm
//! 0,-4.0758513484036863e1,...
//! # status = max_steps        <- footer
//! # steps = 10000
//! # final = <space separated final point>
//! ```
//!
//! Reals are written as `{:.16e}`, which round-trips every `f64`. The target
//! columns are `t1..tn` when the problem has at most five variables and a
//! single `target_norm` otherwise.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::harness::config::TraceFileFormat;
use crate::mlpf::{OptimizationTrace, Status, TraceRow};

const FIXED_COLUMNS: [&str; 4] = ["iteration", "rho_n", "rho_cost", "objective"];

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_real(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::TraceFormat(format!("`{s}` is not a number")))
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

/// Names of the target columns for a trace.
pub fn target_columns(trace: &OptimizationTrace) -> Vec<String> {
    if trace.logs_full_targets() {
        (1..=trace.final_point.len())
            .map(|k| format!("t{k}"))
            .collect()
    } else {
        vec!["target_norm".to_string()]
    }
}

pub fn to_csv(trace: &OptimizationTrace) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (k, v) in &trace.header {
        out.extend_from_slice(format!("# {k} = {}\n", one_line(v)).as_bytes());
    }
    let targets = target_columns(trace);
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut head: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
        head.extend(targets.iter().cloned());
        w.write_record(&head).map_err(csv_err)?;
        for row in &trace.rows {
            if row.targets.len() != targets.len() {
                return Err(Error::TraceFormat(format!(
                    "row {} has {} targets, expected {}",
                    row.iteration,
                    row.targets.len(),
                    targets.len()
                )));
            }
            let mut rec = vec![
                row.iteration.to_string(),
                fmt_real(row.rho_n),
                fmt_real(row.rho_cost),
                fmt_real(row.objective),
            ];
            rec.extend(row.targets.iter().map(|v| fmt_real(*v)));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
    }
    let fin: Vec<String> = trace.final_point.iter().map(|v| fmt_real(*v)).collect();
    out.extend_from_slice(format!("# status = {}\n", trace.status).as_bytes());
    out.extend_from_slice(format!("# steps = {}\n", trace.steps).as_bytes());
    out.extend_from_slice(format!("# final = {}\n", fin.join(" ")).as_bytes());
    if let Some(m) = &trace.message {
        out.extend_from_slice(format!("# message = {}\n", one_line(m)).as_bytes());
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::TraceFormat(e.to_string())
}

pub fn from_csv(text: &str) -> Result<OptimizationTrace> {
    let mut header = Vec::new();
    let mut footer = Vec::new();
    let mut seen_data = false;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| Error::TraceFormat(format!("bad comment line `{line}`")))?;
            let pair = (k.trim().to_string(), v.trim().to_string());
            if seen_data {
                footer.push(pair);
            } else {
                header.push(pair);
            }
        } else if !line.trim().is_empty() {
            seen_data = true;
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let columns: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if columns.len() < FIXED_COLUMNS.len() + 1 || columns[..4] != FIXED_COLUMNS {
        return Err(Error::TraceFormat(format!(
            "unexpected columns {columns:?}"
        )));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != columns.len() {
            return Err(Error::TraceFormat(format!(
                "row has {} fields, expected {}",
                rec.len(),
                columns.len()
            )));
        }
        let iteration = rec[0]
            .parse()
            .map_err(|_| Error::TraceFormat(format!("bad iteration `{}`", &rec[0])))?;
        rows.push(TraceRow {
            iteration,
            rho_n: parse_real(&rec[1])?,
            rho_cost: parse_real(&rec[2])?,
            objective: parse_real(&rec[3])?,
            targets: rec.iter().skip(4).map(parse_real).collect::<Result<_>>()?,
        });
    }
    let get = |key: &str| {
        footer
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::TraceFormat(format!("missing footer `{key}`")))
    };
    let status: Status = get("status")?.parse()?;
    let steps = get("steps")?
        .parse()
        .map_err(|_| Error::TraceFormat("bad step count".into()))?;
    let final_point = get("final")?
        .split_whitespace()
        .map(parse_real)
        .collect::<Result<Vec<_>>>()?;
    let message = get("message").ok().map(str::to_string);
    Ok(OptimizationTrace {
        header,
        rows,
        status,
        steps,
        final_point,
        message,
    })
}

/// JSON numbers cannot hold NaN or infinities; those become strings.
fn real_value(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::String(fmt_real(v))
    }
}

fn value_real(v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| Error::TraceFormat(format!("bad number {n}"))),
        Value::String(s) => parse_real(s),
        other => Err(Error::TraceFormat(format!(
            "expected a number, got {other}"
        ))),
    }
}

pub fn to_json(trace: &OptimizationTrace) -> Result<Vec<u8>> {
    let mut header = Map::new();
    for (k, v) in &trace.header {
        header.insert(k.clone(), Value::String(v.clone()));
    }
    let columns = target_columns(trace);
    let rows: Vec<Value> = trace
        .rows
        .iter()
        .map(|r| {
            json!({
                "iteration": r.iteration,
                "rho_n": real_value(r.rho_n),
                "rho_cost": real_value(r.rho_cost),
                "objective": real_value(r.objective),
                "targets": r.targets.iter().map(|v| real_value(*v)).collect::<Vec<_>>(),
            })
        })
        .collect();
    let doc = json!({
        "header": header,
        "target_columns": columns,
        "rows": rows,
        "status": trace.status.as_str(),
        "steps": trace.steps,
        "final_point": trace.final_point.iter().map(|v| real_value(*v)).collect::<Vec<_>>(),
        "message": trace.message,
    });
    let mut out = serde_json::to_vec_pretty(&doc)?;
    out.push(b'\n');
    Ok(out)
}

pub fn from_json(text: &str) -> Result<OptimizationTrace> {
    let doc: Value = serde_json::from_str(text)?;
    let field = |k: &str| {
        doc.get(k)
            .ok_or_else(|| Error::TraceFormat(format!("missing field `{k}`")))
    };
    let header = field("header")?
        .as_object()
        .ok_or_else(|| Error::TraceFormat("header is not an object".into()))?
        .iter()
        .map(|(k, v)| (k.clone(), v.as_str().unwrap_or_default().to_string()))
        .collect();
    let reals = |v: &Value| -> Result<Vec<f64>> {
        v.as_array()
            .ok_or_else(|| Error::TraceFormat("expected an array".into()))?
            .iter()
            .map(value_real)
            .collect()
    };
    let mut rows = Vec::new();
    for r in field("rows")?
        .as_array()
        .ok_or_else(|| Error::TraceFormat("rows is not an array".into()))?
    {
        let get = |k: &str| {
            r.get(k)
                .ok_or_else(|| Error::TraceFormat(format!("row lacks `{k}`")))
        };
        rows.push(TraceRow {
            iteration: get("iteration")?
                .as_u64()
                .ok_or_else(|| Error::TraceFormat("bad iteration".into()))?
                as usize,
            rho_n: value_real(get("rho_n")?)?,
            rho_cost: value_real(get("rho_cost")?)?,
            objective: value_real(get("objective")?)?,
            targets: reals(get("targets")?)?,
        });
    }
    let status: Status = field("status")?
        .as_str()
        .ok_or_else(|| Error::TraceFormat("status is not a string".into()))?
        .parse()?;
    Ok(OptimizationTrace {
        header,
        rows,
        status,
        steps: field("steps")?
            .as_u64()
            .ok_or_else(|| Error::TraceFormat("bad step count".into()))? as usize,
        final_point: reals(field("final_point")?)?,
        message: field("message")?.as_str().map(str::to_string),
    })
}

/// Writes a trace in the given format, creating parent directories.
pub fn emit_trace(trace: &OptimizationTrace, path: &Path, format: TraceFileFormat) -> Result<()> {
    let bytes = match format {
        TraceFileFormat::Csv => to_csv(trace)?,
        TraceFileFormat::Json => to_json(trace)?,
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads a trace, picking the format from the extension.
pub fn read_trace(path: &Path) -> Result<OptimizationTrace> {
    let text = fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => from_json(&text),
        _ => from_csv(&text),
    }
}
