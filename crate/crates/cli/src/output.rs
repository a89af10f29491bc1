use std::fmt::Write as _;

use nv_readout::{LadderStep, Params, Readout, SweepTable};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// Common header of every result: the resolved parameter set is flattened
/// into the same object as the result fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<B> {
    pub schema_version: u32,
    pub tool: String,
    pub command: String,
    pub units: String,
    #[serde(flatten)]
    pub params: Params,
    #[serde(flatten)]
    pub body: B,
}

impl<B> Envelope<B> {
    pub fn new(command: &str, units: &str, params: Params, body: B) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: format!("nv-readout {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            units: units.to_string(),
            params,
            body,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrBody {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(flatten)]
    pub readout: Readout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumBody {
    #[serde(rename = "PF_opt", default, skip_serializing_if = "Option::is_none")]
    pub pf: Option<f64>,
    #[serde(rename = "T_opt")]
    pub t: f64,
    pub snr: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub flat: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ladder: Vec<LadderStep<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitPolBody {
    pub pump_duration: f64,
    pub wait_duration: f64,
    pub polarization: f64,
}

pub fn json<B: Serialize>(env: &Envelope<B>) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(env)?;
    s.push('\n');
    Ok(s)
}

/// Fixed-width scientific notation, 11 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.10e}")
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Number(n) => Some(match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.to_string(),
            (None, Some(i)) => i.to_string(),
            _ => num(n.as_f64().unwrap_or(f64::NAN)),
        }),
        Value::Bool(b) => Some(u8::from(*b).to_string()),
        _ => None,
    }
}

fn provenance_line(out: &mut String, key: &str, value: &Value) {
    let v = match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    let _ = writeln!(out, "# {key}: {v}");
}

/// One-row CSV: strings and the parameter set go into `#` lines, numeric and
/// boolean result fields into the header and the single data row. Nested
/// arrays such as the saturation ladder are only available as JSON.
pub fn record_csv<B: Serialize>(env: &Envelope<B>) -> serde_json::Result<String> {
    let Value::Object(all) = serde_json::to_value(env)? else {
        unreachable!("envelope serializes to an object")
    };
    let Value::Object(body) = serde_json::to_value(&env.body)? else {
        unreachable!("result bodies serialize to objects")
    };
    let mut out = String::new();
    let mut header = Vec::new();
    let mut row = Vec::new();
    for (key, value) in &all {
        if !body.contains_key(key) {
            provenance_line(&mut out, key, value);
        }
    }
    for (key, value) in &body {
        match scalar(value) {
            Some(s) => {
                header.push(key.as_str());
                row.push(s);
            }
            None if value.is_string() => provenance_line(&mut out, key, value),
            None => {}
        }
    }
    let _ = writeln!(out, "{}", header.join(","));
    let _ = writeln!(out, "{}", row.join(","));
    Ok(out)
}

pub fn table_csv(env: &Envelope<SweepTable>) -> String {
    let mut out = String::new();
    let t = &env.body;
    let _ = writeln!(out, "# schema_version: {}", env.schema_version);
    let _ = writeln!(out, "# command: {}", env.command);
    let _ = writeln!(out, "# units: {}", env.units);
    for (k, v) in &t.provenance {
        let _ = writeln!(out, "# {k}: {v}");
    }
    if !t.failed_rows.is_empty() {
        let rows: Vec<String> = t.failed_rows.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(out, "# failed_rows (value 0): {}", rows.join(" "));
    }
    let _ = writeln!(out, "{}", t.columns.join(","));
    for row in &t.rows {
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Gnuplot script plotting `data_file` (a path relative to the script).
pub fn gnuplot_script(table: &SweepTable, data_file: &str) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnheader\n");
    let c = &table.columns;
    if c.len() == 2 {
        if let Some((_, scale)) = table
            .provenance
            .iter()
            .find(|(k, _)| k.starts_with("axis."))
        {
            if scale.ends_with("log") {
                s.push_str("set logscale x\n");
            }
        }
        let _ = writeln!(s, "set xlabel '{}'\nset ylabel '{}'", c[0], c[1]);
        let _ = writeln!(s, "plot '{data_file}' using 1:2 with lines");
    } else {
        let _ = writeln!(
            s,
            "set xlabel '{}'\nset ylabel '{}'\nset cblabel '{}'",
            c[0], c[1], c[2]
        );
        s.push_str("set view map\n");
        let _ = writeln!(
            s,
            "plot '{data_file}' using 1:2:3 with points pointtype 5 pointsize 0.6 palette"
        );
    }
    s.push_str("pause mouse close\n");
    s
}
