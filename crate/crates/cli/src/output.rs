//! Machine-readable records: CSV with a fixed header or JSON lines.

use std::io::Write;

use prodnormal::exact::ProductParams;
use prodnormal::method::{Evaluation, Quantity};
use serde::Serialize;
use serde_json::value::RawValue;

/// Column order of CSV output. Changing it breaks downstream parsers.
pub const HEADER: [&str; 16] = [
    "method",
    "quantity",
    "mu_x",
    "mu_y",
    "sigma_x",
    "sigma_y",
    "rho",
    "input",
    "value",
    "valid",
    "reason",
    "n_used",
    "est_trunc_error",
    "scaled",
    "log_value",
    "standard_error",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// 17 significant digits, which round-trips every f64.
pub fn float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

/// A JSON number with 17 significant digits, or `null` when not finite.
fn json_float(v: f64) -> Box<RawValue> {
    let text = if v.is_finite() { float(v) } else { "null".into() };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

/// One output row.
#[derive(Debug, Clone)]
pub struct Record<'a> {
    pub method: &'a str,
    pub quantity: Quantity,
    pub params: ProductParams,
    pub eval: &'a Evaluation,
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    method: &'a str,
    quantity: &'a str,
    mu_x: Box<RawValue>,
    mu_y: Box<RawValue>,
    sigma_x: Box<RawValue>,
    sigma_y: Box<RawValue>,
    rho: Box<RawValue>,
    input: Box<RawValue>,
    value: Box<RawValue>,
    valid: bool,
    reason: &'a str,
    n_used: Option<usize>,
    est_trunc_error: Option<Box<RawValue>>,
    scaled: Option<bool>,
    log_value: Option<Box<RawValue>>,
    standard_error: Option<Box<RawValue>>,
}

impl Record<'_> {
    fn csv_fields(&self) -> Vec<String> {
        let p = &self.params;
        let d = &self.eval.diagnostics;
        let opt = |v: Option<f64>| v.map(float).unwrap_or_default();
        vec![
            self.method.to_string(),
            self.quantity.name().to_string(),
            float(p.mu_x()),
            float(p.mu_y()),
            float(p.sigma_x()),
            float(p.sigma_y()),
            float(p.rho()),
            float(self.eval.input),
            float(self.eval.value),
            self.eval.validity.valid.to_string(),
            self.eval.validity.reason.clone(),
            d.n_used.map(|n| n.to_string()).unwrap_or_default(),
            opt(d.est_trunc_error),
            d.scaled.map(|s| s.to_string()).unwrap_or_default(),
            opt(d.log_value),
            opt(d.standard_error),
        ]
    }

    fn json(&self) -> JsonRecord<'_> {
        let p = &self.params;
        let d = &self.eval.diagnostics;
        JsonRecord {
            method: self.method,
            quantity: self.quantity.name(),
            mu_x: json_float(p.mu_x()),
            mu_y: json_float(p.mu_y()),
            sigma_x: json_float(p.sigma_x()),
            sigma_y: json_float(p.sigma_y()),
            rho: json_float(p.rho()),
            input: json_float(self.eval.input),
            value: json_float(self.eval.value),
            valid: self.eval.validity.valid,
            reason: &self.eval.validity.reason,
            n_used: d.n_used,
            est_trunc_error: d.est_trunc_error.map(json_float),
            scaled: d.scaled,
            log_value: d.log_value.map(json_float),
            standard_error: d.standard_error.map(json_float),
        }
    }
}

/// Writes `records` in `format`, CSV with its header row.
pub fn write_records<W: Write>(out: W, format: Format, records: &[Record<'_>]) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(HEADER)?;
            for r in records {
                w.write_record(r.csv_fields())?;
            }
            w.flush()
        }
        Format::Json => {
            let mut out = out;
            for r in records {
                serde_json::to_writer(&mut out, &r.json())?;
                out.write_all(b"\n")?;
            }
            out.flush()
        }
    }
}
