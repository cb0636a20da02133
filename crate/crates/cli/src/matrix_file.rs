//! Matrix files: CSV of decimal fixed-point literals, or JSON.
//!
//! JSON takes `{"rows": [[entry, ...], ...]}` (or a bare array of rows),
//! where an entry is a number, a decimal string, or
//! `{"mantissa": m, "exp": e}` for `m * 2^e`. Rows index inputs and columns
//! index outputs.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;
#[cfg(test)]
use serde_json::json;
use shiftadd::{Dyadic, Matrix};

pub fn parse_csv(text: &str, max_frac_bits: u32) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| format!("row {}", r + 1))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, s)| Dyadic::parse_decimal(s, max_frac_bits).with_context(|| format!("row {}, column {}", r + 1, c + 1)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Matrix::from_rows(rows)?)
}

fn parse_entry(v: &Value, max_frac_bits: u32) -> Result<Dyadic> {
    match v {
        Value::Number(n) => Ok(Dyadic::parse_decimal(&n.to_string(), max_frac_bits)?),
        Value::String(s) => Ok(Dyadic::parse_decimal(s, max_frac_bits)?),
        Value::Object(o) => {
            let m = o.get("mantissa").ok_or_else(|| anyhow!("entry lacks `mantissa`"))?;
            let e = o.get("exp").and_then(Value::as_i64).ok_or_else(|| anyhow!("entry lacks an integer `exp`"))?;
            let m: Dyadic = match m {
                Value::Number(n) if n.is_i64() => Dyadic::from_int(n.as_i64().unwrap()),
                Value::String(s) if !s.contains('.') => s.parse()?,
                _ => bail!("`mantissa` must be an integer"),
            };
            let e = i32::try_from(e).context("`exp` out of range")?;
            Ok(m.shl(e))
        }
        _ => bail!("unsupported matrix entry {v}"),
    }
}

pub fn parse_json(text: &str, max_frac_bits: u32) -> Result<Matrix> {
    let root: Value = serde_json::from_str(text)?;
    let rows = match &root {
        Value::Array(_) => &root,
        Value::Object(o) => o.get("rows").ok_or_else(|| anyhow!("missing `rows`"))?,
        _ => bail!("expected an object or an array of rows"),
    };
    let rows = rows.as_array().ok_or_else(|| anyhow!("`rows` is not an array"))?;
    let parsed = rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row.as_array()
                .ok_or_else(|| anyhow!("row {} is not an array", r + 1))?
                .iter()
                .map(|v| parse_entry(v, max_frac_bits))
                .collect::<Result<Vec<_>>>()
                .with_context(|| format!("row {}", r + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_rows(parsed)?)
}

/// JSON when the extension is `.json` or the text starts like JSON.
pub fn read(path: &Path, max_frac_bits: u32) -> Result<Matrix> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
        || text.trim_start().starts_with(['{', '[']);
    let m = if is_json { parse_json(&text, max_frac_bits) } else { parse_csv(&text, max_frac_bits) };
    m.with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
pub fn to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(Dyadic::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
pub fn to_json(m: &Matrix) -> String {
    let rows: Vec<Vec<Value>> = (0..m.rows())
        .map(|r| {
            m.row(r)
                .iter()
                .map(|v| {
                    let mant = v.mantissa().to_string();
                    let mant = mant.parse::<i64>().map_or(json!(mant), |i| json!(i));
                    json!({ "mantissa": mant, "exp": v.exp() })
                })
                .collect()
        })
        .collect();
    serde_json::to_string_pretty(&json!({ "rows": rows })).expect("plain json")
}
