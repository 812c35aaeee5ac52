//! Turning model output into a [`Decision`].

use serde_json::Value;
use thiserror::Error;

use super::{Decision, DecisionFlags, PolicyTag};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("no JSON object found in model output")]
    NoJson,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}`: {reason}")]
    Malformed { field: &'static str, reason: String },
    #[error("field `{field}`: expected {want_rows}x{want_cols}, got {got}")]
    Dimensions {
        field: &'static str,
        want_rows: usize,
        want_cols: usize,
        got: String,
    },
}

/// Byte range of the balanced `{...}` starting at `start`, honouring JSON
/// string escapes.
fn balanced_object(text: &str, start: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Well-formed JSON objects embedded in `text`, in order (prose, code fences
/// and trailing chatter are skipped).
fn json_objects(text: &str) -> impl Iterator<Item = (&str, Value)> {
    let mut from = 0;
    std::iter::from_fn(move || {
        while let Some(off) = text[from..].find('{') {
            let start = from + off;
            from = start + 1;
            if let Some(end) = balanced_object(text, start) {
                let candidate = &text[start..end];
                if let Ok(v) = serde_json::from_str::<Value>(candidate) {
                    if v.is_object() {
                        from = end;
                        return Some((candidate, v));
                    }
                }
            }
        }
        None
    })
}

/// First well-formed JSON object embedded in `text`.
pub fn extract_json_object(text: &str) -> Option<&str> {
    json_objects(text).next().map(|(s, _)| s)
}

/// The first object carrying both matrices, else the first object at all.
fn decision_object(text: &str) -> Option<Value> {
    let mut first = None;
    for (_, v) in json_objects(text) {
        if v.get("w").is_some() && v.get("a").is_some() {
            return Some(v);
        }
        first.get_or_insert(v);
    }
    first
}

/// Reads an `rows × cols` matrix. A one-element row is broadcast across
/// the columns. Returns whether anything had to be clamped into [0, 1].
fn read_matrix(v: &Value, field: &'static str, rows: usize, cols: usize) -> Result<(Vec<Vec<f64>>, bool), ParseError> {
    let dims_err = |got: String| ParseError::Dimensions {
        field,
        want_rows: rows,
        want_cols: cols,
        got,
    };
    let outer = v.as_array().ok_or_else(|| ParseError::Malformed {
        field,
        reason: "not an array".into(),
    })?;
    if outer.len() != rows {
        return Err(dims_err(format!("{} rows", outer.len())));
    }
    let mut clamped = false;
    let mut out = Vec::with_capacity(rows);
    for (r, row) in outer.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| ParseError::Malformed {
            field,
            reason: format!("row {r} is not an array"),
        })?;
        let vals: Vec<f64> = row
            .iter()
            .map(|x| {
                x.as_f64().ok_or_else(|| ParseError::Malformed {
                    field,
                    reason: format!("row {r}: non-numeric entry {x}"),
                })
            })
            .collect::<Result<_, _>>()?;
        let vals = match vals.len() {
            n if n == cols => vals,
            1 => vec![vals[0]; cols],
            n => return Err(dims_err(format!("{n} columns in row {r}"))),
        };
        let fixed: Vec<f64> = vals
            .iter()
            .map(|&x| {
                let c = x.clamp(0.0, 1.0);
                clamped |= c != x;
                c
            })
            .collect();
        out.push(fixed);
    }
    Ok((out, clamped))
}

/// Parses `{"w": [[...]], "a": [[...]]}` for `vehicle_ids.len() × num_types`.
/// Entries are clamped into [0, 1], CPU share on non-offloaded work is
/// dropped, and an over-budget allocation is rescaled to sum to 1; each
/// repair sets the matching flag.
pub fn parse_decision(text: &str, vehicle_ids: &[u64], num_types: usize, slot: u64) -> Result<Decision, ParseError> {
    let v = decision_object(text).ok_or(ParseError::NoJson)?;
    let rows = vehicle_ids.len();
    let w_v = v.get("w").ok_or(ParseError::MissingField("w"))?;
    let a_v = v.get("a").ok_or(ParseError::MissingField("a"))?;
    let (w, cw) = read_matrix(w_v, "w", rows, num_types)?;
    let (mut a, ca) = read_matrix(a_v, "a", rows, num_types)?;
    let mut flags = DecisionFlags {
        clamped: cw || ca,
        ..DecisionFlags::default()
    };
    for (wr, ar) in w.iter().zip(a.iter_mut()) {
        for (wx, ax) in wr.iter().zip(ar.iter_mut()) {
            if *wx <= 0.0 && *ax > 0.0 {
                *ax = 0.0;
                flags.clamped = true;
            }
        }
    }
    let sum: f64 = a.iter().flatten().sum();
    if sum > 1.0 {
        for x in a.iter_mut().flatten() {
            *x /= sum;
        }
        flags.rescaled = true;
        let after: f64 = a.iter().flatten().sum();
        if after > 1.0 {
            // one ulp over after division: shave it off
            for x in a.iter_mut().flatten() {
                *x *= 1.0 - 1e-12;
            }
        }
    }
    let d = Decision {
        slot,
        vehicle_ids: vehicle_ids.to_vec(),
        offload: w,
        alloc: a,
        policy: PolicyTag::Llm,
        flags,
    };
    d.validate(num_types).map_err(|e| ParseError::Malformed {
        field: "decision",
        reason: e.to_string(),
    })?;
    Ok(d)
}
