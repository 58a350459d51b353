//! JSON formats.
//!
//! Matrices are nested row arrays whose entries are `[re, im]` pairs (a bare
//! number is read as a real entry).
//!
//! * channel: `{"d_in", "d_out", "kind": "kraus" | "choi", "data"}` where
//!   `data` is a list of `d_out × d_in` Kraus matrices or one Choi matrix
//!   (outcome leg first);
//! * experiment: `{"theta": [labels], "d", "states": {label: matrix}}`;
//! * verdict: `{"status", "residual", "iterations", "witness_choi"?}`;
//! * fingerprint: letter table plus a map from word keys (letter indices
//!   joined by `.`, the empty word is `""`) to `[re, im]`.
//!
//! Parse errors carry the JSON path of the offending field.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::channels::{ChoiMatrix, KrausChannel};
use crate::error::{Error, Result};
use crate::experiments::{CanonicalFingerprint, StatExperiment};
use crate::linalg::{c64, CMatrix, C64};
use crate::order::OrderVerdict;

fn format_err(path: &str, message: impl Into<String>) -> Error {
    Error::Format { path: if path.is_empty() { "$".into() } else { path.into() }, message: message.into() }
}

fn field<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| format_err(&format!("{path}.{key}"), "missing field"))
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| format_err(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| format_err(path, "expected an array"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| format_err(path, "expected a non-negative integer"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| format_err(path, "expected a number"))
}

fn entry_from_json(v: &Value, path: &str) -> Result<C64> {
    match v {
        Value::Number(_) => Ok(c64(as_f64(v, path)?, 0.0)),
        Value::Array(pair) if pair.len() == 2 => {
            Ok(c64(as_f64(&pair[0], &format!("{path}[0]"))?, as_f64(&pair[1], &format!("{path}[1]"))?))
        }
        _ => Err(format_err(path, "expected [re, im] or a number")),
    }
}

pub fn matrix_from_json(v: &Value, path: &str) -> Result<CMatrix> {
    let rows = as_array(v, path)?;
    if rows.is_empty() {
        return Err(format_err(path, "empty matrix"));
    }
    let mut parsed = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let rp = format!("{path}[{i}]");
        let cols = as_array(row, &rp)?;
        let entries =
            cols.iter().enumerate().map(|(j, e)| entry_from_json(e, &format!("{rp}[{j}]"))).collect::<Result<Vec<_>>>()?;
        if let Some(first) = parsed.first().map(Vec::len) {
            if entries.len() != first {
                return Err(format_err(&rp, format!("row has {} entries, expected {first}", entries.len())));
            }
        }
        parsed.push(entries);
    }
    let (r, c) = (parsed.len(), parsed[0].len());
    Ok(CMatrix::from_fn(r, c, |i, j| parsed[i][j]))
}

pub fn matrix_to_json(m: &CMatrix) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect())).collect())
}

fn expect_shape(m: &CMatrix, rows: usize, cols: usize, path: &str) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(format_err(path, format!("expected {rows}x{cols}, found {}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

/// Parsed channel file: Choi data is converted to a Kraus form.
pub fn channel_from_json(v: &Value) -> Result<KrausChannel> {
    let obj = as_object(v, "$")?;
    let d_in = as_usize(field(obj, "$", "d_in")?, "$.d_in")?;
    let d_out = as_usize(field(obj, "$", "d_out")?, "$.d_out")?;
    let kind = field(obj, "$", "kind")?.as_str().ok_or_else(|| format_err("$.kind", "expected a string"))?;
    let data = field(obj, "$", "data")?;
    match kind {
        "kraus" => {
            let ops = as_array(data, "$.data")?;
            if ops.is_empty() {
                return Err(format_err("$.data", "no Kraus operators"));
            }
            let mut kraus = Vec::with_capacity(ops.len());
            for (k, op) in ops.iter().enumerate() {
                let p = format!("$.data[{k}]");
                let m = matrix_from_json(op, &p)?;
                expect_shape(&m, d_out, d_in, &p)?;
                kraus.push(m);
            }
            KrausChannel::new(kraus).map_err(|e| format_err("$.data", e.to_string()))
        }
        "choi" => {
            let m = matrix_from_json(data, "$.data")?;
            expect_shape(&m, d_in * d_out, d_in * d_out, "$.data")?;
            let choi = ChoiMatrix::new(d_in, d_out, m).map_err(|e| format_err("$.data", e.to_string()))?;
            crate::channels::choi_to_kraus(&choi)
        }
        other => Err(format_err("$.kind", format!("unknown kind '{other}' (expected kraus or choi)"))),
    }
}

pub fn channel_to_json(ch: &KrausChannel) -> Value {
    json!({
        "d_in": ch.d_in(),
        "d_out": ch.d_out(),
        "kind": "kraus",
        "data": ch.kraus().iter().map(matrix_to_json).collect::<Vec<_>>(),
    })
}

pub fn choi_to_json(j: &ChoiMatrix) -> Value {
    json!({ "d_in": j.d_in(), "d_out": j.d_out(), "kind": "choi", "data": matrix_to_json(j.matrix()) })
}

pub fn experiment_from_json(v: &Value) -> Result<StatExperiment> {
    let obj = as_object(v, "$")?;
    let theta = as_array(field(obj, "$", "theta")?, "$.theta")?;
    let d = as_usize(field(obj, "$", "d")?, "$.d")?;
    let states = as_object(field(obj, "$", "states")?, "$.states")?;
    let mut labels = Vec::with_capacity(theta.len());
    let mut mats = Vec::with_capacity(theta.len());
    for (i, l) in theta.iter().enumerate() {
        let label = l.as_str().ok_or_else(|| format_err(&format!("$.theta[{i}]"), "expected a string"))?;
        let p = format!("$.states.{label}");
        let m = matrix_from_json(states.get(label).ok_or_else(|| format_err(&p, "missing state"))?, &p)?;
        expect_shape(&m, d, d, &p)?;
        labels.push(label.to_string());
        mats.push(m);
    }
    if let Some(extra) = states.keys().find(|k| !labels.contains(k)) {
        return Err(format_err(&format!("$.states.{extra}"), "label not listed in theta"));
    }
    StatExperiment::new(labels, mats).map_err(|e| format_err("$.states", e.to_string()))
}

pub fn experiment_to_json(e: &StatExperiment) -> Value {
    let states: Map<String, Value> =
        e.labels().iter().zip(e.states()).map(|(l, m)| (l.clone(), matrix_to_json(m))).collect();
    json!({ "theta": e.labels(), "d": e.dim(), "states": states })
}

pub fn verdict_to_json(v: &OrderVerdict) -> Value {
    let mut out = json!({ "status": v.status, "residual": v.residual, "iterations": v.iterations });
    if let Some(w) = &v.witness {
        out["witness_choi"] = choi_to_json(w);
    }
    out
}

pub fn fingerprint_to_json(f: &CanonicalFingerprint) -> Value {
    let values: Map<String, Value> =
        f.values.iter().map(|(w, v)| (CanonicalFingerprint::word_key(w), json!([v.re, v.im]))).collect();
    json!({ "depth": f.depth, "t_grid": f.t_grid, "letters": f.letters, "values": values })
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format_err(&path.display().to_string(), format!("cannot read: {e}")))?;
    serde_json::from_str(&text).map_err(|e| format_err(&path.display().to_string(), format!("malformed JSON: {e}")))
}

fn with_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Format { path: p, message } => Error::Format { path: format!("{}:{p}", path.display()), message },
        other => format_err(&path.display().to_string(), other.to_string()),
    })
}

pub fn read_channel(path: &Path) -> Result<KrausChannel> {
    with_file(path, channel_from_json(&read_json(path)?))
}

pub fn read_experiment(path: &Path) -> Result<StatExperiment> {
    with_file(path, experiment_from_json(&read_json(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels;

    #[test]
    fn channel_round_trip() {
        let ch = KrausChannel::completely_depolarizing(2);
        let back = channel_from_json(&channel_to_json(&ch)).unwrap();
        assert!(channels::choi_distance(&ch, &back).unwrap() < 1e-14);
        let j = channels::kraus_to_choi(&ch);
        let back = channel_from_json(&choi_to_json(&j)).unwrap();
        assert!(channels::choi_distance(&ch, &back).unwrap() < 1e-12);
    }

    #[test]
    fn errors_carry_paths() {
        let v: Value = serde_json::from_str(r#"{"d_in":2,"d_out":2,"kind":"kraus","data":[[[1,0],[0,"x"]]]}"#).unwrap();
        match channel_from_json(&v) {
            Err(Error::Format { path, .. }) => assert_eq!(path, "$.data[0][1][1]"),
            other => panic!("unexpected {other:?}"),
        }
        let v: Value = serde_json::from_str(r#"{"theta":["a"],"d":1}"#).unwrap();
        match experiment_from_json(&v) {
            Err(Error::Format { path, .. }) => assert_eq!(path, "$.states"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn experiment_round_trip() {
        let e = StatExperiment::new(
            vec!["b".into(), "a".into()],
            vec![crate::linalg::from_real_diagonal(&[1.0, 0.0]), crate::linalg::from_real_diagonal(&[0.5, 0.5])],
        )
        .unwrap();
        let back = experiment_from_json(&experiment_to_json(&e)).unwrap();
        assert_eq!(back.labels(), e.labels());
        assert_eq!(back.states(), e.states());
    }
}
