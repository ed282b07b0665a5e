//! Affine hybrid systems described by a `saltlib-affine-v1` JSON document.
//!
//! ```json
//! {
//!   "format": "saltlib-affine-v1",
//!   "modes": [{"name": "I", "A": [[0, 1], [0, 0]], "c": [0, -1]}],
//!   "transitions": [{
//!     "from": 0, "to": 0, "name": "bounce",
//!     "guard": {"normal": [1, 0], "offset": 0, "time_coeff": 0},
//!     "reset": {"M": [[1, 0], [0, -0.8]], "b": [0, 0]}
//!   }]
//! }
//! ```
//!
//! Flows are `A x + c`, guards `normal . x + offset + time_coeff t` and
//! resets `M x + b`. `name`, `offset`, `time_coeff` and `transitions` are
//! optional; unknown keys are rejected.

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::hybrid::{GuardSpec, HybridSystem, ModeId, ResetSpec, VectorFieldSpec};
use crate::linalg::{matrix_rows, Matrix, Vector};

pub const AFFINE_FORMAT: &str = "saltlib-affine-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct AffineMode {
    pub name: String,
    pub a: Matrix,
    pub c: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineTransition {
    pub name: String,
    pub from: usize,
    pub to: usize,
    pub normal: Vector,
    pub offset: f64,
    pub time_coeff: f64,
    pub m: Matrix,
    pub b: Vector,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineModel {
    pub modes: Vec<AffineMode>,
    pub transitions: Vec<AffineTransition>,
}

fn err(path: &str, msg: impl Into<String>) -> Error {
    Error::schema(if path.is_empty() { "/" } else { path }, msg)
}

fn object<'a>(v: &'a Value, path: &str, allowed: &[&str]) -> Result<&'a Map<String, Value>> {
    let obj = v.as_object().ok_or_else(|| err(path, "expected an object"))?;
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(err(&format!("{path}/{key}"), "unknown field"));
        }
    }
    Ok(obj)
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| err(&format!("{path}/{key}"), "missing required field"))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| err(path, "expected a finite number"))
}

fn index(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| err(path, "expected a non-negative integer"))
}

fn vector(v: &Value, path: &str, len: Option<usize>) -> Result<Vector> {
    let arr = v.as_array().ok_or_else(|| err(path, "expected an array of numbers"))?;
    if let Some(n) = len {
        if arr.len() != n {
            return Err(err(path, format!("expected length {n}, found {}", arr.len())));
        }
    }
    let vals = arr
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}/{i}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Vector::from_vec(vals))
}

fn matrix(v: &Value, path: &str, rows: Option<usize>, cols: Option<usize>) -> Result<Matrix> {
    let arr = v.as_array().ok_or_else(|| err(path, "expected an array of rows"))?;
    if let Some(r) = rows {
        if arr.len() != r {
            return Err(err(path, format!("expected {r} rows, found {}", arr.len())));
        }
    }
    if arr.is_empty() {
        return Err(err(path, "matrix has no rows"));
    }
    let mut out: Vec<Vector> = Vec::with_capacity(arr.len());
    let mut width = cols;
    for (i, row) in arr.iter().enumerate() {
        let r = vector(row, &format!("{path}/{i}"), width)?;
        width = Some(r.len());
        out.push(r);
    }
    let ncols = width.unwrap_or(0);
    if ncols == 0 {
        return Err(err(path, "matrix has no columns"));
    }
    Ok(Matrix::from_fn(out.len(), ncols, |i, j| out[i][j]))
}

impl AffineModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| err("", format!("invalid JSON: {e}")))?;
        Self::from_value(&doc)
    }

    pub fn from_value(doc: &Value) -> Result<Self> {
        let root = object(doc, "", &["format", "modes", "transitions"])?;
        let format = field(root, "format", "")?;
        match format.as_str() {
            Some(AFFINE_FORMAT) => {}
            Some(other) => return Err(err("/format", format!("unsupported format {other:?}"))),
            None => return Err(err("/format", "expected a string")),
        }
        let modes_v = field(root, "modes", "")?
            .as_array()
            .ok_or_else(|| err("/modes", "expected an array"))?;
        if modes_v.is_empty() {
            return Err(err("/modes", "at least one mode is required"));
        }
        let mut modes = Vec::with_capacity(modes_v.len());
        for (k, mv) in modes_v.iter().enumerate() {
            let path = format!("/modes/{k}");
            let obj = object(mv, &path, &["name", "A", "c"])?;
            let name = match obj.get("name") {
                None => format!("mode{k}"),
                Some(v) => v
                    .as_str()
                    .ok_or_else(|| err(&format!("{path}/name"), "expected a string"))?
                    .to_string(),
            };
            let a = matrix(field(obj, "A", &path)?, &format!("{path}/A"), None, None)?;
            if a.nrows() != a.ncols() {
                return Err(err(&format!("{path}/A"), "matrix must be square"));
            }
            let c = vector(field(obj, "c", &path)?, &format!("{path}/c"), Some(a.nrows()))?;
            modes.push(AffineMode { name, a, c });
        }

        let mut transitions = Vec::new();
        if let Some(tv) = root.get("transitions") {
            let arr = tv
                .as_array()
                .ok_or_else(|| err("/transitions", "expected an array"))?;
            for (k, t) in arr.iter().enumerate() {
                let path = format!("/transitions/{k}");
                let obj = object(t, &path, &["from", "to", "name", "guard", "reset"])?;
                let from = index(field(obj, "from", &path)?, &format!("{path}/from"))?;
                let to = index(field(obj, "to", &path)?, &format!("{path}/to"))?;
                for (key, m) in [("from", from), ("to", to)] {
                    if m >= modes.len() {
                        return Err(err(&format!("{path}/{key}"), format!("mode {m} does not exist")));
                    }
                }
                let (ni, nj) = (modes[from].c.len(), modes[to].c.len());
                let name = match obj.get("name") {
                    None => format!("t{k}"),
                    Some(v) => v
                        .as_str()
                        .ok_or_else(|| err(&format!("{path}/name"), "expected a string"))?
                        .to_string(),
                };
                let gpath = format!("{path}/guard");
                let guard = object(field(obj, "guard", &path)?, &gpath, &["normal", "offset", "time_coeff"])?;
                let normal = vector(field(guard, "normal", &gpath)?, &format!("{gpath}/normal"), Some(ni))?;
                let offset = guard
                    .get("offset")
                    .map(|v| number(v, &format!("{gpath}/offset")))
                    .transpose()?
                    .unwrap_or(0.0);
                let time_coeff = guard
                    .get("time_coeff")
                    .map(|v| number(v, &format!("{gpath}/time_coeff")))
                    .transpose()?
                    .unwrap_or(0.0);
                let rpath = format!("{path}/reset");
                let reset = object(field(obj, "reset", &path)?, &rpath, &["M", "b"])?;
                let m = matrix(field(reset, "M", &rpath)?, &format!("{rpath}/M"), Some(nj), Some(ni))?;
                let b = vector(field(reset, "b", &rpath)?, &format!("{rpath}/b"), Some(nj))?;
                transitions.push(AffineTransition {
                    name,
                    from,
                    to,
                    normal,
                    offset,
                    time_coeff,
                    m,
                    b,
                });
            }
        }
        Ok(AffineModel { modes, transitions })
    }

    pub fn to_value(&self) -> Value {
        let modes: Vec<Value> = self
            .modes
            .iter()
            .map(|m| {
                serde_json::json!({
                    "name": m.name,
                    "A": matrix_rows(&m.a),
                    "c": m.c.as_slice(),
                })
            })
            .collect();
        let transitions: Vec<Value> = self
            .transitions
            .iter()
            .map(|t| {
                serde_json::json!({
                    "name": t.name,
                    "from": t.from,
                    "to": t.to,
                    "guard": {
                        "normal": t.normal.as_slice(),
                        "offset": t.offset,
                        "time_coeff": t.time_coeff,
                    },
                    "reset": {"M": matrix_rows(&t.m), "b": t.b.as_slice()},
                })
            })
            .collect();
        serde_json::json!({
            "format": AFFINE_FORMAT,
            "modes": modes,
            "transitions": transitions,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("affine model serializes")
    }

    pub fn to_system(&self) -> HybridSystem {
        let mut sys = HybridSystem::new();
        for m in &self.modes {
            let (a1, a2, c) = (m.a.clone(), m.a.clone(), m.c.clone());
            sys.add_mode(
                m.name.clone(),
                VectorFieldSpec::new(c.len(), move |_, x| &a1 * x + &c)
                    .with_jacobian(move |_, _| a2.clone()),
            );
        }
        for t in &self.transitions {
            let (n1, n2) = (t.normal.clone(), t.normal.clone());
            let (off, tc) = (t.offset, t.time_coeff);
            sys.add_transition(
                t.name.clone(),
                ModeId(t.from),
                ModeId(t.to),
                GuardSpec::new(move |time, x| n1.dot(x) + off + tc * time)
                    .with_gradient(move |_, _| n2.clone())
                    .with_time_derivative(move |_, _| tc),
                ResetSpec::affine(t.m.clone(), t.b.clone()),
            );
        }
        sys
    }
}

pub fn load_affine(json: &str) -> Result<HybridSystem> {
    Ok(AffineModel::from_json(json)?.to_system())
}

/// One-mode bouncing point `p' = v, v' = -1` with the guard `p` and reset
/// `diag(1, -0.8)`, used as the LQR benchmark.
pub fn affine_bounce_benchmark() -> AffineModel {
    AffineModel {
        modes: vec![AffineMode {
            name: "flight".into(),
            a: Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            c: Vector::from_vec(vec![0.0, -1.0]),
        }],
        transitions: vec![AffineTransition {
            name: "bounce".into(),
            from: 0,
            to: 0,
            normal: Vector::from_vec(vec![1.0, 0.0]),
            offset: 0.0,
            time_coeff: 0.0,
            m: Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.8]),
            b: Vector::zeros(2),
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pointer(e: Error) -> String {
        match e {
            Error::Schema { pointer, .. } => pointer,
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn minimal_document() {
        let sys = load_affine(r#"{"format": "saltlib-affine-v1", "modes": [{"A": [[0]], "c": [1]}]}"#).unwrap();
        assert_eq!(sys.modes.len(), 1);
        assert!(sys.transitions.is_empty());
    }

    #[test]
    fn missing_format() {
        let e = AffineModel::from_json(r#"{"modes": [{"A": [[0]], "c": [1]}]}"#).unwrap_err();
        assert_eq!(pointer(e), "/format");
    }

    #[test]
    fn violations_report_pointer() {
        let cases = [
            (r#"{"format": "saltlib-affine-v1", "modes": [{"A": [[0, 1]], "c": [1]}]}"#, "/modes/0/A"),
            (r#"{"format": "saltlib-affine-v1", "modes": [{"A": [[0]], "c": [1, 2]}]}"#, "/modes/0/c"),
            (r#"{"format": "saltlib-affine-v1", "modes": [{"A": [["x"]], "c": [1]}]}"#, "/modes/0/A/0/0"),
            (r#"{"format": "saltlib-affine-v1", "modes": [{"A": [[0]], "c": [1], "d": 1}]}"#, "/modes/0/d"),
            (
                r#"{"format": "saltlib-affine-v1", "modes": [{"A": [[0]], "c": [1]}],
                   "transitions": [{"from": 0, "to": 3, "guard": {"normal": [1]}, "reset": {"M": [[1]], "b": [0]}}]}"#,
                "/transitions/0/to",
            ),
            (
                r#"{"format": "saltlib-affine-v1", "modes": [{"A": [[0]], "c": [1]}],
                   "transitions": [{"from": 0, "to": 0, "guard": {"normal": [1]}, "reset": {"b": [0]}}]}"#,
                "/transitions/0/reset/M",
            ),
            (r#"{"format": "other", "modes": []}"#, "/format"),
            (r#"[1, 2]"#, "/"),
        ];
        for (doc, expected) in cases {
            assert_eq!(pointer(AffineModel::from_json(doc).unwrap_err()), expected, "{doc}");
        }
    }

    #[test]
    fn json_round_trip() {
        let m = affine_bounce_benchmark();
        assert_eq!(AffineModel::from_json(&m.to_json()).unwrap(), m);
    }
}
