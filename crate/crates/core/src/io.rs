//! Problem and point files, and a deterministic JSON writer.
//!
//! Problem files are JSON objects with keys `p`, `weights`, `lower`, `upper`,
//! `ineq`, `eq`, `quad_ineq`, and optionally `objective_gradient` or
//! `objective_linear`. Infinite bounds are the strings `"inf"`/`"-inf"`.
//! Points are plain JSON arrays.

use std::sync::Arc;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{ExtBound, Exponent, MeasureSpace, Problem, QuadraticConstraint, SimpleFunction};
use crate::serde_ext::parse_ext;

/// How the objective enters a problem file.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `f'(x̄)` at the query point.
    Gradient(SimpleFunction),
    /// `f(x) = ⟨z, x⟩`.
    Linear(SimpleFunction),
}

impl Objective {
    /// Representer of `f'(x̄)`; for a linear objective this is `z`.
    pub fn gradient(&self) -> &SimpleFunction {
        match self {
            Objective::Gradient(g) | Objective::Linear(g) => g,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub problem: Problem,
    pub objective: Option<Objective>,
}

const KEYS: [&str; 9] = [
    "p",
    "weights",
    "lower",
    "upper",
    "ineq",
    "eq",
    "quad_ineq",
    "objective_gradient",
    "objective_linear",
];

fn parse_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        field: field.into(),
        message: message.into(),
    }
}

fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| {
        parse_err(
            format!("line {} column {}", e.line(), e.column()),
            format!("malformed JSON: {e}"),
        )
    })
}

fn number(v: &Value, field: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| parse_err(field, "expected a number"))
}

fn ext_number(v: &Value, field: &str) -> Result<f64> {
    match v {
        Value::String(s) => parse_ext(s).ok_or_else(|| parse_err(field, format!("expected \"inf\" or \"-inf\", found \"{s}\""))),
        _ => v.as_f64().ok_or_else(|| parse_err(field, "expected a number or \"inf\"/\"-inf\"")),
    }
}

fn array<'a>(v: &'a Value, field: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| parse_err(field, "expected an array"))
}

fn numbers(v: &Value, field: &str, len: Option<usize>, ext: bool) -> Result<Vec<f64>> {
    let items = array(v, field)?;
    if let Some(n) = len {
        if items.len() != n {
            return Err(parse_err(field, format!("expected {n} entries, found {}", items.len())));
        }
    }
    items
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = format!("{field}[{i}]");
            if ext {
                ext_number(x, &f)
            } else {
                number(x, &f)
            }
        })
        .collect()
}

fn object<'a>(v: &'a Value, field: &str, keys: &[&str]) -> Result<&'a Map<String, Value>> {
    let obj = v.as_object().ok_or_else(|| parse_err(field, "expected an object"))?;
    if let Some(k) = obj.keys().find(|k| !keys.contains(&k.as_str())) {
        return Err(parse_err(format!("{field}.{k}"), "unknown key"));
    }
    Ok(obj)
}

fn required<'a>(obj: &'a Map<String, Value>, field: &str, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| parse_err(format!("{field}.{key}"), "missing"))
}

/// Parse a problem file.
pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    let root = parse_json(text)?;
    let obj = object(&root, "problem", &KEYS)?;
    let weights = numbers(required(obj, "problem", "weights")?, "weights", None, false)?;
    let m = weights.len();
    let space = MeasureSpace::new(weights)?;
    let p = match obj.get("p") {
        None => Exponent::Finite(2.0),
        Some(v) => Exponent::new(ext_number(v, "p")?)?,
    };
    let bound = |key: &str, default: f64| -> Result<ExtBound> {
        match obj.get(key) {
            None => Ok(ExtBound::constant(m, default)),
            Some(v) => ExtBound::new(numbers(v, key, Some(m), true)?),
        }
    };
    let mut b = Problem::builder(space)
        .exponent(p)
        .bounds(bound("lower", f64::NEG_INFINITY)?, bound("upper", f64::INFINITY)?);
    if let Some(v) = obj.get("ineq") {
        for (i, c) in array(v, "ineq")?.iter().enumerate() {
            let f = format!("ineq[{i}]");
            let c = object(c, &f, &["g", "a"])?;
            let g = numbers(required(c, &f, "g")?, &format!("{f}.g"), Some(m), false)?;
            b = b.inequality(g, number(required(c, &f, "a")?, &format!("{f}.a"))?);
        }
    }
    if let Some(v) = obj.get("eq") {
        for (j, c) in array(v, "eq")?.iter().enumerate() {
            let f = format!("eq[{j}]");
            let c = object(c, &f, &["h", "b"])?;
            let h = numbers(required(c, &f, "h")?, &format!("{f}.h"), Some(m), false)?;
            b = b.equality(h, number(required(c, &f, "b")?, &format!("{f}.b"))?);
        }
    }
    if let Some(v) = obj.get("quad_ineq") {
        for (i, c) in array(v, "quad_ineq")?.iter().enumerate() {
            let f = format!("quad_ineq[{i}]");
            let c = object(c, &f, &["Q", "q", "c"])?;
            let rows = array(required(c, &f, "Q")?, &format!("{f}.Q"))?;
            if rows.len() != m {
                return Err(parse_err(format!("{f}.Q"), format!("expected {m} rows, found {}", rows.len())));
            }
            let q_matrix = rows
                .iter()
                .enumerate()
                .map(|(r, row)| numbers(row, &format!("{f}.Q[{r}]"), Some(m), false))
                .collect::<Result<Vec<_>>>()?;
            let q = numbers(required(c, &f, "q")?, &format!("{f}.q"), Some(m), false)?;
            let cst = number(required(c, &f, "c")?, &format!("{f}.c"))?;
            b = b.nonlinear(Arc::new(QuadraticConstraint {
                q_matrix,
                q: q.into(),
                c: cst,
            }));
        }
    }
    let objective = match (obj.get("objective_gradient"), obj.get("objective_linear")) {
        (Some(_), Some(_)) => {
            return Err(parse_err(
                "objective_gradient",
                "give at most one of objective_gradient and objective_linear",
            ))
        }
        (Some(v), None) => Some(Objective::Gradient(numbers(v, "objective_gradient", Some(m), false)?.into())),
        (None, Some(v)) => Some(Objective::Linear(numbers(v, "objective_linear", Some(m), false)?.into())),
        (None, None) => None,
    };
    Ok(ProblemFile {
        problem: b.build()?,
        objective,
    })
}

/// Parse a point file (a JSON array of numbers).
pub fn parse_point(text: &str, what: &str) -> Result<SimpleFunction> {
    let v = parse_json(text)?;
    Ok(numbers(&v, what, None, false)?.into())
}

fn float_value(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

fn floats(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| float_value(x)).collect())
}

/// Problem file contents for `prob`. Fails for nonlinear constraints that
/// are not quadratic.
pub fn problem_to_value(prob: &Problem, objective: Option<&Objective>) -> Result<Value> {
    let mut obj = Map::new();
    obj.insert(
        "p".into(),
        match prob.exponent() {
            Exponent::Finite(p) => Value::from(p),
            Exponent::Infinity => Value::from("inf"),
        },
    );
    obj.insert("weights".into(), floats(prob.space().weights()));
    obj.insert("lower".into(), floats(prob.lower().values()));
    obj.insert("upper".into(), floats(prob.upper().values()));
    let ineq = prob
        .inequalities()
        .iter()
        .map(|c| serde_json::json!({"g": floats(c.g.values()), "a": c.a}))
        .collect();
    obj.insert("ineq".into(), Value::Array(ineq));
    let eq = prob
        .equalities()
        .iter()
        .map(|c| serde_json::json!({"h": floats(c.h.values()), "b": c.b}))
        .collect();
    obj.insert("eq".into(), Value::Array(eq));
    if !prob.nonlinear().is_empty() {
        let mut quad = Vec::new();
        for (i, c) in prob.nonlinear().iter().enumerate() {
            let q = c.as_quadratic().ok_or_else(|| {
                parse_err(format!("quad_ineq[{i}]"), "only quadratic constraints can be written")
            })?;
            let rows: Vec<Value> = q.q_matrix.iter().map(|r| floats(r)).collect();
            quad.push(serde_json::json!({"Q": rows, "q": floats(q.q.values()), "c": q.c}));
        }
        obj.insert("quad_ineq".into(), Value::Array(quad));
    }
    match objective {
        Some(Objective::Gradient(g)) => {
            obj.insert("objective_gradient".into(), floats(g.values()));
        }
        Some(Objective::Linear(z)) => {
            obj.insert("objective_linear".into(), floats(z.values()));
        }
        None => {}
    }
    Ok(Value::Object(obj))
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize to JSON")
}

/// `{:.16e}`: 17 significant digits, round-trips every finite `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON with sorted keys and floats in [`format_float`] form.
pub fn to_json_string(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| out.extend(std::iter::repeat_n("  ", d));
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().expect("f64 number")));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            if items.iter().all(|x| x.is_number() || x.is_string() || x.is_null()) {
                out.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, x, depth);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, x, depth + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[k.as_str()], depth + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIX: &str = r#"{
        "p": 2,
        "weights": [0.25, 0.25, 0.25, 0.25],
        "lower": [0, 0, 0, 0],
        "upper": ["inf", "inf", "inf", "inf"],
        "ineq": [{"g": [1, 1, 1, 1], "a": 0}],
        "eq": [],
        "objective_linear": [-2.0794415416798357, -0.9808292530117262, -0.4700036292457356, -0.13353139262452263]
    }"#;

    #[test]
    fn parses_problem_file() {
        let pf = parse_problem(SIX).unwrap();
        assert_eq!(pf.problem.m(), 4);
        assert_eq!(pf.problem.upper()[2], f64::INFINITY);
        assert!(matches!(pf.objective, Some(Objective::Linear(_))));
    }

    #[test]
    fn round_trips_through_writer() {
        let pf = parse_problem(SIX).unwrap();
        let v = problem_to_value(&pf.problem, pf.objective.as_ref()).unwrap();
        let text = to_json_string(&v);
        let again = parse_problem(&text).unwrap();
        let v2 = problem_to_value(&again.problem, again.objective.as_ref()).unwrap();
        assert_eq!(text, to_json_string(&v2));
    }

    #[test]
    fn quadratic_and_exponent() {
        let text = r#"{"p": "inf", "weights": [1], "lower": [0], "upper": [2],
            "quad_ineq": [{"Q": [[2]], "q": [0], "c": -1}]}"#;
        let pf = parse_problem(text).unwrap();
        assert_eq!(pf.problem.exponent(), Exponent::Infinity);
        assert_eq!(pf.problem.nonlinear().len(), 1);
        let text = to_json_string(&problem_to_value(&pf.problem, None).unwrap());
        assert!(text.contains("\"quad_ineq\""));
        assert!(text.contains("\"p\": \"inf\""));
    }

    #[test]
    fn field_diagnostics() {
        let bad = r#"{"weights": [1, 1], "ineq": [{"g": [1], "a": 0}]}"#;
        match parse_problem(bad) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "ineq[0].g"),
            other => panic!("{other:?}"),
        }
        match parse_problem("{\"weights\": [1,\n 2") {
            Err(Error::Parse { field, .. }) => assert!(field.starts_with("line 2")),
            other => panic!("{other:?}"),
        }
        match parse_problem(r#"{"weights": [1], "lower": ["-inf"], "upper": ["big"]}"#) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "upper[0]"),
            other => panic!("{other:?}"),
        }
        match parse_problem(r#"{"weights": [1], "lowr": [0]}"#) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "problem.lowr"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn writer_is_sorted_and_fixed_precision() {
        let v = serde_json::json!({"b": 0.1, "a": [1, 2.5], "c": {"z": null, "y": "inf"}});
        let s = to_json_string(&v);
        assert_eq!(
            s,
            "{\n  \"a\": [1, 2.5000000000000000e0],\n  \"b\": 1.0000000000000001e-1,\n  \"c\": {\n    \"y\": \"inf\",\n    \"z\": null\n  }\n}\n"
        );
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }

    #[test]
    fn points() {
        assert_eq!(parse_point("[0, 1.5]", "point").unwrap().values(), &[0.0, 1.5]);
        assert!(parse_point("{}", "point").is_err());
    }
}
