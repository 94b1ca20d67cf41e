//! JSON tree documents: `{"op": .., "index"|"value": .., "weight": .., "children": [..]}`.
//!
//! Floats are written with 17 significant digits so every `f64` survives a
//! round trip bit-for-bit. Disabled weights are written as `null`; readers
//! also accept the key being absent.

use super::{Op, TreeNode};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde_json::Value;
use std::fmt::Write;

pub fn to_json<T: Scalar>(tree: &TreeNode<T>) -> Result<String> {
    let mut out = String::new();
    write_node(tree, &mut out)?;
    Ok(out)
}

pub(crate) fn fmt_float(v: f64) -> Option<String> {
    v.is_finite().then(|| format!("{v:.16e}"))
}

fn write_node<T: Scalar>(node: &TreeNode<T>, out: &mut String) -> Result<()> {
    let float = |v: T, what: &str| {
        fmt_float(v.as_f64())
            .ok_or_else(|| Error::Structure(format!("cannot serialize non-finite {what}")))
    };
    write!(out, "{{\"op\":\"{}\"", node.op.name()).expect("string write");
    match node.op {
        Op::Var(i) => write!(out, ",\"index\":{i}").expect("string write"),
        Op::Constant => {
            write!(out, ",\"value\":{}", float(node.value, "constant")?).expect("string write")
        }
        _ => {}
    }
    match node.weight {
        Some(w) => write!(out, ",\"weight\":{}", float(w, "weight")?).expect("string write"),
        None => out.push_str(",\"weight\":null"),
    }
    if !node.children.is_empty() {
        out.push_str(",\"children\":[");
        for (i, c) in node.children.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write_node(c, out)?;
        }
        out.push(']');
    }
    out.push('}');
    Ok(())
}

pub fn from_json<T: Scalar>(text: &str) -> Result<TreeNode<T>> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    from_value(&value, "$")
}

/// Converts an already-parsed JSON value; `path` names its location for errors.
pub fn from_value<T: Scalar>(value: &Value, path: &str) -> Result<TreeNode<T>> {
    let fail = |message: String| Error::Parse {
        location: path.to_string(),
        message,
    };
    let obj = value
        .as_object()
        .ok_or_else(|| fail("expected an object".into()))?;
    if let Some(key) = obj
        .keys()
        .find(|k| !matches!(k.as_str(), "op" | "index" | "value" | "weight" | "children"))
    {
        return Err(fail(format!("unknown key {key:?}")));
    }
    let name = obj
        .get("op")
        .and_then(Value::as_str)
        .ok_or_else(|| fail("missing string field \"op\"".into()))?;
    let number = |key: &str| -> Result<T> {
        obj.get(key)
            .and_then(Value::as_f64)
            .map(T::lit)
            .ok_or_else(|| fail(format!("missing numeric field {key:?}")))
    };

    let op = if name == "var" {
        let index = obj
            .get("index")
            .and_then(Value::as_u64)
            .ok_or_else(|| fail("variable needs a non-negative integer \"index\"".into()))?;
        Op::Var(index as usize)
    } else {
        Op::from_name(name).ok_or_else(|| fail(format!("unknown op {name:?}")))?
    };
    let value = if op == Op::Constant {
        number("value")?
    } else {
        T::zero()
    };
    let weight = match obj.get("weight") {
        None | Some(Value::Null) => None,
        Some(_) => Some(number("weight")?),
    };
    let children = match obj.get("children") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| from_value(v, &format!("{path}.children[{i}]")))
            .collect::<Result<Vec<_>>>()?,
        Some(_) => return Err(fail("\"children\" must be an array".into())),
    };
    let (lo, hi) = op.arity();
    if children.len() < lo || children.len() > hi {
        return Err(fail(format!("{name} cannot take {} children", children.len())));
    }
    Ok(TreeNode {
        op,
        value,
        weight,
        children,
    })
}
