//! Model files: the fitted expression plus what is needed to apply it to
//! raw data (feature names, standardization) and provenance metadata.

use crate::error::{CliError, CliResult};
use serde_json::{json, Map, Value};
use std::path::Path;
use symreg::data::{FeatureMatrix, StandardizationStats};
use symreg::expr::{evaluate, from_value, to_json, TreeNode};
use symreg::itea::{it_evaluate, ITExpression, ITTerm, Transform};

pub const FORMAT: &str = "symreg-model";
pub const VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Tree(TreeNode<f64>),
    Itea(ITExpression<f64>),
}

impl Expression {
    pub fn predict(&self, x: &FeatureMatrix<f64>) -> CliResult<Vec<f64>> {
        Ok(match self {
            Expression::Tree(t) => evaluate(t, x)?,
            Expression::Itea(e) => it_evaluate(e, x)?,
        })
    }

    /// Node count for trees; number of terms for IT expressions.
    pub fn size(&self) -> usize {
        match self {
            Expression::Tree(t) => t.size(),
            Expression::Itea(e) => e.len(),
        }
    }

    /// Tree complexity; for IT expressions, the total count of nonzero
    /// strengths.
    pub fn complexity(&self) -> u64 {
        match self {
            Expression::Tree(t) => t.complexity(),
            Expression::Itea(e) => e.terms.iter().map(|t| t.nonzero() as u64).sum(),
        }
    }

    pub fn engine(&self) -> &'static str {
        match self {
            Expression::Tree(_) => "gp",
            Expression::Itea(_) => "itea",
        }
    }

    fn render(&self) -> String {
        match self {
            Expression::Tree(t) => t.to_string(),
            Expression::Itea(e) => e.to_string(),
        }
    }
}

/// Scores of the fitted model on each partition; `None` where undefined.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub train_r2: Option<f64>,
    pub val_r2: Option<f64>,
    pub test_r2: Option<f64>,
    pub train_nmse: Option<f64>,
    pub test_nmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub expression: Expression,
    pub features: Vec<String>,
    pub target: String,
    pub standardization: Option<StandardizationStats>,
    pub seed: u64,
    pub config_digest: String,
    pub metrics: Metrics,
}

fn num(v: Option<f64>) -> Value {
    v.filter(|x| x.is_finite()).map_or(Value::Null, |x| json!(x))
}

fn itea_value(e: &ITExpression<f64>) -> Value {
    let terms: Vec<Value> = e
        .terms
        .iter()
        .zip(&e.coefs)
        .map(|(t, &c)| {
            json!({
                "transform": t.transform.name(),
                "strengths": t.strengths,
                "shift": t.shift,
                "scale": t.scale,
                "coef": c,
            })
        })
        .collect();
    json!({ "intercept": e.intercept, "terms": terms })
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::data(format!("invalid model file: {}", msg.into()))
}

fn get<'a>(v: &'a Value, key: &str) -> CliResult<&'a Value> {
    v.get(key).ok_or_else(|| bad(format!("missing {key:?}")))
}

fn as_f64(v: &Value, what: &str) -> CliResult<f64> {
    v.as_f64().ok_or_else(|| bad(format!("{what} is not a number")))
}

fn f64_list(v: &Value, what: &str) -> CliResult<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| bad(format!("{what} is not an array")))?
        .iter()
        .map(|x| as_f64(x, what))
        .collect()
}

fn parse_itea(v: &Value) -> CliResult<ITExpression<f64>> {
    let intercept = as_f64(get(v, "intercept")?, "intercept")?;
    let mut terms = Vec::new();
    let mut coefs = Vec::new();
    for t in get(v, "terms")?.as_array().ok_or_else(|| bad("terms is not an array"))? {
        let name = get(t, "transform")?.as_str().ok_or_else(|| bad("transform is not a string"))?;
        let transform = Transform::from_name(name).ok_or_else(|| bad(format!("unknown transform {name:?}")))?;
        let strengths = get(t, "strengths")?
            .as_array()
            .ok_or_else(|| bad("strengths is not an array"))?
            .iter()
            .map(|k| k.as_i64().and_then(|k| i32::try_from(k).ok()).ok_or_else(|| bad("bad strength")))
            .collect::<CliResult<Vec<i32>>>()?;
        terms.push(ITTerm {
            transform,
            strengths,
            shift: as_f64(get(t, "shift")?, "shift")?,
            scale: as_f64(get(t, "scale")?, "scale")?,
        });
        coefs.push(as_f64(get(t, "coef")?, "coef")?);
    }
    Ok(ITExpression {
        terms,
        coefs,
        intercept,
    })
}

impl Model {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn to_value(&self) -> CliResult<Value> {
        let mut m = Map::new();
        m.insert("format".into(), json!(FORMAT));
        m.insert("version".into(), json!(VERSION));
        m.insert("engine".into(), json!(self.expression.engine()));
        m.insert("seed".into(), json!(self.seed));
        m.insert("config_digest".into(), json!(self.config_digest));
        m.insert("features".into(), json!(self.features));
        m.insert("target".into(), json!(self.target));
        m.insert(
            "standardization".into(),
            self.standardization.as_ref().map_or(Value::Null, |s| {
                json!({ "mean": s.mean, "std": s.std, "constant": s.constant })
            }),
        );
        m.insert("expression".into(), json!(self.expression.render()));
        match &self.expression {
            Expression::Tree(t) => {
                let doc: Value = serde_json::from_str(&to_json(t)?).expect("tree writer emits JSON");
                m.insert("tree".into(), doc);
            }
            Expression::Itea(e) => {
                m.insert("itea".into(), itea_value(e));
            }
        }
        let mt = &self.metrics;
        m.insert(
            "metrics".into(),
            json!({
                "train_r2": num(mt.train_r2),
                "val_r2": num(mt.val_r2),
                "test_r2": num(mt.test_r2),
                "train_nmse": num(mt.train_nmse),
                "test_nmse": num(mt.test_nmse),
                "size": self.expression.size(),
                "complexity": self.expression.complexity(),
            }),
        );
        Ok(Value::Object(m))
    }

    pub fn to_json(&self) -> CliResult<String> {
        let mut s = serde_json::to_string_pretty(&self.to_value()?).expect("value serializes");
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if get(&v, "format")?.as_str() != Some(FORMAT) {
            return Err(bad("not a symreg model"));
        }
        let features: Vec<String> = get(&v, "features")?
            .as_array()
            .ok_or_else(|| bad("features is not an array"))?
            .iter()
            .map(|f| f.as_str().map(str::to_string).ok_or_else(|| bad("feature name is not a string")))
            .collect::<CliResult<_>>()?;
        let standardization = match get(&v, "standardization")? {
            Value::Null => None,
            s => Some(StandardizationStats {
                mean: f64_list(get(s, "mean")?, "mean")?,
                std: f64_list(get(s, "std")?, "std")?,
                constant: get(s, "constant")?
                    .as_array()
                    .ok_or_else(|| bad("constant is not an array"))?
                    .iter()
                    .map(|b| b.as_bool().ok_or_else(|| bad("constant flag is not a boolean")))
                    .collect::<CliResult<_>>()?,
            }),
        };
        let expression = match get(&v, "engine")?.as_str() {
            Some("gp") => Expression::Tree(from_value(get(&v, "tree")?, "tree")?),
            Some("itea") => Expression::Itea(parse_itea(get(&v, "itea")?)?),
            _ => return Err(bad("unknown engine")),
        };
        let metric = |k: &str| v.get("metrics").and_then(|m| m.get(k)).and_then(Value::as_f64);
        Ok(Self {
            expression,
            features,
            target: get(&v, "target")?.as_str().unwrap_or_default().to_string(),
            standardization,
            seed: get(&v, "seed")?.as_u64().ok_or_else(|| bad("seed is not an integer"))?,
            config_digest: get(&v, "config_digest")?.as_str().unwrap_or_default().to_string(),
            metrics: Metrics {
                train_r2: metric("train_r2"),
                val_r2: metric("val_r2"),
                test_r2: metric("test_r2"),
                train_nmse: metric("train_nmse"),
                test_nmse: metric("test_nmse"),
            },
        })
    }

    /// Applies standardization (if any) to raw features and evaluates.
    pub fn predict(&self, raw: &FeatureMatrix<f64>) -> CliResult<Vec<f64>> {
        if raw.ncols() != self.n_features() {
            return Err(CliError::data(format!(
                "model expects {} features, data has {}",
                self.n_features(),
                raw.ncols()
            )));
        }
        match &self.standardization {
            Some(s) => self.expression.predict(&s.apply(raw)?),
            None => self.expression.predict(raw),
        }
    }
}
