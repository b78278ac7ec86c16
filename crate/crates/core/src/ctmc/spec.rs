use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::asymptotic::{format_exponent, parse_exponent, AsymptoticScalar, Coeff, Exponent};
use crate::error::{Error, Result};

/// Jump rate of one edge: a plain number or a one-term asymptotic expression.
#[derive(Clone, Debug, PartialEq)]
pub enum RateExpr {
    Numeric(f64),
    Symbolic(AsymptoticScalar),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub rate: RateExpr,
}

/// Labelled states and validated edges.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainSpec {
    states: Vec<String>,
    edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct RawEdge {
    from: String,
    to: String,
    coeff: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exp: Option<Value>,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    states: Vec<String>,
    edges: Vec<RawEdge>,
}

fn value_string(v: &Value, what: &str) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::InvalidSpec(format!("{what} must be a number or string, got {other}"))),
    }
}

impl ChainSpec {
    pub fn new(states: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let spec = Self { states, edges };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a numeric spec from `(from, to, rate)` label triples.
    pub fn numeric(states: &[&str], edges: &[(&str, &str, f64)]) -> Result<Self> {
        let labels: Vec<String> = states.iter().map(|s| s.to_string()).collect();
        let idx = index_map(&labels)?;
        let edges = edges
            .iter()
            .map(|(f, t, r)| {
                Ok(Edge {
                    from: lookup(&idx, f)?,
                    to: lookup(&idx, t)?,
                    rate: RateExpr::Numeric(*r),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels, edges)
    }

    /// Builds a symbolic spec from `(from, to, coeff, exp)` with exact rational exponents.
    pub fn symbolic(states: &[&str], edges: &[(&str, &str, f64, Exponent)]) -> Result<Self> {
        let labels: Vec<String> = states.iter().map(|s| s.to_string()).collect();
        let idx = index_map(&labels)?;
        let edges = edges
            .iter()
            .map(|(f, t, c, k)| {
                Ok(Edge {
                    from: lookup(&idx, f)?,
                    to: lookup(&idx, t)?,
                    rate: RateExpr::Symbolic(AsymptoticScalar::new(Coeff::from_f64(*c), *k)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels, edges)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let idx = index_map(&raw.states)?;
        let mut edges = Vec::with_capacity(raw.edges.len());
        for e in &raw.edges {
            let from = lookup(&idx, &e.from)?;
            let to = lookup(&idx, &e.to)?;
            let coeff = value_string(&e.coeff, "coeff")?;
            let rate = match &e.exp {
                None => {
                    let v: f64 = match &e.coeff {
                        Value::Number(n) => n.as_f64().unwrap_or(f64::NAN),
                        _ => Coeff::parse(&coeff)?.to_f64(),
                    };
                    RateExpr::Numeric(v)
                }
                Some(k) => {
                    let k = parse_exponent(&value_string(k, "exp")?)?;
                    let c = Coeff::parse(&coeff)?;
                    let s = AsymptoticScalar::new(c, k).map_err(|_| {
                        Error::InvalidSpec(format!(
                            "edge {} -> {}: coefficient must be positive",
                            e.from, e.to
                        ))
                    })?;
                    RateExpr::Symbolic(s)
                }
            };
            edges.push(Edge { from, to, rate });
        }
        Self::new(raw.states, edges)
    }

    pub fn to_json(&self) -> String {
        let raw = RawSpec {
            states: self.states.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| {
                    let (coeff, exp) = match &e.rate {
                        RateExpr::Numeric(v) => (Value::from(*v), None),
                        RateExpr::Symbolic(AsymptoticScalar::Term { coeff, exp }) => {
                            let c = match coeff.to_exact_string() {
                                Some(s) => Value::String(s),
                                None => Value::from(coeff.to_f64()),
                            };
                            (c, Some(Value::String(format_exponent(exp))))
                        }
                        RateExpr::Symbolic(AsymptoticScalar::Zero) => (Value::from(0.0), None),
                    };
                    RawEdge {
                        from: self.states[e.from].clone(),
                        to: self.states[e.to].clone(),
                        coeff,
                        exp,
                    }
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("spec serializes")
    }

    fn validate(&self) -> Result<()> {
        index_map(&self.states)?;
        let n = self.states.len();
        let mut seen = HashSet::new();
        for e in &self.edges {
            if e.from >= n || e.to >= n {
                return Err(Error::InvalidSpec("edge endpoint out of range".into()));
            }
            let (f, t) = (&self.states[e.from], &self.states[e.to]);
            if e.from == e.to {
                return Err(Error::InvalidSpec(format!("self-loop at state {f}")));
            }
            if !seen.insert((e.from, e.to)) {
                return Err(Error::InvalidSpec(format!("duplicate edge {f} -> {t}")));
            }
            match &e.rate {
                RateExpr::Numeric(v) if !v.is_finite() || *v < 0.0 => {
                    return Err(Error::InvalidSpec(format!(
                        "edge {f} -> {t}: rate {v} must be finite and nonnegative"
                    )));
                }
                RateExpr::Symbolic(AsymptoticScalar::Zero) => {
                    return Err(Error::InvalidSpec(format!(
                        "edge {f} -> {t}: symbolic rate must have a positive coefficient"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn has_symbolic(&self) -> bool {
        self.edges
            .iter()
            .any(|e| matches!(e.rate, RateExpr::Symbolic(_)))
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| Error::UnknownState(label.to_string()))
    }
}

fn index_map(labels: &[String]) -> Result<HashMap<&str, usize>> {
    if labels.is_empty() {
        return Err(Error::InvalidSpec("state list is empty".into()));
    }
    let mut m = HashMap::new();
    for (i, s) in labels.iter().enumerate() {
        if m.insert(s.as_str(), i).is_some() {
            return Err(Error::InvalidSpec(format!("duplicate state label {s}")));
        }
    }
    Ok(m)
}

fn lookup(idx: &HashMap<&str, usize>, label: &str) -> Result<usize> {
    idx.get(label)
        .copied()
        .ok_or_else(|| Error::UnknownState(label.to_string()))
}
