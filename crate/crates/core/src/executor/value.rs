use std::collections::BTreeMap;

use serde::Serialize;

/// A node's numeric output: one number, or one number per group cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Scalar(f64),
    Cells(BTreeMap<String, f64>),
}

impl Value {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Value::Scalar(x) => Some(*x),
            Value::Cells(_) => None,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Value {
        match self {
            Value::Scalar(x) => Value::Scalar(f(*x)),
            Value::Cells(m) => Value::Cells(m.iter().map(|(k, v)| (k.clone(), f(*v))).collect()),
        }
    }

    /// Elementwise combination; a scalar broadcasts over cells. Cell maps
    /// must share keys.
    pub fn zip(&self, other: &Value, f: impl Fn(f64, f64) -> f64) -> Result<Value, String> {
        Ok(match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => Value::Scalar(f(*a, *b)),
            (Value::Cells(m), Value::Scalar(b)) => Value::Cells(m.iter().map(|(k, v)| (k.clone(), f(*v, *b))).collect()),
            (Value::Scalar(a), Value::Cells(m)) => Value::Cells(m.iter().map(|(k, v)| (k.clone(), f(*a, *v))).collect()),
            (Value::Cells(a), Value::Cells(b)) => {
                if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
                    return Err("operands are grouped over different cells".into());
                }
                Value::Cells(a.iter().zip(b.values()).map(|((k, x), y)| (k.clone(), f(*x, *y))).collect())
            }
        })
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Value::Scalar(x) => vec![*x],
            Value::Cells(m) => m.values().copied().collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|x| x.is_finite())
    }

    /// L1 distance; grouped values are compared cell by cell, with missing
    /// cells counting as zero.
    pub fn l1_distance(&self, other: &Value) -> f64 {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => (a - b).abs(),
            (a, b) => {
                let (ma, mb) = (a.as_cells(), b.as_cells());
                let keys: std::collections::BTreeSet<&String> = ma.keys().chain(mb.keys()).collect();
                keys.into_iter()
                    .map(|k| (ma.get(k).copied().unwrap_or(0.0) - mb.get(k).copied().unwrap_or(0.0)).abs())
                    .sum()
            }
        }
    }

    fn as_cells(&self) -> BTreeMap<String, f64> {
        match self {
            Value::Scalar(x) => BTreeMap::from([(String::new(), *x)]),
            Value::Cells(m) => m.clone(),
        }
    }
}
