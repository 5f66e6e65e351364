//! JSON-lines result records.

use serde::ser::Serializer;
use serde::Serialize;
use serde_json::value::RawValue;
use std::collections::BTreeMap;
use topolat::invariants::InvariantResult;

/// Float serialized with 17 significant digits; non-finite values become null.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

/// Parameter values of a record.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Param {
    Int(i64),
    Float(F17),
    Text(String),
    Bool(bool),
    Floats(Vec<F17>),
    Ints(Vec<i64>),
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Float(F17(v))
    }
}

impl From<i64> for Param {
    fn from(v: i64) -> Self {
        Param::Int(v)
    }
}

impl From<usize> for Param {
    fn from(v: usize) -> Self {
        Param::Int(v as i64)
    }
}

impl From<bool> for Param {
    fn from(v: bool) -> Self {
        Param::Bool(v)
    }
}

impl From<&str> for Param {
    fn from(v: &str) -> Self {
        Param::Text(v.to_string())
    }
}

impl From<String> for Param {
    fn from(v: String) -> Self {
        Param::Text(v)
    }
}

impl From<Vec<f64>> for Param {
    fn from(v: Vec<f64>) -> Self {
        Param::Floats(v.into_iter().map(F17).collect())
    }
}

impl From<Vec<i64>> for Param {
    fn from(v: Vec<i64>) -> Self {
        Param::Ints(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRecord {
    pub command: String,
    pub parameters: BTreeMap<String, Param>,
    pub invariant: String,
    pub value: F17,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imag: Option<F17>,
    pub rounded: Option<i64>,
    pub residual: Option<F17>,
    /// "unquantized" when the residual exceeds the quantization threshold.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    pub grid: String,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<F17>>,
    pub wall_time: F17,
}

impl ResultRecord {
    pub fn new(command: &str, invariant: &str, value: f64) -> Self {
        Self {
            command: command.into(),
            parameters: BTreeMap::new(),
            invariant: invariant.into(),
            value: F17(value),
            imag: None,
            rounded: None,
            residual: None,
            flags: vec![],
            grid: String::new(),
            seed: None,
            values: None,
            wall_time: F17(0.0),
        }
    }

    /// Record of an invariant; flagged unquantized when the residual exceeds `quant_tol`.
    pub fn invariant(command: &str, r: &InvariantResult, quant_tol: f64) -> Self {
        let mut rec = Self::new(command, &r.name, r.value);
        rec.imag = Some(F17(r.imag));
        rec.residual = Some(F17(r.residual));
        rec.grid = r.meta.clone();
        if r.residual < quant_tol {
            rec.rounded = r.rounded.or(Some(r.value.round() as i64));
        } else {
            rec.flags.push("unquantized".into());
        }
        rec
    }

    /// Integer-valued quantity such as an index or a spectral flow.
    pub fn integer(command: &str, invariant: &str, v: i64) -> Self {
        let mut rec = Self::new(command, invariant, v as f64);
        rec.rounded = Some(v);
        rec.residual = Some(F17(0.0));
        rec
    }

    pub fn param(mut self, key: &str, v: impl Into<Param>) -> Self {
        self.parameters.insert(key.into(), v.into());
        self
    }

    pub fn grid(mut self, g: impl Into<String>) -> Self {
        self.grid = g.into();
        self
    }

    pub fn seed(mut self, s: Option<u64>) -> Self {
        self.seed = s;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}
