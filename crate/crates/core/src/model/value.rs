use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::fmt;

use serde::{Deserialize, Serialize};

/// A hyperparameter value as it appears in a configuration.
///
/// Integers and floats are kept apart so that configurations echo back
/// exactly as they were written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HpValue {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
}

/// Hyperparameter name → value. Inactive hyperparameters are absent.
pub type Config = BTreeMap<String, HpValue>;

impl HpValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            HpValue::Int(v) => Some(v as f64),
            HpValue::Float(v) => Some(v),
            _ => None,
        }
    }

    /// Equality that treats `Int(2)` and `Float(2.0)` as the same value.
    pub fn matches(&self, other: &HpValue) -> bool {
        match (self.as_f64(), other.as_f64()) {
            (Some(a), Some(b)) => a == b,
            (None, None) => self == other,
            _ => false,
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for HpValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HpValue::Int(v) => write!(f, "{v}"),
            HpValue::Float(v) => write!(f, "{v}"),
            HpValue::Bool(v) => write!(f, "{v}"),
            HpValue::Str(v) => f.write_str(v),
        }
    }
}

impl From<f64> for HpValue {
    fn from(v: f64) -> Self {
        HpValue::Float(v)
    }
}

impl From<i64> for HpValue {
    fn from(v: i64) -> Self {
        HpValue::Int(v)
    }
}

impl From<&str> for HpValue {
    fn from(v: &str) -> Self {
        HpValue::Str(v.into())
    }
}
