use alloc::format;
use alloc::string::{String, ToString};

use crate::error::{Error, Result};
use crate::model::{Config, HpValue};

/// Typed access to one node's hyperparameters (`prefix + name` keys).
pub(crate) struct Params<'a> {
    pub config: &'a Config,
    pub prefix: &'a str,
    pub candidate: &'a str,
}

impl Params<'_> {
    fn get(&self, key: &str) -> Option<&HpValue> {
        self.config.get(&format!("{}{}", self.prefix, key))
    }

    fn bad(&self, key: &str, what: &str) -> Error {
        Error::FitFailed {
            candidate: self.candidate.to_string(),
            message: format!("hyperparameter `{}{key}` {what}", self.prefix),
        }
    }

    /// Absent, `"none"` and `null`-like strings read as `None`.
    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some(HpValue::Str(s)) if s.eq_ignore_ascii_case("none") => Ok(None),
            Some(v) => match v.as_f64() {
                Some(f) if f >= 1.0 && libm::trunc(f) == f => Ok(Some(f as usize)),
                _ => Err(self.bad(key, "must be a positive integer")),
            },
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.opt_usize(key)?.unwrap_or(default))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .filter(|f| f.is_finite())
                .ok_or_else(|| self.bad(key, "must be a finite number")),
        }
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        self.get(key).map_or_else(|| default.to_string(), HpValue::label)
    }
}
