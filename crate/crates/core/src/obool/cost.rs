use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::GateCounts;

/// Per-gate weights used to turn gate counts into a single cost figure.
///
/// The default weighs every gate kind as 1. An AND-only model
/// (`xor=0`, `not=0`, `const=0`) approximates schemes where linear gates are
/// free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub xor: f64,
    pub and: f64,
    pub not: f64,
    #[serde(rename = "const")]
    pub constant: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            xor: 1.0,
            and: 1.0,
            not: 1.0,
            constant: 1.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum CostModelError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("reading cost table: {0}")]
    Io(#[from] std::io::Error),
}

impl CostModel {
    pub fn and_only() -> Self {
        CostModel {
            xor: 0.0,
            and: 1.0,
            not: 0.0,
            constant: 0.0,
        }
    }

    pub fn weigh(&self, c: &GateCounts) -> f64 {
        self.xor * c.xor as f64
            + self.and * c.and as f64
            + self.not * c.not as f64
            + self.constant * c.constant as f64
    }

    /// Parses `key=value` lines (`xor`, `and`, `not`, `const`); `#` starts a
    /// comment. Unlisted kinds keep their default weight of 1.
    pub fn parse(text: &str) -> Result<Self, CostModelError> {
        let mut m = CostModel::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| CostModelError::Parse { line: i + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| err(format!("bad weight `{}`", value.trim())))?;
            if !(value.is_finite() && value >= 0.0) {
                return Err(err(format!(
                    "weight must be finite and nonnegative, got {value}"
                )));
            }
            match key.trim().to_ascii_lowercase().as_str() {
                "xor" => m.xor = value,
                "and" => m.and = value,
                "not" => m.not = value,
                "const" => m.constant = value,
                other => return Err(err(format!("unknown gate kind `{other}`"))),
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, CostModelError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
