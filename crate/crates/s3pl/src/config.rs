//! Run configuration and its plain-text `key=value` file format.
//!
//! ```text
//! # comments and blank lines are ignored
//! p = 3
//! d1 = 51
//! lr = 0.01
//! ```

use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Hyperparameters of training and picking.
///
/// Defaults: `p = 3`, `d1 = 51`, `d2 = 1`, `z = 256`, 10 epochs,
/// learning rate 0.01, batch size 16, seed 0. `n` has no default; the
/// number of final peaks depends on the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct S3plConfig {
    pub p: usize,
    pub d1: usize,
    pub d2: usize,
    pub z: usize,
    pub n: Option<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for S3plConfig {
    fn default() -> Self {
        S3plConfig {
            p: 3,
            d1: 51,
            d2: 1,
            z: 256,
            n: None,
            epochs: 10,
            lr: 0.01,
            batch: 16,
            seed: 0,
        }
    }
}

impl S3plConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.p.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "patch size p must be a positive odd number, got {}",
                self.p
            )));
        }
        for (name, d) in [("d1", self.d1), ("d2", self.d2)] {
            if d == 0 || d % 2 == 0 {
                return Err(Error::Config(format!(
                    "kernel depth {name} must be a positive odd number, got {d}"
                )));
            }
        }
        if self.z == 0 {
            return Err(Error::Config("z must be at least 1".into()));
        }
        if self.n == Some(0) {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        Ok(())
    }

    /// Overrides fields from `key=value` text. Unknown keys are errors.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected key=value, got '{raw}'",
                    lineno + 1
                ))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse()
                .map_err(|_| format!("invalid value '{v}' for {key}"))
        }
        match key {
            "p" => self.p = num(key, value)?,
            "d1" => self.d1 = num(key, value)?,
            "d2" => self.d2 = num(key, value)?,
            "z" => self.z = num(key, value)?,
            "n" => self.n = Some(num(key, value)?),
            "epochs" => self.epochs = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "batch" => self.batch = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }
}

impl fmt::Display for S3plConfig {
    /// Writes the config back in file syntax.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p={}", self.p)?;
        writeln!(f, "d1={}", self.d1)?;
        writeln!(f, "d2={}", self.d2)?;
        writeln!(f, "z={}", self.z)?;
        if let Some(n) = self.n {
            writeln!(f, "n={n}")?;
        }
        writeln!(f, "epochs={}", self.epochs)?;
        writeln!(f, "lr={}", self.lr)?;
        writeln!(f, "batch={}", self.batch)?;
        writeln!(f, "seed={}", self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = S3plConfig::default();
        assert_eq!(
            (c.p, c.d1, c.d2, c.z, c.epochs, c.batch),
            (3, 51, 1, 256, 10, 16)
        );
        assert_eq!(c.lr, 0.01);
        c.validate().unwrap();
    }

    #[test]
    fn parse_and_print_roundtrip() {
        let mut c = S3plConfig::default();
        c.apply_str("# test\np = 5\n\nd1=21  # deep\nn=40\nlr=0.001\nseed=99\n")
            .unwrap();
        assert_eq!((c.p, c.d1, c.n, c.seed), (5, 21, Some(40), 99));
        let mut back = S3plConfig::default();
        back.apply_str(&c.to_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn bad_input() {
        let mut c = S3plConfig::default();
        assert!(c.apply_str("q=1").is_err());
        assert!(c.apply_str("p").is_err());
        assert!(c.apply_str("p=abc").is_err());
        c.apply_str("p=4").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = S3plConfig {
            d2: 2,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
