//! Flat `key=value` fit configuration.

use std::path::Path;

use ffd_core::ffd::{DEFAULT_DEGREE, DEFAULT_DOMAIN_PADDING};
use ffd_core::fit::{FitConfig, LossKind};

use crate::error::{CliError, CliResult};
use crate::formats::read_text;

/// A fit configuration plus the lattice it runs on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub fit: FitConfig,
    pub degree: usize,
    /// Fraction of the template's bounding box added on every side of the lattice.
    pub padding: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings { fit: FitConfig::default(), degree: DEFAULT_DEGREE, padding: DEFAULT_DOMAIN_PADDING }
    }
}

pub const KEYS: &[&str] = &[
    "loss",
    "iterations",
    "lr_initial",
    "lr_final",
    "lr_drop_iteration",
    "lambda_smooth",
    "lambda_l1",
    "seed",
    "beta1",
    "beta2",
    "epsilon",
    "degree",
    "padding",
];

impl FitSettings {
    /// Applies one setting; `Ok(false)` means the key is unknown.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value.parse().map_err(|_| format!("invalid value `{value}` for {key}"))
        }
        let rw = &mut self.fit.regularizer_weights;
        match key {
            "loss" => {
                self.fit.loss = LossKind::from_name(value).ok_or_else(|| format!("unknown loss `{value}`"))?
            }
            "iterations" => self.fit.iterations = num(key, value)?,
            "lr_initial" => self.fit.lr_initial = num(key, value)?,
            "lr_final" => self.fit.lr_final = num(key, value)?,
            "lr_drop_iteration" => self.fit.lr_drop_iteration = num(key, value)?,
            "lambda_smooth" => rw.lambda_smooth = num(key, value)?,
            "lambda_l1" => rw.lambda_l1 = num(key, value)?,
            "seed" => self.fit.seed = num(key, value)?,
            "beta1" => self.fit.adam.beta1 = num(key, value)?,
            "beta2" => self.fit.adam.beta2 = num(key, value)?,
            "epsilon" => self.fit.adam.epsilon = num(key, value)?,
            "degree" => self.degree = num(key, value)?,
            "padding" => self.padding = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.fit.validate().map_err(|e| e.to_string())?;
        if self.degree == 0 {
            return Err("degree must be positive".into());
        }
        if !(self.padding >= 0.0) || !self.padding.is_finite() {
            return Err("padding must be a finite value ≥ 0".into());
        }
        Ok(())
    }

    pub fn degrees(&self) -> [usize; 3] {
        [self.degree; 3]
    }
}

/// Parses `key=value` lines; `#` starts a comment. Unknown keys are an error
/// naming the key.
pub fn parse_settings(path: &Path, text: &str) -> CliResult<FitSettings> {
    let mut s = FitSettings::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| CliError::parse(path, i + 1, "expected `key=value`"))?;
        let (key, value) = (key.trim(), value.trim());
        match s.set(key, value) {
            Ok(true) => {}
            Ok(false) => return Err(CliError::ConfigKey { path: path.to_path_buf(), key: key.to_string() }),
            Err(message) => return Err(CliError::parse(path, i + 1, message)),
        }
    }
    s.validate().map_err(|m| CliError::parse(path, 0, m))?;
    Ok(s)
}

pub fn read_settings(path: &Path) -> CliResult<FitSettings> {
    parse_settings(path, &read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_keys() {
        let text = "# defaults spelled out\nloss=chamfer\niterations=2000\nlr_initial=5e-4\nlambda_smooth=0.05\n\
                    lambda_l1=0\nseed=0\n";
        let s = parse_settings(Path::new("c"), text).unwrap();
        assert_eq!(s, FitSettings::default());
        let s = parse_settings(Path::new("c"), "loss = emd_fixed\niterations=10\ndegree=2\n").unwrap();
        assert_eq!(s.fit.loss, LossKind::EmdFixed);
        assert_eq!(s.fit.iterations, 10);
        assert_eq!(s.degrees(), [2, 2, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        let err = parse_settings(Path::new("c"), "learning_rate=1\n").unwrap_err();
        assert_eq!(err.exit_code(), 5);
        assert!(err.to_string().contains("learning_rate"));
        assert_eq!(parse_settings(Path::new("c"), "iterations=x\n").unwrap_err().exit_code(), 1);
        assert!(parse_settings(Path::new("c"), "iterations\n").is_err());
        assert!(parse_settings(Path::new("c"), "lambda_smooth=-1\n").is_err());
    }
}
