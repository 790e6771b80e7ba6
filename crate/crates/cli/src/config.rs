//! Numerical settings shared by the subcommands.

use std::path::Path;

use roughpath::rough::RefineOptions;
use roughpath::SewOptions;
use serde::Deserialize;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub tol_sew: f64,
    pub max_depth: usize,
    pub tensor_degree_max: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            tol_sew: 1e-10,
            max_depth: 14,
            tensor_degree_max: roughpath::DEFAULT_MAX_DEGREE,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn with_overrides(mut self, tol: Option<f64>, max_depth: Option<usize>, degree_max: Option<usize>) -> Self {
        if let Some(t) = tol {
            self.tol_sew = t;
        }
        if let Some(d) = max_depth {
            self.max_depth = d;
        }
        if let Some(n) = degree_max {
            self.tensor_degree_max = n;
        }
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tol_sew.is_finite() && self.tol_sew > 0.0) {
            return Err(format!("tolerance must be positive, got {}", self.tol_sew));
        }
        if self.max_depth == 0 || self.max_depth > 30 {
            return Err(format!("max depth must lie in 1..=30, got {}", self.max_depth));
        }
        if self.tensor_degree_max == 0 {
            return Err("tensor degree cap must be positive".into());
        }
        Ok(())
    }

    pub fn sew(&self) -> SewOptions {
        SewOptions {
            tol: self.tol_sew,
            max_depth: self.max_depth,
            start: None,
        }
    }

    pub fn refine(&self) -> RefineOptions {
        RefineOptions {
            tol: self.tol_sew,
            max_depth: self.max_depth,
            base: 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_and_overrides() {
        let c: Config = serde_json::from_str(r#"{"max_depth": 9}"#).unwrap();
        assert_eq!(c.max_depth, 9);
        assert_eq!(c.tol_sew, 1e-10);
        let c = c.with_overrides(Some(1e-6), None, Some(4));
        assert_eq!((c.tol_sew, c.max_depth, c.tensor_degree_max), (1e-6, 9, 4));
        assert!(c.validate().is_ok());
        assert!(serde_json::from_str::<Config>(r#"{"depth": 3}"#).is_err());
        assert!(Config::default().with_overrides(Some(-1.0), None, None).validate().is_err());
    }
}
