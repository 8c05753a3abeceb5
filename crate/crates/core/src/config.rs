//! Run configuration: JSON with `grid`, `model`, `solve` and `verify`
//! blocks. Every unknown key is rejected.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, GridError};
use crate::model::{BetaLadder, ModelConfig};
use crate::solve::SolveOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

impl ConfigError {
    fn at(path: &str, message: impl ToString) -> Self {
        Self::Invalid {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    /// `[lower, upper]` per axis; the unit box when omitted.
    #[serde(default)]
    pub extents: Option<Vec<[f64; 2]>>,
    /// Interior nodes per axis; a single entry is used for every axis.
    pub counts: Vec<usize>,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, GridError> {
        let extents: Vec<(f64, f64)> = match &self.extents {
            Some(e) => e.iter().map(|[a, b]| (*a, *b)).collect(),
            None => vec![(0.0, 1.0); self.dim],
        };
        let counts = if self.counts.len() == 1 {
            vec![self.counts[0]; self.dim]
        } else {
            self.counts.clone()
        };
        Grid::new(self.dim, &extents, &counts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SobolevMode {
    Discrete,
}

/// Either a user value for `S` or `"discrete"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SobolevSetting {
    Value(f64),
    Mode(SobolevMode),
}

impl std::str::FromStr for SobolevSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "discrete" {
            return Ok(Self::Mode(SobolevMode::Discrete));
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Self::Value(v)),
            _ => Err(format!("expected a positive number or `discrete`, got `{s}`")),
        }
    }
}

fn default_m() -> usize {
    1
}

fn default_sobolev_iter() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub sobolev: Option<SobolevSetting>,
    #[serde(default)]
    pub ladder: Option<BetaLadder>,
    /// Spectral index `m` of the problem (`λ_m(η) < 1`).
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_sobolev_iter")]
    pub sobolev_max_iter: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            sobolev: None,
            ladder: None,
            m: default_m(),
            sobolev_max_iter: default_sobolev_iter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub solve: SolveOptions,
    pub verify: VerifyConfig,
}

fn block<T: DeserializeOwned>(value: serde_json::Value, path: &str) -> Result<T, ConfigError> {
    serde_json::from_value(value).map_err(|e| ConfigError::at(path, e))
}

impl RunConfig {
    /// Parses and validates; errors name the offending block and key.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::at("config", e))?;
        let serde_json::Value::Object(mut map) = value else {
            return Err(ConfigError::at("config", "expected a JSON object"));
        };
        const KEYS: [&str; 4] = ["grid", "model", "solve", "verify"];
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::at(
                "config",
                format!("unknown field `{k}`, expected one of `grid`, `model`, `solve`, `verify`"),
            ));
        }
        let grid: GridConfig = block(
            map.remove("grid").ok_or_else(|| ConfigError::at("config", "missing field `grid`"))?,
            "grid",
        )?;
        let model: ModelConfig = block(
            map.remove("model").ok_or_else(|| ConfigError::at("config", "missing field `model`"))?,
            "model",
        )?;
        let solve: SolveOptions = match map.remove("solve") {
            Some(v) => block(v, "solve")?,
            None => SolveOptions::default(),
        };
        let verify: VerifyConfig = match map.remove("verify") {
            Some(v) => block(v, "verify")?,
            None => VerifyConfig::default(),
        };
        let cfg = Self {
            grid,
            model,
            solve,
            verify,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.into(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.grid.build().map_err(|e| ConfigError::at("grid", e))?;
        self.solve.validate().map_err(|e| ConfigError::at("solve", e))?;
        if let Some(l) = &self.verify.ladder {
            l.validate().map_err(|e| ConfigError::at("verify.ladder", e))?;
        }
        if self.verify.m == 0 {
            return Err(ConfigError::at("verify.m", "must be at least 1"));
        }
        if let Some(SobolevSetting::Value(v)) = self.verify.sobolev {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::at("verify.sobolev", format!("must be positive (got {v})")));
            }
        }
        // θ may depend on the grid; everything else is checked here
        let probe = match &self.model {
            ModelConfig::Section5 { theta: None, .. } => self.model.build(Some(1.0)),
            _ => self.model.build(None),
        };
        probe.map_err(|e| ConfigError::at("model", e))?;
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        self.grid.build().expect("validated")
    }

    pub fn ladder(&self) -> BetaLadder {
        self.verify.ladder.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S5: &str = r#"{
        "grid": {"dim": 1, "counts": [255]},
        "model": {"kind": "section5", "theta": 12, "eta": 1000},
        "solve": {"restarts": 2, "seed": 7}
    }"#;

    #[test]
    fn parses_defaults() {
        let c = RunConfig::from_json(S5).unwrap();
        assert_eq!(c.grid().len(), 255);
        assert_eq!(c.solve.restarts, 2);
        assert_eq!(c.solve.tol, 1e-8);
        assert_eq!(c.verify.m, 1);
        assert_eq!(c.ladder(), BetaLadder::default());
    }

    #[test]
    fn unknown_keys_name_their_block() {
        let bad = S5.replace("\"theta\"", "\"thetaa\"");
        let e = RunConfig::from_json(&bad).unwrap_err().to_string();
        assert!(e.starts_with("model:") && e.contains("thetaa"), "{e}");
        let e = RunConfig::from_json(&S5.replace("\"seed\"", "\"sede\"")).unwrap_err().to_string();
        assert!(e.starts_with("solve:") && e.contains("sede"), "{e}");
        let e = RunConfig::from_json(&S5.replace("\"solve\"", "\"solver\"")).unwrap_err().to_string();
        assert!(e.contains("solver"), "{e}");
    }

    #[test]
    fn rejects_bad_values() {
        let e = RunConfig::from_json(&S5.replace("[255]", "[2]")).unwrap_err().to_string();
        assert!(e.starts_with("grid:"), "{e}");
        let e = RunConfig::from_json(&S5.replace("\"eta\": 1000", "\"eta\": 5")).unwrap_err().to_string();
        assert!(e.starts_with("model:"), "{e}");
    }

    #[test]
    fn sobolev_setting_forms() {
        assert_eq!("discrete".parse::<SobolevSetting>(), Ok(SobolevSetting::Mode(SobolevMode::Discrete)));
        assert_eq!("2.5".parse::<SobolevSetting>(), Ok(SobolevSetting::Value(2.5)));
        assert!("-1".parse::<SobolevSetting>().is_err());
        let v: VerifyConfig = serde_json::from_str(r#"{"sobolev": "discrete"}"#).unwrap();
        assert_eq!(v.sobolev, Some(SobolevSetting::Mode(SobolevMode::Discrete)));
    }
}
