//! Model hyperparameters and the key-value configuration file that carries them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid parameter `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// Hyperparameters shared by all engagement models.
///
/// Every field has a default, so a config file only needs to name the values
/// it overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Prior skill mean μ₀.
    pub prior_mean: f64,
    /// Prior skill variance σ₀².
    pub prior_variance: f64,
    /// Performance noise variance β².
    pub perf_noise: f64,
    /// Variance added to each involved skill before an update (τ²).
    pub dynamics: f64,
    /// Lower bound on the engagement margin ε_ℓ.
    pub margin_floor: f64,
    /// Clamp applied to the empirical engagement rate before it is turned into a margin.
    pub rate_clamp: (f64, f64),
    pub kt_guess: f64,
    pub kt_slip: f64,
    pub kt_learn: f64,
    /// Initial mastery probability for knowledge tracing.
    pub kt_prior: f64,
    /// Predictions at or above this probability count as "engaged".
    pub decision_threshold: f64,
    /// Watch ratio at or above which an event is labelled engaged.
    pub label_threshold: f64,
    /// Number of top-ranked topics per fragment (T).
    pub topics_per_event: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            prior_mean: 0.0,
            prior_variance: 1.0,
            perf_noise: 0.5,
            dynamics: 0.01,
            margin_floor: 1e-3,
            rate_clamp: (0.01, 0.99),
            kt_guess: 0.1,
            kt_slip: 0.1,
            kt_learn: 0.05,
            kt_prior: 0.5,
            decision_threshold: 0.5,
            label_threshold: 0.75,
            topics_per_event: 5,
        }
    }
}

fn open_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: &'static str, reason: String| Err(ConfigError::Invalid { field, reason });
        if !self.prior_mean.is_finite() {
            return bad("prior_mean", "must be finite".into());
        }
        for (field, value) in [
            ("prior_variance", self.prior_variance),
            ("perf_noise", self.perf_noise),
            ("margin_floor", self.margin_floor),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return bad(field, format!("must be > 0, got {value}"));
            }
        }
        if !(self.dynamics >= 0.0 && self.dynamics.is_finite()) {
            return bad("dynamics", format!("must be >= 0, got {}", self.dynamics));
        }
        let (lo, hi) = self.rate_clamp;
        if !(open_unit(lo) && open_unit(hi) && lo <= hi) {
            return bad("rate_clamp", format!("need 0 < lo <= hi < 1, got ({lo}, {hi})"));
        }
        for (field, value) in [
            ("kt_guess", self.kt_guess),
            ("kt_slip", self.kt_slip),
            ("kt_prior", self.kt_prior),
            ("decision_threshold", self.decision_threshold),
        ] {
            if !open_unit(value) {
                return bad(field, format!("must lie in (0, 1), got {value}"));
            }
        }
        if !(0.0..1.0).contains(&self.kt_learn) {
            return bad("kt_learn", format!("must lie in [0, 1), got {}", self.kt_learn));
        }
        if self.kt_guess + self.kt_slip >= 1.0 {
            return bad("kt_guess", "kt_guess + kt_slip must be < 1".into());
        }
        if !(self.label_threshold > 0.0 && self.label_threshold <= 1.0) {
            return bad(
                "label_threshold",
                format!("must lie in (0, 1], got {}", self.label_threshold),
            );
        }
        if self.topics_per_event == 0 {
            return bad("topics_per_event", "must be >= 1".into());
        }
        Ok(())
    }

    /// Parses a TOML key-value document whose keys mirror the field names.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let params: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<string>".into(),
            message: e.to_string(),
        })?;
        params.validate()?;
        Ok(params)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    /// Overrides one field from a `key=value` pair, the value written as in
    /// the config file. The result is validated as a whole.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let parse_err = |message: String| ConfigError::Parse {
            path: format!("override {key}={value}"),
            message,
        };
        let parsed: toml::Table =
            toml::from_str(&format!("v = {value}")).map_err(|e| parse_err(e.to_string()))?;
        let mut table = toml::Table::try_from(&*self).map_err(|e| parse_err(e.to_string()))?;
        if !table.contains_key(key) {
            return Err(parse_err(format!("unknown parameter `{key}`")));
        }
        table.insert(key.to_owned(), parsed["v"].clone());
        let updated: Self = table.try_into().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("ModelParams always serializes")
    }

    /// Hex SHA-256 of the canonical JSON encoding; ties snapshots and reports
    /// to the parameters that produced them.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("ModelParams always serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn perf_std(&self) -> f64 {
        self.perf_noise.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_overrides_single_fields() {
        let mut p = ModelParams::default();
        p.set("perf_noise", "0.25").unwrap();
        p.set("rate_clamp", "[0.05, 0.95]").unwrap();
        p.set("topics_per_event", "3").unwrap();
        assert_eq!(p.perf_noise, 0.25);
        assert_eq!(p.rate_clamp, (0.05, 0.95));
        assert_eq!(p.topics_per_event, 3);
        assert!(p.set("no_such_field", "1").is_err());
        assert!(p.set("perf_noise", "abc").is_err());
        assert!(matches!(p.set("kt_guess", "0.9"), Err(ConfigError::Invalid { .. })));
        assert_eq!(p.kt_guess, 0.1);
    }

    #[test]
    fn defaults_are_valid() {
        ModelParams::default().validate().unwrap();
    }

    #[test]
    fn partial_config_overrides_defaults() {
        let p = ModelParams::from_toml_str("perf_noise = 1.0\nrate_clamp = [0.05, 0.95]\n").unwrap();
        assert_eq!(p.perf_noise, 1.0);
        assert_eq!(p.rate_clamp, (0.05, 0.95));
        assert_eq!(p.prior_variance, 1.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            ModelParams::from_toml_str("beta = 2.0"),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ModelParams::from_toml_str("kt_guess = 0.6\nkt_slip = 0.5").is_err());
        assert!(ModelParams::from_toml_str("prior_variance = 0.0").is_err());
        assert!(ModelParams::from_toml_str("label_threshold = 1.01").is_err());
        assert!(ModelParams::from_toml_str("rate_clamp = [0.9, 0.1]").is_err());
    }

    #[test]
    fn toml_round_trip_and_fingerprint() {
        let p = ModelParams {
            dynamics: 0.02,
            ..Default::default()
        };
        let back = ModelParams::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(p, back);
        assert_eq!(p.fingerprint(), back.fingerprint());
        assert_ne!(p.fingerprint(), ModelParams::default().fingerprint());
    }
}
