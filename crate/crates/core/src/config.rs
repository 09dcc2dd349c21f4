//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "tx": { "x": 0.0, "y": 0.0 },
//!   "rx": { "x": 60.0, "y": 0.0 },
//!   "irs": { "placement": "uniform", "count": 15 },
//!   "panel": { "n_h": 15, "n_v": 15, "d_h": 0.0031228381, "d_v": 0.0031228381 },
//!   "radio": {
//!     "tx_power_dbm": 10.0, "noise_floor_dbm": -94.0, "noise_figure_db": 10.0,
//!     "include_noise_figure": true, "carrier_hz": 3.0e9, "bandwidth_hz": 1.0e7,
//!     "gain_tx_dbi": 3.2, "gain_rx_dbi": 1.3
//!   },
//!   "path_loss": {
//!     "exponent_link1": 2.0, "exponent_link2": 2.0, "exponent_direct": 3.5,
//!     "intercept_db": -27.5, "sign_convention": "attenuation"
//!   },
//!   "correlation": { "correlated": true, "normalization": "element-area" }
//! }
//! ```
//!
//! `irs` may also be `{"placement": "random", "count": 8, "seed": 7}` or
//! `{"placement": "explicit", "positions": [{"x": 10, "y": 0}, ...]}`.
//! `correlation` is optional and defaults as shown.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{
    place_irs_random, place_irs_uniform, PanelGeometry, PathLossModel, Position, RadioConfig,
    Scenario,
};
use crate::spatialcorr::CorrelationOptions;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "placement", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IrsPlacement {
    Uniform { count: usize },
    Random { count: usize, seed: u64 },
    Explicit { positions: Vec<Position> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub tx: Position,
    pub rx: Position,
    pub irs: IrsPlacement,
    pub panel: PanelGeometry,
    pub radio: RadioConfig,
    pub path_loss: PathLossModel,
    #[serde(default)]
    pub correlation: CorrelationOptions,
}

/// A validated scenario plus its correlation options.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub correlation: CorrelationOptions,
    pub placement: IrsPlacement,
}

impl ConfigFile {
    pub fn resolve(self) -> Result<ExperimentConfig> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        let relabel = |e: Error| match e {
            Error::InvalidArgument(message) => Error::config("irs", message),
            other => other,
        };
        let irs_positions = match &self.irs {
            IrsPlacement::Uniform { count } => {
                place_irs_uniform(*count, self.tx, self.rx).map_err(relabel)?
            }
            IrsPlacement::Random { count, seed } => {
                place_irs_random(*count, self.tx, self.rx, *seed).map_err(relabel)?
            }
            IrsPlacement::Explicit { positions } => positions.clone(),
        };
        let scenario = Scenario {
            tx: self.tx,
            rx: self.rx,
            irs_positions,
            panel: self.panel,
            radio: self.radio,
            path_loss: self.path_loss,
        };
        scenario.validate()?;
        Ok(ExperimentConfig {
            scenario,
            correlation: self.correlation,
            placement: self.irs,
        })
    }

    /// Configuration file describing the reference deployment.
    pub fn reference(irs_count: usize, side: usize) -> Result<Self> {
        let s = Scenario::reference(irs_count, side)?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            tx: s.tx,
            rx: s.rx,
            irs: IrsPlacement::Uniform { count: irs_count },
            panel: s.panel,
            radio: s.radio,
            path_loss: s.path_loss,
            correlation: CorrelationOptions::default(),
        })
    }
}

/// Parses a configuration document; schema errors carry the key path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(
            if path.is_empty() { ".".into() } else { path },
            e.into_inner().to_string(),
        )
    })?;
    file.resolve()
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatialcorr::Normalization;

    #[test]
    fn reference_file_round_trips() {
        let file = ConfigFile::reference(15, 15).unwrap();
        let text = serde_json::to_string_pretty(&file).unwrap();
        let parsed = parse_config(&text).unwrap();
        assert_eq!(parsed.scenario, Scenario::reference(15, 15).unwrap());
        assert_eq!(parsed.correlation, CorrelationOptions::default());
    }

    #[test]
    fn schema_errors_name_the_key() {
        let mut v = serde_json::to_value(ConfigFile::reference(2, 2).unwrap()).unwrap();
        v["panel"]["n_h"] = serde_json::json!("many");
        match parse_config(&v.to_string()) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "panel.n_h"),
            other => panic!("unexpected {other:?}"),
        }

        let mut v = serde_json::to_value(ConfigFile::reference(2, 2).unwrap()).unwrap();
        v["panel"]["n_v"] = serde_json::json!(0);
        match parse_config(&v.to_string()) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "panel.n_v"),
            other => panic!("unexpected {other:?}"),
        }

        let mut v = serde_json::to_value(ConfigFile::reference(2, 2).unwrap()).unwrap();
        v["schema_version"] = serde_json::json!(7);
        assert!(matches!(parse_config(&v.to_string()), Err(Error::Config { path, .. }) if path == "schema_version"));

        let mut v = serde_json::to_value(ConfigFile::reference(2, 2).unwrap()).unwrap();
        v["irs"] = serde_json::json!({"placement": "uniform", "count": 0});
        assert!(matches!(parse_config(&v.to_string()), Err(Error::Config { path, .. }) if path == "irs"));
    }

    #[test]
    fn placement_variants() {
        let mut v = serde_json::to_value(ConfigFile::reference(2, 2).unwrap()).unwrap();
        v["irs"] = serde_json::json!({"placement": "explicit", "positions": [{"x": 10.0, "y": 1.0}, {"x": 20.0, "y": -1.0}]});
        v["correlation"] = serde_json::json!({"correlated": false, "normalization": "unit"});
        let cfg = parse_config(&v.to_string()).unwrap();
        assert_eq!(cfg.scenario.irs_positions[1], Position::new(20.0, -1.0));
        assert!(!cfg.correlation.correlated);
        assert_eq!(cfg.correlation.normalization, Normalization::Unit);

        v["irs"] = serde_json::json!({"placement": "random", "count": 5, "seed": 9});
        let a = parse_config(&v.to_string()).unwrap();
        let b = parse_config(&v.to_string()).unwrap();
        assert_eq!(a.scenario.irs_positions.len(), 5);
        assert_eq!(a, b);
    }
}
