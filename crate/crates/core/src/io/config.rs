use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::identify::IdentifyConfig;
use crate::io::telemetry::TelemetryRecord;

/// One channel to identify: input column to output column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub input: String,
    pub output: String,
}

/// JSON run configuration. Every identification setting is echoed into the
/// report with its resolved default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub channels: Vec<ChannelSpec>,
    /// Columns treated as system inputs when pruning shared components.
    /// Defaults to every column that is not a channel output.
    #[serde(default)]
    pub inputs: Option<Vec<String>>,
    #[serde(flatten)]
    pub identify: IdentifyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(channels: Vec<ChannelSpec>) -> Self {
        RunConfig {
            channels,
            inputs: None,
            identify: IdentifyConfig::default(),
            data: None,
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.identify.validate()?;
        Ok(config)
    }

    /// Input column names in record order, checked against the channel list.
    pub fn input_columns(&self, record: &TelemetryRecord) -> Result<Vec<String>> {
        for ch in &self.channels {
            record.column(&ch.input)?;
            record.column(&ch.output)?;
        }
        let inputs: Vec<String> = match &self.inputs {
            Some(list) => {
                for name in list {
                    record.column(name)?;
                }
                list.clone()
            }
            None => record
                .names()
                .iter()
                .filter(|n| !self.channels.iter().any(|c| &c.output == *n))
                .cloned()
                .collect(),
        };
        for ch in &self.channels {
            if !inputs.contains(&ch.input) {
                return Err(invalid(format!("channel input {:?} is not among the inputs", ch.input)));
            }
            if inputs.contains(&ch.output) {
                return Err(invalid(format!(
                    "column {:?} is both an input and an output",
                    ch.output
                )));
            }
        }
        Ok(inputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::telemetry::parse_csv;

    #[test]
    fn defaults_are_filled() {
        let cfg = RunConfig::from_json(r#"{"channels":[{"input":"x1","output":"y"}]}"#).unwrap();
        assert_eq!(cfg.identify, IdentifyConfig::default());
        let echoed = serde_json::to_value(&cfg).unwrap();
        assert_eq!(echoed["fit_tolerance"], 1e-3);
        assert_eq!(echoed["max_order"], 10);
        assert_eq!(echoed["peak"]["rel_threshold"], 0.02);
        assert!(echoed["delta"].is_null());
    }

    #[test]
    fn overrides_and_validation() {
        let cfg = RunConfig::from_json(
            r#"{"channels":[],"delta":0.01,"max_order":4,"gain_sign":"negative","peak":{"refine":false}}"#,
        )
        .unwrap();
        assert_eq!(cfg.identify.delta, Some(0.01));
        assert_eq!(cfg.identify.max_order, 4);
        assert!(!cfg.identify.peak.refine);
        assert_eq!(cfg.identify.peak.rel_threshold, 0.02);
        assert!(RunConfig::from_json(r#"{"channels":[],"fit_tolerance":-1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"channels":[],"max_order":0}"#).is_err());
    }

    #[test]
    fn input_resolution() {
        let rec = parse_csv("t,x1,x2,y\n0,1,2,3\n1,1,2,3\n").unwrap();
        let mut cfg = RunConfig::new(vec![ChannelSpec {
            input: "x1".into(),
            output: "y".into(),
        }]);
        assert_eq!(cfg.input_columns(&rec).unwrap(), vec!["x1", "x2"]);
        cfg.inputs = Some(vec!["x2".into()]);
        assert!(cfg.input_columns(&rec).is_err());
        cfg.inputs = None;
        cfg.channels[0].output = "z".into();
        assert!(cfg.input_columns(&rec).is_err());
    }
}
