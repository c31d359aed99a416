//! JSON identification report.
//!
//! Layout: `{"config": {...}, "channels": [{"input", "output", "delta",
//! "matched_frequencies", "astatism", "order", "coefficients", "residuals",
//! ...}]}`. Keys appear in declaration order and residuals are keyed by
//! candidate order in ascending numeric order, so identical inputs give
//! byte-identical reports.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::identify::{identify_channel, ChannelIdentification};
use crate::io::config::RunConfig;
use crate::io::telemetry::TelemetryRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub input: String,
    pub output: String,
    pub delta: f64,
    pub matched_frequencies: Vec<f64>,
    pub astatism: u8,
    pub order: usize,
    pub coefficients: Vec<f64>,
    pub residuals: BTreeMap<usize, f64>,
    pub input_coefficients: Vec<Complex64>,
    pub output_coefficients: Vec<Complex64>,
}

impl ChannelReport {
    pub fn new(input: impl Into<String>, output: impl Into<String>, delta: f64, id: ChannelIdentification) -> Self {
        ChannelReport {
            input: input.into(),
            output: output.into(),
            delta,
            matched_frequencies: id.matched_frequencies,
            astatism: id.astatism,
            order: id.order,
            coefficients: id.coefficients,
            residuals: id.residuals,
            input_coefficients: id.input_coefficients,
            output_coefficients: id.output_coefficients,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub channels: Vec<ChannelReport>,
}

pub fn emit_report(results: &[ChannelReport], config: &RunConfig) -> Result<String> {
    #[derive(Serialize)]
    struct View<'a> {
        config: &'a RunConfig,
        channels: &'a [ChannelReport],
    }
    let mut text = serde_json::to_string_pretty(&View {
        config,
        channels: results,
    })?;
    text.push('\n');
    Ok(text)
}

pub fn parse_report(text: &str) -> Result<Report> {
    Ok(serde_json::from_str(text)?)
}

/// Identifies every configured channel of `record`, up to `jobs` at a time.
/// Results follow the configured channel order.
pub fn identify_record(record: &TelemetryRecord, config: &RunConfig, jobs: usize) -> Result<Vec<ChannelReport>> {
    config.identify.validate()?;
    let input_names = config.input_columns(record)?;
    let inputs = input_names
        .iter()
        .map(|n| record.column(n).cloned())
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    pool.install(|| {
        config
            .channels
            .par_iter()
            .map(|ch| {
                let index = input_names
                    .iter()
                    .position(|n| n == &ch.input)
                    .expect("validated by input_columns");
                let output = record.column(&ch.output)?;
                let delta = config.identify.resolve_delta(output);
                let id = identify_channel(&inputs, output, index, &config.identify)?;
                Ok(ChannelReport::new(&ch.input, &ch.output, delta, id))
            })
            .collect()
    })
}
