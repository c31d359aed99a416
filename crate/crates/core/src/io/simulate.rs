//! Synthetic test rig described in JSON: harmonic inputs, optional couplings
//! between input pairs, outputs as sums of plant responses, and measurement
//! noise on every recorded column.
//!
//! ```json
//! {
//!   "dt": 0.5, "count": 4096,
//!   "inputs": [{"name": "x1", "model": {"terms": [{"omega": 0.3, "coeff": [1.0, 0.0]}]}}],
//!   "couplings": [{"between": ["x1", "x2"], "model": {"terms": [...]}}],
//!   "outputs": [{"name": "y", "paths": [{"input": "x1", "plant": {"astatism": 0, "coefficients": [1.0, 2.0]}}]}]
//! }
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::io::telemetry::TelemetryRecord;
use crate::signals::{
    apply_noise, simulate_channel, synth_coupled_inputs, synth_harmonic_from, ChannelModel, HarmonicModel, NoiseSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub name: String,
    pub model: HarmonicModel,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub between: [String; 2],
    pub model: HarmonicModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub input: String,
    pub plant: ChannelModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub name: String,
    pub paths: Vec<PathSpec>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub dt: f64,
    pub count: usize,
    #[serde(default)]
    pub t0: f64,
    pub inputs: Vec<InputSpec>,
    #[serde(default)]
    pub couplings: Vec<CouplingSpec>,
    pub outputs: Vec<OutputSpec>,
}

impl SimulationSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Record resolution `2*pi / ((count - 1) * dt)`.
    pub fn resolution(&self) -> f64 {
        2.0 * PI / ((self.count.saturating_sub(1)) as f64 * self.dt)
    }

    fn input_index(&self, name: &str) -> Result<usize> {
        self.inputs
            .iter()
            .position(|i| i.name == name)
            .ok_or_else(|| invalid(format!("unknown input {name:?}")))
    }
}

/// Measured inputs followed by measured outputs, as one record.
pub fn simulate_record(spec: &SimulationSpec) -> Result<TelemetryRecord> {
    if spec.count < 2 || !(spec.dt > 0.0) {
        return Err(invalid("simulation needs count >= 2 and dt > 0"));
    }
    let independent: Vec<HarmonicModel> = spec.inputs.iter().map(|i| i.model.clone()).collect();
    let mut couplings = BTreeMap::new();
    for c in &spec.couplings {
        let key = (spec.input_index(&c.between[0])?, spec.input_index(&c.between[1])?);
        if couplings.insert(key, c.model.clone()).is_some() {
            return Err(invalid(format!("coupling {:?} listed twice", c.between)));
        }
    }
    let exact = synth_coupled_inputs(&independent, &couplings, spec.resolution())?;

    let synth = |m: &HarmonicModel| synth_harmonic_from(m, spec.count, spec.dt, spec.t0);
    let measure = |m: &HarmonicModel, noise: &Option<NoiseSpec>| {
        let clean = synth(m)?;
        match noise {
            Some(n) => apply_noise(&clean, n),
            None => Ok(clean),
        }
    };

    let mut names = Vec::new();
    let mut signals = Vec::new();
    for (input, model) in spec.inputs.iter().zip(&exact) {
        names.push(input.name.clone());
        signals.push(measure(model, &input.noise)?);
    }
    for output in &spec.outputs {
        let mut model = HarmonicModel::empty();
        for path in &output.paths {
            let drive = &exact[spec.input_index(&path.input)?];
            model = model.add(&simulate_channel(&path.plant, drive)?);
        }
        names.push(output.name.clone());
        signals.push(measure(&model, &output.noise)?);
    }
    TelemetryRecord::new(names, signals)
}
