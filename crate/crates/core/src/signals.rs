//! Signal data model, almost-periodic synthesis, noise injection and the
//! known-plant simulator.
//!
//! Complex coefficients follow one convention throughout the crate: a term
//! `(omega, c)` contributes `Re{c * exp(j*omega*t)}` to the signal. Under
//! this convention differentiation is multiplication by `j*omega`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::freqset::delta_equal;

/// A uniformly sampled real record.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    dt: f64,
    t0: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        Self::with_start(samples, dt, 0.0)
    }

    pub fn with_start(samples: Vec<f64>, dt: f64, t0: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("sampling interval must be positive, got {dt}")));
        }
        if samples.len() < 2 {
            return Err(invalid("a signal needs at least two samples"));
        }
        if !t0.is_finite() {
            return Err(invalid("start time must be finite"));
        }
        Ok(Signal { samples, dt, t0 })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Record length `(N - 1) * dt`.
    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    /// Frequency resolution `2*pi / T` of the record.
    pub fn resolution(&self) -> f64 {
        2.0 * PI / self.duration()
    }

    /// Sampling limit `pi / dt`.
    pub fn nyquist(&self) -> f64 {
        PI / self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |i| self.time(i))
    }

    /// Same geometry, new samples.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Signal {
        debug_assert_eq!(samples.len(), self.samples.len());
        Signal {
            samples,
            dt: self.dt,
            t0: self.t0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Signal {
        self.with_samples(self.samples.iter().map(|v| v * factor).collect())
    }

    pub fn same_geometry(&self, other: &Signal) -> bool {
        self.samples.len() == other.samples.len() && self.dt == other.dt && self.t0 == other.t0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub omega: f64,
    pub coeff: Complex64,
}

impl Harmonic {
    pub fn new(omega: f64, coeff: Complex64) -> Self {
        Harmonic { omega, coeff }
    }

    /// A cosine of the given amplitude and phase (radians).
    pub fn polar(omega: f64, amplitude: f64, phase: f64) -> Self {
        Harmonic {
            omega,
            coeff: Complex64::from_polar(amplitude, phase),
        }
    }
}

/// Finite almost-periodic sum `dc + sum Re{c_k exp(j w_k t)}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawHarmonicModel")]
pub struct HarmonicModel {
    dc: f64,
    terms: Vec<Harmonic>,
}

#[derive(Deserialize)]
struct RawHarmonicModel {
    #[serde(default)]
    dc: f64,
    #[serde(default)]
    terms: Vec<Harmonic>,
}

impl TryFrom<RawHarmonicModel> for HarmonicModel {
    type Error = Error;

    fn try_from(raw: RawHarmonicModel) -> Result<Self> {
        HarmonicModel::new(raw.dc, raw.terms)
    }
}

impl HarmonicModel {
    pub fn new(dc: f64, terms: Vec<Harmonic>) -> Result<Self> {
        if !dc.is_finite() {
            return Err(invalid("dc must be finite"));
        }
        for (i, h) in terms.iter().enumerate() {
            if !(h.omega > 0.0) || !h.omega.is_finite() {
                return Err(invalid(format!("harmonic frequency must be positive, got {}", h.omega)));
            }
            if !h.coeff.re.is_finite() || !h.coeff.im.is_finite() {
                return Err(invalid("harmonic coefficient must be finite"));
            }
            if terms[..i].iter().any(|o| o.omega == h.omega) {
                return Err(invalid(format!("duplicate harmonic frequency {}", h.omega)));
            }
        }
        Ok(HarmonicModel { dc, terms })
    }

    pub fn empty() -> Self {
        HarmonicModel::default()
    }

    pub fn dc(&self) -> f64 {
        self.dc
    }

    pub fn terms(&self) -> &[Harmonic] {
        &self.terms
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.terms.iter().map(|h| h.omega).collect()
    }

    pub fn coeff_at(&self, omega: f64) -> Option<Complex64> {
        self.terms.iter().find(|h| h.omega == omega).map(|h| h.coeff)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.dc
            + self
                .terms
                .iter()
                .map(|h| {
                    let (s, c) = (h.omega * t).sin_cos();
                    h.coeff.re * c - h.coeff.im * s
                })
                .sum::<f64>()
    }

    /// Mean square over an infinite horizon: `dc^2 + sum |c|^2 / 2`.
    pub fn mean_square(&self) -> f64 {
        self.dc * self.dc + self.terms.iter().map(|h| h.coeff.norm_sqr() / 2.0).sum::<f64>()
    }

    pub fn scale(&self, factor: f64) -> HarmonicModel {
        HarmonicModel {
            dc: self.dc * factor,
            terms: self
                .terms
                .iter()
                .map(|h| Harmonic::new(h.omega, h.coeff * factor))
                .collect(),
        }
    }

    /// Term-wise sum; coefficients of exactly equal frequencies are added.
    pub fn add(&self, other: &HarmonicModel) -> HarmonicModel {
        let mut terms = self.terms.clone();
        for h in &other.terms {
            match terms.iter_mut().find(|t| t.omega == h.omega) {
                Some(t) => t.coeff += h.coeff,
                None => terms.push(*h),
            }
        }
        HarmonicModel {
            dc: self.dc + other.dc,
            terms,
        }
    }
}

/// Noise model for one measured channel:
/// `x~ = (mult_mean + mult_fluct(t)) * x + additive(t) + coupling(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mult_mean: f64,
    #[serde(default)]
    pub mult_fluct: HarmonicModel,
    #[serde(default)]
    pub additive: HarmonicModel,
    #[serde(default)]
    pub coupling: Option<HarmonicModel>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::clean()
    }
}

impl NoiseSpec {
    /// Unit gain, no disturbances.
    pub fn clean() -> Self {
        NoiseSpec {
            mult_mean: 1.0,
            mult_fluct: HarmonicModel::empty(),
            additive: HarmonicModel::empty(),
            coupling: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mult_mean.is_finite() {
            return Err(invalid("multiplicative mean must be finite"));
        }
        if self.mult_fluct.dc() != 0.0 {
            return Err(invalid("multiplicative fluctuation must have zero mean"));
        }
        Ok(())
    }

    /// Checks that the frequency sets of the noise components are pairwise
    /// disjoint at resolution `delta`.
    pub fn check_disjoint(&self, delta: f64) -> Result<()> {
        let mut sets = vec![self.mult_fluct.frequencies(), self.additive.frequencies()];
        if let Some(c) = &self.coupling {
            sets.push(c.frequencies());
        }
        for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                for &a in &sets[i] {
                    if let Some(&b) = sets[j].iter().find(|&&b| delta_equal(a, b, delta)) {
                        return Err(invalid(format!("noise components overlap at {a} and {b} rad/s")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Samples `model` at `t0 + i*dt`, `i = 0..count`.
pub fn synth_harmonic(model: &HarmonicModel, count: usize, dt: f64) -> Result<Signal> {
    synth_harmonic_from(model, count, dt, 0.0)
}

pub fn synth_harmonic_from(model: &HarmonicModel, count: usize, dt: f64, t0: f64) -> Result<Signal> {
    if count < 2 {
        return Err(invalid(format!("sample count must be at least 2, got {count}")));
    }
    if !(dt > 0.0) {
        return Err(invalid(format!("sampling interval must be positive, got {dt}")));
    }
    let samples = (0..count).map(|i| model.eval(t0 + i as f64 * dt)).collect();
    Signal::with_start(samples, dt, t0)
}

/// Applies multiplicative and additive disturbances sample by sample.
pub fn apply_noise(x: &Signal, spec: &NoiseSpec) -> Result<Signal> {
    spec.validate()?;
    let samples = x
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let t = x.time(i);
            let gain = spec.mult_mean + spec.mult_fluct.eval(t);
            let coupling = spec.coupling.as_ref().map_or(0.0, |c| c.eval(t));
            gain * v + spec.additive.eval(t) + coupling
        })
        .collect();
    Ok(x.with_samples(samples))
}

/// Channel operator `D(s) y = x` with `D(s) = sum_k T_k s^k`,
/// `k = astatism ..= astatism + order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannelModel")]
pub struct ChannelModel {
    astatism: u8,
    coefficients: Vec<f64>,
}

#[derive(Deserialize)]
struct RawChannelModel {
    astatism: u8,
    coefficients: Vec<f64>,
}

impl TryFrom<RawChannelModel> for ChannelModel {
    type Error = Error;

    fn try_from(raw: RawChannelModel) -> Result<Self> {
        ChannelModel::new(raw.astatism, raw.coefficients)
    }
}

impl ChannelModel {
    pub fn new(astatism: u8, coefficients: Vec<f64>) -> Result<Self> {
        if astatism > 2 {
            return Err(invalid(format!("astatism order must be 0, 1 or 2, got {astatism}")));
        }
        match coefficients.last() {
            None => return Err(invalid("a channel model needs at least one coefficient")),
            Some(&0.0) => return Err(invalid("leading coefficient must be nonzero")),
            _ => {}
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coefficients must be finite"));
        }
        Ok(ChannelModel { astatism, coefficients })
    }

    pub fn astatism(&self) -> u8 {
        self.astatism
    }

    /// `T_{p_a} ..= T_{p_a + n}`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `D(j*omega)`.
    pub fn eval(&self, omega: f64) -> Complex64 {
        let s = Complex64::new(0.0, omega);
        let mut acc = Complex64::new(0.0, 0.0);
        for &t in self.coefficients.iter().rev() {
            acc = acc * s + t;
        }
        acc * s.powi(self.astatism as i32)
    }
}

/// Forced response of `plant` to an almost-periodic input: each tone is
/// divided by `D(j*omega)`, so the output carries exactly the input's
/// frequencies.
pub fn simulate_channel(plant: &ChannelModel, input: &HarmonicModel) -> Result<HarmonicModel> {
    let dc = if input.dc() == 0.0 {
        0.0
    } else if plant.astatism() > 0 {
        return Err(invalid("input with nonzero mean drives an astatic plant without bound"));
    } else {
        let gain = plant.coefficients()[0];
        if gain == 0.0 {
            return Err(Error::SingularPlant { omega: 0.0 });
        }
        input.dc() / gain
    };
    let terms = input
        .terms()
        .iter()
        .map(|h| {
            let d = plant.eval(h.omega);
            if d.norm() == 0.0 {
                Err(Error::SingularPlant { omega: h.omega })
            } else {
                Ok(Harmonic::new(h.omega, h.coeff / d))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HarmonicModel { dc, terms })
}

/// Builds linearly dependent inputs: input `i` is its independent model plus
/// every coupling `(i, l)` or `(l, i)` it participates in.
pub fn synth_coupled_inputs(
    independent: &[HarmonicModel],
    couplings: &BTreeMap<(usize, usize), HarmonicModel>,
    delta: f64,
) -> Result<Vec<HarmonicModel>> {
    if !(delta > 0.0) {
        return Err(invalid("delta must be positive"));
    }
    let mut inputs = independent.to_vec();
    for (&(i, l), coupling) in couplings {
        if i == l || i >= inputs.len() || l >= inputs.len() {
            return Err(invalid(format!("invalid coupling pair ({i}, {l})")));
        }
        for h in coupling.terms() {
            let clash = independent
                .iter()
                .flat_map(|m| m.terms())
                .any(|t| delta_equal(t.omega, h.omega, delta));
            if clash {
                return Err(Error::AmbiguousCoupling { omega: h.omega });
            }
        }
        inputs[i] = inputs[i].add(coupling);
        inputs[l] = inputs[l].add(coupling);
    }
    Ok(inputs)
}
