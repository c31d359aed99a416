//! Seeded synthetic rigs shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::PI;

use apfid::signals::{simulate_channel, synth_harmonic};
use apfid::{ChannelModel, Complex64, GainSign, Harmonic, HarmonicModel, Signal};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Coefficient magnitudes log-uniform in [0.1, 10].
pub fn random_plant(rng: &mut ChaCha8Rng, order: usize, astatism: u8, sign: GainSign) -> ChannelModel {
    let s = match sign {
        GainSign::Positive => 1.0,
        GainSign::Negative => -1.0,
    };
    let coeffs = (0..=order)
        .map(|_| s * 10f64.powf(rng.random_range(-1.0..1.0)))
        .collect();
    ChannelModel::new(astatism, coeffs).unwrap()
}

#[derive(Debug, Clone)]
pub struct SuitePlant {
    pub plant: ChannelModel,
    pub sign: GainSign,
    pub seed: u64,
}

/// Twenty plants covering order 1..=5 and astatism 0 and 1, alternating
/// between the positive and the all-negative coefficient regime.
pub fn suite_plants() -> Vec<SuitePlant> {
    (0..20u64)
        .map(|i| {
            let seed = 1000 + i;
            let mut r = rng(seed);
            let order = 1 + (i as usize % 5);
            let astatism = ((i / 5) % 2) as u8;
            let sign = if i % 2 == 0 {
                GainSign::Negative
            } else {
                GainSign::Positive
            };
            SuitePlant {
                plant: random_plant(&mut r, order, astatism, sign),
                sign,
                seed,
            }
        })
        .collect()
}

/// Tone count in 3..=8 giving at least two more real equations than the
/// `order + 1` unknowns.
pub fn tone_count(rng: &mut ChaCha8Rng, order: usize) -> usize {
    rng.random_range(((order + 4) / 2).max(3)..=8)
}

/// `count` frequencies log-uniform in `[lo, hi]` with ratio gaps of at least 15%.
pub fn incommensurable_tones(rng: &mut ChaCha8Rng, count: usize, lo: f64, hi: f64) -> Vec<f64> {
    loop {
        let mut w: Vec<f64> = (0..count)
            .map(|_| (lo.ln() + rng.random_range(0.0..1.0) * (hi / lo).ln()).exp())
            .collect();
        w.sort_by(f64::total_cmp);
        if w.windows(2).all(|p| p[1] / p[0] > 1.15) {
            return w;
        }
    }
}

pub fn random_input(rng: &mut ChaCha8Rng, omegas: &[f64]) -> HarmonicModel {
    HarmonicModel::new(
        0.0,
        omegas
            .iter()
            .map(|&w| Harmonic::polar(w, rng.random_range(0.5..1.5), rng.random_range(-PI..PI)))
            .collect(),
    )
    .unwrap()
}

pub fn coeffs(model: &HarmonicModel) -> Vec<Complex64> {
    model.terms().iter().map(|h| h.coeff).collect()
}

pub fn max_rel_error(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len(), "coefficient count");
    got.iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs() / w.abs())
        .fold(0.0, f64::max)
}

/// Multisine rig on exact record bins: every tone completes an integer
/// number of periods over `N * dt`.
pub struct BinRig {
    pub count: usize,
    pub dt: f64,
}

impl BinRig {
    /// 4096 samples with bin 32 at 0.04 rad/s.
    pub fn standard() -> Self {
        let count = 4096;
        BinRig {
            count,
            dt: 2.0 * PI * 32.0 / (0.04 * count as f64),
        }
    }

    pub fn omega(&self, bin: usize) -> f64 {
        2.0 * PI * bin as f64 / (self.count as f64 * self.dt)
    }

    pub fn resolution(&self) -> f64 {
        2.0 * PI / ((self.count - 1) as f64 * self.dt)
    }

    pub fn synth(&self, model: &HarmonicModel) -> Signal {
        synth_harmonic(model, self.count, self.dt).unwrap()
    }

    /// `tones` bins: one low tone in 32..40 and one high tone in 1000..1500
    /// so the record excites the whole band, the rest log-spread over
    /// 60..1500, with at least 24 bins between neighbours.
    pub fn bins(&self, rng: &mut ChaCha8Rng, tones: usize) -> Vec<usize> {
        loop {
            let mut bins = vec![rng.random_range(32..40usize), rng.random_range(1000..1500usize)];
            for _ in 2..tones {
                let u: f64 = rng.random_range(0.0..1.0);
                bins.push((60f64.ln() + u * (1500f64 / 60.0).ln()).exp().round() as usize);
            }
            bins.sort_unstable();
            if bins.windows(2).all(|p| p[1] - p[0] >= 24) {
                return bins;
            }
        }
    }

    /// Input tones with amplitude proportional to `sqrt|D(jw)|`, so input and
    /// output spectra span comparable dynamic ranges.
    pub fn shaped_input(&self, rng: &mut ChaCha8Rng, plant: &ChannelModel, bins: &[usize]) -> HarmonicModel {
        let raw: Vec<(f64, f64)> = bins
            .iter()
            .map(|&b| {
                let w = self.omega(b);
                (w, plant.eval(w).norm().sqrt() * rng.random_range(0.8..1.2))
            })
            .collect();
        let peak = raw.iter().map(|r| r.1).fold(0.0, f64::max);
        HarmonicModel::new(
            0.0,
            raw.into_iter()
                .map(|(w, a)| Harmonic::polar(w, a / peak, rng.random_range(-PI..PI)))
                .collect(),
        )
        .unwrap()
    }

    /// Sum of tones of `amplitude * scale(rng)` at the given bins with random
    /// phases.
    pub fn tones_at(&self, rng: &mut ChaCha8Rng, bins: &[usize], amplitude: f64) -> HarmonicModel {
        HarmonicModel::new(
            0.0,
            bins.iter()
                .map(|&b| {
                    Harmonic::polar(
                        self.omega(b),
                        amplitude * rng.random_range(0.5..1.0),
                        rng.random_range(-PI..PI),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    /// `count` bins in `lo..hi`, each at least `gap` bins from every member
    /// of `avoid` and from each other.
    pub fn free_bins(
        &self,
        rng: &mut ChaCha8Rng,
        count: usize,
        lo: usize,
        hi: usize,
        gap: usize,
        avoid: &[usize],
    ) -> Vec<usize> {
        let mut taken = avoid.to_vec();
        let mut out = Vec::new();
        while out.len() < count {
            let b = rng.random_range(lo..hi);
            if taken.iter().all(|&t| t.abs_diff(b) >= gap) {
                taken.push(b);
                out.push(b);
            }
        }
        out.sort_unstable();
        out
    }

    pub fn respond(&self, plant: &ChannelModel, input: &HarmonicModel) -> HarmonicModel {
        simulate_channel(plant, input).unwrap()
    }
}
