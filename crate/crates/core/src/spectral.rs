//! Whole-record amplitude spectrum on a dense frequency grid and peak
//! extraction.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::freqset::{delta_equal, FrequencySet};
use num_complex::Complex64;

use crate::projection::{mean_phasor, time_average, RESYNC};
use crate::signals::Signal;

/// Amplitude spectrum sampled on a uniform grid of positive frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    omegas: Vec<f64>,
    amplitudes: Vec<f64>,
    dc: f64,
    count: usize,
    dt: f64,
}

impl Spectrum {
    /// `count` and `dt` describe the record the amplitudes were computed
    /// from; they fix its leakage kernel.
    pub fn new(omegas: Vec<f64>, amplitudes: Vec<f64>, dc: f64, count: usize, dt: f64) -> Result<Self> {
        if omegas.len() != amplitudes.len() {
            return Err(invalid("spectrum grid and amplitudes differ in length"));
        }
        if omegas.first().is_some_and(|&w| !(w > 0.0)) || omegas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("spectrum grid must be positive and strictly increasing"));
        }
        if amplitudes.iter().any(|a| !(*a >= 0.0)) {
            return Err(invalid("amplitudes must be non-negative"));
        }
        if count < 2 || !(dt > 0.0) {
            return Err(invalid(
                "record needs at least two samples and a positive sampling interval",
            ));
        }
        Ok(Spectrum {
            omegas,
            amplitudes,
            dc,
            count,
            dt,
        })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn dc(&self) -> f64 {
        self.dc
    }

    /// `2*pi / T` of the record the spectrum was computed from.
    pub fn resolution(&self) -> f64 {
        2.0 * PI / ((self.count - 1) as f64 * self.dt)
    }

    /// Magnitude of the record's rectangular-window kernel at offset `gap`:
    /// the amplitude a unit tone shows at `gap` rad/s from itself.
    pub fn kernel(&self, gap: f64) -> f64 {
        let half = 0.5 * gap * self.dt;
        let denom = self.count as f64 * half.sin();
        if denom.abs() < 1e-12 {
            return 1.0;
        }
        ((self.count as f64 * half).sin() / denom).abs().min(1.0)
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

/// Grid step a quarter of the record resolution.
pub fn default_grid_step(x: &Signal) -> f64 {
    x.resolution() / 4.0
}

/// Largest usable scan limit: one grid step short of `pi / dt`.
pub fn default_omega_max(x: &Signal) -> f64 {
    x.nyquist() - default_grid_step(x)
}

/// Amplitude `|2 (1/N) sum (x_n - mean) exp(-j w t_n)|` at `w = k * grid_step`,
/// `k = 1, 2, ...` up to `omega_max`. The mean is reported as `dc` and kept
/// out of the tone amplitudes.
pub fn amplitude_spectrum(x: &Signal, omega_max: f64, grid_step: f64) -> Result<Spectrum> {
    let resolution = x.resolution();
    if !(grid_step > 0.0) {
        return Err(invalid(format!("grid step must be positive, got {grid_step}")));
    }
    if grid_step > resolution / 4.0 * (1.0 + 1e-9) {
        return Err(invalid(format!(
            "grid step {grid_step} exceeds a quarter of the resolution {resolution}"
        )));
    }
    if !(omega_max < x.nyquist()) {
        return Err(Error::Aliasing {
            omega_max,
            nyquist: x.nyquist(),
        });
    }
    let points = (omega_max / grid_step).floor() as usize;
    if points == 0 {
        return Err(invalid("omega_max is below the first grid point"));
    }
    let dc = time_average(x);
    let centered = x.with_samples(x.samples().iter().map(|v| v - dc).collect());
    let omegas: Vec<f64> = (1..=points).map(|k| k as f64 * grid_step).collect();
    let amplitudes = omegas
        .par_iter()
        .map(|&w| 2.0 * mean_phasor(&centered, w).norm())
        .collect();
    Spectrum::new(omegas, amplitudes, dc, x.len(), x.dt())
}

/// Peak acceptance rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakPolicy {
    /// Minimum amplitude as a fraction of the spectrum maximum.
    pub rel_threshold: f64,
    /// Three-point quadratic interpolation of peak location.
    pub refine: bool,
    /// Refit the peaks jointly against the record and search the fit
    /// residual for masked tones (see [`extract_tones`]); needs the signal,
    /// so [`detect_peaks`] alone ignores it.
    pub polish: bool,
    /// A peak must exceed this multiple of the rectangular-window leakage
    /// of the stronger peaks already accepted (both their positive and image
    /// lobes). Zero disables the sidelobe test.
    pub leakage_margin: f64,
}

impl Default for PeakPolicy {
    fn default() -> Self {
        PeakPolicy {
            rel_threshold: 0.02,
            refine: true,
            polish: true,
            leakage_margin: 2.0,
        }
    }
}

impl PeakPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_threshold > 0.0 && self.rel_threshold <= 1.0) {
            return Err(invalid(format!(
                "relative threshold must be in (0, 1], got {}",
                self.rel_threshold
            )));
        }
        if !(self.leakage_margin >= 0.0) {
            return Err(invalid("leakage margin must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Peak {
    omega: f64,
    amplitude: f64,
}

/// Frequencies of strict local maxima above threshold, strongest first:
/// a candidate within `delta` of an accepted peak is merged into it, and a
/// candidate explainable as sidelobe leakage of accepted peaks is dropped.
pub fn detect_peaks(s: &Spectrum, policy: &PeakPolicy, delta: f64) -> Result<FrequencySet> {
    policy.validate()?;
    let a = &s.amplitudes;
    let max = a.iter().copied().fold(0.0, f64::max);
    if max == 0.0 || a.len() < 3 {
        return FrequencySet::empty(delta);
    }
    let floor = policy.rel_threshold * max;
    let mut candidates: Vec<Peak> = (1..a.len() - 1)
        .filter(|&i| a[i] > a[i - 1] && a[i] > a[i + 1] && a[i] >= floor)
        .map(|i| {
            if policy.refine {
                refine(&s.omegas, a, i)
            } else {
                Peak {
                    omega: s.omegas[i],
                    amplitude: a[i],
                }
            }
        })
        .collect();
    candidates.sort_by(|p, q| q.amplitude.total_cmp(&p.amplitude).then(p.omega.total_cmp(&q.omega)));

    let mut accepted: Vec<Peak> = Vec::new();
    for c in candidates {
        if accepted.iter().any(|p| (p.omega - c.omega).abs() < delta) {
            continue;
        }
        if policy.leakage_margin > 0.0 {
            let leak: f64 = accepted
                .iter()
                .map(|p| p.amplitude * (s.kernel(c.omega - p.omega) + s.kernel(c.omega + p.omega)))
                .sum();
            if c.amplitude <= policy.leakage_margin * leak {
                continue;
            }
        }
        accepted.push(c);
    }
    FrequencySet::new(accepted.into_iter().map(|p| p.omega).collect(), delta)
}

/// Sweep limit of the joint tone fit; sweeps stop earlier once no frequency
/// moves by more than `POLISH_SETTLE * half_width`.
const POLISH_SWEEPS: usize = 16;
const POLISH_SETTLE: f64 = 1e-9;

/// Residual searches in [`extract_tones`].
const EXTRACTION_ROUNDS: usize = 3;

/// Least-squares fit of one real sinusoid `Re{c exp(j*omega*t)}` to `r`:
/// returns the captured energy and `c`.
fn tone_fit(x: &Signal, r: &[f64], omega: f64) -> (f64, Complex64) {
    let step = Complex64::from_polar(1.0, omega * x.dt());
    let (mut rc, mut rs, mut cc, mut ss, mut cs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (block, chunk) in r.chunks(RESYNC).enumerate() {
        let mut phasor = Complex64::from_polar(1.0, omega * x.time(block * RESYNC));
        for &v in chunk {
            let (c, s) = (phasor.re, phasor.im);
            rc += v * c;
            rs += v * s;
            cc += c * c;
            ss += s * s;
            cs += c * s;
            phasor *= step;
        }
    }
    let det = cc * ss - cs * cs;
    if !(det > 0.0) {
        return (0.0, Complex64::new(0.0, 0.0));
    }
    let a = (ss * rc - cs * rs) / det;
    let b = (cc * rs - cs * rc) / det;
    (a * rc + b * rs, Complex64::new(a, -b))
}

fn add_tone(x: &Signal, acc: &mut [f64], omega: f64, c: Complex64, sign: f64) {
    let step = Complex64::from_polar(1.0, omega * x.dt());
    for (block, chunk) in acc.chunks_mut(RESYNC).enumerate() {
        let mut phasor = Complex64::from_polar(1.0, omega * x.time(block * RESYNC));
        for v in chunk {
            *v += sign * (c * phasor).re;
            phasor *= step;
        }
    }
}

/// Joint fit of a constant and real sinusoids starting from `omegas`: each
/// sweep refits every tone, within `half_width` of its starting estimate,
/// against the record minus the current fits of everything else, then
/// refits the constant. Returns the tones and the full fitted record.
fn relax(x: &Signal, omegas: &[f64], half_width: f64) -> (Vec<(f64, Complex64)>, Vec<f64>) {
    let samples = x.samples();
    let top = x.nyquist();
    let bounds: Vec<(f64, f64)> = omegas
        .iter()
        .map(|&w| ((w - half_width).max(0.5 * w), (w + half_width).min(0.5 * (w + top))))
        .collect();
    let dc = time_average(x);
    let centered: Vec<f64> = samples.iter().map(|v| v - dc).collect();
    let mut tones: Vec<(f64, Complex64)> = omegas.iter().map(|&w| (w, tone_fit(x, &centered, w).1)).collect();
    let mut fitted = vec![dc; samples.len()];
    for &(w, c) in &tones {
        add_tone(x, &mut fitted, w, c, 1.0);
    }
    let mut residual = vec![0.0; samples.len()];
    for _ in 0..POLISH_SWEEPS {
        let mut moved: f64 = 0.0;
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            let (w, c) = tones[k];
            add_tone(x, &mut fitted, w, c, -1.0);
            for ((r, v), f) in residual.iter_mut().zip(samples).zip(&fitted) {
                *r = v - f;
            }
            let w = golden_max(|v| tone_fit(x, &residual, v).0, lo, hi);
            let c = tone_fit(x, &residual, w).1;
            add_tone(x, &mut fitted, w, c, 1.0);
            moved = moved.max((w - tones[k].0).abs());
            tones[k] = (w, c);
        }
        let shift = samples.iter().zip(&fitted).map(|(v, f)| v - f).sum::<f64>() / samples.len() as f64;
        fitted.iter_mut().for_each(|f| *f += shift);
        if moved <= POLISH_SETTLE * half_width {
            break;
        }
    }
    (tones, fitted)
}

/// Sharpens the frequencies of `peaks` by a joint fit of real sinusoids to
/// `x`, each tone searched within `half_width` of its estimate.
///
/// Quadratic interpolation of the amplitude spectrum is biased by the
/// leakage of neighbouring tones and of the tone's own image at `-omega`;
/// the biased location then leaks those neighbours into the projections.
pub fn polish_peaks(x: &Signal, peaks: &FrequencySet, half_width: f64) -> Result<FrequencySet> {
    if !(half_width > 0.0) {
        return Err(invalid("polish half-width must be positive"));
    }
    let (tones, _) = relax(x, peaks.omegas(), half_width);
    FrequencySet::new(tones.into_iter().map(|t| t.0).collect(), peaks.delta())
}

/// Tones of `x` given its spectrum: the detected peaks, polished by a joint
/// fit when the policy asks for it, plus peaks that surface in the spectrum
/// of the fit residual once the stronger tones are removed (a weak tone a
/// few bins from a strong one hides under its sidelobes). Residual peaks
/// must clear the same absolute threshold as the original ones.
pub fn extract_tones(x: &Signal, spectrum: &Spectrum, policy: &PeakPolicy, delta: f64) -> Result<FrequencySet> {
    let peaks = detect_peaks(spectrum, policy, delta)?;
    if !policy.polish || peaks.is_empty() {
        return Ok(peaks);
    }
    let floor = policy.rel_threshold * spectrum.amplitudes.iter().copied().fold(0.0, f64::max);
    let (grid_step, omega_max) = (spectrum.omegas[0], spectrum.omegas[spectrum.len() - 1]);
    let (mut tones, mut fitted) = relax(x, peaks.omegas(), 0.5 * delta);
    for _ in 0..EXTRACTION_ROUNDS {
        let residual = x.samples().iter().zip(&fitted).map(|(v, f)| v - f).collect();
        let rs = amplitude_spectrum(&x.with_samples(residual), omega_max, grid_step)?;
        let top = rs.amplitudes.iter().copied().fold(0.0, f64::max);
        if top <= floor {
            break;
        }
        let found = detect_peaks(
            &rs,
            &PeakPolicy {
                rel_threshold: floor / top,
                ..*policy
            },
            delta,
        )?;
        let mut omegas: Vec<f64> = found
            .omegas()
            .iter()
            .copied()
            .filter(|&w| !tones.iter().any(|t| delta_equal(t.0, w, delta)))
            .collect();
        if omegas.is_empty() {
            break;
        }
        log::debug!("{} tones recovered from the fit residual", omegas.len());
        omegas.extend(tones.iter().map(|t| t.0));
        (tones, fitted) = relax(x, &omegas, 0.5 * delta);
    }
    FrequencySet::new(tones.into_iter().map(|t| t.0).collect(), delta)
}

/// Maximizer of a unimodal `f` on `[lo, hi]` by golden-section search.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..80 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

fn refine(omegas: &[f64], a: &[f64], i: usize) -> Peak {
    let (l, c, r) = (a[i - 1], a[i], a[i + 1]);
    let denom = l - 2.0 * c + r;
    if denom >= 0.0 {
        return Peak {
            omega: omegas[i],
            amplitude: c,
        };
    }
    let p = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
    let step = if p >= 0.0 {
        omegas[i + 1] - omegas[i]
    } else {
        omegas[i] - omegas[i - 1]
    };
    Peak {
        omega: omegas[i] + p * step,
        amplitude: c - 0.25 * (l - r) * p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{synth_harmonic, Harmonic, HarmonicModel};

    fn tone_signal(tones: &[(f64, f64)], count: usize, dt: f64) -> Signal {
        let m = HarmonicModel::new(
            0.0,
            tones
                .iter()
                .map(|&(w, a)| Harmonic::new(w, Complex64::new(a, 0.0)))
                .collect(),
        )
        .unwrap();
        synth_harmonic(&m, count, dt).unwrap()
    }

    #[test]
    fn zero_signal_has_flat_spectrum() {
        let x = Signal::new(vec![0.0; 256], 0.1).unwrap();
        let s = amplitude_spectrum(&x, 10.0, default_grid_step(&x)).unwrap();
        assert!(s.amplitudes().iter().all(|&a| a == 0.0));
        assert_eq!(s.dc(), 0.0);
        assert!(detect_peaks(&s, &PeakPolicy::default(), x.resolution())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn constant_signal_is_dc_only() {
        let x = Signal::new(vec![3.0; 1001], 0.1).unwrap();
        let s = amplitude_spectrum(&x, 10.0, default_grid_step(&x)).unwrap();
        assert!((s.dc() - 3.0).abs() < 1e-12);
        assert!(s.amplitudes().iter().all(|&a| a <= 1e-10));
    }

    #[test]
    fn pure_tone_amplitude() {
        let dt = 0.1;
        let count = (200.0 * PI / dt).round() as usize + 1;
        let x = tone_signal(&[(1.0, 1.0)], count, dt);
        let s = amplitude_spectrum(&x, 3.0, default_grid_step(&x)).unwrap();
        let nearest = s
            .omegas()
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
            .unwrap()
            .0;
        assert!((s.amplitudes()[nearest] - 1.0).abs() < 0.02);
    }

    #[test]
    fn aliasing_and_grid_checks() {
        let x = Signal::new(vec![0.0; 100], 0.5).unwrap();
        assert!(matches!(
            amplitude_spectrum(&x, PI / 0.5, default_grid_step(&x)),
            Err(Error::Aliasing { .. })
        ));
        assert!(amplitude_spectrum(&x, 1.0, x.resolution()).is_err());
        assert!(amplitude_spectrum(&x, 1.0, 0.0).is_err());
    }

    #[test]
    fn single_tone_single_peak() {
        let dt = 0.1;
        let count = 2000;
        let x = tone_signal(&[(1.0, 1.0)], count, dt);
        let delta = x.resolution();
        let s = amplitude_spectrum(&x, default_omega_max(&x), default_grid_step(&x)).unwrap();
        let peaks = detect_peaks(&s, &PeakPolicy::default(), delta).unwrap();
        assert_eq!(peaks.len(), 1, "{:?}", peaks.omegas());
        assert!((peaks.omegas()[0] - 1.0).abs() < delta);
    }

    #[test]
    fn sidelobes_survive_without_leakage_test() {
        let x = tone_signal(&[(1.0, 1.0)], 2000, 0.1);
        let s = amplitude_spectrum(&x, default_omega_max(&x), default_grid_step(&x)).unwrap();
        let policy = PeakPolicy {
            leakage_margin: 0.0,
            ..PeakPolicy::default()
        };
        assert!(detect_peaks(&s, &policy, x.resolution()).unwrap().len() > 1);
    }

    #[test]
    fn resolves_tones_three_bins_apart() {
        let dt = 0.1;
        let count = 4000;
        let delta = 2.0 * PI / ((count - 1) as f64 * dt);
        let x = tone_signal(&[(1.0, 1.0), (1.0 + 3.0 * delta, 1.0)], count, dt);
        let s = amplitude_spectrum(&x, default_omega_max(&x), default_grid_step(&x)).unwrap();
        let peaks = detect_peaks(&s, &PeakPolicy::default(), delta).unwrap();
        assert_eq!(peaks.len(), 2, "{:?}", peaks.omegas());
        assert!((peaks.omegas()[0] - 1.0).abs() < delta);
        assert!((peaks.omegas()[1] - 1.0 - 3.0 * delta).abs() < delta);
    }

    #[test]
    fn refinement_improves_off_grid_estimate() {
        let dt = 0.1;
        let x = tone_signal(&[(1.2345, 1.0)], 3000, dt);
        let delta = x.resolution();
        let s = amplitude_spectrum(&x, default_omega_max(&x), default_grid_step(&x)).unwrap();
        let coarse = detect_peaks(
            &s,
            &PeakPolicy {
                refine: false,
                ..PeakPolicy::default()
            },
            delta,
        )
        .unwrap();
        let fine = detect_peaks(&s, &PeakPolicy::default(), delta).unwrap();
        let err_coarse = (coarse.omegas()[0] - 1.2345).abs();
        let err_fine = (fine.omegas()[0] - 1.2345).abs();
        assert!(err_fine <= err_coarse);
        assert!(err_fine < 0.05 * delta, "{err_fine} vs {delta}");
    }

    #[test]
    fn kernel_vanishes_on_record_bins() {
        let x = Signal::new(vec![0.0; 512], 0.25).unwrap();
        let s = amplitude_spectrum(&x, 1.0, default_grid_step(&x)).unwrap();
        let bin = 2.0 * PI / (512.0 * 0.25);
        assert_eq!(s.kernel(0.0), 1.0);
        for k in 1..5 {
            assert!(s.kernel(k as f64 * bin) < 1e-12);
            let between = s.kernel((k as f64 + 0.5) * bin);
            assert!(between > 0.5 / (PI * (k as f64 + 0.5)) && between < 1.0 / (PI * k as f64));
        }
    }

    #[test]
    fn polish_removes_interpolation_bias() {
        let dt = 0.1;
        let x = tone_signal(&[(1.2345, 1.0), (1.9, 0.4), (2.71, 0.7)], 3000, dt);
        let delta = x.resolution();
        let s = amplitude_spectrum(&x, default_omega_max(&x), default_grid_step(&x)).unwrap();
        let peaks = detect_peaks(&s, &PeakPolicy::default(), delta).unwrap();
        let fine = polish_peaks(&x, &peaks, 0.5 * delta).unwrap();
        for (w, want) in fine.omegas().iter().zip([1.2345, 1.9, 2.71]) {
            assert!((w - want).abs() < 1e-6 * delta, "{w} vs {want}");
        }
        assert!(polish_peaks(&x, &peaks, 0.0).is_err());
    }

    #[test]
    fn residual_search_recovers_masked_tone() {
        // a tone at 4% of its neighbour's amplitude, 2.5 bins away, sits
        // under the neighbour's first sidelobes
        let dt = 0.2;
        let count = 4000;
        let bin = 2.0 * PI / (count as f64 * dt);
        let (strong, weak) = (40.3 * bin, 42.8 * bin);
        let x = tone_signal(&[(strong, 1.0), (weak, 0.04)], count, dt);
        let delta = x.resolution();
        let s = amplitude_spectrum(&x, default_omega_max(&x), default_grid_step(&x)).unwrap();
        let plain = detect_peaks(&s, &PeakPolicy::default(), delta).unwrap();
        assert!(!plain.contains(weak));
        let found = extract_tones(&x, &s, &PeakPolicy::default(), delta).unwrap();
        assert_eq!(found.len(), 2);
        assert!((found.omegas()[1] - weak).abs() < 1e-6 * delta);
        let unpolished = PeakPolicy {
            polish: false,
            ..PeakPolicy::default()
        };
        assert_eq!(extract_tones(&x, &s, &unpolished, delta).unwrap(), plain);
    }

    #[test]
    fn policy_validation() {
        let s = Spectrum::new(vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0], 0.0, 64, 0.1).unwrap();
        let bad = PeakPolicy {
            rel_threshold: 0.0,
            ..PeakPolicy::default()
        };
        assert!(detect_peaks(&s, &bad, 0.1).is_err());
        assert_eq!(detect_peaks(&s, &PeakPolicy::default(), 0.1).unwrap().omegas(), &[2.0]);
    }
}
