//! Time-average functional over a finite record and the projections built
//! on it.
//!
//! The mean `M{x} = (1/N) sum x_n` stands in for the infinite-horizon mean;
//! two tones `dw` apart leak into each other's projections by at most about
//! `2 / (T * dw)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::freqset::FrequencySet;
use crate::signals::{Harmonic, HarmonicModel, Signal};

/// Samples between exact phasor evaluations in [`mean_phasor`].
pub(crate) const RESYNC: usize = 256;

pub fn time_average(x: &Signal) -> f64 {
    x.samples().iter().sum::<f64>() / x.len() as f64
}

pub fn inner_product(x: &Signal, y: &Signal) -> Result<f64> {
    if x.len() != y.len() || x.dt() != y.dt() {
        return Err(invalid(format!(
            "signals differ in geometry ({} samples at {} s vs {} samples at {} s)",
            x.len(),
            x.dt(),
            y.len(),
            y.dt()
        )));
    }
    let sum: f64 = x.samples().iter().zip(y.samples()).map(|(a, b)| a * b).sum();
    Ok(sum / x.len() as f64)
}

/// `(1/N) sum x_n exp(-j*omega*t_n)`, accumulated with a rotating phasor that
/// is recomputed exactly every few hundred samples.
pub(crate) fn mean_phasor(x: &Signal, omega: f64) -> Complex64 {
    let samples = x.samples();
    let step = Complex64::from_polar(1.0, -omega * x.dt());
    let mut acc = Complex64::new(0.0, 0.0);
    for (block, chunk) in samples.chunks(RESYNC).enumerate() {
        let mut phasor = Complex64::from_polar(1.0, -omega * x.time(block * RESYNC));
        for &v in chunk {
            acc += phasor * v;
            phasor *= step;
        }
    }
    acc / samples.len() as f64
}

/// Complex amplitude `c` of the component `Re{c exp(j*omega*t)}`.
pub fn fourier_coeff(x: &Signal, omega: f64) -> Result<Complex64> {
    if !(omega > 0.0) || omega >= x.nyquist() {
        return Err(invalid(format!(
            "frequency {omega} outside (0, {}) for this sampling interval",
            x.nyquist()
        )));
    }
    Ok(2.0 * mean_phasor(x, omega))
}

/// Keeps only the components of `x` at the given frequencies (plus its mean).
pub fn project_onto(x: &Signal, freqs: &FrequencySet) -> Result<HarmonicModel> {
    let terms = freqs
        .omegas()
        .iter()
        .map(|&w| fourier_coeff(x, w).map(|c| Harmonic::new(w, c)))
        .collect::<Result<Vec<_>>>()?;
    HarmonicModel::new(time_average(x), terms)
}

/// Joint least-squares fit of a constant plus one tone per frequency.
///
/// Unlike [`project_onto`] the tones do not leak into each other, so the
/// coefficients are exact for a record made of exactly these tones whatever
/// the record length. The frequencies must be at least one resolution apart
/// for the system to stay well conditioned.
pub fn fit_onto(x: &Signal, freqs: &FrequencySet) -> Result<HarmonicModel> {
    let omegas = freqs.omegas();
    if let Some(&w) = omegas.iter().find(|&&w| !(w > 0.0) || w >= x.nyquist()) {
        return Err(invalid(format!(
            "frequency {w} outside (0, {}) for this sampling interval",
            x.nyquist()
        )));
    }
    let cols = 1 + 2 * omegas.len();
    if x.len() < cols {
        return Err(Error::DegenerateInput(format!(
            "{} samples cannot resolve {} tones",
            x.len(),
            omegas.len()
        )));
    }
    let a = DMatrix::from_fn(x.len(), cols, |i, j| {
        if j == 0 {
            return 1.0;
        }
        let (s, c) = (omegas[(j - 1) / 2] * x.time(i)).sin_cos();
        if j % 2 == 1 {
            c
        } else {
            s
        }
    });
    let svd = a.svd(true, true);
    if svd.singular_values.min() <= 1e-10 * svd.singular_values.max() {
        return Err(Error::DegenerateInput(
            "tones too close to separate on this record".into(),
        ));
    }
    let sol = svd
        .solve(&DVector::from_column_slice(x.samples()), 0.0)
        .map_err(|e| Error::DegenerateInput(e.into()))?;
    let terms = omegas
        .iter()
        .enumerate()
        .map(|(k, &w)| Harmonic::new(w, Complex64::new(sol[1 + 2 * k], -sol[2 + 2 * k])))
        .collect();
    HarmonicModel::new(sol[0], terms)
}

/// Cosine of the angle between two records; `|cos| = 1` marks linearly
/// dependent signals.
pub fn cos_angle(x: &Signal, y: &Signal) -> Result<f64> {
    let xx = inner_product(x, x)?;
    let yy = inner_product(y, y)?;
    if xx == 0.0 || yy == 0.0 {
        return Err(Error::DegenerateInput("cosine of angle with a zero signal".into()));
    }
    let c = inner_product(x, y)? / (xx * yy).sqrt();
    Ok(c.clamp(-1.0, 1.0))
}
