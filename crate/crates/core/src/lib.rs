//! Identification of linear constant-coefficient ODE channel models from a
//! single noisy record of a multi-input system.
//!
//! Every measured signal is treated as a finite sum of harmonics. Noise is
//! separated from the forced response by set operations on the detected
//! frequencies instead of by correlation functions: components shared
//! between inputs are pruned, the remaining input frequencies are matched
//! against the output's, and the ODE coefficients are fitted from the
//! Fourier coefficients at the matched frequencies.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod freqset;
pub mod identify;
pub mod io;
pub mod projection;
pub mod signals;
pub mod spectral;

pub use error::{Error, Result, Stage};
pub use freqset::{FrequencySet, FrequencySystem};
pub use identify::{ChannelIdentification, GainSign, IdentifyConfig};
pub use signals::{ChannelModel, Harmonic, HarmonicModel, NoiseSpec, Signal};
pub use spectral::{PeakPolicy, Spectrum};

pub use num_complex::Complex64;
