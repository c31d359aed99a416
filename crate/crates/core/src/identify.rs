//! Channel identification: frequency matching, astatism detection,
//! coefficient fitting and order selection.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result, Stage};
use crate::freqset::{intersect, prune_shared, union, FrequencySet, FrequencySystem};
use crate::projection::{fit_onto, project_onto};
use crate::signals::Signal;
use crate::spectral::{amplitude_spectrum, default_grid_step, default_omega_max, extract_tones, PeakPolicy};

/// `W` closer than this fraction of `|W|` to an axis is not classified.
const AXIS_TOLERANCE: f64 = 1e-6;

/// Singular values below this fraction of the largest mark a rank-deficient fit.
const RANK_TOLERANCE: f64 = 1e-13;

/// Sign of the channel's static gain convention. The quadrant rule for
/// astatism assumes a positive gain; with `Negative` (every coefficient of
/// `D(s)` negative) the transfer value is negated before classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainSign {
    #[default]
    Positive,
    Negative,
}

impl GainSign {
    fn factor(self) -> f64 {
        match self {
            GainSign::Positive => 1.0,
            GainSign::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentifyConfig {
    /// Frequency resolution; `None` means `2*pi / T` of the record.
    pub delta: Option<f64>,
    pub peak: PeakPolicy,
    /// Largest relative least-squares residual of a consistent system.
    pub fit_tolerance: f64,
    pub max_order: usize,
    /// Upper end of the spectral scan; `None` means just below `pi / dt`.
    pub omega_max: Option<f64>,
    pub gain_sign: GainSign,
    /// Estimate the matched coefficients jointly with every other tone found
    /// in the same record instead of by plain time averages, which leak by
    /// about `2 / (T * dw)` between tones `dw` apart.
    pub joint_projection: bool,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        IdentifyConfig {
            delta: None,
            peak: PeakPolicy::default(),
            fit_tolerance: 1e-3,
            max_order: 10,
            omega_max: None,
            gain_sign: GainSign::Positive,
            joint_projection: true,
        }
    }
}

impl IdentifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fit_tolerance > 0.0) {
            return Err(invalid("fit tolerance must be positive"));
        }
        if self.max_order < 1 {
            return Err(invalid("max order must be at least 1"));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(invalid(format!("delta must be positive, got {d}")));
            }
        }
        self.peak.validate()
    }

    /// The resolution used for a record: the override, or `2*pi / T`.
    pub fn resolve_delta(&self, record: &Signal) -> f64 {
        self.delta.unwrap_or_else(|| record.resolution())
    }
}

/// Result of identifying one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelIdentification {
    /// Frequencies shared by the pruned input set and the output set.
    pub matched_frequencies: Vec<f64>,
    pub astatism: u8,
    pub order: usize,
    /// `T_{p_a} ..= T_{p_a + order}`.
    pub coefficients: Vec<f64>,
    /// Relative residual for every attempted order.
    pub residuals: BTreeMap<usize, f64>,
    pub input_coefficients: Vec<Complex64>,
    pub output_coefficients: Vec<Complex64>,
}

impl ChannelIdentification {
    pub fn residual(&self, order: usize) -> Option<f64> {
        self.residuals.get(&order).copied()
    }
}

pub fn match_channel_frequencies(input_pruned: &FrequencySet, output: &FrequencySet) -> Result<FrequencySet> {
    intersect(input_pruned, output)
}

/// Transfer value `W = S_y / S_x` at one frequency, in the `a + jb`
/// convention where `b` is the sine amplitude (the conjugate of this crate's
/// coefficients), multiplied by the gain sign.
pub fn transfer_value(input: Complex64, output: Complex64, sign: GainSign) -> Complex64 {
    (output / input).conj() * sign.factor()
}

/// Quadrant rule: first, second and third quadrant mean zero, first and
/// second order astatism.
pub fn detect_astatism(w: Complex64) -> Result<u8> {
    let norm = w.norm();
    let refuse = Err(Error::UnclassifiableAstatism { re: w.re, im: w.im });
    if !(norm > 0.0) || !norm.is_finite() {
        return refuse;
    }
    let tol = AXIS_TOLERANCE * norm;
    if w.re.abs() < tol || w.im.abs() < tol {
        return refuse;
    }
    match (w.re > 0.0, w.im > 0.0) {
        (true, true) => Ok(0),
        (false, true) => Ok(1),
        (false, false) => Ok(2),
        (true, false) => refuse,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub coefficients: Vec<f64>,
    pub residual: f64,
}

/// Least-squares solution of `sum_k (j w)^(k + p_a) T_(k + p_a) S_y = S_x`,
/// `k = 0..=order`, split into real and imaginary equations.
pub fn fit_coefficients(
    in_c: &[Complex64],
    out_c: &[Complex64],
    omegas: &[f64],
    astatism: u8,
    order: usize,
) -> Result<Fit> {
    let q = omegas.len();
    if in_c.len() != q || out_c.len() != q {
        return Err(invalid("coefficient and frequency lists differ in length"));
    }
    if q == 0 {
        return Err(invalid("no frequencies to fit"));
    }
    for (i, &w) in omegas.iter().enumerate() {
        if !(w > 0.0) || omegas[..i].contains(&w) {
            return Err(invalid(format!("frequencies must be positive and distinct, got {w}")));
        }
    }
    let unknowns = order + 1;
    if 2 * q < unknowns {
        return Err(Error::Underdetermined {
            equations: 2 * q,
            unknowns,
        });
    }

    // Columns are expressed in w / w_max and then equilibrated; both
    // scalings are undone on the solution.
    let w_max = omegas.iter().copied().fold(0.0, f64::max);
    let mut a = DMatrix::<f64>::zeros(2 * q, unknowns);
    let mut b = DVector::<f64>::zeros(2 * q);
    for (i, ((&w, &x), &y)) in omegas.iter().zip(in_c).zip(out_c).enumerate() {
        let s = Complex64::new(0.0, w / w_max);
        for k in 0..unknowns {
            let z = s.powi((k + astatism as usize) as i32) * y;
            a[(2 * i, k)] = z.re;
            a[(2 * i + 1, k)] = z.im;
        }
        b[2 * i] = x.re;
        b[2 * i + 1] = x.im;
    }
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Err(Error::DegenerateInput("input coefficients are all zero".into()));
    }
    let col_norms: Vec<f64> = (0..unknowns).map(|k| a.column(k).norm()).collect();
    if col_norms.contains(&0.0) {
        return Err(Error::DegenerateFit { order });
    }
    let mut scaled = a.clone();
    for (k, &n) in col_norms.iter().enumerate() {
        scaled.column_mut(k).scale_mut(1.0 / n);
    }

    let svd = scaled.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_min > RANK_TOLERANCE * s_max) {
        return Err(Error::DegenerateFit { order });
    }
    let u = svd.solve(&b, 0.0).map_err(|_| Error::DegenerateFit { order })?;
    let u = DVector::from_iterator(unknowns, u.iter().zip(&col_norms).map(|(v, n)| v / n));
    let residual = (&a * &u - &b).norm() / b_norm;
    let coefficients = u
        .iter()
        .enumerate()
        .map(|(k, v)| v / w_max.powi((k + astatism as usize) as i32))
        .collect();
    Ok(Fit { coefficients, residual })
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Fits orders `1..=min(max_order, 2q - 1)` and keeps the lowest order whose
/// system is consistent (residual within tolerance) and whose leading term is
/// significant at the top matched frequency.
///
/// The fits are nested, so residuals never increase with order and every
/// order above the true one is consistent too; with noisy coefficients their
/// ill-conditioned leading terms can pass the significance test, so the
/// lowest qualifying order is the one the data support. The square order
/// `2q - 1` interpolates anything and is fitted for diagnostics only.
pub fn select_order(
    in_c: &[Complex64],
    out_c: &[Complex64],
    omegas: &[f64],
    astatism: u8,
    config: &IdentifyConfig,
) -> Result<ChannelIdentification> {
    config.validate()?;
    let q = omegas.len();
    if q < 2 {
        return Err(invalid(format!(
            "order selection needs at least two frequencies, got {q}"
        )));
    }
    let tol = config.fit_tolerance;
    let w_max = omegas.iter().copied().fold(0.0, f64::max);
    let med_in = median(in_c.iter().map(|c| c.norm()).collect());
    let med_out = median(out_c.iter().map(|c| c.norm()).collect());

    let mut residuals = BTreeMap::new();
    let mut best: Option<(usize, Vec<f64>)> = None;
    for g in 1..=config.max_order.min(2 * q - 1) {
        let fit = match fit_coefficients(in_c, out_c, omegas, astatism, g) {
            Ok(fit) => fit,
            Err(Error::DegenerateFit { .. }) => break,
            Err(e) => return Err(e),
        };
        log::debug!("order {g}: residual {:.3e}", fit.residual);
        residuals.insert(g, fit.residual);
        let lead = fit.coefficients[g].abs() * w_max.powi((g + astatism as usize) as i32) * med_out;
        // a square system interpolates any data, so its zero residual says
        // nothing about consistency
        let overdetermined = 2 * q > g + 1;
        if best.is_none() && overdetermined && fit.residual <= tol && lead > tol * med_in {
            best = Some((g, fit.coefficients));
        }
    }
    let (order, coefficients) = best.ok_or_else(|| Error::NoConsistentModel {
        residuals: residuals.iter().map(|(&g, &r)| (g, r)).collect(),
    })?;
    Ok(ChannelIdentification {
        matched_frequencies: omegas.to_vec(),
        astatism,
        order,
        coefficients,
        residuals,
        input_coefficients: in_c.to_vec(),
        output_coefficients: out_c.to_vec(),
    })
}

/// Full pipeline for the channel from `inputs[channel]` to `output`.
pub fn identify_channel(
    inputs: &[Signal],
    output: &Signal,
    channel: usize,
    config: &IdentifyConfig,
) -> Result<ChannelIdentification> {
    config.validate()?;
    if channel >= inputs.len() {
        return Err(invalid(format!(
            "channel input {channel} out of range for {} inputs",
            inputs.len()
        )));
    }
    if inputs.iter().any(|x| !x.same_geometry(output)) {
        return Err(invalid(
            "all signals must share length, sampling interval and start time",
        ));
    }
    let delta = config.resolve_delta(output);
    let grid_step = default_grid_step(output);
    let omega_max = config.omega_max.unwrap_or_else(|| default_omega_max(output));

    let peaks_of = |x: &Signal| -> Result<FrequencySet> {
        let spectrum = amplitude_spectrum(x, omega_max, grid_step).map_err(|e| e.at(Stage::Spectrum))?;
        extract_tones(x, &spectrum, &config.peak, delta).map_err(|e| e.at(Stage::Peaks))
    };
    let input_sets = inputs.iter().map(peaks_of).collect::<Result<Vec<_>>>()?;
    let output_set = peaks_of(output)?;
    let input_peaks = input_sets[channel].clone();

    let own = if input_sets.len() > 1 {
        let system = FrequencySystem::from_sets(input_sets.into_iter().enumerate().map(|(i, s)| (i.to_string(), s)))
            .map_err(|e| e.at(Stage::Matching))?;
        let pruned = prune_shared(&system).map_err(|e| e.at(Stage::Matching))?;
        pruned
            .get(&channel.to_string())
            .cloned()
            .expect("pruning preserves labels")
    } else {
        input_sets.into_iter().next().expect("one input")
    };
    let matched = match_channel_frequencies(&own, &output_set).map_err(|e| e.at(Stage::Matching))?;
    log::info!(
        "channel {channel}: {} input peaks after pruning, {} output peaks, {} matched",
        own.len(),
        output_set.len(),
        matched.len()
    );
    if matched.is_empty() {
        return Err(Error::NoCommonFrequencies.at(Stage::Matching));
    }

    let project = |x: &Signal, peaks: &FrequencySet| -> Result<Vec<Complex64>> {
        if !config.joint_projection {
            return Ok(project_onto(x, &matched)?.terms().iter().map(|h| h.coeff).collect());
        }
        let model = fit_onto(x, &union(&matched, peaks)?)?;
        matched
            .omegas()
            .iter()
            .map(|&w| {
                model
                    .coeff_at(w)
                    .ok_or_else(|| Error::DegenerateInput(format!("matched frequency {w} merged away")))
            })
            .collect()
    };
    let in_c = project(&inputs[channel], &input_peaks).map_err(|e| e.at(Stage::Projection))?;
    let out_c = project(output, &output_set).map_err(|e| e.at(Stage::Projection))?;

    // matched frequencies are sorted, so the first is the lowest
    let w = transfer_value(in_c[0], out_c[0], config.gain_sign);
    let astatism = detect_astatism(w).map_err(|e| e.at(Stage::Astatism))?;

    select_order(&in_c, &out_c, matched.omegas(), astatism, config).map_err(|e| e.at(Stage::OrderSelection))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{simulate_channel, ChannelModel, Harmonic, HarmonicModel};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Input/output coefficients of `plant` driven by unit tones.
    fn plant_data(plant: &ChannelModel, omegas: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let input = HarmonicModel::new(
            0.0,
            omegas
                .iter()
                .enumerate()
                .map(|(i, &w)| Harmonic::polar(w, 1.0 + 0.1 * i as f64, 0.3 * i as f64))
                .collect(),
        )
        .unwrap();
        let output = simulate_channel(plant, &input).unwrap();
        (
            input.terms().iter().map(|h| h.coeff).collect(),
            output.terms().iter().map(|h| h.coeff).collect(),
        )
    }

    #[test]
    fn matching_cases() {
        let d = 0.01;
        let a = FrequencySet::new(vec![1.0, 2.0, 3.0], d).unwrap();
        let b = FrequencySet::new(vec![2.0, 3.0, 4.0], d).unwrap();
        assert_eq!(match_channel_frequencies(&a, &b).unwrap().omegas(), &[2.0, 3.0]);
        let far = FrequencySet::new(vec![10.0], d).unwrap();
        assert!(match_channel_frequencies(&a, &far).unwrap().is_empty());
    }

    #[test]
    fn quadrant_rule() {
        assert_eq!(detect_astatism(c(1.0, 0.5)).unwrap(), 0);
        assert_eq!(detect_astatism(c(-1.0, 1.0)).unwrap(), 1);
        assert_eq!(detect_astatism(c(-1.0, -1.0)).unwrap(), 2);
        for w in [c(1.0, -1.0), c(1.0, 0.0), c(0.0, 1.0), c(1.0, 1e-9), c(0.0, 0.0)] {
            assert!(
                matches!(detect_astatism(w), Err(Error::UnclassifiableAstatism { .. })),
                "{w}"
            );
        }
    }

    #[test]
    fn quadrant_rule_ignores_positive_scale() {
        for w in [c(1.0, 0.5), c(-1.0, 1.0), c(-0.2, -3.0)] {
            assert_eq!(detect_astatism(w).unwrap(), detect_astatism(w * 7.5).unwrap());
        }
    }

    #[test]
    fn transfer_value_follows_gain_sign() {
        // D(s) = 2 + s at w = 0.1: positive-gain lag network, first quadrant
        let plant = ChannelModel::new(0, vec![2.0, 1.0]).unwrap();
        let (x, y) = plant_data(&plant, &[0.1]);
        assert_eq!(
            detect_astatism(transfer_value(x[0], y[0], GainSign::Positive)).unwrap(),
            0
        );
        let negated = ChannelModel::new(0, vec![-2.0, -1.0]).unwrap();
        let (x, y) = plant_data(&negated, &[0.1]);
        assert_eq!(
            detect_astatism(transfer_value(x[0], y[0], GainSign::Negative)).unwrap(),
            0
        );
    }

    #[test]
    fn fit_identity() {
        let x = vec![c(1.0, 0.0), c(0.3, -0.2)];
        let fit = fit_coefficients(&x, &x, &[1.0, 2.0], 0, 0).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!(fit.residual <= 1e-12);
    }

    #[test]
    fn fit_first_order() {
        let plant = ChannelModel::new(0, vec![1.0, 2.0]).unwrap();
        let omegas = [1.0, 2.0];
        let x = vec![c(1.0, 0.0), c(1.0, 0.0)];
        // out = in / (1 + 2jw)
        let y: Vec<Complex64> = x.iter().zip(omegas).map(|(x, w)| x / plant.eval(w)).collect();
        let fit = fit_coefficients(&x, &y, &omegas, 0, 1).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-9);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-9);
        assert!(fit.residual <= 1e-10);

        let over = fit_coefficients(&x, &y, &omegas, 0, 2).unwrap();
        assert!(over.residual <= 1e-10);
        assert!(over.coefficients[2].abs() < 1e-8);
    }

    #[test]
    fn fit_errors() {
        let x = vec![c(1.0, 0.0)];
        assert!(matches!(
            fit_coefficients(&x, &x, &[1.0], 0, 2),
            Err(Error::Underdetermined {
                equations: 2,
                unknowns: 3
            })
        ));
        let zeros = vec![c(0.0, 0.0), c(0.0, 0.0)];
        let ones = vec![c(1.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(
            fit_coefficients(&ones, &zeros, &[1.0, 2.0], 0, 1),
            Err(Error::DegenerateFit { .. })
        ));
        assert!(fit_coefficients(&ones, &ones, &[1.0, 1.0], 0, 1).is_err());
        assert!(fit_coefficients(&ones, &ones, &[1.0], 0, 1).is_err());
    }

    #[test]
    fn select_first_order() {
        let plant = ChannelModel::new(0, vec![1.0, 2.0]).unwrap();
        let omegas = [0.5, 1.1, 1.7, 2.3];
        let (x, y) = plant_data(&plant, &omegas);
        let id = select_order(&x, &y, &omegas, 0, &IdentifyConfig::default()).unwrap();
        assert_eq!(id.order, 1);
        assert!((id.coefficients[0] - 1.0).abs() < 1e-6);
        assert!((id.coefficients[1] - 2.0).abs() < 1e-6);
        assert_eq!(
            id.residuals.keys().copied().collect::<Vec<_>>(),
            (1..=7).collect::<Vec<_>>()
        );
    }

    #[test]
    fn select_third_order_astatic() {
        let plant = ChannelModel::new(1, vec![1.5, 0.8, 0.6, 0.25]).unwrap();
        let omegas = [0.3, 0.7, 1.2, 1.9, 2.6];
        let (x, y) = plant_data(&plant, &omegas);
        let id = select_order(&x, &y, &omegas, 1, &IdentifyConfig::default()).unwrap();
        assert_eq!(id.order, 3);
        for (got, want) in id.coefficients.iter().zip(plant.coefficients()) {
            assert!((got - want).abs() < 1e-6 * want.abs(), "{got} vs {want}");
        }
    }

    #[test]
    fn select_reports_inconsistency() {
        // data that no polynomial of order <= 3 reproduces within tolerance
        let omegas = [0.5, 1.0];
        let x = vec![c(1.0, 0.0), c(1.0, 0.0)];
        let y = vec![c(1.0, 0.0), c(0.0, 1.0)];
        let cfg = IdentifyConfig {
            max_order: 1,
            ..IdentifyConfig::default()
        };
        match select_order(&x, &y, &omegas, 0, &cfg) {
            Err(Error::NoConsistentModel { residuals }) => assert_eq!(residuals.len(), 1),
            other => panic!("{other:?}"),
        }
        assert!(select_order(&x[..1], &y[..1], &omegas[..1], 0, &cfg).is_err());
    }

    #[test]
    fn output_scaling_scales_coefficients() {
        let plant = ChannelModel::new(0, vec![0.7, 1.3, 0.4]).unwrap();
        let omegas = [0.4, 0.9, 1.6, 2.2];
        let (x, y) = plant_data(&plant, &omegas);
        let base = select_order(&x, &y, &omegas, 0, &IdentifyConfig::default()).unwrap();
        let alpha = 3.0;
        let y_scaled: Vec<Complex64> = y.iter().map(|v| v * alpha).collect();
        let scaled = select_order(&x, &y_scaled, &omegas, 0, &IdentifyConfig::default()).unwrap();
        assert_eq!(base.order, scaled.order);
        for (a, b) in base.coefficients.iter().zip(&scaled.coefficients) {
            assert!((a / alpha - b).abs() <= 1e-9 * a.abs());
        }
    }

    #[test]
    fn square_system_is_never_selected() {
        // three tones: order 5 is square and fits anything exactly
        let omegas = [0.5, 1.0, 1.5];
        let x = vec![c(1.0, 0.0); 3];
        let y = vec![c(0.3, 0.1), c(-0.2, 0.4), c(0.05, -0.3)];
        let id = select_order(&x, &y, &omegas, 0, &IdentifyConfig::default());
        match id {
            Ok(id) => assert!(id.order < 5),
            Err(Error::NoConsistentModel { residuals }) => {
                assert_eq!(residuals.last().unwrap().0, 5);
                assert!(residuals.last().unwrap().1 < 1e-12);
            }
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn noisy_overfit_orders_are_not_selected() {
        let plant = ChannelModel::new(0, vec![0.9, 0.5, 0.3]).unwrap();
        let omegas = [0.2, 0.5, 0.9, 1.4, 2.0, 2.7];
        let (x, mut y) = plant_data(&plant, &omegas);
        // perturbations at the 1e-6 level leave every order >= 2 consistent
        for (k, v) in y.iter_mut().enumerate() {
            *v *= 1.0 + 1e-6 * (k as f64 - 2.5);
        }
        let id = select_order(&x, &y, &omegas, 0, &IdentifyConfig::default()).unwrap();
        assert!(id.residuals.range(3..=10).all(|(_, &r)| r <= 1e-3));
        assert_eq!(id.order, 2);
    }
}
