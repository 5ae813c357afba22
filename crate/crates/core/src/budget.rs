//! Closed-form QBER budget, sifted-key-rate chain, security threshold, and the
//! design-space sweep comparing the energy-time and polarization spectral-width
//! limits over distance.

use alloc::vec::Vec;

use crate::math;
use crate::scenario::{DispersionStrategy, ScenarioConfig};
use crate::temporal::{self, PeakModel};

/// QBER above or at this value is treated as insecure.
pub const SECURITY_QBER_LIMIT: f64 = 0.11;

/// Spectral-width solvers search in [0, MAX_SEARCH_FWHM_NM].
pub const MAX_SEARCH_FWHM_NM: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BudgetError {
    #[error("signal probability per gate is zero; QBER ratio undefined")]
    ZeroSignal,
}

/// The additive QBER terms. `total` is always the exact sum of the parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QberBudget {
    pub optical: f64,
    pub accidental: f64,
    pub detector: f64,
    pub dispersion: f64,
    pub total: f64,
}

impl QberBudget {
    pub fn new(optical: f64, accidental: f64, detector: f64, dispersion: f64) -> Self {
        QberBudget {
            optical,
            accidental,
            detector,
            dispersion,
            total: optical + accidental + detector + dispersion,
        }
    }
}

/// The multiplicative factors between Alice's singles rate and the sifted rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFactors {
    pub singles_rate_hz: f64,
    /// Probability the telecom photon is in the fiber given Alice's click.
    pub mu: f64,
    /// Quantum-channel loss.
    pub t_l_db: f64,
    /// Bob apparatus loss.
    pub t_b_db: f64,
    /// Dispersion-compensation loss.
    pub t_c_db: f64,
    /// Detector quantum efficiency.
    pub eta_d: f64,
    /// Fraction of incoming photons accounted for as bits (gate acceptance).
    pub eta_g: f64,
    /// Post-sifting retention.
    pub q_s: f64,
}

/// Factors plus the resulting sifted rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateChain {
    pub factors: RateFactors,
    pub sifted_rate_hz: f64,
}

pub fn db_to_transmittance(db: f64) -> f64 {
    libm::pow(10.0, -db / 10.0)
}

/// Probability per gate that a true-pair photon is detected inside the gate,
/// before sifting: mu * 10^(-(T_L+T_B+T_C)/10) * eta_d * eta_g.
pub fn signal_prob_per_gate(f: &RateFactors) -> f64 {
    f.mu * db_to_transmittance(f.t_l_db)
        * db_to_transmittance(f.t_b_db)
        * db_to_transmittance(f.t_c_db)
        * f.eta_d
        * f.eta_g
}

/// The seven-factor product from singles rate to sifted key rate.
pub fn sifted_rate(f: &RateFactors) -> f64 {
    f.singles_rate_hz * signal_prob_per_gate(f) * f.q_s
}

/// Optical error from imperfect fringe contrast: (1 - V) / 2.
pub fn optical_qber(visibility: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&visibility));
    0.5 * (1.0 - visibility)
}

/// Detector-noise QBER. Dark counts are random bits (half erroneous) and are
/// not discarded by sifting in this model, while the signal is reduced by
/// q_s; hence the q_s in the denominator.
pub fn detector_qber(
    dark_prob_per_gate_total: f64,
    signal_prob_per_gate: f64,
    q_s: f64,
) -> Result<f64, BudgetError> {
    let denom = signal_prob_per_gate * q_s;
    if denom <= 0.0 {
        return Err(BudgetError::ZeroSignal);
    }
    Ok(0.5 * dark_prob_per_gate_total / denom)
}

/// Accidental-coincidence QBER. Photons from different pairs are unentangled,
/// so half produce wrong bits; they sift away at the same rate as signal, so
/// q_s cancels out of the ratio.
#[allow(clippy::too_many_arguments)]
pub fn accidental_qber(
    pair_rate_in_fiber_hz: f64,
    gate_width_ns: f64,
    t_l_db: f64,
    t_b_db: f64,
    t_c_db: f64,
    eta_d: f64,
    signal_prob_per_gate: f64,
) -> Result<f64, BudgetError> {
    if signal_prob_per_gate <= 0.0 {
        return Err(BudgetError::ZeroSignal);
    }
    let p_uncorrelated = pair_rate_in_fiber_hz
        * gate_width_ns
        * 1e-9
        * db_to_transmittance(t_l_db)
        * db_to_transmittance(t_b_db)
        * db_to_transmittance(t_c_db)
        * eta_d;
    Ok(0.5 * p_uncorrelated / signal_prob_per_gate)
}

/// Rate factors implied by a scenario. The gate acceptance eta_g comes from
/// the peak model, the singles rate includes the strategy throughput.
pub fn rate_factors(scenario: &ScenarioConfig) -> RateFactors {
    let (peaks, _) = PeakModel::for_scenario(scenario);
    let t_c_db = match scenario.strategy {
        DispersionStrategy::Compensation { loss_db, .. } => loss_db,
        _ => 0.0,
    };
    RateFactors {
        singles_rate_hz: scenario.effective_singles_rate_hz(),
        mu: scenario.source.mu_coupling,
        t_l_db: scenario.fiber.attenuation_db,
        t_b_db: scenario.detector.bob_loss_db,
        t_c_db,
        eta_d: scenario.detector.efficiency,
        eta_g: temporal::eta_g(&peaks, scenario.detector.gate_width_ns),
        q_s: scenario.q_sift,
    }
}

pub fn rate_chain(scenario: &ScenarioConfig) -> RateChain {
    let factors = rate_factors(scenario);
    RateChain {
        factors,
        sifted_rate_hz: sifted_rate(&factors),
    }
}

/// Assemble the four QBER terms for a scenario.
pub fn qber_budget(scenario: &ScenarioConfig) -> Result<QberBudget, BudgetError> {
    let factors = rate_factors(scenario);
    let signal = signal_prob_per_gate(&factors);
    let (peaks, _) = PeakModel::for_scenario(scenario);
    let optical = optical_qber(scenario.interferometer.visibility);
    let dispersion = temporal::dispersion_qber(&peaks, scenario.detector.gate_width_ns);
    let detector = detector_qber(
        scenario.detector.dark_prob_per_gate_total,
        signal,
        scenario.q_sift,
    )?;
    let accidental = accidental_qber(
        scenario.source.pair_rate_in_fiber_hz,
        scenario.detector.gate_width_ns,
        factors.t_l_db,
        factors.t_b_db,
        factors.t_c_db,
        factors.eta_d,
        signal,
    )?;
    Ok(QberBudget::new(optical, accidental, detector, dispersion))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecurityStatus {
    Secure,
    Insecure,
}

/// Strict comparison against the 11% threshold.
pub fn security_check(total_qber: f64) -> SecurityStatus {
    if total_qber < SECURITY_QBER_LIMIT {
        SecurityStatus::Secure
    } else {
        SecurityStatus::Insecure
    }
}

/// A spectral-width limit found by bisection. `constrained` is false when the
/// whole search range stays below the QBER target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthLimit {
    pub fwhm_nm: f64,
    pub constrained: bool,
}

const WIDTH_SOLVER_XTOL_NM: f64 = 1e-3;

/// Largest spectral width keeping the dispersion QBER of an energy-time link
/// at or below `target_qber`. Photon coherence time is negligible at the
/// relevant widths and is ignored.
pub fn max_spectral_width_et(
    length_km: f64,
    dispersion_ps_per_nm_km: f64,
    delta_t_ns: f64,
    window_ns: f64,
    jitter_fwhm_ns: f64,
    target_qber: f64,
) -> WidthLimit {
    debug_assert!(length_km > 0.0 && target_qber > 0.0 && target_qber < 0.5);
    let qber = |fwhm_nm: f64| {
        let spread = temporal::dispersion_spread_ns(dispersion_ps_per_nm_km * length_km, fwhm_nm);
        let total = libm::sqrt(jitter_fwhm_ns * jitter_fwhm_ns + spread * spread);
        temporal::dispersion_qber(&PeakModel::new(delta_t_ns, total), window_ns)
    };
    let (fwhm_nm, constrained) = math::max_arg_below(
        qber,
        target_qber,
        0.0,
        MAX_SEARCH_FWHM_NM,
        WIDTH_SOLVER_XTOL_NM,
    );
    WidthLimit {
        fwhm_nm,
        constrained,
    }
}

/// Average degree of polarization after PMD, under a Gaussian decorrelation
/// model: DOP = exp(-(dgd/tau_c)^2 / 2) with dgd = pmd_coeff * sqrt(L) and
/// tau_c the photon coherence time for the given spectral width.
pub fn dop_pmd(
    wavelength_nm: f64,
    fwhm_nm: f64,
    length_km: f64,
    pmd_coeff_ps_per_sqrt_km: f64,
) -> f64 {
    if length_km <= 0.0 {
        return 1.0;
    }
    let dgd_ns = pmd_coeff_ps_per_sqrt_km * libm::sqrt(length_km) * 1e-3;
    let tau_c_ns = temporal::coherence_time_fwhm_ns(wavelength_nm, fwhm_nm);
    let r = dgd_ns / tau_c_ns;
    libm::exp(-0.5 * r * r)
}

/// Largest spectral width keeping the polarization-coding QBER
/// 0.5 * (1 - DOP) at or below `target_qber`, under the DOP model above.
pub fn max_spectral_width_pol(
    wavelength_nm: f64,
    length_km: f64,
    pmd_coeff_ps_per_sqrt_km: f64,
    target_qber: f64,
) -> WidthLimit {
    debug_assert!(length_km > 0.0 && target_qber > 0.0 && target_qber < 0.5);
    let qber = |fwhm_nm: f64| {
        if fwhm_nm <= 0.0 {
            return 0.0;
        }
        0.5 * (1.0 - dop_pmd(wavelength_nm, fwhm_nm, length_km, pmd_coeff_ps_per_sqrt_km))
    };
    let (fwhm_nm, constrained) = math::max_arg_below(
        qber,
        target_qber,
        0.0,
        MAX_SEARCH_FWHM_NM,
        WIDTH_SOLVER_XTOL_NM,
    );
    WidthLimit {
        fwhm_nm,
        constrained,
    }
}

/// Width limits of both codings at one channel length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonPoint {
    pub length_km: f64,
    pub max_fwhm_et_nm: f64,
    pub max_fwhm_pol_nm: f64,
}

/// Parameters of the two width solvers used by [`comparison_sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepParams {
    pub dispersion_ps_per_nm_km: f64,
    pub delta_t_ns: f64,
    pub window_ns: f64,
    pub jitter_fwhm_ns: f64,
    pub wavelength_nm: f64,
    pub pmd_coeff_ps_per_sqrt_km: f64,
    pub target_qber: f64,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            dispersion_ps_per_nm_km: 17.0,
            delta_t_ns: 3.3,
            window_ns: 1.1,
            jitter_fwhm_ns: 0.7,
            wavelength_nm: 1550.0,
            pmd_coeff_ps_per_sqrt_km: 0.1,
            target_qber: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<ComparisonPoint>,
    /// First length where the polarization limit overtakes the energy-time
    /// limit, linearly interpolated between grid points; None without a
    /// sign change inside the grid.
    pub crossover_km: Option<f64>,
}

pub fn comparison_sweep(lengths_km: &[f64], params: &SweepParams) -> SweepResult {
    let points: Vec<ComparisonPoint> = lengths_km
        .iter()
        .map(|&length_km| ComparisonPoint {
            length_km,
            max_fwhm_et_nm: max_spectral_width_et(
                length_km,
                params.dispersion_ps_per_nm_km,
                params.delta_t_ns,
                params.window_ns,
                params.jitter_fwhm_ns,
                params.target_qber,
            )
            .fwhm_nm,
            max_fwhm_pol_nm: max_spectral_width_pol(
                params.wavelength_nm,
                length_km,
                params.pmd_coeff_ps_per_sqrt_km,
                params.target_qber,
            )
            .fwhm_nm,
        })
        .collect();

    let mut crossover_km = None;
    for pair in points.windows(2) {
        let d0 = pair[0].max_fwhm_et_nm - pair[0].max_fwhm_pol_nm;
        let d1 = pair[1].max_fwhm_et_nm - pair[1].max_fwhm_pol_nm;
        if d0 > 0.0 && d1 <= 0.0 {
            let t = d0 / (d0 - d1);
            crossover_km = Some(pair[0].length_km + t * (pair[1].length_km - pair[0].length_km));
            break;
        }
    }
    SweepResult {
        points,
        crossover_km,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{preset_compensation, preset_filtering};
    use approx::assert_relative_eq;

    #[test]
    fn optical_qber_table_values() {
        assert_relative_eq!(optical_qber(0.89), 0.055, max_relative = 1e-12);
        assert_relative_eq!(optical_qber(0.92), 0.04, max_relative = 1e-12);
        assert_eq!(optical_qber(1.0), 0.0);
    }

    #[test]
    fn sifted_rate_reference_chains() {
        // compensation row: 79 kHz singles down to 23 Hz
        let comp = RateFactors {
            singles_rate_hz: 79_000.0,
            mu: 0.5,
            t_l_db: 8.3,
            t_b_db: 5.4,
            t_c_db: 2.9,
            eta_d: 0.1,
            eta_g: 0.38,
            q_s: 0.7,
        };
        assert_relative_eq!(sifted_rate(&comp), 22.986811382837942, max_relative = 1e-9);
        // filtering row: 36 kHz singles down to ~12 Hz
        let filt = RateFactors {
            singles_rate_hz: 36_000.0,
            t_c_db: 0.0,
            eta_g: 0.22,
            ..comp
        };
        assert_relative_eq!(sifted_rate(&filt), 11.824784261180147, max_relative = 1e-9);
        // zero singles kill the chain
        assert_eq!(
            sifted_rate(&RateFactors {
                singles_rate_hz: 0.0,
                ..comp
            }),
            0.0
        );
    }

    #[test]
    fn signal_prob_per_gate_values() {
        let comp = RateFactors {
            singles_rate_hz: 79_000.0,
            mu: 0.5,
            t_l_db: 8.3,
            t_b_db: 5.4,
            t_c_db: 2.9,
            eta_d: 0.1,
            eta_g: 0.38,
            q_s: 0.7,
        };
        assert_relative_eq!(
            signal_prob_per_gate(&comp),
            4.156749e-4,
            max_relative = 1e-4
        );
        let filt = RateFactors {
            t_c_db: 0.0,
            eta_g: 0.22,
            ..comp
        };
        assert_relative_eq!(
            signal_prob_per_gate(&filt),
            4.692379e-4,
            max_relative = 1e-4
        );
        assert_eq!(
            signal_prob_per_gate(&RateFactors { eta_d: 0.0, ..comp }),
            0.0
        );
    }

    #[test]
    fn detector_qber_values() {
        // both detectors at the average per-detector noise of the compensated link
        let q = detector_qber(2.0 * 1.13e-5, 4.156749e-4, 0.7).unwrap();
        assert_relative_eq!(q, 0.0388, max_relative = 2e-3);
        assert_eq!(detector_qber(0.0, 1e-3, 0.7).unwrap(), 0.0);
        assert_eq!(detector_qber(1e-5, 0.0, 0.7), Err(BudgetError::ZeroSignal));
    }

    #[test]
    fn accidental_qber_values() {
        let comp = rate_factors(&preset_compensation());
        let signal = signal_prob_per_gate(&comp);
        let q = accidental_qber(3.4e6, 1.1, 8.3, 5.4, 2.9, 0.1, signal).unwrap();
        assert_relative_eq!(q, 0.008043154055955654, max_relative = 1e-9);
        assert_eq!(
            accidental_qber(0.0, 1.1, 8.3, 5.4, 2.9, 0.1, signal).unwrap(),
            0.0
        );
        // halving the gate width halves the result
        let half = accidental_qber(3.4e6, 0.55, 8.3, 5.4, 2.9, 0.1, signal).unwrap();
        assert_relative_eq!(half, 0.5 * q, max_relative = 1e-12);
        // the calibrated pair rate puts accidentals at ~1% against the
        // reference chain's gate acceptance of 0.38
        let reference = accidental_qber(3.4e6, 1.1, 8.3, 5.4, 2.9, 0.1, 4.156749e-4).unwrap();
        assert_relative_eq!(reference, 0.01, max_relative = 0.02);
    }

    #[test]
    fn qber_budget_compensation_preset() {
        let b = qber_budget(&preset_compensation()).unwrap();
        assert_relative_eq!(b.optical, 0.055, max_relative = 1e-12);
        assert_relative_eq!(b.accidental, 0.008043154055955654, max_relative = 1e-9);
        assert_relative_eq!(b.detector, 0.03173694973751147, max_relative = 1e-9);
        assert!(b.dispersion < 1e-3);
        assert_relative_eq!(b.total, 0.09478010379346712, max_relative = 1e-9);
        assert_eq!(security_check(b.total), SecurityStatus::Secure);
    }

    #[test]
    fn qber_budget_filtering_preset() {
        let b = qber_budget(&preset_filtering()).unwrap();
        assert_relative_eq!(b.optical, 0.04, max_relative = 1e-12);
        assert_relative_eq!(b.accidental, 0.012115979792168661, max_relative = 1e-9);
        assert_relative_eq!(b.detector, 0.020840890077102797, max_relative = 1e-9);
        assert_relative_eq!(b.dispersion, 0.011629592646010007, max_relative = 1e-9);
        assert_relative_eq!(b.total, 0.08458646251528144, max_relative = 1e-9);
        assert_eq!(security_check(b.total), SecurityStatus::Secure);
    }

    #[test]
    fn ideal_scenario_has_zero_qber() {
        let mut sc = preset_compensation();
        sc.interferometer.visibility = 1.0;
        sc.detector.dark_prob_per_gate_total = 0.0;
        sc.source.pair_rate_in_fiber_hz = 0.0;
        sc.detector.jitter_fwhm_ns = 0.0;
        // cancel dispersion exactly and make the residual coherence negligible
        sc.strategy = DispersionStrategy::Compensation {
            d_comp_ps_per_nm: 527.0,
            loss_db: 2.9,
            delay_equiv_km: 4.0,
        };
        let b = qber_budget(&sc).unwrap();
        assert!(b.total < 1e-9, "total = {}", b.total);
    }

    #[test]
    fn security_threshold_is_strict() {
        assert_eq!(security_check(0.105), SecurityStatus::Secure);
        assert_eq!(security_check(0.11), SecurityStatus::Insecure);
        assert_eq!(security_check(0.0), SecurityStatus::Secure);
    }

    #[test]
    fn et_width_limit_at_30_km() {
        let limit = max_spectral_width_et(30.0, 17.0, 3.3, 1.1, 0.7, 0.01);
        assert!(limit.constrained);
        assert!(
            limit.fwhm_nm > 4.5 && limit.fwhm_nm < 5.5,
            "limit = {}",
            limit.fwhm_nm
        );
    }

    #[test]
    fn et_width_limit_unconstrained_at_tiny_length() {
        let limit = max_spectral_width_et(1e-6, 17.0, 3.3, 1.1, 0.7, 0.01);
        assert!(!limit.constrained);
        assert_eq!(limit.fwhm_nm, MAX_SEARCH_FWHM_NM);
    }

    #[test]
    fn dop_pmd_reference_values() {
        assert_eq!(dop_pmd(1550.0, 1.6, 0.0, 0.1), 1.0);
        assert_relative_eq!(
            dop_pmd(1550.0, 1.6, 100.0, 0.1),
            0.9802665120744397,
            max_relative = 1e-9
        );
        // decreasing in width and in length
        assert!(dop_pmd(1550.0, 2.0, 100.0, 0.1) < dop_pmd(1550.0, 1.6, 100.0, 0.1));
        assert!(dop_pmd(1550.0, 1.6, 200.0, 0.1) < dop_pmd(1550.0, 1.6, 100.0, 0.1));
    }

    #[test]
    fn pol_width_limit_at_100_km() {
        let limit = max_spectral_width_pol(1550.0, 100.0, 0.1, 0.01);
        assert!(limit.constrained);
        assert_relative_eq!(limit.fwhm_nm, 1.6108773582180218, epsilon = 2e-3);
        // 1/sqrt(L) scaling
        let limit4 = max_spectral_width_pol(1550.0, 400.0, 0.1, 0.01);
        assert_relative_eq!(limit4.fwhm_nm, 0.5 * limit.fwhm_nm, epsilon = 2e-3);
    }

    #[test]
    fn sweep_crossover_and_ordering() {
        let lengths: Vec<f64> = (1..=20).map(|i| 10.0 * i as f64).collect();
        let sweep = comparison_sweep(&lengths, &SweepParams::default());
        let p30 = &sweep.points[2];
        assert!(
            p30.max_fwhm_et_nm > p30.max_fwhm_pol_nm,
            "ET should win at 30 km"
        );
        let cross = sweep.crossover_km.expect("crossover expected in grid");
        assert!(
            (60.0..=150.0).contains(&cross),
            "crossover at {cross} km out of expected band"
        );
    }

    #[test]
    fn sweep_single_length_has_no_crossover() {
        let sweep = comparison_sweep(&[30.0], &SweepParams::default());
        assert_eq!(sweep.points.len(), 1);
        assert_eq!(sweep.crossover_km, None);
    }

    #[test]
    fn width_solver_postcondition() {
        // both solvers return widths whose re-evaluated QBER sits on the target
        for length in [20.0, 30.0, 50.0, 100.0, 150.0] {
            let et = max_spectral_width_et(length, 17.0, 3.3, 1.1, 0.7, 0.01);
            let spread = temporal::dispersion_spread_ns(17.0 * length, et.fwhm_nm);
            let total = libm::sqrt(0.49 + spread * spread);
            let q = temporal::dispersion_qber(&PeakModel::new(3.3, total), 1.1);
            assert!((q - 0.01).abs() <= 1e-4, "ET L={length}: q={q}");

            let pol = max_spectral_width_pol(1550.0, length, 0.1, 0.01);
            let q = 0.5 * (1.0 - dop_pmd(1550.0, pol.fwhm_nm, length, 0.1));
            assert!((q - 0.01).abs() <= 1e-4, "POL L={length}: q={q}");
        }
    }
}
