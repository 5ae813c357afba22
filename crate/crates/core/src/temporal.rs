//! Three-peak coincidence-time model.
//!
//! Coincidences between Alice's and Bob's detections pile up in three Gaussian
//! peaks: a central interfering peak (weight 1/2) flanked by two non-interfering
//! side peaks (weight 1/4 each) displaced by the interferometer delay. All
//! peaks share one FWHM, the RMS combination of detection jitter, photon
//! coherence time and chromatic-dispersion spread. A window discriminator of
//! width W around the central peak selects the interfering events; integrating
//! the three Gaussians over the window yields the gate efficiency and the
//! dispersion-induced error rate.

use alloc::vec::Vec;

use crate::math;
use crate::scenario::{channel_budget, effective_spectrum, ScenarioConfig, C_NM_PER_NS};

/// Weight of the central (interfering) peak.
pub const CENTRAL_WEIGHT: f64 = 0.5;
/// Weight of each side peak.
pub const SIDE_WEIGHT: f64 = 0.25;

/// Coherence-time FWHM of a photon with the given spectral width,
/// tau = lambda^2 / (c * delta_lambda), in ns.
pub fn coherence_time_fwhm_ns(wavelength_nm: f64, fwhm_nm: f64) -> f64 {
    debug_assert!(wavelength_nm > 0.0 && fwhm_nm > 0.0);
    wavelength_nm * wavelength_nm / (C_NM_PER_NS * fwhm_nm)
}

/// Wavepacket spread from residual chromatic dispersion, D * delta_lambda, in ns.
pub fn dispersion_spread_ns(net_dispersion_ps_per_nm: f64, spectral_fwhm_nm: f64) -> f64 {
    net_dispersion_ps_per_nm * spectral_fwhm_nm * 1e-3
}

/// The temporal spreading contributions, all as FWHM values in ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingBudget {
    pub jitter_fwhm_ns: f64,
    pub coherence_fwhm_ns: f64,
    pub dispersion_fwhm_ns: f64,
}

impl TimingBudget {
    /// RMS combination of the three contributions.
    pub fn total_spread_ns(&self) -> f64 {
        libm::sqrt(
            self.jitter_fwhm_ns * self.jitter_fwhm_ns
                + self.coherence_fwhm_ns * self.coherence_fwhm_ns
                + self.dispersion_fwhm_ns * self.dispersion_fwhm_ns,
        )
    }
}

/// The three-Gaussian coincidence-time mixture: peaks of FWHM `fwhm_ns` at
/// -separation, 0, +separation with weights 1/4, 1/2, 1/4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakModel {
    pub separation_ns: f64,
    pub fwhm_ns: f64,
}

impl PeakModel {
    pub fn new(separation_ns: f64, fwhm_ns: f64) -> Self {
        PeakModel {
            separation_ns,
            fwhm_ns,
        }
    }

    /// Peak model implied by a scenario: separation from the interferometer
    /// delay, width from jitter + telecom-photon coherence + residual
    /// dispersion acting on the (possibly filtered) idler spectrum.
    pub fn for_scenario(scenario: &ScenarioConfig) -> (Self, TimingBudget) {
        let ch = channel_budget(scenario);
        let eff = effective_spectrum(&scenario.source, &scenario.strategy);
        let budget = TimingBudget {
            jitter_fwhm_ns: scenario.detector.jitter_fwhm_ns,
            coherence_fwhm_ns: coherence_time_fwhm_ns(eff.idler_center_nm, ch.idler_fwhm_nm),
            dispersion_fwhm_ns: dispersion_spread_ns(ch.net_dispersion_ps_per_nm, ch.idler_fwhm_nm),
        };
        (
            PeakModel::new(scenario.interferometer.delta_t_ns, budget.total_spread_ns()),
            budget,
        )
    }

    /// Mixture density at time t (1/ns).
    pub fn density(&self, t_ns: f64) -> f64 {
        let sigma = math::fwhm_to_sigma(self.fwhm_ns);
        CENTRAL_WEIGHT * math::gaussian_pdf(t_ns, 0.0, sigma)
            + SIDE_WEIGHT * math::gaussian_pdf(t_ns, -self.separation_ns, sigma)
            + SIDE_WEIGHT * math::gaussian_pdf(t_ns, self.separation_ns, sigma)
    }
}

/// Outcome of the two-sided timing condition
/// (peak width < peak separation < pump coherence time).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FransonCheck {
    Ok,
    /// Peak width is not below the separation: side peaks leak into the window.
    ViolatedLower,
    /// Separation is not below the pump coherence time: no interference.
    ViolatedUpper,
}

pub fn franson_condition(peaks: &PeakModel, pump_coherence_ns: f64) -> FransonCheck {
    if !(peaks.fwhm_ns < peaks.separation_ns) {
        FransonCheck::ViolatedLower
    } else if !(peaks.separation_ns < pump_coherence_ns) {
        FransonCheck::ViolatedUpper
    } else {
        FransonCheck::Ok
    }
}

/// Window-discriminator integrals of the peak mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowFractions {
    /// Fraction of the central peak inside the window.
    pub central_in: f64,
    /// Fraction of one side peak inside the window.
    pub side_in: f64,
    /// Side-peak share of all windowed counts.
    pub windowed_side_share: f64,
}

fn fractions_from(central_in: f64, side_in: f64) -> WindowFractions {
    let windowed = CENTRAL_WEIGHT * central_in + 2.0 * SIDE_WEIGHT * side_in;
    let windowed_side_share = if windowed > 0.0 {
        2.0 * SIDE_WEIGHT * side_in / windowed
    } else {
        0.0
    };
    WindowFractions {
        central_in,
        side_in,
        windowed_side_share,
    }
}

/// Window fractions via the Gaussian CDF (accurate to ~1e-15).
///
/// A degenerate zero width is treated as Dirac peaks: the central peak is
/// always inside, a side peak only when its center lies strictly inside.
pub fn window_fractions(peaks: &PeakModel, window_ns: f64) -> WindowFractions {
    debug_assert!(window_ns > 0.0);
    let half = 0.5 * window_ns;
    if peaks.fwhm_ns <= 0.0 {
        let side_in = if peaks.separation_ns < half { 1.0 } else { 0.0 };
        return fractions_from(1.0, side_in);
    }
    let sigma = math::fwhm_to_sigma(peaks.fwhm_ns);
    let central_in = math::gaussian_mass(0.0, sigma, -half, half);
    let side_in = math::gaussian_mass(peaks.separation_ns, sigma, -half, half);
    fractions_from(central_in, side_in)
}

/// Window fractions via adaptive quadrature of the peak densities.
///
/// Independent cross-check route for [`window_fractions`]; the two agree to
/// better than 1e-7 everywhere.
pub fn window_fractions_quadrature(peaks: &PeakModel, window_ns: f64) -> WindowFractions {
    debug_assert!(window_ns > 0.0);
    let half = 0.5 * window_ns;
    if peaks.fwhm_ns <= 0.0 {
        let side_in = if peaks.separation_ns < half { 1.0 } else { 0.0 };
        return fractions_from(1.0, side_in);
    }
    let sigma = math::fwhm_to_sigma(peaks.fwhm_ns);
    let tol = 1e-10;
    let central_in = math::gaussian_mass_quadrature(0.0, sigma, -half, half, tol);
    let side_in = math::gaussian_mass_quadrature(peaks.separation_ns, sigma, -half, half, tol);
    fractions_from(central_in, side_in)
}

/// Fraction of incoming photons accounted for as key bits: half the pairs sit
/// in the central peak, of which `central_in` survive the window cut. With an
/// arbitrarily wide window this tends to 0.5.
pub fn eta_g(peaks: &PeakModel, window_ns: f64) -> f64 {
    CENTRAL_WEIGHT * window_fractions(peaks, window_ns).central_in
}

/// QBER contribution of dispersion: side-peak events passing the window are
/// uncorrelated, so half of them are wrong bits.
pub fn dispersion_qber(peaks: &PeakModel, window_ns: f64) -> f64 {
    0.5 * window_fractions(peaks, window_ns).windowed_side_share
}

/// Normalized mixture density sampled on a symmetric bin grid.
///
/// Each value is the exact peak mass inside the bin divided by the bin width,
/// so the grid sum times `bin_ns` equals the mixture mass inside the range.
pub fn theoretical_histogram(peaks: &PeakModel, bin_ns: f64, range_ns: f64) -> Vec<(f64, f64)> {
    debug_assert!(bin_ns > 0.0 && range_ns > 0.0);
    let sigma = math::fwhm_to_sigma(peaks.fwhm_ns);
    let n = libm::floor(0.5 * range_ns / bin_ns) as i64;
    let mut out = Vec::with_capacity((2 * n + 1) as usize);
    for k in -n..=n {
        let center = k as f64 * bin_ns;
        let lo = center - 0.5 * bin_ns;
        let hi = center + 0.5 * bin_ns;
        let mass = CENTRAL_WEIGHT * math::gaussian_mass(0.0, sigma, lo, hi)
            + SIDE_WEIGHT * math::gaussian_mass(-peaks.separation_ns, sigma, lo, hi)
            + SIDE_WEIGHT * math::gaussian_mass(peaks.separation_ns, sigma, lo, hi);
        out.push((center, mass / bin_ns));
    }
    out
}
