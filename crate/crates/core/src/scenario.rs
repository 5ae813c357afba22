//! Physical scenario description: pair source, fiber span, dispersion-reduction
//! strategy, interferometers and detectors, plus the spectral and loss
//! transformations each strategy induces.
//!
//! Scenarios are immutable values. They are built from the line-oriented
//! key-value config format (see [`parse_scenario`]) or from the two shipped
//! presets, `compensation` and `filtering`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use core::f64::consts::FRAC_PI_2;

/// Speed of light in nm/ns (== m/s * 1e-9 * 1e9).
pub const C_NM_PER_NS: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing required fields: {0}")]
    MissingFields(String),
    #[error("invalid {field}: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

fn invalid(field: &'static str, message: String) -> ConfigError {
    ConfigError::Invalid { field, message }
}

/// Photon-pair source parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub pump_wavelength_nm: f64,
    /// Short-wavelength photon kept at the source side (e.g. 810 nm).
    pub signal_wavelength_nm: f64,
    /// Telecom photon launched into the quantum channel (e.g. 1550 nm).
    pub idler_wavelength_nm: f64,
    pub signal_fwhm_nm: f64,
    pub idler_fwhm_nm: f64,
    /// Singles rate of the bare source at Alice, before any strategy throughput.
    pub alice_singles_rate_hz: f64,
    /// True pairs launched into the quantum channel per second (calibration
    /// constant for the accidental-coincidence rate).
    pub pair_rate_in_fiber_hz: f64,
    /// Probability the idler photon is in the fiber given Alice's click.
    pub mu_coupling: f64,
}

impl SourceSpec {
    fn validate(&self) -> Result<(), ConfigError> {
        for (field, v) in [
            ("source.pump_wavelength_nm", self.pump_wavelength_nm),
            ("source.signal_wavelength_nm", self.signal_wavelength_nm),
            ("source.idler_wavelength_nm", self.idler_wavelength_nm),
            ("source.signal_fwhm_nm", self.signal_fwhm_nm),
            ("source.idler_fwhm_nm", self.idler_fwhm_nm),
        ] {
            if !(v > 0.0) {
                return Err(invalid(field, format!("must be > 0, got {v}")));
            }
        }
        for (field, v) in [
            ("source.alice_singles_rate_hz", self.alice_singles_rate_hz),
            ("source.pair_rate_in_fiber_hz", self.pair_rate_in_fiber_hz),
        ] {
            if !(v >= 0.0) {
                return Err(invalid(field, format!("rate must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.mu_coupling) {
            return Err(invalid(
                "source.mu_coupling",
                format!("must be in [0, 1], got {}", self.mu_coupling),
            ));
        }
        Ok(())
    }
}

/// One span of quantum-channel fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberSpan {
    pub length_km: f64,
    /// Total attenuation of the span.
    pub attenuation_db: f64,
    pub dispersion_ps_per_nm_km: f64,
    pub pmd_coeff_ps_per_sqrt_km: f64,
}

impl FiberSpan {
    fn validate(&self) -> Result<(), ConfigError> {
        for (field, v) in [
            ("fiber.length_km", self.length_km),
            ("fiber.attenuation_db", self.attenuation_db),
            (
                "fiber.pmd_coeff_ps_per_sqrt_km",
                self.pmd_coeff_ps_per_sqrt_km,
            ),
        ] {
            if !(v >= 0.0) {
                return Err(invalid(field, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// How chromatic dispersion in the channel is handled.
#[derive(Debug, Clone, PartialEq)]
pub enum DispersionStrategy {
    None,
    /// Negative-dispersion spool inserted before Bob.
    Compensation {
        d_comp_ps_per_nm: f64,
        loss_db: f64,
        /// Extra propagation delay of the spool, in equivalent km of standard
        /// fiber. A fixed offset on every gate: it sizes the classical
        /// channel, not the gate-relative observables.
        delay_equiv_km: f64,
    },
    /// Bandpass filter on the source-side photon; energy conservation narrows
    /// the twin photon correspondingly.
    Filtering {
        center_nm: f64,
        fwhm_nm: f64,
        peak_transmission: f64,
        /// Extra throughput factor (<= 1) absorbing filter/source center mismatch.
        center_offset_penalty: f64,
    },
}

impl DispersionStrategy {
    fn validate(&self) -> Result<(), ConfigError> {
        match self {
            DispersionStrategy::None => Ok(()),
            DispersionStrategy::Compensation {
                d_comp_ps_per_nm,
                loss_db,
                ..
            } => {
                if !(*d_comp_ps_per_nm >= 0.0) {
                    return Err(invalid(
                        "strategy.d_comp_ps_per_nm",
                        format!("must be >= 0, got {d_comp_ps_per_nm}"),
                    ));
                }
                if !(*loss_db >= 0.0) {
                    return Err(invalid(
                        "strategy.loss_db",
                        format!("must be >= 0, got {loss_db}"),
                    ));
                }
                Ok(())
            }
            DispersionStrategy::Filtering {
                center_nm,
                fwhm_nm,
                peak_transmission,
                center_offset_penalty,
            } => {
                if !(*fwhm_nm > 0.0) {
                    return Err(invalid(
                        "strategy.fwhm_nm",
                        format!("must be > 0, got {fwhm_nm}"),
                    ));
                }
                if !(*center_nm > 0.0) {
                    return Err(invalid(
                        "strategy.center_nm",
                        format!("must be > 0, got {center_nm}"),
                    ));
                }
                for (field, v) in [
                    ("strategy.peak_transmission", *peak_transmission),
                    ("strategy.center_offset_penalty", *center_offset_penalty),
                ] {
                    if !(v > 0.0 && v <= 1.0) {
                        return Err(invalid(field, format!("must be in (0, 1], got {v}")));
                    }
                }
                Ok(())
            }
        }
    }

    fn variant_name(&self) -> &'static str {
        match self {
            DispersionStrategy::None => "none",
            DispersionStrategy::Compensation { .. } => "compensation",
            DispersionStrategy::Filtering { .. } => "filtering",
        }
    }
}

/// Unbalanced-interferometer pair shared by Alice and Bob.
///
/// `basis_phases[b]` holds (phi_A, phi_B) applied when both parties analyze in
/// basis `b`. The defaults give deterministic correlation on matched bases
/// (phi_A + phi_B = 0) and 50/50 outcomes on mismatched ones.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferometerSpec {
    /// Path-difference delay of each interferometer.
    pub delta_t_ns: f64,
    /// Fringe contrast in [0, 1].
    pub visibility: f64,
    pub basis_phases: [(f64, f64); 2],
}

pub const DEFAULT_BASIS_PHASES: [(f64, f64); 2] = [(0.0, 0.0), (FRAC_PI_2, -FRAC_PI_2)];

impl InterferometerSpec {
    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.delta_t_ns > 0.0) {
            return Err(invalid(
                "interferometer.delta_t_ns",
                format!("must be > 0, got {}", self.delta_t_ns),
            ));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(invalid(
                "interferometer.visibility",
                format!("must be in [0, 1], got {}", self.visibility),
            ));
        }
        Ok(())
    }
}

/// Bob-side detection parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub efficiency: f64,
    /// False-count probability per gate summed over Bob's detectors.
    pub dark_prob_per_gate_total: f64,
    /// Combined electronic/detection jitter.
    pub jitter_fwhm_ns: f64,
    pub gate_width_ns: f64,
    pub bob_loss_db: f64,
}

impl DetectorSpec {
    fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(invalid(
                "detector.efficiency",
                format!("must be in [0, 1], got {}", self.efficiency),
            ));
        }
        for (field, v) in [
            (
                "detector.dark_prob_per_gate_total",
                self.dark_prob_per_gate_total,
            ),
            ("detector.jitter_fwhm_ns", self.jitter_fwhm_ns),
            ("detector.bob_loss_db", self.bob_loss_db),
        ] {
            if !(v >= 0.0) {
                return Err(invalid(field, format!("must be >= 0, got {v}")));
            }
        }
        if !(self.gate_width_ns > 0.0) {
            return Err(invalid(
                "detector.gate_width_ns",
                format!("must be > 0, got {}", self.gate_width_ns),
            ));
        }
        Ok(())
    }
}

/// Full link parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub source: SourceSpec,
    pub fiber: FiberSpan,
    pub strategy: DispersionStrategy,
    pub interferometer: InterferometerSpec,
    pub detector: DetectorSpec,
    /// Expected post-sifting retention (probability Bob's passive basis choice
    /// matches Alice's).
    pub q_sift: f64,
    /// Number of BB84 bases Alice uses (1 or 2).
    pub bases_used: u8,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.source.validate()?;
        self.fiber.validate()?;
        self.strategy.validate()?;
        self.interferometer.validate()?;
        self.detector.validate()?;
        if !(self.q_sift > 0.0 && self.q_sift <= 1.0) {
            return Err(invalid(
                "q_sift",
                format!("must be in (0, 1], got {}", self.q_sift),
            ));
        }
        if self.bases_used != 1 && self.bases_used != 2 {
            return Err(invalid(
                "bases_used",
                format!("must be 1 or 2, got {}", self.bases_used),
            ));
        }
        if let DispersionStrategy::Filtering { center_nm, .. } = self.strategy {
            if center_nm <= self.source.pump_wavelength_nm {
                return Err(invalid(
                    "strategy.center_nm",
                    format!(
                        "filter center ({center_nm} nm) must exceed the pump wavelength ({} nm)",
                        self.source.pump_wavelength_nm
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Singles rate at Alice after the strategy throughput is applied.
    pub fn effective_singles_rate_hz(&self) -> f64 {
        let eff = effective_spectrum(&self.source, &self.strategy);
        self.source.alice_singles_rate_hz * eff.singles_scale
    }
}

/// Source spectrum as seen after the dispersion-reduction strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveSpectrum {
    pub signal_fwhm_nm: f64,
    pub idler_fwhm_nm: f64,
    /// Throughput factor the strategy applies to Alice's singles rate.
    pub singles_scale: f64,
    pub idler_center_nm: f64,
}

/// Spectral widths, singles throughput and idler center under the strategy.
///
/// Filtering multiplies two Gaussians: the output signal width is
/// w = w_s*w_f/sqrt(w_s^2 + w_f^2), and energy conservation against the pump
/// fixes both the idler center and the width ratio (lambda_i/lambda_s)^2.
pub fn effective_spectrum(source: &SourceSpec, strategy: &DispersionStrategy) -> EffectiveSpectrum {
    match strategy {
        DispersionStrategy::None | DispersionStrategy::Compensation { .. } => EffectiveSpectrum {
            signal_fwhm_nm: source.signal_fwhm_nm,
            idler_fwhm_nm: source.idler_fwhm_nm,
            singles_scale: 1.0,
            idler_center_nm: source.idler_wavelength_nm,
        },
        DispersionStrategy::Filtering {
            center_nm,
            fwhm_nm,
            peak_transmission,
            center_offset_penalty,
        } => {
            let w_s = source.signal_fwhm_nm;
            let w_f = *fwhm_nm;
            let norm = libm::sqrt(w_s * w_s + w_f * w_f);
            let signal_fwhm_nm = w_s * w_f / norm;
            // 1/lambda_i = 1/lambda_pump - 1/lambda_signal at the filter center.
            let idler_center_nm = 1.0 / (1.0 / source.pump_wavelength_nm - 1.0 / center_nm);
            let ratio = idler_center_nm / center_nm;
            let idler_fwhm_nm = signal_fwhm_nm * ratio * ratio;
            let singles_scale = peak_transmission * center_offset_penalty * w_f / norm;
            EffectiveSpectrum {
                signal_fwhm_nm,
                idler_fwhm_nm,
                singles_scale,
                idler_center_nm,
            }
        }
    }
}

/// Loss and residual dispersion of the quantum channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelBudget {
    /// Fiber attenuation plus any strategy loss (filtering costs throughput at
    /// the source instead, so it adds nothing here).
    pub total_loss_db: f64,
    pub net_dispersion_ps_per_nm: f64,
    pub idler_fwhm_nm: f64,
}

pub fn channel_budget(scenario: &ScenarioConfig) -> ChannelBudget {
    let accumulated = scenario.fiber.length_km * scenario.fiber.dispersion_ps_per_nm_km;
    let (strategy_loss_db, net_dispersion) = match &scenario.strategy {
        DispersionStrategy::Compensation {
            d_comp_ps_per_nm,
            loss_db,
            ..
        } => (*loss_db, libm::fabs(accumulated - d_comp_ps_per_nm)),
        _ => (0.0, accumulated),
    };
    let eff = effective_spectrum(&scenario.source, &scenario.strategy);
    ChannelBudget {
        total_loss_db: scenario.fiber.attenuation_db + strategy_loss_db,
        net_dispersion_ps_per_nm: net_dispersion,
        idler_fwhm_nm: eff.idler_fwhm_nm,
    }
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Dispersion-compensated 31 km link, full two-basis operation.
pub fn preset_compensation() -> ScenarioConfig {
    ScenarioConfig {
        source: SourceSpec {
            pump_wavelength_nm: 532.0,
            signal_wavelength_nm: 810.0,
            idler_wavelength_nm: 1550.0,
            signal_fwhm_nm: 2.0,
            idler_fwhm_nm: 6.9,
            alice_singles_rate_hz: 79_000.0,
            // Calibrated so the accidental QBER term lands near 1%.
            pair_rate_in_fiber_hz: 3.4e6,
            mu_coupling: 0.5,
        },
        fiber: FiberSpan {
            length_km: 31.0,
            attenuation_db: 8.3,
            dispersion_ps_per_nm_km: 17.0,
            pmd_coeff_ps_per_sqrt_km: 0.1,
        },
        strategy: DispersionStrategy::Compensation {
            d_comp_ps_per_nm: 506.0,
            loss_db: 2.9,
            delay_equiv_km: 4.0,
        },
        interferometer: InterferometerSpec {
            delta_t_ns: 3.3,
            visibility: 0.89,
            basis_phases: DEFAULT_BASIS_PHASES,
        },
        detector: DetectorSpec {
            efficiency: 0.1,
            dark_prob_per_gate_total: 2.26e-5,
            jitter_fwhm_ns: 0.7,
            gate_width_ns: 1.1,
            bob_loss_db: 5.4,
        },
        q_sift: 0.7,
        bases_used: 2,
    }
}

/// Source-filtered link (2 nm bandpass at 814 nm), single-basis operation.
///
/// The stored singles rate is the inferred unfiltered source rate; the filter
/// throughput (Gaussian overlap times the calibrated peak transmission)
/// brings the effective rate down to the observed 36 kHz class. The detector
/// noise is half the compensation preset's: the quieter of the two detectors
/// dominates in this asymmetric single-basis configuration.
pub fn preset_filtering() -> ScenarioConfig {
    ScenarioConfig {
        source: SourceSpec {
            alice_singles_rate_hz: 108_000.0,
            pair_rate_in_fiber_hz: 2.0e6,
            ..preset_compensation().source
        },
        strategy: DispersionStrategy::Filtering {
            center_nm: 814.0,
            fwhm_nm: 2.0,
            peak_transmission: 0.4714,
            center_offset_penalty: 1.0,
        },
        interferometer: InterferometerSpec {
            visibility: 0.92,
            ..preset_compensation().interferometer
        },
        detector: DetectorSpec {
            dark_prob_per_gate_total: 1.13e-5,
            ..preset_compensation().detector
        },
        bases_used: 1,
        ..preset_compensation()
    }
}

/// Same 31 km link with no dispersion reduction at all.
pub fn preset_unmanaged() -> ScenarioConfig {
    ScenarioConfig {
        strategy: DispersionStrategy::None,
        ..preset_compensation()
    }
}

/// Resolve a preset by name.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    match name {
        "compensation" => Some(preset_compensation()),
        "filtering" => Some(preset_filtering()),
        "unmanaged" => Some(preset_unmanaged()),
        _ => None,
    }
}

pub const PRESET_NAMES: &[&str] = &["compensation", "filtering", "unmanaged"];

// ---------------------------------------------------------------------------
// Config text format
// ---------------------------------------------------------------------------

#[derive(Default)]
struct RawConfig {
    entries: Vec<(String, String, usize)>, // (section.key, value, line)
}

impl RawConfig {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        let idx = self.entries.iter().position(|(k, _, _)| k == key)?;
        let (_, value, line) = self.entries.remove(idx);
        Some((value, line))
    }
}

/// Parse the line-oriented key-value scenario format.
///
/// Sections are `[source]`, `[fiber]`, `[strategy]`, `[interferometer]`,
/// `[detector]`; `q_sift` and `bases_used` sit above any section header.
/// `#` starts a comment. Unknown keys and duplicate keys are parse errors.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    const SECTIONS: &[&str] = &["source", "fiber", "strategy", "interferometer", "detector"];

    let mut raw = RawConfig::default();
    let mut section = String::new();
    for (idx, line_raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match line_raw.find('#') {
            Some(pos) => &line_raw[..pos],
            None => line_raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line: line_no,
                message: "unterminated section header".to_string(),
            })?;
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("unknown section [{name}]"),
                });
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Parse {
                line: line_no,
                message: "empty key or value".to_string(),
            });
        }
        let full = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        if raw.entries.iter().any(|(k, _, _)| *k == full) {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("duplicate key `{full}`"),
            });
        }
        raw.entries.push((full, value.to_string(), line_no));
    }

    build_scenario(raw)
}

fn build_scenario(mut raw: RawConfig) -> Result<ScenarioConfig, ConfigError> {
    let mut missing: Vec<&'static str> = Vec::new();
    let mut bad_number: Option<ConfigError> = None;

    let require = |raw: &mut RawConfig,
                   key: &'static str,
                   missing: &mut Vec<&'static str>,
                   bad: &mut Option<ConfigError>| {
        match raw.take(key) {
            Some((v, line)) => match v.parse::<f64>() {
                Ok(x) => Some(x),
                Err(_) => {
                    bad.get_or_insert(ConfigError::Parse {
                        line,
                        message: format!("value for `{key}` is not a number: `{v}`"),
                    });
                    None
                }
            },
            None => {
                missing.push(key);
                None
            }
        }
    };
    // Optional keys with documented defaults.
    let optional = |raw: &mut RawConfig, key: &str, default: f64| -> Result<f64, ConfigError> {
        match raw.take(key) {
            Some((v, line)) => v.parse::<f64>().map_err(|_| ConfigError::Parse {
                line,
                message: format!("value for `{key}` is not a number: `{v}`"),
            }),
            None => Ok(default),
        }
    };

    // Strategy comes first: its variant decides which keys are meaningful.
    let (variant, variant_line) = raw
        .take("strategy.variant")
        .unwrap_or_else(|| ("none".to_string(), 0));
    let strategy = match variant.as_str() {
        "none" => DispersionStrategy::None,
        "compensation" => DispersionStrategy::Compensation {
            d_comp_ps_per_nm: optional(&mut raw, "strategy.d_comp_ps_per_nm", 0.0)?,
            loss_db: optional(&mut raw, "strategy.loss_db", 0.0)?,
            delay_equiv_km: optional(&mut raw, "strategy.delay_equiv_km", 0.0)?,
        },
        "filtering" => DispersionStrategy::Filtering {
            center_nm: require(
                &mut raw,
                "strategy.center_nm",
                &mut missing,
                &mut bad_number,
            )
            .unwrap_or(0.0),
            fwhm_nm: require(&mut raw, "strategy.fwhm_nm", &mut missing, &mut bad_number)
                .unwrap_or(0.0),
            peak_transmission: optional(&mut raw, "strategy.peak_transmission", 1.0)?,
            center_offset_penalty: optional(&mut raw, "strategy.center_offset_penalty", 1.0)?,
        },
        other => {
            return Err(ConfigError::Parse {
                line: variant_line,
                message: format!(
                    "strategy.variant must be none|compensation|filtering, got `{other}`"
                ),
            })
        }
    };

    let source = SourceSpec {
        pump_wavelength_nm: optional(&mut raw, "source.pump_wavelength_nm", 532.0)?,
        signal_wavelength_nm: require(
            &mut raw,
            "source.signal_wavelength_nm",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
        idler_wavelength_nm: require(
            &mut raw,
            "source.idler_wavelength_nm",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
        signal_fwhm_nm: require(
            &mut raw,
            "source.signal_fwhm_nm",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
        idler_fwhm_nm: require(
            &mut raw,
            "source.idler_fwhm_nm",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
        alice_singles_rate_hz: require(
            &mut raw,
            "source.alice_singles_rate_hz",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
        pair_rate_in_fiber_hz: require(
            &mut raw,
            "source.pair_rate_in_fiber_hz",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
        mu_coupling: optional(&mut raw, "source.mu_coupling", 0.5)?,
    };
    let fiber = FiberSpan {
        length_km: require(&mut raw, "fiber.length_km", &mut missing, &mut bad_number)
            .unwrap_or(0.0),
        attenuation_db: require(
            &mut raw,
            "fiber.attenuation_db",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
        dispersion_ps_per_nm_km: require(
            &mut raw,
            "fiber.dispersion_ps_per_nm_km",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
        pmd_coeff_ps_per_sqrt_km: optional(&mut raw, "fiber.pmd_coeff_ps_per_sqrt_km", 0.1)?,
    };
    let interferometer = InterferometerSpec {
        delta_t_ns: require(
            &mut raw,
            "interferometer.delta_t_ns",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
        visibility: require(
            &mut raw,
            "interferometer.visibility",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
        basis_phases: [
            (
                optional(
                    &mut raw,
                    "interferometer.basis0_phase_a_rad",
                    DEFAULT_BASIS_PHASES[0].0,
                )?,
                optional(
                    &mut raw,
                    "interferometer.basis0_phase_b_rad",
                    DEFAULT_BASIS_PHASES[0].1,
                )?,
            ),
            (
                optional(
                    &mut raw,
                    "interferometer.basis1_phase_a_rad",
                    DEFAULT_BASIS_PHASES[1].0,
                )?,
                optional(
                    &mut raw,
                    "interferometer.basis1_phase_b_rad",
                    DEFAULT_BASIS_PHASES[1].1,
                )?,
            ),
        ],
    };
    let detector = DetectorSpec {
        efficiency: require(
            &mut raw,
            "detector.efficiency",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
        dark_prob_per_gate_total: require(
            &mut raw,
            "detector.dark_prob_per_gate_total",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
        jitter_fwhm_ns: require(
            &mut raw,
            "detector.jitter_fwhm_ns",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
        gate_width_ns: require(
            &mut raw,
            "detector.gate_width_ns",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
        bob_loss_db: require(
            &mut raw,
            "detector.bob_loss_db",
            &mut missing,
            &mut bad_number,
        )
        .unwrap_or(0.0),
    };
    let q_sift = optional(&mut raw, "q_sift", 0.7)?;
    let bases_used = optional(&mut raw, "bases_used", 2.0)? as u8;

    if let Some(err) = bad_number {
        return Err(err);
    }
    if !missing.is_empty() {
        return Err(ConfigError::MissingFields(missing.join(", ")));
    }
    if let Some((key, _, line)) = raw.entries.first() {
        return Err(ConfigError::Parse {
            line: *line,
            message: format!("unknown key `{key}`"),
        });
    }

    let scenario = ScenarioConfig {
        source,
        fiber,
        strategy,
        interferometer,
        detector,
        q_sift,
        bases_used,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Serialize a scenario back to the config text format.
///
/// `parse_scenario(to_config_text(s)) == s` for every valid scenario; floats
/// use shortest round-trip formatting.
pub fn to_config_text(sc: &ScenarioConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("q_sift = {}\n", sc.q_sift));
    out.push_str(&format!("bases_used = {}\n\n", sc.bases_used));

    out.push_str("[source]\n");
    out.push_str(&format!(
        "pump_wavelength_nm = {}\n",
        sc.source.pump_wavelength_nm
    ));
    out.push_str(&format!(
        "signal_wavelength_nm = {}\n",
        sc.source.signal_wavelength_nm
    ));
    out.push_str(&format!(
        "idler_wavelength_nm = {}\n",
        sc.source.idler_wavelength_nm
    ));
    out.push_str(&format!("signal_fwhm_nm = {}\n", sc.source.signal_fwhm_nm));
    out.push_str(&format!("idler_fwhm_nm = {}\n", sc.source.idler_fwhm_nm));
    out.push_str(&format!(
        "alice_singles_rate_hz = {}\n",
        sc.source.alice_singles_rate_hz
    ));
    out.push_str(&format!(
        "pair_rate_in_fiber_hz = {}\n",
        sc.source.pair_rate_in_fiber_hz
    ));
    out.push_str(&format!("mu_coupling = {}\n\n", sc.source.mu_coupling));

    out.push_str("[fiber]\n");
    out.push_str(&format!("length_km = {}\n", sc.fiber.length_km));
    out.push_str(&format!("attenuation_db = {}\n", sc.fiber.attenuation_db));
    out.push_str(&format!(
        "dispersion_ps_per_nm_km = {}\n",
        sc.fiber.dispersion_ps_per_nm_km
    ));
    out.push_str(&format!(
        "pmd_coeff_ps_per_sqrt_km = {}\n\n",
        sc.fiber.pmd_coeff_ps_per_sqrt_km
    ));

    out.push_str("[strategy]\n");
    out.push_str(&format!("variant = {}\n", sc.strategy.variant_name()));
    match &sc.strategy {
        DispersionStrategy::None => {}
        DispersionStrategy::Compensation {
            d_comp_ps_per_nm,
            loss_db,
            delay_equiv_km,
        } => {
            out.push_str(&format!("d_comp_ps_per_nm = {d_comp_ps_per_nm}\n"));
            out.push_str(&format!("loss_db = {loss_db}\n"));
            out.push_str(&format!("delay_equiv_km = {delay_equiv_km}\n"));
        }
        DispersionStrategy::Filtering {
            center_nm,
            fwhm_nm,
            peak_transmission,
            center_offset_penalty,
        } => {
            out.push_str(&format!("center_nm = {center_nm}\n"));
            out.push_str(&format!("fwhm_nm = {fwhm_nm}\n"));
            out.push_str(&format!("peak_transmission = {peak_transmission}\n"));
            out.push_str(&format!(
                "center_offset_penalty = {center_offset_penalty}\n"
            ));
        }
    }
    out.push('\n');

    out.push_str("[interferometer]\n");
    out.push_str(&format!("delta_t_ns = {}\n", sc.interferometer.delta_t_ns));
    out.push_str(&format!("visibility = {}\n", sc.interferometer.visibility));
    out.push_str(&format!(
        "basis0_phase_a_rad = {}\n",
        sc.interferometer.basis_phases[0].0
    ));
    out.push_str(&format!(
        "basis0_phase_b_rad = {}\n",
        sc.interferometer.basis_phases[0].1
    ));
    out.push_str(&format!(
        "basis1_phase_a_rad = {}\n",
        sc.interferometer.basis_phases[1].0
    ));
    out.push_str(&format!(
        "basis1_phase_b_rad = {}\n\n",
        sc.interferometer.basis_phases[1].1
    ));

    out.push_str("[detector]\n");
    out.push_str(&format!("efficiency = {}\n", sc.detector.efficiency));
    out.push_str(&format!(
        "dark_prob_per_gate_total = {}\n",
        sc.detector.dark_prob_per_gate_total
    ));
    out.push_str(&format!(
        "jitter_fwhm_ns = {}\n",
        sc.detector.jitter_fwhm_ns
    ));
    out.push_str(&format!("gate_width_ns = {}\n", sc.detector.gate_width_ns));
    out.push_str(&format!("bob_loss_db = {}\n", sc.detector.bob_loss_db));
    out
}
