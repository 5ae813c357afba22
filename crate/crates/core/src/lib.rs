//! Core model of an energy-time entangled QKD link over dispersive fiber:
//! scenario description, three-peak coincidence-time model, QBER and key-rate
//! budgets, design-space solvers, event-level Monte Carlo, and sifting.
//!
//! The crate is `no_std` (alloc only); all IO, file formats and the CLI live
//! in the companion `etqkd-cli` crate.

#![cfg_attr(not(test), no_std)]
// Validation uses negated comparisons (`!(v > 0.0)`) on purpose: NaN must
// fail every bound check, which `v <= 0.0` would not do.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod budget;
pub mod math;
pub mod montecarlo;
pub mod scenario;
pub mod sifting;
pub mod temporal;

pub use budget::{qber_budget, rate_chain, security_check, QberBudget, RateChain, SecurityStatus};
pub use montecarlo::{simulate, EventRecord, SimOutput};
pub use scenario::{parse_scenario, preset, to_config_text, ScenarioConfig};
pub use sifting::{match_coincidences, sift, SiftReport};
pub use temporal::PeakModel;
