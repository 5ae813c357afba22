//! Output provenance: every artifact starts with a comment line naming the
//! tool version, the scenario, and a hash of the full parameter set, so any
//! CSV can be traced back to the exact configuration that produced it.

use etqkd_core::scenario::{to_config_text, ScenarioConfig};

pub const TOOL_NAME: &str = "etqkd";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// FNV-1a, 64-bit.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn scenario_hash(scenario: &ScenarioConfig) -> u64 {
    fnv1a_64(to_config_text(scenario).as_bytes())
}

pub fn header_line(scenario_label: &str, params_hash: u64, seed: Option<u64>) -> String {
    match seed {
        Some(seed) => format!(
            "# {TOOL_NAME} {TOOL_VERSION} | scenario={scenario_label} | params={params_hash:016x} | seed={seed}"
        ),
        None => format!(
            "# {TOOL_NAME} {TOOL_VERSION} | scenario={scenario_label} | params={params_hash:016x}"
        ),
    }
}
