//! Multi-worker simulation driver. Gate generation is keyed per gate id, so
//! partitioning the range across threads and concatenating the chunks in
//! order reproduces the single-threaded output byte for byte.

use etqkd_core::montecarlo::{
    assemble, gate_count, simulate_gates, SimChunk, SimError, SimOutput, SimParams,
};
use etqkd_core::scenario::ScenarioConfig;

pub fn simulate_parallel(
    scenario: &ScenarioConfig,
    duration_s: f64,
    seed: u64,
    workers: usize,
) -> Result<SimOutput, SimError> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(SimError::InvalidDuration(duration_s));
    }
    scenario.validate()?;
    let params = SimParams::from_scenario(scenario);
    let gates = gate_count(&params, duration_s, seed);
    let workers = workers.max(1).min(gates.max(1) as usize);

    let chunk = if workers == 1 {
        simulate_gates(&params, seed, 0..gates)
    } else {
        let step = gates.div_ceil(workers as u64);
        let ranges: Vec<_> = (0..workers as u64)
            .map(|i| (i * step).min(gates)..((i + 1) * step).min(gates))
            .collect();
        let chunks: Vec<SimChunk> = std::thread::scope(|scope| {
            let handles: Vec<_> = ranges
                .into_iter()
                .map(|range| {
                    let params = &params;
                    scope.spawn(move || simulate_gates(params, seed, range))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        let mut merged = SimChunk::default();
        for c in chunks {
            merged.alice.extend(c.alice);
            merged.bob.extend(c.bob);
            merged.truth.extend(c.truth);
        }
        merged
    };
    Ok(assemble(chunk, duration_s, seed, gates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use etqkd_core::montecarlo::simulate;
    use etqkd_core::scenario::preset_filtering;

    #[test]
    fn worker_count_does_not_change_output() {
        let sc = preset_filtering();
        let sequential = simulate(&sc, 2.0, 9).unwrap();
        for workers in [1, 2, 3, 8] {
            let parallel = simulate_parallel(&sc, 2.0, 9, workers).unwrap();
            assert_eq!(parallel, sequential, "workers = {workers}");
        }
    }
}
