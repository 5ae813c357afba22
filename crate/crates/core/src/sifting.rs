//! Coincidence matching with the window discriminator, basis sifting, and
//! QBER estimation over Alice/Bob record streams.

use alloc::vec::Vec;

use crate::montecarlo::{EventRecord, Party};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SiftError {
    #[error("{party} stream is not sorted by gate id")]
    UnsortedStream { party: &'static str },
    #[error("window width must be > 0, got {0}")]
    InvalidWindow(f64),
}

/// What to do when several Bob clicks land in one gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DoubleClickPolicy {
    /// Keep the earliest click (counted in `duplicate_bob_clicks`).
    #[default]
    KeepEarliest,
    /// Drop the whole gate (counted in `dropped_gates`).
    DiscardGate,
}

/// One joined detection pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoincidenceRecord {
    pub gate_id: u64,
    pub delta_t_ps: i64,
    pub alice_basis: u8,
    pub bob_basis: u8,
    pub alice_bit: u8,
    pub bob_bit: u8,
}

/// Join product: everything for histogramming, the windowed subset for keying.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoincidenceSet {
    /// Coincidences with |delta_t| <= W/2 (closed interval).
    pub inside: Vec<CoincidenceRecord>,
    /// All coincidences regardless of the window.
    pub all: Vec<CoincidenceRecord>,
    /// Extra Bob clicks resolved by the double-click policy.
    pub duplicate_bob_clicks: u64,
    /// Gates dropped by [`DoubleClickPolicy::DiscardGate`].
    pub dropped_gates: u64,
}

/// Which sifted bits are disclosed for QBER estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Disclosure {
    /// Compare every sifted bit (simulation context).
    #[default]
    Full,
    /// Compare every k-th sifted bit only.
    EveryKth(u32),
}

/// Sifting product.
#[derive(Debug, Clone, PartialEq)]
pub struct SiftReport {
    /// (alice_bit, bob_bit) pairs that survived basis sifting.
    pub sifted_bits: Vec<(u8, u8)>,
    pub coincidence_count: u64,
    pub sifted_count: u64,
    pub sifted_rate_hz: f64,
    /// Sifted / coincident; None when there were no coincidences.
    pub measured_q_s: Option<f64>,
    /// Errors / disclosed; None when nothing was disclosed.
    pub measured_qber: Option<f64>,
    pub disclosed_count: u64,
    /// Windowed / all coincidences; None when there were none at all.
    pub window_acceptance: Option<f64>,
    pub duplicate_bob_clicks: u64,
}

fn check_sorted(stream: &[EventRecord], party: &'static str) -> Result<(), SiftError> {
    if stream.windows(2).any(|w| w[0].gate_id > w[1].gate_id) {
        return Err(SiftError::UnsortedStream { party });
    }
    Ok(())
}

/// Join the two streams by gate id and split on the window discriminator.
///
/// Within a gate the earliest click wins (ties resolved by stream order);
/// the window boundary itself counts as inside.
pub fn match_coincidences(
    alice_stream: &[EventRecord],
    bob_stream: &[EventRecord],
    window_ns: f64,
    policy: DoubleClickPolicy,
) -> Result<CoincidenceSet, SiftError> {
    if !(window_ns > 0.0) {
        return Err(SiftError::InvalidWindow(window_ns));
    }
    check_sorted(alice_stream, "alice")?;
    check_sorted(bob_stream, "bob")?;
    let half_window_ps = libm::round(window_ns * 500.0) as i64;

    let mut set = CoincidenceSet::default();
    let mut a = 0usize;
    let mut b = 0usize;
    while a < alice_stream.len() && b < bob_stream.len() {
        let ga = alice_stream[a].gate_id;
        let gb = bob_stream[b].gate_id;
        if ga < gb {
            a += 1;
            continue;
        }
        if gb < ga {
            b += 1;
            continue;
        }
        // one gate's worth of records on both sides
        let mut a_end = a + 1;
        while a_end < alice_stream.len() && alice_stream[a_end].gate_id == ga {
            a_end += 1;
        }
        let mut b_end = b + 1;
        while b_end < bob_stream.len() && bob_stream[b_end].gate_id == gb {
            b_end += 1;
        }
        set.duplicate_bob_clicks += (b_end - b - 1) as u64 + (a_end - a - 1) as u64;
        if (b_end - b > 1 || a_end - a > 1) && policy == DoubleClickPolicy::DiscardGate {
            set.dropped_gates += 1;
        } else {
            let alice = earliest(&alice_stream[a..a_end]);
            let bob = earliest(&bob_stream[b..b_end]);
            debug_assert_eq!(alice.party, Party::Alice);
            debug_assert_eq!(bob.party, Party::Bob);
            let rec = CoincidenceRecord {
                gate_id: ga,
                delta_t_ps: bob.time_ps - alice.time_ps,
                alice_basis: alice.basis,
                bob_basis: bob.basis,
                alice_bit: alice.bit,
                bob_bit: bob.bit,
            };
            set.all.push(rec);
            if rec.delta_t_ps.abs() <= half_window_ps {
                set.inside.push(rec);
            }
        }
        a = a_end;
        b = b_end;
    }
    Ok(set)
}

fn earliest(records: &[EventRecord]) -> &EventRecord {
    let mut best = &records[0];
    for r in &records[1..] {
        if r.time_ps < best.time_ps {
            best = r;
        }
    }
    best
}

/// Basis-sift the windowed coincidences and estimate q_s, the QBER and the
/// sifted rate against the realized duration.
pub fn sift(set: &CoincidenceSet, realized_duration_s: f64, disclosure: Disclosure) -> SiftReport {
    let coincidence_count = set.inside.len() as u64;
    let sifted_bits: Vec<(u8, u8)> = set
        .inside
        .iter()
        .filter(|c| c.alice_basis == c.bob_basis)
        .map(|c| (c.alice_bit, c.bob_bit))
        .collect();
    let sifted_count = sifted_bits.len() as u64;

    let step = match disclosure {
        Disclosure::Full => 1usize,
        Disclosure::EveryKth(k) => k.max(1) as usize,
    };
    let mut disclosed = 0u64;
    let mut errors = 0u64;
    for (alice_bit, bob_bit) in sifted_bits.iter().step_by(step) {
        disclosed += 1;
        if alice_bit != bob_bit {
            errors += 1;
        }
    }

    SiftReport {
        measured_q_s: (coincidence_count > 0)
            .then(|| sifted_count as f64 / coincidence_count as f64),
        measured_qber: (disclosed > 0).then(|| errors as f64 / disclosed as f64),
        disclosed_count: disclosed,
        sifted_rate_hz: if realized_duration_s > 0.0 {
            sifted_count as f64 / realized_duration_s
        } else {
            0.0
        },
        window_acceptance: (!set.all.is_empty())
            .then(|| set.inside.len() as f64 / set.all.len() as f64),
        duplicate_bob_clicks: set.duplicate_bob_clicks,
        coincidence_count,
        sifted_count,
        sifted_bits,
    }
}
