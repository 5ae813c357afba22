//! Acceptance suite: one test per shipped performance claim, each printing a
//! PASS/FAIL line with the measured values (run with `--nocapture` to see
//! them). Tolerances are pinned here, in code.

use std::fs;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use etqkd_core::budget::{
    comparison_sweep, max_spectral_width_et, optical_qber, qber_budget, security_check,
    sifted_rate, RateFactors, SecurityStatus, SweepParams,
};
use etqkd_core::montecarlo::{expected_observables, simulate, GateRng, TruthTag};
use etqkd_core::scenario::{effective_spectrum, preset, preset_filtering};
use etqkd_core::sifting::{match_coincidences, sift, Disclosure, DoubleClickPolicy};
use etqkd_core::temporal::{
    coherence_time_fwhm_ns, dispersion_spread_ns, window_fractions, window_fractions_quadrature,
    PeakModel, TimingBudget,
};

fn criterion(id: u32, name: &str, pass: bool, details: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:02} {name}: {verdict} — {details}");
    assert!(pass, "criterion {id:02} {name} failed: {details}");
}

#[test]
fn acceptance_01_rate_chain() {
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
    let filt = RateFactors {
        singles_rate_hz: 36_000.0,
        t_c_db: 0.0,
        eta_g: 0.22,
        ..comp
    };
    let r_comp = sifted_rate(&comp);
    let r_filt = sifted_rate(&filt);
    criterion(
        1,
        "rate chain",
        (r_comp - 23.0).abs() <= 0.5 && (r_filt - 11.8).abs() <= 0.5,
        format!("compensation {r_comp:.3} Hz (23.0±0.5), filtering {r_filt:.3} Hz (11.8±0.5)"),
    );
}

#[test]
fn acceptance_02_optical_qber() {
    let a = optical_qber(0.89);
    let b = optical_qber(0.92);
    criterion(
        2,
        "optical qber",
        (a - 0.055).abs() < 1e-15 && (b - 0.04).abs() < 1e-15,
        format!("(1-0.89)/2 = {a}, (1-0.92)/2 = {b}"),
    );
}

#[test]
fn acceptance_03_filtered_widths() {
    let sc = preset_filtering();
    let eff = effective_spectrum(&sc.source, &sc.strategy);
    criterion(
        3,
        "filtered widths",
        (eff.signal_fwhm_nm - 1.45).abs() <= 0.1 && (eff.idler_fwhm_nm - 5.2).abs() <= 0.3,
        format!(
            "signal {:.4} nm (1.45±0.10), idler {:.4} nm (5.2±0.3)",
            eff.signal_fwhm_nm, eff.idler_fwhm_nm
        ),
    );
}

#[test]
fn acceptance_04_unmanaged_side_share() {
    let budget = TimingBudget {
        jitter_fwhm_ns: 0.7,
        coherence_fwhm_ns: coherence_time_fwhm_ns(1550.0, 6.9),
        dispersion_fwhm_ns: dispersion_spread_ns(17.0 * 31.0, 6.9),
    };
    let peaks = PeakModel::new(3.3, budget.total_spread_ns());
    let share = window_fractions(&peaks, 1.1).windowed_side_share;
    criterion(
        4,
        "unmanaged dispersion",
        (share - 0.10).abs() <= 0.03,
        format!("windowed side share {share:.4} (0.10±0.03)"),
    );
}

#[test]
fn acceptance_05_dispersion_qber_bands() {
    let comp = qber_budget(&preset("compensation").unwrap()).unwrap();
    let filt = qber_budget(&preset("filtering").unwrap()).unwrap();
    criterion(
        5,
        "dispersion qber bands",
        comp.dispersion < 0.001 && (filt.dispersion - 0.005).abs() <= 0.015,
        format!(
            "compensation {:.5} (<0.001), filtering {:.5} (0.005±0.015)",
            comp.dispersion, filt.dispersion
        ),
    );
}

#[test]
fn acceptance_06_detector_qber() {
    let comp = qber_budget(&preset("compensation").unwrap()).unwrap();
    let filt = qber_budget(&preset("filtering").unwrap()).unwrap();
    let comp_ok = (comp.detector - 0.04).abs() <= 0.01;
    let filt_ok = filt.detector >= 0.017 / 2.0 && filt.detector <= 0.017 * 2.0;
    criterion(
        6,
        "detector qber",
        comp_ok && filt_ok,
        format!(
            "compensation {:.4} (0.04±0.01), filtering {:.4} (0.017 within x2)",
            comp.detector, filt.detector
        ),
    );
}

#[test]
fn acceptance_07_total_qber() {
    let comp = qber_budget(&preset("compensation").unwrap()).unwrap();
    let filt = qber_budget(&preset("filtering").unwrap()).unwrap();
    let secure = security_check(comp.total) == SecurityStatus::Secure
        && security_check(filt.total) == SecurityStatus::Secure;
    criterion(
        7,
        "total qber",
        (comp.total - 0.105).abs() <= 0.02 && (filt.total - 0.072).abs() <= 0.02 && secure,
        format!(
            "compensation {:.4} (0.105±0.02), filtering {:.4} (0.072±0.02), both secure: {secure}",
            comp.total, filt.total
        ),
    );
}

#[test]
fn acceptance_08_et_width_solver() {
    let limit = max_spectral_width_et(30.0, 17.0, 3.3, 1.1, 0.7, 0.01);
    criterion(
        8,
        "et width solver at 30 km",
        limit.constrained && limit.fwhm_nm >= 4.5 && limit.fwhm_nm <= 5.5,
        format!("max width {:.4} nm (4.5..5.5)", limit.fwhm_nm),
    );
}

#[test]
fn acceptance_09_comparison_sweep() {
    let lengths: Vec<f64> = (1..=20).map(|i| 10.0 * i as f64).collect();
    let sweep = comparison_sweep(&lengths, &SweepParams::default());
    let p30 = sweep.points.iter().find(|p| p.length_km == 30.0).unwrap();
    let et_wins_at_30 = p30.max_fwhm_et_nm > p30.max_fwhm_pol_nm;
    let crossover = sweep.crossover_km;
    let in_band = crossover.is_some_and(|km| (60.0..=150.0).contains(&km));
    criterion(
        9,
        "comparison sweep",
        et_wins_at_30 && in_band,
        format!(
            "at 30 km ET {:.3} nm vs POL {:.3} nm, crossover {:?} km (60..150)",
            p30.max_fwhm_et_nm, p30.max_fwhm_pol_nm, crossover
        ),
    );
}

fn binomial_sigma(p: f64, n: f64) -> f64 {
    (p * (1.0 - p) / n.max(1.0)).sqrt()
}

#[test]
fn acceptance_10_analytic_monte_carlo_equivalence() {
    let started = Instant::now();
    let mut all_pass = true;
    let mut details = String::new();

    for name in ["compensation", "filtering"] {
        let sc = preset(name).unwrap();
        let window_ns = sc.detector.gate_width_ns;
        let expected = expected_observables(&sc, window_ns);
        let analytic_total = qber_budget(&sc).unwrap().total;

        let out = simulate(&sc, 600.0, 2026).unwrap();
        let set = match_coincidences(
            &out.alice_stream,
            &out.bob_stream,
            window_ns,
            DoubleClickPolicy::KeepEarliest,
        )
        .unwrap();
        let report = sift(&set, out.realized_duration_s, Disclosure::Full);

        // window acceptance
        let wa = report.window_acceptance.unwrap();
        let wa_tol = 3.0 * binomial_sigma(expected.window_acceptance, set.all.len() as f64);
        let wa_ok = (wa - expected.window_acceptance).abs() <= wa_tol;

        // windowed side share over signal events (truth log)
        let half_ps = (window_ns * 500.0).round() as i64;
        let (mut signal_in, mut side_in) = (0u64, 0u64);
        for t in &out.truth_log {
            if t.event.time_ps.abs() > half_ps {
                continue;
            }
            match t.tag {
                TruthTag::SignalCentral => signal_in += 1,
                TruthTag::SignalSide => {
                    signal_in += 1;
                    side_in += 1;
                }
                _ => {}
            }
        }
        let wss = side_in as f64 / signal_in.max(1) as f64;
        let wss_tol = 3.0 * binomial_sigma(expected.windowed_side_share, signal_in as f64) + 1e-9;
        let wss_ok = (wss - expected.windowed_side_share).abs() <= wss_tol;

        // sifted QBER against the exact mixture expectation, and against the
        // additive budget total at the coarser two-point tolerance
        let qber = report.measured_qber.unwrap();
        let qber_tol = 3.0 * binomial_sigma(expected.sifted_qber, report.sifted_count as f64);
        let qber_ok = (qber - expected.sifted_qber).abs() <= qber_tol
            && (qber - analytic_total).abs() <= 0.02;

        all_pass &= wa_ok && wss_ok && qber_ok;
        details.push_str(&format!(
            "[{name}: wa {wa:.4}/{:.4}±{wa_tol:.4}, wss {wss:.4}/{:.4}±{wss_tol:.4}, qber {qber:.4}/{:.4}±{qber_tol:.4} (budget {analytic_total:.4})] ",
            expected.window_acceptance, expected.windowed_side_share, expected.sifted_qber
        ));
    }

    let elapsed = started.elapsed().as_secs_f64();
    let runtime_ok = elapsed < 60.0;
    criterion(
        10,
        "analytic vs monte carlo",
        all_pass && runtime_ok,
        format!("{details}runtime {elapsed:.1} s (<60)"),
    );
}

fn run_cli(args: &[&str]) -> (String, String, i32) {
    let exe = env!("CARGO_BIN_EXE_etqkd");
    let out = Command::new(exe).args(args).output().expect("spawn etqkd");
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
        out.status.code().unwrap_or(-1),
    )
}

fn read_dir_bytes(dir: &PathBuf) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn acceptance_11_determinism() {
    let base = std::env::temp_dir().join(format!("etqkd_acc11_{}", std::process::id()));
    let _ = fs::remove_dir_all(&base);

    // simulate: identical bytes across runs and across worker counts
    let mut sim_outputs = Vec::new();
    for (tag, workers) in [("a", "1"), ("b", "1"), ("c", "2"), ("d", "4")] {
        let dir = base.join(format!("sim_{tag}"));
        let dir_s = dir.to_str().unwrap().to_string();
        let (stdout, stderr, code) = run_cli(&[
            "simulate",
            "--preset",
            "filtering",
            "--seed",
            "7",
            "--duration",
            "1",
            "--workers",
            workers,
            "--out",
            &dir_s,
        ]);
        assert_eq!(code, 0, "simulate failed: {stderr}");
        // strip the path-bearing lines; the artifact bytes carry the contract
        let summary: String = stdout.lines().filter(|l| !l.starts_with("wrote")).collect();
        sim_outputs.push((summary, read_dir_bytes(&dir)));
    }
    let sim_identical = sim_outputs.windows(2).all(|w| w[0] == w[1]);

    // full report pipeline, twice and with a different worker count
    let mut rep_outputs = Vec::new();
    for (tag, workers) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let dir = base.join(format!("rep_{tag}"));
        let dir_s = dir.to_str().unwrap().to_string();
        let (stdout, stderr, code) = run_cli(&[
            "report",
            "--preset",
            "compensation",
            "--seed",
            "3",
            "--duration",
            "2",
            "--workers",
            workers,
            "--out",
            &dir_s,
        ]);
        assert_eq!(code, 0, "report failed: {stderr}");
        let summary: String = stdout.lines().filter(|l| !l.starts_with("wrote")).collect();
        rep_outputs.push((summary, read_dir_bytes(&dir)));
    }
    let rep_identical = rep_outputs.windows(2).all(|w| w[0] == w[1]);

    // in-process double check of the library surface
    let sc = preset_filtering();
    let lib_identical = simulate(&sc, 1.0, 7).unwrap() == simulate(&sc, 1.0, 7).unwrap();

    let _ = fs::remove_dir_all(&base);
    criterion(
        11,
        "determinism",
        sim_identical && rep_identical && lib_identical,
        format!(
            "simulate byte-identical across runs/workers: {sim_identical}, report pipeline: {rep_identical}, library: {lib_identical}"
        ),
    );
}

#[test]
fn acceptance_12_property_suites() {
    // window_fractions monotone in W
    let mut monotone = true;
    for &(sep, fwhm) in &[(3.3, 0.7), (3.3, 2.8), (3.3, 3.7), (1.0, 0.2), (6.0, 4.0)] {
        let peaks = PeakModel::new(sep, fwhm);
        let mut prev = window_fractions(&peaks, 0.05);
        let mut w = 0.1;
        while w < 20.0 {
            let cur = window_fractions(&peaks, w);
            monotone &=
                cur.central_in >= prev.central_in - 1e-12 && cur.side_in >= prev.side_in - 1e-12;
            prev = cur;
            w += 0.1;
        }
    }

    // CDF vs quadrature on 1000 seeded random triples
    let mut rng = GateRng::from_key(0xACC12, 9, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let fwhm = 0.01 + 7.99 * rng.next_f64();
        let sep = 0.1 + 9.9 * rng.next_f64();
        let w = 0.05 + 14.95 * rng.next_f64();
        let peaks = PeakModel::new(sep, fwhm);
        let a = window_fractions(&peaks, w);
        let b = window_fractions_quadrature(&peaks, w);
        worst = worst
            .max((a.central_in - b.central_in).abs())
            .max((a.side_in - b.side_in).abs())
            .max((a.windowed_side_share - b.windowed_side_share).abs());
    }
    let routes_agree = worst < 1e-7;

    // RMS combination permutation invariance
    let mut rms_invariant = true;
    let mut rng = GateRng::from_key(0xACC12, 10, 0);
    for _ in 0..200 {
        let (a, b, c) = (
            5.0 * rng.next_f64(),
            5.0 * rng.next_f64(),
            5.0 * rng.next_f64(),
        );
        let spread = |x: f64, y: f64, z: f64| {
            TimingBudget {
                jitter_fwhm_ns: x,
                coherence_fwhm_ns: y,
                dispersion_fwhm_ns: z,
            }
            .total_spread_ns()
        };
        let r = spread(a, b, c);
        rms_invariant &= (spread(c, a, b) - r).abs() < 1e-12 * (1.0 + r)
            && (spread(b, c, a) - r).abs() < 1e-12 * (1.0 + r);
    }

    // 3 dB on any loss leg multiplies the rate by 10^-0.3 exactly
    let f = RateFactors {
        singles_rate_hz: 79_000.0,
        mu: 0.5,
        t_l_db: 8.3,
        t_b_db: 5.4,
        t_c_db: 2.9,
        eta_d: 0.1,
        eta_g: 0.38,
        q_s: 0.7,
    };
    let factor = 10f64.powf(-0.3);
    let mut three_db_exact = true;
    for leg in 0..3 {
        let mut bumped = f;
        match leg {
            0 => bumped.t_l_db += 3.0,
            1 => bumped.t_b_db += 3.0,
            _ => bumped.t_c_db += 3.0,
        }
        let ratio = sifted_rate(&bumped) / sifted_rate(&f);
        three_db_exact &= (ratio - factor).abs() <= 1e-13 * factor;
    }

    // bisection postcondition: returned widths re-evaluate onto the target
    let mut postcondition = true;
    for length in [20.0, 30.0, 60.0, 100.0, 150.0] {
        let et = max_spectral_width_et(length, 17.0, 3.3, 1.1, 0.7, 0.01);
        let spread = dispersion_spread_ns(17.0 * length, et.fwhm_nm);
        let total = (0.49f64 + spread * spread).sqrt();
        let q = etqkd_core::temporal::dispersion_qber(&PeakModel::new(3.3, total), 1.1);
        postcondition &= (q - 0.01).abs() <= 1e-4;

        let pol = etqkd_core::budget::max_spectral_width_pol(1550.0, length, 0.1, 0.01);
        let q = 0.5 * (1.0 - etqkd_core::budget::dop_pmd(1550.0, pol.fwhm_nm, length, 0.1));
        postcondition &= (q - 0.01).abs() <= 1e-4;
    }

    criterion(
        12,
        "property suites",
        monotone && routes_agree && rms_invariant && three_db_exact && postcondition,
        format!(
            "monotone {monotone}, routes agree (worst {worst:.2e} < 1e-7), rms invariant {rms_invariant}, 3dB exact {three_db_exact}, bisection postcondition {postcondition}"
        ),
    );
}
