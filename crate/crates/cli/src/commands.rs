//! Subcommand definitions and execution. Every command is deterministic given
//! its full argument list; all artifacts land under `--out` with provenance
//! headers.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use etqkd_core::budget::{
    comparison_sweep, qber_budget, rate_chain, security_check, SecurityStatus, SweepParams,
};
use etqkd_core::montecarlo::{empirical_histogram, expected_observables, SimOutput, TruthTag};
use etqkd_core::scenario::{parse_scenario, preset, ScenarioConfig, PRESET_NAMES};
use etqkd_core::sifting::{match_coincidences, sift, Disclosure, DoubleClickPolicy, SiftReport};
use etqkd_core::temporal::{franson_condition, theoretical_histogram, FransonCheck, PeakModel};

use crate::formats;
use crate::provenance::{header_line, scenario_hash};
use crate::runner::simulate_parallel;

/// Nominal key-exchange session length; multiplied by `--scale` when no
/// explicit `--duration` is given.
pub const DEFAULT_SESSION_S: f64 = 2400.0;
pub const DEFAULT_SCALE: f64 = 0.01;

/// Pump coherence assumed for the timing-condition check (CW laser, far above
/// any interferometer delay).
pub const DEFAULT_PUMP_COHERENCE_NS: f64 = 1000.0;

pub const EXIT_INSECURE: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "etqkd",
    version,
    about = "Simulator and planning tool for energy-time entangled QKD over dispersive fiber"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// QBER budget, rate chain and security verdict for a scenario
    Budget(BudgetArgs),
    /// Theoretical coincidence-time histogram (three-peak model)
    Peaks(PeaksArgs),
    /// Maximal spectral width vs distance, energy-time vs polarization coding
    Sweep(SweepArgs),
    /// Event-level simulation writing Alice/Bob/truth streams
    Simulate(SimulateArgs),
    /// Coincidence window + basis sifting over recorded streams
    Sift(SiftArgs),
    /// Simulate, sift and budget in one pass; analytic vs empirical
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ScenarioSource {
    /// Named preset scenario
    #[arg(long, value_parser = PRESET_NAMES.to_vec())]
    pub preset: Option<String>,
    /// Scenario config file (preset names also accepted and win over paths)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ScenarioSource {
    /// Resolve to a validated scenario plus a label for provenance headers.
    pub fn load(&self) -> Result<(ScenarioConfig, String)> {
        match (&self.preset, &self.config) {
            (Some(_), Some(_)) => bail!("give either --preset or --config, not both"),
            (Some(name), None) => {
                let sc = preset(name).with_context(|| format!("unknown preset `{name}`"))?;
                Ok((sc, name.clone()))
            }
            (None, Some(path)) => {
                // preset names resolve before file lookup
                if let Some(name) = path.to_str() {
                    if let Some(sc) = preset(name) {
                        return Ok((sc, name.to_string()));
                    }
                }
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading scenario config {path:?}"))?;
                let sc = parse_scenario(&text)
                    .with_context(|| format!("parsing scenario config {path:?}"))?;
                let label = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("custom")
                    .to_string();
                Ok((sc, label))
            }
            (None, None) => bail!(
                "a scenario source is required: --preset NAME or --config PATH (presets: {})",
                PRESET_NAMES.join(", ")
            ),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct BudgetArgs {
    #[command(flatten)]
    pub scenario: ScenarioSource,
    /// Override the discriminator/gate width used by the budget
    #[arg(long)]
    pub window_ns: Option<f64>,
    /// Pump coherence time for the timing-condition check
    #[arg(long, default_value_t = DEFAULT_PUMP_COHERENCE_NS)]
    pub pump_coherence_ns: f64,
    /// Exit nonzero when the total QBER reaches the security limit
    #[arg(long)]
    pub enforce_security: bool,
    /// Directory for budget.csv and chain.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct PeaksArgs {
    #[command(flatten)]
    pub scenario: ScenarioSource,
    /// Histogram bin width
    #[arg(long, default_value_t = 0.05)]
    pub bin_ns: f64,
    /// Histogram range (defaults to 4x the peak separation)
    #[arg(long)]
    pub range_ns: Option<f64>,
    /// Annotated discriminator width (header metadata only)
    #[arg(long)]
    pub window_ns: Option<f64>,
    /// Directory for peaks.csv (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// First channel length
    #[arg(long, default_value_t = 10.0)]
    pub from: f64,
    /// Last channel length
    #[arg(long, default_value_t = 200.0)]
    pub to: f64,
    /// Grid step
    #[arg(long, default_value_t = 10.0)]
    pub step: f64,
    /// Dispersion-QBER target both solvers aim at
    #[arg(long, default_value_t = 0.01)]
    pub target_qber: f64,
    /// Fiber dispersion
    #[arg(long, default_value_t = 17.0)]
    pub dispersion_ps_per_nm_km: f64,
    /// Interferometer delay
    #[arg(long, default_value_t = 3.3)]
    pub delta_t_ns: f64,
    /// Discriminator width
    #[arg(long, default_value_t = 1.1)]
    pub window_ns: f64,
    /// Detection jitter
    #[arg(long, default_value_t = 0.7)]
    pub jitter_fwhm_ns: f64,
    /// Photon wavelength for the polarization solver
    #[arg(long, default_value_t = 1550.0)]
    pub wavelength_nm: f64,
    /// PMD coefficient
    #[arg(long, default_value_t = 0.1)]
    pub pmd_coeff: f64,
    /// Directory for sweep.csv (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioSource,
    /// RNG seed (runs are reproducible per seed)
    #[arg(long)]
    pub seed: u64,
    /// Simulated seconds (overrides --scale)
    #[arg(long)]
    pub duration: Option<f64>,
    /// Fraction of the nominal session length to simulate
    #[arg(long, default_value_t = DEFAULT_SCALE)]
    pub scale: f64,
    /// Worker threads (output is identical for any count)
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Directory for alice.csv, bob.csv, truth.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct SiftArgs {
    /// Alice stream CSV
    #[arg(long)]
    pub alice: PathBuf,
    /// Bob stream CSV
    #[arg(long)]
    pub bob: PathBuf,
    /// Discriminator width (defaults to the gate width recorded in the stream)
    #[arg(long)]
    pub window_ns: Option<f64>,
    /// Realized duration (defaults to the value recorded in the stream)
    #[arg(long)]
    pub duration: Option<f64>,
    /// Disclose only every k-th sifted bit for the QBER estimate
    #[arg(long)]
    pub every_kth: Option<u32>,
    /// Drop gates with multiple Bob clicks instead of keeping the earliest
    #[arg(long)]
    pub discard_double_clicks: bool,
    /// Exit nonzero when the measured QBER reaches the security limit
    #[arg(long)]
    pub enforce_security: bool,
    /// Directory for sift_report.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ReportArgs {
    #[command(flatten)]
    pub scenario: ScenarioSource,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SCALE)]
    pub scale: f64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Discriminator width for sifting (defaults to the gate width)
    #[arg(long)]
    pub window_ns: Option<f64>,
    /// Bin width for the empirical histogram
    #[arg(long, default_value_t = 0.05)]
    pub bin_ns: f64,
    #[arg(long)]
    pub enforce_security: bool,
    /// Directory for all artifacts
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Budget(args) => run_budget(args),
        Command::Peaks(args) => run_peaks(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Sift(args) => run_sift(args),
        Command::Report(args) => run_report(args),
    }
}

fn resolve_duration(duration: Option<f64>, scale: f64) -> f64 {
    duration.unwrap_or(DEFAULT_SESSION_S * scale)
}

fn franson_text(check: FransonCheck, peaks: &PeakModel, pump_coherence_ns: f64) -> String {
    let verdict = match check {
        FransonCheck::Ok => "ok",
        FransonCheck::ViolatedLower => "violated: peak width reaches the separation",
        FransonCheck::ViolatedUpper => "violated: separation reaches the pump coherence",
    };
    format!(
        "timing condition: {verdict} (fwhm {:.4} ns, separation {:.4} ns, pump coherence {:.1} ns)",
        peaks.fwhm_ns, peaks.separation_ns, pump_coherence_ns
    )
}

fn budget_table(
    chain: &etqkd_core::budget::RateChain,
    budget: &etqkd_core::budget::QberBudget,
) -> String {
    let f = &chain.factors;
    let status = match security_check(budget.total) {
        SecurityStatus::Secure => "secure",
        SecurityStatus::Insecure => "insecure",
    };
    let mut s = String::new();
    s.push_str("qber budget\n");
    s.push_str(&format!(
        "  optical      {:7.3} %\n",
        100.0 * budget.optical
    ));
    s.push_str(&format!(
        "  accidental   {:7.3} %\n",
        100.0 * budget.accidental
    ));
    s.push_str(&format!(
        "  detector     {:7.3} %\n",
        100.0 * budget.detector
    ));
    s.push_str(&format!(
        "  dispersion   {:7.3} %\n",
        100.0 * budget.dispersion
    ));
    s.push_str(&format!("  total        {:7.3} %\n", 100.0 * budget.total));
    s.push_str(&format!("  security     {status} (limit 11 %)\n"));
    s.push('\n');
    s.push_str("rate chain\n");
    s.push_str(&format!("  singles (hz)   {:.3}\n", f.singles_rate_hz));
    s.push_str(&format!("  mu             {:.4}\n", f.mu));
    s.push_str(&format!("  t_l (db)       {:.3}\n", f.t_l_db));
    s.push_str(&format!("  t_b (db)       {:.3}\n", f.t_b_db));
    s.push_str(&format!("  t_c (db)       {:.3}\n", f.t_c_db));
    s.push_str(&format!("  eta_d          {:.4}\n", f.eta_d));
    s.push_str(&format!("  eta_g          {:.4}\n", f.eta_g));
    s.push_str(&format!("  q_s            {:.4}\n", f.q_s));
    s.push_str(&format!("  sifted (hz)    {:.3}\n", chain.sifted_rate_hz));
    s
}

fn apply_window_override(scenario: &mut ScenarioConfig, window_ns: Option<f64>) {
    if let Some(w) = window_ns {
        // the discriminator is assumed matched to the detection gate
        scenario.detector.gate_width_ns = w;
    }
}

fn run_budget(args: BudgetArgs) -> Result<u8> {
    let (mut scenario, label) = args.scenario.load()?;
    apply_window_override(&mut scenario, args.window_ns);
    let chain = rate_chain(&scenario);
    let budget = qber_budget(&scenario)?;
    let (peaks, _) = PeakModel::for_scenario(&scenario);
    let check = franson_condition(&peaks, args.pump_coherence_ns);
    let header = header_line(&label, scenario_hash(&scenario), None);

    println!("{header}");
    println!("{}", franson_text(check, &peaks, args.pump_coherence_ns));
    println!();
    print!("{}", budget_table(&chain, &budget));

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let comments = vec![header.clone()];
        formats::write_budget_csv(
            &dir.join("budget.csv"),
            &comments,
            &chain,
            &budget,
            security_check(budget.total),
        )?;
        formats::write_chain_csv(&dir.join("chain.csv"), &comments, &chain)?;
        println!();
        println!("wrote {}", dir.join("budget.csv").display());
        println!("wrote {}", dir.join("chain.csv").display());
    }

    if args.enforce_security && security_check(budget.total) == SecurityStatus::Insecure {
        eprintln!(
            "security: total qber {:.3} % is at or above the 11 % limit",
            100.0 * budget.total
        );
        return Ok(EXIT_INSECURE);
    }
    Ok(0)
}

fn run_peaks(args: PeaksArgs) -> Result<u8> {
    let (scenario, label) = args.scenario.load()?;
    let (peaks, budget) = PeakModel::for_scenario(&scenario);
    let range_ns = args.range_ns.unwrap_or(4.0 * peaks.separation_ns);
    if !(args.bin_ns > 0.0) {
        bail!("--bin-ns must be > 0");
    }
    let hist = theoretical_histogram(&peaks, args.bin_ns, range_ns);
    let mut comments = vec![header_line(&label, scenario_hash(&scenario), None)];
    comments.push(format!(
        "# separation_ns={} fwhm_ns={} jitter_fwhm_ns={} coherence_fwhm_ns={} dispersion_fwhm_ns={} window_ns={}",
        peaks.separation_ns,
        peaks.fwhm_ns,
        budget.jitter_fwhm_ns,
        budget.coherence_fwhm_ns,
        budget.dispersion_fwhm_ns,
        args.window_ns.unwrap_or(scenario.detector.gate_width_ns),
    ));

    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join("peaks.csv");
            formats::write_density_csv(&path, &comments, &hist)?;
            println!("{}", comments[0]);
            println!(
                "three-peak model: separation {:.4} ns, fwhm {:.4} ns, {} bins",
                peaks.separation_ns,
                peaks.fwhm_ns,
                hist.len()
            );
            println!("wrote {}", path.display());
        }
        None => {
            for line in &comments {
                println!("{line}");
            }
            println!("bin_center_ns,density");
            for (center, density) in &hist {
                println!("{center},{density}");
            }
        }
    }
    Ok(0)
}

fn run_sweep(args: SweepArgs) -> Result<u8> {
    if !(args.step > 0.0) || args.to < args.from || !(args.from > 0.0) {
        bail!("sweep grid requires 0 < --from <= --to and --step > 0");
    }
    let params = SweepParams {
        dispersion_ps_per_nm_km: args.dispersion_ps_per_nm_km,
        delta_t_ns: args.delta_t_ns,
        window_ns: args.window_ns,
        jitter_fwhm_ns: args.jitter_fwhm_ns,
        wavelength_nm: args.wavelength_nm,
        pmd_coeff_ps_per_sqrt_km: args.pmd_coeff,
        target_qber: args.target_qber,
    };
    let mut lengths = Vec::new();
    let mut l = args.from;
    while l <= args.to + 1e-9 {
        lengths.push(l);
        l += args.step;
    }
    let sweep = comparison_sweep(&lengths, &params);

    let param_text = format!("{params:?}|{:?}", lengths);
    let header = format!(
        "# etqkd {} | sweep | params={:016x}",
        crate::provenance::TOOL_VERSION,
        crate::provenance::fnv1a_64(param_text.as_bytes())
    );
    let comments = vec![header.clone()];

    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join("sweep.csv");
            formats::write_sweep_csv(&path, &comments, &sweep.points, sweep.crossover_km)?;
            println!("{header}");
            match sweep.crossover_km {
                Some(km) => println!("crossover: polarization overtakes energy-time at {km:.1} km"),
                None => println!("crossover: none inside the grid"),
            }
            println!("wrote {}", path.display());
        }
        None => {
            println!("{header}");
            println!("length_km,max_fwhm_et_nm,max_fwhm_pol_nm");
            for p in &sweep.points {
                println!("{},{},{}", p.length_km, p.max_fwhm_et_nm, p.max_fwhm_pol_nm);
            }
            match sweep.crossover_km {
                Some(km) => println!("# crossover_km={km}"),
                None => println!("# crossover_km=none"),
            }
        }
    }
    Ok(0)
}

/// Comment block shared by the three stream files of one run. Holds only
/// run-identity values so outputs stay byte-identical across worker counts.
fn stream_comments(label: &str, scenario: &ScenarioConfig, output: &SimOutput) -> Vec<String> {
    vec![
        header_line(label, scenario_hash(scenario), Some(output.seed)),
        format!(
            "# seed={} duration_s={} gates={} gate_width_ns={}",
            output.seed,
            output.realized_duration_s,
            output.alice_clicks_total,
            scenario.detector.gate_width_ns,
        ),
    ]
}

fn write_streams(
    dir: &Path,
    label: &str,
    scenario: &ScenarioConfig,
    output: &SimOutput,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let comments = stream_comments(label, scenario, output);
    formats::write_events(&dir.join("alice.csv"), &comments, &output.alice_stream)?;
    formats::write_events(&dir.join("bob.csv"), &comments, &output.bob_stream)?;
    formats::write_truth(&dir.join("truth.csv"), &comments, &output.truth_log)?;
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<u8> {
    let (scenario, label) = args.scenario.load()?;
    let duration = resolve_duration(args.duration, args.scale);
    let output = simulate_parallel(&scenario, duration, args.seed, args.workers)?;
    write_streams(&args.out, &label, &scenario, &output)?;

    println!(
        "{}",
        header_line(&label, scenario_hash(&scenario), Some(args.seed))
    );
    println!(
        "simulated {}s: {} gates, {} bob records, {} coincident gates",
        duration,
        output.alice_clicks_total,
        output.bob_stream.len(),
        output.alice_stream.len(),
    );
    for name in ["alice.csv", "bob.csv", "truth.csv"] {
        println!("wrote {}", args.out.join(name).display());
    }
    Ok(0)
}

fn sift_streams(
    alice: &[etqkd_core::montecarlo::EventRecord],
    bob: &[etqkd_core::montecarlo::EventRecord],
    window_ns: f64,
    duration_s: f64,
    every_kth: Option<u32>,
    discard_double_clicks: bool,
) -> Result<(SiftReport, etqkd_core::sifting::CoincidenceSet)> {
    let policy = if discard_double_clicks {
        DoubleClickPolicy::DiscardGate
    } else {
        DoubleClickPolicy::KeepEarliest
    };
    let disclosure = match every_kth {
        Some(k) if k > 1 => Disclosure::EveryKth(k),
        _ => Disclosure::Full,
    };
    let set = match_coincidences(alice, bob, window_ns, policy)?;
    let report = sift(&set, duration_s, disclosure);
    Ok((report, set))
}

fn run_sift(args: SiftArgs) -> Result<u8> {
    let (alice, meta_a) = formats::read_events(&args.alice)?;
    let (bob, meta_b) = formats::read_events(&args.bob)?;

    let meta_f64 = |key: &str| -> Option<f64> {
        meta_b
            .get(key)
            .or_else(|| meta_a.get(key))
            .and_then(|v| v.parse().ok())
    };
    let window_ns = args
        .window_ns
        .or_else(|| meta_f64("gate_width_ns"))
        .context("no --window-ns given and none recorded in the streams")?;
    let duration_s = args
        .duration
        .or_else(|| meta_f64("duration_s"))
        .context("no --duration given and none recorded in the streams")?;

    let (report, _) = sift_streams(
        &alice,
        &bob,
        window_ns,
        duration_s,
        args.every_kth,
        args.discard_double_clicks,
    )?;

    let header = format!(
        "# etqkd {} | sift | window_ns={} duration_s={}",
        crate::provenance::TOOL_VERSION,
        window_ns,
        duration_s
    );
    println!("{header}");
    print!("{}", formats::sift_report_text(&report));

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let path = dir.join("sift_report.csv");
        formats::write_sift_csv(&path, std::slice::from_ref(&header), &report)?;
        println!("wrote {}", path.display());
    }

    if args.enforce_security {
        match report.measured_qber {
            Some(q) if q >= etqkd_core::budget::SECURITY_QBER_LIMIT => {
                eprintln!(
                    "security: measured qber {:.3} % is at or above the 11 % limit",
                    100.0 * q
                );
                return Ok(EXIT_INSECURE);
            }
            None => {
                eprintln!("security: no disclosed bits, qber unknown");
                return Ok(EXIT_INSECURE);
            }
            _ => {}
        }
    }
    Ok(0)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}"))
        .unwrap_or_else(|| "n/a".to_string())
}

fn run_report(args: ReportArgs) -> Result<u8> {
    let (scenario, label) = args.scenario.load()?;
    let duration = resolve_duration(args.duration, args.scale);
    let window_ns = args.window_ns.unwrap_or(scenario.detector.gate_width_ns);

    // simulate + persist streams
    let output = simulate_parallel(&scenario, duration, args.seed, args.workers)?;
    write_streams(&args.out, &label, &scenario, &output)?;

    // sift
    let (report, _set) = sift_streams(
        &output.alice_stream,
        &output.bob_stream,
        window_ns,
        output.realized_duration_s,
        None,
        false,
    )?;

    // analytic side
    let chain = rate_chain(&scenario);
    let budget = qber_budget(&scenario)?;
    let expected = expected_observables(&scenario, window_ns);
    let (peaks, _) = PeakModel::for_scenario(&scenario);
    let check = franson_condition(&peaks, DEFAULT_PUMP_COHERENCE_NS);

    // empirical side-peak share among windowed signal events, from truth tags
    let half_ps = (window_ns * 500.0).round() as i64;
    let (mut signal_in, mut side_in) = (0u64, 0u64);
    for t in &output.truth_log {
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
    let empirical_wss = (signal_in > 0).then(|| side_in as f64 / signal_in as f64);

    let header = header_line(&label, scenario_hash(&scenario), Some(args.seed));
    let mut text = String::new();
    text.push_str(&format!("{header}\n"));
    text.push_str(&format!(
        "{}\n",
        franson_text(check, &peaks, DEFAULT_PUMP_COHERENCE_NS)
    ));
    text.push_str(&format!(
        "run: {} simulated seconds, {} gates, window {} ns\n\n",
        output.realized_duration_s, output.alice_clicks_total, window_ns
    ));
    text.push_str("observable              analytic      empirical\n");
    text.push_str(&format!(
        "sifted rate (hz)        {:<13.6} {:.6}\n",
        expected.sifted_rate_hz, report.sifted_rate_hz
    ));
    text.push_str(&format!(
        "sifted qber             {:<13.6} {}\n",
        expected.sifted_qber,
        fmt_opt(report.measured_qber)
    ));
    text.push_str(&format!(
        "q_s                     {:<13.6} {}\n",
        expected.measured_q_s,
        fmt_opt(report.measured_q_s)
    ));
    text.push_str(&format!(
        "window acceptance       {:<13.6} {}\n",
        expected.window_acceptance,
        fmt_opt(report.window_acceptance)
    ));
    text.push_str(&format!(
        "windowed side share     {:<13.6} {}\n",
        expected.windowed_side_share,
        fmt_opt(empirical_wss)
    ));
    text.push('\n');
    text.push_str(&budget_table(&chain, &budget));

    print!("{text}");

    // artifacts
    let comments = vec![header.clone()];
    formats::write_budget_csv(
        &args.out.join("budget.csv"),
        &comments,
        &chain,
        &budget,
        security_check(budget.total),
    )?;
    formats::write_chain_csv(&args.out.join("chain.csv"), &comments, &chain)?;
    formats::write_sift_csv(&args.out.join("sift_report.csv"), &comments, &report)?;
    let hist = empirical_histogram(&output, args.bin_ns);
    formats::write_count_csv(&args.out.join("histogram.csv"), &comments, &hist)?;
    fs::write(args.out.join("report.txt"), &text)?;
    println!();
    for name in [
        "budget.csv",
        "chain.csv",
        "sift_report.csv",
        "histogram.csv",
        "report.txt",
    ] {
        println!("wrote {}", args.out.join(name).display());
    }

    if args.enforce_security {
        let insecure_analytic = security_check(budget.total) == SecurityStatus::Insecure;
        let insecure_measured = report
            .measured_qber
            .is_some_and(|q| q >= etqkd_core::budget::SECURITY_QBER_LIMIT);
        if insecure_analytic || insecure_measured {
            eprintln!("security: qber at or above the 11 % limit");
            return Ok(EXIT_INSECURE);
        }
    }
    Ok(0)
}
