//! CSV readers/writers for event streams, histograms, budgets and sift
//! reports. All files start with `#`-prefixed provenance/metadata comment
//! lines; floats use shortest round-trip formatting so outputs are
//! byte-reproducible.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use etqkd_core::budget::{QberBudget, RateChain, SecurityStatus};
use etqkd_core::montecarlo::{EventRecord, Party, TruthRecord, TruthTag};
use etqkd_core::sifting::SiftReport;

pub const EVENT_HEADER: &str = "gate_id,party,time_ps,detector_id,basis,bit";
pub const TRUTH_HEADER: &str = "gate_id,party,time_ps,detector_id,basis,bit,truth_tag";

fn party_str(p: Party) -> &'static str {
    match p {
        Party::Alice => "alice",
        Party::Bob => "bob",
    }
}

fn tag_str(tag: TruthTag) -> &'static str {
    match tag {
        TruthTag::SignalCentral => "signal_central",
        TruthTag::SignalSide => "signal_side",
        TruthTag::Dark => "dark",
        TruthTag::Accidental => "accidental",
    }
}

fn write_comments(w: &mut impl Write, comments: &[String]) -> io::Result<()> {
    for line in comments {
        debug_assert!(line.starts_with('#'));
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn write_events(path: &Path, comments: &[String], records: &[EventRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {path:?}"))?);
    write_comments(&mut w, comments)?;
    writeln!(w, "{EVENT_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.gate_id,
            party_str(r.party),
            r.time_ps,
            r.detector_id,
            r.basis,
            r.bit
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_truth(path: &Path, comments: &[String], records: &[TruthRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {path:?}"))?);
    write_comments(&mut w, comments)?;
    writeln!(w, "{TRUTH_HEADER}")?;
    for t in records {
        let r = &t.event;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.gate_id,
            party_str(r.party),
            r.time_ps,
            r.detector_id,
            r.basis,
            r.bit,
            tag_str(t.tag)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Read an event stream; `key=value` pairs found in comment lines come back
/// as metadata (simulate records seed, duration and gate width there).
pub fn read_events(path: &Path) -> Result<(Vec<EventRecord>, BTreeMap<String, String>)> {
    let reader = BufReader::new(File::open(path).with_context(|| format!("open {path:?}"))?);
    let mut records = Vec::new();
    let mut meta = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            for token in comment.split(['|', ' ']) {
                if let Some((k, v)) = token.trim().split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
            continue;
        }
        if line == EVENT_HEADER || line == TRUTH_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 6 {
            bail!(
                "{path:?}:{line_no}: expected at least 6 fields, got {}",
                fields.len()
            );
        }
        let party = match fields[1] {
            "alice" => Party::Alice,
            "bob" => Party::Bob,
            other => bail!("{path:?}:{line_no}: unknown party `{other}`"),
        };
        records.push(EventRecord {
            gate_id: fields[0]
                .parse()
                .with_context(|| format!("{path:?}:{line_no}: bad gate_id"))?,
            party,
            time_ps: fields[2]
                .parse()
                .with_context(|| format!("{path:?}:{line_no}: bad time_ps"))?,
            detector_id: fields[3]
                .parse()
                .with_context(|| format!("{path:?}:{line_no}: bad detector_id"))?,
            basis: fields[4]
                .parse()
                .with_context(|| format!("{path:?}:{line_no}: bad basis"))?,
            bit: fields[5]
                .parse()
                .with_context(|| format!("{path:?}:{line_no}: bad bit"))?,
        });
    }
    Ok((records, meta))
}

/// Histogram CSV: `bin_center_ns,density` (theoretical) with f64 densities.
pub fn write_density_csv(path: &Path, comments: &[String], rows: &[(f64, f64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {path:?}"))?);
    write_comments(&mut w, comments)?;
    writeln!(w, "bin_center_ns,density")?;
    for (center, density) in rows {
        writeln!(w, "{center},{density}")?;
    }
    w.flush()?;
    Ok(())
}

/// Histogram CSV: `bin_center_ns,count` (empirical).
pub fn write_count_csv(path: &Path, comments: &[String], rows: &[(f64, u64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {path:?}"))?);
    write_comments(&mut w, comments)?;
    writeln!(w, "bin_center_ns,count")?;
    for (center, count) in rows {
        writeln!(w, "{center},{count}")?;
    }
    w.flush()?;
    Ok(())
}

/// Budget CSV, one row, mirroring the key-rate/QBER table column order.
pub fn write_budget_csv(
    path: &Path,
    comments: &[String],
    chain: &RateChain,
    budget: &QberBudget,
    status: SecurityStatus,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {path:?}"))?);
    write_comments(&mut w, comments)?;
    writeln!(
        w,
        "sifted_rate_hz,optical_qber,accidental_qber,detector_qber,dispersion_qber,total_qber,secure"
    )?;
    writeln!(
        w,
        "{},{},{},{},{},{},{}",
        chain.sifted_rate_hz,
        budget.optical,
        budget.accidental,
        budget.detector,
        budget.dispersion,
        budget.total,
        status == SecurityStatus::Secure
    )?;
    w.flush()?;
    Ok(())
}

/// Rate-chain CSV, one row, factor order as in the key-rate table.
pub fn write_chain_csv(path: &Path, comments: &[String], chain: &RateChain) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {path:?}"))?);
    write_comments(&mut w, comments)?;
    writeln!(
        w,
        "singles_rate_hz,mu,t_l_db,t_b_db,t_c_db,eta_d,eta_g,q_s,sifted_rate_hz"
    )?;
    let f = &chain.factors;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{}",
        f.singles_rate_hz,
        f.mu,
        f.t_l_db,
        f.t_b_db,
        f.t_c_db,
        f.eta_d,
        f.eta_g,
        f.q_s,
        chain.sifted_rate_hz
    )?;
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(
    path: &Path,
    comments: &[String],
    points: &[etqkd_core::budget::ComparisonPoint],
    crossover_km: Option<f64>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {path:?}"))?);
    write_comments(&mut w, comments)?;
    writeln!(w, "length_km,max_fwhm_et_nm,max_fwhm_pol_nm")?;
    for p in points {
        writeln!(
            w,
            "{},{},{}",
            p.length_km, p.max_fwhm_et_nm, p.max_fwhm_pol_nm
        )?;
    }
    match crossover_km {
        Some(km) => writeln!(w, "# crossover_km={km}")?,
        None => writeln!(w, "# crossover_km=none")?,
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string())
        .unwrap_or_else(|| "none".to_string())
}

pub fn write_sift_csv(path: &Path, comments: &[String], report: &SiftReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {path:?}"))?);
    write_comments(&mut w, comments)?;
    writeln!(
        w,
        "coincidence_count,sifted_count,disclosed_count,measured_q_s,measured_qber,window_acceptance,sifted_rate_hz,duplicate_bob_clicks"
    )?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{}",
        report.coincidence_count,
        report.sifted_count,
        report.disclosed_count,
        opt(report.measured_q_s),
        opt(report.measured_qber),
        opt(report.window_acceptance),
        report.sifted_rate_hz,
        report.duplicate_bob_clicks
    )?;
    w.flush()?;
    Ok(())
}

/// Aligned-text rendering of a sift report.
pub fn sift_report_text(report: &SiftReport) -> String {
    let fmt_opt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.6}"),
        None => "n/a".to_string(),
    };
    let mut s = String::new();
    s.push_str(&format!(
        "coincidences          {}\n",
        report.coincidence_count
    ));
    s.push_str(&format!("sifted bits           {}\n", report.sifted_count));
    s.push_str(&format!(
        "disclosed bits        {}\n",
        report.disclosed_count
    ));
    s.push_str(&format!(
        "measured q_s          {}\n",
        fmt_opt(report.measured_q_s)
    ));
    s.push_str(&format!(
        "measured qber         {}\n",
        fmt_opt(report.measured_qber)
    ));
    s.push_str(&format!(
        "window acceptance     {}\n",
        fmt_opt(report.window_acceptance)
    ));
    s.push_str(&format!(
        "sifted rate (hz)      {:.6}\n",
        report.sifted_rate_hz
    ));
    s.push_str(&format!(
        "duplicate bob clicks  {}\n",
        report.duplicate_bob_clicks
    ));
    s
}
