//! Report files, metric streams and text tables.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::{ScenarioConfig, ScenarioId};
use super::metrics::{summarize_seed, SeedExtras, SlotRecord};
use super::{RunReport, SeedRun};
use crate::error::{Error, Result};

pub fn write_stream(path: &Path, records: &[SlotRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Io(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stream(path: &Path) -> Result<Vec<SlotRecord>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}

fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Writes `<label>.report.json` plus one JSONL stream per seed when `runs`
/// is given. Returns the paths written.
pub fn emit_report(report: &RunReport, runs: Option<&[SeedRun]>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let stem = format!("{}_n{}", file_stem(&report.label), report.vehicles);
    let mut written = Vec::new();
    let path = out_dir.join(format!("{stem}.report.json"));
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(&path, text)?;
    written.push(path);
    for run in runs.unwrap_or(&[]) {
        let path = out_dir.join(format!("{stem}_seed{}.jsonl", run.summary.seed));
        write_stream(&path, &run.records)?;
        written.push(path);
    }
    Ok(written)
}

pub fn load_report(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Backlog before the first record, recovered from its own balance.
fn implied_initial_backlog(first: &SlotRecord) -> f64 {
    let s = |v: &Vec<f64>| v.iter().sum::<f64>();
    s(&first.backlog_bytes) - s(&first.arrived_bytes) + s(&first.served_bytes) + s(&first.dropped_bytes)
}

/// Re-aggregates saved streams (one per seed) under `cfg`'s phases.
pub fn report_from_streams(cfg: &ScenarioConfig, streams: &[Vec<SlotRecord>]) -> Result<RunReport> {
    let mut per_seed = Vec::with_capacity(streams.len());
    for s in streams {
        let first = s.first().ok_or(Error::EmptyStream)?;
        per_seed.push(summarize_seed(s, &cfg.phases, cfg.violation_window, implied_initial_backlog(first))?);
    }
    let extras = vec![SeedExtras::default(); per_seed.len()];
    RunReport::build(cfg, per_seed, extras)
}

fn scalability_table(out: &mut String, reports: &[&RunReport]) {
    let ns: Vec<usize> = reports.iter().map(|r| r.vehicles).collect::<BTreeSet<_>>().into_iter().collect();
    let mut labels: Vec<String> = Vec::new();
    for r in reports {
        if !labels.contains(&r.label) {
            labels.push(r.label.clone());
        }
    }
    let blocks: [(&str, fn(&RunReport) -> f64); 3] = [
        ("Mean latency (ms)", |r| r.aggregate.mean_latency_ms),
        ("Energy per slot (J)", |r| r.aggregate.mean_energy_j),
        ("Deadline violations (%)", |r| r.aggregate.violation_rate_pct),
    ];
    let _ = writeln!(out, "Scalability");
    for (title, f) in blocks {
        let _ = write!(out, "{title:<26}");
        for n in &ns {
            let _ = write!(out, "{:>12}", format!("N={n}"));
        }
        let _ = writeln!(out);
        for l in &labels {
            let _ = write!(out, "  {l:<24}");
            for n in &ns {
                match reports.iter().find(|r| &r.label == l && r.vehicles == *n) {
                    Some(r) => {
                        let _ = write!(out, "{:>12.3}", f(r));
                    }
                    None => {
                        let _ = write!(out, "{:>12}", "-");
                    }
                }
            }
            let _ = writeln!(out);
        }
    }
}

fn dynamic_table(out: &mut String, reports: &[&RunReport]) {
    let _ = writeln!(out, "Dynamic environment");
    let _ = writeln!(
        out,
        "{:<26}{:>14}{:>14}{:>14}{:>14}",
        "Policy", "Latency (ms)", "Std (ms)", "Peak viol (%)", "Energy (J)"
    );
    for r in reports {
        let a = &r.aggregate;
        let _ = writeln!(
            out,
            "  {:<24}{:>14.3}{:>14.3}{:>14.2}{:>14.3}",
            r.label, a.mean_latency_ms, a.latency_std_ms, a.peak_violation_pct, a.mean_energy_j
        );
    }
}

fn phase_table(out: &mut String, reports: &[&RunReport]) {
    let _ = writeln!(out, "Goal adaptation");
    let _ = writeln!(
        out,
        "{:<26}{:>12}{:>12}{:>12}{:>12}{:>12}",
        "Policy", "P1 E (J)", "P1 L (ms)", "P2 E (J)", "P2 L (ms)", "dE (%)"
    );
    for r in reports {
        let ph = &r.aggregate.phases;
        if ph.len() < 2 {
            let _ = writeln!(out, "  {:<24}(no phases)", r.label);
            continue;
        }
        let de = if ph[0].mean_energy_j > 0.0 {
            100.0 * (ph[1].mean_energy_j - ph[0].mean_energy_j) / ph[0].mean_energy_j
        } else {
            0.0
        };
        let _ = writeln!(
            out,
            "  {:<24}{:>12.3}{:>12.3}{:>12.3}{:>12.3}{:>12.1}",
            r.label, ph[0].mean_energy_j, ph[0].mean_latency_ms, ph[1].mean_energy_j, ph[1].mean_latency_ms, de
        );
    }
}

fn generic_table(out: &mut String, reports: &[&RunReport]) {
    let _ = writeln!(out, "Custom runs");
    let _ = writeln!(
        out,
        "{:<26}{:>6}{:>14}{:>14}{:>14}",
        "Policy", "N", "Latency (ms)", "Energy (J)", "Viol (%)"
    );
    for r in reports {
        let a = &r.aggregate;
        let _ = writeln!(
            out,
            "  {:<24}{:>6}{:>14.3}{:>14.3}{:>14.2}",
            r.label, r.vehicles, a.mean_latency_ms, a.mean_energy_j, a.violation_rate_pct
        );
    }
}

/// Text tables laid out per scenario family.
pub fn render_tables(reports: &[RunReport]) -> String {
    let mut out = String::new();
    for id in [ScenarioId::Scalability, ScenarioId::Dynamic, ScenarioId::GoalAdaptation, ScenarioId::Custom] {
        let sel: Vec<&RunReport> = reports.iter().filter(|r| r.scenario == id).collect();
        if sel.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        match id {
            ScenarioId::Scalability => scalability_table(&mut out, &sel),
            ScenarioId::Dynamic => dynamic_table(&mut out, &sel),
            ScenarioId::GoalAdaptation => phase_table(&mut out, &sel),
            ScenarioId::Custom => generic_table(&mut out, &sel),
        }
    }
    out
}
