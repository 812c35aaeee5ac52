use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use vecorch::harness::{
    emit_report, load_report, policy_is_semantic, read_stream, render_tables, report_from_streams, run_scenario, RunReport, ScenarioConfig,
    ScenarioId,
};
use vecorch::sim::Population;
use vecorch::{PolicyKind, PredictorKind};
use vecorch_service::{Service, ServiceConfig};

#[derive(Parser)]
#[command(name = "vecorch", version, about = "Vehicular edge orchestration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a TOML config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
        /// Override the vehicle count (fixed population).
        #[arg(short = 'n', long)]
        vehicles: Option<usize>,
        #[arg(long)]
        policy: Option<PolicyKind>,
    },
    /// Run a preset scenario for every combination of vehicles and policy.
    Scenario {
        /// scalability | dynamic | goal-adaptation | custom
        preset: ScenarioId,
        /// Vehicle counts, comma separated.
        #[arg(short = 'n', long, value_delimiter = ',')]
        vehicles: Vec<usize>,
        /// sp | reactive | greedy | llm | all-local, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "sp")]
        policy: Vec<PolicyKind>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Rebuild reports from saved streams and print the tables.
    Report {
        /// Report files, stream files, or directories holding them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Config whose phases and window are used to re-aggregate streams
        /// that have no report next to them.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the rebuilt reports here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Start the control service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: SocketAddr,
        #[arg(long, default_value_t = 4)]
        max_concurrent: usize,
        #[arg(long, default_value_t = vecorch_service::DEFAULT_REPLAY_WINDOW)]
        replay_window: usize,
        /// Default pacing for live runs; 0 runs unthrottled.
        #[arg(long, default_value_t = 10.0)]
        slots_per_second: f64,
        /// Write each finished run's report and stream here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunOpts {
    /// cv | kalman | ar1 | ewma | oracle | reactive
    #[arg(long)]
    predictor: Option<PredictorKind>,
    /// `0..10`, `1..=5`, or a list such as `3,7,11`.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<Seeds>,
    /// Recorded slots per seed.
    #[arg(long)]
    slots: Option<u64>,
    /// Seeds run in parallel (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Write reports and per-seed streams here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the reports as JSON instead of tables.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed `{t}`: {e}"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(format!("`{s}` selects no seeds"));
    }
    Ok(Seeds(seeds))
}

impl RunOpts {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(p) = self.predictor {
            cfg.predictor = p;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.0.clone();
        }
        if let Some(t) = self.slots {
            cfg.total_slots = t;
            cfg.phases.retain(|ph| ph.to <= t);
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
    }
}

fn set_policy(cfg: &mut ScenarioConfig, policy: PolicyKind) {
    cfg.policy = policy;
    cfg.semantic = policy_is_semantic(policy);
}

fn execute(cfgs: Vec<ScenarioConfig>, opts: &RunOpts) -> Result<()> {
    let mut reports = Vec::new();
    for cfg in cfgs {
        cfg.validate()?;
        log::info!("{} {} N={} seeds={}", scenario_name(cfg.scenario), cfg.label(), cfg.num_vehicles_hint(), cfg.seeds.len());
        let (report, runs) = run_scenario(&cfg)?;
        if let Some(out) = &opts.out {
            let dir = out.join(scenario_name(cfg.scenario));
            for p in emit_report(&report, Some(&runs), &dir)? {
                eprintln!("wrote {}", p.display());
            }
        }
        reports.push(report);
    }
    if opts.json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    } else {
        print!("{}", render_tables(&reports));
    }
    Ok(())
}

fn scenario_name(id: ScenarioId) -> &'static str {
    match id {
        ScenarioId::Scalability => "scalability",
        ScenarioId::Dynamic => "dynamic",
        ScenarioId::GoalAdaptation => "goal-adaptation",
        ScenarioId::Custom => "custom",
    }
}

/// Files under `inputs`, directories walked recursively, in path order.
fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            entries.sort();
            files.extend(collect_inputs(&entries)?);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            bail!("{} does not exist", p.display());
        }
    }
    Ok(files)
}

/// `dir/stem_seed7.jsonl` -> `dir/stem`
fn stream_group(path: &Path) -> Option<PathBuf> {
    let name = path.file_name()?.to_str()?.strip_suffix(".jsonl")?;
    let stem = name.rsplit_once("_seed").map_or(name, |(s, _)| s);
    Some(path.with_file_name(stem))
}

fn rebuild_reports(inputs: &[PathBuf], config: Option<&Path>) -> Result<Vec<RunReport>> {
    let fallback = config.map(ScenarioConfig::load).transpose()?;
    let mut saved: BTreeMap<PathBuf, RunReport> = BTreeMap::new();
    let mut streams: BTreeMap<PathBuf, Vec<PathBuf>> = BTreeMap::new();
    for f in collect_inputs(inputs)? {
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(stem) = name.strip_suffix(".report.json") {
            saved.insert(f.with_file_name(stem), load_report(&f)?);
        } else if let Some(g) = stream_group(&f) {
            streams.entry(g).or_default().push(f);
        }
    }
    let mut reports = Vec::new();
    for (group, files) in &streams {
        let cfg = match (&fallback, saved.get(group)) {
            (Some(c), _) => c.clone(),
            (None, Some(r)) => r.config.clone(),
            (None, None) => bail!("no report or --config for streams {}*.jsonl", group.display()),
        };
        let data = files.iter().map(|f| read_stream(f)).collect::<vecorch::Result<Vec<_>>>()?;
        reports.push(report_from_streams(&cfg, &data).with_context(|| format!("streams {}*", group.display()))?);
    }
    reports.extend(saved.into_iter().filter(|(g, _)| !streams.contains_key(g)).map(|(_, r)| r));
    if reports.is_empty() {
        bail!("no reports or streams found");
    }
    Ok(reports)
}

fn serve(cfg: ServiceConfig, bind: SocketAddr) -> Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind).await.with_context(|| format!("binding {bind}"))?;
        println!("listening on {}", listener.local_addr()?);
        vecorch_service::serve(listener, Service::new(cfg)).await?;
        Ok(())
    })
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            opts,
            vehicles,
            policy,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(p) = policy {
                set_policy(&mut cfg, p);
            }
            if let Some(n) = vehicles {
                cfg.population = Population::Fixed(n);
            }
            opts.apply(&mut cfg);
            execute(vec![cfg], &opts)
        }
        Command::Scenario {
            preset,
            vehicles,
            policy,
            opts,
        } => {
            let ns: Vec<Option<usize>> = if vehicles.is_empty() { vec![None] } else { vehicles.into_iter().map(Some).collect() };
            let mut cfgs = Vec::new();
            for &p in &policy {
                for &n in &ns {
                    let mut cfg = ScenarioConfig::preset(preset, p, n);
                    opts.apply(&mut cfg);
                    cfgs.push(cfg);
                }
            }
            execute(cfgs, &opts)
        }
        Command::Report { inputs, config, out } => {
            let reports = rebuild_reports(&inputs, config.as_deref())?;
            if let Some(out) = &out {
                for r in &reports {
                    let dir = out.join(scenario_name(r.scenario));
                    for p in emit_report(r, None, &dir)? {
                        eprintln!("wrote {}", p.display());
                    }
                }
            }
            print!("{}", render_tables(&reports));
            Ok(())
        }
        Command::Serve {
            bind,
            max_concurrent,
            replay_window,
            slots_per_second,
            out,
        } => {
            if !(slots_per_second >= 0.0 && slots_per_second.is_finite()) {
                bail!("--slots-per-second must be a non-negative number");
            }
            let cfg = ServiceConfig {
                max_concurrent,
                replay_window,
                slots_per_second: (slots_per_second > 0.0).then_some(slots_per_second),
                out_dir: out,
            };
            serve(cfg, bind)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("0..3"), Ok(Seeds(vec![0, 1, 2])));
        assert_eq!(parse_seeds("2..=4"), Ok(Seeds(vec![2, 3, 4])));
        assert_eq!(parse_seeds("7, 1,9"), Ok(Seeds(vec![7, 1, 9])));
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn stream_groups() {
        let g = stream_group(Path::new("out/sp_n10_seed3.jsonl")).unwrap();
        assert_eq!(g, Path::new("out/sp_n10"));
        assert!(stream_group(Path::new("out/sp_n10.report.json")).is_none());
    }
}
