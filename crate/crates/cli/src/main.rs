use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dlambda_cli::config::{parse_config, Scenario};
use dlambda_cli::runner::{run, RunSummary};

#[derive(Parser)]
#[command(name = "dlambda", version, about = "Double-lambda quantum memory scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration; scenario defaults are used when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
    /// Seed for randomized checks; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// `dotted.key=value` patch applied on top of the configuration.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Store a probe state and release it at angle phi_e.
    StoreRelease(Common),
    /// Release a cat state into an entangled coherent state.
    CatEntangle(Common),
    /// Store and release a single photon.
    SinglePhoton(Common),
    /// Dark-state, commutator, degeneracy and mixing residuals.
    AlgebraCheck(Common),
    /// Release fidelity against ramp duration.
    AdiabaticScan(Common),
    /// Propagate a pulse through the medium under a control schedule.
    #[command(name = "propagate-1d")]
    Propagate1d(Common),
    /// Continuous-wave probe locking E2/E1 to tan(phi).
    PulseMatching(Common),
    /// Pulse width and transparency window under a change of theta.
    BandwidthScan(Common),
    /// Repeat a scenario over values of one configuration key.
    Sweep {
        scenario: Scenario,
        /// Dotted configuration key, for example `protocol.phi_e`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DLAMBDA_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<bool> {
    let (scenario, common) = match cmd {
        Command::StoreRelease(c) => (Scenario::StoreRelease, c),
        Command::CatEntangle(c) => (Scenario::CatEntangle, c),
        Command::SinglePhoton(c) => (Scenario::SinglePhoton, c),
        Command::AlgebraCheck(c) => (Scenario::AlgebraCheck, c),
        Command::AdiabaticScan(c) => (Scenario::AdiabaticScan, c),
        Command::Propagate1d(c) => (Scenario::Propagate1d, c),
        Command::PulseMatching(c) => (Scenario::PulseMatching, c),
        Command::BandwidthScan(c) => (Scenario::BandwidthScan, c),
        Command::Sweep { scenario, param, values, common } => return sweep(scenario, &param, &values, &common),
    };
    let summary = run_one(scenario, &common, &[], &common.out)?;
    print_summary(&summary);
    Ok(summary.pass)
}

fn run_one(scenario: Scenario, common: &Common, extra: &[String], out: &Path) -> Result<RunSummary> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("seed={seed}"));
    }
    overrides.extend_from_slice(extra);
    let cfg = parse_config(&text, Some(scenario), &overrides).map_err(|e| {
        for m in &e.0 {
            eprintln!("config: {m}");
        }
        anyhow::anyhow!("invalid configuration ({} problem(s))", e.0.len())
    })?;
    log::info!("running {} (config {})", cfg.scenario, cfg.hash());
    run(&cfg, out)
}

fn print_summary(s: &RunSummary) {
    println!("{} {}", s.scenario, if s.pass { "PASS" } else { "FAIL" });
    for m in &s.metrics {
        println!("  {:<28} {:>14.6e} {} {:<10.3e} {}", m.name, m.value, m.comparison, m.tolerance, if m.pass { "ok" } else { "FAIL" });
    }
}

fn sweep(scenario: Scenario, param: &str, values: &[String], common: &Common) -> Result<bool> {
    if param.trim().is_empty() || param.contains('=') {
        bail!("--param must be a dotted key, got '{param}'");
    }
    std::fs::create_dir_all(&common.out)?;
    let mut rows = Vec::new();
    let mut names: Option<Vec<String>> = None;
    let mut all = true;
    for (k, v) in values.iter().enumerate() {
        let dir = common.out.join(format!("point-{k:03}"));
        let s = run_one(scenario, common, &[format!("{param}={v}")], &dir).with_context(|| format!("{param} = {v}"))?;
        println!("{param} = {v}: {}", if s.pass { "PASS" } else { "FAIL" });
        all &= s.pass;
        let metric_names: Vec<String> = s.metrics.iter().map(|m| m.name.clone()).collect();
        if names.get_or_insert_with(|| metric_names.clone()) != &metric_names {
            bail!("metric set changed across the sweep at {param} = {v}");
        }
        let values: Vec<String> = s.metrics.iter().map(|m| format!("{:.12e}", m.value)).collect();
        rows.push(format!("{k},{v},{},{}", u8::from(s.pass), values.join(",")));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(common.out.join("sweep.csv"))?);
    let header: Vec<String> = names.unwrap_or_default();
    writeln!(f, "point,value,pass{}", header.iter().map(|n| format!(",{n}")).collect::<String>())?;
    for r in rows {
        writeln!(f, "{r}")?;
    }
    f.flush()?;
    Ok(all)
}
