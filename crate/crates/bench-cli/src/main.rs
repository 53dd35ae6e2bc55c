use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use cobets_bench::experiment::{ArmResult, SweepPoint};
use cobets_bench::{report, ExperimentConfig};

const OUT_ENV: &str = "COBETS_OUT";

#[derive(Parser)]
#[command(
    name = "cobets",
    version,
    about = "Constrained options belief tree search experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured arm and write per-episode and summary CSVs.
    Run(Common),
    /// Sweep the per-decision query budget.
    Anytime(Common),
    /// Sweep the size of generated option catalogs.
    Branching(Common),
    /// Merge summary CSVs (or result directories) into one table.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory [default: $COBETS_OUT, then `experiment.out`, then ./results]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config entry, e.g. `--set planner.queries=100`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = ExperimentConfig::load(self.config.as_deref(), &self.overrides)?;
        let e = &mut cfg.experiment;
        if let Some(s) = self.seed {
            e.seed = s;
        }
        if let Some(n) = self.episodes {
            e.episodes = n;
        }
        if let Some(w) = self.workers {
            e.workers = w;
        }
        let out = self
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .or_else(|| e.out.clone())
            .unwrap_or_else(|| PathBuf::from("results"));
        e.out = Some(out.clone());
        cfg.validate()?;
        Ok((cfg, out))
    }
}

fn print_arms(results: &[ArmResult]) {
    for r in results {
        print_summary("", r);
    }
}

fn print_points(points: &[SweepPoint]) {
    for p in points {
        print_summary(&format!("[{}] ", p.key.join(" ")), &p.result);
    }
}

fn print_summary(prefix: &str, r: &ArmResult) {
    let s = &r.summary;
    let costs: Vec<String> = s
        .mean_cost
        .iter()
        .zip(&s.se_cost)
        .map(|(m, e)| format!("{m:.3} ± {e:.3}"))
        .collect();
    println!(
        "{prefix}{}: V_R {:.2} ± {:.2}  V_C {}  violations {:.1}%  ({} episodes)",
        s.arm,
        s.mean_reward,
        s.se_reward,
        costs.join(", "),
        100.0 * s.violation_rate,
        s.episodes
    );
}

fn done(out: &Path) {
    eprintln!("results written to {}", out.display());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let (cfg, out) = c.resolve()?;
            print_arms(&cobets_bench::run_experiment(&cfg, &out)?);
            done(&out);
        }
        Command::Anytime(c) => {
            let (cfg, out) = c.resolve()?;
            print_points(&cobets_bench::run_anytime(&cfg, &out)?);
            done(&out);
        }
        Command::Branching(c) => {
            let (cfg, out) = c.resolve()?;
            print_points(&cobets_bench::run_branching(&cfg, &out)?);
            done(&out);
        }
        Command::Report { inputs, out } => {
            let rep = report::collect(&inputs)?;
            print!("{}", rep.to_table());
            let out = out.unwrap_or_else(|| PathBuf::from("results"));
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            rep.write_csv(&out.join("report.csv"))?;
            done(&out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
