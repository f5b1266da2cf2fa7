use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ipolicy::config::{preset_names, ScenarioConfig};
use ipolicy::harness::{run_comparison, run_ipolicy, run_parking, Method, Overrides};
use ipolicy::{Error, Result};

/// Incremental sampling-based feedback motion planner.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario and write value dumps, logs and rollouts.
    Run(Common),
    /// Compare iPolicy against the multigrid baseline over the seed list.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values = ["ipolicy", "multigrid"])]
        methods: Vec<MethodArg>,
    },
    /// Plan until the first collision-free rollout reaches the goal.
    Park(Common),
    /// Validate a config and print it with every default filled in.
    Validate(Source),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Scenario config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled preset scenario.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Planner compute budget in seconds.
    #[arg(long)]
    time_budget: Option<f64>,
    /// Stop once the graph holds this many vertices.
    #[arg(long)]
    max_samples: Option<usize>,
    /// Write 0 in every wall-clock column so artifacts are reproducible.
    #[arg(long)]
    no_wall_clock: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Ipolicy,
    Multigrid,
}

impl Source {
    fn load(&self) -> Result<ScenarioConfig> {
        match (&self.config, &self.preset) {
            (Some(p), _) => ScenarioConfig::load(p),
            (None, Some(name)) => ScenarioConfig::preset(name),
            (None, None) => Err(Error::Config(format!(
                "give --config or --preset ({})",
                preset_names().collect::<Vec<_>>().join(", ")
            ))),
        }
    }
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = self.source.load()?;
        Overrides {
            seed: self.seed,
            time_budget_s: self.time_budget,
            max_samples: self.max_samples,
            no_wall_clock: self.no_wall_clock,
        }
        .apply(&mut cfg)?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let s = run_ipolicy(&c.load()?, &c.out)?;
            println!(
                "{} iterations, {} vertices, artifacts in {}",
                s.iterations,
                s.samples,
                c.out.display()
            );
            if let Some(p) = s.rmse.last() {
                println!("final rmse {:.4} ({} samples)", p.rmse(), p.samples);
            }
            for (i, (outcome, t)) in s.rollouts.iter().enumerate() {
                println!("rollout {i}: {outcome}, hit time {t:.3}");
            }
        }
        Command::Compare { common, methods } => {
            let methods: Vec<Method> = methods
                .iter()
                .map(|m| match m {
                    MethodArg::Ipolicy => Method::Ipolicy,
                    MethodArg::Multigrid => Method::Multigrid,
                })
                .collect();
            let results = run_comparison(&common.load()?, &common.out, &methods)?;
            let mut wins = 0;
            for r in &results {
                match r.common {
                    Some((t, a, b)) => {
                        println!("seed {}: at {t:.2} s ipolicy {a:.4}, multigrid {b:.4}", r.seed);
                        wins += usize::from(a <= b);
                    }
                    None => println!("seed {}: no common checkpoint", r.seed),
                }
            }
            if methods.len() == 2 {
                println!("ipolicy <= multigrid on {wins}/{} seeds", results.len());
            }
        }
        Command::Park(c) => {
            let s = run_parking(&c.load()?, &c.out)?;
            println!(
                "parked after {} samples ({} iterations), {:.2} s, hit time {:.2}",
                s.samples, s.iterations, s.wall_s, s.hit_time
            );
        }
        Command::Validate(src) => {
            let cfg = src.load()?.resolved()?;
            print!("{}", cfg.to_toml());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
