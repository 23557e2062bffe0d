use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gtbandit::experiment::output::{totals, write_report};
use gtbandit::experiment::{run_experiment, ExperimentConfig, PRESETS};
use gtbandit::gaps::{gap_summary, Optimum};
use gtbandit::oracle::budget::Q_FLOOR;
use gtbandit::oracle::{hoeffding_budget_for_q, practical_test_count, sufficient_test_count};
use gtbandit::reward::ENUMERATION_CAP;
use gtbandit::{verify, Error, Family, Result, Seed};
use serde_json::json;

#[derive(Parser)]
#[command(name = "gtbandit", version, about = "Group-testing Thompson sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write traces and summaries.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory (default: output_dir from the config, else results/<preset or experiment>)
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print a preset as TOML.
    Config {
        /// One of the preset names
        preset: String,
    },
    /// List preset names.
    Presets,
    /// Run the brute-force verification checks.
    Verify {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Compute test budgets.
    #[command(subcommand)]
    Budget(BudgetCommand),
    /// Gaps of the instance generated for one replication.
    Gaps {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0)]
        rep: usize,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Experiment config file (TOML)
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<(ExperimentConfig, String)> {
        match (&self.config, &self.preset) {
            (Some(path), _) => {
                let cfg = ExperimentConfig::load(path)?;
                let stem =
                    path.file_stem().map_or_else(|| cfg.experiment.name().to_string(), |s| s.to_string_lossy().into());
                Ok((cfg, stem))
            }
            (None, Some(name)) => Ok((ExperimentConfig::preset(name)?, name.clone())),
            (None, None) => Err(Error::Usage("give a config file or --preset".into())),
        }
    }
}

#[derive(Subcommand)]
enum BudgetCommand {
    /// Sufficient test count for one oracle call.
    Sufficient {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        /// Quantization level
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        /// Failure probability
        #[arg(long, default_value_t = 0.05)]
        confidence: f64,
        /// Reward upper bound M (default K)
        #[arg(long)]
        reward_bound: Option<f64>,
        /// Lipschitz constant B
        #[arg(long, default_value_t = 1.0)]
        lipschitz: f64,
    },
    /// `c / (q^2 delta^2) ln m`.
    Practical {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 2.2)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        q_hat: f64,
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
    },
    /// Tests needed to estimate q within epsilon.
    Hoeffding {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        confidence: f64,
    },
}

fn run_command(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { source, out, seed, replications, horizon, threads } => {
            let (mut cfg, label) = source.load()?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = replications {
                cfg.replications = r;
            }
            if let Some(h) = horizon {
                cfg.horizon = h;
            }
            if threads.is_some() {
                cfg.threads = threads;
            }
            let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("results").join(label));
            log::info!("running {} ({} replications, T = {})", cfg.experiment.name(), cfg.replications, cfg.horizon);
            let report = run_experiment(&cfg)?;
            write_report(&report, &dir)?;
            println!("{:<24} {:>10} {:>14} {:>10}", "series", "R(T)", "evals/round", "wall (s)");
            for s in &report.series {
                let t = totals(s);
                println!(
                    "{:<24} {:>10.2} {:>14.1} {:>10.3}",
                    t.series, t.mean_final_regret, t.mean_evals_per_round, t.mean_wall_s
                );
            }
            println!("wrote {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Config { preset } => {
            print!("{}", ExperimentConfig::preset(&preset)?.to_toml());
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets => {
            for p in PRESETS {
                println!("{p}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { seed } => {
            let outcomes = verify::quick_suite(Seed(seed));
            for c in &outcomes {
                println!(
                    "{:<30} {} {} ({:.2}s)",
                    c.name,
                    if c.passed { "PASS" } else { "FAIL" },
                    c.detail,
                    c.elapsed.as_secs_f64()
                );
            }
            Ok(if outcomes.iter().all(|c| c.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Budget(b) => {
            let ell = match b {
                BudgetCommand::Sufficient { m, k, delta, p, q, confidence, reward_bound, lipschitz } => {
                    sufficient_test_count(reward_bound.unwrap_or(k as f64), lipschitz, delta, p, q, k, m, confidence)?
                }
                BudgetCommand::Practical { m, c, q_hat, delta } => practical_test_count(c, q_hat, delta, m, Q_FLOOR)?,
                BudgetCommand::Hoeffding { epsilon, confidence } => hoeffding_budget_for_q(epsilon, confidence)?,
            };
            println!("{ell}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Gaps { source, rep } => {
            let (cfg, _) = source.load()?;
            let (instance_seed, _) = cfg.replication_seeds(rep);
            let g = cfg.instance.generate(instance_seed)?;
            let opt = Optimum::compute(&g.model, &g.mu, Family::ExactlyK, ENUMERATION_CAP)?;
            let mut out = json!({
                "replication": rep,
                "m": cfg.instance.m,
                "k": cfg.instance.k,
                "planted_margin": g.margin,
                "generation_attempts": g.attempts,
                "optimal_reward": opt.reward,
                "optimal_set": opt.set.arms(),
                "exact": opt.exact,
            });
            match gap_summary(&g.model, &g.mu, Family::ExactlyK, ENUMERATION_CAP) {
                Ok(s) => {
                    out["delta_min"] = json!(s.delta_min);
                    out["delta_max"] = json!(s.delta_max);
                }
                Err(Error::TooLarge { .. }) => {}
                Err(e) => return Err(e),
            }
            println!("{}", serde_json::to_string_pretty(&out).expect("json value serializes"));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::from(2)
        }
    }
}
