//! Config-driven experiment harness.
//!
//! An experiment draws one instance per replication, runs every configured
//! algorithm series on it with a shared environment seed, and writes raw
//! traces, checkpoint summaries and run metadata.

pub mod instance;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithm::{run_observed, AlgorithmConfig, AlgorithmKind, Budget};
use crate::bandit::{binomial, BanditInstance, Family};
use crate::error::{Error, Result};
use crate::gaps::gap_summary;
use crate::oracle::Decoder;
use crate::reward::{exhaustive_separability_margin, sampled_separability_margin, RewardKind, ENUMERATION_CAP};
use crate::rng::{Seed, Stream};
use crate::trace::RegretTrace;

pub use instance::{GeneratedInstance, InstanceSpec};
pub use output::{aggregate, checkpoints, write_report, SummaryRow, TotalsRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Non-separability counter along a GT+QTS run.
    Fig1,
    /// Linear rewards, regret curves.
    Fig2a,
    /// Network rewards, regret curves and timing.
    Fig2b,
    /// Regret against a fixed test budget.
    Fig2c,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig1 => "fig1",
            ExperimentKind::Fig2a => "fig2a",
            ExperimentKind::Fig2b => "fig2b",
            ExperimentKind::Fig2c => "fig2c",
        }
    }
}

/// One named algorithm configuration. Its `horizon` is overridden by the
/// experiment's.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub name: String,
    #[serde(default)]
    pub algorithm: AlgorithmConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Fixed test budgets; every GT+QTS series runs once per value.
    pub ell: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig1Config {
    /// Triples sampled per round at the posterior sample.
    pub samples_per_round: usize,
    /// Triples sampled at the true means when exact enumeration is too large.
    pub reference_samples: usize,
    pub max_triples: u64,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Self { samples_per_round: 200, reference_samples: 10_000, max_triples: 10_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub horizon: u64,
    /// Worker threads for the replication fan-out (default: rayon's choice).
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub instance: InstanceSpec,
    pub series: Vec<SeriesConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub fig1: Fig1Config,
}

fn default_replications() -> usize {
    10
}

/// Names accepted by [`ExperimentConfig::preset`].
pub const PRESETS: &[&str] =
    &["fig1-desk", "fig2a-desk", "fig2a-full", "fig2b-desk", "fig2b-full", "fig2c-desk", "fig2c-full"];

fn series(name: &str, kind: AlgorithmKind, delta_q: f64, decoder: Decoder) -> SeriesConfig {
    SeriesConfig { name: name.into(), algorithm: AlgorithmConfig { kind, delta_q, decoder, ..Default::default() } }
}

fn regret_series(delta_q: f64) -> Vec<SeriesConfig> {
    vec![
        series("cts", AlgorithmKind::CtsOraclePlus, delta_q, Decoder::Sum),
        series("gtqts", AlgorithmKind::Gtqts, delta_q, Decoder::Sum),
        series("gtqts-centered", AlgorithmKind::Gtqts, delta_q, Decoder::Centered),
    ]
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let linear = |m| InstanceSpec { m, k: 5, reward: RewardKind::Linear, gap_target: 0.25, ..Default::default() };
        let nn =
            |m| InstanceSpec { m, k: 5, reward: RewardKind::Nn, gap_target: 0.2, hidden: 20, ..Default::default() };
        let base = |experiment, horizon, instance, series| ExperimentConfig {
            experiment,
            seed: 2024,
            replications: 10,
            horizon,
            threads: None,
            output_dir: None,
            instance,
            series,
            sweep: None,
            fig1: Fig1Config::default(),
        };
        let gt_only = |delta_q| {
            vec![
                series("gtqts", AlgorithmKind::Gtqts, delta_q, Decoder::Sum),
                series("gtqts-centered", AlgorithmKind::Gtqts, delta_q, Decoder::Centered),
            ]
        };
        let sweep = |refs: &[usize]| Some(SweepConfig { ell: refs.to_vec() });
        let mut cfg = match name {
            "fig1-desk" => {
                let spec = InstanceSpec { m: 20, k: 3, gap_target: 0.05, ..linear(20) };
                base(ExperimentKind::Fig1, 2000, spec, gt_only(0.05))
            }
            "fig2a-desk" => base(ExperimentKind::Fig2a, 10_000, linear(500), regret_series(0.25)),
            "fig2a-full" => base(ExperimentKind::Fig2a, 10_000, linear(5000), regret_series(0.25)),
            "fig2b-desk" => base(ExperimentKind::Fig2b, 5000, nn(200), regret_series(0.2)),
            "fig2b-full" => base(ExperimentKind::Fig2b, 5000, nn(1000), regret_series(0.2)),
            // 244 = ceil(2.2 * 16 * ln 1000); 300 at m = 5000
            "fig2c-desk" => ExperimentConfig {
                sweep: sweep(&[100, 159, 200, 244]),
                ..base(ExperimentKind::Fig2c, 5000, linear(1000), gt_only(0.25))
            },
            "fig2c-full" => ExperimentConfig {
                sweep: sweep(&[100, 150, 200, 250, 300, 350]),
                ..base(ExperimentKind::Fig2c, 10_000, linear(5000), gt_only(0.25))
            },
            other => return Err(Error::Usage(format!("unknown preset {other:?}; known: {}", PRESETS.join(", ")))),
        };
        for s in &mut cfg.series {
            s.algorithm.horizon = cfg.horizon;
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config is always representable in TOML")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 || self.horizon == 0 {
            return Err(Error::config("replications and horizon must be at least 1"));
        }
        if self.series.is_empty() {
            return Err(Error::config("at least one series is required"));
        }
        let mut names: Vec<&str> = self.series.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("series names must be distinct"));
        }
        if names.iter().any(|n| n.is_empty() || n.contains(['/', '\\', ','])) {
            return Err(Error::config("series names must be nonempty and free of '/', '\\\\' and ','"));
        }
        self.instance.validate()?;
        for s in &self.series {
            AlgorithmConfig { horizon: self.horizon, ..s.algorithm.clone() }.validate()?;
            if s.algorithm.kind == AlgorithmKind::CtsExact
                && s.algorithm.family.count(self.instance.m, self.instance.k) > s.algorithm.enumeration_cap as u128
            {
                return Err(Error::config(format!("series {}: exact oracle infeasible at this size", s.name)));
            }
        }
        let gt_series = self.series.iter().filter(|s| s.algorithm.kind == AlgorithmKind::Gtqts).count();
        match self.experiment {
            ExperimentKind::Fig2a if self.instance.reward != RewardKind::Linear => {
                Err(Error::config("fig2a uses linear rewards"))
            }
            ExperimentKind::Fig2b if self.instance.reward != RewardKind::Nn => {
                Err(Error::config("fig2b uses nn rewards"))
            }
            ExperimentKind::Fig2c => match &self.sweep {
                Some(s) if !s.ell.is_empty() && s.ell.iter().all(|&l| l > 0) && gt_series > 0 => Ok(()),
                _ => Err(Error::config("fig2c needs a nonempty [sweep] of positive ell values and a gtqts series")),
            },
            ExperimentKind::Fig1 if gt_series == 0 || self.fig1.samples_per_round == 0 => {
                Err(Error::config("fig1 needs a gtqts series and samples_per_round >= 1"))
            }
            _ => Ok(()),
        }
    }

    /// Seeds of replication `rep`: the instance (means, weights, arm outcomes)
    /// and the algorithms' own randomness.
    pub fn replication_seeds(&self, rep: usize) -> (Seed, Seed) {
        let root = Seed(self.seed).child(rep as u64);
        (root.child(0), root.child(1))
    }

    /// The concrete runs: (series name, sweep budget, algorithm config).
    fn jobs(&self) -> Vec<(String, Option<usize>, AlgorithmConfig)> {
        let mut jobs = Vec::new();
        for s in &self.series {
            let cfg = AlgorithmConfig { horizon: self.horizon, ..s.algorithm.clone() };
            match (&self.sweep, self.experiment) {
                (Some(sweep), ExperimentKind::Fig2c) if cfg.kind == AlgorithmKind::Gtqts => {
                    for &ell in &sweep.ell {
                        let c = AlgorithmConfig { budget: Budget::Fixed { ell }, ..cfg.clone() };
                        jobs.push((format!("{}-l{ell}", s.name), Some(ell), c));
                    }
                }
                _ => jobs.push((s.name.clone(), None, cfg)),
            }
        }
        jobs
    }
}

/// Cumulative non-separability counts for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct NonSeparability {
    /// Minimum separability `C` at the true means.
    pub threshold: f64,
    pub delta_min: f64,
    /// Count after each round.
    pub counts: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct ReplicationMeta {
    pub index: usize,
    pub instance_seed: Seed,
    pub algorithm_seed: Seed,
    pub margin: f64,
    pub attempts: usize,
    pub instance: GeneratedInstance,
}

#[derive(Clone, Debug)]
pub struct SeriesResult {
    pub name: String,
    pub ell: Option<usize>,
    pub kind: AlgorithmKind,
    pub traces: Vec<RegretTrace>,
    pub walls: Vec<Duration>,
    pub nonsep: Vec<Option<NonSeparability>>,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub replications: Vec<ReplicationMeta>,
    pub series: Vec<SeriesResult>,
}

/// Runs every series on every replication.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let body = || -> Result<ExperimentReport> {
        let replications: Vec<ReplicationMeta> = (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let (instance_seed, algorithm_seed) = config.replication_seeds(rep);
                let g = config.instance.generate(instance_seed)?;
                Ok(ReplicationMeta {
                    index: rep,
                    instance_seed,
                    algorithm_seed,
                    margin: g.margin,
                    attempts: g.attempts,
                    instance: g,
                })
            })
            .collect::<Result<_>>()?;

        let jobs = config.jobs();
        let work: Vec<(usize, usize)> =
            (0..jobs.len()).flat_map(|j| (0..config.replications).map(move |r| (j, r))).collect();
        let outputs: Vec<(RegretTrace, Duration, Option<NonSeparability>)> = work
            .par_iter()
            .map(|&(j, r)| {
                let meta = &replications[r];
                let env = BanditInstance::new(meta.instance.mu.clone(), meta.instance_seed)?;
                let cfg = &jobs[j].2;
                let model = &meta.instance.model;
                if config.experiment == ExperimentKind::Fig1 && cfg.kind == AlgorithmKind::Gtqts {
                    let (threshold, delta_min) = fig1_reference(config, &meta.instance)?;
                    let mut rng = meta.algorithm_seed.stream(Stream::Diagnostics);
                    let mut counts = Vec::with_capacity(config.horizon as usize);
                    let mut n = 0u64;
                    let samples = config.fig1.samples_per_round;
                    let out = run_observed(&env, model, cfg, meta.algorithm_seed, &mut |_, theta| {
                        if sampled_separability_margin(model, theta, samples, &mut rng)? < threshold {
                            n += 1;
                        }
                        counts.push(n);
                        Ok(())
                    })?;
                    Ok((out.trace, out.wall, Some(NonSeparability { threshold, delta_min, counts })))
                } else {
                    let out = run_observed(&env, model, cfg, meta.algorithm_seed, &mut |_, _| Ok(()))?;
                    Ok((out.trace, out.wall, None))
                }
            })
            .collect::<Result<_>>()?;

        let mut outputs = outputs.into_iter();
        let series = jobs
            .into_iter()
            .map(|(name, ell, cfg)| {
                let mut s = SeriesResult { name, ell, kind: cfg.kind, traces: vec![], walls: vec![], nonsep: vec![] };
                for _ in 0..config.replications {
                    let (trace, wall, nonsep) = outputs.next().expect("one output per job and replication");
                    s.traces.push(trace);
                    s.walls.push(wall);
                    s.nonsep.push(nonsep);
                }
                s
            })
            .collect();
        Ok(ExperimentReport { config: config.clone(), config_hash: config.hash(), replications, series })
    };
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?
            .install(body),
        None => body(),
    }
}

/// `C` at the true means (exact when the triple count allows, else sampled)
/// and `Delta_min` (exact when enumerable, else the planted margin).
fn fig1_reference(config: &ExperimentConfig, g: &GeneratedInstance) -> Result<(f64, f64)> {
    let (m, k) = (config.instance.m, config.instance.k);
    let exact = exhaustive_separability_margin(&g.model, &g.mu, config.fig1.max_triples as u128);
    let threshold = match exact {
        Ok(Some(c)) => c,
        Ok(None) => return Err(Error::domain("every arm is optimal at the true means")),
        Err(Error::TooLarge { .. }) => {
            let mut rng = Seed(config.seed).stream(Stream::Diagnostics);
            sampled_separability_margin(&g.model, &g.mu, config.fig1.reference_samples, &mut rng)?
        }
        Err(e) => return Err(e),
    };
    let delta_min = if binomial(m, k) <= ENUMERATION_CAP {
        gap_summary(&g.model, &g.mu, Family::ExactlyK, ENUMERATION_CAP)?.delta_min
    } else {
        g.margin
    };
    Ok((threshold, delta_min))
}

fn run_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<ExperimentReport> {
    if config.experiment != kind {
        return Err(Error::config(format!("expected a {} config, got {}", kind.name(), config.experiment.name())));
    }
    run_experiment(config)
}

pub fn run_fig1(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_kind(config, ExperimentKind::Fig1)
}

pub fn run_fig2a(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_kind(config, ExperimentKind::Fig2a)
}

pub fn run_fig2b(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_kind(config, ExperimentKind::Fig2b)
}

pub fn run_fig2c(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_kind(config, ExperimentKind::Fig2c)
}

impl ExperimentReport {
    pub fn series(&self, name: &str) -> Option<&SeriesResult> {
        self.series.iter().find(|s| s.name == name)
    }
}

impl SeriesResult {
    pub fn mean_final_regret(&self) -> f64 {
        self.traces.iter().map(RegretTrace::cumulative_regret).sum::<f64>() / self.traces.len() as f64
    }

    pub fn mean_regret_at(&self, t: u64) -> f64 {
        self.traces.iter().map(|tr| tr.regret_at(t)).sum::<f64>() / self.traces.len() as f64
    }

    pub fn mean_wall(&self) -> Duration {
        self.walls.iter().sum::<Duration>() / self.walls.len() as u32
    }

    pub fn mean_evals_per_round(&self) -> f64 {
        let rounds: usize = self.traces.iter().map(RegretTrace::len).sum();
        self.traces.iter().map(RegretTrace::total_evals).sum::<u64>() as f64 / rounds as f64
    }
}
