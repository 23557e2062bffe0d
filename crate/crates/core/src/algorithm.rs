//! The GT+QTS and CTS decision loops.

use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{BanditInstance, Family, MeanVector};
use crate::error::{Error, Result};
use crate::gaps::{GapSummary, Optimum};
use crate::oracle::{
    exact_oracle, gto_on_matrix, oracle_plus, practical_test_count, sufficient_test_count, Decoder, OracleResult,
    Scoring, TestMatrix,
};
use crate::posterior::PosteriorState;
use crate::quantizer::Quantizer;
use crate::reward::RewardModel;
use crate::rng::{Seed, Stream};
use crate::trace::{RegretTrace, RoundDiagnostics};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Gtqts,
    CtsOraclePlus,
    CtsExact,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Gtqts => "gtqts",
            AlgorithmKind::CtsOraclePlus => "cts_oracle_plus",
            AlgorithmKind::CtsExact => "cts_exact",
        }
    }
}

/// How many group tests the oracle runs per round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Budget {
    /// Sufficient count with confidence `1/t^2` at round `t`.
    Sufficient,
    /// `ceil(c / (q^2 delta^2) ln m)`.
    Practical {
        c: f64,
    },
    Fixed {
        ell: usize,
    },
}

/// Where the non-repetition probability `q` in the budget comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QMode {
    /// The constant `q_fixed`.
    #[default]
    Fixed,
    /// Last round's estimate; `q_floor` in round 1.
    PreviousRound,
    /// A pilot batch sized at `q = 1` estimates `q`, then a fresh batch is
    /// drawn at the implied budget if that is larger. Both batches count.
    PerRoundTwoPass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub kind: AlgorithmKind,
    pub horizon: u64,
    /// Quantization level `Delta`.
    pub delta_q: f64,
    /// Inclusion probability of each arm in each test.
    pub p: f64,
    pub budget: Budget,
    pub q_mode: QMode,
    pub q_fixed: f64,
    pub q_floor: f64,
    pub decoder: Decoder,
    /// Draw `Y ~ Bern(X)` before the posterior update.
    pub resample: bool,
    /// Reuse one test matrix across rounds while the budget is unchanged.
    pub freeze_matrix: bool,
    pub family: Family,
    pub max_tests: usize,
    pub enumeration_cap: u64,
    /// Write per-round wall time into the trace. Off by default so that
    /// traces are byte-identical across replays.
    pub record_timing: bool,
    /// Check each GT+QTS choice against the optimum for the sampled parameter
    /// (uncounted, untimed).
    pub oracle_match: bool,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            kind: AlgorithmKind::Gtqts,
            horizon: 1000,
            delta_q: 0.25,
            p: 0.5,
            budget: Budget::Practical { c: 2.2 },
            q_mode: QMode::Fixed,
            q_fixed: 1.0,
            q_floor: crate::oracle::budget::Q_FLOOR,
            decoder: Decoder::Sum,
            resample: true,
            freeze_matrix: false,
            family: Family::ExactlyK,
            max_tests: 10_000_000,
            enumeration_cap: 1_000_000,
            record_timing: false,
            oracle_match: false,
        }
    }
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::config(format!("p = {} outside (0, 1)", self.p)));
        }
        if !(self.q_fixed > 0.0 && self.q_fixed <= 1.0) || !(self.q_floor > 0.0 && self.q_floor <= 1.0) {
            return Err(Error::config("q_fixed and q_floor must lie in (0, 1]"));
        }
        if !(self.delta_q > 0.0) {
            return Err(Error::config("delta_q must be positive"));
        }
        match self.budget {
            Budget::Practical { c } if !(c > 0.0) => Err(Error::config("budget constant c must be positive")),
            Budget::Fixed { ell: 0 } => Err(Error::config("a fixed budget needs at least one test")),
            _ => Ok(()),
        }
    }

    /// Tests for round `t` given `q`.
    pub fn tests_for_round(&self, model: &RewardModel, m: usize, t: u64, q: f64) -> Result<usize> {
        let q = if q > 0.0 { q } else { self.q_floor };
        let ell = match self.budget {
            Budget::Sufficient => sufficient_test_count(
                model.reward_upper_bound(),
                model.lipschitz_bound(),
                self.delta_q,
                self.p,
                q,
                model.k(),
                m,
                confidence_at(t),
            )?,
            Budget::Practical { c } => practical_test_count(c, q, self.delta_q, m, self.q_floor)?,
            Budget::Fixed { ell } => ell,
        };
        if ell > self.max_tests {
            return Err(Error::TooLarge {
                what: "per-round test budget",
                count: ell as u128,
                cap: self.max_tests as u128,
            });
        }
        Ok(ell)
    }
}

/// Confidence schedule `delta(t) = 1/t^2`, with `t = 1` treated as `t = 2`.
pub fn confidence_at(t: u64) -> f64 {
    let t = t.max(2) as f64;
    1.0 / (t * t)
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: RegretTrace,
    /// Time spent in sampling, oracle calls, pulls and updates.
    pub wall: Duration,
    pub optimum: Optimum,
}

struct GtoState {
    quantizer: Quantizer,
    matrix_rng: ChaCha8Rng,
    frozen: Option<TestMatrix>,
    last_q: f64,
}

/// Runs the configured algorithm for `horizon` rounds on `instance`.
///
/// `model` is cloned and its counter reset, so concurrent runs may share one.
/// All algorithm randomness derives from `seed`; arm outcomes come from the
/// instance's own seed.
pub fn run(instance: &BanditInstance, model: &RewardModel, config: &AlgorithmConfig, seed: Seed) -> Result<RunOutput> {
    run_observed(instance, model, config, seed, &mut |_, _| Ok(()))
}

/// Observes the sampled parameter of every round.
pub type RoundObserver<'a> = dyn FnMut(u64, &MeanVector) -> Result<()> + 'a;

/// [`run`], calling `observer` with each round's sampled parameter outside
/// the timed region.
pub fn run_observed(
    instance: &BanditInstance,
    model: &RewardModel,
    config: &AlgorithmConfig,
    seed: Seed,
    observer: &mut RoundObserver<'_>,
) -> Result<RunOutput> {
    config.validate()?;
    let m = instance.arms();
    let k = model.k();
    if k == 0 || k >= m {
        return Err(Error::config(format!("need 0 < K < m, got K = {k}, m = {m}")));
    }
    let model = model.clone();
    model.reset_evals();
    let truth = model.function();
    let cap = config.enumeration_cap as u128;
    let optimum = Optimum::compute(&model, instance.means(), config.family, cap)?;

    let mut posterior = PosteriorState::init(m)?;
    let mut post_rng = seed.stream(Stream::Posterior);
    let mut feedback_rng = seed.stream(Stream::Feedback);
    let mut tie_rng = seed.stream(Stream::TieBreak);
    let mut gto = match config.kind {
        AlgorithmKind::Gtqts => Some(GtoState {
            quantizer: Quantizer::build(config.delta_q, model.lipschitz_bound(), model.reward_upper_bound())?,
            matrix_rng: seed.stream(Stream::TestMatrix),
            frozen: None,
            last_q: config.q_floor,
        }),
        _ => None,
    };

    let mut trace = RegretTrace::new();
    let mut wall = Duration::ZERO;
    for t in 1..=config.horizon {
        let start = Instant::now();
        let step = (|| -> Result<(OracleResult, MeanVector)> {
            let theta = posterior.sample(&mut post_rng);
            let result = match (&config.kind, gto.as_mut()) {
                (AlgorithmKind::Gtqts, Some(state)) => gto_round(&model, config, state, &theta, t, &mut tie_rng)?,
                (AlgorithmKind::CtsOraclePlus, _) => oracle_plus(&model, &theta)?,
                _ => exact_oracle(&model, &theta, config.family, cap, &mut tie_rng)?,
            };
            let feedback = instance.pull(t, &result.chosen)?;
            posterior.update(&feedback, &mut feedback_rng, config.resample)?;
            Ok((result, theta))
        })();
        let elapsed = start.elapsed();
        wall += elapsed;
        let (result, theta) = match step {
            Ok(x) => x,
            Err(e) => return Err(Error::Aborted { round: t, source: Box::new(e), partial: Box::new(trace) }),
        };

        let regret = optimum.gap(truth, instance.means(), &result.chosen);
        if let Err(e) = observer(t, &theta) {
            return Err(Error::Aborted { round: t, source: Box::new(e), partial: Box::new(trace) });
        }
        let diagnostics = match result.diagnostics {
            Some(d) => {
                let oracle_match = if config.oracle_match {
                    let best = Optimum::compute(&model, &theta, config.family, cap)?;
                    Some(best.gap(truth, &theta, &result.chosen) == 0.0)
                } else {
                    None
                };
                Some(RoundDiagnostics { q_hat: d.q_hat, ell: d.ell, oracle_match })
            }
            None => None,
        };
        let ns = if config.record_timing { elapsed.as_nanos() as u64 } else { 0 };
        trace.record_round_with(t, result.chosen, regret, result.evals_used, ns, diagnostics)?;
    }
    Ok(RunOutput { trace, wall, optimum })
}

fn gto_round(
    model: &RewardModel,
    config: &AlgorithmConfig,
    state: &mut GtoState,
    theta: &MeanVector,
    t: u64,
    tie_rng: &mut ChaCha8Rng,
) -> Result<OracleResult> {
    let m = theta.len();
    let quantizer = state.quantizer.clone();
    let scoring = Scoring::Quantized(&quantizer);
    let select = |ell: usize, state: &mut GtoState, tie_rng: &mut ChaCha8Rng| -> Result<OracleResult> {
        let mut matrix = match state.frozen.take() {
            Some(a) if config.freeze_matrix && a.rows() == ell => a,
            _ => TestMatrix::draw(ell, m, config.p, &mut state.matrix_rng)?,
        };
        let result = gto_on_matrix(model, scoring, config.decoder, theta, &mut matrix, tie_rng);
        if config.freeze_matrix {
            state.frozen = Some(matrix);
        }
        result
    };
    let result = match config.q_mode {
        QMode::Fixed => select(config.tests_for_round(model, m, t, config.q_fixed)?, state, tie_rng)?,
        QMode::PreviousRound => select(config.tests_for_round(model, m, t, state.last_q)?, state, tie_rng)?,
        QMode::PerRoundTwoPass => {
            let pilot_ell = config.tests_for_round(model, m, t, 1.0)?;
            let pilot = select(pilot_ell, state, tie_rng)?;
            let q = pilot.diagnostics.map_or(0.0, |d| d.q_hat);
            let ell = config.tests_for_round(model, m, t, q)?;
            if ell <= pilot_ell {
                pilot
            } else {
                let mut full = select(ell, state, tie_rng)?;
                full.evals_used += pilot.evals_used;
                full
            }
        }
    };
    if let Some(d) = result.diagnostics {
        state.last_q = if d.q_hat > 0.0 { d.q_hat } else { config.q_floor };
    }
    Ok(result)
}

/// GT+QTS loop; `config.kind` must be `Gtqts`.
pub fn run_gtqts(
    instance: &BanditInstance,
    model: &RewardModel,
    config: &AlgorithmConfig,
    seed: Seed,
) -> Result<RunOutput> {
    if config.kind != AlgorithmKind::Gtqts {
        return Err(Error::config(format!("run_gtqts called with {}", config.kind.name())));
    }
    run(instance, model, config, seed)
}

/// CTS with an exact oracle; `config.kind` picks Oracle+ or enumeration.
pub fn run_cts(
    instance: &BanditInstance,
    model: &RewardModel,
    config: &AlgorithmConfig,
    seed: Seed,
) -> Result<RunOutput> {
    if config.kind == AlgorithmKind::Gtqts {
        return Err(Error::config("run_cts called with gtqts"));
    }
    run(instance, model, config, seed)
}

/// Right-hand side of the GT+QTS regret bound at horizon `horizon`.
///
/// Each arm contributes `(2 ln K + 6) B^2 ln(2^m |I| T) / (g_i - Dmin/2 - (K^2+2) B eps)`,
/// where `g_i` is the smallest positive gap among super-arms containing it,
/// plus the `T`-independent term
/// `(13 alpha 8/eps^2 (4/eps^2 + 1)^K ln(K/eps^2) + pi^2/6 + m (K^2/eps^2 + 1)) Dmax`.
pub fn regret_bound(
    gaps: &GapSummary,
    k: usize,
    lipschitz: f64,
    family_size: u128,
    epsilon: f64,
    alpha: f64,
    horizon: u64,
) -> Result<f64> {
    let kf = k as f64;
    let limit = gaps.delta_min / (4.0 * lipschitz * (kf * kf + 2.0));
    if !(epsilon > 0.0 && epsilon < limit) {
        return Err(Error::domain(format!("epsilon = {epsilon} must lie in (0, {limit})")));
    }
    if k == 0 || horizon == 0 || family_size == 0 {
        return Err(Error::domain("need K >= 1, T >= 1 and a nonempty family"));
    }
    let m = gaps.arm_min_gaps.len() as f64;
    let log_term = m * std::f64::consts::LN_2 + (family_size as f64).ln() + (horizon as f64).ln();
    let slack = gaps.delta_min / 2.0 + (kf * kf + 2.0) * lipschitz * epsilon;
    let lead = (2.0 * kf.ln() + 6.0) * lipschitz * lipschitz * log_term;
    let first: f64 = gaps.arm_min_gaps.iter().flatten().map(|g| lead / (g - slack)).sum();
    let e2 = epsilon * epsilon;
    let constant = 13.0 * alpha * 8.0 / e2 * (4.0 / e2 + 1.0).powi(k as i32) * (kf / e2).ln()
        + std::f64::consts::PI.powi(2) / 6.0
        + m * (kf * kf / e2 + 1.0);
    Ok(first + constant * gaps.delta_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaps::gap_summary;

    fn instance(mu: &[f64], seed: u64) -> BanditInstance {
        BanditInstance::new(MeanVector::new(mu.to_vec()).unwrap(), Seed(seed)).unwrap()
    }

    #[test]
    fn single_round_traces() {
        let inst = instance(&[0.9, 0.1, 0.5, 0.2], 1);
        let model = RewardModel::linear(2);
        for kind in [AlgorithmKind::Gtqts, AlgorithmKind::CtsOraclePlus, AlgorithmKind::CtsExact] {
            let cfg = AlgorithmConfig { kind, horizon: 1, ..Default::default() };
            let out = run(&inst, &model, &cfg, Seed(3)).unwrap();
            assert_eq!(out.trace.len(), 1);
        }
        assert_eq!(model.evals(), 0);
    }

    #[test]
    fn evals_per_round() {
        let inst = instance(&[0.9, 0.1, 0.5, 0.2, 0.3, 0.7], 2);
        let model = RewardModel::linear(2);
        let mut cfg = AlgorithmConfig { horizon: 5, budget: Budget::Fixed { ell: 17 }, ..Default::default() };
        let evals = |cfg: &AlgorithmConfig| -> Vec<u64> {
            run(&inst, &model, cfg, Seed(1)).unwrap().trace.rows().iter().map(|r| r.evals).collect()
        };
        assert_eq!(evals(&cfg), vec![17; 5]);
        cfg.kind = AlgorithmKind::CtsOraclePlus;
        assert_eq!(evals(&cfg), vec![6; 5]);
        cfg.kind = AlgorithmKind::CtsExact;
        assert_eq!(evals(&cfg), vec![15; 5]);
    }

    #[test]
    fn replay_is_identical() {
        let inst = instance(&[0.9, 0.1, 0.5, 0.2, 0.3, 0.7, 0.4], 5);
        let model = RewardModel::linear(3);
        let cfg = AlgorithmConfig { horizon: 50, ..Default::default() };
        let a = run(&inst, &model, &cfg, Seed(9)).unwrap().trace.to_csv();
        let b = run(&inst, &model, &cfg, Seed(9)).unwrap().trace.to_csv();
        assert_eq!(a, b);
        let c = run(&inst, &model, &cfg, Seed(10)).unwrap().trace.to_csv();
        assert_ne!(a, c);
    }

    #[test]
    fn cts_variants_agree_on_separable_instance() {
        let inst = instance(&[0.9, 0.15, 0.55, 0.2, 0.35, 0.7, 0.45, 0.05], 4);
        let model = RewardModel::linear(3);
        let cfg = |kind| AlgorithmConfig { kind, horizon: 200, ..Default::default() };
        let plus = run(&inst, &model, &cfg(AlgorithmKind::CtsOraclePlus), Seed(2)).unwrap();
        let exact = run(&inst, &model, &cfg(AlgorithmKind::CtsExact), Seed(2)).unwrap();
        let arms = |o: &RunOutput| o.trace.rows().iter().map(|r| r.arm_set.clone()).collect::<Vec<_>>();
        assert_eq!(arms(&plus), arms(&exact));
    }

    #[test]
    fn wrong_kind_rejected() {
        let inst = instance(&[0.9, 0.1, 0.5], 1);
        let model = RewardModel::linear(1);
        let cfg = AlgorithmConfig::default();
        assert!(run_cts(&inst, &model, &cfg, Seed(0)).is_err());
        let cts = AlgorithmConfig { kind: AlgorithmKind::CtsExact, ..Default::default() };
        assert!(run_gtqts(&inst, &model, &cts, Seed(0)).is_err());
        let zero = AlgorithmConfig { horizon: 0, ..Default::default() };
        assert!(matches!(run(&inst, &model, &zero, Seed(0)), Err(Error::Config(_))));
    }

    #[test]
    fn oracle_failure_keeps_partial_trace() {
        let inst = instance(&[0.9, 0.1, 0.5, 0.3], 1);
        let model = RewardModel::linear(2);
        // q_hat collapses after round 1, and the floor pushes the budget over the cap
        let cfg = AlgorithmConfig {
            horizon: 10,
            budget: Budget::Practical { c: 1.0 },
            q_mode: QMode::PreviousRound,
            q_floor: 1.0,
            max_tests: 30,
            ..Default::default()
        };
        match run(&inst, &model, &cfg, Seed(0)) {
            Err(Error::Aborted { round, partial, .. }) => assert_eq!(partial.len() as u64, round - 1),
            other => panic!("expected an aborted run, got {other:?}"),
        }
    }

    #[test]
    fn confidence_schedule() {
        assert_eq!(confidence_at(1), 0.25);
        assert_eq!(confidence_at(10), 0.01);
    }

    #[test]
    fn regret_bound_shape() {
        let model = RewardModel::linear(2);
        let th = MeanVector::new(vec![0.9, 0.8, 0.3, 0.1]).unwrap();
        let g = gap_summary(&model, &th, Family::ExactlyK, 1000).unwrap();
        let limit = g.delta_min / (4.0 * 6.0);
        let at = |eps: f64, t: u64| regret_bound(&g, 2, 1.0, 6, eps, 1.0, t).unwrap();
        assert!(at(limit / 2.0, 1000) < at(limit / 2.0, 2000));
        // grows without bound as epsilon shrinks
        assert!(at(limit / 100.0, 1000) > 1e6 * at(limit / 2.0, 1000));
        assert!(regret_bound(&g, 2, 1.0, 6, limit, 1.0, 10).is_err());
        assert!(regret_bound(&g, 2, 1.0, 6, 0.0, 1.0, 10).is_err());
    }
}
