//! Brute-force checks of the oracle, quantizer and posterior at small scale.

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use crate::bandit::{Family, Feedback, MeanVector, SuperArm};
use crate::error::{Error, Result};
use crate::gaps::gap_summary;
use crate::oracle::{
    exact_oracle, gto_on_matrix, optimal_sets, oracle_plus, sufficient_test_count, Decoder, Scoring, TestMatrix,
    REWARD_TOL,
};
use crate::posterior::PosteriorState;
use crate::quantizer::Quantizer;
use crate::reward::{check_separability, NnWeights, RewardModel, Separability, ENUMERATION_CAP};
use crate::rng::{Seed, Stream};

/// Every size-`K` maximizer of `r(.; theta)`.
pub fn brute_force_optimal_sets(model: &RewardModel, theta: &MeanVector, cap: u128) -> Result<Vec<SuperArm>> {
    optimal_sets(model.function(), theta, model.k(), Family::ExactlyK, cap)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Containment {
    Holds,
    /// A quantized maximizer that is not a true maximizer.
    Counterexample(SuperArm),
}

/// Checks `T_Q(mu) ⊆ T(mu)` by enumeration, where `T_Q` maximizes the
/// quantized reward.
pub fn check_quantized_containment(
    model: &RewardModel,
    quantizer: &Quantizer,
    mu: &MeanVector,
    cap: u128,
) -> Result<Containment> {
    let (m, k) = (mu.len(), model.k());
    let count = Family::ExactlyK.count(m, k);
    if count > cap {
        return Err(Error::TooLarge { what: "quantized containment check", count, cap });
    }
    let f = model.function();
    let th = mu.as_slice();
    let mut scored = Vec::with_capacity(count as usize);
    let mut failure = None;
    Family::ExactlyK.for_each(m, k, |s| {
        if failure.is_none() {
            match quantizer.level_index(f.value(s, th)) {
                Ok(level) => scored.push((s.to_vec(), level)),
                Err(e) => failure = Some(e),
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let top = scored.iter().map(|(_, l)| *l).max().expect("at least one subset");
    let truth = optimal_sets(f, mu, k, Family::ExactlyK, cap)?;
    Ok(scored
        .into_iter()
        .filter(|(_, l)| *l == top)
        .map(|(s, _)| SuperArm::from_sorted(s))
        .find(|s| !truth.contains(s))
        .map_or(Containment::Holds, Containment::Counterexample))
}

/// Number of random positive-weight networks (with uniform `theta`) that pass
/// the exhaustive separability check.
pub fn check_ann_separability<R: Rng + ?Sized>(
    instances: usize,
    m: usize,
    k: usize,
    hidden: usize,
    rng: &mut R,
) -> Result<(usize, Vec<Separability>)> {
    if m > 10 {
        return Err(Error::domain(format!("exhaustive network check is limited to m <= 10, got {m}")));
    }
    let mut passed = 0;
    let mut violations = Vec::new();
    for _ in 0..instances {
        let model = RewardModel::nn(NnWeights::random(hidden, m, 1.0, rng), k);
        let theta = MeanVector::new((0..m).map(|_| rng.random::<f64>()).collect())?;
        match check_separability(&model, &theta, m)? {
            Separability::Separable => passed += 1,
            v => violations.push(v),
        }
    }
    Ok((passed, violations))
}

/// Fraction of `trials` independent oracle calls whose choice is a true
/// maximizer at `theta`.
#[allow(clippy::too_many_arguments)]
pub fn gto_success_rate(
    model: &RewardModel,
    quantizer: &Quantizer,
    decoder: Decoder,
    theta: &MeanVector,
    p: f64,
    ell: usize,
    trials: usize,
    seed: Seed,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    let optimal = brute_force_optimal_sets(model, theta, ENUMERATION_CAP)?;
    let hits = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<usize> {
            let s = seed.child(i as u64);
            let mut matrix = TestMatrix::draw(ell, theta.len(), p, &mut s.stream(Stream::TestMatrix))?;
            let mut tie = s.stream(Stream::TieBreak);
            let r = gto_on_matrix(model, Scoring::Quantized(quantizer), decoder, theta, &mut matrix, &mut tie)?;
            Ok(usize::from(optimal.contains(&r.chosen)))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(hits as f64 / trials as f64)
}

/// One named check with its verdict.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl CheckOutcome {
    fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Self {
        let start = Instant::now();
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        Self { name, passed, detail, elapsed: start.elapsed() }
    }
}

fn uniform_theta<R: Rng + ?Sized>(m: usize, rng: &mut R) -> MeanVector {
    MeanVector::new((0..m).map(|_| rng.random::<f64>()).collect()).expect("uniform draws lie in [0, 1]")
}

/// Oracle+ reaches the exact oracle's reward on random separable instances
/// (`m <= 12`, `K <= 3`, alternating linear and network rewards).
pub fn check_oracle_equivalence(instances: usize, seed: Seed) -> CheckOutcome {
    CheckOutcome::timed("oracle equivalence", || {
        let mut rng = seed.stream(Stream::Instance);
        let mut tie = seed.stream(Stream::TieBreak);
        let (mut agree, mut tested) = (0, 0);
        while tested < instances {
            let m = rng.random_range(4..=12);
            let k = rng.random_range(1..=3);
            let model = if tested % 2 == 0 {
                RewardModel::linear(k)
            } else {
                RewardModel::nn(NnWeights::random(rng.random_range(1..=8), m, 1.0, &mut rng), k)
            };
            let theta = uniform_theta(m, &mut rng);
            if !check_separability(&model, &theta, 12)?.is_separable() {
                continue;
            }
            tested += 1;
            let f = model.function();
            let exact = exact_oracle(&model, &theta, Family::ExactlyK, ENUMERATION_CAP, &mut tie)?;
            let plus = oracle_plus(&model, &theta)?;
            let (a, b) =
                (f.value(exact.chosen.arms(), theta.as_slice()), f.value(plus.chosen.arms(), theta.as_slice()));
            if (a - b).abs() <= REWARD_TOL {
                agree += 1;
            }
        }
        Ok((agree == instances, format!("{agree}/{instances} instances agree")))
    })
}

/// Success rate of the oracle at the sufficient budget (`m = 100`, `K = 3`,
/// linear, top-`K` margin `>= 0.3`, `Delta = 0.5`, `p = 1/2`, `q = 1`,
/// `delta = 0.05`) against `0.95 - slack`.
pub fn check_gto_guarantee(trials: usize, slack: f64, seed: Seed) -> CheckOutcome {
    CheckOutcome::timed("group-testing guarantee", || {
        let spec = crate::experiment::InstanceSpec { m: 100, k: 3, gap_target: 0.3, ..Default::default() };
        let g = spec.generate(seed)?;
        let (b, upper) = (g.model.lipschitz_bound(), g.model.reward_upper_bound());
        let delta_q = 0.5;
        let ell = sufficient_test_count(upper, b, delta_q, 0.5, 1.0, 3, 100, 0.05)?;
        let q = Quantizer::build(delta_q, b, upper)?;
        let rate = gto_success_rate(&g.model, &q, Decoder::Sum, &g.mu, 0.5, ell, trials, seed.child(1))?;
        Ok((rate >= 0.95 - slack, format!("success {rate:.4} over {trials} trials at l = {ell}")))
    })
}

/// Quantizer error bound, monotonicity and idempotence on a dense grid of
/// `[Delta/4B, M]` for a few grids.
pub fn check_quantizer_grid(points: usize) -> CheckOutcome {
    CheckOutcome::timed("quantizer bound", || {
        let grids = [(0.5, 1.0, 1.0), (0.6, 1.0, 1.0), (0.25, 1.0, 5.0), (0.2, 3.7, 16.3)];
        let mut worst = 0.0f64;
        for (delta, b, upper) in grids {
            let q = Quantizer::build(delta, b, upper)?;
            let lo = delta / (4.0 * b);
            let mut prev = f64::NEG_INFINITY;
            for i in 0..points {
                let v = lo + (upper - lo) * i as f64 / (points - 1) as f64;
                let x = q.quantize(v)?;
                let err = (x - v).abs() - lo;
                worst = worst.max(err);
                if err > 1e-12 || x < prev || q.quantize(x)? != x {
                    return Ok((false, format!("grid ({delta}, {b}, {upper}) fails at {v}")));
                }
                prev = x;
            }
        }
        Ok((true, format!("{} grids x {points} points, max excess error {worst:.2e}", grids.len())))
    })
}

/// `T_Q(mu) ⊆ T(mu)` on random small instances with `Delta < 2B Delta_min`.
pub fn check_quantized_optima(instances: usize, seed: Seed) -> CheckOutcome {
    CheckOutcome::timed("quantized optima are optimal", || {
        let mut rng = seed.stream(Stream::Instance);
        let mut holds = 0;
        let mut first = None;
        for i in 0..instances {
            let m = rng.random_range(4..=10);
            let k = rng.random_range(1..=3);
            let model = if i % 2 == 0 {
                RewardModel::linear(k)
            } else {
                RewardModel::nn(NnWeights::random(rng.random_range(1..=8), m, 1.0, &mut rng), k)
            };
            let mu = uniform_theta(m, &mut rng);
            let gaps = gap_summary(&model, &mu, Family::ExactlyK, ENUMERATION_CAP)?;
            let b = model.lipschitz_bound();
            let delta = 2.0 * b * gaps.delta_min * rng.random_range(0.05..0.999);
            let q = Quantizer::build(delta, b, model.reward_upper_bound())?;
            match check_quantized_containment(&model, &q, &mu, ENUMERATION_CAP)? {
                Containment::Holds => holds += 1,
                Containment::Counterexample(s) => {
                    first.get_or_insert(format!("instance {i}: {s} (m={m}, K={k}, Delta={delta:.4})"));
                }
            }
        }
        let mut detail = format!("{holds}/{instances} instances");
        if let Some(f) = first {
            detail.push_str(&format!("; first counterexample {f}"));
        }
        Ok((holds == instances, detail))
    })
}

/// Exhaustive separability of random positive-weight networks.
pub fn check_ann(instances: usize, m: usize, k: usize, hidden: usize, seed: Seed) -> CheckOutcome {
    CheckOutcome::timed("network separability", || {
        let mut rng = seed.stream(Stream::Instance);
        let (passed, violations) = check_ann_separability(instances, m, k, hidden, &mut rng)?;
        let mut detail = format!("{passed}/{instances} separable");
        if let Some(Separability::Violation { optimal, suboptimal, base, difference }) = violations.first() {
            detail.push_str(&format!("; e.g. s={optimal}, s~={suboptimal}, S={base:?}, diff={difference:.3e}"));
        }
        Ok((passed == instances, detail))
    })
}

/// Beta moments at `draws` samples for (1,1), (2,5), (5,2), and the
/// closed-form counts after a run of updates.
pub fn check_posterior(draws: usize, seed: Seed) -> CheckOutcome {
    CheckOutcome::timed("posterior", || {
        let mut rng = seed.stream(Stream::Posterior);
        let mut worst = (0.0f64, 0.0f64);
        for (a, b) in [(1.0, 1.0), (2.0, 5.0), (5.0, 2.0)] {
            let state = PosteriorState::from_params(vec![a], vec![b])?;
            let xs: Vec<f64> = (0..draws).map(|_| state.sample(&mut rng)[0]).collect();
            let n = draws as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let (m0, v0) = (a / (a + b), a * b / ((a + b).powi(2) * (a + b + 1.0)));
            worst = (worst.0.max((mean - m0).abs()), worst.1.max((var - v0).abs() / v0));
        }
        let mut state = PosteriorState::init(3)?;
        let mut counts = [(0u32, 0u32); 3];
        for t in 0..1000u32 {
            let arm = (t % 3) as usize;
            let x = rng.random::<f64>() < 0.3;
            state.update(&Feedback::new(vec![(arm, x)]), &mut rng, true)?;
            counts[arm].0 += u32::from(x);
            counts[arm].1 += 1;
        }
        let updates_ok = counts
            .iter()
            .enumerate()
            .all(|(i, &(k, n))| state.a()[i] == 1.0 + k as f64 && state.b()[i] == 1.0 + (n - k) as f64);
        let passed = worst.0 <= 0.01 && worst.1 <= 0.2 && updates_ok;
        Ok((
            passed,
            format!(
                "max mean error {:.4}, max relative variance error {:.3}, updates {}",
                worst.0,
                worst.1,
                if updates_ok { "exact" } else { "wrong" }
            ),
        ))
    })
}

/// The quick suite run by the command-line `verify`.
pub fn quick_suite(seed: Seed) -> Vec<CheckOutcome> {
    vec![
        check_oracle_equivalence(100, seed),
        check_gto_guarantee(100, 0.05, seed),
        check_quantizer_grid(10_000),
        check_quantized_optima(200, seed),
        check_ann(100, 8, 2, 20, seed),
        check_posterior(100_000, seed),
    ]
}
