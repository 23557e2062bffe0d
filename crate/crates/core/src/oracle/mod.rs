//! Super-arm selection oracles.
//!
//! All three oracles answer the same question, "which `K` arms maximize
//! `r(.; theta)`?", and report how many black-box reward queries they spent:
//!
//! * [`exact_oracle`] enumerates every permissible super-arm;
//! * [`oracle_plus`] scores each arm alone and keeps the top `K`, which is exact
//!   for separable rewards;
//! * [`gto::gto_select`] pools arms into random group tests and decodes grades.

pub mod budget;
pub mod gto;

use rand::Rng;

use crate::bandit::{Family, MeanVector, SuperArm};
use crate::error::{Error, Result};
use crate::reward::{MeanReward, RewardModel};

pub use budget::{hoeffding_budget_for_q, practical_test_count, sufficient_test_count};
pub use gto::{estimate_q, gto_on_matrix, gto_select, naive_gto_select, Decoder, GradeVector, Scoring, TestMatrix};

/// Absolute tolerance for treating two reward values as equal.
pub const REWARD_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub chosen: SuperArm,
    /// Black-box reward queries spent by this call.
    pub evals_used: u64,
    pub diagnostics: Option<GtoDiagnostics>,
}

/// Side information from a group-testing call.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GtoDiagnostics {
    pub q_hat: f64,
    pub ell: usize,
}

pub(crate) fn check_theta(model: &RewardModel, theta: &MeanVector) -> Result<()> {
    let m = theta.len();
    if model.k() == 0 || model.k() > m {
        return Err(Error::config(format!("cardinality K = {} must lie in 1..={m}", model.k())));
    }
    Ok(())
}

fn guard_enumeration(what: &'static str, m: usize, k: usize, family: Family, cap: u128) -> Result<u128> {
    let count = family.count(m, k);
    if count > cap {
        return Err(Error::TooLarge { what, count, cap });
    }
    Ok(count)
}

/// Every permissible maximizer of `r(.; theta)` within [`REWARD_TOL`]. Uncounted.
pub fn optimal_sets(
    function: &dyn MeanReward,
    theta: &MeanVector,
    k: usize,
    family: Family,
    cap: u128,
) -> Result<Vec<SuperArm>> {
    let m = theta.len();
    guard_enumeration("optimal-set enumeration", m, k, family, cap)?;
    let th = theta.as_slice();
    let mut scored = Vec::new();
    family.for_each(m, k, |s| scored.push((s.to_vec(), function.value(s, th))));
    let best = scored.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    Ok(scored.into_iter().filter(|(_, v)| best - v <= REWARD_TOL).map(|(s, _)| SuperArm::from_sorted(s)).collect())
}

/// Brute force over all permissible super-arms; ties broken uniformly with `tie_rng`.
pub fn exact_oracle<R: Rng + ?Sized>(
    model: &RewardModel,
    theta: &MeanVector,
    family: Family,
    cap: u128,
    tie_rng: &mut R,
) -> Result<OracleResult> {
    check_theta(model, theta)?;
    let m = theta.len();
    guard_enumeration("exact oracle infeasible", m, model.k(), family, cap)?;
    let before = model.evals();
    let mut best = f64::NEG_INFINITY;
    let mut ties: Vec<Vec<usize>> = Vec::new();
    family.for_each(m, model.k(), |s| {
        let v = model.evaluate(s, theta);
        if v > best + REWARD_TOL {
            best = v;
            ties.clear();
            ties.push(s.to_vec());
        } else if (v - best).abs() <= REWARD_TOL {
            if v > best {
                best = v;
            }
            ties.push(s.to_vec());
        }
    });
    let pick = if ties.len() == 1 { 0 } else { tie_rng.random_range(0..ties.len()) };
    Ok(OracleResult {
        chosen: SuperArm::from_sorted(ties.swap_remove(pick)),
        evals_used: model.evals() - before,
        diagnostics: None,
    })
}

/// Top `K` arms by single-arm reward, ties to the smaller index. Uncounted.
pub(crate) fn top_k_singletons(function: &dyn MeanReward, theta: &MeanVector, k: usize) -> Vec<usize> {
    let th = theta.as_slice();
    let values: Vec<f64> = (0..theta.len()).map(|i| function.value(&[i], th)).collect();
    top_k_by_value(&values, k)
}

fn top_k_by_value(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let by_value = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k, by_value);
        idx.truncate(k);
    }
    idx.sort_unstable();
    idx
}

/// `m` single-arm queries, then the `K` largest; exact under separability.
pub fn oracle_plus(model: &RewardModel, theta: &MeanVector) -> Result<OracleResult> {
    check_theta(model, theta)?;
    let before = model.evals();
    let values: Vec<f64> = (0..theta.len()).map(|i| model.evaluate(&[i], theta)).collect();
    Ok(OracleResult {
        chosen: SuperArm::from_sorted(top_k_by_value(&values, model.k())),
        evals_used: model.evals() - before,
        diagnostics: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn theta(v: &[f64]) -> MeanVector {
        MeanVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn exact_picks_best_pair() {
        let model = RewardModel::linear(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = exact_oracle(&model, &theta(&[0.9, 0.8, 0.1]), Family::ExactlyK, 1_000, &mut rng).unwrap();
        assert_eq!(r.chosen.arms(), &[0, 1]);
        assert_eq!(r.evals_used, 3);
        assert_eq!(model.evals(), 3);
    }

    #[test]
    fn exact_with_k_equal_m() {
        let model = RewardModel::linear(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = exact_oracle(&model, &theta(&[0.2, 0.8, 0.1]), Family::ExactlyK, 1_000, &mut rng).unwrap();
        assert_eq!(r.chosen.arms(), &[0, 1, 2]);
        assert_eq!(r.evals_used, 1);
    }

    #[test]
    fn exact_breaks_ties_randomly() {
        let model = RewardModel::linear(2);
        let th = theta(&[0.5; 6]);
        let picks: std::collections::HashSet<_> = (0..20)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                exact_oracle(&model, &th, Family::ExactlyK, 1_000, &mut rng).unwrap().chosen
            })
            .collect();
        assert!(picks.len() > 1);
    }

    #[test]
    fn exact_respects_cap() {
        let model = RewardModel::linear(5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let th = MeanVector::new(vec![0.5; 100]).unwrap();
        assert!(matches!(
            exact_oracle(&model, &th, Family::ExactlyK, 1_000_000, &mut rng),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn oracle_plus_top_k() {
        let model = RewardModel::linear(2);
        let r = oracle_plus(&model, &theta(&[0.9, 0.2, 0.5])).unwrap();
        assert_eq!(r.chosen.arms(), &[0, 2]);
        assert_eq!(r.evals_used, 3);
        let tie = oracle_plus(&model, &theta(&[0.4, 0.9, 0.9, 0.9])).unwrap();
        assert_eq!(tie.chosen.arms(), &[1, 2]);
    }

    #[test]
    fn at_most_k_family() {
        let model = RewardModel::linear(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = exact_oracle(&model, &theta(&[0.9, 0.0, 0.0]), Family::AtMostK, 1_000, &mut rng).unwrap();
        assert_eq!(r.evals_used, 6);
        // {0}, {0,1}, {0,2} all reach 0.9
        assert!(r.chosen.contains(0));
        let sets = optimal_sets(model.function(), &theta(&[0.9, 0.0, 0.0]), 2, Family::AtMostK, 100).unwrap();
        assert_eq!(sets.len(), 3);
    }
}
