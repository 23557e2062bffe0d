//! Sub-optimality gaps.

use crate::bandit::{Family, MeanVector, SuperArm};
use crate::error::{Error, Result};
use crate::oracle::{optimal_sets, top_k_singletons, REWARD_TOL};
use crate::reward::{MeanReward, RewardModel};

/// The best reward at some `theta`, with one super-arm attaining it.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimum {
    pub reward: f64,
    pub set: SuperArm,
    /// True when found by enumeration, false for the top-`K` singleton surrogate.
    pub exact: bool,
}

impl Optimum {
    /// Enumerates when the family has at most `cap` members; otherwise takes
    /// the `K` best singletons, which is exact for separable rewards. Uncounted.
    pub fn compute(model: &RewardModel, theta: &MeanVector, family: Family, cap: u128) -> Result<Self> {
        let k = model.k();
        if k == 0 || k > theta.len() {
            return Err(Error::config(format!("cardinality K = {k} must lie in 1..={}", theta.len())));
        }
        let f = model.function();
        if family.count(theta.len(), k) <= cap {
            let set = optimal_sets(f, theta, k, family, cap)?.swap_remove(0);
            let reward = f.value(set.arms(), theta.as_slice());
            Ok(Self { reward, set, exact: true })
        } else {
            let set = SuperArm::from_sorted(top_k_singletons(f, theta, k));
            let reward = f.value(set.arms(), theta.as_slice());
            Ok(Self { reward, set, exact: false })
        }
    }

    /// `Delta(S, theta)` against this optimum, clamped at zero.
    pub fn gap(&self, function: &dyn MeanReward, theta: &MeanVector, s: &SuperArm) -> f64 {
        clamp_gap(self.reward - function.value(s.arms(), theta.as_slice()))
    }
}

fn clamp_gap(d: f64) -> f64 {
    if d <= REWARD_TOL {
        0.0
    } else {
        d
    }
}

/// `r(S*; theta) - r(s; theta)`, with `S*` located as in [`Optimum::compute`]. Uncounted.
pub fn gap(model: &RewardModel, theta: &MeanVector, s: &SuperArm) -> Result<f64> {
    let opt = Optimum::compute(model, theta, Family::ExactlyK, crate::reward::ENUMERATION_CAP)?;
    Ok(opt.gap(model.function(), theta, s))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapSummary {
    pub delta_min: f64,
    pub delta_max: f64,
    pub optimal_sets: Vec<SuperArm>,
    /// Smallest positive gap among super-arms containing each arm.
    pub arm_min_gaps: Vec<Option<f64>>,
}

/// Exhaustive gap statistics over the permissible family.
pub fn gap_summary(model: &RewardModel, theta: &MeanVector, family: Family, cap: u128) -> Result<GapSummary> {
    let m = theta.len();
    let k = model.k();
    let count = family.count(m, k);
    if count > cap {
        return Err(Error::TooLarge { what: "instance too large for exhaustive gaps", count, cap });
    }
    let f = model.function();
    let th = theta.as_slice();
    let mut values = Vec::with_capacity(count as usize);
    family.for_each(m, k, |s| values.push((s.to_vec(), f.value(s, th))));
    let best = values.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);

    let mut optimal = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut arm_min = vec![None::<f64>; m];
    for (s, v) in values {
        let g = clamp_gap(best - v);
        if g == 0.0 {
            optimal.push(SuperArm::from_sorted(s));
            continue;
        }
        lo = lo.min(g);
        hi = hi.max(g);
        for &i in &s {
            arm_min[i] = Some(arm_min[i].map_or(g, |x: f64| x.min(g)));
        }
    }
    if lo.is_infinite() {
        return Err(Error::NoPositiveGap);
    }
    Ok(GapSummary { delta_min: lo, delta_max: hi, optimal_sets: optimal, arm_min_gaps: arm_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::ENUMERATION_CAP;

    fn theta(v: &[f64]) -> MeanVector {
        MeanVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn gaps_of_three_arms() {
        let model = RewardModel::linear(2);
        let th = theta(&[0.9, 0.8, 0.1]);
        let s = |v: Vec<usize>| SuperArm::new(v, 3).unwrap();
        assert!((gap(&model, &th, &s(vec![0, 2])).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(gap(&model, &th, &s(vec![0, 1])).unwrap(), 0.0);
        let g = gap_summary(&model, &th, Family::ExactlyK, ENUMERATION_CAP).unwrap();
        assert!((g.delta_min - 0.7).abs() < 1e-12);
        assert!((g.delta_max - 0.8).abs() < 1e-12);
        assert_eq!(g.optimal_sets, vec![s(vec![0, 1])]);
        assert_eq!(model.evals(), 0);
    }

    #[test]
    fn four_arm_delta_min() {
        let model = RewardModel::linear(2);
        let g = gap_summary(&model, &theta(&[0.6, 0.5, 0.4, 0.3]), Family::ExactlyK, ENUMERATION_CAP).unwrap();
        assert!((g.delta_min - 0.1).abs() < 1e-12);
        // {0,3} = 0.9 against 1.1
        assert!((g.arm_min_gaps[3].unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn identical_means_have_no_gap() {
        let model = RewardModel::linear(2);
        assert!(matches!(
            gap_summary(&model, &theta(&[0.5; 5]), Family::ExactlyK, ENUMERATION_CAP),
            Err(Error::NoPositiveGap)
        ));
        let big = MeanVector::new(vec![0.5; 200]).unwrap();
        assert!(matches!(
            gap_summary(&RewardModel::linear(5), &big, Family::ExactlyK, ENUMERATION_CAP),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn surrogate_optimum_for_large_m() {
        let model = RewardModel::linear(3);
        let th = MeanVector::new((0..300).map(|i| i as f64 / 300.0).collect()).unwrap();
        let opt = Optimum::compute(&model, &th, Family::ExactlyK, 1000).unwrap();
        assert!(!opt.exact);
        assert_eq!(opt.set.arms(), &[297, 298, 299]);
    }
}
