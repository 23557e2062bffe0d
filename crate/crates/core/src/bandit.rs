//! The Bernoulli environment, super-arms, and semi-bandit feedback.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{CounterStream, Seed, Stream};

/// A parameter vector in `[0, 1]^m`: true means or a posterior sample.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanVector(Vec<f64>);

impl MeanVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("theta[{i}] = {v} lies outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for MeanVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A set of base arms, kept sorted and duplicate-free.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SuperArm(Vec<usize>);

impl SuperArm {
    /// Sorts and deduplicates `arms`, rejecting indices `>= m`.
    pub fn new(mut arms: Vec<usize>, m: usize) -> Result<Self> {
        arms.sort_unstable();
        arms.dedup();
        if let Some(&index) = arms.iter().find(|&&i| i >= m) {
            return Err(Error::ArmOutOfRange { index, arms: m });
        }
        Ok(Self(arms))
    }

    /// Caller guarantees the indices are strictly increasing.
    pub(crate) fn from_sorted(arms: Vec<usize>) -> Self {
        debug_assert!(arms.windows(2).all(|w| w[0] < w[1]));
        Self(arms)
    }

    pub fn arms(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, arm: usize) -> bool {
        self.0.binary_search(&arm).is_ok()
    }
}

impl fmt::Display for SuperArm {
    /// `;`-joined index list, as written to trace CSVs.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, i) in self.0.iter().enumerate() {
            if n > 0 {
                f.write_str(";")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

/// Binary outcomes observed for each member of a pulled super-arm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Feedback {
    observations: Vec<(usize, bool)>,
}

impl Feedback {
    pub fn new(observations: Vec<(usize, bool)>) -> Self {
        let mut observations = observations;
        observations.sort_unstable_by_key(|&(arm, _)| arm);
        Self { observations }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.observations.iter().copied()
    }

    pub fn get(&self, arm: usize) -> Option<bool> {
        self.observations.binary_search_by_key(&arm, |&(a, _)| a).ok().map(|k| self.observations[k].1)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// `m` independent Bernoulli arms with hidden means.
#[derive(Clone, Debug)]
pub struct BanditInstance {
    mu: MeanVector,
    seed: Seed,
    outcomes: CounterStream,
}

impl BanditInstance {
    pub fn new(mu: MeanVector, seed: Seed) -> Result<Self> {
        if mu.len() < 2 {
            return Err(Error::domain(format!("a bandit needs at least 2 arms, got {}", mu.len())));
        }
        let outcomes = CounterStream::new(seed, Stream::Environment, mu.len());
        Ok(Self { mu, seed, outcomes })
    }

    pub fn arms(&self) -> usize {
        self.mu.len()
    }

    pub fn means(&self) -> &MeanVector {
        &self.mu
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    /// Pulls `s` at round `round`. Outcome of arm `i` at a given round is fixed
    /// by the instance seed, so replaying a round reproduces its feedback.
    pub fn pull(&self, round: u64, s: &SuperArm) -> Result<Feedback> {
        if s.is_empty() {
            return Err(Error::Usage("cannot pull an empty super-arm".into()));
        }
        let m = self.arms();
        let mut obs = Vec::with_capacity(s.len());
        for &i in s.arms() {
            if i >= m {
                return Err(Error::ArmOutOfRange { index: i, arms: m });
            }
            obs.push((i, self.outcomes.uniform(round, i) < self.mu[i]));
        }
        Ok(Feedback { observations: obs })
    }
}

/// Which super-arms are permissible under the cardinality constraint `K`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[default]
    ExactlyK,
    AtMostK,
}

impl Family {
    /// Number of permissible super-arms, saturating.
    pub fn count(self, m: usize, k: usize) -> u128 {
        match self {
            Family::ExactlyK => binomial(m, k),
            Family::AtMostK => (1..=k).fold(0u128, |acc, j| acc.saturating_add(binomial(m, j))),
        }
    }

    pub(crate) fn sizes(self, k: usize) -> std::ops::RangeInclusive<usize> {
        match self {
            Family::ExactlyK => k..=k,
            Family::AtMostK => 1..=k,
        }
    }

    /// Enumerates every permissible super-arm.
    pub fn for_each(self, m: usize, k: usize, mut f: impl FnMut(&[usize])) {
        for size in self.sizes(k) {
            for_each_subset(m, size, &mut f);
        }
    }
}

/// Saturating binomial coefficient.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        // exact at every step: acc * (n - j) is divisible by (j + 1)
        acc = match acc.checked_mul((n - j) as u128) {
            Some(v) => v / (j + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}

/// Calls `f` on every `size`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_subset(n: usize, size: usize, f: &mut impl FnMut(&[usize])) {
    if size > n {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        f(&idx);
        // rightmost index that can still advance
        let Some(pos) = (0..size).rev().find(|&p| idx[p] < n - size + p) else {
            return;
        };
        idx[pos] += 1;
        for p in pos + 1..size {
            idx[p] = idx[p - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(mu: &[f64]) -> BanditInstance {
        BanditInstance::new(MeanVector::new(mu.to_vec()).unwrap(), Seed(9)).unwrap()
    }

    #[test]
    fn degenerate_means_give_degenerate_outcomes() {
        let b = inst(&[1.0, 1.0, 0.0, 0.0]);
        let ones = SuperArm::new(vec![0, 1], 4).unwrap();
        let zeros = SuperArm::new(vec![2, 3], 4).unwrap();
        for t in 1..50 {
            assert!(b.pull(t, &ones).unwrap().iter().all(|(_, x)| x));
            assert!(b.pull(t, &zeros).unwrap().iter().all(|(_, x)| !x));
        }
    }

    #[test]
    fn empirical_mean_of_fair_arm() {
        // Binomial(10^4, 0.5) has sd 0.005, so +-0.02 is a 4-sigma band.
        let b = inst(&[0.5; 4]);
        let s = SuperArm::new(vec![2], 4).unwrap();
        let hits = (1..=10_000u64).filter(|&t| b.pull(t, &s).unwrap().get(2).unwrap()).count();
        assert!((hits as f64 / 1e4 - 0.5).abs() < 0.02, "{hits}");
    }

    #[test]
    fn same_round_replays_identically() {
        let b = inst(&[0.3, 0.6, 0.5]);
        let s = SuperArm::new(vec![0, 1, 2], 3).unwrap();
        assert_eq!(b.pull(17, &s).unwrap(), b.pull(17, &s).unwrap());
    }

    #[test]
    fn feedback_keys_match_super_arm() {
        let b = inst(&[0.3, 0.6, 0.5, 0.1]);
        let s = SuperArm::new(vec![3, 1], 4).unwrap();
        let fb = b.pull(1, &s).unwrap();
        assert_eq!(fb.iter().map(|(a, _)| a).collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(matches!(SuperArm::new(vec![0, 5], 3), Err(Error::ArmOutOfRange { index: 5, arms: 3 })));
        assert!(MeanVector::new(vec![0.2, 1.2]).is_err());
        assert!(BanditInstance::new(MeanVector::new(vec![0.2]).unwrap(), Seed(0)).is_err());
        let b = inst(&[0.3, 0.6]);
        assert!(matches!(b.pull(1, &SuperArm::from_sorted(vec![0, 7])), Err(Error::ArmOutOfRange { .. })));
    }

    #[test]
    fn subset_enumeration_counts() {
        let mut n = 0;
        for_each_subset(6, 3, &mut |s: &[usize]| {
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            n += 1;
        });
        assert_eq!(n, 20);
        assert_eq!(binomial(5000, 5), 25_989_619_781_251_000);
        assert_eq!(Family::AtMostK.count(4, 2), 10);
        let mut empty = 0;
        for_each_subset(3, 0, &mut |s: &[usize]| {
            assert!(s.is_empty());
            empty += 1;
        });
        assert_eq!(empty, 1);
    }

    #[test]
    fn display_joins_with_semicolons() {
        assert_eq!(SuperArm::new(vec![4, 0, 2], 5).unwrap().to_string(), "0;2;4");
    }
}
