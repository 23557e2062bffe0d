//! Black-box mean-reward models.
//!
//! A [`RewardModel`] wraps a [`MeanReward`] function with the cardinality
//! constraint and a query counter. Oracles go through
//! [`RewardModel::evaluate`], which counts; diagnostics and regret accounting
//! read the function directly through [`RewardModel::function`].

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bandit::{binomial, for_each_subset, Family, MeanVector};
use crate::error::{Error, Result};
use crate::oracle::optimal_sets;

/// A mean-reward function `r(S; theta)`.
pub trait MeanReward: Send + Sync + fmt::Debug {
    /// `arms` is sorted and duplicate-free; it may be any size, including
    /// empty or larger than `K` (group tests pool many arms).
    fn value(&self, arms: &[usize], theta: &[f64]) -> f64;

    /// A Lipschitz constant `B` with respect to the l1 norm of the masked vector.
    fn lipschitz(&self) -> f64;

    /// Upper bound `M` on the reward.
    fn upper_bound(&self) -> f64;
}

/// Sum of means, `r(S) = sum_{i in S} theta_i`, for every permissible `S`.
///
/// Group tests pool far more than `K` arms, so a pooled set is scored by its
/// best `K` members. That coincides with the plain sum whenever `|S| <= K`,
/// keeps every value in `[0, K]`, and stays monotone and 1-Lipschitz.
#[derive(Clone, Debug)]
pub struct Linear {
    k: usize,
}

impl Linear {
    pub fn new(k: usize) -> Self {
        Self { k }
    }
}

impl MeanReward for Linear {
    fn value(&self, arms: &[usize], theta: &[f64]) -> f64 {
        if arms.len() <= self.k {
            return arms.iter().map(|&i| theta[i]).sum();
        }
        top_k_sum(arms.iter().map(|&i| theta[i]), self.k)
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }

    fn upper_bound(&self) -> f64 {
        self.k as f64
    }
}

/// Sum of the `k` largest values; `k` is small so insertion into a sorted
/// buffer beats a full sort.
fn top_k_sum(values: impl Iterator<Item = f64>, k: usize) -> f64 {
    let mut best: Vec<f64> = Vec::with_capacity(k + 1);
    for v in values {
        if best.len() == k && v <= best[k - 1] {
            continue;
        }
        let pos = best.partition_point(|&b| b >= v);
        best.insert(pos, v);
        best.truncate(k);
    }
    best.iter().sum()
}

/// Weights of a two-layer sigmoid network with nonnegative entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NnWeights {
    hidden: usize,
    arms: usize,
    /// Row-major `hidden x arms`.
    w1: Vec<f64>,
    w2: Vec<f64>,
}

impl NnWeights {
    pub fn new(w1: Vec<Vec<f64>>, w2: Vec<f64>) -> Result<Self> {
        let hidden = w1.len();
        if hidden == 0 || w2.len() != hidden {
            return Err(Error::config(format!(
                "hidden layer has {hidden} rows but output layer has {} weights",
                w2.len()
            )));
        }
        let arms = w1[0].len();
        if w1.iter().any(|row| row.len() != arms) {
            return Err(Error::config("ragged first-layer weight matrix"));
        }
        let w1: Vec<f64> = w1.into_iter().flatten().collect();
        if w1.iter().chain(&w2).any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::config("network weights must be finite and nonnegative"));
        }
        Ok(Self { hidden, arms, w1, w2 })
    }

    /// Entries are `|N(0, scale^2)|` draws.
    pub fn random<R: Rng + ?Sized>(hidden: usize, arms: usize, scale: f64, rng: &mut R) -> Self {
        let mut draw = || scale * f64::abs(StandardNormal.sample(rng));
        let w1 = (0..hidden * arms).map(|_| draw()).collect();
        let w2 = (0..hidden).map(|_| draw()).collect();
        Self { hidden, arms, w1, w2 }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn w1(&self, neuron: usize, arm: usize) -> f64 {
        self.w1[neuron * self.arms + arm]
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    /// CSV dump: one line per hidden neuron holding its `arms` input weights
    /// followed by its output weight.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for n in 0..self.hidden {
            let row = &self.w1[n * self.arms..(n + 1) * self.arms];
            for w in row {
                out.push_str(&w.to_string());
                out.push(',');
            }
            out.push_str(&self.w2[n].to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut w1 = Vec::new();
        let mut w2 = Vec::new();
        for (lineno, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut vals = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("weights line {}: {e}", lineno + 1)))?;
            let out = vals.pop().ok_or_else(|| Error::Parse(format!("weights line {} is empty", lineno + 1)))?;
            w1.push(vals);
            w2.push(out);
        }
        Self::new(w1, w2)
    }
}

/// `r(S; theta) = <w2, sigmoid(W1 theta_S)>`, where `theta_S` is the full-length
/// vector with every coordinate outside `S` zeroed.
#[derive(Clone, Debug)]
pub struct TwoLayerNn {
    weights: NnWeights,
}

impl TwoLayerNn {
    pub fn new(weights: NnWeights) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &NnWeights {
        &self.weights
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl MeanReward for TwoLayerNn {
    fn value(&self, arms: &[usize], theta: &[f64]) -> f64 {
        let w = &self.weights;
        let mut masked = vec![0.0; w.arms];
        for &i in arms {
            masked[i] = theta[i];
        }
        (0..w.hidden)
            .map(|n| {
                let row = &w.w1[n * w.arms..(n + 1) * w.arms];
                let pre: f64 = row.iter().zip(&masked).map(|(a, b)| a * b).sum();
                w.w2[n] * sigmoid(pre)
            })
            .sum()
    }

    /// `|sigmoid'| <= 1/4` times the largest column of `diag(w2) W1`.
    fn lipschitz(&self) -> f64 {
        let w = &self.weights;
        (0..w.arms).map(|i| (0..w.hidden).map(|n| w.w2[n] * w.w1(n, i)).sum::<f64>()).fold(0.0, f64::max) / 4.0
    }

    fn upper_bound(&self) -> f64 {
        self.weights.w2.iter().sum()
    }
}

/// Reward kinds that can be built from an experiment config.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Linear,
    Nn,
}

/// A black-box reward with constants `(B, M, K)` and a query counter.
pub struct RewardModel {
    function: Arc<dyn MeanReward>,
    k: usize,
    evals: AtomicU64,
}

impl Clone for RewardModel {
    /// The clone shares the function and starts from the current count.
    fn clone(&self) -> Self {
        Self { function: Arc::clone(&self.function), k: self.k, evals: AtomicU64::new(self.evals()) }
    }
}

impl fmt::Debug for RewardModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RewardModel")
            .field("function", &self.function)
            .field("k", &self.k)
            .field("evals", &self.evals())
            .finish()
    }
}

impl RewardModel {
    pub fn new(function: Arc<dyn MeanReward>, k: usize) -> Self {
        Self { function, k, evals: AtomicU64::new(0) }
    }

    pub fn linear(k: usize) -> Self {
        Self::new(Arc::new(Linear::new(k)), k)
    }

    pub fn nn(weights: NnWeights, k: usize) -> Self {
        Self::new(Arc::new(TwoLayerNn::new(weights)), k)
    }

    /// One counted black-box query.
    pub fn evaluate(&self, arms: &[usize], theta: &MeanVector) -> f64 {
        self.evals.fetch_add(1, Ordering::Relaxed);
        self.function.value(arms, theta.as_slice())
    }

    /// Uncounted access for diagnostics and regret accounting.
    pub fn function(&self) -> &dyn MeanReward {
        self.function.as_ref()
    }

    pub fn evals(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn reset_evals(&self) {
        self.evals.store(0, Ordering::Relaxed);
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.function.lipschitz()
    }

    pub fn reward_upper_bound(&self) -> f64 {
        self.function.upper_bound()
    }
}

/// Outcome of an exhaustive separability check.
#[derive(Clone, Debug, PartialEq)]
pub enum Separability {
    Separable,
    /// `r(S + {optimal}) - r(S + {suboptimal}) = difference <= 0`.
    Violation {
        optimal: usize,
        suboptimal: usize,
        base: Vec<usize>,
        difference: f64,
    },
}

impl Separability {
    pub fn is_separable(&self) -> bool {
        matches!(self, Separability::Separable)
    }
}

/// Default arm cap for exhaustive separability checks.
pub const SEPARABILITY_MAX_ARMS: usize = 14;

/// Default cap on candidate super-arms when locating optimal sets.
pub const ENUMERATION_CAP: u128 = 1_000_000;

/// Arms belonging to at least one optimal super-arm, and the rest. When the
/// optimal sets jointly cover every arm (e.g. a constant reward) the first
/// optimal set stands in for `S*`, as if the tie had been broken.
pub(crate) fn split_optimal(
    model: &RewardModel,
    theta: &MeanVector,
    family: Family,
    cap: u128,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let sets = optimal_sets(model.function(), theta, model.k(), family, cap)?;
    let m = theta.len();
    let mut in_opt = vec![false; m];
    for s in &sets {
        for &i in s.arms() {
            in_opt[i] = true;
        }
    }
    if in_opt.iter().all(|&x| x) && sets.len() > 1 {
        in_opt.fill(false);
        for &i in sets[0].arms() {
            in_opt[i] = true;
        }
    }
    Ok((0..m).partition(|&i| in_opt[i]))
}

fn union_sorted(base: &[usize], extra: usize, buf: &mut Vec<usize>) {
    buf.clear();
    let pos = base.partition_point(|&b| b < extra);
    buf.extend_from_slice(&base[..pos]);
    buf.push(extra);
    buf.extend_from_slice(&base[pos..]);
}

/// Strict separability at `theta`: for every optimal `s`, suboptimal `s~`, and
/// every `S` of size at most `K - 1` avoiding both,
/// `r(S + {s}) > r(S + {s~})`. Returns the first violating triple.
pub fn check_separability(model: &RewardModel, theta: &MeanVector, max_arms: usize) -> Result<Separability> {
    let m = theta.len();
    if m > max_arms {
        return Err(Error::TooLarge {
            what: "exhaustive separability check (use sampled_separability_margin)",
            count: m as u128,
            cap: max_arms as u128,
        });
    }
    let (opt, rest) = split_optimal(model, theta, Family::ExactlyK, ENUMERATION_CAP)?;
    let mut found = None;
    for_each_triple(model, theta, &opt, &rest, |s, t, base, diff| {
        if diff <= 0.0 {
            found = Some(Separability::Violation { optimal: s, suboptimal: t, base: base.to_vec(), difference: diff });
            false
        } else {
            true
        }
    });
    Ok(found.unwrap_or(Separability::Separable))
}

/// Exact minimum of `r(S + {s}) - r(S + {s~})` over all triples (the
/// `C` in C-separability). `None` when every arm is optimal.
pub fn exhaustive_separability_margin(
    model: &RewardModel,
    theta: &MeanVector,
    max_triples: u128,
) -> Result<Option<f64>> {
    let m = theta.len();
    let (opt, rest) = split_optimal(model, theta, Family::ExactlyK, ENUMERATION_CAP)?;
    if rest.is_empty() {
        return Ok(None);
    }
    let per_pair: u128 = (0..model.k()).map(|j| binomial(m - 2, j)).sum();
    let count = per_pair.saturating_mul((opt.len() * rest.len()) as u128);
    if count > max_triples {
        return Err(Error::TooLarge { what: "exhaustive separability margin", count, cap: max_triples });
    }
    let mut min = f64::INFINITY;
    for_each_triple(model, theta, &opt, &rest, |_, _, _, diff| {
        min = min.min(diff);
        true
    });
    Ok(Some(min))
}

/// Visits every `(s, s~, S)` with `|S| <= K - 1`; `visit` returns `false` to stop.
fn for_each_triple(
    model: &RewardModel,
    theta: &MeanVector,
    opt: &[usize],
    rest: &[usize],
    mut visit: impl FnMut(usize, usize, &[usize], f64) -> bool,
) {
    let m = theta.len();
    let f = model.function();
    let th = theta.as_slice();
    let (mut with_s, mut with_t, mut base) = (Vec::new(), Vec::new(), Vec::new());
    for &s in opt {
        for &t in rest {
            let others: Vec<usize> = (0..m).filter(|&i| i != s && i != t).collect();
            let mut go = true;
            for size in 0..model.k() {
                for_each_subset(others.len(), size, &mut |idx: &[usize]| {
                    if !go {
                        return;
                    }
                    base.clear();
                    base.extend(idx.iter().map(|&j| others[j]));
                    union_sorted(&base, s, &mut with_s);
                    union_sorted(&base, t, &mut with_t);
                    go = visit(s, t, &base, f.value(&with_s, th) - f.value(&with_t, th));
                });
                if !go {
                    return;
                }
            }
        }
    }
}

/// Minimum of `r(S + {s}) - r(S + {s~})` over `samples` random triples:
/// `s` uniform among optimal arms, `s~` among the rest, `S` uniform among all
/// subsets of size at most `K - 1` avoiding both.
pub fn sampled_separability_margin<R: Rng + ?Sized>(
    model: &RewardModel,
    theta: &MeanVector,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::domain("need at least one sampled triple"));
    }
    let m = theta.len();
    let (opt, rest) = if binomial(m, model.k()) <= ENUMERATION_CAP {
        split_optimal(model, theta, Family::ExactlyK, ENUMERATION_CAP)?
    } else {
        // large m: separable models are maximized by their top-K singletons
        let top = crate::oracle::top_k_singletons(model.function(), theta, model.k());
        (0..m).partition(|i| top.contains(i))
    };
    sampled_margin_with_split(model, theta, &opt, &rest, samples, rng)
}

pub(crate) fn sampled_margin_with_split<R: Rng + ?Sized>(
    model: &RewardModel,
    theta: &MeanVector,
    opt: &[usize],
    rest: &[usize],
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if rest.is_empty() || opt.is_empty() {
        return Err(Error::domain("every arm is optimal: no optimal/suboptimal pair exists"));
    }
    let m = theta.len();
    let f = model.function();
    let th = theta.as_slice();
    // weights for the size of S: C(m - 2, j) for j < K
    let weights: Vec<f64> = (0..model.k()).map(|j| binomial(m - 2, j) as f64).collect();
    let size_dist = rand::distr::weighted::WeightedIndex::new(&weights)
        .map_err(|e| Error::domain(format!("size distribution: {e}")))?;
    let (mut with_s, mut with_t) = (Vec::new(), Vec::new());
    let mut others = Vec::with_capacity(m);
    let mut min = f64::INFINITY;
    for _ in 0..samples {
        let s = opt[rng.random_range(0..opt.len())];
        let t = rest[rng.random_range(0..rest.len())];
        let size = size_dist.sample(rng);
        others.clear();
        others.extend((0..m).filter(|&i| i != s && i != t));
        let base = crate::rng::choose_distinct(rng, &others, size);
        union_sorted(&base, s, &mut with_s);
        union_sorted(&base, t, &mut with_t);
        min = min.min(f.value(&with_s, th) - f.value(&with_t, th));
    }
    Ok(min)
}
