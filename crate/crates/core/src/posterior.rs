//! Beta-Bernoulli posterior over the base-arm means.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::bandit::{Feedback, MeanVector};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorState {
    a: Vec<f64>,
    b: Vec<f64>,
    t: u64,
}

impl PosteriorState {
    /// Uniform prior `Beta(1, 1)` on every arm.
    pub fn init(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("posterior needs at least one arm"));
        }
        Ok(Self { a: vec![1.0; m], b: vec![1.0; m], t: 0 })
    }

    /// Starts from explicit parameters (both must be `>= 1`).
    pub fn from_params(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::domain("parameter vectors must be nonempty and of equal length"));
        }
        if a.iter().chain(&b).any(|&x| !(x >= 1.0) || !x.is_finite()) {
            return Err(Error::domain("beta parameters must be finite and >= 1"));
        }
        Ok(Self { a, b, t: 0 })
    }

    pub fn arms(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn rounds(&self) -> u64 {
        self.t
    }

    pub fn mean(&self, arm: usize) -> f64 {
        self.a[arm] / (self.a[arm] + self.b[arm])
    }

    /// One independent `Beta(a_i, b_i)` draw per arm.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MeanVector {
        let theta = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(&a, &b)| {
                let beta = Beta::new(a, b).expect("parameters validated at construction");
                // guards against a 1 - eps draw rounding up
                beta.sample(rng).clamp(0.0, 1.0)
            })
            .collect();
        MeanVector::new(theta).expect("beta draws lie in [0, 1]")
    }

    /// Applies `a += Y`, `b += 1 - Y` for each observed arm. With `resample`,
    /// `Y ~ Bern(X)` is drawn from `rng`; for binary `X` this is `Y = X`
    /// either way, only the stream consumption differs.
    pub fn update<R: Rng + ?Sized>(&mut self, feedback: &Feedback, rng: &mut R, resample: bool) -> Result<()> {
        let m = self.arms();
        if let Some((arm, _)) = feedback.iter().find(|&(arm, _)| arm >= m) {
            return Err(Error::ArmOutOfRange { index: arm, arms: m });
        }
        for (arm, x) in feedback.iter() {
            let x = if x { 1.0 } else { 0.0 };
            let y = if resample { f64::from(u8::from(rng.random::<f64>() < x)) } else { x };
            self.a[arm] += y;
            self.b[arm] += 1.0 - y;
        }
        self.t += 1;
        Ok(())
    }

    /// `arm,a,b` CSV dump.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("arm,a,b\n");
        for (i, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            out.push_str(&format!("{i},{a},{b}\n"));
        }
        out
    }
}
