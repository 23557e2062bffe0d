//! Uniform reward quantizer.
//!
//! `[0, M]` is cut into cells of width `delta / 2B`; the level set is
//! `{delta/2B, 2 delta/2B, ..., M}` with `L = ceil(2BM / delta)` levels. When
//! `2BM / delta` is not an integer the final cell is the short one.

use crate::error::{Error, Result};

/// Slack for reward values that stray outside `[0, M]` by round-off.
pub const RANGE_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Quantizer {
    delta: f64,
    lipschitz: f64,
    upper: f64,
    step: f64,
    levels: Vec<f64>,
}

impl Quantizer {
    pub fn build(delta: f64, lipschitz: f64, upper: f64) -> Result<Self> {
        if !(delta > 0.0 && lipschitz > 0.0 && upper > 0.0) || !(delta * lipschitz * upper).is_finite() {
            return Err(Error::config(format!(
                "quantizer needs positive finite delta, B, M (got {delta}, {lipschitz}, {upper})"
            )));
        }
        let step = delta / (2.0 * lipschitz);
        if step > upper * (1.0 + 1e-12) {
            return Err(Error::config(format!("cell width delta/2B = {step} exceeds the reward bound M = {upper}")));
        }
        let ratio = upper / step;
        // 4.000000001 is four cells, not five
        let count = ((ratio - 1e-9).ceil() as usize).max(1);
        let mut levels: Vec<f64> = (1..count).map(|i| i as f64 * step).collect();
        levels.push(upper);
        Ok(Self { delta, lipschitz, upper, step, levels })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Grid spacing `delta / 2B`.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Index of the nearest level; exact midpoints round up.
    pub fn level_index(&self, value: f64) -> Result<usize> {
        if !(value >= -RANGE_SLACK && value <= self.upper + RANGE_SLACK) {
            return Err(Error::domain(format!("reward {value} outside [0, {}]", self.upper)));
        }
        let hi = self.levels.partition_point(|&l| l < value);
        if hi == 0 {
            return Ok(0);
        }
        if hi == self.levels.len() {
            return Ok(hi - 1);
        }
        let lo = hi - 1;
        if value - self.levels[lo] < self.levels[hi] - value {
            Ok(lo)
        } else {
            Ok(hi)
        }
    }

    pub fn quantize(&self, value: f64) -> Result<f64> {
        Ok(self.levels[self.level_index(value)?])
    }
}

/// Quantization level from a quantile function of the minimum gap:
/// `delta = F^{-1}(gamma)`.
pub fn delta_from_quantile(quantile: impl Fn(f64) -> f64, gamma: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&gamma) {
        return Err(Error::domain(format!("gamma = {gamma} outside [0, 1/2]")));
    }
    let delta = quantile(gamma);
    if delta > 0.0 && delta.is_finite() {
        Ok(delta)
    } else {
        Err(Error::domain(format!("quantile returned non-positive level {delta}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn quarter_grid() {
        let q = Quantizer::build(0.5, 1.0, 1.0).unwrap();
        assert_eq!(q.levels(), &[0.25, 0.5, 0.75, 1.0]);
        assert_eq!(q.quantize(0.3).unwrap(), 0.25);
        assert_eq!(q.quantize(1.0).unwrap(), 1.0);
        assert_eq!(q.quantize(0.375).unwrap(), 0.5);
        assert_eq!(q.quantize(0.0).unwrap(), 0.25);
    }

    #[test]
    fn short_final_cell() {
        let q = Quantizer::build(0.6, 1.0, 1.0).unwrap();
        assert_eq!(q.level_count(), 4);
        for (got, want) in q.levels().iter().zip([0.3, 0.6, 0.9, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_single_level() {
        let q = Quantizer::build(2.0 * 1.5 * 2.0, 1.5, 2.0).unwrap();
        assert_eq!(q.levels(), &[2.0]);
        assert_eq!(q.quantize(0.1).unwrap(), 2.0);
    }

    #[test]
    fn configuration_errors() {
        assert!(Quantizer::build(3.0, 1.0, 1.0).is_err());
        assert!(Quantizer::build(0.0, 1.0, 1.0).is_err());
        assert!(Quantizer::build(0.5, -1.0, 1.0).is_err());
    }

    #[test]
    fn range_slack() {
        let q = Quantizer::build(0.5, 1.0, 1.0).unwrap();
        assert_eq!(q.quantize(1.0 + 1e-10).unwrap(), 1.0);
        assert_eq!(q.quantize(-1e-10).unwrap(), 0.25);
        assert!(q.quantize(1.01).is_err());
        assert!(q.quantize(f64::NAN).is_err());
    }

    #[test]
    fn quantile_helper() {
        assert_eq!(delta_from_quantile(|g| 0.5 + g, 0.1).unwrap(), 0.6);
        assert!(delta_from_quantile(|g| g, 0.0).is_err());
        assert!(delta_from_quantile(|g| g, 0.7).is_err());
    }

    proptest! {
        #[test]
        fn error_bound_monotone_idempotent(
            delta in 0.01f64..2.0, b in 0.3f64..4.0, upper in 0.5f64..6.0,
            u in 0.0f64..1.0, w in 0.0f64..1.0,
        ) {
            prop_assume!(delta / (2.0 * b) <= upper);
            let q = Quantizer::build(delta, b, upper).unwrap();
            let half = delta / (4.0 * b);
            let v = half + u * (upper - half).max(0.0);
            if v <= upper {
                prop_assert!((q.quantize(v).unwrap() - v).abs() <= half + 1e-12);
            }
            let (lo, hi) = (u.min(w) * upper, u.max(w) * upper);
            prop_assert!(q.quantize(lo).unwrap() <= q.quantize(hi).unwrap());
            // below delta/4B everything rounds to the first level
            if lo >= half && hi - lo >= 2.0 * half {
                prop_assert!(q.quantize(hi).unwrap() > q.quantize(lo).unwrap());
            }
            for &l in q.levels() {
                prop_assert_eq!(q.quantize(l).unwrap(), l);
            }
        }
    }
}
