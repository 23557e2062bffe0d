//! Group-test budgets.

use crate::error::{Error, Result};

/// Sufficient test count for the group-testing oracle to find an optimal
/// super-arm with probability `1 - confidence`:
///
/// `ceil( 8 M^2 B^2 / (delta^2 p^4 (1-p)^2 q^2) * ln(K (m - K) / confidence) )`
#[allow(clippy::too_many_arguments)]
pub fn sufficient_test_count(
    reward_bound: f64,
    lipschitz: f64,
    delta: f64,
    p: f64,
    q: f64,
    k: usize,
    m: usize,
    confidence: f64,
) -> Result<usize> {
    if q == 0.0 {
        return Err(Error::domain("budget undefined for q = 0"));
    }
    if !(0.0 < p && p < 1.0) || !(0.0 < q && q <= 1.0) || !(delta > 0.0) || !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::domain(format!(
            "need p in (0,1), q in (0,1], delta > 0, confidence in (0,1); got p={p} q={q} delta={delta} confidence={confidence}"
        )));
    }
    if k == 0 || k >= m {
        return Err(Error::domain(format!("need 0 < K < m, got K={k}, m={m}")));
    }
    let lead = 8.0 * (reward_bound * lipschitz).powi(2) / (delta.powi(2) * p.powi(4) * (1.0 - p).powi(2) * q.powi(2));
    let pairs = (k * (m - k)) as f64;
    Ok(ceil_count(lead * (pairs / confidence).ln()))
}

/// Default floor for a degenerate `q_hat`.
pub const Q_FLOOR: f64 = 0.1;

/// Experimental budget `ceil( c / (q_hat^2 delta^2) * ln m )`. A zero estimate
/// falls back to `q_floor`.
pub fn practical_test_count(c: f64, q_hat: f64, delta: f64, m: usize, q_floor: f64) -> Result<usize> {
    if !(c > 0.0) || !(delta > 0.0) || m < 2 {
        return Err(Error::domain(format!("need c > 0, delta > 0, m >= 2; got c={c} delta={delta} m={m}")));
    }
    if !(0.0..=1.0).contains(&q_hat) {
        return Err(Error::domain(format!("q_hat = {q_hat} outside [0, 1]")));
    }
    let q = if q_hat == 0.0 {
        log::warn!("q_hat = 0; using floor {q_floor}");
        q_floor
    } else {
        q_hat
    };
    Ok(ceil_count(c / (q * q * delta * delta) * (m as f64).ln()))
}

/// Tests needed for `P(|q_hat - q| > epsilon) <= confidence`:
/// `ceil( ln(1/confidence) / (2 epsilon^2) )`.
pub fn hoeffding_budget_for_q(epsilon: f64, confidence: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) || !(confidence > 0.0 && confidence <= 1.0) {
        return Err(Error::domain(format!("need epsilon in (0,1), confidence in (0,1]; got {epsilon}, {confidence}")));
    }
    Ok(ceil_count((1.0 / confidence).ln() / (2.0 * epsilon * epsilon)))
}

fn ceil_count(x: f64) -> usize {
    // 12.000000000000002 should not become 13
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sufficient_reference_value() {
        // independent evaluation: 8192 * ln(2_497_500) = 120674.72
        assert_eq!(sufficient_test_count(1.0, 1.0, 0.25, 0.5, 1.0, 5, 5000, 0.01).unwrap(), 120_675);
    }

    #[test]
    fn sufficient_scales_with_delta_squared() {
        let lead = |d: f64| sufficient_test_count(1.0, 1.0, d, 0.5, 1.0, 5, 5000, 0.01).unwrap() as f64;
        let ratio = lead(0.25) / lead(0.5);
        assert!((ratio - 4.0).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn sufficient_prefers_two_thirds() {
        let at = |p| sufficient_test_count(1.0, 1.0, 0.25, p, 1.0, 5, 5000, 0.01).unwrap();
        assert!(at(2.0 / 3.0) < at(0.5));
        assert!(at(2.0 / 3.0) < at(0.7));
        assert!(at(2.0 / 3.0) < at(0.6));
    }

    #[test]
    fn sufficient_rejects_zero_q() {
        assert!(sufficient_test_count(1.0, 1.0, 0.25, 0.5, 0.0, 5, 5000, 0.01).is_err());
        assert!(sufficient_test_count(1.0, 1.0, 0.25, 1.0, 1.0, 5, 5000, 0.01).is_err());
    }

    #[test]
    fn practical_reference_values() {
        // 16 ln 5000 = 136.28
        assert_eq!(practical_test_count(1.0, 1.0, 0.25, 5000, Q_FLOOR).unwrap(), 137);
        // 35.2 ln 5000 = 299.81
        assert_eq!(practical_test_count(2.2, 1.0, 0.25, 5000, Q_FLOOR).unwrap(), 300);
        let base = practical_test_count(1.0, 1.0, 1.0, 100, Q_FLOOR).unwrap();
        let squared = practical_test_count(1.0, 1.0, 1.0, 10_000, Q_FLOOR).unwrap();
        // ln 100 = 4.605 -> 5, ln 10^4 = 9.21 -> 10
        assert_eq!((base, squared), (5, 10));
        assert_eq!(
            practical_test_count(1.0, 0.0, 0.25, 5000, 0.1).unwrap(),
            practical_test_count(1.0, 0.1, 0.25, 5000, 0.1).unwrap()
        );
    }

    #[test]
    fn hoeffding_values() {
        // 50 ln 20 = 149.79
        assert_eq!(hoeffding_budget_for_q(0.1, 0.05).unwrap(), 150);
        // 200 ln 20 = 599.15
        assert_eq!(hoeffding_budget_for_q(0.05, 0.05).unwrap(), 600);
        assert_eq!(hoeffding_budget_for_q(0.1, 1.0).unwrap(), 0);
    }
}
