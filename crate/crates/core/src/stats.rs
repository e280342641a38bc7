//! Confidence radius and per-item bookkeeping shared by learners and attackers.
//!
//! All logarithms are natural logarithms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `max(0, x)`.
#[inline]
pub fn clamp_plus(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Parameters of the high-probability confidence radius `beta(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaParams {
    num_items: usize,
    delta: f64,
    // ln(pi^2 L / (3 delta)), so that beta(n) = sqrt((c + 2 ln n) / 2n)
    #[serde(skip)]
    log_const: f64,
}

impl BetaParams {
    pub fn new(num_items: usize, delta: f64) -> Result<Self> {
        if num_items == 0 {
            return Err(Error::Domain("beta needs at least one item".into()));
        }
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(Error::Domain(format!(
                "delta must lie in (0, 1/2], got {delta}"
            )));
        }
        let log_const = (std::f64::consts::PI.powi(2) * num_items as f64 / (3.0 * delta)).ln();
        Ok(Self {
            num_items,
            delta,
            log_const,
        })
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `sqrt( ln(pi^2 L n^2 / (3 delta)) / (2n) )`. Errors on `n = 0`.
    pub fn beta(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("beta(0) is undefined".into()));
        }
        Ok(self.radius(n))
    }

    /// Like [`beta`](Self::beta) but maps `n = 0` to `+inf`: with no samples
    /// there is no confidence at all.
    #[inline]
    pub fn radius(&self, n: u64) -> f64 {
        if n == 0 {
            return f64::INFINITY;
        }
        let n = n as f64;
        ((self.log_const + 2.0 * n.ln()) / (2.0 * n)).sqrt()
    }
}

/// `beta` as a free function over explicit parameters.
pub fn beta(params: &BetaParams, n: u64) -> Result<f64> {
    params.beta(n)
}

/// Per-item sums kept by the attacker (and, restricted to what it sees, by
/// the learner). Only sums are stored; no per-round history.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    /// Rounds in which the item was shown and observed.
    pub pulls: u64,
    /// Sum of pre-attack clicks over those rounds.
    pub pre_reward_sum: u64,
    /// Sum of attack values. Negative only through cascade compensation.
    pub attack_sum: i64,
    /// Sum of examination probabilities at the positions the item was shown.
    pub bias_corrected_pulls: f64,
}

impl ArmStats {
    /// Folds one observation: pre-attack click, attack value and position weight.
    #[inline]
    pub fn record(&mut self, pre: u8, alpha: i8, weight: f64) {
        self.pulls += 1;
        self.pre_reward_sum += u64::from(pre);
        self.attack_sum += i64::from(alpha);
        self.bias_corrected_pulls += weight;
    }

    #[inline]
    pub fn post_reward_sum(&self) -> i64 {
        self.pre_reward_sum as i64 - self.attack_sum
    }

    pub fn pre_mean(&self) -> Option<f64> {
        (self.pulls > 0).then(|| self.pre_reward_sum as f64 / self.pulls as f64)
    }

    pub fn post_mean(&self) -> Option<f64> {
        (self.pulls > 0).then(|| self.post_reward_sum() as f64 / self.pulls as f64)
    }

    /// `(pre_mean, post_mean)`. Errors when the item has never been observed.
    pub fn empirical_means(&self) -> Result<(f64, f64)> {
        match (self.pre_mean(), self.post_mean()) {
            (Some(pre), Some(post)) => Ok((pre, post)),
            _ => Err(Error::UndefinedMean),
        }
    }

    /// Checks the ledger invariants; used by tests and debug assertions.
    pub fn is_consistent(&self) -> bool {
        let post = self.post_reward_sum();
        self.pre_reward_sum <= self.pulls
            && post >= 0
            && post as u64 <= self.pulls
            && self.bias_corrected_pulls <= self.pulls as f64 + 1e-9
    }
}

/// Free-function form of [`ArmStats::empirical_means`].
pub fn empirical_means(stats: &ArmStats) -> Result<(f64, f64)> {
    stats.empirical_means()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Independent evaluation of the closed form, written out term by term.
    fn beta_closed_form(l: f64, delta: f64, n: f64) -> f64 {
        let pi = std::f64::consts::PI;
        ((1.0 / (2.0 * n)) * (pi * pi * l * n * n / (3.0 * delta)).ln()).sqrt()
    }

    #[test]
    fn beta_reference_value() {
        let p = BetaParams::new(2, 0.1).unwrap();
        // 1.4468206... from a 50-digit evaluation of the closed form.
        assert!((p.beta(1).unwrap() - 1.446_820_6).abs() < 1e-3);
        assert!((p.beta(1).unwrap() - beta_closed_form(2.0, 0.1, 1.0)).abs() < 1e-14);
    }

    #[test]
    fn beta_decreases() {
        let p = BetaParams::new(2, 0.1).unwrap();
        let (b1, b10, b100) = (p.radius(1), p.radius(10), p.radius(100));
        assert!(b100 < b10 && b10 < b1);
    }

    #[test]
    fn beta_identity() {
        let p = BetaParams::new(16, 0.05).unwrap();
        let n = 50.0_f64;
        let lhs = p.beta(50).unwrap() * (2.0 * n).sqrt();
        let pi = std::f64::consts::PI;
        let rhs = (pi * pi * 16.0 * n * n / (3.0 * 0.05)).ln().sqrt();
        assert!((lhs - rhs).abs() < 1e-12);
        assert!((p.beta(50).unwrap() - beta_closed_form(16.0, 0.05, 50.0)).abs() < 1e-14);
    }

    #[test]
    fn beta_rejects_zero_and_bad_delta() {
        let p = BetaParams::new(4, 0.1).unwrap();
        assert!(matches!(p.beta(0), Err(Error::Domain(_))));
        assert!(p.radius(0).is_infinite());
        assert!(BetaParams::new(4, 0.0).is_err());
        assert!(BetaParams::new(4, 0.6).is_err());
        assert!(BetaParams::new(0, 0.1).is_err());
        assert!(BetaParams::new(4, 0.5).is_ok());
    }

    #[test]
    fn beta_monotone_on_grid() {
        for &l in &[2usize, 3, 16, 100, 1000] {
            for &delta in &[1e-6, 0.01, 0.05, 0.1, 0.5] {
                let p = BetaParams::new(l, delta).unwrap();
                let mut prev = f64::INFINITY;
                let mut n = 1u64;
                while n <= 10_000_000 {
                    let b = p.radius(n);
                    assert!(b < prev, "L={l} delta={delta} n={n}");
                    prev = b;
                    n = if n < 100 { n + 1 } else { n * 3 / 2 };
                }
            }
        }
    }

    #[test]
    fn clamp_plus_examples() {
        assert_eq!(clamp_plus(-0.3), 0.0);
        assert_eq!(clamp_plus(0.0), 0.0);
        assert_eq!(clamp_plus(2.7), 2.7);
    }

    #[test]
    fn means_examples() {
        let s = ArmStats {
            pulls: 1,
            pre_reward_sum: 1,
            attack_sum: 1,
            bias_corrected_pulls: 1.0,
        };
        assert_eq!(s.empirical_means().unwrap(), (1.0, 0.0));
        let s = ArmStats {
            pulls: 4,
            pre_reward_sum: 3,
            attack_sum: 1,
            bias_corrected_pulls: 4.0,
        };
        assert_eq!(empirical_means(&s).unwrap(), (0.75, 0.5));
        assert!(matches!(
            ArmStats::default().empirical_means(),
            Err(Error::UndefinedMean)
        ));
    }

    proptest! {
        #[test]
        fn means_stay_in_unit_interval(
            obs in proptest::collection::vec((0u8..=1, 0u8..=1, 0.01f64..=1.0), 1..200)
        ) {
            // Build a reachable state: attacks only remove clicks that exist.
            let mut s = ArmStats::default();
            for (pre, flip, w) in obs {
                let alpha = if pre == 1 && flip == 1 { 1 } else { 0 };
                s.record(pre, alpha, w);
            }
            let (pre, post) = s.empirical_means().unwrap();
            prop_assert!((0.0..=1.0).contains(&pre));
            prop_assert!((0.0..=1.0).contains(&post));
            prop_assert!(s.is_consistent());
        }
    }
}
