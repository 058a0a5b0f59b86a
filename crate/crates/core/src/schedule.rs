//! Evaluation-rate schedule: the fraction of each population scored by the
//! reward model instead of the ground-truth evaluator.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{math, seed, Error, Result};

/// `rho_min + (rho_max - rho_min) j / N`, clamped to `[rho_min, rho_max]`.
pub fn linear_rate(j: u64, n: u64, rho_min: f64, rho_max: f64) -> f64 {
    let n = n.max(1) as f64;
    let raw = rho_min + (rho_max - rho_min) * (j as f64) / n;
    raw.clamp(rho_min, rho_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSchedule {
    pub rho_min: f64,
    pub rho_max: f64,
    /// Iterations over which the linear rate ramps.
    pub horizon: u64,
    pub eta: f64,
    /// Smoothed rate; `None` until the first `advance`.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub last_j: Option<u64>,
}

impl RateSchedule {
    pub fn new(rho_min: f64, rho_max: f64, horizon: u64, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho_min) || !(0.0..=1.0).contains(&rho_max) || rho_min > rho_max {
            return Err(Error::config("schedule", "need 0 <= rho_min <= rho_max <= 1"));
        }
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::config("schedule.eta", "must lie in [0, 1)"));
        }
        if horizon == 0 {
            return Err(Error::config("schedule.horizon", "must be at least 1"));
        }
        Ok(RateSchedule { rho_min, rho_max, horizon, eta, rho: None, last_j: None })
    }

    /// Moves the schedule to iteration `j` and returns the new rate.
    pub fn advance(&mut self, j: u64) -> Result<f64> {
        if let Some(last) = self.last_j {
            if j <= last {
                return Err(Error::invalid("schedule iterations must strictly increase"));
            }
        }
        let target = linear_rate(j, self.horizon, self.rho_min, self.rho_max);
        let rho = match self.rho {
            None => target,
            Some(prev) => self.eta * prev + (1.0 - self.eta) * target,
        };
        self.rho = Some(rho);
        self.last_j = Some(j);
        Ok(rho)
    }

    pub fn current(&self) -> f64 {
        self.rho.unwrap_or(0.0)
    }
}

/// Number of model-scored members: `round(rho K)` with halves rounded away
/// from zero.
pub fn model_count(rho: f64, population: usize) -> usize {
    let n = math::round_half_away(rho.clamp(0.0, 1.0) * population as f64) as usize;
    n.min(population)
}

/// Uniform subset of `0..K` of size [`model_count`], without replacement,
/// sorted ascending. The complement is scored by ground truth.
pub fn split_population(rho: f64, population: usize, rng_seed: u64) -> Vec<usize> {
    let m = model_count(rho, population);
    let mut rng = seed::rng(rng_seed);
    let mut picked = rand::seq::index::sample(&mut rng, population, m).into_vec();
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_rate_examples() {
        assert!((linear_rate(50, 100, 0.1, 0.7) - 0.4).abs() < 1e-12);
        assert_eq!(linear_rate(100, 100, 0.1, 0.7), 0.7);
        assert_eq!(linear_rate(250, 100, 0.1, 0.7), 0.7);
        assert_eq!(linear_rate(7, 100, 0.3, 0.3), 0.3);
    }

    #[test]
    fn advance_examples() {
        let mut s = RateSchedule::new(0.1, 0.7, 100, 0.9).unwrap();
        assert!((s.advance(1).unwrap() - 0.106).abs() < 1e-12);
        assert!(s.advance(1).is_err());

        let mut s = RateSchedule::new(0.1, 0.7, 100, 0.9).unwrap();
        s.rho = Some(0.2);
        s.last_j = Some(49);
        assert!((s.advance(50).unwrap() - 0.22).abs() < 1e-12);

        let mut s = RateSchedule::new(0.1, 0.7, 100, 0.0).unwrap();
        for j in 1..=120 {
            assert_eq!(s.advance(j).unwrap(), linear_rate(j, 100, 0.1, 0.7));
        }
    }

    #[test]
    fn split_examples() {
        assert!(split_population(0.0, 45, 1).is_empty());
        assert_eq!(split_population(1.0, 45, 1), (0..45).collect::<Vec<_>>());
        let s = split_population(0.22, 45, 1);
        assert_eq!(s.len(), 10);
        assert_eq!(s, split_population(0.22, 45, 1));
        assert_eq!(model_count(0.5 / 45.0 + 0.0, 45), 1);
    }
}
