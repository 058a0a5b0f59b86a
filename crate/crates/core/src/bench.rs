//! Synthetic objectives over normalized actions in `[-1, 1]^d`.
//!
//! Every benchmark clamps its input to the unit box first, mirroring how
//! designs are clamped to their bounds.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{math, Error, Result};

pub const DEFAULT_DIMENSION: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkKind {
    /// `-|a - a*|^2`.
    Sphere,
    /// Negated Rosenbrock on `x = 2a`; optimum at `a = 0.5`.
    Rosenbrock,
    /// `4d - |a - a*|^2`, except `a_0 > 0.6` (a fifth of the box) is invalid
    /// and scores 0.
    PlateauInvalid,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 3] = [BenchmarkKind::Sphere, BenchmarkKind::Rosenbrock, BenchmarkKind::PlateauInvalid];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Sphere => "sphere",
            BenchmarkKind::Rosenbrock => "rosenbrock",
            BenchmarkKind::PlateauInvalid => "plateau-invalid",
        }
    }

    /// Human-readable description of where rewards are zeroed.
    pub fn invalid_region(self) -> &'static str {
        match self {
            BenchmarkKind::PlateauInvalid => "a_0 > 0.6 scores 0",
            BenchmarkKind::Sphere | BenchmarkKind::Rosenbrock => "none",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        BenchmarkKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::config("benchmark", alloc::format!("unknown benchmark `{name}`")))
    }
}

const INVALID_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub kind: BenchmarkKind,
    pub dimension: usize,
    optimum: Vec<f64>,
}

impl Benchmark {
    pub fn new(kind: BenchmarkKind, dimension: usize) -> Result<Self> {
        let min = if kind == BenchmarkKind::Rosenbrock { 2 } else { 1 };
        if dimension < min {
            return Err(Error::config("dimension", "too small for this benchmark"));
        }
        let optimum = match kind {
            BenchmarkKind::Rosenbrock => alloc::vec![0.5; dimension],
            BenchmarkKind::Sphere | BenchmarkKind::PlateauInvalid => {
                let mut v: Vec<f64> = (0..dimension).map(|i| 0.5 * math::sin(1.7 * (i + 1) as f64)).collect();
                if kind == BenchmarkKind::PlateauInvalid {
                    v[0] = 0.5;
                }
                v
            }
        };
        Ok(Benchmark { kind, dimension, optimum })
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn optimum(&self) -> &[f64] {
        &self.optimum
    }

    pub fn optimum_value(&self) -> f64 {
        match self.kind {
            BenchmarkKind::Sphere | BenchmarkKind::Rosenbrock => 0.0,
            BenchmarkKind::PlateauInvalid => 4.0 * self.dimension as f64,
        }
    }

    /// Whether `a` falls in the invalid region.
    pub fn is_invalid(&self, a: &[f64]) -> bool {
        self.kind == BenchmarkKind::PlateauInvalid && a[0].clamp(-1.0, 1.0) > INVALID_THRESHOLD
    }

    pub fn reward(&self, a: &[f64]) -> Result<f64> {
        Error::check_dim(self.dimension, a.len())?;
        if a.iter().any(|x| x.is_nan()) {
            return Err(Error::NonFinite("benchmark input".into()));
        }
        let x = |i: usize| a[i].clamp(-1.0, 1.0);
        let dist2 = || (0..self.dimension).map(|i| (x(i) - self.optimum[i]) * (x(i) - self.optimum[i])).sum::<f64>();
        Ok(match self.kind {
            BenchmarkKind::Sphere => -dist2(),
            BenchmarkKind::Rosenbrock => {
                -(0..self.dimension - 1)
                    .map(|i| {
                        let (u, v) = (2.0 * x(i), 2.0 * x(i + 1));
                        100.0 * (v - u * u) * (v - u * u) + (1.0 - u) * (1.0 - u)
                    })
                    .sum::<f64>()
            }
            BenchmarkKind::PlateauInvalid => {
                if self.is_invalid(a) {
                    0.0
                } else {
                    self.optimum_value() - dist2()
                }
            }
        })
    }

    /// Reward of the zero action, the reference point of [`Benchmark::normalized`].
    pub fn reference_value(&self) -> f64 {
        self.reward(&alloc::vec![0.0; self.dimension]).unwrap_or(0.0)
    }

    /// `(r - r(0)) / (r* - r(0))`: 0 at the start point, 1 at the optimum.
    pub fn normalized(&self, reward: f64) -> f64 {
        let r0 = self.reference_value();
        (reward - r0) / (self.optimum_value() - r0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimum_values() {
        for kind in BenchmarkKind::ALL {
            let b = Benchmark::new(kind, 36).unwrap();
            assert_eq!(b.reward(b.optimum()).unwrap(), b.optimum_value(), "{}", b.name());
            assert_eq!(BenchmarkKind::parse(kind.name()).unwrap(), kind);
        }
        assert!(BenchmarkKind::parse("ackley").is_err());
    }

    #[test]
    fn invalid_region_scores_zero() {
        let b = Benchmark::new(BenchmarkKind::PlateauInvalid, 4).unwrap();
        assert_eq!(b.reward(&[0.61, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(b.reward(&[0.6, 0.0, 0.0, 0.0]).unwrap() > 0.0);
    }

    #[test]
    fn normalized_endpoints() {
        let b = Benchmark::new(BenchmarkKind::Sphere, 36).unwrap();
        assert_eq!(b.normalized(b.reference_value()), 0.0);
        assert_eq!(b.normalized(0.0), 1.0);
    }
}
