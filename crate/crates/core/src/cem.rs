//! Cross-entropy method over normalized action space.

use alloc::vec::Vec;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{math, seed, Error, Result};

pub const SIGMA_FLOOR: f64 = 1e-6;

/// Initial scale in normalized units: a quarter of the mean bound width (2).
pub const DEFAULT_INITIAL_SIGMA: f64 = 0.5;

/// `ceil(0.15 K)`, never below 2.
pub fn default_elite_count(population: usize) -> usize {
    (math::ceil(0.15 * population as f64) as usize).max(2)
}

/// How `sigma` is refitted to the elites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaRule {
    /// `sqrt(mean ||x - mu||^2)` over the elites.
    Literal,
    /// The literal value divided by `sqrt(d)`: the isotropic per-coordinate RMS.
    #[default]
    PerCoordinate,
    /// Independent per-coordinate standard deviations.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSearchState {
    pub mu: Vec<f64>,
    pub sigma: f64,
    pub iteration: u64,
    /// Present only under [`SigmaRule::Diagonal`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_diag: Option<Vec<f64>>,
}

impl GaussianSearchState {
    pub fn new(mu: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("sigma must be finite and non-negative"));
        }
        if mu.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("mu".into()));
        }
        Ok(GaussianSearchState { mu, sigma, iteration: 0, sigma_diag: None })
    }

    pub fn dimension(&self) -> usize {
        self.mu.len()
    }

    fn scale(&self, i: usize) -> f64 {
        match &self.sigma_diag {
            Some(diag) => diag[i],
            None => self.sigma,
        }
    }
}

/// `K` i.i.d. draws from `N(mu, sigma^2 I)`; identical seeds give identical
/// populations.
pub fn sample_population(state: &GaussianSearchState, population: usize, rng_seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(rng_seed);
    let d = state.dimension();
    (0..population)
        .map(|_| {
            (0..d)
                .map(|i| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    state.mu[i] + state.scale(i) * z
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElitePool {
    /// Population indices, best first.
    pub indices: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl ElitePool {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn actions<'a>(&self, population: &'a [Vec<f64>]) -> Vec<&'a [f64]> {
        self.indices.iter().map(|&i| population[i].as_slice()).collect()
    }
}

/// The `n_elite` highest rewards; ties go to the lower index. NaN ranks below
/// every number.
pub fn select_elites(rewards: &[f64], n_elite: usize) -> Result<ElitePool> {
    if n_elite == 0 {
        return Err(Error::invalid("elite count must be positive"));
    }
    if n_elite > rewards.len() {
        return Err(Error::invalid("elite count exceeds population size"));
    }
    let key = |r: f64| if r.is_nan() { f64::NEG_INFINITY } else { r };
    let mut order: Vec<usize> = (0..rewards.len()).collect();
    // stable sort keeps index order among equal rewards
    order.sort_by(|&a, &b| key(rewards[b]).total_cmp(&key(rewards[a])));
    order.truncate(n_elite);
    let rewards = order.iter().map(|&i| rewards[i]).collect();
    Ok(ElitePool { indices: order, rewards })
}

/// Refits the distribution to `elites` and increments the iteration.
pub fn update_distribution(
    state: &GaussianSearchState,
    elites: &[&[f64]],
    rule: SigmaRule,
    sigma_floor: f64,
) -> Result<GaussianSearchState> {
    if elites.is_empty() {
        return Err(Error::invalid("no elites"));
    }
    let d = state.dimension();
    for e in elites {
        Error::check_dim(d, e.len())?;
    }
    let n = elites.len() as f64;
    let mut mu = alloc::vec![0.0; d];
    for e in elites {
        for (m, x) in mu.iter_mut().zip(e.iter()) {
            *m += x;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);

    let mut var = alloc::vec![0.0; d];
    for e in elites {
        for i in 0..d {
            let dev = e[i] - mu[i];
            var[i] += dev * dev;
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    let mean_sq_norm: f64 = var.iter().sum();

    let (sigma, sigma_diag) = match rule {
        SigmaRule::Literal => (math::sqrt(mean_sq_norm), None),
        SigmaRule::PerCoordinate => (math::sqrt(mean_sq_norm / d.max(1) as f64), None),
        SigmaRule::Diagonal => {
            let diag: Vec<f64> = var.iter().map(|v| math::sqrt(*v).max(sigma_floor)).collect();
            (math::sqrt(mean_sq_norm / d.max(1) as f64), Some(diag))
        }
    };
    if mu.iter().any(|x| !x.is_finite()) || !sigma.is_finite() {
        return Err(Error::NonFinite("distribution update".into()));
    }
    Ok(GaussianSearchState {
        mu,
        sigma: sigma.max(sigma_floor),
        iteration: state.iteration + 1,
        sigma_diag,
    })
}
