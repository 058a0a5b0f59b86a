//! The optimization loop: CEM over normalized actions, with part of every
//! population scored by the reward model once it has data to learn from.
//!
//! Each iteration `j`:
//! 1. pick the model rate `rho` (0 during warm-up);
//! 2. sample `K` actions and split them into model and ground-truth subsets;
//! 3. score the ground-truth subset with the evaluator and the rest with the
//!    model, optionally calibrating the model scores against this
//!    iteration's ground truth;
//! 4. push ground-truth pairs, and only those, into the replay buffer;
//! 5. select elites, log, refit the distribution;
//! 6. train the model once the buffer holds more than a batch.
//!
//! All randomness is derived from the master seed with [`seed::derive`], so
//! the state after any iteration fully determines the rest of the run.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::bench::Benchmark;
use crate::cem::{self, GaussianSearchState, SigmaRule};
use crate::design_space::{self, DesignVector};
use crate::objective::{self, EvalOutcome, RewardWeights};
use crate::reward_model::{ModelConfig, ReplayBuffer, RewardModel};
use crate::schedule::{self, RateSchedule};
use crate::seed::{self, Purpose};
use crate::sim::{self, DensityClass, PhaseConfig, SimConfig, SimObject, TeleopRecord};
use crate::{math, Error, Result};

/// Bumped whenever [`CampaignState`] changes shape.
pub const STATE_VERSION: u32 = 1;

/// Scores normalized actions with ground truth.
pub trait Evaluator: Sync {
    fn dimension(&self) -> usize;

    /// Ground-truth interactions one candidate costs.
    fn objects_per_candidate(&self) -> usize;

    /// Reward of `action`; `rng_seed` drives any random choice inside.
    fn evaluate(&self, action: &[f64], rng_seed: u64) -> Result<f64>;

    /// Map to a scale where "95% of the final value" is meaningful.
    fn normalize(&self, reward: f64) -> f64 {
        reward
    }
}

impl Evaluator for Benchmark {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn objects_per_candidate(&self) -> usize {
        1
    }

    fn evaluate(&self, action: &[f64], _rng_seed: u64) -> Result<f64> {
        self.reward(action)
    }

    fn normalize(&self, reward: f64) -> f64 {
        self.normalized(reward)
    }
}

/// Which demonstration each object is replayed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordMode {
    /// Always the first record.
    Single,
    /// A seeded uniform choice per object and call.
    #[default]
    Multi,
}

/// How per-object rewards combine into one candidate reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    Sum,
    /// The sum divided by the object count.
    #[default]
    Mean,
}

/// Ground truth from the planar surrogate over an object set.
#[derive(Debug, Clone)]
pub struct SurrogateEvaluator {
    pub base: DesignVector,
    pub objects: Vec<SimObject>,
    /// Demonstrations per object, aligned with `objects`.
    pub records: Vec<Vec<TeleopRecord>>,
    pub sim: SimConfig,
    pub weights: RewardWeights,
    pub record_mode: RecordMode,
    pub aggregation: Aggregation,
}

impl SurrogateEvaluator {
    pub fn new(
        base: DesignVector,
        objects: Vec<SimObject>,
        records: Vec<Vec<TeleopRecord>>,
        sim: SimConfig,
        weights: RewardWeights,
    ) -> Result<Self> {
        if objects.is_empty() || objects.len() != records.len() {
            return Err(Error::config("objects", "need at least one object and records for each"));
        }
        for (o, rs) in objects.iter().zip(&records) {
            o.check()?;
            if rs.is_empty() {
                return Err(Error::config("records", alloc::format!("object `{}` has no records", o.id)));
            }
            for r in rs {
                r.check()?;
            }
        }
        sim.check()?;
        weights.check()?;
        Ok(SurrogateEvaluator {
            base,
            objects,
            records,
            sim,
            weights,
            record_mode: RecordMode::default(),
            aggregation: Aggregation::default(),
        })
    }

    /// Bundled objects with their scripted demonstrations.
    pub fn bundled(base: DesignVector, weights: RewardWeights) -> Result<Self> {
        let sim = SimConfig::default();
        let objects = sim::bundled_objects();
        let records = objects.iter().map(|o| sim::scripted_records(o, &sim)).collect();
        SurrogateEvaluator::new(base, objects, records, sim, weights)
    }

    /// Record index used for object `i`.
    pub fn record_choice(&self, object: usize, rng_seed: u64) -> usize {
        match self.record_mode {
            RecordMode::Single => 0,
            RecordMode::Multi => {
                use rand::Rng;
                let n = self.records[object].len();
                seed::stream(rng_seed, Purpose::RecordChoice, 0, object as u64).random_range(0..n)
            }
        }
    }

    /// Per-object training outcomes; invalid designs short-circuit without
    /// any rollout.
    pub fn outcomes(&self, design: &DesignVector, rng_seed: u64) -> Result<Vec<EvalOutcome>> {
        if !design_space::validate(design).valid {
            return Ok(alloc::vec![EvalOutcome::invalid_design(); self.objects.len()]);
        }
        self.objects
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let r = &self.records[i][self.record_choice(i, rng_seed)];
                sim::rollout(design, r, o, &self.sim, &PhaseConfig::training()).map(|rep| rep.outcome)
            })
            .collect()
    }

    pub fn design_reward(&self, design: &DesignVector, rng_seed: u64) -> Result<f64> {
        let r = objective::design_reward(&self.outcomes(design, rng_seed)?, &self.weights)?;
        Ok(match self.aggregation {
            Aggregation::Sum => r,
            Aggregation::Mean => r / self.objects.len() as f64,
        })
    }
}

/// Disturbance-test result for one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSuccess {
    pub object_id: String,
    pub class: DensityClass,
    pub trials: usize,
    pub successes: usize,
}

impl ObjectSuccess {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

impl SurrogateEvaluator {
    /// Runs the disturbance test `trials` times per object. Trial `t` replays
    /// record `t mod n` with an impulse drawn from `(seed, object, t)`.
    pub fn success_report(&self, design: &DesignVector, trials: usize, rng_seed: u64) -> Result<Vec<ObjectSuccess>> {
        self.objects
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let mut successes = 0;
                for t in 0..trials {
                    let record = &self.records[i][t % self.records[i].len()];
                    let phase = PhaseConfig::test(seed::derive(rng_seed, Purpose::Impulse, i as u64, t as u64));
                    let rep = sim::rollout(design, record, o, &self.sim, &phase)?;
                    successes += usize::from(objective::grasp_success(&rep.outcome));
                }
                Ok(ObjectSuccess { object_id: o.id.clone(), class: o.class, trials, successes })
            })
            .collect()
    }
}

impl Evaluator for SurrogateEvaluator {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn objects_per_candidate(&self) -> usize {
        self.objects.len()
    }

    fn evaluate(&self, action: &[f64], rng_seed: u64) -> Result<f64> {
        let design = design_space::decode_action(&self.base, action)?;
        self.design_reward(&design, rng_seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Ground truth for every candidate.
    PureCem,
    /// Scheduled mix of model and ground truth.
    #[default]
    Hybrid,
    /// Model only once the warm-up is over.
    Rho1,
    /// No distribution update: every population comes from the initial one.
    Random,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::PureCem, Mode::Hybrid, Mode::Rho1, Mode::Random];

    pub fn name(self) -> &'static str {
        match self {
            Mode::PureCem => "pure-cem",
            Mode::Hybrid => "hybrid",
            Mode::Rho1 => "rho1",
            Mode::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config("mode", alloc::format!("unknown mode `{s}`")))
    }

    fn uses_model(self) -> bool {
        matches!(self, Mode::Hybrid | Mode::Rho1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub rho_min: f64,
    pub rho_max: f64,
    pub eta: f64,
    /// Ramp length; the iteration budget when absent.
    pub horizon: Option<u64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { rho_min: 0.1, rho_max: 0.7, eta: 0.9, horizon: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    /// `K`
    pub population: usize,
    /// `N_e`; `ceil(0.15 K)` when absent.
    pub elites: Option<usize>,
    /// `J`
    pub iterations: u64,
    pub initial_sigma: f64,
    pub sigma_rule: SigmaRule,
    pub sigma_floor: f64,
    pub mode: Mode,
    pub schedule: ScheduleConfig,
    pub model: ModelConfig,
    /// Restrict elites to ground-truth-scored candidates.
    pub ground_truth_elites: bool,
    /// Affinely map model scores onto this iteration's ground truth.
    pub calibrate: bool,
    /// Re-score the final elites with ground truth (not counted).
    pub audit_final_elites: bool,
    pub seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            population: 45,
            elites: None,
            iterations: 100,
            initial_sigma: cem::DEFAULT_INITIAL_SIGMA,
            sigma_rule: SigmaRule::default(),
            sigma_floor: cem::SIGMA_FLOOR,
            mode: Mode::default(),
            schedule: ScheduleConfig::default(),
            model: ModelConfig::default(),
            ground_truth_elites: false,
            calibrate: false,
            audit_final_elites: true,
            seed: 0,
        }
    }
}

impl CampaignConfig {
    /// Model, schedule and calibration settings that make the hybrid pay off
    /// on smooth benchmarks: a small-window Adam fit, a high model rate with
    /// fast smoothing, and calibrated model scores.
    pub fn tuned_hybrid() -> Self {
        CampaignConfig {
            model: ModelConfig::local_fit(),
            schedule: ScheduleConfig { rho_min: 0.7, rho_max: 0.9, eta: 0.5, horizon: None },
            calibrate: true,
            ..CampaignConfig::default()
        }
    }

    pub fn elite_count(&self) -> usize {
        self.elites.unwrap_or_else(|| cem::default_elite_count(self.population))
    }

    pub fn horizon(&self) -> u64 {
        self.schedule.horizon.unwrap_or(self.iterations)
    }

    pub fn check(&self) -> Result<()> {
        let ne = self.elite_count();
        if ne < 2 || ne > self.population {
            return Err(Error::config("elites", "need K >= N_e >= 2"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be at least 1"));
        }
        if !(self.initial_sigma >= 0.0) || !self.initial_sigma.is_finite() {
            return Err(Error::config("initial_sigma", "must be finite and non-negative"));
        }
        if !(self.sigma_floor >= 0.0) || !self.sigma_floor.is_finite() {
            return Err(Error::config("sigma_floor", "must be finite and non-negative"));
        }
        RateSchedule::new(self.schedule.rho_min, self.schedule.rho_max, self.horizon(), self.schedule.eta)?;
        self.model.check()
    }
}

/// One row of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationLog {
    pub iter: u64,
    /// Cumulative ground-truth interactions.
    pub env_interactions: u64,
    /// Over ground-truth-scored elites; absent when there are none.
    pub elite_mean: Option<f64>,
    pub elite_max: Option<f64>,
    /// Mean training loss this iteration; absent before training starts.
    pub rm_loss: Option<f64>,
    pub rho: f64,
    /// Scale after this iteration's update.
    pub sigma: f64,
    /// Filled in by drivers that time iterations.
    #[serde(default)]
    pub wall_s: Option<f64>,
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignState {
    pub version: u32,
    pub config: CampaignConfig,
    pub dimension: usize,
    pub search: GaussianSearchState,
    pub schedule: RateSchedule,
    pub buffer: ReplayBuffer,
    pub model: Option<RewardModel>,
    /// Candidates scored by ground truth so far.
    pub ground_truth_candidates: u64,
    pub env_interactions: u64,
    pub best_action: Option<Vec<f64>>,
    pub best_reward: Option<f64>,
    /// Elites of the latest iteration, best first.
    pub last_elites: Vec<Vec<f64>>,
    pub log: Vec<IterationLog>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    /// `mu^J`: the action returned as the final design.
    pub final_action: Vec<f64>,
    pub best_action: Option<Vec<f64>>,
    pub best_reward: Option<f64>,
    /// Mean ground-truth reward of the final elites, when audited.
    pub final_elite_audit: Option<f64>,
    pub log: Vec<IterationLog>,
    pub ground_truth_candidates: u64,
    pub buffer_inserted: u64,
}

pub struct Campaign {
    state: CampaignState,
}

impl Campaign {
    pub fn new(config: CampaignConfig, dimension: usize) -> Result<Self> {
        config.check()?;
        if dimension == 0 {
            return Err(Error::config("dimension", "must be positive"));
        }
        let search = GaussianSearchState::new(alloc::vec![0.0; dimension], config.initial_sigma)?;
        let schedule = RateSchedule::new(config.schedule.rho_min, config.schedule.rho_max, config.horizon(), config.schedule.eta)?;
        let model = if config.mode.uses_model() {
            Some(RewardModel::new(dimension, config.model.clone(), seed::derive(config.seed, Purpose::ModelInit, 0, 0))?)
        } else {
            None
        };
        let buffer = ReplayBuffer::new(config.model.capacity);
        Ok(Campaign {
            state: CampaignState {
                version: STATE_VERSION,
                config,
                dimension,
                search,
                schedule,
                buffer,
                model,
                ground_truth_candidates: 0,
                env_interactions: 0,
                best_action: None,
                best_reward: None,
                last_elites: Vec::new(),
                log: Vec::new(),
            },
        })
    }

    /// Continues from a saved state.
    pub fn resume(state: CampaignState) -> Result<Self> {
        if state.version != STATE_VERSION {
            return Err(Error::invalid(alloc::format!(
                "checkpoint version {} does not match {}",
                state.version, STATE_VERSION
            )));
        }
        state.config.check()?;
        Error::check_dim(state.dimension, state.search.dimension())?;
        if state.log.len() as u64 > state.config.iterations {
            return Err(Error::invalid("checkpoint is past its iteration budget"));
        }
        Ok(Campaign { state })
    }

    pub fn state(&self) -> &CampaignState {
        &self.state
    }

    /// Last completed iteration (0 before the first).
    pub fn iteration(&self) -> u64 {
        self.state.log.len() as u64
    }

    pub fn is_done(&self) -> bool {
        self.iteration() >= self.state.config.iterations
    }

    /// Lets a driver attach timing to the latest row.
    pub fn set_wall_time(&mut self, seconds: f64) {
        if let Some(row) = self.state.log.last_mut() {
            row.wall_s = Some(seconds);
        }
    }

    fn rate(&mut self, j: u64) -> Result<f64> {
        let st = &mut self.state;
        let trained = st.model.as_ref().is_some_and(|m| m.steps > 0);
        let warm = trained && st.buffer.is_ready(st.config.model.batch_size);
        Ok(match st.config.mode {
            Mode::PureCem | Mode::Random => 0.0,
            Mode::Rho1 if warm => 1.0,
            Mode::Hybrid if warm => st.schedule.advance(j)?,
            _ => 0.0,
        })
    }

    /// Runs one iteration and returns its log row.
    pub fn step<E: Evaluator + ?Sized>(&mut self, evaluator: &E) -> Result<&IterationLog> {
        if self.is_done() {
            return Err(Error::invalid("campaign already finished"));
        }
        Error::check_dim(self.state.dimension, evaluator.dimension())?;
        let j = self.iteration() + 1;
        let rho = self.rate(j)?;
        let st = &mut self.state;
        let cfg = &st.config;
        let master = cfg.seed;
        let k = cfg.population;

        let sampler = if cfg.mode == Mode::Random {
            GaussianSearchState::new(alloc::vec![0.0; st.dimension], cfg.initial_sigma)?
        } else {
            st.search.clone()
        };
        let population = cem::sample_population(&sampler, k, seed::derive(master, Purpose::Sampling, j, 0));
        let model_idx = schedule::split_population(rho, k, seed::derive(master, Purpose::Split, j, 0));
        let mut is_model = alloc::vec![false; k];
        for &i in &model_idx {
            is_model[i] = true;
        }
        let gt_idx: Vec<usize> = (0..k).filter(|&i| !is_model[i]).collect();

        let gt_rewards = evaluate_all(evaluator, &population, &gt_idx, master, j);
        let mut rewards = alloc::vec![0.0; k];
        for (&i, &r) in gt_idx.iter().zip(&gt_rewards) {
            rewards[i] = r;
        }
        if !model_idx.is_empty() {
            let model = st.model.as_ref().ok_or_else(|| Error::invalid("model-scored candidates without a model"))?;
            let predicted = population.iter().map(|a| model.predict(a)).collect::<Result<Vec<f64>>>()?;
            let map = if cfg.calibrate {
                calibration(&gt_idx.iter().map(|&i| predicted[i]).collect::<Vec<_>>(), &gt_rewards)
            } else {
                None
            };
            for &i in &model_idx {
                rewards[i] = map.map_or(predicted[i], |(a, b, m)| a + b * (predicted[i] - m));
            }
        }

        for (&i, &r) in gt_idx.iter().zip(&gt_rewards) {
            st.buffer.push(population[i].clone(), r);
            if st.best_reward.is_none_or(|b| r > b) {
                st.best_reward = Some(r);
                st.best_action = Some(population[i].clone());
            }
        }
        st.ground_truth_candidates += gt_idx.len() as u64;
        st.env_interactions += (gt_idx.len() * evaluator.objects_per_candidate()) as u64;

        let n_elite = cfg.elite_count();
        let pool = if cfg.ground_truth_elites && !gt_idx.is_empty() {
            let sub: Vec<f64> = gt_idx.iter().map(|&i| rewards[i]).collect();
            let e = cem::select_elites(&sub, n_elite.min(sub.len()))?;
            cem::ElitePool { indices: e.indices.iter().map(|&s| gt_idx[s]).collect(), rewards: e.rewards }
        } else {
            cem::select_elites(&rewards, n_elite)?
        };
        let gt_elite: Vec<f64> = pool.indices.iter().filter(|&&i| !is_model[i]).map(|&i| rewards[i]).collect();

        if cfg.mode != Mode::Random {
            st.search = cem::update_distribution(&st.search, &pool.actions(&population), cfg.sigma_rule, cfg.sigma_floor)?;
        } else {
            st.search.iteration += 1;
        }
        st.last_elites = pool.indices.iter().map(|&i| population[i].clone()).collect();

        let mut rm_loss = None;
        if let Some(model) = st.model.as_mut() {
            rm_loss = model.train(&st.buffer, seed::derive(master, Purpose::Batch, j, 0))?;
        }

        st.log.push(IterationLog {
            iter: j,
            env_interactions: st.env_interactions,
            elite_mean: (!gt_elite.is_empty()).then(|| math::mean(&gt_elite)),
            elite_max: gt_elite.iter().copied().reduce(f64::max),
            rm_loss,
            rho,
            sigma: st.search.sigma,
            wall_s: None,
        });
        Ok(self.state.log.last().expect("just pushed"))
    }

    pub fn run<E: Evaluator + ?Sized>(&mut self, evaluator: &E) -> Result<()> {
        while !self.is_done() {
            self.step(evaluator)?;
        }
        Ok(())
    }

    /// Final design, best-ever design and the optional elite audit.
    pub fn finish<E: Evaluator + ?Sized>(self, evaluator: &E) -> Result<CampaignResult> {
        let st = self.state;
        let audit = if st.config.audit_final_elites && !st.last_elites.is_empty() {
            let idx: Vec<usize> = (0..st.last_elites.len()).collect();
            let after = st.config.iterations + 1;
            Some(math::mean(&evaluate_all(evaluator, &st.last_elites, &idx, st.config.seed, after)))
        } else {
            None
        };
        Ok(CampaignResult {
            final_action: st.search.mu,
            best_action: st.best_action,
            best_reward: st.best_reward,
            final_elite_audit: audit,
            log: st.log,
            ground_truth_candidates: st.ground_truth_candidates,
            buffer_inserted: st.buffer.inserted(),
        })
    }
}

/// Runs a whole campaign from scratch.
pub fn run_campaign<E: Evaluator + ?Sized>(config: CampaignConfig, evaluator: &E) -> Result<CampaignResult> {
    let mut c = Campaign::new(config, evaluator.dimension())?;
    c.run(evaluator)?;
    c.finish(evaluator)
}

/// Ground-truth rewards for `population[idx]`, in `idx` order. A failed
/// evaluation scores 0.
fn evaluate_all<E: Evaluator + ?Sized>(evaluator: &E, population: &[Vec<f64>], idx: &[usize], master: u64, j: u64) -> Vec<f64> {
    let one = |&i: &usize| {
        let s = seed::derive(master, Purpose::Evaluation, j, i as u64);
        match evaluator.evaluate(&population[i], s) {
            Ok(r) if r.is_finite() => r,
            _ => 0.0,
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        idx.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        idx.iter().map(one).collect()
    }
}

/// Least-squares slope of ground truth on predictions over the ground-truth
/// members, clamped at 0: returns `(mean truth, slope, mean prediction)`.
/// Needs three or more pairs.
fn calibration(predicted: &[f64], truth: &[f64]) -> Option<(f64, f64, f64)> {
    if predicted.len() < 3 {
        return None;
    }
    let (mp, mt) = (math::mean(predicted), math::mean(truth));
    let n = predicted.len() as f64;
    let var: f64 = predicted.iter().map(|p| (p - mp) * (p - mp)).sum::<f64>() / n;
    let cov: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - mp) * (t - mt)).sum::<f64>() / n;
    let slope = if var > 0.0 { (cov / var).max(0.0) } else { 0.0 };
    Some((mt, slope, mp))
}
