//! Monte Carlo life-cycle rollouts with confidence intervals, and single
//! recorded policy realizations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::belief::{belief_update, update_predicted, Belief};
use crate::cases::condition::ConditionBasedPolicy;
use crate::error::{Error, Result};
use crate::model::{JointAction, JointObservation, PomdpModel};
use crate::solvers::Policy;

/// Decision rule used during a rollout. `last` is the most recent joint observation
/// together with the observation action that produced it.
pub trait RolloutPolicy: Sync {
    fn act(&self, model: &PomdpModel, belief: &Belief, last: Option<(usize, JointObservation)>) -> Result<JointAction>;
}

/// Greedy with respect to a lower α-vector set.
pub struct GreedyPolicy(pub Policy);

impl RolloutPolicy for GreedyPolicy {
    fn act(&self, _model: &PomdpModel, belief: &Belief, _last: Option<(usize, JointObservation)>) -> Result<JointAction> {
        self.0.action(belief)
    }
}

/// Fixed joint action at every step.
pub struct ScriptedPolicy(pub JointAction);

impl ScriptedPolicy {
    pub fn do_nothing(model: &PomdpModel) -> Result<Self> {
        let a_m = model.available_maintenance()[0];
        Ok(ScriptedPolicy(JointAction::new(a_m, model.observation_choices(a_m)[0])))
    }

    /// Most intrusive maintenance action (the last one available), without observation choice.
    pub fn always_repair(model: &PomdpModel) -> Result<Self> {
        let a_m = *model.available_maintenance().last().expect("validated model has actions");
        Ok(ScriptedPolicy(JointAction::new(a_m, model.observation_choices(a_m)[0])))
    }

    pub fn named(model: &PomdpModel, name: &str) -> Result<Self> {
        match name {
            "do-nothing" => Self::do_nothing(model),
            "always-repair" => Self::always_repair(model),
            other => Err(Error::Config(format!("unknown baseline policy '{other}'"))),
        }
    }
}

impl RolloutPolicy for ScriptedPolicy {
    fn act(&self, _model: &PomdpModel, _belief: &Belief, _last: Option<(usize, JointObservation)>) -> Result<JointAction> {
        Ok(self.0)
    }
}

/// Repairs each component whose last observed condition is in the repair set.
/// Acts on the first channel that reveals one outcome per joint condition
/// (observation action first, then the default channel); with nothing observed yet it does nothing.
pub struct ConditionRollout(pub ConditionBasedPolicy);

impl ConditionRollout {
    fn observed_conditions(model: &PomdpModel, last: Option<(usize, JointObservation)>) -> Option<Vec<usize>> {
        let layout = model.layout.as_ref()?;
        let (a_o, o) = last?;
        let n = layout.state_count();
        if model.observation_actions[a_o].observations.len() == n {
            Some(layout.decode_state(o.action_index))
        } else if model.default_observations.len() == n {
            Some(layout.decode_state(o.default_index))
        } else {
            None
        }
    }
}

impl RolloutPolicy for ConditionRollout {
    fn act(&self, model: &PomdpModel, _belief: &Belief, last: Option<(usize, JointObservation)>) -> Result<JointAction> {
        let layout = model
            .layout
            .as_ref()
            .ok_or_else(|| Error::Contract("condition-based policies need a factored model".into()))?;
        let local: Vec<usize> = match Self::observed_conditions(model, last) {
            Some(c) => c.iter().map(|&x| self.0.repair_on.get(x).copied().unwrap_or(false) as usize).collect(),
            None => vec![0; layout.components()],
        };
        let a_m = layout.encode_maintenance(&local);
        let choices = model.observation_choices(a_m);
        // the most informative listed choice: observe-all in factored settings
        let a_o = *choices
            .iter()
            .max_by_key(|&&a| model.observation_actions[a].observations.len())
            .ok_or_else(|| Error::Contract(format!("maintenance action {a_m} not available")))?;
        Ok(JointAction::new(a_m, a_o))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutOptions {
    pub episodes: usize,
    pub horizon: usize,
    pub seed: u64,
    pub confidence: f64,
    pub retain_returns: bool,
    /// Draw an observation of the initial state before the first decision.
    pub initial_observation: bool,
}

impl RolloutOptions {
    pub fn new(episodes: usize, horizon: usize, seed: u64) -> Self {
        RolloutOptions { episodes, horizon, seed, confidence: 0.95, retain_returns: false, initial_observation: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    pub episodes: usize,
    pub horizon: usize,
    pub mean: f64,
    pub std_error: f64,
    pub confidence: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub min: f64,
    pub max: f64,
    pub returns: Option<Vec<f64>>,
}

impl RolloutResult {
    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    /// Interval at another confidence level from the same samples.
    pub fn with_confidence(&self, confidence: f64) -> Result<Self> {
        let h = z_score(confidence)? * self.std_error;
        Ok(RolloutResult { confidence, ci_low: self.mean - h, ci_high: self.mean + h, ..self.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub state: usize,
    pub belief: Belief,
    pub action: JointAction,
    pub observation: JointObservation,
    /// Undiscounted `r(s, a)` with the observation cost included.
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTrace {
    pub initial: Option<(usize, JointObservation)>,
    pub steps: Vec<TraceStep>,
}

/// Two-sided normal quantile for the given confidence level.
pub fn z_score(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Config(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(n.inverse_cdf(0.5 + confidence / 2.0))
}

/// Smallest `H` with `γ^H · max|r| / (1 − γ) < resolution`.
pub fn default_horizon(model: &PomdpModel, resolution: f64) -> usize {
    let scale = model.max_abs_reward() / (1.0 - model.discount);
    if scale < resolution {
        return 1;
    }
    let h = ((resolution / scale).ln() / model.discount.ln()).floor() as usize + 1;
    h.max(1)
}

/// Truncation bound `γ^H · max|r| / (1 − γ)`.
pub fn truncation_bound(model: &PomdpModel, horizon: usize) -> f64 {
    model.discount.powi(horizon as i32) * model.max_abs_reward() / (1.0 - model.discount)
}

fn sample_index(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn sample_observation(rng: &mut ChaCha8Rng, model: &PomdpModel, s: usize, a_o: usize) -> JointObservation {
    let e = sample_index(rng, model.default_obs_model.row(s).iter().copied());
    let o = sample_index(rng, model.observation_actions[a_o].model.row(s).iter().copied());
    JointObservation::new(e, o)
}

fn sample_next(rng: &mut ChaCha8Rng, model: &PomdpModel, s: usize, a_m: usize) -> usize {
    let mut entries = Vec::new();
    model.transition[a_m].row(s).for_each_nonzero(|j, p| entries.push((j, p)));
    let k = sample_index(rng, entries.iter().map(|e| e.1));
    entries[k].0
}

fn episode_rng(seed: u64, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode as u64);
    rng
}

/// Observation channel used for the initial look: the single observation action
/// of a permanent setting, otherwise the default channel alone.
fn initial_channel(model: &PomdpModel) -> usize {
    if model.n_observation_actions() == 1 {
        0
    } else {
        model.trivial_observation_action().unwrap_or(0)
    }
}

fn run_episode(
    model: &PomdpModel,
    policy: &dyn RolloutPolicy,
    b0: &Belief,
    horizon: usize,
    initial_observation: bool,
    rng: &mut ChaCha8Rng,
    mut trace: Option<&mut PolicyTrace>,
) -> Result<f64> {
    let gamma = model.discount;
    let mut s = sample_index(rng, b0.probs().iter().copied());
    let mut belief = b0.clone();
    let mut last = None;
    if initial_observation {
        let a_o = initial_channel(model);
        let o = sample_observation(rng, model, s, a_o);
        belief = update_predicted(model, &belief, a_o, o)?;
        last = Some((a_o, o));
    }
    if let Some(t) = trace.as_deref_mut() {
        t.initial = last;
    }
    let mut total = 0.0;
    let mut weight = 1.0;
    for t in 0..horizon {
        let a = policy.act(model, &belief, last)?;
        let r = model.reward_maintenance.get(s, a.maintenance)
            + gamma * model.reward_observation.get(s, a.observation)
            + model.reward_damage[s];
        total += weight * r;
        let s_next = sample_next(rng, model, s, a.maintenance);
        let o = sample_observation(rng, model, s_next, a.observation);
        if let Some(tr) = trace.as_deref_mut() {
            tr.steps.push(TraceStep { t, state: s, belief: belief.clone(), action: a, observation: o, reward: r });
        }
        belief = belief_update(model, &belief, a, o)?;
        last = Some((a.observation, o));
        s = s_next;
        weight *= gamma;
    }
    Ok(total)
}

/// Mean discounted return of `policy` from `b0`. Episode `i` uses stream `i` of
/// the seeded generator, so results do not depend on thread count.
pub fn rollout(model: &PomdpModel, policy: &dyn RolloutPolicy, b0: &Belief, opts: &RolloutOptions) -> Result<RolloutResult> {
    model.check_belief(b0)?;
    if opts.episodes < 2 {
        return Err(Error::Config("at least two episodes are needed for an interval".into()));
    }
    let z = z_score(opts.confidence)?;
    let returns: Vec<f64> = (0..opts.episodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = episode_rng(opts.seed, i);
            run_episode(model, policy, b0, opts.horizon, opts.initial_observation, &mut rng, None)
        })
        .collect::<Result<_>>()?;
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let min = returns.iter().copied().fold(f64::INFINITY, f64::min);
    let max = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RolloutResult {
        episodes: opts.episodes,
        horizon: opts.horizon,
        mean,
        std_error: se,
        confidence: opts.confidence,
        ci_low: mean - z * se,
        ci_high: mean + z * se,
        min,
        max,
        returns: opts.retain_returns.then_some(returns),
    })
}

/// One recorded episode.
pub fn trace_realization(
    model: &PomdpModel,
    policy: &dyn RolloutPolicy,
    b0: &Belief,
    seed: u64,
    horizon: usize,
    initial_observation: bool,
) -> Result<PolicyTrace> {
    model.check_belief(b0)?;
    let mut trace = PolicyTrace { initial: None, steps: Vec::new() };
    let mut rng = episode_rng(seed, 0);
    run_episode(model, policy, b0, horizon, initial_observation, &mut rng, Some(&mut trace))?;
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedMetric {
    pub value: f64,
    pub half_width: f64,
    pub confidence: f64,
    pub first: RolloutResult,
    pub second: RolloutResult,
}

/// Difference of rollout means (second minus first) with an interval that treats
/// the two runs as independent.
pub fn estimate_metric_by_simulation(
    first: (&PomdpModel, &dyn RolloutPolicy),
    second: (&PomdpModel, &dyn RolloutPolicy),
    b0: &Belief,
    opts: &RolloutOptions,
) -> Result<SimulatedMetric> {
    let r1 = rollout(first.0, first.1, b0, opts)?;
    let r2 = rollout(second.0, second.1, b0, opts)?;
    let z = z_score(opts.confidence)?;
    Ok(SimulatedMetric {
        value: r2.mean - r1.mean,
        half_width: z * (r1.std_error.powi(2) + r2.std_error.powi(2)).sqrt(),
        confidence: opts.confidence,
        first: r1,
        second: r2,
    })
}
