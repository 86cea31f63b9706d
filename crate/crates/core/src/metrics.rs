//! Derived control settings and value-of-information metrics, step-wise and
//! over the life cycle.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::belief::{belief_predict, value_of_belief, AlphaVector, Belief, LIKELIHOOD_FLOOR};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::{JointAction, ObservationAction, PomdpModel};
use crate::solvers::{mdp_value_iteration, solve, SolveOutcome, SolverConfig, SolverKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    DefaultDerived,
    PermDerived,
    MdpDerived,
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSetting {
    pub label: String,
    pub model: PomdpModel,
    pub provenance: Provenance,
}

impl ControlSetting {
    pub fn original(label: impl Into<String>, model: PomdpModel) -> Self {
        ControlSetting { label: label.into(), model, provenance: Provenance::Original }
    }

    pub fn explicit(label: impl Into<String>, model: PomdpModel) -> Self {
        ControlSetting { label: label.into(), model, provenance: Provenance::Explicit }
    }
}

/// Root value of one solved setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueReport {
    pub label: String,
    pub root: Belief,
    pub root_value: f64,
    pub gap: f64,
    pub config_digest: String,
}

impl ValueReport {
    pub fn new(label: &str, outcome: &SolveOutcome, kind: SolverKind, config: &SolverConfig) -> Self {
        ValueReport {
            label: label.to_string(),
            root: outcome.root.clone(),
            root_value: outcome.lower(),
            gap: outcome.gap(),
            config_digest: config_digest(kind, config),
        }
    }
}

/// Short hex fingerprint of a solver configuration.
pub fn config_digest(kind: SolverKind, config: &SolverConfig) -> String {
    let mut h = DefaultHasher::new();
    kind.to_string().hash(&mut h);
    serde_json::to_string(config).unwrap_or_default().hash(&mut h);
    format!("{:016x}", h.finish())
}

/// A life-cycle metric with its error budget (sum of the two solver gaps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricEstimate {
    pub value: f64,
    pub uncertainty: f64,
    pub value1: f64,
    pub value2: f64,
    pub gap1: f64,
    pub gap2: f64,
}

fn maintenance_only_actions(model: &PomdpModel) -> Vec<JointAction> {
    model.available_maintenance().into_iter().map(|m| JointAction::new(m, 0)).collect()
}

fn with_observation(model: &PomdpModel, action: ObservationAction) -> PomdpModel {
    let n = model.n_states();
    let mut out = model.clone();
    out.observation_actions = vec![action];
    out.reward_observation = DenseMatrix::zeros(n, 1);
    out.actions = maintenance_only_actions(model);
    out
}

/// Default setting: the trivial observation action only, so the agent sees
/// nothing beyond the default channel.
pub fn make_default(model: &PomdpModel) -> Result<ControlSetting> {
    model.validate()?;
    let derived = if model.is_default_setting() {
        model.clone()
    } else {
        with_observation(model, ObservationAction::trivial("no-observation", model.n_states()))
    };
    Ok(ControlSetting { label: "default".into(), model: derived, provenance: Provenance::DefaultDerived })
}

/// Permanent setting: `a_o` becomes the single, costless observation action.
pub fn make_perm(model: &PomdpModel, a_o: usize) -> Result<ControlSetting> {
    model.validate()?;
    let action = model
        .observation_actions
        .get(a_o)
        .ok_or_else(|| Error::Contract(format!("observation action {a_o} out of range")))?;
    if action.is_unit() {
        return Err(Error::TrivialActionSelected(a_o));
    }
    let derived = with_observation(model, action.clone());
    Ok(ControlSetting {
        label: format!("permanent {}", action.name),
        model: derived,
        provenance: Provenance::PermDerived,
    })
}

/// Fully observable setting: one costless identity observation.
pub fn make_mdp(model: &PomdpModel) -> Result<ControlSetting> {
    model.validate()?;
    let n = model.n_states();
    let action = ObservationAction {
        name: "perfect".into(),
        observations: model.states.clone(),
        model: DenseMatrix::identity(n),
    };
    Ok(ControlSetting { label: "perfect information".into(), model: with_observation(model, action), provenance: Provenance::MdpDerived })
}

/// Checks that two settings share states, discount, dynamics, maintenance and
/// damage rewards, the default channel and the available maintenance actions.
pub fn check_compatible(a: &PomdpModel, b: &PomdpModel) -> Result<()> {
    let fail = |what: &str| Err(Error::IncompatibleSettings(what.to_string()));
    const TOL: f64 = 1e-12;
    if a.n_states() != b.n_states() {
        return fail("state counts differ");
    }
    if (a.discount - b.discount).abs() > TOL {
        return fail("discount factors differ");
    }
    if a.n_maintenance() != b.n_maintenance() || a.available_maintenance() != b.available_maintenance() {
        return fail("maintenance action sets differ");
    }
    if a.transition.iter().zip(&b.transition).any(|(p, q)| p.max_abs_diff(q) > TOL) {
        return fail("transition models differ");
    }
    if a.reward_maintenance.max_abs_diff(&b.reward_maintenance) > TOL {
        return fail("maintenance rewards differ");
    }
    if a.reward_damage.iter().zip(&b.reward_damage).any(|(x, y)| (x - y).abs() > TOL) {
        return fail("damage rewards differ");
    }
    if a.default_obs_model.cols() != b.default_obs_model.cols() || a.default_obs_model.max_abs_diff(&b.default_obs_model) > TOL {
        return fail("default observation channels differ");
    }
    Ok(())
}

fn value(lower: &[AlphaVector], b: &Belief) -> Result<f64> {
    Ok(value_of_belief(lower, b)?.0)
}

/// `Σ_o p(o) V(b^o)` over default outcomes, joined with the outcomes of `a_o` when given.
fn expected_posterior_value(model: &PomdpModel, pred: &Belief, a_o: Option<usize>, lower: &[AlphaVector]) -> Result<f64> {
    let n = model.n_states();
    let n_e = model.default_observations.len();
    let n_o = a_o.map(|a| model.observation_actions[a].observations.len()).unwrap_or(1);
    let mut total = 0.0;
    let mut post = vec![0.0; n];
    for e in 0..n_e {
        for o in 0..n_o {
            let mut p = 0.0;
            for s in 0..n {
                let mut w = pred.probs()[s] * model.default_obs_model.get(s, e);
                if let Some(a) = a_o {
                    w *= model.observation_actions[a].model.get(s, o);
                }
                post[s] = w;
                p += w;
            }
            if p <= LIKELIHOOD_FLOOR {
                continue;
            }
            let b = Belief::from_weights(post.clone())?;
            total += p * value(lower, &b)?;
        }
    }
    Ok(total)
}

fn check_inputs(model: &PomdpModel, b: &Belief, a_m: usize, a_o: Option<usize>) -> Result<()> {
    model.check_belief(b)?;
    model.check_action(JointAction::new(a_m, a_o.unwrap_or(0)))
}

/// Step-wise value of information of observation action `a_o` after maintenance `a_m`.
pub fn step_voi(model: &PomdpModel, lower: &[AlphaVector], b: &Belief, a_m: usize, a_o: usize) -> Result<f64> {
    check_inputs(model, b, a_m, Some(a_o))?;
    if model.observation_actions[a_o].is_unit() {
        return Ok(0.0);
    }
    let pred = belief_predict(model, b, a_m)?;
    Ok(expected_posterior_value(model, &pred, Some(a_o), lower)? - expected_posterior_value(model, &pred, None, lower)?)
}

/// Step-wise value of perfect information after maintenance `a_m`.
pub fn step_vopi(model: &PomdpModel, lower: &[AlphaVector], b: &Belief, a_m: usize) -> Result<f64> {
    check_inputs(model, b, a_m, None)?;
    let n = model.n_states();
    let pred = belief_predict(model, b, a_m)?;
    let mut perfect = 0.0;
    for (s, &p) in pred.probs().iter().enumerate() {
        if p > 0.0 {
            perfect += p * value(lower, &Belief::corner(n, s))?;
        }
    }
    Ok(perfect - expected_posterior_value(model, &pred, None, lower)?)
}

/// Step-wise value of information net of the expected observation cost `|b · R_O|`.
pub fn net_step_voi(model: &PomdpModel, lower: &[AlphaVector], b: &Belief, a_m: usize, a_o: usize) -> Result<f64> {
    let voi = step_voi(model, lower, b, a_m, a_o)?;
    let cost: f64 = b.probs().iter().enumerate().map(|(s, p)| p * model.reward_observation.get(s, a_o)).sum();
    Ok(voi - cost.abs())
}

/// Right-hand side of the Bellman equation over the available joint actions.
pub fn bellman_direct(model: &PomdpModel, lower: &[AlphaVector], b: &Belief) -> Result<f64> {
    model.check_belief(b)?;
    let mut best = f64::NEG_INFINITY;
    for &a in &model.actions {
        let r: f64 = b.probs().iter().zip(model.reward_vector(a)).map(|(p, r)| p * r).sum();
        let pred = belief_predict(model, b, a.maintenance)?;
        let future = expected_posterior_value(model, &pred, Some(a.observation), lower)?;
        best = best.max(r + model.discount * future);
    }
    Ok(best)
}

/// The same right-hand side written as the default-channel value plus the
/// best net step-wise value of information of the available observation actions.
pub fn bellman_via_netvoi(model: &PomdpModel, lower: &[AlphaVector], b: &Belief) -> Result<f64> {
    model.check_belief(b)?;
    let mut best = f64::NEG_INFINITY;
    for a_m in model.available_maintenance() {
        let base: f64 = b
            .probs()
            .iter()
            .enumerate()
            .map(|(s, p)| p * (model.reward_maintenance.get(s, a_m) + model.reward_damage[s]))
            .sum();
        let pred = belief_predict(model, b, a_m)?;
        let default_future = expected_posterior_value(model, &pred, None, lower)?;
        let mut info = f64::NEG_INFINITY;
        for a_o in model.observation_choices(a_m) {
            info = info.max(net_step_voi(model, lower, b, a_m, a_o)?);
        }
        best = best.max(base + model.discount * (default_future + info));
    }
    Ok(best)
}

/// Value when the state is revealed after the first decision:
/// `max_aM { b·(R_M + R_D) + γ b^aM · V_MDP }`.
pub fn mdp_belief_value(model: &PomdpModel, v_mdp: &[f64], b: &Belief) -> Result<f64> {
    model.check_belief(b)?;
    let mut best = f64::NEG_INFINITY;
    for a_m in model.available_maintenance() {
        let base: f64 = b
            .probs()
            .iter()
            .enumerate()
            .map(|(s, p)| p * (model.reward_maintenance.get(s, a_m) + model.reward_damage[s]))
            .sum();
        let pred = belief_predict(model, b, a_m)?;
        let future: f64 = pred.probs().iter().zip(v_mdp).map(|(p, v)| p * v).sum();
        best = best.max(base + model.discount * future);
    }
    Ok(best)
}

fn solve_pair(
    m1: &PomdpModel,
    m2: &PomdpModel,
    b: &Belief,
    kind: SolverKind,
    config: &SolverConfig,
) -> Result<(SolveOutcome, SolveOutcome)> {
    let (r1, r2) = rayon::join(|| solve(kind, m1, config, b, None), || solve(kind, m2, config, b, None));
    Ok((r1?, r2?))
}

/// `V_2(b) − V_1(b)` from two solves with the same solver and settings.
pub fn life_cycle_gain(
    setting1: &ControlSetting,
    setting2: &ControlSetting,
    b: &Belief,
    kind: SolverKind,
    config: &SolverConfig,
) -> Result<MetricEstimate> {
    check_compatible(&setting1.model, &setting2.model)?;
    setting1.model.check_belief(b)?;
    let (o1, o2) = solve_pair(&setting1.model, &setting2.model, b, kind, config)?;
    Ok(gain_from_outcomes(&o1, &o2))
}

pub fn gain_from_outcomes(o1: &SolveOutcome, o2: &SolveOutcome) -> MetricEstimate {
    MetricEstimate {
        value: o2.lower() - o1.lower(),
        uncertainty: o1.gap() + o2.gap(),
        value1: o1.lower(),
        value2: o2.lower(),
        gap1: o1.gap(),
        gap2: o2.gap(),
    }
}

/// Life-cycle value of information of the model's observation scheme.
pub fn voi(model: &PomdpModel, b: &Belief, kind: SolverKind, config: &SolverConfig) -> Result<MetricEstimate> {
    let default = make_default(model)?;
    life_cycle_gain(&default, &ControlSetting::original("original", model.clone()), b, kind, config)
}

/// Life-cycle value of perfect information relative to the default setting.
pub fn vopi(model: &PomdpModel, b: &Belief, kind: SolverKind, config: &SolverConfig) -> Result<MetricEstimate> {
    let default = make_default(model)?;
    default.model.check_belief(b)?;
    let outcome = solve(kind, &default.model, config, b, None)?;
    let v_mdp = mdp_value_iteration(model);
    let top = mdp_belief_value(model, &v_mdp, b)?;
    Ok(MetricEstimate {
        value: top - outcome.lower(),
        uncertainty: outcome.gap(),
        value1: outcome.lower(),
        value2: top,
        gap1: outcome.gap(),
        gap2: 0.0,
    })
}

/// Value of permanent monitoring: permanent setting against optional inspection.
pub fn voshm(
    optional: &ControlSetting,
    permanent: &ControlSetting,
    b: &Belief,
    kind: SolverKind,
    config: &SolverConfig,
) -> Result<MetricEstimate> {
    life_cycle_gain(optional, permanent, b, kind, config)
}

/// Gain from making observation action `a_o` continuously and freely available.
pub fn rvoci(model: &PomdpModel, a_o: usize, b: &Belief, kind: SolverKind, config: &SolverConfig) -> Result<MetricEstimate> {
    let perm = make_perm(model, a_o)?;
    voshm(&ControlSetting::original("original", model.clone()), &perm, b, kind, config)
}

/// One accuracy level of the three-component sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub v1: f64,
    pub v2: f64,
    pub v_blind: f64,
    pub v_mdp: f64,
    pub gap1: f64,
    pub gap2: f64,
    pub gap_blind: f64,
}

impl SweepRow {
    pub fn voi1(&self) -> f64 {
        self.v1 - self.v_blind
    }

    pub fn voi2(&self) -> f64 {
        self.v2 - self.v_blind
    }

    pub fn voshm(&self) -> f64 {
        self.v2 - self.v1
    }

    pub fn vopi(&self) -> f64 {
        self.v_mdp - self.v_blind
    }

    pub fn voshm_budget(&self) -> f64 {
        self.gap1 + self.gap2
    }
}

/// Settings 1 and 2 of the three-component system over a grid of accuracies,
/// with the blind and perfect-information references.
pub fn accuracy_sweep(grid: &[f64], kind: SolverKind, config: &SolverConfig) -> Result<Vec<SweepRow>> {
    use crate::cases::three_component::{build_three_component, ControlVariant};
    let reference = build_three_component(grid.first().copied().unwrap_or(1.0), ControlVariant::OptionalInspection)?;
    let root = reference.initial_belief.clone();
    let blind = make_default(&reference)?;
    let blind_outcome = solve(kind, &blind.model, config, &root, None)?;
    let v_mdp = mdp_belief_value(&reference, &mdp_value_iteration(&reference), &root)?;
    grid.iter()
        .map(|&p| {
            let m1 = build_three_component(p, ControlVariant::OptionalInspection)?;
            let m2 = build_three_component(p, ControlVariant::PermanentMonitoring)?;
            let (o1, o2) = solve_pair(&m1, &m2, &root, kind, config)?;
            Ok(SweepRow {
                p,
                v1: o1.lower(),
                v2: o2.lower(),
                v_blind: blind_outcome.lower(),
                v_mdp,
                gap1: o1.gap(),
                gap2: o2.gap(),
                gap_blind: blind_outcome.gap(),
            })
        })
        .collect()
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("bad grid '{text}'"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts.iter().map(|x| x.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        let (start, stop, step) = (v[0], v[1], v[2]);
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        // rounded to 1e-12 so that 0.5 + 10 * 0.05 prints as 1
        return Ok((0..=count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect());
    }
    text.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect()
}
