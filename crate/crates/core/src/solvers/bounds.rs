//! Initial bounds: blind-policy lower bound, MDP upper bound, and the
//! sawtooth interpolation over stored upper points.

use serde::{Deserialize, Serialize};

use crate::belief::{AlphaVector, Belief, SparseBelief};
use crate::error::{Error, Result};
use crate::model::{JointAction, PomdpModel};

use super::engine;

/// Lower α-vector set plus the sawtooth upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueBounds {
    pub lower: Vec<AlphaVector>,
    pub upper_corners: Vec<f64>,
    pub upper_points: Vec<(SparseBelief, f64)>,
}

impl ValueBounds {
    pub fn lower_value(&self, b: &Belief) -> Result<f64> {
        Ok(crate::belief::value_of_belief(&self.lower, b)?.0)
    }

    pub fn upper_value(&self, b: &Belief) -> f64 {
        sawtooth_value(self, b)
    }

    pub fn gap(&self, b: &Belief) -> Result<f64> {
        Ok((self.upper_value(b) - self.lower_value(b)?).max(0.0))
    }
}

/// Sawtooth upper bound at `b` from the corner values and the stored points.
pub fn sawtooth_value(bounds: &ValueBounds, b: &Belief) -> f64 {
    engine::sawtooth(&bounds.upper_corners, &bounds.upper_points, &b.to_sparse())
}

const EVAL_TOL: f64 = 1e-9;

/// One vector per available maintenance action: the value of repeating that action
/// forever, paired with its first allowed observation action.
pub fn blind_lower_bound(model: &PomdpModel) -> Vec<AlphaVector> {
    model
        .available_maintenance()
        .into_iter()
        .map(|a_m| {
            let a = JointAction::new(a_m, model.observation_choices(a_m)[0]);
            AlphaVector::new(evaluate_fixed_action(model, a), a)
        })
        .collect()
}

/// Policy evaluation of a stationary single action. Iterates upwards from
/// `min r / (1 - γ)`, so every iterate is itself a lower bound.
fn evaluate_fixed_action(model: &PomdpModel, a: JointAction) -> Vec<f64> {
    let r = model.reward_vector(a);
    let gamma = model.discount;
    let p = &model.transition[a.maintenance];
    let floor = r.iter().cloned().fold(f64::INFINITY, f64::min) / (1.0 - gamma);
    let mut v = vec![floor; r.len()];
    loop {
        let next: Vec<f64> = (0..r.len()).map(|s| r[s] + gamma * p.row(s).dot(&v)).collect();
        let diff = next.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        v = next;
        if diff <= EVAL_TOL * (1.0 - gamma) {
            return v;
        }
    }
}

/// Fully observable value iteration over maintenance actions (observation costs excluded).
/// Iterates downwards from zero, so every iterate is an upper bound when rewards are costs.
pub fn mdp_value_iteration(model: &PomdpModel) -> Vec<f64> {
    let n = model.n_states();
    let gamma = model.discount;
    let actions = model.available_maintenance();
    let mut v = vec![0.0; n];
    loop {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                actions
                    .iter()
                    .map(|&a| {
                        model.reward_maintenance.get(s, a)
                            + model.reward_damage[s]
                            + gamma * model.transition[a].row(s).dot(&v)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let diff = next.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        v = next;
        if diff <= EVAL_TOL * (1.0 - gamma) {
            return v;
        }
    }
}

/// Greedy maintenance action of the fully observable problem at state `s`.
pub fn mdp_greedy_action(model: &PomdpModel, v: &[f64], s: usize) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for a in model.available_maintenance() {
        let q = model.reward_maintenance.get(s, a) + model.reward_damage[s] + model.discount * model.transition[a].row(s).dot(v);
        if q > best.0 {
            best = (q, a);
        }
    }
    best.1
}

pub(crate) fn check_bounds_shape(model: &PomdpModel, bounds: &ValueBounds) -> Result<()> {
    let n = model.n_states();
    if bounds.upper_corners.len() != n
        || bounds.lower.iter().any(|a| a.values.len() != n || model.check_action(a.action).is_err())
        || bounds.upper_points.iter().any(|(b, _)| b.n != n)
    {
        return Err(Error::Contract("bounds do not match the model".into()));
    }
    Ok(())
}
