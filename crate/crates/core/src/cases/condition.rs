//! Condition-based maintenance: repair decided from the observed condition of
//! each component, the same rule for every component.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PomdpModel;

use super::three_component::accuracy_matrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionBasedPolicy {
    /// `repair_on[c]`: repair a component whose observed condition is `c` (zero-based).
    pub repair_on: Vec<bool>,
}

impl ConditionBasedPolicy {
    pub fn never(levels: usize) -> Self {
        ConditionBasedPolicy { repair_on: vec![false; levels] }
    }

    /// Parses one-based condition lists such as `"3"`, `"2,3"` or `"none"`.
    pub fn parse(levels: usize, text: &str) -> Result<Self> {
        let mut repair_on = vec![false; levels];
        let t = text.trim();
        if t.is_empty() || t.eq_ignore_ascii_case("none") {
            return Ok(ConditionBasedPolicy { repair_on });
        }
        for part in t.split(',') {
            let c: usize = part.trim().parse().map_err(|_| Error::Config(format!("bad condition '{part}'")))?;
            if c == 0 || c > levels {
                return Err(Error::Config(format!("condition {c} outside 1..={levels}")));
            }
            repair_on[c - 1] = true;
        }
        Ok(ConditionBasedPolicy { repair_on })
    }

    pub fn label(&self) -> String {
        let on: Vec<String> = self.repair_on.iter().enumerate().filter(|(_, r)| **r).map(|(c, _)| (c + 1).to_string()).collect();
        if on.is_empty() { "never repair".into() } else { format!("repair on observed {}", on.join(",")) }
    }
}

/// All `2^levels` maps, ordered by bit mask (bit `c` set = repair on condition `c`).
pub fn enumerate_condition_policies(levels: usize) -> Vec<ConditionBasedPolicy> {
    (0..1usize << levels)
        .map(|mask| ConditionBasedPolicy { repair_on: (0..levels).map(|c| mask >> c & 1 == 1).collect() })
        .collect()
}

/// Exact per-state values of a condition-based policy when every component's
/// current condition is seen through an accuracy-`p` channel before acting.
pub fn condition_policy_state_values(model: &PomdpModel, accuracy: f64, policy: &ConditionBasedPolicy) -> Result<Vec<f64>> {
    let layout = model
        .layout
        .as_ref()
        .ok_or_else(|| Error::Contract("condition-based policies need a factored model".into()))?;
    let levels = layout.levels[0];
    if layout.levels.iter().any(|&l| l != levels) || layout.local_maintenance != 2 || policy.repair_on.len() != levels {
        return Err(Error::Contract("policy does not match the component layout".into()));
    }
    let k = layout.components();
    let n = model.n_states();
    let obs = accuracy_matrix(levels, accuracy);
    let gamma = model.discount;
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for s in 0..n {
        let cond = layout.decode_state(s);
        let repair_prob: Vec<f64> = cond
            .iter()
            .map(|&c| (0..levels).filter(|&o| policy.repair_on[o]).map(|o| obs[c][o]).sum())
            .collect();
        for mask in 0..1usize << k {
            let local: Vec<usize> = (0..k).map(|i| mask >> (k - 1 - i) & 1).collect();
            let w: f64 = local.iter().zip(&repair_prob).map(|(&r, &p)| if r == 1 { p } else { 1.0 - p }).product();
            if w == 0.0 {
                continue;
            }
            let a_m = layout.encode_maintenance(&local);
            rhs[s] += w * (model.reward_maintenance.get(s, a_m) + model.reward_damage[s]);
            model.transition[a_m].row(s).for_each_nonzero(|j, p| a[(s, j)] -= gamma * w * p);
        }
    }
    let v = a.lu().solve(&rhs).ok_or_else(|| Error::Contract("singular policy-evaluation system".into()))?;
    Ok(v.iter().copied().collect())
}

/// Expected discounted value from the model's initial belief.
pub fn evaluate_condition_policy(model: &PomdpModel, accuracy: f64, policy: &ConditionBasedPolicy) -> Result<f64> {
    let v = condition_policy_state_values(model, accuracy, policy)?;
    Ok(model.initial_belief.probs().iter().zip(&v).map(|(b, x)| b * x).sum())
}

/// Every policy with its value, and the index of the best (lowest index on ties).
pub fn rank_condition_policies(model: &PomdpModel, accuracy: f64) -> Result<(Vec<(ConditionBasedPolicy, f64)>, usize)> {
    let levels = model.layout.as_ref().map(|l| l.levels[0]).unwrap_or(0);
    let mut out = Vec::new();
    let mut best = 0;
    for p in enumerate_condition_policies(levels) {
        let v = evaluate_condition_policy(model, accuracy, &p)?;
        if v > out.get(best).map(|x: &(ConditionBasedPolicy, f64)| x.1).unwrap_or(f64::NEG_INFINITY) {
            best = out.len();
        }
        out.push((p, v));
    }
    Ok((out, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::three_component::{build_three_component, ControlVariant};
    use crate::solvers::blind_lower_bound;

    #[test]
    fn never_repair_equals_blind_do_nothing() {
        let m = build_three_component(0.96, ControlVariant::OptionalInspection).unwrap();
        let v = evaluate_condition_policy(&m, 0.96, &ConditionBasedPolicy::never(3)).unwrap();
        let blind = blind_lower_bound(&m);
        assert!((v - blind[0].values[0]).abs() < 1e-6, "{v} vs {}", blind[0].values[0]);
    }

    #[test]
    fn parse_and_label() {
        let p = ConditionBasedPolicy::parse(3, "3").unwrap();
        assert_eq!(p.repair_on, vec![false, false, true]);
        assert_eq!(p.label(), "repair on observed 3");
        assert!(ConditionBasedPolicy::parse(3, "4").is_err());
        assert_eq!(enumerate_condition_policies(3).len(), 8);
    }

    #[test]
    fn perfect_channel_matches_state_feedback() {
        // with p = 1 the policy acts on the true state, so a direct chain evaluation agrees
        let m = build_three_component(1.0, ControlVariant::OptionalInspection).unwrap();
        let p = ConditionBasedPolicy::parse(3, "3").unwrap();
        let v = condition_policy_state_values(&m, 1.0, &p).unwrap();
        let layout = m.layout.clone().unwrap();
        let mut w = vec![0.0; 27];
        for _ in 0..2000 {
            w = (0..27)
                .map(|s| {
                    let local: Vec<usize> = layout.decode_state(s).iter().map(|&c| (c == 2) as usize).collect();
                    let a = layout.encode_maintenance(&local);
                    m.reward_maintenance.get(s, a) + m.reward_damage[s] + 0.95 * m.transition[a].row(s).dot(&w)
                })
                .collect();
        }
        for s in 0..27 {
            assert!((v[s] - w[s]).abs() < 1e-8);
        }
    }
}
