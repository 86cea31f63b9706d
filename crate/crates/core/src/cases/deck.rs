//! Non-stationary corroding deck: condition x deterioration rate, augmented
//! with decision time and closed by an absorbing terminal state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, TransitionMatrix};
use crate::metrics::make_perm;
use crate::model::{JointAction, ObservationAction, PomdpModel};

use super::three_component::ControlVariant;

pub const DECK_MAINTENANCE: [&str; 4] = ["no-repair", "minor-repair", "major-repair", "replace"];
pub const DECK_OBSERVATION: [&str; 3] = ["no-observation", "visual", "monitoring"];

pub const VISUAL_OBSERVATION: [[f64; 4]; 4] =
    [[0.63, 0.37, 0.0, 0.0], [0.10, 0.63, 0.27, 0.0], [0.0, 0.10, 0.63, 0.27], [0.0, 0.0, 0.20, 0.80]];
pub const MONITORING_OBSERVATION: [[f64; 4]; 4] =
    [[0.80, 0.20, 0.0, 0.0], [0.05, 0.80, 0.15, 0.0], [0.0, 0.05, 0.80, 0.15], [0.0, 0.0, 0.10, 0.90]];
pub const DECK_MAINTENANCE_REWARD: [[f64; 4]; 4] = [
    [0.0, 0.0, 0.0, 0.0],
    [-60.0, -110.0, -160.0, -280.0],
    [-105.0, -195.0, -290.0, -390.0],
    [-820.0, -820.0, -820.0, -820.0],
];
pub const DECK_OBSERVATION_REWARD: [[f64; 4]; 3] = [[0.0; 4], [-4.5; 4], [-7.5; 4]];
const SYNTH_MAJOR_REPAIR: [[f64; 4]; 4] =
    [[1.0, 0.0, 0.0, 0.0], [0.95, 0.05, 0.0, 0.0], [0.85, 0.15, 0.0, 0.0], [0.75, 0.20, 0.05, 0.0]];
pub const DECK_DAMAGE_REWARD: [f64; 4] = [-5.0, -40.0, -120.0, -250.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeckModelSpec {
    pub conditions: usize,
    pub rates: usize,
    /// Number of decision epochs before the terminal state.
    pub horizon: usize,
    pub discount: f64,
    /// `[rate][condition]`: probability of dropping one condition level without repair.
    pub deterioration: Vec<Vec<f64>>,
    pub minor_repair: Vec<Vec<f64>>,
    pub major_repair: Vec<Vec<f64>>,
    pub major_rate_reduction: usize,
    /// `[maintenance action][condition]`.
    pub maintenance_reward: Vec<Vec<f64>>,
    /// `[observation action][condition]`.
    pub observation_reward: Vec<Vec<f64>>,
    pub damage_reward: Vec<f64>,
    pub visual: Vec<Vec<f64>>,
    pub monitoring: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeckShape {
    pub conditions: usize,
    pub rates: usize,
    pub horizon: usize,
}

impl Default for DeckShape {
    fn default() -> Self {
        DeckShape { conditions: 4, rates: 83, horizon: 42 }
    }
}

impl DeckModelSpec {
    pub fn state_count(&self) -> usize {
        self.conditions * self.rates * self.horizon + 1
    }

    pub fn state_index(&self, t: usize, rate: usize, condition: usize) -> usize {
        (t * self.rates + rate) * self.conditions + condition
    }

    pub fn terminal(&self) -> usize {
        self.state_count() - 1
    }

    /// `(t, rate, condition)` of a non-terminal state.
    pub fn decode(&self, s: usize) -> Option<(usize, usize, usize)> {
        if s >= self.terminal() {
            return None;
        }
        Some((s / (self.rates * self.conditions), s / self.conditions % self.rates, s % self.conditions))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SpecInvariantViolation(m));
        let c = self.conditions;
        if c < 2 || self.rates == 0 || self.horizon == 0 {
            return bad("deck needs at least two conditions, one rate and one epoch".into());
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad(format!("discount {} outside (0, 1)", self.discount));
        }
        if self.deterioration.len() != self.rates || self.deterioration.iter().any(|r| r.len() != c) {
            return bad("deterioration table must be rates x conditions".into());
        }
        for (tau, row) in self.deterioration.iter().enumerate() {
            if row.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
                return bad(format!("deterioration probability outside [0, 1] at rate {tau}"));
            }
            if row[c - 1] != 0.0 {
                return bad("the worst condition must be absorbing without repair".into());
            }
        }
        for (name, m) in [("minor repair", &self.minor_repair), ("major repair", &self.major_repair)] {
            if m.len() != c || m.iter().any(|r| r.len() != c) {
                return bad(format!("{name} block must be conditions x conditions"));
            }
            DenseMatrix::from_rows(m)?
                .check_stochastic(name)
                .map_err(|e| Error::SpecInvariantViolation(e.to_string()))?;
        }
        for (name, m) in [("visual", &self.visual), ("monitoring", &self.monitoring)] {
            if m.len() != c {
                return bad(format!("{name} observation matrix needs one row per condition"));
            }
            DenseMatrix::from_rows(m)?
                .check_stochastic(name)
                .map_err(|e| Error::SpecInvariantViolation(e.to_string()))?;
        }
        if self.maintenance_reward.len() != 4 || self.observation_reward.len() != 3 {
            return bad("deck rewards need 4 maintenance and 3 observation rows".into());
        }
        let rewards = self.maintenance_reward.iter().chain(&self.observation_reward).chain(std::iter::once(&self.damage_reward));
        for r in rewards {
            if r.len() != c || r.iter().any(|&v| v > 0.0 || !v.is_finite()) {
                return bad("deck rewards must be non-positive, one per condition".into());
            }
        }
        Ok(())
    }
}

/// Synthetic spec: deterioration probabilities rise monotonically with the rate,
/// with seed-dependent curvature; costs and observation matrices are the published ones.
pub fn synth_deck_spec(seed: u64, shape: DeckShape) -> DeckModelSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = shape.conditions;
    let curves: Vec<(f64, f64, f64)> = (0..c.saturating_sub(1))
        .map(|x| {
            let lo = 0.02 + 0.01 * x as f64;
            let hi = 0.30 - 0.04 * x as f64;
            let jitter = 1.0 + 0.1 * (rng.random::<f64>() - 0.5);
            let shape_exp = 0.6 + 0.4 * rng.random::<f64>();
            (lo, (hi * jitter).clamp(lo, 0.95), shape_exp)
        })
        .collect();
    let deterioration = (0..shape.rates)
        .map(|tau| {
            let u = (tau + 1) as f64 / shape.rates as f64;
            (0..c)
                .map(|x| if x + 1 == c { 0.0 } else {
                    let (lo, hi, e) = curves[x];
                    lo + (hi - lo) * u.powf(e)
                })
                .collect()
        })
        .collect();
    let minor_repair = (0..c)
        .map(|x| {
            let mut row = vec![0.0; c];
            if x == 0 {
                row[0] = 1.0;
            } else {
                row[x - 1] = 0.7;
                row[x] = 0.3;
            }
            row
        })
        .collect();
    let major_repair = if c == 4 {
        SYNTH_MAJOR_REPAIR.iter().map(|r| r.to_vec()).collect()
    } else {
        (0..c)
            .map(|x| {
                let mut row = vec![0.0; c];
                let up = (0.05 * x as f64).min(1.0);
                row[0] = 1.0 - up;
                row[1] += up;
                row
            })
            .collect()
    };
    let table4 = |m: &[[f64; 4]]| m.iter().map(|r| resize(r, c)).collect::<Vec<_>>();
    DeckModelSpec {
        conditions: c,
        rates: shape.rates,
        horizon: shape.horizon,
        discount: 0.95,
        deterioration,
        minor_repair,
        major_repair,
        major_rate_reduction: 3,
        maintenance_reward: table4(&DECK_MAINTENANCE_REWARD),
        observation_reward: table4(&DECK_OBSERVATION_REWARD),
        damage_reward: resize(&DECK_DAMAGE_REWARD, c),
        visual: if c == 4 { table4(&VISUAL_OBSERVATION) } else { identity_rows(c) },
        monitoring: if c == 4 { table4(&MONITORING_OBSERVATION) } else { identity_rows(c) },
    }
}

fn resize(r: &[f64], c: usize) -> Vec<f64> {
    (0..c).map(|i| r[i.min(r.len() - 1)]).collect()
}

fn identity_rows(c: usize) -> Vec<Vec<f64>> {
    (0..c).map(|i| (0..c).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Flat time-augmented model. Setting 1 has the ten optional-inspection actions
/// (replacement is never paired with an observation); setting 2 keeps the monitoring
/// channel as a costless permanent observation.
pub fn build_deck_model(spec: &DeckModelSpec, setting: ControlVariant) -> Result<PomdpModel> {
    spec.validate()?;
    let n = spec.state_count();
    let c = spec.conditions;
    let terminal = spec.terminal();
    let mut transition = Vec::with_capacity(4);
    for a in 0..4 {
        let mut triplets = Vec::with_capacity(n * 2);
        for s in 0..terminal {
            let (t, tau, x) = spec.decode(s).expect("non-terminal");
            if t + 1 == spec.horizon {
                triplets.push((s, terminal, 1.0));
                continue;
            }
            let aged = (tau + 1).min(spec.rates - 1);
            let (next_tau, row): (usize, Vec<f64>) = match a {
                0 => {
                    let q = spec.deterioration[tau][x];
                    let mut row = vec![0.0; c];
                    row[x] = 1.0 - q;
                    if q > 0.0 {
                        row[x + 1] = q;
                    }
                    (aged, row)
                }
                1 => (aged, spec.minor_repair[x].clone()),
                2 => (tau.saturating_sub(spec.major_rate_reduction), spec.major_repair[x].clone()),
                _ => {
                    let mut row = vec![0.0; c];
                    row[0] = 1.0;
                    (0, row)
                }
            };
            for (xn, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    triplets.push((s, spec.state_index(t + 1, next_tau, xn), p));
                }
            }
        }
        triplets.push((terminal, terminal, 1.0));
        transition.push(TransitionMatrix::from_triplets(n, &triplets)?);
    }
    let per_condition = |s: usize, v: &[f64]| spec.decode(s).map(|(_, _, x)| v[x]).unwrap_or(0.0);
    let mut reward_m = DenseMatrix::zeros(n, 4);
    let mut reward_o = DenseMatrix::zeros(n, 3);
    for s in 0..n {
        for a in 0..4 {
            reward_m.set(s, a, per_condition(s, &spec.maintenance_reward[a]));
        }
        for o in 0..3 {
            reward_o.set(s, o, per_condition(s, &spec.observation_reward[o]));
        }
    }
    let reward_d = (0..n).map(|s| per_condition(s, &spec.damage_reward)).collect();
    let obs_matrix = |rows: &[Vec<f64>]| -> Result<DenseMatrix> {
        let mut m = DenseMatrix::zeros(n, c);
        for s in 0..n {
            match spec.decode(s) {
                Some((_, _, x)) => {
                    for (o, &p) in rows[x].iter().enumerate() {
                        m.set(s, o, p);
                    }
                }
                None => m.set(s, 0, 1.0),
            }
        }
        Ok(m)
    };
    let labels: Vec<String> = (1..=c).map(|x| format!("c{x}")).collect();
    let observation_actions = vec![
        ObservationAction::trivial(DECK_OBSERVATION[0], n),
        ObservationAction { name: DECK_OBSERVATION[1].into(), observations: labels.clone(), model: obs_matrix(&spec.visual)? },
        ObservationAction { name: DECK_OBSERVATION[2].into(), observations: labels, model: obs_matrix(&spec.monitoring)? },
    ];
    let mut actions = Vec::new();
    for a in 0..3 {
        for o in 0..3 {
            actions.push(JointAction::new(a, o));
        }
    }
    actions.push(JointAction::new(3, 0));
    let states = (0..n)
        .map(|s| match spec.decode(s) {
            Some((t, tau, x)) => format!("t{t}-r{}-c{}", tau + 1, x + 1),
            None => "terminal".into(),
        })
        .collect();
    let model = PomdpModel {
        states,
        maintenance_actions: DECK_MAINTENANCE.iter().map(|s| s.to_string()).collect(),
        observation_actions,
        default_observations: vec!["none".into()],
        default_obs_model: DenseMatrix::from_vec(n, 1, vec![1.0; n])?,
        transition,
        reward_maintenance: reward_m,
        reward_observation: reward_o,
        reward_damage: reward_d,
        discount: spec.discount,
        actions,
        initial_belief: Belief::corner(n, spec.state_index(0, 0, 0)),
        layout: None,
    };
    model.validate()?;
    match setting {
        ControlVariant::OptionalInspection => Ok(model),
        ControlVariant::PermanentMonitoring => Ok(make_perm(&model, 2)?.model),
    }
}
