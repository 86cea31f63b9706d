//! The decision-problem tuple: states, factored maintenance/observation
//! actions, transition and observation models, decomposed rewards.

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{contract, Error, Result};
use crate::linalg::{DenseMatrix, TransitionMatrix};

/// A (maintenance, observation) action pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointAction {
    pub maintenance: usize,
    pub observation: usize,
}

impl JointAction {
    pub fn new(maintenance: usize, observation: usize) -> Self {
        JointAction { maintenance, observation }
    }
}

/// A default observation paired with the outcome of the chosen observation action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointObservation {
    pub default_index: usize,
    pub action_index: usize,
}

impl JointObservation {
    pub fn new(default_index: usize, action_index: usize) -> Self {
        JointObservation { default_index, action_index }
    }
}

/// An observation action with its own outcome set and likelihood model `p(o | s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationAction {
    pub name: String,
    pub observations: Vec<String>,
    /// |S| x |observations|, row-stochastic.
    pub model: DenseMatrix,
}

impl ObservationAction {
    /// The "look at nothing" action: one outcome, certain under every state.
    pub fn trivial(name: impl Into<String>, n_states: usize) -> Self {
        ObservationAction {
            name: name.into(),
            observations: vec!["none".into()],
            model: DenseMatrix::from_vec(n_states, 1, vec![1.0; n_states]).expect("shape"),
        }
    }

    pub fn is_unit(&self) -> bool {
        self.observations.len() == 1
    }
}

/// Component structure of a multi-component system, kept so that
/// condition-based policies can decode joint states, actions and observations.
///
/// All encodings are mixed-radix with component 0 as the most significant digit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredLayout {
    pub levels: Vec<usize>,
    pub local_maintenance: usize,
}

impl FactoredLayout {
    pub fn components(&self) -> usize {
        self.levels.len()
    }

    pub fn state_count(&self) -> usize {
        self.levels.iter().product()
    }

    pub fn decode_state(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.levels.len()];
        for (k, &l) in self.levels.iter().enumerate().rev() {
            out[k] = index % l;
            index /= l;
        }
        out
    }

    pub fn encode_state(&self, conditions: &[usize]) -> usize {
        conditions.iter().zip(&self.levels).fold(0, |acc, (&c, &l)| acc * l + c)
    }

    pub fn encode_maintenance(&self, local: &[usize]) -> usize {
        local.iter().fold(0, |acc, &a| acc * self.local_maintenance + a)
    }

    pub fn decode_maintenance(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.levels.len()];
        for k in (0..self.levels.len()).rev() {
            out[k] = index % self.local_maintenance;
            index /= self.local_maintenance;
        }
        out
    }
}

/// The full POMDP tuple in its decomposed form.
///
/// Rewards follow the convention `r(s, a) = R_M(s, a_M) + γ R_O(s, a_O) + R_D(s)`:
/// the observation cost is discounted because its outcome arrives at the next step.
#[derive(Debug, Clone, PartialEq)]
pub struct PomdpModel {
    pub states: Vec<String>,
    pub maintenance_actions: Vec<String>,
    pub observation_actions: Vec<ObservationAction>,
    pub default_observations: Vec<String>,
    /// |S| x |Ω_e|, received under every action.
    pub default_obs_model: DenseMatrix,
    /// One |S| x |S| matrix per maintenance action.
    pub transition: Vec<TransitionMatrix>,
    /// |S| x |A_M|.
    pub reward_maintenance: DenseMatrix,
    /// |S| x |A_O|.
    pub reward_observation: DenseMatrix,
    pub reward_damage: Vec<f64>,
    pub discount: f64,
    /// Joint actions available to the agent (a subset of A_M x A_O).
    pub actions: Vec<JointAction>,
    pub initial_belief: Belief,
    pub layout: Option<FactoredLayout>,
}

impl PomdpModel {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_maintenance(&self) -> usize {
        self.maintenance_actions.len()
    }

    pub fn n_observation_actions(&self) -> usize {
        self.observation_actions.len()
    }

    /// Number of joint observations `|Ω_e| * |Ω_{a_O}|` for an observation action.
    pub fn joint_observation_count(&self, a_o: usize) -> usize {
        self.default_observations.len() * self.observation_actions[a_o].observations.len()
    }

    pub fn joint_observations(&self, a_o: usize) -> impl Iterator<Item = JointObservation> + '_ {
        let k = self.observation_actions[a_o].observations.len();
        (0..self.default_observations.len()).flat_map(move |e| (0..k).map(move |o| JointObservation::new(e, o)))
    }

    /// `p(o_e | s') p(o_O | s', a_O)`.
    #[inline]
    pub fn observation_probability(&self, s_next: usize, a_o: usize, o: JointObservation) -> f64 {
        self.default_obs_model.get(s_next, o.default_index)
            * self.observation_actions[a_o].model.get(s_next, o.action_index)
    }

    /// Costless with a unit outcome set.
    pub fn is_trivial_observation(&self, a_o: usize) -> bool {
        self.observation_actions[a_o].is_unit() && self.reward_observation.column(a_o).iter().all(|&r| r == 0.0)
    }

    /// First trivial observation action, if any.
    pub fn trivial_observation_action(&self) -> Option<usize> {
        (0..self.n_observation_actions()).find(|&a| self.is_trivial_observation(a))
    }

    pub fn is_default_setting(&self) -> bool {
        self.n_observation_actions() == 1 && self.is_trivial_observation(0)
    }

    /// Full reward vector `r(·, a)` as charged by the belief-MDP.
    pub fn reward_vector(&self, a: JointAction) -> Vec<f64> {
        (0..self.n_states())
            .map(|s| {
                self.reward_maintenance.get(s, a.maintenance)
                    + self.discount * self.reward_observation.get(s, a.observation)
                    + self.reward_damage[s]
            })
            .collect()
    }

    pub fn action_index(&self, a: JointAction) -> Option<usize> {
        self.actions.iter().position(|x| *x == a)
    }

    pub fn check_action(&self, a: JointAction) -> Result<()> {
        if a.maintenance >= self.n_maintenance() || a.observation >= self.n_observation_actions() {
            return Err(contract(format!("action {a:?} out of range")));
        }
        Ok(())
    }

    pub fn check_belief(&self, b: &Belief) -> Result<()> {
        if b.len() != self.n_states() {
            return Err(contract(format!("belief has {} entries, model has {} states", b.len(), self.n_states())));
        }
        Ok(())
    }

    pub fn check_observation(&self, a_o: usize, o: JointObservation) -> Result<()> {
        if o.default_index >= self.default_observations.len()
            || o.action_index >= self.observation_actions[a_o].observations.len()
        {
            return Err(contract(format!("observation {o:?} out of range for observation action {a_o}")));
        }
        Ok(())
    }

    /// Largest reward magnitude over all states and available actions.
    pub fn max_abs_reward(&self) -> f64 {
        self.actions
            .iter()
            .flat_map(|&a| self.reward_vector(a))
            .fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Checks every structural invariant of the tuple.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_states();
        let bad = |m: String| Err(Error::InvalidModel(m));
        if n == 0 {
            return bad("model has no states".into());
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad(format!("discount must lie in (0, 1), got {}", self.discount));
        }
        if self.maintenance_actions.is_empty() || self.observation_actions.is_empty() {
            return bad("model needs at least one maintenance and one observation action".into());
        }
        if self.default_observations.is_empty() {
            return bad("default observation set is empty".into());
        }
        if self.transition.len() != self.n_maintenance() {
            return bad(format!(
                "{} transition matrices for {} maintenance actions",
                self.transition.len(),
                self.n_maintenance()
            ));
        }
        for (a, p) in self.transition.iter().enumerate() {
            if p.n() != n {
                return bad(format!("transition for action {a} is {}x{}, expected {n}x{n}", p.n(), p.n()));
            }
            p.check_stochastic(&format!("transition[{}]", self.maintenance_actions[a]))?;
        }
        if self.default_obs_model.rows() != n || self.default_obs_model.cols() != self.default_observations.len() {
            return bad("default observation model has the wrong shape".into());
        }
        self.default_obs_model.check_stochastic("default observation model")?;
        for oa in &self.observation_actions {
            if oa.observations.is_empty() {
                return bad(format!("observation action {} has no outcomes", oa.name));
            }
            if oa.model.rows() != n || oa.model.cols() != oa.observations.len() {
                return bad(format!("observation model of {} has the wrong shape", oa.name));
            }
            oa.model.check_stochastic(&format!("observation model[{}]", oa.name))?;
        }
        if self.reward_maintenance.rows() != n || self.reward_maintenance.cols() != self.n_maintenance() {
            return bad("maintenance reward matrix has the wrong shape".into());
        }
        if self.reward_observation.rows() != n || self.reward_observation.cols() != self.n_observation_actions() {
            return bad("observation reward matrix has the wrong shape".into());
        }
        if self.reward_damage.len() != n {
            return bad("damage reward vector has the wrong length".into());
        }
        let all_rewards = self
            .reward_maintenance
            .data()
            .iter()
            .chain(self.reward_observation.data())
            .chain(&self.reward_damage);
        for &r in all_rewards {
            if !r.is_finite() || r > 0.0 {
                return bad(format!("rewards must be finite and non-positive, found {r}"));
            }
        }
        for (a, oa) in self.observation_actions.iter().enumerate() {
            if oa.is_unit() && a == 0 && self.reward_observation.column(0).iter().any(|&r| r != 0.0) {
                return bad("a unit-outcome observation action at index 0 must be costless".into());
            }
        }
        if self.actions.is_empty() {
            return bad("no joint actions available".into());
        }
        for (i, a) in self.actions.iter().enumerate() {
            self.check_action(*a).map_err(|_| Error::InvalidModel(format!("joint action {a:?} out of range")))?;
            if self.actions[..i].contains(a) {
                return bad(format!("joint action {a:?} listed twice"));
            }
        }
        if self.initial_belief.len() != n {
            return bad("initial belief has the wrong length".into());
        }
        if let Some(layout) = &self.layout {
            if layout.state_count() != n {
                return bad("factored layout does not match the state count".into());
            }
        }
        Ok(())
    }

    /// Every (a_M, a_O) pair.
    pub fn full_action_product(n_maintenance: usize, n_observation: usize) -> Vec<JointAction> {
        (0..n_maintenance)
            .flat_map(|m| (0..n_observation).map(move |o| JointAction::new(m, o)))
            .collect()
    }

    /// Maintenance actions that appear in at least one available joint action, in order.
    pub fn available_maintenance(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.actions.iter().map(|a| a.maintenance).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Observation actions available together with a maintenance action.
    pub fn observation_choices(&self, a_m: usize) -> Vec<usize> {
        self.actions.iter().filter(|a| a.maintenance == a_m).map(|a| a.observation).collect()
    }

    pub fn action_label(&self, a: JointAction) -> String {
        format!("{}+{}", self.maintenance_actions[a.maintenance], self.observation_actions[a.observation].name)
    }
}

/// Field-by-field builder for hand-made models (tests, toy problems).
pub struct ModelBuilder {
    model: PomdpModel,
}

impl ModelBuilder {
    /// A model with `n` states, one "do-nothing" maintenance action with the identity
    /// transition, a trivial observation action, an uninformative default channel and zero
    /// rewards.
    pub fn new(n: usize, discount: f64) -> Self {
        ModelBuilder {
            model: PomdpModel {
                states: (0..n).map(|i| format!("s{i}")).collect(),
                maintenance_actions: vec!["do-nothing".into()],
                observation_actions: vec![ObservationAction::trivial("no-observation", n)],
                default_observations: vec!["none".into()],
                default_obs_model: DenseMatrix::from_vec(n, 1, vec![1.0; n]).expect("shape"),
                transition: vec![TransitionMatrix::identity(n)],
                reward_maintenance: DenseMatrix::zeros(n, 1),
                reward_observation: DenseMatrix::zeros(n, 1),
                reward_damage: vec![0.0; n],
                discount,
                actions: vec![JointAction::new(0, 0)],
                initial_belief: Belief::corner(n, 0),
                layout: None,
            },
        }
    }

    /// Replaces the maintenance actions: `(name, transition rows, reward per state)`.
    pub fn maintenance(mut self, actions: Vec<(&str, Vec<Vec<f64>>, Vec<f64>)>) -> Result<Self> {
        let n = self.model.n_states();
        let mut names = Vec::new();
        let mut trans = Vec::new();
        let mut rewards = DenseMatrix::zeros(n, actions.len());
        for (a, (name, rows, r)) in actions.into_iter().enumerate() {
            names.push(name.to_string());
            trans.push(TransitionMatrix::from_dense(DenseMatrix::from_rows(&rows)?)?);
            if r.len() != n {
                return Err(Error::InvalidModel("reward length mismatch".into()));
            }
            for (s, v) in r.into_iter().enumerate() {
                rewards.set(s, a, v);
            }
        }
        self.model.maintenance_actions = names;
        self.model.transition = trans;
        self.model.reward_maintenance = rewards;
        self.model.actions = PomdpModel::full_action_product(self.model.n_maintenance(), self.model.n_observation_actions());
        Ok(self)
    }

    /// Replaces the observation actions: `(name, observation rows, cost per state)`.
    pub fn observation_actions(mut self, actions: Vec<(&str, Vec<Vec<f64>>, Vec<f64>)>) -> Result<Self> {
        let n = self.model.n_states();
        let mut list = Vec::new();
        let mut rewards = DenseMatrix::zeros(n, actions.len());
        for (a, (name, rows, r)) in actions.into_iter().enumerate() {
            let m = DenseMatrix::from_rows(&rows)?;
            list.push(ObservationAction {
                name: name.to_string(),
                observations: (0..m.cols()).map(|k| format!("o{k}")).collect(),
                model: m,
            });
            for (s, v) in r.into_iter().enumerate() {
                rewards.set(s, a, v);
            }
        }
        self.model.observation_actions = list;
        self.model.reward_observation = rewards;
        self.model.actions = PomdpModel::full_action_product(self.model.n_maintenance(), self.model.n_observation_actions());
        Ok(self)
    }

    pub fn default_channel(mut self, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = DenseMatrix::from_rows(&rows)?;
        self.model.default_observations = (0..m.cols()).map(|k| format!("e{k}")).collect();
        self.model.default_obs_model = m;
        Ok(self)
    }

    pub fn damage(mut self, r: Vec<f64>) -> Self {
        self.model.reward_damage = r;
        self
    }

    pub fn actions(mut self, actions: Vec<JointAction>) -> Self {
        self.model.actions = actions;
        self
    }

    pub fn initial_belief(mut self, b: Belief) -> Self {
        self.model.initial_belief = b;
        self
    }

    pub fn build(self) -> Result<PomdpModel> {
        self.model.validate()?;
        Ok(self.model)
    }
}
