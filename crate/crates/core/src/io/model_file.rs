//! TOML model files.
//!
//! ```toml
//! discount = 0.95
//! states = ["good", "bad"]            # or a count
//! initial_state = "good"              # or initial_belief = [..]
//! maintenance_actions = ["wait", "fix"]
//! default_observations = ["none"]     # optional, with default_observation_model
//!
//! [[observation_actions]]
//! name = "look"
//! observations = ["ok", "worn"]
//! model = [[0.9, 0.1], [0.2, 0.8]]
//!
//! [transition]
//! wait = [[0.8, 0.2], [0.0, 1.0]]
//! fix = { triplets = [[0, 0, 1.0], [1, 0, 1.0]] }
//!
//! [rewards]
//! maintenance = [[0.0, -4.0], [0.0, -4.0]]   # state x maintenance action
//! observation = [[0.0, -0.5], [0.0, -0.5]]   # state x observation action
//! damage = [0.0, -3.0]
//! ```
//!
//! A `[factored]` block (components plus penalty table) replaces the flat
//! sections, and `[finite_horizon]` augments the state with decision time.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::cases::three_component::{build_factored, ComponentSpec, ControlVariant, FactoredSystem, SystemPenaltyTable};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, TransitionMatrix};
use crate::model::{FactoredLayout, JointAction, ObservationAction, PomdpModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StatesSpec {
    Count(usize),
    Names(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Dense(Vec<Vec<f64>>),
    Sparse { triplets: Vec<(usize, usize, f64)> },
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationActionSpec {
    pub name: String,
    #[serde(default)]
    pub observations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maintenance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damage: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySpec {
    /// One-based component conditions, in any order.
    pub conditions: Vec<usize>,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactoredSpec {
    #[serde(default = "one")]
    pub setting: u8,
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub penalties: Vec<PenaltySpec>,
}

fn one() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteHorizonSpec {
    pub length: usize,
    #[serde(default = "yes")]
    pub augment: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub discount: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<StatesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_belief: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub maintenance_actions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_observations: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_observation_model: Option<Vec<Vec<f64>>>,
    /// `[maintenance, observation]` name pairs; all pairs when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<(String, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<FactoredLayout>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observation_actions: Vec<ObservationActionSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub transition: BTreeMap<String, MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<RewardsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factored: Option<FactoredSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finite_horizon: Option<FiniteHorizonSpec>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parses model text into a validated model.
pub fn parse_model(text: &str) -> Result<PomdpModel> {
    let file: ModelFile = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    compile(&file)
}

pub fn load_model(path: &Path) -> Result<PomdpModel> {
    parse_model(&super::read_text(path)?)
}

fn invalid<T>(m: impl Into<String>) -> Result<T> {
    Err(Error::InvalidModel(m.into()))
}

fn position(names: &[String], name: &str, what: &str) -> Result<usize> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::InvalidModel(format!("unknown {what} '{name}'")))
}

/// Compiles a parsed file into a model.
pub fn compile(file: &ModelFile) -> Result<PomdpModel> {
    let model = match &file.factored {
        Some(f) => compile_factored(file, f)?,
        None => compile_flat(file)?,
    };
    let model = match &file.finite_horizon {
        Some(h) if h.augment => augment_finite_horizon(&model, h.length)?,
        _ => model,
    };
    model.validate()?;
    Ok(model)
}

fn compile_factored(file: &ModelFile, f: &FactoredSpec) -> Result<PomdpModel> {
    let mut penalties = SystemPenaltyTable::default();
    for p in &f.penalties {
        if p.conditions.contains(&0) {
            return invalid("penalty conditions are one-based");
        }
        let zero: Vec<usize> = p.conditions.iter().map(|c| c - 1).collect();
        penalties.insert(&zero, p.penalty);
    }
    let sys = FactoredSystem { components: f.components.clone(), penalties, discount: file.discount };
    let mut model = build_factored(&sys, ControlVariant::from_number(f.setting)?)?;
    if let Some(b) = &file.initial_belief {
        model.initial_belief = Belief::new(b.clone())?;
    }
    Ok(model)
}

fn compile_flat(file: &ModelFile) -> Result<PomdpModel> {
    let states: Vec<String> = match &file.states {
        Some(StatesSpec::Count(n)) => (0..*n).map(|i| format!("s{i}")).collect(),
        Some(StatesSpec::Names(v)) => v.clone(),
        None => return invalid("missing 'states'"),
    };
    let n = states.len();
    if n == 0 {
        return invalid("'states' is empty");
    }
    if file.maintenance_actions.is_empty() {
        return invalid("missing 'maintenance_actions'");
    }
    let mut transition = Vec::new();
    for name in &file.maintenance_actions {
        let spec = file
            .transition
            .get(name)
            .ok_or_else(|| Error::InvalidModel(format!("no transition for maintenance action '{name}'")))?;
        let t = match spec {
            MatrixSpec::Dense(rows) => TransitionMatrix::from_dense(DenseMatrix::from_rows(rows)?)?,
            MatrixSpec::Sparse { triplets } => TransitionMatrix::from_triplets(n, triplets)?,
            MatrixSpec::Named(s) if s == "identity" => TransitionMatrix::identity(n),
            MatrixSpec::Named(s) => return invalid(format!("unknown transition shorthand '{s}'")),
        };
        if t.n() != n {
            return invalid(format!("transition for '{name}' does not have {n} rows"));
        }
        transition.push(t);
    }
    for key in file.transition.keys() {
        if !file.maintenance_actions.contains(key) {
            return invalid(format!("transition given for unknown maintenance action '{key}'"));
        }
    }
    let mut observation_actions = Vec::new();
    for spec in &file.observation_actions {
        let (labels, m) = match &spec.model {
            Some(rows) => {
                let m = DenseMatrix::from_rows(rows)?;
                let labels = if spec.observations.is_empty() {
                    (0..m.cols()).map(|k| format!("o{k}")).collect()
                } else {
                    spec.observations.clone()
                };
                (labels, m)
            }
            None if spec.observations.len() <= 1 => {
                (vec![spec.observations.first().cloned().unwrap_or_else(|| "none".into())], DenseMatrix::from_vec(n, 1, vec![1.0; n])?)
            }
            None => return invalid(format!("observation action '{}' needs a model", spec.name)),
        };
        observation_actions.push(ObservationAction { name: spec.name.clone(), observations: labels, model: m });
    }
    if observation_actions.is_empty() {
        observation_actions.push(ObservationAction::trivial("no-observation", n));
    }
    let (default_observations, default_obs_model) = match (&file.default_observations, &file.default_observation_model) {
        (_, Some(rows)) => {
            let m = DenseMatrix::from_rows(rows)?;
            let labels = file.default_observations.clone().unwrap_or_else(|| (0..m.cols()).map(|k| format!("e{k}")).collect());
            (labels, m)
        }
        (Some(labels), None) if labels.len() == 1 => (labels.clone(), DenseMatrix::from_vec(n, 1, vec![1.0; n])?),
        (Some(_), None) => return invalid("default observations listed without 'default_observation_model'"),
        (None, None) => (vec!["none".to_string()], DenseMatrix::from_vec(n, 1, vec![1.0; n])?),
    };
    let n_m = file.maintenance_actions.len();
    let n_o = observation_actions.len();
    let rewards = file.rewards.clone().unwrap_or_default();
    let matrix = |rows: &Option<Vec<Vec<f64>>>, cols: usize, what: &str| -> Result<DenseMatrix> {
        match rows {
            Some(r) => {
                let m = DenseMatrix::from_rows(r)?;
                if m.rows() != n || m.cols() != cols {
                    return invalid(format!("rewards.{what} must be {n} x {cols}"));
                }
                Ok(m)
            }
            None => Ok(DenseMatrix::zeros(n, cols)),
        }
    };
    let reward_maintenance = matrix(&rewards.maintenance, n_m, "maintenance")?;
    let reward_observation = matrix(&rewards.observation, n_o, "observation")?;
    let reward_damage = rewards.damage.clone().unwrap_or_else(|| vec![0.0; n]);
    let obs_names: Vec<String> = observation_actions.iter().map(|o| o.name.clone()).collect();
    let actions = match &file.actions {
        Some(pairs) => pairs
            .iter()
            .map(|(m, o)| {
                Ok(JointAction::new(
                    position(&file.maintenance_actions, m, "maintenance action")?,
                    position(&obs_names, o, "observation action")?,
                ))
            })
            .collect::<Result<Vec<_>>>()?,
        None => PomdpModel::full_action_product(n_m, n_o),
    };
    let initial_belief = match (&file.initial_belief, &file.initial_state) {
        (Some(_), Some(_)) => return invalid("give either 'initial_belief' or 'initial_state', not both"),
        (Some(b), None) => Belief::new(b.clone())?,
        (None, Some(s)) => Belief::corner(n, position(&states, s, "state")?),
        (None, None) => Belief::corner(n, 0),
    };
    let model = PomdpModel {
        states,
        maintenance_actions: file.maintenance_actions.clone(),
        observation_actions,
        default_observations,
        default_obs_model,
        transition,
        reward_maintenance,
        reward_observation,
        reward_damage,
        discount: file.discount,
        actions,
        initial_belief,
        layout: file.layout.clone(),
    };
    model.validate()?;
    Ok(model)
}

/// Flat file description of a model (the factored block is not reconstructed).
pub fn to_model_file(model: &PomdpModel) -> ModelFile {
    let transition = model
        .maintenance_actions
        .iter()
        .zip(&model.transition)
        .map(|(name, t)| {
            let spec = if t.is_sparse() {
                MatrixSpec::Sparse { triplets: t.triplets() }
            } else {
                MatrixSpec::Dense(t.to_dense().to_rows())
            };
            (name.clone(), spec)
        })
        .collect();
    let corner = model.initial_belief.probs().iter().position(|&p| p == 1.0);
    ModelFile {
        discount: model.discount,
        states: Some(StatesSpec::Names(model.states.clone())),
        initial_state: corner.map(|s| model.states[s].clone()),
        initial_belief: if corner.is_some() { None } else { Some(model.initial_belief.probs().to_vec()) },
        maintenance_actions: model.maintenance_actions.clone(),
        default_observations: Some(model.default_observations.clone()),
        default_observation_model: Some(model.default_obs_model.to_rows()),
        actions: Some(
            model
                .actions
                .iter()
                .map(|a| (model.maintenance_actions[a.maintenance].clone(), model.observation_actions[a.observation].name.clone()))
                .collect(),
        ),
        layout: model.layout.clone(),
        observation_actions: model
            .observation_actions
            .iter()
            .map(|o| ObservationActionSpec { name: o.name.clone(), observations: o.observations.clone(), model: Some(o.model.to_rows()) })
            .collect(),
        transition,
        rewards: Some(RewardsSpec {
            maintenance: Some(model.reward_maintenance.to_rows()),
            observation: Some(model.reward_observation.to_rows()),
            damage: Some(model.reward_damage.clone()),
        }),
        factored: None,
        finite_horizon: None,
    }
}

pub fn write_model(model: &PomdpModel) -> Result<String> {
    toml::to_string(&to_model_file(model)).map_err(|e| Error::Config(format!("cannot serialize model: {e}")))
}

/// Time-augmented copy: states `(t, s)` for `t < length` plus an absorbing,
/// cost-free terminal state that emits outcome 0 on every channel.
pub fn augment_finite_horizon(model: &PomdpModel, length: usize) -> Result<PomdpModel> {
    if length == 0 {
        return invalid("finite horizon length must be at least 1");
    }
    let n = model.n_states();
    let big = n * length + 1;
    let term = big - 1;
    let idx = |t: usize, s: usize| t * n + s;
    let mut transition = Vec::new();
    for p in &model.transition {
        let mut trip = Vec::new();
        for t in 0..length {
            for s in 0..n {
                if t + 1 == length {
                    trip.push((idx(t, s), term, 1.0));
                } else {
                    p.row(s).for_each_nonzero(|j, v| trip.push((idx(t, s), idx(t + 1, j), v)));
                }
            }
        }
        trip.push((term, term, 1.0));
        transition.push(TransitionMatrix::from_triplets(big, &trip)?);
    }
    let lift = |m: &DenseMatrix, terminal_row: &dyn Fn(usize) -> f64| {
        let mut out = DenseMatrix::zeros(big, m.cols());
        for t in 0..length {
            for s in 0..n {
                for c in 0..m.cols() {
                    out.set(idx(t, s), c, m.get(s, c));
                }
            }
        }
        for c in 0..m.cols() {
            out.set(term, c, terminal_row(c));
        }
        out
    };
    let first = |c: usize| if c == 0 { 1.0 } else { 0.0 };
    let zero = |_c: usize| 0.0;
    let mut initial = vec![0.0; big];
    initial[..n].copy_from_slice(model.initial_belief.probs());
    let mut states = Vec::with_capacity(big);
    for t in 0..length {
        for s in &model.states {
            states.push(format!("t{t}:{s}"));
        }
    }
    states.push("terminal".into());
    Ok(PomdpModel {
        states,
        maintenance_actions: model.maintenance_actions.clone(),
        observation_actions: model
            .observation_actions
            .iter()
            .map(|o| ObservationAction { name: o.name.clone(), observations: o.observations.clone(), model: lift(&o.model, &first) })
            .collect(),
        default_observations: model.default_observations.clone(),
        default_obs_model: lift(&model.default_obs_model, &first),
        transition,
        reward_maintenance: lift(&model.reward_maintenance, &zero),
        reward_observation: lift(&model.reward_observation, &zero),
        reward_damage: (0..big).map(|i| if i == term { 0.0 } else { model.reward_damage[i % n] }).collect(),
        discount: model.discount,
        actions: model.actions.clone(),
        initial_belief: Belief::new(initial)?,
        layout: None,
    })
}
