//! Multi-component systems with independent deterioration and system-level
//! penalties, and the stationary three-component instance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, TransitionMatrix};
use crate::metrics::make_perm;
use crate::model::{FactoredLayout, JointAction, ObservationAction, PomdpModel};

/// One component: condition dynamics, costs and its inspection channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub do_nothing: Vec<Vec<f64>>,
    pub repair: Vec<Vec<f64>>,
    pub repair_reward: Vec<f64>,
    pub observation_reward: Vec<f64>,
    pub damage_reward: Vec<f64>,
    pub observation: Vec<Vec<f64>>,
}

impl ComponentSpec {
    pub fn levels(&self) -> usize {
        self.do_nothing.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.levels();
        let square = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
        if n == 0 || !square(&self.do_nothing) || !square(&self.repair) {
            return Err(Error::InvalidModel("component matrices must be square and agree in size".into()));
        }
        if self.observation.len() != n || [&self.repair_reward, &self.observation_reward, &self.damage_reward].iter().any(|v| v.len() != n) {
            return Err(Error::InvalidModel("component vectors must have one entry per condition".into()));
        }
        DenseMatrix::from_rows(&self.do_nothing)?.check_stochastic("component do-nothing")?;
        DenseMatrix::from_rows(&self.repair)?.check_stochastic("component repair")?;
        DenseMatrix::from_rows(&self.observation)?.check_stochastic("component observation")?;
        Ok(())
    }
}

/// Penalties keyed by the sorted multiset of (zero-based) component conditions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SystemPenaltyTable {
    pub entries: BTreeMap<Vec<usize>, f64>,
}

impl SystemPenaltyTable {
    pub fn insert(&mut self, conditions: &[usize], penalty: f64) {
        let mut key = conditions.to_vec();
        key.sort_unstable();
        self.entries.insert(key, penalty);
    }

    pub fn lookup(&self, conditions: &[usize]) -> f64 {
        let mut key = conditions.to_vec();
        key.sort_unstable();
        self.entries.get(&key).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredSystem {
    pub components: Vec<ComponentSpec>,
    pub penalties: SystemPenaltyTable,
    pub discount: f64,
}

/// Accuracy matrix: correct level with probability `p`, others uniform.
pub fn accuracy_matrix(levels: usize, p: f64) -> Vec<Vec<f64>> {
    let q = if levels > 1 { (1.0 - p) / (levels - 1) as f64 } else { 0.0 };
    (0..levels)
        .map(|i| (0..levels).map(|j| if i == j { if levels > 1 { p } else { 1.0 } } else { q }).collect())
        .collect()
}

pub const COMPONENT_DO_NOTHING: [[[f64; 3]; 3]; 3] = [
    [[0.82, 0.13, 0.05], [0.0, 0.87, 0.13], [0.0, 0.0, 1.0]],
    [[0.72, 0.19, 0.09], [0.0, 0.78, 0.22], [0.0, 0.0, 1.0]],
    [[0.79, 0.17, 0.04], [0.0, 0.85, 0.15], [0.0, 0.0, 1.0]],
];
pub const COMPONENT_REPAIR: [[f64; 3]; 3] = [[0.90, 0.10, 0.0], [0.80, 0.20, 0.0], [0.70, 0.30, 0.0]];
pub const REPAIR_REWARD: [f64; 3] = [-12.0, -18.0, -30.0];
pub const OBSERVATION_REWARD: [f64; 3] = [-1.0, -1.0, -1.0];
pub const DAMAGE_REWARD: [f64; 3] = [0.0, -5.0, -12.0];

/// The stationary three-component system with inspection accuracy `p`.
pub fn three_component_system(p: f64) -> FactoredSystem {
    let rows = |m: &[[f64; 3]; 3]| m.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    let components = COMPONENT_DO_NOTHING
        .iter()
        .map(|dn| ComponentSpec {
            do_nothing: rows(dn),
            repair: rows(&COMPONENT_REPAIR),
            repair_reward: REPAIR_REWARD.to_vec(),
            observation_reward: OBSERVATION_REWARD.to_vec(),
            damage_reward: DAMAGE_REWARD.to_vec(),
            observation: accuracy_matrix(3, p),
        })
        .collect();
    let mut penalties = SystemPenaltyTable::default();
    for (set, v) in [
        (vec![[1, 2, 2]], -5.0),
        (vec![[2, 2, 2], [1, 2, 3], [2, 2, 3]], -10.0),
        (vec![[3, 3, 1], [3, 3, 2]], -14.0),
        (vec![[3, 3, 3]], -18.0),
    ] {
        for one_based in set {
            let zero: Vec<usize> = one_based.iter().map(|c| c - 1).collect();
            penalties.insert(&zero, v);
        }
    }
    FactoredSystem { components, penalties, discount: 0.95 }
}

/// Which control setting to build: optional inspections (1) or a permanent costless channel (2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlVariant {
    OptionalInspection,
    PermanentMonitoring,
}

impl ControlVariant {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(ControlVariant::OptionalInspection),
            2 => Ok(ControlVariant::PermanentMonitoring),
            _ => Err(Error::Config(format!("setting must be 1 or 2, got {n}"))),
        }
    }
}

pub fn build_three_component(p: f64, setting: ControlVariant) -> Result<PomdpModel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Contract(format!("observation accuracy {p} outside [0, 1]")));
    }
    build_factored(&three_component_system(p), setting)
}

/// Compiles a factored system into a flat model. Joint maintenance and observation
/// actions are bit masks over components (component 0 most significant).
pub fn build_factored(sys: &FactoredSystem, setting: ControlVariant) -> Result<PomdpModel> {
    if sys.components.is_empty() {
        return Err(Error::InvalidModel("factored system has no components".into()));
    }
    for c in &sys.components {
        c.validate()?;
    }
    let k = sys.components.len();
    let layout = FactoredLayout { levels: sys.components.iter().map(|c| c.levels()).collect(), local_maintenance: 2 };
    let n = layout.state_count();
    let n_masks = 1usize << k;
    let states: Vec<Vec<usize>> = (0..n).map(|s| layout.decode_state(s)).collect();
    let bit = |mask: usize, i: usize| mask >> (k - 1 - i) & 1 == 1;

    let mut transition = Vec::with_capacity(n_masks);
    let mut reward_m = DenseMatrix::zeros(n, n_masks);
    for a in 0..n_masks {
        let mut triplets = Vec::new();
        for (s, cond) in states.iter().enumerate() {
            // Kronecker product of the component rows
            let mut partial = vec![(0usize, 1.0f64)];
            for (i, c) in sys.components.iter().enumerate() {
                let row = if bit(a, i) { &c.repair[cond[i]] } else { &c.do_nothing[cond[i]] };
                let mut next = Vec::new();
                for &(idx, w) in &partial {
                    for (j, &v) in row.iter().enumerate() {
                        if v != 0.0 {
                            next.push((idx * c.levels() + j, w * v));
                        }
                    }
                }
                partial = next;
            }
            triplets.extend(partial.into_iter().map(|(j, v)| (s, j, v)));
            let r: f64 = (0..k).filter(|&i| bit(a, i)).map(|i| sys.components[i].repair_reward[cond[i]]).sum();
            reward_m.set(s, a, r);
        }
        transition.push(TransitionMatrix::from_triplets(n, &triplets)?);
    }

    let mut observation_actions = Vec::with_capacity(n_masks);
    let mut reward_o = DenseMatrix::zeros(n, n_masks);
    for mask in 0..n_masks {
        let observed: Vec<usize> = (0..k).filter(|&i| bit(mask, i)).collect();
        let sizes: Vec<usize> = observed.iter().map(|&i| sys.components[i].observation[0].len()).collect();
        let outcomes: usize = sizes.iter().product();
        let mut m = DenseMatrix::zeros(n, outcomes);
        for (s, cond) in states.iter().enumerate() {
            for o in 0..outcomes {
                let mut rem = o;
                let mut p = 1.0;
                for (pos, &i) in observed.iter().enumerate().rev() {
                    let oi = rem % sizes[pos];
                    rem /= sizes[pos];
                    p *= sys.components[i].observation[cond[i]][oi];
                }
                m.set(s, o, p);
            }
            let r: f64 = observed.iter().map(|&i| sys.components[i].observation_reward[cond[i]]).sum();
            reward_o.set(s, mask, r);
        }
        let name = if observed.is_empty() {
            "no-observation".to_string()
        } else {
            format!("observe[{}]", observed.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(","))
        };
        let labels = (0..outcomes)
            .map(|o| {
                let mut rem = o;
                let mut parts = vec![String::new(); observed.len()];
                for pos in (0..observed.len()).rev() {
                    parts[pos] = (rem % sizes[pos] + 1).to_string();
                    rem /= sizes[pos];
                }
                if parts.is_empty() { "none".to_string() } else { parts.join("") }
            })
            .collect();
        observation_actions.push(ObservationAction { name, observations: labels, model: m });
    }

    let reward_d = states
        .iter()
        .map(|cond| {
            cond.iter().enumerate().map(|(i, &c)| sys.components[i].damage_reward[c]).sum::<f64>() + sys.penalties.lookup(cond)
        })
        .collect();
    let state_names = states
        .iter()
        .map(|c| format!("({})", c.iter().map(|x| (x + 1).to_string()).collect::<Vec<_>>().join(",")))
        .collect();
    let maintenance_names = (0..n_masks)
        .map(|a| {
            let r: Vec<String> = (0..k).filter(|&i| bit(a, i)).map(|i| (i + 1).to_string()).collect();
            if r.is_empty() { "do-nothing".into() } else { format!("repair[{}]", r.join(",")) }
        })
        .collect();
    let model = PomdpModel {
        states: state_names,
        maintenance_actions: maintenance_names,
        observation_actions,
        default_observations: vec!["none".into()],
        default_obs_model: DenseMatrix::from_vec(n, 1, vec![1.0; n])?,
        transition,
        reward_maintenance: reward_m,
        reward_observation: reward_o,
        reward_damage: reward_d,
        discount: sys.discount,
        actions: PomdpModel::full_action_product(n_masks, n_masks),
        initial_belief: Belief::corner(n, 0),
        layout: Some(layout),
    };
    model.validate()?;
    match setting {
        ControlVariant::OptionalInspection => Ok(model),
        ControlVariant::PermanentMonitoring => Ok(make_perm(&model, n_masks - 1)?.model),
    }
}

/// Observe-all action index of a factored model.
pub fn observe_all_action(model: &PomdpModel) -> Option<usize> {
    model.layout.as_ref().map(|l| (1usize << l.components()) - 1)
}

/// Joint action from per-component repair and observe flags.
pub fn joint_action(repair: &[bool], observe: &[bool]) -> JointAction {
    let mask = |v: &[bool]| v.iter().fold(0usize, |acc, &b| acc * 2 + b as usize);
    JointAction::new(mask(repair), mask(observe))
}
