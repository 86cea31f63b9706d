//! Point-based solvers with lower/upper bound maintenance, plus the exact
//! oracles used for testing and for perfect-information values.

mod bounds;
pub(crate) mod engine;
mod gap;
mod oracle;
mod pbvi;
mod perseus;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::belief::{AlphaVector, Belief, SparseBelief};
use crate::error::{Error, Result};
use crate::model::{JointAction, PomdpModel};

pub use bounds::{blind_lower_bound, mdp_greedy_action, mdp_value_iteration, sawtooth_value, ValueBounds};
pub use gap::gap_heuristic_solve;
pub use oracle::{exact_finite_horizon, exact_finite_horizon_oracle, ORACLE_VECTOR_LIMIT};
pub use pbvi::pbvi_solve;
pub use perseus::perseus_solve;

use engine::{best_alpha, Engine, UpperBound};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Perseus,
    Pbvi,
    Gap,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "perseus" => Ok(SolverKind::Perseus),
            "pbvi" => Ok(SolverKind::Pbvi),
            "gap" | "hsvi" | "frtdp" => Ok(SolverKind::Gap),
            other => Err(Error::Config(format!("unknown solver '{other}' (expected perseus, pbvi or gap)"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Perseus => "perseus",
            SolverKind::Pbvi => "pbvi",
            SolverKind::Gap => "gap",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Target gap at the root (gap solver) or lower-bound improvement scale (Perseus, PBVI).
    pub epsilon: f64,
    pub max_iterations: usize,
    pub max_wall_seconds: Option<f64>,
    pub belief_set_size: usize,
    pub trajectory_length: usize,
    pub exploration_seed: u64,
    pub pruning_tolerance: f64,
    pub upper_capacity: usize,
    /// Upper-bound passes over the collected beliefs after Perseus/PBVI converge.
    pub upper_passes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 0.1,
            max_iterations: 10_000,
            max_wall_seconds: Some(3600.0),
            belief_set_size: 1000,
            trajectory_length: 500,
            exploration_seed: 0,
            pruning_tolerance: 1e-9,
            upper_capacity: 10_000,
            upper_passes: 3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 || self.belief_set_size == 0 || self.trajectory_length == 0 || self.upper_capacity == 0 {
            return Err(Error::Config("iteration, belief-set, trajectory and capacity sizes must be at least 1".into()));
        }
        if let Some(w) = self.max_wall_seconds {
            if !(w > 0.0) {
                return Err(Error::Config("wall-clock budget must be positive".into()));
            }
        }
        if !(self.pruning_tolerance >= 0.0) {
            return Err(Error::Config("pruning tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub iteration: usize,
    pub wall_seconds: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha_count: usize,
    pub belief_count: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub bounds: ValueBounds,
    pub status: SolveStatus,
    pub history: Vec<ConvergenceRecord>,
    pub root: Belief,
}

impl SolveOutcome {
    pub fn lower(&self) -> f64 {
        self.history.last().map(|r| r.lower).unwrap_or(f64::NEG_INFINITY)
    }

    pub fn upper(&self) -> f64 {
        self.history.last().map(|r| r.upper).unwrap_or(f64::INFINITY)
    }

    pub fn gap(&self) -> f64 {
        (self.upper() - self.lower()).max(0.0)
    }

    pub fn policy(&self) -> Policy {
        Policy::new(self.bounds.lower.clone())
    }
}

/// Greedy policy over a lower α-vector set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    alphas: Vec<AlphaVector>,
}

impl Policy {
    pub fn new(alphas: Vec<AlphaVector>) -> Self {
        Policy { alphas }
    }

    pub fn alphas(&self) -> &[AlphaVector] {
        &self.alphas
    }

    pub fn action(&self, b: &Belief) -> Result<JointAction> {
        let (_, i) = crate::belief::value_of_belief(&self.alphas, b)?;
        Ok(self.alphas[i].action)
    }

    pub fn value(&self, b: &Belief) -> Result<f64> {
        Ok(crate::belief::value_of_belief(&self.alphas, b)?.0)
    }
}

/// Runs the chosen solver, optionally continuing from earlier bounds.
pub fn solve(
    kind: SolverKind,
    model: &PomdpModel,
    config: &SolverConfig,
    root: &Belief,
    warm: Option<&ValueBounds>,
) -> Result<SolveOutcome> {
    match kind {
        SolverKind::Perseus => perseus::run(model, config, root, warm),
        SolverKind::Pbvi => pbvi::run(model, config, root, warm),
        SolverKind::Gap => gap::run(model, config, root, warm),
    }
}

/// Single-step Bellman backup of the lower bound at `b`.
pub fn backup(model: &PomdpModel, bounds: &ValueBounds, b: &Belief) -> Result<AlphaVector> {
    model.check_belief(b)?;
    if bounds.lower.is_empty() {
        return Err(Error::EmptyAlphaSet);
    }
    bounds::check_bounds_shape(model, bounds)?;
    let engine = Engine::new(model);
    let sb = b.to_sparse();
    let exp = engine.expand(&sb);
    Ok(engine.backup(&sb, &exp, &bounds.lower).0)
}

/// Mutable solver state shared by the three algorithms.
pub(crate) struct State<'m> {
    pub engine: Engine<'m>,
    pub config: SolverConfig,
    pub lower: Vec<AlphaVector>,
    pub upper: UpperBound,
    pub root: SparseBelief,
    pub history: Vec<ConvergenceRecord>,
    start: Instant,
}

impl<'m> State<'m> {
    pub fn new(model: &'m PomdpModel, config: &SolverConfig, root: &Belief, warm: Option<&ValueBounds>) -> Result<Self> {
        config.validate()?;
        model.validate()?;
        model.check_belief(root)?;
        let mut corners = mdp_value_iteration(model);
        let mut lower = blind_lower_bound(model);
        let mut points = Vec::new();
        if let Some(w) = warm {
            bounds::check_bounds_shape(model, w)?;
            for (c, &wc) in corners.iter_mut().zip(&w.upper_corners) {
                *c = c.min(wc);
            }
            lower = w.lower.iter().cloned().chain(lower).collect();
            points = w.upper_points.clone();
        }
        let mut upper = UpperBound::new(corners, config.upper_capacity);
        for (b, v) in points {
            upper.insert(b, v);
        }
        Ok(State {
            engine: Engine::new(model),
            config: config.clone(),
            lower,
            upper,
            root: root.to_sparse(),
            history: Vec::new(),
            start: Instant::now(),
        })
    }

    pub fn lower_at(&self, b: &SparseBelief) -> f64 {
        best_alpha(&self.lower, b).0
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    pub fn out_of_time(&self) -> bool {
        self.config.max_wall_seconds.is_some_and(|w| self.elapsed() >= w)
    }

    pub fn record(&mut self, iteration: usize, belief_count: usize) {
        let lower = self.lower_at(&self.root);
        let upper = self.upper.value(&self.root).max(lower);
        let wall_seconds = self.elapsed();
        self.history.push(ConvergenceRecord {
            iteration,
            wall_seconds,
            lower,
            upper,
            alpha_count: self.lower.len(),
            belief_count,
        });
    }

    /// Bellman update of the upper bound at `b`; returns the new upper value.
    pub fn update_upper(&mut self, b: &SparseBelief, exp: &engine::Expansion) -> f64 {
        let q = self.engine.upper_q(b, exp, &self.upper);
        let v = q.into_iter().fold(f64::NEG_INFINITY, f64::max);
        self.upper.insert(b.clone(), v);
        self.upper.value(b)
    }

    /// Keeps only vectors that are the maximizer at some belief in `beliefs`,
    /// preserving their relative order.
    pub fn prune_to_support(&mut self, beliefs: &[SparseBelief]) {
        let tol = self.config.pruning_tolerance;
        let mut keep = vec![false; self.lower.len()];
        for b in beliefs {
            let (v, i) = best_alpha(&self.lower, b);
            keep[i] = true;
            if tol > 0.0 {
                // near-ties stay to keep the policy stable
                for (j, a) in self.lower.iter().enumerate() {
                    if !keep[j] && b.dot(&a.values) >= v - tol {
                        keep[j] = true;
                    }
                }
            }
        }
        let mut it = keep.into_iter();
        self.lower.retain(|_| it.next().unwrap());
    }

    /// Adds a vector unless an existing one dominates it pointwise; drops vectors it dominates.
    pub fn add_alpha(&mut self, alpha: AlphaVector) {
        if self.lower.iter().any(|a| dominates(&a.values, &alpha.values)) {
            return;
        }
        self.lower.retain(|a| !dominates(&alpha.values, &a.values));
        self.lower.push(alpha);
    }

    pub fn finish(self, status: SolveStatus) -> SolveOutcome {
        SolveOutcome {
            bounds: ValueBounds {
                lower: self.lower,
                upper_corners: self.upper.corners,
                upper_points: self.upper.points,
            },
            status,
            history: self.history,
            root: self.root.to_belief(),
        }
    }
}

fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelBuilder;

    #[test]
    fn one_state_backup_is_a_fixed_point() {
        let m = ModelBuilder::new(1, 0.95)
            .maintenance(vec![("stay", vec![vec![1.0]], vec![-1.0])])
            .unwrap()
            .build()
            .unwrap();
        let bounds = ValueBounds {
            lower: vec![AlphaVector::new(vec![-20.0], JointAction::new(0, 0))],
            upper_corners: vec![0.0],
            upper_points: vec![],
        };
        let a = backup(&m, &bounds, &Belief::corner(1, 0)).unwrap();
        assert!((a.values[0] + 20.0).abs() < 1e-12);
    }

    #[test]
    fn myopic_backup_takes_best_immediate_reward() {
        let m = ModelBuilder::new(2, 1e-300)
            .maintenance(vec![
                ("a", vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![-1.0, -5.0]),
                ("b", vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![-3.0, -2.0]),
            ])
            .unwrap()
            .build()
            .unwrap();
        let bounds = ValueBounds {
            lower: vec![AlphaVector::new(vec![-1e6, -1e6], JointAction::new(0, 0))],
            upper_corners: vec![0.0; 2],
            upper_points: vec![],
        };
        let a = backup(&m, &bounds, &Belief::corner(2, 0)).unwrap();
        assert!((a.values[0] + 1.0).abs() < 1e-9);
        let a = backup(&m, &bounds, &Belief::corner(2, 1)).unwrap();
        assert!((a.values[1] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn solver_kind_parses() {
        assert_eq!("PBVI".parse::<SolverKind>().unwrap(), SolverKind::Pbvi);
        assert!("sarsop".parse::<SolverKind>().is_err());
    }
}
