//! CSV reports. Numbers carry 9 significant digits.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{MetricEstimate, SweepRow};
use crate::model::PomdpModel;
use crate::simulation::{PolicyTrace, RolloutResult, SimulatedMetric};
use crate::solvers::ConvergenceRecord;

/// Rounds to 9 significant digits and prints the shortest form of the result.
pub fn fmt9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let r: f64 = format!("{x:.8e}").parse().expect("formatted float");
    if r == 0.0 {
        "0".into()
    } else if r.abs() < 1e-4 || r.abs() >= 1e15 {
        format!("{r:e}")
    } else {
        r.to_string()
    }
}

fn to_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv writes utf-8"))
}

pub fn convergence_csv(records: &[ConvergenceRecord]) -> Result<String> {
    to_string(
        &["iteration", "wall_seconds", "lower", "upper", "gap", "alpha_count", "belief_count"],
        records.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                fmt9(r.wall_seconds),
                fmt9(r.lower),
                fmt9(r.upper),
                fmt9((r.upper - r.lower).max(0.0)),
                r.alpha_count.to_string(),
                r.belief_count.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub setting1: String,
    pub setting2: String,
    pub estimate: MetricEstimate,
}

pub fn metrics_csv(rows: &[MetricRow]) -> Result<String> {
    to_string(
        &["metric", "setting1", "setting2", "value", "uncertainty", "value1", "gap1", "value2", "gap2"],
        rows.iter().map(|r| {
            let e = &r.estimate;
            vec![
                r.metric.clone(),
                r.setting1.clone(),
                r.setting2.clone(),
                fmt9(e.value),
                fmt9(e.uncertainty),
                fmt9(e.value1),
                fmt9(e.gap1),
                fmt9(e.value2),
                fmt9(e.gap2),
            ]
        }),
    )
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    to_string(
        &["p", "v1", "v2", "v_blind", "v_mdp", "voi1", "voi2", "voshm", "gap1", "gap2", "gap_blind"],
        rows.iter().map(|r| {
            [r.p, r.v1, r.v2, r.v_blind, r.v_mdp, r.voi1(), r.voi2(), r.voshm(), r.gap1, r.gap2, r.gap_blind]
                .iter()
                .map(|&x| fmt9(x))
                .collect()
        }),
    )
}

pub fn rollout_csv(label: &str, r: &RolloutResult) -> Result<String> {
    to_string(
        &["policy", "episodes", "horizon", "mean", "std_error", "confidence", "ci_low", "ci_high", "min", "max"],
        [vec![
            label.to_string(),
            r.episodes.to_string(),
            r.horizon.to_string(),
            fmt9(r.mean),
            fmt9(r.std_error),
            fmt9(r.confidence),
            fmt9(r.ci_low),
            fmt9(r.ci_high),
            fmt9(r.min),
            fmt9(r.max),
        ]],
    )
}

pub fn simulated_metric_csv(label: &str, m: &SimulatedMetric) -> Result<String> {
    to_string(
        &["metric", "episodes", "value", "half_width", "confidence", "mean1", "se1", "mean2", "se2"],
        [vec![
            label.to_string(),
            m.first.episodes.to_string(),
            fmt9(m.value),
            fmt9(m.half_width),
            fmt9(m.confidence),
            fmt9(m.first.mean),
            fmt9(m.first.std_error),
            fmt9(m.second.mean),
            fmt9(m.second.std_error),
        ]],
    )
}

/// Trace rows; the belief column lists `state:probability` pairs of its support.
pub fn trace_csv(model: &PomdpModel, trace: &PolicyTrace) -> Result<String> {
    to_string(
        &["t", "state", "maintenance", "observation", "default_outcome", "action_outcome", "reward", "belief"],
        trace.steps.iter().map(|s| {
            let belief: Vec<String> = s.belief.support().map(|i| format!("{}:{}", i, fmt9(s.belief.probs()[i]))).collect();
            vec![
                s.t.to_string(),
                model.states[s.state].clone(),
                model.maintenance_actions[s.action.maintenance].clone(),
                model.observation_actions[s.action.observation].name.clone(),
                model.default_observations[s.observation.default_index].clone(),
                model.observation_actions[s.action.observation].observations[s.observation.action_index].clone(),
                fmt9(s.reward),
                belief.join(";"),
            ]
        }),
    )
}

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
