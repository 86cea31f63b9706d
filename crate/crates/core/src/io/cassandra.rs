//! Reader for the plain-text POMDP interchange format (`discount:`, `values:`,
//! `states:`, `actions:`, `observations:`, `start:`, `T:`, `O:`, `R:` stanzas).
//!
//! Each action becomes a maintenance action paired with an observation action of
//! the same name. Expected immediate rewards are folded into the maintenance
//! reward; they must be non-positive after applying `values:`.

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, TransitionMatrix};
use crate::model::{JointAction, ObservationAction, PomdpModel};

struct Header {
    discount: f64,
    cost: bool,
    states: Vec<String>,
    actions: Vec<String>,
    observations: Vec<String>,
}

fn perr<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line: (line > 0).then_some(line), message: message.into() })
}

fn names(line: usize, value: &str, prefix: &str) -> Result<Vec<String>> {
    let toks: Vec<&str> = value.split_whitespace().collect();
    match toks.as_slice() {
        [one] if one.parse::<usize>().is_ok() => Ok((0..one.parse::<usize>().unwrap()).map(|i| format!("{prefix}{i}")).collect()),
        [] => perr(line, "empty list"),
        _ => Ok(toks.iter().map(|s| s.to_string()).collect()),
    }
}

fn resolve(line: usize, tok: &str, list: &[String]) -> Result<Vec<usize>> {
    if tok == "*" {
        return Ok((0..list.len()).collect());
    }
    if let Some(i) = list.iter().position(|x| x == tok) {
        return Ok(vec![i]);
    }
    match tok.parse::<usize>() {
        Ok(i) if i < list.len() => Ok(vec![i]),
        _ => perr(line, format!("unknown name '{tok}'")),
    }
}

fn numbers(line: usize, toks: &[&str]) -> Result<Vec<f64>> {
    toks.iter()
        .map(|t| t.parse::<f64>().or_else(|_| perr(line, format!("bad number '{t}'"))))
        .collect()
}

/// Tokens following a stanza: the numbers on the rest of this line and, if more
/// are needed, on following lines.
struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn take_numbers(&mut self, first: &[&str], count: usize, line: usize) -> Result<Vec<f64>> {
        let mut out = numbers(line, first)?;
        while out.len() < count {
            let Some(&(l, text)) = self.lines.get(self.pos) else {
                return perr(line, format!("expected {count} numbers"));
            };
            let toks: Vec<&str> = text.split_whitespace().collect();
            if toks.is_empty() || toks[0].contains(':') || toks[0].parse::<f64>().is_err() && toks[0] != "identity" && toks[0] != "uniform" {
                return perr(l, format!("expected {count} numbers"));
            }
            if toks[0] == "identity" || toks[0] == "uniform" {
                return perr(l, "matrix shorthand must follow the stanza directly");
            }
            out.extend(numbers(l, &toks)?);
            self.pos += 1;
        }
        if out.len() != count {
            return perr(line, format!("expected {count} numbers, found {}", out.len()));
        }
        Ok(out)
    }
}

/// Parses the interchange format into a model.
pub fn parse_cassandra(text: &str) -> Result<PomdpModel> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let mut h = Header { discount: f64::NAN, cost: false, states: vec![], actions: vec![], observations: vec![] };
    let mut start: Option<(usize, String)> = None;
    let mut body = Vec::new();
    for &(ln, l) in &lines {
        let (key, rest) = match l.split_once(':') {
            Some((k, r)) if ["discount", "values", "states", "actions", "observations", "start"].contains(&k.trim()) => {
                (k.trim(), r.trim())
            }
            _ => {
                body.push((ln, l));
                continue;
            }
        };
        match key {
            "discount" => h.discount = rest.parse().or_else(|_| perr(ln, "bad discount"))?,
            "values" => {
                h.cost = match rest {
                    "reward" => false,
                    "cost" => true,
                    _ => return perr(ln, "values must be 'reward' or 'cost'"),
                }
            }
            "states" => h.states = names(ln, rest, "s")?,
            "actions" => h.actions = names(ln, rest, "a")?,
            "observations" => h.observations = names(ln, rest, "o")?,
            _ => start = Some((ln, rest.to_string())),
        }
    }
    if h.states.is_empty() || h.actions.is_empty() || h.observations.is_empty() || h.discount.is_nan() {
        return perr(0, "header needs discount, states, actions and observations");
    }
    let (n, na, no) = (h.states.len(), h.actions.len(), h.observations.len());
    let mut t = vec![vec![vec![0.0; n]; n]; na];
    let mut o = vec![vec![vec![0.0; no]; n]; na];
    let mut r4: Vec<(usize, Vec<usize>, Vec<usize>, Vec<usize>, Vec<usize>, f64)> = Vec::new();
    let mut rows = Lines { lines: body, pos: 0 };
    while rows.pos < rows.lines.len() {
        let (ln, l) = rows.lines[rows.pos];
        rows.pos += 1;
        let (kind, rest) = match l.split_once(':') {
            Some((k, r)) => (k.trim(), r),
            None => return perr(ln, format!("unexpected line '{l}'")),
        };
        let parts: Vec<&str> = rest.split(':').map(str::trim).collect();
        match kind {
            "T" | "O" => {
                let (cols, target) = if kind == "T" { (n, &mut t) } else { (no, &mut o) };
                let col_names = if kind == "T" { &h.states } else { &h.observations };
                let acts = resolve(ln, parts[0].split_whitespace().next().unwrap_or(""), &h.actions)?;
                let fields = &parts;
                // "T: a : s : s' p" carries the value in the last field
                let last_toks: Vec<&str> = fields.last().copied().unwrap_or("").split_whitespace().collect();
                match fields.len() {
                    1 => {
                        let mut toks: Vec<&str> = parts[0].split_whitespace().skip(1).collect();
                        if toks.is_empty() {
                            if let Some(&(_, next)) = rows.lines.get(rows.pos) {
                                if next == "identity" || next == "uniform" {
                                    toks.push(next);
                                    rows.pos += 1;
                                }
                            }
                        }
                        let mat = match toks.first() {
                            Some(&"identity") if kind == "T" => identity(n),
                            Some(&"uniform") => vec![vec![1.0 / cols as f64; cols]; n],
                            _ => chunk(rows.take_numbers(&toks, n * cols, ln)?, cols),
                        };
                        for &a in &acts {
                            target[a] = mat.clone();
                        }
                    }
                    2 => {
                        let toks: Vec<&str> = last_toks.clone();
                        let ss = resolve(ln, toks.first().copied().unwrap_or(""), &h.states)?;
                        let row = match toks.get(1) {
                            Some(&"uniform") => vec![1.0 / cols as f64; cols],
                            _ => rows.take_numbers(&toks[1..], cols, ln)?,
                        };
                        for &a in &acts {
                            for &s in &ss {
                                target[a][s] = row.clone();
                            }
                        }
                    }
                    3 => {
                        let ss = resolve(ln, fields[1], &h.states)?;
                        let mut toks = last_toks.clone();
                        if toks.len() < 2 {
                            return perr(ln, "expected a target and a probability");
                        }
                        let value = numbers(ln, &toks[1..2])?[0];
                        toks.truncate(1);
                        let js = resolve(ln, toks[0], col_names)?;
                        for &a in &acts {
                            for &s in &ss {
                                for &j in &js {
                                    target[a][s][j] = value;
                                }
                            }
                        }
                    }
                    _ => return perr(ln, "too many fields"),
                }
            }
            "R" => {
                if parts.len() != 4 {
                    return perr(ln, "reward stanzas need 'R: a : s : s' : o value'");
                }
                let a = resolve(ln, parts[0], &h.actions)?;
                let s = resolve(ln, parts[1], &h.states)?;
                let sn = resolve(ln, parts[2], &h.states)?;
                let toks: Vec<&str> = parts[3].split_whitespace().collect();
                if toks.len() != 2 {
                    return perr(ln, "reward entries need an observation and one value (matrix forms are not supported)");
                }
                let obs = resolve(ln, toks[0], &h.observations)?;
                let v = numbers(ln, &toks[1..])?[0];
                r4.push((ln, a, s, sn, obs, if h.cost { -v } else { v }));
            }
            _ => return perr(ln, format!("unknown stanza '{kind}'")),
        }
    }
    // later entries override earlier ones, entry by entry
    let mut r = vec![vec![vec![vec![0.0; no]; n]; n]; na];
    for (_, a, s, sn, obs, v) in &r4 {
        for &a in a {
            for &s in s {
                for &j in sn {
                    for &k in obs {
                        r[a][s][j][k] = *v;
                    }
                }
            }
        }
    }
    let mut reward_m = DenseMatrix::zeros(n, na);
    for a in 0..na {
        for s in 0..n {
            let mut e = 0.0;
            for j in 0..n {
                for k in 0..no {
                    e += t[a][s][j] * o[a][j][k] * r[a][s][j][k];
                }
            }
            if e > 1e-12 {
                return Err(Error::InvalidModel(format!(
                    "expected reward {e} for action '{}' in state '{}' is positive; shift rewards so all are non-positive",
                    h.actions[a], h.states[s]
                )));
            }
            reward_m.set(s, a, e.min(0.0));
        }
    }
    let transition = t
        .iter()
        .map(|m| DenseMatrix::from_rows(m).and_then(TransitionMatrix::from_dense))
        .collect::<Result<Vec<_>>>()?;
    let observation_actions = o
        .iter()
        .zip(&h.actions)
        .map(|(m, name)| Ok(ObservationAction { name: name.clone(), observations: h.observations.clone(), model: DenseMatrix::from_rows(m)? }))
        .collect::<Result<Vec<_>>>()?;
    let initial_belief = match start {
        None => Belief::uniform(n),
        Some((ln, s)) => {
            let toks: Vec<&str> = s.split_whitespace().collect();
            match toks.as_slice() {
                ["uniform"] => Belief::uniform(n),
                [one] if h.states.contains(&one.to_string()) => Belief::corner(n, resolve(ln, one, &h.states)?[0]),
                _ => Belief::new(numbers(ln, &toks)?)?,
            }
        }
    };
    let model = PomdpModel {
        states: h.states.clone(),
        maintenance_actions: h.actions.clone(),
        observation_actions,
        default_observations: vec!["none".into()],
        default_obs_model: DenseMatrix::from_vec(n, 1, vec![1.0; n])?,
        transition,
        reward_maintenance: reward_m,
        reward_observation: DenseMatrix::zeros(n, na),
        reward_damage: vec![0.0; n],
        discount: h.discount,
        actions: (0..na).map(|a| JointAction::new(a, a)).collect(),
        initial_belief,
        layout: None,
    };
    model.validate()?;
    Ok(model)
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn chunk(v: Vec<f64>, cols: usize) -> Vec<Vec<f64>> {
    v.chunks(cols).map(|c| c.to_vec()).collect()
}
