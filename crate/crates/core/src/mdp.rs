//! Tabular MDP representation, validation, the random-walk chain and its
//! reachability structure.
//!
//! Transitions are stored densely as a flat `S * A * S` buffer indexed
//! `[s][a][s']`; rewards as a flat `S * A` buffer indexed `[s][a]`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on probability row sums.
pub const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
    r_max: f64,
    gamma: f64,
    labels: Option<Vec<String>>,
}

/// One violated invariant of a [`TabularMdp`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Shape { message: String },
    RowSum { state: usize, action: usize, sum: f64 },
    EntryOutOfRange { state: usize, action: usize, next: usize, value: f64 },
    RewardOutOfRange { state: usize, action: usize, value: f64 },
    Gamma { value: f64 },
    RMax { value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape { message } => write!(f, "shape: {message}"),
            Violation::RowSum { state, action, sum } => {
                write!(f, "(s={state}, a={action}): row sums to {sum}, expected 1")
            }
            Violation::EntryOutOfRange { state, action, next, value } => {
                write!(f, "(s={state}, a={action}, s'={next}): entry out of [0,1]: {value}")
            }
            Violation::RewardOutOfRange { state, action, value } => {
                write!(f, "(s={state}, a={action}): reward {value} out of [0, r_max]")
            }
            Violation::Gamma { value } => write!(f, "gamma {value} not in [0,1)"),
            Violation::RMax { value } => write!(f, "r_max {value} must be finite and nonnegative"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl TabularMdp {
    /// Builds an MDP and rejects it unless [`validate_mdp`] reports nothing.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        r_max: f64,
        gamma: f64,
    ) -> Result<Self> {
        let mdp = Self::from_parts_unchecked(num_states, num_actions, transitions, rewards, r_max, gamma);
        let report = validate_mdp(&mdp);
        if report.is_empty() {
            Ok(mdp)
        } else {
            Err(Error::InvalidMdp(report))
        }
    }

    /// Builds an MDP without checking any invariant. Use [`validate_mdp`]
    /// to inspect the result.
    pub fn from_parts_unchecked(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        r_max: f64,
        gamma: f64,
    ) -> Self {
        Self {
            num_states,
            num_actions,
            transitions,
            rewards,
            r_max,
            gamma,
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::OutOfRange(format!("gamma {gamma} not in [0,1)")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// `R_max / (1 - gamma)`.
    pub fn v_max(&self) -> f64 {
        self.r_max / (1.0 - self.gamma)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// `T(s' | s, a)`.
    #[inline]
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transitions[(s * self.num_actions + a) * self.num_states + next]
    }

    /// The next-state distribution `T(. | s, a)`.
    #[inline]
    pub fn next_dist(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.num_actions + a]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Rescales every `(s, a)` row to sum to one. Only ever applied on
    /// explicit request; rows with a nonpositive sum are left untouched and
    /// will still fail validation.
    pub fn renormalized(&self) -> Self {
        let mut out = self.clone();
        let s_count = self.num_states;
        if s_count == 0 {
            return out;
        }
        for row in out.transitions.chunks_mut(s_count) {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 && sum.is_finite() {
                row.iter_mut().for_each(|x| *x /= sum);
            }
        }
        out
    }

    /// Parses and validates an MDP file.
    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::parse_json(text, false)
    }

    /// Like [`TabularMdp::from_json_str`], optionally rescaling rows to sum
    /// to one before validation.
    pub fn parse_json(text: &str, renormalize: bool) -> Result<Self> {
        let file: MdpFile = serde_json::from_str(text)?;
        let mut mdp = file.into_mdp()?;
        if renormalize {
            mdp = mdp.renormalized();
        }
        let report = validate_mdp(&mdp);
        if !report.is_empty() {
            return Err(Error::InvalidMdp(report));
        }
        Ok(mdp)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MdpFile::from_mdp(self))?)
    }
}

/// On-disk layout: nested arrays indexed `[s][a][s']` and `[s][a]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub r_max: f64,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl MdpFile {
    pub fn from_mdp(mdp: &TabularMdp) -> Self {
        let (s_count, a_count) = (mdp.num_states, mdp.num_actions);
        let transitions = (0..s_count)
            .map(|s| (0..a_count).map(|a| mdp.next_dist(s, a).to_vec()).collect())
            .collect();
        let rewards = (0..s_count)
            .map(|s| (0..a_count).map(|a| mdp.reward(s, a)).collect())
            .collect();
        Self {
            num_states: s_count,
            num_actions: a_count,
            gamma: mdp.gamma,
            r_max: mdp.r_max,
            transitions,
            rewards,
            labels: mdp.labels.clone(),
        }
    }

    /// Converts to an MDP, checking shapes but not probability invariants.
    pub fn into_mdp(self) -> Result<TabularMdp> {
        let (s_count, a_count) = (self.num_states, self.num_actions);
        if self.transitions.len() != s_count || self.rewards.len() != s_count {
            return Err(Error::Format(format!(
                "expected {s_count} state rows in transitions and rewards"
            )));
        }
        let mut transitions = Vec::with_capacity(s_count * a_count * s_count);
        for (s, per_state) in self.transitions.into_iter().enumerate() {
            if per_state.len() != a_count {
                return Err(Error::Format(format!("transitions[{s}] has {} actions, expected {a_count}", per_state.len())));
            }
            for (a, row) in per_state.into_iter().enumerate() {
                if row.len() != s_count {
                    return Err(Error::Format(format!("transitions[{s}][{a}] has length {}, expected {s_count}", row.len())));
                }
                transitions.extend(row);
            }
        }
        let mut rewards = Vec::with_capacity(s_count * a_count);
        for (s, row) in self.rewards.into_iter().enumerate() {
            if row.len() != a_count {
                return Err(Error::Format(format!("rewards[{s}] has length {}, expected {a_count}", row.len())));
            }
            rewards.extend(row);
        }
        if let Some(labels) = &self.labels {
            if labels.len() != s_count {
                return Err(Error::Format(format!("{} labels for {s_count} states", labels.len())));
            }
        }
        let mut mdp = TabularMdp::from_parts_unchecked(s_count, a_count, transitions, rewards, self.r_max, self.gamma);
        mdp.labels = self.labels;
        Ok(mdp)
    }
}

/// Reports every violated invariant with its `(s, a)` coordinates.
pub fn validate_mdp(mdp: &TabularMdp) -> ValidationReport {
    let mut violations = Vec::new();
    let (s_count, a_count) = (mdp.num_states, mdp.num_actions);
    if s_count == 0 || a_count == 0 {
        violations.push(Violation::Shape {
            message: format!("need at least one state and one action, got S={s_count}, A={a_count}"),
        });
        return ValidationReport { violations };
    }
    if mdp.transitions.len() != s_count * a_count * s_count || mdp.rewards.len() != s_count * a_count {
        violations.push(Violation::Shape {
            message: format!(
                "transition buffer {} (expected {}), reward buffer {} (expected {})",
                mdp.transitions.len(),
                s_count * a_count * s_count,
                mdp.rewards.len(),
                s_count * a_count
            ),
        });
        return ValidationReport { violations };
    }
    if !(0.0..1.0).contains(&mdp.gamma) {
        violations.push(Violation::Gamma { value: mdp.gamma });
    }
    if !(mdp.r_max.is_finite() && mdp.r_max >= 0.0) {
        violations.push(Violation::RMax { value: mdp.r_max });
    }
    for s in 0..s_count {
        for a in 0..a_count {
            let row = mdp.next_dist(s, a);
            for (next, &value) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    violations.push(Violation::EntryOutOfRange { state: s, action: a, next, value });
                }
            }
            let sum: f64 = row.iter().sum();
            if !((sum - 1.0).abs() <= PROB_TOL) {
                violations.push(Violation::RowSum { state: s, action: a, sum });
            }
            let r = mdp.reward(s, a);
            if !(r >= 0.0 && r <= mdp.r_max) {
                violations.push(Violation::RewardOutOfRange { state: s, action: a, value: r });
            }
        }
    }
    ValidationReport { violations }
}

/// A row-stochastic `S x S` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix(DMatrix<f64>);

impl TransitionMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Precondition(format!(
                "transition matrix must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        for (i, row) in m.row_iter().enumerate() {
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::Precondition(format!("row {i} has an entry outside [0,1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::Precondition(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Precondition("rows must all have length S".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// `P(s, s') = (1/A) sum_a T(s' | s, a)`.
pub fn random_walk_matrix(mdp: &TabularMdp) -> Result<TransitionMatrix> {
    let report = validate_mdp(mdp);
    if !report.is_empty() {
        return Err(Error::InvalidMdp(report));
    }
    let (s_count, a_count) = (mdp.num_states, mdp.num_actions);
    let inv_a = 1.0 / a_count as f64;
    let m = DMatrix::from_fn(s_count, s_count, |s, next| {
        (0..a_count).map(|a| mdp.prob(s, a, next)).sum::<f64>() * inv_a
    });
    Ok(TransitionMatrix(m))
}

/// The lazy walk `(I + P) / 2`.
pub fn lazy_matrix(p: &TransitionMatrix) -> TransitionMatrix {
    let n = p.size();
    TransitionMatrix((DMatrix::identity(n, n) + &p.0) * 0.5)
}

/// Strongly connected components of the graph with an edge `u -> v`
/// wherever `P(u, v) > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentStructure {
    /// Component index per state. Components are numbered by their smallest
    /// member state.
    pub component_id: Vec<usize>,
    pub is_strongly_connected: bool,
    /// Components with no edge leaving them, each sorted ascending.
    pub closed_components: Vec<Vec<usize>>,
}

impl ComponentStructure {
    pub fn num_components(&self) -> usize {
        self.component_id.iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn members(&self, component: usize) -> Vec<usize> {
        (0..self.component_id.len())
            .filter(|&s| self.component_id[s] == component)
            .collect()
    }
}

pub fn component_structure(p: &TransitionMatrix) -> ComponentStructure {
    let n = p.size();
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|u| (0..n).filter(|&v| p.get(u, v) > 0.0).collect())
        .collect();
    component_structure_of_graph(&adjacency)
}

/// Iterative Tarjan over an adjacency list.
pub(crate) fn component_structure_of_graph(adjacency: &[Vec<usize>]) -> ComponentStructure {
    const UNSEEN: usize = usize::MAX;
    let n = adjacency.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut raw_id = vec![UNSEEN; n];
    let mut next_index = 0;
    let mut raw_count = 0;

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        // (node, position in its adjacency list)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (u, ref mut pos)) = call.last_mut() {
            if *pos < adjacency[u].len() {
                let v = adjacency[u][*pos];
                *pos += 1;
                if index[v] == UNSEEN {
                    index[v] = next_index;
                    low[v] = next_index;
                    next_index += 1;
                    stack.push(v);
                    on_stack[v] = true;
                    call.push((v, 0));
                } else if on_stack[v] {
                    low[u] = low[u].min(index[v]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[u]);
                }
                if low[u] == index[u] {
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        raw_id[w] = raw_count;
                        if w == u {
                            break;
                        }
                    }
                    raw_count += 1;
                }
            }
        }
    }

    // Renumber by smallest member so the labelling is canonical.
    let mut remap = vec![UNSEEN; raw_count];
    let mut next = 0;
    for s in 0..n {
        if remap[raw_id[s]] == UNSEEN {
            remap[raw_id[s]] = next;
            next += 1;
        }
    }
    let component_id: Vec<usize> = raw_id.iter().map(|&r| remap[r]).collect();

    let mut leaves = vec![false; next];
    for (u, targets) in adjacency.iter().enumerate() {
        if targets.iter().any(|&v| component_id[v] != component_id[u]) {
            leaves[component_id[u]] = true;
        }
    }
    let closed_components = (0..next)
        .filter(|&c| !leaves[c])
        .map(|c| (0..n).filter(|&s| component_id[s] == c).collect())
        .collect();

    ComponentStructure {
        component_id,
        is_strongly_connected: next == 1,
        closed_components,
    }
}

/// Restricts an MDP to a closed set of states: every action from a member
/// must keep all of its mass inside the set. States are reindexed in the
/// order given.
pub fn restrict_to_states(mdp: &TabularMdp, states: &[usize]) -> Result<TabularMdp> {
    let (s_count, a_count) = (mdp.num_states, mdp.num_actions);
    let mut position = vec![None; s_count];
    for (i, &s) in states.iter().enumerate() {
        if s >= s_count || position[s].is_some() {
            return Err(Error::Precondition(format!("invalid or repeated state {s} in restriction")));
        }
        position[s] = Some(i);
    }
    let k = states.len();
    if k == 0 {
        return Err(Error::Precondition("cannot restrict to an empty state set".into()));
    }
    let mut transitions = vec![0.0; k * a_count * k];
    let mut rewards = Vec::with_capacity(k * a_count);
    for (i, &s) in states.iter().enumerate() {
        for a in 0..a_count {
            for (next, &prob) in mdp.next_dist(s, a).iter().enumerate() {
                if prob == 0.0 {
                    continue;
                }
                match position[next] {
                    Some(j) => transitions[(i * a_count + a) * k + j] = prob,
                    None => {
                        return Err(Error::Precondition(format!(
                            "state set is not closed: (s={s}, a={a}) reaches {next}"
                        )))
                    }
                }
            }
            rewards.push(mdp.reward(s, a));
        }
    }
    let mut out = TabularMdp::from_parts_unchecked(k, a_count, transitions, rewards, mdp.r_max, mdp.gamma);
    if let Some(labels) = &mdp.labels {
        out.labels = Some(states.iter().map(|&s| labels[s].clone()).collect());
    }
    Ok(out)
}
