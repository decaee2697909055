//! Exact solvers and random-walk explore-then-exploit Q-learning.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{validate_mdp, TabularMdp};
use crate::sim::{mdp_sampler, trial_rng};

/// Default learning-rate exponent.
pub const DEFAULT_OMEGA: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QTable {
    pub num_states: usize,
    pub num_actions: usize,
    /// Row-major `S x A`.
    pub values: Vec<f64>,
    pub visit_counts: Vec<u64>,
    pub omega: f64,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize, omega: f64) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![0.0; num_states * num_actions],
            visit_counts: vec![0; num_states * num_actions],
            omega,
        }
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    fn max_at(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A stochastic policy, row-major `S x A` action probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Policy {
    pub num_actions: usize,
    pub probs: Vec<f64>,
}

impl Policy {
    pub fn deterministic(actions: &[usize], num_actions: usize) -> Self {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * num_actions + a] = 1.0;
        }
        Self { num_actions, probs }
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.probs.len() / self.num_actions
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalSolution {
    /// Row-major `S x A`.
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations: usize,
}

fn bellman(mdp: &TabularMdp, q: &[f64], out: &mut [f64]) {
    let (s_count, a_count) = (mdp.num_states(), mdp.num_actions());
    let v: Vec<f64> = (0..s_count)
        .map(|s| q[s * a_count..(s + 1) * a_count].iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    for s in 0..s_count {
        for a in 0..a_count {
            let future: f64 = mdp.next_dist(s, a).iter().zip(&v).map(|(p, x)| p * x).sum();
            out[s * a_count + a] = mdp.reward(s, a) + mdp.gamma() * future;
        }
    }
}

/// Value iteration until `||Q - BQ|| <= tol (1 - gamma) / (2 gamma)`, which
/// puts `Q` within `tol` of `Q*`.
pub fn solve_optimal(mdp: &TabularMdp, tol: f64) -> Result<OptimalSolution> {
    let report = validate_mdp(mdp);
    if !report.is_empty() {
        return Err(Error::InvalidMdp(report));
    }
    let gamma = mdp.gamma();
    let (s_count, a_count) = (mdp.num_states(), mdp.num_actions());
    let threshold = if gamma > 0.0 { tol * (1.0 - gamma) / (2.0 * gamma) } else { f64::INFINITY };
    let mut q = vec![0.0; s_count * a_count];
    let mut next = q.clone();
    let mut iterations = 0;
    loop {
        bellman(mdp, &q, &mut next);
        iterations += 1;
        std::mem::swap(&mut q, &mut next);
        // q = B(prev), next = prev; ||B(prev) - Q*|| <= gamma/(1-gamma) * residual
        let residual = q.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual <= threshold || gamma == 0.0 {
            break;
        }
    }
    let v = (0..s_count)
        .map(|s| q[s * a_count..(s + 1) * a_count].iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Ok(OptimalSolution { q, v, iterations })
}

/// Exact `V^pi` from `(I - gamma P^pi) V = R^pi`.
pub fn policy_value(mdp: &TabularMdp, policy: &Policy) -> Result<Vec<f64>> {
    let (s_count, a_count) = (mdp.num_states(), mdp.num_actions());
    if policy.num_actions != a_count || policy.probs.len() != s_count * a_count {
        return Err(Error::Precondition("policy shape does not match the MDP".into()));
    }
    let gamma = mdp.gamma();
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::OutOfRange(format!("gamma = {gamma} not in [0,1)")));
    }
    let mut system = DMatrix::identity(s_count, s_count);
    let mut rhs = DVector::zeros(s_count);
    for s in 0..s_count {
        for a in 0..a_count {
            let w = policy.probs[s * a_count + a];
            if w == 0.0 {
                continue;
            }
            rhs[s] += w * mdp.reward(s, a);
            for (next, &p) in mdp.next_dist(s, a).iter().enumerate() {
                system[(s, next)] -= gamma * w * p;
            }
        }
    }
    let v = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("policy evaluation".into()))?;
    Ok(v.iter().copied().collect())
}

/// Argmax per state; ties go to the lowest action index.
pub fn greedy_actions(values: &[f64], num_actions: usize) -> Vec<usize> {
    values
        .chunks(num_actions)
        .map(|row| {
            let mut best = 0;
            for (a, &x) in row.iter().enumerate().skip(1) {
                if x > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect()
}

pub fn greedy_policy(q: &QTable) -> Policy {
    Policy::deterministic(&greedy_actions(&q.values, q.num_actions), q.num_actions)
}

/// Q-learning along one random-walk trajectory of `steps` transitions with
/// learning rate `1 / n(s,a)^omega`. The start state is uniform.
pub fn q_learning_random_walk(
    mdp: &TabularMdp,
    steps: usize,
    omega: f64,
    seed: u64,
    q0: Option<&[f64]>,
) -> Result<QTable> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::OutOfRange(format!("omega = {omega} not in (0,1)")));
    }
    if steps < 1 {
        return Err(Error::OutOfRange("steps must be at least 1".into()));
    }
    let report = validate_mdp(mdp);
    if !report.is_empty() {
        return Err(Error::InvalidMdp(report));
    }
    let (s_count, a_count) = (mdp.num_states(), mdp.num_actions());
    let mut table = QTable::zeros(s_count, a_count, omega);
    if let Some(init) = q0 {
        if init.len() != table.values.len() {
            return Err(Error::Precondition(format!("q0 has {} entries, expected {}", init.len(), table.values.len())));
        }
        table.values.copy_from_slice(init);
    }
    let sampler = mdp_sampler(mdp);
    let gamma = mdp.gamma();
    let mut rng = trial_rng(seed, 0);
    let mut s = rng.random_range(0..s_count);
    for _ in 0..steps {
        let a = rng.random_range(0..a_count);
        let pair = s * a_count + a;
        let next = sampler.sample(pair, &mut rng);

        table.visit_counts[pair] += 1;
        let alpha = (table.visit_counts[pair] as f64).powf(-omega);
        let target = mdp.reward(s, a) + gamma * table.max_at(next);
        table.values[pair] = (1.0 - alpha) * table.values[pair] + alpha * target;
        s = next;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExploitReport {
    /// `||Q_T - Q*||_inf`.
    pub q_error: f64,
    /// `||V* - V^{greedy(Q_T)}||_inf`.
    pub value_gap: f64,
    pub epsilon: f64,
    pub success: bool,
    pub steps_used: usize,
    pub seed: u64,
}

/// Learns with a random walk for `steps`, then evaluates the greedy policy
/// of the learned table exactly.
pub fn explore_then_exploit(mdp: &TabularMdp, steps: usize, omega: f64, epsilon: f64, seed: u64) -> Result<ExploitReport> {
    let optimal = solve_optimal(mdp, 1e-10)?;
    let table = q_learning_random_walk(mdp, steps, omega, seed, None)?;
    evaluate_against(mdp, &table, &optimal, epsilon, steps, seed)
}

/// Scores a learned table against a precomputed optimum.
pub fn evaluate_against(
    mdp: &TabularMdp,
    table: &QTable,
    optimal: &OptimalSolution,
    epsilon: f64,
    steps_used: usize,
    seed: u64,
) -> Result<ExploitReport> {
    let q_error = table
        .values
        .iter()
        .zip(&optimal.q)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let greedy_values = policy_value(mdp, &greedy_policy(table))?;
    let value_gap = optimal
        .v
        .iter()
        .zip(&greedy_values)
        .map(|(a, b)| (a - b).max(0.0))
        .fold(0.0, f64::max);
    Ok(ExploitReport {
        q_error,
        value_gap,
        epsilon,
        success: value_gap <= epsilon,
        steps_used,
        seed,
    })
}
