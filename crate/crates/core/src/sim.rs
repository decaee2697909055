//! Simulation oracles: random-walk trajectories, empirical covering length,
//! exact within-`k` reach probabilities and action-coverage trials.
//!
//! Every trial draws from its own ChaCha8 stream: the generator is seeded
//! with the master seed and the stream index selects the trial. For cover
//! estimation the stream index is `start_pair * trials + trial`, where
//! `start_pair = s * A + a`. Results are therefore independent of how the
//! work is scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{validate_mdp, TabularMdp, TransitionMatrix};

/// The generator for one trial.
pub fn trial_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Cumulative sparse rows for inverse-CDF sampling.
#[derive(Debug, Clone)]
pub(crate) struct RowSampler {
    rows: Vec<Vec<(usize, f64)>>,
}

impl RowSampler {
    fn new<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Self {
        let rows = rows
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(j, &p)| {
                        acc += p;
                        (j, acc)
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    #[inline]
    pub(crate) fn sample<R: Rng>(&self, row: usize, rng: &mut R) -> usize {
        let cdf = &self.rows[row];
        let u: f64 = rng.random::<f64>() * cdf.last().map_or(1.0, |x| x.1);
        cdf.iter().find(|(_, c)| u < *c).unwrap_or(cdf.last().expect("empty row")).0
    }
}

pub(crate) fn mdp_sampler(mdp: &TabularMdp) -> RowSampler {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    RowSampler::new((0..s * a).map(|k| mdp.next_dist(k / a, k % a)))
}

fn chain_sampler(p: &TransitionMatrix) -> (RowSampler, usize) {
    let n = p.size();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| p.get(i, j)).collect()).collect();
    (RowSampler::new(rows.iter().map(|r| r.as_slice())), n)
}

fn check_valid(mdp: &TabularMdp) -> Result<()> {
    let report = validate_mdp(mdp);
    if report.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidMdp(report))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// `horizon + 1` states; `states[t + 1]` follows `(states[t], actions[t])`.
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub length: usize,
    pub seed: u64,
}

/// Random walk whose first action is forced to `start_action`; later actions
/// are uniform.
pub fn simulate_random_walk(
    mdp: &TabularMdp,
    start_state: usize,
    start_action: usize,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    check_valid(mdp)?;
    if horizon < 1 {
        return Err(Error::OutOfRange("horizon must be at least 1".into()));
    }
    let a_count = mdp.num_actions();
    if start_state >= mdp.num_states() || start_action >= a_count {
        return Err(Error::OutOfRange(format!("start pair ({start_state}, {start_action}) out of range")));
    }
    let sampler = mdp_sampler(mdp);
    let mut rng = trial_rng(seed, 0);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut s = start_state;
    states.push(s);
    for t in 0..horizon {
        let a = if t == 0 { start_action } else { rng.random_range(0..a_count) };
        s = sampler.sample(s * a_count + a, &mut rng);
        actions.push(a);
        states.push(s);
    }
    Ok(Trajectory { states, actions, length: horizon, seed })
}

/// Steps until every `(s, a)` pair has been executed at least once, with
/// the forced first pair counted. `None` if not covered within `horizon`.
fn cover_time<R: Rng>(
    sampler: &RowSampler,
    s_count: usize,
    a_count: usize,
    start: (usize, usize),
    horizon: usize,
    rng: &mut R,
) -> Option<usize> {
    let mut seen = vec![false; s_count * a_count];
    let mut remaining = s_count * a_count;
    let (mut s, mut a) = start;
    for t in 1..=horizon {
        let pair = s * a_count + a;
        if !seen[pair] {
            seen[pair] = true;
            remaining -= 1;
            if remaining == 0 {
                return Some(t);
            }
        }
        s = sampler.sample(pair, rng);
        a = rng.random_range(0..a_count);
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartMedian {
    pub state: usize,
    pub action: usize,
    /// `horizon + 1` when more than half of the trials were censored.
    pub median: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverLengthEstimate {
    pub per_start_median: Vec<StartMedian>,
    /// Largest per-start median.
    pub estimate: usize,
    pub trials: usize,
    pub horizon: usize,
    /// Fraction of all trials that covered every pair within the horizon.
    pub covered_fraction_at_horizon: f64,
    pub censored_trials: usize,
    /// The estimate itself is censored (exceeds the horizon).
    pub censored: bool,
    pub seed: u64,
}

/// The smallest time by which at least half the samples are done: the
/// `ceil(n/2)`-th order statistic.
pub fn half_quantile(times: &mut [usize]) -> usize {
    times.sort_unstable();
    times[times.len().div_ceil(2) - 1]
}

/// Empirical covering length: for each start pair, the median of `trials`
/// cover times, maximised over start pairs. Censored trials count as
/// `horizon + 1`.
pub fn estimate_cover_length(mdp: &TabularMdp, trials: usize, horizon: usize, seed: u64) -> Result<CoverLengthEstimate> {
    check_valid(mdp)?;
    if trials < 2 {
        return Err(Error::OutOfRange("need at least 2 trials".into()));
    }
    if horizon < 1 {
        return Err(Error::OutOfRange("horizon must be at least 1".into()));
    }
    let (s_count, a_count) = (mdp.num_states(), mdp.num_actions());
    let sampler = mdp_sampler(mdp);
    let pairs = s_count * a_count;
    let times: Vec<Option<usize>> = (0..pairs * trials)
        .into_par_iter()
        .map(|stream| {
            let pair = stream / trials;
            let mut rng = trial_rng(seed, stream as u64);
            cover_time(&sampler, s_count, a_count, (pair / a_count, pair % a_count), horizon, &mut rng)
        })
        .collect();

    let censored_trials = times.iter().filter(|t| t.is_none()).count();
    let per_start_median: Vec<StartMedian> = times
        .chunks(trials)
        .enumerate()
        .map(|(pair, chunk)| {
            let mut values: Vec<usize> = chunk.iter().map(|t| t.unwrap_or(horizon + 1)).collect();
            StartMedian {
                state: pair / a_count,
                action: pair % a_count,
                median: half_quantile(&mut values),
            }
        })
        .collect();
    let estimate = per_start_median.iter().map(|m| m.median).max().unwrap_or(0);
    Ok(CoverLengthEstimate {
        per_start_median,
        estimate,
        trials,
        horizon,
        covered_fraction_at_horizon: 1.0 - censored_trials as f64 / times.len() as f64,
        censored_trials,
        censored: estimate > horizon,
        seed,
    })
}

/// `P(reach v from u within k steps)` for `k = 0..=k_max`, by propagating
/// the mass that has not yet hit `v` through `P` with `v` absorbing.
/// `u == v` counts as already reached.
pub fn reach_prob_curve(p: &TransitionMatrix, u: usize, v: usize, k_max: usize) -> Vec<f64> {
    let n = p.size();
    if u == v {
        return vec![1.0; k_max + 1];
    }
    let mut mass = vec![0.0; n];
    mass[u] = 1.0;
    let mut next = vec![0.0; n];
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(0.0);
    for _ in 0..k_max {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (j, slot) in next.iter_mut().enumerate() {
                if j != v {
                    *slot += m * p.get(i, j);
                }
            }
        }
        std::mem::swap(&mut mass, &mut next);
        out.push(1.0 - mass.iter().sum::<f64>());
    }
    out
}

pub fn exact_reach_prob(p: &TransitionMatrix, u: usize, v: usize, k: usize) -> f64 {
    reach_prob_curve(p, u, v, k)[k]
}

/// Fraction of trials in which `visits` uniform draws over `num_actions`
/// actions miss at least one action.
pub fn action_coverage_trial(num_actions: usize, visits: usize, trials: usize, seed: u64) -> Result<f64> {
    if num_actions < 1 || trials < 1 {
        return Err(Error::OutOfRange("need A >= 1 and trials >= 1".into()));
    }
    let failures: usize = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let mut seen = vec![false; num_actions];
            let mut missing = num_actions;
            for _ in 0..visits {
                let a = rng.random_range(0..num_actions);
                if !seen[a] {
                    seen[a] = true;
                    missing -= 1;
                }
            }
            usize::from(missing > 0)
        })
        .sum();
    Ok(failures as f64 / trials as f64)
}

/// Empirical state-visit frequencies of a `steps`-long walk on `P`
/// (the start state is not counted).
pub fn visit_frequencies(p: &TransitionMatrix, start: usize, steps: usize, seed: u64) -> Vec<f64> {
    let (sampler, n) = chain_sampler(p);
    let mut rng = trial_rng(seed, 0);
    let mut counts = vec![0usize; n];
    let mut s = start;
    for _ in 0..steps {
        s = sampler.sample(s, &mut rng);
        counts[s] += 1;
    }
    counts.iter().map(|&c| c as f64 / steps as f64).collect()
}

/// Monte Carlo mean first-passage time from `u` to `v` on `P`.
pub fn mc_hitting_time(p: &TransitionMatrix, u: usize, v: usize, trials: usize, seed: u64) -> f64 {
    let (sampler, _) = chain_sampler(p);
    let total: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let mut s = u;
            let mut t = 0u64;
            while s != v {
                s = sampler.sample(s, &mut rng);
                t += 1;
            }
            t
        })
        .sum();
    total as f64 / trials as f64
}
