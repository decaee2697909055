//! Closed-form covering-length and sample-complexity bounds, plus the
//! structural quantities they are built from (diameter, action variation,
//! first-passage times, sub-matrix norms).

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{component_structure, random_walk_matrix, TabularMdp, TransitionMatrix};
use crate::serde_util::{opt_real_or_inf, real_or_inf};
use crate::spectral::{
    cheeger_check, cheeger_constant, chung_laplacian, locally_symmetric, stationary_distribution, CheegerCheck,
    StationaryDistribution, CHEEGER_MAX_STATES,
};

/// Default multiplier of the action-variation covering bound.
pub const DEFAULT_ACTION_VARIATION_C: f64 = 80.0;
/// Default multiplier of the Q-learning step bound.
pub const DEFAULT_Q_LEARNING_C: f64 = 1.0;
pub const DEFAULT_DIAMETER_TOL: f64 = 1e-9;
pub const DEFAULT_DIAMETER_MAX_ITER: usize = 1_000_000;

fn ln_4sa(s: usize, a: usize) -> f64 {
    (4.0 * s as f64 * a as f64).ln()
}

/// `8 A ln(4SA) (2 ln(2/phi_min) / ln(2/(2-lambda)) + 1) sum_s 1/phi(s)`.
pub fn laplacian_cover_bound(phi: &StationaryDistribution, lambda: f64, s: usize, a: usize) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::OutOfRange(format!("lambda = {lambda} must be positive")));
    }
    if phi.phi.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::OutOfRange("phi must be strictly positive".into()));
    }
    let k = k0(phi.phi_min, lambda)?;
    Ok(8.0 * a as f64 * ln_4sa(s, a) * k * phi.inverse_sum())
}

/// `2 ln(2/phi_min) / ln(2/(2-lambda)) + 1`; tends to 1 as lambda -> 2.
pub fn k0(phi_min: f64, lambda: f64) -> Result<f64> {
    if !(phi_min > 0.0 && phi_min <= 1.0) {
        return Err(Error::OutOfRange(format!("phi_min = {phi_min} not in (0,1]")));
    }
    if !(lambda > 0.0 && lambda <= 2.0 + 1e-12) {
        return Err(Error::OutOfRange(format!("lambda = {lambda} not in (0,2]")));
    }
    let denom = (2.0 / (2.0 - lambda.min(2.0))).ln();
    Ok(2.0 * (2.0 / phi_min).ln() / denom + 1.0)
}

/// `phi(v) - sqrt(phi(v)/phi(u)) (1 - lambda/2)^{k/2}`. May be negative, in
/// which case the inequality is vacuous.
pub fn reach_prob_lower_bound(u: usize, v: usize, k: usize, phi: &StationaryDistribution, lambda: f64) -> f64 {
    let (pu, pv) = (phi.phi[u], phi.phi[v]);
    pv - (pv / pu).sqrt() * (1.0 - lambda / 2.0).powf(k as f64 / 2.0)
}

/// `max_{s,s'} min_pi E[first passage s -> s']`, by value iteration per
/// target. Infinite when some target is unreachable from some state.
pub fn diameter(mdp: &TabularMdp, tol: f64, max_iter: usize) -> Result<f64> {
    let (s_count, a_count) = (mdp.num_states(), mdp.num_actions());
    // sparse successor lists per (s, a)
    let support: Vec<Vec<(usize, f64)>> = (0..s_count * a_count)
        .map(|k| {
            mdp.next_dist(k / a_count, k % a_count)
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(j, &p)| (j, p))
                .collect()
        })
        .collect();
    let mut predecessors = vec![Vec::new(); s_count];
    for (k, succ) in support.iter().enumerate() {
        for &(j, _) in succ {
            predecessors[j].push(k / a_count);
        }
    }

    let per_target: Vec<Result<f64>> = (0..s_count)
        .into_par_iter()
        .map(|target| {
            let mut reach = vec![false; s_count];
            reach[target] = true;
            let mut queue = VecDeque::from([target]);
            while let Some(x) = queue.pop_front() {
                for &y in &predecessors[x] {
                    if !reach[y] {
                        reach[y] = true;
                        queue.push_back(y);
                    }
                }
            }
            if reach.iter().any(|r| !r) {
                return Ok(f64::INFINITY);
            }
            let mut h = vec![0.0; s_count];
            let mut next = vec![0.0; s_count];
            for _ in 0..max_iter {
                let mut residual = 0.0f64;
                for s in 0..s_count {
                    if s == target {
                        continue;
                    }
                    let best = (0..a_count)
                        .map(|a| support[s * a_count + a].iter().map(|&(j, p)| p * h[j]).sum::<f64>())
                        .fold(f64::INFINITY, f64::min);
                    next[s] = 1.0 + best;
                    residual = residual.max((next[s] - h[s]).abs());
                }
                std::mem::swap(&mut h, &mut next);
                if residual <= tol {
                    return Ok(h.iter().copied().fold(0.0, f64::max));
                }
            }
            Err(Error::NotConverged {
                iterations: max_iter,
                residual: h.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            })
        })
        .collect();
    let mut d = 0.0f64;
    for r in per_target {
        d = d.max(r?);
    }
    Ok(d)
}

/// `max_s max_a || T(.|s,a) - (1/A) sum_a' T(.|s,a') ||_1`.
pub fn action_variation(mdp: &TabularMdp) -> f64 {
    let (s_count, a_count) = (mdp.num_states(), mdp.num_actions());
    let mut worst = 0.0f64;
    for s in 0..s_count {
        let mean: Vec<f64> = (0..s_count)
            .map(|j| {
                let first = mdp.prob(s, 0, j);
                if (1..a_count).all(|a| mdp.prob(s, a, j) == first) {
                    first
                } else {
                    (0..a_count).map(|a| mdp.prob(s, a, j)).sum::<f64>() / a_count as f64
                }
            })
            .collect();
        for a in 0..a_count {
            let dev: f64 = mdp.next_dist(s, a).iter().zip(&mean).map(|(x, m)| (x - m).abs()).sum();
            worst = worst.max(dev);
        }
    }
    worst
}

/// `c 5D S (A ln(4SA) + ln(4S))` when `delta_p <= 2/(5D)`, else `None`.
/// `c` defaults to [`DEFAULT_ACTION_VARIATION_C`].
pub fn action_variation_cover_bound(d: f64, delta_p: f64, s: usize, a: usize, c: f64) -> Result<Option<f64>> {
    if !d.is_finite() {
        return Err(Error::OutOfRange("diameter is infinite".into()));
    }
    if delta_p > 2.0 / (5.0 * d) {
        return Ok(None);
    }
    let (sf, af) = (s as f64, a as f64);
    Ok(Some(c * 5.0 * d * sf * (af * ln_4sa(s, a) + (4.0 * sf).ln())))
}

/// `P` with row and column `v` deleted.
fn submatrix(p: &TransitionMatrix, v: usize) -> DMatrix<f64> {
    p.as_matrix().clone().remove_row(v).remove_column(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingTimes {
    /// Expected first-passage time to the target from each state; the
    /// target's own entry is 0.
    pub times: Vec<f64>,
    /// `max_u E_u[T_v]`, equal to `||(I - P^T_{-v,-v})^{-1}||_1`.
    pub max: f64,
}

/// Solves `(I - P_{-v,-v}) x = 1`.
pub fn hitting_time_exact(p: &TransitionMatrix, v: usize) -> Result<HittingTimes> {
    let n = p.size();
    if v >= n {
        return Err(Error::OutOfRange(format!("target {v} out of range for {n} states")));
    }
    if n == 1 {
        return Ok(HittingTimes { times: vec![0.0], max: 0.0 });
    }
    let cs = component_structure(p);
    if !cs.is_strongly_connected {
        return Err(Error::Reducible(cs));
    }
    let sub = submatrix(p, v);
    let system = DMatrix::identity(n - 1, n - 1) - sub;
    let x = system
        .lu()
        .solve(&DVector::from_element(n - 1, 1.0))
        .ok_or_else(|| Error::Singular(format!("first-passage system for target {v}")))?;
    if x.iter().any(|&t| !(t.is_finite() && t >= 1.0 - 1e-9)) {
        return Err(Error::Singular(format!("target {v} is not reachable from every state")));
    }
    let mut times = Vec::with_capacity(n);
    times.extend(x.iter().take(v).copied());
    times.push(0.0);
    times.extend(x.iter().skip(v).copied());
    let max = x.iter().copied().fold(0.0, f64::max);
    Ok(HittingTimes { times, max })
}

/// Induced matrix norms with an exact algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixNorm {
    One,
    Two,
    Inf,
}

impl MatrixNorm {
    pub const ALL: [MatrixNorm; 3] = [MatrixNorm::One, MatrixNorm::Two, MatrixNorm::Inf];

    /// `1 - 1/p`.
    fn holder_exponent(self) -> f64 {
        match self {
            MatrixNorm::One => 0.0,
            MatrixNorm::Two => 0.5,
            MatrixNorm::Inf => 1.0,
        }
    }

    pub fn of(self, m: &DMatrix<f64>) -> f64 {
        if m.is_empty() {
            return 0.0;
        }
        match self {
            MatrixNorm::One => m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max),
            MatrixNorm::Inf => m.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max),
            MatrixNorm::Two => m.clone().singular_values().iter().copied().fold(0.0, f64::max),
        }
    }
}

/// `||P^T_{-v,-v}||_p`.
pub fn submatrix_norm(p: &TransitionMatrix, v: usize, norm: MatrixNorm) -> f64 {
    norm.of(&submatrix(p, v).transpose())
}

/// Per-target term `inf_p S^{1-1/p} / (1 - ||P^T_{-v,-v}||_p)` over the
/// given norms; infinite when no norm is below one.
pub fn submatrix_term(p: &TransitionMatrix, v: usize, norms: &[MatrixNorm]) -> f64 {
    let s = p.size() as f64;
    let sub_t = submatrix(p, v).transpose();
    norms
        .iter()
        .filter_map(|&norm| {
            let value = norm.of(&sub_t);
            (value < 1.0).then(|| s.powf(norm.holder_exponent()) / (1.0 - value))
        })
        .fold(f64::INFINITY, f64::min)
}

/// `4 A ln(4SA) sum_v inf_p S^{1-1/p} / (1 - ||P^T_{-v,-v}||_p)`.
pub fn submatrix_cover_bound(p: &TransitionMatrix, a: usize, norms: &[MatrixNorm]) -> f64 {
    let s = p.size();
    let terms: Vec<f64> = (0..s).into_par_iter().map(|v| submatrix_term(p, v, norms)).collect();
    let total: f64 = terms.iter().sum();
    4.0 * a as f64 * ln_4sa(s, a) * total
}

/// `4 S A ln(4SA) / p_min` with `p_min` the smallest off-diagonal entry;
/// infinite if any off-diagonal entry is zero.
pub fn pmin_cover_bound(p: &TransitionMatrix, a: usize) -> f64 {
    let s = p.size();
    let mut p_min = 1.0f64;
    for u in 0..s {
        for v in 0..s {
            if u != v {
                p_min = p_min.min(p.get(u, v));
            }
        }
    }
    if p_min <= 0.0 {
        return f64::INFINITY;
    }
    4.0 * s as f64 * a as f64 * ln_4sa(s, a) / p_min
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct T0Params {
    /// Covering length.
    pub l: f64,
    pub v_max: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub omega: f64,
    pub s: usize,
    pub a: usize,
    pub c: f64,
}

/// Order-of-magnitude step budget for Q-learning with learning rate
/// `1/n^omega` given covering length `L`:
///
/// `c ((L^{1+3w} V^2 ln(SAV/(delta(1-g)eps)) / ((1-g)^2 eps^2))^{1/w}
///     + (L/(1-g) ln(V/eps))^{1/(1-w)})`.
pub fn q_learning_t0(params: &T0Params) -> Result<f64> {
    let T0Params { l, v_max, gamma, epsilon, delta, omega, s, a, c } = *params;
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::OutOfRange(format!("omega = {omega} not in (0,1)")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OutOfRange(format!("epsilon = {epsilon}, delta = {delta} must lie in (0,1)")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::OutOfRange(format!("gamma = {gamma} not in [0,1)")));
    }
    if !(l >= 1.0) {
        return Err(Error::OutOfRange(format!("L = {l} must be at least 1")));
    }
    if !(v_max > epsilon) {
        return Err(Error::OutOfRange(format!("V_max = {v_max} must exceed epsilon = {epsilon}")));
    }
    let horizon = 1.0 - gamma;
    let log1 = (s as f64 * a as f64 * v_max / (delta * horizon * epsilon)).ln();
    let term1 = l.powf(1.0 + 3.0 * omega) * v_max * v_max * log1 / (horizon * horizon * epsilon * epsilon);
    let term2 = l / horizon * (v_max / epsilon).ln();
    Ok(c * (term1.powf(1.0 / omega) + term2.powf(1.0 / (1.0 - omega))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardnessOptions {
    /// Run the exhaustive Cheeger search when `S` is small enough.
    pub cheeger: bool,
    pub action_variation_c: f64,
    pub q_learning_c: f64,
    pub omega: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Defaults to `R_max / (1 - gamma)`.
    pub v_max: Option<f64>,
    pub diameter_tol: f64,
    pub diameter_max_iter: usize,
}

impl Default for HardnessOptions {
    fn default() -> Self {
        Self {
            cheeger: true,
            action_variation_c: DEFAULT_ACTION_VARIATION_C,
            q_learning_c: DEFAULT_Q_LEARNING_C,
            omega: 0.7,
            epsilon: 0.1,
            delta: 0.1,
            v_max: None,
            diameter_tol: DEFAULT_DIAMETER_TOL,
            diameter_max_iter: DEFAULT_DIAMETER_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardnessFlags {
    pub irreducible: bool,
    pub locally_symmetric: bool,
    pub symmetry_witness: Option<(usize, usize)>,
    /// `1/lambda` and `1/phi_min`: polynomial growth of both in the MDP
    /// size makes random-walk Q-learning PAC.
    pub inv_lambda: f64,
    pub inv_phi_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardnessReport {
    pub num_states: usize,
    pub num_actions: usize,
    pub phi: Vec<f64>,
    pub phi_min: f64,
    pub lambda: f64,
    pub cheeger: Option<f64>,
    pub cheeger_check: Option<CheegerCheck>,
    #[serde(serialize_with = "real_or_inf")]
    pub diameter: f64,
    pub action_variation: f64,
    pub k0: f64,
    pub laplacian_cover_bound: f64,
    #[serde(serialize_with = "opt_real_or_inf")]
    pub action_variation_cover_bound: Option<f64>,
    #[serde(serialize_with = "opt_real_or_inf")]
    pub submatrix_cover_bound: Option<f64>,
    #[serde(serialize_with = "opt_real_or_inf")]
    pub pmin_cover_bound: Option<f64>,
    /// Order-of-magnitude indicator only; the multiplier is `options.q_learning_c`.
    #[serde(serialize_with = "opt_real_or_inf")]
    pub q_learning_t0: Option<f64>,
    /// Which covering bound was used as `L` for `q_learning_t0`.
    pub q_learning_t0_cover_source: Option<&'static str>,
    pub v_max: f64,
    pub flags: HardnessFlags,
    pub options: HardnessOptions,
}

/// Assembles every structural quantity and bound for an irreducible MDP.
pub fn hardness_report(mdp: &TabularMdp, options: &HardnessOptions) -> Result<HardnessReport> {
    let p = random_walk_matrix(mdp)?;
    let cs = component_structure(&p);
    if !cs.is_strongly_connected {
        return Err(Error::Reducible(cs));
    }
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    let phi = stationary_distribution(&p)?;
    let spectrum = chung_laplacian(&p, &phi)?;
    let lambda = spectrum.lambda;

    let (cheeger, check) = if options.cheeger && s <= CHEEGER_MAX_STATES {
        let c = cheeger_constant(&p, &phi)?;
        (Some(c.h), Some(cheeger_check(c.h, lambda, 1e-9)))
    } else {
        (None, None)
    };

    let diam = diameter(mdp, options.diameter_tol, options.diameter_max_iter)?;
    let delta_p = action_variation(mdp);
    let k = k0(phi.phi_min, lambda)?;
    let lap_bound = laplacian_cover_bound(&phi, lambda, s, a)?;
    let av_bound = if diam.is_finite() {
        action_variation_cover_bound(diam, delta_p, s, a, options.action_variation_c)?
    } else {
        None
    };
    let sub_bound = submatrix_cover_bound(&p, a, &MatrixNorm::ALL);
    let pmin_bound = pmin_cover_bound(&p, a);

    let candidates = [
        ("laplacian", Some(lap_bound)),
        ("action_variation", av_bound),
        ("submatrix", Some(sub_bound)),
        ("pmin", Some(pmin_bound)),
    ];
    let best = candidates
        .iter()
        .filter_map(|&(name, b)| b.filter(|x| x.is_finite()).map(|x| (name, x)))
        .min_by(|x, y| x.1.total_cmp(&y.1));
    let v_max = options.v_max.unwrap_or_else(|| mdp.v_max());
    let (t0, t0_source) = match best {
        Some((name, l)) => {
            let params = T0Params {
                l: l.max(1.0),
                v_max,
                gamma: mdp.gamma(),
                epsilon: options.epsilon,
                delta: options.delta,
                omega: options.omega,
                s,
                a,
                c: options.q_learning_c,
            };
            match q_learning_t0(&params) {
                Ok(t0) => (Some(t0), Some(name)),
                Err(_) => (None, None),
            }
        }
        None => (None, None),
    };

    let sym = locally_symmetric(mdp);
    let phi_min = phi.phi_min;
    Ok(HardnessReport {
        num_states: s,
        num_actions: a,
        phi_min,
        phi: phi.phi,
        lambda,
        cheeger,
        cheeger_check: check,
        diameter: diam,
        action_variation: delta_p,
        k0: k,
        laplacian_cover_bound: lap_bound,
        action_variation_cover_bound: av_bound,
        submatrix_cover_bound: Some(sub_bound),
        pmin_cover_bound: Some(pmin_bound),
        q_learning_t0: t0,
        q_learning_t0_cover_source: t0_source,
        v_max,
        flags: HardnessFlags {
            irreducible: true,
            locally_symmetric: sym.symmetric,
            symmetry_witness: sym.witness,
            inv_lambda: 1.0 / lambda,
            inv_phi_min: 1.0 / phi_min,
        },
        options: options.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{generate_chain, generate_grid, generate_random, GridSpec, RandomSpec};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn half() -> TransitionMatrix {
        TransitionMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()
    }

    fn uniform_phi(n: usize) -> StationaryDistribution {
        StationaryDistribution { phi: vec![1.0 / n as f64; n], phi_min: 1.0 / n as f64 }
    }

    fn chain_walk(n: usize) -> TransitionMatrix {
        random_walk_matrix(&generate_chain(n).unwrap()).unwrap()
    }

    #[test]
    fn laplacian_bound_two_state() {
        let b = laplacian_cover_bound(&uniform_phi(2), 1.0, 2, 2).unwrap();
        assert_abs_diff_eq!(b, 887.23, epsilon = 0.01);
        assert!(laplacian_cover_bound(&uniform_phi(2), 0.0, 2, 2).is_err());
    }

    #[test]
    fn laplacian_bound_is_linear_in_inverse_phi() {
        let phi = StationaryDistribution { phi: vec![0.5, 0.25, 0.25], phi_min: 0.25 };
        let base = laplacian_cover_bound(&phi, 0.7, 3, 2).unwrap();
        // doubling every 1/phi(s) with phi_min (hence k0) fixed
        let k = k0(0.25, 0.7).unwrap();
        let expected = 8.0 * 2.0 * 24f64.ln() * k * 2.0 * phi.inverse_sum();
        assert_relative_eq!(2.0 * base, expected, max_relative = 1e-14);
    }

    #[test]
    fn chain_bound_exceeds_inverse_sum() {
        let p = chain_walk(2);
        let phi = stationary_distribution(&p).unwrap();
        let lambda = chung_laplacian(&p, &phi).unwrap().lambda;
        assert_abs_diff_eq!(phi.inverse_sum(), 10.0, epsilon = 1e-9);
        assert!(laplacian_cover_bound(&phi, lambda, 3, 2).unwrap() > 10.0);
    }

    #[test]
    fn k0_examples() {
        assert_abs_diff_eq!(k0(0.5, 1.0).unwrap(), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k0(0.5, 2.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(k0(0.5, 2.0 - 1e-9).unwrap() < 1.2);
        let lambda: f64 = 0.3;
        let step = 2.0 / (2.0 / (2.0 - lambda)).ln() * 2f64.ln();
        assert_abs_diff_eq!(k0(0.1, lambda).unwrap() - k0(0.2, lambda).unwrap(), step, epsilon = 1e-12);
        assert!(k0(0.0, 1.0).is_err());
        assert!(k0(0.5, 2.5).is_err());
    }

    #[test]
    fn reach_bound_examples() {
        let phi = uniform_phi(2);
        assert_abs_diff_eq!(reach_prob_lower_bound(0, 1, 2, &phi, 1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(reach_prob_lower_bound(0, 1, 10_000, &phi, 1.0), 0.5, epsilon = 1e-15);
        let k = k0(phi.phi_min, 1.0).unwrap().ceil() as usize;
        assert!(reach_prob_lower_bound(0, 1, k, &phi, 1.0) >= 0.25);
        // vacuous bounds stay negative
        let skewed = StationaryDistribution { phi: vec![0.9, 0.1], phi_min: 0.1 };
        assert!(reach_prob_lower_bound(0, 1, 1, &skewed, 0.1) < 0.0);
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(diameter(&generate_chain(2).unwrap(), 1e-9, 1000).unwrap(), 2.0);
        let grid = generate_grid(&GridSpec::open(5, 5)).unwrap();
        assert_eq!(diameter(&grid, 1e-9, 1000).unwrap(), 8.0);
        // state 0 has no in-edges from elsewhere
        let mdp = TabularMdp::new(2, 1, vec![0.0, 1.0, 0.0, 1.0], vec![0.0; 2], 1.0, 0.9).unwrap();
        assert_eq!(diameter(&mdp, 1e-9, 1000).unwrap(), f64::INFINITY);
    }

    #[test]
    fn diameter_stochastic_geometric() {
        // from 0, action stays w.p. 0.75; expected passage 4
        let mdp = TabularMdp::new(2, 1, vec![0.75, 0.25, 1.0, 0.0], vec![0.0; 2], 1.0, 0.9).unwrap();
        assert_abs_diff_eq!(diameter(&mdp, 1e-12, 100_000).unwrap(), 4.0, epsilon = 1e-9);
        assert!(matches!(diameter(&mdp, 1e-12, 3), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn action_variation_examples() {
        assert_abs_diff_eq!(action_variation(&generate_chain(2).unwrap()), 1.0, epsilon = 1e-15);
        let single = generate_random(&RandomSpec::new(5, 1, 0.6, 3)).unwrap();
        assert_eq!(action_variation(&single), 0.0);
        let same = generate_random(&RandomSpec { identical_actions: true, ..RandomSpec::new(5, 3, 0.6, 3) }).unwrap();
        assert_eq!(action_variation(&same), 0.0);
    }

    #[test]
    fn action_variation_bound_examples() {
        let b = action_variation_cover_bound(3.0, 0.0, 4, 2, 80.0).unwrap().unwrap();
        assert!(b.is_finite() && b > 0.0);
        let doubled = action_variation_cover_bound(3.0, 0.0, 4, 2, 160.0).unwrap().unwrap();
        assert_relative_eq!(doubled, 2.0 * b, max_relative = 1e-15);
        assert_eq!(action_variation_cover_bound(2.0, 1.0, 3, 2, 80.0).unwrap(), None);
        assert!(action_variation_cover_bound(f64::INFINITY, 0.0, 3, 2, 80.0).is_err());
    }

    #[test]
    fn hitting_time_examples() {
        let h = hitting_time_exact(&half(), 1).unwrap();
        assert_abs_diff_eq!(h.times[0], 2.0, epsilon = 1e-12);
        assert_eq!(h.times[1], 0.0);
        let h = hitting_time_exact(&chain_walk(2), 2).unwrap();
        assert_abs_diff_eq!(h.times[0], 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.times[1], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.max, 6.0, epsilon = 1e-12);
    }

    #[test]
    fn hitting_time_max_is_inverse_one_norm() {
        let mdp = generate_random(&RandomSpec::new(6, 2, 0.5, 9)).unwrap();
        let p = random_walk_matrix(&mdp).unwrap();
        for v in 0..6 {
            let h = hitting_time_exact(&p, v).unwrap();
            let inv = (DMatrix::identity(5, 5) - submatrix(&p, v).transpose()).try_inverse().unwrap();
            assert_relative_eq!(h.max, MatrixNorm::One.of(&inv), max_relative = 1e-10);
            assert!(h.times.iter().enumerate().all(|(u, &t)| u == v || t >= 1.0));
        }
    }

    #[test]
    fn submatrix_two_state() {
        assert_abs_diff_eq!(submatrix_term(&half(), 0, &MatrixNorm::ALL), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(submatrix_cover_bound(&half(), 2, &MatrixNorm::ALL), 88.72, epsilon = 0.01);
        assert_abs_diff_eq!(pmin_cover_bound(&half(), 2), 88.72, epsilon = 0.01);
    }

    #[test]
    fn submatrix_chain_norms() {
        let p = chain_walk(2);
        // v = s0: rows s1 -> (0, .5), s2 -> (0, .5)
        assert_abs_diff_eq!(submatrix_norm(&p, 0, MatrixNorm::One), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(submatrix_norm(&p, 0, MatrixNorm::Inf), 1.0, epsilon = 1e-15);
        // v = s2: row s0 keeps mass 1, so p = 1 is disqualified
        assert_abs_diff_eq!(submatrix_norm(&p, 2, MatrixNorm::One), 1.0, epsilon = 1e-15);
        let golden = (0.5 + 1.25f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(submatrix_norm(&p, 2, MatrixNorm::Two), golden, epsilon = 1e-12);
        let term = submatrix_term(&p, 2, &MatrixNorm::ALL);
        assert_abs_diff_eq!(term, 3f64.sqrt() / (1.0 - golden), epsilon = 1e-9);
        assert_eq!(submatrix_term(&p, 2, &[MatrixNorm::One]), f64::INFINITY);
        assert_eq!(submatrix_cover_bound(&p, 2, &[MatrixNorm::One]), f64::INFINITY);
    }

    #[test]
    fn one_norm_gap_is_min_column_entry() {
        let mdp = generate_random(&RandomSpec::new(5, 2, 1.0, 4)).unwrap();
        let p = random_walk_matrix(&mdp).unwrap();
        for v in 0..5 {
            let col_min = (0..5).filter(|&u| u != v).map(|u| p.get(u, v)).fold(1.0, f64::min);
            assert_abs_diff_eq!(1.0 - submatrix_norm(&p, v, MatrixNorm::One), col_min, epsilon = 1e-12);
        }
    }

    #[test]
    fn pmin_examples() {
        assert_eq!(pmin_cover_bound(&chain_walk(2), 2), f64::INFINITY);
        let n = 4;
        let uniform = TransitionMatrix::new(DMatrix::from_element(n, n, 0.25)).unwrap();
        let expected = 4.0 * 16.0 * 3.0 * (48f64).ln();
        assert_relative_eq!(pmin_cover_bound(&uniform, 3), expected, max_relative = 1e-14);
    }

    #[test]
    fn t0_golden_and_monotone() {
        let base = T0Params { l: 10.0, v_max: 1.0, gamma: 0.5, epsilon: 0.1, delta: 0.1, omega: 0.6, s: 3, a: 2, c: 1.0 };
        assert_relative_eq!(q_learning_t0(&base).unwrap(), 26374554061.263325, max_relative = 1e-12);
        let longer = T0Params { l: 20.0, ..base };
        assert!(q_learning_t0(&longer).unwrap() > q_learning_t0(&base).unwrap());
        let tighter = T0Params { epsilon: 0.05, ..base };
        assert!(q_learning_t0(&tighter).unwrap() > q_learning_t0(&base).unwrap());
        assert!(q_learning_t0(&T0Params { omega: 1.0, ..base }).is_err());
        assert!(q_learning_t0(&T0Params { l: 0.5, ..base }).is_err());
        assert!(q_learning_t0(&T0Params { gamma: 1.0, ..base }).is_err());
    }

    #[test]
    fn report_chain_eight() {
        let r = hardness_report(&generate_chain(8).unwrap(), &HardnessOptions::default()).unwrap();
        assert_abs_diff_eq!(r.phi_min, 2f64.powi(-8), epsilon = 1e-12);
        assert!(r.laplacian_cover_bound >= 256.0);
        assert!(!r.flags.locally_symmetric);
        assert_eq!(r.diameter, 8.0);
        assert!(r.action_variation_cover_bound.is_none());
        assert!(r.cheeger.is_some());
    }

    #[test]
    fn report_grid() {
        let r = hardness_report(&generate_grid(&GridSpec::open(5, 5)).unwrap(), &HardnessOptions::default()).unwrap();
        assert!(r.flags.locally_symmetric);
        assert!(r.diameter.is_finite());
        assert!(r.laplacian_cover_bound.is_finite());
        assert!(r.submatrix_cover_bound.unwrap().is_finite());
        assert!(r.q_learning_t0.is_some());
        // S = 25 is beyond the cut enumeration limit
        assert!(r.cheeger.is_none());
    }

    #[test]
    fn report_identical_actions_has_variation_bound() {
        let mdp = generate_random(&RandomSpec { identical_actions: true, ..RandomSpec::new(6, 3, 0.5, 8) }).unwrap();
        let r = hardness_report(&mdp, &HardnessOptions::default()).unwrap();
        assert_eq!(r.action_variation, 0.0);
        assert!(r.action_variation_cover_bound.is_some());
    }

    #[test]
    fn report_rejects_reducible() {
        let mdp = TabularMdp::new(2, 1, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2], 1.0, 0.9).unwrap();
        assert!(matches!(hardness_report(&mdp, &HardnessOptions::default()), Err(Error::Reducible(_))));
    }
}
