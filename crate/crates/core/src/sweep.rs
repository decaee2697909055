//! Growth of hardness metrics across a domain family, summarised by two
//! least-squares fits: `log2(value)` against the size parameter
//! (exponential growth) and `ln(value)` against `ln(S)` (polynomial growth).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{diameter, laplacian_cover_bound, DEFAULT_DIAMETER_MAX_ITER, DEFAULT_DIAMETER_TOL};
use crate::domains::{generate_chain, generate_grid, generate_random, GridSpec, RandomSpec};
use crate::error::{Error, Result};
use crate::mdp::{random_walk_matrix, TabularMdp};
use crate::serde_util::real_or_inf;
use crate::sim::estimate_cover_length;
use crate::spectral::{chung_laplacian, stationary_distribution};

/// `log2_slope` above this marks a sweep as exponential-like.
pub const EXPONENTIAL_SLOPE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// Size `n` gives `chain(n)`.
    Chain,
    /// Size `k` gives an open `k x k` grid.
    Grid,
    /// Size `S` gives a random MDP with `S` states.
    Random { actions: usize, density: f64, seed: u64 },
}

impl Family {
    pub fn member(&self, size: usize) -> Result<TabularMdp> {
        match self {
            Family::Chain => generate_chain(size),
            Family::Grid => generate_grid(&GridSpec::open(size, size)),
            Family::Random { actions, density, seed } => {
                generate_random(&RandomSpec::new(size, *actions, *density, seed.wrapping_add(size as u64)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    InvPhiMin,
    LambdaInv,
    LaplacianCoverBound,
    EmpiricalCover,
    Diameter,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "inv_phi_min" => Metric::InvPhiMin,
            "lambda_inv" => Metric::LambdaInv,
            "laplacian_cover_bound" => Metric::LaplacianCoverBound,
            "empirical_cover" => Metric::EmpiricalCover,
            "diameter" => Metric::Diameter,
            other => return Err(Error::OutOfRange(format!("unknown metric {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOptions {
    /// Settings for the empirical cover metric.
    pub trials: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            trials: 101,
            horizon: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub size: usize,
    pub num_states: usize,
    pub num_actions: usize,
    #[serde(serialize_with = "real_or_inf")]
    pub value: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub family: Family,
    pub metric: Metric,
    pub points: Vec<SweepPoint>,
    #[serde(serialize_with = "real_or_inf")]
    pub log2_slope: f64,
    #[serde(serialize_with = "real_or_inf")]
    pub loglog_exponent: f64,
    /// Residuals of the `log2(value)` vs size fit, per finite point.
    pub residuals: Vec<f64>,
    pub loglog_residuals: Vec<f64>,
    /// Advisory label: `exponential-like` or `polynomial-like`.
    pub classification: &'static str,
}

impl SweepResult {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }
}

/// Ordinary least squares `y = a + b x`; returns `(b, residuals)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, Vec<f64>) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (f64::NAN, vec![0.0; xs.len()]);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs.iter().zip(ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    (slope, residuals)
}

fn evaluate(mdp: &TabularMdp, metric: Metric, options: &SweepOptions) -> Result<(f64, bool)> {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    match metric {
        Metric::Diameter => Ok((diameter(mdp, DEFAULT_DIAMETER_TOL, DEFAULT_DIAMETER_MAX_ITER)?, false)),
        Metric::EmpiricalCover => {
            let est = estimate_cover_length(mdp, options.trials, options.horizon, options.seed)?;
            Ok((est.estimate as f64, est.censored))
        }
        _ => {
            let p = random_walk_matrix(mdp)?;
            let phi = stationary_distribution(&p)?;
            match metric {
                Metric::InvPhiMin => Ok((1.0 / phi.phi_min, false)),
                Metric::LambdaInv => Ok((1.0 / chung_laplacian(&p, &phi)?.lambda, false)),
                _ => {
                    let lambda = chung_laplacian(&p, &phi)?.lambda;
                    Ok((laplacian_cover_bound(&phi, lambda, s, a)?, false))
                }
            }
        }
    }
}

pub fn run_sweep(family: &Family, sizes: &[usize], metric: Metric, options: &SweepOptions) -> Result<SweepResult> {
    if sizes.is_empty() {
        return Err(Error::OutOfRange("no sizes given".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::OutOfRange("sizes must be strictly ascending".into()));
    }
    let points: Vec<Result<SweepPoint>> = sizes
        .par_iter()
        .map(|&size| {
            let mdp = family.member(size)?;
            let (value, censored) = evaluate(&mdp, metric, options)?;
            Ok(SweepPoint {
                size,
                num_states: mdp.num_states(),
                num_actions: mdp.num_actions(),
                value,
                censored,
            })
        })
        .collect();
    let points: Vec<SweepPoint> = points.into_iter().collect::<Result<_>>()?;

    let finite: Vec<&SweepPoint> = points.iter().filter(|p| p.value.is_finite() && p.value > 0.0).collect();
    let sizes_f: Vec<f64> = finite.iter().map(|p| p.size as f64).collect();
    let log2_vals: Vec<f64> = finite.iter().map(|p| p.value.log2()).collect();
    let ln_states: Vec<f64> = finite.iter().map(|p| (p.num_states as f64).ln()).collect();
    let ln_vals: Vec<f64> = finite.iter().map(|p| p.value.ln()).collect();
    let (log2_slope, residuals) = least_squares(&sizes_f, &log2_vals);
    let (loglog_exponent, loglog_residuals) = least_squares(&ln_states, &ln_vals);
    let classification = if log2_slope > EXPONENTIAL_SLOPE_THRESHOLD {
        "exponential-like"
    } else {
        "polynomial-like"
    };
    Ok(SweepResult {
        family: family.clone(),
        metric,
        points,
        log2_slope,
        loglog_exponent,
        residuals,
        loglog_residuals,
        classification,
    })
}
