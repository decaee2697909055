//! Stationary distribution, the directed-graph Laplacian, its spectrum,
//! the Cheeger constant of the stationary flow, and the locally-symmetric
//! action check.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{component_structure, TabularMdp, TransitionMatrix};

/// Eigenvalues at or below this fraction of the largest eigenvalue count as zero.
pub const ZERO_EIGEN_REL_TOL: f64 = 1e-10;
/// Per-entry tolerance when comparing transition multisets.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Largest state count accepted by the exhaustive cut search.
pub const CHEEGER_MAX_STATES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub phi: Vec<f64>,
    pub phi_min: f64,
}

impl StationaryDistribution {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// `sum_s 1 / phi(s)`.
    pub fn inverse_sum(&self) -> f64 {
        self.phi.iter().map(|p| 1.0 / p).sum()
    }

    /// `max_s |(phi P)(s) - phi(s)|`.
    pub fn fixed_point_residual(&self, p: &TransitionMatrix) -> f64 {
        let n = self.phi.len();
        (0..n)
            .map(|j| {
                let moved: f64 = (0..n).map(|i| self.phi[i] * p.get(i, j)).sum();
                (moved - self.phi[j]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves `(P^T - I) phi = 0` with the last equation replaced by
/// `sum phi = 1`.
pub fn stationary_distribution(p: &TransitionMatrix) -> Result<StationaryDistribution> {
    let cs = component_structure(p);
    if !cs.is_strongly_connected {
        return Err(Error::Reducible(cs));
    }
    let n = p.size();
    let mut system = p.as_matrix().transpose() - DMatrix::identity(n, n);
    system.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let phi = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("stationary system".into()))?;
    let phi: Vec<f64> = phi.iter().copied().collect();
    if let Some(bad) = phi.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::Singular(format!(
            "stationary solve produced nonpositive phi({bad}) = {}",
            phi[bad]
        )));
    }
    let phi_min = phi.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(StationaryDistribution { phi, phi_min })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    #[serde(serialize_with = "serialize_matrix")]
    pub laplacian: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Smallest eigenvalue above the zero tolerance.
    pub lambda: f64,
    /// Unit eigenvector of the smallest eigenvalue, sign-normalised so its
    /// entries sum to a nonnegative value.
    pub ground_state: Vec<f64>,
}

fn serialize_matrix<S: serde::Serializer>(m: &DMatrix<f64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(ser)
}

/// Builds `I - (Phi^{1/2} P Phi^{-1/2} + Phi^{-1/2} P^T Phi^{1/2}) / 2` and
/// its full spectrum.
pub fn chung_laplacian(p: &TransitionMatrix, phi: &StationaryDistribution) -> Result<SpectralSummary> {
    let n = p.size();
    if phi.len() != n {
        return Err(Error::Precondition(format!("phi has {} entries for {n} states", phi.len())));
    }
    if let Some(bad) = phi.phi.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::Precondition(format!("phi({bad}) = {} is not positive", phi.phi[bad])));
    }
    let root: Vec<f64> = phi.phi.iter().map(|x| x.sqrt()).collect();
    let mut lap = DMatrix::from_fn(n, n, |i, j| {
        let forward = root[i] * p.get(i, j) / root[j];
        let backward = root[j] * p.get(j, i) / root[i];
        let id = if i == j { 1.0 } else { 0.0 };
        id - 0.5 * (forward + backward)
    });
    // kill round-off asymmetry
    let sym = (&lap + lap.transpose()) * 0.5;
    lap.copy_from(&sym);

    let eig = SymmetricEigen::new(lap.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let scale = eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let zero_tol = ZERO_EIGEN_REL_TOL * scale;
    let lambda = eigenvalues
        .iter()
        .copied()
        .find(|&x| x > zero_tol)
        .ok_or_else(|| Error::Precondition("Laplacian has no nonzero eigenvalue (needs S >= 2)".into()))?;
    let mut ground_state: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
    if ground_state.iter().sum::<f64>() < 0.0 {
        ground_state.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(SpectralSummary {
        laplacian: lap,
        eigenvalues,
        lambda,
        ground_state,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheegerResult {
    pub h: f64,
    /// States in the minimising set `U`, ascending.
    pub argmin_cut: Vec<usize>,
    /// `F(dU) = sum_{u in U, v not in U} phi(u) P(u, v)`.
    pub flow_out: f64,
    /// `min(F(U), F(complement))`.
    pub smaller_side_mass: f64,
}

/// Exact Cheeger constant by enumerating all `2^S - 2` proper cuts.
/// Ties go to the numerically smallest bitmask.
pub fn cheeger_constant(p: &TransitionMatrix, phi: &StationaryDistribution) -> Result<CheegerResult> {
    let n = p.size();
    if n > CHEEGER_MAX_STATES {
        return Err(Error::TooLarge {
            what: "exhaustive Cheeger search",
            max: CHEEGER_MAX_STATES,
            got: n,
        });
    }
    if n < 2 {
        return Err(Error::Precondition("Cheeger constant needs at least 2 states".into()));
    }
    if phi.len() != n {
        return Err(Error::Precondition(format!("phi has {} entries for {n} states", phi.len())));
    }
    let cs = component_structure(p);
    if !cs.is_strongly_connected {
        return Err(Error::Reducible(cs));
    }
    let flow: Vec<f64> = (0..n * n).map(|k| phi.phi[k / n] * p.get(k / n, k % n)).collect();
    let full: u32 = (1u32 << n) - 1;

    let evaluate = |mask: u32| -> (f64, f64, f64) {
        let mut out = 0.0;
        let mut mass = 0.0;
        let mut rest = 0.0;
        for u in 0..n {
            if mask & (1 << u) == 0 {
                rest += phi.phi[u];
                continue;
            }
            mass += phi.phi[u];
            for v in 0..n {
                if mask & (1 << v) == 0 {
                    out += flow[u * n + v];
                }
            }
        }
        let smaller = mass.min(rest);
        (out / smaller, out, smaller)
    };

    let best = (1..full)
        .into_par_iter()
        .map(|mask| {
            let (h, out, smaller) = evaluate(mask);
            (h, mask, out, smaller)
        })
        .reduce(
            || (f64::INFINITY, u32::MAX, 0.0, 0.0),
            |a, b| match a.0.total_cmp(&b.0) {
                std::cmp::Ordering::Less => a,
                std::cmp::Ordering::Greater => b,
                std::cmp::Ordering::Equal => {
                    if a.1 <= b.1 {
                        a
                    } else {
                        b
                    }
                }
            },
        );
    let (h, mask, flow_out, smaller_side_mass) = best;
    Ok(CheegerResult {
        h,
        argmin_cut: (0..n).filter(|&u| mask & (1 << u) != 0).collect(),
        flow_out,
        smaller_side_mass,
    })
}

/// Both forms of the Cheeger inequality for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheegerCheck {
    pub h: f64,
    pub lambda: f64,
    /// `2h >= lambda >= h^2 / 2`.
    pub sandwich_holds: bool,
    /// The tighter `h >= lambda >= h^2 / 2`, which can fail.
    pub tight_form_holds: bool,
}

pub fn cheeger_check(h: f64, lambda: f64, tol: f64) -> CheegerCheck {
    let lower = lambda >= h * h / 2.0 - tol;
    CheegerCheck {
        h,
        lambda,
        sandwich_holds: 2.0 * h >= lambda - tol && lower,
        tight_form_holds: h >= lambda - tol && lower,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryCheck {
    pub symmetric: bool,
    /// First `(s, s')` whose forward and backward transition multisets differ.
    pub witness: Option<(usize, usize)>,
}

/// Checks for a probability-preserving bijection between
/// `{a : T(s'|s,a) > 0}` and `{a' : T(s|s',a') > 0}` for every state pair,
/// via sorted multiset comparison. Pairs are visited in order of forward
/// edges `(s, s')`, which covers every pair since the condition is mirrored.
pub fn locally_symmetric(mdp: &TabularMdp) -> SymmetryCheck {
    let (s_count, a_count) = (mdp.num_states(), mdp.num_actions());
    let multiset = |from: usize, to: usize| -> Vec<f64> {
        let mut v: Vec<f64> = (0..a_count)
            .map(|a| mdp.prob(from, a, to))
            .filter(|&x| x > 0.0)
            .collect();
        v.sort_by(f64::total_cmp);
        v
    };
    for s in 0..s_count {
        for next in 0..s_count {
            if next == s || (0..a_count).all(|a| mdp.prob(s, a, next) == 0.0) {
                continue;
            }
            let forward = multiset(s, next);
            let backward = multiset(next, s);
            let same = forward.len() == backward.len()
                && forward.iter().zip(&backward).all(|(x, y)| (x - y).abs() <= SYMMETRY_TOL);
            if !same {
                return SymmetryCheck {
                    symmetric: false,
                    witness: Some((s, next)),
                };
            }
        }
    }
    SymmetryCheck {
        symmetric: true,
        witness: None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightedGraph {
    /// `w(u, v) = sum_a T(v | u, a)`, symmetric.
    #[serde(serialize_with = "serialize_matrix")]
    pub weights: DMatrix<f64>,
    pub degrees: Vec<f64>,
    /// `d(u) / sum d`.
    pub distribution: Vec<f64>,
}

/// The undirected graph whose random walk matches the MDP's random walk.
pub fn undirected_equivalent(mdp: &TabularMdp) -> Result<WeightedGraph> {
    let check = locally_symmetric(mdp);
    if let Some((s, t)) = check.witness {
        return Err(Error::Precondition(format!(
            "actions are not locally symmetric at ({s}, {t})"
        )));
    }
    let (s_count, a_count) = (mdp.num_states(), mdp.num_actions());
    let weights = DMatrix::from_fn(s_count, s_count, |u, v| {
        (0..a_count).map(|a| mdp.prob(u, a, v)).sum::<f64>()
    });
    let degrees: Vec<f64> = weights.row_iter().map(|r| r.sum()).collect();
    let total: f64 = degrees.iter().sum();
    let distribution = degrees.iter().map(|d| d / total).collect();
    Ok(WeightedGraph {
        weights,
        degrees,
        distribution,
    })
}
