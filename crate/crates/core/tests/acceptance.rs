//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any fails.

use std::collections::VecDeque;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use mdpx_core::bounds::{
    action_variation, diameter, hardness_report, hitting_time_exact, k0, laplacian_cover_bound, pmin_cover_bound,
    reach_prob_lower_bound, submatrix_cover_bound, HardnessOptions, MatrixNorm, DEFAULT_DIAMETER_MAX_ITER,
    DEFAULT_DIAMETER_TOL,
};
use mdpx_core::domains::{generate_chain, generate_grid, generate_random, GridSpec, RandomSpec};
use mdpx_core::learn::{explore_then_exploit, greedy_actions, policy_value, solve_optimal, Policy};
use mdpx_core::mdp::{lazy_matrix, random_walk_matrix};
use mdpx_core::sim::{action_coverage_trial, estimate_cover_length, mc_hitting_time, reach_prob_curve, trial_rng};
use mdpx_core::spectral::{
    cheeger_check, cheeger_constant, chung_laplacian, locally_symmetric, stationary_distribution,
    undirected_equivalent,
};
use mdpx_core::sweep::{run_sweep, Family, Metric, SweepOptions};
use mdpx_core::{TabularMdp, TransitionMatrix};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_mdp(seed: u64, s_range: (usize, usize), a_range: (usize, usize)) -> TabularMdp {
    let mut rng = trial_rng(seed, 0);
    let s = rng.random_range(s_range.0..=s_range.1);
    let a = rng.random_range(a_range.0..=a_range.1);
    let density = rng.random_range(0.3..=1.0);
    generate_random(&RandomSpec::new(s, a, density, seed)).expect("random MDP")
}

fn walk(mdp: &TabularMdp) -> TransitionMatrix {
    random_walk_matrix(mdp).unwrap()
}

/// Single-action MDP whose random walk is exactly `rows`.
fn chain_mdp(rows: &[Vec<f64>]) -> TabularMdp {
    let n = rows.len();
    let transitions = rows.iter().flatten().copied().collect();
    TabularMdp::new(n, 1, transitions, vec![0.0; n], 1.0, 0.9).unwrap()
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    for n in 2..=10 {
        let phi = stationary_distribution(&walk(&generate_chain(n).unwrap())).unwrap();
        for (i, &x) in phi.phi.iter().enumerate() {
            let expected = if i < n { 0.5f64.powi(i as i32 + 1) } else { 0.5f64.powi(n as i32) };
            worst = worst.max((x - expected).abs());
        }
    }
    let sizes: Vec<usize> = (4..=10).collect();
    let sweep = run_sweep(&Family::Chain, &sizes, Metric::InvPhiMin, &SweepOptions::default()).unwrap();
    check(
        worst <= 1e-9 && (sweep.log2_slope - 1.0).abs() <= 0.01,
        format!("max |phi - closed form| = {worst:.2e}, log2_slope = {:.4}", sweep.log2_slope),
    )
}

fn criterion_2() -> Outcome {
    let mdp = generate_grid(&GridSpec::open(5, 5)).unwrap();
    let sym = locally_symmetric(&mdp);
    let phi = stationary_distribution(&walk(&mdp)).unwrap();
    let graph = undirected_equivalent(&mdp).unwrap();
    let degree_gap = graph.distribution.iter().zip(&phi.phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let uniform_gap = phi.phi.iter().map(|x| (x - 1.0 / 25.0).abs()).fold(0.0, f64::max);
    check(
        sym.symmetric && degree_gap <= 1e-9 && uniform_gap <= 1e-9,
        format!(
            "locally symmetric = {}, degree gap = {degree_gap:.2e}, uniform gap = {uniform_gap:.2e}",
            sym.symmetric
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut violations = Vec::new();
    for seed in 0..200u64 {
        let mdp = random_mdp(1000 + seed, (2, 8), (1, 4));
        let p = walk(&mdp);
        let phi = stationary_distribution(&p).unwrap();
        let lambda = chung_laplacian(&p, &phi).unwrap().lambda;
        let h = cheeger_constant(&p, &phi).unwrap().h;
        if !(2.0 * h >= lambda - 1e-9 && lambda >= h * h / 2.0 - 1e-9) {
            violations.push((seed, h, lambda));
        }
    }
    // Two states, stay or switch: lambda = 1 while h = 1/2.
    let two = TabularMdp::new(2, 2, vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0], vec![0.0; 4], 1.0, 0.9).unwrap();
    let report = hardness_report(&two, &HardnessOptions::default()).unwrap();
    let flagged = report
        .cheeger_check
        .map(|c| !c.tight_form_holds && c.sandwich_holds && (c.lambda - 1.0).abs() < 1e-12 && (c.h - 0.5).abs() < 1e-12)
        .unwrap_or(false);
    let direct = cheeger_check(0.5, 1.0, 1e-9);
    check(
        violations.is_empty() && flagged && !direct.tight_form_holds,
        format!(
            "{} sandwich violations in 200 MDPs; two-state counterexample flagged = {flagged}",
            violations.len()
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut bound_violations = 0usize;
    let mut half_violations = 0usize;
    let mut checked = 0usize;
    for seed in 0..50u64 {
        let mdp = random_mdp(2000 + seed, (2, 8), (1, 4));
        let p = walk(&mdp);
        let phi = stationary_distribution(&p).unwrap();
        let lambda = chung_laplacian(&p, &phi).unwrap().lambda;
        let lazy = lazy_matrix(&p);
        let k_star = k0(phi.phi_min, lambda).unwrap().ceil() as usize;
        let k_max = k_star.max(100);
        let n = mdp.num_states();
        for u in 0..n {
            for v in 0..n {
                let curve = reach_prob_curve(&lazy, u, v, k_max);
                for (k, &exact) in curve.iter().enumerate().take(101).skip(1) {
                    checked += 1;
                    if exact < reach_prob_lower_bound(u, v, k, &phi, lambda) - 1e-9 {
                        bound_violations += 1;
                    }
                }
                if curve[k_star] < phi.phi[v] / 2.0 - 1e-9 {
                    half_violations += 1;
                }
            }
        }
    }
    check(
        bound_violations == 0 && half_violations == 0,
        format!("{bound_violations}/{checked} bound violations, {half_violations} pairs below phi(v)/2 at ceil(k0)"),
    )
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let mdp = random_mdp(3000 + seed, (2, 6), (1, 3));
        let p = walk(&mdp);
        let n = mdp.num_states();
        for v in 0..n {
            let exact = hitting_time_exact(&p, v).unwrap();
            for u in (0..n).filter(|&u| u != v) {
                let mc = mc_hitting_time(&p, u, v, 200_000, seed * 100 + (u * n + v) as u64);
                worst = worst.max((mc - exact.times[u]).abs() / exact.times[u]);
            }
        }
    }
    let sym = TransitionMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    let two = hitting_time_exact(&sym, 1).unwrap().max;
    check(
        worst <= 0.05 && two == 2.0,
        format!("max relative error = {:.3}%, two-state symmetric formula = {two}", worst * 100.0),
    )
}

fn criterion_6() -> Outcome {
    let mut cases: Vec<(String, TabularMdp)> = Vec::new();
    for n in 1..=8 {
        cases.push((format!("chain({n})"), generate_chain(n).unwrap()));
    }
    for k in 2..=5 {
        cases.push((format!("grid {k}x{k}"), generate_grid(&GridSpec::open(k, k)).unwrap()));
    }
    for seed in 0..20u64 {
        cases.push((format!("random #{seed}"), random_mdp(4000 + seed, (2, 8), (1, 3))));
    }
    let mut failures = Vec::new();
    let mut tightest = f64::INFINITY;
    for (name, mdp) in &cases {
        let p = walk(mdp);
        let phi = stationary_distribution(&p).unwrap();
        let lambda = chung_laplacian(&p, &phi).unwrap().lambda;
        let lap = laplacian_cover_bound(&phi, lambda, mdp.num_states(), mdp.num_actions()).unwrap();
        let sub = submatrix_cover_bound(&p, mdp.num_actions(), &MatrixNorm::ALL);
        let est = estimate_cover_length(mdp, 51, 1_000_000, 7).unwrap();
        let median = est.estimate as f64;
        tightest = tightest.min(lap / median);
        if est.censored || median > lap || (sub.is_finite() && median > sub) {
            failures.push(format!("{name}: median {median}, laplacian {lap:.1}, submatrix {sub:.1}"));
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} MDPs; smallest laplacian bound / median = {tightest:.1}", cases.len())
        } else {
            failures.join("; ")
        },
    )
}

fn criterion_7() -> Outcome {
    let (a, s) = (4usize, 10usize);
    let visits = (a as f64 * ((4 * s * a) as f64).ln()).ceil() as usize;
    let rate = action_coverage_trial(a, visits, 100_000, 11).unwrap();
    let union = a as f64 * (1.0 - 1.0 / a as f64).powi(visits as i32);
    check(
        visits == 21 && rate <= 1.0 / (4.0 * s as f64),
        format!("visits = {visits}, failure rate = {rate:.5}, union bound = {union:.4}, limit = 0.025"),
    )
}

fn criterion_8() -> Outcome {
    let grid = generate_grid(&GridSpec::open(5, 5).with_goal(4, 4)).unwrap().with_gamma(0.95).unwrap();
    let grid_eps = 0.1 * grid.v_max();
    let grid_ok = (0..10u64)
        .filter(|&seed| explore_then_exploit(&grid, 1_000_000, 0.7, grid_eps, seed).unwrap().success)
        .count();
    let chain = generate_chain(20).unwrap();
    let chain_eps = 0.1 * chain.v_max();
    let chain_fail = (0..10u64)
        .filter(|&seed| !explore_then_exploit(&chain, 100_000, 0.7, chain_eps, seed).unwrap().success)
        .count();
    let cover = estimate_cover_length(&chain, 21, 100_000, 5).unwrap();
    let total = cover.per_start_median.len() * cover.trials;
    let censored = cover.censored_trials as f64 / total as f64;
    check(
        grid_ok >= 9 && chain_fail >= 9 && censored > 0.95,
        format!(
            "grid successes {grid_ok}/10, chain(20) failures {chain_fail}/10, chain(20) censored {:.1}%",
            censored * 100.0
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut worst_slack = f64::INFINITY;
    for seed in 0..100u64 {
        let base = random_mdp(5000 + seed, (2, 8), (1, 4));
        let mut rng = trial_rng(seed, 1);
        let gamma = rng.random_range(0.5..0.95);
        let mdp = base.with_gamma(gamma).unwrap();
        let optimal = solve_optimal(&mdp, 1e-12).unwrap();
        let e = rng.random_range(0.01..1.0);
        let noisy: Vec<f64> = optimal.q.iter().map(|q| q + rng.random_range(-e..=e)).collect();
        let policy = Policy::deterministic(&greedy_actions(&noisy, mdp.num_actions()), mdp.num_actions());
        let values = policy_value(&mdp, &policy).unwrap();
        let gap = optimal.v.iter().zip(&values).map(|(a, b)| a - b).fold(0.0, f64::max);
        worst_slack = worst_slack.min(2.0 * e / (1.0 - gamma) + 1e-6 - gap);
    }
    check(worst_slack >= 0.0, format!("smallest slack 2e/(1-gamma) - gap = {worst_slack:.3e}"))
}

fn bfs_diameter(mdp: &TabularMdp) -> f64 {
    let n = mdp.num_states();
    let mut worst = 0usize;
    for source in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(s) = queue.pop_front() {
            for a in 0..mdp.num_actions() {
                for t in 0..n {
                    if mdp.prob(s, a, t) > 0.0 && dist[t] == usize::MAX {
                        dist[t] = dist[s] + 1;
                        queue.push_back(t);
                    }
                }
            }
        }
        if dist.contains(&usize::MAX) {
            return f64::INFINITY;
        }
        worst = worst.max(dist.into_iter().max().unwrap());
    }
    worst as f64
}

fn circulant(weights: &[f64]) -> Vec<Vec<f64>> {
    let n = weights.len();
    (0..n).map(|u| (0..n).map(|v| weights[(v + n - u) % n]).collect()).collect()
}

fn criterion_10() -> Outcome {
    // Equality needs every column to share the global off-diagonal minimum
    // (circulant or uniform rows); otherwise only `sub <= pmin` holds.
    let mut pmin_gap = 0.0f64;
    let mut dense_checked = 0;
    let mut inequality_violations = 0;
    for seed in 0..20u64 {
        let mut rng = trial_rng(6000 + seed, 0);
        let n = rng.random_range(2..=8);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let a = 1 + (seed as usize % 3);
        let rows = if seed % 2 == 0 { circulant(&weights) } else { vec![vec![1.0 / n as f64; n]; n] };
        let p = walk(&chain_mdp(&rows));
        let pmin = pmin_cover_bound(&p, a);
        let sub = submatrix_cover_bound(&p, a, &[MatrixNorm::One]);
        pmin_gap = pmin_gap.max((pmin - sub).abs() / pmin);
        dense_checked += 1;

        let skewed = walk(&chain_mdp(&vec![weights.clone(); n]));
        if submatrix_cover_bound(&skewed, a, &[MatrixNorm::One]) > pmin_cover_bound(&skewed, a) * (1.0 + 1e-12) {
            inequality_violations += 1;
        }
    }
    let mut variation_max = 0.0f64;
    for seed in 0..20u64 {
        let mut spec = RandomSpec::new(3 + seed as usize % 5, 2 + seed as usize % 3, 0.6, 7000 + seed);
        spec.identical_actions = true;
        variation_max = variation_max.max(action_variation(&generate_random(&spec).unwrap()));
    }
    let mut diameter_mismatch = 0;
    for seed in 0..50u64 {
        let mut rng = trial_rng(8000 + seed, 0);
        let spec = RandomSpec::deterministic(rng.random_range(2..=10), rng.random_range(2..=4), 8000 + seed);
        let mdp = generate_random(&spec).unwrap();
        let d = diameter(&mdp, DEFAULT_DIAMETER_TOL, DEFAULT_DIAMETER_MAX_ITER).unwrap();
        if (d - bfs_diameter(&mdp)).abs() > 1e-9 {
            diameter_mismatch += 1;
        }
    }
    check(
        pmin_gap <= 1e-9 && inequality_violations == 0 && variation_max == 0.0 && diameter_mismatch == 0,
        format!(
            "pmin vs p=1 relative gap {pmin_gap:.1e} over {dense_checked} dense chains \
             ({inequality_violations} ordering violations), \
             max delta_P (identical actions) = {variation_max}, diameter mismatches {diameter_mismatch}/50"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("chain stationary distribution", Duration::from_secs(1), criterion_1),
        ("grid easiness", Duration::from_secs(1), criterion_2),
        ("Cheeger sandwich", Duration::from_secs(30), criterion_3),
        ("reach-probability soundness", Duration::from_secs(60), criterion_4),
        ("hitting-time formula", Duration::from_secs(60), criterion_5),
        ("cover-bound soundness", Duration::from_secs(300), criterion_6),
        ("action coverage", Duration::from_secs(60), criterion_7),
        ("explore-then-exploit dichotomy", Duration::from_secs(600), criterion_8),
        ("greedy-gap lemma", Duration::from_secs(60), criterion_9),
        ("consistency identities", Duration::from_secs(60), criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = elapsed > *budget;
        let (status, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d} (over the {budget:?} budget)")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {:>2} {status}: {name} ({:.2}s) {detail}", i + 1, elapsed.as_secs_f64());
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
