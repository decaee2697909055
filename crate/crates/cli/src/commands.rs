use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use mdpx_core::bounds::{
    self, hardness_report, k0, reach_prob_lower_bound, HardnessOptions, HardnessReport,
};
use mdpx_core::domains::{
    generate_chain, generate_grid, generate_random, generate_taxi, grid_warnings, GridSpec, RandomSpec,
};
use mdpx_core::learn::{explore_then_exploit, ExploitReport};
use mdpx_core::mdp::{component_structure, random_walk_matrix, restrict_to_states, ComponentStructure, PROB_TOL};
use mdpx_core::sim::{estimate_cover_length, reach_prob_curve};
use mdpx_core::spectral::{
    cheeger_check, cheeger_constant, chung_laplacian, locally_symmetric, stationary_distribution,
    undirected_equivalent, CheegerCheck, CheegerResult, SpectralSummary, SymmetryCheck, CHEEGER_MAX_STATES,
    SYMMETRY_TOL, ZERO_EIGEN_REL_TOL,
};
use mdpx_core::sweep::{run_sweep, Family, SweepOptions};
use mdpx_core::TabularMdp;

use crate::output::{emit, fmt_real, sha256_hex, to_json, Envelope, Table};
use crate::{
    AnalyzeArgs, BoundsArgs, Cli, Command, CoverArgs, DomainKind, FamilyKind, Format, GenerateArgs, GlobalOpts,
    LearnArgs, ReachArgs, SweepArgs, UsageError,
};

type Constants = BTreeMap<String, Value>;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn base_constants() -> Constants {
    let mut c = Constants::new();
    c.insert("prob_tol".into(), json!(PROB_TOL));
    c.insert("zero_eigen_rel_tol".into(), json!(ZERO_EIGEN_REL_TOL));
    c.insert("symmetry_tol".into(), json!(SYMMETRY_TOL));
    c.insert("cheeger_max_states".into(), json!(CHEEGER_MAX_STATES));
    c
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Generate(args) => generate(args, g),
        Command::Analyze(args) => analyze(args, g),
        Command::Bounds(args) => bounds_cmd(args, g, "bounds"),
        Command::Cover(args) => cover(args, g),
        Command::Reach(args) => reach(args, g),
        Command::Learn(args) => learn(args, g),
        Command::Sweep(args) => sweep(args, g),
        Command::Report(args) => bounds_cmd(args, g, "report"),
    }
}

struct Loaded {
    mdp: TabularMdp,
    sha256: String,
    components: ComponentStructure,
    /// Original state indices when restricted to a closed component.
    restricted_to: Option<Vec<usize>>,
}

fn describe_components(c: &ComponentStructure) -> String {
    let mut text = format!("{} strongly connected components; closed components:", c.num_components());
    for (i, members) in c.closed_components.iter().enumerate() {
        text.push_str(&format!("\n  [{i}] states {members:?}"));
    }
    text.push_str("\nrerun with --component <index>");
    text
}

/// Reads an MDP file and, when the random walk is reducible, restricts it
/// to the closed component chosen with `--component`.
fn load(path: &Path, g: &GlobalOpts, require_irreducible: bool) -> Result<Loaded> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text = std::str::from_utf8(&bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    let mdp = TabularMdp::parse_json(text, g.renormalize).with_context(|| format!("loading {}", path.display()))?;
    let components = component_structure(&random_walk_matrix(&mdp)?);
    let sha256 = sha256_hex(&bytes);
    match g.component {
        Some(idx) => {
            let members = components
                .closed_components
                .get(idx)
                .ok_or_else(|| {
                    anyhow!(
                        "component {idx} does not exist ({} closed components)",
                        components.closed_components.len()
                    )
                })?
                .clone();
            let restricted = if members.len() == mdp.num_states() {
                mdp
            } else {
                restrict_to_states(&mdp, &members)?
            };
            Ok(Loaded {
                mdp: restricted,
                sha256,
                components,
                restricted_to: Some(members),
            })
        }
        None => {
            if require_irreducible && !components.is_strongly_connected {
                return Err(anyhow!("random walk is reducible: {}", describe_components(&components)));
            }
            Ok(Loaded {
                mdp,
                sha256,
                components,
                restricted_to: None,
            })
        }
    }
}

fn finish(
    command: &str,
    g: &GlobalOpts,
    input_sha256: Option<String>,
    constants: &Constants,
    result: impl Serialize,
    table: Option<Table>,
) -> Result<()> {
    let text = match g.format {
        Format::Json => {
            let env = Envelope::new(command, input_sha256, g.seed, constants, serde_json::to_value(result)?);
            to_json(&env)?
        }
        Format::Csv => table
            .ok_or_else(|| usage(format!("{command} has no CSV output; use --format json")))?
            .to_csv()?,
    };
    emit(&text, g.output.as_deref())
}

fn generate(args: &GenerateArgs, g: &GlobalOpts) -> Result<()> {
    if g.format == Format::Csv {
        return Err(usage("generate writes JSON only"));
    }
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| usage(format!("--{flag} is required for this kind")));
    let mdp = match args.kind {
        DomainKind::Chain => generate_chain(need(args.n, "n")?)?,
        DomainKind::Taxi => generate_taxi(),
        DomainKind::Grid | DomainKind::TwoRoom => {
            let (w, h) = (need(args.width, "width")?, need(args.height, "height")?);
            let mut spec = if args.kind == DomainKind::Grid {
                GridSpec::open(w, h)
            } else {
                GridSpec::two_room(w, h)?
            };
            if let Some(path) = &args.walls {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let walls: Vec<(usize, usize)> =
                    serde_json::from_str(&text).with_context(|| format!("parsing walls in {}", path.display()))?;
                spec.walls.extend(walls);
            }
            spec.goals = args.goal.clone();
            spec.slip = args.slip;
            for w in grid_warnings(&spec) {
                log::warn!("{w}");
            }
            generate_grid(&spec)?
        }
        DomainKind::Random => {
            let mut spec = RandomSpec::new(
                need(args.states, "states")?,
                need(args.actions, "actions")?,
                args.density.ok_or_else(|| usage("--density is required for this kind"))?,
                g.seed,
            );
            spec.identical_actions = args.identical_actions;
            generate_random(&spec)?
        }
    };
    let mdp = match args.gamma {
        Some(gamma) => mdp.with_gamma(gamma)?,
        None => mdp,
    };
    let mut text = mdp.to_json_string()?;
    text.push('\n');
    emit(&text, g.output.as_deref())
}

#[derive(Serialize)]
struct CheegerSection {
    #[serde(flatten)]
    cut: CheegerResult,
    check: CheegerCheck,
}

#[derive(Serialize)]
struct SymmetrySection {
    #[serde(flatten)]
    check: SymmetryCheck,
    undirected_distribution: Option<Vec<f64>>,
    /// `max |d(u)/sum d - phi(u)|` when the MDP is locally symmetric.
    distribution_gap: Option<f64>,
}

#[derive(Serialize)]
struct Analysis {
    num_states: usize,
    num_actions: usize,
    restricted_to: Option<Vec<usize>>,
    components: ComponentStructure,
    phi: Vec<f64>,
    phi_min: f64,
    fixed_point_residual: f64,
    lambda: f64,
    k0: f64,
    cheeger: Option<CheegerSection>,
    spectrum: Option<SpectralSummary>,
    symmetry: Option<SymmetrySection>,
}

fn analysis(loaded: &Loaded, cheeger: bool, spectrum: bool, symmetry: bool) -> Result<Analysis> {
    let mdp = &loaded.mdp;
    let p = random_walk_matrix(mdp)?;
    let phi = stationary_distribution(&p)?;
    let summary = chung_laplacian(&p, &phi)?;
    let cheeger = if cheeger {
        let cut = cheeger_constant(&p, &phi)?;
        let check = cheeger_check(cut.h, summary.lambda, 1e-9);
        if !check.tight_form_holds {
            log::warn!("h = {} < lambda = {}: the tight form h >= lambda fails here", cut.h, summary.lambda);
        }
        Some(CheegerSection { cut, check })
    } else {
        None
    };
    let symmetry = if symmetry {
        let check = locally_symmetric(mdp);
        let (dist, gap) = if check.symmetric {
            let graph = undirected_equivalent(mdp)?;
            let gap = graph
                .distribution
                .iter()
                .zip(&phi.phi)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            (Some(graph.distribution), Some(gap))
        } else {
            (None, None)
        };
        Some(SymmetrySection {
            check,
            undirected_distribution: dist,
            distribution_gap: gap,
        })
    } else {
        None
    };
    Ok(Analysis {
        num_states: mdp.num_states(),
        num_actions: mdp.num_actions(),
        restricted_to: loaded.restricted_to.clone(),
        components: loaded.components.clone(),
        fixed_point_residual: phi.fixed_point_residual(&p),
        k0: k0(phi.phi_min, summary.lambda)?,
        lambda: summary.lambda,
        phi_min: phi.phi_min,
        phi: phi.phi,
        cheeger,
        spectrum: spectrum.then_some(summary),
        symmetry,
    })
}

fn analyze(args: &AnalyzeArgs, g: &GlobalOpts) -> Result<()> {
    let loaded = load(&args.mdp, g, true)?;
    let result = analysis(&loaded, args.cheeger, args.spectrum, args.symmetry)?;
    let mut table = Table::new(vec!["state", "phi"]);
    for (s, x) in result.phi.iter().enumerate() {
        table.push([s.to_string(), fmt_real(*x)]);
    }
    finish("analyze", g, Some(loaded.sha256.clone()), &base_constants(), &result, Some(table))
}

fn hardness_options(args: &BoundsArgs) -> HardnessOptions {
    let mut o = HardnessOptions {
        cheeger: !args.no_cheeger,
        v_max: args.vmax,
        ..HardnessOptions::default()
    };
    if let Some(c) = args.c1 {
        o.action_variation_c = c;
    }
    if let Some(c) = args.c2 {
        o.q_learning_c = c;
    }
    if let Some(w) = args.omega {
        o.omega = w;
    }
    if let Some(e) = args.epsilon {
        o.epsilon = e;
    }
    if let Some(d) = args.delta {
        o.delta = d;
    }
    o
}

fn bounds_constants(o: &HardnessOptions) -> Constants {
    let mut c = base_constants();
    c.insert("c1".into(), json!(o.action_variation_c));
    c.insert("c2".into(), json!(o.q_learning_c));
    c.insert("omega".into(), json!(o.omega));
    c.insert("epsilon".into(), json!(o.epsilon));
    c.insert("delta".into(), json!(o.delta));
    c.insert("vmax".into(), json!(o.v_max));
    c.insert("diameter_tol".into(), json!(o.diameter_tol));
    c.insert("diameter_max_iter".into(), json!(o.diameter_max_iter));
    c
}

fn bounds_table(r: &HardnessReport) -> Table {
    let opt = |x: Option<f64>| x.map(fmt_real).unwrap_or_default();
    let mut t = Table::new(vec!["quantity", "value"]);
    let rows: Vec<(&str, String)> = vec![
        ("num_states", r.num_states.to_string()),
        ("num_actions", r.num_actions.to_string()),
        ("phi_min", fmt_real(r.phi_min)),
        ("lambda", fmt_real(r.lambda)),
        ("cheeger", opt(r.cheeger)),
        ("diameter", fmt_real(r.diameter)),
        ("action_variation", fmt_real(r.action_variation)),
        ("k0", fmt_real(r.k0)),
        ("laplacian_cover_bound", fmt_real(r.laplacian_cover_bound)),
        ("action_variation_cover_bound", opt(r.action_variation_cover_bound)),
        ("submatrix_cover_bound", opt(r.submatrix_cover_bound)),
        ("pmin_cover_bound", opt(r.pmin_cover_bound)),
        ("q_learning_t0", opt(r.q_learning_t0)),
        ("v_max", fmt_real(r.v_max)),
    ];
    for (k, v) in rows {
        t.push([k.to_string(), v]);
    }
    t
}

fn bounds_cmd(args: &BoundsArgs, g: &GlobalOpts, command: &str) -> Result<()> {
    let loaded = load(&args.mdp, g, true)?;
    let options = hardness_options(args);
    let report = hardness_report(&loaded.mdp, &options)?;
    let constants = bounds_constants(&options);
    let table = bounds_table(&report);
    if command == "report" {
        let analysis = analysis(&loaded, false, true, true)?;
        let result = json!({ "analysis": analysis, "bounds": report });
        finish(command, g, Some(loaded.sha256.clone()), &constants, result, Some(table))
    } else {
        finish(command, g, Some(loaded.sha256.clone()), &constants, &report, Some(table))
    }
}

fn cover(args: &CoverArgs, g: &GlobalOpts) -> Result<()> {
    let loaded = load(&args.mdp, g, false)?;
    if !loaded.components.is_strongly_connected && loaded.restricted_to.is_none() {
        log::warn!("random walk is reducible; cover runs will be censored");
    }
    let est = estimate_cover_length(&loaded.mdp, args.trials, args.horizon, g.seed)?;
    let mut constants = base_constants();
    constants.insert("trials".into(), json!(args.trials));
    constants.insert("horizon".into(), json!(args.horizon));
    let mut table = Table::new(vec!["state", "action", "median", "censored"]);
    for m in &est.per_start_median {
        table.push([
            m.state.to_string(),
            m.action.to_string(),
            m.median.to_string(),
            (m.median > args.horizon).to_string(),
        ]);
    }
    finish("cover", g, Some(loaded.sha256.clone()), &constants, &est, Some(table))
}

#[derive(Serialize)]
struct ReachPoint {
    k: usize,
    exact: f64,
    lower_bound: f64,
}

fn reach(args: &ReachArgs, g: &GlobalOpts) -> Result<()> {
    let loaded = load(&args.mdp, g, true)?;
    let n = loaded.mdp.num_states();
    if args.from >= n || args.to >= n {
        return Err(usage(format!("states must be below {n}")));
    }
    let p = random_walk_matrix(&loaded.mdp)?;
    let phi = stationary_distribution(&p)?;
    let lambda = chung_laplacian(&p, &phi)?.lambda;
    let curve = reach_prob_curve(&p, args.from, args.to, args.k);
    let points: Vec<ReachPoint> = curve
        .iter()
        .enumerate()
        .map(|(k, &exact)| ReachPoint {
            k,
            exact,
            lower_bound: reach_prob_lower_bound(args.from, args.to, k, &phi, lambda),
        })
        .collect();
    let k0 = k0(phi.phi_min, lambda)?;
    let mut table = Table::new(vec!["k", "exact", "lower_bound"]);
    for pt in &points {
        table.push([pt.k.to_string(), fmt_real(pt.exact), fmt_real(pt.lower_bound)]);
    }
    let result = json!({
        "from": args.from,
        "to": args.to,
        "lambda": lambda,
        "phi_to": phi.phi[args.to],
        "k0": k0,
        "sound": points.iter().all(|pt| pt.exact >= pt.lower_bound - 1e-9),
        "curve": points,
    });
    finish("reach", g, Some(loaded.sha256.clone()), &base_constants(), result, Some(table))
}

fn learn(args: &LearnArgs, g: &GlobalOpts) -> Result<()> {
    if g.format == Format::Csv {
        return Err(usage("learn writes JSON only"));
    }
    if args.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let loaded = load(&args.mdp, g, false)?;
    let mdp = &loaded.mdp;
    let epsilon = if args.relative {
        args.epsilon * mdp.v_max()
    } else {
        args.epsilon
    };
    let runs: Vec<ExploitReport> = (0..args.seeds as u64)
        .into_par_iter()
        .map(|i| explore_then_exploit(mdp, args.steps, args.omega, epsilon, g.seed.wrapping_add(i)))
        .collect::<mdpx_core::Result<_>>()?;
    let successes = runs.iter().filter(|r| r.success).count();
    let mut constants = base_constants();
    constants.insert("steps".into(), json!(args.steps));
    constants.insert("omega".into(), json!(args.omega));
    constants.insert("epsilon".into(), json!(epsilon));
    constants.insert("seeds".into(), json!(args.seeds));
    let result = json!({
        "v_max": mdp.v_max(),
        "successes": successes,
        "runs": runs,
    });
    finish("learn", g, Some(loaded.sha256.clone()), &constants, result, None)
}

fn sweep(args: &SweepArgs, g: &GlobalOpts) -> Result<()> {
    let family = match args.family {
        FamilyKind::Chain => Family::Chain,
        FamilyKind::Grid => Family::Grid,
        FamilyKind::Random => Family::Random {
            actions: args.actions,
            density: args.density,
            seed: g.seed,
        },
    };
    let sizes: Vec<usize> = (args.sizes.0..=args.sizes.1).collect();
    let options = SweepOptions {
        trials: args.trials,
        horizon: args.horizon,
        seed: g.seed,
    };
    let result = run_sweep(&family, &sizes, args.metric, &options)?;
    let mut constants = base_constants();
    constants.insert("trials".into(), json!(args.trials));
    constants.insert("horizon".into(), json!(args.horizon));
    constants.insert("diameter_tol".into(), json!(bounds::DEFAULT_DIAMETER_TOL));
    let mut table = Table::new(vec!["size", "S", "A", "metric_value", "censored"]);
    for p in &result.points {
        table.push([
            p.size.to_string(),
            p.num_states.to_string(),
            p.num_actions.to_string(),
            fmt_real(p.value),
            p.censored.to_string(),
        ]);
    }
    finish("sweep", g, None, &constants, &result, Some(table))
}
