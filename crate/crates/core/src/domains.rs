//! Benchmark MDP generators: the chain (combination lock), grid worlds
//! including two-room layouts, Taxi, and seeded random MDPs.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{component_structure_of_graph, TabularMdp};

/// Discount used by the generators unless overridden with
/// [`TabularMdp::with_gamma`].
pub const DEFAULT_GAMMA: f64 = 0.9;

/// Chain action that returns to the leftmost state.
pub const CHAIN_BACK: usize = 0;
/// Chain action that advances one state (self loop at the right end).
pub const CHAIN_RIGHT: usize = 1;

pub const NORTH: usize = 0;
pub const SOUTH: usize = 1;
pub const EAST: usize = 2;
pub const WEST: usize = 3;
pub const PICKUP: usize = 4;
pub const DROPOFF: usize = 5;

const RANDOM_RETRY_BUDGET: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Chain { n: usize },
    Grid(GridSpec),
    Taxi,
    Random(RandomSpec),
}

impl DomainSpec {
    pub fn generate(&self) -> Result<TabularMdp> {
        match self {
            DomainSpec::Chain { n } => generate_chain(*n),
            DomainSpec::Grid(spec) => generate_grid(spec),
            DomainSpec::Taxi => Ok(generate_taxi()),
            DomainSpec::Random(spec) => generate_random(spec),
        }
    }
}

/// A rectangular grid; cells are `(x, y)` with `x < width`, `y < height`
/// and `y = 0` the top row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub walls: Vec<(usize, usize)>,
    #[serde(default)]
    pub goals: Vec<(usize, usize)>,
    #[serde(default)]
    pub slip: f64,
}

impl GridSpec {
    pub fn open(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            walls: Vec::new(),
            goals: Vec::new(),
            slip: 0.0,
        }
    }

    pub fn with_goal(mut self, x: usize, y: usize) -> Self {
        self.goals.push((x, y));
        self
    }

    /// Two rooms split by a vertical wall in the middle column with a
    /// single doorway in the middle row.
    pub fn two_room(width: usize, height: usize) -> Result<Self> {
        if width < 3 || height < 1 {
            return Err(Error::OutOfRange(format!(
                "two-room layout needs width >= 3 and height >= 1, got {width}x{height}"
            )));
        }
        let wall_x = width / 2;
        let door_y = height / 2;
        let walls = (0..height).filter(|&y| y != door_y).map(|y| (wall_x, y)).collect();
        Ok(Self {
            width,
            height,
            walls,
            goals: Vec::new(),
            slip: 0.0,
        })
    }

    fn check(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::OutOfRange(format!("grid must be at least 1x1, got {}x{}", self.width, self.height)));
        }
        if !(0.0..=1.0).contains(&self.slip) {
            return Err(Error::OutOfRange(format!("slip {} not in [0,1]", self.slip)));
        }
        for &(x, y) in self.walls.iter().chain(&self.goals) {
            if x >= self.width || y >= self.height {
                return Err(Error::OutOfRange(format!("cell ({x},{y}) outside {}x{} grid", self.width, self.height)));
            }
        }
        if let Some(&(x, y)) = self.goals.iter().find(|g| self.walls.contains(g)) {
            return Err(Error::OutOfRange(format!("goal ({x},{y}) is a wall")));
        }
        if self.walls.len() >= self.width * self.height
            && (0..self.width * self.height).all(|i| self.walls.contains(&(i % self.width, i / self.width)))
        {
            return Err(Error::OutOfRange("every cell is a wall".into()));
        }
        Ok(())
    }

    /// Maps each cell to its state index, `None` for walls. States are
    /// numbered row-major over free cells.
    fn state_index(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        (0..self.width * self.height)
            .map(|i| {
                let cell = (i % self.width, i / self.width);
                if self.walls.contains(&cell) {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub states: usize,
    pub actions: usize,
    pub density: f64,
    pub seed: u64,
    /// Every action shares the same next-state distribution.
    #[serde(default)]
    pub identical_actions: bool,
}

impl RandomSpec {
    pub fn new(states: usize, actions: usize, density: f64, seed: u64) -> Self {
        Self {
            states,
            actions,
            density,
            seed,
            identical_actions: false,
        }
    }

    /// One successor per `(s, a)`.
    pub fn deterministic(states: usize, actions: usize, seed: u64) -> Self {
        Self::new(states, actions, 1.0 / states as f64, seed)
    }

    pub fn support_size(&self) -> usize {
        // guard against 1/S * S rounding just above an integer
        ((self.density * self.states as f64 - 1e-9).ceil() as usize).clamp(1, self.states)
    }
}

/// Chain of `n + 1` states starting at the leftmost. `right` advances
/// (self loop at `s_n`), `back` returns to `s_0`. Reward 1 only for
/// `(s_n, right)`.
pub fn generate_chain(n: usize) -> Result<TabularMdp> {
    if n < 1 {
        return Err(Error::OutOfRange("chain needs n >= 1".into()));
    }
    let s_count = n + 1;
    let mut t = vec![0.0; s_count * 2 * s_count];
    let mut r = vec![0.0; s_count * 2];
    for s in 0..s_count {
        t[(s * 2 + CHAIN_BACK) * s_count] = 1.0;
        let next = (s + 1).min(n);
        t[(s * 2 + CHAIN_RIGHT) * s_count + next] = 1.0;
    }
    r[n * 2 + CHAIN_RIGHT] = 1.0;
    let labels = (0..s_count).map(|i| format!("s{i}")).collect();
    Ok(TabularMdp::new(s_count, 2, t, r, 1.0, DEFAULT_GAMMA)?.with_labels(labels))
}

pub fn generate_grid(spec: &GridSpec) -> Result<TabularMdp> {
    spec.check()?;
    let index = spec.state_index();
    let cells: Vec<(usize, usize)> = (0..spec.width * spec.height)
        .filter(|&i| index[i].is_some())
        .map(|i| (i % spec.width, i / spec.width))
        .collect();
    let s_count = cells.len();
    let a_count = 4;

    let step = |(x, y): (usize, usize), action: usize| -> usize {
        let target = match action {
            NORTH if y > 0 => Some((x, y - 1)),
            SOUTH if y + 1 < spec.height => Some((x, y + 1)),
            EAST if x + 1 < spec.width => Some((x + 1, y)),
            WEST if x > 0 => Some((x - 1, y)),
            _ => None,
        };
        let here = index[y * spec.width + x].expect("free cell");
        target
            .and_then(|(tx, ty)| index[ty * spec.width + tx])
            .unwrap_or(here)
    };
    let laterals = |action: usize| -> [usize; 2] {
        match action {
            NORTH | SOUTH => [EAST, WEST],
            _ => [NORTH, SOUTH],
        }
    };

    let mut t = vec![0.0; s_count * a_count * s_count];
    let mut r = vec![0.0; s_count * a_count];
    for (s, &cell) in cells.iter().enumerate() {
        let is_goal = spec.goals.contains(&cell);
        for a in 0..a_count {
            let row = &mut t[(s * a_count + a) * s_count..(s * a_count + a + 1) * s_count];
            row[step(cell, a)] += 1.0 - spec.slip;
            if spec.slip > 0.0 {
                for lateral in laterals(a) {
                    row[step(cell, lateral)] += spec.slip / 2.0;
                }
            }
            if is_goal {
                r[s * a_count + a] = 1.0;
            }
        }
    }
    let labels = cells.iter().map(|(x, y)| format!("({x},{y})")).collect();
    Ok(TabularMdp::new(s_count, a_count, t, r, 1.0, DEFAULT_GAMMA)?.with_labels(labels))
}

/// Human-readable problems with a grid layout that do not stop generation,
/// currently only a free region split into several pieces.
pub fn grid_warnings(spec: &GridSpec) -> Vec<String> {
    if spec.check().is_err() {
        return Vec::new();
    }
    let index = spec.state_index();
    let free: Vec<(usize, usize)> = (0..spec.width * spec.height)
        .filter(|&i| index[i].is_some())
        .map(|i| (i % spec.width, i / spec.width))
        .collect();
    let adjacency: Vec<Vec<usize>> = free
        .iter()
        .map(|&(x, y)| {
            let mut out = Vec::new();
            let mut push = |cx: usize, cy: usize| {
                if let Some(j) = index[cy * spec.width + cx] {
                    out.push(j);
                }
            };
            if x > 0 {
                push(x - 1, y);
            }
            if x + 1 < spec.width {
                push(x + 1, y);
            }
            if y > 0 {
                push(x, y - 1);
            }
            if y + 1 < spec.height {
                push(x, y + 1);
            }
            out
        })
        .collect();
    let cs = component_structure_of_graph(&adjacency);
    if cs.num_components() > 1 {
        vec![format!(
            "free cells form {} disconnected regions; the random-walk chain is reducible",
            cs.num_components()
        )]
    } else {
        Vec::new()
    }
}

/// Taxi landmark cells as `(row, col)`: R, G, Y, B.
pub const TAXI_LANDMARKS: [(usize, usize); 4] = [(0, 0), (0, 4), (4, 0), (4, 3)];
/// Passenger location value meaning "inside the taxi".
pub const TAXI_IN_CAR: usize = 4;

/// Walls of the classic 5x5 map, as `(row, left col)`: movement between
/// `col` and `col + 1` in that row is blocked.
const TAXI_WALLS: [(usize, usize); 6] = [(0, 1), (1, 1), (3, 0), (3, 2), (4, 0), (4, 2)];

/// State index of a taxi configuration.
pub fn taxi_state(row: usize, col: usize, passenger: usize, destination: usize) -> usize {
    ((row * 5 + col) * 5 + passenger) * 4 + destination
}

/// Inverse of [`taxi_state`]: `(row, col, passenger, destination)`.
pub fn taxi_decode(state: usize) -> (usize, usize, usize, usize) {
    let destination = state % 4;
    let passenger = (state / 4) % 5;
    let cell = state / 20;
    (cell / 5, cell % 5, passenger, destination)
}

/// The 500-state Taxi domain. Illegal pickup/dropoff are no-ops; a dropoff
/// at a landmark other than the destination leaves the passenger there; a
/// dropoff at the destination pays 1 and starts a fresh task with passenger
/// and destination drawn uniformly over the landmarks (taxi stays put).
pub fn generate_taxi() -> TabularMdp {
    let s_count = 500;
    let a_count = 6;
    let blocked = |row: usize, left: usize| TAXI_WALLS.contains(&(row, left));
    let mut t = vec![0.0; s_count * a_count * s_count];
    let mut r = vec![0.0; s_count * a_count];
    for s in 0..s_count {
        let (row, col, pass, dest) = taxi_decode(s);
        let here = TAXI_LANDMARKS.iter().position(|&l| l == (row, col));
        for a in 0..a_count {
            let base = (s * a_count + a) * s_count;
            match a {
                NORTH => t[base + taxi_state(row.saturating_sub(1), col, pass, dest)] = 1.0,
                SOUTH => t[base + taxi_state((row + 1).min(4), col, pass, dest)] = 1.0,
                EAST => {
                    let c = if col < 4 && !blocked(row, col) { col + 1 } else { col };
                    t[base + taxi_state(row, c, pass, dest)] = 1.0;
                }
                WEST => {
                    let c = if col > 0 && !blocked(row, col - 1) { col - 1 } else { col };
                    t[base + taxi_state(row, c, pass, dest)] = 1.0;
                }
                PICKUP => {
                    let next = match here {
                        Some(l) if pass == l => taxi_state(row, col, TAXI_IN_CAR, dest),
                        _ => s,
                    };
                    t[base + next] = 1.0;
                }
                _ => match here {
                    Some(l) if pass == TAXI_IN_CAR && l == dest => {
                        r[s * a_count + a] = 1.0;
                        for p in 0..4 {
                            for d in 0..4 {
                                t[base + taxi_state(row, col, p, d)] += 1.0 / 16.0;
                            }
                        }
                    }
                    Some(l) if pass == TAXI_IN_CAR => t[base + taxi_state(row, col, l, dest)] = 1.0,
                    _ => t[base + s] = 1.0,
                },
            }
        }
    }
    const PASS: [&str; 5] = ["R", "G", "Y", "B", "taxi"];
    let labels = (0..s_count)
        .map(|s| {
            let (row, col, p, d) = taxi_decode(s);
            format!("({row},{col}) pass={} dest={}", PASS[p], PASS[d])
        })
        .collect();
    TabularMdp::new(s_count, a_count, t, r, 1.0, DEFAULT_GAMMA)
        .expect("taxi construction is valid")
        .with_labels(labels)
}

/// Random MDP with `support_size()` successors per `(s, a)`, Dirichlet(1)
/// weights and uniform rewards in `[0, 1]`, resampled until the random-walk
/// graph is strongly connected.
pub fn generate_random(spec: &RandomSpec) -> Result<TabularMdp> {
    if spec.states == 0 || spec.actions == 0 {
        return Err(Error::OutOfRange("random MDP needs S, A >= 1".into()));
    }
    if !(spec.density > 0.0 && spec.density <= 1.0) {
        return Err(Error::OutOfRange(format!("density {} not in (0,1]", spec.density)));
    }
    let (s_count, a_count) = (spec.states, spec.actions);
    let k = spec.support_size();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..RANDOM_RETRY_BUDGET {
        let mut t = vec![0.0; s_count * a_count * s_count];
        for s in 0..s_count {
            for a in 0..a_count {
                let base = (s * a_count + a) * s_count;
                if spec.identical_actions && a > 0 {
                    let (head, tail) = t.split_at_mut(base);
                    tail[..s_count].copy_from_slice(&head[s * a_count * s_count..s * a_count * s_count + s_count]);
                    continue;
                }
                let support = sample(&mut rng, s_count, k).into_vec();
                let weights: Vec<f64> = support.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let total: f64 = weights.iter().sum();
                for (&next, w) in support.iter().zip(&weights) {
                    t[base + next] = w / total;
                }
            }
        }
        let adjacency: Vec<Vec<usize>> = (0..s_count)
            .map(|s| {
                (0..s_count)
                    .filter(|&next| (0..a_count).any(|a| t[(s * a_count + a) * s_count + next] > 0.0))
                    .collect()
            })
            .collect();
        if !component_structure_of_graph(&adjacency).is_strongly_connected {
            continue;
        }
        let r = (0..s_count * a_count).map(|_| rng.random::<f64>()).collect();
        return TabularMdp::new(s_count, a_count, t, r, 1.0, DEFAULT_GAMMA);
    }
    Err(Error::RetryBudget(RANDOM_RETRY_BUDGET))
}
