//! The gridded search world: hidden targets, region sensing actions, noisy
//! observations and travel/sensing costs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, SimRng};

/// Grid geometry. Cells are indexed row-major, `index = row * n_wid + col`,
/// with cell centers at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub n_len: usize,
    pub n_wid: usize,
}

impl Grid {
    pub fn new(n_len: usize, n_wid: usize) -> Result<Self> {
        if n_len == 0 || n_wid == 0 {
            return Err(Error::InvalidConfig(format!(
                "grid dimensions must be positive, got {n_len}x{n_wid}"
            )));
        }
        Ok(Self { n_len, n_wid })
    }

    pub fn cells(&self) -> usize {
        self.n_len * self.n_wid
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell / self.n_wid, cell % self.n_wid)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n_wid + col
    }

    fn offset(&self, cell: usize, d_row: i64, d_col: i64) -> Option<usize> {
        let (r, c) = self.coords(cell);
        let r = r as i64 + d_row;
        let c = c as i64 + d_col;
        if r < 0 || c < 0 || r >= self.n_len as i64 || c >= self.n_wid as i64 {
            None
        } else {
            Some(self.index(r as usize, c as usize))
        }
    }

    /// Euclidean distance between two cell centers.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        let dr = ra as f64 - rb as f64;
        let dc = ca as f64 - cb as f64;
        (dr * dr + dc * dc).sqrt()
    }

    pub fn check_cell(&self, cell: usize) -> Result<()> {
        if cell < self.cells() {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                cell,
                n: self.cells(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    E,
    W,
    N,
    S,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::E, Direction::W, Direction::N, Direction::S];

    /// Grid displacement of a sensor offset given in the agent frame
    /// (`forward` along the facing direction, `lateral` to its left).
    fn rotate(self, forward: i64, lateral: i64) -> (i64, i64) {
        match self {
            Direction::E => (-lateral, forward),
            Direction::W => (lateral, -forward),
            Direction::N => (-forward, -lateral),
            Direction::S => (forward, lateral),
        }
    }
}

/// Field-of-view footprint in the agent frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FovPattern {
    /// `(forward, lateral)` offsets; `(0, 0)` is the agent's own cell.
    pub offsets: Vec<(i64, i64)>,
    pub directions: Vec<Direction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FovPreset {
    /// Own cell plus two cells ahead, facing east or west.
    Line3,
    /// Own cell, one cell ahead and three cells at range two, four headings.
    Wedge2,
    Custom(FovPattern),
}

impl FovPreset {
    pub fn pattern(&self) -> FovPattern {
        match self {
            FovPreset::Line3 => FovPattern {
                offsets: vec![(0, 0), (1, 0), (2, 0)],
                directions: vec![Direction::E, Direction::W],
            },
            FovPreset::Wedge2 => FovPattern {
                offsets: vec![(0, 0), (1, 0), (2, 1), (2, 0), (2, -1)],
                directions: Direction::ALL.to_vec(),
            },
            FovPreset::Custom(p) => p.clone(),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "line3" => Ok(FovPreset::Line3),
            "wedge2" => Ok(FovPreset::Wedge2),
            other => Err(Error::InvalidConfig(format!("unknown fov preset `{other}`"))),
        }
    }
}

/// A region sensing action: the agent stands at `origin`, faces `direction`
/// and observes every cell in `cells` with independent noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingAction {
    /// Position in the enumeration returned by [`enumerate_actions`].
    pub index: usize,
    pub origin: usize,
    pub direction: Direction,
    pub cells: Vec<usize>,
}

impl SensingAction {
    /// Binary grid mask, flattened row-major.
    pub fn mask(&self, n: usize) -> Vec<u8> {
        let mut mask = vec![0u8; n];
        for &c in &self.cells {
            mask[c] = 1;
        }
        mask
    }

    /// The mask with sensed cells at +1 and the rest at -1.
    pub fn coded_mask(&self, n: usize) -> Vec<f64> {
        let mut coded = vec![-1.0; n];
        for &c in &self.cells {
            coded[c] = 1.0;
        }
        coded
    }

    pub fn covers(&self, cell: usize) -> bool {
        self.cells.contains(&cell)
    }
}

/// Noisy readings `y = X beta + noise` from one action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub values: Vec<f64>,
    pub action_index: usize,
    pub timestamp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub grid: Grid,
    pub k: usize,
    pub sigma: f64,
    pub fov: FovPreset,
    pub seed: u64,
    pub beta_true: Vec<u8>,
}

impl Environment {
    /// Places `k` targets uniformly without replacement.
    pub fn new(
        n_len: usize,
        n_wid: usize,
        k: usize,
        sigma: f64,
        fov: FovPreset,
        seed: u64,
    ) -> Result<Self> {
        let grid = Grid::new(n_len, n_wid)?;
        let n = grid.cells();
        if k == 0 || k > n {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= k <= n, got k={k}, n={n}"
            )));
        }
        check_sigma(sigma)?;
        let mut rng = rng::seeded(rng::derive_seed(seed, rng::stream::ENV));
        let mut beta_true = vec![0u8; n];
        for cell in rand::seq::index::sample(&mut rng, n, k) {
            beta_true[cell] = 1;
        }
        Ok(Self {
            grid,
            k,
            sigma,
            fov,
            seed,
            beta_true,
        })
    }

    /// Builds an environment with explicit target cells.
    pub fn with_targets(
        grid: Grid,
        targets: &[usize],
        sigma: f64,
        fov: FovPreset,
    ) -> Result<Self> {
        check_sigma(sigma)?;
        let mut beta_true = vec![0u8; grid.cells()];
        for &t in targets {
            grid.check_cell(t)?;
            beta_true[t] = 1;
        }
        let k = beta_true.iter().filter(|&&b| b == 1).count();
        if k == 0 {
            return Err(Error::InvalidConfig("at least one target required".into()));
        }
        Ok(Self {
            grid,
            k,
            sigma,
            fov,
            seed: 0,
            beta_true,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.cells()
    }

    pub fn targets(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.beta_true[i] == 1).collect()
    }

    pub fn actions(&self) -> Vec<SensingAction> {
        enumerate_actions(self.grid, &self.fov)
    }

    pub fn observe(
        &self,
        action: &SensingAction,
        timestamp: usize,
        rng: &mut SimRng,
    ) -> Result<Observation> {
        observe_vector(&self.beta_true, self.grid, action, self.sigma, rng).map(|values| {
            Observation {
                values,
                action_index: action.index,
                timestamp,
            }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("environment record is always serializable")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let env: Environment =
            toml::from_str(text).map_err(|e| Error::format("environment record", e.to_string()))?;
        if env.beta_true.len() != env.grid.cells()
            || env.beta_true.iter().filter(|&&b| b == 1).count() != env.k
        {
            return Err(Error::format(
                "environment record",
                "beta_true inconsistent with grid or k",
            ));
        }
        Ok(env)
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")))
    }
}

/// Simulated readings of an arbitrary (possibly hypothetical) search vector.
pub fn observe_vector<T: Copy + Into<f64>>(
    beta: &[T],
    grid: Grid,
    action: &SensingAction,
    sigma: f64,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    action
        .cells
        .iter()
        .map(|&c| {
            grid.check_cell(c)?;
            let noise: f64 = rng.sample(StandardNormal);
            Ok(beta[c].into() + sigma * noise)
        })
        .collect()
}

/// All sensing actions, ordered by origin cell and then heading
/// (E, W, N, S). Cells falling off the grid are clipped; actions whose
/// clipped footprints coincide are kept as distinct entries.
pub fn enumerate_actions(grid: Grid, fov: &FovPreset) -> Vec<SensingAction> {
    let pattern = fov.pattern();
    let mut directions = pattern.directions.clone();
    directions.sort_by_key(|d| Direction::ALL.iter().position(|x| x == d));
    directions.dedup();
    let mut actions = Vec::with_capacity(grid.cells() * directions.len());
    for origin in 0..grid.cells() {
        for &direction in &directions {
            let mut cells = Vec::with_capacity(pattern.offsets.len());
            for &(fwd, lat) in &pattern.offsets {
                let (dr, dc) = direction.rotate(fwd, lat);
                if let Some(cell) = grid.offset(origin, dr, dc) {
                    if !cells.contains(&cell) {
                        cells.push(cell);
                    }
                }
            }
            if cells.is_empty() {
                continue;
            }
            actions.push(SensingAction {
                index: actions.len(),
                origin,
                direction,
                cells,
            });
        }
    }
    actions
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    /// Travel speed in cells per second.
    pub speed: f64,
    /// Seconds spent per sensing action.
    pub sense_cost: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            speed: 1.0,
            sense_cost: 0.0,
        }
    }
}

impl CostModel {
    pub fn new(speed: f64, sense_cost: f64) -> Result<Self> {
        if !(speed > 0.0) || !(sense_cost >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "need speed > 0 and sense cost >= 0, got {speed}, {sense_cost}"
            )));
        }
        Ok(Self { speed, sense_cost })
    }

    pub fn travel_cost(&self, grid: Grid, from: usize, to: usize) -> f64 {
        grid.distance(from, to) / self.speed
    }

    /// Travel plus sensing time of one action executed from `from`.
    pub fn step_cost(&self, grid: Grid, from: usize, action: &SensingAction) -> f64 {
        self.travel_cost(grid, from, action.origin) + self.sense_cost
    }

    /// Total time to execute `origins` in order starting at `start`.
    pub fn episode_cost<I>(&self, grid: Grid, start: usize, origins: I) -> f64
    where
        I: IntoIterator<Item = usize>,
    {
        let mut prev = start;
        let mut total = 0.0;
        for origin in origins {
            total += self.travel_cost(grid, prev, origin) + self.sense_cost;
            prev = origin;
        }
        total
    }
}

/// Cumulative Euclidean distance of an origin sequence starting at `start`.
pub fn path_length<I>(grid: Grid, start: usize, origins: I) -> f64
where
    I: IntoIterator<Item = usize>,
{
    let mut prev = start;
    origins
        .into_iter()
        .map(|o| {
            let d = grid.distance(prev, o);
            prev = o;
            d
        })
        .sum()
}
