//! Grid Pursuit: a small maze-chase game in the spirit of Pac-Man.
//!
//! The player eats pellets while four ghosts chase it along shortest corridor
//! paths. There are no power pellets, tunnels or fruit.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use super::{check_action, Action, EnvError, Environment, Transition};
use crate::features::FeatureMap;

/// The canonical 19x11 maze.
pub const DEFAULT_MAZE: &str = include_str!("../../assets/maze.txt");
pub const DEFAULT_STEP_LIMIT: u32 = 2000;

pub const PELLET_REWARD: f64 = 10.0;
pub const COLLISION_REWARD: f64 = -500.0;
pub const LEVEL_CLEAR_BONUS: f64 = 100.0;
pub const GHOST_CHASE_PROBABILITY: f64 = 0.8;

/// Distance used for "nearest pellet" once the board is empty.
pub const SENTINEL_DISTANCE: f64 = 50.0;
pub const PURSUIT_FEATURES: usize = 7;

const NUM_GHOSTS: usize = 4;
const MAX_CELLS: usize = 256;
const NO_HEADING: u8 = u8::MAX;
const UNREACHABLE: u16 = u16::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
    ];

    fn delta(self) -> (isize, isize) {
        match self {
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
        }
    }

    fn reverse(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MazeError {
    #[error("maze is empty")]
    Empty,
    #[error("maze is not rectangular: line {line} has width {found}, expected {expected}")]
    NotRectangular {
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("unexpected character {ch:?} at line {line}, column {column}")]
    BadCharacter {
        ch: char,
        line: usize,
        column: usize,
    },
    #[error("maze needs exactly one player spawn 'P', found {0}")]
    PlayerSpawn(usize),
    #[error("maze needs exactly {NUM_GHOSTS} ghost spawns 'G', found {0}")]
    GhostSpawns(usize),
    #[error("maze has {0} corridor cells, at most {MAX_CELLS} are supported")]
    TooLarge(usize),
    #[error("corridor cell at line {line}, column {column} is unreachable from the player spawn")]
    Disconnected { line: usize, column: usize },
    #[error("maze has no pellets")]
    NoPellets,
}

/// Static maze layout with precomputed shortest-path distances between corridor cells.
#[derive(Debug, Clone)]
pub struct Maze {
    width: usize,
    height: usize,
    cell_of: Vec<Option<usize>>,
    coords: Vec<(usize, usize)>,
    neighbors: Vec<[Option<usize>; 4]>,
    dist: Vec<u16>,
    by_distance: Vec<Vec<(u16, u16)>>,
    player_spawn: usize,
    ghost_spawns: [usize; NUM_GHOSTS],
    pellets: Vec<usize>,
}

impl Maze {
    /// Parses the text format: `#` wall, `.` corridor, `o` pellet, `G` ghost spawn, `P` player spawn.
    pub fn parse(text: &str) -> Result<Maze, MazeError> {
        let lines: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .skip_while(|l| l.trim().is_empty())
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        if lines.is_empty() {
            return Err(MazeError::Empty);
        }
        let width = lines[0].chars().count();
        if width == 0 {
            return Err(MazeError::Empty);
        }
        let height = lines.len();
        let mut cell_of = vec![None; width * height];
        let mut coords = Vec::new();
        let mut players = Vec::new();
        let mut ghosts = Vec::new();
        let mut pellets = Vec::new();
        for (y, line) in lines.iter().enumerate() {
            let found = line.chars().count();
            if found != width {
                return Err(MazeError::NotRectangular {
                    line: y + 1,
                    found,
                    expected: width,
                });
            }
            for (x, ch) in line.chars().enumerate() {
                if ch == '#' {
                    continue;
                }
                let id = coords.len();
                match ch {
                    '.' => {}
                    'o' => pellets.push(id),
                    'G' => ghosts.push(id),
                    'P' => players.push(id),
                    _ => {
                        return Err(MazeError::BadCharacter {
                            ch,
                            line: y + 1,
                            column: x + 1,
                        })
                    }
                }
                cell_of[y * width + x] = Some(id);
                coords.push((x, y));
            }
        }
        if players.len() != 1 {
            return Err(MazeError::PlayerSpawn(players.len()));
        }
        if ghosts.len() != NUM_GHOSTS {
            return Err(MazeError::GhostSpawns(ghosts.len()));
        }
        if coords.len() > MAX_CELLS {
            return Err(MazeError::TooLarge(coords.len()));
        }
        if pellets.is_empty() {
            return Err(MazeError::NoPellets);
        }

        let neighbors: Vec<[Option<usize>; 4]> = coords
            .iter()
            .map(|&(x, y)| {
                Direction::ALL.map(|d| {
                    let (dx, dy) = d.delta();
                    let nx = x.checked_add_signed(dx)?;
                    let ny = y.checked_add_signed(dy)?;
                    if nx >= width || ny >= height {
                        return None;
                    }
                    cell_of[ny * width + nx]
                })
            })
            .collect();

        let n = coords.len();
        let mut dist = vec![UNREACHABLE; n * n];
        let mut queue = VecDeque::new();
        for src in 0..n {
            let row = &mut dist[src * n..(src + 1) * n];
            row[src] = 0;
            queue.push_back(src);
            while let Some(c) = queue.pop_front() {
                for next in neighbors[c].iter().flatten() {
                    if row[*next] == UNREACHABLE {
                        row[*next] = row[c] + 1;
                        queue.push_back(*next);
                    }
                }
            }
        }
        let player_spawn = players[0];
        if let Some(c) = (0..n).find(|&c| dist[player_spawn * n + c] == UNREACHABLE) {
            let (x, y) = coords[c];
            return Err(MazeError::Disconnected {
                line: y + 1,
                column: x + 1,
            });
        }
        let by_distance = (0..n)
            .map(|src| {
                let mut cells: Vec<(u16, u16)> =
                    (0..n).map(|c| (dist[src * n + c], c as u16)).collect();
                cells.sort_unstable();
                cells
            })
            .collect();

        Ok(Maze {
            width,
            height,
            cell_of,
            coords,
            neighbors,
            dist,
            by_distance,
            player_spawn,
            ghost_spawns: [ghosts[0], ghosts[1], ghosts[2], ghosts[3]],
            pellets,
        })
    }

    pub fn canonical() -> Maze {
        Maze::parse(DEFAULT_MAZE).expect("bundled maze is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_cells(&self) -> usize {
        self.coords.len()
    }

    pub fn cell_at(&self, x: usize, y: usize) -> Option<usize> {
        if x >= self.width || y >= self.height {
            return None;
        }
        self.cell_of[y * self.width + x]
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        self.coords[cell]
    }

    pub fn neighbor(&self, cell: usize, dir: Direction) -> Option<usize> {
        self.neighbors[cell][dir as usize]
    }

    /// Shortest corridor distance.
    pub fn distance(&self, a: usize, b: usize) -> u32 {
        self.dist[a * self.num_cells() + b] as u32
    }

    pub fn player_spawn(&self) -> usize {
        self.player_spawn
    }

    pub fn ghost_spawns(&self) -> [usize; 4] {
        self.ghost_spawns
    }

    pub fn pellet_cells(&self) -> &[usize] {
        &self.pellets
    }

    /// Start-of-episode state: every pellet in place, actors on their spawns.
    pub fn initial_state(&self) -> PursuitState {
        self.state_with(self.player_spawn, self.ghost_spawns, &self.pellets)
    }

    /// Builds an arbitrary state (step counter 0, no ghost headings).
    pub fn state_with(&self, player: usize, ghosts: [usize; 4], pellets: &[usize]) -> PursuitState {
        let mut bits = [0u64; 4];
        for &p in pellets {
            bits[p / 64] |= 1 << (p % 64);
        }
        PursuitState {
            player: player as u16,
            ghosts: ghosts.map(|g| g as u16),
            ghost_heading: [NO_HEADING; NUM_GHOSTS],
            pellets: bits,
            pellets_left: bits.iter().map(|w| w.count_ones()).sum::<u32>() as u16,
            steps: 0,
            over: false,
        }
    }

    fn moved(&self, cell: usize, action: Action) -> usize {
        self.neighbors[cell][action].unwrap_or(cell)
    }
}

/// Full game state. `Copy`, so transitions can carry it cheaply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PursuitState {
    player: u16,
    ghosts: [u16; NUM_GHOSTS],
    ghost_heading: [u8; NUM_GHOSTS],
    pellets: [u64; 4],
    pellets_left: u16,
    steps: u32,
    over: bool,
}

impl PursuitState {
    pub fn player(&self) -> usize {
        self.player as usize
    }

    pub fn ghosts(&self) -> [usize; 4] {
        self.ghosts.map(|g| g as usize)
    }

    pub fn has_pellet(&self, cell: usize) -> bool {
        self.pellets[cell / 64] & (1 << (cell % 64)) != 0
    }

    pub fn pellets_left(&self) -> usize {
        self.pellets_left as usize
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn is_over(&self) -> bool {
        self.over
    }

    fn take_pellet(&mut self, cell: usize) -> bool {
        if self.has_pellet(cell) {
            self.pellets[cell / 64] &= !(1 << (cell % 64));
            self.pellets_left -= 1;
            true
        } else {
            false
        }
    }

    fn ghost_on(&self, cell: usize) -> bool {
        self.ghosts.iter().any(|&g| g as usize == cell)
    }
}

#[derive(Debug, Clone)]
pub struct GridPursuit {
    maze: Arc<Maze>,
    step_limit: u32,
    state: PursuitState,
}

impl GridPursuit {
    pub fn new(maze: Arc<Maze>, step_limit: u32) -> Self {
        let state = maze.initial_state();
        Self {
            maze,
            step_limit,
            state,
        }
    }

    pub fn maze(&self) -> &Arc<Maze> {
        &self.maze
    }

    pub fn step_limit(&self) -> u32 {
        self.step_limit
    }

    pub fn set_state(&mut self, state: PursuitState) {
        self.state = state;
    }

    fn move_ghosts<R: Rng + ?Sized>(&self, state: &mut PursuitState, rng: &mut R) {
        let maze = &*self.maze;
        let target = state.player as usize;
        for i in 0..NUM_GHOSTS {
            let at = state.ghosts[i] as usize;
            let reverse = match state.ghost_heading[i] {
                NO_HEADING => None,
                h => Some(Direction::ALL[h as usize].reverse()),
            };
            let mut legal = [Direction::Up; 4];
            let mut count = 0;
            for d in Direction::ALL {
                if maze.neighbor(at, d).is_some() && Some(d) != reverse {
                    legal[count] = d;
                    count += 1;
                }
            }
            if count == 0 {
                // dead end: reversing is the only way out
                match reverse {
                    Some(d) if maze.neighbor(at, d).is_some() => {
                        legal[0] = d;
                        count = 1;
                    }
                    _ => continue,
                }
            }
            let legal = &legal[..count];
            let chase = rng.gen::<f64>() < GHOST_CHASE_PROBABILITY;
            let dir = if chase {
                *legal
                    .iter()
                    .min_by_key(|d| maze.distance(maze.neighbor(at, **d).unwrap(), target))
                    .unwrap()
            } else {
                legal[rng.gen_range(0..legal.len())]
            };
            state.ghosts[i] = maze.neighbor(at, dir).unwrap() as u16;
            state.ghost_heading[i] = dir as u8;
        }
    }
}

impl Environment for GridPursuit {
    type State = PursuitState;

    fn num_actions(&self) -> usize {
        4
    }

    fn reward_bound(&self) -> f64 {
        COLLISION_REWARD.abs()
    }

    fn reset<R: Rng + ?Sized>(&mut self, _rng: &mut R) -> PursuitState {
        self.state = self.maze.initial_state();
        self.state
    }

    fn state(&self) -> &PursuitState {
        &self.state
    }

    fn is_terminal(&self, state: &PursuitState) -> bool {
        state.over
    }

    fn step<R: Rng + ?Sized>(
        &mut self,
        action: Action,
        rng: &mut R,
    ) -> Result<Transition<PursuitState>, EnvError> {
        check_action(action, 4)?;
        if self.state.over {
            return Err(EnvError::Terminated);
        }
        let before = self.state;
        let mut next = before;
        let cell = self.maze.moved(before.player as usize, action);
        next.player = cell as u16;
        next.steps += 1;

        let reward = if next.ghost_on(cell) {
            next.over = true;
            COLLISION_REWARD
        } else {
            let mut r = if next.take_pellet(cell) {
                PELLET_REWARD
            } else {
                0.0
            };
            if next.pellets_left == 0 {
                next.over = true;
                r += LEVEL_CLEAR_BONUS;
            } else {
                self.move_ghosts(&mut next, rng);
                if next.ghost_on(cell) {
                    next.over = true;
                    r = COLLISION_REWARD;
                }
            }
            r
        };
        if next.steps >= self.step_limit {
            next.over = true;
        }
        self.state = next;
        Ok(Transition {
            state: before,
            action,
            reward,
            next_state: next,
            done: next.over,
        })
    }

    fn state_id(&self, state: &PursuitState) -> u64 {
        state.player as u64
    }
}

/// Seven object-count features of the cell the player would occupy after `action`:
///
/// `[1, pellets<=2 /10, pellets<=5 /20, pellets<=10 /40, ghosts<=2 /4, ghosts<=5 /4, 1/(1+nearest pellet)]`
///
/// Counts are capped at their divisors and distances are shortest corridor paths.
#[derive(Debug, Clone)]
pub struct PursuitFeatures {
    maze: Arc<Maze>,
}

impl PursuitFeatures {
    pub fn new(maze: Arc<Maze>) -> Self {
        Self { maze }
    }
}

impl FeatureMap<PursuitState> for PursuitFeatures {
    fn dim(&self) -> usize {
        PURSUIT_FEATURES
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn features_into(&self, state: &PursuitState, action: Action, out: &mut [f64]) {
        let maze = &*self.maze;
        let p = maze.moved(state.player as usize, action);
        let (mut near2, mut near5, mut near10) = (0u32, 0u32, 0u32);
        let mut nearest = None;
        for &(d, c) in &maze.by_distance[p] {
            if d > 10 && nearest.is_some() {
                break;
            }
            if state.has_pellet(c as usize) {
                nearest.get_or_insert(d);
                if d <= 2 {
                    near2 += 1;
                }
                if d <= 5 {
                    near5 += 1;
                }
                if d <= 10 {
                    near10 += 1;
                }
            }
        }
        let (mut ghosts2, mut ghosts5) = (0u32, 0u32);
        for &g in &state.ghosts {
            let d = maze.distance(p, g as usize);
            if d <= 2 {
                ghosts2 += 1;
            }
            if d <= 5 {
                ghosts5 += 1;
            }
        }
        let nearest = nearest.map_or(SENTINEL_DISTANCE, f64::from);
        out[0] = 1.0;
        out[1] = near2.min(10) as f64 / 10.0;
        out[2] = near5.min(20) as f64 / 20.0;
        out[3] = near10.min(40) as f64 / 40.0;
        out[4] = ghosts2 as f64 / 4.0;
        out[5] = ghosts5 as f64 / 4.0;
        out[6] = 1.0 / (1.0 + nearest);
    }
}
