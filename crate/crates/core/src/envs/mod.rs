//! Partially observable, sparse-reward gridworlds.
//!
//! Two procedurally randomized layouts are provided: a lava crossing whose
//! second lava strip moves between resets, and a chain of rooms regenerated
//! on every reset. The agent turns left, turns right or moves forward and
//! observes a small egocentric window.

mod layout;

use std::collections::VecDeque;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

pub use layout::Room;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Empty,
    Wall,
    Lava,
    Goal,
}

/// Observation categories, one-hot per window cell.
pub const CELL_CATEGORIES: usize = 5;
const OUT_OF_BOUNDS: usize = 4;

impl Cell {
    fn category(self) -> usize {
        match self {
            Cell::Empty => 0,
            Cell::Wall => 1,
            Cell::Lava => 2,
            Cell::Goal => 3,
        }
    }

    fn glyph(self) -> char {
        match self {
            Cell::Empty => '.',
            Cell::Wall => '#',
            Cell::Lava => '~',
            Cell::Goal => 'G',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    TurnLeft,
    TurnRight,
    Forward,
}

impl Action {
    pub const COUNT: usize = 3;
    pub const ALL: [Action; 3] = [Action::TurnLeft, Action::TurnRight, Action::Forward];

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Contract(format!("action index {i} out of range")))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    None,
    Goal,
    Lava,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvName {
    DistShift,
    MultiRoom,
    EmptyRoom,
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvName::DistShift => "dist-shift",
            EnvName::MultiRoom => "multi-room",
            EnvName::EmptyRoom => "empty-room",
        })
    }
}

/// Full description of an environment family. Dimensions include the outer
/// wall.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: EnvName,
    pub width: usize,
    pub height: usize,
    /// Room count (multi-room only).
    pub rooms: usize,
    /// Room side range including walls (multi-room only).
    pub room_min: usize,
    pub room_max: usize,
    pub view_size: usize,
    pub max_steps: usize,
    /// Mixed into every episode seed so separate layout streams can be drawn
    /// from one run seed.
    pub layout_stream: u64,
}

impl EnvSpec {
    pub fn dist_shift() -> Self {
        Self {
            name: EnvName::DistShift,
            width: 9,
            height: 7,
            rooms: 0,
            room_min: 0,
            room_max: 0,
            view_size: 5,
            max_steps: 200,
            layout_stream: 0,
        }
    }

    pub fn multi_room() -> Self {
        Self {
            name: EnvName::MultiRoom,
            width: 15,
            height: 15,
            rooms: 3,
            room_min: 4,
            room_max: 6,
            view_size: 5,
            max_steps: 400,
            layout_stream: 0,
        }
    }

    /// Walled room with `interior × interior` free cells, the agent in the
    /// top-left corner and the goal in the bottom-right corner.
    pub fn empty_room(interior: usize) -> Self {
        Self {
            name: EnvName::EmptyRoom,
            width: interior + 2,
            height: interior + 2,
            rooms: 0,
            room_min: 0,
            room_max: 0,
            view_size: 5,
            max_steps: 100,
            layout_stream: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.view_size < 3 || self.view_size.is_multiple_of(2) {
            return bad(format!("view_size must be odd and >= 3, got {}", self.view_size));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        match self.name {
            EnvName::DistShift if self.width < 7 || self.height < 5 => bad(format!(
                "dist-shift needs at least 7x5, got {}x{}",
                self.width, self.height
            )),
            EnvName::MultiRoom if self.rooms == 0 || self.room_min < 4 || self.room_max < self.room_min => {
                bad(format!(
                    "multi-room needs rooms >= 1 and 4 <= room_min <= room_max, got {} rooms of {}..={}",
                    self.rooms, self.room_min, self.room_max
                ))
            }
            EnvName::MultiRoom if self.width < self.room_max + 2 || self.height < self.room_max + 2 => {
                bad(format!("multi-room grid {}x{} too small", self.width, self.height))
            }
            EnvName::EmptyRoom if self.width < 3 || self.height < 3 => {
                bad("empty room needs a positive interior".into())
            }
            _ => Ok(()),
        }
    }

    pub fn observation_len(&self) -> usize {
        self.view_size * self.view_size * CELL_CATEGORIES + 4
    }

    pub fn build(&self) -> Result<GridEnv> {
        GridEnv::new(self.clone())
    }
}

/// Grid position as `(x, y)`, `y` growing downward.
pub type Pos = (usize, usize);

/// Heading deltas: east, south, west, north.
const DIRS: [(isize, isize); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

#[derive(Debug, Clone)]
pub struct GridEnv {
    spec: EnvSpec,
    cells: Vec<Cell>,
    goal: Pos,
    start: Pos,
    agent_pos: Pos,
    agent_dir: usize,
    step_count: usize,
    done: bool,
    /// Second lava strip row (dist-shift only).
    lava_row: Option<usize>,
    rooms: Vec<Room>,
    layout_rng: ChaCha8Rng,
}

impl GridEnv {
    pub fn new(spec: EnvSpec) -> Result<Self> {
        spec.validate()?;
        let cells = vec![Cell::Empty; spec.width * spec.height];
        let mut env = Self {
            spec,
            cells,
            goal: (1, 1),
            start: (1, 1),
            agent_pos: (1, 1),
            agent_dir: 0,
            step_count: 0,
            done: true,
            lava_row: None,
            rooms: Vec::new(),
            layout_rng: ChaCha8Rng::seed_from_u64(0),
        };
        env.reset(0)?;
        Ok(env)
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn max_steps(&self) -> usize {
        self.spec.max_steps
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn agent_pos(&self) -> Pos {
        self.agent_pos
    }

    /// 0 = east, 1 = south, 2 = west, 3 = north.
    pub fn agent_dir(&self) -> usize {
        self.agent_dir
    }

    pub fn goal(&self) -> Pos {
        self.goal
    }

    pub fn lava_row(&self) -> Option<usize> {
        self.lava_row
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn cell(&self, (x, y): Pos) -> Cell {
        self.cells[y * self.spec.width + x]
    }

    pub(crate) fn set_cell(&mut self, (x, y): Pos, c: Cell) {
        let w = self.spec.width;
        self.cells[y * w + x] = c;
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Regenerates the layout from `episode_seed` and places the agent at
    /// the start.
    pub fn reset(&mut self, episode_seed: u64) -> Result<Vec<f64>> {
        let seed = crate::seeding::derive(episode_seed, self.spec.layout_stream);
        self.layout_rng = ChaCha8Rng::seed_from_u64(seed);
        self.generate()?;
        if self.shortest_path_len().is_none() {
            return Err(Error::Generation("generated layout has no path to the goal".into()));
        }
        self.agent_pos = self.start;
        self.step_count = 0;
        self.done = false;
        Ok(self.observation())
    }

    fn front(&self) -> Pos {
        let (dx, dy) = DIRS[self.agent_dir];
        let (x, y) = self.agent_pos;
        ((x as isize + dx) as usize, (y as isize + dy) as usize)
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        contract!(!self.done, "step called on a finished episode");
        self.step_count += 1;
        let mut reward = 0.0;
        let mut info = Termination::None;
        match action {
            Action::TurnLeft => self.agent_dir = (self.agent_dir + 3) % 4,
            Action::TurnRight => self.agent_dir = (self.agent_dir + 1) % 4,
            Action::Forward => {
                let next = self.front();
                match self.cell(next) {
                    Cell::Wall => {}
                    Cell::Empty => self.agent_pos = next,
                    Cell::Lava => {
                        self.agent_pos = next;
                        info = Termination::Lava;
                    }
                    Cell::Goal => {
                        self.agent_pos = next;
                        reward = self.goal_reward();
                        info = Termination::Goal;
                    }
                }
            }
        }
        if info == Termination::None && self.step_count >= self.spec.max_steps {
            info = Termination::Timeout;
        }
        self.done = info != Termination::None;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: self.done,
            info,
        })
    }

    /// `1 - 0.9 · t / T` for reaching the goal on step `t`.
    fn goal_reward(&self) -> f64 {
        1.0 - 0.9 * (self.step_count as f64 / self.spec.max_steps as f64)
    }

    /// Egocentric window with the agent at the bottom-center looking up,
    /// followed by a one-hot heading.
    pub fn observation(&self) -> Vec<f64> {
        let v = self.spec.view_size;
        let half = (v / 2) as isize;
        let mut obs = vec![0.0; self.spec.observation_len()];
        let (fx, fy) = DIRS[self.agent_dir];
        let (rx, ry) = DIRS[(self.agent_dir + 1) % 4];
        let (ax, ay) = (self.agent_pos.0 as isize, self.agent_pos.1 as isize);
        for vy in 0..v {
            let ahead = (v - 1 - vy) as isize;
            for vx in 0..v {
                let lateral = vx as isize - half;
                let wx = ax + ahead * fx + lateral * rx;
                let wy = ay + ahead * fy + lateral * ry;
                let category = if wx < 0 || wy < 0 || wx as usize >= self.spec.width || wy as usize >= self.spec.height
                {
                    OUT_OF_BOUNDS
                } else {
                    self.cell((wx as usize, wy as usize)).category()
                };
                obs[(vy * v + vx) * CELL_CATEGORIES + category] = 1.0;
            }
        }
        obs[v * v * CELL_CATEGORIES + self.agent_dir] = 1.0;
        obs
    }

    pub fn render_ascii(&self) -> String {
        let mut out = String::with_capacity((self.spec.width + 1) * self.spec.height);
        for y in 0..self.spec.height {
            for x in 0..self.spec.width {
                if (x, y) == self.agent_pos {
                    out.push(['>', 'v', '<', '^'][self.agent_dir]);
                } else {
                    out.push(self.cell((x, y)).glyph());
                }
            }
            if y + 1 < self.spec.height {
                out.push('\n');
            }
        }
        out
    }

    fn passable(&self, p: Pos) -> bool {
        matches!(self.cell(p), Cell::Empty | Cell::Goal)
    }

    /// Breadth-first distance in cells from the start to the goal, avoiding
    /// walls and lava.
    pub fn shortest_path_len(&self) -> Option<usize> {
        let (w, h) = (self.spec.width, self.spec.height);
        let mut dist = vec![usize::MAX; w * h];
        let mut queue = VecDeque::new();
        dist[self.start.1 * w + self.start.0] = 0;
        queue.push_back(self.start);
        while let Some((x, y)) = queue.pop_front() {
            let d = dist[y * w + x];
            if (x, y) == self.goal {
                return Some(d);
            }
            for (dx, dy) in DIRS {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let n = (nx as usize, ny as usize);
                if self.passable(n) && dist[n.1 * w + n.0] == usize::MAX {
                    dist[n.1 * w + n.0] = d + 1;
                    queue.push_back(n);
                }
            }
        }
        None
    }

    /// Shortest action sequence from the current pose to the goal that
    /// avoids lava, found by breadth-first search over (cell, heading).
    pub fn plan_to_goal(&self) -> Option<Vec<Action>> {
        let (w, h) = (self.spec.width, self.spec.height);
        let idx = |p: Pos, d: usize| (p.1 * w + p.0) * 4 + d;
        let mut prev: Vec<Option<(usize, Action)>> = vec![None; w * h * 4];
        let mut seen = vec![false; w * h * 4];
        let start = idx(self.agent_pos, self.agent_dir);
        seen[start] = true;
        let mut queue = VecDeque::from([(self.agent_pos, self.agent_dir)]);
        while let Some((p, d)) = queue.pop_front() {
            if p == self.goal {
                let mut plan = Vec::new();
                let mut cur = idx(p, d);
                while let Some((from, a)) = prev[cur] {
                    plan.push(a);
                    cur = from;
                }
                plan.reverse();
                return Some(plan);
            }
            for a in Action::ALL {
                let (np, nd) = match a {
                    Action::TurnLeft => (p, (d + 3) % 4),
                    Action::TurnRight => (p, (d + 1) % 4),
                    Action::Forward => {
                        let (dx, dy) = DIRS[d];
                        let n = ((p.0 as isize + dx) as usize, (p.1 as isize + dy) as usize);
                        if !self.passable(n) {
                            continue;
                        }
                        (n, d)
                    }
                };
                let j = idx(np, nd);
                if !seen[j] {
                    seen[j] = true;
                    prev[j] = Some((idx(p, d), a));
                    queue.push_back((np, nd));
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_is_deterministic_per_seed() {
        let mut a = EnvSpec::multi_room().build().unwrap();
        let mut b = EnvSpec::multi_room().build().unwrap();
        assert_eq!(a.reset(17).unwrap(), b.reset(17).unwrap());
        assert_eq!(a.render_ascii(), b.render_ascii());
        let mut c = EnvSpec::dist_shift().build().unwrap();
        let first = c.reset(3).unwrap();
        let layout = c.render_ascii();
        assert_eq!(c.reset(3).unwrap(), first);
        assert_eq!(c.render_ascii(), layout);
    }

    #[test]
    fn forward_into_wall_is_a_no_op() {
        let mut env = EnvSpec::empty_room(3).build().unwrap();
        env.reset(0).unwrap();
        // Face north, into the top wall.
        env.step(Action::TurnLeft).unwrap();
        let before = env.agent_pos();
        let r = env.step(Action::Forward).unwrap();
        assert_eq!(env.agent_pos(), before);
        assert_eq!(r.reward, 0.0);
        assert!(!r.done);
    }

    #[test]
    fn scripted_shortest_path_reaches_goal() {
        let mut env = EnvSpec::dist_shift().build().unwrap();
        env.reset(11).unwrap();
        let plan = env.plan_to_goal().unwrap();
        let mut last = None;
        for a in plan {
            last = Some(env.step(a).unwrap());
        }
        let last = last.unwrap();
        assert_eq!(last.info, Termination::Goal);
        assert!(last.reward > 0.0);
    }

    #[test]
    fn turning_until_timeout() {
        let mut env = EnvSpec::dist_shift().build().unwrap();
        env.reset(1).unwrap();
        let mut total = 0.0;
        let mut last = None;
        for _ in 0..env.max_steps() {
            let r = env.step(Action::TurnLeft).unwrap();
            total += r.reward;
            last = Some(r);
        }
        let last = last.unwrap();
        assert!(last.done);
        assert_eq!(last.info, Termination::Timeout);
        assert_eq!(total, 0.0);
        assert!(matches!(env.step(Action::Forward), Err(Error::Contract(_))));
    }

    #[test]
    fn lava_terminates_without_reward() {
        let mut env = EnvSpec::dist_shift().build().unwrap();
        env.reset(0).unwrap();
        // Start (1,1) facing east; (3,1) is lava.
        env.step(Action::Forward).unwrap();
        let r = env.step(Action::Forward).unwrap();
        assert_eq!(r.info, Termination::Lava);
        assert!(r.done);
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn empty_room_render() {
        let env = EnvSpec::empty_room(3).build().unwrap();
        let text = env.render_ascii();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.chars().count() == 5));
        assert_eq!(rows[0], "#####");
        assert_eq!(rows[4], "#####");
        assert_eq!(rows[1], "#>..#");
        assert_eq!(rows[3], "#..G#");
    }

    #[test]
    fn legend_shows_goal_and_lava() {
        let env = EnvSpec::dist_shift().build().unwrap();
        let text = env.render_ascii();
        assert!(text.contains('G'));
        assert!(text.contains('~'));
    }

    #[test]
    fn render_diff_is_only_the_agent_cells() {
        let mut env = EnvSpec::empty_room(4).build().unwrap();
        env.reset(0).unwrap();
        let before: Vec<char> = env.render_ascii().chars().collect();
        let from = env.agent_pos();
        env.step(Action::Forward).unwrap();
        let to = env.agent_pos();
        let after: Vec<char> = env.render_ascii().chars().collect();
        let stride = env.width() + 1;
        let changed: Vec<usize> = (0..before.len()).filter(|&i| before[i] != after[i]).collect();
        let expect = vec![from.1 * stride + from.0, to.1 * stride + to.0];
        assert_eq!(changed, expect);
    }

    #[test]
    fn observation_layout() {
        let env = EnvSpec::dist_shift().build().unwrap();
        let obs = env.observation();
        assert_eq!(obs.len(), 5 * 5 * 5 + 4);
        assert!(obs.iter().all(|&v| v == 0.0 || v == 1.0));
        // Exactly one category per cell plus one heading bit.
        assert_eq!(obs.iter().sum::<f64>(), 26.0);
        // Agent cell (bottom-center) is empty; heading east.
        assert_eq!(obs[(4 * 5 + 2) * CELL_CATEGORIES], 1.0);
        assert_eq!(obs[125], 1.0);
        // Directly ahead two cells is the first lava strip.
        assert_eq!(obs[(2 * 5 + 2) * CELL_CATEGORIES + 2], 1.0);
        // Left of the agent (north) is the outer wall.
        assert_eq!(obs[(4 * 5 + 1) * CELL_CATEGORIES + 1], 1.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = EnvSpec::dist_shift();
        s.view_size = 4;
        assert!(matches!(s.build(), Err(Error::Config(_))));
        let mut s = EnvSpec::multi_room();
        s.room_min = 3;
        assert!(matches!(s.build(), Err(Error::Config(_))));
    }
}
