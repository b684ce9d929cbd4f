use rand::Rng;

use super::{Cell, EnvName, GridEnv, Pos};
use crate::error::{Error, Result};

/// Give up on a multi-room layout after this many failed attempts.
const MAX_ATTEMPTS: usize = 100;

/// Axis-aligned room including its walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Room {
    pub top: Pos,
    pub size: (usize, usize),
    /// Opening through which the room was entered (absent for the first).
    pub entry_door: Option<Pos>,
}

impl GridEnv {
    pub(super) fn generate(&mut self) -> Result<()> {
        match self.spec.name {
            EnvName::DistShift => self.generate_dist_shift(),
            EnvName::MultiRoom => self.generate_multi_room(),
            EnvName::EmptyRoom => self.generate_empty_room(),
        }
        .map(|()| self.done = false)
    }

    fn clear_with_border(&mut self) {
        let (w, h) = (self.spec.width, self.spec.height);
        for y in 0..h {
            for x in 0..w {
                let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
                self.set_cell((x, y), if border { Cell::Wall } else { Cell::Empty });
            }
        }
    }

    fn generate_empty_room(&mut self) -> Result<()> {
        self.clear_with_border();
        self.start = (1, 1);
        self.agent_dir = 0;
        self.goal = (self.spec.width - 2, self.spec.height - 2);
        self.set_cell(self.goal, Cell::Goal);
        self.lava_row = None;
        self.rooms.clear();
        Ok(())
    }

    /// Legal rows for the movable lava strip: every interior row below the
    /// fixed strip.
    pub fn lava_row_range(&self) -> std::ops::RangeInclusive<usize> {
        2..=self.spec.height - 2
    }

    fn generate_dist_shift(&mut self) -> Result<()> {
        self.clear_with_border();
        let w = self.spec.width;
        self.start = (1, 1);
        self.agent_dir = 0;
        self.goal = (w - 2, 1);
        self.set_cell(self.goal, Cell::Goal);
        let row = self.layout_rng.random_range(self.lava_row_range());
        for i in 0..w - 6 {
            self.set_cell((3 + i, 1), Cell::Lava);
            self.set_cell((3 + i, row), Cell::Lava);
        }
        self.lava_row = Some(row);
        self.rooms.clear();
        Ok(())
    }

    fn generate_multi_room(&mut self) -> Result<()> {
        let (w, h) = (self.spec.width, self.spec.height);
        for _ in 0..MAX_ATTEMPTS {
            let entry = (
                self.layout_rng.random_range(0..w - 2),
                self.layout_rng.random_range(0..h - 2),
            );
            let mut rooms = Vec::new();
            self.place_room(self.spec.rooms, &mut rooms, 2, entry);
            if rooms.len() < self.spec.rooms {
                continue;
            }
            self.carve_rooms(&rooms);
            self.rooms = rooms;
            self.lava_row = None;
            if self.shortest_path_len().is_some() {
                return Ok(());
            }
        }
        Err(Error::Generation(format!(
            "no connected {}-room layout after {MAX_ATTEMPTS} attempts",
            self.spec.rooms
        )))
    }

    /// Recursively chains rooms. `entry_wall` is the wall of the new room
    /// holding `entry`: 0 right, 1 bottom, 2 left, 3 top.
    fn place_room(&mut self, left: usize, rooms: &mut Vec<Room>, entry_wall: usize, entry: Pos) -> bool {
        let (w, h) = (self.spec.width as i64, self.spec.height as i64);
        let (lo, hi) = (self.spec.room_min, self.spec.room_max);
        let sx = self.layout_rng.random_range(lo..=hi) as i64;
        let sy = self.layout_rng.random_range(lo..=hi) as i64;
        let (ex, ey) = (entry.0 as i64, entry.1 as i64);
        let rng = &mut self.layout_rng;
        let (tx, ty) = if rooms.is_empty() {
            (ex, ey)
        } else {
            match entry_wall {
                0 => (ex - sx + 1, rng.random_range(ey - sy + 2..=ey)),
                1 => (rng.random_range(ex - sx + 2..=ex), ey - sy + 1),
                2 => (ex, rng.random_range(ey - sy + 2..=ey)),
                _ => (rng.random_range(ex - sx + 2..=ex), ey),
            }
        };
        if tx < 0 || ty < 0 || tx + sx > w || ty + sy > h {
            return false;
        }
        // Consecutive rooms share a wall; any other overlap is rejected.
        let others = rooms.len().saturating_sub(1);
        for r in &rooms[..others] {
            let (rx, ry) = (r.top.0 as i64, r.top.1 as i64);
            let (rw, rh) = (r.size.0 as i64, r.size.1 as i64);
            let apart = tx + sx <= rx || rx + rw <= tx || ty + sy <= ry || ry + rh <= ty;
            if !apart {
                return false;
            }
        }
        rooms.push(Room {
            top: (tx as usize, ty as usize),
            size: (sx as usize, sy as usize),
            entry_door: (!rooms.is_empty()).then_some(entry),
        });
        if left == 1 {
            return true;
        }
        for _ in 0..8 {
            let exit_wall = loop {
                let wall = self.layout_rng.random_range(0..4);
                if wall != entry_wall {
                    break wall;
                }
            };
            let rng = &mut self.layout_rng;
            let exit = match exit_wall {
                0 => (tx + sx - 1, ty + rng.random_range(1..sy - 1)),
                1 => (tx + rng.random_range(1..sx - 1), ty + sy - 1),
                2 => (tx, ty + rng.random_range(1..sy - 1)),
                _ => (tx + rng.random_range(1..sx - 1), ty),
            };
            let exit = (exit.0 as usize, exit.1 as usize);
            let placed = rooms.len();
            if self.place_room(left - 1, rooms, (exit_wall + 2) % 4, exit) {
                return true;
            }
            rooms.truncate(placed);
        }
        false
    }

    fn carve_rooms(&mut self, rooms: &[Room]) {
        let (w, h) = (self.spec.width, self.spec.height);
        for y in 0..h {
            for x in 0..w {
                self.set_cell((x, y), Cell::Wall);
            }
        }
        for r in rooms {
            for y in r.top.1 + 1..r.top.1 + r.size.1 - 1 {
                for x in r.top.0 + 1..r.top.0 + r.size.0 - 1 {
                    self.set_cell((x, y), Cell::Empty);
                }
            }
        }
        for r in rooms {
            if let Some(d) = r.entry_door {
                self.set_cell(d, Cell::Empty);
            }
        }
        let first = rooms[0];
        let last = rooms[rooms.len() - 1];
        self.start = self.random_interior(first);
        self.agent_dir = self.layout_rng.random_range(0..4);
        self.goal = loop {
            let g = self.random_interior(last);
            if g != self.start {
                break g;
            }
        };
        self.set_cell(self.goal, Cell::Goal);
    }

    fn random_interior(&mut self, r: Room) -> Pos {
        (
            self.layout_rng.random_range(r.top.0 + 1..r.top.0 + r.size.0 - 1),
            self.layout_rng.random_range(r.top.1 + 1..r.top.1 + r.size.1 - 1),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::super::EnvSpec;
    use super::*;

    #[test]
    fn dist_shift_only_moves_the_second_strip() {
        let mut env = EnvSpec::dist_shift().build().unwrap();
        let mut reference: Option<Vec<Cell>> = None;
        for seed in 0..50 {
            env.reset(seed).unwrap();
            let row = env.lava_row().unwrap();
            let mut cells = env.cells().to_vec();
            // Blank the movable strip and compare the rest.
            for x in 3..6 {
                assert_eq!(env.cell((x, row)), Cell::Lava);
                cells[row * env.width() + x] = Cell::Empty;
            }
            match &reference {
                None => reference = Some(cells),
                Some(r) => assert_eq!(r, &cells),
            }
            assert_eq!(env.agent_pos(), (1, 1));
            assert_eq!(env.goal(), (7, 1));
        }
    }

    #[test]
    fn multi_room_has_requested_rooms_in_bounds() {
        let spec = EnvSpec::multi_room();
        let mut env = spec.build().unwrap();
        for seed in 0..100 {
            env.reset(seed).unwrap();
            assert_eq!(env.rooms().len(), spec.rooms);
            for r in env.rooms() {
                assert!((spec.room_min..=spec.room_max).contains(&r.size.0));
                assert!(r.top.0 + r.size.0 <= spec.width);
                assert!(r.top.1 + r.size.1 <= spec.height);
            }
            assert_eq!(env.cell(env.agent_pos()), Cell::Empty);
        }
    }
}
