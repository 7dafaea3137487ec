//! Static obstacle maps and the 5-action move model.

use std::collections::VecDeque;
use std::fmt;

/// A cell coordinate, row-major (row 0 is the top line of a map file).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    pub fn is_adjacent(self, other: Pos) -> bool {
        self.manhattan(other) == 1
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// One of the five primitive actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Action {
    Wait = 0,
    Up = 1,
    Down = 2,
    Left = 3,
    Right = 4,
}

impl Action {
    pub const COUNT: usize = 5;
    pub const ALL: [Action; 5] = [Action::Wait, Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    /// (row, col) displacement.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::Wait => (0, 0),
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }

    /// The action moving `from` onto `to`, if they are equal or 4-adjacent.
    pub fn between(from: Pos, to: Pos) -> Option<Action> {
        let dr = to.row as isize - from.row as isize;
        let dc = to.col as isize - from.col as isize;
        Self::ALL.into_iter().find(|a| a.delta() == (dr, dc))
    }

    pub fn to_char(self) -> char {
        match self {
            Action::Wait => 'W',
            Action::Up => 'U',
            Action::Down => 'D',
            Action::Left => 'L',
            Action::Right => 'R',
        }
    }

    pub fn from_char(c: char) -> Option<Action> {
        match c {
            'W' => Some(Action::Wait),
            'U' => Some(Action::Up),
            'D' => Some(Action::Down),
            'L' => Some(Action::Left),
            'R' => Some(Action::Right),
            _ => None,
        }
    }

    /// Mirror across the vertical axis (left <-> right).
    pub fn mirrored_horizontally(self) -> Action {
        match self {
            Action::Left => Action::Right,
            Action::Right => Action::Left,
            a => a,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GridError {
    #[error("grid dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("blocked mask has {got} entries, expected {expected}")]
    MaskSize { expected: usize, got: usize },
}

/// Static 4-connected obstacle map.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
}

impl Grid {
    pub fn new(width: usize, height: usize, blocked: Vec<bool>) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::EmptyDimensions { width, height });
        }
        if blocked.len() != width * height {
            return Err(GridError::MaskSize {
                expected: width * height,
                got: blocked.len(),
            });
        }
        Ok(Self { width, height, blocked })
    }

    /// Obstacle-free grid.
    pub fn open(width: usize, height: usize) -> Result<Self, GridError> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.blocked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
    }

    pub fn blocked_mask(&self) -> &[bool] {
        &self.blocked
    }

    #[inline]
    pub fn index(&self, p: Pos) -> usize {
        p.row * self.width + p.col
    }

    #[inline]
    pub fn pos(&self, idx: usize) -> Pos {
        Pos::new(idx / self.width, idx % self.width)
    }

    pub fn in_bounds(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    #[inline]
    pub fn is_free(&self, p: Pos) -> bool {
        p.row < self.height && p.col < self.width && !self.blocked[self.index(p)]
    }

    #[inline]
    pub fn is_free_index(&self, idx: usize) -> bool {
        !self.blocked[idx]
    }

    /// Target of `action` from `p` if it stays on the grid (obstacles not checked).
    pub fn apply(&self, p: Pos, action: Action) -> Option<Pos> {
        let (dr, dc) = action.delta();
        let r = p.row as isize + dr;
        let c = p.col as isize + dc;
        self.in_bounds(r, c).then(|| Pos::new(r as usize, c as usize))
    }

    /// Free 4-neighbours of a cell index, in Up, Down, Left, Right order.
    #[inline]
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let row = idx / self.width;
        let col = idx % self.width;
        let up = (row > 0).then(|| idx - self.width);
        let down = (row + 1 < self.height).then(|| idx + self.width);
        let left = (col > 0).then(|| idx - 1);
        let right = (col + 1 < self.width).then(|| idx + 1);
        [up, down, left, right]
            .into_iter()
            .flatten()
            .filter(move |&n| !self.blocked[n])
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Pos> + '_ {
        (0..self.len()).filter(|&i| !self.blocked[i]).map(|i| self.pos(i))
    }

    pub fn free_count(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }

    /// BFS hop distances from `from`; `u32::MAX` marks unreachable cells and obstacles.
    pub fn bfs_distances(&self, from: Pos) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.len()];
        let mut queue = VecDeque::new();
        self.bfs_into(self.index(from), &mut dist, &mut queue);
        dist
    }

    /// BFS into a caller-owned buffer. `dist` must be pre-filled with `u32::MAX`.
    pub(crate) fn bfs_into(&self, source: usize, dist: &mut [u32], queue: &mut VecDeque<usize>) {
        if self.blocked[source] {
            return;
        }
        queue.clear();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(cur) = queue.pop_front() {
            let d = dist[cur] + 1;
            for n in self.neighbors(cur) {
                if dist[n] == u32::MAX {
                    dist[n] = d;
                    queue.push_back(n);
                }
            }
        }
    }

    /// Connected-component label per cell (`usize::MAX` on obstacles), labels in row-major discovery order.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.len()];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.len() {
            if self.blocked[start] || label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            queue.push_back(start);
            while let Some(cur) = queue.pop_front() {
                for n in self.neighbors(cur) {
                    if label[n] == usize::MAX {
                        label[n] = next;
                        queue.push_back(n);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// True when all free cells form a single component (and at least one exists).
    pub fn is_connected(&self) -> bool {
        let labels = self.components();
        let mut seen = labels.iter().filter(|&&l| l != usize::MAX);
        match seen.next() {
            Some(&first) => seen.all(|&l| l == first),
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(Grid::open(0, 3), Err(GridError::EmptyDimensions { .. })));
        assert!(matches!(
            Grid::new(2, 2, vec![false; 3]),
            Err(GridError::MaskSize { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn neighbors_are_four_connected() {
        let g = Grid::open(3, 3).unwrap();
        let center = g.index(Pos::new(1, 1));
        let mut n: Vec<_> = g.neighbors(center).map(|i| g.pos(i)).collect();
        n.sort();
        assert_eq!(n, vec![Pos::new(0, 1), Pos::new(1, 0), Pos::new(1, 2), Pos::new(2, 1)]);
        assert_eq!(g.neighbors(0).count(), 2);
    }

    #[test]
    fn action_round_trip() {
        let p = Pos::new(2, 2);
        let g = Grid::open(5, 5).unwrap();
        for a in Action::ALL {
            let q = g.apply(p, a).unwrap();
            assert_eq!(Action::between(p, q), Some(a));
            assert_eq!(Action::from_char(a.to_char()), Some(a));
            assert_eq!(Action::from_index(a.index()), Some(a));
        }
        assert_eq!(g.apply(Pos::new(0, 0), Action::Up), None);
        assert_eq!(Action::between(p, Pos::new(4, 4)), None);
    }

    #[test]
    fn components_split_by_wall() {
        // . @ .
        let g = Grid::new(3, 1, vec![false, true, false]).unwrap();
        let c = g.components();
        assert_ne!(c[0], c[2]);
        assert_eq!(c[1], usize::MAX);
        assert!(!g.is_connected());
        assert_eq!(g.bfs_distances(Pos::new(0, 0))[2], u32::MAX);
    }
}
