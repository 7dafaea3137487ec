//! Joint-move conflict resolution.
//!
//! Resolution runs in rounds over a snapshot of the current joint move:
//! every mover that loses a contested cell to a higher-priority agent, targets
//! the cell of an agent that stays put, or takes part in a swap is turned into
//! a WAIT. Rounds repeat until nothing changes, so denials cascade along chains.
//! A contested cell stays awarded to its winner for the round even if the
//! winner itself is revoked by another rule in the same round.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use crate::grid::{Action, Grid, Pos};

/// How simultaneous claims on one cell are decided.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TieBreak {
    /// The agent with the smallest id wins.
    #[default]
    LowestId,
    /// A fresh seeded priority order is drawn every timestep.
    SeededRandom,
}

/// Resolve with lowest-id-wins priority.
pub fn resolve_conflicts(grid: &Grid, positions: &[Pos], proposed: &[Action]) -> Vec<Action> {
    let order: Vec<usize> = (0..positions.len()).collect();
    resolve_conflicts_ordered(grid, positions, proposed, &order)
}

/// Resolve with an explicit priority order (`order[0]` has the highest priority).
///
/// `positions` must be pairwise distinct free cells; `order` a permutation of agent ids.
pub fn resolve_conflicts_ordered(grid: &Grid, positions: &[Pos], proposed: &[Action], order: &[usize]) -> Vec<Action> {
    let n = positions.len();
    assert_eq!(proposed.len(), n, "one proposed action per agent");
    assert_eq!(order.len(), n, "priority order must cover every agent");

    let current: Vec<usize> = positions.iter().map(|&p| grid.index(p)).collect();
    let mut executed = proposed.to_vec();
    let mut target = current.clone();
    for i in 0..n {
        match grid.apply(positions[i], proposed[i]) {
            Some(q) if grid.is_free(q) => target[i] = grid.index(q),
            _ => executed[i] = Action::Wait,
        }
    }

    let occupant: HashMap<usize, usize> = current.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut claimed: HashMap<usize, usize> = HashMap::with_capacity(n);
    let mut denied: Vec<usize> = Vec::new();

    loop {
        claimed.clear();
        denied.clear();

        for &i in order {
            if executed[i] == Action::Wait {
                continue;
            }
            match claimed.entry(target[i]) {
                Entry::Occupied(_) => denied.push(i),
                Entry::Vacant(slot) => {
                    slot.insert(i);
                }
            }
        }

        for i in 0..n {
            if executed[i] == Action::Wait {
                continue;
            }
            if let Some(&j) = occupant.get(&target[i]) {
                let j_stays = executed[j] == Action::Wait;
                let swap = !j_stays && target[j] == current[i];
                if j_stays || swap {
                    denied.push(i);
                }
            }
        }

        if denied.is_empty() {
            break;
        }
        for &i in &denied {
            executed[i] = Action::Wait;
            target[i] = current[i];
        }
    }
    executed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(w: usize, h: usize) -> Grid {
        Grid::open(w, h).unwrap()
    }

    #[test]
    fn contested_cell_goes_to_lowest_id() {
        let g = open(3, 1);
        let pos = [Pos::new(0, 0), Pos::new(0, 2)];
        let out = resolve_conflicts(&g, &pos, &[Action::Right, Action::Left]);
        assert_eq!(out, vec![Action::Right, Action::Wait]);
        let out = resolve_conflicts_ordered(&g, &pos, &[Action::Right, Action::Left], &[1, 0]);
        assert_eq!(out, vec![Action::Wait, Action::Left]);
    }

    #[test]
    fn swap_is_denied() {
        let g = open(2, 1);
        let pos = [Pos::new(0, 0), Pos::new(0, 1)];
        let out = resolve_conflicts(&g, &pos, &[Action::Right, Action::Left]);
        assert_eq!(out, vec![Action::Wait, Action::Wait]);
    }

    #[test]
    fn denial_cascades_along_chain() {
        // a b c @   each pushes right, c hits the obstacle
        let g = Grid::new(4, 1, vec![false, false, false, true]).unwrap();
        let pos = [Pos::new(0, 0), Pos::new(0, 1), Pos::new(0, 2)];
        let out = resolve_conflicts(&g, &pos, &[Action::Right; 3]);
        assert_eq!(out, vec![Action::Wait; 3]);
    }

    #[test]
    fn following_into_vacated_cell_is_allowed() {
        let g = open(4, 1);
        let pos = [Pos::new(0, 0), Pos::new(0, 1), Pos::new(0, 2)];
        let out = resolve_conflicts(&g, &pos, &[Action::Right; 3]);
        assert_eq!(out, vec![Action::Right; 3]);
    }

    #[test]
    fn rotation_cycle_moves() {
        // 2x2 block rotating clockwise has no vertex or edge conflict
        let g = open(2, 2);
        let pos = [Pos::new(0, 0), Pos::new(0, 1), Pos::new(1, 1), Pos::new(1, 0)];
        let acts = [Action::Right, Action::Down, Action::Left, Action::Up];
        assert_eq!(resolve_conflicts(&g, &pos, &acts), acts.to_vec());
    }

    #[test]
    fn loser_stays_denied_when_winner_is_revoked() {
        // 0 and 1 both claim c = (1,2), 0 wins; 0 and 2 (sitting on c) try to swap.
        let g = open(4, 2);
        let pos = [Pos::new(1, 1), Pos::new(0, 2), Pos::new(1, 2)];
        let acts = [Action::Right, Action::Down, Action::Left];
        assert_eq!(resolve_conflicts(&g, &pos, &acts), vec![Action::Wait; 3]);
    }

    #[test]
    fn off_grid_and_obstacle_moves_become_wait() {
        let g = Grid::new(2, 1, vec![false, true]).unwrap();
        let out = resolve_conflicts(&g, &[Pos::new(0, 0)], &[Action::Up]);
        assert_eq!(out, vec![Action::Wait]);
        let out = resolve_conflicts(&g, &[Pos::new(0, 0)], &[Action::Right]);
        assert_eq!(out, vec![Action::Wait]);
    }
}
