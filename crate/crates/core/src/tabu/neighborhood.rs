use serde::{Deserialize, Serialize};

use crate::model::{OpId, Solution};

/// Reversal of the machine arc `(v, w)`, where `v` sits at `pos` and `w` at
/// `pos + 1` in the permutation of `machine`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Move {
    pub machine: usize,
    pub pos: usize,
    pub v: OpId,
    pub w: OpId,
}

impl Move {
    /// The permutations after the reversal.
    pub fn apply(&self, perms: &[Vec<OpId>]) -> Vec<Vec<OpId>> {
        let mut out = perms.to_vec();
        debug_assert_eq!(out[self.machine][self.pos], self.v);
        out[self.machine].swap(self.pos, self.pos + 1);
        out
    }

    /// The machine permutation this move produces on its own machine.
    pub fn permuted(&self, perm: &[OpId]) -> Vec<OpId> {
        let mut out = perm.to_vec();
        out.swap(self.pos, self.pos + 1);
        out
    }
}

/// One move per machine arc on the solution's critical path, sorted by
/// `(machine, pos)`. Every such reversal keeps the orientation acyclic.
pub fn n1_neighborhood(sol: &Solution) -> Vec<Move> {
    let mut moves: Vec<Move> = sol
        .critical_machine_arcs()
        .iter()
        .map(|&(v, w)| {
            let (machine, pos) = locate(sol, v);
            debug_assert_eq!(sol.perm(machine)[pos + 1], w);
            Move { machine, pos, v, w }
        })
        .collect();
    moves.sort();
    moves
}

fn locate(sol: &Solution, op: OpId) -> (usize, usize) {
    sol.perms()
        .iter()
        .enumerate()
        .find_map(|(m, perm)| perm.iter().position(|&o| o == op).map(|p| (m, p)))
        .expect("critical operations belong to some machine")
}
