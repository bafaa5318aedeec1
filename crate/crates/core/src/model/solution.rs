use std::collections::VecDeque;

use crate::error::{Error, Result};

use super::{Instance, OpId, Time};

/// A feasible schedule: one permutation per machine and the earliest-start
/// timing it induces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    perms: Vec<Vec<OpId>>,
    /// Start times indexed `[job][step]`.
    starts: Vec<Vec<Time>>,
    makespan: Time,
    critical_path: Vec<OpId>,
    critical_arcs: Vec<(OpId, OpId)>,
}

impl Solution {
    pub fn perms(&self) -> &[Vec<OpId>] {
        &self.perms
    }

    pub fn into_perms(self) -> Vec<Vec<OpId>> {
        self.perms
    }

    pub fn perm(&self, machine: usize) -> &[OpId] {
        &self.perms[machine]
    }

    pub fn start_time(&self, op: OpId) -> Time {
        self.starts[op.job][op.step]
    }

    pub fn start_times(&self) -> &[Vec<Time>] {
        &self.starts
    }

    pub fn makespan(&self) -> Time {
        self.makespan
    }

    /// Operations on the canonical longest path, source side first.
    pub fn critical_path(&self) -> &[OpId] {
        &self.critical_path
    }

    /// Machine arcs `(v, w)` lying on the canonical critical path, in path
    /// order. Job arcs are excluded.
    pub fn critical_machine_arcs(&self) -> &[(OpId, OpId)] {
        &self.critical_arcs
    }
}

/// Free function form of [`Solution::critical_machine_arcs`].
pub fn critical_machine_arcs(sol: &Solution) -> Vec<(OpId, OpId)> {
    sol.critical_arcs.clone()
}

/// Orients the disjunctive graph with `perms` and computes the earliest-start
/// schedule by a topological longest-path pass.
///
/// Returns [`Error::Infeasible`] with a cycle witness when the orientation is
/// cyclic, and [`Error::InvalidPermutation`] when `perms` is not one
/// permutation per machine.
pub fn evaluate(inst: &Instance, perms: &[Vec<OpId>]) -> Result<Solution> {
    inst.check_perms(perms)?;
    evaluate_unchecked(inst, perms.to_vec())
}

pub(crate) fn evaluate_unchecked(inst: &Instance, perms: Vec<Vec<OpId>>) -> Result<Solution> {
    let n = inst.n_ops();
    const NONE: usize = usize::MAX;
    let mut mach_pred = vec![NONE; n];
    let mut mach_succ = vec![NONE; n];
    for perm in &perms {
        for w in perm.windows(2) {
            let (a, b) = (inst.index(w[0]), inst.index(w[1]));
            mach_pred[b] = a;
            mach_succ[a] = b;
        }
    }
    let job_pred = |i: usize, op: OpId| if op.step > 0 { i - 1 } else { NONE };
    let job_succ = |i: usize, op: OpId| if op.step + 1 < inst.route(op.job).len() { i + 1 } else { NONE };

    let ops: Vec<OpId> = inst.ops().collect();
    let mut indeg = vec![0u8; n];
    for (i, &op) in ops.iter().enumerate() {
        indeg[i] = u8::from(job_pred(i, op) != NONE) + u8::from(mach_pred[i] != NONE);
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut start = vec![0 as Time; n];
    let mut done = 0;
    while let Some(i) = queue.pop_front() {
        done += 1;
        let end = start[i] + inst.duration(ops[i]);
        for s in [job_succ(i, ops[i]), mach_succ[i]] {
            if s != NONE {
                start[s] = start[s].max(end);
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    queue.push_back(s);
                }
            }
        }
    }
    if done < n {
        return Err(Error::Infeasible(cycle_witness(&ops, &indeg, &mach_pred)));
    }

    let end = |i: usize| start[i] + inst.duration(ops[i]);
    let makespan = (0..n).map(end).max().unwrap_or(0);

    // Backtrack from the sink, preferring the smallest OpId among tight
    // predecessors.
    let mut path = Vec::new();
    let mut arcs = Vec::new();
    let mut cur = (0..n).find(|&i| end(i) == makespan);
    while let Some(i) = cur {
        path.push(ops[i]);
        let jp = job_pred(i, ops[i]);
        let mp = mach_pred[i];
        let tight = |p: usize| p != NONE && end(p) == start[i];
        let pick = match (tight(jp), tight(mp)) {
            (true, true) if ops[jp] < ops[mp] => Some((jp, false)),
            (true, true) => Some((mp, true)),
            (true, false) => Some((jp, false)),
            (false, true) => Some((mp, true)),
            (false, false) => None,
        };
        if let Some((p, true)) = pick {
            arcs.push((ops[p], ops[i]));
        }
        cur = pick.map(|(p, _)| p);
    }
    path.reverse();
    arcs.reverse();

    let starts = inst
        .routes()
        .iter()
        .enumerate()
        .map(|(j, r)| (0..r.len()).map(|s| start[inst.index(OpId::new(j, s))]).collect())
        .collect();
    Ok(Solution { perms, starts, makespan, critical_path: path, critical_arcs: arcs })
}

/// Walks backwards through unprocessed nodes until one repeats.
fn cycle_witness(ops: &[OpId], indeg: &[u8], mach_pred: &[usize]) -> Vec<OpId> {
    let remaining = |i: usize| indeg[i] > 0;
    let Some(mut cur) = (0..ops.len()).find(|&i| remaining(i)) else {
        return Vec::new();
    };
    let mut seen_at = vec![usize::MAX; ops.len()];
    let mut trail = Vec::new();
    while seen_at[cur] == usize::MAX {
        seen_at[cur] = trail.len();
        trail.push(cur);
        // An unprocessed node always has an unprocessed predecessor.
        let jp = if ops[cur].step > 0 { cur - 1 } else { usize::MAX };
        cur = if jp != usize::MAX && remaining(jp) { jp } else { mach_pred[cur] };
    }
    let mut cycle: Vec<OpId> = trail[seen_at[cur]..].iter().map(|&i| ops[i]).collect();
    cycle.reverse();
    cycle
}

/// Makespan of a feasible orientation, or `None` if it is cyclic. Skips the
/// structural check and critical-path extraction.
pub fn makespan_of(inst: &Instance, perms: &[Vec<OpId>]) -> Option<Time> {
    evaluate_unchecked(inst, perms.to_vec()).ok().map(|s| s.makespan)
}
