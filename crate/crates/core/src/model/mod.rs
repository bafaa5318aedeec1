//! Problem representation: instances, the disjunctive graph, and evaluation
//! of machine permutations into timed schedules.

mod graph;
mod instance;
mod solution;

pub use graph::{build_disjunctive_graph, DisjGraph, Node};
pub use instance::{Instance, OpId, Operation, Time};
pub use solution::{critical_machine_arcs, evaluate, makespan_of, Solution};

pub(crate) use solution::evaluate_unchecked;

/// Small hand-built instances shared by tests, examples and bindings.
pub mod fixtures {
    use super::{Instance, OpId, Operation, Time};

    pub fn j(job: usize, step: usize) -> OpId {
        OpId::new(job, step)
    }

    /// Builds an instance from `(machine, duration)` rows, one row per job.
    pub fn from_rows(rows: &[&[(usize, Time)]]) -> Instance {
        let n_machines = rows.iter().flat_map(|r| r.iter().map(|&(m, _)| m + 1)).max().unwrap_or(1);
        let routes = rows
            .iter()
            .map(|r| r.iter().map(|&(machine, duration)| Operation { machine, duration }).collect())
            .collect();
        Instance::new("fixture", n_machines, routes).expect("fixture must be valid")
    }

    /// J0: (M0,3) -> (M1,2); J1: (M1,2) -> (M0,4). Optimal makespan 7.
    pub fn two_by_two() -> Instance {
        from_rows(&[&[(0, 3), (1, 2)], &[(1, 2), (0, 4)]]).with_id("tiny2x2")
    }

    /// One job visiting machines 0, 1, ... in order.
    pub fn single_job(durations: &[Time]) -> Instance {
        let row: Vec<(usize, Time)> = durations.iter().copied().enumerate().collect();
        from_rows(&[&row])
    }
}
