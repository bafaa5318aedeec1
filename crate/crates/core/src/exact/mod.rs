//! Exact makespan minimization.
//!
//! [`solve_optimal`] and [`solve_with_fixed_permutation`] run a depth-first
//! branch-and-bound over active schedules: each node applies the
//! Giffler-Thompson step (find the ready operation with the earliest
//! completion, branch on every ready operation of that machine that could
//! start before it completes). Fixing a machine's order turns that order into
//! extra precedence arcs, so at most one operation of the fixed machine is
//! ever ready.
//!
//! [`brute_force_optimal`] enumerates every orientation and is the
//! independent oracle the solver is tested against.

mod bnb;
mod brute;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, OpId, Solution, Time};

pub(crate) use brute::all_permutations;
pub use brute::{brute_force_optimal, brute_force_with_fixed, BruteForce, DEFAULT_ENUMERATION_CAP};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactConfig {
    pub time_limit: Duration,
    pub node_limit: u64,
    /// Starting incumbent. Ignored if infeasible or if it breaks a fixed order.
    #[serde(default)]
    pub incumbent: Option<Vec<Vec<OpId>>>,
    /// A proven lower bound; the search stops as soon as it is matched.
    #[serde(default)]
    pub known_lower_bound: Option<Time>,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self { time_limit: Duration::from_secs(60), node_limit: 2_000_000_000, incumbent: None, known_lower_bound: None }
    }
}

impl ExactConfig {
    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = limit;
        self
    }

    pub fn with_node_limit(mut self, limit: u64) -> Self {
        self.node_limit = limit;
        self
    }

    pub fn with_known_lower_bound(mut self, lb: Time) -> Self {
        self.known_lower_bound = Some(lb);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.time_limit.is_zero() || self.node_limit == 0 {
            return Err(Error::InvalidConfig("exact solver limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    /// Node limit reached; the incumbent is within `[lower, upper]` bounds.
    Feasible { lower: Time, upper: Time },
    TimedOut { lower: Time, upper: Time },
    Infeasible,
}

impl Status {
    pub fn is_optimal(&self) -> bool {
        matches!(self, Status::Optimal)
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Status::Optimal => write!(f, "optimal"),
            Status::Feasible { lower, upper } => write!(f, "feasible [{lower}, {upper}]"),
            Status::TimedOut { lower, upper } => write!(f, "timed-out [{lower}, {upper}]"),
            Status::Infeasible => write!(f, "infeasible"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExactResult {
    pub status: Status,
    pub makespan: Time,
    pub solution: Solution,
    pub nodes_explored: u64,
    pub elapsed: Duration,
}

pub fn solve_optimal(inst: &Instance, cfg: &ExactConfig) -> Result<ExactResult> {
    cfg.validate()?;
    Ok(bnb::solve(inst, None, cfg))
}

/// Minimum makespan over schedules whose order on `machine` is exactly `order`.
pub fn solve_with_fixed_permutation(
    inst: &Instance,
    machine: usize,
    order: &[OpId],
    cfg: &ExactConfig,
) -> Result<ExactResult> {
    cfg.validate()?;
    inst.check_machine_perm(machine, order)?;
    let result = bnb::solve(inst, Some((machine, order)), cfg);
    // A single machine order never closes a cycle with the job chains.
    debug_assert_ne!(result.status, Status::Infeasible);
    Ok(result)
}

/// Root lower bound of the unconstrained problem.
pub fn root_lower_bound(inst: &Instance) -> Time {
    bnb::root_lower_bound(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, GenSpec};
    use crate::model::fixtures::{self, j};

    #[test]
    fn two_by_two_optimum() {
        let r = solve_optimal(&fixtures::two_by_two(), &ExactConfig::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert_eq!(r.makespan, 7);
        assert_eq!(r.solution.makespan(), 7);
    }

    #[test]
    fn two_by_two_fixed_orders() {
        let inst = fixtures::two_by_two();
        let cfg = ExactConfig::default();
        let bad = solve_with_fixed_permutation(&inst, 0, &[j(1, 1), j(0, 0)], &cfg).unwrap();
        assert_eq!((bad.status, bad.makespan), (Status::Optimal, 11));
        assert_eq!(bad.solution.perm(0), &[j(1, 1), j(0, 0)]);
        let good = solve_with_fixed_permutation(&inst, 0, &[j(0, 0), j(1, 1)], &cfg).unwrap();
        assert_eq!(good.makespan, 7);
    }

    #[test]
    fn fixed_order_must_be_a_permutation() {
        let inst = fixtures::two_by_two();
        let err = solve_with_fixed_permutation(&inst, 0, &[j(0, 0)], &ExactConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidPermutation(_)));
    }

    #[test]
    fn limits_must_be_positive() {
        let cfg = ExactConfig::default().with_node_limit(0);
        assert!(solve_optimal(&fixtures::two_by_two(), &cfg).is_err());
    }

    #[test]
    fn node_limit_reports_bounds() {
        let inst = generate(&GenSpec::new(8, 8, 1, 99, 5)).unwrap();
        let r = solve_optimal(&inst, &ExactConfig::default().with_node_limit(10)).unwrap();
        match r.status {
            Status::Feasible { lower, upper } => {
                assert!(lower <= upper);
                assert_eq!(upper, r.makespan);
                assert_eq!(r.solution.makespan(), r.makespan);
            }
            // Possible only if the incumbent already meets the root bound.
            Status::Optimal => assert_eq!(r.makespan, root_lower_bound(&inst)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn root_bound_dominates_trivial_bound() {
        for seed in 0..20 {
            let inst = generate(&GenSpec::new(4, 4, 1, 30, seed)).unwrap();
            let lb = root_lower_bound(&inst);
            let opt = solve_optimal(&inst, &ExactConfig::default()).unwrap().makespan;
            assert!(inst.trivial_lower_bound() <= lb && lb <= opt, "seed {seed}");
        }
    }

    #[test]
    fn matches_brute_force_on_small_instances() {
        for seed in 0..15 {
            let inst = generate(&GenSpec::new(3, 3, 1, 20, seed)).unwrap();
            let exact = solve_optimal(&inst, &ExactConfig::default()).unwrap();
            let brute = brute_force_optimal(&inst, DEFAULT_ENUMERATION_CAP).unwrap();
            assert_eq!(Some(exact.makespan), brute.makespan, "seed {seed}");
        }
    }

    #[test]
    fn fixed_order_matches_brute_force() {
        for seed in 0..8 {
            let inst = generate(&GenSpec::new(4, 3, 1, 20, 100 + seed)).unwrap();
            for m in 0..3 {
                let mut order = inst.machine_ops(m).to_vec();
                let k = seed as usize % order.len();
                order.rotate_left(k);
                let exact = solve_with_fixed_permutation(&inst, m, &order, &ExactConfig::default()).unwrap();
                let brute = brute_force_with_fixed(&inst, m, &order, DEFAULT_ENUMERATION_CAP).unwrap();
                assert_eq!(Some(exact.makespan), brute.makespan, "seed {seed} machine {m}");
            }
        }
    }
}
