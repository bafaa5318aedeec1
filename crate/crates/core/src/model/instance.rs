use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer time unit used for processing times, start times and makespans.
pub type Time = u32;

/// An operation handle: the `step`-th operation in the route of `job`.
///
/// Ordering is lexicographic on `(job, step)`, which is the canonical
/// tie-break order used throughout the crate.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct OpId {
    pub job: usize,
    pub step: usize,
}

impl OpId {
    pub const fn new(job: usize, step: usize) -> Self {
        Self { job, step }
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "J{}.{}", self.job, self.step)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operation {
    pub machine: usize,
    pub duration: Time,
}

/// An immutable job-shop problem statement.
///
/// Operations also have a dense global index (`job` offsets followed by
/// `step`), which the evaluation and search code uses for flat arrays.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    id: String,
    n_machines: usize,
    routes: Vec<Vec<Operation>>,
    offsets: Vec<usize>,
    machine_ops: Vec<Vec<OpId>>,
}

impl Instance {
    pub fn new(id: impl Into<String>, n_machines: usize, routes: Vec<Vec<Operation>>) -> Result<Self> {
        if routes.is_empty() {
            return Err(Error::InvalidInstance("no jobs".into()));
        }
        if n_machines == 0 {
            return Err(Error::InvalidInstance("no machines".into()));
        }
        let mut machine_ops = vec![Vec::new(); n_machines];
        let mut offsets = Vec::with_capacity(routes.len() + 1);
        let mut total = 0;
        for (job, route) in routes.iter().enumerate() {
            if route.is_empty() {
                return Err(Error::InvalidInstance(format!("job {job} has an empty route")));
            }
            let mut seen = vec![false; n_machines];
            for (step, op) in route.iter().enumerate() {
                if op.machine >= n_machines {
                    return Err(Error::InvalidInstance(format!(
                        "job {job} step {step} uses machine {} outside [0, {n_machines})",
                        op.machine
                    )));
                }
                if op.duration == 0 {
                    return Err(Error::InvalidInstance(format!(
                        "job {job} step {step} has zero processing time"
                    )));
                }
                if seen[op.machine] {
                    return Err(Error::DuplicateMachineInRoute { job, machine: op.machine });
                }
                seen[op.machine] = true;
                machine_ops[op.machine].push(OpId::new(job, step));
            }
            offsets.push(total);
            total += route.len();
        }
        offsets.push(total);
        Ok(Self { id: id.into(), n_machines, routes, offsets, machine_ops })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn n_jobs(&self) -> usize {
        self.routes.len()
    }

    pub fn n_machines(&self) -> usize {
        self.n_machines
    }

    pub fn n_ops(&self) -> usize {
        self.offsets[self.routes.len()]
    }

    pub fn routes(&self) -> &[Vec<Operation>] {
        &self.routes
    }

    pub fn route(&self, job: usize) -> &[Operation] {
        &self.routes[job]
    }

    pub fn op(&self, op: OpId) -> Operation {
        self.routes[op.job][op.step]
    }

    pub fn duration(&self, op: OpId) -> Time {
        self.routes[op.job][op.step].duration
    }

    pub fn machine_of(&self, op: OpId) -> usize {
        self.routes[op.job][op.step].machine
    }

    pub fn contains(&self, op: OpId) -> bool {
        op.job < self.routes.len() && op.step < self.routes[op.job].len()
    }

    /// Dense index of `op` in `0..n_ops()`.
    pub fn index(&self, op: OpId) -> usize {
        self.offsets[op.job] + op.step
    }

    pub fn op_at(&self, index: usize) -> OpId {
        let job = self.offsets.partition_point(|&o| o <= index) - 1;
        OpId::new(job, index - self.offsets[job])
    }

    /// Every operation in `(job, step)` order.
    pub fn ops(&self) -> impl Iterator<Item = OpId> + '_ {
        self.routes
            .iter()
            .enumerate()
            .flat_map(|(j, r)| (0..r.len()).map(move |s| OpId::new(j, s)))
    }

    /// Operations routed to `machine`, in `(job, step)` order.
    pub fn machine_ops(&self, machine: usize) -> &[OpId] {
        &self.machine_ops[machine]
    }

    pub fn job_load(&self, job: usize) -> Time {
        self.routes[job].iter().map(|o| o.duration).sum()
    }

    pub fn machine_load(&self, machine: usize) -> Time {
        self.machine_ops[machine].iter().map(|&o| self.duration(o)).sum()
    }

    /// max(longest job, busiest machine): a lower bound on any makespan.
    pub fn trivial_lower_bound(&self) -> Time {
        let jobs = (0..self.n_jobs()).map(|j| self.job_load(j)).max().unwrap_or(0);
        let machines = (0..self.n_machines).map(|m| self.machine_load(m)).max().unwrap_or(0);
        jobs.max(machines)
    }

    pub fn max_duration(&self) -> Time {
        self.routes.iter().flatten().map(|o| o.duration).max().unwrap_or(0)
    }

    /// Per-machine orders listing operations in `(job, step)` order. Not
    /// necessarily feasible.
    pub fn identity_perms(&self) -> Vec<Vec<OpId>> {
        self.machine_ops.clone()
    }

    /// Checks that `perm` is a permutation of the operations on `machine`.
    pub fn check_machine_perm(&self, machine: usize, perm: &[OpId]) -> Result<()> {
        if machine >= self.n_machines {
            return Err(Error::InvalidPermutation(format!("machine {machine} does not exist")));
        }
        let expected = &self.machine_ops[machine];
        if perm.len() != expected.len() {
            return Err(Error::InvalidPermutation(format!(
                "machine {machine}: expected {} operations, got {}",
                expected.len(),
                perm.len()
            )));
        }
        let mut sorted = perm.to_vec();
        sorted.sort_unstable();
        if sorted != *expected {
            return Err(Error::InvalidPermutation(format!(
                "machine {machine}: {perm:?} is not a permutation of {expected:?}"
            )));
        }
        Ok(())
    }

    pub fn check_perms(&self, perms: &[Vec<OpId>]) -> Result<()> {
        if perms.len() != self.n_machines {
            return Err(Error::InvalidPermutation(format!(
                "expected {} machine orders, got {}",
                self.n_machines,
                perms.len()
            )));
        }
        perms.iter().enumerate().try_for_each(|(m, p)| self.check_machine_perm(m, p))
    }
}
