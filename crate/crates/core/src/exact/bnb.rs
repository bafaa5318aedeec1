use std::collections::VecDeque;
use std::time::Instant;

use crate::instances::{dispatch_with_chain, Rule};
use crate::model::{evaluate, evaluate_unchecked, Instance, OpId, Time};

use super::{ExactConfig, ExactResult, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stop {
    Target,
    Nodes,
    Time,
}

/// Random dispatches tried for the starting incumbent.
const SEED_DISPATCHES: u64 = 16;

struct Search<'a> {
    inst: &'a Instance,
    dur: Vec<Time>,
    /// Longest path after each operation along jobs and the fixed order.
    tail: Vec<Time>,
    /// Operations in a topological order of jobs plus the fixed order.
    topo: Vec<usize>,
    chain_prev: Vec<Option<usize>>,
    chain_machine: usize,
    chain: &'a [OpId],
    chain_pos: usize,
    next_step: Vec<usize>,
    job_ready: Vec<Time>,
    machine_ready: Vec<Time>,
    seq: Vec<Vec<OpId>>,
    scheduled: usize,
    best: Time,
    best_perms: Vec<Vec<OpId>>,
    target: Time,
    nodes: u64,
    node_limit: u64,
    started: Instant,
    cfg_time: std::time::Duration,
    stop: Option<Stop>,
    head: Vec<Time>,
    scratch: Vec<(Time, Time, Time)>,
}

impl<'a> Search<'a> {
    fn new(inst: &'a Instance, chain: Option<(usize, &'a [OpId])>, cfg: &ExactConfig, started: Instant) -> Self {
        let n = inst.n_ops();
        let dur: Vec<Time> = inst.ops().map(|o| inst.duration(o)).collect();
        let (chain_machine, chain) = chain.unwrap_or((usize::MAX, &[]));
        let mut chain_prev = vec![None; n];
        let mut chain_next = vec![None; n];
        for w in chain.windows(2) {
            let (a, b) = (inst.index(w[0]), inst.index(w[1]));
            chain_prev[b] = Some(a);
            chain_next[a] = Some(b);
        }
        let job_next = |i: usize| {
            let op = inst.op_at(i);
            (op.step + 1 < inst.route(op.job).len()).then_some(i + 1)
        };
        let mut indeg = vec![0; n];
        for i in 0..n {
            for k in [job_next(i), chain_next[i]].into_iter().flatten() {
                indeg[k] += 1;
            }
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            topo.push(i);
            for k in [job_next(i), chain_next[i]].into_iter().flatten() {
                indeg[k] -= 1;
                if indeg[k] == 0 {
                    queue.push_back(k);
                }
            }
        }
        debug_assert_eq!(topo.len(), n, "a single machine order cannot close a cycle");
        let mut tail = vec![0; n];
        for &i in topo.iter().rev() {
            tail[i] = [job_next(i), chain_next[i]]
                .into_iter()
                .flatten()
                .map(|k| dur[k] + tail[k])
                .max()
                .unwrap_or(0);
        }
        Self {
            inst,
            dur,
            tail,
            topo,
            chain_prev,
            chain_machine,
            chain,
            chain_pos: 0,
            next_step: vec![0; inst.n_jobs()],
            job_ready: vec![0; inst.n_jobs()],
            machine_ready: vec![0; inst.n_machines()],
            seq: vec![Vec::new(); inst.n_machines()],
            scheduled: 0,
            best: Time::MAX,
            best_perms: Vec::new(),
            target: 0,
            nodes: 0,
            node_limit: cfg.node_limit,
            started,
            cfg_time: cfg.time_limit,
            stop: None,
            head: vec![0; n],
            scratch: Vec::new(),
        }
    }

    fn is_ready(&self, op: OpId) -> bool {
        self.inst.machine_of(op) != self.chain_machine || self.chain[self.chain_pos] == op
    }

    /// Heads propagated along jobs and the fixed order, then a one-machine
    /// bound on every machine.
    fn lower_bound(&mut self) -> Time {
        let inst = self.inst;
        let mut lb = 0;
        for &i in &self.topo {
            let op = inst.op_at(i);
            if op.step < self.next_step[op.job] {
                continue;
            }
            let mut h = self.machine_ready[inst.machine_of(op)];
            h = h.max(if op.step == self.next_step[op.job] {
                self.job_ready[op.job]
            } else {
                let prev = i - 1;
                self.head[prev] + self.dur[prev]
            });
            if let Some(prev) = self.chain_prev[i] {
                let p = inst.op_at(prev);
                if p.step >= self.next_step[p.job] {
                    h = h.max(self.head[prev] + self.dur[prev]);
                }
            }
            self.head[i] = h;
            lb = lb.max(h + self.dur[i] + self.tail[i]);
        }
        for m in 0..inst.n_machines() {
            self.scratch.clear();
            let ops: &[OpId] = if m == self.chain_machine { &self.chain[self.chain_pos..] } else { inst.machine_ops(m) };
            for &op in ops {
                if op.step >= self.next_step[op.job] {
                    let i = inst.index(op);
                    self.scratch.push((self.head[i], self.dur[i], self.tail[i]));
                }
            }
            if m == self.chain_machine {
                // Already ordered: a single pass is exact for the chain.
                let mut t = self.machine_ready[m];
                for &(h, p, q) in &self.scratch {
                    t = t.max(h) + p;
                    lb = lb.max(t + q);
                }
            } else {
                lb = lb.max(two_sided(&mut self.scratch));
            }
        }
        lb
    }

    fn check_limits(&mut self) {
        if self.nodes >= self.node_limit {
            self.stop = Some(Stop::Nodes);
        } else if self.nodes.is_multiple_of(1024) && self.started.elapsed() >= self.cfg_time {
            self.stop = Some(Stop::Time);
        }
    }

    fn dfs(&mut self) {
        self.nodes += 1;
        self.check_limits();
        if self.stop.is_some() {
            return;
        }
        let inst = self.inst;
        if self.scheduled == inst.n_ops() {
            let ms = self.job_ready.iter().copied().max().unwrap_or(0);
            if ms < self.best {
                self.best = ms;
                self.best_perms.clone_from(&self.seq);
                if ms <= self.target {
                    self.stop = Some(Stop::Target);
                }
            }
            return;
        }
        if self.lower_bound() >= self.best {
            return;
        }

        // Earliest completion among ready operations fixes the machine to branch on.
        let mut best_ect = Time::MAX;
        let mut branch_machine = 0;
        for j in 0..inst.n_jobs() {
            let s = self.next_step[j];
            if s == inst.route(j).len() {
                continue;
            }
            let op = OpId::new(j, s);
            if !self.is_ready(op) {
                continue;
            }
            let m = inst.route(j)[s].machine;
            let ect = self.job_ready[j].max(self.machine_ready[m]) + inst.route(j)[s].duration;
            if ect < best_ect {
                best_ect = ect;
                branch_machine = m;
            }
        }
        let mut children = Vec::with_capacity(inst.n_jobs());
        for j in 0..inst.n_jobs() {
            let s = self.next_step[j];
            if s == inst.route(j).len() || inst.route(j)[s].machine != branch_machine {
                continue;
            }
            let op = OpId::new(j, s);
            if self.is_ready(op) && self.job_ready[j].max(self.machine_ready[branch_machine]) < best_ect {
                children.push(op);
            }
        }

        // Most remaining work first finds good incumbents early.
        children.sort_by_key(|&op| {
            let i = inst.index(op);
            (std::cmp::Reverse(self.dur[i] + self.tail[i]), op)
        });
        for op in children {
            let m = branch_machine;
            let (old_job, old_machine) = (self.job_ready[op.job], self.machine_ready[m]);
            let end = old_job.max(old_machine) + inst.duration(op);
            self.job_ready[op.job] = end;
            self.machine_ready[m] = end;
            self.next_step[op.job] += 1;
            self.seq[m].push(op);
            self.scheduled += 1;
            let on_chain = m == self.chain_machine;
            if on_chain {
                self.chain_pos += 1;
            }

            self.dfs();

            if on_chain {
                self.chain_pos -= 1;
            }
            self.scheduled -= 1;
            self.seq[m].pop();
            self.next_step[op.job] -= 1;
            self.machine_ready[m] = old_machine;
            self.job_ready[op.job] = old_job;
            if self.stop.is_some() {
                return;
            }
        }
    }
}

pub(super) fn root_lower_bound(inst: &Instance) -> Time {
    Search::new(inst, None, &ExactConfig::default(), Instant::now()).lower_bound()
}

pub(super) fn solve(inst: &Instance, chain: Option<(usize, &[OpId])>, cfg: &ExactConfig) -> ExactResult {
    let started = Instant::now();
    let mut search = Search::new(inst, chain, cfg, started);

    let seed = [Rule::Spt, Rule::Mwkr]
        .into_iter()
        .chain((0..SEED_DISPATCHES).map(Rule::RandomUniform))
        .map(|rule| dispatch_with_chain(inst, rule, chain))
        .min_by_key(|s| s.makespan())
        .expect("at least one seeding rule");
    search.best = seed.makespan();
    search.best_perms = seed.into_perms();
    if let Some(perms) = &cfg.incumbent {
        let respects_chain = chain.is_none_or(|(m, order)| perms.get(m).is_some_and(|p| p == order));
        if respects_chain {
            if let Ok(sol) = evaluate(inst, perms) {
                if sol.makespan() < search.best {
                    search.best = sol.makespan();
                    search.best_perms = sol.into_perms();
                }
            }
        }
    }

    let lower = search.lower_bound().max(cfg.known_lower_bound.unwrap_or(0));
    search.target = lower;
    if search.best > lower {
        search.dfs();
    }

    let status = match search.stop {
        None | Some(Stop::Target) => Status::Optimal,
        _ if search.best <= lower => Status::Optimal,
        Some(Stop::Nodes) => Status::Feasible { lower, upper: search.best },
        Some(Stop::Time) => Status::TimedOut { lower, upper: search.best },
    };
    let solution = evaluate_unchecked(inst, std::mem::take(&mut search.best_perms))
        .expect("branch-and-bound only records acyclic schedules");
    debug_assert_eq!(solution.makespan(), search.best);
    ExactResult {
        status,
        makespan: search.best,
        solution,
        nodes_explored: search.nodes,
        elapsed: started.elapsed(),
    }
}

/// Head + load + tail over the subsets that share a minimum head or a
/// minimum tail.
fn two_sided(v: &mut [(Time, Time, Time)]) -> Time {
    let mut lb = 0;
    v.sort_unstable_by_key(|&(h, _, _)| h);
    let (mut load, mut min_tail) = (0, Time::MAX);
    for &(h, p, t) in v.iter().rev() {
        load += p;
        min_tail = min_tail.min(t);
        lb = lb.max(h + load + min_tail);
    }
    v.sort_unstable_by_key(|&(_, _, t)| t);
    let (mut load, mut min_head) = (0, Time::MAX);
    for &(h, p, t) in v.iter().rev() {
        load += p;
        min_head = min_head.min(h);
        lb = lb.max(min_head + load + t);
    }
    lb
}
