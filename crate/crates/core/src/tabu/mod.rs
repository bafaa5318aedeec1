//! Tabu search over the N1 neighborhood, with an optional oracle filter.
//!
//! Without a scorer this is the plain search (sTS). With one, the
//! neighborhood is pruned to moves whose new machine permutation the oracle
//! rates no worse than the current one (oTS), during the first quarter of
//! the non-improving budget of every trajectory.

mod filter;
mod neighborhood;

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{dispatch, Rule};
use crate::model::{evaluate, makespan_of, Instance, OpId, Solution, Time};

pub use filter::{oracle_filter, FilterOutcome, OracleScorer, PermutationScorer};
pub use neighborhood::{n1_neighborhood, Move};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Iterations without a new best before a trajectory ends.
    pub max_nonimproving: usize,
    /// Capacity of the restart list and cap on resumptions.
    pub restarts: usize,
    pub tabu_tenure: usize,
    /// Seed of the random dispatching rule that builds the initial solution.
    pub seed: u64,
    /// Wall-clock cap for one search; `None` runs to completion.
    pub time_limit: Option<Duration>,
    /// Require a strictly higher oracle score to keep a move.
    pub strict_filter: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { max_nonimproving: 500, restarts: 1, tabu_tenure: 10, seed: 0, time_limit: None, strict_filter: false }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_nonimproving == 0 {
            return Err(Error::InvalidConfig("max_nonimproving must be at least 1".into()));
        }
        if self.tabu_tenure == 0 {
            return Err(Error::InvalidConfig("tabu tenure must be at least 1".into()));
        }
        Ok(())
    }

    /// Non-improving iterations during which the oracle filter is active.
    pub fn filter_window(&self) -> usize {
        self.max_nonimproving / 4
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub initial_makespan: Time,
    pub best_makespan: Time,
    #[serde(with = "crate::labeling::perm_lists")]
    pub best_perms: Vec<Vec<OpId>>,
    /// `best / reference - 1` when a reference optimum was supplied.
    pub gap: Option<f64>,
    pub iterations: usize,
    pub restarts_used: usize,
    pub oracle_calls: usize,
    /// Iterations where the filter dropped every move and was undone.
    pub filter_fallbacks: usize,
    /// Iterations where the filter was consulted.
    pub filter_iterations: usize,
    /// Iterations where the filter dropped at least one move.
    pub filter_reductions: usize,
    /// The search stopped on its time limit.
    pub timed_out: bool,
    pub elapsed_ms: f64,
}

impl SearchReport {
    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self { elapsed_ms: 0.0, ..self.clone() } == Self { elapsed_ms: 0.0, ..other.clone() }
    }
}

/// Optimality gap `c / opt - 1`.
pub fn optimality_gap(c: Time, opt: Time) -> f64 {
    c as f64 / opt as f64 - 1.0
}

/// A promising point: the solution at a new best and the first move taken
/// from it, which is skipped when the point is resumed.
struct Snapshot {
    solution: Solution,
    taken: Option<Move>,
}

/// Tabu search from a random dispatching schedule seeded by `cfg.seed`.
pub fn run(inst: &Instance, cfg: &SearchConfig, scorer: Option<&dyn PermutationScorer>, reference: Option<Time>) -> Result<SearchReport> {
    let init = dispatch(inst, Rule::RandomUniform(cfg.seed));
    search(inst, &init, cfg, scorer, reference)
}

/// Tabu search from `init`. Each iteration moves to the best non-tabu N1
/// neighbor (a tabu move is allowed when it beats the best makespan). After
/// `max_nonimproving` iterations without a new best, the search resumes from
/// the latest promising point with a cleared tabu list, at most
/// `cfg.restarts` times.
pub fn search(
    inst: &Instance,
    init: &Solution,
    cfg: &SearchConfig,
    scorer: Option<&dyn PermutationScorer>,
    reference: Option<Time>,
) -> Result<SearchReport> {
    cfg.validate()?;
    inst.check_perms(init.perms())?;
    if reference == Some(0) {
        return Err(Error::InvalidConfig("reference optimum must be positive".into()));
    }
    let start = Instant::now();
    let window = cfg.filter_window();
    let mut report = SearchReport {
        initial_makespan: init.makespan(),
        best_makespan: init.makespan(),
        best_perms: init.perms().to_vec(),
        gap: None,
        iterations: 0,
        restarts_used: 0,
        oracle_calls: 0,
        filter_fallbacks: 0,
        filter_iterations: 0,
        filter_reductions: 0,
        timed_out: false,
        elapsed_ms: 0.0,
    };

    let mut best = init.makespan();
    let mut current = init.clone();
    let mut tabu: VecDeque<(OpId, OpId)> = VecDeque::with_capacity(cfg.tabu_tenure);
    let mut restart_list: VecDeque<Snapshot> = VecDeque::new();
    let mut nonimproving = 0usize;
    // Move to skip on the first iteration after a resume.
    let mut skip: Option<Move> = None;
    // The newest snapshot still waits to record its first move.
    let mut pending = false;

    loop {
        let mut moves = n1_neighborhood(&current);
        if moves.is_empty() {
            // No critical machine arc: the critical path is one job, so this
            // is optimal.
            break;
        }
        if let Some(s) = skip.take() {
            if moves.len() > 1 {
                moves.retain(|m| *m != s);
            }
        }
        if let Some(scorer) = scorer {
            if nonimproving < window {
                let out = oracle_filter(&current, &moves, scorer, cfg.strict_filter);
                report.filter_iterations += 1;
                report.oracle_calls += out.calls;
                report.filter_reductions += usize::from(out.removed > 0);
                report.filter_fallbacks += usize::from(out.fell_back);
                moves = out.moves;
            }
        }

        let chosen = select(inst, &current, &moves, &tabu, best);
        if pending {
            if let Some(last) = restart_list.back_mut() {
                last.taken = Some(chosen);
            }
            pending = false;
        }
        current = evaluate(inst, &chosen.apply(current.perms()))?;
        if tabu.len() == cfg.tabu_tenure {
            tabu.pop_front();
        }
        tabu.push_back((chosen.w, chosen.v));
        report.iterations += 1;

        if current.makespan() < best {
            best = current.makespan();
            report.best_makespan = best;
            report.best_perms = current.perms().to_vec();
            nonimproving = 0;
            let capacity = cfg.restarts - report.restarts_used;
            if capacity > 0 {
                if restart_list.len() == capacity {
                    restart_list.pop_front();
                }
                restart_list.push_back(Snapshot { solution: current.clone(), taken: None });
                pending = true;
            }
        } else {
            nonimproving += 1;
        }

        if cfg.time_limit.is_some_and(|t| start.elapsed() >= t) {
            report.timed_out = true;
            break;
        }
        if nonimproving >= cfg.max_nonimproving {
            if report.restarts_used >= cfg.restarts {
                break;
            }
            let Some(snap) = restart_list.pop_back() else { break };
            report.restarts_used += 1;
            current = snap.solution;
            skip = snap.taken;
            tabu.clear();
            nonimproving = 0;
            pending = false;
            log::debug!("restart {} from makespan {}", report.restarts_used, current.makespan());
        }
    }

    report.gap = reference.map(|opt| optimality_gap(best, opt));
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// Best admissible move: minimum neighbor makespan among non-tabu moves and
/// tabu moves that beat `best`, ties to the smallest `(machine, pos)`. If
/// every move is tabu and none aspirates, the move with the oldest tabu entry.
fn select(inst: &Instance, current: &Solution, moves: &[Move], tabu: &VecDeque<(OpId, OpId)>, best: Time) -> Move {
    let mut choice: Option<(Time, Move)> = None;
    for &mv in moves {
        let c = makespan_of(inst, &mv.apply(current.perms())).expect("N1 neighbors are acyclic");
        let is_tabu = tabu.contains(&(mv.v, mv.w));
        if is_tabu && c >= best {
            continue;
        }
        if choice.is_none_or(|(bc, bm)| (c, mv) < (bc, bm)) {
            choice = Some((c, mv));
        }
    }
    if let Some((_, mv)) = choice {
        return mv;
    }
    *moves
        .iter()
        .min_by_key(|m| tabu.iter().position(|&a| a == (m.v, m.w)).unwrap_or(usize::MAX))
        .expect("neighborhood is not empty")
}
