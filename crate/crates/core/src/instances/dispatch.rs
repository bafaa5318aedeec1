use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{evaluate_unchecked, Instance, OpId, Solution, Time};

/// Priority dispatching rule used to build non-delay schedules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// Shortest processing time first; ties go to the lowest job index.
    Spt,
    /// Most work remaining in the job (own operation included) first; ties
    /// go to the lowest job index.
    Mwkr,
    /// A fresh uniform key per candidate at every decision.
    RandomUniform(u64),
}

/// Builds a non-delay schedule: at each decision, among the ready operations
/// that can start at the earliest possible time, schedule the one with the
/// smallest priority key.
pub fn dispatch(inst: &Instance, rule: Rule) -> Solution {
    dispatch_with_chain(inst, rule, None)
}

/// Like [`dispatch`], but operations on `chain.0` must be processed in the
/// order `chain.1`.
pub fn dispatch_with_chain(inst: &Instance, rule: Rule, chain: Option<(usize, &[OpId])>) -> Solution {
    let mut rng = match rule {
        Rule::RandomUniform(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        Rule::Spt | Rule::Mwkr => None,
    };
    let mut next_step = vec![0usize; inst.n_jobs()];
    let mut job_ready = vec![0 as Time; inst.n_jobs()];
    let mut machine_ready = vec![0 as Time; inst.n_machines()];
    let mut chain_pos = 0usize;
    let mut perms: Vec<Vec<OpId>> = vec![Vec::new(); inst.n_machines()];
    let mut candidates: Vec<(OpId, Time)> = Vec::with_capacity(inst.n_jobs());

    for _ in 0..inst.n_ops() {
        candidates.clear();
        for job in 0..inst.n_jobs() {
            if next_step[job] == inst.route(job).len() {
                continue;
            }
            let op = OpId::new(job, next_step[job]);
            let m = inst.machine_of(op);
            if let Some((cm, order)) = chain {
                if m == cm && order[chain_pos] != op {
                    continue;
                }
            }
            candidates.push((op, job_ready[job].max(machine_ready[m])));
        }
        let earliest = candidates.iter().map(|&(_, s)| s).min().expect("some operation is always ready");
        candidates.retain(|&(_, s)| s == earliest);

        let remaining = |op: OpId| -> Time { inst.route(op.job)[op.step..].iter().map(|o| o.duration).sum() };
        let chosen = match (rule, rng.as_mut()) {
            (Rule::Mwkr, _) => {
                candidates.iter().min_by_key(|&&(op, _)| (std::cmp::Reverse(remaining(op)), op.job)).unwrap().0
            }
            (_, None) => candidates.iter().min_by_key(|&&(op, _)| (inst.duration(op), op.job)).unwrap().0,
            (_, Some(rng)) => {
                let keyed: Vec<(f64, OpId)> = candidates.iter().map(|&(op, _)| (rng.gen::<f64>(), op)).collect();
                keyed.iter().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap().1
            }
        };
        let m = inst.machine_of(chosen);
        let end = earliest + inst.duration(chosen);
        job_ready[chosen.job] = end;
        machine_ready[m] = end;
        next_step[chosen.job] += 1;
        perms[m].push(chosen);
        if matches!(chain, Some((cm, _)) if cm == m) {
            chain_pos += 1;
        }
    }
    evaluate_unchecked(inst, perms).expect("dispatch builds acyclic orientations")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, GenSpec};
    use crate::model::{evaluate, fixtures};

    #[test]
    fn one_job_gives_sum_of_times() {
        let inst = fixtures::single_job(&[3, 8, 1]);
        assert_eq!(dispatch(&inst, Rule::Spt).makespan(), 12);
        assert_eq!(dispatch(&inst, Rule::RandomUniform(5)).makespan(), 12);
    }

    #[test]
    fn random_rule_is_deterministic_and_feasible() {
        let inst = generate(&GenSpec::new(6, 5, 1, 99, 11)).unwrap();
        let a = dispatch(&inst, Rule::RandomUniform(3));
        let b = dispatch(&inst, Rule::RandomUniform(3));
        assert_eq!(a, b);
        assert_eq!(evaluate(&inst, a.perms()).unwrap().makespan(), a.makespan());
        let spt = dispatch(&inst, Rule::Spt);
        assert_eq!(evaluate(&inst, spt.perms()).unwrap(), spt);
    }

    #[test]
    fn spt_on_two_by_two() {
        // Both jobs start at 0 on different machines; J0 then waits for M1.
        let sol = dispatch(&fixtures::two_by_two(), Rule::Spt);
        assert_eq!(sol.makespan(), 7);
    }

    #[test]
    fn chain_is_respected() {
        let inst = generate(&GenSpec::new(5, 4, 1, 20, 2)).unwrap();
        let mut order = inst.machine_ops(1).to_vec();
        order.reverse();
        let sol = dispatch_with_chain(&inst, Rule::Spt, Some((1, &order)));
        assert_eq!(sol.perm(1), &order[..]);
    }

    #[test]
    fn mwkr_prefers_the_longer_job() {
        // Both jobs want machine 0 at time 0; job 1 has more work left.
        let inst = fixtures::from_rows(&[&[(0, 2), (1, 1)], &[(0, 2), (1, 9)]]);
        let sol = dispatch(&inst, Rule::Mwkr);
        assert_eq!(sol.perm(0)[0].job, 1);
        assert_eq!(sol.makespan(), 12);
        assert_eq!(dispatch(&inst, Rule::Spt).makespan(), 13);
    }
}
