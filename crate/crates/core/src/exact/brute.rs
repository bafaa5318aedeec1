use crate::error::{Error, Result};
use crate::model::{makespan_of, Instance, OpId, Time};

pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BruteForce {
    /// `None` when no candidate is acyclic.
    pub makespan: Option<Time>,
    pub best_perms: Option<Vec<Vec<OpId>>>,
    pub candidates: u128,
    pub feasible: u128,
}

/// Minimum makespan over every combination of machine permutations, keeping
/// only acyclic orientations.
pub fn brute_force_optimal(inst: &Instance, cap: u128) -> Result<BruteForce> {
    enumerate(inst, None, cap)
}

/// Same as [`brute_force_optimal`] with `machine` pinned to `order`.
pub fn brute_force_with_fixed(inst: &Instance, machine: usize, order: &[OpId], cap: u128) -> Result<BruteForce> {
    inst.check_machine_perm(machine, order)?;
    enumerate(inst, Some((machine, order)), cap)
}

fn enumerate(inst: &Instance, fixed: Option<(usize, &[OpId])>, cap: u128) -> Result<BruteForce> {
    let choices: Vec<Vec<Vec<OpId>>> = (0..inst.n_machines())
        .map(|m| match fixed {
            Some((fm, order)) if fm == m => vec![order.to_vec()],
            _ => all_permutations(inst.machine_ops(m)),
        })
        .collect();
    let candidates = choices.iter().fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128));
    if candidates > cap {
        return Err(Error::TooLarge { candidates, cap });
    }

    let mut digits = vec![0usize; choices.len()];
    let mut perms: Vec<Vec<OpId>> = choices.iter().map(|c| c[0].clone()).collect();
    let mut best: Option<(Time, Vec<Vec<OpId>>)> = None;
    let mut feasible = 0u128;
    loop {
        if let Some(ms) = makespan_of(inst, &perms) {
            feasible += 1;
            if best.as_ref().is_none_or(|(b, _)| ms < *b) {
                best = Some((ms, perms.clone()));
            }
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == digits.len() {
                let (makespan, best_perms) = best.map_or((None, None), |(m, p)| (Some(m), Some(p)));
                return Ok(BruteForce { makespan, best_perms, candidates, feasible });
            }
            digits[k] += 1;
            if digits[k] < choices[k].len() {
                perms[k].clone_from(&choices[k][digits[k]]);
                break;
            }
            digits[k] = 0;
            perms[k].clone_from(&choices[k][0]);
            k += 1;
        }
    }
}

/// All permutations of `items` in lexicographic order.
pub(crate) fn all_permutations(items: &[OpId]) -> Vec<Vec<OpId>> {
    let mut cur = items.to_vec();
    cur.sort();
    let mut out = vec![cur.clone()];
    while next_permutation(&mut cur) {
        out.push(cur.clone());
    }
    out
}

fn next_permutation<T: Ord>(xs: &mut [T]) -> bool {
    if xs.len() < 2 {
        return false;
    }
    let mut i = xs.len() - 1;
    while i > 0 && xs[i - 1] >= xs[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut k = xs.len() - 1;
    while xs[k] <= xs[i - 1] {
        k -= 1;
    }
    xs.swap(i - 1, k);
    xs[i..].reverse();
    true
}
