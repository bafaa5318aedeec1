use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::OpId;

/// Rounds without a single new sequence before the generator gives up on
/// sampling and completes the set from the unused permutations.
const STALL_ROUNDS: usize = 10_000;

pub(crate) fn factorial(n: usize) -> u128 {
    (1..=n as u128).try_fold(1u128, |acc, k| acc.checked_mul(k)).unwrap_or(u128::MAX)
}

/// One pass of the positional round-robin: each sequence takes the next
/// unused operation from a pool that grows by one copy of `base` and is
/// reshuffled after every position. May return duplicates.
pub fn generate_round<R: Rng>(base: &[OpId], s: usize, rng: &mut R) -> Vec<Vec<OpId>> {
    let mut seqs: Vec<Vec<OpId>> = vec![Vec::with_capacity(base.len()); s];
    let mut w = base.to_vec();
    for _ in 0..base.len() {
        let mut idx = 0;
        for seq in seqs.iter_mut() {
            while seq.contains(&w[idx]) {
                idx = (idx + 1) % w.len();
            }
            seq.push(w[idx]);
            idx = (idx + 1) % w.len();
        }
        w.extend_from_slice(base);
        w.shuffle(rng);
    }
    seqs
}

/// `s` distinct permutations of `base`, none of them in `exclude`.
///
/// Rounds are repeated for the missing count until enough distinct
/// sequences exist. Fails with `CapExceeded` if fewer than `s` permutations
/// are available at all.
pub fn sequence_generator<R: Rng>(
    base: &[OpId],
    s: usize,
    rng: &mut R,
    exclude: &[Vec<OpId>],
) -> Result<Vec<Vec<OpId>>> {
    let mut sorted = base.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidPermutation(format!("{base:?} repeats an operation")));
    }
    let excluded: HashSet<&[OpId]> = exclude
        .iter()
        .filter(|e| is_permutation_of(e, &sorted))
        .map(Vec::as_slice)
        .collect();
    let available = factorial(base.len()).saturating_sub(excluded.len() as u128);
    if s as u128 > available {
        return Err(Error::CapExceeded { requested: s as u128, available });
    }

    let mut out: Vec<Vec<OpId>> = Vec::with_capacity(s);
    let mut seen: HashSet<Vec<OpId>> = HashSet::with_capacity(s);
    let mut stalled = 0;
    while out.len() < s {
        let before = out.len();
        for seq in generate_round(base, s - out.len(), rng) {
            if !excluded.contains(seq.as_slice()) && seen.insert(seq.clone()) {
                out.push(seq);
            }
        }
        stalled = if out.len() == before { stalled + 1 } else { 0 };
        if stalled == STALL_ROUNDS {
            log::warn!("sequence generator stalled at {}/{s}, completing from unused permutations", out.len());
            let mut rest: Vec<Vec<OpId>> = crate::exact::all_permutations(base)
                .into_iter()
                .filter(|p| !excluded.contains(p.as_slice()) && !seen.contains(p))
                .collect();
            rest.shuffle(rng);
            out.extend(rest.into_iter().take(s - out.len()));
        }
    }
    Ok(out)
}

/// The `n - 1` adjacent transpositions of `perm`, in position order.
pub fn suboptimal_sequences(perm: &[OpId]) -> Vec<Vec<OpId>> {
    (0..perm.len().saturating_sub(1))
        .map(|h| {
            let mut p = perm.to_vec();
            p.swap(h, h + 1);
            p
        })
        .collect()
}

fn is_permutation_of(candidate: &[OpId], sorted: &[OpId]) -> bool {
    let mut c = candidate.to_vec();
    c.sort_unstable();
    c == sorted
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::j;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base(n: usize) -> Vec<OpId> {
        (0..n).map(|k| j(k, k % 3)).collect()
    }

    #[test]
    fn eight_ops_yield_128_distinct_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = sequence_generator(&base(8), 128, &mut rng, &[]).unwrap();
        assert_eq!(out.len(), 128);
        assert_eq!(out.iter().collect::<HashSet<_>>().len(), 128);
    }

    #[test]
    fn two_ops_yield_both_orders() {
        let b = base(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out: HashSet<_> = sequence_generator(&b, 2, &mut rng, &[]).unwrap().into_iter().collect();
        assert_eq!(out, HashSet::from([vec![b[0], b[1]], vec![b[1], b[0]]]));
    }

    #[test]
    fn cap_counts_exclusions() {
        let b = base(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(matches!(
            sequence_generator(&b, 7, &mut rng, &[]),
            Err(Error::CapExceeded { requested: 7, available: 6 })
        ));
        let exclude = vec![b.clone()];
        assert!(matches!(
            sequence_generator(&b, 6, &mut rng, &exclude),
            Err(Error::CapExceeded { requested: 6, available: 5 })
        ));
        let all = sequence_generator(&b, 5, &mut rng, &exclude).unwrap();
        assert!(!all.contains(&b));
    }

    #[test]
    fn exhausting_all_permutations_terminates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = sequence_generator(&base(4), 24, &mut rng, &[]).unwrap();
        assert_eq!(out.iter().collect::<HashSet<_>>().len(), 24);
    }

    #[test]
    fn first_position_cycles_through_base() {
        let b = base(5);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let round = generate_round(&b, 7, &mut rng);
        for (k, seq) in round.iter().enumerate() {
            assert_eq!(seq[0], b[k % 5]);
        }
    }

    #[test]
    fn suboptimal_swaps_adjacent_pairs() {
        assert_eq!(suboptimal_sequences(&[j(0, 0), j(1, 0)]), vec![vec![j(1, 0), j(0, 0)]]);
        let b = base(8);
        let subs = suboptimal_sequences(&b);
        assert_eq!(subs.len(), 7);
        for (h, p) in subs.iter().enumerate() {
            let diff: Vec<usize> = (0..8).filter(|&i| p[i] != b[i]).collect();
            assert_eq!(diff, vec![h, h + 1]);
        }
    }

    proptest! {
        #[test]
        fn outputs_are_distinct_permutations(n in 1usize..7, s in 1usize..40, seed in any::<u64>()) {
            let b = base(n);
            let s = s.min(factorial(n) as usize);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = sequence_generator(&b, s, &mut rng, &[]).unwrap();
            prop_assert_eq!(out.len(), s);
            prop_assert_eq!(out.iter().collect::<HashSet<_>>().len(), s);
            let mut sorted = b.clone();
            sorted.sort_unstable();
            for p in &out {
                prop_assert!(is_permutation_of(p, &sorted));
            }
        }
    }
}
