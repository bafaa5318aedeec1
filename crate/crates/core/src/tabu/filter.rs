use crate::error::{Error, Result};
use crate::features::{build_input, compute_features, FeatureTable};
use crate::model::{Instance, OpId, Solution};
use crate::oracle::OracleModel;

use super::neighborhood::Move;

/// Scores a machine permutation; higher means more likely to belong to an
/// optimal solution.
pub trait PermutationScorer: Sync {
    fn score(&self, machine: usize, perm: &[OpId]) -> f64;
}

impl<F: Fn(usize, &[OpId]) -> f64 + Sync> PermutationScorer for F {
    fn score(&self, machine: usize, perm: &[OpId]) -> f64 {
        self(machine, perm)
    }
}

/// The trained oracle bound to one instance's feature table.
pub struct OracleScorer<'a> {
    model: &'a OracleModel,
    table: FeatureTable,
}

impl<'a> OracleScorer<'a> {
    pub fn new(model: &'a OracleModel, inst: &Instance) -> Result<Self> {
        let table = compute_features(inst);
        if table.matrix().cols() != model.config().features {
            return Err(Error::ShapeMismatch {
                expected: format!("{} features", model.config().features),
                found: table.matrix().cols().to_string(),
            });
        }
        Ok(Self { model, table })
    }
}

impl PermutationScorer for OracleScorer<'_> {
    fn score(&self, _machine: usize, perm: &[OpId]) -> f64 {
        self.model
            .forward(&build_input(&self.table, perm))
            .expect("input width checked at construction")
            .y_hat()
    }
}

/// What the oracle filter did to one neighborhood.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilterOutcome {
    pub moves: Vec<Move>,
    /// Moves dropped before any fallback.
    pub removed: usize,
    /// Every move was dropped, so the full neighborhood was restored.
    pub fell_back: bool,
    pub calls: usize,
}

/// Keeps a move iff the permutation it creates scores at least as high as
/// the current permutation of that machine (strictly higher when `strict`).
/// If nothing survives, returns the unfiltered list.
pub fn oracle_filter(current: &Solution, moves: &[Move], scorer: &dyn PermutationScorer, strict: bool) -> FilterOutcome {
    let mut calls = 0;
    let mut base: Vec<Option<f64>> = vec![None; current.perms().len()];
    let mut kept = Vec::with_capacity(moves.len());
    for mv in moves {
        let perm = current.perm(mv.machine);
        let before = *base[mv.machine].get_or_insert_with(|| {
            calls += 1;
            scorer.score(mv.machine, perm)
        });
        calls += 1;
        let after = scorer.score(mv.machine, &mv.permuted(perm));
        if after > before || (!strict && after == before) {
            kept.push(*mv);
        }
    }
    let removed = moves.len() - kept.len();
    if kept.is_empty() && !moves.is_empty() {
        return FilterOutcome { moves: moves.to_vec(), removed, fell_back: true, calls };
    }
    FilterOutcome { moves: kept, removed, fell_back: false, calls }
}
