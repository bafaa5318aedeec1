//! Labeled machine permutations.
//!
//! For every machine of a solved instance the dataset holds the optimal
//! permutation, its `n - 1` adjacent transpositions and a batch of random
//! permutations. Each one is labeled with `y = 1 - tanh(c / c_opt - 1)`, where
//! `c` is the best makespan reachable with that machine order fixed.

mod generator;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{solve_optimal, solve_with_fixed_permutation, ExactConfig, Status};
use crate::model::{Instance, OpId, Time};
use crate::seeding::rng_for;

pub use generator::{generate_round, sequence_generator, suboptimal_sequences};

/// Absolute tolerance when checking a stored label against its makespans.
pub const LABEL_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Random,
    Optimal,
    Suboptimal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub instance_id: String,
    pub machine: usize,
    #[serde(with = "op_pairs")]
    pub perm: Vec<OpId>,
    pub kind: SampleKind,
    pub c_max_pi: Time,
    pub c_max_opt: Time,
    pub y: f64,
}

impl SequenceSample {
    pub fn check(&self) -> Result<()> {
        if self.c_max_pi < self.c_max_opt {
            return Err(Error::InvalidConfig(format!(
                "sample makespan {} below optimum {}",
                self.c_max_pi, self.c_max_opt
            )));
        }
        if (self.y - quality(self.c_max_pi, self.c_max_opt)).abs() > LABEL_TOLERANCE {
            return Err(Error::InvalidConfig(format!("label {} does not match its makespans", self.y)));
        }
        Ok(())
    }
}

/// `1 - tanh(c / c_opt - 1)`: 1 at the optimum, decreasing in `c`.
pub fn quality(c_max_pi: Time, c_max_opt: Time) -> f64 {
    1.0 - (f64::from(c_max_pi) / f64::from(c_max_opt) - 1.0).tanh()
}

/// Labels one machine order. Fails with `Unlabeled` unless the constrained
/// problem is solved to optimality.
pub fn label_sequence(
    inst: &Instance,
    machine: usize,
    perm: &[OpId],
    kind: SampleKind,
    c_max_opt: Time,
    cfg: &ExactConfig,
) -> Result<SequenceSample> {
    let cfg = ExactConfig { known_lower_bound: Some(c_max_opt), ..cfg.clone() };
    let r = solve_with_fixed_permutation(inst, machine, perm, &cfg)?;
    match r.status {
        Status::Optimal => {}
        Status::Feasible { lower, .. } | Status::TimedOut { lower, .. } => {
            return Err(Error::Unlabeled { status: r.status.to_string(), bound: Some(lower) })
        }
        Status::Infeasible => return Err(Error::Unlabeled { status: r.status.to_string(), bound: None }),
    }
    if r.makespan < c_max_opt {
        return Err(Error::InvalidConfig(format!(
            "{}: fixed order reaches {} below the claimed optimum {c_max_opt}",
            inst.id(),
            r.makespan
        )));
    }
    Ok(SequenceSample {
        instance_id: inst.id().to_string(),
        machine,
        perm: perm.to_vec(),
        kind,
        c_max_pi: r.makespan,
        c_max_opt,
        y: quality(r.makespan, c_max_opt),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig {
    pub per_machine_random: usize,
    pub seed: u64,
    /// Limits for the unconstrained solve and for every label.
    pub solver: ExactConfig,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self { per_machine_random: 128, seed: 0, solver: ExactConfig::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedInstance {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub instances_labeled: usize,
    pub skipped: Vec<SkippedInstance>,
    /// Permutations whose constrained solve did not finish.
    pub dropped_unlabeled: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<SequenceSample>,
    pub stats: BuildStats,
}

/// The permutations to label for one machine: optimal, suboptimal, random.
pub fn machine_candidates(
    optimal: &[OpId],
    per_machine_random: usize,
    seed: u64,
    instance_index: usize,
    machine: usize,
) -> Result<Vec<(SampleKind, Vec<OpId>)>> {
    let subs = suboptimal_sequences(optimal);
    let mut exclude = vec![optimal.to_vec()];
    exclude.extend(subs.iter().cloned());
    let mut rng = rng_for(seed, &[instance_index as u64, machine as u64]);
    let random = sequence_generator(optimal, per_machine_random, &mut rng, &exclude)?;
    let mut out = vec![(SampleKind::Optimal, optimal.to_vec())];
    out.extend(subs.into_iter().map(|p| (SampleKind::Suboptimal, p)));
    out.extend(random.into_iter().map(|p| (SampleKind::Random, p)));
    Ok(out)
}

/// Solves and labels every instance. Instances that cannot be solved or
/// sampled are skipped and reported; the output order depends only on the
/// input order, never on thread scheduling.
pub fn build_dataset(instances: &[Instance], cfg: &LabelConfig) -> Dataset {
    let per_instance: Vec<_> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| label_instance(i, inst, cfg))
        .collect();
    let mut ds = Dataset::default();
    for (inst, outcome) in instances.iter().zip(per_instance) {
        match outcome {
            Ok((samples, dropped)) => {
                ds.stats.instances_labeled += 1;
                ds.stats.dropped_unlabeled += dropped;
                ds.samples.extend(samples);
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", inst.id());
                ds.stats.skipped.push(SkippedInstance { id: inst.id().to_string(), reason: e.to_string() });
            }
        }
    }
    ds
}

fn label_instance(index: usize, inst: &Instance, cfg: &LabelConfig) -> Result<(Vec<SequenceSample>, usize)> {
    let opt = solve_optimal(inst, &cfg.solver)?;
    if !opt.status.is_optimal() {
        return Err(Error::Unlabeled { status: opt.status.to_string(), bound: None });
    }
    let c_opt = opt.makespan;
    let mut tasks = Vec::new();
    for m in 0..inst.n_machines() {
        let optimal = opt.solution.perm(m);
        for (kind, perm) in machine_candidates(optimal, cfg.per_machine_random, cfg.seed, index, m)? {
            tasks.push((m, kind, perm));
        }
    }
    let labeled: Vec<Result<SequenceSample>> = tasks
        .into_par_iter()
        .map(|(m, kind, perm)| {
            if kind == SampleKind::Optimal {
                // The optimal schedule already realizes this order.
                return Ok(SequenceSample {
                    instance_id: inst.id().to_string(),
                    machine: m,
                    perm,
                    kind,
                    c_max_pi: c_opt,
                    c_max_opt: c_opt,
                    y: 1.0,
                });
            }
            label_sequence(inst, m, &perm, kind, c_opt, &cfg.solver)
        })
        .collect();
    let mut samples = Vec::with_capacity(labeled.len());
    let mut dropped = 0;
    for r in labeled {
        match r {
            Ok(s) => samples.push(s),
            Err(Error::Unlabeled { .. }) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if dropped > 0 {
        log::info!("{}: dropped {dropped} unlabeled permutations", inst.id());
    }
    Ok((samples, dropped))
}

/// Sidecar metadata written next to a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub instances: Vec<String>,
    pub config: LabelConfig,
    pub samples: usize,
    pub stats: BuildStats,
}

pub fn manifest_path(dataset: &Path) -> PathBuf {
    let mut name = dataset.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn write_dataset(path: &Path, samples: &[SequenceSample]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a dataset, rejecting records whose label disagrees with their
/// makespans.
pub fn read_dataset(path: &Path) -> Result<Vec<SequenceSample>> {
    let reader = BufReader::new(File::open(path)?);
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::MalformedFormat { line: i + 1, reason };
        let s: SequenceSample = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        s.check().map_err(|e| bad(e.to_string()))?;
        samples.push(s);
    }
    Ok(samples)
}

pub fn write_manifest(dataset: &Path, manifest: &Manifest) -> Result<()> {
    let file = File::create(manifest_path(dataset))?;
    serde_json::to_writer_pretty(BufWriter::new(file), manifest)?;
    Ok(())
}

pub fn read_manifest(dataset: &Path) -> Result<Manifest> {
    Ok(serde_json::from_reader(BufReader::new(File::open(manifest_path(dataset))?))?)
}

/// Seeded train/test split stratified by label decile. Returns sorted index
/// lists `(train, test)`.
pub fn stratified_split(samples: &[SequenceSample], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        let decile = ((s.y * 10.0).floor() as usize).min(9);
        strata.entry(decile).or_default().push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (decile, mut idx) in strata {
        idx.shuffle(&mut rng_for(seed, &[decile as u64]));
        let k = (idx.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

mod op_pairs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::model::OpId;

    pub fn serialize<S: Serializer>(perm: &[OpId], s: S) -> Result<S::Ok, S::Error> {
        perm.iter().map(|o| [o.job, o.step]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<OpId>, D::Error> {
        Ok(Vec::<[usize; 2]>::deserialize(d)?.into_iter().map(|[j, s]| OpId::new(j, s)).collect())
    }
}

/// Serializes one permutation per machine as nested `[job, step]` pairs.
pub(crate) mod perm_lists {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::model::OpId;

    pub fn serialize<S: Serializer>(perms: &[Vec<OpId>], s: S) -> Result<S::Ok, S::Error> {
        perms.iter().map(|p| p.iter().map(|o| [o.job, o.step]).collect::<Vec<_>>()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<OpId>>, D::Error> {
        Ok(Vec::<Vec<[usize; 2]>>::deserialize(d)?
            .into_iter()
            .map(|p| p.into_iter().map(|[j, s]| OpId::new(j, s)).collect())
            .collect())
    }
}
