//! Instance generation, the standard text format, dispatching rules and the
//! shipped benchmark set.

mod benchmarks;
mod dispatch;
mod format;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Operation, Time};

pub use benchmarks::{benchmark, benchmark_names, reference_optimum, ReferenceOptima, REFERENCE_OPTIMA};
pub use dispatch::{dispatch, dispatch_with_chain, Rule};
pub use format::{parse_standard, read_standard, write_standard};

/// Parameters of the uniform random instance generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n_jobs: usize,
    pub n_machines: usize,
    pub p_min: Time,
    pub p_max: Time,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(n_jobs: usize, n_machines: usize, p_min: Time, p_max: Time, seed: u64) -> Self {
        Self { n_jobs, n_machines, p_min, p_max, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_jobs == 0 || self.n_machines == 0 {
            return Err(Error::InvalidConfig("job and machine counts must be at least 1".into()));
        }
        if self.p_min == 0 || self.p_min > self.p_max {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= p_min <= p_max, got [{}, {}]",
                self.p_min, self.p_max
            )));
        }
        Ok(())
    }
}

/// Taillard-style instance: every job visits all machines in an independent
/// uniformly random order, processing times uniform in `[p_min, p_max]`.
pub fn generate(spec: &GenSpec) -> Result<Instance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let routes = (0..spec.n_jobs)
        .map(|_| {
            let mut machines: Vec<usize> = (0..spec.n_machines).collect();
            machines.shuffle(&mut rng);
            machines
                .into_iter()
                .map(|machine| Operation { machine, duration: rng.gen_range(spec.p_min..=spec.p_max) })
                .collect()
        })
        .collect();
    let id = format!("gen{}x{}_s{}", spec.n_jobs, spec.n_machines, spec.seed);
    Instance::new(id, spec.n_machines, routes)
}

/// `count` instances from consecutive seeds starting at `spec.seed`.
pub fn generate_suite(spec: &GenSpec, count: usize) -> Result<Vec<Instance>> {
    (0..count as u64)
        .map(|k| generate(&GenSpec { seed: spec.seed.wrapping_add(k), ..*spec }))
        .collect()
}
