//! Paired comparison harness for the tabu searches.
//!
//! Every algorithm runs on the same `(instance, seed)` pairs, so all of them
//! start from the same random dispatching schedule. Rows are summarized per
//! `(grid point, algorithm)` against the first algorithm in the spec.

mod table;

use std::path::PathBuf;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{solve_optimal, ExactConfig};
use crate::instances::{benchmark, generate_suite, read_standard, GenSpec, ReferenceOptima};
use crate::model::{Instance, Time};
use crate::oracle::{load_weights, OracleModel};
use crate::tabu::{optimality_gap, run, OracleScorer, PermutationScorer, SearchConfig};

pub use table::{format_text, parse_delimited, to_delimited};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Files(Vec<PathBuf>),
    Generated { spec: GenSpec, count: usize },
    /// Shipped benchmark instances by name.
    Benchmarks(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimaSource {
    /// Solve every instance exactly; a run out of time leaves it unknown.
    Exact { time_limit_secs: f64 },
    /// The shipped benchmark table.
    Shipped,
    /// A `name optimum` text file.
    File(PathBuf),
    None,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgoSpec {
    pub name: String,
    /// Filter the neighborhood with the oracle.
    pub oracle: bool,
}

impl AlgoSpec {
    pub fn sts() -> Self {
        Self { name: "sTS".into(), oracle: false }
    }

    pub fn ots() -> Self {
        Self { name: "oTS".into(), oracle: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    pub max_nonimproving: usize,
    pub restarts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub instances: InstanceSource,
    pub algorithms: Vec<AlgoSpec>,
    pub grid: Vec<GridPoint>,
    #[serde(default = "default_tenure")]
    pub tabu_tenure: usize,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    /// Run `k` uses search seed `base_seed + k`.
    #[serde(default)]
    pub base_seed: u64,
    pub optima: OptimaSource,
    /// Oracle weights, required when an algorithm uses the oracle.
    #[serde(default)]
    pub weights: Option<PathBuf>,
    #[serde(default)]
    pub time_limit_secs: Option<f64>,
    /// Report wall-clock averages; off makes the output byte-reproducible.
    #[serde(default = "default_true")]
    pub timing: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_tenure() -> usize {
    10
}

fn default_seeds() -> usize {
    5
}

fn default_true() -> bool {
    true
}

impl BenchSpec {
    pub fn new(instances: InstanceSource, grid: Vec<GridPoint>, optima: OptimaSource) -> Self {
        Self {
            instances,
            algorithms: vec![AlgoSpec::sts(), AlgoSpec::ots()],
            grid,
            tabu_tenure: default_tenure(),
            seeds: default_seeds(),
            base_seed: 0,
            optima,
            weights: None,
            time_limit_secs: None,
            timing: true,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() || self.grid.is_empty() {
            return Err(Error::InvalidConfig("a bench needs at least one algorithm and one grid point".into()));
        }
        if self.seeds == 0 {
            return Err(Error::InvalidConfig("a bench needs at least one seed".into()));
        }
        if self.algorithms.iter().any(|a| a.name.is_empty() || a.name.contains([',', ' '])) {
            return Err(Error::InvalidConfig("algorithm names must be non-empty without spaces or commas".into()));
        }
        if let Some(t) = self.time_limit_secs {
            if !(t > 0.0) {
                return Err(Error::InvalidConfig(format!("time limit {t} must be positive")));
            }
        }
        for g in &self.grid {
            self.search_config(g, 0).validate()?;
        }
        Ok(())
    }

    fn search_config(&self, g: &GridPoint, seed: u64) -> SearchConfig {
        SearchConfig {
            max_nonimproving: g.max_nonimproving,
            restarts: g.restarts,
            tabu_tenure: self.tabu_tenure,
            seed,
            time_limit: self.time_limit_secs.map(Duration::from_secs_f64),
            strict_filter: false,
        }
    }
}

/// One search run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub grid_id: usize,
    pub algorithm: String,
    pub seed: u64,
    pub initial_makespan: Time,
    pub makespan: Time,
    pub reference: Option<Time>,
    pub iterations: usize,
    pub elapsed_ms: f64,
}

/// Aggregate of one `(grid point, algorithm)` pair. Fractions, not percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub grid_id: usize,
    pub algorithm: String,
    pub max_nonimproving: usize,
    pub restarts: usize,
    pub runs: usize,
    /// Runs whose instance has a known optimum.
    pub scored_runs: usize,
    pub num_opt: usize,
    pub suboptimal: usize,
    /// Mean gap over suboptimal scored runs.
    pub avg_gap: Option<f64>,
    /// Runs where this algorithm ends worse than the baseline on the same seed.
    pub worse: usize,
    /// Mean of `(c - c_baseline) / c_opt` over worse runs with a known optimum.
    pub worse_diff: Option<f64>,
    pub better: usize,
    pub better_diff: Option<f64>,
    pub avg_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResults {
    pub runs: Vec<RunRecord>,
    pub rows: Vec<SummaryRow>,
}

/// Loads the instances named by the spec.
pub fn load_instances(source: &InstanceSource) -> Result<Vec<Instance>> {
    match source {
        InstanceSource::Files(paths) => paths.iter().map(|p| read_standard(p)).collect(),
        InstanceSource::Generated { spec, count } => generate_suite(spec, *count),
        InstanceSource::Benchmarks(names) => names
            .iter()
            .map(|n| benchmark(n).unwrap_or_else(|| Err(Error::InvalidConfig(format!("unknown benchmark {n}")))))
            .collect(),
    }
}

/// Optimum per instance, `None` where unknown.
pub fn resolve_optima(instances: &[Instance], source: &OptimaSource) -> Result<Vec<Option<Time>>> {
    Ok(match source {
        OptimaSource::None => vec![None; instances.len()],
        OptimaSource::Shipped => {
            let table = ReferenceOptima::shipped();
            instances.iter().map(|i| table.get(i.id())).collect()
        }
        OptimaSource::File(path) => {
            let table = ReferenceOptima::parse(&std::fs::read_to_string(path)?)?;
            instances.iter().map(|i| table.get(i.id())).collect()
        }
        OptimaSource::Exact { time_limit_secs } => {
            if !(*time_limit_secs > 0.0) {
                return Err(Error::InvalidConfig("exact time limit must be positive".into()));
            }
            let cfg = ExactConfig { time_limit: Duration::from_secs_f64(*time_limit_secs), ..ExactConfig::default() };
            instances
                .par_iter()
                .map(|i| solve_optimal(i, &cfg).map(|r| r.status.is_optimal().then_some(r.makespan)))
                .collect::<Result<_>>()?
        }
    })
}

/// Loads everything the spec names, runs it, and writes the delimited table
/// to `spec.output` when set.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchResults> {
    spec.validate()?;
    let instances = load_instances(&spec.instances)?;
    let optima = resolve_optima(&instances, &spec.optima)?;
    let model = match (&spec.weights, spec.algorithms.iter().any(|a| a.oracle)) {
        (Some(path), true) => Some(load_weights(path)?),
        (None, true) => return Err(Error::InvalidConfig("an oracle algorithm needs a weights file".into())),
        _ => None,
    };
    let results = run_bench_on(&instances, &optima, spec, model.as_ref())?;
    if let Some(path) = &spec.output {
        std::fs::write(path, to_delimited(&results.rows)?)?;
    }
    Ok(results)
}

/// Runs every `(instance, seed, grid point, algorithm)` combination.
pub fn run_bench_on(
    instances: &[Instance],
    optima: &[Option<Time>],
    spec: &BenchSpec,
    model: Option<&OracleModel>,
) -> Result<BenchResults> {
    spec.validate()?;
    if instances.is_empty() {
        return Err(Error::EmptyInput("bench instances"));
    }
    if optima.len() != instances.len() {
        return Err(Error::ShapeMismatch { expected: instances.len().to_string(), found: optima.len().to_string() });
    }
    if model.is_none() && spec.algorithms.iter().any(|a| a.oracle) {
        return Err(Error::InvalidConfig("an oracle algorithm needs a model".into()));
    }
    let scorers: Vec<Option<OracleScorer>> =
        instances.iter().map(|i| model.map(|m| OracleScorer::new(m, i)).transpose()).collect::<Result<_>>()?;

    let mut tasks = Vec::new();
    for inst_idx in 0..instances.len() {
        for k in 0..spec.seeds {
            for grid_id in 0..spec.grid.len() {
                for algo in 0..spec.algorithms.len() {
                    tasks.push((inst_idx, k, grid_id, algo));
                }
            }
        }
    }
    let runs: Vec<RunRecord> = tasks
        .par_iter()
        .map(|&(i, k, g, a)| {
            let seed = spec.base_seed.wrapping_add(k as u64);
            let cfg = spec.search_config(&spec.grid[g], seed);
            let algo = &spec.algorithms[a];
            let scorer = if algo.oracle { scorers[i].as_ref().map(|s| s as &dyn PermutationScorer) } else { None };
            let r = run(&instances[i], &cfg, scorer, optima[i])?;
            Ok(RunRecord {
                instance: instances[i].id().to_string(),
                grid_id: g,
                algorithm: algo.name.clone(),
                seed,
                initial_makespan: r.initial_makespan,
                makespan: r.best_makespan,
                reference: optima[i],
                iterations: r.iterations,
                elapsed_ms: if spec.timing { r.elapsed_ms } else { 0.0 },
            })
        })
        .collect::<Result<_>>()?;
    let rows = summarize(&runs, spec);
    Ok(BenchResults { runs, rows })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Runs are laid out as `[instance][seed][grid][algorithm]`.
fn summarize(runs: &[RunRecord], spec: &BenchSpec) -> Vec<SummaryRow> {
    let (n_grid, n_algo) = (spec.grid.len(), spec.algorithms.len());
    let at = |pair: usize, g: usize, a: usize| &runs[(pair * n_grid + g) * n_algo + a];
    let pairs = runs.len() / (n_grid * n_algo);
    let mut rows = Vec::with_capacity(n_grid * n_algo);
    for (g, point) in spec.grid.iter().enumerate() {
        for (a, algo) in spec.algorithms.iter().enumerate() {
            let (mut scored, mut num_opt, mut worse, mut better) = (0, 0, 0, 0);
            let (mut gaps, mut worse_diff, mut better_diff, mut times) = (vec![], vec![], vec![], vec![]);
            for p in 0..pairs {
                let r = at(p, g, a);
                let base = at(p, g, 0);
                times.push(r.elapsed_ms);
                if let Some(opt) = r.reference {
                    scored += 1;
                    if r.makespan == opt {
                        num_opt += 1;
                    } else {
                        gaps.push(optimality_gap(r.makespan, opt));
                    }
                }
                let diff = r.reference.map(|opt| (f64::from(r.makespan) - f64::from(base.makespan)) / f64::from(opt));
                if r.makespan > base.makespan {
                    worse += 1;
                    worse_diff.extend(diff);
                } else if r.makespan < base.makespan {
                    better += 1;
                    better_diff.extend(diff);
                }
            }
            rows.push(SummaryRow {
                grid_id: g,
                algorithm: algo.name.clone(),
                max_nonimproving: point.max_nonimproving,
                restarts: point.restarts,
                runs: pairs,
                scored_runs: scored,
                num_opt,
                suboptimal: scored - num_opt,
                avg_gap: mean(&gaps),
                worse,
                worse_diff: mean(&worse_diff),
                better,
                better_diff: mean(&better_diff),
                avg_ms: if spec.timing { mean(&times) } else { None },
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::GenSpec;

    fn small_spec(algorithms: Vec<AlgoSpec>) -> BenchSpec {
        let mut spec = BenchSpec::new(
            InstanceSource::Generated { spec: GenSpec::new(5, 5, 1, 30, 70), count: 3 },
            vec![GridPoint { max_nonimproving: 40, restarts: 1 }, GridPoint { max_nonimproving: 80, restarts: 0 }],
            OptimaSource::Exact { time_limit_secs: 30.0 },
        );
        spec.algorithms = algorithms;
        spec.seeds = 3;
        spec.timing = false;
        spec
    }

    #[test]
    fn identical_algorithms_compare_equal() {
        let spec = small_spec(vec![AlgoSpec::sts(), AlgoSpec { name: "again".into(), oracle: false }]);
        let res = run_bench(&spec).unwrap();
        assert_eq!(res.runs.len(), 3 * 3 * 2 * 2);
        for pair in res.rows.chunks(2) {
            assert_eq!((pair[1].worse, pair[1].better), (0, 0));
            assert_eq!(pair[0].num_opt, pair[1].num_opt);
            assert_eq!(pair[0].avg_gap, pair[1].avg_gap);
        }
        for row in &res.rows {
            assert_eq!(row.num_opt + row.suboptimal, 3 * 3);
            assert!(row.avg_gap.is_none_or(|g| g > 0.0));
        }
    }

    #[test]
    fn runs_are_paired_and_reproducible() {
        let spec = small_spec(vec![AlgoSpec::sts(), AlgoSpec::ots()]);
        let instances = load_instances(&spec.instances).unwrap();
        let optima = resolve_optima(&instances, &spec.optima).unwrap();
        let flat = crate::oracle::OracleModel::new(
            crate::oracle::OracleConfig::default(),
            &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0),
        )
        .unwrap();
        let a = run_bench_on(&instances, &optima, &spec, Some(&flat)).unwrap();
        let b = run_bench_on(&instances, &optima, &spec, Some(&flat)).unwrap();
        assert_eq!(a, b);
        assert_eq!(to_delimited(&a.rows).unwrap(), to_delimited(&b.rows).unwrap());
        for pair in a.runs.chunks(2) {
            assert_eq!((pair[0].seed, pair[0].initial_makespan), (pair[1].seed, pair[1].initial_makespan));
        }
        let missing = run_bench_on(&instances, &optima, &spec, None);
        assert!(matches!(missing, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn unknown_optima_leave_gaps_unavailable() {
        let mut spec = small_spec(vec![AlgoSpec::sts()]);
        spec.optima = OptimaSource::None;
        let res = run_bench(&spec).unwrap();
        for row in &res.rows {
            assert_eq!((row.scored_runs, row.num_opt, row.avg_gap), (0, 0, None));
        }
        assert!(format_text(&res.rows).unwrap().contains("NA"));
    }

    #[test]
    fn shipped_optima_cover_the_benchmarks() {
        let names = vec!["orb01".to_string(), "ta01".to_string()];
        let instances = load_instances(&InstanceSource::Benchmarks(names)).unwrap();
        assert_eq!(resolve_optima(&instances, &OptimaSource::Shipped).unwrap(), vec![Some(1059), Some(1231)]);
        assert!(load_instances(&InstanceSource::Benchmarks(vec!["nope".into()])).is_err());
    }

    #[test]
    fn specs_are_validated() {
        let mut spec = small_spec(vec![]);
        assert!(spec.validate().is_err());
        spec.algorithms = vec![AlgoSpec::sts()];
        spec.seeds = 0;
        assert!(spec.validate().is_err());
        spec.seeds = 1;
        spec.grid[0].max_nonimproving = 0;
        assert!(spec.validate().is_err());
        let ots = BenchSpec { algorithms: vec![AlgoSpec::ots()], ..small_spec(vec![]) };
        assert!(run_bench(&ots).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = small_spec(vec![AlgoSpec::sts(), AlgoSpec::ots()]);
        let text = serde_json::to_string_pretty(&spec).unwrap();
        assert_eq!(serde_json::from_str::<BenchSpec>(&text).unwrap(), spec);
    }
}
