use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use jspq_core::bench::{self, AlgoSpec, BenchSpec, GridPoint, InstanceSource, OptimaSource};
use jspq_core::exact::{brute_force_optimal, solve_optimal, ExactConfig, DEFAULT_ENUMERATION_CAP};
use jspq_core::features::{compute_features_with, MachineArcs};
use jspq_core::instances::{generate_suite, read_standard, write_standard, GenSpec};
use jspq_core::labeling::{self, build_dataset, stratified_split, LabelConfig, Manifest, SequenceSample};
use jspq_core::oracle::{self, Example, OracleConfig, OracleModel, TrainConfig};
use jspq_core::tabu::{self, OracleScorer, PermutationScorer, SearchConfig};
use jspq_core::{Instance, Time};

use crate::{Algo, Cli, Command, DataArgs, Global, Part};

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    validate(g, &cli.command)?;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Generate { jobs, machines, p_min, p_max, count } => {
            generate(g, &GenSpec::new(jobs, machines, p_min, p_max, g.seed), count, &g.out).map(|_| ())
        }
        Command::Solve { instance, brute, time_limit, .. } => solve(&instance, brute, time_limit),
        Command::Label { instances, random, time_limit, name } => {
            label(g, &instances, random, time_limit, &name).map(|_| ())
        }
        Command::Features { instance, omit_machine_arcs } => features(g, &instance, omit_machine_arcs),
        Command::Train { dataset, data, epochs, batch_size, hidden, dropout, no_clip } => {
            let mut cfg = TrainConfig::scaled(epochs);
            cfg.batch_size = batch_size;
            cfg.seed = g.seed;
            if no_clip {
                cfg.clip_norm = None;
            }
            let model_cfg = OracleConfig { hidden, dropout, ..OracleConfig::default() };
            train(g, &dataset, &data, model_cfg, &cfg).map(|_| ())
        }
        Command::Eval { weights, dataset, data, tols, thresholds, part } => {
            let model = oracle::load_weights(&weights).with_context(|| format!("reading {}", weights.display()))?;
            let (samples, tables) = load_samples(&dataset, &data.instances)?;
            let picked = select_part(&samples, part, data.test_fraction, g.seed);
            let examples = oracle::prepare_examples(&picked, &tables)?;
            print!("{}", evaluate(&model, &examples, &tols, &thresholds)?);
            Ok(())
        }
        Command::Search { instances, algo, max_iter, restarts, tenure, oracle, reference, time_limit, strict, json } => {
            let model = match (algo, oracle) {
                (Algo::Ots, Some(path)) => {
                    Some(oracle::load_weights(&path).with_context(|| format!("reading {}", path.display()))?)
                }
                (Algo::Ots, None) => bail!("--algo ots needs --oracle <weights>"),
                (Algo::Sts, _) => None,
            };
            let cfg = SearchConfig {
                max_nonimproving: max_iter,
                restarts,
                tabu_tenure: tenure,
                seed: g.seed,
                time_limit: time_limit.map(Duration::from_secs_f64),
                strict_filter: strict,
            };
            for path in &instances {
                let inst = read_instance(path)?;
                let scorer = model.as_ref().map(|m| OracleScorer::new(m, &inst)).transpose()?;
                let report = tabu::run(&inst, &cfg, scorer.as_ref().map(|s| s as &dyn PermutationScorer), reference)?;
                if json {
                    println!("{}", serde_json::to_string(&report)?);
                } else {
                    let gap = report.gap.map_or_else(|| "NA".into(), |g| format!("{:.2}%", 100.0 * g));
                    println!(
                        "{} makespan {} (initial {}) gap {} iterations {} restarts {} oracle calls {} fallbacks {} ({:.0} ms)",
                        inst.id(),
                        report.best_makespan,
                        report.initial_makespan,
                        gap,
                        report.iterations,
                        report.restarts_used,
                        report.oracle_calls,
                        report.filter_fallbacks,
                        report.elapsed_ms
                    );
                }
            }
            Ok(())
        }
        Command::Bench { spec } => {
            let text = fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let mut spec: BenchSpec =
                serde_json::from_str(&text).with_context(|| format!("parsing bench spec {}", spec.display()))?;
            fs::create_dir_all(&g.out)?;
            spec.output = Some(g.out.join("bench.csv"));
            let results = bench::run_bench(&spec)?;
            print!("{}", bench::format_text(&results.rows)?);
            Ok(())
        }
        Command::Pipeline { instances, jobs, machines, random, epochs, seeds, max_iter, restarts, time_limit } => {
            pipeline(g, instances, jobs, machines, random, epochs, seeds, max_iter, restarts, time_limit)
        }
    }
}

fn validate(g: &Global, command: &Command) -> Result<()> {
    ensure!(g.threads != Some(0), "--threads must be at least 1");
    let positive = |name: &str, v: f64| -> Result<()> {
        ensure!(v > 0.0 && v.is_finite(), "{name} must be positive, got {v}");
        Ok(())
    };
    let fraction = |v: f64| -> Result<()> {
        ensure!(v > 0.0 && v < 1.0, "--test-fraction must lie in (0, 1), got {v}");
        Ok(())
    };
    match command {
        Command::Generate { jobs, machines, p_min, p_max, count } => {
            ensure!(*count >= 1, "--count must be at least 1");
            GenSpec::new(*jobs, *machines, *p_min, *p_max, 0).validate()?;
        }
        Command::Solve { time_limit, .. } | Command::Label { time_limit, .. } => positive("--time-limit", *time_limit)?,
        Command::Train { data, epochs, batch_size, hidden, dropout, .. } => {
            fraction(data.test_fraction)?;
            ensure!(*epochs >= 1 && *batch_size >= 1, "--epochs and --batch-size must be at least 1");
            OracleConfig { hidden: *hidden, dropout: *dropout, ..OracleConfig::default() }.validate()?;
        }
        Command::Eval { data, tols, thresholds, .. } => {
            fraction(data.test_fraction)?;
            for &t in tols {
                positive("--tol", t)?;
            }
            for &t in thresholds {
                ensure!(t > 0.0 && t < 1.0, "--threshold must lie in (0, 1), got {t}");
            }
        }
        Command::Search { max_iter, tenure, time_limit, reference, .. } => {
            ensure!(*max_iter >= 1 && *tenure >= 1, "--max-iter and --tenure must be at least 1");
            ensure!(*reference != Some(0), "--reference must be positive");
            if let Some(t) = time_limit {
                positive("--time-limit", *t)?;
            }
        }
        Command::Pipeline { instances, epochs, seeds, max_iter, time_limit, jobs, machines, .. } => {
            ensure!(*instances >= 1 && *epochs >= 1 && *seeds >= 1 && *max_iter >= 1, "counts must be at least 1");
            GenSpec::new(*jobs, *machines, 1, 99, 0).validate()?;
            positive("--time-limit", *time_limit)?;
        }
        Command::Features { .. } | Command::Bench { .. } => {}
    }
    Ok(())
}

fn read_instance(path: &Path) -> Result<Instance> {
    read_standard(path).with_context(|| format!("reading instance {}", path.display()))
}

fn generate(g: &Global, spec: &GenSpec, count: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut paths = Vec::with_capacity(count);
    for inst in generate_suite(spec, count)? {
        let path = dir.join(format!("{}.jsp", inst.id()));
        fs::write(&path, write_standard(&inst)).with_context(|| format!("writing {}", path.display()))?;
        paths.push(path);
    }
    log::info!("wrote {count} instances under {} (base seed {})", dir.display(), g.seed);
    Ok(paths)
}

fn solve(path: &Path, brute: bool, time_limit: f64) -> Result<()> {
    let inst = read_instance(path)?;
    if brute {
        let r = brute_force_optimal(&inst, DEFAULT_ENUMERATION_CAP)?;
        match r.makespan {
            Some(c) => println!("optimal {c}"),
            None => println!("infeasible"),
        }
        return Ok(());
    }
    let cfg = ExactConfig::default().with_time_limit(Duration::from_secs_f64(time_limit));
    let r = solve_optimal(&inst, &cfg)?;
    if r.status.is_optimal() {
        println!("optimal {}", r.makespan);
    } else {
        println!("{} best {}", r.status, r.makespan);
    }
    log::info!("{} nodes in {:?}", r.nodes_explored, r.elapsed);
    Ok(())
}

fn label(g: &Global, paths: &[PathBuf], random: usize, time_limit: f64, name: &str) -> Result<PathBuf> {
    let instances: Vec<Instance> = paths.iter().map(|p| read_instance(p)).collect::<Result<_>>()?;
    let cfg = LabelConfig {
        per_machine_random: random,
        seed: g.seed,
        solver: ExactConfig::default().with_time_limit(Duration::from_secs_f64(time_limit)),
    };
    let dataset = build_dataset(&instances, &cfg);
    for s in &dataset.stats.skipped {
        log::warn!("skipped {s:?}");
    }
    fs::create_dir_all(&g.out)?;
    let out = g.out.join(name);
    labeling::write_dataset(&out, &dataset.samples).with_context(|| format!("writing {}", out.display()))?;
    let manifest = Manifest {
        instances: paths.iter().map(|p| fs::canonicalize(p).unwrap_or_else(|_| p.clone()).display().to_string()).collect(),
        config: cfg,
        samples: dataset.samples.len(),
        stats: dataset.stats.clone(),
    };
    labeling::write_manifest(&out, &manifest)?;
    println!(
        "{} samples from {} instances ({} dropped, {} skipped) -> {}",
        dataset.samples.len(),
        dataset.stats.instances_labeled,
        dataset.stats.dropped_unlabeled,
        dataset.stats.skipped.len(),
        out.display()
    );
    Ok(out)
}

fn features(g: &Global, path: &Path, omit: bool) -> Result<()> {
    let inst = read_instance(path)?;
    let arcs = if omit { MachineArcs::Omit } else { MachineArcs::Bidirectional };
    let table = compute_features_with(&inst, arcs);
    fs::create_dir_all(&g.out)?;
    let out = g.out.join(format!("{}.features.csv", inst.id()));
    fs::write(&out, table.to_delimited()).with_context(|| format!("writing {}", out.display()))?;
    println!("{} operations x 18 features -> {}", table.n_ops(), out.display());
    Ok(())
}

/// Samples plus the feature tables of their instances, taken from
/// `instances` or else from the dataset manifest.
fn load_samples(dataset: &Path, instances: &[PathBuf]) -> Result<(Vec<SequenceSample>, HashMap<String, jspq_core::features::FeatureTable>)> {
    let samples = labeling::read_dataset(dataset).with_context(|| format!("reading dataset {}", dataset.display()))?;
    let paths: Vec<PathBuf> = if instances.is_empty() {
        let manifest = labeling::read_manifest(dataset)
            .with_context(|| format!("reading {}", labeling::manifest_path(dataset).display()))?;
        manifest.instances.into_iter().map(PathBuf::from).collect()
    } else {
        instances.to_vec()
    };
    let insts: Vec<Instance> = paths.iter().map(|p| read_instance(p)).collect::<Result<_>>()?;
    Ok((samples, oracle::feature_tables(&insts)))
}

fn select_part(samples: &[SequenceSample], part: Part, fraction: f64, seed: u64) -> Vec<SequenceSample> {
    if part == Part::All {
        return samples.to_vec();
    }
    let (train, test) = stratified_split(samples, fraction, seed);
    let idx = if part == Part::Train { train } else { test };
    idx.into_iter().map(|i| samples[i].clone()).collect()
}

fn train(g: &Global, dataset: &Path, data: &DataArgs, model_cfg: OracleConfig, cfg: &TrainConfig) -> Result<OracleModel> {
    let (samples, tables) = load_samples(dataset, &data.instances)?;
    let train_set = oracle::prepare_examples(&select_part(&samples, Part::Train, data.test_fraction, g.seed), &tables)?;
    let test_set = oracle::prepare_examples(&select_part(&samples, Part::Test, data.test_fraction, g.seed), &tables)?;
    let mut model = OracleModel::new(model_cfg, &mut ChaCha8Rng::seed_from_u64(g.seed))?;
    let history = oracle::train(&mut model, &train_set, &test_set, cfg)?;
    fs::create_dir_all(&g.out)?;
    let weights = g.out.join("weights.bin");
    oracle::save_weights(&weights, &model).with_context(|| format!("writing {}", weights.display()))?;
    let metrics = g.out.join("metrics.csv");
    fs::write(&metrics, history.to_delimited()).with_context(|| format!("writing {}", metrics.display()))?;
    println!(
        "trained {} epochs on {} samples ({} held out) -> {}, {}",
        cfg.total_epochs(),
        train_set.len(),
        test_set.len(),
        weights.display(),
        metrics.display()
    );
    print!("{}", evaluate(&model, &test_set, &[0.05, 0.07], &[0.5])?);
    Ok(model)
}

fn evaluate(model: &OracleModel, examples: &[Example], tols: &[f64], thresholds: &[f64]) -> Result<String> {
    let preds = oracle::predict_all(model, examples)?;
    let labels: Vec<f64> = examples.iter().map(|e| e.y).collect();
    let y_hat: Vec<f64> = preds.iter().map(|p| p.y_hat()).collect();
    let mut out = format!("{} samples, loss {:.5}\n", examples.len(), oracle::kl_loss(&preds, &labels)?);
    for &tol in tols {
        out.push_str(&format!("wta({tol}) {:.4}\n", oracle::wta(&y_hat, &labels, tol)?));
    }
    out.push_str(&oracle::format_binary_table(&oracle::binary_report(&preds, &labels, thresholds)?));
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn pipeline(
    g: &Global,
    count: usize,
    jobs: usize,
    machines: usize,
    random: usize,
    epochs: usize,
    seeds: usize,
    max_iter: usize,
    restarts: usize,
    time_limit: f64,
) -> Result<()> {
    let spec = GenSpec::new(jobs, machines, 1, 99, g.seed);
    let paths = generate(g, &spec, count, &g.out.join("instances"))?;
    let dataset = label(g, &paths, random, time_limit, "dataset.jsonl")?;
    let data = DataArgs { instances: Vec::new(), test_fraction: 0.25 };
    let mut cfg = TrainConfig::scaled(epochs);
    cfg.seed = g.seed;
    let model = train(g, &dataset, &data, OracleConfig::default(), &cfg)?;

    let samples = labeling::read_dataset(&dataset)?;
    let instances: Vec<Instance> = paths.iter().map(|p| read_instance(p)).collect::<Result<_>>()?;
    let optima: Vec<Option<Time>> =
        instances.iter().map(|i| samples.iter().find(|s| s.instance_id == i.id()).map(|s| s.c_max_opt)).collect();
    let mut bench_spec = BenchSpec::new(
        InstanceSource::Files(paths.clone()),
        vec![GridPoint { max_nonimproving: max_iter, restarts }],
        OptimaSource::None,
    );
    bench_spec.algorithms = vec![AlgoSpec::sts(), AlgoSpec::ots()];
    bench_spec.seeds = seeds;
    bench_spec.base_seed = g.seed;
    let results = bench::run_bench_on(&instances, &optima, &bench_spec, Some(&model))?;
    let out = g.out.join("bench.csv");
    fs::write(&out, bench::to_delimited(&results.rows)?).with_context(|| format!("writing {}", out.display()))?;
    print!("{}", bench::format_text(&results.rows)?);
    Ok(())
}
