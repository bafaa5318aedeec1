//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jspq_core::exact::{
    brute_force_optimal, brute_force_with_fixed, solve_optimal, solve_with_fixed_permutation, ExactConfig,
    DEFAULT_ENUMERATION_CAP,
};
use jspq_core::instances::{benchmark, dispatch, generate, generate_suite, reference_optimum, GenSpec, Rule};
use jspq_core::labeling::{build_dataset, quality, stratified_split, Dataset, LabelConfig, SampleKind, SequenceSample};
use jspq_core::oracle::{
    self, binary_report, feature_tables, predict_all, prepare_examples, wta, OracleConfig, OracleModel, Prediction,
    TrainConfig,
};
use jspq_core::tabu::{self, n1_neighborhood, OracleScorer, SearchConfig};
use jspq_core::{evaluate, Instance, OpId};

type Check = Result<String, String>;

fn exact() -> ExactConfig {
    ExactConfig::default()
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exact_matches_brute_force() -> Check {
    let mut cases = Vec::new();
    for seed in 0..50 {
        cases.push(generate(&GenSpec::new(3, 3, 1, 20, seed)).unwrap());
    }
    for seed in 0..20 {
        cases.push(generate(&GenSpec::new(4, 4, 1, 20, 100 + seed)).unwrap());
    }
    for inst in &cases {
        let bnb = solve_optimal(inst, &exact()).map_err(|e| e.to_string())?;
        let brute = brute_force_optimal(inst, DEFAULT_ENUMERATION_CAP).map_err(|e| e.to_string())?;
        if !bnb.status.is_optimal() || Some(bnb.makespan) != brute.makespan {
            return Err(format!("{}: branch and bound {} vs enumeration {:?}", inst.id(), bnb.makespan, brute.makespan));
        }
    }
    Ok(format!("{} instances agree", cases.len()))
}

fn random_perm(inst: &Instance, machine: usize, rng: &mut ChaCha8Rng) -> Vec<OpId> {
    let mut perm = inst.machine_ops(machine).to_vec();
    perm.shuffle(rng);
    perm
}

fn restriction_law() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut imposed = 0;
    for seed in 0..20 {
        let inst = generate(&GenSpec::new(4, 4, 1, 30, 200 + seed)).unwrap();
        let opt = solve_optimal(&inst, &exact()).unwrap();
        for (m, perm) in opt.solution.perms().iter().enumerate() {
            let r = solve_with_fixed_permutation(&inst, m, perm, &exact()).unwrap();
            if r.makespan != opt.makespan || quality(r.makespan, opt.makespan) != 1.0 {
                return Err(format!("{} machine {m}: optimal order gives {}", inst.id(), r.makespan));
            }
        }
        for _ in 0..100 {
            let m = rng.gen_range(0..inst.n_machines());
            let perm = random_perm(&inst, m, &mut rng);
            let r = solve_with_fixed_permutation(&inst, m, &perm, &exact()).unwrap();
            let brute = brute_force_with_fixed(&inst, m, &perm, DEFAULT_ENUMERATION_CAP).unwrap();
            let y = quality(r.makespan, opt.makespan);
            if r.makespan < opt.makespan || Some(r.makespan) != brute.makespan || !(y > 0.0 && y <= 1.0) {
                return Err(format!("{} machine {m}: {} (enumeration {:?}, y {y})", inst.id(), r.makespan, brute.makespan));
            }
            if (y == 1.0) != (r.makespan == opt.makespan) {
                return Err(format!("{}: y = {y} at makespan {}", inst.id(), r.makespan));
            }
            imposed += 1;
        }
    }
    Ok(format!("{imposed} random orders, all at or above the optimum"))
}

fn label_arithmetic() -> Check {
    let doubled = quality(14, 7);
    // 1 - tanh(1), written out from the exponential form.
    let closed = 1.0 - (1.0 - (-2.0f64).exp()) / (1.0 + (-2.0f64).exp());
    let fixture = quality(11, 7);
    let direct = 1.0 - (11.0f64 / 7.0 - 1.0).tanh();
    ensure(
        (doubled - closed).abs() < 1e-9 && (doubled - 0.238406).abs() < 1e-6 && (fixture - direct).abs() < 1e-9,
        format!("y(2x) = {doubled:.9}, y(11/7) = {fixture:.9}"),
    )
}

fn distinct_per_machine(samples: &[SequenceSample]) -> bool {
    let mut seen = HashSet::new();
    samples.iter().all(|s| seen.insert((s.instance_id.clone(), s.machine, s.perm.clone())))
}

fn dataset_counts(desk: &Dataset) -> Check {
    let n = desk.samples.len();
    if n != 20 * 6 * 38 || !distinct_per_machine(&desk.samples) || !desk.stats.skipped.is_empty() {
        return Err(format!("desk build: {n} samples, {} skipped", desk.stats.skipped.len()));
    }
    let big = generate(&GenSpec::new(8, 8, 1, 99, 5000)).unwrap();
    let full = build_dataset(&[big], &LabelConfig { per_machine_random: 128, ..LabelConfig::default() });
    let kinds = |k: SampleKind| full.samples.iter().filter(|s| s.kind == k).count();
    ensure(
        full.samples.len() == 1088
            && kinds(SampleKind::Optimal) == 8
            && kinds(SampleKind::Suboptimal) == 56
            && distinct_per_machine(&full.samples),
        format!("desk {n}, 8x8 instance {}", full.samples.len()),
    )
}

fn gradient_check() -> Check {
    let cfg = OracleConfig { features: 3, hidden: 4, dropout: 0.0 };
    let mut worst = 0.0f64;
    for point in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(point);
        let mut model = OracleModel::new(cfg, &mut rng).unwrap();
        let examples: Vec<oracle::Example> = (0..2)
            .map(|_| oracle::Example {
                x: jspq_core::tensor::Matrix::from_vec(3, 3, (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect()),
                y: rng.gen_range(0.05..1.0),
            })
            .collect();
        let batch: Vec<&oracle::Example> = examples.iter().collect();
        let (_, grad) = oracle::loss_and_gradient(&model, &batch, None);
        let eps = 1e-5;
        for k in 0..model.n_params() {
            let base = model.params()[k];
            model.params_mut()[k] = base + eps;
            let up = oracle::loss_and_gradient(&model, &batch, None).0;
            model.params_mut()[k] = base - eps;
            let down = oracle::loss_and_gradient(&model, &batch, None).0;
            model.params_mut()[k] = base;
            let numeric = (up - down) / (2.0 * eps);
            let rel = (numeric - grad[k]).abs() / numeric.abs().max(grad[k].abs()).max(1e-7);
            worst = worst.max(rel);
        }
    }
    ensure(worst < 1e-4, format!("max relative error {worst:.2e}"))
}

fn trained_oracle(insts: &[Instance], desk: &Dataset) -> Result<(OracleModel, String), String> {
    let (tr, te) = stratified_split(&desk.samples, 0.25, 0);
    let pick = |idx: &[usize]| idx.iter().map(|&i| desk.samples[i].clone()).collect::<Vec<_>>();
    let tables = feature_tables(insts);
    let train_set = prepare_examples(&pick(&tr), &tables).map_err(|e| e.to_string())?;
    let test_set = prepare_examples(&pick(&te), &tables).map_err(|e| e.to_string())?;
    let mut model = OracleModel::new(OracleConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    oracle::train(&mut model, &train_set, &test_set, &TrainConfig::scaled(25)).map_err(|e| e.to_string())?;
    let preds = predict_all(&model, &test_set).unwrap();
    let labels: Vec<f64> = test_set.iter().map(|e| e.y).collect();
    let y_hat: Vec<f64> = preds.iter().map(Prediction::y_hat).collect();
    let acc = binary_report(&preds, &labels, &[0.5]).unwrap()[0].accuracy;
    let w = wta(&y_hat, &labels, 0.07).unwrap();
    let detail = format!("held-out accuracy {:.1}%, WTA(0.07) {w:.3} on {} samples", 100.0 * acc, labels.len());
    if acc >= 0.80 && w >= 0.85 {
        Ok((model, detail))
    } else {
        Err(detail)
    }
}

fn n1_safety() -> Check {
    let mut neighbors = 0;
    for k in 0..1000u64 {
        let inst = generate(&GenSpec::new(5, 5, 1, 99, 3000 + k / 10)).unwrap();
        let sol = dispatch(&inst, Rule::RandomUniform(k));
        for mv in n1_neighborhood(&sol) {
            if evaluate(&inst, &mv.apply(sol.perms())).is_err() {
                return Err(format!("{} solution {k}: cyclic neighbor {mv:?}", inst.id()));
            }
            neighbors += 1;
        }
    }
    Ok(format!("{neighbors} neighbors of 1000 solutions, all acyclic"))
}

fn desk_direction(insts: &[Instance], desk: &Dataset, model: &OracleModel) -> Check {
    let (mut sts_opt, mut ots_opt, mut worse, mut better) = (0, 0, 0, 0);
    for inst in insts {
        let opt = desk.samples.iter().find(|s| s.instance_id == inst.id()).map(|s| s.c_max_opt).unwrap();
        let scorer = OracleScorer::new(model, inst).map_err(|e| e.to_string())?;
        for seed in 0..5 {
            let cfg = SearchConfig { max_nonimproving: 500, restarts: 1, tabu_tenure: 10, seed, ..SearchConfig::default() };
            let s = tabu::run(inst, &cfg, None, Some(opt)).unwrap();
            let o = tabu::run(inst, &cfg, Some(&scorer), Some(opt)).unwrap();
            sts_opt += usize::from(s.best_makespan == opt);
            ots_opt += usize::from(o.best_makespan == opt);
            worse += usize::from(o.best_makespan > s.best_makespan);
            better += usize::from(o.best_makespan < s.best_makespan);
        }
    }
    ensure(
        ots_opt >= sts_opt && better >= worse,
        format!("optima sTS {sts_opt} / oTS {ots_opt} of 100, oTS better {better}, worse {worse}"),
    )
}

fn orb_sanity() -> Check {
    let mut within = 0;
    let mut orb07 = f64::INFINITY;
    let mut gaps = Vec::new();
    for i in 1..=9 {
        let name = format!("orb{i:02}");
        let inst = benchmark(&name).unwrap().unwrap();
        let opt = reference_optimum(&name).unwrap();
        let best = (0..5)
            .map(|seed| {
                let cfg = SearchConfig {
                    max_nonimproving: 800,
                    restarts: 2,
                    tabu_tenure: 10,
                    seed,
                    time_limit: Some(Duration::from_secs(60)),
                    ..SearchConfig::default()
                };
                tabu::run(&inst, &cfg, None, Some(opt)).unwrap().best_makespan
            })
            .min()
            .unwrap();
        let gap = tabu::optimality_gap(best, opt);
        within += usize::from(gap <= 0.05);
        if name == "orb07" {
            orb07 = gap;
        }
        gaps.push(format!("{name} {:.2}%", 100.0 * gap));
    }
    ensure(within >= 7 && orb07 <= 0.02, format!("{within}/9 within 5%: {}", gaps.join(", ")))
}

fn metric_hand_checks() -> Check {
    let exact_hit = wta(&[0.3, 0.9], &[0.3, 0.9], 0.01).unwrap();
    let worked = wta(&[0.56, 0.81], &[0.5, 0.8], 0.05).unwrap();
    let pred = |pos: bool| Prediction::from_logits(if pos { [2.0, -2.0] } else { [-2.0, 2.0] });
    let labels = [0.9, 0.8, 0.2, 0.1];
    let perfect: Vec<_> = labels.iter().map(|&y| pred(y > 0.5)).collect();
    let p = &binary_report(&perfect, &labels, &[0.5]).unwrap()[0];
    let all_pos = &binary_report(&[pred(true); 4], &labels, &[0.5]).unwrap()[0];
    let mut table = vec![0.9; 38817];
    table.extend(std::iter::repeat_n(0.1, 15583));
    let ratio = binary_report(&vec![pred(true); table.len()], &table, &[0.5]).unwrap()[0].imbalance_ratio.unwrap();
    let printed = format!("{ratio:.2}");
    ensure(
        exact_hit == 1.0
            && worked == 0.5
            && (p.accuracy, p.precision, p.recall) == (1.0, Some(1.0), Some(1.0))
            && (all_pos.accuracy, all_pos.recall) == (0.5, Some(1.0))
            && printed == "0.40",
        format!("wta {worked}, imbalance {printed}"),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut failed = 0;
    let mut report = |id: usize, name: &str, t: Instant, check: Check| {
        let secs = t.elapsed().as_secs_f64();
        match check {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {detail} ({secs:.1}s)");
            }
        }
    };

    let t = Instant::now();
    report(1, "exact equals enumeration", t, exact_matches_brute_force());
    let t = Instant::now();
    report(2, "constrained-solve restriction law", t, restriction_law());
    let t = Instant::now();
    report(3, "label arithmetic", t, label_arithmetic());

    let t = Instant::now();
    let insts = generate_suite(&GenSpec::new(6, 6, 1, 99, 1000), 20).unwrap();
    let desk = build_dataset(&insts, &LabelConfig { per_machine_random: 32, ..LabelConfig::default() });
    report(4, "dataset counts", t, dataset_counts(&desk));
    let t = Instant::now();
    report(5, "gradient check", t, gradient_check());

    let t = Instant::now();
    let model = match trained_oracle(&insts, &desk) {
        Ok((model, detail)) => {
            report(6, "oracle learning signal", t, Ok(detail));
            Some(model)
        }
        Err(detail) => {
            report(6, "oracle learning signal", t, Err(detail.clone()));
            None
        }
    };
    let t = Instant::now();
    report(7, "N1 neighbors stay acyclic", t, n1_safety());
    let t = Instant::now();
    let direction = match &model {
        Some(model) => desk_direction(&insts, &desk, model),
        None => Err("no trained oracle".to_string()),
    };
    report(8, "oTS vs sTS on the desk suite", t, direction);
    let t = Instant::now();
    report(9, "sTS on the Orb instances", t, orb_sanity());
    let t = Instant::now();
    report(10, "metric hand-checks", t, metric_hand_checks());

    println!("{} of 10 criteria passed in {:.0}s", 10 - failed, started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
