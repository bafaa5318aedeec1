//! The learned permutation-quality oracle.
//!
//! [`OracleModel`] reads a permutation's feature rows with a warm-started
//! two-layer GRU and emits two logits; the softmax of the first is the
//! predicted quality. Training minimizes the KL divergence to the two-point
//! label distribution `(y, 1 - y)` with Adam, using a hand-written reverse
//! pass.

mod io;
mod metrics;
mod network;
mod train;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::features::{build_input, compute_features, FeatureTable};
use crate::labeling::SequenceSample;
use crate::model::Instance;

pub use io::{from_bytes, load_weights, save_weights, to_bytes};
pub use metrics::{binary_report, format_binary_table, wta, BinaryReport};
pub use network::{InputScaling, OracleConfig, OracleModel, Prediction, TensorInfo};
pub use train::{
    clip_global_norm, kl_divergence, kl_loss, loss_and_gradient, mean_loss, predict_all, train, Adam, EpochRecord,
    Example, History, Phase, TrainConfig, PROB_EPS,
};

/// Feature tables keyed by instance id.
pub fn feature_tables(instances: &[Instance]) -> HashMap<String, FeatureTable> {
    use rayon::prelude::*;
    instances.par_iter().map(|i| (i.id().to_string(), compute_features(i))).collect()
}

/// Rebuilds each sample's input matrix from its instance's feature table.
pub fn prepare_examples(samples: &[SequenceSample], tables: &HashMap<String, FeatureTable>) -> Result<Vec<Example>> {
    samples
        .iter()
        .map(|s| {
            let table = tables
                .get(&s.instance_id)
                .ok_or_else(|| Error::InvalidConfig(format!("no instance named {}", s.instance_id)))?;
            if let Some(op) = s.perm.iter().find(|&&o| table.position(o).is_none()) {
                return Err(Error::InvalidPermutation(format!("{op} is not in {}", s.instance_id)));
            }
            Ok(Example { x: build_input(table, &s.perm), y: s.y })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::tensor::Matrix;

    fn tiny(seed: u64) -> (OracleModel, Vec<Example>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = OracleConfig { features: 3, hidden: 4, dropout: 0.3 };
        let model = OracleModel::new(cfg, &mut rng).unwrap();
        let batch = (0..3)
            .map(|_| Example {
                x: Matrix::from_vec(3, 3, (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect()),
                y: rng.gen_range(0.05..1.0),
            })
            .collect();
        (model, batch)
    }

    fn random_input(rng: &mut ChaCha8Rng, n: usize, g: usize) -> Matrix {
        Matrix::from_vec(n, g, (0..n * g).map(|_| rng.gen_range(0.0..2.0)).collect())
    }

    /// Largest relative gap between the analytic gradient and central
    /// differences of the same loss.
    fn max_relative_error(model: &OracleModel, batch: &[Example], dropout: Option<(u64, &[u64])>) -> f64 {
        let refs: Vec<&Example> = batch.iter().collect();
        let (_, grad) = loss_and_gradient(model, &refs, dropout);
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        let mut m = model.clone();
        for i in 0..model.n_params() {
            let orig = m.params()[i];
            m.params_mut()[i] = orig + eps;
            let up = loss_and_gradient(&m, &refs, dropout).0;
            m.params_mut()[i] = orig - eps;
            let down = loss_and_gradient(&m, &refs, dropout).0;
            m.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let scale = grad[i].abs().max(numeric.abs()).max(1e-7);
            worst = worst.max((grad[i] - numeric).abs() / scale);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..10 {
            let (model, batch) = tiny(seed);
            let err = max_relative_error(&model, &batch, None);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn gradients_match_with_fixed_dropout_masks() {
        let (model, batch) = tiny(42);
        let err = max_relative_error(&model, &batch, Some((7, &[1, 2])));
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn softmax_is_a_distribution_and_eval_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = OracleModel::new(OracleConfig::default(), &mut rng).unwrap();
        for _ in 0..20 {
            let x = random_input(&mut rng, 8, 18);
            let a = model.forward(&x).unwrap();
            assert!((a.probs[0] + a.probs[1] - 1.0).abs() < 1e-12);
            assert!(a.y_hat() > 0.0 && a.y_hat() < 1.0);
            assert_eq!(a, model.forward(&x).unwrap());
        }
    }

    #[test]
    fn wrong_feature_width_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = OracleModel::new(OracleConfig::default(), &mut rng).unwrap();
        assert!(matches!(model.forward(&Matrix::zeros(4, 17)), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(model.forward(&Matrix::zeros(0, 18)), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn warm_start_ignores_row_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = OracleModel::new(OracleConfig::default(), &mut rng).unwrap();
        let x = random_input(&mut rng, 6, 18);
        let rev = x.reversed_rows();
        for layer in 0..2 {
            let a = model.warm_start(&x, layer).unwrap();
            let b = model.warm_start(&rev, layer).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_head_at_symmetric_target_has_zero_bias_gradient() {
        let (mut model, mut batch) = tiny(3);
        for name in ["fc2.weight", "fc2.bias"] {
            model.tensor_mut(name).unwrap().iter_mut().for_each(|v| *v = 0.0);
        }
        batch.iter_mut().for_each(|e| e.y = 0.5);
        let refs: Vec<&Example> = batch.iter().collect();
        let (loss, grad) = loss_and_gradient(&model, &refs, None);
        assert!(loss.abs() < 1e-15);
        let bias = model.tensors().iter().find(|t| t.name == "fc2.bias").unwrap();
        for g in &grad[bias.offset..bias.offset + 2] {
            assert!(g.abs() < 1e-15);
        }
    }

    #[test]
    fn zero_feature_columns_get_no_input_gradient() {
        let (model, mut batch) = tiny(4);
        for e in &mut batch {
            for r in 0..3 {
                e.x.row_mut(r)[1] = 0.0;
            }
        }
        let refs: Vec<&Example> = batch.iter().collect();
        let (_, grad) = loss_and_gradient(&model, &refs, None);
        for name in ["gru0.weight_ih", "proj0.weight", "proj1.weight"] {
            let t = model.tensors().iter().find(|t| t.name == name).unwrap();
            let cols = t.shape[1];
            for row in 0..t.shape[0] {
                assert_eq!(grad[t.offset + row * cols + 1], 0.0, "{name}");
            }
        }
    }

    #[test]
    fn scaling_standardizes_columns() {
        let x = Matrix::from_rows(&[&[1.0, 5.0], &[3.0, 5.0]]);
        let s = InputScaling::fit(2, [&x]).unwrap();
        assert_eq!((s.mean.clone(), s.std.clone()), (vec![2.0, 5.0], vec![1.0, 1.0]));
        assert!(InputScaling::fit(3, [&x]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut model = OracleModel::new(OracleConfig { features: 2, hidden: 3, dropout: 0.0 }, &mut rng).unwrap();
        let before = model.forward(&x).unwrap();
        model.set_scaling(s).unwrap();
        assert_ne!(before, model.forward(&x).unwrap());
        let bad = InputScaling { mean: vec![0.0; 2], std: vec![0.0, 1.0] };
        assert!(model.set_scaling(bad).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = |a: f64| {
            let l = [a.ln(), (1.0 - a).ln()];
            Prediction { logits: l, probs: [a, 1.0 - a] }
        };
        assert!(kl_loss(&[p(0.3)], &[0.3]).unwrap().abs() < 1e-12);
        assert!((kl_loss(&[p(0.5)], &[1.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let (a, y) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..=1.0));
            assert!(kl_loss(&[p(a)], &[y]).unwrap() >= -1e-15);
        }
        assert!(kl_loss(&[], &[]).is_err());
    }

    #[test]
    fn schedules() {
        let full = TrainConfig::default();
        assert_eq!(full.total_epochs(), 100);
        let scaled = TrainConfig::scaled(25);
        let epochs: Vec<usize> = scaled.schedule.iter().map(|p| p.epochs).collect();
        assert_eq!(epochs, vec![10, 8, 5, 2]);
        let lrs: Vec<f64> = scaled.schedule.iter().map(|p| p.lr).collect();
        assert_eq!(lrs, vec![0.005, 0.002, 0.001, 0.0005]);
        assert_eq!(TrainConfig::scaled(100), full);
        assert_eq!((scaled.lr_at(9), scaled.lr_at(10), scaled.lr_at(24)), (0.005, 0.002, 0.0005));
    }

    #[test]
    fn adam_moves_against_the_gradient() {
        let mut adam = Adam::new(2, 0.9, 0.999, 1e-8);
        let mut p = [1.0, -1.0];
        adam.step(&mut p, &[2.0, -0.5], 0.1);
        // The first bias-corrected step has magnitude lr per coordinate.
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = [3.0, 4.0];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let mut g = [0.3, 0.4];
        clip_global_norm(&mut g, 1.0);
        assert_eq!(g, [0.3, 0.4]);
    }

    #[test]
    fn training_is_seeded_and_reduces_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = OracleConfig { features: 4, hidden: 6, dropout: 0.1 };
        let data: Vec<Example> = (0..96)
            .map(|_| {
                let x = random_input(&mut rng, 4, 4);
                // Quality driven by the first feature of the first row.
                let y = 0.1 + 0.8 * x.row(0)[0] / 2.0;
                Example { x, y }
            })
            .collect();
        let tcfg = TrainConfig { batch_size: 16, schedule: vec![Phase { epochs: 6, lr: 0.01 }], seed: 3, ..TrainConfig::default() };
        let init = OracleModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let before = mean_loss(&init, &data).unwrap();
        let mut a = init.clone();
        let hist = train(&mut a, &data, &data[..20], &tcfg).unwrap();
        let mut b = init.clone();
        train(&mut b, &data, &data[..20], &tcfg).unwrap();
        assert_eq!(a.params(), b.params());
        assert!(mean_loss(&a, &data).unwrap() < before);
        assert_eq!(hist.epochs.len(), 6);
        assert!(hist.to_delimited().lines().count() == 7);
    }

    #[test]
    fn weights_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut model = OracleModel::new(OracleConfig::default(), &mut rng).unwrap();
        let fit: Vec<Matrix> = (0..5).map(|_| random_input(&mut rng, 8, 18)).collect();
        model.set_scaling(InputScaling::fit(18, &fit).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        save_weights(&path, &model).unwrap();
        let loaded = load_weights(&path).unwrap();
        assert_eq!(loaded.params(), model.params());
        assert_eq!(loaded.scaling(), model.scaling());
        let x = random_input(&mut rng, 8, 18);
        assert_eq!(loaded.forward(&x).unwrap(), model.forward(&x).unwrap());
        let mut bytes = to_bytes(&model);
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(from_bytes(&bytes), Err(Error::WeightFormat(_))));
        assert!(matches!(from_bytes(b"nonsense"), Err(Error::WeightFormat(_))));
    }
}
