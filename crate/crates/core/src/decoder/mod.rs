//! Per-subject binary decoder: a ReLU network with a sigmoid output trained
//! with Adam on cross-entropy plus an L2 weight penalty, early stopping on a
//! held-out slice, k-fold evaluation and exhaustive grid search.

mod eval;
mod model;
mod network;
mod persist;

pub use eval::{
    accuracy, config_order, evaluate, fixed_schedule, grid_search, pick_best, train_folds,
    Evaluation, GridCell, GridSearchResult, GridSpace,
};
pub use model::{train, EpochRecord, MlpConfig, MlpModel, Standardizer};
pub use network::{bce_with_logit, param_count, sigmoid, Network};
pub use persist::{load_model, save_model, write_training_log};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{kfold_split, Dataset, FoldMode};
    use rand::Rng;

    fn model_from(net: Network) -> MlpModel {
        let m = net.n_inputs();
        MlpModel {
            config: MlpConfig::default(),
            standardizer: Standardizer::identity(m),
            network: net,
            history: Vec::new(),
            best_epoch: 0,
        }
    }

    #[test]
    fn zero_network_outputs_half() {
        let m = model_from(Network::zeros(vec![3, 4, 1]));
        assert_eq!(m.forward(&[1.0, -2.0, 3.0]).unwrap(), 0.5);
        assert!(m.forward(&[1.0]).is_err());
    }

    #[test]
    fn single_hidden_unit_by_hand() {
        // h = relu(0.5·x0 − 1.0·x1 + 0.25), out = σ(2h − 0.5)
        let net = Network::from_params(vec![2, 1, 1], vec![0.5, -1.0, 0.25, 2.0, -0.5]).unwrap();
        let m = model_from(net);
        let x = [3.0, 0.5];
        let h: f64 = (0.5 * 3.0 - 0.5 + 0.25_f64).max(0.0);
        let expected = 1.0 / (1.0 + (-(2.0 * h - 0.5)).exp());
        assert!((m.forward(&x).unwrap() - expected).abs() < 1e-12);
        // inactive unit
        let z = m.forward(&[0.0, 5.0]).unwrap();
        assert!((z - 1.0 / (1.0 + 0.5_f64.exp())).abs() < 1e-12);
    }

    #[test]
    fn output_saturates_monotonically() {
        let base = Network::from_params(vec![2, 1], vec![1.0, -0.5, 0.1]).unwrap();
        let mut prev = 0.5;
        for scale in [1.0, 2.0, 4.0, 8.0, 16.0, 64.0] {
            let mut net = base.clone();
            net.params_mut()[..2].iter_mut().for_each(|w| *w *= scale);
            let p = model_from(net).forward(&[1.0, 0.0]).unwrap();
            assert!(p > prev);
            prev = p;
        }
        assert!(prev > 1.0 - 1e-12);
    }

    fn numeric_grad(net: &Network, x: &[f64], y: &[f64], l2: f64) -> Vec<f64> {
        let h = 1e-6;
        let mut scratch = vec![0.0; net.params().len()];
        (0..net.params().len())
            .map(|i| {
                let mut a = net.clone();
                a.params_mut()[i] += h;
                let mut b = net.clone();
                b.params_mut()[i] -= h;
                let fa = a.loss_grad(x, y, y.len(), l2, &mut scratch);
                let fb = b.loss_grad(x, y, y.len(), l2, &mut scratch);
                (fa - fb) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = crate::rng::stream(11);
        for trial in 0..20 {
            let n_in = rng.random_range(1..5);
            let mut sizes = vec![n_in];
            for _ in 0..rng.random_range(0..3) {
                sizes.push(rng.random_range(1..6));
            }
            sizes.push(1);
            // random biases keep pre-activations off the ReLU kink at 0
            let n_params = param_count(&sizes);
            let net = Network::from_params(
                sizes,
                (0..n_params).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let n = rng.random_range(1..8);
            let x: Vec<f64> = (0..n * n_in).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..n)
                .map(|_| f64::from(rng.random_range(0..2u8)))
                .collect();
            let l2 = rng.random_range(0.0..0.1);
            let mut g = vec![0.0; net.params().len()];
            net.loss_grad(&x, &y, n, l2, &mut g);
            let num = numeric_grad(&net, &x, &y, l2);
            let diff: f64 = g
                .iter()
                .zip(&num)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt()
                + num.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(
                diff / norm.max(1e-300) <= 1e-4,
                "trial {trial}: {}",
                diff / norm
            );
        }
    }

    fn separable(n: usize, seed: u64) -> Dataset {
        let mut rng = crate::rng::stream(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        while y.len() < n {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            let s = 1.5 * a - b + 0.2;
            if s.abs() < 0.1 {
                continue;
            }
            x.extend([a, b]);
            y.push(u8::from(s > 0.0));
        }
        Dataset::from_rows("s", &x, 2, y).unwrap()
    }

    #[test]
    fn convex_full_batch_loss_never_increases() {
        let ds = separable(200, 3);
        let cfg = MlpConfig {
            hidden_units: vec![],
            learning_rate: 1e-3,
            batch_size: 0,
            max_epochs: 300,
            validation_fraction: 0.0,
            l2_lambda: 1e-3,
            ..MlpConfig::default()
        };
        let m = train(&ds, &cfg).unwrap();
        assert_eq!(m.history.len(), 300);
        for w in m.history.windows(2) {
            assert!(w[1].train_loss <= w[0].train_loss + 1e-12, "{:?}", w);
        }
    }

    #[test]
    fn training_is_bit_reproducible() {
        let ds = separable(120, 4);
        let cfg = MlpConfig {
            hidden_units: vec![6],
            max_epochs: 30,
            seed: 9,
            ..MlpConfig::default()
        };
        let a = train(&ds, &cfg).unwrap();
        let b = train(&ds, &cfg).unwrap();
        assert_eq!(a.network.params(), b.network.params());
        let c = train(&ds, &MlpConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.network.params(), c.network.params());
    }

    #[test]
    fn huge_penalty_flattens_output() {
        let ds = crate::preprocess::undersample(&separable(100, 5), 1).unwrap();
        let cfg = MlpConfig {
            hidden_units: vec![5],
            l2_lambda: 1e6,
            learning_rate: 1e-2,
            max_epochs: 200,
            validation_fraction: 0.0,
            ..MlpConfig::default()
        };
        let m = train(&ds, &cfg).unwrap();
        assert!(m.network.weight_norm_sq() < 1e-6);
        for p in m.predict_dataset(&ds) {
            assert!((p - 0.5).abs() < 0.05, "{p}");
        }
    }

    #[test]
    fn early_stopping_restores_best_epoch() {
        let ds = separable(150, 6);
        let cfg = MlpConfig {
            hidden_units: vec![30],
            learning_rate: 0.05,
            max_epochs: 400,
            patience: 5,
            l2_lambda: 0.0,
            ..MlpConfig::default()
        };
        let m = train(&ds, &cfg).unwrap();
        assert!(m.history.len() < 400);
        assert_eq!(m.history.len(), m.best_epoch + 1 + 5);
        let best = m.history[m.best_epoch].val_loss.unwrap();
        assert!(m.history.iter().all(|r| r.val_loss.unwrap() >= best));
    }

    #[test]
    fn nan_features_report_epoch_and_batch() {
        let mut x = vec![0.0; 20];
        x[3] = f64::INFINITY;
        let ds = Dataset::from_rows("n", &x, 2, vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
        // infinities survive f32 storage; standardizing yields NaN
        let ds = ds.unwrap();
        let err = train(
            &ds,
            &MlpConfig {
                validation_fraction: 0.0,
                ..MlpConfig::default()
            },
        )
        .unwrap_err();
        assert!(
            matches!(err, crate::Error::NonFiniteLoss { epoch: 0, batch: 0 }),
            "{err}"
        );
    }

    #[test]
    fn perfect_and_chance_evaluation() {
        let ds = separable(50, 7);
        let folds = kfold_split(&ds, 5, 1, FoldMode::Shuffled).unwrap();
        // logistic unit with the generating hyperplane, scaled up
        let exact = Network::from_params(vec![2, 1], vec![150.0, -100.0, 20.0]).unwrap();
        let models = vec![model_from(exact); 5];
        let e = evaluate(&models, &ds, &folds).unwrap();
        assert_eq!((e.in_sample_acc, e.out_sample_acc), (1.0, 1.0));

        let balanced =
            Dataset::from_rows("c", &[0.0; 20], 2, vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]).unwrap();
        let folds = kfold_split(&balanced, 5, 1, FoldMode::Shuffled).unwrap();
        let models = vec![model_from(Network::zeros(vec![2, 1])); 5];
        let e = evaluate(&models, &balanced, &folds).unwrap();
        assert_eq!(e.out_sample_acc, 0.5);
    }

    #[test]
    fn tie_break_prefers_fewer_parameters() {
        let cell = |units: Vec<usize>, acc: f64| GridCell {
            n_params: param_count(
                &[10]
                    .iter()
                    .chain(&units)
                    .chain(&[1])
                    .cloned()
                    .collect::<Vec<_>>(),
            ),
            config: MlpConfig {
                hidden_units: units,
                ..MlpConfig::default()
            },
            mean_val_acc: acc,
        };
        let cells = vec![
            cell(vec![40, 40], 0.9),
            cell(vec![40], 0.9),
            cell(vec![300], 0.9),
        ];
        assert_eq!(pick_best(&cells).unwrap().config.hidden_units, vec![40]);
        let cells = vec![cell(vec![40, 40], 0.95), cell(vec![40], 0.9)];
        assert_eq!(pick_best(&cells).unwrap().config.hidden_units, vec![40, 40]);
    }

    #[test]
    fn grid_space_expansion() {
        let space = GridSpace {
            hidden_layers: vec![1, 2],
            units: vec![40, 300],
            l2_lambdas: vec![0.0, 1.0],
            base: MlpConfig::default(),
        };
        let cfgs = space.configs();
        assert_eq!(cfgs.len(), 2 * 2 + 4 * 2);
        assert!(cfgs
            .iter()
            .all(|c| c.hidden_units.iter().all(|u| (40..=300).contains(u))));
    }

    #[test]
    fn model_files_roundtrip() {
        let ds = separable(60, 8);
        let m = train(
            &ds,
            &MlpConfig {
                hidden_units: vec![4, 3],
                max_epochs: 5,
                ..MlpConfig::default()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_model(&m, dir.path()).unwrap();
        let back = load_model(dir.path()).unwrap();
        assert_eq!(back.config, m.config);
        assert_eq!(back.history, m.history);
        for (a, b) in back.network.params().iter().zip(m.network.params()) {
            assert_eq!(*a, f64::from(*b as f32));
        }
        let mut log = Vec::new();
        write_training_log(&m, &mut log).unwrap();
        let text = String::from_utf8(log).unwrap();
        assert!(text.starts_with("epoch,train_loss,val_loss\n0,"));
        assert_eq!(text.lines().count(), m.history.len() + 1);
    }
}
