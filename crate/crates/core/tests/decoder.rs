use emoxai::decoder::{evaluate, grid_search, train_folds, GridSpace, MlpConfig};
use emoxai::preprocess::{kfold_split, Dataset, FoldMode};
use rand::Rng;

fn separable(n: usize, seed: u64) -> Dataset {
    let mut rng = emoxai::rng::stream(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    while y.len() < n {
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        let s = 2.0 * a + b - 0.3;
        if s.abs() < 0.05 {
            continue;
        }
        x.extend([a, b]);
        y.push(u8::from(s > 0.0));
    }
    Dataset::from_rows("lin", &x, 2, y).unwrap()
}

fn xor(n: usize, seed: u64) -> Dataset {
    let mut rng = emoxai::rng::stream(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    while y.len() < n {
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        if a.abs() < 0.1 || b.abs() < 0.1 {
            continue;
        }
        x.extend([a, b]);
        y.push(u8::from(a * b > 0.0));
    }
    Dataset::from_rows("xor", &x, 2, y).unwrap()
}

/// Logistic regression by Newton's method on the held-out split, written
/// independently of the decoder.
fn logistic_oracle_accuracy(ds: &Dataset, folds: &emoxai::preprocess::FoldSplit) -> f64 {
    let mut accs = Vec::new();
    for f in 0..folds.k {
        let tr = folds.train_indices(f);
        let te = folds.test_indices(f);
        let mut w = [0.0f64; 3];
        for _ in 0..25 {
            let mut g = [0.0; 3];
            let mut h = [[0.0; 3]; 3];
            for &i in &tr {
                let r = ds.row(i);
                let v = [1.0, f64::from(r[0]), f64::from(r[1])];
                let p = 1.0 / (1.0 + (-(w[0] * v[0] + w[1] * v[1] + w[2] * v[2])).exp());
                let t = f64::from(ds.labels()[i]);
                for a in 0..3 {
                    g[a] += (p - t) * v[a];
                    for b in 0..3 {
                        h[a][b] += p * (1.0 - p) * v[a] * v[b];
                    }
                }
            }
            for (a, row) in h.iter_mut().enumerate() {
                row[a] += 1e-3;
                g[a] += 1e-3 * w[a];
            }
            let d = solve3(h, g);
            for a in 0..3 {
                w[a] -= d[a];
            }
        }
        let hits = te
            .iter()
            .filter(|&&i| {
                let r = ds.row(i);
                let s = w[0] + w[1] * f64::from(r[0]) + w[2] * f64::from(r[1]);
                (s >= 0.0) == (ds.labels()[i] == 1)
            })
            .count();
        accs.push(hits as f64 / te.len() as f64);
    }
    accs.iter().sum::<f64>() / accs.len() as f64
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *o = det(m) / d;
    }
    out
}

#[test]
fn linearly_separable_out_of_fold() {
    let ds = separable(300, 1);
    let folds = kfold_split(&ds, 5, 2, FoldMode::Shuffled).unwrap();
    assert!(logistic_oracle_accuracy(&ds, &folds) >= 0.98);
    let cfg = MlpConfig {
        hidden_units: vec![8],
        learning_rate: 0.01,
        l2_lambda: 1e-4,
        max_epochs: 300,
        patience: 30,
        ..MlpConfig::default()
    };
    let models = train_folds(&ds, &folds, &cfg).unwrap();
    let e = evaluate(&models, &ds, &folds).unwrap();
    assert!(e.out_sample_acc >= 0.98, "{e:?}");
}

#[test]
fn xor_out_of_fold() {
    let ds = xor(400, 3);
    let folds = kfold_split(&ds, 5, 4, FoldMode::Shuffled).unwrap();
    let cfg = MlpConfig {
        hidden_units: vec![8],
        learning_rate: 0.01,
        l2_lambda: 1e-4,
        max_epochs: 500,
        patience: 40,
        ..MlpConfig::default()
    };
    let models = train_folds(&ds, &folds, &cfg).unwrap();
    let e = evaluate(&models, &ds, &folds).unwrap();
    assert!(e.out_sample_acc >= 0.95, "{e:?}");
}

#[test]
fn grid_search_single_cell() {
    let ds = separable(60, 5);
    let cfg = MlpConfig {
        hidden_units: vec![40],
        max_epochs: 20,
        ..MlpConfig::default()
    };
    let r = grid_search(&ds, std::slice::from_ref(&cfg), 5, 0, FoldMode::Shuffled).unwrap();
    assert_eq!(r.best, cfg);
    assert!(grid_search(&ds, &[], 5, 0, FoldMode::Shuffled).is_err());
}

#[test]
fn grid_search_finds_planted_config() {
    let ds = xor(200, 6);
    let space = GridSpace {
        hidden_layers: vec![1],
        units: vec![40],
        l2_lambdas: vec![1e-4, 10.0, 100.0],
        base: MlpConfig {
            learning_rate: 0.01,
            max_epochs: 200,
            patience: 20,
            ..MlpConfig::default()
        },
    };
    let r = grid_search(&ds, &space.configs(), 5, 1, FoldMode::Shuffled).unwrap();
    assert_eq!(r.best.l2_lambda, 1e-4);
    assert_eq!(r.cells.len(), 3);
}

#[test]
fn equal_accuracy_prefers_one_layer() {
    // Both architectures separate this set perfectly.
    let ds = separable(100, 7);
    let base = MlpConfig {
        learning_rate: 0.02,
        max_epochs: 200,
        patience: 200,
        validation_fraction: 0.0,
        l2_lambda: 0.0,
        ..MlpConfig::default()
    };
    let one = MlpConfig {
        hidden_units: vec![40],
        ..base.clone()
    };
    let two = MlpConfig {
        hidden_units: vec![40, 40],
        ..base
    };
    let r = grid_search(&ds, &[two.clone(), one.clone()], 5, 3, FoldMode::Shuffled).unwrap();
    assert_eq!(
        r.cells[0].mean_val_acc, r.cells[1].mean_val_acc,
        "{:?}",
        r.cells
    );
    assert_eq!(r.best, one);
}
