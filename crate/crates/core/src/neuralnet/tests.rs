use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_batch(arch: MlpArchitecture, n: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let x = (0..n)
        .map(|_| (0..arch.inputs).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y = (0..n)
        .map(|_| match arch.output {
            OutputKind::Identity => (0..arch.outputs).map(|_| rng.random_range(-1.0..1.0)).collect(),
            OutputKind::Softmax => one_hot(rng.random_range(0..arch.outputs), arch.outputs),
        })
        .collect();
    (x, y)
}

fn finite_difference(net: &Mlp, data: &Samples, loss: Loss) -> Vec<f64> {
    let h = 1e-6;
    (0..net.params.len())
        .map(|k| {
            let mut up = net.clone();
            let mut dn = net.clone();
            up.params[k] += h;
            dn.params[k] -= h;
            (up.loss(data, loss).unwrap() - dn.loss(data, loss).unwrap()) / (2.0 * h)
        })
        .collect()
}

fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

#[test]
fn zero_network_outputs() {
    let net = Mlp::zeros(MlpArchitecture::regressor(3, 4)).unwrap();
    assert_eq!(net.forward(&[1.0, -5.0, 9.0]).unwrap(), vec![0.0]);
    let net = Mlp::zeros(MlpArchitecture::classifier(3, 4, 7)).unwrap();
    for y in net.forward(&[0.3, 0.1, 2.0]).unwrap() {
        assert!((y - 1.0 / 7.0).abs() < 1e-15);
    }
    let net = Mlp::init(MlpArchitecture::classifier(5, 6, 7), 3).unwrap();
    let y = net.forward(&[1.0, 2.0, -1.0, 0.5, 4.0]).unwrap();
    assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
    assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(net.forward(&[1.0]).is_err());
}

#[test]
fn parameter_layout() {
    let arch = MlpArchitecture::classifier(4, 3, 2);
    assert_eq!(arch.param_count(), 3 * 4 + 3 + 2 * 3 + 2);
    let net = Mlp::init(arch, 1).unwrap();
    let back = Mlp::from_params(arch, net.params.clone()).unwrap();
    assert_eq!(back, net);
    let json = serde_json::to_string(&net).unwrap();
    let parsed: Mlp = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed.params, net.params);
    assert!(Mlp::from_params(arch, vec![0.0; 3]).is_err());
    assert!(Mlp::zeros(MlpArchitecture::regressor(0, 3)).is_err());
    for (i, w) in net.params.iter().enumerate() {
        let bound = if i < 15 { 0.5 } else { 1.0 / 3f64.sqrt() };
        assert!(w.abs() <= bound, "param {i} = {w}");
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let arch = MlpArchitecture {
        inputs: 4,
        hidden: 3,
        outputs: 2,
        output: OutputKind::Identity,
    };
    let net = Mlp::init(arch, 5).unwrap();
    let (x, y) = random_batch(arch, 6, &mut rng);
    let data = Samples::new(&x, &y);
    let g = net.gradient(&data, Loss::Mse).unwrap();
    assert!(max_relative_error(&g, &finite_difference(&net, &data, Loss::Mse)) < 1e-5);
}

#[test]
fn weighted_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let arch = MlpArchitecture::classifier(3, 4, 3);
    let net = Mlp::init(arch, 8).unwrap();
    let (x, y) = random_batch(arch, 9, &mut rng);
    let w: Vec<f64> = (0..9).map(|i| 0.5 + i as f64 * 0.25).collect();
    let data = Samples::weighted(&x, &y, &w);
    let g = net.gradient(&data, Loss::CrossEntropy).unwrap();
    assert!(max_relative_error(&g, &finite_difference(&net, &data, Loss::CrossEntropy)) < 1e-5);
}

#[test]
fn perfect_prediction_has_flat_output_layer() {
    let arch = MlpArchitecture::classifier(2, 3, 4);
    let mut net = Mlp::init(arch, 2).unwrap();
    let bo = arch.param_count() - 4;
    net.params[bo] = 60.0;
    let x = vec![vec![0.1, -0.2]];
    let y = vec![one_hot(0, 4)];
    let g = net.gradient(&Samples::new(&x, &y), Loss::CrossEntropy).unwrap();
    let wo = 3 * 2 + 3;
    assert!(g[wo..].iter().all(|v| v.abs() < 1e-20), "{:?}", &g[wo..]);
}

#[test]
fn single_sample_is_fitted_exactly() {
    let arch = MlpArchitecture::regressor(3, 2);
    let mut net = Mlp::init(arch, 4).unwrap();
    let x = vec![vec![0.2, -0.4, 0.9]];
    let y = vec![vec![1.7]];
    let data = Samples::new(&x, &y);
    LevenbergMarquardt.train(&mut net, &data, None, &TrainOptions::default()).unwrap();
    let r = net.forward(&x[0]).unwrap()[0] - 1.7;
    assert!(r.abs() < 1e-8, "residual {r}");
    let g = net.gradient(&data, Loss::Mse).unwrap();
    assert!(norm_sq(&g).sqrt() < 1e-8);
}

/// Closed-form least-squares line through (x, y).
fn least_squares_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (a, (sy - a * sx) / n)
}

#[test]
fn lm_recovers_linear_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let xs: Vec<f64> = (0..60).map(|_| 0.05 * rng.random_range(-1.0..1.0)).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 0.5 + 1e-4 * rng.random_range(-1.0..1.0)).collect();
    let (a, b) = least_squares_line(&xs, &ys);
    let x: Vec<Vec<f64>> = xs.iter().map(|v| vec![*v]).collect();
    let y: Vec<Vec<f64>> = ys.iter().map(|v| vec![*v]).collect();
    // start in the linear region of tanh: unit hidden weight, zero biases
    let mut net = Mlp::from_params(MlpArchitecture::regressor(1, 1), vec![1.0, 0.0, 1.0, 0.0]).unwrap();
    let data = Samples::new(&x, &y);
    let rep = LevenbergMarquardt.train(&mut net, &data, None, &TrainOptions::default()).unwrap();
    let ls_mse = xs.iter().zip(&ys).map(|(x, y)| (a * x + b - y).powi(2)).sum::<f64>() / 60.0;
    let mse = net.loss(&data, Loss::Mse).unwrap();
    assert!(mse < 1e-6, "mse {mse}");
    // tanh curvature leaves a residual of order 1e-9 on top of the noise floor
    assert!(mse <= ls_mse + 1e-8, "{mse} vs least squares {ls_mse}");
    for x in [-0.05, 0.0, 0.05] {
        let p = net.forward(&[x]).unwrap()[0];
        assert!((p - (a * x + b)).abs() < 1e-3);
    }
    // accepted steps never raise the training error
    assert!(rep.train_loss.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn lm_fits_a_sine() {
    let xs: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 199.0]).collect();
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![(2.0 * std::f64::consts::PI * x[0]).sin()]).collect();
    let mut net = Mlp::init(MlpArchitecture::regressor(1, 10), 7).unwrap();
    let opts = TrainOptions {
        max_epochs: 500,
        ..TrainOptions::default()
    };
    LevenbergMarquardt.train(&mut net, &Samples::new(&xs, &ys), None, &opts).unwrap();
    let tx: Vec<Vec<f64>> = (0..101).map(|i| vec![(i as f64 + 0.5) / 101.5]).collect();
    let ty: Vec<Vec<f64>> = tx.iter().map(|x| vec![(2.0 * std::f64::consts::PI * x[0]).sin()]).collect();
    let test_mse = net.loss(&Samples::new(&tx, &ty), Loss::Mse).unwrap();
    assert!(test_mse < 1e-3, "test mse {test_mse}");
}

fn blobs(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut c = Vec::new();
    for i in 0..n {
        let k = i % 2;
        let centre = if k == 0 { (-2.0, -1.0) } else { (2.0, 1.5) };
        x.push(vec![centre.0 + rng.random_range(-1.0..1.0), centre.1 + rng.random_range(-1.0..1.0)]);
        c.push(k);
    }
    (x, c)
}

/// Perceptron run to convergence; returns a separating (w, b) if one is found.
fn separating_hyperplane(x: &[Vec<f64>], c: &[usize]) -> Option<(Vec<f64>, f64)> {
    let mut w = vec![0.0; x[0].len()];
    let mut b = 0.0;
    for _ in 0..10_000 {
        let mut clean = true;
        for (xi, &ci) in x.iter().zip(c) {
            let s = if ci == 1 { 1.0 } else { -1.0 };
            if s * (dot(&w, xi) + b) <= 0.0 {
                w.iter_mut().zip(xi).for_each(|(wk, xk)| *wk += s * xk);
                b += s;
                clean = false;
            }
        }
        if clean {
            return Some((w, b));
        }
    }
    None
}

fn accuracy(net: &Mlp, x: &[Vec<f64>], c: &[usize]) -> f64 {
    let hits = x.iter().zip(c).filter(|(xi, &ci)| net.predict_class(xi).unwrap() == ci).count();
    hits as f64 / x.len() as f64
}

#[test]
fn scg_separates_blobs_for_every_seed() {
    for seed in 0..10 {
        let (x, c) = blobs(100 + seed, 60);
        assert!(separating_hyperplane(&x, &c).is_some(), "blobs {seed} not separable");
        let y: Vec<Vec<f64>> = c.iter().map(|&k| one_hot(k, 2)).collect();
        let mut net = Mlp::init(MlpArchitecture::classifier(2, 10, 2), seed).unwrap();
        let opts = TrainOptions {
            max_epochs: 200,
            ..TrainOptions::default()
        };
        let rep = ScaledConjugateGradient.train(&mut net, &Samples::new(&x, &y), None, &opts).unwrap();
        assert_eq!(accuracy(&net, &x, &c), 1.0, "seed {seed}");
        assert!(rep.epochs <= 200);
        assert!(rep.train_loss.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}

#[test]
fn scg_solves_xor_for_most_seeds() {
    let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    let c = vec![0, 1, 1, 0];
    let y: Vec<Vec<f64>> = c.iter().map(|&k| one_hot(k, 2)).collect();
    let solved = (0..10)
        .filter(|&seed| {
            let mut net = Mlp::init(MlpArchitecture::classifier(2, 4, 2), seed).unwrap();
            ScaledConjugateGradient
                .train(&mut net, &Samples::new(&x, &y), None, &TrainOptions::default())
                .unwrap();
            accuracy(&net, &x, &c) == 1.0
        })
        .count();
    assert!(solved >= 8, "xor solved for {solved}/10 seeds");
}

#[test]
fn single_class_drives_cross_entropy_to_zero() {
    let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 12.0, 1.0 - i as f64 / 6.0]).collect();
    let y = vec![one_hot(0, 2); 12];
    let data = Samples::new(&x, &y);
    let mut net = Mlp::init(MlpArchitecture::classifier(2, 3, 2), 1).unwrap();
    ScaledConjugateGradient.train(&mut net, &data, None, &TrainOptions::default()).unwrap();
    assert!(net.loss(&data, Loss::CrossEntropy).unwrap() < 1e-4);
    assert!(x.iter().all(|xi| net.predict_class(xi).unwrap() == 0));
}

#[test]
fn training_is_reproducible() {
    let (x, c) = blobs(3, 40);
    let y: Vec<Vec<f64>> = c.iter().map(|&k| one_hot(k, 2)).collect();
    let run = || {
        let mut net = Mlp::init(MlpArchitecture::classifier(2, 5, 2), 9).unwrap();
        let (tx, vx) = x.split_at(30);
        let (ty, vy) = y.split_at(30);
        ScaledConjugateGradient
            .train(&mut net, &Samples::new(tx, ty), Some(&Samples::new(vx, vy)), &TrainOptions::default())
            .unwrap();
        net.params
    };
    let a = run();
    assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), run().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}

#[test]
fn early_stopping_keeps_best_validation_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
    let y: Vec<Vec<f64>> = x.iter().map(|v| vec![v[0] * v[0] + 0.3 * rng.random_range(-1.0..1.0)]).collect();
    let mut net = Mlp::init(MlpArchitecture::regressor(1, 20), 2).unwrap();
    let (tx, vx) = x.split_at(20);
    let (ty, vy) = y.split_at(20);
    let val = Samples::new(vx, vy);
    let rep = LevenbergMarquardt
        .train(&mut net, &Samples::new(tx, ty), Some(&val), &TrainOptions::default())
        .unwrap();
    let best = rep.val_loss.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(net.loss(&val, Loss::Mse).unwrap(), best);
    assert_eq!(rep.val_loss[rep.best_epoch - 1], best);
}

#[test]
fn trainer_registry() {
    assert_eq!(TRAINERS.get("lm").unwrap().name(), "lm");
    assert_eq!(TRAINERS.get("SCG").unwrap().loss(), Loss::CrossEntropy);
    assert!(TRAINERS.get("adam").is_err());
    let mut bad = TrainOptions::default();
    bad.patience = 0;
    assert!(bad.validate().is_err());
}

#[test]
fn split_arithmetic() {
    assert_eq!(split_counts(10), (7, 2, 1));
    assert_eq!(split_counts(912), (638, 137, 137));
    let keys: Vec<usize> = (0..6384).map(|i| i % 7).collect();
    let s = split_dataset(&keys, 1).unwrap();
    assert!((s.train.len() as i64 - 4469).abs() <= 3, "{}", s.train.len());
    for k in 0..7 {
        let share = s.train.iter().filter(|&&i| keys[i] == k).count() as f64 / 912.0;
        assert!((share - 0.7).abs() < 0.01);
    }
    let s = split_dataset(&[0u8; 10], 3).unwrap();
    assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (7, 2, 1));
    assert_eq!(split_dataset(&keys, 5).unwrap(), split_dataset(&keys, 5).unwrap());
    assert_ne!(split_dataset(&keys, 5).unwrap(), split_dataset(&keys, 6).unwrap());
    let mut lonely = vec![0u8; 12];
    lonely[3] = 1;
    assert!(matches!(split_dataset(&lonely, 0), Err(Error::InsufficientData(_))));
    assert!(split_dataset(&[0u8; 9], 0).is_err());
}

fn arch_strategy() -> impl Strategy<Value = MlpArchitecture> {
    (1usize..=5, 1usize..=5, 1usize..=5, any::<bool>()).prop_map(|(p, q, t, soft)| MlpArchitecture {
        inputs: p,
        hidden: q,
        outputs: if soft { t.max(2) } else { t },
        output: if soft { OutputKind::Softmax } else { OutputKind::Identity },
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn backprop_agrees_with_central_differences(arch in arch_strategy(), seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::init(arch, seed).unwrap();
        let (x, y) = random_batch(arch, n, &mut rng);
        let data = Samples::new(&x, &y);
        let loss = if arch.output == OutputKind::Softmax { Loss::CrossEntropy } else { Loss::Mse };
        let g = net.gradient(&data, loss).unwrap();
        let fd = finite_difference(&net, &data, loss);
        prop_assert!(max_relative_error(&g, &fd) < 1e-5);
    }

    #[test]
    fn softmax_outputs_are_a_distribution(seed in any::<u64>(), scale in 0.1f64..100.0) {
        let arch = MlpArchitecture::classifier(3, 4, 7);
        let mut net = Mlp::init(arch, seed).unwrap();
        net.params.iter_mut().for_each(|w| *w *= scale);
        let y = net.forward(&[1.0, -0.5, 0.25]).unwrap();
        prop_assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(y.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn split_is_disjoint_and_exhaustive(labels in prop::collection::vec(0u8..4, 10..200), seed in any::<u64>()) {
        let mut counts = [0usize; 4];
        labels.iter().for_each(|&l| counts[l as usize] += 1);
        prop_assume!(counts.iter().all(|&c| c == 0 || c >= 2));
        let s = split_dataset(&labels, seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
    }
}
