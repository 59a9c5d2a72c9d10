use morphnet_core::arch::{self, Architecture};
use morphnet_core::data::{generate, split_60_20_20, Sample, SplitPart, SyntheticKind};
use morphnet_core::nn::{batch_gradients, evaluate, gradcheck, gradcheck_with, mean_loss, sgd_step, train, Dense, GradcheckOptions, Layer, Network, TrainConfig};
use morphnet_core::{Error, ParamKind, Shape, Tensor};

fn small_squares(seed: u64) -> Vec<Sample> {
    generate(SyntheticKind::Squares, seed, 40, 24).unwrap()
}

fn parts(data: &[Sample], seed: u64) -> [Vec<&Sample>; 3] {
    let sp = split_60_20_20(data, seed);
    [SplitPart::Train, SplitPart::Validation, SplitPart::Test].map(|p| sp.select(data, p))
}

fn values(net: &morphnet_core::nn::Network) -> Vec<Vec<f64>> {
    net.params().iter().map(|p| p.value.clone()).collect()
}

#[test]
fn zero_learning_rate_leaves_the_network_untouched() {
    let data = small_squares(1);
    let [tr, va, te] = parts(&data, 1);
    let mut net = arch::build(Architecture::SynNet, Shape::new(1, 24, 24), 2, 4).unwrap();
    let before = values(&net);
    let untrained = evaluate(&net, &te).unwrap();
    let config = TrainConfig { learning_rate: 0.0, weight_decay: 0.0, epochs: 2, ..TrainConfig::default() };
    let m = train(&mut net, &tr, &va, &te, &config).unwrap();
    assert_eq!(values(&net), before);
    assert_eq!(m.test_accuracy, untrained);
}

#[test]
fn training_is_bit_identical_across_runs() {
    let data = small_squares(2);
    let [tr, va, te] = parts(&data, 2);
    let config = TrainConfig { epochs: 2, batch_size: 5, seed: 9, ..TrainConfig::default() };
    let run = || {
        let mut net = arch::build(Architecture::SynNet, Shape::new(1, 24, 24), 2, 11).unwrap();
        let m = train(&mut net, &tr, &va, &te, &config).unwrap();
        (values(&net), m)
    };
    assert_eq!(run(), run());
}

#[test]
fn batch_gradients_are_independent_of_grouping() {
    let data = small_squares(3);
    let net = arch::build(Architecture::SynNet, Shape::new(1, 24, 24), 2, 0).unwrap();
    let all: Vec<&Sample> = data.iter().take(9).collect();
    let (g, loss, _) = batch_gradients(&net, &all).unwrap();
    let mut sum = net.zero_grads();
    let mut total = 0.0;
    for s in &all {
        let (gi, l, _) = batch_gradients(&net, std::slice::from_ref(s)).unwrap();
        total += l;
        for (a, b) in sum.iter_mut().zip(&gi) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
    assert!((loss - total).abs() < 1e-12);
    for (a, b) in g.iter().zip(&sum) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }
}

/// Plain gradient steps on one repeated sample never raise its loss, for every builder.
#[test]
fn single_sample_loss_is_non_increasing() {
    let cases = [
        (Architecture::SynNet, Shape::new(1, 24, 24)),
        (Architecture::MorphLeNet, Shape::new(3, 24, 24)),
        (Architecture::MorphAlexNet, Shape::new(3, 64, 64)),
        (Architecture::ClsLayer, Shape::new(1, 24, 24)),
        (Architecture::ConvSynNet, Shape::new(1, 24, 24)),
        (Architecture::ConvLeNet, Shape::new(3, 32, 32)),
    ];
    let config = TrainConfig { learning_rate: 1e-3, weight_decay: 0.0, momentum: 0.0, ..TrainConfig::default() };
    for (a, shape) in cases {
        let mut net = arch::build(a, shape, 3, 5).unwrap();
        let image = Tensor::from_fn(shape, |c, i, j| ((c * 5 + i * 3 + j * 7) % 11) as f64 / 11.0);
        let sample = Sample { id: 0, label: 1, image };
        let one = [&sample];
        let mut last = mean_loss(&net, &one).unwrap();
        for step in 0..50 {
            let (g, _, _) = batch_gradients(&net, &one).unwrap();
            let mut params = net.params_mut();
            for (p, g) in params.iter_mut().zip(g) {
                p.grad = g;
            }
            sgd_step(params, &config);
            let now = mean_loss(&net, &one).unwrap();
            assert!(now <= last + 1e-12, "{a}: step {step} raised the loss from {last} to {now}");
            last = now;
        }
    }
}

#[test]
fn divergence_is_reported_with_parameter_state() {
    let data = small_squares(4);
    let [tr, va, te] = parts(&data, 4);
    let mut net = arch::build(Architecture::ClsLayer, Shape::new(1, 24, 24), 2, 0).unwrap();
    let config = TrainConfig { learning_rate: 1e308, weight_decay: 0.0, momentum: 0.0, epochs: 3, ..TrainConfig::default() };
    match train(&mut net, &tr, &va, &te, &config) {
        Err(Error::Diverged { report, .. }) => assert!(report.contains(".weight"), "{report}"),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn gradcheck_passes_for_synnet_and_catches_a_corrupted_gradient() {
    let net = arch::build(Architecture::SynNet, Shape::new(1, 16, 16), 2, 1).unwrap();
    let x = Tensor::from_fn(Shape::new(1, 16, 16), |_, i, j| if (4..11).contains(&i) && (5..12).contains(&j) { 1.0 } else { 0.1 });
    let opts = GradcheckOptions::default();
    let good = gradcheck(&net, &x, 1, &opts).unwrap();
    assert!(good.passed(1e-4), "{good:?}");
    let checked: Vec<&str> = good.groups.iter().map(|g| g.name.as_str()).collect();
    let dense: Vec<&str> = net.params().iter().filter(|p| p.kind() == ParamKind::Dense).map(|p| p.name()).collect();
    assert_eq!(checked, dense);
    let bad = gradcheck_with(&net, &x, 1, &opts, |grads| grads[2][0] += 1.0).unwrap();
    assert!(!bad.passed(1e-4));
}

#[test]
fn gradcheck_sets_aside_coordinates_sitting_on_a_relu_kink() {
    let first = Dense::from_weights(1, 1, vec![1.0], vec![-1.0]).unwrap();
    let second = Dense::from_weights(1, 2, vec![1.0, -1.0], vec![0.0, 0.0]).unwrap();
    let net = Network::new(Shape::new(1, 1, 1), vec![Layer::Dense(first), Layer::Relu, Layer::Dense(second)]).unwrap();
    let report = gradcheck(&net, &Tensor::filled(Shape::new(1, 1, 1), 1.0), 0, &GradcheckOptions::default()).unwrap();
    let kinked: Vec<&str> = report.groups.iter().filter(|g| g.kinks > 0).map(|g| g.name.as_str()).collect();
    assert_eq!(kinked, vec!["0.dense.weight", "0.dense.bias"]);
    assert_eq!(report.kinks(), 2);
    assert!(report.max_rel_error() < 1e-6);
    assert!(report.passed(1e-4));
}
