use morphnet_core::framework::{dilate_se_for_reconstruction, se_from_cells, FilterBank};
use morphnet_core::morphology::{black_tophat, close, dilate, erode, open, reconstruct_approx, white_tophat, Reconstruction};
use morphnet_core::neuron::{MorphLayer, MorphNeuron, NeuronKind, NeuronSpec};
use morphnet_core::nn::{gradcheck, Dense, GradcheckOptions, Layer, Network};
use morphnet_core::{Shape, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cells(s: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..s * s, s * s).prop_map(move |mut c| {
        c[0] = (s / 2) * s + s / 2;
        c
    })
}

fn frozen(kind: NeuronKind, s: usize, c: usize, cells1: &[usize], cells2: &[usize]) -> MorphNeuron {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut n = MorphNeuron::new(NeuronSpec::uniform(kind, s, 1, s / 2), c, &mut rng).unwrap();
    n.set_bank(1, FilterBank::from_cells(s, 1, s / 2, cells1).unwrap().weights()).unwrap();
    if !kind.is_tied() {
        n.set_bank(2, FilterBank::from_cells(s, 1, s / 2, cells2).unwrap().weights()).unwrap();
    }
    n.set_pointwise(&vec![1.0 / c as f64; c], 0.0).unwrap();
    n
}

fn classical(kind: NeuronKind, x: &Tensor, c1: &[usize], c2: &[usize], s: usize) -> Tensor {
    let (b1, b2) = (se_from_cells(s, c1), se_from_cells(s, c2));
    match kind {
        NeuronKind::ComposedErosionFirst => dilate(&erode(x, &b1), &b2),
        NeuronKind::ComposedDilationFirst => erode(&dilate(x, &b1), &b2),
        NeuronKind::Opening => open(x, &b1),
        NeuronKind::Closing => close(x, &b1),
        NeuronKind::WhiteTopHat => white_tophat(x, &b1),
        NeuronKind::BlackTopHat => black_tophat(x, &b1),
        NeuronKind::RecByErosion => reconstruct_approx(Reconstruction::ByErosion, x, &b1, &dilate_se_for_reconstruction(&b2)),
        NeuronKind::RecByDilation => reconstruct_approx(Reconstruction::ByDilation, x, &b1, &dilate_se_for_reconstruction(&b2)),
    }
}

fn interior_eq(a: &Tensor, b: &Tensor, m: usize) -> bool {
    let s = a.shape();
    (0..s.channels).all(|c| (m..s.height.saturating_sub(m)).all(|i| (m..s.width.saturating_sub(m)).all(|j| a.get(c, i, j) == b.get(c, i, j))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn frozen_neuron_cores_match_classical_operators(
        kind in prop::sample::select(NeuronKind::ALL.to_vec()),
        (s, c1, c2) in prop_oneof![Just(1usize), Just(3), Just(5)].prop_flat_map(|s| (Just(s), cells(s), cells(s))),
        x in (1usize..3, 8usize..14).prop_flat_map(|(c, n)| {
            prop::collection::vec(-1.0f64..1.0, c * n * n).prop_map(move |v| Tensor::new(Shape::new(c, n, n), v).unwrap())
        }),
    ) {
        let channels = x.shape().channels;
        let n = frozen(kind, s, channels, &c1, &c2);
        let c2 = if kind.is_tied() { &c1 } else { &c2 };
        let (out, cache) = n.forward(&x).unwrap();
        let want = classical(kind, &x, &c1, c2, s);
        let margin = if kind.is_reconstruction() { s + 1 } else { 2 * (s / 2) };
        prop_assert!(interior_eq(&cache.core, &want, margin), "{:?}", kind);
        if channels == 1 {
            prop_assert_eq!(out, cache.core);
        }
    }
}

#[test]
fn opening_neuron_with_averaging_pointwise_matches_classical_open() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let se = morphnet_core::morphology::make_se(morphnet_core::morphology::SeShape::Square, 3).unwrap();
    let mut n = MorphNeuron::new(NeuronSpec::uniform(NeuronKind::Opening, 3, 1, 1), 1, &mut rng).unwrap();
    n.set_bank(1, FilterBank::from_se(&se, 1, 1).unwrap().weights()).unwrap();
    n.set_pointwise(&[1.0], 0.0).unwrap();
    let x = Tensor::from_fn(Shape::new(1, 10, 10), |_, i, j| ((i * 31 + j * 17) % 11) as f64);
    let (y, _) = n.forward(&x).unwrap();
    assert!(interior_eq(&y, &open(&x, &se), 2));
}

#[test]
fn white_tophat_of_a_constant_image_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = MorphNeuron::new(NeuronSpec::uniform(NeuronKind::WhiteTopHat, 5, 1, 2), 2, &mut rng).unwrap();
    let x = Tensor::filled(Shape::new(2, 12, 12), 0.7);
    let (_, cache) = n.forward(&x).unwrap();
    // Zero padding only reaches the border band.
    assert!(interior_eq(&cache.core, &Tensor::zeros(cache.core.shape()), 4));
}

#[test]
fn reconstruction_by_erosion_dominates_its_stage_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = MorphNeuron::new(NeuronSpec::uniform(NeuronKind::RecByErosion, 3, 1, 1), 1, &mut rng).unwrap();
    let x = Tensor::from_fn(Shape::new(1, 9, 9), |_, i, j| ((i * 7 + j * 3) % 5) as f64);
    let (_, cache) = n.forward(&x).unwrap();
    for k in 0..x.len() {
        let (core, stage, input) = (cache.core.data()[k], cache.stage2.data()[k], x.data()[k]);
        assert!(core >= stage && core >= input);
        assert_eq!(core, stage.max(input));
    }
}

#[test]
fn skip_kinds_require_shape_preserving_stages() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for kind in [NeuronKind::WhiteTopHat, NeuronKind::BlackTopHat, NeuronKind::RecByErosion, NeuronKind::RecByDilation] {
        assert!(MorphNeuron::new(NeuronSpec::uniform(kind, 5, 2, 2), 1, &mut rng).is_err());
        assert!(MorphNeuron::new(NeuronSpec::uniform(kind, 5, 1, 1), 1, &mut rng).is_err());
        assert!(MorphNeuron::new(NeuronSpec::uniform(kind, 5, 1, 2), 1, &mut rng).is_ok());
    }
    assert!(MorphNeuron::new(NeuronSpec::staged(NeuronKind::Opening, 3, (1, 2), (1, 0)), 1, &mut rng).is_ok());
}

#[test]
fn parameter_layout_per_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for kind in NeuronKind::ALL {
        let n = MorphNeuron::new(NeuronSpec::uniform(kind, 3, 1, 1), 4, &mut rng).unwrap();
        let sizes: Vec<usize> = n.params().iter().map(|p| p.len()).collect();
        if kind.is_tied() {
            assert_eq!(sizes, vec![81, 4, 1], "{kind:?}");
        } else {
            assert_eq!(sizes, vec![81, 81, 4, 1], "{kind:?}");
        }
        assert_eq!(kind.name().parse::<NeuronKind>().unwrap(), kind);
    }
}

#[test]
fn layer_stacks_one_plane_per_neuron() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let specs: Vec<NeuronSpec> = NeuronKind::ALL.iter().map(|&k| NeuronSpec::uniform(k, 3, 1, 1)).collect();
    let layer = MorphLayer::new(&specs, Shape::new(2, 8, 8), &mut rng).unwrap();
    assert_eq!(layer.output_shape(), Shape::new(8, 8, 8));
    let x = Tensor::from_fn(Shape::new(2, 8, 8), |c, i, j| (c + i * j) as f64 * 0.1);
    let (y, _) = layer.forward(&x).unwrap();
    for (k, n) in layer.neurons().iter().enumerate() {
        assert_eq!(y.channel(k), n.forward(&x).unwrap().0);
    }
}

#[test]
fn pointwise_gradients_match_finite_differences_for_every_kind() {
    for (s, kind) in NeuronKind::ALL.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(s as u64);
        let input = Shape::new(2, 9, 9);
        let layer = MorphLayer::new(&[NeuronSpec::uniform(kind, 3, 1, 1)], input, &mut rng).unwrap();
        let out = layer.output_shape().len();
        let net = Network::new(input, vec![Layer::Morph(layer), Layer::Flatten, Layer::Dense(Dense::new(out, 3, &mut rng))]).unwrap();
        let x = Tensor::from_fn(input, |c, i, j| ((c * 13 + i * 7 + j * 5) % 17) as f64 / 17.0);
        let report = gradcheck(&net, &x, 1, &GradcheckOptions::default()).unwrap();
        assert!(report.groups.iter().any(|g| g.name.ends_with("pointwise")));
        assert!(report.passed(1e-4), "{kind:?}: {report:?}");
    }
}
