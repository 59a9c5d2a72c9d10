//! Network builders.
//!
//! | name          | layers |
//! |---------------|--------|
//! | `synnet`      | one opening neuron (11×11, stride 1, padding 5), flatten, dense → classes |
//! | `morph-lenet` | 6 composed neurons (5×5, stride 2, padding 2), 16 mixed neurons (5×5, stride 1, padding 2), dense 120, 84, classes |
//! | `morph-alexnet` | five morphological layers of 8, 24, 48, 32, 32 neurons, dense 512, 512, classes |
//! | `cls-layer`   | flatten, dense → classes |
//! | `conv-synnet` | conv 11×11 → relu → maxpool 2×2 → conv 11×11 → relu, dense → classes |
//! | `conv-lenet`  | four 5×5 convs (6, 6, 16, 16 channels) with relu and 2×2 pooling between them, dense 120, 84, classes |
//!
//! The convolutional baselines replace each of a morphological layer's two depthwise stages by a
//! standard convolution with the same kernel, stride and padding and as many output channels as
//! the layer has neurons, put a ReLU after every convolution and a 2×2, stride-2 max-pool between
//! consecutive convolutions. For 3 input channels, 224×224 inputs and 21 classes `conv-lenet`
//! has 116,343 parameters (flatten size 16×7×7); `conv-synnet` for one channel and 2 classes has
//! 25,334.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::neuron::{MorphLayer, NeuronKind, NeuronSpec};
use crate::nn::{Conv2d, Dense, Layer, MaxPool2d, Network};
use crate::tensor::Shape;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Architecture {
    SynNet,
    MorphLeNet,
    MorphAlexNet,
    ClsLayer,
    ConvSynNet,
    ConvLeNet,
}

impl Architecture {
    pub const ALL: [Architecture; 6] = [
        Architecture::SynNet,
        Architecture::MorphLeNet,
        Architecture::MorphAlexNet,
        Architecture::ClsLayer,
        Architecture::ConvSynNet,
        Architecture::ConvLeNet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::SynNet => "synnet",
            Architecture::MorphLeNet => "morph-lenet",
            Architecture::MorphAlexNet => "morph-alexnet",
            Architecture::ClsLayer => "cls-layer",
            Architecture::ConvSynNet => "conv-synnet",
            Architecture::ConvLeNet => "conv-lenet",
        }
    }
}

impl core::fmt::Display for Architecture {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Architecture::ALL.iter().map(|a| a.name()).collect();
            Error::invalid(format!("unknown architecture `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

/// Builds `arch` for `input` and `classes`, drawing initial weights from `seed`.
pub fn build(arch: Architecture, input: Shape, classes: usize, seed: u64) -> Result<Network> {
    if classes < 2 {
        return Err(Error::invalid("at least two classes are required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match arch {
        Architecture::SynNet => build_synnet(input, classes, &mut rng),
        Architecture::MorphLeNet => build_morph_lenet(input, classes, &mut rng),
        Architecture::MorphAlexNet => build_morph_alexnet(input, classes, &mut rng),
        Architecture::ClsLayer => build_classification_layer(input, classes, &mut rng),
        Architecture::ConvSynNet => build_conv_synnet(input, classes, &mut rng),
        Architecture::ConvLeNet => build_conv_lenet(input, classes, &mut rng),
    }
}

fn repeat(counts: &[(NeuronKind, usize)], f: impl Fn(NeuronKind) -> NeuronSpec) -> Vec<NeuronSpec> {
    counts.iter().flat_map(|&(k, n)| core::iter::repeat_n(f(k), n)).collect()
}

fn head(layers: &mut Vec<Layer>, features: usize, hidden: &[usize], classes: usize, rng: &mut ChaCha8Rng) {
    layers.push(Layer::Flatten);
    let mut d = features;
    for &h in hidden {
        layers.push(Layer::Dense(Dense::new(d, h, rng)));
        layers.push(Layer::Relu);
        d = h;
    }
    layers.push(Layer::Dense(Dense::new(d, classes, rng)));
}

fn morph(specs: &[NeuronSpec], input: Shape, rng: &mut ChaCha8Rng) -> Result<(Layer, Shape)> {
    let l = MorphLayer::new(specs, input, rng)?;
    let out = l.output_shape();
    Ok((Layer::Morph(l), out))
}

pub fn build_synnet(input: Shape, classes: usize, rng: &mut ChaCha8Rng) -> Result<Network> {
    let (l, out) = morph(&[NeuronSpec::uniform(NeuronKind::Opening, 11, 1, 5)], input, rng)?;
    let mut layers = vec![l];
    head(&mut layers, out.len(), &[], classes, rng);
    Network::new(input, layers)
}

pub fn build_morph_lenet(input: Shape, classes: usize, rng: &mut ChaCha8Rng) -> Result<Network> {
    use NeuronKind::*;
    let l1 = repeat(&[(ComposedDilationFirst, 3), (ComposedErosionFirst, 3)], |k| NeuronSpec::uniform(k, 5, 2, 2));
    let l2 = repeat(
        &[
            (ComposedDilationFirst, 3),
            (ComposedErosionFirst, 3),
            (RecByErosion, 3),
            (RecByDilation, 2),
            (WhiteTopHat, 2),
            (BlackTopHat, 3),
        ],
        |k| NeuronSpec::uniform(k, 5, 1, 2),
    );
    let (a, s1) = morph(&l1, input, rng)?;
    let (b, s2) = morph(&l2, s1, rng)?;
    let mut layers = vec![a, b];
    head(&mut layers, s2.len(), &[120, 84], classes, rng);
    Network::new(input, layers)
}

pub fn build_morph_alexnet(input: Shape, classes: usize, rng: &mut ChaCha8Rng) -> Result<Network> {
    use NeuronKind::*;
    let composed = |n: usize| [(ComposedDilationFirst, n), (ComposedErosionFirst, n)];
    let l1 = repeat(&composed(4), |k| NeuronSpec::staged(k, 11, (1, 5), (5, 2)));
    let l2 = repeat(
        &[
            (ComposedDilationFirst, 4),
            (ComposedErosionFirst, 4),
            (RecByErosion, 4),
            (RecByDilation, 4),
            (WhiteTopHat, 4),
            (BlackTopHat, 4),
        ],
        |k| NeuronSpec::uniform(k, 5, 1, 2),
    );
    let l3 = repeat(&composed(24), |k| NeuronSpec::staged(k, 3, (1, 3), (1, 0)));
    let l4 = repeat(
        &[
            (ComposedDilationFirst, 6),
            (ComposedErosionFirst, 6),
            (RecByErosion, 5),
            (RecByDilation, 5),
            (WhiteTopHat, 5),
            (BlackTopHat, 5),
        ],
        |k| NeuronSpec::uniform(k, 3, 1, 1),
    );
    let l5 = repeat(&composed(16), |k| NeuronSpec::staged(k, 3, (1, 2), (1, 0)));
    let mut layers = Vec::new();
    let mut shape = input;
    for specs in [l1, l2, l3, l4, l5] {
        let (l, s) = morph(&specs, shape, rng)?;
        layers.push(l);
        shape = s;
    }
    head(&mut layers, shape.len(), &[512, 512], classes, rng);
    Network::new(input, layers)
}

pub fn build_classification_layer(input: Shape, classes: usize, rng: &mut ChaCha8Rng) -> Result<Network> {
    let mut layers = Vec::new();
    head(&mut layers, input.len(), &[], classes, rng);
    Network::new(input, layers)
}

/// Convolutions described as `(out_channels, kernel, stride, padding)`, with ReLU after each and
/// 2×2 max-pooling between consecutive ones.
fn conv_stack(input: Shape, convs: &[(usize, usize, usize, usize)], rng: &mut ChaCha8Rng) -> Result<(Vec<Layer>, Shape)> {
    let pool = MaxPool2d { window: 2, stride: 2 };
    let mut layers = Vec::new();
    let mut shape = input;
    for (k, &(out, kernel, stride, padding)) in convs.iter().enumerate() {
        if k > 0 {
            shape = pool.output_shape(shape)?;
            layers.push(Layer::MaxPool(pool));
        }
        let c = Conv2d::new(shape.channels, out, kernel, stride, padding, rng);
        shape = c.output_shape(shape)?;
        layers.push(Layer::Conv(c));
        layers.push(Layer::Relu);
    }
    Ok((layers, shape))
}

pub fn build_conv_synnet(input: Shape, classes: usize, rng: &mut ChaCha8Rng) -> Result<Network> {
    let (mut layers, shape) = conv_stack(input, &[(1, 11, 1, 5), (1, 11, 1, 5)], rng)?;
    head(&mut layers, shape.len(), &[], classes, rng);
    Network::new(input, layers)
}

pub fn build_conv_lenet(input: Shape, classes: usize, rng: &mut ChaCha8Rng) -> Result<Network> {
    let (mut layers, shape) = conv_stack(input, &[(6, 5, 2, 2), (6, 5, 2, 2), (16, 5, 1, 2), (16, 5, 1, 2)], rng)?;
    head(&mut layers, shape.len(), &[120, 84], classes, rng);
    Network::new(input, layers)
}

/// Per morphological layer: neuron count and `(kind, count)` multiset.
pub fn morph_layer_summary(net: &Network) -> Vec<(usize, Vec<(NeuronKind, usize)>)> {
    net.layers()
        .iter()
        .filter_map(|l| match l {
            Layer::Morph(m) => Some((m.neurons().len(), m.kind_counts())),
            _ => None,
        })
        .collect()
}

pub fn describe(arch: Architecture, net: &Network) -> String {
    format!("{arch}\n{}", net.describe())
}
