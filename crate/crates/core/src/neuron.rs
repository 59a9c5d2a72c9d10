//! Morphological neurons and the morphological layer.
//!
//! Every neuron runs two framework stages on its input, optionally combines the result with the
//! input (top-hats subtract, reconstructions take a pixelwise max/min), and collapses the
//! per-channel maps into a single plane with a pointwise convolution.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{Error, Result};
use crate::framework::{
    binarized_cells, morph_bank_backward, morph_cells, morph_input_backward, reconstruction_cells, se_from_cells,
    Direction, FilterBank, Geometry, PoolTrace,
};
use crate::morphology::StructuringElement;
use crate::param::{ParamKind, Parameter};
use crate::tensor::{conv2d_pointwise, conv2d_pointwise_backward, Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NeuronKind {
    /// Erosion with one bank, then dilation with an independent bank.
    ComposedErosionFirst,
    /// Dilation with one bank, then erosion with an independent bank.
    ComposedDilationFirst,
    Opening,
    Closing,
    /// `y − opening(y)`.
    WhiteTopHat,
    /// `closing(y) − y`.
    BlackTopHat,
    /// `max(erosion(dilation(y)), y)`, the second stage using the dilated element.
    RecByErosion,
    /// `min(dilation(erosion(y)), y)`, the second stage using the dilated element.
    RecByDilation,
}

impl NeuronKind {
    pub const ALL: [NeuronKind; 8] = [
        NeuronKind::ComposedErosionFirst,
        NeuronKind::ComposedDilationFirst,
        NeuronKind::Opening,
        NeuronKind::Closing,
        NeuronKind::WhiteTopHat,
        NeuronKind::BlackTopHat,
        NeuronKind::RecByErosion,
        NeuronKind::RecByDilation,
    ];

    /// Whether both stages share one bank.
    pub fn is_tied(self) -> bool {
        !matches!(self, NeuronKind::ComposedErosionFirst | NeuronKind::ComposedDilationFirst)
    }

    /// Whether the neuron combines its stage output with its input, which needs equal shapes.
    pub fn has_skip(self) -> bool {
        matches!(
            self,
            NeuronKind::WhiteTopHat | NeuronKind::BlackTopHat | NeuronKind::RecByErosion | NeuronKind::RecByDilation
        )
    }

    pub fn is_reconstruction(self) -> bool {
        matches!(self, NeuronKind::RecByErosion | NeuronKind::RecByDilation)
    }

    pub fn directions(self) -> (Direction, Direction) {
        use Direction::{Dilation as D, Erosion as E};
        match self {
            NeuronKind::ComposedErosionFirst | NeuronKind::Opening | NeuronKind::WhiteTopHat => (E, D),
            NeuronKind::RecByDilation => (E, D),
            NeuronKind::ComposedDilationFirst | NeuronKind::Closing | NeuronKind::BlackTopHat => (D, E),
            NeuronKind::RecByErosion => (D, E),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NeuronKind::ComposedErosionFirst => "composed_erosion_first",
            NeuronKind::ComposedDilationFirst => "composed_dilation_first",
            NeuronKind::Opening => "opening",
            NeuronKind::Closing => "closing",
            NeuronKind::WhiteTopHat => "white_tophat",
            NeuronKind::BlackTopHat => "black_tophat",
            NeuronKind::RecByErosion => "rec_by_erosion",
            NeuronKind::RecByDilation => "rec_by_dilation",
        }
    }
}

impl core::str::FromStr for NeuronKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NeuronKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown neuron kind `{s}`")))
    }
}

/// Kind and per-stage geometry of one neuron.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NeuronSpec {
    pub kind: NeuronKind,
    pub stage1: Geometry,
    pub stage2: Geometry,
}

impl NeuronSpec {
    /// Both stages with the same kernel, stride and padding.
    pub fn uniform(kind: NeuronKind, kernel: usize, stride: usize, padding: usize) -> Self {
        let g = Geometry { kernel, stride, padding };
        NeuronSpec { kind, stage1: g, stage2: g }
    }

    /// Stages with a shared kernel side but their own stride and padding.
    pub fn staged(kind: NeuronKind, kernel: usize, strides: (usize, usize), paddings: (usize, usize)) -> Self {
        NeuronSpec {
            kind,
            stage1: Geometry { kernel, stride: strides.0, padding: paddings.0 },
            stage2: Geometry { kernel, stride: strides.1, padding: paddings.1 },
        }
    }

    fn validate(&self) -> Result<()> {
        for g in [self.stage1, self.stage2] {
            if g.kernel == 0 || g.stride == 0 {
                return Err(Error::invalid("neuron kernel and stride must be positive"));
            }
        }
        if self.kind.is_tied() && self.stage1.kernel != self.stage2.kernel {
            return Err(Error::invalid(format!("{} neurons share one bank; kernel sides differ", self.kind.name())));
        }
        if self.kind.has_skip() {
            for g in [self.stage1, self.stage2] {
                if g.stride != 1 || 2 * g.padding + 1 != g.kernel {
                    return Err(Error::invalid(format!(
                        "{} neurons need shape-preserving stages (stride 1, padding kernel/2, odd kernel); \
                         got kernel {}, stride {}, padding {}",
                        self.kind.name(),
                        g.kernel,
                        g.stride,
                        g.padding
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A trainable morphological neuron.
///
/// Parameters, in order: `bank1`, `bank2` (untied kinds only), `pointwise`, `bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct MorphNeuron {
    spec: NeuronSpec,
    in_channels: usize,
    dilate_reconstruction_se: bool,
    params: Vec<Parameter>,
}

/// Intermediate results of a neuron's forward pass.
#[derive(Clone, Debug)]
pub struct NeuronCache {
    pub stage1: Tensor,
    pub stage2: Tensor,
    /// Input to the pointwise convolution.
    pub core: Tensor,
    cells1: Vec<usize>,
    cells2: Vec<usize>,
    trace1: PoolTrace,
    trace2: PoolTrace,
    /// Trace of the undilated bank on the second-stage input (dilated reconstructions only).
    trace2_bank: Option<PoolTrace>,
}

impl MorphNeuron {
    /// New neuron with banks drawn from `U[0,1)` and pointwise weights from `U(±1/√c)`.
    pub fn new(spec: NeuronSpec, in_channels: usize, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        if in_channels == 0 {
            return Err(Error::invalid("a neuron needs at least one input channel"));
        }
        let mut params = Vec::with_capacity(4);
        let bank = |rng: &mut dyn rand::RngCore, s: usize| -> Vec<f64> { (0..s.pow(4)).map(|_| rng.gen::<f64>()).collect() };
        params.push(Parameter::new("bank1", ParamKind::Binarized, bank(rng, spec.stage1.kernel)));
        if !spec.kind.is_tied() {
            params.push(Parameter::new("bank2", ParamKind::Binarized, bank(rng, spec.stage2.kernel)));
        }
        let bound = 1.0 / libm::sqrt(in_channels as f64);
        let pw = (0..in_channels).map(|_| rng.gen_range(-bound..bound)).collect();
        params.push(Parameter::new("pointwise", ParamKind::Dense, pw));
        params.push(Parameter::new("bias", ParamKind::Dense, vec![0.0]));
        Ok(MorphNeuron { spec, in_channels, dilate_reconstruction_se: true, params })
    }

    pub fn spec(&self) -> &NeuronSpec {
        &self.spec
    }

    pub fn kind(&self) -> NeuronKind {
        self.spec.kind
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn dilate_reconstruction_se(&self) -> bool {
        self.dilate_reconstruction_se
    }

    /// Whether reconstruction neurons use the dilated element in their second stage.
    pub fn set_dilate_reconstruction_se(&mut self, on: bool) {
        self.dilate_reconstruction_se = on;
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    fn bank2_index(&self) -> usize {
        if self.spec.kind.is_tied() {
            0
        } else {
            1
        }
    }

    fn pointwise_index(&self) -> usize {
        self.params.len() - 2
    }

    /// Real weights of stage `stage` (1 or 2) as a bank.
    pub fn bank(&self, stage: usize) -> FilterBank {
        let (idx, g) = if stage == 1 { (0, self.spec.stage1) } else { (self.bank2_index(), self.spec.stage2) };
        FilterBank::new(g.kernel, g.stride, g.padding, self.params[idx].value.clone()).expect("bank length is checked at construction")
    }

    /// Replaces the real weights of stage `stage`; for tied kinds both stages change.
    pub fn set_bank(&mut self, stage: usize, weights: &[f64]) -> Result<()> {
        let idx = if stage == 1 { 0 } else { self.bank2_index() };
        let p = &mut self.params[idx];
        if weights.len() != p.len() {
            return Err(Error::shape("MorphNeuron::set_bank", format!("{} weights, {} expected", weights.len(), p.len())));
        }
        p.value.copy_from_slice(weights);
        Ok(())
    }

    pub fn set_pointwise(&mut self, weights: &[f64], bias: f64) -> Result<()> {
        let idx = self.pointwise_index();
        if weights.len() != self.in_channels {
            return Err(Error::shape("MorphNeuron::set_pointwise", format!("{} weights for {} channels", weights.len(), self.in_channels)));
        }
        self.params[idx].value.copy_from_slice(weights);
        self.params[idx + 1].value[0] = bias;
        Ok(())
    }

    /// Structuring element learned by stage `stage`'s bank.
    pub fn structuring_element(&self, stage: usize) -> StructuringElement {
        let b = self.bank(stage);
        se_from_cells(b.size(), &b.cells())
    }

    /// Element actually used by the second stage of a dilated reconstruction.
    pub fn effective_stage2_se(&self) -> StructuringElement {
        let se = self.structuring_element(2);
        if self.spec.kind.is_reconstruction() && self.dilate_reconstruction_se {
            crate::framework::dilate_se_for_reconstruction(&se)
        } else {
            se
        }
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        if input.channels != self.in_channels {
            return Err(Error::shape("MorphNeuron", format!("{} input channels, {} expected", input.channels, self.in_channels)));
        }
        let s1 = self.spec.stage1.output_shape(input)?;
        let s2 = self.spec.stage2.output_shape(s1)?;
        Ok(Shape::new(1, s2.height, s2.width))
    }

    fn dilated_stage2(&self) -> bool {
        self.spec.kind.is_reconstruction() && self.dilate_reconstruction_se
    }

    /// Same pooling winners in both caches and, for reconstructions, the same side of the final
    /// max/min at every pixel.
    pub fn same_branches(&self, a: &NeuronCache, b: &NeuronCache) -> bool {
        let side = |c: &NeuronCache| c.core.data().iter().zip(c.stage2.data()).map(|(k, s)| k == s).collect::<Vec<_>>();
        a.trace1 == b.trace1
            && a.trace2 == b.trace2
            && a.trace2_bank == b.trace2_bank
            && (!self.spec.kind.is_reconstruction() || side(a) == side(b))
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, NeuronCache)> {
        self.output_shape(input.shape())?;
        let (d1, d2) = self.spec.kind.directions();
        let g1 = self.spec.stage1;
        let g2 = self.spec.stage2;
        let cells1 = binarized_cells(g1.kernel, &self.params[0].value);
        let (stage1, trace1) = morph_cells(d1, g1, &cells1, input)?;

        let bank2_cells = binarized_cells(g2.kernel, &self.params[self.bank2_index()].value);
        let (cells2, geom2, trace2_bank) = if self.dilated_stage2() {
            let grown = Geometry { kernel: g2.kernel + 2, stride: g2.stride, padding: g2.padding + 1 };
            let (_, t) = morph_cells(d2, g2, &bank2_cells, &stage1)?;
            (reconstruction_cells(g2.kernel, &bank2_cells), grown, Some(t))
        } else {
            (bank2_cells, g2, None)
        };
        let (stage2, trace2) = morph_cells(d2, geom2, &cells2, &stage1)?;

        let core = match self.spec.kind {
            NeuronKind::WhiteTopHat => zip(input, &stage2, |y, o| y - o),
            NeuronKind::BlackTopHat => zip(&stage2, input, |c, y| c - y),
            NeuronKind::RecByErosion => zip(&stage2, input, f64::max),
            NeuronKind::RecByDilation => zip(&stage2, input, f64::min),
            _ => stage2.clone(),
        };
        let pi = self.pointwise_index();
        let out = conv2d_pointwise(&core, &self.params[pi].value, &self.params[pi + 1].value)?;
        Ok((out, NeuronCache { stage1, stage2, core, cells1, cells2, trace1, trace2, trace2_bank }))
    }

    /// Backpropagates `grad_out` (1×h×w), adding parameter gradients to `grads` (one buffer per
    /// parameter, in parameter order) and returning the gradient with respect to `input`.
    pub fn backward(&self, input: &Tensor, cache: &NeuronCache, grad_out: &Tensor, grads: &mut [Vec<f64>]) -> Result<Tensor> {
        let pi = self.pointwise_index();
        let (g_core, gw, gb) = conv2d_pointwise_backward(&cache.core, &self.params[pi].value, grad_out)?;
        add_into(&mut grads[pi], &gw);
        add_into(&mut grads[pi + 1], &gb);

        let mut grad_input = Tensor::zeros(input.shape());
        let g_stage2 = match self.spec.kind {
            NeuronKind::WhiteTopHat => {
                add_into(grad_input.data_mut(), g_core.data());
                g_core.map(|g| -g)
            }
            NeuronKind::BlackTopHat => {
                for (d, &g) in grad_input.data_mut().iter_mut().zip(g_core.data()) {
                    *d -= g;
                }
                g_core
            }
            NeuronKind::RecByErosion | NeuronKind::RecByDilation => {
                let take_stage = |s: f64, y: f64| {
                    if self.spec.kind == NeuronKind::RecByErosion {
                        s > y
                    } else {
                        s < y
                    }
                };
                let mut gs = Tensor::zeros(g_core.shape());
                let (gsd, gid) = (gs.data_mut(), grad_input.data_mut());
                for k in 0..gsd.len() {
                    let g = g_core.data()[k];
                    if take_stage(cache.stage2.data()[k], input.data()[k]) {
                        gsd[k] = g;
                    } else {
                        gid[k] += g;
                    }
                }
                gs
            }
            _ => g_core,
        };

        let g1 = self.spec.stage1;
        let g2 = self.spec.stage2;
        let b2 = self.bank2_index();
        let mut g_stage1 = Tensor::zeros(cache.stage1.shape());
        match &cache.trace2_bank {
            Some(bank_trace) => {
                let grown = Geometry { kernel: g2.kernel + 2, stride: g2.stride, padding: g2.padding + 1 };
                morph_input_backward(grown, &cache.cells2, &cache.trace2, &g_stage2, &mut g_stage1);
                morph_bank_backward(g2, &cache.stage1, bank_trace, &g_stage2, &mut grads[b2]);
            }
            None => {
                morph_input_backward(g2, &cache.cells2, &cache.trace2, &g_stage2, &mut g_stage1);
                morph_bank_backward(g2, &cache.stage1, &cache.trace2, &g_stage2, &mut grads[b2]);
            }
        }
        morph_input_backward(g1, &cache.cells1, &cache.trace1, &g_stage1, &mut grad_input);
        morph_bank_backward(g1, input, &cache.trace1, &g_stage1, &mut grads[0]);
        Ok(grad_input)
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let mut out = a.clone();
    for (o, &v) in out.data_mut().iter_mut().zip(b.data()) {
        *o = f(*o, v);
    }
    out
}

pub(crate) fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// A set of neurons applied to the same input; output channel `n` is neuron `n`'s plane.
#[derive(Clone, Debug, PartialEq)]
pub struct MorphLayer {
    neurons: Vec<MorphNeuron>,
    input: Shape,
    output: Shape,
}

impl MorphLayer {
    pub fn new(specs: &[NeuronSpec], input: Shape, rng: &mut impl Rng) -> Result<Self> {
        let neurons = specs
            .iter()
            .map(|s| MorphNeuron::new(*s, input.channels, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::from_neurons(neurons, input)
    }

    pub fn from_neurons(neurons: Vec<MorphNeuron>, input: Shape) -> Result<Self> {
        let first = neurons.first().ok_or_else(|| Error::invalid("a morphological layer needs at least one neuron"))?;
        let plane = first.output_shape(input)?;
        for (k, n) in neurons.iter().enumerate() {
            let s = n.output_shape(input)?;
            if s != plane {
                return Err(Error::shape(
                    "MorphLayer",
                    format!("neuron {k} outputs {}x{}, neuron 0 outputs {}x{}", s.height, s.width, plane.height, plane.width),
                ));
            }
        }
        let output = Shape::new(neurons.len(), plane.height, plane.width);
        Ok(MorphLayer { neurons, input, output })
    }

    pub fn neurons(&self) -> &[MorphNeuron] {
        &self.neurons
    }

    pub fn neurons_mut(&mut self) -> &mut [MorphNeuron] {
        &mut self.neurons
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shape(&self) -> Shape {
        self.output
    }

    pub fn set_dilate_reconstruction_se(&mut self, on: bool) {
        self.neurons.iter_mut().for_each(|n| n.set_dilate_reconstruction_se(on));
    }

    pub fn kind_counts(&self) -> Vec<(NeuronKind, usize)> {
        NeuronKind::ALL
            .into_iter()
            .map(|k| (k, self.neurons.iter().filter(|n| n.kind() == k).count()))
            .filter(|&(_, c)| c > 0)
            .collect()
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Vec<NeuronCache>)> {
        let mut planes = Vec::with_capacity(self.neurons.len());
        let mut caches = Vec::with_capacity(self.neurons.len());
        for n in &self.neurons {
            let (y, c) = n.forward(input)?;
            planes.push(y);
            caches.push(c);
        }
        Ok((Tensor::concat_channels(&planes)?, caches))
    }

    /// `grads` holds one buffer per parameter of every neuron, neuron by neuron.
    pub fn backward(&self, input: &Tensor, caches: &[NeuronCache], grad_out: &Tensor, grads: &mut [Vec<f64>]) -> Result<Tensor> {
        let mut grad_input = Tensor::zeros(input.shape());
        let mut offset = 0;
        for (k, n) in self.neurons.iter().enumerate() {
            let np = n.params().len();
            let g = grad_out.channel(k);
            let gi = n.backward(input, &caches[k], &g, &mut grads[offset..offset + np])?;
            add_into(grad_input.data_mut(), gi.data());
            offset += np;
        }
        Ok(grad_input)
    }

    pub fn describe(&self) -> String {
        let kinds: Vec<String> = self.kind_counts().iter().map(|(k, c)| format!("{c}x{}", k.name())).collect();
        format!("morph {} -> {} [{}]", self.input, self.output, kinds.join(", "))
    }
}
