use alloc::string::String;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::softmax_cross_entropy;
use super::network::Network;
use crate::error::Result;
use crate::param::ParamKind;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradcheckOptions {
    /// First central-difference step.
    pub epsilon: f64,
    /// Smaller steps tried, each a tenth of the previous, when a step switches a branch.
    pub refinements: usize,
    /// Groups with more entries are checked on this many coordinates drawn with `seed`.
    pub max_coords: usize,
    /// Lower bound of the relative-error denominator.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions { epsilon: 1e-5, refinements: 2, max_coords: 32, floor: 1e-6, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupCheck {
    pub name: String,
    pub checked: usize,
    /// Coordinates left out because every step switched a branch.
    pub kinks: usize,
    /// Over the coordinates that were compared.
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub groups: Vec<GroupCheck>,
}

impl GradcheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }

    pub fn kinks(&self) -> usize {
        self.groups.iter().map(|g| g.kinks).sum()
    }

    /// Every compared coordinate is within `tolerance` and kinks are a minority.
    pub fn passed(&self, tolerance: f64) -> bool {
        let compared: usize = self.groups.iter().map(|g| g.checked).sum();
        self.kinks() < compared && self.groups.iter().all(|g| g.max_rel_error < tolerance)
    }
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Adds a seeded offset from `[-scale, scale)` to every bias. Fresh networks have zero biases,
/// which leaves flat regions exactly level with the zero padding of the next min/max pooling and
/// ReLU inputs exactly at zero, i.e. on kinks where central differences are meaningless.
pub fn offset_biases(net: &mut Network, seed: u64, scale: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in net.params_mut() {
        if p.kind() == ParamKind::Dense && p.name().ends_with("bias") {
            for v in p.value.iter_mut() {
                *v += rng.gen_range(-scale..scale);
            }
        }
    }
}

/// Compares backpropagated gradients of the cross-entropy loss with central differences for
/// every dense (non-binarized) parameter group. Min/max pooling and ReLUs make the loss
/// piecewise smooth, so a step that flips any of their branches is shrunk before the coordinate
/// is given up as a kink.
pub fn gradcheck(net: &Network, input: &Tensor, target: usize, opts: &GradcheckOptions) -> Result<GradcheckReport> {
    gradcheck_with(net, input, target, opts, |_| {})
}

/// As [`gradcheck`], with `tamper` applied to the analytic gradients before comparison.
pub fn gradcheck_with(
    net: &Network,
    input: &Tensor,
    target: usize,
    opts: &GradcheckOptions,
    tamper: impl Fn(&mut [Vec<f64>]),
) -> Result<GradcheckReport> {
    let trace = net.forward(input)?;
    let (_, g) = softmax_cross_entropy(trace.logits(), target)?;
    let mut grads = net.zero_grads();
    net.backward(&trace, &g, &mut grads)?;
    tamper(&mut grads);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = net.clone();
    let mut groups = Vec::new();
    let kinds: Vec<(String, ParamKind, usize)> =
        net.params().iter().map(|p| (String::from(p.name()), p.kind(), p.len())).collect();
    for (gi, (name, kind, len)) in kinds.into_iter().enumerate() {
        if kind != ParamKind::Dense {
            continue;
        }
        let coords: Vec<usize> = if len <= opts.max_coords {
            (0..len).collect()
        } else {
            let mut c = rand::seq::index::sample(&mut rng, len, opts.max_coords).into_vec();
            c.sort_unstable();
            c
        };
        let mut worst: f64 = 0.0;
        let mut kinks = 0;
        for &k in &coords {
            let orig = probe.params()[gi].value[k];
            let mut eps = opts.epsilon;
            let mut numeric = None;
            for _ in 0..=opts.refinements {
                probe.params_mut()[gi].value[k] = orig + eps;
                let up = probe.forward(input)?;
                probe.params_mut()[gi].value[k] = orig - eps;
                let down = probe.forward(input)?;
                probe.params_mut()[gi].value[k] = orig;
                if net.same_branches(&trace, &up) && net.same_branches(&trace, &down) {
                    let (lu, ld) = (softmax_cross_entropy(up.logits(), target)?.0, softmax_cross_entropy(down.logits(), target)?.0);
                    numeric = Some((lu - ld) / (2.0 * eps));
                    break;
                }
                eps /= 10.0;
            }
            match numeric {
                Some(n) => worst = worst.max(relative_error(grads[gi][k], n, opts.floor)),
                None => kinks += 1,
            }
        }
        groups.push(GroupCheck { name, checked: coords.len() - kinks, kinks, max_rel_error: worst });
    }
    Ok(GradcheckReport { groups })
}
