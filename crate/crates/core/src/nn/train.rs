use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{argmax, softmax_cross_entropy};
use super::network::Network;
use super::optim::{sgd_step, TrainConfig};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::neuron::add_into;
use crate::seed::sub_seed;

/// Minibatch items are processed in fixed groups of this size, each accumulated sequentially,
/// and the group results are summed in order. The arithmetic is therefore the same whether the
/// groups run in parallel or not.
pub const GROUP: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub epochs: Vec<EpochMetrics>,
    pub test_accuracy: f64,
}

struct GroupResult {
    grads: Vec<Vec<f64>>,
    loss: f64,
    correct: usize,
}

fn group_gradients(net: &Network, items: &[&Sample]) -> Result<GroupResult> {
    let mut grads = net.zero_grads();
    let mut loss = 0.0;
    let mut correct = 0;
    for s in items {
        let trace = net.forward(&s.image)?;
        let logits = trace.logits();
        if argmax(logits) == s.label {
            correct += 1;
        }
        let (l, g) = softmax_cross_entropy(logits, s.label)?;
        loss += l;
        net.backward(&trace, &g, &mut grads)?;
    }
    Ok(GroupResult { grads, loss, correct })
}

#[cfg(feature = "std")]
fn map_groups<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "std"))]
fn map_groups<T>(n: usize, f: impl Fn(usize) -> Result<T>) -> Result<Vec<T>> {
    (0..n).map(f).collect()
}

/// Summed gradients, summed loss and number of correct predictions over `items`.
pub fn batch_gradients(net: &Network, items: &[&Sample]) -> Result<(Vec<Vec<f64>>, f64, usize)> {
    let groups: Vec<&[&Sample]> = items.chunks(GROUP).collect();
    let results = map_groups(groups.len(), |k| group_gradients(net, groups[k]))?;
    let mut iter = results.into_iter();
    let mut total = iter.next().unwrap_or_else(|| GroupResult { grads: net.zero_grads(), loss: 0.0, correct: 0 });
    for r in iter {
        for (d, s) in total.grads.iter_mut().zip(&r.grads) {
            add_into(d, s);
        }
        total.loss += r.loss;
        total.correct += r.correct;
    }
    Ok((total.grads, total.loss, total.correct))
}

/// Predicted class of every sample.
pub fn predict_all(net: &Network, samples: &[&Sample]) -> Result<Vec<usize>> {
    let groups: Vec<&[&Sample]> = samples.chunks(GROUP).collect();
    let per_group = map_groups(groups.len(), |k| {
        groups[k].iter().map(|s| net.predict(&s.image).map(|z| argmax(&z))).collect::<Result<Vec<_>>>()
    })?;
    Ok(per_group.into_iter().flatten().collect())
}

/// Percentage of samples whose arg-max logit equals the label.
pub fn evaluate(net: &Network, samples: &[&Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty set"));
    }
    let pred = predict_all(net, samples)?;
    let correct = pred.iter().zip(samples).filter(|(p, s)| **p == s.label).count();
    Ok(100.0 * correct as f64 / samples.len() as f64)
}

fn divergence_report(net: &Network, epoch: usize, batch: usize, loss: f64) -> String {
    let mut s = format!("epoch {epoch}, batch {batch}: mean loss {loss}\nparameter, count, min, max, non-finite\n");
    for p in net.params() {
        let min = p.value.iter().copied().fold(f64::INFINITY, f64::min);
        let max = p.value.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bad = p.value.iter().filter(|v| !v.is_finite()).count();
        s.push_str(&format!("{}, {}, {min}, {max}, {bad}\n", p.name(), p.len()));
    }
    s
}

/// Trains with minibatch SGD, calling `on_epoch` after every epoch.
///
/// Each epoch shuffles the training set with a generator seeded from `config.seed`, averages
/// gradients over every minibatch and takes one SGD step per minibatch. Training loss and
/// accuracy are measured on the minibatches as they are processed.
pub fn train_with(
    net: &mut Network,
    train: &[&Sample],
    val: &[&Sample],
    test: &[&Sample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Metrics> {
    config.validate()?;
    if train.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::invalid("train, validation and test sets must be non-empty"));
    }
    if let Some(s) = train.iter().chain(val).chain(test).find(|s| s.label >= net.classes()) {
        return Err(Error::OutOfRange(format!("sample {} has label {} but the network has {} classes", s.id, s.label, net.classes())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(config.seed, "shuffle"));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let items: Vec<&Sample> = idx.iter().map(|&k| train[k]).collect();
            let (grads, loss, ok) = batch_gradients(net, &items)?;
            if !loss.is_finite() {
                let mean = loss / items.len() as f64;
                return Err(Error::Diverged { epoch, batch, loss: mean, report: divergence_report(net, epoch, batch, mean) });
            }
            loss_sum += loss;
            correct += ok;
            let scale = 1.0 / items.len() as f64;
            let mut params = net.params_mut();
            for (p, g) in params.iter_mut().zip(grads) {
                for (d, v) in p.grad.iter_mut().zip(g) {
                    *d = v * scale;
                }
            }
            sgd_step(params, config);
        }
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: 100.0 * correct as f64 / train.len() as f64,
            val_accuracy: evaluate(net, val)?,
        };
        on_epoch(&m);
        epochs.push(m);
    }
    Ok(Metrics { epochs, test_accuracy: evaluate(net, test)? })
}

pub fn train(net: &mut Network, train: &[&Sample], val: &[&Sample], test: &[&Sample], config: &TrainConfig) -> Result<Metrics> {
    train_with(net, train, val, test, config, |_| {})
}

/// Mean loss of `net` on `samples`.
pub fn mean_loss(net: &Network, samples: &[&Sample]) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        total += softmax_cross_entropy(&net.predict(&s.image)?, s.label)?.0;
    }
    Ok(total / samples.len().max(1) as f64)
}
