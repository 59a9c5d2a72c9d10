//! Training, evaluation and inspection built on the file formats.

use std::path::{Path, PathBuf};

use morphnet_core::arch;
use morphnet_core::data::SplitPart;
use morphnet_core::framework::dilate_se_for_reconstruction;
use morphnet_core::morphology::StructuringElement;
use morphnet_core::nn::{evaluate, train_with, EpochMetrics, Layer, LayerCache, Metrics, Network};
use morphnet_core::seed::sub_seed;
use morphnet_core::{Shape, Tensor};

use crate::checkpoint::Checkpoint;
use crate::config::{DatasetSource, ExperimentConfig};
use crate::dataset::{self, Dataset};
use crate::error::{AppError, AppResult};
use crate::pnm;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(serde::Serialize)]
struct MetricsRow {
    epoch: usize,
    train_loss: f64,
    train_acc: f64,
    val_acc: f64,
}

pub fn write_metrics(path: &Path, epochs: &[EpochMetrics]) -> AppResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| AppError::format(path, e.to_string()))?;
    for m in epochs {
        let row = MetricsRow { epoch: m.epoch, train_loss: m.train_loss, train_acc: m.train_accuracy, val_acc: m.val_accuracy };
        w.serialize(row).map_err(|e| AppError::format(path, e.to_string()))?;
    }
    w.flush().map_err(AppError::io(path))
}

/// Builds the configured network for `data` with the `init` sub-seed.
pub fn build_network(config: &ExperimentConfig, data: &Dataset) -> AppResult<Network> {
    let input = Shape::new(data.channels, config.image_size, config.image_size);
    let mut net = arch::build(config.architecture, input, data.classes.len(), sub_seed(config.train.seed, "init"))?;
    net.set_dilate_reconstruction_se(config.dilate_reconstruction_se);
    Ok(net)
}

/// Trains on an already loaded dataset.
pub fn train_on(config: &ExperimentConfig, data: &Dataset, on_epoch: impl FnMut(&EpochMetrics)) -> AppResult<(Checkpoint, Metrics)> {
    let mut net = build_network(config, data)?;
    let (tr, va, te) = (data.part(SplitPart::Train), data.part(SplitPart::Validation), data.part(SplitPart::Test));
    let metrics = train_with(&mut net, &tr, &va, &te, &config.train, on_epoch)?;
    Ok((Checkpoint::new(config.architecture, config, net), metrics))
}

pub struct TrainOutput {
    pub checkpoint: PathBuf,
    pub metrics_csv: PathBuf,
    pub metrics: Metrics,
}

/// Loads the data, trains, and writes the checkpoint and metrics CSV into `output_dir`.
pub fn run_training(config: &ExperimentConfig, on_epoch: impl FnMut(&EpochMetrics)) -> AppResult<TrainOutput> {
    let data = dataset::load(&config.dataset, config.train.seed, config.image_size)?;
    let (ckpt, metrics) = train_on(config, &data, on_epoch)?;
    std::fs::create_dir_all(&config.output_dir).map_err(AppError::io(&config.output_dir))?;
    let checkpoint = config.output_dir.join(CHECKPOINT_FILE);
    let metrics_csv = config.output_dir.join(METRICS_FILE);
    ckpt.save(&checkpoint)?;
    write_metrics(&metrics_csv, &metrics.epochs)?;
    Ok(TrainOutput { checkpoint, metrics_csv, metrics })
}

/// Accuracy (percent) of a checkpoint on one split; the dataset and seed default to the ones it
/// was trained with.
pub fn evaluate_checkpoint(path: &Path, dataset: Option<DatasetSource>, seed: Option<u64>, split: SplitPart) -> AppResult<f64> {
    let ckpt = Checkpoint::load(path)?;
    let exp = ckpt.experiment(path)?;
    let source = dataset.unwrap_or(exp.dataset);
    let data = dataset::load(&source, seed.unwrap_or(exp.train.seed), ckpt.input.height)?;
    if data.channels != ckpt.input.channels || data.classes.len() != ckpt.classes {
        return Err(AppError::Failed(format!(
            "checkpoint expects {} channels and {} classes; dataset {source} has {} and {}",
            ckpt.input.channels,
            ckpt.classes,
            data.channels,
            data.classes.len()
        )));
    }
    Ok(evaluate(&ckpt.network, &data.part(split))?)
}

fn morph_layer(net: &Network, layer: usize) -> AppResult<&morphnet_core::neuron::MorphLayer> {
    match net.layers().get(layer) {
        Some(Layer::Morph(m)) => Ok(m),
        Some(other) => Err(AppError::Usage(format!("layer {layer} is `{}`, not a morphological layer", other.describe()))),
        None => Err(AppError::Usage(format!("layer {layer} out of range (the network has {} layers)", net.layers().len()))),
    }
}

/// Structuring elements of one neuron: `(label, element)` per stage, plus the dilated element a
/// reconstruction's second stage actually applies.
pub fn neuron_elements(net: &Network, layer: usize, neuron: usize) -> AppResult<Vec<(String, StructuringElement)>> {
    let m = morph_layer(net, layer)?;
    let n = m
        .neurons()
        .get(neuron)
        .ok_or_else(|| AppError::Usage(format!("neuron {neuron} out of range (layer {layer} has {})", m.neurons().len())))?;
    let mut out = vec![("stage1".to_string(), n.structuring_element(1)), ("stage2".to_string(), n.structuring_element(2))];
    if n.kind().is_reconstruction() && n.dilate_reconstruction_se() {
        out.push(("stage2_dilated".to_string(), dilate_se_for_reconstruction(&n.structuring_element(2))));
    }
    Ok(out)
}

/// Writes `<prefix>_<label>.txt` (ASCII grid) and `.pgm` for every element; returns the paths.
pub fn write_elements(dir: &Path, prefix: &str, elements: &[(String, StructuringElement)]) -> AppResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(AppError::io(dir))?;
    let mut paths = Vec::new();
    for (label, se) in elements {
        let txt = dir.join(format!("{prefix}_{label}.txt"));
        std::fs::write(&txt, se.to_ascii()).map_err(AppError::io(&txt))?;
        let pgm = dir.join(format!("{prefix}_{label}.pgm"));
        let bytes = pnm::encode(&se.to_tensor()).map_err(|e| AppError::format(&pgm, e.to_string()))?;
        std::fs::write(&pgm, bytes).map_err(AppError::io(&pgm))?;
        paths.push(txt);
        paths.push(pgm);
    }
    Ok(paths)
}

/// Which intermediate map of a layer to export.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FeatureStage {
    /// The layer's output, one map per channel.
    Output,
    /// First morphological stage of every neuron, one map per input channel.
    Stage1,
    /// Second morphological stage of every neuron, one map per input channel.
    Stage2,
}

/// Feature maps of `layer` for `image`, named by neuron/channel.
pub fn feature_maps(net: &Network, image: &Tensor, layer: usize, stage: FeatureStage) -> AppResult<Vec<(String, Tensor)>> {
    if layer >= net.layers().len() {
        return Err(AppError::Usage(format!("layer {layer} out of range (the network has {} layers)", net.layers().len())));
    }
    let trace = net.forward(image)?;
    let planes = |t: &Tensor, prefix: &str| -> Vec<(String, Tensor)> {
        (0..t.shape().channels).map(|c| (format!("{prefix}c{c:03}"), t.channel(c))).collect()
    };
    match stage {
        FeatureStage::Output => Ok(planes(&trace.activations[layer + 1], "")),
        FeatureStage::Stage1 | FeatureStage::Stage2 => {
            morph_layer(net, layer)?;
            let LayerCache::Morph(caches) = &trace.caches[layer] else { unreachable!("morphological layers keep neuron caches") };
            Ok(caches
                .iter()
                .enumerate()
                .flat_map(|(n, c)| planes(if stage == FeatureStage::Stage1 { &c.stage1 } else { &c.stage2 }, &format!("n{n:03}_")))
                .collect())
        }
    }
}

/// Min-max normalizes to `[0, 1]` (constant maps become 0) and upsamples by nearest neighbour.
pub fn normalize_and_upsample(map: &Tensor, height: usize, width: usize) -> Tensor {
    let (lo, hi) = (map.min_value(), map.max_value());
    let s = map.shape();
    Tensor::from_fn(Shape::new(1, height, width), |_, i, j| {
        let v = map.get(0, i * s.height / height, j * s.width / width);
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.0
        }
    })
}

/// Loads `checkpoint`, runs `image` through it and writes one PGM per map into `dir`.
pub fn export_features(checkpoint: &Path, image: &Path, layer: usize, stage: FeatureStage, dir: &Path) -> AppResult<Vec<PathBuf>> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let x = dataset::load_image(image, ckpt.input.height)?;
    if x.shape() != ckpt.input {
        return Err(AppError::format(image, format!("image is {}, the network expects {}", x.shape(), ckpt.input)));
    }
    let maps = feature_maps(&ckpt.network, &x, layer, stage)?;
    std::fs::create_dir_all(dir).map_err(AppError::io(dir))?;
    let stage_name = match stage {
        FeatureStage::Output => "output",
        FeatureStage::Stage1 => "stage1",
        FeatureStage::Stage2 => "stage2",
    };
    let mut paths = Vec::with_capacity(maps.len());
    for (name, map) in maps {
        let path = dir.join(format!("layer{layer}_{stage_name}_{name}.pgm"));
        let img = normalize_and_upsample(&map, ckpt.input.height, ckpt.input.width);
        let bytes = pnm::encode(&img).map_err(|e| AppError::format(&path, e.to_string()))?;
        std::fs::write(&path, bytes).map_err(AppError::io(&path))?;
        paths.push(path);
    }
    Ok(paths)
}
