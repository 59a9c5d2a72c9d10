use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use morphnet_core::arch::{self, Architecture};
use morphnet_core::data::{generate, split_60_20_20, SplitPart, SyntheticKind, IMAGE_SIZE, SYNTHETIC_COUNT};
use morphnet_core::nn::{gradcheck_with, offset_biases, GradcheckOptions};
use morphnet_core::{Shape, Tensor};

use crate::checkpoint::Checkpoint;
use crate::config::{DatasetSource, ExperimentConfig};
use crate::dataset;
use crate::error::{AppError, AppResult};
use crate::experiment::{self, FeatureStage};

/// Gradient checks fail at or above this relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Half-width of the random bias offset applied before a gradient check.
pub const BIAS_OFFSET: f64 = 0.05;

#[derive(Parser, Debug)]
#[command(name = "morphnet", version, about = "Deep morphological networks: data, training and inspection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic dataset as PGM files plus manifest.csv.
    GenData {
        #[arg(long)]
        kind: SyntheticKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SYNTHETIC_COUNT)]
        count: usize,
        #[arg(long, default_value_t = IMAGE_SIZE)]
        size: usize,
    },
    /// Train from a key=value config file; writes checkpoint.bin and metrics.csv.
    Train { config: PathBuf },
    /// Accuracy of a checkpoint on one split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Synthetic kind or folder; defaults to the training dataset.
        #[arg(long)]
        dataset: Option<String>,
        /// Defaults to the training seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "test")]
        split: SplitPart,
    },
    /// Dump the structuring elements learned by one neuron.
    InspectSe {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Network layer index.
        #[arg(long)]
        layer: usize,
        #[arg(long)]
        neuron: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the feature maps of one layer for an image as PGM files.
    ExportFeatures {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        layer: usize,
        #[arg(long, value_enum, default_value = "output")]
        stage: FeatureStage,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic and finite-difference gradients of every pointwise, dense and bias
    /// parameter of a freshly built network.
    Gradcheck {
        #[arg(long)]
        architecture: Architecture,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        /// Central-difference step.
        #[arg(long, default_value_t = GradcheckOptions::default().epsilon)]
        epsilon: f64,
        #[arg(long, hide = true)]
        corrupt: bool,
    },
}

pub fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::GenData { kind, seed, out, count, size } => {
            let samples = generate(kind, seed, count, size)?;
            let split = split_60_20_20(&samples, seed);
            let rows = dataset::write_folder(&out, &samples, &split)?;
            println!("images={} manifest={}", rows.len(), out.join(dataset::MANIFEST).display());
        }
        Command::Train { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let start = Instant::now();
            let out = experiment::run_training(&cfg, |m| {
                println!(
                    "epoch={} train_loss={:.6} train_accuracy={:.2} val_accuracy={:.2}",
                    m.epoch, m.train_loss, m.train_accuracy, m.val_accuracy
                )
            })?;
            println!("checkpoint={}", out.checkpoint.display());
            println!("metrics={}", out.metrics_csv.display());
            println!("train_seconds={:.1}", start.elapsed().as_secs_f64());
            println!("test_accuracy={:.2}", out.metrics.test_accuracy);
        }
        Command::Eval { checkpoint, dataset, seed, split } => {
            let base = std::env::current_dir().map_err(AppError::io("."))?;
            let source = dataset.map(|d| DatasetSource::parse(&d, &base));
            let acc = experiment::evaluate_checkpoint(&checkpoint, source, seed, split)?;
            println!("accuracy={acc:.2}");
        }
        Command::InspectSe { checkpoint, layer, neuron, out } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let elements = experiment::neuron_elements(&ckpt.network, layer, neuron)?;
            for (label, se) in &elements {
                println!("{label} {}x{} active={}", se.height(), se.width(), se.active_count());
                print!("{}", se.to_ascii());
            }
            for p in experiment::write_elements(&out, &format!("layer{layer}_neuron{neuron}"), &elements)? {
                println!("wrote={}", p.display());
            }
        }
        Command::ExportFeatures { checkpoint, image, layer, stage, out } => {
            for p in experiment::export_features(&checkpoint, &image, layer, stage, &out)? {
                println!("wrote={}", p.display());
            }
        }
        Command::Gradcheck { architecture, seed, size, channels, classes, epsilon, corrupt } => {
            let input = Shape::new(channels, size, size);
            let mut net = arch::build(architecture, input, classes, seed)?;
            offset_biases(&mut net, seed, BIAS_OFFSET);
            let x = Tensor::from_fn(input, |c, i, j| ((c * 7 + i * 13 + j * 29) % 31) as f64 / 31.0);
            let opts = GradcheckOptions { seed, epsilon, ..GradcheckOptions::default() };
            let report = gradcheck_with(&net, &x, seed as usize % classes, &opts, |g| {
                if corrupt {
                    for buf in g.iter_mut() {
                        for v in buf.iter_mut() {
                            *v = *v * 1.5 + 1e-3;
                        }
                    }
                }
            })?;
            for g in &report.groups {
                println!("group={} checked={} kinks={} max_rel_error={:.3e}", g.name, g.checked, g.kinks, g.max_rel_error);
            }
            println!("kinks={}", report.kinks());
            println!("max_rel_error={:.3e}", report.max_rel_error());
            if !report.passed(GRADCHECK_TOLERANCE) {
                println!("gradcheck=fail");
                return Err(AppError::Failed(format!("relative error {:.3e} >= {GRADCHECK_TOLERANCE:e}", report.max_rel_error())));
            }
            println!("gradcheck=pass");
        }
    }
    Ok(())
}
