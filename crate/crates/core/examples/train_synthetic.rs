//! Trains one architecture on a synthetic dataset and prints per-epoch metrics.
//!
//! `cargo run --release --example train_synthetic -- <architecture> <squares|rectangles> <seed> [epochs]`

use std::time::Instant;

use morphnet_core::arch::{self, Architecture};
use morphnet_core::data::{generate, split_60_20_20, SplitPart, SyntheticKind, IMAGE_SIZE, SYNTHETIC_COUNT};
use morphnet_core::nn::{train_with, TrainConfig};
use morphnet_core::seed::sub_seed;
use morphnet_core::Shape;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arch: Architecture = args.first().map_or("synnet", String::as_str).parse()?;
    let kind: SyntheticKind = args.get(1).map_or("squares", String::as_str).parse()?;
    let seed: u64 = args.get(2).map_or(Ok(0), |s| s.parse())?;
    let epochs: usize = args.get(3).map_or(Ok(10), |s| s.parse())?;

    let data = generate(kind, seed, SYNTHETIC_COUNT, IMAGE_SIZE)?;
    let split = split_60_20_20(&data, seed);
    let (train, val, test) =
        (split.select(&data, SplitPart::Train), split.select(&data, SplitPart::Validation), split.select(&data, SplitPart::Test));
    let mut net = arch::build(arch, Shape::new(1, IMAGE_SIZE, IMAGE_SIZE), 2, sub_seed(seed, "init"))?;
    let config = TrainConfig { epochs, seed, ..TrainConfig::default() };
    let start = Instant::now();
    let metrics = train_with(&mut net, &train, &val, &test, &config, |m| {
        println!(
            "epoch {} loss {:.4} train {:.2} val {:.2} ({:.1}s)",
            m.epoch,
            m.train_loss,
            m.train_accuracy,
            m.val_accuracy,
            start.elapsed().as_secs_f64()
        )
    })?;
    println!("test_accuracy={:.2}", metrics.test_accuracy);
    Ok(())
}
