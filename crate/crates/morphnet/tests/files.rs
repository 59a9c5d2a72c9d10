use std::path::Path;

use morphnet::checkpoint::Checkpoint;
use morphnet::config::{DatasetSource, ExperimentConfig};
use morphnet::dataset::{self, load_image_folder, read_manifest, write_folder, ManifestRow};
use morphnet::{pnm, AppError};
use morphnet_core::arch::{build, Architecture};
use morphnet_core::data::{generate, split_60_20_20, SplitPart, SyntheticKind};
use morphnet_core::nn::Network;
use morphnet_core::{Shape, Tensor};

fn parse(text: &str) -> Result<ExperimentConfig, AppError> {
    ExperimentConfig::parse(text, Path::new("exp.cfg"), Path::new("/base"))
}

fn config_line(text: &str) -> usize {
    match parse(text) {
        Err(AppError::Config { line, .. }) => line,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn config_defaults_and_paths() {
    let c = parse("# synthetic\narchitecture = synnet\n\ndataset = squares\noutput_dir = runs/a\n").unwrap();
    assert_eq!(c.architecture, Architecture::SynNet);
    assert_eq!(c.dataset, DatasetSource::Synthetic(SyntheticKind::Squares));
    assert_eq!(c.output_dir, Path::new("/base/runs/a"));
    assert_eq!((c.train.learning_rate, c.train.weight_decay, c.train.momentum), (0.01, 0.0005, 0.9));
    assert_eq!((c.train.epochs, c.train.batch_size, c.train.seed), (10, 16, 0));
    assert_eq!(c.image_size, 224);
    assert!(c.dilate_reconstruction_se);

    let f = parse("architecture=morph-lenet\ndataset=data/ucm\noutput_dir=/abs\nseed=4\n").unwrap();
    assert_eq!(f.dataset, DatasetSource::Folder("/base/data/ucm".into()));
    assert_eq!(f.output_dir, Path::new("/abs"));
    assert_eq!(f.train.seed, 4);
}

#[test]
fn config_errors_carry_line_numbers() {
    let head = "architecture = synnet\ndataset = squares\noutput_dir = o\n";
    assert_eq!(config_line(&format!("{head}colour = red\n")), 4);
    assert_eq!(config_line(&format!("{head}\nseed = 1\nseed = 2\n")), 6);
    assert_eq!(config_line(&format!("{head}epochs\n")), 4);
    assert_eq!(config_line(&format!("{head}momentum =\n")), 4);
    assert_eq!(config_line(&format!("{head}epochs = ten\n")), 4);
    assert_eq!(config_line("architecture = resnet\ndataset = squares\noutput_dir = o\n"), 1);
    assert_eq!(config_line("dataset = squares\noutput_dir = o\n"), 0);
    assert_eq!(config_line(&format!("{head}batch_size = 0\n")), 0);
    assert_eq!(config_line(&format!("{head}image_size = 0\n")), 4);
    let e = parse(&format!("{head}colour = red\n")).unwrap_err();
    assert_eq!(e.exit_code(), 1);
    assert!(e.to_string().contains("exp.cfg:4"), "{e}");
}

#[test]
fn config_text_round_trips() {
    let c = parse("architecture = morph-alexnet\ndataset = imgs\noutput_dir = out\nseed = 9\nlearning_rate = 0.003\nmomentum = 0\nepochs = 3\nbatch_size = 8\nimage_size = 64\ndilate_reconstruction_se = false\n").unwrap();
    let back = ExperimentConfig::parse(&c.to_text(), Path::new("echo"), Path::new("/")).unwrap();
    assert_eq!(back, c);
}

fn perturbed(arch: Architecture, input: Shape, classes: usize) -> Network {
    let mut net = build(arch, input, classes, 11).unwrap();
    for (k, p) in net.params_mut().into_iter().enumerate() {
        for (i, v) in p.value.iter_mut().enumerate() {
            *v += ((k * 31 + i) % 17) as f64 * 1e-3 - 0.37;
        }
    }
    net
}

#[test]
fn checkpoint_round_trip_for_every_architecture() {
    let dir = tempfile::tempdir().unwrap();
    for (arch, input) in [
        (Architecture::SynNet, Shape::new(1, 24, 24)),
        (Architecture::MorphLeNet, Shape::new(3, 16, 16)),
        (Architecture::MorphAlexNet, Shape::new(3, 64, 64)),
        (Architecture::ClsLayer, Shape::new(1, 8, 8)),
        (Architecture::ConvSynNet, Shape::new(1, 32, 32)),
        (Architecture::ConvLeNet, Shape::new(3, 32, 32)),
    ] {
        let mut cfg = ExperimentConfig::new(arch, DatasetSource::Folder("/data".into()), "/out".into());
        cfg.image_size = input.height;
        cfg.dilate_reconstruction_se = arch != Architecture::MorphLeNet;
        let mut net = perturbed(arch, input, 3);
        net.set_dilate_reconstruction_se(cfg.dilate_reconstruction_se);
        let ckpt = Checkpoint::new(arch, &cfg, net);
        let path = dir.path().join(format!("{arch}.bin"));
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ckpt, "{arch}");
        assert_eq!(back.experiment(&path).unwrap(), cfg);
        let x = Tensor::from_fn(input, |c, i, j| ((c + 2 * i + 3 * j) % 7) as f64 / 7.0);
        assert_eq!(back.network.predict(&x).unwrap(), ckpt.network.predict(&x).unwrap());
    }
}

#[test]
fn malformed_checkpoints_are_rejected() {
    let cfg = ExperimentConfig::new(Architecture::SynNet, DatasetSource::Synthetic(SyntheticKind::Squares), "/o".into());
    let ckpt = Checkpoint::new(Architecture::SynNet, &cfg, build(Architecture::SynNet, Shape::new(1, 16, 16), 2, 0).unwrap());
    let bytes = ckpt.to_bytes();
    let p = Path::new("c.bin");
    let fails = |b: &[u8]| matches!(Checkpoint::from_bytes(b, p), Err(e) if e.exit_code() == 2);

    assert!(fails(b""));
    assert!(fails(b"NOTMORPH\x01\x00\x00\x00"));
    let mut v = bytes.clone();
    v[8] = 9;
    assert!(fails(&v), "version");
    for cut in [9, 20, bytes.len() / 2, bytes.len() - 1] {
        assert!(fails(&bytes[..cut]), "truncated at {cut}");
    }
    let mut v = bytes.clone();
    v.push(0);
    assert!(fails(&v), "trailing byte");
    let text = String::from_utf8_lossy(&bytes).into_owned();
    let at = text.find("network_classes = 2").unwrap() + "network_classes = ".len();
    let mut v = bytes.clone();
    v[at] = b'3';
    assert!(fails(&v), "class count disagrees with the stored parameters");
    let at = text.find("0.morph.0.bank1").unwrap();
    let mut v = bytes.clone();
    v[at] = b'9';
    assert!(fails(&v), "renamed parameter");
}

#[test]
fn folder_with_manifest_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let samples = generate(SyntheticKind::Rectangles, 5, 20, 16).unwrap();
    let split = split_60_20_20(&samples, 5);
    let rows = write_folder(dir.path(), &samples, &split).unwrap();
    assert_eq!(read_manifest(&dir.path().join(dataset::MANIFEST)).unwrap(), rows);
    assert_eq!(rows[3], ManifestRow { id: 3, file: format!("class_{}/0003.pgm", samples[3].label), label: samples[3].label, split: split.part_of(3).unwrap().name().into() });

    let ds = load_image_folder(dir.path(), 16, 999).unwrap();
    assert_eq!(ds.classes, vec!["class_0", "class_1"]);
    assert_eq!(ds.channels, 1);
    assert_eq!(ds.split, split, "the manifest split wins over the seed");
    assert_eq!(ds.samples, samples);
}

#[test]
fn folder_without_manifest_uses_sorted_order_and_resizes() {
    let dir = tempfile::tempdir().unwrap();
    for (class, files) in [("b_second", ["z.pgm", "a.pgm"]), ("a_first", ["m.pgm", "n.pgm"])] {
        std::fs::create_dir_all(dir.path().join(class)).unwrap();
        for (k, f) in files.iter().enumerate() {
            let level = if class == "a_first" { 0.2 } else { 0.8 } + 0.1 * k as f64;
            let img = Tensor::filled(Shape::new(1, 5, 7), level);
            std::fs::write(dir.path().join(class).join(f), pnm::encode(&img).unwrap()).unwrap();
        }
    }
    std::fs::write(dir.path().join("a_first/notes.txt"), "ignored").unwrap();
    let ds = load_image_folder(dir.path(), 12, 0).unwrap();
    assert_eq!(ds.classes, vec!["a_first", "b_second"]);
    let labels: Vec<usize> = ds.samples.iter().map(|s| s.label).collect();
    assert_eq!(labels, vec![0, 0, 1, 1]);
    // b_second/a.pgm (level 0.9) sorts before z.pgm (0.8)
    assert_eq!(ds.samples[2].image.get(0, 0, 0), (0.9f64 * 255.0).round() / 255.0);
    for s in &ds.samples {
        assert_eq!(s.image.shape(), Shape::new(1, 12, 12));
        let v = s.image.get(0, 0, 0);
        assert!(s.image.data().iter().all(|&x| (x - v).abs() < 1e-12), "constant image stays constant");
    }
    let total = ds.part(SplitPart::Train).len() + ds.part(SplitPart::Validation).len() + ds.part(SplitPart::Test).len();
    assert_eq!(total, 4);
}

#[test]
fn folder_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("c")).unwrap();
    std::fs::write(dir.path().join("c/bad.pgm"), b"P5\n4 4\n255\n\x00\x00").unwrap();
    let e = load_image_folder(dir.path(), 4, 0).unwrap_err();
    assert!(e.to_string().contains("bad.pgm") && e.to_string().contains("truncated"), "{e}");

    let empty = tempfile::tempdir().unwrap();
    assert!(load_image_folder(empty.path(), 4, 0).is_err());

    let mixed = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(mixed.path().join("c")).unwrap();
    std::fs::write(mixed.path().join("c/a.pgm"), pnm::encode(&Tensor::zeros(Shape::new(1, 2, 2))).unwrap()).unwrap();
    std::fs::write(mixed.path().join("c/b.ppm"), pnm::encode(&Tensor::zeros(Shape::new(3, 2, 2))).unwrap()).unwrap();
    assert!(load_image_folder(mixed.path(), 2, 0).unwrap_err().to_string().contains("channels"));
}
