//! Flat `key = value` experiment files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key | default |
//! |-----|---------|
//! | `architecture` | required |
//! | `dataset` | required: `squares`, `rectangles` or a folder path |
//! | `output_dir` | required |
//! | `seed` | 0 |
//! | `learning_rate` | 0.01 |
//! | `weight_decay` | 0.0005 |
//! | `momentum` | 0.9 |
//! | `epochs` | 10 |
//! | `batch_size` | 16 |
//! | `image_size` | 224 |
//! | `dilate_reconstruction_se` | true |
//!
//! Relative paths are resolved against the directory holding the file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use morphnet_core::arch::Architecture;
use morphnet_core::data::SyntheticKind;
use morphnet_core::nn::TrainConfig;

use crate::error::{AppError, AppResult};

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Synthetic(SyntheticKind),
    Folder(PathBuf),
}

impl DatasetSource {
    /// Synthetic kind names win over folders of the same name.
    pub fn parse(value: &str, base: &Path) -> Self {
        match value.parse::<SyntheticKind>() {
            Ok(k) => DatasetSource::Synthetic(k),
            Err(_) => DatasetSource::Folder(base.join(value)),
        }
    }
}

impl std::fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DatasetSource::Synthetic(k) => f.write_str(k.name()),
            DatasetSource::Folder(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub architecture: Architecture,
    pub dataset: DatasetSource,
    pub output_dir: PathBuf,
    pub train: TrainConfig,
    pub image_size: usize,
    pub dilate_reconstruction_se: bool,
}

const KEYS: [&str; 11] = [
    "architecture",
    "dataset",
    "output_dir",
    "seed",
    "learning_rate",
    "weight_decay",
    "momentum",
    "epochs",
    "batch_size",
    "image_size",
    "dilate_reconstruction_se",
];

impl ExperimentConfig {
    pub fn new(architecture: Architecture, dataset: DatasetSource, output_dir: PathBuf) -> Self {
        ExperimentConfig {
            architecture,
            dataset,
            output_dir,
            train: TrainConfig::default(),
            image_size: morphnet_core::data::IMAGE_SIZE,
            dilate_reconstruction_se: true,
        }
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(AppError::io(path))?;
        let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let base = std::path::absolute(parent).map_err(AppError::io(parent))?;
        Self::parse(&text, path, &base)
    }

    /// Parses `text`; `path` only labels errors and `base` anchors relative paths.
    pub fn parse(text: &str, path: &Path, base: &Path) -> AppResult<Self> {
        let err = |line: usize, message: String| AppError::Config { path: path.to_path_buf(), line, message };
        let mut seen: Vec<(&str, &str, usize)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err(n + 1, format!("expected `key = value`, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(err(n + 1, format!("unknown key `{k}` (known keys: {})", KEYS.join(", "))));
            }
            if let Some(&(_, _, first)) = seen.iter().find(|e| e.0 == k) {
                return Err(err(n + 1, format!("`{k}` already set on line {first}")));
            }
            if v.is_empty() {
                return Err(err(n + 1, format!("`{k}` has no value")));
            }
            seen.push((k, v, n + 1));
        }
        let get = |k: &str| seen.iter().find(|e| e.0 == k).map(|e| (e.1, e.2));
        fn value<T: FromStr>(k: &str, entry: Option<(&str, usize)>, err: &dyn Fn(usize, String) -> AppError) -> AppResult<Option<T>>
        where
            T::Err: std::fmt::Display,
        {
            entry.map(|(v, line)| v.parse::<T>().map_err(|e| err(line, format!("bad `{k}` value `{v}`: {e}")))).transpose()
        }
        let required = |k: &str| get(k).ok_or_else(|| err(0, format!("missing required key `{k}`")));

        let (arch, line) = required("architecture")?;
        let architecture = arch.parse::<Architecture>().map_err(|e| err(line, e.to_string()))?;
        let dataset = DatasetSource::parse(required("dataset")?.0, base);
        let output_dir = base.join(required("output_dir")?.0);
        let mut c = ExperimentConfig::new(architecture, dataset, output_dir);
        let t = &mut c.train;
        if let Some(v) = value("seed", get("seed"), &err)? {
            t.seed = v;
        }
        if let Some(v) = value("learning_rate", get("learning_rate"), &err)? {
            t.learning_rate = v;
        }
        if let Some(v) = value("weight_decay", get("weight_decay"), &err)? {
            t.weight_decay = v;
        }
        if let Some(v) = value("momentum", get("momentum"), &err)? {
            t.momentum = v;
        }
        if let Some(v) = value("epochs", get("epochs"), &err)? {
            t.epochs = v;
        }
        if let Some(v) = value("batch_size", get("batch_size"), &err)? {
            t.batch_size = v;
        }
        if let Some(v) = value("image_size", get("image_size"), &err)? {
            c.image_size = v;
        }
        if let Some(v) = value("dilate_reconstruction_se", get("dilate_reconstruction_se"), &err)? {
            c.dilate_reconstruction_se = v;
        }
        if let Err(e) = c.train.validate() {
            return Err(err(0, e.to_string()));
        }
        if c.image_size == 0 {
            return Err(err(get("image_size").map_or(0, |e| e.1), "image_size must be positive".into()));
        }
        Ok(c)
    }

    /// Canonical text form; parsing it back (with `/` as base) yields the same configuration.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let _ = writeln!(s, "architecture = {}", self.architecture);
        let _ = writeln!(s, "dataset = {}", self.dataset);
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(s, "seed = {}", t.seed);
        let _ = writeln!(s, "learning_rate = {:?}", t.learning_rate);
        let _ = writeln!(s, "weight_decay = {:?}", t.weight_decay);
        let _ = writeln!(s, "momentum = {:?}", t.momentum);
        let _ = writeln!(s, "epochs = {}", t.epochs);
        let _ = writeln!(s, "batch_size = {}", t.batch_size);
        let _ = writeln!(s, "image_size = {}", self.image_size);
        let _ = writeln!(s, "dilate_reconstruction_se = {}", self.dilate_reconstruction_se);
        s
    }
}
