//! Datasets on disk: one subdirectory of PGM/PPM files per class plus an optional `manifest.csv`
//! with columns `id,file,label,split`.

use std::path::{Path, PathBuf};

use morphnet_core::data::{generate, resize_bilinear, split_60_20_20, Sample, Split, SplitPart, SyntheticKind};
use morphnet_core::Tensor;

use crate::config::DatasetSource;
use crate::error::{AppError, AppResult};
use crate::pnm;

pub const MANIFEST: &str = "manifest.csv";

#[derive(Clone, Debug)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub split: Split,
    /// Class names, indexed by label.
    pub classes: Vec<String>,
    pub channels: usize,
}

impl Dataset {
    pub fn part(&self, p: SplitPart) -> Vec<&Sample> {
        self.split.select(&self.samples, p)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ManifestRow {
    pub id: usize,
    pub file: String,
    pub label: usize,
    pub split: String,
}

pub fn class_dir(label: usize) -> String {
    format!("class_{label}")
}

/// The synthetic dataset for `seed` at `size × size`, split with the same seed.
pub fn synthetic(kind: SyntheticKind, seed: u64, size: usize) -> AppResult<Dataset> {
    let samples = generate(kind, seed, morphnet_core::data::SYNTHETIC_COUNT, size)?;
    let split = split_60_20_20(&samples, seed);
    Ok(Dataset { samples, split, classes: vec![class_dir(0), class_dir(1)], channels: 1 })
}

pub fn load(source: &DatasetSource, seed: u64, size: usize) -> AppResult<Dataset> {
    match source {
        DatasetSource::Synthetic(kind) => synthetic(*kind, seed, size),
        DatasetSource::Folder(dir) => load_image_folder(dir, size, seed),
    }
}

/// Writes every sample as `class_<label>/<id>.pgm` and the manifest.
pub fn write_folder(dir: &Path, samples: &[Sample], split: &Split) -> AppResult<Vec<ManifestRow>> {
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let sub = class_dir(s.label);
        let file = format!("{sub}/{:04}.pgm", s.id);
        let path = dir.join(&file);
        std::fs::create_dir_all(dir.join(&sub)).map_err(AppError::io(dir.join(&sub)))?;
        let bytes = pnm::encode(&s.image).map_err(|e| AppError::format(&path, e.to_string()))?;
        std::fs::write(&path, bytes).map_err(AppError::io(&path))?;
        let part = split.part_of(s.id).ok_or_else(|| AppError::Failed(format!("sample {} is in no split", s.id)))?;
        rows.push(ManifestRow { id: s.id, file, label: s.label, split: part.name().to_string() });
    }
    write_manifest(&dir.join(MANIFEST), &rows)?;
    Ok(rows)
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> AppResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| AppError::format(path, e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| AppError::format(path, e.to_string()))?;
    }
    w.flush().map_err(AppError::io(path))
}

pub fn read_manifest(path: &Path) -> AppResult<Vec<ManifestRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| AppError::format(path, e.to_string()))?;
    r.deserialize()
        .enumerate()
        .map(|(k, row)| row.map_err(|e| AppError::format(path, format!("row {}: {e}", k + 1))))
        .collect()
}

/// Decodes one PGM/PPM file and resizes it to `size × size`.
pub fn load_image(path: &Path, size: usize) -> AppResult<Tensor> {
    let bytes = std::fs::read(path).map_err(AppError::io(path))?;
    let img = pnm::decode(&bytes).map_err(|e| AppError::format(path, e.to_string()))?;
    let s = img.shape();
    if s.height == size && s.width == size {
        Ok(img)
    } else {
        Ok(resize_bilinear(&img, size, size)?)
    }
}

fn sorted_entries(dir: &Path, want_dirs: bool) -> AppResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(AppError::io(dir))? {
        let p = e.map_err(AppError::io(dir))?.path();
        let is_image = matches!(p.extension().and_then(|x| x.to_str()), Some("pgm" | "ppm"));
        if (want_dirs && p.is_dir()) || (!want_dirs && p.is_file() && is_image) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Loads a class-per-subdirectory folder. Labels follow the lexicographic order of the
/// subdirectories. With a manifest, ids, files and splits come from it; otherwise ids follow
/// (class, file name) order and the split is drawn from `seed`.
pub fn load_image_folder(dir: &Path, size: usize, seed: u64) -> AppResult<Dataset> {
    let class_dirs = sorted_entries(dir, true)?;
    let classes: Vec<String> = class_dirs.iter().map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned()).collect();
    let manifest = dir.join(MANIFEST);
    let (files, split): (Vec<(usize, PathBuf, usize)>, Option<Split>) = if manifest.is_file() {
        let rows = read_manifest(&manifest)?;
        let mut split = Split { train: Vec::new(), validation: Vec::new(), test: Vec::new() };
        let mut files = Vec::with_capacity(rows.len());
        for r in rows {
            let part: SplitPart = r.split.parse().map_err(|e: morphnet_core::Error| AppError::format(&manifest, format!("id {}: {e}", r.id)))?;
            match part {
                SplitPart::Train => split.train.push(r.id),
                SplitPart::Validation => split.validation.push(r.id),
                SplitPart::Test => split.test.push(r.id),
            }
            files.push((r.id, dir.join(&r.file), r.label));
        }
        for ids in [&mut split.train, &mut split.validation, &mut split.test] {
            ids.sort_unstable();
        }
        (files, Some(split))
    } else {
        let mut files = Vec::new();
        for (label, cd) in class_dirs.iter().enumerate() {
            for f in sorted_entries(cd, false)? {
                files.push((files.len(), f, label));
            }
        }
        (files, None)
    };
    if files.is_empty() {
        return Err(AppError::format(dir, "no PGM/PPM images found"));
    }
    let class_count = classes.len().max(files.iter().map(|f| f.2 + 1).max().unwrap_or(0));
    let mut samples = Vec::with_capacity(files.len());
    let mut channels = None;
    for (id, path, label) in files {
        let image = load_image(&path, size)?;
        let c = image.shape().channels;
        if *channels.get_or_insert(c) != c {
            return Err(AppError::format(&path, format!("{c} channels where earlier images have {}", channels.unwrap_or(c))));
        }
        samples.push(Sample { id, label, image });
    }
    samples.sort_by_key(|s| s.id);
    if samples.windows(2).any(|w| w[0].id == w[1].id) {
        return Err(AppError::format(&manifest, "duplicate sample ids"));
    }
    let split = split.unwrap_or_else(|| split_60_20_20(&samples, seed));
    let mut classes = classes;
    while classes.len() < class_count {
        classes.push(class_dir(classes.len()));
    }
    Ok(Dataset { samples, split, classes, channels: channels.unwrap_or(1) })
}
