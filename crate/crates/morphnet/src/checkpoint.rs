//! Checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"MORPHNET"  u32 version (1)
//! u32 n, n bytes  UTF-8 header: `key = value` lines (network keys, then the experiment config)
//! u32 count, then per parameter:
//!     u32 n, n bytes name   u8 kind (0 dense, 1 binarized)   u64 len   len × f64
//! ```

use std::path::Path;

use morphnet_core::arch::{self, Architecture};
use morphnet_core::nn::Network;
use morphnet_core::{ParamKind, Shape};

use crate::config::ExperimentConfig;
use crate::error::{AppError, AppResult};

pub const MAGIC: &[u8; 8] = b"MORPHNET";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub architecture: Architecture,
    pub input: Shape,
    pub classes: usize,
    /// Experiment configuration text the network was trained with.
    pub config: String,
    pub network: Network,
}

impl Checkpoint {
    pub fn new(architecture: Architecture, config: &ExperimentConfig, network: Network) -> Self {
        Checkpoint { architecture, input: network.input_shape(), classes: network.classes(), config: config.to_text(), network }
    }

    /// The stored experiment configuration.
    pub fn experiment(&self, path: &Path) -> AppResult<ExperimentConfig> {
        ExperimentConfig::parse(&self.config, path, Path::new("/"))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let header = format!(
            "network_architecture = {}\nnetwork_channels = {}\nnetwork_height = {}\nnetwork_width = {}\nnetwork_classes = {}\n{}",
            self.architecture, self.input.channels, self.input.height, self.input.width, self.classes, self.config
        );
        put_bytes(&mut out, header.as_bytes());
        let params = self.network.params();
        out.extend_from_slice(&(params.len() as u32).to_le_bytes());
        for p in params {
            put_bytes(&mut out, p.name().as_bytes());
            out.push(match p.kind() {
                ParamKind::Dense => 0,
                ParamKind::Binarized => 1,
            });
            out.extend_from_slice(&(p.len() as u64).to_le_bytes());
            for v in &p.value {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> AppResult<Self> {
        let bad = |m: String| AppError::format(path, format!("invalid checkpoint: {m}"));
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8).map_err(&bad)? != MAGIC {
            return Err(bad("missing MORPHNET magic".into()));
        }
        let version = r.u32().map_err(&bad)?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let header = String::from_utf8(r.blob().map_err(&bad)?.to_vec()).map_err(|_| bad("header is not UTF-8".into()))?;
        let mut net_keys = std::collections::HashMap::new();
        let mut config = String::new();
        for line in header.lines() {
            match line.split_once(" = ") {
                Some((k, v)) if k.starts_with("network_") => {
                    net_keys.insert(k.to_string(), v.to_string());
                }
                _ => {
                    config.push_str(line);
                    config.push('\n');
                }
            }
        }
        let key = |k: &str| net_keys.get(k).ok_or_else(|| bad(format!("header lacks `{k}`")));
        let num = |k: &str| key(k)?.parse::<usize>().map_err(|_| bad(format!("bad `{k}`")));
        let architecture: Architecture = key("network_architecture")?.parse().map_err(|e: morphnet_core::Error| bad(e.to_string()))?;
        let input = Shape::new(num("network_channels")?, num("network_height")?, num("network_width")?);
        let classes = num("network_classes")?;
        let exp = ExperimentConfig::parse(&config, path, Path::new("/"))?;
        if exp.architecture != architecture {
            return Err(bad(format!("network is {architecture} but the stored config says {}", exp.architecture)));
        }
        let mut network = arch::build(architecture, input, classes, 0).map_err(|e| bad(e.to_string()))?;
        network.set_dilate_reconstruction_se(exp.dilate_reconstruction_se);

        let count = r.u32().map_err(&bad)? as usize;
        let mut params = network.params_mut();
        if count != params.len() {
            return Err(bad(format!("{count} parameters stored, {} expected for {architecture}", params.len())));
        }
        for p in params.iter_mut() {
            let name = String::from_utf8_lossy(r.blob().map_err(&bad)?).into_owned();
            if name != p.name() {
                return Err(bad(format!("parameter `{name}` found where `{}` was expected", p.name())));
            }
            let kind = r.take(1).map_err(&bad)?[0];
            let want = match p.kind() {
                ParamKind::Dense => 0,
                ParamKind::Binarized => 1,
            };
            if kind != want {
                return Err(bad(format!("parameter `{name}` has kind {kind}, expected {want}")));
            }
            let len = r.u64().map_err(&bad)? as usize;
            if len != p.len() {
                return Err(bad(format!("parameter `{name}` has {len} values, expected {}", p.len())));
            }
            let raw = r.take(len.checked_mul(8).ok_or_else(|| bad("length overflow".into()))?).map_err(&bad)?;
            for (v, chunk) in p.value.iter_mut().zip(raw.chunks_exact(8)) {
                *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
            }
        }
        if r.pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint { architecture, input, classes, config, network })
    }

    pub fn save(&self, path: &Path) -> AppResult<()> {
        std::fs::write(path, self.to_bytes()).map_err(AppError::io(path))
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let bytes = std::fs::read(path).map_err(AppError::io(path))?;
        Self::from_bytes(&bytes, path)
    }
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_le_bytes());
    out.extend_from_slice(b);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn blob(&mut self) -> Result<&'a [u8], String> {
        let n = self.u32()? as usize;
        self.take(n)
    }
}
