//! Checkpoint file: magic, version, length-prefixed JSON model config,
//! vocabulary hash, parameter count, then little-endian f32 parameters in
//! layout order.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use union_core::model::{ModelConfig, ModelState};
use union_core::tokenizer::Vocab;

pub const MAGIC: &[u8; 8] = b"UNIONCKP";
pub const VERSION: u32 = 1;

pub fn encode(state: &ModelState<f32>) -> Result<Vec<u8>> {
    let config = serde_json::to_vec(&state.config)?;
    let Ok(config_len) = u32::try_from(config.len()) else {
        bail!("model config too large for a checkpoint header");
    };
    let mut out = Vec::with_capacity(40 + config.len() + 4 * state.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&config_len.to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&state.vocab_hash.unwrap_or(0).to_le_bytes());
    out.extend_from_slice(&(state.params.len() as u64).to_le_bytes());
    for p in &state.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        ensure!(self.bytes.len() >= n, "checkpoint truncated while reading {what}");
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Parses a checkpoint. With `vocab` given, the stored vocabulary hash must
/// match it.
pub fn decode(bytes: &[u8], vocab: Option<&Vocab>) -> Result<ModelState<f32>> {
    let mut c = Cursor { bytes };
    ensure!(c.take(MAGIC.len(), "magic")? == MAGIC, "not a checkpoint file");
    let version = c.u32("version")?;
    ensure!(version == VERSION, "unsupported checkpoint version {version}");
    let len = c.u32("config length")? as usize;
    let config: ModelConfig = serde_json::from_slice(c.take(len, "config")?).context("checkpoint config")?;
    config.validate()?;
    let hash = c.u64("vocabulary hash")?;
    let count = c.u64("parameter count")? as usize;
    let body = c.take(count.checked_mul(4).context("parameter count overflow")?, "parameters")?;
    ensure!(c.bytes.is_empty(), "{} trailing bytes after parameters", c.bytes.len());
    let params: Vec<f32> = body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    let state = ModelState {
        config,
        params,
        vocab_hash: (hash != 0).then_some(hash),
    };
    ensure!(state.layout().total == count, "parameter count {count} does not match the config");
    ensure!(state.all_finite(), "checkpoint holds non-finite parameters");
    if let Some(v) = vocab {
        state.check_vocab(v).context("checkpoint was trained with a different vocabulary")?;
    }
    Ok(state)
}

pub fn save(state: &ModelState<f32>, path: &Path) -> Result<()> {
    fs::write(path, encode(state)?).with_context(|| format!("writing {}", path.display()))
}

pub fn load(path: &Path, vocab: Option<&Vocab>) -> Result<ModelState<f32>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes, vocab).with_context(|| format!("loading {}", path.display()))
}

/// Bytes preceding the parameter block.
pub fn header_len(state: &ModelState<f32>) -> Result<usize> {
    Ok(MAGIC.len() + 4 + 4 + serde_json::to_vec(&state.config)?.len() + 8 + 8)
}
