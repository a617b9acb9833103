//! Checkpoint files: the autodiff record format plus a metadata section
//! carrying the network configuration and an opaque trainer blob. Saved via
//! temp-then-rename so interrupted writes never leave a partial file.

use std::fs;
use std::io::Write;
use std::path::Path;

use autodiff::{io as adio, ParamTree, Real};
use sha2::{Digest, Sha256};

use crate::config::NetConfig;
use crate::{ModelError, Result};

fn encode_meta(config: &NetConfig, trainer_meta: &[u8]) -> Vec<u8> {
    let cfg = config.to_toml().into_bytes();
    let mut out = Vec::with_capacity(8 + cfg.len() + trainer_meta.len());
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg);
    out.extend_from_slice(&(trainer_meta.len() as u32).to_le_bytes());
    out.extend_from_slice(trainer_meta);
    out
}

fn decode_meta(meta: &[u8]) -> Result<(NetConfig, Vec<u8>)> {
    let take_u32 = |b: &[u8], at: usize| -> Result<u32> {
        b.get(at..at + 4)
            .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
            .ok_or_else(|| ModelError::Config("checkpoint metadata truncated".into()))
    };
    let cfg_len = take_u32(meta, 0)? as usize;
    let cfg_bytes = meta
        .get(4..4 + cfg_len)
        .ok_or_else(|| ModelError::Config("checkpoint metadata truncated".into()))?;
    let cfg_text = std::str::from_utf8(cfg_bytes)
        .map_err(|_| ModelError::Config("checkpoint config is not UTF-8".into()))?;
    let config = NetConfig::from_toml(cfg_text)?;
    let tm_len = take_u32(meta, 4 + cfg_len)? as usize;
    let trainer = meta
        .get(8 + cfg_len..8 + cfg_len + tm_len)
        .ok_or_else(|| ModelError::Config("checkpoint metadata truncated".into()))?
        .to_vec();
    Ok((config, trainer))
}

pub fn to_bytes<T: Real>(
    config: &NetConfig,
    params: &ParamTree<T>,
    trainer_meta: &[u8],
    include_opt_state: bool,
) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    adio::write_checkpoint(
        &mut buf,
        params,
        &encode_meta(config, trainer_meta),
        include_opt_state,
    )?;
    Ok(buf)
}

pub fn from_bytes<T: Real>(bytes: &[u8]) -> Result<(NetConfig, ParamTree<T>, Vec<u8>)> {
    let (params, meta) = adio::read_checkpoint::<T>(&mut &bytes[..])?;
    let (config, trainer_meta) = decode_meta(&meta)?;
    config.validate()?;
    Ok((config, params, trainer_meta))
}

pub fn save<T: Real>(
    path: &Path,
    config: &NetConfig,
    params: &ParamTree<T>,
    trainer_meta: &[u8],
    include_opt_state: bool,
) -> Result<()> {
    let bytes = to_bytes(config, params, trainer_meta, include_opt_state)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load<T: Real>(path: &Path) -> Result<(NetConfig, ParamTree<T>, Vec<u8>)> {
    let bytes = fs::read(path)?;
    from_bytes(&bytes)
}

/// Content digest of a serialized checkpoint; both transport peers compare
/// this before agreeing to decode anything.
pub fn fingerprint_bytes(bytes: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().into()
}

pub fn fingerprint_file(path: &Path) -> Result<[u8; 32]> {
    Ok(fingerprint_bytes(&fs::read(path)?))
}
