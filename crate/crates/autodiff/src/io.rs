//! Checkpoint serialization.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "UNCK" | version u8 = 1
//! value section:  u32 record count, then records
//! state section:  u32 record count, then records (optimizer moments/steps)
//! meta section:   u32 byte length, opaque bytes owned by the caller
//! ```
//!
//! A record is `u32 name_len | name utf8 | u32 rank | u32 extents[rank] |
//! f32 values[product]`. Optimizer state reuses the record format with the
//! suffixes `#m1`, `#m2` and `#t` (step count, stored in the f32 payload and
//! exact below 2^24 steps). Values are always stored as 32-bit floats
//! regardless of the in-memory precision.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::narray::NArray;
use crate::paramtree::{Param, ParamTree};
use crate::scalar::Real;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"UNCK";
pub const CHECKPOINT_VERSION: u8 = 1;

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn write_record<T: Real>(w: &mut impl Write, name: &str, arr: &NArray<T>) -> Result<()> {
    write_u32(w, name.len() as u32)?;
    w.write_all(name.as_bytes())?;
    write_u32(w, arr.rank() as u32)?;
    for &e in arr.shape() {
        write_u32(w, e as u32)?;
    }
    for v in arr.data() {
        w.write_all(&(v.to_f64() as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_record<T: Real>(r: &mut impl Read) -> Result<(String, NArray<T>)> {
    let name_len = read_u32(r)? as usize;
    if name_len > 4096 {
        return Err(Error::Format(format!("record name length {name_len} is implausible")));
    }
    let mut name_buf = vec![0u8; name_len];
    r.read_exact(&mut name_buf)?;
    let name = String::from_utf8(name_buf)
        .map_err(|_| Error::Format("record name is not UTF-8".into()))?;
    let rank = read_u32(r)? as usize;
    if rank > 8 {
        return Err(Error::Format(format!("record rank {rank} is implausible")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u32(r)? as usize);
    }
    let count: usize = shape.iter().product();
    if count > (1 << 28) {
        return Err(Error::Format(format!("record of {count} elements is implausible")));
    }
    let mut data = Vec::with_capacity(count);
    let mut buf = [0u8; 4];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        data.push(T::from_f64(f32::from_le_bytes(buf) as f64));
    }
    Ok((name, NArray::from_vec(&shape, data)?))
}

/// Serialize a parameter tree plus opaque metadata.
pub fn write_checkpoint<T: Real>(
    w: &mut impl Write,
    params: &ParamTree<T>,
    meta: &[u8],
    include_opt_state: bool,
) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&[CHECKPOINT_VERSION])?;

    write_u32(w, params.len() as u32)?;
    for (name, p) in params.iter() {
        write_record(w, name, &p.value)?;
    }

    if include_opt_state {
        write_u32(w, (params.len() * 3) as u32)?;
        for (name, p) in params.iter() {
            write_record(w, &format!("{name}#m1"), &p.m1)?;
            write_record(w, &format!("{name}#m2"), &p.m2)?;
            write_record(w, &format!("{name}#t"), &NArray::scalar(T::from_f64(p.step as f64)))?;
        }
    } else {
        write_u32(w, 0)?;
    }

    write_u32(w, meta.len() as u32)?;
    w.write_all(meta)?;
    Ok(())
}

/// Deserialize a checkpoint into a parameter tree and its metadata bytes.
pub fn read_checkpoint<T: Real>(r: &mut impl Read) -> Result<(ParamTree<T>, Vec<u8>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "bad checkpoint magic {magic:?}, expected {CHECKPOINT_MAGIC:?}"
        )));
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version)?;
    if version[0] != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {}",
            version[0]
        )));
    }

    let mut tree = ParamTree::new();
    let count = read_u32(r)? as usize;
    for _ in 0..count {
        let (name, value) = read_record::<T>(r)?;
        tree.insert(&name, value)?;
    }

    let opt_count = read_u32(r)? as usize;
    let mut opt: BTreeMap<String, NArray<T>> = BTreeMap::new();
    for _ in 0..opt_count {
        let (name, value) = read_record::<T>(r)?;
        opt.insert(name, value);
    }
    if !opt.is_empty() {
        let names: Vec<String> = tree.names().cloned().collect();
        for name in names {
            let (m1, m2, t) = (
                opt.remove(&format!("{name}#m1")),
                opt.remove(&format!("{name}#m2")),
                opt.remove(&format!("{name}#t")),
            );
            if let (Some(m1), Some(m2), Some(t)) = (m1, m2, t) {
                let p: &mut Param<T> = tree.get_mut(&name)?;
                if m1.shape() != p.value.shape() || m2.shape() != p.value.shape() {
                    return Err(Error::Format(format!(
                        "optimizer state shape mismatch for '{name}'"
                    )));
                }
                p.m1 = m1;
                p.m2 = m2;
                p.step = t.item().to_f64() as u64;
            }
        }
    }

    let meta_len = read_u32(r)? as usize;
    let mut meta = vec![0u8; meta_len];
    r.read_exact(&mut meta)?;
    Ok((tree, meta))
}
