//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `LFCK`, format version `u32`, catalog
//! fingerprint `u64`, array count `u32`, then per array: name length `u16`,
//! UTF-8 name, rows `u32`, cols `u32`, `rows * cols` row-major `f64`.

use std::io::{Read, Write};
use std::path::Path;

use linkforge_core::action::catalog_fingerprint;

use crate::error::{PolicyError, Result};
use crate::graph::Tensor;
use crate::network::Policy;
use crate::params::ParamStore;

pub const MAGIC: &[u8; 4] = b"LFCK";
pub const VERSION: u32 = 1;

pub fn write_store(store: &ParamStore, fingerprint: u64, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&fingerprint.to_le_bytes())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for id in store.ids() {
        let name = store.name(id).as_bytes();
        let value = store.get(id);
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(value.nrows() as u32).to_le_bytes())?;
        w.write_all(&(value.ncols() as u32).to_le_bytes())?;
        for x in value.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| PolicyError::Checkpoint(format!("truncated file: {e}")))?;
    Ok(buf)
}

/// Named arrays of a checkpoint and the fingerprint it was written with.
pub fn read_arrays(r: &mut impl Read) -> Result<(u64, Vec<(String, Tensor)>)> {
    if &read_exact::<4>(r)? != MAGIC {
        return Err(PolicyError::Checkpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(read_exact(r)?);
    if version != VERSION {
        return Err(PolicyError::Checkpoint(format!("unsupported version {version}")));
    }
    let fingerprint = u64::from_le_bytes(read_exact(r)?);
    let count = u32::from_le_bytes(read_exact(r)?) as usize;
    let mut arrays = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = u16::from_le_bytes(read_exact(r)?) as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|e| PolicyError::Checkpoint(format!("truncated file: {e}")))?;
        let name = String::from_utf8(name).map_err(|_| PolicyError::Checkpoint("array name is not UTF-8".into()))?;
        let rows = u32::from_le_bytes(read_exact(r)?) as usize;
        let cols = u32::from_le_bytes(read_exact(r)?) as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(f64::from_le_bytes(read_exact(r)?));
        }
        let t = Tensor::from_shape_vec((rows, cols), data).expect("length matches shape");
        arrays.push((name, t));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(PolicyError::Checkpoint("trailing bytes after last array".into()));
    }
    Ok((fingerprint, arrays))
}

impl Policy {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_store(self.store(), catalog_fingerprint(), &mut buf).expect("writing to memory");
        buf
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let (fingerprint, arrays) = read_arrays(&mut bytes)?;
        let expected = catalog_fingerprint();
        if fingerprint != expected {
            return Err(PolicyError::Fingerprint {
                expected,
                found: fingerprint,
            });
        }
        let mut policy = Policy::new(0);
        if arrays.len() != policy.store().len() {
            return Err(PolicyError::Checkpoint(format!(
                "{} arrays, expected {}",
                arrays.len(),
                policy.store().len()
            )));
        }
        for (name, value) in arrays {
            if value.iter().any(|x| !x.is_finite()) {
                return Err(PolicyError::Checkpoint(format!("array {name} has non-finite entries")));
            }
            policy.store_mut().set(&name, value)?;
        }
        Ok(policy)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
