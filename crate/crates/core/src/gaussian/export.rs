//! Binary ensemble files.
//!
//! Layout (all little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 8    | magic `b"RCPATHS\0"`          |
//! | 8      | 4    | format version (`u32`, = 1)   |
//! | 12     | 8    | path count `M` (`u64`)        |
//! | 20     | 8    | coordinates per path `N`      |
//! | 28     | 8    | seed (`u64`)                  |
//! | 36     | 8·M·N| row-major `f64` values        |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::sampling::PathEnsemble;
use crate::error::{Error, Result};

pub const ENSEMBLE_MAGIC: &[u8; 8] = b"RCPATHS\0";
pub const ENSEMBLE_VERSION: u32 = 1;

pub fn write_ensemble(path: impl AsRef<Path>, ens: &PathEnsemble) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(ENSEMBLE_MAGIC).map_err(io)?;
    w.write_all(&ENSEMBLE_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(ens.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(ens.dim() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&ens.seed().to_le_bytes()).map_err(io)?;
    for x in ens.as_slice() {
        w.write_all(&x.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_ensemble(path: impl AsRef<Path>) -> Result<PathEnsemble> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != ENSEMBLE_MAGIC {
        return Err(Error::Config(format!("{}: not an ensemble file", path.display())));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(io)?;
    let version = u32::from_le_bytes(b4);
    if version != ENSEMBLE_VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported ensemble version {version}",
            path.display()
        )));
    }
    let mut b8 = [0u8; 8];
    let mut next_u64 = |r: &mut BufReader<File>| -> Result<u64> {
        r.read_exact(&mut b8).map_err(io)?;
        Ok(u64::from_le_bytes(b8))
    };
    let m = next_u64(&mut r)? as usize;
    let n = next_u64(&mut r)? as usize;
    let seed = next_u64(&mut r)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io)?;
    if bytes.len() != 8 * m * n {
        return Err(Error::Dimension {
            expected: 8 * m * n,
            got: bytes.len(),
        });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    PathEnsemble::from_raw(data, m, n, seed, String::new())
}
