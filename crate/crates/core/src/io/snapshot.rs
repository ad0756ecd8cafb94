//! Binary snapshots of `(u, b)` in physical space.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `HMHD` |
//! | 4 | format version, `u32` |
//! | 4 | spatial dimension `n`, `u32` |
//! | 4·n | points per axis, `u32` each |
//! | 4 | components per field, `u32` |
//! | 8 | time, `f64` |
//! | 8·2·m·N | `f64` samples of `u₁…u_m` then `b₁…b_m`, x fastest |

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::State;
use crate::spectral::{Grid, RealField};

pub const MAGIC: &[u8; 4] = b"HMHD";
pub const VERSION: u32 = 1;

/// Physical-space samples of a state; what is written is what is read.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub u: RealField,
    pub b: RealField,
}

pub fn header_len(n: usize) -> usize {
    4 + 4 + 4 + 4 * n + 4 + 8
}

impl Snapshot {
    pub fn from_state(state: &State) -> Self {
        Self { t: state.t, u: state.u.to_physical(), b: state.b.to_physical() }
    }

    pub fn to_state(&self) -> Result<State> {
        State::new(self.u.to_spectral(), self.b.to_spectral(), self.t)
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let g = self.grid();
        let m = self.u.m();
        let mut out = Vec::with_capacity(header_len(g.n()) + 16 * m * g.physical_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(g.n() as u32).to_le_bytes());
        for _ in 0..g.n() {
            out.extend_from_slice(&(g.dims() as u32).to_le_bytes());
        }
        out.extend_from_slice(&(m as u32).to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        for c in self.u.components().iter().chain(self.b.components()) {
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, not an HMHD snapshot".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("version {version}, expected {VERSION}")));
        }
        let n = r.u32()? as usize;
        if !(n == 2 || n == 3) {
            return Err(Error::Format(format!("dimension {n}")));
        }
        let dims: Vec<usize> = (0..n).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        if dims.iter().any(|&d| d != dims[0]) {
            return Err(Error::Format(format!("unequal axes {dims:?}")));
        }
        let grid = Grid::new(n, dims[0])?;
        let m = r.u32()? as usize;
        if !(m == 1 || m == 3) {
            return Err(Error::Format(format!("component count {m}")));
        }
        let t = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
        let len = grid.physical_len();
        let expected = 2 * m * len * 8;
        if bytes.len() - r.pos != expected {
            return Err(Error::Format(format!(
                "payload is {} bytes, expected {expected}",
                bytes.len() - r.pos
            )));
        }
        let mut comps: Vec<Vec<f64>> = (0..2 * m)
            .map(|_| {
                r.take(8 * len)
                    .unwrap()
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect()
            })
            .collect();
        let b = RealField::from_components(&grid, comps.split_off(m))?;
        let u = RealField::from_components(&grid, comps)?;
        Ok(Self { t, u, b })
    }

    /// Writes to a temporary sibling, then renames over `path`.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos + k;
        if end > self.bytes.len() {
            return Err(Error::Format(format!("truncated at byte {}", self.bytes.len())));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Write-temp-then-rename.
pub fn write_atomic(path: &Path, data: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Format(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(data)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
