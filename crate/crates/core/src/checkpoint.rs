//! Binary snapshot of a policy ensemble.
//!
//! Layout, all integers little-endian:
//! magic `EPPOCKPT`, version `u32`, K `u32`, critic count `u32`,
//! activation code `u8`, policy layer count `u32` and sizes (`u32` each),
//! critic layer count and sizes, then every parameter tensor as raw `f64`
//! bits: sub-policies in order (`W0, b0, W1, b1, ...`), then the critic.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp};
use crate::policy::{PolicyEnsemble, SubPolicy};

pub const MAGIC: &[u8; 8] = b"EPPOCKPT";
pub const VERSION: u32 = 1;

/// Refuse layer widths or counts above this when loading untrusted files.
const MAX_DIM: u32 = 1 << 20;

fn io_err(e: std::io::Error) -> Error {
    Error::Checkpoint(e.to_string())
}

pub fn encode(ensemble: &PolicyEnsemble) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(ensemble.k() as u32).to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes());
    let policy = ensemble.sub_policies()[0].net();
    out.push(policy.activation().code());
    for sizes in [policy.sizes(), ensemble.value_net().sizes()] {
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for &s in sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
    }
    for t in ensemble.params() {
        for v in t.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn dim(&mut self, what: &str) -> Result<usize> {
        let v = self.u32()?;
        if v == 0 || v > MAX_DIM {
            return Err(Error::Checkpoint(format!("implausible {what} {v}")));
        }
        Ok(v as usize)
    }

    fn sizes(&mut self) -> Result<Vec<usize>> {
        let n = self.dim("layer count")?;
        (0..n).map(|_| self.dim("layer width")).collect()
    }

    fn mlp(&mut self, sizes: &[usize], activation: Activation) -> Result<Mlp> {
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            for shape in [vec![w[0], w[1]], vec![w[1]]] {
                let len = shape.iter().product::<usize>();
                let raw = self.take(len * 8)?;
                let values = raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect();
                params.push(Tensor::new(&shape, values)?.with_grad());
            }
        }
        Mlp::from_params(sizes, activation, params)
    }
}

pub fn decode(bytes: &[u8]) -> Result<PolicyEnsemble> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("not an ensemble checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let k = r.dim("sub-policy count")?;
    let critics = r.u32()?;
    if critics != 1 {
        return Err(Error::Checkpoint(format!("expected one critic, found {critics}")));
    }
    let activation = Activation::from_code(r.take(1)?[0]).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let policy_sizes = r.sizes()?;
    let value_sizes = r.sizes()?;
    let subs = (0..k)
        .map(|_| r.mlp(&policy_sizes, activation).map(SubPolicy::from_net))
        .collect::<Result<Vec<_>>>()?;
    let value = r.mlp(&value_sizes, activation)?;
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - r.pos
        )));
    }
    PolicyEnsemble::from_parts(subs, value)
}

pub fn write<W: Write>(ensemble: &PolicyEnsemble, out: &mut W) -> Result<()> {
    out.write_all(&encode(ensemble)).map_err(io_err)
}

pub fn read<R: Read>(input: &mut R) -> Result<PolicyEnsemble> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io_err)?;
    decode(&bytes)
}

/// Writes to a temporary sibling first, then renames over `path`.
pub fn save(ensemble: &PolicyEnsemble, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode(ensemble)).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn load(path: &Path) -> Result<PolicyEnsemble> {
    let bytes = fs::read(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    decode(&bytes)
}
