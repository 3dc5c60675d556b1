//! Binary container for complex arrays, kernel caches and path files.
//!
//! Layout: `b"NAHM"`, `u32` version, four `u64` dimensions
//! `(n_t, fourier_cut, rank, count)`, then `rank·count` complex values as
//! little-endian `(re, im)` `f64` pairs. Metadata lives in JSON sidecars.

use crate::dirac::KernelResult;
use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::grid::{Discretization, Twist, Weight};
use crate::linalg::C64;
use crate::path::{ConnectionPath, PathHeader, M2};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"NAHM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    /// `(n_t, fourier_cut, rank, count)`
    pub dims: [u64; 4],
    pub values: Vec<C64>,
}

impl Container {
    pub fn new(dims: [u64; 4], values: Vec<C64>) -> Result<Self> {
        if (dims[2] * dims[3]) as usize != values.len() {
            return Err(Error::Format(format!("{} values do not fill dims {dims:?}", values.len())));
        }
        Ok(Container { dims, values })
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        for d in self.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.values.len() * 16);
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut head = [0u8; 8 + 32];
        r.read_exact(&mut head).map_err(|e| Error::Format(format!("truncated header: {e}")))?;
        if &head[..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let mut dims = [0u64; 4];
        for (k, d) in dims.iter_mut().enumerate() {
            *d = u64::from_le_bytes(head[8 + 8 * k..16 + 8 * k].try_into().unwrap());
        }
        let n = dims[2]
            .checked_mul(dims[3])
            .ok_or_else(|| Error::Format("dimension overflow".into()))? as usize;
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != n * 16 {
            return Err(Error::Format(format!("expected {} payload bytes, found {}", n * 16, body.len())));
        }
        let values = body
            .chunks_exact(16)
            .map(|c| C64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
            .collect();
        Ok(Container { dims, values })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// JSON sidecar of a cached kernel basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSidecar {
    pub z: [f64; 3],
    pub delta: Weight,
    pub disc: Discretization,
    pub singular_values: Vec<f64>,
}

/// Kernel basis as a container of `rank` records, one per basis vector.
pub fn kernel_container(basis: &[SpinorField], disc: &Discretization) -> Result<Container> {
    let count = basis.first().map_or(disc.n_t * disc.modes().len() * 4, |b| b.values.len());
    let mut values = Vec::with_capacity(basis.len() * count);
    for b in basis {
        if b.disc != *disc {
            return Err(Error::InvalidDiscretization("basis vectors disagree with the grid".into()));
        }
        values.extend_from_slice(&b.values);
    }
    Container::new([disc.n_t as u64, disc.fourier_cut as u64, basis.len() as u64, count as u64], values)
}

pub fn save_kernel(stem: &Path, k: &KernelResult, z: Twist, delta: Weight, disc: &Discretization) -> Result<()> {
    kernel_container(&k.basis, disc)?.save(&stem.with_extension("nahm"))?;
    let side = KernelSidecar { z: z.0, delta, disc: *disc, singular_values: k.singular_values.clone() };
    std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&side).map_err(|e| Error::Format(e.to_string()))?)?;
    Ok(())
}

pub fn load_kernel(stem: &Path) -> Result<(Vec<SpinorField>, KernelSidecar)> {
    let side: KernelSidecar = serde_json::from_slice(&std::fs::read(stem.with_extension("json"))?)
        .map_err(|e| Error::Format(e.to_string()))?;
    let c = Container::load(&stem.with_extension("nahm"))?;
    let disc = side.disc;
    let count = disc.n_t * disc.modes().len() * 4;
    if c.dims[0] as usize != disc.n_t || c.dims[1] as usize != disc.fourier_cut || c.dims[3] as usize != count {
        return Err(Error::Format(format!("container dims {:?} disagree with the sidecar grid", c.dims)));
    }
    let basis = c
        .values
        .chunks_exact(count.max(1))
        .take(c.dims[2] as usize)
        .map(|ch| SpinorField { disc, values: ch.to_vec() })
        .collect();
    Ok((basis, side))
}

/// Path file: `<stem>.json` header plus `<stem>.nahm` with one record of
/// 12 values (3 directions × 2×2, row-major) per (node, mode).
pub fn save_path(stem: &Path, p: &ConnectionPath) -> Result<()> {
    let mut values = Vec::with_capacity(p.samples.len() * 4);
    for m in &p.samples {
        values.extend_from_slice(&[m[0][0], m[0][1], m[1][0], m[1][1]]);
    }
    let records = (p.disc.n_t * p.modes.len()) as u64;
    Container::new([p.disc.n_t as u64, p.disc.fourier_cut as u64, records, 12], values)?.save(&stem.with_extension("nahm"))?;
    let json = serde_json::to_string_pretty(&p.header()).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(stem.with_extension("json"), json)?;
    Ok(())
}

pub fn load_path(stem: &Path) -> Result<ConnectionPath> {
    let h: PathHeader = serde_json::from_slice(&std::fs::read(stem.with_extension("json"))?)
        .map_err(|e| Error::Format(e.to_string()))?;
    let c = Container::load(&stem.with_extension("nahm"))?;
    if c.dims[0] as usize != h.disc.n_t || c.dims[2] as usize != h.disc.n_t * h.modes.len() || c.dims[3] != 12 {
        return Err(Error::Format(format!("container dims {:?} disagree with the header", c.dims)));
    }
    let samples: Vec<M2> = c.values.chunks_exact(4).map(|v| [[v[0], v[1]], [v[2], v[3]]]).collect();
    ConnectionPath::from_samples(h.disc, h.modes, samples, h.end_w, h.decay_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_round_trips_and_rejects_garbage() {
        let c = Container::new([3, 1, 2, 2], vec![C64::new(1.0, -2.0), C64::new(0.5, 0.0), C64::new(-0.0, 3.25), C64::new(1e-300, 7.0)]).unwrap();
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"NAHM");
        assert_eq!(buf.len(), 40 + 4 * 16);
        assert_eq!(Container::read_from(&mut buf.as_slice()).unwrap(), c);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(Container::read_from(&mut bad.as_slice()), Err(Error::Format(_))));
        assert!(Container::read_from(&mut &buf[..buf.len() - 1]).is_err());
    }
}
