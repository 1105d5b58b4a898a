//! CSV snapshots and a binary field cache.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::BallDomain;
use crate::grid::Grid;
use crate::radial_ode::C1Report;

const MAGIC: &[u8; 4] = b"TLGF";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a field cache (bad magic)")]
    BadMagic,
    #[error("unsupported cache format version {0}")]
    BadVersion(u32),
    #[error("cache key mismatch: {0}")]
    KeyMismatch(String),
    #[error("field has {got} values, grid has {expected} nodes")]
    FieldLength { got: usize, expected: usize },
}

/// SHA-256 of the domain's canonical JSON.
pub fn domain_hash(domain: &BallDomain) -> [u8; 32] {
    let json = serde_json::to_vec(domain).expect("domain serializes");
    Sha256::digest(&json).into()
}

/// Identifies a cached field: domain, spacing and stencil width.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheKey {
    pub domain: [u8; 32],
    pub h: f64,
    pub width: usize,
}

impl CacheKey {
    pub fn for_grid(grid: &Grid) -> Self {
        Self {
            domain: domain_hash(&grid.domain),
            h: grid.h,
            width: grid.width,
        }
    }

    /// File stem such as `3f2a…_h0.0625_w2`.
    pub fn file_stem(&self) -> String {
        format!("{}_h{}_w{}", &hex::encode(self.domain)[..16], self.h, self.width)
    }
}

/// Writes `x, y[, z], delta, u` rows, one per node.
pub fn write_field_csv<W: Write>(grid: &Grid, values: &[f64], mut w: W) -> Result<(), IoError> {
    if values.len() != grid.len() {
        return Err(IoError::FieldLength {
            got: values.len(),
            expected: grid.len(),
        });
    }
    let coords = ["x", "y", "z"];
    let header: Vec<&str> = coords[..grid.dimension().min(3)].to_vec();
    writeln!(w, "{},delta,u", header.join(","))?;
    for (node, v) in grid.nodes.iter().zip(values) {
        for x in &node.x {
            write!(w, "{x},")?;
        }
        writeln!(w, "{},{v}", node.delta)?;
    }
    Ok(())
}

pub fn write_c1_csv<W: Write>(reports: &[C1Report], mut w: W) -> Result<(), IoError> {
    writeln!(
        w,
        "gamma,u0,finite_boundary_gradient,boundary_gradient,measured_gradient_near_boundary,energy_residual"
    )?;
    for r in reports {
        let g = r.boundary_gradient.map_or(String::new(), |g| g.to_string());
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.gamma, r.u0, r.finite_boundary_gradient, g, r.measured_gradient_near_boundary, r.energy_residual
        )?;
    }
    Ok(())
}

/// Little-endian layout: magic, version, domain hash, `h`, `W`, count, values.
pub fn write_cache<W: Write>(key: &CacheKey, values: &[f64], mut w: W) -> Result<(), IoError> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    w.write_all(&key.domain)?;
    w.write_f64::<LittleEndian>(key.h)?;
    w.write_u32::<LittleEndian>(key.width as u32)?;
    w.write_u64::<LittleEndian>(values.len() as u64)?;
    for v in values {
        w.write_f64::<LittleEndian>(*v)?;
    }
    Ok(())
}

/// Reads a cache written by [`write_cache`], checking it against `key`.
pub fn read_cache<R: Read>(key: &CacheKey, mut r: R) -> Result<Vec<f64>, IoError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(IoError::BadMagic);
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(IoError::BadVersion(version));
    }
    let mut domain = [0u8; 32];
    r.read_exact(&mut domain)?;
    if domain != key.domain {
        return Err(IoError::KeyMismatch("domain hash".into()));
    }
    let h = r.read_f64::<LittleEndian>()?;
    if h.to_bits() != key.h.to_bits() {
        return Err(IoError::KeyMismatch(format!("h = {h}, expected {}", key.h)));
    }
    let width = r.read_u32::<LittleEndian>()? as usize;
    if width != key.width {
        return Err(IoError::KeyMismatch(format!("W = {width}, expected {}", key.width)));
    }
    let n = r.read_u64::<LittleEndian>()? as usize;
    let mut values = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut values)?;
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn cache_round_trip() {
        let disk = BallDomain::ball(1.0, 2).unwrap();
        let g = build_grid(&disk, 0.25, 1).unwrap();
        let values: Vec<f64> = g.nodes.iter().map(|n| n.delta.sqrt()).collect();
        let key = CacheKey::for_grid(&g);
        let mut buf = Vec::new();
        write_cache(&key, &values, &mut buf).unwrap();
        assert_eq!(read_cache(&key, buf.as_slice()).unwrap(), values);

        let other = CacheKey { width: 2, ..key.clone() };
        assert!(matches!(read_cache(&other, buf.as_slice()), Err(IoError::KeyMismatch(_))));
        buf[0] = b'X';
        assert!(matches!(read_cache(&key, buf.as_slice()), Err(IoError::BadMagic)));
    }

    #[test]
    fn field_csv_columns() {
        let disk = BallDomain::ball(1.0, 2).unwrap();
        let g = build_grid(&disk, 0.25, 1).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&g, &vec![1.0; g.len()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y,delta,u"));
        assert_eq!(lines.count(), g.len());
    }

    #[test]
    fn domain_hash_distinguishes() {
        let a = BallDomain::ball(1.0, 2).unwrap();
        let b = BallDomain::ball(2.0, 2).unwrap();
        assert_ne!(domain_hash(&a), domain_hash(&b));
        assert_eq!(domain_hash(&a), domain_hash(&a.clone()));
    }
}
