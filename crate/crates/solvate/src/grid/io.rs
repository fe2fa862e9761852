//! Field export: flat CSV and a small structured binary format.
//!
//! Binary layout: a 64-byte header (magic `SOLVFLD1`, dtype, dimension,
//! node counts, radial flag, reserved padding) followed by the node
//! values as little-endian f64 in linear index order.

use super::field::ScalarField;
use super::StructuredGrid;
use crate::error::SolvateError;
use crate::Result;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

const MAGIC: &[u8; 8] = b"SOLVFLD1";
const HEADER_LEN: usize = 64;

/// Writes `index coordinates + position + value` rows.
pub fn write_field_csv(field: &ScalarField, path: &Path) -> Result<()> {
    let grid = field.grid();
    let mut out = String::new();
    out.push_str("i,j,k,x,y,z,value\n");
    for idx in 0..grid.node_count() {
        let c = grid.coords(idx);
        let x = grid.position(idx);
        out.push_str(&format!(
            "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            c[0], c[1], c[2], x[0], x[1], x[2], field.values()[idx]
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Writes the binary field format described in the module docs.
pub fn write_field_binary(field: &ScalarField, path: &Path) -> Result<()> {
    write_field_binary_tagged(field, path, &[0; 8])
}

/// Like [`write_field_binary`] with an 8-byte tag (e.g. a config-hash
/// prefix) embedded in the reserved header bytes.
pub fn write_field_binary_tagged(field: &ScalarField, path: &Path, tag: &[u8; 8]) -> Result<()> {
    let grid = field.grid();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * grid.node_count());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&1u32.to_le_bytes()); // dtype 1 = f64
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    for d in 0..3 {
        buf.extend_from_slice(&(grid.nodes()[d] as u32).to_le_bytes());
    }
    buf.push(grid.is_radial() as u8);
    for d in 0..3 {
        buf.extend_from_slice(&grid.lo()[d].to_le_bytes());
    }
    debug_assert!(buf.len() + tag.len() <= HEADER_LEN);
    buf.extend_from_slice(tag);
    buf.resize(HEADER_LEN, 0);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(path, &buf)
}

/// Reads a field written by [`write_field_binary`]; grid extents are
/// reconstructed from the header plus the provided spacings.
pub fn read_field_binary(path: &Path, hi: &[f64]) -> Result<(Arc<StructuredGrid>, ScalarField)> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    if raw.len() < HEADER_LEN || &raw[0..8] != MAGIC {
        return Err(SolvateError::Validation("not a SOLVFLD1 file".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(raw[o..o + 4].try_into().unwrap()) as usize;
    let dtype = u32_at(8);
    if dtype != 1 {
        return Err(SolvateError::Validation(format!("unsupported dtype {dtype}")));
    }
    let dim = u32_at(12);
    let n = [u32_at(16), u32_at(20), u32_at(24)];
    let radial = raw[28] != 0;
    let mut lo = [0.0; 3];
    for (d, l) in lo.iter_mut().enumerate() {
        *l = f64::from_le_bytes(raw[29 + 8 * d..37 + 8 * d].try_into().unwrap());
    }
    let grid = if radial {
        StructuredGrid::radial(lo[0], hi[0], n[0])?
    } else {
        StructuredGrid::new(dim, &lo[..dim], &hi[..dim], &n[..dim])?
    };
    let count = grid.node_count();
    if raw.len() != HEADER_LEN + 8 * count {
        return Err(SolvateError::Validation("field payload length mismatch".into()));
    }
    let mut data = Vec::with_capacity(count);
    for i in 0..count {
        let o = HEADER_LEN + 8 * i;
        data.push(f64::from_le_bytes(raw[o..o + 8].try_into().unwrap()));
    }
    let field = ScalarField::from_values(&grid, data)?;
    Ok((grid, field))
}

/// Writes via a temp file and rename so concurrent readers never observe
/// a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp.partial");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
