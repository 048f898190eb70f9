//! `UMF1` field checkpoints.
//!
//! Layout (all little-endian): magic `UMF1`, u32 version = 1,
//! u32 nx ny nz, u32 K, u32 B, u32 sh_degree, f32 bounds (min xyz, max
//! xyz), f32 tau, f32 density_scale, then f32 arrays in order: endmembers
//! (B*K column-major), density_raw, abundance_logits, scaling_logits,
//! tint_logit, specular_sh. Voxel order is x-fastest; per-voxel channels
//! (K logits, B*9 SH coefficients) are contiguous.

use std::path::Path;

use specfield_core::field::{Aabb, VoxelField};

use crate::error::{CliError, CliResult};
use crate::io::{push_f32s, read_file, write_file, Cursor};

pub const MAGIC: &[u8; 4] = b"UMF1";
pub const VERSION: u32 = 1;

pub fn encode(field: &VoxelField) -> Vec<u8> {
    let [nx, ny, nz] = field.resolution();
    let bounds = field.bounds();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in [nx, ny, nz] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(field.endmember_count() as u32).to_le_bytes());
    out.extend_from_slice(&(field.band_count() as u32).to_le_bytes());
    out.extend_from_slice(&(field.sh_degree() as u32).to_le_bytes());
    for v in bounds.min.iter().chain(bounds.max.iter()) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out.extend_from_slice(&(field.tau as f32).to_le_bytes());
    out.extend_from_slice(&(field.density_scale as f32).to_le_bytes());
    push_f32s(&mut out, field.endmembers_raw());
    push_f32s(&mut out, field.density_raw());
    push_f32s(&mut out, field.abundance_logits());
    push_f32s(&mut out, field.scaling_logits());
    push_f32s(&mut out, field.tint_logit());
    push_f32s(&mut out, field.specular_sh());
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> CliResult<VoxelField> {
    let mut c = Cursor::new(bytes, path);
    c.magic(MAGIC)?;
    let version = c.u32()?;
    if version != VERSION {
        return Err(CliError::format(
            path,
            format!("unsupported version {version}, expected {VERSION}"),
        ));
    }
    let nx = c.u32()? as usize;
    let ny = c.u32()? as usize;
    let nz = c.u32()? as usize;
    let k = c.u32()? as usize;
    let b = c.u32()? as usize;
    let sh_degree = c.u32()? as usize;
    if sh_degree != 2 {
        return Err(CliError::format(
            path,
            format!("unsupported SH degree {sh_degree}, expected 2"),
        ));
    }
    let mut bounds_v = [0.0f64; 6];
    for v in bounds_v.iter_mut() {
        *v = c.f32()? as f64;
    }
    let tau = c.f32()? as f64;
    let density_scale = c.f32()? as f64;
    let voxels = nx * ny * nz;
    let endmembers = c.f32_vec(b * k)?;
    let density_raw = c.f32_vec(voxels)?;
    let abundance_logits = c.f32_vec(voxels * k)?;
    let scaling_logits = c.f32_vec(voxels * k)?;
    let tint_logit = c.f32_vec(voxels)?;
    let specular_sh = c.f32_vec(voxels * b * 9)?;
    c.expect_end()?;

    let bounds = Aabb::new(
        [bounds_v[0], bounds_v[1], bounds_v[2]],
        [bounds_v[3], bounds_v[4], bounds_v[5]],
    )
    .map_err(|e| CliError::format(path, e.to_string()))?;
    VoxelField::from_raw_parts(
        [nx, ny, nz],
        bounds,
        k,
        b,
        tau,
        density_scale,
        endmembers,
        density_raw,
        abundance_logits,
        scaling_logits,
        tint_logit,
        specular_sh,
    )
    .map_err(|e| CliError::format(path, e.to_string()))
}

pub fn write_checkpoint(field: &VoxelField, path: &Path) -> CliResult<()> {
    write_file(path, &encode(field))
}

pub fn read_checkpoint(path: &Path) -> CliResult<VoxelField> {
    decode(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use specfield_core::rng::Rng;

    #[test]
    fn round_trip_is_bitwise() {
        let mut rng = Rng::new(5);
        let field = VoxelField::random(
            &mut rng,
            [3, 4, 2],
            Aabb::unit_centered(),
            2,
            3,
            1.0,
            25.0,
            2.0,
        )
        .unwrap();
        let bytes = encode(&field);
        let back = decode(&bytes, Path::new("mem")).unwrap();
        assert_eq!(encode(&back), bytes);
        assert_eq!(field.density_raw(), back.density_raw());
        assert_eq!(field.endmembers_raw(), back.endmembers_raw());
    }

    #[test]
    fn header_is_exactly_as_documented() {
        let mut rng = Rng::new(1);
        let field = VoxelField::random(
            &mut rng,
            [2, 2, 2],
            Aabb::unit_centered(),
            1,
            1,
            1.0,
            25.0,
            1.0,
        )
        .unwrap();
        let bytes = encode(&field);
        assert_eq!(&bytes[..4], b"UMF1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2); // nx
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 1); // K
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 1); // B
        assert_eq!(u32::from_le_bytes(bytes[28..32].try_into().unwrap()), 2); // sh degree
        // 6 bounds + tau + density_scale + arrays.
        let expected = 32 + 6 * 4 + 8 + 4 * (1 + 8 + 8 + 8 + 8 + 8 * 9);
        assert_eq!(bytes.len(), expected);
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let mut rng = Rng::new(2);
        let field = VoxelField::random(
            &mut rng,
            [2, 2, 2],
            Aabb::unit_centered(),
            1,
            2,
            1.0,
            25.0,
            1.0,
        )
        .unwrap();
        let mut bytes = encode(&field);
        bytes.pop();
        assert!(decode(&bytes, Path::new("mem")).is_err());
    }
}
