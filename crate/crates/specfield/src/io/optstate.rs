//! `UMO1` optimizer-state sidecar for resumable training.
//!
//! Layout: magic `UMO1`, u32 version = 1, u32 nx ny nz, u32 K, u32 B,
//! u64 step, then f64 first moments and f64 second moments, each in
//! checkpoint parameter order (endmembers, density_raw, abundance_logits,
//! scaling_logits, tint_logit, specular_sh).

use std::path::Path;

use specfield_core::field::{GradBuffer, VoxelField};
use specfield_core::train::AdamState;

use crate::error::{CliError, CliResult};
use crate::io::{push_f64s, read_file, write_file, Cursor};

pub const MAGIC: &[u8; 4] = b"UMO1";
pub const VERSION: u32 = 1;

fn push_buffer(out: &mut Vec<u8>, buf: &GradBuffer) {
    push_f64s(out, &buf.endmembers);
    push_f64s(out, &buf.density_raw);
    push_f64s(out, &buf.abundance_logits);
    push_f64s(out, &buf.scaling_logits);
    push_f64s(out, &buf.tint_logit);
    push_f64s(out, &buf.specular_sh);
}

fn read_buffer(c: &mut Cursor<'_>, like: &VoxelField) -> CliResult<GradBuffer> {
    let mut buf = GradBuffer::zeros_like(like);
    buf.endmembers = c.f64_vec(buf.endmembers.len())?;
    buf.density_raw = c.f64_vec(buf.density_raw.len())?;
    buf.abundance_logits = c.f64_vec(buf.abundance_logits.len())?;
    buf.scaling_logits = c.f64_vec(buf.scaling_logits.len())?;
    buf.tint_logit = c.f64_vec(buf.tint_logit.len())?;
    buf.specular_sh = c.f64_vec(buf.specular_sh.len())?;
    Ok(buf)
}

pub fn encode(state: &AdamState, field: &VoxelField) -> Vec<u8> {
    let [nx, ny, nz] = field.resolution();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in [nx, ny, nz] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(field.endmember_count() as u32).to_le_bytes());
    out.extend_from_slice(&(field.band_count() as u32).to_le_bytes());
    out.extend_from_slice(&state.step.to_le_bytes());
    push_buffer(&mut out, &state.m);
    push_buffer(&mut out, &state.v);
    out
}

pub fn decode(bytes: &[u8], field: &VoxelField, path: &Path) -> CliResult<AdamState> {
    let mut c = Cursor::new(bytes, path);
    c.magic(MAGIC)?;
    let version = c.u32()?;
    if version != VERSION {
        return Err(CliError::format(
            path,
            format!("unsupported version {version}, expected {VERSION}"),
        ));
    }
    let dims = [c.u32()? as usize, c.u32()? as usize, c.u32()? as usize];
    let k = c.u32()? as usize;
    let b = c.u32()? as usize;
    if dims != field.resolution() || k != field.endmember_count() || b != field.band_count() {
        return Err(CliError::format(
            path,
            format!(
                "optimizer state shape {dims:?} K={k} B={b} does not match checkpoint {:?} K={} B={}",
                field.resolution(),
                field.endmember_count(),
                field.band_count()
            ),
        ));
    }
    let step = c.u64()?;
    let m = read_buffer(&mut c, field)?;
    let v = read_buffer(&mut c, field)?;
    c.expect_end()?;
    Ok(AdamState { step, m, v })
}

pub fn write_optimizer_state(state: &AdamState, field: &VoxelField, path: &Path) -> CliResult<()> {
    write_file(path, &encode(state, field))
}

pub fn read_optimizer_state(path: &Path, field: &VoxelField) -> CliResult<AdamState> {
    decode(&read_file(path)?, field, path)
}

/// Conventional sidecar path: `<checkpoint>.opt`.
pub fn sidecar_path(checkpoint: &Path) -> std::path::PathBuf {
    let mut os = checkpoint.as_os_str().to_owned();
    os.push(".opt");
    std::path::PathBuf::from(os)
}

#[cfg(test)]
mod tests {
    use super::*;
    use specfield_core::field::Aabb;
    use specfield_core::rng::Rng;

    #[test]
    fn round_trip_preserves_moments() {
        let mut rng = Rng::new(9);
        let field = VoxelField::random(
            &mut rng,
            [3, 3, 3],
            Aabb::unit_centered(),
            2,
            2,
            1.0,
            25.0,
            1.0,
        )
        .unwrap();
        let mut state = AdamState::zeros_like(&field);
        state.step = 42;
        for v in state.m.density_raw.iter_mut() {
            *v = rng.next_f64();
        }
        for v in state.v.specular_sh.iter_mut() {
            *v = rng.next_f64();
        }
        let bytes = encode(&state, &field);
        let back = decode(&bytes, &field, Path::new("mem")).unwrap();
        assert_eq!(back.step, 42);
        assert_eq!(back.m.density_raw, state.m.density_raw);
        assert_eq!(back.v.specular_sh, state.v.specular_sh);
        assert_eq!(encode(&back, &field), bytes);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut rng = Rng::new(3);
        let small = VoxelField::random(
            &mut rng,
            [2, 2, 2],
            Aabb::unit_centered(),
            2,
            2,
            1.0,
            25.0,
            1.0,
        )
        .unwrap();
        let big = VoxelField::random(
            &mut rng,
            [3, 3, 3],
            Aabb::unit_centered(),
            2,
            2,
            1.0,
            25.0,
            1.0,
        )
        .unwrap();
        let state = AdamState::zeros_like(&small);
        let bytes = encode(&state, &small);
        assert!(decode(&bytes, &big, Path::new("mem")).is_err());
    }
}
