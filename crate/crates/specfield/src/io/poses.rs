//! Plain-text camera pose file.
//!
//! ```text
//! intrinsics fx fy cx cy width height
//! clip near far
//! frame <relative-path>
//! r00 r01 r02 t0
//! r10 r11 r12 t1
//! r20 r21 r22 t2
//! 0 0 0 1
//! ```
//!
//! Values are written with nine significant digits past the point;
//! rotations must be orthonormal within 1e-4 on load.

use std::path::Path;

use specfield_core::camera::{rotation_orthonormality_deviation, Camera, Mat4};

use crate::error::{CliError, CliResult};
use crate::io::write_file;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub path: String,
    pub camera_to_world: Mat4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
    pub frames: Vec<PoseFrame>,
}

impl PoseFile {
    pub fn camera_for(&self, frame: &PoseFrame) -> CliResult<Camera> {
        Camera::new(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            frame.camera_to_world,
        )
        .map_err(CliError::from_core)
    }
}

pub fn encode(poses: &PoseFile) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "intrinsics {:.9e} {:.9e} {:.9e} {:.9e} {} {}\n",
        poses.fx, poses.fy, poses.cx, poses.cy, poses.width, poses.height
    ));
    out.push_str(&format!("clip {:.9e} {:.9e}\n", poses.near, poses.far));
    for frame in &poses.frames {
        out.push_str(&format!("frame {}\n", frame.path));
        for row in &frame.camera_to_world {
            out.push_str(&format!(
                "{:.9e} {:.9e} {:.9e} {:.9e}\n",
                row[0], row[1], row[2], row[3]
            ));
        }
    }
    out
}

fn parse_floats(path: &Path, line_no: usize, line: &str, n: usize) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != n {
        return Err(CliError::format(
            path,
            format!("line {line_no}: expected {n} values, found {}", parts.len()),
        ));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>().map_err(|_| {
                CliError::format(path, format!("line {line_no}: bad number {p:?}"))
            })
        })
        .collect()
}

pub fn decode(text: &str, path: &Path) -> CliResult<PoseFile> {
    let mut lines = text.lines().enumerate().peekable();

    let (no, line) = lines
        .next()
        .ok_or_else(|| CliError::format(path, "empty pose file"))?;
    let line_no = no + 1;
    let rest = line.strip_prefix("intrinsics ").ok_or_else(|| {
        CliError::format(path, format!("line {line_no}: expected `intrinsics ...`"))
    })?;
    let v = parse_floats(path, line_no, rest, 6)?;
    let (fx, fy, cx, cy) = (v[0], v[1], v[2], v[3]);
    let (width, height) = (v[4] as usize, v[5] as usize);

    let (no, line) = lines
        .next()
        .ok_or_else(|| CliError::format(path, "line 2: missing `clip near far`"))?;
    let line_no = no + 1;
    let rest = line.strip_prefix("clip ").ok_or_else(|| {
        CliError::format(path, format!("line {line_no}: expected `clip near far`"))
    })?;
    let v = parse_floats(path, line_no, rest, 2)?;
    let (near, far) = (v[0], v[1]);

    let mut frames = Vec::new();
    while let Some((no, line)) = lines.next() {
        let line_no = no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let frame_path = line.strip_prefix("frame ").ok_or_else(|| {
            CliError::format(path, format!("line {line_no}: expected `frame <path>`"))
        })?;
        let mut m = [[0.0f64; 4]; 4];
        for row in m.iter_mut() {
            let (no, line) = lines.next().ok_or_else(|| {
                CliError::format(
                    path,
                    format!("frame {frame_path:?}: pose matrix is truncated"),
                )
            })?;
            let v = parse_floats(path, no + 1, line, 4)?;
            row.copy_from_slice(&v);
        }
        let deviation = rotation_orthonormality_deviation(&m);
        if deviation > 1e-4 {
            return Err(CliError::format(
                path,
                format!(
                    "frame {frame_path:?}: rotation is not orthonormal (max |R^T R - I| = {deviation:.3e})"
                ),
            ));
        }
        frames.push(PoseFrame {
            path: frame_path.trim().to_string(),
            camera_to_world: m,
        });
    }

    Ok(PoseFile {
        fx,
        fy,
        cx,
        cy,
        width,
        height,
        near,
        far,
        frames,
    })
}

pub fn write_poses(poses: &PoseFile, path: &Path) -> CliResult<()> {
    write_file(path, encode(poses).as_bytes())
}

pub fn read_poses(path: &Path) -> CliResult<PoseFile> {
    let bytes = crate::io::read_file(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::format(path, "pose file is not valid UTF-8"))?;
    decode(&text, path)
}
