//! Synthetic dataset emission and loading.
//!
//! Layout of a dataset directory:
//!
//! ```text
//! out/
//!   manifest.txt      key = value lines + file checksums
//!   poses.txt         shared intrinsics/clip + one frame per view
//!   endmembers.txt    ground-truth dictionary (K rows of B values)
//!   train/view_NNN.hsc + .seg
//!   test/view_NNN.hsc + .seg
//! ```
//!
//! Everything is rendered with deterministic midpoint sampling, so the same
//! seed reproduces a byte-identical dataset (manifest included).

use std::path::{Path, PathBuf};

use specfield_core::camera::Camera;
use specfield_core::exec::Executor;
use specfield_core::render::render_image;
use specfield_core::scene::{build_cameras, build_scene, ground_truth_labels, BuiltScene, SceneSpec};
use specfield_core::segment::LabelMap;
use specfield_core::spectral::{CameraResponse, EndmemberDictionary};
use specfield_core::train::{Dataset, TrainView};

use crate::error::{CliError, CliResult};
use crate::io::manifest::{self, Manifest};
use crate::io::{cube, labelmap, poses};

pub const MANIFEST_NAME: &str = "manifest.txt";
pub const POSES_NAME: &str = "poses.txt";
pub const ENDMEMBERS_NAME: &str = "endmembers.txt";

/// Ground-truth endmembers as text: `endmembers K B` then K rows of B.
pub fn encode_endmembers(dict: &EndmemberDictionary) -> String {
    let mut out = format!(
        "endmembers {} {}\n",
        dict.endmember_count(),
        dict.band_count()
    );
    for k in 0..dict.endmember_count() {
        let row: Vec<String> = dict.column(k).iter().map(|v| format!("{v:.9e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn decode_endmembers(text: &str, path: &Path) -> CliResult<EndmemberDictionary> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::format(path, "empty endmember file"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "endmembers" {
        return Err(CliError::format(
            path,
            format!("line 1: expected `endmembers K B`, found {header:?}"),
        ));
    }
    let k: usize = parts[1]
        .parse()
        .map_err(|_| CliError::format(path, "line 1: bad K"))?;
    let b: usize = parts[2]
        .parse()
        .map_err(|_| CliError::format(path, "line 1: bad B"))?;
    let mut columns = Vec::with_capacity(k);
    for row in 0..k {
        let (no, line) = lines
            .next()
            .ok_or_else(|| CliError::format(path, format!("missing endmember row {row}")))?;
        let values: Result<Vec<f64>, _> = line.split_whitespace().map(|v| v.parse()).collect();
        let values = values
            .map_err(|_| CliError::format(path, format!("line {}: bad number", no + 1)))?;
        if values.len() != b {
            return Err(CliError::format(
                path,
                format!("line {}: expected {b} values, found {}", no + 1, values.len()),
            ));
        }
        columns.push(values);
    }
    EndmemberDictionary::from_columns(&columns).map_err(|e| CliError::format(path, e.to_string()))
}

/// Single-spectrum text file for `edit`: B whitespace-separated values.
pub fn read_spectrum(path: &Path) -> CliResult<Vec<f64>> {
    let bytes = crate::io::read_file(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::format(path, "spectrum file is not valid UTF-8"))?;
    let values: Result<Vec<f64>, _> = text.split_whitespace().map(|v| v.parse()).collect();
    let values =
        values.map_err(|_| CliError::format(path, "spectrum file contains a bad number"))?;
    if values.is_empty() {
        return Err(CliError::format(path, "spectrum file is empty"));
    }
    Ok(values)
}

fn view_name(split: &str, index: usize) -> String {
    format!("{split}/view_{index:03}.hsc")
}

fn label_name(split: &str, index: usize) -> String {
    format!("{split}/view_{index:03}.seg")
}

/// Renders and writes the full dataset; returns the manifest.
pub fn emit_dataset<E: Executor>(
    spec: &SceneSpec,
    built: &BuiltScene,
    out_dir: &Path,
    exec: &E,
) -> CliResult<Manifest> {
    let response = CameraResponse::default_for_bands(spec.bands).map_err(CliError::from_core)?;
    let (train_cams, test_cams) = build_cameras(&spec.rig).map_err(CliError::from_core)?;

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let mut manifest = Manifest::default();
    manifest.push("format", "specfield-dataset");
    manifest.push("seed", spec.seed);
    manifest.push("bands", spec.bands);
    manifest.push("endmembers", spec.endmember_count);
    manifest.push("n_train", spec.rig.n_train);
    manifest.push("n_test", spec.rig.n_test);
    manifest.push("width", spec.rig.width);
    manifest.push("height", spec.rig.height);
    manifest.push("near", format!("{:.9e}", spec.near));
    manifest.push("far", format!("{:.9e}", spec.far));
    manifest.push("samples", spec.render_samples);
    manifest.push(
        "grid",
        format!(
            "{} {} {}",
            spec.resolution[0], spec.resolution[1], spec.resolution[2]
        ),
    );

    let mut pose_frames = Vec::new();
    let record = |rel: &str, bytes: &[u8]| -> CliResult<()> {
        let full = out_dir.join(rel);
        crate::io::write_file(&full, bytes)?;
        Ok(())
    };

    for (split, cams) in [("train", &train_cams), ("test", &test_cams)] {
        for (i, cam) in cams.iter().enumerate() {
            let img = render_image(
                &built.field,
                &response,
                cam,
                spec.near,
                spec.far,
                spec.render_samples,
                exec,
            )
            .map_err(CliError::from_core)?;
            let cube_rel = view_name(split, i);
            record(&cube_rel, &cube::encode(&img.spectral)?)?;

            let labels =
                ground_truth_labels(built, cam, spec.near, spec.far, spec.render_samples, 0.5)
                    .map_err(CliError::from_core)?;
            let label_rel = label_name(split, i);
            record(&label_rel, &labelmap::encode(&labels))?;

            pose_frames.push(poses::PoseFrame {
                path: cube_rel,
                camera_to_world: cam.camera_to_world,
            });
        }
    }

    let pose_file = poses::PoseFile {
        fx: spec.rig.focal_px,
        fy: spec.rig.focal_px,
        cx: spec.rig.width as f64 / 2.0,
        cy: spec.rig.height as f64 / 2.0,
        width: spec.rig.width,
        height: spec.rig.height,
        near: spec.near,
        far: spec.far,
        frames: pose_frames,
    };
    record(POSES_NAME, poses::encode(&pose_file).as_bytes())?;
    record(
        ENDMEMBERS_NAME,
        encode_endmembers(&built.endmembers).as_bytes(),
    )?;

    // Hash every artifact in a fixed order.
    let mut rels: Vec<String> = vec![POSES_NAME.into(), ENDMEMBERS_NAME.into()];
    for (split, cams) in [("train", &train_cams), ("test", &test_cams)] {
        for i in 0..cams.len() {
            rels.push(view_name(split, i));
            rels.push(label_name(split, i));
        }
    }
    for rel in rels {
        let bytes = crate::io::read_file(&out_dir.join(&rel))?;
        manifest.files.push((rel, manifest::sha256_hex(&bytes)));
    }
    manifest::write_manifest(&manifest, &out_dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}

/// Convenience wrapper: build the scene then emit it.
pub fn synthesize<E: Executor>(spec: &SceneSpec, out_dir: &Path, exec: &E) -> CliResult<Manifest> {
    let built = build_scene(spec).map_err(CliError::from_core)?;
    emit_dataset(spec, &built, out_dir, exec)
}

/// One loaded split of a dataset.
pub struct LoadedSplit {
    pub views: Vec<TrainView>,
    pub labels: Vec<LabelMap>,
    pub cube_paths: Vec<PathBuf>,
}

pub struct DiskDataset {
    pub train: LoadedSplit,
    pub test: LoadedSplit,
    pub near: f64,
    pub far: f64,
    pub samples: usize,
    pub endmembers: EndmemberDictionary,
    pub manifest: Manifest,
}

impl DiskDataset {
    pub fn train_dataset(&self) -> CliResult<Dataset> {
        Dataset::new(self.train.views.clone(), self.near, self.far).map_err(CliError::from_core)
    }
}

/// Loads a dataset directory, verifying every manifest checksum.
pub fn load_dataset(dir: &Path) -> CliResult<DiskDataset> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let manifest = manifest::read_manifest(&manifest_path)?;
    manifest::verify_files(&manifest, dir)?;

    let samples: usize = manifest
        .require("samples", &manifest_path)?
        .parse()
        .map_err(|_| CliError::format(&manifest_path, "bad `samples` value"))?;

    let pose_file = poses::read_poses(&dir.join(POSES_NAME))?;
    let endmembers = {
        let p = dir.join(ENDMEMBERS_NAME);
        let bytes = crate::io::read_file(&p)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| CliError::format(&p, "endmember file is not valid UTF-8"))?;
        decode_endmembers(&text, &p)?
    };

    let mut train = LoadedSplit {
        views: Vec::new(),
        labels: Vec::new(),
        cube_paths: Vec::new(),
    };
    let mut test = LoadedSplit {
        views: Vec::new(),
        labels: Vec::new(),
        cube_paths: Vec::new(),
    };
    for frame in &pose_file.frames {
        let camera: Camera = pose_file.camera_for(frame)?;
        let cube_path = dir.join(&frame.path);
        let spectral = cube::read_cube(&cube_path)?;
        let label_path = cube_path.with_extension("seg");
        let labels = labelmap::read_labels(&label_path)?;
        let split = if frame.path.starts_with("train/") {
            &mut train
        } else if frame.path.starts_with("test/") {
            &mut test
        } else {
            return Err(CliError::format(
                &dir.join(POSES_NAME),
                format!("frame path {:?} is in neither train/ nor test/", frame.path),
            ));
        };
        split.views.push(TrainView { camera, spectral });
        split.labels.push(labels);
        split.cube_paths.push(cube_path);
    }
    if train.views.is_empty() {
        return Err(CliError::format(dir, "dataset has no training views"));
    }

    Ok(DiskDataset {
        train,
        test,
        near: pose_file.near,
        far: pose_file.far,
        samples,
        endmembers,
        manifest,
    })
}
