//! Synthetic ground-truth scene generation.
//!
//! Builds voxel fields with known endmembers, abundances, scaling profiles,
//! tints and specular lobes by voxelizing simple primitives, plus a
//! Fibonacci-sphere camera rig. Rendering these scenes through the forward
//! renderer produces training/test datasets with exact ground truth for
//! recovery experiments.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::camera::{Camera, Vec3};
use crate::field::{Aabb, VoxelField};
use crate::numeric::{self, logit};
use crate::rng::{Rng, Stream};
use crate::segment::SENTINEL;
use crate::sh::SH_COEFFS;
use crate::spectral::EndmemberDictionary;
use crate::{Error, Result};

/// Raw density for empty space: softplus(-25) * 25 is ~3e-10 per unit, so
/// ground-truth backgrounds render as genuine black.
pub const EMPTY_DENSITY_RAW: f32 = -18.0;
/// Raw density inside primitives: softplus(6) * 25 is ~150 per unit, fully
/// opaque within a fraction of a voxel.
pub const SOLID_DENSITY_RAW: f32 = 4.5;
/// One-hot abundance logit magnitude.
pub const ONE_HOT_LOGIT: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Sphere { center: Vec3, radius: f64 },
    Box { min: Vec3, max: Vec3 },
}

impl Shape {
    pub fn contains(&self, p: Vec3) -> bool {
        match self {
            Shape::Sphere { center, radius } => {
                let d = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
                d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= radius * radius
            }
            Shape::Box { min, max } => (0..3).all(|i| p[i] >= min[i] && p[i] <= max[i]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaterialMix {
    /// One-hot material index.
    Pure(usize),
    /// Full abundance target; entries must be positive and sum to one.
    Mixed(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalingProfile {
    Constant(f64),
    /// Linear ramp of the scaling factor along one axis across the bounds.
    AxisGradient { axis: usize, lo: f64, hi: f64 },
}

impl ScalingProfile {
    fn value_at(&self, p: Vec3, bounds: &Aabb) -> f64 {
        match *self {
            ScalingProfile::Constant(v) => v,
            ScalingProfile::AxisGradient { axis, lo, hi } => {
                let t = (p[axis] - bounds.min[axis]) / (bounds.max[axis] - bounds.min[axis]);
                lo + (hi - lo) * t.clamp(0.0, 1.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub material: MaterialMix,
    pub scaling: ScalingProfile,
    /// Specular gate in [0, 1]; 0 disables the specular term.
    pub tint: f64,
    /// Mean specular reflectance level in (0, 1) plus the magnitude of the
    /// directional SH components.
    pub specular_strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EndmemberSource {
    /// K smooth seeded curves with pairwise spectral angle >= 0.2 rad.
    Synthetic,
    Given(EndmemberDictionary),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    pub n_train: usize,
    pub n_test: usize,
    pub radius: f64,
    pub width: usize,
    pub height: usize,
    pub focal_px: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub bands: usize,
    pub endmember_count: usize,
    pub resolution: [usize; 3],
    pub bounds: Aabb,
    pub primitives: Vec<Primitive>,
    pub endmember_source: EndmemberSource,
    pub rig: CameraRig,
    pub near: f64,
    pub far: f64,
    pub render_samples: usize,
    pub tau: f64,
    pub density_scale: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.endmember_count == 0 {
            return Err(Error::Invalid {
                context: "scene spec",
                detail: String::from("endmembers must be >= 1"),
            });
        }
        if self.bands == 0 {
            return Err(Error::Invalid {
                context: "scene spec",
                detail: String::from("bands must be >= 1"),
            });
        }
        if self.rig.n_train == 0 {
            return Err(Error::Invalid {
                context: "scene spec",
                detail: String::from("views must include at least one training view"),
            });
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(Error::DegenerateRay {
                near: self.near,
                far: self.far,
            });
        }
        if self.render_samples == 0 {
            return Err(Error::Invalid {
                context: "scene spec",
                detail: String::from("samples must be >= 1"),
            });
        }
        for (i, prim) in self.primitives.iter().enumerate() {
            match &prim.material {
                MaterialMix::Pure(k) => {
                    if *k >= self.endmember_count {
                        return Err(Error::IndexOutOfBounds {
                            context: "primitive material",
                            index: *k,
                            len: self.endmember_count,
                        });
                    }
                }
                MaterialMix::Mixed(a) => {
                    if a.len() != self.endmember_count {
                        return Err(Error::EndmemberMismatch {
                            context: "primitive material",
                            expected: self.endmember_count,
                            actual: a.len(),
                        });
                    }
                    let sum: f64 = a.iter().sum();
                    if a.iter().any(|&v| v <= 0.0) || (sum - 1.0).abs() > 1e-6 {
                        return Err(Error::Invalid {
                            context: "primitive material",
                            detail: format!(
                                "mixed abundances of primitive {i} must be positive and sum to 1"
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Draws K smooth endmember curves (sum of two Gaussians over band index on
/// a small baseline) with pairwise spectral angle >= 0.2 rad. Errors after
/// 1000 rejected draws for any slot.
pub fn synthetic_endmembers(bands: usize, k: usize, rng: &mut Rng) -> Result<EndmemberDictionary> {
    const MIN_ANGLE: f64 = 0.2;
    const MAX_DRAWS: usize = 1000;
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _slot in 0..k {
        let mut accepted = None;
        for _ in 0..MAX_DRAWS {
            let mut col = vec![0.05; bands];
            for _ in 0..2 {
                let amp = rng.range(0.25, 0.7);
                let center = rng.range(0.0, (bands - 1) as f64);
                let width = rng.range(bands as f64 / 8.0, bands as f64 / 3.0);
                for (b, v) in col.iter_mut().enumerate() {
                    let d = (b as f64 - center) / width;
                    *v += amp * numeric::exp(-0.5 * d * d);
                }
            }
            for v in col.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
            let ok = columns
                .iter()
                .all(|prev| numeric::vector_angle(prev, &col) >= MIN_ANGLE);
            if ok {
                accepted = Some(col);
                break;
            }
        }
        match accepted {
            Some(col) => columns.push(col),
            None => {
                return Err(Error::Invalid {
                    context: "synthetic endmembers",
                    detail: format!(
                        "could not draw {k} endmembers with pairwise angle >= {MIN_ANGLE} rad for B={bands} after {MAX_DRAWS} draws"
                    ),
                })
            }
        }
    }
    EndmemberDictionary::from_columns(&columns)
}

/// Ground-truth scene: the field plus a per-voxel material label
/// (SENTINEL for empty voxels).
#[derive(Debug, Clone)]
pub struct BuiltScene {
    pub field: VoxelField,
    pub voxel_labels: Vec<u16>,
    pub endmembers: EndmemberDictionary,
}

/// Inverse-softmax logits with a mean-zero gauge: softmax(l / tau) = a.
fn abundance_logits_for(material: &MaterialMix, k: usize, tau: f64) -> Vec<f64> {
    match material {
        MaterialMix::Pure(idx) => (0..k)
            .map(|kk| if kk == *idx { ONE_HOT_LOGIT } else { -ONE_HOT_LOGIT })
            .collect(),
        MaterialMix::Mixed(a) => {
            let logs: Vec<f64> = a.iter().map(|&v| numeric::ln(v.max(1e-9))).collect();
            let mean = logs.iter().sum::<f64>() / k as f64;
            logs.iter().map(|&l| tau * (l - mean)).collect()
        }
    }
}

fn material_argmax(material: &MaterialMix) -> u16 {
    match material {
        MaterialMix::Pure(idx) => *idx as u16,
        MaterialMix::Mixed(a) => {
            let mut best = 0usize;
            for (i, &v) in a.iter().enumerate() {
                if v > a[best] {
                    best = i;
                }
            }
            best as u16
        }
    }
}

/// Voxelizes the primitives over the lattice (inside test at node
/// positions, later primitives painting over earlier ones) and fills every
/// raw channel from the ground-truth targets.
pub fn build_scene(spec: &SceneSpec) -> Result<BuiltScene> {
    spec.validate()?;
    let mut rng = Rng::from_parts(&[spec.seed, Stream::Scene as u64]);
    let endmembers = match &spec.endmember_source {
        EndmemberSource::Synthetic => {
            synthetic_endmembers(spec.bands, spec.endmember_count, &mut rng)?
        }
        EndmemberSource::Given(dict) => {
            if dict.band_count() != spec.bands {
                return Err(Error::BandMismatch {
                    context: "scene endmembers",
                    expected: spec.bands,
                    actual: dict.band_count(),
                });
            }
            if dict.endmember_count() != spec.endmember_count {
                return Err(Error::EndmemberMismatch {
                    context: "scene endmembers",
                    expected: spec.endmember_count,
                    actual: dict.endmember_count(),
                });
            }
            dict.clone()
        }
    };

    let mut field = VoxelField::new(
        spec.resolution,
        spec.bounds,
        &endmembers,
        spec.tau,
        spec.density_scale,
    )?;
    let k = spec.endmember_count;
    let b = spec.bands;
    let voxels = field.voxel_count();
    let mut labels = vec![SENTINEL; voxels];

    // Per-primitive specular SH: one seeded lobe shared by all voxels of
    // the primitive and by all bands (a spectrally neutral highlight, as in
    // the classic dichromatic model). The DC level hits the requested mean
    // reflectance; degree-1/2 terms add view dependence proportional to the
    // strength.
    let mut primitive_sh: Vec<Vec<f64>> = Vec::with_capacity(spec.primitives.len());
    for prim in &spec.primitives {
        let mut sh = vec![0.0; b * SH_COEFFS];
        let level = prim.specular_strength.clamp(0.02, 0.98);
        let dc = logit(level) / crate::sh::sh_basis([0.0, 0.0, 1.0])[0];
        let mut lobe = [0.0; SH_COEFFS];
        for (m, c) in lobe.iter_mut().enumerate().skip(1) {
            let mag = if m < 4 { 1.0 } else { 0.5 };
            *c = rng.normal() * mag * prim.specular_strength;
        }
        for band in 0..b {
            sh[band * SH_COEFFS] = dc;
            for m in 1..SH_COEFFS {
                sh[band * SH_COEFFS + m] = lobe[m];
            }
        }
        primitive_sh.push(sh);
    }

    let [nx, ny, nz] = spec.resolution;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let vi = field.voxel_index(x, y, z);
                let p = field.node_position(x, y, z);
                let mut owner: Option<usize> = None;
                for (pi, prim) in spec.primitives.iter().enumerate() {
                    if prim.shape.contains(p) {
                        owner = Some(pi);
                    }
                }
                let params = field.params_mut();
                match owner {
                    None => {
                        params.density_raw[vi] = EMPTY_DENSITY_RAW;
                    }
                    Some(pi) => {
                        let prim = &spec.primitives[pi];
                        params.density_raw[vi] = SOLID_DENSITY_RAW;
                        let logits = abundance_logits_for(&prim.material, k, spec.tau);
                        for (kk, &l) in logits.iter().enumerate() {
                            params.abundance_logits[vi * k + kk] = l as f32;
                        }
                        let s = prim
                            .scaling
                            .value_at(p, &spec.bounds)
                            .clamp(1e-3, 1.0 - 1e-3);
                        let s_logit = logit(s) as f32;
                        for kk in 0..k {
                            params.scaling_logits[vi * k + kk] = s_logit;
                        }
                        let h = prim.tint.clamp(1e-4, 1.0 - 1e-4);
                        params.tint_logit[vi] = logit(h) as f32;
                        for (j, &c) in primitive_sh[pi].iter().enumerate() {
                            params.specular_sh[vi * b * SH_COEFFS + j] = c as f32;
                        }
                        labels[vi] = material_argmax(&prim.material);
                    }
                }
            }
        }
    }

    dilate_material_channels(&mut field, &labels);

    Ok(BuiltScene {
        field,
        voxel_labels: labels,
        endmembers,
    })
}

/// Copies the material channels (abundance/scaling logits, tint, SH) of
/// solid voxels into their empty 6-neighbors. Density stays empty there, so
/// renders are unchanged geometrically, but the trilinear shell around each
/// surface interpolates toward the surface material instead of toward the
/// neutral empty-space values, which would otherwise tint and dim every
/// silhouette.
fn dilate_material_channels(field: &mut VoxelField, labels: &[u16]) {
    let [nx, ny, nz] = field.resolution();
    let k = field.endmember_count();
    let b = field.band_count();
    let sh_len = b * SH_COEFFS;
    let mut writes: Vec<(usize, usize)> = Vec::new(); // (empty voxel, solid source)
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let vi = field.voxel_index(x, y, z);
                if labels[vi] == SENTINEL {
                    continue;
                }
                let neighbors = [
                    (x.wrapping_sub(1), y, z),
                    (x + 1, y, z),
                    (x, y.wrapping_sub(1), z),
                    (x, y + 1, z),
                    (x, y, z.wrapping_sub(1)),
                    (x, y, z + 1),
                ];
                for (ax, ay, az) in neighbors {
                    if ax >= nx || ay >= ny || az >= nz {
                        continue;
                    }
                    let ni = field.voxel_index(ax, ay, az);
                    if labels[ni] == SENTINEL {
                        writes.push((ni, vi));
                    }
                }
            }
        }
    }
    let params = field.params_mut();
    for (dst, src) in writes {
        for kk in 0..k {
            params.abundance_logits[dst * k + kk] = params.abundance_logits[src * k + kk];
            params.scaling_logits[dst * k + kk] = params.scaling_logits[src * k + kk];
        }
        params.tint_logit[dst] = params.tint_logit[src];
        for j in 0..sh_len {
            params.specular_sh[dst * sh_len + j] = params.specular_sh[src * sh_len + j];
        }
    }
}

/// Ground-truth pixel labels for one view, independent of the abundance
/// pipeline: each ray takes the voxel label nearest to its most strongly
/// weighted sample (the first surface it hits). Pixels below the opacity
/// threshold are background.
pub fn ground_truth_labels(
    built: &BuiltScene,
    cam: &Camera,
    near: f64,
    far: f64,
    n_samples: usize,
    opacity_threshold: f64,
) -> Result<crate::segment::LabelMap> {
    use crate::render::{march, MarchOptions};

    let field = &built.field;
    let response = crate::spectral::CameraResponse::default_for_bands(field.band_count())?;
    let opts = MarchOptions {
        n_samples,
        jitter: crate::render::Jitter::Off,
        early_stop: true,
        retain_samples: true,
    };
    let [nx, ny, nz] = field.resolution();
    let bounds = field.bounds();
    let mut labels = vec![SENTINEL; cam.width * cam.height];
    let origin = cam.position();
    for v in 0..cam.height {
        for u in 0..cam.width {
            let ray = crate::camera::Ray::new(origin, cam.pixel_direction(u, v), near, far)?;
            let render = march(field, &response, &ray, &opts)?;
            if render.opacity < opacity_threshold {
                continue;
            }
            let records = render.samples.as_ref().expect("samples retained");
            let hit = records
                .iter()
                .max_by(|a, b| a.weight.partial_cmp(&b.weight).unwrap())
                .expect("at least one sample");
            let p = ray.at(hit.t);
            // Among the labeled corners of the containing cell, take the one
            // with the largest interpolation weight.
            let mut cell = [0usize; 3];
            let mut frac = [0.0f64; 3];
            let res = [nx, ny, nz];
            for a in 0..3 {
                let extent = bounds.max[a] - bounds.min[a];
                let g = ((p[a] - bounds.min[a]) / extent * (res[a] as f64 - 1.0))
                    .clamp(0.0, res[a] as f64 - 1.0);
                let i = (numeric::floor(g) as usize).min(res[a] - 2);
                cell[a] = i;
                frac[a] = g - i as f64;
            }
            let mut best_label = SENTINEL;
            let mut best_weight = -1.0;
            for corner in 0..8 {
                let dx = corner & 1;
                let dy = (corner >> 1) & 1;
                let dz = (corner >> 2) & 1;
                let w = (if dx == 1 { frac[0] } else { 1.0 - frac[0] })
                    * (if dy == 1 { frac[1] } else { 1.0 - frac[1] })
                    * (if dz == 1 { frac[2] } else { 1.0 - frac[2] });
                let vi = field.voxel_index(cell[0] + dx, cell[1] + dy, cell[2] + dz);
                if built.voxel_labels[vi] != SENTINEL && w > best_weight {
                    best_weight = w;
                    best_label = built.voxel_labels[vi];
                }
            }
            labels[v * cam.width + u] = best_label;
        }
    }
    crate::segment::LabelMap::new(cam.width, cam.height, labels)
}

/// Fibonacci-sphere camera positions, all looking at the origin. Returns
/// (train, test) with test views spread uniformly through the sequence.
pub fn build_cameras(rig: &CameraRig) -> Result<(Vec<Camera>, Vec<Camera>)> {
    let total = rig.n_train + rig.n_test;
    let mut train = Vec::with_capacity(rig.n_train);
    let mut test = Vec::with_capacity(rig.n_test);
    let golden_angle = core::f64::consts::PI * (3.0 - numeric::sqrt(5.0));
    for i in 0..total {
        let y = 1.0 - 2.0 * (i as f64 + 0.5) / total as f64;
        let r = numeric::sqrt((1.0f64 - y * y).max(0.0));
        let phi = golden_angle * i as f64;
        let pos = [
            rig.radius * r * numeric::cos(phi),
            rig.radius * y,
            rig.radius * r * numeric::sin(phi),
        ];
        let cam = Camera::look_at(
            rig.focal_px,
            rig.focal_px,
            rig.width as f64 / 2.0,
            rig.height as f64 / 2.0,
            rig.width,
            rig.height,
            pos,
            [0.0, 0.0, 0.0],
        )?;
        // Interleave test views evenly: index i is a test view when the
        // scaled counter crosses an integer boundary.
        let is_test = (i + 1) * rig.n_test / total > i * rig.n_test / total;
        if is_test && test.len() < rig.n_test {
            test.push(cam);
        } else {
            train.push(cam);
        }
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::SerialExec;
    use crate::render::render_image;
    use crate::spectral::{CameraResponse, Spectrum};
    use crate::unmix;

    fn basic_rig() -> CameraRig {
        CameraRig {
            n_train: 6,
            n_test: 2,
            radius: 3.0,
            width: 32,
            height: 32,
            focal_px: 32.0,
        }
    }

    fn sphere_scene(primitives: Vec<Primitive>, k: usize, seed: u64) -> SceneSpec {
        SceneSpec {
            bands: 6,
            endmember_count: k,
            resolution: [12, 12, 12],
            bounds: Aabb::unit_centered(),
            primitives,
            endmember_source: EndmemberSource::Synthetic,
            rig: basic_rig(),
            near: 1.2,
            far: 5.2,
            render_samples: 32,
            tau: 1.0,
            density_scale: 25.0,
            seed,
        }
    }

    #[test]
    fn empty_scene_renders_zero_opacity() {
        let spec = sphere_scene(vec![], 2, 5);
        let built = build_scene(&spec).unwrap();
        let (train, _) = build_cameras(&spec.rig).unwrap();
        let response = CameraResponse::default_for_bands(spec.bands).unwrap();
        let img = render_image(
            &built.field,
            &response,
            &train[0],
            spec.near,
            spec.far,
            spec.render_samples,
            &SerialExec,
        )
        .unwrap();
        assert!(img.opacity.iter().all(|&o| (o as f64) < 1e-9));
        assert!(built.voxel_labels.iter().all(|&l| l == SENTINEL));
    }

    #[test]
    fn single_sphere_labels_voxels() {
        let spec = sphere_scene(
            vec![Primitive {
                shape: Shape::Sphere {
                    center: [0.0, 0.0, 0.0],
                    radius: 0.5,
                },
                material: MaterialMix::Pure(0),
                scaling: ScalingProfile::Constant(0.9),
                tint: 0.0,
                specular_strength: 0.3,
            }],
            1,
            7,
        );
        let built = build_scene(&spec).unwrap();
        let mid = built.field.voxel_index(6, 6, 6);
        assert_eq!(built.voxel_labels[mid], 0);
        let corner = built.field.voxel_index(0, 0, 0);
        assert_eq!(built.voxel_labels[corner], SENTINEL);
    }

    #[test]
    fn voxel_label_is_argmax_of_abundance() {
        let spec = sphere_scene(
            vec![
                Primitive {
                    shape: Shape::Sphere {
                        center: [-0.4, 0.0, 0.0],
                        radius: 0.35,
                    },
                    material: MaterialMix::Pure(1),
                    scaling: ScalingProfile::Constant(0.9),
                    tint: 0.1,
                    specular_strength: 0.3,
                },
                Primitive {
                    shape: Shape::Box {
                        min: [0.1, -0.5, -0.5],
                        max: [0.8, 0.5, 0.5],
                    },
                    material: MaterialMix::Mixed(vec![0.7, 0.1, 0.2]),
                    scaling: ScalingProfile::AxisGradient {
                        axis: 0,
                        lo: 0.5,
                        hi: 0.95,
                    },
                    tint: 0.2,
                    specular_strength: 0.4,
                },
            ],
            3,
            11,
        );
        let built = build_scene(&spec).unwrap();
        let [nx, ny, nz] = spec.resolution;
        let mut opaque = 0;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let vi = built.field.voxel_index(x, y, z);
                    if built.voxel_labels[vi] == SENTINEL {
                        continue;
                    }
                    opaque += 1;
                    let p = built.field.node_position(x, y, z);
                    let s = built.field.sample(p, [0.0, 0.0, 1.0]).unwrap();
                    assert_eq!(
                        s.abundance.argmax() as u16,
                        built.voxel_labels[vi],
                        "voxel ({x},{y},{z})"
                    );
                }
            }
        }
        assert!(opaque > 20, "scene too empty to be meaningful");
    }

    #[test]
    fn synthetic_endmembers_are_separated_and_in_range() {
        let mut rng = Rng::new(1234);
        let e = synthetic_endmembers(8, 4, &mut rng).unwrap();
        for k in 0..4 {
            for &v in e.column(k) {
                assert!((0.0..=1.0).contains(&v));
            }
            for j in (k + 1)..4 {
                let angle = numeric::vector_angle(e.column(k), e.column(j));
                assert!(angle >= 0.2, "angle {angle}");
            }
        }
    }

    #[test]
    fn separation_failure_is_reported() {
        // B = 1 forces every curve parallel: impossible for K = 2.
        let mut rng = Rng::new(3);
        assert!(synthetic_endmembers(1, 2, &mut rng).is_err());
    }

    #[test]
    fn build_is_deterministic() {
        let spec = sphere_scene(
            vec![Primitive {
                shape: Shape::Sphere {
                    center: [0.0, 0.0, 0.0],
                    radius: 0.6,
                },
                material: MaterialMix::Pure(1),
                scaling: ScalingProfile::Constant(0.8),
                tint: 0.3,
                specular_strength: 0.5,
            }],
            2,
            99,
        );
        let a = build_scene(&spec).unwrap();
        let b = build_scene(&spec).unwrap();
        assert_eq!(a.field, b.field);
        assert_eq!(a.voxel_labels, b.voxel_labels);
    }

    #[test]
    fn camera_rig_counts_and_geometry() {
        let rig = CameraRig {
            n_train: 20,
            n_test: 5,
            radius: 3.0,
            width: 64,
            height: 64,
            focal_px: 64.0,
        };
        let (train, test) = build_cameras(&rig).unwrap();
        assert_eq!(train.len(), 20);
        assert_eq!(test.len(), 5);
        for cam in train.iter().chain(&test) {
            let p = cam.position();
            let r = numeric::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
            assert!((r - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rendered_abundance_argmax_matches_first_hit_labels() {
        // Two half-space materials: the per-pixel argmax of the rendered
        // abundance map reproduces the geometric first-hit label map on at
        // least 99% of opaque pixels.
        let spec = sphere_scene(
            vec![
                Primitive {
                    shape: Shape::Box {
                        min: [-0.8, -0.8, -0.8],
                        max: [0.0, 0.8, 0.8],
                    },
                    material: MaterialMix::Pure(0),
                    scaling: ScalingProfile::Constant(0.9),
                    tint: 0.05,
                    specular_strength: 0.3,
                },
                Primitive {
                    shape: Shape::Box {
                        min: [0.0, -0.8, -0.8],
                        max: [0.8, 0.8, 0.8],
                    },
                    material: MaterialMix::Pure(1),
                    scaling: ScalingProfile::Constant(0.9),
                    tint: 0.05,
                    specular_strength: 0.3,
                },
            ],
            2,
            17,
        );
        let built = build_scene(&spec).unwrap();
        let (train, _) = build_cameras(&spec.rig).unwrap();
        let response = CameraResponse::default_for_bands(spec.bands).unwrap();
        let cam = &train[1];
        let gt = ground_truth_labels(&built, cam, spec.near, spec.far, spec.render_samples, 0.5)
            .unwrap();
        let img = render_image(
            &built.field,
            &response,
            cam,
            spec.near,
            spec.far,
            spec.render_samples,
            &SerialExec,
        )
        .unwrap();
        let mut opaque = 0usize;
        let mut agree = 0usize;
        for i in 0..img.opacity.len() {
            if (img.opacity[i] as f64) < 0.5 || gt.labels[i] == SENTINEL {
                continue;
            }
            opaque += 1;
            let a = &img.abundance[i * 2..(i + 1) * 2];
            let argmax = if a[0] >= a[1] { 0u16 } else { 1u16 };
            if argmax == gt.labels[i] {
                agree += 1;
            }
        }
        assert!(opaque > 100, "not enough opaque pixels ({opaque})");
        assert!(
            agree * 100 >= opaque * 99,
            "only {agree}/{opaque} pixels agree"
        );
    }

    /// Closes the loop between scenegen, the renderer and the FCLS oracle:
    /// opaque single-material pixels of rendered views must unmix (with the
    /// ground-truth dictionary) back to their one-hot abundances.
    #[test]
    fn rendered_views_unmix_to_ground_truth_abundances() {
        let spec = SceneSpec {
            bands: 6,
            endmember_count: 2,
            resolution: [14, 14, 14],
            bounds: Aabb::unit_centered(),
            primitives: vec![
                Primitive {
                    shape: Shape::Sphere {
                        center: [-0.45, 0.0, 0.0],
                        radius: 0.4,
                    },
                    material: MaterialMix::Pure(0),
                    scaling: ScalingProfile::Constant(0.999),
                    tint: 0.0,
                    specular_strength: 0.3,
                },
                Primitive {
                    shape: Shape::Sphere {
                        center: [0.45, 0.0, 0.0],
                        radius: 0.4,
                    },
                    material: MaterialMix::Pure(1),
                    scaling: ScalingProfile::Constant(0.999),
                    tint: 0.0,
                    specular_strength: 0.3,
                },
            ],
            endmember_source: EndmemberSource::Synthetic,
            rig: basic_rig(),
            near: 1.2,
            far: 5.2,
            render_samples: 48,
            tau: 1.0,
            density_scale: 25.0,
            seed: 42,
        };
        let built = build_scene(&spec).unwrap();
        let (train, _) = build_cameras(&spec.rig).unwrap();
        let response = CameraResponse::default_for_bands(spec.bands).unwrap();
        let img = render_image(
            &built.field,
            &response,
            &train[0],
            spec.near,
            spec.far,
            spec.render_samples,
            &SerialExec,
        )
        .unwrap();
        let k = spec.endmember_count;
        let mut tested = 0;
        for i in 0..img.opacity.len() {
            if (img.opacity[i] as f64) < 0.999 {
                continue;
            }
            let a = &img.abundance[i * k..(i + 1) * k];
            let (argmax, &amax) = a
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                .unwrap();
            if (amax as f64) < 0.995 {
                continue; // boundary-mixed pixel
            }
            let x = i % 32;
            let y = i / 32;
            let spectrum = Spectrum::new(img.spectral.pixel_spectrum(x, y)).unwrap();
            let recovered =
                unmix::fcls_solve_default(&built.endmembers, &spectrum).unwrap();
            for (kk, &w) in recovered.weights().iter().enumerate() {
                let target = if kk == argmax { 1.0 } else { 0.0 };
                assert!(
                    (w - target).abs() <= 0.02,
                    "pixel ({x},{y}) k={kk}: fcls {w} vs {target}"
                );
            }
            tested += 1;
        }
        assert!(tested > 50, "only {tested} fully opaque pure pixels");
    }
}
