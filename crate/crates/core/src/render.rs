//! Differentiable volumetric rendering.
//!
//! Stratified samples along each ray are queried from the field and
//! accumulated with the standard transmittance weights
//! w_i = T_i (1 - exp(-sigma_i delta_i)), T_i = exp(-sum_{j<i} sigma_j delta_j).
//! Radiance, material abundances and opacity all share the same weights, so
//! the rendered abundance mass equals the rendered opacity. The backward
//! pass is the exact adjoint of the accumulation and chains into the
//! field's per-sample backward.

use alloc::vec;
use alloc::vec::Vec;

use crate::camera::{Camera, Ray};
use crate::cube::SpectralCube;
use crate::exec::{chunk_ranges, Executor};
use crate::field::{GradWrite, PointSampleGrad, SampleScratch, VoxelField};
use crate::numeric;
use crate::rng::Rng;
use crate::spectral::CameraResponse;
use crate::{Error, Result};

/// Early ray termination threshold on remaining transmittance.
const EARLY_STOP_TRANSMITTANCE: f64 = 1e-4;

/// Number of gradient chunks a ray batch is split into. Fixed (independent
/// of worker count) so the ordered merge is reproducible.
pub const GRAD_CHUNKS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Jitter {
    /// Bin midpoints: deterministic, used for evaluation renders.
    Off,
    /// Stratified uniform offset per bin, keyed by the given seed.
    Seeded(u64),
}

#[derive(Debug, Clone, Copy)]
pub struct MarchOptions {
    pub n_samples: usize,
    pub jitter: Jitter,
    /// Stop once transmittance falls below 1e-4. Disabled for gradient
    /// checking, where every sample must participate.
    pub early_stop: bool,
    /// Keep the per-sample record needed by `march_backward`.
    pub retain_samples: bool,
}

impl MarchOptions {
    pub fn eval(n_samples: usize) -> Self {
        MarchOptions {
            n_samples,
            jitter: Jitter::Off,
            early_stop: true,
            retain_samples: false,
        }
    }
}

/// Per-sample record retained for the backward pass.
#[derive(Debug, Clone, Copy)]
pub struct SampleRecord {
    pub t: f64,
    pub delta: f64,
    pub sigma: f64,
    pub transmittance: f64,
    pub weight: f64,
}

/// Accumulated outputs of one ray march.
#[derive(Debug, Clone)]
pub struct RayRender {
    pub radiance: Vec<f64>,
    pub abundance: Vec<f64>,
    pub opacity: f64,
    pub rgb: [f64; 3],
    pub samples: Option<Vec<SampleRecord>>,
}

/// Stratified sample positions in [near, far].
fn sample_positions(ray: &Ray, n: usize, jitter: Jitter) -> Vec<f64> {
    let span = ray.far - ray.near;
    let step = span / n as f64;
    match jitter {
        Jitter::Off => (0..n)
            .map(|i| ray.near + (i as f64 + 0.5) * step)
            .collect(),
        Jitter::Seeded(seed) => {
            let mut rng = Rng::new(seed);
            (0..n)
                .map(|i| ray.near + (i as f64 + rng.next_f64()) * step)
                .collect()
        }
    }
}

/// Marches one ray through the field.
pub fn march(
    field: &VoxelField,
    response: &CameraResponse,
    ray: &Ray,
    opts: &MarchOptions,
) -> Result<RayRender> {
    let mut scratch = SampleScratch::new(field.endmember_count(), field.band_count());
    march_with_scratch(field, response, ray, opts, &mut scratch)
}

/// Same as `march` with a caller-provided scratch buffer for hot loops.
pub fn march_with_scratch(
    field: &VoxelField,
    response: &CameraResponse,
    ray: &Ray,
    opts: &MarchOptions,
    scratch: &mut SampleScratch,
) -> Result<RayRender> {
    if opts.n_samples == 0 {
        return Err(Error::Invalid {
            context: "march",
            detail: alloc::string::String::from("n_samples must be >= 1"),
        });
    }
    if !(ray.near < ray.far) {
        return Err(Error::DegenerateRay {
            near: ray.near,
            far: ray.far,
        });
    }
    let b = field.band_count();
    let k = field.endmember_count();
    let ts = sample_positions(ray, opts.n_samples, opts.jitter);

    let mut radiance = vec![0.0; b];
    let mut abundance = vec![0.0; k];
    let mut opacity = 0.0;
    let mut transmittance = 1.0;
    let mut records: Vec<SampleRecord> = if opts.retain_samples {
        Vec::with_capacity(opts.n_samples)
    } else {
        Vec::new()
    };

    for (i, &t) in ts.iter().enumerate() {
        let delta = if i + 1 < ts.len() {
            ts[i + 1] - t
        } else {
            ray.far - t
        };
        field.sample_into(ray.at(t), ray.dir, scratch)?;
        let sigma = scratch.density;
        let alpha = 1.0 - numeric::exp(-sigma * delta);
        let weight = transmittance * alpha;

        for (acc, &c) in radiance.iter_mut().zip(scratch.radiance.iter()) {
            *acc += weight * c;
        }
        for (acc, &a) in abundance.iter_mut().zip(scratch.abundance.iter()) {
            *acc += weight * a;
        }
        opacity += weight;

        if opts.retain_samples {
            records.push(SampleRecord {
                t,
                delta,
                sigma,
                transmittance,
                weight,
            });
        }
        transmittance *= 1.0 - alpha;
        if opts.early_stop && transmittance < EARLY_STOP_TRANSMITTANCE {
            break;
        }
    }

    let rgb = response.apply_raw(&radiance);
    Ok(RayRender {
        radiance,
        abundance,
        opacity,
        rgb,
        samples: opts.retain_samples.then_some(records),
    })
}

/// Backward through one marched ray.
///
/// `grad_radiance` and `grad_abundance` are dL/dC(r) and dL/dA(r); RGB
/// supervision should be folded into `grad_radiance` via M^T beforehand.
/// With `distance_grad_scaling`, each sample's parameter contribution is
/// scaled by clamp(t_i^2, 0, 1), suppressing near-camera gradients.
pub fn march_backward<G: GradWrite + ?Sized>(
    field: &VoxelField,
    ray: &Ray,
    render: &RayRender,
    grad_radiance: &[f64],
    grad_abundance: &[f64],
    distance_grad_scaling: bool,
    sink: &mut G,
) -> Result<()> {
    let records = render.samples.as_ref().ok_or(Error::MissingSampleRecord)?;
    let b = field.band_count();
    let k = field.endmember_count();
    if grad_radiance.len() != b {
        return Err(Error::BandMismatch {
            context: "march_backward",
            expected: b,
            actual: grad_radiance.len(),
        });
    }
    if grad_abundance.len() != k {
        return Err(Error::EndmemberMismatch {
            context: "march_backward",
            expected: k,
            actual: grad_abundance.len(),
        });
    }

    // Suffix sums over j > i of w_j * <upstream, outputs_j>, needed by
    // d/d sigma_i. Built by walking the samples in reverse.
    let n = records.len();
    let mut suffix = vec![0.0; n + 1]; // suffix[i] = sum_{j>=i} w_j * dot_j
    let mut scratch = SampleScratch::new(k, b);
    let mut dots = vec![0.0; n];
    for (i, rec) in records.iter().enumerate() {
        field.sample_into(ray.at(rec.t), ray.dir, &mut scratch)?;
        let mut dot = 0.0;
        for (g, &c) in grad_radiance.iter().zip(scratch.radiance.iter()) {
            dot += g * c;
        }
        for (g, &a) in grad_abundance.iter().zip(scratch.abundance.iter()) {
            dot += g * a;
        }
        dots[i] = dot;
    }
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + records[i].weight * dots[i];
    }

    let mut grad = PointSampleGrad::zeros(k, b);
    for (i, rec) in records.iter().enumerate() {
        field.sample_into(ray.at(rec.t), ray.dir, &mut scratch)?;
        let scale = if distance_grad_scaling {
            (rec.t * rec.t).clamp(0.0, 1.0)
        } else {
            1.0
        };
        // dC/dc_i = w_i ; dC/dsigma_i = delta_i (T_i e^{-sigma delta} dot_i - sum_{j>i} w_j dot_j)
        let trans_after = rec.transmittance * numeric::exp(-rec.sigma * rec.delta);
        let d_sigma = rec.delta * (trans_after * dots[i] - suffix[i + 1]);
        grad.density = scale * d_sigma;
        for (g, &up) in grad.radiance.iter_mut().zip(grad_radiance) {
            *g = scale * rec.weight * up;
        }
        for (g, &up) in grad.abundance.iter_mut().zip(grad_abundance) {
            *g = scale * rec.weight * up;
        }
        field.sample_backward_into(&scratch, &grad, sink);
    }
    Ok(())
}

/// Full-image render products.
#[derive(Debug, Clone)]
pub struct ImageRender {
    pub spectral: SpectralCube,
    /// Row-major linear RGB.
    pub rgb: Vec<[f32; 3]>,
    /// Row-major, K per pixel.
    pub abundance: Vec<f32>,
    /// Row-major opacity.
    pub opacity: Vec<f32>,
}

/// Renders every pixel of `cam` with deterministic midpoint sampling,
/// parallelized over rows.
pub fn render_image<E: Executor>(
    field: &VoxelField,
    response: &CameraResponse,
    cam: &Camera,
    near: f64,
    far: f64,
    n_samples: usize,
    exec: &E,
) -> Result<ImageRender> {
    let w = cam.width;
    let h = cam.height;
    let b = field.band_count();
    let k = field.endmember_count();
    let opts = MarchOptions::eval(n_samples);

    struct RowOut {
        radiance: Vec<f64>, // w * b
        rgb: Vec<[f32; 3]>,
        abundance: Vec<f32>,
        opacity: Vec<f32>,
    }

    let rows: Vec<Result<RowOut>> = exec.map(h, |v| {
        let mut scratch = SampleScratch::new(k, b);
        let mut out = RowOut {
            radiance: vec![0.0; w * b],
            rgb: vec![[0.0; 3]; w],
            abundance: vec![0.0; w * k],
            opacity: vec![0.0; w],
        };
        let origin = cam.position();
        for u in 0..w {
            let ray = Ray::new(origin, cam.pixel_direction(u, v), near, far)?;
            let r = march_with_scratch(field, response, &ray, &opts, &mut scratch)?;
            for bb in 0..b {
                out.radiance[u * b + bb] = r.radiance[bb];
            }
            out.rgb[u] = [r.rgb[0] as f32, r.rgb[1] as f32, r.rgb[2] as f32];
            for kk in 0..k {
                out.abundance[u * k + kk] = r.abundance[kk] as f32;
            }
            out.opacity[u] = r.opacity as f32;
        }
        Ok(out)
    });

    let mut spectral = SpectralCube::zeros(w, h, b);
    let mut rgb = vec![[0.0f32; 3]; w * h];
    let mut abundance = vec![0.0f32; w * h * k];
    let mut opacity = vec![0.0f32; w * h];
    for (v, row) in rows.into_iter().enumerate() {
        let row = row?;
        for u in 0..w {
            for bb in 0..b {
                spectral.set(u, v, bb, row.radiance[u * b + bb] as f32);
            }
            rgb[v * w + u] = row.rgb[u];
            for kk in 0..k {
                abundance[(v * w + u) * k + kk] = row.abundance[u * k + kk];
            }
            opacity[v * w + u] = row.opacity[u];
        }
    }
    Ok(ImageRender {
        spectral,
        rgb,
        abundance,
        opacity,
    })
}

/// Splits `n_rays` into the fixed number of gradient chunks.
pub fn grad_chunks(n_rays: usize) -> Vec<core::ops::Range<usize>> {
    chunk_ranges(n_rays, GRAD_CHUNKS)
}
