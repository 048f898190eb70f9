//! Joint optimization of the voxel field and endmember dictionary.
//!
//! Minimizes lambda_spec * L_spec + lambda_rgb * L_rgb over random ray
//! batches with Adam and an exponential learning-rate schedule. RGB ground
//! truth is synthesized from the spectral ground truth through the camera
//! response, the endmember dictionary is clamped to [0, 1] after every
//! step, and per-sample gradients can be scaled by clamp(t^2, 0, 1) to
//! suppress near-camera floaters.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::camera::Ray;
use crate::cube::SpectralCube;
use crate::exec::Executor;
use crate::field::{Aabb, AbundanceActivation, AtomicGradBuffer, GradBuffer, VoxelField};
use crate::numeric;
use crate::render::{grad_chunks, march_backward, march_with_scratch, Jitter, MarchOptions};
use crate::rng::{Rng, Stream};
use crate::spectral::{CameraResponse, EndmemberDictionary, LossWeights};
use crate::unmix::{vca_extract, PixelMatrix};
use crate::{Error, Result};

/// One posed spectral training view.
#[derive(Debug, Clone)]
pub struct TrainView {
    pub camera: crate::camera::Camera,
    pub spectral: SpectralCube,
}

/// In-memory dataset: posed spectral views plus clip planes and the camera
/// response used to derive RGB supervision.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub views: Vec<TrainView>,
    pub near: f64,
    pub far: f64,
    pub response: CameraResponse,
}

impl Dataset {
    pub fn new(views: Vec<TrainView>, near: f64, far: f64) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let bands = views[0].spectral.bands();
        for (i, v) in views.iter().enumerate() {
            if v.spectral.bands() != bands {
                return Err(Error::BandMismatch {
                    context: "dataset view",
                    expected: bands,
                    actual: v.spectral.bands(),
                });
            }
            if v.spectral.width() != v.camera.width || v.spectral.height() != v.camera.height {
                return Err(Error::Invalid {
                    context: "dataset view",
                    detail: format!(
                        "view {i}: cube {}x{} does not match camera {}x{}",
                        v.spectral.width(),
                        v.spectral.height(),
                        v.camera.width,
                        v.camera.height
                    ),
                });
            }
        }
        let response = CameraResponse::default_for_bands(bands)?;
        Ok(Dataset {
            views,
            near,
            far,
            response,
        })
    }

    pub fn bands(&self) -> usize {
        self.views[0].spectral.bands()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndmemberInit {
    /// Vertex component analysis over a subsampled union of all training
    /// pixels (at most 100k).
    Vca,
    /// Uniform random in [0, 1].
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda_spec: f64,
    pub lambda_rgb: f64,
    pub learning_rate: f64,
    pub lr_final: f64,
    pub iterations: usize,
    pub rays_per_batch: usize,
    pub n_samples: usize,
    pub tau: f64,
    pub seed: u64,
    pub grad_scaling: bool,
    pub endmember_init: EndmemberInit,
    pub adam: AdamParams,
    pub resolution: [usize; 3],
    pub endmember_count: usize,
    pub bounds: Aabb,
    pub density_scale: f64,
    /// Stratified jitter of sample positions during training.
    pub jitter: bool,
    /// Learning-rate multiplier for the endmember dictionary. The global
    /// dictionary sees gradients from every ray while per-voxel parameters
    /// see only the rays that touch them; a smaller dictionary step keeps
    /// the columns anchored to their initialization instead of letting the
    /// scaling ambiguity scramble them.
    pub endmember_lr_scale: f64,
    /// Ordered gradient reduction (bitwise reproducible) versus shared
    /// atomic accumulation.
    pub deterministic: bool,
    pub log_every: usize,
    // Ablation switches.
    pub specular_enabled: bool,
    pub scaling_enabled: bool,
    pub constraints_enabled: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_spec: 5.0,
            lambda_rgb: 1.0,
            learning_rate: 1e-2,
            lr_final: 1e-3,
            iterations: 20_000,
            rays_per_batch: 4096,
            n_samples: 96,
            tau: 1.0,
            seed: 0,
            grad_scaling: true,
            endmember_init: EndmemberInit::Vca,
            adam: AdamParams::default(),
            resolution: [64, 64, 64],
            endmember_count: 3,
            bounds: Aabb::unit_centered(),
            density_scale: 25.0,
            endmember_lr_scale: 0.1,
            jitter: true,
            deterministic: true,
            log_every: 100,
            specular_enabled: true,
            scaling_enabled: true,
            constraints_enabled: true,
        }
    }
}

impl TrainConfig {
    /// Desk-scale preset: 16^3 grid, K = 3, 2000 iterations. The shorter
    /// schedule runs far hotter than the 20k-iteration default so the
    /// optimizer keeps a comparable total movement budget; interior-camera
    /// desk rigs keep every sample distance under one scene unit, so the
    /// squared-distance gradient scaling stays off here.
    pub fn desk() -> Self {
        TrainConfig {
            iterations: 2000,
            rays_per_batch: 1024,
            n_samples: 64,
            resolution: [16, 16, 16],
            endmember_count: 3,
            learning_rate: 3e-1,
            lr_final: 2e-3,
            endmember_lr_scale: 0.01,
            grad_scaling: false,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        LossWeights::new(self.lambda_spec, self.lambda_rgb)?;
        if !(self.learning_rate > 0.0 && self.lr_final > 0.0) {
            return Err(Error::Invalid {
                context: "train config",
                detail: String::from("learning rates must be positive"),
            });
        }
        if self.iterations == 0 || self.rays_per_batch == 0 || self.n_samples == 0 {
            return Err(Error::Invalid {
                context: "train config",
                detail: String::from("iterations, rays_per_batch and n_samples must be >= 1"),
            });
        }
        if !(self.tau > 0.0) {
            return Err(Error::NonPositiveTau { tau: self.tau });
        }
        if self.endmember_count == 0 {
            return Err(Error::Invalid {
                context: "train config",
                detail: String::from("endmembers must be >= 1"),
            });
        }
        Ok(())
    }
}

/// Cumulative ablation ladder, from the full model down to the
/// unconstrained baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    Full,
    NoSpecular,
    RandomInit,
    NoRgbLoss,
    NoScaling,
    Unconstrained,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::Full,
        Ablation::NoSpecular,
        Ablation::RandomInit,
        Ablation::NoRgbLoss,
        Ablation::NoScaling,
        Ablation::Unconstrained,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoSpecular => "no-specular",
            Ablation::RandomInit => "random-init",
            Ablation::NoRgbLoss => "no-rgb-loss",
            Ablation::NoScaling => "no-scaling",
            Ablation::Unconstrained => "unconstrained",
        }
    }

    pub fn from_name(name: &str) -> Option<Ablation> {
        Ablation::ALL.iter().copied().find(|a| a.name() == name)
    }
}

/// Applies one ablation level cumulatively (each level also disables
/// everything the weaker levels disable).
pub fn apply_ablation(base: &TrainConfig, ablation: Ablation) -> TrainConfig {
    let mut cfg = base.clone();
    let level = Ablation::ALL
        .iter()
        .position(|a| *a == ablation)
        .unwrap_or(0);
    if level >= 1 {
        cfg.specular_enabled = false;
    }
    if level >= 2 {
        cfg.endmember_init = EndmemberInit::Random;
    }
    if level >= 3 {
        cfg.lambda_rgb = 0.0;
    }
    if level >= 4 {
        cfg.scaling_enabled = false;
    }
    if level >= 5 {
        cfg.constraints_enabled = false;
    }
    cfg
}

/// Every ablation variant of a base configuration, strongest first.
pub fn ablation_toggles(base: &TrainConfig) -> Vec<(Ablation, TrainConfig)> {
    Ablation::ALL
        .iter()
        .map(|&a| (a, apply_ablation(base, a)))
        .collect()
}

/// Per-ray upstream gradients produced by the batch loss.
#[derive(Debug, Clone)]
pub struct RayLossGrad {
    pub radiance: Vec<f64>,
    pub rgb: [f64; 3],
}

/// Batch loss over rendered rays:
/// L = lambda_spec * mean_r ||C - C*||^2 + lambda_rgb * mean_r ||rgb - rgb*||^2,
/// with analytic gradients with respect to the predictions.
pub fn batch_loss(
    pred_radiance: &[Vec<f64>],
    pred_rgb: &[[f64; 3]],
    gt_radiance: &[Vec<f64>],
    gt_rgb: &[[f64; 3]],
    weights: &LossWeights,
) -> Result<(f64, Vec<RayLossGrad>)> {
    let n = pred_radiance.len();
    if n == 0 || pred_rgb.len() != n || gt_radiance.len() != n || gt_rgb.len() != n {
        return Err(Error::Invalid {
            context: "batch_loss",
            detail: format!(
                "batch shapes disagree: {} / {} / {} / {}",
                pred_radiance.len(),
                pred_rgb.len(),
                gt_radiance.len(),
                gt_rgb.len()
            ),
        });
    }
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(n);
    for i in 0..n {
        if pred_radiance[i].len() != gt_radiance[i].len() {
            return Err(Error::BandMismatch {
                context: "batch_loss",
                expected: gt_radiance[i].len(),
                actual: pred_radiance[i].len(),
            });
        }
        let mut g = RayLossGrad {
            radiance: vec![0.0; pred_radiance[i].len()],
            rgb: [0.0; 3],
        };
        let mut spec_sq = 0.0;
        for (b, (&p, &t)) in pred_radiance[i].iter().zip(&gt_radiance[i]).enumerate() {
            let d = p - t;
            spec_sq += d * d;
            g.radiance[b] = 2.0 * weights.lambda_spec * d * inv_n;
        }
        let mut rgb_sq = 0.0;
        for c in 0..3 {
            let d = pred_rgb[i][c] - gt_rgb[i][c];
            rgb_sq += d * d;
            g.rgb[c] = 2.0 * weights.lambda_rgb * d * inv_n;
        }
        total += (weights.lambda_spec * spec_sq + weights.lambda_rgb * rgb_sq) * inv_n;
        grads.push(g);
    }
    Ok((total, grads))
}

/// Adam first/second moments plus the step counter, shaped like the field
/// parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub m: GradBuffer,
    pub v: GradBuffer,
}

impl AdamState {
    pub fn zeros_like(field: &VoxelField) -> Self {
        AdamState {
            step: 0,
            m: GradBuffer::zeros_like(field),
            v: GradBuffer::zeros_like(field),
        }
    }
}

fn adam_update_array(
    params: &mut [f32],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    adam: &AdamParams,
    bias1: f64,
    bias2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g;
        v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g * g;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        let p = params[i] as f64 - lr * m_hat / (numeric::sqrt(v_hat) + adam.epsilon);
        params[i] = p as f32;
    }
}

/// One Adam step over every parameter array. The endmember dictionary
/// moves at `lr * endmember_lr_scale`.
pub fn adam_step(
    field: &mut VoxelField,
    grads: &GradBuffer,
    state: &mut AdamState,
    lr: f64,
    endmember_lr_scale: f64,
    adam: &AdamParams,
) {
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - numeric::powf(adam.beta1, t as f64);
    let bias2 = 1.0 - numeric::powf(adam.beta2, t as f64);
    let params = field.params_mut();
    adam_update_array(
        params.endmembers,
        &grads.endmembers,
        &mut state.m.endmembers,
        &mut state.v.endmembers,
        lr * endmember_lr_scale,
        adam,
        bias1,
        bias2,
    );
    adam_update_array(
        params.density_raw,
        &grads.density_raw,
        &mut state.m.density_raw,
        &mut state.v.density_raw,
        lr,
        adam,
        bias1,
        bias2,
    );
    adam_update_array(
        params.abundance_logits,
        &grads.abundance_logits,
        &mut state.m.abundance_logits,
        &mut state.v.abundance_logits,
        lr,
        adam,
        bias1,
        bias2,
    );
    adam_update_array(
        params.scaling_logits,
        &grads.scaling_logits,
        &mut state.m.scaling_logits,
        &mut state.v.scaling_logits,
        lr,
        adam,
        bias1,
        bias2,
    );
    adam_update_array(
        params.tint_logit,
        &grads.tint_logit,
        &mut state.m.tint_logit,
        &mut state.v.tint_logit,
        lr,
        adam,
        bias1,
        bias2,
    );
    adam_update_array(
        params.specular_sh,
        &grads.specular_sh,
        &mut state.m.specular_sh,
        &mut state.v.specular_sh,
        lr,
        adam,
        bias1,
        bias2,
    );
}

/// Exponential decay lr(t) = lr * (lr_final / lr)^(t / iterations).
pub fn lr_at(cfg: &TrainConfig, iteration: usize) -> f64 {
    cfg.learning_rate
        * numeric::powf(
            cfg.lr_final / cfg.learning_rate,
            iteration as f64 / cfg.iterations as f64,
        )
}

/// Derives a stable u64 from seed words (used for per-ray jitter streams).
pub fn derive_seed(parts: &[u64]) -> u64 {
    Rng::from_parts(parts).next_u64()
}

/// Builds the initial field for a training run, honoring the endmember
/// init policy and the ablation switches (disabled components are pinned by
/// saturated logits, which also freezes their gradients).
pub fn init_field(dataset: &Dataset, cfg: &TrainConfig) -> Result<VoxelField> {
    let bands = dataset.bands();
    let k = cfg.endmember_count;
    let endmembers = match cfg.endmember_init {
        EndmemberInit::Random => {
            let mut rng = Rng::substream(cfg.seed, Stream::Init);
            let cols: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..bands).map(|_| rng.next_f64()).collect())
                .collect();
            EndmemberDictionary::from_columns(&cols)?
        }
        EndmemberInit::Vca => {
            vca_init_dictionary(dataset, k, derive_seed(&[cfg.seed, Stream::Vca as u64]))?
        }
    };

    let mut field = VoxelField::new(
        cfg.resolution,
        cfg.bounds,
        &endmembers,
        cfg.tau,
        cfg.density_scale,
    )?;
    field.abundance_activation = if cfg.constraints_enabled {
        AbundanceActivation::Softmax
    } else {
        AbundanceActivation::Linear
    };
    {
        let params = field.params_mut();
        // Translucent haze lets early gradients reach the whole volume.
        for v in params.density_raw.iter_mut() {
            *v = -4.0;
        }
        // In linear (unconstrained) mode zero weights would render black and
        // kill all gradients; start near the uniform mixture instead.
        if !cfg.constraints_enabled {
            let k = cfg.endmember_count as f32;
            for v in params.abundance_logits.iter_mut() {
                *v = 1.0 / k;
            }
        }
        if !cfg.scaling_enabled {
            // sigmoid(40) == 1 to double precision; gradient is ~4e-18, so
            // the scalings stay pinned at one.
            for v in params.scaling_logits.iter_mut() {
                *v = 40.0;
            }
        }
        // Specular starts nearly gated off; the tint only opens where the
        // diffuse mixture cannot explain the view dependence, which keeps
        // early geometry noise out of the SH coefficients.
        for v in params.tint_logit.iter_mut() {
            *v = if cfg.specular_enabled { -4.0 } else { -40.0 };
        }
    }
    Ok(field)
}

/// The pixel pool the VCA initializer runs on: a uniformly subsampled
/// union of all training-view pixels (at most 100k). Pixels darker than
/// 15% of the brightest pixel are dropped first: background and silhouette
/// shells carry no usable material signature, and the affine VCA path
/// would otherwise extract the dark end of some material's brightness
/// line as a spurious near-zero endmember.
pub fn vca_init_pixels(dataset: &Dataset) -> Result<PixelMatrix> {
    const MAX_PIXELS: usize = 100_000;
    const RELATIVE_DARK_THRESHOLD: f64 = 0.15;
    let mut all: Vec<Vec<f64>> = Vec::new();
    let mut brightest = 0.0f64;
    for view in &dataset.views {
        for y in 0..view.spectral.height() {
            for x in 0..view.spectral.width() {
                let spec: Vec<f64> = view
                    .spectral
                    .pixel_spectrum(x, y)
                    .iter()
                    .map(|v| v.clamp(0.0, 1.0))
                    .collect();
                brightest = brightest.max(spec.iter().cloned().fold(0.0, f64::max));
                all.push(spec);
            }
        }
    }
    let threshold = brightest * RELATIVE_DARK_THRESHOLD;
    let lit: Vec<Vec<f64>> = all
        .into_iter()
        .filter(|spec| spec.iter().cloned().fold(0.0, f64::max) >= threshold && threshold > 0.0)
        .collect();
    if lit.is_empty() {
        return Err(Error::Invalid {
            context: "vca init",
            detail: String::from("no training pixel clears the relative brightness threshold"),
        });
    }
    let stride = lit.len().div_ceil(MAX_PIXELS).max(1);
    let subsampled: Vec<Vec<f64>> = lit.into_iter().step_by(stride).collect();
    PixelMatrix::from_pixels(&subsampled)
}

/// VCA initialization of the dictionary: extract K extreme pixels, then
/// replace each by a bright (90th-percentile norm) pool pixel from the
/// 0.05 rad cone around it. Scaled copies of one material share a
/// direction, so this recovers a lightly-attenuated representative of each
/// extracted signature without chasing specular highlights, which sit at
/// the extreme brightness tail with the worst spectral contamination.
pub fn vca_init_dictionary(
    dataset: &Dataset,
    k: usize,
    seed: u64,
) -> Result<EndmemberDictionary> {
    let pool = vca_init_pixels(dataset)?;
    let dict = vca_extract(&pool, k, seed)?;
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    for kk in 0..k {
        let col = dict.column(kk);
        let mut cone: Vec<(f64, usize)> = Vec::new();
        for p in 0..pool.pixel_count() {
            let candidate = pool.pixel(p);
            if crate::numeric::vector_angle(candidate, col) <= 0.05 {
                cone.push((crate::numeric::norm(candidate), p));
            }
        }
        if cone.is_empty() {
            columns.push(col.to_vec());
            continue;
        }
        cone.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let pick = cone[(cone.len() - 1) * 9 / 10].1;
        columns.push(pool.pixel(pick).to_vec());
    }
    EndmemberDictionary::from_columns(&columns)
}

/// Snapshot to resume from: a field, optional optimizer moments, and the
/// iteration to continue at.
#[derive(Debug, Clone)]
pub struct TrainStart {
    pub field: VoxelField,
    pub adam: Option<AdamState>,
    pub iteration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSample {
    pub iteration: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub field: VoxelField,
    pub adam: AdamState,
    pub history: Vec<LossSample>,
}

struct BatchRay {
    view: usize,
    u: usize,
    v: usize,
}

fn sample_batch(dataset: &Dataset, cfg: &TrainConfig, iteration: usize) -> Vec<BatchRay> {
    let mut rng = Rng::substream(cfg.seed, Stream::Train).fork(&[iteration as u64]);
    (0..cfg.rays_per_batch)
        .map(|_| {
            let view = rng.index(dataset.views.len());
            let cam = &dataset.views[view].camera;
            BatchRay {
                view,
                u: rng.index(cam.width),
                v: rng.index(cam.height),
            }
        })
        .collect()
}

/// Trains the field on the dataset. `resume` continues from a snapshot
/// (restarting moments when none were saved); the progress callback fires
/// every `log_every` iterations with (iteration, loss, lr).
pub fn train<E: Executor>(
    dataset: &Dataset,
    cfg: &TrainConfig,
    exec: &E,
    resume: Option<TrainStart>,
    mut progress: Option<&mut dyn FnMut(usize, f64, f64)>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.views.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let bands = dataset.bands();

    let (mut field, mut adam_state, start_iteration) = match resume {
        Some(start) => {
            let adam = start
                .adam
                .unwrap_or_else(|| AdamState::zeros_like(&start.field));
            (start.field, adam, start.iteration)
        }
        None => {
            let field = init_field(dataset, cfg)?;
            let adam = AdamState::zeros_like(&field);
            (field, adam, 0)
        }
    };
    if field.band_count() != bands {
        return Err(Error::BandMismatch {
            context: "train",
            expected: bands,
            actual: field.band_count(),
        });
    }

    // RGB ground truth derived once per view through the camera response.
    let rgb_gt: Vec<Vec<[f64; 3]>> = dataset
        .views
        .iter()
        .map(|view| {
            let mut out = Vec::with_capacity(view.camera.width * view.camera.height);
            for y in 0..view.camera.height {
                for x in 0..view.camera.width {
                    let spec = view.spectral.pixel_spectrum(x, y);
                    out.push(dataset.response.apply_raw(&spec));
                }
            }
            out
        })
        .collect();

    let weights = LossWeights::new(cfg.lambda_spec, cfg.lambda_rgb)?;
    let k = field.endmember_count();
    let inv_n = 1.0 / cfg.rays_per_batch as f64;
    let mut history = Vec::new();

    for t in start_iteration..cfg.iterations {
        let lr = lr_at(cfg, t);
        let batch = sample_batch(dataset, cfg, t);
        let chunks = grad_chunks(batch.len());

        // Fused forward + backward per chunk. Chunk boundaries are fixed,
        // so the ordered reduction below is reproducible for any executor.
        let atomic = if cfg.deterministic {
            None
        } else {
            Some(AtomicGradBuffer::zeros_like(&field))
        };

        let run_chunk = |ci: usize| -> Result<ChunkResult> {
            let range = chunks[ci].clone();
            let mut dense = if cfg.deterministic {
                Some(GradBuffer::zeros_like(&field))
            } else {
                None
            };
            let mut scratch = crate::field::SampleScratch::new(k, bands);
            let mut loss_sum = 0.0;
            let opts = MarchOptions {
                n_samples: cfg.n_samples,
                jitter: Jitter::Off, // replaced per ray below
                early_stop: true,
                retain_samples: true,
            };
            for slot in range {
                let br = &batch[slot];
                let view = &dataset.views[br.view];
                let ray = Ray::new(
                    view.camera.position(),
                    view.camera.pixel_direction(br.u, br.v),
                    dataset.near,
                    dataset.far,
                )?;
                let ray_opts = MarchOptions {
                    jitter: if cfg.jitter {
                        Jitter::Seeded(derive_seed(&[
                            cfg.seed ^ (Stream::Jitter as u64).rotate_left(32),
                            ((t as u64) << 24) ^ slot as u64,
                        ]))
                    } else {
                        Jitter::Off
                    },
                    ..opts
                };
                let render = march_with_scratch(&field, &dataset.response, &ray, &ray_opts, &mut scratch)?;

                let gt_spec = view.spectral.pixel_spectrum(br.u, br.v);
                let gt_rgb = rgb_gt[br.view][br.v * view.camera.width + br.u];

                // Residuals are measured at storage (f32) precision, the
                // same precision the ground-truth cubes carry: a dataset
                // rendered from this very field is then an exact fixed
                // point with identically zero gradients.
                let pred_spec: Vec<f64> =
                    render.radiance.iter().map(|&v| v as f32 as f64).collect();
                let pred_rgb = dataset.response.apply_raw(&pred_spec);
                let mut grad_radiance = vec![0.0; bands];
                let mut spec_sq = 0.0;
                for b in 0..bands {
                    let d = pred_spec[b] - gt_spec[b];
                    spec_sq += d * d;
                    grad_radiance[b] = 2.0 * weights.lambda_spec * d * inv_n;
                }
                let mut rgb_sq = 0.0;
                let mut grad_rgb = [0.0; 3];
                for c in 0..3 {
                    let d = pred_rgb[c] - gt_rgb[c];
                    rgb_sq += d * d;
                    grad_rgb[c] = 2.0 * weights.lambda_rgb * d * inv_n;
                }
                loss_sum += (weights.lambda_spec * spec_sq + weights.lambda_rgb * rgb_sq) * inv_n;

                // Fold the RGB gradient back onto the spectrum: M^T g_rgb.
                let folded = dataset.response.transpose_apply(grad_rgb);
                for (g, f) in grad_radiance.iter_mut().zip(&folded) {
                    *g += f;
                }
                let grad_abundance = vec![0.0; k];

                match (&mut dense, &atomic) {
                    (Some(buf), _) => march_backward(
                        &field,
                        &ray,
                        &render,
                        &grad_radiance,
                        &grad_abundance,
                        cfg.grad_scaling,
                        buf,
                    )?,
                    (None, Some(shared)) => {
                        let mut sink = shared;
                        march_backward(
                            &field,
                            &ray,
                            &render,
                            &grad_radiance,
                            &grad_abundance,
                            cfg.grad_scaling,
                            &mut sink,
                        )?
                    }
                    (None, None) => unreachable!(),
                }
            }
            Ok(ChunkResult {
                loss_sum,
                grads: match dense {
                    Some(buf) => ChunkGrads::Dense(buf),
                    None => ChunkGrads::Atomic,
                },
            })
        };

        let results = exec.map(chunks.len(), run_chunk);

        let mut loss = 0.0;
        let mut total = GradBuffer::zeros_like(&field);
        for r in results {
            let r = r?;
            loss += r.loss_sum;
            if let ChunkGrads::Dense(buf) = r.grads {
                total.accumulate(&buf);
            }
        }
        if let Some(shared) = &atomic {
            total = shared.to_dense(&field);
        }

        if !loss.is_finite() {
            return Err(Error::NanLoss { iteration: t, lr });
        }

        adam_step(
            &mut field,
            &total,
            &mut adam_state,
            lr,
            cfg.endmember_lr_scale,
            &cfg.adam,
        );
        field.clamp_endmembers();

        if t % cfg.log_every == 0 || t + 1 == cfg.iterations {
            history.push(LossSample {
                iteration: t,
                loss,
                lr,
            });
            if let Some(cb) = progress.as_mut() {
                cb(t, loss, lr);
            }
        }
    }

    Ok(TrainOutcome {
        field,
        adam: adam_state,
        history,
    })
}

/// Per-chunk gradient destination for one training step.
enum ChunkGrads {
    Dense(GradBuffer),
    Atomic,
}

struct ChunkResult {
    loss_sum: f64,
    grads: ChunkGrads,
}
