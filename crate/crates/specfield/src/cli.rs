//! The `specfield` command-line interface.
//!
//! Subcommands cover the whole pipeline: synthesize a ground-truth dataset,
//! initialize endmembers, train, render novel views, segment materials,
//! evaluate against ground truth, edit the endmember dictionary of a
//! trained checkpoint, and run the finite-difference gradient check.
//!
//! Exit codes: 0 success, 2 user/config error, 3 numeric failure, 4 I/O.

use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};

use specfield_core::gradcheck;
use specfield_core::metrics::{self, MetricReport};
use specfield_core::render::render_image;
use specfield_core::scene::build_scene;
use specfield_core::segment::segment_image;
use specfield_core::spectral::{CameraResponse, Spectrum};
use specfield_core::train::{
    apply_ablation, train, vca_init_pixels, Ablation, TrainConfig, TrainStart,
};
use specfield_core::unmix::vca_extract;

use crate::config::{apply_config_text, preset, render_config, CONFIG_KEYS};
use crate::dataset::{self, load_dataset};
use crate::error::{CliError, CliResult};
use crate::exec::RayonExec;
use crate::io::{checkpoint, cube, labelmap, optstate, pnm, poses};
use crate::scenefile;

#[derive(Parser, Debug)]
#[command(
    name = "specfield",
    version,
    about = "Spectral-unmixing radiance fields on an explicit voxel grid",
    max_term_width = 100
)]
pub struct Cli {
    /// Worker threads (default: machine parallelism, or SPECFIELD_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Force ordered (bitwise reproducible) gradient reductions.
    #[arg(long, global = true)]
    pub deterministic: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize a ground-truth dataset from a scene specification.
    Synth(SynthArgs),
    /// Extract endmembers from a dataset's training pixels with VCA.
    #[command(name = "init-endmembers")]
    InitEndmembers(InitEndmembersArgs),
    /// Train a field on a dataset.
    Train(TrainArgs),
    /// Render spectral cubes, RGB previews, abundance and opacity maps.
    Render(RenderArgs),
    /// Segment materials with the cluster probe.
    Segment(SegmentArgs),
    /// Evaluate rendered cubes against ground truth.
    Eval(EvalArgs),
    /// Replace one endmember of a checkpoint.
    Edit(EditArgs),
    /// Verify analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Print the full flag and file-format reference.
    Manual,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Scene spec: a path, or a bundled name (desk, desk-two).
    #[arg(long)]
    pub spec: String,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the scene's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the ground-truth field as a UMF1 checkpoint.
    #[arg(long)]
    pub emit_field: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InitEndmembersArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of endmembers to extract.
    #[arg(long)]
    pub k: usize,
    /// Seed for the VCA projection directions.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output endmember text file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Output checkpoint (UMF1).
    #[arg(long)]
    pub out: PathBuf,
    /// Config file of key = value lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named preset applied before the config file (desk).
    #[arg(long)]
    pub preset: Option<String>,
    /// Ablation variant: full, no-specular, random-init, no-rgb-loss,
    /// no-scaling, unconstrained.
    #[arg(long)]
    pub ablation: Option<String>,
    /// Master seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Iteration count override.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Rays per batch override.
    #[arg(long)]
    pub rays_per_batch: Option<usize>,
    /// Samples per ray override.
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// Dictionary size override.
    #[arg(long)]
    pub endmembers: Option<usize>,
    /// Resume from an existing checkpoint; continues the iteration counter
    /// when its .opt sidecar exists, otherwise restarts moments.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Save full optimizer state next to the checkpoint (<out>.opt).
    #[arg(long)]
    pub save_optimizer: bool,
    /// Gradient accumulation: ordered (reproducible) or atomic (fast).
    #[arg(long)]
    pub accumulation: Option<String>,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Pose file listing the frames to render.
    #[arg(long)]
    pub poses: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Which pose-file frames to render: all, train, test.
    #[arg(long, default_value = "all")]
    pub frames: String,
    /// Stratified samples per ray.
    #[arg(long, default_value_t = 64)]
    pub n_samples: usize,
    /// Comma list from spectral,rgb,abundance,opacity.
    #[arg(long, default_value = "spectral,rgb,abundance,opacity")]
    pub outputs: String,
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Pose file listing the frames to segment.
    #[arg(long)]
    pub poses: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Which pose-file frames to segment: all, train, test.
    #[arg(long, default_value = "all")]
    pub frames: String,
    /// Stratified samples per ray.
    #[arg(long, default_value_t = 64)]
    pub n_samples: usize,
    /// Pixels below this opacity become background.
    #[arg(long, default_value_t = 0.5)]
    pub opacity_threshold: f64,
    /// Label by rendered abundance argmax instead of the radiance probe.
    #[arg(long)]
    pub use_abundance: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of predicted cubes (*.hsc).
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth cubes with matching names.
    #[arg(long)]
    pub gt: PathBuf,
    /// Write the plain-text report here as well as stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit per-view MRAE heatmaps (PGM) into the pred directory.
    #[arg(long)]
    pub heatmaps: bool,
    /// Fixed MRAE range mapped to 0..255 in heatmaps.
    #[arg(long, default_value_t = 1.0)]
    pub heatmap_max: f64,
    /// Also report per-band PSNR.
    #[arg(long)]
    pub per_band: bool,
}

#[derive(Args, Debug)]
pub struct EditArgs {
    /// Input checkpoint.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Index of the endmember column to replace.
    #[arg(long)]
    pub endmember: usize,
    /// Text file of B whitespace-separated reflectance values in [0,1].
    #[arg(long)]
    pub spectrum: PathBuf,
    /// Output checkpoint.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Central-difference step on raw parameters.
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    /// Maximum relative error.
    #[arg(long, default_value_t = 2e-3)]
    pub tolerance: f64,
    /// Finite-difference probes per parameter class (six classes).
    #[arg(long, default_value_t = 170)]
    pub params_per_class: usize,
}

fn build_exec(threads: Option<usize>) -> CliResult<RayonExec> {
    let n = match threads {
        Some(n) => Some(n),
        None => std::env::var("SPECFIELD_THREADS")
            .ok()
            .map(|v| {
                v.parse::<usize>().map_err(|_| {
                    CliError::usage(format!("SPECFIELD_THREADS is not a number: {v:?}"))
                })
            })
            .transpose()?,
    };
    match n {
        Some(n) => RayonExec::with_threads(n)
            .map_err(|e| CliError::usage(format!("could not build thread pool: {e}"))),
        None => Ok(RayonExec::default_pool()),
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let exec = build_exec(cli.threads)?;
    match cli.command {
        Command::Synth(args) => run_synth(args, &exec),
        Command::InitEndmembers(args) => run_init_endmembers(args),
        Command::Train(args) => run_train(args, cli.deterministic, &exec),
        Command::Render(args) => run_render(args, &exec),
        Command::Segment(args) => run_segment(args, &exec),
        Command::Eval(args) => run_eval(args),
        Command::Edit(args) => run_edit(args),
        Command::Gradcheck(args) => run_gradcheck(args),
        Command::Manual => {
            print!("{}", manual_text());
            Ok(())
        }
    }
}

fn run_synth(args: SynthArgs, exec: &RayonExec) -> CliResult<()> {
    let mut spec = scenefile::load_scene_spec(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    println!("spec = {}", args.spec);
    println!("seed = {}", spec.seed);
    println!("bands = {}", spec.bands);
    println!("endmembers = {}", spec.endmember_count);
    println!(
        "views = {} train + {} test at {}x{}",
        spec.rig.n_train, spec.rig.n_test, spec.rig.width, spec.rig.height
    );
    let built = build_scene(&spec).map_err(CliError::from_core)?;
    let manifest = dataset::emit_dataset(&spec, &built, &args.out, exec)?;
    println!(
        "wrote {} files to {}",
        manifest.files.len() + 1,
        args.out.display()
    );
    if let Some(path) = &args.emit_field {
        checkpoint::write_checkpoint(&built.field, path)?;
        println!("wrote ground-truth field {}", path.display());
    }
    Ok(())
}

fn run_init_endmembers(args: InitEndmembersArgs) -> CliResult<()> {
    let disk = load_dataset(&args.data)?;
    println!("data = {}", args.data.display());
    println!("k = {}", args.k);
    println!("seed = {}", args.seed);
    let train_set = disk.train_dataset()?;
    let matrix = vca_init_pixels(&train_set).map_err(CliError::from_core)?;
    let dict = vca_extract(&matrix, args.k, args.seed).map_err(CliError::from_core)?;
    crate::io::write_file(&args.out, dataset::encode_endmembers(&dict).as_bytes())?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_train(args: TrainArgs, force_deterministic: bool, exec: &RayonExec) -> CliResult<()> {
    let mut cfg = match &args.preset {
        Some(name) => preset(name)?,
        None => TrainConfig::default(),
    };
    let mut ablation_name = None;
    if let Some(path) = &args.config {
        let bytes = crate::io::read_file(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| CliError::format(path, "config file is not valid UTF-8"))?;
        ablation_name = apply_config_text(&mut cfg, &text, path)?;
    }
    if let Some(name) = &args.ablation {
        ablation_name = Some(name.clone());
    }
    if let Some(name) = &ablation_name {
        let ablation = Ablation::from_name(name).ok_or_else(|| {
            CliError::usage(format!(
                "unknown ablation {name:?} (expected one of: {})",
                Ablation::ALL
                    .iter()
                    .map(|a| a.name())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })?;
        cfg = apply_ablation(&cfg, ablation);
        if ablation == Ablation::Unconstrained {
            println!(
                "note: the unconstrained baseline replaces the abundance softmax with raw \
                 linear weights (an approximation of the unconstrained model); checkpoints \
                 always reload with the softmax activation"
            );
        }
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.rays_per_batch {
        cfg.rays_per_batch = v;
    }
    if let Some(v) = args.n_samples {
        cfg.n_samples = v;
    }
    if let Some(v) = args.endmembers {
        cfg.endmember_count = v;
    }
    if let Some(acc) = &args.accumulation {
        cfg.deterministic = match acc.as_str() {
            "ordered" => true,
            "atomic" => false,
            other => {
                return Err(CliError::usage(format!(
                    "unknown accumulation mode {other:?} (ordered|atomic)"
                )))
            }
        };
    }
    if force_deterministic {
        cfg.deterministic = true;
    }
    cfg.validate().map_err(CliError::from_core)?;

    let disk = load_dataset(&args.data)?;
    let train_set = disk.train_dataset()?;
    print!("{}", render_config(&cfg));
    if let Some(name) = &ablation_name {
        println!("ablation = {name}");
    }

    let resume = match &args.resume {
        Some(ckpt_path) => {
            let field = checkpoint::read_checkpoint(ckpt_path)?;
            let sidecar = optstate::sidecar_path(ckpt_path);
            let (adam, iteration) = if sidecar.exists() {
                let state = optstate::read_optimizer_state(&sidecar, &field)?;
                let it = state.step as usize;
                println!("resume = {} (optimizer state at step {it})", ckpt_path.display());
                (Some(state), it)
            } else {
                println!(
                    "resume = {} (no optimizer sidecar; moments restart at iteration 0)",
                    ckpt_path.display()
                );
                (None, 0)
            };
            Some(TrainStart {
                field,
                adam,
                iteration,
            })
        }
        None => None,
    };

    let mut print_progress = |iter: usize, loss: f64, lr: f64| {
        println!("iter {iter:>6}  loss {loss:.6e}  lr {lr:.4e}");
    };
    let outcome = train(
        &train_set,
        &cfg,
        exec,
        resume,
        Some(&mut print_progress),
    )
    .map_err(CliError::from_core)?;

    checkpoint::write_checkpoint(&outcome.field, &args.out)?;
    if args.save_optimizer {
        let sidecar = optstate::sidecar_path(&args.out);
        optstate::write_optimizer_state(&outcome.adam, &outcome.field, &sidecar)?;
        println!("wrote optimizer state {}", sidecar.display());
    }
    let mut history = String::from("# iteration loss lr\n");
    for s in &outcome.history {
        history.push_str(&format!("{} {:.9e} {:.9e}\n", s.iteration, s.loss, s.lr));
    }
    let history_path = loss_history_path(&args.out);
    crate::io::write_file(&history_path, history.as_bytes())?;
    println!("wrote {}", args.out.display());
    println!("wrote {}", history_path.display());
    Ok(())
}

pub fn loss_history_path(ckpt: &Path) -> PathBuf {
    let mut os = ckpt.as_os_str().to_owned();
    os.push(".loss.txt");
    PathBuf::from(os)
}

fn frame_filter<'a>(
    pose_file: &'a poses::PoseFile,
    which: &str,
) -> CliResult<Vec<&'a poses::PoseFrame>> {
    let frames: Vec<&poses::PoseFrame> = match which {
        "all" => pose_file.frames.iter().collect(),
        "train" => pose_file
            .frames
            .iter()
            .filter(|f| f.path.starts_with("train/"))
            .collect(),
        "test" => pose_file
            .frames
            .iter()
            .filter(|f| f.path.starts_with("test/"))
            .collect(),
        other => {
            return Err(CliError::usage(format!(
                "unknown frame filter {other:?} (all|train|test)"
            )))
        }
    };
    if frames.is_empty() {
        return Err(CliError::usage(format!(
            "no frames match filter {which:?}"
        )));
    }
    Ok(frames)
}

fn frame_stem(frame: &poses::PoseFrame) -> String {
    Path::new(&frame.path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "frame".into())
}

fn run_render(args: RenderArgs, exec: &RayonExec) -> CliResult<()> {
    let field = checkpoint::read_checkpoint(&args.ckpt)?;
    let pose_file = poses::read_poses(&args.poses)?;
    let frames = frame_filter(&pose_file, &args.frames)?;
    let outputs: Vec<&str> = args.outputs.split(',').map(|s| s.trim()).collect();
    for o in &outputs {
        if !["spectral", "rgb", "abundance", "opacity"].contains(o) {
            return Err(CliError::usage(format!("unknown output kind {o:?}")));
        }
    }
    println!("ckpt = {}", args.ckpt.display());
    println!("frames = {} ({})", frames.len(), args.frames);
    println!("n_samples = {}", args.n_samples);
    println!("outputs = {}", args.outputs);
    let response =
        CameraResponse::default_for_bands(field.band_count()).map_err(CliError::from_core)?;
    let k = field.endmember_count();
    for frame in frames {
        let cam = pose_file.camera_for(frame)?;
        let img = render_image(
            &field,
            &response,
            &cam,
            pose_file.near,
            pose_file.far,
            args.n_samples,
            exec,
        )
        .map_err(CliError::from_core)?;
        let stem = frame_stem(frame);
        if outputs.contains(&"spectral") {
            cube::write_cube(&img.spectral, &args.out.join(format!("{stem}.hsc")))?;
        }
        if outputs.contains(&"rgb") {
            let mut rgb8 = Vec::with_capacity(img.rgb.len() * 3);
            for px in &img.rgb {
                for c in 0..3 {
                    rgb8.push((px[c].clamp(0.0, 1.0) * 255.0).round() as u8);
                }
            }
            pnm::write_ppm(
                cam.width,
                cam.height,
                &rgb8,
                &args.out.join(format!("{stem}_rgb.ppm")),
            )?;
        }
        if outputs.contains(&"abundance") {
            for kk in 0..k {
                let plane: Vec<f64> = img
                    .abundance
                    .chunks_exact(k)
                    .map(|a| a[kk] as f64)
                    .collect();
                pnm::write_pgm(
                    cam.width,
                    cam.height,
                    &pnm::quantize(&plane, 0.0, 1.0),
                    &args.out.join(format!("{stem}_abundance_{kk}.pgm")),
                )?;
            }
        }
        if outputs.contains(&"opacity") {
            let plane: Vec<f64> = img.opacity.iter().map(|&v| v as f64).collect();
            pnm::write_pgm(
                cam.width,
                cam.height,
                &pnm::quantize(&plane, 0.0, 1.0),
                &args.out.join(format!("{stem}_opacity.pgm")),
            )?;
        }
    }
    println!("wrote renders to {}", args.out.display());
    Ok(())
}

fn run_segment(args: SegmentArgs, exec: &RayonExec) -> CliResult<()> {
    let field = checkpoint::read_checkpoint(&args.ckpt)?;
    let pose_file = poses::read_poses(&args.poses)?;
    let frames = frame_filter(&pose_file, &args.frames)?;
    println!("ckpt = {}", args.ckpt.display());
    println!("frames = {} ({})", frames.len(), args.frames);
    println!("opacity_threshold = {}", args.opacity_threshold);
    println!("use_abundance = {}", args.use_abundance);
    let response =
        CameraResponse::default_for_bands(field.band_count()).map_err(CliError::from_core)?;
    for frame in frames {
        let cam = pose_file.camera_for(frame)?;
        let labels = segment_image(
            &field,
            &response,
            &cam,
            pose_file.near,
            pose_file.far,
            args.n_samples,
            args.opacity_threshold,
            args.use_abundance,
            exec,
        )
        .map_err(CliError::from_core)?;
        let stem = frame_stem(frame);
        labelmap::write_labels(&labels, &args.out.join(format!("{stem}.seg")))?;
        let rgb = labelmap::preview_rgb(&labels);
        pnm::write_ppm(
            cam.width,
            cam.height,
            &rgb,
            &args.out.join(format!("{stem}_seg.ppm")),
        )?;
    }
    println!("wrote segmentations to {}", args.out.display());
    Ok(())
}

fn list_cubes(dir: &Path) -> CliResult<Vec<String>> {
    let mut names = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".hsc") {
            names.push(name);
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(CliError::usage(format!(
            "no .hsc cubes found in {}",
            dir.display()
        )));
    }
    Ok(names)
}

fn run_eval(args: EvalArgs) -> CliResult<()> {
    let names = list_cubes(&args.gt)?;
    println!("pred = {}", args.pred.display());
    println!("gt = {}", args.gt.display());
    println!("views = {}", names.len());
    let mut report = String::new();
    let mut sums = [0.0f64; 5];
    for name in &names {
        let gt = cube::read_cube(&args.gt.join(name))?;
        let pred_path = args.pred.join(name);
        let pred = cube::read_cube(&pred_path)?;
        let m = MetricReport::compute(&pred, &gt).map_err(CliError::from_core)?;
        sums[0] += m.psnr;
        sums[1] += m.ssim;
        sums[2] += m.sam;
        sums[3] += m.rmse;
        sums[4] += m.mrae;
        report.push_str(&format!("view {name}: {}\n", m.record_line()));
        if args.per_band {
            let per_band = metrics::psnr_per_band(&pred, &gt).map_err(CliError::from_core)?;
            let cells: Vec<String> = per_band.iter().map(|v| format!("{v:.3}")).collect();
            report.push_str(&format!("view {name}: psnr_per_band = {}\n", cells.join(" ")));
        }
        if args.heatmaps {
            let map = metrics::mrae_map(&pred, &gt, 1e-6).map_err(CliError::from_core)?;
            let gray = pnm::quantize(&map.values, 0.0, args.heatmap_max);
            let stem = name.trim_end_matches(".hsc");
            pnm::write_pgm(
                map.width,
                map.height,
                &gray,
                &args.pred.join(format!("{stem}_mrae.pgm")),
            )?;
        }
    }
    let n = names.len() as f64;
    report.push_str(&format!("psnr = {:.6}\n", sums[0] / n));
    report.push_str(&format!("ssim = {:.6}\n", sums[1] / n));
    report.push_str(&format!("sam = {:.6}\n", sums[2] / n));
    report.push_str(&format!("rmse = {:.6}\n", sums[3] / n));
    report.push_str(&format!("mrae = {:.6}\n", sums[4] / n));
    print!("{report}");
    if let Some(out) = &args.out {
        crate::io::write_file(out, report.as_bytes())?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn run_edit(args: EditArgs) -> CliResult<()> {
    let field = checkpoint::read_checkpoint(&args.ckpt)?;
    let values = dataset::read_spectrum(&args.spectrum)?;
    if values.len() != field.band_count() {
        return Err(CliError::usage(format!(
            "spectrum has {} bands, checkpoint expects {}",
            values.len(),
            field.band_count()
        )));
    }
    println!("ckpt = {}", args.ckpt.display());
    println!("endmember = {}", args.endmember);
    let spectrum = Spectrum::new(values).map_err(CliError::from_core)?;
    let edited = field
        .replace_endmember(args.endmember, &spectrum)
        .map_err(CliError::from_core)?;
    checkpoint::write_checkpoint(&edited, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_gradcheck(args: GradcheckArgs) -> CliResult<()> {
    println!("seed = {}", args.seed);
    println!("epsilon = {}", args.epsilon);
    println!("tolerance = {}", args.tolerance);
    println!("params_per_class = {}", args.params_per_class);
    let report = gradcheck::run(args.seed, args.params_per_class, args.epsilon, args.tolerance)
        .map_err(CliError::from_core)?;
    print!("{}", report.table());
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Numeric(format!(
            "gradient check failed: max relative error {:.3e} exceeds {:.1e}",
            report.max_rel_err(),
            report.tolerance
        )))
    }
}

/// Full reference: every subcommand's flags, config keys and file formats.
pub fn manual_text() -> String {
    let mut out = String::new();
    out.push_str("SPECFIELD MANUAL\n================\n\n");
    out.push_str("Exit codes: 0 success, 2 user/config error, 3 numeric failure, 4 I/O.\n");
    out.push_str("Environment: SPECFIELD_THREADS sets the worker count when --threads is absent.\n\n");

    let mut cmd = Cli::command();
    cmd.build();
    out.push_str("GLOBAL USAGE\n------------\n");
    out.push_str(&cmd.render_long_help().to_string());
    out.push('\n');
    for sub in cmd.get_subcommands_mut() {
        if sub.get_name() == "help" {
            continue;
        }
        out.push_str(&format!(
            "\nSUBCOMMAND: {}\n----------------------------------------\n",
            sub.get_name()
        ));
        out.push_str(&sub.render_long_help().to_string());
        out.push('\n');
    }

    out.push_str("\nCONFIG KEYS (train --config)\n----------------------------\n");
    for (key, help) in CONFIG_KEYS {
        out.push_str(&format!("{key:<16} {help}\n"));
    }

    out.push_str(
        "\nFILE FORMATS\n------------\n\
HSC1  spectral cube: magic, u32 width/height/bands (LE), f32 data as\n\
      band-major planes, row-major within a plane.\n\
UMF1  field checkpoint: magic, u32 version=1, u32 nx ny nz, u32 K, u32 B,\n\
      u32 sh_degree, f32 bounds (min xyz, max xyz), f32 tau, f32\n\
      density_scale, then f32 arrays: endmembers (B*K column-major),\n\
      density_raw, abundance_logits, scaling_logits, tint_logit,\n\
      specular_sh; voxel order x-fastest, per-voxel channels contiguous.\n\
UMO1  optimizer sidecar: magic, u32 version=1, u32 nx ny nz, u32 K, u32 B,\n\
      u64 step, f64 first moments, f64 second moments (checkpoint order).\n\
SEG1  label map: magic, u32 width, u32 height, u16 labels row-major\n\
      (65535 = background).\n\
poses plain text: `intrinsics fx fy cx cy w h`, `clip near far`, then per\n\
      frame `frame <path>` and four rows of four decimals.\n\
response plain text: `3 B` then three rows of B decimal floats.\n\
endmembers plain text: `endmembers K B` then K rows of B decimal floats.\n\
manifest `key = value` lines plus `file <path> <sha256>` per artifact.\n\
scene `key = value` lines plus `primitive = <shape...> material <k>|mixed\n\
      <a...> scaling constant <v>|gradient <axis> <lo> <hi> tint <v>\n\
      specular <v>` (see scenes/desk.scene).\n",
    );
    out
}

pub fn main_entry() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
