//! Training configuration files: one `key = value` per line, `#` comments,
//! unknown keys rejected. CLI flags override file values; the `desk` preset
//! is the documented desk-scale starting point.

use std::path::Path;

use specfield_core::field::Aabb;
use specfield_core::train::{EndmemberInit, TrainConfig};

use crate::error::{CliError, CliResult};

pub const CONFIG_KEYS: [(&str, &str); 26] = [
    ("lambda_spec", "spectral loss weight (default 5)"),
    ("lambda_rgb", "RGB loss weight (default 1)"),
    ("learning_rate", "initial Adam learning rate (default 1e-2)"),
    ("lr_final", "final learning rate of the exponential decay (default 1e-3)"),
    ("iterations", "optimization steps (default 20000; desk preset 2000)"),
    ("rays_per_batch", "rays per step (default 4096; desk preset 1024)"),
    ("n_samples", "stratified samples per ray (default 96; desk preset 32)"),
    ("tau", "abundance softmax temperature (default 1.0)"),
    ("seed", "master seed for every random stream (default 0)"),
    ("grad_scaling", "on|off: scale sample gradients by clamp(t^2,0,1) (default on)"),
    ("endmember_init", "vca|random dictionary initialization (default vca)"),
    ("beta1", "Adam beta1 (default 0.9)"),
    ("beta2", "Adam beta2 (default 0.999)"),
    ("epsilon", "Adam epsilon (default 1e-8)"),
    ("grid", "three ints: voxel resolution (default 64 64 64; desk 16 16 16)"),
    ("endmembers", "dictionary size K (default 3)"),
    ("bounds", "six floats: scene box min xyz max xyz (default -1..1)"),
    ("density_scale", "softplus density multiplier (default 25)"),
    ("endmember_lr_scale", "dictionary learning-rate multiplier (default 0.1)"),
    ("jitter", "on|off: stratified jitter during training (default on)"),
    ("accumulation", "ordered|atomic gradient reduction (default ordered)"),
    ("log_every", "loss emission interval in iterations (default 100)"),
    ("ablation", "full|no-specular|random-init|no-rgb-loss|no-scaling|unconstrained"),
    ("specular", "on|off: learn the view-dependent specular branch (default on)"),
    ("scaling", "on|off: learn per-point scaling factors; off pins them to 1 (default on)"),
    ("constraints", "on|off: softmax abundance constraints; off is the raw-weight baseline (default on)"),
];

fn parse_bool(value: &str) -> Option<bool> {
    match value {
        "on" | "true" | "1" => Some(true),
        "off" | "false" | "0" => Some(false),
        _ => None,
    }
}

/// Applies `key = value` lines from `text` onto `cfg`. Returns the ablation
/// name if the file sets one (applied by the caller so CLI flags can still
/// override it).
pub fn apply_config_text(
    cfg: &mut TrainConfig,
    text: &str,
    path: &Path,
) -> CliResult<Option<String>> {
    let mut ablation = None;
    for (idx, raw) in text.lines().enumerate() {
        let no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::format(path, format!("line {no}: expected `key = value`"))
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |msg: &str| CliError::format(path, format!("line {no}: {msg}"));
        match key {
            "lambda_spec" => cfg.lambda_spec = value.parse().map_err(|_| bad("bad number"))?,
            "lambda_rgb" => cfg.lambda_rgb = value.parse().map_err(|_| bad("bad number"))?,
            "learning_rate" => {
                cfg.learning_rate = value.parse().map_err(|_| bad("bad number"))?
            }
            "lr_final" => cfg.lr_final = value.parse().map_err(|_| bad("bad number"))?,
            "iterations" => cfg.iterations = value.parse().map_err(|_| bad("bad count"))?,
            "rays_per_batch" => {
                cfg.rays_per_batch = value.parse().map_err(|_| bad("bad count"))?
            }
            "n_samples" => cfg.n_samples = value.parse().map_err(|_| bad("bad count"))?,
            "tau" => cfg.tau = value.parse().map_err(|_| bad("bad number"))?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad("bad seed"))?,
            "grad_scaling" => {
                cfg.grad_scaling =
                    parse_bool(value).ok_or_else(|| bad("expected on|off"))?
            }
            "endmember_init" => {
                cfg.endmember_init = match value {
                    "vca" => EndmemberInit::Vca,
                    "random" => EndmemberInit::Random,
                    _ => return Err(bad("expected vca|random")),
                }
            }
            "beta1" => cfg.adam.beta1 = value.parse().map_err(|_| bad("bad number"))?,
            "beta2" => cfg.adam.beta2 = value.parse().map_err(|_| bad("bad number"))?,
            "epsilon" => cfg.adam.epsilon = value.parse().map_err(|_| bad("bad number"))?,
            "grid" => {
                let v: Result<Vec<usize>, _> =
                    value.split_whitespace().map(|x| x.parse()).collect();
                let v = v.map_err(|_| bad("bad grid"))?;
                if v.len() != 3 {
                    return Err(bad("grid needs three values"));
                }
                cfg.resolution = [v[0], v[1], v[2]];
            }
            "endmembers" => {
                cfg.endmember_count = value.parse().map_err(|_| bad("bad count"))?
            }
            "bounds" => {
                let v: Result<Vec<f64>, _> =
                    value.split_whitespace().map(|x| x.parse()).collect();
                let v = v.map_err(|_| bad("bad bounds"))?;
                if v.len() != 6 {
                    return Err(bad("bounds needs six values"));
                }
                cfg.bounds = Aabb::new([v[0], v[1], v[2]], [v[3], v[4], v[5]])
                    .map_err(|e| bad(&e.to_string()))?;
            }
            "density_scale" => {
                cfg.density_scale = value.parse().map_err(|_| bad("bad number"))?
            }
            "endmember_lr_scale" => {
                cfg.endmember_lr_scale = value.parse().map_err(|_| bad("bad number"))?
            }
            "jitter" => cfg.jitter = parse_bool(value).ok_or_else(|| bad("expected on|off"))?,
            "accumulation" => {
                cfg.deterministic = match value {
                    "ordered" => true,
                    "atomic" => false,
                    _ => return Err(bad("expected ordered|atomic")),
                }
            }
            "log_every" => cfg.log_every = value.parse().map_err(|_| bad("bad count"))?,
            "ablation" => ablation = Some(value.to_string()),
            "specular" => {
                cfg.specular_enabled =
                    parse_bool(value).ok_or_else(|| bad("expected on|off"))?
            }
            "scaling" => {
                cfg.scaling_enabled =
                    parse_bool(value).ok_or_else(|| bad("expected on|off"))?
            }
            "constraints" => {
                cfg.constraints_enabled =
                    parse_bool(value).ok_or_else(|| bad("expected on|off"))?
            }
            other => {
                return Err(CliError::format(
                    path,
                    format!("line {no}: unknown config key {other:?}"),
                ))
            }
        }
    }
    Ok(ablation)
}

/// Named presets; only `desk` exists today.
pub fn preset(name: &str) -> CliResult<TrainConfig> {
    match name {
        "desk" => Ok(TrainConfig::desk()),
        other => Err(CliError::usage(format!(
            "unknown preset {other:?} (available: desk)"
        ))),
    }
}

/// The fully resolved configuration, printed at the start of every run.
pub fn render_config(cfg: &TrainConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("lambda_spec = {}\n", cfg.lambda_spec));
    out.push_str(&format!("lambda_rgb = {}\n", cfg.lambda_rgb));
    out.push_str(&format!("learning_rate = {}\n", cfg.learning_rate));
    out.push_str(&format!("lr_final = {}\n", cfg.lr_final));
    out.push_str(&format!("iterations = {}\n", cfg.iterations));
    out.push_str(&format!("rays_per_batch = {}\n", cfg.rays_per_batch));
    out.push_str(&format!("n_samples = {}\n", cfg.n_samples));
    out.push_str(&format!("tau = {}\n", cfg.tau));
    out.push_str(&format!("seed = {}\n", cfg.seed));
    out.push_str(&format!(
        "grad_scaling = {}\n",
        if cfg.grad_scaling { "on" } else { "off" }
    ));
    out.push_str(&format!(
        "endmember_init = {}\n",
        match cfg.endmember_init {
            EndmemberInit::Vca => "vca",
            EndmemberInit::Random => "random",
        }
    ));
    out.push_str(&format!("beta1 = {}\n", cfg.adam.beta1));
    out.push_str(&format!("beta2 = {}\n", cfg.adam.beta2));
    out.push_str(&format!("epsilon = {}\n", cfg.adam.epsilon));
    out.push_str(&format!(
        "grid = {} {} {}\n",
        cfg.resolution[0], cfg.resolution[1], cfg.resolution[2]
    ));
    out.push_str(&format!("endmembers = {}\n", cfg.endmember_count));
    out.push_str(&format!(
        "bounds = {} {} {} {} {} {}\n",
        cfg.bounds.min[0],
        cfg.bounds.min[1],
        cfg.bounds.min[2],
        cfg.bounds.max[0],
        cfg.bounds.max[1],
        cfg.bounds.max[2]
    ));
    out.push_str(&format!("density_scale = {}\n", cfg.density_scale));
    out.push_str(&format!(
        "endmember_lr_scale = {}\n",
        cfg.endmember_lr_scale
    ));
    out.push_str(&format!(
        "jitter = {}\n",
        if cfg.jitter { "on" } else { "off" }
    ));
    out.push_str(&format!(
        "accumulation = {}\n",
        if cfg.deterministic { "ordered" } else { "atomic" }
    ));
    out.push_str(&format!("log_every = {}\n", cfg.log_every));
    out.push_str(&format!(
        "specular = {}\n",
        if cfg.specular_enabled { "on" } else { "off" }
    ));
    out.push_str(&format!(
        "scaling = {}\n",
        if cfg.scaling_enabled { "on" } else { "off" }
    ));
    out.push_str(&format!(
        "constraints = {}\n",
        if cfg.constraints_enabled { "on" } else { "off" }
    ));
    out
}
