//! Image-quality and spectral-fidelity metrics.
//!
//! PSNR (global MSE, MAX = 1, capped at 99 dB), per-band-averaged SSIM with
//! the standard 11x11 sigma-1.5 Gaussian window, mean spectral angle (SAM),
//! global RMSE, and the per-pixel mean relative absolute error map.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::cube::SpectralCube;
use crate::numeric;
use crate::{Error, Result};

pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub sam: f64,
    pub rmse: f64,
    pub mrae: f64,
}

impl MetricReport {
    /// Every metric against ground truth. SSIM needs at least an 11x11
    /// image.
    pub fn compute(pred: &SpectralCube, gt: &SpectralCube) -> Result<MetricReport> {
        Ok(MetricReport {
            psnr: psnr(pred, gt)?,
            ssim: ssim(pred, gt)?,
            sam: sam(pred, gt)?,
            rmse: rmse(pred, gt)?,
            mrae: mrae_map(pred, gt, 1e-6)?.mean,
        })
    }

    /// Machine-readable single-line record.
    pub fn record_line(&self) -> String {
        format!(
            "psnr={:.6} ssim={:.6} sam={:.6} rmse={:.6} mrae={:.6}",
            self.psnr, self.ssim, self.sam, self.rmse, self.mrae
        )
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "psnr = {:.6}", self.psnr)?;
        writeln!(f, "ssim = {:.6}", self.ssim)?;
        writeln!(f, "sam = {:.6}", self.sam)?;
        writeln!(f, "rmse = {:.6}", self.rmse)?;
        write!(f, "mrae = {:.6}", self.mrae)
    }
}

fn check_dims(context: &'static str, pred: &SpectralCube, gt: &SpectralCube) -> Result<()> {
    if !pred.same_shape(gt) {
        return Err(Error::Invalid {
            context,
            detail: format!(
                "shape mismatch: {}x{}x{} vs {}x{}x{}",
                pred.width(),
                pred.height(),
                pred.bands(),
                gt.width(),
                gt.height(),
                gt.bands()
            ),
        });
    }
    Ok(())
}

fn global_mse(pred: &SpectralCube, gt: &SpectralCube) -> f64 {
    let mut acc = 0.0;
    for (p, g) in pred.data().iter().zip(gt.data()) {
        let d = *p as f64 - *g as f64;
        acc += d * d;
    }
    acc / pred.data().len() as f64
}

/// Peak signal-to-noise ratio over all H*W*B elements, MAX = 1.
pub fn psnr(pred: &SpectralCube, gt: &SpectralCube) -> Result<f64> {
    check_dims("psnr", pred, gt)?;
    Ok(mse_to_psnr(global_mse(pred, gt)))
}

fn mse_to_psnr(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * numeric::log10(1.0 / mse)).min(PSNR_CAP_DB)
    }
}

/// Per-band PSNR values.
pub fn psnr_per_band(pred: &SpectralCube, gt: &SpectralCube) -> Result<Vec<f64>> {
    check_dims("psnr_per_band", pred, gt)?;
    let plane = pred.width() * pred.height();
    let mut out = Vec::with_capacity(pred.bands());
    for b in 0..pred.bands() {
        let mut acc = 0.0;
        for i in 0..plane {
            let d = pred.data()[b * plane + i] as f64 - gt.data()[b * plane + i] as f64;
            acc += d * d;
        }
        out.push(mse_to_psnr(acc / plane as f64));
    }
    Ok(out)
}

/// Global root-mean-square error.
pub fn rmse(pred: &SpectralCube, gt: &SpectralCube) -> Result<f64> {
    check_dims("rmse", pred, gt)?;
    Ok(numeric::sqrt(global_mse(pred, gt)))
}

/// Spectra at or below this norm count as zero for SAM: angles between
/// numerically dead vectors are noise, not signal.
pub const SAM_ZERO_NORM: f64 = 1e-6;

/// Mean spectral angle in radians over pixels with nonzero spectra; pixels
/// where either spectrum is (numerically) zero are skipped. Errors if
/// nothing remains.
pub fn sam(pred: &SpectralCube, gt: &SpectralCube) -> Result<f64> {
    check_dims("sam", pred, gt)?;
    let mut acc = 0.0;
    let mut counted = 0usize;
    for y in 0..pred.height() {
        for x in 0..pred.width() {
            let p = pred.pixel_spectrum(x, y);
            let g = gt.pixel_spectrum(x, y);
            let np = numeric::norm(&p);
            let ng = numeric::norm(&g);
            if np <= SAM_ZERO_NORM || ng <= SAM_ZERO_NORM {
                continue;
            }
            acc += numeric::acos((numeric::dot(&p, &g) / (np * ng)).clamp(-1.0, 1.0));
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(Error::Invalid {
            context: "sam",
            detail: String::from("every pixel has a zero spectrum"),
        });
    }
    Ok(acc / counted as f64)
}

/// Per-pixel mean relative absolute error heatmap and its mean.
#[derive(Debug, Clone)]
pub struct MraeMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub mean: f64,
}

pub fn mrae_map(pred: &SpectralCube, gt: &SpectralCube, eps: f64) -> Result<MraeMap> {
    check_dims("mrae", pred, gt)?;
    let (w, h, b) = (pred.width(), pred.height(), pred.bands());
    let mut values = vec![0.0; w * h];
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for band in 0..b {
                let p = pred.get(x, y, band) as f64;
                let g = gt.get(x, y, band) as f64;
                acc += (p - g).abs() / (g + eps);
            }
            let v = acc / b as f64;
            values[y * w + x] = v;
            total += v;
        }
    }
    Ok(MraeMap {
        width: w,
        height: h,
        values,
        mean: total / (w * h) as f64,
    })
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let mid = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - mid;
        *v = numeric::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
        sum += *v;
    }
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

/// Separable valid-mode Gaussian filter.
fn gaussian_filter_valid(img: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let k = gaussian_kernel();
    let ow = w - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * img[y * w + x + i];
            }
            horiz[y * ow + x] = acc;
        }
    }
    let oh = h - SSIM_WINDOW + 1;
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * horiz[(y + i) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    (out, ow, oh)
}

fn ssim_band(pred: &[f64], gt: &[f64], w: usize, h: usize) -> f64 {
    let xx: Vec<f64> = pred.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = gt.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = pred.iter().zip(gt).map(|(a, b)| a * b).collect();
    let (mu_x, ow, oh) = gaussian_filter_valid(pred, w, h);
    let (mu_y, _, _) = gaussian_filter_valid(gt, w, h);
    let (m_xx, _, _) = gaussian_filter_valid(&xx, w, h);
    let (m_yy, _, _) = gaussian_filter_valid(&yy, w, h);
    let (m_xy, _, _) = gaussian_filter_valid(&xy, w, h);
    let mut acc = 0.0;
    for i in 0..ow * oh {
        let mx = mu_x[i];
        let my = mu_y[i];
        let var_x = m_xx[i] - mx * mx;
        let var_y = m_yy[i] - my * my;
        let cov = m_xy[i] - mx * my;
        let v = ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((mx * mx + my * my + SSIM_C1) * (var_x + var_y + SSIM_C2));
        acc += v;
    }
    acc / (ow * oh) as f64
}

/// Structural similarity, computed per band and averaged (L = 1).
pub fn ssim(pred: &SpectralCube, gt: &SpectralCube) -> Result<f64> {
    check_dims("ssim", pred, gt)?;
    if pred.width() < SSIM_WINDOW || pred.height() < SSIM_WINDOW {
        return Err(Error::Invalid {
            context: "ssim",
            detail: format!(
                "image {}x{} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window",
                pred.width(),
                pred.height()
            ),
        });
    }
    let (w, h) = (pred.width(), pred.height());
    let plane = w * h;
    let mut total = 0.0;
    for b in 0..pred.bands() {
        let p: Vec<f64> = pred.data()[b * plane..(b + 1) * plane]
            .iter()
            .map(|&v| v as f64)
            .collect();
        let g: Vec<f64> = gt.data()[b * plane..(b + 1) * plane]
            .iter()
            .map(|&v| v as f64)
            .collect();
        total += ssim_band(&p, &g, w, h);
    }
    Ok(total / pred.bands() as f64)
}
