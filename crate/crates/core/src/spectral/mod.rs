//! Dimension-checked spectral linear algebra.
//!
//! Mixing models (linear and scaled-extended), the constraint activations
//! that keep abundances on the simplex and gates in `[0,1]`, dichromatic
//! composition of diffuse and specular reflectance, and projection of a
//! spectrum to linear RGB through a camera response matrix.
//!
//! All functions compute in f64 and are pure; bulk storage elsewhere in the
//! crate is f32.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::numeric;
use crate::{Error, Result};

/// Reflectance/radiance per band, ascending wavelength order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "spectrum values",
            });
        }
        Ok(Spectrum { values })
    }

    pub fn zeros(bands: usize) -> Self {
        Spectrum {
            values: vec![0.0; bands],
        }
    }

    pub fn bands(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Global dictionary of K pure material signatures over B bands.
///
/// Stored column-major: endmember `k` occupies `data[k*B .. (k+1)*B]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberDictionary {
    data: Vec<f64>,
    bands: usize,
    count: usize,
}

impl EndmemberDictionary {
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Invalid {
                context: "endmember dictionary",
                detail: String::from("K must be >= 1"),
            });
        }
        let bands = columns[0].len();
        if bands == 0 {
            return Err(Error::Invalid {
                context: "endmember dictionary",
                detail: String::from("B must be >= 1"),
            });
        }
        let mut data = Vec::with_capacity(bands * columns.len());
        for col in columns {
            if col.len() != bands {
                return Err(Error::BandMismatch {
                    context: "endmember dictionary column",
                    expected: bands,
                    actual: col.len(),
                });
            }
            for &v in col {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::OutOfRange {
                        context: "endmember value",
                        value: v,
                        min: 0.0,
                        max: 1.0,
                    });
                }
                data.push(v);
            }
        }
        Ok(EndmemberDictionary {
            data,
            bands,
            count: columns.len(),
        })
    }

    /// Raw column-major storage (used by the field and checkpoint code).
    pub fn from_column_major(data: Vec<f64>, bands: usize, count: usize) -> Result<Self> {
        if bands == 0 || count == 0 || data.len() != bands * count {
            return Err(Error::Invalid {
                context: "endmember dictionary",
                detail: format!(
                    "need B*K values, got {} for B={bands}, K={count}",
                    data.len()
                ),
            });
        }
        for &v in &data {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange {
                    context: "endmember value",
                    value: v,
                    min: 0.0,
                    max: 1.0,
                });
            }
        }
        Ok(EndmemberDictionary { data, bands, count })
    }

    pub fn band_count(&self) -> usize {
        self.bands
    }

    pub fn endmember_count(&self) -> usize {
        self.count
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.data[k * self.bands..(k + 1) * self.bands]
    }

    pub fn column_major(&self) -> &[f64] {
        &self.data
    }

    /// Max spectral angle to another dictionary under the best permutation
    /// (Hungarian assignment on pairwise spectral-angle cost). Used to score
    /// recovered endmembers against ground truth.
    pub fn max_angle_after_matching(&self, other: &EndmemberDictionary) -> Result<f64> {
        if self.bands != other.bands {
            return Err(Error::BandMismatch {
                context: "endmember matching",
                expected: self.bands,
                actual: other.bands,
            });
        }
        if self.count != other.count {
            return Err(Error::EndmemberMismatch {
                context: "endmember matching",
                expected: self.count,
                actual: other.count,
            });
        }
        let k = self.count;
        let mut cost = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                cost[i * k + j] = numeric::vector_angle(self.column(i), other.column(j));
            }
        }
        let assignment = crate::assign::solve(&cost, k, k);
        let mut max_angle: f64 = 0.0;
        for (i, j) in assignment.pairs() {
            max_angle = max_angle.max(cost[i * k + j]);
        }
        Ok(max_angle)
    }
}

/// Fractional material presence at a point: nonnegative, sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceVector {
    weights: Vec<f64>,
}

impl AbundanceVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::Invalid {
                context: "abundance vector",
                detail: String::from("entries must be finite and nonnegative"),
            });
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Invalid {
                context: "abundance vector",
                detail: format!("entries must sum to 1 within 1e-6, got {sum}"),
            });
        }
        Ok(AbundanceVector { weights })
    }

    pub fn uniform(k: usize) -> Self {
        AbundanceVector {
            weights: vec![1.0 / k as f64; k],
        }
    }

    /// Wraps weights without simplex validation. Needed by the
    /// unconstrained-abundance ablation, where the invariant is
    /// deliberately not enforced.
    pub(crate) fn new_unchecked(weights: Vec<f64>) -> Self {
        AbundanceVector { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = i;
            }
        }
        best
    }
}

/// Per-endmember illumination scalings, the diagonal of the ELMM matrix.
/// Post-sigmoid, each entry lives in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingVector {
    scales: Vec<f64>,
}

impl ScalingVector {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        for &s in &scales {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::OutOfRange {
                    context: "scaling factor",
                    value: s,
                    min: 0.0,
                    max: 1.0,
                });
            }
        }
        Ok(ScalingVector { scales })
    }

    pub fn ones(k: usize) -> Self {
        ScalingVector {
            scales: vec![1.0; k],
        }
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }
}

/// Loss mix between hyperspectral and RGB reconstruction error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_spec: f64,
    pub lambda_rgb: f64,
}

impl LossWeights {
    pub fn new(lambda_spec: f64, lambda_rgb: f64) -> Result<Self> {
        if lambda_spec < 0.0 || lambda_rgb < 0.0 {
            return Err(Error::Invalid {
                context: "loss weights",
                detail: String::from("lambdas must be nonnegative"),
            });
        }
        if lambda_spec == 0.0 && lambda_rgb == 0.0 {
            return Err(Error::Invalid {
                context: "loss weights",
                detail: String::from("lambdas must not both be zero"),
            });
        }
        Ok(LossWeights {
            lambda_spec,
            lambda_rgb,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaPolicy {
    Linear,
    SrgbGamma,
}

/// 3xB matrix projecting a spectrum to linear RGB, plus display transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraResponse {
    matrix: Vec<f64>, // row-major, 3 rows of B
    bands: usize,
    pub gamma: GammaPolicy,
}

/// XYZ -> linear sRGB (D65 white), IEC 61966-2-1.
const XYZ_TO_SRGB: [[f64; 3]; 3] = [
    [3.2406, -1.5372, -0.4986],
    [-0.9689, 1.8758, 0.0415],
    [0.0557, -0.2040, 1.0570],
];

const CIE_TABLE: &str = include_str!("cie1931_2deg.txt");

fn cie_lookup(wavelength: f64) -> [f64; 3] {
    // Linear interpolation in the committed 5 nm table; clamped outside.
    let mut prev: Option<(f64, [f64; 3])> = None;
    let mut first: Option<(f64, [f64; 3])> = None;
    for line in CIE_TABLE.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let wl: f64 = it.next().unwrap().parse().unwrap();
        let x: f64 = it.next().unwrap().parse().unwrap();
        let y: f64 = it.next().unwrap().parse().unwrap();
        let z: f64 = it.next().unwrap().parse().unwrap();
        let row = (wl, [x, y, z]);
        if first.is_none() {
            first = Some(row);
        }
        if wl >= wavelength {
            return match prev {
                Some((w0, v0)) if wl > w0 => {
                    let t = (wavelength - w0) / (wl - w0);
                    [
                        v0[0] + t * (row.1[0] - v0[0]),
                        v0[1] + t * (row.1[1] - v0[1]),
                        v0[2] + t * (row.1[2] - v0[2]),
                    ]
                }
                _ => row.1,
            };
        }
        prev = Some(row);
    }
    prev.map(|(_, v)| v).unwrap_or([0.0; 3])
}

impl CameraResponse {
    pub fn new(matrix: Vec<f64>, bands: usize, gamma: GammaPolicy) -> Result<Self> {
        if bands == 0 || matrix.len() != 3 * bands {
            return Err(Error::Invalid {
                context: "camera response",
                detail: format!("need exactly 3*B entries, got {} for B={bands}", matrix.len()),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "camera response matrix",
            });
        }
        Ok(CameraResponse {
            matrix,
            bands,
            gamma,
        })
    }

    /// Default response: CIE 1931 2-degree color matching functions sampled
    /// at band centers, composed with XYZ -> linear sRGB, then each row
    /// rescaled so a flat unit spectrum maps to (1, 1, 1).
    pub fn cie_default(bands: usize, wavelength_min: f64, wavelength_max: f64) -> Result<Self> {
        if bands == 0 {
            return Err(Error::Invalid {
                context: "camera response",
                detail: String::from("B must be >= 1"),
            });
        }
        let mut matrix = vec![0.0; 3 * bands];
        for b in 0..bands {
            let wl = if bands == 1 {
                0.5 * (wavelength_min + wavelength_max)
            } else {
                wavelength_min
                    + (wavelength_max - wavelength_min) * b as f64 / (bands as f64 - 1.0)
            };
            let xyz = cie_lookup(wl);
            for (r, coeffs) in XYZ_TO_SRGB.iter().enumerate() {
                matrix[r * bands + b] =
                    coeffs[0] * xyz[0] + coeffs[1] * xyz[1] + coeffs[2] * xyz[2];
            }
        }
        for r in 0..3 {
            let row_sum: f64 = matrix[r * bands..(r + 1) * bands].iter().sum();
            if row_sum.abs() < 1e-12 {
                return Err(Error::Invalid {
                    context: "camera response",
                    detail: format!("row {r} of the CIE-derived response sums to zero"),
                });
            }
            for v in &mut matrix[r * bands..(r + 1) * bands] {
                *v /= row_sum;
            }
        }
        CameraResponse::new(matrix, bands, GammaPolicy::Linear)
    }

    /// CIE default over 450-650 nm, the visible range used throughout.
    pub fn default_for_bands(bands: usize) -> Result<Self> {
        Self::cie_default(bands, 450.0, 650.0)
    }

    pub fn band_count(&self) -> usize {
        self.bands
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.matrix[r * self.bands..(r + 1) * self.bands]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// M^T g, folding an RGB gradient back onto the spectrum.
    pub fn transpose_apply(&self, rgb: [f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.bands];
        for r in 0..3 {
            let row = self.row(r);
            for (o, &m) in out.iter_mut().zip(row) {
                *o += m * rgb[r];
            }
        }
        out
    }

    /// M c without constructing a `Spectrum`, for hot paths.
    pub fn apply_raw(&self, values: &[f64]) -> [f64; 3] {
        [
            numeric::dot(self.row(0), values),
            numeric::dot(self.row(1), values),
            numeric::dot(self.row(2), values),
        ]
    }
}

/// Linear mixing model: y = E a.
pub fn lmm_mix(e: &EndmemberDictionary, a: &AbundanceVector) -> Result<Spectrum> {
    if a.len() != e.endmember_count() {
        return Err(Error::EndmemberMismatch {
            context: "lmm_mix",
            expected: e.endmember_count(),
            actual: a.len(),
        });
    }
    let mut out = vec![0.0; e.band_count()];
    for (k, &w) in a.weights().iter().enumerate() {
        for (o, &ev) in out.iter_mut().zip(e.column(k)) {
            *o += w * ev;
        }
    }
    Spectrum::new(out)
}

/// Extended linear mixing model: y = E diag(s) a.
pub fn elmm_mix(
    e: &EndmemberDictionary,
    s: &ScalingVector,
    a: &AbundanceVector,
) -> Result<Spectrum> {
    if a.len() != e.endmember_count() {
        return Err(Error::EndmemberMismatch {
            context: "elmm_mix",
            expected: e.endmember_count(),
            actual: a.len(),
        });
    }
    if s.len() != e.endmember_count() {
        return Err(Error::EndmemberMismatch {
            context: "elmm_mix scaling",
            expected: e.endmember_count(),
            actual: s.len(),
        });
    }
    let mut out = vec![0.0; e.band_count()];
    for (k, (&w, &sc)) in a.weights().iter().zip(s.scales()).enumerate() {
        let f = w * sc;
        for (o, &ev) in out.iter_mut().zip(e.column(k)) {
            *o += f * ev;
        }
    }
    Spectrum::new(out)
}

/// Temperature softmax onto the abundance simplex, max-subtracted for
/// stability.
pub fn softmax_abundance(logits: &[f64], tau: f64) -> Result<AbundanceVector> {
    if !(tau > 0.0) {
        return Err(Error::NonPositiveTau { tau });
    }
    if logits.is_empty() {
        return Err(Error::Invalid {
            context: "softmax_abundance",
            detail: String::from("logits must be nonempty"),
        });
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "softmax logits",
        });
    }
    let mut max = f64::NEG_INFINITY;
    for &v in logits {
        if v > max {
            max = v;
        }
    }
    let mut out = Vec::with_capacity(logits.len());
    let mut sum = 0.0;
    for &v in logits {
        let e = numeric::exp((v - max) / tau);
        sum += e;
        out.push(e);
    }
    for v in &mut out {
        *v /= sum;
    }
    Ok(AbundanceVector { weights: out })
}

/// Logistic gate used for scaling factors and the specular tint.
pub fn sigmoid_gate(x: f64) -> f64 {
    numeric::sigmoid(x)
}

/// Dichromatic composition c_d + h * c_s, clamped to nonnegative radiance.
pub fn dichromatic_combine(c_d: &Spectrum, c_s: &Spectrum, h: f64) -> Result<Spectrum> {
    if c_d.bands() != c_s.bands() {
        return Err(Error::BandMismatch {
            context: "dichromatic_combine",
            expected: c_d.bands(),
            actual: c_s.bands(),
        });
    }
    let out = c_d
        .values()
        .iter()
        .zip(c_s.values())
        .map(|(&d, &s)| (d + h * s).max(0.0))
        .collect();
    Spectrum::new(out)
}

/// Projects a spectrum to RGB through the camera response, applying the
/// sRGB transfer (after clamping to [0,1]) when the policy asks for it.
pub fn spectrum_to_rgb(c: &Spectrum, m: &CameraResponse) -> Result<[f64; 3]> {
    if c.bands() != m.band_count() {
        return Err(Error::BandMismatch {
            context: "spectrum_to_rgb",
            expected: m.band_count(),
            actual: c.bands(),
        });
    }
    let linear = m.apply_raw(c.values());
    Ok(match m.gamma {
        GammaPolicy::Linear => linear,
        GammaPolicy::SrgbGamma => {
            let mut out = [0.0; 3];
            for (o, &v) in out.iter_mut().zip(&linear) {
                *o = srgb_transfer(v.clamp(0.0, 1.0));
            }
            out
        }
    })
}

/// Piecewise sRGB transfer for linear values in [0, 1].
pub fn srgb_transfer(v: f64) -> f64 {
    if v <= 0.0031308 {
        12.92 * v
    } else {
        1.055 * numeric::powf(v, 1.0 / 2.4) - 0.055
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn dict(cols: &[&[f64]]) -> EndmemberDictionary {
        EndmemberDictionary::from_columns(&cols.iter().map(|c| c.to_vec()).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn lmm_identity_single_endmember() {
        let e = dict(&[&[0.2, 0.7, 0.4]]);
        let a = AbundanceVector::new(vec![1.0]).unwrap();
        let y = lmm_mix(&e, &a).unwrap();
        assert_eq!(y.values(), &[0.2, 0.7, 0.4]);
    }

    #[test]
    fn lmm_symmetric_half_mix() {
        let e = dict(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let a = AbundanceVector::new(vec![0.5, 0.5]).unwrap();
        let y = lmm_mix(&e, &a).unwrap();
        assert_eq!(y.values(), &[0.5, 0.5]);
    }

    #[test]
    fn lmm_matches_triple_loop_oracle() {
        // Random B=4, K=3 instance cross-checked with a dense matrix-vector
        // product written the long way.
        let mut rng = Rng::new(42);
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..4).map(|_| rng.next_f64()).collect())
            .collect();
        let e = EndmemberDictionary::from_columns(&cols).unwrap();
        let raw: Vec<f64> = (0..3).map(|_| rng.next_f64() + 0.05).collect();
        let sum: f64 = raw.iter().sum();
        let a = AbundanceVector::new(raw.iter().map(|v| v / sum).collect()).unwrap();

        let mut expected = [0.0f64; 4];
        for b in 0..4 {
            for k in 0..3 {
                expected[b] += cols[k][b] * a.weights()[k];
            }
        }
        let y = lmm_mix(&e, &a).unwrap();
        for b in 0..4 {
            assert!((y.values()[b] - expected[b]).abs() < 1e-14);
        }
    }

    #[test]
    fn lmm_dimension_mismatch_names_k() {
        let e = dict(&[&[0.1, 0.2]]);
        let a = AbundanceVector::new(vec![0.5, 0.5]).unwrap();
        let err = lmm_mix(&e, &a).unwrap_err();
        match err {
            Error::EndmemberMismatch {
                expected, actual, ..
            } => {
                assert_eq!((expected, actual), (1, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn elmm_with_unit_scaling_equals_lmm() {
        let e = dict(&[&[0.9, 0.1, 0.3], &[0.2, 0.8, 0.5]]);
        let a = AbundanceVector::new(vec![0.3, 0.7]).unwrap();
        let s = ScalingVector::ones(2);
        let lhs = elmm_mix(&e, &s, &a).unwrap();
        let rhs = lmm_mix(&e, &a).unwrap();
        for (l, r) in lhs.values().iter().zip(rhs.values()) {
            assert!((l - r).abs() <= 1e-12);
        }
    }

    #[test]
    fn elmm_zero_scaling_annihilates() {
        let e = dict(&[&[0.9, 0.1], &[0.2, 0.8]]);
        let a = AbundanceVector::new(vec![0.3, 0.7]).unwrap();
        let s = ScalingVector::new(vec![0.0, 0.0]).unwrap();
        let y = elmm_mix(&e, &s, &a).unwrap();
        assert_eq!(y.values(), &[0.0, 0.0]);
    }

    #[test]
    fn elmm_matches_elementwise_sum_oracle() {
        // B=3, K=2 hand case: sum_k s_k a_k e_k accumulated per element.
        let e = dict(&[&[0.6, 0.2, 0.1], &[0.3, 0.9, 0.4]]);
        let a = AbundanceVector::new(vec![0.25, 0.75]).unwrap();
        let s = ScalingVector::new(vec![0.5, 0.8]).unwrap();
        let y = elmm_mix(&e, &s, &a).unwrap();
        for b in 0..3 {
            let expected =
                0.5 * 0.25 * e.column(0)[b] + 0.8 * 0.75 * e.column(1)[b];
            assert!((y.values()[b] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_equal_logits_is_uniform() {
        for k in 1..6 {
            let a = softmax_abundance(&vec![3.25; k], 0.37).unwrap();
            for &w in a.weights() {
                assert!((w - 1.0 / k as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_closed_form_ln2() {
        let a = softmax_abundance(&[core::f64::consts::LN_2, 0.0], 1.0).unwrap();
        assert!((a.weights()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((a.weights()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_saturates_at_low_temperature() {
        // exp(100) dominates two exp(0) terms: entry 0 >= 1 - 2e-44.
        let a = softmax_abundance(&[10.0, 0.0, 0.0], 0.1).unwrap();
        assert!(a.weights()[0] >= 1.0 - 1e-6);
    }

    #[test]
    fn softmax_rejects_bad_tau() {
        assert!(softmax_abundance(&[0.0], 0.0).is_err());
        assert!(softmax_abundance(&[0.0], -1.0).is_err());
    }

    #[test]
    fn sigmoid_gate_reference_value() {
        // 1/(1+e^-1) evaluated at extended precision.
        assert!((sigmoid_gate(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
    }

    #[test]
    fn dichromatic_identities() {
        let cd = Spectrum::new(vec![0.2, 0.4]).unwrap();
        let cs = Spectrum::new(vec![0.5, 0.5]).unwrap();
        let no_spec = dichromatic_combine(&cd, &cs, 0.0).unwrap();
        assert_eq!(no_spec.values(), cd.values());

        let zero_d = Spectrum::zeros(2);
        let only_spec = dichromatic_combine(&zero_d, &cs, 1.0).unwrap();
        assert_eq!(only_spec.values(), cs.values());

        let half = dichromatic_combine(&cd, &cs, 0.5).unwrap();
        assert!((half.values()[0] - 0.45).abs() < 1e-15);
        assert!((half.values()[1] - 0.65).abs() < 1e-15);
    }

    #[test]
    fn dichromatic_band_mismatch() {
        let cd = Spectrum::zeros(2);
        let cs = Spectrum::zeros(3);
        assert!(dichromatic_combine(&cd, &cs, 0.3).is_err());
    }

    #[test]
    fn rgb_identity_passthrough() {
        let m = CameraResponse::new(
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            3,
            GammaPolicy::Linear,
        )
        .unwrap();
        let c = Spectrum::new(vec![0.3, 0.6, 0.9]).unwrap();
        let rgb = spectrum_to_rgb(&c, &m).unwrap();
        assert_eq!(rgb, [0.3, 0.6, 0.9]);

        let black = spectrum_to_rgb(&Spectrum::zeros(3), &m).unwrap();
        assert_eq!(black, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn cie_default_flat_spectrum_maps_to_gray() {
        for bands in [3usize, 8, 21] {
            let m = CameraResponse::default_for_bands(bands).unwrap();
            // Row-sum oracle: flat 0.5 spectrum -> 0.5 * (row sums) = 0.5.
            let mut sums = [0.0f64; 3];
            for r in 0..3 {
                sums[r] = m.row(r).iter().sum::<f64>() * 0.5;
            }
            let c = Spectrum::new(vec![0.5; bands]).unwrap();
            let rgb = spectrum_to_rgb(&c, &m).unwrap();
            for r in 0..3 {
                assert!((rgb[r] - sums[r]).abs() < 1e-12);
                assert!((rgb[r] - 0.5).abs() < 1e-9, "band={bands} r={r} rgb={rgb:?}");
            }
        }
    }

    #[test]
    fn spectrum_to_rgb_is_linear() {
        let m = CameraResponse::default_for_bands(8).unwrap();
        let mut rng = Rng::new(9);
        for _ in 0..16 {
            let x: Vec<f64> = (0..8).map(|_| rng.next_f64()).collect();
            let y: Vec<f64> = (0..8).map(|_| rng.next_f64()).collect();
            let (alpha, beta) = (rng.range(-2.0, 2.0), rng.range(-2.0, 2.0));
            let combo: Vec<f64> = x
                .iter()
                .zip(&y)
                .map(|(a, b)| alpha * a + beta * b)
                .collect();
            let fx = spectrum_to_rgb(&Spectrum::new(x).unwrap(), &m).unwrap();
            let fy = spectrum_to_rgb(&Spectrum::new(y).unwrap(), &m).unwrap();
            let fc = spectrum_to_rgb(&Spectrum::new(combo).unwrap(), &m).unwrap();
            for r in 0..3 {
                assert!((fc[r] - (alpha * fx[r] + beta * fy[r])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn srgb_gamma_policy_applies_transfer() {
        let m = CameraResponse::new(
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            3,
            GammaPolicy::SrgbGamma,
        )
        .unwrap();
        let c = Spectrum::new(vec![0.5, 0.001, 2.0]).unwrap();
        let rgb = spectrum_to_rgb(&c, &m).unwrap();
        assert!((rgb[0] - srgb_transfer(0.5)).abs() < 1e-15);
        assert!((rgb[1] - 12.92 * 0.001).abs() < 1e-15);
        // Values above 1 clamp before the transfer.
        assert!((rgb[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_weights_validation() {
        assert!(LossWeights::new(5.0, 1.0).is_ok());
        assert!(LossWeights::new(0.0, 1.0).is_ok());
        assert!(LossWeights::new(0.0, 0.0).is_err());
        assert!(LossWeights::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn dictionary_rejects_out_of_range() {
        assert!(EndmemberDictionary::from_columns(&[vec![1.2, 0.0]]).is_err());
        assert!(EndmemberDictionary::from_columns(&[vec![-0.1, 0.0]]).is_err());
    }
}
