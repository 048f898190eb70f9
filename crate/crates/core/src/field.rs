//! Explicit voxel-grid scene representation.
//!
//! A dense lattice of raw (pre-activation) parameters is trilinearly
//! interpolated at query points and then activated: softplus for density,
//! temperature softmax for abundances, sigmoids for scaling factors and the
//! specular tint, and a per-band sigmoid over a degree-2 spherical-harmonic
//! expansion for view-dependent specular reflectance. Diffuse reflectance is
//! the scaled endmember mixture E diag(s) a; the final radiance is the
//! dichromatic sum c_d + h c_s.
//!
//! Interpolation happens before activation, so the simplex and range
//! constraints hold exactly at every query point. The backward pass is the
//! hand-derived chain rule through all of the above and is checked against
//! central finite differences in the tests.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::camera::Vec3;
use crate::numeric;
use crate::rng::Rng;
use crate::sh::{sh_basis, SH_COEFFS, SH_DEGREE};
use crate::spectral::{
    AbundanceVector, EndmemberDictionary, ScalingVector, Spectrum,
};
use crate::{Error, Result};

/// Axis-aligned scene bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        for i in 0..3 {
            if !(min[i] < max[i]) {
                return Err(Error::Invalid {
                    context: "bounds",
                    detail: format!("min must be < max on every axis, got {min:?}..{max:?}"),
                });
            }
        }
        Ok(Aabb { min, max })
    }

    pub fn unit_centered() -> Self {
        Aabb {
            min: [-1.0, -1.0, -1.0],
            max: [1.0, 1.0, 1.0],
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Abundance activation. `Softmax` is the physically constrained model;
/// `Linear` passes raw interpolated weights through unchanged and exists
/// only for the unconstrained ablation baseline. Checkpoints always reload
/// as `Softmax`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbundanceActivation {
    #[default]
    Softmax,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelField {
    resolution: [usize; 3],
    bounds: Aabb,
    endmember_count: usize,
    band_count: usize,
    pub tau: f64,
    pub density_scale: f64,
    pub abundance_activation: AbundanceActivation,
    endmembers: Vec<f32>,       // B x K, column-major
    density_raw: Vec<f32>,      // V
    abundance_logits: Vec<f32>, // V x K, voxel-major
    scaling_logits: Vec<f32>,   // V x K
    tint_logit: Vec<f32>,       // V
    specular_sh: Vec<f32>,      // V x B x 9
}

impl VoxelField {
    pub fn new(
        resolution: [usize; 3],
        bounds: Aabb,
        endmembers: &EndmemberDictionary,
        tau: f64,
        density_scale: f64,
    ) -> Result<Self> {
        if resolution.iter().any(|&n| n < 2) {
            return Err(Error::Invalid {
                context: "voxel field",
                detail: format!("resolution must be >= 2 per axis, got {resolution:?}"),
            });
        }
        if !(tau > 0.0) {
            return Err(Error::NonPositiveTau { tau });
        }
        if !(density_scale > 0.0) {
            return Err(Error::Invalid {
                context: "voxel field",
                detail: String::from("density_scale must be positive"),
            });
        }
        let v = resolution[0] * resolution[1] * resolution[2];
        let k = endmembers.endmember_count();
        let b = endmembers.band_count();
        Ok(VoxelField {
            resolution,
            bounds,
            endmember_count: k,
            band_count: b,
            tau,
            density_scale,
            abundance_activation: AbundanceActivation::Softmax,
            endmembers: endmembers.column_major().iter().map(|&x| x as f32).collect(),
            density_raw: vec![0.0; v],
            abundance_logits: vec![0.0; v * k],
            scaling_logits: vec![0.0; v * k],
            tint_logit: vec![0.0; v],
            specular_sh: vec![0.0; v * b * SH_COEFFS],
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_raw_parts(
        resolution: [usize; 3],
        bounds: Aabb,
        endmember_count: usize,
        band_count: usize,
        tau: f64,
        density_scale: f64,
        endmembers: Vec<f32>,
        density_raw: Vec<f32>,
        abundance_logits: Vec<f32>,
        scaling_logits: Vec<f32>,
        tint_logit: Vec<f32>,
        specular_sh: Vec<f32>,
    ) -> Result<Self> {
        let v = resolution[0] * resolution[1] * resolution[2];
        let expect = [
            ("endmembers", endmembers.len(), band_count * endmember_count),
            ("density_raw", density_raw.len(), v),
            ("abundance_logits", abundance_logits.len(), v * endmember_count),
            ("scaling_logits", scaling_logits.len(), v * endmember_count),
            ("tint_logit", tint_logit.len(), v),
            ("specular_sh", specular_sh.len(), v * band_count * SH_COEFFS),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::Invalid {
                    context: "voxel field",
                    detail: format!("{name} has {got} values, expected {want}"),
                });
            }
        }
        let mut field = VoxelField::new(
            resolution,
            bounds,
            &EndmemberDictionary::from_column_major(
                endmembers.iter().map(|&x| (x as f64).clamp(0.0, 1.0)).collect(),
                band_count,
                endmember_count,
            )?,
            tau,
            density_scale,
        )?;
        field.endmembers = endmembers;
        field.density_raw = density_raw;
        field.abundance_logits = abundance_logits;
        field.scaling_logits = scaling_logits;
        field.tint_logit = tint_logit;
        field.specular_sh = specular_sh;
        Ok(field)
    }

    /// A field with uniform random raw parameters, for stress and gradient
    /// checks.
    #[allow(clippy::too_many_arguments)]
    pub fn random(
        rng: &mut Rng,
        resolution: [usize; 3],
        bounds: Aabb,
        k: usize,
        bands: usize,
        tau: f64,
        density_scale: f64,
        raw_amplitude: f64,
    ) -> Result<Self> {
        let cols: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..bands).map(|_| rng.next_f64()).collect())
            .collect();
        let dict = EndmemberDictionary::from_columns(&cols)?;
        let mut field = VoxelField::new(resolution, bounds, &dict, tau, density_scale)?;
        let amp = raw_amplitude;
        for v in field.density_raw.iter_mut() {
            *v = rng.range(-amp, amp) as f32;
        }
        for v in field.abundance_logits.iter_mut() {
            *v = rng.range(-amp, amp) as f32;
        }
        for v in field.scaling_logits.iter_mut() {
            *v = rng.range(-amp, amp) as f32;
        }
        for v in field.tint_logit.iter_mut() {
            *v = rng.range(-amp, amp) as f32;
        }
        for v in field.specular_sh.iter_mut() {
            *v = rng.range(-amp, amp) as f32;
        }
        Ok(field)
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn endmember_count(&self) -> usize {
        self.endmember_count
    }

    pub fn band_count(&self) -> usize {
        self.band_count
    }

    pub fn voxel_count(&self) -> usize {
        self.resolution[0] * self.resolution[1] * self.resolution[2]
    }

    pub fn sh_degree(&self) -> usize {
        SH_DEGREE
    }

    #[inline]
    pub fn voxel_index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.resolution[0] * (y + self.resolution[1] * z)
    }

    /// World position of lattice node (i, j, k).
    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let mut p = [0.0; 3];
        let idx = [i, j, k];
        for a in 0..3 {
            let extent = self.bounds.max[a] - self.bounds.min[a];
            p[a] = self.bounds.min[a]
                + extent * idx[a] as f64 / (self.resolution[a] as f64 - 1.0);
        }
        p
    }

    pub fn endmembers(&self) -> EndmemberDictionary {
        EndmemberDictionary::from_column_major(
            self.endmembers
                .iter()
                .map(|&x| (x as f64).clamp(0.0, 1.0))
                .collect(),
            self.band_count,
            self.endmember_count,
        )
        .expect("stored endmembers are valid")
    }

    #[inline]
    pub fn endmember_value(&self, band: usize, k: usize) -> f64 {
        self.endmembers[k * self.band_count + band] as f64
    }

    pub fn set_endmembers(&mut self, dict: &EndmemberDictionary) -> Result<()> {
        if dict.band_count() != self.band_count {
            return Err(Error::BandMismatch {
                context: "set_endmembers",
                expected: self.band_count,
                actual: dict.band_count(),
            });
        }
        if dict.endmember_count() != self.endmember_count {
            return Err(Error::EndmemberMismatch {
                context: "set_endmembers",
                expected: self.endmember_count,
                actual: dict.endmember_count(),
            });
        }
        self.endmembers = dict.column_major().iter().map(|&x| x as f32).collect();
        Ok(())
    }

    /// Swaps endmember column `k`; everything else (abundances included) is
    /// untouched, which is what makes dictionary edits change material
    /// appearance in place.
    pub fn replace_endmember(&self, k: usize, spectrum: &Spectrum) -> Result<VoxelField> {
        if k >= self.endmember_count {
            return Err(Error::IndexOutOfBounds {
                context: "replace_endmember",
                index: k,
                len: self.endmember_count,
            });
        }
        if spectrum.bands() != self.band_count {
            return Err(Error::BandMismatch {
                context: "replace_endmember",
                expected: self.band_count,
                actual: spectrum.bands(),
            });
        }
        for &v in spectrum.values() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange {
                    context: "replace_endmember spectrum",
                    value: v,
                    min: 0.0,
                    max: 1.0,
                });
            }
        }
        let mut out = self.clone();
        for (b, &v) in spectrum.values().iter().enumerate() {
            out.endmembers[k * self.band_count + b] = v as f32;
        }
        Ok(out)
    }

    // Raw parameter access for the trainer and checkpoint code.

    pub fn density_raw(&self) -> &[f32] {
        &self.density_raw
    }

    pub fn abundance_logits(&self) -> &[f32] {
        &self.abundance_logits
    }

    pub fn scaling_logits(&self) -> &[f32] {
        &self.scaling_logits
    }

    pub fn tint_logit(&self) -> &[f32] {
        &self.tint_logit
    }

    pub fn specular_sh(&self) -> &[f32] {
        &self.specular_sh
    }

    pub fn endmembers_raw(&self) -> &[f32] {
        &self.endmembers
    }

    /// Mutable views over every parameter array, in checkpoint order.
    pub fn params_mut(&mut self) -> FieldParamsMut<'_> {
        FieldParamsMut {
            endmembers: &mut self.endmembers,
            density_raw: &mut self.density_raw,
            abundance_logits: &mut self.abundance_logits,
            scaling_logits: &mut self.scaling_logits,
            tint_logit: &mut self.tint_logit,
            specular_sh: &mut self.specular_sh,
        }
    }

    /// Clamps the endmember dictionary elementwise to [0, 1].
    pub fn clamp_endmembers(&mut self) {
        for v in self.endmembers.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }

    fn trilinear(&self, p: Vec3) -> Option<([usize; 8], [f64; 8])> {
        if !self.bounds.contains(p) {
            return None;
        }
        let mut cell = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let extent = self.bounds.max[a] - self.bounds.min[a];
            let g = (p[a] - self.bounds.min[a]) / extent * (self.resolution[a] as f64 - 1.0);
            let mut i = numeric::floor(g) as isize;
            let max_cell = self.resolution[a] as isize - 2;
            if i > max_cell {
                i = max_cell;
            }
            if i < 0 {
                i = 0;
            }
            cell[a] = i as usize;
            frac[a] = (g - i as f64).clamp(0.0, 1.0);
        }
        let [fx, fy, fz] = frac;
        let mut idx = [0usize; 8];
        let mut w = [0.0f64; 8];
        for corner in 0..8 {
            let dx = corner & 1;
            let dy = (corner >> 1) & 1;
            let dz = (corner >> 2) & 1;
            idx[corner] = self.voxel_index(cell[0] + dx, cell[1] + dy, cell[2] + dz);
            w[corner] = (if dx == 1 { fx } else { 1.0 - fx })
                * (if dy == 1 { fy } else { 1.0 - fy })
                * (if dz == 1 { fz } else { 1.0 - fz });
        }
        Some((idx, w))
    }

    /// Forward query into a reusable scratch buffer (no allocation after the
    /// first call with matching shape).
    pub fn sample_into(&self, x: Vec3, d: Vec3, scratch: &mut SampleScratch) -> Result<()> {
        let dn = numeric::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        if (dn - 1.0).abs() > 1e-6 {
            return Err(Error::NonUnitDirection { norm: dn });
        }
        scratch.ensure_shape(self.endmember_count, self.band_count);
        scratch.basis = sh_basis(d);

        match self.trilinear(x) {
            None => {
                scratch.in_bounds = false;
                scratch.corner_idx = [0; 8];
                scratch.corner_w = [0.0; 8];
                scratch.raw_density = 0.0;
                scratch.density = 0.0;
                let k = self.endmember_count;
                for v in scratch.raw_abundance.iter_mut() {
                    *v = 0.0;
                }
                for v in scratch.raw_scaling.iter_mut() {
                    *v = 0.0;
                }
                scratch.raw_tint = 0.0;
                for v in scratch.sh_dot.iter_mut() {
                    *v = 0.0;
                }
                for v in scratch.abundance.iter_mut() {
                    *v = 1.0 / k as f64;
                }
                for v in scratch.scaling.iter_mut() {
                    *v = 0.5;
                }
                scratch.tint = 0.5;
                for v in scratch.specular.iter_mut() {
                    *v = 0.5;
                }
            }
            Some((idx, w)) => {
                scratch.in_bounds = true;
                scratch.corner_idx = idx;
                scratch.corner_w = w;
                let k = self.endmember_count;
                let b = self.band_count;

                let mut raw_density = 0.0;
                for v in scratch.raw_abundance.iter_mut() {
                    *v = 0.0;
                }
                for v in scratch.raw_scaling.iter_mut() {
                    *v = 0.0;
                }
                let mut raw_tint = 0.0;
                for v in scratch.sh_dot.iter_mut() {
                    *v = 0.0;
                }

                for c in 0..8 {
                    let vi = idx[c];
                    let wc = w[c];
                    let dr = self.density_raw[vi];
                    if dr.is_nan() {
                        return Err(Error::NanParameter { voxel: vi });
                    }
                    raw_density += wc * dr as f64;

                    let ab = &self.abundance_logits[vi * k..(vi + 1) * k];
                    let sc = &self.scaling_logits[vi * k..(vi + 1) * k];
                    for kk in 0..k {
                        if ab[kk].is_nan() || sc[kk].is_nan() {
                            return Err(Error::NanParameter { voxel: vi });
                        }
                        scratch.raw_abundance[kk] += wc * ab[kk] as f64;
                        scratch.raw_scaling[kk] += wc * sc[kk] as f64;
                    }

                    let tl = self.tint_logit[vi];
                    if tl.is_nan() {
                        return Err(Error::NanParameter { voxel: vi });
                    }
                    raw_tint += wc * tl as f64;

                    let sh = &self.specular_sh[vi * b * SH_COEFFS..(vi + 1) * b * SH_COEFFS];
                    for bb in 0..b {
                        let mut dot = 0.0;
                        for m in 0..SH_COEFFS {
                            let coeff = sh[bb * SH_COEFFS + m];
                            if coeff.is_nan() {
                                return Err(Error::NanParameter { voxel: vi });
                            }
                            dot += coeff as f64 * scratch.basis[m];
                        }
                        scratch.sh_dot[bb] += wc * dot;
                    }
                }
                scratch.raw_density = raw_density;
                scratch.raw_tint = raw_tint;
                scratch.density = self.density_scale * numeric::softplus(raw_density);

                match self.abundance_activation {
                    AbundanceActivation::Softmax => {
                        // Stable temperature softmax over the interpolated logits.
                        let mut max = f64::NEG_INFINITY;
                        for &v in scratch.raw_abundance.iter() {
                            if v > max {
                                max = v;
                            }
                        }
                        let mut sum = 0.0;
                        for (out, &v) in scratch
                            .abundance
                            .iter_mut()
                            .zip(scratch.raw_abundance.iter())
                        {
                            let e = numeric::exp((v - max) / self.tau);
                            *out = e;
                            sum += e;
                        }
                        for out in scratch.abundance.iter_mut() {
                            *out /= sum;
                        }
                    }
                    AbundanceActivation::Linear => {
                        scratch.abundance.copy_from_slice(&scratch.raw_abundance);
                    }
                }
                for (out, &v) in scratch.scaling.iter_mut().zip(scratch.raw_scaling.iter()) {
                    *out = numeric::sigmoid(v);
                }
                scratch.tint = numeric::sigmoid(raw_tint);
                for (out, &v) in scratch.specular.iter_mut().zip(scratch.sh_dot.iter()) {
                    *out = numeric::sigmoid(v);
                }
            }
        }

        // Diffuse mixture and dichromatic composition.
        let b = self.band_count;
        let k = self.endmember_count;
        for bb in 0..b {
            let mut cd = 0.0;
            for kk in 0..k {
                cd += self.endmember_value(bb, kk) * scratch.scaling[kk] * scratch.abundance[kk];
            }
            scratch.diffuse[bb] = cd;
            scratch.radiance[bb] = (cd + scratch.tint * scratch.specular[bb]).max(0.0);
        }
        Ok(())
    }

    /// Point query returning owned spectral types.
    pub fn sample(&self, x: Vec3, d: Vec3) -> Result<PointSample> {
        let mut scratch = SampleScratch::new(self.endmember_count, self.band_count);
        self.sample_into(x, d, &mut scratch)?;
        Ok(PointSample {
            density: scratch.density,
            abundance: AbundanceVector::new_unchecked(scratch.abundance.clone()),
            scaling: ScalingVector::new(scratch.scaling.clone())?,
            tint: scratch.tint,
            specular: Spectrum::new(scratch.specular.clone())?,
            diffuse: Spectrum::new(scratch.diffuse.clone())?,
            radiance: Spectrum::new(scratch.radiance.clone())?,
        })
    }

    /// Backward pass for one point query. `scratch` must hold the forward
    /// state for (x, d); gradients flow into `sink` for the eight corner
    /// voxels' raw parameters and the shared endmember dictionary.
    pub fn sample_backward_into<G: GradWrite + ?Sized>(
        &self,
        scratch: &SampleScratch,
        grad: &PointSampleGrad,
        sink: &mut G,
    ) {
        let k = self.endmember_count;
        let b = self.band_count;
        debug_assert_eq!(grad.radiance.len(), b);
        debug_assert_eq!(grad.abundance.len(), k);

        let mut g_diffuse = vec![0.0; b];
        let mut g_specular = vec![0.0; b];
        let mut g_tint = grad.tint;
        for bb in 0..b {
            // The nonnegativity clamp only binds where the pre-clamp radiance
            // is negative, which cannot happen for in-range parameters; the
            // subgradient at exactly zero is taken as zero.
            let pre = scratch.diffuse[bb] + scratch.tint * scratch.specular[bb];
            let pass = if pre > 0.0 { 1.0 } else { 0.0 };
            let g_c = grad.radiance[bb] * pass;
            g_diffuse[bb] = grad.diffuse[bb] + g_c;
            g_tint += g_c * scratch.specular[bb];
            g_specular[bb] = grad.specular[bb] + g_c * scratch.tint;
        }

        // Diffuse into the dictionary, scalings and abundances.
        let mut g_scaling: Vec<f64> = grad.scaling.clone();
        let mut g_abundance: Vec<f64> = grad.abundance.clone();
        for bb in 0..b {
            let gd = g_diffuse[bb];
            if gd == 0.0 {
                continue;
            }
            for kk in 0..k {
                let e = self.endmember_value(bb, kk);
                sink.add_endmember(bb, kk, gd * scratch.scaling[kk] * scratch.abundance[kk]);
                g_scaling[kk] += gd * e * scratch.abundance[kk];
                g_abundance[kk] += gd * e * scratch.scaling[kk];
            }
        }

        if !scratch.in_bounds {
            return; // out-of-bounds queries do not depend on voxel parameters
        }

        // Activation derivatives to raw (interpolated) space.
        let d_raw_density =
            grad.density * self.density_scale * numeric::sigmoid(scratch.raw_density);
        let mut d_raw_abundance = vec![0.0; k];
        match self.abundance_activation {
            AbundanceActivation::Softmax => {
                let dot: f64 = g_abundance
                    .iter()
                    .zip(scratch.abundance.iter())
                    .map(|(g, a)| g * a)
                    .sum();
                for kk in 0..k {
                    d_raw_abundance[kk] =
                        scratch.abundance[kk] * (g_abundance[kk] - dot) / self.tau;
                }
            }
            AbundanceActivation::Linear => {
                d_raw_abundance.copy_from_slice(&g_abundance);
            }
        }
        let mut d_raw_scaling = vec![0.0; k];
        for kk in 0..k {
            let s = scratch.scaling[kk];
            d_raw_scaling[kk] = g_scaling[kk] * s * (1.0 - s);
        }
        let d_raw_tint = g_tint * scratch.tint * (1.0 - scratch.tint);
        let mut d_sh_dot = vec![0.0; b];
        for bb in 0..b {
            let s = scratch.specular[bb];
            d_sh_dot[bb] = g_specular[bb] * s * (1.0 - s);
        }

        // Scatter through the trilinear weights.
        for c in 0..8 {
            let wc = scratch.corner_w[c];
            if wc == 0.0 {
                continue;
            }
            let vi = scratch.corner_idx[c];
            sink.add_density(vi, wc * d_raw_density);
            for kk in 0..k {
                sink.add_abundance_logit(vi, kk, wc * d_raw_abundance[kk]);
                sink.add_scaling_logit(vi, kk, wc * d_raw_scaling[kk]);
            }
            sink.add_tint_logit(vi, wc * d_raw_tint);
            for bb in 0..b {
                let g = wc * d_sh_dot[bb];
                if g == 0.0 {
                    continue;
                }
                for m in 0..SH_COEFFS {
                    sink.add_specular_sh(vi, bb, m, g * scratch.basis[m]);
                }
            }
        }
    }

    /// One-shot backward: runs the forward query and returns a dense
    /// gradient buffer. Convenience for tests and the gradcheck tooling.
    pub fn sample_backward(
        &self,
        x: Vec3,
        d: Vec3,
        grad: &PointSampleGrad,
    ) -> Result<GradBuffer> {
        let mut scratch = SampleScratch::new(self.endmember_count, self.band_count);
        self.sample_into(x, d, &mut scratch)?;
        let mut buf = GradBuffer::zeros_like(self);
        self.sample_backward_into(&scratch, grad, &mut buf);
        Ok(buf)
    }
}

/// Mutable parameter views in checkpoint order.
pub struct FieldParamsMut<'a> {
    pub endmembers: &'a mut [f32],
    pub density_raw: &'a mut [f32],
    pub abundance_logits: &'a mut [f32],
    pub scaling_logits: &'a mut [f32],
    pub tint_logit: &'a mut [f32],
    pub specular_sh: &'a mut [f32],
}

/// Activated quantities at a query point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    pub density: f64,
    pub abundance: AbundanceVector,
    pub scaling: ScalingVector,
    pub tint: f64,
    pub specular: Spectrum,
    pub diffuse: Spectrum,
    pub radiance: Spectrum,
}

/// Reusable forward-pass state; holds everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct SampleScratch {
    pub in_bounds: bool,
    pub corner_idx: [usize; 8],
    pub corner_w: [f64; 8],
    pub basis: [f64; SH_COEFFS],
    pub raw_density: f64,
    pub raw_tint: f64,
    pub raw_abundance: Vec<f64>,
    pub raw_scaling: Vec<f64>,
    pub sh_dot: Vec<f64>,
    pub density: f64,
    pub tint: f64,
    pub abundance: Vec<f64>,
    pub scaling: Vec<f64>,
    pub specular: Vec<f64>,
    pub diffuse: Vec<f64>,
    pub radiance: Vec<f64>,
}

impl SampleScratch {
    pub fn new(k: usize, b: usize) -> Self {
        SampleScratch {
            in_bounds: false,
            corner_idx: [0; 8],
            corner_w: [0.0; 8],
            basis: [0.0; SH_COEFFS],
            raw_density: 0.0,
            raw_tint: 0.0,
            raw_abundance: vec![0.0; k],
            raw_scaling: vec![0.0; k],
            sh_dot: vec![0.0; b],
            density: 0.0,
            tint: 0.0,
            abundance: vec![0.0; k],
            scaling: vec![0.0; k],
            specular: vec![0.0; b],
            diffuse: vec![0.0; b],
            radiance: vec![0.0; b],
        }
    }

    fn ensure_shape(&mut self, k: usize, b: usize) {
        if self.raw_abundance.len() != k {
            self.raw_abundance = vec![0.0; k];
            self.raw_scaling = vec![0.0; k];
            self.abundance = vec![0.0; k];
            self.scaling = vec![0.0; k];
        }
        if self.sh_dot.len() != b {
            self.sh_dot = vec![0.0; b];
            self.specular = vec![0.0; b];
            self.diffuse = vec![0.0; b];
            self.radiance = vec![0.0; b];
        }
    }
}

/// Upstream gradients with respect to a `PointSample`'s outputs.
#[derive(Debug, Clone)]
pub struct PointSampleGrad {
    pub density: f64,
    pub radiance: Vec<f64>,
    pub abundance: Vec<f64>,
    pub diffuse: Vec<f64>,
    pub specular: Vec<f64>,
    pub scaling: Vec<f64>,
    pub tint: f64,
}

impl PointSampleGrad {
    pub fn zeros(k: usize, b: usize) -> Self {
        PointSampleGrad {
            density: 0.0,
            radiance: vec![0.0; b],
            abundance: vec![0.0; k],
            diffuse: vec![0.0; b],
            specular: vec![0.0; b],
            scaling: vec![0.0; k],
            tint: 0.0,
        }
    }
}

/// Destination for parameter gradients.
pub trait GradWrite {
    fn add_density(&mut self, voxel: usize, g: f64);
    fn add_abundance_logit(&mut self, voxel: usize, k: usize, g: f64);
    fn add_scaling_logit(&mut self, voxel: usize, k: usize, g: f64);
    fn add_tint_logit(&mut self, voxel: usize, g: f64);
    fn add_specular_sh(&mut self, voxel: usize, band: usize, m: usize, g: f64);
    fn add_endmember(&mut self, band: usize, k: usize, g: f64);
}

/// Dense f64 gradients matching a field's parameter layout.
#[derive(Debug, Clone)]
pub struct GradBuffer {
    pub k: usize,
    pub bands: usize,
    pub endmembers: Vec<f64>,
    pub density_raw: Vec<f64>,
    pub abundance_logits: Vec<f64>,
    pub scaling_logits: Vec<f64>,
    pub tint_logit: Vec<f64>,
    pub specular_sh: Vec<f64>,
}

impl GradBuffer {
    pub fn zeros_like(field: &VoxelField) -> Self {
        let v = field.voxel_count();
        let k = field.endmember_count();
        let b = field.band_count();
        GradBuffer {
            k,
            bands: b,
            endmembers: vec![0.0; b * k],
            density_raw: vec![0.0; v],
            abundance_logits: vec![0.0; v * k],
            scaling_logits: vec![0.0; v * k],
            tint_logit: vec![0.0; v],
            specular_sh: vec![0.0; v * b * SH_COEFFS],
        }
    }

    pub fn clear(&mut self) {
        for arr in [
            &mut self.endmembers,
            &mut self.density_raw,
            &mut self.abundance_logits,
            &mut self.scaling_logits,
            &mut self.tint_logit,
            &mut self.specular_sh,
        ] {
            for v in arr.iter_mut() {
                *v = 0.0;
            }
        }
    }

    /// Accumulates `other` into self (used for the ordered merge).
    pub fn accumulate(&mut self, other: &GradBuffer) {
        fn axpy(dst: &mut [f64], src: &[f64]) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        axpy(&mut self.endmembers, &other.endmembers);
        axpy(&mut self.density_raw, &other.density_raw);
        axpy(&mut self.abundance_logits, &other.abundance_logits);
        axpy(&mut self.scaling_logits, &other.scaling_logits);
        axpy(&mut self.tint_logit, &other.tint_logit);
        axpy(&mut self.specular_sh, &other.specular_sh);
    }

    pub fn scale(&mut self, factor: f64) {
        for arr in [
            &mut self.endmembers,
            &mut self.density_raw,
            &mut self.abundance_logits,
            &mut self.scaling_logits,
            &mut self.tint_logit,
            &mut self.specular_sh,
        ] {
            for v in arr.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn max_abs_difference(&self, other: &GradBuffer) -> f64 {
        fn block(a: &[f64], b: &[f64]) -> f64 {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        }
        block(&self.endmembers, &other.endmembers)
            .max(block(&self.density_raw, &other.density_raw))
            .max(block(&self.abundance_logits, &other.abundance_logits))
            .max(block(&self.scaling_logits, &other.scaling_logits))
            .max(block(&self.tint_logit, &other.tint_logit))
            .max(block(&self.specular_sh, &other.specular_sh))
    }
}

impl GradWrite for GradBuffer {
    #[inline]
    fn add_density(&mut self, voxel: usize, g: f64) {
        self.density_raw[voxel] += g;
    }
    #[inline]
    fn add_abundance_logit(&mut self, voxel: usize, k: usize, g: f64) {
        self.abundance_logits[voxel * self.k + k] += g;
    }
    #[inline]
    fn add_scaling_logit(&mut self, voxel: usize, k: usize, g: f64) {
        self.scaling_logits[voxel * self.k + k] += g;
    }
    #[inline]
    fn add_tint_logit(&mut self, voxel: usize, g: f64) {
        self.tint_logit[voxel] += g;
    }
    #[inline]
    fn add_specular_sh(&mut self, voxel: usize, band: usize, m: usize, g: f64) {
        self.specular_sh[voxel * self.bands * SH_COEFFS + band * SH_COEFFS + m] += g;
    }
    #[inline]
    fn add_endmember(&mut self, band: usize, k: usize, g: f64) {
        self.endmembers[k * self.bands + band] += g;
    }
}

/// Lock-free shared gradient accumulator (fast mode). Addition order is
/// nondeterministic, so totals can differ from the ordered merge in the
/// last bits; the two modes are asserted to agree within 1e-5.
pub struct AtomicGradBuffer {
    k: usize,
    bands: usize,
    endmembers: Vec<AtomicU64>,
    density_raw: Vec<AtomicU64>,
    abundance_logits: Vec<AtomicU64>,
    scaling_logits: Vec<AtomicU64>,
    tint_logit: Vec<AtomicU64>,
    specular_sh: Vec<AtomicU64>,
}

fn atomic_zeros(n: usize) -> Vec<AtomicU64> {
    (0..n).map(|_| AtomicU64::new(0.0f64.to_bits())).collect()
}

#[inline]
fn atomic_add(cell: &AtomicU64, g: f64) {
    let mut current = cell.load(Ordering::Relaxed);
    loop {
        let next = (f64::from_bits(current) + g).to_bits();
        match cell.compare_exchange_weak(current, next, Ordering::Relaxed, Ordering::Relaxed) {
            Ok(_) => return,
            Err(observed) => current = observed,
        }
    }
}

impl AtomicGradBuffer {
    pub fn zeros_like(field: &VoxelField) -> Self {
        let v = field.voxel_count();
        let k = field.endmember_count();
        let b = field.band_count();
        AtomicGradBuffer {
            k,
            bands: b,
            endmembers: atomic_zeros(b * k),
            density_raw: atomic_zeros(v),
            abundance_logits: atomic_zeros(v * k),
            scaling_logits: atomic_zeros(v * k),
            tint_logit: atomic_zeros(v),
            specular_sh: atomic_zeros(v * b * SH_COEFFS),
        }
    }

    pub fn to_dense(&self, field: &VoxelField) -> GradBuffer {
        fn load(src: &[AtomicU64]) -> Vec<f64> {
            src.iter()
                .map(|c| f64::from_bits(c.load(Ordering::Relaxed)))
                .collect()
        }
        let mut out = GradBuffer::zeros_like(field);
        out.endmembers = load(&self.endmembers);
        out.density_raw = load(&self.density_raw);
        out.abundance_logits = load(&self.abundance_logits);
        out.scaling_logits = load(&self.scaling_logits);
        out.tint_logit = load(&self.tint_logit);
        out.specular_sh = load(&self.specular_sh);
        out
    }
}

impl GradWrite for &AtomicGradBuffer {
    #[inline]
    fn add_density(&mut self, voxel: usize, g: f64) {
        atomic_add(&self.density_raw[voxel], g);
    }
    #[inline]
    fn add_abundance_logit(&mut self, voxel: usize, k: usize, g: f64) {
        atomic_add(&self.abundance_logits[voxel * self.k + k], g);
    }
    #[inline]
    fn add_scaling_logit(&mut self, voxel: usize, k: usize, g: f64) {
        atomic_add(&self.scaling_logits[voxel * self.k + k], g);
    }
    #[inline]
    fn add_tint_logit(&mut self, voxel: usize, g: f64) {
        atomic_add(&self.tint_logit[voxel], g);
    }
    #[inline]
    fn add_specular_sh(&mut self, voxel: usize, band: usize, m: usize, g: f64) {
        atomic_add(
            &self.specular_sh[voxel * self.bands * SH_COEFFS + band * SH_COEFFS + m],
            g,
        );
    }
    #[inline]
    fn add_endmember(&mut self, band: usize, k: usize, g: f64) {
        atomic_add(&self.endmembers[k * self.bands + band], g);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::softmax_abundance;

    /// Central difference through f32 parameter storage, dividing by the
    /// realized (rounded) step.
    fn fd_probe(
        field: &mut VoxelField,
        objective: &dyn Fn(&VoxelField) -> f64,
        read: &dyn Fn(&VoxelField) -> f32,
        write: &dyn Fn(&mut VoxelField, f32),
        eps: f32,
    ) -> f64 {
        let v0 = read(field);
        let hi = v0 + eps;
        let lo = v0 - eps;
        write(field, hi);
        let fh = objective(field);
        write(field, lo);
        let fl = objective(field);
        write(field, v0);
        (fh - fl) / (hi as f64 - lo as f64)
    }

    fn two_endmember_dict() -> EndmemberDictionary {
        EndmemberDictionary::from_columns(&[vec![0.8, 0.2, 0.4], vec![0.1, 0.9, 0.5]]).unwrap()
    }

    fn small_field() -> VoxelField {
        VoxelField::new(
            [3, 3, 3],
            Aabb::unit_centered(),
            &two_endmember_dict(),
            1.0,
            25.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_parameters_hit_activation_identities() {
        let field = small_field();
        let s = field.sample([0.0, 0.0, 0.0], [0.0, 0.0, 1.0]).unwrap();
        assert!((s.density - 25.0 * numeric::softplus(0.0)).abs() < 1e-12);
        assert!((s.abundance.weights()[0] - 0.5).abs() < 1e-12);
        assert!((s.abundance.weights()[1] - 0.5).abs() < 1e-12);
        assert!((s.scaling.scales()[0] - 0.5).abs() < 1e-12);
        assert!((s.tint - 0.5).abs() < 1e-12);
        for &v in s.specular.values() {
            assert!((v - 0.5).abs() < 1e-12);
        }
        // c_d = 0.5 * (0.5 e1 + 0.5 e2), against the field's (f32-stored)
        // dictionary values.
        let e = field.endmembers();
        for b in 0..3 {
            let expect = 0.5 * (0.5 * e.column(0)[b] + 0.5 * e.column(1)[b]);
            assert!((s.diffuse.values()[b] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn corner_query_returns_stored_values() {
        let mut field = small_field();
        let vi = field.voxel_index(2, 1, 0);
        field.params_mut().density_raw[vi] = 1.25;
        field.params_mut().abundance_logits[vi * 2] = -0.75;
        let p = field.node_position(2, 1, 0);
        let mut scratch = SampleScratch::new(2, 3);
        field.sample_into(p, [0.0, 0.0, 1.0], &mut scratch).unwrap();
        assert!((scratch.raw_density - 1.25).abs() < 1e-9);
        assert!((scratch.raw_abundance[0] + 0.75).abs() < 1e-9);
    }

    #[test]
    fn midpoint_interpolates_linearly() {
        let mut field = small_field();
        let a = field.voxel_index(0, 0, 0);
        let b = field.voxel_index(1, 0, 0);
        field.params_mut().density_raw[a] = 0.0;
        field.params_mut().density_raw[b] = 2.0;
        let pa = field.node_position(0, 0, 0);
        let pb = field.node_position(1, 0, 0);
        let mid = [0.5 * (pa[0] + pb[0]), pa[1], pa[2]];
        let mut scratch = SampleScratch::new(2, 3);
        field.sample_into(mid, [0.0, 0.0, 1.0], &mut scratch).unwrap();
        assert!((scratch.raw_density - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_bounds_is_empty_space() {
        let field = small_field();
        let s = field.sample([5.0, 0.0, 0.0], [0.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.density, 0.0);
        assert!((s.abundance.weights()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_unit_direction_is_rejected() {
        let field = small_field();
        assert!(matches!(
            field.sample([0.0; 3], [0.0, 0.0, 2.0]),
            Err(Error::NonUnitDirection { .. })
        ));
    }

    #[test]
    fn nan_parameter_names_voxel() {
        let mut field = small_field();
        let vi = field.voxel_index(1, 1, 1);
        field.params_mut().density_raw[vi] = f32::NAN;
        match field.sample([0.05, 0.0, 0.0], [0.0, 0.0, 1.0]) {
            Err(Error::NanParameter { voxel }) => assert_eq!(voxel, vi),
            other => panic!("expected NaN error, got {other:?}"),
        }
    }

    #[test]
    fn queries_always_satisfy_constraints() {
        let mut rng = Rng::new(99);
        for trial in 0..50 {
            let tau = 0.5 + rng.next_f64() * 2.0;
            let field = VoxelField::random(
                &mut rng,
                [4, 3, 5],
                Aabb::unit_centered(),
                3,
                4,
                tau,
                25.0,
                6.0,
            )
            .unwrap();
            for _ in 0..40 {
                let x = [
                    rng.range(-1.5, 1.5),
                    rng.range(-1.5, 1.5),
                    rng.range(-1.5, 1.5),
                ];
                let z = rng.range(-1.0, 1.0);
                let phi = rng.range(0.0, core::f64::consts::TAU);
                let r = numeric::sqrt((1.0f64 - z * z).max(0.0));
                let d = [r * numeric::cos(phi), r * numeric::sin(phi), z];
                let s = field.sample(x, d).unwrap();
                let sum: f64 = s.abundance.weights().iter().sum();
                assert!((sum - 1.0).abs() < 1e-6, "trial {trial}");
                assert!(s.abundance.weights().iter().all(|&w| w >= 0.0));
                assert!(s.density >= 0.0);
                assert!(s.scaling.scales().iter().all(|&v| (0.0..=1.0).contains(&v)));
                assert!((0.0..=1.0).contains(&s.tint));
            }
        }
    }

    #[test]
    fn sample_is_continuous_in_position() {
        // Bounded raw parameters and unit density scale keep the Lipschitz
        // constant low enough for the 1e-4 output bound at 1e-6 separation.
        let mut rng = Rng::new(7);
        let field = VoxelField::random(
            &mut rng,
            [6, 6, 6],
            Aabb::unit_centered(),
            3,
            4,
            1.0,
            1.0,
            2.0,
        )
        .unwrap();
        let d = [0.0, 0.0, 1.0];
        for _ in 0..500 {
            let x = [
                rng.range(-1.0, 1.0),
                rng.range(-1.0, 1.0),
                rng.range(-1.0, 1.0),
            ];
            let mut y = x;
            let axis = rng.index(3);
            y[axis] = (y[axis] + 1e-6).min(1.0);
            let sa = field.sample(x, d).unwrap();
            let sb = field.sample(y, d).unwrap();
            assert!((sa.density - sb.density).abs() <= 1e-4);
            for (a, b) in sa.radiance.values().iter().zip(sb.radiance.values()) {
                assert!((a - b).abs() <= 1e-4);
            }
            for (a, b) in sa.abundance.weights().iter().zip(sb.abundance.weights()) {
                assert!((a - b).abs() <= 1e-4);
            }
        }
    }

    #[test]
    fn diffuse_is_view_independent_specular_is_not_position_dependent_within_cell() {
        let mut rng = Rng::new(15);
        let mut field = VoxelField::random(
            &mut rng,
            [3, 3, 3],
            Aabb::unit_centered(),
            2,
            3,
            1.0,
            25.0,
            3.0,
        )
        .unwrap();
        // Constant SH across all voxels: the specular spectrum depends only
        // on the direction.
        let sh_len = field.specular_sh().len();
        let per_voxel = 3 * SH_COEFFS;
        let template: Vec<f32> = (0..per_voxel).map(|i| (i as f32 * 0.1) - 0.7).collect();
        for v in 0..sh_len / per_voxel {
            field.params_mut().specular_sh[v * per_voxel..(v + 1) * per_voxel]
                .copy_from_slice(&template);
        }
        let d1 = [0.0, 0.0, 1.0];
        let d2 = v_normed([0.4, -0.3, 0.6]);
        let xa = [0.1, 0.2, -0.3];
        let xb = [0.12, 0.18, -0.29];
        let s_a1 = field.sample(xa, d1).unwrap();
        let s_a2 = field.sample(xa, d2).unwrap();
        let s_b1 = field.sample(xb, d1).unwrap();
        // Diffuse is independent of direction.
        for (a, b) in s_a1.diffuse.values().iter().zip(s_a2.diffuse.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        // Specular with spatially constant SH is independent of position.
        for (a, b) in s_a1.specular.values().iter().zip(s_b1.specular.values()) {
            assert!((a - b).abs() < 1e-9);
        }
        // And genuinely view dependent.
        let delta: f64 = s_a1
            .specular
            .values()
            .iter()
            .zip(s_a2.specular.values())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(delta > 1e-6);
    }

    fn v_normed(v: [f64; 3]) -> [f64; 3] {
        let n = numeric::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        [v[0] / n, v[1] / n, v[2] / n]
    }

    #[test]
    fn replace_endmember_identity_is_noop() {
        let mut rng = Rng::new(3);
        let field = VoxelField::random(
            &mut rng,
            [3, 3, 3],
            Aabb::unit_centered(),
            2,
            3,
            1.0,
            25.0,
            2.0,
        )
        .unwrap();
        let same = Spectrum::new(field.endmembers().column(0).to_vec()).unwrap();
        let swapped = field.replace_endmember(0, &same).unwrap();
        assert_eq!(field, swapped);
    }

    #[test]
    fn replace_endmember_validates() {
        let field = small_field();
        let bad = Spectrum::new(vec![1.5, 0.0, 0.0]).unwrap();
        assert!(field.replace_endmember(0, &bad).is_err());
        let ok = Spectrum::new(vec![0.5, 0.5, 0.5]).unwrap();
        assert!(field.replace_endmember(2, &ok).is_err()); // K = 2
        assert!(field.replace_endmember(1, &ok).is_ok());
    }

    #[test]
    fn zero_upstream_grad_means_zero_parameter_grad() {
        let mut rng = Rng::new(5);
        let field = VoxelField::random(
            &mut rng,
            [3, 3, 3],
            Aabb::unit_centered(),
            2,
            3,
            1.0,
            25.0,
            2.0,
        )
        .unwrap();
        let grad = PointSampleGrad::zeros(2, 3);
        let buf = field
            .sample_backward([0.1, -0.2, 0.3], [0.0, 0.0, 1.0], &grad)
            .unwrap();
        let zero = GradBuffer::zeros_like(&field);
        assert_eq!(buf.max_abs_difference(&zero), 0.0);
    }

    #[test]
    fn endmember_gradient_closed_form_at_corner() {
        // dc_d[b] / dE[b,k] = s_k * a_k when the query sits on one node.
        let mut rng = Rng::new(31);
        let field = VoxelField::random(
            &mut rng,
            [3, 3, 3],
            Aabb::unit_centered(),
            2,
            3,
            1.0,
            25.0,
            1.5,
        )
        .unwrap();
        let x = field.node_position(1, 1, 1);
        let s = field.sample(x, [0.0, 0.0, 1.0]).unwrap();
        for b in 0..3 {
            let mut grad = PointSampleGrad::zeros(2, 3);
            grad.diffuse[b] = 1.0;
            let buf = field.sample_backward(x, [0.0, 0.0, 1.0], &grad).unwrap();
            for k in 0..2 {
                let expect = s.scaling.scales()[k] * s.abundance.weights()[k];
                let got = buf.endmembers[k * 3 + b];
                assert!((got - expect).abs() < 1e-12, "b={b} k={k}");
            }
        }
    }

    /// Full finite-difference check of `sample_backward` against a scalar
    /// projection of all outputs, over random configurations.
    #[test]
    fn backward_matches_central_differences() {
        let mut rng = Rng::new(2024);
        let mut worst: f64 = 0.0;
        for _trial in 0..20 {
            let tau = 0.7 + rng.next_f64();
            let mut field = VoxelField::random(
                &mut rng,
                [3, 3, 3],
                Aabb::unit_centered(),
                2,
                3,
                tau,
                5.0,
                1.5,
            )
            .unwrap();
            let x = [
                rng.range(-0.9, 0.9),
                rng.range(-0.9, 0.9),
                rng.range(-0.9, 0.9),
            ];
            let z = rng.range(-1.0, 1.0);
            let phi = rng.range(0.0, core::f64::consts::TAU);
            let r = numeric::sqrt((1.0f64 - z * z).max(0.0));
            let d = [r * numeric::cos(phi), r * numeric::sin(phi), z];

            // Random projection over every output.
            let mut grad = PointSampleGrad::zeros(2, 3);
            grad.density = rng.range(-1.0, 1.0);
            grad.tint = rng.range(-1.0, 1.0);
            for v in grad.radiance.iter_mut() {
                *v = rng.range(-1.0, 1.0);
            }
            for v in grad.abundance.iter_mut() {
                *v = rng.range(-1.0, 1.0);
            }
            for v in grad.diffuse.iter_mut() {
                *v = rng.range(-1.0, 1.0);
            }
            for v in grad.specular.iter_mut() {
                *v = rng.range(-1.0, 1.0);
            }
            for v in grad.scaling.iter_mut() {
                *v = rng.range(-1.0, 1.0);
            }

            let objective = |f: &VoxelField| -> f64 {
                let s = f.sample(x, d).unwrap();
                let mut total = grad.density * s.density + grad.tint * s.tint;
                for (g, v) in grad.radiance.iter().zip(s.radiance.values()) {
                    total += g * v;
                }
                for (g, v) in grad.abundance.iter().zip(s.abundance.weights()) {
                    total += g * v;
                }
                for (g, v) in grad.diffuse.iter().zip(s.diffuse.values()) {
                    total += g * v;
                }
                for (g, v) in grad.specular.iter().zip(s.specular.values()) {
                    total += g * v;
                }
                for (g, v) in grad.scaling.iter().zip(s.scaling.scales()) {
                    total += g * v;
                }
                total
            };

            let analytic = field.sample_backward(x, d, &grad).unwrap();

            // Spot-check a handful of parameters from every class.
            for _ in 0..24 {
                let class = rng.index(6);
                let eps = 1e-4f32;
                let (analytic_g, fd) = match class {
                    0 => {
                        let i = rng.index(field.density_raw().len());
                        let fd = fd_probe(
                            &mut field,
                            &objective,
                            &|f| f.density_raw()[i],
                            &|f, v| f.params_mut().density_raw[i] = v,
                            eps,
                        );
                        (analytic.density_raw[i], fd)
                    }
                    1 => {
                        let i = rng.index(field.abundance_logits().len());
                        let fd = fd_probe(
                            &mut field,
                            &objective,
                            &|f| f.abundance_logits()[i],
                            &|f, v| f.params_mut().abundance_logits[i] = v,
                            eps,
                        );
                        (analytic.abundance_logits[i], fd)
                    }
                    2 => {
                        let i = rng.index(field.scaling_logits().len());
                        let fd = fd_probe(
                            &mut field,
                            &objective,
                            &|f| f.scaling_logits()[i],
                            &|f, v| f.params_mut().scaling_logits[i] = v,
                            eps,
                        );
                        (analytic.scaling_logits[i], fd)
                    }
                    3 => {
                        let i = rng.index(field.tint_logit().len());
                        let fd = fd_probe(
                            &mut field,
                            &objective,
                            &|f| f.tint_logit()[i],
                            &|f, v| f.params_mut().tint_logit[i] = v,
                            eps,
                        );
                        (analytic.tint_logit[i], fd)
                    }
                    4 => {
                        let i = rng.index(field.specular_sh().len());
                        let fd = fd_probe(
                            &mut field,
                            &objective,
                            &|f| f.specular_sh()[i],
                            &|f, v| f.params_mut().specular_sh[i] = v,
                            eps,
                        );
                        (analytic.specular_sh[i], fd)
                    }
                    _ => {
                        let i = rng.index(field.endmembers_raw().len());
                        let fd = fd_probe(
                            &mut field,
                            &objective,
                            &|f| f.endmembers_raw()[i],
                            &|f, v| f.params_mut().endmembers[i] = v,
                            eps,
                        );
                        (analytic.endmembers[i], fd)
                    }
                };
                let denom = analytic_g.abs().max(fd.abs());
                if (analytic_g - fd).abs() > 1e-7 {
                    let rel = (analytic_g - fd).abs() / denom;
                    worst = worst.max(rel);
                    assert!(
                        rel <= 1e-3,
                        "class grad mismatch: analytic {analytic_g} vs fd {fd} (rel {rel})"
                    );
                }
            }
        }
        // Keep some signal that the check exercised nontrivial gradients.
        assert!(worst < 1e-3);
    }

    #[test]
    fn softmax_activation_matches_spectral_module() {
        let mut rng = Rng::new(77);
        let field = VoxelField::random(
            &mut rng,
            [3, 3, 3],
            Aabb::unit_centered(),
            4,
            2,
            1.7,
            25.0,
            3.0,
        )
        .unwrap();
        let x = [0.3, -0.4, 0.2];
        let mut scratch = SampleScratch::new(4, 2);
        field.sample_into(x, [0.0, 0.0, 1.0], &mut scratch).unwrap();
        let reference = softmax_abundance(&scratch.raw_abundance, field.tau).unwrap();
        for (a, b) in scratch.abundance.iter().zip(reference.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn atomic_and_dense_sinks_agree() {
        let mut rng = Rng::new(41);
        let field = VoxelField::random(
            &mut rng,
            [3, 3, 3],
            Aabb::unit_centered(),
            2,
            3,
            1.0,
            25.0,
            2.0,
        )
        .unwrap();
        let atomic = AtomicGradBuffer::zeros_like(&field);
        let mut dense = GradBuffer::zeros_like(&field);
        let mut scratch = SampleScratch::new(2, 3);
        for _ in 0..32 {
            let x = [
                rng.range(-0.9, 0.9),
                rng.range(-0.9, 0.9),
                rng.range(-0.9, 0.9),
            ];
            field.sample_into(x, [0.0, 0.0, 1.0], &mut scratch).unwrap();
            let mut grad = PointSampleGrad::zeros(2, 3);
            for v in grad.radiance.iter_mut() {
                *v = rng.range(-1.0, 1.0);
            }
            grad.density = rng.range(-1.0, 1.0);
            field.sample_backward_into(&scratch, &grad, &mut dense);
            field.sample_backward_into(&scratch, &grad, &mut { &atomic });
        }
        let from_atomic = atomic.to_dense(&field);
        assert!(dense.max_abs_difference(&from_atomic) < 1e-9);
    }
}
