//! Classical 2D spectral unmixing.
//!
//! Vertex component analysis extracts endmember candidates from pixel data
//! for dictionary initialization, and a projected-gradient fully constrained
//! least squares solver inverts mixtures under the simplex constraints. The
//! FCLS path doubles as an independent oracle for the field's learned
//! abundances, so it shares no code with the rendering/training side.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::numeric;
use crate::rng::Rng;
use crate::spectral::{AbundanceVector, EndmemberDictionary, Spectrum};
use crate::{Error, Result};

/// N spectral pixels of B bands, pixel-major storage.
#[derive(Debug, Clone)]
pub struct PixelMatrix {
    data: Vec<f64>,
    bands: usize,
    pixels: usize,
}

impl PixelMatrix {
    pub fn from_pixels(pixels: &[Vec<f64>]) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::Invalid {
                context: "pixel matrix",
                detail: String::from("need at least one pixel"),
            });
        }
        let bands = pixels[0].len();
        let mut data = Vec::with_capacity(bands * pixels.len());
        for p in pixels {
            if p.len() != bands {
                return Err(Error::BandMismatch {
                    context: "pixel matrix",
                    expected: bands,
                    actual: p.len(),
                });
            }
            for &v in p {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::OutOfRange {
                        context: "pixel value",
                        value: v,
                        min: 0.0,
                        max: 1.0,
                    });
                }
                data.push(v);
            }
        }
        Ok(PixelMatrix {
            data,
            bands,
            pixels: pixels.len(),
        })
    }

    pub fn band_count(&self) -> usize {
        self.bands
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels
    }

    pub fn pixel(&self, n: usize) -> &[f64] {
        &self.data[n * self.bands..(n + 1) * self.bands]
    }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn simplex_project(v: &[f64]) -> AbundanceVector {
    assert!(!v.is_empty(), "simplex projection of an empty vector");
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    let weights: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    AbundanceVector::new(weights).expect("projection output is on the simplex")
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
fn power_iteration_max_eig(mat: &[f64], n: usize, iters: usize) -> f64 {
    let mut v = vec![0.0; n];
    for (i, x) in v.iter_mut().enumerate() {
        *x = if i % 2 == 0 { 1.0 } else { -0.5 };
    }
    let mut lambda = 0.0;
    for _ in 0..iters {
        let mut mv = vec![0.0; n];
        for i in 0..n {
            mv[i] = numeric::dot(&mat[i * n..(i + 1) * n], &v);
        }
        lambda = numeric::dot(&v, &mv);
        let nrm = numeric::norm(&mv);
        if nrm < 1e-300 {
            return 0.0;
        }
        for (x, m) in v.iter_mut().zip(&mv) {
            *x = m / nrm;
        }
    }
    lambda.abs()
}

/// Default FCLS step: 0.9 / ||E^T E||_2 estimated by 20 power iterations.
pub fn fcls_default_step(e: &EndmemberDictionary) -> f64 {
    let k = e.endmember_count();
    let mut ete = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            ete[i * k + j] = numeric::dot(e.column(i), e.column(j));
        }
    }
    let lmax = power_iteration_max_eig(&ete, k, 20);
    if lmax <= 0.0 {
        1.0
    } else {
        0.9 / lmax
    }
}

/// Projected-gradient fully constrained least squares: approximately
/// minimizes ||y - E a||^2 over the simplex, returning the best iterate.
/// The objective is nonincreasing when `step <= 1 / ||E^T E||_2`.
pub fn fcls_solve(
    e: &EndmemberDictionary,
    y: &Spectrum,
    iters: usize,
    step: f64,
) -> Result<AbundanceVector> {
    if y.bands() != e.band_count() {
        return Err(Error::BandMismatch {
            context: "fcls_solve",
            expected: e.band_count(),
            actual: y.bands(),
        });
    }
    if iters == 0 {
        return Err(Error::Invalid {
            context: "fcls_solve",
            detail: String::from("iters must be >= 1"),
        });
    }
    let k = e.endmember_count();
    let mut ete = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            ete[i * k + j] = numeric::dot(e.column(i), e.column(j));
        }
    }
    let ety: Vec<f64> = (0..k).map(|i| numeric::dot(e.column(i), y.values())).collect();

    let objective = |a: &[f64]| -> f64 {
        let mut obj = 0.0;
        for (b, &yv) in y.values().iter().enumerate() {
            let mut pred = 0.0;
            for (kk, &w) in a.iter().enumerate() {
                pred += e.column(kk)[b] * w;
            }
            let r = pred - yv;
            obj += r * r;
        }
        obj
    };

    let mut a = vec![1.0 / k as f64; k];
    let mut best = a.clone();
    let mut best_obj = objective(&a);
    for _ in 0..iters {
        // Gradient of 0.5 ||y - E a||^2.
        let mut grad = vec![0.0; k];
        for i in 0..k {
            grad[i] = numeric::dot(&ete[i * k..(i + 1) * k], &a) - ety[i];
        }
        for (av, g) in a.iter_mut().zip(&grad) {
            *av -= step * g;
        }
        a = simplex_project(&a).into_weights();
        let obj = objective(&a);
        if obj < best_obj {
            best_obj = obj;
            best = a.clone();
        }
    }
    AbundanceVector::new(best)
}

/// FCLS with the module defaults (500 iterations, power-iteration step).
pub fn fcls_solve_default(e: &EndmemberDictionary, y: &Spectrum) -> Result<AbundanceVector> {
    fcls_solve(e, y, 500, fcls_default_step(e))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues (descending) and matching eigenvectors as rows.
fn jacobi_eigen(mat: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut a = mat.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + numeric::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + numeric::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / numeric::sqrt(1.0 + t * t);
                let s = t * c;
                for i in 0..n {
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[p * n + j];
                    let aqj = a[q * n + j];
                    a[p * n + j] = c * apj - s * aqj;
                    a[q * n + j] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&i, &j| a[j * n + j].partial_cmp(&a[i * n + i]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
        .collect();
    (eigenvalues, eigenvectors)
}

/// Vertex component analysis over the affine (mean-removed) subspace.
///
/// Reduces to K dimensions via the top K-1 principal axes of the
/// mean-removed data plus a constant projective row, then repeatedly
/// projects the lifted pixels onto a random direction orthogonal to the
/// endmembers found so far and keeps the pixel of maximum absolute
/// projection. Deterministic for a fixed seed; selected columns are actual
/// input pixels.
pub fn vca_extract(y: &PixelMatrix, k: usize, seed: u64) -> Result<EndmemberDictionary> {
    vca_extract_with_indices(y, k, seed).map(|(e, _)| e)
}

pub fn vca_extract_with_indices(
    y: &PixelMatrix,
    k: usize,
    seed: u64,
) -> Result<(EndmemberDictionary, Vec<usize>)> {
    let b = y.band_count();
    let n = y.pixel_count();
    if k == 0 || k > b.min(n) {
        return Err(Error::Invalid {
            context: "vca_extract",
            detail: format!("K={k} must satisfy 1 <= K <= min(B={b}, N={n})"),
        });
    }

    // Mean-removed covariance and its spectrum.
    let mut mean = vec![0.0; b];
    for p in 0..n {
        for (m, &x) in mean.iter_mut().zip(y.pixel(p)) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; b * b];
    for p in 0..n {
        let px = y.pixel(p);
        for i in 0..b {
            let ci = px[i] - mean[i];
            for j in i..b {
                cov[i * b + j] += ci * (px[j] - mean[j]);
            }
        }
    }
    for i in 0..b {
        for j in i..b {
            cov[i * b + j] /= n as f64;
            cov[j * b + i] = cov[i * b + j];
        }
    }
    let (eigenvalues, eigenvectors) = jacobi_eigen(&cov, b);

    // The affine span of the pixel cloud has dimension (mean-removed rank),
    // so it supports at most rank+1 distinct vertices.
    let lmax = eigenvalues[0].max(0.0);
    let tol = (lmax * 1e-9).max(1e-14);
    let centered_rank = eigenvalues.iter().filter(|&&l| l > tol).count();
    let observed = centered_rank + 1;
    if observed < k {
        return Err(Error::RankDeficient {
            observed,
            required: k,
        });
    }

    let mut rng = Rng::from_parts(&[seed, crate::rng::Stream::Vca as u64]);

    if k == 1 {
        // Degenerate case: the pixel with maximum projection magnitude onto
        // the principal axis of the raw second moment.
        let mut raw = vec![0.0; b * b];
        for p in 0..n {
            let px = y.pixel(p);
            for i in 0..b {
                for j in i..b {
                    raw[i * b + j] += px[i] * px[j];
                }
            }
        }
        for i in 0..b {
            for j in i..b {
                raw[i * b + j] /= n as f64;
                raw[j * b + i] = raw[i * b + j];
            }
        }
        let (_, vecs) = jacobi_eigen(&raw, b);
        let axis = &vecs[0];
        let mut best = 0usize;
        let mut best_mag = -1.0;
        for p in 0..n {
            let mag = numeric::dot(axis, y.pixel(p)).abs();
            if mag > best_mag {
                best_mag = mag;
                best = p;
            }
        }
        let col: Vec<f64> = y.pixel(best).iter().map(|v| v.clamp(0.0, 1.0)).collect();
        return Ok((EndmemberDictionary::from_columns(&[col])?, vec![best]));
    }

    // Reduce to the K-dimensional signal space spanned by the top K-1
    // principal axes of the mean-removed data plus the mean direction
    // itself (orthonormalized last, so it carries whatever offset the
    // principal axes miss).
    let mut span: Vec<Vec<f64>> = eigenvectors[..k - 1].to_vec();
    span.push(mean.clone());
    let basis_k = orthonormalize(&span);
    if basis_k.len() < k {
        return Err(Error::RankDeficient {
            observed: basis_k.len(),
            required: k,
        });
    }

    // Projective scaling: dividing each reduced pixel by its inner product
    // with the mean coordinate collapses scaled copies of one signature to
    // a single point, so illumination variation cannot masquerade as an
    // extra vertex.
    let mut x = vec![0.0; k * n];
    for p in 0..n {
        let px = y.pixel(p);
        for (d, axis) in basis_k.iter().enumerate() {
            x[p * k + d] = numeric::dot(axis, px);
        }
    }
    let mut u = vec![0.0; k];
    for p in 0..n {
        for d in 0..k {
            u[d] += x[p * k + d];
        }
    }
    let un = numeric::norm(&u);
    if un == 0.0 {
        return Err(Error::RankDeficient {
            observed: 0,
            required: k,
        });
    }
    for v in u.iter_mut() {
        *v /= un;
    }
    let mut z = vec![0.0; k * n];
    for p in 0..n {
        let dot = numeric::dot(&x[p * k..(p + 1) * k], &u);
        // Pixels nearly orthogonal to the mean direction carry no stable
        // projective coordinate; park them at the origin where no linear
        // functional can select them.
        if dot.abs() > 1e-9 {
            for d in 0..k {
                z[p * k + d] = x[p * k + d] / dot;
            }
        }
    }

    // Iterative extreme-pixel search over the projective coordinates.
    let mut indices: Vec<usize> = Vec::with_capacity(k);
    let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(k);
    for i in 0..k {
        let basis = if i == 0 {
            // All projective points share z . u = 1; the first direction is
            // taken orthogonal to u so it discriminates within that plane.
            orthonormalize(&[u.clone()])
        } else {
            orthonormalize(&chosen)
        };
        let mut f = vec![0.0; k];
        let mut found = false;
        for _attempt in 0..64 {
            for x in f.iter_mut() {
                *x = rng.normal();
            }
            for q in &basis {
                let d = numeric::dot(&f, q);
                for (fx, qx) in f.iter_mut().zip(q) {
                    *fx -= d * qx;
                }
            }
            let nrm = numeric::norm(&f);
            if nrm > 1e-9 {
                for x in f.iter_mut() {
                    *x /= nrm;
                }
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::RankDeficient {
                observed: i + 1,
                required: k,
            });
        }
        let mut best = 0usize;
        let mut best_mag = -1.0;
        for p in 0..n {
            let mag = numeric::dot(&f, &z[p * k..(p + 1) * k]).abs();
            if mag > best_mag {
                best_mag = mag;
                best = p;
            }
        }
        indices.push(best);
        chosen.push(z[best * k..(best + 1) * k].to_vec());
    }

    let cols: Vec<Vec<f64>> = indices
        .iter()
        .map(|&p| y.pixel(p).iter().map(|v| v.clamp(0.0, 1.0)).collect())
        .collect();
    Ok((EndmemberDictionary::from_columns(&cols)?, indices))
}

/// Modified Gram-Schmidt, dropping near-null vectors.
fn orthonormalize(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let d = numeric::dot(&w, q);
                for (wx, qx) in w.iter_mut().zip(q) {
                    *wx -= d * qx;
                }
            }
        }
        let nrm = numeric::norm(&w);
        if nrm > 1e-12 {
            for x in w.iter_mut() {
                *x /= nrm;
            }
            basis.push(w);
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assign;
    use crate::numeric::vector_angle;

    /// Brute-force simplex projection by support enumeration: try every
    /// nonempty support, project onto its affine slice, keep the feasible
    /// candidate closest to v.
    fn simplex_project_enumerate(v: &[f64]) -> Vec<f64> {
        let k = v.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 1u32..(1 << k) {
            let support: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            let s: f64 = support.iter().map(|&i| v[i]).sum();
            let shift = (s - 1.0) / support.len() as f64;
            let mut cand = vec![0.0; k];
            let mut feasible = true;
            for &i in &support {
                cand[i] = v[i] - shift;
                if cand[i] < 0.0 {
                    feasible = false;
                    break;
                }
            }
            if !feasible {
                continue;
            }
            let dist: f64 = v
                .iter()
                .zip(&cand)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if best.as_ref().map_or(true, |(d, _)| dist < *d) {
                best = Some((dist, cand));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn projection_leaves_simplex_points_unchanged() {
        let v = [0.2, 0.5, 0.3];
        let p = simplex_project(&v);
        for (a, b) in p.weights().iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_snaps_to_vertex() {
        let p = simplex_project(&[2.0, 0.0]);
        assert!((p.weights()[0] - 1.0).abs() < 1e-12);
        assert!(p.weights()[1].abs() < 1e-12);
    }

    #[test]
    fn projection_matches_support_enumeration_oracle() {
        let mut rng = Rng::new(31);
        for _ in 0..1000 {
            let k = 2 + rng.index(4); // K in 2..=5
            let v: Vec<f64> = (0..k).map(|_| rng.range(-2.0, 2.0)).collect();
            let got = simplex_project(&v);
            let want = simplex_project_enumerate(&v);
            for (g, w) in got.weights().iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "v={v:?} got={got:?} want={want:?}");
            }
        }
    }

    #[test]
    fn projection_is_idempotent_and_feasible() {
        let mut rng = Rng::new(5);
        for _ in 0..200 {
            let k = 1 + rng.index(6);
            let v: Vec<f64> = (0..k).map(|_| rng.range(-3.0, 3.0)).collect();
            let p = simplex_project(&v);
            let sum: f64 = p.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(p.weights().iter().all(|&w| w >= 0.0));
            let pp = simplex_project(p.weights());
            for (a, b) in pp.weights().iter().zip(p.weights()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    fn random_dictionary(rng: &mut Rng, b: usize, k: usize) -> EndmemberDictionary {
        loop {
            let cols: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..b).map(|_| rng.range(0.05, 1.0)).collect())
                .collect();
            let dict = EndmemberDictionary::from_columns(&cols).unwrap();
            // Keep columns well separated so inversion is well posed.
            let mut ok = true;
            for i in 0..k {
                for j in (i + 1)..k {
                    if vector_angle(dict.column(i), dict.column(j)) < 0.3 {
                        ok = false;
                    }
                }
            }
            if ok {
                return dict;
            }
        }
    }

    #[test]
    fn fcls_recovers_pure_pixel() {
        let mut rng = Rng::new(8);
        let e = random_dictionary(&mut rng, 6, 3);
        for k in 0..3 {
            let y = Spectrum::new(e.column(k).to_vec()).unwrap();
            let a = fcls_solve_default(&e, &y).unwrap();
            for (i, &w) in a.weights().iter().enumerate() {
                let target = if i == k { 1.0 } else { 0.0 };
                assert!((w - target).abs() < 1e-4, "k={k} a={a:?}");
            }
            // Residual of the recovered abundance is tiny.
            let recon = crate::spectral::lmm_mix(&e, &a).unwrap();
            let res: f64 = recon
                .values()
                .iter()
                .zip(y.values())
                .map(|(p, g)| (p - g) * (p - g))
                .sum::<f64>();
            assert!(numeric::sqrt(res) < 1e-6);
        }
    }

    #[test]
    fn fcls_inverts_half_mix() {
        let mut rng = Rng::new(21);
        let e = random_dictionary(&mut rng, 5, 2);
        let mix: Vec<f64> = e
            .column(0)
            .iter()
            .zip(e.column(1))
            .map(|(a, b)| 0.5 * a + 0.5 * b)
            .collect();
        let a = fcls_solve_default(&e, &Spectrum::new(mix).unwrap()).unwrap();
        assert!((a.weights()[0] - 0.5).abs() < 1e-4);
        assert!((a.weights()[1] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn fcls_single_endmember_is_trivial() {
        let e = EndmemberDictionary::from_columns(&[vec![0.4, 0.6, 0.1]]).unwrap();
        let y = Spectrum::new(vec![0.9, 0.2, 0.3]).unwrap();
        let a = fcls_solve_default(&e, &y).unwrap();
        assert_eq!(a.weights(), &[1.0]);
    }

    #[test]
    fn fcls_never_beats_uniform_baseline_backwards() {
        // The solver starts at uniform and keeps its best iterate, so its
        // residual can only improve on the uniform guess.
        let mut rng = Rng::new(55);
        for _ in 0..25 {
            let e = random_dictionary(&mut rng, 6, 3);
            let y = Spectrum::new((0..6).map(|_| rng.next_f64()).collect()).unwrap();
            let a = fcls_solve_default(&e, &y).unwrap();
            let resid = |w: &[f64]| -> f64 {
                (0..6)
                    .map(|b| {
                        let pred: f64 =
                            (0..3).map(|k| e.column(k)[b] * w[k]).sum();
                        let r = pred - y.values()[b];
                        r * r
                    })
                    .sum()
            };
            assert!(resid(a.weights()) <= resid(&[1.0 / 3.0; 3]) + 1e-12);
        }
    }

    /// Simplex-vertex dataset: K pure pixels plus random interior mixtures.
    fn pure_pixel_data(rng: &mut Rng, b: usize, k: usize, mixtures: usize) -> (PixelMatrix, EndmemberDictionary) {
        let e = random_dictionary(rng, b, k);
        let mut pixels: Vec<Vec<f64>> = (0..k).map(|i| e.column(i).to_vec()).collect();
        for _ in 0..mixtures {
            let raw: Vec<f64> = (0..k).map(|_| rng.next_f64() + 0.01).collect();
            let s: f64 = raw.iter().sum();
            let a: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let mix: Vec<f64> = (0..b)
                .map(|band| (0..k).map(|kk| e.column(kk)[band] * a[kk]).sum())
                .collect();
            pixels.push(mix);
        }
        (PixelMatrix::from_pixels(&pixels).unwrap(), e)
    }

    fn max_matched_angle(a: &EndmemberDictionary, b: &EndmemberDictionary) -> f64 {
        a.max_angle_after_matching(b).unwrap()
    }

    #[test]
    fn vca_recovers_simplex_vertices() {
        let mut rng = Rng::new(101);
        for k in 2..=4 {
            let (pixels, truth) = pure_pixel_data(&mut rng, 6, k, 120);
            let got = vca_extract(&pixels, k, 2024).unwrap();
            let angle = max_matched_angle(&got, &truth);
            assert!(angle <= 1e-6, "k={k} angle={angle}");
        }
    }

    #[test]
    fn vca_single_endmember_picks_a_pure_pixel() {
        let mut rng = Rng::new(9);
        // One material at varying brightness: the pure (brightest) pixel is
        // the extreme along the principal axis.
        let e: Vec<f64> = (0..5).map(|_| rng.range(0.4, 1.0)).collect();
        let mut pixels = vec![e.clone()];
        for _ in 0..50 {
            let s = rng.range(0.1, 0.95);
            pixels.push(e.iter().map(|v| v * s).collect());
        }
        let pm = PixelMatrix::from_pixels(&pixels).unwrap();
        let (dict, idx) = vca_extract_with_indices(&pm, 1, 3).unwrap();
        assert_eq!(idx, vec![0]);
        for (a, b) in dict.column(0).iter().zip(&e) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn vca_seeds_agree_up_to_permutation() {
        let mut rng = Rng::new(303);
        let (pixels, _) = pure_pixel_data(&mut rng, 7, 3, 200);
        let (a, ia) = vca_extract_with_indices(&pixels, 3, 1).unwrap();
        let (b, ib) = vca_extract_with_indices(&pixels, 3, 99).unwrap();
        let angle = max_matched_angle(&a, &b);
        // Identical matched columns still carry ~1e-8 of acos noise.
        assert!(angle <= 1e-7, "indices {ia:?} vs {ib:?}, angle {angle}");
    }

    #[test]
    fn vca_is_deterministic_for_fixed_seed() {
        let mut rng = Rng::new(404);
        let (pixels, _) = pure_pixel_data(&mut rng, 5, 3, 60);
        let (a, ia) = vca_extract_with_indices(&pixels, 3, 7).unwrap();
        let (b, ib) = vca_extract_with_indices(&pixels, 3, 7).unwrap();
        assert_eq!(ia, ib);
        assert_eq!(a.column_major(), b.column_major());
    }

    #[test]
    fn vca_returns_actual_pixels() {
        let mut rng = Rng::new(11);
        let (pixels, _) = pure_pixel_data(&mut rng, 6, 3, 40);
        let (dict, indices) = vca_extract_with_indices(&pixels, 3, 5).unwrap();
        for (k, &p) in indices.iter().enumerate() {
            for (a, b) in dict.column(k).iter().zip(pixels.pixel(p)) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn vca_rejects_oversized_k() {
        let pm = PixelMatrix::from_pixels(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        assert!(vca_extract(&pm, 3, 0).is_err());
    }

    #[test]
    fn vca_reports_rank_deficiency() {
        // Three requested materials but pixels span only a 1D affine set
        // (two distinct values): observed rank 2 < required 3.
        let mut pixels = Vec::new();
        for i in 0..30 {
            let t = (i % 2) as f64 * 0.5;
            pixels.push(vec![0.1 + t, 0.2 + t, 0.3 + t, 0.1 + t]);
        }
        let pm = PixelMatrix::from_pixels(&pixels).unwrap();
        match vca_extract(&pm, 3, 0) {
            Err(Error::RankDeficient { observed, required }) => {
                assert_eq!(required, 3);
                assert_eq!(observed, 2);
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn matched_angle_uses_hungarian_assignment() {
        // Permuted dictionaries match exactly regardless of column order.
        let a = EndmemberDictionary::from_columns(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let b = EndmemberDictionary::from_columns(&[
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert!(max_matched_angle(&a, &b) < 1e-12);
        // Sanity: the assignment solver really pairs distinct columns.
        let cost = [0.0, 1.0, 1.0, 0.0];
        let asg = assign::solve(&cost, 2, 2);
        assert_eq!(asg.pairs().count(), 2);
    }
}
