//! Real spherical harmonics basis up to degree 2 (9 functions).
//!
//! Ordering: Y_0^0, Y_1^{-1}, Y_1^0, Y_1^1, Y_2^{-2}, Y_2^{-1}, Y_2^0,
//! Y_2^1, Y_2^2 — the convention shared by common radiance-field codebases.

pub const SH_DEGREE: usize = 2;
pub const SH_COEFFS: usize = (SH_DEGREE + 1) * (SH_DEGREE + 1);

const C0: f64 = 0.282_094_791_773_878_14;
const C1: f64 = 0.488_602_511_902_919_9;
const C2_0: f64 = 1.092_548_430_592_079_2;
const C2_1: f64 = 0.315_391_565_252_520_05;
const C2_2: f64 = 0.546_274_215_296_039_6;

/// Evaluates the degree-2 basis at a unit direction.
#[inline]
pub fn sh_basis(dir: [f64; 3]) -> [f64; SH_COEFFS] {
    let [x, y, z] = dir;
    [
        C0,
        C1 * y,
        C1 * z,
        C1 * x,
        C2_0 * x * y,
        C2_0 * y * z,
        C2_1 * (3.0 * z * z - 1.0),
        C2_0 * x * z,
        C2_2 * (x * x - y * y),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::sqrt;
    use crate::rng::Rng;

    #[test]
    fn dc_term_is_direction_independent() {
        let a = sh_basis([1.0, 0.0, 0.0]);
        let b = sh_basis([0.0, 0.0, 1.0]);
        assert_eq!(a[0], b[0]);
        assert!((a[0] - 0.282_094_791_773_878_14).abs() < 1e-15);
    }

    #[test]
    fn axis_values_match_constants() {
        let bx = sh_basis([1.0, 0.0, 0.0]);
        assert!((bx[3] - C1).abs() < 1e-15);
        assert!(bx[1].abs() < 1e-15 && bx[2].abs() < 1e-15);
        assert!((bx[6] + C2_1).abs() < 1e-15);
        assert!((bx[8] - C2_2).abs() < 1e-15);

        let bz = sh_basis([0.0, 0.0, 1.0]);
        assert!((bz[2] - C1).abs() < 1e-15);
        assert!((bz[6] - 2.0 * C2_1).abs() < 1e-15);
    }

    #[test]
    fn basis_is_orthonormal_under_monte_carlo() {
        // Uniform sphere sampling; inner products should approach
        // delta_ij / (4 pi) * 4 pi = delta_ij.
        let mut rng = Rng::new(17);
        let n = 200_000;
        let mut gram = [[0.0f64; SH_COEFFS]; SH_COEFFS];
        for _ in 0..n {
            let z = rng.range(-1.0, 1.0);
            let phi = rng.range(0.0, 2.0 * core::f64::consts::PI);
            let r = sqrt((1.0 - z * z).max(0.0));
            let d = [r * crate::numeric::cos(phi), r * crate::numeric::sin(phi), z];
            let b = sh_basis(d);
            for i in 0..SH_COEFFS {
                for j in 0..SH_COEFFS {
                    gram[i][j] += b[i] * b[j];
                }
            }
        }
        let scale = 4.0 * core::f64::consts::PI / n as f64;
        for i in 0..SH_COEFFS {
            for j in 0..SH_COEFFS {
                let v = gram[i][j] * scale;
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 0.02, "gram[{i}][{j}] = {v}");
            }
        }
    }
}
