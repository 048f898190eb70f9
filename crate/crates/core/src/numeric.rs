//! Scalar math helpers routed through `libm`.
//!
//! Every transcendental in the crate goes through these wrappers rather than
//! the `std` float methods, so no_std builds work and results are bitwise
//! identical between test (std) and production (no_std) builds.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn log10(x: f64) -> f64 {
    libm::log10(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn acos(x: f64) -> f64 {
    libm::acos(x)
}

/// Numerically stable logistic function, exact at 0 and saturating cleanly.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// Stable softplus: ln(1 + e^x) = max(x, 0) + ln(1 + e^-|x|).
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + ln_1p(exp(-x))
    } else {
        ln_1p(exp(x))
    }
}

/// Inverse of `sigmoid` for p in (0, 1).
#[inline]
pub fn logit(p: f64) -> f64 {
    ln(p / (1.0 - p))
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// Angle in radians between two nonzero vectors, clamped against rounding.
pub fn vector_angle(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return core::f64::consts::FRAC_PI_2;
    }
    acos((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_identities() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(50.0) >= 1.0 - 1e-9);
        assert!(sigmoid(-50.0) <= 1e-9);
        for &x in &[-3.0, -0.7, 0.0, 1.3, 9.0] {
            assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-15);
        }
    }

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for &x in &[-20.0f64, -1.0, 0.0, 0.5, 10.0] {
            let naive = (1.0f64 + x.exp()).ln();
            assert!((softplus(x) - naive).abs() < 1e-12, "x={x}");
        }
        // No overflow where the naive form would blow up.
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn logit_inverts_sigmoid() {
        for &p in &[0.01, 0.3, 0.5, 0.99] {
            assert!((sigmoid(logit(p)) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn angle_orthogonal_is_half_pi() {
        let a = [1.0, 0.0];
        let b = [0.0, 2.0];
        assert!((vector_angle(&a, &b) - core::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(vector_angle(&a, &a) < 1e-9);
    }
}
