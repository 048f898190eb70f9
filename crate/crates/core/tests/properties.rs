//! Property tests for the spectral core invariants.

use proptest::prelude::*;
use specfield_core::spectral::{
    dichromatic_combine, elmm_mix, lmm_mix, softmax_abundance, spectrum_to_rgb, AbundanceVector,
    CameraResponse, EndmemberDictionary, ScalingVector, Spectrum,
};
use specfield_core::unmix::simplex_project;

fn simplex_strategy(k: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(1e-3..1.0f64, k).prop_map(|raw| {
        let sum: f64 = raw.iter().sum();
        raw.iter().map(|v| v / sum).collect()
    })
}

fn dict_strategy(b: usize, k: usize) -> impl Strategy<Value = EndmemberDictionary> {
    proptest::collection::vec(proptest::collection::vec(0.0..=1.0f64, b), k)
        .prop_map(|cols| EndmemberDictionary::from_columns(&cols).unwrap())
}

proptest! {
    #[test]
    fn softmax_lands_on_the_simplex(
        logits in proptest::collection::vec(-600.0..600.0f64, 1..8),
        tau in 1e-3..100.0f64,
    ) {
        let a = softmax_abundance(&logits, tau).unwrap();
        let sum: f64 = a.weights().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-6);
        prop_assert!(a.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn unit_scaling_reduces_elmm_to_lmm(
        dict in dict_strategy(5, 3),
        a in simplex_strategy(3),
    ) {
        let a = AbundanceVector::new(a).unwrap();
        let s = ScalingVector::ones(3);
        let lhs = elmm_mix(&dict, &s, &a).unwrap();
        let rhs = lmm_mix(&dict, &a).unwrap();
        for (l, r) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((l - r).abs() <= 1e-12);
        }
    }

    #[test]
    fn mixtures_stay_in_unit_range(
        dict in dict_strategy(4, 3),
        a in simplex_strategy(3),
        s in proptest::collection::vec(0.0..=1.0f64, 3),
    ) {
        let a = AbundanceVector::new(a).unwrap();
        let lmm = lmm_mix(&dict, &a).unwrap();
        for &v in lmm.values() {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        }
        let s = ScalingVector::new(s).unwrap();
        let elmm = elmm_mix(&dict, &s, &a).unwrap();
        for (&v, &l) in elmm.values().iter().zip(lmm.values()) {
            prop_assert!(v >= -1e-12 && v <= l + 1e-12);
        }
    }

    #[test]
    fn projection_to_rgb_is_linear(
        x in proptest::collection::vec(0.0..1.0f64, 6),
        y in proptest::collection::vec(0.0..1.0f64, 6),
        alpha in -2.0..2.0f64,
        beta in -2.0..2.0f64,
    ) {
        let m = CameraResponse::default_for_bands(6).unwrap();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        let fx = spectrum_to_rgb(&Spectrum::new(x).unwrap(), &m).unwrap();
        let fy = spectrum_to_rgb(&Spectrum::new(y).unwrap(), &m).unwrap();
        let fc = spectrum_to_rgb(&Spectrum::new(combo).unwrap(), &m).unwrap();
        for c in 0..3 {
            prop_assert!((fc[c] - (alpha * fx[c] + beta * fy[c])).abs() <= 1e-9);
        }
    }

    #[test]
    fn dichromatic_is_monotone_in_tint(
        cd in proptest::collection::vec(0.0..1.0f64, 4),
        cs in proptest::collection::vec(0.0..1.0f64, 4),
        h1 in 0.0..=1.0f64,
        h2 in 0.0..=1.0f64,
    ) {
        let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
        let cd = Spectrum::new(cd).unwrap();
        let cs = Spectrum::new(cs).unwrap();
        let a = dichromatic_combine(&cd, &cs, lo).unwrap();
        let b = dichromatic_combine(&cd, &cs, hi).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!(*y >= x - 1e-12);
        }
    }

    #[test]
    fn simplex_projection_is_idempotent_and_feasible(
        v in proptest::collection::vec(-5.0..5.0f64, 1..7),
    ) {
        let p = simplex_project(&v);
        let sum: f64 = p.weights().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        prop_assert!(p.weights().iter().all(|&w| w >= 0.0));
        let pp = simplex_project(p.weights());
        for (a, b) in pp.weights().iter().zip(p.weights()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}
