use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use spinsqueeze::observables::{
    batch_means, jackknife, spin_moments, squeezing_estimates, summarize_curve, transverse_min_variance,
    ObservablesError, SpinSample,
};

#[test]
fn jackknife_of_a_mean_is_the_standard_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let normal = Normal::new(3.0, 2.0).unwrap();
    let rows: Vec<[f64; 1]> = (0..500).map(|_| [normal.sample(&mut rng)]).collect();
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r[0]).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let est = jackknife(&rows, |m| m[0]).unwrap();
    assert!((est.value - mean).abs() < 1e-12);
    assert!((est.error - (var / n).sqrt()).abs() < 1e-12);
    let batches = batch_means(&rows, |m| m[0], 10).unwrap();
    assert!((batches.error / est.error - 1.0).abs() < 0.6);
}

#[test]
fn single_row_is_not_an_ensemble() {
    let rows = [[1.0]];
    assert!(matches!(
        jackknife(&rows, |m| m[0]),
        Err(ObservablesError::TooFewRealizations(1))
    ));
}

#[test]
fn coherent_spin_state_is_not_squeezed() {
    let n_atoms: f64 = 1.0e4;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let transverse = Normal::new(0.0, (n_atoms / 4.0).sqrt()).unwrap();
    let samples: Vec<SpinSample> = (0..4000)
        .map(|_| SpinSample {
            sx: n_atoms / 2.0,
            sy: transverse.sample(&mut rng),
            sz: transverse.sample(&mut rng),
            s0x: n_atoms / 2.0,
            s0y: transverse.sample(&mut rng),
            s0z: transverse.sample(&mut rng),
            n0: n_atoms,
        })
        .collect();
    let (xi2, xi0) = squeezing_estimates(&samples, n_atoms).unwrap();
    // The minimum over directions of a sample variance sits slightly below 1.
    assert!((xi2.value - 1.0).abs() < 4.0 * xi2.error, "{xi2:?}");
    assert!((xi0.value - 1.0).abs() < 4.0 * xi0.error, "{xi0:?}");
    let moments = spin_moments(&samples).unwrap();
    assert!(moments.symmetry_sigma < 5.0);
}

#[test]
fn summary_of_sampled_parabola() {
    let times: Vec<f64> = (0..40).map(|i| 0.3 * i as f64).collect();
    let values: Vec<f64> = times.iter().map(|t| 0.01 + 0.002 * (t - 5.05).powi(2)).collect();
    let s = summarize_curve(&times, &values, &[0.2, 0.5]).unwrap();
    assert!(!s.boundary);
    assert!((s.t_min - 5.05).abs() < 1e-9);
    assert!((s.xi2_min - 0.01).abs() < 1e-12);
    // ξ² = 1.2 ξ²_min at t = 5.05 − 1; linear interpolation of the parabola
    // between samples lands within the chord error.
    let (eta, t_eta) = s.t_eta[0];
    assert_eq!(eta, 0.2);
    assert!((t_eta.unwrap() - 4.05).abs() < 0.02);
    assert!(s.t_eta[1].1.unwrap() < t_eta.unwrap());
    let t_therm = s.t_therm.unwrap();
    assert!((t_therm - (5.05 + 5f64.sqrt())).abs() < 0.02, "{t_therm}");
}

#[test]
fn monotone_curve_has_boundary_minimum() {
    let times: Vec<f64> = (0..10).map(f64::from).collect();
    let values: Vec<f64> = times.iter().map(|t| 1.0 / (1.0 + t)).collect();
    let s = summarize_curve(&times, &values, &[0.2]).unwrap();
    assert!(s.boundary);
    assert_eq!(s.t_therm, None);
    assert!(matches!(
        summarize_curve(&times[..2], &values[..2], &[]),
        Err(ObservablesError::ShortCurve(2))
    ));
    assert!(summarize_curve(&times, &values[..5], &[]).is_err());
}

proptest! {
    #[test]
    fn min_variance_matches_rotation_scan(vy in 0.01f64..10.0, vz in 0.01f64..10.0, rho in -0.99f64..0.99) {
        let anti = 2.0 * rho * (vy * vz).sqrt();
        let closed = transverse_min_variance(vy, vz, anti);
        let scan = (0..20_000)
            .map(|i| {
                let phi = std::f64::consts::PI * i as f64 / 20_000.0;
                let (s, c) = phi.sin_cos();
                c * c * vy + s * s * vz + s * c * anti
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert!(closed <= scan + 1e-12);
        prop_assert!(scan - closed < 1e-6 * (vy + vz));
    }

    #[test]
    fn squeezing_is_invariant_under_transverse_rotation(seed in 0u64..500, phi in 0.0..std::f64::consts::TAU) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let samples: Vec<SpinSample> = (0..64)
            .map(|_| {
                let (y, z): (f64, f64) = (normal.sample(&mut rng), 3.0 * normal.sample(&mut rng));
                SpinSample { sx: 100.0, sy: y + 0.5 * z, sz: z, s0x: 50.0, s0y: y, s0z: z, n0: 100.0 }
            })
            .collect();
        let (s, c) = phi.sin_cos();
        let rotated: Vec<SpinSample> = samples
            .iter()
            .map(|p| SpinSample { sy: c * p.sy - s * p.sz, sz: s * p.sy + c * p.sz, ..*p })
            .collect();
        let (a, _) = squeezing_estimates(&samples, 400.0).unwrap();
        let (b, _) = squeezing_estimates(&rotated, 400.0).unwrap();
        prop_assert!((a.value - b.value).abs() < 1e-9 * a.value);
    }
}
