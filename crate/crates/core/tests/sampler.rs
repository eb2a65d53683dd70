use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinsqueeze::field::{GridDescriptor, Spectral};
use spinsqueeze::model::{BoxShape, LatticeSetup};
use spinsqueeze::sampler::{
    integrated_autocorrelation, rotation_acceptance, sample_thermal_field, sample_vacuum_field, tune_proposals,
    SamplerConfig, ThermalChain,
};

fn ideal_gas(n_max: usize) -> LatticeSetup {
    let mut setup = LatticeSetup::new(1.32e-2, 0.5, n_max, BoxShape::Cubic).unwrap();
    setup.params.coupling = 0.0;
    setup
}

/// Mean over nonzero modes of E_k|a_k|²/k_BT for each of `count` samples.
fn equipartition_ratios(config: SamplerConfig, count: usize) -> Vec<f64> {
    let setup = ideal_gas(4);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let burn_in = config.burn_in_sweeps;
    let mut chain = ThermalChain::new(&setup.grid, &setup.params, config, &mut rng).unwrap();
    chain.run(burn_in, &mut rng).unwrap();
    let modes = setup.grid.modes();
    (0..count)
        .map(|_| {
            chain.next_sample(&mut rng).unwrap();
            let sum: f64 = chain
                .amplitudes()
                .iter()
                .zip(modes)
                .skip(1)
                .map(|(a, m)| m.kinetic * a.norm_sqr())
                .sum();
            sum / (setup.params.kbt * (modes.len() - 1) as f64)
        })
        .collect()
}

fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn ideal_gas_equipartition_with_pair_refresh() {
    let config = SamplerConfig {
        burn_in_sweeps: 50,
        decorrelation_sweeps: 2,
        warm_start: false,
        seed: 11,
        ..SamplerConfig::default()
    };
    let (mean, err) = mean_and_error(&equipartition_ratios(config, 1000));
    assert!((mean - 1.0).abs() < 3.0 * err, "{mean} ± {err}");
}

#[test]
fn ideal_gas_equipartition_with_rotations_only() {
    let config = SamplerConfig {
        burn_in_sweeps: 400,
        decorrelation_sweeps: 10,
        pair_refresh: false,
        warm_start: false,
        rotations_per_sweep: Some(200),
        seed: 12,
        ..SamplerConfig::default()
    };
    let ratios = equipartition_ratios(config, 1000);
    let tau = integrated_autocorrelation(&ratios).max(1.0);
    let (mean, err) = mean_and_error(&ratios);
    let err = err * tau.sqrt();
    assert!((mean - 1.0).abs() < 3.0 * err, "{mean} ± {err} (τ = {tau})");
}

#[test]
fn vacuum_amplitudes_have_half_occupation() {
    let setup = ideal_gas(6);
    let descriptor = GridDescriptor::of(&setup.grid);
    let mut spectral = Spectral::new(descriptor);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut occupations = Vec::new();
    let mut real_parts = Vec::new();
    for _ in 0..20 {
        let amps = spectral.amplitudes(&sample_vacuum_field(&setup.grid, &mut rng));
        occupations.extend(amps.iter().map(|z| z.norm_sqr()));
        real_parts.extend(amps.iter().map(|z| z.re));
    }
    let (mean, err) = mean_and_error(&occupations);
    assert!((mean - 0.5).abs() < 3.0 * err, "{mean} ± {err}");

    // Kolmogorov–Smirnov against N(0, 1/4).
    real_parts.sort_by(f64::total_cmp);
    let n = real_parts.len() as f64;
    let cdf = |x: f64| 0.5 * (1.0 + erf(x / (0.5 * std::f64::consts::SQRT_2)));
    let d = real_parts
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value.
    assert!(d < 1.63 / n.sqrt(), "KS distance {d}");
}

/// Abramowitz–Stegun 7.1.26, absolute error below 1.5e-7.
fn erf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.327_591_1 * x.abs());
    let poly =
        t * (0.254_829_592 + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    let y = 1.0 - poly * (-x * x).exp();
    y.copysign(x)
}

#[test]
fn chain_conserves_atom_number() {
    let setup = LatticeSetup::new(1.32e-2, 0.5, 6, BoxShape::Cubic).unwrap();
    let config = SamplerConfig {
        burn_in_sweeps: 5,
        rotations_per_sweep: Some(50),
        ..SamplerConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sample = sample_thermal_field(&setup.grid, &setup.params, &config, &mut rng).unwrap();
    let norm = spinsqueeze::field::norm(&sample.field, setup.grid.cell_volume);
    let n = setup.params.n_atoms as f64;
    assert!((norm / n - 1.0).abs() < 1e-12);
    assert_eq!(sample.diagnostics.energy_trace.len(), 5);
}

#[test]
fn same_seed_same_field() {
    let setup = LatticeSetup::new(1.32e-2, 0.5, 4, BoxShape::Cubic).unwrap();
    let config = SamplerConfig {
        burn_in_sweeps: 3,
        ..SamplerConfig::default()
    };
    let draw = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        sample_thermal_field(&setup.grid, &setup.params, &config, &mut rng)
            .unwrap()
            .field
    };
    assert_eq!(draw(), draw());
}

#[test]
fn interacting_depletion_matches_lattice_bogoliubov() {
    use spinsqueeze::bogoliubov::{Analytics, Statistics};
    use spinsqueeze::modes::ModeSet;
    let setup = LatticeSetup::new(1.32e-2, 0.5, 6, BoxShape::Cubic).unwrap();
    let config = SamplerConfig {
        burn_in_sweeps: 30,
        decorrelation_sweeps: 3,
        rotations_per_sweep: Some(50),
        seed: 3,
        ..SamplerConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut chain = ThermalChain::new(&setup.grid, &setup.params, config, &mut rng).unwrap();
    chain.run(30, &mut rng).unwrap();
    let fractions: Vec<f64> = (0..400)
        .map(|_| {
            chain.next_sample(&mut rng).unwrap();
            1.0 - chain.condensate_fraction()
        })
        .collect();
    let (mean, err) = mean_and_error(&fractions);
    let err = err * integrated_autocorrelation(&fractions).max(1.0).sqrt();
    let analytic = Analytics::new(0.5, Statistics::Classical, ModeSet::lattice(&setup.grid, &setup.params))
        .noncondensed_fraction()
        .unwrap();
    // Beyond-Bogoliubov corrections are of relative order ε_Bog.
    let tolerance = 3.0 * err + 0.05 * analytic;
    assert!((mean - analytic).abs() < tolerance, "{mean} ± {err} vs {analytic}");
}

#[test]
fn acceptance_falls_with_step_size() {
    let setup = LatticeSetup::new(1.32e-2, 0.5, 4, BoxShape::Cubic).unwrap();
    let rate = |step: f64| {
        let config = SamplerConfig {
            rotation_step: step,
            pair_refresh: false,
            ..SamplerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        rotation_acceptance(&setup.grid, &setup.params, &config, 20, &mut rng).unwrap()
    };
    let tiny = rate(1e-4);
    let huge = rate(1e3);
    assert!(tiny > 0.99, "{tiny}");
    assert!(huge < 0.05, "{huge}");
}

#[test]
fn tuning_lands_in_window() {
    let setup = LatticeSetup::new(1.32e-2, 0.5, 4, BoxShape::Cubic).unwrap();
    let config = SamplerConfig {
        rotation_step: 1e-3,
        pair_refresh: false,
        ..SamplerConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (tuned, report) = tune_proposals(&setup.grid, &setup.params, &config, &mut rng).unwrap();
    assert!(report.within_window, "{report:?}");
    assert!(tuned.rotation_step > config.rotation_step);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad_window = SamplerConfig {
        acceptance_window: (0.6, 0.2),
        ..SamplerConfig::default()
    };
    assert!(bad_window.validate().is_err());
    let bad_step = SamplerConfig {
        rotation_step: 0.0,
        ..SamplerConfig::default()
    };
    assert!(bad_step.validate().is_err());
}
