use std::collections::HashSet;

use proptest::prelude::*;
use spinsqueeze::experiment::{run_experiment, seed_schedule, ExperimentConfig, ExperimentKind};

fn tiny_run(workers: usize) -> ExperimentConfig {
    let mut config = ExperimentConfig {
        kind: ExperimentKind::Run,
        n_max: vec![4],
        realizations: 6,
        horizon: 2.0,
        spacing: 0.5,
        workers,
        bogosim: true,
        ..ExperimentConfig::default()
    };
    config.sampler.burn_in_sweeps = 3;
    config
}

#[test]
fn seeds_never_collide_over_a_million_indices() {
    let mut seen = HashSet::with_capacity(1 << 21);
    for i in 0..1_000_000u64 {
        assert!(seen.insert(seed_schedule(42, i)), "collision at {i}");
    }
}

#[test]
fn empty_time_grid_is_rejected() {
    let config = ExperimentConfig {
        horizon: 0.0,
        ..ExperimentConfig::default()
    };
    assert!(config.validate().is_err());
    assert!(ExperimentConfig::from_json(r#"{"spacing": 0.0}"#).is_err());
}

#[test]
fn malformed_configs_are_rejected() {
    for text in [
        r#"{"t_over_mu": []}"#,
        r#"{"n_max": [5]}"#,
        r#"{"sqrt_rho_a3": [-1.0]}"#,
        r#"{"etas": [1.5]}"#,
        r#"{"workers": 0}"#,
        r#"{"kind": "figure", "figure": 9}"#,
        r#"{"kind": "run", "realizations": 1}"#,
        r#"{"unknown_field": 1}"#,
        r#"{"kind": "plot"}"#,
    ] {
        assert!(ExperimentConfig::from_json(text).is_err(), "{text} accepted");
    }
    let huge = ExperimentConfig {
        t_over_mu: vec![0.5; 400],
        n_max: vec![4; 400],
        ..ExperimentConfig::default()
    };
    assert!(huge.validate().is_err());
    assert!(ExperimentConfig::from_json("{}").is_ok());
}

#[test]
fn figure_presets_are_valid() {
    for figure in 1..=8 {
        let preset = ExperimentConfig::figure_preset(figure);
        preset.validate().unwrap();
        assert!(preset.n_max.iter().all(|&n| n <= 16));
        assert!(preset.realizations <= 1000);
    }
}

#[test]
fn config_round_trips_through_json() {
    let config = ExperimentConfig::figure_preset(1);
    let text = serde_json::to_string(&config).unwrap();
    let back = ExperimentConfig::from_json(&text).unwrap();
    assert_eq!(back, config);
    assert_eq!(back.hash(), config.hash());
    assert_ne!(ExperimentConfig::default().hash(), config.hash());
}

#[test]
fn reruns_are_bit_identical_and_worker_independent() {
    let one = run_experiment(&tiny_run(1)).unwrap();
    let again = run_experiment(&tiny_run(1)).unwrap();
    let two = run_experiment(&tiny_run(2)).unwrap();
    assert!(one.complete());
    assert_eq!(one.rows, again.rows);
    let values = |b: &spinsqueeze::experiment::OutputBundle| -> Vec<(String, u64)> {
        b.rows.iter().map(|r| (r.quantity.clone(), r.value.to_bits())).collect()
    };
    assert_eq!(values(&one), values(&two));
}

#[test]
fn rows_carry_provenance_and_files_are_written() {
    let config = tiny_run(1);
    let bundle = run_experiment(&config).unwrap();
    let hash = config.hash();
    assert!(bundle
        .rows
        .iter()
        .all(|r| r.config_hash == hash && !r.analytics_version.is_empty()));
    let curve: Vec<_> = bundle.rows_of("curve").collect();
    assert!(curve.iter().any(|r| r.quantity == "bogosim_xi2"));
    assert!(curve
        .iter()
        .filter(|r| r.quantity == "xi2")
        .all(|r| r.n_realizations == Some(6) && r.seed_first == Some(seed_schedule(config.base_seed, 0))));

    let dir = tempfile::tempdir().unwrap();
    bundle.write(dir.path()).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], true);
    assert_eq!(manifest["scale"], "desk");
    assert_eq!(manifest["config_hash"], hash);
    let mut reader = csv::Reader::from_path(dir.path().join("curve.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "n_realizations"));
    assert_eq!(reader.records().count(), curve.len());
}

#[test]
fn failing_point_marks_bundle_incomplete() {
    let mut config = tiny_run(1);
    config.memory_cap_bytes = 1;
    let bundle = run_experiment(&config).unwrap();
    assert!(!bundle.complete());
    assert_eq!(bundle.manifest.failures.len(), 1);
    // The analytic overlay still comes through.
    assert!(bundle.rows_of("analytics").count() > 0);
}

#[test]
fn analytics_run_produces_universal_function_table() {
    let mut config = ExperimentConfig::figure_preset(3);
    config.t_over_mu = vec![0.1, 1.0, 10.0];
    let bundle = run_experiment(&config).unwrap();
    assert!(bundle.complete());
    let f: Vec<f64> = bundle
        .rows_of("analytics")
        .filter(|r| r.quantity == "f_quantum")
        .map(|r| r.value)
        .collect();
    assert_eq!(f.len(), 3);
    assert!(f.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn sample_run_fills_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig {
        kind: ExperimentKind::Sample,
        n_max: vec![4],
        realizations: 3,
        out_dir: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    config.sampler.burn_in_sweeps = 2;
    let bundle = run_experiment(&config).unwrap();
    assert!(bundle.complete());
    let files = walk(dir.path());
    assert_eq!(files.iter().filter(|p| p.ends_with(".bin")).count(), 3);
    assert_eq!(files.iter().filter(|p| p.ends_with(".json")).count(), 3);
}

fn walk(root: &std::path::Path) -> Vec<String> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path.display().to_string());
        }
    }
    out
}

proptest! {
    #[test]
    fn distinct_indices_give_distinct_seeds(base in any::<u64>(), i in any::<u64>(), j in any::<u64>()) {
        prop_assume!(i != j);
        prop_assert_ne!(seed_schedule(base, i), seed_schedule(base, j));
    }

    #[test]
    fn time_grid_spans_horizon(horizon in 0.1f64..500.0, steps in 1u32..2000) {
        let spacing = horizon / f64::from(steps);
        let config = ExperimentConfig { horizon, spacing, ..ExperimentConfig::default() };
        let times = config.times();
        prop_assert_eq!(times.len(), steps as usize + 1);
        prop_assert!((times.last().unwrap() - horizon).abs() < 1e-9 * horizon);
    }
}
