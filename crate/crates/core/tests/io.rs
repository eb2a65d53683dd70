use std::path::PathBuf;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinsqueeze::dynamics::{apply_pulse, Evolver};
use spinsqueeze::field::{FieldPair, GridDescriptor};
use spinsqueeze::io::{
    checkpoint, parse_checkpoint, restore, IoError, SampleCache, SampleRecord, Sidecar, SidecarDiagnostics,
    FORMAT_VERSION,
};
use spinsqueeze::model::{BoxShape, LatticeSetup};
use spinsqueeze::sampler::{sample_thermal_field, sample_vacuum_field, SamplerConfig};

fn setup(n_max: usize) -> LatticeSetup {
    LatticeSetup::new(1.32e-2, 0.5, n_max, BoxShape::Cubic).unwrap()
}

fn thermal(setup: &LatticeSetup, seed: u64) -> (Vec<Complex64>, Vec<Complex64>, SamplerConfig, SidecarDiagnostics) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = SamplerConfig {
        burn_in_sweeps: 4,
        seed,
        ..SamplerConfig::default()
    };
    let sample = sample_thermal_field(&setup.grid, &setup.params, &config, &mut rng).unwrap();
    let vacuum = sample_vacuum_field(&setup.grid, &mut rng);
    (
        sample.field,
        vacuum,
        config,
        SidecarDiagnostics::from(&sample.diagnostics),
    )
}

fn record(setup: &LatticeSetup, seed: u64) -> (SampleRecord, Sidecar) {
    let (field, _, sampler, diagnostics) = thermal(setup, seed);
    let grid = GridDescriptor::of(&setup.grid);
    let record = SampleRecord {
        grid,
        shape: setup.grid.shape,
        seed,
        time: 0.0,
        fields: vec![field],
    };
    let sidecar = Sidecar {
        format_version: FORMAT_VERSION,
        seed,
        shape: setup.grid.shape,
        grid,
        params: setup.params.clone(),
        sampler,
        diagnostics: Some(diagnostics),
    };
    (record, sidecar)
}

fn pair(setup: &LatticeSetup, seed: u64) -> FieldPair {
    let (a, b, _, _) = thermal(setup, seed);
    let mut pair = FieldPair::new(GridDescriptor::of(&setup.grid), a, b, seed);
    apply_pulse(&mut pair);
    pair
}

#[test]
fn record_round_trips_bitwise() {
    let s = setup(4);
    let (rec, _) = record(&s, 1);
    let bytes = rec.encode();
    let back = SampleRecord::decode(&bytes).unwrap();
    assert_eq!(back, rec);
    assert_eq!(back.encode(), bytes);
}

#[test]
fn truncated_and_padded_records_are_rejected() {
    let s = setup(4);
    let bytes = record(&s, 2).0.encode();
    assert!(matches!(
        SampleRecord::decode(&bytes[..bytes.len() - 1]),
        Err(IoError::Length { .. })
    ));
    let mut padded = bytes.clone();
    padded.push(0);
    assert!(matches!(SampleRecord::decode(&padded), Err(IoError::Length { .. })));
    let mut wrong_magic = bytes.clone();
    wrong_magic[0] ^= 0xff;
    assert!(matches!(SampleRecord::decode(&wrong_magic), Err(IoError::BadMagic)));
    let mut wrong_version = bytes;
    wrong_version[8] = 9;
    assert!(matches!(SampleRecord::decode(&wrong_version), Err(IoError::Version(9))));
}

#[test]
fn oversized_grid_header_fails_before_allocating() {
    let mut bytes = b"SSQFIELD".to_vec();
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&u32::MAX.to_le_bytes());
    bytes.resize(64, 0);
    assert!(matches!(
        SampleRecord::decode(&bytes),
        Err(IoError::Header { field: "n_per_dir", .. })
    ));
}

#[test]
fn checkpoint_is_not_a_record() {
    let s = setup(4);
    let bytes = checkpoint(&pair(&s, 3), BoxShape::Cubic);
    assert!(matches!(SampleRecord::decode(&bytes), Err(IoError::BadMagic)));
}

#[test]
fn sidecar_round_trips_and_rejects_unknown_fields() {
    let s = setup(4);
    let (_, sidecar) = record(&s, 4);
    let text = sidecar.to_json().unwrap();
    assert_eq!(Sidecar::from_json(text.as_bytes()).unwrap(), sidecar);
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["surprise"] = serde_json::json!(1);
    assert!(Sidecar::from_json(value.to_string().as_bytes()).is_err());
    value.as_object_mut().unwrap().remove("surprise");
    value["format_version"] = serde_json::json!(FORMAT_VERSION + 1);
    assert!(matches!(
        Sidecar::from_json(value.to_string().as_bytes()),
        Err(IoError::Version(_))
    ));
}

#[test]
fn checkpoint_restart_is_bitwise_identical() {
    let s = setup(6);
    let start = pair(&s, 5);
    let dt = Evolver::default_step(&s.grid, s.params.mu);

    let mut straight = start.clone();
    Evolver::new(&s.grid, s.params.coupling, dt)
        .unwrap()
        .evolve(&mut straight, 100)
        .unwrap();

    let mut first = start;
    Evolver::new(&s.grid, s.params.coupling, dt)
        .unwrap()
        .evolve(&mut first, 50)
        .unwrap();
    let bytes = checkpoint(&first, BoxShape::Cubic);
    let mut resumed = restore(&bytes, &s.grid).unwrap();
    assert_eq!(resumed, first);
    Evolver::new(&s.grid, s.params.coupling, dt)
        .unwrap()
        .evolve(&mut resumed, 50)
        .unwrap();

    assert_eq!(resumed.psi_a, straight.psi_a);
    assert_eq!(resumed.psi_b, straight.psi_b);
    assert_eq!(resumed.time.to_bits(), straight.time.to_bits());
}

#[test]
fn restore_rejects_other_lattice() {
    let s = setup(4);
    let bytes = checkpoint(&pair(&s, 6), BoxShape::Cubic);
    assert!(matches!(
        restore(&bytes, &setup(6).grid),
        Err(IoError::GridMismatch { .. })
    ));
    let other_shape = LatticeSetup::new(1.32e-2, 0.5, 4, BoxShape::Incommensurate).unwrap();
    assert!(restore(&bytes, &other_shape.grid).is_err());
}

#[test]
fn cache_stores_and_loads_by_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cache = SampleCache::new(dir.path());
    let s = setup(4);
    let (rec, sidecar) = record(&s, 7);
    cache.store("point", &rec, &sidecar).unwrap();
    let (back, meta) = cache.load("point", 7).unwrap().unwrap();
    assert_eq!(back, rec);
    assert_eq!(meta, sidecar);
    assert!(cache.load("point", 8).unwrap().is_none());
}

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds in {}", dir.display());
    files.into_iter().map(|p| std::fs::read(p).unwrap()).collect()
}

#[test]
fn fuzz_corpus_seeds_parse() {
    for bytes in corpus("sample_record") {
        SampleRecord::decode(&bytes).unwrap();
    }
    for bytes in corpus("sidecar") {
        Sidecar::from_json(&bytes).unwrap();
    }
    for bytes in corpus("checkpoint") {
        parse_checkpoint(&bytes).unwrap();
    }
}

proptest! {
    #[test]
    fn random_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..600)) {
        let _ = SampleRecord::decode(&bytes);
        let _ = parse_checkpoint(&bytes);
        let _ = Sidecar::from_json(&bytes);
    }

    #[test]
    fn mutated_records_never_panic(index in 0usize..200, value in any::<u8>()) {
        let s = setup(2);
        let grid = GridDescriptor::of(&s.grid);
        let rec = SampleRecord {
            grid,
            shape: BoxShape::Cubic,
            seed: 1,
            time: 0.5,
            fields: vec![vec![Complex64::new(1.0, -1.0); grid.points()]],
        };
        let mut bytes = rec.encode();
        let i = index % bytes.len();
        bytes[i] = value;
        if let Ok(back) = SampleRecord::decode(&bytes) {
            prop_assert_eq!(back.encode(), bytes);
        }
    }

    #[test]
    fn arbitrary_fields_round_trip(seed in any::<u64>(), time in -1e6f64..1e6, values in proptest::collection::vec(any::<f64>(), 16)) {
        let s = setup(2);
        let grid = GridDescriptor::of(&s.grid);
        let field: Vec<Complex64> = values.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let rec = SampleRecord { grid, shape: BoxShape::Cubic, seed, time, fields: vec![field.clone(), field] };
        let bytes = rec.encode();
        let back = SampleRecord::decode(&bytes).unwrap();
        prop_assert_eq!(back.encode(), bytes);
    }
}
