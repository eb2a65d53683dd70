//! Config-driven experiments: analytic tables, sampling runs, full squeezing
//! simulations and the figure presets, written as CSV tables with a JSON
//! manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bogoliubov::{t_best, Analytics, AnalyticsError, Stage, Statistics};
use crate::bogosim::{project_to_bogoliubov, BogoliubovBasis, BogosimError};
use crate::dynamics::{apply_pulse, DynamicsError, Evolver};
use crate::field::{FieldPair, GridDescriptor, Spectral};
use crate::io::{IoError, SampleCache, SampleRecord, Sidecar, SidecarDiagnostics, FORMAT_VERSION};
use crate::model::{BoxShape, LatticeSetup, ModelError};
use crate::modes::ModeSet;
use crate::observables::{summarize_curve, CurveSummary, ObservablesError, SpinSample, SqueezingCurve};
use crate::sampler::{sample_thermal_field, sample_vacuum_field, SamplerConfig, SamplerError};

pub const ANALYTICS_VERSION: &str = concat!("spinsqueeze-", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("config parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Bogosim(#[from] BogosimError),
    #[error(transparent)]
    Observables(#[from] ObservablesError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("file: {0}")]
    File(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Analytics,
    Sample,
    Run,
    Sweep,
    Figure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Figure number for `kind = figure`.
    pub figure: Option<u8>,
    pub sqrt_rho_a3: Vec<f64>,
    pub t_over_mu: Vec<f64>,
    /// Atom numbers; when non-empty they replace √(ρa³) as the free parameter.
    pub n_atoms: Vec<u64>,
    pub n_max: Vec<usize>,
    pub shape: BoxShape,
    pub realizations: usize,
    /// Last sampled time, in ħ/ρg.
    pub horizon: f64,
    /// Spacing of the sampled times, in ħ/ρg.
    pub spacing: f64,
    /// Integration step in ħ/ρg; defaults to 0.01/max(E_max/ρg, 1).
    pub time_step: Option<f64>,
    pub etas: Vec<f64>,
    pub base_seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub sampler: SamplerConfig,
    /// Also reconstruct the curves in the Bogoliubov approximation.
    pub bogosim: bool,
    /// Keep the oscillating terms of the condensate phase in that reconstruction.
    pub oscillating: bool,
    /// Upper bound on field memory held at once.
    pub memory_cap_bytes: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Analytics,
            figure: None,
            sqrt_rho_a3: vec![1.32e-2],
            t_over_mu: vec![0.5],
            n_atoms: Vec::new(),
            n_max: vec![12],
            shape: BoxShape::Cubic,
            realizations: 64,
            horizon: 60.0,
            spacing: 0.05,
            time_step: None,
            etas: vec![0.2],
            base_seed: 1,
            workers: 1,
            out_dir: PathBuf::from("out"),
            sampler: SamplerConfig {
                burn_in_sweeps: 40,
                rotations_per_sweep: Some(100),
                ..SamplerConfig::default()
            },
            bogosim: false,
            oscillating: false,
            memory_cap_bytes: 1 << 30,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.t_over_mu.is_empty() || self.n_max.is_empty() {
            return bad("parameter grids must be non-empty".into());
        }
        if self.sqrt_rho_a3.is_empty() && self.n_atoms.is_empty() {
            return bad("need sqrt_rho_a3 or n_atoms values".into());
        }
        if let Some(v) = self.sqrt_rho_a3.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return bad(format!("sqrt_rho_a3 must be positive, got {v}"));
        }
        if let Some(v) = self.t_over_mu.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return bad(format!("t_over_mu must be non-negative, got {v}"));
        }
        if let Some(n) = self.n_atoms.iter().find(|n| **n < 2) {
            return bad(format!("n_atoms must be at least 2, got {n}"));
        }
        if let Some(n) = self.n_max.iter().find(|n| **n < 2 || **n % 2 == 1 || **n > 256) {
            return bad(format!("n_max must be even in [2, 256], got {n}"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite())
            || !(self.horizon >= self.spacing && self.horizon.is_finite())
        {
            return bad(format!(
                "empty time grid: horizon {} spacing {}",
                self.horizon, self.spacing
            ));
        }
        let densities = self.sqrt_rho_a3.len().max(1) + self.n_atoms.len();
        let grid_points = [densities, self.t_over_mu.len(), self.n_max.len()]
            .iter()
            .try_fold(1usize, |acc, n| acc.checked_mul(*n));
        if grid_points.is_none_or(|n| n > 100_000) {
            return bad("parameter grid exceeds 10^5 points".into());
        }
        if self.horizon / self.spacing > 1e6 {
            return bad("time grid exceeds 10^6 points".into());
        }
        if let Some(dt) = self.time_step {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("time_step must be positive, got {dt}"));
            }
        }
        if let Some(eta) = self.etas.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return bad(format!("eta must lie in (0, 1), got {eta}"));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if matches!(self.kind, ExperimentKind::Run | ExperimentKind::Sweep) && self.realizations < 2 {
            return bad("runs need at least 2 realizations".into());
        }
        if self.kind == ExperimentKind::Figure && !matches!(self.figure, Some(1..=8)) {
            return bad(format!("figure must be 1..=8, got {:?}", self.figure));
        }
        self.sampler
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }

    /// Sampled times in ħ/ρg, from 0 to the horizon.
    pub fn times(&self) -> Vec<f64> {
        let count = (self.horizon / self.spacing + 1e-9).floor() as usize;
        (0..=count).map(|i| i as f64 * self.spacing).collect()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn points(&self) -> Vec<ParamPoint> {
        let mut out = Vec::new();
        for &t_over_mu in &self.t_over_mu {
            for &n_max in &self.n_max {
                if self.n_atoms.is_empty() {
                    for &s in &self.sqrt_rho_a3 {
                        out.push(ParamPoint {
                            sqrt_rho_a3: Some(s),
                            n_atoms: None,
                            t_over_mu,
                            n_max,
                        });
                    }
                } else {
                    for &n in &self.n_atoms {
                        out.push(ParamPoint {
                            sqrt_rho_a3: None,
                            n_atoms: Some(n),
                            t_over_mu,
                            n_max,
                        });
                    }
                }
            }
        }
        out
    }

    /// Desk-scale defaults for a figure of the study.
    pub fn figure_preset(figure: u8) -> Self {
        let base = Self {
            kind: ExperimentKind::Figure,
            figure: Some(figure),
            ..Self::default()
        };
        match figure {
            1 => Self {
                t_over_mu: vec![1.13, 0.78, 0.5, 0.28],
                n_max: vec![8, 10, 12],
                realizations: 128,
                horizon: 80.0,
                spacing: 1.0,
                ..base
            },
            2 => Self {
                sqrt_rho_a3: vec![1.32e-2, 3.96e-3],
                realizations: 128,
                horizon: 120.0,
                spacing: 1.0,
                ..base
            },
            3 | 5 => Self {
                t_over_mu: log_grid(0.1, 10.0, 25),
                sqrt_rho_a3: vec![1e-3],
                ..base
            },
            4 => Self {
                t_over_mu: vec![1.0],
                sqrt_rho_a3: vec![1e-3],
                horizon: 400.0,
                spacing: 1.0,
                ..base
            },
            6 | 7 => Self {
                t_over_mu: vec![0.28, 0.5, 1.13],
                sqrt_rho_a3: vec![1.32e-2],
                n_max: vec![10],
                realizations: 96,
                horizon: 120.0,
                spacing: 1.0,
                ..base
            },
            _ => Self {
                realizations: 128,
                horizon: 100.0,
                spacing: 0.5,
                bogosim: true,
                ..base
            },
        }
    }
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (ratio * i as f64).exp()).collect()
}

/// Per-realization seed: the SplitMix64 finalizer applied to a Weyl sequence
/// in the realization index. Both steps are bijections of u64, so distinct
/// indices never share a seed.
pub fn seed_schedule(base_seed: u64, realization_index: u64) -> u64 {
    const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut z = base_seed.wrapping_add(realization_index.wrapping_mul(GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One parameter combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub sqrt_rho_a3: Option<f64>,
    pub n_atoms: Option<u64>,
    pub t_over_mu: f64,
    pub n_max: usize,
}

impl ParamPoint {
    pub fn setup(&self, shape: BoxShape) -> Result<LatticeSetup, ExperimentError> {
        Ok(match (self.sqrt_rho_a3, self.n_atoms) {
            (_, Some(n)) => LatticeSetup::with_atoms(n, self.t_over_mu, self.n_max, shape)?,
            (Some(s), None) => LatticeSetup::new(s, self.t_over_mu, self.n_max, shape)?,
            (None, None) => return Err(ExperimentError::Config("point without √(ρa³) or N".into())),
        })
    }
}

/// One line of an output table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub table: String,
    pub sqrt_rho_a3: f64,
    pub t_over_mu: f64,
    pub n_max: Option<usize>,
    pub n_atoms: Option<u64>,
    /// ρg t/ħ, when the row belongs to a curve.
    pub time: Option<f64>,
    pub quantity: String,
    pub value: f64,
    pub error: Option<f64>,
    pub n_realizations: Option<usize>,
    pub config_hash: String,
    pub seed_first: Option<u64>,
    pub seed_last: Option<u64>,
    pub analytics_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub point: ParamPoint,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub code_version: String,
    pub scale: String,
    pub base_seed: u64,
    pub realizations: usize,
    pub wall_time_seconds: f64,
    pub complete: bool,
    pub failures: Vec<PointFailure>,
    pub tables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBundle {
    pub rows: Vec<Row>,
    pub manifest: Manifest,
    /// Full results of every simulated point, in config order.
    pub runs: Vec<PointRun>,
}

impl OutputBundle {
    pub fn complete(&self) -> bool {
        self.manifest.complete
    }

    pub fn rows_of<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.table == table)
    }

    /// Writes one CSV per table plus `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        for table in &self.manifest.tables {
            let mut writer = csv::Writer::from_path(dir.join(format!("{table}.csv")))?;
            for row in self.rows_of(table) {
                writer.serialize(row)?;
            }
            writer.flush()?;
        }
        let manifest = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(dir.join("manifest.json"), manifest)?;
        Ok(())
    }
}

/// How one simulated point is integrated and sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    /// Sampled times in ħ/ρg.
    pub times: Vec<f64>,
    /// Integration steps between consecutive samples.
    pub steps_per_sample: u64,
    /// Step in simulation units.
    pub dt: f64,
    pub sampler: SamplerConfig,
    pub bogosim: bool,
    pub oscillating: bool,
}

impl RunPlan {
    pub fn new(setup: &LatticeSetup, config: &ExperimentConfig) -> Self {
        let mu = setup.params.mu;
        let target = config
            .time_step
            .unwrap_or_else(|| 0.01 / (setup.grid.max_kinetic() / mu).max(1.0));
        let steps_per_sample = (config.spacing / target).ceil().max(1.0) as u64;
        Self {
            times: config.times(),
            steps_per_sample,
            dt: config.spacing / steps_per_sample as f64 / mu,
            sampler: config.sampler.clone(),
            bogosim: config.bogosim,
            oscillating: config.oscillating,
        }
    }
}

/// Everything recorded for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationOutput {
    pub seed: u64,
    /// Spin samples of the full simulation at each planned time.
    pub spins: Vec<SpinSample>,
    /// The same reconstructed in the Bogoliubov approximation.
    pub bogosim_spins: Option<Vec<SpinSample>>,
    /// Non-condensed fraction of component a before the pulse.
    pub noncondensed_fraction: f64,
    pub rotation_acceptance: f64,
    pub refresh_acceptance: f64,
}

/// Thermal draw, vacuum draw, pulse, evolution and spin sampling of one realization.
pub fn simulate_realization(
    setup: &LatticeSetup,
    plan: &RunPlan,
    seed: u64,
) -> Result<RealizationOutput, ExperimentError> {
    let grid = &setup.grid;
    let params = &setup.params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = SamplerConfig {
        seed,
        ..plan.sampler.clone()
    };
    let thermal = sample_thermal_field(grid, params, &sampler, &mut rng)?;
    let vacuum = sample_vacuum_field(grid, &mut rng);
    let noncondensed_fraction = 1.0
        - thermal
            .diagnostics
            .condensate_fraction_trace
            .last()
            .copied()
            .unwrap_or(1.0);
    let mut pair = FieldPair::new(GridDescriptor::of(grid), thermal.field, vacuum, seed);
    apply_pulse(&mut pair);
    let bogosim_spins = if plan.bogosim {
        let basis = BogoliubovBasis::new(grid, params, Stage::AfterPulse);
        let mut spectral = Spectral::new(GridDescriptor::of(grid));
        let state = project_to_bogoliubov(&pair, &basis, &mut spectral)?;
        Some(
            plan.times
                .iter()
                .map(|t| state.evolve(&basis, t / params.mu, plan.oscillating).spin)
                .collect(),
        )
    } else {
        None
    };
    let mut evolver = Evolver::new(grid, params.coupling, plan.dt)?;
    let mut spins = Vec::with_capacity(plan.times.len());
    for i in 0..plan.times.len() {
        if i > 0 {
            evolver.evolve(&mut pair, plan.steps_per_sample)?;
        }
        spins.push(SpinSample::of(&pair));
    }
    Ok(RealizationOutput {
        seed,
        spins,
        bogosim_spins,
        noncondensed_fraction,
        rotation_acceptance: thermal.diagnostics.rotation_acceptance,
        refresh_acceptance: thermal.diagnostics.refresh_acceptance,
    })
}

/// Result of a simulated point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRun {
    pub point: ParamPoint,
    pub setup: LatticeSetup,
    pub curve: SqueezingCurve,
    pub summary: CurveSummary,
    pub bogosim_curve: Option<SqueezingCurve>,
    pub noncondensed_fraction: f64,
    /// Discrete-sum classical ξ²_min.
    pub analytic_xi2_min: f64,
    /// Discrete-sum classical ξ²(t) on the sampled times.
    pub analytic_curve: Vec<f64>,
    pub seeds: (u64, u64),
}

/// Simulates all realizations of one point on `workers` threads.
///
/// Realizations are independent and reduced in index order, so the result does
/// not depend on the worker count.
pub fn simulate_point(
    point: ParamPoint,
    config: &ExperimentConfig,
    pool: &rayon::ThreadPool,
) -> Result<PointRun, ExperimentError> {
    let setup = point.setup(config.shape)?;
    let plan = RunPlan::new(&setup, config);
    let points = setup.grid.len() as u64;
    let in_flight = config.workers as u64 * points * 64;
    let kept = if plan.bogosim {
        config.realizations as u64 * points * 64
    } else {
        0
    };
    if in_flight + kept > config.memory_cap_bytes {
        return Err(ExperimentError::Config(format!(
            "point needs {} bytes of field memory, cap is {}",
            in_flight + kept,
            config.memory_cap_bytes
        )));
    }
    let seeds: Vec<u64> = (0..config.realizations as u64)
        .map(|i| seed_schedule(config.base_seed, i))
        .collect();
    let outputs: Vec<RealizationOutput> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| simulate_realization(&setup, &plan, seed))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let n_atoms = setup.params.n_atoms as f64;
    let per_time = |pick: &dyn Fn(&RealizationOutput) -> &[SpinSample]| -> Vec<Vec<SpinSample>> {
        (0..plan.times.len())
            .map(|i| outputs.iter().map(|o| pick(o)[i]).collect())
            .collect()
    };
    let curve = SqueezingCurve::from_samples(&plan.times, &per_time(&|o| &o.spins), n_atoms)?;
    let bogosim_curve = if plan.bogosim {
        let samples = per_time(&|o| o.bogosim_spins.as_deref().unwrap_or(&[]));
        Some(SqueezingCurve::from_samples(&plan.times, &samples, n_atoms)?)
    } else {
        None
    };
    let summary = summarize_curve(&plan.times, &curve.xi2_values(), &config.etas)?;
    let analytics = Analytics::new(
        point.t_over_mu,
        Statistics::Classical,
        ModeSet::lattice(&setup.grid, &setup.params),
    );
    let analytic_xi2_min = analytics.xi2_min()?;
    let analytic_curve = plan
        .times
        .iter()
        .map(|&t| analytics.xi2_of_t(t, false).map(|p| p.xi2))
        .collect::<Result<Vec<_>, _>>()?;
    let noncondensed_fraction = outputs.iter().map(|o| o.noncondensed_fraction).sum::<f64>() / outputs.len() as f64;
    Ok(PointRun {
        point,
        setup,
        curve,
        summary,
        bogosim_curve,
        noncondensed_fraction,
        analytic_xi2_min,
        analytic_curve,
        seeds: (seeds[0], *seeds.last().expect("at least two realizations")),
    })
}

struct RowMaker<'a> {
    hash: &'a str,
}

impl RowMaker<'_> {
    #[allow(clippy::too_many_arguments)]
    fn row(
        &self,
        table: &str,
        sqrt_rho_a3: f64,
        t_over_mu: f64,
        lattice: Option<(usize, u64)>,
        time: Option<f64>,
        quantity: &str,
        value: f64,
        error: Option<f64>,
        realizations: Option<(usize, (u64, u64))>,
    ) -> Row {
        Row {
            table: table.to_string(),
            sqrt_rho_a3,
            t_over_mu,
            n_max: lattice.map(|l| l.0),
            n_atoms: lattice.map(|l| l.1),
            time,
            quantity: quantity.to_string(),
            value,
            error,
            n_realizations: realizations.map(|r| r.0),
            config_hash: self.hash.to_string(),
            seed_first: realizations.map(|r| r.1 .0),
            seed_last: realizations.map(|r| r.1 .1),
            analytics_version: ANALYTICS_VERSION.to_string(),
        }
    }

    fn run_rows(&self, run: &PointRun, with_curves: bool, rows: &mut Vec<Row>) {
        let p = &run.setup.params;
        let lattice = Some((run.point.n_max, p.n_atoms));
        let reals = Some((run.curve.realizations, run.seeds));
        let s = p.sqrt_rho_a3;
        let theta = run.point.t_over_mu;
        let summary = |q: &str, v: f64| self.row("summary", s, theta, lattice, None, q, v, None, reals);
        rows.push(summary("xi2_min", run.summary.xi2_min));
        rows.push(summary("t_min", run.summary.t_min));
        rows.push(summary("boundary_minimum", f64::from(u8::from(run.summary.boundary))));
        // A crossing beyond the last sample is reported as a lower bound.
        let horizon = run.curve.times.last().copied().unwrap_or(0.0);
        let crossing = |name: String, t: Option<f64>| match t {
            Some(t) => summary(&name, t),
            None => summary(&format!("{name}_above"), horizon),
        };
        for (eta, t) in &run.summary.t_eta {
            rows.push(crossing(format!("t_eta_{eta}"), *t));
        }
        rows.push(crossing("t_therm".into(), run.summary.t_therm));
        rows.push(summary("noncondensed_fraction", run.noncondensed_fraction));
        rows.push(summary("analytic_xi2_min", run.analytic_xi2_min));
        if let Some(b) = &run.bogosim_curve {
            if let Ok(bs) = summarize_curve(&b.times, &b.xi2_values(), &[]) {
                rows.push(summary("bogosim_xi2_min", bs.xi2_min));
            }
        }
        if !with_curves {
            return;
        }
        for (i, &t) in run.curve.times.iter().enumerate() {
            let curve_row = |q: &str, e: crate::observables::Estimate| {
                self.row("curve", s, theta, lattice, Some(t), q, e.value, Some(e.error), reals)
            };
            rows.push(curve_row("xi2", run.curve.xi2[i]));
            rows.push(curve_row("xi0_2", run.curve.xi0_2[i]));
            rows.push(curve_row("sz_squared", run.curve.sz_squared[i]));
            if let Some(b) = &run.bogosim_curve {
                rows.push(curve_row("bogosim_xi2", b.xi2[i]));
                rows.push(curve_row("bogosim_xi0_2", b.xi0_2[i]));
            }
            rows.push(self.row(
                "curve",
                s,
                theta,
                lattice,
                Some(t),
                "analytic_xi2",
                run.analytic_curve[i],
                None,
                None,
            ));
        }
    }
}

/// Analytic rows for one (√(ρa³), k_BT/ρg) pair.
fn analytic_rows(
    maker: &RowMaker,
    s: f64,
    theta: f64,
    etas: &[f64],
    shape: BoxShape,
) -> Result<Vec<Row>, ExperimentError> {
    let quantum = Analytics::new(theta, Statistics::Quantum, ModeSet::continuum(s));
    let mut rows = Vec::new();
    let row = |q: &str, v: f64| maker.row("analytics", s, theta, None, None, q, v, None, None);
    let xi2_q = quantum.xi2_min()?;
    rows.push(row("xi2_min_quantum", xi2_q));
    rows.push(row("f_quantum", xi2_q / s));
    rows.push(row("noncondensed_fraction_quantum", quantum.noncondensed_fraction()?));
    if theta > 0.0 {
        let classical = Analytics::new(theta, Statistics::Classical, ModeSet::zone(s, theta, shape)?);
        let xi2_c = classical.xi2_min()?;
        rows.push(row("xi2_min_classical", xi2_c));
        rows.push(row("f_classical", xi2_c / s));
        rows.push(row(
            "noncondensed_fraction_classical",
            classical.noncondensed_fraction()?,
        ));
        for &eta in etas {
            rows.push(row(&format!("t_eta_{eta}_classical"), t_best(eta, xi2_c)?));
        }
    }
    for &eta in etas {
        rows.push(row(&format!("t_eta_{eta}_quantum"), t_best(eta, xi2_q)?));
    }
    Ok(rows)
}

fn analytic_curve_rows(maker: &RowMaker, s: f64, theta: f64, times: &[f64]) -> Result<Vec<Row>, ExperimentError> {
    let analytics = Analytics::new(theta, Statistics::Quantum, ModeSet::continuum(s));
    let curve = analytics.curve(times, false)?;
    let mut rows = Vec::new();
    for p in curve.points {
        let row = |q: &str, v: f64| maker.row("analytic_curve", s, theta, None, Some(p.time), q, v, None, None);
        rows.push(row("tau", p.tau));
        rows.push(row("xi2", p.xi2));
        rows.push(row("asymptote", p.asymptote));
        rows.push(row("two_mode", crate::bogoliubov::two_mode_xi2(p.tau)));
    }
    Ok(rows)
}

/// Draws ψ_a for every realization and stores it in the sample cache.
fn sample_rows(
    maker: &RowMaker,
    point: ParamPoint,
    config: &ExperimentConfig,
    cache: &SampleCache,
    pool: &rayon::ThreadPool,
) -> Result<Vec<Row>, ExperimentError> {
    let setup = point.setup(config.shape)?;
    let tag = format!(
        "s{:.4e}_t{:.4}_n{}_N{}",
        setup.params.sqrt_rho_a3, point.t_over_mu, point.n_max, setup.params.n_atoms
    );
    let seeds: Vec<u64> = (0..config.realizations as u64)
        .map(|i| seed_schedule(config.base_seed, i))
        .collect();
    let fractions: Vec<f64> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| -> Result<f64, ExperimentError> {
                let sampler = SamplerConfig {
                    seed,
                    ..config.sampler.clone()
                };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let sample = sample_thermal_field(&setup.grid, &setup.params, &sampler, &mut rng)?;
                let record = SampleRecord {
                    grid: GridDescriptor::of(&setup.grid),
                    shape: config.shape,
                    seed,
                    time: 0.0,
                    fields: vec![sample.field],
                };
                let sidecar = Sidecar {
                    format_version: FORMAT_VERSION,
                    seed,
                    shape: config.shape,
                    grid: record.grid,
                    params: setup.params.clone(),
                    sampler,
                    diagnostics: Some(SidecarDiagnostics::from(&sample.diagnostics)),
                };
                cache.store(&tag, &record, &sidecar)?;
                Ok(1.0
                    - sample
                        .diagnostics
                        .condensate_fraction_trace
                        .last()
                        .copied()
                        .unwrap_or(1.0))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let n = fractions.len() as f64;
    let mean = fractions.iter().sum::<f64>() / n;
    let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let lattice = Some((point.n_max, setup.params.n_atoms));
    let reals = Some((fractions.len(), (seeds[0], *seeds.last().unwrap_or(&seeds[0]))));
    Ok(vec![maker.row(
        "sample",
        setup.params.sqrt_rho_a3,
        point.t_over_mu,
        lattice,
        None,
        "noncondensed_fraction",
        mean,
        Some((var / n).sqrt()),
        reals,
    )])
}

type PointSink<'a> = dyn FnMut(ParamPoint, Result<Vec<Row>, ExperimentError>, &mut Vec<Row>) + 'a;

/// Runs the configured experiment. Failures of single points are recorded in
/// the manifest and the bundle is marked incomplete.
pub fn run_experiment(config: &ExperimentConfig) -> Result<OutputBundle, ExperimentError> {
    config.validate()?;
    let start = Instant::now();
    let hash = config.hash();
    let maker = RowMaker { hash: &hash };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut record = |point: ParamPoint, result: Result<Vec<Row>, ExperimentError>, rows: &mut Vec<Row>| match result {
        Ok(r) => rows.extend(r),
        Err(e) => {
            log::error!("point {point:?} failed: {e}");
            failures.push(PointFailure {
                point,
                message: e.to_string(),
            });
        }
    };
    let analytic_pairs = || -> Vec<(f64, f64)> {
        let mut pairs = Vec::new();
        for &theta in &config.t_over_mu {
            for &s in &config.sqrt_rho_a3 {
                pairs.push((s, theta));
            }
        }
        pairs
    };
    let simulate = |with_curves: bool, rows: &mut Vec<Row>, runs: &mut Vec<PointRun>, record: &mut PointSink| {
        for point in config.points() {
            let result = simulate_point(point, config, &pool).map(|run| {
                let mut out = Vec::new();
                maker.run_rows(&run, with_curves, &mut out);
                runs.push(run);
                out
            });
            record(point, result, rows);
        }
    };
    let pseudo = |s: f64, theta: f64| ParamPoint {
        sqrt_rho_a3: Some(s),
        n_atoms: None,
        t_over_mu: theta,
        n_max: 0,
    };
    match (config.kind, config.figure) {
        (ExperimentKind::Analytics, _) | (ExperimentKind::Figure, Some(3 | 5)) => {
            for (s, theta) in analytic_pairs() {
                record(
                    pseudo(s, theta),
                    analytic_rows(&maker, s, theta, &config.etas, config.shape),
                    &mut rows,
                );
            }
        }
        (ExperimentKind::Figure, Some(4)) => {
            for (s, theta) in analytic_pairs() {
                record(
                    pseudo(s, theta),
                    analytic_curve_rows(&maker, s, theta, &config.times()[1..]),
                    &mut rows,
                );
                record(
                    pseudo(s, theta),
                    analytic_rows(&maker, s, theta, &config.etas, config.shape),
                    &mut rows,
                );
            }
        }
        (ExperimentKind::Sample, _) => {
            let cache = SampleCache::from_env().unwrap_or_else(|| SampleCache::new(config.out_dir.join("cache")));
            for point in config.points() {
                record(point, sample_rows(&maker, point, config, &cache, &pool), &mut rows);
            }
        }
        (ExperimentKind::Sweep, _) | (ExperimentKind::Figure, Some(1 | 6 | 7)) => {
            simulate(false, &mut rows, &mut runs, &mut record);
            for (s, theta) in analytic_pairs() {
                record(
                    pseudo(s, theta),
                    analytic_rows(&maker, s, theta, &config.etas, config.shape),
                    &mut rows,
                );
            }
        }
        _ => {
            simulate(true, &mut rows, &mut runs, &mut record);
            for (s, theta) in analytic_pairs() {
                record(
                    pseudo(s, theta),
                    analytic_rows(&maker, s, theta, &config.etas, config.shape),
                    &mut rows,
                );
            }
        }
    }
    let mut tables: Vec<String> = Vec::new();
    for row in &rows {
        if !tables.contains(&row.table) {
            tables.push(row.table.clone());
        }
    }
    let manifest = Manifest {
        config: config.clone(),
        config_hash: hash.clone(),
        code_version: ANALYTICS_VERSION.to_string(),
        scale: "desk".to_string(),
        base_seed: config.base_seed,
        realizations: config.realizations,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        complete: failures.is_empty(),
        failures,
        tables,
    };
    Ok(OutputBundle { rows, manifest, runs })
}
