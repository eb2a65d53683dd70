//! Initial fields: component a from the classical canonical ensemble at fixed
//! atom number, component b from Gaussian vacuum noise.
//!
//! The chain works on plane-wave amplitudes on the shell Σ_k |a_k|² = N with
//! the real-space field kept in step for the interaction energy. Three moves
//! are used: a unitary rotation mixing the zero mode with one other mode,
//! an independence proposal that redraws a (k, −k) pair from the Bogoliubov
//! Gaussian while the condensate absorbs the atom number change, and a free
//! rotation of the global phase.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{GridDescriptor, Spectral};
use crate::model::{Grid, PhysicalParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("energy became non-finite in sweep {sweep}")]
    NonFiniteEnergy { sweep: usize },
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("no condensate: thermal draws exceed the atom number {0}")]
    NoCondensate(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub burn_in_sweeps: usize,
    pub decorrelation_sweeps: usize,
    /// Rotation amplitude in units of the thermal amplitude of the target mode.
    pub rotation_step: f64,
    /// Rotation attempts per sweep; `None` means one per nonzero mode.
    pub rotations_per_sweep: Option<usize>,
    /// Redraw every (k, −k) pair once per sweep from the Bogoliubov Gaussian.
    pub pair_refresh: bool,
    /// Start from a Bogoliubov Gaussian draw instead of a pure condensate.
    pub warm_start: bool,
    pub acceptance_window: (f64, f64),
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            burn_in_sweeps: 1000,
            decorrelation_sweeps: 10,
            rotation_step: 1.0,
            rotations_per_sweep: None,
            pair_refresh: true,
            warm_start: true,
            acceptance_window: (0.2, 0.6),
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let (lo, hi) = self.acceptance_window;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(SamplerError::Config(format!(
                "acceptance window ({lo}, {hi}) not inside (0, 1)"
            )));
        }
        if !(self.rotation_step > 0.0 && self.rotation_step.is_finite()) {
            return Err(SamplerError::Config(format!(
                "rotation step {} must be positive",
                self.rotation_step
            )));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ThermalDiagnostics {
    /// Energy after every sweep.
    pub energy_trace: Vec<f64>,
    /// |a₀|²/N after every sweep.
    pub condensate_fraction_trace: Vec<f64>,
    pub rotation_acceptance: f64,
    pub refresh_acceptance: f64,
    /// Integrated autocorrelation time of the energy, in sweeps.
    pub autocorrelation_time: f64,
    /// The autocorrelation times of the two halves of the trace agree to 20%.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalSample {
    pub field: Vec<Complex64>,
    pub diagnostics: ThermalDiagnostics,
}

/// A redraw unit: a (k, −k) pair, or a mode that is its own aliased partner.
#[derive(Debug, Clone, Copy)]
enum Unit {
    Pair {
        k: usize,
        p: usize,
        u: f64,
        v: f64,
        eps: f64,
    },
    Single {
        k: usize,
        stiffness: f64,
    },
}

#[derive(Debug, Clone, Copy, Default)]
struct Counter {
    tried: u64,
    accepted: u64,
}

impl Counter {
    fn rate(&self) -> f64 {
        if self.tried == 0 {
            0.0
        } else {
            self.accepted as f64 / self.tried as f64
        }
    }
}

/// Markov chain on the fixed-N shell for component a.
#[derive(Debug, Clone)]
pub struct ThermalChain {
    config: SamplerConfig,
    n: usize,
    indices: Vec<[i32; 3]>,
    kinetic: Vec<f64>,
    /// Thermal amplitude √(k_BT/(E_k + ρg)) per mode.
    thermal_amplitude: Vec<f64>,
    units: Vec<Unit>,
    coupling: f64,
    kbt: f64,
    n_atoms: f64,
    cell_volume: f64,
    inv_sqrt_volume: f64,
    roots: Vec<Complex64>,
    amps: Vec<Complex64>,
    psi: Vec<Complex64>,
    trial: Vec<Complex64>,
    spectral: Spectral,
    energy: f64,
    sweeps: usize,
    rotations: Counter,
    refreshes: Counter,
    energy_trace: Vec<f64>,
    condensate_trace: Vec<f64>,
}

impl ThermalChain {
    pub fn new<R: Rng + ?Sized>(
        grid: &Grid,
        params: &PhysicalParams,
        config: SamplerConfig,
        rng: &mut R,
    ) -> Result<Self, SamplerError> {
        config.validate()?;
        if params.kbt.is_nan() || params.kbt <= 0.0 {
            return Err(SamplerError::Config(format!(
                "temperature {} must be positive",
                params.kbt
            )));
        }
        let n = grid.n_per_dir;
        let n_atoms = params.n_atoms as f64;
        let mean_field = params.coupling * n_atoms / grid.volume;
        let modes = grid.modes();
        let kinetic: Vec<f64> = modes.iter().map(|m| m.kinetic).collect();
        let thermal_amplitude = kinetic
            .iter()
            .map(|&e| (params.kbt / (e + mean_field)).sqrt())
            .collect();
        let mut units = Vec::new();
        for (k, mode) in modes.iter().enumerate().skip(1) {
            let p = mode.partner;
            if p == k {
                units.push(Unit::Single {
                    k,
                    stiffness: (mode.kinetic + mean_field) / params.kbt,
                });
            } else if k < p {
                let e = mode.kinetic;
                let (u, v, eps) = if mean_field > 0.0 {
                    let s = (e / (e + 2.0 * mean_field)).sqrt().sqrt();
                    (
                        0.5 * (s + 1.0 / s),
                        0.5 * (s - 1.0 / s),
                        (e * (e + 2.0 * mean_field)).sqrt(),
                    )
                } else {
                    (1.0, 0.0, e)
                };
                units.push(Unit::Pair { k, p, u, v, eps });
            }
        }
        let descriptor = GridDescriptor::of(grid);
        let points = descriptor.points();
        let mut chain = Self {
            config,
            n,
            indices: modes.iter().map(|m| m.index).collect(),
            kinetic,
            thermal_amplitude,
            units,
            coupling: params.coupling,
            kbt: params.kbt,
            n_atoms,
            cell_volume: grid.cell_volume,
            inv_sqrt_volume: 1.0 / grid.volume.sqrt(),
            roots: (0..n)
                .map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64))
                .collect(),
            amps: vec![Complex64::default(); points],
            psi: vec![Complex64::default(); points],
            trial: vec![Complex64::default(); points],
            spectral: Spectral::new(descriptor),
            energy: 0.0,
            sweeps: 0,
            rotations: Counter::default(),
            refreshes: Counter::default(),
            energy_trace: Vec::new(),
            condensate_trace: Vec::new(),
        };
        if chain.config.warm_start {
            chain.warm_start(rng)?;
        } else {
            chain.amps[0] = Complex64::new(n_atoms.sqrt(), 0.0);
        }
        chain.resync()?;
        Ok(chain)
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn field(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn condensate_fraction(&self) -> f64 {
        self.amps[0].norm_sqr() / self.n_atoms
    }

    fn warm_start<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), SamplerError> {
        let phase = Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI);
        for _ in 0..100 {
            let mut excited = 0.0;
            for unit in self.units.clone() {
                match unit {
                    Unit::Pair { k, p, u, v, eps } => {
                        let sigma = (self.kbt / eps).sqrt();
                        let (ck, cp) = (gaussian(rng, sigma), gaussian(rng, sigma));
                        self.amps[k] = phase * (u * ck + v * cp.conj());
                        self.amps[p] = phase * (u * cp + v * ck.conj());
                        excited += self.amps[k].norm_sqr() + self.amps[p].norm_sqr();
                    }
                    Unit::Single { k, stiffness } => {
                        self.amps[k] = gaussian(rng, stiffness.recip().sqrt());
                        excited += self.amps[k].norm_sqr();
                    }
                }
            }
            if excited < self.n_atoms {
                self.amps[0] = phase * (self.n_atoms - excited).sqrt();
                return Ok(());
            }
        }
        Err(SamplerError::NoCondensate(self.n_atoms))
    }

    /// Rebuilds the field from the amplitudes, restores the exact norm and
    /// recomputes the energy.
    fn resync(&mut self) -> Result<(), SamplerError> {
        let total: f64 = self.amps.iter().map(|z| z.norm_sqr()).sum();
        let scale = (self.n_atoms / total).sqrt();
        self.amps.iter_mut().for_each(|z| *z *= scale);
        self.psi.copy_from_slice(&self.amps);
        self.spectral.field_in_place(&mut self.psi);
        let kinetic: f64 = self.amps.iter().zip(&self.kinetic).map(|(a, e)| e * a.norm_sqr()).sum();
        let quartic: f64 = self.psi.iter().map(|z| z.norm_sqr().powi(2)).sum();
        self.energy = kinetic + 0.5 * self.coupling * self.cell_volume * quartic;
        if !self.energy.is_finite() {
            return Err(SamplerError::NonFiniteEnergy { sweep: self.sweeps });
        }
        Ok(())
    }

    /// Writes ψ + δψ into the trial buffer and returns the interaction energy change.
    fn propose(&mut self, changes: &[(usize, Complex64)]) -> f64 {
        let n = self.n;
        let mut tables: Vec<[Vec<Complex64>; 3]> = Vec::with_capacity(changes.len());
        for &(mode, delta) in changes {
            let idx = self.indices[mode];
            let axis = |d: usize| -> Vec<Complex64> {
                (0..n)
                    .map(|i| self.roots[(idx[d] as i64 * i as i64).rem_euclid(n as i64) as usize])
                    .collect()
            };
            let mut x = axis(0);
            x.iter_mut().for_each(|z| *z *= delta * self.inv_sqrt_volume);
            tables.push([x, axis(1), axis(2)]);
        }
        let mut partial = vec![Complex64::default(); changes.len()];
        let mut quartic_change = 0.0;
        for ix in 0..n {
            for iy in 0..n {
                for (slot, t) in partial.iter_mut().zip(&tables) {
                    *slot = t[0][ix] * t[1][iy];
                }
                let row = (ix * n + iy) * n;
                for iz in 0..n {
                    let mut delta = Complex64::default();
                    for (slot, t) in partial.iter().zip(&tables) {
                        delta += slot * t[2][iz];
                    }
                    let old = self.psi[row + iz];
                    let new = old + delta;
                    self.trial[row + iz] = new;
                    let (d_old, d_new) = (old.norm_sqr(), new.norm_sqr());
                    quartic_change += (d_new - d_old) * (d_new + d_old);
                }
            }
        }
        0.5 * self.coupling * self.cell_volume * quartic_change
    }

    fn kinetic_change(&self, changes: &[(usize, Complex64)]) -> f64 {
        changes
            .iter()
            .map(|&(m, d)| {
                let old = self.amps[m];
                self.kinetic[m] * ((old + d).norm_sqr() - old.norm_sqr())
            })
            .sum()
    }

    /// Metropolis–Hastings step with log proposal ratio `log_q_ratio`.
    fn attempt<R: Rng + ?Sized>(&mut self, changes: &[(usize, Complex64)], log_q_ratio: f64, rng: &mut R) -> bool {
        let delta_h = self.kinetic_change(changes) + self.propose(changes);
        let log_accept = -delta_h / self.kbt + log_q_ratio;
        let accept = log_accept >= 0.0 || rng.random::<f64>() < log_accept.exp();
        if accept {
            for &(m, d) in changes {
                self.amps[m] += d;
            }
            std::mem::swap(&mut self.psi, &mut self.trial);
            self.energy += delta_h;
        }
        accept
    }

    fn rotate<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let points = self.amps.len();
        let k = rng.random_range(1..points);
        let scale = self.config.rotation_step * self.thermal_amplitude[k] / self.n_atoms.sqrt();
        let alpha = scale * (2.0 * rng.random::<f64>() - 1.0);
        let mixing = Complex64::from_polar(alpha.sin(), rng.random::<f64>() * 2.0 * PI);
        let c = alpha.cos();
        let (a0, ak) = (self.amps[0], self.amps[k]);
        let new0 = c * a0 - mixing.conj() * ak;
        let newk = mixing * a0 + c * ak;
        let accepted = self.attempt(&[(0, new0 - a0), (k, newk - ak)], 0.0, rng);
        self.rotations.tried += 1;
        self.rotations.accepted += accepted as u64;
    }

    fn refresh<R: Rng + ?Sized>(&mut self, unit: Unit, rng: &mut R) {
        let a0 = self.amps[0];
        let phase = if a0.norm_sqr() > 0.0 {
            a0 / a0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let (changes, log_q_ratio, moved) = match unit {
            Unit::Pair { k, p, u, v, eps } => {
                let sigma = (self.kbt / eps).sqrt();
                let (ck, cp) = (gaussian(rng, sigma), gaussian(rng, sigma));
                let new_k = phase * (u * ck + v * cp.conj());
                let new_p = phase * (u * cp + v * ck.conj());
                let (old_k, old_p) = (self.amps[k] * phase.conj(), self.amps[p] * phase.conj());
                let old_ck = u * old_k - v * old_p.conj();
                let old_cp = u * old_p - v * old_k.conj();
                let weight = |a: Complex64, b: Complex64| a.norm_sqr() + b.norm_sqr();
                let log_q = eps / self.kbt * (weight(ck, cp) - weight(old_ck, old_cp));
                let moved = weight(new_k, new_p) - weight(self.amps[k], self.amps[p]);
                (vec![(k, new_k - self.amps[k]), (p, new_p - self.amps[p])], log_q, moved)
            }
            Unit::Single { k, stiffness } => {
                let new_k = gaussian(rng, stiffness.recip().sqrt());
                let log_q = stiffness * (new_k.norm_sqr() - self.amps[k].norm_sqr());
                let moved = new_k.norm_sqr() - self.amps[k].norm_sqr();
                (vec![(k, new_k - self.amps[k])], log_q, moved)
            }
        };
        self.refreshes.tried += 1;
        let condensate = a0.norm_sqr() - moved;
        if condensate <= 0.0 {
            return;
        }
        let mut changes = changes;
        changes.push((0, phase * condensate.sqrt() - a0));
        let accepted = self.attempt(&changes, log_q_ratio, rng);
        self.refreshes.accepted += accepted as u64;
    }

    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), SamplerError> {
        if self.config.pair_refresh {
            for i in 0..self.units.len() {
                let unit = self.units[i];
                self.refresh(unit, rng);
            }
        }
        let rotations = self.config.rotations_per_sweep.unwrap_or(self.amps.len() - 1);
        for _ in 0..rotations {
            self.rotate(rng);
        }
        let global = Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI);
        self.amps.iter_mut().for_each(|z| *z *= global);
        self.sweeps += 1;
        self.resync()?;
        self.energy_trace.push(self.energy);
        self.condensate_trace.push(self.condensate_fraction());
        Ok(())
    }

    pub fn run<R: Rng + ?Sized>(&mut self, sweeps: usize, rng: &mut R) -> Result<(), SamplerError> {
        for _ in 0..sweeps {
            self.sweep(rng)?;
        }
        Ok(())
    }

    /// Runs the decorrelation sweeps and returns the current field.
    pub fn next_sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<Complex64>, SamplerError> {
        self.run(self.config.decorrelation_sweeps.max(1), rng)?;
        Ok(self.psi.clone())
    }

    pub fn diagnostics(&self) -> ThermalDiagnostics {
        let trace = &self.energy_trace;
        let tau = integrated_autocorrelation(trace);
        let half = trace.len() / 2;
        let converged = half >= 8 && {
            let (t1, t2) = (
                integrated_autocorrelation(&trace[..half]),
                integrated_autocorrelation(&trace[half..]),
            );
            (t1 - t2).abs() <= 0.2 * t1.max(t2)
        };
        ThermalDiagnostics {
            energy_trace: trace.clone(),
            condensate_fraction_trace: self.condensate_trace.clone(),
            rotation_acceptance: self.rotations.rate(),
            refresh_acceptance: self.refreshes.rate(),
            autocorrelation_time: tau,
            converged,
        }
    }

    fn reset_counters(&mut self) {
        self.rotations = Counter::default();
        self.refreshes = Counter::default();
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Complex64 {
    let scale = sigma * std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(scale * re, scale * im)
}

/// Sokal's windowed estimate τ = ½ + Σ_{t≤W} ρ(t), W the first lag with W ≥ 5τ.
pub fn integrated_autocorrelation(trace: &[f64]) -> f64 {
    let len = trace.len();
    if len < 4 {
        return 0.5;
    }
    let mean = trace.iter().sum::<f64>() / len as f64;
    let centered: Vec<f64> = trace.iter().map(|x| x - mean).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / len as f64;
    if c0 <= 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for lag in 1..len / 2 {
        let c: f64 = centered[..len - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / len as f64;
        tau += c / c0;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// Draws ψ_a after the configured burn-in.
pub fn sample_thermal_field<R: Rng + ?Sized>(
    grid: &Grid,
    params: &PhysicalParams,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<ThermalSample, SamplerError> {
    let mut chain = ThermalChain::new(grid, params, config.clone(), rng)?;
    chain.run(config.burn_in_sweeps, rng)?;
    let diagnostics = chain.diagnostics();
    let (lo, hi) = config.acceptance_window;
    let rate = diagnostics.rotation_acceptance;
    if chain.rotations.tried > 0 && !(lo..=hi).contains(&rate) {
        log::warn!("rotation acceptance {rate:.3} outside [{lo}, {hi}]");
    }
    Ok(ThermalSample {
        field: chain.psi,
        diagnostics,
    })
}

/// Vacuum noise for component b: every amplitude is X + iY with X, Y
/// independent of variance 1/4.
pub fn sample_vacuum_field<R: Rng + ?Sized>(grid: &Grid, rng: &mut R) -> Vec<Complex64> {
    let descriptor = GridDescriptor::of(grid);
    let amps: Vec<Complex64> = (0..descriptor.points())
        .map(|_| gaussian(rng, std::f64::consts::FRAC_1_SQRT_2))
        .collect();
    Spectral::new(descriptor).field(&amps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub rounds: usize,
    pub acceptance: f64,
    pub within_window: bool,
}

/// Rescales the rotation step until the rotation acceptance falls inside the
/// target window.
pub fn tune_proposals<R: Rng + ?Sized>(
    grid: &Grid,
    params: &PhysicalParams,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<(SamplerConfig, TuneReport), SamplerError> {
    const ROUNDS: usize = 30;
    const SWEEPS_PER_ROUND: usize = 4;
    let mut chain = ThermalChain::new(grid, params, config.clone(), rng)?;
    if chain.config.rotations_per_sweep == Some(0) {
        return Ok((
            config.clone(),
            TuneReport {
                rounds: 0,
                acceptance: 0.0,
                within_window: true,
            },
        ));
    }
    let (lo, hi) = config.acceptance_window;
    let target = 0.5 * (lo + hi);
    let mut acceptance = 0.0;
    for round in 1..=ROUNDS {
        chain.reset_counters();
        chain.run(SWEEPS_PER_ROUND, rng)?;
        acceptance = chain.rotations.rate();
        if (lo..=hi).contains(&acceptance) {
            return Ok((
                chain.config,
                TuneReport {
                    rounds: round,
                    acceptance,
                    within_window: true,
                },
            ));
        }
        let factor = if acceptance < lo {
            (acceptance / target).clamp(0.25, 0.8)
        } else {
            ((1.0 - target) / (1.0 - acceptance).max(1e-3)).clamp(1.25, 4.0)
        };
        chain.config.rotation_step *= factor;
    }
    log::warn!("rotation step not tuned after {ROUNDS} rounds, acceptance {acceptance:.3}");
    Ok((
        chain.config,
        TuneReport {
            rounds: ROUNDS,
            acceptance,
            within_window: false,
        },
    ))
}

/// Measures the rotation acceptance of a config over `sweeps` sweeps.
pub fn rotation_acceptance<R: Rng + ?Sized>(
    grid: &Grid,
    params: &PhysicalParams,
    config: &SamplerConfig,
    sweeps: usize,
    rng: &mut R,
) -> Result<f64, SamplerError> {
    let mut chain = ThermalChain::new(grid, params, config.clone(), rng)?;
    chain.run(sweeps, rng)?;
    Ok(chain.rotations.rate())
}
