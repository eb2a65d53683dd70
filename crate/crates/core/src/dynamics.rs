//! Mixing pulse and split-step evolution of both components.

use num_complex::Complex64;
use thiserror::Error;

use crate::field::{FieldPair, GridDescriptor, Spectral};
use crate::model::Grid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite field value at step {step}")]
    NonFinite { step: u64 },
    #[error("time step must be finite and nonzero, got {0}")]
    BadStep(f64),
    #[error("field pair lives on a different grid")]
    GridMismatch,
}

/// ψ_a ← (ψ_a − ψ_b)/√2, ψ_b ← (ψ_a + ψ_b)/√2.
pub fn apply_pulse(pair: &mut FieldPair) {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for (a, b) in pair.psi_a.iter_mut().zip(pair.psi_b.iter_mut()) {
        let (old_a, old_b) = (*a, *b);
        *a = (old_a - old_b) * r;
        *b = (old_a + old_b) * r;
    }
}

/// H = Σ_k E_k |a_k|² + (g/2) Σ_r dV |ψ_r|⁴ for one component.
pub fn energy(grid: &Grid, coupling: f64, field: &[Complex64]) -> f64 {
    let descriptor = GridDescriptor::of(grid);
    let amps = Spectral::new(descriptor).amplitudes(field);
    let kinetic: f64 = amps
        .iter()
        .zip(grid.modes())
        .map(|(a, m)| m.kinetic * a.norm_sqr())
        .sum();
    let quartic: f64 = field.iter().map(|z| z.norm_sqr().powi(2)).sum();
    kinetic + 0.5 * coupling * grid.cell_volume * quartic
}

/// Strang splitting: half kinetic step in Fourier space, full nonlinear phase
/// in real space, half kinetic step. Both sub-flows are exact.
#[derive(Debug, Clone)]
pub struct Evolver {
    grid: GridDescriptor,
    coupling: f64,
    dt: f64,
    half_kinetic: Vec<Complex64>,
    max_kinetic: f64,
    fft: crate::field::Fft3,
    steps_taken: u64,
}

impl Evolver {
    pub fn new(grid: &Grid, coupling: f64, dt: f64) -> Result<Self, DynamicsError> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(DynamicsError::BadStep(dt));
        }
        let half_kinetic = grid
            .modes()
            .iter()
            .map(|m| Complex64::from_polar(1.0, -0.5 * m.kinetic * dt))
            .collect();
        Ok(Self {
            grid: GridDescriptor::of(grid),
            coupling,
            dt,
            half_kinetic,
            max_kinetic: grid.max_kinetic(),
            fft: crate::field::Fft3::new(grid.n_per_dir),
            steps_taken: 0,
        })
    }

    /// dt = 0.01 ħ / max(E_k^max, ρg).
    pub fn default_step(grid: &Grid, mu: f64) -> f64 {
        0.01 / grid.max_kinetic().max(mu)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// dt · max(E_k^max, g max|ψ|²).
    pub fn courant_number(&self, pair: &FieldPair) -> f64 {
        let peak = pair
            .psi_a
            .iter()
            .chain(&pair.psi_b)
            .map(|z| z.norm_sqr())
            .fold(0.0, f64::max);
        self.dt.abs() * self.max_kinetic.max(self.coupling * peak)
    }

    pub fn evolve(&mut self, pair: &mut FieldPair, n_steps: u64) -> Result<(), DynamicsError> {
        if pair.grid != self.grid {
            return Err(DynamicsError::GridMismatch);
        }
        let courant = self.courant_number(pair);
        if courant > 0.1 {
            log::warn!("time step above the stability guideline: dt·E_max = {courant:.3}");
        }
        let n = self.grid.points() as f64;
        for _ in 0..n_steps {
            self.steps_taken += 1;
            let mut density_sum = 0.0;
            for field in [&mut pair.psi_a, &mut pair.psi_b] {
                self.kinetic_half(field, n);
                let g_dt = self.coupling * self.dt;
                for z in field.iter_mut() {
                    let density = z.norm_sqr();
                    density_sum += density;
                    *z *= Complex64::from_polar(1.0, -g_dt * density);
                }
                self.kinetic_half(field, n);
            }
            if !density_sum.is_finite() {
                return Err(DynamicsError::NonFinite { step: self.steps_taken });
            }
            pair.time += self.dt;
        }
        Ok(())
    }

    fn kinetic_half(&mut self, field: &mut [Complex64], points: f64) {
        self.fft.forward(field);
        let inv = 1.0 / points;
        for (z, p) in field.iter_mut().zip(&self.half_kinetic) {
            *z *= p * inv;
        }
        self.fft.inverse(field);
    }
}
