//! Mode sets: the discrete lattice spectrum or a continuum in healing units.
//!
//! Every quantity produced by the analytics is an average (1/N) Σ_{k≠0} f(E_k/ρg).
//! In the continuum, k is measured in units of 1/ξ_heal so that E_k/ρg = K² and
//! (1/N) Σ_k → √(ρa³) (8π)^{3/2}/(2π)³ ∫ d³K.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::model::{solve_cutoff_for_shape, BoxShape, Grid, ModelError, PhysicalParams};
use crate::quadrature::{self, QuadError, Tolerance};

/// Below this K the integrand is frozen at its value here.
const SMALL_K: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModeSet {
    /// Distinct values of E_k/ρg over k ≠ 0 with multiplicities.
    Lattice { spectrum: Vec<(f64, usize)>, n_atoms: f64 },
    /// All of ℝ³.
    Continuum { sqrt_rho_a3: f64 },
    /// The first Brillouin zone, half-widths in units of 1/ξ_heal.
    Zone { sqrt_rho_a3: f64, half_widths: [f64; 3] },
}

impl ModeSet {
    pub fn lattice(grid: &Grid, params: &PhysicalParams) -> Self {
        let spectrum = grid
            .kinetic_spectrum()
            .into_iter()
            .map(|(e, m)| (e / params.mu, m))
            .collect();
        ModeSet::Lattice {
            spectrum,
            n_atoms: params.n_atoms as f64,
        }
    }

    pub fn continuum(sqrt_rho_a3: f64) -> Self {
        ModeSet::Continuum { sqrt_rho_a3 }
    }

    /// Zone matched to the cutoff at k_BT/ρg; the result depends on √(ρa³)
    /// only through the prefactor.
    pub fn zone(sqrt_rho_a3: f64, t_over_mu: f64, shape: BoxShape) -> Result<Self, ModelError> {
        let cutoff = solve_cutoff_for_shape(shape, 1.0)?;
        // λ_dB/ξ_heal = (4π ρg/k_BT)^{1/2}.
        let lambda_over_xi = (4.0 * PI / t_over_mu).sqrt();
        let half_widths = cutoff.spacing_over_lambda.map(|r| PI / (r * lambda_over_xi));
        Ok(ModeSet::Zone {
            sqrt_rho_a3,
            half_widths,
        })
    }

    pub fn sqrt_rho_a3(&self) -> Option<f64> {
        match self {
            ModeSet::Lattice { .. } => None,
            ModeSet::Continuum { sqrt_rho_a3 } | ModeSet::Zone { sqrt_rho_a3, .. } => Some(*sqrt_rho_a3),
        }
    }

    /// (1/N) Σ_{k≠0} f(E_k/ρg).
    pub fn average<F: Fn(f64) -> f64>(&self, f: F, tol: Tolerance) -> Result<f64, QuadError> {
        match self {
            ModeSet::Lattice { spectrum, n_atoms } => {
                let sum: f64 = spectrum.iter().map(|&(e, m)| m as f64 * f(e)).sum();
                Ok(sum / n_atoms)
            }
            ModeSet::Continuum { sqrt_rho_a3 } => {
                let radial = quadrature::integrate_to_infinity(|k| radial_integrand(&f, k), 0.0, tol)?;
                Ok(continuum_prefactor(*sqrt_rho_a3) * 4.0 * PI * radial.value)
            }
            ModeSet::Zone {
                sqrt_rho_a3,
                half_widths,
            } => Ok(continuum_prefactor(*sqrt_rho_a3) * box_integral(&f, *half_widths, tol)?),
        }
    }

    /// Like [`ModeSet::average`], but in the unbounded continuum the integrand
    /// beyond `split` is called with `true` and may return a phase-averaged value.
    pub fn average_split<F: Fn(f64, bool) -> f64>(
        &self,
        f: F,
        split: Option<f64>,
        tol: Tolerance,
    ) -> Result<f64, QuadError> {
        match (self, split) {
            (ModeSet::Continuum { sqrt_rho_a3 }, Some(k_split)) => {
                let near = quadrature::integrate(|k| radial_integrand(&|e| f(e, false), k), 0.0, k_split, tol)?;
                let far = quadrature::integrate_to_infinity(|k| radial_integrand(&|e| f(e, true), k), k_split, tol)?;
                Ok(continuum_prefactor(*sqrt_rho_a3) * 4.0 * PI * (near.value + far.value))
            }
            _ => self.average(|e| f(e, false), tol),
        }
    }
}

/// √(ρa³) (8π)^{3/2}/(2π)³.
fn continuum_prefactor(sqrt_rho_a3: f64) -> f64 {
    sqrt_rho_a3 * (8.0 * PI).powf(1.5) / (2.0 * PI).powi(3)
}

fn radial_integrand<F: Fn(f64) -> f64>(f: &F, k: f64) -> f64 {
    let kk = k.max(SMALL_K);
    k * k * f(kk * kk)
}

/// Cumulative radial integral G(r) = ∫₀^r q² f(q²) dq on a uniform table,
/// interpolated by cubic Hermite with G' = r² f(r²).
struct RadialTable {
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl RadialTable {
    fn new<F: Fn(f64) -> f64>(f: &F, r_max: f64, intervals: usize, tol: Tolerance) -> Result<Self, QuadError> {
        let step = r_max / intervals as f64;
        let mut values = Vec::with_capacity(intervals + 1);
        let mut slopes = Vec::with_capacity(intervals + 1);
        let mut acc = 0.0;
        values.push(0.0);
        slopes.push(radial_integrand(f, 0.0));
        let piece_tol = Tolerance {
            abs: tol.abs / intervals as f64,
            ..tol
        };
        for i in 0..intervals {
            let (a, b) = (i as f64 * step, (i + 1) as f64 * step);
            acc += quadrature::integrate(|k| radial_integrand(f, k), a, b, piece_tol)?.value;
            values.push(acc);
            slopes.push(radial_integrand(f, b));
        }
        Ok(Self { step, values, slopes })
    }

    fn eval(&self, r: f64) -> f64 {
        let x = r / self.step;
        let i = (x.floor() as usize).min(self.values.len() - 2);
        let u = x - i as f64;
        let (g0, g1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * g0 + (u3 - 2.0 * u2 + u) * d0 + (-2.0 * u3 + 3.0 * u2) * g1 + (u3 - u2) * d1
    }
}

/// ∫ over the box of f(|K|²) d³K.
///
/// With G(r) = ∫₀^r q² f dq, the field K G(|K|)/|K|³ has divergence f, so the
/// volume integral becomes a sum of smooth face integrals of a G(r)/r³.
fn box_integral<F: Fn(f64) -> f64>(f: &F, half: [f64; 3], tol: Tolerance) -> Result<f64, QuadError> {
    let r_max = (half[0] * half[0] + half[1] * half[1] + half[2] * half[2]).sqrt();
    let table = RadialTable::new(f, r_max, 1024, tol)?;
    let face_tol = Tolerance::new(tol.abs * 1e-2, tol.rel * 1e-1);
    let mut total = 0.0;
    for axis in 0..3 {
        let a = half[axis];
        let b = half[(axis + 1) % 3];
        let c = half[(axis + 2) % 3];
        let outer = quadrature::integrate(
            |y| {
                let inner = quadrature::integrate(
                    |z| {
                        let r = (a * a + y * y + z * z).sqrt();
                        table.eval(r) / (r * r * r)
                    },
                    0.0,
                    c,
                    face_tol,
                );
                inner.map(|v| v.value).unwrap_or(f64::NAN)
            },
            0.0,
            b,
            face_tol,
        )?;
        // Two faces per axis, four quadrants per face.
        total += 8.0 * a * outer.value;
    }
    Ok(total)
}
