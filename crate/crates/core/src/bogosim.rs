//! Squeezing dynamics of sampled fields in the Bogoliubov approximation.
//!
//! Each realization is projected once onto the Bogoliubov modes after the
//! pulse. Quasi-particle amplitudes then evolve by pure phases and each
//! condensate phase by its non-oscillating drift, so a whole curve costs one
//! projection plus O(modes) work per time.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bogoliubov::Stage;
use crate::field::{FieldPair, GridDescriptor, Spectral};
use crate::model::{Grid, PhysicalParams};
use crate::observables::{ObservablesError, SpinSample, SqueezingCurve};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BogosimError {
    #[error("condensate of component {component} holds {fraction:.2e} of its atoms")]
    VanishingCondensate { component: char, fraction: f64 },
    #[error("field pair lives on a different grid")]
    GridMismatch,
    #[error(transparent)]
    Observables(#[from] ObservablesError),
}

/// Condensate fraction below which a projection is rejected.
pub const MIN_CONDENSATE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
struct BasisMode {
    partner: usize,
    u: f64,
    v: f64,
    eps: f64,
    /// (U + V)².
    s_sq: f64,
}

/// Bogoliubov modes of the grid for a given mean field. Zone-edge modes pair
/// with their aliased partner, which may be the mode itself; the zero mode
/// carries no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovBasis {
    grid: GridDescriptor,
    modes: Vec<Option<BasisMode>>,
    /// g/V.
    chi: f64,
}

impl BogoliubovBasis {
    /// Basis for mean field ρg before the pulse, or ρg/2 after it.
    pub fn new(grid: &Grid, params: &PhysicalParams, stage: Stage) -> Self {
        let mean_field = match stage {
            Stage::BeforePulse => params.mu,
            Stage::AfterPulse => 0.5 * params.mu,
        };
        let modes = grid
            .modes()
            .iter()
            .enumerate()
            .map(|(i, m)| {
                if i == 0 {
                    return None;
                }
                let e = m.kinetic;
                let s = (e / (e + 2.0 * mean_field)).sqrt().sqrt();
                Some(BasisMode {
                    partner: m.partner,
                    u: 0.5 * (s + 1.0 / s),
                    v: 0.5 * (s - 1.0 / s),
                    eps: (e * (e + 2.0 * mean_field)).sqrt(),
                    s_sq: s * s,
                })
            })
            .collect();
        Self {
            grid: GridDescriptor::of(grid),
            modes,
            chi: params.coupling / grid.volume,
        }
    }

    pub fn energy(&self, index: usize) -> Option<f64> {
        self.modes[index].map(|m| m.eps)
    }

    pub fn len(&self) -> usize {
        self.modes.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One component in the condensate frame: phase, total number and
/// quasi-particle amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentState {
    pub theta: f64,
    pub number: f64,
    /// c_k on the grid's flat order; zero for the zero mode.
    pub quasi: Vec<Complex64>,
}

impl ComponentState {
    /// c_k = U e^{−iθ} a_k − V (e^{−iθ} a_{−k})*, θ the phase of a₀.
    pub fn project(amps: &[Complex64], basis: &BogoliubovBasis) -> (Self, f64) {
        let number: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let a0 = amps[0];
        let theta = a0.arg();
        let rotate = Complex64::from_polar(1.0, -theta);
        let mut quasi = vec![Complex64::default(); amps.len()];
        for (i, m) in basis.modes.iter().enumerate() {
            if let Some(m) = m {
                quasi[i] = m.u * rotate * amps[i] - m.v * (rotate * amps[m.partner]).conj();
            }
        }
        let fraction = if number > 0.0 { a0.norm_sqr() / number } else { 0.0 };
        (Self { theta, number, quasi }, fraction)
    }

    /// Amplitudes e^{−iθ} a_k of the non-condensed field at time t.
    fn lambda(&self, basis: &BogoliubovBasis, t: f64) -> Vec<Complex64> {
        let evolved: Vec<Complex64> = self
            .quasi
            .iter()
            .zip(&basis.modes)
            .map(|(c, m)| m.map_or(Complex64::default(), |m| c * Complex64::from_polar(1.0, -m.eps * t)))
            .collect();
        basis
            .modes
            .iter()
            .enumerate()
            .map(|(i, m)| {
                m.map_or(Complex64::default(), |m| {
                    m.u * evolved[i] + m.v * evolved[m.partner].conj()
                })
            })
            .collect()
    }

    /// Σ_k (U_k + V_k)² |c_k|².
    pub fn weighted_quasi_number(&self, basis: &BogoliubovBasis) -> f64 {
        self.quasi
            .iter()
            .zip(&basis.modes)
            .map(|(c, m)| m.map_or(0.0, |m| m.s_sq * c.norm_sqr()))
            .sum()
    }

    /// Condensate phase at time t; the oscillating pair terms are optional.
    fn phase(&self, basis: &BogoliubovBasis, t: f64, oscillating: bool) -> f64 {
        let mut drift = self.number + self.weighted_quasi_number(basis);
        if oscillating && t != 0.0 {
            // ∫₀ᵗ Re(c_k c_{−k} e^{−2iεt'}) dt' = Re(c_k c_{−k} (1 − e^{−2iεt})/(2iε)).
            let pairs: f64 = basis
                .modes
                .iter()
                .enumerate()
                .filter_map(|(i, m)| m.map(|m| (i, m)))
                .map(|(i, m)| {
                    let pair = self.quasi[i] * self.quasi[m.partner];
                    let factor = (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -2.0 * m.eps * t))
                        / Complex64::new(0.0, 2.0 * m.eps);
                    m.s_sq * (pair * factor).re
                })
                .sum();
            drift += pairs / t;
        }
        self.theta - basis.chi * t * drift
    }
}

/// A realization in quasi-particle form.
#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovState {
    pub a: ComponentState,
    pub b: ComponentState,
    pub seed: u64,
}

/// Projects a field pair taken just after the pulse.
pub fn project_to_bogoliubov(
    pair: &FieldPair,
    basis: &BogoliubovBasis,
    spectral: &mut Spectral,
) -> Result<BogoliubovState, BogosimError> {
    if pair.grid != basis.grid {
        return Err(BogosimError::GridMismatch);
    }
    let mut component = |field: &[Complex64], name: char| {
        let amps = spectral.amplitudes(field);
        let (state, fraction) = ComponentState::project(&amps, basis);
        if fraction < MIN_CONDENSATE_FRACTION {
            return Err(BogosimError::VanishingCondensate {
                component: name,
                fraction,
            });
        }
        Ok(state)
    };
    Ok(BogoliubovState {
        a: component(&pair.psi_a, 'a')?,
        b: component(&pair.psi_b, 'b')?,
        seed: pair.seed,
    })
}

/// Quantities of one realization at time t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolvedPoint {
    pub time: f64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub condensate_a: f64,
    pub condensate_b: f64,
    pub spin: SpinSample,
}

impl BogoliubovState {
    /// D = Σ_k (U_k + V_k)² (|c_{ak}|² − |c_{bk}|²); constant in time.
    pub fn d_value(&self, basis: &BogoliubovBasis) -> f64 {
        self.a.weighted_quasi_number(basis) - self.b.weighted_quasi_number(basis)
    }

    pub fn evolve(&self, basis: &BogoliubovBasis, t: f64, oscillating: bool) -> EvolvedPoint {
        let lambda_a = self.a.lambda(basis, t);
        let lambda_b = self.b.lambda(basis, t);
        let non_condensed = |l: &[Complex64]| l.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let condensate_a = (self.a.number - non_condensed(&lambda_a)).max(0.0);
        let condensate_b = (self.b.number - non_condensed(&lambda_b)).max(0.0);
        let theta_a = self.a.phase(basis, t, oscillating);
        let theta_b = self.b.phase(basis, t, oscillating);
        let overlap: Complex64 = lambda_a.iter().zip(&lambda_b).map(|(x, y)| x.conj() * y).sum();
        let relative = Complex64::from_polar(1.0, -(theta_a - theta_b));
        let s_plus = relative * ((condensate_a * condensate_b).sqrt() + overlap);
        let a0 = Complex64::from_polar(condensate_a.sqrt(), theta_a);
        let b0 = Complex64::from_polar(condensate_b.sqrt(), theta_b);
        EvolvedPoint {
            time: t,
            theta_a,
            theta_b,
            condensate_a,
            condensate_b,
            spin: SpinSample::from_parts(s_plus, self.a.number, self.b.number, a0, b0),
        }
    }

    /// Field pair rebuilt from the state at t = 0⁺.
    pub fn to_field_pair(&self, basis: &BogoliubovBasis, spectral: &mut Spectral) -> FieldPair {
        let mut rebuild = |c: &ComponentState| {
            let mut amps = c.lambda(basis, 0.0);
            let n0 = (c.number - amps.iter().map(|z| z.norm_sqr()).sum::<f64>()).max(0.0);
            amps[0] = Complex64::new(n0.sqrt(), 0.0);
            let phase = Complex64::from_polar(1.0, c.theta);
            amps.iter_mut().for_each(|z| *z *= phase);
            spectral.field(&amps)
        };
        let psi_a = rebuild(&self.a);
        let psi_b = rebuild(&self.b);
        FieldPair::new(basis.grid, psi_a, psi_b, self.seed)
    }
}

/// ξ²(t) and ξ₀²(t) over an ensemble of projected realizations.
pub fn reconstruct_squeezing(
    states: &[BogoliubovState],
    basis: &BogoliubovBasis,
    times: &[f64],
    n_atoms: f64,
    oscillating: bool,
) -> Result<SqueezingCurve, BogosimError> {
    let per_time: Vec<Vec<SpinSample>> = times
        .iter()
        .map(|&t| states.iter().map(|s| s.evolve(basis, t, oscillating).spin).collect())
        .collect();
    Ok(SqueezingCurve::from_samples(times, &per_time, n_atoms)?)
}
