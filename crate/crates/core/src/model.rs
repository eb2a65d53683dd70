//! Physical parameters, the periodic lattice and its momentum cutoff.
//!
//! Units are ħ = m = 1 throughout. Energies are absolute simulation energies
//! unless a name says otherwise (`*_over_mu`, `*_over_kt`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{self, QuadError, Tolerance};

/// ζ(3/2).
pub const ZETA_3_2: f64 = 2.612_375_348_685_488;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative and finite, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("at least two atoms are required, got {0}")]
    TooFewAtoms(u64),
    #[error("points per direction must be even and at least 2, got {0}")]
    BadGridSize(usize),
    #[error("cutoff equation not solved: {0}")]
    Cutoff(#[from] QuadError),
    #[error("cutoff defect {0:e} exceeds tolerance")]
    CutoffDefect(f64),
    #[error("a lattice-matched setup needs a positive temperature")]
    ZeroTemperatureLattice,
}

fn positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::NonPositive { name, value })
    }
}

/// Dimensionless control pair plus every derived scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// √(ρa³).
    pub sqrt_rho_a3: f64,
    /// k_BT/ρg.
    pub t_over_mu: f64,
    pub n_atoms: u64,
    pub volume: f64,
    pub density: f64,
    pub scattering_length: f64,
    /// Effective coupling g = 4πa.
    pub coupling: f64,
    /// Mean-field energy ρg.
    pub mu: f64,
    pub kbt: f64,
    pub healing_length: f64,
    /// Thermal de Broglie wavelength; infinite at T = 0.
    pub thermal_wavelength: f64,
    /// Twisting rate g/V.
    pub chi: f64,
    pub sound_speed: f64,
    pub eps_size: f64,
    /// Non-condensed fraction, filled in once analytics have run.
    pub eps_bog: Option<f64>,
}

/// Parameters in the unit volume.
pub fn derive_params(sqrt_rho_a3: f64, t_over_mu: f64, n_atoms: u64) -> Result<PhysicalParams, ModelError> {
    derive_params_in_volume(sqrt_rho_a3, t_over_mu, n_atoms, 1.0)
}

pub fn derive_params_in_volume(
    sqrt_rho_a3: f64,
    t_over_mu: f64,
    n_atoms: u64,
    volume: f64,
) -> Result<PhysicalParams, ModelError> {
    positive("sqrt_rho_a3", sqrt_rho_a3)?;
    positive("volume", volume)?;
    if !(t_over_mu >= 0.0 && t_over_mu.is_finite()) {
        return Err(ModelError::Negative {
            name: "t_over_mu",
            value: t_over_mu,
        });
    }
    if n_atoms < 2 {
        return Err(ModelError::TooFewAtoms(n_atoms));
    }
    let density = n_atoms as f64 / volume;
    let scattering_length = (sqrt_rho_a3 * sqrt_rho_a3 / density).cbrt();
    let coupling = 4.0 * PI * scattering_length;
    let mu = density * coupling;
    let kbt = t_over_mu * mu;
    Ok(PhysicalParams {
        sqrt_rho_a3,
        t_over_mu,
        n_atoms,
        volume,
        density,
        scattering_length,
        coupling,
        mu,
        kbt,
        healing_length: 1.0 / (2.0 * mu).sqrt(),
        thermal_wavelength: thermal_wavelength(kbt),
        chi: coupling / volume,
        sound_speed: mu.sqrt(),
        eps_size: 1.0 / n_atoms as f64,
        eps_bog: None,
    })
}

/// Rebuilds the dimensionless description from (ρ, g, k_BT) and a volume.
/// The atom number is rounded to the nearest integer.
pub fn from_physical(density: f64, coupling: f64, kbt: f64, volume: f64) -> Result<PhysicalParams, ModelError> {
    positive("density", density)?;
    positive("coupling", coupling)?;
    let a = coupling / (4.0 * PI);
    let sqrt_rho_a3 = (density * a * a * a).sqrt();
    let t_over_mu = kbt / (density * coupling);
    let n = (density * volume).round() as u64;
    derive_params_in_volume(sqrt_rho_a3, t_over_mu, n, volume)
}

/// λ_dB = (2π/k_BT)^{1/2}.
pub fn thermal_wavelength(kbt: f64) -> f64 {
    if kbt > 0.0 {
        (2.0 * PI / kbt).sqrt()
    } else {
        f64::INFINITY
    }
}

/// Box geometry. Aspect lengths are normalised to unit geometric mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoxShape {
    #[default]
    Cubic,
    /// L_x² : L_y² : L_z² = √2 : golden ratio : √3.
    Incommensurate,
}

impl BoxShape {
    pub fn aspect(self) -> [f64; 3] {
        match self {
            BoxShape::Cubic => [1.0; 3],
            BoxShape::Incommensurate => {
                let squares = [2f64.sqrt(), (1.0 + 5f64.sqrt()) / 2.0, 3f64.sqrt()];
                let lengths = squares.map(f64::sqrt);
                let mean = (lengths[0] * lengths[1] * lengths[2]).cbrt();
                lengths.map(|l| l / mean)
            }
        }
    }
}

/// ∫ d³k / k² over the box [−h_x, h_x] × [−h_y, h_y] × [−h_z, h_z].
///
/// Gauss's theorem with ∇·(k/k²) = 1/k² turns the volume integral into face
/// integrals, and the inner face direction integrates to an arctangent.
pub fn box_inverse_square_integral(half_widths: [f64; 3]) -> Result<f64, QuadError> {
    let mut total = 0.0;
    for axis in 0..3 {
        let a = half_widths[axis];
        let b = half_widths[(axis + 1) % 3];
        let c = half_widths[(axis + 2) % 3];
        let face = quadrature::integrate(
            |y: f64| {
                let q = (a * a + y * y).sqrt();
                2.0 * (c / q).atan() / q
            },
            0.0,
            b,
            Tolerance::new(1e-15, 1e-13),
        )?;
        // Two opposite faces, and the y integral is even.
        total += 2.0 * a * 2.0 * face.value;
    }
    Ok(total)
}

/// Ideal-gas density at the condensation point, ∫ d³k/(2π)³ [e^{E_k/k_BT} − 1]^{-1},
/// computed radially.
pub fn critical_density(kbt: f64) -> Result<f64, QuadError> {
    // k = √(2 k_BT)·x.
    let scale = (2.0 * kbt).sqrt();
    let integrand = |x: f64| {
        if x == 0.0 {
            return 1.0;
        }
        let x2 = x * x;
        x2 / x2.exp_m1()
    };
    let radial = quadrature::integrate_to_infinity(integrand, 0.0, Tolerance::new(1e-15, 1e-13))?;
    Ok(4.0 * PI * scale.powi(3) * radial.value / (2.0 * PI).powi(3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSolution {
    pub spacings: [f64; 3],
    pub spacing_over_lambda: [f64; 3],
    /// Largest kinetic energy on the lattice (the FBZ corner) over k_BT.
    pub emax_over_kt: f64,
    /// Relative defect of the cutoff equation at the root.
    pub defect: f64,
}

/// Lattice spacings for which the classical-field equipartition density
/// in the first Brillouin zone equals ζ(3/2)/λ_dB³, for a cubic cell.
pub fn solve_cutoff(temperature: f64) -> Result<CutoffSolution, ModelError> {
    solve_cutoff_for_shape(BoxShape::Cubic, temperature)
}

/// Same as [`solve_cutoff`] with spacings l_ν = scale · aspect_ν.
pub fn solve_cutoff_for_shape(shape: BoxShape, temperature: f64) -> Result<CutoffSolution, ModelError> {
    positive("temperature", temperature)?;
    let aspect = shape.aspect();
    let lambda = thermal_wavelength(temperature);
    let target = ZETA_3_2 / lambda.powi(3);
    // J(π/l) is homogeneous of degree one, so J(π/(s·α)) = (π/s) J(1/α).
    let unit = box_inverse_square_integral(aspect.map(|a| 1.0 / a))?;
    let rhs = |scale: f64| 2.0 * temperature * (PI / scale) * unit / (2.0 * PI).powi(3);
    let defect = |log_scale: f64| (rhs(log_scale.exp()) / target).ln();
    let guess = lambda.ln();
    let log_scale = quadrature::brent(defect, guess - 10.0, guess + 10.0, 1e-14)?;
    let scale = log_scale.exp();
    let rel_defect = rhs(scale) / target - 1.0;
    if rel_defect.abs() > 1e-10 {
        return Err(ModelError::CutoffDefect(rel_defect));
    }
    let spacings = aspect.map(|a| a * scale);
    let emax: f64 = spacings.iter().map(|l| 0.5 * (PI / l).powi(2)).sum();
    Ok(CutoffSolution {
        spacings,
        spacing_over_lambda: spacings.map(|l| l / lambda),
        emax_over_kt: emax / temperature,
        defect: rel_defect,
    })
}

/// One plane wave of the lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    /// Integer wavenumbers j_ν ∈ [−n/2, n/2).
    pub index: [i32; 3],
    pub k: [f64; 3],
    pub kinetic: f64,
    /// Table position of −k, aliased into the zone for edge modes.
    pub partner: usize,
    /// Some j_ν = −n/2, so −k is not in the zone proper.
    pub edge: bool,
}

/// Periodic lattice with its wavevector table in FFT order, z fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n_per_dir: usize,
    pub shape: BoxShape,
    pub box_lengths: [f64; 3],
    pub spacings: [f64; 3],
    pub cell_volume: f64,
    pub volume: f64,
    modes: Vec<Mode>,
}

impl Grid {
    pub fn new(n_per_dir: usize, shape: BoxShape, box_lengths: [f64; 3]) -> Result<Self, ModelError> {
        if n_per_dir < 2 || n_per_dir % 2 == 1 {
            return Err(ModelError::BadGridSize(n_per_dir));
        }
        for l in box_lengths {
            positive("box length", l)?;
        }
        if n_per_dir == 2 {
            log::warn!("n_max = 2: every nonzero mode sits on the zone edge");
        }
        let n = n_per_dir;
        let spacings = box_lengths.map(|l| l / n as f64);
        let wavenumber = |i: usize| -> i32 {
            if i < n / 2 {
                i as i32
            } else {
                i as i32 - n as i32
            }
        };
        let mut modes = Vec::with_capacity(n * n * n);
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let index = [wavenumber(ix), wavenumber(iy), wavenumber(iz)];
                    let k = [0, 1, 2].map(|d| 2.0 * PI * index[d] as f64 / box_lengths[d]);
                    let kinetic = 0.5 * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
                    let neg = [ix, iy, iz].map(|i| (n - i) % n);
                    let partner = (neg[0] * n + neg[1]) * n + neg[2];
                    let edge = index.iter().any(|&j| j == -(n as i32) / 2);
                    modes.push(Mode {
                        index,
                        k,
                        kinetic,
                        partner,
                        edge,
                    });
                }
            }
        }
        Ok(Self {
            n_per_dir,
            shape,
            box_lengths,
            spacings,
            cell_volume: spacings[0] * spacings[1] * spacings[2],
            volume: box_lengths[0] * box_lengths[1] * box_lengths[2],
            modes,
        })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn flat_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n_per_dir + iy) * self.n_per_dir + iz
    }

    pub fn max_kinetic(&self) -> f64 {
        self.modes.iter().map(|m| m.kinetic).fold(0.0, f64::max)
    }

    pub fn edge_count(&self) -> usize {
        self.modes.iter().filter(|m| m.edge).count()
    }

    /// Kinetic energies of all k ≠ 0 modes grouped into distinct values with
    /// multiplicities, sorted ascending.
    pub fn kinetic_spectrum(&self) -> Vec<(f64, usize)> {
        let mut energies: Vec<f64> = self
            .modes
            .iter()
            .filter(|m| m.index != [0, 0, 0])
            .map(|m| m.kinetic)
            .collect();
        energies.sort_by(f64::total_cmp);
        let mut out: Vec<(f64, usize)> = Vec::new();
        for e in energies {
            match out.last_mut() {
                Some((last, count)) if (e - *last).abs() <= 1e-12 * e.max(1.0) => *count += 1,
                _ => out.push((e, 1)),
            }
        }
        out
    }
}

/// Lattice whose spacing satisfies the cutoff condition at `temperature`.
pub fn build_grid(n_max: usize, shape: BoxShape, temperature: f64) -> Result<Grid, ModelError> {
    if n_max < 2 || n_max % 2 == 1 {
        return Err(ModelError::BadGridSize(n_max));
    }
    let cutoff = solve_cutoff_for_shape(shape, temperature)?;
    Grid::new(n_max, shape, cutoff.spacings.map(|l| l * n_max as f64))
}

/// Result of inverting the lattice renormalisation of the coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BareCoupling {
    /// None when the lattice is too coarse for a finite bare coupling.
    pub bare: Option<f64>,
    /// ∫_FBZ d³k/(2π)³ 1/k².
    pub zone_integral: f64,
}

/// Bare lattice coupling g₀ with 1/g = 1/g₀ + ∫_FBZ d³k/(2π)³ 1/k².
pub fn bare_coupling(g_effective: f64, grid: &Grid) -> Result<BareCoupling, ModelError> {
    positive("g_effective", g_effective)?;
    let half = grid.spacings.map(|l| PI / l);
    let zone_integral = box_inverse_square_integral(half)? / (2.0 * PI).powi(3);
    let inverse = 1.0 / g_effective - zone_integral;
    let bare = if inverse > 0.0 { Some(1.0 / inverse) } else { None };
    if bare.is_none() {
        log::warn!("lattice too coarse: bare coupling diverges for g = {g_effective}");
    }
    Ok(BareCoupling { bare, zone_integral })
}

/// Parameters and grid in the unit volume for a lattice of `n_max` points per
/// direction at the given √(ρa³) and k_BT/ρg.
///
/// The cutoff ties the temperature to the lattice spacing, so the atom number
/// follows from the inputs. It is rounded to an integer and √(ρa³) is then
/// adjusted by the relative rounding error (order 1/N).
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSetup {
    pub params: PhysicalParams,
    pub grid: Grid,
    /// √(ρa³) that was requested before the rounding adjustment.
    pub requested_sqrt_rho_a3: f64,
    pub emax_over_kt: f64,
}

impl LatticeSetup {
    pub fn new(sqrt_rho_a3: f64, t_over_mu: f64, n_max: usize, shape: BoxShape) -> Result<Self, ModelError> {
        positive("sqrt_rho_a3", sqrt_rho_a3)?;
        Self::build(t_over_mu, n_max, shape, |mu, volume| {
            let density_exact = (mu / (4.0 * PI)).powf(1.5) / sqrt_rho_a3;
            (density_exact * volume).round().max(2.0) as u64
        })
        .map(|setup| Self {
            requested_sqrt_rho_a3: sqrt_rho_a3,
            ..setup
        })
    }

    /// Same lattice with the atom number fixed; √(ρa³) follows from it.
    pub fn with_atoms(n_atoms: u64, t_over_mu: f64, n_max: usize, shape: BoxShape) -> Result<Self, ModelError> {
        if n_atoms < 2 {
            return Err(ModelError::TooFewAtoms(n_atoms));
        }
        Self::build(t_over_mu, n_max, shape, |_, _| n_atoms)
    }

    fn build(
        t_over_mu: f64,
        n_max: usize,
        shape: BoxShape,
        atoms: impl Fn(f64, f64) -> u64,
    ) -> Result<Self, ModelError> {
        if t_over_mu <= 0.0 || !t_over_mu.is_finite() {
            return Err(ModelError::ZeroTemperatureLattice);
        }
        if n_max < 2 || n_max % 2 == 1 {
            return Err(ModelError::BadGridSize(n_max));
        }
        // Spacing scales as T^{-1/2}; pick T so the mean box length is one.
        let reference = solve_cutoff_for_shape(shape, 1.0)?;
        let mean_spacing = reference.spacings.iter().product::<f64>().cbrt();
        let kbt = (mean_spacing * n_max as f64).powi(2);
        let grid = build_grid(n_max, shape, kbt)?;
        let mu = kbt / t_over_mu;
        let n_atoms = atoms(mu, grid.volume);
        let density = n_atoms as f64 / grid.volume;
        let adjusted = (mu / (4.0 * PI)).powf(1.5) / density;
        let params = derive_params_in_volume(adjusted, t_over_mu, n_atoms, grid.volume)?;
        let emax_over_kt = grid.max_kinetic() / params.kbt;
        Ok(Self {
            requested_sqrt_rho_a3: params.sqrt_rho_a3,
            params,
            grid,
            emax_over_kt,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_scales_are_consistent() {
        let p = derive_params(1.32e-2, 0.5, 100_000).unwrap();
        assert!((p.healing_length - 1.0 / (2f64.sqrt() * p.sound_speed)).abs() < 1e-12 * p.healing_length);
        assert!((p.mu - 4.0 * PI * p.scattering_length * p.density).abs() < 1e-12 * p.mu);
        let s = (p.density * p.scattering_length.powi(3)).sqrt();
        assert!((s - 1.32e-2).abs() < 1e-14);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(derive_params(0.0, 0.5, 100).is_err());
        assert!(derive_params(1e-3, -0.1, 100).is_err());
        assert!(derive_params(1e-3, 0.5, 1).is_err());
        assert!(derive_params(1e-3, 0.0, 100).is_ok());
    }

    #[test]
    fn grid_of_four_counts_modes() {
        let g = Grid::new(4, BoxShape::Cubic, [1.0; 3]).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.modes().iter().filter(|m| m.index == [0, 0, 0]).count(), 1);
        assert_eq!(g.edge_count(), 37);
        for (i, m) in g.modes().iter().enumerate() {
            let p = &g.modes()[m.partner];
            assert_eq!(p.partner, i);
            if !m.edge {
                assert_eq!(p.index, m.index.map(|j| -j));
            }
        }
        assert!(Grid::new(5, BoxShape::Cubic, [1.0; 3]).is_err());
    }

    #[test]
    fn unit_cube_integral_constant() {
        let j = box_inverse_square_integral([1.0; 3]).unwrap();
        assert!((j - 15.348_248_444_887_464).abs() < 1e-9, "{j}");
    }
}
