//! Complex lattice fields and their plane-wave amplitudes.
//!
//! A field is stored in real space on the grid's flat order (z fastest). Its
//! amplitudes are a_k = (dV/√V) Σ_r ψ_r e^{−ik·r}, so that Σ_k |a_k|² equals
//! the atom number Σ_r dV |ψ_r|².

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::model::Grid;

/// Shape of the lattice a field lives on; enough to reject a mismatched reload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub n_per_dir: usize,
    pub box_lengths: [f64; 3],
}

impl GridDescriptor {
    pub fn of(grid: &Grid) -> Self {
        Self {
            n_per_dir: grid.n_per_dir,
            box_lengths: grid.box_lengths,
        }
    }

    pub fn points(&self) -> usize {
        self.n_per_dir.pow(3)
    }

    pub fn volume(&self) -> f64 {
        self.box_lengths.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.points() as f64
    }
}

/// One realization: both components, the time they refer to and the seed
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub grid: GridDescriptor,
    pub psi_a: Vec<Complex64>,
    pub psi_b: Vec<Complex64>,
    pub time: f64,
    pub seed: u64,
}

impl FieldPair {
    pub fn new(grid: GridDescriptor, psi_a: Vec<Complex64>, psi_b: Vec<Complex64>, seed: u64) -> Self {
        assert_eq!(psi_a.len(), grid.points());
        assert_eq!(psi_b.len(), grid.points());
        Self {
            grid,
            psi_a,
            psi_b,
            time: 0.0,
            seed,
        }
    }

    pub fn norm_a(&self) -> f64 {
        norm(&self.psi_a, self.grid.cell_volume())
    }

    pub fn norm_b(&self) -> f64 {
        norm(&self.psi_b, self.grid.cell_volume())
    }

    pub fn total_norm(&self) -> f64 {
        self.norm_a() + self.norm_b()
    }

    /// Zero-mode amplitudes (a₀, b₀).
    pub fn zero_modes(&self) -> (Complex64, Complex64) {
        let scale = self.grid.cell_volume() / self.grid.volume().sqrt();
        let sum = |f: &[Complex64]| f.iter().sum::<Complex64>() * scale;
        (sum(&self.psi_a), sum(&self.psi_b))
    }
}

/// Σ_r dV |ψ_r|².
pub fn norm(field: &[Complex64], cell_volume: f64) -> f64 {
    field.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell_volume
}

/// Three-dimensional FFT on an n³ cube, built from one-dimensional passes.
#[derive(Clone)]
pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            line: vec![Complex64::default(); n],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unnormalized Σ_r f_r e^{−ik·r}.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.forward);
        self.transform(plan.as_ref(), data);
    }

    /// Unnormalized Σ_k f_k e^{ik·r}.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.inverse);
        self.transform(plan.as_ref(), data);
    }

    fn transform(&mut self, plan: &dyn Fft<f64>, data: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n);
        plan.process_with_scratch(data, &mut self.scratch);
        for stride in [n, n * n] {
            for block in 0..n * n {
                // Lines along the strided axis start at every index whose
                // strided digit is zero.
                let start = (block / stride) * stride * n + block % stride;
                for (i, v) in self.line.iter_mut().enumerate() {
                    *v = data[start + i * stride];
                }
                plan.process_with_scratch(&mut self.line, &mut self.scratch);
                for (i, v) in self.line.iter().enumerate() {
                    data[start + i * stride] = *v;
                }
            }
        }
    }
}

/// Converts between real-space fields and normalized plane-wave amplitudes.
#[derive(Debug, Clone)]
pub struct Spectral {
    fft: Fft3,
    to_amplitude: f64,
    to_field: f64,
}

impl Spectral {
    pub fn new(grid: GridDescriptor) -> Self {
        let volume = grid.volume();
        Self {
            fft: Fft3::new(grid.n_per_dir),
            to_amplitude: grid.cell_volume() / volume.sqrt(),
            to_field: 1.0 / volume.sqrt(),
        }
    }

    pub fn amplitudes(&mut self, field: &[Complex64]) -> Vec<Complex64> {
        let mut out = field.to_vec();
        self.amplitudes_in_place(&mut out);
        out
    }

    pub fn field(&mut self, amplitudes: &[Complex64]) -> Vec<Complex64> {
        let mut out = amplitudes.to_vec();
        self.field_in_place(&mut out);
        out
    }

    pub fn amplitudes_in_place(&mut self, data: &mut [Complex64]) {
        self.fft.forward(data);
        data.iter_mut().for_each(|z| *z *= self.to_amplitude);
    }

    pub fn field_in_place(&mut self, data: &mut [Complex64]) {
        self.fft.inverse(data);
        data.iter_mut().for_each(|z| *z *= self.to_field);
    }

    pub fn fft(&mut self) -> &mut Fft3 {
        &mut self.fft
    }
}
