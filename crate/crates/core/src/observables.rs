//! Collective spin moments, squeezing parameters and their error bars.
//!
//! Moments are raw classical ensemble averages over realizations. Error bars
//! come from the delete-one jackknife, applied to every quantity as a function
//! of the ensemble means.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldPair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservablesError {
    #[error("need at least 2 realizations, got {0}")]
    TooFewRealizations(usize),
    #[error("curve needs at least 3 points, got {0}")]
    ShortCurve(usize),
    #[error("times and values differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
}

/// Spin of one realization for the full field and for the zero mode alone.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpinSample {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
    pub s0x: f64,
    pub s0y: f64,
    pub s0z: f64,
    /// |a₀|² + |b₀|².
    pub n0: f64,
}

impl SpinSample {
    /// S₊ = Σ_r dV ψ_a* ψ_b, S_z = (N_a − N_b)/2, and the same with the zero
    /// modes: S₀₊ = a₀* b₀, S₀z = (|a₀|² − |b₀|²)/2.
    pub fn of(pair: &FieldPair) -> Self {
        let dv = pair.grid.cell_volume();
        let s_plus: Complex64 = pair
            .psi_a
            .iter()
            .zip(&pair.psi_b)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * dv;
        let (a0, b0) = pair.zero_modes();
        Self::from_parts(s_plus, pair.norm_a(), pair.norm_b(), a0, b0)
    }

    pub fn from_parts(s_plus: Complex64, n_a: f64, n_b: f64, a0: Complex64, b0: Complex64) -> Self {
        let s0_plus = a0.conj() * b0;
        Self {
            sx: s_plus.re,
            sy: s_plus.im,
            sz: 0.5 * (n_a - n_b),
            s0x: s0_plus.re,
            s0y: s0_plus.im,
            s0z: 0.5 * (a0.norm_sqr() - b0.norm_sqr()),
            n0: a0.norm_sqr() + b0.norm_sqr(),
        }
    }

    /// Per-realization products whose means are the ensemble moments.
    fn row(&self) -> [f64; ROW] {
        [
            self.sx,
            self.sy,
            self.sz,
            self.sy * self.sy,
            self.sz * self.sz,
            2.0 * self.sy * self.sz,
            self.s0x,
            self.s0y,
            self.s0z,
            self.s0y * self.s0y,
            self.s0z * self.s0z,
            2.0 * self.s0y * self.s0z,
            self.n0,
        ]
    }
}

const ROW: usize = 13;

/// Moments of one spin (the full field or the zero mode).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub mean_x: f64,
    pub mean_y: f64,
    pub mean_z: f64,
    /// ⟨S_y²⟩.
    pub var_y: f64,
    /// ⟨S_z²⟩.
    pub var_z: f64,
    /// ⟨{S_y, S_z}⟩.
    pub anticomm: f64,
}

impl Moments {
    fn from_means(m: &[f64]) -> Self {
        Self {
            mean_x: m[0],
            mean_y: m[1],
            mean_z: m[2],
            var_y: m[3],
            var_z: m[4],
            anticomm: m[5],
        }
    }

    pub fn transverse_min_variance(&self) -> f64 {
        transverse_min_variance(self.var_y, self.var_z, self.anticomm)
    }
}

/// A value with its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinMoments {
    pub total: Moments,
    pub total_errors: Moments,
    pub condensate: Moments,
    pub condensate_errors: Moments,
    /// ⟨|a₀|² + |b₀|²⟩.
    pub condensate_number: Estimate,
    pub realizations: usize,
    /// Largest of |⟨S_y⟩|, |⟨S_z⟩| in units of their standard error.
    pub symmetry_sigma: f64,
}

/// Ensemble moments of per-realization spins at one time.
pub fn spin_moments(samples: &[SpinSample]) -> Result<SpinMoments, ObservablesError> {
    let rows: Vec<[f64; ROW]> = samples.iter().map(SpinSample::row).collect();
    let means = column_means(&rows)?;
    let errors: Vec<f64> = (0..ROW)
        .map(|c| jackknife(&rows, |m| m[c]).map(|e| e.error))
        .collect::<Result<_, _>>()?;
    let symmetry_sigma = [1, 2]
        .iter()
        .map(|&c| {
            if errors[c] > 0.0 {
                means[c].abs() / errors[c]
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    if symmetry_sigma > 5.0 {
        log::warn!("mean spin off the x axis by {symmetry_sigma:.1} standard errors");
    }
    Ok(SpinMoments {
        total: Moments::from_means(&means[..6]),
        total_errors: Moments::from_means(&errors[..6]),
        condensate: Moments::from_means(&means[6..12]),
        condensate_errors: Moments::from_means(&errors[6..12]),
        condensate_number: Estimate {
            value: means[12],
            error: errors[12],
        },
        realizations: samples.len(),
        symmetry_sigma,
    })
}

/// ½[⟨S_y²⟩ + ⟨S_z²⟩ − √((⟨S_y²⟩ − ⟨S_z²⟩)² + ⟨{S_y,S_z}⟩²)].
pub fn transverse_min_variance(var_y: f64, var_z: f64, anticomm: f64) -> f64 {
    let radicand = (var_y - var_z).powi(2) + anticomm * anticomm;
    debug_assert!(radicand >= 0.0);
    0.5 * (var_y + var_z - radicand.sqrt())
}

/// N ΔS²_⊥,min / ⟨S_x⟩²; infinite when the mean spin vanishes.
pub fn xi2(moments: &Moments, n_atoms: f64) -> f64 {
    if moments.mean_x == 0.0 {
        return f64::INFINITY;
    }
    n_atoms * moments.transverse_min_variance() / (moments.mean_x * moments.mean_x)
}

/// Zero-mode squeezing with the mean condensate number as prefactor.
pub fn xi0_2(moments: &SpinMoments) -> f64 {
    xi2(&moments.condensate, moments.condensate_number.value)
}

/// ξ² and ξ₀² with jackknife errors.
pub fn squeezing_estimates(samples: &[SpinSample], n_atoms: f64) -> Result<(Estimate, Estimate), ObservablesError> {
    let rows: Vec<[f64; ROW]> = samples.iter().map(SpinSample::row).collect();
    let total = jackknife(&rows, |m| xi2(&Moments::from_means(&m[..6]), n_atoms))?;
    let condensate = jackknife(&rows, |m| xi2(&Moments::from_means(&m[6..12]), m[12]))?;
    Ok((total, condensate))
}

/// ⟨S_z²⟩ with its error.
pub fn sz_squared(samples: &[SpinSample]) -> Result<Estimate, ObservablesError> {
    let rows: Vec<[f64; 1]> = samples.iter().map(|s| [s.sz * s.sz]).collect();
    jackknife(&rows, |m| m[0])
}

fn column_means<R: AsRef<[f64]>>(rows: &[R]) -> Result<Vec<f64>, ObservablesError> {
    if rows.len() < 2 {
        return Err(ObservablesError::TooFewRealizations(rows.len()));
    }
    Ok(means_of(rows))
}

fn means_of<R: AsRef<[f64]>>(rows: &[R]) -> Vec<f64> {
    let width = rows[0].as_ref().len();
    let mut sums = vec![0.0; width];
    for row in rows {
        for (s, v) in sums.iter_mut().zip(row.as_ref()) {
            *s += v;
        }
    }
    let n = rows.len() as f64;
    sums.into_iter().map(|s| s / n).collect()
}

/// Delete-one jackknife of `f` applied to the column means of `rows`.
///
/// Rows are summed in order, so the result is independent of how they were
/// produced.
pub fn jackknife<R, F>(rows: &[R], f: F) -> Result<Estimate, ObservablesError>
where
    R: AsRef<[f64]>,
    F: Fn(&[f64]) -> f64,
{
    let means = column_means(rows)?;
    let n = rows.len() as f64;
    let value = f(&means);
    let mut leave_out = vec![0.0; means.len()];
    let mut estimates = Vec::with_capacity(rows.len());
    for row in rows {
        for ((l, m), v) in leave_out.iter_mut().zip(&means).zip(row.as_ref()) {
            *l = (n * m - v) / (n - 1.0);
        }
        estimates.push(f(&leave_out));
    }
    let mean_est = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|e| (e - mean_est).powi(2)).sum::<f64>() * (n - 1.0) / n;
    Ok(Estimate {
        value,
        error: var.sqrt(),
    })
}

/// Batch-means error of `f`: the spread of `f` over `batches` contiguous
/// batches divided by √batches.
pub fn batch_means<R, F>(rows: &[R], f: F, batches: usize) -> Result<Estimate, ObservablesError>
where
    R: AsRef<[f64]>,
    F: Fn(&[f64]) -> f64,
{
    let value = f(&column_means(rows)?);
    let size = rows.len() / batches.max(1);
    if batches < 2 || size < 1 {
        return Err(ObservablesError::TooFewRealizations(rows.len()));
    }
    let values: Vec<f64> = rows
        .chunks_exact(size)
        .take(batches)
        .map(|chunk| f(&means_of(chunk)))
        .collect();
    let b = values.len() as f64;
    let mean = values.iter().sum::<f64>() / b;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
    Ok(Estimate {
        value,
        error: (var / b).sqrt(),
    })
}

/// Time series of the squeezing parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SqueezingCurve {
    pub times: Vec<f64>,
    pub xi2: Vec<Estimate>,
    pub xi0_2: Vec<Estimate>,
    pub sz_squared: Vec<Estimate>,
    pub realizations: usize,
}

impl SqueezingCurve {
    /// Builds the curve from per-time ensembles of spin samples.
    pub fn from_samples(times: &[f64], per_time: &[Vec<SpinSample>], n_atoms: f64) -> Result<Self, ObservablesError> {
        if times.len() != per_time.len() {
            return Err(ObservablesError::LengthMismatch {
                times: times.len(),
                values: per_time.len(),
            });
        }
        let mut curve = SqueezingCurve {
            times: times.to_vec(),
            realizations: per_time.first().map_or(0, Vec::len),
            ..Default::default()
        };
        for samples in per_time {
            let (total, condensate) = squeezing_estimates(samples, n_atoms)?;
            curve.xi2.push(total);
            curve.xi0_2.push(condensate);
            curve.sz_squared.push(sz_squared(samples)?);
        }
        Ok(curve)
    }

    pub fn xi2_values(&self) -> Vec<f64> {
        self.xi2.iter().map(|e| e.value).collect()
    }

    pub fn xi0_2_values(&self) -> Vec<f64> {
        self.xi0_2.iter().map(|e| e.value).collect()
    }
}

/// Minimum, characteristic times and a flag for a minimum on the window edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub xi2_min: f64,
    pub t_min: f64,
    /// The discrete minimum is the first or last sample; other outputs are not final.
    pub boundary: bool,
    /// (η, first time with ξ² ≤ (1+η) ξ²_min).
    pub t_eta: Vec<(f64, Option<f64>)>,
    /// First time after the minimum with ξ² ≥ 2 ξ²_min.
    pub t_therm: Option<f64>,
}

/// Locates the minimum of a sampled curve and its characteristic times.
///
/// The minimum is refined by the parabola through the lowest sample and its
/// neighbours; crossing times are linearly interpolated.
pub fn summarize_curve(times: &[f64], values: &[f64], etas: &[f64]) -> Result<CurveSummary, ObservablesError> {
    if times.len() != values.len() {
        return Err(ObservablesError::LengthMismatch {
            times: times.len(),
            values: values.len(),
        });
    }
    if times.len() < 3 {
        return Err(ObservablesError::ShortCurve(times.len()));
    }
    let (i_min, _) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(ObservablesError::ShortCurve(0))?;
    let last = times.len() - 1;
    let boundary = i_min == 0 || i_min == last;
    let (mut xi2_min, mut t_min) = (values[i_min], times[i_min]);
    if !boundary {
        let (t0, t1, t2) = (times[i_min - 1], times[i_min], times[i_min + 1]);
        let (y0, y1, y2) = (values[i_min - 1], values[i_min], values[i_min + 1]);
        let denom = (t0 - t1) * (t0 - t2) * (t1 - t2);
        let a = (t2 * (y1 - y0) + t1 * (y0 - y2) + t0 * (y2 - y1)) / denom;
        let b = (t2 * t2 * (y0 - y1) + t1 * t1 * (y2 - y0) + t0 * t0 * (y1 - y2)) / denom;
        if a > 0.0 {
            let tv = -b / (2.0 * a);
            if tv > t0 && tv < t2 {
                let c = y1 - a * t1 * t1 - b * t1;
                t_min = tv;
                xi2_min = (a * tv * tv + b * tv + c).min(y1);
            }
        }
    }
    let crossing = |threshold: f64, from: usize, rising: bool| -> Option<f64> {
        (from..=last).find_map(|i| {
            let hit = if rising {
                values[i] >= threshold
            } else {
                values[i] <= threshold
            };
            if !hit {
                return None;
            }
            if i == from {
                return Some(times[i]);
            }
            let (ya, yb) = (values[i - 1], values[i]);
            let frac = if yb != ya { (threshold - ya) / (yb - ya) } else { 1.0 };
            Some(times[i - 1] + frac.clamp(0.0, 1.0) * (times[i] - times[i - 1]))
        })
    };
    let t_eta = etas
        .iter()
        .map(|&eta| (eta, crossing((1.0 + eta) * xi2_min, 0, false)))
        .collect();
    let t_therm = crossing(2.0 * xi2_min, i_min, true);
    if boundary {
        log::warn!("squeezing minimum on the edge of the sampled window");
    }
    Ok(CurveSummary {
        xi2_min,
        t_min,
        boundary,
        t_eta,
        t_therm,
    })
}
