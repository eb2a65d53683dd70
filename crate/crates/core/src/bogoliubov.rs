//! Bogoliubov theory of the squeezing dynamics after the mixing pulse.
//!
//! Energies are in units of ρg and times in units of ħ/ρg throughout. Every
//! extensive moment is returned divided by N.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modes::ModeSet;
use crate::quadrature::{self, QuadError, Tolerance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("kinetic energy must be non-negative, got {0}")]
    NegativeEnergy(f64),
    #[error("mean field must be positive, got {0}")]
    NonPositiveMeanField(f64),
    #[error("occupation of a zero-energy mode is undefined")]
    ZeroEnergyOccupation,
    #[error("temperature must be non-negative, got {0}")]
    NegativeTemperature(f64),
    #[error("η must lie in (0, 1), got {0}")]
    BadEta(f64),
    #[error("minimal squeezing must be positive, got {0}")]
    NonPositiveMinimum(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Single component a with mean field ρg.
    BeforePulse,
    /// Each component at half density, mean field ρg/2.
    AfterPulse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Quantum,
    #[default]
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BogoliubovPoint {
    pub k_magnitude: f64,
    pub kinetic: f64,
    pub stage: Stage,
    /// s = U + V.
    pub s: f64,
    pub u: f64,
    pub v: f64,
    pub eps: f64,
    pub omega: f64,
    pub zero_mode: bool,
}

/// Bogoliubov amplitudes and energy of a mode of kinetic energy `kinetic`.
pub fn dispersion(kinetic: f64, mu: f64, stage: Stage) -> Result<BogoliubovPoint, AnalyticsError> {
    if kinetic.is_nan() || kinetic < 0.0 {
        return Err(AnalyticsError::NegativeEnergy(kinetic));
    }
    if mu.is_nan() || mu <= 0.0 {
        return Err(AnalyticsError::NonPositiveMeanField(mu));
    }
    let mean_field = match stage {
        Stage::BeforePulse => mu,
        Stage::AfterPulse => 0.5 * mu,
    };
    let k_magnitude = (2.0 * kinetic).sqrt();
    if kinetic == 0.0 {
        return Ok(BogoliubovPoint {
            k_magnitude,
            kinetic,
            stage,
            s: 0.0,
            u: f64::INFINITY,
            v: f64::NEG_INFINITY,
            eps: 0.0,
            omega: 0.0,
            zero_mode: true,
        });
    }
    let s = (kinetic / (kinetic + 2.0 * mean_field)).sqrt().sqrt();
    let eps = (kinetic * (kinetic + 2.0 * mean_field)).sqrt();
    Ok(BogoliubovPoint {
        k_magnitude,
        kinetic,
        stage,
        s,
        u: 0.5 * (s + 1.0 / s),
        v: 0.5 * (s - 1.0 / s),
        eps,
        omega: eps,
        zero_mode: false,
    })
}

/// Mean occupation of a quasi-particle mode of energy `eps` at `temperature`.
pub fn occupation(eps: f64, temperature: f64, stats: Statistics) -> Result<f64, AnalyticsError> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(AnalyticsError::ZeroEnergyOccupation);
    }
    if temperature.is_nan() || temperature < 0.0 {
        return Err(AnalyticsError::NegativeTemperature(temperature));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(match stats {
        Statistics::Quantum => 1.0 / (eps / temperature).exp_m1(),
        Statistics::Classical => temperature / eps,
    })
}

/// Second moments of the amplitudes A_k (initial thermal field projected on
/// the final modes) and B_k (vacuum of component b).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatorSet {
    /// ⟨A†_k A_k⟩.
    pub a_number: f64,
    /// ⟨A_k A_{−k}⟩.
    pub a_pair: f64,
    /// ⟨B†_k B_k⟩.
    pub b_number: f64,
    /// ⟨B_k B_{−k}⟩.
    pub b_pair: f64,
    pub statistics: Statistics,
}

/// `n0` is the before-pulse occupation in the same statistics.
pub fn correlators(before: &BogoliubovPoint, after: &BogoliubovPoint, n0: f64, stats: Statistics) -> CorrelatorSet {
    let s2 = after.s * after.s;
    let ratio = (before.s * before.s) / s2;
    let ratio_minus_one = (before.s * before.s - s2) / s2;
    pair_correlators(ratio, ratio_minus_one, s2, after.u * after.v, n0, stats)
}

/// Correlators from r = s0²/s² with r − 1 supplied separately so that the
/// quantum vacuum subtraction stays accurate at high energy.
fn pair_correlators(ratio: f64, ratio_minus_one: f64, s2: f64, uv: f64, n0: f64, stats: Statistics) -> CorrelatorSet {
    let sym = 0.5 * (ratio + 1.0 / ratio);
    let anti = 0.5 * (ratio - 1.0 / ratio);
    // (r + 1/r)/2 − 1 = (r − 1)²/(2r).
    let sym_minus_one = ratio_minus_one * ratio_minus_one / (2.0 * ratio);
    let v2 = uv * uv / (0.25 * (s2 + 1.0 / s2) + 0.5);
    match stats {
        Statistics::Quantum => CorrelatorSet {
            a_number: n0 * sym + 0.5 * sym_minus_one,
            a_pair: (n0 + 0.5) * anti,
            b_number: v2,
            b_pair: -uv,
            statistics: stats,
        },
        Statistics::Classical => CorrelatorSet {
            a_number: n0 * sym,
            a_pair: n0 * anti,
            b_number: v2 + 0.5,
            b_pair: -uv,
            statistics: stats,
        },
    }
}

/// Everything about one mode needed by the sums, in units of ρg, arranged so
/// that differences of nearly equal quantities are formed analytically.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    s: f64,
    u: f64,
    v: f64,
    uv: f64,
    u0v0: f64,
    v0_sq: f64,
    /// s0²/s⁴ and s0²/s⁴ − 1.
    x: f64,
    x_minus_one: f64,
    /// r = s0²/s² and r − 1.
    ratio: f64,
    ratio_minus_one: f64,
    e: f64,
    eps: f64,
    /// n0 + 1/2 (quantum) or the equipartition occupation (classical).
    weight: f64,
    n0: f64,
    corr: CorrelatorSet,
}

impl Kernel {
    fn new(kinetic: f64, t_over_mu: f64, stats: Statistics) -> Self {
        let e = kinetic;
        let s0_sq = (e / (e + 2.0)).sqrt();
        let s_sq = (e / (e + 1.0)).sqrt();
        let (s0, s) = (s0_sq.sqrt(), s_sq.sqrt());
        // V = −(1 − s²)/(2s) with 1 − s² = (1 − s⁴)/(1 + s²).
        let v = -(1.0 / (e + 1.0)) / ((1.0 + s_sq) * 2.0 * s);
        let v0 = -(2.0 / (e + 2.0)) / ((1.0 + s0_sq) * 2.0 * s0);
        let uv = -(1.0 / (e + 1.0)) / (4.0 * s_sq);
        let u0v0 = -(2.0 / (e + 2.0)) / (4.0 * s0_sq);
        let eps0 = (e * (e + 2.0)).sqrt();
        let n0 = occupation(eps0, t_over_mu, stats).expect("positive energy");
        let weight = match stats {
            Statistics::Quantum => n0 + 0.5,
            Statistics::Classical => n0,
        };
        let root = eps0;
        let x = (e + 1.0) / root;
        let x_minus_one = 1.0 / ((e + 1.0 + root) * root);
        // r = s0²/s² = √((E+1)/(E+2)).
        let r_sq = (e + 1.0) / (e + 2.0);
        let ratio = r_sq.sqrt();
        let ratio_minus_one = -(1.0 / (e + 2.0)) / (ratio + 1.0);
        Self {
            s,
            u: v + 1.0 / s,
            v,
            uv,
            u0v0,
            v0_sq: v0 * v0,
            x,
            x_minus_one,
            ratio,
            ratio_minus_one,
            e,
            eps: (e * (e + 1.0)).sqrt(),
            weight,
            n0,
            corr: pair_correlators(ratio, ratio_minus_one, s_sq, uv, n0, stats),
        }
    }

    fn x_minus_inverse(&self) -> f64 {
        self.x_minus_one * (self.x + 1.0) / self.x
    }

    fn ratio_minus_inverse(&self) -> f64 {
        self.ratio_minus_one * (self.ratio + 1.0) / self.ratio
    }
}

/// The four oscillating-phase moments, each divided by N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscCorrections {
    pub sz_dosc: f64,
    pub d_dosc: f64,
    pub dosc_squared: f64,
    pub zeta: f64,
}

/// One point of ξ²(t) with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub time: f64,
    pub tau: f64,
    pub xi2: f64,
    /// With the oscillating phase terms, when requested.
    pub xi2_tot: Option<f64>,
    pub asymptote: f64,
    pub mean_fr: f64,
    pub sz_d: f64,
    pub zeta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCurve {
    pub points: Vec<CurvePoint>,
}

/// Two-mode squeezing 1/(τ + √(1+τ²))².
pub fn two_mode_xi2(tau: f64) -> f64 {
    let r = tau + (1.0 + tau * tau).sqrt();
    1.0 / (r * r)
}

/// Squeezing from the renormalised time and the per-atom moments ⟨D²⟩/N and
/// ⟨F_R⟩/N; `extra` is added to ⟨F_R⟩/N in the second term only.
pub fn central_xi2(tau: f64, d_squared: f64, mean_fr: f64, extra: f64) -> f64 {
    let root = (1.0 + tau * tau).sqrt();
    let r = tau + root;
    (1.0 - 4.0 * mean_fr) / (r * r) + 2.0 * (d_squared * tau * tau + mean_fr + extra) / (r * root)
}

/// ρg t_η/ħ = 1/√(η ξ²_min).
pub fn t_best(eta: f64, xi2_min: f64) -> Result<f64, AnalyticsError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(AnalyticsError::BadEta(eta));
    }
    if xi2_min.is_nan() || xi2_min <= 0.0 {
        return Err(AnalyticsError::NonPositiveMinimum(xi2_min));
    }
    Ok(1.0 / (eta * xi2_min).sqrt())
}

/// sin(x)/x with its series near zero.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Trigonometric factors of the phase φ = ε t, or their averages over φ when
/// the mode lies in the fast-oscillating continuum tail.
#[derive(Debug, Clone, Copy)]
struct Phase {
    sin_sq: f64,
    sin_4: f64,
    sin_sq_cos_sq: f64,
    cos_2: f64,
    /// sin 2φ / 2φ.
    sinc_2: f64,
    /// (sin φ / φ)².
    sinc_sq: f64,
    /// (sin φ / φ)² cos 2φ.
    sinc_sq_cos_2: f64,
}

impl Phase {
    fn new(phase: f64, averaged: bool) -> Self {
        if averaged {
            let inv = 1.0 / (phase * phase);
            return Self {
                sin_sq: 0.5,
                sin_4: 0.375,
                sin_sq_cos_sq: 0.125,
                cos_2: 0.0,
                sinc_2: 0.0,
                sinc_sq: 0.5 * inv,
                sinc_sq_cos_2: -0.25 * inv,
            };
        }
        let (sin, cos) = phase.sin_cos();
        let sin_sq = sin * sin;
        let cos_2 = cos * cos - sin_sq;
        let w = sinc(phase);
        Self {
            sin_sq,
            sin_4: sin_sq * sin_sq,
            sin_sq_cos_sq: sin_sq * cos * cos,
            cos_2,
            sinc_2: sinc(2.0 * phase),
            sinc_sq: w * w,
            sinc_sq_cos_2: w * w * cos_2,
        }
    }
}

/// Continuum modes beyond this K at time t oscillate fast enough that only
/// their phase average is kept. The neglected remainder is O(1/(t K³)).
fn tail_split(t: f64) -> f64 {
    (2e4 / t).cbrt().clamp(8.0, 60.0)
}

/// Analytic moments on a mode set at fixed k_BT/ρg.
#[derive(Debug, Clone, PartialEq)]
pub struct Analytics {
    pub t_over_mu: f64,
    pub statistics: Statistics,
    pub modes: ModeSet,
    pub tolerance: Tolerance,
}

impl Analytics {
    pub fn new(t_over_mu: f64, statistics: Statistics, modes: ModeSet) -> Self {
        Self {
            t_over_mu,
            statistics,
            modes,
            tolerance: Tolerance::new(1e-12, 1e-9),
        }
    }

    fn average<F: Fn(&Kernel) -> f64>(&self, f: F) -> Result<f64, AnalyticsError> {
        let (theta, stats) = (self.t_over_mu, self.statistics);
        Ok(self
            .modes
            .average(|e| f(&Kernel::new(e, theta, stats)), self.tolerance)?)
    }

    fn average_at<F: Fn(&Kernel, &Phase) -> f64>(&self, t: f64, f: F) -> Result<f64, AnalyticsError> {
        let (theta, stats) = (self.t_over_mu, self.statistics);
        let split = (t > 0.0).then(|| tail_split(t));
        let tol = Tolerance {
            max_subdivisions: 20_000,
            ..self.tolerance
        };
        Ok(self.modes.average_split(
            |e, averaged| {
                let k = Kernel::new(e, theta, stats);
                f(&k, &Phase::new(k.eps * t, averaged))
            },
            split,
            tol,
        )?)
    }

    fn is_quantum(&self) -> bool {
        self.statistics == Statistics::Quantum
    }

    /// Asymptotic squeezing ⟨D²⟩/N.
    pub fn xi2_min(&self) -> Result<f64, AnalyticsError> {
        let quantum = self.is_quantum();
        self.average(|k| {
            let s4 = k.s.powi(4);
            let ratio = k.x + 1.0 / k.x;
            let bracket = if quantum {
                k.n0 * ratio + k.x_minus_one * k.x_minus_one / (2.0 * k.x)
            } else {
                k.weight * ratio
            };
            0.5 * s4 * bracket
        })
    }

    /// ⟨D²⟩/N from the correlator set: Σ s⁴ [2 n_A n_B + 2 m_A m_B] with the
    /// quantum ordering terms n_A + n_B.
    pub fn d_squared_from_correlators(&self) -> Result<f64, AnalyticsError> {
        let quantum = self.is_quantum();
        self.average(|k| {
            let c = &k.corr;
            let mut v = 2.0 * c.a_number * c.b_number + 2.0 * c.a_pair * c.b_pair;
            if quantum {
                v += c.a_number + c.b_number;
            }
            k.s.powi(4) * v
        })
    }

    /// ⟨N_nc⟩/N before the pulse.
    pub fn noncondensed_fraction(&self) -> Result<f64, AnalyticsError> {
        let quantum = self.is_quantum();
        self.average(|k| {
            let mut v = (1.0 + 2.0 * k.v0_sq) * k.n0;
            if quantum {
                v += k.v0_sq;
            }
            v
        })
    }

    /// ⟨F_R(t)⟩/N = −(1/N) Σ 4U²V² sin²ωt.
    pub fn mean_fr(&self, t: f64) -> Result<f64, AnalyticsError> {
        self.average_at(t, |k, p| -4.0 * k.uv * k.uv * p.sin_sq)
    }

    /// Var F_R(t)/N.
    pub fn var_fr(&self, t: f64) -> Result<f64, AnalyticsError> {
        self.average_at(t, |k, p| {
            let uv2 = k.uv * k.uv;
            8.0 * uv2 * (p.sin_sq + 4.0 * uv2 * p.sin_4)
        })
    }

    /// Time average of ⟨F_R⟩/N, −(1/N) Σ 2U²V².
    pub fn mean_fr_average(&self) -> Result<f64, AnalyticsError> {
        self.average(|k| -2.0 * k.uv * k.uv)
    }

    /// ⟨{S_z, D}⟩/N.
    pub fn sz_d_anticommutator(&self) -> Result<f64, AnalyticsError> {
        let quantum = self.is_quantum();
        self.average(|k| {
            let s2 = k.s * k.s;
            if quantum {
                s2 * (k.corr.a_number - k.v * k.v)
            } else {
                s2 * k.corr.a_number
            }
        })
    }

    pub fn osc_corrections(&self, t: f64) -> Result<OscCorrections, AnalyticsError> {
        let quantum = self.is_quantum();
        let sz_dosc = self.average_at(t, |k, p| {
            let pair = if quantum { k.corr.a_pair + k.uv } else { k.corr.a_pair };
            k.s * k.s * p.sinc_2 * pair
        })?;
        let d_dosc = self.average_at(t, |k, p| {
            // s0² − s⁸/s0² = s⁴ (x − 1/x).
            let s4 = k.s.powi(4);
            p.sinc_2 * s4 * k.x_minus_inverse() * k.weight
        })?;
        let dosc_squared = self.average_at(t, |k, p| {
            let mut steady = (k.u * k.u + k.v * k.v) * k.corr.a_number;
            if quantum {
                steady += k.u * k.u;
            }
            let beating = -2.0 * k.uv * k.corr.a_pair;
            k.s.powi(4) * (p.sinc_sq * steady + p.sinc_sq_cos_2 * beating)
        })?;
        let zeta = self.average_at(t, |k, p| -p.sin_sq / k.eps * k.s * k.s * k.u0v0 * k.weight)?;
        Ok(OscCorrections {
            sz_dosc,
            d_dosc,
            dosc_squared,
            zeta,
        })
    }

    /// Time-independent ingredients, computed once per curve.
    pub fn constants(&self) -> Result<CurveConstants, AnalyticsError> {
        Ok(CurveConstants {
            d_squared: self.xi2_min()?,
            sz_d: self.sz_d_anticommutator()?,
        })
    }

    pub fn xi2_point(
        &self,
        t: f64,
        constants: &CurveConstants,
        include_osc: bool,
    ) -> Result<CurvePoint, AnalyticsError> {
        let mean_fr = self.mean_fr(t)?;
        let tau = 0.5 * t * (1.0 + 2.0 * mean_fr + constants.sz_d);
        let xi2 = central_xi2(tau, constants.d_squared, mean_fr, 0.0);
        let (xi2_tot, zeta) = if include_osc && t > 0.0 {
            let osc = self.osc_corrections(t)?;
            let tau_tot = 0.5 * t * (1.0 + 2.0 * mean_fr + constants.sz_d + osc.sz_dosc);
            let d_tot = constants.d_squared + osc.d_dosc + osc.dosc_squared;
            (Some(central_xi2(tau_tot, d_tot, mean_fr, osc.zeta)), Some(osc.zeta))
        } else if include_osc {
            (Some(xi2), Some(0.0))
        } else {
            (None, None)
        };
        Ok(CurvePoint {
            time: t,
            tau,
            xi2,
            xi2_tot,
            asymptote: constants.d_squared,
            mean_fr,
            sz_d: constants.sz_d,
            zeta,
        })
    }

    pub fn xi2_of_t(&self, t: f64, include_osc: bool) -> Result<CurvePoint, AnalyticsError> {
        self.xi2_point(t, &self.constants()?, include_osc)
    }

    pub fn curve(&self, times: &[f64], include_osc: bool) -> Result<AnalyticCurve, AnalyticsError> {
        let constants = self.constants()?;
        let points = times
            .iter()
            .map(|&t| self.xi2_point(t, &constants, include_osc))
            .collect::<Result<_, _>>()?;
        Ok(AnalyticCurve { points })
    }

    /// First bare time at which ξ²(t) falls to (1+η)·⟨D²⟩/N, searched up to `t_max`.
    pub fn t_eta(&self, eta: f64, t_max: f64) -> Result<Option<f64>, AnalyticsError> {
        let constants = self.constants()?;
        let target = (1.0 + eta) * constants.d_squared;
        let excess = |t: f64| -> f64 {
            self.xi2_point(t, &constants, false)
                .map(|p| p.xi2 - target)
                .unwrap_or(f64::NAN)
        };
        // Coarse geometric scan, then Brent inside the first bracket.
        let mut lo = 0.0;
        let mut t = 1e-2;
        while t <= t_max {
            if excess(t) <= 0.0 {
                return Ok(Some(quadrature::brent(excess, lo, t, 1e-10 * t)?));
            }
            lo = t;
            t *= 1.05;
        }
        Ok(None)
    }

    /// Var(N_a⊥ − N_b⊥)/N at time t.
    pub fn var_nperp_diff(&self, t: f64) -> Result<f64, AnalyticsError> {
        let initial = self.noncondensed_fraction()?;
        let growth = self.average_at(t, |k, p| {
            let s2 = k.s * k.s;
            let s4 = s2 * s2;
            let first = (s4 - 1.0 / s4) * -k.x_minus_inverse();
            let s2_minus_inverse = -(1.0 / (k.e + 1.0)) / s2;
            let second = s2_minus_inverse.powi(3) * k.ratio_minus_inverse();
            0.5 * k.weight * (p.sin_sq * first + p.sin_sq_cos_sq * second)
        })?;
        Ok(initial + growth)
    }

    /// Symmetrised cross moment ⟨{N_a⊥ − N_b⊥, D}⟩/(2N).
    pub fn nperp_d_cross(&self, t: f64) -> Result<f64, AnalyticsError> {
        let quantum = self.is_quantum();
        self.average_at(t, |k, p| {
            let c = &k.corr;
            let sum_sq = k.u * k.u + k.v * k.v;
            let uv = k.uv;
            let cos2 = p.cos_2;
            let value = if quantum {
                sum_sq * (2.0 * c.a_number * c.b_number + c.a_number + c.b_number + 2.0 * c.a_pair * c.b_pair)
                    + 2.0 * uv * ((2.0 * c.a_number + 1.0) * c.b_pair + (2.0 * c.b_number + 1.0) * c.a_pair) * cos2
            } else {
                2.0 * sum_sq * (c.a_number * c.b_number + c.a_pair * c.b_pair)
                    + 4.0 * uv * (c.a_number * c.b_pair + c.a_pair * c.b_number) * cos2
            };
            k.s * k.s * value
        })
    }

    /// Long-time condensate squeezing Var[(N_a⊥ − N_b⊥) + D]/N.
    pub fn xi0_asymptote(&self, t: f64) -> Result<f64, AnalyticsError> {
        Ok(self.var_nperp_diff(t)? + 2.0 * self.nperp_d_cross(t)? + self.xi2_min()?)
    }
}

/// Linear growth rate of Var(N_a⊥ − N_b⊥)/N in the thermodynamic limit, per
/// unit of ρg t/ħ: (3/2)(2πρa³)^{1/2} k_BT/ρg.
pub fn var_nperp_growth_rate(sqrt_rho_a3: f64, t_over_mu: f64) -> f64 {
    1.5 * (2.0 * std::f64::consts::PI).sqrt() * sqrt_rho_a3 * t_over_mu
}

/// Closed form of ξ²_min/√(ρa³) at zero temperature.
pub fn xi2_min_zero_temperature_coefficient() -> f64 {
    let sqrt2 = 2f64.sqrt();
    (8.0 / std::f64::consts::PI).sqrt() * (19.0 / 6.0 * sqrt2 - 1.5 * (sqrt2 + 1.0).ln() - std::f64::consts::PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveConstants {
    pub d_squared: f64,
    pub sz_d: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn after_pulse_at_mean_field_energy() {
        let p = dispersion(1.0, 1.0, Stage::AfterPulse).unwrap();
        assert!((p.s - 2f64.powf(-0.25)).abs() < 1e-15);
        assert!((p.u * p.u - p.v * p.v - 1.0).abs() < 1e-12);
        assert!((p.s - 1.0 / (p.u - p.v)).abs() < 1e-12);
    }

    #[test]
    fn zero_mode_is_flagged() {
        let p = dispersion(0.0, 1.0, Stage::BeforePulse).unwrap();
        assert!(p.zero_mode && p.s == 0.0 && p.eps == 0.0);
        assert!(occupation(0.0, 1.0, Statistics::Quantum).is_err());
    }

    #[test]
    fn occupation_values() {
        let n = occupation(2f64.ln(), 1.0, Statistics::Quantum).unwrap();
        assert!((n - 1.0).abs() < 1e-14);
        assert_eq!(occupation(1.0, 0.0, Statistics::Quantum).unwrap(), 0.0);
        let q = occupation(1e-6, 1.0, Statistics::Quantum).unwrap();
        let c = occupation(1e-6, 1.0, Statistics::Classical).unwrap();
        assert!((q / c - 1.0).abs() < 1e-6);
    }

    #[test]
    fn identical_modes_give_diagonal_a_moments() {
        let p = dispersion(0.7, 1.0, Stage::AfterPulse).unwrap();
        let c = correlators(&p, &p, 0.3, Statistics::Quantum);
        assert!((c.a_number - 0.3).abs() < 1e-14 && c.a_pair.abs() < 1e-14);
        assert!((c.b_number - p.v * p.v).abs() < 1e-12);
        assert!((c.b_pair + p.u * p.v).abs() < 1e-12);
        let cl = correlators(&p, &p, 0.3, Statistics::Classical);
        assert!((cl.b_number - c.b_number - 0.5).abs() < 1e-12);
        assert_eq!(cl.b_pair, c.b_pair);
    }

    #[test]
    fn two_mode_reduction() {
        for i in 0..1000 {
            let tau = i as f64 * 0.05;
            let a = central_xi2(tau, 0.0, 0.0, 0.0);
            assert!((a - two_mode_xi2(tau)).abs() <= 1e-12 * two_mode_xi2(tau));
        }
    }

    #[test]
    fn best_time_arithmetic() {
        assert!((t_best(0.2, 1e-3).unwrap() - 70.710_678_118_654_76).abs() < 1e-9);
        assert!(t_best(1.0, 1e-3).is_err());
    }
}
