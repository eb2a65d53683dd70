use proptest::prelude::*;
use spinsqueeze::bogoliubov::{
    central_xi2, dispersion, occupation, t_best, two_mode_xi2, xi2_min_zero_temperature_coefficient, Analytics, Stage,
    Statistics,
};
use spinsqueeze::model::{solve_cutoff, BoxShape, LatticeSetup, ZETA_3_2};
use spinsqueeze::modes::ModeSet;

/// ∫∫_{[-1,1]²} du dv / (1 + u² + v²) by tensor Gauss–Legendre on a split grid.
fn face_integral() -> f64 {
    let (nodes, weights) = spinsqueeze::quadrature::gauss_legendre(40);
    let panels = 8;
    let mut total = 0.0;
    for pu in 0..panels {
        for pv in 0..panels {
            let (u0, v0) = (
                -1.0 + 2.0 * pu as f64 / panels as f64,
                -1.0 + 2.0 * pv as f64 / panels as f64,
            );
            let h = 1.0 / panels as f64;
            for (xu, wu) in nodes.iter().zip(&weights) {
                for (xv, wv) in nodes.iter().zip(&weights) {
                    let u = u0 + h * (xu + 1.0);
                    let v = v0 + h * (xv + 1.0);
                    total += wu * wv * h * h / (1.0 + u * u + v * v);
                }
            }
        }
    }
    total
}

#[test]
fn cutoff_matches_independent_pyramid_integral() {
    // ∫_cube d³x/|x|² splits into six pyramids over the faces, each equal to
    // the face integral above; the cutoff condition then fixes π/l.
    let cube = 6.0 * face_integral();
    let temperature: f64 = 1.0;
    let lambda = (2.0 * std::f64::consts::PI / temperature).sqrt();
    let two_pi_cubed = (2.0 * std::f64::consts::PI).powi(3);
    let k_edge = ZETA_3_2 * two_pi_cubed / (2.0 * temperature * cube * lambda.powi(3));
    let emax_over_kt = 1.5 * k_edge * k_edge / temperature;
    let solved = solve_cutoff(temperature).unwrap();
    assert!(
        (solved.emax_over_kt - emax_over_kt).abs() < 1e-9,
        "{} vs {emax_over_kt}",
        solved.emax_over_kt
    );
    assert!((solved.emax_over_kt - 2.695).abs() < 1e-3);
}

#[test]
fn cutoff_ratio_is_temperature_independent() {
    let a = solve_cutoff(0.3).unwrap().emax_over_kt;
    let b = solve_cutoff(40.0).unwrap().emax_over_kt;
    assert!((a - b).abs() < 1e-10);
}

#[test]
fn zero_temperature_minimum_matches_closed_form() {
    let quantum = Analytics::new(0.0, Statistics::Quantum, ModeSet::continuum(1e-3));
    let per_s = quantum.xi2_min().unwrap() / 1e-3;
    let closed = xi2_min_zero_temperature_coefficient();
    assert!((per_s - closed).abs() < 1e-6, "{per_s} vs {closed}");
    assert!((closed - 0.02344).abs() < 1e-4);
}

#[test]
fn quantum_minimum_stays_below_depletion() {
    for theta in [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let a = Analytics::new(theta, Statistics::Quantum, ModeSet::continuum(1e-3));
        let xi = a.xi2_min().unwrap();
        let depletion = a.noncondensed_fraction().unwrap();
        assert!(xi <= depletion, "θ = {theta}: {xi} > {depletion}");
    }
}

/// (1/N) Σ_k ½ s⁴ (k_BT/ε₀)(x + 1/x) written out from U, V without the
/// library's cancellation-safe rearrangements.
fn lattice_d_squared_direct(setup: &LatticeSetup) -> f64 {
    let mu = setup.params.mu;
    let theta = setup.params.t_over_mu;
    let mut sum = 0.0;
    for m in setup.grid.modes().iter().skip(1) {
        let e = m.kinetic / mu;
        let before = dispersion(e, 1.0, Stage::BeforePulse).unwrap();
        let after = dispersion(e, 1.0, Stage::AfterPulse).unwrap();
        let n0 = theta / before.eps;
        let x = (before.s / after.s).powi(2) / after.s.powi(2);
        sum += 0.5 * after.s.powi(4) * n0 * (x + 1.0 / x);
    }
    sum / setup.params.n_atoms as f64
}

#[test]
fn lattice_asymptote_matches_direct_mode_sum() {
    let setup = LatticeSetup::new(1.32e-2, 0.5, 12, BoxShape::Cubic).unwrap();
    let analytics = Analytics::new(0.5, Statistics::Classical, ModeSet::lattice(&setup.grid, &setup.params));
    let library = analytics.xi2_min().unwrap();
    let direct = lattice_d_squared_direct(&setup);
    assert!((library / direct - 1.0).abs() < 1e-10, "{library} vs {direct}");
    assert!((library - 0.002_442_86).abs() < 1e-8);
}

#[test]
fn correlator_route_agrees_with_closed_asymptote() {
    for stats in [Statistics::Quantum, Statistics::Classical] {
        let a = Analytics::new(0.7, stats, ModeSet::continuum(2e-3));
        let closed = a.xi2_min().unwrap();
        let via = a.d_squared_from_correlators().unwrap();
        assert!((closed / via - 1.0).abs() < 1e-6, "{stats:?}: {closed} vs {via}");
    }
}

#[test]
fn oscillating_correction_peaks_early_at_a_few_percent() {
    let a = Analytics::new(10.0, Statistics::Quantum, ModeSet::continuum(1e-3));
    let mut worst = (0.0, 0.0);
    for i in 1..=60 {
        let t = 0.1 * i as f64;
        let p = a.xi2_of_t(t, true).unwrap();
        let rel = (p.xi2_tot.unwrap() - p.xi2).abs() / p.xi2;
        if rel > worst.0 {
            worst = (rel, t);
        }
    }
    assert!((0.01..=0.04).contains(&worst.0), "{worst:?}");
    assert!((0.8..=2.5).contains(&worst.1), "{worst:?}");
}

#[test]
fn curve_tends_to_asymptote() {
    let a = Analytics::new(0.5, Statistics::Quantum, ModeSet::continuum(1e-3));
    let late = a.xi2_of_t(1e3, false).unwrap();
    assert!((late.xi2 / late.asymptote - 1.0).abs() < 0.01);
    let t = a.t_eta(0.2, 1e6).unwrap().unwrap();
    let p = a.xi2_of_t(t, false).unwrap();
    assert!((p.xi2 / (1.2 * p.asymptote) - 1.0).abs() < 1e-6);
}

#[test]
fn t_eta_scales_as_inverse_quarter_power_of_gas_parameter() {
    let rho_a3 = [1e-8, 1e-7, 1e-6, 1e-5];
    let points: Vec<(f64, f64)> = rho_a3
        .iter()
        .map(|&r: &f64| {
            let a = Analytics::new(0.5, Statistics::Quantum, ModeSet::continuum(r.sqrt()));
            (r.ln(), t_best(0.2, a.xi2_min().unwrap()).unwrap().ln())
        })
        .collect();
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let slope = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / points.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.25).abs() < 0.02, "slope {slope}");
}

proptest! {
    #[test]
    fn bogoliubov_amplitudes_are_normalised(e in 1e-6f64..1e3, mu in 1e-3f64..1e2) {
        for stage in [Stage::BeforePulse, Stage::AfterPulse] {
            let p = dispersion(e, mu, stage).unwrap();
            prop_assert!((p.u * p.u - p.v * p.v - 1.0).abs() < 1e-9 * p.u * p.u);
            prop_assert!((p.u + p.v - p.s).abs() < 1e-9 * p.u);
            prop_assert!(p.eps >= e);
        }
    }

    #[test]
    fn classical_occupation_dominates_quantum(eps in 1e-4f64..50.0, t in 1e-3f64..20.0) {
        let q = occupation(eps, t, Statistics::Quantum).unwrap();
        let c = occupation(eps, t, Statistics::Classical).unwrap();
        prop_assert!(q <= c);
        prop_assert!(c - q <= 0.5 + 1e-12);
    }

    #[test]
    fn central_formula_reduces_to_two_mode(tau in 0.0f64..1e3) {
        let two = two_mode_xi2(tau);
        prop_assert!((central_xi2(tau, 0.0, 0.0, 0.0) - two).abs() <= 1e-12 * two);
        prop_assert!(two > 0.0 && two <= 1.0);
    }

    #[test]
    fn two_mode_curve_decreases(a in 0.0f64..100.0, b in 0.0f64..100.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(two_mode_xi2(hi) <= two_mode_xi2(lo));
    }

    #[test]
    fn best_time_shrinks_with_tolerance(xi in 1e-6f64..0.5, e1 in 0.01f64..0.99, e2 in 0.01f64..0.99) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(t_best(hi, xi).unwrap() <= t_best(lo, xi).unwrap());
    }
}
