//! Property checks over random probe and noise parameters.

use phase_diffusion::channels::{dephase_analytic, encode_phase, prepare_scenario, Ordering, PhaseNoise, ScenarioSpec};
use phase_diffusion::fock::{squeezed_displaced_state, ProbeParams, TruncationConfig, DEFAULT_TAIL_TOL};
use phase_diffusion::homodyne::{homodyne_pdf, quadrature_moments, QuadratureGrid, PHASE_QUADRATURE};
use phase_diffusion::linalg::{hermiticity_defect, max_abs_diff};
use phase_diffusion::metrology::fidelity;
use phase_diffusion::wigner::{gaussian_components, mixture_moments};
use proptest::prelude::*;

fn cfg() -> TruncationConfig {
    TruncationConfig::new(90, DEFAULT_TAIL_TOL).unwrap()
}

fn order() -> impl Strategy<Value = Ordering> {
    prop_oneof![Just(Ordering::SqueezeThenDephase), Just(Ordering::DephaseThenSqueeze)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scenario_states_are_density_matrices(alpha in 0.0f64..2.0, r in -0.6f64..0.6, s2 in 0.0f64..0.3, o in order()) {
        let tc = cfg();
        let rho = prepare_scenario(&ScenarioSpec::from_values(alpha, r, s2, o).unwrap(), &tc).unwrap();
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-10);
        prop_assert!(hermiticity_defect(rho.entries()) < 1e-12);
        prop_assert!(rho.min_eigenvalue().unwrap() > -1e-10);
        prop_assert!(rho.purity() <= 1.0 + 1e-10);
    }

    #[test]
    fn dephasing_composes_additively(alpha in 0.0f64..2.0, r in -0.5f64..0.5, s1 in 0.0f64..0.2, s2 in 0.0f64..0.2) {
        let tc = cfg();
        let rho = squeezed_displaced_state(ProbeParams::new(alpha, r), &tc).unwrap();
        let two = dephase_analytic(&dephase_analytic(&rho, &PhaseNoise::from_variance(s1).unwrap()), &PhaseNoise::from_variance(s2).unwrap());
        let one = dephase_analytic(&rho, &PhaseNoise::from_variance(s1 + s2).unwrap());
        prop_assert!(max_abs_diff(two.entries(), one.entries()) < 1e-12);
    }

    #[test]
    fn fidelity_bounds_and_symmetry(a1 in 0.0f64..1.5, a2 in 0.0f64..1.5, r in -0.4f64..0.4, s2 in 0.0f64..0.2, o in order()) {
        let tc = cfg();
        let x = prepare_scenario(&ScenarioSpec::from_values(a1, r, s2, o).unwrap(), &tc).unwrap();
        let y = prepare_scenario(&ScenarioSpec::from_values(a2, r, s2, o).unwrap(), &tc).unwrap();
        let (fxy, fyx) = (fidelity(&x, &y).unwrap(), fidelity(&y, &x).unwrap());
        prop_assert!((fxy - fyx).abs() < 1e-9);
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&fxy));
        prop_assert!((fidelity(&x, &x).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn encoding_preserves_spectrum_and_is_covariant(alpha in 0.0f64..2.0, r in -0.5f64..0.5, s2 in 0.0f64..0.2, t1 in -1.0f64..1.0, t2 in -1.0f64..1.0) {
        let tc = cfg();
        let rho = prepare_scenario(&ScenarioSpec::from_values(alpha, r, s2, Ordering::DephaseThenSqueeze).unwrap(), &tc).unwrap();
        let twice = encode_phase(&encode_phase(&rho, t1), t2);
        let once = encode_phase(&rho, t1 + t2);
        prop_assert!(max_abs_diff(twice.entries(), once.entries()) < 1e-12);
        prop_assert!((once.purity() - rho.purity()).abs() < 1e-12);
    }

    #[test]
    fn homodyne_pdf_is_a_density(alpha in 0.0f64..2.0, r in -0.5f64..0.5, s2 in 0.0f64..0.3, o in order(), phi in 0.0f64..3.2) {
        let tc = cfg();
        let rho = prepare_scenario(&ScenarioSpec::from_values(alpha, r, s2, o).unwrap(), &tc).unwrap();
        let grid = QuadratureGrid::adaptive(&rho, phi).unwrap();
        let pdf = homodyne_pdf(&rho, phi, &grid).unwrap();
        prop_assert!(pdf.values.iter().all(|&p| p >= 0.0));
        prop_assert!((pdf.integral() - 1.0).abs() < 1e-6);
        let (mean, var) = quadrature_moments(&rho, phi).unwrap();
        let m: f64 = pdf.points.iter().zip(&pdf.weights).zip(&pdf.values).map(|((y, w), p)| y * w * p).sum();
        let v: f64 = pdf.points.iter().zip(&pdf.weights).zip(&pdf.values).map(|((y, w), p)| (y - m).powi(2) * w * p).sum();
        prop_assert!((m - mean).abs() < 1e-6);
        prop_assert!((v - var).abs() < 1e-6 * var.max(1.0), "v {v} var {var} grid {:?}", grid);
    }

    #[test]
    fn mixture_moments_match_fock_moments(alpha in 0.0f64..2.0, r in -0.5f64..0.5, s2 in 0.0f64..0.3, o in order()) {
        let tc = cfg();
        let spec = ScenarioSpec::from_values(alpha, r, s2, o).unwrap();
        let rho = prepare_scenario(&spec, &tc).unwrap();
        let (mx, mp, vx, vp) = mixture_moments(&gaussian_components(&spec, 200).unwrap());
        let (fx, fvx) = quadrature_moments(&rho, 0.0).unwrap();
        let (fp, fvp) = quadrature_moments(&rho, PHASE_QUADRATURE).unwrap();
        prop_assert!((mx - fx).abs() < 1e-8 && (mp - fp).abs() < 1e-8);
        prop_assert!((vx - fvx).abs() < 1e-8 && (vp - fvp).abs() < 1e-8);
    }
}
