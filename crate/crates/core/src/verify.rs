//! Fast self-check of the numerical core against independent oracles.

use crate::channels::{dephase_analytic, dephase_quadrature, prepare_scenario, Ordering, PhaseNoise, ScenarioSpec};
use crate::error::Result;
use crate::fock::{squeezed_displaced_state, ProbeParams, TruncationConfig, DEFAULT_TAIL_TOL};
use crate::homodyne::{fi_homodyne_state, DEFAULT_DERIVATIVE_STEP, PHASE_QUADRATURE};
use crate::linalg::max_abs_diff;
use crate::metrology::{fi_homodyne_noiseless_analytic, fidelity, qfi_of_state, qfi_pure_analytic, DEFAULT_DELTA_THETA};
use crate::wigner::{wigner_fock, wigner_gaussian_mixture, PhaseSpaceGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn run_checks() -> Vec<Check> {
    let tc = TruncationConfig::new(120, DEFAULT_TAIL_TOL).expect("valid truncation");
    let probe = ProbeParams::new(1.5, 0.5);
    vec![
        check("noiseless QFI matches closed form", (|| {
            let rho = squeezed_displaced_state(probe, &tc)?;
            let h = qfi_of_state(&rho, 0.0, DEFAULT_DELTA_THETA)?.value;
            let e = qfi_pure_analytic(probe);
            Ok((rel(h, e) < 0.01, format!("H = {h:.6}, closed form {e:.6}")))
        })()),
        check("noiseless homodyne FI matches closed form", (|| {
            let rho = squeezed_displaced_state(probe, &tc)?;
            let f = fi_homodyne_state(&rho, 0.0, PHASE_QUADRATURE, None, DEFAULT_DERIVATIVE_STEP)?.value;
            let e = fi_homodyne_noiseless_analytic(probe);
            Ok((rel(f, e) < 0.01, format!("F = {f:.6}, closed form {e:.6}")))
        })()),
        check("quadrature channel matches analytic damping", (|| {
            let rho = squeezed_displaced_state(probe, &tc)?;
            let noise = PhaseNoise::from_variance(0.1)?;
            let d = max_abs_diff(dephase_quadrature(&rho, &noise)?.entries(), dephase_analytic(&rho, &noise).entries());
            Ok((d <= 1e-8, format!("max entry deviation {d:.2e}")))
        })()),
        check("fidelity is symmetric and unity on the diagonal", (|| {
            let a = prepare_scenario(&ScenarioSpec::from_values(1.5, 0.5, 0.1, Ordering::SqueezeThenDephase)?, &tc)?;
            let b = prepare_scenario(&ScenarioSpec::from_values(1.5, 0.5, 0.1, Ordering::DephaseThenSqueeze)?, &tc)?;
            let (ab, ba, aa) = (fidelity(&a, &b)?, fidelity(&b, &a)?, fidelity(&a, &a)?);
            Ok(((ab - ba).abs() < 1e-9 && (aa - 1.0).abs() < 1e-9, format!("F(a,b)-F(b,a) = {:.1e}, F(a,a) = {aa:.12}", ab - ba)))
        })()),
        check("scenarios coincide without squeezing", (|| {
            let a = prepare_scenario(&ScenarioSpec::from_values(2.0, 0.0, 0.1, Ordering::SqueezeThenDephase)?, &tc)?;
            let b = prepare_scenario(&ScenarioSpec::from_values(2.0, 0.0, 0.1, Ordering::DephaseThenSqueeze)?, &tc)?;
            let d = max_abs_diff(a.entries(), b.entries());
            Ok((d <= 1e-12, format!("max entry deviation {d:.2e}")))
        })()),
        check("information inequality F <= H", (|| {
            let rho = prepare_scenario(&ScenarioSpec::from_values(1.5, 0.5, 0.1, Ordering::DephaseThenSqueeze)?, &tc)?;
            let h = qfi_of_state(&rho, 0.0, DEFAULT_DELTA_THETA)?.value;
            let f = fi_homodyne_state(&rho, 0.0, PHASE_QUADRATURE, None, DEFAULT_DERIVATIVE_STEP)?.value;
            Ok((f <= 1.02 * h, format!("F = {f:.6}, H = {h:.6}")))
        })()),
        check("Wigner Fock path matches Gaussian mixture", (|| {
            let spec = ScenarioSpec::from_values(1.5, 0.5, 0.1, Ordering::DephaseThenSqueeze)?;
            let grid = PhaseSpaceGrid::square((-3.0, 7.0), (-4.0, 4.0), 41)?;
            let fock = wigner_fock(&prepare_scenario(&spec, &tc)?, &grid, &tc)?;
            let mix = wigner_gaussian_mixture(&spec, &grid, 300)?;
            let d = fock.sup_distance(&mix)?;
            Ok((d <= 1e-6, format!("sup-norm {d:.2e}")))
        })()),
    ]
}
