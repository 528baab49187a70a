//! Quantum and classical Fisher information, Cramér–Rao bounds and the
//! scenario-comparison ratios.

use ndarray::s;
use ndarray_linalg::SVD;
use serde::{Deserialize, Serialize};

use crate::channels::{encode_phase, prepare_scenario, ScenarioSpec};
use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, ProbeParams, TruncationConfig};
use crate::linalg::{self, CMatrix, C64};

/// Phase step used for the published results.
pub const DEFAULT_DELTA_THETA: f64 = 0.005;
/// Eigenvalues of the reference state below this are treated as zero.
pub const EIGEN_CLIP: f64 = 1e-12;
/// Relative change under step halving above which a QFI estimate is flagged.
pub const RICHARDSON_TOL: f64 = 0.02;
/// Grid points with smaller outcome density are left out of the FI sum.
pub const PDF_FLOOR: f64 = 1e-12;
/// Accepted normalization error of an outcome density.
pub const NORMALIZATION_TOL: f64 = 1e-6;

const INPUT_HERMITIAN_TOL: f64 = 1e-10;
const VANISHING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Reliability {
    Reliable,
    Unreliable(String),
}

impl Reliability {
    pub fn is_reliable(&self) -> bool {
        matches!(self, Reliability::Reliable)
    }
}

/// Uhlmann fidelity together with the eigenvalue mass dropped on the way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fidelity {
    pub value: f64,
    /// Sum of |λ| over the clipped eigenvalues of both arguments.
    pub clipped: f64,
}

/// `F(ρ, τ) = Tr √(√ρ τ √ρ)`.
pub fn fidelity(rho: &DensityMatrix, tau: &DensityMatrix) -> Result<f64> {
    Ok(fidelity_detailed(rho.entries(), tau.entries())?.value)
}

/// Fidelity on raw matrices, as the trace norm `‖√ρ √τ‖₁`.
///
/// Each square root is restricted to the eigenvectors with eigenvalue at or
/// above [`EIGEN_CLIP`]; the singular values of
/// `diag(√λ_ρ) V_ρ† V_τ diag(√λ_τ)` are the square roots of the eigenvalues
/// of `√ρ τ √ρ`. Summing singular values keeps the result symmetric in its
/// arguments and avoids taking square roots of round-off eigenvalues.
pub fn fidelity_detailed(rho: &CMatrix, tau: &CMatrix) -> Result<Fidelity> {
    if rho.dim() != tau.dim() {
        return Err(Error::DimensionMismatch { expected: rho.nrows(), got: tau.nrows() });
    }
    for m in [rho, tau] {
        let defect = linalg::hermiticity_defect(m);
        if defect > INPUT_HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("non-Hermitian input (defect {defect:.3e})")));
        }
    }
    let (root_rho, clip_rho) = clipped_root(rho)?;
    let (root_tau, clip_tau) = clipped_root(tau)?;
    let clipped = clip_rho + clip_tau;
    if root_rho.ncols() == 0 || root_tau.ncols() == 0 {
        return Ok(Fidelity { value: 0.0, clipped });
    }
    let overlap = linalg::adjoint(&root_rho).dot(&root_tau);
    let (_, singular, _) = overlap.svd(false, false)?;
    Ok(Fidelity { value: singular.sum(), clipped })
}

/// `V_k diag(√λ_k)` over eigenvalues `λ_k >= EIGEN_CLIP`, plus the clipped mass.
fn clipped_root(m: &CMatrix) -> Result<(CMatrix, f64)> {
    let (w, v) = linalg::eigh(m)?;
    // ascending eigenvalues: the kept block is the tail
    let first = w.iter().position(|&x| x >= EIGEN_CLIP).unwrap_or(w.len());
    let clipped = w.iter().take(first).map(|x| x.abs()).sum();
    let mut root = v.slice(s![.., first..]).to_owned();
    for (mut col, &lambda) in root.columns_mut().into_iter().zip(w.iter().skip(first)) {
        let scale = C64::new(lambda.sqrt(), 0.0);
        col.mapv_inplace(|z| z * scale);
    }
    Ok((root, clipped))
}

/// Finite-difference form of the fidelity-based QFI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceScheme {
    /// `8(1 − F(ρ_{θ−δ/2}, ρ_{θ+δ/2}))/δ²`.
    Central,
    /// `8(1 − F(ρ_θ, ρ_{θ+δ}))/δ²`.
    Forward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfiEstimate {
    pub value: f64,
    pub delta_theta: f64,
    /// `|H(δ/2) − H(δ)| / |H(δ)|`.
    pub richardson_check: f64,
    /// Forward-difference value at the same δ.
    pub forward_value: f64,
    pub clipped: f64,
    pub status: Reliability,
}

fn qfi_single(rho: &DensityMatrix, theta: f64, delta: f64, scheme: DifferenceScheme) -> Result<(f64, f64)> {
    let (lo, hi) = match scheme {
        DifferenceScheme::Central => (theta - 0.5 * delta, theta + 0.5 * delta),
        DifferenceScheme::Forward => (theta, theta + delta),
    };
    let f = fidelity_detailed(encode_phase(rho, lo).entries(), encode_phase(rho, hi).entries())?;
    Ok((8.0 * (1.0 - f.value) / (delta * delta), f.clipped))
}

/// QFI of the family `θ ↦ Û(θ) ρ Û†(θ)` at `theta`.
pub fn qfi_of_state(rho: &DensityMatrix, theta: f64, delta_theta: f64) -> Result<QfiEstimate> {
    if !(delta_theta > 0.0 && delta_theta <= 0.1) {
        return Err(Error::InvalidParameter(format!("delta_theta must lie in (0, 0.1], got {delta_theta}")));
    }
    let (value, clipped) = qfi_single(rho, theta, delta_theta, DifferenceScheme::Central)?;
    let (half, _) = qfi_single(rho, theta, 0.5 * delta_theta, DifferenceScheme::Central)?;
    let (forward_value, _) = qfi_single(rho, theta, delta_theta, DifferenceScheme::Forward)?;
    let richardson_check = relative_change(value, half);
    let status = if richardson_check > RICHARDSON_TOL {
        Reliability::Unreliable(format!(
            "halving delta_theta changes the QFI by {:.2}%",
            100.0 * richardson_check
        ))
    } else {
        Reliability::Reliable
    };
    Ok(QfiEstimate { value, delta_theta, richardson_check, forward_value, clipped, status })
}

fn relative_change(reference: f64, other: f64) -> f64 {
    let diff = (other - reference).abs();
    if reference.abs() < 1e-9 && other.abs() < 1e-9 {
        0.0
    } else {
        diff / reference.abs().max(1e-9)
    }
}

/// QFI of the encoded scenario state, `ρ_θ = Û(θ) ρ_spec Û†(θ)`.
pub fn qfi_from_fidelity(
    spec: &ScenarioSpec,
    theta: f64,
    delta_theta: f64,
    cfg: &TruncationConfig,
) -> Result<QfiEstimate> {
    let rho = prepare_scenario(spec, cfg)?;
    qfi_of_state(&rho, theta, delta_theta)
}

/// Noiseless QFI, `[cosh(4r) − 1] + 4 e^{4r} α²`.
pub fn qfi_pure_analytic(p: ProbeParams) -> f64 {
    ((4.0 * p.r).cosh() - 1.0) + 4.0 * (4.0 * p.r).exp() * p.alpha * p.alpha
}

/// Noiseless Ŷ-homodyne FI at θ ≈ 0, `4 e^{4r} α²`.
pub fn fi_homodyne_noiseless_analytic(p: ProbeParams) -> f64 {
    4.0 * (4.0 * p.r).exp() * p.alpha * p.alpha
}

/// Outcome density sampled on a quadrature grid: `Σ weights·values ≈ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDensity {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
}

impl OutcomeDensity {
    pub fn integral(&self) -> f64 {
        self.weights.iter().zip(&self.values).map(|(w, p)| w * p).sum()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let integral = self.integral();
        if (integral - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { integral, tolerance: NORMALIZATION_TOL });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub min: f64,
    pub max: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiEstimate {
    pub value: f64,
    pub grid: GridSummary,
    pub derivative_step: f64,
    /// `|∫p − 1|` at the estimation point.
    pub normalization_error: f64,
}

/// Classical FI `Σ_i w_i (∂_θ p_i)² / p_i` with a central difference of the
/// given step. The three densities must share one grid.
pub fn fisher_information<F>(pdf: F, theta: f64, derivative_step: f64) -> Result<FiEstimate>
where
    F: Fn(f64) -> Result<OutcomeDensity>,
{
    if !(derivative_step > 0.0) {
        return Err(Error::InvalidParameter(format!("derivative step must be > 0, got {derivative_step}")));
    }
    let center = pdf(theta)?;
    let plus = pdf(theta + derivative_step)?;
    let minus = pdf(theta - derivative_step)?;
    for d in [&center, &plus, &minus] {
        d.check_normalized()?;
        if d.points.len() != center.points.len() || d.weights.len() != d.points.len() || d.values.len() != d.points.len() {
            return Err(Error::DimensionMismatch { expected: center.points.len(), got: d.points.len() });
        }
    }
    let mut value = 0.0;
    for i in 0..center.points.len() {
        let p = center.values[i];
        if p < PDF_FLOOR {
            continue;
        }
        let dp = (plus.values[i] - minus.values[i]) / (2.0 * derivative_step);
        value += center.weights[i] * dp * dp / p;
    }
    let grid = GridSummary {
        min: center.points.first().copied().unwrap_or(0.0),
        max: center.points.last().copied().unwrap_or(0.0),
        n_points: center.points.len(),
    };
    Ok(FiEstimate { value, grid, derivative_step, normalization_error: (center.integral() - 1.0).abs() })
}

/// Cramér–Rao variance bound `1 / (M · info)`.
pub fn cramer_rao_variance(info: f64, repetitions: u64) -> Result<f64> {
    if !(info > 0.0) {
        return Err(Error::InvalidParameter(format!("information must be > 0, got {info}")));
    }
    if repetitions == 0 {
        return Err(Error::InvalidParameter("repetitions must be >= 1".into()));
    }
    Ok(1.0 / (repetitions as f64 * info))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRatios {
    /// `H_(a) / H_(b)`.
    pub zeta_h: f64,
    /// `F_(a) / F_(b)`.
    pub zeta_f: f64,
    /// `H_(b) / H_(a)`.
    pub zeta_h_inverse: f64,
    /// `F_(b) / F_(a)`.
    pub zeta_f_inverse: f64,
    /// `H_(b) ≥ H_(a)`.
    pub squeeze_after_noise_favourable: bool,
}

/// Ratios between the two scenarios at a common `(α, r, σ)`.
pub fn scenario_ratios(
    h_a: &QfiEstimate,
    h_b: &QfiEstimate,
    f_a: &FiEstimate,
    f_b: &FiEstimate,
) -> Result<ScenarioRatios> {
    for h in [h_a, h_b] {
        if let Reliability::Unreliable(reason) = &h.status {
            return Err(Error::Unreliable(reason.clone()));
        }
    }
    let ratio = |num: f64, den: f64, name: &'static str| {
        if den.abs() < VANISHING {
            Err(Error::VanishingDenominator(name))
        } else {
            Ok(num / den)
        }
    };
    Ok(ScenarioRatios {
        zeta_h: ratio(h_a.value, h_b.value, "zeta_H")?,
        zeta_f: ratio(f_a.value, f_b.value, "zeta_F")?,
        zeta_h_inverse: ratio(h_b.value, h_a.value, "1/zeta_H")?,
        zeta_f_inverse: ratio(f_b.value, f_a.value, "1/zeta_F")?,
        squeeze_after_noise_favourable: h_b.value >= h_a.value,
    })
}
