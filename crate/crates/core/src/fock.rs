//! Single bosonic mode in a truncated Fock basis.
//!
//! Operators are dense `n_max × n_max` complex matrices. Unitaries are built
//! as exponentials of the truncated (anti-Hermitian) generators, so they are
//! exactly unitary on the truncated space; the truncation error shows up as a
//! deviation from the infinite-dimensional operator in the top levels, which
//! is what the tail-population check guards against.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};

/// Default admissible population in the top 5% of the basis.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;
/// Dimension for the large-amplitude curves.
pub const REFERENCE_N_MAX: usize = 600;
/// Dimension sufficient for `alpha <= 4, r <= 0.5` and `alpha <= 2, r <= 1`.
pub const DESK_N_MAX: usize = 200;
/// Largest squeezing magnitude accepted without re-verification by the caller.
pub const MAX_SQUEEZING: f64 = 3.0;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    pub n_max: usize,
    pub tail_tol: f64,
}

impl TruncationConfig {
    pub fn new(n_max: usize, tail_tol: f64) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::InvalidParameter(format!("n_max must be >= 2, got {n_max}")));
        }
        if !(0.0..1.0).contains(&tail_tol) {
            return Err(Error::InvalidParameter(format!(
                "tail_tol must lie in [0, 1), got {tail_tol}"
            )));
        }
        Ok(Self { n_max, tail_tol })
    }

    pub fn desk() -> Self {
        Self { n_max: DESK_N_MAX, tail_tol: DEFAULT_TAIL_TOL }
    }

    pub fn reference() -> Self {
        Self { n_max: REFERENCE_N_MAX, tail_tol: DEFAULT_TAIL_TOL }
    }

    pub fn with_n_max(self, n_max: usize) -> Result<Self> {
        Self::new(n_max, self.tail_tol)
    }

    /// First level counted as "tail": `ceil(0.95 * n_max)`.
    pub fn tail_start(&self) -> usize {
        tail_start(self.n_max)
    }
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self::reference()
    }
}

fn tail_start(dim: usize) -> usize {
    ((0.95 * dim as f64).ceil() as usize).min(dim)
}

/// A dense operator on the first `dim` Fock states.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    entries: CMatrix,
}

impl TruncatedOperator {
    pub fn from_entries(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), got: entries.ncols() });
        }
        Ok(Self { entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self { entries: Array2::eye(dim) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self { entries: linalg::adjoint(&self.entries) }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self { entries: self.entries.dot(&other.entries) })
    }

    pub fn apply(&self, ket: &Array1<C64>) -> Result<Array1<C64>> {
        check_dim(self.dim(), ket.len())?;
        Ok(self.entries.dot(ket))
    }

    /// `U ρ U†`, without re-validating the result.
    pub(crate) fn conjugate(&self, rho: &CMatrix) -> CMatrix {
        self.entries.dot(rho).dot(&linalg::adjoint(&self.entries))
    }
}

/// Hermitian, unit-trace, positive semidefinite state on the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

impl DensityMatrix {
    /// Validates every invariant, including positivity (one eigendecomposition)
    /// and truncation adequacy against `cfg.tail_tol`.
    pub fn new(entries: CMatrix, cfg: &TruncationConfig) -> Result<Self> {
        let rho = Self::checked_structure(entries, cfg)?;
        let min_eig = rho.min_eigenvalue()?;
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min_eig:.3e}")));
        }
        Ok(rho)
    }

    /// Rank-one state `|ψ⟩⟨ψ|`; the ket must be normalized.
    pub fn from_ket(ket: &Array1<C64>, cfg: &TruncationConfig) -> Result<Self> {
        let norm2: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("ket norm² = {norm2}")));
        }
        let n = ket.len();
        let entries = Array2::from_shape_fn((n, n), |(i, j)| ket[i] * ket[j].conj());
        Self::checked_structure(entries, cfg)
    }

    /// Pure Fock state `|n⟩⟨n|`.
    pub fn fock(n: usize, cfg: &TruncationConfig) -> Result<Self> {
        if n >= cfg.n_max {
            return Err(Error::InvalidParameter(format!("level {n} outside n_max {}", cfg.n_max)));
        }
        let mut ket = Array1::zeros(cfg.n_max);
        ket[n] = C64::new(1.0, 0.0);
        Self::from_ket(&ket, cfg)
    }

    pub fn vacuum(cfg: &TruncationConfig) -> Result<Self> {
        Self::fock(0, cfg)
    }

    /// For maps known to preserve every invariant exactly (diagonal phase
    /// conjugations, Fock-diagonal damping, convex mixtures of those).
    pub(crate) fn from_trusted(entries: CMatrix) -> Self {
        Self { entries }
    }

    fn checked_structure(entries: CMatrix, cfg: &TruncationConfig) -> Result<Self> {
        let dim = entries.nrows();
        if entries.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: entries.ncols() });
        }
        check_dim(cfg.n_max, dim)?;
        let defect = linalg::hermiticity_defect(&entries);
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("hermiticity defect {defect:.3e}")));
        }
        let tr = linalg::trace(&entries);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let rho = Self { entries };
        rho.check_tail(cfg)?;
        Ok(rho)
    }

    pub fn check_tail(&self, cfg: &TruncationConfig) -> Result<()> {
        let population = self.tail_population();
        if population > cfg.tail_tol {
            return Err(Error::TruncationInadequate {
                population,
                level: tail_start(self.dim()),
                tail_tol: cfg.tail_tol,
                n_max: self.dim(),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn population(&self, n: usize) -> f64 {
        self.entries[[n, n]].re
    }

    /// Population of levels `>= ceil(0.95 dim)`.
    pub fn tail_population(&self) -> f64 {
        (tail_start(self.dim())..self.dim()).map(|n| self.population(n).max(0.0)).sum()
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.entries)
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (w, _) = linalg::eigh(&self.entries)?;
        Ok(w[0])
    }

    pub fn mean_photon_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.population(n)).sum()
    }
}

/// Coherent amplitude and squeezing parameter, both real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub alpha: f64,
    pub r: f64,
}

impl ProbeParams {
    pub fn new(alpha: f64, r: f64) -> Self {
        Self { alpha, r }
    }

    /// `sinh² r + α² e^{2r}`.
    pub fn mean_photon_number(&self) -> f64 {
        self.r.sinh().powi(2) + self.alpha.powi(2) * (2.0 * self.r).exp()
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn check_ket_tail(ket: &Array1<C64>, cfg: &TruncationConfig) -> Result<()> {
    let start = cfg.tail_start();
    let population: f64 = ket.iter().skip(start).map(|z| z.norm_sqr()).sum();
    if population > cfg.tail_tol {
        return Err(Error::TruncationInadequate {
            population,
            level: start,
            tail_tol: cfg.tail_tol,
            n_max: cfg.n_max,
        });
    }
    Ok(())
}

/// `⟨m|â|n⟩ = √n δ_{m,n−1}`.
pub fn annihilation_op(cfg: &TruncationConfig) -> TruncatedOperator {
    let n = cfg.n_max;
    let mut a = Array2::zeros((n, n));
    for k in 1..n {
        a[[k - 1, k]] = C64::new((k as f64).sqrt(), 0.0);
    }
    TruncatedOperator { entries: a }
}

pub fn creation_op(cfg: &TruncationConfig) -> TruncatedOperator {
    annihilation_op(cfg).adjoint()
}

pub fn number_op(cfg: &TruncationConfig) -> TruncatedOperator {
    let n = cfg.n_max;
    let mut entries = Array2::zeros((n, n));
    for k in 0..n {
        entries[[k, k]] = C64::new(k as f64, 0.0);
    }
    TruncatedOperator { entries }
}

/// `X̂_φ = (â e^{-iφ} + â† e^{iφ})/√2`; φ = 0 gives X̂, φ = π/2 gives Ŷ.
pub fn quadrature_op(phi: f64, cfg: &TruncationConfig) -> TruncatedOperator {
    let a = annihilation_op(cfg).into_entries();
    let phase = C64::from_polar(1.0, -phi);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let entries = (&a * phase + &linalg::adjoint(&a) * phase.conj()) * C64::new(scale, 0.0);
    TruncatedOperator { entries }
}

pub fn x_quadrature(cfg: &TruncationConfig) -> TruncatedOperator {
    quadrature_op(0.0, cfg)
}

pub fn y_quadrature(cfg: &TruncationConfig) -> TruncatedOperator {
    quadrature_op(std::f64::consts::FRAC_PI_2, cfg)
}

/// `Ŝ(r) = exp(½[r â†² − r â²])`; r > 0 squeezes Ŷ and amplifies X̂.
pub fn squeezing_op(r: f64, cfg: &TruncationConfig) -> Result<TruncatedOperator> {
    if !r.is_finite() || r.abs() > MAX_SQUEEZING {
        return Err(Error::InvalidParameter(format!(
            "squeezing |r| must be <= {MAX_SQUEEZING}, got {r}"
        )));
    }
    let a = annihilation_op(cfg).into_entries();
    let a2 = a.dot(&a);
    let generator = (&linalg::adjoint(&a2) - &a2) * C64::new(0.5 * r, 0.0);
    let op = TruncatedOperator { entries: linalg::expm_antihermitian(&generator)? };
    check_ket_tail(&op.entries.column(0).to_owned(), cfg)?;
    Ok(op)
}

/// `D̂(α) = exp(α â† − α â)` for real α.
pub fn displacement_op(alpha: f64, cfg: &TruncationConfig) -> Result<TruncatedOperator> {
    if !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha = {alpha}")));
    }
    let a = annihilation_op(cfg).into_entries();
    let generator = (&linalg::adjoint(&a) - &a) * C64::new(alpha, 0.0);
    let op = TruncatedOperator { entries: linalg::expm_antihermitian(&generator)? };
    check_ket_tail(&op.entries.column(0).to_owned(), cfg)?;
    Ok(op)
}

/// `Û(θ) = exp(−iθ n̂)`, diagonal.
pub fn phase_shift_op(theta: f64, cfg: &TruncationConfig) -> TruncatedOperator {
    let n = cfg.n_max;
    let mut entries = Array2::zeros((n, n));
    for k in 0..n {
        entries[[k, k]] = C64::from_polar(1.0, -theta * k as f64);
    }
    TruncatedOperator { entries }
}

/// `Ŝ(r) D̂(α) |0⟩` as a ket.
pub fn squeezed_displaced_ket(p: ProbeParams, cfg: &TruncationConfig) -> Result<Array1<C64>> {
    let coherent = displacement_op(p.alpha, cfg)?.entries.column(0).to_owned();
    let ket = squeezing_op(p.r, cfg)?.apply(&coherent)?;
    check_ket_tail(&ket, cfg)?;
    Ok(ket)
}

/// `|ψ(r, α)⟩⟨ψ(r, α)|` with `|ψ⟩ = Ŝ(r) D̂(α) |0⟩`.
pub fn squeezed_displaced_state(p: ProbeParams, cfg: &TruncationConfig) -> Result<DensityMatrix> {
    DensityMatrix::from_ket(&squeezed_displaced_ket(p, cfg)?, cfg)
}

/// Coherent state `|α⟩⟨α|` built through the displacement operator.
pub fn coherent_state(alpha: f64, cfg: &TruncationConfig) -> Result<DensityMatrix> {
    squeezed_displaced_state(ProbeParams::new(alpha, 0.0), cfg)
}

/// `Tr[ρ A]`.
pub fn expectation(rho: &DensityMatrix, op: &TruncatedOperator) -> Result<C64> {
    check_dim(rho.dim(), op.dim())?;
    let (r, a) = (rho.entries(), op.entries());
    let n = rho.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += r[[i, k]] * a[[k, i]];
        }
    }
    Ok(acc)
}

/// Closed-form Fock amplitudes, independent of the matrix-exponential path.
pub mod closed_form {
    use super::*;

    /// `e^{−α²/2} αⁿ/√n!`, computed in log space.
    pub fn coherent_amplitudes(alpha: f64, dim: usize) -> Array1<C64> {
        let mut out = Array1::zeros(dim);
        let mut log_fact = 0.0f64;
        for n in 0..dim {
            if n > 0 {
                log_fact += (n as f64).ln();
            }
            let mag = if alpha == 0.0 {
                if n == 0 { 1.0 } else { 0.0 }
            } else {
                (-0.5 * alpha * alpha + n as f64 * alpha.abs().ln() - 0.5 * log_fact).exp()
            };
            let sign = if alpha < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
            out[n] = C64::new(sign * mag, 0.0);
        }
        out
    }

    /// `Ŝ(r)|0⟩`: `c_{2k} = (cosh r)^{-1/2} tanhᵏ r √(2k)! / (2ᵏ k!)`.
    pub fn squeezed_vacuum_amplitudes(r: f64, dim: usize) -> Array1<C64> {
        let mut out = Array1::zeros(dim);
        let t = r.tanh();
        let mut c = 1.0 / r.cosh().sqrt();
        let mut k = 0usize;
        while 2 * k < dim {
            out[2 * k] = C64::new(c, 0.0);
            // c_{2k+2} / c_{2k} = t √((2k+1)(2k+2)) / (2(k+1))
            let n = 2 * k as u64;
            c *= t * (((n + 1) * (n + 2)) as f64).sqrt() / (2.0 * (k + 1) as f64);
            k += 1;
        }
        out
    }

    /// `⟨n̂⟩ = sinh² r + α² (cosh r + sinh r)²` for real α, r.
    pub fn mean_photon_number(p: ProbeParams) -> f64 {
        p.r.sinh().powi(2) + p.alpha.powi(2) * (p.r.cosh() + p.r.sinh()).powi(2)
    }
}
