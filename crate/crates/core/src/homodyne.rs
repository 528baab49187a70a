//! Homodyne outcome distributions and the classical Fisher information of
//! quadrature measurements.
//!
//! The measured quadrature at angle φ is `X̂_φ = (â e^{−iφ} + â† e^{iφ})/√2`,
//! so φ = 0 is X̂ and φ = π/2 is Ŷ. Its outcome density is the X̂ marginal of
//! the rotated state `Û(φ) ρ Û†(φ)`.

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::channels::{encode_phase, prepare_scenario, ScenarioSpec};
use crate::error::{Error, Result};
use crate::fock::{expectation, quadrature_op, DensityMatrix, TruncationConfig};
use crate::metrology::{fisher_information, FiEstimate, OutcomeDensity};

/// Measured-quadrature angle of Ŷ.
pub const PHASE_QUADRATURE: f64 = FRAC_PI_2;
pub const DEFAULT_GRID_POINTS: usize = 2001;
pub const MAX_GRID_POINTS: usize = 20001;
/// Half-width of the default grid, in standard deviations.
pub const DEFAULT_GRID_SPAN: f64 = 8.0;
/// Minimum half-width accepted by [`QuadratureGrid::check_covers`].
pub const MIN_GRID_SPAN: f64 = 6.0;
pub const DEFAULT_DERIVATIVE_STEP: f64 = 0.005;
const NEGATIVE_CLIP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub y_min: f64,
    pub y_max: f64,
    pub n_points: usize,
}

impl QuadratureGrid {
    pub fn new(y_min: f64, y_max: f64, n_points: usize) -> Result<Self> {
        if !(y_max > y_min) || n_points < 3 || !y_min.is_finite() || !y_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bad quadrature grid [{y_min}, {y_max}] with {n_points} points"
            )));
        }
        Ok(Self { y_min, y_max, n_points })
    }

    /// Covers `μ ± 8s` of `X̂_φ` and `±8s⊥` of the orthogonal quadrature.
    ///
    /// Phase-diffused states have marginals with non-Gaussian tails fed by
    /// components rotated towards the orthogonal axis; `s⊥` bounds their
    /// width. The spacing is at most `s/5`, capped at [`MAX_GRID_POINTS`].
    pub fn adaptive(rho: &DensityMatrix, phi: f64) -> Result<Self> {
        let (mean, var) = quadrature_moments(rho, phi)?;
        let (_, var_orth) = quadrature_moments(rho, phi + FRAC_PI_2)?;
        let (sd, sd_orth) = (var.max(0.0).sqrt(), var_orth.max(0.0).sqrt());
        let lo = (mean - DEFAULT_GRID_SPAN * sd).min(-DEFAULT_GRID_SPAN * sd_orth);
        let hi = (mean + DEFAULT_GRID_SPAN * sd).max(DEFAULT_GRID_SPAN * sd_orth);
        let wanted = ((hi - lo) / (0.2 * sd)).ceil() as usize + 1;
        Self::new(lo, hi, wanted.clamp(DEFAULT_GRID_POINTS, MAX_GRID_POINTS))
    }

    pub fn spacing(&self) -> f64 {
        (self.y_max - self.y_min) / (self.n_points - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_points).map(|i| self.y_min + i as f64 * h).collect()
    }

    /// Trapezoidal weights.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n_points];
        w[0] *= 0.5;
        w[self.n_points - 1] *= 0.5;
        w
    }

    /// Grid must reach at least six standard deviations either side of the mean.
    pub fn check_covers(&self, rho: &DensityMatrix, phi: f64) -> Result<()> {
        let (mean, var) = quadrature_moments(rho, phi)?;
        let half = MIN_GRID_SPAN * var.max(0.0).sqrt();
        if self.y_min > mean - half || self.y_max < mean + half {
            return Err(Error::InvalidParameter(format!(
                "grid [{}, {}] does not span mean {mean:.4} ± 6·{:.4}",
                self.y_min,
                self.y_max,
                var.sqrt()
            )));
        }
        Ok(())
    }
}

/// Mean and variance of `X̂_φ`.
pub fn quadrature_moments(rho: &DensityMatrix, phi: f64) -> Result<(f64, f64)> {
    let cfg = TruncationConfig { n_max: rho.dim(), tail_tol: 1.0 - f64::EPSILON };
    let x = quadrature_op(phi, &cfg);
    let x2 = x.matmul(&x)?;
    let mean = expectation(rho, &x)?.re;
    let second = expectation(rho, &x2)?.re;
    Ok((mean, second - mean * mean))
}

/// Hermite functions `ψ_0(y) … ψ_{count−1}(y)`, from the three-term
/// recurrence with a running exponent so neither overflow nor premature
/// underflow occurs for large `n` or `|y|`.
pub fn hermite_functions(count: usize, y: f64) -> Vec<f64> {
    let mut out = vec![0.0; count];
    if count == 0 {
        return out;
    }
    let mut log_scale = -0.5 * y * y - 0.25 * PI.ln();
    let rescue = |v: f64, log_scale: f64| {
        if v == 0.0 {
            0.0
        } else {
            v.signum() * (v.abs().ln() + log_scale).exp()
        }
    };
    let (mut prev, mut cur) = (0.0f64, 1.0f64);
    out[0] = rescue(cur, log_scale);
    for n in 0..count - 1 {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * y * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > 1e100 {
            cur *= 1e-100;
            prev *= 1e-100;
            log_scale += 100.0 * 10f64.ln();
        }
        out[n + 1] = rescue(cur, log_scale);
    }
    out
}

/// `ψ_n(y) = π^{−1/4} (2ⁿ n!)^{−1/2} H_n(y) e^{−y²/2}`.
pub fn quadrature_wavefunction(n: usize, y: f64) -> f64 {
    hermite_functions(n + 1, y)[n]
}

/// Precomputed Hermite-function table for one grid and basis size.
pub struct HomodyneEvaluator {
    grid: QuadratureGrid,
    /// `table[[i, n]] = ψ_n(y_i)`.
    table: Array2<f64>,
}

impl HomodyneEvaluator {
    pub fn new(grid: QuadratureGrid, dim: usize) -> Self {
        let points = grid.points();
        let mut table = Array2::zeros((points.len(), dim));
        for (i, &y) in points.iter().enumerate() {
            for (n, v) in hermite_functions(dim, y).into_iter().enumerate() {
                table[[i, n]] = v;
            }
        }
        Self { grid, table }
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    /// `p(y) = Σ_{mn} [Û(φ)ρÛ†(φ)]_{mn} ψ_m(y) ψ_n(y)`; the imaginary part of
    /// the rotated state cancels because ψ_n is real.
    pub fn pdf(&self, rho: &DensityMatrix, phi: f64) -> Result<OutcomeDensity> {
        if rho.dim() != self.table.ncols() {
            return Err(Error::DimensionMismatch { expected: self.table.ncols(), got: rho.dim() });
        }
        let rotated = encode_phase(rho, phi);
        let real = rotated.entries().mapv(|z| z.re);
        let projected = self.table.dot(&real);
        let mut values = Vec::with_capacity(self.grid.n_points);
        for (row_t, row_p) in self.table.rows().into_iter().zip(projected.rows()) {
            let p: f64 = row_t.iter().zip(row_p.iter()).map(|(a, b)| a * b).sum();
            if p < -NEGATIVE_CLIP {
                return Err(Error::InvalidState(format!("negative outcome density {p:.3e}")));
            }
            values.push(p.max(0.0));
        }
        let density = OutcomeDensity { points: self.grid.points(), weights: self.grid.weights(), values };
        density.check_normalized()?;
        Ok(density)
    }
}

pub fn homodyne_pdf(rho: &DensityMatrix, phi: f64, grid: &QuadratureGrid) -> Result<OutcomeDensity> {
    HomodyneEvaluator::new(*grid, rho.dim()).pdf(rho, phi)
}

/// Homodyne FI of the encoded family `Û(θ) ρ Û†(θ)` measured at angle `phi`.
/// Encoding by θ is the same as measuring at `phi + θ`, so the derivative is
/// taken in the measurement angle.
pub fn fi_homodyne_state(
    rho: &DensityMatrix,
    theta: f64,
    phi: f64,
    grid: Option<QuadratureGrid>,
    derivative_step: f64,
) -> Result<FiEstimate> {
    let grid = match grid {
        Some(g) => g,
        None => QuadratureGrid::adaptive(rho, phi + theta)?,
    };
    let eval = HomodyneEvaluator::new(grid, rho.dim());
    fisher_information(|t| eval.pdf(rho, phi + t), theta, derivative_step)
}

/// Ŷ-homodyne FI of a scenario state.
pub fn fi_homodyne(
    spec: &ScenarioSpec,
    theta: f64,
    cfg: &TruncationConfig,
    grid: Option<QuadratureGrid>,
    derivative_step: f64,
) -> Result<FiEstimate> {
    let rho = prepare_scenario(spec, cfg)?;
    fi_homodyne_state(&rho, theta, PHASE_QUADRATURE, grid, derivative_step)
}
