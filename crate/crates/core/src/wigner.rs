//! Wigner functions on phase-space grids.
//!
//! Coordinates are the eigenvalue scales of X̂ and Ŷ (vacuum variance 1/2 per
//! axis), normalized so that `∫∫ W dx dp = 1`; the vacuum peaks at `1/π`.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{NodeCount, Ordering, PhaseNoise, QuadratureKind, ScenarioSpec};
use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, TruncationConfig};
use crate::linalg::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub x_range: (f64, f64),
    pub p_range: (f64, f64),
    pub nx: usize,
    pub np: usize,
}

impl PhaseSpaceGrid {
    pub fn new(x_range: (f64, f64), p_range: (f64, f64), nx: usize, np: usize) -> Result<Self> {
        if !(x_range.1 > x_range.0) || !(p_range.1 > p_range.0) || nx < 2 || np < 2 {
            return Err(Error::InvalidParameter(format!(
                "bad phase-space grid x {x_range:?} p {p_range:?} ({nx}×{np})"
            )));
        }
        Ok(Self { x_range, p_range, nx, np })
    }

    /// Square grid of `n × n` points.
    pub fn square(x_range: (f64, f64), p_range: (f64, f64), n: usize) -> Result<Self> {
        Self::new(x_range, p_range, n, n)
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x_range, self.nx)
    }

    pub fn ps(&self) -> Vec<f64> {
        linspace(self.p_range, self.np)
    }

    pub fn dx(&self) -> f64 {
        (self.x_range.1 - self.x_range.0) / (self.nx - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_range.1 - self.p_range.0) / (self.np - 1) as f64
    }
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + i as f64 * h).collect()
}

fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] *= 0.5;
    w[n - 1] *= 0.5;
    w
}

/// Real field sampled on a grid; `values[[ix, ip]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerField {
    pub grid: PhaseSpaceGrid,
    pub values: Array2<f64>,
}

impl WignerField {
    /// Trapezoidal `∫∫ W dx dp`.
    pub fn integral(&self) -> f64 {
        let wx = trapezoid_weights(self.grid.nx, self.grid.dx());
        let wp = trapezoid_weights(self.grid.np, self.grid.dp());
        let mut total = 0.0;
        for (ix, row) in self.values.rows().into_iter().enumerate() {
            total += wx[ix] * row.iter().zip(&wp).map(|(v, w)| v * w).sum::<f64>();
        }
        total
    }

    /// `∫ W dx` as a function of p: the Ŷ outcome density.
    pub fn marginal_p(&self) -> Vec<f64> {
        let wx = trapezoid_weights(self.grid.nx, self.grid.dx());
        (0..self.grid.np)
            .map(|ip| (0..self.grid.nx).map(|ix| wx[ix] * self.values[[ix, ip]]).sum())
            .collect()
    }

    /// `∫ W dp` as a function of x: the X̂ outcome density.
    pub fn marginal_x(&self) -> Vec<f64> {
        let wp = trapezoid_weights(self.grid.np, self.grid.dp());
        (0..self.grid.nx)
            .map(|ix| (0..self.grid.np).map(|ip| wp[ip] * self.values[[ix, ip]]).sum())
            .collect()
    }

    /// Grid coordinates of the maximum.
    pub fn peak(&self) -> (f64, f64) {
        let (mut best, mut at) = (f64::NEG_INFINITY, (0, 0));
        for ((ix, ip), &v) in self.values.indexed_iter() {
            if v > best {
                best = v;
                at = (ix, ip);
            }
        }
        (self.grid.xs()[at.0], self.grid.ps()[at.1])
    }

    pub fn sup_distance(&self, other: &WignerField) -> Result<f64> {
        if self.values.dim() != other.values.dim() {
            return Err(Error::DimensionMismatch { expected: self.values.len(), got: other.values.len() });
        }
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs())))
    }

    /// Dense CSV: `# key: value` metadata lines, a header row of x values,
    /// then one row per p value (first column p).
    pub fn write_csv<W: Write>(&self, mut out: W, metadata: &[(String, String)]) -> Result<()> {
        for (k, v) in metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        writeln!(out, "# rows: p, columns: x, values: W(x, p)")?;
        let xs = self.grid.xs();
        let mut header = String::from("p\\x");
        for x in &xs {
            header.push(',');
            header.push_str(&crate::sweep::format_value(*x));
        }
        writeln!(out, "{header}")?;
        for (ip, p) in self.grid.ps().iter().enumerate() {
            let mut line = crate::sweep::format_value(*p);
            for ix in 0..xs.len() {
                line.push(',');
                line.push_str(&crate::sweep::format_value(self.values[[ix, ip]]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Tables shared by every grid point of one evaluation.
struct LaguerreTables {
    sqrt: Vec<f64>,
    inv_sqrt: Vec<f64>,
    /// `½ ln d!`
    half_ln_factorial: Vec<f64>,
}

impl LaguerreTables {
    fn new(n: usize) -> Self {
        let sqrt: Vec<f64> = (0..=n).map(|k| (k as f64).sqrt()).collect();
        let inv_sqrt = sqrt.iter().map(|s| if *s > 0.0 { 1.0 / s } else { 0.0 }).collect();
        let mut half_ln_factorial = vec![0.0; n + 1];
        for d in 1..=n {
            half_ln_factorial[d] = half_ln_factorial[d - 1] + 0.5 * (d as f64).ln();
        }
        Self { sqrt, inv_sqrt, half_ln_factorial }
    }
}

const RESCALE: f64 = 1e150;

/// `W(β) = (2/π) Tr[ρ D̂(β) Π̂ D̂†(β)]` at `β = (x + ip)/√2`, in the
/// `dx dp` normalization:
///
/// `W = (1/π) Σ_{m, d} (−1)^m ρ_{m,m+d} e^{idφ} f_{m,d}(4|β|²)` (d > 0 terms
/// doubled, real part), with `f_{m,d}(u) = √(m!/(m+d)!) u^{d/2} e^{−u/2} L_m^d(u)`.
/// The `f_{m,d}` are bounded by one; they are generated by the Laguerre
/// recurrence in `m` with a running log scale so the `e^{−u/2}` start value
/// never underflows on its own.
fn wigner_point(rho: &CMatrix, beta: C64, t: &LaguerreTables) -> f64 {
    let n = rho.nrows();
    let u = 4.0 * beta.norm_sqr();
    let phase = if beta.norm_sqr() > 0.0 { beta / beta.norm() } else { C64::new(1.0, 0.0) };
    let ln_u = u.ln();
    let mut total = 0.0;
    let mut rot = C64::new(1.0, 0.0);
    for d in 0..n {
        if d > 0 {
            rot *= phase;
            if u == 0.0 {
                break;
            }
        }
        let mut log_scale = if d == 0 { -0.5 * u } else { 0.5 * d as f64 * ln_u - 0.5 * u - t.half_ln_factorial[d] };
        let mut factor = log_scale.exp();
        let (mut prev, mut cur) = (0.0f64, 1.0f64);
        let mut acc = C64::new(0.0, 0.0);
        let mut sign = 1.0;
        for m in 0..n - d {
            acc += rho[[m, m + d]] * (sign * cur * factor);
            sign = -sign;
            let next = ((2 * m + 1 + d) as f64 - u) * cur - t.sqrt[m] * t.sqrt[m + d] * prev;
            prev = cur;
            cur = next * t.inv_sqrt[m + 1] * t.inv_sqrt[m + 1 + d];
            if cur.abs() > RESCALE {
                cur /= RESCALE;
                prev /= RESCALE;
                log_scale += RESCALE.ln();
                factor = log_scale.exp();
            }
        }
        total += if d == 0 { acc.re } else { 2.0 * (acc * rot).re };
    }
    total / PI
}

/// Wigner function of a Fock-basis density matrix.
pub fn wigner_fock(rho: &DensityMatrix, grid: &PhaseSpaceGrid, cfg: &TruncationConfig) -> Result<WignerField> {
    rho.check_tail(cfg)?;
    let xs = grid.xs();
    let ps = grid.ps();
    let entries = rho.entries();
    let tables = LaguerreTables::new(rho.dim());
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| {
            ps.iter()
                .map(|&p| wigner_point(entries, C64::new(x, p) * std::f64::consts::FRAC_1_SQRT_2, &tables))
                .collect()
        })
        .collect();
    let mut values = Array2::zeros((grid.nx, grid.np));
    for (ix, row) in rows.into_iter().enumerate() {
        for (ip, v) in row.into_iter().enumerate() {
            values[[ix, ip]] = v;
        }
    }
    Ok(WignerField { grid: *grid, values })
}

/// One weighted Gaussian term of the mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub phase: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl GaussianComponent {
    pub fn density(&self, x: f64, p: f64) -> f64 {
        let [[a, b], [_, d]] = self.cov;
        let det = a * d - b * b;
        let (dx, dp) = (x - self.mean[0], p - self.mean[1]);
        let quad = (d * dx * dx - 2.0 * b * dx * dp + a * dp * dp) / det;
        (-0.5 * quad).exp() / (2.0 * PI * det.sqrt())
    }
}

fn rotate(phi: f64, mean: [f64; 2], cov: [[f64; 2]; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    // Û(φ) maps ⟨â⟩ to ⟨â⟩e^{−iφ}: (x, p) → (x cos φ + p sin φ, −x sin φ + p cos φ)
    let (s, c) = phi.sin_cos();
    let r = [[c, s], [-s, c]];
    let m = [r[0][0] * mean[0] + r[0][1] * mean[1], r[1][0] * mean[0] + r[1][1] * mean[1]];
    (m, conjugate_cov(r, cov))
}

fn squeeze(r: f64, mean: [f64; 2], cov: [[f64; 2]; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let s = [[r.exp(), 0.0], [0.0, (-r).exp()]];
    ([s[0][0] * mean[0], s[1][1] * mean[1]], conjugate_cov(s, cov))
}

fn conjugate_cov(m: [[f64; 2]; 2], c: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[i][j] += m[i][k] * c[k][l] * m[j][l];
                }
            }
        }
    }
    out
}

/// Mixture components: the pure-state moments rotated by each quadrature
/// phase, followed in scenario (b) by the symplectic squeezing map.
pub fn gaussian_components(spec: &ScenarioSpec, n_components: usize) -> Result<Vec<GaussianComponent>> {
    if n_components == 0 {
        return Err(Error::InvalidParameter("n_components must be >= 1".into()));
    }
    let noise = match spec.noise.kind {
        QuadratureKind::GaussHermite => PhaseNoise::gauss_hermite(spec.noise.sigma, n_components)?,
        QuadratureKind::Periodic => PhaseNoise::periodic(spec.noise.sigma, NodeCount::Fixed(n_components))?,
    };
    let rule = noise.rule(n_components)?;
    let (alpha, r) = (spec.probe.alpha, spec.probe.r);
    let root2 = std::f64::consts::SQRT_2;
    Ok(rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&phase, &weight)| {
            let (mean, cov) = match spec.order {
                Ordering::SqueezeThenDephase => {
                    let (m, c) = squeeze(r, [root2 * alpha, 0.0], [[0.5, 0.0], [0.0, 0.5]]);
                    rotate(phase, m, c)
                }
                Ordering::DephaseThenSqueeze => {
                    let (m, c) = rotate(phase, [root2 * alpha, 0.0], [[0.5, 0.0], [0.0, 0.5]]);
                    squeeze(r, m, c)
                }
            };
            GaussianComponent { weight, phase, mean, cov }
        })
        .collect())
}

/// Wigner function as a weighted sum of Gaussian Wigner functions.
pub fn wigner_gaussian_mixture(spec: &ScenarioSpec, grid: &PhaseSpaceGrid, n_components: usize) -> Result<WignerField> {
    let components = gaussian_components(spec, n_components)?;
    let xs = grid.xs();
    let ps = grid.ps();
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| {
            ps.iter()
                .map(|&p| components.iter().map(|c| c.weight * c.density(x, p)).sum())
                .collect()
        })
        .collect();
    let mut values = Array2::zeros((grid.nx, grid.np));
    for (ix, row) in rows.into_iter().enumerate() {
        for (ip, v) in row.into_iter().enumerate() {
            values[[ix, ip]] = v;
        }
    }
    Ok(WignerField { grid: *grid, values })
}

/// First and second moments of the mixture: `(⟨X̂⟩, ⟨Ŷ⟩, Var X̂, Var Ŷ)`.
pub fn mixture_moments(components: &[GaussianComponent]) -> (f64, f64, f64, f64) {
    let mx: f64 = components.iter().map(|c| c.weight * c.mean[0]).sum();
    let mp: f64 = components.iter().map(|c| c.weight * c.mean[1]).sum();
    let vx: f64 = components.iter().map(|c| c.weight * (c.cov[0][0] + (c.mean[0] - mx).powi(2))).sum();
    let vp: f64 = components.iter().map(|c| c.weight * (c.cov[1][1] + (c.mean[1] - mp).powi(2))).sum();
    (mx, mp, vx, vp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::prepare_scenario;
    use crate::fock::{coherent_state, DEFAULT_TAIL_TOL};

    fn cfg(n: usize) -> TruncationConfig {
        TruncationConfig::new(n, DEFAULT_TAIL_TOL).unwrap()
    }

    #[test]
    fn vacuum_and_single_photon_at_origin() {
        let c = cfg(10);
        let grid = PhaseSpaceGrid::square((-1.0, 1.0), (-1.0, 1.0), 3).unwrap();
        let vac = wigner_fock(&DensityMatrix::vacuum(&c).unwrap(), &grid, &c).unwrap();
        assert!((vac.values[[1, 1]] - 1.0 / PI).abs() < 1e-15);
        assert!((vac.values[[2, 1]] - (-1.0f64).exp() / PI).abs() < 1e-15);
        let one = wigner_fock(&DensityMatrix::fock(1, &c).unwrap(), &grid, &c).unwrap();
        assert!((one.values[[1, 1]] + 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn coherent_peak_location() {
        let c = cfg(60);
        let grid = PhaseSpaceGrid::new((0.0, 5.0), (-2.0, 2.0), 201, 81).unwrap();
        let field = wigner_fock(&coherent_state(2.0, &c).unwrap(), &grid, &c).unwrap();
        let (x, p) = field.peak();
        assert!((x - 2.0 * 2f64.sqrt()).abs() <= grid.dx());
        assert!(p.abs() <= grid.dp());
    }

    #[test]
    fn rotated_coherent_peak_follows_the_encoding() {
        // Û(θ)|2⟩ = |2e^{−iθ}⟩: mean (2√2 cos θ, −2√2 sin θ)
        let c = cfg(60);
        let theta = 0.7f64;
        let rho = crate::channels::encode_phase(&coherent_state(2.0, &c).unwrap(), theta);
        let (x0, p0) = (2.0 * 2f64.sqrt() * theta.cos(), -2.0 * 2f64.sqrt() * theta.sin());
        let grid = PhaseSpaceGrid::square((x0 - 0.5, x0 + 0.5), (p0 - 0.5, p0 + 0.5), 3).unwrap();
        let field = wigner_fock(&rho, &grid, &c).unwrap();
        assert!((field.values[[1, 1]] - 1.0 / PI).abs() < 1e-12);
        assert!((field.values[[0, 2]] - (-0.5f64).exp() / PI).abs() < 1e-12);
    }

    #[test]
    fn high_fock_state_far_from_origin() {
        // (−1)^n e^{−x²−p²} L_n(2x² + 2p²)/π for n = 370, 60-digit reference
        let c = cfg(400);
        let rho = DensityMatrix::fock(370, &c).unwrap();
        let grid = PhaseSpaceGrid::new((0.0, 40.0), (0.0, 20.0), 5, 2).unwrap();
        let field = wigner_fock(&rho, &grid, &c).unwrap();
        for (ix, ip, expect) in [
            (2, 0, 0.00926954185683),
            (2, 1, 1.18143398707e-7),
            (3, 0, 3.7422733035e-23),
            (4, 0, 1.07269834518e-211),
        ] {
            let got = field.values[[ix, ip]];
            assert!(((got - expect) / expect).abs() < 1e-8, "({ix},{ip}): {got:e} vs {expect:e}");
        }
    }

    #[test]
    fn single_component_without_noise() {
        let spec = ScenarioSpec::from_values(1.5, 0.4, 0.0, Ordering::DephaseThenSqueeze).unwrap();
        let comps = gaussian_components(&spec, 1).unwrap();
        assert_eq!(comps.len(), 1);
        let c = comps[0];
        assert_eq!(c.weight, 1.0);
        assert!((c.mean[0] - 2f64.sqrt() * 0.4f64.exp() * 1.5).abs() < 1e-14);
        assert!((c.cov[0][0] - (0.8f64).exp() / 2.0).abs() < 1e-14);
        assert!((c.cov[1][1] - (-0.8f64).exp() / 2.0).abs() < 1e-14);
        assert!(c.cov[0][1].abs() < 1e-15);

        let tc = cfg(100);
        let rho = prepare_scenario(&spec, &tc).unwrap();
        let grid = PhaseSpaceGrid::square((-2.0, 6.0), (-3.0, 3.0), 41).unwrap();
        let fock = wigner_fock(&rho, &grid, &tc).unwrap();
        let mix = wigner_gaussian_mixture(&spec, &grid, 1).unwrap();
        assert!(fock.sup_distance(&mix).unwrap() < 1e-9);
    }

    #[test]
    fn weights_are_a_probability_vector() {
        let spec = ScenarioSpec::from_values(2.0, 0.5, 0.1, Ordering::SqueezeThenDephase).unwrap();
        for n in [1, 7, 64, 301] {
            let comps = gaussian_components(&spec, n).unwrap();
            assert!(comps.iter().all(|c| c.weight >= 0.0));
            assert!((comps.iter().map(|c| c.weight).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(gaussian_components(&spec, 0).is_err());
    }

    #[test]
    fn scenarios_coincide_without_squeezing() {
        let spec = ScenarioSpec::from_values(2.0, 0.0, 0.2, Ordering::SqueezeThenDephase).unwrap();
        let grid = PhaseSpaceGrid::square((-1.0, 5.0), (-3.0, 3.0), 31).unwrap();
        let a = wigner_gaussian_mixture(&spec, &grid, 200).unwrap();
        let b = wigner_gaussian_mixture(&spec.with_order(Ordering::DephaseThenSqueeze), &grid, 200).unwrap();
        assert!(a.sup_distance(&b).unwrap() <= 1e-10);
    }

    #[test]
    fn fock_and_mixture_agree_for_dephased_states() {
        let tc = cfg(120);
        for order in Ordering::BOTH {
            let spec = ScenarioSpec::from_values(1.5, 0.5, 0.1, order).unwrap();
            let rho = prepare_scenario(&spec, &tc).unwrap();
            let grid = PhaseSpaceGrid::square((-3.0, 7.0), (-5.0, 5.0), 51).unwrap();
            let fock = wigner_fock(&rho, &grid, &tc).unwrap();
            let mix = wigner_gaussian_mixture(&spec, &grid, 300).unwrap();
            let d = fock.sup_distance(&mix).unwrap();
            assert!(d <= 1e-6, "{order}: {d}");
            assert!((fock.integral() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn csv_export_layout() {
        let grid = PhaseSpaceGrid::new((0.0, 1.0), (-1.0, 1.0), 2, 3).unwrap();
        let field = WignerField { grid, values: Array2::from_elem((2, 3), 0.5) };
        let mut buf = Vec::new();
        field.write_csv(&mut buf, &[("scenario".into(), "b".into())]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# scenario: b");
        assert!(lines[2].starts_with("p\\x,"));
        assert_eq!(lines.len(), 3 + 3);
        assert_eq!(lines[3].split(',').count(), 3);
    }
}
