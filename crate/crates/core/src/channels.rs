//! Phase diffusion and the two scenario state families.
//!
//! The channel averages `Û(ψ) ρ Û†(ψ)` over a zero-mean Gaussian phase ψ of
//! standard deviation σ. In the Fock basis this multiplies `ρ_mn` by the
//! characteristic function of ψ at `m − n`, which for a Gaussian is
//! `exp(−σ²(m−n)²/2)`.

use std::f64::consts::PI;
use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use gauss_quad::hermite::GaussHermite;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, ProbeParams, TruncationConfig};
use crate::linalg::{self, C64};

/// Default Gauss–Hermite node count.
pub const DEFAULT_GH_NODES: usize = 101;
/// Entrywise agreement demanded between quadrature and closed form.
pub const CHANNEL_ORACLE_TOL: f64 = 1e-8;
const MAX_AUTO_NODES: usize = 20_000;

/// How the Gaussian phase average is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureKind {
    /// Uniform nodes on the circle weighted by the wrapped normal density.
    /// The map is 2π-periodic in ψ, so `N` nodes integrate every Fourier mode
    /// `|m − n| < N` up to the wrapped-Gaussian aliasing term.
    Periodic,
    /// Gauss–Hermite nodes `ψ = √2 σ t` on the real line.
    GaussHermite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeCount {
    /// Pick enough nodes for the state's full Fock bandwidth.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoise {
    /// Standard deviation of the random phase, radians.
    pub sigma: f64,
    pub nodes: NodeCount,
    pub kind: QuadratureKind,
}

impl PhaseNoise {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { sigma, nodes: NodeCount::Auto, kind: QuadratureKind::Periodic })
    }

    /// From the variance σ², the parameterization used in figure captions.
    pub fn from_variance(sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma² must be >= 0, got {sigma2}")));
        }
        Self::new(sigma2.sqrt())
    }

    /// Master-equation parameterization: `σ² = 2 (Γ t)²`.
    pub fn from_damping(gamma: f64, t: f64) -> Result<Self> {
        Self::new(std::f64::consts::SQRT_2 * (gamma * t).abs())
    }

    pub fn noiseless() -> Self {
        Self { sigma: 0.0, nodes: NodeCount::Auto, kind: QuadratureKind::Periodic }
    }

    pub fn gauss_hermite(sigma: f64, nodes: usize) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::InvalidParameter("quadrature needs at least one node".into()));
        }
        Ok(Self { nodes: NodeCount::Fixed(nodes), kind: QuadratureKind::GaussHermite, ..Self::new(sigma)? })
    }

    pub fn periodic(sigma: f64, nodes: NodeCount) -> Result<Self> {
        if nodes == NodeCount::Fixed(0) {
            return Err(Error::InvalidParameter("quadrature needs at least one node".into()));
        }
        Ok(Self { nodes, kind: QuadratureKind::Periodic, ..Self::new(sigma)? })
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// `Γ t = σ / √2`.
    pub fn damping_time_product(&self) -> f64 {
        self.sigma / std::f64::consts::SQRT_2
    }

    /// `E[e^{−iψk}] = exp(−σ²k²/2)`.
    pub fn characteristic(&self, k: i64) -> f64 {
        (-0.5 * self.variance() * (k * k) as f64).exp()
    }

    /// Nodes and weights for a state of Fock dimension `dim`.
    pub fn rule(&self, dim: usize) -> Result<PhaseRule> {
        if self.sigma == 0.0 {
            return Ok(PhaseRule { nodes: vec![0.0], weights: vec![1.0] });
        }
        match self.kind {
            QuadratureKind::GaussHermite => {
                let n = match self.nodes {
                    NodeCount::Fixed(n) => n,
                    NodeCount::Auto => DEFAULT_GH_NODES,
                };
                Ok(gauss_hermite_rule(self.sigma, n))
            }
            QuadratureKind::Periodic => {
                let n = match self.nodes {
                    NodeCount::Fixed(n) => n,
                    NodeCount::Auto => self.auto_periodic_nodes(dim.saturating_sub(1)),
                };
                Ok(periodic_rule(self.sigma, n))
            }
        }
    }

    /// Smallest `N` with `exp(−σ²(N − k_max)²/2) < 1e-14`.
    fn auto_periodic_nodes(&self, k_max: usize) -> usize {
        let margin = (2.0 * 14.0 * 10f64.ln()).sqrt() / self.sigma;
        let n = k_max as f64 + margin.ceil() + 1.0;
        (n as usize).clamp(2 * k_max + 1, MAX_AUTO_NODES.max(2 * k_max + 1))
    }
}

/// Phase nodes ψ_j with nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PhaseRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ_j w_j e^{−iψ_j k}`.
    pub fn phase_average(&self, k: i64) -> C64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&psi, &w)| C64::from_polar(w, -psi * k as f64))
            .sum()
    }
}

fn gauss_hermite_rule(sigma: f64, n: usize) -> PhaseRule {
    let quad = GaussHermite::new(NonZeroUsize::new(n).expect("node count checked"));
    let scale = PI.sqrt();
    let (nodes, weights) = quad
        .as_node_weight_pairs()
        .iter()
        .map(|&(t, w)| (std::f64::consts::SQRT_2 * sigma * t, w / scale))
        .unzip();
    normalized(nodes, weights)
}

fn periodic_rule(sigma: f64, n: usize) -> PhaseRule {
    let images = (8.0 * sigma / (2.0 * PI)).ceil() as i64 + 1;
    let norm = 1.0 / (2.0 * PI * sigma * sigma).sqrt();
    let (nodes, weights) = (0..n)
        .map(|j| {
            let psi = -PI + 2.0 * PI * (j as f64 + 0.5) / n as f64;
            let density: f64 = (-images..=images)
                .map(|m| {
                    let x = psi + 2.0 * PI * m as f64;
                    norm * (-0.5 * x * x / (sigma * sigma)).exp()
                })
                .sum();
            (psi, density * 2.0 * PI / n as f64)
        })
        .unzip();
    normalized(nodes, weights)
}

fn normalized(nodes: Vec<f64>, weights: Vec<f64>) -> PhaseRule {
    let total: f64 = weights.iter().sum();
    PhaseRule { nodes, weights: weights.into_iter().map(|w| w / total).collect() }
}

/// Quadrature evaluation of the channel, checked against the closed form.
pub fn dephase_quadrature(rho: &DensityMatrix, noise: &PhaseNoise) -> Result<DensityMatrix> {
    let dim = rho.dim();
    let rule = noise.rule(dim)?;
    // f(k) for k = m − n; f(−k) = conj f(k) for the symmetric node sets used here.
    let factors: Vec<C64> = (0..dim as i64).map(|k| rule.phase_average(k)).collect();
    let src = rho.entries();
    let out = Array2::from_shape_fn((dim, dim), |(m, n)| {
        let f = if m >= n { factors[m - n] } else { factors[n - m].conj() };
        src[[m, n]] * f
    });
    let reference = dephase_analytic(rho, noise);
    let deviation = linalg::max_abs_diff(&out, reference.entries());
    if deviation > CHANNEL_ORACLE_TOL {
        return Err(Error::NodeCountInsufficient { nodes: rule.len(), deviation });
    }
    Ok(DensityMatrix::from_trusted(out))
}

/// `ρ'_mn = ρ_mn exp(−σ²(m−n)²/2)`.
pub fn dephase_analytic(rho: &DensityMatrix, noise: &PhaseNoise) -> DensityMatrix {
    let dim = rho.dim();
    let damping: Vec<f64> = (0..dim as i64).map(|k| noise.characteristic(k)).collect();
    let src = rho.entries();
    let out = Array2::from_shape_fn((dim, dim), |(m, n)| src[[m, n]] * damping[m.abs_diff(n)]);
    DensityMatrix::from_trusted(out)
}

/// `Û(θ) ρ Û†(θ)`, i.e. `ρ_mn e^{−iθ(m−n)}`.
pub fn encode_phase(rho: &DensityMatrix, theta: f64) -> DensityMatrix {
    if theta == 0.0 {
        return rho.clone();
    }
    let dim = rho.dim();
    let src = rho.entries();
    let out = Array2::from_shape_fn((dim, dim), |(m, n)| {
        src[[m, n]] * C64::from_polar(1.0, -theta * (m as f64 - n as f64))
    });
    DensityMatrix::from_trusted(out)
}

/// Where the squeezer sits relative to the phase noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ordering {
    /// (a): `E_σ(|ψ(r,α)⟩⟨ψ(r,α)|)`.
    #[serde(rename = "a")]
    SqueezeThenDephase,
    /// (b): `Ŝ(r) E_σ(|α⟩⟨α|) Ŝ†(r)`.
    #[serde(rename = "b")]
    DephaseThenSqueeze,
}

impl Ordering {
    pub const BOTH: [Ordering; 2] = [Ordering::SqueezeThenDephase, Ordering::DephaseThenSqueeze];

    pub fn tag(&self) -> &'static str {
        match self {
            Ordering::SqueezeThenDephase => "a",
            Ordering::DephaseThenSqueeze => "b",
        }
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Ordering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "a" | "A" => Ok(Ordering::SqueezeThenDephase),
            "b" | "B" => Ok(Ordering::DephaseThenSqueeze),
            other => Err(Error::InvalidParameter(format!("unknown scenario `{other}` (expected a or b)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub probe: ProbeParams,
    pub noise: PhaseNoise,
    pub order: Ordering,
}

impl ScenarioSpec {
    pub fn new(probe: ProbeParams, noise: PhaseNoise, order: Ordering) -> Self {
        Self { probe, noise, order }
    }

    /// Convenience constructor from `(α, r, σ², order)`.
    pub fn from_values(alpha: f64, r: f64, sigma2: f64, order: Ordering) -> Result<Self> {
        Ok(Self::new(ProbeParams::new(alpha, r), PhaseNoise::from_variance(sigma2)?, order))
    }

    pub fn with_order(self, order: Ordering) -> Self {
        Self { order, ..self }
    }
}

/// Input state of the chosen scenario, before phase encoding.
pub fn prepare_scenario(spec: &ScenarioSpec, cfg: &TruncationConfig) -> Result<DensityMatrix> {
    let entries = match spec.order {
        Ordering::SqueezeThenDephase => {
            let pure = fock::squeezed_displaced_state(spec.probe, cfg)?;
            dephase_analytic(&pure, &spec.noise).into_entries()
        }
        Ordering::DephaseThenSqueeze => {
            let coherent = fock::coherent_state(spec.probe.alpha, cfg)?;
            let noisy = dephase_analytic(&coherent, &spec.noise);
            let squeezer = fock::squeezing_op(spec.probe.r, cfg)?;
            linalg::hermitian_part(&squeezer.conjugate(noisy.entries()))
        }
    };
    DensityMatrix::new(entries, cfg)
}
