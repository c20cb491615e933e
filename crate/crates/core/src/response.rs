//! Isothermal, adiabatic and isolated susceptibilities of one species.
//!
//! Everything is per ion in `mu_B / T`. Conversion to an SI volume
//! susceptibility happens only in [`crate::material::to_si`].

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::ensemble::{self, Populations};
use crate::spinmodel::{self, SpinSpecies};
use crate::units::MU_B_OVER_K_B;
use crate::{Error, Result};

/// Pairs closer than this (K) are treated as degenerate in the pair sum.
pub const KUBO_DEGENERACY_TOL: f64 = 1e-10;

/// Gauss–Legendre order for finite-amplitude demodulation.
pub const DEMODULATION_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResponseKind {
    Isothermal,
    Adiabatic,
    Isolated,
    IsolatedKubo,
    IsolatedFiniteAmplitude,
}

impl ResponseKind {
    pub fn name(self) -> &'static str {
        match self {
            ResponseKind::Isothermal => "isothermal",
            ResponseKind::Adiabatic => "adiabatic",
            ResponseKind::Isolated => "isolated",
            ResponseKind::IsolatedKubo => "isolated_kubo",
            ResponseKind::IsolatedFiniteAmplitude => "isolated_finite_amplitude",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "isothermal" => ResponseKind::Isothermal,
            "adiabatic" => ResponseKind::Adiabatic,
            "isolated" => ResponseKind::Isolated,
            "isolated_kubo" => ResponseKind::IsolatedKubo,
            "isolated_finite_amplitude" => ResponseKind::IsolatedFiniteAmplitude,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveUnits {
    /// `mu_B / T` per ion.
    PerIon,
    /// Dimensionless SI volume susceptibility at the given number density (m⁻³).
    Si { number_density: f64 },
    /// Data in arbitrary or unknown units.
    Arbitrary,
}

impl CurveUnits {
    pub fn describe(&self) -> String {
        match self {
            CurveUnits::PerIon => "mu_B/T per ion".to_string(),
            CurveUnits::Si { number_density } => format!("SI volume (n = {number_density} m^-3)"),
            CurveUnits::Arbitrary => "arbitrary".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveMetadata {
    pub species: String,
    pub temperature: Option<f64>,
    pub populations: String,
    /// Probe amplitude, mT; zero for the quasi-static limit.
    pub probe_amplitude_mt: f64,
}

/// Susceptibility sampled on a strictly increasing field grid (tesla).
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCurve {
    fields: Vec<f64>,
    values: Vec<f64>,
    pub kind: ResponseKind,
    pub units: CurveUnits,
    pub metadata: CurveMetadata,
}

impl ResponseCurve {
    pub fn new(
        fields: Vec<f64>,
        values: Vec<f64>,
        kind: ResponseKind,
        units: CurveUnits,
        metadata: CurveMetadata,
    ) -> Result<Self> {
        if fields.len() != values.len() {
            return Err(Error::InvalidCurve(format!(
                "{} fields but {} values",
                fields.len(),
                values.len()
            )));
        }
        if fields.is_empty() {
            return Err(Error::InvalidCurve("empty curve".into()));
        }
        if let Some(k) = fields.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidCurve(format!(
                "field grid not strictly increasing at index {}",
                k + 1
            )));
        }
        if let Some(k) = fields.iter().chain(&values).position(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve(format!(
                "non-finite entry at position {}",
                k % fields.len()
            )));
        }
        Ok(ResponseCurve {
            fields,
            values,
            kind,
            units,
            metadata,
        })
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.fields.iter().copied().zip(self.values.iter().copied())
    }

    /// Same grid and metadata, values multiplied by `factor`.
    pub fn scaled(&self, factor: f64, units: CurveUnits) -> Self {
        ResponseCurve {
            values: self.values.iter().map(|v| v * factor).collect(),
            units,
            ..self.clone()
        }
    }
}

/// `n + 1` evenly spaced points from `start` to `stop`.
pub fn linear_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2, "grid needs at least two points");
    let step = (stop - start) / (count - 1) as f64;
    (0..count)
        .map(|k| {
            if k == count - 1 {
                stop
            } else {
                start + step * k as f64
            }
        })
        .collect()
}

fn weighted_slope(species: &SpinSpecies, pops: &Populations, field: f64) -> Result<f64> {
    let levels = spinmodel::levels(species, field)?;
    Ok(levels
        .iter()
        .zip(pops.probabilities())
        .map(|(l, p)| p * l.moment_slope)
        .sum())
}

/// `χ_T = Σ p_i ∂m_i/∂B + (⟨m²⟩ - ⟨m⟩²)(μ_B/k_B)/T` with Boltzmann populations.
pub fn chi_isothermal(species: &SpinSpecies, field: f64, t: f64) -> Result<f64> {
    let pops = ensemble::boltzmann_populations(species, field, t)?;
    let levels = spinmodel::levels(species, field)?;
    let p = pops.probabilities();
    let moments: Vec<f64> = levels.iter().map(|l| l.moment).collect();
    let slope: f64 = levels.iter().zip(p).map(|(l, p)| p * l.moment_slope).sum();
    Ok(slope + ensemble::moment_fluctuation(&moments, p, t))
}

/// `χ_S = χ_T - (μ_B/k_B)·T·(∂M/∂T)²/C_H`.
pub fn chi_adiabatic(species: &SpinSpecies, field: f64, t: f64) -> Result<f64> {
    let chi_t = chi_isothermal(species, field, t)?;
    let th = ensemble::thermo_at(species, field, t)?;
    if th.heat_capacity_per_ion <= 0.0 {
        return Err(Error::ZeroHeatCapacity {
            field,
            temperature: t,
        });
    }
    Ok(chi_t - MU_B_OVER_K_B * t * th.dm_dt_per_ion.powi(2) / th.heat_capacity_per_ion)
}

/// `χ_I = Σ p_i ∂m_i/∂B` for any populations.
pub fn chi_isolated(species: &SpinSpecies, pops: &Populations, field: f64) -> Result<f64> {
    pops.check_species(species)?;
    weighted_slope(species, pops, field)
}

/// Isolated susceptibility from the pair sum over eigenstates
/// `Q⁻¹ Σ_{E_i≠E_j} (e^{-E_i/T} - e^{-E_j/T}) |⟨i|μ̂|j⟩|² / (E_j - E_i)`,
/// with `μ̂ = -μ_proj σ_z` inside each block and zero between blocks.
pub fn chi_isolated_kubo(species: &SpinSpecies, t: f64, field: f64) -> Result<f64> {
    let pops = ensemble::boltzmann_populations(species, field, t)?;
    let p = pops.probabilities();
    let labels = species.labels();
    let energies = spinmodel::level_energies(species, field);
    let mut vectors = Vec::with_capacity(labels.len());
    for l in &labels {
        vectors.push(spinmodel::block_eigenvector(
            species, l.m_i, l.branch, field,
        )?);
    }
    let mu = species.projected_moment();
    let mut total = 0.0;
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            let gap = energies[j] - energies[i];
            if gap.abs() < KUBO_DEGENERACY_TOL {
                continue;
            }
            let element = if labels[i].m_i == labels[j].m_i {
                let (a, b) = (vectors[i], vectors[j]);
                -mu * (a[0] * b[0] - a[1] * b[1])
            } else {
                0.0
            };
            if element == 0.0 {
                continue;
            }
            total += (p[i] - p[j]) / gap * element * element;
        }
    }
    Ok(total * MU_B_OVER_K_B)
}

fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre_rule(DEMODULATION_NODES))
}

/// Nodes and weights on [-1, 1] by Newton iteration on `P_n`.
pub(crate) fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// In-phase fundamental of `M_I(B0 + b sin ωt)` divided by `b`, populations fixed.
///
/// `(1/πb) ∫₀^{2π} M_I(B0 + b sin φ) sin φ dφ`, folded onto `[-π/2, π/2]`.
pub fn chi_isolated_finite_amplitude(
    species: &SpinSpecies,
    pops: &Populations,
    field0: f64,
    amplitude: f64,
) -> Result<f64> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "probe amplitude",
            reason: format!("must be > 0, got {amplitude}"),
        });
    }
    pops.check_species(species)?;
    let (nodes, weights) = gauss_legendre();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        let s = (half_pi * x).sin();
        let m = ensemble::magnetization(species, pops, field0 + amplitude * s)?;
        acc += w * m * s;
    }
    Ok(acc / amplitude)
}

/// Closed forms for the bare two-state system (`I = 0`, projection 1).
pub mod two_state {
    use crate::units::MU_B_OVER_K_B;

    /// `C(B) = Δ / sqrt(Δ² + (μB)²)`.
    pub fn concurrence(mu: f64, delta: f64, field: f64) -> f64 {
        delta / delta.hypot(mu * MU_B_OVER_K_B * field)
    }

    /// `χ_I = Σ ∓p_± (μ²/Δ) C³` in μ_B/T for given upper/lower populations.
    pub fn chi_isolated(mu: f64, delta: f64, field: f64, p_upper: f64, p_lower: f64) -> f64 {
        let c = concurrence(mu, delta, field);
        mu * mu * MU_B_OVER_K_B / delta * (p_lower - p_upper) * c.powi(3)
    }

    /// Boltzmann form `(μ²C³/Δ) tanh(Δ/(T C))`.
    pub fn chi_isolated_boltzmann(mu: f64, delta: f64, field: f64, t: f64) -> f64 {
        let c = concurrence(mu, delta, field);
        mu * mu * MU_B_OVER_K_B * c.powi(3) / delta * (delta / (t * c)).tanh()
    }

    /// High-temperature Lorentzian `(μ²/T) / (1 + (μB/Δ)²)`.
    pub fn chi_isolated_lorentzian(mu: f64, delta: f64, field: f64, t: f64) -> f64 {
        let x = mu * MU_B_OVER_K_B * field / delta;
        mu * mu * MU_B_OVER_K_B / t / (1.0 + x * x)
    }

    /// Zero-field value shared by all three susceptibilities, `(μ²/Δ) tanh(Δ/T)`.
    pub fn chi_zero_field(mu: f64, delta: f64, t: f64) -> f64 {
        mu * mu * MU_B_OVER_K_B / delta * (delta / t).tanh()
    }
}

/// Two-relaxation-time interpolation between the three plateaus:
/// `χ(ω) = χ_I + (χ_S - χ_I)/(1 + iωτ₂) + (χ_T - χ_S)/(1 + iωτ₁)`.
///
/// Returned as `χ' + iχ''` with the loss `χ'' ≥ 0`, i.e. the conjugate of
/// the expression above.
pub fn plateau_model(
    chi_t: f64,
    chi_s: f64,
    chi_i: f64,
    tau1: f64,
    tau2: f64,
    omega: f64,
) -> Result<Complex64> {
    if !(tau2 > 0.0 && tau1 > tau2) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("need tau1 > tau2 > 0, got tau1={tau1}, tau2={tau2}"),
        });
    }
    let slack = 1e-12 * chi_t.abs().max(chi_s.abs()).max(chi_i.abs());
    if !(chi_t + slack >= chi_s && chi_s + slack >= chi_i && chi_i >= -slack) {
        return Err(Error::InvalidParameter {
            name: "plateaus",
            reason: format!("need chi_T >= chi_S >= chi_I >= 0, got {chi_t}, {chi_s}, {chi_i}"),
        });
    }
    if !(omega >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "omega",
            reason: format!("must be >= 0, got {omega}"),
        });
    }
    let debye = |tau: f64| Complex64::new(1.0, omega * tau).inv();
    let chi = chi_i + (chi_s - chi_i) * debye(tau2) + (chi_t - chi_s) * debye(tau1);
    Ok(chi.conj())
}
