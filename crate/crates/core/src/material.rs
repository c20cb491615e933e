//! Sample model: apical and basal sites, a discrete strain-gap mixture, and
//! the resulting total spectra.

use crate::ensemble::{self, Populations};
use crate::response::{self, CurveMetadata, CurveUnits, ResponseCurve, ResponseKind};
use crate::spinmodel::{HalfInt, SpinSpecies};
use crate::units::{BOHR_MAGNETON, MU_B_OVER_K_B, VACUUM_PERMEABILITY};
use crate::{Error, Result};

/// Holmium nuclear spin.
pub const HOLMIUM_NUCLEAR_SPIN: HalfInt = HalfInt::from_twice(7);

/// Projection of a ⟨111⟩ Ising axis on a [111] field for the three canted sites.
pub const BASAL_PROJECTION: f64 = 1.0 / 3.0;

/// Discrete mixture of strain gaps. Whatever weight is not assigned to a
/// component sits at `Δ = 0` and does not respond.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaDistribution {
    components: Vec<(f64, f64)>,
}

impl DeltaDistribution {
    pub fn new(components: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |reason: String| Error::InvalidParameter {
            name: "distribution",
            reason,
        };
        if components.is_empty() {
            return Err(bad("needs at least one component".into()));
        }
        for &(d, w) in &components {
            if !(d > 0.0 && d.is_finite()) {
                return Err(bad(format!("gap {d} K must be > 0")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(bad(format!("weight {w} must be >= 0")));
            }
        }
        if components.windows(2).any(|p| !(p[1].0 > p[0].0)) {
            return Err(bad("gaps must be strictly increasing".into()));
        }
        let total: f64 = components.iter().map(|c| c.1).sum();
        if total > 1.0 + 1e-12 {
            return Err(bad(format!("weights sum to {total} > 1")));
        }
        Ok(DeltaDistribution { components })
    }

    /// `f₁ = 0.511` at 0.015 K and `f₂ = 0.352` at 0.1 K.
    pub fn reference() -> Self {
        DeltaDistribution {
            components: vec![(0.015, 0.511), (0.1, 0.352)],
        }
    }

    pub fn single(delta: f64) -> Result<Self> {
        Self::new(vec![(delta, 1.0)])
    }

    pub fn components(&self) -> &[(f64, f64)] {
        &self.components
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.0).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.1).collect()
    }

    /// `f₀ = 1 - Σ f_k`.
    pub fn zero_gap_weight(&self) -> f64 {
        (1.0 - self.components.iter().map(|c| c.1).sum::<f64>()).max(0.0)
    }

    /// Same gaps, new weights.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.components.len() {
            return Err(Error::InvalidParameter {
                name: "distribution",
                reason: format!(
                    "{} weights for {} components",
                    weights.len(),
                    self.components.len()
                ),
            });
        }
        Self::new(
            self.components
                .iter()
                .zip(weights)
                .map(|(c, &w)| (c.0, w))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    /// Site classes; each species' `multiplicity` sets its share of ions.
    /// The gap stored in each species is ignored in favour of the distribution.
    pub groups: Vec<SpinSpecies>,
    pub distribution: DeltaDistribution,
    /// Magnetic ions per formula unit.
    pub concentration_x: f64,
    /// Magnetic ions per m³, for SI output.
    pub number_density: Option<f64>,
}

/// Apical (projection 1, one site) and basal (projection 1/3, three sites)
/// holmium ions sharing `μ = g∥/2` and `A`.
pub fn spin_ice_material(
    x: f64,
    g_parallel: f64,
    hyperfine_a: f64,
    distribution: DeltaDistribution,
) -> Result<Material> {
    if !(x > 0.0 && x <= 2.0) {
        return Err(Error::InvalidParameter {
            name: "concentration_x",
            reason: format!("must lie in (0, 2], got {x}"),
        });
    }
    if !(g_parallel > 0.0 && g_parallel.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "g_parallel",
            reason: format!("must be > 0, got {g_parallel}"),
        });
    }
    if !(hyperfine_a > 0.0 && hyperfine_a.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "hyperfine_a",
            reason: format!("must be > 0, got {hyperfine_a}"),
        });
    }
    let mu = 0.5 * g_parallel;
    let gap = distribution.components()[0].0;
    let apical = SpinSpecies::new(mu, hyperfine_a, gap, 1.0, HOLMIUM_NUCLEAR_SPIN, 1)?;
    let basal = SpinSpecies::new(
        mu,
        hyperfine_a,
        gap,
        BASAL_PROJECTION,
        HOLMIUM_NUCLEAR_SPIN,
        3,
    )?;
    Ok(Material {
        groups: vec![apical, basal],
        distribution,
        concentration_x: x,
        number_density: None,
    })
}

impl Material {
    fn total_multiplicity(&self) -> f64 {
        self.groups.iter().map(|g| f64::from(g.multiplicity)).sum()
    }

    /// Site-averaged `projection²`; 1/3 for the spin-ice geometry.
    pub fn geometry_factor(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| f64::from(g.multiplicity) * g.projection * g.projection)
            .sum::<f64>()
            / self.total_multiplicity()
    }

    /// Curie constant per formula unit, `x·μ²·⟨proj²⟩·(μ_B/k_B)` in μ_B·K/T,
    /// using the moment of the first group.
    pub fn curie_constant(&self) -> f64 {
        let mu = self.groups[0].moment_mu;
        self.concentration_x * mu * mu * self.geometry_factor() * MU_B_OVER_K_B
    }

    pub fn with_distribution(&self, distribution: DeltaDistribution) -> Self {
        Material {
            distribution,
            ..self.clone()
        }
    }
}

/// Curie constant per formula unit for the spin-ice geometry.
pub fn curie_constant(x: f64, g_parallel: f64) -> f64 {
    let mu = 0.5 * g_parallel;
    x * mu * mu * (1.0 + 3.0 * BASAL_PROJECTION * BASAL_PROJECTION) / 4.0 * MU_B_OVER_K_B
}

/// Inverse of [`curie_constant`]; `None` when the constant is not positive.
pub fn g_from_curie_constant(curie: f64, x: f64) -> Option<f64> {
    if curie > 0.0 && x > 0.0 {
        Some(2.0 * (curie / curie_constant(x, 2.0)).sqrt())
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PopulationsMode {
    /// Equilibrium at each bias field.
    Boltzmann,
    /// Equilibrium at a preparation point, then frozen on each branch.
    Frozen {
        prep_field: f64,
        prep_temperature: f64,
    },
}

impl PopulationsMode {
    pub fn describe(&self) -> String {
        match self {
            PopulationsMode::Boltzmann => "boltzmann".into(),
            PopulationsMode::Frozen {
                prep_field,
                prep_temperature,
            } => format!("frozen(B_prep={prep_field} T, T_prep={prep_temperature} K)"),
        }
    }
}

/// What to compute at each grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRequest {
    pub kind: ResponseKind,
    pub temperature: f64,
    pub populations: PopulationsMode,
    /// Probe amplitude in tesla; zero for the quasi-static limit.
    pub probe_amplitude: f64,
}

impl SpectrumRequest {
    pub fn isolated(temperature: f64) -> Self {
        SpectrumRequest {
            kind: ResponseKind::Isolated,
            temperature,
            populations: PopulationsMode::Boltzmann,
            probe_amplitude: 0.0,
        }
    }

    /// Kind actually produced: a positive probe turns `Isolated` into its
    /// finite-amplitude variant.
    pub fn effective_kind(&self) -> ResponseKind {
        if self.kind == ResponseKind::Isolated && self.probe_amplitude > 0.0 {
            ResponseKind::IsolatedFiniteAmplitude
        } else {
            self.kind
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::NonPositiveTemperature(self.temperature));
        }
        if !(self.probe_amplitude >= 0.0 && self.probe_amplitude.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "probe amplitude",
                reason: format!("must be >= 0, got {}", self.probe_amplitude),
            });
        }
        let frozen = matches!(self.populations, PopulationsMode::Frozen { .. });
        match self.effective_kind() {
            ResponseKind::Isothermal | ResponseKind::Adiabatic | ResponseKind::IsolatedKubo
                if frozen =>
            {
                Err(Error::RequiresBoltzmann(self.kind.name()))
            }
            ResponseKind::IsolatedFiniteAmplitude if self.probe_amplitude <= 0.0 => {
                Err(Error::InvalidParameter {
                    name: "probe amplitude",
                    reason: "finite-amplitude response needs a positive probe".into(),
                })
            }
            _ => Ok(()),
        }
    }
}

/// Response of one species at one field.
fn species_point(
    species: &SpinSpecies,
    field: f64,
    req: &SpectrumRequest,
    frozen: Option<&Populations>,
) -> Result<f64> {
    let t = req.temperature;
    let pops_at = |b: f64| -> Result<Populations> {
        match frozen {
            Some(p) => Ok(p.clone()),
            None => ensemble::boltzmann_populations(species, b, t),
        }
    };
    match req.effective_kind() {
        ResponseKind::Isothermal => response::chi_isothermal(species, field, t),
        ResponseKind::Adiabatic => response::chi_adiabatic(species, field, t),
        ResponseKind::IsolatedKubo => response::chi_isolated_kubo(species, t, field),
        ResponseKind::Isolated => response::chi_isolated(species, &pops_at(field)?, field),
        ResponseKind::IsolatedFiniteAmplitude => response::chi_isolated_finite_amplitude(
            species,
            &pops_at(field)?,
            field,
            req.probe_amplitude,
        ),
    }
}

/// Site-averaged response of the material with every ion at gap `delta`.
pub fn component_values(
    material: &Material,
    delta: f64,
    fields: &[f64],
    req: &SpectrumRequest,
) -> Result<Vec<f64>> {
    req.validate()?;
    let total_mult = material.total_multiplicity();
    let mut out = vec![0.0; fields.len()];
    for group in &material.groups {
        let species = group.with_gap(delta);
        let share = f64::from(group.multiplicity) / total_mult;
        let frozen = match req.populations {
            PopulationsMode::Frozen {
                prep_field,
                prep_temperature,
            } => Some(ensemble::frozen_populations(
                &species,
                prep_field,
                prep_temperature,
            )?),
            PopulationsMode::Boltzmann => None,
        };
        for (o, &b) in out.iter_mut().zip(fields) {
            *o += share * species_point(&species, b, req, frozen.as_ref())?;
        }
    }
    Ok(out)
}

/// `Σ_groups share · Σ_k f_k · χ(Δ_k; B)`, per ion.
pub fn total_spectrum(
    material: &Material,
    fields: &[f64],
    req: &SpectrumRequest,
) -> Result<ResponseCurve> {
    let mut values = vec![0.0; fields.len()];
    for &(delta, weight) in material.distribution.components() {
        if weight == 0.0 {
            continue;
        }
        let comp = component_values(material, delta, fields, req)?;
        for (v, c) in values.iter_mut().zip(comp) {
            *v += weight * c;
        }
    }
    req.validate()?;
    ResponseCurve::new(
        fields.to_vec(),
        values,
        req.effective_kind(),
        CurveUnits::PerIon,
        CurveMetadata {
            species: describe_material(material),
            temperature: Some(req.temperature),
            populations: req.populations.describe(),
            probe_amplitude_mt: req.probe_amplitude * 1e3,
        },
    )
}

pub fn describe_material(material: &Material) -> String {
    let groups: Vec<String> = material
        .groups
        .iter()
        .map(|g| {
            format!(
                "mu={} A={} proj={} I={} mult={}",
                g.moment_mu, g.hyperfine_a, g.projection, g.nuclear_i, g.multiplicity
            )
        })
        .collect();
    let dist: Vec<String> = material
        .distribution
        .components()
        .iter()
        .map(|(d, w)| format!("{d}:{w}"))
        .collect();
    format!(
        "x={} [{}] delta={{{}}}",
        material.concentration_x,
        groups.join("; "),
        dist.join(", ")
    )
}

/// Per-ion curve to dimensionless SI volume susceptibility, `μ₀·n·μ_B·χ`.
pub fn to_si(curve: &ResponseCurve, number_density: f64) -> Result<ResponseCurve> {
    if !(number_density > 0.0 && number_density.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "number_density",
            reason: format!("must be > 0, got {number_density}"),
        });
    }
    if curve.units != CurveUnits::PerIon {
        return Err(Error::InvalidCurve(format!(
            "expected per-ion units, got {}",
            curve.units.describe()
        )));
    }
    Ok(curve.scaled(
        VACUUM_PERMEABILITY * number_density * BOHR_MAGNETON,
        CurveUnits::Si { number_density },
    ))
}

/// Inverse of [`to_si`].
pub fn from_si(curve: &ResponseCurve) -> Result<ResponseCurve> {
    match curve.units {
        CurveUnits::Si { number_density } => Ok(curve.scaled(
            1.0 / (VACUUM_PERMEABILITY * number_density * BOHR_MAGNETON),
            CurveUnits::PerIon,
        )),
        other => Err(Error::InvalidCurve(format!(
            "expected SI units, got {}",
            other.describe()
        ))),
    }
}
