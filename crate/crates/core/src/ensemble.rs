//! Level populations and canonical-ensemble averages.

use crate::spinmodel::{self, SpinSpecies, StateLabel};
use crate::units::MU_B_OVER_K_B;
use crate::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-12;

/// How a set of populations was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    /// Equilibrium at the given field (T) and temperature (K).
    Boltzmann {
        field: f64,
        temperature: f64,
    },
    /// Equilibrium at a preparation point, then held fixed on each adiabatic branch.
    Frozen {
        prep_field: f64,
        prep_temperature: f64,
    },
    Custom,
}

impl Provenance {
    pub fn is_boltzmann(&self) -> bool {
        matches!(self, Provenance::Boltzmann { .. })
    }

    pub fn describe(&self) -> String {
        match *self {
            Provenance::Boltzmann { field, temperature } => {
                format!("boltzmann(B={field} T, T={temperature} K)")
            }
            Provenance::Frozen {
                prep_field,
                prep_temperature,
            } => format!("frozen(B_prep={prep_field} T, T_prep={prep_temperature} K)"),
            Provenance::Custom => "custom".to_string(),
        }
    }
}

/// Probabilities over the `2(2I+1)` labels of one species, in the canonical
/// order of [`SpinSpecies::labels`]. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Populations {
    labels: Vec<StateLabel>,
    probs: Vec<f64>,
    provenance: Provenance,
}

impl Populations {
    /// Build from explicit `(label, probability)` entries. Labels not listed get zero.
    pub fn custom(species: &SpinSpecies, entries: &[(StateLabel, f64)]) -> Result<Self> {
        let labels = species.labels();
        let mut probs = vec![0.0; labels.len()];
        for &(label, p) in entries {
            let idx = species.state_index(label)?;
            probs[idx] = p;
        }
        Self::from_parts(labels, probs, Provenance::Custom)
    }

    fn from_parts(
        labels: Vec<StateLabel>,
        probs: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidPopulations(format!(
                "probability {p} is negative or not finite"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidPopulations(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Populations {
            labels,
            probs,
            provenance,
        })
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn labels(&self) -> &[StateLabel] {
        &self.labels
    }

    pub fn get(&self, label: StateLabel) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| *l == label)
            .map(|i| self.probs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateLabel, f64)> + '_ {
        self.labels.iter().copied().zip(self.probs.iter().copied())
    }

    pub(crate) fn check_species(&self, species: &SpinSpecies) -> Result<()> {
        if self.probs.len() != species.state_count() {
            return Err(Error::InvalidPopulations(format!(
                "{} entries for a species with {} states",
                self.probs.len(),
                species.state_count()
            )));
        }
        Ok(())
    }
}

fn check_temperature(t: f64) -> Result<()> {
    // +inf is accepted as the uniform limit
    if t > 0.0 && !t.is_nan() {
        Ok(())
    } else {
        Err(Error::NonPositiveTemperature(t))
    }
}

/// Unnormalized Boltzmann weights shifted so the ground state has weight 1,
/// and `ln Q` of the unshifted partition function.
fn shifted_weights(energies: &[f64], t: f64) -> (Vec<f64>, f64) {
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-(e - e_min) / t).exp()).collect();
    let sum: f64 = w.iter().sum();
    let ln_q = if t.is_infinite() {
        (energies.len() as f64).ln()
    } else {
        sum.ln() - e_min / t
    };
    (w, ln_q)
}

/// `p_i = exp(-E_i/T) / Q` at field `field`.
pub fn boltzmann_populations(species: &SpinSpecies, field: f64, t: f64) -> Result<Populations> {
    check_temperature(t)?;
    let energies = spinmodel::level_energies(species, field);
    let (w, _) = shifted_weights(&energies, t);
    let sum: f64 = w.iter().sum();
    let probs = w.into_iter().map(|x| x / sum).collect();
    Populations::from_parts(
        species.labels(),
        probs,
        Provenance::Boltzmann {
            field,
            temperature: t,
        },
    )
}

/// Boltzmann populations at `(prep_field, prep_t)`, attached to the
/// `(m_I, branch)` labels and carried unchanged to any other field.
///
/// Branches of one block never cross, and no operator couples different
/// blocks, so each label follows a single smooth level.
pub fn frozen_populations(
    species: &SpinSpecies,
    prep_field: f64,
    prep_t: f64,
) -> Result<Populations> {
    let eq = boltzmann_populations(species, prep_field, prep_t)?;
    Ok(Populations {
        provenance: Provenance::Frozen {
            prep_field,
            prep_temperature: prep_t,
        },
        ..eq
    })
}

/// Per-ion magnetization `M = Σ p_i m_i`, μ_B. Valid for any populations.
pub fn magnetization(species: &SpinSpecies, pops: &Populations, field: f64) -> Result<f64> {
    pops.check_species(species)?;
    let levels = spinmodel::levels(species, field)?;
    Ok(levels
        .iter()
        .zip(pops.probabilities())
        .map(|(l, p)| p * l.moment)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoPoint {
    /// μ_B per ion.
    pub magnetization_per_ion: f64,
    /// k_B per ion.
    pub heat_capacity_per_ion: f64,
    /// μ_B/K per ion.
    pub dm_dt_per_ion: f64,
    pub partition_function: f64,
    pub ln_partition_function: f64,
    /// `⟨E⟩`, K.
    pub mean_energy: f64,
}

/// Ensemble averages from fluctuation formulas:
/// `C_H = (⟨E²⟩ - ⟨E⟩²)/T²` and `∂M/∂T = (⟨E m⟩ - ⟨E⟩⟨m⟩)/T²`.
///
/// Only meaningful for Boltzmann populations at the same `(field, t)`.
pub fn thermo(
    species: &SpinSpecies,
    pops: &Populations,
    field: f64,
    t: f64,
) -> Result<ThermoPoint> {
    check_temperature(t)?;
    pops.check_species(species)?;
    match pops.provenance() {
        Provenance::Boltzmann {
            field: bf,
            temperature: bt,
        } if same(bf, field) && same(bt, t) => {}
        Provenance::Boltzmann { .. } => {
            return Err(Error::InvalidPopulations(format!(
                "populations were built at {}, not at B={field} T, T={t} K",
                pops.provenance().describe()
            )))
        }
        _ => return Err(Error::RequiresBoltzmann("heat capacity and dM/dT")),
    }
    let levels = spinmodel::levels(species, field)?;
    let energies: Vec<f64> = levels.iter().map(|l| l.energy).collect();
    let (_, ln_q) = shifted_weights(&energies, t);
    let p = pops.probabilities();

    let mean = |f: &dyn Fn(usize) -> f64| -> f64 { (0..p.len()).map(|i| p[i] * f(i)).sum() };
    let e_mean = mean(&|i| levels[i].energy);
    let m_mean = mean(&|i| levels[i].moment);
    // centred second moments avoid cancellation at low T
    let var_e = mean(&|i| (levels[i].energy - e_mean).powi(2));
    let cov_em = mean(&|i| (levels[i].energy - e_mean) * (levels[i].moment - m_mean));
    let t2 = t * t;
    Ok(ThermoPoint {
        magnetization_per_ion: m_mean,
        heat_capacity_per_ion: var_e / t2,
        dm_dt_per_ion: cov_em / t2,
        partition_function: ln_q.exp(),
        ln_partition_function: ln_q,
        mean_energy: e_mean,
    })
}

/// [`thermo`] with freshly built Boltzmann populations.
pub fn thermo_at(species: &SpinSpecies, field: f64, t: f64) -> Result<ThermoPoint> {
    let pops = boltzmann_populations(species, field, t)?;
    thermo(species, &pops, field, t)
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Magnetization variance term of `χ_T`: `(⟨m²⟩ - ⟨m⟩²)·(μ_B/k_B)/T`, μ_B/T.
pub(crate) fn moment_fluctuation(moments: &[f64], probs: &[f64], t: f64) -> f64 {
    let m_mean: f64 = moments.iter().zip(probs).map(|(m, p)| m * p).sum();
    let var: f64 = moments
        .iter()
        .zip(probs)
        .map(|(m, p)| p * (m - m_mean).powi(2))
        .sum();
    var * MU_B_OVER_K_B / t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinmodel::{Branch, HalfInt};
    use proptest::prelude::*;

    fn apical() -> SpinSpecies {
        SpinSpecies::new(9.5, 0.2945, 0.015, 1.0, HalfInt::from_twice(7), 1).unwrap()
    }

    fn sum(p: &Populations) -> f64 {
        p.probabilities().iter().sum()
    }

    #[test]
    fn infinite_temperature_is_uniform() {
        let p = boltzmann_populations(&apical(), 0.07, f64::INFINITY).unwrap();
        for &x in p.probabilities() {
            assert_eq!(x, 1.0 / 16.0);
        }
        let f = frozen_populations(&apical(), 0.0, f64::INFINITY).unwrap();
        assert!(f.probabilities().iter().all(|&x| x == 1.0 / 16.0));
    }

    #[test]
    fn zero_temperature_limit_selects_ground_state() {
        let s = apical();
        let b = 0.05;
        let p = boltzmann_populations(&s, b, 1e-4).unwrap();
        let energies = spinmodel::level_energies(&s, b);
        let ground = energies
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .unwrap()
            .0;
        assert!((p.probabilities()[ground] - 1.0).abs() < 1e-12);
        assert_eq!(s.labels()[ground].branch, Branch::Lower);
    }

    #[test]
    fn two_state_zero_field_populations() {
        let s = SpinSpecies::two_state(9.5, 0.1).unwrap();
        let t = 0.37;
        let p = boltzmann_populations(&s, 0.0, t).unwrap();
        let x = 0.1 / t;
        let lower = x.exp() / (2.0 * x.cosh());
        let upper = (-x).exp() / (2.0 * x.cosh());
        assert!((p.probabilities()[1] - lower).abs() < 1e-15);
        assert!((p.probabilities()[0] - upper).abs() < 1e-15);
        // population difference is tanh(Δ/T)
        assert!((p.probabilities()[1] - p.probabilities()[0] - x.tanh()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_temperature() {
        let s = apical();
        assert_eq!(
            boltzmann_populations(&s, 0.0, 0.0).unwrap_err(),
            Error::NonPositiveTemperature(0.0)
        );
        assert!(boltzmann_populations(&s, 0.0, -1.0).is_err());
        assert!(frozen_populations(&s, 0.0, -0.1).is_err());
        assert!(boltzmann_populations(&s, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn zero_field_freeze_favours_largest_hyperfine_projection() {
        let s = apical();
        let p = frozen_populations(&s, 0.0, 0.076).unwrap();
        let low = |tw: i32| {
            p.get(StateLabel {
                m_i: HalfInt::from_twice(tw),
                branch: Branch::Lower,
            })
            .unwrap()
        };
        assert!((low(7) - low(-7)).abs() < 1e-15);
        assert!(low(7) + low(-7) > 0.95);
    }

    #[test]
    fn frozen_at_prep_point_equals_boltzmann() {
        let s = apical();
        let f = frozen_populations(&s, 0.04, 0.5).unwrap();
        let b = boltzmann_populations(&s, 0.04, 0.5).unwrap();
        assert_eq!(f.probabilities(), b.probabilities());
        assert!(matches!(f.provenance(), Provenance::Frozen { .. }));
    }

    #[test]
    fn custom_populations_validated() {
        let s = SpinSpecies::two_state(1.0, 0.1).unwrap();
        let up = StateLabel {
            m_i: HalfInt::ZERO,
            branch: Branch::Upper,
        };
        let down = StateLabel {
            m_i: HalfInt::ZERO,
            branch: Branch::Lower,
        };
        assert!(Populations::custom(&s, &[(up, 0.3), (down, 0.7)]).is_ok());
        assert!(Populations::custom(&s, &[(up, 0.3), (down, 0.6)]).is_err());
        assert!(Populations::custom(&s, &[(up, -0.1), (down, 1.1)]).is_err());
        let bad = StateLabel {
            m_i: HalfInt::from_twice(1),
            branch: Branch::Upper,
        };
        assert!(Populations::custom(&s, &[(bad, 1.0)]).is_err());
    }

    #[test]
    fn thermo_requires_boltzmann() {
        let s = apical();
        let f = frozen_populations(&s, 0.0, 1.0).unwrap();
        assert_eq!(
            thermo(&s, &f, 0.0, 1.0).unwrap_err(),
            Error::RequiresBoltzmann("heat capacity and dM/dT")
        );
        let b = boltzmann_populations(&s, 0.0, 1.0).unwrap();
        assert!(thermo(&s, &b, 0.01, 1.0).is_err());
        // magnetization itself is fine for any populations
        assert!(magnetization(&s, &f, 0.03).is_ok());
    }

    #[test]
    fn zero_field_magnetization_vanishes() {
        for s in [apical(), SpinSpecies::two_state(9.5, 0.05).unwrap()] {
            for t in [0.1, 2.1, 50.0] {
                let th = thermo_at(&s, 0.0, t).unwrap();
                assert!(th.magnetization_per_ion.abs() < 1e-12);
                assert!(th.dm_dt_per_ion.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_state_magnetization_closed_form() {
        // M = μ (h/ℰ) tanh(ℰ/T), checked against -∂F/∂B with F = -T ln Q
        let mu = 9.5;
        let s = SpinSpecies::two_state(mu, 0.08).unwrap();
        let t = 0.9;
        let b = 0.013;
        let h = s.zeeman_slope() * b;
        let e = h.hypot(0.08);
        let closed = mu * h / e * (e / t).tanh();
        let m = thermo_at(&s, b, t).unwrap().magnetization_per_ion;
        assert!((m - closed).abs() < 1e-12 * closed);
        let free = |x: f64| -t * thermo_at(&s, x, t).unwrap().ln_partition_function;
        let step = 1e-6;
        let fd = -(free(b + step) - free(b - step)) / (2.0 * step) / MU_B_OVER_K_B;
        assert!((fd - closed).abs() < 1e-6 * closed);
    }

    #[test]
    fn high_temperature_heat_capacity() {
        let s = apical();
        let t = 1e4;
        let th = thermo_at(&s, 0.02, t).unwrap();
        let e = spinmodel::level_energies(&s, 0.02);
        let approx: f64 = e.iter().map(|x| x * x).sum::<f64>() / (16.0 * t * t);
        assert!((th.heat_capacity_per_ion - approx).abs() < 1e-3 * approx);
        assert!(th.heat_capacity_per_ion < 1e-8);
    }

    #[test]
    fn partition_function_bounds() {
        let s = apical();
        for t in [0.05, 0.5, 5.0] {
            let th = thermo_at(&s, 0.1, t).unwrap();
            let e_max = spinmodel::level_energies(&s, 0.1)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(th.partition_function >= 16.0 * (-e_max / t).exp());
        }
        // deep in the stabilised regime: ln Q stays finite
        let th = thermo_at(&s, 0.1, 1e-3).unwrap();
        assert!(th.ln_partition_function.is_finite());
    }

    #[test]
    fn fluctuation_formulas_match_temperature_differences() {
        let s = apical();
        for &(b, t) in &[(0.03, 0.4), (0.1, 2.1), (-0.07, 7.0)] {
            let th = thermo_at(&s, b, t).unwrap();
            let dt = 1e-4 * t;
            let up = thermo_at(&s, b, t + dt).unwrap();
            let dn = thermo_at(&s, b, t - dt).unwrap();
            let c_fd = (up.mean_energy - dn.mean_energy) / (2.0 * dt);
            let dm_fd = (up.magnetization_per_ion - dn.magnetization_per_ion) / (2.0 * dt);
            assert!((c_fd - th.heat_capacity_per_ion).abs() < 1e-5 * th.heat_capacity_per_ion);
            assert!((dm_fd - th.dm_dt_per_ion).abs() < 1e-5 * th.dm_dt_per_ion.abs());
        }
    }

    proptest! {
        #[test]
        fn always_normalized(b in -0.3f64..0.3, t in 0.01f64..100.0, d in 0.0f64..0.2) {
            let s = apical().with_gap(d);
            let p = boltzmann_populations(&s, b, t).unwrap();
            prop_assert!((sum(&p) - 1.0).abs() < 1e-12);
            prop_assert!(p.probabilities().iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn shift_invariance(b in -0.3f64..0.3, t in 0.05f64..50.0) {
            let s = apical();
            let e = spinmodel::level_energies(&s, b);
            let shifted: Vec<f64> = e.iter().map(|x| x + 1e3).collect();
            let (w1, _) = shifted_weights(&e, t);
            let (w2, _) = shifted_weights(&shifted, t);
            let n1: f64 = w1.iter().sum();
            let n2: f64 = w2.iter().sum();
            for (a, c) in w1.iter().zip(&w2) {
                prop_assert!((a / n1 - c / n2).abs() < 1e-12);
            }
        }

        #[test]
        fn magnetization_odd_in_field(b in 0.0f64..0.3, t in 0.05f64..20.0) {
            let s = apical();
            let m1 = thermo_at(&s, b, t).unwrap().magnetization_per_ion;
            let m2 = thermo_at(&s, -b, t).unwrap().magnetization_per_ion;
            prop_assert!((m1 + m2).abs() < 1e-12 * m1.abs().max(1.0));
        }

        #[test]
        fn heat_capacity_non_negative(b in -0.3f64..0.3, t in 0.01f64..100.0) {
            let th = thermo_at(&apical(), b, t).unwrap();
            prop_assert!(th.heat_capacity_per_ion >= 0.0);
        }
    }
}
