//! Ising-like ions with a hyperfine-split effective spin-1/2 doublet.
//!
//! For each nuclear projection `m_I` the Hamiltonian reduces to a 2×2 block
//!
//! ```text
//! | h   Δ |        h = A·m_I + μ_proj·B   (kelvin)
//! | Δ  -h |
//! ```
//!
//! with eigenvalues `±ℰ`, `ℰ = sqrt(h² + Δ²)`. Every quantity here follows
//! from this closed form; there is no general diagonalizer.

use std::fmt;

use crate::units::MU_B_OVER_K_B;
use crate::{Error, Result};

/// A half-integer stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    /// Accepts only values `v` for which `2v` is an integer.
    pub fn try_from_f64(v: f64) -> Option<Self> {
        let twice = 2.0 * v;
        if twice.is_finite() && (twice - twice.round()).abs() < 1e-9 && twice.abs() < 1e6 {
            Some(HalfInt(twice.round() as i32))
        } else {
            None
        }
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) * 0.5
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Which eigenvalue of a block: `Upper` is `+ℰ`, `Lower` is `-ℰ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Upper,
    Lower,
}

impl Branch {
    /// `+1` for the upper branch, `-1` for the lower.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Upper => 1.0,
            Branch::Lower => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Branch::Upper => '+',
            Branch::Lower => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateLabel {
    pub m_i: HalfInt,
    pub branch: Branch,
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.m_i, self.branch.symbol())
    }
}

/// One class of Ising-like ion.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSpecies {
    /// Moment of the pure up/down states, μ_B.
    pub moment_mu: f64,
    /// Hyperfine constant `A / k_B`, K.
    pub hyperfine_a: f64,
    /// Transverse gap `Δ / k_B`, K.
    pub gap_delta: f64,
    /// Projection of the Ising axis on the field, in (0, 1].
    pub projection: f64,
    pub nuclear_i: HalfInt,
    pub multiplicity: u32,
}

impl SpinSpecies {
    pub fn new(
        moment_mu: f64,
        hyperfine_a: f64,
        gap_delta: f64,
        projection: f64,
        nuclear_i: HalfInt,
        multiplicity: u32,
    ) -> Result<Self> {
        let s = SpinSpecies {
            moment_mu,
            hyperfine_a,
            gap_delta,
            projection,
            nuclear_i,
            multiplicity,
        };
        s.validate()?;
        Ok(s)
    }

    /// Bare two-state system: no nuclear spin, full projection.
    pub fn two_state(moment_mu: f64, gap_delta: f64) -> Result<Self> {
        Self::new(moment_mu, 0.0, gap_delta, 1.0, HalfInt::ZERO, 1)
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: String) -> Error {
            Error::InvalidParameter { name, reason }
        }
        if !(self.moment_mu.is_finite() && self.moment_mu > 0.0) {
            return Err(bad(
                "moment_mu",
                format!("must be > 0, got {}", self.moment_mu),
            ));
        }
        if !self.hyperfine_a.is_finite() {
            return Err(bad("hyperfine_a", "must be finite".into()));
        }
        if !(self.gap_delta.is_finite() && self.gap_delta >= 0.0) {
            return Err(bad(
                "gap_delta",
                format!("must be >= 0, got {}", self.gap_delta),
            ));
        }
        if !(self.projection > 0.0 && self.projection <= 1.0) {
            return Err(bad(
                "projection",
                format!("must lie in (0, 1], got {}", self.projection),
            ));
        }
        if self.nuclear_i.twice() < 0 {
            return Err(bad(
                "nuclear_i",
                format!("must be >= 0, got {}", self.nuclear_i),
            ));
        }
        if self.multiplicity == 0 {
            return Err(bad("multiplicity", "must be >= 1".into()));
        }
        Ok(())
    }

    /// Same species with a different gap.
    pub fn with_gap(&self, gap_delta: f64) -> Self {
        SpinSpecies {
            gap_delta,
            ..self.clone()
        }
    }

    /// `projection · moment_mu`, μ_B.
    pub fn projected_moment(&self) -> f64 {
        self.projection * self.moment_mu
    }

    /// `dh/dB` in K/T.
    pub fn zeeman_slope(&self) -> f64 {
        self.projected_moment() * MU_B_OVER_K_B
    }

    /// Number of 2×2 blocks, `2I + 1`.
    pub fn block_count(&self) -> usize {
        (self.nuclear_i.twice() + 1) as usize
    }

    pub fn state_count(&self) -> usize {
        2 * self.block_count()
    }

    /// `m_I` values from `-I` to `+I`.
    pub fn m_values(&self) -> impl Iterator<Item = HalfInt> + '_ {
        let ti = self.nuclear_i.twice();
        (0..=ti).map(move |k| HalfInt::from_twice(-ti + 2 * k))
    }

    /// All labels in canonical order: `m_I` ascending, upper before lower.
    pub fn labels(&self) -> Vec<StateLabel> {
        self.m_values()
            .flat_map(|m_i| {
                [Branch::Upper, Branch::Lower]
                    .into_iter()
                    .map(move |branch| StateLabel { m_i, branch })
            })
            .collect()
    }

    /// Position of a label in [`SpinSpecies::labels`].
    pub fn state_index(&self, label: StateLabel) -> Result<usize> {
        let block = self.block_index(label.m_i)?;
        Ok(2 * block + usize::from(label.branch == Branch::Lower))
    }

    pub(crate) fn block_index(&self, m_i: HalfInt) -> Result<usize> {
        self.check_m(m_i)?;
        Ok(((m_i.twice() + self.nuclear_i.twice()) / 2) as usize)
    }

    fn check_m(&self, m_i: HalfInt) -> Result<()> {
        let ti = self.nuclear_i.twice();
        if m_i.twice().abs() > ti || (m_i.twice() - ti) % 2 != 0 {
            return Err(Error::InvalidNuclearProjection {
                m_i: m_i.value(),
                nuclear_i: self.nuclear_i.value(),
            });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn bias_unchecked(&self, m_i: HalfInt, field: f64) -> f64 {
        self.hyperfine_a * m_i.value() + self.zeeman_slope() * field
    }
}

/// Diagonal element of the block: `A·m_I + μ_proj·B`, K.
pub fn block_bias(species: &SpinSpecies, m_i: HalfInt, field: f64) -> Result<f64> {
    species.check_m(m_i)?;
    Ok(species.bias_unchecked(m_i, field))
}

/// `(E_+, E_-) = (+ℰ, -ℰ)`, K.
pub fn block_energies(species: &SpinSpecies, m_i: HalfInt, field: f64) -> Result<(f64, f64)> {
    let h = block_bias(species, m_i, field)?;
    let e = h.hypot(species.gap_delta);
    Ok((e, -e))
}

/// Moments and their field derivatives for both branches of one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMoments {
    pub m_plus: f64,
    pub m_minus: f64,
    pub dm_plus: f64,
    pub dm_minus: f64,
}

/// `m_± = ∓μ_proj·h/ℰ` (μ_B) and `∂m_±/∂B = ∓μ_proj²·(μ_B/k_B)·Δ²/ℰ³` (μ_B/T).
pub fn block_moment_and_slope(
    species: &SpinSpecies,
    m_i: HalfInt,
    field: f64,
) -> Result<BlockMoments> {
    let h = block_bias(species, m_i, field)?;
    let d = species.gap_delta;
    let e = h.hypot(d);
    if e == 0.0 {
        return Err(Error::DegeneratePoint {
            m_i: m_i.value(),
            field,
        });
    }
    let mu = species.projected_moment();
    let m = mu * h / e;
    let dm = mu * species.zeeman_slope() * d * d / (e * e * e);
    Ok(BlockMoments {
        m_plus: -m,
        m_minus: m,
        dm_plus: -dm,
        dm_minus: dm,
    })
}

/// Overlap of an eigenstate with its spin-reversed partner, `Δ/ℰ`.
/// Both branches of a block share the same value.
pub fn concurrence(species: &SpinSpecies, m_i: HalfInt, field: f64) -> Result<f64> {
    let h = block_bias(species, m_i, field)?;
    let d = species.gap_delta;
    let e = h.hypot(d);
    if e == 0.0 {
        return Err(Error::DegeneratePoint {
            m_i: m_i.value(),
            field,
        });
    }
    Ok(d / e)
}

/// Normalized eigenvector `(up, down)` of one block.
///
/// With `θ = atan2(Δ, h)` the upper state is `(cos θ/2, sin θ/2)` and the
/// lower state `(-sin θ/2, cos θ/2)`.
pub fn block_eigenvector(
    species: &SpinSpecies,
    m_i: HalfInt,
    branch: Branch,
    field: f64,
) -> Result<[f64; 2]> {
    let h = block_bias(species, m_i, field)?;
    let half = 0.5 * species.gap_delta.atan2(h);
    let (s, c) = half.sin_cos();
    Ok(match branch {
        Branch::Upper => [c, s],
        Branch::Lower => [-s, c],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelPoint {
    pub label: StateLabel,
    pub energy: f64,
    pub moment: f64,
    pub moment_slope: f64,
    pub concurrence: f64,
}

/// All `2(2I+1)` levels at one field, in canonical label order.
pub fn levels(species: &SpinSpecies, field: f64) -> Result<Vec<LevelPoint>> {
    let mut out = Vec::with_capacity(species.state_count());
    for m_i in species.m_values() {
        let (ep, em) = block_energies(species, m_i, field)?;
        let mom = block_moment_and_slope(species, m_i, field)?;
        let c = concurrence(species, m_i, field)?;
        out.push(LevelPoint {
            label: StateLabel {
                m_i,
                branch: Branch::Upper,
            },
            energy: ep,
            moment: mom.m_plus,
            moment_slope: mom.dm_plus,
            concurrence: c,
        });
        out.push(LevelPoint {
            label: StateLabel {
                m_i,
                branch: Branch::Lower,
            },
            energy: em,
            moment: mom.m_minus,
            moment_slope: mom.dm_minus,
            concurrence: c,
        });
    }
    Ok(out)
}

/// Energies only, canonical order. Never fails for a validated species.
pub fn level_energies(species: &SpinSpecies, field: f64) -> Vec<f64> {
    let d = species.gap_delta;
    species
        .m_values()
        .flat_map(|m| {
            let e = species.bias_unchecked(m, field).hypot(d);
            [e, -e]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    /// Electron flip within one `m_I` block, split by `2Δ`.
    Avoided,
    /// True degeneracy between different `m_I` blocks.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    /// For avoided crossings both entries are equal.
    pub m_i: (HalfInt, HalfInt),
    pub field: f64,
    pub kind: CrossingKind,
}

/// Avoided crossings (`h = 0`, one per `m_I`) and direct crossings
/// (`|h_m| = |h_m'|`, `m ≠ m'`, located with `Δ` neglected), sorted by field.
pub fn level_crossings(species: &SpinSpecies) -> Vec<Crossing> {
    let slope = species.zeeman_slope();
    let a = species.hyperfine_a;
    let ms: Vec<HalfInt> = species.m_values().collect();
    let mut out: Vec<Crossing> = ms
        .iter()
        .map(|&m| Crossing {
            m_i: (m, m),
            field: -a * m.value() / slope,
            kind: CrossingKind::Avoided,
        })
        .collect();
    if a != 0.0 {
        for (k, &m1) in ms.iter().enumerate() {
            for &m2 in &ms[k + 1..] {
                out.push(Crossing {
                    m_i: (m1, m2),
                    field: -a * (m1.value() + m2.value()) / (2.0 * slope),
                    kind: CrossingKind::Direct,
                });
            }
        }
    }
    out.sort_by(|x, y| x.field.total_cmp(&y.field));
    out
}

/// Avoided-crossing fields only, ascending.
pub fn avoided_crossing_fields(species: &SpinSpecies) -> Vec<f64> {
    level_crossings(species)
        .into_iter()
        .filter(|c| c.kind == CrossingKind::Avoided)
        .map(|c| c.field)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn apical() -> SpinSpecies {
        SpinSpecies::new(9.5, 0.2945, 0.015, 1.0, HalfInt::from_twice(7), 1).unwrap()
    }

    #[test]
    fn half_int_parsing() {
        assert_eq!(HalfInt::try_from_f64(3.5), Some(HalfInt::from_twice(7)));
        assert_eq!(HalfInt::try_from_f64(-0.5), Some(HalfInt::from_twice(-1)));
        assert_eq!(HalfInt::try_from_f64(0.3), None);
        assert_eq!(HalfInt::from_twice(7).to_string(), "7/2");
        assert_eq!(HalfInt::from_twice(-4).to_string(), "-2");
    }

    #[test]
    fn species_validation() {
        assert!(SpinSpecies::two_state(0.0, 0.1).is_err());
        assert!(SpinSpecies::two_state(1.0, -0.1).is_err());
        assert!(SpinSpecies::new(1.0, 0.0, 0.1, 1.5, HalfInt::ZERO, 1).is_err());
        assert!(SpinSpecies::new(1.0, 0.0, 0.1, 0.0, HalfInt::ZERO, 1).is_err());
        assert!(SpinSpecies::new(1.0, 0.0, 0.1, 1.0, HalfInt::ZERO, 0).is_err());
        assert!(SpinSpecies::new(1.0, 0.0, 0.1, 1.0, HalfInt::from_twice(-1), 1).is_err());
    }

    #[test]
    fn label_set_has_two_per_block() {
        let s = apical();
        let labels = s.labels();
        assert_eq!(labels.len(), 16);
        for (k, l) in labels.iter().enumerate() {
            assert_eq!(s.state_index(*l).unwrap(), k);
        }
        let bad = StateLabel {
            m_i: HalfInt::from_twice(9),
            branch: Branch::Upper,
        };
        assert!(s.state_index(bad).is_err());
        // integer m_I is not in a half-integer manifold
        assert!(block_bias(&s, HalfInt::from_twice(2), 0.0).is_err());
    }

    #[test]
    fn bias_vanishes_at_first_crossing() {
        let s = apical();
        let half = HalfInt::from_twice(1);
        // root of A/2 + μ·(μ_B/k_B)·B = 0
        let root = -0.2945 * 0.5 / (9.5 * MU_B_OVER_K_B);
        assert!((root * 1e3 + 23.08).abs() < 0.01);
        assert!(block_bias(&s, half, root).unwrap().abs() < 1e-9);
    }

    #[test]
    fn bias_at_zero_field_is_hyperfine_only() {
        let s = apical();
        for m in s.m_values() {
            assert_eq!(block_bias(&s, m, 0.0).unwrap(), 0.2945 * m.value());
        }
    }

    #[test]
    fn bias_of_bare_moment() {
        let s = SpinSpecies::new(10.0, 0.0, 0.01, 1.0, HalfInt::ZERO, 1).unwrap();
        let h = block_bias(&s, HalfInt::ZERO, 0.1).unwrap();
        assert!((h - 0.671_714 * 10.0 * 0.1).abs() < 1e-5);
    }

    #[test]
    fn energies_simple_cases() {
        let s = SpinSpecies::two_state(1.0, 0.4).unwrap();
        let (p, m) = block_energies(&s, HalfInt::ZERO, 0.0).unwrap();
        assert_eq!((p, m), (0.4, -0.4));

        let s = SpinSpecies::two_state(1.0, 0.0).unwrap();
        let b = 0.5 / MU_B_OVER_K_B;
        let (p, m) = block_energies(&s, HalfInt::ZERO, b).unwrap();
        assert!((p - 0.5).abs() < 1e-15 && (m + 0.5).abs() < 1e-15);

        let s = SpinSpecies::two_state(1.0, 0.4).unwrap();
        let b = 0.3 / MU_B_OVER_K_B;
        let (p, m) = block_energies(&s, HalfInt::ZERO, b).unwrap();
        assert!((p - 0.5).abs() < 1e-15 && (m + 0.5).abs() < 1e-15);
    }

    #[test]
    fn moments_at_crossing_and_far_away() {
        let s = SpinSpecies::two_state(9.5, 0.1).unwrap();
        let mom = block_moment_and_slope(&s, HalfInt::ZERO, 0.0).unwrap();
        assert_eq!(mom.m_plus, 0.0);
        assert_eq!(mom.m_minus, 0.0);
        let mu2 = 9.5 * 9.5 * MU_B_OVER_K_B;
        assert!((mom.dm_plus + mu2 / 0.1).abs() < 1e-12 * mu2 / 0.1);
        assert!((mom.dm_minus - mu2 / 0.1).abs() < 1e-12 * mu2 / 0.1);

        let s = SpinSpecies::two_state(9.5, 0.0).unwrap();
        let mom = block_moment_and_slope(&s, HalfInt::ZERO, 0.05).unwrap();
        assert_eq!((mom.m_plus, mom.m_minus), (-9.5, 9.5));
        assert_eq!((mom.dm_plus, mom.dm_minus), (-0.0, 0.0));
        assert!(matches!(
            block_moment_and_slope(&s, HalfInt::ZERO, 0.0),
            Err(Error::DegeneratePoint { .. })
        ));
        assert!(concurrence(&s, HalfInt::ZERO, 0.0).is_err());
    }

    #[test]
    fn slope_matches_second_difference_of_energy() {
        let s = apical();
        let step = 1e-6;
        let c = MU_B_OVER_K_B;
        for &b in &[-0.2, -0.07, 0.011, 0.05, 0.16] {
            for m in s.m_values() {
                let e = |x: f64| block_energies(&s, m, x).unwrap();
                let (ep0, em0) = e(b);
                let (ep1, em1) = e(b + step);
                let (ep2, em2) = e(b - step);
                let fd_plus = -(ep1 - 2.0 * ep0 + ep2) / (step * step) / c;
                let fd_minus = -(em1 - 2.0 * em0 + em2) / (step * step) / c;
                let mom = block_moment_and_slope(&s, m, b).unwrap();
                // second differences lose ~8 digits; compare on the scale of the peak slope
                let scale = s.projected_moment() * s.zeeman_slope() / s.gap_delta;
                assert!((fd_plus - mom.dm_plus).abs() < 1e-3 * scale, "{b} {m}");
                assert!((fd_minus - mom.dm_minus).abs() < 1e-3 * scale);
            }
        }
    }

    #[test]
    fn concurrence_values() {
        let s = SpinSpecies::two_state(9.5, 0.02).unwrap();
        let slope = s.zeeman_slope();
        assert_eq!(concurrence(&s, HalfInt::ZERO, 0.0).unwrap(), 1.0);
        let c = concurrence(&s, HalfInt::ZERO, 0.02 / slope).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(concurrence(&s, HalfInt::ZERO, 1e6).unwrap() < 1e-8);
    }

    #[test]
    fn concurrence_equals_spin_flip_overlap() {
        let s = apical();
        for &b in &[-0.1, -0.023, 0.0, 0.03, 0.2] {
            for m in s.m_values() {
                for branch in [Branch::Upper, Branch::Lower] {
                    let v = block_eigenvector(&s, m, branch, b).unwrap();
                    // spin reversal swaps the up and down amplitudes
                    let overlap = (2.0 * v[0] * v[1]).abs();
                    let c = concurrence(&s, m, b).unwrap();
                    assert!((overlap - c).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn eigenvectors_diagonalize_block() {
        let s = apical();
        for &b in &[-0.1, 0.0, 0.069] {
            for m in s.m_values() {
                let h = block_bias(&s, m, b).unwrap();
                let d = s.gap_delta;
                let (ep, em) = block_energies(&s, m, b).unwrap();
                for (branch, e) in [(Branch::Upper, ep), (Branch::Lower, em)] {
                    let v = block_eigenvector(&s, m, branch, b).unwrap();
                    let hv = [h * v[0] + d * v[1], d * v[0] - h * v[1]];
                    assert!((hv[0] - e * v[0]).abs() < 1e-14);
                    assert!((hv[1] - e * v[1]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn apical_crossing_fields() {
        let s = apical();
        let f = avoided_crossing_fields(&s);
        assert_eq!(f.len(), 8);
        let expect_mt = [23.1, 69.2, 115.4, 161.5];
        for (k, e) in expect_mt.iter().enumerate() {
            assert!((f[4 + k] * 1e3 - e).abs() < 0.05, "{:?}", f);
            assert!((f[3 - k] * 1e3 + e).abs() < 0.05);
        }
    }

    #[test]
    fn basal_crossings_are_three_times_apical() {
        let a = apical();
        let b = SpinSpecies {
            projection: 1.0 / 3.0,
            multiplicity: 3,
            ..a.clone()
        };
        let fa = avoided_crossing_fields(&a);
        let fb = avoided_crossing_fields(&b);
        for (x, y) in fa.iter().zip(&fb) {
            assert!((3.0 * x - y).abs() < 1e-12);
        }
        // first basal crossing sits on apical peak 2
        assert!((fb[4] - fa[5]).abs() < 1e-12);
    }

    #[test]
    fn two_state_single_crossing_at_zero() {
        let s = SpinSpecies::two_state(10.0, 0.1).unwrap();
        let c = level_crossings(&s);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].kind, CrossingKind::Avoided);
        assert_eq!(c[0].field, 0.0);
    }

    #[test]
    fn direct_crossings_are_true_degeneracies() {
        let s = apical().with_gap(0.0);
        let direct: Vec<_> = level_crossings(&s)
            .into_iter()
            .filter(|c| c.kind == CrossingKind::Direct)
            .collect();
        assert_eq!(direct.len(), 28);
        for c in direct {
            let (e1, _) = block_energies(&s, c.m_i.0, c.field).unwrap();
            let (e2, _) = block_energies(&s, c.m_i.1, c.field).unwrap();
            assert!((e1 - e2).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn particle_hole_and_reversal(
            b in -0.25f64..0.25,
            twice_m in 0i32..8,
            delta in 0.0f64..0.2,
            proj in prop::sample::select(vec![1.0, 1.0 / 3.0]),
        ) {
            let s = SpinSpecies { gap_delta: delta, projection: proj, ..apical() };
            let m = HalfInt::from_twice(2 * twice_m - 7);
            let neg = HalfInt::from_twice(-m.twice());
            let (p, q) = block_energies(&s, m, b).unwrap();
            prop_assert_eq!(p, -q);
            let (p2, q2) = block_energies(&s, neg, -b).unwrap();
            prop_assert_eq!(p, p2);
            prop_assert_eq!(q, q2);
        }

        #[test]
        fn moment_is_minus_energy_gradient(b in -0.25f64..0.25, twice_m in 0i32..8) {
            let s = apical();
            let m = HalfInt::from_twice(2 * twice_m - 7);
            let step = 1e-6;
            let (p1, q1) = block_energies(&s, m, b + step).unwrap();
            let (p2, q2) = block_energies(&s, m, b - step).unwrap();
            let c = MU_B_OVER_K_B;
            let mom = block_moment_and_slope(&s, m, b).unwrap();
            let tol = 1e-6 * s.projected_moment();
            prop_assert!((mom.m_plus + (p1 - p2) / (2.0 * step) / c).abs() < tol);
            prop_assert!((mom.m_minus + (q1 - q2) / (2.0 * step) / c).abs() < tol);
        }

        #[test]
        fn slope_is_cubed_concurrence(b in -0.25f64..0.25, twice_m in 0i32..8, delta in 1e-3f64..0.2) {
            let s = apical().with_gap(delta);
            let m = HalfInt::from_twice(2 * twice_m - 7);
            let c = concurrence(&s, m, b).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
            let mom = block_moment_and_slope(&s, m, b).unwrap();
            let expect = s.projected_moment() * s.zeeman_slope() / delta * c.powi(3);
            prop_assert!((mom.dm_minus - expect).abs() <= 1e-13 * expect.abs().max(1e-300) + 1e-300);
            prop_assert!((mom.dm_plus + expect).abs() <= 1e-13 * expect.abs().max(1e-300) + 1e-300);
        }

        #[test]
        fn concurrence_even_in_bias(h in 0.0f64..2.0, delta in 1e-3f64..0.5) {
            let s = SpinSpecies::two_state(1.0, delta).unwrap();
            let b = h / s.zeeman_slope();
            let c1 = concurrence(&s, HalfInt::ZERO, b).unwrap();
            let c2 = concurrence(&s, HalfInt::ZERO, -b).unwrap();
            prop_assert_eq!(c1, c2);
        }
    }
}
