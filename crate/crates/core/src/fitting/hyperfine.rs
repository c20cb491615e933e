//! Hyperfine constant from the positions of the avoided-crossing peaks.

use super::{FitResult, PeakSet};
use crate::spinmodel::HalfInt;
use crate::units::MU_B_OVER_K_B;
use crate::{Error, Result};

/// Fit of `A` plus the `m_I` each peak was assigned to.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperfineFit {
    pub result: FitResult,
    /// `(|m_I|, peak field)` in the order used by the regression.
    pub assignments: Vec<(HalfInt, f64)>,
}

impl HyperfineFit {
    pub fn hyperfine_a(&self) -> f64 {
        self.result.value("A").unwrap_or(f64::NAN)
    }
}

/// Least-squares `A` through the origin of `|B_n| = A·|m_n| / (μ·proj·μ_B/k_B)`.
///
/// Peaks are taken on the positive-field side when any exist, otherwise by
/// magnitude on the negative side. Sorted by `|B|`, they are assigned the
/// smallest non-zero `|m_I|` in turn: 1/2, 3/2, … for half-integer spin.
pub fn fit_hyperfine_a(
    peaks: &PeakSet,
    moment_mu: f64,
    projection: f64,
    nuclear_i: HalfInt,
) -> Result<HyperfineFit> {
    if !(moment_mu > 0.0 && projection > 0.0) {
        return Err(Error::InvalidParameter {
            name: "moment_mu",
            reason: "moment and projection must be > 0".into(),
        });
    }
    let positive: Vec<f64> = peaks.iter().map(|p| p.field).filter(|&b| b > 0.0).collect();
    let mut fields: Vec<f64> = if positive.is_empty() {
        peaks
            .iter()
            .map(|p| p.field.abs())
            .filter(|&b| b > 0.0)
            .collect()
    } else {
        positive
    };
    fields.sort_by(f64::total_cmp);
    let first_twice = if nuclear_i.twice() % 2 == 0 { 2 } else { 1 };
    let available = ((nuclear_i.twice() - first_twice) / 2 + 1).max(0) as usize;
    if fields.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 peaks on one side of zero field, got {}",
            fields.len()
        )));
    }
    if fields.len() > available {
        return Err(Error::Fit(format!(
            "{} peaks exceed the {available} crossings available on one side for I = {nuclear_i}",
            fields.len()
        )));
    }
    if fields.windows(2).any(|w| w[1] == w[0]) {
        return Err(Error::Fit(
            "duplicate peak fields cannot be assigned".into(),
        ));
    }

    let slope = moment_mu * projection * MU_B_OVER_K_B;
    let assignments: Vec<(HalfInt, f64)> = fields
        .iter()
        .enumerate()
        .map(|(n, &b)| (HalfInt::from_twice(first_twice + 2 * n as i32), b))
        .collect();
    let xs: Vec<f64> = assignments.iter().map(|(m, _)| m.value() / slope).collect();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&fields).map(|(x, b)| x * b).sum();
    let a = sxy / sxx;
    let residuals: Vec<f64> = xs.iter().zip(&fields).map(|(x, b)| b - a * x).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let n = fields.len() as f64;
    let se = (rss / (n - 1.0) / sxx).sqrt();

    // Each peak must land closer to its own crossing than to a neighbour's.
    let spacing = a / slope;
    if let Some(r) = residuals.iter().find(|r| r.abs() > 0.5 * spacing) {
        return Err(Error::Fit(format!(
            "peak misplaced by {r} T against a crossing spacing of {spacing} T; assignment is ambiguous"
        )));
    }

    let mut result = FitResult {
        parameters: Vec::new(),
        residual_norm: rss.sqrt(),
        scale: None,
        model_description: format!(
            "|B_n| = A*|m_n|/(mu*proj*muB/kB), mu = {moment_mu}, proj = {projection}, I = {nuclear_i}; A in K"
        ),
        warnings: Vec::new(),
    };
    result.push("A", a, se);
    Ok(HyperfineFit {
        result,
        assignments,
    })
}
