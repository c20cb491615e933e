//! Strain-gap weights from a measured isolated spectrum.

use nalgebra::{DMatrix, DVector};

use super::qp::bounded_least_squares;
use super::FitResult;
use crate::material::{component_values, Material, SpectrumRequest};
use crate::response::ResponseCurve;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightFitOptions {
    pub temperature: f64,
    /// Probe amplitude in tesla.
    pub probe_amplitude: f64,
    /// Fit a free overall amplitude; data are then in arbitrary units.
    pub fit_scale: bool,
}

impl WeightFitOptions {
    pub fn new(temperature: f64) -> Self {
        WeightFitOptions {
            temperature,
            probe_amplitude: 0.0,
            fit_scale: false,
        }
    }
}

/// Fits `data ≈ Σ_k f_k·χ_k(B)` where `χ_k` is the material response with
/// every ion at the k-th gap of `template.distribution` (its weights are
/// ignored). Basis curves are evaluated at the data fields.
///
/// Without a free scale the weights obey `f_k ≥ 0`, `Σ f_k ≤ 1` and the
/// remainder is reported as `f0`, the non-responding fraction. With a free
/// scale the amplitudes are only constrained non-negative and normalised to
/// sum to one; `f0` cannot be separated from the scale and is set to 0.
///
/// Standard errors come from the unconstrained linear-regression covariance
/// `s²·(XᵀX)⁻¹` with `s² = RSS/(N − p)`.
pub fn fit_weights(
    data: &ResponseCurve,
    template: &Material,
    options: &WeightFitOptions,
) -> Result<FitResult> {
    let gaps = template.distribution.gaps();
    let p = gaps.len();
    let n = data.len();
    if n <= p {
        return Err(Error::Fit(format!(
            "{n} data points cannot determine {p} weights"
        )));
    }
    if data.values().iter().all(|&v| v == 0.0) {
        return Err(Error::Fit("data are identically zero".into()));
    }
    let req = SpectrumRequest {
        probe_amplitude: options.probe_amplitude,
        ..SpectrumRequest::isolated(options.temperature)
    };
    let mut x = DMatrix::<f64>::zeros(n, p);
    for (k, &delta) in gaps.iter().enumerate() {
        let column = component_values(template, delta, data.fields(), &req)?;
        x.column_mut(k).copy_from_slice(&column);
    }
    let y = DVector::from_column_slice(data.values());
    let solution = bounded_least_squares(&x, &y, !options.fit_scale)?;
    let coeffs = DVector::from_vec(solution.coefficients.clone());
    let residual = &y - &x * &coeffs;
    let rss = residual.norm_squared();
    let s2 = rss / (n - p) as f64;
    let cov = (x.transpose() * &x)
        .try_inverse()
        .ok_or_else(|| Error::Fit("basis curves are linearly dependent".into()))?
        * s2;

    let mut result = FitResult {
        parameters: Vec::new(),
        residual_norm: rss.sqrt(),
        scale: None,
        model_description: String::new(),
        warnings: Vec::new(),
    };
    let gap_list = gaps
        .iter()
        .map(|d| format!("{d}"))
        .collect::<Vec<_>>()
        .join(", ");
    if options.fit_scale {
        let total: f64 = coeffs.sum();
        if !(total > 0.0) {
            return Err(Error::Fit(
                "no non-negative combination of the basis fits the data".into(),
            ));
        }
        // delta method for f = c / Σc
        let jac = DMatrix::from_fn(p, p, |i, j| {
            let kron = if i == j { total } else { 0.0 };
            (kron - coeffs[i]) / (total * total)
        });
        let cov_f = &jac * &cov * jac.transpose();
        for k in 0..p {
            result.push(
                format!("f{}", k + 1),
                coeffs[k] / total,
                cov_f[(k, k)].sqrt(),
            );
        }
        result.push("f0", 0.0, 0.0);
        let scale_se = cov.sum().max(0.0).sqrt();
        result.push("scale", total, scale_se);
        result.scale = Some(total);
        result.model_description = format!(
            "data = scale * sum_k f_k chi_k(B), gaps [{gap_list}] K, T = {} K, probe = {} T; f0 not identifiable with a free scale",
            options.temperature, options.probe_amplitude
        );
    } else {
        for k in 0..p {
            result.push(format!("f{}", k + 1), coeffs[k], cov[(k, k)].sqrt());
        }
        let f0 = (1.0 - coeffs.sum()).max(0.0);
        result.push("f0", f0, cov.sum().max(0.0).sqrt());
        result.model_description = format!(
            "data = sum_k f_k chi_k(B) per ion, f_k >= 0, sum f_k <= 1, gaps [{gap_list}] K, T = {} K, probe = {} T",
            options.temperature, options.probe_amplitude
        );
    }
    for &i in &solution.active {
        if i < p {
            result
                .warnings
                .push(format!("f{} is held at its bound 0", i + 1));
        } else {
            result
                .warnings
                .push("weights saturate sum f_k = 1 (f0 = 0)".into());
        }
    }
    Ok(result)
}
