//! Curie-law fit of the zero-field static susceptibility.

use nalgebra::{DMatrix, DVector};

use super::FitResult;
use crate::material::g_from_curie_constant;
use crate::{Error, Result};

/// Parameters of `χ(T) = C/T + χ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurieFit {
    pub result: FitResult,
    /// Longitudinal g-factor implied by `C`; `None` when `C ≤ 0`.
    pub g_parallel: Option<f64>,
}

/// Linear least squares of `χ` against `1/T`.
///
/// `data` holds `(T in K, χ per formula unit in μ_B/T)`; `x` is the magnetic
/// ion concentration per formula unit, used to convert `C` into `g_∥`.
pub fn fit_curie(data: &[(f64, f64)], x: f64) -> Result<CurieFit> {
    if data.len() < 3 {
        return Err(Error::Fit(format!(
            "Curie fit needs at least 3 points, got {}",
            data.len()
        )));
    }
    if let Some(&(t, _)) = data.iter().find(|(t, _)| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::NonPositiveTemperature(t));
    }
    if let Some(&(_, c)) = data.iter().find(|(_, c)| !c.is_finite()) {
        return Err(Error::Fit(format!("non-finite susceptibility {c}")));
    }
    let n = data.len();
    let design = DMatrix::from_fn(n, 2, |r, c| if c == 0 { 1.0 / data[r].0 } else { 1.0 });
    let y = DVector::from_iterator(n, data.iter().map(|d| d.1));
    let normal = design.transpose() * &design;
    let inv = normal
        .clone()
        .try_inverse()
        .filter(|_| {
            let sv = design.clone().svd(false, false).singular_values;
            sv.min() > 1e-12 * sv.max()
        })
        .ok_or_else(|| Error::Fit("temperatures do not separate C from chi0".into()))?;
    let beta = &inv * (design.transpose() * &y);
    let resid = &y - &design * &beta;
    let rss = resid.norm_squared();
    let s2 = rss / (n - 2) as f64;
    let (curie, chi0) = (beta[0], beta[1]);

    let mut result = FitResult {
        parameters: Vec::new(),
        residual_norm: rss.sqrt(),
        scale: None,
        model_description: format!(
            "chi(T) = C/T + chi0, chi in muB/T per formula unit, C in muB*K/T, x = {x}"
        ),
        warnings: Vec::new(),
    };
    result.push("C", curie, (s2 * inv[(0, 0)]).sqrt());
    result.push("chi0", chi0, (s2 * inv[(1, 1)]).sqrt());
    let g_parallel = g_from_curie_constant(curie, x);
    match g_parallel {
        Some(g) => {
            // dg/dC = g / (2C)
            let se = g / (2.0 * curie) * (s2 * inv[(0, 0)]).sqrt();
            result.push("g_parallel", g, se);
        }
        None => result.warnings.push(format!(
            "unphysical: Curie constant {curie} is not positive"
        )),
    }
    Ok(CurieFit { result, g_parallel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::curie_constant;

    #[test]
    fn exact_curie_law_recovers_g() {
        let c = curie_constant(0.0025, 19.0);
        let data: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 10.0, 20.0]
            .iter()
            .map(|&t| (t, c / t + 1e-4))
            .collect();
        let fit = fit_curie(&data, 0.0025).unwrap();
        assert!((fit.g_parallel.unwrap() - 19.0).abs() < 1e-9);
        assert!((fit.result.value("chi0").unwrap() - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn negative_constant_is_flagged() {
        let data = [(1.0, -1.0), (2.0, -0.5), (4.0, -0.25)];
        let fit = fit_curie(&data, 0.01).unwrap();
        assert!(fit.g_parallel.is_none());
        assert!(fit.result.warnings[0].contains("unphysical"));
    }

    #[test]
    fn single_temperature_is_rank_deficient() {
        let data = [(2.0, 1.0), (2.0, 1.1), (2.0, 0.9)];
        assert!(matches!(fit_curie(&data, 0.01), Err(Error::Fit(_))));
    }
}
