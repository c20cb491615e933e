//! Data reduction: peaks, hyperfine constant, gap weights, Curie law and
//! level populations from measured spectra.
//!
//! All solvers are deterministic: no random starts, fixed pivoting order.

mod curie;
mod hyperfine;
mod peaks;
mod populations;
pub mod qp;
mod weights;

pub use curie::{fit_curie, CurieFit};
pub use hyperfine::{fit_hyperfine_a, HyperfineFit};
pub use peaks::{detect_peaks, Peak, PeakSet};
pub use populations::{infer_populations, ChannelPopulation, HeightScale, PopulationInference};
pub use weights::{fit_weights, WeightFitOptions};

use std::fmt;

use crate::io::format_float;

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub std_error: f64,
}

/// Outcome of any fit in this module.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub parameters: Vec<Parameter>,
    /// Euclidean norm of the residual vector, in data units.
    pub residual_norm: f64,
    /// Global amplitude, when one was fitted.
    pub scale: Option<f64>,
    pub model_description: String,
    /// Conditions worth reporting that did not stop the fit.
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.value)
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.std_error)
    }

    pub(crate) fn push(&mut self, name: impl Into<String>, value: f64, std_error: f64) {
        self.parameters.push(Parameter {
            name: name.into(),
            value,
            std_error,
        });
    }
}

impl fmt::Display for FitResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {}", self.model_description)?;
        for p in &self.parameters {
            writeln!(
                f,
                "{} = {} +/- {}",
                p.name,
                format_float(p.value),
                format_float(p.std_error)
            )?;
        }
        write!(f, "residual_norm = {}", format_float(self.residual_norm))?;
        for w in &self.warnings {
            write!(f, "\n# warning: {w}")?;
        }
        Ok(())
    }
}
