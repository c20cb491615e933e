//! Flat `key = value` run configuration.
//!
//! ```text
//! # sample
//! material.A_K = 0.2945
//! distribution.delta1_K = 0.015
//! distribution.weight1 = 0.511
//! run.T_K = 2.1
//! ```
//!
//! Unknown keys are fatal and reported together. A repeated key keeps its
//! last value and records a warning.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::material::{
    spin_ice_material, DeltaDistribution, Material, PopulationsMode, SpectrumRequest,
};
use crate::response::{linear_grid, ResponseKind};
use crate::units::mt_to_tesla;
use crate::{Error, Result};

/// Everything a batch run needs. Defaults describe the reference sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub concentration_x: f64,
    pub g_parallel: f64,
    /// Hyperfine constant, K.
    pub hyperfine_a: f64,
    /// `(Δ in K, weight)` pairs.
    pub distribution: Vec<(f64, f64)>,
    /// Ions per m³, for SI output.
    pub number_density: Option<f64>,
    pub bmin_mt: f64,
    pub bmax_mt: f64,
    pub grid_n: usize,
    pub temperature: f64,
    pub kind: ResponseKind,
    /// Preparation field is stored in tesla.
    pub populations: PopulationsMode,
    pub probe_mt: f64,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            concentration_x: 0.0025,
            g_parallel: 19.0,
            hyperfine_a: 0.2945,
            distribution: DeltaDistribution::reference().components().to_vec(),
            number_density: None,
            bmin_mt: 0.0,
            bmax_mt: 200.0,
            grid_n: 2001,
            temperature: 2.1,
            kind: ResponseKind::Isolated,
            populations: PopulationsMode::Boltzmann,
            probe_mt: 0.0,
            data: None,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

const SCALAR_KEYS: &[&str] = &[
    "material.x",
    "material.g_parallel",
    "material.A_K",
    "material.number_density_m3",
    "grid.bmin_mT",
    "grid.bmax_mT",
    "grid.n",
    "run.T_K",
    "run.kind",
    "run.probe_mT",
    "populations.mode",
    "populations.prep_B_mT",
    "populations.prep_T_K",
    "io.data",
    "io.out",
];

/// Value with the line it came from.
type LineValue = Option<(usize, f64)>;

/// `distribution.delta3_K` → `(3, true)`, `distribution.weight3` → `(3, false)`.
fn distribution_key(key: &str) -> Option<(u32, bool)> {
    let rest = key.strip_prefix("distribution.")?;
    let (digits, is_delta) = if let Some(d) = rest
        .strip_prefix("delta")
        .and_then(|r| r.strip_suffix("_K"))
    {
        (d, true)
    } else {
        (rest.strip_prefix("weight")?, false)
    };
    let n: u32 = digits.parse().ok()?;
    (n >= 1 && !digits.starts_with('0')).then_some((n, is_delta))
}

fn number(value: &str) -> std::result::Result<f64, String> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{value}` is not a finite number")),
    }
}

fn positive(value: &str) -> std::result::Result<f64, String> {
    let v = number(value)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &c) in bytes.iter().enumerate() {
        if c == b'#' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

pub fn parse_config(path: &Path) -> Result<ParsedConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_config_str(&text, &path.display().to_string())
}

pub fn parse_config_str(text: &str, origin: &str) -> Result<ParsedConfig> {
    let err = |line: usize, reason: String| Error::Config {
        path: origin.to_string(),
        line,
        reason,
    };
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut warnings = Vec::new();
    let mut unknown: Vec<(usize, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(err(lineno, format!("expected `key = value`, got `{line}`")));
        };
        let (key, value) = (k.trim().to_string(), v.trim().to_string());
        if value.is_empty() {
            return Err(err(lineno, format!("`{key}` has no value")));
        }
        if !SCALAR_KEYS.contains(&key.as_str()) && distribution_key(&key).is_none() {
            unknown.push((lineno, key));
            continue;
        }
        if let Some((prev, _)) = entries.get(&key) {
            warnings.push(format!(
                "{origin}:{lineno}: `{key}` repeats line {prev}; the later value wins"
            ));
        } else {
            order.push(key.clone());
        }
        entries.insert(key, (lineno, value));
    }
    if let Some((first, _)) = unknown.first() {
        let list = unknown
            .iter()
            .map(|(l, k)| format!("`{k}` (line {l})"))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(err(*first, format!("unknown keys: {list}")));
    }

    let mut cfg = RunConfig::default();
    let mut dist: BTreeMap<u32, (LineValue, LineValue)> = BTreeMap::new();
    let mut mode: Option<(usize, String)> = None;
    let mut prep_b = 0.0;
    let mut prep_t: Option<f64> = None;
    for key in &order {
        let (line, value) = &entries[key];
        let line = *line;
        let at = |r: String| err(line, format!("`{key}`: {r}"));
        match key.as_str() {
            "material.x" => cfg.concentration_x = positive(value).map_err(at)?,
            "material.g_parallel" => cfg.g_parallel = positive(value).map_err(at)?,
            "material.A_K" => cfg.hyperfine_a = positive(value).map_err(at)?,
            "material.number_density_m3" => cfg.number_density = Some(positive(value).map_err(at)?),
            "grid.bmin_mT" => cfg.bmin_mt = number(value).map_err(at)?,
            "grid.bmax_mT" => cfg.bmax_mt = number(value).map_err(at)?,
            "grid.n" => {
                cfg.grid_n = value
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n >= 2)
                    .ok_or_else(|| at(format!("must be an integer >= 2, got `{value}`")))?
            }
            "run.T_K" => cfg.temperature = positive(value).map_err(at)?,
            "run.kind" => {
                cfg.kind = ResponseKind::parse(value)
                    .ok_or_else(|| at(format!("unknown response kind `{value}`")))?
            }
            "run.probe_mT" => {
                let v = number(value).map_err(at)?;
                if v < 0.0 {
                    return Err(at(format!("must be >= 0, got {v}")));
                }
                cfg.probe_mt = v;
            }
            "populations.mode" => mode = Some((line, value.clone())),
            "populations.prep_B_mT" => prep_b = mt_to_tesla(number(value).map_err(at)?),
            "populations.prep_T_K" => prep_t = Some(positive(value).map_err(at)?),
            "io.data" => cfg.data = Some(PathBuf::from(value)),
            "io.out" => cfg.out = Some(PathBuf::from(value)),
            _ => {
                let (n, is_delta) = distribution_key(key).expect("key was checked");
                let slot = dist.entry(n).or_default();
                if is_delta {
                    slot.0 = Some((line, positive(value).map_err(at)?));
                } else {
                    let w = number(value).map_err(at)?;
                    if !(0.0..=1.0).contains(&w) {
                        return Err(at(format!("weight must lie in [0, 1], got {w}")));
                    }
                    slot.1 = Some((line, w));
                }
            }
        }
    }

    if !dist.is_empty() {
        let mut comps = Vec::new();
        for (n, slot) in &dist {
            match slot {
                (Some((_, d)), Some((_, w))) => comps.push((*d, *w)),
                (Some((l, _)), None) => {
                    return Err(err(*l, format!("missing key `distribution.weight{n}`")))
                }
                (None, Some((l, _))) => {
                    return Err(err(*l, format!("missing key `distribution.delta{n}_K`")))
                }
                (None, None) => unreachable!(),
            }
        }
        let last_line = dist
            .values()
            .flat_map(|s| [s.0.map(|x| x.0), s.1.map(|x| x.0)])
            .flatten()
            .max()
            .unwrap_or(0);
        comps.sort_by(|a, b| a.0.total_cmp(&b.0));
        DeltaDistribution::new(comps.clone()).map_err(|e| err(last_line, e.to_string()))?;
        cfg.distribution = comps;
    }

    match mode {
        None => {}
        Some((_, m)) if m == "boltzmann" => cfg.populations = PopulationsMode::Boltzmann,
        Some((line, m)) if m == "frozen" => {
            let prep_temperature = prep_t.ok_or_else(|| {
                err(
                    line,
                    "frozen populations need `populations.prep_T_K`".into(),
                )
            })?;
            cfg.populations = PopulationsMode::Frozen {
                prep_field: prep_b,
                prep_temperature,
            };
        }
        Some((line, m)) => {
            return Err(err(
                line,
                format!("`populations.mode`: expected `boltzmann` or `frozen`, got `{m}`"),
            ))
        }
    }

    cfg.validate().map_err(|e| {
        let line = match &e {
            Error::InvalidParameter { name, .. } => entries.get(*name).map(|x| x.0).unwrap_or(0),
            _ => 0,
        };
        err(line, e.to_string())
    })?;
    Ok(ParsedConfig {
        config: cfg,
        warnings,
    })
}

impl RunConfig {
    /// Cross-field checks; errors name the configuration key at fault.
    pub fn validate(&self) -> Result<()> {
        let bad =
            |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.bmin_mt < self.bmax_mt) {
            return bad(
                "grid.bmax_mT",
                format!(
                    "must exceed grid.bmin_mT ({} >= {})",
                    self.bmin_mt, self.bmax_mt
                ),
            );
        }
        if self.grid_n < 2 {
            return bad("grid.n", format!("must be >= 2, got {}", self.grid_n));
        }
        if !(self.temperature > 0.0) {
            return bad("run.T_K", format!("must be > 0, got {}", self.temperature));
        }
        if !(self.probe_mt >= 0.0 && self.probe_mt.is_finite()) {
            return bad(
                "run.probe_mT",
                format!("must be >= 0, got {}", self.probe_mt),
            );
        }
        for (name, v) in [
            ("material.x", self.concentration_x),
            ("material.g_parallel", self.g_parallel),
            ("material.A_K", self.hyperfine_a),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(name, format!("must be > 0, got {v}"));
            }
        }
        if self.concentration_x > 2.0 {
            return bad(
                "material.x",
                format!("must be <= 2, got {}", self.concentration_x),
            );
        }
        if let PopulationsMode::Frozen {
            prep_temperature, ..
        } = self.populations
        {
            if !(prep_temperature > 0.0) {
                return bad(
                    "populations.prep_T_K",
                    format!("must be > 0, got {prep_temperature}"),
                );
            }
        }
        DeltaDistribution::new(self.distribution.clone()).map(|_| ())
    }

    pub fn material(&self) -> Result<Material> {
        let mut m = spin_ice_material(
            self.concentration_x,
            self.g_parallel,
            self.hyperfine_a,
            DeltaDistribution::new(self.distribution.clone())?,
        )?;
        m.number_density = self.number_density;
        Ok(m)
    }

    /// Field grid in tesla.
    pub fn grid(&self) -> Vec<f64> {
        linear_grid(
            mt_to_tesla(self.bmin_mt),
            mt_to_tesla(self.bmax_mt),
            self.grid_n,
        )
    }

    pub fn spectrum_request(&self) -> SpectrumRequest {
        SpectrumRequest {
            kind: self.kind,
            temperature: self.temperature,
            populations: self.populations,
            probe_amplitude: mt_to_tesla(self.probe_mt),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = "\
# reference sample
material.x = 0.0025
material.g_parallel = 19.0
material.A_K = 0.2945   # refined
distribution.delta1_K = 0.015
distribution.weight1 = 0.511
distribution.delta2_K = 0.1
distribution.weight2 = 0.352
run.T_K = 2.1
run.probe_mT = 0.2
";

    #[test]
    fn reference_config_parses() {
        let p = parse_config_str(REFERENCE, "ref.cfg").unwrap();
        assert_eq!(p.config.hyperfine_a, 0.2945);
        assert_eq!(p.config.distribution, vec![(0.015, 0.511), (0.1, 0.352)]);
        assert_eq!(p.config.probe_mt, 0.2);
        assert!(p.warnings.is_empty());
        assert!(p.config.material().is_ok());
    }

    #[test]
    fn negative_temperature_names_key_and_line() {
        let e = parse_config_str("material.x = 0.01\nrun.T_K = -1\n", "c").unwrap_err();
        match e {
            Error::Config { line, reason, .. } => {
                assert_eq!(line, 2);
                assert!(reason.contains("run.T_K"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_key_last_wins_with_warning() {
        let p = parse_config_str("run.T_K = 1\nrun.T_K = 3\n", "c").unwrap();
        assert_eq!(p.config.temperature, 3.0);
        assert_eq!(p.warnings.len(), 1);
        assert!(p.warnings[0].contains("run.T_K"));
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let e = parse_config_str("run.T_K = 1\nrun.temp = 2\nfoo = 3\n", "c").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("run.temp") && msg.contains("foo"), "{msg}");
        assert!(matches!(e, Error::Config { line: 2, .. }));
    }

    #[test]
    fn half_specified_component_is_an_error() {
        let e = parse_config_str("distribution.delta1_K = 0.01\n", "c").unwrap_err();
        assert!(e.to_string().contains("distribution.weight1"));
    }

    #[test]
    fn inverted_grid_is_rejected_at_its_key() {
        let e = parse_config_str("grid.bmin_mT = 10\ngrid.bmax_mT = 5\n", "c").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }), "{e:?}");
    }

    #[test]
    fn frozen_mode_reads_preparation_point() {
        let p = parse_config_str(
            "populations.mode = frozen\npopulations.prep_B_mT = 0\npopulations.prep_T_K = 0.076\n",
            "c",
        )
        .unwrap();
        assert_eq!(
            p.config.populations,
            PopulationsMode::Frozen {
                prep_field: 0.0,
                prep_temperature: 0.076
            }
        );
        assert!(parse_config_str("populations.mode = frozen\n", "c").is_err());
    }

    #[test]
    fn missing_equals_sign() {
        assert!(matches!(
            parse_config_str("run.T_K 2\n", "c"),
            Err(Error::Config { line: 1, .. })
        ));
    }
}
