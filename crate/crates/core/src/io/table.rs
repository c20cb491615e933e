//! Comma-separated numeric tables with `#` comment lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::response::{CurveMetadata, CurveUnits, ResponseCurve, ResponseKind};
use crate::units::{mt_to_tesla, tesla_to_mt};
use crate::{Error, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// A numeric table plus the `# key: value` lines written above it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub provenance: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn render_table(table: &Table) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# provenance: hyperchi {}", env!("CARGO_PKG_VERSION"));
    for (k, v) in &table.provenance {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out.push_str(&table.header.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    fs::write(path, render_table(table)).map_err(|e| Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Value of the `# units:` line for a curve.
pub fn units_tag(units: &CurveUnits) -> String {
    match units {
        CurveUnits::PerIon => "per_ion".into(),
        CurveUnits::Si { number_density } => format!("si n={}", format_float(*number_density)),
        CurveUnits::Arbitrary => "arbitrary".into(),
    }
}

fn parse_units_tag(s: &str) -> Option<CurveUnits> {
    let s = s.trim();
    match s {
        "per_ion" => Some(CurveUnits::PerIon),
        "arbitrary" => Some(CurveUnits::Arbitrary),
        _ => {
            let n = s.strip_prefix("si n=")?.trim().parse().ok()?;
            Some(CurveUnits::Si { number_density: n })
        }
    }
}

/// Writes `B_mT,chi_real` with a provenance block built from the curve
/// metadata followed by `extra`.
pub fn write_curve(curve: &ResponseCurve, path: &Path, extra: &[(String, String)]) -> Result<()> {
    let md = &curve.metadata;
    let mut provenance = vec![
        ("kind".to_string(), curve.kind.name().to_string()),
        ("units".to_string(), units_tag(&curve.units)),
    ];
    if !md.species.is_empty() {
        provenance.push(("material".into(), md.species.clone()));
    }
    if let Some(t) = md.temperature {
        provenance.push(("temperature_K".into(), format_float(t)));
    }
    if !md.populations.is_empty() {
        provenance.push(("populations".into(), md.populations.clone()));
    }
    provenance.push(("probe_mT".into(), format_float(md.probe_amplitude_mt)));
    provenance.extend(extra.iter().cloned());
    let table = Table {
        provenance,
        header: vec!["B_mT".into(), "chi_real".into()],
        rows: curve
            .points()
            .map(|(b, v)| vec![tesla_to_mt(b), v])
            .collect(),
    };
    write_table(path, &table)
}

/// Measured `χ(B)` as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFile {
    pub fields_mt: Vec<f64>,
    pub chi_real: Vec<f64>,
    pub chi_imag: Option<Vec<f64>>,
    /// From a `# units:` line; arbitrary when absent.
    pub units: CurveUnits,
    pub comments: Vec<String>,
}

impl SpectrumFile {
    /// Real part as a curve in tesla, sorted by field.
    pub fn to_curve(&self) -> Result<ResponseCurve> {
        let mut pts: Vec<(f64, f64)> = self
            .fields_mt
            .iter()
            .zip(&self.chi_real)
            .map(|(&b, &c)| (mt_to_tesla(b), c))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        ResponseCurve::new(
            pts.iter().map(|p| p.0).collect(),
            pts.iter().map(|p| p.1).collect(),
            ResponseKind::Isolated,
            self.units,
            CurveMetadata::default(),
        )
    }
}

struct RawTable {
    comments: Vec<String>,
    columns: Vec<Vec<f64>>,
    /// 1-based file line of each data row.
    lines: Vec<usize>,
}

/// Parses a table whose header must start with `required` and may continue
/// with a prefix of `optional`.
fn parse_table(text: &str, origin: &str, required: &[&str], optional: &[&str]) -> Result<RawTable> {
    let err = |line: usize, reason: String| Error::Csv {
        path: origin.to_string(),
        line,
        reason,
    };
    let mut comments = Vec::new();
    let mut header: Option<Vec<String>> = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        match &header {
            None => {
                let n_req = required.len();
                let ok = cells.len() >= n_req
                    && cells.len() <= n_req + optional.len()
                    && cells[..n_req] == *required
                    && cells[n_req..] == optional[..cells.len() - n_req];
                if !ok {
                    let mut expected = required.join(",");
                    if !optional.is_empty() {
                        expected.push_str(&format!("[,{}]", optional.join(",")));
                    }
                    return Err(err(
                        lineno,
                        format!("header must be `{expected}`, got `{line}`"),
                    ));
                }
                columns = vec![Vec::new(); cells.len()];
                header = Some(cells.iter().map(|s| s.to_string()).collect());
            }
            Some(h) => {
                if cells.len() != h.len() {
                    return Err(err(
                        lineno,
                        format!("expected {} cells, found {}", h.len(), cells.len()),
                    ));
                }
                for (col, (cell, name)) in cells.iter().zip(h).enumerate() {
                    let v: f64 = cell.parse().map_err(|_| {
                        err(
                            lineno,
                            format!("column {} ({name}): `{cell}` is not a number", col + 1),
                        )
                    })?;
                    if !v.is_finite() {
                        return Err(err(
                            lineno,
                            format!("column {} ({name}): value is not finite", col + 1),
                        ));
                    }
                    columns[col].push(v);
                }
                lines.push(lineno);
            }
        }
    }
    if header.is_none() || lines.is_empty() {
        return Err(err(text.lines().count().max(1), "no data rows".into()));
    }
    Ok(RawTable {
        comments,
        columns,
        lines,
    })
}

pub fn parse_spectrum(text: &str, origin: &str) -> Result<SpectrumFile> {
    let mut t = parse_table(text, origin, &["B_mT", "chi_real"], &["chi_imag"])?;
    let b = &t.columns[0];
    if b.len() >= 2 {
        let increasing = b[1] > b[0];
        let bad = b.windows(2).position(|w| {
            if increasing {
                !(w[1] > w[0])
            } else {
                !(w[1] < w[0])
            }
        });
        if let Some(k) = bad {
            return Err(Error::Csv {
                path: origin.to_string(),
                line: t.lines[k + 1],
                reason: format!(
                    "field column not strictly monotone at data row {} ({} after {})",
                    k + 2,
                    b[k + 1],
                    b[k]
                ),
            });
        }
    }
    let units = t
        .comments
        .iter()
        .find_map(|c| c.strip_prefix("units:").and_then(parse_units_tag))
        .unwrap_or(CurveUnits::Arbitrary);
    let chi_imag = (t.columns.len() == 3).then(|| t.columns.pop().unwrap_or_default());
    let chi_real = t.columns.pop().unwrap_or_default();
    let fields_mt = t.columns.pop().unwrap_or_default();
    Ok(SpectrumFile {
        fields_mt,
        chi_real,
        chi_imag,
        units,
        comments: t.comments,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn read_spectrum(path: &Path) -> Result<SpectrumFile> {
    parse_spectrum(&read_text(path)?, &path.display().to_string())
}

/// `(T in K, χ)` pairs from a file with header `T_K,chi`.
pub fn read_curie_data(path: &Path) -> Result<Vec<(f64, f64)>> {
    let t = parse_table(
        &read_text(path)?,
        &path.display().to_string(),
        &["T_K", "chi"],
        &[],
    )?;
    Ok(t.columns[0]
        .iter()
        .copied()
        .zip(t.columns[1].iter().copied())
        .collect())
}
