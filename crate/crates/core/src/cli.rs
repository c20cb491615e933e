//! Command-line front end.
//!
//! Parameter precedence: command-line flag, then `--config` file, then the
//! built-in reference sample. Tables go to `--out` (relative paths resolved
//! against `HYPERCHI_OUT_DIR` when set) or to stdout; diagnostics go to stderr.
//!
//! Exit codes: 0 success, 1 computation or fit failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::fitting::{
    detect_peaks, fit_curie, fit_hyperfine_a, fit_weights, infer_populations, HeightScale, PeakSet,
    WeightFitOptions,
};
use crate::io::{
    format_float, parse_config, read_curie_data, read_spectrum, render_table, units_tag, RunConfig,
    Table,
};
use crate::material::{
    component_values, from_si, to_si, total_spectrum, Material, PopulationsMode, SpectrumRequest,
};
use crate::response::{plateau_model, CurveUnits, ResponseCurve, ResponseKind};
use crate::spinmodel::{levels, Branch};
use crate::units::{mt_to_tesla, tesla_to_mt};
use crate::{Error, Result};

/// Environment variable naming a directory for relative `--out` paths.
pub const OUT_DIR_ENV: &str = "HYPERCHI_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "hyperchi",
    version,
    about = "Susceptibilities of hyperfine-coupled Ising ions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Energies of all hyperfine levels of the apical species against field.
    Levels(Common),
    /// One susceptibility of the whole sample against field.
    Chi {
        #[command(flatten)]
        common: Common,
        /// Convert to SI volume susceptibility (needs a number density).
        #[arg(long)]
        si: bool,
    },
    /// Total spectrum with the contribution of each gap component.
    Spectrum(Common),
    /// Frequency dependence between the isothermal, adiabatic and isolated plateaus.
    Plateau {
        #[command(flatten)]
        common: Common,
        #[arg(long = "field-mT", default_value_t = 0.0, allow_hyphen_values = true)]
        field_mt: f64,
        /// Spin-lattice relaxation time, s.
        #[arg(long, default_value_t = 1.0)]
        tau1: f64,
        /// Internal (spin-spin) relaxation time, s.
        #[arg(long, default_value_t = 1e-4)]
        tau2: f64,
        #[arg(long = "omega-min", default_value_t = 1e-3)]
        omega_min: f64,
        #[arg(long = "omega-max", default_value_t = 1e7)]
        omega_max: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Locate peaks in a measured spectrum and refine the hyperfine constant.
    FitPeaks {
        #[command(flatten)]
        common: Common,
        /// Minimum prominence as a fraction of the spectrum maximum.
        #[arg(long, default_value_t = 0.05)]
        prominence: f64,
    },
    /// Fit the weights of the gap components to a measured spectrum.
    FitWeights {
        #[command(flatten)]
        common: Common,
        /// Fit a free overall scale (data in arbitrary units).
        #[arg(long = "fit-scale")]
        fit_scale: bool,
    },
    /// Fit chi(T) = C/T + chi0 and report g.
    FitCurie(Common),
    /// Infer per-crossing populations and an effective temperature.
    Populations {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.05)]
        prominence: f64,
        /// Heights carry an unknown common factor.
        #[arg(long)]
        relative: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Magnetic ions per formula unit.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    /// Longitudinal g-factor.
    #[arg(long, allow_hyphen_values = true)]
    g: Option<f64>,
    /// Hyperfine constant, K.
    #[arg(long = "A", allow_hyphen_values = true)]
    a: Option<f64>,
    /// Gap(s), K, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    delta: Vec<f64>,
    /// Weights matching `--delta`; a single gap defaults to weight 1.
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    /// Ions per m^3.
    #[arg(long = "number-density")]
    number_density: Option<f64>,
    #[arg(long = "bmin-mT", allow_hyphen_values = true)]
    bmin_mt: Option<f64>,
    #[arg(long = "bmax-mT", allow_hyphen_values = true)]
    bmax_mt: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    n: Option<usize>,
    /// Temperature, K.
    #[arg(long = "T", allow_hyphen_values = true)]
    t: Option<f64>,
    /// isothermal, adiabatic, isolated, isolated_kubo or isolated_finite_amplitude.
    #[arg(long)]
    kind: Option<String>,
    /// Probe amplitude, mT.
    #[arg(long = "probe-mT", allow_hyphen_values = true)]
    probe_mt: Option<f64>,
    /// boltzmann or frozen.
    #[arg(long)]
    populations: Option<String>,
    #[arg(long = "prep-B-mT", allow_hyphen_values = true)]
    prep_b_mt: Option<f64>,
    #[arg(long = "prep-T", allow_hyphen_values = true)]
    prep_t: Option<f64>,
    /// Input data file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Usage problems map to exit code 2.
fn usage(reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: "command line",
        reason: reason.into(),
    }
}

impl Common {
    fn resolve(&self, warn: &mut dyn Write) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let parsed = parse_config(path)?;
                for w in &parsed.warnings {
                    let _ = writeln!(warn, "warning: {w}");
                }
                parsed.config
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.x {
            cfg.concentration_x = v;
        }
        if let Some(v) = self.g {
            cfg.g_parallel = v;
        }
        if let Some(v) = self.a {
            cfg.hyperfine_a = v;
        }
        match (self.delta.len(), self.weights.len()) {
            (0, 0) => {}
            (0, _) => return Err(usage("--weights needs --delta")),
            (1, 0) => cfg.distribution = vec![(self.delta[0], 1.0)],
            (d, w) if d == w => {
                cfg.distribution = self
                    .delta
                    .iter()
                    .copied()
                    .zip(self.weights.iter().copied())
                    .collect()
            }
            (d, w) => return Err(usage(format!("{d} gaps but {w} weights"))),
        }
        if let Some(v) = self.number_density {
            cfg.number_density = Some(v);
        }
        if let Some(v) = self.bmin_mt {
            cfg.bmin_mt = v;
        }
        if let Some(v) = self.bmax_mt {
            cfg.bmax_mt = v;
        }
        if let Some(v) = self.n {
            cfg.grid_n = v;
        }
        if let Some(v) = self.t {
            cfg.temperature = v;
        }
        if let Some(k) = &self.kind {
            cfg.kind =
                ResponseKind::parse(k).ok_or_else(|| usage(format!("unknown --kind `{k}`")))?;
        }
        if let Some(v) = self.probe_mt {
            cfg.probe_mt = v;
        }
        let (prev_b, prev_t) = match cfg.populations {
            PopulationsMode::Frozen {
                prep_field,
                prep_temperature,
            } => (prep_field, Some(prep_temperature)),
            PopulationsMode::Boltzmann => (0.0, None),
        };
        let mode = self
            .populations
            .as_deref()
            .unwrap_or(match cfg.populations {
                PopulationsMode::Boltzmann => "boltzmann",
                PopulationsMode::Frozen { .. } => "frozen",
            });
        cfg.populations = match mode {
            "boltzmann" => PopulationsMode::Boltzmann,
            "frozen" => PopulationsMode::Frozen {
                prep_field: self.prep_b_mt.map(mt_to_tesla).unwrap_or(prev_b),
                prep_temperature: self
                    .prep_t
                    .or(prev_t)
                    .ok_or_else(|| usage("frozen populations need --prep-T"))?,
            },
            other => return Err(usage(format!("unknown --populations `{other}`"))),
        };
        if let Some(p) = &self.data {
            cfg.data = Some(p.clone());
        }
        if let Some(p) = &self.out {
            cfg.out = Some(p.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn provenance(command: &str, cfg: &RunConfig) -> Vec<(String, String)> {
    let mut p = vec![
        ("command".to_string(), command.to_string()),
        ("material.x".into(), format_float(cfg.concentration_x)),
        ("material.g_parallel".into(), format_float(cfg.g_parallel)),
        ("material.A_K".into(), format_float(cfg.hyperfine_a)),
    ];
    for (k, (d, w)) in cfg.distribution.iter().enumerate() {
        p.push((format!("distribution.delta{}_K", k + 1), format_float(*d)));
        p.push((format!("distribution.weight{}", k + 1), format_float(*w)));
    }
    p.push(("run.T_K".into(), format_float(cfg.temperature)));
    p.push(("run.probe_mT".into(), format_float(cfg.probe_mt)));
    p.push(("populations".into(), cfg.populations.describe()));
    p
}

struct Context<'a> {
    out_dir: Option<PathBuf>,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Context<'_> {
    fn emit(&mut self, table: &Table, out: Option<&Path>) -> Result<()> {
        let text = render_table(table);
        match out {
            Some(path) => {
                let path = match &self.out_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.to_path_buf(),
                };
                std::fs::write(&path, text).map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                })
            }
            None => self
                .stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::Io {
                    path: "stdout".into(),
                    reason: e.to_string(),
                }),
        }
    }

    fn print(&mut self, text: &str) -> Result<()> {
        writeln!(self.stdout, "{text}").map_err(|e| Error::Io {
            path: "stdout".into(),
            reason: e.to_string(),
        })
    }

    fn warn(&mut self, text: &str) {
        let _ = writeln!(self.stderr, "warning: {text}");
    }
}

fn data_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.data
        .as_deref()
        .ok_or_else(|| usage("this command needs --data"))
}

/// Measured spectrum in per-ion units when the file declares them.
fn load_spectrum(cfg: &RunConfig) -> Result<ResponseCurve> {
    let curve = read_spectrum(data_path(cfg)?)?.to_curve()?;
    match curve.units {
        CurveUnits::Si { .. } => from_si(&curve),
        _ => Ok(curve),
    }
}

fn cmd_levels(ctx: &mut Context, cfg: &RunConfig) -> Result<()> {
    let material = cfg.material()?;
    let species = &material.groups[0];
    let mut header = vec!["B_mT".to_string()];
    for label in species.labels() {
        let branch = match label.branch {
            Branch::Upper => "upper",
            Branch::Lower => "lower",
        };
        header.push(format!("E_{}_{branch}_K", label.m_i));
    }
    let mut rows = Vec::with_capacity(cfg.grid_n);
    for b in cfg.grid() {
        let mut row = vec![tesla_to_mt(b)];
        row.extend(levels(species, b)?.iter().map(|l| l.energy));
        rows.push(row);
    }
    let mut prov = provenance("levels", cfg);
    prov.push(("species".into(), "apical".into()));
    ctx.emit(
        &Table {
            provenance: prov,
            header,
            rows,
        },
        cfg.out.as_deref(),
    )
}

fn cmd_chi(ctx: &mut Context, cfg: &RunConfig, si: bool) -> Result<()> {
    let material = cfg.material()?;
    let mut curve = total_spectrum(&material, &cfg.grid(), &cfg.spectrum_request())?;
    if si {
        let n = cfg
            .number_density
            .ok_or_else(|| usage("--si needs --number-density or material.number_density_m3"))?;
        curve = to_si(&curve, n)?;
    }
    let mut prov = provenance("chi", cfg);
    prov.insert(1, ("kind".into(), curve.kind.name().into()));
    prov.insert(2, ("units".into(), units_tag(&curve.units)));
    ctx.emit(
        &Table {
            provenance: prov,
            header: vec!["B_mT".into(), "chi_real".into()],
            rows: curve
                .points()
                .map(|(b, v)| vec![tesla_to_mt(b), v])
                .collect(),
        },
        cfg.out.as_deref(),
    )
}

fn cmd_spectrum(ctx: &mut Context, cfg: &RunConfig) -> Result<()> {
    let material = cfg.material()?;
    let grid = cfg.grid();
    let req = cfg.spectrum_request();
    let total = total_spectrum(&material, &grid, &req)?;
    let mut header = vec!["B_mT".to_string(), "chi_total".to_string()];
    let mut columns = Vec::new();
    for &(delta, weight) in material.distribution.components() {
        header.push(format!("chi_delta_{}K", format_float(delta)));
        let values = component_values(&material, delta, &grid, &req)?;
        columns.push(values.into_iter().map(|v| weight * v).collect::<Vec<f64>>());
    }
    let rows = total
        .points()
        .enumerate()
        .map(|(i, (b, v))| {
            let mut row = vec![tesla_to_mt(b), v];
            row.extend(columns.iter().map(|c| c[i]));
            row
        })
        .collect();
    let mut prov = provenance("spectrum", cfg);
    prov.insert(1, ("kind".into(), total.kind.name().into()));
    prov.insert(2, ("units".into(), units_tag(&total.units)));
    ctx.emit(
        &Table {
            provenance: prov,
            header,
            rows,
        },
        cfg.out.as_deref(),
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_plateau(
    ctx: &mut Context,
    cfg: &RunConfig,
    field_mt: f64,
    tau1: f64,
    tau2: f64,
    omega_min: f64,
    omega_max: f64,
    points: usize,
) -> Result<()> {
    if !(omega_min > 0.0 && omega_max > omega_min && points >= 2) {
        return Err(usage("need 0 < omega-min < omega-max and points >= 2"));
    }
    let material = cfg.material()?;
    let field = [mt_to_tesla(field_mt)];
    let plateau = |kind| -> Result<f64> {
        let req = SpectrumRequest {
            kind,
            ..SpectrumRequest::isolated(cfg.temperature)
        };
        Ok(total_spectrum(&material, &field, &req)?.values()[0])
    };
    let chi_t = plateau(ResponseKind::Isothermal)?;
    let chi_s = plateau(ResponseKind::Adiabatic)?;
    let chi_i = plateau(ResponseKind::Isolated)?;
    let (lo, hi) = (omega_min.ln(), omega_max.ln());
    let mut rows = Vec::with_capacity(points);
    for k in 0..points {
        let omega = (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp();
        let chi = plateau_model(chi_t, chi_s, chi_i, tau1, tau2, omega)?;
        rows.push(vec![omega, chi.re, chi.im]);
    }
    let mut prov = provenance("plateau", cfg);
    prov.extend([
        ("field_mT".to_string(), format_float(field_mt)),
        ("tau1_s".into(), format_float(tau1)),
        ("tau2_s".into(), format_float(tau2)),
        ("chi_T".into(), format_float(chi_t)),
        ("chi_S".into(), format_float(chi_s)),
        ("chi_I".into(), format_float(chi_i)),
        ("units".into(), "per_ion".into()),
    ]);
    ctx.emit(
        &Table {
            provenance: prov,
            header: vec!["omega_rad_s".into(), "chi_real".into(), "chi_imag".into()],
            rows,
        },
        cfg.out.as_deref(),
    )
}

fn peaks_table(peaks: &PeakSet, cfg: &RunConfig, command: &str) -> Table {
    Table {
        provenance: provenance(command, cfg),
        header: vec!["B_mT".into(), "height".into(), "width_mT".into()],
        rows: peaks
            .iter()
            .map(|p| {
                vec![
                    tesla_to_mt(p.field),
                    p.height,
                    tesla_to_mt(p.width_estimate),
                ]
            })
            .collect(),
    }
}

fn cmd_fit_peaks(ctx: &mut Context, cfg: &RunConfig, prominence: f64) -> Result<()> {
    let curve = load_spectrum(cfg)?;
    let peaks = detect_peaks(&curve, prominence)?;
    let material = cfg.material()?;
    let apical = &material.groups[0];
    if let Some(out) = cfg.out.as_deref() {
        ctx.emit(&peaks_table(&peaks, cfg, "fit-peaks"), Some(out))?;
    } else {
        for p in peaks.iter() {
            ctx.print(&format!(
                "peak B_mT = {} height = {} width_mT = {}",
                format_float(tesla_to_mt(p.field)),
                format_float(p.height),
                format_float(tesla_to_mt(p.width_estimate))
            ))?;
        }
    }
    let fit = fit_hyperfine_a(
        &peaks,
        apical.moment_mu,
        apical.projection,
        apical.nuclear_i,
    )?;
    for w in &fit.result.warnings {
        ctx.warn(w);
    }
    ctx.print(&fit.result.to_string())
}

fn cmd_fit_weights(ctx: &mut Context, cfg: &RunConfig, fit_scale: bool) -> Result<()> {
    let data = load_spectrum(cfg)?;
    if data.units == CurveUnits::Arbitrary && !fit_scale {
        ctx.warn("data carry no units declaration; treating them as mu_B/T per ion (use --fit-scale otherwise)");
    }
    let material: Material = cfg.material()?;
    let opts = WeightFitOptions {
        temperature: cfg.temperature,
        probe_amplitude: mt_to_tesla(cfg.probe_mt),
        fit_scale,
    };
    let fit = fit_weights(&data, &material, &opts)?;
    for w in &fit.warnings {
        ctx.warn(w);
    }
    ctx.print(&fit.to_string())
}

fn cmd_fit_curie(ctx: &mut Context, cfg: &RunConfig) -> Result<()> {
    let data = read_curie_data(data_path(cfg)?)?;
    let fit = fit_curie(&data, cfg.concentration_x)?;
    for w in &fit.result.warnings {
        ctx.warn(w);
    }
    ctx.print(&fit.result.to_string())
}

fn cmd_populations(
    ctx: &mut Context,
    cfg: &RunConfig,
    prominence: f64,
    relative: bool,
) -> Result<()> {
    let curve = load_spectrum(cfg)?;
    let peaks = detect_peaks(&curve, prominence)?.positive_side();
    let material = cfg.material()?;
    let mode = if relative {
        HeightScale::Relative
    } else {
        HeightScale::Absolute
    };
    let inf = infer_populations(&peaks, &material, mode)?;
    for w in &inf.warnings {
        ctx.warn(w);
    }
    let mut prov = provenance("populations", cfg);
    prov.extend([
        (
            "effective_T_K".to_string(),
            format_float(inf.effective_temperature),
        ),
        (
            "effective_T_std_error_K".into(),
            format_float(inf.temperature_std_error),
        ),
        (
            "rms_log_residual".into(),
            format_float(inf.rms_log_residual),
        ),
        (
            "ordering_violation".into(),
            inf.ordering_violation.to_string(),
        ),
    ]);
    let table = Table {
        provenance: prov,
        header: vec![
            "m_I".into(),
            "crossing_mT".into(),
            "height".into(),
            "population_difference".into(),
            "model_height".into(),
        ],
        rows: inf
            .channels
            .iter()
            .map(|c| {
                vec![
                    c.m_i.value(),
                    tesla_to_mt(c.crossing_field),
                    c.height,
                    c.population_difference,
                    c.model_height,
                ]
            })
            .collect(),
    };
    ctx.emit(&table, cfg.out.as_deref())?;
    if cfg.out.is_some() {
        ctx.print(&format!(
            "effective_T_K = {} +/- {}\nordering_violation = {}",
            format_float(inf.effective_temperature),
            format_float(inf.temperature_std_error),
            inf.ordering_violation
        ))?;
    }
    Ok(())
}

fn dispatch(ctx: &mut Context, command: Command) -> Result<()> {
    let resolve = |c: &Common, ctx: &mut Context| c.resolve(ctx.stderr);
    match command {
        Command::Levels(c) => {
            let cfg = resolve(&c, ctx)?;
            cmd_levels(ctx, &cfg)
        }
        Command::Chi { common, si } => {
            let cfg = resolve(&common, ctx)?;
            cmd_chi(ctx, &cfg, si)
        }
        Command::Spectrum(c) => {
            let cfg = resolve(&c, ctx)?;
            cmd_spectrum(ctx, &cfg)
        }
        Command::Plateau {
            common,
            field_mt,
            tau1,
            tau2,
            omega_min,
            omega_max,
            points,
        } => {
            let cfg = resolve(&common, ctx)?;
            cmd_plateau(
                ctx, &cfg, field_mt, tau1, tau2, omega_min, omega_max, points,
            )
        }
        Command::FitPeaks { common, prominence } => {
            let cfg = resolve(&common, ctx)?;
            cmd_fit_peaks(ctx, &cfg, prominence)
        }
        Command::FitWeights { common, fit_scale } => {
            let cfg = resolve(&common, ctx)?;
            cmd_fit_weights(ctx, &cfg, fit_scale)
        }
        Command::FitCurie(c) => {
            let cfg = resolve(&c, ctx)?;
            cmd_fit_curie(ctx, &cfg)
        }
        Command::Populations {
            common,
            prominence,
            relative,
        } => {
            let cfg = resolve(&common, ctx)?;
            cmd_populations(ctx, &cfg, prominence, relative)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidParameter { .. } => 2,
        _ => 1,
    }
}

/// Runs one command and returns the process exit code.
pub fn run_with<I, T>(
    args: I,
    out_dir: Option<PathBuf>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                2
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let mut ctx = Context {
        out_dir,
        stdout,
        stderr,
    };
    match dispatch(&mut ctx, cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(ctx.stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point for the binary: process arguments, real streams and
/// [`OUT_DIR_ENV`].
pub fn run() -> i32 {
    let out_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(
        std::env::args_os(),
        out_dir,
        &mut stdout.lock(),
        &mut stderr.lock(),
    )
}
