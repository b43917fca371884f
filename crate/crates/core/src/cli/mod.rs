//! Command-line driver. Each subcommand writes one table; see `--help`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or usage error,
//! 3 classical validity guard violated, 4 no cooling (no stationary state),
//! 5 mode-backend check failed.

pub mod config;
pub mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analytic::{friction_profile, max_friction_position, temperature_profile, CoolingCoefficients};
use crate::classical::{classical_force, ClassicalParticle, MirrorChannel};
use crate::ensemble::{fit_steady_state_with, rate_scan, RunOptions};
use crate::error::Error;
use crate::modes::{delay_response, extract_friction, CONVERGENCE_TOLERANCE};
use config::{ConfigError, Format, RunConfig};
use output::{Field, Report};

/// Largest accepted |γ_eff/γ_analytic − 1| in `validate-modes`.
pub const MODES_FRICTION_TOLERANCE: f64 = 0.25;

#[derive(Debug, Parser)]
#[command(name = "mirror-cool", version, about = "Mirror-mediated cooling of a polarizable particle (SI units throughout)")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file with [species], [beam], [trap], [dynamics],
    /// [ensemble], [modes], [classical] and [run] sections.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set trap.frequency=7.5e5` (Hz). Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output format: csv or ndjson [default: run.format, else csv].
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// Output file [default: run.output, else stdout].
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Master RNG seed (integer) [default: run.seed].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for ensemble runs (count) [default: all cores].
    #[arg(long, env = "MIRROR_COOL_WORKERS", global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// γ/m (1/s) and pump intensity versus node-relative position.
    FrictionProfile {
        /// Centre of the scan relative to the node, m.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x_center: f64,
        /// Scan width, m [default: one wavelength].
        #[arg(long)]
        span: Option<f64>,
        /// Number of points (>= 2).
        #[arg(long, default_value_t = 401)]
        n: usize,
    },
    /// Stationary temperature (K) versus trap position for several mirror distances.
    TemperatureProfile {
        /// Mirror distances, m (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
        x: Vec<f64>,
        /// Smallest node-relative offset, m [default: -λ/4].
        #[arg(long, allow_hyphen_values = true)]
        offset_min: Option<f64>,
        /// Largest node-relative offset, m [default: +λ/4].
        #[arg(long, allow_hyphen_values = true)]
        offset_max: Option<f64>,
        /// Offsets per curve (>= 2).
        #[arg(long, default_value_t = 201)]
        n: usize,
        /// Apply the trapped-particle turning-point factor (dimensionless 0.64).
        #[arg(long)]
        trapped: bool,
    },
    /// Dipole, binding and cooling force terms (N) of the classical particle.
    ClassicalForce {
        /// First mirror distance, m.
        #[arg(long, default_value_t = 1.0)]
        x_start: f64,
        /// Last mirror distance, m [default: x_start + λ/2].
        #[arg(long)]
        x_stop: Option<f64>,
        /// Number of points (>= 2).
        #[arg(long, default_value_t = 101)]
        n: usize,
        /// Particle velocity, m/s [default: classical.velocity].
        #[arg(long, allow_hyphen_values = true)]
        velocity: Option<f64>,
        /// Polarizability, dimensionless [default: classical.alpha].
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
    },
    /// Initial dT/dt (K/s) versus T₀ (K) from Langevin ensembles, and the
    /// steady-state temperature T* (K) from a linear fit.
    Coolrate {
        /// Initial temperatures, K (comma separated) [default: ensemble.temperatures].
        #[arg(long, value_delimiter = ',')]
        t0: Option<Vec<f64>>,
    },
    /// Checks the discretized-mode backend against the closed-form friction
    /// (kg/s), the delay timing (s) and convergence in the mode count.
    ValidateModes,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Model(Error),
    Io(io::Error),
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Check(_) => 5,
            CliError::Model(e) => match e {
                Error::InvalidParameter { .. } | Error::InsufficientSamples { .. } => 2,
                Error::OutOfValidity { .. } => 3,
                Error::NoCooling { .. } | Error::NoStationaryState { .. } => 4,
                Error::NotConverged { .. } => 5,
                Error::HistoryUnderrun { .. } => 1,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e}"),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Check(e) => write!(f, "check failed: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

pub fn load_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let text = match &global.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::parse(&text, &global.overrides)?;
    if let Some(seed) = global.seed {
        cfg.run.seed = seed;
    }
    if let Some(format) = global.format {
        cfg.run.format = format;
    }
    if let Some(out) = &global.output {
        cfg.run.output = Some(out.display().to_string());
    }
    Ok(cfg)
}

fn echo_config(report: &mut Report, cfg: &RunConfig) {
    report.meta("seed", cfg.run.seed);
    for (k, v) in &cfg.echo {
        report.meta(format!("config.{k}"), v.clone());
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { b } else { a + step * i as f64 }).collect()
}

fn need_points(n: usize) -> Result<(), CliError> {
    if n < 2 {
        return Err(ConfigError(format!("`--n` must be >= 2, got {n}")).into());
    }
    Ok(())
}

fn friction_cmd(cfg: &RunConfig, x_center: f64, span: Option<f64>, n: usize) -> Result<Report, CliError> {
    need_points(n)?;
    let species = cfg.species()?;
    let beam = cfg.beam()?;
    let span = span.unwrap_or(species.wavelength());
    let profile = friction_profile(x_center, span, n, &species, &beam)?;
    let mut r = Report::new("friction-profile", &["x_offset_m", "gamma_over_m_per_s", "pump_intensity_arb"]);
    echo_config(&mut r, cfg);
    r.meta("mirror_distance_m", beam.mirror_distance());
    r.meta("delay_s", beam.delay());
    r.meta("saturation", beam.saturation());
    r.meta("area_ratio", beam.area_ratio(&species));
    r.meta("detuning_rad_per_s", beam.detuning());
    r.meta("wavelength_m", species.wavelength());
    for i in 0..n {
        r.row(vec![profile.positions[i], profile.gamma_over_m[i], profile.pump_intensity[i]]);
    }
    let peak = profile.gamma_over_m.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    r.block("summary", vec![("peak_abs_gamma_over_m_per_s".into(), peak.into())]);
    Ok(r)
}

fn temperature_cmd(
    cfg: &RunConfig,
    xs: &[f64],
    offset_min: Option<f64>,
    offset_max: Option<f64>,
    n: usize,
    trapped: bool,
) -> Result<Report, CliError> {
    need_points(n)?;
    let species = cfg.species()?;
    let beam = cfg.beam()?;
    let quarter = 0.25 * species.wavelength();
    let offsets = linspace(offset_min.unwrap_or(-quarter), offset_max.unwrap_or(quarter), n);
    let mut r = Report::new("temperature-profile", &["x_m", "x_prime_m", "T_K"]);
    echo_config(&mut r, cfg);
    r.meta("trapped_correction", trapped);
    r.meta("saturation", beam.saturation());
    r.meta("area_ratio", beam.area_ratio(&species));
    r.meta("wavelength_m", species.wavelength());
    let mut minima = Vec::new();
    for &x in xs {
        let profile = temperature_profile(x, &offsets, &species, &beam, trapped)?;
        for (o, t) in profile.offsets.iter().zip(&profile.temperature) {
            r.row(vec![x, *o, t.unwrap_or(f64::NAN)]);
        }
        let (o, t) = profile.minimum().unwrap_or((f64::NAN, f64::NAN));
        minima.push((format!("x_{}_m.min_T_K", output::format_number(x)), Field::Num(t)));
        minima.push((format!("x_{}_m.min_x_prime_m", output::format_number(x)), Field::Num(o)));
    }
    r.block("summary", minima);
    Ok(r)
}

fn classical_cmd(
    cfg: &RunConfig,
    x_start: f64,
    x_stop: Option<f64>,
    n: usize,
    velocity: Option<f64>,
    alpha: Option<f64>,
) -> Result<Report, CliError> {
    need_points(n)?;
    let species = cfg.species()?;
    let c = &cfg.classical;
    let channel = MirrorChannel::new(species.wavelength(), c.field_amplitude)?;
    let v = velocity.unwrap_or(c.velocity);
    let alpha = alpha.unwrap_or(c.alpha);
    let x_stop = x_stop.unwrap_or(x_start + 0.5 * species.wavelength());
    let mut r = Report::new("classical-force", &["x_m", "dipole_N", "binding_N", "cooling_N", "total_N"]);
    echo_config(&mut r, cfg);
    r.meta("alpha", alpha);
    r.meta("velocity_m_per_s", v);
    r.meta("field_amplitude", c.field_amplitude);
    r.meta("wavelength_m", species.wavelength());
    for x in linspace(x_start, x_stop, n) {
        let particle = ClassicalParticle::new(alpha, v, x)?;
        let f = classical_force(&particle, &channel)?;
        r.row(vec![x, f.dipole, f.binding, f.cooling, f.total]);
    }
    Ok(r)
}

/// Rows are written before a failed fit so the rate points are not lost.
fn coolrate_cmd(cfg: &RunConfig, t0: Option<Vec<f64>>, workers: Option<usize>) -> Result<(Report, Option<CliError>), CliError> {
    let temperatures = t0.unwrap_or_else(|| cfg.ensemble.temperatures.clone());
    if temperatures.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: temperatures.len() }.into());
    }
    let base = cfg.ensemble()?;
    let options = RunOptions { workers, ..Default::default() };
    let points = rate_scan(&base, &temperatures, &options, cfg.ensemble.rate_fraction)?;

    let d = &base.dynamics;
    let mut r = Report::new("coolrate", &["T0_K", "dTdt_K_per_s", "err"]);
    echo_config(&mut r, cfg);
    r.meta("n_traj", base.n_traj);
    r.meta("trap_frequency_hz", d.trap.frequency);
    r.meta("trap_center_offset_m", d.trap.center_offset);
    r.meta("delay_s", d.beam.delay());
    r.meta("dt_s", d.dt);
    r.meta("duration_s", d.duration);
    r.meta("friction_mode", format!("{:?}", d.friction_mode).to_lowercase());
    r.meta("rate_fraction", cfg.ensemble.rate_fraction);
    for p in &points {
        r.row(vec![p.initial_temperature, p.rate, p.err]);
    }
    match fit_steady_state_with(&points, &cfg.fit_options()) {
        Ok(fit) => {
            r.block(
                "fit",
                vec![
                    ("slope_per_s".into(), fit.slope.into()),
                    ("slope_err".into(), fit.slope_err.into()),
                    ("intercept_K_per_s".into(), fit.intercept.into()),
                    ("intercept_err".into(), fit.intercept_err.into()),
                    ("T_star_K".into(), fit.t_star.into()),
                    ("T_star_err".into(), fit.t_star_err.into()),
                    ("T_star_bootstrap_err".into(), fit.t_star_bootstrap_err.into()),
                    ("r_squared".into(), fit.r_squared.into()),
                    ("n_points".into(), fit.n_points.into()),
                ],
            );
            Ok((r, None))
        }
        Err(e) => Ok((r, Some(e.into()))),
    }
}

fn modes_cmd(cfg: &RunConfig) -> Result<(Report, Option<CliError>), CliError> {
    let species = cfg.species()?;
    let beam = cfg.beam()?;
    let grid = cfg.modes.grid();
    grid.validate()?;
    let x = cfg.modes.position.unwrap_or_else(|| max_friction_position(species.wavelength() / 8.0, &species));
    let displacement = cfg.modes.displacement.unwrap_or(species.wavelength() / 16.0);
    let coupled = grid.coupling != Some(0.0);
    let named = |check: &str, e: Error| match e {
        Error::NotConverged { .. } => CliError::Check(format!("{check}: {e}")),
        other => CliError::Model(other),
    };

    let mut r = Report::new("validate-modes", &["n_modes", "gamma_eff_kg_per_s", "gamma_inner_kg_per_s", "ratio"]);
    echo_config(&mut r, cfg);
    r.meta("position_m", x);
    r.meta("delay_s", beam.delay());
    r.meta("mode_spacing_rad_per_s", grid.mode_spacing(beam.delay()));

    let ladder = [grid.n_modes, 2 * grid.n_modes + 1, 4 * grid.n_modes + 3];
    let mut estimates = Vec::new();
    for n_modes in ladder {
        let g = crate::modes::ModeConfig { n_modes, ..grid };
        let e = extract_friction(x, &species, &beam, &g).map_err(|e| named("convergence", e))?;
        let ratio = if e.gamma_analytic != 0.0 { e.ratio() } else { f64::NAN };
        r.row(vec![n_modes as f64, e.gamma_eff, e.gamma_inner, ratio]);
        estimates.push(e);
    }
    let base = estimates[0];
    let scale = CoolingCoefficients::new(&species, &beam).friction_amplitude()
        * grid.coupling.map_or(1.0, |g| (g / beam.coupling(&species)).powi(4));
    let max_change = estimates
        .windows(2)
        .map(|w| if scale > 0.0 { (w[1].gamma_eff - w[0].gamma_eff).abs() / scale } else { 0.0 })
        .fold(0.0, f64::max);

    let mut failures = Vec::new();
    let friction_ok = if coupled { (base.ratio() - 1.0).abs() <= MODES_FRICTION_TOLERANCE } else { base.gamma_eff == 0.0 };
    if !friction_ok {
        failures.push(format!("friction: gamma_eff/gamma_analytic = {} outside 1 +- {MODES_FRICTION_TOLERANCE}", base.ratio()));
    }
    let response = delay_response(x, x + displacement, &species, &beam, &grid).map_err(|e| named("delay", e))?;
    let delay_ok = !coupled || (response.feature_time - beam.delay()).abs() <= response.resolution;
    if !delay_ok {
        failures.push(format!(
            "delay: feature at {:e} s, expected {:e} +- {:e} s",
            response.feature_time,
            beam.delay(),
            response.resolution
        ));
    }
    let convergence_ok = max_change <= CONVERGENCE_TOLERANCE;
    if !convergence_ok {
        failures.push(format!("convergence: relative change {max_change} exceeds {CONVERGENCE_TOLERANCE}"));
    }

    r.block(
        "friction",
        vec![
            ("gamma_eff_kg_per_s".into(), base.gamma_eff.into()),
            ("gamma_analytic_kg_per_s".into(), base.gamma_analytic.into()),
            ("ratio".into(), (if coupled { base.ratio() } else { f64::NAN }).into()),
            ("tolerance".into(), MODES_FRICTION_TOLERANCE.into()),
            ("pass".into(), friction_ok.into()),
        ],
    );
    r.block(
        "delay",
        vec![
            ("feature_time_s".into(), response.feature_time.into()),
            ("delay_s".into(), beam.delay().into()),
            ("resolution_s".into(), response.resolution.into()),
            ("pass".into(), delay_ok.into()),
        ],
    );
    r.block(
        "convergence",
        vec![
            ("max_relative_change".into(), max_change.into()),
            ("tolerance".into(), CONVERGENCE_TOLERANCE.into()),
            ("pass".into(), convergence_ok.into()),
        ],
    );
    let failure = (!failures.is_empty()).then(|| CliError::Check(failures.join("; ")));
    Ok((r, failure))
}

fn emit(report: &Report, cfg: &RunConfig) -> Result<(), CliError> {
    match &cfg.run.output {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            report.write(cfg.run.format, &mut out)?;
            out.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = BufWriter::new(stdout.lock());
            report.write(cfg.run.format, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Runs one parsed invocation; output is written even when a check fails.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli.global)?;
    let (report, failure) = match cli.command {
        Command::FrictionProfile { x_center, span, n } => (friction_cmd(&cfg, x_center, span, n)?, None),
        Command::TemperatureProfile { x, offset_min, offset_max, n, trapped } => {
            (temperature_cmd(&cfg, &x, offset_min, offset_max, n, trapped)?, None)
        }
        Command::ClassicalForce { x_start, x_stop, n, velocity, alpha } => {
            (classical_cmd(&cfg, x_start, x_stop, n, velocity, alpha)?, None)
        }
        Command::Coolrate { t0 } => coolrate_cmd(&cfg, t0, cli.global.workers)?,
        Command::ValidateModes => modes_cmd(&cfg)?,
    };
    emit(&report, &cfg)?;
    failure.map_or(Ok(()), Err)
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mirror-cool: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn every_flag_documents_a_unit_or_type() {
        let cmd = Cli::command();
        for sub in cmd.get_subcommands() {
            for arg in sub.get_arguments() {
                let help = arg.get_help().map(|h| h.to_string()).unwrap_or_default();
                let id = arg.get_id().as_str();
                if id == "help" || id == "version" {
                    continue;
                }
                let has_unit = [", m", " m ", "m/s", "K", "Hz", "count", "integer", "dimensionless", "csv", "file", "(>= 2)", "SECTION", "TOML"]
                    .iter()
                    .any(|u| help.contains(u));
                assert!(has_unit, "`{}` flag `{id}` lacks a unit: {help}", sub.get_name());
            }
        }
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(CliError::Model(Error::OutOfValidity { alpha_zeta: 1.0, retardation: 0.0 }).exit_code(), 3);
        assert_eq!(CliError::Model(Error::NoCooling { slope: 1.0 }).exit_code(), 4);
        assert_eq!(CliError::Model(Error::InsufficientSamples { needed: 3, got: 2 }).exit_code(), 2);
        assert_eq!(CliError::Check("x".into()).exit_code(), 5);
    }
}
