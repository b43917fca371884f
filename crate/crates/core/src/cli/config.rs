//! TOML run configuration with strict keys and `--set section.key=value`
//! overrides.

use serde::de::DeserializeOwned;
use serde::Deserialize;
use toml::{Table, Value};

use crate::dynamics::{suggested_dt, CoefficientModel, DynamicsConfig, FrictionMode};
use crate::ensemble::{EnsembleConfig, FitOptions, Weighting};
use crate::model::{AtomSpecies, BeamConfig, TrapConfig};
use crate::modes::ModeConfig;

const SECTIONS: [&str; 8] = ["species", "beam", "trap", "dynamics", "ensemble", "modes", "classical", "run"];

/// A configuration problem, reported with the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn fail<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeciesSection {
    pub preset: String,
    /// kg
    pub mass: Option<f64>,
    /// m
    pub wavelength: Option<f64>,
    /// Half-linewidth, rad/s.
    pub gamma: Option<f64>,
}

impl Default for SpeciesSection {
    fn default() -> Self {
        Self { preset: "rubidium".into(), mass: None, wavelength: None, gamma: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSection {
    /// Mode waist, m. Exclusive with `area_ratio`.
    pub waist: Option<f64>,
    /// σ_a/(πw²).
    pub area_ratio: Option<f64>,
    pub saturation: f64,
    /// Δ in units of Γ. Exclusive with `detuning`.
    pub detuning_over_gamma: Option<f64>,
    /// rad/s
    pub detuning: Option<f64>,
    /// m. Exclusive with `delay`.
    pub mirror_distance: Option<f64>,
    /// Round-trip time, s.
    pub delay: Option<f64>,
}

impl Default for BeamSection {
    fn default() -> Self {
        Self {
            waist: None,
            area_ratio: None,
            saturation: 0.073,
            detuning_over_gamma: None,
            detuning: None,
            mirror_distance: None,
            delay: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapSection {
    /// Hz
    pub frequency: f64,
    /// Trap centre relative to the nearest node, m. Default λ/16.
    pub center_offset: Option<f64>,
    pub enabled: bool,
}

impl Default for TrapSection {
    fn default() -> Self {
        Self { frequency: 1.5e6, center_offset: None, enabled: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientChoice {
    #[default]
    Local,
    TrapCenter,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSection {
    pub friction_mode: FrictionMode,
    pub coefficients: CoefficientChoice,
    pub dipole_force: bool,
    /// s
    pub duration: f64,
    pub steps_per_period: usize,
    /// Explicit step, s; overrides `steps_per_period`.
    pub dt: Option<f64>,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self {
            friction_mode: FrictionMode::Delayed,
            coefficients: CoefficientChoice::Local,
            dipole_force: false,
            duration: 400e-6,
            steps_per_period: 256,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_traj: usize,
    /// Initial temperatures, K.
    pub temperatures: Vec<f64>,
    pub sample_stride: usize,
    /// Leading fraction of the filtered record used for the rate.
    pub rate_fraction: f64,
    pub weighting: Weighting,
    pub bootstrap_samples: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            n_traj: 1000,
            temperatures: vec![0.3e-3, 0.5e-3, 0.8e-3, 1.2e-3, 1.8e-3, 3.1e-3],
            sample_stride: 8,
            rate_fraction: 1.0,
            weighting: Weighting::Weighted,
            bootstrap_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesSection {
    pub n_modes: usize,
    pub revival_over_delay: f64,
    pub settle_over_delay: f64,
    pub window_over_delay: f64,
    /// m/s
    pub probe_velocity: f64,
    pub step_fraction: f64,
    /// rad/s per √mode; defaults to the beam's coupling.
    pub coupling: Option<f64>,
    /// Probe position relative to the node, m. Default: maximum friction near λ/8.
    pub position: Option<f64>,
    /// Sudden displacement for the delay check, m. Default λ/16.
    pub displacement: Option<f64>,
}

impl Default for ModesSection {
    fn default() -> Self {
        let g = ModeConfig::default();
        Self {
            n_modes: g.n_modes,
            revival_over_delay: g.revival_over_delay,
            settle_over_delay: g.settle_over_delay,
            window_over_delay: g.window_over_delay,
            probe_velocity: g.probe_velocity,
            step_fraction: g.step_fraction,
            coupling: g.coupling,
            position: None,
            displacement: None,
        }
    }
}

impl ModesSection {
    pub fn grid(&self) -> ModeConfig {
        ModeConfig {
            n_modes: self.n_modes,
            revival_over_delay: self.revival_over_delay,
            settle_over_delay: self.settle_over_delay,
            window_over_delay: self.window_over_delay,
            probe_velocity: self.probe_velocity,
            step_fraction: self.step_fraction,
            coupling: self.coupling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalSection {
    /// Dimensionless polarizability.
    pub alpha: f64,
    /// m/s
    pub velocity: f64,
    /// Incident amplitude E₀, arbitrary units.
    pub field_amplitude: f64,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        Self { alpha: 1e-3, velocity: 0.0, field_amplitude: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Ndjson,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "ndjson" => Ok(Format::Ndjson),
            other => Err(format!("unknown format `{other}` (expected csv or ndjson)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub format: Format,
    /// Output path; stdout when absent.
    pub output: Option<String>,
}

/// Parsed configuration, still unvalidated against the physics modules.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub species: SpeciesSection,
    pub beam: BeamSection,
    pub trap: TrapSection,
    pub dynamics: DynamicsSection,
    pub ensemble: EnsembleSection,
    pub modes: ModesSection,
    pub classical: ClassicalSection,
    pub run: RunSection,
    /// Flattened `section.key = value` pairs as given, for output metadata.
    pub echo: Vec<(String, String)>,
}

fn section<T: DeserializeOwned + Default>(table: &Table, name: &str) -> Result<T, ConfigError> {
    match table.get(name) {
        None => Ok(T::default()),
        Some(Value::Table(t)) => {
            T::deserialize(Value::Table(t.clone())).map_err(|e| ConfigError(format!("[{name}]: {}", e.message())))
        }
        Some(_) => fail(format!("`{name}` must be a table")),
    }
}

/// Parses an override value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Applies one `section.key=value` override in place.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<(), ConfigError> {
    let Some((path, raw)) = spec.split_once('=') else {
        return fail(format!("override `{spec}` must look like section.key=value"));
    };
    let Some((sec, key)) = path.trim().split_once('.') else {
        return fail(format!("override key `{}` must look like section.key", path.trim()));
    };
    if !SECTIONS.contains(&sec) {
        return fail(format!("unknown section `{sec}` in override `{spec}`"));
    }
    let entry = table.entry(sec.to_string()).or_insert_with(|| Value::Table(Table::new()));
    let Value::Table(t) = entry else {
        return fail(format!("`{sec}` must be a table"));
    };
    t.insert(key.trim().to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// Parses TOML text and applies overrides in order.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError(format!("config: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        if let Some(bad) = table.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return fail(format!("unknown section `{bad}` (expected one of {})", SECTIONS.join(", ")));
        }
        let mut echo = Vec::new();
        for (name, value) in &table {
            if let Value::Table(t) = value {
                for (k, v) in t {
                    echo.push((format!("{name}.{k}"), v.to_string()));
                }
            }
        }
        Ok(Self {
            species: section(&table, "species")?,
            beam: section(&table, "beam")?,
            trap: section(&table, "trap")?,
            dynamics: section(&table, "dynamics")?,
            ensemble: section(&table, "ensemble")?,
            modes: section(&table, "modes")?,
            classical: section(&table, "classical")?,
            run: section(&table, "run")?,
            echo,
        })
    }

    pub fn species(&self) -> crate::Result<AtomSpecies> {
        let s = &self.species;
        let base = match s.preset.as_str() {
            "rubidium" => AtomSpecies::rubidium(),
            other => {
                return Err(crate::Error::InvalidParameter {
                    name: "species.preset",
                    reason: format!("unknown preset `{other}` (expected rubidium)"),
                })
            }
        };
        AtomSpecies::new(
            s.mass.unwrap_or(base.mass()),
            s.wavelength.unwrap_or(base.wavelength()),
            s.gamma.unwrap_or(base.gamma()),
        )
    }

    pub fn beam(&self) -> crate::Result<BeamConfig> {
        let species = self.species()?;
        let b = &self.beam;
        let conflict = |name: &'static str, reason: &str| crate::Error::InvalidParameter { name, reason: reason.into() };
        let detuning = match (b.detuning, b.detuning_over_gamma) {
            (Some(_), Some(_)) => return Err(conflict("beam.detuning", "give detuning or detuning_over_gamma, not both")),
            (Some(d), None) => d,
            (None, r) => r.unwrap_or(-10.0) * species.gamma(),
        };
        let beam = match (b.waist, b.area_ratio) {
            (Some(_), Some(_)) => return Err(conflict("beam.waist", "give waist or area_ratio, not both")),
            (None, Some(r)) => BeamConfig::from_area_ratio(&species, r, b.saturation, detuning, 1.0)?,
            (w, None) => BeamConfig::new(w.unwrap_or(0.7e-6), b.saturation, detuning, 1.0)?,
        };
        match (b.mirror_distance, b.delay) {
            (Some(_), Some(_)) => Err(conflict("beam.mirror_distance", "give mirror_distance or delay, not both")),
            (None, Some(tau)) => beam.with_delay(tau),
            (x, None) => beam.with_mirror_distance(x.unwrap_or(3.0)),
        }
    }

    pub fn trap(&self) -> crate::Result<TrapConfig> {
        let species = self.species()?;
        let t = &self.trap;
        let center = t.center_offset.unwrap_or(species.wavelength() / 16.0);
        if t.enabled {
            TrapConfig::new(t.frequency, center, &species)
        } else {
            let trap = TrapConfig::disabled(center);
            trap.validate(&species)?;
            Ok(trap)
        }
    }

    pub fn dynamics(&self) -> crate::Result<DynamicsConfig> {
        let d = &self.dynamics;
        let beam = self.beam()?;
        let trap = self.trap()?;
        let dt = match d.dt {
            Some(dt) => dt,
            None => suggested_dt(&beam, &trap, d.friction_mode, d.steps_per_period)?,
        };
        let cfg = DynamicsConfig {
            species: self.species()?,
            beam,
            trap,
            dt,
            friction_mode: d.friction_mode,
            dipole_force: d.dipole_force,
            duration: d.duration,
            coefficients: match d.coefficients {
                CoefficientChoice::Local => CoefficientModel::Local,
                CoefficientChoice::TrapCenter => CoefficientModel::TrapCenter,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Ensemble template; the initial temperature is set per rate point.
    pub fn ensemble(&self) -> crate::Result<EnsembleConfig> {
        let e = &self.ensemble;
        let t0 = e.temperatures.first().copied().unwrap_or(1e-3);
        let cfg = EnsembleConfig {
            n_traj: e.n_traj,
            initial_temperature: t0,
            dynamics: self.dynamics()?,
            master_seed: self.run.seed,
            sample_stride: e.sample_stride,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            weighting: self.ensemble.weighting,
            bootstrap_samples: self.ensemble.bootstrap_samples,
            seed: self.run.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = RunConfig::parse("", &[]).unwrap();
        assert_eq!(cfg.ensemble.n_traj, 1000);
        let beam = cfg.beam().unwrap();
        assert_eq!(beam.mirror_distance(), 3.0);
        assert!(cfg.dynamics().is_ok());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::parse("[beam]\nwaste = 1e-6\n", &[]).unwrap_err();
        assert!(err.0.contains("[beam]") && err.0.contains("waste"), "{err}");
        let err = RunConfig::parse("[bean]\n", &[]).unwrap_err();
        assert!(err.0.contains("bean"), "{err}");
    }

    #[test]
    fn overrides_replace_and_add() {
        let text = "[trap]\nfrequency = 1.5e6\n";
        let cfg = RunConfig::parse(text, &["trap.frequency=7.5e5".into(), "run.format=ndjson".into()]).unwrap();
        assert_eq!(cfg.trap.frequency, 7.5e5);
        assert_eq!(cfg.run.format, Format::Ndjson);
        let cfg = RunConfig::parse("", &["ensemble.temperatures=[1e-3, 2e-3]".into()]).unwrap();
        assert_eq!(cfg.ensemble.temperatures, vec![1e-3, 2e-3]);
        assert!(RunConfig::parse("", &["nodot=1".into()]).is_err());
        assert!(RunConfig::parse("", &["trap.frequency".into()]).is_err());
    }

    #[test]
    fn mode_grid_keys_are_flattened() {
        let cfg = RunConfig::parse("[modes]\nn_modes = 81\nposition = 1e-7\n", &[]).unwrap();
        assert_eq!(cfg.modes.grid().n_modes, 81);
        assert_eq!(cfg.modes.position, Some(1e-7));
        assert!(RunConfig::parse("[modes]\nn_mode = 81\n", &[]).is_err());
    }

    #[test]
    fn exclusive_keys_conflict() {
        let cfg = RunConfig::parse("[beam]\nwaist = 1e-6\narea_ratio = 0.1\n", &[]).unwrap();
        assert!(cfg.beam().is_err());
        let cfg = RunConfig::parse("[beam]\ndelay = 26.5e-9\nmirror_distance = 3.0\n", &[]).unwrap();
        assert!(cfg.beam().is_err());
    }
}
