//! Physical parameter records shared by every other module.
//!
//! Everything is SI: metres, seconds, kilograms, kelvin. Angular frequencies
//! are in rad/s. `gamma` is half the excited-state population decay rate, so
//! spontaneous emission proceeds at `2 * gamma` and the Doppler temperature is
//! `HBAR * gamma / K_B`.

use std::f64::consts::PI;

use crate::error::{ensure_finite, ensure_positive, Error, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Ratio |Δ|/Γ above which the far-detuned formulas are considered valid.
pub const FAR_DETUNED_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomSpecies {
    mass: f64,
    wavelength: f64,
    gamma: f64,
    wavenumber: f64,
    cross_section: f64,
}

impl AtomSpecies {
    pub fn new(mass: f64, wavelength: f64, gamma: f64) -> Result<Self> {
        ensure_positive("species.mass", mass)?;
        ensure_positive("species.wavelength", wavelength)?;
        ensure_positive("species.gamma", gamma)?;
        Ok(Self {
            mass,
            wavelength,
            gamma,
            wavenumber: 2.0 * PI / wavelength,
            cross_section: 3.0 * wavelength * wavelength / (2.0 * PI),
        })
    }

    /// Rubidium on the D2 line (780 nm, ⁸⁷Rb mass).
    pub fn rubidium() -> Self {
        Self::new(1.443e-25, 780e-9, 1.9e7).expect("rubidium preset is valid")
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Half the excited-state population decay rate, rad/s.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    /// Resonant scattering cross section 3λ²/(2π).
    pub fn cross_section(&self) -> f64 {
        self.cross_section
    }

    pub fn doppler_temperature(&self) -> f64 {
        HBAR * self.gamma / K_B
    }

    /// Recoil momentum ħk.
    pub fn recoil_momentum(&self) -> f64 {
        HBAR * self.wavenumber
    }
}

/// Convenience wrapper around [`AtomSpecies::rubidium`].
pub fn rubidium_preset() -> AtomSpecies {
    AtomSpecies::rubidium()
}

/// Atomic saturation s = g²|A|²/Δ².
pub fn saturation_from_raw(coupling: f64, pump_flux: f64, detuning: f64) -> Result<f64> {
    ensure_finite("coupling", coupling)?;
    ensure_finite("pump_flux", pump_flux)?;
    if pump_flux < 0.0 {
        return Err(Error::invalid("pump_flux", "must be >= 0"));
    }
    if detuning == 0.0 || !detuning.is_finite() {
        return Err(Error::invalid("detuning", "must be finite and non-zero"));
    }
    Ok(coupling * coupling * pump_flux / (detuning * detuning))
}

/// Single-mode coupling g implied by the mode waist: 2πg² = 4Γσ_a/(πw²).
pub fn coupling_from_waist(species: &AtomSpecies, waist: f64) -> Result<f64> {
    ensure_positive("beam.waist", waist)?;
    let area_ratio = species.cross_section() / (PI * waist * waist);
    Ok((2.0 * species.gamma() * area_ratio / PI).sqrt())
}

/// Inverse of [`coupling_from_waist`].
pub fn waist_from_coupling(species: &AtomSpecies, coupling: f64) -> Result<f64> {
    ensure_positive("beam.coupling", coupling)?;
    // πw² = 2Γσ_a / (πg²)
    let area = 2.0 * species.gamma() * species.cross_section() / (PI * coupling * coupling);
    Ok((area / PI).sqrt())
}

/// Raw drive description: mode coupling and pump photon-flux density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawDrive {
    pub coupling: f64,
    pub pump_flux: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    waist: f64,
    saturation: f64,
    detuning: f64,
    mirror_distance: f64,
    delay: f64,
    raw: Option<RawDrive>,
}

impl BeamConfig {
    pub fn new(waist: f64, saturation: f64, detuning: f64, mirror_distance: f64) -> Result<Self> {
        ensure_positive("beam.waist", waist)?;
        ensure_finite("beam.saturation", saturation)?;
        if saturation < 0.0 {
            return Err(Error::invalid("beam.saturation", "must be >= 0"));
        }
        if detuning == 0.0 || !detuning.is_finite() {
            return Err(Error::invalid("beam.detuning", "must be finite and non-zero"));
        }
        ensure_positive("beam.mirror_distance", mirror_distance)?;
        Ok(Self {
            waist,
            saturation,
            detuning,
            mirror_distance,
            delay: 2.0 * mirror_distance / SPEED_OF_LIGHT,
            raw: None,
        })
    }

    /// Builds the beam from the mode coupling g and pump flux |A|²; the waist
    /// follows from 2πg² = 4Γσ_a/(πw²) and s = g²|A|²/Δ².
    pub fn from_raw(
        species: &AtomSpecies,
        coupling: f64,
        pump_flux: f64,
        detuning: f64,
        mirror_distance: f64,
    ) -> Result<Self> {
        let saturation = saturation_from_raw(coupling, pump_flux, detuning)?;
        let waist = waist_from_coupling(species, coupling)?;
        let mut beam = Self::new(waist, saturation, detuning, mirror_distance)?;
        beam.raw = Some(RawDrive { coupling, pump_flux });
        Ok(beam)
    }

    /// Builds the beam from the area ratio σ_a/(πw²) instead of the waist.
    pub fn from_area_ratio(
        species: &AtomSpecies,
        area_ratio: f64,
        saturation: f64,
        detuning: f64,
        mirror_distance: f64,
    ) -> Result<Self> {
        ensure_positive("beam.area_ratio", area_ratio)?;
        let waist = (species.cross_section() / (PI * area_ratio)).sqrt();
        Self::new(waist, saturation, detuning, mirror_distance)
    }

    pub fn with_mirror_distance(mut self, mirror_distance: f64) -> Result<Self> {
        ensure_positive("beam.mirror_distance", mirror_distance)?;
        self.mirror_distance = mirror_distance;
        self.delay = 2.0 * mirror_distance / SPEED_OF_LIGHT;
        Ok(self)
    }

    /// Sets the mirror distance from the round-trip delay τ = 2x/c.
    pub fn with_delay(self, delay: f64) -> Result<Self> {
        ensure_positive("beam.delay", delay)?;
        self.with_mirror_distance(0.5 * SPEED_OF_LIGHT * delay)
    }

    pub fn with_saturation(mut self, saturation: f64) -> Result<Self> {
        ensure_finite("beam.saturation", saturation)?;
        if saturation < 0.0 {
            return Err(Error::invalid("beam.saturation", "must be >= 0"));
        }
        self.saturation = saturation;
        self.raw = None;
        Ok(self)
    }

    pub fn with_detuning(mut self, detuning: f64) -> Result<Self> {
        if detuning == 0.0 || !detuning.is_finite() {
            return Err(Error::invalid("beam.detuning", "must be finite and non-zero"));
        }
        self.detuning = detuning;
        self.raw = None;
        Ok(self)
    }

    pub fn waist(&self) -> f64 {
        self.waist
    }

    pub fn saturation(&self) -> f64 {
        self.saturation
    }

    pub fn detuning(&self) -> f64 {
        self.detuning
    }

    pub fn mirror_distance(&self) -> f64 {
        self.mirror_distance
    }

    /// Atom–mirror–atom round-trip time τ = 2x/c.
    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn raw(&self) -> Option<RawDrive> {
        self.raw
    }

    /// σ_a/(πw²).
    pub fn area_ratio(&self, species: &AtomSpecies) -> f64 {
        species.cross_section() / (PI * self.waist * self.waist)
    }

    pub fn coupling(&self, species: &AtomSpecies) -> f64 {
        coupling_from_waist(species, self.waist).expect("waist validated at construction")
    }

    /// Pump photon-flux density |A|² = sΔ²/g².
    pub fn pump_flux(&self, species: &AtomSpecies) -> f64 {
        let g = self.coupling(species);
        self.saturation * self.detuning * self.detuning / (g * g)
    }

    /// True when |Δ| ≥ 10Γ.
    pub fn is_far_detuned(&self, species: &AtomSpecies) -> bool {
        self.detuning.abs() >= FAR_DETUNED_RATIO * species.gamma()
    }

    pub fn is_weakly_saturated(&self) -> bool {
        self.saturation < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapConfig {
    /// Trap frequency ν_trap in Hz (not rad/s).
    pub frequency: f64,
    /// Trap centre relative to the nearest field node, m.
    pub center_offset: f64,
    pub enabled: bool,
}

impl TrapConfig {
    pub fn new(frequency: f64, center_offset: f64, species: &AtomSpecies) -> Result<Self> {
        let trap = Self { frequency, center_offset, enabled: true };
        trap.validate(species)?;
        Ok(trap)
    }

    /// A disabled trap; the centre still sets where particles start.
    pub fn disabled(center_offset: f64) -> Self {
        Self { frequency: 0.0, center_offset, enabled: false }
    }

    pub fn validate(&self, species: &AtomSpecies) -> Result<()> {
        if self.enabled {
            ensure_positive("trap.frequency", self.frequency)?;
        }
        ensure_finite("trap.center_offset", self.center_offset)?;
        if self.center_offset.abs() >= 0.25 * species.wavelength() {
            return Err(Error::invalid(
                "trap.center_offset",
                format!("|x'| must be < lambda/4 = {:e} m", 0.25 * species.wavelength()),
            ));
        }
        Ok(())
    }

    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * self.frequency
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }
}

/// Parameter sets used for the published figures.
pub mod presets {
    use super::*;

    /// Friction-profile geometry: s = 0.1, σ_a/(πw²) = 0.1, x = 3 m, Δ = −10Γ.
    pub fn friction_profile_beam(species: &AtomSpecies) -> BeamConfig {
        BeamConfig::from_area_ratio(species, 0.1, 0.1, -10.0 * species.gamma(), 3.0)
            .expect("preset is valid")
    }

    /// Trapped-atom geometry: 1.4 μm mode diameter, s = 0.073, Δ = −10Γ,
    /// with the given round-trip delay.
    pub fn trapped_beam(species: &AtomSpecies, delay: f64) -> BeamConfig {
        BeamConfig::new(0.7e-6, 0.073, -10.0 * species.gamma(), 1.0)
            .and_then(|b| b.with_delay(delay))
            .expect("preset is valid")
    }

    /// ν_trap = 1.5 MHz, τ = 26.5 ns.
    pub const SET_A: (f64, f64) = (1.5e6, 26.5e-9);
    /// ν_trap = 750 kHz, τ = 53 ns.
    pub const SET_B: (f64, f64) = (750e3, 53e-9);
}
