//! Closed-form friction, momentum diffusion and stationary temperature in the
//! weak-coupling, far-detuned limit.
//!
//! Positions passed to these functions fix the standing-wave phase; the
//! retardation τ always comes from the beam's mirror distance. For a particle
//! trapped a sub-wavelength distance x′ from a node at macroscopic distance x,
//! pass x′ as the position and x as the mirror distance.

use std::f64::consts::PI;

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::model::{AtomSpecies, BeamConfig, HBAR, K_B, SPEED_OF_LIGHT};

/// Extra reduction of the cooling efficiency for a trapped particle, applied
/// as a constant multiplier to the stationary temperature.
pub const TURNING_POINT_FACTOR: f64 = 0.64;

/// Weight of the spontaneous-emission term in the diffusion coefficient.
pub const EMISSION_WEIGHT: f64 = 2.0 / 5.0;

/// Precomputed prefactors for γ(x) and D(x) of one species/beam pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingCoefficients {
    wavenumber: f64,
    /// 2ħk²Γτ·s·σ_a/(πw²), kg/s
    friction_amplitude: f64,
    /// ħ²k²Γs, kg²m²/s³
    diffusion_amplitude: f64,
}

impl CoolingCoefficients {
    pub fn new(species: &AtomSpecies, beam: &BeamConfig) -> Self {
        let k = species.wavenumber();
        let friction_amplitude = 2.0
            * HBAR
            * k
            * k
            * species.gamma()
            * beam.delay()
            * beam.saturation()
            * beam.area_ratio(species);
        let diffusion_amplitude = HBAR * HBAR * k * k * species.gamma() * beam.saturation();
        Self { wavenumber: k, friction_amplitude, diffusion_amplitude }
    }

    /// Peak friction |γ|, reached where sin(4kx) = ±1.
    pub fn friction_amplitude(&self) -> f64 {
        self.friction_amplitude
    }

    pub fn friction(&self, x: f64) -> f64 {
        self.friction_amplitude * (4.0 * self.wavenumber * x).sin()
    }

    pub fn diffusion(&self, x: f64) -> f64 {
        let (s, c) = (self.wavenumber * x).sin_cos();
        self.diffusion_amplitude * (c * c + EMISSION_WEIGHT * s * s)
    }

    /// k_B T = D/γ where γ > 0.
    pub fn temperature(&self, x: f64) -> Result<f64> {
        let gamma = self.friction(x);
        if gamma > 0.0 {
            Ok(self.diffusion(x) / (gamma * K_B))
        } else {
            Err(Error::NoStationaryState { gamma })
        }
    }
}

fn check_position(x: f64) -> Result<()> {
    ensure_finite("x", x)
}

/// Friction coefficient from the raw drive: πħk²τ|A|²(g⁴/Δ²)·sin(4kx) with
/// τ = 2x/c.
pub fn friction_raw(
    x: f64,
    coupling: f64,
    pump_flux: f64,
    detuning: f64,
    species: &AtomSpecies,
) -> Result<f64> {
    ensure_positive("x", x)?;
    ensure_finite("coupling", coupling)?;
    ensure_finite("pump_flux", pump_flux)?;
    if detuning == 0.0 || !detuning.is_finite() {
        return Err(Error::invalid("detuning", "must be finite and non-zero"));
    }
    let k = species.wavenumber();
    let tau = 2.0 * x / SPEED_OF_LIGHT;
    let g2 = coupling * coupling;
    Ok(PI * HBAR * k * k * tau * pump_flux * g2 * g2 / (detuning * detuning) * (4.0 * k * x).sin())
}

/// Friction coefficient 2ħk²Γτ·s·(σ_a/πw²)·sin(4kx), kg/s.
pub fn friction_std(x: f64, species: &AtomSpecies, beam: &BeamConfig) -> Result<f64> {
    check_position(x)?;
    Ok(CoolingCoefficients::new(species, beam).friction(x))
}

/// Momentum diffusion ħ²k²Γs·[cos²(kx) + (2/5)sin²(kx)], kg²m²/s³.
pub fn diffusion(x: f64, species: &AtomSpecies, beam: &BeamConfig) -> Result<f64> {
    check_position(x)?;
    Ok(CoolingCoefficients::new(species, beam).diffusion(x))
}

/// Stationary temperature D/(γk_B). Fails where the friction is not positive.
pub fn stationary_temperature(x: f64, species: &AtomSpecies, beam: &BeamConfig) -> Result<f64> {
    check_position(x)?;
    CoolingCoefficients::new(species, beam).temperature(x)
}

/// Approximate stationary temperature at maximum friction,
/// ħπw²/(4σ_aΓτ) · Γ/k_B.
pub fn temperature_at_max_friction_approx(species: &AtomSpecies, beam: &BeamConfig) -> f64 {
    HBAR / (4.0 * beam.area_ratio(species) * beam.delay() * K_B)
}

/// The point nearest `near_x` where sin(4kx) = 1.
pub fn max_friction_position(near_x: f64, species: &AtomSpecies) -> f64 {
    let q = 4.0 * species.wavenumber();
    let n = ((q * near_x - 0.5 * PI) / (2.0 * PI)).round();
    (0.5 * PI + 2.0 * PI * n) / q
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrictionProfile {
    pub positions: Vec<f64>,
    pub gamma_over_m: Vec<f64>,
    /// sin²(kx), arbitrary units.
    pub pump_intensity: Vec<f64>,
}

/// γ/m and the pump intensity on `n` uniform points spanning
/// `[x_center - span/2, x_center + span/2]`.
pub fn friction_profile(
    x_center: f64,
    span: f64,
    n: usize,
    species: &AtomSpecies,
    beam: &BeamConfig,
) -> Result<FrictionProfile> {
    if n < 2 {
        return Err(Error::invalid("n", format!("need at least 2 points, got {n}")));
    }
    ensure_finite("x_center", x_center)?;
    ensure_positive("span", span)?;
    let coeffs = CoolingCoefficients::new(species, beam);
    let k = species.wavenumber();
    let step = span / (n - 1) as f64;
    let positions: Vec<f64> = (0..n).map(|i| x_center - 0.5 * span + step * i as f64).collect();
    let gamma_over_m = positions.iter().map(|&x| coeffs.friction(x) / species.mass()).collect();
    let pump_intensity = positions.iter().map(|&x| (k * x).sin().powi(2)).collect();
    Ok(FrictionProfile { positions, gamma_over_m, pump_intensity })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureProfile {
    pub offsets: Vec<f64>,
    /// `None` where there is no stationary state (γ ≤ 0).
    pub temperature: Vec<Option<f64>>,
    pub mirror_distance: f64,
}

impl TemperatureProfile {
    /// Smallest finite temperature and its offset.
    pub fn minimum(&self) -> Option<(f64, f64)> {
        self.offsets
            .iter()
            .zip(&self.temperature)
            .filter_map(|(&x, t)| t.map(|t| (x, t)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Stationary temperature versus node-relative trap position `offsets` for a
/// node at mirror distance `x`. With `trapped_correction` the result is
/// multiplied by [`TURNING_POINT_FACTOR`].
pub fn temperature_profile(
    x: f64,
    offsets: &[f64],
    species: &AtomSpecies,
    beam: &BeamConfig,
    trapped_correction: bool,
) -> Result<TemperatureProfile> {
    let beam = beam.with_mirror_distance(x)?;
    let quarter = 0.25 * species.wavelength();
    if let Some(bad) = offsets.iter().find(|o| !o.is_finite() || o.abs() > quarter) {
        return Err(Error::invalid(
            "offsets",
            format!("offset {bad:e} m lies outside +-lambda/4 = {quarter:e} m"),
        ));
    }
    let coeffs = CoolingCoefficients::new(species, &beam);
    let factor = if trapped_correction { TURNING_POINT_FACTOR } else { 1.0 };
    let temperature = offsets.iter().map(|&o| coeffs.temperature(o).ok().map(|t| t * factor)).collect();
    Ok(TemperatureProfile { offsets: offsets.to_vec(), temperature, mirror_distance: x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, rubidium_preset};
    use approx::assert_relative_eq;

    fn fig2a() -> (AtomSpecies, BeamConfig) {
        let rb = rubidium_preset();
        (rb, presets::friction_profile_beam(&rb))
    }

    // Direct transcription of 2ħk²Γτ·s·ratio, kept separate from the
    // implementation's precomputed prefactor.
    fn friction_by_hand(x: f64, rb: &AtomSpecies, beam: &BeamConfig) -> f64 {
        let k = 2.0 * PI / rb.wavelength();
        let sigma = 3.0 * rb.wavelength().powi(2) / (2.0 * PI);
        let ratio = sigma / (PI * beam.waist().powi(2));
        let tau = 2.0 * beam.mirror_distance() / SPEED_OF_LIGHT;
        2.0 * HBAR * k * k * rb.gamma() * tau * beam.saturation() * ratio * (4.0 * k * x).sin()
    }

    #[test]
    fn friction_zero_at_nodes_of_sin4kx() {
        let (rb, beam) = fig2a();
        let x = rb.wavelength() / 4.0;
        assert!(friction_std(x, &rb, &beam).unwrap().abs() < 1e-8 * CoolingCoefficients::new(&rb, &beam).friction_amplitude());
        assert_eq!(friction_std(0.0, &rb, &beam).unwrap(), 0.0);
        assert_eq!(friction_raw(1.0, 1.0, 1.0, 1.0, &rb).unwrap().signum(), (4.0 * rb.wavenumber()).sin().signum());
    }

    #[test]
    fn raw_friction_is_linear_in_pump() {
        let rb = rubidium_preset();
        let x = 3.0;
        let a = friction_raw(x, 1.5e3, 1e12, -1.9e8, &rb).unwrap();
        let b = friction_raw(x, 1.5e3, 2e12, -1.9e8, &rb).unwrap();
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-14);
        assert!(friction_raw(x, 1.5e3, 1e12, 0.0, &rb).is_err());
    }

    #[test]
    fn raw_and_standard_forms_agree_for_profile_geometry() {
        let (rb, beam) = fig2a();
        let x = max_friction_position(3.0, &rb);
        let beam = beam.with_mirror_distance(x).unwrap();
        // substitute 2πg² = 4Γσ_a/(πw²) and |A|² = sΔ²/g² by hand
        let g2 = 4.0 * rb.gamma() * 0.1 / (2.0 * PI);
        let a2 = beam.saturation() * beam.detuning().powi(2) / g2;
        let raw = friction_raw(x, g2.sqrt(), a2, beam.detuning(), &rb).unwrap();
        let std = friction_std(x, &rb, &beam).unwrap();
        assert_relative_eq!(raw, std, max_relative = 1e-10);
    }

    #[test]
    fn cooling_time_at_max_friction() {
        let (rb, beam) = fig2a();
        let x = max_friction_position(3.0, &rb);
        let gamma = friction_std(x, &rb, &beam).unwrap();
        assert_relative_eq!(gamma, friction_by_hand(x, &rb, &beam), max_relative = 1e-9);
        let rate = gamma / rb.mass();
        // hand evaluation: 360.7 1/s
        assert_relative_eq!(rate, 360.7, max_relative = 2e-3);
        let t_cool = 1.0 / rate;
        assert!((2e-3..=4e-3).contains(&t_cool), "{t_cool}");
    }

    #[test]
    fn heating_where_sin4kx_negative() {
        let (rb, beam) = fig2a();
        let x = max_friction_position(3.0, &rb) + rb.wavelength() / 8.0;
        assert!(friction_std(x, &rb, &beam).unwrap() < 0.0);
        assert!(matches!(stationary_temperature(x, &rb, &beam), Err(Error::NoStationaryState { .. })));
    }

    #[test]
    fn friction_scales_with_delay() {
        let (rb, beam) = fig2a();
        let x = rb.wavelength() / 16.0;
        let a = friction_std(x, &rb, &beam).unwrap();
        let b = friction_std(x, &rb, &beam.with_mirror_distance(6.0).unwrap()).unwrap();
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-12);
    }

    #[test]
    fn diffusion_values_and_bounds() {
        let (rb, beam) = fig2a();
        let d0 = diffusion(0.0, &rb, &beam).unwrap();
        let k = rb.wavenumber();
        assert_relative_eq!(d0, HBAR * HBAR * k * k * rb.gamma() * 0.1, max_relative = 1e-14);
        // hand evaluation ≈ 1.37e-48
        assert_relative_eq!(d0, 1.371e-48, max_relative = 2e-3);
        let d_anti = diffusion(0.5 * PI / k, &rb, &beam).unwrap();
        assert_relative_eq!(d_anti, 0.4 * d0, max_relative = 1e-12);
        for i in 0..1000 {
            let x = i as f64 * rb.wavelength() / 1000.0;
            let d = diffusion(x, &rb, &beam).unwrap();
            assert!(d <= d0 * (1.0 + 1e-12) && d >= 0.4 * d0 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn temperature_closed_form() {
        let (rb, beam) = fig2a();
        let k = rb.wavenumber();
        for i in 1..40 {
            let x = i as f64 * rb.wavelength() / 8.0 / 40.0;
            let t = stationary_temperature(x, &rb, &beam).unwrap();
            let (s, c) = (k * x).sin_cos();
            let closed = HBAR / (K_B * beam.delay()) / (2.0 * beam.area_ratio(&rb))
                * (c * c + 0.4 * s * s)
                / (4.0 * k * x).sin();
            assert_relative_eq!(t, closed, max_relative = 1e-12);
            let gamma = friction_std(x, &rb, &beam).unwrap();
            let d = diffusion(x, &rb, &beam).unwrap();
            assert_relative_eq!(t * K_B * gamma, d, max_relative = 1e-13);
        }
    }

    #[test]
    fn temperature_independent_of_saturation_and_detuning() {
        let (rb, beam) = fig2a();
        let x = rb.wavelength() / 14.0;
        let t1 = stationary_temperature(x, &rb, &beam.with_saturation(0.05).unwrap()).unwrap();
        let t2 = stationary_temperature(x, &rb, &beam.with_saturation(0.2).unwrap()).unwrap();
        let t3 = stationary_temperature(x, &rb, &beam.with_detuning(2.0 * beam.detuning()).unwrap()).unwrap();
        let t0 = stationary_temperature(x, &rb, &beam).unwrap();
        assert_relative_eq!(t1, t2, max_relative = 1e-12);
        assert_relative_eq!(t0, t3, max_relative = 1e-12);
    }

    #[test]
    fn min_temperature_at_three_metres_is_millikelvin_scale() {
        let (rb, beam) = fig2a();
        let offsets: Vec<f64> = (1..2000).map(|i| i as f64 * rb.wavelength() / 8.0 / 2000.0).collect();
        let profile = temperature_profile(3.0, &offsets, &rb, &beam, false).unwrap();
        let (_, t_min) = profile.minimum().unwrap();
        assert!((0.3e-3..=3e-3).contains(&t_min), "{t_min}");
    }

    #[test]
    fn approximate_temperature_for_trapped_geometry() {
        let rb = rubidium_preset();
        let beam = presets::trapped_beam(&rb, 26.5e-9);
        // ħπw²/(4σ_aΓτ)·Γ/k_B evaluated by hand: 0.382 mK
        let t = temperature_at_max_friction_approx(&rb, &beam);
        assert_relative_eq!(t, 0.382e-3, max_relative = 5e-3);
    }

    #[test]
    fn max_friction_position_examples() {
        let rb = rubidium_preset();
        let lambda = rb.wavelength();
        assert_relative_eq!(max_friction_position(0.0, &rb), lambda / 16.0, max_relative = 1e-12);
        let x = max_friction_position(3.0, &rb);
        assert!((x - 3.0).abs() <= lambda / 8.0);
        assert!(((4.0 * rb.wavenumber() * x).sin() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn max_friction_position_beats_grid_search() {
        let (rb, beam) = fig2a();
        let near = 0.37e-6;
        let x_max = max_friction_position(near, &rb);
        let g_max = friction_std(x_max, &rb, &beam).unwrap();
        let quarter = rb.wavelength() / 4.0;
        let best = (0..1000)
            .map(|i| near - quarter + 2.0 * quarter * i as f64 / 999.0)
            .map(|x| friction_std(x, &rb, &beam).unwrap())
            .fold(f64::MIN, f64::max);
        assert!(g_max >= best * (1.0 - 1e-12));
    }

    #[test]
    fn profile_shape() {
        let (rb, beam) = fig2a();
        let lambda = rb.wavelength();
        let xc = max_friction_position(3.0, &rb);
        let p = friction_profile(xc, lambda, 4001, &rb, &beam).unwrap();
        assert_eq!(p.positions.len(), 4001);
        assert_eq!(p.gamma_over_m.len(), p.pump_intensity.len());
        let peak = p.gamma_over_m.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
        assert_relative_eq!(peak, 360.7, max_relative = 2e-3);
        // sign changes: four full periods of sin(4kx)
        let changes = p.gamma_over_m.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
        assert_eq!(changes, 8);
        // friction vanishes where the pump intensity is extremal
        for x in [0.0, lambda / 4.0, lambda / 2.0] {
            let k = rb.wavenumber();
            let gx = CoolingCoefficients::new(&rb, &beam).friction(x);
            assert!(gx.abs() < 1e-9 * CoolingCoefficients::new(&rb, &beam).friction_amplitude());
            assert!((2.0 * k * x).sin().abs() < 1e-12);
        }
        assert!(friction_profile(xc, lambda, 1, &rb, &beam).is_err());
    }

    #[test]
    fn sign_regions_are_an_eighth_wavelength_wide() {
        let (rb, beam) = fig2a();
        let lambda = rb.wavelength();
        let p = friction_profile(0.5 * lambda, lambda, 8001, &rb, &beam).unwrap();
        let zeros: Vec<f64> = p
            .positions
            .windows(2)
            .zip(p.gamma_over_m.windows(2))
            .filter(|(_, g)| g[0].signum() != g[1].signum() && g[1] != 0.0)
            .map(|(x, _)| x[0])
            .collect();
        for pair in zeros.windows(2) {
            assert!((pair[1] - pair[0] - lambda / 8.0).abs() < 2.0 * lambda / 8000.0);
        }
    }

    #[test]
    fn temperature_profile_scales_inverse_with_distance() {
        let (rb, beam) = fig2a();
        let offsets: Vec<f64> = (0..50).map(|i| (i as f64 - 10.0) * rb.wavelength() / 400.0).collect();
        let near = temperature_profile(1.0, &offsets, &rb, &beam, false).unwrap();
        let far = temperature_profile(10.0, &offsets, &rb, &beam, false).unwrap();
        for (a, b) in near.temperature.iter().zip(&far.temperature) {
            match (a, b) {
                (Some(a), Some(b)) => assert_relative_eq!(*b, 0.1 * a, max_relative = 1e-12),
                (None, None) => {}
                _ => panic!("stationarity must not depend on distance"),
            }
        }
        assert!(temperature_profile(1.0, &[0.3 * rb.wavelength()], &rb, &beam, false).is_err());
    }

    #[test]
    fn trapped_correction_is_a_constant_factor() {
        let (rb, beam) = fig2a();
        let offsets = [rb.wavelength() / 16.0, rb.wavelength() / 20.0];
        let a = temperature_profile(3.0, &offsets, &rb, &beam, false).unwrap();
        let b = temperature_profile(3.0, &offsets, &rb, &beam, true).unwrap();
        for (a, b) in a.temperature.iter().zip(&b.temperature) {
            assert_relative_eq!(b.unwrap(), TURNING_POINT_FACTOR * a.unwrap(), max_relative = 1e-14);
        }
    }

    #[test]
    fn corrected_profile_brackets_quoted_trapped_values() {
        // Brute-force search for the node offsets at which the corrected
        // closed form reaches the quoted trapped-atom temperatures.
        let rb = rubidium_preset();
        let offsets: Vec<f64> = (1..20000).map(|i| i as f64 * rb.wavelength() / 8.0 / 20000.0).collect();
        for ((_, delay), target) in [(presets::SET_A, 0.58e-3), (presets::SET_B, 0.30e-3)] {
            let beam = presets::trapped_beam(&rb, delay);
            let p = temperature_profile(beam.mirror_distance(), &offsets, &rb, &beam, true).unwrap();
            let (_, t_min) = p.minimum().unwrap();
            assert!(t_min < target, "minimum {t_min} above {target}");
            let crossings = p
                .temperature
                .windows(2)
                .filter(|w| (w[0].unwrap() - target).signum() != (w[1].unwrap() - target).signum())
                .count();
            assert_eq!(crossings, 2);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn raw_standard_equivalence(
                ratio in 1e-3f64..0.5,
                s in 1e-3f64..0.9,
                delta_over_gamma in 10.0f64..1e3,
                x in 0.1f64..20.0,
            ) {
                let rb = rubidium_preset();
                let beam = BeamConfig::from_area_ratio(&rb, ratio, s, -delta_over_gamma * rb.gamma(), x).unwrap();
                let g = beam.coupling(&rb);
                let a2 = beam.pump_flux(&rb);
                let raw = friction_raw(x, g, a2, beam.detuning(), &rb).unwrap();
                let std = friction_std(x, &rb, &beam).unwrap();
                let scale = CoolingCoefficients::new(&rb, &beam).friction_amplitude();
                prop_assert!((raw - std).abs() <= 1e-10 * scale);
            }

            #[test]
            fn friction_has_quarter_wavelength_period(offset in -1e-6f64..1e-6) {
                let rb = rubidium_preset();
                let beam = presets::friction_profile_beam(&rb);
                let c = CoolingCoefficients::new(&rb, &beam);
                let a = c.friction(offset);
                let b = c.friction(offset + rb.wavelength() / 4.0);
                prop_assert!((a - b).abs() <= 1e-9 * c.friction_amplitude());
                // antisymmetric about a node
                prop_assert!((c.friction(-offset) + a).abs() <= 1e-12 * c.friction_amplitude());
            }

            #[test]
            fn temperature_invariant_under_saturation_scaling(c in 0.01f64..50.0, frac in 0.01f64..0.99) {
                let rb = rubidium_preset();
                let beam = presets::friction_profile_beam(&rb);
                let x = frac * rb.wavelength() / 8.0;
                let t0 = stationary_temperature(x, &rb, &beam).unwrap();
                let t1 = stationary_temperature(x, &rb, &beam.with_saturation(c * 0.1).unwrap()).unwrap();
                prop_assert!((t0 - t1).abs() <= 1e-12 * t0);
            }
        }
    }
}
