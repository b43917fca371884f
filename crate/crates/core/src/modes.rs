//! Mode-resolved semiclassical backend: a two-level atom, excited state
//! adiabatically eliminated, coupled to a uniform grid of half-space modes.
//!
//! Frame rotating at the pump frequency ω₀. Positions are measured from a
//! field node a distance L = cτ/2 from the mirror, so the mode functions are
//! u_j(x) = sin(ν_j τ/2 + ω_j x/c) with ν_j = ω_j − ω₀. The pump is a fixed
//! external standing wave A·sin(kx); the grid carries scattered light only.
//!
//! σ = −i g E/(Δ + iΓ), E = A sin(kx) + √δω Σ u_j a_j
//! da_j/dt = −iν_j a_j + g √δω u_j σ
//! F = −2ħg Im(σ* ∂ₓE)

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::CoolingCoefficients;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::model::{AtomSpecies, BeamConfig, HBAR, SPEED_OF_LIGHT};

/// Bandwidth must resolve the delay: N·δω ≥ this / τ.
pub const MIN_BANDWIDTH_DELAY_PRODUCT: f64 = 20.0;
/// dt·max|ν_j| may not exceed this.
pub const MAX_STEP_FRACTION: f64 = 0.1;
/// Relative agreement required between full- and inner-window friction.
pub const CONVERGENCE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeConfig {
    /// Odd number of grid modes.
    pub n_modes: usize,
    /// Revival horizon 2π/δω in units of τ.
    pub revival_over_delay: f64,
    /// Transient discarded before averaging, in units of τ.
    pub settle_over_delay: f64,
    /// Force-averaging window, in units of τ.
    pub window_over_delay: f64,
    /// Drag velocity, m/s.
    pub probe_velocity: f64,
    /// dt·max|ν_j|.
    pub step_fraction: f64,
    /// Replaces the beam's coupling g (rad/s per √mode) when set.
    pub coupling: Option<f64>,
}

impl Default for ModeConfig {
    fn default() -> Self {
        Self {
            n_modes: 41,
            revival_over_delay: 8.0,
            settle_over_delay: 3.0,
            window_over_delay: 2.0,
            probe_velocity: 0.05,
            step_fraction: 0.05,
            coupling: None,
        }
    }
}

impl ModeConfig {
    pub fn mode_spacing(&self, delay: f64) -> f64 {
        2.0 * PI / (self.revival_over_delay * delay)
    }

    pub fn bandwidth(&self, delay: f64) -> f64 {
        self.n_modes as f64 * self.mode_spacing(delay)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 || self.n_modes % 2 == 0 {
            return Err(Error::invalid("modes.n_modes", format!("must be odd, got {}", self.n_modes)));
        }
        ensure_positive("modes.revival_over_delay", self.revival_over_delay)?;
        ensure_positive("modes.settle_over_delay", self.settle_over_delay)?;
        ensure_positive("modes.window_over_delay", self.window_over_delay)?;
        ensure_positive("modes.probe_velocity", self.probe_velocity)?;
        ensure_positive("modes.step_fraction", self.step_fraction)?;
        if let Some(g) = self.coupling {
            ensure_finite("modes.coupling", g)?;
        }
        // B·τ = 2π N / revival_over_delay
        let bandwidth_delay = 2.0 * PI * self.n_modes as f64 / self.revival_over_delay;
        if bandwidth_delay < MIN_BANDWIDTH_DELAY_PRODUCT {
            return Err(Error::invalid(
                "modes.n_modes",
                format!("bandwidth*tau = {bandwidth_delay:.3} is below {MIN_BANDWIDTH_DELAY_PRODUCT}"),
            ));
        }
        if self.settle_over_delay + self.window_over_delay >= self.revival_over_delay {
            return Err(Error::invalid(
                "modes.revival_over_delay",
                format!(
                    "revival horizon {} tau must exceed settle + window = {} tau",
                    self.revival_over_delay,
                    self.settle_over_delay + self.window_over_delay
                ),
            ));
        }
        if self.step_fraction > MAX_STEP_FRACTION {
            return Err(Error::invalid("modes.step_fraction", format!("must be <= {MAX_STEP_FRACTION}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    detunings: Vec<f64>,
    wavenumbers: Vec<f64>,
    phases: Vec<f64>,
    amplitudes: Vec<Complex64>,
    mode_spacing: f64,
    sqrt_spacing: f64,
    coupling: f64,
    pump: f64,
    wavenumber: f64,
    detuning: f64,
    linewidth: f64,
    u: Vec<f64>,
    du: Vec<f64>,
}

impl ModeSet {
    /// Empty grid of `n_modes` (odd) modes of spacing `mode_spacing` centred
    /// on the pump. `pump_flux` is |A|², `delay` the round trip from the node.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        species: &AtomSpecies,
        n_modes: usize,
        mode_spacing: f64,
        coupling: f64,
        pump_flux: f64,
        detuning: f64,
        delay: f64,
    ) -> Result<Self> {
        if n_modes == 0 || n_modes % 2 == 0 {
            return Err(Error::invalid("modes.n_modes", format!("must be odd, got {n_modes}")));
        }
        ensure_positive("modes.mode_spacing", mode_spacing)?;
        ensure_finite("modes.coupling", coupling)?;
        ensure_finite("modes.pump_flux", pump_flux)?;
        ensure_positive("modes.delay", delay)?;
        if pump_flux < 0.0 {
            return Err(Error::invalid("modes.pump_flux", "must be >= 0"));
        }
        if detuning == 0.0 || !detuning.is_finite() {
            return Err(Error::invalid("modes.detuning", "must be finite and non-zero"));
        }
        let k = species.wavenumber();
        let half = (n_modes / 2) as f64;
        let detunings: Vec<f64> = (0..n_modes).map(|j| (j as f64 - half) * mode_spacing).collect();
        let wavenumbers = detunings.iter().map(|nu| k + nu / SPEED_OF_LIGHT).collect();
        let phases = detunings.iter().map(|nu| 0.5 * nu * delay).collect();
        Ok(Self {
            detunings,
            wavenumbers,
            phases,
            amplitudes: vec![Complex64::new(0.0, 0.0); n_modes],
            mode_spacing,
            sqrt_spacing: mode_spacing.sqrt(),
            coupling,
            pump: pump_flux.sqrt(),
            wavenumber: k,
            detuning,
            linewidth: species.gamma(),
            u: vec![0.0; n_modes],
            du: vec![0.0; n_modes],
        })
    }

    /// Grid for `cfg` with g, |A|², Δ and τ taken from the beam.
    pub fn for_beam(species: &AtomSpecies, beam: &BeamConfig, cfg: &ModeConfig) -> Result<Self> {
        cfg.validate()?;
        let g = cfg.coupling.unwrap_or_else(|| beam.coupling(species));
        Self::new(
            species,
            cfg.n_modes,
            cfg.mode_spacing(beam.delay()),
            g,
            beam.pump_flux(species),
            beam.detuning(),
            beam.delay(),
        )
    }

    /// Overrides the atomic half-linewidth Γ (Γ = 0 makes the coupling unitary).
    pub fn with_linewidth(mut self, linewidth: f64) -> Result<Self> {
        ensure_finite("modes.linewidth", linewidth)?;
        self.linewidth = linewidth;
        Ok(self)
    }

    pub fn with_pump_flux(mut self, pump_flux: f64) -> Result<Self> {
        ensure_finite("modes.pump_flux", pump_flux)?;
        self.pump = pump_flux.max(0.0).sqrt();
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn set_amplitudes(&mut self, amplitudes: &[Complex64]) -> Result<()> {
        if amplitudes.len() != self.len() {
            return Err(Error::invalid("modes.amplitudes", format!("expected {} values", self.len())));
        }
        self.amplitudes.copy_from_slice(amplitudes);
        Ok(())
    }

    pub fn mode_spacing(&self) -> f64 {
        self.mode_spacing
    }

    pub fn bandwidth(&self) -> f64 {
        self.len() as f64 * self.mode_spacing
    }

    pub fn max_detuning(&self) -> f64 {
        self.detunings.iter().fold(0.0f64, |m, nu| m.max(nu.abs()))
    }

    /// Largest step allowed by the rotation of the outermost mode.
    pub fn max_step(&self) -> f64 {
        let nu = self.max_detuning();
        if nu > 0.0 {
            MAX_STEP_FRACTION / nu
        } else {
            f64::INFINITY
        }
    }

    pub fn photon_number(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn fill_mode_functions(&mut self, x: f64) {
        for j in 0..self.len() {
            let (s, c) = (self.phases[j] + self.wavenumbers[j] * x).sin_cos();
            self.u[j] = s;
            self.du[j] = self.wavenumbers[j] * c;
        }
    }

    fn local_field(&self, amplitudes: &[Complex64], x: f64) -> (Complex64, Complex64) {
        let (s, c) = (self.wavenumber * x).sin_cos();
        let mut e = Complex64::new(0.0, 0.0);
        let mut grad = Complex64::new(0.0, 0.0);
        for ((a, u), du) in amplitudes.iter().zip(&self.u).zip(&self.du) {
            e += a * u;
            grad += a * du;
        }
        (self.pump * s + self.sqrt_spacing * e, self.pump * self.wavenumber * c + self.sqrt_spacing * grad)
    }

    fn dipole(&self, field: Complex64) -> Complex64 {
        Complex64::new(0.0, -self.coupling) * field / Complex64::new(self.detuning, self.linewidth)
    }

    /// Scattered part of the local field, √δω Σ u_j a_j.
    pub fn scattered_field(&mut self, x: f64) -> Complex64 {
        self.fill_mode_functions(x);
        let (e, _) = self.local_field(&self.amplitudes, x);
        e - self.pump * (self.wavenumber * x).sin()
    }

    /// Eliminated atomic coherence at `x` for the current amplitudes.
    pub fn coherence(&mut self, x: f64) -> Complex64 {
        self.fill_mode_functions(x);
        let (e, _) = self.local_field(&self.amplitudes, x);
        self.dipole(e)
    }

    /// Instantaneous force on an atom at `x`.
    pub fn force(&mut self, x: f64) -> f64 {
        self.fill_mode_functions(x);
        let (e, grad) = self.local_field(&self.amplitudes, x);
        -2.0 * HBAR * self.coupling * (self.dipole(e).conj() * grad).im
    }

    /// Σν_j|a_j|² + (g²/Δ)|E_scattered|²: conserved when Γ = 0, the pump is
    /// off and the atom is at rest.
    pub fn effective_energy(&mut self, x: f64) -> f64 {
        let e = self.scattered_field(x);
        let field: f64 = self.detunings.iter().zip(&self.amplitudes).map(|(nu, a)| nu * a.norm_sqr()).sum();
        field + self.coupling * self.coupling / self.detuning * e.norm_sqr()
    }

    fn rhs(&mut self, amplitudes: &[Complex64], x: f64, out: &mut [Complex64]) {
        self.fill_mode_functions(x);
        let (e, _) = self.local_field(amplitudes, x);
        let drive = self.coupling * self.sqrt_spacing * self.dipole(e);
        for j in 0..amplitudes.len() {
            out[j] = Complex64::new(0.0, -self.detunings[j]) * amplitudes[j] + drive * self.u[j];
        }
    }

    /// RK4 step of the mode amplitudes while the atom moves from `x` at
    /// constant velocity `v`. Returns the force at the end of the step.
    pub fn evolve(&mut self, x: f64, v: f64, dt: f64) -> Result<f64> {
        ensure_positive("modes.dt", dt)?;
        if dt > self.max_step() * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "modes.dt",
                format!("{dt:e} s exceeds 0.1/max|nu| = {:e} s", self.max_step()),
            ));
        }
        let n = self.len();
        let a0 = self.amplitudes.clone();
        let mut k1 = vec![Complex64::new(0.0, 0.0); n];
        let mut k2 = k1.clone();
        let mut k3 = k1.clone();
        let mut k4 = k1.clone();
        let mut tmp = k1.clone();
        let half = 0.5 * dt;
        self.rhs(&a0, x, &mut k1);
        for j in 0..n {
            tmp[j] = a0[j] + half * k1[j];
        }
        self.rhs(&tmp, x + v * half, &mut k2);
        for j in 0..n {
            tmp[j] = a0[j] + half * k2[j];
        }
        self.rhs(&tmp, x + v * half, &mut k3);
        for j in 0..n {
            tmp[j] = a0[j] + dt * k3[j];
        }
        self.rhs(&tmp, x + v * dt, &mut k4);
        for j in 0..n {
            self.amplitudes[j] = a0[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        Ok(self.force(x + v * dt))
    }
}

/// Axial projection u = cos θ of a spontaneously emitted photon, drawn from
/// (3/8)(1 + u²) on [−1, 1] by rejection. ⟨u²⟩ = 2/5.
pub fn emission_projection<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random_range(-1.0..=1.0);
        let y: f64 = rng.random_range(0.0..2.0);
        if y <= 1.0 + u * u {
            return u;
        }
    }
}

/// Momentum kick from spontaneous scattering during `dt` at local saturation
/// `local_saturation`: with probability 2Γ·s·dt, one absorbed photon ±ħk (the
/// standing wave holds both running components equally) plus one emitted
/// photon projected on the axis.
pub fn spontaneous_recoil<R: Rng + ?Sized>(
    species: &AtomSpecies,
    local_saturation: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    ensure_finite("local_saturation", local_saturation)?;
    ensure_positive("dt", dt)?;
    let probability = 2.0 * species.gamma() * local_saturation.max(0.0) * dt;
    if probability > MAX_STEP_FRACTION {
        return Err(Error::invalid("dt", format!("scattering probability {probability:e} per step is not small")));
    }
    if probability == 0.0 || rng.random::<f64>() >= probability {
        return Ok(0.0);
    }
    let hk = species.recoil_momentum();
    let absorbed = if rng.random::<bool>() { hk } else { -hk };
    Ok(absorbed + hk * emission_projection(rng))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionEstimate {
    /// From the full averaging window, kg/s.
    pub gamma_eff: f64,
    /// From the central half of the window, kg/s.
    pub gamma_inner: f64,
    /// Closed-form value at the same position, kg/s.
    pub gamma_analytic: f64,
}

impl FrictionEstimate {
    pub fn ratio(&self) -> f64 {
        self.gamma_eff / self.gamma_analytic
    }
}

/// Time-averaged force while dragging through `x` at velocity `v`: the window
/// is centred on the crossing, so ±v windows cover identical positions.
fn dragged_force(x: f64, v: f64, modes: &mut ModeSet, cfg: &ModeConfig, delay: f64) -> Result<(f64, f64)> {
    let dt = cfg.step_fraction / modes.max_detuning();
    let n_settle = (cfg.settle_over_delay * delay / dt).ceil() as usize;
    let mut n_window = (cfg.window_over_delay * delay / dt).ceil() as usize;
    n_window += (4 - n_window % 4) % 4;
    let window = n_window as f64 * dt;
    let start = x - v * (n_settle as f64 * dt + 0.5 * window);
    let inner = (n_window / 4, 3 * n_window / 4);

    let (mut full_sum, mut inner_sum) = (0.0, 0.0);
    let mut force = modes.force(start);
    let total = n_settle + n_window;
    for n in 0..=total {
        if n >= n_settle {
            let i = n - n_settle;
            let w = if i == 0 || i == n_window { 0.5 } else { 1.0 };
            full_sum += w * force;
            if i >= inner.0 && i <= inner.1 {
                let w = if i == inner.0 || i == inner.1 { 0.5 } else { 1.0 };
                inner_sum += w * force;
            }
        }
        if n < total {
            force = modes.evolve(start + v * n as f64 * dt, v, dt)?;
        }
    }
    Ok((full_sum / n_window as f64, inner_sum / (inner.1 - inner.0) as f64))
}

/// Dragged-atom friction γ_eff = −(⟨F(+v)⟩ − ⟨F(−v)⟩)/(2v), noise free.
pub fn extract_friction(
    x: f64,
    species: &AtomSpecies,
    beam: &BeamConfig,
    cfg: &ModeConfig,
) -> Result<FrictionEstimate> {
    ensure_finite("x", x)?;
    let v = cfg.probe_velocity;
    let template = ModeSet::for_beam(species, beam, cfg)?;
    let delay = beam.delay();
    let (plus_full, plus_inner) = dragged_force(x, v, &mut template.clone(), cfg, delay)?;
    let (minus_full, minus_inner) = dragged_force(x, -v, &mut template.clone(), cfg, delay)?;
    let coeffs = CoolingCoefficients::new(species, beam);
    let g_scale = cfg.coupling.map_or(1.0, |g| (g / beam.coupling(species)).powi(4));
    let estimate = FrictionEstimate {
        gamma_eff: -(plus_full - minus_full) / (2.0 * v),
        gamma_inner: -(plus_inner - minus_inner) / (2.0 * v),
        gamma_analytic: g_scale * coeffs.friction(x),
    };
    let scale = estimate.gamma_eff.abs().max(g_scale * coeffs.friction_amplitude());
    if (estimate.gamma_eff - estimate.gamma_inner).abs() > CONVERGENCE_TOLERANCE * scale {
        return Err(Error::NotConverged { full: estimate.gamma_eff, inner: estimate.gamma_inner });
    }
    Ok(estimate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayResponse {
    /// Time since the displacement, s.
    pub times: Vec<f64>,
    pub force: Vec<f64>,
    /// Time of the steepest force change after the initial jump, s.
    pub feature_time: f64,
    /// 2π/B, the timing resolution of the grid, s.
    pub resolution: f64,
}

/// Holds a static atom at `from` until the field is stationary, moves it
/// instantly to `to`, and records the force for two delays afterwards.
pub fn delay_response(
    from: f64,
    to: f64,
    species: &AtomSpecies,
    beam: &BeamConfig,
    cfg: &ModeConfig,
) -> Result<DelayResponse> {
    let mut modes = ModeSet::for_beam(species, beam, cfg)?;
    let delay = beam.delay();
    let dt = cfg.step_fraction / modes.max_detuning();
    let n_settle = (cfg.settle_over_delay * delay / dt).ceil() as usize;
    for _ in 0..n_settle {
        modes.evolve(from, 0.0, dt)?;
    }
    let n_after = (2.0 * delay / dt).ceil() as usize;
    let mut times = Vec::with_capacity(n_after + 1);
    let mut force = Vec::with_capacity(n_after + 1);
    times.push(0.0);
    force.push(modes.force(to));
    for n in 1..=n_after {
        force.push(modes.evolve(to, 0.0, dt)?);
        times.push(n as f64 * dt);
    }
    // skip the first quarter delay, where the prompt local response settles
    let skip = (0.25 * delay / dt).ceil() as usize;
    let (mut best, mut feature_time) = (0.0, f64::NAN);
    for i in skip.max(1)..force.len() {
        let slope = (force[i] - force[i - 1]).abs();
        if slope > best {
            best = slope;
            feature_time = 0.5 * (times[i] + times[i - 1]);
        }
    }
    Ok(DelayResponse { times, force, feature_time, resolution: 2.0 * PI / modes.bandwidth() })
}
