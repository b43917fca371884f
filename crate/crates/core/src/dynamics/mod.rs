//! Langevin dynamics of one trapped particle with retarded friction.
//!
//! Positions are node-relative (the standing-wave phase), so the trap centre
//! is `trap.center_offset` and γ, D come from [`CoolingCoefficients`] of the
//! configured beam, whose mirror distance fixes the delay τ.

mod history;

pub use history::{HistoryBuffer, HistorySample};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analytic::CoolingCoefficients;
use crate::error::{ensure_positive, Error, Result};
use crate::model::{AtomSpecies, BeamConfig, TrapConfig, HBAR};

/// Largest allowed step as a fraction of the trap period.
pub const MAX_STEP_PER_PERIOD: f64 = 1.0 / 50.0;
/// Largest allowed step as a fraction of the delay, in delayed mode.
pub const MAX_STEP_PER_DELAY: f64 = 1.0 / 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomState {
    pub position: f64,
    pub momentum: f64,
    pub time: f64,
}

impl AtomState {
    pub fn new(position: f64, momentum: f64, time: f64) -> Self {
        Self { position, momentum, time }
    }

    pub fn velocity(&self, mass: f64) -> f64 {
        self.momentum / mass
    }

    pub fn kinetic_energy(&self, mass: f64) -> f64 {
        0.5 * self.momentum * self.momentum / mass
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.momentum.is_finite() && self.time.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionMode {
    Instantaneous,
    #[default]
    Delayed,
}

/// Where γ and D are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CoefficientModel {
    /// At the particle's instantaneous position.
    #[default]
    Local,
    /// At the trap centre, the tight-confinement limit.
    TrapCenter,
    /// Fixed values (kg/s and kg²m²/s³), for oracle tests.
    Constant { friction: f64, diffusion: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    pub species: AtomSpecies,
    pub beam: BeamConfig,
    pub trap: TrapConfig,
    pub dt: f64,
    pub friction_mode: FrictionMode,
    pub dipole_force: bool,
    pub duration: f64,
    pub coefficients: CoefficientModel,
}

impl DynamicsConfig {
    /// Configuration with the step chosen by [`suggested_dt`] at
    /// `steps_per_period` and the remaining switches at their defaults.
    pub fn new(species: AtomSpecies, beam: BeamConfig, trap: TrapConfig, duration: f64) -> Result<Self> {
        let dt = suggested_dt(&beam, &trap, FrictionMode::Delayed, 256)?;
        let cfg = Self {
            species,
            beam,
            trap,
            dt,
            friction_mode: FrictionMode::Delayed,
            dipole_force: false,
            duration,
            coefficients: CoefficientModel::Local,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.trap.validate(&self.species)?;
        ensure_positive("dynamics.dt", self.dt)?;
        ensure_positive("dynamics.duration", self.duration)?;
        if self.trap.enabled && self.dt > MAX_STEP_PER_PERIOD * self.trap.period() * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "dynamics.dt",
                format!("{:e} s exceeds 1/(50 nu_trap) = {:e} s", self.dt, MAX_STEP_PER_PERIOD * self.trap.period()),
            ));
        }
        if self.friction_mode == FrictionMode::Delayed
            && self.dt > MAX_STEP_PER_DELAY * self.beam.delay() * (1.0 + 1e-12)
        {
            return Err(Error::invalid(
                "dynamics.dt",
                format!("{:e} s exceeds tau/10 = {:e} s", self.dt, MAX_STEP_PER_DELAY * self.beam.delay()),
            ));
        }
        if self.duration < 10.0 * self.dt {
            return Err(Error::invalid("dynamics.duration", "must be at least 10 dt"));
        }
        if let CoefficientModel::Constant { friction, diffusion } = self.coefficients {
            if !friction.is_finite() || !diffusion.is_finite() || diffusion < 0.0 {
                return Err(Error::invalid("dynamics.coefficients", "need finite friction and diffusion >= 0"));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// Largest step of the form period/n (n integer, n ≥ `min_steps_per_period`)
/// that satisfies the step limits. Without a trap the delay alone sets it.
pub fn suggested_dt(
    beam: &BeamConfig,
    trap: &TrapConfig,
    mode: FrictionMode,
    min_steps_per_period: usize,
) -> Result<f64> {
    let delay_limit = match mode {
        FrictionMode::Delayed => MAX_STEP_PER_DELAY * beam.delay(),
        FrictionMode::Instantaneous => f64::INFINITY,
    };
    if !trap.enabled {
        return if delay_limit.is_finite() {
            Ok(delay_limit)
        } else {
            Err(Error::invalid("dynamics.dt", "no trap and no delay: choose dt explicitly"))
        };
    }
    ensure_positive("trap.frequency", trap.frequency)?;
    let period = trap.period();
    let n_min = (min_steps_per_period as f64).max(1.0 / MAX_STEP_PER_PERIOD);
    let n = n_min.max((period / delay_limit).ceil());
    Ok(period / n)
}

/// Standard-normal draws for the diffusion term.
pub trait NoiseSource {
    fn next_normal(&mut self) -> f64;
}

#[derive(Debug, Clone)]
pub struct GaussianNoise {
    rng: ChaCha8Rng,
}

impl GaussianNoise {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn from_rng(rng: ChaCha8Rng) -> Self {
        Self { rng }
    }
}

impl NoiseSource for GaussianNoise {
    fn next_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

/// Sums `factor` draws of the inner source and rescales to unit variance, so a
/// run at step `factor·dt` sees the same Brownian path as a run at `dt`.
#[derive(Debug, Clone)]
pub struct CoarseGrainedNoise<N> {
    inner: N,
    factor: usize,
    scale: f64,
}

impl<N: NoiseSource> CoarseGrainedNoise<N> {
    pub fn new(inner: N, factor: usize) -> Self {
        let factor = factor.max(1);
        Self { inner, factor, scale: 1.0 / (factor as f64).sqrt() }
    }
}

impl<N: NoiseSource> NoiseSource for CoarseGrainedNoise<N> {
    fn next_normal(&mut self) -> f64 {
        (0..self.factor).map(|_| self.inner.next_normal()).sum::<f64>() * self.scale
    }
}

/// Zero noise, for deterministic runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoNoise;

impl NoiseSource for NoNoise {
    fn next_normal(&mut self) -> f64 {
        0.0
    }
}

/// Standing-wave dipole force −dU/dx for U = (ħΔ/2)·ln(1 + 2s·sin²kx).
pub fn dipole_force(x: f64, species: &AtomSpecies, beam: &BeamConfig) -> f64 {
    let k = species.wavenumber();
    let s = beam.saturation();
    let (sin, cos) = (k * x).sin_cos();
    -2.0 * HBAR * beam.detuning() * s * k * sin * cos / (1.0 + 2.0 * s * sin * sin)
}

pub fn dipole_potential(x: f64, species: &AtomSpecies, beam: &BeamConfig) -> f64 {
    let sin = (species.wavenumber() * x).sin();
    0.5 * HBAR * beam.detuning() * (2.0 * beam.saturation() * sin * sin).ln_1p()
}

/// Precomputed stepping state for one configuration.
#[derive(Debug, Clone)]
pub struct Integrator {
    cfg: DynamicsConfig,
    coeffs: CoolingCoefficients,
    mass: f64,
    inv_mass: f64,
    omega2: f64,
    center: f64,
    sqrt_dt: f64,
    fixed: Option<(f64, f64)>,
}

impl Integrator {
    pub fn new(cfg: DynamicsConfig) -> Result<Self> {
        cfg.validate()?;
        let coeffs = CoolingCoefficients::new(&cfg.species, &cfg.beam);
        let center = cfg.trap.center_offset;
        let fixed = match cfg.coefficients {
            CoefficientModel::Local => None,
            CoefficientModel::TrapCenter => Some((coeffs.friction(center), (2.0 * coeffs.diffusion(center)).sqrt())),
            CoefficientModel::Constant { friction, diffusion } => Some((friction, (2.0 * diffusion).sqrt())),
        };
        let omega2 = if cfg.trap.enabled { cfg.trap.angular_frequency().powi(2) } else { 0.0 };
        Ok(Self { mass: cfg.species.mass(), inv_mass: 1.0 / cfg.species.mass(), omega2, center, sqrt_dt: cfg.dt.sqrt(), fixed, coeffs, cfg })
    }

    pub fn config(&self) -> &DynamicsConfig {
        &self.cfg
    }

    fn friction(&self, x: f64) -> f64 {
        match self.fixed {
            Some((g, _)) => g,
            None => self.coeffs.friction(x),
        }
    }

    /// Noise amplitude √(2D).
    fn noise_amplitude(&self, x: f64) -> f64 {
        match self.fixed {
            Some((_, b)) => b,
            None => (2.0 * self.coeffs.diffusion(x)).sqrt(),
        }
    }

    fn conservative(&self, x: f64) -> f64 {
        let mut f = -self.mass * self.omega2 * (x - self.center);
        if self.cfg.dipole_force {
            f += dipole_force(x, &self.cfg.species, &self.cfg.beam);
        }
        f
    }

    /// Potential energy of the conservative forces (trap, plus dipole if on).
    pub fn potential_energy(&self, x: f64) -> f64 {
        let mut u = 0.5 * self.mass * self.omega2 * (x - self.center).powi(2);
        if self.cfg.dipole_force {
            u += dipole_potential(x, &self.cfg.species, &self.cfg.beam);
        }
        u
    }

    pub fn total_energy(&self, state: &AtomState) -> f64 {
        state.kinetic_energy(self.mass) + self.potential_energy(state.position)
    }

    fn retarded_velocity(&self, t: f64, history: &HistoryBuffer) -> Result<f64> {
        history.velocity_at(t - self.cfg.beam.delay())
    }

    /// Empty history sized for this configuration.
    pub fn new_history(&self) -> HistoryBuffer {
        HistoryBuffer::for_span(self.cfg.beam.delay(), self.cfg.dt)
    }

    /// One stochastic Heun step. The drift is averaged over predictor and
    /// corrector; the diffusion amplitude is taken at the start of the step.
    /// The position update uses the corrected momentum, which keeps the
    /// conservative limit symplectic. The new sample is appended to `history`.
    pub fn step(&self, state: &AtomState, history: &mut HistoryBuffer, noise: &mut impl NoiseSource) -> Result<AtomState> {
        let dt = self.cfg.dt;
        let (t0, x0, p0) = (state.time, state.position, state.momentum);
        let v0 = p0 * self.inv_mass;
        let delayed = self.cfg.friction_mode == FrictionMode::Delayed;

        let v_ret0 = if delayed { self.retarded_velocity(t0, history)? } else { v0 };
        let f0 = self.conservative(x0) - self.friction(x0) * v_ret0;
        let kick = self.noise_amplitude(x0) * self.sqrt_dt * noise.next_normal();

        let p_pred = p0 + f0 * dt + kick;
        let x_pred = x0 + v0 * dt;
        let v_ret1 = if delayed { self.retarded_velocity(t0 + dt, history)? } else { p_pred * self.inv_mass };
        let f1 = self.conservative(x_pred) - self.friction(x_pred) * v_ret1;

        let p1 = p0 + 0.5 * (f0 + f1) * dt + kick;
        let x1 = x0 + 0.5 * (p0 + p1) * self.inv_mass * dt;
        let next = AtomState::new(x1, p1, t0 + dt);
        history.push(next.time, next.position, p1 * self.inv_mass);
        Ok(next)
    }

    /// History for t ∈ [t₀ − span, t₀] from free harmonic motion through the
    /// initial state (straight-line motion without a trap).
    pub fn warmup(&self, initial: &AtomState) -> HistoryBuffer {
        let mut history = self.new_history();
        let n = history.capacity() - 1;
        let v0 = initial.momentum / self.mass;
        let dx0 = initial.position - self.center;
        let omega = self.omega2.sqrt();
        for j in (0..=n).rev() {
            let s = -(j as f64) * self.cfg.dt;
            let (x, v) = if omega > 0.0 {
                let (sn, cs) = (omega * s).sin_cos();
                (self.center + dx0 * cs + v0 / omega * sn, -dx0 * omega * sn + v0 * cs)
            } else {
                (initial.position + v0 * s, v0)
            };
            history.push(initial.time + s, x, v);
        }
        history
    }

    /// Runs for the configured duration, calling `observe` on the initial
    /// state and after every `stride`-th step.
    pub fn run(
        &self,
        initial: &AtomState,
        noise: &mut impl NoiseSource,
        stride: usize,
        mut observe: impl FnMut(usize, &AtomState),
    ) -> Result<AtomState> {
        let stride = stride.max(1);
        let mut history = self.warmup(initial);
        let mut state = *initial;
        observe(0, &state);
        let (mut sample, mut countdown) = (0, stride);
        for _ in 0..self.cfg.n_steps() {
            state = self.step(&state, &mut history, noise)?;
            countdown -= 1;
            if countdown == 0 {
                sample += 1;
                countdown = stride;
                observe(sample, &state);
            }
        }
        Ok(state)
    }
}

/// Free-function form of [`Integrator::step`].
pub fn step(
    state: &AtomState,
    history: &mut HistoryBuffer,
    cfg: &DynamicsConfig,
    noise: &mut impl NoiseSource,
) -> Result<AtomState> {
    Integrator::new(*cfg)?.step(state, history, noise)
}

pub fn warmup(initial: &AtomState, cfg: &DynamicsConfig) -> Result<HistoryBuffer> {
    Ok(Integrator::new(*cfg)?.warmup(initial))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
    pub kinetic_energy: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn simulate_with_noise(
    initial: &AtomState,
    cfg: &DynamicsConfig,
    noise: &mut impl NoiseSource,
    stride: usize,
) -> Result<TrajectoryRecord> {
    let integrator = Integrator::new(*cfg)?;
    let mass = cfg.species.mass();
    let mut rec = TrajectoryRecord::default();
    integrator.run(initial, noise, stride, |_, s| {
        rec.times.push(s.time);
        rec.positions.push(s.position);
        rec.momenta.push(s.momentum);
        rec.kinetic_energy.push(s.kinetic_energy(mass));
    })?;
    Ok(rec)
}

/// Deterministic for a fixed seed: the noise is stream 0 of a ChaCha8
/// generator seeded with `seed`.
pub fn simulate_trajectory(
    initial: &AtomState,
    cfg: &DynamicsConfig,
    seed: u64,
    stride: usize,
) -> Result<TrajectoryRecord> {
    simulate_with_noise(initial, cfg, &mut GaussianNoise::new(seed, 0), stride)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, rubidium_preset, K_B};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn base(trap: TrapConfig, dt: f64, duration: f64, mode: FrictionMode, coeffs: CoefficientModel) -> DynamicsConfig {
        let rb = rubidium_preset();
        let (_, delay) = presets::SET_A;
        DynamicsConfig {
            species: rb,
            beam: presets::trapped_beam(&rb, delay),
            trap,
            dt,
            friction_mode: mode,
            dipole_force: false,
            duration,
            coefficients: coeffs,
        }
    }

    fn free_constant(gamma: f64, d: f64, dt: f64, duration: f64) -> DynamicsConfig {
        base(
            TrapConfig::disabled(0.0),
            dt,
            duration,
            FrictionMode::Instantaneous,
            CoefficientModel::Constant { friction: gamma, diffusion: d },
        )
    }

    #[test]
    fn step_limits_enforced() {
        let rb = rubidium_preset();
        let trap = TrapConfig::new(1.5e6, 0.0, &rb).unwrap();
        let period = trap.period();
        let ok = base(trap, period / 256.0, 1e-6, FrictionMode::Delayed, CoefficientModel::Local);
        assert!(ok.validate().is_ok());
        let coarse = DynamicsConfig { dt: period / 40.0, ..ok };
        assert!(coarse.validate().is_err());
        // τ/10 caps the delayed step only
        let tight = DynamicsConfig { dt: period / 100.0, ..ok };
        assert!(tight.validate().is_err());
        assert!(DynamicsConfig { friction_mode: FrictionMode::Instantaneous, ..tight }.validate().is_ok());
        assert!(DynamicsConfig { duration: 5.0 * ok.dt, ..ok }.validate().is_err());
    }

    #[test]
    fn suggested_dt_divides_period() {
        let rb = rubidium_preset();
        let beam = presets::trapped_beam(&rb, presets::SET_A.1);
        let trap = TrapConfig::new(presets::SET_A.0, 0.0, &rb).unwrap();
        let dt = suggested_dt(&beam, &trap, FrictionMode::Delayed, 256).unwrap();
        let n = trap.period() / dt;
        assert!((n - n.round()).abs() < 1e-9 && n >= 256.0);
        assert!(dt <= beam.delay() / 10.0);
        let dt = suggested_dt(&beam, &trap, FrictionMode::Delayed, 10).unwrap();
        assert!(dt <= beam.delay() / 10.0 * (1.0 + 1e-12));
    }

    #[test]
    fn energy_conserved_over_one_period() {
        let rb = rubidium_preset();
        let trap = TrapConfig::new(1.5e6, 0.0, &rb).unwrap();
        let dt = trap.period() / 500.0;
        let cfg = base(trap, dt, trap.period(), FrictionMode::Instantaneous, CoefficientModel::Constant { friction: 0.0, diffusion: 0.0 });
        let integ = Integrator::new(cfg).unwrap();
        let initial = AtomState::new(20e-9, 3e-2 * rb.mass(), 0.0);
        let e0 = integ.total_energy(&initial);
        let end = integ.run(&initial, &mut NoNoise, 1, |_, _| {}).unwrap();
        let drift = (integ.total_energy(&end) - e0).abs() / e0;
        assert!(drift < 1e-6, "{drift}");
    }

    #[test]
    fn dipole_force_is_potential_gradient() {
        let rb = rubidium_preset();
        let beam = presets::trapped_beam(&rb, 26.5e-9);
        let h = 1e-12;
        for i in 1..20 {
            let x = i as f64 * rb.wavelength() / 37.0;
            let fd = -(dipole_potential(x + h, &rb, &beam) - dipole_potential(x - h, &rb, &beam)) / (2.0 * h);
            assert_relative_eq!(dipole_force(x, &rb, &beam), fd, max_relative = 1e-5, epsilon = 1e-30);
        }
    }

    #[test]
    fn energy_conserved_with_dipole_force() {
        let rb = rubidium_preset();
        let trap = TrapConfig::new(1.5e6, rb.wavelength() / 16.0, &rb).unwrap();
        let dt = trap.period() / 500.0;
        let mut cfg = base(trap, dt, trap.period(), FrictionMode::Instantaneous, CoefficientModel::Constant { friction: 0.0, diffusion: 0.0 });
        cfg.dipole_force = true;
        let integ = Integrator::new(cfg).unwrap();
        let initial = AtomState::new(trap.center_offset + 20e-9, 0.02 * rb.mass(), 0.0);
        let e0 = integ.total_energy(&initial);
        let end = integ.run(&initial, &mut NoNoise, 1, |_, _| {}).unwrap();
        assert!((integ.total_energy(&end) - e0).abs() < 1e-4 * e0);
    }

    #[test]
    fn exponential_velocity_decay() {
        let rb = rubidium_preset();
        let gamma = 1e3 * rb.mass();
        let dt = 1e-6;
        let cfg = free_constant(gamma, 0.0, dt, 3e-3);
        let initial = AtomState::new(0.0, 0.1 * rb.mass(), 0.0);
        let rec = simulate_with_noise(&initial, &cfg, &mut NoNoise, 100).unwrap();
        for (t, p) in rec.times.iter().zip(&rec.momenta) {
            let exact = initial.momentum * (-gamma / rb.mass() * t).exp();
            assert_relative_eq!(*p, exact, max_relative = 1e-4);
        }
    }

    #[test]
    fn ornstein_uhlenbeck_equilibrium() {
        let rb = rubidium_preset();
        let rate = 5e3;
        let gamma = rate * rb.mass();
        let d = 1.4e-48;
        let dt = 0.01 / rate;
        let cfg = free_constant(gamma, d, dt, 20.0 / rate);
        let integ = Integrator::new(cfg).unwrap();
        let (mut sum, mut count) = (0.0, 0usize);
        let skip = (3.0 / rate / dt).round() as usize;
        for i in 0..200 {
            let mut noise = GaussianNoise::new(7, i);
            integ
                .run(&AtomState::new(0.0, 0.0, 0.0), &mut noise, 10, |j, s| {
                    if j * 10 >= skip {
                        sum += s.momentum * s.momentum / rb.mass();
                        count += 1;
                    }
                })
                .unwrap();
        }
        let kt = sum / count as f64;
        assert_relative_eq!(kt, d / gamma, max_relative = 0.05);
    }

    #[test]
    fn free_diffusion_grows_linearly() {
        let d = 1.4e-48;
        let dt = 1e-7;
        let duration = 1e-4;
        let cfg = free_constant(0.0, d, dt, duration);
        let integ = Integrator::new(cfg).unwrap();
        let n_traj = 500;
        let mut p2 = vec![0.0; (integ.config().n_steps() / 50) + 1];
        let mut times = vec![0.0; p2.len()];
        for i in 0..n_traj {
            integ
                .run(&AtomState::new(0.0, 0.0, 0.0), &mut GaussianNoise::new(11, i), 50, |j, s| {
                    p2[j] += s.momentum * s.momentum / n_traj as f64;
                    times[j] = s.time;
                })
                .unwrap();
        }
        // least-squares slope through the origin
        let slope = p2.iter().zip(&times).map(|(p, t)| p * t).sum::<f64>() / times.iter().map(|t| t * t).sum::<f64>();
        assert_relative_eq!(slope, 2.0 * d, max_relative = 0.1);
    }

    #[test]
    fn same_seed_bit_identical() {
        let rb = rubidium_preset();
        let trap = TrapConfig::new(1.5e6, rb.wavelength() / 16.0, &rb).unwrap();
        let cfg = base(trap, trap.period() / 256.0, 20.0 * trap.period(), FrictionMode::Delayed, CoefficientModel::Local);
        let initial = AtomState::new(trap.center_offset + 10e-9, 0.05 * rb.mass(), 0.0);
        let a = simulate_trajectory(&initial, &cfg, 42, 3).unwrap();
        let b = simulate_trajectory(&initial, &cfg, 42, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_trajectory(&initial, &cfg, 43, 3).unwrap();
        assert_ne!(a, c);
    }

    fn energy_decay_rate(mode: FrictionMode, freq: f64, delay: f64, steps: usize) -> f64 {
        let rb = rubidium_preset();
        let trap = TrapConfig::new(freq, 0.0, &rb).unwrap();
        let rate = 1e-3 * freq;
        let periods = 40.0;
        let mut cfg = base(
            trap,
            trap.period() / steps as f64,
            periods * trap.period(),
            mode,
            CoefficientModel::Constant { friction: rate * rb.mass(), diffusion: 0.0 },
        );
        cfg.beam = cfg.beam.with_delay(delay).unwrap();
        let integ = Integrator::new(cfg).unwrap();
        let initial = AtomState::new(0.0, 0.05 * rb.mass(), 0.0);
        let end = integ.run(&initial, &mut NoNoise, 1, |_, _| {}).unwrap();
        let ratio = integ.total_energy(&end) / integ.total_energy(&initial);
        -ratio.ln() / cfg.duration / rate
    }

    #[test]
    fn trapped_energy_decays_at_half_the_free_kinetic_rate() {
        // without a trap kinetic energy decays at 2γ/m; in a trap the total
        // energy decays at γ/m, half as fast
        let normalized = energy_decay_rate(FrictionMode::Instantaneous, 1.5e6, 26.5e-9, 256);
        assert_relative_eq!(normalized, 1.0, max_relative = 0.2);
        assert_relative_eq!(normalized, 1.0, max_relative = 0.01);
    }

    #[test]
    fn delayed_friction_rate_scales_with_cos_omega_tau() {
        let (freq, delay) = presets::SET_A;
        let ratio = energy_decay_rate(FrictionMode::Delayed, freq, delay, 256)
            / energy_decay_rate(FrictionMode::Instantaneous, freq, delay, 256);
        let oracle = (2.0 * PI * freq * delay).cos();
        assert_relative_eq!(ratio, oracle, max_relative = 5e-3);
    }

    #[test]
    fn delayed_and_instantaneous_agree_for_short_delay() {
        let freq = 1.5e6;
        let delay = 1e-3 / freq;
        let a = energy_decay_rate(FrictionMode::Delayed, freq, delay, 10_000);
        let b = energy_decay_rate(FrictionMode::Instantaneous, freq, delay, 10_000);
        assert_relative_eq!(a, b, max_relative = 0.05);
    }

    #[test]
    fn warmup_examples() {
        let rb = rubidium_preset();
        let trap = TrapConfig::new(1.5e6, 30e-9, &rb).unwrap();
        let cfg = base(trap, trap.period() / 256.0, 1e-6, FrictionMode::Delayed, CoefficientModel::Local);
        let integ = Integrator::new(cfg).unwrap();
        let h = integ.warmup(&AtomState::new(30e-9, 0.0, 0.0));
        assert!(h.samples().all(|s| s.velocity == 0.0 && s.position == 30e-9));
        assert!(h.earliest().unwrap() <= -cfg.beam.delay());

        let omega = trap.angular_frequency();
        let (a, phi) = (15e-9, 0.4f64);
        let initial = AtomState::new(30e-9 + a * phi.cos(), -a * omega * phi.sin() * rb.mass(), 0.0);
        let h = integ.warmup(&initial);
        for s in h.samples() {
            let x = 30e-9 + a * (omega * s.time + phi).cos();
            let v = -a * omega * (omega * s.time + phi).sin();
            assert!((s.position - x).abs() < 1e-8 * a);
            assert!((s.velocity - v).abs() < 1e-8 * a * omega);
        }

        let free = DynamicsConfig { trap: TrapConfig::disabled(0.0), ..cfg };
        let integ = Integrator::new(free).unwrap();
        let h = integ.warmup(&AtomState::new(1e-9, 0.1 * rb.mass(), 0.0));
        for s in h.samples() {
            assert_relative_eq!(s.position, 1e-9 + 0.1 * s.time, epsilon = 1e-20);
            assert_eq!(s.velocity, 0.1 * rb.mass() / rb.mass());
        }
    }

    #[test]
    fn delayed_run_never_underruns() {
        let rb = rubidium_preset();
        let (freq, delay) = presets::SET_B;
        let trap = TrapConfig::new(freq, rb.wavelength() / 16.0, &rb).unwrap();
        let mut cfg = base(trap, 0.0, 50.0 / freq, FrictionMode::Delayed, CoefficientModel::Local);
        cfg.beam = cfg.beam.with_delay(delay).unwrap();
        cfg.dt = suggested_dt(&cfg.beam, &trap, FrictionMode::Delayed, 50).unwrap();
        let initial = AtomState::new(trap.center_offset, (K_B * 1e-3 * rb.mass()).sqrt(), 0.0);
        let rec = simulate_trajectory(&initial, &cfg, 1, 10).unwrap();
        assert!(rec.momenta.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn coarse_grained_noise_has_unit_variance() {
        let mut n = CoarseGrainedNoise::new(GaussianNoise::new(3, 0), 4);
        let draws: Vec<f64> = (0..100_000).map(|_| n.next_normal()).collect();
        let var = draws.iter().map(|x| x * x).sum::<f64>() / draws.len() as f64;
        assert_relative_eq!(var, 1.0, max_relative = 0.02);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn deterministic_state_stays_finite_and_time_monotone(
                x0 in -40e-9f64..40e-9,
                v0 in -0.3f64..0.3,
                seed in 0u64..1000,
            ) {
                let rb = rubidium_preset();
                let trap = TrapConfig::new(1.5e6, rb.wavelength() / 16.0, &rb).unwrap();
                let cfg = base(trap, trap.period() / 256.0, 5.0 * trap.period(), FrictionMode::Delayed, CoefficientModel::Local);
                let rec = simulate_trajectory(&AtomState::new(trap.center_offset + x0, v0 * rb.mass(), 0.0), &cfg, seed, 1).unwrap();
                prop_assert!(rec.times.windows(2).all(|w| w[1] > w[0]));
                prop_assert!(rec.momenta.iter().chain(&rec.positions).all(|v| v.is_finite()));
            }
        }
    }
}
