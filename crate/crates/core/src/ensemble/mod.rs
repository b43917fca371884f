//! Monte-Carlo ensembles of trapped particles and the rate-versus-T₀
//! protocol for the steady-state temperature.
//!
//! Trajectory i draws its initial state from stream 2i and its noise from
//! stream 2i + 1 of a ChaCha8 generator keyed by the master seed, and
//! trajectories are reduced in index order, so results do not depend on the
//! worker count.

mod filter;
mod fit;

pub use filter::{filter_trap_oscillations, MIN_SAMPLES_PER_PERIOD};
pub use fit::{
    fit_steady_state, fit_steady_state_with, initial_rate, FitOptions, FitResult, RateEstimate, RatePoint,
    Weighting, MIN_RATE_SAMPLES,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::dynamics::{AtomState, CoarseGrainedNoise, DynamicsConfig, GaussianNoise, Integrator};
use crate::error::{ensure_positive, Error, Result};
use crate::model::K_B;

/// Trajectories per parallel batch; fixed so the reduction order never changes.
const BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    /// K
    pub initial_temperature: f64,
    pub dynamics: DynamicsConfig,
    pub master_seed: u64,
    /// Integrator steps between recorded samples.
    pub sample_stride: usize,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_traj < 2 {
            return Err(Error::invalid("ensemble.n_traj", format!("must be >= 2, got {}", self.n_traj)));
        }
        ensure_positive("ensemble.initial_temperature", self.initial_temperature)?;
        if self.sample_stride == 0 {
            return Err(Error::invalid("ensemble.sample_stride", "must be >= 1"));
        }
        self.dynamics.validate()
    }
}

/// Execution knobs that do not change the physics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Each step consumes this many unit draws, summed and rescaled. A run
    /// at step 2·dt with factor 2 sees the same Brownian path as a run at dt.
    pub noise_coarsening: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: None, noise_coarsening: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    /// J
    pub mean_kinetic_energy: Vec<f64>,
    /// k_B T = 2⟨E_kin⟩, K.
    pub temperature: Vec<f64>,
    /// Standard error of the temperature, K.
    pub temperature_err: Vec<f64>,
    pub n_traj: usize,
}

/// Initial state of trajectory `index`: thermal at T₀ in the trap, or at the
/// trap centre with thermal momenta when the trap is off.
pub fn thermal_state(cfg: &EnsembleConfig, index: u64) -> AtomState {
    let dyn_cfg = &cfg.dynamics;
    let m = dyn_cfg.species.mass();
    let kt = K_B * cfg.initial_temperature;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    rng.set_stream(2 * index);
    let p = Normal::new(0.0, (m * kt).sqrt()).expect("positive width").sample(&mut rng);
    let x = if dyn_cfg.trap.enabled {
        let sigma = (kt / (m * dyn_cfg.trap.angular_frequency().powi(2))).sqrt();
        Normal::new(dyn_cfg.trap.center_offset, sigma).expect("positive width").sample(&mut rng)
    } else {
        dyn_cfg.trap.center_offset
    };
    AtomState::new(x, p, 0.0)
}

fn run_one(integ: &Integrator, cfg: &EnsembleConfig, index: u64, options: &RunOptions, n_samples: usize) -> Result<Vec<f64>> {
    let m = cfg.dynamics.species.mass();
    let initial = thermal_state(cfg, index);
    let mut noise = CoarseGrainedNoise::new(GaussianNoise::new(cfg.master_seed, 2 * index + 1), options.noise_coarsening);
    let mut ke = vec![0.0; n_samples];
    integ.run(&initial, &mut noise, cfg.sample_stride, |j, s| ke[j] = s.kinetic_energy(m))?;
    Ok(ke)
}

/// Running mean and sum of squared deviations (Welford), updated in order.
#[derive(Debug, Clone, Default)]
struct Welford {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(len: usize) -> Self {
        Self { count: 0, mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    fn push(&mut self, values: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((mu, s), x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let delta = x - *mu;
            *mu += delta / n;
            *s += delta * (x - *mu);
        }
    }

    fn sem(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.m2.iter().map(|s| (s / (n - 1.0)).sqrt() / n.sqrt()).collect()
    }
}

type Statistic<'a> = &'a (dyn Fn(&[f64], &[f64]) -> Result<f64> + Sync);

/// Runs every trajectory and reduces the kinetic energies in index order.
/// `statistic`, if given, maps one trajectory's (times, temperature) to a
/// scalar whose across-trajectory mean and standard error are returned too.
fn run_reduced(
    cfg: &EnsembleConfig,
    options: &RunOptions,
    statistic: Option<Statistic<'_>>,
) -> Result<(EnsembleSummary, Option<(f64, f64)>)> {
    cfg.validate()?;
    let integ = Integrator::new(cfg.dynamics)?;
    let n_samples = cfg.dynamics.n_steps() / cfg.sample_stride + 1;
    let dt = cfg.dynamics.dt;
    let times: Vec<f64> = (0..n_samples).map(|j| (j * cfg.sample_stride) as f64 * dt).collect();

    let mut energy = Welford::new(n_samples);
    let mut scalar = Welford::new(1);
    let mut run_batches = || -> Result<()> {
        for start in (0..cfg.n_traj).step_by(BATCH) {
            let end = (start + BATCH).min(cfg.n_traj);
            let batch: Vec<Result<(Vec<f64>, Option<f64>)>> = (start..end)
                .into_par_iter()
                .map(|i| {
                    let ke = run_one(&integ, cfg, i as u64, options, n_samples)?;
                    let stat = match statistic {
                        Some(f) => {
                            let temps: Vec<f64> = ke.iter().map(|e| 2.0 * e / K_B).collect();
                            Some(f(&times, &temps)?)
                        }
                        None => None,
                    };
                    Ok((ke, stat))
                })
                .collect();
            for item in batch {
                let (ke, stat) = item?;
                energy.push(&ke);
                if let Some(v) = stat {
                    scalar.push(&[v]);
                }
            }
        }
        Ok(())
    };

    match options.workers {
        Some(workers) => rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?
            .install(run_batches)?,
        None => run_batches()?,
    }

    let temperature = energy.mean.iter().map(|e| 2.0 * e / K_B).collect();
    let temperature_err = energy.sem().iter().map(|s| 2.0 * s / K_B).collect();
    let summary = EnsembleSummary {
        times,
        mean_kinetic_energy: energy.mean,
        temperature,
        temperature_err,
        n_traj: energy.count,
    };
    let stat = statistic.map(|_| (scalar.mean[0], scalar.sem()[0]));
    Ok((summary, stat))
}

pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleSummary> {
    run_ensemble_with(cfg, &RunOptions::default())
}

pub fn run_ensemble_with(cfg: &EnsembleConfig, options: &RunOptions) -> Result<EnsembleSummary> {
    run_reduced(cfg, options, None).map(|(s, _)| s)
}

fn filtered(summary: EnsembleSummary, cfg: &EnsembleConfig) -> Result<EnsembleSummary> {
    if cfg.dynamics.trap.enabled {
        filter_trap_oscillations(&summary, cfg.dynamics.trap.frequency)
    } else {
        Ok(summary)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateMeasurement {
    /// Error is the across-trajectory standard error of the slope.
    pub point: RatePoint,
    /// Slope of the filtered ensemble mean with its residual-variance error.
    pub ensemble: RateEstimate,
    pub filtered: EnsembleSummary,
}

/// Initial heating or cooling rate of one ensemble.
///
/// The ensemble-mean series is a smooth random walk, so its residual-variance
/// slope error is far too small. Filtering and least squares are linear, so
/// the mean of per-trajectory slopes equals the ensemble slope and their
/// spread gives an honest error, which is what the returned point carries.
pub fn measure_rate(cfg: &EnsembleConfig, options: &RunOptions, rate_fraction: f64) -> Result<RateMeasurement> {
    let per_trajectory = |times: &[f64], temps: &[f64]| -> Result<f64> {
        let single = EnsembleSummary {
            times: times.to_vec(),
            mean_kinetic_energy: temps.iter().map(|t| 0.5 * K_B * t).collect(),
            temperature: temps.to_vec(),
            temperature_err: vec![0.0; temps.len()],
            n_traj: 1,
        };
        Ok(initial_rate(&filtered(single, cfg)?, rate_fraction)?.rate)
    };
    let (raw, stat) = run_reduced(cfg, options, Some(&per_trajectory))?;
    let (_, slope_err) = stat.expect("statistic requested");
    let filtered = filtered(raw, cfg)?;
    let ensemble = initial_rate(&filtered, rate_fraction)?;
    Ok(RateMeasurement {
        point: RatePoint { initial_temperature: cfg.initial_temperature, rate: ensemble.rate, err: slope_err },
        ensemble,
        filtered,
    })
}

/// Seed of the `index`-th rate point derived from a master seed.
pub fn point_seed(master_seed: u64, index: usize) -> u64 {
    master_seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// One rate point per initial temperature, each with its own derived seed.
pub fn rate_scan(
    base: &EnsembleConfig,
    temperatures: &[f64],
    options: &RunOptions,
    rate_fraction: f64,
) -> Result<Vec<RatePoint>> {
    temperatures
        .iter()
        .enumerate()
        .map(|(i, &t0)| {
            let cfg = EnsembleConfig { initial_temperature: t0, master_seed: point_seed(base.master_seed, i), ..*base };
            measure_rate(&cfg, options, rate_fraction).map(|m| m.point)
        })
        .collect()
}
