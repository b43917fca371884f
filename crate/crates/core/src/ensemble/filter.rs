use crate::error::{ensure_positive, Error, Result};

use super::EnsembleSummary;

/// Fewest samples per trap period the moving average accepts.
pub const MIN_SAMPLES_PER_PERIOD: f64 = 4.0;

/// Cumulative trapezoid integral of the piecewise-linear interpolant.
struct Integral<'a> {
    t: &'a [f64],
    y: &'a [f64],
    cumulative: Vec<f64>,
}

impl<'a> Integral<'a> {
    fn new(t: &'a [f64], y: &'a [f64]) -> Self {
        let mut cumulative = Vec::with_capacity(t.len());
        cumulative.push(0.0);
        for i in 1..t.len() {
            let last = cumulative[i - 1];
            cumulative.push(last + 0.5 * (y[i] + y[i - 1]) * (t[i] - t[i - 1]));
        }
        Self { t, y, cumulative }
    }

    fn at(&self, time: f64) -> f64 {
        let last = self.t.len() - 1;
        let i = self.t.partition_point(|&s| s <= time).clamp(1, last) - 1;
        let h = time - self.t[i];
        let slope = (self.y[i + 1] - self.y[i]) / (self.t[i + 1] - self.t[i]);
        self.cumulative[i] + self.y[i] * h + 0.5 * slope * h * h
    }
}

fn moving_average(t: &[f64], y: &[f64], centres: &[f64], window: f64) -> Vec<f64> {
    let integral = Integral::new(t, y);
    centres
        .iter()
        .map(|&c| (integral.at(c + 0.5 * window) - integral.at(c - 0.5 * window)) / window)
        .collect()
}

/// Moving average over exactly one trap period, evaluated at every sample
/// whose window lies inside the record. Kinetic energy oscillates at twice
/// the trap frequency, so one period removes both harmonics.
pub fn filter_trap_oscillations(summary: &EnsembleSummary, trap_frequency: f64) -> Result<EnsembleSummary> {
    ensure_positive("trap.frequency", trap_frequency)?;
    let t = &summary.times;
    if t.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: t.len() });
    }
    let window = 1.0 / trap_frequency;
    let spacing = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if window / spacing < MIN_SAMPLES_PER_PERIOD {
        return Err(Error::invalid(
            "ensemble.sample_stride",
            format!("{:.2} samples per trap period, need at least {MIN_SAMPLES_PER_PERIOD}", window / spacing),
        ));
    }
    let slack = 1e-9 * spacing;
    let keep: Vec<usize> = (0..t.len())
        .filter(|&i| t[i] - 0.5 * window >= t[0] - slack && t[i] + 0.5 * window <= t[t.len() - 1] + slack)
        .collect();
    if keep.is_empty() {
        return Err(Error::InsufficientSamples { needed: (window / spacing).ceil() as usize + 1, got: t.len() });
    }
    // clamp windows that touch the ends onto the record
    let centres: Vec<f64> = keep.iter().map(|&i| t[i].clamp(t[0] + 0.5 * window, t[t.len() - 1] - 0.5 * window)).collect();
    Ok(EnsembleSummary {
        times: keep.iter().map(|&i| t[i]).collect(),
        mean_kinetic_energy: moving_average(t, &summary.mean_kinetic_energy, &centres, window),
        temperature: moving_average(t, &summary.temperature, &centres, window),
        temperature_err: moving_average(t, &summary.temperature_err, &centres, window),
        n_traj: summary.n_traj,
    })
}
