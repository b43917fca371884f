//! Classical polarizable particle in front of an ideal plane mirror: the
//! self-consistent retarded field to first order in the velocity, and the
//! resulting three-term force.
//!
//! The polarizability is normalized to the field propagator, so `alpha` is
//! dimensionless and `alpha * zeta` is the round-trip self-coupling.

use num_complex::Complex64;

use crate::error::{ensure_finite, Error, Result};
use crate::model::SPEED_OF_LIGHT;

/// Both |αζ| and the retardation phase k·τ·|v| must stay below this.
pub const VALIDITY_THRESHOLD: f64 = 0.1;

/// Finite-difference step as a fraction of the wavelength.
pub const DERIVATIVE_STEP_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalParticle {
    pub alpha: f64,
    pub velocity: f64,
    pub position: f64,
}

impl ClassicalParticle {
    pub fn new(alpha: f64, velocity: f64, position: f64) -> Result<Self> {
        ensure_finite("classical.alpha", alpha)?;
        ensure_finite("classical.velocity", velocity)?;
        ensure_finite("classical.position", position)?;
        Ok(Self { alpha, velocity, position })
    }

    /// Only real susceptibilities are supported; absorption is excluded.
    pub fn from_complex(alpha: Complex64, velocity: f64, position: f64) -> Result<Self> {
        if alpha.im != 0.0 {
            return Err(Error::invalid("classical.alpha", format!("must be real, got imaginary part {:e}", alpha.im)));
        }
        Self::new(alpha.re, velocity, position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorChannel {
    pub wavenumber: f64,
    pub field_amplitude: f64,
}

impl MirrorChannel {
    pub fn new(wavelength: f64, field_amplitude: f64) -> Result<Self> {
        crate::error::ensure_positive("classical.wavelength", wavelength)?;
        ensure_finite("classical.field_amplitude", field_amplitude)?;
        Ok(Self { wavenumber: 2.0 * std::f64::consts::PI / wavelength, field_amplitude })
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavenumber
    }

    /// ζ(x) = −i·exp(2ikx), for propagation from a sheet of dipoles at x.
    pub fn propagator(&self, x: f64) -> Complex64 {
        Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, 2.0 * self.wavenumber * x)
    }

    /// Round-trip delay τ = 2x/c.
    pub fn delay(&self, x: f64) -> f64 {
        2.0 * x / SPEED_OF_LIGHT
    }

    /// Unperturbed standing wave E₀·sin(kx), zero at the mirror surface.
    pub fn incident(&self, x: f64) -> f64 {
        self.field_amplitude * (self.wavenumber * x).sin()
    }

    fn incident_derivative(&self, x: f64) -> f64 {
        self.field_amplitude * self.wavenumber * (self.wavenumber * x).cos()
    }

    /// Static self-consistent field E⁰(x)/(1 − αζ(x)).
    fn dressed(&self, alpha: f64, x: f64) -> Complex64 {
        self.incident(x) / (1.0 - alpha * self.propagator(x))
    }

    fn dressed_derivative(&self, alpha: f64, x: f64, rule: DerivativeRule) -> Complex64 {
        match rule {
            DerivativeRule::Analytic => {
                let zeta = self.propagator(x);
                let denom = 1.0 - alpha * zeta;
                let dzeta = Complex64::new(0.0, 2.0 * self.wavenumber) * zeta;
                self.incident_derivative(x) / denom + self.incident(x) * alpha * dzeta / (denom * denom)
            }
            DerivativeRule::CentralDifference => {
                let h = DERIVATIVE_STEP_FRACTION * self.wavelength();
                central_difference(|y| self.dressed(alpha, y), x, h)
            }
        }
    }

    pub fn check_validity(&self, particle: &ClassicalParticle) -> Result<()> {
        let alpha_zeta = particle.alpha.abs();
        let retardation = self.wavenumber * self.delay(particle.position).abs() * particle.velocity.abs();
        if alpha_zeta < VALIDITY_THRESHOLD && retardation < VALIDITY_THRESHOLD {
            Ok(())
        } else {
            Err(Error::OutOfValidity { alpha_zeta, retardation })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeRule {
    #[default]
    Analytic,
    /// Fourth-order central stencil with step λ·[`DERIVATIVE_STEP_FRACTION`].
    CentralDifference,
}

fn central_difference(f: impl Fn(f64) -> Complex64, x: f64, h: f64) -> Complex64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// Field at the moving particle, to first order in v:
/// {1 − [αζτ/(1−αζ)]·v·d/dx} E⁰/(1−αζ).
pub fn retarded_field(particle: &ClassicalParticle, channel: &MirrorChannel) -> Result<Complex64> {
    retarded_field_with(particle, channel, DerivativeRule::Analytic)
}

pub fn retarded_field_with(
    particle: &ClassicalParticle,
    channel: &MirrorChannel,
    rule: DerivativeRule,
) -> Result<Complex64> {
    channel.check_validity(particle)?;
    let (a, x, v) = (particle.alpha, particle.position, particle.velocity);
    let zeta = channel.propagator(x);
    let base = channel.dressed(a, x);
    if v == 0.0 {
        return Ok(base);
    }
    let coeff = a * zeta * channel.delay(x) / (1.0 - a * zeta);
    Ok(base - coeff * v * channel.dressed_derivative(a, x, rule))
}

/// Static field at an observation point `observation` when the scatterer sits
/// at `particle.position`: the incident wave plus the image field leaving the
/// particle, which travels away from the mirror with phase e^{ik(x_o − x_p)}.
/// At `observation == particle.position` this equals the v = 0 retarded field.
pub fn field_at(observation: f64, particle: &ClassicalParticle, channel: &MirrorChannel) -> Complex64 {
    let xp = particle.position;
    let scattered = channel.dressed(particle.alpha, xp) - channel.incident(xp);
    channel.incident(observation) + Complex64::from_polar(1.0, channel.wavenumber * (observation - xp)) * scattered
}

/// Time-averaged force ½Re(αE·∂E*/∂x) on a particle at rest, with the
/// gradient taken by the fourth-order stencil of [`field_at`].
pub fn static_force_numeric(particle: &ClassicalParticle, channel: &MirrorChannel) -> f64 {
    let xp = particle.position;
    let h = DERIVATIVE_STEP_FRACTION * channel.wavelength();
    let e = field_at(xp, particle, channel);
    let grad = central_difference(|y| field_at(y, particle, channel), xp, h);
    0.5 * (particle.alpha * e * grad.conj()).re
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceTerms {
    pub dipole: f64,
    pub binding: f64,
    pub cooling: f64,
    pub total: f64,
}

/// The three-term force, each term including the common prefactor ¼αE₀²k.
pub fn classical_force(particle: &ClassicalParticle, channel: &MirrorChannel) -> Result<ForceTerms> {
    channel.check_validity(particle)?;
    let (a, x, v) = (particle.alpha, particle.position, particle.velocity);
    let k = channel.wavenumber;
    let prefactor = 0.25 * a * channel.field_amplitude.powi(2) * k;
    let (s, c) = (k * x).sin_cos();
    let dipole = prefactor * (2.0 * k * x).sin();
    let binding = prefactor * 2.0 * a * (1.0 - v / SPEED_OF_LIGHT) * s * s * (4.0 * c * c - 1.0);
    let cooling = -prefactor * 2.0 * a * k * channel.delay(x) * v * (4.0 * k * x).sin();
    Ok(ForceTerms { dipole, binding, cooling, total: dipole + binding + cooling })
}
