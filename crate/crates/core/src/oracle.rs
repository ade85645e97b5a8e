//! Closed-form reference kernels, independent of the solver.
//!
//! Wrapped Gaussian and Fourier forms on the circle, sine/cosine series on
//! the interval, and the mass law of uniformly scaled metrics.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Images whose exponent falls below this are dropped.
const IMAGE_EXPONENT_FLOOR: f64 = -30.0;
/// Series modes with `exp(-lambda tau)` below this are dropped.
const MODE_DECAY_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalBc {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleFamily {
    CircleWrappedGaussian,
    CircleFourier,
    IntervalDirichletSeries,
    IntervalNeumannSeries,
}

/// A reference kernel at fixed `(L, tau, x0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleKernel {
    pub family: OracleFamily,
    pub length: f64,
    pub tau: f64,
    pub source: f64,
    /// Number of images (one side) or series modes retained.
    pub truncation: usize,
}

impl OracleKernel {
    pub fn new(family: OracleFamily, length: f64, tau: f64, source: f64) -> Result<Self> {
        check_tau(tau)?;
        if !(length > 0.0) {
            return Err(Error::InvalidArgument(format!("oracle length must be positive, got {length}")));
        }
        let truncation = match family {
            OracleFamily::CircleWrappedGaussian => image_count(length, tau),
            OracleFamily::CircleFourier => mode_count(2.0 * PI / length, tau),
            OracleFamily::IntervalDirichletSeries | OracleFamily::IntervalNeumannSeries => mode_count(PI / length, tau),
        };
        Ok(Self { family, length, tau, source, truncation })
    }

    pub fn value(&self, x: f64) -> f64 {
        let (l, t, x0) = (self.length, self.tau, self.source);
        match self.family {
            OracleFamily::CircleWrappedGaussian => {
                let pre = (4.0 * PI * t).powf(-0.5);
                let d = x - x0 - l * ((x - x0) / l).round();
                let m = self.truncation as i64;
                (-m..=m)
                    .map(|k| {
                        let e = -(d - k as f64 * l).powi(2) / (4.0 * t);
                        if e < IMAGE_EXPONENT_FLOOR {
                            0.0
                        } else {
                            e.exp()
                        }
                    })
                    .sum::<f64>()
                    * pre
            }
            OracleFamily::CircleFourier => {
                let w = 2.0 * PI / l;
                let tail: f64 = (1..=self.truncation)
                    .map(|k| {
                        let kw = k as f64 * w;
                        (-kw * kw * t).exp() * (kw * (x - x0)).cos()
                    })
                    .sum();
                (1.0 + 2.0 * tail) / l
            }
            OracleFamily::IntervalDirichletSeries => {
                let w = PI / l;
                (1..=self.truncation)
                    .map(|k| {
                        let kw = k as f64 * w;
                        (-kw * kw * t).exp() * (kw * x).sin() * (kw * x0).sin()
                    })
                    .sum::<f64>()
                    * 2.0
                    / l
            }
            OracleFamily::IntervalNeumannSeries => {
                let w = PI / l;
                let s: f64 = (1..=self.truncation)
                    .map(|k| {
                        let kw = k as f64 * w;
                        (-kw * kw * t).exp() * (kw * x).cos() * (kw * x0).cos()
                    })
                    .sum();
                (1.0 + 2.0 * s) / l
            }
        }
    }

    /// `int_0^L kernel dx` in closed form from the series.
    pub fn mass(&self) -> f64 {
        let (l, t, x0) = (self.length, self.tau, self.source);
        match self.family {
            OracleFamily::CircleWrappedGaussian | OracleFamily::CircleFourier | OracleFamily::IntervalNeumannSeries => 1.0,
            OracleFamily::IntervalDirichletSeries => {
                // the 1/k decay of the sine integrals needs more modes than the pointwise sum
                let w = PI / l;
                let modes = self.truncation.max(64);
                (1..=modes)
                    .map(|k| {
                        let kw = k as f64 * w;
                        let integral = (1.0 - (k as f64 * PI).cos()) / kw;
                        (-kw * kw * t).exp() * (kw * x0).sin() * integral
                    })
                    .sum::<f64>()
                    * 2.0
                    / l
            }
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("oracle time must be positive, got {tau}")));
    }
    Ok(())
}

fn image_count(length: f64, tau: f64) -> usize {
    // |d - m L| >= (m - 1/2) L; keep m while that lower bound is above the floor
    let reach = (-IMAGE_EXPONENT_FLOOR * 4.0 * tau).sqrt();
    (reach / length + 1.5).ceil() as usize
}

fn mode_count(base_frequency: f64, tau: f64) -> usize {
    let lambda_max = -MODE_DECAY_FLOOR.ln() / tau;
    (lambda_max.sqrt() / base_frequency).ceil() as usize + 1
}

/// Heat kernel of the flat circle of length `L` (wrapped Gaussian image sum).
pub fn circle_kernel(length: f64, tau: f64, x: f64, source: f64) -> Result<f64> {
    Ok(OracleKernel::new(OracleFamily::CircleWrappedGaussian, length, tau, source)?.value(x))
}

/// Fourier form of [`circle_kernel`].
pub fn circle_kernel_fourier(length: f64, tau: f64, x: f64, source: f64) -> Result<f64> {
    Ok(OracleKernel::new(OracleFamily::CircleFourier, length, tau, source)?.value(x))
}

/// Dirichlet or Neumann heat kernel of the flat interval `[0, L]`.
pub fn interval_kernel(length: f64, bc: IntervalBc, tau: f64, x: f64, source: f64) -> Result<f64> {
    let family = match bc {
        IntervalBc::Dirichlet => OracleFamily::IntervalDirichletSeries,
        IntervalBc::Neumann => OracleFamily::IntervalNeumannSeries,
    };
    Ok(OracleKernel::new(family, length, tau, source)?.value(x))
}

/// `int_0^L` of the interval kernel.
pub fn interval_mass(length: f64, bc: IntervalBc, tau: f64, source: f64) -> Result<f64> {
    let family = match bc {
        IntervalBc::Dirichlet => OracleFamily::IntervalDirichletSeries,
        IntervalBc::Neumann => OracleFamily::IntervalNeumannSeries,
    };
    Ok(OracleKernel::new(family, length, tau, source)?.mass())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassMode {
    /// `Q = 0`.
    Zero,
    /// `Q = R`.
    EqualsR,
}

/// Kernel mass for a spatially uniform density `rho(tau)` with `X = 0`.
///
/// With `Q = R` the mass is conserved; with `Q = 0` it solves
/// `m' = (rho'/rho) m`, i.e. `m = rho(tau) / rho(0)`.
pub fn scaling_mass_law(rho: impl Fn(f64) -> f64, mode: MassMode, tau: f64) -> Result<f64> {
    let (r0, rt) = (rho(0.0), rho(tau));
    if !(r0 > 0.0 && rt > 0.0) {
        return Err(Error::InvalidArgument("density must stay positive".into()));
    }
    Ok(match mode {
        MassMode::EqualsR => 1.0,
        MassMode::Zero => rt / r0,
    })
}
