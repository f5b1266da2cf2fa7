//! Spatial/temporal resolution schedule.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `eps = (coef * d)^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRule {
    pub coef: f64,
    pub exponent: f64,
}

impl Default for EpsilonRule {
    fn default() -> Self {
        EpsilonRule {
            coef: 5.0,
            exponent: 2.0 / 3.0,
        }
    }
}

impl EpsilonRule {
    pub fn eval(&self, d: f64) -> f64 {
        (self.coef * d).powf(self.exponent)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoRule {
    /// `rho = 2d`
    #[default]
    TwiceD,
    /// `rho = 2d + l * eps * (d + M * eps)`
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dispersion {
    /// `d = b * (ln n / n)^(1/dim)`
    Asymptotic { b: f64 },
    /// Fixed `d`, used for lattices.
    Fixed { d: f64 },
}

/// Volume of the unit ball in `dim` dimensions.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => unimplemented!("unit ball volume for dim {dim}"),
    }
}

/// Smallest admissible dispersion constant `(mu(X) / C_n)^(1/n)`.
pub fn dispersion_lower_bound(measure: f64, dim: usize) -> f64 {
    (measure / unit_ball_volume(dim)).powf(1.0 / dim as f64)
}

/// Default dispersion constant: 10% above the lower bound.
pub fn default_dispersion_constant(measure: f64, dim: usize) -> f64 {
    1.1 * dispersion_lower_bound(measure, dim)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resolutions {
    pub d: f64,
    pub eps: f64,
    pub rho: f64,
    /// Transformed running cost `1 - exp(-(eps - d))`.
    pub delta: f64,
    /// Discount `1 - delta`.
    pub beta: f64,
    /// Goal inflation radius `M * eps + d`.
    pub goal_radius: f64,
}

impl Resolutions {
    pub fn new(d: f64, eps: f64, rho: f64, speed_bound: f64) -> Self {
        let delta = -(-(eps - d)).exp_m1();
        Resolutions {
            d,
            eps,
            rho,
            delta,
            beta: 1.0 - delta,
            goal_radius: speed_bound * eps + d,
        }
    }

    /// The temporal resolution must exceed the spatial one, otherwise the
    /// transformed operator stops contracting.
    pub fn check_eps_exceeds_d(&self) -> Result<()> {
        if self.eps > self.d && self.beta < 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "temporal resolution {} must exceed spatial resolution {}",
                self.eps, self.d
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolutionSchedule {
    pub dispersion: Dispersion,
    pub epsilon_rule: EpsilonRule,
    pub rho_rule: RhoRule,
    pub lipschitz: f64,
    pub speed_bound: f64,
    pub dim: usize,
}

impl ResolutionSchedule {
    pub fn spatial(&self, n: usize) -> Result<f64> {
        match self.dispersion {
            Dispersion::Fixed { d } => Ok(d),
            Dispersion::Asymptotic { b } => {
                if n < 3 {
                    return Err(Error::Config(format!(
                        "at least 3 samples are needed for the dispersion schedule, got {n}"
                    )));
                }
                let n = n as f64;
                Ok(b * (n.ln() / n).powf(1.0 / self.dim as f64))
            }
        }
    }

    pub fn resolutions_for_d(&self, d: f64) -> Resolutions {
        let eps = self.epsilon_rule.eval(d);
        let rho = match self.rho_rule {
            RhoRule::TwiceD => 2.0 * d,
            RhoRule::Full => 2.0 * d + self.lipschitz * eps * (d + self.speed_bound * eps),
        };
        Resolutions::new(d, eps, rho, self.speed_bound)
    }

    /// Resolutions for a vertex set of size `n`.
    pub fn at(&self, n: usize) -> Result<Resolutions> {
        Ok(self.resolutions_for_d(self.spatial(n)?))
    }
}
