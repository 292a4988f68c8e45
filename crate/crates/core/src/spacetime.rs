//! Light-cone timing budgets for a symmetric fiber-based arrangement.

use serde::Serialize;

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpacetimeConfig {
    /// Fiber distance from the source to each party, meters.
    pub d: f64,
    /// Refractive index of the fiber.
    pub n: f64,
    /// Geometric and other extra delays, seconds.
    pub tau_g: f64,
    /// Measurement interval.
    pub tau_m: f64,
    /// Setting generation duration.
    pub tau_s: f64,
    /// Setting deployment duration.
    pub tau_d: f64,
    /// Vacuum speed of light, m/s.
    pub c0: f64,
}

impl Default for SpacetimeConfig {
    fn default() -> Self {
        SpacetimeConfig {
            d: 1.0,
            n: 1.5,
            tau_g: 0.0,
            tau_m: 0.0,
            tau_s: 0.0,
            tau_d: 0.0,
            c0: SPEED_OF_LIGHT,
        }
    }
}

impl SpacetimeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) {
            return Err(Error::validation(format!("d = {} must be positive", self.d)));
        }
        if !(self.n > 1.0 && self.n < 3.0) {
            return Err(Error::validation(format!("n = {} must lie in (1, 3)", self.n)));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::validation("c0 must be positive"));
        }
        for (name, t) in [
            ("tauG", self.tau_g),
            ("tauM", self.tau_m),
            ("tauS", self.tau_s),
            ("tauD", self.tau_d),
        ] {
            if !(t >= 0.0) {
                return Err(Error::validation(format!("{name} = {t} must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauLimits {
    /// Budget for setting generation.
    pub tau1: f64,
    /// Budget for setting generation plus deployment.
    pub tau2: f64,
}

/// `tau1 = (3 - n) d / c0 - (tauG + tauM)`, `tau2 = 2 d / c0 - tauM`.
/// Negative budgets are returned as they are.
pub fn tau_limits(config: &SpacetimeConfig) -> Result<TauLimits> {
    config.validate()?;
    let light = config.d / config.c0;
    Ok(TauLimits {
        tau1: (3.0 - config.n) * light - (config.tau_g + config.tau_m),
        tau2: 2.0 * light - config.tau_m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub name: &'static str,
    /// Budget minus usage, seconds; must be strictly positive.
    pub margin: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryReport {
    pub feasible: bool,
    pub limits: TauLimits,
    pub constraints: Vec<Constraint>,
}

impl GeometryReport {
    pub fn violated(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(|c| !c.satisfied)
    }
}

pub fn validate_geometry(config: &SpacetimeConfig) -> Result<GeometryReport> {
    let limits = tau_limits(config)?;
    let constraints = vec![
        constraint("tauS < tau1", limits.tau1 - config.tau_s),
        constraint("tauS + tauD < tau2", limits.tau2 - (config.tau_s + config.tau_d)),
    ];
    Ok(GeometryReport {
        feasible: constraints.iter().all(|c| c.satisfied),
        limits,
        constraints,
    })
}

fn constraint(name: &'static str, margin: f64) -> Constraint {
    Constraint {
        name,
        margin,
        satisfied: margin > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fiber(d: f64) -> SpacetimeConfig {
        SpacetimeConfig {
            d,
            ..Default::default()
        }
    }

    #[test]
    fn thirty_km_budgets() {
        let t = tau_limits(&fiber(30_000.0)).unwrap();
        assert_relative_eq!(t.tau1, 1.5 * 30_000.0 / SPEED_OF_LIGHT, max_relative = 1e-15);
        assert_relative_eq!(t.tau2, 60_000.0 / SPEED_OF_LIGHT, max_relative = 1e-15);
        assert!((t.tau1 - 1.501e-4).abs() < 1e-7);
        assert!((t.tau2 - 2.001e-4).abs() < 1e-7);
    }

    #[test]
    fn delays_can_exhaust_tau1() {
        let mut c = fiber(30_000.0);
        c.tau_g = 1.5 * 30_000.0 / SPEED_OF_LIGHT;
        assert_eq!(tau_limits(&c).unwrap().tau1, 0.0);
    }

    #[test]
    fn slow_fiber_closes_the_margin() {
        let mut c = fiber(30_000.0);
        c.n = 3.0 - 1e-12;
        assert!(tau_limits(&c).unwrap().tau1.abs() < 1e-15);
    }

    #[test]
    fn equality_is_a_violation() {
        let mut c = fiber(3_000.0);
        c.tau_s = tau_limits(&c).unwrap().tau1;
        let r = validate_geometry(&c).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.violated().count(), 1);
        assert_eq!(r.violated().next().unwrap().margin, 0.0);
    }

    #[test]
    fn realistic_layout_is_feasible() {
        let c = SpacetimeConfig {
            d: 30_000.0,
            n: 1.5,
            tau_g: 1e-6,
            tau_m: 10e-9,
            tau_s: 10e-9,
            tau_d: 100e-9,
            c0: SPEED_OF_LIGHT,
        };
        let r = validate_geometry(&c).unwrap();
        assert!(r.feasible);
        let light = 30_000.0 / SPEED_OF_LIGHT;
        assert_relative_eq!(
            r.constraints[0].margin,
            1.5 * light - 1.01e-6 - 10e-9,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            r.constraints[1].margin,
            2.0 * light - 10e-9 - 110e-9,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rejects_bad_index() {
        let mut c = fiber(1.0);
        c.n = 3.0;
        assert!(tau_limits(&c).is_err());
        c.n = 1.0;
        assert!(tau_limits(&c).is_err());
    }
}
