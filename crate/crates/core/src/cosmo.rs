//! Friedmann background cosmology: matter, curvature and a cosmological
//! constant. Radiation is not modelled, so results degrade above z ~ 1000.
//!
//! Internal arithmetic is cgs; the public accessors convert to Gyr, Mpc and
//! km/s/Mpc where that is the natural unit.

use std::cell::Cell;
use std::f64::consts::PI;

use crate::constants::{C_CGS, GYR_S, G_CGS, KM_CM, MPC_CM};
use crate::numerics::{integrate_semi_infinite, romberg, QuadConfig, QuadResult};
use crate::{Error, Result};

/// Validated density parameters and Hubble constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosmologyParams {
    omegam: f64,
    omegab: f64,
    omegal: f64,
    h: f64,
    omegak: f64,
    h0: f64,
}

impl CosmologyParams {
    /// Checks the sanity bounds and freezes the derived curvature
    /// `omegak = 1 - omegam - omegal` and `H0 = 100 h km/s/Mpc`.
    pub fn new(omegam: f64, omegab: f64, omegal: f64, h: f64) -> Result<Self> {
        if !(omegam > 0.0 && omegam <= 2.0) {
            return Err(Error::invalid("omega-m", omegam, "must lie in (0, 2]"));
        }
        if !(omegab >= 0.0 && omegab <= omegam) {
            return Err(Error::invalid(
                "omega-b",
                omegab,
                "must lie in [0, omega-m]",
            ));
        }
        if !(0.0..=2.0).contains(&omegal) {
            return Err(Error::invalid("omega-l", omegal, "must lie in [0, 2]"));
        }
        if !(0.3..=1.2).contains(&h) {
            return Err(Error::invalid("h", h, "must lie in [0.3, 1.2]"));
        }
        Ok(CosmologyParams {
            omegam,
            omegab,
            omegal,
            h,
            omegak: 1.0 - omegam - omegal,
            h0: 100.0 * h * KM_CM / MPC_CM,
        })
    }

    /// Flat concordance-like defaults: (0.3, 0.04, 0.7, 0.7).
    pub fn fiducial() -> Self {
        Self::new(0.3, 0.04, 0.7, 0.7).expect("fiducial parameters are valid")
    }

    pub fn omegam(&self) -> f64 {
        self.omegam
    }

    pub fn omegab(&self) -> f64 {
        self.omegab
    }

    pub fn omegal(&self) -> f64 {
        self.omegal
    }

    pub fn omegak(&self) -> f64 {
        self.omegak
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Present-day Hubble rate in s^-1.
    pub fn h0(&self) -> f64 {
        self.h0
    }

    /// Present-day Hubble rate in Gyr^-1.
    pub fn h0_per_gyr(&self) -> f64 {
        self.h0 * GYR_S
    }

    /// Hubble distance c/H0 in Mpc.
    pub fn hubble_distance_mpc(&self) -> f64 {
        C_CGS / KM_CM / (100.0 * self.h)
    }

    /// Dimensionless expansion rate `E(z) = H(z)/H0`.
    pub fn e(&self, z: f64) -> Result<f64> {
        // omegam (1+z)^3 + omegak (1+z)^2 + omegal, regrouped around the
        // closure omegam + omegak + omegal = 1 so that E(0) is exactly 1
        let radicand = 1.0 + self.omegam * z * (3.0 + z * (3.0 + z)) + self.omegak * z * (2.0 + z);
        if radicand > 0.0 {
            Ok(radicand.sqrt())
        } else {
            Err(Error::NegativeRadicand { z, radicand })
        }
    }

    /// H(z) in s^-1.
    pub fn hubble(&self, z: f64) -> Result<f64> {
        Ok(self.h0 * self.e(z)?)
    }

    /// H(z) in km s^-1 Mpc^-1.
    pub fn hubble_km_s_mpc(&self, z: f64) -> Result<f64> {
        Ok(100.0 * self.h * self.e(z)?)
    }

    /// H(z) in Gyr^-1.
    pub fn hubble_per_gyr(&self, z: f64) -> Result<f64> {
        Ok(self.h0_per_gyr() * self.e(z)?)
    }

    /// `dt/dz = -1 / ((1+z) H(z))`, in Gyr.
    pub fn dt_dz(&self, z: f64) -> Result<f64> {
        Ok(-1.0 / ((1.0 + z) * self.hubble_per_gyr(z)?))
    }

    /// Cosmic time at redshift `z`, in Gyr.
    pub fn age(&self, z: f64) -> Result<QuadResult> {
        self.age_with(z, &QuadConfig::default())
    }

    pub fn age_with(&self, z: f64, cfg: &QuadConfig) -> Result<QuadResult> {
        check_redshift(z)?;
        let r =
            self.guarded(|e| integrate_semi_infinite(|zp| 1.0 / ((1.0 + zp) * e(zp)), z, cfg))?;
        Ok(r.scaled(1.0 / self.h0_per_gyr()))
    }

    /// Line-of-sight comoving distance to `z`, in Mpc.
    pub fn comoving_distance(&self, z: f64) -> Result<QuadResult> {
        self.comoving_distance_with(z, &QuadConfig::default())
    }

    pub fn comoving_distance_with(&self, z: f64, cfg: &QuadConfig) -> Result<QuadResult> {
        check_redshift(z)?;
        if z == 0.0 {
            return Ok(QuadResult {
                value: 0.0,
                error_estimate: 0.0,
                evaluations: 0,
                converged: true,
            });
        }
        let r = self.guarded(|e| romberg(|zp| 1.0 / e(zp), 0.0, z, cfg))?;
        Ok(r.scaled(self.hubble_distance_mpc()))
    }

    /// `3 H0^2 / (8 pi G)`, in g cm^-3.
    pub fn critical_density(&self) -> f64 {
        3.0 * self.h0 * self.h0 / (8.0 * PI * G_CGS)
    }

    /// Present-day mean matter density, in g cm^-3.
    pub fn matter_density(&self) -> f64 {
        self.omegam * self.critical_density()
    }

    /// Runs a quadrature whose integrand needs `E(z)`, turning the first
    /// radicand failure into a proper error rather than a NaN sample.
    pub(crate) fn guarded<T>(
        &self,
        run: impl FnOnce(&dyn Fn(f64) -> f64) -> Result<T>,
    ) -> Result<T> {
        let failed: Cell<Option<Error>> = Cell::new(None);
        let e = |z: f64| match self.e(z) {
            Ok(v) => v,
            Err(err) => {
                if let Some(prev) = failed.take() {
                    failed.set(Some(prev));
                } else {
                    failed.set(Some(err));
                }
                f64::NAN
            }
        };
        let out = run(&e);
        match failed.into_inner() {
            Some(err) => Err(err),
            None => out,
        }
    }
}

pub fn scale_factor(z: f64) -> f64 {
    1.0 / (1.0 + z)
}

pub(crate) fn check_redshift(z: f64) -> Result<()> {
    if z >= 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("z", z, "must be finite and >= 0"))
    }
}
