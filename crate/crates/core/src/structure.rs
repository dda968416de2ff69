//! Press-Schechter halo statistics.
//!
//! The rms fluctuation is a normalized power law `sigma(M) = sigma8 (M/m8)^-gamma`
//! standing in for a transfer-function integral; everything downstream only
//! sees it through [`HaloModel::sigma_mass`]. The multiplicity carries the
//! usual factor of two, so integrating over all masses collapses all matter.

use std::f64::consts::PI;

use crate::constants::{MPC_CM, M_SUN_G};
use crate::cosmo::{check_redshift, CosmologyParams};
use crate::numerics::{integrate_semi_infinite, romberg, QuadConfig, QuadResult};
use crate::{Error, Result};

/// Spherical-collapse linear overdensity threshold.
pub const DELTA_C: f64 = 1.686;

/// Step used for the redshift derivative of the collapsed density.
pub const INFALL_DZ: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaloModel {
    pub delta_c: f64,
    pub sigma8: f64,
    /// Mass of an 8 Mpc/h sphere, Msun.
    pub m8: f64,
    pub gamma: f64,
    /// Lower integration bound, Msun.
    pub m_min: f64,
    /// Upper integration bound, Msun.
    pub m_max: f64,
}

impl HaloModel {
    /// Defaults: delta_c = 1.686, sigma8 = 0.9, m8 = 6e14 omegam/h Msun,
    /// gamma = 0.25, masses in [1e6, 1e18] Msun.
    pub fn fiducial(params: &CosmologyParams) -> Self {
        HaloModel {
            delta_c: DELTA_C,
            sigma8: 0.9,
            m8: 6e14 * params.omegam() / params.h(),
            gamma: 0.25,
            m_min: 1e6,
            m_max: 1e18,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_c > 0.0 && self.delta_c.is_finite()) {
            return Err(Error::invalid(
                "delta-c",
                self.delta_c,
                "must be finite and > 0",
            ));
        }
        if !(self.sigma8 > 0.0 && self.sigma8.is_finite()) {
            return Err(Error::invalid(
                "sigma8",
                self.sigma8,
                "must be finite and > 0",
            ));
        }
        if !(self.m8 > 0.0 && self.m8.is_finite()) {
            return Err(Error::invalid("m8", self.m8, "must be finite and > 0"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma", self.gamma, "must lie in (0, 1)"));
        }
        if !(self.m_min > 0.0) {
            return Err(Error::invalid("m-min", self.m_min, "must be > 0"));
        }
        if !(self.m_max > self.m_min && self.m_max.is_finite()) {
            return Err(Error::invalid(
                "m-max",
                self.m_max,
                "must be finite and > m-min",
            ));
        }
        Ok(())
    }

    pub fn sigma_mass(&self, mass: f64) -> Result<f64> {
        if !(mass > 0.0) {
            return Err(Error::invalid("mass", mass, "must be > 0"));
        }
        Ok(self.sigma8 * (mass / self.m8).powf(-self.gamma))
    }

    /// Peak height `delta_c / (sigma(M) D)` for a given growth factor.
    pub fn peak_height(&self, mass: f64, growth: f64) -> Result<f64> {
        Ok(self.delta_c / (self.sigma_mass(mass)? * growth))
    }

    fn check_mass(&self, mass: f64) -> Result<()> {
        if mass >= self.m_min && mass <= self.m_max {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                what: "mass",
                value: mass,
                lo: self.m_min,
                hi: self.m_max,
            })
        }
    }
}

/// Comoving mean matter density in Msun Mpc^-3.
pub fn mean_matter_density(params: &CosmologyParams) -> f64 {
    params.matter_density() * MPC_CM.powi(3) / M_SUN_G
}

/// Linear growth factor normalized to `D(0) = 1`, from
/// `D(z) ∝ E(z) ∫_z^∞ (1+z') / E(z')^3 dz'`.
pub fn growth_factor(params: &CosmologyParams, z: f64) -> Result<QuadResult> {
    check_redshift(z)?;
    let cfg = QuadConfig::default();
    let heath = |from: f64| {
        params.guarded(|e| {
            integrate_semi_infinite(
                |zp| {
                    let ez = e(zp);
                    (1.0 + zp) / (ez * ez * ez)
                },
                from,
                &cfg,
            )
        })
    };
    let today = heath(0.0)?;
    if z == 0.0 {
        return Ok(QuadResult {
            value: 1.0,
            error_estimate: 0.0,
            ..today
        });
    }
    let then = heath(z)?;
    let ez = params.e(z)?;
    let value = ez * then.value / today.value;
    Ok(QuadResult {
        value,
        error_estimate: value
            * (then.error_estimate / then.value + today.error_estimate / today.value),
        evaluations: today.evaluations + then.evaluations,
        converged: today.converged && then.converged,
    })
}

/// `f(nu) = sqrt(2/pi) nu exp(-nu^2/2)`; `∫ f dnu/nu = 1` over `(0, ∞)`.
pub fn ps_multiplicity(nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::invalid("nu", nu, "must be > 0"));
    }
    Ok((2.0 / PI).sqrt() * nu * (-0.5 * nu * nu).exp())
}

/// Comoving halo mass function dn/dM in halos Msun^-1 Mpc^-3.
pub fn mass_function(
    model: &HaloModel,
    params: &CosmologyParams,
    mass: f64,
    z: f64,
) -> Result<f64> {
    model.validate()?;
    model.check_mass(mass)?;
    let growth = growth_factor(params, z)?.checked("growth factor")?;
    mass_function_at(model, mean_matter_density(params), mass, growth)
}

fn mass_function_at(model: &HaloModel, rho_m: f64, mass: f64, growth: f64) -> Result<f64> {
    let nu = model.peak_height(mass, growth)?;
    // |d ln sigma / d ln M| = gamma for the power law
    Ok(rho_m / (mass * mass) * ps_multiplicity(nu)? * model.gamma)
}

fn collapsed_cfg() -> QuadConfig {
    QuadConfig {
        tol: 1e-11,
        max_levels: 20,
        min_levels: 3,
    }
}

/// Mass density in halos between `m_min` and `m_max`, Msun Mpc^-3
/// comoving: `∫ M dn/dM dM`, integrated in `ln M`.
pub fn collapsed_density(
    model: &HaloModel,
    params: &CosmologyParams,
    z: f64,
) -> Result<QuadResult> {
    model.validate()?;
    let growth = growth_factor(params, z)?.checked("growth factor")?;
    collapsed_density_at(model, mean_matter_density(params), growth)
}

fn collapsed_density_at(model: &HaloModel, rho_m: f64, growth: f64) -> Result<QuadResult> {
    // M^2 dn/dM = rho_m gamma f(nu); nu is a pure exponential in ln M
    let nu_min = model.peak_height(model.m_min, growth)?;
    romberg(
        |x| {
            let nu = nu_min * (model.gamma * x).exp();
            rho_m * model.gamma * (2.0 / PI).sqrt() * nu * (-0.5 * nu * nu).exp()
        },
        0.0,
        (model.m_max / model.m_min).ln(),
        &collapsed_cfg(),
    )
}

/// `d rho_halo / dz` by central difference with half-width `step`; near
/// `z = 0` the stencil is shifted so it never samples negative redshift.
pub fn collapsed_density_slope(
    model: &HaloModel,
    params: &CosmologyParams,
    z: f64,
    step: f64,
) -> Result<f64> {
    check_redshift(z)?;
    if !(step > 0.0) {
        return Err(Error::invalid("step", step, "must be > 0"));
    }
    let lo = (z - step).max(0.0);
    let hi = lo + 2.0 * step;
    let upper = collapsed_density(model, params, hi)?.checked("collapsed density")?;
    let lower = collapsed_density(model, params, lo)?.checked("collapsed density")?;
    Ok((upper - lower) / (hi - lo))
}

/// Unclamped baryon infall rate `(Ωb/Ωm) (d rho_halo/dz) (dz/dt)`, in
/// Msun Mpc^-3 Gyr^-1.
pub fn raw_infall_rate(
    model: &HaloModel,
    params: &CosmologyParams,
    z: f64,
    step: f64,
) -> Result<f64> {
    if params.omegab() == 0.0 {
        check_redshift(z)?;
        return Ok(0.0);
    }
    let slope = collapsed_density_slope(model, params, z, step)?;
    let dz_dt = -(1.0 + z) * params.hubble_per_gyr(z)?;
    Ok(params.omegab() / params.omegam() * slope * dz_dt)
}

/// Baryon infall rate onto halos, clamped at zero.
pub fn baryon_infall_rate(model: &HaloModel, params: &CosmologyParams, z: f64) -> Result<f64> {
    Ok(raw_infall_rate(model, params, z, INFALL_DZ)?.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use libm::erfc;
    use proptest::prelude::*;

    fn flat() -> CosmologyParams {
        CosmologyParams::fiducial()
    }

    fn eds() -> CosmologyParams {
        CosmologyParams::new(1.0, 0.05, 0.0, 0.7).unwrap()
    }

    fn wide(params: &CosmologyParams) -> HaloModel {
        HaloModel {
            m_min: 1e-30,
            m_max: 1e40,
            ..HaloModel::fiducial(params)
        }
    }

    /// PS collapsed fraction between two masses:
    /// `∫ f dnu/nu = erf(nu2/√2) - erf(nu1/√2)`.
    fn erfc_oracle(model: &HaloModel, params: &CosmologyParams, growth: f64) -> f64 {
        let n1 = model.peak_height(model.m_min, growth).unwrap();
        let n2 = model.peak_height(model.m_max, growth).unwrap();
        mean_matter_density(params) * (erfc(n1 / 2f64.sqrt()) - erfc(n2 / 2f64.sqrt()))
    }

    #[test]
    fn fiducial_validates_and_rejects() {
        let m = HaloModel::fiducial(&flat());
        assert!(m.validate().is_ok());
        assert!(HaloModel { gamma: 1.0, ..m }.validate().is_err());
        assert!(HaloModel {
            m_max: m.m_min,
            ..m
        }
        .validate()
        .is_err());
        assert!(HaloModel { delta_c: 0.0, ..m }.validate().is_err());
        assert!(HaloModel { sigma8: -1.0, ..m }.validate().is_err());
    }

    #[test]
    fn sigma_examples() {
        let m = HaloModel::fiducial(&flat());
        assert_eq!(m.sigma_mass(m.m8).unwrap(), m.sigma8);
        assert_relative_eq!(
            m.sigma_mass(16.0 * m.m8).unwrap(),
            m.sigma8 / 2.0,
            max_relative = 1e-15
        );
        let far = m.sigma_mass(1e6 * m.m8).unwrap();
        assert!(far > 0.0);
        assert_relative_eq!(
            far,
            m.sigma8 * 10f64.powf(-6.0 * m.gamma),
            max_relative = 1e-12
        );
        assert!(m.sigma_mass(0.0).is_err());
    }

    #[test]
    fn growth_matches_eds_closed_form() {
        let p = eds();
        for z in [0.0, 0.5, 1.0, 3.0, 10.0, 20.0] {
            let d = growth_factor(&p, z).unwrap();
            assert!(d.converged);
            assert!((d.value - 1.0 / (1.0 + z)).abs() < 1e-4, "z = {z}");
        }
        assert_eq!(growth_factor(&flat(), 0.0).unwrap().value, 1.0);
    }

    #[test]
    fn growth_matches_brute_force_heath_integral() {
        let p = flat();
        // trapezoid in u = 1/(1+z') on (0, a]: ∫_z^∞ (1+z')/E^3 dz' = ∫_0^a u^-3 / E(1/u - 1)^3 du
        let heath = |z: f64| {
            let a = 1.0 / (1.0 + z);
            let n = 1_000_000;
            let h = a / n as f64;
            let g = |u: f64| {
                if u == 0.0 {
                    0.0
                } else {
                    let e = p.e(1.0 / u - 1.0).unwrap();
                    1.0 / (u * u * u * e * e * e)
                }
            };
            let mut s = 0.5 * (g(0.0) + g(a));
            for i in 1..n {
                s += g(i as f64 * h);
            }
            s * h
        };
        let oracle = p.e(10.0).unwrap() * heath(10.0) / heath(0.0);
        let d = growth_factor(&p, 10.0).unwrap().value;
        assert!((d - oracle).abs() < 1e-4, "{d} vs {oracle}");
        assert!(d > 0.0 && d < 1.0);
    }

    #[test]
    fn multiplicity_examples() {
        assert_relative_eq!(ps_multiplicity(1.0).unwrap(), 0.48394, max_relative = 1e-5);
        assert!(ps_multiplicity(1e-12).unwrap() < 1e-11);
        assert!(ps_multiplicity(0.0).is_err());
        assert!(ps_multiplicity(0.99).unwrap() < ps_multiplicity(1.0).unwrap());
        assert!(ps_multiplicity(1.01).unwrap() < ps_multiplicity(1.0).unwrap());

        // ∫_0^∞ f(nu) dnu / nu in ln(nu), wide finite range
        let r = romberg(
            |x| ps_multiplicity(x.exp()).unwrap(),
            -40.0,
            5.0,
            &QuadConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn mass_fraction_normalization() {
        let p = flat();
        let m = wide(&p);
        let rho = mean_matter_density(&p);
        for z in [0.0, 2.0, 8.0] {
            // independent route: integrate dn/dM through the public API in ln M
            let lnlo = m.m_min.ln();
            let lnhi = m.m_max.ln();
            let frac = romberg(
                |x| {
                    let mass = x.exp().clamp(m.m_min, m.m_max);
                    mass * mass / rho * mass_function(&m, &p, mass, z).unwrap()
                },
                lnlo,
                lnhi,
                &QuadConfig {
                    min_levels: 4,
                    ..QuadConfig::with_tol(1e-6)
                },
            )
            .unwrap();
            assert!((frac.value - 1.0).abs() < 0.01, "z = {z}: {}", frac.value);
        }
    }

    #[test]
    fn mass_function_rejects_out_of_bounds() {
        let p = flat();
        let m = HaloModel::fiducial(&p);
        assert!(matches!(
            mass_function(&m, &p, 1.0, 0.0),
            Err(Error::OutOfRange { what: "mass", .. })
        ));
    }

    #[test]
    fn high_mass_tail_suppressed_at_high_z() {
        let p = flat();
        let m = HaloModel::fiducial(&p);
        for mass in [1e14, 1e15, 1e16] {
            assert!(m.peak_height(mass, 1.0).unwrap() > 1.0);
            let now = mass_function(&m, &p, mass, 0.0).unwrap();
            let then = mass_function(&m, &p, mass, 5.0).unwrap();
            assert!(then / now < 1.0, "M = {mass}");
        }
    }

    #[test]
    fn collapsed_density_matches_erfc_oracle() {
        let p = flat();
        let m = HaloModel::fiducial(&p);
        for z in [0.0, 1.0, 5.0, 20.0] {
            let growth = growth_factor(&p, z).unwrap().value;
            let got = collapsed_density(&m, &p, z).unwrap();
            assert!(got.converged);
            assert_relative_eq!(got.value, erfc_oracle(&m, &p, growth), max_relative = 1e-9);
        }
    }

    #[test]
    fn collapsed_density_limits() {
        let p = flat();
        let rho = mean_matter_density(&p);
        let all = collapsed_density(&wide(&p), &p, 0.0).unwrap().value;
        assert!((all / rho - 1.0).abs() < 0.02);
        let m = HaloModel::fiducial(&p);
        assert!(collapsed_density(&m, &p, 1e4).unwrap().value < 1e-12 * rho);
    }

    #[test]
    fn collapsed_density_monotone_in_z() {
        let p = flat();
        let m = HaloModel::fiducial(&p);
        let rho = mean_matter_density(&p);
        let mut last = f64::INFINITY;
        for i in 0..=40 {
            let z = 0.5 * i as f64;
            let c = collapsed_density(&m, &p, z).unwrap().value;
            assert!(c <= last && c <= rho, "z = {z}");
            last = c;
        }
    }

    #[test]
    fn infall_examples() {
        let p = CosmologyParams::new(0.3, 0.0, 0.7, 0.7).unwrap();
        let m = HaloModel::fiducial(&p);
        for z in [0.0, 1.0, 10.0] {
            assert_eq!(baryon_infall_rate(&m, &p, z).unwrap(), 0.0);
        }

        let p = flat();
        let m = HaloModel::fiducial(&p);
        for z in [0.0, 0.5, 2.0, 5.0, 12.0, 19.9] {
            let slope = collapsed_density_slope(&m, &p, z, INFALL_DZ).unwrap();
            let raw = raw_infall_rate(&m, &p, z, INFALL_DZ).unwrap();
            if slope <= 0.0 {
                assert!(raw >= 0.0, "z = {z}");
            }
            assert!(baryon_infall_rate(&m, &p, z).unwrap() >= 0.0);
        }
    }

    #[test]
    fn infall_step_refinement() {
        let p = flat();
        let m = HaloModel::fiducial(&p);
        let coarse = raw_infall_rate(&m, &p, 5.0, INFALL_DZ).unwrap();
        let fine = raw_infall_rate(&m, &p, 5.0, INFALL_DZ / 10.0).unwrap();
        assert_relative_eq!(coarse, fine, max_relative = 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn mass_function_non_negative(lm in 6.0f64..18.0, z in 0.0f64..20.0) {
            let p = flat();
            let m = HaloModel::fiducial(&p);
            prop_assert!(mass_function(&m, &p, 10f64.powf(lm), z).unwrap() >= 0.0);
        }

        #[test]
        fn peak_height_increases_with_mass_and_z(lm in 6.0f64..17.0, z in 0.0f64..19.0) {
            let p = flat();
            let m = HaloModel::fiducial(&p);
            let d0 = growth_factor(&p, z).unwrap().value;
            let d1 = growth_factor(&p, z + 1.0).unwrap().value;
            let mass = 10f64.powf(lm);
            prop_assert!(m.peak_height(mass * 10.0, d0).unwrap() > m.peak_height(mass, d0).unwrap());
            prop_assert!(m.peak_height(mass, d1).unwrap() > m.peak_height(mass, d0).unwrap());
        }
    }
}
