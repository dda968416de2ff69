//! Stochastic gravitational-wave background from stellar collapse to black
//! holes.
//!
//! Black holes form at a rate proportional to the star formation history,
//! weighted by a Salpeter-like IMF `phi(m) ∝ m^-imf_slope`. Each event
//! radiates `epsilon m_bh c^2` in a Gaussian line centred on
//! `nu_char = fq_coeff c^3 / (G m_bh)`. A single effective black-hole mass
//! (the IMF mean above the formation threshold) stands in for a full mass
//! integral. The background is
//!
//! ```text
//! Omega_gw(nu) = nu / (rho_c c^2 H0) ∫ R_bh(z) dE/dnu(nu (1+z)) / ((1+z) E(z)) dz
//! ```

use std::f64::consts::PI;
use std::sync::Mutex;

use libm::erfc;

use crate::constants::{C_CGS, GYR_S, G_CGS, MPC_CM, M_SUN_G};
use crate::cosmo::CosmologyParams;
use crate::numerics::{romberg, QuadConfig, QuadResult};
use crate::parsweep::run_sweep;
use crate::starform::CsfrTable;
use crate::{Error, Result};

/// Characteristic frequency of a 1 Msun collapse under the default law, Hz.
pub const NU_CHAR_SOLAR_HZ: f64 = 1.29e4;

/// Panels in `ln(1+z)` for the redshift integral.
const Z_PANELS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GwSourceModel {
    pub imf_slope: f64,
    /// IMF support, Msun.
    pub m_low: f64,
    pub m_up: f64,
    /// Lightest progenitor that collapses to a black hole, Msun.
    pub m_bh_min: f64,
    /// Fraction of rest-mass energy radiated in gravitational waves.
    pub epsilon: f64,
    /// Dimensionless coefficient of `nu_char = fq_coeff c^3 / (G m)`.
    pub fq_coeff: f64,
    /// Gaussian width as a fraction of `nu_char`.
    pub bandwidth_frac: f64,
}

impl Default for GwSourceModel {
    fn default() -> Self {
        GwSourceModel {
            imf_slope: 2.35,
            m_low: 0.1,
            m_up: 125.0,
            m_bh_min: 25.0,
            epsilon: 1e-4,
            fq_coeff: NU_CHAR_SOLAR_HZ * G_CGS * M_SUN_G / C_CGS.powi(3),
            bandwidth_frac: 0.3,
        }
    }
}

impl GwSourceModel {
    pub fn validate(&self) -> Result<()> {
        if !self.imf_slope.is_finite() {
            return Err(Error::invalid(
                "imf-slope",
                self.imf_slope,
                "must be finite",
            ));
        }
        if !(self.m_low > 0.0) {
            return Err(Error::invalid("m-low", self.m_low, "must be > 0"));
        }
        if !(self.m_bh_min > self.m_low) {
            return Err(Error::invalid("m-bh-min", self.m_bh_min, "must be > m-low"));
        }
        if !(self.m_up > self.m_bh_min && self.m_up.is_finite()) {
            return Err(Error::invalid(
                "m-up",
                self.m_up,
                "must be finite and > m-bh-min",
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid(
                "epsilon",
                self.epsilon,
                "must lie in (0, 1)",
            ));
        }
        if !(self.fq_coeff > 0.0 && self.fq_coeff.is_finite()) {
            return Err(Error::invalid(
                "fq-coeff",
                self.fq_coeff,
                "must be finite and > 0",
            ));
        }
        if !(self.bandwidth_frac > 0.0 && self.bandwidth_frac < 1.0) {
            return Err(Error::invalid(
                "bandwidth-frac",
                self.bandwidth_frac,
                "must lie in (0, 1)",
            ));
        }
        Ok(())
    }

    /// Line centre for a black hole of `m_bh` Msun, Hz.
    pub fn nu_char(&self, m_bh: f64) -> f64 {
        self.fq_coeff * C_CGS.powi(3) / (G_CGS * m_bh * M_SUN_G)
    }

    /// `∫_a^b m^(power - imf_slope) dm` in closed form.
    fn imf_moment(&self, power: f64, a: f64, b: f64) -> f64 {
        let k = power - self.imf_slope + 1.0;
        if k == 0.0 {
            (b / a).ln()
        } else {
            (b.powf(k) - a.powf(k)) / k
        }
    }

    /// Black holes formed per solar mass of stars formed, Msun^-1.
    pub fn bh_per_unit_mass(&self) -> f64 {
        self.imf_moment(0.0, self.m_bh_min, self.m_up) / self.imf_moment(1.0, self.m_low, self.m_up)
    }

    /// IMF-weighted mean progenitor mass above the threshold, Msun.
    pub fn mean_bh_mass(&self) -> f64 {
        self.imf_moment(1.0, self.m_bh_min, self.m_up)
            / self.imf_moment(0.0, self.m_bh_min, self.m_up)
    }
}

/// A star formation history usable as the source term.
pub trait SourceHistory {
    /// Star formation rate density at `z`, Msun Mpc^-3 Gyr^-1.
    fn csfr(&self, z: f64) -> Result<f64>;
    /// `(lowest, highest)` redshift with data.
    fn z_range(&self) -> (f64, f64);
    /// Largest rate in the history; sets the quadrature scale.
    fn peak_rate(&self) -> f64;
}

impl SourceHistory for CsfrTable {
    fn csfr(&self, z: f64) -> Result<f64> {
        self.csfr_at(z)
    }

    fn z_range(&self) -> (f64, f64) {
        CsfrTable::z_range(self)
    }

    fn peak_rate(&self) -> f64 {
        self.csfr.iter().copied().fold(0.0, f64::max)
    }
}

/// Black-hole formation rate density, Mpc^-3 Gyr^-1.
pub fn bh_formation_rate<H: SourceHistory + ?Sized>(
    model: &GwSourceModel,
    history: &H,
    z: f64,
) -> Result<f64> {
    Ok(history.csfr(z)? * model.bh_per_unit_mass())
}

/// Energy spectrum of one collapse, erg Hz^-1, normalized so that
/// `∫_0^∞ dE/dnu dnu = epsilon m_bh c^2`.
pub fn spectral_energy(model: &GwSourceModel, nu_e: f64, m_bh: f64) -> Result<f64> {
    if !(nu_e > 0.0) {
        return Err(Error::invalid("nu", nu_e, "must be > 0"));
    }
    if !(m_bh > 0.0) {
        return Err(Error::invalid("m_bh", m_bh, "must be > 0"));
    }
    Ok(line_profile(model, nu_e, m_bh))
}

fn line_profile(model: &GwSourceModel, nu_e: f64, m_bh: f64) -> f64 {
    let total = model.epsilon * m_bh * M_SUN_G * C_CGS * C_CGS;
    let centre = model.nu_char(m_bh);
    let width = model.bandwidth_frac * centre;
    // mass of the Gaussian above nu = 0
    let kept = 0.5 * erfc(-centre / (width * 2f64.sqrt()));
    let s = (nu_e - centre) / width;
    total * (-0.5 * s * s).exp() / (width * (2.0 * PI).sqrt() * kept)
}

/// Dimensionless energy density per logarithmic frequency interval at the
/// observed frequency `nu_obs` (Hz).
pub fn omega_gw<H: SourceHistory + ?Sized>(
    model: &GwSourceModel,
    history: &H,
    params: &CosmologyParams,
    nu_obs: f64,
) -> Result<QuadResult> {
    model.validate()?;
    if !(nu_obs > 0.0 && nu_obs.is_finite()) {
        return Err(Error::invalid("nu", nu_obs, "must be finite and > 0"));
    }
    let peak = history.peak_rate();
    let zero = QuadResult {
        value: 0.0,
        error_estimate: 0.0,
        evaluations: 0,
        converged: true,
    };
    if peak <= 0.0 {
        return Ok(zero);
    }

    let m_bh = model.mean_bh_mass();
    let centre = model.nu_char(m_bh);
    // integrand ~ O(1) after dividing by these, so the quadrature floor is
    // relative to the brightest possible contribution
    let line_scale = model.epsilon * m_bh * M_SUN_G * C_CGS * C_CGS / centre;
    let rate_scale = peak * model.bh_per_unit_mass();

    let (z_lo, z_hi) = history.z_range();
    let (x_lo, x_hi) = (z_lo.ln_1p(), z_hi.ln_1p());
    if !(x_hi > x_lo) {
        return Ok(zero);
    }

    let failed: Mutex<Option<Error>> = Mutex::new(None);
    let record = |err: Error| {
        let mut slot = failed.lock().unwrap();
        slot.get_or_insert(err);
        f64::NAN
    };
    // in x = ln(1+z) the (1+z) Jacobian cancels the redshift factor
    let integrand = |x: f64| -> f64 {
        let z = x.exp_m1().clamp(z_lo, z_hi);
        let rate = match bh_formation_rate(model, history, z) {
            Ok(r) => r,
            Err(e) => return record(e),
        };
        let e = match params.e(z) {
            Ok(e) => e,
            Err(err) => return record(err),
        };
        rate / rate_scale * line_profile(model, nu_obs * (1.0 + z), m_bh) / line_scale / e
    };

    let cfg = QuadConfig {
        tol: 1e-8,
        max_levels: 20,
        min_levels: 4,
    };
    let width = (x_hi - x_lo) / Z_PANELS as f64;
    let mut total = zero;
    for p in 0..Z_PANELS {
        let a = x_lo + p as f64 * width;
        let b = if p + 1 == Z_PANELS { x_hi } else { a + width };
        let r = romberg(integrand, a, b, &cfg);
        if let Some(err) = failed.lock().unwrap().take() {
            return Err(err);
        }
        let r = r?;
        total.value += r.value;
        total.error_estimate += r.error_estimate;
        total.evaluations += r.evaluations;
        total.converged &= r.converged;
    }

    let rate_cgs = rate_scale / (MPC_CM.powi(3) * GYR_S);
    let prefactor = nu_obs / (params.critical_density() * C_CGS * C_CGS * params.h0());
    Ok(total.scaled(prefactor * rate_cgs * line_scale))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwSpectrum {
    pub nu_obs: Vec<f64>,
    pub omega_gw: Vec<f64>,
    /// Frequencies whose redshift integral hit `max_levels` unconverged.
    pub unconverged: Vec<f64>,
}

/// `points` log-spaced frequencies from `nu_min` to `nu_max` inclusive.
pub fn log_grid(nu_min: f64, nu_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(nu_min > 0.0 && nu_min.is_finite()) {
        return Err(Error::invalid("nu-min", nu_min, "must be finite and > 0"));
    }
    if !(nu_max > nu_min && nu_max.is_finite()) {
        return Err(Error::invalid(
            "nu-max",
            nu_max,
            "must be finite and > nu-min",
        ));
    }
    if points == 0 {
        return Err(Error::invalid("nu-points", 0.0, "must be >= 1"));
    }
    if points == 1 {
        return Ok(vec![nu_min]);
    }
    let (lo, hi) = (nu_min.ln(), nu_max.ln());
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| match i {
            0 => nu_min,
            _ if i + 1 == points => nu_max,
            _ => (lo + i as f64 * step).exp(),
        })
        .collect())
}

/// Evaluates [`omega_gw`] over `nu_grid` with [`run_sweep`].
pub fn spectrum_sweep<H: SourceHistory + Sync + ?Sized>(
    model: &GwSourceModel,
    history: &H,
    params: &CosmologyParams,
    nu_grid: &[f64],
    workers: usize,
) -> Result<GwSpectrum> {
    if let Some(&bad) = nu_grid.iter().find(|nu| !(**nu > 0.0 && nu.is_finite())) {
        return Err(Error::invalid("nu", bad, "must be finite and > 0"));
    }
    let unconverged = Mutex::new(Vec::new());
    let omega = run_sweep(
        nu_grid,
        |nu| {
            let r = omega_gw(model, history, params, nu)?;
            if !r.converged {
                unconverged.lock().unwrap().push(nu);
            }
            Ok::<_, Error>(r.value)
        },
        workers,
    )
    .map_err(|fault| fault.source)?;
    let mut unconverged = unconverged.into_inner().unwrap();
    unconverged.sort_by(f64::total_cmp);
    Ok(GwSpectrum {
        nu_obs: nu_grid.to_vec(),
        omega_gw: omega,
        unconverged,
    })
}
