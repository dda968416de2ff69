//! Run configuration assembled from defaults, a `key = value` file, the
//! `GRAVSWEEP_WORKERS` environment variable and command-line flags, in
//! increasing order of precedence. The environment is not consulted when
//! `--workers` is given.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gravsweep_core::cosmo::CosmologyParams;
use gravsweep_core::gwspec::GwSourceModel;
use gravsweep_core::numerics::QuadConfig;
use gravsweep_core::parsweep::{default_workers, SweepSpec};
use gravsweep_core::starform::StarFormModel;
use gravsweep_core::structure::HaloModel;

use crate::failure::Failure;

pub const WORKERS_ENV: &str = "GRAVSWEEP_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("expected csv or json, got {other:?}")),
        }
    }
}

/// Every settable field. Keys are the long flag names without `--`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub omega_m: f64,
    pub omega_b: f64,
    pub omega_l: f64,
    pub h: f64,
    pub np: usize,
    pub zmax: f64,
    pub workers: usize,
    /// Quadrature tolerance; `None` uses the subcommand's default.
    pub tol: Option<f64>,
    pub delta_c: f64,
    pub sigma8: f64,
    /// `None` derives the value from the cosmology.
    pub m8: Option<f64>,
    pub gamma: f64,
    pub m_min: f64,
    pub m_max: f64,
    pub tau: f64,
    pub imf_slope: f64,
    pub m_low: f64,
    pub m_up: f64,
    pub m_bh_min: f64,
    pub epsilon: f64,
    pub fq_coeff: f64,
    pub bandwidth_frac: f64,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = CosmologyParams::fiducial();
        let halo = HaloModel::fiducial(&p);
        let sf = StarFormModel::default();
        let gw = GwSourceModel::default();
        RunConfig {
            omega_m: p.omegam(),
            omega_b: p.omegab(),
            omega_l: p.omegal(),
            h: p.h(),
            np: sf.np,
            zmax: sf.z_start,
            workers: default_workers(),
            tol: None,
            delta_c: halo.delta_c,
            sigma8: halo.sigma8,
            m8: None,
            gamma: halo.gamma,
            m_min: halo.m_min,
            m_max: halo.m_max,
            tau: sf.tau,
            imf_slope: gw.imf_slope,
            m_low: gw.m_low,
            m_up: gw.m_up,
            m_bh_min: gw.m_bh_min,
            epsilon: gw.epsilon,
            fq_coeff: gw.fq_coeff,
            bandwidth_frac: gw.bandwidth_frac,
            format: Format::Csv,
            out: None,
        }
    }
}

/// A configuration value as echoed into output files.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Count(usize),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(x) => f.write_str(&render_real(*x)),
            Value::Count(n) => write!(f, "{n}"),
        }
    }
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn render_real(x: f64) -> String {
    format!("{x:?}")
}

fn parse<T: FromStr>(key: &str, raw: &str) -> Result<T, Failure>
where
    T::Err: fmt::Display,
{
    raw.parse()
        .map_err(|e| Failure::validation(format!("{key}: cannot parse {raw:?}: {e}")))
}

impl RunConfig {
    /// Applies one `key = value` setting. Underscores in `key` are accepted
    /// in place of dashes.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), Failure> {
        let key = key.replace('_', "-");
        let k = key.as_str();
        match k {
            "omega-m" => self.omega_m = parse(k, raw)?,
            "omega-b" => self.omega_b = parse(k, raw)?,
            "omega-l" => self.omega_l = parse(k, raw)?,
            "h" => self.h = parse(k, raw)?,
            "np" => self.np = parse(k, raw)?,
            "zmax" => self.zmax = parse(k, raw)?,
            "workers" => self.workers = parse(k, raw)?,
            "tol" => self.tol = Some(parse(k, raw)?),
            "delta-c" => self.delta_c = parse(k, raw)?,
            "sigma8" => self.sigma8 = parse(k, raw)?,
            "m8" => self.m8 = Some(parse(k, raw)?),
            "gamma" => self.gamma = parse(k, raw)?,
            "m-min" => self.m_min = parse(k, raw)?,
            "m-max" => self.m_max = parse(k, raw)?,
            "tau" => self.tau = parse(k, raw)?,
            "imf-slope" => self.imf_slope = parse(k, raw)?,
            "m-low" => self.m_low = parse(k, raw)?,
            "m-up" => self.m_up = parse(k, raw)?,
            "m-bh-min" => self.m_bh_min = parse(k, raw)?,
            "epsilon" => self.epsilon = parse(k, raw)?,
            "fq-coeff" => self.fq_coeff = parse(k, raw)?,
            "bandwidth-frac" => self.bandwidth_frac = parse(k, raw)?,
            "format" => self.format = parse(k, raw)?,
            "out" => self.out = Some(PathBuf::from(raw)),
            _ => {
                return Err(Failure::validation(format!(
                    "unknown configuration key {k:?}"
                )))
            }
        }
        Ok(())
    }

    /// Applies every setting of a config file body. Blank lines and text
    /// after `#` are ignored.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), Failure> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Failure::validation(format!(
                    "{origin}:{}: expected `key = value`, got {line:?}",
                    n + 1
                ))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|f| f.context(&format!("{origin}:{}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::validation(format!("cannot read config file {}: {e}", path.display()))
        })?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies the worker-count environment override if `value` is set.
    pub fn apply_env_workers(&mut self, value: Option<&str>) -> Result<(), Failure> {
        let Some(raw) = value else { return Ok(()) };
        match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                self.workers = n;
                Ok(())
            }
            _ => Err(Failure::validation(format!(
                "{WORKERS_ENV}: expected a positive integer, got {raw:?}"
            ))),
        }
    }

    pub fn cosmology(&self) -> Result<CosmologyParams, Failure> {
        Ok(CosmologyParams::new(
            self.omega_m,
            self.omega_b,
            self.omega_l,
            self.h,
        )?)
    }

    pub fn halo(&self, params: &CosmologyParams) -> Result<HaloModel, Failure> {
        let base = HaloModel::fiducial(params);
        let halo = HaloModel {
            delta_c: self.delta_c,
            sigma8: self.sigma8,
            m8: self.m8.unwrap_or(base.m8),
            gamma: self.gamma,
            m_min: self.m_min,
            m_max: self.m_max,
        };
        halo.validate()?;
        Ok(halo)
    }

    pub fn starform(&self) -> Result<StarFormModel, Failure> {
        let model = StarFormModel {
            tau: self.tau,
            z_start: self.zmax,
            np: self.np,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn source(&self) -> Result<GwSourceModel, Failure> {
        let model = GwSourceModel {
            imf_slope: self.imf_slope,
            m_low: self.m_low,
            m_up: self.m_up,
            m_bh_min: self.m_bh_min,
            epsilon: self.epsilon,
            fq_coeff: self.fq_coeff,
            bandwidth_frac: self.bandwidth_frac,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn sweep(&self) -> Result<SweepSpec, Failure> {
        Ok(SweepSpec::new(self.np, self.zmax, self.workers)?)
    }

    pub fn quad(&self, default_tol: f64) -> Result<QuadConfig, Failure> {
        let cfg = QuadConfig::with_tol(self.tol.unwrap_or(default_tol));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that every assembled domain value passes its own validation.
    pub fn validate(&self) -> Result<(), Failure> {
        let params = self.cosmology()?;
        self.halo(&params)?;
        self.starform()?;
        self.source()?;
        self.sweep()?;
        self.quad(QuadConfig::default().tol)?;
        Ok(())
    }

    pub fn cosmology_entries(&self) -> Vec<(&'static str, Value)> {
        vec![
            ("omega-m", Value::Real(self.omega_m)),
            ("omega-b", Value::Real(self.omega_b)),
            ("omega-l", Value::Real(self.omega_l)),
            ("h", Value::Real(self.h)),
        ]
    }

    pub fn grid_entries(&self) -> Vec<(&'static str, Value)> {
        vec![
            ("np", Value::Count(self.np)),
            ("zmax", Value::Real(self.zmax)),
        ]
    }

    /// Cosmology, halo and star formation settings with `m8` resolved.
    pub fn csfr_entries(&self) -> Result<Vec<(&'static str, Value)>, Failure> {
        let halo = self.halo(&self.cosmology()?)?;
        let mut e = self.cosmology_entries();
        e.extend(self.grid_entries());
        e.extend([
            ("delta-c", Value::Real(halo.delta_c)),
            ("sigma8", Value::Real(halo.sigma8)),
            ("m8", Value::Real(halo.m8)),
            ("gamma", Value::Real(halo.gamma)),
            ("m-min", Value::Real(halo.m_min)),
            ("m-max", Value::Real(halo.m_max)),
            ("tau", Value::Real(self.tau)),
        ]);
        Ok(e)
    }

    pub fn source_entries(&self) -> Vec<(&'static str, Value)> {
        vec![
            ("imf-slope", Value::Real(self.imf_slope)),
            ("m-low", Value::Real(self.m_low)),
            ("m-up", Value::Real(self.m_up)),
            ("m-bh-min", Value::Real(self.m_bh_min)),
            ("epsilon", Value::Real(self.epsilon)),
            ("fq-coeff", Value::Real(self.fq_coeff)),
            ("bandwidth-frac", Value::Real(self.bandwidth_frac)),
        ]
    }
}
