//! One-zone baryon reservoir feeding star formation.
//!
//! ```text
//! d rho_b / dt = infall(z) - rho_b / tau
//! d rho_*  / dt = rho_b / tau
//! ```
//!
//! The pair is integrated with RK4 on the descending sweep grid, using
//! redshift as the independent variable through `dt/dz = -1/((1+z) H)`.
//! Cumulative infall is carried as a third component, so the discrete
//! bookkeeping `stars + reservoir = infall` holds to round-off.

use std::cell::Cell;
use std::collections::HashMap;

use crate::cosmo::CosmologyParams;
use crate::numerics::Rk4;
use crate::parsweep::{make_grid, run_sweep, SweepSpec};
use crate::structure::{baryon_infall_rate, HaloModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarFormModel {
    /// Star formation timescale, Gyr. `f64::INFINITY` switches star
    /// formation off.
    pub tau: f64,
    pub z_start: f64,
    pub np: usize,
}

impl Default for StarFormModel {
    fn default() -> Self {
        StarFormModel {
            tau: 2.0,
            z_start: 20.0,
            np: 10_000,
        }
    }
}

impl StarFormModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau", self.tau, "must be > 0"));
        }
        SweepSpec::new(self.np, self.z_start, 1).map(|_| ())
    }
}

/// Evolution on the descending grid. `stars` and `infall` are cumulative
/// since `z_start`; every array has one entry per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct CsfrTable {
    pub z: Vec<f64>,
    /// Reservoir density, Msun Mpc^-3.
    pub rho_b: Vec<f64>,
    /// Star formation rate density, Msun Mpc^-3 Gyr^-1.
    pub csfr: Vec<f64>,
    pub stars: Vec<f64>,
    pub infall: Vec<f64>,
}

impl CsfrTable {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// `(lowest, highest)` tabulated redshift.
    pub fn z_range(&self) -> (f64, f64) {
        (self.z[self.z.len() - 1], self.z[0])
    }

    /// Linear interpolation of the rate; exact at nodes.
    pub fn csfr_at(&self, z: f64) -> Result<f64> {
        let (lo, hi) = self.z_range();
        if !(z >= lo && z <= hi) {
            return Err(Error::OutOfRange {
                what: "z",
                value: z,
                lo,
                hi,
            });
        }
        // first index whose node lies at or below z (grid is descending)
        let i = self.z.partition_point(|&node| node > z);
        if self.z[i] == z || i == 0 {
            return Ok(self.csfr[i]);
        }
        let (z_hi, z_lo) = (self.z[i - 1], self.z[i]);
        let t = (z_hi - z) / (z_hi - z_lo);
        Ok((1.0 - t) * self.csfr[i - 1] + t * self.csfr[i])
    }

    /// Largest `|stars + rho_b - infall| / infall` over the grid.
    pub fn conservation_residual(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let gap = (self.stars[i] + self.rho_b[i] - self.infall[i]).abs();
                if gap == 0.0 {
                    0.0
                } else {
                    gap / self.infall[i].abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Evolves the reservoir fed by Press-Schechter baryon infall.
pub fn evolve_csfr(
    model: &StarFormModel,
    halo: &HaloModel,
    params: &CosmologyParams,
) -> Result<CsfrTable> {
    evolve_csfr_with_workers(model, halo, params, 1)
}

/// [`evolve_csfr`] with the infall rate at every RK4 abscissa evaluated up
/// front by [`run_sweep`]. The table is bitwise independent of `workers`.
pub fn evolve_csfr_with_workers(
    model: &StarFormModel,
    halo: &HaloModel,
    params: &CosmologyParams,
    workers: usize,
) -> Result<CsfrTable> {
    halo.validate()?;
    model.validate()?;
    let nodes =
        rk4_abscissas(&make_grid(&SweepSpec::new(model.np, model.z_start, 1)?)?.into_values());
    let rates = run_sweep(&nodes, |z| baryon_infall_rate(halo, params, z), workers)
        .map_err(|fault| fault.source)?;
    let lookup: HashMap<u64, f64> = nodes.iter().map(|z| z.to_bits()).zip(rates).collect();
    let (lo, hi) = (nodes[nodes.len() - 1], nodes[0]);
    evolve_with_infall(model, params, |z| {
        lookup.get(&z.to_bits()).copied().ok_or(Error::OutOfRange {
            what: "infall abscissa",
            value: z,
            lo,
            hi,
        })
    })
}

/// Every redshift at which a step from `grid[i-1]` to `grid[i]` samples
/// the source, computed exactly as [`Rk4::step`] does; descending, unique.
fn rk4_abscissas(grid: &[f64]) -> Vec<f64> {
    let mut nodes = Vec::with_capacity(3 * grid.len());
    nodes.push(grid[0]);
    for w in grid.windows(2) {
        let h = w[1] - w[0];
        nodes.extend([w[0], w[0] + 0.5 * h, w[0] + h]);
    }
    nodes.sort_by(|a, b| b.total_cmp(a));
    nodes.dedup();
    nodes
}

/// Evolves the reservoir for an arbitrary infall history (Msun Mpc^-3
/// Gyr^-1 as a function of redshift), starting empty at `z_start`.
pub fn evolve_with_infall<I>(
    model: &StarFormModel,
    params: &CosmologyParams,
    infall: I,
) -> Result<CsfrTable>
where
    I: Fn(f64) -> Result<f64>,
{
    model.validate()?;
    let grid = make_grid(&SweepSpec::new(model.np, model.z_start, 1)?)?.into_values();
    let n = grid.len();
    let inv_tau = 1.0 / model.tau;

    // RK4 samples each step's end point again as the next step's start
    let mut memo: [(f64, f64); 3] = [(f64::NAN, 0.0); 3];
    let mut memo_next = 0;
    let failure: Cell<Option<Error>> = Cell::new(None);

    let mut deriv = |z: f64, y: &[f64], dy: &mut [f64]| {
        let rates = (|| -> Result<(f64, f64)> {
            let source = match memo.iter().find(|(zm, _)| *zm == z) {
                Some(&(_, v)) => v,
                None => {
                    let v = infall(z)?;
                    memo[memo_next] = (z, v);
                    memo_next = (memo_next + 1) % memo.len();
                    v
                }
            };
            Ok((source, params.dt_dz(z)?))
        })();
        match rates {
            Ok((source, dt_dz)) => {
                let formed = y[0] * inv_tau;
                dy[0] = (source - formed) * dt_dz;
                dy[1] = formed * dt_dz;
                dy[2] = source * dt_dz;
            }
            Err(err) => {
                let first = failure.take().unwrap_or(err);
                failure.set(Some(first));
                dy.fill(f64::NAN);
            }
        }
    };

    let mut table = CsfrTable {
        z: grid.clone(),
        rho_b: vec![0.0; n],
        csfr: vec![0.0; n],
        stars: vec![0.0; n],
        infall: vec![0.0; n],
    };
    let mut state = [0.0; 3];
    let mut rk = Rk4::new(3);

    for i in 1..n {
        let (z0, z1) = (grid[i - 1], grid[i]);
        if let Err(err) = rk.step(&mut deriv, z0, z1 - z0, &mut state) {
            return Err(failure.take().unwrap_or(match err {
                Error::NonFiniteDerivative { t } => Error::NonFiniteState { z: t },
                other => other,
            }));
        }
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { z: z1 });
        }
        if state[0] < 0.0 {
            return Err(Error::NegativeReservoir {
                z: z1,
                value: state[0],
            });
        }
        table.rho_b[i] = state[0];
        table.csfr[i] = state[0] * inv_tau;
        table.stars[i] = state[1];
        table.infall[i] = state[2];
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eds() -> CosmologyParams {
        CosmologyParams::new(1.0, 0.05, 0.0, 0.7).unwrap()
    }

    #[test]
    fn validation() {
        assert!(StarFormModel::default().validate().is_ok());
        assert!(StarFormModel {
            tau: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(StarFormModel {
            np: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(StarFormModel {
            z_start: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn zero_infall_gives_zero_rate() {
        let p = CosmologyParams::new(0.3, 0.0, 0.7, 0.7).unwrap();
        let m = StarFormModel {
            np: 200,
            ..Default::default()
        };
        let t = evolve_csfr(&m, &HaloModel::fiducial(&p), &p).unwrap();
        assert_eq!(t.len(), 200);
        assert!(t.csfr.iter().all(|&c| c == 0.0));
        assert!(t.rho_b.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn constant_infall_without_star_formation_accumulates_linearly() {
        let p = eds();
        let i0 = 0.37;
        let m = StarFormModel {
            tau: f64::INFINITY,
            z_start: 20.0,
            np: 2000,
        };
        let t = evolve_with_infall(&m, &p, |_| Ok(i0)).unwrap();
        // EdS: t(z) = (2/3) / H0 (1+z)^-1.5
        let age = |z: f64| 2.0 / 3.0 / p.h0_per_gyr() * (1.0 + z).powf(-1.5);
        for i in (0..t.len()).step_by(97) {
            let expect = i0 * (age(t.z[i]) - age(m.z_start));
            assert_relative_eq!(t.rho_b[i], expect, max_relative = 1e-8, epsilon = 1e-14);
            assert_eq!(t.csfr[i], 0.0);
        }
    }

    #[test]
    fn constant_infall_reaches_steady_state() {
        let p = CosmologyParams::fiducial();
        let i0 = 2.5;
        let m = StarFormModel {
            tau: 2.0,
            z_start: 20.0,
            np: 2000,
        };
        let t = evolve_with_infall(&m, &p, |_| Ok(i0)).unwrap();
        let last = t.len() - 1;
        assert_relative_eq!(t.rho_b[last], i0 * m.tau, max_relative = 0.01);
        assert_relative_eq!(t.csfr[last], i0, max_relative = 0.01);
    }

    #[test]
    fn infall_errors_abort_with_their_cause() {
        let p = CosmologyParams::fiducial();
        let m = StarFormModel {
            np: 100,
            ..Default::default()
        };
        let err = evolve_with_infall(&m, &p, |z| {
            if z < 10.0 {
                Err(Error::invalid("infall", z, "synthetic failure"))
            } else {
                Ok(1.0)
            }
        })
        .unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidParameter {
                field: "infall",
                ..
            }
        ));

        let err =
            evolve_with_infall(&m, &p, |z| Ok(if z < 5.0 { f64::NAN } else { 1.0 })).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { z } if z < 5.0));
    }

    #[test]
    fn worker_count_does_not_change_the_table() {
        let p = CosmologyParams::fiducial();
        let halo = HaloModel::fiducial(&p);
        let m = StarFormModel {
            np: 300,
            ..Default::default()
        };
        let direct = evolve_with_infall(&m, &p, |z| baryon_infall_rate(&halo, &p, z)).unwrap();
        for workers in [1, 3, 4] {
            assert_eq!(
                evolve_csfr_with_workers(&m, &halo, &p, workers).unwrap(),
                direct
            );
        }
    }

    fn small_table() -> CsfrTable {
        CsfrTable {
            z: vec![4.0, 3.0, 2.0, 1.0],
            rho_b: vec![0.0, 2.0, 4.0, 6.0],
            csfr: vec![0.0, 1.0, 2.0, 3.0],
            stars: vec![0.0; 4],
            infall: vec![0.0; 4],
        }
    }

    #[test]
    fn interpolation() {
        let t = small_table();
        for (z, c) in t.z.iter().zip(&t.csfr) {
            assert_eq!(t.csfr_at(*z).unwrap(), *c);
        }
        assert_relative_eq!(t.csfr_at(2.5).unwrap(), 1.5, max_relative = 1e-15);
        assert_relative_eq!(t.csfr_at(1.25).unwrap(), 2.75, max_relative = 1e-15);
        assert!(matches!(t.csfr_at(0.5), Err(Error::OutOfRange { .. })));
        assert!(t.csfr_at(4.01).is_err());
        assert!(t.csfr_at(f64::NAN).is_err());
    }

    #[test]
    fn interpolation_midpoints_on_sweep_grid() {
        let p = CosmologyParams::fiducial();
        let m = StarFormModel {
            np: 400,
            ..Default::default()
        };
        let t = evolve_with_infall(&m, &p, |z| Ok(1.0 + z.sin())).unwrap();
        for i in (1..t.len()).step_by(37) {
            let mid = 0.5 * (t.z[i - 1] + t.z[i]);
            let mean = 0.5 * (t.csfr[i - 1] + t.csfr[i]);
            assert_relative_eq!(t.csfr_at(mid).unwrap(), mean, max_relative = 1e-12);
        }
    }

    #[test]
    fn bookkeeping_holds_for_synthetic_infall() {
        let p = CosmologyParams::fiducial();
        let m = StarFormModel {
            np: 1000,
            tau: 0.7,
            ..Default::default()
        };
        let t = evolve_with_infall(&m, &p, |z| Ok((-(z - 3.0).powi(2)).exp())).unwrap();
        assert!(t.conservation_residual() < 1e-10);
        assert!(t.csfr.iter().all(|&c| c >= 0.0));
    }
}
