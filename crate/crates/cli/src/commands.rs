use std::sync::atomic::{AtomicUsize, Ordering};

use gravsweep_core::cosmo::scale_factor;
use gravsweep_core::gwspec::{log_grid, spectrum_sweep};
use gravsweep_core::numerics::QuadConfig;
use gravsweep_core::parsweep::{
    benchmark_sweep, make_grid, reference_evaluator, run_sweep, BenchError, SweepFault,
};
use gravsweep_core::starform::evolve_csfr_with_workers;
use gravsweep_core::Error;

use crate::config::{RunConfig, Value};
use crate::failure::Failure;
use crate::output::Table;

/// Redshifts tabulated by `cosmo` when none are given.
pub const DEFAULT_REDSHIFTS: [f64; 8] = [0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0];

/// Tolerance used by `bench` unless one is configured.
pub const BENCH_TOL: f64 = 1e-12;

fn fault(f: SweepFault<Error>) -> Failure {
    let kind = Failure::from(f.source.clone()).kind;
    Failure {
        kind,
        message: f.to_string(),
    }
}

pub fn cosmo(cfg: &RunConfig, redshifts: &[f64]) -> Result<Table, Failure> {
    let params = cfg.cosmology()?;
    if let Some(&bad) = redshifts.iter().find(|z| !(**z >= 0.0 && z.is_finite())) {
        return Err(Failure::validation(format!(
            "z = {bad}: must be finite and >= 0"
        )));
    }
    let age =
        run_sweep(redshifts, |z| params.age(z)?.checked("age"), cfg.workers).map_err(fault)?;
    let dist = run_sweep(
        redshifts,
        |z| params.comoving_distance(z)?.checked("comoving distance"),
        cfg.workers,
    )
    .map_err(fault)?;
    let mut rows = Vec::with_capacity(redshifts.len());
    for (i, &z) in redshifts.iter().enumerate() {
        rows.push(vec![
            z,
            scale_factor(z),
            params.e(z)?,
            params.hubble_km_s_mpc(z)?,
            age[i],
            dist[i],
        ]);
    }
    Ok(Table {
        columns: vec!["z", "a", "E", "H", "age_Gyr", "d_C_Mpc"],
        rows,
        config: cfg.cosmology_entries(),
        ..Table::default()
    })
}

pub fn sweep(cfg: &RunConfig) -> Result<Table, Failure> {
    let quad = cfg.quad(QuadConfig::default().tol)?;
    let grid = make_grid(&cfg.sweep()?)?;
    let values = run_sweep(
        grid.values(),
        |x| reference_evaluator(x, &quad),
        cfg.workers,
    )
    .map_err(fault)?;
    let mut config = cfg.grid_entries();
    config.push(("tol", Value::Real(quad.tol)));
    Ok(Table {
        columns: vec!["z", "f"],
        rows: grid
            .values()
            .iter()
            .zip(&values)
            .map(|(&z, &f)| vec![z, f])
            .collect(),
        config,
        ..Table::default()
    })
}

pub fn csfr(cfg: &RunConfig) -> Result<Table, Failure> {
    let params = cfg.cosmology()?;
    let table =
        evolve_csfr_with_workers(&cfg.starform()?, &cfg.halo(&params)?, &params, cfg.workers)?;
    let last = table.len() - 1;
    Ok(Table {
        columns: vec!["z", "rho_b", "csfr"],
        rows: (0..table.len())
            .map(|i| vec![table.z[i], table.rho_b[i], table.csfr[i]])
            .collect(),
        config: cfg.csfr_entries()?,
        echo_config: false,
        summary: vec![
            ("stars_formed", Value::Real(table.stars[last])),
            ("reservoir", Value::Real(table.rho_b[last])),
            ("cumulative_infall", Value::Real(table.infall[last])),
            (
                "conservation_residual",
                Value::Real(table.conservation_residual()),
            ),
        ],
    })
}

pub fn gwb(cfg: &RunConfig, nu_min: f64, nu_max: f64, nu_points: usize) -> Result<Table, Failure> {
    let nu = log_grid(nu_min, nu_max, nu_points)?;
    let params = cfg.cosmology()?;
    let source = cfg.source()?;
    let history =
        evolve_csfr_with_workers(&cfg.starform()?, &cfg.halo(&params)?, &params, cfg.workers)?;
    let spectrum = spectrum_sweep(&source, &history, &params, &nu, cfg.workers)?;

    let mut config = cfg.csfr_entries()?;
    config.extend(cfg.source_entries());
    config.extend([
        ("nu-min", Value::Real(nu_min)),
        ("nu-max", Value::Real(nu_max)),
        ("nu-points", Value::Count(nu_points)),
    ]);
    let mut summary = Vec::new();
    if !spectrum.unconverged.is_empty() {
        eprintln!(
            "gravsweep: warning: redshift integral unconverged at {} frequencies",
            spectrum.unconverged.len()
        );
        summary.push(("unconverged", Value::Count(spectrum.unconverged.len())));
    }
    Ok(Table {
        columns: vec!["nu", "omega_gw"],
        rows: spectrum
            .nu_obs
            .iter()
            .zip(&spectrum.omega_gw)
            .map(|(&n, &w)| vec![n, w])
            .collect(),
        config,
        echo_config: true,
        summary,
    })
}

/// Times the reference sweep at each worker count. `impure` perturbs the
/// evaluator with a call counter, which must trip the determinism check.
pub fn bench(cfg: &RunConfig, worker_list: &[usize], impure: bool) -> Result<Table, Failure> {
    let quad = cfg.quad(BENCH_TOL)?;
    let grid = make_grid(&cfg.sweep()?)?;
    let calls = AtomicUsize::new(0);
    let evaluator = |x: f64| -> Result<f64, Error> {
        let y = reference_evaluator(x, &quad)?;
        if impure {
            let n = calls.fetch_add(1, Ordering::Relaxed);
            return Ok(y * (1.0 + n as f64 * f64::EPSILON));
        }
        Ok(y)
    };
    let report = benchmark_sweep(grid.values(), evaluator, worker_list).map_err(|e| match e {
        BenchError::Fault(f) => fault(f),
        BenchError::Mismatch { .. } => Failure::determinism(e.to_string()),
        BenchError::EmptyWorkerList | BenchError::ZeroWorkers => {
            Failure::validation(format!("worker-list: {e}"))
        }
    })?;
    let mut config = cfg.grid_entries();
    config.push(("tol", Value::Real(quad.tol)));
    Ok(Table {
        columns: vec!["workers", "wall_time_s", "speedup"],
        rows: (0..report.worker_counts.len())
            .map(|i| {
                vec![
                    report.worker_counts[i] as f64,
                    report.wall_times[i],
                    report.speedups[i],
                ]
            })
            .collect(),
        config,
        ..Table::default()
    })
}
