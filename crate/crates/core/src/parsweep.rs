//! Deterministic parallel parameter sweeps.
//!
//! A sweep evaluates `f(x_i)` for every point of an outer grid. The index
//! range is cut into static contiguous chunks, one per worker, and each
//! worker writes only its own slice of a pre-sized output buffer. Because
//! every element is computed independently by a pure evaluator the result
//! is bitwise identical for any worker count.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Instant;

use crate::numerics::{romberg, QuadConfig};
use crate::{Error, Result};

/// Outer grid description: `np` points descending from `zmax` in steps of
/// `zmax / np`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub np: usize,
    pub zmax: f64,
    pub workers: usize,
}

impl SweepSpec {
    pub fn new(np: usize, zmax: f64, workers: usize) -> Result<Self> {
        let spec = SweepSpec { np, zmax, workers };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.np == 0 {
            return Err(Error::invalid("np", 0.0, "must be >= 1"));
        }
        if !(self.zmax > 0.0 && self.zmax.is_finite()) {
            return Err(Error::invalid("zmax", self.zmax, "must be finite and > 0"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers", 0.0, "must be >= 1"));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.zmax / self.np as f64
    }
}

/// Strictly descending grid `values[i] = zmax - i * dz`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    values: Vec<f64>,
    descending: bool,
}

impl Grid {
    /// Wraps arbitrary sample points, e.g. a frequency grid.
    pub fn from_values(values: Vec<f64>) -> Self {
        let descending = values.windows(2).all(|w| w[0] > w[1]);
        Grid { values, descending }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_descending(&self) -> bool {
        self.descending
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub fn make_grid(spec: &SweepSpec) -> Result<Grid> {
    spec.validate()?;
    let np = spec.np;
    // (zmax * (np - i)) / np equals zmax - i * dz, and hits dz exactly at
    // the last point instead of accumulating the rounding of i * dz.
    let values = (0..np)
        .map(|i| spec.zmax * (np - i) as f64 / np as f64)
        .collect();
    Ok(Grid {
        values,
        descending: true,
    })
}

/// Half-open index range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IndexRange {
    pub start: usize,
    pub end: usize,
}

impl IndexRange {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Splits `[0, n)` into `min(workers, n)` contiguous ranges whose sizes
/// differ by at most one; the first `n % workers` ranges get the extra item.
pub fn partition(n: usize, workers: usize) -> Vec<IndexRange> {
    let parts = workers.min(n);
    if parts == 0 {
        return Vec::new();
    }
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|p| {
            let len = base + usize::from(p < extra);
            let range = IndexRange {
                start,
                end: start + len,
            };
            start += len;
            range
        })
        .collect()
}

/// Number of processing units available to this process.
pub fn default_workers() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

/// Reference evaluator: `f(x) = ∫_5^20 (x + k)^-2 dk` by Romberg.
/// Non-convergence is an error.
pub fn reference_evaluator(x: f64, cfg: &QuadConfig) -> Result<f64> {
    romberg(|k| (x + k).powi(-2), 5.0, 20.0, cfg)?.checked("reference integral")
}

/// Closed form of [`reference_evaluator`].
pub fn reference_closed_form(x: f64) -> f64 {
    1.0 / (x + 5.0) - 1.0 / (x + 20.0)
}

/// An evaluator failed at one grid point. With several workers the fault
/// with the lowest index is reported.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepFault<E> {
    pub index: usize,
    pub x: f64,
    pub source: E,
}

impl<E: fmt::Display> fmt::Display for SweepFault<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "evaluator failed at index {} (x = {}): {}",
            self.index, self.x, self.source
        )
    }
}

impl<E: std::error::Error + 'static> std::error::Error for SweepFault<E> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Evaluates `evaluator(values[i])` into `output[i]` for every `i` using up
/// to `workers` threads. `evaluator` must be pure.
pub fn run_sweep<F, E>(
    values: &[f64],
    evaluator: F,
    workers: usize,
) -> std::result::Result<Vec<f64>, SweepFault<E>>
where
    F: Fn(f64) -> std::result::Result<f64, E> + Sync,
    E: Send,
{
    let mut output = vec![0.0; values.len()];
    let ranges = partition(values.len(), workers.max(1));
    let first_fault = AtomicUsize::new(usize::MAX);

    let fill = |range: IndexRange, out: &mut [f64]| -> Option<SweepFault<E>> {
        for (offset, slot) in out.iter_mut().enumerate() {
            let index = range.start + offset;
            // a lower fault is already known; later indices cannot change the report
            if index > first_fault.load(Ordering::Relaxed) {
                return None;
            }
            let x = values[index];
            match evaluator(x) {
                Ok(y) => *slot = y,
                Err(source) => {
                    first_fault.fetch_min(index, Ordering::Relaxed);
                    return Some(SweepFault { index, x, source });
                }
            }
        }
        None
    };

    let mut faults: Vec<SweepFault<E>> = if ranges.len() <= 1 {
        ranges
            .first()
            .and_then(|&r| fill(r, &mut output))
            .into_iter()
            .collect()
    } else {
        thread::scope(|scope| {
            let mut rest = output.as_mut_slice();
            let mut handles = Vec::with_capacity(ranges.len());
            for &range in &ranges {
                let (mine, tail) = std::mem::take(&mut rest).split_at_mut(range.len());
                rest = tail;
                let fill = &fill;
                handles.push(scope.spawn(move || fill(range, mine)));
            }
            handles
                .into_iter()
                .filter_map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        })
    };

    if faults.is_empty() {
        Ok(output)
    } else {
        faults.sort_by_key(|f| f.index);
        Err(faults.swap_remove(0))
    }
}

/// Wall-clock comparison of one sweep at several worker counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub worker_counts: Vec<usize>,
    pub wall_times: Vec<f64>,
    pub speedups: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BenchError<E> {
    EmptyWorkerList,
    ZeroWorkers,
    Fault(SweepFault<E>),
    /// Outputs differ between worker counts; the evaluator is not pure.
    Mismatch {
        workers: usize,
        index: usize,
    },
}

impl<E: fmt::Display> fmt::Display for BenchError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::EmptyWorkerList => write!(f, "worker list is empty"),
            BenchError::ZeroWorkers => write!(f, "worker counts must be >= 1"),
            BenchError::Fault(fault) => fault.fmt(f),
            BenchError::Mismatch { workers, index } => write!(
                f,
                "determinism violation: output with {workers} workers differs from the reference at index {index}"
            ),
        }
    }
}

impl<E: fmt::Debug + fmt::Display> std::error::Error for BenchError<E> {}

impl<E> From<SweepFault<E>> for BenchError<E> {
    fn from(fault: SweepFault<E>) -> Self {
        BenchError::Fault(fault)
    }
}

/// Times [`run_sweep`] once per worker count after one untimed warm-up and
/// checks that every run produced bitwise identical output. Speedups are
/// relative to a single-worker run, which is timed separately when `1` is
/// not in `worker_counts`.
pub fn benchmark_sweep<F, E>(
    values: &[f64],
    evaluator: F,
    worker_counts: &[usize],
) -> std::result::Result<SweepReport, BenchError<E>>
where
    F: Fn(f64) -> std::result::Result<f64, E> + Sync,
    E: Send,
{
    if worker_counts.is_empty() {
        return Err(BenchError::EmptyWorkerList);
    }
    if worker_counts.contains(&0) {
        return Err(BenchError::ZeroWorkers);
    }

    let reference = run_sweep(values, &evaluator, worker_counts[0])?;

    let timed = |workers: usize| -> std::result::Result<f64, BenchError<E>> {
        let start = Instant::now();
        let out = run_sweep(values, &evaluator, workers)?;
        let elapsed = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
        if let Some(index) = first_difference(&reference, &out) {
            return Err(BenchError::Mismatch { workers, index });
        }
        Ok(elapsed)
    };

    let mut wall_times = Vec::with_capacity(worker_counts.len());
    for &w in worker_counts {
        wall_times.push(timed(w)?);
    }
    let serial = match worker_counts.iter().position(|&w| w == 1) {
        Some(i) => wall_times[i],
        None => timed(1)?,
    };
    let speedups = wall_times.iter().map(|t| serial / t).collect();

    Ok(SweepReport {
        worker_counts: worker_counts.to_vec(),
        wall_times,
        speedups,
    })
}

fn first_difference(a: &[f64], b: &[f64]) -> Option<usize> {
    if a.len() != b.len() {
        return Some(a.len().min(b.len()));
    }
    a.iter()
        .zip(b)
        .position(|(x, y)| x.to_bits() != y.to_bits())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::convert::Infallible;
    use std::sync::atomic::AtomicU64;

    fn reference_integral(x: f64) -> Result<f64> {
        romberg(|k| (x + k).powi(-2), 5.0, 20.0, &QuadConfig::default()).map(|r| r.value)
    }

    #[test]
    fn reference_evaluator_matches_closed_form() {
        let cfg = QuadConfig::with_tol(1e-10);
        for (x, expect) in [(0.0, 0.15), (5.0, 0.06), (20.0, 0.015)] {
            let got = reference_evaluator(x, &cfg).unwrap();
            assert!((got - expect).abs() <= 1e-10 * expect);
            assert!((reference_closed_form(x) - expect).abs() < 1e-16);
        }
        let starved = QuadConfig {
            max_levels: 3,
            ..QuadConfig::default()
        };
        assert!(matches!(
            reference_evaluator(0.0, &starved),
            Err(Error::NotConverged { .. })
        ));
    }

    #[test]
    fn grid_from_default_constants() {
        let spec = SweepSpec::new(10_000, 20.0, 4).unwrap();
        assert_eq!(spec.delta(), 0.002);
        let g = make_grid(&spec).unwrap();
        assert_eq!(g.len(), 10_000);
        assert_eq!(g.values()[0], 20.0);
        assert_eq!(g.values()[9999], 0.002);
        assert!(g.is_descending());
        assert!(g.values().windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn small_grids() {
        let g = make_grid(&SweepSpec::new(1, 5.0, 1).unwrap()).unwrap();
        assert_eq!(g.values(), &[5.0]);
        let g = make_grid(&SweepSpec::new(4, 4.0, 1).unwrap()).unwrap();
        assert_eq!(g.values(), &[4.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec::new(0, 20.0, 1).is_err());
        assert!(SweepSpec::new(10, 0.0, 1).is_err());
        assert!(SweepSpec::new(10, -1.0, 1).is_err());
        assert!(SweepSpec::new(10, 1.0, 0).is_err());
    }

    fn ranges(pairs: &[(usize, usize)]) -> Vec<IndexRange> {
        pairs
            .iter()
            .map(|&(start, end)| IndexRange { start, end })
            .collect()
    }

    #[test]
    fn partition_examples() {
        assert_eq!(
            partition(10_000, 4),
            ranges(&[(0, 2500), (2500, 5000), (5000, 7500), (7500, 10_000)])
        );
        assert_eq!(partition(10, 3), ranges(&[(0, 4), (4, 7), (7, 10)]));
        assert_eq!(partition(3, 8), ranges(&[(0, 1), (1, 2), (2, 3)]));
    }

    #[test]
    fn sweep_examples() {
        let out = run_sweep(&[20.0], reference_integral, 1).unwrap();
        assert!((out[0] / 0.015 - 1.0).abs() < 1e-8);

        let g = make_grid(&SweepSpec::new(4, 4.0, 1).unwrap()).unwrap();
        let out = run_sweep(g.values(), Ok::<_, Infallible>, 3).unwrap();
        assert_eq!(out, vec![4.0, 3.0, 2.0, 1.0]);

        let g = make_grid(&SweepSpec::new(37, 2.0, 1).unwrap()).unwrap();
        let out = run_sweep(g.values(), |_| Ok::<_, Infallible>(0.0), 5).unwrap();
        assert_eq!(out, vec![0.0; 37]);
    }

    #[test]
    fn lowest_fault_is_reported() {
        let values: Vec<f64> = (0..100).map(f64::from).collect();
        for workers in [1, 2, 3, 7] {
            let err = run_sweep(
                &values,
                |x| {
                    if x == 42.0 || x == 90.0 {
                        Err("boom")
                    } else {
                        Ok(x)
                    }
                },
                workers,
            )
            .unwrap_err();
            assert_eq!(err.index, 42);
            assert_eq!(err.x, 42.0);
            assert_eq!(err.source, "boom");
        }
    }

    #[test]
    fn determinism_across_worker_counts() {
        let g = make_grid(&SweepSpec::new(500, 20.0, 1).unwrap()).unwrap();
        let reference = run_sweep(g.values(), reference_integral, 1).unwrap();
        for workers in [2, 3, 4, 8] {
            let out = run_sweep(g.values(), reference_integral, workers).unwrap();
            assert!(
                first_difference(&reference, &out).is_none(),
                "workers = {workers}"
            );
        }
    }

    #[test]
    fn benchmark_single_worker() {
        let g = make_grid(&SweepSpec::new(64, 20.0, 1).unwrap()).unwrap();
        let report = benchmark_sweep(g.values(), reference_integral, &[1]).unwrap();
        assert_eq!(report.speedups, vec![1.0]);
        assert!(report.wall_times[0] > 0.0);
    }

    #[test]
    fn benchmark_without_serial_entry_still_reports() {
        let g = make_grid(&SweepSpec::new(16, 20.0, 1).unwrap()).unwrap();
        let report = benchmark_sweep(g.values(), reference_integral, &[2, 3]).unwrap();
        assert_eq!(report.worker_counts, vec![2, 3]);
        assert_eq!(report.speedups.len(), 2);
        assert!(report.speedups.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn benchmark_detects_impure_evaluator() {
        let g = make_grid(&SweepSpec::new(16, 20.0, 1).unwrap()).unwrap();
        let calls = AtomicU64::new(0);
        let impure = |x: f64| Ok::<_, Infallible>(x + calls.fetch_add(1, Ordering::Relaxed) as f64);
        let err = benchmark_sweep(g.values(), impure, &[1, 2]).unwrap_err();
        assert!(matches!(err, BenchError::Mismatch { index: 0, .. }));
    }

    #[test]
    fn benchmark_rejects_bad_worker_lists() {
        let v = [1.0];
        let id = Ok::<_, Infallible>;
        assert_eq!(
            benchmark_sweep(&v, id, &[]).unwrap_err(),
            BenchError::EmptyWorkerList
        );
        assert_eq!(
            benchmark_sweep(&v, id, &[1, 0]).unwrap_err(),
            BenchError::ZeroWorkers
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn partition_is_total_disjoint_and_balanced(n in 1usize..=100_000, workers in 1usize..=64) {
            let parts = partition(n, workers);
            prop_assert_eq!(parts.len(), workers.min(n));
            prop_assert_eq!(parts[0].start, 0);
            prop_assert_eq!(parts.last().unwrap().end, n);
            for w in parts.windows(2) {
                prop_assert_eq!(w[0].end, w[1].start);
            }
            let min = parts.iter().map(IndexRange::len).min().unwrap();
            let max = parts.iter().map(IndexRange::len).max().unwrap();
            prop_assert!(min >= 1 && max - min <= 1);
        }

        #[test]
        fn order_is_preserved(n in 1usize..300, workers in 1usize..9) {
            let values: Vec<f64> = (0..n).map(|i| i as f64 * 0.5).collect();
            let out = run_sweep(&values, |x| Ok::<_, Infallible>(x * x + 1.0), workers).unwrap();
            for (i, y) in out.iter().enumerate() {
                prop_assert_eq!(*y, values[i] * values[i] + 1.0);
            }
        }
    }
}
