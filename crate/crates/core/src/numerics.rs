//! Scalar integration primitives.
//!
//! [`romberg`] builds the classical trapezoid/Richardson tableau on a finite
//! interval. [`integrate_semi_infinite`] maps `[a, inf)` onto `(0, 1]` and
//! delegates to it. [`rk4_integrate`] is a fixed-step classical Runge-Kutta
//! stepper over a state vector.

use crate::{Error, Result};

/// Settings for [`romberg`].
///
/// A level `j` tableau row uses `2^j + 1` abscissae, so `max_levels = 20`
/// caps the finest trapezoid stage at `2^19 + 1` evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Relative convergence target, floored at an absolute scale of 1.
    pub tol: f64,
    /// Number of tableau rows, in `[2, 30]`.
    pub max_levels: usize,
    /// First level at which convergence may be declared. Raising it guards
    /// integrands whose features can hide between the coarse abscissae.
    pub min_levels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            tol: 1e-8,
            max_levels: 20,
            min_levels: 1,
        }
    }
}

impl QuadConfig {
    pub fn with_tol(tol: f64) -> Self {
        QuadConfig {
            tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid("tol", self.tol, "must be finite and > 0"));
        }
        if !(2..=30).contains(&self.max_levels) {
            return Err(Error::invalid(
                "max_levels",
                self.max_levels as f64,
                "must lie in [2, 30]",
            ));
        }
        if self.min_levels == 0 || self.min_levels >= self.max_levels {
            return Err(Error::invalid(
                "min_levels",
                self.min_levels as f64,
                "must lie in [1, max_levels)",
            ));
        }
        Ok(())
    }
}

/// Outcome of a quadrature call. Non-convergence is reported through
/// `converged`, the best available estimate is still carried in `value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl QuadResult {
    /// Rescales value and error estimate, e.g. for a unit conversion.
    pub fn scaled(self, factor: f64) -> Self {
        QuadResult {
            value: self.value * factor,
            error_estimate: self.error_estimate * factor.abs(),
            ..self
        }
    }

    /// Turns a flagged non-convergence into an error, for callers that need
    /// a plain number.
    pub fn checked(self, what: &'static str) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::NotConverged {
                what,
                value: self.value,
                error_estimate: self.error_estimate,
            })
        }
    }
}

/// Romberg integration of `f` over `[a, b]`.
///
/// Level `j` refines the trapezoid rule to `2^j` panels and extrapolates
/// `R(j,k) = R(j,k-1) + (R(j,k-1) - R(j-1,k-1)) / (4^k - 1)`. The call
/// returns `R(j,j)` at the first level where
/// `|R(j,j) - R(j-1,j-1)| <= tol * max(1, |R(j,j)|)`.
pub fn romberg<F>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    cfg.validate()?;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInterval { a, b });
    }
    let sample = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFiniteSample { x })
        }
    };

    let width = b - a;
    let mut prev = vec![0.0; cfg.max_levels];
    let mut cur = vec![0.0; cfg.max_levels];
    prev[0] = 0.5 * width * (sample(a)? + sample(b)?);
    let mut evaluations = 2;
    let mut diff = f64::INFINITY;

    for level in 1..cfg.max_levels {
        let fresh = 1usize << (level - 1);
        let h = width / (1u64 << level) as f64;
        let mut sum = 0.0;
        for i in 0..fresh {
            sum += sample(a + (2 * i + 1) as f64 * h)?;
        }
        evaluations += fresh;

        cur[0] = 0.5 * prev[0] + h * sum;
        let mut pow4 = 1.0;
        for k in 1..=level {
            pow4 *= 4.0;
            cur[k] = cur[k - 1] + (cur[k - 1] - prev[k - 1]) / (pow4 - 1.0);
        }
        diff = (cur[level] - prev[level - 1]).abs();
        std::mem::swap(&mut prev, &mut cur);

        let best = prev[level];
        if level >= cfg.min_levels && diff <= cfg.tol * best.abs().max(1.0) {
            return Ok(QuadResult {
                value: best,
                error_estimate: diff,
                evaluations,
                converged: true,
            });
        }
    }

    Ok(QuadResult {
        value: prev[cfg.max_levels - 1],
        error_estimate: diff,
        evaluations,
        converged: false,
    })
}

/// Integrates `f` over `[a, inf)`.
///
/// Uses `k = a - 1 + u^-2`, i.e. `u = (1 + k - a)^(-1/2)`, which maps the
/// range onto `u in (0, 1]` with `dk = 2 u^-3 du`. The transformed integrand
/// is taken as 0 at `u = 0`; this holds whenever `f` decays faster than
/// `k^(-3/2)`, and the substitution keeps `(1 + k)^-n` tails polynomial in
/// `u` so the tableau converges at its usual rate.
pub fn integrate_semi_infinite<F>(f: F, a: f64, cfg: &QuadConfig) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    if !a.is_finite() {
        return Err(Error::InvalidInterval {
            a,
            b: f64::INFINITY,
        });
    }
    let transformed = |u: f64| {
        if u == 0.0 {
            0.0
        } else {
            let k = a - 1.0 + 1.0 / (u * u);
            2.0 * f(k) / (u * u * u)
        }
    };
    romberg(transformed, 0.0, 1.0, cfg)
}

/// Reusable scratch space for classical fourth-order Runge-Kutta steps.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `state` in place from `t` to `t + h`. `deriv(t, y, dy)`
    /// writes the rate at `(t, y)` into `dy`.
    #[allow(clippy::needless_range_loop)]
    pub fn step<D>(&mut self, deriv: &mut D, t: f64, h: f64, state: &mut [f64]) -> Result<()>
    where
        D: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = state.len();
        debug_assert_eq!(n, self.k1.len());

        eval(deriv, t, state, &mut self.k1)?;
        for i in 0..n {
            self.tmp[i] = state[i] + 0.5 * h * self.k1[i];
        }
        eval(deriv, t + 0.5 * h, &self.tmp, &mut self.k2)?;
        for i in 0..n {
            self.tmp[i] = state[i] + 0.5 * h * self.k2[i];
        }
        eval(deriv, t + 0.5 * h, &self.tmp, &mut self.k3)?;
        for i in 0..n {
            self.tmp[i] = state[i] + h * self.k3[i];
        }
        eval(deriv, t + h, &self.tmp, &mut self.k4)?;
        for i in 0..n {
            state[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

fn eval<D>(deriv: &mut D, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>
where
    D: FnMut(f64, &[f64], &mut [f64]),
{
    deriv(t, y, dy);
    if dy.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteDerivative { t })
    }
}

/// Integrates `dy/dt = deriv(t, y)` from `t0` to `t1` with `steps` uniform
/// RK4 steps and returns the final state.
pub fn rk4_integrate<D>(
    mut deriv: D,
    t0: f64,
    t1: f64,
    state0: &[f64],
    steps: usize,
) -> Result<Vec<f64>>
where
    D: FnMut(f64, &[f64], &mut [f64]),
{
    if steps == 0 {
        return Err(Error::invalid("steps", 0.0, "must be >= 1"));
    }
    let h = (t1 - t0) / steps as f64;
    let mut state = state0.to_vec();
    let mut rk = Rk4::new(state.len());
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        rk.step(&mut deriv, t, h, &mut state)?;
    }
    Ok(state)
}
