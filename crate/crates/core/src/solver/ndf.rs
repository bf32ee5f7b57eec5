//! Variable-order, variable-step implicit multistep integrator.
//!
//! Numerical differentiation formulas (NDF) of orders 1 to 5 in the
//! backward-difference representation, with a simplified Newton iteration on
//! `I - c J`, local error control on `(rtol, atol)` and order selection from
//! the neighboring-order error estimates. `Formula::Bdf` switches the
//! correction coefficients off and gives the plain BDF family; running with
//! `max_order = 1` is backward Euler.

use nalgebra::{DMatrix, DVector, LU, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 5;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const NDF_KAPPA: [f64; MAX_ORDER + 1] = [0.0, -0.1850, -1.0 / 9.0, -0.0823, -0.0415, 0.0];

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Fills `jac` with `df/dy` and returns `true`, or returns `false` to
    /// request a finite-difference Jacobian.
    fn jacobian(&mut self, _t: f64, _y: &[f64], _jac: &mut DMatrix<f64>) -> Result<bool> {
        Ok(false)
    }

    /// Components that must stay nonnegative (up to `atol`).
    fn is_nonnegative(&self, _k: usize) -> bool {
        false
    }

    /// Hook after every accepted step. Returning `true` signals that `y` was
    /// modified and the multistep history has to be restarted.
    fn after_step(&mut self, _t: f64, _y: &mut [f64]) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    #[default]
    Ndf,
    Bdf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_order: usize,
    pub formula: Formula,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub t_max: f64,
    /// Newton convergence tolerance in the scaled norm; derived from `rtol`
    /// when `None`.
    pub newton_tol: Option<f64>,
    pub newton_max_iter: usize,
    /// Stop once `||f(y)||_inf / max(1, ||y||_inf)` drops below this value.
    pub steady_tol: f64,
    pub stop_at_steady: bool,
    pub max_steps: usize,
    /// Record every `snapshot_stride`-th accepted step (first and last are
    /// always recorded).
    pub snapshot_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_order: MAX_ORDER,
            formula: Formula::Ndf,
            h_init: None,
            h_min: 1e-14,
            h_max: f64::MAX,
            t_max: 1e6,
            newton_tol: None,
            newton_max_iter: 4,
            steady_tol: 1e-8,
            stop_at_steady: true,
            max_steps: 2_000_000,
            snapshot_stride: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad(format!("rtol and atol must be positive ({}, {})", self.rtol, self.atol));
        }
        if !(1..=MAX_ORDER).contains(&self.max_order) {
            return bad(format!("max_order must be in 1..=5, got {}", self.max_order));
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_max) {
            return bad(format!("need 0 < h_min <= h_max ({}, {})", self.h_min, self.h_max));
        }
        if !(self.t_max > 0.0) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if self.newton_max_iter == 0 || self.snapshot_stride == 0 {
            return bad("newton_max_iter and snapshot_stride must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected_error: usize,
    pub rejected_newton: usize,
    pub rejected_negative: usize,
    pub rhs_evals: usize,
    pub jac_evals: usize,
    pub lu_decompositions: usize,
    pub restarts: usize,
    pub projections: usize,
    pub max_order_used: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub steady: bool,
    pub steady_time: Option<f64>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn last(&self) -> (f64, &[f64]) {
        (
            *self.times.last().expect("trajectory is never empty"),
            self.states.last().expect("trajectory is never empty"),
        )
    }
}

/// Scaled steady-state test `||f||_inf / max(1, ||y||_inf) < tol`.
pub fn is_steady(f: &[f64], y: &[f64], tol: f64) -> bool {
    let fmax = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let ymax = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    fmax / ymax.max(1.0) < tol
}

/// Evaluates `rhs` at `y` and applies [`is_steady`].
pub fn detect_steady<S: OdeSystem + ?Sized>(sys: &mut S, t: f64, y: &[f64], tol: f64) -> Result<bool> {
    let mut f = vec![0.0; y.len()];
    sys.rhs(t, y, &mut f)?;
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBlowup { t });
    }
    Ok(is_steady(&f, y, tol))
}

fn rms_scaled(v: &[f64], scale: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let s: f64 = v.iter().zip(scale).map(|(a, b)| (a / b).powi(2)).sum();
    (s / v.len() as f64).sqrt()
}

fn compute_r(order: usize, factor: f64) -> Vec<Vec<f64>> {
    let k = order + 1;
    let mut m = vec![vec![0.0; k]; k];
    m[0].iter_mut().for_each(|v| *v = 1.0);
    for (i, row) in m.iter_mut().enumerate().skip(1) {
        for (j, v) in row.iter_mut().enumerate().skip(1) {
            *v = (i as f64 - 1.0 - factor * j as f64) / i as f64;
        }
    }
    for i in 1..k {
        for j in 0..k {
            m[i][j] *= m[i - 1][j];
        }
    }
    m
}

/// Rescales the difference array for a step-size change by `factor`.
fn change_d(d: &mut [Vec<f64>], order: usize, factor: f64) {
    let r = compute_r(order, factor);
    let u = compute_r(order, 1.0);
    let k = order + 1;
    let mut ru = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            ru[i][j] = (0..k).map(|l| r[i][l] * u[l][j]).sum();
        }
    }
    let n = d[0].len();
    let mut fresh = vec![vec![0.0; n]; k];
    for (i, out) in fresh.iter_mut().enumerate() {
        for (l, row) in d.iter().enumerate().take(k) {
            let w = ru[l][i];
            if w != 0.0 {
                for (o, v) in out.iter_mut().zip(row) {
                    *o += w * v;
                }
            }
        }
    }
    for (dst, src) in d.iter_mut().zip(fresh) {
        *dst = src;
    }
}

struct Coefficients {
    gamma: [f64; MAX_ORDER + 1],
    alpha: [f64; MAX_ORDER + 1],
    error_const: [f64; MAX_ORDER + 1],
}

impl Coefficients {
    fn new(formula: Formula, max_order: usize) -> Self {
        let mut kappa = match formula {
            Formula::Ndf => NDF_KAPPA,
            Formula::Bdf => [0.0; MAX_ORDER + 1],
        };
        if max_order == 1 {
            kappa = [0.0; MAX_ORDER + 1];
        }
        let mut gamma = [0.0; MAX_ORDER + 1];
        for k in 1..=MAX_ORDER {
            gamma[k] = gamma[k - 1] + 1.0 / k as f64;
        }
        let mut alpha = [0.0; MAX_ORDER + 1];
        let mut error_const = [0.0; MAX_ORDER + 1];
        for k in 0..=MAX_ORDER {
            alpha[k] = (1.0 - kappa[k]) * gamma[k];
            error_const[k] = kappa[k] * gamma[k] + 1.0 / (k + 1) as f64;
        }
        Self {
            gamma,
            alpha,
            error_const,
        }
    }
}

enum NewtonOutcome {
    Converged { iterations: usize, y: Vec<f64>, d: Vec<f64> },
    Diverged,
    NonFinite,
}

struct Stepper<'a, S: OdeSystem> {
    sys: &'a mut S,
    cfg: &'a IntegratorConfig,
    coef: Coefficients,
    n: usize,
    t: f64,
    y: Vec<f64>,
    d: Vec<Vec<f64>>,
    order: usize,
    h_abs: f64,
    n_equal_steps: usize,
    jac: DMatrix<f64>,
    jac_current: bool,
    lu: Option<LU<f64, Dyn, Dyn>>,
    newton_tol: f64,
    stats: StepStats,
}

impl<'a, S: OdeSystem> Stepper<'a, S> {
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.stats.rhs_evals += 1;
        self.sys.rhs(t, y, out)
    }

    fn update_jacobian(&mut self, t: f64, y: &[f64]) -> Result<()> {
        self.stats.jac_evals += 1;
        if self.sys.jacobian(t, y, &mut self.jac)? {
            return Ok(());
        }
        let n = self.n;
        let mut f0 = vec![0.0; n];
        self.eval(t, y, &mut f0)?;
        let mut yp = y.to_vec();
        let mut f1 = vec![0.0; n];
        let sqrt_eps = f64::EPSILON.sqrt();
        for col in 0..n {
            let h = sqrt_eps * y[col].abs().max(1e-3 * self.cfg.atol.sqrt()).max(sqrt_eps);
            yp[col] = y[col] + h;
            let h = yp[col] - y[col];
            self.eval(t, &yp, &mut f1)?;
            for row in 0..n {
                self.jac[(row, col)] = (f1[row] - f0[row]) / h;
            }
            yp[col] = y[col];
        }
        Ok(())
    }

    fn factor(&mut self, c: f64) -> Result<()> {
        let n = self.n;
        let mut m = DMatrix::<f64>::identity(n, n);
        m -= &self.jac * c;
        self.stats.lu_decompositions += 1;
        self.lu = Some(m.lu());
        Ok(())
    }

    fn restart(&mut self) -> Result<()> {
        self.stats.restarts += 1;
        let mut f = vec![0.0; self.n];
        let y = self.y.clone();
        self.eval(self.t, &y, &mut f)?;
        for row in self.d.iter_mut() {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        self.d[0].copy_from_slice(&self.y);
        for (dst, fv) in self.d[1].iter_mut().zip(&f) {
            *dst = fv * self.h_abs;
        }
        self.order = 1;
        self.n_equal_steps = 0;
        self.update_jacobian(self.t, &y)?;
        self.jac_current = true;
        self.lu = None;
        Ok(())
    }

    fn solve_system(&mut self, t_new: f64, y_predict: &[f64], c: f64, psi: &[f64], scale: &[f64]) -> Result<NewtonOutcome> {
        let n = self.n;
        let mut d = vec![0.0; n];
        let mut y = y_predict.to_vec();
        let mut f = vec![0.0; n];
        let mut dy_norm_old: Option<f64> = None;
        let maxiter = self.cfg.newton_max_iter;
        for k in 0..maxiter {
            self.eval(t_new, &y, &mut f)?;
            if f.iter().any(|v| !v.is_finite()) {
                return Ok(NewtonOutcome::NonFinite);
            }
            let rhs = DVector::from_iterator(n, (0..n).map(|i| c * f[i] - psi[i] - d[i]));
            let lu = self.lu.as_ref().expect("factorization present");
            let dy = match lu.solve(&rhs) {
                Some(v) => v,
                None => return Ok(NewtonOutcome::Diverged),
            };
            if dy.iter().any(|v| !v.is_finite()) {
                return Ok(NewtonOutcome::Diverged);
            }
            let dy_norm = rms_scaled(dy.as_slice(), scale);
            let rate = dy_norm_old.map(|old| dy_norm / old);
            if let Some(rate) = rate {
                if rate >= 1.0
                    || rate.powi((maxiter - k) as i32) / (1.0 - rate) * dy_norm > self.newton_tol
                {
                    return Ok(NewtonOutcome::Diverged);
                }
            }
            for i in 0..n {
                y[i] += dy[i];
                d[i] += dy[i];
            }
            let done = dy_norm == 0.0
                || rate.is_some_and(|r| r / (1.0 - r) * dy_norm < self.newton_tol);
            if done {
                return Ok(NewtonOutcome::Converged { iterations: k + 1, y, d });
            }
            dy_norm_old = Some(dy_norm);
        }
        Ok(NewtonOutcome::Diverged)
    }

    /// Takes one accepted step, shrinking `h` as often as needed.
    fn step(&mut self, t_bound: f64) -> Result<()> {
        let n = self.n;
        let min_step = self.cfg.h_min.max(10.0 * (next_up(self.t) - self.t));
        if self.h_abs > self.cfg.h_max {
            let f = self.cfg.h_max / self.h_abs;
            change_d(&mut self.d, self.order, f);
            self.h_abs = self.cfg.h_max;
            self.n_equal_steps = 0;
            self.lu = None;
        } else if self.h_abs < min_step {
            let f = min_step / self.h_abs;
            change_d(&mut self.d, self.order, f);
            self.h_abs = min_step;
            self.n_equal_steps = 0;
            self.lu = None;
        }

        let mut last_nonfinite = false;
        let (y_new, d_corr, n_iter) = loop {
            if self.h_abs < min_step {
                if last_nonfinite {
                    return Err(Error::NumericalBlowup { t: self.t });
                }
                return Err(Error::StiffFailure {
                    t: self.t,
                    h: self.h_abs,
                    reason: "step size fell below h_min".into(),
                });
            }
            let mut t_new = self.t + self.h_abs;
            if t_new > t_bound {
                t_new = t_bound;
                let f = (t_new - self.t) / self.h_abs;
                change_d(&mut self.d, self.order, f);
                self.n_equal_steps = 0;
                self.lu = None;
            }
            let h = t_new - self.t;
            self.h_abs = h;
            let order = self.order;

            let mut y_predict = vec![0.0; n];
            for row in self.d.iter().take(order + 1) {
                for (p, v) in y_predict.iter_mut().zip(row) {
                    *p += v;
                }
            }
            let scale: Vec<f64> = y_predict
                .iter()
                .map(|v| self.cfg.atol + self.cfg.rtol * v.abs())
                .collect();
            let mut psi = vec![0.0; n];
            for m in 1..=order {
                let w = self.coef.gamma[m] / self.coef.alpha[order];
                for (p, v) in psi.iter_mut().zip(&self.d[m]) {
                    *p += w * v;
                }
            }
            let c = h / self.coef.alpha[order];

            let outcome = loop {
                if self.lu.is_none() {
                    self.factor(c)?;
                }
                let out = self.solve_system(t_new, &y_predict, c, &psi, &scale)?;
                match out {
                    NewtonOutcome::Converged { .. } => break out,
                    _ if self.jac_current => break out,
                    _ => {
                        self.update_jacobian(t_new, &y_predict)?;
                        self.jac_current = true;
                        self.lu = None;
                    }
                }
            };
            let (iterations, y_new, d_corr) = match outcome {
                NewtonOutcome::Converged { iterations, y, d } => (iterations, y, d),
                other => {
                    last_nonfinite = matches!(other, NewtonOutcome::NonFinite);
                    self.stats.rejected_newton += 1;
                    self.h_abs *= 0.5;
                    change_d(&mut self.d, self.order, 0.5);
                    self.n_equal_steps = 0;
                    self.lu = None;
                    continue;
                }
            };
            last_nonfinite = false;

            let safety = 0.9 * (2 * self.cfg.newton_max_iter + 1) as f64
                / (2 * self.cfg.newton_max_iter + iterations) as f64;
            let scale: Vec<f64> = y_new
                .iter()
                .map(|v| self.cfg.atol + self.cfg.rtol * v.abs())
                .collect();
            let err: Vec<f64> = d_corr.iter().map(|v| self.coef.error_const[order] * v).collect();
            let error_norm = rms_scaled(&err, &scale);
            if error_norm > 1.0 {
                self.stats.rejected_error += 1;
                let factor = MIN_FACTOR.max(safety * error_norm.powf(-1.0 / (order as f64 + 1.0)));
                self.h_abs *= factor;
                change_d(&mut self.d, self.order, factor);
                self.n_equal_steps = 0;
                continue;
            }
            let negative = (0..n).any(|k| self.sys.is_nonnegative(k) && y_new[k] < -self.cfg.atol);
            if negative {
                self.stats.rejected_negative += 1;
                self.h_abs *= 0.5;
                change_d(&mut self.d, self.order, 0.5);
                self.n_equal_steps = 0;
                self.lu = None;
                continue;
            }
            let _ = t_new;
            break (y_new, d_corr, iterations);
        };

        // accepted
        self.stats.accepted += 1;
        self.n_equal_steps += 1;
        self.t += self.h_abs;
        if (self.t - t_bound).abs() <= 4.0 * f64::EPSILON * t_bound.abs() {
            self.t = t_bound;
        }
        self.y = y_new;
        self.jac_current = false;
        let order = self.order;
        self.stats.max_order_used = self.stats.max_order_used.max(order);

        // D[order+2] = d - D[order+1]; D[order+1] = d; D[i] += D[i+1]
        for i in 0..n {
            self.d[order + 2][i] = d_corr[i] - self.d[order + 1][i];
            self.d[order + 1][i] = d_corr[i];
        }
        for i in (0..=order).rev() {
            let (lo, hi) = self.d.split_at_mut(i + 1);
            for (a, b) in lo[i].iter_mut().zip(&hi[0]) {
                *a += b;
            }
        }

        if self.n_equal_steps < order + 1 {
            return Ok(());
        }
        let scale: Vec<f64> = self
            .y
            .iter()
            .map(|v| self.cfg.atol + self.cfg.rtol * v.abs())
            .collect();
        let safety = 0.9 * (2 * self.cfg.newton_max_iter + 1) as f64
            / (2 * self.cfg.newton_max_iter + n_iter) as f64;
        let norm_of = |row: &[f64], c: f64| -> f64 {
            let v: Vec<f64> = row.iter().map(|x| c * x).collect();
            rms_scaled(&v, &scale)
        };
        let error_m = if order > 1 {
            norm_of(&self.d[order], self.coef.error_const[order - 1])
        } else {
            f64::INFINITY
        };
        let error_p = if order < self.cfg.max_order {
            norm_of(&self.d[order + 2], self.coef.error_const[order + 1])
        } else {
            f64::INFINITY
        };
        let err: Vec<f64> = d_corr.iter().map(|v| self.coef.error_const[order] * v).collect();
        let error_norm = rms_scaled(&err, &scale);
        let norms = [error_m, error_norm, error_p];
        let mut best = 0;
        let mut best_factor = f64::NEG_INFINITY;
        for (k, e) in norms.iter().enumerate() {
            let f = if *e == 0.0 {
                f64::INFINITY
            } else {
                e.powf(-1.0 / (order + k) as f64)
            };
            if f > best_factor {
                best_factor = f;
                best = k;
            }
        }
        self.order = (order + best) - 1;
        let factor = MAX_FACTOR.min(safety * best_factor);
        self.h_abs *= factor;
        change_d(&mut self.d, self.order, factor);
        self.n_equal_steps = 0;
        self.lu = None;
        Ok(())
    }
}

fn next_up(t: f64) -> f64 {
    if t.is_nan() || t == f64::INFINITY {
        return t;
    }
    if t == 0.0 {
        return f64::from_bits(1);
    }
    let bits = t.to_bits();
    if t > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

fn select_initial_step<S: OdeSystem>(sys: &mut S, y0: &[f64], f0: &[f64], order: usize, cfg: &IntegratorConfig, stats: &mut StepStats) -> Result<f64> {
    if y0.is_empty() {
        return Ok(cfg.h_max.min(cfg.t_max));
    }
    let scale: Vec<f64> = y0.iter().map(|v| cfg.atol + cfg.rtol * v.abs()).collect();
    let d0 = rms_scaled(y0, &scale);
    let d1 = rms_scaled(f0, &scale);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    stats.rhs_evals += 1;
    sys.rhs(h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms_scaled(&diff, &scale) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / (order as f64 + 1.0))
    };
    Ok((100.0 * h0).min(h1))
}

/// Integrates from `t = 0` to `cfg.t_max`, or until a steady state is
/// detected when `cfg.stop_at_steady` is set. `observer` sees every accepted
/// state, including the initial one.
pub fn integrate_with<S, F>(sys: &mut S, y0: &[f64], cfg: &IntegratorConfig, mut observer: F) -> Result<Trajectory>
where
    S: OdeSystem,
    F: FnMut(f64, &[f64]),
{
    cfg.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: n,
            got: y0.len(),
        });
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("initial state is not finite".into()));
    }
    let mut stats = StepStats::default();
    let mut f0 = vec![0.0; n];
    stats.rhs_evals += 1;
    sys.rhs(0.0, y0, &mut f0)?;
    if f0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBlowup { t: 0.0 });
    }

    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![y0.to_vec()],
        steady: false,
        steady_time: None,
        stats: StepStats::default(),
    };
    observer(0.0, y0);
    if cfg.stop_at_steady && is_steady(&f0, y0, cfg.steady_tol) {
        traj.steady = true;
        traj.steady_time = Some(0.0);
        traj.stats = stats;
        return Ok(traj);
    }

    let mut h_abs = match cfg.h_init {
        Some(h) => h,
        None => select_initial_step(sys, y0, &f0, 1, cfg, &mut stats)?,
    };
    h_abs = h_abs.clamp(cfg.h_min, cfg.h_max).min(cfg.t_max);

    let mut d = vec![vec![0.0; n]; MAX_ORDER + 3];
    d[0].copy_from_slice(y0);
    for (dst, f) in d[1].iter_mut().zip(&f0) {
        *dst = f * h_abs;
    }
    let newton_tol = cfg
        .newton_tol
        .unwrap_or_else(|| (10.0 * f64::EPSILON / cfg.rtol).max(0.03_f64.min(cfg.rtol.sqrt())));
    let mut stepper = Stepper {
        sys,
        cfg,
        coef: Coefficients::new(cfg.formula, cfg.max_order),
        n,
        t: 0.0,
        y: y0.to_vec(),
        d,
        order: 1,
        h_abs,
        n_equal_steps: 0,
        jac: DMatrix::zeros(n, n),
        jac_current: false,
        lu: None,
        newton_tol,
        stats,
    };
    stepper.update_jacobian(0.0, y0)?;
    stepper.jac_current = true;

    let mut since_snapshot = 0usize;
    let mut f = vec![0.0; n];
    while stepper.t < cfg.t_max {
        if stepper.stats.accepted >= cfg.max_steps {
            return Err(Error::StiffFailure {
                t: stepper.t,
                h: stepper.h_abs,
                reason: format!("exceeded {} steps", cfg.max_steps),
            });
        }
        stepper.step(cfg.t_max)?;
        let t = stepper.t;
        let mut y = stepper.y.clone();
        if stepper.sys.after_step(t, &mut y) {
            stepper.y = y;
            stepper.restart()?;
        }
        observer(t, &stepper.y);
        since_snapshot += 1;

        let y = stepper.y.clone();
        stepper.eval(t, &y, &mut f)?;
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup { t });
        }
        let steady = cfg.stop_at_steady && is_steady(&f, &y, cfg.steady_tol);
        let last = steady || t >= cfg.t_max;
        if since_snapshot >= cfg.snapshot_stride || last {
            since_snapshot = 0;
            let mut snap = y.clone();
            for (k, v) in snap.iter_mut().enumerate() {
                if *v < 0.0 && *v >= -cfg.atol && stepper.sys.is_nonnegative(k) {
                    *v = 0.0;
                    stepper.stats.projections += 1;
                }
            }
            traj.times.push(t);
            traj.states.push(snap);
        }
        if steady {
            traj.steady = true;
            traj.steady_time = Some(t);
            break;
        }
    }
    traj.stats = stepper.stats;
    Ok(traj)
}

pub fn integrate<S: OdeSystem>(sys: &mut S, y0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory> {
    integrate_with(sys, y0, cfg, |_, _| {})
}

/// Adapts a closure into an [`OdeSystem`] with a finite-difference Jacobian.
pub struct FnSystem<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> OdeSystem for FnSystem<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        (self.f)(t, y, dy);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(lambda: f64) -> FnSystem<impl FnMut(f64, &[f64], &mut [f64])> {
        FnSystem {
            dim: 1,
            f: move |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -lambda * y[0],
        }
    }

    #[test]
    fn stiff_scalar_decay() {
        let cfg = IntegratorConfig {
            t_max: 1.0,
            rtol: 1e-6,
            atol: 1e-8,
            stop_at_steady: false,
            ..IntegratorConfig::default()
        };
        let mut sys = decay(1e4);
        let traj = integrate(&mut sys, &[1.0], &cfg).unwrap();
        let (t, y) = traj.last();
        assert_eq!(t, 1.0);
        assert!((y[0] - (-1e4f64).exp()).abs() <= cfg.atol, "y(1) = {}", y[0]);
        assert!(traj.stats.accepted < 1000, "{} steps", traj.stats.accepted);
    }

    #[test]
    fn zero_rhs_is_steady_immediately() {
        let mut sys = FnSystem {
            dim: 3,
            f: |_t: f64, _y: &[f64], dy: &mut [f64]| dy.iter_mut().for_each(|v| *v = 0.0),
        };
        let traj = integrate(&mut sys, &[1.0, 2.0, 3.0], &IntegratorConfig::default()).unwrap();
        assert!(traj.steady);
        assert_eq!(traj.steady_time, Some(0.0));
        assert_eq!(traj.states, vec![vec![1.0, 2.0, 3.0]]);
    }

    #[test]
    fn backward_euler_recurrence() {
        let cfg = IntegratorConfig {
            max_order: 1,
            t_max: 5.0,
            rtol: 1e-4,
            atol: 1e-8,
            stop_at_steady: false,
            ..IntegratorConfig::default()
        };
        let mut sys = decay(1.0);
        let traj = integrate(&mut sys, &[1.0], &cfg).unwrap();
        assert!(traj.times.len() > 10);
        for w in 1..traj.times.len() {
            let h = traj.times[w] - traj.times[w - 1];
            let want = traj.states[w - 1][0] / (1.0 + h);
            let got = traj.states[w][0];
            assert!((got - want).abs() <= 1e-13 * want.abs(), "step {w}: {got} vs {want}");
        }
    }

    #[test]
    fn higher_orders_are_used_and_accurate() {
        // harmonic oscillator, smooth: the order should climb
        let mut sys = FnSystem {
            dim: 2,
            f: |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
        };
        let cfg = IntegratorConfig {
            t_max: 10.0,
            rtol: 1e-9,
            atol: 1e-12,
            stop_at_steady: false,
            ..IntegratorConfig::default()
        };
        let traj = integrate(&mut sys, &[1.0, 0.0], &cfg).unwrap();
        let (_, y) = traj.last();
        assert!((y[0] - 10f64.cos()).abs() < 1e-6);
        assert!(traj.stats.max_order_used >= 4);
    }

    #[test]
    fn robertson_is_handled() {
        let mut sys = FnSystem {
            dim: 3,
            f: |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = -0.04 * y[0] + 1e4 * y[1] * y[2];
                dy[1] = 0.04 * y[0] - 1e4 * y[1] * y[2] - 3e7 * y[1] * y[1];
                dy[2] = 3e7 * y[1] * y[1];
            },
        };
        let cfg = IntegratorConfig {
            t_max: 40.0,
            rtol: 1e-6,
            atol: 1e-10,
            stop_at_steady: false,
            ..IntegratorConfig::default()
        };
        let traj = integrate(&mut sys, &[1.0, 0.0, 0.0], &cfg).unwrap();
        let (_, y) = traj.last();
        // reference values at t = 40
        assert!((y[0] - 0.7158271).abs() < 1e-5, "{y:?}");
        assert!((y[2] - 0.2841729).abs() < 1e-5);
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn blowup_is_reported() {
        let mut sys = FnSystem {
            dim: 1,
            f: |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0],
        };
        let cfg = IntegratorConfig {
            t_max: 2.0,
            stop_at_steady: false,
            ..IntegratorConfig::default()
        };
        let err = integrate(&mut sys, &[1.0], &cfg).unwrap_err();
        assert!(matches!(err, Error::StiffFailure { .. } | Error::NumericalBlowup { .. }), "{err}");
    }

    #[test]
    fn bad_config() {
        let cfg = IntegratorConfig {
            max_order: 6,
            ..IntegratorConfig::default()
        };
        assert!(integrate(&mut decay(1.0), &[1.0], &cfg).is_err());
        let cfg = IntegratorConfig {
            h_min: 1.0,
            h_max: 0.5,
            ..IntegratorConfig::default()
        };
        assert!(integrate(&mut decay(1.0), &[1.0], &cfg).is_err());
    }
}
