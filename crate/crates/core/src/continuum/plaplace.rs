//! Steady state for `kappa == gamma`: the minimizer of
//!
//! ```text
//! F[a] = delta / (tau (kappa + 2)) sum_k int |d_k a|^(kappa+2) + 1/2 int a^2 - int S a
//! ```
//!
//! discretized with face differences and cell-centered `a`, found by
//! nonlinear conjugate gradients (Polak-Ribiere+) with a line search that
//! enforces the Armijo condition.

use serde::{Deserialize, Serialize};

use super::{ContinuumField, ContinuumParams, TensorGrid};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PLaplaceOptions {
    /// Stop when `max_c |dF/da_c| / area <= tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PLaplaceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PLaplaceResult {
    pub a: Vec<f64>,
    /// `X_k = |d_k a|^kappa / tau` on the faces.
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// `F` before the first and after every iteration.
    pub functional: Vec<f64>,
    pub gradient_norms: Vec<f64>,
    pub iterations: usize,
}

impl PLaplaceResult {
    pub fn into_field(self, grid: TensorGrid) -> ContinuumField {
        ContinuumField {
            grid,
            a: self.a,
            x1: self.x1,
            x2: self.x2,
        }
    }
}

struct Functional<'a> {
    g: TensorGrid,
    p: &'a ContinuumParams,
    s: Vec<f64>,
    coef: f64,
}

impl Functional<'_> {
    fn value(&self, a: &[f64]) -> f64 {
        let g = &self.g;
        let area = g.cell_area();
        let q = self.p.kappa + 2.0;
        let mut grad_part = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx - 1 {
                grad_part += ((a[g.cell(i + 1, j)] - a[g.cell(i, j)]) / g.h1()).abs().powf(q);
            }
        }
        for j in 0..g.ny - 1 {
            for i in 0..g.nx {
                grad_part += ((a[g.cell(i, j + 1)] - a[g.cell(i, j)]) / g.h2()).abs().powf(q);
            }
        }
        let bulk: f64 = a.iter().zip(&self.s).map(|(u, s)| 0.5 * u * u - s * u).sum();
        area * (self.coef / q * grad_part + bulk)
    }

    /// `F(a + alpha d) - F(a)` without the cancellation of subtracting two
    /// full evaluations.
    fn increment(&self, a: &[f64], d: &[f64], alpha: f64) -> f64 {
        let g = &self.g;
        let q = self.p.kappa + 2.0;
        let mut grad_part = 0.0;
        let mut face = |c0: usize, c1: usize, h: f64| {
            let u = (a[c1] - a[c0]) / h;
            let v = alpha * (d[c1] - d[c0]) / h;
            grad_part += power_increment(u, v, q);
        };
        for j in 0..g.ny {
            for i in 0..g.nx - 1 {
                face(g.cell(i, j), g.cell(i + 1, j), g.h1());
            }
        }
        for j in 0..g.ny - 1 {
            for i in 0..g.nx {
                face(g.cell(i, j), g.cell(i, j + 1), g.h2());
            }
        }
        let bulk: f64 = a
            .iter()
            .zip(d)
            .zip(&self.s)
            .map(|((u, di), s)| alpha * di * (u - s) + 0.5 * alpha * alpha * di * di)
            .sum();
        g.cell_area() * (self.coef / q * grad_part + bulk)
    }

    fn gradient(&self, a: &[f64], out: &mut [f64]) {
        let g = &self.g;
        let area = g.cell_area();
        let k = self.p.kappa;
        for ((o, u), s) in out.iter_mut().zip(a).zip(&self.s) {
            *o = area * (u - s);
        }
        let mut face = |c0: usize, c1: usize, h: f64| {
            let d = (a[c1] - a[c0]) / h;
            let flux = area * self.coef * d.abs().powf(k) * d / h;
            out[c1] += flux;
            out[c0] -= flux;
        };
        for j in 0..g.ny {
            for i in 0..g.nx - 1 {
                face(g.cell(i, j), g.cell(i + 1, j), g.h1());
            }
        }
        for j in 0..g.ny - 1 {
            for i in 0..g.nx {
                face(g.cell(i, j), g.cell(i, j + 1), g.h2());
            }
        }
    }
}

/// `|u + v|^q - |u|^q`, accurate when `|v| << |u|`.
fn power_increment(u: f64, v: f64, q: f64) -> f64 {
    let w = u + v;
    if u == 0.0 || w == 0.0 || u.signum() != w.signum() {
        return w.abs().powf(q) - u.abs().powf(q);
    }
    // same sign: |w| - |u| = sign(u) v exactly
    let r = u.signum() * v / u.abs();
    u.abs().powf(q) * (q * r.ln_1p()).exp_m1()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes the discrete functional from `a = 0`. Requires `kappa == gamma`.
pub fn p_laplacian_steady(grid: TensorGrid, p: &ContinuumParams, opts: &PLaplaceOptions) -> Result<PLaplaceResult> {
    grid.validate()?;
    p.validate(&grid)?;
    if (p.kappa - p.gamma).abs() > 1e-12 * p.gamma.abs().max(1.0) || !(p.kappa > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "the variational steady state needs kappa == gamma > 0, got kappa = {}, gamma = {}",
            p.kappa, p.gamma
        )));
    }
    if !(p.tau > 0.0) {
        return Err(Error::InvalidParameter("tau must be positive".into()));
    }
    let n = grid.num_cells();
    let fun = Functional {
        g: grid,
        p,
        s: (0..n).map(|c| p.source_at(c)).collect(),
        coef: p.delta / p.tau,
    };
    let area = grid.cell_area();
    let mut a = vec![0.0; n];
    let mut gr = vec![0.0; n];
    fun.gradient(&a, &mut gr);
    let mut f = fun.value(&a);
    let mut d: Vec<f64> = gr.iter().map(|v| -v).collect();
    let mut functional = vec![f];
    let gnorm = |g: &[f64]| g.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / area;
    let mut gradient_norms = vec![gnorm(&gr)];
    let mut step_guess = 1.0 / area;
    let mut trial = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut iterations = 0;

    while *gradient_norms.last().expect("nonempty") > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NotConverged {
                iterations,
                gradient_history: gradient_norms,
            });
        }
        iterations += 1;
        let mut slope0 = dot(&gr, &d);
        if slope0 >= 0.0 {
            // lost conjugacy: restart along steepest descent
            d.iter_mut().zip(&gr).for_each(|(di, gi)| *di = -gi);
            slope0 = dot(&gr, &d);
        }
        // values are increments relative to the current iterate
        let eval = |alpha: f64, trial: &mut Vec<f64>, gt: &mut Vec<f64>| -> (f64, f64) {
            for k in 0..n {
                trial[k] = a[k] + alpha * d[k];
            }
            fun.gradient(trial, gt);
            (fun.increment(&a, &d, alpha), dot(gt, &d))
        };
        // bracket the minimum along d, then refine with safeguarded secant steps
        let (mut lo, mut slope_lo) = (0.0, slope0);
        let mut hi = step_guess;
        let (mut f_hi, mut slope_hi) = eval(hi, &mut trial, &mut gt);
        let mut expansions = 0;
        while slope_hi < 0.0 && f_hi <= 0.0 && expansions < 60 {
            lo = hi;
            slope_lo = slope_hi;
            hi *= 2.0;
            (f_hi, slope_hi) = eval(hi, &mut trial, &mut gt);
            expansions += 1;
        }
        let mut alpha = hi;
        let (mut f_a, mut slope_a) = (f_hi, slope_hi);
        for _ in 0..50 {
            if slope_a.abs() <= 0.1 * slope0.abs() && f_a <= 1e-4 * alpha * slope0 {
                break;
            }
            let secant = if slope_hi > slope_lo {
                lo - slope_lo * (hi - lo) / (slope_hi - slope_lo)
            } else {
                0.5 * (lo + hi)
            };
            let width = hi - lo;
            alpha = if secant > lo + 0.05 * width && secant < hi - 0.05 * width {
                secant
            } else {
                0.5 * (lo + hi)
            };
            (f_a, slope_a) = eval(alpha, &mut trial, &mut gt);
            if slope_a < 0.0 && f_a <= 0.0 {
                lo = alpha;
                slope_lo = slope_a;
            } else {
                hi = alpha;
                slope_hi = slope_a;
            }
        }
        if !(f_a <= 1e-4 * alpha * slope0) {
            // fall back to plain backtracking
            alpha = lo.max(hi);
            let mut ok = false;
            for _ in 0..60 {
                (f_a, _) = eval(alpha, &mut trial, &mut gt);
                if f_a <= 1e-4 * alpha * slope0 {
                    ok = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !ok {
                return Err(Error::NotConverged {
                    iterations,
                    gradient_history: gradient_norms,
                });
            }
        }
        step_guess = alpha;
        a.copy_from_slice(&trial);
        // Polak-Ribiere+
        let beta = (dot(&gt, &gt) - dot(&gt, &gr)).max(0.0) / dot(&gr, &gr);
        for k in 0..n {
            d[k] = -gt[k] + beta * d[k];
        }
        gr.copy_from_slice(&gt);
        f += f_a;
        functional.push(f);
        gradient_norms.push(gnorm(&gr));
    }

    let k = p.kappa;
    let mut x1 = vec![0.0; grid.num_x_faces()];
    for j in 0..grid.ny {
        for i in 0..grid.nx - 1 {
            let d = (a[grid.cell(i + 1, j)] - a[grid.cell(i, j)]) / grid.h1();
            x1[j * (grid.nx - 1) + i] = d.abs().powf(k) / p.tau;
        }
    }
    let mut x2 = vec![0.0; grid.num_y_faces()];
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx {
            let d = (a[grid.cell(i, j + 1)] - a[grid.cell(i, j)]) / grid.h2();
            x2[j * grid.nx + i] = d.abs().powf(k) / p.tau;
        }
    }
    Ok(PLaplaceResult {
        a,
        x1,
        x2,
        functional,
        gradient_norms,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::solve_elliptic;

    fn params(kappa: f64, source: Vec<f64>) -> ContinuumParams {
        ContinuumParams {
            kappa,
            gamma: kappa,
            delta: 0.5,
            tau: 2.0,
            source,
            ..ContinuumParams::default()
        }
    }

    #[test]
    fn zero_source_gives_zero() {
        let g = TensorGrid::unit(6).unwrap();
        let r = p_laplacian_steady(g, &params(1.0, vec![]), &PLaplaceOptions::default()).unwrap();
        assert!(r.a.iter().all(|&v| v == 0.0));
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn small_kappa_matches_linear_solve() {
        let g = TensorGrid::unit(10).unwrap();
        let s: Vec<f64> = (0..100).map(|c| if c % 10 < 3 && c / 10 > 6 { 5.0 } else { 0.0 }).collect();
        let p = params(1e-6, s.clone());
        let r = p_laplacian_steady(g, &p, &PLaplaceOptions::default()).unwrap();
        let lin = ContinuumParams {
            delta: p.delta / p.tau,
            source: s,
            ..ContinuumParams::default()
        };
        let a = solve_elliptic(&ContinuumField::uniform(g, 0.0, 1.0), &lin).unwrap();
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let err = r.a.iter().zip(&a).fold(0.0_f64, |m, (u, v)| m.max((u - v).abs()));
        assert!(err <= 1e-4 * scale, "{err}");
        assert!(r.functional.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn nonlinear_case_converges() {
        let g = TensorGrid::unit(8).unwrap();
        let s: Vec<f64> = (0..64).map(|c| ((c * 37) % 11) as f64 - 5.0).collect();
        let r = p_laplacian_steady(g, &params(1.5, s), &PLaplaceOptions::default()).unwrap();
        assert!(*r.gradient_norms.last().unwrap() <= 1e-10);
        assert!(r.functional.windows(2).all(|w| w[1] <= w[0]));
        assert!(*r.functional.last().unwrap() <= r.functional[0]);
    }

    #[test]
    fn rejects_kappa_gamma_mismatch() {
        let g = TensorGrid::unit(4).unwrap();
        let p = ContinuumParams::default();
        assert!(matches!(
            p_laplacian_steady(g, &p, &PLaplaceOptions::default()),
            Err(Error::InvalidParameter(_))
        ));
    }
}
