//! Five-point SPD stencils on a lattice and a Jacobi-preconditioned
//! conjugate gradient solver for them.

use crate::error::{Error, Result};

/// `(A u)_c = diag_c u_c + sum_nb w_{c,nb} (u_c - u_nb)` on an `nx x ny`
/// lattice with couplings `wx` between `(i, j)` and `(i+1, j)` and `wy`
/// between `(i, j)` and `(i, j+1)`. Symmetric positive definite when
/// `diag > 0` and the weights are nonnegative.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub nx: usize,
    pub ny: usize,
    pub diag: Vec<f64>,
    pub wx: Vec<f64>,
    pub wy: Vec<f64>,
}

impl Stencil {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        for (o, (d, v)) in out.iter_mut().zip(self.diag.iter().zip(u)) {
            *o = d * v;
        }
        if nx > 1 {
            for j in 0..ny {
                for i in 0..nx - 1 {
                    let c = j * nx + i;
                    let f = self.wx[j * (nx - 1) + i] * (u[c] - u[c + 1]);
                    out[c] += f;
                    out[c + 1] -= f;
                }
            }
        }
        for j in 0..ny.saturating_sub(1) {
            for i in 0..nx {
                let c = j * nx + i;
                let f = self.wy[c] * (u[c] - u[c + nx]);
                out[c] += f;
                out[c + nx] -= f;
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut d = self.diag.clone();
        if nx > 1 {
            for j in 0..ny {
                for i in 0..nx - 1 {
                    let w = self.wx[j * (nx - 1) + i];
                    d[j * nx + i] += w;
                    d[j * nx + i + 1] += w;
                }
            }
        }
        for j in 0..ny.saturating_sub(1) {
            for i in 0..nx {
                let w = self.wy[j * nx + i];
                d[j * nx + i] += w;
                d[(j + 1) * nx + i] += w;
            }
        }
        d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A u = b` from the initial guess in `u` until
/// `||b - A u||_2 <= rtol * ||b||_2`.
pub fn conjugate_gradient(a: &Stencil, b: &[f64], u: &mut [f64], rtol: f64, max_iter: usize) -> Result<CgReport> {
    let n = a.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        u.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut r = vec![0.0; n];
    a.apply(u, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(x, d)| x * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    let target = rtol * bnorm;
    for it in 0..=max_iter {
        let rnorm = dot(&r, &r).sqrt();
        history.push(rnorm / bnorm);
        if rnorm <= target {
            return Ok(CgReport {
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        if it == max_iter {
            break;
        }
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            u[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::LinearSolver {
        iterations: history.len() - 1,
        residual_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_small_system() {
        let s = Stencil {
            nx: 3,
            ny: 2,
            diag: vec![1.0, 2.0, 0.5, 1.0, 1.0, 3.0],
            wx: vec![1.0, 0.5, 2.0, 1.0],
            wy: vec![0.25, 1.0, 4.0],
        };
        let want = [1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
        let mut b = vec![0.0; 6];
        s.apply(&want, &mut b);
        let mut u = vec![0.0; 6];
        let rep = conjugate_gradient(&s, &b, &mut u, 1e-14, 100).unwrap();
        assert!(rep.iterations <= 6);
        for (x, y) in u.iter().zip(want) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_and_failure() {
        let s = Stencil {
            nx: 2,
            ny: 2,
            diag: vec![1.0; 4],
            wx: vec![1.0; 2],
            wy: vec![1.0; 2],
        };
        let mut u = vec![5.0; 4];
        conjugate_gradient(&s, &[0.0; 4], &mut u, 1e-12, 10).unwrap();
        assert_eq!(u, vec![0.0; 4]);
        let mut u = vec![0.0; 4];
        match conjugate_gradient(&s, &[1.0, 0.0, 0.0, 2.0], &mut u, 1e-300, 1) {
            Err(Error::LinearSolver { residual_history, .. }) => assert_eq!(residual_history.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
