//! Fast-time-scale auxin equation `-delta div(X grad a) = S - I a` with no
//! flux through the boundary.

use super::linear::{conjugate_gradient, Stencil};
use super::{ContinuumField, ContinuumParams, TensorGrid};
use crate::error::{Error, Result};

/// Operator `c_diag * I + c_flux * delta * (-div X grad)` in per-area form.
pub(crate) fn auxin_operator(f: &ContinuumField, p: &ContinuumParams, c_diag: f64, c_flux: f64, id: f64) -> Stencil {
    let g = &f.grid;
    let (h1, h2) = (g.h1(), g.h2());
    Stencil {
        nx: g.nx,
        ny: g.ny,
        diag: (0..g.num_cells()).map(|c| id + c_diag * p.decay_at(c)).collect(),
        wx: f.x1.iter().map(|x| c_flux * p.delta * x / (h1 * h1)).collect(),
        wy: f.x2.iter().map(|x| c_flux * p.delta * x / (h2 * h2)).collect(),
    }
}

fn check_operator(f: &ContinuumField, p: &ContinuumParams) -> Result<()> {
    f.validate()?;
    p.validate(&f.grid)?;
    if f.x1.iter().chain(&f.x2).any(|&x| x <= 0.0) {
        return Err(Error::DegenerateOperator(
            "transport tensor vanishes on some face".into(),
        ));
    }
    let n = f.grid.num_cells();
    let min_decay = (0..n).map(|c| p.decay_at(c)).fold(f64::INFINITY, f64::min);
    if !(min_decay > 0.0) {
        return Err(Error::DegenerateOperator(format!(
            "decay rate must be bounded away from zero, min is {min_decay}"
        )));
    }
    Ok(())
}

/// Solves for `a` given the transport tensor in `f` (the `a` stored in `f`
/// is the initial guess).
pub fn solve_elliptic(f: &ContinuumField, p: &ContinuumParams) -> Result<Vec<f64>> {
    let mut a = f.a.clone();
    solve_elliptic_with(f, p, &mut a)?;
    Ok(a)
}

/// As [`solve_elliptic`], writing into `a` and returning the number of
/// iterations.
pub fn solve_elliptic_with(f: &ContinuumField, p: &ContinuumParams, a: &mut [f64]) -> Result<usize> {
    check_operator(f, p)?;
    let op = auxin_operator(f, p, 1.0, 1.0, 0.0);
    let b: Vec<f64> = (0..f.grid.num_cells()).map(|c| p.source_at(c)).collect();
    if a.iter().any(|v| !v.is_finite()) {
        a.iter_mut().for_each(|v| *v = 0.0);
    }
    let rep = conjugate_gradient(&op, &b, a, p.cg_rtol, p.cg_max_iter)?;
    Ok(rep.iterations)
}

/// `sum_c area (S_c - I_c a_c)`, which vanishes for an exact solution.
pub fn net_production(grid: &TensorGrid, p: &ContinuumParams, a: &[f64]) -> f64 {
    (0..grid.num_cells())
        .map(|c| grid.cell_area() * (p.source_at(c) - p.decay_at(c) * a[c]))
        .sum()
}
