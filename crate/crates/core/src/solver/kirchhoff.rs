//! Kirchhoff pressure solve on a conductance-weighted graph.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::check_len;
use crate::error::{Error, Result};
use crate::grid::Graph;

/// Relative mass-balance tolerance applied to `sum S_i`.
pub const CONSERVATION_TOL: f64 = 1e-12;

/// Solves `-sum_j C_ij (P_j - P_i) / L_ij = S_i` for the zero-mean pressure.
///
/// Requires `sum S = 0` (relative to `||S||_1`) and a connected subgraph of
/// positive-conductance edges.
pub fn kirchhoff_solve(g: &Graph, conductivity: &[f64], sources: &[f64]) -> Result<Vec<f64>> {
    let n = g.num_vertices();
    check_len("conductivity vector", g.num_edges(), conductivity.len())?;
    check_len("source vector", n, sources.len())?;
    check_balance(sources)?;
    if sources.iter().all(|&s| s == 0.0) {
        return Ok(vec![0.0; n]);
    }
    if conductivity.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::InvalidParameter(
            "conductivities must be finite and nonnegative".into(),
        ));
    }
    let pieces = g.components_where(|e| conductivity[e] > 0.0);
    if pieces.len() != 1 {
        return Err(Error::SingularSystem(format!(
            "positive-conductance subgraph has {} components",
            pieces.len()
        )));
    }
    if n == 1 {
        return Ok(vec![0.0]);
    }

    // ground vertex 0 and factor the reduced (SPD) Laplacian
    let m = n - 1;
    let mut lap = DMatrix::<f64>::zeros(m, m);
    for (k, e) in g.edges().iter().enumerate() {
        let w = conductivity[k] / e.length;
        if w == 0.0 {
            continue;
        }
        let (i, j) = (e.i, e.j);
        if i > 0 {
            lap[(i - 1, i - 1)] += w;
        }
        if j > 0 {
            lap[(j - 1, j - 1)] += w;
        }
        if i > 0 && j > 0 {
            lap[(i - 1, j - 1)] -= w;
            lap[(j - 1, i - 1)] -= w;
        }
    }
    let rhs = DVector::from_iterator(m, sources[1..].iter().copied());
    let chol = lap.clone().cholesky().ok_or_else(|| {
        Error::SingularSystem("reduced Laplacian is not positive definite".into())
    })?;
    let mut sol = chol.solve(&rhs);
    // one step of iterative refinement
    let resid = &rhs - &lap * &sol;
    sol += chol.solve(&resid);

    let mut pressure = vec![0.0; n];
    pressure[1..].copy_from_slice(sol.as_slice());
    let mean = pressure.iter().sum::<f64>() / n as f64;
    for p in &mut pressure {
        *p -= mean;
    }
    Ok(pressure)
}

pub fn check_balance(sources: &[f64]) -> Result<()> {
    let sum: f64 = sources.iter().sum();
    let scale: f64 = sources.iter().map(|s| s.abs()).sum();
    let tol = CONSERVATION_TOL * scale;
    if sum.abs() > tol {
        return Err(Error::ConservationViolation { sum, tol });
    }
    Ok(())
}

/// `max_i |(L_C P)_i - S_i|`.
pub fn kirchhoff_residual(g: &Graph, conductivity: &[f64], sources: &[f64], pressure: &[f64]) -> f64 {
    let mut r: Vec<f64> = sources.iter().map(|s| -s).collect();
    for (k, e) in g.edges().iter().enumerate() {
        let q = conductivity[k] * (pressure[e.j] - pressure[e.i]) / e.length;
        r[e.i] -= q;
        r[e.j] += q;
    }
    r.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_diamond, BBox};

    #[test]
    fn two_nodes() {
        let g = Graph::new(&[(0.0, 0.0), (1.0, 0.0)], &[(0, 1)]).unwrap();
        let p = kirchhoff_solve(&g, &[1.0], &[1.0, -1.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn path_of_three() {
        let g = Graph::new(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], &[(0, 1), (1, 2)]).unwrap();
        let p = kirchhoff_solve(&g, &[1.0, 2.0], &[1.0, 0.0, -1.0]).unwrap();
        let want = [5.0 / 6.0, -1.0 / 6.0, -4.0 / 6.0];
        for (got, w) in p.iter().zip(want) {
            assert!((got - w).abs() < 1e-14, "{p:?}");
        }
    }

    #[test]
    fn homogeneous_and_errors() {
        let g = build_diamond(3, 3, BBox::unit()).unwrap();
        let c = vec![1.0; 16];
        assert_eq!(kirchhoff_solve(&g, &c, &[0.0; 9]).unwrap(), vec![0.0; 9]);
        let mut s = vec![0.0; 9];
        s[0] = 1.0;
        assert!(matches!(
            kirchhoff_solve(&g, &c, &s),
            Err(Error::ConservationViolation { .. })
        ));
        s[8] = -1.0;
        let mut cut = c.clone();
        for (k, e) in g.edges().iter().enumerate() {
            if e.i == 8 || e.j == 8 {
                cut[k] = 0.0;
            }
        }
        assert!(matches!(kirchhoff_solve(&g, &cut, &s), Err(Error::SingularSystem(_))));
        let p = kirchhoff_solve(&g, &c, &s).unwrap();
        assert!(kirchhoff_residual(&g, &c, &s, &p) < 1e-14);
        assert!(p.iter().sum::<f64>().abs() < 1e-14);
    }
}
