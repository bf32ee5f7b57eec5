//! Adapted cellular model with nonpolar transport activity.
//!
//! ```text
//! da_i/dt  = S_i - I_i a_i + delta * sum_j X_ij (a_j - a_i) / L_ij
//! dX_ij/dt = sigma * (|Q_ij|^kappa / X_ij^(gamma+1) - tau) * X_ij * L_ij
//! ```
//!
//! The activity equation is evaluated in the factored form
//! `sigma * (|a_j - a_i| / L)^kappa * X^(kappa-gamma) * L - sigma * tau * X * L`,
//! which equals the quotient form for `X > 0` and vanishes at `X = 0` when
//! `kappa > gamma`.

use nalgebra::DMatrix;

use super::{check_len, safe_pow, ModelParams, NetworkState};
use crate::error::{Error, Result};
use crate::grid::Graph;

/// Writes the time derivative of `(a, x)` into `(da, dx)`. Edges flagged in
/// `frozen` have been pruned to zero and get a zero derivative.
#[allow(clippy::too_many_arguments)]
pub fn rhs_primary_into(
    g: &Graph,
    p: &ModelParams,
    a: &[f64],
    x: &[f64],
    frozen: Option<&[bool]>,
    da: &mut [f64],
    dx: &mut [f64],
) -> Result<()> {
    let n = g.num_vertices();
    let m = g.num_edges();
    check_len("auxin vector", n, a.len())?;
    check_len("transport activity vector", m, x.len())?;
    check_len("source field", n, p.source.len())?;
    check_len("decay field", n, p.decay.len())?;
    let gap = p.kappa - p.gamma;

    for i in 0..n {
        da[i] = p.source[i] - p.decay[i] * a[i];
    }
    for (k, e) in g.edges().iter().enumerate() {
        if frozen.is_some_and(|f| f[k]) {
            dx[k] = 0.0;
            continue;
        }
        let xe = x[k];
        let diff = a[e.j] - a[e.i];
        let q = p.delta * xe * diff / e.length;
        da[e.i] += q;
        da[e.j] -= q;

        if xe <= 0.0 && gap <= 0.0 {
            return Err(Error::SingularRhs {
                edge: k,
                kappa: p.kappa,
                gamma: p.gamma,
            });
        }
        let drive = safe_pow(diff.abs() / e.length, p.kappa) * safe_pow(xe, gap);
        dx[k] = p.sigma * e.length * (drive - p.tau * xe);
    }
    Ok(())
}

pub fn rhs_primary(g: &Graph, p: &ModelParams, st: &NetworkState) -> Result<NetworkState> {
    st.check_dims(g)?;
    let mut da = vec![0.0; g.num_vertices()];
    let mut dx = vec![0.0; g.num_edges()];
    rhs_primary_into(g, p, &st.a, &st.x, None, &mut da, &mut dx)?;
    Ok(NetworkState { a: da, x: dx, t: st.t })
}

/// Dense Jacobian of the packed system `y = [a, X]`.
pub fn jacobian_primary(
    g: &Graph,
    p: &ModelParams,
    a: &[f64],
    x: &[f64],
    frozen: Option<&[bool]>,
    jac: &mut DMatrix<f64>,
) {
    let n = g.num_vertices();
    jac.fill(0.0);
    for i in 0..n {
        jac[(i, i)] = -p.decay[i];
    }
    let gap = p.kappa - p.gamma;
    for (k, e) in g.edges().iter().enumerate() {
        if frozen.is_some_and(|f| f[k]) {
            continue;
        }
        let (i, j) = (e.i, e.j);
        let col = n + k;
        let xe = x[k];
        let w = p.delta * xe / e.length;
        jac[(i, i)] -= w;
        jac[(i, j)] += w;
        jac[(j, j)] -= w;
        jac[(j, i)] += w;
        let diff = a[j] - a[i];
        jac[(i, col)] += p.delta * diff / e.length;
        jac[(j, col)] -= p.delta * diff / e.length;

        let grad = diff.abs() / e.length;
        let xp = safe_pow(xe, gap);
        // d/dX of sigma*L*(grad^kappa X^gap - tau X)
        let dxx = if xe > 0.0 {
            gap * safe_pow(grad, p.kappa) * xe.powf(gap - 1.0)
        } else {
            0.0
        };
        jac[(col, col)] = p.sigma * e.length * (dxx - p.tau);
        if diff != 0.0 && xp != 0.0 {
            // d/da_j of sigma*L*(|a_j - a_i|/L)^kappa X^gap
            let d = p.sigma * p.kappa * grad.powf(p.kappa - 1.0) * xp * diff.signum();
            jac[(col, j)] = d;
            jac[(col, i)] = -d;
        }
    }
}
