//! Hu-Cai conductance adaptation and its energy.
//!
//! `dC_ij/dt = sigma * (Q_ij^2 / C_ij^(gamma+1) - tau^2) * C_ij * L_ij` with
//! `Q_ij = C_ij (P_j - P_i) / L_ij` and the pressures solving Kirchhoff's
//! law for the current conductivities.

use super::{check_len, safe_pow, ModelParams};
use crate::error::Result;
use crate::grid::Graph;

/// Conductance derivative for given conductivities and Kirchhoff pressures.
pub fn rhs_hu_cai(
    g: &Graph,
    p: &ModelParams,
    conductivity: &[f64],
    pressure: &[f64],
) -> Result<Vec<f64>> {
    check_len("conductivity vector", g.num_edges(), conductivity.len())?;
    check_len("pressure vector", g.num_vertices(), pressure.len())?;
    let mut out = vec![0.0; g.num_edges()];
    rhs_hu_cai_into(g, p, conductivity, pressure, &mut out);
    Ok(out)
}

pub(crate) fn rhs_hu_cai_into(
    g: &Graph,
    p: &ModelParams,
    conductivity: &[f64],
    pressure: &[f64],
    out: &mut [f64],
) {
    for (k, e) in g.edges().iter().enumerate() {
        let c = conductivity[k];
        let drop = (pressure[e.j] - pressure[e.i]).abs() / e.length;
        // Q^2 / C^(gamma+1) * C == drop^2 * C^(2-gamma)
        let drive = drop * drop * safe_pow(c, 2.0 - p.gamma);
        out[k] = p.sigma * e.length * (drive - p.tau * p.tau * c);
    }
}

/// Pumping power plus metabolic cost, `sum (Q^2/C + nu/gamma C^gamma) L`.
/// An edge carrying flux with zero conductivity makes the energy `+inf`.
pub fn energy(g: &Graph, p: &ModelParams, conductivity: &[f64], flux: &[f64]) -> Result<f64> {
    check_len("conductivity vector", g.num_edges(), conductivity.len())?;
    check_len("flux vector", g.num_edges(), flux.len())?;
    let mut total = 0.0;
    for ((e, &c), &q) in g.edges().iter().zip(conductivity).zip(flux) {
        let pumping = if q == 0.0 {
            0.0
        } else if c <= 0.0 {
            return Ok(f64::INFINITY);
        } else {
            q * q / c
        };
        let metabolic = p.nu / p.gamma * safe_pow(c, p.gamma);
        total += (pumping + metabolic) * e.length;
    }
    Ok(total)
}

/// Edge flux `C (P_j - P_i) / L` in stored orientation.
pub fn hu_cai_flux(g: &Graph, conductivity: &[f64], pressure: &[f64]) -> Vec<f64> {
    g.edges()
        .iter()
        .zip(conductivity)
        .map(|(e, &c)| c * (pressure[e.j] - pressure[e.i]) / e.length)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_edge(length: f64) -> Graph {
        Graph::new(&[(0.0, 0.0), (length, 0.0)], &[(0, 1)]).unwrap()
    }

    fn params(gamma: f64, nu: f64) -> ModelParams {
        ModelParams {
            gamma,
            nu,
            sigma: 1.0,
            tau: 1.0,
            ..ModelParams::default()
        }
    }

    #[test]
    fn energy_examples() {
        let g = single_edge(1.0);
        assert_eq!(energy(&g, &params(1.0, 1.0), &[1.0], &[1.0]).unwrap(), 2.0);
        assert_eq!(energy(&g, &params(1.0, 1.0), &[0.0], &[0.0]).unwrap(), 0.0);
        let g = single_edge(2.0);
        assert_eq!(energy(&g, &params(0.5, 1.0), &[4.0], &[1.0]).unwrap(), 8.5);
        assert_eq!(
            energy(&g, &params(0.5, 1.0), &[0.0], &[1.0]).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn rhs_examples() {
        // two nodes, S = (1, -1): the Kirchhoff pressures carry |Q| = 1
        let g = single_edge(1.0);
        let p = params(1.0, 1.0);
        assert_eq!(rhs_hu_cai(&g, &p, &[0.0], &[0.0, 0.0]).unwrap(), vec![0.0]);
        // C = 1: P = (0.5, -0.5)
        let d = rhs_hu_cai(&g, &p, &[1.0], &[0.5, -0.5]).unwrap();
        assert!(d[0].abs() < 1e-15);
        // C = 4: P = (0.125, -0.125), Q = -1
        let d = rhs_hu_cai(&g, &p, &[4.0], &[0.125, -0.125]).unwrap();
        assert!((d[0] + 3.75).abs() < 1e-14);
        let q = hu_cai_flux(&g, &[4.0], &[0.125, -0.125]);
        assert_eq!(q, vec![-1.0]);
    }
}
