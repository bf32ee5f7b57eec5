//! Mitchison signal model.
//!
//! Fick flux `phi_ij = D_ij (s_i - s_j) / L_ij`, signal equation
//! `ds_i/dt = sigma_i + (1/v) sum_j A_ij phi_ji`, and a relaxation of each
//! diffusion constant towards a flux-dependent target.

use serde::{Deserialize, Serialize};

use super::{check_len, ModelParams};
use crate::error::Result;
use crate::grid::Graph;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitchisonState {
    pub s: Vec<f64>,
    pub d: Vec<f64>,
}

/// Target of the diffusion-constant relaxation `dD/dt = rate * (target - D)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MitchisonUpdate {
    /// `max(phi_ij, 0)^2` in the stored `i < j` orientation.
    #[default]
    Polar,
    /// `phi_ij^2`, independent of orientation.
    Symmetric,
}

/// Fick flux `phi_ij` in stored orientation.
pub fn fick_flux(g: &Graph, st: &MitchisonState) -> Vec<f64> {
    g.edges()
        .iter()
        .zip(&st.d)
        .map(|(e, &d)| d * (st.s[e.i] - st.s[e.j]) / e.length)
        .collect()
}

pub fn rhs_mitchison(g: &Graph, p: &ModelParams, st: &MitchisonState) -> Result<MitchisonState> {
    check_len("signal vector", g.num_vertices(), st.s.len())?;
    check_len("diffusion constant vector", g.num_edges(), st.d.len())?;
    check_len("source activity field", g.num_vertices(), p.source.len())?;
    let mut ds = vec![0.0; g.num_vertices()];
    let mut dd = vec![0.0; g.num_edges()];
    rhs_mitchison_into(g, p, &st.s, &st.d, &mut ds, &mut dd);
    Ok(MitchisonState { s: ds, d: dd })
}

pub(crate) fn rhs_mitchison_into(
    g: &Graph,
    p: &ModelParams,
    s: &[f64],
    d: &[f64],
    ds: &mut [f64],
    dd: &mut [f64],
) {
    ds.copy_from_slice(&p.source);
    let inv_v = 1.0 / p.cell_volume;
    for (k, e) in g.edges().iter().enumerate() {
        let phi = d[k] * (s[e.i] - s[e.j]) / e.length;
        let area = p.wall_area(k);
        // cell i receives phi_ji = -phi, cell j receives phi
        ds[e.i] -= inv_v * area * phi;
        ds[e.j] += inv_v * area * phi;
        let target = match p.mitchison_update {
            MitchisonUpdate::Polar => phi.max(0.0).powi(2),
            MitchisonUpdate::Symmetric => phi * phi,
        };
        dd[k] = p.mitchison_rate * (target - d[k]);
    }
}

/// Relaxation targets for both orientations of every edge,
/// `(max(phi_ij, 0)^2, max(phi_ji, 0)^2)`.
pub fn oriented_targets(g: &Graph, st: &MitchisonState) -> Vec<(f64, f64)> {
    fick_flux(g, st)
        .into_iter()
        .map(|phi| (phi.max(0.0).powi(2), (-phi).max(0.0).powi(2)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_diamond, BBox};

    #[test]
    fn uniform_signal() {
        let g = build_diamond(3, 3, BBox::unit()).unwrap();
        let p = ModelParams {
            mitchison_rate: 0.7,
            ..ModelParams::with_fields(vec![0.0; 9], vec![0.0; 9])
        };
        let st = MitchisonState {
            s: vec![2.0; 9],
            d: (0..16).map(|k| 0.1 * k as f64).collect(),
        };
        let r = rhs_mitchison(&g, &p, &st).unwrap();
        assert!(r.s.iter().all(|&v| v == 0.0));
        for (dd, d) in r.d.iter().zip(&st.d) {
            assert_eq!(*dd, -0.7 * d);
        }
    }

    #[test]
    fn two_cells() {
        let g = Graph::new(&[(0.0, 0.0), (1.0, 0.0)], &[(0, 1)]).unwrap();
        let p = ModelParams::with_fields(vec![0.0, 0.0], vec![0.0, 0.0]);
        let st = MitchisonState {
            s: vec![2.0, 0.0],
            d: vec![1.0],
        };
        assert_eq!(fick_flux(&g, &st), vec![2.0]);
        let r = rhs_mitchison(&g, &p, &st).unwrap();
        assert_eq!(r.s, vec![-2.0, 2.0]);
        assert_eq!(r.d, vec![3.0]);
        assert_eq!(oriented_targets(&g, &st), vec![(4.0, 0.0)]);
    }

    #[test]
    fn signal_is_conserved_without_sources() {
        let g = build_diamond(4, 5, BBox::leaf()).unwrap();
        let n = g.num_vertices();
        let p = ModelParams {
            cell_volume: 2.5,
            wall_areas: (0..g.num_edges()).map(|k| 1.0 + 0.1 * k as f64).collect(),
            ..ModelParams::with_fields(vec![0.0; n], vec![0.0; n])
        };
        let st = MitchisonState {
            s: (0..n).map(|i| ((i * 7) % 5) as f64).collect(),
            d: (0..g.num_edges()).map(|k| ((k * 3) % 4) as f64 * 0.5).collect(),
        };
        let r = rhs_mitchison(&g, &p, &st).unwrap();
        let total: f64 = r.s.iter().sum();
        assert!(total.abs() < 1e-12);
    }
}
