//! State types and right-hand sides of the three network models.
//!
//! * [`primary`]: auxin concentration on cells with symmetric transport
//!   activity on the walls between them.
//! * [`hu_cai`]: conductance adaptation constrained by Kirchhoff's law.
//! * [`mitchison`]: signal diffusion with flux-driven diffusion constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Graph;

pub mod hu_cai;
pub mod mitchison;
pub mod primary;

pub use hu_cai::{energy, rhs_hu_cai};
pub use mitchison::{rhs_mitchison, MitchisonState, MitchisonUpdate};
pub use primary::{rhs_primary, rhs_primary_into};

/// Auxin per vertex and transport activity per undirected edge at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub a: Vec<f64>,
    pub x: Vec<f64>,
    pub t: f64,
}

impl NetworkState {
    pub fn new(a: Vec<f64>, x: Vec<f64>) -> Self {
        Self { a, x, t: 0.0 }
    }

    pub fn uniform(g: &Graph, a: f64, x: f64) -> Self {
        Self::new(vec![a; g.num_vertices()], vec![x; g.num_edges()])
    }

    pub fn check_dims(&self, g: &Graph) -> Result<()> {
        check_len("auxin vector", g.num_vertices(), self.a.len())?;
        check_len("transport activity vector", g.num_edges(), self.x.len())
    }

    /// `[a_0, .., a_{n-1}, X_0, .., X_{m-1}]`
    pub fn to_vector(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.a.len() + self.x.len());
        y.extend_from_slice(&self.a);
        y.extend_from_slice(&self.x);
        y
    }

    pub fn from_vector(y: &[f64], num_vertices: usize, t: f64) -> Self {
        Self {
            a: y[..num_vertices].to_vec(),
            x: y[num_vertices..].to_vec(),
            t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HuCaiState {
    pub conductivity: Vec<f64>,
    pub pressure: Vec<f64>,
}

/// Scalar model constants and static per-vertex fields.
///
/// `source` and `decay` are the per-vertex production `S_i` and degradation
/// `I_i`. In Hu-Cai mode `source` holds the signed Kirchhoff sources, and in
/// Mitchison mode it holds the source activities `sigma_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub delta: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Metabolic coefficient of the Hu-Cai energy. The Hu-Cai flow is the
    /// gradient flow of the energy when `nu == tau^2`.
    pub nu: f64,
    pub big_d2: f64,
    pub cell_volume: f64,
    /// Per-edge wall areas; empty means 1 on every edge.
    pub wall_areas: Vec<f64>,
    pub mitchison_rate: f64,
    pub mitchison_update: MitchisonUpdate,
    pub source: Vec<f64>,
    pub decay: Vec<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            delta: 1.0,
            sigma: 1.0,
            kappa: 2.0,
            gamma: 0.5,
            tau: 1.0,
            nu: 1.0,
            big_d2: 0.0,
            cell_volume: 1.0,
            wall_areas: Vec::new(),
            mitchison_rate: 1.0,
            mitchison_update: MitchisonUpdate::default(),
            source: Vec::new(),
            decay: Vec::new(),
        }
    }
}

impl ModelParams {
    pub fn with_fields(source: Vec<f64>, decay: Vec<f64>) -> Self {
        Self {
            source,
            decay,
            ..Self::default()
        }
    }

    pub fn wall_area(&self, edge: usize) -> f64 {
        self.wall_areas.get(edge).copied().unwrap_or(1.0)
    }

    /// Checks the constraints of the adapted cellular model and returns
    /// non-fatal warnings.
    pub fn validate_primary(&self, g: &Graph) -> Result<Vec<String>> {
        check_len("source field", g.num_vertices(), self.source.len())?;
        check_len("decay field", g.num_vertices(), self.decay.len())?;
        positive("delta", self.delta)?;
        positive("gamma", self.gamma)?;
        nonnegative("sigma", self.sigma)?;
        nonnegative("kappa", self.kappa)?;
        nonnegative("tau", self.tau)?;
        if self.source.iter().chain(&self.decay).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "sources and decay rates must be finite and nonnegative".into(),
            ));
        }
        Ok(self.well_posedness_warnings())
    }

    pub fn well_posedness_warnings(&self) -> Vec<String> {
        let gap = self.kappa - self.gamma;
        let mut out = Vec::new();
        if gap <= 0.0 {
            out.push(format!(
                "kappa - gamma = {gap} <= 0: zero transport activity is not absorbing"
            ));
        } else if gap > 1.0 {
            out.push(format!(
                "kappa - gamma = {gap} > 1: outside the global existence range 0 < kappa - gamma <= 1"
            ));
        }
        out
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
    }
    Ok(())
}

/// Oriented auxin flow `Q_ij = X_ij (a_j - a_i) / L_ij` for every edge in
/// its stored `i < j` orientation; `Q_ji = -Q_ij`.
pub fn flux(g: &Graph, st: &NetworkState) -> Result<Vec<f64>> {
    st.check_dims(g)?;
    Ok(g.edges()
        .iter()
        .zip(&st.x)
        .map(|(e, &x)| {
            if x == 0.0 {
                0.0
            } else {
                x * (st.a[e.j] - st.a[e.i]) / e.length
            }
        })
        .collect())
}

/// Flux across `edge` oriented from vertex `from` to the other endpoint.
pub fn oriented_flux(g: &Graph, q: &[f64], edge: usize, from: usize) -> f64 {
    if g.edges()[edge].i == from {
        q[edge]
    } else {
        -q[edge]
    }
}

/// `base^exponent` with `0^exponent = 0` for positive exponents; negative
/// bases (round-off below zero) are clamped to zero.
pub(crate) fn safe_pow(base: f64, exponent: f64) -> f64 {
    if base <= 0.0 {
        if exponent == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        base.powf(exponent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_diamond, BBox};
    use proptest::prelude::*;

    fn two_cells() -> Graph {
        Graph::new(&[(0.0, 0.0), (1.0, 0.0)], &[(0, 1)]).unwrap()
    }

    #[test]
    fn flux_examples() {
        let g = two_cells();
        let st = NetworkState::new(vec![1.0, 3.0], vec![2.0]);
        assert_eq!(flux(&g, &st).unwrap(), vec![4.0]);
        assert_eq!(oriented_flux(&g, &[4.0], 0, 1), -4.0);
        let st = NetworkState::new(vec![1.0, 3.0], vec![0.0]);
        assert_eq!(flux(&g, &st).unwrap(), vec![0.0]);
        let g = build_diamond(4, 4, BBox::unit()).unwrap();
        let st = NetworkState::uniform(&g, 2.5, 1.3);
        assert!(flux(&g, &st).unwrap().iter().all(|&q| q == 0.0));
    }

    #[test]
    fn flux_dimension_mismatch() {
        let g = two_cells();
        let st = NetworkState::new(vec![1.0], vec![2.0]);
        assert!(matches!(flux(&g, &st), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn warnings_for_default_parameters() {
        let p = ModelParams::default();
        assert_eq!(p.well_posedness_warnings().len(), 1);
        let p = ModelParams {
            kappa: 1.2,
            gamma: 0.5,
            ..ModelParams::default()
        };
        assert!(p.well_posedness_warnings().is_empty());
    }

    proptest! {
        #[test]
        fn flux_is_antisymmetric(seed in 0u64..1000, scale in 0.1f64..10.0) {
            let g = build_diamond(3, 4, BBox::unit()).unwrap();
            let mut s = seed;
            let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 11) as f64 / (1u64 << 53) as f64 };
            let a: Vec<f64> = (0..g.num_vertices()).map(|_| scale * next()).collect();
            let x: Vec<f64> = (0..g.num_edges()).map(|_| next()).collect();
            let st = NetworkState::new(a.clone(), x.clone());
            let q = flux(&g, &st).unwrap();
            for (k, e) in g.edges().iter().enumerate() {
                let forward = oriented_flux(&g, &q, k, e.i);
                let backward = oriented_flux(&g, &q, k, e.j);
                prop_assert_eq!(forward, -backward);
                // the reverse orientation computed from the formula directly
                let direct = x[k] * (a[e.i] - a[e.j]) / e.length;
                prop_assert!((backward - direct).abs() <= 1e-15 * (1.0 + direct.abs()));
            }
        }
    }
}
