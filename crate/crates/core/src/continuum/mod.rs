//! Continuum limit on a rectangular tensor grid.
//!
//! Cell-centered auxin `a`, with the diagonal transport tensor stored on the
//! interior faces: `X1` on faces normal to `x`, `X2` on faces normal to `y`.
//! Boundary faces carry no flux, which is the discrete no-flux condition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod elliptic;
pub mod linear;
pub mod plaplace;
pub mod transport;

pub use elliptic::{net_production, solve_elliptic, solve_elliptic_with};
pub use linear::{conjugate_gradient, CgReport, Stencil};
pub use plaplace::{p_laplacian_steady, PLaplaceOptions, PLaplaceResult};
pub use transport::{run_continuum, step_transport, ContinuumRunConfig, ContinuumSnapshot, ContinuumTrajectory};

/// `nx x ny` cells covering `[x0, x0 + lx] x [y0, y0 + ly]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorGrid {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub lx: f64,
    pub ly: f64,
}

impl TensorGrid {
    pub fn new(nx: usize, ny: usize, x0: f64, y0: f64, lx: f64, ly: f64) -> Result<Self> {
        let g = Self { nx, ny, x0, y0, lx, ly };
        g.validate()?;
        Ok(g)
    }

    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, n, 0.0, 0.0, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidGeometry(format!(
                "continuum grid needs at least 2x2 cells, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.lx > 0.0 && self.ly > 0.0 && self.lx.is_finite() && self.ly.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "continuum domain must have positive extent, got {} x {}",
                self.lx, self.ly
            )));
        }
        Ok(())
    }

    pub fn h1(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn h2(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.h1() * self.h2()
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn num_x_faces(&self) -> usize {
        (self.nx - 1) * self.ny
    }

    pub fn num_y_faces(&self) -> usize {
        self.nx * (self.ny - 1)
    }

    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x0 + (i as f64 + 0.5) * self.h1(),
            self.y0 + (j as f64 + 0.5) * self.h2(),
        )
    }

    /// Cell containing the point, clamped to the grid.
    pub fn locate(&self, x: f64, y: f64) -> (usize, usize) {
        let clamp = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        (
            clamp((x - self.x0) / self.h1(), self.nx),
            clamp((y - self.y0) / self.h2(), self.ny),
        )
    }

    /// Stencil layout of the `X1` faces: an `(nx-1) x ny` lattice.
    pub fn x_face_lattice(&self) -> (usize, usize) {
        (self.nx - 1, self.ny)
    }

    /// Stencil layout of the `X2` faces: an `nx x (ny-1)` lattice.
    pub fn y_face_lattice(&self) -> (usize, usize) {
        (self.nx, self.ny - 1)
    }
}

/// Auxin on cells and the diagonal transport tensor on faces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuumField {
    pub grid: TensorGrid,
    pub a: Vec<f64>,
    /// Index `j * (nx-1) + i`: face between cells `(i, j)` and `(i+1, j)`.
    pub x1: Vec<f64>,
    /// Index `j * nx + i`: face between cells `(i, j)` and `(i, j+1)`.
    pub x2: Vec<f64>,
}

impl ContinuumField {
    pub fn uniform(grid: TensorGrid, a: f64, x: f64) -> Self {
        Self {
            grid,
            a: vec![a; grid.num_cells()],
            x1: vec![x; grid.num_x_faces()],
            x2: vec![x; grid.num_y_faces()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let g = &self.grid;
        crate::dynamics::check_len("cell field", g.num_cells(), self.a.len())?;
        crate::dynamics::check_len("x-face field", g.num_x_faces(), self.x1.len())?;
        crate::dynamics::check_len("y-face field", g.num_y_faces(), self.x2.len())?;
        if self.x1.iter().chain(&self.x2).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "transport tensor must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn min_x(&self) -> f64 {
        self.x1.iter().chain(&self.x2).fold(f64::INFINITY, |m, v| m.min(*v))
    }

    pub fn max_x(&self) -> f64 {
        self.x1.iter().chain(&self.x2).fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }

    /// Cell averages of the face fields; a boundary cell takes the value of
    /// its single interior face.
    pub fn cell_tensor(&self) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let mut c1 = vec![0.0; g.num_cells()];
        let mut c2 = vec![0.0; g.num_cells()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                let mut faces = Vec::with_capacity(2);
                if i > 0 {
                    faces.push(self.x1[j * (g.nx - 1) + i - 1]);
                }
                if i + 1 < g.nx {
                    faces.push(self.x1[j * (g.nx - 1) + i]);
                }
                c1[g.cell(i, j)] = faces.iter().sum::<f64>() / faces.len() as f64;
                faces.clear();
                if j > 0 {
                    faces.push(self.x2[(j - 1) * g.nx + i]);
                }
                if j + 1 < g.ny {
                    faces.push(self.x2[j * g.nx + i]);
                }
                c2[g.cell(i, j)] = faces.iter().sum::<f64>() / faces.len() as f64;
            }
        }
        (c1, c2)
    }

    /// Restriction to the grid with half the cells in each direction (both
    /// counts must be even). Cells average their four children; a coarse
    /// face averages the two fine faces it covers.
    pub fn coarsen(&self) -> Result<Self> {
        let g = &self.grid;
        if g.nx % 2 != 0 || g.ny % 2 != 0 {
            return Err(Error::InvalidGeometry("coarsening needs even cell counts".into()));
        }
        let cg = TensorGrid::new(g.nx / 2, g.ny / 2, g.x0, g.y0, g.lx, g.ly)?;
        let mut out = Self::uniform(cg, 0.0, 0.0);
        for j in 0..cg.ny {
            for i in 0..cg.nx {
                let s: f64 = [(0, 0), (1, 0), (0, 1), (1, 1)]
                    .iter()
                    .map(|(di, dj)| self.a[g.cell(2 * i + di, 2 * j + dj)])
                    .sum();
                out.a[cg.cell(i, j)] = 0.25 * s;
            }
        }
        for j in 0..cg.ny {
            for i in 0..cg.nx - 1 {
                let fi = 2 * i + 1;
                out.x1[j * (cg.nx - 1) + i] =
                    0.5 * (self.x1[2 * j * (g.nx - 1) + fi] + self.x1[(2 * j + 1) * (g.nx - 1) + fi]);
            }
        }
        for j in 0..cg.ny - 1 {
            for i in 0..cg.nx {
                let fj = 2 * j + 1;
                out.x2[j * cg.nx + i] = 0.5 * (self.x2[fj * g.nx + 2 * i] + self.x2[fj * g.nx + 2 * i + 1]);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuumMode {
    /// Fast auxin: `-delta div(X grad a) = S - I a` at every step.
    #[default]
    Elliptic,
    /// Backward Euler in `a` for `a_t = delta div(X grad a) + S - I a`.
    Parabolic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuumParams {
    pub delta: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub tau: f64,
    pub big_d2: f64,
    /// Per-cell source density; empty means zero.
    pub source: Vec<f64>,
    /// Per-cell decay rate; empty means one.
    pub decay: Vec<f64>,
    pub mode: ContinuumMode,
    /// Relative residual target of the linear solves.
    pub cg_rtol: f64,
    pub cg_max_iter: usize,
}

impl Default for ContinuumParams {
    fn default() -> Self {
        Self {
            delta: 1.0,
            kappa: 1.25,
            gamma: 0.5,
            tau: 1.0,
            big_d2: 0.01,
            source: Vec::new(),
            decay: Vec::new(),
            mode: ContinuumMode::Elliptic,
            cg_rtol: 1e-12,
            cg_max_iter: 20_000,
        }
    }
}

impl ContinuumParams {
    pub fn source_at(&self, c: usize) -> f64 {
        self.source.get(c).copied().unwrap_or(0.0)
    }

    pub fn decay_at(&self, c: usize) -> f64 {
        self.decay.get(c).copied().unwrap_or(1.0)
    }

    pub fn validate(&self, grid: &TensorGrid) -> Result<()> {
        let n = grid.num_cells();
        for (name, field) in [("source", &self.source), ("decay", &self.decay)] {
            if !field.is_empty() {
                crate::dynamics::check_len(if name == "source" { "source field" } else { "decay field" }, n, field.len())?;
            }
            if field.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} field is not finite")));
            }
        }
        let checks = [
            ("delta", self.delta, self.delta > 0.0),
            ("gamma", self.gamma, self.gamma > 0.0),
            ("kappa", self.kappa, self.kappa >= 0.0),
            ("tau", self.tau, self.tau >= 0.0),
            ("bigD2", self.big_d2, self.big_d2 >= 0.0),
            ("cg_rtol", self.cg_rtol, self.cg_rtol > 0.0),
        ];
        for (name, v, ok) in checks {
            if !(ok && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} out of range: {v}")));
            }
        }
        Ok(())
    }

    /// Warnings for parameters outside the range where weak solutions are
    /// known to exist in two dimensions.
    pub fn well_posedness_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.kappa <= self.gamma {
            out.push(format!("kappa = {} <= gamma = {}", self.kappa, self.gamma));
        }
        let cap = (self.gamma + 4.0) / 3.0;
        if self.kappa >= cap {
            out.push(format!("kappa = {} >= (gamma + 4) / 3 = {cap}", self.kappa));
        }
        if self.big_d2 == 0.0 {
            out.push("bigD2 = 0: no smoothing of the transport tensor".into());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let g = TensorGrid::new(4, 3, 0.0, 0.0, 2.0, 1.5).unwrap();
        assert_eq!((g.num_cells(), g.num_x_faces(), g.num_y_faces()), (12, 9, 8));
        assert_eq!(g.h1(), 0.5);
        assert_eq!(g.center(1, 2), (0.75, 1.25));
        assert_eq!(g.locate(0.76, 1.49), (1, 2));
        assert_eq!(g.locate(-3.0, 9.0), (0, 2));
        assert!(TensorGrid::unit(1).is_err());
        assert!(TensorGrid::new(3, 3, 0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn coarsen_uniform_and_linear() {
        let g = TensorGrid::unit(4).unwrap();
        let mut f = ContinuumField::uniform(g, 2.0, 3.0);
        for j in 0..4 {
            for i in 0..3 {
                f.x1[j * 3 + i] = i as f64;
            }
        }
        let c = f.coarsen().unwrap();
        assert_eq!(c.a, vec![2.0; 4]);
        // coarse x-face 0 sits on fine x-face 1
        assert_eq!(c.x1, vec![1.0, 1.0]);
        assert_eq!(c.x2, vec![3.0, 3.0]);
    }

    #[test]
    fn cell_tensor_of_uniform_field() {
        let f = ContinuumField::uniform(TensorGrid::unit(3).unwrap(), 0.0, 0.5);
        let (c1, c2) = f.cell_tensor();
        assert!(c1.iter().chain(&c2).all(|&v| v == 0.5));
    }
}
