//! Run configurations.
//!
//! A run is described by one TOML document; [`RunConfig::to_json`] gives the
//! canonical JSON mirror, and either form parses back to the same value.
//!
//! ```toml
//! name = "baseline"
//! model = "primary"
//!
//! [grid]
//! shape = "diamond"
//! rows = 9
//!
//! [[sources]]
//! strength = 100.0
//! region = { kind = "half_plane", normal = [1.0, 0.0], offset = -0.4 }
//!
//! [[sinks]]
//! strength = 1.0
//! region = { kind = "rest" }
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisOptions;
use crate::continuum::{ContinuumField, ContinuumMode, ContinuumParams, ContinuumRunConfig, TensorGrid};
use crate::dynamics::{MitchisonUpdate, ModelParams, NetworkState};
use crate::error::{Error, Result};
use crate::grid::{build, BBox, Graph, Shape};
use crate::render::RenderOptions;
use crate::solver::{IntegratorConfig, RunOptions};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    #[default]
    Primary,
    HuCai,
    Mitchison,
    Continuum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridShape {
    Diamond,
    Rectangle,
    Round,
    Oval,
    /// Cell-centered tensor grid of the continuum model.
    Tensor,
}

/// `rows x cols` vertices for diamonds and tensor grids (`nx x ny` cells for
/// the latter), `rows` as lattice resolution for the clipped shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub shape: GridShape,
    pub rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    /// Defaults to the leaf domain `(-0.5, 2) x (-1.5, 0.5)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
}

impl GridSpec {
    pub fn bbox(&self) -> BBox {
        self.bbox.unwrap_or_else(BBox::leaf)
    }

    pub fn cols(&self) -> usize {
        self.cols.unwrap_or(self.rows)
    }

    pub fn build_graph(&self) -> Result<Graph> {
        let shape = match self.shape {
            GridShape::Diamond => Shape::Diamond,
            GridShape::Rectangle => Shape::Rectangle,
            GridShape::Round => Shape::Round,
            GridShape::Oval => Shape::Oval,
            GridShape::Tensor => {
                return Err(Error::Config("a tensor grid only serves the continuum model".into()))
            }
        };
        build(shape, self.rows, self.cols(), self.bbox())
    }

    pub fn tensor_grid(&self) -> Result<TensorGrid> {
        if self.shape != GridShape::Tensor {
            return Err(Error::Config(format!(
                "the continuum model needs shape = \"tensor\", got {:?}",
                self.shape
            )));
        }
        let b = self.bbox();
        b.validate()?;
        TensorGrid::new(self.rows, self.cols(), b.x_min, b.y_min, b.width(), b.height())
    }
}

/// Scalar constants; anything left out takes the model's default. `nu`
/// defaults to `tau^2`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_d2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_volume: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mitchison_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mitchison_update: Option<MitchisonUpdate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ContinuumMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_max_iter: Option<usize>,
}

/// Where a source or sink acts. Regions select vertices (cell centers for
/// the continuum model).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    All,
    /// Every site not selected by any source placement.
    Rest,
    /// `normal . p <= offset`.
    HalfPlane { normal: [f64; 2], offset: f64 },
    Vertices { ids: Vec<usize> },
    /// The site closest to each point.
    Nearest { points: Vec<[f64; 2]> },
    /// Points `from + f (to - from)`, each snapped to the closest boundary
    /// site.
    BoundaryArc {
        from: [f64; 2],
        to: [f64; 2],
        fractions: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub strength: f64,
    pub region: Region,
}

/// Initial data for one field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldInit {
    Constant { value: f64 },
    /// `value + epsilon U(0,1)`.
    Perturbed { value: f64, epsilon: f64 },
    /// `theta + 1e-5 epsilon` with `P(theta = 1) = p`, else `theta = 0`.
    Bernoulli {
        #[serde(default = "default_bernoulli_p")]
        p: f64,
        epsilon: f64,
    },
    /// `epsilon U(0,1)`.
    ScaledUniform { epsilon: f64 },
}

fn default_bernoulli_p() -> f64 {
    0.2
}

impl FieldInit {
    pub fn is_random(&self) -> bool {
        !matches!(self, FieldInit::Constant { .. })
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = match *self {
            FieldInit::Constant { value } => value.is_finite() && value >= 0.0,
            FieldInit::Perturbed { value, epsilon } => value.is_finite() && value >= 0.0 && epsilon.is_finite() && epsilon >= 0.0,
            FieldInit::Bernoulli { p, epsilon } => (0.0..=1.0).contains(&p) && epsilon.is_finite() && epsilon >= 0.0,
            FieldInit::ScaledUniform { epsilon } => epsilon.is_finite() && epsilon >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("initial data for {what} must be finite and nonnegative: {self:?}")))
        }
    }

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n)
            .map(|_| match *self {
                FieldInit::Constant { value } => value,
                FieldInit::Perturbed { value, epsilon } => value + epsilon * rng.random::<f64>(),
                FieldInit::Bernoulli { p, epsilon } => {
                    let theta = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
                    theta + 1e-5 * epsilon
                }
                FieldInit::ScaledUniform { epsilon } => epsilon * rng.random::<f64>(),
            })
            .collect()
    }
}

/// Initial auxin `a` and transport activity `x` (signal and diffusion
/// constants in Mitchison mode, conductivities in Hu-Cai mode).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    pub a: FieldInit,
    pub x: FieldInit,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            a: FieldInit::Constant { value: 1.0 },
            x: FieldInit::Constant { value: 1.0 },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory below the output root; defaults to the run name.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Also write every snapshot, not only the final state.
    pub trajectory: bool,
    pub no_svg: bool,
    pub render: RenderOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub model: Model,
    pub grid: GridSpec,
    #[serde(default)]
    pub params: ParamSpec,
    #[serde(default)]
    pub sources: Vec<Placement>,
    #[serde(default)]
    pub sinks: Vec<Placement>,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub continuum: ContinuumRunConfig,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default)]
    pub outputs: OutputSpec,
}

fn default_name() -> String {
    "run".into()
}

/// A network run ready for integration.
#[derive(Clone, Debug)]
pub struct NetworkSetup {
    pub graph: Graph,
    pub params: ModelParams,
    pub init: NetworkState,
}

#[derive(Clone, Debug)]
pub struct ContinuumSetup {
    pub field: ContinuumField,
    pub params: ContinuumParams,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `.json` files as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        };
        parsed.map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Canonical JSON mirror.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn output_dir(&self) -> &str {
        self.outputs.dir.as_deref().unwrap_or(&self.name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("bad run name {:?}", self.name)));
        }
        self.initial.a.validate("a")?;
        self.initial.x.validate("x")?;
        if (self.initial.a.is_random() || self.initial.x.is_random()) && self.seed.is_none() {
            return Err(Error::Config("random initial data needs a seed".into()));
        }
        for pl in self.sources.iter().chain(&self.sinks) {
            if !pl.strength.is_finite() {
                return Err(Error::Config(format!("strength must be finite, got {}", pl.strength)));
            }
        }
        if self.model != Model::HuCai && self.model != Model::Mitchison {
            if let Some(pl) = self.sources.iter().chain(&self.sinks).find(|pl| pl.strength < 0.0) {
                return Err(Error::Config(format!(
                    "source and sink strengths must be nonnegative, got {}",
                    pl.strength
                )));
            }
        }
        if (self.model == Model::Continuum) != (self.grid.shape == GridShape::Tensor) {
            return Err(Error::Config(
                "the continuum model runs on shape = \"tensor\" and only there".into(),
            ));
        }
        self.integrator.validate()?;
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.unwrap_or(0));
        rng.set_stream(stream);
        rng
    }

    pub fn model_params(&self, sites: &Sites) -> Result<ModelParams> {
        let s = &self.params;
        let d = ModelParams::default();
        let tau = s.tau.unwrap_or(d.tau);
        let (source, decay) = match self.model {
            Model::Primary => (
                assign(sites, &self.sources, &[], 0.0)?,
                assign(sites, &self.sinks, &self.sources, 0.0)?,
            ),
            // signed fields: sinks drain
            _ => {
                let mut all: Vec<Placement> = self.sources.clone();
                all.extend(self.sinks.iter().map(|pl| Placement {
                    strength: -pl.strength,
                    region: pl.region.clone(),
                }));
                (assign(sites, &all, &self.sources, 0.0)?, vec![0.0; sites.len()])
            }
        };
        Ok(ModelParams {
            delta: s.delta.unwrap_or(d.delta),
            sigma: s.sigma.unwrap_or(d.sigma),
            kappa: s.kappa.unwrap_or(d.kappa),
            gamma: s.gamma.unwrap_or(d.gamma),
            tau,
            nu: s.nu.unwrap_or(tau * tau),
            big_d2: s.big_d2.unwrap_or(d.big_d2),
            cell_volume: s.cell_volume.unwrap_or(d.cell_volume),
            mitchison_rate: s.mitchison_rate.unwrap_or(d.mitchison_rate),
            mitchison_update: s.mitchison_update.unwrap_or(d.mitchison_update),
            source,
            decay,
            ..d
        })
    }

    /// Graph, parameters and initial state of a network run.
    pub fn network_setup(&self) -> Result<NetworkSetup> {
        if self.model == Model::Continuum {
            return Err(Error::Config("continuum runs have no network setup".into()));
        }
        let graph = self.grid.build_graph()?;
        let sites = Sites::from_graph(&graph);
        let params = self.model_params(&sites)?;
        let x = self.initial.x.sample(graph.num_edges(), &mut self.rng(0));
        let a = self.initial.a.sample(graph.num_vertices(), &mut self.rng(1));
        Ok(NetworkSetup {
            graph,
            params,
            init: NetworkState::new(a, x),
        })
    }

    /// Grid, parameters and initial transport tensor of a continuum run.
    /// Cells without a sink placement decay at rate one.
    pub fn continuum_setup(&self) -> Result<ContinuumSetup> {
        let grid = self.grid.tensor_grid()?;
        let sites = Sites::from_tensor_grid(&grid);
        let s = &self.params;
        let d = ContinuumParams::default();
        let params = ContinuumParams {
            delta: s.delta.unwrap_or(d.delta),
            kappa: s.kappa.unwrap_or(d.kappa),
            gamma: s.gamma.unwrap_or(d.gamma),
            tau: s.tau.unwrap_or(d.tau),
            big_d2: s.big_d2.unwrap_or(d.big_d2),
            source: assign(&sites, &self.sources, &[], 0.0)?,
            decay: assign(&sites, &self.sinks, &self.sources, 1.0)?,
            mode: s.mode.unwrap_or(d.mode),
            cg_rtol: s.cg_rtol.unwrap_or(d.cg_rtol),
            cg_max_iter: s.cg_max_iter.unwrap_or(d.cg_max_iter),
        };
        params.validate(&grid)?;
        let mut rng = self.rng(0);
        let x1 = self.initial.x.sample(grid.num_x_faces(), &mut rng);
        let x2 = self.initial.x.sample(grid.num_y_faces(), &mut rng);
        let a = self.initial.a.sample(grid.num_cells(), &mut self.rng(1));
        Ok(ContinuumSetup {
            field: ContinuumField { grid, a, x1, x2 },
            params,
        })
    }
}

/// Positions that regions select from, with the ids on the boundary.
#[derive(Clone, Debug)]
pub struct Sites {
    pub positions: Vec<(f64, f64)>,
    pub boundary: Vec<usize>,
}

impl Sites {
    pub fn from_graph(g: &Graph) -> Self {
        Self {
            positions: g.vertices().iter().map(|v| (v.x, v.y)).collect(),
            boundary: g.boundary_vertices(),
        }
    }

    pub fn from_tensor_grid(grid: &TensorGrid) -> Self {
        let mut positions = Vec::with_capacity(grid.num_cells());
        let mut boundary = Vec::new();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                positions.push(grid.center(i, j));
                if i == 0 || j == 0 || i + 1 == grid.nx || j + 1 == grid.ny {
                    boundary.push(grid.cell(i, j));
                }
            }
        }
        Self { positions, boundary }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    fn nearest(&self, p: [f64; 2], among: impl Iterator<Item = usize>) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for k in among {
            let (x, y) = self.positions[k];
            let d = (x - p[0]).powi(2) + (y - p[1]).powi(2);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, k));
            }
        }
        best.map(|(_, k)| k)
    }

    /// Sites selected by `region`; `claimed` marks the sites taken by
    /// sources (for [`Region::Rest`]).
    pub fn select(&self, region: &Region, claimed: &[bool]) -> Result<Vec<usize>> {
        let n = self.len();
        let mut out = match region {
            Region::All => (0..n).collect(),
            Region::Rest => (0..n).filter(|&k| !claimed[k]).collect(),
            Region::HalfPlane { normal, offset } => (0..n)
                .filter(|&k| {
                    let (x, y) = self.positions[k];
                    normal[0] * x + normal[1] * y <= *offset
                })
                .collect(),
            Region::Vertices { ids } => {
                if let Some(bad) = ids.iter().find(|&&i| i >= n) {
                    return Err(Error::Config(format!("vertex id {bad} out of range (0..{n})")));
                }
                ids.clone()
            }
            Region::Nearest { points } => points
                .iter()
                .filter_map(|&p| self.nearest(p, 0..n))
                .collect(),
            Region::BoundaryArc { from, to, fractions } => {
                let mut v = Vec::new();
                for &f in fractions {
                    if !(0.0..=1.0).contains(&f) {
                        return Err(Error::Config(format!("arc fraction {f} outside [0, 1]")));
                    }
                    let p = [from[0] + f * (to[0] - from[0]), from[1] + f * (to[1] - from[1])];
                    v.extend(self.nearest(p, self.boundary.iter().copied()));
                }
                v
            }
        };
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

/// Field that is `base` everywhere, then set to `strength` on each
/// placement's sites in order (later placements win).
fn assign(sites: &Sites, placements: &[Placement], sources: &[Placement], base: f64) -> Result<Vec<f64>> {
    let mut claimed = vec![false; sites.len()];
    let none = vec![false; sites.len()];
    for pl in sources {
        for k in sites.select(&pl.region, &none)? {
            claimed[k] = true;
        }
    }
    let mut field = vec![base; sites.len()];
    for pl in placements {
        for k in sites.select(&pl.region, &claimed)? {
            field[k] = pl.strength;
        }
    }
    Ok(field)
}
