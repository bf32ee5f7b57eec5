//! The three network models wrapped as [`OdeSystem`]s, plus drivers that
//! integrate them and collect diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kirchhoff::{check_balance, kirchhoff_residual, kirchhoff_solve};
use super::ndf::{integrate_with, is_steady, IntegratorConfig, OdeSystem, StepStats};
use crate::dynamics::hu_cai::{energy, hu_cai_flux, rhs_hu_cai_into};
use crate::dynamics::mitchison::rhs_mitchison_into;
use crate::dynamics::primary::{jacobian_primary, rhs_primary_into};
use crate::dynamics::{check_len, safe_pow, MitchisonState, ModelParams, NetworkState};
use crate::error::{Error, Result};
use crate::grid::Graph;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Primary,
    HuCai,
    Mitchison,
}

/// Extra steady-state handling for the primary model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    /// Edges whose activity falls below this value while decaying are set to
    /// exactly zero and frozen; `0` disables pruning.
    pub prune_threshold: f64,
    /// Refine a detected steady state with Newton's method.
    pub polish: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            prune_threshold: 1e-12,
            polish: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrunedEdge {
    pub edge: usize,
    /// `None` for edges removed while polishing the final state.
    pub t: Option<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolishReport {
    pub iterations: usize,
    pub residual_before: f64,
    pub residual_after: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub warnings: Vec<String>,
    /// Extremes over every accepted step, not only the snapshots.
    pub min_a: f64,
    pub max_a: f64,
    pub min_x: f64,
    pub pruned: Vec<PrunedEdge>,
    pub polish: Option<PolishReport>,
    /// `(t, E)` at every snapshot (Hu-Cai mode).
    pub energy: Vec<(f64, f64)>,
    /// Largest Kirchhoff residual seen in any rhs evaluation, relative to
    /// `||S||_inf` (Hu-Cai mode).
    pub max_kirchhoff_residual: Option<f64>,
}

/// Outcome of a network simulation.
///
/// Snapshots are stored as [`NetworkState`]s for every model: in Hu-Cai mode
/// `a` holds the Kirchhoff pressures and `x` the conductivities, in
/// Mitchison mode `a` holds the signal and `x` the diffusion constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub model: ModelKind,
    pub snapshots: Vec<NetworkState>,
    pub steady: bool,
    pub steady_time: Option<f64>,
    pub stats: StepStats,
    pub diagnostics: Diagnostics,
}

impl SimulationResult {
    pub fn final_state(&self) -> &NetworkState {
        self.snapshots.last().expect("at least the initial snapshot")
    }
}

pub struct PrimarySystem<'a> {
    g: &'a Graph,
    p: &'a ModelParams,
    frozen: Vec<bool>,
    prune_threshold: f64,
    pruned: Vec<PrunedEdge>,
}

impl<'a> PrimarySystem<'a> {
    pub fn new(g: &'a Graph, p: &'a ModelParams, prune_threshold: f64) -> Self {
        Self {
            g,
            p,
            frozen: vec![false; g.num_edges()],
            prune_threshold,
            pruned: Vec::new(),
        }
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    /// Whether edge `k` shrinks at the given state, i.e.
    /// `(|a_j - a_i| / L)^kappa X^(kappa-gamma) < tau X`.
    fn decaying(&self, k: usize, a: &[f64], x: f64) -> bool {
        let e = &self.g.edges()[k];
        let grad = (a[e.j] - a[e.i]).abs() / e.length;
        let gap = self.p.kappa - self.p.gamma;
        safe_pow(grad, self.p.kappa) * safe_pow(x, gap) < self.p.tau * x
    }

    fn prune(&mut self, t: f64, y: &mut [f64], threshold: f64) -> bool {
        let n = self.g.num_vertices();
        let mut changed = false;
        for k in 0..self.g.num_edges() {
            let x = y[n + k];
            if self.frozen[k] || x >= threshold {
                continue;
            }
            if x <= 0.0 || self.decaying(k, &y[..n], x) {
                y[n + k] = 0.0;
                self.frozen[k] = true;
                self.pruned.push(PrunedEdge { edge: k, t: (!t.is_nan()).then_some(t), value: x });
                changed = true;
            }
        }
        changed
    }
}

impl OdeSystem for PrimarySystem<'_> {
    fn dim(&self) -> usize {
        self.g.num_vertices() + self.g.num_edges()
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.g.num_vertices();
        let (da, dx) = dy.split_at_mut(n);
        rhs_primary_into(self.g, self.p, &y[..n], &y[n..], Some(&self.frozen), da, dx)
    }

    fn jacobian(&mut self, _t: f64, y: &[f64], jac: &mut DMatrix<f64>) -> Result<bool> {
        let n = self.g.num_vertices();
        jacobian_primary(self.g, self.p, &y[..n], &y[n..], Some(&self.frozen), jac);
        Ok(true)
    }

    fn is_nonnegative(&self, _k: usize) -> bool {
        true
    }

    fn after_step(&mut self, t: f64, y: &mut [f64]) -> bool {
        if self.prune_threshold <= 0.0 {
            return false;
        }
        let threshold = self.prune_threshold;
        self.prune(t, y, threshold)
    }
}

/// Hu-Cai conductance flow; the pressures are re-solved from Kirchhoff's law
/// in every right-hand-side evaluation.
pub struct HuCaiSystem<'a> {
    g: &'a Graph,
    p: &'a ModelParams,
    pressure: Vec<f64>,
    s_scale: f64,
    max_residual: f64,
}

impl<'a> HuCaiSystem<'a> {
    pub fn new(g: &'a Graph, p: &'a ModelParams) -> Result<Self> {
        check_len("source field", g.num_vertices(), p.source.len())?;
        check_balance(&p.source)?;
        let s_scale = p.source.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Ok(Self {
            g,
            p,
            pressure: vec![0.0; g.num_vertices()],
            s_scale,
            max_residual: 0.0,
        })
    }

    /// Largest Kirchhoff residual relative to `||S||_inf` seen so far.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }
}

impl OdeSystem for HuCaiSystem<'_> {
    fn dim(&self) -> usize {
        self.g.num_edges()
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        // tiny negative round-off is treated as zero conductivity
        let c: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
        self.pressure = kirchhoff_solve(self.g, &c, &self.p.source)?;
        if self.s_scale > 0.0 {
            let r = kirchhoff_residual(self.g, &c, &self.p.source, &self.pressure) / self.s_scale;
            self.max_residual = self.max_residual.max(r);
        }
        rhs_hu_cai_into(self.g, self.p, &c, &self.pressure, dy);
        Ok(())
    }

    fn is_nonnegative(&self, _k: usize) -> bool {
        true
    }
}

pub struct MitchisonSystem<'a> {
    g: &'a Graph,
    p: &'a ModelParams,
}

impl<'a> MitchisonSystem<'a> {
    pub fn new(g: &'a Graph, p: &'a ModelParams) -> Result<Self> {
        check_len("source activity field", g.num_vertices(), p.source.len())?;
        if !(p.cell_volume > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cell volume must be positive, got {}",
                p.cell_volume
            )));
        }
        Ok(Self { g, p })
    }
}

impl OdeSystem for MitchisonSystem<'_> {
    fn dim(&self) -> usize {
        self.g.num_vertices() + self.g.num_edges()
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.g.num_vertices();
        let (ds, dd) = dy.split_at_mut(n);
        rhs_mitchison_into(self.g, self.p, &y[..n], &y[n..], ds, dd);
        Ok(())
    }

    fn is_nonnegative(&self, k: usize) -> bool {
        k >= self.g.num_vertices()
    }
}

struct Extremes {
    n: usize,
    min_a: f64,
    max_a: f64,
    min_x: f64,
}

impl Extremes {
    fn new(n: usize) -> Self {
        Self {
            n,
            min_a: f64::INFINITY,
            max_a: f64::NEG_INFINITY,
            min_x: f64::INFINITY,
        }
    }

    fn observe(&mut self, y: &[f64]) {
        for &v in &y[..self.n] {
            self.min_a = self.min_a.min(v);
            self.max_a = self.max_a.max(v);
        }
        for &v in &y[self.n..] {
            self.min_x = self.min_x.min(v);
        }
    }
}

fn to_states(times: &[f64], states: &[Vec<f64>], n: usize) -> Vec<NetworkState> {
    times
        .iter()
        .zip(states)
        .map(|(&t, y)| NetworkState::from_vector(y, n, t))
        .collect()
}

/// Integrates the adapted cellular model from `init`.
pub fn simulate_primary(
    g: &Graph,
    p: &ModelParams,
    init: &NetworkState,
    cfg: &IntegratorConfig,
    opts: &RunOptions,
) -> Result<SimulationResult> {
    let mut warnings = p.validate_primary(g)?;
    init.check_dims(g)?;
    if init.a.iter().chain(&init.x).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter(
            "initial auxin and transport activity must be finite and nonnegative".into(),
        ));
    }
    let n = g.num_vertices();
    let mut sys = PrimarySystem::new(g, p, opts.prune_threshold);
    let mut ext = Extremes::new(n);
    let traj = integrate_with(&mut sys, &init.to_vector(), cfg, |_, y| ext.observe(y))?;
    let mut snapshots = to_states(&traj.times, &traj.states, n);
    let stats = traj.stats.clone();

    let mut polish = None;
    if traj.steady && opts.polish {
        let last = snapshots.last_mut().expect("nonempty");
        let mut y = last.to_vector();
        let report = polish_primary(&mut sys, &mut y, cfg)?;
        if report.accepted {
            *last = NetworkState::from_vector(&y, n, last.t);
            ext.observe(&y);
        } else {
            warnings.push(format!(
                "steady-state refinement rejected (residual {:.3e} -> {:.3e})",
                report.residual_before, report.residual_after
            ));
        }
        polish = Some(report);
    }
    if !traj.steady {
        warnings.push(format!("no steady state detected before t = {}", cfg.t_max));
    }
    Ok(SimulationResult {
        model: ModelKind::Primary,
        snapshots,
        steady: traj.steady,
        steady_time: traj.steady_time,
        stats,
        diagnostics: Diagnostics {
            warnings,
            min_a: ext.min_a,
            max_a: ext.max_a,
            min_x: ext.min_x,
            pruned: sys.pruned,
            polish,
            energy: Vec::new(),
            max_kirchhoff_residual: None,
        },
    })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Damped Newton refinement of a numerically steady primary state. Edges
/// that are still decaying towards zero are pruned first so that the limit
/// has them exactly at zero.
fn polish_primary(sys: &mut PrimarySystem<'_>, y: &mut Vec<f64>, cfg: &IntegratorConfig) -> Result<PolishReport> {
    let n = sys.g.num_vertices();
    let dim = sys.dim();
    let mut f = vec![0.0; dim];
    sys.rhs(0.0, y, &mut f)?;
    let residual_before = inf_norm(&f) / inf_norm(y).max(1.0);

    let mut trial_y = y.clone();
    let x_max = trial_y[n..].iter().fold(0.0_f64, |m, v| m.max(*v));
    let mut trial = PrimarySystem {
        g: sys.g,
        p: sys.p,
        frozen: sys.frozen.clone(),
        prune_threshold: 0.0,
        pruned: Vec::new(),
    };
    // edges well below the active scale that are still shrinking
    trial.prune(f64::NAN, &mut trial_y, 1e-6 * x_max.max(f64::MIN_POSITIVE));

    let active: Vec<usize> = (0..dim).filter(|&k| k < n || !trial.frozen[k - n]).collect();
    let mut jac = DMatrix::zeros(dim, dim);
    let mut iterations = 0;
    let mut res = {
        trial.rhs(0.0, &trial_y, &mut f)?;
        inf_norm(&f)
    };
    let target = 1e-14 * inf_norm(&trial_y).max(1.0);
    while iterations < 30 && res > target {
        iterations += 1;
        trial.jacobian(0.0, &trial_y, &mut jac)?;
        let m = active.len();
        let sub = DMatrix::from_fn(m, m, |r, c| jac[(active[r], active[c])]);
        let rhs = DVector::from_iterator(m, active.iter().map(|&k| -f[k]));
        let Some(step) = sub.lu().solve(&rhs) else {
            break;
        };
        let mut lambda = 1.0;
        let mut improved = false;
        let mut cand = trial_y.clone();
        let mut fc = vec![0.0; dim];
        for _ in 0..20 {
            cand.copy_from_slice(&trial_y);
            for (r, &k) in active.iter().enumerate() {
                cand[k] += lambda * step[r];
            }
            if cand.iter().all(|v| v.is_finite()) && trial.rhs(0.0, &cand, &mut fc).is_ok() {
                let rc = inf_norm(&fc);
                if rc < res {
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
        trial_y.copy_from_slice(&cand);
        f.copy_from_slice(&fc);
        res = inf_norm(&f);
    }
    let atol = cfg.atol;
    let nonneg = trial_y.iter().all(|v| *v >= -atol);
    for v in trial_y.iter_mut() {
        if *v < 0.0 && *v >= -atol {
            *v = 0.0;
        }
    }
    trial.rhs(0.0, &trial_y, &mut f)?;
    let residual_after = inf_norm(&f) / inf_norm(&trial_y).max(1.0);
    let accepted = nonneg && residual_after <= residual_before && is_steady(&f, &trial_y, cfg.steady_tol);
    if accepted {
        *y = trial_y;
        sys.frozen = trial.frozen;
        for mut p in trial.pruned {
            p.t = None;
            sys.pruned.push(p);
        }
    }
    Ok(PolishReport {
        iterations,
        residual_before,
        residual_after,
        accepted,
    })
}

/// Integrates the Hu-Cai flow from conductivities `c0`.
pub fn simulate_hu_cai(g: &Graph, p: &ModelParams, c0: &[f64], cfg: &IntegratorConfig) -> Result<SimulationResult> {
    check_len("conductivity vector", g.num_edges(), c0.len())?;
    if c0.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter(
            "initial conductivities must be finite and nonnegative".into(),
        ));
    }
    let mut warnings = Vec::new();
    if (p.nu - p.tau * p.tau).abs() > 1e-12 * p.nu.abs().max(1.0) {
        warnings.push(format!(
            "nu = {} differs from tau^2 = {}: the flow is not the gradient flow of the reported energy",
            p.nu,
            p.tau * p.tau
        ));
    }
    let mut sys = HuCaiSystem::new(g, p)?;
    let mut min_c = f64::INFINITY;
    let traj = integrate_with(&mut sys, c0, cfg, |_, y| {
        min_c = y.iter().fold(min_c, |m, v| m.min(*v));
    })?;
    let mut snapshots = Vec::with_capacity(traj.times.len());
    let mut energies = Vec::with_capacity(traj.times.len());
    let (mut min_p, mut max_p) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&t, c) in traj.times.iter().zip(&traj.states) {
        let pressure = kirchhoff_solve(g, c, &p.source)?;
        let q = hu_cai_flux(g, c, &pressure);
        energies.push((t, energy(g, p, c, &q)?));
        for &v in &pressure {
            min_p = min_p.min(v);
            max_p = max_p.max(v);
        }
        snapshots.push(NetworkState {
            a: pressure,
            x: c.clone(),
            t,
        });
    }
    if !traj.steady {
        warnings.push(format!("no steady state detected before t = {}", cfg.t_max));
    }
    Ok(SimulationResult {
        model: ModelKind::HuCai,
        snapshots,
        steady: traj.steady,
        steady_time: traj.steady_time,
        stats: traj.stats,
        diagnostics: Diagnostics {
            warnings,
            min_a: min_p,
            max_a: max_p,
            min_x: min_c,
            pruned: Vec::new(),
            polish: None,
            energy: energies,
            max_kirchhoff_residual: Some(sys.max_residual()),
        },
    })
}

/// Integrates the Mitchison model from `init`.
pub fn simulate_mitchison(
    g: &Graph,
    p: &ModelParams,
    init: &MitchisonState,
    cfg: &IntegratorConfig,
) -> Result<SimulationResult> {
    check_len("signal vector", g.num_vertices(), init.s.len())?;
    check_len("diffusion constant vector", g.num_edges(), init.d.len())?;
    let n = g.num_vertices();
    let mut sys = MitchisonSystem::new(g, p)?;
    let y0: Vec<f64> = init.s.iter().chain(&init.d).copied().collect();
    let mut ext = Extremes::new(n);
    let traj = integrate_with(&mut sys, &y0, cfg, |_, y| ext.observe(y))?;
    let mut warnings = Vec::new();
    if !traj.steady {
        warnings.push(format!("no steady state detected before t = {}", cfg.t_max));
    }
    Ok(SimulationResult {
        model: ModelKind::Mitchison,
        snapshots: to_states(&traj.times, &traj.states, n),
        steady: traj.steady,
        steady_time: traj.steady_time,
        stats: traj.stats,
        diagnostics: Diagnostics {
            warnings,
            min_a: ext.min_a,
            max_a: ext.max_a,
            min_x: ext.min_x,
            ..Diagnostics::default()
        },
    })
}
