//! Steady-state and trajectory checks: Murray's law, the global bounds on
//! auxin and transport activity, energy dissipation of the Hu-Cai flow,
//! mirror symmetry and simple pattern metrics.

use serde::{Deserialize, Serialize};

use crate::dynamics::hu_cai::{energy, hu_cai_flux};
use crate::dynamics::{flux, rhs_primary, safe_pow, ModelParams, NetworkState};
use crate::error::{Error, Result};
use crate::grid::{Graph, MirrorLine};
use crate::solver::kirchhoff::kirchhoff_solve;
use crate::solver::ndf::is_steady;
use crate::solver::simulate::{ModelKind, SimulationResult};

/// Edges with `X` below this fraction of `max X` are left out of the
/// per-edge flux identity.
pub const EDGE_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MurrayReport {
    /// Absolute residual per vertex; `None` for vertices with `I_i != 0`.
    pub residuals: Vec<Option<f64>>,
    pub relative_residuals: Vec<Option<f64>>,
    pub max_relative_residual: f64,
    pub skipped_vertices: Vec<usize>,
    /// Largest `| |Q|^kappa - tau X^(gamma+1) | / (tau X^(gamma+1))` over
    /// edges above the threshold.
    pub max_edge_relative_residual: f64,
    pub edges_checked: usize,
    /// Largest relative residual of the balance including `-I_i a_i`, over
    /// all vertices.
    pub max_general_relative_residual: f64,
    /// Set when the state does not pass the steady-state test.
    pub not_steady: bool,
}

/// `(tau X^(gamma+1))^(1/kappa)`, the flux magnitude a steady edge carries.
fn murray_weight(p: &ModelParams, x: f64) -> f64 {
    safe_pow(p.tau * safe_pow(x, p.gamma + 1.0), 1.0 / p.kappa)
}

/// Evaluates the generalized Murray law at `st`.
///
/// With `Q_ij = X_ij (a_j - a_i) / L_ij` taken from vertex `i`, the inflow
/// set is `N+(i) = {j : Q_ij > 0}` and the outflow set `N-(i) = {j : Q_ij < 0}`;
/// the law reads `delta sum_{N+} w_ij + S_i = delta sum_{N-} w_ij` with
/// `w = (tau X^(gamma+1))^(1/kappa)` at vertices without decay.
pub fn murray_residual(g: &Graph, p: &ModelParams, st: &NetworkState) -> Result<MurrayReport> {
    let q = flux(g, st)?;
    let n = g.num_vertices();
    crate::dynamics::check_len("source field", n, p.source.len())?;
    crate::dynamics::check_len("decay field", n, p.decay.len())?;

    let mut residuals = vec![None; n];
    let mut relative = vec![None; n];
    let mut skipped = Vec::new();
    let mut max_rel = 0.0_f64;
    let mut max_general = 0.0_f64;
    for i in 0..n {
        let (mut inflow, mut outflow, mut total) = (0.0, 0.0, 0.0);
        for &(_, k) in g.neighbors(i) {
            let w = p.delta * murray_weight(p, st.x[k]);
            total += w;
            let e = &g.edges()[k];
            let q_from_i = if e.i == i { q[k] } else { -q[k] };
            if q_from_i > 0.0 {
                inflow += w;
            } else if q_from_i < 0.0 {
                outflow += w;
            }
        }
        let s = p.source[i];
        let loss = p.decay[i] * st.a[i];
        let general = (inflow + s - outflow - loss).abs() / (total + s.abs() + loss.abs() + f64::EPSILON);
        max_general = max_general.max(general);
        if p.decay[i] != 0.0 {
            skipped.push(i);
            continue;
        }
        let r = (inflow + s - outflow).abs();
        let rel = r / (total + s.abs() + f64::EPSILON);
        residuals[i] = Some(r);
        relative[i] = Some(rel);
        max_rel = max_rel.max(rel);
    }

    let x_max = st.x.iter().fold(0.0_f64, |m, v| m.max(*v));
    let mut max_edge = 0.0_f64;
    let mut checked = 0;
    for (k, &x) in st.x.iter().enumerate() {
        if x <= EDGE_THRESHOLD * x_max || x <= 0.0 {
            continue;
        }
        checked += 1;
        let lhs = safe_pow(q[k].abs(), p.kappa);
        let rhs = p.tau * x.powf(p.gamma + 1.0);
        max_edge = max_edge.max((lhs - rhs).abs() / rhs.max(f64::MIN_POSITIVE));
    }

    let not_steady = match rhs_primary(g, p, st) {
        Ok(d) => !is_steady(&[d.a, d.x].concat(), &st.to_vector(), 1e-8),
        Err(_) => true,
    };
    Ok(MurrayReport {
        residuals,
        relative_residuals: relative,
        max_relative_residual: max_rel,
        skipped_vertices: skipped,
        max_edge_relative_residual: max_edge,
        edges_checked: checked,
        max_general_relative_residual: max_general,
        not_steady,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ViolationKind {
    NonPositiveAuxin,
    NegativeActivity,
    AboveGlobalBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub t: f64,
    pub index: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `sqrt(sum a_i(0)^2)`.
    pub alpha: f64,
    pub sources_vanish: bool,
    pub max_a_over_trajectory: f64,
    pub min_a: f64,
    pub min_x: f64,
    pub violations: Vec<Violation>,
    /// Vertices that start at zero auxin and stay there; allowed.
    pub informational: Vec<Violation>,
    /// Snapshot entries with `-atol <= a <= 0`: positivity of `a` is not
    /// resolved there, which happens once auxin has decayed below the
    /// integration tolerance. Not counted as violations.
    pub unresolved_auxin: usize,
    pub first_unresolved_t: Option<f64>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks positivity of `a` (values in `[-atol, 0]` are only counted as
/// unresolved), nonnegativity of `X` (up to `atol`) and, when
/// all sources vanish, the bound `a_i(t) <= alpha + atol` on every snapshot.
/// The extremes recorded over every accepted step are folded in as well.
pub fn check_bounds(res: &SimulationResult, p: &ModelParams, atol: f64) -> BoundReport {
    let first = &res.snapshots[0];
    let alpha = first.a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sources_vanish = p.source.iter().all(|&s| s == 0.0);
    let mut report = BoundReport {
        alpha,
        sources_vanish,
        max_a_over_trajectory: f64::NEG_INFINITY,
        min_a: f64::INFINITY,
        min_x: f64::INFINITY,
        violations: Vec::new(),
        informational: Vec::new(),
        unresolved_auxin: 0,
        first_unresolved_t: None,
    };
    for st in &res.snapshots {
        for (i, &a) in st.a.iter().enumerate() {
            report.min_a = report.min_a.min(a);
            report.max_a_over_trajectory = report.max_a_over_trajectory.max(a);
            if a <= 0.0 {
                let v = Violation {
                    kind: ViolationKind::NonPositiveAuxin,
                    t: st.t,
                    index: i,
                    value: a,
                };
                if first.a[i] == 0.0 && a == 0.0 {
                    report.informational.push(v);
                } else if a >= -atol {
                    report.unresolved_auxin += 1;
                    report.first_unresolved_t.get_or_insert(st.t);
                } else {
                    report.violations.push(v);
                }
            }
            if sources_vanish && a > alpha + atol {
                report.violations.push(Violation {
                    kind: ViolationKind::AboveGlobalBound,
                    t: st.t,
                    index: i,
                    value: a,
                });
            }
        }
        for (k, &x) in st.x.iter().enumerate() {
            report.min_x = report.min_x.min(x);
            if x < -atol {
                report.violations.push(Violation {
                    kind: ViolationKind::NegativeActivity,
                    t: st.t,
                    index: k,
                    value: x,
                });
            }
        }
    }
    let d = &res.diagnostics;
    if d.min_a.is_finite() {
        report.min_a = report.min_a.min(d.min_a);
        report.max_a_over_trajectory = report.max_a_over_trajectory.max(d.max_a);
        report.min_x = report.min_x.min(d.min_x);
    }
    let t_end = res.final_state().t;
    let relaxed = first.a.iter().any(|&a| a == 0.0);
    if d.min_a.is_finite() && d.min_a < -atol && !relaxed && report.violations.is_empty() {
        report.violations.push(Violation {
            kind: ViolationKind::NonPositiveAuxin,
            t: t_end,
            index: usize::MAX,
            value: d.min_a,
        });
    }
    if d.min_x.is_finite() && d.min_x < -atol && report.violations.is_empty() {
        report.violations.push(Violation {
            kind: ViolationKind::NegativeActivity,
            t: t_end,
            index: usize::MAX,
            value: d.min_x,
        });
    }
    if sources_vanish && d.max_a.is_finite() && d.max_a > alpha + atol && report.violations.is_empty() {
        report.violations.push(Violation {
            kind: ViolationKind::AboveGlobalBound,
            t: t_end,
            index: usize::MAX,
            value: d.max_a,
        });
    }
    report
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub max_increment: f64,
    pub passed: bool,
}

/// Energy along a Hu-Cai trajectory with the pressures re-solved from the
/// stored conductivities. Passes iff every increment is at most
/// `rtol * |E|`.
pub fn energy_dissipation(g: &Graph, p: &ModelParams, res: &SimulationResult, rtol: f64) -> Result<EnergyReport> {
    if res.model != ModelKind::HuCai {
        return Err(Error::NotApplicable("energy dissipation needs a Hu-Cai trajectory".into()));
    }
    let mut times = Vec::with_capacity(res.snapshots.len());
    let mut energies = Vec::with_capacity(res.snapshots.len());
    for st in &res.snapshots {
        let c = &st.x;
        let pressure = kirchhoff_solve(g, c, &p.source)?;
        let q = hu_cai_flux(g, c, &pressure);
        times.push(st.t);
        energies.push(energy(g, p, c, &q)?);
    }
    let mut max_increment = f64::NEG_INFINITY;
    let mut passed = true;
    for w in energies.windows(2) {
        let inc = w[1] - w[0];
        max_increment = max_increment.max(inc);
        if inc > rtol * w[0].abs() {
            passed = false;
        }
    }
    if energies.len() < 2 {
        max_increment = 0.0;
    }
    Ok(EnergyReport {
        times,
        energies,
        max_increment,
        passed,
    })
}

/// `max_i |a_i - a_sigma(i)| + max_e |X_e - X_sigma(e)|` under the reflection
/// about `line`.
pub fn symmetry_error(g: &Graph, st: &NetworkState, line: MirrorLine) -> Result<f64> {
    st.check_dims(g)?;
    let (vperm, eperm) = g.mirror_permutation(line)?;
    let da = vperm
        .iter()
        .enumerate()
        .fold(0.0_f64, |m, (i, &j)| m.max((st.a[i] - st.a[j]).abs()));
    let dx = eperm
        .iter()
        .enumerate()
        .fold(0.0_f64, |m, (k, &l)| m.max((st.x[k] - st.x[l]).abs()));
    Ok(da + dx)
}

/// Number of edges with `X > threshold`.
pub fn pattern_extent(st: &NetworkState, threshold: f64) -> usize {
    st.x.iter().filter(|&&x| x > threshold).count()
}

/// Sum of the activities of the edges incident to each vertex.
pub fn incident_activity(g: &Graph, st: &NetworkState) -> Vec<f64> {
    (0..g.num_vertices())
        .map(|v| g.neighbors(v).iter().map(|&(_, k)| st.x[k]).sum())
        .collect()
}

/// Mask of the `ceil(n/4)` largest values; ties are broken towards the
/// smaller index.
pub fn top_quartile(values: &[f64]) -> Vec<bool> {
    let n = values.len();
    let keep = n.div_ceil(4);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let mut mask = vec![false; n];
    for &i in order.iter().take(keep) {
        mask[i] = true;
    }
    mask
}

pub fn jaccard(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Overlap of the high-auxin and high-activity regions: Jaccard index of the
/// top-quartile masks of `a` and of [`incident_activity`].
pub fn coexistence(g: &Graph, st: &NetworkState) -> f64 {
    jaccard(&top_quartile(&st.a), &top_quartile(&incident_activity(g, st)))
}

/// Everything `run` and `check` report for a primary-model result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub model: ModelKind,
    pub steady: bool,
    pub steady_time: Option<f64>,
    pub murray: Option<MurrayReport>,
    pub bounds: Option<BoundReport>,
    pub energy: Option<EnergyReport>,
    pub symmetry_error: Option<f64>,
    pub pattern_extent: usize,
    pub pattern_threshold: f64,
    pub coexistence: f64,
    pub warnings: Vec<String>,
    pub invariant_violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    pub atol: f64,
    pub rtol: f64,
    /// Activity threshold for [`pattern_extent`]; the default is the uniform
    /// initial activity, so the count is the reinforced part of the network.
    pub pattern_threshold: f64,
    /// Limit for the Murray check at a steady state.
    pub murray_tol: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-8,
            pattern_threshold: 1.0,
            murray_tol: 1e-6,
        }
    }
}

/// Runs every applicable check on `res`.
pub fn analyze(g: &Graph, p: &ModelParams, res: &SimulationResult, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let last = res.final_state();
    let mut violations = Vec::new();
    let mut murray = None;
    let mut bounds = None;
    let mut energy_report = None;
    match res.model {
        ModelKind::Primary => {
            let b = check_bounds(res, p, opts.atol);
            for v in &b.violations {
                violations.push(format!("{:?} at t = {}, index {}: {}", v.kind, v.t, v.index, v.value));
            }
            bounds = Some(b);
            if res.steady {
                let m = murray_residual(g, p, last)?;
                if m.skipped_vertices.len() < g.num_vertices() && m.max_relative_residual > opts.murray_tol {
                    violations.push(format!(
                        "Murray residual {:.3e} exceeds {:.1e}",
                        m.max_relative_residual, opts.murray_tol
                    ));
                }
                murray = Some(m);
            }
        }
        ModelKind::HuCai => {
            let e = energy_dissipation(g, p, res, opts.rtol)?;
            if !e.passed {
                violations.push(format!("energy increased by {:.3e}", e.max_increment));
            }
            energy_report = Some(e);
        }
        ModelKind::Mitchison => {}
    }
    let symmetric = symmetric_setup(g, p, &res.snapshots[0]);
    let symmetry = if symmetric {
        symmetry_error(g, last, g.midline()).ok()
    } else {
        None
    };
    Ok(AnalysisReport {
        model: res.model,
        steady: res.steady,
        steady_time: res.steady_time,
        murray,
        bounds,
        energy: energy_report,
        symmetry_error: symmetry,
        pattern_extent: pattern_extent(last, opts.pattern_threshold),
        pattern_threshold: opts.pattern_threshold,
        coexistence: coexistence(g, last),
        warnings: res.diagnostics.warnings.clone(),
        invariant_violations: violations,
    })
}

/// Whether the graph, the initial state and the source and decay fields are
/// all invariant under the reflection about the graph's midline.
pub fn symmetric_setup(g: &Graph, p: &ModelParams, init: &NetworkState) -> bool {
    let Ok((vperm, eperm)) = g.mirror_permutation(g.midline()) else {
        return false;
    };
    let fields_match = |v: &[f64]| v.is_empty() || vperm.iter().enumerate().all(|(i, &j)| v[i] == v[j]);
    fields_match(&p.source)
        && fields_match(&p.decay)
        && fields_match(&init.a)
        && eperm.iter().enumerate().all(|(k, &l)| init.x[k] == init.x[l])
}
