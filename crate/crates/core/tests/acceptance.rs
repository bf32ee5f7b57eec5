//! Acceptance checks, one test per criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use venation::analysis::{energy_dissipation, murray_residual, symmetry_error};
use venation::config::RunConfig;
use venation::continuum::{
    p_laplacian_steady, run_continuum, solve_elliptic, ContinuumField, ContinuumParams, ContinuumRunConfig,
    PLaplaceOptions, TensorGrid,
};
use venation::dynamics::{ModelParams, NetworkState};
use venation::grid::{build_diamond, BBox, Graph, Shape};
use venation::pipeline::{self, sweep, Axis, Outcome};
use venation::solver::{simulate_primary, IntegratorConfig, RunOptions};

fn config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name);
    RunConfig::load(&path).unwrap()
}

// written to the stdout handle, not `println!`, so the line survives test capture
fn verdict(n: u32, pass: bool, detail: String) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" }).unwrap();
}

fn network(o: Outcome) -> (venation::config::NetworkSetup, venation::solver::SimulationResult) {
    match o {
        Outcome::Network { setup, result, .. } => (setup, result),
        Outcome::Continuum { .. } => panic!("expected a network run"),
    }
}

#[test]
fn criterion_01_two_cell_closed_form() {
    let start = Instant::now();
    let g = Graph::new(&[(0.0, 0.0), (1.0, 0.0)], &[(0, 1)]).unwrap();
    let p = ModelParams::with_fields(vec![1.0, 0.0], vec![0.0, 1.0]);
    let init = NetworkState::uniform(&g, 1.0, 1.0);
    let res = simulate_primary(&g, &p, &init, &IntegratorConfig::default(), &RunOptions::default()).unwrap();
    let last = res.final_state();
    let err = (last.a[0] - 2.0).abs().max((last.a[1] - 1.0).abs()).max((last.x[0] - 1.0).abs());
    let murray = murray_residual(&g, &p, last).unwrap();
    let elapsed = start.elapsed();
    let pass = res.steady && err <= 1e-6 && murray.max_relative_residual <= 1e-8 && elapsed < Duration::from_secs(1);
    verdict(
        1,
        pass,
        format!(
            "a = ({:.9}, {:.9}), X = {:.9}, max error {err:.2e}, Murray {:.2e}, {elapsed:.2?}",
            last.a[0], last.a[1], last.x[0], murray.max_relative_residual
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_baseline_diamond() {
    let start = Instant::now();
    let cfg = config("baseline.toml");
    let (setup, res) = network(pipeline::execute(&cfg).unwrap());
    let g = &setup.graph;
    let last = res.final_state();
    let sym = symmetry_error(g, last, g.midline()).unwrap();
    let murray = murray_residual(g, &setup.params, last).unwrap();
    let jac = venation::analysis::coexistence(g, last);
    let elapsed = start.elapsed();
    // frozen golden: 19 shared cells out of 23 in the union of the masks
    let golden = 19.0 / 23.0;
    let pass = (g.num_vertices(), g.num_edges()) == (81, 208)
        && res.steady
        && sym <= 1e-6
        && murray.max_relative_residual <= 1e-6
        && jac >= 0.5
        && (jac - golden).abs() < 1e-12
        && elapsed < Duration::from_secs(60);
    verdict(
        2,
        pass,
        format!(
            "steady at t = {:.2}, symmetry {sym:.2e}, Murray {:.2e} on {} zero-decay cells, Jaccard {jac:.4}, {elapsed:.2?}",
            res.steady_time.unwrap_or(f64::NAN),
            murray.max_relative_residual,
            g.num_vertices() - murray.skipped_vertices.len()
        ),
    );
    assert!(pass);
}

struct RandomCase {
    graph: Graph,
    params: ModelParams,
    init: NetworkState,
}

fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(2..=6);
    let cols = rng.random_range(2..=6);
    let graph = if rng.random_bool(0.5) {
        build_diamond(rows, cols, BBox::leaf()).unwrap()
    } else {
        venation::grid::build(Shape::Rectangle, rows.max(3), rows.max(3), BBox::unit()).unwrap()
    };
    let n = graph.num_vertices();
    let no_sources = seed % 2 == 0;
    let source: Vec<f64> = (0..n)
        .map(|_| {
            if no_sources || rng.random_bool(0.7) {
                0.0
            } else {
                rng.random_range(0.0..20.0)
            }
        })
        .collect();
    let decay: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
    let gamma = rng.random_range(0.5..1.0);
    // kappa - gamma in (0, 1]
    let gap = 1.0 - rng.random_range(0.0..0.95);
    let params = ModelParams {
        delta: rng.random_range(0.2..3.0),
        sigma: rng.random_range(0.5..2.0),
        gamma,
        kappa: gamma + gap,
        tau: rng.random_range(0.5..2.0),
        ..ModelParams::with_fields(source, decay)
    };
    let a = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
    let x = (0..graph.num_edges())
        .map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..2.0) })
        .collect();
    RandomCase {
        graph,
        params,
        init: NetworkState::new(a, x),
    }
}

#[test]
fn criterion_03_theorem_invariants() {
    let start = Instant::now();
    let cfg = IntegratorConfig {
        t_max: 10.0,
        ..IntegratorConfig::default()
    };
    let atol = cfg.atol;
    let cases = 60;
    let mut failures = Vec::new();
    let (mut min_a, mut min_x, mut worst_bound) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut source_free = 0;
    for seed in 0..cases {
        let c = random_case(seed);
        let res = match simulate_primary(&c.graph, &c.params, &c.init, &cfg, &RunOptions::default()) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let d = &res.diagnostics;
        let snap_min_a = res.snapshots.iter().flat_map(|s| s.a.iter()).fold(f64::INFINITY, |m, &v| m.min(v));
        let snap_min_x = res.snapshots.iter().flat_map(|s| s.x.iter()).fold(f64::INFINITY, |m, &v| m.min(v));
        let case_min_a = snap_min_a.min(d.min_a);
        let case_min_x = snap_min_x.min(d.min_x);
        min_a = min_a.min(case_min_a);
        min_x = min_x.min(case_min_x);
        if !(case_min_a > 0.0) {
            failures.push(format!("seed {seed}: min a = {case_min_a:e}"));
        }
        if case_min_x < -atol {
            failures.push(format!("seed {seed}: min X = {case_min_x:e}"));
        }
        if c.params.source.iter().all(|&s| s == 0.0) {
            source_free += 1;
            let alpha = c.init.a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let sup = res
                .snapshots
                .iter()
                .flat_map(|s| s.a.iter())
                .fold(d.max_a, |m, &v| m.max(v));
            worst_bound = worst_bound.max(sup - alpha);
            if sup > alpha + atol {
                failures.push(format!("seed {seed}: sup a = {sup} > alpha = {alpha}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(300);
    verdict(
        3,
        pass,
        format!(
            "{cases} configs ({source_free} source-free): min a {min_a:.3e}, min X {min_x:.3e}, max(sup a - alpha) {worst_bound:.3e}, {elapsed:.2?} {failures:?}"
        ),
    );
    assert!(pass);
}

fn sweep_rows(cfg: &RunConfig, axis: &str, root: &Path) -> Vec<venation::pipeline::SweepRow> {
    sweep(cfg, &[Axis::parse(axis).unwrap()], root).unwrap()
}

#[test]
fn criterion_04_parameter_sweeps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("baseline.toml");
    let xi = sweep_rows(&cfg, "sources.0.strength=10,50,100,200", tmp.path());
    let extents: Vec<usize> = xi.iter().map(|r| r.pattern_extent.unwrap_or(0)).collect();
    let monotone = extents.windows(2).all(|w| w[0] <= w[1]);
    let delta = sweep_rows(&cfg, "params.delta=0.1,0.5,2,10", &tmp.path().join("delta"));
    let tau = sweep_rows(&cfg, "params.tau=0.5,2,5,10", &tmp.path().join("tau"));
    let clean = |rows: &[venation::pipeline::SweepRow]| rows.len() == 4 && rows.iter().all(|r| r.status == "ok");
    let pass = xi.iter().all(|r| r.status == "ok") && monotone && clean(&delta) && clean(&tau);
    let statuses = |rows: &[venation::pipeline::SweepRow]| rows.iter().map(|r| r.status.clone()).collect::<Vec<_>>();
    verdict(
        4,
        pass,
        format!(
            "xi_S extents {extents:?}, delta rows {:?}, tau rows {:?}",
            statuses(&delta),
            statuses(&tau)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_hu_cai_energy_and_kirchhoff() {
    let cfg = config("hu_cai_diamond.toml");
    let rtol = cfg.analysis.rtol;
    let (setup, res) = network(pipeline::execute(&cfg).unwrap());
    let e = energy_dissipation(&setup.graph, &setup.params, &res, rtol).unwrap();
    let kirchhoff = res.diagnostics.max_kirchhoff_residual.unwrap_or(f64::INFINITY);
    let pass = setup.graph.num_vertices() == 9 && e.passed && kirchhoff <= 1e-10;
    verdict(
        5,
        pass,
        format!(
            "{} snapshots, E {:.6} -> {:.6}, largest increment {:.2e}, Kirchhoff residual {kirchhoff:.2e}",
            e.energies.len(),
            e.energies[0],
            e.energies.last().unwrap(),
            e.max_increment
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_mitchison_conservation() {
    let cfg = config("mitchison_diamond.toml");
    let (setup, res) = network(pipeline::execute(&cfg).unwrap());
    assert!(setup.params.source.iter().all(|&s| s == 0.0));
    let mass = |s: &NetworkState| s.a.iter().sum::<f64>();
    let m0 = mass(&res.snapshots[0]);
    let drift = res.snapshots.iter().map(|s| (mass(s) - m0).abs()).fold(0.0, f64::max);
    let n = setup.graph.num_vertices() as f64;
    let tol = cfg.integrator.rtol * res.snapshots[0].a.iter().map(|v| v.abs()).sum::<f64>() + n * cfg.integrator.atol;
    let pass = drift <= tol;
    verdict(
        6,
        pass,
        format!("sum s(0) = {m0:.6}, max drift {drift:.2e} over {} snapshots (tolerance {tol:.2e})", res.snapshots.len()),
    );
    assert!(pass);
}

fn manufactured_error(n: usize) -> f64 {
    use std::f64::consts::PI;
    let g = TensorGrid::unit(n).unwrap();
    let f = ContinuumField::uniform(g, 0.0, 1.0);
    let exact: Vec<f64> = (0..n * n)
        .map(|c| {
            let (x, y) = g.center(c % n, c / n);
            (PI * x).cos() * (PI * y).cos()
        })
        .collect();
    let p = ContinuumParams {
        source: exact.iter().map(|u| (2.0 * PI * PI + 1.0) * u).collect(),
        decay: vec![1.0; n * n],
        ..ContinuumParams::default()
    };
    let a = solve_elliptic(&f, &p).unwrap();
    a.iter().zip(&exact).fold(0.0, |m: f64, (u, v)| m.max((u - v).abs()))
}

#[test]
fn criterion_07_elliptic_convergence_order() {
    let start = Instant::now();
    let errors: Vec<f64> = [16, 32, 64].iter().map(|&n| manufactured_error(n)).collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let elapsed = start.elapsed();
    let pass = orders.iter().all(|o| (1.8..=2.2).contains(o)) && elapsed < Duration::from_secs(30);
    let shown: Vec<String> = errors.iter().map(|e| format!("{e:.3e}")).collect();
    verdict(7, pass, format!("errors {shown:?}, orders {orders:.3?}, {elapsed:.2?}"));
    assert!(pass);
}

#[test]
fn criterion_08_continuum_transient() {
    let grid = TensorGrid::unit(32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut f0 = ContinuumField::uniform(grid, 0.0, 1.0);
    for x in f0.x1.iter_mut().chain(f0.x2.iter_mut()) {
        *x += 0.5 * rng.random::<f64>();
    }
    let mut source = vec![0.0; grid.num_cells()];
    for j in 12..20 {
        source[grid.cell(0, j)] = 50.0;
    }
    let p = ContinuumParams {
        source,
        ..ContinuumParams::default()
    };
    let cfg = ContinuumRunConfig::default();
    let traj = run_continuum(&f0, &p, &cfg).unwrap();
    let x0 = f0.min_x();
    let excess = traj
        .min_x
        .iter()
        .map(|&(t, m)| x0 * (-p.tau * t).exp() - 1e-6 * t - m)
        .fold(f64::NEG_INFINITY, f64::max);

    let plain = ContinuumParams::default();
    let free = run_continuum(
        &ContinuumField::uniform(grid, 0.0, 1.0),
        &plain,
        &ContinuumRunConfig {
            steady_tol: 0.0,
            ..cfg.clone()
        },
    )
    .unwrap();
    let max_a = free
        .snapshots
        .iter()
        .flat_map(|s| s.field.a.iter())
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    let mut decay_err: f64 = 0.0;
    for s in &free.snapshots {
        let want = (-plain.tau * s.t).exp();
        for &x in s.field.x1.iter().chain(&s.field.x2) {
            decay_err = decay_err.max((x - want).abs() / want);
        }
    }
    let last = free.snapshots.last().unwrap();
    let rate = -last.field.x1[0].ln() / last.t;
    // first-order splitting: (1 + h tau)^(-n) against exp(-tau t)
    let split_bound = plain.tau * plain.tau * cfg.h * last.t;
    let pass = excess <= 0.0 && max_a == 0.0 && decay_err <= split_bound && (rate - plain.tau).abs() <= plain.tau * plain.tau * cfg.h;
    verdict(
        8,
        pass,
        format!(
            "largest barrier excess {excess:.3e} over {} steps; source-free: max |a| {max_a:e}, rate {rate:.5} (tau {}), relative decay error {decay_err:.2e} <= {split_bound:.2e}",
            traj.steps, plain.tau
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_p_laplacian() {
    let grid = TensorGrid::unit(16).unwrap();
    let source: Vec<f64> = (0..grid.num_cells())
        .map(|c| {
            let (x, y) = grid.center(c % 16, c / 16);
            if x < 0.25 && (y - 0.5).abs() < 0.2 {
                5.0
            } else {
                0.0
            }
        })
        .collect();
    let p = ContinuumParams {
        kappa: 1e-6,
        gamma: 1e-6,
        delta: 1.0,
        tau: 2.0,
        source: source.clone(),
        ..ContinuumParams::default()
    };
    let r = p_laplacian_steady(grid, &p, &PLaplaceOptions::default()).unwrap();
    let lin = ContinuumParams {
        delta: p.delta / p.tau,
        source,
        ..ContinuumParams::default()
    };
    let a = solve_elliptic(&ContinuumField::uniform(grid, 0.0, 1.0), &lin).unwrap();
    let scale = a.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let err = r.a.iter().zip(&a).fold(0.0, |m: f64, (u, v)| m.max((u - v).abs())) / scale;
    let monotone = r.functional.windows(2).all(|w| w[1] <= w[0]);
    let pass = err <= 1e-4 && monotone;
    verdict(
        9,
        pass,
        format!(
            "relative difference {err:.2e} after {} iterations, F {:.6} -> {:.6}, monotone = {monotone}",
            r.iterations,
            r.functional[0],
            r.functional.last().unwrap()
        ),
    );
    assert!(pass);
}

fn artifacts(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "json"))
        .map(|p| (p.file_name().unwrap().into(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn criterion_10_determinism() {
    let mut compared = 0;
    let mut identical = true;
    for name in ["fig08_uniform_activity.toml", "mitchison_diamond.toml", "continuum_vein.toml"] {
        let cfg = config(name);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = pipeline::run(&cfg, a.path()).unwrap();
        let rb = pipeline::run(&cfg, b.path()).unwrap();
        let (fa, fb) = (artifacts(&ra.dir), artifacts(&rb.dir));
        compared += fa.len();
        identical &= !fa.is_empty() && fa == fb;
    }
    verdict(10, identical, format!("{compared} CSV/JSON files compared across repeated seeded runs"));
    assert!(identical);
}
