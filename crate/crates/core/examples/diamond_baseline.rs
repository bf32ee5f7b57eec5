//! Baseline diamond leaf: strong source at the tip, unit decay everywhere
//! else, uniform initial data. Prints the steady-state checks.

use std::time::Instant;

use venation::analysis::{coexistence, murray_residual, pattern_extent, symmetry_error};
use venation::dynamics::{ModelParams, NetworkState};
use venation::grid::{build_diamond, BBox};
use venation::solver::{simulate_primary, IntegratorConfig, RunOptions};

fn main() -> venation::Result<()> {
    let g = build_diamond(9, 9, BBox::leaf())?;
    let n = g.num_vertices();
    let mut source = vec![0.0; n];
    let mut decay = vec![1.0; n];
    for v in g.vertices() {
        if v.x <= -0.4 {
            source[v.id] = 100.0;
            decay[v.id] = 0.0;
        }
    }
    let p = ModelParams::with_fields(source, decay);
    let init = NetworkState::uniform(&g, 1.0, 1.0);

    let start = Instant::now();
    let res = simulate_primary(&g, &p, &init, &IntegratorConfig::default(), &RunOptions::default())?;
    let last = res.final_state();
    println!("|V| = {}, |E| = {}", n, g.num_edges());
    println!("steady = {} at t = {:?} ({:.2?})", res.steady, res.steady_time, start.elapsed());
    println!("steps: {:?}", res.stats);
    println!("polish: {:?}", res.diagnostics.polish);
    println!("pruned edges: {}", res.diagnostics.pruned.len());
    println!("symmetry error: {:.3e}", symmetry_error(&g, last, g.midline())?);
    let m = murray_residual(&g, &p, last)?;
    println!(
        "Murray: vertex {:.3e}, edge {:.3e} over {} edges",
        m.max_relative_residual, m.max_edge_relative_residual, m.edges_checked
    );
    println!("coexistence (Jaccard): {:.3}", coexistence(&g, last));
    for thr in [1e-6, 1e-3, 0.1, 1.0] {
        println!("edges with X > {thr}: {}", pattern_extent(last, thr));
    }
    println!("max a = {:.4}, max X = {:.4}", last.a.iter().cloned().fold(0.0, f64::max), last.x.iter().cloned().fold(0.0, f64::max));
    Ok(())
}
