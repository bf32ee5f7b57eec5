//! Flux balance at steady state: at every cell without production or decay
//! the cubed incoming activities balance the outgoing ones.

use std::path::Path;

use venation::analysis::murray_residual;
use venation::config::RunConfig;
use venation::pipeline::{execute, Outcome};

fn main() -> venation::Result<()> {
    let cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/baseline.toml"))?;
    let Outcome::Network { setup, result, .. } = execute(&cfg)? else {
        unreachable!("baseline is a network run")
    };
    let m = murray_residual(&setup.graph, &setup.params, result.final_state())?;
    println!("checked {} cells, skipped {}", setup.graph.num_vertices() - m.skipped_vertices.len(), m.skipped_vertices.len());
    println!("largest relative residual: {:.3e}", m.max_relative_residual);
    println!("per edge: {:.3e} over {} edges", m.max_edge_relative_residual, m.edges_checked);
    let worst = m
        .relative_residuals
        .iter()
        .enumerate()
        .filter_map(|(v, r)| r.map(|r| (v, r)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((v, r)) = worst {
        println!("worst cell {v}: {r:.3e}");
    }
    Ok(())
}
