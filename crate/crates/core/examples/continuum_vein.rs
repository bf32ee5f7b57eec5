//! Continuum model on the unit square with a line source on the left edge.
//! Writes the final field as SVG next to the working directory.

use std::path::Path;

use venation::config::RunConfig;
use venation::pipeline::{execute, Outcome};
use venation::render::render_field_svg;

fn main() -> venation::Result<()> {
    let cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/continuum_vein.toml"))?;
    let Outcome::Continuum { trajectory, report, .. } = execute(&cfg)? else {
        unreachable!()
    };
    for &(t, m) in trajectory.min_x.iter().step_by((trajectory.min_x.len() / 10).max(1)) {
        println!("t = {t:6.3}  min X = {m:.5}");
    }
    println!(
        "{} steps ({} shortened), max a = {:.4}, max X = {:.4}, barrier excess {:.2e}",
        report.steps, report.shortened_steps, report.max_a, report.max_x, report.barrier_excess
    );
    let svg = render_field_svg(trajectory.last(), &cfg.outputs.render)?;
    std::fs::write("continuum_vein.svg", svg)?;
    println!("wrote continuum_vein.svg");
    Ok(())
}
