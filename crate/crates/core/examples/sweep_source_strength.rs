//! Sweeps the tip source strength and prints how far the pattern reaches.
//! Run directories go under $VENATION_OUTPUT_ROOT (default ./results).

use std::path::Path;

use venation::config::RunConfig;
use venation::pipeline::{output_root, sweep, Axis};

fn main() -> venation::Result<()> {
    let cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/fig02_source_strength.toml"))?;
    let axis = Axis::parse("sources.0.strength=1,10,100,1000")?;
    let rows = sweep(&cfg, &[axis], &output_root())?;
    println!("{:<28} {:>7} {:>7} {:>9}", "run", "steady", "extent", "overlap");
    for r in rows {
        println!(
            "{:<28} {:>7} {:>7} {:>9.4}",
            r.label,
            r.steady.unwrap_or(false),
            r.pattern_extent.map_or("-".into(), |e| e.to_string()),
            r.coexistence.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
