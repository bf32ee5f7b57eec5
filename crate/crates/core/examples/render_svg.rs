//! Renders the steady baseline network twice: viridis with zero edges
//! hidden, and greyscale with every edge drawn.

use std::path::Path;

use venation::config::RunConfig;
use venation::pipeline::{execute, Outcome};
use venation::render::{render_svg, Colormap, RenderOptions};

fn main() -> venation::Result<()> {
    let cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/baseline.toml"))?;
    let Outcome::Network { setup, result, .. } = execute(&cfg)? else {
        unreachable!()
    };
    let last = result.final_state();
    let veins = RenderOptions { omit_zero: true, ..RenderOptions::default() };
    let grey = RenderOptions { colormap: Colormap::Greys, w_max: 12.0, ..RenderOptions::default() };
    std::fs::write("baseline_veins.svg", render_svg(&setup.graph, last, &veins)?)?;
    std::fs::write("baseline_grey.svg", render_svg(&setup.graph, last, &grey)?)?;
    println!("wrote baseline_veins.svg and baseline_grey.svg");
    Ok(())
}
