//! Conductance adaptation with a Kirchhoff flow: the network energy never
//! increases along the trajectory.

use std::path::Path;

use venation::analysis::energy_dissipation;
use venation::config::RunConfig;
use venation::pipeline::{execute, Outcome};

fn main() -> venation::Result<()> {
    let cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/hu_cai_diamond.toml"))?;
    let Outcome::Network { setup, result, .. } = execute(&cfg)? else {
        unreachable!()
    };
    let e = energy_dissipation(&setup.graph, &setup.params, &result, cfg.analysis.rtol)?;
    for (t, en) in e.times.iter().zip(&e.energies).step_by((e.times.len() / 10).max(1)) {
        println!("t = {t:10.4}  E = {en:.8}");
    }
    println!("largest increment {:.2e}, monotone = {}", e.max_increment, e.passed);
    println!("Kirchhoff residual {:.2e}", result.diagnostics.max_kirchhoff_residual.unwrap_or(f64::NAN));
    println!("final conductivities: {:.4?}", result.final_state().x);
    Ok(())
}
