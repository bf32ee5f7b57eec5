//! Polar carrier update with no sources or decay: total auxin is conserved
//! while the carriers reorient.

use std::path::Path;

use venation::config::RunConfig;
use venation::pipeline::{execute, Outcome};

fn main() -> venation::Result<()> {
    let cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/mitchison_diamond.toml"))?;
    let Outcome::Network { result, report, .. } = execute(&cfg)? else {
        unreachable!()
    };
    let m0: f64 = result.snapshots[0].a.iter().sum();
    for s in result.snapshots.iter().step_by((result.snapshots.len() / 8).max(1)) {
        let m: f64 = s.a.iter().sum();
        println!("t = {:8.3}  total auxin = {m:.12}  drift = {:.2e}", s.t, m - m0);
    }
    println!("steady = {}, violations = {:?}", result.steady, report.invariant_violations);
    Ok(())
}
