//! Two cells joined by one edge: a source cell with no decay feeding a sink
//! cell. The steady state is a = (2, 1), X = 1.

use venation::dynamics::{ModelParams, NetworkState};
use venation::grid::Graph;
use venation::solver::{simulate_primary, IntegratorConfig, RunOptions};

fn main() -> venation::Result<()> {
    let g = Graph::new(&[(0.0, 0.0), (1.0, 0.0)], &[(0, 1)])?;
    let p = ModelParams::with_fields(vec![1.0, 0.0], vec![0.0, 1.0]);
    let init = NetworkState::uniform(&g, 1.0, 1.0);
    let res = simulate_primary(&g, &p, &init, &IntegratorConfig::default(), &RunOptions::default())?;
    let last = res.final_state();
    println!("steady = {} at t = {:?}", res.steady, res.steady_time);
    println!("a = ({:.10}, {:.10}), X = {:.10}", last.a[0], last.a[1], last.x[0]);
    println!("{} accepted steps, {} error rejections", res.stats.accepted, res.stats.rejected_error);
    Ok(())
}
