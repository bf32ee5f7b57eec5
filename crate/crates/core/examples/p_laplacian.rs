//! Steady continuum state from the minimisation formulation, compared with
//! the linear elliptic solve it reduces to when feedback is negligible.

use venation::continuum::{p_laplacian_steady, solve_elliptic, ContinuumField, ContinuumParams, PLaplaceOptions, TensorGrid};

fn main() -> venation::Result<()> {
    let n = 16;
    let grid = TensorGrid::unit(n)?;
    let source: Vec<f64> = (0..grid.num_cells())
        .map(|c| {
            let (x, y) = grid.center(c % n, c / n);
            if x < 0.25 && (y - 0.5).abs() < 0.2 { 5.0 } else { 0.0 }
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
    let r = p_laplacian_steady(grid, &p, &PLaplaceOptions::default())?;
    println!("{} iterations, F: {:.8} -> {:.8}", r.iterations, r.functional[0], r.functional.last().unwrap());

    let lin = ContinuumParams { delta: p.delta / p.tau, source, ..ContinuumParams::default() };
    let a = solve_elliptic(&ContinuumField::uniform(grid, 0.0, 1.0), &lin)?;
    let scale = a.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let diff = r.a.iter().zip(&a).fold(0.0, |m: f64, (u, v)| m.max((u - v).abs()));
    println!("max a = {scale:.6}, relative difference to the linear solve {:.2e}", diff / scale);
    Ok(())
}
