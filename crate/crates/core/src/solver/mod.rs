//! Time integration, the Kirchhoff solve and steady-state handling.

pub mod kirchhoff;
pub mod ndf;
pub mod simulate;

pub use kirchhoff::{kirchhoff_residual, kirchhoff_solve};
pub use ndf::{detect_steady, integrate, integrate_with, Formula, IntegratorConfig, OdeSystem, StepStats, Trajectory};
pub use simulate::{
    simulate_hu_cai, simulate_mitchison, simulate_primary, Diagnostics, HuCaiSystem, MitchisonSystem, ModelKind,
    PolishReport, PrimarySystem, PrunedEdge, RunOptions, SimulationResult,
};
