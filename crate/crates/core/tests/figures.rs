//! Regression values for the shipped configurations: steadiness, pattern
//! extent and vein/activity overlap of the final state.

use std::path::Path;

use venation::config::RunConfig;
use venation::pipeline::{execute, Outcome};

fn summary(name: &str) -> (bool, usize, f64) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name);
    let cfg = RunConfig::load(&path).unwrap();
    match execute(&cfg).unwrap() {
        Outcome::Network { result, report, .. } => {
            assert!(report.invariant_violations.is_empty(), "{name}: {:?}", report.invariant_violations);
            (result.steady, report.pattern_extent, report.coexistence)
        }
        Outcome::Continuum { .. } => panic!("{name} is not a network run"),
    }
}

macro_rules! golden {
    ($($test:ident: $file:literal => ($extent:expr, $overlap:expr),)*) => {$(
        #[test]
        fn $test() {
            let (steady, extent, overlap) = summary($file);
            println!("{}: steady={steady} extent={extent} overlap={overlap:.4}", $file);
            assert!(steady, "{} did not reach steady state", $file);
            assert_eq!(extent, $extent, "{} extent", $file);
            assert!((overlap - $overlap).abs() < 1e-4, "{} overlap {overlap}", $file);
        }
    )*};
}

golden! {
    baseline: "baseline.toml" => (65, 19.0 / 23.0),
    perturbed_activity: "fig01_perturbed_activity.toml" => (64, 19.0 / 23.0),
    source_strength: "fig02_source_strength.toml" => (65, 19.0 / 23.0),
    round_leaf: "fig03_round.toml" => (71, 5.0 / 9.0),
    oval_leaf: "fig03_oval.toml" => (70, 0.5),
    corner_sink: "fig04_corner_sink.toml" => (64, 0.68),
    weak_feedback: "fig05_delta.toml" => (80, 5.0 / 9.0),
    slow_decay: "fig06_tau.toml" => (80, 19.0 / 23.0),
    bernoulli_activity: "fig07_bernoulli_activity.toml" => (38, 0.68),
    uniform_activity: "fig08_uniform_activity.toml" => (63, 0.5),
    source_sink_scale: "fig09_source_sink_scale.toml" => (8, 1.0),
    multi_source_diamond: "fig10_multi_source_diamond.toml" => (80, 0.5),
    multi_source_rectangle: "fig11_multi_source_rectangle.toml" => (80, 0.5),
    hu_cai: "hu_cai_diamond.toml" => (0, 0.2),
    mitchison: "mitchison_diamond.toml" => (0, 1.0 / 13.0),
}

#[test]
fn continuum_vein_stays_positive() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/continuum_vein.toml");
    let cfg = RunConfig::load(&path).unwrap();
    match execute(&cfg).unwrap() {
        Outcome::Continuum { report, .. } => {
            assert!(report.invariant_violations.is_empty());
            assert!(report.min_x > 0.0);
            assert!(report.barrier_excess <= 0.0);
        }
        Outcome::Network { .. } => panic!("expected a continuum run"),
    }
}
