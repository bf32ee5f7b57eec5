use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use venation::config::RunConfig;
use venation::grid::Graph;
use venation::io::state_from_csv;
use venation::pipeline::{self, Axis, OUTPUT_ROOT_VAR};
use venation::render::{render_svg, RenderOptions};

/// Auxin transport network simulations.
#[derive(Parser)]
#[command(version, after_help = "Outputs go below $VENATION_OUTPUT_ROOT (default ./results).\nExit status: 0 ok, 1 invariant violation, 2 config error, 3 runtime failure.")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configuration.
    Run { config: PathBuf },
    /// Run a configuration once per value of the given axes (zipped).
    Sweep {
        config: PathBuf,
        /// `key=v1,v2,...` with a dotted config path, e.g. `params.delta=0.1,0.5`.
        #[arg(long, required = true)]
        axis: Vec<String>,
    },
    /// Draw a state CSV on a graph as SVG (to stdout or `--out`).
    Render {
        state: PathBuf,
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the analysis on a result directory.
    Check { dir: PathBuf },
}

fn fail(e: venation::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(pipeline::exit_code(&e) as u8)
}

fn status(violations: &[String]) -> ExitCode {
    for v in violations {
        eprintln!("invariant violation: {v}");
    }
    if violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let root = pipeline::output_root();
    log::debug!("{OUTPUT_ROOT_VAR} = {}", root.display());
    match cli.cmd {
        Cmd::Run { config } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match pipeline::run(&cfg, &root) {
                Ok(s) => {
                    println!("{}: steady = {}, outputs in {}", s.name, s.steady, s.dir.display());
                    status(&s.invariant_violations)
                }
                Err(e) => fail(e),
            }
        }
        Cmd::Sweep { config, axis } => {
            let parsed = RunConfig::load(&config)
                .and_then(|c| Ok((c, axis.iter().map(|a| Axis::parse(a)).collect::<venation::Result<Vec<_>>>()?)));
            let (cfg, axes) = match parsed {
                Ok(v) => v,
                Err(e) => return fail(e),
            };
            match pipeline::sweep(&cfg, &axes, &root) {
                Ok(rows) => {
                    for r in &rows {
                        println!(
                            "{}: {} steady={:?} extent={:?} {}",
                            r.label, r.status, r.steady, r.pattern_extent, r.error
                        );
                    }
                    if rows.iter().any(|r| r.status == "error") {
                        ExitCode::from(3)
                    } else if rows.iter().any(|r| r.violations > 0) {
                        ExitCode::from(1)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => fail(e),
            }
        }
        Cmd::Render { state, graph, out } => {
            let drawn = (|| -> venation::Result<String> {
                let read = |p: &PathBuf| {
                    std::fs::read_to_string(p)
                        .map_err(|e| venation::Error::Config(format!("cannot read {}: {e}", p.display())))
                };
                let g = Graph::from_json(&read(&graph)?)?;
                let st = state_from_csv(&read(&state)?)?;
                render_svg(&g, &st, &RenderOptions::default())
            })();
            match drawn {
                Ok(svg) => match out {
                    Some(path) => match std::fs::write(&path, svg) {
                        Ok(()) => ExitCode::SUCCESS,
                        Err(e) => fail(e.into()),
                    },
                    None => {
                        print!("{svg}");
                        ExitCode::SUCCESS
                    }
                },
                Err(e) => fail(e),
            }
        }
        Cmd::Check { dir } => match pipeline::check(&dir) {
            Ok(report) => status(report.violations()),
            Err(e) => fail(e),
        },
    }
}
