use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use cosserat::bench;
use cosserat::generators::{generate, parse_ramp};
use cosserat::outputs::{write_solution, SolveOutcome};
use cosserat::scene_file::{read_scene, write_scene};
use cosserat_core::network::{Network, Ramp};
use cosserat_core::solver::load_stepped_solve;

const INPUT_ERROR: u8 = 1;
const NO_CONVERGENCE: u8 = 2;
const BENCH_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "cosserat", version, about = "Static equilibria of Cosserat rod networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scene file and write state.json, residuals.csv,
    /// centerline.csv and report.json.
    Solve {
        scene: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Residual tolerance, overriding the scene's.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// single, linear:N or sine:N; applies to every load.
        #[arg(long, value_parser = ramp_arg)]
        ramp: Option<Ramp>,
    },
    /// Run a named benchmark and write its tables and report.json.
    Bench {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(bench::BENCHMARKS))]
        name: String,
        /// Defaults to bench_out/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a generated scene file.
    Generate {
        name: String,
        /// Generator parameter as key=value; repeatable.
        #[arg(long = "param", value_parser = param_arg)]
        params: Vec<(String, String)>,
        out: PathBuf,
    },
}

fn ramp_arg(s: &str) -> Result<Ramp, String> {
    parse_ramp(s).ok_or_else(|| format!("expected single, linear:N or sine:N with N >= 1, got {s:?}"))
}

fn param_arg(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => Err(format!("expected key=value, got {s:?}")),
    }
}

/// Caps the rayon pool at `COSSERAT_THREADS` when set.
fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("COSSERAT_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| anyhow!("COSSERAT_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn solve(scene_path: &Path, out: &Path, tol: Option<f64>, max_iters: Option<usize>, ramp: Option<Ramp>) -> Result<u8> {
    let scene = match read_scene(scene_path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(INPUT_ERROR);
        }
    };
    let mut config = scene.solver;
    if let Some(t) = tol {
        config.residual_tol = t;
    }
    if let Some(n) = max_iters {
        config.max_iters = n;
    }
    if ramp.is_some() {
        config.ramp_override = ramp;
    }
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return Ok(INPUT_ERROR);
    }
    let network = match Network::new(scene) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {}: {e}", scene_path.display());
            return Ok(INPUT_ERROR);
        }
    };
    let provenance = format!("cosserat solve {}", scene_path.display());
    let (state, report, failure) = match load_stepped_solve(&network, &config) {
        Ok((state, report)) => (state, report, None),
        Err(f) => {
            let f = *f;
            (f.state, f.report, Some((f.step, f.error.to_string())))
        }
    };
    let failed = failure.is_some();
    if let Some((step, msg)) = &failure {
        eprintln!("no convergence at load step {step}: {msg}; writing partial results");
    }
    write_solution(
        out,
        &SolveOutcome {
            network: &network,
            state: &state,
            report: &report,
            config: &config,
            failure,
            provenance: &provenance,
        },
    )?;
    println!(
        "{} after {} iterations, residual {:e}; results in {}",
        if failed { "stopped" } else { "converged" },
        report.total_iterations(),
        report.final_residual,
        out.display()
    );
    Ok(if failed { NO_CONVERGENCE } else { 0 })
}

fn run_bench(name: &str, out: Option<PathBuf>) -> Result<u8> {
    let out = out.unwrap_or_else(|| Path::new("bench_out").join(name));
    let result = match bench::run(name) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("benchmark {name} could not complete: {e:#}");
            return Ok(BENCH_FAILURE);
        }
    };
    result.write(&out)?;
    print!("{}", result.summary());
    println!(
        "{name}: {} in {:.2} s; results in {}",
        if result.passed() { "passed" } else { "FAILED" },
        result.wall_time_s,
        out.display()
    );
    Ok(if result.passed() { 0 } else { BENCH_FAILURE })
}

fn run_generate(name: &str, params: &[(String, String)], out: &Path) -> Result<u8> {
    match generate(name, params) {
        Ok(scene) => {
            if let Err(e) = Network::new(scene.clone()) {
                eprintln!("error: generated scene is invalid: {e}");
                return Ok(INPUT_ERROR);
            }
            write_scene(out, &scene).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "{name}: {} nodes, {} elements -> {}",
                scene.nodes.len(),
                scene.elements.len(),
                out.display()
            );
            Ok(0)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Ok(INPUT_ERROR)
        }
    }
}

fn main() -> ExitCode {
    // usage errors exit with 1; clap's own 2 means non-convergence here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { INPUT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Solve {
            scene,
            out,
            tol,
            max_iters,
            ramp,
        } => solve(&scene, &out, tol, max_iters, ramp),
        Command::Bench { name, out } => run_bench(&name, out),
        Command::Generate { name, params, out } => run_generate(&name, &params, &out),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(INPUT_ERROR)
        }
    }
}
