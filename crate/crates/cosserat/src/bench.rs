//! Benchmark drivers. Every benchmark builds its scenes from the generators,
//! runs the solves and oracles, and returns metric tables plus pass/fail
//! checks against fixed bounds.
//!
//! Tables are deterministic CSV; timings only go into `report.json`.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use cosserat_core::element::ElementMode;
use cosserat_core::liegroup::{angular, linear};
use cosserat_core::network::{spatial_wrench, GlobalState, Network, NetworkScene, Ramp};
use cosserat_core::solver::{load_stepped_solve, newton_solve, SolveReport, SolverConfig};
use cosserat_core::validation::{
    displacement_error, energy_error, fit_convergence_order, internal_forces, internal_moment_check, max_displacement,
    sample_chain, shooting_reference, RodProblem, StrainField,
};
use cosserat_core::Pose;
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::generators::{
    rotation_about, Bend45, Cantilever, Chiral, ClampedClamped, Gridshell, Lattice2d, Patch, Truss3d, CC_DEFAULT_LOADS,
    CC_LENGTH, PATCH_LENGTH,
};
use crate::outputs::{residuals_csv, write_text};
use crate::scene_file::{scene_hash, SceneFile, SolverSection};

pub const BENCHMARKS: &[&str] = &[
    "cantilever",
    "bend45",
    "path-independence",
    "convergence",
    "newton-history",
    "patch-bending",
    "clamped-clamped",
    "lattice2d",
    "truss3d",
    "chiral",
    "gridshell",
];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("<= {bound:e}"),
            passed: value <= bound,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("< {bound:e}"),
            passed: value < bound,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("in [{lo}, {hi}]"),
            passed: (lo..=hi).contains(&value),
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool, what: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            bound: what.into(),
            passed: ok,
        }
    }
}

/// A scene the benchmark solved, embedded in its report.
#[derive(Debug, Clone, Serialize)]
pub struct SceneRecord {
    pub label: String,
    pub sha256: String,
    pub config: SolverSection,
    pub scene: SceneFile,
}

impl SceneRecord {
    fn new(label: impl Into<String>, scene: &NetworkScene, config: &SolverConfig) -> Self {
        Self {
            label: label.into(),
            sha256: scene_hash(scene),
            config: SolverSection::from_config(config),
            scene: SceneFile::from_scene(scene),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub name: String,
    /// What the metrics are compared against.
    pub provenance: String,
    pub checks: Vec<Check>,
    /// `(file name, csv)`.
    pub tables: Vec<(String, String)>,
    pub details: Value,
    pub scenes: Vec<SceneRecord>,
    pub wall_time_s: f64,
}

impl BenchOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Fixed-width check table, failing rows marked.
    pub fn summary(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}  {:>14}  {:<22}  status\n", "check", "value", "bound");
        for c in &self.checks {
            writeln!(
                out,
                "{:<width$}  {:>14.6e}  {:<22}  {}",
                c.name,
                c.value,
                c.bound,
                if c.passed { "pass" } else { "FAIL" }
            )
            .unwrap();
        }
        out
    }

    pub fn report_json(&self) -> Value {
        json!({
            "benchmark": self.name,
            "passed": self.passed(),
            "provenance": self.provenance,
            "checks": self.checks,
            "details": self.details,
            "wall_time_s": self.wall_time_s,
            "tables": self.tables.iter().map(|t| &t.0).collect::<Vec<_>>(),
            "scenes": self.scenes,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (file, csv) in &self.tables {
            write_text(dir, file, csv)?;
        }
        write_text(dir, "report.json", &(serde_json::to_string_pretty(&self.report_json())? + "\n"))
    }
}

pub fn run(name: &str) -> Result<BenchOutput> {
    let start = Instant::now();
    let mut out = match name {
        "cantilever" => cantilever()?,
        "bend45" => bend45()?,
        "path-independence" => path_independence()?,
        "convergence" => convergence()?,
        "newton-history" => newton_history()?,
        "patch-bending" => patch_bending()?,
        "clamped-clamped" => clamped_clamped()?,
        "lattice2d" => application("lattice2d", Lattice2d::default().scene()?, (120, 206))?,
        "truss3d" => application("truss3d", Truss3d::default().scene()?, (99, 220))?,
        "gridshell" => application("gridshell", Gridshell::default().scene()?, (579, 1618))?,
        "chiral" => chiral()?,
        other => bail!("unknown benchmark {other:?}; available: {}", BENCHMARKS.join(", ")),
    };
    out.wall_time_s = start.elapsed().as_secs_f64();
    Ok(out)
}

struct Solved {
    network: Network,
    state: GlobalState,
    report: SolveReport,
}

fn solve_with(scene: NetworkScene, config: &SolverConfig) -> Result<Solved> {
    let network = Network::new(scene)?;
    let (state, report) = load_stepped_solve(&network, config).map_err(|f| {
        anyhow!(
            "{} at load step {} (residual {:e})",
            f.error,
            f.step,
            f.report.residual_history.last().copied().unwrap_or(f64::NAN)
        )
    })?;
    Ok(Solved { network, state, report })
}

fn solve(scene: NetworkScene) -> Result<Solved> {
    let config = scene.solver;
    solve_with(scene, &config)
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

const CANTILEVER_FORCES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 3.0];

/// Tip position of the four-element cantilever against the shooting
/// oracle; the error is relative to the oracle's tip displacement.
fn cantilever() -> Result<BenchOutput> {
    let start = Instant::now();
    let rows: Vec<Result<(f64, Vector3<f64>, Vector3<f64>, f64, NetworkScene)>> = CANTILEVER_FORCES
        .par_iter()
        .map(|&force| {
            let scene = Cantilever {
                force,
                ..Cantilever::default()
            }
            .scene();
            let oracle = shooting_reference(&RodProblem::from_scene(&scene)?)?;
            let oracle_tip = oracle.last().unwrap().pose.position;
            let rest_tip = scene.nodes.last().unwrap().position;
            let s = solve(scene.clone())?;
            let tip = s.state.poses.last().unwrap().position;
            let err = (tip - oracle_tip).norm() / (oracle_tip - rest_tip).norm();
            Ok((force, tip, oracle_tip, err, scene))
        })
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let mut checks = Vec::new();
    let mut lines = Vec::new();
    let mut scenes = Vec::new();
    for r in rows {
        let (force, tip, oracle, err, scene) = r?;
        checks.push(Check::below(format!("tip error at {force} N"), err, 0.01));
        lines.push(format!(
            "{force},{:e},{:e},{:e},{:e},{:e},{:e},{err:e}",
            tip.x, tip.y, tip.z, oracle.x, oracle.y, oracle.z
        ));
        scenes.push(SceneRecord::new(format!("force {force} N"), &scene, &scene.solver));
    }
    checks.push(Check::below("runtime [s]", elapsed, 5.0));
    Ok(BenchOutput {
        name: "cantilever".into(),
        provenance: "shooting-method oracle; published claim: tip error below 1 % with four linear-strain elements"
            .into(),
        checks,
        tables: vec![(
            "cantilever.csv".into(),
            csv("force,tip_x,tip_y,tip_z,oracle_x,oracle_y,oracle_z,relative_error", lines),
        )],
        details: json!({ "elements": 4, "load_frame": "follower", "solve_time_s": elapsed }),
        scenes,
        wall_time_s: 0.0,
    })
}

const BEND45_REFERENCE: usize = 1000;
const BEND45_SAMPLES: usize = 48;

/// Element count, mode and label of every 45-degree bend candidate mesh.
fn bend45_meshes() -> Vec<(ElementMode, usize)> {
    let mut m: Vec<(ElementMode, usize)> = [4, 8, 12, 16].iter().map(|n| (ElementMode::Constant, *n)).collect();
    m.extend([2, 4, 6, 8].iter().map(|n| (ElementMode::Linear, *n)));
    m
}

fn mode_name(mode: ElementMode) -> &'static str {
    match mode {
        ElementMode::Linear => "LSE",
        ElementMode::Constant => "CSE",
    }
}

/// Total DoFs including the clamped node: 6 per node plus 6 per slope.
pub fn dof_count(mode: ElementMode, elements: usize) -> usize {
    6 * (elements + 1) + if mode.has_slope() { 6 * elements } else { 0 }
}

fn bend45_reference() -> Result<(Solved, NetworkScene)> {
    let scene = Bend45 {
        elements: BEND45_REFERENCE,
        ..Bend45::default()
    }
    .scene();
    Ok((solve(scene.clone())?, scene))
}

/// Displacement error per DoF of CSE and LSE meshes on the 45-degree bend.
fn bend45() -> Result<BenchOutput> {
    let start = Instant::now();
    let (reference, ref_scene) = bend45_reference()?;
    let chain = &reference.network.chains()[0];
    let ref_samples = sample_chain(&reference.network, &reference.state, chain, BEND45_SAMPLES)?;
    let rest = sample_chain(&reference.network, &reference.network.rest_state(), chain, BEND45_SAMPLES)?;
    let u_max = max_displacement(&ref_samples, &rest)?;
    let per_sample = BEND45_REFERENCE * BEND45_SAMPLES;
    let runs: Vec<Result<(ElementMode, usize, f64, NetworkScene)>> = bend45_meshes()
        .into_par_iter()
        .map(|(mode, n)| {
            let scene = Bend45 {
                elements: n,
                mode,
                ..Bend45::default()
            }
            .scene();
            let s = solve(scene.clone())?;
            let samples = sample_chain(&s.network, &s.state, &s.network.chains()[0], per_sample / n)?;
            Ok((mode, n, displacement_error(&samples, &ref_samples, u_max)?, scene))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let elapsed = start.elapsed().as_secs_f64();
    let errors = |mode: ElementMode| -> Vec<(usize, f64)> {
        runs.iter()
            .filter(|r| r.0 == mode)
            .map(|r| (dof_count(mode, r.1), r.2))
            .collect()
    };
    let (cse, lse) = (errors(ElementMode::Constant), errors(ElementMode::Linear));
    let mut checks = Vec::new();
    for (c, l) in cse.iter().zip(&lse) {
        debug_assert_eq!(c.0, l.0);
        checks.push(Check::holds(
            format!("LSE below CSE at {} DoFs", l.0),
            l.1 < c.1,
            format!("{:.3e} < {:.3e}", l.1, c.1),
        ));
    }
    for (name, e) in [("CSE", &cse), ("LSE", &lse)] {
        checks.push(Check::holds(
            format!("{name} error decreases with DoFs"),
            e.windows(2).all(|w| w[1].1 < w[0].1),
            "strictly decreasing",
        ));
    }
    checks.push(Check::below("runtime [s]", elapsed, 120.0));
    let mut scenes = vec![SceneRecord::new("reference", &ref_scene, &ref_scene.solver)];
    scenes.extend(
        runs.iter()
            .map(|r| SceneRecord::new(format!("{} {}", mode_name(r.0), r.1), &r.3, &r.3.solver)),
    );
    Ok(BenchOutput {
        name: "bend45".into(),
        provenance: "self-generated 1000-element linear-strain reference; published claim: LSE has the smaller \
                     displacement error at every matched DoF count"
            .into(),
        checks,
        tables: vec![(
            "bend45.csv".into(),
            csv(
                "element_type,elements,dofs,e_p",
                runs.iter()
                    .map(|r| format!("{},{},{},{:e}", mode_name(r.0), r.1, dof_count(r.0, r.1), r.2)),
            ),
        )],
        details: json!({
            "reference_elements": BEND45_REFERENCE,
            "u_max": u_max,
            "reference_iterations": reference.report.iterations,
            "solve_time_s": elapsed,
        }),
        scenes,
        wall_time_s: 0.0,
    })
}

/// The 45-degree bend solved in one step and along linear and sine ramps.
fn path_independence() -> Result<BenchOutput> {
    let scene = Bend45::default().scene();
    let ramps = [("single", Ramp::Single), ("linear:10", Ramp::Linear(10)), ("sine:10", Ramp::Sine(10))];
    let runs: Vec<Result<(Vector3<f64>, SolveReport)>> = ramps
        .par_iter()
        .map(|(_, ramp)| {
            let config = SolverConfig {
                ramp_override: Some(*ramp),
                ..scene.solver
            };
            let s = solve_with(scene.clone(), &config)?;
            Ok((s.state.poses.last().unwrap().position, s.report))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let mut gaps = Vec::new();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let gap = (runs[i].0 - runs[j].0).norm();
            checks.push(Check::at_most(format!("tip gap {} vs {}", ramps[i].0, ramps[j].0), gap, 1e-12));
            gaps.push(format!("{},{},{gap:e}", ramps[i].0, ramps[j].0));
        }
    }
    let scenes = ramps
        .iter()
        .map(|(label, ramp)| {
            let config = SolverConfig {
                ramp_override: Some(*ramp),
                ..scene.solver
            };
            SceneRecord::new(*label, &scene, &config)
        })
        .collect();
    Ok(BenchOutput {
        name: "path-independence".into(),
        provenance: "published tip gaps between ramps at machine precision (3.52e-15 and 5.71e-15 m); bound relaxed \
                     to 1e-12 m"
            .into(),
        checks,
        tables: vec![
            (
                "path_independence.csv".into(),
                csv(
                    "ramp,tip_x,tip_y,tip_z,load_steps,total_iterations",
                    ramps.iter().zip(&runs).map(|((label, _), (tip, report))| {
                        format!(
                            "{label},{:e},{:e},{:e},{},{}",
                            tip.x,
                            tip.y,
                            tip.z,
                            report.iterations.len(),
                            report.total_iterations()
                        )
                    }),
                ),
            ),
            ("path_independence_gaps.csv".into(), csv("ramp_a,ramp_b,tip_gap", gaps)),
        ],
        details: json!({ "elements": Bend45::default().elements }),
        scenes,
        wall_time_s: 0.0,
    })
}

pub const CONVERGENCE_COUNTS: [usize; 8] = [1, 2, 4, 8, 16, 32, 64, 128];

/// Strain-energy error of CSE and LSE meshes on the 45-degree bend under
/// refinement, with the fitted order over two or more elements.
fn convergence() -> Result<BenchOutput> {
    let start = Instant::now();
    let (reference, ref_scene) = bend45_reference()?;
    let ref_field = StrainField::from_chain(&reference.network, &reference.state, &reference.network.chains()[0])?;
    let meshes: Vec<(ElementMode, usize)> = [ElementMode::Constant, ElementMode::Linear]
        .iter()
        .flat_map(|m| CONVERGENCE_COUNTS.iter().map(move |n| (*m, *n)))
        .collect();
    let runs: Vec<Result<(ElementMode, usize, f64)>> = meshes
        .into_par_iter()
        .map(|(mode, n)| {
            let s = solve(
                Bend45 {
                    elements: n,
                    mode,
                    ..Bend45::default()
                }
                .scene(),
            )?;
            let field = StrainField::from_chain(&s.network, &s.state, &s.network.chains()[0])?;
            Ok((mode, n, energy_error(&field, &ref_field)?))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut checks = Vec::new();
    let mut orders = serde_json::Map::new();
    for (mode, lo, hi) in [(ElementMode::Linear, 3.5, 4.5), (ElementMode::Constant, 1.6, 2.4)] {
        let (counts, errors): (Vec<usize>, Vec<f64>) =
            runs.iter().filter(|r| r.0 == mode && r.1 >= 2).map(|r| (r.1, r.2)).unzip();
        let study = fit_convergence_order(&counts, &errors)?;
        checks.push(Check::within(format!("{} order", mode_name(mode)), study.order, lo, hi));
        orders.insert(
            mode_name(mode).into(),
            json!({ "order": study.order, "fit_residual": study.fit_residual }),
        );
    }
    checks.push(Check::below("runtime [s]", elapsed, 300.0));
    Ok(BenchOutput {
        name: "convergence".into(),
        provenance: "self-generated 1000-element linear-strain reference; published orders 4 (LSE) and 2 (CSE)".into(),
        checks,
        tables: vec![(
            "convergence.csv".into(),
            csv(
                "element_type,elements,e_E",
                runs.iter().map(|r| format!("{},{},{:e}", mode_name(r.0), r.1, r.2)),
            ),
        )],
        details: json!({ "fit": orders, "fit_counts": "2..128", "solve_time_s": elapsed }),
        scenes: vec![SceneRecord::new("reference", &ref_scene, &ref_scene.solver)],
        wall_time_s: 0.0,
    })
}

/// Residual history of one Newton solve of the four-element cantilever at
/// 1 N from the straight configuration, run past convergence to expose the
/// roundoff plateau.
fn newton_history() -> Result<BenchOutput> {
    let scene = Cantilever::default().scene();
    let config = SolverConfig {
        residual_tol: 1e-15,
        max_iters: 30,
        ..scene.solver
    };
    let network = Network::new(scene.clone())?;
    let report = match newton_solve(&network, network.rest_state(), &network.load_factors(1, None), &config) {
        Ok((_, r)) => r,
        Err(f) => f.report,
    };
    let h = &report.residual_history;
    let first = h.iter().position(|r| *r < 1e-3);
    let plateau = h.iter().rev().take(5).copied().fold(0.0, f64::max);
    let checks = vec![
        Check::at_most(
            "updates to reach 1e-3",
            first.map_or(f64::INFINITY, |i| i as f64),
            15.0,
        ),
        Check::at_most("plateau (max of last 5)", plateau, 1e-9),
    ];
    Ok(BenchOutput {
        name: "newton-history".into(),
        provenance: "published history: residual below 1e-3 within a few iterations, then a roundoff plateau".into(),
        checks,
        tables: vec![(
            "newton_history.csv".into(),
            csv(
                "iteration,residual_norm",
                h.iter().enumerate().map(|(i, r)| format!("{i},{r:e}")),
            ),
        )],
        details: json!({ "force": 1.0, "load_frame": "follower", "max_iters": config.max_iters }),
        scenes: vec![SceneRecord::new("cantilever 1 N", &scene, &config)],
        wall_time_s: 0.0,
    })
}

pub const PATCH_SLENDERNESS: [f64; 3] = [50.0, 100.0, 200.0];
const PATCH_SAMPLES: usize = 16;

/// Constant tip moment on four elements: the internal moment must equal
/// the applied one everywhere and the tip must land on the exact helix.
fn patch_bending() -> Result<BenchOutput> {
    let runs: Vec<Result<(f64, f64, f64, Vec<f64>, NetworkScene)>> = PATCH_SLENDERNESS
        .par_iter()
        .map(|&slenderness| {
            let patch = Patch {
                slenderness,
                ..Patch::default()
            };
            let scene = patch.scene();
            let s = solve(scene.clone())?;
            let m = patch.moment.norm();
            let errors: Vec<f64> = internal_moment_check(&s.network, &s.state, &patch.moment, PATCH_SAMPLES)?
                .into_iter()
                .map(|e| e / m)
                .collect();
            let helix = patch.helix_tip();
            let tip = s.state.poses.last().unwrap().position;
            let tip_err = (tip - helix).norm() / helix.norm();
            Ok((slenderness, errors.iter().copied().fold(0.0, f64::max), tip_err, errors, scene))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let mut profile = Vec::new();
    for (slenderness, moment_err, tip_err, errors, _) in &runs {
        if *slenderness == 200.0 {
            checks.push(Check::at_most("L/r=200 max internal-moment error", *moment_err, 1e-9));
            checks.push(Check::at_most("L/r=200 tip error vs helix", *tip_err, 1e-8));
            let step = PATCH_LENGTH / Patch::default().elements as f64 / PATCH_SAMPLES as f64;
            profile.extend(errors.iter().enumerate().map(|(i, e)| format!("{:e},{e:e}", i as f64 * step)));
        }
    }
    Ok(BenchOutput {
        name: "patch-bending".into(),
        provenance: "analytic constant-curvature helix; published claim: moment reproduced close to machine precision"
            .into(),
        checks,
        tables: vec![
            (
                "patch_bending.csv".into(),
                csv(
                    "slenderness,max_moment_error,tip_error",
                    runs.iter().map(|r| format!("{},{:e},{:e}", r.0, r.1, r.2)),
                ),
            ),
            ("patch_bending_profile.csv".into(), csv("s,moment_error", profile)),
        ],
        details: json!({
            "elements": Patch::default().elements,
            "moment": [Patch::default().moment.x, Patch::default().moment.y, Patch::default().moment.z],
            "young": crate::generators::PATCH_YOUNG,
            "nu": 0.0,
        }),
        scenes: runs
            .iter()
            .map(|r| SceneRecord::new(format!("L/r={}", r.0), &r.4, &r.4.solver))
            .collect(),
        wall_time_s: 0.0,
    })
}

pub const CC_REFERENCE: usize = 200;
pub const CC_MESHES: [usize; 3] = [8, 16, 32];
/// Published mid-span deflections of the 32-element meshes, used as
/// calibration targets for the reference solutions.
pub const CC_TARGETS: [(f64, f64); 3] = [(50.0, 2.09e-2), (100.0, 2.14e-2), (200.0, 2.10e-2)];
const CC_PROFILE_SAMPLES: usize = 8;

fn cc_scene(slenderness: f64, elements: usize, load: f64) -> NetworkScene {
    ClampedClamped {
        elements,
        slenderness,
        load,
        ..ClampedClamped::default()
    }
    .scene()
}

fn cc_deflection(slenderness: f64, elements: usize, load: f64) -> Result<(f64, Solved)> {
    let s = solve(cc_scene(slenderness, elements, load))?;
    Ok((s.state.poses[elements / 2].position.z, s))
}

/// Root of an increasing function by bracketing from `x0` in steps of `dx`
/// followed by Illinois regula falsi.
pub fn bracketed_root(mut f: impl FnMut(f64) -> Result<f64>, x0: f64, dx: f64, tol: f64) -> Result<f64> {
    let (mut a, mut fa) = (x0, f(x0)?);
    if fa == 0.0 {
        return Ok(a);
    }
    let dir = if fa < 0.0 { 1.0 } else { -1.0 };
    let (mut b, mut fb) = (a, fa);
    for _ in 0..60 {
        b += dir * dx;
        fb = f(b)?;
        if fb.signum() != fa.signum() {
            break;
        }
        a = b;
        fa = fb;
    }
    if fb.signum() == fa.signum() {
        bail!("no sign change found from {x0}");
    }
    let mut side = 0;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c)?;
        if fc.abs() <= tol || (b - a).abs() <= tol * (1.0 + c.abs()) {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa /= 2.0;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb /= 2.0;
            }
            side = 1;
        }
    }
    bail!("root search did not converge")
}

/// Largest jump of a sign-alternating pair of neighbouring differences,
/// i.e. the amplitude of any zig-zag in the profile.
pub fn zigzag(values: &[f64]) -> f64 {
    let d: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    d.windows(2)
        .filter(|w| w[0] * w[1] < 0.0)
        .map(|w| w[0].abs().min(w[1].abs()))
        .fold(0.0, f64::max)
}

struct CcCase {
    slenderness: f64,
    load: f64,
    reference: f64,
    deltas: Vec<f64>,
    zigzag: Vec<f64>,
    scenes: Vec<SceneRecord>,
}

/// Clamped-clamped beam: the load is calibrated so that the 200-element
/// reference deflection matches the published one, then the coarse meshes
/// are compared with it.
fn clamped_clamped() -> Result<BenchOutput> {
    let cases: Vec<Result<CcCase>> = CC_TARGETS
        .par_iter()
        .map(|&(slenderness, target)| {
            let guess = CC_DEFAULT_LOADS.iter().find(|c| c.0 == slenderness).unwrap().1;
            let ln_p = bracketed_root(
                |x| Ok((cc_deflection(slenderness, CC_REFERENCE, x.exp())?.0 / target).ln()),
                guess.ln(),
                0.05,
                1e-9,
            )?;
            let load = ln_p.exp();
            let (reference, ref_solve) = cc_deflection(slenderness, CC_REFERENCE, load)?;
            let mut scenes = vec![SceneRecord::new(
                format!("L/r={slenderness} reference"),
                ref_solve.network.scene(),
                &ref_solve.network.scene().solver,
            )];
            let mut deltas = Vec::new();
            let mut zz = Vec::new();
            for n in CC_MESHES {
                let (d, s) = cc_deflection(slenderness, n, load)?;
                let fz: Vec<f64> = internal_forces(&s.network, &s.state, CC_PROFILE_SAMPLES)?
                    .iter()
                    .map(|f| f.z)
                    .collect();
                deltas.push(d);
                zz.push(zigzag(&fz));
                scenes.push(SceneRecord::new(
                    format!("L/r={slenderness} N={n}"),
                    s.network.scene(),
                    &s.network.scene().solver,
                ));
            }
            Ok(CcCase {
                slenderness,
                load,
                reference,
                deltas,
                zigzag: zz,
                scenes,
            })
        })
        .collect();
    let cases = cases.into_iter().collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for c in &cases {
        for (k, n) in CC_MESHES.iter().enumerate() {
            let rel = (c.deltas[k] - c.reference).abs() / c.reference.abs();
            rows.push(format!(
                "{},{n},{:e},{:e},{:e},{rel:e},{:e}",
                c.slenderness, c.load, c.deltas[k], c.reference, c.zigzag[k]
            ));
            if c.slenderness == 200.0 {
                match n {
                    8 => checks.push(Check::within("L/r=200 N=8 error [%] is O(10)", 100.0 * rel, 3.0, 30.0)),
                    16 => checks.push(Check::at_most("L/r=200 N=16 error [%]", 100.0 * rel, 0.3)),
                    32 => {
                        checks.push(Check::at_most("L/r=200 N=32 error [%]", 100.0 * rel, 0.05));
                        checks.push(Check::at_most(
                            "L/r=200 N=32 delta vs 2.10e-2 m [%]",
                            100.0 * (c.deltas[k] - 2.10e-2).abs() / 2.10e-2,
                            2.0,
                        ));
                    }
                    _ => {}
                }
            }
            // the profile criterion refers to the 32-element meshes; coarser
            // ones are tabulated only
            if *n == 32 {
                checks.push(Check::at_most(format!("L/r={} N={n} f_z zig-zag [N]", c.slenderness), c.zigzag[k], 0.01));
            }
        }
    }
    // strain and force profiles of the stockiest beam on 32 elements
    let stocky = &cases[0];
    let s = solve(cc_scene(stocky.slenderness, 32, stocky.load))?;
    let chain = &s.network.chains()[0];
    let samples = sample_chain(&s.network, &s.state, chain, CC_PROFILE_SAMPLES)?;
    let half = 0.5 * stocky.load;
    let mut profile = Vec::new();
    let mut force_gap: f64 = 0.0;
    for x in &samples {
        let f = x.pose.rotation * linear(&x.internal_wrench);
        let k = angular(&x.strain);
        let e = linear(&x.strain);
        // the internal force carries half the load on each side
        let exact = if x.s < 0.5 * CC_LENGTH { half } else { -half };
        if (x.s - 0.5 * CC_LENGTH).abs() > 1e-12 {
            force_gap = force_gap.max((f.z - exact).abs());
        }
        profile.push(format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            x.s, k.x, k.y, k.z, e.x, e.y, e.z, f.z, exact
        ));
    }
    checks.push(Check::at_most("L/r=50 N=32 |f_z - analytic| [N]", force_gap, 0.01));
    Ok(BenchOutput {
        name: "clamped-clamped".into(),
        provenance: "self-generated 200-element reference with the load calibrated to the published deflection; \
                     published errors at L/r=200: 9.78 %, 0.13 %, 0.025 %"
            .into(),
        checks,
        tables: vec![
            (
                "clamped_clamped.csv".into(),
                csv(
                    "slenderness,elements,load,delta,reference_delta,relative_error,fz_zigzag",
                    rows,
                ),
            ),
            (
                "clamped_clamped_profile.csv".into(),
                csv(
                    "s,kappa_x,kappa_y,kappa_z,eps_x,eps_y,eps_z,f_z,f_z_analytic",
                    profile,
                ),
            ),
        ],
        details: json!({
            "length": CC_LENGTH,
            "young": ClampedClamped::default().young,
            "nu": ClampedClamped::default().nu,
            "reference_elements": CC_REFERENCE,
            "calibrated_loads": cases.iter().map(|c| json!({"slenderness": c.slenderness, "load": c.load, "reference_delta": c.reference})).collect::<Vec<_>>(),
        }),
        scenes: cases.into_iter().flat_map(|c| c.scenes).collect(),
        wall_time_s: 0.0,
    })
}

/// Solves one application scene under its default motion or load.
fn application(name: &str, scene: NetworkScene, counts: (usize, usize)) -> Result<BenchOutput> {
    let start = Instant::now();
    let record = SceneRecord::new(name, &scene, &scene.solver);
    let (nodes, elements) = (scene.nodes.len(), scene.elements.len());
    let s = solve(scene)?;
    let elapsed = start.elapsed().as_secs_f64();
    let displacement = s
        .state
        .poses
        .iter()
        .zip(&s.network.scene().nodes)
        .map(|(g, g0)| (g.position - g0.position).norm())
        .fold(0.0, f64::max);
    let checks = vec![
        Check::holds(
            "node and element counts",
            (nodes, elements) == counts,
            format!("{} / {}", counts.0, counts.1),
        ),
        Check::holds("converged", s.report.converged, "true"),
        Check::below("final residual", s.report.final_residual, 1e-6),
    ];
    let nodes_csv = csv(
        "node,x,y,z,ux,uy,uz",
        s.state.poses.iter().zip(&s.network.scene().nodes).enumerate().map(|(i, (g, g0))| {
            let u = g.position - g0.position;
            format!("{i},{:e},{:e},{:e},{:e},{:e},{:e}", g.position.x, g.position.y, g.position.z, u.x, u.y, u.z)
        }),
    );
    Ok(BenchOutput {
        name: name.into(),
        provenance: "convergence-only check; the published application figures are qualitative".into(),
        checks,
        tables: vec![
            (format!("{}_residuals.csv", name), residuals_csv(&s.report)),
            (format!("{}_nodes.csv", name), nodes_csv),
        ],
        details: json!({
            "nodes": nodes,
            "elements": elements,
            "iterations": s.report.iterations,
            "max_displacement": displacement,
            "final_energy": s.report.final_energy,
            "solve_time_s": elapsed,
        }),
        scenes: vec![record],
        wall_time_s: 0.0,
    })
}

/// Pre-twist torques of the chiral benchmark [N m].
pub const CHIRAL_TORQUES: [f64; 4] = [0.1, 0.5, 1.0, 2.0];
/// Compression increment and final strain.
pub const CHIRAL_STEP: f64 = 0.001;
pub const CHIRAL_MAX_STRAIN: f64 = 0.08;
/// Softening that marks the end of the stiff rise: the tangent stiffness has
/// lost this fraction of its initial value.
pub const CHIRAL_ONSET_DROP: f64 = 0.1;
/// The curve ends on a plateau when its last tangent stiffness is below this
/// fraction of the initial one.
pub const CHIRAL_PLATEAU: f64 = 0.2;

/// The chiral rig with its top plate driven as one rigid body.
pub struct ChiralRig {
    pub geometry: Chiral,
    network: Network,
    config: SolverConfig,
}

impl ChiralRig {
    pub fn new(geometry: Chiral) -> Result<Self> {
        let scene = geometry.scene();
        Ok(Self {
            config: ClampedClamped::solver(),
            network: Network::new(scene)?,
            geometry,
        })
    }

    pub fn rest_state(&self) -> GlobalState {
        self.network.rest_state()
    }

    /// Plate rotated by `angle` about the vertical axis and lowered by `drop`.
    fn plate(angle: f64, drop: f64) -> Pose {
        Pose::from_translation(Vector3::new(0.0, 0.0, -drop)) * rotation_about(Vector3::zeros(), Vector3::z(), angle)
    }

    /// Equilibrium with the top plate at `(angle, drop)`, started from `from`.
    pub fn drive(&mut self, angle: f64, drop: f64, from: &GlobalState) -> Result<GlobalState> {
        let plate = Self::plate(angle, drop);
        let rods = self.geometry.rods;
        for (k, n) in self.geometry.top_nodes().into_iter().enumerate() {
            let target = plate * self.network.scene().nodes[n];
            self.network.set_constraint_target(rods + k, target)?;
        }
        let moved = self.network.prescribe_step(from, 1.0);
        newton_solve(&self.network, moved, &[], &self.config)
            .map(|(s, _)| s)
            .map_err(|f| anyhow!("plate at angle {angle}, drop {drop}: {}", f.error))
    }

    /// Moves the plate in up to 32 substeps, halving on failure.
    pub fn drive_gently(&mut self, from: (f64, f64), to: (f64, f64), state: &GlobalState) -> Result<GlobalState> {
        match self.drive(to.0, to.1, state) {
            Ok(s) => Ok(s),
            Err(e) => {
                if (to.0 - from.0).abs() + (to.1 - from.1).abs() < 1e-7 {
                    return Err(e);
                }
                let mid = (0.5 * (from.0 + to.0), 0.5 * (from.1 + to.1));
                let s = self.drive_gently(from, mid, state)?;
                self.drive_gently(mid, to, &s)
            }
        }
    }

    /// Torque about the plate axis applied by the top supports and the
    /// vertical force applied by the base, in the spatial frame.
    pub fn measure(&self, state: &GlobalState) -> Result<(f64, f64)> {
        let reactions = self.network.reactions(state, &[])?;
        let rods = self.geometry.rods;
        let (mut torque, mut force) = (0.0, 0.0);
        for (ci, c) in self.network.scene().constraints.iter().enumerate() {
            let g = &state.poses[c.node];
            let (m, f) = spatial_wrench(g, &reactions[ci]);
            if ci >= rods {
                torque += m.z + g.position.x * f.y - g.position.y * f.x;
            } else {
                force += f.z;
            }
        }
        Ok((torque, force))
    }
}

/// One strain-force curve of the chiral benchmark.
#[derive(Debug, Clone, Serialize)]
pub struct ChiralCurve {
    pub torque: f64,
    pub plate_angle: f64,
    pub pretwist_drop: f64,
    pub strain: Vec<f64>,
    pub force: Vec<f64>,
}

impl ChiralCurve {
    /// Tangent stiffness of every increment, at the increment midpoints.
    pub fn slopes(&self) -> Vec<(f64, f64)> {
        self.strain
            .windows(2)
            .zip(self.force.windows(2))
            .map(|(e, f)| (0.5 * (e[0] + e[1]), (f[1] - f[0]) / (e[1] - e[0])))
            .collect()
    }

    /// Strain where the tangent stiffness first falls below `fraction` of
    /// its initial value, interpolated between increments.
    pub fn softening_strain(&self, fraction: f64) -> Option<f64> {
        let k = self.slopes();
        let threshold = fraction * k.first()?.1;
        k.windows(2).find(|w| w[1].1 < threshold).map(|w| {
            let t = (w[0].1 - threshold) / (w[0].1 - w[1].1);
            w[0].0 + t * (w[1].0 - w[0].0)
        })
    }

    pub fn initial_stiffness(&self) -> f64 {
        self.slopes().first().map_or(f64::NAN, |k| k.1)
    }

    pub fn final_stiffness(&self) -> f64 {
        self.slopes().last().map_or(f64::NAN, |k| k.1)
    }
}

/// Pre-twists the rig by `torque` with no axial force, then compresses it
/// with the plate angle held.
pub fn chiral_curve(geometry: &Chiral, torque: f64) -> Result<ChiralCurve> {
    let mut rig = ChiralRig::new(geometry.clone())?;
    let mut state = rig.rest_state();
    let mut at = (0.0, 0.0);
    let height = geometry.length;
    // inner: plate angle giving the torque at a given drop; outer: drop
    // giving zero axial force
    let twist_at = |rig: &mut ChiralRig, state: &mut GlobalState, at: &mut (f64, f64), drop: f64| -> Result<f64> {
        let start = at.0;
        let angle = bracketed_root(
            |a| {
                let s = rig.drive_gently(*at, (a, drop), state)?;
                *state = s;
                *at = (a, drop);
                Ok(rig.measure(state)?.0 - torque)
            },
            start,
            0.05,
            1e-10,
        )?;
        let s = rig.drive_gently(*at, (angle, drop), state)?;
        *state = s;
        *at = (angle, drop);
        Ok(rig.measure(state)?.1)
    };
    // the base reaction grows as the plate drops
    let drop = bracketed_root(
        |d| twist_at(&mut rig, &mut state, &mut at, d),
        0.0,
        0.002 * height,
        1e-9,
    )?;
    twist_at(&mut rig, &mut state, &mut at, drop)?;
    let angle = at.0;
    let (_, f0) = rig.measure(&state)?;
    let mut curve = ChiralCurve {
        torque,
        plate_angle: angle,
        pretwist_drop: drop,
        strain: vec![0.0],
        force: vec![f0],
    };
    let steps = (CHIRAL_MAX_STRAIN / CHIRAL_STEP).round() as usize;
    for k in 1..=steps {
        let strain = k as f64 * CHIRAL_STEP;
        let next = (angle, drop + strain * height);
        state = rig.drive_gently(at, next, &state)?;
        at = next;
        curve.strain.push(strain);
        curve.force.push(rig.measure(&state)?.1);
    }
    Ok(curve)
}

/// Strain-force curves of the chiral rig for every pre-twist torque.
fn chiral() -> Result<BenchOutput> {
    let geometry = Chiral::default();
    let curves: Vec<Result<ChiralCurve>> = CHIRAL_TORQUES.par_iter().map(|t| chiral_curve(&geometry, *t)).collect();
    let curves = curves.into_iter().collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let onsets: Vec<Option<f64>> = curves.iter().map(|c| c.softening_strain(1.0 - CHIRAL_ONSET_DROP)).collect();
    for (c, onset) in curves.iter().zip(&onsets) {
        let ratio = c.final_stiffness() / c.initial_stiffness();
        checks.push(Check::below(format!("T={} final/initial stiffness", c.torque), ratio, CHIRAL_PLATEAU));
        checks.push(Check::holds(
            format!("T={} stiff rise ends before the last step", c.torque),
            onset.is_some(),
            "softening found",
        ));
    }
    for i in 1..curves.len() {
        let (a, b) = (onsets[i - 1], onsets[i]);
        checks.push(Check::holds(
            format!("onset T={} not after T={}", curves[i].torque, curves[i - 1].torque),
            matches!((a, b), (Some(a), Some(b)) if b <= a),
            format!("{:?} <= {:?}", b, a),
        ));
    }
    let mut rows = Vec::new();
    for c in &curves {
        for (e, f) in c.strain.iter().zip(&c.force) {
            rows.push(format!("{},{e:e},{:e}", c.torque, f.abs()));
        }
    }
    let summary = csv(
        "torque,plate_angle,pretwist_drop,initial_stiffness,final_stiffness,onset_strain,half_stiffness_strain,final_force",
        curves.iter().zip(&onsets).map(|(c, o)| {
            let half = c.softening_strain(0.5);
            format!(
                "{},{:e},{:e},{:e},{:e},{},{},{:e}",
                c.torque,
                c.plate_angle,
                c.pretwist_drop,
                c.initial_stiffness(),
                c.final_stiffness(),
                o.map_or("nan".into(), |x| format!("{x:e}")),
                half.map_or("nan".into(), |x| format!("{x:e}")),
                c.force.last().unwrap()
            )
        }),
    );
    let scene = geometry.scene();
    Ok(BenchOutput {
        name: "chiral".into(),
        provenance: "qualitative published trend: a rapid rise then a plateau, earlier for larger pre-twist".into(),
        checks,
        tables: vec![
            ("chiral.csv".into(), csv("torque,strain,force", rows)),
            ("chiral_summary.csv".into(), summary),
        ],
        details: json!({
            "geometry": {
                "rods": geometry.rods,
                "elements_per_rod": geometry.elements,
                "length": geometry.length,
                "radius": geometry.radius,
                "young": geometry.young,
                "nu": geometry.nu,
                "plate_radius": geometry.plate_radius,
            },
            "protocol": "torque applied about the plate axis with zero axial force, then the plate angle is held and \
                         the plate lowered in strain increments; force is the base reaction, strain the plate \
                         travel over the rod length",
            "strain_step": CHIRAL_STEP,
            "onset_definition": format!("tangent stiffness below {} of its initial value", 1.0 - CHIRAL_ONSET_DROP),
        }),
        scenes: vec![SceneRecord::new("rig at rest", &scene, &ClampedClamped::solver())],
        wall_time_s: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dof_counts_match_across_element_types() {
        let lse: Vec<usize> = [2, 4, 6, 8].iter().map(|n| dof_count(ElementMode::Linear, *n)).collect();
        let cse: Vec<usize> = [4, 8, 12, 16].iter().map(|n| dof_count(ElementMode::Constant, *n)).collect();
        assert_eq!(lse, vec![30, 54, 78, 102]);
        assert_eq!(lse, cse);
    }

    #[test]
    fn root_finder_handles_both_sides() {
        for x0 in [-3.0, 0.0, 5.0] {
            let r = bracketed_root(|x| Ok(x * x * x - 2.0), x0, 0.3, 1e-13).unwrap();
            assert!((r - 2f64.cbrt()).abs() < 1e-10, "{r}");
        }
        assert!(bracketed_root(|_| Ok(1.0), 0.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn zigzag_ignores_monotone_and_single_steps() {
        assert_eq!(zigzag(&[0.0, 1.0, 2.0, 3.0]), 0.0);
        assert_eq!(zigzag(&[0.0, 1.0, 1.0, 0.0]), 0.0);
        assert_eq!(zigzag(&[0.0, 0.5, 0.3, 0.6]), 0.2);
    }

    #[test]
    fn softening_strain_interpolates() {
        let strain: Vec<f64> = (0..5).map(|k| k as f64).collect();
        let force = vec![0.0, 10.0, 20.0, 25.0, 26.0];
        let c = ChiralCurve {
            torque: 0.0,
            plate_angle: 0.0,
            pretwist_drop: 0.0,
            strain,
            force,
        };
        // slopes 10, 10, 5, 1 at 0.5, 1.5, 2.5, 3.5
        assert_eq!(c.softening_strain(0.75), Some(2.0));
        assert_eq!(c.softening_strain(0.05), None);
        assert_eq!(c.initial_stiffness(), 10.0);
        assert_eq!(c.final_stiffness(), 1.0);
    }

    #[test]
    fn check_table_marks_failures() {
        let out = BenchOutput {
            name: "x".into(),
            provenance: String::new(),
            checks: vec![Check::below("a", 1.0, 2.0), Check::at_most("b", 3.0, 2.0)],
            tables: Vec::new(),
            details: Value::Null,
            scenes: Vec::new(),
            wall_time_s: 0.0,
        };
        assert!(!out.passed());
        let s = out.summary();
        assert!(s.contains("pass") && s.contains("FAIL"), "{s}");
    }

    #[test]
    fn unknown_benchmark_is_an_error() {
        assert!(run("nope").is_err());
    }
}
