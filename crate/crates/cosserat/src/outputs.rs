//! Result files written by `solve` and `bench`.
//!
//! * `state.json`: node poses (position and row-major rotation), element
//!   slopes and recovered mean strains.
//! * `residuals.csv`: `step,iteration,residual_norm`.
//! * `centerline.csv`: samples along every rod chain, with pose, body strain
//!   and body internal wrench.
//! * `report.json`: solve report, scene hash, solver settings and provenance.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use cosserat_core::network::{GlobalState, Network};
use cosserat_core::solver::SolveReport;
use cosserat_core::validation::sample_chain;
use serde::Serialize;

use crate::scene_file::{scene_hash, NodeEntry, SolverSection};

/// Centerline samples per element in `centerline.csv`.
pub const SAMPLES_PER_ELEMENT: usize = 8;

#[derive(Debug, Serialize)]
pub struct StateFile {
    pub poses: Vec<NodeEntry>,
    pub slopes: Vec<[f64; 6]>,
    /// `null` where the element kinematics cannot be evaluated.
    pub mean_strains: Vec<Option<[f64; 6]>>,
}

fn six(v: &cosserat_core::Twist) -> [f64; 6] {
    [v[0], v[1], v[2], v[3], v[4], v[5]]
}

pub fn state_file(network: &Network, state: &GlobalState) -> StateFile {
    StateFile {
        poses: state
            .poses
            .iter()
            .map(|g| {
                let r = &g.rotation;
                NodeEntry {
                    position: [g.position.x, g.position.y, g.position.z],
                    quaternion: None,
                    rotation: Some([
                        r[(0, 0)],
                        r[(0, 1)],
                        r[(0, 2)],
                        r[(1, 0)],
                        r[(1, 1)],
                        r[(1, 2)],
                        r[(2, 0)],
                        r[(2, 1)],
                        r[(2, 2)],
                    ]),
                }
            })
            .collect(),
        slopes: state.slopes.iter().map(six).collect(),
        mean_strains: (0..network.elements().len())
            .map(|e| network.kinematics(state, e).ok().map(|k| six(&k.mean_strain)))
            .collect(),
    }
}

pub fn residuals_csv(report: &SolveReport) -> String {
    let mut out = String::from("step,iteration,residual_norm\n");
    for k in 0..report.step_starts.len() {
        for (i, r) in report.step_history(k).iter().enumerate() {
            writeln!(out, "{},{},{:e}", k + 1, i, r).unwrap();
        }
    }
    out
}

pub fn centerline_csv(network: &Network, state: &GlobalState) -> Result<String> {
    let mut out = String::from(
        "chain,s,x,y,z,qw,qx,qy,qz,kappa_x,kappa_y,kappa_z,eps_x,eps_y,eps_z,m_x,m_y,m_z,f_x,f_y,f_z\n",
    );
    for (c, chain) in network.chains().iter().enumerate() {
        let samples = sample_chain(network, state, chain, SAMPLES_PER_ELEMENT)
            .with_context(|| format!("sampling chain {c}"))?;
        for s in samples {
            let p = s.pose.position;
            let q = s.pose.quaternion();
            write!(out, "{c},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}", s.s, p.x, p.y, p.z, q[0], q[1], q[2], q[3]).unwrap();
            for v in s.strain.iter().chain(s.internal_wrench.iter()) {
                write!(out, ",{v:e}").unwrap();
            }
            out.push('\n');
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct ReportFile<'a> {
    pub converged: bool,
    pub iterations: &'a [usize],
    pub residual_history: &'a [f64],
    pub final_energy: f64,
    pub final_residual: f64,
    pub wall_time_s: f64,
    pub regularized: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub scene_sha256: String,
    pub config: SolverSection,
    pub provenance: &'a str,
}

/// Outcome of a solve as it is written to disk.
pub struct SolveOutcome<'a> {
    pub network: &'a Network,
    pub state: &'a GlobalState,
    pub report: &'a SolveReport,
    pub config: &'a cosserat_core::solver::SolverConfig,
    pub failure: Option<(usize, String)>,
    pub provenance: &'a str,
}

pub fn report_json(o: &SolveOutcome) -> String {
    let file = ReportFile {
        converged: o.report.converged && o.failure.is_none(),
        iterations: &o.report.iterations,
        residual_history: &o.report.residual_history,
        final_energy: o.report.final_energy,
        final_residual: o.report.final_residual,
        wall_time_s: o.report.wall_time_s,
        regularized: o.report.regularized,
        failed_step: o.failure.as_ref().map(|f| f.0),
        error: o.failure.as_ref().map(|f| f.1.clone()),
        scene_sha256: scene_hash(o.network.scene()),
        config: SolverSection::from_config(o.config),
        provenance: o.provenance,
    };
    serde_json::to_string_pretty(&file).expect("report serialises")
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes the four solve outputs into `dir`, creating it if needed.
pub fn write_solution(dir: &Path, o: &SolveOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let state = serde_json::to_string_pretty(&state_file(o.network, o.state))?;
    write_text(dir, "state.json", &(state + "\n"))?;
    write_text(dir, "residuals.csv", &residuals_csv(o.report))?;
    write_text(dir, "centerline.csv", &centerline_csv(o.network, o.state)?)?;
    write_text(dir, "report.json", &(report_json(o) + "\n"))?;
    Ok(())
}
