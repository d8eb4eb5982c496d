//! JSON scene files.
//!
//! ```json
//! {
//!   "nodes": [{"position": [0, 0, 0]}, {"position": [1, 0, 0], "quaternion": [1, 0, 0, 0]}],
//!   "elements": [{"nodes": [0, 1], "material": 0, "mode": "linear"}],
//!   "materials": [{"E_Pa": 1e7, "nu": 0.3, "radius_m": 0.01}],
//!   "constraints": [{"node": 0, "kind": "clamped"}],
//!   "loads": [{"node": 1, "wrench": [0, 0, 0, 0, 0, 1], "frame": "dead", "ramp": {"linear": 10}}],
//!   "solver": {"residual_tol": 1e-9}
//! }
//! ```
//!
//! Node orientation is either a unit quaternion `[w, x, y, z]` or a row-major
//! `rotation` matrix (identity when both are absent). A material is one of
//! `{E_Pa, nu, radius_m}` (solid circle), `{E_Pa, G_Pa, A_m2, Jx_m4, Jy_m4,
//! Jz_m4}` or the stiffness diagonal `{GJx, EJy, EJz, EA, GA1, GA2}`. Unknown
//! keys are rejected everywhere.

use std::path::Path;

use cosserat_core::element::{ElementMode, SectionStiffness};
use cosserat_core::network::{Constraint, ConstraintKind, ElementSpec, Load, LoadFrame, NetworkScene, Ramp};
use cosserat_core::solver::{LineSearch, SolverConfig, Tangent};
use cosserat_core::{Pose, Twist};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scene: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub nodes: Vec<NodeEntry>,
    pub elements: Vec<ElementEntry>,
    pub materials: Vec<MaterialEntry>,
    #[serde(default)]
    pub constraints: Vec<ConstraintEntry>,
    #[serde(default)]
    pub loads: Vec<LoadEntry>,
    #[serde(default)]
    pub solver: SolverSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub position: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quaternion: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[f64; 9]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModeEntry {
    #[default]
    Linear,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementEntry {
    pub nodes: [usize; 2],
    pub material: usize,
    #[serde(default)]
    pub mode: ModeEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rest_strain: Option<[f64; 6]>,
}

/// Every field is optional so that the three accepted shapes can be told
/// apart with a precise message.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialEntry {
    #[serde(rename = "E_Pa", default, skip_serializing_if = "Option::is_none")]
    pub e_pa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_m: Option<f64>,
    #[serde(rename = "G_Pa", default, skip_serializing_if = "Option::is_none")]
    pub g_pa: Option<f64>,
    #[serde(rename = "A_m2", default, skip_serializing_if = "Option::is_none")]
    pub area_m2: Option<f64>,
    #[serde(rename = "Jx_m4", default, skip_serializing_if = "Option::is_none")]
    pub jx_m4: Option<f64>,
    #[serde(rename = "Jy_m4", default, skip_serializing_if = "Option::is_none")]
    pub jy_m4: Option<f64>,
    #[serde(rename = "Jz_m4", default, skip_serializing_if = "Option::is_none")]
    pub jz_m4: Option<f64>,
    #[serde(rename = "GJx", default, skip_serializing_if = "Option::is_none")]
    pub gjx: Option<f64>,
    #[serde(rename = "EJy", default, skip_serializing_if = "Option::is_none")]
    pub ejy: Option<f64>,
    #[serde(rename = "EJz", default, skip_serializing_if = "Option::is_none")]
    pub ejz: Option<f64>,
    #[serde(rename = "EA", default, skip_serializing_if = "Option::is_none")]
    pub ea: Option<f64>,
    #[serde(rename = "GA1", default, skip_serializing_if = "Option::is_none")]
    pub ga1: Option<f64>,
    #[serde(rename = "GA2", default, skip_serializing_if = "Option::is_none")]
    pub ga2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKindEntry {
    Clamped,
    Prescribed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintEntry {
    pub node: usize,
    pub kind: ConstraintKindEntry,
    /// Defaults to the initial node pose.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<NodeEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FrameEntry {
    #[default]
    Dead,
    Follower,
}

/// `"single"`, `{"linear": n}` or `{"sine": n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RampEntry {
    #[default]
    Single,
    Linear(usize),
    Sine(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadEntry {
    pub node: usize,
    /// `[moment; force]`, N·m and N.
    pub wrench: [f64; 6],
    #[serde(default)]
    pub frame: FrameEntry,
    #[serde(default)]
    pub ramp: RampEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum LineSearchEntry {
    None,
    Safeguarded { max_halvings: usize },
    Backtracking { c: f64, max_halvings: usize },
    Natural { max_halvings: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TangentEntry {
    GaussNewton,
    Consistent,
}

/// Solver settings; omitted fields take the library defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_search: Option<LineSearchEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularization: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp: Option<RampEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dexp_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub increment_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tangent: Option<TangentEntry>,
}

impl NodeEntry {
    pub fn from_pose(pose: &Pose) -> Self {
        let r = &pose.rotation;
        let identity = *r == Matrix3::identity();
        Self {
            position: [pose.position.x, pose.position.y, pose.position.z],
            quaternion: None,
            rotation: (!identity).then(|| {
                [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]]
            }),
        }
    }

    pub fn to_pose(&self) -> Result<Pose, String> {
        let p = Vector3::from(self.position);
        match (self.quaternion, self.rotation) {
            (Some(_), Some(_)) => Err("give either quaternion or rotation, not both".into()),
            (Some(q), None) => Pose::from_quaternion(q, p).map_err(|e| e.to_string()),
            (None, Some(r)) => Pose::new(Matrix3::from_row_slice(&r), p).map_err(|e| e.to_string()),
            (None, None) => Pose::new(Matrix3::identity(), p).map_err(|e| e.to_string()),
        }
    }
}

impl MaterialEntry {
    pub fn direct(k: &SectionStiffness) -> Self {
        let [gjx, ejy, ejz, ea, ga1, ga2] = k.diagonal();
        Self {
            gjx: Some(gjx),
            ejy: Some(ejy),
            ejz: Some(ejz),
            ea: Some(ea),
            ga1: Some(ga1),
            ga2: Some(ga2),
            ..Self::default()
        }
    }

    pub fn circular(e: f64, nu: f64, radius: f64) -> Self {
        Self {
            e_pa: Some(e),
            nu: Some(nu),
            radius_m: Some(radius),
            ..Self::default()
        }
    }

    pub fn to_stiffness(&self) -> Result<SectionStiffness, String> {
        let circular = [self.e_pa, self.nu, self.radius_m];
        let section = [self.e_pa, self.g_pa, self.area_m2, self.jx_m4, self.jy_m4, self.jz_m4];
        let direct = [self.gjx, self.ejy, self.ejz, self.ea, self.ga1, self.ga2];
        let set = |v: &[Option<f64>]| v.iter().filter(|x| x.is_some()).count();
        let total = set(&circular) + set(&section[1..]) + set(&direct);
        let all = |v: &[Option<f64>]| -> Vec<f64> { v.iter().map(|x| x.unwrap()).collect() };
        if set(&circular) == 3 && total == 3 {
            let v = all(&circular);
            SectionStiffness::circular(v[0], v[1], v[2]).map_err(|e| e.to_string())
        } else if set(&section) == 6 && total == 6 && self.nu.is_none() {
            let v = all(&section);
            SectionStiffness::from_section(v[0], v[1], v[2], v[3], v[4], v[5]).map_err(|e| e.to_string())
        } else if set(&direct) == 6 && total == 6 && self.e_pa.is_none() {
            let v = all(&direct);
            SectionStiffness::new([v[0], v[1], v[2], v[3], v[4], v[5]]).map_err(|e| e.to_string())
        } else {
            Err("expected exactly one of {E_Pa, nu, radius_m}, {E_Pa, G_Pa, A_m2, Jx_m4, Jy_m4, Jz_m4} \
                 or {GJx, EJy, EJz, EA, GA1, GA2}"
                .into())
        }
    }
}

impl From<RampEntry> for Ramp {
    fn from(r: RampEntry) -> Self {
        match r {
            RampEntry::Single => Ramp::Single,
            RampEntry::Linear(n) => Ramp::Linear(n),
            RampEntry::Sine(n) => Ramp::Sine(n),
        }
    }
}

impl From<Ramp> for RampEntry {
    fn from(r: Ramp) -> Self {
        match r {
            Ramp::Single => RampEntry::Single,
            Ramp::Linear(n) => RampEntry::Linear(n),
            Ramp::Sine(n) => RampEntry::Sine(n),
        }
    }
}

impl SolverSection {
    /// Every field filled in.
    pub fn from_config(c: &SolverConfig) -> Self {
        Self {
            residual_tol: Some(c.residual_tol),
            max_iters: Some(c.max_iters),
            line_search: Some(match c.line_search {
                LineSearch::None => LineSearchEntry::None,
                LineSearch::Safeguarded { max_halvings } => LineSearchEntry::Safeguarded { max_halvings },
                LineSearch::Backtracking { c, max_halvings } => LineSearchEntry::Backtracking { c, max_halvings },
                LineSearch::Natural { max_halvings } => LineSearchEntry::Natural { max_halvings },
            }),
            regularization: Some(c.regularization),
            ramp: c.ramp_override.map(RampEntry::from),
            dexp_order: Some(c.dexp_order),
            increment_tol: Some(c.increment_tol),
            tangent: Some(match c.tangent {
                Tangent::GaussNewton => TangentEntry::GaussNewton,
                Tangent::Consistent => TangentEntry::Consistent,
            }),
        }
    }

    pub fn to_config(&self) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            residual_tol: self.residual_tol.unwrap_or(d.residual_tol),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            line_search: match self.line_search {
                None => d.line_search,
                Some(LineSearchEntry::None) => LineSearch::None,
                Some(LineSearchEntry::Safeguarded { max_halvings }) => LineSearch::Safeguarded { max_halvings },
                Some(LineSearchEntry::Backtracking { c, max_halvings }) => LineSearch::Backtracking { c, max_halvings },
                Some(LineSearchEntry::Natural { max_halvings }) => LineSearch::Natural { max_halvings },
            },
            regularization: self.regularization.unwrap_or(d.regularization),
            ramp_override: self.ramp.map(Ramp::from),
            dexp_order: self.dexp_order.unwrap_or(d.dexp_order),
            increment_tol: self.increment_tol.unwrap_or(d.increment_tol),
            tangent: match self.tangent {
                None => d.tangent,
                Some(TangentEntry::GaussNewton) => Tangent::GaussNewton,
                Some(TangentEntry::Consistent) => Tangent::Consistent,
            },
        }
    }
}

impl SceneFile {
    /// File form of a scene: rotations as matrices, materials as stiffness
    /// diagonals and a complete solver section, so that reading it back gives
    /// the same scene bit for bit.
    pub fn from_scene(scene: &NetworkScene) -> Self {
        Self {
            nodes: scene.nodes.iter().map(NodeEntry::from_pose).collect(),
            elements: scene
                .elements
                .iter()
                .map(|e| ElementEntry {
                    nodes: e.nodes,
                    material: e.material,
                    mode: match e.mode {
                        ElementMode::Linear => ModeEntry::Linear,
                        ElementMode::Constant => ModeEntry::Constant,
                    },
                    rest_strain: e.rest_strain.map(|x| [x[0], x[1], x[2], x[3], x[4], x[5]]),
                })
                .collect(),
            materials: scene.materials.iter().map(MaterialEntry::direct).collect(),
            constraints: scene
                .constraints
                .iter()
                .map(|c| ConstraintEntry {
                    node: c.node,
                    kind: match c.kind {
                        ConstraintKind::Clamped => ConstraintKindEntry::Clamped,
                        ConstraintKind::Prescribed => ConstraintKindEntry::Prescribed,
                    },
                    target: (c.target != scene.nodes[c.node]).then(|| NodeEntry::from_pose(&c.target)),
                })
                .collect(),
            loads: scene
                .loads
                .iter()
                .map(|l| LoadEntry {
                    node: l.node,
                    wrench: [l.wrench[0], l.wrench[1], l.wrench[2], l.wrench[3], l.wrench[4], l.wrench[5]],
                    frame: match l.frame {
                        LoadFrame::Dead => FrameEntry::Dead,
                        LoadFrame::Follower => FrameEntry::Follower,
                    },
                    ramp: l.ramp.into(),
                })
                .collect(),
            solver: SolverSection::from_config(&scene.solver),
        }
    }

    /// In-memory scene. Index and topology checks are left to
    /// `Network::new`; this only checks what the file format itself defines.
    pub fn to_scene(&self) -> Result<NetworkScene, SceneError> {
        let invalid = |what: String| SceneError::Invalid(what);
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| n.to_pose().map_err(|e| invalid(format!("node {i}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let materials = self
            .materials
            .iter()
            .enumerate()
            .map(|(i, m)| m.to_stiffness().map_err(|e| invalid(format!("material {i}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let constraints = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let initial = nodes
                    .get(c.node)
                    .ok_or_else(|| invalid(format!("constraint {i} references missing node {}", c.node)))?;
                let target = match &c.target {
                    Some(t) => t.to_pose().map_err(|e| invalid(format!("constraint {i} target: {e}")))?,
                    None => *initial,
                };
                Ok(Constraint {
                    node: c.node,
                    kind: match c.kind {
                        ConstraintKindEntry::Clamped => ConstraintKind::Clamped,
                        ConstraintKindEntry::Prescribed => ConstraintKind::Prescribed,
                    },
                    target,
                })
            })
            .collect::<Result<Vec<_>, SceneError>>()?;
        let solver = self.solver.to_config();
        solver.validate().map_err(|e| invalid(format!("solver: {e}")))?;
        Ok(NetworkScene {
            nodes,
            elements: self
                .elements
                .iter()
                .map(|e| ElementSpec {
                    nodes: e.nodes,
                    material: e.material,
                    mode: match e.mode {
                        ModeEntry::Linear => ElementMode::Linear,
                        ModeEntry::Constant => ElementMode::Constant,
                    },
                    rest_strain: e.rest_strain.map(|x| Twist::from_row_slice(&x)),
                })
                .collect(),
            materials,
            constraints,
            loads: self
                .loads
                .iter()
                .map(|l| Load {
                    node: l.node,
                    wrench: Twist::from_row_slice(&l.wrench),
                    frame: match l.frame {
                        FrameEntry::Dead => LoadFrame::Dead,
                        FrameEntry::Follower => LoadFrame::Follower,
                    },
                    ramp: l.ramp.into(),
                })
                .collect(),
            solver,
        })
    }
}

pub fn parse_scene(text: &str) -> Result<NetworkScene, SceneError> {
    serde_json::from_str::<SceneFile>(text)?.to_scene()
}

pub fn read_scene(path: &Path) -> Result<NetworkScene, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scene(&text)
}

pub fn scene_to_json(scene: &NetworkScene) -> String {
    serde_json::to_string_pretty(&SceneFile::from_scene(scene)).expect("scene serialises")
}

pub fn write_scene(path: &Path, scene: &NetworkScene) -> std::io::Result<()> {
    std::fs::write(path, scene_to_json(scene) + "\n")
}

/// SHA-256 of the compact canonical JSON of the scene, in hex.
pub fn scene_hash(scene: &NetworkScene) -> String {
    let canonical = serde_json::to_string(&SceneFile::from_scene(scene)).expect("scene serialises");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "nodes": [{"position": [0, 0, 0]}, {"position": [1, 0, 0], "quaternion": [1, 0, 0, 0]}],
        "elements": [{"nodes": [0, 1], "material": 0}],
        "materials": [{"E_Pa": 1e7, "nu": 0.3, "radius_m": 0.01}],
        "constraints": [{"node": 0, "kind": "clamped"}],
        "loads": [{"node": 1, "wrench": [0, 0, 0, 0, 0, 1], "ramp": {"linear": 10}}]
    }"#;

    #[test]
    fn minimal_scene_parses_with_defaults() {
        let s = parse_scene(MINIMAL).unwrap();
        assert_eq!(s.nodes.len(), 2);
        assert_eq!(s.elements[0].mode, ElementMode::Linear);
        assert_eq!(s.loads[0].frame, LoadFrame::Dead);
        assert_eq!(s.loads[0].ramp, Ramp::Linear(10));
        assert_eq!(s.constraints[0].target, s.nodes[0]);
        assert_eq!(s.solver, SolverConfig::default());
        assert_eq!(s.materials[0], SectionStiffness::circular(1e7, 0.3, 0.01).unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("\"material\": 0", "\"material\": 0, \"colour\": 3");
        assert!(matches!(parse_scene(&bad), Err(SceneError::Parse(_))));
        let bad = MINIMAL.replace("\"radius_m\"", "\"radius\"");
        assert!(parse_scene(&bad).is_err());
    }

    #[test]
    fn material_forms() {
        let direct = MaterialEntry {
            gjx: Some(0.2),
            ejy: Some(0.2),
            ejz: Some(0.2),
            ea: Some(1000.0),
            ga1: Some(1000.0),
            ga2: Some(1000.0),
            ..MaterialEntry::default()
        };
        assert_eq!(direct.to_stiffness().unwrap().diagonal(), [0.2, 0.2, 0.2, 1000.0, 1000.0, 1000.0]);
        let section = MaterialEntry {
            e_pa: Some(2.0),
            g_pa: Some(1.0),
            area_m2: Some(3.0),
            jx_m4: Some(4.0),
            jy_m4: Some(5.0),
            jz_m4: Some(6.0),
            ..MaterialEntry::default()
        };
        assert_eq!(section.to_stiffness().unwrap().diagonal(), [4.0, 10.0, 12.0, 6.0, 3.0, 3.0]);
        let mixed = MaterialEntry {
            nu: Some(0.3),
            ..direct.clone()
        };
        assert!(mixed.to_stiffness().is_err());
        assert!(MaterialEntry::default().to_stiffness().is_err());
    }

    #[test]
    fn node_orientation_forms() {
        let both = NodeEntry {
            position: [0.0; 3],
            quaternion: Some([1.0, 0.0, 0.0, 0.0]),
            rotation: Some([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
        };
        assert!(both.to_pose().is_err());
        let skewed = NodeEntry {
            position: [0.0; 3],
            quaternion: None,
            rotation: Some([1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
        };
        assert!(skewed.to_pose().is_err());
        let quarter = NodeEntry {
            position: [1.0, 2.0, 3.0],
            quaternion: Some([0.5f64.sqrt(), 0.0, 0.0, 0.5f64.sqrt()]),
            rotation: None,
        };
        let g = quarter.to_pose().unwrap();
        assert!((g.rotation * Vector3::x() - Vector3::y()).norm() < 1e-15);
    }

    #[test]
    fn ramps_and_line_searches_serialise_as_documented() {
        assert_eq!(serde_json::to_string(&RampEntry::Single).unwrap(), "\"single\"");
        assert_eq!(serde_json::to_string(&RampEntry::Sine(10)).unwrap(), "{\"sine\":10}");
        let ls: LineSearchEntry = serde_json::from_str(r#"{"backtracking": {"c": 0.5, "max_halvings": 25}}"#).unwrap();
        assert_eq!(ls, LineSearchEntry::Backtracking { c: 0.5, max_halvings: 25 });
        let t: TangentEntry = serde_json::from_str("\"gauss_newton\"").unwrap();
        assert_eq!(t, TangentEntry::GaussNewton);
    }

    #[test]
    fn bad_solver_values_are_reported() {
        let bad = MINIMAL.replace("\"loads\"", "\"solver\": {\"residual_tol\": -1}, \"loads\"");
        let err = parse_scene(&bad).unwrap_err().to_string();
        assert!(err.contains("solver"), "{err}");
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let s = parse_scene(MINIMAL).unwrap();
        assert_eq!(scene_hash(&s), scene_hash(&s.clone()));
        assert_eq!(scene_hash(&s).len(), 64);
        let mut t = s.clone();
        t.loads[0].wrench[5] = 2.0;
        assert_ne!(scene_hash(&s), scene_hash(&t));
    }
}
