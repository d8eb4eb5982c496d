//! Rod networks: scene model, validation, degree-of-freedom numbering and
//! global assembly.

mod dofs;
mod topology;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DVector, Vector3};

pub use dofs::{unconstrained_dof_count, DofMap};
pub use topology::{chains, Chain};

use crate::element::{ElementKinematics, ElementMode, RodElement, SectionStiffness};
use crate::error::{Error, Result};
use crate::liegroup::{angular, exp_se3, linear, log_se3, retract, skew, Mat6, Pose, Twist};
use crate::math;
use crate::solver::{SolverConfig, Tangent};
use crate::sparse::{BlockPattern, BlockSymbolic, BlockSymmetric, Slot};

/// Rest curvature below this magnitude (1/m) counts as straight when checking
/// junction nodes.
const JUNCTION_CURVATURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ElementSpec {
    pub nodes: [usize; 2],
    pub material: usize,
    pub mode: ElementMode,
    /// Overrides the rest strain derived from the initial node poses.
    pub rest_strain: Option<Twist>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Clamped,
    /// Pose driven along the geodesic from its initial value to the target
    /// over the load steps.
    Prescribed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub node: usize,
    pub kind: ConstraintKind,
    pub target: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadFrame {
    /// Fixed spatial direction; the moment acts about the node.
    Dead,
    /// Rotates with the node frame.
    Follower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ramp {
    Single,
    Linear(usize),
    Sine(usize),
}

impl Ramp {
    pub fn steps(self) -> usize {
        match self {
            Ramp::Single => 1,
            Ramp::Linear(n) | Ramp::Sine(n) => n,
        }
    }

    /// Load factor after `k` of this ramp's steps.
    pub fn factor(self, k: usize) -> f64 {
        let t = (k as f64 / self.steps() as f64).min(1.0);
        match self {
            Ramp::Single => 1.0,
            Ramp::Linear(_) => t,
            Ramp::Sine(_) => math::sin(t * core::f64::consts::FRAC_PI_2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub node: usize,
    /// `[moment; force]` in N·m and N.
    pub wrench: Twist,
    pub frame: LoadFrame,
    pub ramp: Ramp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScene {
    pub nodes: Vec<Pose>,
    pub elements: Vec<ElementSpec>,
    pub materials: Vec<SectionStiffness>,
    pub constraints: Vec<Constraint>,
    pub loads: Vec<Load>,
    pub solver: SolverConfig,
}

/// Unknowns of the problem: one pose per node and one strain slope per
/// element (always zero for constant-strain elements).
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    pub poses: Vec<Pose>,
    pub slopes: Vec<Twist>,
}

/// Body-frame wrench applied by a load at the given factor.
pub fn external_wrench(load: &Load, node_pose: &Pose, factor: f64) -> Twist {
    match load.frame {
        LoadFrame::Follower => load.wrench * factor,
        LoadFrame::Dead => {
            let rt = node_pose.rotation.transpose();
            let m = rt * angular(&load.wrench);
            let f = rt * linear(&load.wrench);
            crate::liegroup::twist(m, f) * factor
        }
    }
}

/// `(moment about the node, force)` in the spatial frame for a body wrench.
pub fn spatial_wrench(pose: &Pose, body: &Twist) -> (Vector3<f64>, Vector3<f64>) {
    (pose.rotation * angular(body), pose.rotation * linear(body))
}

/// Result of one assembly.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub residual: DVector<f64>,
    pub tangent: BlockSymmetric,
    pub energy: f64,
}

/// A validated scene with its element data, numbering and sparse structure.
#[derive(Debug, Clone)]
pub struct Network {
    scene: NetworkScene,
    elements: Vec<RodElement>,
    dofs: DofMap,
    pattern: BlockPattern,
    symbolic: BlockSymbolic,
    slots: Vec<[[Option<Slot>; 3]; 3]>,
    constraint_of: Vec<Option<usize>>,
    /// `log(g0^-1 target)` of every prescribed constraint.
    prescribed_log: Vec<Option<Twist>>,
}

impl Network {
    pub fn new(scene: NetworkScene) -> Result<Self> {
        scene.solver.validate()?;
        let n_nodes = scene.nodes.len();
        if n_nodes == 0 {
            return Err(Error::Scene("the scene has no nodes".into()));
        }
        for (i, g) in scene.nodes.iter().enumerate() {
            g.check().map_err(|e| Error::Scene(format!("node {i}: {e}")))?;
        }
        let topo: Vec<[usize; 2]> = scene.elements.iter().map(|e| e.nodes).collect();
        for (i, e) in scene.elements.iter().enumerate() {
            let [a, b] = e.nodes;
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::Scene(format!("element {i} references a missing node")));
            }
            if a == b {
                return Err(Error::Scene(format!("element {i} connects node {a} to itself")));
            }
            if e.material >= scene.materials.len() {
                return Err(Error::Scene(format!(
                    "element {i} references missing material {}",
                    e.material
                )));
            }
        }
        let mut constraint_of = vec![None; n_nodes];
        for (ci, c) in scene.constraints.iter().enumerate() {
            if c.node >= n_nodes {
                return Err(Error::Scene(format!("constraint {ci} references a missing node")));
            }
            if constraint_of[c.node].replace(ci).is_some() {
                return Err(Error::Scene(format!("node {} has more than one constraint", c.node)));
            }
            c.target
                .check()
                .map_err(|e| Error::Scene(format!("constraint {ci} target: {e}")))?;
        }
        for (li, l) in scene.loads.iter().enumerate() {
            if l.node >= n_nodes {
                return Err(Error::Scene(format!("load {li} references a missing node")));
            }
            if !l.wrench.iter().all(|x| x.is_finite()) {
                return Err(Error::Scene(format!("load {li} has a non-finite wrench")));
            }
            if l.ramp.steps() == 0 {
                return Err(Error::Scene(format!("load {li} ramp needs at least one step")));
            }
        }
        let incidence = topology::incidence(n_nodes, &topo);
        for n in 0..n_nodes {
            if incidence[n].is_empty() && constraint_of[n].is_none() {
                return Err(Error::Scene(format!("node {n} is not used by any element or constraint")));
            }
        }
        let labels = topology::components(n_nodes, &topo);
        let anchored: alloc::collections::BTreeSet<usize> =
            scene.constraints.iter().map(|c| labels[c.node]).collect();
        for n in 0..n_nodes {
            if !incidence[n].is_empty() && !anchored.contains(&labels[n]) {
                return Err(Error::Scene(format!(
                    "the part containing node {n} has no constrained node and can move rigidly"
                )));
            }
        }

        let mut elements = Vec::with_capacity(scene.elements.len());
        for (i, spec) in scene.elements.iter().enumerate() {
            let [a, b] = spec.nodes;
            let omega0 = log_se3(&(scene.nodes[a].inverse() * scene.nodes[b])).map_err(|e| match e {
                Error::NearBranchCut { angle } => Error::RestGeometryTooCoarse { angle }.at_element(i),
                other => other.at_element(i),
            })?;
            let h = linear(&omega0).norm();
            if h < 1e-12 {
                return Err(Error::Scene(format!(
                    "element {i} has zero length: its rest poses share a position"
                )));
            }
            let rest = spec.rest_strain.unwrap_or(omega0 / h);
            if !rest.iter().all(|x| x.is_finite()) {
                return Err(Error::Scene(format!("element {i} rest strain is not finite")));
            }
            let axis = linear(&rest);
            if axis.norm() < 1e-12 {
                return Err(Error::Scene(format!("element {i} rest strain has no stretch")));
            }
            let stiffness = scene.materials[spec.material].aligned_to(&axis);
            let element = RodElement::new(h, rest, stiffness, spec.mode)
                .map_err(|e| e.at_element(i))?
                .with_dexp_order(scene.solver.dexp_order);
            elements.push(element);
        }
        for n in 0..n_nodes {
            if incidence[n].len() >= 3 {
                if let Some(&e) = incidence[n]
                    .iter()
                    .find(|&&e| angular(&elements[e].rest_strain).norm() > JUNCTION_CURVATURE_TOL)
                {
                    return Err(Error::Scene(format!(
                        "junction node {n} joins element {e}, which is curved at rest; \
                         rest curvature at junctions is not supported"
                    )));
                }
            }
        }

        let mut prescribed_log = vec![None; scene.constraints.len()];
        for (ci, c) in scene.constraints.iter().enumerate() {
            if c.kind == ConstraintKind::Prescribed {
                let v = log_se3(&(scene.nodes[c.node].inverse() * c.target))
                    .map_err(|_| Error::PrescribedBranchCut { node: c.node })?;
                prescribed_log[ci] = Some(v);
            }
        }

        let dofs = DofMap::build(&scene);
        let blocks_of = |e: usize| -> [Option<usize>; 3] {
            let [a, b] = scene.elements[e].nodes;
            [dofs.node_block(a), dofs.node_block(b), dofs.slope_block(e)]
        };
        let mut pairs = Vec::new();
        for e in 0..scene.elements.len() {
            let bl = blocks_of(e);
            for i in 0..3 {
                for j in (i + 1)..3 {
                    if let (Some(p), Some(q)) = (bl[i], bl[j]) {
                        pairs.push((p, q));
                    }
                }
            }
        }
        let pattern = BlockPattern::new(dofs.block_count(), pairs);
        let slots = (0..scene.elements.len())
            .map(|e| {
                let bl = blocks_of(e);
                let mut s = [[None; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        if let (Some(p), Some(q)) = (bl[i], bl[j]) {
                            s[i][j] = pattern.slot(p, q);
                        }
                    }
                }
                s
            })
            .collect();
        let symbolic = BlockSymbolic::analyze(&pattern);
        Ok(Self {
            scene,
            elements,
            dofs,
            pattern,
            symbolic,
            slots,
            constraint_of,
            prescribed_log,
        })
    }

    pub fn scene(&self) -> &NetworkScene {
        &self.scene
    }

    pub fn elements(&self) -> &[RodElement] {
        &self.elements
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn pattern(&self) -> &BlockPattern {
        &self.pattern
    }

    pub fn symbolic(&self) -> &BlockSymbolic {
        &self.symbolic
    }

    pub fn constraint_of(&self, node: usize) -> Option<&Constraint> {
        self.constraint_of[node].map(|c| &self.scene.constraints[c])
    }

    /// Replaces the target of constraint `index`. The sparse structure is
    /// unaffected.
    pub fn set_constraint_target(&mut self, index: usize, target: Pose) -> Result<()> {
        target.check()?;
        let c = &mut self.scene.constraints[index];
        if c.kind == ConstraintKind::Prescribed {
            let v = log_se3(&(self.scene.nodes[c.node].inverse() * target))
                .map_err(|_| Error::PrescribedBranchCut { node: c.node })?;
            self.prescribed_log[index] = Some(v);
        }
        c.target = target;
        Ok(())
    }

    /// Initial node poses with zero slopes, constraints at step fraction 0.
    pub fn rest_state(&self) -> GlobalState {
        let state = GlobalState {
            poses: self.scene.nodes.clone(),
            slopes: vec![Twist::zeros(); self.elements.len()],
        };
        self.prescribe_step(&state, 0.0)
    }

    /// Moves constrained nodes: clamped nodes to their target, prescribed
    /// nodes to `g0 exp(t log(g0^-1 target))`.
    pub fn prescribe_step(&self, state: &GlobalState, t: f64) -> GlobalState {
        let mut next = state.clone();
        for (ci, c) in self.scene.constraints.iter().enumerate() {
            next.poses[c.node] = match c.kind {
                ConstraintKind::Clamped => c.target,
                ConstraintKind::Prescribed if t >= 1.0 => c.target,
                ConstraintKind::Prescribed => {
                    let v = self.prescribed_log[ci].expect("prescribed constraint without path");
                    self.scene.nodes[c.node] * exp_se3(&(v * t))
                }
            };
        }
        next
    }

    /// Retraction update of free nodes and slopes.
    pub fn apply_update(&self, state: &GlobalState, dq: &DVector<f64>, alpha: f64) -> GlobalState {
        assert_eq!(dq.len(), self.dofs.len());
        let mut next = state.clone();
        for (n, g) in next.poses.iter_mut().enumerate() {
            if let Some(o) = self.dofs.node_offset(n) {
                let zeta = Twist::from_fn(|r, _| dq[o + r] * alpha);
                *g = retract(g, &zeta);
            }
        }
        for (e, b) in next.slopes.iter_mut().enumerate() {
            if let Some(o) = self.dofs.slope_offset(e) {
                *b += Twist::from_fn(|r, _| dq[o + r] * alpha);
            }
        }
        next
    }

    /// Load factors of every load after `k` of `n` load steps. With an
    /// override ramp all loads follow it.
    pub fn load_factors(&self, k: usize, override_ramp: Option<Ramp>) -> Vec<f64> {
        self.scene
            .loads
            .iter()
            .map(|l| override_ramp.unwrap_or(l.ramp).factor(k))
            .collect()
    }

    /// Number of load steps implied by the loads, the override, or one.
    pub fn load_steps(&self, override_ramp: Option<Ramp>) -> usize {
        match override_ramp {
            Some(r) => r.steps(),
            None => self.scene.loads.iter().map(|l| l.ramp.steps()).max().unwrap_or(1),
        }
    }

    pub fn kinematics(&self, state: &GlobalState, e: usize) -> Result<ElementKinematics> {
        let [a, b] = self.scene.elements[e].nodes;
        self.elements[e]
            .recover_mean_strain(&state.poses[a], &state.poses[b], &state.slopes[e])
            .map_err(|err| err.at_element(e))
    }

    /// Stored elastic energy.
    pub fn energy(&self, state: &GlobalState) -> Result<f64> {
        let mut u = 0.0;
        for e in 0..self.elements.len() {
            u += self.elements[e].energy(&self.kinematics(state, e)?);
        }
        Ok(u)
    }

    /// Internal minus external generalized force at every node (body frame)
    /// and every slope, before constraints are removed.
    pub fn node_forces(&self, state: &GlobalState, factors: &[f64]) -> Result<(Vec<Twist>, Vec<Twist>)> {
        let mut nodes = vec![Twist::zeros(); self.scene.nodes.len()];
        let mut slopes = vec![Twist::zeros(); self.elements.len()];
        for e in 0..self.elements.len() {
            let kin = self.kinematics(state, e)?;
            let r = self.elements[e].residual(&kin);
            let [a, b] = self.scene.elements[e].nodes;
            nodes[a] += r.r1;
            nodes[b] += r.r2;
            if let Some(r3) = r.r3 {
                slopes[e] += r3;
            }
        }
        for (l, f) in self.scene.loads.iter().zip(factors) {
            nodes[l.node] -= external_wrench(l, &state.poses[l.node], *f);
        }
        Ok((nodes, slopes))
    }

    /// Body-frame wrench each support applies to the structure, by
    /// constraint.
    pub fn reactions(&self, state: &GlobalState, factors: &[f64]) -> Result<Vec<Twist>> {
        let (nodes, _) = self.node_forces(state, factors)?;
        Ok(self.scene.constraints.iter().map(|c| nodes[c.node]).collect())
    }

    pub fn residual(&self, state: &GlobalState, factors: &[f64]) -> Result<DVector<f64>> {
        let (nodes, slopes) = self.node_forces(state, factors)?;
        let mut r = DVector::zeros(self.dofs.len());
        for (n, w) in nodes.iter().enumerate() {
            if let Some(o) = self.dofs.node_offset(n) {
                r.rows_mut(o, 6).copy_from(w);
            }
        }
        for (e, w) in slopes.iter().enumerate() {
            if let Some(o) = self.dofs.slope_offset(e) {
                r.rows_mut(o, 6).copy_from(w);
            }
        }
        if !r.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("residual".into()));
        }
        Ok(r)
    }

    fn element_offsets(&self, e: usize) -> [Option<usize>; 3] {
        let [a, b] = self.scene.elements[e].nodes;
        [
            self.dofs.node_offset(a),
            self.dofs.node_offset(b),
            self.dofs.slope_offset(e),
        ]
    }

    /// Adds element values `(node a, node b, slope)` into a global vector;
    /// entries without a global unknown are dropped.
    pub fn scatter_add(&self, e: usize, values: &[Twist; 3], global: &mut DVector<f64>) {
        for (offset, v) in self.element_offsets(e).into_iter().zip(values) {
            if let Some(o) = offset {
                let mut rows = global.rows_mut(o, 6);
                rows += v;
            }
        }
    }

    /// Element view `(node a, node b, slope)` of a global vector, zero where
    /// there is no global unknown.
    pub fn gather(&self, e: usize, global: &DVector<f64>) -> [Twist; 3] {
        self.element_offsets(e)
            .map(|offset| offset.map_or_else(Twist::zeros, |o| Twist::from_fn(|r, _| global[o + r])))
    }

    /// Residual, Gauss–Newton tangent and elastic energy.
    pub fn assemble(&self, state: &GlobalState, factors: &[f64]) -> Result<Assembly> {
        self.assemble_with(state, factors, Tangent::GaussNewton)
    }

    /// Like [`Network::assemble`] with a choice of tangent. The consistent
    /// tangent also carries the symmetrised rotation stiffness of dead loads.
    pub fn assemble_with(&self, state: &GlobalState, factors: &[f64], tangent: Tangent) -> Result<Assembly> {
        let mut r = DVector::zeros(self.dofs.len());
        let mut k = BlockSymmetric::zeros(&self.pattern);
        let mut energy = 0.0;
        for e in 0..self.elements.len() {
            let kin = self.kinematics(state, e)?;
            let el = &self.elements[e];
            energy += el.energy(&kin);
            let res = el.residual(&kin);
            self.scatter_add(e, &[res.r1, res.r2, res.r3.unwrap_or_else(Twist::zeros)], &mut r);
            let t = match tangent {
                Tangent::GaussNewton => el.tangent(&kin),
                Tangent::Consistent => {
                    let [a, b] = self.scene.elements[e].nodes;
                    el.consistent_tangent(&state.poses[a], &state.poses[b], &state.slopes[e])
                        .map_err(|err| err.at_element(e))?
                }
            };
            for i in 0..t.size {
                for j in 0..t.size {
                    // the diagonal slot of a shared block is hit once per (i, i)
                    if let Some(slot) = self.slots[e][i][j] {
                        let upper_or_diag = match slot {
                            Slot::Diagonal(_) => true,
                            Slot::Off { transposed, .. } => !transposed,
                        };
                        if upper_or_diag {
                            k.add(slot, &t.blocks[i][j]);
                        }
                    }
                }
            }
        }
        for (l, f) in self.scene.loads.iter().zip(factors) {
            if let Some(o) = self.dofs.node_offset(l.node) {
                let w = external_wrench(l, &state.poses[l.node], *f);
                let mut rows = r.rows_mut(o, 6);
                rows -= w;
                if tangent == Tangent::Consistent && l.frame == LoadFrame::Dead {
                    // d(R^T v)/d(omega) = skew(R^T v) for a fixed spatial v
                    let mut b = Mat6::zeros();
                    b.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&angular(&w))));
                    b.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-skew(&linear(&w))));
                    let block = self.dofs.node_block(l.node).expect("free node has a block");
                    k.add(Slot::Diagonal(block), &((b + b.transpose()) * 0.5));
                }
            }
        }
        if !r.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("residual".into()));
        }
        if !k.is_finite() {
            return Err(Error::NonFinite("tangent".into()));
        }
        Ok(Assembly {
            residual: r,
            tangent: k,
            energy,
        })
    }

    /// Maximal rod chains of the element graph.
    pub fn chains(&self) -> Vec<Chain> {
        let topo: Vec<[usize; 2]> = self.scene.elements.iter().map(|e| e.nodes).collect();
        chains(self.scene.nodes.len(), &topo)
    }
}

#[cfg(test)]
mod tests;
