//! Shooting solution of the static rod equations for one clamped rod with a
//! tip wrench. Uses only the group primitives, never the finite elements.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Matrix6, Vector3};

use super::CenterlineSample;
use crate::element::SectionStiffness;
use crate::error::{Error, Result};
use crate::liegroup::{ad, angular, exp_se3, linear, log_se3, skew, twist, Mat6, Pose, Twist};
use crate::math;
use crate::network::{ConstraintKind, LoadFrame, NetworkScene};

pub const MIN_SAMPLES: usize = 201;
const MAX_NEWTON: usize = 200;
const WRENCH_TOL: f64 = 1e-10;
const STEP_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-7;
const MAX_CONTINUATION: usize = 64;

/// Uniform rod clamped at `base`, loaded at its far end.
#[derive(Debug, Clone, PartialEq)]
pub struct RodProblem {
    pub base: Pose,
    pub length: f64,
    pub rest_strain: Twist,
    /// Section stiffness in the rod frame.
    pub stiffness: Mat6,
    /// `[moment; force]`; spatial components for dead loads, body components
    /// for follower loads.
    pub tip_wrench: Twist,
    pub frame: LoadFrame,
    pub samples: usize,
}

impl RodProblem {
    /// Extracts the problem from a scene holding a single unbranched rod,
    /// clamped at one end and loaded only at the other.
    pub fn from_scene(scene: &NetworkScene) -> Result<Self> {
        let topo: Vec<[usize; 2]> = scene.elements.iter().map(|e| e.nodes).collect();
        let chains = crate::network::chains(scene.nodes.len(), &topo);
        if chains.len() != 1 || chains[0].nodes.first() == chains[0].nodes.last() {
            return Err(Error::Scene("shooting needs a single open rod".into()));
        }
        let mut chain = chains[0].clone();
        let clamp = match scene.constraints.as_slice() {
            [c] if c.kind == ConstraintKind::Clamped => c,
            _ => return Err(Error::Scene("shooting needs exactly one clamped node".into())),
        };
        if clamp.node == *chain.nodes.last().unwrap() {
            chain.nodes.reverse();
        } else if clamp.node != chain.nodes[0] {
            return Err(Error::Scene("the clamp must sit at an end of the rod".into()));
        }
        let tip = *chain.nodes.last().unwrap();
        let load = match scene.loads.as_slice() {
            [l] if l.node == tip => l,
            _ => return Err(Error::Scene("shooting needs exactly one load, at the free end".into())),
        };
        let material = scene.elements[0].material;
        let mut length = 0.0;
        let mut rest: Option<Twist> = None;
        for w in chain.nodes.windows(2) {
            let xi = log_se3(&(scene.nodes[w[0]].inverse() * scene.nodes[w[1]]))?;
            let h = linear(&xi).norm();
            if h <= 0.0 {
                return Err(Error::Scene("zero-length element".into()));
            }
            let xi = xi / h;
            match rest {
                None => rest = Some(xi),
                Some(r) if (r - xi).amax() > 1e-9 * (1.0 + r.amax()) => {
                    return Err(Error::Scene("shooting needs a uniform rest strain".into()));
                }
                _ => {}
            }
            length += h;
        }
        if scene.elements.iter().any(|e| e.material != material || e.rest_strain.is_some()) {
            return Err(Error::Scene("shooting needs one material and geometric rest strain".into()));
        }
        let rest_strain = rest.unwrap();
        let section: &SectionStiffness = scene
            .materials
            .get(material)
            .ok_or_else(|| Error::Scene(format!("unknown material {material}")))?;
        Ok(Self {
            base: clamp.target,
            length,
            rest_strain,
            stiffness: section.aligned_to(&linear(&rest_strain)),
            tip_wrench: load.wrench,
            frame: load.frame,
            samples: MIN_SAMPLES,
        })
    }

    /// Unloaded centerline at the same arclengths as the reference.
    pub fn rest_samples(&self) -> Vec<CenterlineSample> {
        let n = self.samples.max(MIN_SAMPLES);
        (0..n)
            .map(|i| {
                let s = self.length * i as f64 / (n - 1) as f64;
                CenterlineSample {
                    s,
                    pose: self.base * exp_se3(&(self.rest_strain * s)),
                    strain: self.rest_strain,
                    internal_wrench: Twist::zeros(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct State {
    r: Matrix3<f64>,
    p: Vector3<f64>,
    w: Twist,
}

impl State {
    fn axpy(&self, h: f64, d: &State) -> State {
        State {
            r: self.r + d.r * h,
            p: self.p + d.p * h,
            w: self.w + d.w * h,
        }
    }

    fn distance(&self, other: &State) -> f64 {
        (self.r - other.r)
            .amax()
            .max((self.p - other.p).amax())
            .max((self.w - other.w).amax())
    }

    fn scale(&self) -> f64 {
        1.0 + self.p.amax().max(self.w.amax())
    }

    fn orthonormalize(mut self) -> State {
        for _ in 0..2 {
            if let Some(inv) = self.r.try_inverse() {
                self.r = (self.r + inv.transpose()) * 0.5;
            }
        }
        self
    }
}

/// Step sizes, grouped by output interval.
type Mesh = Vec<Vec<f64>>;

struct Shooter<'a> {
    problem: &'a RodProblem,
    compliance: Mat6,
    outputs: usize,
}

impl Shooter<'_> {
    fn strain(&self, w: &Twist) -> Twist {
        self.problem.rest_strain + self.compliance * w
    }

    fn rhs(&self, y: &State) -> State {
        let xi = self.strain(&y.w);
        State {
            r: y.r * skew(&angular(&xi)),
            p: y.r * linear(&xi),
            w: ad(&xi).transpose() * y.w,
        }
    }

    fn rk4(&self, y: &State, h: f64) -> State {
        let k1 = self.rhs(y);
        let k2 = self.rhs(&y.axpy(0.5 * h, &k1));
        let k3 = self.rhs(&y.axpy(0.5 * h, &k2));
        let k4 = self.rhs(&y.axpy(h, &k3));
        State {
            r: y.r + (k1.r + k2.r * 2.0 + k3.r * 2.0 + k4.r) * (h / 6.0),
            p: y.p + (k1.p + k2.p * 2.0 + k3.p * 2.0 + k4.p) * (h / 6.0),
            w: y.w + (k1.w + k2.w * 2.0 + k3.w * 2.0 + k4.w) * (h / 6.0),
        }
    }

    /// One accepted step: two half steps of RK4.
    fn step(&self, y: &State, h: f64) -> State {
        self.rk4(&self.rk4(y, 0.5 * h), 0.5 * h).orthonormalize()
    }

    fn start(&self, w0: &Twist) -> State {
        State {
            r: self.problem.base.rotation,
            p: self.problem.base.position,
            w: *w0,
        }
    }

    fn interval(&self) -> f64 {
        self.problem.length / (self.outputs - 1) as f64
    }

    /// Step-doubling error control on every output interval.
    fn adapt(&self, w0: &Twist) -> Result<Mesh> {
        let mut y = self.start(w0);
        let span = self.interval();
        let mut h = span;
        let mut mesh = Vec::with_capacity(self.outputs - 1);
        for _ in 1..self.outputs {
            let mut steps = Vec::new();
            let mut left = span;
            while left > 1e-14 * span {
                let trial = h.min(left);
                let coarse = self.rk4(&y, trial);
                let fine = self.step(&y, trial);
                let err = coarse.distance(&fine) / 15.0;
                let tol = STEP_TOL * y.scale();
                if !err.is_finite() {
                    return Err(Error::Oracle("integration produced non-finite values".into()));
                }
                let grow = if err > 0.0 {
                    (0.9 * math::pow(tol / err, 0.2)).clamp(0.2, 4.0)
                } else {
                    4.0
                };
                if err <= tol {
                    steps.push(trial);
                    y = fine;
                    left -= trial;
                    h = trial * grow;
                } else {
                    h = trial * grow;
                    if h < 1e-12 * self.problem.length {
                        return Err(Error::Oracle("step size underflow".into()));
                    }
                }
            }
            mesh.push(steps);
        }
        Ok(mesh)
    }

    /// States at the output points for a fixed mesh.
    fn run(&self, w0: &Twist, mesh: &Mesh, record: bool) -> Vec<State> {
        let mut y = self.start(w0);
        let mut out = Vec::new();
        if record {
            out.push(y);
        }
        for steps in mesh {
            for h in steps {
                y = self.step(&y, *h);
            }
            if record {
                out.push(y);
            }
        }
        if !record {
            out.push(y);
        }
        out
    }

    fn target(&self, tip: &State, factor: f64) -> Twist {
        let w = self.problem.tip_wrench * factor;
        match self.problem.frame {
            LoadFrame::Follower => w,
            LoadFrame::Dead => {
                let rt = tip.r.transpose();
                twist(rt * angular(&w), rt * linear(&w))
            }
        }
    }

    fn mismatch(&self, w0: &Twist, mesh: &Mesh, factor: f64) -> Twist {
        let tip = self.run(w0, mesh, false)[0];
        tip.w - self.target(&tip, factor)
    }

    /// Damped Newton on the base wrench at one load factor.
    fn newton(&self, mut w0: Twist, factor: f64) -> Result<Twist> {
        for _ in 0..MAX_NEWTON {
            let mesh = self.adapt(&w0)?;
            let r = self.mismatch(&w0, &mesh, factor);
            if !r.iter().all(|x| x.is_finite()) {
                return Err(Error::Oracle("non-finite tip mismatch".into()));
            }
            if r.amax() < WRENCH_TOL {
                return Ok(w0);
            }
            let mut jac = Matrix6::zeros();
            for i in 0..6 {
                let d = FD_STEP * w0[i].abs().max(1.0);
                let mut wp = w0;
                wp[i] += d;
                let col = (self.mismatch(&wp, &mesh, factor) - r) / d;
                jac.set_column(i, &col);
            }
            let dx = jac
                .lu()
                .solve(&(-r))
                .ok_or_else(|| Error::Oracle("singular shooting Jacobian".into()))?;
            let mut alpha = 1.0;
            let norm = r.norm();
            loop {
                let trial = w0 + dx * alpha;
                let rt = self.mismatch(&trial, &mesh, factor).norm();
                if rt.is_finite() && rt < (1.0 - 1e-4 * alpha) * norm {
                    w0 = trial;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-8 {
                    return Err(Error::Oracle(format!("shooting stalled at mismatch {norm:e}")));
                }
            }
        }
        Err(Error::Oracle(format!("shooting did not converge in {MAX_NEWTON} iterations")))
    }
}

/// Integrates `g' = g hat(xi)`, `L' = ad(xi)^T L` with `xi = xi0 + K^-1 L`
/// from the clamp and solves for the base wrench that balances the tip load.
/// Loads the problem in more increments when a direct solve fails.
pub fn shooting_reference(problem: &RodProblem) -> Result<Vec<CenterlineSample>> {
    if !(problem.length > 0.0 && problem.length.is_finite()) {
        return Err(Error::Domain(format!("rod length must be positive, got {}", problem.length)));
    }
    let compliance = problem
        .stiffness
        .try_inverse()
        .ok_or_else(|| Error::Domain("stiffness is singular".into()))?;
    let shooter = Shooter {
        problem,
        compliance,
        outputs: problem.samples.max(MIN_SAMPLES),
    };
    // the rigid-body transport of the tip load back to the clamp
    let rest_tip = exp_se3(&(problem.rest_strain * problem.length));
    let guess = |factor: f64| {
        let tip = State {
            r: problem.base.rotation * rest_tip.rotation,
            p: Vector3::zeros(),
            w: Twist::zeros(),
        };
        rest_tip.inverse().adjoint().transpose() * shooter.target(&tip, factor)
    };
    let mut increments = 1;
    let mut last = Error::Oracle("no attempt".into());
    let base_wrench = loop {
        if increments > MAX_CONTINUATION {
            return Err(last);
        }
        let mut w0 = guess(1.0 / increments as f64);
        let mut ok = true;
        for k in 1..=increments {
            match shooter.newton(w0, k as f64 / increments as f64) {
                Ok(w) => w0 = w,
                Err(e) => {
                    last = e;
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            break w0;
        }
        increments *= 2;
    };
    let mesh = shooter.adapt(&base_wrench)?;
    let states = shooter.run(&base_wrench, &mesh, true);
    let span = shooter.interval();
    let mut samples = vec![];
    for (i, y) in states.iter().enumerate() {
        samples.push(CenterlineSample {
            s: if i + 1 == states.len() { problem.length } else { span * i as f64 },
            pose: Pose::new(y.r, y.p)?,
            strain: shooter.strain(&y.w),
            internal_wrench: y.w,
        });
    }
    Ok(samples)
}
