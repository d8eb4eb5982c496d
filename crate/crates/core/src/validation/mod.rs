//! Reference solutions and error metrics for the benchmarks.

pub mod quadrature;
mod shooting;

use alloc::format;
use alloc::vec::Vec;

use nalgebra::Vector3;

pub use shooting::{shooting_reference, RodProblem, MIN_SAMPLES};

use crate::error::{Error, Result};
use crate::liegroup::{angular, exp_se3, linear, log_se3, twist, Mat6, Pose, Twist};
use crate::math;
use crate::network::{Chain, GlobalState, Network};
use quadrature::GaussLegendre;

/// Errors at or below this are treated as the numerical floor when fitting.
pub const ERROR_FLOOR: f64 = 1e-14;

/// Centerline state at one arclength. The internal wrench is body-frame,
/// moment first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterlineSample {
    pub s: f64,
    pub pose: Pose,
    pub strain: Twist,
    pub internal_wrench: Twist,
}

fn check_sorted(samples: &[CenterlineSample]) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::Domain("a centerline needs at least two samples".into()));
    }
    if samples.windows(2).any(|w| !(w[1].s > w[0].s)) {
        return Err(Error::Domain("centerline samples must be strictly increasing in s".into()));
    }
    Ok(())
}

fn bracket(samples: &[CenterlineSample], s: f64) -> (usize, f64) {
    let i = samples.partition_point(|x| x.s <= s).clamp(1, samples.len() - 1) - 1;
    let (a, b) = (samples[i].s, samples[i + 1].s);
    (i, ((s - a) / (b - a)).clamp(0.0, 1.0))
}

fn position_at(samples: &[CenterlineSample], s: f64) -> Vector3<f64> {
    let (i, t) = bracket(samples, s);
    samples[i].pose.position * (1.0 - t) + samples[i + 1].pose.position * t
}

/// Sample at `s`: positions, strains and wrenches linearly interpolated,
/// rotations along the geodesic between neighbours.
pub fn interpolate(samples: &[CenterlineSample], s: f64) -> Result<CenterlineSample> {
    check_sorted(samples)?;
    let (i, t) = bracket(samples, s);
    let (a, b) = (&samples[i], &samples[i + 1]);
    let relative = Pose {
        rotation: a.pose.rotation.transpose() * b.pose.rotation,
        position: Vector3::zeros(),
    };
    let omega = angular(&log_se3(&relative)?);
    let rotation = a.pose.rotation * exp_se3(&twist(omega * t, Vector3::zeros())).rotation;
    Ok(CenterlineSample {
        s,
        pose: Pose {
            rotation,
            position: a.pose.position * (1.0 - t) + b.pose.position * t,
        },
        strain: a.strain * (1.0 - t) + b.strain * t,
        internal_wrench: a.internal_wrench * (1.0 - t) + b.internal_wrench * t,
    })
}

/// Samples a chain of the network at `per_element` equal subdivisions of
/// every element, with arclength accumulated along the chain. Reversed
/// elements keep their own frame and strain orientation.
pub fn sample_chain(
    network: &Network,
    state: &GlobalState,
    chain: &Chain,
    per_element: usize,
) -> Result<Vec<CenterlineSample>> {
    let per_element = per_element.max(1);
    let mut out = Vec::with_capacity(chain.elements.len() * per_element + 1);
    let mut offset = 0.0;
    for (k, &(e, reversed)) in chain.elements.iter().enumerate() {
        let kin = network.kinematics(state, e)?;
        let el = &network.elements()[e];
        let [a, _] = network.scene().elements[e].nodes;
        let h = el.length;
        let first = if k == 0 { 0 } else { 1 };
        for j in first..=per_element {
            let along = h * j as f64 / per_element as f64;
            let local = if reversed { h - along } else { along };
            let strain = el.strain_at(&kin.mean_strain, &kin.slope, local)?;
            out.push(CenterlineSample {
                s: offset + along,
                pose: el.pose_at(&state.poses[a], &kin.mean_strain, &kin.slope, local)?,
                strain,
                internal_wrench: el.stiffness * (strain - el.rest_strain),
            });
        }
        offset += h;
    }
    Ok(out)
}

fn abscissae(a: &[CenterlineSample], b: &[CenterlineSample]) -> Vec<f64> {
    let mut s: Vec<f64> = a.iter().chain(b).map(|x| x.s).collect();
    s.sort_by(f64::total_cmp);
    s.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));
    s
}

fn check_same_span(a0: f64, a1: f64, b0: f64, b1: f64) -> Result<()> {
    let tol = 1e-9 * (1.0 + a1.abs().max(b1.abs()));
    if (a0 - b0).abs() > tol || (a1 - b1).abs() > tol {
        return Err(Error::Domain(format!("rod spans differ: [{a0}, {a1}] vs [{b0}, {b1}]")));
    }
    Ok(())
}

/// `max_s |p(s) - p_rest(s)|` over the union of both sample sets.
pub fn max_displacement(deformed: &[CenterlineSample], rest: &[CenterlineSample]) -> Result<f64> {
    check_sorted(deformed)?;
    check_sorted(rest)?;
    Ok(abscissae(deformed, rest)
        .into_iter()
        .map(|s| (position_at(deformed, s) - position_at(rest, s)).norm())
        .fold(0.0, f64::max))
}

/// `e_p = sqrt((1/L) int |p - p_ref|^2 ds) / u_max`, trapezoid rule on the
/// union of sample abscissae with linearly interpolated positions.
pub fn displacement_error(candidate: &[CenterlineSample], reference: &[CenterlineSample], u_max: f64) -> Result<f64> {
    if !(u_max > 0.0 && u_max.is_finite()) {
        return Err(Error::UndefinedMetric(format!("maximal displacement is {u_max}")));
    }
    check_sorted(candidate)?;
    check_sorted(reference)?;
    let (c0, c1) = (candidate[0].s, candidate[candidate.len() - 1].s);
    check_same_span(c0, c1, reference[0].s, reference[reference.len() - 1].s)?;
    let s = abscissae(candidate, reference);
    let d2: Vec<f64> = s
        .iter()
        .map(|&x| (position_at(candidate, x) - position_at(reference, x)).norm_squared())
        .collect();
    let mut integral = 0.0;
    for i in 1..s.len() {
        integral += 0.5 * (s[i] - s[i - 1]) * (d2[i] + d2[i - 1]);
    }
    Ok(math::sqrt(integral / (s[s.len() - 1] - s[0])) / u_max)
}

/// One linear piece of a strain field.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainSegment {
    pub start: f64,
    pub end: f64,
    pub strain_start: Twist,
    pub strain_end: Twist,
    pub stiffness: Mat6,
}

/// Piecewise-linear strain along a rod, possibly discontinuous at breaks.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainField {
    pub segments: Vec<StrainSegment>,
}

impl StrainField {
    /// The elements' own linear strains along a chain.
    pub fn from_chain(network: &Network, state: &GlobalState, chain: &Chain) -> Result<Self> {
        let mut segments = Vec::with_capacity(chain.elements.len());
        let mut offset = 0.0;
        for &(e, reversed) in &chain.elements {
            let kin = network.kinematics(state, e)?;
            let el = &network.elements()[e];
            let at_a = el.strain_at(&kin.mean_strain, &kin.slope, 0.0)?;
            let at_b = el.strain_at(&kin.mean_strain, &kin.slope, el.length)?;
            let (strain_start, strain_end) = if reversed { (at_b, at_a) } else { (at_a, at_b) };
            segments.push(StrainSegment {
                start: offset,
                end: offset + el.length,
                strain_start,
                strain_end,
                stiffness: el.stiffness,
            });
            offset += el.length;
        }
        Self::new(segments)
    }

    /// Linear interpolation between samples with one stiffness.
    pub fn from_samples(samples: &[CenterlineSample], stiffness: Mat6) -> Result<Self> {
        check_sorted(samples)?;
        Self::new(
            samples
                .windows(2)
                .map(|w| StrainSegment {
                    start: w[0].s,
                    end: w[1].s,
                    strain_start: w[0].strain,
                    strain_end: w[1].strain,
                    stiffness,
                })
                .collect(),
        )
    }

    pub fn new(segments: Vec<StrainSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Domain("empty strain field".into()));
        }
        for w in segments.windows(2) {
            if (w[1].start - w[0].end).abs() > 1e-12 * (1.0 + w[0].end.abs()) {
                return Err(Error::Domain("strain segments must be contiguous".into()));
            }
        }
        if segments.iter().any(|g| !(g.end > g.start)) {
            return Err(Error::Domain("strain segments must have positive length".into()));
        }
        Ok(Self { segments })
    }

    pub fn start(&self) -> f64 {
        self.segments[0].start
    }

    pub fn end(&self) -> f64 {
        self.segments[self.segments.len() - 1].end
    }

    fn segment(&self, s: f64) -> &StrainSegment {
        let i = self.segments.partition_point(|g| g.end <= s).min(self.segments.len() - 1);
        &self.segments[i]
    }

    pub fn evaluate(&self, s: f64) -> Twist {
        let g = self.segment(s);
        let t = ((s - g.start) / (g.end - g.start)).clamp(0.0, 1.0);
        g.strain_start * (1.0 - t) + g.strain_end * t
    }

    fn breaks(&self) -> impl Iterator<Item = f64> + '_ {
        core::iter::once(self.start()).chain(self.segments.iter().map(|g| g.end))
    }
}

/// `e_E = int (xi - xi_ref)^T K (xi - xi_ref) ds` with `K` from the
/// candidate. Four-point Gauss on every interval between the breaks of both
/// fields, which integrates two linear fields exactly.
pub fn energy_error(candidate: &StrainField, reference: &StrainField) -> Result<f64> {
    check_same_span(candidate.start(), candidate.end(), reference.start(), reference.end())?;
    let mut s: Vec<f64> = candidate.breaks().chain(reference.breaks()).collect();
    s.sort_by(f64::total_cmp);
    s.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
    let rule = GaussLegendre::new(4);
    let mut total = 0.0;
    for w in s.windows(2) {
        let k = &candidate.segment(0.5 * (w[0] + w[1])).stiffness;
        for (x, weight) in rule.mapped(w[0], w[1]) {
            let d = candidate.evaluate(x) - reference.evaluate(x);
            total += weight * d.dot(&(k * d));
        }
    }
    Ok(total)
}

/// Errors of a mesh-refinement sweep and their fitted decay rate
/// `error ~ N^-order`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub counts: Vec<usize>,
    pub errors: Vec<f64>,
    pub order: f64,
    /// Root-mean-square residual of the fit in natural-log units.
    pub fit_residual: f64,
}

/// Least-squares slope of `ln(error)` against `ln(N)` over the points above
/// the numerical floor.
pub fn fit_convergence_order(counts: &[usize], errors: &[f64]) -> Result<RefinementStudy> {
    if counts.len() != errors.len() {
        return Err(Error::Domain("counts and errors differ in length".into()));
    }
    if counts.windows(2).any(|w| w[1] <= w[0]) || counts.first() == Some(&0) {
        return Err(Error::Domain("element counts must be positive and strictly increasing".into()));
    }
    let points: Vec<(f64, f64)> = counts
        .iter()
        .zip(errors)
        .filter(|(_, e)| e.is_finite() && **e > ERROR_FLOOR)
        .map(|(n, e)| (math::ln(*n as f64), math::ln(*e)))
        .collect();
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} usable points above {ERROR_FLOOR:e}, need 4",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let (sxy, sxx) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    let slope = sxy / sxx;
    let sq: f64 = points
        .iter()
        .map(|(x, y)| {
            let r = y - (my + slope * (x - mx));
            r * r
        })
        .sum();
    Ok(RefinementStudy {
        counts: counts.to_vec(),
        errors: errors.to_vec(),
        order: -slope,
        fit_residual: math::sqrt(sq / m),
    })
}

/// `|R m_int - M|` at every sample of every chain, where `m_int` is the
/// internal moment `K (xi - xi0)` and `M` the applied spatial tip moment.
pub fn internal_moment_check(
    network: &Network,
    state: &GlobalState,
    moment: &Vector3<f64>,
    per_element: usize,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for chain in network.chains() {
        for sample in sample_chain(network, state, &chain, per_element)? {
            let m = sample.pose.rotation * angular(&sample.internal_wrench);
            out.push((m - moment).norm());
        }
    }
    Ok(out)
}

/// Spatial internal force at every sample, for checks that pair with
/// [`internal_moment_check`].
pub fn internal_forces(network: &Network, state: &GlobalState, per_element: usize) -> Result<Vec<Vector3<f64>>> {
    let mut out = Vec::new();
    for chain in network.chains() {
        for sample in sample_chain(network, state, &chain, per_element)? {
            out.push(sample.pose.rotation * linear(&sample.internal_wrench));
        }
    }
    Ok(out)
}
