//! SE(3) / se(3) kernel.
//!
//! Twists are 6-vectors ordered `[angular; linear]`; wrenches reuse the layout
//! as `[moment; force]`. Poses are stored as a rotation matrix and a position.

use core::f64::consts::PI;
use core::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Matrix6, Rotation3, UnitQuaternion, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::math;

pub type Twist = Vector6<f64>;
pub type Mat6 = Matrix6<f64>;

/// Default truncation order of the Bernoulli series for `dexp_inv`.
pub const DEFAULT_DEXP_ORDER: usize = 8;

/// Highest series order supported by [`dexp_inv`].
pub const MAX_DEXP_ORDER: usize = 20;

/// Distance from pi below which `log_se3` refuses to pick a branch.
pub const BRANCH_MARGIN: f64 = 1e-6;

const SERIES_ANGLE: f64 = 0.1;

// B_0 .. B_20
const BERNOULLI: [f64; MAX_DEXP_ORDER + 1] = [
    1.0,
    -0.5,
    1.0 / 6.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    1.0 / 42.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    5.0 / 66.0,
    0.0,
    -691.0 / 2730.0,
    0.0,
    7.0 / 6.0,
    0.0,
    -3617.0 / 510.0,
    0.0,
    43867.0 / 798.0,
    0.0,
    -174611.0 / 330.0,
];

pub fn twist(angular: Vector3<f64>, linear: Vector3<f64>) -> Twist {
    Twist::new(
        angular.x, angular.y, angular.z, linear.x, linear.y, linear.z,
    )
}

#[inline]
pub fn angular(v: &Twist) -> Vector3<f64> {
    v.fixed_rows::<3>(0).into_owned()
}

#[inline]
pub fn linear(v: &Twist) -> Vector3<f64> {
    v.fixed_rows::<3>(3).into_owned()
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rigid transformation `(R, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub position: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            position: Vector3::zeros(),
        }
    }

    /// Builds a pose after checking that `rotation` is a proper rotation
    /// (orthonormal within 1e-10 in Frobenius norm, determinant +1).
    pub fn new(rotation: Matrix3<f64>, position: Vector3<f64>) -> Result<Self> {
        let pose = Self { rotation, position };
        pose.check()?;
        Ok(pose)
    }

    pub fn from_translation(position: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            position,
        }
    }

    /// Position plus unit quaternion `[w, x, y, z]`. The quaternion is
    /// normalised; a zero quaternion is rejected.
    pub fn from_quaternion(wxyz: [f64; 4], position: Vector3<f64>) -> Result<Self> {
        let n = math::sqrt(wxyz.iter().map(|c| c * c).sum::<f64>());
        if !(n > 1e-12) || !n.is_finite() {
            return Err(Error::Config("quaternion must be finite and non-zero".into()));
        }
        let q = nalgebra::Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let uq = UnitQuaternion::from_quaternion(q);
        Ok(Self {
            rotation: uq.to_rotation_matrix().into_inner(),
            position,
        })
    }

    /// Unit quaternion `[w, x, y, z]` with `w >= 0`.
    pub fn quaternion(&self) -> [f64; 4] {
        let rot = Rotation3::from_matrix_unchecked(self.rotation);
        let q = UnitQuaternion::from_rotation_matrix(&rot);
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        [s * q.w, s * q.i, s * q.j, s * q.k]
    }

    pub fn check(&self) -> Result<()> {
        if !self.rotation.iter().all(|x| x.is_finite()) || !self.position.iter().all(|x| x.is_finite())
        {
            return Err(Error::Config("pose has non-finite entries".into()));
        }
        let ortho = (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm();
        let det = self.rotation.determinant();
        if ortho > 1e-10 || math::abs(det - 1.0) > 1e-10 {
            return Err(Error::Config(alloc::format!(
                "rotation is not orthonormal (|RtR - I| = {ortho:e}, det = {det})"
            )));
        }
        Ok(())
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            position: -(rt * self.position),
        }
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    /// Reads the rotation and translation blocks of a homogeneous matrix
    /// without checking orthonormality.
    pub fn from_matrix_unchecked(m: &Matrix4<f64>) -> Self {
        Self {
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
            position: m.fixed_view::<3, 1>(0, 3).into_owned(),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.position
    }

    /// Group adjoint `Ad_g = [R 0; p~R R]`.
    pub fn adjoint(&self) -> Mat6 {
        let mut m = Mat6::zeros();
        let r = self.rotation;
        let pr = skew(&self.position) * r;
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        m.fixed_view_mut::<3, 3>(3, 0).copy_from(&pr);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
        m
    }

    /// Rotation angle of the rotation part, in `[0, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        let w = vee_so3(&(self.rotation - self.rotation.transpose())) * 0.5;
        let c = 0.5 * (self.rotation.trace() - 1.0);
        math::atan2(w.norm(), c)
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        Pose {
            rotation: self.rotation * rhs.rotation,
            position: self.rotation * rhs.position + self.position,
        }
    }
}

impl<'a> Mul<&'a Pose> for &'a Pose {
    type Output = Pose;
    fn mul(self, rhs: &'a Pose) -> Pose {
        Pose {
            rotation: self.rotation * rhs.rotation,
            position: self.rotation * rhs.position + self.position,
        }
    }
}

fn vee_so3(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

pub fn hat(v: &Twist) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&angular(v)));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&linear(v));
    m
}

/// Inverse of [`hat`]. Fails when `m` is not skew in its upper-left block or
/// has a non-zero bottom row (tolerance 1e-12).
pub fn vee(m: &Matrix4<f64>) -> Result<Twist> {
    const TOL: f64 = 1e-12;
    let top = m.fixed_view::<3, 3>(0, 0);
    let sym = top + top.transpose();
    if sym.amax() > TOL {
        return Err(Error::MalformedAlgebraElement(
            "upper-left 3x3 block is not skew-symmetric".into(),
        ));
    }
    if m.row(3).amax() > TOL {
        return Err(Error::MalformedAlgebraElement("bottom row is not zero".into()));
    }
    Ok(Twist::new(
        m[(2, 1)],
        m[(0, 2)],
        m[(1, 0)],
        m[(0, 3)],
        m[(1, 3)],
        m[(2, 3)],
    ))
}

// sin(t)/t, (1 - cos t)/t^2, (t - sin t)/t^3
fn exp_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        let a = 1.0 - t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0)));
        let b = 0.5 - t2 / 24.0 * (1.0 - t2 / 30.0 * (1.0 - t2 / 56.0 * (1.0 - t2 / 90.0)));
        let c = 1.0 / 6.0 - t2 / 120.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0 * (1.0 - t2 / 110.0)));
        (a, b, c)
    } else {
        let (s, co) = (math::sin(theta), math::cos(theta));
        let t2 = theta * theta;
        (s / theta, (1.0 - co) / t2, (theta - s) / (t2 * theta))
    }
}

/// Closed-form exponential of a twist.
pub fn exp_se3(v: &Twist) -> Pose {
    let w = angular(v);
    let theta = w.norm();
    let k = skew(&w);
    let k2 = k * k;
    let (a, b, c) = exp_coefficients(theta);
    let rotation = Matrix3::identity() + k * a + k2 * b;
    let left_jacobian = Matrix3::identity() + k * b + k2 * c;
    Pose {
        rotation,
        position: left_jacobian * linear(v),
    }
}

/// Principal logarithm. Fails within [`BRANCH_MARGIN`] of a half turn.
pub fn log_se3(g: &Pose) -> Result<Twist> {
    let r = &g.rotation;
    let w = vee_so3(&(r - r.transpose())) * 0.5;
    let cos_t = 0.5 * (r.trace() - 1.0);
    let sin_t = w.norm();
    let theta = math::atan2(sin_t, cos_t);
    if theta > PI - BRANCH_MARGIN {
        return Err(Error::NearBranchCut { angle: theta });
    }
    let omega = if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        // t / sin t
        w * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0 + 31.0 * t2 * t2 * t2 / 15120.0)
    } else if theta > PI - SERIES_ANGLE {
        // The skew part carries little information near a half turn; read the
        // axis off the symmetric part instead.
        let sym = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos_t;
        let one_minus = 1.0 - cos_t;
        let mut col = 0;
        for i in 1..3 {
            if sym[(i, i)] > sym[(col, col)] {
                col = i;
            }
        }
        let mut axis: Vector3<f64> = sym.column(col).into_owned()
            / math::sqrt(sym[(col, col)].max(0.0) * one_minus);
        axis /= axis.norm();
        if axis.dot(&w) < 0.0 {
            axis = -axis;
        }
        axis * theta
    } else {
        w * (theta / sin_t)
    };
    let k = skew(&omega);
    let d = if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0 + t2 * t2 * t2 / 1209600.0
    } else {
        let half = theta * math::sin(theta) / (2.0 * (1.0 - math::cos(theta)));
        (1.0 - half) / (theta * theta)
    };
    let inv_left_jacobian = Matrix3::identity() - k * 0.5 + k * k * d;
    Ok(twist(omega, inv_left_jacobian * g.position))
}

/// Algebra adjoint `ad_v = [k~ 0; e~ k~]`, so that `ad_v w = [v, w]`.
pub fn ad(v: &Twist) -> Mat6 {
    let mut m = Mat6::zeros();
    let k = skew(&angular(v));
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&k);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&skew(&linear(v)));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&k);
    m
}

/// `sum_{j<=order} ad_v^j / (j+1)!`
pub fn dexp(v: &Twist, order: usize) -> Mat6 {
    let a = ad(v);
    let mut term = Mat6::identity();
    let mut sum = Mat6::identity();
    for j in 1..=order {
        term = term * a / (j as f64 + 1.0);
        sum += term;
    }
    sum
}

/// Truncated Bernoulli series `sum_{j<=order} B_j / j! ad_v^j`.
///
/// `order` must lie in `2..=MAX_DEXP_ORDER` and the rotation angle of `v`
/// must stay below `2 pi`, where the series stops converging.
pub fn dexp_inv(v: &Twist, order: usize) -> Result<Mat6> {
    if !(2..=MAX_DEXP_ORDER).contains(&order) {
        return Err(Error::Config(alloc::format!(
            "dexp_inv order must be in 2..={MAX_DEXP_ORDER}, got {order}"
        )));
    }
    let theta = angular(v).norm();
    if theta >= 2.0 * PI {
        return Err(Error::Domain(alloc::format!(
            "dexp_inv series diverges for rotation angle {theta} >= 2 pi"
        )));
    }
    Ok(bernoulli_series(&ad(v), order))
}

pub(crate) fn bernoulli_series(a: &Mat6, order: usize) -> Mat6 {
    let mut power = Mat6::identity();
    let mut sum = Mat6::identity();
    let mut factorial = 1.0;
    for (j, b) in BERNOULLI.iter().enumerate().take(order + 1).skip(1) {
        power *= a;
        factorial *= j as f64;
        if *b != 0.0 {
            sum += power * (*b / factorial);
        }
    }
    sum
}

/// Left-multiplicative retraction `g exp(zeta)`.
pub fn retract(g: &Pose, zeta: &Twist) -> Pose {
    g * &exp_se3(zeta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_twist(rng: &mut ChaCha8Rng, max_angle: f64) -> Twist {
        let dir = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize();
        let angle = rng.gen_range(1e-3..max_angle);
        twist(
            dir * angle,
            Vector3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ),
        )
    }

    // Truncated power series of the 4x4 matrix exponential.
    fn exp_series4(m: &Matrix4<f64>, terms: usize) -> Matrix4<f64> {
        let mut term = Matrix4::identity();
        let mut sum = Matrix4::identity();
        for j in 1..terms {
            term = term * m / j as f64;
            sum += term;
        }
        sum
    }

    fn exp_series6(m: &Mat6, terms: usize) -> Mat6 {
        let mut term = Mat6::identity();
        let mut sum = Mat6::identity();
        for j in 1..terms {
            term = term * m / j as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn hat_vee_basics() {
        assert_eq!(hat(&Twist::zeros()), Matrix4::zeros());
        let v = Twist::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0);
        assert_eq!(vee(&hat(&v)).unwrap(), v);
        let h = hat(&Twist::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0));
        assert_eq!(h[(1, 0)], 1.0);
        assert_eq!(h[(0, 1)], -1.0);
    }

    #[test]
    fn vee_rejects_bad_pattern() {
        let mut m = hat(&Twist::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0));
        m[(3, 0)] = 1.0;
        assert!(matches!(vee(&m), Err(Error::MalformedAlgebraElement(_))));
        let mut m = Matrix4::zeros();
        m[(0, 1)] = 1.0;
        assert!(matches!(vee(&m), Err(Error::MalformedAlgebraElement(_))));
    }

    #[test]
    fn exp_known_values() {
        let id = exp_se3(&Twist::zeros());
        assert_eq!(id, Pose::identity());

        let g = exp_se3(&Twist::new(0.0, 0.0, PI / 2.0, 0.0, 0.0, 0.0));
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((g.rotation - expected).norm() < 1e-15);
        assert!(g.position.norm() < 1e-15);

        let pure = exp_se3(&Twist::new(0.0, 0.0, 0.0, 1.0, -2.0, 3.0));
        assert_eq!(pure.rotation, Matrix3::identity());
        assert_eq!(pure.position, Vector3::new(1.0, -2.0, 3.0));
    }

    #[test]
    fn exp_matches_power_series() {
        let v = Twist::new(0.0, 0.0, PI / 2.0, 1.0, 0.0, 0.0);
        let series = exp_series4(&hat(&v), 20);
        let g = exp_se3(&v);
        assert!((g.matrix() - series).norm() < 1e-12);
        // p = [sin(pi/2), 1 - cos(pi/2), 0] / (pi/2)
        let p = Vector3::new(2.0 / PI, 2.0 / PI, 0.0);
        assert!((g.position - p).norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let v = random_twist(&mut rng, 2.0);
            let series = exp_series4(&hat(&v), 40);
            assert!((exp_se3(&v).matrix() - series).norm() < 1e-11);
        }
        // across the series/closed-form switch
        for theta in [1e-9, 1e-6, 1e-3, 0.0999, 0.1, 0.1001] {
            let v = Twist::new(theta, 0.0, 0.0, 0.3, 0.4, 0.5);
            let series = exp_series4(&hat(&v), 30);
            assert!((exp_se3(&v).matrix() - series).norm() < 1e-15);
        }
    }

    #[test]
    fn log_round_trip_and_branch() {
        assert_eq!(log_se3(&Pose::identity()).unwrap(), Twist::zeros());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let mut v = random_twist(&mut rng, 1.0);
            let k = angular(&v).normalize() * 0.3;
            v.fixed_rows_mut::<3>(0).copy_from(&k);
            let back = log_se3(&exp_se3(&v)).unwrap();
            assert!((back - v).norm() < 1e-12);
        }
        let near = exp_se3(&Twist::new(0.0, PI - 1e-7, 0.0, 0.0, 0.0, 0.0));
        match log_se3(&near) {
            Err(Error::NearBranchCut { angle }) => assert!((angle - (PI - 1e-7)).abs() < 1e-8),
            other => panic!("expected branch-cut error, got {other:?}"),
        }
        // close to (but outside) the margin, the symmetric-part branch is used
        let v = Twist::new(0.0, 0.6 * (PI - 1e-3), 0.8 * (PI - 1e-3), 1.0, 2.0, 3.0);
        let back = log_se3(&exp_se3(&v)).unwrap();
        assert!((back - v).norm() < 1e-9);
    }

    #[test]
    fn adjoints() {
        assert_eq!(ad(&Twist::zeros()), Mat6::zeros());
        assert_eq!(Pose::identity().adjoint(), Mat6::identity());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let v = random_twist(&mut rng, 2.5);
            let lhs = exp_se3(&v).adjoint();
            let rhs = exp_series6(&ad(&v), 40);
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn ad_is_the_matrix_commutator() {
        let v = Twist::new(0.1, -0.2, 0.3, 1.0, 0.5, -0.7);
        let w = Twist::new(-0.4, 0.2, 0.9, 0.3, -1.1, 0.2);
        let (hv, hw) = (hat(&v), hat(&w));
        let bracket = vee(&(hv * hw - hw * hv)).unwrap();
        assert!((ad(&v) * w - bracket).norm() < 1e-15);
    }

    #[test]
    fn dexp_inv_series() {
        assert_eq!(dexp_inv(&Twist::zeros(), 8).unwrap(), Mat6::identity());
        assert!(matches!(dexp_inv(&Twist::zeros(), 1), Err(Error::Config(_))));
        assert!(matches!(dexp_inv(&Twist::zeros(), 21), Err(Error::Config(_))));

        let v = Twist::new(0.3, -0.2, 0.1, 0.5, 0.2, -0.4);
        let a = ad(&v);
        // B_1 = -1/2, B_2 = 1/6
        let second = dexp_inv(&v, 2).unwrap();
        let first = second - a * a / 12.0;
        assert!((first - (Mat6::identity() - a * 0.5)).norm() < 1e-15);

        let v = twist(Vector3::new(0.3, 0.0, 0.4), Vector3::new(0.2, -0.1, 0.7));
        let prod = dexp_inv(&v, 8).unwrap() * dexp(&v, 12);
        assert!((prod - Mat6::identity()).norm() < 1e-9);
    }

    #[test]
    fn dexp_inv_inverts_finite_difference_of_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = 1e-7;
        for _ in 0..20 {
            let v = random_twist(&mut rng, 1.0);
            let delta = Twist::from_fn(|_, _| rng.gen_range(-1.0..1.0)).normalize();
            let g = exp_se3(&v);
            let gp = exp_se3(&(v + delta * t));
            // Left-trivialised difference quotient; dexp_inv(v) maps it back to delta.
            let d = log_se3(&(gp * g.inverse())).unwrap() / t;
            let back = dexp_inv(&v, 8).unwrap() * d;
            assert!((back - delta).norm() < 1e-5);
            // Right-trivialised quotient uses the reflected argument.
            let d = log_se3(&(g.inverse() * gp)).unwrap() / t;
            let back = dexp_inv(&(-v), 8).unwrap() * d;
            assert!((back - delta).norm() < 1e-5);
        }
    }

    #[test]
    fn retraction_basics() {
        let g = exp_se3(&Twist::new(0.2, 0.1, -0.3, 1.0, 2.0, 3.0));
        assert_eq!(retract(&g, &Twist::zeros()), g);
        let v = Twist::new(0.4, 0.0, 0.1, 0.0, 1.0, 0.0);
        assert!((retract(&Pose::identity(), &v).matrix() - exp_se3(&v).matrix()).norm() < 1e-15);
        let back = retract(&retract(&g, &v), &(-v));
        assert!((back.matrix() - g.matrix()).norm() < 1e-12);
    }

    #[test]
    fn quaternion_round_trip() {
        let g = exp_se3(&Twist::new(0.2, 1.1, -0.3, 1.0, 2.0, 3.0));
        let q = g.quaternion();
        let back = Pose::from_quaternion(q, g.position).unwrap();
        assert!((back.rotation - g.rotation).norm() < 1e-14);
        assert!(Pose::from_quaternion([0.0; 4], Vector3::zeros()).is_err());
    }

    #[test]
    fn pose_validation() {
        let mut r = Matrix3::identity();
        r[(0, 0)] = 1.0 + 1e-6;
        assert!(Pose::new(r, Vector3::zeros()).is_err());
        let mut flip = Matrix3::identity();
        flip[(2, 2)] = -1.0;
        assert!(Pose::new(flip, Vector3::zeros()).is_err());
    }
}
