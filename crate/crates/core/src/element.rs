//! Linear-strain rod element and its constant-strain special case.
//!
//! On an element of length `h` the strain is `xi(s) = mean + (s - h/2) slope`.
//! The relative pose of the end nodes is `exp(Omega)` with
//! `Omega = (h I - h^3/12 ad_slope) mean`, which is inverted in closed form to
//! recover the mean strain from the nodal poses.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::liegroup::{ad, dexp_inv, log_se3, retract, skew, Mat6, Pose, Twist, DEFAULT_DEXP_ORDER};
use crate::math;

/// Largest admissible condition number of the Magnus operator `A`.
pub const MAX_MAGNUS_CONDITION: f64 = 1e8;

/// Diagonal sectional stiffness `diag(GJx, EJy, EJz, EA, GA, GA)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionStiffness {
    diagonal: [f64; 6],
}

impl SectionStiffness {
    pub fn new(diagonal: [f64; 6]) -> Result<Self> {
        if diagonal.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::Config(alloc::format!(
                "stiffness entries must be finite and positive, got {diagonal:?}"
            )));
        }
        Ok(Self { diagonal })
    }

    /// Section with Young's modulus `e`, shear modulus `g`, area and second
    /// moments of area (`jx` polar).
    pub fn from_section(e: f64, g: f64, area: f64, jx: f64, jy: f64, jz: f64) -> Result<Self> {
        Self::new([g * jx, e * jy, e * jz, e * area, g * area, g * area])
    }

    /// Solid circular section of the given radius, `G = E / (2 (1 + nu))`.
    pub fn circular(e: f64, nu: f64, radius: f64) -> Result<Self> {
        if !(nu > -1.0 && nu < 0.5 + 1e-12) {
            return Err(Error::Config(alloc::format!("Poisson ratio {nu} out of range")));
        }
        let g = e / (2.0 * (1.0 + nu));
        let area = core::f64::consts::PI * radius * radius;
        let i = area * radius * radius / 4.0;
        Self::from_section(e, g, area, 2.0 * i, i, i)
    }

    pub fn diagonal(&self) -> [f64; 6] {
        self.diagonal
    }

    pub fn matrix(&self) -> Mat6 {
        Mat6::from_diagonal(&Twist::from_row_slice(&self.diagonal))
    }

    /// Stiffness expressed in a node frame whose local x axis is not the rod
    /// axis: `T K T^T` with `T = diag(Q, Q)` and `Q e_x = axis`.
    pub fn aligned_to(&self, axis: &Vector3<f64>) -> Mat6 {
        let q = rotation_from_x(axis);
        let mut t = Mat6::zeros();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(&q);
        t.fixed_view_mut::<3, 3>(3, 3).copy_from(&q);
        t * self.matrix() * t.transpose()
    }
}

// Smallest rotation taking e_x onto `axis`.
fn rotation_from_x(axis: &Vector3<f64>) -> Matrix3<f64> {
    let a = axis.normalize();
    let ex = Vector3::x();
    let c = ex.dot(&a);
    if c > 1.0 - 1e-14 {
        return Matrix3::identity();
    }
    if c < -1.0 + 1e-14 {
        return Matrix3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
    }
    let v = ex.cross(&a);
    let k = skew(&v);
    Matrix3::identity() + k + k * k * (1.0 / (1.0 + c))
}

/// Linear-strain (LSE) or constant-strain (CSE) element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementMode {
    Linear,
    Constant,
}

impl ElementMode {
    pub fn has_slope(self) -> bool {
        matches!(self, ElementMode::Linear)
    }
}

/// Constitutive and geometric data of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct RodElement {
    pub length: f64,
    pub rest_strain: Twist,
    /// Symmetric positive definite 6x6 stiffness in the node frame.
    pub stiffness: Mat6,
    pub mode: ElementMode,
    pub dexp_order: usize,
}

/// `(Omega, mean strain, A^-1, J1, J2, J3)` at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementKinematics {
    pub omega: Twist,
    pub mean_strain: Twist,
    pub slope: Twist,
    pub magnus: Mat6,
    pub magnus_inv: Mat6,
    pub j1: Mat6,
    pub j2: Mat6,
    /// Absent for constant-strain elements.
    pub j3: Option<Mat6>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementResidual {
    pub r1: Twist,
    pub r2: Twist,
    pub r3: Option<Twist>,
}

/// Gauss–Newton tangent as a grid of 6x6 blocks, ordered `(a, b, slope)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementTangent {
    pub blocks: [[Mat6; 3]; 3],
    pub size: usize,
}

impl ElementTangent {
    pub fn block(&self, i: usize, j: usize) -> &Mat6 {
        assert!(i < self.size && j < self.size);
        &self.blocks[i][j]
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = 6 * self.size;
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..self.size {
            for j in 0..self.size {
                m.view_mut((6 * i, 6 * j), (6, 6)).copy_from(&self.blocks[i][j]);
            }
        }
        m
    }
}

impl RodElement {
    pub fn new(length: f64, rest_strain: Twist, stiffness: Mat6, mode: ElementMode) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(alloc::format!("element length must be positive, got {length}")));
        }
        if !rest_strain.iter().all(|x| x.is_finite()) {
            return Err(Error::Config("rest strain must be finite".into()));
        }
        Ok(Self {
            length,
            rest_strain,
            stiffness,
            mode,
            dexp_order: DEFAULT_DEXP_ORDER,
        })
    }

    pub fn with_dexp_order(mut self, order: usize) -> Self {
        self.dexp_order = order;
        self
    }

    fn effective_slope(&self, slope: &Twist) -> Twist {
        if self.mode.has_slope() {
            *slope
        } else {
            Twist::zeros()
        }
    }

    /// `mean + (s - h/2) slope` for `s` in `[0, h]`.
    pub fn strain_at(&self, mean: &Twist, slope: &Twist, s: f64) -> Result<Twist> {
        let h = self.length;
        if !(s >= 0.0 && s <= h) {
            return Err(Error::Domain(alloc::format!("arclength {s} outside [0, {h}]")));
        }
        Ok(mean + self.effective_slope(slope) * (s - 0.5 * h))
    }

    /// `A = h I - h^3/12 ad_slope`.
    pub fn magnus_operator(&self, slope: &Twist) -> Mat6 {
        let h = self.length;
        Mat6::identity() * h - ad(&self.effective_slope(slope)) * (h * h * h / 12.0)
    }

    /// Fourth-order Magnus twist of the element, `A mean`.
    pub fn integrated_twist(&self, mean: &Twist, slope: &Twist) -> Twist {
        self.magnus_operator(slope) * mean
    }

    /// Pose at arclength `s` from node `a`, using the same fourth-order Magnus
    /// expansion on `[0, s]`. At `s = h` this reproduces node `b`.
    pub fn pose_at(&self, g_a: &Pose, mean: &Twist, slope: &Twist, s: f64) -> Result<Pose> {
        let h = self.length;
        if !(s >= 0.0 && s <= h) {
            return Err(Error::Domain(alloc::format!("arclength {s} outside [0, {h}]")));
        }
        let slope = self.effective_slope(slope);
        let local_mean = mean + slope * (0.5 * s - 0.5 * h);
        let omega = local_mean * s - ad(&slope) * local_mean * (s * s * s / 12.0);
        Ok(*g_a * crate::liegroup::exp_se3(&omega))
    }

    /// Recovers the mean strain from the nodal poses and evaluates the strain
    /// Jacobians.
    pub fn recover_mean_strain(&self, g_a: &Pose, g_b: &Pose, slope: &Twist) -> Result<ElementKinematics> {
        let relative = g_a.inverse() * *g_b;
        let omega = log_se3(&relative).map_err(|e| match e {
            Error::NearBranchCut { angle } => Error::ElementTooCoarse { angle },
            other => other,
        })?;
        let slope = self.effective_slope(slope);
        let magnus = self.magnus_operator(&slope);
        let magnus_inv = if self.mode.has_slope() {
            let inv = magnus
                .try_inverse()
                .ok_or(Error::SlopeTooLarge { condition: f64::INFINITY })?;
            let condition = norm1(&magnus) * norm1(&inv);
            if !(condition < MAX_MAGNUS_CONDITION) {
                return Err(Error::SlopeTooLarge { condition });
            }
            inv
        } else {
            Mat6::identity() / self.length
        };
        let mean_strain = magnus_inv * omega;
        let (j1, j2, j3) = self.jacobians(&relative, &omega, &mean_strain, &magnus_inv)?;
        Ok(ElementKinematics {
            omega,
            mean_strain,
            slope,
            magnus,
            magnus_inv,
            j1,
            j2,
            j3,
        })
    }

    /// Variations of the mean strain with respect to right perturbations of
    /// the two nodes and to the slope:
    /// `J2 = A^-1 dexp_inv(-Omega)`, `J1 = -J2 Ad(exp(-Omega))`,
    /// `J3 = -h^3/12 A^-1 ad(mean)`.
    pub fn jacobians(
        &self,
        relative: &Pose,
        omega: &Twist,
        mean: &Twist,
        magnus_inv: &Mat6,
    ) -> Result<(Mat6, Mat6, Option<Mat6>)> {
        let d = dexp_inv(&(-omega), self.dexp_order)?;
        let j2 = magnus_inv * d;
        let j1 = -(j2 * relative.inverse().adjoint());
        let j3 = self.mode.has_slope().then(|| {
            let h = self.length;
            -(magnus_inv * ad(mean)) * (h * h * h / 12.0)
        });
        Ok((j1, j2, j3))
    }

    /// `1/2 h d^T K d + h^3/24 slope^T K slope` with `d = mean - rest`.
    pub fn energy(&self, kin: &ElementKinematics) -> f64 {
        let h = self.length;
        let d = kin.mean_strain - self.rest_strain;
        let k = &self.stiffness;
        0.5 * h * d.dot(&(k * d)) + h * h * h / 24.0 * kin.slope.dot(&(k * kin.slope))
    }

    pub fn residual(&self, kin: &ElementKinematics) -> ElementResidual {
        let h = self.length;
        let stress = self.stiffness * (kin.mean_strain - self.rest_strain) * h;
        ElementResidual {
            r1: kin.j1.transpose() * stress,
            r2: kin.j2.transpose() * stress,
            r3: kin
                .j3
                .map(|j3| j3.transpose() * stress + self.stiffness * kin.slope * (h * h * h / 12.0)),
        }
    }

    pub fn tangent(&self, kin: &ElementKinematics) -> ElementTangent {
        let h = self.length;
        let k = &self.stiffness;
        let mut blocks = [[Mat6::zeros(); 3]; 3];
        let js: [Option<&Mat6>; 3] = [Some(&kin.j1), Some(&kin.j2), kin.j3.as_ref()];
        let size = if kin.j3.is_some() { 3 } else { 2 };
        let kj: [Option<Mat6>; 3] = [
            Some(k * kin.j1 * h),
            Some(k * kin.j2 * h),
            kin.j3.map(|j| k * j * h),
        ];
        for i in 0..size {
            for j in i..size {
                let b = js[i].unwrap().transpose() * kj[j].unwrap();
                blocks[i][j] = b;
                blocks[j][i] = b.transpose();
            }
        }
        if size == 3 {
            blocks[2][2] += k * (h * h * h / 12.0);
        }
        // exact symmetry of the diagonal blocks
        for (i, row) in blocks.iter_mut().enumerate().take(size) {
            let b = row[i];
            row[i] = (b + b.transpose()) * 0.5;
        }
        ElementTangent { blocks, size }
    }
}

impl RodElement {
    /// Symmetric part of the central-difference Jacobian of the residual
    /// under right perturbations of the nodes and increments of the slope.
    /// Unlike [`RodElement::tangent`] it keeps the stress-dependent terms,
    /// which dominate when the element carries a large axial force.
    pub fn consistent_tangent(&self, g_a: &Pose, g_b: &Pose, slope: &Twist) -> Result<ElementTangent> {
        let h = self.length;
        let size = if self.mode.has_slope() { 3 } else { 2 };
        let residual = |da: &Twist, db: &Twist, ds: &Twist| -> Result<[Twist; 3]> {
            let kin = self.recover_mean_strain(&retract(g_a, da), &retract(g_b, db), &(slope + ds))?;
            let r = self.residual(&kin);
            Ok([r.r1, r.r2, r.r3.unwrap_or_else(Twist::zeros)])
        };
        let mut jac = [[Mat6::zeros(); 3]; 3];
        for j in 0..size {
            for c in 0..6 {
                let step = match (j, c < 3) {
                    (2, _) => FD_STEP / (h * h),
                    (_, true) => FD_STEP,
                    (_, false) => FD_STEP * h,
                };
                let mut d = [Twist::zeros(); 3];
                d[j][c] = step;
                let plus = residual(&d[0], &d[1], &d[2])?;
                d[j][c] = -step;
                let minus = residual(&d[0], &d[1], &d[2])?;
                for i in 0..size {
                    jac[i][j].set_column(c, &((plus[i] - minus[i]) / (2.0 * step)));
                }
            }
        }
        let mut blocks = [[Mat6::zeros(); 3]; 3];
        for i in 0..size {
            for j in 0..size {
                blocks[i][j] = (jac[i][j] + jac[j][i].transpose()) * 0.5;
            }
        }
        Ok(ElementTangent { blocks, size })
    }
}

/// Relative central-difference step of [`RodElement::consistent_tangent`].
const FD_STEP: f64 = 1e-6;

fn norm1(m: &Mat6) -> f64 {
    (0..6)
        .map(|j| m.column(j).iter().map(|x| math::abs(*x)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Constant rest strain `log(g_a0^-1 g_b0) / h` of an element between two
/// initial poses.
pub fn rest_strain_from_poses(g_a0: &Pose, g_b0: &Pose, length: f64) -> Result<Twist> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::Config(alloc::format!("element length must be positive, got {length}")));
    }
    let omega = log_se3(&(g_a0.inverse() * *g_b0)).map_err(|e| match e {
        Error::NearBranchCut { angle } => Error::RestGeometryTooCoarse { angle },
        other => other,
    })?;
    Ok(omega / length)
}

/// True when a rest strain has no stretch, i.e. the two rest poses share
/// their position and the element has no defined axis.
pub fn is_degenerate_rest_strain(xi0: &Twist) -> bool {
    crate::liegroup::linear(xi0).norm() < 1e-12
}
