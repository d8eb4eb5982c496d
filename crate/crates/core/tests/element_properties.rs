use cosserat_core::element::{ElementKinematics, ElementMode, RodElement, SectionStiffness};
use cosserat_core::liegroup::{exp_se3, hat, log_se3, vee, Mat6};
use cosserat_core::validation::quadrature::GaussLegendre;
use cosserat_core::{Pose, Twist};
use nalgebra::Matrix4;
use proptest::prelude::*;

fn twist_in(scale: f64) -> impl Strategy<Value = Twist> {
    prop::array::uniform6(-scale..scale).prop_map(|a| Twist::from_row_slice(&a))
}

fn element(h: f64, mode: ElementMode) -> RodElement {
    let k = SectionStiffness::new([0.4, 0.9, 0.6, 40.0, 15.0, 25.0]).unwrap();
    RodElement::new(h, Twist::new(0.0, 0.0, 0.1, 1.0, 0.0, 0.0), k.matrix(), mode).unwrap()
}

fn close(a: &Mat6, b: &Mat6, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm())
}

fn kin(e: &RodElement, ga: &Pose, gb: &Pose, beta: &Twist) -> ElementKinematics {
    e.recover_mean_strain(ga, gb, beta).unwrap()
}

// Relative pose of the exact flow g' = g hat(mean + (s - h/2) beta) over
// [0, h], by classical RK4 on 4x4 matrices with many substeps.
fn exact_flow(h: f64, mean: &Twist, beta: &Twist) -> Pose {
    let n = 400;
    let ds = h / n as f64;
    let f = |s: f64, g: &Matrix4<f64>| g * hat(&(mean + beta * (s - 0.5 * h)));
    let mut g = Matrix4::identity();
    for i in 0..n {
        let s = i as f64 * ds;
        let k1 = f(s, &g);
        let k2 = f(s + 0.5 * ds, &(g + k1 * (0.5 * ds)));
        let k3 = f(s + 0.5 * ds, &(g + k2 * (0.5 * ds)));
        let k4 = f(s + ds, &(g + k3 * ds));
        g += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (ds / 6.0);
    }
    let mut pose = Pose::from_matrix_unchecked(&g);
    // re-orthonormalize the rotation
    let svd = pose.rotation.svd(true, true);
    pose.rotation = svd.u.unwrap() * svd.v_t.unwrap();
    pose
}

// Two-moment fourth-order Magnus twist from 64-point quadrature.
fn magnus_oracle(h: f64, mean: &Twist, beta: &Twist) -> Twist {
    let rule = GaussLegendre::new(64);
    let mut m0 = Matrix4::zeros();
    let mut m1 = Matrix4::zeros();
    for (s, w) in rule.mapped(0.0, h) {
        let x = hat(&(mean + beta * (s - 0.5 * h)));
        m0 += x * w;
        m1 += x * (w * (s - 0.5 * h) / h);
    }
    vee(&(m0 - (m1 * m0 - m0 * m1))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objectivity(
        g0 in twist_in(2.0), ga in twist_in(1.5), dmean in twist_in(0.4), beta in twist_in(0.5),
        h in 0.1f64..1.0,
    ) {
        let e = element(h, ElementMode::Linear);
        let ga = exp_se3(&ga);
        let gb = ga * exp_se3(&e.integrated_twist(&(e.rest_strain + dmean), &beta));
        let g0 = exp_se3(&g0);
        let k = kin(&e, &ga, &gb, &beta);
        let k0 = kin(&e, &(g0 * ga), &(g0 * gb), &beta);
        prop_assert!((k.mean_strain - k0.mean_strain).norm() < 1e-11 * (1.0 + k.mean_strain.norm()));
        prop_assert!((k.omega - k0.omega).norm() < 1e-11 * (1.0 + k.omega.norm()));
        let (u, u0) = (e.energy(&k), e.energy(&k0));
        prop_assert!((u - u0).abs() < 1e-11 * (1.0 + u));
        let (r, r0) = (e.residual(&k), e.residual(&k0));
        let scale = 1.0 + r.r1.norm() + r.r2.norm();
        prop_assert!((r.r1 - r0.r1).norm() < 1e-11 * scale);
        prop_assert!((r.r2 - r0.r2).norm() < 1e-11 * scale);
        prop_assert!((r.r3.unwrap() - r0.r3.unwrap()).norm() < 1e-11 * scale);
        let (t, t0) = (e.tangent(&k), e.tangent(&k0));
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!(close(t.block(i, j), t0.block(i, j), 1e-11));
            }
        }
    }

    #[test]
    fn constant_mode_is_linear_mode_without_slope(
        ga in twist_in(1.5), dmean in twist_in(0.5), beta in twist_in(1.0), h in 0.1f64..1.0,
    ) {
        let lse = element(h, ElementMode::Linear);
        let cse = element(h, ElementMode::Constant);
        let ga = exp_se3(&ga);
        let gb = ga * exp_se3(&((lse.rest_strain + dmean) * h));
        let kl = kin(&lse, &ga, &gb, &Twist::zeros());
        // a stray slope must be ignored by the constant-strain element
        let kc = kin(&cse, &ga, &gb, &beta);
        prop_assert!((kl.mean_strain - kc.mean_strain).norm() < 1e-14 * (1.0 + kl.mean_strain.norm()));
        prop_assert!((kc.omega - kc.mean_strain * h).norm() < 1e-14 * (1.0 + kc.omega.norm()));
        prop_assert!(kc.j3.is_none());
        prop_assert!(close(&kl.j1, &kc.j1, 1e-14) && close(&kl.j2, &kc.j2, 1e-14));
        prop_assert!((lse.energy(&kl) - cse.energy(&kc)).abs() < 1e-14 * (1.0 + lse.energy(&kl)));
        let (rl, rc) = (lse.residual(&kl), cse.residual(&kc));
        prop_assert!(rc.r3.is_none());
        prop_assert!((rl.r1 - rc.r1).norm() < 1e-13 * (1.0 + rl.r1.norm()));
        prop_assert!((rl.r2 - rc.r2).norm() < 1e-13 * (1.0 + rl.r2.norm()));
        let (tl, tc) = (lse.tangent(&kl), cse.tangent(&kc));
        prop_assert_eq!(tc.size, 2);
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!(close(tl.block(i, j), tc.block(i, j), 1e-13));
            }
        }
    }

    #[test]
    fn energy_gradient_consistency(
        ga in twist_in(1.5), dmean in twist_in(0.4), beta in twist_in(0.5), h in 0.1f64..1.0,
    ) {
        let e = element(h, ElementMode::Linear);
        let ga = exp_se3(&ga);
        let gb = ga * exp_se3(&e.integrated_twist(&(e.rest_strain + dmean), &beta));
        let k = kin(&e, &ga, &gb, &beta);
        let r = e.residual(&k);
        let grad: Vec<f64> = r.r1.iter().chain(r.r2.iter()).chain(r.r3.unwrap().iter()).copied().collect();
        let gnorm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
        let t = 1e-6;
        let energy_at = |dir: usize, step: f64| {
            let mut d = Twist::zeros();
            d[dir % 6] = step;
            let k = match dir / 6 {
                0 => kin(&e, &(ga * exp_se3(&d)), &gb, &beta),
                1 => kin(&e, &ga, &(gb * exp_se3(&d)), &beta),
                _ => kin(&e, &ga, &gb, &(beta + d)),
            };
            e.energy(&k)
        };
        for dir in 0..18 {
            let fd = (energy_at(dir, t) - energy_at(dir, -t)) / (2.0 * t);
            prop_assert!(
                (fd - grad[dir]).abs() < 1e-5 * gnorm.max(1e-3),
                "direction {}: fd {} vs {}", dir, fd, grad[dir]
            );
        }
    }

    #[test]
    fn energy_is_positive_away_from_rest(
        dmean in twist_in(0.5), beta in twist_in(0.5), h in 0.05f64..1.0,
    ) {
        let e = element(h, ElementMode::Linear);
        let gb = exp_se3(&e.integrated_twist(&(e.rest_strain + dmean), &beta));
        let k = kin(&e, &Pose::identity(), &gb, &beta);
        let u = e.energy(&k);
        prop_assert!(u >= 0.0);
        if dmean.norm() + beta.norm() > 1e-6 {
            prop_assert!(u > 0.0);
        }
        let rest = exp_se3(&(e.rest_strain * h));
        let k = kin(&e, &Pose::identity(), &rest, &Twist::zeros());
        prop_assert!(e.energy(&k) < 1e-24);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn magnus_defect_is_fifth_order(mean in twist_in(1.0), beta in twist_in(2.0)) {
        prop_assume!(beta.norm() > 0.3);
        let hs = [0.4, 0.2, 0.1, 0.05];
        let mut pts = Vec::new();
        for &h in &hs {
            let exact = log_se3(&exact_flow(h, &mean, &beta)).unwrap();
            let defect = (exact - magnus_oracle(h, &mean, &beta)).norm();
            pts.push((h.ln(), defect.ln()));
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        prop_assert!(slope >= 4.5, "fitted slope {}", slope);
    }
}
