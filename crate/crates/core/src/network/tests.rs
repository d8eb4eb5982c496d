use super::*;
use crate::liegroup::exp_se3;
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::vec::Vec;

fn material() -> SectionStiffness {
    SectionStiffness::new([0.2, 0.3, 0.25, 1000.0, 800.0, 900.0]).unwrap()
}

fn clamp(node: usize, pose: Pose) -> Constraint {
    Constraint {
        node,
        kind: ConstraintKind::Clamped,
        target: pose,
    }
}

pub(crate) fn rod(n: usize, length: f64, mode: ElementMode) -> NetworkScene {
    let nodes: Vec<Pose> = (0..=n)
        .map(|i| Pose::from_translation(Vector3::new(length * i as f64 / n as f64, 0.0, 0.0)))
        .collect();
    NetworkScene {
        constraints: vec![clamp(0, nodes[0])],
        elements: (0..n)
            .map(|i| ElementSpec {
                nodes: [i, i + 1],
                material: 0,
                mode,
                rest_strain: None,
            })
            .collect(),
        nodes,
        materials: vec![material()],
        loads: Vec::new(),
        solver: SolverConfig::default(),
    }
}

// Triangle loop with a tail: exercises cycles, a junction and mixed modes.
fn frame_scene() -> NetworkScene {
    let p = |x: f64, y: f64, z: f64| Pose::from_translation(Vector3::new(x, y, z));
    let nodes = vec![p(0.0, 0.0, 0.0), p(0.5, 0.0, 0.0), p(0.25, 0.4, 0.1), p(0.5, -0.4, 0.2), p(0.9, -0.5, 0.2)];
    let el = |a, b, mode| ElementSpec {
        nodes: [a, b],
        material: 0,
        mode,
        rest_strain: None,
    };
    NetworkScene {
        constraints: vec![clamp(0, nodes[0])],
        nodes,
        elements: vec![
            el(0, 1, ElementMode::Linear),
            el(1, 2, ElementMode::Constant),
            el(2, 0, ElementMode::Linear),
            el(1, 3, ElementMode::Linear),
            el(3, 4, ElementMode::Linear),
        ],
        materials: vec![material()],
        loads: vec![Load {
            node: 4,
            wrench: Twist::new(0.0, 0.0, 0.0, 0.3, -0.2, 0.5),
            frame: LoadFrame::Dead,
            ramp: Ramp::Single,
        }],
        solver: SolverConfig::default(),
    }
}

fn random_state(net: &Network, rng: &mut ChaCha8Rng, scale: f64) -> GlobalState {
    let mut s = net.rest_state();
    for (n, g) in s.poses.iter_mut().enumerate() {
        if net.dofs().node_block(n).is_some() {
            *g = *g * exp_se3(&Twist::from_fn(|_, _| rng.gen_range(-scale..scale)));
        }
    }
    for (e, b) in s.slopes.iter_mut().enumerate() {
        if net.dofs().slope_block(e).is_some() {
            *b = Twist::from_fn(|_, _| rng.gen_range(-scale..scale));
        }
    }
    s
}

// Elastic energy minus the work potential of dead forces (no moments).
fn total_potential(net: &Network, s: &GlobalState) -> f64 {
    let mut u = net.energy(s).unwrap();
    for l in &net.scene().loads {
        u -= linear(&l.wrench).dot(&s.poses[l.node].position);
    }
    u
}

#[test]
fn dof_counts() {
    let net = Network::new(rod(4, 1.0, ElementMode::Constant)).unwrap();
    assert_eq!(net.dofs().len(), 24);
    assert_eq!(unconstrained_dof_count(net.scene()), 30);
    let net = Network::new(rod(2, 1.0, ElementMode::Linear)).unwrap();
    assert_eq!(unconstrained_dof_count(net.scene()), 30);
    assert_eq!(net.dofs().len(), 2 * 6 + 2 * 6);
    // nodes first, then slopes
    assert_eq!(net.dofs().node_offset(1), Some(0));
    assert_eq!(net.dofs().node_offset(2), Some(6));
    assert_eq!(net.dofs().slope_offset(0), Some(12));
    assert_eq!(net.dofs().node_offset(0), None);
    assert_eq!(net.dofs().describe(14), "strain slope of element 0, component 2");
}

#[test]
fn external_wrench_examples() {
    let mut load = Load {
        node: 0,
        wrench: Twist::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0),
        frame: LoadFrame::Dead,
        ramp: Ramp::Single,
    };
    let id = Pose::identity();
    assert_eq!(external_wrench(&load, &id, 0.0), Twist::zeros());
    assert_eq!(external_wrench(&load, &id, 1.0), load.wrench);
    let rx = Pose::new(Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0), Vector3::zeros()).unwrap();
    let w = external_wrench(&load, &rx, 1.0);
    assert!((w - Twist::new(0.0, 0.0, 0.0, 0.0, 1.0, 0.0)).norm() < 1e-15);
    load.frame = LoadFrame::Follower;
    assert_eq!(external_wrench(&load, &rx, 0.5), load.wrench * 0.5);
}

#[test]
fn ramp_factors() {
    assert_eq!(Ramp::Single.factor(1), 1.0);
    assert_eq!(Ramp::Linear(10).factor(3), 0.3);
    assert!((Ramp::Sine(10).factor(5) - (std::f64::consts::PI / 4.0).sin()).abs() < 1e-15);
    assert_eq!(Ramp::Linear(4).factor(9), 1.0);
}

#[test]
fn rest_residual_vanishes() {
    let net = Network::new(frame_scene()).unwrap();
    let rest = net.rest_state();
    let a = net.assemble(&rest, &[0.0]).unwrap();
    assert!(a.residual.norm() < 1e-12);
    assert!(a.energy.abs() < 1e-20);
}

#[test]
fn free_end_balance() {
    let mut scene = rod(1, 0.5, ElementMode::Linear);
    let w = Twist::new(0.1, 0.0, 0.2, 0.0, 0.3, 0.0);
    scene.loads.push(Load {
        node: 1,
        wrench: w,
        frame: LoadFrame::Follower,
        ramp: Ramp::Single,
    });
    let net = Network::new(scene).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = random_state(&net, &mut rng, 0.2);
    let r = net.residual(&s, &[1.0]).unwrap();
    let kin = net.kinematics(&s, 0).unwrap();
    let r2 = net.elements()[0].residual(&kin).r2;
    assert!((r.rows(0, 6) - (r2 - w)).norm() < 1e-14);
}

#[test]
fn residual_is_gradient_of_total_potential() {
    let net = Network::new(frame_scene()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = random_state(&net, &mut rng, 0.15);
    let r = net.residual(&s, &[1.0]).unwrap();
    let t = 1e-6;
    for _ in 0..50 {
        let d = DVector::from_fn(net.dofs().len(), |_, _| rng.gen_range(-1.0..1.0)).normalize();
        let plus = total_potential(&net, &net.apply_update(&s, &d, t));
        let minus = total_potential(&net, &net.apply_update(&s, &d, -t));
        let fd = (plus - minus) / (2.0 * t);
        let exact = d.dot(&r);
        assert!((fd - exact).abs() < 1e-5 * r.norm(), "fd {fd} vs {exact}");
    }
}

#[test]
fn tangent_is_symmetric_and_matches_element_blocks() {
    let net = Network::new(frame_scene()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = random_state(&net, &mut rng, 0.2);
    let a = net.assemble(&s, &[1.0]).unwrap();
    let k = a.tangent.to_dense(net.pattern());
    assert!((&k - k.transpose()).norm() < 1e-9 * k.norm());
    assert!((a.residual - net.residual(&s, &[1.0]).unwrap()).norm() < 1e-12);

    // dense reference: scatter every element tangent through gather/scatter
    let n = net.dofs().len();
    let mut reference = nalgebra::DMatrix::zeros(n, n);
    for col in 0..n {
        let mut unit = DVector::zeros(n);
        unit[col] = 1.0;
        let mut out = DVector::zeros(n);
        for e in 0..net.elements().len() {
            let t = net.elements()[e].tangent(&net.kinematics(&s, e).unwrap());
            let x = net.gather(e, &unit);
            let mut y = [Twist::zeros(); 3];
            for i in 0..t.size {
                for j in 0..t.size {
                    y[i] += t.blocks[i][j] * x[j];
                }
            }
            net.scatter_add(e, &y, &mut out);
        }
        reference.set_column(col, &out);
    }
    assert!((&k - &reference).norm() < 1e-10 * reference.norm());
}

#[test]
fn scatter_gather_adjointness() {
    let net = Network::new(frame_scene()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for e in 0..net.elements().len() {
        let x = [0, 1, 2].map(|_| Twist::from_fn(|_, _| rng.gen_range(-1.0..1.0)));
        let y = DVector::from_fn(net.dofs().len(), |_, _| rng.gen_range(-1.0..1.0));
        let mut sx = DVector::zeros(net.dofs().len());
        net.scatter_add(e, &x, &mut sx);
        let g = net.gather(e, &y);
        // gathered slots without unknowns are zero, so the pairing is exact
        let lhs = sx.dot(&y);
        let rhs: f64 = x.iter().zip(&g).map(|(a, b)| a.dot(b)).sum();
        assert!((lhs - rhs).abs() <= 1e-14 * (1.0 + lhs.abs()));
    }
}

#[test]
fn residual_is_sum_of_element_contributions() {
    let net = Network::new(frame_scene()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = random_state(&net, &mut rng, 0.2);
    let mut sum = DVector::zeros(net.dofs().len());
    for e in 0..net.elements().len() {
        let r = net.elements()[e].residual(&net.kinematics(&s, e).unwrap());
        net.scatter_add(e, &[r.r1, r.r2, r.r3.unwrap_or_else(Twist::zeros)], &mut sum);
    }
    let r = net.residual(&s, &[0.0]).unwrap();
    assert!((r - sum).norm() < 1e-13);
}

#[test]
fn apply_update_examples() {
    let net = Network::new(frame_scene()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let s = random_state(&net, &mut rng, 0.2);
    let zero = DVector::zeros(net.dofs().len());
    assert_eq!(net.apply_update(&s, &zero, 1.0), s);
    let d = DVector::from_fn(net.dofs().len(), |_, _| rng.gen_range(-1.0..1.0));
    assert_eq!(net.apply_update(&s, &d, 0.0), s);
    let alpha = 1e-6;
    let once = net.apply_update(&s, &d, alpha);
    let twice = net.apply_update(&net.apply_update(&s, &d, alpha / 2.0), &d, alpha / 2.0);
    for (a, b) in once.poses.iter().zip(&twice.poses) {
        assert!((a.matrix() - b.matrix()).norm() < 1e-10);
    }
    for (a, b) in once.slopes.iter().zip(&twice.slopes) {
        assert!((a - b).norm() < 1e-15);
    }
    assert_eq!(once.poses[0], s.poses[0]);
}

#[test]
fn prescribe_step_examples() {
    let mut scene = rod(2, 1.0, ElementMode::Linear);
    let theta = 1.2;
    let start = scene.nodes[2];
    let target = start * exp_se3(&Twist::new(theta, 0.0, 0.0, 0.0, 0.0, 0.0));
    scene.constraints.push(Constraint {
        node: 2,
        kind: ConstraintKind::Prescribed,
        target,
    });
    let net = Network::new(scene).unwrap();
    let s = net.rest_state();
    assert_eq!(s.poses[2], start);
    let end = net.prescribe_step(&s, 1.0);
    assert!((end.poses[2].matrix() - target.matrix()).norm() < 1e-12);
    let mid = net.prescribe_step(&s, 0.5);
    assert!(((start.inverse() * mid.poses[2]).rotation_angle() - theta / 2.0).abs() < 1e-12);
    assert_eq!(mid.poses[1], s.poses[1]);

    let mut scene = rod(1, 1.0, ElementMode::Linear);
    scene.constraints.push(Constraint {
        node: 1,
        kind: ConstraintKind::Prescribed,
        target: exp_se3(&Twist::new(0.0, std::f64::consts::PI, 0.0, 0.0, 0.0, 0.0)),
    });
    assert!(matches!(Network::new(scene), Err(Error::PrescribedBranchCut { node: 1 })));
}

#[test]
fn scene_validation() {
    let mut s = rod(2, 1.0, ElementMode::Linear);
    s.constraints.clear();
    assert!(matches!(Network::new(s), Err(Error::Scene(_))));

    let mut s = rod(2, 1.0, ElementMode::Linear);
    s.constraints.push(clamp(0, s.nodes[0]));
    assert!(matches!(Network::new(s), Err(Error::Scene(_))));

    let mut s = rod(2, 1.0, ElementMode::Linear);
    s.nodes.push(Pose::identity());
    assert!(matches!(Network::new(s), Err(Error::Scene(_))));

    let mut s = rod(2, 1.0, ElementMode::Linear);
    s.elements[1].nodes = [1, 7];
    assert!(matches!(Network::new(s), Err(Error::Scene(_))));

    // second, unconstrained rod
    let mut s = rod(1, 1.0, ElementMode::Linear);
    s.nodes.push(Pose::from_translation(Vector3::new(0.0, 1.0, 0.0)));
    s.nodes.push(Pose::from_translation(Vector3::new(1.0, 1.0, 0.0)));
    s.elements.push(ElementSpec {
        nodes: [2, 3],
        material: 0,
        mode: ElementMode::Linear,
        rest_strain: None,
    });
    assert!(matches!(Network::new(s), Err(Error::Scene(_))));

    // coincident nodes
    let mut s = rod(1, 1.0, ElementMode::Linear);
    s.nodes[1] = s.nodes[0];
    assert!(matches!(Network::new(s), Err(Error::Scene(_))));
}

#[test]
fn curved_junctions_are_rejected() {
    let mut s = frame_scene();
    s.elements[0].rest_strain = Some(Twist::new(0.0, 0.0, 0.3, 1.0, 0.0, 0.0));
    match Network::new(s) {
        Err(Error::Scene(msg)) => assert!(msg.contains("junction")),
        other => panic!("expected a junction error, got {other:?}"),
    }
}

#[test]
fn misaligned_frames_use_rotated_stiffness() {
    // rod along y with identity node frames
    let nodes: Vec<Pose> = (0..3).map(|i| Pose::from_translation(Vector3::new(0.0, 0.5 * i as f64, 0.0))).collect();
    let mut s = rod(2, 1.0, ElementMode::Linear);
    s.constraints[0].target = nodes[0];
    s.nodes = nodes;
    let net = Network::new(s).unwrap();
    let e = &net.elements()[0];
    assert!((e.rest_strain - Twist::new(0.0, 0.0, 0.0, 0.0, 1.0, 0.0)).norm() < 1e-15);
    assert!((e.stiffness[(4, 4)] - 1000.0).abs() < 1e-9);
    assert!((e.length - 0.5).abs() < 1e-15);
}

#[test]
fn chains_of_network() {
    let net = Network::new(frame_scene()).unwrap();
    let chains = net.chains();
    let covered: usize = chains.iter().map(|c| c.elements.len()).sum();
    assert_eq!(covered, 5);
}
