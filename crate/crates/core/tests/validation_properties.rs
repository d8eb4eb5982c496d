use cosserat_core::liegroup::{exp_se3, Mat6, Pose, Twist};
use cosserat_core::validation::{
    displacement_error, energy_error, fit_convergence_order, max_displacement, CenterlineSample, StrainField,
    StrainSegment,
};
use nalgebra::Vector3;
use proptest::prelude::*;

fn curve(n: usize, f: impl Fn(f64) -> Vector3<f64>) -> Vec<CenterlineSample> {
    (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            CenterlineSample {
                s,
                pose: Pose::from_translation(f(s)),
                strain: Twist::zeros(),
                internal_wrench: Twist::zeros(),
            }
        })
        .collect()
}

fn moved(samples: &[CenterlineSample], g: &Pose) -> Vec<CenterlineSample> {
    samples
        .iter()
        .map(|x| CenterlineSample {
            pose: *g * x.pose,
            ..*x
        })
        .collect()
}

fn field(values: &[f64], breaks: usize, k: Mat6) -> StrainField {
    StrainField::new(
        (0..breaks)
            .map(|i| StrainSegment {
                start: i as f64 / breaks as f64,
                end: (i + 1) as f64 / breaks as f64,
                strain_start: Twist::repeat(values[i % values.len()]),
                strain_end: Twist::from_fn(|r, _| values[(i + r + 1) % values.len()]),
                stiffness: k,
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn displacement_error_is_invariant_under_rigid_motion(
        a in -1.0..1.0f64, b in -1.0..1.0f64, c in -0.5..0.5f64,
        motion in prop::array::uniform6(-2.0..2.0f64),
        n in 20usize..80,
    ) {
        let rest = curve(201, |s| Vector3::new(s, 0.0, 0.0));
        let reference = curve(201, |s| Vector3::new(s, a * s * s, b * s * s * s));
        let candidate = curve(n, |s| Vector3::new(s + c * 0.01 * s, a * s * s, b * s * s * s + 0.001 * c));
        let u = max_displacement(&reference, &rest).unwrap();
        prop_assume!(u > 1e-3);
        let e = displacement_error(&candidate, &reference, u).unwrap();
        let g = exp_se3(&Twist::from(motion));
        let (mr, mc, mrest) = (moved(&reference, &g), moved(&candidate, &g), moved(&rest, &g));
        let um = max_displacement(&mr, &mrest).unwrap();
        let em = displacement_error(&mc, &mr, um).unwrap();
        prop_assert!((e - em).abs() <= 1e-12 * e.max(1e-3), "{e} vs {em}");
    }

    #[test]
    fn energy_error_is_symmetric(
        va in prop::collection::vec(-1.0..1.0f64, 3..9),
        vb in prop::collection::vec(-1.0..1.0f64, 3..9),
        na in 1usize..12, nb in 1usize..12,
    ) {
        let k = Mat6::from_diagonal(&Twist::new(0.2, 0.3, 0.3, 1000.0, 800.0, 800.0));
        let (a, b) = (field(&va, na, k), field(&vb, nb, k));
        let (ab, ba) = (energy_error(&a, &b).unwrap(), energy_error(&b, &a).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1e-300), "{ab} vs {ba}");
    }

    #[test]
    fn planted_slopes_are_recovered(p in 1.0..6.0f64, scale in -3.0..3.0f64, points in 4usize..9) {
        let counts: Vec<usize> = (0..points).map(|i| 1usize << i).collect();
        let errors: Vec<f64> = counts.iter().map(|n| 10f64.powf(scale) * (*n as f64).powf(-p)).collect();
        let study = fit_convergence_order(&counts, &errors).unwrap();
        prop_assert!((study.order - p).abs() < 1e-8, "{} vs {p}", study.order);
    }
}
