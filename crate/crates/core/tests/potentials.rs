use dtnlab::potentials::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn bump(center: [f64; 2], radius: f64, height: f64) -> Potential {
    Potential::bump_sum(vec![BumpSpec { center, radius, height }], 0.5).unwrap()
}

#[test]
fn evaluation_examples() {
    let q = Potential::constant(2.0);
    assert_eq!(q.eval([0.3, 0.4]).unwrap(), Complex64::new(2.0, 0.0));
    let b = bump([0.1, 0.2], 0.2, 1.0);
    assert_eq!(b.eval([0.1, 0.2]).unwrap().re, 1.0);
    let shifted = b.clone().with_shift(1.0);
    assert_eq!(shifted.eval([0.9 / 2f64.sqrt(), 0.9 / 2f64.sqrt()]).unwrap(), Complex64::new(0.0, 1.0));
    assert!(b.eval([1.0, 0.5]).is_err());
}

#[test]
fn bumps_must_fit_inside_r0() {
    let r = Potential::bump_sum(vec![BumpSpec { center: [0.4, 0.0], radius: 0.2, height: 1.0 }], 0.5);
    assert!(matches!(r, Err(dtnlab::LabError::Geometry(_))));
}

#[test]
fn family_of_three() {
    let f = build_discrete_family(0.1, 1.0, 0.5, 3).unwrap();
    assert_eq!(f.members.len(), 8);
    for a in 0..8 {
        for b in (a + 1)..8 {
            let d = f
                .centers
                .iter()
                .map(|c| (f.members[a].real_at(c[0], c[1]) - f.members[b].real_at(c[0], c[1])).abs())
                .fold(0.0, f64::max);
            assert!(d >= 0.1, "{a} {b}: {d}");
        }
    }
}

#[test]
fn family_of_one_and_eight() {
    let f = build_discrete_family(0.05, 1.0, 0.5, 1).unwrap();
    assert_eq!(f.members.len(), 2);
    assert!(f.members[0].is_zero() || f.members[0].sup_real() == 0.0);
    assert_eq!(f.center_distance(0, 1), 0.05);
    assert_eq!(build_discrete_family(0.05, 1.0, 0.5, 8).unwrap().members.len(), 256);
}

#[test]
fn family_rejects_theta_outside_window() {
    assert!(build_discrete_family(0.2, 1.0, 0.5, 2).is_err());
    assert!(build_discrete_family(0.01, 1.5, 0.5, 2).is_err());
}

#[test]
fn class_membership_on_samples() {
    let theta = 0.01;
    let f = build_discrete_family(theta, 1.0, 0.5, 6).unwrap();
    let pts: Vec<[f64; 2]> = (0..10_000)
        .map(|i| {
            let r = ((i % 100) as f64 + 0.5) / 100.0;
            let a = (i / 100) as f64 * std::f64::consts::TAU / 100.0;
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    for q in &f.members {
        for p in &pts {
            let v = q.real_at(p[0], p[1]);
            assert!((0.0..=theta).contains(&v));
            if p[0].hypot(p[1]) > 0.5 {
                assert_eq!(v, 0.0);
            }
        }
    }
}

#[test]
fn holder_estimates() {
    let g = HolderGrid { n: 201, rho: 0.05 };
    assert_eq!(estimate_holder_norm(&Potential::zero(), 1.0, g), 0.0);
    assert!((estimate_holder_norm(&Potential::constant(-0.7), 0.5, g) - 0.7).abs() < 1e-15);
    let (theta, rho) = (0.01, 0.2);
    let q = bump([0.0, 0.0], rho, theta);
    for alpha in [0.5, 1.0] {
        let est = estimate_holder_norm(&q, alpha, g);
        let upper = theta * mollifier_constant(alpha) / rho.powf(alpha);
        assert!(est <= upper * (1.0 + 1e-9), "α={alpha}: {est} > {upper}");
    }
}

#[test]
fn dichotomy_example() {
    let t = dichotomy_thresholds(1e-6, 1.0).unwrap();
    let log_term = 3e-3 * (1000.0f64 / 3.0).ln();
    let exp_term = 2.0 / 3.0 * 1e-3 * (-1000.0f64 / 3.0).exp();
    assert!((t.upper - log_term).abs() < 1e-15);
    assert!((t.lower - exp_term).abs() <= 1e-12 * exp_term);
    assert!(!t.degenerate);
    assert!(dichotomy_thresholds(0.2, 1.0).unwrap().degenerate);
}

#[test]
fn default_scan_families_meet_cardinality_report() {
    for theta in [1e-2, 1e-3, 1e-4] {
        let f = build_discrete_family(theta, 1.0, 0.5, 6).unwrap();
        assert_eq!(f.log_cardinality, 6.0 * std::f64::consts::LN_2);
        assert!(f.log_cardinality_bound.is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thresholds_ordered(theta in 1e-8f64..0.99, alpha in 0.1f64..2.0) {
        let t = dichotomy_thresholds(theta, alpha).unwrap();
        prop_assert!(t.lower <= t.upper);
    }

    #[test]
    fn separation_is_exactly_theta(theta in 1e-5f64..0.1, n in 1usize..6, a in 0usize..32, b in 0usize..32) {
        let f = build_discrete_family(theta, 1.0, 0.5, n).unwrap();
        let (a, b) = (a % f.members.len(), b % f.members.len());
        prop_assume!(a != b);
        prop_assert_eq!(f.center_distance(a, b), theta);
    }

    #[test]
    fn layout_fits_inside_r0(r0 in 0.1f64..0.95, n in 1usize..20) {
        let (rho, centers) = bump_layout(r0, n).unwrap();
        prop_assert_eq!(centers.len(), n);
        for (i, c) in centers.iter().enumerate() {
            prop_assert!(c[0].hypot(c[1]) + rho <= r0 + 1e-12);
            for d in &centers[i + 1..] {
                prop_assert!((c[0] - d[0]).hypot(c[1] - d[1]) >= 2.0 * rho - 1e-12);
            }
        }
    }
}
