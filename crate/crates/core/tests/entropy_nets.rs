use dtnlab::dtn_map::{phi_factor, GammaMatrix, GammaProvenance};
use dtnlab::entropy_nets::*;
use dtnlab::harmonics::{indices, HarmonicMatrix};
use dtnlab::potentials::build_discrete_family;
use dtnlab::special::kappa1;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn profile(l: u64, tau: f64, r0: f64, a: f64) -> f64 {
    (1.0 + l as f64).powf(-tau) * (r0.powf(l as f64) + a)
}

/// First ℓ from which the decay inequality holds for the next 200 indices.
fn brute_ell_star(delta: f64, phi: f64, kappa2: f64, qn: f64, tau: f64, r0: f64, c: f64) -> u64 {
    let thr = delta / (4.0 * 2f64.sqrt() * c * phi);
    (0..200_000u64)
        .find(|&l| (l..l + 200).all(|k| profile(k, tau, r0, qn + kappa2) <= thr))
        .unwrap()
}

fn synthetic(m1: HarmonicMatrix, m2: HarmonicMatrix) -> GammaMatrix {
    GammaMatrix {
        entries: HarmonicMatrix::from_data(m1.m_max, &m1.data + &m2.data).unwrap(),
        provenance: GammaProvenance::VolumeIntegral,
        l_form: None,
        m1: Some(m1),
        m2: Some(m2),
        kappa2: 1.0,
        q_ref_shift: 1.0,
    }
}

fn random_matrix(m_max: usize, amp: f64, rng: &mut ChaCha8Rng) -> HarmonicMatrix {
    let mut h = HarmonicMatrix::zeros(m_max);
    for d in indices(m_max) {
        for e in indices(m_max) {
            h.set(d, e, Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)));
        }
    }
    h
}

#[test]
fn ell_star_matches_brute_force() {
    let cases = [
        (0.5, 1.0, 0.05, 0.0, 1.0, 0.5, 4.0),
        (5.0, phi_factor(1.0, 1.0, 1.0), 1.0, 1.0, 1.0, 0.5, 4.0),
        (0.1, 3.0, 0.2, 1.0, 2.0, 0.7, 1.0),
        (1e-3, 1.0, 0.0, 0.0, 0.5, 0.9, 1.0),
        (0.3, 2.0, 4.0, 1.0, 1.5, 0.3, 2.0),
    ];
    for (delta, phi, k2, qn, tau, r0, c) in cases {
        let e = ell_star(delta, phi, k2, qn, tau, r0, c).unwrap();
        assert_eq!(e.ell_star, brute_ell_star(delta, phi, k2, qn, tau, r0, c));
        let thr = delta / (4.0 * 2f64.sqrt() * c * phi);
        assert!((e.threshold - thr).abs() <= 1e-15 * thr);
        if e.ell_star > 0 {
            assert!(profile(e.ell_star - 1, tau, r0, qn + k2) > thr);
        }
        assert!(e.within_bound, "{e:?}");
    }
}

#[test]
fn ell_star_rejects_nonpositive_tau() {
    assert!(ell_star(0.5, 1.0, 0.1, 0.0, 0.0, 0.5, 4.0).is_err());
    assert!(ell_star(0.5, 1.0, 0.1, 0.0, 1.0, 1.0, 4.0).is_err());
}

proptest! {
    #[test]
    fn ell_star_monotone_in_delta(d1 in 1e-3f64..1.0, f in 0.05f64..1.0, k2 in 0.0f64..5.0, tau in 0.2f64..3.0) {
        let d2 = d1 * f;
        let a = ell_star(d1, 2.0, k2, 1.0, tau, 0.5, 4.0).unwrap();
        let b = ell_star(d2, 2.0, k2, 1.0, tau, 0.5, 4.0).unwrap();
        prop_assert!(b.ell_star >= a.ell_star);
        prop_assert!(a.within_bound && b.within_bound);
    }

    #[test]
    fn theta_delta_residual_and_envelope(lt in -12.0f64..-1.7, alpha in 0.3f64..1.0, k2 in 0.0f64..50.0) {
        let theta = lt.exp().min(0.99 * theta_window(Regime::High, alpha));
        let phi = phi_factor(1.0, 1.0, k2);
        let r = theta_delta_solve(theta, alpha, k2, Regime::High, phi).unwrap();
        prop_assert!(r.residual <= 1e-10);
        prop_assert!(r.delta < phi && r.delta <= r.envelope);
    }

    #[test]
    fn low_theta_delta_residual_and_envelope(lt in -12.0f64..-2.0, alpha in 0.3f64..1.0, frac in 0.0f64..1.0) {
        let k2 = frac * kappa1() / 4.0;
        let theta = lt.exp().min(0.99 * theta_window(Regime::Low, alpha));
        let r = theta_delta_solve(theta, alpha, k2, Regime::Low, 1.0).unwrap();
        prop_assert!(r.residual <= 1e-10);
        prop_assert!(r.delta < 1.0 && r.delta <= r.envelope);
    }
}

#[test]
fn c2_is_a_finite_supremum() {
    for r0 in [0.1f64, 0.5, 0.75, 0.9, 0.95] {
        let scan = (0..10_000).map(|l| (1.0 + l as f64) * r0.powi(l)).fold(0.0, f64::max);
        assert!((c2_constant(r0) - scan).abs() <= 1e-14 * scan, "{r0}");
    }
    assert_eq!(c2_constant(0.5), 1.0);
}

#[test]
fn spec_counts() {
    let p = NetParams::default();
    for (regime, k2, delta) in [(Regime::Low, 0.05, 0.5), (Regime::High, 1.0, 5.0), (Regime::High, 10.0, 1.0)] {
        let s = build_net_spec(delta, regime, k2, &p).unwrap();
        let n = 2.0 * s.ell_star as f64 + 1.0;
        assert_eq!(s.n_star, n * n);
        assert!(s.n_star <= s.n_star_bound);
        assert!((s.step - delta / 16.0).abs() < 1e-15 * delta);
        assert!((s.log_card - s.n_star * (s.log_y1 + s.log_y2)).abs() <= 1e-12 * s.log_card);
        assert!(s.ell_within_bound);
    }
    assert!(build_net_spec(0.5, Regime::Low, kappa1(), &p).is_err());
    assert!(build_net_spec(2.0, Regime::Low, 0.05, &p).is_err());
    assert!(build_net_spec(-1.0, Regime::High, 1.0, &p).is_err());
}

#[test]
fn size_base_after_theta_delta() {
    let p = NetParams::default();
    let alpha = 1.0;
    for k2 in [0.5, 2.0, 20.0] {
        let phi = phi_factor(p.sup_bound, 1.0, k2);
        let r = theta_delta_solve(1e-3, alpha, k2, Regime::High, phi).unwrap();
        let s = build_net_spec(r.delta, Regime::High, k2, &p).unwrap();
        let want = 1.0 + (1.0 + k2) * r.t;
        assert!((s.size_base() - want).abs() <= 1e-9 * want);
    }
    for k2 in [0.01, 0.1, kappa1() / 4.0] {
        let r = theta_delta_solve(1e-3, alpha, k2, Regime::Low, 1.0).unwrap();
        let s = build_net_spec(r.delta, Regime::Low, k2, &p).unwrap();
        assert!((s.size_base() - (1.0 + r.t)).abs() <= 1e-9 * (1.0 + r.t));
    }
}

#[test]
fn theta_window_errors() {
    let w = theta_window(Regime::High, 1.0);
    assert!(theta_delta_solve(w, 1.0, 1.0, Regime::High, 5.0).is_err());
    assert!(theta_delta_solve(0.5 * w, 1.0, 1.0, Regime::High, 5.0).is_ok());
    let wl = theta_window(Regime::Low, 1.0);
    assert!(wl < w);
    assert!(theta_delta_solve(wl, 1.0, 0.1, Regime::Low, 1.0).is_err());
    assert!(theta_delta_solve(0.5 * wl, 1.0, kappa1(), Regime::Low, 1.0).is_err());
    assert!(theta_delta_solve(-1.0, 1.0, 0.1, Regime::Low, 1.0).is_err());
}

#[test]
fn eta_bounds_every_sample() {
    let p = NetParams::default();
    let fracs = [0.9, 0.5, 0.1, 0.01, 1e-3];
    for (regime, ks) in [(Regime::High, vec![0.5, 2.0, 10.0, 50.0]), (Regime::Low, vec![0.01, 0.1, 0.5])] {
        let f = fit_eta(regime, &p, &fracs, &ks).unwrap();
        assert_eq!(f.samples, fracs.len() * ks.len());
        assert!(f.eta.is_finite() && f.eta > 0.0);
        for (_, _, lc, shape) in &f.points {
            assert!(*lc <= f.eta * shape * (1.0 + 1e-12));
        }
    }
}

#[test]
fn zero_gamma_gives_zero_cell() {
    let spec = build_net_spec(0.5, Regime::Low, 0.05, &NetParams::default()).unwrap();
    let g = synthetic(HarmonicMatrix::zeros(8), HarmonicMatrix::zeros(8));
    let c = quantize_gamma(&g, &spec).unwrap();
    assert_eq!(c.ell, spec.ell_star.min(8) as usize);
    assert!(c.m1.iter().chain(&c.m2).all(|v| *v == [0, 0]));
    assert_eq!(c.overflow, 0);
}

#[test]
fn half_steps_round_toward_zero() {
    let spec = build_net_spec(0.5, Regime::Low, 0.05, &NetParams::default()).unwrap();
    let mut m1 = HarmonicMatrix::zeros(2);
    let h = spec.step;
    let idx = indices(2);
    m1.set(idx[0], idx[0], Complex64::new(2.5 * h, -2.5 * h));
    m1.set(idx[0], idx[1], Complex64::new(0.5 * h, 2.6 * h));
    let c = quantize_gamma(&synthetic(m1, HarmonicMatrix::zeros(2)), &spec).unwrap();
    assert_eq!(c.m1[0], [2, -2]);
    assert_eq!(c.m1[1], [0, 3]);
}

#[test]
fn cell_hash_is_fnv1a() {
    let cell = NetCell { ell: 0, m1: vec![[1, -2]], m2: vec![[0, 3]], overflow: 0 };
    assert_eq!(cell.hash64(), 0xbb2b_2c9a_a6e1_66be);
}

#[test]
fn boundary_gamma_cannot_be_quantized() {
    let spec = build_net_spec(0.5, Regime::Low, 0.05, &NetParams::default()).unwrap();
    let mut g = synthetic(HarmonicMatrix::zeros(2), HarmonicMatrix::zeros(2));
    g.m1 = None;
    assert!(quantize_gamma(&g, &spec).is_err());
}

#[test]
fn random_matrices_inside_boxes_are_covered() {
    let p = NetParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (regime, k2, frac) in [(Regime::Low, 0.05, 0.5), (Regime::High, 1.0, 0.5), (Regime::High, 4.0, 0.05)] {
        let phi = if regime == Regime::High { phi_factor(1.0, 1.0, k2) } else { 1.0 };
        let spec = build_net_spec(frac * phi, regime, k2, &p).unwrap();
        let m = (spec.ell_star as usize).min(6);
        for _ in 0..20 {
            let a1 = spec.amp1 / 2f64.sqrt();
            let a2 = spec.amp1.min(spec.amp2) / 2f64.sqrt();
            let g = synthetic(random_matrix(m, a1, &mut rng), random_matrix(m, a2, &mut rng));
            let chk = check_net(&g, &spec).unwrap();
            assert!(chk.within, "{regime:?} {chk:?}");
            assert!(chk.chain_max <= spec.delta);
        }
    }
}

#[test]
fn pair_search_edge_cases() {
    assert!(min_distance_pair(&[HarmonicMatrix::zeros(3)], 3.0).unwrap().is_none());
    assert!(min_distance_pair(&[HarmonicMatrix::zeros(3), HarmonicMatrix::zeros(4)], 3.0).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mats: Vec<_> = (0..6).map(|_| random_matrix(3, 1.0, &mut rng)).collect();
    let best = min_distance_pair(&mats, 3.0).unwrap().unwrap();
    for a in 0..6 {
        for b in a + 1..6 {
            let d = dtnlab::harmonics::op_norm_s_to_minus_s(&mats[a].sub(&mats[b]).unwrap(), 3.0).unwrap();
            assert!(best.svd <= d * (1.0 + 1e-12));
        }
    }
}

#[test]
fn engineered_collisions_respect_bound() {
    let p = NetParams::default();
    let k2 = 1.0;
    let phi = phi_factor(1.0, 1.0, k2);
    let spec = build_net_spec(0.5 * phi, Regime::High, k2, &p).unwrap();
    let fam = build_discrete_family(1e-2, 1.0, 0.5, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let base = random_matrix(4, 0.2 * spec.step, &mut rng);
    let mut far = base.clone();
    far.set(indices(4)[0], indices(4)[0], Complex64::new(3.0 * spec.step, 0.0));
    let gammas: Vec<_> = [0.0, 0.1, 0.2, 0.0]
        .iter()
        .zip([&base, &base, &base, &far])
        .map(|(eps, m)| {
            let mut m = (*m).clone();
            m.data[(1, 1)] += Complex64::new(eps * spec.step, 0.0);
            synthetic(m, HarmonicMatrix::zeros(4))
        })
        .collect();
    let r = pigeonhole_search(&fam, &spec, &gammas).unwrap();
    assert_eq!(r.collisions.len(), 3);
    assert!(r.collisions_within_bound());
    assert!((r.collision_bound - 8.0 * 2f64.sqrt() * spec.delta).abs() < 1e-12 * spec.delta);
    assert_eq!(r.hashes[0], r.hashes[1]);
    assert_ne!(r.hashes[0], r.hashes[3]);
    assert!(pigeonhole_search(&fam, &spec, &gammas[..3]).is_err());
}
