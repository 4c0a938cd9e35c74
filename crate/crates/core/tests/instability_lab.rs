use dtnlab::dtn_map::gamma_boundary;
use dtnlab::entropy_nets::Regime;
use dtnlab::forward_solver::SolverConfig;
use dtnlab::harmonics::op_norm_s_to_minus_s;
use dtnlab::instability_lab::*;
use dtnlab::potentials::{build_discrete_family, BumpSpec, Potential};
use dtnlab::special::kappa1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn record(theta: f64, kappa2: f64, dist: f64) -> ExperimentRecord {
    let regime = Regime::for_kappa2(kappa2);
    let t = theta.powf(-0.5);
    ExperimentRecord {
        theta,
        kappa2,
        alpha: 1.0,
        regime,
        q_ref_shift: regime.q_ref_shift(),
        m_trunc: 24,
        member_a: 0,
        member_b: 1,
        dist_svd: dist,
        dist_xs: dist,
        xs_bound: 4.0 * 2f64.sqrt() * dist,
        sandwich_ok: true,
        separation: theta,
        separation_ok: true,
        t,
        high_shape: (1.0 + kappa2) * ((-(1.0 + kappa2) * t / 3.0).exp() + 3.0 * theta.sqrt()),
        low_bound: 0.0,
        status: "ok".into(),
    }
}

fn synthetic_records(c_r: f64, c0: f64, seed: u64) -> Vec<ExperimentRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for theta in [1e-1, 3e-2, 1e-2, 3e-3, 1e-3] {
        for k in log_space(0.05, 50.0, 12) {
            let noise = rng.gen_range(0.97..=1.0);
            out.push(record(theta, k, c_r * envelope_shape(c0, k, theta, 1.0) * noise));
        }
    }
    out
}

fn small_config() -> ScanConfig {
    ScanConfig {
        thetas: vec![1e-2],
        kappa2: vec![3.0],
        n_bumps: 1,
        solver: SolverConfig::with_truncation(12, 12),
        truncation_gate: false,
        ..ScanConfig::default()
    }
}

#[test]
fn log_space_endpoints_are_exact() {
    let v = log_space(0.05, 50.0, 16);
    assert_eq!(v.len(), 16);
    assert_eq!(v[0], 0.05);
    assert_eq!(v[15], 50.0);
    assert!(v.windows(2).all(|w| ((w[1] / w[0]) - 1000f64.powf(1.0 / 15.0)).abs() < 1e-12));
}

#[test]
fn single_bump_scan_is_gamma_of_the_bump() {
    let cfg = small_config();
    let recs = run_scan(&cfg).unwrap();
    assert_eq!(recs.len(), 1);
    let r = &recs[0];
    assert!(r.is_ok(), "{}", r.status);
    assert_eq!((r.member_a, r.member_b), (0, 1));
    assert_eq!(r.regime, Regime::High);
    assert_eq!(r.separation, 1e-2);

    let fam = build_discrete_family(1e-2, 1.0, 0.5, 1).unwrap();
    let q = Potential::bump_sum(
        vec![BumpSpec { center: fam.centers[0], radius: fam.rho, height: 1e-2 }],
        0.5,
    )
    .unwrap();
    let g = gamma_boundary(&q, 1.0, 3.0, &cfg.solver).unwrap();
    let direct = op_norm_s_to_minus_s(&g.entries, 3.0).unwrap();
    assert!((r.dist_svd - direct).abs() <= 1e-6 * direct, "{} {direct}", r.dist_svd);
    assert!(r.sandwich_ok && r.dist_svd <= r.xs_bound);
}

#[test]
fn low_regime_record_uses_zero_reference() {
    let cfg = ScanConfig { kappa2: vec![0.1], thetas: vec![1e-3], ..small_config() };
    let r = &run_scan(&cfg).unwrap()[0];
    assert_eq!(r.regime, Regime::Low);
    assert_eq!(r.q_ref_shift, 0.0);
    assert!(r.is_ok() && r.dist_svd > 0.0);
}

#[test]
fn regime_selection() {
    assert_eq!(RegimeSelector::Auto.resolve(0.1), Regime::Low);
    assert_eq!(RegimeSelector::Auto.resolve(kappa1()), Regime::High);
    assert_eq!(RegimeSelector::High.resolve(0.1), Regime::High);
    let cfg: ScanConfig = toml::from_str("regime = \"high\"\nthetas = [0.01]\nR = 2.0").unwrap();
    assert_eq!(cfg.regime, RegimeSelector::High);
    assert_eq!(cfg.sup_bound, 2.0);
    assert!(toml::from_str::<ScanConfig>("bogus = 1").is_err());
}

#[test]
fn config_validation() {
    assert!(ScanConfig::default().validate().is_ok());
    let bad = [
        ScanConfig { n_bumps: 0, ..ScanConfig::default() },
        ScanConfig { n_bumps: 13, ..ScanConfig::default() },
        ScanConfig { alpha: 1.5, ..ScanConfig::default() },
        ScanConfig { thetas: vec![], ..ScanConfig::default() },
        ScanConfig { thetas: vec![0.5], ..ScanConfig::default() },
        ScanConfig { kappa2: vec![-1.0], ..ScanConfig::default() },
        ScanConfig { kappa2: vec![3.0], regime: RegimeSelector::Low, ..ScanConfig::default() },
    ];
    for c in bad {
        assert!(c.validate().is_err(), "{c:?}");
    }
    assert_ne!(ScanConfig::default().hash(), small_config().hash());
    assert_eq!(ScanConfig::default().hash().len(), 64);
}

#[test]
fn synthetic_fit_round_trip() {
    for (c_r, c0, seed) in [(3e-5, 0.2, 1), (1.0, 0.05, 2), (0.02, 1.0, 3)] {
        let recs = synthetic_records(c_r, c0, seed);
        let f = fit_envelope(&recs).unwrap();
        assert!(f.one_sided());
        assert!((f.c_r - c_r).abs() <= 0.05 * c_r, "C_R {} vs {c_r}", f.c_r);
        assert!((f.c0 - c0).abs() <= 0.05 * c0, "c0 {} vs {c0}", f.c0);
        assert!(!f.c0_at_grid_edge);
        for r in &recs {
            assert!(r.dist_svd <= f.c_r * envelope_shape(f.c0, r.kappa2, r.theta, 1.0) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn fit_rejects_thin_or_degenerate_input() {
    let zeros: Vec<_> = synthetic_records(1.0, 0.1, 0).into_iter().map(|mut r| {
        r.dist_svd = 0.0;
        r
    }).collect();
    assert!(fit_envelope(&zeros).unwrap().degenerate);
    assert!(!fit_envelope(&zeros).unwrap().one_sided());
    assert!(fit_envelope(&synthetic_records(1.0, 0.1, 0)[..5]).is_err());
    let high_only: Vec<_> = synthetic_records(1.0, 0.1, 0).into_iter().filter(|r| r.kappa2 > 2.0).collect();
    assert!(fit_envelope(&high_only).is_err());
}

#[test]
fn failed_records_are_excluded() {
    let mut recs = synthetic_records(0.5, 0.1, 9);
    let clean = fit_envelope(&recs).unwrap();
    recs[3].status = "solver diverged".into();
    recs[3].dist_svd = f64::NAN;
    let f = fit_envelope(&recs).unwrap();
    assert_eq!(f.n_records, clean.n_records - 1);
    assert!(f.c_r.is_finite());
}

#[test]
fn csv_round_trip_preserves_fit() {
    let recs = synthetic_records(2e-3, 0.3, 5);
    let mut buf = Vec::new();
    write_csv(&recs, &mut buf).unwrap();
    let header = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(header.lines().next().unwrap(), CSV_COLUMNS.join(","));
    let back = read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, recs);
    assert_eq!(fit_envelope(&back).unwrap(), fit_envelope(&recs).unwrap());
}

#[test]
fn emit_outputs_writes_files() {
    let dir = std::env::temp_dir().join(format!("dtnlab-emit-{}", std::process::id()));
    let cfg = ScanConfig::default();
    assert!(emit_outputs(&[], &cfg, None, &[], &dir).is_err());
    let one = vec![record(1e-2, 1.0, 1e-4)];
    let m = emit_outputs(&one, &cfg, None, &[], &dir).unwrap();
    assert_eq!(m.files.len(), 4);
    let back = read_csv_file(&dir.join("scan.csv")).unwrap();
    assert_eq!(back, one);
    let svg = std::fs::read_to_string(dir.join("distance_vs_t.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("scan.json")).unwrap()).unwrap();
    assert_eq!(json["config_hash"].as_str().unwrap(), cfg.hash());
    std::fs::remove_dir_all(&dir).unwrap();
}
