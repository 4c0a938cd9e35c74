//! One line per acceptance criterion; exits non-zero if any fails.

use dtnlab::cli::{relative_difference, run_net, run_scan, theta_delta_grid, NetConfig};
use dtnlab::dtn_map::{assemble_dtn, gamma_boundary, gamma_volume, verify_decay_bounds};
use dtnlab::forward_solver::{verify_dissipative_bound, SolverConfig};
use dtnlab::harmonics::{indices, op_norm_s_to_minus_s, x_s_norm, HarmonicIndex, HarmonicMatrix};
use dtnlab::instability_lab::{fit_envelope, read_csv_file, ScanConfig};
use dtnlab::potentials::{BumpSpec, Potential};
use dtnlab::special::{constant_dtn, first_zero_j0, kappa1};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::SQRT_2;
use std::time::{Duration, Instant};

struct Outcome {
    passed: bool,
    detail: String,
}

fn timed(id: usize, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let ok = out.passed && took < limit;
    println!(
        "[{}] criterion {id:>2}: {} ({:.2?}, limit {:?})",
        if ok { "pass" } else { "FAIL" },
        out.detail,
        took,
        limit
    );
    ok
}

fn bump(center: [f64; 2], radius: f64, height: f64) -> Potential {
    Potential::bump_sum(vec![BumpSpec { center, radius, height }], 0.5).unwrap()
}

fn free_space() -> Outcome {
    let d = assemble_dtn(&Potential::zero(), 0.0, &SolverConfig::with_truncation(40, 8)).unwrap();
    let mut err = 0.0f64;
    for a in indices(40) {
        for b in indices(40) {
            let want = if a == b { a.m as f64 } else { 0.0 };
            err = err.max((d.entries.get(a, b) - want).norm());
        }
    }
    Outcome { passed: err < 1e-8, detail: format!("free-space DtN max error {err:.2e} < 1e-8") }
}

fn bessel() -> Outcome {
    let cfg = SolverConfig::with_truncation(25, 8);
    let mut worst = 0.0f64;
    for c in [0.5, 2.0, 10.0, 30.0] {
        let d = assemble_dtn(&Potential::constant(c), 0.0, &cfg).unwrap();
        for m in 0..=25 {
            let i = HarmonicIndex { m, j: 1 };
            let exact = constant_dtn(m, Complex64::new(c, 0.0));
            worst = worst.max((d.entries.get(i, i) - exact).norm() / exact.norm());
        }
    }
    Outcome { passed: worst <= 1e-6, detail: format!("radial ODE vs Bessel series, max rel {worst:.2e} ≤ 1e-6") }
}

fn first_eigenvalue() -> Outcome {
    let j = first_zero_j0();
    let k1 = kappa1();
    let ok = (j - 2.404825558).abs() < 1e-8 && (k1 - j * j).abs() < 1e-12;
    Outcome { passed: ok, detail: format!("j01 = {j:.10}, κ₁ = {k1:.10}") }
}

fn dissipative() -> Outcome {
    let cfg = SolverConfig::with_truncation(16, 16);
    let mut worst = 0.0f64;
    for (i, k) in [0.1, 1.0, 10.0].into_iter().enumerate() {
        let r = verify_dissipative_bound(k, 100, &cfg, 100 + i as u64).unwrap();
        assert_eq!(r.ratios.len(), 100);
        worst = worst.max(r.max_ratio);
    }
    Outcome { passed: worst <= 1.02, detail: format!("‖v‖/‖f‖ max {worst:.4} ≤ 1.02 over 300 trials") }
}

fn gamma_bumps() -> Vec<Potential> {
    vec![
        bump([0.0, 0.0], 0.3, 1.0),
        bump([0.2, 0.1], 0.25, 1.0),
        bump([-0.1, 0.25], 0.2, 0.8),
        bump([0.25, -0.15], 0.15, -0.6),
        bump([-0.2, -0.2], 0.18, 0.5),
    ]
}

fn identity(computed: &mut Vec<HarmonicMatrix>) -> Outcome {
    let cfg = SolverConfig::with_truncation(16, 16);
    let (k2, floor) = (2.0, 1e-3);
    let (mut form, mut adj) = (0.0f64, 0.0f64);
    for q in gamma_bumps() {
        let b = gamma_boundary(&q, 1.0, k2, &cfg).unwrap();
        let v = gamma_volume(&q, 1.0, k2, &cfg).unwrap();
        let minus = gamma_boundary(&q, -1.0, k2, &cfg).unwrap();
        form = form.max(relative_difference(&b.entries, &v.entries, floor).unwrap());
        form = form.max(relative_difference(&b.entries, v.l_form.as_ref().unwrap(), floor).unwrap());
        let h = HarmonicMatrix::from_data(16, minus.entries.data.adjoint()).unwrap();
        adj = adj.max(relative_difference(&b.entries, &h, floor).unwrap());
        computed.extend([b.entries, v.entries, minus.entries]);
    }
    Outcome {
        passed: form <= 1e-4 && adj <= 1e-4,
        detail: format!("boundary vs I/L forms {form:.2e}, adjoint {adj:.2e} (≤ 1e-4 rel, floor 1e-3·max)"),
    }
}

fn sandwich(computed: &[HarmonicMatrix]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mats: Vec<HarmonicMatrix> = (0..100)
        .map(|_| {
            let m = rng.gen_range(1..=12);
            let mut a = HarmonicMatrix::zeros(m);
            let decay = rng.gen_range(0.0..3.0);
            for d in indices(m) {
                for e in indices(m) {
                    let w = (1.0 + d.m.max(e.m) as f64).powf(decay);
                    a.set(d, e, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * w);
                }
            }
            a
        })
        .collect();
    mats.extend(computed.iter().cloned());
    let (mut bad, mut tight) = (0, 0.0f64);
    for a in &mats {
        let (svd, xs) = (op_norm_s_to_minus_s(a, 3.0).unwrap(), x_s_norm(a, 3.0));
        tight = tight.max(svd / (4.0 * SQRT_2 * xs));
        bad += (svd > 4.0 * SQRT_2 * xs) as usize;
    }
    Outcome {
        passed: bad == 0,
        detail: format!("{} matrices, {bad} violations of SVD ≤ 4√2 X_s, max ratio {tight:.3}", mats.len()),
    }
}

fn decay() -> Outcome {
    let q = bump([0.475, 0.0], 0.025, 1.0);
    let report = |m: usize| {
        let mut cfg = SolverConfig::with_truncation(m, 16);
        cfg.angular_quadrature = 256;
        cfg.radial_quadrature = 160;
        let g = gamma_volume(&q, 1.0, 1.0, &cfg).unwrap();
        verify_decay_bounds(&g, &q, 1.0, 1.0, 1.0, Some((5, 20))).unwrap()
    };
    let (a, b) = (report(24), report(48));
    let drift = (b.c2_hat - a.c2_hat).abs() / a.c2_hat;
    Outcome {
        passed: a.slope_rel_error <= 0.10 && drift <= 0.20,
        detail: format!(
            "slope {:.4} vs ln r₀ {:.4} ({:.1}%), Ĉ₂ drift {:.2}% under M 24→48",
            a.slope,
            a.expected_slope,
            100.0 * a.slope_rel_error,
            100.0 * drift
        ),
    }
}

fn nets() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, k2) in [("low", 0.5), ("high", 3.0)] {
        let dir = std::env::temp_dir().join(format!("dtnlab-accept-net-{name}-{}", std::process::id()));
        let cfg = NetConfig { kappa2: k2, samples: 200, n_bumps: 8, seed: 8, ..NetConfig::default() };
        let out = run_net(&cfg, &dir).unwrap();
        ok &= out.passed();
        parts.push(format!(
            "{name}: {}",
            out.gates.iter().map(|g| g.detail.as_str()).collect::<Vec<_>>().join("; ")
        ));
        std::fs::remove_dir_all(&dir).ok();
    }
    Outcome { passed: ok, detail: format!("net property and collisions, {}", parts.join(" | ")) }
}

fn theta_delta() -> Outcome {
    let (res, below) = theta_delta_grid(20).unwrap();
    Outcome {
        passed: res <= 1e-10 && below,
        detail: format!("20×20 grid per regime, max residual {res:.1e} ≤ 1e-10, below envelopes: {below}"),
    }
}

fn scan_once(tag: &str) -> (Vec<u8>, dtnlab::cli::Outcome, std::path::PathBuf) {
    let dir = std::env::temp_dir().join(format!("dtnlab-accept-scan-{tag}-{}", std::process::id()));
    let out = run_scan(&ScanConfig::default(), &dir).unwrap();
    (std::fs::read(dir.join("scan.csv")).unwrap(), out, dir)
}

fn dichotomy(csv: &mut Option<Vec<u8>>) -> Outcome {
    let (bytes, out, dir) = scan_once("a");
    let records = read_csv_file(&dir.join("scan.csv")).unwrap();
    let cfg = ScanConfig::default();
    let fit = fit_envelope(&records).unwrap();
    let mut min_ratio = f64::INFINITY;
    for &theta in &cfg.thetas {
        let row: Vec<_> = records.iter().filter(|r| r.theta == theta).collect();
        let first = row.iter().find(|r| r.kappa2 == cfg.kappa2[0]).unwrap();
        let last = row.iter().find(|r| r.kappa2 == *cfg.kappa2.last().unwrap()).unwrap();
        min_ratio = min_ratio.min(last.dist_svd / first.dist_svd);
    }
    let all_ok = records.len() == 48 && records.iter().all(|r| r.is_ok());
    std::fs::remove_dir_all(&dir).ok();
    *csv = Some(bytes);
    Outcome {
        passed: all_ok && out.passed() && fit.c_r > 0.0 && fit.c0 > 0.0 && fit.one_sided() && min_ratio >= 10.0,
        detail: format!(
            "{} records, C_R = {:.3e}, c₀ = {:.3e}, {} above envelope, min ratio {:.1} ≥ 10, gates {}",
            records.len(),
            fit.c_r,
            fit.c0,
            fit.violations.len(),
            min_ratio,
            if out.passed() { "pass" } else { "fail" }
        ),
    }
}

fn determinism(first: &Option<Vec<u8>>) -> Outcome {
    let (bytes, _, dir) = scan_once("b");
    std::fs::remove_dir_all(&dir).ok();
    let same = first.as_deref() == Some(bytes.as_slice());
    Outcome { passed: same, detail: format!("repeated scan CSV byte-identical: {same} ({} bytes)", bytes.len()) }
}

fn main() {
    let s = Duration::from_secs;
    let mut computed = Vec::new();
    let mut csv = None;
    let results = [
        timed(1, s(1), free_space),
        timed(2, s(5), bessel),
        timed(3, s(1), first_eigenvalue),
        timed(4, s(60), dissipative),
        timed(5, s(120), || identity(&mut computed)),
        timed(6, s(10), || sandwich(&computed)),
        timed(7, s(120), decay),
        timed(8, s(120), nets),
        timed(9, s(1), theta_delta),
        timed(10, s(20 * 60), || dichotomy(&mut csv)),
        timed(11, s(20 * 60), || determinism(&csv)),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
