//! Configuration and runners behind the `dtnlab` binary. Every runner
//! returns the files it wrote and a list of pass/fail gates; the binary
//! exits non-zero when any gate fails.

use crate::dtn_map::{
    assemble_dtn, gamma_boundary, meta_for_dtn, meta_for_gamma, phi_factor, write_matrix,
    GammaEngine, gamma_from_forms,
};
use crate::entropy_nets::{
    build_net_spec, check_net, pigeonhole_search, theta_delta_solve, theta_window, NetParams,
    Regime,
};
use crate::error::{LabError, Result};
use crate::forward_solver::{solve_galerkin, verify_dissipative_bound, RadialBasis, SolverConfig};
use crate::harmonics::{op_norm_s_to_minus_s, x_s_norm, HarmonicIndex, HarmonicMatrix};
use crate::instability_lab::{
    emit_outputs, fit_envelope, read_csv_file, run_scan_streaming, truncation_gate, write_rows,
    RegimeSelector, ScanConfig,
};
use crate::potentials::{build_discrete_family_with, BumpSpec, FamilyParams, Potential};
use crate::special::{constant_dtn, first_zero_j0, kappa1};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Gate {
    fn new(name: &str, passed: bool, detail: String) -> Gate {
        Gate {
            name: name.into(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub gates: Vec<Gate>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

fn default_bump() -> Potential {
    Potential::bump_sum(
        vec![BumpSpec {
            center: [0.15, 0.1],
            radius: 0.3,
            height: 1.0,
        }],
        0.5,
    )
    .expect("default bump lies in B_0.5")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub potential: Potential,
    pub kappa2: f64,
    pub q_ref_shift: f64,
    /// boundary datum Y_mj as (m, j)
    pub datum: (usize, usize),
    /// ray along which u is tabulated
    pub angle: f64,
    pub solver: SolverConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            potential: default_bump(),
            kappa2: 1.0,
            q_ref_shift: 1.0,
            datum: (2, 1),
            angle: 0.0,
            solver: SolverConfig::with_truncation(16, 16),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtnConfig {
    pub potential: Potential,
    pub kappa2: f64,
    /// also write Γ(q; i·shift) from both representations
    pub gamma: bool,
    pub q_ref_shift: f64,
    pub gamma_tolerance: f64,
    pub solver: SolverConfig,
}

impl Default for DtnConfig {
    fn default() -> Self {
        DtnConfig {
            potential: default_bump(),
            kappa2: 1.0,
            gamma: true,
            q_ref_shift: 1.0,
            gamma_tolerance: 1e-4,
            solver: SolverConfig::with_truncation(16, 16),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub dtn_degree: usize,
    pub bessel_values: Vec<f64>,
    pub bessel_degree: usize,
    pub bessel_tolerance: f64,
    pub dissipative_kappa2: Vec<f64>,
    pub dissipative_trials: usize,
    pub sandwich_samples: usize,
    pub theta_grid: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            dtn_degree: 40,
            bessel_values: vec![0.5, 2.0, 10.0, 30.0],
            bessel_degree: 25,
            bessel_tolerance: 1e-6,
            dissipative_kappa2: vec![0.1, 1.0, 10.0],
            dissipative_trials: 100,
            sandwich_samples: 100,
            theta_grid: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub regime: RegimeSelector,
    pub kappa2: f64,
    /// δ as a fraction of Φ (high) or of 1 (low)
    pub delta_fraction: f64,
    pub theta: f64,
    pub alpha: f64,
    pub n_bumps: usize,
    /// members drawn from the family; 0 takes all
    pub samples: usize,
    pub params: NetParams,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            regime: RegimeSelector::Auto,
            kappa2: 0.5,
            delta_fraction: 0.5,
            theta: 1e-2,
            alpha: 1.0,
            n_bumps: 8,
            samples: 200,
            params: NetParams::default(),
            solver: SolverConfig::with_truncation(16, 12),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// defaults to `<out-dir>/scan.csv`
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    pub solve: SolveConfig,
    pub dtn: DtnConfig,
    pub verify: VerifyConfig,
    pub net: NetConfig,
    pub scan: ScanConfig,
    pub fit: FitConfig,
}

impl LabConfig {
    /// TOML or JSON by extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(serde_json::from_str(&text)?),
            _ => toml::from_str(&text).map_err(|e| LabError::Format(e.to_string())),
        }
    }

    /// Replaces every seed in the configuration.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.verify.seed = seed;
        self.net.seed = seed;
        self.scan.seed = seed;
        self
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, out: &mut Outcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, serde_json::to_vec_pretty(value)?)?;
    out.files.push(path);
    Ok(())
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    datum: (usize, usize),
    kappa2: f64,
    q_ref_shift: f64,
    residual: f64,
    trace_error: f64,
    method: String,
    /// ∂_r u(1) against the harmonic basis, as (m, j, re, im)
    normal_derivative: Vec<(usize, usize, f64, f64)>,
    config: &'a SolveConfig,
}

pub fn run_solve(cfg: &SolveConfig, dir: &Path) -> Result<Outcome> {
    let datum = HarmonicIndex::new(cfg.datum.0, cfg.datum.1)?;
    let sol = solve_galerkin(&cfg.potential, cfg.q_ref_shift, cfg.kappa2, datum, &cfg.solver)?;
    let basis = RadialBasis::new(&cfg.solver)?;
    let mut out = Outcome::default();
    fs::create_dir_all(dir)?;
    let path = dir.join("solve.csv");
    sol.write_csv(&basis, cfg.angle, fs::File::create(&path)?)?;
    out.files.push(path);
    let summary = SolveSummary {
        datum: cfg.datum,
        kappa2: cfg.kappa2,
        q_ref_shift: cfg.q_ref_shift,
        residual: sol.residual,
        trace_error: sol.trace_error,
        method: format!("{:?}", sol.method),
        normal_derivative: crate::harmonics::indices(basis.m_max)
            .iter()
            .zip(&sol.normal_derivative)
            .map(|(i, z)| (i.m, i.j, z.re, z.im))
            .collect(),
        config: cfg,
    };
    write_json(dir, "solve.json", &summary, &mut out)?;
    out.gates.push(Gate::new(
        "boundary trace",
        sol.trace_error <= cfg.solver.trace_tol,
        format!("{:.3e}", sol.trace_error),
    ));
    out.gates.push(Gate::new(
        "residual",
        sol.residual <= cfg.solver.residual_tol,
        format!("{:.3e}", sol.residual),
    ));
    Ok(out)
}

/// Largest entrywise relative difference, with a floor of `floor·max|a|`
/// so entries at round-off level do not dominate.
pub fn relative_difference(a: &HarmonicMatrix, b: &HarmonicMatrix, floor: f64) -> Result<f64> {
    if a.side() != b.side() {
        return Err(LabError::Shape("matrices of different truncation".into()));
    }
    let scale = a.max_abs().max(b.max_abs());
    let mut worst = 0.0f64;
    for (x, y) in a.data.iter().zip(b.data.iter()) {
        let den = x.norm().max(y.norm()).max(floor * scale);
        if den > 0.0 {
            worst = worst.max((x - y).norm() / den);
        }
    }
    Ok(worst)
}

pub fn run_dtn(cfg: &DtnConfig, dir: &Path) -> Result<Outcome> {
    let mut out = Outcome::default();
    let d = assemble_dtn(&cfg.potential, cfg.kappa2, &cfg.solver)?;
    write_matrix(dir, "dtn", &meta_for_dtn(&d), &d.entries)?;
    out.files.push(dir.join("dtn.json"));
    out.files.push(dir.join("dtn.csv"));
    out.gates.push(Gate::new(
        "finite DtN",
        d.entries.is_finite(),
        format!("max |Λ| = {:.4e}", d.entries.max_abs()),
    ));
    if cfg.gamma {
        let q = Potential {
            imaginary_shift: 0.0,
            ..cfg.potential.clone()
        };
        let id = q.content_hash();
        let b = gamma_boundary(&q, cfg.q_ref_shift, cfg.kappa2, &cfg.solver)?;
        let engine = GammaEngine::new(&cfg.solver, cfg.q_ref_shift, cfg.kappa2)?;
        let v = gamma_from_forms(engine.volume(&engine.operator(&q)?)?, cfg.kappa2, cfg.q_ref_shift);
        write_matrix(dir, "gamma_boundary", &meta_for_gamma(&b, &id), &b.entries)?;
        write_matrix(dir, "gamma_volume", &meta_for_gamma(&v, &id), &v.entries)?;
        for stem in ["gamma_boundary", "gamma_volume"] {
            out.files.push(dir.join(format!("{stem}.json")));
            out.files.push(dir.join(format!("{stem}.csv")));
        }
        let dev = relative_difference(&b.entries, &v.entries, 1e-3)?;
        out.gates.push(Gate::new(
            "boundary vs volume Γ",
            dev <= cfg.gamma_tolerance,
            format!("{dev:.3e}"),
        ));
        if let Some(l) = &v.l_form {
            let dev = relative_difference(&v.entries, l, 1e-3)?;
            out.gates.push(Gate::new(
                "I-form vs L-form Γ",
                dev <= cfg.gamma_tolerance,
                format!("{dev:.3e}"),
            ));
        }
    }
    Ok(out)
}

fn random_matrix(rng: &mut ChaCha8Rng, m_max: usize) -> HarmonicMatrix {
    let mut a = HarmonicMatrix::zeros(m_max);
    for z in a.data.iter_mut() {
        *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    a
}

pub fn run_verify(cfg: &VerifyConfig, dir: &Path) -> Result<Outcome> {
    let mut out = Outcome::default();

    let sc = SolverConfig::with_truncation(cfg.dtn_degree, 8);
    let d = assemble_dtn(&Potential::zero(), 0.0, &sc)?;
    let mut err = 0.0f64;
    for i in crate::harmonics::indices(cfg.dtn_degree) {
        err = err.max((d.entries.get(i, i) - i.m as f64).norm());
    }
    out.gates.push(Gate::new("free-space DtN", err < 1e-8, format!("{err:.3e}")));

    let sc = SolverConfig::with_truncation(cfg.bessel_degree, 8);
    let mut worst = 0.0f64;
    for &c in &cfg.bessel_values {
        let d = assemble_dtn(&Potential::constant(c), 0.0, &sc)?;
        for m in 0..=cfg.bessel_degree {
            let i = HarmonicIndex { m, j: 1 };
            let exact = constant_dtn(m, Complex64::new(c, 0.0));
            worst = worst.max((d.entries.get(i, i) - exact).norm() / exact.norm());
        }
    }
    out.gates.push(Gate::new(
        "Bessel oracle",
        worst <= cfg.bessel_tolerance,
        format!("{worst:.3e}"),
    ));

    let j = first_zero_j0();
    out.gates.push(Gate::new(
        "first zero of J0",
        (j - 2.404825558).abs() < 1e-8,
        format!("j = {j:.12}, κ₁ = {:.12}", kappa1()),
    ));

    let sc = SolverConfig::with_truncation(16, 16);
    for (i, &k) in cfg.dissipative_kappa2.iter().enumerate() {
        let r = verify_dissipative_bound(k, cfg.dissipative_trials, &sc, cfg.seed + i as u64)?;
        out.gates.push(Gate::new(
            &format!("dissipative bound κ²={k}"),
            r.passed(),
            format!("max ratio {:.4}", r.max_ratio),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut violations = 0;
    let mut tightest = 0.0f64;
    for _ in 0..cfg.sandwich_samples {
        let m = rng.gen_range(1..=12);
        let a = random_matrix(&mut rng, m);
        let (svd, xs) = (op_norm_s_to_minus_s(&a, 3.0)?, x_s_norm(&a, 3.0));
        tightest = tightest.max(svd / (4.0 * SQRT_2 * xs));
        if svd > 4.0 * SQRT_2 * xs {
            violations += 1;
        }
    }
    out.gates.push(Gate::new(
        "weighted SVD ≤ 4√2 X_s",
        violations == 0,
        format!("{violations} violations, max ratio {tightest:.4}"),
    ));

    let (res, env) = theta_delta_grid(cfg.theta_grid)?;
    out.gates.push(Gate::new(
        "θ ↔ δ roots",
        res <= 1e-10 && env,
        format!("max residual {res:.3e}, envelopes hold: {env}"),
    ));
    let gates = out.gates.clone();
    write_json(dir, "verify.json", &gates, &mut out)?;
    Ok(out)
}

/// Worst relative residual over an n×n (θ, κ²) grid per regime, and whether
/// every root lies below its two-case envelope.
pub fn theta_delta_grid(n: usize) -> Result<(f64, bool)> {
    let alpha = 1.0;
    let mut worst = 0.0f64;
    let mut below = true;
    for regime in [Regime::High, Regime::Low] {
        let top = theta_window(regime, alpha) * 0.999;
        let kmax = match regime {
            Regime::High => 100.0,
            Regime::Low => kappa1() / 4.0,
        };
        for a in 0..n {
            let theta = 1e-6 * (top / 1e-6).powf(a as f64 / (n - 1).max(1) as f64);
            for b in 0..n {
                let k = 1e-2 * (kmax / 1e-2).powf(b as f64 / (n - 1).max(1) as f64);
                let phi = phi_factor(1.0, 1.0, k);
                let r = theta_delta_solve(theta, alpha, k, regime, phi)?;
                worst = worst.max(r.residual);
                below &= r.delta <= r.envelope;
            }
        }
    }
    Ok((worst, below))
}

#[derive(Serialize)]
struct NetSummary<'a> {
    spec: &'a crate::entropy_nets::NetSpec,
    members: Vec<usize>,
    max_chain: f64,
    max_xs_error: f64,
    within: usize,
    overflow: usize,
    pigeonhole: &'a crate::entropy_nets::PigeonholeReport,
}

pub fn run_net(cfg: &NetConfig, dir: &Path) -> Result<Outcome> {
    let regime = cfg.regime.resolve(cfg.kappa2);
    let phi = match regime {
        Regime::High => phi_factor(cfg.params.sup_bound, 1.0, cfg.kappa2),
        Regime::Low => 1.0,
    };
    let spec = build_net_spec(cfg.delta_fraction * phi, regime, cfg.kappa2, &cfg.params)?;
    let mut fam = build_discrete_family_with(&FamilyParams {
        sup_bound: cfg.params.sup_bound,
        ..FamilyParams::new(cfg.theta, cfg.alpha, cfg.params.r0, cfg.n_bumps)
    })?;
    let total = fam.members.len();
    let mut members: Vec<usize> = if cfg.samples == 0 || cfg.samples >= total {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        sample(&mut rng, total, cfg.samples).into_vec()
    };
    members.sort_unstable();
    fam.members = members.iter().map(|&i| fam.members[i].clone()).collect();
    fam.log_cardinality = (fam.members.len() as f64).ln();

    let engine = GammaEngine::new(&cfg.solver, regime.q_ref_shift(), cfg.kappa2)?;
    let gammas = fam
        .members
        .iter()
        .map(|q| {
            let forms = engine.volume(&engine.operator(q)?)?;
            Ok(gamma_from_forms(forms, cfg.kappa2, regime.q_ref_shift()))
        })
        .collect::<Result<Vec<_>>>()?;
    let checks = gammas
        .iter()
        .map(|g| check_net(g, &spec))
        .collect::<Result<Vec<_>>>()?;
    let report = pigeonhole_search(&fam, &spec, &gammas)?;
    let summary = NetSummary {
        spec: &spec,
        members,
        max_chain: checks.iter().map(|c| c.chain_max).fold(0.0, f64::max),
        max_xs_error: checks.iter().map(|c| c.xs_error).fold(0.0, f64::max),
        within: checks.iter().filter(|c| c.within).count(),
        overflow: checks.iter().map(|c| c.overflow).sum(),
        pigeonhole: &report,
    };
    let mut out = Outcome::default();
    write_json(dir, "net.json", &summary, &mut out)?;
    out.gates.push(Gate::new(
        "net property",
        summary.within == checks.len(),
        format!(
            "{}/{} within δ={:.4e}, max X_s error {:.3e}",
            summary.within,
            checks.len(),
            spec.delta,
            summary.max_xs_error
        ),
    ));
    out.gates.push(Gate::new(
        "collision bound",
        report.collisions_within_bound(),
        format!("{} collisions, bound {:.4e}", report.collisions.len(), report.collision_bound),
    ));
    Ok(out)
}

pub fn run_scan(cfg: &ScanConfig, dir: &Path) -> Result<Outcome> {
    fs::create_dir_all(dir)?;
    // rows are appended as columns finish so a long scan leaves a trace
    let partial = dir.join("scan.partial.csv");
    let mut wtr = csv::Writer::from_path(&partial)?;
    wtr.write_record(crate::instability_lab::CSV_COLUMNS)?;
    let records = run_scan_streaming(cfg, |col| write_rows(&mut wtr, col))?;
    drop(wtr);
    let fit = fit_envelope(&records).ok();
    let gates = if cfg.truncation_gate {
        truncation_gate(cfg, &records)?
    } else {
        vec![]
    };
    let manifest = emit_outputs(&records, cfg, fit.as_ref(), &gates, dir)?;
    fs::remove_file(&partial)?;
    let mut out = Outcome {
        gates: vec![],
        files: manifest.files,
    };
    let bad = records.iter().filter(|r| !r.is_ok()).count();
    out.gates.push(Gate::new("solver", bad == 0, format!("{bad} voided records")));
    let sandwich = records.iter().filter(|r| r.is_ok() && !r.sandwich_ok).count();
    out.gates.push(Gate::new("norm sandwich", sandwich == 0, format!("{sandwich} violations")));
    let sep = records.iter().filter(|r| r.is_ok() && !r.separation_ok).count();
    out.gates.push(Gate::new("separation", sep == 0, format!("{sep} violations")));
    out.gates.push(match &fit {
        Some(f) => Gate::new(
            "envelope",
            f.one_sided() && f.c_r > 0.0 && f.c0 > 0.0,
            format!("C_R={:.4e}, c0={:.4e}, {} above", f.c_r, f.c0, f.violations.len()),
        ),
        None => Gate::new("envelope", false, "fit not possible".into()),
    });
    if cfg.truncation_gate {
        let worst = gates.iter().map(|g| g.rel_change).fold(0.0, f64::max);
        out.gates.push(Gate::new(
            "truncation",
            gates.iter().all(|g| g.passed),
            format!("max relative change {worst:.3e}"),
        ));
    }
    Ok(out)
}

pub fn run_fit(cfg: &FitConfig, dir: &Path) -> Result<Outcome> {
    let path = cfg.csv.clone().unwrap_or_else(|| dir.join("scan.csv"));
    let records = read_csv_file(&path)?;
    let fit = fit_envelope(&records)?;
    let mut out = Outcome::default();
    write_json(dir, "fit.json", &fit, &mut out)?;
    out.gates.push(Gate::new(
        "envelope",
        fit.one_sided() && fit.c_r > 0.0 && fit.c0 > 0.0,
        format!("C_R={:.4e}, c0={:.4e}, {} above", fit.c_r, fit.c0, fit.violations.len()),
    ));
    Ok(out)
}
