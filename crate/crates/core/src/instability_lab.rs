//! Frequency–perturbation scans: for each (θ, κ²) the hardest pair of a
//! θ-discrete bump family, compared against the theoretical envelopes, plus
//! the envelope fit and CSV/JSON/SVG output.

use crate::dtn_map::GammaEngine;
use crate::entropy_nets::{min_distance_pair, Regime};
use crate::error::{LabError, Result};
use crate::forward_solver::{PotentialOperator, SolverConfig};
use crate::harmonics::{op_norm_s_to_minus_s, HarmonicMatrix};
use crate::potentials::{
    build_discrete_family_with, high_frequency_window, low_frequency_window, BumpSpec,
    DiscreteFamily, FamilyParams, Potential,
};
use crate::special::kappa1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::SQRT_2;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

const SANDWICH: f64 = 4.0 * SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeSelector {
    Auto,
    High,
    Low,
}

impl RegimeSelector {
    pub fn resolve(self, kappa2: f64) -> Regime {
        match self {
            RegimeSelector::Auto => Regime::for_kappa2(kappa2),
            RegimeSelector::High => Regime::High,
            RegimeSelector::Low => Regime::Low,
        }
    }
}

/// `count` log-spaced points from `lo` to `hi`, endpoints exact.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|i| {
                if i == 0 {
                    lo
                } else if i == count - 1 {
                    hi
                } else {
                    (lo.ln() + (hi / lo).ln() * i as f64 / (count - 1) as f64).exp()
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub alpha: f64,
    pub thetas: Vec<f64>,
    pub kappa2: Vec<f64>,
    pub r0: f64,
    /// the size bound R of the high-frequency class
    #[serde(rename = "R")]
    pub sup_bound: f64,
    pub n_bumps: usize,
    pub mu: f64,
    pub regime: RegimeSelector,
    /// Sobolev index of the measured norm, (d+4)/2 by default
    pub s: f64,
    pub solver: SolverConfig,
    /// recompute first/last κ² per θ at M + gate_extra
    pub truncation_gate: bool,
    pub gate_extra: usize,
    pub gate_tolerance: f64,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            alpha: 1.0,
            thetas: vec![1e-2, 1e-3, 1e-4],
            kappa2: log_space(0.05, 50.0, 16),
            r0: 0.5,
            sup_bound: 1.0,
            n_bumps: 6,
            mu: 1.0,
            regime: RegimeSelector::Auto,
            s: 3.0,
            solver: SolverConfig::with_truncation(24, 12),
            truncation_gate: true,
            gate_extra: 8,
            gate_tolerance: 0.01,
            seed: 0,
            out_dir: None,
        }
    }
}

impl ScanConfig {
    /// TOML or JSON by extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: ScanConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            _ => toml::from_str(&text).map_err(|e| LabError::Format(e.to_string()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every (θ, κ²) against its regime window.
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(LabError::Parameter(format!("α={} outside (0,1]", self.alpha)));
        }
        if self.thetas.is_empty() || self.kappa2.is_empty() {
            return Err(LabError::Parameter("empty θ or κ² list".into()));
        }
        if self.n_bumps == 0 || self.n_bumps > 12 {
            return Err(LabError::Parameter("n_bumps must lie in 1..=12".into()));
        }
        if !(self.s > 0.0) || !(self.gate_tolerance > 0.0) {
            return Err(LabError::Parameter("s and gate_tolerance must be positive".into()));
        }
        let k1 = kappa1();
        for &k in &self.kappa2 {
            if !(k > 0.0) {
                return Err(LabError::Parameter(format!("κ²={k} must be positive")));
            }
            let regime = self.regime.resolve(k);
            if regime == Regime::Low && k > k1 / 4.0 {
                return Err(LabError::Parameter(format!("κ²={k} above κ₁/4 in the low regime")));
            }
            let window = match regime {
                Regime::High => high_frequency_window(self.alpha, self.sup_bound),
                Regime::Low => low_frequency_window(self.alpha, k1),
            };
            for &t in &self.thetas {
                if !(t > 0.0 && t < window) {
                    return Err(LabError::Parameter(format!(
                        "θ={t} outside the {} window (0, {window}) at κ²={k}",
                        regime.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let s = serde_json::to_string(self).unwrap_or_default();
        Sha256::digest(s.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn family_params(&self, theta: f64) -> FamilyParams {
        FamilyParams {
            theta,
            alpha: self.alpha,
            r0: self.r0,
            n_bumps: self.n_bumps,
            sup_bound: self.sup_bound,
            mu: self.mu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub theta: f64,
    pub kappa2: f64,
    pub alpha: f64,
    pub regime: Regime,
    pub q_ref_shift: f64,
    pub m_trunc: usize,
    pub member_a: usize,
    pub member_b: usize,
    /// ‖Λ_a - Λ_b‖_{s→-s} by weighted SVD
    pub dist_svd: f64,
    pub dist_xs: f64,
    /// 4√2 ‖Λ_a - Λ_b‖_{X_s}
    pub xs_bound: f64,
    pub sandwich_ok: bool,
    /// max over bump centers of |q_a - q_b|
    pub separation: f64,
    pub separation_ok: bool,
    /// θ^{-1/(2α)}
    pub t: f64,
    /// (1+κ²)[exp(-(1+κ²)t/3) + 3θ^{1/(2α)}]
    pub high_shape: f64,
    /// 16√2 exp(-t/3) + 24√2 κ²θ^{1/(2α)}
    pub low_bound: f64,
    /// "ok", or the solver failure that voided the record
    pub status: String,
}

impl ExperimentRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn theory(theta: f64, alpha: f64, kappa2: f64) -> (f64, f64, f64) {
    let t = theta.powf(-1.0 / (2.0 * alpha));
    let h = theta.powf(1.0 / (2.0 * alpha));
    let high_env = (1.0 + kappa2) * ((-(1.0 + kappa2) * t / 3.0).exp() + 3.0 * h);
    let low_bound = 16.0 * SQRT_2 * (-t / 3.0).exp() + 24.0 * SQRT_2 * kappa2 * h;
    (t, high_env, low_bound)
}

fn unit_bump_ops(engine: &GammaEngine, fam: &DiscreteFamily) -> Result<Vec<PotentialOperator>> {
    fam.centers
        .iter()
        .map(|c| {
            let q = Potential::bump_sum(
                vec![BumpSpec {
                    center: *c,
                    radius: fam.rho,
                    height: 1.0,
                }],
                fam.r0,
            )?;
            engine.operator(&q)
        })
        .collect()
}

/// Λ_{q_i + q_ref} for member i, with q_i = θ Σ_{b ∈ i} bump_b.
fn member_dtn(
    engine: &GammaEngine,
    ops: &[PotentialOperator],
    theta: f64,
    member: usize,
) -> Result<HarmonicMatrix> {
    if member == 0 {
        return engine.dtn(None);
    }
    let terms: Vec<(f64, &PotentialOperator)> = ops
        .iter()
        .enumerate()
        .filter(|(b, _)| (member >> b) & 1 == 1)
        .map(|(_, o)| (theta, o))
        .collect();
    let op = PotentialOperator::combine(&terms)?;
    engine.dtn(Some(&op))
}

fn failed_record(cfg: &ScanConfig, theta: f64, kappa2: f64, regime: Regime, e: &LabError) -> ExperimentRecord {
    let (t, high_shape, low_bound) = theory(theta, cfg.alpha, kappa2);
    ExperimentRecord {
        theta,
        kappa2,
        alpha: cfg.alpha,
        regime,
        q_ref_shift: regime.q_ref_shift(),
        m_trunc: cfg.solver.out_truncation(),
        member_a: 0,
        member_b: 0,
        dist_svd: f64::NAN,
        dist_xs: f64::NAN,
        xs_bound: f64::NAN,
        sandwich_ok: false,
        separation: f64::NAN,
        separation_ok: false,
        t,
        high_shape,
        low_bound,
        status: e.to_string().replace(['\n', ','], " "),
    }
}

fn scan_point_set(cfg: &ScanConfig, kappa2: f64, families: &[DiscreteFamily]) -> Vec<ExperimentRecord> {
    let regime = cfg.regime.resolve(kappa2);
    let setup = GammaEngine::new(&cfg.solver, regime.q_ref_shift(), kappa2)
        .and_then(|e| unit_bump_ops(&e, &families[0]).map(|ops| (e, ops)));
    let (engine, ops) = match setup {
        Ok(v) => v,
        Err(e) => {
            return families
                .iter()
                .map(|f| failed_record(cfg, f.theta, kappa2, regime, &e))
                .collect()
        }
    };
    families
        .iter()
        .map(|fam| {
            measure(cfg, &engine, &ops, fam, kappa2, regime)
                .unwrap_or_else(|e| failed_record(cfg, fam.theta, kappa2, regime, &e))
        })
        .collect()
}

fn measure(
    cfg: &ScanConfig,
    engine: &GammaEngine,
    ops: &[PotentialOperator],
    fam: &DiscreteFamily,
    kappa2: f64,
    regime: Regime,
) -> Result<ExperimentRecord> {
    let mats = (0..fam.members.len())
        .map(|i| member_dtn(engine, ops, fam.theta, i))
        .collect::<Result<Vec<_>>>()?;
    if mats.iter().any(|m| !m.is_finite()) {
        return Err(LabError::Numerical("non-finite DtN entries".into()));
    }
    let pair = min_distance_pair(&mats, cfg.s)?
        .ok_or_else(|| LabError::Parameter("family has fewer than two members".into()))?;
    let separation = fam.center_distance(pair.a, pair.b);
    let (t, high_shape, low_bound) = theory(fam.theta, cfg.alpha, kappa2);
    Ok(ExperimentRecord {
        theta: fam.theta,
        kappa2,
        alpha: cfg.alpha,
        regime,
        q_ref_shift: regime.q_ref_shift(),
        m_trunc: engine.m_out,
        member_a: pair.a,
        member_b: pair.b,
        dist_svd: pair.svd,
        dist_xs: pair.xs,
        xs_bound: SANDWICH * pair.xs,
        sandwich_ok: pair.svd <= SANDWICH * pair.xs,
        separation,
        separation_ok: separation >= fam.theta,
        t,
        high_shape,
        low_bound,
        status: "ok".into(),
    })
}

/// Records in config order (θ outer, κ² inner), computed in parallel over κ².
pub fn run_scan(cfg: &ScanConfig) -> Result<Vec<ExperimentRecord>> {
    run_scan_streaming(cfg, |_| Ok(()))
}

/// As `run_scan`, handing each κ² column to `sink` in config order as soon
/// as it and all earlier columns are done.
pub fn run_scan_streaming<F>(cfg: &ScanConfig, mut sink: F) -> Result<Vec<ExperimentRecord>>
where
    F: FnMut(&[ExperimentRecord]) -> Result<()>,
{
    cfg.validate()?;
    let families = cfg
        .thetas
        .iter()
        .map(|&t| build_discrete_family_with(&cfg.family_params(t)))
        .collect::<Result<Vec<_>>>()?;
    let chunk = rayon::current_num_threads().max(1);
    let mut columns: Vec<Vec<ExperimentRecord>> = Vec::with_capacity(cfg.kappa2.len());
    for ks in cfg.kappa2.chunks(chunk) {
        let done: Vec<Vec<ExperimentRecord>> = ks
            .par_iter()
            .map(|&k| scan_point_set(cfg, k, &families))
            .collect();
        for col in done {
            sink(&col)?;
            columns.push(col);
        }
    }
    let mut out = Vec::with_capacity(cfg.thetas.len() * cfg.kappa2.len());
    for ti in 0..cfg.thetas.len() {
        for col in &columns {
            out.push(col[ti].clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub theta: f64,
    pub kappa2: f64,
    pub m_base: usize,
    pub m_refined: usize,
    pub base: f64,
    pub refined: f64,
    pub rel_change: f64,
    pub passed: bool,
}

/// Recomputes the recorded pair distance at M + gate_extra for the first and
/// last κ² of every θ.
pub fn truncation_gate(cfg: &ScanConfig, records: &[ExperimentRecord]) -> Result<Vec<GateResult>> {
    let mut refined = cfg.solver.clone();
    refined.m_trunc += cfg.gate_extra;
    refined.m_out = cfg.solver.m_out.map(|m| m + cfg.gate_extra);
    let (first, last) = match (cfg.kappa2.first(), cfg.kappa2.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Ok(vec![]),
    };
    let mut targets: Vec<&ExperimentRecord> = records
        .iter()
        .filter(|r| r.is_ok() && (r.kappa2 == first || r.kappa2 == last))
        .collect();
    targets.dedup_by(|a, b| a.theta == b.theta && a.kappa2 == b.kappa2);
    targets
        .par_iter()
        .map(|r| {
            let fam = build_discrete_family_with(&cfg.family_params(r.theta))?;
            let engine = GammaEngine::new(&refined, r.q_ref_shift, r.kappa2)?;
            let ops = unit_bump_ops(&engine, &fam)?;
            let a = member_dtn(&engine, &ops, r.theta, r.member_a)?;
            let b = member_dtn(&engine, &ops, r.theta, r.member_b)?;
            let d = op_norm_s_to_minus_s(&a.sub(&b)?, cfg.s)?;
            let rel_change = (d - r.dist_svd).abs() / r.dist_svd.max(f64::MIN_POSITIVE);
            Ok(GateResult {
                theta: r.theta,
                kappa2: r.kappa2,
                m_base: r.m_trunc,
                m_refined: engine.m_out,
                base: r.dist_svd,
                refined: d,
                rel_change,
                passed: rel_change < cfg.gate_tolerance,
            })
        })
        .collect()
}

/// max{1,κ²} exp(-c₀ max{1,κ²} t) + κ² θ^{1/(2α)}, the envelope without C_R.
pub fn envelope_shape(c0: f64, kappa2: f64, theta: f64, alpha: f64) -> f64 {
    let k = kappa2.max(1.0);
    let t = theta.powf(-1.0 / (2.0 * alpha));
    k * (-c0 * k * t).exp() + kappa2 * theta.powf(1.0 / (2.0 * alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub c_r: f64,
    pub c0: f64,
    /// root mean square of log(measured / envelope)
    pub log_rms: f64,
    pub n_records: usize,
    /// records above the fitted envelope (indices into the input)
    pub violations: Vec<usize>,
    pub degenerate: bool,
    /// c₀ ended on the edge of the search grid
    pub c0_at_grid_edge: bool,
    /// smallest C_R with measured ≤ C_R (1+κ²)[exp(-(1+κ²)t/3) + 3θ^{1/(2α)}]
    pub c_r_high: f64,
}

impl EnvelopeFit {
    pub fn one_sided(&self) -> bool {
        !self.degenerate && self.violations.is_empty()
    }
}

const C0_LOG_MIN: f64 = -6.0;
const C0_LOG_MAX: f64 = 2.0;

/// For a given c₀ the one-sided C_R is max m/g; c₀ then minimizes the log
/// residuals over a log grid with golden-section refinement.
pub fn fit_envelope(records: &[ExperimentRecord]) -> Result<EnvelopeFit> {
    let pts: Vec<(usize, f64, f64, f64, f64, f64)> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_ok())
        .map(|(i, r)| (i, r.dist_svd, r.kappa2, r.theta, r.alpha, r.high_shape))
        .collect();
    if pts.len() < 8 {
        return Err(LabError::Parameter(format!(
            "envelope fit needs at least 8 valid records, got {}",
            pts.len()
        )));
    }
    let low = k1_quarter();
    if !(pts.iter().any(|p| p.2 <= low) && pts.iter().any(|p| p.2 > low)) {
        return Err(LabError::Parameter("records must span both frequency regimes".into()));
    }
    if pts.iter().all(|p| !(p.1 > 0.0)) {
        return Ok(EnvelopeFit {
            c_r: 0.0,
            c0: 0.0,
            log_rms: f64::NAN,
            n_records: pts.len(),
            violations: vec![],
            degenerate: true,
            c0_at_grid_edge: false,
            c_r_high: 0.0,
        });
    }
    let positive: Vec<_> = pts.iter().filter(|p| p.1 > 0.0).collect();
    let c_r_of = |c0: f64| {
        pts.iter()
            .map(|p| p.1 / envelope_shape(c0, p.2, p.3, p.4))
            .fold(0.0f64, f64::max)
    };
    let cost = |lc: f64| {
        let c0 = 10f64.powf(lc);
        let cr = c_r_of(c0);
        let ss: f64 = positive
            .iter()
            .map(|p| (p.1 / (cr * envelope_shape(c0, p.2, p.3, p.4))).ln().powi(2))
            .sum();
        ss / positive.len() as f64
    };
    let n_grid = 161;
    let grid: Vec<f64> = (0..n_grid)
        .map(|i| C0_LOG_MIN + (C0_LOG_MAX - C0_LOG_MIN) * i as f64 / (n_grid - 1) as f64)
        .collect();
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for (i, &lc) in grid.iter().enumerate() {
        let c = cost(lc);
        if c < best_cost {
            best_cost = c;
            best = i;
        }
    }
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n_grid - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if cost(x1) <= cost(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let mut lc = 0.5 * (a + b);
    if cost(grid[best]) < cost(lc) {
        lc = grid[best];
    }
    let c0 = 10f64.powf(lc);
    let c_r = c_r_of(c0);
    let violations = pts
        .iter()
        .filter(|p| p.1 > c_r * envelope_shape(c0, p.2, p.3, p.4) * (1.0 + 1e-12))
        .map(|p| p.0)
        .collect();
    let c_r_high = pts.iter().map(|p| p.1 / p.5).fold(0.0f64, f64::max);
    let edge = (C0_LOG_MAX - C0_LOG_MIN) / (n_grid - 1) as f64;
    Ok(EnvelopeFit {
        c_r,
        c0,
        log_rms: cost(lc).sqrt(),
        n_records: pts.len(),
        violations,
        degenerate: false,
        c0_at_grid_edge: lc <= C0_LOG_MIN + edge || lc >= C0_LOG_MAX - edge,
        c_r_high,
    })
}

fn k1_quarter() -> f64 {
    kappa1() / 4.0
}

/// Column order of the scan CSV.
pub const CSV_COLUMNS: [&str; 18] = [
    "theta",
    "kappa2",
    "alpha",
    "regime",
    "q_ref_shift",
    "m_trunc",
    "member_a",
    "member_b",
    "dist_svd",
    "dist_xs",
    "xs_bound",
    "sandwich_ok",
    "separation",
    "separation_ok",
    "t",
    "high_shape",
    "low_bound",
    "status",
];

fn record_row(r: &ExperimentRecord) -> Vec<String> {
    vec![
        r.theta.to_string(),
        r.kappa2.to_string(),
        r.alpha.to_string(),
        r.regime.name().to_string(),
        r.q_ref_shift.to_string(),
        r.m_trunc.to_string(),
        r.member_a.to_string(),
        r.member_b.to_string(),
        r.dist_svd.to_string(),
        r.dist_xs.to_string(),
        r.xs_bound.to_string(),
        r.sandwich_ok.to_string(),
        r.separation.to_string(),
        r.separation_ok.to_string(),
        r.t.to_string(),
        r.high_shape.to_string(),
        r.low_bound.to_string(),
        r.status.clone(),
    ]
}

pub fn write_csv<W: std::io::Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    write_rows(&mut w, records)
}

/// Appends rows to a writer that already holds the header.
pub fn write_rows<W: std::io::Write>(w: &mut csv::Writer<W>, records: &[ExperimentRecord]) -> Result<()> {
    for r in records {
        w.write_record(record_row(r))?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize) -> Result<T> {
    row.get(i)
        .ok_or_else(|| LabError::Format(format!("missing column {}", CSV_COLUMNS[i])))?
        .parse()
        .map_err(|_| LabError::Format(format!("bad value in column {}", CSV_COLUMNS[i])))
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(LabError::Format("unexpected CSV header".into()));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let regime = match row.get(3) {
            Some("high") => Regime::High,
            Some("low") => Regime::Low,
            other => return Err(LabError::Format(format!("unknown regime {other:?}"))),
        };
        out.push(ExperimentRecord {
            theta: field(&row, 0)?,
            kappa2: field(&row, 1)?,
            alpha: field(&row, 2)?,
            regime,
            q_ref_shift: field(&row, 4)?,
            m_trunc: field(&row, 5)?,
            member_a: field(&row, 6)?,
            member_b: field(&row, 7)?,
            dist_svd: field(&row, 8)?,
            dist_xs: field(&row, 9)?,
            xs_bound: field(&row, 10)?,
            sandwich_ok: field(&row, 11)?,
            separation: field(&row, 12)?,
            separation_ok: field(&row, 13)?,
            t: field(&row, 14)?,
            high_shape: field(&row, 15)?,
            low_bound: field(&row, 16)?,
            status: field(&row, 17)?,
        });
    }
    Ok(out)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<ExperimentRecord>> {
    read_csv(fs::File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSummary<'a> {
    pub config: &'a ScanConfig,
    pub config_hash: String,
    pub kappa1: f64,
    pub fit: Option<&'a EnvelopeFit>,
    pub gates: &'a [GateResult],
    pub records: &'a [ExperimentRecord],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputManifest {
    pub files: Vec<PathBuf>,
}

/// Writes scan.csv, scan.json and the two SVG plots into `dir`.
pub fn emit_outputs(
    records: &[ExperimentRecord],
    cfg: &ScanConfig,
    fit: Option<&EnvelopeFit>,
    gates: &[GateResult],
    dir: &Path,
) -> Result<OutputManifest> {
    if records.is_empty() {
        return Err(LabError::Parameter("no records to write".into()));
    }
    let mut manifest = OutputManifest::default();
    let write = |name: &str, bytes: Vec<u8>, m: &mut OutputManifest| -> Result<()> {
        let path = dir.join(name);
        fs::create_dir_all(dir)
            .and_then(|_| fs::write(&path, bytes))
            .map_err(|e| {
                let done: Vec<String> = m.files.iter().map(|p| p.display().to_string()).collect();
                LabError::Io(format!("{}: {e}; written so far: [{}]", path.display(), done.join(", ")))
            })?;
        m.files.push(path);
        Ok(())
    };
    let mut csv_bytes = Vec::new();
    write_csv(records, &mut csv_bytes)?;
    write("scan.csv", csv_bytes, &mut manifest)?;
    let summary = ScanSummary {
        config: cfg,
        config_hash: cfg.hash(),
        kappa1: kappa1(),
        fit,
        gates,
        records,
    };
    write("scan.json", serde_json::to_vec_pretty(&summary)?, &mut manifest)?;
    write("distance_vs_kappa2.svg", plot_vs_kappa2(records).into_bytes(), &mut manifest)?;
    write("distance_vs_t.svg", plot_vs_t(records, fit).into_bytes(), &mut manifest)?;
    Ok(manifest)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

impl Frame {
    fn fit(xs: &[f64], ys: &[f64]) -> Frame {
        let span = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() || !hi.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let m = 0.05 * (hi - lo);
                (lo - m, hi + m)
            }
        };
        Frame {
            x: span(xs),
            y: span(ys),
        }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD)
    }

    fn open(&self, title: &str, xlabel: &str, ylabel: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        let _ = writeln!(s, r#"<text x="{}" y="25" text-anchor="middle" font-size="13">{title}</text>"#, W / 2.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 15.0);
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{ylabel}</text>"#,
            H / 2.0,
            H / 2.0
        );
        for k in 0..=4 {
            let fx = self.x.0 + (self.x.1 - self.x.0) * k as f64 / 4.0;
            let fy = self.y.0 + (self.y.1 - self.y.0) * k as f64 / 4.0;
            let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{fx:.2}</text>"#, self.px(fx), H - PAD + 15.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{fy:.2}</text>"#, PAD - 5.0, self.py(fy) + 4.0);
        }
        s
    }

    fn polyline(&self, s: &mut String, pts: &[(f64, f64)], color: &str, dashed: bool) {
        let path: Vec<String> = pts
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|p| format!("{:.2},{:.2}", self.px(p.0), self.py(p.1)))
            .collect();
        let dash = if dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            path.join(" ")
        );
    }

    fn markers(&self, s: &mut String, pts: &[(f64, f64)], color: &str) {
        for p in pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                self.px(p.0),
                self.py(p.1)
            );
        }
    }

    fn legend(&self, s: &mut String, row: usize, label: &str, color: &str) {
        let y = PAD + 14.0 + 14.0 * row as f64;
        let x = W - PAD - 150.0;
        let _ = writeln!(s, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/>"#, y - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{label}</text>"#, x + 14.0);
    }
}

fn distinct(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for x in v {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn plot_vs_kappa2(records: &[ExperimentRecord]) -> String {
    let ok: Vec<&ExperimentRecord> = records.iter().filter(|r| r.is_ok() && r.dist_svd > 0.0).collect();
    let xs: Vec<f64> = ok.iter().map(|r| r.kappa2.log10()).collect();
    let ys: Vec<f64> = ok.iter().map(|r| r.dist_svd.log10()).collect();
    let f = Frame::fit(&xs, &ys);
    let mut s = f.open("minimum pair distance vs frequency", "log10 κ²", "log10 ‖Λ₁ - Λ₂‖");
    for (i, th) in distinct(ok.iter().map(|r| r.theta)).into_iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = ok
            .iter()
            .filter(|r| r.theta == th)
            .map(|r| (r.kappa2.log10(), r.dist_svd.log10()))
            .collect();
        f.polyline(&mut s, &pts, color, false);
        f.markers(&mut s, &pts, color);
        f.legend(&mut s, i, &format!("θ = {th:e}"), color);
    }
    s.push_str("</svg>\n");
    s
}

fn plot_vs_t(records: &[ExperimentRecord], fit: Option<&EnvelopeFit>) -> String {
    let ok: Vec<&ExperimentRecord> = records.iter().filter(|r| r.is_ok() && r.dist_svd > 0.0).collect();
    let kappas = distinct(ok.iter().map(|r| r.kappa2));
    // only the extreme frequencies, to keep the figure readable
    let shown: Vec<f64> = match (kappas.first(), kappas.last()) {
        (Some(a), Some(b)) if a != b => vec![*a, *b],
        (Some(a), _) => vec![*a],
        _ => vec![],
    };
    let mut curves: Vec<(usize, Vec<(f64, f64)>, Vec<(f64, f64)>, Vec<(f64, f64)>)> = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &k) in shown.iter().enumerate() {
        let mut sel: Vec<&&ExperimentRecord> = ok.iter().filter(|r| r.kappa2 == k).collect();
        sel.sort_by(|a, b| a.t.total_cmp(&b.t));
        let pts: Vec<(f64, f64)> = sel.iter().map(|r| (r.t, r.dist_svd.log10())).collect();
        let high_env: Vec<(f64, f64)> = match fit {
            Some(f) if f.c_r_high > 0.0 => sel.iter().map(|r| (r.t, (f.c_r_high * r.high_shape).log10())).collect(),
            _ => vec![],
        };
        let low_env: Vec<(f64, f64)> = match fit {
            Some(f) if f.c_r > 0.0 => sel
                .iter()
                .map(|r| (r.t, (f.c_r * envelope_shape(f.c0, r.kappa2, r.theta, r.alpha)).log10()))
                .collect(),
            _ => vec![],
        };
        for p in pts.iter().chain(&high_env).chain(&low_env) {
            xs.push(p.0);
            ys.push(p.1);
        }
        curves.push((i, pts, high_env, low_env));
    }
    let f = Frame::fit(&xs, &ys);
    let mut s = f.open("minimum pair distance vs θ^(-1/(2α))", "θ^(-1/(2α))", "log10 ‖Λ₁ - Λ₂‖");
    for (i, pts, high_env, low_env) in &curves {
        let color = PALETTE[*i % PALETTE.len()];
        f.markers(&mut s, pts, color);
        f.polyline(&mut s, pts, color, false);
        f.polyline(&mut s, high_env, color, true);
        f.polyline(&mut s, low_env, "#555555", true);
        f.legend(&mut s, *i, &format!("κ² = {:.3}", shown[*i]), color);
    }
    let _ = writeln!(
        s,
        r##"<text x="{PAD}" y="{}" fill="#555555">dashed: fitted single-regime and combined envelopes</text>"##,
        H - 35.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_space_endpoints() {
        let v = log_space(0.05, 50.0, 16);
        assert_eq!(v.len(), 16);
        assert_eq!(v[0], 0.05);
        assert_eq!(v[15], 50.0);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn default_config_is_valid() {
        ScanConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScanConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: ScanConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }
}
