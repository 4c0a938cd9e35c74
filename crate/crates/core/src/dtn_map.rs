//! DtN matrices Λ_q, the difference Γ(q; q_ref) = Λ_{q+q_ref} - Λ_{q_ref},
//! its volume-integral representation and the M⁽¹⁾/M⁽²⁾ split.

use crate::error::{LabError, Result};
use crate::forward_solver::galerkin::{dtn_from_solution, lifted_rhs, solve_system};
use crate::forward_solver::{solve_radial_mode, PotentialOperator, RadialBasis, SolverConfig};
use crate::harmonics::{indices, op_norm_s_to_minus_s, HarmonicIndex, HarmonicMatrix};
use crate::potentials::Potential;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    Radial,
    Galerkin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtnMatrix {
    pub entries: HarmonicMatrix,
    pub kappa2: f64,
    pub potential_id: String,
    pub solver_path: SolverPath,
}

impl DtnMatrix {
    pub fn truncation(&self) -> usize {
        self.entries.m_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaProvenance {
    BoundaryDifference,
    VolumeIntegral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrix {
    /// I-form for volume provenance
    pub entries: HarmonicMatrix,
    pub provenance: GammaProvenance,
    pub l_form: Option<HarmonicMatrix>,
    pub m1: Option<HarmonicMatrix>,
    pub m2: Option<HarmonicMatrix>,
    pub kappa2: f64,
    pub q_ref_shift: f64,
}

impl GammaMatrix {
    pub fn truncation(&self) -> usize {
        self.entries.m_max
    }
}

fn radial_dtn(q: &Potential, shift: f64, kappa2: f64, cfg: &SolverConfig) -> Result<HarmonicMatrix> {
    let prof = q
        .radial_fn()
        .ok_or_else(|| LabError::Parameter("potential is not radial".into()))?;
    let m_out = cfg.out_truncation();
    let mut out = HarmonicMatrix::zeros(m_out);
    let im = q.imaginary_shift + shift;
    for m in 0..=m_out {
        let sol = solve_radial_mode(|r| Complex64::new(prof(r), im), kappa2, m, cfg)?;
        for j in 1..=(if m == 0 { 1 } else { 2 }) {
            let idx = HarmonicIndex { m, j };
            out.set(idx, idx, sol.boundary_derivative);
        }
    }
    Ok(out)
}

/// Λ_q at κ²; radial potentials use the per-mode ODE, the rest Galerkin.
pub fn assemble_dtn(q: &Potential, kappa2: f64, cfg: &SolverConfig) -> Result<DtnMatrix> {
    cfg.validate()?;
    let (entries, solver_path) = if q.is_radial() {
        (radial_dtn(q, 0.0, kappa2, cfg)?, SolverPath::Radial)
    } else {
        let engine = GammaEngine::new(cfg, q.imaginary_shift, kappa2)?;
        let op = engine.operator(q)?;
        (engine.dtn(Some(&op))?, SolverPath::Galerkin)
    };
    Ok(DtnMatrix {
        entries,
        kappa2,
        potential_id: q.content_hash(),
        solver_path,
    })
}

/// Shared Galerkin state for many Γ(·; q_ref) evaluations at fixed κ².
pub struct GammaEngine {
    pub basis: RadialBasis,
    pub cfg: SolverConfig,
    pub m_out: usize,
    pub c0: Complex64,
    pub q_ref_shift: f64,
    pub kappa2: f64,
    data: Vec<HarmonicIndex>,
    ref_coeffs: DMatrix<Complex64>,
    ref_coeffs_conj: DMatrix<Complex64>,
    ref_dtn: HarmonicMatrix,
}

impl GammaEngine {
    pub fn new(cfg: &SolverConfig, q_ref_shift: f64, kappa2: f64) -> Result<Self> {
        cfg.validate()?;
        let basis = RadialBasis::new(cfg)?;
        let m_out = cfg.out_truncation();
        let data = indices(m_out);
        let c0 = Complex64::new(kappa2, q_ref_shift);
        let rhs = lifted_rhs(&basis, None, c0, &data);
        let ref_coeffs = solve_system(&basis, None, c0, &rhs, cfg)?.coeffs;
        let rhs_c = lifted_rhs(&basis, None, c0.conj(), &data);
        let ref_coeffs_conj = solve_system(&basis, None, c0.conj(), &rhs_c, cfg)?.coeffs;
        let ref_dtn = dtn_from_solution(&basis, None, c0, &ref_coeffs, &data, m_out);
        Ok(GammaEngine {
            basis,
            cfg: cfg.clone(),
            m_out,
            c0,
            q_ref_shift,
            kappa2,
            data,
            ref_coeffs,
            ref_coeffs_conj,
            ref_dtn,
        })
    }

    pub fn operator(&self, q: &Potential) -> Result<PotentialOperator> {
        PotentialOperator::assemble(&self.basis, q, self.m_out)
    }

    fn solve(&self, op: Option<&PotentialOperator>, c0: Complex64) -> Result<DMatrix<Complex64>> {
        let rhs = lifted_rhs(&self.basis, op, c0, &self.data);
        Ok(solve_system(&self.basis, op, c0, &rhs, &self.cfg)?.coeffs)
    }

    /// Λ_{q + q_ref} for the potential behind `op` (None for q = 0).
    pub fn dtn(&self, op: Option<&PotentialOperator>) -> Result<HarmonicMatrix> {
        if op.is_none() {
            return Ok(self.ref_dtn.clone());
        }
        let c = self.solve(op, self.c0)?;
        Ok(dtn_from_solution(
            &self.basis,
            op,
            self.c0,
            &c,
            &self.data,
            self.m_out,
        ))
    }

    pub fn reference_dtn(&self) -> &HarmonicMatrix {
        &self.ref_dtn
    }

    pub fn gamma(&self, op: &PotentialOperator) -> Result<HarmonicMatrix> {
        self.dtn(Some(op))?.sub(&self.ref_dtn)
    }

    /// I- and L-form volume integrals and the M-split.
    pub fn volume(&self, op: &PotentialOperator) -> Result<VolumeForms> {
        let n = self.basis.n_rad;
        let cu = self.solve(Some(op), self.c0)?;
        let cv = self.solve(Some(op), self.c0.conj())?;
        let du = &cu - &self.ref_coeffs;
        let dv = &cv - &self.ref_coeffs_conj;
        let mu = &self.basis.mu;
        let m = self.m_out;
        let mut i1 = HarmonicMatrix::zeros(m);
        let mut i2 = HarmonicMatrix::zeros(m);
        let mut l1 = HarmonicMatrix::zeros(m);
        let mut l2 = HarmonicMatrix::zeros(m);
        // (w_d, q Ỹ_e) summed over the basis, for u and for conj(v)
        let tu = cu.transpose() * op.t.map(|x| Complex64::new(x, 0.0));
        let tv = cv.map(|z| z.conj()).transpose() * op.t.map(|x| Complex64::new(x, 0.0));
        for (di, &d) in self.data.iter().enumerate() {
            for (ei, &e) in self.data.iter().enumerate() {
                i1.set(d, e, -(op.q0[(di, ei)] + tu[(di, ei)]));
                l1.set(d, e, -(op.q0[(ei, di)] + tv[(ei, di)]));
                let mut s_i = Complex64::new(0.0, 0.0);
                let mut s_l = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    s_i += du[(e.flat() * n + k, di)] * mu[e.m][k];
                    s_l += dv[(d.flat() * n + k, ei)].conj() * mu[d.m][k];
                }
                i2.set(d, e, -self.c0 * s_i);
                // conj of (Δ + conj(q_ref) + κ²) carries q_ref + κ² back
                l2.set(d, e, -self.c0 * s_l);
            }
        }
        let mut m1 = HarmonicMatrix::zeros(m);
        let mut m2 = HarmonicMatrix::zeros(m);
        for &d in &self.data {
            for &e in &self.data {
                let (a, b) = if e.m >= d.m {
                    (i1.get(d, e), i2.get(d, e))
                } else {
                    (l1.get(d, e), l2.get(d, e))
                };
                m1.set(d, e, a);
                m2.set(d, e, b);
            }
        }
        Ok(VolumeForms {
            i1,
            i2,
            l1,
            l2,
            m1,
            m2,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeForms {
    pub i1: HarmonicMatrix,
    pub i2: HarmonicMatrix,
    pub l1: HarmonicMatrix,
    pub l2: HarmonicMatrix,
    pub m1: HarmonicMatrix,
    pub m2: HarmonicMatrix,
}

impl VolumeForms {
    pub fn i_form(&self) -> HarmonicMatrix {
        add(&self.i1, &self.i2)
    }

    pub fn l_form(&self) -> HarmonicMatrix {
        add(&self.l1, &self.l2)
    }
}

fn add(a: &HarmonicMatrix, b: &HarmonicMatrix) -> HarmonicMatrix {
    HarmonicMatrix {
        m_max: a.m_max,
        dim: a.dim,
        data: &a.data + &b.data,
    }
}

fn require_real(q: &Potential) -> Result<()> {
    if q.imaginary_shift != 0.0 {
        return Err(LabError::Parameter(
            "Γ(q; q_ref) takes a real q; put the imaginary part in q_ref".into(),
        ));
    }
    Ok(())
}

/// Γ(q; i·q_ref_shift) as a difference of two DtN matrices.
pub fn gamma_boundary(
    q: &Potential,
    q_ref_shift: f64,
    kappa2: f64,
    cfg: &SolverConfig,
) -> Result<GammaMatrix> {
    cfg.validate()?;
    require_real(q)?;
    let entries = if q.is_zero() {
        HarmonicMatrix::zeros(cfg.out_truncation())
    } else if q.is_radial() {
        let full = radial_dtn(q, q_ref_shift, kappa2, cfg)?;
        let reference = radial_dtn(&Potential::zero(), q_ref_shift, kappa2, cfg)?;
        full.sub(&reference)?
    } else {
        let engine = GammaEngine::new(cfg, q_ref_shift, kappa2)?;
        engine.gamma(&engine.operator(q)?)?
    };
    Ok(GammaMatrix {
        entries,
        provenance: GammaProvenance::BoundaryDifference,
        l_form: None,
        m1: None,
        m2: None,
        kappa2,
        q_ref_shift,
    })
}

/// Γ(q; i·q_ref_shift) from the volume integrals, with M⁽¹⁾, M⁽²⁾ stored.
pub fn gamma_volume(
    q: &Potential,
    q_ref_shift: f64,
    kappa2: f64,
    cfg: &SolverConfig,
) -> Result<GammaMatrix> {
    require_real(q)?;
    let engine = GammaEngine::new(cfg, q_ref_shift, kappa2)?;
    let op = engine.operator(q)?;
    let forms = engine.volume(&op)?;
    Ok(gamma_from_forms(forms, kappa2, q_ref_shift))
}

pub fn gamma_from_forms(forms: VolumeForms, kappa2: f64, q_ref_shift: f64) -> GammaMatrix {
    GammaMatrix {
        entries: forms.i_form(),
        provenance: GammaProvenance::VolumeIntegral,
        l_form: Some(forms.l_form()),
        m1: Some(forms.m1),
        m2: Some(forms.m2),
        kappa2,
        q_ref_shift,
    }
}

/// Φ(R, λ, κ) = (R+1)((1/λ)(1+R+λ+κ²)+1).
pub fn phi_factor(sup_bound: f64, lambda: f64, kappa2: f64) -> f64 {
    (sup_bound + 1.0) * ((1.0 + sup_bound + lambda + kappa2) / lambda + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub phi: f64,
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub slope: f64,
    pub expected_slope: f64,
    pub slope_rel_error: f64,
    pub ell_range: (usize, usize),
    /// max |M⁽¹⁾| per shell ℓ = max{m, n}
    pub shell_max_m1: Vec<f64>,
    pub shell_max_m2: Vec<f64>,
}

/// Fits Ĉ₁, Ĉ₂ and regresses log max|M⁽¹⁾| on ℓ over `ell_range`
/// (defaults to [5, M-4]).
pub fn verify_decay_bounds(
    g: &GammaMatrix,
    q: &Potential,
    q_ref_shift: f64,
    kappa2: f64,
    lambda: f64,
    ell_range: Option<(usize, usize)>,
) -> Result<DecayReport> {
    let (m1, m2) = match (&g.m1, &g.m2) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(LabError::Parameter("Γ lacks the M-split".into())),
    };
    let mm = m1.m_max;
    let phi = phi_factor(q.sup_bound, lambda, kappa2);
    let r0 = q.r0;
    let weight2 = q_ref_shift.abs() + kappa2;
    let mut shell1 = vec![0.0f64; mm + 1];
    let mut shell2 = vec![0.0f64; mm + 1];
    let mut c1 = 0.0f64;
    let mut c2 = 0.0f64;
    for d in indices(mm) {
        for e in indices(mm) {
            let l = d.m.max(e.m);
            let a = m1.get(d, e).norm();
            let b = m2.get(d, e).norm();
            shell1[l] = shell1[l].max(a);
            shell2[l] = shell2[l].max(b);
            c1 = c1.max(a / (phi * (1.0 + l as f64) * r0.powi(l as i32)));
            let denom = phi * weight2 * (1.0 + l as f64);
            c2 = c2.max(if b == 0.0 {
                0.0
            } else if denom > 0.0 {
                b / denom
            } else {
                f64::INFINITY
            });
        }
    }
    let (lo, hi) = ell_range.unwrap_or((5.min(mm), mm.saturating_sub(4)));
    let hi = hi.min(mm);
    let pts: Vec<(f64, f64)> = (lo..=hi)
        .filter(|&l| shell1[l] > 0.0)
        .map(|l| (l as f64, shell1[l].ln()))
        .collect();
    let slope = least_squares_slope(&pts);
    let expected = r0.ln();
    Ok(DecayReport {
        phi,
        c1_hat: c1,
        c2_hat: c2,
        slope,
        expected_slope: expected,
        slope_rel_error: ((slope - expected) / expected).abs(),
        ell_range: (lo, hi),
        shell_max_m1: shell1,
        shell_max_m2: shell2,
    })
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub kappa2: f64,
    pub t_values: Vec<f64>,
    /// ‖Λ_{q1} - Λ_{q_t}‖_{1/2→-1/2}
    pub distances: Vec<f64>,
    /// ‖q1 - q_t‖∞ (sampled)
    pub sup_distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// Sampled sup of |Re q| on a polar grid plus the bump centers.
pub fn sampled_sup(q: &Potential) -> f64 {
    if let crate::potentials::PotentialKind::Constant { value } = q.kind {
        return value.abs();
    }
    let mut best = 0.0f64;
    for b in q.bumps() {
        best = best.max(q.real_at(b.center[0], b.center[1]).abs());
    }
    for i in 0..=200 {
        let r = i as f64 / 200.0;
        for p in 0..256 {
            let a = 2.0 * std::f64::consts::PI * p as f64 / 256.0;
            best = best.max(q.real_at(r * a.cos(), r * a.sin()).abs());
        }
    }
    best
}

/// Forward-map modulus ‖Λ_{q1} - Λ_{q_t}‖ / ‖q1 - q_t‖ along q_t = q1 + t(q2 - q1).
pub fn lipschitz_sanity(
    q1: &Potential,
    q2: &Potential,
    kappa2: f64,
    cfg: &SolverConfig,
) -> Result<LipschitzReport> {
    let base = assemble_dtn(q1, kappa2, cfg)?;
    let t_values = vec![1.0, 0.5, 0.25];
    let mut distances = Vec::new();
    let mut sups = Vec::new();
    let mut ratios = Vec::new();
    for &t in &t_values {
        let qt = Potential::affine(1.0 - t, q1, t, q2)?;
        let diff = Potential::affine(1.0, q1, -1.0, &qt)?;
        let sup = sampled_sup(&diff);
        let dist = if sup == 0.0 {
            0.0
        } else {
            let other = assemble_dtn(&qt, kappa2, cfg)?;
            op_norm_s_to_minus_s(&base.entries.sub(&other.entries)?, 0.5)?
        };
        distances.push(dist);
        sups.push(sup);
        ratios.push(if sup == 0.0 { 0.0 } else { dist / sup });
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(LipschitzReport {
        kappa2,
        t_values,
        distances,
        sup_distances: sups,
        ratios,
        max_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub object: String,
    pub m_max: usize,
    pub kappa2: f64,
    #[serde(default)]
    pub q_ref_shift: f64,
    #[serde(default)]
    pub potential_id: String,
    pub origin: String,
    /// (m, j) for each row/column position
    pub index_map: Vec<(usize, usize)>,
}

/// Writes `<stem>.json` (metadata and index map) and `<stem>.csv`
/// (row, col, re, im for every entry).
pub fn write_matrix(dir: &Path, stem: &str, meta: &MatrixMeta, a: &HarmonicMatrix) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(meta)?,
    )?;
    let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
    w.write_record(["row", "col", "re", "im"])?;
    for c in 0..a.side() {
        for r in 0..a.side() {
            let z = a.data[(r, c)];
            w.write_record([r.to_string(), c.to_string(), z.re.to_string(), z.im.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(dir: &Path, stem: &str) -> Result<(MatrixMeta, HarmonicMatrix)> {
    let meta: MatrixMeta =
        serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    let mut a = HarmonicMatrix::zeros(meta.m_max);
    let mut rd = csv::Reader::from_path(dir.join(format!("{stem}.csv")))?;
    for rec in rd.records() {
        let rec = rec?;
        let parse_u = |i: usize| -> Result<usize> {
            rec[i]
                .parse()
                .map_err(|e| LabError::Format(format!("bad index {}: {e}", &rec[i])))
        };
        let parse_f = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|e| LabError::Format(format!("bad value {}: {e}", &rec[i])))
        };
        let (r, c) = (parse_u(0)?, parse_u(1)?);
        if r >= a.side() || c >= a.side() {
            return Err(LabError::Shape(format!("entry ({r},{c}) outside matrix")));
        }
        a.data[(r, c)] = Complex64::new(parse_f(2)?, parse_f(3)?);
    }
    Ok((meta, a))
}

pub fn meta_for_dtn(d: &DtnMatrix) -> MatrixMeta {
    MatrixMeta {
        object: "dtn".into(),
        m_max: d.entries.m_max,
        kappa2: d.kappa2,
        q_ref_shift: 0.0,
        potential_id: d.potential_id.clone(),
        origin: serde_json::to_value(d.solver_path)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default(),
        index_map: indices(d.entries.m_max).iter().map(|i| (i.m, i.j)).collect(),
    }
}

pub fn meta_for_gamma(g: &GammaMatrix, potential_id: &str) -> MatrixMeta {
    MatrixMeta {
        object: "gamma".into(),
        m_max: g.entries.m_max,
        kappa2: g.kappa2,
        q_ref_shift: g.q_ref_shift,
        potential_id: potential_id.into(),
        origin: serde_json::to_value(g.provenance)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default(),
        index_map: indices(g.entries.m_max).iter().map(|i| (i.m, i.j)).collect(),
    }
}
