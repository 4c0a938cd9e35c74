//! δ-nets of Γ matrix classes: the truncation level ℓ*, the Y₁′/Y₂′ grids
//! and their cardinalities, quantization of computed Γ matrices into net
//! cells, the θ ↔ δ relations of the two frequency regimes, and collision
//! search over a discrete potential family.

use crate::dtn_map::{phi_factor, GammaMatrix};
use crate::error::{LabError, Result};
use crate::harmonics::{indices, op_norm_s_to_minus_s, x_s_norm, HarmonicMatrix};
use crate::potentials::DiscreteFamily;
use crate::special::kappa1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::hash::Hasher;

const DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// q_ref = i, λ = 1
    High,
    /// q_ref = 0, κ² ≤ κ₁/4
    Low,
}

impl Regime {
    pub fn q_ref_shift(self) -> f64 {
        match self {
            Regime::High => 1.0,
            Regime::Low => 0.0,
        }
    }

    /// Low frequency up to κ₁/4, high beyond.
    pub fn for_kappa2(kappa2: f64) -> Regime {
        if kappa2 <= kappa1() / 4.0 {
            Regime::Low
        } else {
            Regime::High
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::High => "high",
            Regime::Low => "low",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllStar {
    pub ell_star: u64,
    pub ell1: f64,
    pub ell2: f64,
    /// δ / (4√2 C″ Φ)
    pub threshold: f64,
    /// ℓ* ≤ ⌈ℓ₁ + ℓ₂⌉
    pub within_bound: bool,
}

fn decay_profile(ell: f64, tau: f64, r0: f64, a: f64) -> f64 {
    (-tau * (1.0 + ell).ln()).exp() * (r0.powf(ell) + a)
}

/// Smallest ℓ with (1+ℓ')^{-τ}(r₀^ℓ' + ‖q_ref‖ + κ²) ≤ δ/(4√2 C″Φ) for all
/// ℓ' ≥ ℓ, together with the analytic bounds ℓ₁ and ℓ₂.
pub fn ell_star(
    delta: f64,
    phi: f64,
    kappa2: f64,
    q_ref_norm: f64,
    tau: f64,
    r0: f64,
    c_dd: f64,
) -> Result<EllStar> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(LabError::Parameter(format!("r0={r0} not in (0,1)")));
    }
    if !(delta > 0.0 && phi > 0.0 && c_dd > 0.0) || !(kappa2 >= 0.0 && q_ref_norm >= 0.0) {
        return Err(LabError::Parameter("ℓ* needs δ, Φ, C″ > 0".into()));
    }
    if !(tau > 0.0) {
        return Err(LabError::Regime(format!(
            "τ = {tau}: the truncation level needs s > (d+2)/2"
        )));
    }
    let a = q_ref_norm + kappa2;
    let threshold = delta / (4.0 * SQRT_2 * c_dd * phi);
    // the profile is strictly decreasing for τ > 0, so the first hit is ℓ*
    let f = |l: u64| decay_profile(l as f64, tau, r0, a);
    let ell_star = if f(0) <= threshold {
        0
    } else {
        let mut hi = 1u64;
        while f(hi) > threshold {
            if hi >= 1 << 60 {
                return Err(LabError::Regime("no finite truncation level".into()));
            }
            hi *= 2;
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if f(mid) <= threshold {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };

    let t1 = threshold / 2.0;
    let ell1 = if t1 >= 1.0 {
        0.0
    } else {
        let g = |l: f64| -tau * (1.0 + l).ln() + l * r0.ln() - t1.ln();
        let (mut lo, mut hi) = (0.0, t1.ln() / r0.ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let ell2 = if a == 0.0 {
        0.0
    } else {
        ((t1 / a).powf(-1.0 / tau) - 1.0).max(0.0)
    };
    Ok(EllStar {
        ell_star,
        ell1,
        ell2,
        threshold,
        within_bound: ell_star as f64 <= (ell1 + ell2).ceil(),
    })
}

/// C₂ = sup over integers ℓ ≥ 0 of (1+ℓ) r₀^ℓ.
pub fn c2_constant(r0: f64) -> f64 {
    let mut best = 1.0f64;
    let mut l = 1u32;
    loop {
        let v = (1.0 + l as f64) * r0.powi(l as i32);
        if v > best {
            best = v;
        } else if l as f64 > 1.0 / (1.0 - r0) {
            // unimodal past its peak
            return best;
        }
        l += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetParams {
    pub r0: f64,
    /// R for the high-frequency class; the low-frequency class uses κ₁/4
    #[serde(rename = "R")]
    pub sup_bound: f64,
    /// the configured C″
    pub c_dd: f64,
    /// Sobolev index; τ = s - (d+2)/2
    pub s: f64,
}

impl Default for NetParams {
    fn default() -> Self {
        NetParams {
            r0: 0.5,
            sup_bound: 1.0,
            c_dd: 4.0,
            s: (DIM as f64 + 4.0) / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub regime: Regime,
    pub delta: f64,
    pub delta_prime: f64,
    /// lattice step δ′/√2
    pub step: f64,
    pub ell_star: u64,
    pub ell1: f64,
    pub ell2: f64,
    pub ell_within_bound: bool,
    /// box half-widths for Y₁′ and Y₂′
    pub amp1: f64,
    pub amp2: f64,
    pub c2: f64,
    pub c_dd: f64,
    pub s: f64,
    pub tau: f64,
    pub r0: f64,
    pub sup_bound: f64,
    pub phi: f64,
    pub kappa2: f64,
    pub q_ref_norm: f64,
    /// number of 4-tuples with max{m,n} ≤ ℓ*
    pub n_star: f64,
    pub log_y1: f64,
    pub log_y2: f64,
    /// log|Y| = n*(log|Y₁′| + log|Y₂′|)
    pub log_card: f64,
    /// 8(1+ℓ*)^{2d-2}
    pub n_star_bound: f64,
}

impl NetSpec {
    /// 1 + log(1+Φ/δ) + aΦ/δ + (aΦ/δ)^{1/τ}, a = ‖q_ref‖ + κ²
    pub fn size_base(&self) -> f64 {
        let u = self.phi / self.delta;
        let a = (self.q_ref_norm + self.kappa2) * u;
        1.0 + u.ln_1p() + a + a.powf(1.0 / self.tau)
    }

    /// The bracket of the cardinality estimate raised to 2d.
    pub fn size_shape(&self) -> f64 {
        self.size_base().powi(2 * DIM as i32)
    }

    /// Cells have integer coordinates in [-k, k] per real component.
    pub fn box_index(&self, amp: f64) -> i64 {
        (amp / self.step).floor() as i64
    }
}

fn log_grid(amp: f64, step: f64) -> f64 {
    2.0 * (1.0 + 2.0 * (amp / step).floor()).ln()
}

pub fn build_net_spec(delta: f64, regime: Regime, kappa2: f64, p: &NetParams) -> Result<NetSpec> {
    if !(kappa2 > 0.0) {
        return Err(LabError::Parameter(format!("κ²={kappa2} must be positive")));
    }
    let (phi, q_ref_norm, sup_bound) = match regime {
        Regime::High => (phi_factor(p.sup_bound, 1.0, kappa2), 1.0, p.sup_bound),
        Regime::Low => {
            let k1 = kappa1();
            if kappa2 > k1 / 4.0 {
                return Err(LabError::Parameter(format!(
                    "low-frequency nets need κ² ≤ κ₁/4 = {}",
                    k1 / 4.0
                )));
            }
            (1.0, 0.0, k1 / 4.0)
        }
    };
    if !(delta > 0.0 && delta < phi) {
        return Err(LabError::Parameter(format!("δ={delta} outside (0, {phi})")));
    }
    let tau = p.s - (DIM as f64 + 2.0) / 2.0;
    let es = ell_star(delta, phi, kappa2, q_ref_norm, tau, p.r0, p.c_dd)?;
    let c2 = c2_constant(p.r0);
    let a = q_ref_norm + kappa2;
    let delta_prime = delta / (8.0 * SQRT_2);
    let step = delta_prime / SQRT_2;
    let amp1 = p.c_dd * c2 * phi;
    let amp2 = p.c_dd * phi * a * (1.0 + es.ell_star as f64);
    let side = 2.0 * es.ell_star as f64 + 1.0;
    let n_star = side * side;
    let log_y1 = log_grid(amp1, step);
    let log_y2 = log_grid(amp2, step);
    Ok(NetSpec {
        regime,
        delta,
        delta_prime,
        step,
        ell_star: es.ell_star,
        ell1: es.ell1,
        ell2: es.ell2,
        ell_within_bound: es.within_bound,
        amp1,
        amp2,
        c2,
        c_dd: p.c_dd,
        s: p.s,
        tau,
        r0: p.r0,
        sup_bound,
        phi,
        kappa2,
        q_ref_norm,
        n_star,
        log_y1,
        log_y2,
        log_card: n_star * (log_y1 + log_y2),
        n_star_bound: 8.0 * (1.0 + es.ell_star as f64).powi(2 * DIM as i32 - 2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaFit {
    pub eta: f64,
    pub samples: usize,
    /// (δ, κ², log|Y|, shape) per sample
    pub points: Vec<(f64, f64, f64, f64)>,
}

/// Smallest η with log|Y| ≤ η·shape over the (δ/Φ, κ²) grid.
pub fn fit_eta(regime: Regime, p: &NetParams, delta_fracs: &[f64], kappas: &[f64]) -> Result<EtaFit> {
    let mut points = Vec::new();
    let mut eta = 0.0f64;
    for &k in kappas {
        for &f in delta_fracs {
            let phi = match regime {
                Regime::High => phi_factor(p.sup_bound, 1.0, k),
                Regime::Low => 1.0,
            };
            let spec = build_net_spec(f * phi, regime, k, p)?;
            let shape = spec.size_shape();
            eta = eta.max(spec.log_card / shape);
            points.push((spec.delta, k, spec.log_card, shape));
        }
    }
    Ok(EtaFit {
        eta,
        samples: points.len(),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetCell {
    /// shells max{m,n} ≤ ell are quantized, the rest are zero
    pub ell: usize,
    /// (Re, Im) lattice coordinates of M⁽¹⁾ and M⁽²⁾ in index order
    pub m1: Vec<[i64; 2]>,
    pub m2: Vec<[i64; 2]>,
    /// entries that left their box by more than one step
    pub overflow: usize,
}

impl NetCell {
    /// FNV-1a over the little-endian i64 stream ell, m1…, m2….
    pub fn hash64(&self) -> u64 {
        let mut h = fnv::FnvHasher::default();
        h.write(&(self.ell as i64).to_le_bytes());
        for c in self.m1.iter().chain(&self.m2) {
            h.write(&c[0].to_le_bytes());
            h.write(&c[1].to_le_bytes());
        }
        h.finish()
    }
}

/// Nearest lattice index; exact half-steps go toward zero.
fn lattice_index(x: f64, step: f64) -> i64 {
    let y = x / step;
    let t = y.trunc();
    if (y - t).abs() == 0.5 {
        t as i64
    } else {
        y.round() as i64
    }
}

fn quantize_entry(z: Complex64, step: f64, kmax: i64, overflow: &mut usize) -> [i64; 2] {
    let mut out = [lattice_index(z.re, step), lattice_index(z.im, step)];
    for c in out.iter_mut() {
        if c.abs() > kmax + 1 {
            *overflow += 1;
        }
        *c = (*c).clamp(-kmax, kmax);
    }
    out
}

fn split_of(g: &GammaMatrix) -> Result<(&HarmonicMatrix, &HarmonicMatrix)> {
    match (&g.m1, &g.m2) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(LabError::Parameter(
            "quantization needs the M⁽¹⁾/M⁽²⁾ split (volume provenance)".into(),
        )),
    }
}

/// Rounds M⁽¹⁾ and M⁽²⁾ onto the (δ′/√2)ℤ² lattice inside the boxes. Shells
/// beyond the stored truncation are treated as zero.
pub fn quantize_gamma(g: &GammaMatrix, spec: &NetSpec) -> Result<NetCell> {
    let (m1, m2) = split_of(g)?;
    let ell = (spec.ell_star.min(usize::MAX as u64) as usize).min(m1.m_max);
    let (k1, k2) = (spec.box_index(spec.amp1), spec.box_index(spec.amp2));
    let mut overflow = 0;
    let idx = indices(ell);
    let mut c1 = Vec::with_capacity(idx.len() * idx.len());
    let mut c2 = Vec::with_capacity(idx.len() * idx.len());
    for &d in &idx {
        for &e in &idx {
            c1.push(quantize_entry(m1.get(d, e), spec.step, k1, &mut overflow));
            c2.push(quantize_entry(m2.get(d, e), spec.step, k2, &mut overflow));
        }
    }
    Ok(NetCell {
        ell,
        m1: c1,
        m2: c2,
        overflow,
    })
}

/// The net elements (b, c) of a cell at truncation `m_max`.
pub fn reconstruct(cell: &NetCell, spec: &NetSpec, m_max: usize) -> (HarmonicMatrix, HarmonicMatrix) {
    let mut b = HarmonicMatrix::zeros(m_max);
    let mut c = HarmonicMatrix::zeros(m_max);
    let idx = indices(cell.ell.min(m_max));
    let n = indices(cell.ell).len();
    for (i, &d) in idx.iter().enumerate() {
        for (k, &e) in idx.iter().enumerate() {
            let p = i * n + k;
            let z = |v: [i64; 2]| Complex64::new(v[0] as f64 * spec.step, v[1] as f64 * spec.step);
            b.set(d, e, z(cell.m1[p]));
            c.set(d, e, z(cell.m2[p]));
        }
    }
    (b, c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetCheck {
    /// max over entries of 4√2 (1+ℓ)^{d/2-s}(|b - M⁽¹⁾| + |c - M⁽²⁾|)
    pub chain_max: f64,
    /// ‖b + c - Γ‖_{X_s}
    pub xs_error: f64,
    pub overflow: usize,
    pub within: bool,
}

/// Verifies the δ-net property of the quantized cell for one Γ.
pub fn check_net(g: &GammaMatrix, spec: &NetSpec) -> Result<NetCheck> {
    let (m1, m2) = split_of(g)?;
    let cell = quantize_gamma(g, spec)?;
    let (b, c) = reconstruct(&cell, spec, m1.m_max);
    let mut chain = 0.0f64;
    let mut recon = HarmonicMatrix::zeros(m1.m_max);
    let mut total = HarmonicMatrix::zeros(m1.m_max);
    for d in indices(m1.m_max) {
        for e in indices(m1.m_max) {
            let w = (1.0 + d.m.max(e.m) as f64).powf(DIM as f64 / 2.0 - spec.s);
            let err = (b.get(d, e) - m1.get(d, e)).norm() + (c.get(d, e) - m2.get(d, e)).norm();
            chain = chain.max(4.0 * SQRT_2 * w * err);
            recon.set(d, e, b.get(d, e) + c.get(d, e));
            total.set(d, e, m1.get(d, e) + m2.get(d, e));
        }
    }
    let xs_error = x_s_norm(&recon.sub(&total)?, spec.s);
    // rounding slack of a few ulps on the step-size comparison
    let tol = spec.delta * (1.0 + 1e-12);
    Ok(NetCheck {
        chain_max: chain,
        xs_error,
        overflow: cell.overflow,
        within: chain <= tol && xs_error <= tol && cell.overflow == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaDelta {
    pub regime: Regime,
    pub theta: f64,
    pub alpha: f64,
    pub kappa2: f64,
    pub phi: f64,
    /// θ^{-1/(2α)}
    pub t: f64,
    /// δ (high) or δ̃ (low)
    pub delta: f64,
    pub residual: f64,
    /// the two-case upper bound on δ
    pub envelope: f64,
}

/// Upper edge of the θ window for the θ ↔ δ relation.
pub fn theta_window(regime: Regime, alpha: f64) -> f64 {
    let base = match regime {
        Regime::High => 2.0 + std::f64::consts::LN_2,
        Regime::Low => kappa1() / 2.0 + std::f64::consts::LN_2,
    };
    base.powf(-2.0 * alpha)
}

/// Unique δ with θ^{-1/(2α)} = (1+κ²)^{-1}[log(1+Φ/δ) + 2(1+κ²)Φ/δ]
/// (high) or δ̃ with θ^{-1/(2α)} = log(1+1/δ̃) + 2κ²/δ̃ (low).
pub fn theta_delta_solve(
    theta: f64,
    alpha: f64,
    kappa2: f64,
    regime: Regime,
    phi: f64,
) -> Result<ThetaDelta> {
    if !(alpha > 0.0) || !(kappa2 >= 0.0) || !(theta > 0.0) {
        return Err(LabError::Parameter("θ, α must be positive and κ² ≥ 0".into()));
    }
    let window = theta_window(regime, alpha);
    if theta >= window {
        return Err(LabError::Parameter(format!(
            "θ={theta} outside the {} window (0, {window})",
            regime.name()
        )));
    }
    if regime == Regime::Low && kappa2 > kappa1() / 4.0 {
        return Err(LabError::Parameter(format!("κ²={kappa2} above κ₁/4")));
    }
    let phi = match regime {
        Regime::High => phi,
        Regime::Low => 1.0,
    };
    if !(phi > 0.0) {
        return Err(LabError::Parameter("Φ must be positive".into()));
    }
    // right-hand side g(x) = A log(1+x) + B x in x = Φ/δ, increasing
    let (a, b) = match regime {
        Regime::High => (1.0 / (1.0 + kappa2), 2.0),
        Regime::Low => (1.0, 2.0 * kappa2),
    };
    let t = theta.powf(-1.0 / (2.0 * alpha));
    let g = |x: f64| a * x.ln_1p() + b * x;
    let (mut lo, mut hi) = (1.0f64, if b > 0.0 { t / b } else { t.exp() });
    if !(g(lo) < t) {
        return Err(LabError::Parameter("θ window violated".into()));
    }
    while g(hi) < t {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..4 {
        let step = (g(x) - t) / (a / (1.0 + x) + b);
        let next = x - step;
        if !(next > 1.0) || !next.is_finite() {
            break;
        }
        x = next;
    }
    let residual = ((g(x) - t) / t).abs();
    let delta = phi / x;
    let envelope = match regime {
        Regime::High => phi * ((-(1.0 + kappa2) * t / 3.0).exp() + 3.0 / t),
        Regime::Low => 2.0 * (-t / 3.0).exp() + 3.0 * kappa2 / t,
    };
    Ok(ThetaDelta {
        regime,
        theta,
        alpha,
        kappa2,
        phi,
        t,
        delta,
        residual,
        envelope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub a: usize,
    pub b: usize,
    /// ‖Γ_a - Γ_b‖_{s→-s}
    pub svd: f64,
    /// ‖Γ_a - Γ_b‖_{X_s}
    pub xs: f64,
}

/// Pair with the smallest s → -s distance, exhaustive with a lower-bound
/// prune: any weighted entry of D(A-B)D bounds its top singular value.
/// Ties go to the lexicographically first pair.
pub fn min_distance_pair(mats: &[HarmonicMatrix], s: f64) -> Result<Option<PairDistance>> {
    if mats.len() < 2 {
        return Ok(None);
    }
    let side = mats[0].side();
    if mats.iter().any(|m| m.side() != side) {
        return Err(LabError::Shape("matrices of different truncation".into()));
    }
    let w: Vec<f64> = (0..side)
        .map(|i| (1.0 + crate::harmonics::HarmonicIndex::from_flat(i).m as f64).powf(-s))
        .collect();
    let mut pairs = Vec::with_capacity(mats.len() * (mats.len() - 1) / 2);
    for a in 0..mats.len() {
        for b in (a + 1)..mats.len() {
            let (x, y) = (&mats[a].data, &mats[b].data);
            let mut lb = 0.0f64;
            for c in 0..side {
                for r in 0..side {
                    lb = lb.max(w[r] * w[c] * (x[(r, c)] - y[(r, c)]).norm());
                }
            }
            pairs.push((lb, a, b));
        }
    }
    pairs.sort_by(|p, q| p.partial_cmp(q).unwrap_or(std::cmp::Ordering::Equal));
    let mut best: Option<PairDistance> = None;
    for (lb, a, b) in pairs {
        if let Some(bp) = &best {
            if lb > bp.svd {
                break;
            }
        }
        let diff = mats[a].sub(&mats[b])?;
        let svd = op_norm_s_to_minus_s(&diff, s)?;
        let better = match &best {
            None => true,
            Some(bp) => svd < bp.svd || (svd == bp.svd && (a, b) < (bp.a, bp.b)),
        };
        if better {
            best = Some(PairDistance {
                a,
                b,
                svd,
                xs: x_s_norm(&diff, s),
            });
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub a: usize,
    pub b: usize,
    pub hash: u64,
    /// ‖Λ_a - Λ_b‖_{s→-s}
    pub distance: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PigeonholeReport {
    pub family_size: usize,
    pub log_family_size: f64,
    pub log_net_size: f64,
    /// log|Z| > log|Y| forces a collision
    pub collision_forced: bool,
    pub hashes: Vec<u64>,
    pub collisions: Vec<Collision>,
    /// 8√2 δ
    pub collision_bound: f64,
    pub min_pair: Option<PairDistance>,
    pub overflow: usize,
}

impl PigeonholeReport {
    pub fn collisions_within_bound(&self) -> bool {
        self.collisions.iter().all(|c| c.within_bound)
    }
}

/// Quantizes every member's Γ, groups equal cells, and independently finds
/// the closest pair.
pub fn pigeonhole_search(
    family: &DiscreteFamily,
    spec: &NetSpec,
    gammas: &[GammaMatrix],
) -> Result<PigeonholeReport> {
    if gammas.len() != family.members.len() {
        return Err(LabError::Shape(format!(
            "{} Γ matrices for {} family members",
            gammas.len(),
            family.members.len()
        )));
    }
    let cells = gammas
        .iter()
        .map(|g| quantize_gamma(g, spec))
        .collect::<Result<Vec<_>>>()?;
    let hashes: Vec<u64> = cells.iter().map(NetCell::hash64).collect();
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, h) in hashes.iter().enumerate() {
        groups.entry(*h).or_default().push(i);
    }
    let bound = 8.0 * SQRT_2 * spec.delta;
    let mut collisions = Vec::new();
    for (h, members) in &groups {
        for (x, &a) in members.iter().enumerate() {
            for &b in &members[x + 1..] {
                if cells[a] != cells[b] {
                    continue;
                }
                let diff = gammas[a].entries.sub(&gammas[b].entries)?;
                let distance = op_norm_s_to_minus_s(&diff, spec.s)?;
                collisions.push(Collision {
                    a,
                    b,
                    hash: *h,
                    distance,
                    within_bound: distance <= bound,
                });
            }
        }
    }
    collisions.sort_by_key(|c| (c.a, c.b));
    let mats: Vec<HarmonicMatrix> = gammas.iter().map(|g| g.entries.clone()).collect();
    Ok(PigeonholeReport {
        family_size: family.members.len(),
        log_family_size: family.log_cardinality,
        log_net_size: spec.log_card,
        collision_forced: family.log_cardinality > spec.log_card,
        hashes,
        collisions,
        collision_bound: bound,
        min_pair: min_distance_pair(&mats, spec.s)?,
        overflow: cells.iter().map(|c| c.overflow).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c2_at_half() {
        assert_eq!(c2_constant(0.5), 1.0);
        assert!((c2_constant(0.9) - 10.0 * 0.9f64.powi(9)).abs() < 1e-12);
    }

    #[test]
    fn ties_round_toward_zero() {
        assert_eq!(lattice_index(2.5, 1.0), 2);
        assert_eq!(lattice_index(-2.5, 1.0), -2);
        assert_eq!(lattice_index(2.6, 1.0), 3);
    }

    #[test]
    fn zero_threshold_edge() {
        let e = ell_star(4.0 * SQRT_2, 1.0, 0.0, 0.0, 1.0, 0.5, 1.0).unwrap();
        assert_eq!(e.ell_star, 0);
    }
}
