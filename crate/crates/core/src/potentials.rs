//! Potentials on the unit disk: smooth bump sums, sampled radial profiles and
//! constants, plus the θ-discrete bump family and Hölder-norm sampling.

use crate::error::{LabError, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::{LN_2, PI};

/// Mollifier η(t) = exp(1 - 1/(1 - t²)) on [0, 1), zero beyond.
pub fn mollifier(t: f64) -> f64 {
    let t = t.abs();
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

fn mollifier_derivative(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let u = 1.0 - t * t;
    -2.0 * t / (u * u) * mollifier(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

impl BumpSpec {
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        if self.height == 0.0 {
            return 0.0;
        }
        let d = (x - self.center[0]).hypot(y - self.center[1]);
        self.height * mollifier(d / self.radius)
    }

    pub fn center_norm(&self) -> f64 {
        self.center[0].hypot(self.center[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// Constant over the whole closed disk.
    Constant { value: f64 },
    BumpSum { bumps: Vec<BumpSpec> },
    /// Piecewise-linear in r through (radii[i], values[i]), zero past r0.
    RadialProfile { radii: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    #[serde(flatten)]
    pub kind: PotentialKind,
    pub r0: f64,
    #[serde(rename = "R")]
    pub sup_bound: f64,
    pub alpha: f64,
    #[serde(default)]
    pub imaginary_shift: f64,
}

impl Potential {
    pub fn zero() -> Self {
        Potential::constant(0.0)
    }

    pub fn constant(value: f64) -> Self {
        Potential {
            kind: PotentialKind::Constant { value },
            r0: 1.0,
            sup_bound: value.abs(),
            alpha: 1.0,
            imaginary_shift: 0.0,
        }
    }

    pub fn bump_sum(bumps: Vec<BumpSpec>, r0: f64) -> Result<Self> {
        for b in &bumps {
            if !(b.radius > 0.0) || !b.height.is_finite() {
                return Err(LabError::Parameter(format!("bad bump {b:?}")));
            }
            if b.center_norm() + b.radius > r0 + 1e-12 {
                return Err(LabError::Geometry(format!(
                    "bump at {:?} with radius {} leaves B_{r0}",
                    b.center, b.radius
                )));
            }
        }
        let sup = bumps.iter().fold(0.0f64, |a, b| a.max(b.height.abs()));
        Ok(Potential {
            kind: PotentialKind::BumpSum { bumps },
            r0,
            sup_bound: sup,
            alpha: 1.0,
            imaginary_shift: 0.0,
        })
    }

    pub fn radial_profile(radii: Vec<f64>, values: Vec<f64>, r0: f64) -> Result<Self> {
        if radii.len() != values.len() || radii.is_empty() {
            return Err(LabError::Parameter("radial profile needs matching samples".into()));
        }
        if radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LabError::Parameter("radial samples must increase".into()));
        }
        let sup = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Ok(Potential {
            kind: PotentialKind::RadialProfile { radii, values },
            r0,
            sup_bound: sup,
            alpha: 1.0,
            imaginary_shift: 0.0,
        })
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.imaginary_shift = shift;
        self
    }

    pub fn eval(&self, point: [f64; 2]) -> Result<Complex64> {
        let r = point[0].hypot(point[1]);
        if r > 1.0 + 1e-12 {
            return Err(LabError::Domain {
                x: point[0],
                y: point[1],
            });
        }
        Ok(Complex64::new(
            self.real_at(point[0], point[1]),
            self.imaginary_shift,
        ))
    }

    /// Real part at (x, y), no domain check.
    #[inline]
    pub fn real_at(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            PotentialKind::Constant { value } => *value,
            PotentialKind::BumpSum { bumps } => bumps.iter().map(|b| b.eval(x, y)).sum(),
            PotentialKind::RadialProfile { .. } => self.radial_value(x.hypot(y)),
        }
    }

    fn radial_value(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Constant { value } => *value,
            PotentialKind::BumpSum { bumps } => bumps
                .iter()
                .map(|b| b.height * mollifier(r / b.radius))
                .sum(),
            PotentialKind::RadialProfile { radii, values } => {
                if r > self.r0 {
                    return 0.0;
                }
                if r <= radii[0] {
                    return values[0];
                }
                let last = radii.len() - 1;
                if r >= radii[last] {
                    return if r == radii[last] { values[last] } else { 0.0 };
                }
                let i = radii.partition_point(|&x| x <= r) - 1;
                let t = (r - radii[i]) / (radii[i + 1] - radii[i]);
                values[i] * (1.0 - t) + values[i + 1] * t
            }
        }
    }

    pub fn is_radial(&self) -> bool {
        match &self.kind {
            PotentialKind::BumpSum { bumps } => bumps
                .iter()
                .all(|b| b.height == 0.0 || b.center_norm() < 1e-14),
            _ => true,
        }
    }

    /// Real radial profile q(r), if the potential is rotation invariant.
    pub fn radial_fn(&self) -> Option<impl Fn(f64) -> f64 + '_> {
        if self.is_radial() {
            Some(move |r: f64| self.radial_value(r))
        } else {
            None
        }
    }

    pub fn bumps(&self) -> &[BumpSpec] {
        match &self.kind {
            PotentialKind::BumpSum { bumps } => bumps,
            _ => &[],
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            PotentialKind::Constant { value } => *value == 0.0,
            PotentialKind::BumpSum { bumps } => bumps.iter().all(|b| b.height == 0.0),
            PotentialKind::RadialProfile { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// Rough largest |Re q|; exact for constants and nonnegative disjoint bumps.
    pub fn sup_real(&self) -> f64 {
        match &self.kind {
            PotentialKind::Constant { value } => value.abs(),
            PotentialKind::BumpSum { bumps } => {
                let mut s = bumps.iter().fold(0.0f64, |a, b| a.max(b.height.abs()));
                for b in bumps {
                    s = s.max(self.real_at(b.center[0], b.center[1]).abs());
                }
                s
            }
            PotentialKind::RadialProfile { values, .. } => {
                values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
            }
        }
    }

    /// Hex digest of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let s = serde_json::to_string(self).unwrap_or_default();
        let digest = Sha256::digest(s.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// a·p + b·q for potentials of compatible kinds. The zero constant
    /// combines with anything.
    pub fn affine(a: f64, p: &Potential, b: f64, q: &Potential) -> Result<Potential> {
        use PotentialKind::*;
        if q.is_zero() {
            return Ok(p.scaled(a));
        }
        if p.is_zero() {
            return Ok(q.scaled(b));
        }
        let kind = match (&p.kind, &q.kind) {
            (Constant { value: u }, Constant { value: v }) => Constant { value: a * u + b * v },
            (BumpSum { bumps: u }, BumpSum { bumps: v }) => {
                let mut out: Vec<BumpSpec> = u.iter().map(|x| scale_bump(x, a)).collect();
                out.extend(v.iter().map(|x| scale_bump(x, b)));
                BumpSum { bumps: out }
            }
            (RadialProfile { radii: ru, values: u }, RadialProfile { radii: rv, values: v })
                if ru == rv && p.r0 == q.r0 =>
            {
                RadialProfile {
                    radii: ru.clone(),
                    values: u.iter().zip(v).map(|(x, y)| a * x + b * y).collect(),
                }
            }
            _ => {
                return Err(LabError::Parameter(
                    "affine combination needs potentials of the same kind".into(),
                ))
            }
        };
        Ok(Potential {
            kind,
            r0: p.r0.max(q.r0),
            sup_bound: a.abs() * p.sup_bound + b.abs() * q.sup_bound,
            alpha: p.alpha.min(q.alpha),
            imaginary_shift: a * p.imaginary_shift + b * q.imaginary_shift,
        })
    }

    fn scaled(&self, a: f64) -> Potential {
        let mut out = self.clone();
        match &mut out.kind {
            PotentialKind::Constant { value } => *value *= a,
            PotentialKind::BumpSum { bumps } => bumps.iter_mut().for_each(|b| b.height *= a),
            PotentialKind::RadialProfile { values, .. } => values.iter_mut().for_each(|v| *v *= a),
        }
        out.sup_bound *= a.abs();
        out.imaginary_shift *= a;
        out
    }
}

fn scale_bump(b: &BumpSpec, a: f64) -> BumpSpec {
    BumpSpec {
        height: b.height * a,
        ..b.clone()
    }
}

/// Sampled max |η(a) - η(b)| / |a - b|^α over a, b in [0, 1]; the 1-D
/// profile seminorm that bounds the radial bump seminorm after scaling.
pub fn mollifier_holder_seminorm(alpha: f64) -> f64 {
    if alpha >= 1.0 {
        // for α = 1 this is the Lipschitz constant, attained by |η'|
        let n = 20_000;
        return (0..=n)
            .map(|i| mollifier_derivative(i as f64 / n as f64).abs())
            .fold(0.0, f64::max);
    }
    let n = 1500;
    let vals: Vec<f64> = (0..=n).map(|i| mollifier(i as f64 / n as f64)).collect();
    let mut best = 0.0f64;
    for i in 0..=n {
        for k in (i + 1)..=n {
            let q = (vals[i] - vals[k]).abs() / ((k - i) as f64 / n as f64).powf(alpha);
            best = best.max(q);
        }
    }
    best
}

/// c_η = max(1, [η]_α).
pub fn mollifier_constant(alpha: f64) -> f64 {
    mollifier_holder_seminorm(alpha).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderGrid {
    /// grid points per axis over [-1, 1]
    pub n: usize,
    /// pair radius
    pub rho: f64,
}

/// max(sampled sup |Re q|, sampled Hölder quotient over pairs closer than ρ).
pub fn estimate_holder_norm(q: &Potential, alpha: f64, grid: HolderGrid) -> f64 {
    let n = grid.n.max(2);
    let h = 2.0 / (n - 1) as f64;
    let mut vals = vec![f64::NAN; n * n];
    for i in 0..n {
        for k in 0..n {
            let (x, y) = (-1.0 + i as f64 * h, -1.0 + k as f64 * h);
            if x.hypot(y) <= 1.0 {
                vals[i * n + k] = q.real_at(x, y);
            }
        }
    }
    let sup = vals
        .iter()
        .filter(|v| !v.is_nan())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let reach = (grid.rho / h).floor() as i64;
    let mut quot = 0.0f64;
    for i in 0..n as i64 {
        for k in 0..n as i64 {
            let a = vals[(i * n as i64 + k) as usize];
            if a.is_nan() {
                continue;
            }
            for di in 0..=reach {
                for dk in -reach..=reach {
                    if di == 0 && dk <= 0 {
                        continue;
                    }
                    let (i2, k2) = (i + di, k + dk);
                    if i2 >= n as i64 || k2 < 0 || k2 >= n as i64 {
                        continue;
                    }
                    let dist = h * ((di * di + dk * dk) as f64).sqrt();
                    if dist > grid.rho {
                        continue;
                    }
                    let b = vals[(i2 * n as i64 + k2) as usize];
                    if b.is_nan() {
                        continue;
                    }
                    quot = quot.max((a - b).abs() / dist.powf(alpha));
                }
            }
        }
    }
    sup.max(quot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub lower: f64,
    pub upper: f64,
    pub degenerate: bool,
}

/// θ_* and θ^* separating the exponential and Hölder regimes.
pub fn dichotomy_thresholds(theta: f64, alpha: f64) -> Result<Thresholds> {
    if !(theta > 0.0 && theta < 1.0) || !(alpha > 0.0) {
        return Err(LabError::Parameter(format!(
            "need θ in (0,1) and α > 0, got θ={theta}, α={alpha}"
        )));
    }
    let root = theta.powf(1.0 / (2.0 * alpha));
    let t = 1.0 / root;
    let log_term = 3.0 * root * (t / 3.0).ln();
    let exp_term = 2.0 / 3.0 * root * (-t / 3.0).exp();
    Ok(Thresholds {
        lower: log_term.min(exp_term),
        upper: log_term.max(exp_term),
        degenerate: t <= 3.0,
    })
}

/// Upper edge of the high-frequency perturbation window.
pub fn high_frequency_window(alpha: f64, sup_bound: f64) -> f64 {
    (2.0 + LN_2).powf(-2.0 * alpha).min(sup_bound)
}

/// Upper edge of the low-frequency perturbation window.
pub fn low_frequency_window(alpha: f64, kappa1: f64) -> f64 {
    (kappa1 / 2.0 + LN_2).powf(-2.0 * alpha).min(kappa1 / 4.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub theta: f64,
    pub alpha: f64,
    pub r0: f64,
    pub n_bumps: usize,
    /// declared sup bound R; the window is min{(2+log2)^{-2α}, R}
    pub sup_bound: f64,
    pub mu: f64,
}

impl FamilyParams {
    pub fn new(theta: f64, alpha: f64, r0: f64, n_bumps: usize) -> Self {
        FamilyParams {
            theta,
            alpha,
            r0,
            n_bumps,
            sup_bound: 1.0,
            mu: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFamily {
    pub members: Vec<Potential>,
    pub theta: f64,
    pub beta: f64,
    pub alpha: f64,
    pub r0: f64,
    pub rho: f64,
    pub centers: Vec<[f64; 2]>,
    pub c_eta: f64,
    pub mu: f64,
    pub log_cardinality: f64,
    /// 2^{-(d+1)} (μβ/θ)^{d/α} for d = 2
    pub log_cardinality_bound: f64,
    pub cardinality_bound_holds: bool,
}

impl DiscreteFamily {
    /// Active-bump bitmask of member `i`.
    pub fn selection(&self, i: usize) -> Vec<bool> {
        (0..self.centers.len()).map(|b| (i >> b) & 1 == 1).collect()
    }

    /// max over bump centers of |q_a - q_b|.
    pub fn center_distance(&self, a: usize, b: usize) -> f64 {
        let (qa, qb) = (&self.members[a], &self.members[b]);
        self.centers
            .iter()
            .map(|c| (qa.real_at(c[0], c[1]) - qb.real_at(c[0], c[1])).abs())
            .fold(0.0, f64::max)
    }
}

/// Points of the unit hexagonal lattice, sorted by norm then angle in [0, 2π).
fn hex_points(count: usize) -> Vec<([f64; 2], f64)> {
    let mut shell = 1i64;
    loop {
        let mut pts = Vec::new();
        for a in -shell..=shell {
            for b in -shell..=shell {
                let x = a as f64 + 0.5 * b as f64;
                let y = b as f64 * 3f64.sqrt() / 2.0;
                // rounded so that equal shells tie and sort by angle
                let norm = (x.hypot(y) * 1e9).round() / 1e9;
                pts.push(([x, y], norm));
            }
        }
        pts.sort_by(|p, q| {
            let ang = |v: [f64; 2]| {
                let t = v[1].atan2(v[0]);
                if t < -1e-12 {
                    t + 2.0 * PI
                } else {
                    t.max(0.0)
                }
            };
            (p.1, ang(p.0))
                .partial_cmp(&(q.1, ang(q.0)))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        // every lattice point with norm below `safe` lies in this window
        let safe = shell as f64 / (1.0 + 1.0 / 3f64.sqrt());
        if pts.len() >= count && pts[count - 1].1 < safe - 1e-9 {
            pts.truncate(count);
            return pts;
        }
        shell += 1;
    }
}

/// Bump radius and centers: the largest ρ for which `n` points of the
/// origin-centred hexagonal lattice of spacing 2ρ fit in B_{r0-ρ}.
pub fn bump_layout(r0: f64, n: usize) -> Result<(f64, Vec<[f64; 2]>)> {
    if n == 0 {
        return Err(LabError::Geometry("need at least one bump".into()));
    }
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(LabError::Geometry(format!("r0={r0} not in (0,1)")));
    }
    let pts = hex_points(n);
    let reach = pts[n - 1].1;
    let rho = r0 / (1.0 + 2.0 * reach);
    let centers = pts
        .iter()
        .map(|(p, _)| [p[0] * 2.0 * rho, p[1] * 2.0 * rho])
        .collect();
    Ok((rho, centers))
}

pub fn build_discrete_family(
    theta: f64,
    alpha: f64,
    r0: f64,
    n_bumps: usize,
) -> Result<DiscreteFamily> {
    build_discrete_family_with(&FamilyParams::new(theta, alpha, r0, n_bumps))
}

pub fn build_discrete_family_with(p: &FamilyParams) -> Result<DiscreteFamily> {
    if !(p.alpha > 0.0 && p.alpha <= 1.0) {
        return Err(LabError::Parameter(format!(
            "Hölder exponent α={} outside (0, 1]",
            p.alpha
        )));
    }
    let window = high_frequency_window(p.alpha, p.sup_bound);
    if !(p.theta > 0.0 && p.theta < window) {
        return Err(LabError::Parameter(format!(
            "θ={} outside (0, {window})",
            p.theta
        )));
    }
    if p.n_bumps > 20 {
        return Err(LabError::Parameter("at most 20 bumps (2^20 members)".into()));
    }
    let (rho, centers) = bump_layout(p.r0, p.n_bumps)?;
    let members = (0..1usize << p.n_bumps)
        .map(|i| {
            let bumps = centers
                .iter()
                .enumerate()
                .map(|(b, c)| BumpSpec {
                    center: *c,
                    radius: rho,
                    height: if (i >> b) & 1 == 1 { p.theta } else { 0.0 },
                })
                .collect();
            let mut q = Potential::bump_sum(bumps, p.r0)?;
            q.alpha = p.alpha;
            q.sup_bound = p.sup_bound;
            Ok(q)
        })
        .collect::<Result<Vec<_>>>()?;
    let c_eta = mollifier_constant(p.alpha);
    let beta = p.theta * c_eta / rho.powf(p.alpha);
    let log_cardinality = p.n_bumps as f64 * LN_2;
    let log_cardinality_bound = 0.125 * (p.mu * beta / p.theta).powf(2.0 / p.alpha);
    Ok(DiscreteFamily {
        members,
        theta: p.theta,
        beta,
        alpha: p.alpha,
        r0: p.r0,
        rho,
        centers,
        c_eta,
        mu: p.mu,
        log_cardinality,
        log_cardinality_bound,
        cardinality_bound_holds: log_cardinality >= log_cardinality_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_six() {
        let (rho, c) = bump_layout(0.5, 6).unwrap();
        assert!((rho - 0.5 / 3.0).abs() < 1e-15);
        assert_eq!(c.len(), 6);
        assert_eq!(c[0], [0.0, 0.0]);
    }

    #[test]
    fn layout_one() {
        let (rho, c) = bump_layout(0.5, 1).unwrap();
        assert_eq!(rho, 0.5);
        assert_eq!(c, vec![[0.0, 0.0]]);
    }

    #[test]
    fn radial_profile_interpolates() {
        let q = Potential::radial_profile(vec![0.0, 0.5], vec![1.0, 0.0], 0.5).unwrap();
        assert!((q.real_at(0.25, 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(q.real_at(0.7, 0.0), 0.0);
    }
}
