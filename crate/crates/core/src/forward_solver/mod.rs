//! Forward Dirichlet problems (Δ + q_ref + q + κ²)u = 0 in the unit disk.
//!
//! Radial potentials go through a per-mode ODE; everything else through the
//! spectral Galerkin discretization in [`galerkin`].

pub mod galerkin;
mod radial;

pub use galerkin::{PotentialOperator, RadialBasis, SolveMethod, SystemSolution};
pub use radial::solve_radial_mode;

use crate::error::{LabError, Result};
use crate::harmonics::{indices, norm_const, HarmonicIndex};
use crate::potentials::Potential;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

pub use crate::harmonics::eval_harmonic_extension;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// highest harmonic degree in the Galerkin expansion and ODE solves
    pub m_trunc: usize,
    /// truncation of assembled matrices; defaults to `m_trunc`
    pub m_out: Option<usize>,
    pub n_rad: usize,
    /// Gauss nodes in x = 2r² - 1; 0 picks a default tied to the basis size
    pub radial_quadrature: usize,
    /// trapezoid nodes in φ; never fewer than 4·m_trunc
    pub angular_quadrature: usize,
    pub ode_steps: usize,
    pub ode_start: f64,
    pub trace_tol: f64,
    pub residual_tol: f64,
    pub resonance_ratio: f64,
    pub condition_limit: f64,
    /// max ‖q‖∞ / spectral gap for the fixed-point iteration; LU otherwise
    pub richardson_ratio: f64,
    pub max_iterations: usize,
    pub dissipative_slack: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            m_trunc: 32,
            m_out: None,
            n_rad: 24,
            radial_quadrature: 0,
            angular_quadrature: 0,
            ode_steps: 4096,
            ode_start: 1e-4,
            trace_tol: 1e-10,
            residual_tol: 1e-8,
            resonance_ratio: 1e-8,
            condition_limit: 1e12,
            richardson_ratio: 0.5,
            max_iterations: 400,
            dissipative_slack: 0.02,
        }
    }
}

impl SolverConfig {
    pub fn with_truncation(m_trunc: usize, n_rad: usize) -> Self {
        SolverConfig {
            m_trunc,
            n_rad,
            ..Default::default()
        }
    }

    pub fn out_truncation(&self) -> usize {
        self.m_out.unwrap_or(self.m_trunc).min(self.m_trunc)
    }

    pub fn radial_nodes(&self) -> usize {
        if self.radial_quadrature > 0 {
            self.radial_quadrature
        } else {
            (self.m_trunc + 4 * self.n_rad + 32).max(128)
        }
    }

    pub fn angular_nodes(&self) -> usize {
        self.angular_quadrature.max(4 * self.m_trunc).max(128)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.ode_start,
            self.trace_tol,
            self.residual_tol,
            self.resonance_ratio,
            self.condition_limit,
            self.richardson_ratio,
            self.dissipative_slack,
        ];
        if self.n_rad == 0 || self.ode_steps == 0 || self.max_iterations == 0 {
            return Err(LabError::Parameter("solver sizes must be positive".into()));
        }
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(LabError::Parameter("solver tolerances must be positive".into()));
        }
        if self.trace_tol < 10.0 * f64::EPSILON {
            return Err(LabError::Parameter("trace_tol below machine precision".into()));
        }
        if self.ode_start >= 1.0 {
            return Err(LabError::Parameter("ode_start must lie in (0,1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialModeSolution {
    pub m: usize,
    pub grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub boundary_derivative: Complex64,
    pub kappa2: f64,
}

impl RadialModeSolution {
    /// Debug CSV with columns r, re, im.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "re", "im"])?;
        for (r, u) in self.grid.iter().zip(&self.values) {
            w.write_record([r.to_string(), u.re.to_string(), u.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GalerkinSolution {
    /// row = harmonic (flat index up to M_trunc), column = radial basis index
    pub coefficients: DMatrix<Complex64>,
    pub datum: HarmonicIndex,
    pub residual: f64,
    /// max |w(1, φ)| of the H¹₀ correction on the boundary
    pub trace_error: f64,
    /// ∂_r u(1) in the harmonic basis up to M_trunc
    pub normal_derivative: Vec<Complex64>,
    pub method: SolveMethod,
}

impl GalerkinSolution {
    /// u(r, φ) = Ỹ_datum + w.
    pub fn eval(&self, basis: &RadialBasis, r: f64, angle: f64) -> Complex64 {
        let mut u = Complex64::new(
            r.powi(self.datum.m as i32)
                * crate::harmonics::eval_unchecked(self.datum, angle),
            0.0,
        );
        let radial: Vec<Vec<f64>> = (0..=basis.m_max).map(|m| basis.eval_radial(m, r)).collect();
        for (hi, h) in indices(basis.m_max).iter().enumerate() {
            let y = crate::harmonics::eval_unchecked(*h, angle);
            for k in 0..basis.n_rad {
                u += self.coefficients[(hi, k)] * radial[h.m][k] * y;
            }
        }
        u
    }

    /// Debug CSV of u along the ray at `angle`: r, re, im.
    pub fn write_csv<W: Write>(&self, basis: &RadialBasis, angle: f64, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "re", "im"])?;
        for i in 0..=200 {
            let r = i as f64 / 200.0;
            let u = self.eval(basis, r, angle);
            w.write_record([r.to_string(), u.re.to_string(), u.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Total complex coefficient Q - q = κ² + i·(shift of q + q_ref shift).
fn shift_constant(q: &Potential, q_ref_shift: f64, kappa2: f64) -> Complex64 {
    Complex64::new(kappa2, q.imaginary_shift + q_ref_shift)
}

/// Solves (Δ + q + i·q_ref_shift + κ²)u = 0, u = Y_datum on S¹.
pub fn solve_galerkin(
    q: &Potential,
    q_ref_shift: f64,
    kappa2: f64,
    datum: HarmonicIndex,
    cfg: &SolverConfig,
) -> Result<GalerkinSolution> {
    cfg.validate()?;
    let datum = HarmonicIndex::new(datum.m, datum.j)?;
    if datum.m > cfg.m_trunc {
        return Err(LabError::Parameter(format!(
            "datum degree {} above M_trunc={}",
            datum.m, cfg.m_trunc
        )));
    }
    let basis = RadialBasis::new(cfg)?;
    let op = if q.is_zero() {
        None
    } else {
        Some(PotentialOperator::assemble(&basis, q, basis.m_max)?)
    };
    let c0 = shift_constant(q, q_ref_shift, kappa2);
    let data = [datum];
    let rhs = galerkin::lifted_rhs(&basis, op.as_ref(), c0, &data);
    let sol = galerkin::solve_system(&basis, op.as_ref(), c0, &rhs, cfg)?;
    let n = basis.n_rad;
    let nh = basis.n_harmonics();
    let coefficients = DMatrix::from_fn(nh, n, |h, k| sol.coeffs[(h * n + k, 0)]);
    let dtn = galerkin::dtn_from_solution(&basis, op.as_ref(), c0, &sol.coeffs, &data, basis.m_max);
    let normal_derivative = indices(basis.m_max)
        .into_iter()
        .map(|e| dtn.get(datum, e))
        .collect();
    let mut trace_error = 0.0f64;
    let at_one: Vec<Vec<f64>> = (0..=basis.m_max).map(|m| basis.eval_radial(m, 1.0)).collect();
    for (hi, h) in indices(basis.m_max).iter().enumerate() {
        let t: Complex64 = (0..n).map(|k| coefficients[(hi, k)] * at_one[h.m][k]).sum();
        trace_error = trace_error.max(t.norm() * norm_const(h.m));
    }
    if trace_error > cfg.trace_tol {
        return Err(LabError::Numerical(format!(
            "boundary trace off by {trace_error:.3e}"
        )));
    }
    Ok(GalerkinSolution {
        coefficients,
        datum,
        residual: sol.residual,
        trace_error,
        normal_derivative,
        method: sol.method,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipativeReport {
    pub kappa2: f64,
    pub trials: usize,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub slack: f64,
    pub violations: usize,
}

impl DissipativeReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// A random smooth complex source: a few Gaussians centred inside B_{0.7}.
#[derive(Debug, Clone)]
pub struct GaussianSource {
    pub terms: Vec<([f64; 2], f64, Complex64)>,
}

impl GaussianSource {
    pub fn random(rng: &mut impl Rng) -> Self {
        let count = rng.gen_range(1..=4);
        let terms = (0..count)
            .map(|_| {
                let rad = 0.7 * rng.gen::<f64>().sqrt();
                let ang = rng.gen_range(0.0..2.0 * PI);
                let sigma = rng.gen_range(0.15..0.4);
                let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                ([rad * ang.cos(), rad * ang.sin()], sigma, amp)
            })
            .collect();
        GaussianSource { terms }
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|(c, s, a)| {
                let d2 = (x - c[0]).powi(2) + (y - c[1]).powi(2);
                a * (-d2 / (2.0 * s * s)).exp()
            })
            .sum()
    }
}

/// Load vector (f, φ_{h,k} Y_h) and ‖f‖_{L²(B₁)} by quadrature.
fn project_source(basis: &RadialBasis, f: &GaussianSource) -> (DMatrix<Complex64>, f64) {
    let nphi = basis.n_phi;
    let dphi = 2.0 * PI / nphi as f64;
    let hs = indices(basis.m_max);
    let n = basis.n_rad;
    let mut load = DMatrix::<Complex64>::zeros(basis.n_unknowns(), 1);
    let mut norm2 = 0.0;
    let mut ang = vec![Complex64::new(0.0, 0.0); hs.len()];
    for (i, &ri) in basis.r.iter().enumerate() {
        ang.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        for p in 0..nphi {
            let phi = p as f64 * dphi;
            let v = f.eval(ri * phi.cos(), ri * phi.sin());
            norm2 += basis.w[i] * dphi * v.norm_sqr();
            for (hi, h) in hs.iter().enumerate() {
                ang[hi] += v * crate::harmonics::eval_unchecked(*h, phi) * dphi;
            }
        }
        for (hi, h) in hs.iter().enumerate() {
            for k in 0..n {
                load[(hi * n + k, 0)] += ang[hi] * basis.w[i] * basis.phi[h.m][(k, i)];
            }
        }
    }
    (load, norm2.sqrt())
}

/// Checks ‖v‖₂ ≤ (1 + slack)‖f‖₂ for (Δ + i + κ²)v = f, v|_{S¹} = 0.
pub fn verify_dissipative_bound(
    kappa2: f64,
    trials: usize,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<DissipativeReport> {
    cfg.validate()?;
    let basis = RadialBasis::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c0 = Complex64::new(kappa2, 1.0);
    let mut ratios = Vec::with_capacity(trials);
    for _ in 0..trials {
        let f = GaussianSource::random(&mut rng);
        ratios.push(dissipative_ratio(&basis, &f, c0, cfg)?);
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let bound = 1.0 + cfg.dissipative_slack;
    Ok(DissipativeReport {
        kappa2,
        trials,
        violations: ratios.iter().filter(|r| **r > bound).count(),
        ratios,
        max_ratio,
        slack: cfg.dissipative_slack,
    })
}

/// ‖v‖₂/‖f‖₂ for one source; 0 when f vanishes.
pub fn dissipative_ratio(
    basis: &RadialBasis,
    f: &GaussianSource,
    c0: Complex64,
    cfg: &SolverConfig,
) -> Result<f64> {
    let (load, fnorm) = project_source(basis, f);
    if fnorm == 0.0 {
        return Ok(0.0);
    }
    let sol = galerkin::solve_system(basis, None, c0, &load, cfg)?;
    let v: Vec<Complex64> = sol.coeffs.column(0).iter().cloned().collect();
    Ok(galerkin::l2_norm(&v) / fnorm)
}

/// Smallest C with ‖u_mj‖_{L²(B₁)} ≤ C((1 + ‖q‖∞ + 1 + κ²) + 1)‖Y_mj‖_{H^{3/2}}
/// over all data up to the output truncation, for q_ref = i.
pub fn fitted_elliptic_constant(q: &Potential, kappa2: f64, cfg: &SolverConfig) -> Result<f64> {
    cfg.validate()?;
    let basis = RadialBasis::new(cfg)?;
    let m_out = cfg.out_truncation();
    let op = if q.is_zero() {
        None
    } else {
        Some(PotentialOperator::assemble(&basis, q, m_out)?)
    };
    let c0 = shift_constant(q, 1.0, kappa2);
    let data = indices(m_out);
    let rhs = galerkin::lifted_rhs(&basis, op.as_ref(), c0, &data);
    let sol = galerkin::solve_system(&basis, op.as_ref(), c0, &rhs, cfg)?;
    let n = basis.n_rad;
    let scale = 1.0 + q.sup_real() + 1.0 + kappa2 + 1.0;
    let mut best = 0.0f64;
    for (col, d) in data.iter().enumerate() {
        let w = sol.coeffs.column(col);
        // ‖Ỹ_d‖² = 1/(2m+2); (Ỹ_d, w) = Σ_k c_{d,k} μ_{m,k}
        let mut cross = Complex64::new(0.0, 0.0);
        for k in 0..n {
            cross += w[d.flat() * n + k] * basis.mu[d.m][k];
        }
        let norm2 = 1.0 / (2.0 * d.m as f64 + 2.0) + 2.0 * cross.re + w.norm_squared();
        let h32 = (1.0 + d.m as f64).powf(1.5);
        best = best.max(norm2.max(0.0).sqrt() / (scale * h32));
    }
    Ok(best)
}
