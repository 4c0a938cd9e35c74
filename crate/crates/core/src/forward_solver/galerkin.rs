//! Spectral Galerkin discretization on the disk.
//!
//! Unknown w ∈ H¹₀ is expanded as Σ c_{h,k} φ_{m_h,k}(r) Y_h(φ) with
//! φ_{m,k} ∝ r^m (1 - r²) P_k^{(2,m)}(2r² - 1), orthonormalized in L²(r dr),
//! so the mass matrix is the identity and the stiffness is block diagonal.

use super::SolverConfig;
use crate::error::{LabError, Result};
use crate::harmonics::{basis_len, indices, norm_const, HarmonicIndex, HarmonicMatrix};
use crate::potentials::Potential;
use crate::special::{gauss_legendre, jacobi_all};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct RadialBasis {
    pub m_max: usize,
    pub n_rad: usize,
    /// radial nodes, ascending
    pub r: Vec<f64>,
    /// weights for ∫₀¹ f(r) r dr
    pub w: Vec<f64>,
    pub n_phi: usize,
    /// per degree: n_rad × n_nodes values φ_{m,k}(r_i)
    pub phi: Vec<DMatrix<f64>>,
    /// ∫ r^m φ_{m,k} r dr
    pub mu: Vec<Vec<f64>>,
    pub stiffness: Vec<DMatrix<f64>>,
    pub eig_vecs: Vec<DMatrix<f64>>,
    pub eig_vals: Vec<Vec<f64>>,
    chol: Vec<DMatrix<f64>>,
}

impl RadialBasis {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        let (m_max, n) = (cfg.m_trunc, cfg.n_rad);
        if n == 0 {
            return Err(LabError::Parameter("N_rad must be positive".into()));
        }
        let nx = cfg.radial_nodes();
        let (x, wx) = gauss_legendre(nx);
        let r: Vec<f64> = x.iter().map(|x| ((1.0 + x) / 2.0).sqrt()).collect();
        let w: Vec<f64> = wx.iter().map(|w| w / 4.0).collect();

        let mut phi = Vec::with_capacity(m_max + 1);
        let mut mu = Vec::with_capacity(m_max + 1);
        let mut stiffness = Vec::with_capacity(m_max + 1);
        let mut eig_vecs = Vec::with_capacity(m_max + 1);
        let mut eig_vals = Vec::with_capacity(m_max + 1);
        let mut chols = Vec::with_capacity(m_max + 1);
        for m in 0..=m_max {
            let mf = m as f64;
            let mut f = DMatrix::<f64>::zeros(n, nx);
            let mut df = DMatrix::<f64>::zeros(n, nx);
            for (i, (&ri, &xi)) in r.iter().zip(&x).enumerate() {
                let p = jacobi_all(n - 1, 2.0, mf, xi);
                let dp = if n > 1 {
                    jacobi_all(n - 2, 3.0, mf + 1.0, xi)
                } else {
                    vec![]
                };
                let rm = ri.powi(m as i32);
                let rm1 = if m == 0 { 0.0 } else { ri.powi(m as i32 - 1) };
                let s = 1.0 - ri * ri;
                for k in 0..n {
                    let dpk = if k == 0 {
                        0.0
                    } else {
                        (k as f64 + mf + 3.0) / 2.0 * dp[k - 1]
                    };
                    f[(k, i)] = rm * s * p[k];
                    df[(k, i)] = (mf * rm1 * s - 2.0 * rm * ri) * p[k] + rm * s * 4.0 * ri * dpk;
                }
            }

            let fw = DMatrix::from_fn(n, nx, |k, i| f[(k, i)] * w[i]);
            let gram = &fw * f.transpose();
            let chol = gram.cholesky().ok_or_else(|| {
                LabError::Numerical(format!("radial Gram matrix not positive at m={m}"))
            })?;
            let l = chol.l();
            let solve_l = |b: &DMatrix<f64>| -> DMatrix<f64> {
                l.solve_lower_triangular(b).expect("triangular solve")
            };
            let ph = solve_l(&f);
            let dph = solve_l(&df);

            let dw = DMatrix::from_fn(n, nx, |k, i| dph[(k, i)] * w[i]);
            let mut s = &dw * dph.transpose();
            if m > 0 {
                let pw = DMatrix::from_fn(n, nx, |k, i| ph[(k, i)] * w[i] / (r[i] * r[i]));
                s += (&pw * ph.transpose()) * (mf * mf);
            }
            let s = (&s + s.transpose()) * 0.5;
            let mus: Vec<f64> = (0..n)
                .map(|k| (0..nx).map(|i| w[i] * r[i].powi(m as i32) * ph[(k, i)]).sum())
                .collect();
            let eig = SymmetricEigen::new(s.clone());
            phi.push(ph);
            mu.push(mus);
            stiffness.push(s);
            eig_vecs.push(eig.eigenvectors);
            eig_vals.push(eig.eigenvalues.iter().cloned().collect());
            chols.push(l);
        }
        Ok(RadialBasis {
            m_max,
            n_rad: n,
            r,
            w,
            n_phi: cfg.angular_nodes(),
            phi,
            mu,
            stiffness,
            eig_vecs,
            eig_vals,
            chol: chols,
        })
    }

    /// φ_{m,k}(r) for k < n_rad at an arbitrary radius.
    pub fn eval_radial(&self, m: usize, r: f64) -> Vec<f64> {
        let n = self.n_rad;
        let p = jacobi_all(n - 1, 2.0, m as f64, 2.0 * r * r - 1.0);
        let rm = r.powi(m as i32) * (1.0 - r * r);
        let f = DMatrix::from_fn(n, 1, |k, _| rm * p[k]);
        let v = self.chol[m]
            .solve_lower_triangular(&f)
            .expect("triangular solve");
        v.column(0).iter().cloned().collect()
    }

    pub fn n_harmonics(&self) -> usize {
        basis_len(self.m_max)
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_harmonics() * self.n_rad
    }

    /// Largest spacing between consecutive radial nodes around radius `rc`.
    fn radial_spacing_near(&self, rc: f64) -> f64 {
        let i = self.r.partition_point(|&x| x < rc);
        let mut gap = 0.0f64;
        for j in [i.saturating_sub(1), i] {
            if j + 1 < self.r.len() {
                gap = gap.max(self.r[j + 1] - self.r[j]);
            }
        }
        if i == 0 {
            gap = gap.max(self.r[0]);
        }
        if i >= self.r.len() {
            gap = gap.max(1.0 - self.r[self.r.len() - 1]);
        }
        gap
    }

    /// Rejects bumps narrower than two quadrature spacings.
    pub fn check_resolution(&self, q: &Potential) -> Result<()> {
        for b in q.bumps().iter().filter(|b| b.height != 0.0) {
            let c = b.center_norm();
            let arc = 2.0 * PI * c / self.n_phi as f64;
            let spacing = arc.max(self.radial_spacing_near(c));
            if b.radius < 2.0 * spacing {
                return Err(LabError::Resolution(format!(
                    "bump radius {} at |c|={c:.4} below twice the node spacing {spacing:.4}",
                    b.radius
                )));
            }
        }
        Ok(())
    }
}

/// G_{hg} = ∫ q Y_h Y_g dφ from the cosine/sine moments of q at one radius.
#[inline]
fn pair_moment(h: HarmonicIndex, g: HarmonicIndex, c: &[f64], s: &[f64]) -> f64 {
    let nn = norm_const(h.m) * norm_const(g.m);
    let d = h.m.abs_diff(g.m);
    let sum = h.m + g.m;
    let sg = match h.m.cmp(&g.m) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Less => -1.0,
        std::cmp::Ordering::Equal => 0.0,
    };
    let (hj, gj) = (if h.m == 0 { 1 } else { h.j }, if g.m == 0 { 1 } else { g.j });
    match (hj, gj) {
        (1, 1) => nn * (c[d] + c[sum]) / 2.0,
        (2, 2) => nn * (c[d] - c[sum]) / 2.0,
        (1, _) => nn * (s[sum] - sg * s[d]) / 2.0,
        _ => nn * (s[sum] + sg * s[d]) / 2.0,
    }
}

/// Matrices of the multiplication operator by a real potential q:
/// `p` couples basis functions, `t` = (q Ỹ_e, ψ) loads for outputs e, and
/// `q0` = (q Ỹ_d, Ỹ_e). Linear in q.
#[derive(Debug, Clone)]
pub struct PotentialOperator {
    pub p: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub q0: DMatrix<f64>,
    pub m_out: usize,
    /// max |q| over quadrature nodes
    pub max_abs: f64,
}

impl PotentialOperator {
    pub fn assemble(basis: &RadialBasis, q: &Potential, m_out: usize) -> Result<Self> {
        if m_out > basis.m_max {
            return Err(LabError::Parameter(format!(
                "output truncation {m_out} above M_trunc={}",
                basis.m_max
            )));
        }
        basis.check_resolution(q)?;
        let nx = basis.r.len();
        let nphi = basis.n_phi;
        let nu_max = 2 * basis.m_max;
        let angles: Vec<f64> = (0..nphi).map(|p| 2.0 * PI * p as f64 / nphi as f64).collect();
        let dphi = 2.0 * PI / nphi as f64;
        let mut cmom = vec![vec![0.0; nu_max + 1]; nx];
        let mut smom = vec![vec![0.0; nu_max + 1]; nx];
        let mut max_abs = 0.0f64;
        let mut vals = vec![0.0; nphi];
        for i in 0..nx {
            let ri = basis.r[i];
            let mut any = false;
            for (p, a) in angles.iter().enumerate() {
                let v = q.real_at(ri * a.cos(), ri * a.sin());
                vals[p] = v;
                any |= v != 0.0;
                max_abs = max_abs.max(v.abs());
            }
            if !any {
                continue;
            }
            for nu in 0..=nu_max {
                let (mut c, mut s) = (0.0, 0.0);
                for (p, a) in angles.iter().enumerate() {
                    if vals[p] != 0.0 {
                        let (sn, cs) = (nu as f64 * a).sin_cos();
                        c += vals[p] * cs;
                        s += vals[p] * sn;
                    }
                }
                cmom[i][nu] = c * dphi;
                smom[i][nu] = s * dphi;
            }
        }

        let hs = indices(basis.m_max);
        let n = basis.n_rad;
        let nh = hs.len();
        let mut p = DMatrix::<f64>::zeros(nh * n, nh * n);
        let mut a = vec![0.0; nx];
        for (hi, &h) in hs.iter().enumerate() {
            for (gi, &g) in hs.iter().enumerate().skip(hi) {
                let mut any = false;
                for i in 0..nx {
                    a[i] = basis.w[i] * pair_moment(h, g, &cmom[i], &smom[i]);
                    any |= a[i] != 0.0;
                }
                if !any {
                    continue;
                }
                let ph = &basis.phi[h.m];
                let pg = &basis.phi[g.m];
                let scaled = DMatrix::from_fn(n, nx, |k, i| pg[(k, i)] * a[i]);
                let block = ph * scaled.transpose();
                p.view_mut((hi * n, gi * n), (n, n)).copy_from(&block);
                if gi != hi {
                    p.view_mut((gi * n, hi * n), (n, n))
                        .copy_from(&block.transpose());
                }
            }
        }

        let outs = indices(m_out);
        let nd = outs.len();
        let mut t = DMatrix::<f64>::zeros(nh * n, nd);
        let mut q0 = DMatrix::<f64>::zeros(nd, nd);
        for (ei, &e) in outs.iter().enumerate() {
            for (hi, &h) in hs.iter().enumerate() {
                let ph = &basis.phi[h.m];
                for i in 0..nx {
                    let g = pair_moment(h, e, &cmom[i], &smom[i]);
                    if g == 0.0 {
                        continue;
                    }
                    let coef = basis.w[i] * g * basis.r[i].powi(e.m as i32);
                    for k in 0..n {
                        t[(hi * n + k, ei)] += coef * ph[(k, i)];
                    }
                }
            }
            for (di, &d) in outs.iter().enumerate() {
                q0[(di, ei)] = (0..nx)
                    .map(|i| {
                        basis.w[i]
                            * basis.r[i].powi((d.m + e.m) as i32)
                            * pair_moment(d, e, &cmom[i], &smom[i])
                    })
                    .sum();
            }
        }
        Ok(PotentialOperator {
            p,
            t,
            q0,
            m_out,
            max_abs,
        })
    }

    /// Σ coef_b · op_b over operators sharing a basis and truncation.
    pub fn combine(terms: &[(f64, &PotentialOperator)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| LabError::Parameter("empty combination".into()))?
            .1;
        let mut out = PotentialOperator {
            p: DMatrix::zeros(first.p.nrows(), first.p.ncols()),
            t: DMatrix::zeros(first.t.nrows(), first.t.ncols()),
            q0: DMatrix::zeros(first.q0.nrows(), first.q0.ncols()),
            m_out: first.m_out,
            max_abs: 0.0,
        };
        for (c, op) in terms {
            if op.p.shape() != out.p.shape() || op.m_out != out.m_out {
                return Err(LabError::Shape("potential operators differ in shape".into()));
            }
            if *c == 0.0 {
                continue;
            }
            out.p += &op.p * *c;
            out.t += &op.t * *c;
            out.q0 += &op.q0 * *c;
            out.max_abs += c.abs() * op.max_abs;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Diagonal,
    Richardson,
    DenseLu,
}

/// Coefficients of the H¹₀ part for each right-hand side column.
#[derive(Debug, Clone)]
pub struct SystemSolution {
    pub coeffs: DMatrix<Complex64>,
    pub residual: f64,
    pub iterations: usize,
    pub method: SolveMethod,
}

/// Solves (-S + c0 + P) X = B where S is the stiffness and P the potential.
pub fn solve_system(
    basis: &RadialBasis,
    op: Option<&PotentialOperator>,
    c0: Complex64,
    rhs: &DMatrix<Complex64>,
    cfg: &SolverConfig,
) -> Result<SystemSolution> {
    let n = basis.n_rad;
    let nh = basis.n_harmonics();
    let harmonics = indices(basis.m_max);
    let mut gap = f64::INFINITY;
    let mut top = 0.0f64;
    for m in 0..=basis.m_max {
        for l in &basis.eig_vals[m] {
            let v = (c0 - l).norm();
            gap = gap.min(v);
            top = top.max(v);
        }
    }
    let op = op.filter(|o| o.max_abs > 0.0);
    let (re, im) = split(rhs);

    let apply_a0_inv = |xr: &DMatrix<f64>, xi: &DMatrix<f64>| -> (DMatrix<f64>, DMatrix<f64>) {
        let cols = xr.ncols();
        let mut yr = DMatrix::zeros(xr.nrows(), cols);
        let mut yi = DMatrix::zeros(xr.nrows(), cols);
        for (hi, h) in harmonics.iter().enumerate() {
            let v = &basis.eig_vecs[h.m];
            let br = v.transpose() * xr.rows(hi * n, n);
            let bi = v.transpose() * xi.rows(hi * n, n);
            let mut zr = DMatrix::zeros(n, cols);
            let mut zi = DMatrix::zeros(n, cols);
            for k in 0..n {
                let d = 1.0 / (c0 - basis.eig_vals[h.m][k]);
                for c in 0..cols {
                    let z = Complex64::new(br[(k, c)], bi[(k, c)]) * d;
                    zr[(k, c)] = z.re;
                    zi[(k, c)] = z.im;
                }
            }
            yr.rows_mut(hi * n, n).copy_from(&(v * zr));
            yi.rows_mut(hi * n, n).copy_from(&(v * zi));
        }
        (yr, yi)
    };

    let apply_a = |xr: &DMatrix<f64>, xi: &DMatrix<f64>| -> (DMatrix<f64>, DMatrix<f64>) {
        let mut yr = xr * c0.re - xi * c0.im;
        let mut yi = xr * c0.im + xi * c0.re;
        for (hi, h) in harmonics.iter().enumerate() {
            let s = &basis.stiffness[h.m];
            let sr = s * xr.rows(hi * n, n);
            let si = s * xi.rows(hi * n, n);
            let mut br = yr.rows_mut(hi * n, n);
            br -= sr;
            let mut bi = yi.rows_mut(hi * n, n);
            bi -= si;
        }
        if let Some(op) = op {
            yr += &op.p * xr;
            yi += &op.p * xi;
        }
        (yr, yi)
    };

    let bnorm = re.norm().hypot(im.norm());
    let finish = |xr: DMatrix<f64>, xi: DMatrix<f64>, iterations, method| {
        let (ar, ai) = apply_a(&xr, &xi);
        let res = (&ar - &re).norm().hypot((&ai - &im).norm());
        let residual = if bnorm > 0.0 { res / bnorm } else { res };
        if !(residual <= cfg.residual_tol) {
            return Err(LabError::Numerical(format!(
                "Galerkin residual {residual:.3e} above {:.1e}",
                cfg.residual_tol
            )));
        }
        Ok(SystemSolution {
            coeffs: join(&xr, &xi),
            residual,
            iterations,
            method,
        })
    };

    let Some(op) = op else {
        if gap < top / cfg.condition_limit {
            return Err(LabError::Resonance(format!(
                "c0={c0} is within {gap:.3e} of a Dirichlet eigenvalue"
            )));
        }
        let (xr, xi) = apply_a0_inv(&re, &im);
        return finish(xr, xi, 0, SolveMethod::Diagonal);
    };

    if op.max_abs / gap <= cfg.richardson_ratio {
        let (mut xr, mut xi) = apply_a0_inv(&re, &im);
        let mut it = 0;
        let mut last = f64::INFINITY;
        while it < cfg.max_iterations {
            it += 1;
            let pr = &re - &op.p * &xr;
            let pi = &im - &op.p * &xi;
            let (nr, ni) = apply_a0_inv(&pr, &pi);
            let step = (&nr - &xr).norm().hypot((&ni - &xi).norm());
            let size = nr.norm().hypot(ni.norm());
            xr = nr;
            xi = ni;
            // stop at convergence or once rounding noise stalls the updates
            if step <= 1e-14 * size || size == 0.0 || (it > 3 && step >= last) {
                break;
            }
            last = step;
        }
        return finish(xr, xi, it, SolveMethod::Richardson);
    }

    let dim = nh * n;
    let mut a = DMatrix::<Complex64>::from_fn(dim, dim, |i, k| Complex64::new(op.p[(i, k)], 0.0));
    for (hi, h) in harmonics.iter().enumerate() {
        let s = &basis.stiffness[h.m];
        for k in 0..n {
            for l in 0..n {
                a[(hi * n + k, hi * n + l)] -= s[(k, l)];
            }
            a[(hi * n + k, hi * n + k)] += c0;
        }
    }
    let lu = a.lu();
    let u = lu.u();
    let (mut lo, mut hi_) = (f64::INFINITY, 0.0f64);
    for i in 0..dim {
        let v = u[(i, i)].norm();
        lo = lo.min(v);
        hi_ = hi_.max(v);
    }
    if !(lo > hi_ / cfg.condition_limit) {
        return Err(LabError::Resonance(format!(
            "Galerkin matrix pivot ratio {:.3e} below {:.1e}",
            lo / hi_,
            1.0 / cfg.condition_limit
        )));
    }
    let x = lu
        .solve(rhs)
        .ok_or_else(|| LabError::Resonance("singular Galerkin matrix".into()))?;
    let (xr, xi) = split(&x);
    finish(xr, xi, 1, SolveMethod::DenseLu)
}

fn split(x: &DMatrix<Complex64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (x.map(|z| z.re), x.map(|z| z.im))
}

fn join(re: &DMatrix<f64>, im: &DMatrix<f64>) -> DMatrix<Complex64> {
    re.zip_map(im, Complex64::new)
}

/// Right-hand sides -(Q Ỹ_d, ψ) for every datum d, with Q = q + c0.
pub fn lifted_rhs(
    basis: &RadialBasis,
    op: Option<&PotentialOperator>,
    c0: Complex64,
    data: &[HarmonicIndex],
) -> DMatrix<Complex64> {
    let n = basis.n_rad;
    let mut b = DMatrix::<Complex64>::zeros(basis.n_unknowns(), data.len());
    for (col, d) in data.iter().enumerate() {
        let hi = d.flat();
        for k in 0..n {
            b[(hi * n + k, col)] = -c0 * basis.mu[d.m][k];
        }
        if let Some(op) = op {
            let di = d.flat();
            for row in 0..b.nrows() {
                b[(row, col)] -= op.t[(row, di)];
            }
        }
    }
    b
}

/// DtN entries ⟨∂_r u_d, Y_e⟩ through Green's identity against the harmonic
/// extension Ỹ_e: m δ_de - ∫ (q + c0) u_d Ỹ_e. The pointwise derivative of
/// the truncated expansion at r = 1 converges far more slowly.
pub fn dtn_from_solution(
    basis: &RadialBasis,
    op: Option<&PotentialOperator>,
    c0: Complex64,
    coeffs: &DMatrix<Complex64>,
    data: &[HarmonicIndex],
    m_out: usize,
) -> HarmonicMatrix {
    let n = basis.n_rad;
    let mut out = HarmonicMatrix::zeros(m_out);
    let load = op.map(|o| coeffs.transpose() * o.t.map(|x| Complex64::new(x, 0.0)));
    for (col, d) in data.iter().enumerate() {
        if d.m > m_out {
            continue;
        }
        for e in indices(m_out) {
            let hi = e.flat();
            let mut mass = Complex64::new(0.0, 0.0);
            for k in 0..n {
                mass += coeffs[(hi * n + k, col)] * basis.mu[e.m][k];
            }
            let mut v = -c0 * mass;
            if e == *d {
                v += d.m as f64 - c0 / (2.0 * d.m as f64 + 2.0);
            }
            if let (Some(o), Some(l)) = (op, &load) {
                v -= o.q0[(d.flat(), hi)] + l[(col, hi)];
            }
            out.set(*d, e, v);
        }
    }
    out
}

/// L² norm over the disk of Σ c_{h,k} φ_{m_h,k} Y_h.
pub fn l2_norm(coeffs: &[Complex64]) -> f64 {
    coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}
