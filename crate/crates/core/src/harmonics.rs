//! Circular harmonics on S¹, harmonic counts for general d, and the
//! weighted sequence/matrix norms used to measure DtN differences.

use crate::error::{LabError, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HarmonicIndex {
    pub m: usize,
    pub j: usize,
}

impl HarmonicIndex {
    pub fn new(m: usize, j: usize) -> Result<Self> {
        let p = if m == 0 { 1 } else { 2 };
        if j == 0 || j > p {
            return Err(LabError::InvalidIndex { m, j });
        }
        Ok(HarmonicIndex { m, j })
    }

    /// Position in the flat d = 2 ordering (0,1), (1,1), (1,2), (2,1), ...
    pub fn flat(self) -> usize {
        if self.m == 0 {
            0
        } else {
            2 * self.m - 2 + self.j
        }
    }

    pub fn from_flat(i: usize) -> Self {
        if i == 0 {
            HarmonicIndex { m: 0, j: 1 }
        } else {
            HarmonicIndex {
                m: (i + 1) / 2,
                j: 2 - (i % 2),
            }
        }
    }
}

/// Number of d = 2 basis elements with degree at most `m_max`.
pub fn basis_len(m_max: usize) -> usize {
    2 * m_max + 1
}

pub fn indices(m_max: usize) -> Vec<HarmonicIndex> {
    (0..basis_len(m_max)).map(HarmonicIndex::from_flat).collect()
}

fn binom(n: i64, k: i64) -> u128 {
    if k < 0 || n < k {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Dimension of the space of spherical harmonics of degree m on S^{d-1}.
pub fn harmonic_count(d: usize, m: usize) -> Result<u128> {
    if d < 2 {
        return Err(LabError::InvalidDimension(d));
    }
    if m == 0 {
        return Ok(1);
    }
    let (m, d) = (m as i64, d as i64);
    Ok(binom(m + d - 1, d - 1) - binom(m + d - 3, d - 1))
}

pub fn eval_harmonic(index: HarmonicIndex, angle: f64) -> Result<f64> {
    let index = HarmonicIndex::new(index.m, index.j)?;
    Ok(eval_unchecked(index, angle))
}

#[inline]
pub(crate) fn eval_unchecked(index: HarmonicIndex, angle: f64) -> f64 {
    let m = index.m as f64;
    match (index.m, index.j) {
        (0, _) => 1.0 / (2.0 * PI).sqrt(),
        (_, 1) => (m * angle).cos() / PI.sqrt(),
        _ => (m * angle).sin() / PI.sqrt(),
    }
}

/// Normalization constant N_m in Y_mj = N_m cos/sin(mφ).
#[inline]
pub(crate) fn norm_const(m: usize) -> f64 {
    if m == 0 {
        1.0 / (2.0 * PI).sqrt()
    } else {
        1.0 / PI.sqrt()
    }
}

/// |x|^m Y_mj(x/|x|); harmonic in the disk.
pub fn eval_harmonic_extension(index: HarmonicIndex, point: [f64; 2]) -> Result<f64> {
    let index = HarmonicIndex::new(index.m, index.j)?;
    let r = point[0].hypot(point[1]);
    if r > 1.0 + 1e-12 {
        return Err(LabError::Domain {
            x: point[0],
            y: point[1],
        });
    }
    if index.m == 0 {
        return Ok(norm_const(0));
    }
    let phi = point[1].atan2(point[0]);
    Ok(r.powi(index.m as i32) * eval_unchecked(index, phi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffVector {
    pub m_max: usize,
    pub entries: Vec<Complex64>,
}

impl CoeffVector {
    pub fn zeros(m_max: usize) -> Self {
        CoeffVector {
            m_max,
            entries: vec![Complex64::new(0.0, 0.0); basis_len(m_max)],
        }
    }

    pub fn get(&self, idx: HarmonicIndex) -> Complex64 {
        self.entries[idx.flat()]
    }

    pub fn set(&mut self, idx: HarmonicIndex, v: Complex64) {
        self.entries[idx.flat()] = v;
    }
}

pub fn sobolev_norm(v: &CoeffVector, s: f64) -> f64 {
    v.entries
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let m = HarmonicIndex::from_flat(i).m as f64;
            (1.0 + m).powf(2.0 * s) * a.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Truncated matrix of a_mjnk = <A Y_mj, Y_nk>. The entry for input (m,j)
/// and output (n,k) sits at row (n,k), column (m,j).
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicMatrix {
    pub m_max: usize,
    pub dim: usize,
    pub data: DMatrix<Complex64>,
}

impl HarmonicMatrix {
    pub fn zeros(m_max: usize) -> Self {
        let n = basis_len(m_max);
        HarmonicMatrix {
            m_max,
            dim: 2,
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn from_data(m_max: usize, data: DMatrix<Complex64>) -> Result<Self> {
        let n = basis_len(m_max);
        if data.nrows() != n || data.ncols() != n {
            return Err(LabError::Shape(format!(
                "expected {n}x{n}, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(HarmonicMatrix {
            m_max,
            dim: 2,
            data,
        })
    }

    pub fn side(&self) -> usize {
        basis_len(self.m_max)
    }

    pub fn get(&self, mj: HarmonicIndex, nk: HarmonicIndex) -> Complex64 {
        self.data[(nk.flat(), mj.flat())]
    }

    pub fn set(&mut self, mj: HarmonicIndex, nk: HarmonicIndex, v: Complex64) {
        self.data[(nk.flat(), mj.flat())] = v;
    }

    pub fn sub(&self, other: &HarmonicMatrix) -> Result<HarmonicMatrix> {
        if self.m_max != other.m_max {
            return Err(LabError::Shape(format!(
                "truncation {} vs {}",
                self.m_max, other.m_max
            )));
        }
        Ok(HarmonicMatrix {
            m_max: self.m_max,
            dim: self.dim,
            data: &self.data - &other.data,
        })
    }

    /// Restriction to degrees <= m_max.
    pub fn truncate(&self, m_max: usize) -> HarmonicMatrix {
        let n = basis_len(m_max.min(self.m_max));
        HarmonicMatrix {
            m_max: m_max.min(self.m_max),
            dim: self.dim,
            data: self.data.view((0, 0), (n, n)).into_owned(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

pub(crate) fn x_s_weight(d: usize, s: f64, ell: usize) -> f64 {
    (1.0 + ell as f64).powf(d as f64 / 2.0 - s)
}

pub fn x_s_norm(a: &HarmonicMatrix, s: f64) -> f64 {
    let n = a.side();
    let mut sup = 0.0f64;
    for col in 0..n {
        let m = HarmonicIndex::from_flat(col).m;
        for row in 0..n {
            let k = HarmonicIndex::from_flat(row).m;
            let w = x_s_weight(a.dim, s, m.max(k));
            sup = sup.max(w * a.data[(row, col)].norm());
        }
    }
    sup
}

pub(crate) fn sobolev_weighted(a: &HarmonicMatrix, s: f64) -> DMatrix<Complex64> {
    let n = a.side();
    let w: Vec<f64> = (0..n)
        .map(|i| (1.0 + HarmonicIndex::from_flat(i).m as f64).powf(-s))
        .collect();
    DMatrix::from_fn(n, n, |r, c| a.data[(r, c)] * (w[r] * w[c]))
}

/// Largest singular value of D A D with D = diag((1+m)^{-s}).
pub fn op_norm_s_to_minus_s(a: &HarmonicMatrix, s: f64) -> Result<f64> {
    let b = sobolev_weighted(a, s);
    if !b.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(LabError::Numerical("non-finite matrix entries".into()));
    }
    let sv = b
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| LabError::Numerical("SVD did not converge".into()))?
        .singular_values;
    Ok(sv.iter().cloned().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_roundtrip() {
        for i in 0..41 {
            assert_eq!(HarmonicIndex::from_flat(i).flat(), i);
        }
        assert_eq!(HarmonicIndex::from_flat(3), HarmonicIndex { m: 2, j: 1 });
    }

    #[test]
    fn counts() {
        assert_eq!(harmonic_count(2, 0).unwrap(), 1);
        assert_eq!(harmonic_count(2, 5).unwrap(), 2);
        assert_eq!(harmonic_count(3, 2).unwrap(), 5);
        assert!(harmonic_count(1, 2).is_err());
    }

    #[test]
    fn bad_index() {
        assert!(eval_harmonic(HarmonicIndex { m: 0, j: 2 }, 0.0).is_err());
        assert!(eval_harmonic(HarmonicIndex { m: 3, j: 3 }, 0.0).is_err());
    }
}
