//! Small-dimension complex linear algebra and the scalar quantities built on it.
//!
//! Everything here works on dense matrices of dimension at most
//! [`MAX_DIM`]. Matrix functions (square roots, absolute values) go through a
//! Hermitian eigendecomposition, with eigenvalues of PSD inputs clamped at
//! zero below [`tolerances::EIGEN_CLAMP`].

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerances;

/// Complex amplitude of a coherent state, `α = √ν e^{iθ}`.
pub type ComplexAmplitude = Complex64;

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 8;

/// Builds an amplitude, rejecting NaN and infinite components.
pub fn amplitude(re: f64, im: f64) -> Result<ComplexAmplitude> {
    if !re.is_finite() || !im.is_finite() {
        return Err(Error::OutOfRange {
            name: "amplitude",
            value: if re.is_finite() { im } else { re },
            range: "finite values",
        });
    }
    Ok(Complex64::new(re, im))
}

/// Dense square complex matrix of dimension `1..=MAX_DIM`.
#[derive(Clone, PartialEq)]
pub struct SmallMatrix(DMatrix<Complex64>);

impl fmt::Debug for SmallMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmallMatrix{}", self.0)
    }
}

impl SmallMatrix {
    fn check_dim(dim: usize) -> Result<()> {
        if (1..=MAX_DIM).contains(&dim) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "dimension {dim} not in 1..={MAX_DIM}"
            )))
        }
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::check_dim(dim)?;
        Ok(Self(DMatrix::zeros(dim, dim)))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::check_dim(dim)?;
        Ok(Self(DMatrix::identity(dim, dim)))
    }

    /// Row-major construction; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        Self::check_dim(dim)?;
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "row of length {} in a {dim}x{dim} matrix",
                bad.len()
            )));
        }
        Ok(Self(DMatrix::from_fn(dim, dim, |i, j| rows[i][j])))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        Self::check_dim(dim)?;
        Ok(Self(DMatrix::from_fn(dim, dim, f)))
    }

    /// Real diagonal matrix.
    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_fn(diag.len(), |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// The outer product `|v⟩⟨v|` (not normalised).
    pub fn projector(v: &[Complex64]) -> Result<Self> {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    /// `|v⟩⟨v| / ⟨v|v⟩`.
    pub fn pure_state(v: &[Complex64]) -> Result<Self> {
        let norm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::OutOfRange {
                name: "state norm",
                value: norm2,
                range: "(0, inf)",
            });
        }
        Ok(Self::projector(v)?.scale(1.0 / norm2))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|c| c * s))
    }

    /// `⟨v|M|v⟩`.
    pub fn expectation(&self, v: &[Complex64]) -> Result<Complex64> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against a {}x{} matrix",
                v.len(),
                self.dim(),
                self.dim()
            )));
        }
        let x = DVector::from_column_slice(v);
        Ok((x.adjoint() * &self.0 * &x)[(0, 0)])
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermitian_deviation(&self) -> f64 {
        let d = &self.0 - self.0.adjoint();
        d.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &SmallMatrix) -> f64 {
        (&self.0 - &other.0)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    fn hermitized(&self) -> DMatrix<Complex64> {
        (&self.0 + self.0.adjoint()).map(|c| c * 0.5)
    }

    /// Eigenvalues (ascending) and matching eigenvectors (columns) of the
    /// Hermitian part of the matrix.
    pub fn eigh(&self) -> (Vec<f64>, Vec<Vec<Complex64>>) {
        let eig = self.hermitized().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect();
        (values, vectors)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigh().0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Applies `f` to the spectrum of the Hermitian part.
    pub fn hermitian_map(&self, f: impl Fn(f64) -> f64) -> Self {
        let eig = self.hermitized().symmetric_eigen();
        let v = &eig.eigenvectors;
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| Complex64::new(f(x), 0.0)));
        Self(v * d * v.adjoint())
    }

    /// Principal square root of a PSD matrix; tiny negative eigenvalues are clamped.
    pub fn sqrt_psd(&self) -> Self {
        self.hermitian_map(|x| clamp_eigenvalue(x).sqrt())
    }

    /// Rejects matrices that are not Hermitian or have eigenvalues below
    /// [`tolerances::PSD_EIGENVALUE`].
    pub fn check_psd(&self) -> Result<()> {
        let dev = self.hermitian_deviation();
        if dev > tolerances::STRUCTURAL {
            return Err(Error::NotHermitian(dev));
        }
        let min = self.min_eigenvalue();
        if min < tolerances::PSD_EIGENVALUE {
            return Err(Error::NotPsd(min));
        }
        Ok(())
    }

    /// Checks a density matrix: Hermitian, PSD and unit trace.
    pub fn check_state(&self) -> Result<()> {
        self.check_psd()?;
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tolerances::UNIT_TRACE || tr.im.abs() > tolerances::UNIT_TRACE {
            return Err(Error::NotUnitTrace(tr.re));
        }
        Ok(())
    }
}

fn clamp_eigenvalue(x: f64) -> f64 {
    if x < tolerances::EIGEN_CLAMP {
        0.0
    } else {
        x
    }
}

impl Add for &SmallMatrix {
    type Output = SmallMatrix;
    fn add(self, rhs: &SmallMatrix) -> SmallMatrix {
        SmallMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SmallMatrix {
    type Output = SmallMatrix;
    fn sub(self, rhs: &SmallMatrix) -> SmallMatrix {
        SmallMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &SmallMatrix {
    type Output = SmallMatrix;
    fn mul(self, rhs: &SmallMatrix) -> SmallMatrix {
        SmallMatrix(&self.0 * &rhs.0)
    }
}

fn same_dim(a: &SmallMatrix, b: &SmallMatrix) -> Result<()> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.dim(),
            a.dim(),
            b.dim(),
            b.dim()
        )))
    }
}

/// `⟨β|α⟩ = exp(−(|α|² + |β|²)/2 + β̄α)` for coherent states of one mode.
pub fn coherent_overlap(alpha: ComplexAmplitude, beta: ComplexAmplitude) -> ComplexAmplitude {
    (-(alpha.norm_sqr() + beta.norm_sqr()) / 2.0 + beta.conj() * alpha).exp()
}

/// Binary Shannon entropy in bits, with `H(0) = H(1) = 0`.
pub fn binary_entropy(delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            range: "[0, 1]",
        });
    }
    Ok(h2(delta))
}

/// Unchecked binary entropy for arguments already known to lie in `[0, 1]`.
pub(crate) fn h2(p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p), "entropy argument {p}");
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Uhlmann fidelity `F(ρ,σ) = (tr √(√ρ σ √ρ))²`, clamped to `[0, 1]`.
pub fn fidelity(rho: &SmallMatrix, sigma: &SmallMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    rho.check_state()?;
    sigma.check_state()?;
    let root = rho.sqrt_psd();
    let inner = &(&root * sigma) * &root;
    let tr: f64 = inner
        .eigenvalues()
        .into_iter()
        .map(|x| clamp_eigenvalue(x).sqrt())
        .sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// Half the trace norm of `ρ − σ`.
pub fn trace_distance(rho: &SmallMatrix, sigma: &SmallMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    rho.check_state()?;
    sigma.check_state()?;
    let diff = rho - sigma;
    let norm: f64 = diff.eigenvalues().into_iter().map(f64::abs).sum();
    Ok((0.5 * norm).clamp(0.0, 1.0))
}

/// Checks that `povm` is a set of PSD operators summing to the identity.
pub fn check_povm(povm: &[SmallMatrix]) -> Result<()> {
    let first = povm
        .first()
        .ok_or_else(|| Error::DimensionMismatch("empty POVM".into()))?;
    let dim = first.dim();
    let mut sum = SmallMatrix::zeros(dim)?;
    for e in povm {
        same_dim(first, e)?;
        e.check_psd()?;
        sum = &sum + e;
    }
    let dev = sum.max_abs_diff(&SmallMatrix::identity(dim)?);
    if dev > tolerances::STRUCTURAL {
        return Err(Error::IncompletePovm(dev));
    }
    Ok(())
}

/// Bhattacharyya overlap of the outcome distributions,
/// `Σ_a √(tr(ρ_x E_a) · tr(ρ_y E_a))`.
pub fn statistical_overlap(
    rho_x: &SmallMatrix,
    rho_y: &SmallMatrix,
    povm: &[SmallMatrix],
) -> Result<f64> {
    same_dim(rho_x, rho_y)?;
    rho_x.check_state()?;
    rho_y.check_state()?;
    check_povm(povm)?;
    same_dim(rho_x, &povm[0])?;
    Ok(povm
        .iter()
        .map(|e| {
            let px = (rho_x * e).trace().re.max(0.0);
            let py = (rho_y * e).trace().re.max(0.0);
            (px * py).sqrt()
        })
        .sum())
}

/// Random states and measurements for property checks.
pub mod random {
    use num_complex::Complex64;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::SmallMatrix;

    fn gaussian(rng: &mut impl Rng) -> Complex64 {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    /// Haar-random unit vector.
    pub fn pure_state(dim: usize, rng: &mut impl Rng) -> Vec<Complex64> {
        let v: Vec<Complex64> = (0..dim).map(|_| gaussian(rng)).collect();
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|c| c / norm).collect()
    }

    /// Ginibre-ensemble density matrix `G G† / tr(G G†)` with `G` of shape dim×rank.
    pub fn density_matrix(dim: usize, rank: usize, rng: &mut impl Rng) -> SmallMatrix {
        let g: Vec<Vec<Complex64>> = (0..dim)
            .map(|_| (0..rank).map(|_| gaussian(rng)).collect())
            .collect();
        let m = SmallMatrix::from_fn(dim, |i, j| {
            (0..rank).map(|k| g[i][k] * g[j][k].conj()).sum()
        })
        .expect("dimension checked by caller");
        let tr = m.trace().re;
        m.scale(1.0 / tr)
    }

    /// Random POVM with `outcomes` elements, `E_a = S^{-1/2} A_a S^{-1/2}` for
    /// random PSD `A_a` and `S = Σ A_a`. The first part has full rank so `S`
    /// is invertible.
    pub fn povm(dim: usize, outcomes: usize, rng: &mut impl Rng) -> Vec<SmallMatrix> {
        let parts: Vec<SmallMatrix> = (0..outcomes)
            .map(|a| {
                let rank = if a == 0 {
                    dim
                } else {
                    rng.random_range(1..=dim)
                };
                density_matrix(dim, rank, rng)
            })
            .collect();
        let sum = parts
            .iter()
            .skip(1)
            .fold(parts[0].clone(), |acc, p| &acc + p);
        let inv_root = sum.hermitian_map(|x| 1.0 / x.sqrt());
        parts
            .iter()
            .map(|a| {
                let e = &(&inv_root * a) * &inv_root;
                // drop the antihermitian roundoff
                &e.scale(0.5) + &e.adjoint().scale(0.5)
            })
            .collect()
    }
}
