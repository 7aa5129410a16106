//! Dense Hermitian and general matrices with the functional calculus built on
//! top of a Hermitian eigendecomposition.

use nalgebra::{DMatrix, SymmetricEigen};

use super::banded::BandedSymmetric;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Largest dimension for which dense O(n³) routines are allowed.
pub const DENSE_LIMIT: usize = 20_000;

/// Minimal distance between a spectral-projection boundary and the spectrum.
pub const GAP_TOL: f64 = 1e-9;

/// Storage tag. `Banded { bandwidth: 0 }` marks a diagonal matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Dense,
    Banded { bandwidth: usize },
}

impl Layout {
    pub fn is_diagonal(self) -> bool {
        matches!(self, Layout::Banded { bandwidth: 0 })
    }
}

fn bandwidth_of(m: &CMatrix) -> usize {
    let mut bw = 0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != C64::new(0.0, 0.0) {
                bw = bw.max(i.abs_diff(j));
            }
        }
    }
    bw
}

/// A square matrix equal to its conjugate transpose, entry by entry as stored.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    data: CMatrix,
    layout: Layout,
}

impl HermitianMatrix {
    /// Wraps `data` after checking exact Hermitian symmetry. The layout is
    /// detected from the sparsity pattern.
    pub fn new(data: CMatrix) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::NotSquare {
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        let n = data.nrows();
        for j in 0..n {
            for i in j..n {
                if data[(i, j)] != data[(j, i)].conj() {
                    return Err(Error::NotHermitian { row: i, col: j });
                }
            }
        }
        let layout = Self::detect(&data);
        Ok(Self { data, layout })
    }

    /// Symmetrises `m` as (m + m*)/2 and wraps the result.
    pub fn hermitian_part(m: &CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let n = m.nrows();
        let mut data = CMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                let v = if i == j { C64::new(v.re, 0.0) } else { v };
                data[(i, j)] = v;
                data[(j, i)] = v.conj();
            }
        }
        let layout = Self::detect(&data);
        Ok(Self { data, layout })
    }

    fn detect(data: &CMatrix) -> Layout {
        let n = data.nrows();
        let bw = bandwidth_of(data);
        if n > 1 && bw + 1 >= n {
            Layout::Dense
        } else {
            Layout::Banded { bandwidth: bw }
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            data[(i, i)] = C64::new(d, 0.0);
        }
        Self {
            data,
            layout: Layout::Banded { bandwidth: 0 },
        }
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_real_diagonal(&vec![1.0; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_real_diagonal(&vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn is_diagonal(&self) -> bool {
        self.layout.is_diagonal()
    }

    /// Real parts of the diagonal entries (the diagonal of a Hermitian matrix is real).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[(i, i)].re).collect()
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn to_general(&self) -> GeneralMatrix {
        GeneralMatrix {
            data: self.data.clone(),
            layout: self.layout,
        }
    }

    /// Norm of a Hermitian matrix: largest |eigenvalue|.
    pub fn norm(&self) -> Result<f64> {
        if self.is_diagonal() {
            return Ok(self.diagonal().iter().fold(0.0, |a, &x| a.max(x.abs())));
        }
        let es = eig(self)?;
        Ok(es
            .eigenvalues
            .iter()
            .fold(0.0_f64, |a, &x| a.max(x.abs())))
    }

    pub fn add(&self, other: &HermitianMatrix) -> Result<HermitianMatrix> {
        check_same(self.dim(), other.dim())?;
        Self::new(&self.data + &other.data)
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Result<HermitianMatrix> {
        check_same(self.dim(), other.dim())?;
        Self::new(&self.data - &other.data)
    }

    pub fn scale(&self, a: f64) -> HermitianMatrix {
        Self {
            data: &self.data * C64::new(a, 0.0),
            layout: self.layout,
        }
    }
}

fn check_same(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// An arbitrary complex matrix with a layout tag.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralMatrix {
    data: CMatrix,
    layout: Layout,
}

impl GeneralMatrix {
    pub fn new(data: CMatrix) -> Self {
        let layout = if data.nrows() == data.ncols() {
            let bw = bandwidth_of(&data);
            if data.nrows() > 1 && bw + 1 >= data.nrows() {
                Layout::Dense
            } else {
                Layout::Banded { bandwidth: bw }
            }
        } else {
            Layout::Dense
        };
        Self { data, layout }
    }

    pub fn from_real(m: &DMatrix<f64>) -> Self {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    pub fn identity(n: usize) -> Self {
        Self::new(CMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(CMatrix::zeros(rows, cols))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.data.nrows(), self.data.ncols())
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn adjoint(&self) -> GeneralMatrix {
        Self::new(self.data.adjoint())
    }

    pub fn is_square(&self) -> bool {
        self.data.nrows() == self.data.ncols()
    }

    /// ‖M*M − I‖ and ‖MM* − I‖, whichever is larger.
    pub fn unitarity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.data.nrows();
        let id = CMatrix::identity(n, n);
        let a = self.data.adjoint() * &self.data - &id;
        let b = &self.data * self.data.adjoint() - &id;
        operator_norm_raw(&a).max(operator_norm_raw(&b))
    }
}

/// Eigenvalues ascending with matching unitary eigenvectors (columns).
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl EigenSystem {
    /// V·diag(f(λ))·V*.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let fj = f(l);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * self.eigenvectors.adjoint()
    }
}

pub(crate) fn ensure_dense(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::DimensionTooLarge {
            dim: n,
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

/// Hermitian eigendecomposition, eigenvalues ascending. Real input takes the
/// real symmetric solver.
pub fn eig(h: &HermitianMatrix) -> Result<EigenSystem> {
    let n = h.dim();
    ensure_dense(n)?;
    if n == 0 {
        return Ok(EigenSystem {
            eigenvalues: vec![],
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    let (vals, vecs): (Vec<f64>, CMatrix) = if h.is_real() {
        let re = h.matrix().map(|z| z.re);
        let se = SymmetricEigen::new(re);
        (
            se.eigenvalues.iter().copied().collect(),
            se.eigenvectors.map(|x| C64::new(x, 0.0)),
        )
    } else {
        let se = SymmetricEigen::new(h.matrix().clone());
        (se.eigenvalues.iter().copied().collect(), se.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let eigenvalues = order.iter().map(|&i| vals[i]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// Functional calculus f(H). Diagonal inputs are handled entrywise.
pub fn apply_function(h: &HermitianMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    if h.is_diagonal() {
        let d: Vec<f64> = h.diagonal().into_iter().map(f).collect();
        return Ok(HermitianMatrix::from_real_diagonal(&d));
    }
    let es = eig(h)?;
    HermitianMatrix::hermitian_part(&es.reconstruct_with(f))
}

/// Spectral projection onto the closed interval [a, b].
pub fn spectral_projection(h: &HermitianMatrix, a: f64, b: f64) -> Result<HermitianMatrix> {
    let inside = |x: f64| if x >= a && x <= b { 1.0 } else { 0.0 };
    let check = |vals: &[f64]| -> Result<()> {
        for &x in vals {
            for bd in [a, b] {
                let d = (x - bd).abs();
                if d < GAP_TOL {
                    return Err(Error::BoundaryEigenvalue {
                        eigenvalue: x,
                        boundary: bd,
                        distance: d,
                    });
                }
            }
        }
        Ok(())
    };
    if h.is_diagonal() {
        let d = h.diagonal();
        check(&d)?;
        let p: Vec<f64> = d.into_iter().map(inside).collect();
        return Ok(HermitianMatrix::from_real_diagonal(&p));
    }
    let es = eig(h)?;
    check(&es.eigenvalues)?;
    HermitianMatrix::hermitian_part(&es.reconstruct_with(inside))
}

pub(crate) fn operator_norm_raw(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    // eigenvalues of the Gram matrix on the smaller side; only the top of the
    // spectrum is used, so squaring costs no relative accuracy
    if m.iter().all(|z| z.im == 0.0) {
        let re = m.map(|z| z.re);
        let n = re.nrows();
        if re.is_square() && n > 64 {
            let bw = bandwidth_of(m);
            if 8 * bw < n {
                return banded_norm(&re, bw);
            }
            // doubled-space operators in block order become banded once the
            // two copies are interleaved; the norm is permutation invariant
            if n.is_multiple_of(2) {
                let h = n / 2;
                let perm = |i: usize| if i.is_multiple_of(2) { i / 2 } else { h + i / 2 };
                let inter = DMatrix::from_fn(n, n, |i, j| re[(perm(i), perm(j))]);
                let bw = real_bandwidth(&inter);
                if 8 * bw < n {
                    return banded_norm(&inter, bw);
                }
            }
        }
        let g = if re.nrows() <= re.ncols() {
            &re * re.transpose()
        } else {
            re.transpose() * &re
        };
        return g.symmetric_eigenvalues().max().max(0.0).sqrt();
    }
    let g = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    g.symmetric_eigenvalues().max().max(0.0).sqrt()
}

fn real_bandwidth(m: &DMatrix<f64>) -> usize {
    let mut bw = 0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                bw = bw.max(i.abs_diff(j));
            }
        }
    }
    bw
}

/// √λ_max(MᵀM) for a square real band matrix, through band inertia counts.
fn banded_norm(m: &DMatrix<f64>, bw: usize) -> f64 {
    let n = m.nrows();
    let gram = BandedSymmetric::from_fn(n, 2 * bw, |i, j| {
        let lo = i.saturating_sub(bw);
        let hi = (j + bw).min(n - 1);
        (lo..=hi).map(|l| m[(l, i)] * m[(l, j)]).sum()
    });
    match gram.max_eigenvalue(1e-13) {
        Ok((_, hi)) => hi.max(0.0).sqrt(),
        Err(_) => m.clone().svd(false, false).singular_values.max(),
    }
}

/// Matrix product through real GEMM calls (one when both factors are real,
/// four otherwise).
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let real = |m: &CMatrix| m.iter().all(|z| z.im == 0.0);
    let (ar, br) = (a.map(|z| z.re), b.map(|z| z.re));
    if real(a) && real(b) {
        return (ar * br).map(|x| C64::new(x, 0.0));
    }
    let (ai, bi) = (a.map(|z| z.im), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = ar * bi + ai * br;
    re.zip_map(&im, C64::new)
}

/// Largest singular value.
pub fn operator_norm(m: &GeneralMatrix) -> f64 {
    operator_norm_raw(m.matrix())
}

/// Entrywise restriction to the given rows and columns.
pub fn compress(m: &GeneralMatrix, rows: &[usize], cols: &[usize]) -> Result<GeneralMatrix> {
    let (nr, nc) = m.shape();
    if let Some(&i) = rows.iter().find(|&&i| i >= nr) {
        return Err(Error::IndexOutOfRange { index: i, dim: nr });
    }
    if let Some(&j) = cols.iter().find(|&&j| j >= nc) {
        return Err(Error::IndexOutOfRange { index: j, dim: nc });
    }
    let src = m.matrix();
    Ok(GeneralMatrix::new(CMatrix::from_fn(
        rows.len(),
        cols.len(),
        |i, j| src[(rows[i], cols[j])],
    )))
}

/// Compression of a Hermitian matrix to a principal submatrix.
pub fn compress_hermitian(h: &HermitianMatrix, idx: &[usize]) -> Result<HermitianMatrix> {
    let g = compress(&h.to_general(), idx, idx)?;
    HermitianMatrix::new(g.into_matrix())
}
