//! Real symmetric band matrices and their inertia.
//!
//! Storage keeps the lower band only: row `i` holds `a[i][j]` for
//! `j ∈ [i - bw, i]` at offset `i - j`. Inertia is read off a symmetric LDLᵀ
//! factorisation that never permutes, choosing between a 1×1 pivot at `j` and
//! a 2×2 pivot on `(j, j + 1)`; both choices keep every update inside the
//! band. Complex Hermitian band matrices enter through their real embedding
//! `[[Re, -Im], [Im, Re]]` (each eigenvalue doubled), interleaved per index.

use nalgebra::DMatrix;
use serde::Serialize;

use super::dense::{HermitianMatrix, C64};
use crate::error::{Error, Result};

/// Bunch–Kaufman growth constant (1 + √17)/8.
const ALPHA: f64 = 0.640_388_203_202_208;

/// Relative pivot magnitude treated as breakdown.
pub const PIVOT_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Inertia {
    pub fn signature(&self) -> i64 {
        self.positive as i64 - self.negative as i64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandedSymmetric {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSymmetric {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = if n == 0 { 0 } else { bw.min(n - 1) };
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    /// Builds the matrix from its lower-band entries `f(i, j)`, `j <= i`.
    pub fn from_fn(n: usize, bw: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n, bw);
        let bw = m.bw;
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                m.data[i * (bw + 1) + (i - j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self::from_fn(d.len(), 0, |i, _| d[i])
    }

    /// Real symmetric input, with the bandwidth detected from the sparsity.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let n = m.nrows();
        let mut bw = 0;
        for j in 0..n {
            for i in j..n {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::NotHermitian { row: i, col: j });
                }
                if m[(i, j)] != 0.0 {
                    bw = bw.max(i - j);
                }
            }
        }
        Ok(Self::from_fn(n, bw, |i, j| m[(i, j)]))
    }

    /// Real symmetric band matrix with the same inertia counts as `h`, times
    /// the returned multiplicity (1 for real input, 2 for the complex embedding).
    pub fn from_hermitian(h: &HermitianMatrix) -> (Self, usize) {
        let n = h.dim();
        let a = h.matrix();
        let mut bw = 0;
        for j in 0..n {
            for i in j..n {
                if a[(i, j)] != C64::new(0.0, 0.0) {
                    bw = bw.max(i - j);
                }
            }
        }
        if h.is_real() {
            return (Self::from_fn(n, bw, |i, j| a[(i, j)].re), 1);
        }
        // index (i, r) -> 2i + r with r = 0 for the real copy, 1 for the imaginary one
        let m = Self::from_fn(2 * n, 2 * bw + 1, |p, q| {
            let (i, ri) = (p / 2, p % 2);
            let (j, rj) = (q / 2, q % 2);
            if i.abs_diff(j) > bw {
                return 0.0;
            }
            let z = a[(i, j)];
            match (ri, rj) {
                (0, 0) | (1, 1) => z.re,
                (0, 1) => -z.im,
                _ => z.im,
            }
        });
        (m, 2)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (i - j)
    }

    /// Entry (i, j); zero outside the band.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Sets (i, j) and (j, i). Panics outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn to_hermitian(&self) -> Result<HermitianMatrix> {
        super::dense::ensure_dense(self.n)?;
        HermitianMatrix::from_real(&self.to_dense())
    }

    /// Largest absolute row sum; bounds every |eigenvalue|.
    pub fn gershgorin_radius(&self) -> f64 {
        let mut sums = vec![0.0_f64; self.n];
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..=i {
                let a = self.data[self.idx(i, j)].abs();
                sums[i] += a;
                if j != i {
                    sums[j] += a;
                }
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
    }

    pub fn shifted(&self, sigma: f64) -> Self {
        let mut m = self.clone();
        for i in 0..m.n {
            let k = m.idx(i, i);
            m.data[k] -= sigma;
        }
        m
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            n: self.n,
            bw: self.bw,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    /// `self - other`, widening to the larger bandwidth.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let bw = self.bw.max(other.bw);
        Ok(Self::from_fn(self.n, bw, |i, j| self.get(i, j) - other.get(i, j)))
    }

    /// The square `A²`, symmetric with bandwidth `2·bw`.
    pub fn square(&self) -> Self {
        let n = self.n;
        let bw = self.bw;
        Self::from_fn(n, 2 * bw, |i, j| {
            let lo = i.saturating_sub(bw);
            let hi = (j + bw).min(n - 1);
            let mut acc = 0.0;
            for m in lo..=hi {
                acc += self.get(i, m) * self.get(m, j);
            }
            acc
        })
    }

    /// Principal submatrix on the contiguous index range `[lo, hi)`.
    pub fn principal(&self, lo: usize, hi: usize) -> Self {
        Self::from_fn(hi - lo, self.bw, |i, j| self.get(i + lo, j + lo))
    }

    /// Zeroes every row and column whose index fails `keep`.
    pub fn masked(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut m = self.clone();
        for i in 0..m.n {
            for j in i.saturating_sub(m.bw)..=i {
                if !keep(i) || !keep(j) {
                    let k = m.idx(i, j);
                    m.data[k] = 0.0;
                }
            }
        }
        m
    }

    /// Inertia of `A − σI` from a symmetric band LDLᵀ factorisation.
    ///
    /// Fails with `PivotBreakdown` when the selected pivot is below
    /// `PIVOT_TOL` times the Gershgorin radius.
    pub fn inertia_shifted(&self, sigma: f64) -> Result<Inertia> {
        let scale = self.gershgorin_radius().max(sigma.abs()).max(f64::MIN_POSITIVE);
        let tiny = PIVOT_TOL * scale;
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let mut a = self.data.clone();
        for i in 0..n {
            a[i * w] -= sigma;
        }
        let at = |a: &Vec<f64>, i: usize, j: usize| -> f64 {
            if i - j > bw {
                0.0
            } else {
                a[i * w + (i - j)]
            }
        };

        let mut inertia = Inertia::default();
        let mut mult0 = vec![0.0; bw + 2];
        let mut mult1 = vec![0.0; bw + 2];
        let mut j = 0;
        while j < n {
            let last1 = (j + bw).min(n - 1);
            let ajj = a[j * w];
            let omega = (j + 1..=last1).fold(0.0_f64, |m, i| m.max(at(&a, i, j).abs()));

            let mut use_two = false;
            if j + 1 < n && ajj.abs() < ALPHA * omega {
                let g1 = if ajj == 0.0 { f64::INFINITY } else { omega / ajj.abs() };
                let (b, c) = (at(&a, j + 1, j), a[(j + 1) * w]);
                let det = ajj * c - b * b;
                if det.abs() > tiny * tiny {
                    let last2 = (j + 1 + bw).min(n - 1);
                    let mut g2 = 0.0_f64;
                    for i in j + 2..=last2 {
                        let u = if i - j <= bw { at(&a, i, j) } else { 0.0 };
                        let v = at(&a, i, j + 1);
                        g2 = g2.max(((u * c - v * b) / det).abs()).max(((v * ajj - u * b) / det).abs());
                    }
                    use_two = g2 < g1;
                }
            }

            if !use_two {
                if ajj.abs() <= tiny {
                    return Err(Error::PivotBreakdown { row: j, pivot: ajj.abs() });
                }
                if ajj > 0.0 {
                    inertia.positive += 1;
                } else {
                    inertia.negative += 1;
                }
                let cnt = last1 - j;
                for (r, i) in (j + 1..=last1).enumerate() {
                    mult0[r] = at(&a, i, j) / ajj;
                }
                for r in 0..cnt {
                    let i = j + 1 + r;
                    let li = mult0[r];
                    if li == 0.0 {
                        continue;
                    }
                    for s in 0..=r {
                        let m = j + 1 + s;
                        // a(m, j) = l_m · d
                        a[i * w + (i - m)] -= li * mult0[s] * ajj;
                    }
                }
                j += 1;
            } else {
                let b = at(&a, j + 1, j);
                let c = a[(j + 1) * w];
                let det = ajj * c - b * b;
                if det < 0.0 {
                    inertia.positive += 1;
                    inertia.negative += 1;
                } else if ajj + c > 0.0 {
                    inertia.positive += 2;
                } else {
                    inertia.negative += 2;
                }
                let last2 = (j + 1 + bw).min(n - 1);
                let cnt = last2.saturating_sub(j + 1);
                // columns j, j+1 of the trailing rows, then the multipliers
                let mut cols = Vec::with_capacity(cnt);
                for (r, i) in (j + 2..=last2).enumerate() {
                    let u = if i - j <= bw { at(&a, i, j) } else { 0.0 };
                    let v = at(&a, i, j + 1);
                    mult0[r] = (u * c - v * b) / det;
                    mult1[r] = (v * ajj - u * b) / det;
                    cols.push((u, v));
                }
                for r in 0..cnt {
                    let i = j + 2 + r;
                    let (l0, l1) = (mult0[r], mult1[r]);
                    if l0 == 0.0 && l1 == 0.0 {
                        continue;
                    }
                    for s in 0..=r {
                        let m = j + 2 + s;
                        let (um, vm) = cols[s];
                        a[i * w + (i - m)] -= l0 * um + l1 * vm;
                    }
                }
                j += 2;
            }
        }
        Ok(inertia)
    }

    /// Inertia of `A − σI`, nudging σ by relative steps on pivot breakdown.
    fn inertia_near(&self, sigma: f64) -> Result<Inertia> {
        let scale = self.gershgorin_radius().max(f64::MIN_POSITIVE);
        let mut s = sigma;
        let mut last = Err(Error::PivotBreakdown { row: 0, pivot: 0.0 });
        for attempt in 0..8 {
            match self.inertia_shifted(s) {
                Ok(i) => return Ok(i),
                Err(e) => last = Err(e),
            }
            s = sigma + scale * 1e-12 * f64::from(1u32 << attempt);
        }
        last
    }

    /// Number of eigenvalues strictly above `sigma`.
    pub fn count_above(&self, sigma: f64) -> Result<usize> {
        Ok(self.inertia_near(sigma)?.positive)
    }

    /// Number of eigenvalues strictly below `sigma`.
    pub fn count_below(&self, sigma: f64) -> Result<usize> {
        Ok(self.inertia_near(sigma)?.negative)
    }

    /// Bracket `[lo, hi]` for the largest eigenvalue, `hi - lo <= rel_tol·max(|hi|, scale·1e-300)`.
    pub fn max_eigenvalue(&self, rel_tol: f64) -> Result<(f64, f64)> {
        let g = self.gershgorin_radius();
        if self.n == 0 {
            return Ok((0.0, 0.0));
        }
        if g == 0.0 {
            return Ok((0.0, 0.0));
        }
        let (mut lo, mut hi) = (-g, g);
        let abs_floor = g * 1e-15;
        while hi - lo > (rel_tol * hi.abs().max(lo.abs())).max(abs_floor) {
            let mid = 0.5 * (lo + hi);
            if self.count_above(mid)? > 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo, hi))
    }

    pub fn min_eigenvalue(&self, rel_tol: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.scaled(-1.0).max_eigenvalue(rel_tol)?;
        Ok((-hi, -lo))
    }

    /// Upper bound for the spectral norm, accurate to `rel_tol`: bisection on
    /// σ for the existence of an eigenvalue with |λ| > σ.
    pub fn norm_upper(&self, rel_tol: f64) -> Result<f64> {
        let g = self.gershgorin_radius();
        if self.n == 0 || g == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, g);
        let abs_floor = g * 1e-15;
        while hi - lo > (rel_tol * hi).max(abs_floor) {
            let mid = 0.5 * (lo + hi);
            if self.count_above(mid)? > 0 || self.count_below(-mid)? > 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// `A² − A`, bandwidth `2·bw`, without storing `A²`.
    pub fn quadratic_defect(&self) -> Self {
        let n = self.n;
        let bw = self.bw;
        Self::from_fn(n, 2 * bw, |i, j| {
            let lo = i.saturating_sub(bw);
            let hi = (j + bw).min(n - 1);
            let mut acc = 0.0;
            for m in lo..=hi {
                acc += self.get(i, m) * self.get(m, j);
            }
            if i - j <= bw {
                acc -= self.get(i, j);
            }
            acc
        })
    }
}
