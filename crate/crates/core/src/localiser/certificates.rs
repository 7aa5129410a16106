//! Block decomposition along the spectral split and the truncation
//! certificates: the high block of e_t against that of Θ_t f_t Θ_t*, the
//! reduction of e_t to its diagonal blocks, and the congruence between
//! 2p^e − 1 and the localiser.
//!
//! Each certificate comes in a dense form (any pair that fits in memory) and
//! a lattice form for shift models, evaluated on windows of the untruncated
//! lattice around the spectral threshold.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::{signature, localiser_signature, Localiser, SpectralDecomposition};
use crate::error::{Error, Result};
use crate::ktheory::{hermitian_defect, QuasiProjection, HOMOTOPY_GRID, QUASI_LIMIT};
use crate::operators::{
    compress, compress_hermitian, matmul, operator_norm, CMatrix, GeneralMatrix,
    HermitianMatrix, C64,
};
use crate::pairing::{
    lattice_defect, lattice_radius, LocaliserFunctions, PairRepresentative, ShiftLattice,
    NORM_REL_TOL,
};

/// Additive slack on certificate comparisons.
const SLACK: f64 = 1e-10;

/// `[[p, m*], [m, q]]` of a Hermitian matrix along low ⊕ high.
#[derive(Clone, Debug)]
pub struct BlockDecomposition {
    pub p: HermitianMatrix,
    pub q: HermitianMatrix,
    /// high × low
    pub m: GeneralMatrix,
}

pub fn block_decompose(t: &HermitianMatrix, sd: &SpectralDecomposition) -> Result<BlockDecomposition> {
    if t.dim() != sd.dim {
        return Err(Error::DimensionMismatch {
            expected: sd.dim,
            found: t.dim(),
        });
    }
    let g = t.to_general();
    Ok(BlockDecomposition {
        p: compress_hermitian(t, &sd.low)?,
        q: compress_hermitian(t, &sd.high)?,
        m: compress(&g, &sd.high, &sd.low)?,
    })
}

impl BlockDecomposition {
    /// Puts the blocks back at their original indices.
    pub fn reassemble(&self, sd: &SpectralDecomposition) -> Result<HermitianMatrix> {
        let mut out = CMatrix::zeros(sd.dim, sd.dim);
        let (p, q, m) = (self.p.matrix(), self.q.matrix(), self.m.matrix());
        for (a, &i) in sd.low.iter().enumerate() {
            for (b, &j) in sd.low.iter().enumerate() {
                out[(i, j)] = p[(a, b)];
            }
        }
        for (a, &i) in sd.high.iter().enumerate() {
            for (b, &j) in sd.high.iter().enumerate() {
                out[(i, j)] = q[(a, b)];
            }
            for (b, &j) in sd.low.iter().enumerate() {
                out[(i, j)] = m[(a, b)];
                out[(j, i)] = m[(a, b)].conj();
            }
        }
        HermitianMatrix::new(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OffDiagonalCertificate {
    /// ‖q^e − q^Θ q^f (q^Θ)*‖
    pub lhs: f64,
    /// ½(1 + t⁻²λ²)^{−1/2}
    pub bound: f64,
    pub pass: bool,
    /// (1 + t⁻²λ²)^{−1/2}: ‖√cs (v − 1) √cs‖ on the high band is at most
    /// 2·sup cs there.
    pub provable_bound: f64,
    pub provable_pass: bool,
    /// lhs ≤ δ, when δ is supplied.
    pub within_delta: Option<bool>,
}

fn offdiagonal_bounds(t: f64, lambda: f64) -> (f64, f64) {
    let r = (1.0 + (lambda / t).powi(2)).sqrt();
    (0.5 / r, 1.0 / r)
}

fn finish_offdiagonal(lhs: f64, t: f64, lambda: f64, delta: Option<f64>) -> OffDiagonalCertificate {
    let (bound, provable_bound) = offdiagonal_bounds(t, lambda);
    OffDiagonalCertificate {
        lhs,
        bound,
        pass: lhs <= bound + SLACK,
        provable_bound,
        provable_pass: lhs <= provable_bound + SLACK,
        within_delta: delta.map(|d| lhs <= d),
    }
}

/// Θ_t is diagonal in the modes of D, so its compression to the high band
/// commutes with compressing; the left side is the high block of
/// e_t − Θ_t f_t Θ_t*.
pub fn offdiagonal_certificate(
    pair: &PairRepresentative,
    sd: &SpectralDecomposition,
) -> Result<OffDiagonalCertificate> {
    let th = pair.theta.matrix();
    let tft = matmul(&matmul(th, pair.f.matrix()), &th.adjoint());
    let diff = GeneralMatrix::new(pair.e.matrix().matrix() - tft);
    let lhs = operator_norm(&compress(&diff, &sd.high, &sd.high)?);
    Ok(finish_offdiagonal(lhs, pair.t, sd.lambda, None))
}

/// Width of the windows of the untruncated lattice used beyond a threshold.
fn tail_width(t: f64, k: i64) -> i64 {
    lattice_radius(t, k)
}

/// Lattice form for the shift by `k`, threshold λ (modes |n| ≤ ⌊λ⌋ are low).
/// Both high tails are evaluated on windows of width ≈ 32t past the threshold.
pub fn offdiagonal_certificate_lattice(
    k: i64,
    t: f64,
    lambda: f64,
    funcs: LocaliserFunctions,
    delta: Option<f64>,
) -> Result<OffDiagonalCertificate> {
    let cut = lambda.floor() as i64;
    let w = tail_width(t, k);
    let mut lhs = 0.0_f64;
    for sign in [1_i64, -1] {
        let (lo, hi) = if sign > 0 { (cut + 1, cut + w) } else { (-cut - w, -cut - 1) };
        let lat = ShiftLattice::new(k, t, lo, hi, funcs);
        let d = lat.e().sub(&lat.theta_f_theta())?;
        lhs = lhs.max(d.norm_upper(NORM_REL_TOL)?);
    }
    Ok(finish_offdiagonal(lhs, t, lambda, delta))
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagonalReduction {
    pub eps: f64,
    pub eps_q: f64,
    /// ε_q < 1/400 − ε
    pub window_ok: bool,
    pub p_defect: f64,
    /// 2ε + ε_q
    pub p_bound: f64,
    pub m_norm: f64,
    /// ε + ε_q, compared with m_norm²
    pub m_bound: f64,
    /// Largest defect of [[p, s·m*], [s·m, q]] on the s-grid.
    pub path_worst: f64,
    /// (2‖e‖ + (5/4)δ + 1)δ + ε at δ = ‖m‖, the analytic homotopy certificate.
    pub path_criterion: f64,
    pub pass: bool,
}

fn window_check(eps: f64, eps_q: f64) -> Result<()> {
    if eps_q < 1.0 / 400.0 - eps {
        Ok(())
    } else {
        Err(Error::HypothesisViolated(format!(
            "eps_q = {eps_q} is not below 1/400 - eps = {}",
            1.0 / 400.0 - eps
        )))
    }
}

fn finish_reduction(
    eps: f64,
    eps_q: f64,
    norm_e: f64,
    p_defect: f64,
    m_norm: f64,
    path_worst: f64,
) -> DiagonalReduction {
    let p_bound = 2.0 * eps + eps_q;
    let m_bound = eps + eps_q;
    let path_criterion = (2.0 * norm_e + 1.25 * m_norm + 1.0) * m_norm + eps;
    let pass = p_defect <= p_bound + SLACK
        && m_norm * m_norm <= m_bound + SLACK
        && path_worst < QUASI_LIMIT
        && path_criterion < QUASI_LIMIT;
    DiagonalReduction {
        eps,
        eps_q,
        window_ok: true,
        p_defect,
        p_bound,
        m_norm,
        m_bound,
        path_worst,
        path_criterion,
        pass,
    }
}

fn s_grid() -> impl Iterator<Item = f64> {
    (0..HOMOTOPY_GRID).map(|i| i as f64 / (HOMOTOPY_GRID - 1) as f64)
}

/// ‖q² − q‖ for the high block of `e`.
pub(crate) fn q_defect(e: &QuasiProjection, sd: &SpectralDecomposition) -> Result<f64> {
    hermitian_defect(&compress_hermitian(e.matrix(), &sd.high)?)
}

/// Reduction of an ε-quasi-projection to its diagonal blocks along `sd`,
/// given ε ≥ defect(e) and ε_q ≥ defect(q).
pub fn diagonal_reduction_check(
    e: &QuasiProjection,
    sd: &SpectralDecomposition,
    eps: f64,
    eps_q: f64,
) -> Result<DiagonalReduction> {
    window_check(eps, eps_q)?;
    if e.defect() >= eps {
        return Err(Error::HypothesisViolated(format!(
            "defect(e) = {} is not below eps = {eps}",
            e.defect()
        )));
    }
    let blocks = block_decompose(e.matrix(), sd)?;
    let q_def = hermitian_defect(&blocks.q)?;
    if q_def >= eps_q {
        return Err(Error::HypothesisViolated(format!(
            "defect(q) = {q_def} is not below eps_q = {eps_q}"
        )));
    }
    let p_defect = hermitian_defect(&blocks.p)?;
    let m_norm = operator_norm(&blocks.m);
    let full = e.matrix().matrix();
    let mut off = CMatrix::zeros(sd.dim, sd.dim);
    let mm = blocks.m.matrix();
    for (a, &i) in sd.high.iter().enumerate() {
        for (b, &j) in sd.low.iter().enumerate() {
            off[(i, j)] = mm[(a, b)];
            off[(j, i)] = mm[(a, b)].conj();
        }
    }
    let mut path_worst = 0.0_f64;
    for s in s_grid() {
        let g = full - &off * C64::new(1.0 - s, 0.0);
        let h = HermitianMatrix::hermitian_part(&g)?;
        path_worst = path_worst.max(hermitian_defect(&h)?);
    }
    Ok(finish_reduction(eps, eps_q, e.matrix().norm()?, p_defect, m_norm, path_worst))
}

/// defect of the high block: e masked to one high tail, squared, and read off
/// away from the far edge of the window.
fn lattice_q_defect(k: i64, t: f64, cut: i64, funcs: LocaliserFunctions) -> Result<f64> {
    let w = tail_width(t, k);
    let pad = k.abs();
    let mut worst = 0.0_f64;
    for sign in [1_i64, -1] {
        let (lo, hi) = if sign > 0 { (cut + 1, cut + w + pad) } else { (-cut - w - pad, -cut - 1) };
        let lat = ShiftLattice::new(k, t, lo, hi, funcs);
        let d = lat.e().quadratic_defect();
        let d = d.masked(|i| lat.mode(i).0.abs() <= cut + w);
        worst = worst.max(d.norm_upper(NORM_REL_TOL)?);
    }
    Ok(worst)
}

/// Dense window of `e` around the crossing at `cut` + ½ (upper tail) and the
/// indices that are low.
fn crossing_window(
    k: i64,
    t: f64,
    cut: i64,
    upper: bool,
    funcs: LocaliserFunctions,
) -> (DMatrix<f64>, Vec<bool>) {
    let r = 2 * k.abs() + 2;
    let (lo, hi) = if upper { (cut - r, cut + 1 + r) } else { (-cut - 1 - r, -cut + r) };
    let lat = ShiftLattice::new(k, t, lo, hi, funcs);
    let low = (0..lat.dim()).map(|i| lat.mode(i).0.abs() <= cut).collect();
    (lat.e().to_dense(), low)
}

fn sym_norm(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Lattice form of the reduction check for the shift by `k` at threshold λ.
///
/// ε and ε_q are the measured defects of e_t and of its high block, raised by
/// a relative 1e−6. The s-path is bounded by ε + ‖Δ(s)‖ where
/// Δ(s) = −(1−s)(eM + Me − M) + (1−s)²M² and M is the crossing part of e_t;
/// Δ lives next to the two crossings, where it is computed exactly.
pub fn diagonal_reduction_lattice(
    k: i64,
    t: f64,
    lambda: f64,
    funcs: LocaliserFunctions,
) -> Result<DiagonalReduction> {
    let cut = lambda.floor() as i64;
    let eps = lattice_defect(k, t, funcs, lattice_radius(t, k).max(cut + k.abs() + 1))? * (1.0 + 1e-6)
        + f64::MIN_POSITIVE;
    let eps_q = lattice_q_defect(k, t, cut, funcs)? * (1.0 + 1e-6) + f64::MIN_POSITIVE;
    window_check(eps, eps_q)?;

    // m links mode n of one copy to mode n ∓ k of the other; every index
    // carries at most one link, so ‖m‖ is the largest crossing entry
    let mut m_norm = 0.0_f64;
    for n in -cut - k.abs() - 1..=cut + k.abs() + 1 {
        let a = n + k;
        if (n.abs() <= cut) != (a.abs() <= cut) {
            m_norm = m_norm.max((funcs.cs(a as f64 / t) * funcs.cs(n as f64 / t)).sqrt());
        }
    }

    let p_defect = {
        let lat = ShiftLattice::new(k, t, -cut, cut, funcs);
        let d = lat.e().quadratic_defect();
        d.norm_upper(1e-6)?
    };

    let mut path_worst = 0.0_f64;
    for upper in [true, false] {
        let (e, low) = crossing_window(k, t, cut, upper, funcs);
        let n = e.nrows();
        let m = DMatrix::from_fn(n, n, |i, j| if low[i] != low[j] { e[(i, j)] } else { 0.0 });
        let lin = &e * &m + &m * &e - &m;
        let quad = &m * &m;
        for s in s_grid() {
            let u = 1.0 - s;
            let delta = &quad * (u * u) - &lin * u;
            path_worst = path_worst.max(eps + sym_norm(&delta));
        }
    }
    // ‖e‖ ≤ 1 + ε for a quasi-projection with spectrum near {0, 1}
    let norm_e = 0.5 + (0.25 + eps).sqrt();
    Ok(finish_reduction(eps, eps_q, norm_e, p_defect, m_norm, path_worst))
}

#[derive(Clone, Debug, Serialize)]
pub struct CongruenceReport {
    pub sig_2p_minus_1: i64,
    pub sig_l: i64,
    pub equal: bool,
    /// ‖(2p − 1) − S·L·S‖
    pub residual: f64,
    pub tolerance: f64,
}

/// Compares 2p^e − 1 with S·L·S, S = (1 + t⁻²D²)^{−1/4} on the low band, and
/// their signatures. S is read off Θ_t as √(2cs), which is exact for the
/// default functions.
pub fn congruence_check(
    pair: &PairRepresentative,
    sd: &SpectralDecomposition,
    localiser: &mut Localiser,
) -> Result<CongruenceReport> {
    let p = compress_hermitian(pair.e.matrix(), &sd.low)?;
    let n = p.dim();
    if localiser.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: localiser.dim(),
        });
    }
    let half = sd.dim / 2;
    let th = pair.theta.matrix();
    let scale: Vec<f64> = sd
        .low
        .iter()
        .map(|&i| {
            let j = i % half;
            (2.0 * th[(j, j)].re * th[(j, half + j)].re).sqrt()
        })
        .collect();
    let m = p.matrix() * C64::new(2.0, 0.0) - CMatrix::identity(n, n);
    let l = localiser.to_hermitian()?;
    let sls = CMatrix::from_fn(n, n, |i, j| l.matrix()[(i, j)] * (scale[i] * scale[j]));
    let residual = operator_norm(&GeneralMatrix::new(&m - sls));
    let tolerance = 1e-9 * l.norm()?;
    if residual > tolerance {
        return Err(Error::HypothesisViolated(format!(
            "congruence residual {residual} exceeds {tolerance}"
        )));
    }
    let sig_m = signature(&HermitianMatrix::hermitian_part(&m)?, None)?.sig;
    let sig_l = localiser_signature(localiser, None)?.sig;
    Ok(CongruenceReport {
        sig_2p_minus_1: sig_m,
        sig_l,
        equal: sig_m == sig_l,
        residual,
        tolerance,
    })
}
