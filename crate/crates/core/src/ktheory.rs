//! Quasi-idempotents, quasi-projections and the K₀ bookkeeping built on them.
//!
//! An element `e` with ‖e² − e‖ < 1/4 has no spectrum on the line Re z = 1/2,
//! so κ₀(e), the Riesz projection for Re z > 1/2, is a genuine idempotent and
//! fixes a K₀ class.

use std::ops::Add;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::{
    eig, matmul, operator_norm, operator_norm_raw, CMatrix, GeneralMatrix, HermitianMatrix, C64,
};

/// Defect ceiling for quasi-idempotents.
pub const QUASI_LIMIT: f64 = 0.25;
/// Tolerance when reading a rank off a trace.
pub const RANK_TOL: f64 = 1e-6;
/// Convergence threshold ‖Z² − I‖ of the sign iteration.
pub const SIGN_TOL: f64 = 1e-12;
/// Straight-line homotopies are sampled at s = 0, 1/64, ..., 1.
pub const HOMOTOPY_GRID: usize = 65;

const SIGN_MAX_ITER: usize = 100;

/// ‖e² − e‖ in operator norm.
pub fn idempotent_defect(e: &GeneralMatrix) -> Result<f64> {
    if !e.is_square() {
        let (rows, cols) = e.shape();
        return Err(Error::NotSquare { rows, cols });
    }
    let m = e.matrix();
    Ok(operator_norm_raw(&(matmul(m, m) - m)))
}

/// ‖e² − e‖ for Hermitian `e`.
pub fn hermitian_defect(e: &HermitianMatrix) -> Result<f64> {
    if e.is_diagonal() {
        return Ok(e.diagonal().iter().fold(0.0_f64, |a, &x| a.max((x * x - x).abs())));
    }
    let m = e.matrix();
    Ok(operator_norm_raw(&(matmul(m, m) - m)))
}

#[derive(Clone, Debug)]
pub struct QuasiIdempotent {
    matrix: GeneralMatrix,
    defect: f64,
}

impl QuasiIdempotent {
    pub fn new(matrix: GeneralMatrix) -> Result<Self> {
        let defect = idempotent_defect(&matrix)?;
        Ok(Self { matrix, defect })
    }

    pub fn matrix(&self) -> &GeneralMatrix {
        &self.matrix
    }

    pub fn defect(&self) -> f64 {
        self.defect
    }

    /// True when this is an ε-quasi-idempotent for the given ε ≤ 1/4.
    pub fn certified(&self, eps: f64) -> bool {
        eps <= QUASI_LIMIT && self.defect < eps
    }
}

#[derive(Clone, Debug)]
pub struct QuasiProjection {
    matrix: HermitianMatrix,
    defect: f64,
}

impl QuasiProjection {
    pub fn new(matrix: HermitianMatrix) -> Result<Self> {
        let defect = hermitian_defect(&matrix)?;
        Ok(Self { matrix, defect })
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn defect(&self) -> f64 {
        self.defect
    }

    pub fn certified(&self, eps: f64) -> bool {
        eps <= QUASI_LIMIT && self.defect < eps
    }

    /// Half-width of the spectral hole around 1/2 forced by the defect.
    pub fn spectral_hole(&self) -> Option<f64> {
        (self.defect < QUASI_LIMIT).then(|| (QUASI_LIMIT - self.defect).sqrt())
    }

    pub fn to_quasi_idempotent(&self) -> QuasiIdempotent {
        QuasiIdempotent {
            matrix: self.matrix.to_general(),
            defect: self.defect,
        }
    }
}

/// A K₀ class: an integer, or an integer vector over B = ℂᵐ.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum K0Class {
    Scalar(i64),
    Block(Vec<i64>),
}

impl K0Class {
    pub fn scalar(&self) -> Option<i64> {
        match self {
            K0Class::Scalar(v) => Some(*v),
            K0Class::Block(_) => None,
        }
    }
}

impl Add for K0Class {
    type Output = Result<K0Class>;

    fn add(self, rhs: K0Class) -> Result<K0Class> {
        match (self, rhs) {
            (K0Class::Scalar(a), K0Class::Scalar(b)) => Ok(K0Class::Scalar(a + b)),
            (K0Class::Block(a), K0Class::Block(b)) if a.len() == b.len() => {
                Ok(K0Class::Block(a.iter().zip(&b).map(|(x, y)| x + y).collect()))
            }
            (K0Class::Block(a), K0Class::Block(b)) => Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            }),
            _ => Err(Error::InvalidParameter(
                "cannot add scalar and block K0 classes".into(),
            )),
        }
    }
}

/// κ₀ of a quasi-projection: the spectral projection onto eigenvalues > 1/2.
pub fn kappa0_projection(e: &QuasiProjection) -> Result<HermitianMatrix> {
    if e.defect >= QUASI_LIMIT {
        return Err(Error::DefectTooLarge {
            defect: e.defect,
            limit: QUASI_LIMIT,
        });
    }
    if e.matrix.is_diagonal() {
        let d: Vec<f64> = e
            .matrix
            .diagonal()
            .into_iter()
            .map(|x| if x > 0.5 { 1.0 } else { 0.0 })
            .collect();
        return Ok(HermitianMatrix::from_real_diagonal(&d));
    }
    let es = eig(&e.matrix)?;
    HermitianMatrix::hermitian_part(&es.reconstruct_with(|x| if x > 0.5 { 1.0 } else { 0.0 }))
}

/// κ₀ of a general quasi-idempotent through the Newton sign iteration of
/// 2e − 1: Z ← (Z + Z⁻¹)/2 until ‖Z² − I‖ ≤ 1e−12, then κ₀ = (Z + 1)/2.
pub fn kappa0_idempotent(e: &QuasiIdempotent) -> Result<GeneralMatrix> {
    if e.defect >= QUASI_LIMIT {
        return Err(Error::DefectTooLarge {
            defect: e.defect,
            limit: QUASI_LIMIT,
        });
    }
    let n = e.matrix.shape().0;
    let id = CMatrix::identity(n, n);
    let mut z = e.matrix.matrix() * C64::new(2.0, 0.0) - &id;
    let mut trace = Vec::new();
    for _ in 0..SIGN_MAX_ITER {
        let res = operator_norm_raw(&(matmul(&z, &z) - &id));
        trace.push(res);
        if res <= SIGN_TOL {
            return Ok(GeneralMatrix::new((z + &id) * C64::new(0.5, 0.0)));
        }
        if !res.is_finite() {
            break;
        }
        let inv = match z.clone().try_inverse() {
            Some(inv) => inv,
            None => break,
        };
        z = (z + inv) * C64::new(0.5, 0.0);
    }
    Err(Error::SignIterationDiverged { trace })
}

/// Rank of a numerically exact projection, read from its trace.
pub fn projection_rank(p: &CMatrix) -> Result<usize> {
    let tr = p.trace().re;
    let r = tr.round();
    if (tr - r).abs() > RANK_TOL || r < 0.0 {
        return Err(Error::NonIntegralTrace {
            trace: tr,
            tol: RANK_TOL,
        });
    }
    Ok(r as usize)
}

/// (2‖e‖ + δ + 1)·δ + ε: bound on ‖f² − f‖ when ‖e − f‖ = δ and ‖e² − e‖ = ε.
pub fn perturbation_defect_bound(norm_e: f64, eps: f64, delta: f64) -> f64 {
    (2.0 * norm_e + delta + 1.0) * delta + eps
}

#[derive(Clone, Debug, Serialize)]
pub struct HomotopyCheck {
    /// The analytic certificate max{ε_e, ε_f} + ¼‖e − f‖² < 1/4.
    pub valid: bool,
    pub criterion: f64,
    /// Largest defect along the sampled straight line.
    pub worst_defect: f64,
}

fn straight_line_worst(e: &CMatrix, f: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..HOMOTOPY_GRID {
        let s = i as f64 / (HOMOTOPY_GRID - 1) as f64;
        let g = e * C64::new(1.0 - s, 0.0) + f * C64::new(s, 0.0);
        worst = worst.max(operator_norm_raw(&(matmul(&g, &g) - &g)));
    }
    worst
}

/// max{ε_e, ε_f} + ¼δ²; the straight line from e to f stays quasi-idempotent
/// when this is below 1/4.
pub fn homotopy_criterion(eps_e: f64, eps_f: f64, delta: f64) -> f64 {
    eps_e.max(eps_f) + 0.25 * delta * delta
}

/// Straight-line homotopy test between two quasi-idempotents.
pub fn straightline_homotopy_valid(
    e: &QuasiIdempotent,
    f: &QuasiIdempotent,
) -> Result<HomotopyCheck> {
    if e.matrix.shape() != f.matrix.shape() {
        return Err(Error::DimensionMismatch {
            expected: e.matrix.shape().0,
            found: f.matrix.shape().0,
        });
    }
    let delta = operator_norm_raw(&(e.matrix.matrix() - f.matrix.matrix()));
    let criterion = homotopy_criterion(e.defect, f.defect, delta);
    let worst_defect = straight_line_worst(e.matrix.matrix(), f.matrix.matrix());
    Ok(HomotopyCheck {
        valid: criterion < QUASI_LIMIT,
        criterion,
        worst_defect,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbationCheck {
    pub delta: f64,
    pub is_quasi: bool,
    pub eps_f: f64,
    pub homotopic: bool,
    /// Value of (2‖e‖ + (5/4)δ + 1)δ + ε used when δ ≥ 1/17.
    pub criterion: Option<f64>,
}

/// Perturbation of an exact projection `e` to a Hermitian `f`.
pub fn projection_perturbation_check(
    e: &HermitianMatrix,
    f: &HermitianMatrix,
) -> Result<PerturbationCheck> {
    if e.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            found: f.dim(),
        });
    }
    let eps_e = hermitian_defect(e)?;
    let delta = e.sub(f)?.norm()?;
    let eps_f = hermitian_defect(f)?;
    if delta < 1.0 / 17.0 {
        let worst = straight_line_worst(e.matrix(), f.matrix());
        return Ok(PerturbationCheck {
            delta,
            is_quasi: eps_f < QUASI_LIMIT,
            eps_f,
            homotopic: worst < QUASI_LIMIT,
            criterion: None,
        });
    }
    let norm_e = e.norm()?;
    let criterion = (2.0 * norm_e + 1.25 * delta + 1.0) * delta + eps_e;
    Ok(PerturbationCheck {
        delta,
        is_quasi: eps_f < QUASI_LIMIT,
        eps_f,
        homotopic: criterion < QUASI_LIMIT,
        criterion: Some(criterion),
    })
}

/// [p] − [q] = rank κ₀(p) − rank κ₀(q).
pub fn k0_from_pair(p: &QuasiProjection, q: &QuasiProjection) -> Result<K0Class> {
    let rp = projection_rank(kappa0_projection(p)?.matrix())?;
    let rq = projection_rank(kappa0_projection(q)?.matrix())?;
    Ok(K0Class::Scalar(rp as i64 - rq as i64))
}

/// Rank of κ₀ of a general quasi-idempotent.
pub fn k0_rank_idempotent(e: &QuasiIdempotent) -> Result<usize> {
    projection_rank(kappa0_idempotent(e)?.matrix())
}

/// ‖[a, b]‖.
pub fn commutator_norm(a: &CMatrix, b: &CMatrix) -> f64 {
    operator_norm_raw(&(matmul(a, b) - matmul(b, a)))
}

/// ‖p² − p‖ for a general matrix already known to be a projection candidate.
pub fn projection_error(p: &GeneralMatrix) -> f64 {
    let m = p.matrix();
    operator_norm(&GeneralMatrix::new(matmul(m, m) - m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn diag(d: &[f64]) -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(d)
    }

    #[test]
    fn defect_examples() {
        let p = diag(&[1.0, 0.0, 1.0]).to_general();
        assert_eq!(idempotent_defect(&p).unwrap(), 0.0);
        let half = diag(&[0.5, 0.5]).to_general();
        assert!((idempotent_defect(&half).unwrap() - 0.25).abs() < 1e-15);
        assert!(idempotent_defect(&GeneralMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn kappa0_examples() {
        let e = QuasiProjection::new(diag(&[0.9, 0.1])).unwrap();
        assert_eq!(kappa0_projection(&e).unwrap().diagonal(), vec![1.0, 0.0]);
        let p = QuasiProjection::new(diag(&[1.0, 0.0, 1.0])).unwrap();
        assert_eq!(kappa0_projection(&p).unwrap().diagonal(), vec![1.0, 0.0, 1.0]);
        let bad = QuasiProjection::new(diag(&[0.5])).unwrap();
        assert!(matches!(kappa0_projection(&bad), Err(Error::DefectTooLarge { .. })));
    }

    #[test]
    fn kappa0_sign_iteration_on_similar_projection() {
        // S diag(1, 1, 0) S⁻¹ plus a nudge: not normal, still quasi-idempotent
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.0, 0.0, 1.0, 0.2, 0.1, 0.0, 1.0]);
        let p = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.02, 0.97, 0.03]));
        let e = &s * p * s.clone().try_inverse().unwrap();
        let q = QuasiIdempotent::new(GeneralMatrix::from_real(&e)).unwrap();
        assert!(q.defect() < 0.25);
        let k = kappa0_idempotent(&q).unwrap();
        assert!(projection_error(&k) < 1e-10);
        assert!(commutator_norm(k.matrix(), q.matrix().matrix()) < 1e-9);
        assert_eq!(projection_rank(k.matrix()).unwrap(), 2);
    }

    #[test]
    fn perturbation_bound_examples() {
        assert_eq!(perturbation_defect_bound(1.0, 0.0, 0.0), 0.0);
        let d = 0.01;
        assert!((perturbation_defect_bound(1.0, 0.0, d) - 0.0301).abs() < 1e-15);
        for d in [0.001, 0.1, 0.5, 1.0] {
            let b = perturbation_defect_bound(1.0, 0.0, d);
            assert!((b - (3.0 + d) * d).abs() < 1e-15 && b <= 4.0 * d);
        }
    }

    #[test]
    fn homotopy_criterion_examples() {
        let e = QuasiIdempotent::new(diag(&[1.0, 0.0]).to_general()).unwrap();
        let chk = straightline_homotopy_valid(&e, &e).unwrap();
        assert!(chk.valid);
        assert_eq!(chk.worst_defect, 0.0);

        // rank-one projection onto a line at angle asin(d) from e
        let mk = |d: f64| {
            let th = d.asin();
            let (c, s) = (th.cos(), th.sin());
            let f = DMatrix::from_row_slice(2, 2, &[c * c, c * s, c * s, s * s]);
            QuasiIdempotent::new(GeneralMatrix::from_real(&f)).unwrap()
        };
        let f = mk(0.9);
        let chk = straightline_homotopy_valid(&e, &f).unwrap();
        assert!((chk.criterion - 0.2025).abs() < 1e-12);
        assert!(chk.valid && chk.worst_defect < 0.25);
    }

    #[test]
    fn homotopy_criterion_rejects_far_projections() {
        let e = QuasiIdempotent::new(diag(&[1.0, 0.0]).to_general()).unwrap();
        // f = diag(-0.2, 0): defect 0.24, distance 1.2
        let f = QuasiIdempotent::new(GeneralMatrix::from_real(&DMatrix::from_row_slice(
            2,
            2,
            &[-0.2, 0.0, 0.0, 0.0],
        )))
        .unwrap();
        let chk = straightline_homotopy_valid(&e, &f).unwrap();
        let delta: f64 = 1.2;
        assert!((chk.criterion - (f.defect().max(0.0) + 0.25 * delta * delta)).abs() < 1e-12);
        assert!(!chk.valid);
        assert!((homotopy_criterion(0.0, 0.0, 1.2) - 0.36).abs() < 1e-15);
    }

    #[test]
    fn projection_perturbation_examples() {
        let e = diag(&[1.0, 0.0, 1.0]);
        let r = projection_perturbation_check(&e, &e).unwrap();
        assert!(r.is_quasi && r.homotopic && r.eps_f == 0.0);

        let f = diag(&[1.0 - 0.05, 0.05, 1.0]);
        let r = projection_perturbation_check(&e, &f).unwrap();
        assert!((r.delta - 0.05).abs() < 1e-12);
        assert!(r.is_quasi && r.eps_f <= 0.2 && r.homotopic);

        let f = diag(&[0.8, 0.0, 1.0]);
        let r = projection_perturbation_check(&e, &f).unwrap();
        assert!((r.criterion.unwrap() - 0.65).abs() < 1e-12);
        assert!(!r.homotopic);
    }

    #[test]
    fn k0_pair_examples() {
        let p = QuasiProjection::new(diag(&[1.0, 1.0, 0.0])).unwrap();
        let q = QuasiProjection::new(diag(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(k0_from_pair(&p, &p).unwrap(), K0Class::Scalar(0));
        assert_eq!(k0_from_pair(&p, &q).unwrap(), K0Class::Scalar(1));
    }

    #[test]
    fn k0_classes_add_under_direct_sum() {
        let a = K0Class::Block(vec![1, -2]);
        let b = K0Class::Block(vec![0, 3]);
        assert_eq!((a + b).unwrap(), K0Class::Block(vec![1, 1]));
        assert_eq!((K0Class::Scalar(2) + K0Class::Scalar(-5)).unwrap(), K0Class::Scalar(-3));
        assert!((K0Class::Scalar(2) + K0Class::Block(vec![1])).is_err());
    }

    #[test]
    fn non_integral_trace_is_rejected() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.5, 0.0),
            C64::new(1.0, 0.0),
        ]));
        assert!(matches!(projection_rank(&m), Err(Error::NonIntegralTrace { .. })));
    }
}
