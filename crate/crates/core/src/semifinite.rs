//! Weighted traces over B = ℂᵐ. A Hilbert B-module here is a tuple of Hilbert
//! spaces E = ⊕ⱼ Eⱼ, the B-valued inner product is taken componentwise, and
//! the induced trace on finite-rank operators is τ̂(T) = Σⱼ wⱼ Tr(Tⱼ).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ktheory::{kappa0_projection, projection_rank, K0Class, QuasiProjection};
use crate::localiser::{
    half_signature_index, signature, spectral_decompose, HalfSignatureOptions, HalfSignatureReport,
};
use crate::models::BlockModel;
use crate::operators::{ensure_dense, CMatrix, HermitianMatrix, C64};

/// Faithful finite trace τ(b) = Σⱼ wⱼ bⱼ on ℂᵐ.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedTrace {
    weights: Vec<f64>,
}

impl WeightedTrace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("no components".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidWeights(format!("weight {w} is not positive")));
        }
        Ok(Self { weights })
    }

    pub fn from_block_model(bm: &BlockModel) -> Result<Self> {
        Self::new(bm.weights())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn tau(&self, b: &[C64]) -> Result<C64> {
        self.check_len(b.len())?;
        Ok(b.iter().zip(&self.weights).map(|(x, w)| x * *w).sum())
    }

    /// τ̂ of a block-diagonal operator given by its blocks.
    pub fn tau_hat(&self, blocks: &[CMatrix]) -> Result<C64> {
        self.check_len(blocks.len())?;
        Ok(blocks.iter().zip(&self.weights).map(|(m, w)| m.trace() * *w).sum())
    }

    fn check_len(&self, m: usize) -> Result<()> {
        if m == self.weights.len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: m,
            })
        }
    }
}

/// τ_*[p] as a real number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TauClass {
    pub value: f64,
}

impl TauClass {
    pub fn from_k0(class: &K0Class, trace: &WeightedTrace) -> Result<Self> {
        let ranks = match class {
            K0Class::Block(r) => r.clone(),
            K0Class::Scalar(r) => vec![*r],
        };
        trace.check_len(ranks.len())?;
        Ok(Self {
            value: ranks.iter().zip(trace.weights()).map(|(r, w)| *r as f64 * w).sum(),
        })
    }
}

/// τ(κ₀(p)) = Σⱼ wⱼ·rank κ₀(pⱼ).
pub fn tau_rank(blocks: &[QuasiProjection], trace: &WeightedTrace) -> Result<f64> {
    trace.check_len(blocks.len())?;
    let ranks = blocks
        .iter()
        .map(|p| Ok(projection_rank(kappa0_projection(p)?.matrix())? as i64))
        .collect::<Result<Vec<_>>>()?;
    Ok(TauClass::from_k0(&K0Class::Block(ranks), trace)?.value)
}

/// Σⱼ wⱼ·sig(Lⱼ).
pub fn tau_signature(blocks: &[HermitianMatrix], trace: &WeightedTrace, zero_tol: Option<f64>) -> Result<f64> {
    trace.check_len(blocks.len())?;
    let sigs = blocks
        .iter()
        .map(|l| Ok(signature(l, zero_tol)?.sig))
        .collect::<Result<Vec<_>>>()?;
    Ok(sigs.iter().zip(trace.weights()).map(|(s, w)| *s as f64 * w).sum())
}

#[derive(Clone, Debug, Serialize)]
pub struct SemifiniteReport {
    /// ½·Σⱼ wⱼ·sig(Lⱼ)
    pub tau_index: f64,
    /// Integer half-signature of each component.
    pub per_block: Vec<i64>,
    pub weights: Vec<f64>,
    /// τ̂ of the truncation projection, Σⱼ wⱼ·dim H_{λ,j}.
    pub tau_hat_truncation: f64,
    pub blocks: Vec<HalfSignatureReport>,
}

/// Half τ-signature of the block localiser, one component at a time.
pub fn semifinite_half_signature(
    bm: &BlockModel,
    eps: f64,
    delta: f64,
    opts: &HalfSignatureOptions,
) -> Result<SemifiniteReport> {
    let trace = WeightedTrace::from_block_model(bm)?;
    let blocks = bm
        .components
        .par_iter()
        .map(|c| half_signature_index(&c.model, eps, delta, opts))
        .collect::<Result<Vec<_>>>()?;
    let per_block: Vec<i64> = blocks.iter().map(|r| r.index).collect();
    let sig_tau: f64 = blocks
        .iter()
        .zip(trace.weights())
        .map(|(r, w)| r.signature.sig as f64 * w)
        .sum();
    let mut tau_hat_truncation = 0.0;
    for (c, r) in bm.components.iter().zip(&blocks) {
        tau_hat_truncation += c.weight * spectral_decompose(&c.model, r.lambda)?.low_dim() as f64;
    }
    Ok(SemifiniteReport {
        tau_index: 0.5 * sig_tau,
        per_block,
        weights: trace.weights,
        tau_hat_truncation,
        blocks,
    })
}

/// A test element for the trace-transfer rule.
#[derive(Clone, Debug)]
pub enum TransferSample {
    /// |ξ₁⟩⟨ξ₂| with ξ given per component.
    RankOne { xi1: Vec<Vec<C64>>, xi2: Vec<Vec<C64>> },
    /// A projection (b_ij) ∈ Mₙ(B), given per component as n×n matrices.
    Projection { blocks: Vec<HermitianMatrix> },
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferRow {
    pub kind: &'static str,
    /// τ̂ of the represented operator.
    pub direct: f64,
    /// τ(⟨ξ₂, ξ₁⟩) for rank-one samples, τ_*[p] for projections.
    pub transferred: f64,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferReport {
    pub rows: Vec<TransferRow>,
    pub max_residual: f64,
    pub pass: bool,
}

/// Agreement tolerance of the two routes.
pub const TRANSFER_TOL: f64 = 1e-12;

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Evaluates τ̂ on each sample by two routes: the weighted trace of the
/// represented operator, and the transfer rule (τ of the B-valued inner
/// product, or τ_* of the K₀ class for projections).
pub fn trace_transfer_check(bm: &BlockModel, samples: &[TransferSample]) -> Result<TransferReport> {
    let trace = WeightedTrace::from_block_model(bm)?;
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let (kind, direct, transferred) = match s {
            TransferSample::RankOne { xi1, xi2 } => {
                trace.check_len(xi1.len())?;
                trace.check_len(xi2.len())?;
                let mut ops = Vec::with_capacity(xi1.len());
                let mut ip = Vec::with_capacity(xi1.len());
                for (j, (a, b)) in xi1.iter().zip(xi2).enumerate() {
                    let dim = 2 * bm.components[j].model.dim();
                    ensure_dense(dim)?;
                    if a.len() != dim || b.len() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            found: a.len().max(b.len()),
                        });
                    }
                    ops.push(CMatrix::from_fn(dim, dim, |r, c| a[r] * b[c].conj()));
                    ip.push(inner(b, a));
                }
                let direct = trace.tau_hat(&ops)?;
                let transferred = trace.tau(&ip)?;
                ("rank_one", direct, transferred)
            }
            TransferSample::Projection { blocks } => {
                trace.check_len(blocks.len())?;
                let mats: Vec<CMatrix> = blocks.iter().map(|b| b.matrix().clone()).collect();
                let direct = trace.tau_hat(&mats)?;
                let ranks = blocks
                    .iter()
                    .map(|b| Ok(projection_rank(b.matrix())? as i64))
                    .collect::<Result<Vec<_>>>()?;
                let class = TauClass::from_k0(&K0Class::Block(ranks), &trace)?;
                ("projection", direct, C64::new(class.value, 0.0))
            }
        };
        let residual = (direct - transferred).norm();
        rows.push(TransferRow {
            kind,
            direct: direct.re,
            transferred: transferred.re,
            residual,
            pass: residual <= TRANSFER_TOL * (1.0 + direct.norm()),
        });
    }
    let max_residual = rows.iter().fold(0.0_f64, |a, r| a.max(r.residual));
    let pass = rows.iter().all(|r| r.pass);
    Ok(TransferReport {
        rows,
        max_residual,
        pass,
    })
}

/// Seeded rank-one samples (entries uniform in the unit square) and
/// block projections of random rank.
pub fn random_transfer_samples(bm: &BlockModel, count: usize, seed: u64) -> Vec<TransferSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * count);
    let vector = |rng: &mut ChaCha8Rng, n: usize| -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    };
    for _ in 0..count {
        let xi1 = bm.components.iter().map(|c| vector(&mut rng, 2 * c.model.dim())).collect();
        let xi2 = bm.components.iter().map(|c| vector(&mut rng, 2 * c.model.dim())).collect();
        out.push(TransferSample::RankOne { xi1, xi2 });
    }
    for _ in 0..count {
        let n = rng.gen_range(1..=6);
        let blocks = bm
            .components
            .iter()
            .map(|_| {
                let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                let q = a.qr().q();
                let r = rng.gen_range(0..=n);
                let mut d = CMatrix::zeros(n, n);
                for i in 0..r {
                    d[(i, i)] = C64::new(1.0, 0.0);
                }
                HermitianMatrix::hermitian_part(&(&q * d * q.adjoint())).expect("projection")
            })
            .collect();
        out.push(TransferSample::Projection { blocks });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{block_model, circle_model};

    fn diag(d: &[f64]) -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(d)
    }

    #[test]
    fn tau_rank_examples() {
        let tr = WeightedTrace::new(vec![0.5, 0.25]).unwrap();
        let zero = QuasiProjection::new(diag(&[0.0, 0.0])).unwrap();
        assert_eq!(tau_rank(&[zero.clone(), zero], &tr).unwrap(), 0.0);
        let a = QuasiProjection::new(diag(&[1.0, 1.0, 0.0])).unwrap();
        let b = QuasiProjection::new(diag(&[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert_eq!(tau_rank(&[a, b], &tr).unwrap(), 0.5 * 2.0 + 0.25 * 4.0);
        let one = WeightedTrace::new(vec![1.0]).unwrap();
        let c = QuasiProjection::new(diag(&[0.9, 0.05, 1.02])).unwrap();
        assert_eq!(tau_rank(&[c], &one).unwrap(), 2.0);
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(matches!(WeightedTrace::new(vec![1.0, 0.0]), Err(Error::InvalidWeights(_))));
        assert!(matches!(WeightedTrace::new(vec![]), Err(Error::InvalidWeights(_))));
    }

    #[test]
    fn tau_signature_examples() {
        let tr = WeightedTrace::new(vec![0.5, 2.0]).unwrap();
        let ids = [HermitianMatrix::identity(3), HermitianMatrix::identity(5)];
        assert_eq!(tau_signature(&ids, &tr, None).unwrap(), 0.5 * 3.0 + 2.0 * 5.0);
        let one = WeightedTrace::new(vec![1.0]).unwrap();
        assert_eq!(tau_signature(&[diag(&[3.0, -1.0, 2.0])], &one, None).unwrap(), 1.0);
        let unit = WeightedTrace::new(vec![1.0, 1.0]).unwrap();
        let l = [diag(&[1.0, 1.0, 2.0, 3.0]), diag(&[-1.0, -1.0, -2.0, -3.0])];
        assert_eq!(tau_signature(&l, &unit, None).unwrap(), 0.0);
    }

    #[test]
    fn weighted_index_matches_weighted_oracle() {
        let bm = block_model(&[0.5, 0.25], &[1, -2], 256).unwrap();
        let opts = HalfSignatureOptions {
            t: Some(20.0),
            lambda: Some(200.5),
            skip_certificates: true,
            ..Default::default()
        };
        let r = semifinite_half_signature(&bm, 0.1, 0.1, &opts).unwrap();
        assert!((r.tau_index - bm.tau_index_oracle().unwrap()).abs() < 1e-9);
        assert_eq!(r.tau_hat_truncation, 0.75 * 802.0);
    }

    #[test]
    fn trivial_windings_give_zero() {
        let bm = block_model(&[0.3, 1.7], &[0, 0], 64).unwrap();
        let opts = HalfSignatureOptions {
            t: Some(5.0),
            lambda: Some(40.5),
            skip_certificates: true,
            ..Default::default()
        };
        assert_eq!(semifinite_half_signature(&bm, 0.1, 0.1, &opts).unwrap().tau_index, 0.0);
    }

    #[test]
    fn single_unit_weight_reduces_to_scalar() {
        let bm = block_model(&[1.0], &[1], 128).unwrap();
        let opts = HalfSignatureOptions {
            t: Some(10.0),
            lambda: Some(100.5),
            ..Default::default()
        };
        let r = semifinite_half_signature(&bm, 0.1, 0.1, &opts).unwrap();
        let s = half_signature_index(&circle_model(128, 1).unwrap(), 0.1, 0.1, &opts).unwrap();
        assert_eq!(r.tau_index, s.index as f64);
        assert_eq!(r.per_block, vec![s.index]);
    }

    #[test]
    fn transfer_rule_examples() {
        let bm = block_model(&[0.5, 0.25], &[1, 0], 4).unwrap();
        let dim = 18;
        let unit = |j: usize| {
            let mut v = vec![C64::new(0.0, 0.0); dim];
            v[j] = C64::new(1.0, 0.0);
            v
        };
        let zero = vec![C64::new(0.0, 0.0); dim];
        let same = TransferSample::RankOne {
            xi1: vec![zero.clone(), unit(3)],
            xi2: vec![zero.clone(), unit(3)],
        };
        let apart = TransferSample::RankOne {
            xi1: vec![unit(2), zero.clone()],
            xi2: vec![zero.clone(), unit(2)],
        };
        let proj = TransferSample::Projection {
            blocks: vec![diag(&[1.0, 1.0, 0.0]), diag(&[1.0, 0.0, 0.0])],
        };
        let r = trace_transfer_check(&bm, &[same, apart, proj]).unwrap();
        assert!(r.pass);
        assert_eq!(r.rows[0].direct, 0.25);
        assert_eq!(r.rows[1].direct, 0.0);
        assert_eq!(r.rows[2].transferred, 0.5 * 2.0 + 0.25);
    }

    #[test]
    fn random_samples_pass_both_routes() {
        let bm = block_model(&[0.5, 0.25, 2.0], &[1, -1, 2], 6).unwrap();
        let r = trace_transfer_check(&bm, &random_transfer_samples(&bm, 10, 3)).unwrap();
        assert!(r.pass, "{}", r.max_residual);
        assert_eq!(r.rows.len(), 20);
    }
}
